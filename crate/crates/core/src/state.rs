//! Sparse polarization-qubit states, optionally entangled with a coherent probe.
//!
//! Qubit `i` of a pattern is bit `i` of its integer encoding (qubit 0 is the
//! least-significant bit), with `H ↦ 0` and `V ↦ 1`. Blocks of an `m`-photon
//! partition occupy the contiguous index ranges `[j·m, (j+1)·m)`.
//!
//! Coherent probe states are stored by their complex amplitude only and are
//! never expanded in the Fock basis. Two probe branches attached to the same
//! pattern are treated as one when their amplitudes differ by at most
//! [`BRANCH_MERGE_TOL`].

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest register the `u64` pattern encoding supports.
pub const MAX_QUBITS: usize = 63;

/// Absolute distance below which two probe amplitudes are the same branch.
pub const BRANCH_MERGE_TOL: f64 = 1e-9;

/// Terms with `|amplitude|` below this are dropped by canonicalization.
pub const AMPLITUDE_PRUNE_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    pub fn bit(self) -> u64 {
        match self {
            Polarization::H => 0,
            Polarization::V => 1,
        }
    }

    pub fn from_bit(bit: u64) -> Self {
        if bit & 1 == 0 {
            Polarization::H
        } else {
            Polarization::V
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Polarization::H => 'H',
            Polarization::V => 'V',
        }
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// Relative sign between the two branches of a GHZ-like superposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn from_i32(sign: i32) -> Result<Self> {
        match sign {
            1 => Ok(Sign::Plus),
            -1 => Ok(Sign::Minus),
            other => Err(Error::invalid(format!("sign must be +1 or -1, got {other}"))),
        }
    }

    pub fn as_i32(self) -> i32 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }
}

pub(crate) fn check_qubit_count(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("qubit count must be at least 1"));
    }
    if n > MAX_QUBITS {
        return Err(Error::Size(format!("{n} qubits exceeds the limit of {MAX_QUBITS}")));
    }
    Ok(())
}

#[inline]
pub(crate) fn full_mask(n: usize) -> u64 {
    (1u64 << n) - 1
}

/// Computational-basis label of `len` polarization qubits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Pattern {
    bits: u64,
    len: usize,
}

impl Pattern {
    pub fn new(bits: u64, len: usize) -> Result<Self> {
        check_qubit_count(len)?;
        if bits & !full_mask(len) != 0 {
            return Err(Error::invalid(format!("bits {bits:#b} do not fit in {len} qubits")));
        }
        Ok(Self { bits, len })
    }

    pub(crate) fn from_raw(bits: u64, len: usize) -> Self {
        debug_assert!((1..=MAX_QUBITS).contains(&len) && bits & !full_mask(len) == 0);
        Self { bits, len }
    }

    pub fn uniform(len: usize, pol: Polarization) -> Result<Self> {
        check_qubit_count(len)?;
        let bits = match pol {
            Polarization::H => 0,
            Polarization::V => full_mask(len),
        };
        Ok(Self { bits, len })
    }

    /// Parses a string of `H`/`V` characters, qubit 0 first.
    pub fn from_hv(s: &str) -> Result<Self> {
        let len = s.chars().count();
        check_qubit_count(len)?;
        let mut bits = 0u64;
        for (i, c) in s.chars().enumerate() {
            match c {
                'H' | 'h' => {}
                'V' | 'v' => bits |= 1 << i,
                other => return Err(Error::invalid(format!("unexpected character {other:?} in pattern"))),
            }
        }
        Ok(Self { bits, len })
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, qubit: usize) -> Polarization {
        Polarization::from_bit(self.bits >> qubit)
    }

    pub fn complement(&self) -> Self {
        Self { bits: !self.bits & full_mask(self.len), len: self.len }
    }

    /// Number of `V` qubits.
    pub fn weight(&self) -> u32 {
        self.bits.count_ones()
    }

    /// Order of the `H`/`V` strings (`H < V`, qubit 0 most significant).
    pub fn lex_cmp(&self, other: &Self) -> Ordering {
        let shift = 64 - self.len.max(other.len) as u32;
        let a = self.bits.reverse_bits() >> shift;
        let b = other.bits.reverse_bits() >> shift;
        a.cmp(&b).then(self.len.cmp(&other.len))
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            write!(f, "{}", self.get(i))?;
        }
        Ok(())
    }
}

/// One coherent amplitude `α·e^{iφ}` of the probe beam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeBranch(pub Complex64);

impl ProbeBranch {
    pub fn amplitude(&self) -> Complex64 {
        self.0
    }

    /// Overlap `⟨self|other⟩` of two coherent states.
    pub fn overlap(&self, other: &ProbeBranch) -> Complex64 {
        coherent_overlap(self.0, other.0)
    }

    /// Mean of the X-quadrature outcome distribution, `2·Re β`.
    pub fn quadrature_mean(&self) -> f64 {
        2.0 * self.0.re
    }

    pub fn same_branch(&self, other: &ProbeBranch) -> bool {
        (self.0 - other.0).norm() <= BRANCH_MERGE_TOL
    }
}

/// `⟨β|γ⟩ = exp(−|β|²/2 − |γ|²/2 + β*γ)`.
pub fn coherent_overlap(beta: Complex64, gamma: Complex64) -> Complex64 {
    (beta.conj() * gamma - 0.5 * beta.norm_sqr() - 0.5 * gamma.norm_sqr()).exp()
}

/// A probe-free sparse superposition of polarization patterns.
#[derive(Debug, Clone, PartialEq)]
pub struct QubitState {
    n: usize,
    terms: BTreeMap<u64, Complex64>,
}

impl QubitState {
    /// Builds a state from unnormalized terms; duplicates are summed, tiny
    /// terms pruned and the result renormalized.
    pub fn from_terms<I>(n: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u64, Complex64)>,
    {
        check_qubit_count(n)?;
        let mask = full_mask(n);
        let mut map = BTreeMap::new();
        for (bits, amp) in terms {
            if bits & !mask != 0 {
                return Err(Error::invalid(format!("pattern {bits:#b} does not fit in {n} qubits")));
            }
            *map.entry(bits).or_insert(ZERO) += amp;
        }
        Self { n, terms: map }.canonicalize()
    }

    pub fn basis(pattern: Pattern) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(pattern.bits, Complex64::new(1.0, 0.0));
        Self { n: pattern.len, terms }
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    /// Number of stored terms.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn amplitude(&self, pattern: &Pattern) -> Complex64 {
        if pattern.len != self.n {
            return ZERO;
        }
        self.terms.get(&pattern.bits).copied().unwrap_or(ZERO)
    }

    pub fn probability(&self, pattern: &Pattern) -> f64 {
        self.amplitude(pattern).norm_sqr()
    }

    /// Terms in ascending integer-encoding order.
    pub fn iter(&self) -> impl Iterator<Item = (Pattern, Complex64)> + '_ {
        self.terms.iter().map(move |(&bits, &amp)| (Pattern::from_raw(bits, self.n), amp))
    }

    pub(crate) fn raw_terms(&self) -> &BTreeMap<u64, Complex64> {
        &self.terms
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn inner(&self, other: &QubitState) -> Result<Complex64> {
        if self.n != other.n {
            return Err(Error::Shape(format!("{} vs {} qubits", self.n, other.n)));
        }
        let (small, large, conj_small) =
            if self.terms.len() <= other.terms.len() { (self, other, true) } else { (other, self, false) };
        let mut acc = ZERO;
        for (bits, a) in &small.terms {
            if let Some(b) = large.terms.get(bits) {
                acc += if conj_small { a.conj() * b } else { b.conj() * a };
            }
        }
        Ok(acc)
    }

    /// `self ⊗ other`, with `other`'s qubits appended after `self`'s.
    pub fn tensor(&self, other: &QubitState) -> Result<QubitState> {
        let n = self.n + other.n;
        check_qubit_count(n)?;
        let terms =
            self.terms.iter().flat_map(|(&a, &x)| other.terms.iter().map(move |(&b, &y)| (a | (b << self.n), x * y)));
        QubitState::from_terms(n, terms)
    }

    /// Merges duplicates, prunes tiny terms, renormalizes. Idempotent.
    pub fn canonicalize(mut self) -> Result<Self> {
        self.terms.retain(|_, a| a.norm() >= AMPLITUDE_PRUNE_TOL);
        let norm = self.norm_sqr().sqrt();
        if self.terms.is_empty() || norm == 0.0 {
            return Err(Error::DegenerateState);
        }
        for a in self.terms.values_mut() {
            *a /= norm;
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridTerm {
    pub pattern: u64,
    pub branch: ProbeBranch,
    pub amplitude: Complex64,
}

/// Polarization patterns entangled with coherent probe branches.
///
/// Terms are kept sorted by pattern and, within a pattern, by branch
/// amplitude. Without a probe every term carries the trivial branch `0`.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridState {
    n: usize,
    has_probe: bool,
    terms: Vec<HybridTerm>,
}

impl HybridState {
    /// Attaches a probe `|α⟩` to every pattern of `qubits`.
    pub fn with_probe(qubits: &QubitState, alpha: Complex64) -> Self {
        let terms = qubits
            .terms
            .iter()
            .map(|(&pattern, &amplitude)| HybridTerm { pattern, branch: ProbeBranch(alpha), amplitude })
            .collect();
        Self { n: qubits.n, has_probe: true, terms }
    }

    pub fn without_probe(qubits: &QubitState) -> Self {
        let mut s = Self::with_probe(qubits, ZERO);
        s.has_probe = false;
        s
    }

    pub fn from_terms<I>(n: usize, has_probe: bool, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = HybridTerm>,
    {
        check_qubit_count(n)?;
        let mask = full_mask(n);
        let mut collected = Vec::new();
        for mut t in terms {
            if t.pattern & !mask != 0 {
                return Err(Error::invalid(format!("pattern {:#b} does not fit in {n} qubits", t.pattern)));
            }
            if !has_probe {
                t.branch = ProbeBranch(ZERO);
            }
            collected.push(t);
        }
        Self { n, has_probe, terms: collected }.canonicalize()
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn has_probe(&self) -> bool {
        self.has_probe
    }

    pub fn terms(&self) -> &[HybridTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn require_probe(&self) -> Result<()> {
        if self.has_probe {
            Ok(())
        } else {
            Err(Error::State("no probe beam attached".into()))
        }
    }

    /// Drops the trivial probe of a probe-free state.
    pub fn into_qubit_state(self) -> Result<QubitState> {
        if self.has_probe {
            return Err(Error::State("probe still attached; measure it first".into()));
        }
        QubitState::from_terms(self.n, self.terms.into_iter().map(|t| (t.pattern, t.amplitude)))
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr_sorted(&self.terms)
    }

    pub fn inner(&self, other: &HybridState) -> Result<Complex64> {
        if self.n != other.n || self.has_probe != other.has_probe {
            return Err(Error::Shape(format!(
                "({} qubits, probe={}) vs ({} qubits, probe={})",
                self.n, self.has_probe, other.n, other.has_probe
            )));
        }
        let mut acc = ZERO;
        let mut j0 = 0;
        for a in &self.terms {
            while j0 < other.terms.len() && other.terms[j0].pattern < a.pattern {
                j0 += 1;
            }
            for b in other.terms[j0..].iter().take_while(|b| b.pattern == a.pattern) {
                acc += a.amplitude.conj() * b.amplitude * a.branch.overlap(&b.branch);
            }
        }
        Ok(acc)
    }

    /// Applies `f` to every probe branch (terms keep their patterns).
    pub fn map_branches<F>(&self, f: F) -> Result<Self>
    where
        F: Fn(u64, ProbeBranch) -> ProbeBranch,
    {
        self.require_probe()?;
        let terms = self.terms.iter().map(|t| HybridTerm { branch: f(t.pattern, t.branch), ..*t });
        Self { n: self.n, has_probe: true, terms: terms.collect() }.canonicalize()
    }

    /// Merges terms whose pattern matches and whose branches lie within
    /// [`BRANCH_MERGE_TOL`], prunes tiny terms, renormalizes. Idempotent.
    pub fn canonicalize(mut self) -> Result<Self> {
        self.terms.sort_by(|a, b| {
            a.pattern
                .cmp(&b.pattern)
                .then(a.branch.0.re.total_cmp(&b.branch.0.re))
                .then(a.branch.0.im.total_cmp(&b.branch.0.im))
        });
        let mut merged: Vec<HybridTerm> = Vec::with_capacity(self.terms.len());
        let mut group_start = 0;
        for t in self.terms {
            if merged.last().is_none_or(|last| last.pattern != t.pattern) {
                group_start = merged.len();
            }
            match merged[group_start..].iter_mut().find(|m| m.branch.same_branch(&t.branch)) {
                Some(m) => m.amplitude += t.amplitude,
                None => merged.push(t),
            }
        }
        merged.retain(|t| t.amplitude.norm() >= AMPLITUDE_PRUNE_TOL);
        let norm = norm_sqr_sorted(&merged).sqrt();
        if merged.is_empty() || !(norm > 0.0) {
            return Err(Error::DegenerateState);
        }
        for t in &mut merged {
            t.amplitude /= norm;
        }
        self.terms = merged;
        Ok(self)
    }
}

fn norm_sqr_sorted(terms: &[HybridTerm]) -> f64 {
    let mut acc = 0.0;
    let mut start = 0;
    while start < terms.len() {
        let end = start + terms[start..].iter().take_while(|t| t.pattern == terms[start].pattern).count();
        let group = &terms[start..end];
        for a in group {
            for b in group {
                acc += (a.amplitude.conj() * b.amplitude * a.branch.overlap(&b.branch)).re;
            }
        }
        start = end;
    }
    acc
}

/// States on which gates act pattern-by-pattern.
pub trait Register: Sized {
    fn n_qubits(&self) -> usize;

    /// Rebuilds the state, sending each pattern to the weighted images
    /// emitted by `f`, then canonicalizes.
    fn remap<F>(&self, f: F) -> Result<Self>
    where
        F: Fn(u64, &mut dyn FnMut(u64, Complex64));
}

impl Register for QubitState {
    fn n_qubits(&self) -> usize {
        self.n
    }

    fn remap<F>(&self, f: F) -> Result<Self>
    where
        F: Fn(u64, &mut dyn FnMut(u64, Complex64)),
    {
        let mut out: BTreeMap<u64, Complex64> = BTreeMap::new();
        for (&bits, &amp) in &self.terms {
            f(bits, &mut |image, factor| *out.entry(image).or_insert(ZERO) += amp * factor);
        }
        QubitState { n: self.n, terms: out }.canonicalize()
    }
}

impl Register for HybridState {
    fn n_qubits(&self) -> usize {
        self.n
    }

    fn remap<F>(&self, f: F) -> Result<Self>
    where
        F: Fn(u64, &mut dyn FnMut(u64, Complex64)),
    {
        let mut out = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            f(t.pattern, &mut |image, factor| {
                out.push(HybridTerm { pattern: image, branch: t.branch, amplitude: t.amplitude * factor })
            });
        }
        HybridState { n: self.n, has_probe: self.has_probe, terms: out }.canonicalize()
    }
}

pub fn inner_product(a: &HybridState, b: &HybridState) -> Result<Complex64> {
    a.inner(b)
}

/// `|⟨a|b⟩|²`, clamped to `[0, 1]`.
pub fn fidelity(a: &QubitState, b: &QubitState) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr().min(1.0))
}

/// `((|H⟩ + s|V⟩)/√2)^{⊗n}`.
pub fn make_plus_product(n: usize, sign: Sign) -> Result<QubitState> {
    check_qubit_count(n)?;
    if n > 30 {
        return Err(Error::Size(format!("a {n}-qubit product has 2^{n} terms")));
    }
    let scale = 0.5f64.powf(n as f64 / 2.0);
    let s = sign.factor();
    let terms = (0..1u64 << n).map(|bits| {
        let amp = if bits.count_ones() % 2 == 1 { s * scale } else { scale };
        (bits, Complex64::new(amp, 0.0))
    });
    QubitState::from_terms(n, terms)
}

/// `(|H…H⟩ + s|V…V⟩)/√2`. For `n = 1` this is the single-qubit `|±⟩`.
pub fn make_ghz(n: usize, sign: Sign) -> Result<QubitState> {
    check_qubit_count(n)?;
    let a = std::f64::consts::FRAC_1_SQRT_2;
    QubitState::from_terms(n, [(0, Complex64::new(a, 0.0)), (full_mask(n), Complex64::new(sign.factor() * a, 0.0))])
}

/// Concatenated GHZ state `(|GHZ_m⁺⟩^{⊗k} ± |GHZ_m⁻⟩^{⊗k})/√2`, expanded as
/// the equal superposition of block patterns with an even (`+`) or odd (`−`)
/// number of all-`V` blocks.
pub fn make_cghz(k: usize, m: usize, sign: Sign) -> Result<QubitState> {
    if k == 0 || m == 0 {
        return Err(Error::invalid("k and m must both be at least 1"));
    }
    let n = k.checked_mul(m).ok_or_else(|| Error::Size("k·m overflows".into()))?;
    check_qubit_count(n)?;
    let want_odd = sign == Sign::Minus;
    let block = full_mask(m);
    let amp = Complex64::new(0.5f64.powf((k - 1) as f64 / 2.0), 0.0);
    let terms = (0..1u64 << k).filter(|sel| (sel.count_ones() % 2 == 1) == want_odd).map(|sel| {
        let bits = (0..k).filter(|j| sel >> j & 1 == 1).fold(0u64, |acc, j| acc | block << (j * m));
        (bits, amp)
    });
    QubitState::from_terms(n, terms)
}
