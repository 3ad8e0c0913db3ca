//! The m-photon GHZ entangler: Kerr network, homodyne readout of the probe
//! and classical feed-forward.
//!
//! Kerr couplings use a binary ladder. Photon `i < m−1` sits in a cell
//! triggered by `H` with strength `2^i θ`; the last photon sits in a cell
//! triggered by `V` with strength `(2^{m−1}−1)θ`; a phase shifter of
//! `−(2^{m−1}−1)θ` follows. Writing `b_i = 1` for `V`, a pattern picks up the
//! probe phase
//!
//! ```text
//! f(p) = θ · ( b_{m−1}(2^{m−1}−1) − Σ_{i<m−1} b_i 2^i )
//! ```
//!
//! so `f(H…H) = f(V…V) = 0`, `f(complement p) = −f(p)`, and the pair class
//! `{p, p̄}` with `|f| = kθ` exists exactly once for every `k < 2^{m−1}`.
//! For `m = 2` this gives `HV ↦ +θ` and `VH ↦ −θ`.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homodyne::{collapse_filtered, outcome_density, phase_factor, MeasurementRecord, Readout, Windows};
use crate::optics::{kerr, probe_shift, Correction};
use crate::state::{full_mask, HybridState, Pattern, Polarization, QubitState};

/// One cross-Kerr cell: photon `qubit` (block-local) rotates the probe by
/// `multiple · θ` when it is in the `trigger` polarization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KerrCell {
    pub qubit: usize,
    pub trigger: Polarization,
    pub multiple: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KerrWeights {
    m: usize,
    theta: f64,
    cells: Vec<KerrCell>,
    shifter_multiple: i64,
}

impl KerrWeights {
    pub fn new(m: usize, theta: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("block size must be at least 1"));
        }
        if m > crate::homodyne::MAX_WINDOW_BLOCK {
            return Err(Error::Size(format!("block size {m} is too large for a Kerr ladder")));
        }
        if !theta.is_finite() {
            return Err(Error::invalid("Kerr phase must be finite"));
        }
        let top = (1u64 << (m - 1)) - 1;
        let mut cells: Vec<KerrCell> =
            (0..m - 1).map(|i| KerrCell { qubit: i, trigger: Polarization::H, multiple: 1 << i }).collect();
        cells.push(KerrCell { qubit: m - 1, trigger: Polarization::V, multiple: top });
        Ok(Self { m, theta, cells, shifter_multiple: -(top as i64) })
    }

    pub fn block_size(&self) -> usize {
        self.m
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn cells(&self) -> &[KerrCell] {
        &self.cells
    }

    /// Phase of the probe shifter that follows the cells.
    pub fn shifter_phase(&self) -> f64 {
        self.shifter_multiple as f64 * self.theta
    }

    pub fn window_count(&self) -> usize {
        1 << (self.m - 1)
    }

    /// Net probe phase of a block-local pattern, in units of θ.
    pub fn pattern_multiple(&self, bits: u64) -> i64 {
        let triggered: i64 =
            self.cells.iter().filter(|c| (bits >> c.qubit) & 1 == c.trigger.bit()).map(|c| c.multiple as i64).sum();
        triggered + self.shifter_multiple
    }

    pub fn pattern_phase(&self, pattern: &Pattern) -> Result<f64> {
        if pattern.len() != self.m {
            return Err(Error::invalid(format!("pattern has {} qubits, block has {}", pattern.len(), self.m)));
        }
        Ok(self.pattern_multiple(pattern.bits()) as f64 * self.theta)
    }

    /// Per-photon strengths `h_i` in the symmetric convention where photon
    /// `i` contributes `+h_i` when `H` and `−h_i` when `V`.
    pub fn signed_strengths(&self) -> Vec<f64> {
        self.cells
            .iter()
            .map(|c| {
                let half = c.multiple as f64 * self.theta / 2.0;
                match c.trigger {
                    Polarization::H => half,
                    Polarization::V => -half,
                }
            })
            .collect()
    }

    /// Global offset `φ_glob` of the symmetric convention; zero for this ladder.
    pub fn global_shift(&self) -> f64 {
        let halves: f64 = self.cells.iter().map(|c| c.multiple as f64 * self.theta / 2.0).sum();
        self.shifter_phase() + halves
    }

    /// The two complementary block patterns of window `k`: the one with
    /// phase `−kθ` first, its complement (`+kθ`) second.
    pub fn pair(&self, k: usize) -> Result<(u64, u64)> {
        if k >= self.window_count() {
            return Err(Error::invalid(format!("window {k} out of range 0..{}", self.window_count())));
        }
        let minus = k as u64;
        Ok((minus, !minus & full_mask(self.m)))
    }

    /// Representative of window `k`'s pair: the member with an even number
    /// of `V`s when exactly one has, otherwise the lexicographically smaller.
    pub fn representative(&self, k: usize) -> Result<u64> {
        let (a, b) = self.pair(k)?;
        let even = |p: u64| p.count_ones().is_multiple_of(2);
        Ok(match (even(a), even(b)) {
            (true, false) => a,
            (false, true) => b,
            _ => {
                let pa = Pattern::from_raw(a, self.m);
                let pb = Pattern::from_raw(b, self.m);
                if pa.lex_cmp(&pb).is_le() {
                    a
                } else {
                    b
                }
            }
        })
    }

    /// Probe branch of a block-local pattern, reproducing the exact floating
    /// point operations of the Kerr network.
    pub fn branch_for(&self, alpha: f64, bits: u64) -> Complex64 {
        let mut beta = Complex64::new(alpha, 0.0);
        for c in &self.cells {
            if c.multiple != 0 && (bits >> c.qubit) & 1 == c.trigger.bit() {
                beta *= Complex64::from_polar(1.0, self.cell_phase(c));
            }
        }
        if self.shifter_multiple != 0 {
            beta *= Complex64::from_polar(1.0, self.shifter_phase());
        }
        beta
    }

    fn cell_phase(&self, cell: &KerrCell) -> f64 {
        cell.multiple as f64 * self.theta
    }
}

pub fn kerr_weights(m: usize, theta: f64) -> Result<KerrWeights> {
    KerrWeights::new(m, theta)
}

pub fn pattern_phase(pattern: &Pattern, weights: &KerrWeights) -> Result<f64> {
    weights.pattern_phase(pattern)
}

/// An m-photon entangler with probe amplitude `α` (real, positive) and
/// unit Kerr phase `θ`.
#[derive(Debug, Clone)]
pub struct Entangler {
    weights: KerrWeights,
    alpha: f64,
    windows: Windows,
}

impl Entangler {
    pub fn new(m: usize, alpha: f64, theta: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::invalid(format!("probe amplitude must be positive, got {alpha}")));
        }
        let limit = std::f64::consts::PI / (1u64 << m.min(62)) as f64;
        if !(theta > 0.0 && theta < limit) {
            return Err(Error::invalid(format!("Kerr phase must lie in (0, π/2^{m}), got {theta}")));
        }
        let weights = KerrWeights::new(m, theta)?;
        let windows = Windows::new(alpha, theta, m)?;
        Ok(Self { weights, alpha, windows })
    }

    pub fn weights(&self) -> &KerrWeights {
        &self.weights
    }

    pub fn windows(&self) -> &Windows {
        &self.windows
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    fn check_block(&self, state: &QubitState, block: &[usize]) -> Result<()> {
        if block.len() != self.weights.m {
            return Err(Error::invalid(format!(
                "block has {} photons, entangler expects {}",
                block.len(),
                self.weights.m
            )));
        }
        let mut seen = 0u64;
        for &q in block {
            if q >= state.n_qubits() || seen >> q & 1 == 1 {
                return Err(Error::invalid(format!("block index {q} is out of range or repeated")));
            }
            seen |= 1 << q;
        }
        Ok(())
    }

    /// Attaches the probe `|α⟩` and runs the Kerr network on `block`.
    pub fn evolve(&self, state: &QubitState, block: &[usize]) -> Result<HybridState> {
        self.check_block(state, block)?;
        let mut hybrid = HybridState::with_probe(state, Complex64::new(self.alpha, 0.0));
        for cell in self.weights.cells() {
            if cell.multiple != 0 {
                hybrid = kerr(&hybrid, block[cell.qubit], self.weights.cell_phase(cell), cell.trigger)?;
            }
        }
        if self.weights.shifter_multiple != 0 {
            hybrid = probe_shift(&hybrid, self.weights.shifter_phase())?;
        }
        Ok(hybrid)
    }

    /// Homodyne readout of an evolved state: returns the collapsed state,
    /// outcome, window and outcome density.
    pub fn measure<R: Rng + ?Sized>(
        &self,
        hybrid: &HybridState,
        readout: Readout,
        rng: &mut R,
    ) -> Result<(QubitState, f64, usize, f64)> {
        match readout {
            Readout::Sample => {
                let x = outcome_density(hybrid)?.sample(rng).1;
                self.measure(hybrid, Readout::Quadrature(x), rng)
            }
            Readout::Quadrature(x) => {
                let (state, density) = collapse_filtered(hybrid, x, |_| true)?;
                Ok((state, x, self.windows.classify(x), density))
            }
            Readout::Window(k) => {
                if k >= self.windows.count() {
                    return Err(Error::invalid(format!("window {k} out of range 0..{}", self.windows.count())));
                }
                let x = self.windows.peak(k);
                let (state, density) = collapse_filtered(hybrid, x, |b| self.windows.window_of(b) == k)?;
                Ok((state, x, k, density))
            }
        }
    }

    /// Bit-flips on the `V` positions of window `k`'s representative, then a
    /// phase gate cancelling the outcome-dependent relative phase between the
    /// two members of the pair.
    pub fn feed_forward(
        &self,
        k: usize,
        x: f64,
        state: &QubitState,
        block: &[usize],
    ) -> Result<(QubitState, Vec<Correction>)> {
        self.check_block(state, block)?;
        let rep = self.weights.representative(k)?;
        let other = !rep & full_mask(self.weights.m);
        let mut corrections: Vec<Correction> = (0..self.weights.m)
            .filter(|i| rep >> i & 1 == 1)
            .map(|i| Correction::BitFlip { qubit: block[i] })
            .collect();
        let rel = phase_factor(self.weights.branch_for(self.alpha, other), x)
            * phase_factor(self.weights.branch_for(self.alpha, rep), x).conj();
        let phi = -rel.arg();
        if phi != 0.0 {
            corrections.push(Correction::Phase { qubit: block[0], phi });
        }
        let mut out = state.clone();
        for c in &corrections {
            out = c.apply(&out)?;
        }
        Ok((out, corrections))
    }

    pub fn run<R: Rng + ?Sized>(
        &self,
        state: &QubitState,
        block: &[usize],
        readout: Readout,
        rng: &mut R,
    ) -> Result<(QubitState, MeasurementRecord)> {
        let hybrid = self.evolve(state, block)?;
        let (collapsed, x, window_k, probability_density) = self.measure(&hybrid, readout, rng)?;
        let (out, corrections) = self.feed_forward(window_k, x, &collapsed, block)?;
        Ok((out, MeasurementRecord { x, window_k, corrections, probability_density }))
    }
}

/// Runs the entangler on every qubit of `input` with a sampled outcome.
pub fn run_entangler<R: Rng + ?Sized>(
    input: &QubitState,
    alpha: f64,
    theta: f64,
    rng: &mut R,
) -> Result<(QubitState, MeasurementRecord)> {
    let m = input.n_qubits();
    let block: Vec<usize> = (0..m).collect();
    Entangler::new(m, alpha, theta)?.run(input, &block, Readout::Sample, rng)
}
