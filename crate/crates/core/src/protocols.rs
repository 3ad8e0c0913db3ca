//! End-to-end preparation of km-photon concatenated GHZ states.
//!
//! Scheme 1 starts from a km-photon GHZ state, applies a half-wave plate to
//! every photon and runs one entangler per m-photon block; it needs odd `m`.
//! Scheme 2 entangles k blocks of single photons into `GHZ_m⁺^{⊗k}`, lets
//! every block control an m-control Toffoli on one shared ancilla `|H⟩_T`
//! (appended as qubit `km`), and reads the ancilla out in the H/V basis:
//! `H` heralds the even C-GHZ state, `V` the odd one.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::entangler::Entangler;
use crate::error::{Error, Result};
use crate::homodyne::{MeasurementRecord, Readout};
use crate::optics::{hadamard, toffoli_m};
use crate::state::{
    check_qubit_count, full_mask, make_cghz, make_ghz, make_plus_product, Pattern, Polarization, QubitState, Sign,
};

/// Probabilities below this count as zero when forcing an ancilla outcome.
const FORCED_OUTCOME_FLOOR: f64 = 1e-24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GhzSource {
    /// Build the km-photon GHZ input directly.
    Direct,
    /// Prepare it with a km-wide entangler of unit Kerr phase `theta`.
    Entangler { theta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum AncillaReadout {
    Sample,
    Forced(Polarization),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeOptions {
    /// Per-block readouts. Empty means sample every block; a single entry
    /// applies to all blocks.
    pub readouts: Vec<Readout>,
    pub ghz_source: GhzSource,
    pub source_readout: Readout,
    pub ancilla: AncillaReadout,
}

impl Default for SchemeOptions {
    fn default() -> Self {
        Self {
            readouts: Vec::new(),
            ghz_source: GhzSource::Direct,
            source_readout: Readout::Sample,
            ancilla: AncillaReadout::Sample,
        }
    }
}

impl SchemeOptions {
    pub fn forced_windows(windows: &[usize]) -> Self {
        Self { readouts: windows.iter().map(|&k| Readout::Window(k)).collect(), ..Self::default() }
    }

    fn readout(&self, block: usize, k: usize) -> Result<Readout> {
        match self.readouts.len() {
            0 => Ok(Readout::Sample),
            1 => Ok(self.readouts[0]),
            n if n == k => Ok(self.readouts[block]),
            n => Err(Error::invalid(format!("{n} readouts given for {k} blocks"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeResult {
    pub output: QubitState,
    /// One record per block entangler.
    pub records: Vec<MeasurementRecord>,
    /// Ancilla detector click (scheme 2 only).
    pub detector: Option<Polarization>,
    pub target_sign: Sign,
    /// Record of the km-wide entangler when scheme 1 prepares its own input.
    pub source_record: Option<MeasurementRecord>,
}

impl SchemeResult {
    pub fn target(&self, k: usize, m: usize) -> Result<QubitState> {
        make_cghz(k, m, self.target_sign)
    }
}

fn check_sizes(k: usize, m: usize) -> Result<usize> {
    if k == 0 || m == 0 {
        return Err(Error::invalid("k and m must both be at least 1"));
    }
    let n = k.checked_mul(m).ok_or_else(|| Error::Size("k·m overflows".into()))?;
    check_qubit_count(n)?;
    Ok(n)
}

fn entangle_blocks<R: Rng + ?Sized>(
    mut state: QubitState,
    k: usize,
    m: usize,
    alpha: f64,
    theta: f64,
    opts: &SchemeOptions,
    rng: &mut R,
) -> Result<(QubitState, Vec<MeasurementRecord>)> {
    let entangler = Entangler::new(m, alpha, theta)?;
    let mut records = Vec::with_capacity(k);
    for j in 0..k {
        let block: Vec<usize> = (j * m..(j + 1) * m).collect();
        let (next, record) = entangler.run(&state, &block, opts.readout(j, k)?, rng)?;
        state = next;
        records.push(record);
    }
    Ok((state, records))
}

/// C-GHZ from a km-photon GHZ state; requires odd `m`.
pub fn scheme1<R: Rng + ?Sized>(
    k: usize,
    m: usize,
    alpha: f64,
    theta: f64,
    opts: &SchemeOptions,
    rng: &mut R,
) -> Result<SchemeResult> {
    let n = check_sizes(k, m)?;
    if m.is_multiple_of(2) {
        return Err(Error::Precondition(format!(
            "scheme 1 requires an odd block size m (the minus-product input only becomes GHZ⁻ when m is odd); got m = {m}"
        )));
    }
    let (ghz, source_record) = match opts.ghz_source {
        GhzSource::Direct => (make_ghz(n, Sign::Plus)?, None),
        GhzSource::Entangler { theta: source_theta } => {
            let source = Entangler::new(n, alpha, source_theta)?;
            let all: Vec<usize> = (0..n).collect();
            let (s, rec) = source.run(&make_plus_product(n, Sign::Plus)?, &all, opts.source_readout, rng)?;
            (s, Some(rec))
        }
    };
    let mut state = ghz;
    for q in 0..n {
        state = hadamard(&state, q)?;
    }
    let (output, records) = entangle_blocks(state, k, m, alpha, theta, opts, rng)?;
    Ok(SchemeResult { output, records, detector: None, target_sign: Sign::Plus, source_record })
}

/// C-GHZ from km single photons via k entanglers and k m-control Toffolis.
pub fn scheme2<R: Rng + ?Sized>(
    k: usize,
    m: usize,
    alpha: f64,
    theta: f64,
    opts: &SchemeOptions,
    rng: &mut R,
) -> Result<SchemeResult> {
    let n = check_sizes(k, m)?;
    check_qubit_count(n + 1)?;
    let (blocks, records) = entangle_blocks(make_plus_product(n, Sign::Plus)?, k, m, alpha, theta, opts, rng)?;
    let ancilla = QubitState::basis(Pattern::uniform(1, Polarization::H)?);
    let mut state = blocks.tensor(&ancilla)?;
    for j in 0..k {
        let controls: Vec<usize> = (j * m..(j + 1) * m).collect();
        state = toffoli_m(&state, &controls, n)?;
    }
    let (detector, output) = ancilla_measure(&state, n, opts.ancilla, rng)?;
    let target_sign = match detector {
        Polarization::H => Sign::Plus,
        Polarization::V => Sign::Minus,
    };
    Ok(SchemeResult { output, records, detector: Some(detector), target_sign, source_record: None })
}

/// Projective H/V measurement of `target`; the measured qubit is removed and
/// the qubits above it shift down by one.
pub fn ancilla_measure<R: Rng + ?Sized>(
    state: &QubitState,
    target: usize,
    readout: AncillaReadout,
    rng: &mut R,
) -> Result<(Polarization, QubitState)> {
    let n = state.n_qubits();
    if target >= n {
        return Err(Error::invalid(format!("qubit {target} out of range for {n} qubits")));
    }
    if n == 1 {
        return Err(Error::invalid("cannot measure away the only qubit"));
    }
    let bit = 1u64 << target;
    let p_v: f64 = state.raw_terms().iter().filter(|(p, _)| *p & bit != 0).map(|(_, a)| a.norm_sqr()).sum();
    let p_v = p_v / state.norm_sqr();
    let outcome = match readout {
        AncillaReadout::Sample => {
            let u: f64 = rng.random();
            if u < 1.0 - p_v {
                Polarization::H
            } else {
                Polarization::V
            }
        }
        AncillaReadout::Forced(pol) => {
            let p = if pol == Polarization::V { p_v } else { 1.0 - p_v };
            if p < FORCED_OUTCOME_FLOOR {
                return Err(Error::ImpossibleOutcome(format!("detector {pol} has probability {p:e}")));
            }
            pol
        }
    };
    let want = outcome.bit() << target;
    let low = full_mask(target.max(1)) & (bit - 1);
    let terms =
        state.raw_terms().iter().filter(|(p, _)| *p & bit == want).map(|(&p, &a)| ((p & low) | ((p >> 1) & !low), a));
    Ok((outcome, QubitState::from_terms(n - 1, terms)?))
}
