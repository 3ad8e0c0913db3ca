//! Feasibility and robustness numbers: how large the probe must be for a
//! given block size, and how C-GHZ and plain GHZ encodings fare under
//! i.i.d. phase-flip noise.
//!
//! The noise model is an assumption of this crate, not something the optics
//! fixes; reports carry [`NOISE_MODEL`] so downstream output says so.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homodyne::misclassification_prob;
use crate::state::{make_cghz, make_ghz, Pattern, Polarization, QubitState, Sign};

pub const NOISE_MODEL: &str = "iid-phase-flip";

/// Largest km handled by the exact sparse-support path.
pub const MAX_DEPHASING_QUBITS: usize = 14;

const ALPHA_REL_TOL: f64 = 1e-6;

/// Per-step Kerr phase when the whole ladder of an m-block may use
/// `theta_budget` radians.
pub fn step_theta(m: usize, theta_budget: f64) -> Result<f64> {
    if !(2..=63).contains(&m) {
        return Err(Error::invalid(format!("block size must be in 2..=63 to split a phase budget, got {m}")));
    }
    if !(theta_budget > 0.0 && theta_budget.is_finite()) {
        return Err(Error::invalid(format!("theta budget must be positive, got {theta_budget}")));
    }
    Ok(theta_budget / ((1u64 << (m - 1)) - 1) as f64)
}

/// Smallest probe amplitude whose window misclassification probability is
/// at most `target_err`, to relative precision 1e-6.
pub fn required_alpha(m: usize, theta_budget: f64, target_err: f64) -> Result<f64> {
    if !(target_err > 0.0 && target_err < 0.5) {
        return Err(Error::invalid(format!("target error must lie in (0, 1/2), got {target_err}")));
    }
    let theta = step_theta(m, theta_budget)?;
    let err = |alpha: f64| misclassification_prob(alpha, theta, m);
    let mut lo = 0.0;
    let mut hi = 1.0;
    while err(hi)? > target_err {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::invalid("no finite probe amplitude reaches the target error"));
        }
    }
    while hi - lo > ALPHA_REL_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if err(mid)? <= target_err {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    p: f64,
}

impl NoiseModel {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&p) {
            return Err(Error::invalid(format!("phase-flip probability must lie in [0, 1/2], got {p}")));
        }
        Ok(Self { p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Off-diagonal damping between two patterns at Hamming distance `d`.
    pub fn damping(&self, d: u32) -> f64 {
        (1.0 - 2.0 * self.p).powi(d as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    Cghz,
    Ghz,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub encoding: Encoding,
    pub km: usize,
    pub p: f64,
    pub logical_offdiag: f64,
}

/// Pure state and its two macroscopic branches.
fn encoding_vectors(encoding: Encoding, k: usize, m: usize) -> Result<(QubitState, QubitState, QubitState)> {
    let km = k * m;
    match encoding {
        Encoding::Ghz => Ok((
            make_ghz(km, Sign::Plus)?,
            QubitState::basis(Pattern::uniform(km, Polarization::H)?),
            QubitState::basis(Pattern::uniform(km, Polarization::V)?),
        )),
        Encoding::Cghz => {
            let plus = make_ghz(m, Sign::Plus)?;
            let minus = make_ghz(m, Sign::Minus)?;
            let (mut l0, mut l1) = (plus.clone(), minus.clone());
            for _ in 1..k {
                l0 = l0.tensor(&plus)?;
                l1 = l1.tensor(&minus)?;
            }
            Ok((make_cghz(k, m, Sign::Plus)?, l0, l1))
        }
    }
}

/// Magnitude of ⟨L0|ρ|L1⟩ after i.i.d. phase flips, where L0 and L1 are the
/// encoding's two macroscopic branches. Noiseless value is ½.
pub fn dephase_offdiag(encoding: Encoding, k: usize, m: usize, p: f64) -> Result<CoherenceReport> {
    let noise = NoiseModel::new(p)?;
    if k == 0 || m == 0 {
        return Err(Error::invalid("k and m must both be at least 1"));
    }
    let km = k.saturating_mul(m);
    if km > MAX_DEPHASING_QUBITS {
        return Err(Error::Size(format!(
            "exact dephasing path supports at most {MAX_DEPHASING_QUBITS} qubits, got k·m = {km}"
        )));
    }
    let (psi, l0, l1) = encoding_vectors(encoding, k, m)?;
    // Phase flips keep the pattern support, so ρ stays on psi's support with
    // entries c_s c_t* (1−2p)^{d(s,t)}.
    let support: Vec<(Pattern, Complex64)> = psi.iter().collect();
    let mut total = Complex64::new(0.0, 0.0);
    for &(s, cs) in &support {
        let left = l0.amplitude(&s).conj() * cs;
        if left == Complex64::new(0.0, 0.0) {
            continue;
        }
        for &(t, ct) in &support {
            let d = (s.bits() ^ t.bits()).count_ones();
            total += left * ct.conj() * noise.damping(d) * l1.amplitude(&t);
        }
    }
    // Amplitudes carry factors of 1/√2, so the noiseless sum can land an ulp above ½.
    Ok(CoherenceReport { encoding, km, p, logical_offdiag: total.norm().min(0.5) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodingComparison {
    pub p: f64,
    pub cghz: CoherenceReport,
    pub ghz: CoherenceReport,
    /// C-GHZ keeps at least as much logical coherence as GHZ at equal km.
    pub cghz_at_least_ghz: bool,
}

pub fn compare_encodings(k: usize, m: usize, p_grid: &[f64]) -> Result<Vec<EncodingComparison>> {
    if p_grid.is_empty() {
        return Err(Error::invalid("empty noise grid"));
    }
    let cells: Vec<(Encoding, f64)> = p_grid.iter().flat_map(|&p| [(Encoding::Cghz, p), (Encoding::Ghz, p)]).collect();
    let reports = cells.par_iter().map(|&(enc, p)| dephase_offdiag(enc, k, m, p)).collect::<Result<Vec<_>>>()?;
    Ok(reports
        .chunks_exact(2)
        .map(|pair| EncodingComparison {
            p: pair[0].p,
            cghz: pair[0],
            ghz: pair[1],
            cghz_at_least_ghz: pair[0].logical_offdiag >= pair[1].logical_offdiag,
        })
        .collect())
}
