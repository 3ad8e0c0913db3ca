//! X-quadrature homodyne detection of the probe beam.
//!
//! Convention: `X = a + a†`. A coherent branch `|β⟩` has the X-wavefunction
//!
//! ```text
//! ψ_β(x) = (2π)^{-1/4} exp(−(x − 2 Re β)²/4 + i Im β · x − i Re β · Im β)
//! ```
//!
//! so its outcome density is a unit-variance Gaussian centred on `2 Re β`.
//! With a real probe amplitude `α` and branch rotations `kθ`, the peaks sit at
//! `2α cos(kθ)`; windows are bounded by the midpoints between adjacent peaks.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::optics::Correction;
use crate::state::{HybridState, ProbeBranch, QubitState};

/// Outcome variance of a single coherent branch.
pub const QUADRATURE_VARIANCE: f64 = 1.0;

/// Outcome densities below this are treated as impossible.
pub const IMPOSSIBLE_DENSITY: f64 = 1e-30;

/// Largest block size for which window tables are built.
pub const MAX_WINDOW_BLOCK: usize = 24;

const MEAN_MERGE_RTOL: f64 = 1e-9;

/// How the homodyne outcome of an entangler is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum Readout {
    /// Draw `x` from the outcome density and collapse exactly.
    Sample,
    /// Collapse exactly at the injected outcome `x`.
    Quadrature(f64),
    /// Force window `k`: project onto the branches of that window and
    /// collapse at its peak. Models error-free discrimination.
    Window(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub x: f64,
    pub window_k: usize,
    pub corrections: Vec<Correction>,
    pub probability_density: f64,
}

/// Unit-modulus phase part of `ψ_β(x)`: `exp(i Im β (x − Re β))`.
///
/// Collapse and feed-forward share this function so that the phases they
/// compute for the same branch and outcome are bit-identical.
pub fn phase_factor(beta: Complex64, x: f64) -> Complex64 {
    Complex64::from_polar(1.0, beta.im * (x - beta.re))
}

fn log_envelope(beta: Complex64, x: f64) -> f64 {
    let d = x - 2.0 * beta.re;
    -0.25 * d * d
}

/// `ψ_β(x)` in the `X = a + a†` convention.
pub fn wavefunction(beta: Complex64, x: f64) -> Complex64 {
    let norm = (2.0 * PI).powf(-0.25);
    phase_factor(beta, x) * (norm * log_envelope(beta, x).exp())
}

fn gaussian_pdf(x: f64, mean: f64) -> f64 {
    let d = x - mean;
    (-0.5 * d * d / QUADRATURE_VARIANCE).exp() / (2.0 * PI * QUADRATURE_VARIANCE).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: f64,
    pub variance: f64,
}

/// Gaussian mixture describing the homodyne outcome distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDensity {
    components: Vec<GaussianComponent>,
}

impl OutcomeDensity {
    /// Components ordered by decreasing mean.
    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.components.iter().map(|c| c.weight * gaussian_pdf(x, c.mean)).sum()
    }

    /// Draws a component index and an outcome from it.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, f64) {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = self.components.len() - 1;
        for (i, c) in self.components.iter().enumerate() {
            acc += c.weight;
            if u < acc {
                pick = i;
                break;
            }
        }
        let z: f64 = rng.sample(StandardNormal);
        (pick, self.components[pick].mean + z * QUADRATURE_VARIANCE.sqrt())
    }
}

/// Outcome distribution of the probe: one component per distinct branch mean.
///
/// Weights are the squared-amplitude mass on each mean, normalized to one.
/// This is exact when no pattern carries two distinct probe branches, which
/// holds for every state produced by a Kerr network acting on a single probe.
pub fn outcome_density(state: &HybridState) -> Result<OutcomeDensity> {
    state.require_probe()?;
    let mut pts: Vec<(f64, f64)> =
        state.terms().iter().map(|t| (t.branch.quadrature_mean(), t.amplitude.norm_sqr())).collect();
    pts.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut components: Vec<GaussianComponent> = Vec::new();
    for (mean, w) in pts {
        match components.last_mut() {
            Some(last) if (last.mean - mean).abs() <= MEAN_MERGE_RTOL * last.mean.abs().max(1.0) => last.weight += w,
            _ => components.push(GaussianComponent { weight: w, mean, variance: QUADRATURE_VARIANCE }),
        }
    }
    let total: f64 = components.iter().map(|c| c.weight).sum();
    for c in &mut components {
        c.weight /= total;
    }
    Ok(OutcomeDensity { components })
}

pub fn sample_x<R: Rng + ?Sized>(state: &HybridState, rng: &mut R) -> Result<f64> {
    Ok(outcome_density(state)?.sample(rng).1)
}

/// Collapses the probe at outcome `x`, returning the renormalized
/// polarization state and the outcome density at `x`.
pub fn collapse_with_density(state: &HybridState, x: f64) -> Result<(QubitState, f64)> {
    collapse_filtered(state, x, |_| true)
}

pub fn collapse(state: &HybridState, x: f64) -> Result<QubitState> {
    collapse_with_density(state, x).map(|(s, _)| s)
}

/// Collapse restricted to the terms whose branch satisfies `keep`.
pub fn collapse_filtered<F>(state: &HybridState, x: f64, keep: F) -> Result<(QubitState, f64)>
where
    F: Fn(&ProbeBranch) -> bool,
{
    state.require_probe()?;
    if !x.is_finite() {
        return Err(Error::invalid(format!("outcome {x} is not finite")));
    }
    let kept: Vec<_> = state.terms().iter().filter(|t| keep(&t.branch)).collect();
    let log_max = kept.iter().map(|t| log_envelope(t.branch.0, x)).fold(f64::NEG_INFINITY, f64::max);
    if kept.is_empty() || log_max == f64::NEG_INFINITY {
        return Err(Error::ImpossibleOutcome("no probe branch is compatible with the outcome".into()));
    }
    let scaled: Vec<(u64, Complex64)> = kept
        .iter()
        .map(|t| {
            let env = (log_envelope(t.branch.0, x) - log_max).exp();
            (t.pattern, t.amplitude * phase_factor(t.branch.0, x) * env)
        })
        .collect();
    let mut by_pattern = std::collections::BTreeMap::<u64, Complex64>::new();
    for (p, a) in &scaled {
        *by_pattern.entry(*p).or_default() += a;
    }
    let scaled_norm: f64 = by_pattern.values().map(|a| a.norm_sqr()).sum();
    let log_density = scaled_norm.ln() + 2.0 * log_max - 0.5 * (2.0 * PI).ln();
    if !(log_density >= IMPOSSIBLE_DENSITY.ln()) {
        return Err(Error::ImpossibleOutcome(format!("outcome density at x = {x} is below {IMPOSSIBLE_DENSITY:e}")));
    }
    let qubits = QubitState::from_terms(state.n_qubits(), by_pattern).map_err(|e| match e {
        Error::DegenerateState => Error::ImpossibleOutcome(format!("every term vanishes at x = {x}")),
        other => other,
    })?;
    Ok((qubits, log_density.exp()))
}

/// Peak and boundary geometry of the `2^{m−1}` homodyne windows.
#[derive(Debug, Clone, PartialEq)]
pub struct Windows {
    alpha: f64,
    theta: f64,
    peaks: Vec<f64>,
    boundaries: Vec<f64>,
    monotone: bool,
}

impl Windows {
    pub fn new(alpha: f64, theta: f64, m: usize) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::invalid(format!("probe amplitude must be positive, got {alpha}")));
        }
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(Error::invalid(format!("Kerr phase must be positive, got {theta}")));
        }
        if m == 0 {
            return Err(Error::invalid("block size must be at least 1"));
        }
        if m > MAX_WINDOW_BLOCK {
            return Err(Error::Size(format!("block size {m} exceeds {MAX_WINDOW_BLOCK}")));
        }
        let count = 1usize << (m - 1);
        let peaks: Vec<f64> = (0..count).map(|k| 2.0 * alpha * (k as f64 * theta).cos()).collect();
        let boundaries = (0..count.saturating_sub(1))
            .map(|k| alpha * ((k as f64 * theta).cos() + ((k + 1) as f64 * theta).cos()))
            .collect();
        let monotone = (count - 1) as f64 * theta <= PI;
        Ok(Self { alpha, theta, peaks, boundaries, monotone })
    }

    pub fn count(&self) -> usize {
        self.peaks.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn peak(&self, k: usize) -> f64 {
        self.peaks[k]
    }

    pub fn peaks(&self) -> &[f64] {
        &self.peaks
    }

    /// `peak(k) − peak(k+1)`, evaluated without cancellation.
    pub fn gap(&self, k: usize) -> f64 {
        let t = self.theta;
        4.0 * self.alpha * ((2 * k + 1) as f64 * t / 2.0).sin() * (t / 2.0).sin()
    }

    /// Upper and lower edges of window `k` (infinite at the ends).
    pub fn bounds(&self, k: usize) -> (f64, f64) {
        let upper = if k == 0 { f64::INFINITY } else { self.boundaries[k - 1] };
        let lower = self.boundaries.get(k).copied().unwrap_or(f64::NEG_INFINITY);
        (lower, upper)
    }

    /// Window whose peak is nearest to `x`; ties go to the smaller `k`.
    pub fn classify(&self, x: f64) -> usize {
        if self.monotone {
            self.boundaries.partition_point(|&b| x < b)
        } else {
            let mut best = 0;
            for k in 1..self.peaks.len() {
                if (x - self.peaks[k]).abs() < (x - self.peaks[best]).abs() {
                    best = k;
                }
            }
            best
        }
    }

    /// Window whose peak is nearest to the branch's outcome mean.
    pub fn window_of(&self, branch: &ProbeBranch) -> usize {
        self.classify(branch.quadrature_mean())
    }
}

pub fn classify(x: f64, alpha: f64, theta: f64, m: usize) -> Result<usize> {
    Ok(Windows::new(alpha, theta, m)?.classify(x))
}

/// Probability that a homodyne outcome lands outside its own window,
/// averaged over windows with equal weight (the uniform-pattern input puts
/// two patterns in every window). Each adjacent boundary contributes
/// `½ erfc(Δ/(2√2))` to each of the two windows it separates.
pub fn misclassification_prob(alpha: f64, theta: f64, m: usize) -> Result<f64> {
    let w = Windows::new(alpha, theta, m)?;
    let total: f64 = (0..w.count().saturating_sub(1)).map(|k| erfc(w.gap(k).abs() / (2.0 * SQRT_2))).sum();
    Ok(total / w.count() as f64)
}

/// Same quantity as [`misclassification_prob`], obtained by integrating each
/// window's Gaussian tails with composite Simpson quadrature instead of erfc.
pub fn misclassification_prob_quadrature(alpha: f64, theta: f64, m: usize) -> Result<f64> {
    let w = Windows::new(alpha, theta, m)?;
    let mut total = 0.0;
    for k in 0..w.count() {
        let (lower, upper) = w.bounds(k);
        let mean = w.peak(k);
        if upper.is_finite() {
            total += gaussian_tail(upper - mean);
        }
        if lower.is_finite() {
            total += gaussian_tail(mean - lower);
        }
    }
    Ok(total / w.count() as f64)
}

/// `∫_d^∞ φ(t) dt` for the standard normal density, truncated 40σ past `d`.
fn gaussian_tail(d: f64) -> f64 {
    if d < 0.0 {
        return 1.0 - gaussian_tail(-d);
    }
    const INTERVALS: usize = 8000;
    const SPAN: f64 = 40.0;
    let h = SPAN / INTERVALS as f64;
    let f = |t: f64| gaussian_pdf(t, 0.0);
    let mut acc = f(d) + f(d + SPAN);
    for i in 1..INTERVALS {
        let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += weight * f(d + i as f64 * h);
    }
    acc * h / 3.0
}

/// Monte Carlo misclassification rate and its binomial standard error:
/// pick a window uniformly, draw `x` from its Gaussian, classify.
pub fn misclassification_monte_carlo<R: Rng + ?Sized>(
    alpha: f64,
    theta: f64,
    m: usize,
    samples: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let w = Windows::new(alpha, theta, m)?;
    let mut errors = 0usize;
    for _ in 0..samples {
        let k = rng.random_range(0..w.count());
        let z: f64 = rng.sample(StandardNormal);
        if w.classify(w.peak(k) + z) != k {
            errors += 1;
        }
    }
    let p = errors as f64 / samples as f64;
    Ok((p, (p * (1.0 - p) / samples as f64).sqrt()))
}
