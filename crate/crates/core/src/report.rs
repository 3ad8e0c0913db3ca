//! Run configuration, protocol runs over many seeded shots, parameter sweeps
//! and the report documents the command-line front end prints.
//!
//! Shot `i` draws from `ChaCha8Rng::seed_from_u64(seed)` on stream `i`, and
//! every aggregate is reduced in shot order, so reports do not depend on the
//! number of worker threads.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{compare_encodings, required_alpha, step_theta, EncodingComparison, NOISE_MODEL};
use crate::entangler::Entangler;
use crate::error::{Error, Result};
use crate::homodyne::{misclassification_monte_carlo, misclassification_prob, Readout};
use crate::protocols::{scheme1, scheme2, SchemeOptions, SchemeResult};
use crate::state::{fidelity, make_ghz, make_plus_product, Polarization, QubitState, Sign};

pub const SCHEMA_VERSION: &str = "1.0";

pub const SWEEP_CSV_HEADER: &str = "m,theta,alpha,err_closed,err_mc,err_mc_stderr,alpha_required";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchemeKind {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "entangler-only")]
    EntanglerOnly,
    #[serde(rename = "analysis")]
    Analysis,
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1" => Ok(Self::One),
            "2" => Ok(Self::Two),
            "entangler-only" | "entangler" => Ok(Self::EntanglerOnly),
            "analysis" => Ok(Self::Analysis),
            other => {
                Err(Error::invalid(format!("unknown scheme '{other}' (expected 1, 2, entangler-only or analysis)")))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(Error::invalid(format!("unknown format '{other}' (expected json or csv)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub scheme: SchemeKind,
    pub k: usize,
    pub m: usize,
    /// Probe amplitude; when absent the smallest amplitude meeting
    /// `target_err` is used.
    pub alpha: Option<f64>,
    /// Total Kerr phase of one block's ladder.
    pub theta_budget: f64,
    pub shots: usize,
    pub seed: u64,
    /// Forced window per block (or one window for every block).
    pub forced_windows: Option<Vec<usize>>,
    pub output_format: OutputFormat,
    pub verbose: bool,
    pub timing: bool,
    pub target_err: f64,
    pub p_grid: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scheme: SchemeKind::Two,
            k: 2,
            m: 3,
            alpha: None,
            theta_budget: 1e-2,
            shots: 1000,
            seed: 0,
            forced_windows: None,
            output_format: OutputFormat::Json,
            verbose: false,
            timing: false,
            target_err: 1e-3,
            p_grid: vec![0.0, 0.01, 0.05, 0.1, 0.25, 0.5],
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::invalid(format!("bad value '{value}' for {key}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse(key, s)).collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::invalid(format!("bad value '{value}' for {key}"))),
    }
}

impl RunConfig {
    /// Sets one field from its textual form. Keys accept `-` or `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        match key.as_str() {
            "scheme" => self.scheme = value.parse()?,
            "k" => self.k = parse(&key, value)?,
            "m" => self.m = parse(&key, value)?,
            "alpha" => self.alpha = Some(parse(&key, value)?),
            "theta_budget" => self.theta_budget = parse(&key, value)?,
            "shots" => self.shots = parse(&key, value)?,
            "seed" => self.seed = parse(&key, value)?,
            "forced_windows" | "force_window" => self.forced_windows = Some(parse_list(&key, value)?),
            "format" | "output_format" => self.output_format = value.parse()?,
            "verbose" => self.verbose = parse_bool(&key, value)?,
            "timing" => self.timing = parse_bool(&key, value)?,
            "target_err" => self.target_err = parse(&key, value)?,
            "p_grid" => self.p_grid = parse_list(&key, value)?,
            _ => return Err(Error::invalid(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; blank lines and `#` comments are skipped.
    pub fn apply_file_contents(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("config line {}: expected key=value", i + 1)))?;
            self.set(key, value)?;
        }
        Ok(())
    }

    /// Per-step Kerr phase. A single-photon block has no ladder to split, so
    /// it uses the whole budget.
    pub fn theta_step(&self) -> Result<f64> {
        if self.m == 1 {
            if !(self.theta_budget > 0.0 && self.theta_budget.is_finite()) {
                return Err(Error::invalid("theta budget must be positive"));
            }
            return Ok(self.theta_budget);
        }
        step_theta(self.m, self.theta_budget)
    }

    /// Probe amplitude actually used.
    pub fn resolved_alpha(&self) -> Result<f64> {
        match self.alpha {
            Some(a) if a > 0.0 && a.is_finite() => Ok(a),
            Some(a) => Err(Error::invalid(format!("alpha must be positive, got {a}"))),
            None if self.m == 1 => Ok(1.0),
            None => required_alpha(self.m, self.theta_budget, self.target_err),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.m == 0 {
            return Err(Error::invalid("k and m must both be at least 1"));
        }
        if self.shots == 0 {
            return Err(Error::invalid("shots must be at least 1"));
        }
        if !(self.target_err > 0.0 && self.target_err < 0.5) {
            return Err(Error::invalid(format!("target_err must lie in (0, 1/2), got {}", self.target_err)));
        }
        if let Some(p) = self.p_grid.iter().find(|p| !(0.0..=0.5).contains(*p)) {
            return Err(Error::invalid(format!("noise probability {p} outside [0, 1/2]")));
        }
        self.theta_step()?;
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::invalid(format!("alpha must be positive, got {a}")));
            }
        }
        if let Some(ws) = &self.forced_windows {
            let blocks = if self.scheme == SchemeKind::EntanglerOnly { 1 } else { self.k };
            if ws.is_empty() || (ws.len() != 1 && ws.len() != blocks) {
                return Err(Error::invalid(format!("give one forced window or one per block ({blocks})")));
            }
            let count = 1usize.checked_shl(self.m as u32 - 1).unwrap_or(usize::MAX);
            if let Some(w) = ws.iter().find(|&&w| w >= count) {
                return Err(Error::invalid(format!("window {w} out of range for {count} windows")));
            }
        }
        Ok(())
    }

    fn readouts(&self) -> Vec<Readout> {
        self.forced_windows.as_deref().unwrap_or(&[]).iter().map(|&w| Readout::Window(w)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateEntry {
    pub pattern: String,
    pub re: f64,
    pub im: f64,
}

pub fn state_entries(state: &QubitState) -> Vec<StateEntry> {
    state.iter().map(|(p, a)| StateEntry { pattern: p.to_string(), re: a.re, im: a.im }).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub shot: usize,
    pub windows: Vec<usize>,
    pub x: Vec<f64>,
    pub detector: Option<Polarization>,
    pub target_sign: i32,
    pub fidelity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectorCounts {
    #[serde(rename = "H")]
    pub h: usize,
    #[serde(rename = "V")]
    pub v: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResults {
    pub alpha: f64,
    pub theta_step: f64,
    /// Closed-form window misclassification probability of one block.
    pub misclassification_closed: f64,
    pub shots: usize,
    pub mean_fidelity: f64,
    pub min_fidelity: f64,
    pub detector_counts: Option<DetectorCounts>,
    pub detector_h_freq: Option<f64>,
    /// Outcomes per window index, over all blocks and shots.
    pub window_counts: Vec<usize>,
    pub first_output: Vec<StateEntry>,
    pub records: Option<Vec<ShotRecord>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisResults {
    pub noise_model: String,
    pub target_err: f64,
    pub required_alpha: Option<f64>,
    pub comparisons: Vec<EncodingComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub m: usize,
    pub theta: f64,
    pub alpha: f64,
    pub err_closed: f64,
    pub err_mc: f64,
    pub err_mc_stderr: f64,
    pub alpha_required: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResults {
    pub sweep: Sweep,
    pub mc_samples: usize,
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Results {
    Run(RunResults),
    Analysis(AnalysisResults),
    Sweep(SweepResults),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: String,
    pub config: RunConfig,
    pub results: Results,
    /// Only filled when `config.timing` is set, so that reports for equal
    /// seeds stay byte-identical by default.
    pub timing: Option<Timing>,
}

impl Report {
    fn new(config: &RunConfig, results: Results, start: Instant) -> Self {
        let timing = config.timing.then(|| Timing { wall_seconds: start.elapsed().as_secs_f64() });
        Self { schema_version: SCHEMA_VERSION.to_string(), config: config.clone(), results, timing }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::State(e.to_string()))
    }

    /// Tabular view of the results.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::State(e.to_string());
        match &self.results {
            Results::Sweep(s) => {
                for row in &s.rows {
                    w.serialize(row).map_err(csv_err)?;
                }
                if s.rows.is_empty() {
                    w.write_record(SWEEP_CSV_HEADER.split(',')).map_err(csv_err)?;
                }
            }
            Results::Analysis(a) => {
                w.write_record(["p", "km", "cghz_offdiag", "ghz_offdiag", "cghz_at_least_ghz", "noise_model"])
                    .map_err(csv_err)?;
                for c in &a.comparisons {
                    w.write_record([
                        c.p.to_string(),
                        c.cghz.km.to_string(),
                        c.cghz.logical_offdiag.to_string(),
                        c.ghz.logical_offdiag.to_string(),
                        c.cghz_at_least_ghz.to_string(),
                        a.noise_model.clone(),
                    ])
                    .map_err(csv_err)?;
                }
            }
            Results::Run(r) => {
                w.write_record(["shot", "windows", "detector", "target_sign", "fidelity"]).map_err(csv_err)?;
                for rec in r.records.as_deref().unwrap_or(&[]) {
                    let windows: Vec<String> = rec.windows.iter().map(|k| k.to_string()).collect();
                    w.write_record([
                        rec.shot.to_string(),
                        windows.join(";"),
                        rec.detector.map(|d| d.to_string()).unwrap_or_default(),
                        rec.target_sign.to_string(),
                        rec.fidelity.to_string(),
                    ])
                    .map_err(csv_err)?;
                }
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::State(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::State(e.to_string()))
    }

    pub fn render(&self) -> Result<String> {
        match self.config.output_format {
            OutputFormat::Json => self.to_json(),
            OutputFormat::Csv => self.to_csv(),
        }
    }
}

/// Random stream for one shot or sweep row.
pub fn substream(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn run_shot(config: &RunConfig, alpha: f64, theta: f64, shot: usize) -> Result<(SchemeResult, QubitState)> {
    let mut rng = substream(config.seed, shot);
    let opts = SchemeOptions { readouts: config.readouts(), ..SchemeOptions::default() };
    let (k, m) = (config.k, config.m);
    let res = match config.scheme {
        SchemeKind::One => scheme1(k, m, alpha, theta, &opts, &mut rng)?,
        SchemeKind::Two => scheme2(k, m, alpha, theta, &opts, &mut rng)?,
        SchemeKind::EntanglerOnly => {
            let e = Entangler::new(m, alpha, theta)?;
            let block: Vec<usize> = (0..m).collect();
            let readout = opts.readouts.first().copied().unwrap_or(Readout::Sample);
            let (output, record) = e.run(&make_plus_product(m, Sign::Plus)?, &block, readout, &mut rng)?;
            let target = make_ghz(m, Sign::Plus)?;
            let res = SchemeResult {
                output,
                records: vec![record],
                detector: None,
                target_sign: Sign::Plus,
                source_record: None,
            };
            return Ok((res, target));
        }
        SchemeKind::Analysis => unreachable!("analysis has no shots"),
    };
    let target = res.target(k, m)?;
    Ok((res, target))
}

fn run_protocol(config: &RunConfig) -> Result<RunResults> {
    if config.scheme == SchemeKind::One && config.m.is_multiple_of(2) {
        return Err(Error::Precondition(format!(
            "scheme 1 requires an odd block size m (the minus-product input only becomes GHZ⁻ when m is odd); got m = {}",
            config.m
        )));
    }
    let alpha = config.resolved_alpha()?;
    let theta = config.theta_step()?;
    let shots: Vec<(SchemeResult, QubitState)> =
        (0..config.shots).into_par_iter().map(|i| run_shot(config, alpha, theta, i)).collect::<Result<_>>()?;

    let n_windows = 1usize << (config.m - 1).min(20);
    let mut window_counts = vec![0usize; n_windows];
    let mut records = Vec::with_capacity(shots.len());
    let mut counts = DetectorCounts { h: 0, v: 0 };
    let (mut sum, mut min) = (0.0, f64::INFINITY);
    for (i, (res, target)) in shots.iter().enumerate() {
        let f = fidelity(&res.output, target)?;
        sum += f;
        min = min.min(f);
        for r in &res.records {
            if let Some(c) = window_counts.get_mut(r.window_k) {
                *c += 1;
            }
        }
        match res.detector {
            Some(Polarization::H) => counts.h += 1,
            Some(Polarization::V) => counts.v += 1,
            None => {}
        }
        if config.verbose || config.output_format == OutputFormat::Csv {
            records.push(ShotRecord {
                shot: i,
                windows: res.records.iter().map(|r| r.window_k).collect(),
                x: res.records.iter().map(|r| r.x).collect(),
                detector: res.detector,
                target_sign: res.target_sign.as_i32(),
                fidelity: f,
            });
        }
    }
    let has_detector = config.scheme == SchemeKind::Two;
    let n = shots.len();
    Ok(RunResults {
        alpha,
        theta_step: theta,
        misclassification_closed: misclassification_prob(alpha, theta, config.m)?,
        shots: n,
        mean_fidelity: sum / n as f64,
        min_fidelity: min,
        detector_counts: has_detector.then_some(counts),
        detector_h_freq: has_detector.then(|| counts.h as f64 / n as f64),
        window_counts,
        first_output: state_entries(&shots[0].0.output),
        records: (!records.is_empty()).then_some(records),
    })
}

fn run_analysis(config: &RunConfig) -> Result<AnalysisResults> {
    let required =
        if config.m >= 2 { Some(required_alpha(config.m, config.theta_budget, config.target_err)?) } else { None };
    Ok(AnalysisResults {
        noise_model: NOISE_MODEL.to_string(),
        target_err: config.target_err,
        required_alpha: required,
        comparisons: compare_encodings(config.k, config.m, &config.p_grid)?,
    })
}

/// Runs the configured scheme (or analysis) and returns its report.
pub fn cmd_run(config: &RunConfig) -> Result<Report> {
    let start = Instant::now();
    config.validate()?;
    let results = match config.scheme {
        SchemeKind::Analysis => Results::Analysis(run_analysis(config)?),
        _ => Results::Run(run_protocol(config)?),
    };
    Ok(Report::new(config, results, start))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "over", content = "values", rename_all = "lowercase")]
pub enum Sweep {
    M(Vec<usize>),
    Alpha(Vec<f64>),
}

impl Sweep {
    pub fn len(&self) -> usize {
        match self {
            Sweep::M(v) => v.len(),
            Sweep::Alpha(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `m=2..10`, `m=3,5,7` or `alpha=1e3,1e4`.
impl FromStr for Sweep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, values) =
            s.split_once('=').ok_or_else(|| Error::invalid(format!("sweep '{s}': expected m=... or alpha=...")))?;
        match name.trim() {
            "m" => {
                if let Some((a, b)) = values.split_once("..") {
                    let (a, b): (usize, usize) = (parse("m", a)?, parse("m", b.trim_start_matches('='))?);
                    Ok(Sweep::M((a..=b).collect()))
                } else {
                    Ok(Sweep::M(parse_list("m", values)?))
                }
            }
            "alpha" => Ok(Sweep::Alpha(parse_list("alpha", values)?)),
            other => Err(Error::invalid(format!("cannot sweep over '{other}' (expected m or alpha)"))),
        }
    }
}

impl fmt::Display for Sweep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: Vec<String>| v.join(",");
        match self {
            Sweep::M(v) => write!(f, "m={}", join(v.iter().map(|x| x.to_string()).collect())),
            Sweep::Alpha(v) => write!(f, "alpha={}", join(v.iter().map(|x| x.to_string()).collect())),
        }
    }
}

fn sweep_row(config: &RunConfig, m: usize, alpha: Option<f64>, row: usize) -> Result<SweepRow> {
    let theta = step_theta(m, config.theta_budget)?;
    let alpha_required = required_alpha(m, config.theta_budget, config.target_err)?;
    let alpha = alpha.unwrap_or(alpha_required);
    let err_closed = misclassification_prob(alpha, theta, m)?;
    let mut rng = substream(config.seed, row);
    let (err_mc, err_mc_stderr) = misclassification_monte_carlo(alpha, theta, m, config.shots, &mut rng)?;
    Ok(SweepRow { m, theta, alpha, err_closed, err_mc, err_mc_stderr, alpha_required })
}

/// Discrimination error and probe requirement across block sizes or probe
/// amplitudes; `config.shots` is the Monte Carlo sample count per row.
pub fn cmd_sweep(config: &RunConfig, sweep: &Sweep) -> Result<Report> {
    let start = Instant::now();
    if sweep.is_empty() {
        return Err(Error::invalid("empty sweep grid"));
    }
    if config.shots == 0 {
        return Err(Error::invalid("shots must be at least 1"));
    }
    if !(config.target_err > 0.0 && config.target_err < 0.5) {
        return Err(Error::invalid(format!("target_err must lie in (0, 1/2), got {}", config.target_err)));
    }
    let cells: Vec<(usize, Option<f64>)> = match sweep {
        Sweep::M(ms) => ms.iter().map(|&m| (m, config.alpha)).collect(),
        Sweep::Alpha(alphas) => alphas.iter().map(|&a| (config.m, Some(a))).collect(),
    };
    let rows = cells
        .par_iter()
        .enumerate()
        .map(|(i, &(m, alpha))| sweep_row(config, m, alpha, i))
        .collect::<Result<Vec<_>>>()?;
    let results = Results::Sweep(SweepResults { sweep: sweep.clone(), mc_samples: config.shots, rows });
    Ok(Report::new(config, results, start))
}
