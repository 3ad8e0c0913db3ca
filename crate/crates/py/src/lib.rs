//! Python bindings: states, the entangler, both preparation schemes and the
//! analysis helpers. Randomness is always seeded explicitly.

use cghz_core::analysis::{self, Encoding};
use cghz_core::entangler::Entangler as CoreEntangler;
use cghz_core::homodyne::{self, MeasurementRecord, Readout};
use cghz_core::protocols::{self, AncillaReadout, SchemeOptions, SchemeResult};
use cghz_core::report::{self, RunConfig, Sweep};
use cghz_core::state::{self, Pattern, Polarization, QubitState as CoreState, Sign};
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: cghz_core::Error) -> PyErr {
    match e {
        cghz_core::Error::DegenerateState | cghz_core::Error::State(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn sign(s: i32) -> PyResult<Sign> {
    Sign::from_i32(s).map_err(err)
}

fn polarization(s: &str) -> PyResult<Polarization> {
    match s {
        "H" | "h" => Ok(Polarization::H),
        "V" | "v" => Ok(Polarization::V),
        _ => Err(PyValueError::new_err(format!("polarization must be 'H' or 'V', got {s:?}"))),
    }
}

/// Sparse pure state over H/V patterns; pattern strings list qubit 0 first.
#[pyclass(name = "QubitState", module = "cghz", frozen, skip_from_py_object)]
#[derive(Clone)]
struct QubitState(CoreState);

#[pymethods]
impl QubitState {
    #[new]
    fn new(n_qubits: usize, terms: Vec<(String, Complex64)>) -> PyResult<Self> {
        let mut raw = Vec::with_capacity(terms.len());
        for (p, a) in terms {
            let pattern = Pattern::from_hv(&p).map_err(err)?;
            if pattern.len() != n_qubits {
                return Err(PyValueError::new_err(format!("pattern {p} does not have {n_qubits} qubits")));
            }
            raw.push((pattern.bits(), a));
        }
        CoreState::from_terms(n_qubits, raw).map(Self).map_err(err)
    }

    #[staticmethod]
    fn basis(pattern: &str) -> PyResult<Self> {
        Ok(Self(CoreState::basis(Pattern::from_hv(pattern).map_err(err)?)))
    }

    #[getter]
    fn n_qubits(&self) -> usize {
        self.0.n_qubits()
    }

    fn terms(&self) -> Vec<(String, Complex64)> {
        self.0.iter().map(|(p, a)| (p.to_string(), a)).collect()
    }

    fn amplitude(&self, pattern: &str) -> PyResult<Complex64> {
        Ok(self.0.amplitude(&Pattern::from_hv(pattern).map_err(err)?))
    }

    fn inner(&self, other: PyRef<'_, QubitState>) -> PyResult<Complex64> {
        self.0.inner(&other.0).map_err(err)
    }

    fn fidelity(&self, other: PyRef<'_, QubitState>) -> PyResult<f64> {
        state::fidelity(&self.0, &other.0).map_err(err)
    }

    fn tensor(&self, other: PyRef<'_, QubitState>) -> PyResult<Self> {
        self.0.tensor(&other.0).map(Self).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        let terms: Vec<String> = self.0.iter().map(|(p, a)| format!("({:+.6}{:+.6}j)|{p}⟩", a.re, a.im)).collect();
        format!("QubitState({})", terms.join(" "))
    }
}

#[pyfunction]
#[pyo3(signature = (n, sign = 1))]
fn make_plus_product(n: usize, sign: i32) -> PyResult<QubitState> {
    state::make_plus_product(n, self::sign(sign)?).map(QubitState).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (n, sign = 1))]
fn make_ghz(n: usize, sign: i32) -> PyResult<QubitState> {
    state::make_ghz(n, self::sign(sign)?).map(QubitState).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (k, m, sign = 1))]
fn make_cghz(k: usize, m: usize, sign: i32) -> PyResult<QubitState> {
    state::make_cghz(k, m, self::sign(sign)?).map(QubitState).map_err(err)
}

#[pyfunction]
fn fidelity(a: PyRef<'_, QubitState>, b: PyRef<'_, QubitState>) -> PyResult<f64> {
    state::fidelity(&a.0, &b.0).map_err(err)
}

fn record_dict<'py>(py: Python<'py>, rec: &MeasurementRecord) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("x", rec.x)?;
    d.set_item("window", rec.window_k)?;
    d.set_item("probability_density", rec.probability_density)?;
    let corrections = correction_tuples(rec);
    d.set_item("corrections", corrections)?;
    Ok(d)
}

fn correction_tuples(rec: &MeasurementRecord) -> Vec<(String, usize, f64)> {
    use cghz_core::optics::Correction;
    rec.corrections
        .iter()
        .map(|c| match *c {
            Correction::BitFlip { qubit } => ("bit_flip".to_string(), qubit, 0.0),
            Correction::PhaseZ { qubit } => ("phase_z".to_string(), qubit, std::f64::consts::PI),
            Correction::Phase { qubit, phi } => ("phase".to_string(), qubit, phi),
        })
        .collect()
}

fn readout(window: Option<usize>, x: Option<f64>) -> PyResult<Readout> {
    match (window, x) {
        (Some(_), Some(_)) => Err(PyValueError::new_err("give at most one of window and x")),
        (Some(k), None) => Ok(Readout::Window(k)),
        (None, Some(x)) => Ok(Readout::Quadrature(x)),
        (None, None) => Ok(Readout::Sample),
    }
}

/// Weak cross-Kerr entangler for one m-photon block.
#[pyclass(name = "Entangler", module = "cghz", frozen)]
struct Entangler(CoreEntangler);

#[pymethods]
impl Entangler {
    #[new]
    fn new(m: usize, alpha: f64, theta: f64) -> PyResult<Self> {
        CoreEntangler::new(m, alpha, theta).map(Self).map_err(err)
    }

    #[getter]
    fn window_count(&self) -> usize {
        self.0.windows().count()
    }

    fn pattern_phase(&self, pattern: &str) -> PyResult<f64> {
        self.0.weights().pattern_phase(&Pattern::from_hv(pattern).map_err(err)?).map_err(err)
    }

    /// Runs the entangler on `block` (default: the first m qubits). Pass
    /// `window` to force error-free discrimination or `x` to inject an outcome.
    #[pyo3(signature = (state, block = None, window = None, x = None, seed = 0))]
    fn run<'py>(
        &self,
        py: Python<'py>,
        state: PyRef<'_, QubitState>,
        block: Option<Vec<usize>>,
        window: Option<usize>,
        x: Option<f64>,
        seed: u64,
    ) -> PyResult<(QubitState, Bound<'py, PyDict>)> {
        let block = block.unwrap_or_else(|| (0..self.0.weights().block_size()).collect());
        let mut rng = report::substream(seed, 0);
        let (out, rec) = self.0.run(&state.0, &block, readout(window, x)?, &mut rng).map_err(err)?;
        Ok((QubitState(out), record_dict(py, &rec)?))
    }
}

fn scheme_dict<'py>(py: Python<'py>, res: SchemeResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("windows", res.records.iter().map(|r| r.window_k).collect::<Vec<_>>())?;
    d.set_item("x", res.records.iter().map(|r| r.x).collect::<Vec<_>>())?;
    d.set_item("detector", res.detector.map(|p| p.to_string()))?;
    d.set_item("target_sign", res.target_sign.as_i32())?;
    d.set_item("output", QubitState(res.output))?;
    Ok(d)
}

fn scheme_options(windows: Option<Vec<usize>>, ancilla: Option<&str>) -> PyResult<SchemeOptions> {
    let mut opts = SchemeOptions::forced_windows(&windows.unwrap_or_default());
    if let Some(a) = ancilla {
        opts.ancilla = AncillaReadout::Forced(polarization(a)?);
    }
    Ok(opts)
}

/// Scheme 1 (odd m only): GHZ input, half-wave plates, k block entanglers.
#[pyfunction]
#[pyo3(signature = (k, m, alpha, theta, windows = None, seed = 0))]
fn scheme1<'py>(
    py: Python<'py>,
    k: usize,
    m: usize,
    alpha: f64,
    theta: f64,
    windows: Option<Vec<usize>>,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let mut rng = report::substream(seed, 0);
    let res = protocols::scheme1(k, m, alpha, theta, &scheme_options(windows, None)?, &mut rng).map_err(err)?;
    scheme_dict(py, res)
}

/// Scheme 2: k block entanglers, k Toffolis onto one ancilla, ancilla readout.
#[pyfunction]
#[pyo3(signature = (k, m, alpha, theta, windows = None, ancilla = None, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn scheme2<'py>(
    py: Python<'py>,
    k: usize,
    m: usize,
    alpha: f64,
    theta: f64,
    windows: Option<Vec<usize>>,
    ancilla: Option<&str>,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let mut rng = report::substream(seed, 0);
    let res = protocols::scheme2(k, m, alpha, theta, &scheme_options(windows, ancilla)?, &mut rng).map_err(err)?;
    scheme_dict(py, res)
}

#[pyfunction]
fn misclassification_prob(alpha: f64, theta: f64, m: usize) -> PyResult<f64> {
    homodyne::misclassification_prob(alpha, theta, m).map_err(err)
}

#[pyfunction]
fn required_alpha(m: usize, theta_budget: f64, target_err: f64) -> PyResult<f64> {
    analysis::required_alpha(m, theta_budget, target_err).map_err(err)
}

#[pyfunction]
fn dephase_offdiag(encoding: &str, k: usize, m: usize, p: f64) -> PyResult<f64> {
    let enc = match encoding {
        "cghz" => Encoding::Cghz,
        "ghz" => Encoding::Ghz,
        _ => return Err(PyValueError::new_err(format!("encoding must be 'cghz' or 'ghz', got {encoding:?}"))),
    };
    Ok(analysis::dephase_offdiag(enc, k, m, p).map_err(err)?.logical_offdiag)
}

fn config_from(settings: Option<Vec<(String, String)>>) -> PyResult<RunConfig> {
    let mut config = RunConfig::default();
    for (key, value) in settings.unwrap_or_default() {
        config.set(&key, &value).map_err(err)?;
    }
    Ok(config)
}

/// Same report the `cghz run` command prints, from `(key, value)` settings.
#[pyfunction]
#[pyo3(signature = (settings = None))]
fn run_report(settings: Option<Vec<(String, String)>>) -> PyResult<String> {
    let config = config_from(settings)?;
    report::cmd_run(&config).and_then(|r| r.render()).map_err(err)
}

/// Same report the `cghz sweep` command prints, e.g. `sweep_report("m=2..10")`.
#[pyfunction]
#[pyo3(signature = (over, settings = None))]
fn sweep_report(over: &str, settings: Option<Vec<(String, String)>>) -> PyResult<String> {
    let config = config_from(settings)?;
    let sweep: Sweep = over.parse().map_err(err)?;
    report::cmd_sweep(&config, &sweep).and_then(|r| r.render()).map_err(err)
}

#[pymodule]
fn cghz(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<QubitState>()?;
    m.add_class::<Entangler>()?;
    m.add_function(wrap_pyfunction!(make_plus_product, m)?)?;
    m.add_function(wrap_pyfunction!(make_ghz, m)?)?;
    m.add_function(wrap_pyfunction!(make_cghz, m)?)?;
    m.add_function(wrap_pyfunction!(fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(scheme1, m)?)?;
    m.add_function(wrap_pyfunction!(scheme2, m)?)?;
    m.add_function(wrap_pyfunction!(misclassification_prob, m)?)?;
    m.add_function(wrap_pyfunction!(required_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(dephase_offdiag, m)?)?;
    m.add_function(wrap_pyfunction!(run_report, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_report, m)?)?;
    m.add("SCHEMA_VERSION", report::SCHEMA_VERSION)?;
    Ok(())
}
