//! Python bindings for `ris_zf`.
//!
//! Matrices cross the boundary as nested lists of Python `complex`, phases as
//! one list of floats per RIS.

use std::collections::BTreeMap;
use std::path::PathBuf;

use num_complex::Complex64;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use ris::beamform::{apply_power_mode, bs_ris_zf, bs_ue_zf, build_gamma, ZfSettings};
use ris::channel::{ChannelSampler, ChannelSet};
use ris::harness::{emit_outputs, run_sweep, RunConfig};
use ris::linalg::{CMat, CVec};
use ris::metrics::{complexity_counts_with, sinr_exact, DTermReading};
use ris::phaseopt::{
    asymptotic_bs_ris_zf_all, asymptotic_phases_bs_ue_zf_all, optimal_phases_bs_ris_zf,
    optimal_phases_bs_ue_zf, random_phases as core_random_phases, PhaseConfig, PhaseOrigin,
};
use ris::rng::{stream_seed, Stream};
use ris::schedule::{schedule as core_schedule, Assignment, ProbeTable, ScheduleParams};
use ris::sysconfig::{
    to_config_string, validate_config, ChannelModelConfig, RawConfig, Scheme, SystemConfig,
};

fn py_err(e: ris::Error) -> PyErr {
    match e {
        ris::Error::Io { .. } => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse_scheme(s: &str) -> PyResult<Scheme> {
    s.parse::<Scheme>().map_err(PyValueError::new_err)
}

fn matrix(m: &CMat) -> Vec<Vec<Complex64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn vector(v: &CVec) -> Vec<Complex64> {
    v.iter().copied().collect()
}

fn phases_in(p: Vec<Vec<f64>>) -> PhaseConfig {
    PhaseConfig::from_vecs(p, PhaseOrigin::Random)
}

/// Scenario loaded from the `key = value` format.
#[pyclass(name = "Config", module = "ris_zf", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    sys: SystemConfig,
    ch: ChannelModelConfig,
    run: RunConfig,
}

#[pymethods]
impl PyConfig {
    /// Builds a config from text plus `key=value` overrides.
    #[new]
    #[pyo3(signature = (text = "", overrides = Vec::new()))]
    fn new(text: &str, overrides: Vec<String>) -> PyResult<Self> {
        let mut raw = RawConfig::parse(text, "<python>").map_err(py_err)?;
        for o in &overrides {
            raw.set(o).map_err(py_err)?;
        }
        let (sys, ch, run) = raw.build().map_err(py_err)?;
        Ok(PyConfig { sys, ch, run })
    }

    #[staticmethod]
    #[pyo3(signature = (path, overrides = Vec::new()))]
    fn from_file(path: PathBuf, overrides: Vec<String>) -> PyResult<Self> {
        let mut raw = RawConfig::from_path(&path).map_err(py_err)?;
        for o in &overrides {
            raw.set(o).map_err(py_err)?;
        }
        let (sys, ch, run) = raw.build().map_err(py_err)?;
        Ok(PyConfig { sys, ch, run })
    }

    /// Same scenario at another `(M, N)`.
    fn with_dimensions(&self, antennas: usize, elements: usize) -> Self {
        PyConfig {
            sys: self.sys.with_dimensions(antennas, elements),
            ..self.clone()
        }
    }

    /// `(passed, report)` for the named scheme.
    fn validate(&self, scheme: &str) -> PyResult<(bool, String)> {
        let r = validate_config(&self.sys, &self.ch, parse_scheme(scheme)?);
        Ok((r.passed(), r.to_string()))
    }

    fn to_text(&self) -> String {
        to_config_string(&self.sys, &self.ch, &self.run)
    }

    #[getter]
    fn antennas(&self) -> usize {
        self.sys.antennas
    }

    #[getter]
    fn elements(&self) -> usize {
        self.sys.elements
    }

    #[getter]
    fn num_ris(&self) -> usize {
        self.sys.num_ris
    }

    #[getter]
    fn blocked_per_ris(&self) -> Vec<usize> {
        self.sys.blocked_per_ris.clone()
    }

    #[getter]
    fn direct_users(&self) -> usize {
        self.sys.direct_users
    }

    #[getter]
    fn total_power(&self) -> f64 {
        self.sys.total_power
    }

    #[getter]
    fn power_mode(&self) -> &'static str {
        self.sys.power_mode.as_str()
    }

    #[getter]
    fn noise_variances(&self) -> Vec<f64> {
        self.sys.noise_variances()
    }

    #[getter]
    fn trials(&self) -> usize {
        self.run.trials
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(M={}, N={}, K={}, U_d={}, power_mode={})",
            self.sys.antennas,
            self.sys.elements,
            self.sys.num_ris,
            self.sys.direct_users,
            self.sys.power_mode.as_str()
        )
    }
}

/// One channel realization.
#[pyclass(name = "Channels", module = "ris_zf", from_py_object)]
#[derive(Clone)]
struct PyChannels {
    inner: ChannelSet,
}

#[pymethods]
impl PyChannels {
    /// H_k as M×N nested lists, one per RIS.
    #[getter]
    fn bs_ris(&self) -> Vec<Vec<Vec<Complex64>>> {
        self.inner.bs_ris.iter().map(matrix).collect()
    }

    /// `ris_ue[k][l]`, length N.
    #[getter]
    fn ris_ue(&self) -> Vec<Vec<Vec<Complex64>>> {
        self.inner
            .ris_ue
            .iter()
            .map(|ues| ues.iter().map(vector).collect())
            .collect()
    }

    #[getter]
    fn direct(&self) -> Vec<Vec<Complex64>> {
        self.inner.direct.iter().map(vector).collect()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    fn __repr__(&self) -> String {
        format!(
            "Channels(M={}, N={}, K={}, U_d={}, seed={})",
            self.inner.antennas(),
            self.inner.elements(),
            self.inner.num_ris(),
            self.inner.direct_users(),
            self.inner.seed
        )
    }
}

/// Seeded channel generator for a config.
#[pyclass(name = "Sampler", module = "ris_zf")]
struct PySampler {
    inner: ChannelSampler,
}

#[pymethods]
impl PySampler {
    #[new]
    fn new(config: &PyConfig) -> PyResult<Self> {
        Ok(PySampler {
            inner: ChannelSampler::from_config(&config.sys, &config.ch).map_err(py_err)?,
        })
    }

    fn sample(&self, seed: u64) -> PyChannels {
        PyChannels {
            inner: self.inner.sample(seed),
        }
    }

    /// Imperfect-CSI copy with error fraction `tau`.
    fn estimate(&self, channels: &PyChannels, tau: f64, seed: u64) -> PyResult<PyChannels> {
        Ok(PyChannels {
            inner: self
                .inner
                .apply_estimation_error(&channels.inner, tau, seed)
                .map_err(py_err)?,
        })
    }

    /// `scale · C` of every RIS.
    fn correlations(&self) -> Vec<Vec<Vec<Complex64>>> {
        self.inner
            .correlations()
            .iter()
            .map(|c| matrix(&c.scaled()))
            .collect()
    }
}

#[pyfunction]
fn random_phases(num_ris: usize, elements: usize, seed: u64) -> Vec<Vec<f64>> {
    core_random_phases(num_ris, elements, seed).phases
}

/// Phase design for `scheme` with `rule` in {"optimal", "asymptotic", "random"}.
/// Iterative rules start from random phases drawn from `seed`.
#[pyfunction]
#[pyo3(signature = (sampler, channels, config, scheme, rule, seed = 0))]
fn design_phases(
    sampler: &PySampler,
    channels: &PyChannels,
    config: &PyConfig,
    scheme: &str,
    rule: &str,
    seed: u64,
) -> PyResult<Vec<Vec<f64>>> {
    let chs = &channels.inner;
    let sys = &config.sys;
    let zf = ZfSettings {
        ridge: config.run.ridge,
        ..Default::default()
    };
    let init = core_random_phases(
        sys.num_ris,
        sys.elements,
        stream_seed(seed, Stream::InitialPhases),
    );
    let corr: Vec<CMat> = sampler
        .inner
        .correlations()
        .iter()
        .map(|c| c.scaled())
        .collect();
    let p = match (parse_scheme(scheme)?, rule) {
        (_, "random") => core_random_phases(
            sys.num_ris,
            sys.elements,
            stream_seed(seed, Stream::RandomPhases),
        ),
        (Scheme::BsUeZf, "optimal") => {
            optimal_phases_bs_ue_zf(chs, sys, &init, &config.run.phase_opt, &zf)
                .map_err(py_err)?
                .0
        }
        (Scheme::BsUeZf, "asymptotic") => {
            asymptotic_phases_bs_ue_zf_all(chs, &corr, &init, &config.run.phase_opt)
                .map_err(py_err)?
                .0
        }
        (Scheme::BsRisZf, "optimal") => optimal_phases_bs_ris_zf(chs, &zf).map_err(py_err)?,
        (Scheme::BsRisZf, "asymptotic") => {
            asymptotic_bs_ris_zf_all(chs, &corr, &sys.noise_variance_blocked)
                .map_err(py_err)?
                .0
        }
        (_, other) => {
            return Err(PyValueError::new_err(format!(
                "unknown phase rule `{other}`"
            )))
        }
    };
    Ok(p.phases)
}

/// Per-UE SINRs `(blocked, direct)` under `scheme` with the config's power mode.
#[pyfunction]
fn sinr(
    channels: &PyChannels,
    phases: Vec<Vec<f64>>,
    config: &PyConfig,
    scheme: &str,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let chs = &channels.inner;
    let phases = phases_in(phases);
    let zf = ZfSettings {
        ridge: config.run.ridge,
        ..Default::default()
    };
    let w = match parse_scheme(scheme)? {
        Scheme::BsUeZf => bs_ue_zf(chs, &phases, &zf),
        Scheme::BsRisZf => bs_ris_zf(chs, &zf),
    }
    .and_then(|w| apply_power_mode(w, &config.sys))
    .map_err(py_err)?;
    let s = sinr_exact(chs, &phases, &w, &config.sys).map_err(py_err)?;
    Ok((s.blocked, s.direct))
}

#[pyfunction]
fn sum_rate(sinrs: Vec<f64>) -> f64 {
    ris::metrics::sum_rate(&sinrs)
}

/// Multiplication counts `{"bs_ue_zf": .., "bs_ris_zf": ..}`.
#[pyfunction]
#[pyo3(signature = (m, n, k, ub, ud, literal_d = None))]
fn complexity(
    m: u64,
    n: u64,
    k: u64,
    ub: u64,
    ud: u64,
    literal_d: Option<u64>,
) -> BTreeMap<&'static str, u128> {
    let d = literal_d.map_or(DTermReading::DirectUsers, DTermReading::Literal);
    let c = complexity_counts_with(m, n, k, ub, ud, d);
    BTreeMap::from([("bs_ue_zf", c.bs_ue_zf), ("bs_ris_zf", c.bs_ris_zf)])
}

/// RIS selection matrix Γ as 0/1 rows.
#[pyfunction]
fn gamma(k: usize, n: usize, ud: usize) -> Vec<Vec<f64>> {
    build_gamma(k, n, ud)
        .row_iter()
        .map(|r| r.iter().map(|z| z.re).collect())
        .collect()
}

/// Schedules from a probe table: one row per state (row 0 all RISs off,
/// row k+1 RIS k on), one column per UE.
/// Returns `(scheduled ids, {id: "direct" | "ris_<k>"})`.
#[pyfunction]
fn schedule(
    powers: Vec<Vec<f64>>,
    u_max: usize,
    p_min: f64,
) -> PyResult<(Vec<usize>, BTreeMap<usize, String>)> {
    let rows = powers.len();
    let cols = powers.first().map_or(0, |r| r.len());
    if powers.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err("probe table rows differ in length"));
    }
    let m = nalgebra::DMatrix::from_fn(rows, cols, |i, j| powers[i][j]);
    let t = ProbeTable::new(m).map_err(py_err)?;
    let out = core_schedule(&t, &ScheduleParams { u_max, p_min });
    let names = out
        .assignment
        .iter()
        .map(|(&u, a)| {
            let s = match a {
                Assignment::Direct => "direct".to_string(),
                Assignment::Ris(k) => format!("ris_{k}"),
            };
            (u, s)
        })
        .collect();
    Ok((out.scheduled, names))
}

/// Runs the configured sweep. Returns the summary rows as dicts and writes the
/// CSV files when `out_dir` is given.
#[pyfunction]
#[pyo3(signature = (config, out_dir = None, trials = None, threads = None, seed = None))]
fn sweep(
    py: Python<'_>,
    config: &PyConfig,
    out_dir: Option<PathBuf>,
    trials: Option<usize>,
    threads: Option<usize>,
    seed: Option<u64>,
) -> PyResult<Vec<BTreeMap<&'static str, Py<PyAny>>>> {
    let mut run = config.run.clone();
    if let Some(t) = trials {
        if t == 0 {
            return Err(PyValueError::new_err("trials must be positive"));
        }
        run.trials = t;
    }
    if let Some(t) = threads {
        run.threads = t;
    }
    if let Some(s) = seed {
        run.master_seed = s;
    }
    let (sys, ch) = (config.sys.clone(), config.ch.clone());
    let summary = py.detach(|| run_sweep(&run, &sys, &ch)).map_err(py_err)?;
    if let Some(dir) = out_dir {
        emit_outputs(&summary, &dir).map_err(py_err)?;
    }
    summary
        .rows
        .iter()
        .map(|r| {
            let mut d: BTreeMap<&'static str, Py<PyAny>> = BTreeMap::new();
            d.insert(
                "scheme",
                r.scheme.as_str().into_pyobject(py)?.into_any().unbind(),
            );
            d.insert(
                "phase_rule",
                r.curve.as_str().into_pyobject(py)?.into_any().unbind(),
            );
            d.insert("M", r.antennas.into_pyobject(py)?.into_any().unbind());
            d.insert("N", r.elements.into_pyobject(py)?.into_any().unbind());
            d.insert("csi_tau", r.csi_tau.into_pyobject(py)?.into_any().unbind());
            d.insert("trials", r.trials.into_pyobject(py)?.into_any().unbind());
            d.insert(
                "failures",
                r.failures.into_pyobject(py)?.into_any().unbind(),
            );
            d.insert(
                "mean_sum_rate",
                r.mean_sum_rate.into_pyobject(py)?.into_any().unbind(),
            );
            d.insert("stderr", r.stderr.into_pyobject(py)?.into_any().unbind());
            d.insert(
                "flagged",
                r.flagged.into_pyobject(py)?.to_owned().into_any().unbind(),
            );
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn ris_zf(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyChannels>()?;
    m.add_class::<PySampler>()?;
    m.add_function(wrap_pyfunction!(random_phases, m)?)?;
    m.add_function(wrap_pyfunction!(design_phases, m)?)?;
    m.add_function(wrap_pyfunction!(sinr, m)?)?;
    m.add_function(wrap_pyfunction!(sum_rate, m)?)?;
    m.add_function(wrap_pyfunction!(complexity, m)?)?;
    m.add_function(wrap_pyfunction!(gamma, m)?)?;
    m.add_function(wrap_pyfunction!(schedule, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    Ok(())
}
