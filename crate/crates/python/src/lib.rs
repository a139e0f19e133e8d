//! Python bindings. Grids travel as flat, row-major lists of complex numbers
//! (`k` outer, `l` inner).

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use otfs_core::channel::{gen_eva_jakes, max_doppler_hz};
use otfs_core::grid::{random_symbols, Constellation, DDGrid, GridKind, SeedSpec};
use otfs_core::harness::{self, ChannelMode, ExperimentConfig, ReceiverMode};
use otfs_core::interference::{fold_iq, measure_interference_mc, orthogonality_check, DDMaps};
use otfs_core::modem::{self, TFGrid};
use otfs_core::waveform::{design_lpf, FilterSpec};
use otfs_core::{OtfsError, C64 as Complex64};

fn to_py(e: OtfsError) -> PyErr {
    match e {
        OtfsError::Numeric(_) | OtfsError::Coverage(_) | OtfsError::Alignment(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Dimensional constants of one frame.
#[pyclass(name = "FrameParams", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyFrameParams {
    inner: otfs_core::FrameParams,
}

#[pymethods]
impl PyFrameParams {
    #[new]
    #[pyo3(signature = (m, n, delta_f = 15e3, cp_len = None, q = 16))]
    fn new(m: usize, n: usize, delta_f: f64, cp_len: Option<usize>, q: usize) -> PyResult<Self> {
        let inner = otfs_core::FrameParams::new(m, n, delta_f, cp_len.unwrap_or(m), q).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn delta_f(&self) -> f64 {
        self.inner.delta_f
    }

    #[getter]
    fn t(&self) -> f64 {
        self.inner.t
    }

    #[getter]
    fn cp_len(&self) -> usize {
        self.inner.cp_len
    }

    #[getter]
    fn q(&self) -> usize {
        self.inner.q
    }

    fn symbols(&self) -> usize {
        self.inner.symbols()
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "FrameParams(m={}, n={}, delta_f={}, cp_len={}, q={})",
            p.m, p.n, p.delta_f, p.cp_len, p.q
        )
    }
}

fn grid(p: &otfs_core::FrameParams, x: Vec<Complex64>) -> PyResult<DDGrid> {
    DDGrid::from_vec(p.n, p.m, x, GridKind::Symbols).map_err(to_py)
}

fn filter(p: &otfs_core::FrameParams, kind: &str, th1: f64, th2: f64) -> PyResult<FilterSpec> {
    match kind {
        "sinc" => design_lpf(p, th1 * p.t, th2 * p.t).map_err(to_py),
        "identity" => Ok(FilterSpec::identity(p)),
        other => Err(PyValueError::new_err(format!("unknown filter {other:?}"))),
    }
}

/// Uniform 4-QAM grid for stream `stream` of `seed`.
#[pyfunction]
#[pyo3(signature = (params, seed, stream = 0))]
fn random_qpsk(params: &PyFrameParams, seed: u64, stream: u64) -> Vec<Complex64> {
    random_symbols(&params.inner, &Constellation::qpsk(), SeedSpec::new(seed, stream)).into_vec()
}

#[pyfunction]
fn idzt(params: &PyFrameParams, x: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
    Ok(modem::idzt(&grid(&params.inner, x)?).samples)
}

#[pyfunction]
fn dzt(params: &PyFrameParams, body: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
    Ok(modem::dzt(&body, &params.inner).map_err(to_py)?.into_vec())
}

#[pyfunction]
fn isfft(params: &PyFrameParams, x: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
    Ok(modem::isfft(&grid(&params.inner, x)?).as_slice().to_vec())
}

#[pyfunction]
fn sfft(params: &PyFrameParams, y: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
    let p = &params.inner;
    let tf = TFGrid::from_vec(p.n, p.m, y).map_err(to_py)?;
    Ok(modem::sfft(&tf).into_vec())
}

/// Interference maps for the chosen receiver filter: a dict of flat lists
/// `c_mag`, `c_phase`, `v` and `sir_db`.
#[pyfunction]
#[pyo3(signature = (params, filter_kind = "sinc", th1 = 1.0, th2 = 1.0, sigma_s2 = 1.0))]
fn interference_maps<'py>(
    py: Python<'py>,
    params: &PyFrameParams,
    filter_kind: &str,
    th1: f64,
    th2: f64,
    sigma_s2: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let p = &params.inner;
    let h = filter(p, filter_kind, th1, th2)?;
    let maps = DDMaps::compute(&fold_iq(p, &h), p.n, sigma_s2);
    let d = PyDict::new(py);
    d.set_item("c_mag", maps.c_self.iter().map(|c| c.norm()).collect::<Vec<_>>())?;
    d.set_item("c_phase", maps.c_self.iter().map(|c| c.arg()).collect::<Vec<_>>())?;
    d.set_item("v", maps.v)?;
    d.set_item("sir_db", maps.sir_db)?;
    d.set_item("filter_fingerprint", h.fingerprint())?;
    Ok(d)
}

/// Measured interference power per grid point over `frames` random frames.
#[pyfunction]
#[pyo3(signature = (params, frames, seed = 1, filter_kind = "sinc"))]
fn measure_iddi(py: Python<'_>, params: &PyFrameParams, frames: usize, seed: u64, filter_kind: &str) -> PyResult<Vec<f64>> {
    let p = params.inner;
    let h = filter(&p, filter_kind, 1.0, 1.0)?;
    py.detach(|| measure_interference_mc(&p, &h, frames, seed)).map_err(to_py)
}

/// `sum_q i(q)[l, l']` for the default filter.
#[pyfunction]
fn orthogonality(params: &PyFrameParams, l: usize, l_prime: i64) -> PyResult<f64> {
    let p = &params.inner;
    let h = filter(p, "sinc", 1.0, 1.0)?;
    Ok(orthogonality_check(p, &h, l, l_prime))
}

/// One EVA/Jakes draw as `(gain, delay_tap, doppler_tap)` tuples.
#[pyfunction]
#[pyo3(signature = (params, seed, stream = 0, fc_hz = 5e9, v_kmh = 120.0))]
fn eva_channel(params: &PyFrameParams, seed: u64, stream: u64, fc_hz: f64, v_kmh: f64) -> PyResult<Vec<(Complex64, usize, i64)>> {
    let ch = gen_eva_jakes(&params.inner, fc_hz, v_kmh, SeedSpec::new(seed, stream)).map_err(to_py)?;
    Ok(ch.paths.iter().map(|q| (q.gain, q.delay_tap, q.doppler_tap)).collect())
}

#[pyfunction]
fn max_doppler(fc_hz: f64, v_kmh: f64) -> f64 {
    max_doppler_hz(fc_hz, v_kmh)
}

/// One Monte-Carlo BER point through the full waveform link.
#[pyfunction]
#[pyo3(signature = (
    params, esn0_db, mode = "practical", channel = "awgn", min_errors = 200,
    min_bits = 0, max_frames = 1000, seed = 1, fc_hz = 5e9, v_kmh = 120.0
))]
#[allow(clippy::too_many_arguments)]
fn ber_point<'py>(
    py: Python<'py>,
    params: &PyFrameParams,
    esn0_db: f64,
    mode: &str,
    channel: &str,
    min_errors: usize,
    min_bits: usize,
    max_frames: usize,
    seed: u64,
    fc_hz: f64,
    v_kmh: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = ExperimentConfig::new(params.inner);
    cfg.receiver = match mode {
        "ideal" => ReceiverMode::Ideal,
        "practical" => ReceiverMode::Practical,
        other => return Err(PyValueError::new_err(format!("unknown mode {other:?}"))),
    };
    cfg.channel = match channel {
        "awgn" => ChannelMode::Awgn,
        "eva" => ChannelMode::EvaJakes { fc_hz, v_kmh },
        other => return Err(PyValueError::new_err(format!("unknown channel {other:?}"))),
    };
    cfg.esn0_grid_db = vec![esn0_db];
    cfg.min_bit_errors = min_errors;
    cfg.min_bits = min_bits;
    cfg.max_frames = max_frames;
    cfg.seed = seed;
    let pt = py.detach(|| harness::run_ber_point(&cfg, esn0_db)).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("esn0_db", pt.esn0_db)?;
    d.set_item("bit_errors", pt.bit_errors)?;
    d.set_item("bits", pt.bits)?;
    d.set_item("ber", pt.ber)?;
    d.set_item("ci_lo", pt.wilson_ci_95.0)?;
    d.set_item("ci_hi", pt.wilson_ci_95.1)?;
    d.set_item("frames", pt.frames_used)?;
    Ok(d)
}

#[pymodule]
fn otfs(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFrameParams>()?;
    m.add_function(wrap_pyfunction!(random_qpsk, m)?)?;
    m.add_function(wrap_pyfunction!(idzt, m)?)?;
    m.add_function(wrap_pyfunction!(dzt, m)?)?;
    m.add_function(wrap_pyfunction!(isfft, m)?)?;
    m.add_function(wrap_pyfunction!(sfft, m)?)?;
    m.add_function(wrap_pyfunction!(interference_maps, m)?)?;
    m.add_function(wrap_pyfunction!(measure_iddi, m)?)?;
    m.add_function(wrap_pyfunction!(orthogonality, m)?)?;
    m.add_function(wrap_pyfunction!(eva_channel, m)?)?;
    m.add_function(wrap_pyfunction!(max_doppler, m)?)?;
    m.add_function(wrap_pyfunction!(ber_point, m)?)?;
    Ok(())
}
