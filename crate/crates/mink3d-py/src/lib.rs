//! Python bindings for the mink3d toolkit.
//!
//! Exposes the main volume types and operations: thresholding, global and
//! local Minkowski functionals, anisotropy analysis, phantom generation,
//! sphere fitting, regression models and the evaluation statistics. Built as
//! an extension module; see python/smoke_test.py for usage.

// Both lints fire inside pyo3 macro expansions of PyResult returns and
// tuple-row return types.
#![allow(clippy::useless_conversion)]
#![allow(clippy::type_complexity)]

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use mink3d_core::aniso_mf;
use mink3d_core::calibration::{hu_to_bmd as core_hu_to_bmd, PhantomCalibration};
use mink3d_core::error::Error as CoreError;
use mink3d_core::features::{histogram as core_histogram, HistogramSpec};
use mink3d_core::learn;
use mink3d_core::local_mf as core_local_mf;
use mink3d_core::local_mf::default_sigma_long;
use mink3d_core::minkowski;
use mink3d_core::phantom;
use mink3d_core::stats_eval;
use mink3d_core::voi;
use mink3d_core::volume;

fn err(e: CoreError) -> PyErr {
    match e {
        CoreError::Io(_) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// 3D scalar volume (HU or BMD) with physical spacing.
#[pyclass(name = "ScalarVolume")]
#[derive(Clone)]
struct PyScalarVolume {
    inner: volume::ScalarVolume,
}

#[pymethods]
impl PyScalarVolume {
    /// Build from dims (nx, ny, nz), spacing in mm, x-fastest values and a
    /// value kind ("HU" or "BMD").
    #[new]
    #[pyo3(signature = (dims, spacing, values, kind="BMD"))]
    fn new(
        dims: (usize, usize, usize),
        spacing: (f64, f64, f64),
        values: Vec<f32>,
        kind: &str,
    ) -> PyResult<Self> {
        let value_kind = match kind {
            "HU" => volume::ValueKind::Hu,
            "BMD" => volume::ValueKind::Bmd,
            other => return Err(PyValueError::new_err(format!("unknown value kind {other:?}"))),
        };
        Ok(PyScalarVolume {
            inner: volume::ScalarVolume::new(dims, spacing, values, value_kind).map_err(err)?,
        })
    }

    #[getter]
    fn dims(&self) -> (usize, usize, usize) {
        self.inner.dims()
    }

    #[getter]
    fn spacing(&self) -> (f64, f64, f64) {
        self.inner.spacing()
    }

    #[getter]
    fn kind(&self) -> &'static str {
        match self.inner.value_kind() {
            volume::ValueKind::Hu => "HU",
            volume::ValueKind::Bmd => "BMD",
        }
    }

    fn get(&self, i: usize, j: usize, k: usize) -> f32 {
        self.inner.get(i, j, k)
    }

    fn values(&self) -> Vec<f32> {
        self.inner.values().to_vec()
    }

    /// Write payload + sidecar header.
    fn save(&self, path: PathBuf) -> PyResult<()> {
        volume::save_raw(&self.inner, &path).map_err(err)?;
        Ok(())
    }

    fn __repr__(&self) -> String {
        let (nx, ny, nz) = self.inner.dims();
        format!("ScalarVolume({nx}x{ny}x{nz}, {})", self.kind())
    }
}

/// 3D binary volume; true voxels are white (foreground).
#[pyclass(name = "BinaryVolume")]
#[derive(Clone)]
struct PyBinaryVolume {
    inner: volume::BinaryVolume,
}

#[pymethods]
impl PyBinaryVolume {
    #[new]
    fn new(dims: (usize, usize, usize), voxels: Vec<bool>) -> PyResult<Self> {
        Ok(PyBinaryVolume { inner: volume::BinaryVolume::new(dims, voxels).map_err(err)? })
    }

    #[getter]
    fn dims(&self) -> (usize, usize, usize) {
        self.inner.dims()
    }

    fn white_count(&self) -> usize {
        self.inner.white_count()
    }

    fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.inner.get(i, j, k)
    }

    fn save(&self, path: PathBuf, spacing: (f64, f64, f64)) -> PyResult<()> {
        volume::save_mask(&self.inner, spacing, &path).map_err(err)?;
        Ok(())
    }

    fn __repr__(&self) -> String {
        let (nx, ny, nz) = self.inner.dims();
        format!("BinaryVolume({nx}x{ny}x{nz}, {} white)", self.inner.white_count())
    }
}

#[pyfunction]
fn load_volume(path: PathBuf) -> PyResult<PyScalarVolume> {
    Ok(PyScalarVolume { inner: volume::load_raw(&path).map_err(err)? })
}

#[pyfunction]
fn load_mask(path: PathBuf) -> PyResult<PyBinaryVolume> {
    Ok(PyBinaryVolume { inner: volume::load_mask(&path).map_err(err)? })
}

/// White iff value >= t.
#[pyfunction]
fn threshold(vol: &PyScalarVolume, t: f32) -> PyBinaryVolume {
    PyBinaryVolume { inner: volume::threshold(&vol.inner, t) }
}

/// BMD = [HA_B / (HU_B - HU_W)] * (HU - HU_W).
#[pyfunction]
#[pyo3(signature = (hu, hu_w, hu_b, ha_b=200.0))]
fn hu_to_bmd(hu: f64, hu_w: f64, hu_b: f64, ha_b: f64) -> PyResult<f64> {
    let calib = PhantomCalibration::with_densities(0.0, ha_b, hu_w, hu_b).map_err(err)?;
    Ok(core_hu_to_bmd(hu, &calib))
}

/// Global (volume, surface, mean_breadth, euler) in lattice units.
#[pyfunction]
fn mf_global(mask: &PyBinaryVolume) -> (i64, i64, i64, i64) {
    let mf = minkowski::mf_global(&mask.inner);
    (mf.volume, mf.surface, mf.mean_breadth, mf.euler)
}

/// Per-white-voxel kernel-weighted MF rows:
/// (i, j, k, volume, surface, mean_breadth, euler), x-fastest order.
#[pyfunction]
#[pyo3(signature = (mask, kernel_size=5, kind="box", sigma=None))]
fn local_mf(
    mask: &PyBinaryVolume,
    kernel_size: usize,
    kind: &str,
    sigma: Option<f64>,
) -> PyResult<Vec<(usize, usize, usize, f64, f64, f64, f64)>> {
    let kernel = match kind {
        "box" => core_local_mf::make_box_kernel(kernel_size),
        "gaussian" => core_local_mf::make_isotropic_gaussian(
            kernel_size,
            sigma.unwrap_or_else(|| default_sigma_long(kernel_size)),
        ),
        other => return Err(PyValueError::new_err(format!("unknown kernel kind {other:?}"))),
    }
    .map_err(err)?;
    let table = core_local_mf::local_mf(&mask.inner, &kernel);
    Ok(table
        .rows
        .iter()
        .map(|r| {
            (r.voxel.i, r.voxel.j, r.voxel.k, r.values[0], r.values[1], r.values[2], r.values[3])
        })
        .collect())
}

/// Per-voxel anisotropy rows:
/// (i, j, k, component, fa, theta, phi, degenerate).
#[pyfunction]
#[pyo3(signature = (mask, kernel_size=7, ratio=4.0, sigma_long=None))]
fn anisotropy(
    mask: &PyBinaryVolume,
    kernel_size: usize,
    ratio: f64,
    sigma_long: Option<f64>,
) -> PyResult<Vec<(usize, usize, usize, &'static str, f64, f64, f64, bool)>> {
    let bank = aniso_mf::direction_bank_default();
    let map = aniso_mf::compute_anisotropy(
        &mask.inner,
        &bank,
        kernel_size,
        sigma_long.unwrap_or_else(|| default_sigma_long(kernel_size)),
        ratio,
    )
    .map_err(err)?;
    let mut out = Vec::with_capacity(map.voxels.len() * 4);
    for (vi, v) in map.voxels.iter().enumerate() {
        for comp in minkowski::MfComponent::ALL {
            let r = map.record(vi, comp);
            out.push((v.i, v.j, v.k, comp.name(), r.fa, r.theta, r.phi, r.degenerate));
        }
    }
    Ok(out)
}

/// FA of an eigenvalue triple.
#[pyfunction]
fn fractional_anisotropy(l1: f64, l2: f64, l3: f64) -> PyResult<f64> {
    aniso_mf::fractional_anisotropy(l1, l2, l3).map_err(err)
}

/// (theta, phi) in degrees of a direction vector.
#[pyfunction]
fn principal_angles(v: (f64, f64, f64)) -> PyResult<(f64, f64)> {
    aniso_mf::principal_angles([v.0, v.1, v.2]).map_err(err)
}

/// Normalized histogram with uniform bins on [lo, hi]; out-of-range values
/// clamp to the edge bins.
#[pyfunction]
#[pyo3(signature = (values, lo, hi, bins=10))]
fn histogram(values: Vec<f64>, lo: f64, hi: f64, bins: usize) -> PyResult<Vec<f64>> {
    let spec = HistogramSpec::new(bins, lo, hi).map_err(err)?;
    Ok(core_histogram(&values, &spec))
}

/// Gauss-Newton sphere fit; returns ((cx, cy, cz), radius, rms_residual).
#[pyfunction]
fn fit_sphere(points: Vec<(f64, f64, f64)>) -> PyResult<((f64, f64, f64), f64, f64)> {
    let pts: Vec<[f64; 3]> = points.iter().map(|&(x, y, z)| [x, y, z]).collect();
    let fit = voi::fit_sphere(&pts).map_err(err)?;
    Ok((
        (fit.voi.center[0], fit.voi.center[1], fit.voi.center[2]),
        fit.voi.radius,
        fit.rms_residual,
    ))
}

/// theta = (X^T X + lambda D)^+ X^T y; theta[0] is the intercept.
#[pyfunction]
#[pyo3(signature = (x, y, lam=0.0))]
fn normal_equation(x: Vec<Vec<f64>>, y: Vec<f64>, lam: f64) -> PyResult<Vec<f64>> {
    let n = x.first().map(Vec::len).unwrap_or(0);
    let names = (0..n).map(|i| format!("x{i}")).collect();
    let data = learn::Dataset::new(x, y, names).map_err(err)?;
    Ok(learn::normal_equation(&data, lam).theta)
}

/// A trained regression model (multireg, multireg_gd or svr).
#[pyclass(name = "LinearModel")]
struct PyLinearModel {
    inner: learn::Model,
}

#[pymethods]
impl PyLinearModel {
    #[staticmethod]
    #[pyo3(signature = (x, y, method="multireg", lam=0.0, alpha=0.1, c=1.0, epsilon=0.1, max_iters=50_000))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        x: Vec<Vec<f64>>,
        y: Vec<f64>,
        method: &str,
        lam: f64,
        alpha: f64,
        c: f64,
        epsilon: f64,
        max_iters: usize,
    ) -> PyResult<Self> {
        let method = learn::Method::parse(method)
            .ok_or_else(|| PyValueError::new_err(format!("unknown method {method:?}")))?;
        let n = x.first().map(Vec::len).unwrap_or(0);
        let names = (0..n).map(|i| format!("x{i}")).collect();
        let data = learn::Dataset::new(x, y, names).map_err(err)?;
        let config = learn::TrainConfig {
            method,
            alpha,
            lambda: lam,
            c,
            epsilon,
            max_iters,
            ..learn::TrainConfig::default()
        };
        Ok(PyLinearModel { inner: learn::Model::train(&data, &config).map_err(err)? })
    }

    fn predict(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.predict(&x).map_err(err)
    }

    #[getter]
    fn theta(&self) -> Vec<f64> {
        self.inner.params.theta.clone()
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.write_file(&path).map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyLinearModel { inner: learn::Model::read_file(&path).map_err(err)? })
    }

    fn __repr__(&self) -> String {
        format!(
            "LinearModel({}, {} coefficients)",
            self.inner.method.name(),
            self.inner.params.theta.len()
        )
    }
}

#[pyfunction]
fn rmse(pred: Vec<f64>, truth: Vec<f64>) -> PyResult<f64> {
    stats_eval::rmse(&pred, &truth).map_err(err)
}

#[pyfunction]
fn pearson_r(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    stats_eval::pearson_r(&a, &b).map_err(err)
}

/// Two-sided Wilcoxon signed-rank p-value for paired samples; returns
/// (p_value, w_plus, w_minus, exact).
#[pyfunction]
fn wilcoxon_signed_rank(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64, f64, bool)> {
    let r = stats_eval::wilcoxon_signed_rank(&a, &b).map_err(err)?;
    Ok((r.p_value, r.w_plus, r.w_minus, r.exact))
}

/// Per-hypothesis Holm-Bonferroni decisions at family level alpha.
#[pyfunction]
#[pyo3(signature = (pvals, alpha=0.05))]
fn holm_bonferroni(pvals: Vec<f64>, alpha: f64) -> Vec<bool> {
    stats_eval::holm_bonferroni(&pvals, alpha)
}

/// Generate a synthetic phantom volume; returns (volume, fl_kn, mean_bmd,
/// alignment). Kinds: rod_lattice, plate_stack, isotropic_blobs.
#[pyfunction]
#[pyo3(signature = (kind, dims, direction=(1.0, 0.0, 0.0), fraction=0.2, thickness=3.0, seed=7))]
fn generate_phantom(
    kind: &str,
    dims: (usize, usize, usize),
    direction: (f64, f64, f64),
    fraction: f64,
    thickness: f64,
    seed: u64,
) -> PyResult<(PyScalarVolume, f64, f64, f64)> {
    let kind = phantom::PhantomKind::parse(kind)
        .ok_or_else(|| PyValueError::new_err(format!("unknown phantom kind {kind:?}")))?;
    let spec = phantom::PhantomSpec {
        kind,
        dims,
        direction: [direction.0, direction.1, direction.2],
        fraction,
        thickness,
        seed,
    };
    let s = phantom::generate(&spec).map_err(err)?;
    Ok((PyScalarVolume { inner: s.volume }, s.fl_kn, s.mean_bmd, s.alignment))
}

#[pymodule]
fn mink3d_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScalarVolume>()?;
    m.add_class::<PyBinaryVolume>()?;
    m.add_class::<PyLinearModel>()?;
    m.add_function(wrap_pyfunction!(load_volume, m)?)?;
    m.add_function(wrap_pyfunction!(load_mask, m)?)?;
    m.add_function(wrap_pyfunction!(threshold, m)?)?;
    m.add_function(wrap_pyfunction!(hu_to_bmd, m)?)?;
    m.add_function(wrap_pyfunction!(mf_global, m)?)?;
    m.add_function(wrap_pyfunction!(local_mf, m)?)?;
    m.add_function(wrap_pyfunction!(anisotropy, m)?)?;
    m.add_function(wrap_pyfunction!(fractional_anisotropy, m)?)?;
    m.add_function(wrap_pyfunction!(principal_angles, m)?)?;
    m.add_function(wrap_pyfunction!(histogram, m)?)?;
    m.add_function(wrap_pyfunction!(fit_sphere, m)?)?;
    m.add_function(wrap_pyfunction!(normal_equation, m)?)?;
    m.add_function(wrap_pyfunction!(rmse, m)?)?;
    m.add_function(wrap_pyfunction!(pearson_r, m)?)?;
    m.add_function(wrap_pyfunction!(wilcoxon_signed_rank, m)?)?;
    m.add_function(wrap_pyfunction!(holm_bonferroni, m)?)?;
    m.add_function(wrap_pyfunction!(generate_phantom, m)?)?;
    Ok(())
}
