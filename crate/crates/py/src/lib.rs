//! Python bindings for the onset toolkit: a thin `JointDistribution`
//! wrapper plus functions mirroring the Rust API. Structured results come
//! back as plain dicts so the Python side needs no extra types.

use ibonset as ib;
use ibonset::IbError;
use nalgebra::DMatrix;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: IbError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct JointDistribution {
    inner: ib::JointDistribution,
}

#[pymethods]
impl JointDistribution {
    /// Build from a dense row-major matrix p[x][y]; normalizes the mass.
    #[new]
    fn new(p: Vec<Vec<f64>>) -> PyResult<Self> {
        let nx = p.len();
        let ny = p.first().map_or(0, Vec::len);
        let m = DMatrix::from_fn(nx, ny, |i, j| *p[i].get(j).unwrap_or(&f64::NAN));
        Ok(Self {
            inner: ib::JointDistribution::from_unnormalized(m).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: ib::JointDistribution::from_csv(text).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: ib::JointDistribution::from_json(text).map_err(err)?,
        })
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn nx(&self) -> usize {
        self.inner.nx()
    }

    #[getter]
    fn ny(&self) -> usize {
        self.inner.ny()
    }

    fn probabilities(&self) -> Vec<Vec<f64>> {
        (0..self.inner.nx())
            .map(|x| (0..self.inner.ny()).map(|y| self.inner.prob(x, y)).collect())
            .collect()
    }

    fn marginals(&self) -> (Vec<f64>, Vec<f64>) {
        let (px, py) = self.inner.marginals();
        (px.as_slice().to_vec(), py.as_slice().to_vec())
    }

    /// I(X;Y) in bits.
    fn mutual_information(&self) -> f64 {
        self.inner.mutual_information()
    }

    fn __repr__(&self) -> String {
        format!(
            "JointDistribution({}x{}, I(X;Y)={:.6} bits)",
            self.inner.nx(),
            self.inner.ny(),
            self.inner.mutual_information()
        )
    }
}

fn onset_cfg(tol: f64, max_iter: u64, restarts: usize, seed: u64) -> ib::OnsetConfig {
    ib::OnsetConfig {
        tol,
        max_iter,
        max_restarts: restarts,
        seed,
        ..ib::OnsetConfig::default()
    }
}

/// Locate the learning onset: returns beta_c, eta_kl, the perturbative
/// marginals r_x / r_y, and convergence metadata.
#[pyfunction]
#[pyo3(signature = (joint, tol=1e-10, max_iter=2_000_000, restarts=4, seed=0))]
fn solve_onset<'py>(
    py: Python<'py>,
    joint: &JointDistribution,
    tol: f64,
    max_iter: u64,
    restarts: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let s = ib::solve_onset(&joint.inner, &onset_cfg(tol, max_iter, restarts, seed)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("beta_c", s.beta_c)?;
    d.set_item("eta_kl", s.eta_kl)?;
    d.set_item("r_x", s.r_x.as_slice())?;
    d.set_item("r_y", s.r_y.as_slice())?;
    d.set_item("converged", s.converged)?;
    d.set_item("restarts_used", s.restarts_used)?;
    Ok(d)
}

/// Second-order predictions at the onset: kappa, L2, and the information
/// slopes (bits). Raises ValueError when kappa <= 0.
#[pyfunction]
#[pyo3(signature = (joint, tol=1e-10, max_iter=2_000_000, restarts=4, seed=0))]
fn predict_onset<'py>(
    py: Python<'py>,
    joint: &JointDistribution,
    tol: f64,
    max_iter: u64,
    restarts: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let s = ib::solve_onset(&joint.inner, &onset_cfg(tol, max_iter, restarts, seed)).map_err(err)?;
    let p = ib::predict(&joint.inner, &s).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("beta_c", p.beta_c)?;
    d.set_item("kappa", p.kappa)?;
    d.set_item("sum_q1_z1", p.sum_q1_z1)?;
    d.set_item("l2_bits", p.l2)?;
    d.set_item("i1_zx_bits", p.i1_zx)?;
    d.set_item("i1_zy_bits", p.i1_zy)?;
    Ok(d)
}

/// Chi^2 analysis: singular spectrum of B, eta_chi2, and the beta_c upper
/// bound beta_c_hat = 1 / eta_chi2.
#[pyfunction]
fn eta_chi2<'py>(py: Python<'py>, joint: &JointDistribution) -> PyResult<Bound<'py, PyDict>> {
    let c = ib::eta_chi2(&joint.inner).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("eta_chi2", c.eta_chi2)?;
    d.set_item("beta_c_hat", c.beta_c_hat)?;
    d.set_item("singular_values", c.singular_values)?;
    Ok(d)
}

/// Grid-search supremum of KL[r_y || p_y] / KL[r_x || p_x] (small alphabets).
#[pyfunction]
#[pyo3(signature = (joint, resolution=30))]
fn eta_kl_bruteforce(joint: &JointDistribution, resolution: usize) -> PyResult<f64> {
    ib::eta_kl_bruteforce(&joint.inner, resolution).map_err(err)
}

/// Solve the IB at one beta; returns the encoder and both informations (bits).
#[pyfunction]
#[pyo3(signature = (joint, beta, z_cardinality=None, tol=1e-10, max_iter=100_000, seed=0))]
fn solve_ib<'py>(
    py: Python<'py>,
    joint: &JointDistribution,
    beta: f64,
    z_cardinality: Option<usize>,
    tol: f64,
    max_iter: u64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = ib::SolverConfig {
        z_cardinality,
        tol,
        max_iter,
        seed,
    };
    let s = ib::solve_ib(&joint.inner, beta, &cfg).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("beta", s.beta)?;
    d.set_item("i_zx_bits", s.i_zx)?;
    d.set_item("i_zy_bits", s.i_zy)?;
    d.set_item("loss_bits", s.loss)?;
    d.set_item("converged", s.converged)?;
    d.set_item("iterations", s.iterations)?;
    let q = s.encoder.matrix();
    let rows: Vec<Vec<f64>> = (0..q.nrows())
        .map(|z| (0..q.ncols()).map(|x| q[(z, x)]).collect())
        .collect();
    d.set_item("encoder", rows)?;
    Ok(d)
}

/// Trace the IB frontier over a beta grid; one dict per grid point.
#[pyfunction]
#[pyo3(signature = (joint, beta_grid, tol=1e-10, max_iter=100_000, seed=0))]
fn frontier_sweep<'py>(
    py: Python<'py>,
    joint: &JointDistribution,
    beta_grid: Vec<f64>,
    tol: f64,
    max_iter: u64,
    seed: u64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = ib::SolverConfig {
        z_cardinality: None,
        tol,
        max_iter,
        seed,
    };
    let pts = ib::frontier_sweep(&joint.inner, &beta_grid, &cfg).map_err(err)?;
    pts.into_iter()
        .map(|p| {
            let d = PyDict::new(py);
            d.set_item("beta", p.beta)?;
            d.set_item("i_zx_bits", p.i_zx)?;
            d.set_item("i_zy_bits", p.i_zy)?;
            d.set_item("loss_bits", p.loss)?;
            d.set_item("converged", p.converged)?;
            Ok(d)
        })
        .collect()
}

/// Closed-form Gaussian onset from covariance blocks: (beta_c, nu).
#[pyfunction]
fn gaussian_onset(
    sigma_x: Vec<Vec<f64>>,
    sigma_y: Vec<Vec<f64>>,
    sigma_xy: Vec<Vec<f64>>,
) -> PyResult<(f64, Vec<f64>)> {
    let dense = |m: &Vec<Vec<f64>>| {
        let r = m.len();
        let c = m.first().map_or(0, Vec::len);
        DMatrix::from_fn(r, c, |i, j| *m[i].get(j).unwrap_or(&f64::NAN))
    };
    let g = ib::GaussianJoint::new(dense(&sigma_x), dense(&sigma_y), dense(&sigma_xy))
        .map_err(err)?;
    let (beta_c, nu) = ib::gaussian_onset(&g).map_err(err)?;
    Ok((beta_c, nu.as_slice().to_vec()))
}

/// Bin-mass discretization of a scalar correlated Gaussian pair.
#[pyfunction]
#[pyo3(signature = (var_x, var_y, cov_xy, n_bins=128, truncation=5.0))]
fn discretize_gaussian(
    var_x: f64,
    var_y: f64,
    cov_xy: f64,
    n_bins: usize,
    truncation: f64,
) -> PyResult<JointDistribution> {
    let g = ib::GaussianJoint::scalar(var_x, var_y, cov_xy).map_err(err)?;
    Ok(JointDistribution {
        inner: ib::discretize_gaussian(&g, n_bins, truncation).map_err(err)?,
    })
}

/// Binary symmetric channel with uniform input and flip probability delta.
#[pyfunction]
fn bsc_joint(delta: f64) -> PyResult<JointDistribution> {
    Ok(JointDistribution {
        inner: ib::bsc_joint(delta).map_err(err)?,
    })
}

/// The committed 4x4 categorical example joint.
#[pyfunction]
fn fig1_joint() -> JointDistribution {
    JointDistribution {
        inner: ib::fig1_joint(),
    }
}

/// Binary classification joint from a family spec JSON (same schema as the
/// CLI gen command: {"family": "gaussian", "mu": [..], "sigma": [..], ...}).
#[pyfunction]
fn binary_classification_joint(spec_json: &str) -> PyResult<JointDistribution> {
    let spec: ib::BinaryClassSpec = serde_json::from_str(spec_json)
        .map_err(|e| PyValueError::new_err(format!("bad spec: {e}")))?;
    Ok(JointDistribution {
        inner: ib::binary_classification_joint(&spec).map_err(err)?,
    })
}

/// Noisy-function joint: {"f": "linear" | "cubic" | "sigmoid" | "quadratic",
/// "sigma": .., optional n_x_bins / n_y_bins / y_range}.
#[pyfunction]
fn noisy_function_joint(spec_json: &str) -> PyResult<JointDistribution> {
    let spec: ib::NoisyFunctionSpec = serde_json::from_str(spec_json)
        .map_err(|e| PyValueError::new_err(format!("bad spec: {e}")))?;
    Ok(JointDistribution {
        inner: ib::noisy_function_joint(&spec).map_err(err)?,
    })
}

#[pymodule]
fn ibonset_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<JointDistribution>()?;
    m.add_function(wrap_pyfunction!(solve_onset, m)?)?;
    m.add_function(wrap_pyfunction!(predict_onset, m)?)?;
    m.add_function(wrap_pyfunction!(eta_chi2, m)?)?;
    m.add_function(wrap_pyfunction!(eta_kl_bruteforce, m)?)?;
    m.add_function(wrap_pyfunction!(solve_ib, m)?)?;
    m.add_function(wrap_pyfunction!(frontier_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_onset, m)?)?;
    m.add_function(wrap_pyfunction!(discretize_gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(bsc_joint, m)?)?;
    m.add_function(wrap_pyfunction!(fig1_joint, m)?)?;
    m.add_function(wrap_pyfunction!(binary_classification_joint, m)?)?;
    m.add_function(wrap_pyfunction!(noisy_function_joint, m)?)?;
    Ok(())
}
