//! Closed-form learning onset for zero-mean joint Gaussian variables:
//! beta_c = (1 - lambda_min)^{-1} where lambda_min is the smallest
//! eigenvalue of Sigma_{X|Y} Sigma_X^{-1}, plus the conditional KL formula
//! behind the derivation and a discretizer for cross-checking against the
//! finite-alphabet onset solver.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde_json::json;

use crate::error::{IbError, Result};
use crate::prob::{GridInfo, JointDistribution};
use crate::special::bvn_cdf;

/// Zero-mean Gaussian joint over (X, Y) specified by its covariance blocks.
#[derive(Debug, Clone)]
pub struct GaussianJoint {
    sigma_x: DMatrix<f64>,
    sigma_y: DMatrix<f64>,
    sigma_xy: DMatrix<f64>,
}

fn require_pd(m: &DMatrix<f64>, name: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(IbError::DimensionMismatch(format!(
            "{name} is {}x{}, expected square",
            m.nrows(),
            m.ncols()
        )));
    }
    if (m - m.transpose()).abs().max() > 1e-10 * (1.0 + m.abs().max()) {
        return Err(IbError::NotPositiveDefinite(format!("{name} is not symmetric")));
    }
    if Cholesky::new(m.clone()).is_none() {
        return Err(IbError::NotPositiveDefinite(format!(
            "{name} is not positive-definite"
        )));
    }
    Ok(())
}

impl GaussianJoint {
    pub fn new(
        sigma_x: DMatrix<f64>,
        sigma_y: DMatrix<f64>,
        sigma_xy: DMatrix<f64>,
    ) -> Result<Self> {
        require_pd(&sigma_x, "sigma_x")?;
        require_pd(&sigma_y, "sigma_y")?;
        let (dx, dy) = (sigma_x.nrows(), sigma_y.nrows());
        if sigma_xy.nrows() != dx || sigma_xy.ncols() != dy {
            return Err(IbError::DimensionMismatch(format!(
                "sigma_xy is {}x{}, expected {dx}x{dy}",
                sigma_xy.nrows(),
                sigma_xy.ncols()
            )));
        }
        // full block covariance must be PD, which also makes both Schur
        // complements (the conditional covariances) PD
        let mut full = DMatrix::zeros(dx + dy, dx + dy);
        full.view_mut((0, 0), (dx, dx)).copy_from(&sigma_x);
        full.view_mut((0, dx), (dx, dy)).copy_from(&sigma_xy);
        full.view_mut((dx, 0), (dy, dx))
            .copy_from(&sigma_xy.transpose());
        full.view_mut((dx, dx), (dy, dy)).copy_from(&sigma_y);
        require_pd(&full, "joint covariance")?;
        Ok(Self {
            sigma_x,
            sigma_y,
            sigma_xy,
        })
    }

    pub fn scalar(var_x: f64, var_y: f64, cov_xy: f64) -> Result<Self> {
        Self::new(
            DMatrix::from_element(1, 1, var_x),
            DMatrix::from_element(1, 1, var_y),
            DMatrix::from_element(1, 1, cov_xy),
        )
    }

    pub fn d_x(&self) -> usize {
        self.sigma_x.nrows()
    }

    pub fn d_y(&self) -> usize {
        self.sigma_y.nrows()
    }

    pub fn sigma_x(&self) -> &DMatrix<f64> {
        &self.sigma_x
    }

    pub fn sigma_y(&self) -> &DMatrix<f64> {
        &self.sigma_y
    }

    pub fn sigma_xy(&self) -> &DMatrix<f64> {
        &self.sigma_xy
    }

    /// Sigma_{Y|X} = Sigma_Y - Sigma_YX Sigma_X^{-1} Sigma_XY.
    pub fn sigma_y_given_x(&self) -> DMatrix<f64> {
        let sx_inv = self
            .sigma_x
            .clone()
            .try_inverse()
            .expect("validated PD matrix is invertible");
        &self.sigma_y - self.sigma_xy.transpose() * sx_inv * &self.sigma_xy
    }

    /// Sigma_{X|Y} = Sigma_X - Sigma_XY Sigma_Y^{-1} Sigma_YX.
    pub fn sigma_x_given_y(&self) -> DMatrix<f64> {
        let sy_inv = self
            .sigma_y
            .clone()
            .try_inverse()
            .expect("validated PD matrix is invertible");
        &self.sigma_x - &self.sigma_xy * sy_inv * self.sigma_xy.transpose()
    }

    /// mu_{Y|x} = Sigma_YX Sigma_X^{-1} x.
    pub fn conditional_mean_y(&self, x: &DVector<f64>) -> DVector<f64> {
        let sx_inv = self
            .sigma_x
            .clone()
            .try_inverse()
            .expect("validated PD matrix is invertible");
        self.sigma_xy.transpose() * sx_inv * x
    }

    pub fn to_json(&self) -> String {
        let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
                .collect()
        };
        serde_json::to_string_pretty(&json!({
            "sigma_x": rows(&self.sigma_x),
            "sigma_y": rows(&self.sigma_y),
            "sigma_xy": rows(&self.sigma_xy),
        }))
        .expect("covariance serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        #[derive(serde::Deserialize)]
        struct Raw {
            sigma_x: Vec<Vec<f64>>,
            sigma_y: Vec<Vec<f64>>,
            sigma_xy: Vec<Vec<f64>>,
        }
        let raw: Raw =
            serde_json::from_str(s).map_err(|e| IbError::Parse(format!("gaussian joint: {e}")))?;
        let mat = |rows: &[Vec<f64>], name: &str| -> Result<DMatrix<f64>> {
            let nr = rows.len();
            if nr == 0 {
                return Err(IbError::Parse(format!("{name} is empty")));
            }
            let nc = rows[0].len();
            if rows.iter().any(|r| r.len() != nc) {
                return Err(IbError::Parse(format!("{name} has ragged rows")));
            }
            Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
        };
        Self::new(
            mat(&raw.sigma_x, "sigma_x")?,
            mat(&raw.sigma_y, "sigma_y")?,
            mat(&raw.sigma_xy, "sigma_xy")?,
        )
    }
}

/// KL[N(mu_{Y|x}, Sigma_{Y|X}) || N(ref_mean, ref_cov)] in nats.
pub fn gaussian_kl_conditional(
    g: &GaussianJoint,
    x: &DVector<f64>,
    ref_mean: &DVector<f64>,
    ref_cov: &DMatrix<f64>,
) -> Result<f64> {
    if x.len() != g.d_x() || ref_mean.len() != g.d_y() {
        return Err(IbError::DimensionMismatch(format!(
            "x has {} entries (d_x = {}), reference mean has {} (d_y = {})",
            x.len(),
            g.d_x(),
            ref_mean.len(),
            g.d_y()
        )));
    }
    require_pd(ref_cov, "reference covariance")?;
    if ref_cov.nrows() != g.d_y() {
        return Err(IbError::DimensionMismatch(format!(
            "reference covariance is {}x{}, d_y = {}",
            ref_cov.nrows(),
            ref_cov.ncols(),
            g.d_y()
        )));
    }
    let syx = g.sigma_y_given_x();
    let lam_inv = ref_cov
        .clone()
        .try_inverse()
        .expect("validated PD matrix is invertible");
    let dm = g.conditional_mean_y(x) - ref_mean;
    let quad = (dm.transpose() * &lam_inv * &dm)[(0, 0)];
    let trace = (&lam_inv * &syx).trace();
    let logdet = ref_cov.determinant().ln() - syx.determinant().ln();
    Ok(0.5 * (quad + trace - g.d_y() as f64 + logdet))
}

fn sqrt_pd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// (beta_c, nu_direction). The eigenproblem is solved on the symmetrized
/// form Sigma_X^{-1/2} Sigma_{X|Y} Sigma_X^{-1/2}; an eigenvector w of that
/// maps back to phi = Sigma_X^{1/2} w.
pub fn gaussian_onset(g: &GaussianJoint) -> Result<(f64, DVector<f64>)> {
    if g.sigma_xy.abs().max() == 0.0 {
        return Err(IbError::NoOnset { mi_threshold: 0.0 });
    }
    let sx_half = sqrt_pd(&g.sigma_x);
    let sx_half_inv = sx_half
        .clone()
        .try_inverse()
        .expect("PD square root is invertible");
    let m = &sx_half_inv * g.sigma_x_given_y() * &sx_half_inv;
    let sym = 0.5 * (&m + m.transpose());
    let eig = sym.symmetric_eigen();
    let mut idx = 0;
    for i in 1..eig.eigenvalues.len() {
        if eig.eigenvalues[i] < eig.eigenvalues[idx] {
            idx = i;
        }
    }
    let lambda_min = eig.eigenvalues[idx];
    if lambda_min >= 1.0 - 1e-12 {
        return Err(IbError::NoOnset { mi_threshold: 0.0 });
    }
    let beta_c = 1.0 / (1.0 - lambda_min);
    let mut nu = &sx_half * eig.eigenvectors.column(idx);
    let norm = nu.norm();
    nu /= norm;
    // fix the sign convention: largest-magnitude entry positive
    let lead = nu.iter().cloned().fold(0.0f64, |a, b| {
        if b.abs() > a.abs() {
            b
        } else {
            a
        }
    });
    if lead < 0.0 {
        nu = -nu;
    }
    Ok((beta_c, nu))
}

/// Bin masses of a scalar-scalar Gaussian joint on a regular grid truncated
/// at +-truncation standard deviations, via bivariate CDF differences.
pub fn discretize_gaussian(
    g: &GaussianJoint,
    n_bins: usize,
    truncation: f64,
) -> Result<JointDistribution> {
    if g.d_x() != 1 || g.d_y() != 1 {
        return Err(IbError::InvalidParameter(format!(
            "discretization handles scalar X and Y only (d_x = {}, d_y = {})",
            g.d_x(),
            g.d_y()
        )));
    }
    if n_bins < 16 {
        return Err(IbError::InvalidParameter(format!(
            "n_bins = {n_bins} < 16 gives unusable resolution"
        )));
    }
    if !(truncation > 0.0) {
        return Err(IbError::InvalidParameter(format!(
            "truncation = {truncation} must be positive"
        )));
    }
    let sx = g.sigma_x[(0, 0)].sqrt();
    let sy = g.sigma_y[(0, 0)].sqrt();
    let rho = g.sigma_xy[(0, 0)] / (sx * sy);
    if rho.abs() > 1.0 - 1e-9 {
        return Err(IbError::InvalidParameter(format!(
            "correlation {rho} is degenerate; mass concentrates on a line"
        )));
    }
    // cumulative CDF at every grid corner (standardized coordinates), then
    // rectangle masses by inclusion-exclusion
    let edges: Vec<f64> = (0..=n_bins)
        .map(|i| -truncation + 2.0 * truncation * i as f64 / n_bins as f64)
        .collect();
    let n_e = n_bins + 1;
    let mut cdf = vec![0.0; n_e * n_e];
    for i in 0..n_e {
        for j in 0..n_e {
            cdf[i * n_e + j] = bvn_cdf(edges[i], edges[j], rho);
        }
    }
    let mut w = DMatrix::zeros(n_bins, n_bins);
    for i in 0..n_bins {
        for j in 0..n_bins {
            let m = cdf[(i + 1) * n_e + j + 1] - cdf[i * n_e + j + 1] - cdf[(i + 1) * n_e + j]
                + cdf[i * n_e + j];
            w[(i, j)] = m.max(0.0);
        }
    }
    let mut joint = JointDistribution::from_unnormalized(w)?;
    let width_x = 2.0 * truncation * sx / n_bins as f64;
    let width_y = 2.0 * truncation * sy / n_bins as f64;
    let centers = |s: f64| -> Vec<f64> {
        (0..n_bins)
            .map(|i| s * (edges[i] + edges[i + 1]) / 2.0)
            .collect()
    };
    joint.x_grid = Some(GridInfo {
        centers: centers(sx),
        widths: vec![width_x; n_bins],
    });
    joint.y_grid = Some(GridInfo {
        centers: centers(sy),
        widths: vec![width_y; n_bins],
    });
    Ok(joint)
}
