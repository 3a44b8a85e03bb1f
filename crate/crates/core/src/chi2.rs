//! Squared-maximal-correlation analysis of a joint distribution: the
//! spectrum of the matrix B(x, y) = p(x, y)/sqrt(p(x) p(y)), the contraction
//! coefficient eta_chi2 = sigma_2^2, and the resulting fixed-space onset
//! estimate beta_c_hat = 1/eta_chi2, an upper bound on the true beta_c.

use serde_json::json;

use crate::error::{IbError, Result};
use crate::prob::JointDistribution;

const SIGMA_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct Chi2Analysis {
    pub eta_chi2: f64,
    pub beta_c_hat: f64,
    /// second-largest singular value of B
    pub sigma2: f64,
    /// full spectrum, descending; singular_values[0] = 1 always
    pub singular_values: Vec<f64>,
}

impl Chi2Analysis {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&json!({
            "eta_chi2": self.eta_chi2,
            "beta_c_hat": self.beta_c_hat,
            "singular_values": self.singular_values,
        }))
        .expect("analysis serialization cannot fail")
    }
}

/// SVD of the divergence transition matrix. Errors with a no-onset signal
/// when sigma_2 vanishes (independent X and Y).
pub fn eta_chi2(joint: &JointDistribution) -> Result<Chi2Analysis> {
    let b = joint.divergence_transition_matrix();
    let svd = b.svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    // sigma_1 = 1 with singular vectors sqrt(p); anything else means the
    // joint construction is broken, not a property of the data
    debug_assert!((sv[0] - 1.0).abs() < 1e-10, "sigma_1 = {} != 1", sv[0]);
    let sigma2 = sv.get(1).copied().unwrap_or(0.0);
    if sigma2 < SIGMA_TOL {
        return Err(IbError::NoOnset {
            mi_threshold: SIGMA_TOL,
        });
    }
    let eta = sigma2 * sigma2;
    Ok(Chi2Analysis {
        eta_chi2: eta,
        beta_c_hat: 1.0 / eta,
        sigma2,
        singular_values: sv,
    })
}

/// sum_{x,y} p(x) p(y) (p(x,y)/(p(x) p(y)) - 1)^2, which also equals
/// ||B||_F^2 - 1.
pub fn chi2_information(joint: &JointDistribution) -> f64 {
    let (px, py) = joint.marginals();
    let mut s = 0.0;
    for x in 0..joint.nx() {
        for y in 0..joint.ny() {
            let base = px[x] * py[y];
            let d = joint.prob(x, y) / base - 1.0;
            s += base * d * d;
        }
    }
    s
}

/// eta_chi2 of the joint and of its transpose; the two agree because B and
/// B^T share a spectrum. The directional KL coefficient has no such symmetry.
pub fn symmetry_check(joint: &JointDistribution) -> Result<(f64, f64)> {
    let fwd = eta_chi2(joint)?.eta_chi2;
    let bwd = eta_chi2(&joint.transposed())?.eta_chi2;
    Ok((fwd, bwd))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{bsc_joint, fig1_joint};
    use approx::assert_abs_diff_eq;

    #[test]
    fn independent_joint_signals_no_onset() {
        let j = JointDistribution::from_rows(&[vec![0.18, 0.42], vec![0.12, 0.28]]).unwrap();
        assert!(matches!(eta_chi2(&j), Err(IbError::NoOnset { .. })));
        assert_abs_diff_eq!(chi2_information(&j), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn identity_channel() {
        let j = JointDistribution::from_rows(&[vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        let a = eta_chi2(&j).unwrap();
        assert_abs_diff_eq!(a.eta_chi2, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a.beta_c_hat, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(chi2_information(&j), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn bsc_second_singular_value() {
        for delta in [0.1, 0.25, 0.4] {
            let j = bsc_joint(delta).unwrap();
            let a = eta_chi2(&j).unwrap();
            assert_abs_diff_eq!(a.sigma2, 1.0 - 2.0 * delta, epsilon = 1e-12);
            let eta = (1.0 - 2.0 * delta) * (1.0 - 2.0 * delta);
            assert_abs_diff_eq!(a.eta_chi2, eta, epsilon = 1e-12);
            assert_abs_diff_eq!(a.beta_c_hat, 1.0 / eta, epsilon = 1e-9);
        }
    }

    #[test]
    fn chi2_information_matches_frobenius_form() {
        let j = fig1_joint();
        let b = j.divergence_transition_matrix();
        let frob: f64 = b.iter().map(|v| v * v).sum();
        assert_abs_diff_eq!(chi2_information(&j), frob - 1.0, epsilon = 1e-10);
    }

    #[test]
    fn analysis_invariants_on_random_like_joint() {
        let j = fig1_joint();
        let a = eta_chi2(&j).unwrap();
        assert_abs_diff_eq!(a.singular_values[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(a.eta_chi2, a.sigma2 * a.sigma2, epsilon = 1e-12);
        assert!(a.eta_chi2 > 0.0 && a.eta_chi2 <= 1.0 + 1e-12);
        assert!(a.beta_c_hat >= 1.0 - 1e-12);
        for w in a.singular_values.windows(2) {
            assert!(w[0] >= w[1] - 1e-14);
        }
    }

    #[test]
    fn transpose_symmetry_on_rectangular_joint() {
        let j = JointDistribution::from_rows(&[
            vec![0.4, 0.1, 0.0],
            vec![0.0, 0.3, 0.2],
        ])
        .unwrap();
        let (f, b) = symmetry_check(&j).unwrap();
        assert_abs_diff_eq!(f, b, epsilon = 1e-10);
    }

    #[test]
    fn permutation_invariance() {
        let j = fig1_joint();
        let base = eta_chi2(&j).unwrap().eta_chi2;
        // reverse the x-states
        let n = j.nx();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..j.ny()).map(|y| j.prob(n - 1 - i, y)).collect())
            .collect();
        let perm = JointDistribution::from_rows(&rows).unwrap();
        assert_abs_diff_eq!(eta_chi2(&perm).unwrap().eta_chi2, base, epsilon = 1e-10);
    }
}
