//! Second-order theory of the learning onset: the Hessian kernel K(x, x'),
//! the curvature scalar kappa, the predicted leading corrections (L2 and the
//! first-order informations), and power-series evaluators for the mutual
//! information of a perturbed encoder.

use nalgebra::DMatrix;
use serde_json::json;

use crate::error::{IbError, Result};
use crate::onset::OnsetSolution;
use crate::prob::{kl_nats, Encoder, JointDistribution, LN_2, ZERO_TOL};

/// Complete second-order characterization of the onset.
#[derive(Debug, Clone)]
pub struct PerturbationPrediction {
    pub beta_c: f64,
    pub kappa: f64,
    /// sum over z in Z1 of q1*(z) = KL[r_y||p_y] / kappa (nat-scale KL).
    pub sum_q1_z1: f64,
    /// L2 in bits; always <= 0.
    pub l2: f64,
    /// First-order growth of I(Z;X) in bits per unit of beta - beta_c.
    pub i1_zx: f64,
    /// First-order growth of I(Z;Y) in bits per unit of beta - beta_c.
    pub i1_zy: f64,
}

impl PerturbationPrediction {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&json!({
            "beta_c": self.beta_c,
            "kappa": self.kappa,
            "sum_q1_z1": self.sum_q1_z1,
            "l2_bits": self.l2,
            "i1_zx_bits": self.i1_zx,
            "i1_zy_bits": self.i1_zy,
        }))
        .expect("prediction serialization cannot fail")
    }
}

/// K(x, x') = delta(x,x') p(x) + (beta_c - 1) p(x) p(x')
///          - beta_c sum_y p(y) p(x|y) p(x'|y).
/// Symmetric with zero row sums.
pub fn hessian_kernel(joint: &JointDistribution, beta_c: f64) -> Result<DMatrix<f64>> {
    if !(beta_c > 0.0) {
        return Err(IbError::InvalidParameter(format!(
            "beta_c = {beta_c} must be positive"
        )));
    }
    let (px, py) = joint.marginals();
    let pxy = joint.conditional_x_given_y();
    let nx = joint.nx();
    let ny = joint.ny();
    let mut k = DMatrix::zeros(nx, nx);
    for a in 0..nx {
        for b in 0..nx {
            let mut chan = 0.0;
            for y in 0..ny {
                chan += py[y] * pxy[(a, y)] * pxy[(b, y)];
            }
            k[(a, b)] = (beta_c - 1.0) * px[a] * px[b] - beta_c * chan;
            if a == b {
                k[(a, b)] += px[a];
            }
        }
    }
    Ok(k)
}

/// kappa = sum_{x,x'} r(x) K(x,x') r(x') / (p(x) p(x')).
pub fn kappa(joint: &JointDistribution, onset: &OnsetSolution) -> Result<f64> {
    let k = hessian_kernel(joint, onset.beta_c)?;
    let (px, _) = joint.marginals();
    if onset.r_x.len() != joint.nx() {
        return Err(IbError::DimensionMismatch(
            "onset solution does not match the joint".into(),
        ));
    }
    let ratio: Vec<f64> = onset
        .r_x
        .as_slice()
        .iter()
        .zip(px.as_slice())
        .map(|(r, p)| r / p)
        .collect();
    let mut s = 0.0;
    for a in 0..joint.nx() {
        for b in 0..joint.nx() {
            s += ratio[a] * k[(a, b)] * ratio[b];
        }
    }
    Ok(s)
}

/// Evaluate the full second-order prediction. Fails with a typed error when
/// kappa <= 0 (higher-order theory would be required to fix the scale).
pub fn predict(joint: &JointDistribution, onset: &OnsetSolution) -> Result<PerturbationPrediction> {
    let kap = kappa(joint, onset)?;
    if kap <= 0.0 {
        return Err(IbError::HigherOrderRequired { kappa: kap });
    }
    let (px, py) = joint.marginals();
    let kl_x = kl_nats(onset.r_x.as_slice(), px.as_slice());
    let kl_y = kl_nats(onset.r_y.as_slice(), py.as_slice());
    Ok(PerturbationPrediction {
        beta_c: onset.beta_c,
        kappa: kap,
        sum_q1_z1: kl_y / kap,
        l2: -kl_y * kl_y / (2.0 * kap) / LN_2,
        i1_zx: kl_x * kl_y / kap / LN_2,
        i1_zy: kl_y * kl_y / kap / LN_2,
    })
}

/// Which side of the Markov chain an information series refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfoSide {
    X,
    Y,
}

/// A perturbed encoder q0(z) + eps q1(z|x) + eps^2 q2(z|x) together with the
/// support partition (Z0, Z1, Z2) of the representation letters by the order
/// at which they first gain probability mass.
#[derive(Debug, Clone)]
pub struct SeriesEncoder {
    q0: Vec<f64>,
    q1: DMatrix<f64>,
    q2: DMatrix<f64>,
    /// marginals q_n(z) = sum_x p(x) q_n(z|x)
    q1_z: Vec<f64>,
    q2_z: Vec<f64>,
    z0: Vec<usize>,
    z1: Vec<usize>,
    z2: Vec<usize>,
}

impl SeriesEncoder {
    /// Validates normalization and support structure against the joint's
    /// p(x) and derives the partition.
    pub fn new(
        q0: Vec<f64>,
        q1: DMatrix<f64>,
        q2: DMatrix<f64>,
        joint: &JointDistribution,
    ) -> Result<Self> {
        let nz = q0.len();
        let nx = joint.nx();
        if q1.nrows() != nz || q2.nrows() != nz || q1.ncols() != nx || q2.ncols() != nx {
            return Err(IbError::DimensionMismatch(format!(
                "series shapes: q0 has {nz} letters, q1 is {}x{}, q2 is {}x{}, |X| = {nx}",
                q1.nrows(),
                q1.ncols(),
                q2.nrows(),
                q2.ncols()
            )));
        }
        let s0: f64 = q0.iter().sum();
        if q0.iter().any(|&v| v < 0.0) || (s0 - 1.0).abs() > 1e-10 {
            return Err(IbError::InvalidDistribution(format!(
                "q0 must be a distribution over Z (sum = {s0})"
            )));
        }
        for x in 0..nx {
            for (name, q) in [("q1", &q1), ("q2", &q2)] {
                let s: f64 = q.column(x).iter().sum();
                if s.abs() > 1e-10 {
                    return Err(IbError::InvalidDistribution(format!(
                        "{name} column {x} sums to {s}, expected 0"
                    )));
                }
            }
        }
        let (px, _) = joint.marginals();
        let marginal = |q: &DMatrix<f64>| -> Vec<f64> {
            (0..nz)
                .map(|z| (0..nx).map(|x| q[(z, x)] * px[x]).sum())
                .collect()
        };
        let q1_z = marginal(&q1);
        let q2_z = marginal(&q2);
        let mut z0 = Vec::new();
        let mut z1 = Vec::new();
        let mut z2 = Vec::new();
        for z in 0..nz {
            if q0[z] > 0.0 {
                z0.push(z);
            } else if q1_z[z] > ZERO_TOL {
                z1.push(z);
            } else if q2_z[z] > ZERO_TOL {
                z2.push(z);
            }
        }
        // off Z0 the leading correction must be nonnegative, and a letter in
        // Z2 (or outside the partition) must carry no first-order mass
        for &z in z1.iter().chain(&z2) {
            for x in 0..nx {
                if z2.contains(&z) || q1_z[z] <= ZERO_TOL {
                    if q1[(z, x)].abs() > ZERO_TOL {
                        return Err(IbError::InvalidDistribution(format!(
                            "letter {z} first appears at second order but q1({z}|{x}) != 0"
                        )));
                    }
                    if q2[(z, x)] < -ZERO_TOL {
                        return Err(IbError::InvalidDistribution(format!(
                            "q2({z}|{x}) < 0 on a letter outside support(q0 + eps q1)"
                        )));
                    }
                } else {
                    if q1[(z, x)] < -ZERO_TOL {
                        return Err(IbError::InvalidDistribution(format!(
                            "q1({z}|{x}) < 0 on a letter outside support(q0)"
                        )));
                    }
                    if q1[(z, x)] <= ZERO_TOL && q2[(z, x)].abs() > ZERO_TOL {
                        return Err(IbError::InvalidDistribution(format!(
                            "q2({z}|{x}) != 0 where q1({z}|{x}) = 0 on a first-order letter"
                        )));
                    }
                }
            }
        }
        Ok(Self {
            q0,
            q1,
            q2,
            q1_z,
            q2_z,
            z0,
            z1,
            z2,
        })
    }

    pub fn n_z(&self) -> usize {
        self.q0.len()
    }

    pub fn partition(&self) -> (&[usize], &[usize], &[usize]) {
        (&self.z0, &self.z1, &self.z2)
    }

    pub fn q1(&self) -> &DMatrix<f64> {
        &self.q1
    }

    /// The encoder q0 + eps q1 + eps^2 q2; fails if any entry falls below
    /// -1e-12 at this eps.
    pub fn encoder_at(&self, eps: f64) -> Result<Encoder> {
        let nx = self.q1.ncols();
        let q = DMatrix::from_fn(self.n_z(), nx, |z, x| {
            self.q0[z] + eps * self.q1[(z, x)] + eps * eps * self.q2[(z, x)]
        });
        if q.iter().any(|&v| v < -1e-12) {
            return Err(IbError::InvalidParameter(format!(
                "eps = {eps} leaves the valid encoder range"
            )));
        }
        Encoder::new(q.map(|v| v.max(0.0)))
    }
}

/// (I1, I2) in bits for one side of the information series.
pub fn info_series_eval(
    se: &SeriesEncoder,
    joint: &JointDistribution,
    side: InfoSide,
) -> Result<(f64, f64)> {
    let (px, py) = joint.marginals();
    let (weights, q1m, q2m) = match side {
        InfoSide::X => (px.as_slice().to_vec(), se.q1.clone(), se.q2.clone()),
        InfoSide::Y => {
            // q_n(z|y) = sum_x q_n(z|x) p(x|y)
            let pxy = joint.conditional_x_given_y();
            let push = |q: &DMatrix<f64>| -> DMatrix<f64> {
                DMatrix::from_fn(se.n_z(), joint.ny(), |z, y| {
                    (0..joint.nx()).map(|x| q[(z, x)] * pxy[(x, y)]).sum()
                })
            };
            (py.as_slice().to_vec(), push(&se.q1), push(&se.q2))
        }
    };
    let na = weights.len();
    let mut i1 = 0.0;
    let mut i2 = 0.0;
    for (a, &wa) in weights.iter().enumerate().take(na) {
        for &z in &se.z0 {
            let d = q1m[(z, a)] - se.q1_z[z];
            i2 += wa * d * d / (2.0 * se.q0[z]);
        }
        for &z in &se.z1 {
            let q1za = q1m[(z, a)];
            if q1za <= 0.0 {
                if q2m[(z, a)].abs() > ZERO_TOL {
                    return Err(IbError::InvalidDistribution(format!(
                        "malformed partition: q1({z}|a={a}) = 0 but q2({z}|a={a}) != 0"
                    )));
                }
                continue;
            }
            let lg = (q1za / se.q1_z[z]).ln();
            i1 += wa * q1za * lg;
            i2 += wa * q2m[(z, a)] * lg;
        }
        for &z in &se.z2 {
            let q2za = q2m[(z, a)];
            if q2za > 0.0 {
                i2 += wa * q2za * (q2za / se.q2_z[z]).ln();
            }
        }
    }
    Ok((i1 / LN_2, i2 / LN_2))
}

/// (L1, L2) in bits via the information series on both sides:
/// L1 = I1_X - beta_c I1_Y, L2 = I2_X - beta_c I2_Y - I1_Y.
pub fn loss_series_eval(
    se: &SeriesEncoder,
    joint: &JointDistribution,
    beta_c: f64,
) -> Result<(f64, f64)> {
    let (i1x, i2x) = info_series_eval(se, joint, InfoSide::X)?;
    let (i1y, i2y) = info_series_eval(se, joint, InfoSide::Y)?;
    Ok((i1x - beta_c * i1y, i2x - beta_c * i2y - i1y))
}

/// The optimal first-order series implied by an onset solution: one letter
/// in Z1 carrying q1(z1|x) = s r(x)/p(x) with s = KL[r_y||p_y]/kappa, and a
/// compensating -q0(z) s r(x)/p(x) on the Z0 letters. q2 = 0.
pub fn optimal_series(
    joint: &JointDistribution,
    onset: &OnsetSolution,
    q0: &[f64],
) -> Result<SeriesEncoder> {
    let pred = predict(joint, onset)?;
    let s = pred.sum_q1_z1;
    let (px, _) = joint.marginals();
    let nx = joint.nx();
    let n0 = q0.len();
    let nz = n0 + 1;
    let mut q0_full = q0.to_vec();
    q0_full.push(0.0);
    let q1 = DMatrix::from_fn(nz, nx, |z, x| {
        let dir = s * onset.r_x.as_slice()[x] / px[x];
        if z == n0 {
            dir
        } else {
            -q0[z] * dir
        }
    });
    let q2 = DMatrix::zeros(nz, nx);
    SeriesEncoder::new(q0_full, q1, q2, joint)
}
