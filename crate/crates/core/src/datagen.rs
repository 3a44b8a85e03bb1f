//! Synthetic joint-distribution families: small categorical joints, binary
//! classification with class-conditional Gaussian/exponential/Poisson
//! sources, and noisy functional relationships y = f(x) + noise.
//!
//! Continuous conditionals are discretized by bin mass (CDF differences),
//! which keeps the joints exactly normalized and deterministic.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{IbError, Result};
use crate::prob::JointDistribution;
use crate::special::norm_cdf;

/// Allowed truncation loss before renormalization.
const COVERAGE_TOL: f64 = 1e-6;

/// Binary symmetric channel with uniform input and flip probability delta.
pub fn bsc_joint(delta: f64) -> Result<JointDistribution> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(IbError::InvalidParameter(format!(
            "flip probability {delta} outside [0, 1]"
        )));
    }
    JointDistribution::from_rows(&[
        vec![(1.0 - delta) / 2.0, delta / 2.0],
        vec![delta / 2.0, (1.0 - delta) / 2.0],
    ])
}

/// Class-conditional source family for binary classification.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ClassFamily {
    /// x | y_i ~ Normal(mu_i, sigma_i^2)
    Gaussian { mu: [f64; 2], sigma: [f64; 2] },
    /// x | y_i ~ Exponential(lambda_i)
    Exponential { lambda: [f64; 2] },
    /// x | y_i ~ Poisson(lambda_i), integer support
    Poisson { lambda: [f64; 2] },
}

/// Binary classification joint: p(y1) = p(y2) = 1/2 exactly, x discretized.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BinaryClassSpec {
    #[serde(flatten)]
    pub family: ClassFamily,
    /// Bin count for continuous families (ignored by Poisson).
    #[serde(default = "default_bins")]
    pub n_bins: usize,
    /// Explicit x-range; default is a mass-covering envelope per family.
    #[serde(default)]
    pub range: Option<(f64, f64)>,
}

fn default_bins() -> usize {
    256
}

/// p(x, y) = 1/2 p(x|y) with rows = x-states and two y-columns.
pub fn binary_classification_joint(spec: &BinaryClassSpec) -> Result<JointDistribution> {
    match &spec.family {
        ClassFamily::Gaussian { mu, sigma } => {
            if sigma.iter().any(|&s| s <= 0.0) {
                return Err(IbError::InvalidParameter("sigma must be > 0".into()));
            }
            let (lo, hi) = spec.range.unwrap_or_else(|| {
                let smax = sigma[0].max(sigma[1]);
                (
                    mu[0].min(mu[1]) - 6.0 * smax,
                    mu[0].max(mu[1]) + 6.0 * smax,
                )
            });
            let cdf = |class: usize, x: f64| norm_cdf((x - mu[class]) / sigma[class]);
            binned_binary_joint(spec.n_bins, lo, hi, cdf)
        }
        ClassFamily::Exponential { lambda } => {
            if lambda.iter().any(|&l| l <= 0.0) {
                return Err(IbError::InvalidParameter("lambda must be > 0".into()));
            }
            let (lo, hi) = spec.range.unwrap_or_else(|| {
                // quantile 1 - 1e-9 of the slower class
                let lmin = lambda[0].min(lambda[1]);
                (0.0, -(1e-9f64).ln() / lmin)
            });
            let cdf = |class: usize, x: f64| {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-lambda[class] * x).exp_m1()
                }
            };
            binned_binary_joint(spec.n_bins, lo, hi, cdf)
        }
        ClassFamily::Poisson { lambda } => {
            if lambda.iter().any(|&l| l <= 0.0) {
                return Err(IbError::InvalidParameter("lambda must be > 0".into()));
            }
            poisson_binary_joint(lambda)
        }
    }
}

fn binned_binary_joint(
    n_bins: usize,
    lo: f64,
    hi: f64,
    cdf: impl Fn(usize, f64) -> f64,
) -> Result<JointDistribution> {
    if n_bins < 2 || !(hi > lo) {
        return Err(IbError::InvalidParameter(
            "need n_bins >= 2 and a nonempty range".into(),
        ));
    }
    let width = (hi - lo) / n_bins as f64;
    for class in 0..2 {
        let coverage = cdf(class, hi) - cdf(class, lo);
        if coverage < 1.0 - COVERAGE_TOL {
            return Err(IbError::InvalidParameter(format!(
                "grid covers only {coverage} of the class-{class} mass (need >= {})",
                1.0 - COVERAGE_TOL
            )));
        }
    }
    let mut w = DMatrix::zeros(n_bins, 2);
    let mut centers = Vec::with_capacity(n_bins);
    for i in 0..n_bins {
        let a = lo + i as f64 * width;
        let b = a + width;
        centers.push(0.5 * (a + b));
        for class in 0..2 {
            w[(i, class)] = 0.5 * (cdf(class, b) - cdf(class, a)).max(0.0);
        }
    }
    let mut joint = JointDistribution::from_unnormalized(w)?;
    joint.x_grid = Some(crate::prob::GridInfo {
        centers,
        widths: vec![width; n_bins],
    });
    joint.y_labels = Some(vec!["y1".into(), "y2".into()]);
    Ok(joint)
}

fn poisson_binary_joint(lambda: &[f64; 2]) -> Result<JointDistribution> {
    // integer support up to cumulative coverage 1 - 1e-12 for both classes
    let mut pmf = [(-lambda[0]).exp(), (-lambda[1]).exp()];
    let mut cum = pmf;
    let mut rows: Vec<Vec<f64>> = vec![vec![0.5 * pmf[0], 0.5 * pmf[1]]];
    let mut k = 0usize;
    while cum[0] < 1.0 - 1e-12 || cum[1] < 1.0 - 1e-12 {
        k += 1;
        if k > 100_000 {
            return Err(IbError::InvalidParameter(
                "poisson support truncation did not converge".into(),
            ));
        }
        for c in 0..2 {
            pmf[c] *= lambda[c] / k as f64;
            cum[c] += pmf[c];
        }
        rows.push(vec![0.5 * pmf[0], 0.5 * pmf[1]]);
    }
    let n = rows.len();
    let w = DMatrix::from_fn(n, 2, |i, j| rows[i][j]);
    let mut joint = JointDistribution::from_unnormalized(w)?;
    joint.y_labels = Some(vec!["y1".into(), "y2".into()]);
    Ok(joint)
}

/// Named function presets for the noisy-relationship generator. Exact shapes:
///
/// - `Linear`: f(x) = x
/// - `Cubic`: f(x) = x^3 (cubic s-curve, flat around the origin)
/// - `Sigmoid`: f(x) = tanh(4x) / tanh(4) (steep, step-like)
/// - `Quadratic`: f(x) = 2x^2 - 1 (non-monotone)
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctionKind {
    Linear,
    Cubic,
    Sigmoid,
    Quadratic,
}

impl FunctionKind {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Self::Linear => x,
            Self::Cubic => x * x * x,
            Self::Sigmoid => (4.0 * x).tanh() / 4.0f64.tanh(),
            Self::Quadratic => 2.0 * x * x - 1.0,
        }
    }

    pub fn all() -> [FunctionKind; 4] {
        [Self::Linear, Self::Cubic, Self::Sigmoid, Self::Quadratic]
    }
}

impl std::str::FromStr for FunctionKind {
    type Err = IbError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "cubic" => Ok(Self::Cubic),
            "sigmoid" => Ok(Self::Sigmoid),
            "quadratic" => Ok(Self::Quadratic),
            _ => Err(IbError::InvalidParameter(format!(
                "unknown function '{s}' (expected linear|cubic|sigmoid|quadratic)"
            ))),
        }
    }
}

/// X ~ Unif(-1, 1), Y ~ f(X) + Normal(0, sigma^2), both axes binned.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoisyFunctionSpec {
    pub f: FunctionKind,
    pub sigma: f64,
    #[serde(default = "default_fn_bins")]
    pub n_x_bins: usize,
    #[serde(default = "default_fn_bins")]
    pub n_y_bins: usize,
    /// Default: [min f - 6 sigma, max f + 6 sigma].
    #[serde(default)]
    pub y_range: Option<(f64, f64)>,
}

fn default_fn_bins() -> usize {
    64
}

pub fn noisy_function_joint(spec: &NoisyFunctionSpec) -> Result<JointDistribution> {
    if spec.sigma <= 0.0 {
        return Err(IbError::InvalidParameter("sigma must be > 0".into()));
    }
    if spec.n_x_bins < 2 || spec.n_y_bins < 2 {
        return Err(IbError::InvalidParameter("need at least 2 bins per axis".into()));
    }
    let (y_lo, y_hi) = spec.y_range.unwrap_or_else(|| {
        // f is bounded within [-1, 1] for all presets on (-1, 1)
        (-1.0 - 6.0 * spec.sigma, 1.0 + 6.0 * spec.sigma)
    });
    let x_width = 2.0 / spec.n_x_bins as f64;
    let y_width = (y_hi - y_lo) / spec.n_y_bins as f64;
    let mut w = DMatrix::zeros(spec.n_x_bins, spec.n_y_bins);
    let mut x_centers = Vec::new();
    let mut y_centers: Vec<f64> = (0..spec.n_y_bins)
        .map(|j| y_lo + (j as f64 + 0.5) * y_width)
        .collect();
    for i in 0..spec.n_x_bins {
        let xc = -1.0 + (i as f64 + 0.5) * x_width;
        x_centers.push(xc);
        let fx = spec.f.eval(xc);
        let coverage = norm_cdf((y_hi - fx) / spec.sigma) - norm_cdf((y_lo - fx) / spec.sigma);
        if coverage < 1.0 - COVERAGE_TOL {
            return Err(IbError::InvalidParameter(format!(
                "y-range covers only {coverage} of the mass at x = {xc}"
            )));
        }
        for j in 0..spec.n_y_bins {
            let a = y_lo + j as f64 * y_width;
            let b = a + y_width;
            let mass = norm_cdf((b - fx) / spec.sigma) - norm_cdf((a - fx) / spec.sigma);
            w[(i, j)] = mass.max(0.0) / spec.n_x_bins as f64;
        }
    }
    let mut joint = JointDistribution::from_unnormalized(w)?;
    if joint.nx() == spec.n_x_bins && joint.ny() == spec.n_y_bins {
        joint.x_grid = Some(crate::prob::GridInfo {
            centers: x_centers,
            widths: vec![x_width; spec.n_x_bins],
        });
        joint.y_grid = Some(crate::prob::GridInfo {
            centers: std::mem::take(&mut y_centers),
            widths: vec![y_width; spec.n_y_bins],
        });
    }
    Ok(joint)
}

/// The fixed 8x8 categorical joint used as a stand-in benchmark distribution
/// (seeded log-normal weights, committed as a data file).
pub fn fig1_joint() -> JointDistribution {
    static CSV: &str = include_str!("../data/fig1_joint.csv");
    JointDistribution::from_csv(CSV).expect("committed joint data file is valid")
}
