//! Numerical toolkit for the discrete information bottleneck (IB) problem
//! and its learning onset.
//!
//! The crate bundles:
//!
//! - [`prob`]: exact finite-probability primitives (marginals, KL, mutual
//!   information, the divergence transition matrix);
//! - [`solver`]: the iterative IB solver with restarts and frontier sweeps;
//! - [`onset`]: the first-order theory of the learning onset (critical
//!   trade-off parameter beta_c, perturbative encoder r(x), contraction
//!   coefficient eta_KL = 1/beta_c) plus a brute-force supremum oracle;
//! - [`perturb`]: the second-order theory (curvature kappa, loss and
//!   information corrections, power-series evaluators);
//! - [`chi2`]: the chi-squared alternative (squared maximal correlation,
//!   fixed-representation-space onset);
//! - [`gaussian`]: the closed-form onset for joint Gaussian variables and a
//!   discretizer for cross-validation;
//! - [`datagen`]: synthetic joint-distribution families.

pub mod chi2;
pub mod datagen;
pub mod error;
pub mod gaussian;
pub mod onset;
pub mod perturb;
pub mod prob;
pub mod solver;
pub mod special;

pub use chi2::{chi2_information, eta_chi2, symmetry_check, Chi2Analysis};
pub use datagen::{
    binary_classification_joint, bsc_joint, fig1_joint, noisy_function_joint, BinaryClassSpec,
    ClassFamily, FunctionKind, NoisyFunctionSpec,
};
pub use error::{IbError, Result};
pub use gaussian::{discretize_gaussian, gaussian_kl_conditional, gaussian_onset, GaussianJoint};
pub use onset::{
    eta_kl, eta_kl_bruteforce, kl_ratio, solve_onset, OnsetConfig, OnsetSolution,
};
pub use perturb::{
    hessian_kernel, info_series_eval, kappa, loss_series_eval, optimal_series, predict, InfoSide,
    PerturbationPrediction, SeriesEncoder,
};
pub use prob::{
    encoder_informations, kl_divergence, Distribution, Encoder, JointDistribution,
};
pub use solver::{
    frontier_sweep, solve_ib, solve_ib_from, solve_ib_restarts, FrontierPoint, IbSolution,
    SolverConfig,
};
