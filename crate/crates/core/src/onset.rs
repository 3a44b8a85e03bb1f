//! First-order theory of the learning onset: the fixed-point iteration for
//! the perturbative encoder r(x) and critical trade-off parameter beta_c,
//! the KL contraction coefficient eta_KL = 1/beta_c, and a brute-force
//! supremum oracle over the probability simplex.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::error::{IbError, Result};
use crate::prob::{kl_dev_nats, kl_nats, Distribution, JointDistribution};

/// Mutual informations at or below this (in bits) count as independence.
pub const MI_THRESHOLD: f64 = 1e-10;

const BETA_MIN: f64 = 1.0;
const BETA_MAX: f64 = 1e6;

/// Solver knobs for [`solve_onset`].
#[derive(Debug, Clone)]
pub struct OnsetConfig {
    /// Joint convergence tolerance: max(sup-norm change of r, change of beta_c).
    pub tol: f64,
    /// Minimum L1 distance of r from p(x) for a solution to count as nontrivial.
    pub detect_eps: f64,
    /// Cap on random restarts of the outer loop.
    pub max_restarts: usize,
    /// Iteration cap per restart. Channels where the supremum is approached
    /// only in the limit r -> p (e.g. doubly symmetric binary sources) creep
    /// algebraically and need large caps for tight tolerances.
    pub max_iter: u64,
    pub seed: u64,
}

impl Default for OnsetConfig {
    fn default() -> Self {
        Self {
            tol: 1e-11,
            detect_eps: 1e-4,
            max_restarts: 32,
            max_iter: 2_000_000,
            seed: 0,
        }
    }
}

/// Output of the first-order theory.
#[derive(Debug, Clone)]
pub struct OnsetSolution {
    pub beta_c: f64,
    pub r_x: Distribution,
    pub r_y: Distribution,
    /// Always exactly 1 / beta_c.
    pub eta_kl: f64,
    pub restarts_used: usize,
    pub converged: bool,
}

impl OnsetSolution {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&json!({
            "beta_c": self.beta_c,
            "eta_kl": self.eta_kl,
            "r_x": self.r_x.as_slice(),
            "r_y": self.r_y.as_slice(),
            "converged": self.converged,
            "restarts_used": self.restarts_used,
        }))
        .expect("onset serialization cannot fail")
    }
}

/// Precomputed channel quantities shared by the fixed-point iteration.
struct Channel {
    nx: usize,
    ny: usize,
    px: Vec<f64>,
    ln_px: Vec<f64>,
    ln_py: Vec<f64>,
    /// w[x][y] = p(y|x)
    w: Vec<Vec<f64>>,
    /// kl_py[x] = KL[p(y|x) || p(y)] in nats
    kl_py: Vec<f64>,
    /// neg_h_w[x] = sum_y p(y|x) ln p(y|x)
    neg_h_w: Vec<f64>,
}

impl Channel {
    fn new(joint: &JointDistribution) -> Self {
        let (px, py) = joint.marginals();
        let cond = joint.conditional_y_given_x();
        let nx = joint.nx();
        let ny = joint.ny();
        let w: Vec<Vec<f64>> = (0..nx)
            .map(|x| (0..ny).map(|y| cond[(x, y)]).collect())
            .collect();
        let neg_h_w: Vec<f64> = w
            .iter()
            .map(|row| {
                row.iter()
                    .filter(|&&v| v > 0.0)
                    .map(|&v| v * v.ln())
                    .sum()
            })
            .collect();
        let kl_py: Vec<f64> = (0..nx)
            .map(|x| kl_nats(&w[x], py.as_slice()))
            .collect();
        Self {
            nx,
            ny,
            ln_px: px.as_slice().iter().map(|&v| v.ln()).collect(),
            ln_py: py.as_slice().iter().map(|&v| v.ln()).collect(),
            px: px.as_slice().to_vec(),
            w,
            kl_py,
            neg_h_w,
        }
    }

    fn push_forward(&self, r: &[f64]) -> Vec<f64> {
        let mut ry = vec![0.0; self.ny];
        for x in 0..self.nx {
            let rx = r[x];
            for y in 0..self.ny {
                ry[y] += self.w[x][y] * rx;
            }
        }
        ry
    }
}

struct Candidate {
    beta_c: f64,
    r: Vec<f64>,
    ry: Vec<f64>,
    converged: bool,
}

/// One run of the inner loop of Algorithm 2 from a given start.
fn onset_fixed_point(ch: &Channel, mut r: Vec<f64>, cfg: &OnsetConfig) -> Option<Candidate> {
    let mut beta_prev = f64::NAN;
    let mut ln_ry = vec![0.0; ch.ny];
    let mut damping = 1.0;
    let mut growth_streak = 0u32;
    let mut delta_prev = f64::INFINITY;
    let mut converged = false;
    let mut beta = f64::NAN;

    for _ in 0..cfg.max_iter {
        // normalize r(x)
        let sum: f64 = r.iter().sum();
        if !sum.is_finite() || sum <= 0.0 {
            return None;
        }
        for v in r.iter_mut() {
            *v /= sum;
            *v = v.max(1e-300);
        }

        // r(y) <- sum_x p(y|x) r(x)
        let ry = ch.push_forward(&r);

        // beta_c <- KL[r||p_x] / KL[r_y||p_y]
        let mut kl_rx = 0.0;
        for x in 0..ch.nx {
            kl_rx += r[x] * (r[x].ln() - ch.ln_px[x]);
        }
        let mut kl_ry = 0.0;
        for y in 0..ch.ny {
            ln_ry[y] = ry[y].max(1e-300).ln();
            kl_ry += ry[y] * (ln_ry[y] - ch.ln_py[y]);
        }
        if kl_ry <= 0.0 || kl_rx <= 0.0 {
            return None; // collapsed onto p
        }
        beta = (kl_rx / kl_ry).clamp(BETA_MIN, BETA_MAX);

        // r(x) <- p(x) exp{-beta (KL[p(y|x)||r_y] - KL[p(y|x)||p_y])}
        let mut delta: f64 = if beta_prev.is_finite() {
            (beta - beta_prev).abs()
        } else {
            f64::INFINITY
        };
        for x in 0..ch.nx {
            let mut kl_ry_x = ch.neg_h_w[x];
            for y in 0..ch.ny {
                if ch.w[x][y] > 0.0 {
                    kl_ry_x -= ch.w[x][y] * ln_ry[y];
                }
            }
            let exponent = (-beta * (kl_ry_x - ch.kl_py[x])).clamp(-700.0, 700.0);
            let next = ch.px[x] * exponent.exp();
            let relaxed = (1.0 - damping) * r[x] + damping * next;
            delta = delta.max((relaxed - r[x]).abs());
            r[x] = relaxed;
        }
        beta_prev = beta;

        if delta < cfg.tol {
            converged = true;
            break;
        }
        // crude oscillation guard: sustained growth of the step switches to
        // half-step relaxation
        if delta > delta_prev {
            growth_streak += 1;
            if growth_streak >= 16 {
                damping = 0.5;
            }
        } else {
            growth_streak = 0;
        }
        delta_prev = delta;
    }

    let sum: f64 = r.iter().sum();
    for v in r.iter_mut() {
        *v /= sum;
    }
    let ry = ch.push_forward(&r);
    Some(Candidate {
        beta_c: beta,
        r,
        ry,
        converged,
    })
}

/// Algorithm 2 with random restarts. Returns the nontrivial fixed point with
/// the smallest beta_c found (the contraction coefficient is a supremum of
/// the KL ratio, i.e. an infimum over beta_c).
pub fn solve_onset(joint: &JointDistribution, cfg: &OnsetConfig) -> Result<OnsetSolution> {
    if joint.mutual_information() <= MI_THRESHOLD {
        return Err(IbError::NoOnset {
            mi_threshold: MI_THRESHOLD,
        });
    }
    if cfg.tol <= 0.0 || cfg.detect_eps <= 0.0 {
        return Err(IbError::InvalidParameter(
            "tol and detect_eps must be positive".into(),
        ));
    }
    let ch = Channel::new(joint);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<Candidate> = None;
    let mut restarts_used = 0;
    let mut collapsed = 0;

    for _ in 0..cfg.max_restarts.max(1) {
        restarts_used += 1;
        // r(x) proportional to p(x) exp(g), g i.i.d. standard normal: keeps
        // the support of p while randomizing the direction
        let init: Vec<f64> = ch
            .px
            .iter()
            .map(|&p| p * gauss(&mut rng).exp())
            .collect();
        match onset_fixed_point(&ch, init, cfg) {
            Some(c) => {
                let l1: f64 = c
                    .r
                    .iter()
                    .zip(&ch.px)
                    .map(|(a, b)| (a - b).abs())
                    .sum();
                if l1 <= cfg.detect_eps {
                    collapsed += 1;
                    continue;
                }
                let better = match &best {
                    None => true,
                    Some(b) => {
                        (c.converged && !b.converged) || (c.converged == b.converged && c.beta_c < b.beta_c)
                    }
                };
                if better {
                    best = Some(c);
                }
            }
            None => collapsed += 1,
        }
    }

    match best {
        Some(c) => Ok(OnsetSolution {
            beta_c: c.beta_c,
            eta_kl: 1.0 / c.beta_c,
            r_x: Distribution::from_unnormalized(&c.r)?,
            r_y: Distribution::from_unnormalized(&c.ry)?,
            restarts_used,
            converged: c.converged,
        }),
        None => Err(IbError::ConvergenceFailure {
            detail: format!(
                "all {restarts_used} restarts collapsed onto r = p ({collapsed} collapses); \
                 the joint may be too close to independence"
            ),
        }),
    }
}

fn gauss<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller; two uniforms per call is fine at this call rate
    let u1: f64 = rng.random::<f64>().max(1e-16);
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// eta_KL(X -> Y) = 1 / beta_c.
pub fn eta_kl(joint: &JointDistribution, cfg: &OnsetConfig) -> Result<f64> {
    Ok(solve_onset(joint, cfg)?.eta_kl)
}

/// KL[f_y || p_y] / KL[f_x || p_x] with f_y pushed through the channel.
/// Evaluated in deviation form, which stays accurate for f near p.
pub fn kl_ratio(f: &Distribution, joint: &JointDistribution) -> Result<f64> {
    let (px, py) = joint.marginals();
    if f.len() != px.len() {
        return Err(IbError::DimensionMismatch(format!(
            "f has {} states, p(x) has {}",
            f.len(),
            px.len()
        )));
    }
    let dev: Vec<f64> = f
        .as_slice()
        .iter()
        .zip(px.as_slice())
        .map(|(a, b)| a - b)
        .collect();
    let kl_x = kl_dev_nats(px.as_slice(), &dev);
    if kl_x.is_infinite() {
        return Err(IbError::InvalidParameter(
            "support(f) not contained in support(p_x)".into(),
        ));
    }
    if kl_x <= 0.0 {
        return Err(IbError::InvalidParameter(
            "f = p_x: the KL ratio is 0/0".into(),
        ));
    }
    let cond = joint.conditional_y_given_x();
    let mut dev_y = vec![0.0; py.len()];
    for x in 0..px.len() {
        for y in 0..py.len() {
            dev_y[y] += cond[(x, y)] * dev[x];
        }
    }
    Ok(kl_dev_nats(py.as_slice(), &dev_y) / kl_x)
}

/// Largest alphabet accepted by the brute-force supremum search.
pub const BRUTEFORCE_MAX_STATES: usize = 4;

/// Brute-force lower bound on eta_KL: a simplex lattice scan at the given
/// resolution followed by pattern-search refinement around the maximizer.
pub fn eta_kl_bruteforce(joint: &JointDistribution, resolution: usize) -> Result<f64> {
    let nx = joint.nx();
    if nx > BRUTEFORCE_MAX_STATES {
        return Err(IbError::AlphabetTooLarge {
            n: nx,
            max: BRUTEFORCE_MAX_STATES,
        });
    }
    if resolution < 2 {
        return Err(IbError::InvalidParameter(
            "resolution must be at least 2".into(),
        ));
    }
    let (px, py) = joint.marginals();
    let cond = joint.conditional_y_given_x();
    let w: Vec<Vec<f64>> = (0..nx)
        .map(|x| (0..joint.ny()).map(|y| cond[(x, y)]).collect())
        .collect();

    let ratio = |f: &[f64]| -> Option<f64> {
        let mut dev: Vec<f64> = f.iter().zip(px.as_slice()).map(|(a, b)| a - b).collect();
        // project out the net-mass rounding residue (~1e-16 for non-dyadic
        // grids): left in, it enters both KLs at first order and drives the
        // ratio to 1 once the quadratic parts fall below it
        let leak: f64 = dev.iter().sum::<f64>() / nx as f64;
        dev.iter_mut().for_each(|d| *d -= leak);
        let kl_x = kl_dev_nats(px.as_slice(), &dev);
        // below ~1e-16 the KL is dominated by the cancellation of the
        // first-order terms and the ratio of two such values is noise;
        // keep the search out of that region (|dev| >~ 1e-8, which costs
        // only O(1e-8) of ratio when the supremum sits at r = p)
        if !kl_x.is_finite() || kl_x <= 1e-16 {
            return None;
        }
        let mut dev_y = vec![0.0; py.len()];
        for x in 0..nx {
            for (y, dy) in dev_y.iter_mut().enumerate() {
                *dy += w[x][y] * dev[x];
            }
        }
        Some(kl_dev_nats(py.as_slice(), &dev_y) / kl_x)
    };

    // lattice scan
    let mut best_f: Vec<f64> = px.as_slice().to_vec();
    let mut best = 0.0f64;
    let m = resolution;
    let mut counts = vec![0usize; nx];
    scan_compositions(&mut counts, 0, m, &mut |c| {
        let f: Vec<f64> = c.iter().map(|&k| k as f64 / m as f64).collect();
        if let Some(v) = ratio(&f) {
            if v > best {
                best = v;
                best_f = f;
            }
        }
    });

    // pattern search: move mass delta from state j to state i, halving delta
    let mut delta = 1.0 / m as f64;
    let mut f = best_f;
    while delta > 1e-8 {
        let mut improved = false;
        for i in 0..nx {
            for j in 0..nx {
                if i == j || f[j] < delta {
                    continue;
                }
                let mut g = f.clone();
                g[i] += delta;
                g[j] -= delta;
                if let Some(v) = ratio(&g) {
                    if v > best {
                        best = v;
                        f = g;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            delta *= 0.5;
        }
    }
    Ok(best)
}

fn scan_compositions(
    counts: &mut Vec<usize>,
    idx: usize,
    remaining: usize,
    visit: &mut impl FnMut(&[usize]),
) {
    if idx == counts.len() - 1 {
        counts[idx] = remaining;
        visit(counts);
        return;
    }
    for k in 0..=remaining {
        counts[idx] = k;
        scan_compositions(counts, idx + 1, remaining - k, visit);
    }
}
