//! Exact finite-probability primitives: marginals, conditionals, entropies,
//! divergences, mutual information and the divergence transition matrix.
//!
//! All internal computation is in natural log; information values are
//! converted to bits at the public API boundary.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{IbError, Result};

/// Probabilities below this are treated as exact zeros before any support
/// computation, avoiding log-of-epsilon noise.
pub const ZERO_TOL: f64 = 1e-15;

/// Normalization slack accepted at construction.
pub const SUM_TOL: f64 = 1e-12;

pub(crate) const LN_2: f64 = std::f64::consts::LN_2;

/// A probability distribution on a finite alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    p: Vec<f64>,
}

impl Distribution {
    pub fn new(mut p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(IbError::InvalidDistribution("empty alphabet".into()));
        }
        for v in &mut p {
            if !v.is_finite() || *v < 0.0 {
                return Err(IbError::InvalidDistribution(format!(
                    "entry {v} is negative or non-finite"
                )));
            }
            if *v < ZERO_TOL {
                *v = 0.0;
            }
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(IbError::InvalidDistribution(format!(
                "sum = {sum}, expected 1 within {SUM_TOL:e}"
            )));
        }
        Ok(Self { p })
    }

    /// Normalize a nonnegative weight vector into a distribution.
    pub fn from_unnormalized(w: &[f64]) -> Result<Self> {
        let sum: f64 = w.iter().sum();
        if !sum.is_finite() || sum <= 0.0 {
            return Err(IbError::InvalidDistribution(format!(
                "weights sum to {sum}"
            )));
        }
        Self::new(w.iter().map(|v| v / sum).collect())
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            p: vec![1.0 / n as f64; n],
        }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    /// L1 distance to another distribution.
    pub fn l1_distance(&self, other: &Distribution) -> f64 {
        self.p
            .iter()
            .zip(&other.p)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    /// Shannon entropy in bits.
    pub fn entropy(&self) -> f64 {
        entropy_nats(&self.p) / LN_2
    }
}

impl std::ops::Index<usize> for Distribution {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.p[i]
    }
}

pub(crate) fn entropy_nats(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.ln())
        .sum::<f64>()
}

/// KL divergence in nats. Returns +inf when support(p) is not contained in
/// support(q); this is the divergence-infinite signal, not an error.
pub(crate) fn kl_nats(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let mut s = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return f64::INFINITY;
            }
            s += pi * (pi / qi).ln();
        }
    }
    s.max(0.0)
}

/// KL(p + dev || p) in nats for a perturbation `dev` with sum 0, evaluated in
/// a cancellation-safe form: sum (p + dev) ln1p(dev / p). Entries with p = 0
/// require dev = 0 (else +inf).
pub(crate) fn kl_dev_nats(p: &[f64], dev: &[f64]) -> f64 {
    let mut s = 0.0;
    for (&pi, &di) in p.iter().zip(dev) {
        let fi = pi + di;
        if fi <= 0.0 {
            continue;
        }
        if pi <= 0.0 {
            return f64::INFINITY;
        }
        s += fi * (di / pi).ln_1p();
    }
    s.max(0.0)
}

/// KL divergence in bits; +inf on support violation.
pub fn kl_divergence(p: &Distribution, q: &Distribution) -> Result<f64> {
    if p.len() != q.len() {
        return Err(IbError::DimensionMismatch(format!(
            "KL of alphabets {} vs {}",
            p.len(),
            q.len()
        )));
    }
    Ok(kl_nats(p.as_slice(), q.as_slice()) / LN_2)
}

/// Optional regular-grid metadata attached to a discretized axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub centers: Vec<f64>,
    pub widths: Vec<f64>,
}

/// A finite joint distribution p(x, y). States with zero marginal are
/// stripped at construction, so every row and column carries mass.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    p: DMatrix<f64>,
    pub x_labels: Option<Vec<String>>,
    pub y_labels: Option<Vec<String>>,
    pub x_grid: Option<GridInfo>,
    pub y_grid: Option<GridInfo>,
}

impl JointDistribution {
    pub fn new(mut p: DMatrix<f64>) -> Result<Self> {
        if p.nrows() == 0 || p.ncols() == 0 {
            return Err(IbError::InvalidDistribution("empty joint".into()));
        }
        for v in p.iter_mut() {
            if !v.is_finite() || *v < 0.0 {
                return Err(IbError::InvalidDistribution(format!(
                    "joint entry {v} is negative or non-finite"
                )));
            }
            if *v < ZERO_TOL {
                *v = 0.0;
            }
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(IbError::InvalidDistribution(format!(
                "joint sums to {sum}, expected 1 within {SUM_TOL:e}"
            )));
        }
        let keep_x: Vec<usize> = (0..p.nrows())
            .filter(|&i| p.row(i).iter().sum::<f64>() > 0.0)
            .collect();
        let keep_y: Vec<usize> = (0..p.ncols())
            .filter(|&j| p.column(j).iter().sum::<f64>() > 0.0)
            .collect();
        if keep_x.is_empty() || keep_y.is_empty() {
            return Err(IbError::InvalidDistribution("all-zero joint".into()));
        }
        if keep_x.len() < p.nrows() || keep_y.len() < p.ncols() {
            p = DMatrix::from_fn(keep_x.len(), keep_y.len(), |i, j| {
                p[(keep_x[i], keep_y[j])]
            });
        }
        Ok(Self {
            p,
            x_labels: None,
            y_labels: None,
            x_grid: None,
            y_grid: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nx = rows.len();
        let ny = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != ny) {
            return Err(IbError::InvalidDistribution("ragged joint matrix".into()));
        }
        Self::new(DMatrix::from_fn(nx, ny, |i, j| rows[i][j]))
    }

    pub fn from_unnormalized(w: DMatrix<f64>) -> Result<Self> {
        let sum: f64 = w.iter().sum();
        if !sum.is_finite() || sum <= 0.0 {
            return Err(IbError::InvalidDistribution(format!(
                "joint weights sum to {sum}"
            )));
        }
        Self::new(w / sum)
    }

    pub fn nx(&self) -> usize {
        self.p.nrows()
    }

    pub fn ny(&self) -> usize {
        self.p.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.p[(x, y)]
    }

    /// (p(x), p(y)).
    pub fn marginals(&self) -> (Distribution, Distribution) {
        let px: Vec<f64> = (0..self.nx())
            .map(|i| self.p.row(i).iter().sum())
            .collect();
        let py: Vec<f64> = (0..self.ny())
            .map(|j| self.p.column(j).iter().sum())
            .collect();
        (Distribution { p: px }, Distribution { p: py })
    }

    /// Row-stochastic |X| x |Y| matrix with entry (x, y) = p(y|x).
    pub fn conditional_y_given_x(&self) -> DMatrix<f64> {
        let (px, _) = self.marginals();
        DMatrix::from_fn(self.nx(), self.ny(), |i, j| self.p[(i, j)] / px[i])
    }

    /// Column-stochastic |X| x |Y| matrix with entry (x, y) = p(x|y).
    pub fn conditional_x_given_y(&self) -> DMatrix<f64> {
        let (_, py) = self.marginals();
        DMatrix::from_fn(self.nx(), self.ny(), |i, j| self.p[(i, j)] / py[j])
    }

    /// I(X;Y) in bits.
    pub fn mutual_information(&self) -> f64 {
        let (px, py) = self.marginals();
        let mut s = 0.0;
        for i in 0..self.nx() {
            for j in 0..self.ny() {
                let v = self.p[(i, j)];
                if v > 0.0 {
                    s += v * (v / (px[i] * py[j])).ln();
                }
            }
        }
        (s / LN_2).max(0.0)
    }

    /// B(x, y) = p(x, y) / sqrt(p(x) p(y)), zero off the support.
    pub fn divergence_transition_matrix(&self) -> DMatrix<f64> {
        let (px, py) = self.marginals();
        DMatrix::from_fn(self.nx(), self.ny(), |i, j| {
            let v = self.p[(i, j)];
            if v > 0.0 {
                v / (px[i] * py[j]).sqrt()
            } else {
                0.0
            }
        })
    }

    /// The joint with the roles of X and Y swapped.
    pub fn transposed(&self) -> Self {
        Self {
            p: self.p.transpose(),
            x_labels: self.y_labels.clone(),
            y_labels: self.x_labels.clone(),
            x_grid: self.y_grid.clone(),
            y_grid: self.x_grid.clone(),
        }
    }
}

/// A conditional stochastic map q(z|x): |Z| x |X| with column sums 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    q: DMatrix<f64>,
}

impl Encoder {
    pub fn new(q: DMatrix<f64>) -> Result<Self> {
        if q.nrows() == 0 || q.ncols() == 0 {
            return Err(IbError::InvalidDistribution("empty encoder".into()));
        }
        for x in 0..q.ncols() {
            let col = q.column(x);
            if col.iter().any(|&v| !v.is_finite() || v < -ZERO_TOL) {
                return Err(IbError::InvalidDistribution(format!(
                    "encoder column {x} has a negative or non-finite entry"
                )));
            }
            let sum: f64 = col.iter().sum();
            if (sum - 1.0).abs() > SUM_TOL {
                return Err(IbError::InvalidDistribution(format!(
                    "encoder column {x} sums to {sum}"
                )));
            }
        }
        Ok(Self { q })
    }

    /// q(z|x) = 1/|Z| for all x: the uninformative encoder.
    pub fn uniform(n_z: usize, n_x: usize) -> Self {
        Self {
            q: DMatrix::from_element(n_z, n_x, 1.0 / n_z as f64),
        }
    }

    /// Identity map on |Z| = |X|.
    pub fn identity(n: usize) -> Self {
        Self {
            q: DMatrix::identity(n, n),
        }
    }

    pub fn n_z(&self) -> usize {
        self.q.nrows()
    }

    pub fn n_x(&self) -> usize {
        self.q.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// q(z) = sum_x q(z|x) p(x).
    pub fn marginal(&self, px: &Distribution) -> Vec<f64> {
        (0..self.n_z())
            .map(|z| {
                (0..self.n_x())
                    .map(|x| self.q[(z, x)] * px[x])
                    .sum::<f64>()
            })
            .collect()
    }
}

/// (I(Z;X), I(Z;Y)) in bits for an encoder applied to a joint.
pub fn encoder_informations(q: &Encoder, joint: &JointDistribution) -> Result<(f64, f64)> {
    if q.n_x() != joint.nx() {
        return Err(IbError::DimensionMismatch(format!(
            "encoder has |X| = {}, joint has |X| = {}",
            q.n_x(),
            joint.nx()
        )));
    }
    let (px, py) = joint.marginals();
    let qz = q.marginal(&px);
    let mut i_zx = 0.0;
    for x in 0..q.n_x() {
        for z in 0..q.n_z() {
            let v = q.matrix()[(z, x)];
            if v > 0.0 && qz[z] > 0.0 {
                i_zx += px[x] * v * (v / qz[z]).ln();
            }
        }
    }
    // q(z|y) = sum_x q(z|x) p(x|y)
    let pxy = joint.conditional_x_given_y();
    let mut i_zy = 0.0;
    for y in 0..joint.ny() {
        for z in 0..q.n_z() {
            let mut qzy = 0.0;
            for x in 0..q.n_x() {
                qzy += q.matrix()[(z, x)] * pxy[(x, y)];
            }
            if qzy > 0.0 && qz[z] > 0.0 {
                i_zy += py[y] * qzy * (qzy / qz[z]).ln();
            }
        }
    }
    Ok(((i_zx / LN_2).max(0.0), (i_zy / LN_2).max(0.0)))
}

// --- serialization -----------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct JointJson {
    p: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    x_labels: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    y_labels: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    x_grid: Option<GridInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    y_grid: Option<GridInfo>,
}

impl JointDistribution {
    pub fn to_json(&self) -> String {
        let j = JointJson {
            p: (0..self.nx())
                .map(|i| self.p.row(i).iter().copied().collect())
                .collect(),
            x_labels: self.x_labels.clone(),
            y_labels: self.y_labels.clone(),
            x_grid: self.x_grid.clone(),
            y_grid: self.y_grid.clone(),
        };
        serde_json::to_string_pretty(&j).expect("joint serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: JointJson =
            serde_json::from_str(s).map_err(|e| IbError::Parse(e.to_string()))?;
        let mut joint = Self::from_rows(&j.p)?;
        joint.x_labels = j.x_labels;
        joint.y_labels = j.y_labels;
        joint.x_grid = j.x_grid;
        joint.y_grid = j.y_grid;
        Ok(joint)
    }

    /// Dense CSV: header row of y-labels (first cell "x"), one row per x-state.
    /// Float formatting is shortest-round-trip, so the round trip is lossless.
    pub fn to_csv(&self) -> String {
        let ylab: Vec<String> = match &self.y_labels {
            Some(l) => l.clone(),
            None => (0..self.ny()).map(|j| format!("y{j}")).collect(),
        };
        let xlab: Vec<String> = match &self.x_labels {
            Some(l) => l.clone(),
            None => (0..self.nx()).map(|i| format!("x{i}")).collect(),
        };
        let mut out = String::new();
        out.push('x');
        for l in &ylab {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for i in 0..self.nx() {
            out.push_str(&xlab[i]);
            for j in 0..self.ny() {
                out.push(',');
                out.push_str(&format!("{}", self.p[(i, j)]));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(s: &str) -> Result<Self> {
        let mut lines = s
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| IbError::Parse("empty CSV".into()))?;
        let y_labels: Vec<String> = header.split(',').skip(1).map(String::from).collect();
        let mut x_labels = Vec::new();
        let mut rows = Vec::new();
        for line in lines {
            let mut it = it_fields(line);
            let label = it
                .next()
                .ok_or_else(|| IbError::Parse("missing x label".into()))?;
            x_labels.push(label.to_string());
            let row: Vec<f64> = it
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|e| IbError::Parse(format!("bad number '{f}': {e}")))
                })
                .collect::<Result<_>>()?;
            if row.len() != y_labels.len() {
                return Err(IbError::Parse(format!(
                    "row has {} fields, header has {}",
                    row.len(),
                    y_labels.len()
                )));
            }
            rows.push(row);
        }
        let mut joint = Self::from_rows(&rows)?;
        // labels survive only when no state was stripped
        if joint.nx() == x_labels.len() && joint.ny() == y_labels.len() {
            joint.x_labels = Some(x_labels);
            joint.y_labels = Some(y_labels);
        }
        Ok(joint)
    }
}

fn it_fields(line: &str) -> impl Iterator<Item = &str> {
    line.split(',').map(str::trim)
}
