//! Phase-space state of an n-peakon, the exponential kernel `h`, its inverse
//! metric `g = h^{-1}`, momentum and energy.
//!
//! Positions are kept strictly descending (`q[0] > q[1] > ... > q[n-1]`).
//! Every closed-form expression in this crate assumes that ordering.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{compensated_sum, one_minus_exp_neg};

/// Condition number above which the kernel matrix is treated as singular.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawState")]
pub struct PeakonState {
    t: f64,
    q: Vec<f64>,
    p: Vec<f64>,
}

/// Unchecked wire form; deserialization goes through [`validate_state`].
#[derive(Deserialize)]
struct RawState {
    #[serde(default)]
    t: f64,
    q: Vec<f64>,
    p: Vec<f64>,
}

impl TryFrom<RawState> for PeakonState {
    type Error = Error;

    fn try_from(raw: RawState) -> Result<Self> {
        validate_state(&raw.q, &raw.p, raw.t).map(|v| v.state)
    }
}

/// A validated state together with the permutation that brought the input
/// into descending order: `permutation[i]` is the input index of peakon `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Validated {
    pub state: PeakonState,
    pub permutation: Vec<usize>,
}

/// Sorts the input into strictly descending positions, carrying momenta along.
pub fn validate_state(q: &[f64], p: &[f64], t: f64) -> Result<Validated> {
    if q.len() != p.len() {
        return Err(Error::LengthMismatch { q: q.len(), p: p.len() });
    }
    if q.is_empty() {
        return Err(Error::Empty);
    }
    check_finite("q", q)?;
    check_finite("p", p)?;
    if !t.is_finite() {
        return Err(Error::NonFinite { what: "t", index: 0 });
    }

    let mut permutation: Vec<usize> = (0..q.len()).collect();
    permutation.sort_by(|&a, &b| q[b].total_cmp(&q[a]));
    for w in permutation.windows(2) {
        if q[w[0]] == q[w[1]] {
            let (i, j) = (w[0].min(w[1]), w[0].max(w[1]));
            return Err(Error::Singular { i, j });
        }
    }
    let state = PeakonState {
        t,
        q: permutation.iter().map(|&i| q[i]).collect(),
        p: permutation.iter().map(|&i| p[i]).collect(),
    };
    Ok(Validated { state, permutation })
}

fn check_finite(what: &'static str, v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(Error::NonFinite { what, index }),
        None => Ok(()),
    }
}

impl PeakonState {
    /// Builds a state from positions in any order.
    pub fn new(q: Vec<f64>, p: Vec<f64>, t: f64) -> Result<Self> {
        validate_state(&q, &p, t).map(|v| v.state)
    }

    /// Builds a state from positions that must already be strictly descending.
    pub fn ordered(q: Vec<f64>, p: Vec<f64>, t: f64) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::LengthMismatch { q: q.len(), p: p.len() });
        }
        if q.is_empty() {
            return Err(Error::Empty);
        }
        check_finite("q", &q)?;
        check_finite("p", &p)?;
        if let Some(index) = q.windows(2).position(|w| w[0] <= w[1]) {
            return Err(Error::Ordering { index });
        }
        Ok(Self { t, q, p })
    }

    /// Splits a phase point `(q_1..q_n, p_1..p_n)` into a state.
    pub fn from_phase_point(z: &[f64], t: f64) -> Result<Self> {
        if !z.len().is_multiple_of(2) {
            return Err(Error::Dimension { expected: z.len() + 1, got: z.len() });
        }
        let n = z.len() / 2;
        Self::ordered(z[..n].to_vec(), z[n..].to_vec(), t)
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    /// Coordinates in the fixed order `(q_1..q_n, p_1..p_n)`.
    pub fn phase_point(&self) -> Vec<f64> {
        let mut z = Vec::with_capacity(2 * self.n());
        z.extend_from_slice(&self.q);
        z.extend_from_slice(&self.p);
        z
    }

    /// Gap `q_k - q_{k+1}` of pair `k` (zero-based).
    pub fn gap(&self, k: usize) -> Result<f64> {
        if k + 1 >= self.n() {
            return Err(Error::PairIndex { k, n: self.n() });
        }
        Ok(self.q[k] - self.q[k + 1])
    }

    pub fn gaps(&self) -> impl Iterator<Item = f64> + '_ {
        self.q.windows(2).map(|w| w[0] - w[1])
    }

    pub fn min_gap(&self) -> f64 {
        self.gaps().fold(f64::INFINITY, f64::min)
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    /// Shifts every position by `c` (flow of the Killing field `X = sum d/dq_i`).
    pub fn translated(&self, c: f64) -> Self {
        Self { t: self.t, q: self.q.iter().map(|x| x + c).collect(), p: self.p.clone() }
    }

    pub fn with_scaled_momenta(&self, lambda: f64) -> Self {
        Self { t: self.t, q: self.q.clone(), p: self.p.iter().map(|x| lambda * x).collect() }
    }

    pub(crate) fn from_parts_unchecked(q: Vec<f64>, p: Vec<f64>, t: f64) -> Self {
        debug_assert_eq!(q.len(), p.len());
        Self { t, q, p }
    }
}

/// `h_ij = e^{-|q_i - q_j|}`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix(DMatrix<f64>);

/// `g = h^{-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricMatrix(DMatrix<f64>);

impl KernelMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    /// `h(a, b) = a^T h b`.
    pub fn bilinear(&self, a: &[f64], b: &[f64]) -> f64 {
        let n = self.n();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += a[i] * self.0[(i, j)] * b[j];
            }
        }
        acc
    }
}

impl MetricMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    /// `g(a, b) = a^T g b`.
    pub fn bilinear(&self, a: &[f64], b: &[f64]) -> f64 {
        let n = self.n();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += a[i] * self.0[(i, j)] * b[j];
            }
        }
        acc
    }
}

pub fn kernel_matrix(state: &PeakonState) -> KernelMatrix {
    let q = state.q();
    let n = q.len();
    KernelMatrix(DMatrix::from_fn(n, n, |i, j| (-(q[i] - q[j]).abs()).exp()))
}

/// Inverts the kernel matrix, refusing configurations whose condition number
/// exceeds [`CONDITION_LIMIT`].
pub fn metric_matrix(state: &PeakonState) -> Result<MetricMatrix> {
    let h = kernel_matrix(state).0;
    let eig = h.clone().symmetric_eigen();
    let (lo, hi) = eig.eigenvalues.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), &l| (lo.min(l), hi.max(l)));
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= CONDITION_LIMIT) {
        return Err(Error::NearSingular { condition });
    }
    let chol = h.cholesky().ok_or(Error::NearSingular { condition })?;
    Ok(MetricMatrix(chol.inverse()))
}

/// Closed-form tridiagonal inverse of the kernel.
///
/// With `a_i = e^{-(q_i - q_{i+1})}` (and `a_0 = a_n = 0`):
/// `g_ii = 1/(1-a_{i-1}^2) + 1/(1-a_i^2) - 1`, `g_{i,i+1} = -a_i/(1-a_i^2)`.
pub fn metric_matrix_closed_form(state: &PeakonState) -> Result<MetricMatrix> {
    let n = state.n();
    let gaps: Vec<f64> = state.gaps().collect();
    if let Some(k) = gaps.iter().position(|&s| s <= 0.0) {
        return Err(Error::Singular { i: k, j: k + 1 });
    }
    // 1/(1 - a^2) for each gap, written with expm1 to survive tiny gaps.
    let inv_one_minus_a2: Vec<f64> = gaps.iter().map(|&s| 1.0 / one_minus_exp_neg(2.0 * s)).collect();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        let left = if i > 0 { inv_one_minus_a2[i - 1] } else { 1.0 };
        let right = if i + 1 < n { inv_one_minus_a2[i] } else { 1.0 };
        g[(i, i)] = left + right - 1.0;
        if i + 1 < n {
            let off = -(-gaps[i]).exp() * inv_one_minus_a2[i];
            g[(i, i + 1)] = off;
            g[(i + 1, i)] = off;
        }
    }
    Ok(MetricMatrix(g))
}

/// `H_0 = sum p_i`, summed with compensation.
pub fn momentum(state: &PeakonState) -> f64 {
    compensated_sum(state.p().iter().copied())
}

/// `H_1 = 1/2 p^T h p` (theorem convention).
pub fn energy(state: &PeakonState) -> f64 {
    let (q, p) = (state.q(), state.p());
    let n = q.len();
    let mut acc = 0.0;
    for i in 0..n {
        acc += 0.5 * p[i] * p[i];
        for j in (i + 1)..n {
            acc += p[i] * p[j] * (-(q[i] - q[j]).abs()).exp();
        }
    }
    acc
}

/// Energy evaluated in the regularized variables of pair `k`,
/// `psi = p_k + p_{k+1}` and `xi = sqrt(s) (p_k - p_{k+1})`.
///
/// Mathematically identical to [`energy`], but free of the cancellation
/// between the diverging momenta of a nearly collided pair.
pub fn energy_regularized(state: &PeakonState, k: usize) -> Result<f64> {
    let s = state.gap(k)?;
    let (q, p) = (state.q(), state.p());
    let psi = p[k] + p[k + 1];
    let d = p[k] - p[k + 1];
    let e_s = (-s).exp();

    // pair block: 1/4 [(1 + e^{-s}) psi^2 + (1 - e^{-s}) d^2]
    let mut acc = 0.25 * ((1.0 + e_s) * psi * psi + one_minus_exp_neg(s) * d * d);
    for i in 0..q.len() {
        if i == k || i == k + 1 {
            continue;
        }
        let ek = (-(q[k] - q[i]).abs()).exp();
        let ek1 = (-(q[k + 1] - q[i]).abs()).exp();
        acc += 0.5 * p[i] * (psi * (ek + ek1) + d * (ek - ek1));
    }
    for i in 0..q.len() {
        if i == k || i == k + 1 {
            continue;
        }
        acc += 0.5 * p[i] * p[i];
        for j in (i + 1)..q.len() {
            if j == k || j == k + 1 {
                continue;
            }
            acc += p[i] * p[j] * (-(q[i] - q[j]).abs()).exp();
        }
    }
    Ok(acc)
}

/// `g(d_{q_k} - d_{q_{k+1}}, d_{q_k} - d_{q_{k+1}})` in closed form.
///
/// In terms of the gap ratios `a_i = e^{-(q_i - q_{i+1})}` this equals
/// `1/(1-a_{k-1}^2) + 1/(1-a_{k+1}^2) - 2 + 2/(1-a_k)`, with missing
/// neighbours contributing `a = 0`. It blows up like `2/s` as the gap closes.
pub fn transverse_coefficient(state: &PeakonState, k: usize) -> Result<f64> {
    let s = state.gap(k)?;
    if s <= 0.0 {
        return Err(Error::Singular { i: k, j: k + 1 });
    }
    let outer = |gap: Option<f64>| match gap {
        Some(g) => 1.0 / one_minus_exp_neg(2.0 * g),
        None => 1.0,
    };
    let left = if k > 0 { Some(state.q()[k - 1] - state.q()[k]) } else { None };
    let right = if k + 2 < state.n() { Some(state.q()[k + 1] - state.q()[k + 2]) } else { None };
    Ok(outer(left) + outer(right) - 2.0 + 2.0 / one_minus_exp_neg(s))
}
