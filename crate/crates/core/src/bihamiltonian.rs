//! The Poisson bivectors `P0`, `P1`, the recursion operator `S = P1^{-1} P0`,
//! Poisson brackets and numerical checks of the Schouten–Nijenhuis identities.
//!
//! Coordinates are ordered `(q_1..q_n, p_1..p_n)`. A wedge `d_a ^ d_b` puts `+v`
//! at `(a, b)` and `-v` at `(b, a)`; there is no factor `1/2` anywhere. With
//!
//! ```text
//! P1 = sum_i d_{p_i} ^ d_{q_i}
//! ```
//!
//! the contraction `v_b = sum_a P[a][b] alpha_a` applied to `dH` gives Hamilton's
//! equations, and `{f, g} = sum P[a][b] df_a dg_b`, so `{q_i, p_i} = -1`.
//!
//! `P0` has entries
//!
//! ```text
//! P0[p_a][q_b] =  p_a e_ab                          (including a = b)
//! P0[p_a][p_b] = -sign(q_a - q_b) p_a p_b e_ab
//! P0[q_a][q_b] =  sign(q_a - q_b) (e_ab - 1)
//! ```
//!
//! with `e_ab = exp(-|q_a - q_b|)` and `sign(0) = 0`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrals::IntegralTower;
use crate::num::{max_abs, sign};
use crate::sampling::Sampler;
use crate::state::PeakonState;

/// Minimum position gap for SN sampling; `P0` is only smooth away from `q_i = q_j`.
pub const SIGN_GUARD: f64 = 1e-3;

/// Antisymmetric `2n x 2n` array; only the strict upper triangle is stored.
#[derive(Debug, Clone, PartialEq)]
pub struct BivectorValue {
    n: usize,
    upper: Vec<f64>,
}

impl BivectorValue {
    pub fn zeros(n: usize) -> Self {
        let d = 2 * n;
        Self { n, upper: vec![0.0; d * (d - 1) / 2] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    fn slot(&self, a: usize, b: usize) -> usize {
        debug_assert!(a < b);
        let d = self.dim();
        a * (2 * d - a - 1) / 2 + (b - a - 1)
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => self.upper[self.slot(a, b)],
            std::cmp::Ordering::Greater => -self.upper[self.slot(b, a)],
            std::cmp::Ordering::Equal => 0.0,
        }
    }

    /// Sets entry `(a, b)` to `v` (and `(b, a)` to `-v`). Diagonal writes are ignored.
    pub fn set(&mut self, a: usize, b: usize, v: f64) {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => {
                let s = self.slot(a, b);
                self.upper[s] = v;
            }
            std::cmp::Ordering::Greater => {
                let s = self.slot(b, a);
                self.upper[s] = -v;
            }
            std::cmp::Ordering::Equal => {}
        }
    }

    /// `self + lambda * other`.
    pub fn axpy(&self, lambda: f64, other: &BivectorValue) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::Dimension { expected: self.n, got: other.n });
        }
        let upper = self.upper.iter().zip(&other.upper).map(|(a, b)| a + lambda * b).collect();
        Ok(Self { n: self.n, upper })
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |a, b| self.get(a, b))
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.upper)
    }
}

/// A bivector field on phase space with analytic coefficient derivatives.
pub trait BivectorField: Sync {
    fn name(&self) -> String;

    fn eval(&self, state: &PeakonState) -> BivectorValue;

    /// Coefficient-wise derivative with respect to phase coordinate `c`.
    fn derivative(&self, state: &PeakonState, c: usize) -> BivectorValue;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct P0;

#[derive(Debug, Clone, Copy, Default)]
pub struct P1;

/// `P0 + lambda P1`.
#[derive(Debug, Clone, Copy)]
pub struct Pencil {
    pub lambda: f64,
}

/// `P0` with the single entry `(a, b)` multiplied by `factor`; used to check
/// that the verification machinery can fail.
#[derive(Debug, Clone, Copy)]
pub struct PerturbedP0 {
    pub a: usize,
    pub b: usize,
    pub factor: f64,
}

pub fn eval_p1(n: usize) -> BivectorValue {
    let mut b = BivectorValue::zeros(n);
    for i in 0..n {
        b.set(n + i, i, 1.0);
    }
    b
}

#[inline]
fn kernel(q: &[f64], a: usize, b: usize) -> f64 {
    (-(q[a] - q[b]).abs()).exp()
}

pub fn eval_p0(state: &PeakonState) -> BivectorValue {
    let n = state.n();
    let (q, p) = (state.q(), state.p());
    let mut out = BivectorValue::zeros(n);
    for a in 0..n {
        for b in 0..n {
            out.set(n + a, b, p[a] * kernel(q, a, b));
        }
        for b in a + 1..n {
            let e = kernel(q, a, b);
            let s = sign(q[a] - q[b]);
            out.set(n + a, n + b, -s * p[a] * p[b] * e);
            out.set(a, b, s * (e - 1.0));
        }
    }
    out
}

fn p0_derivative(state: &PeakonState, c: usize) -> BivectorValue {
    let n = state.n();
    let (q, p) = (state.q(), state.p());
    let mut d = BivectorValue::zeros(n);
    if c >= n {
        let m = c - n;
        for b in 0..n {
            d.set(n + m, b, kernel(q, m, b));
            if b != m {
                d.set(n + m, n + b, -sign(q[m] - q[b]) * p[b] * kernel(q, m, b));
            }
        }
        return d;
    }
    let m = c;
    for a in 0..n {
        for b in 0..n {
            if a == b || (a != m && b != m) {
                continue;
            }
            // d e_ab / d q_a = -sign e_ab, d e_ab / d q_b = +sign e_ab
            let s = sign(q[a] - q[b]);
            let de = if a == m { -s } else { s } * kernel(q, a, b);
            d.set(n + a, b, p[a] * de);
            if a < b {
                d.set(n + a, n + b, -s * p[a] * p[b] * de);
                d.set(a, b, s * de);
            }
        }
    }
    d
}

impl BivectorField for P0 {
    fn name(&self) -> String {
        "P0".into()
    }

    fn eval(&self, state: &PeakonState) -> BivectorValue {
        eval_p0(state)
    }

    fn derivative(&self, state: &PeakonState, c: usize) -> BivectorValue {
        p0_derivative(state, c)
    }
}

impl BivectorField for P1 {
    fn name(&self) -> String {
        "P1".into()
    }

    fn eval(&self, state: &PeakonState) -> BivectorValue {
        eval_p1(state.n())
    }

    fn derivative(&self, state: &PeakonState, _c: usize) -> BivectorValue {
        BivectorValue::zeros(state.n())
    }
}

impl BivectorField for Pencil {
    fn name(&self) -> String {
        format!("P0{:+}P1", self.lambda)
    }

    fn eval(&self, state: &PeakonState) -> BivectorValue {
        eval_p0(state).axpy(self.lambda, &eval_p1(state.n())).expect("same dimension")
    }

    fn derivative(&self, state: &PeakonState, c: usize) -> BivectorValue {
        p0_derivative(state, c)
    }
}

impl BivectorField for PerturbedP0 {
    fn name(&self) -> String {
        format!("P0[{},{}]x{}", self.a, self.b, self.factor)
    }

    fn eval(&self, state: &PeakonState) -> BivectorValue {
        let mut v = eval_p0(state);
        v.set(self.a, self.b, self.factor * v.get(self.a, self.b));
        v
    }

    fn derivative(&self, state: &PeakonState, c: usize) -> BivectorValue {
        let mut v = p0_derivative(state, c);
        v.set(self.a, self.b, self.factor * v.get(self.a, self.b));
        v
    }
}

/// `v_b = sum_a P[a][b] alpha_a`.
pub fn apply_bivector(bv: &BivectorValue, alpha: &[f64]) -> Result<Vec<f64>> {
    let d = bv.dim();
    if alpha.len() != d {
        return Err(Error::Dimension { expected: d, got: alpha.len() });
    }
    Ok((0..d).map(|b| (0..d).map(|a| bv.get(a, b) * alpha[a]).sum()).collect())
}

/// `{f, g}_P = sum P[a][b] df_a dg_b`.
pub fn poisson_bracket(bv: &BivectorValue, df: &[f64], dg: &[f64]) -> Result<f64> {
    let v = apply_bivector(bv, df)?;
    if dg.len() != v.len() {
        return Err(Error::Dimension { expected: v.len(), got: dg.len() });
    }
    Ok(v.iter().zip(dg).map(|(x, y)| x * y).sum())
}

/// `sum |P[a][b] df_a dg_b|`, the natural scale of a bracket value.
pub fn bracket_magnitude(bv: &BivectorValue, df: &[f64], dg: &[f64]) -> f64 {
    let d = bv.dim();
    let mut acc = 0.0;
    for a in 0..d {
        for b in 0..d {
            acc += (bv.get(a, b) * df[a] * dg[b]).abs();
        }
    }
    acc
}

/// Inverse of `alpha -> P1(alpha, .)`: `alpha_p = v_q`, `alpha_q = -v_p`.
pub fn p1_inverse(v: &[f64]) -> Vec<f64> {
    let n = v.len() / 2;
    let mut alpha = vec![0.0; 2 * n];
    for i in 0..n {
        alpha[n + i] = v[i];
        alpha[i] = -v[n + i];
    }
    alpha
}

/// `S(alpha) = P1^{-1}(P0(alpha, .))`.
pub fn recursion_apply(state: &PeakonState, alpha: &[f64]) -> Result<Vec<f64>> {
    Ok(p1_inverse(&apply_bivector(&eval_p0(state), alpha)?))
}

/// Residual of one coordinate triple together with the sum of absolute term
/// magnitudes it is made of.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnResidual {
    pub value: f64,
    pub magnitude: f64,
}

impl SnResidual {
    /// `|value| / max(1, magnitude)`.
    pub fn scaled(&self) -> f64 {
        self.value.abs() / self.magnitude.max(1.0)
    }
}

/// Values and all coordinate derivatives of a field at one state.
struct Jet {
    value: BivectorValue,
    deriv: Vec<BivectorValue>,
}

impl Jet {
    fn analytic(field: &dyn BivectorField, state: &PeakonState) -> Self {
        let d = 2 * state.n();
        Self { value: field.eval(state), deriv: (0..d).map(|c| field.derivative(state, c)).collect() }
    }

    fn finite_difference(field: &dyn BivectorField, state: &PeakonState) -> Result<Self> {
        let d = 2 * state.n();
        let deriv = (0..d).map(|c| fd_derivative(field, state, c)).collect::<Result<_>>()?;
        Ok(Self { value: field.eval(state), deriv })
    }
}

fn sn_from_jets(p: &Jet, r: &Jet, j: usize, k: usize, l: usize) -> SnResidual {
    let d = p.value.dim();
    let mut value = 0.0;
    let mut magnitude = 0.0;
    for i in 0..d {
        let terms = [
            p.value.get(i, j) * r.deriv[i].get(k, l),
            p.value.get(i, k) * r.deriv[i].get(l, j),
            p.value.get(i, l) * r.deriv[i].get(j, k),
            r.value.get(i, j) * p.deriv[i].get(k, l),
            r.value.get(i, k) * p.deriv[i].get(l, j),
            r.value.get(i, l) * p.deriv[i].get(j, k),
        ];
        for t in terms {
            value += t;
            magnitude += t.abs();
        }
    }
    SnResidual { value, magnitude }
}

fn check_guard(state: &PeakonState, guard: f64) -> Result<()> {
    let gap = state.min_gap();
    if gap < guard {
        return Err(Error::SignGuard { gap, guard });
    }
    Ok(())
}

fn check_triple(state: &PeakonState, j: usize, k: usize, l: usize) -> Result<()> {
    let d = 2 * state.n();
    if !(j < k && k < l && l < d) {
        return Err(Error::Domain(format!("triple ({j},{k},{l}) must satisfy j<k<l<{d}")));
    }
    Ok(())
}

/// Cyclic-sum coefficient of `[P, R]_SN` next to `d_j ^ d_k ^ d_l`, using
/// analytic coefficient derivatives.
pub fn sn_bracket_residual(
    p: &dyn BivectorField,
    r: &dyn BivectorField,
    state: &PeakonState,
    (j, k, l): (usize, usize, usize),
) -> Result<SnResidual> {
    check_triple(state, j, k, l)?;
    check_guard(state, SIGN_GUARD)?;
    Ok(sn_from_jets(&Jet::analytic(p, state), &Jet::analytic(r, state), j, k, l))
}

/// Same as [`sn_bracket_residual`] with central-difference derivatives.
pub fn sn_bracket_residual_fd(
    p: &dyn BivectorField,
    r: &dyn BivectorField,
    state: &PeakonState,
    (j, k, l): (usize, usize, usize),
) -> Result<SnResidual> {
    check_triple(state, j, k, l)?;
    check_guard(state, SIGN_GUARD)?;
    Ok(sn_from_jets(&Jet::finite_difference(p, state)?, &Jet::finite_difference(r, state)?, j, k, l))
}

/// Largest scaled residual over all triples, with the worst triple.
pub fn sn_max_residual(
    p: &dyn BivectorField,
    r: &dyn BivectorField,
    state: &PeakonState,
) -> Result<(f64, (usize, usize, usize))> {
    check_guard(state, SIGN_GUARD)?;
    let (pj, rj) = (Jet::analytic(p, state), Jet::analytic(r, state));
    let d = 2 * state.n();
    let mut worst = (0.0, (0, 1, 2));
    for j in 0..d {
        for k in j + 1..d {
            for l in k + 1..d {
                let s = sn_from_jets(&pj, &rj, j, k, l).scaled();
                if s > worst.0 || s.is_nan() {
                    worst = (s, (j, k, l));
                }
            }
        }
    }
    Ok(worst)
}

/// Central difference of every coefficient with respect to coordinate `c`,
/// step `1e-6 * max(1, |z_c|)`.
pub fn fd_derivative(field: &dyn BivectorField, state: &PeakonState, c: usize) -> Result<BivectorValue> {
    let z = state.phase_point();
    if c >= z.len() {
        return Err(Error::Dimension { expected: z.len(), got: c });
    }
    let h = 1e-6 * z[c].abs().max(1.0);
    let mut zp = z.clone();
    let mut zm = z;
    zp[c] += h;
    zm[c] -= h;
    let fp = field.eval(&PeakonState::from_phase_point(&zp, state.t())?);
    let fm = field.eval(&PeakonState::from_phase_point(&zm, state.t())?);
    fp.axpy(-1.0, &fm).map(|mut v| {
        for x in &mut v.upper {
            *x /= 2.0 * h;
        }
        v
    })
}

/// Jacobi cyclic sum `{{z_j,z_k},z_l} + {{z_k,z_l},z_j} + {{z_l,z_j},z_k}` for
/// coordinate functions, with the inner bracket differentiated numerically.
/// Equals half the SN cyclic sum of `[P, P]`.
pub fn jacobi_residual_fd(
    field: &dyn BivectorField,
    state: &PeakonState,
    (j, k, l): (usize, usize, usize),
) -> Result<f64> {
    check_triple(state, j, k, l)?;
    let value = field.eval(state);
    let d = value.dim();
    let deriv: Vec<BivectorValue> = (0..d).map(|c| fd_derivative(field, state, c)).collect::<Result<_>>()?;
    let outer = |x: usize, y: usize, z: usize| -> f64 { (0..d).map(|a| deriv[a].get(x, y) * value.get(a, z)).sum() };
    Ok(outer(j, k, l) + outer(k, l, j) + outer(l, j, k))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCase {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub residual: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check: String,
    pub samples: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub worst_case: Option<WorstCase>,
    /// Samples whose residual reached the tolerance.
    pub failures: Vec<WorstCase>,
    /// Samples skipped by the sign guard.
    #[serde(default)]
    pub rejected: usize,
}

impl VerificationReport {
    pub fn new(check: impl Into<String>, tolerance: f64) -> Self {
        Self {
            check: check.into(),
            samples: 0,
            max_residual: 0.0,
            tolerance,
            pass: true,
            worst_case: None,
            failures: Vec::new(),
            rejected: 0,
        }
    }

    /// Records one sample's residual.
    pub fn record(&mut self, state: &PeakonState, residual: f64, detail: impl Into<String>) {
        self.record_values(state.q(), state.p(), residual, detail);
    }

    /// Like [`record`](Self::record) for checks whose samples are not full states.
    pub fn record_values(&mut self, q: &[f64], p: &[f64], residual: f64, detail: impl Into<String>) {
        self.samples += 1;
        let case = || WorstCase { q: q.to_vec(), p: p.to_vec(), residual, detail: String::new() };
        let detail = detail.into();
        let bad = !(residual < self.tolerance);
        if bad {
            self.failures.push(WorstCase { detail: detail.clone(), ..case() });
        }
        if residual > self.max_residual || residual.is_nan() || self.worst_case.is_none() {
            self.max_residual = if residual.is_nan() { f64::INFINITY } else { residual.max(self.max_residual) };
            self.worst_case = Some(WorstCase { detail, ..case() });
        }
        self.pass = self.max_residual < self.tolerance && self.failures.is_empty();
    }

    pub fn reject(&mut self) {
        self.rejected += 1;
    }

    /// Folds another report of the same check into this one.
    pub fn merge(mut self, other: VerificationReport) -> Self {
        self.samples += other.samples;
        self.rejected += other.rejected;
        self.failures.extend(other.failures);
        if other.max_residual > self.max_residual || self.worst_case.is_none() {
            self.max_residual = other.max_residual;
            self.worst_case = other.worst_case;
        }
        self.pass = self.max_residual < self.tolerance && self.failures.is_empty();
        self
    }

    /// Combines reports of different checks under a new name.
    pub fn combine(name: impl Into<String>, tolerance: f64, parts: Vec<VerificationReport>) -> Self {
        let name = name.into();
        let mut out = Self::new(name.clone(), tolerance);
        for part in parts {
            let check = part.check.clone();
            let mut part = part;
            for f in part.failures.iter_mut().chain(part.worst_case.iter_mut()) {
                f.detail = format!("{check}: {}", f.detail);
            }
            out = out.merge(VerificationReport { check: name.clone(), tolerance, ..part });
        }
        out
    }
}

/// Relative mismatch `max|P0(dH0) - P1(dH1)| / max|P1(dH1)|`.
pub fn fundamental_identity_residual(state: &PeakonState) -> Result<f64> {
    let n = state.n();
    let mut dh0 = vec![0.0; 2 * n];
    dh0[n..].iter_mut().for_each(|x| *x = 1.0);
    let dh1 = crate::integrals::grad_h(1, state)?;
    let lhs = apply_bivector(&eval_p0(state), &dh0)?;
    let rhs = apply_bivector(&eval_p1(n), &dh1)?;
    let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    Ok(max_abs(&diff) / max_abs(&rhs).max(f64::MIN_POSITIVE))
}

fn sweep<F>(check: &str, n: usize, samples: usize, seed: u64, tol: f64, f: F) -> VerificationReport
where
    F: Fn(&PeakonState, &mut VerificationReport) + Sync,
{
    let sampler = Sampler::default();
    let parts: Vec<VerificationReport> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rep = VerificationReport::new(check, tol);
            let state = sampler.state(seed, i, n);
            if state.min_gap() < SIGN_GUARD {
                rep.reject();
            } else {
                f(&state, &mut rep);
            }
            rep
        })
        .collect();
    parts.into_iter().fold(VerificationReport::new(check, tol), VerificationReport::merge)
}

/// SN residuals `[F,F]`, `[F,P1]`, `[P1,P1]` over all triples and the
/// fundamental identity, at seeded random states.
pub fn verify_structure_with(
    field: &dyn BivectorField,
    n: usize,
    samples: usize,
    seed: u64,
    tol: f64,
) -> VerificationReport {
    let name = field.name();
    sweep("sn", n, samples, seed, tol, |state, rep| {
        let pairs: [(&dyn BivectorField, &dyn BivectorField, String); 3] = [
            (field, field, format!("[{name},{name}]")),
            (field, &P1, format!("[{name},P1]")),
            (&P1, &P1, "[P1,P1]".to_string()),
        ];
        for (a, b, label) in pairs {
            match sn_max_residual(a, b, state) {
                Ok((r, t)) => rep.record(state, r, format!("{label} triple {t:?}")),
                Err(_) => rep.reject(),
            }
        }
        let identity = apply_bivector(&field.eval(state), &{
            let mut v = vec![0.0; 2 * n];
            v[n..].iter_mut().for_each(|x| *x = 1.0);
            v
        })
        .and_then(|lhs| {
            let rhs = apply_bivector(&eval_p1(n), &crate::integrals::grad_h(1, state)?)?;
            let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
            Ok(max_abs(&diff) / max_abs(&rhs).max(f64::MIN_POSITIVE))
        });
        match identity {
            Ok(r) => rep.record(state, r, format!("{name}(dH0) = P1(dH1)")),
            Err(e) => rep.record(state, f64::INFINITY, e.to_string()),
        }
    })
}

pub fn verify_structure(n: usize, samples: usize, seed: u64, tol: f64) -> VerificationReport {
    verify_structure_with(&P0, n, samples, seed, tol)
}

/// `||S(dH_s) - dH_{s+1}||_inf / ||dH_{s+1}||_inf` for `s < s_max`.
pub fn verify_recursion(n: usize, s_max: usize, samples: usize, seed: u64, tol: f64) -> Result<VerificationReport> {
    let tower = IntegralTower::new(n, s_max)?;
    Ok(sweep("recursion", n, samples, seed, tol, |state, rep| {
        let grads = match tower.grads(state) {
            Ok(g) => g,
            Err(e) => return rep.record(state, f64::INFINITY, e.to_string()),
        };
        for s in 0..s_max {
            let r = recursion_apply(state, &grads[s]).map(|img| {
                let diff: Vec<f64> = img.iter().zip(&grads[s + 1]).map(|(a, b)| a - b).collect();
                max_abs(&diff) / max_abs(&grads[s + 1]).max(f64::MIN_POSITIVE)
            });
            rep.record(state, r.unwrap_or(f64::INFINITY), format!("S(dH{s}) vs dH{}", s + 1));
        }
    }))
}

/// `|{H_i, H_j}|` relative to the bracket's term magnitude, under `P0` and `P1`, for `i < j <= s_max`.
pub fn verify_involution(n: usize, s_max: usize, samples: usize, seed: u64, tol: f64) -> Result<VerificationReport> {
    let tower = IntegralTower::new(n, s_max)?;
    Ok(sweep("involution", n, samples, seed, tol, |state, rep| {
        let grads = match tower.grads(state) {
            Ok(g) => g,
            Err(e) => return rep.record(state, f64::INFINITY, e.to_string()),
        };
        for (label, bv) in [("P0", eval_p0(state)), ("P1", eval_p1(n))] {
            for i in 0..=s_max {
                for j in i + 1..=s_max {
                    let v = poisson_bracket(&bv, &grads[i], &grads[j]).unwrap_or(f64::NAN);
                    let m = bracket_magnitude(&bv, &grads[i], &grads[j]);
                    rep.record(state, v.abs() / m.max(f64::MIN_POSITIVE), format!("{{H{i},H{j}}}_{label}"));
                }
            }
        }
    }))
}
