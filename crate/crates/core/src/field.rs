//! The waveform `u(x) = sum_i p_i e^{-|x - q_i|}` and PDE-level diagnostics:
//! slope, H^1 norm, the one-sided slope bound and the strong-form residual.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{rhs, Trajectory};
use crate::error::{Error, Result};
use crate::num::{compensated_sum, sign};
use crate::quad;
use crate::state::PeakonState;

pub fn eval_u(state: &PeakonState, x: f64) -> f64 {
    state.q().iter().zip(state.p()).map(|(q, p)| p * (-(x - q).abs()).exp()).sum()
}

/// `u_x` at a point: smooth away from peaks, a pair of one-sided limits at a peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Slope {
    Regular(f64),
    Kink { left: f64, right: f64 },
}

impl Slope {
    pub fn average(self) -> f64 {
        match self {
            Slope::Regular(v) => v,
            Slope::Kink { left, right } => 0.5 * (left + right),
        }
    }

    pub fn max(self) -> f64 {
        match self {
            Slope::Regular(v) => v,
            Slope::Kink { left, right } => left.max(right),
        }
    }

    pub fn min(self) -> f64 {
        match self {
            Slope::Regular(v) => v,
            Slope::Kink { left, right } => left.min(right),
        }
    }
}

/// `u_x = -sum_i p_i e^{-|x - q_i|} sign(x - q_i)`.
pub fn eval_ux(state: &PeakonState, x: f64) -> Slope {
    let mut smooth = 0.0;
    let mut kink = None;
    for (&q, &p) in state.q().iter().zip(state.p()) {
        if x == q {
            kink = Some(p);
        } else {
            smooth -= p * (-(x - q).abs()).exp() * sign(x - q);
        }
    }
    match kink {
        None => Slope::Regular(smooth),
        Some(p) => Slope::Kink { left: smooth + p, right: smooth - p },
    }
}

/// Below this gap the closest pair is summed in regularized variables.
const CLOSE_PAIR: f64 = 1e-2;

/// `int (u^2 + u_x^2) dx = sum_ij p_i p_j [(1 + d) + (1 - d)] e^{-d} = 2 p^T h p`.
///
/// Near a collision the momenta of the closing pair diverge and the pairwise
/// sum cancels catastrophically, so there it is evaluated as `4 H_1` through
/// [`energy_regularized`](crate::state::energy_regularized).
pub fn h1_norm_sq(state: &PeakonState) -> f64 {
    let (q, p) = (state.q(), state.p());
    let n = state.n();
    let closest = state.gaps().enumerate().min_by(|a, b| a.1.total_cmp(&b.1));
    if let Some((k, gap)) = closest {
        if gap < CLOSE_PAIR {
            if let Ok(e) = crate::state::energy_regularized(state, k) {
                return 4.0 * e;
            }
        }
    }
    let terms = (0..n).flat_map(|i| {
        (0..n).map(move |j| {
            let d = (q[i] - q[j]).abs();
            let e = (-d).exp();
            p[i] * p[j] * ((1.0 + d) * e + (1.0 - d) * e)
        })
    });
    compensated_sum(terms)
}

/// Breakpoints `[q_n - tail, q_n, ..., q_1, q_1 + tail]`, ascending.
fn pieces(state: &PeakonState, tail: f64) -> Vec<f64> {
    let mut xs: Vec<f64> = state.q().iter().rev().copied().collect();
    xs.insert(0, xs[0] - tail);
    xs.push(xs[xs.len() - 1] + tail);
    xs
}

/// `int (u^2 + u_x^2) dx` by adaptive quadrature on each smooth piece,
/// truncating the tails where the integrand is below `e^{-70}` of its peak scale.
pub fn h1_norm_sq_quadrature(state: &PeakonState) -> Result<f64> {
    let xs = pieces(state, 35.0);
    let f = |x: f64| {
        let u = eval_u(state, x);
        let ux = eval_ux(state, x).average();
        u * u + ux * ux
    };
    let mut total = Vec::with_capacity(xs.len());
    for w in xs.windows(2) {
        total.push(quad::integrate(f, w[0], w[1], 1e-15, 1e-13)?.value);
    }
    Ok(compensated_sum(total))
}

/// `(inf u_x, sup u_x)` over the real line, in closed form.
///
/// Between consecutive peaks `b < x < a`, with `y = x - b`,
/// `u_x = A e^{y} - B e^{-y}` where `A = sum_{q_j >= a} p_j e^{b - q_j}` and
/// `B = sum_{q_j <= b} p_j e^{q_j - b}`. Candidates are the one-sided endpoint
/// limits and the interior critical point; the unbounded end intervals add the
/// limit `0` at infinity.
pub fn slope_bounds(state: &PeakonState) -> (f64, f64) {
    let (q, p) = (state.q(), state.p());
    let n = state.n();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut take = |v: f64| {
        lo = lo.min(v);
        hi = hi.max(v);
    };
    take(0.0);

    // left of every peak: u_x = A e^{x - q_n}
    let a_left: f64 = (0..n).map(|j| p[j] * (q[n - 1] - q[j]).exp()).sum();
    take(a_left);
    // right of every peak: u_x = -B e^{-(x - q_1)}
    let b_right: f64 = (0..n).map(|j| p[j] * (q[j] - q[0]).exp()).sum();
    take(-b_right);

    for i in 0..n.saturating_sub(1) {
        let (a, b) = (q[i], q[i + 1]);
        let len = a - b;
        let big_a: f64 = (0..=i).map(|j| p[j] * (b - q[j]).exp()).sum();
        let big_b: f64 = (i + 1..n).map(|j| p[j] * (q[j] - b).exp()).sum();
        take(big_a - big_b);
        take(big_a * len.exp() - big_b * (-len).exp());
        // u_xx = A e^y + B e^{-y} = 0 at e^{2y} = -B/A
        if big_a != 0.0 && -big_b / big_a > 0.0 {
            let y = 0.5 * (-big_b / big_a).ln();
            if y > 0.0 && y < len {
                take(big_a * y.exp() - big_b * (-y).exp());
            }
        }
    }
    (lo, hi)
}

/// `sup_x u_x`.
pub fn oleinik_sup(state: &PeakonState) -> f64 {
    slope_bounds(state).1
}

/// Grid estimate of `sup u_x` on `[q_n - margin, q_1 + margin]`, with every
/// peak included as a grid point so the one-sided limits are seen.
pub fn oleinik_sup_grid(state: &PeakonState, points: usize, margin: f64) -> f64 {
    let xs = pieces(state, margin);
    let total = xs[xs.len() - 1] - xs[0];
    let mut best = f64::NEG_INFINITY;
    for w in xs.windows(2) {
        let m = ((w[1] - w[0]) / total * points as f64).ceil().max(2.0) as usize;
        for k in 0..=m {
            let x = if k == m { w[1] } else { w[0] + (w[1] - w[0]) * k as f64 / m as f64 };
            best = best.max(eval_ux(state, x).max());
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveProfile {
    pub t: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    /// Slope; at a peak the average of the one-sided limits.
    pub ux: Vec<f64>,
}

/// `u` and `u_x` on `points` evenly spaced nodes of `[xmin, xmax]`.
pub fn profile(state: &PeakonState, xmin: f64, xmax: f64, points: usize) -> Result<WaveProfile> {
    if points == 0 {
        return Err(Error::Domain("profile needs at least one point".into()));
    }
    if !(xmin.is_finite() && xmax.is_finite() && xmin <= xmax) || (points > 1 && xmin == xmax) {
        return Err(Error::Domain(format!("invalid profile range [{xmin}, {xmax}]")));
    }
    let x: Vec<f64> = (0..points)
        .map(|k| if points == 1 { xmin } else { xmin + (xmax - xmin) * k as f64 / (points - 1) as f64 })
        .collect();
    let (u, ux) = x.par_iter().map(|&xi| (eval_u(state, xi), eval_ux(state, xi).average())).unzip();
    Ok(WaveProfile { t: state.t(), x, u, ux })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// `max |u_t - u_xxt + 3 u u_x - 2 u_x u_xx - u u_xxx|` over grid points off the peaks.
    pub pde: f64,
    /// `max_i |q_i' - u(q_i)|`.
    pub peak_velocity: f64,
    /// `max_i |p_i' + p_i <u_x>(q_i)|`, with `<u_x>` the average of one-sided limits.
    pub peak_momentum: f64,
    pub evaluated: usize,
    /// Grid points skipped for lying within the exclusion radius of a peak.
    pub skipped: usize,
}

impl ResidualReport {
    pub fn max(&self) -> f64 {
        self.pde.max(self.peak_velocity).max(self.peak_momentum)
    }
}

/// Radius around each peak excluded from the PDE residual.
pub const PEAK_EXCLUSION: f64 = 1e-2;
/// Half-width of the central time difference on the dense output.
pub const TIME_STEP: f64 = 1e-5;

/// Strong-form residual of the trajectory at time `t`.
///
/// Away from peaks `u_xx = u` and `u_xxx = u_x`; time derivatives come from
/// central differences of the dense output. At the peaks the residual checks
/// that each peak moves with the wave (`q_i' = u(q_i)`) and that its amplitude
/// obeys `p_i' = -p_i <u_x>(q_i)`, the conditions the weak form imposes there.
pub fn strong_residual(traj: &Trajectory, t: f64, grid: &[f64]) -> Result<ResidualReport> {
    let dt = TIME_STEP;
    for te in traj.event_times() {
        if (t - te).abs() <= 2.0 * dt {
            return Err(Error::Domain(format!("t = {t} is within {dt:e} of the event at {te}")));
        }
    }
    let (sm, s0, sp) = (traj.state_at(t - dt)?, traj.state_at(t)?, traj.state_at(t + dt)?);
    if sm.n() != s0.n() || sp.n() != s0.n() {
        return Err(Error::Domain(format!("t = {t} straddles a merge")));
    }

    let mut pde: f64 = 0.0;
    let (mut evaluated, mut skipped) = (0, 0);
    for &x in grid {
        if s0.q().iter().chain(sm.q()).chain(sp.q()).any(|q| (x - q).abs() < PEAK_EXCLUSION) {
            skipped += 1;
            continue;
        }
        evaluated += 1;
        let u = eval_u(&s0, x);
        let ux = eval_ux(&s0, x).average();
        let (uxx, uxxx) = (u, ux);
        let u_t = (eval_u(&sp, x) - eval_u(&sm, x)) / (2.0 * dt);
        // u_xx = u off the peaks, so u_xxt is the time difference of u as well
        let uxx_t = (eval_u(&sp, x) - eval_u(&sm, x)) / (2.0 * dt);
        let r = u_t - uxx_t + 3.0 * u * ux - 2.0 * ux * uxx - u * uxxx;
        pde = pde.max(r.abs());
    }

    let (mut peak_velocity, mut peak_momentum): (f64, f64) = (0.0, 0.0);
    for i in 0..s0.n() {
        let qd = (sp.q()[i] - sm.q()[i]) / (2.0 * dt);
        let pd = (sp.p()[i] - sm.p()[i]) / (2.0 * dt);
        let qi = s0.q()[i];
        peak_velocity = peak_velocity.max((qd - eval_u(&s0, qi)).abs());
        peak_momentum = peak_momentum.max((pd + s0.p()[i] * eval_ux(&s0, qi).average()).abs());
    }
    Ok(ResidualReport { pde, peak_velocity, peak_momentum, evaluated, skipped })
}

/// Peak conditions evaluated directly from the vector field, without differencing.
pub fn peak_conditions(state: &PeakonState) -> (f64, f64) {
    let (dq, dp) = rhs(state);
    let mut v: f64 = 0.0;
    let mut m: f64 = 0.0;
    for i in 0..state.n() {
        let qi = state.q()[i];
        v = v.max((dq[i] - eval_u(state, qi)).abs());
        m = m.max((dp[i] + state.p()[i] * eval_ux(state, qi).average()).abs());
    }
    (v, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate, IntegratorConfig};
    use crate::sampling::Sampler;
    use crate::state::energy;

    fn st(q: &[f64], p: &[f64]) -> PeakonState {
        PeakonState::new(q.to_vec(), p.to_vec(), 0.0).unwrap()
    }

    #[test]
    fn u_examples() {
        let one = st(&[0.4], &[1.5]);
        assert_eq!(eval_u(&one, 0.4), 1.5);
        assert!(eval_u(&one, 80.0).abs() < 1e-30 && eval_u(&one, -80.0).abs() < 1e-30);
        let pair = st(&[1.0, -1.0], &[1.0, -1.0]);
        assert!(eval_u(&pair, 0.0).abs() < 1e-16);
    }

    #[test]
    fn ux_examples() {
        let one = st(&[0.0], &[2.0]);
        match eval_ux(&one, -0.5) {
            Slope::Regular(v) => assert!((v - 2.0 * (-0.5f64).exp()).abs() < 1e-15),
            _ => panic!("expected regular"),
        }
        let s = st(&[0.7, -0.2], &[1.3, -0.4]);
        match eval_ux(&s, 0.7) {
            Slope::Kink { left, right } => assert!((right - left + 2.0 * 1.3).abs() < 1e-15),
            _ => panic!("expected kink"),
        }
        for x in [-1.0, 0.3, 1.5] {
            let h = 1e-6;
            let fd = (eval_u(&s, x + h) - eval_u(&s, x - h)) / (2.0 * h);
            assert!((fd - eval_ux(&s, x).average()).abs() < 1e-6);
        }
    }

    #[test]
    fn h1_norm_closed_forms() {
        let one = st(&[0.0], &[1.7]);
        assert!((h1_norm_sq(&one) - 2.0 * 1.7 * 1.7).abs() < 1e-14);
        let (a, b, s) = (0.8, -1.3, 0.9f64);
        let two = st(&[s, 0.0], &[a, b]);
        let expected = 2.0 * (a * a + b * b + 2.0 * a * b * (-s).exp());
        assert!((h1_norm_sq(&two) - expected).abs() < 1e-14);
        assert!((h1_norm_sq(&two) / energy(&two) - 4.0).abs() < 1e-13);
    }

    #[test]
    fn h1_norm_matches_quadrature() {
        let sampler = Sampler::default();
        for i in 0..5 {
            let s = sampler.state(17, i, 1 + i as usize);
            let exact = h1_norm_sq(&s);
            let num = h1_norm_sq_quadrature(&s).unwrap();
            assert!((exact - num).abs() < 1e-8 * exact.abs().max(1e-300), "{exact} vs {num}");
        }
    }

    #[test]
    fn slope_sup_single_peakon() {
        assert!((oleinik_sup(&st(&[0.3], &[1.2])) - 1.2).abs() < 1e-15);
        // a trough: the sup is the right-hand limit at the peak
        assert!((oleinik_sup(&st(&[0.3], &[-1.2])) - 1.2).abs() < 1e-15);
    }

    #[test]
    fn slope_reflection_and_grid_oracle() {
        let sampler = Sampler::default();
        for i in 0..10 {
            let s = sampler.state(23, i, 4);
            let (lo, hi) = slope_bounds(&s);
            let neg = s.with_scaled_momenta(-1.0);
            assert!((oleinik_sup(&neg) + lo).abs() < 1e-14);
            let grid = oleinik_sup_grid(&s, 100_000, 10.0);
            assert!((grid - hi).abs() < 1e-6, "grid {grid} closed form {hi}");
            assert!(grid <= hi + 1e-14);
        }
    }

    #[test]
    fn profile_checks() {
        let s = st(&[0.0], &[1.0]);
        let pr = profile(&s, -2.0, 2.0, 5).unwrap();
        assert_eq!(pr.x, vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
        assert_eq!(pr.u[2], 1.0);
        assert!((pr.u[0] - pr.u[4]).abs() < 1e-16);
        assert!(profile(&s, 1.0, 0.0, 5).is_err());
        assert!(profile(&s, 0.0, 1.0, 0).is_err());
    }

    #[test]
    fn residual_single_peakon() {
        let s = st(&[0.0], &[1.3]);
        let tr = integrate(&s, 2.0, &IntegratorConfig::default()).unwrap();
        let grid: Vec<f64> = (0..401).map(|k| -3.0 + 8.0 * k as f64 / 400.0).collect();
        let r = strong_residual(&tr, 1.0, &grid).unwrap();
        assert!(r.max() < 1e-5, "{r:?}");
        assert!(r.skipped > 0 || grid.iter().all(|x| (x - 1.3).abs() >= PEAK_EXCLUSION));
    }

    #[test]
    fn residual_detects_corruption() {
        let s = st(&[1.0, -1.0], &[1.0, 0.5]);
        let tr = integrate(&s, 2.0, &IntegratorConfig::default()).unwrap();
        let grid: Vec<f64> = (0..201).map(|k| -4.0 + 10.0 * k as f64 / 200.0).collect();
        let good = strong_residual(&tr, 1.0, &grid).unwrap();
        assert!(good.max() < 1e-4, "{good:?}");
        let bad = strong_residual(&tr.with_scaled_momenta(1.1), 1.0, &grid).unwrap();
        assert!(bad.max() > 1e-2, "{bad:?}");
    }

    #[test]
    fn peak_conditions_hold_for_vector_field() {
        let s = Sampler::default().state(2, 2, 5);
        let (v, m) = peak_conditions(&s);
        assert!(v < 1e-14 && m < 1e-13);
    }
}
