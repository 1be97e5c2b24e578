//! Two-peakon collision theory on the unit energy shell `p^T h p = 1`, with
//! gap `s = q_1 - q_2` and momentum `c = p_1 + p_2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::one_minus_exp_neg;
use crate::quad;
use crate::state::{energy, momentum, PeakonState};

fn require_two(state: &PeakonState) -> Result<()> {
    if state.n() != 2 {
        return Err(Error::Dimension { expected: 2, got: state.n() });
    }
    Ok(())
}

/// Collision criterion by sign pattern: `p_1 < 0 < p_2`.
pub fn will_collide_2peakon(state: &PeakonState) -> Result<bool> {
    require_two(state)?;
    let p = state.p();
    Ok(p[0] < 0.0 && p[1] > 0.0)
}

/// Collision criterion by integrals: `H_0^2 < 2 H_1` and `p_1 < p_2`.
pub fn will_collide_by_energy(state: &PeakonState) -> Result<bool> {
    require_two(state)?;
    let p = state.p();
    let h0 = momentum(state);
    Ok(h0 * h0 < 2.0 * energy(state) && p[0] < p[1])
}

/// Signed distance of a state from the collision boundary `|H_0| = sqrt(2 H_1)`.
pub fn boundary_margin(state: &PeakonState) -> Result<f64> {
    require_two(state)?;
    Ok((2.0 * energy(state)).sqrt() - momentum(state).abs())
}

/// Largest `|H_0|` on `{p : p^T h p = 1}` at gap `s`.
pub fn h0_max(s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("gap s = {s} must be positive")));
    }
    Ok(2f64.sqrt() / (1.0 + (-s).exp()).sqrt())
}

fn shell_check(s: f64, c: f64) -> Result<f64> {
    if !(s > 0.0) || !c.is_finite() {
        return Err(Error::Domain(format!("need s > 0 and finite c (s = {s}, c = {c})")));
    }
    let slack = 2.0 - c * c * (1.0 + (-s).exp());
    if slack < -1e-12 {
        return Err(Error::Domain(format!("(s, c) = ({s}, {c}) is off the unit energy shell")));
    }
    Ok(slack.max(0.0))
}

/// `ds/dt = -sqrt((2 - c^2 (1 + e^{-s})) (1 - e^{-s}))` for a colliding pair.
pub fn reduced_gap_rate(s: f64, c: f64) -> Result<f64> {
    let slack = shell_check(s, c)?;
    Ok(-(slack * one_minus_exp_neg(s)).sqrt())
}

/// Unit-energy two-peakon state with gap `s0` and momentum `c` heading into collision.
pub fn unit_energy_state(s0: f64, c: f64) -> Result<PeakonState> {
    let slack = shell_check(s0, c)?;
    let d = (slack / one_minus_exp_neg(s0)).sqrt();
    PeakonState::ordered(vec![s0, 0.0], vec![0.5 * (c - d), 0.5 * (c + d)], 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CollisionTime {
    Finite(f64),
    /// `|c| = 1`: the gap only tends to zero as `t -> infinity`.
    Infinite,
}

impl CollisionTime {
    pub fn finite(self) -> Option<f64> {
        match self {
            CollisionTime::Finite(t) => Some(t),
            CollisionTime::Infinite => None,
        }
    }
}

/// Time for the gap to shrink from `s0` to `s_end` on the unit shell.
///
/// Uses `s = u^2`, which turns the endpoint singularity at `s = 0` into a
/// smooth integrand `2u / sqrt((2 - c^2 (1 + e^{-u^2})) (1 - e^{-u^2}))`.
pub fn time_to_gap(s0: f64, c: f64, s_end: f64) -> Result<CollisionTime> {
    if !(s0 > 0.0) || !(0.0..=s0).contains(&s_end) {
        return Err(Error::Domain(format!("need 0 <= s_end <= s0 and s0 > 0 (s0 = {s0}, s_end = {s_end})")));
    }
    if c.abs() > 1.0 {
        return Err(Error::Domain(format!("|c| = {} > 1: no collision", c.abs())));
    }
    if c.abs() == 1.0 {
        return Ok(CollisionTime::Infinite);
    }
    let c2 = c * c;
    let integrand = |u: f64| {
        let x = u * u;
        let a = 2.0 - c2 * (1.0 + (-x).exp());
        if u == 0.0 {
            return 2.0 / (2.0 - 2.0 * c2).sqrt();
        }
        2.0 * u / (a * one_minus_exp_neg(x)).sqrt()
    };
    let r = quad::integrate(integrand, s_end.sqrt(), s0.sqrt(), 1e-15, 1e-13)?;
    Ok(CollisionTime::Finite(r.value))
}

/// Time for the gap to close completely, from `s0`, with `|c| <= 1`.
pub fn collision_time(s0: f64, c: f64) -> Result<CollisionTime> {
    time_to_gap(s0, c, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Plus,
    Minus,
}

/// The unit velocity field tangent to colliding geodesics with `g(X, V) = +-c`,
/// as components `(dq_1, dq_2)` at gap `s > 0`.
pub fn v_c_field(s: f64, c: f64, branch: Branch) -> Result<[f64; 2]> {
    let slack = shell_check(s, c)?;
    let e = (-s).exp();
    let r = (slack * one_minus_exp_neg(s)).sqrt();
    let along = match branch {
        Branch::Plus => c * (1.0 + e),
        Branch::Minus => -c * (1.0 + e),
    };
    Ok([0.5 * (along - r), 0.5 * (along + r)])
}

/// `V_c^{+-}` at arbitrary positions. On `q_1 > q_2` this is [`v_c_field`];
/// on `q_1 < q_2` the field is defined by the reflection
/// `V^{+-}(q_1, q_2) = swap(V^{-+}(q_2, q_1))`.
pub fn v_c_at(q1: f64, q2: f64, c: f64, branch: Branch) -> Result<[f64; 2]> {
    if q1 > q2 {
        return v_c_field(q1 - q2, c, branch);
    }
    if q1 == q2 {
        return Err(Error::Domain("V_c is not defined on the diagonal".into()));
    }
    let other = match branch {
        Branch::Plus => Branch::Minus,
        Branch::Minus => Branch::Plus,
    };
    let v = v_c_field(q2 - q1, c, other)?;
    Ok([v[1], v[0]])
}

/// One point of a classifier-versus-simulation sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub p1: f64,
    pub p2: f64,
    pub predicted: bool,
    pub simulated: bool,
    /// `sqrt(2 H_1) - |H_0|`, normalized by `sqrt(2 H_1)`.
    pub margin: f64,
}

impl GridPoint {
    pub fn agrees(&self) -> bool {
        self.predicted == self.simulated
    }
}

/// Runs the two-peakon flow from `q = (s0, 0)` for every `(p1, p2)` on the
/// `grid x grid` lattice of `[-pmax, pmax]^2` and compares with the classifier.
/// Points with `p = 0` are skipped (they sit on the boundary).
pub fn classification_grid(
    grid: usize,
    pmax: f64,
    s0: f64,
    t_end: f64,
    cfg: &super::IntegratorConfig,
) -> Result<Vec<GridPoint>> {
    use rayon::prelude::*;
    if grid < 2 || !(pmax > 0.0) || !(s0 > 0.0) {
        return Err(Error::Domain(format!("need grid >= 2, pmax > 0, s0 > 0 (got {grid}, {pmax}, {s0})")));
    }
    let axis: Vec<f64> = (0..grid).map(|i| -pmax + 2.0 * pmax * i as f64 / (grid - 1) as f64).collect();
    let pairs: Vec<(f64, f64)> =
        axis.iter().flat_map(|&a| axis.iter().map(move |&b| (a, b))).filter(|&(a, b)| a != 0.0 && b != 0.0).collect();
    pairs
        .into_par_iter()
        .map(|(p1, p2)| {
            let state = PeakonState::new(vec![s0, 0.0], vec![p1, p2], 0.0)?;
            let predicted = will_collide_2peakon(&state)?;
            let traj = super::integrate(&state, t_end, cfg)?;
            let scale = (2.0 * energy(&state)).sqrt();
            Ok(GridPoint {
                p1,
                p2,
                predicted,
                simulated: !traj.events().is_empty(),
                margin: boundary_margin(&state)? / scale,
            })
        })
        .collect()
}
