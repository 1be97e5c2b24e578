//! The peakon flow
//!
//! ```text
//! q_i' = sum_j p_j e^{-|q_i - q_j|}
//! p_i' = sum_j p_i p_j sign(q_i - q_j) e^{-|q_i - q_j|}
//! ```
//!
//! integrated with adaptive Dormand–Prince steps. Every accepted step is
//! scanned for a gap crossing the merge threshold; the crossing is located on
//! the dense output and the pair is merged before integration resumes.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::merge::{merge, regularized_coords};
use crate::error::{Error, Result};
use crate::integrals::{Convention, IntegralTower};
use crate::num::sign;
use crate::ode::{bisect_crossing, DenseSegment, Dopri5, OdeError, StepControl};
use crate::state::{energy, energy_regularized, momentum, PeakonState};

/// `(q', p')` at a state.
pub fn rhs(state: &PeakonState) -> (Vec<f64>, Vec<f64>) {
    let n = state.n();
    let mut dq = vec![0.0; n];
    let mut dp = vec![0.0; n];
    rhs_into(state.q(), state.p(), &mut dq, &mut dp);
    (dq, dp)
}

/// Accumulates pairwise terms so that the momentum rates cancel in pairs.
pub(crate) fn rhs_into(q: &[f64], p: &[f64], dq: &mut [f64], dp: &mut [f64]) {
    let n = q.len();
    dq[..n].copy_from_slice(p);
    dp[..n].iter_mut().for_each(|x| *x = 0.0);
    for i in 0..n {
        for j in i + 1..n {
            let d = q[i] - q[j];
            let e = (-d.abs()).exp();
            dq[i] += p[j] * e;
            dq[j] += p[i] * e;
            let t = p[i] * p[j] * sign(d) * e;
            dp[i] += t;
            dp[j] -= t;
        }
    }
}

fn phase_rhs(y: &[f64], dy: &mut [f64]) {
    let n = y.len() / 2;
    let (q, p) = y.split_at(n);
    let (dq, dp) = dy.split_at_mut(n);
    rhs_into(q, p, dq, dp);
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on the step size; `None` means unbounded.
    pub max_step: Option<f64>,
    /// Gap at which a pair is merged.
    pub merge_gap: f64,
    /// Steps whose minimum gap falls below this are left out of the energy
    /// drift statistic.
    pub sign_guard: f64,
    pub max_steps: usize,
    /// Record samples on a uniform time grid instead of at every step.
    pub output_interval: Option<f64>,
    /// Cap on the number of integrals `H_0, H_1, ...` recorded per sample
    /// (all `n` of them when `None`).
    pub record_integrals: Option<usize>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            max_step: None,
            merge_gap: 1e-9,
            sign_guard: 1e-3,
            max_steps: 2_000_000,
            output_interval: None,
            record_integrals: None,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive and finite (got {v})")))
            }
        };
        positive("rtol", self.rtol)?;
        positive("atol", self.atol)?;
        positive("merge_gap", self.merge_gap)?;
        positive("sign_guard", self.sign_guard)?;
        if let Some(h) = self.max_step {
            positive("max_step", h)?;
        }
        if let Some(dt) = self.output_interval {
            positive("output_interval", dt)?;
        }
        if self.merge_gap < 10.0 * self.atol {
            return Err(Error::Config(format!(
                "merge_gap {:e} must be at least 10 * atol = {:e}",
                self.merge_gap,
                10.0 * self.atol
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be positive".into()));
        }
        Ok(())
    }

    fn control(&self) -> StepControl {
        StepControl { rtol: self.rtol, atol: self.atol, max_step: self.max_step.unwrap_or(f64::INFINITY) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub state: PeakonState,
    /// `H_0, H_1, ...` in the theorem convention.
    pub integrals: Vec<f64>,
    /// Index into [`Trajectory::events`] if this is the last sample before a merge.
    pub event: Option<usize>,
}

/// Pair quantities recorded on the approach to a collision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproachSample {
    pub t: f64,
    pub gap: f64,
    pub psi: f64,
    pub xi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    pub t_star: f64,
    /// Zero-based index of the left peakon of the merged pair.
    pub pair: usize,
    pub psi: f64,
    /// Gap at the moment of merging (at most the merge threshold).
    pub merge_gap: f64,
    pub xi_history: Vec<ApproachSample>,
    pub pre_state: PeakonState,
    pub post_state: PeakonState,
    pub energy_pre: f64,
    pub energy_post: f64,
    pub energy_drop: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    /// Largest relative energy change over one step, away from collisions.
    pub max_step_energy_drift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    samples: Vec<Sample>,
    block_starts: Vec<usize>,
    events: Vec<CollisionEvent>,
    segments: Vec<DenseSegment>,
    stats: IntegrationStats,
}

impl Trajectory {
    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn events(&self) -> &[CollisionEvent] {
        &self.events
    }

    pub fn stats(&self) -> &IntegrationStats {
        &self.stats
    }

    /// Samples grouped by constant peakon number.
    pub fn blocks(&self) -> Vec<&[Sample]> {
        let mut out = Vec::with_capacity(self.block_starts.len());
        for (i, &start) in self.block_starts.iter().enumerate() {
            let end = self.block_starts.get(i + 1).copied().unwrap_or(self.samples.len());
            out.push(&self.samples[start..end]);
        }
        out
    }

    pub fn first(&self) -> &Sample {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("a trajectory has at least one sample")
    }

    pub fn t_start(&self) -> f64 {
        self.first().state.t()
    }

    pub fn t_end(&self) -> f64 {
        self.last().state.t()
    }

    /// Dense-output state at time `t`. At an event time the post-merge state is returned.
    pub fn state_at(&self, t: f64) -> Result<PeakonState> {
        if !(t >= self.t_start() && t <= self.t_end()) {
            return Err(Error::Domain(format!(
                "t = {t} outside the trajectory span [{}, {}]",
                self.t_start(),
                self.t_end()
            )));
        }
        let idx = self.segments.partition_point(|s| s.t0() <= t);
        let seg = match idx {
            0 => None,
            i => Some(&self.segments[i - 1]),
        };
        match seg {
            Some(seg) if seg.contains(t) => {
                let y = seg.eval(t);
                let n = y.len() / 2;
                Ok(PeakonState::from_parts_unchecked(y[..n].to_vec(), y[n..].to_vec(), t))
            }
            // no step covers t: the trajectory is a single point or t is the start
            _ => Ok(self.last_sample_at_or_before(t).state.clone().with_time(t)),
        }
    }

    fn last_sample_at_or_before(&self, t: f64) -> &Sample {
        let idx = self.samples.partition_point(|s| s.state.t() <= t);
        &self.samples[idx.saturating_sub(1)]
    }

    /// Copy with every momentum (samples and dense output) multiplied by `lambda`,
    /// positions untouched. No longer a solution unless `lambda = 1`.
    pub fn with_scaled_momenta(&self, lambda: f64) -> Self {
        let mut out = self.clone();
        for s in &mut out.samples {
            s.state = s.state.with_scaled_momenta(lambda);
        }
        for seg in &mut out.segments {
            let n = seg.dim() / 2;
            let scale: Vec<f64> = (0..2 * n).map(|i| if i < n { 1.0 } else { lambda }).collect();
            *seg = seg.scaled(&scale);
        }
        out
    }

    /// Times of all recorded collisions.
    pub fn event_times(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.t_star).collect()
    }
}

struct Recorder {
    towers: HashMap<usize, IntegralTower>,
    cap: Option<usize>,
}

impl Recorder {
    fn integrals(&mut self, state: &PeakonState) -> Result<Vec<f64>> {
        let n = state.n();
        let count = self.cap.map_or(n, |c| c.min(n));
        if count == 0 {
            return Ok(Vec::new());
        }
        let tower = match self.towers.entry(n) {
            std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::hash_map::Entry::Vacant(v) => v.insert(IntegralTower::new(n, count - 1)?),
        };
        tower.values(state, Convention::Theorem)
    }
}

fn state_from(y: &[f64], t: f64) -> PeakonState {
    let n = y.len() / 2;
    PeakonState::from_parts_unchecked(y[..n].to_vec(), y[n..].to_vec(), t)
}

fn ode_error(e: OdeError, last: &[f64], t_last: f64) -> Error {
    let state = Box::new(state_from(last, t_last));
    match e {
        OdeError::StepUnderflow { t, h } => Error::StepUnderflow { t, h, state },
        OdeError::NonFinite { t } => Error::NonFiniteState { t, state },
    }
}

/// Leftmost pair whose gap is at most `eps`.
fn pending_pair(state: &PeakonState, eps: f64) -> Option<usize> {
    state.gaps().position(|g| g <= eps)
}

/// Integrates from `state` to `t_end`, merging pairs whose gap reaches
/// `cfg.merge_gap` while shrinking.
pub fn integrate(state: &PeakonState, t_end: f64, cfg: &IntegratorConfig) -> Result<Trajectory> {
    cfg.validate()?;
    if !(t_end >= state.t()) || !t_end.is_finite() {
        return Err(Error::Config(format!("t_end = {t_end} must be finite and not before t0 = {}", state.t())));
    }
    let eps = cfg.merge_gap;
    let mut rec = Recorder { towers: HashMap::new(), cap: cfg.record_integrals };
    let mut traj = Trajectory {
        samples: Vec::new(),
        block_starts: vec![0],
        events: Vec::new(),
        segments: Vec::new(),
        stats: IntegrationStats::default(),
    };

    let mut current = state.clone();
    let integrals = rec.integrals(&current)?;
    traj.samples.push(Sample { state: current.clone(), integrals, event: None });
    // data that starts inside the merge threshold is merged immediately
    if pending_pair(&current, eps).is_some() {
        current = merge_all(&mut traj, &mut rec, current, eps)?;
    }

    let mut total_steps = 0usize;
    while current.t() < t_end {
        let n = current.n();
        let t0 = current.t();
        let mut stepper = Dopri5::new(phase_rhs, t0, current.phase_point(), cfg.control());
        let mut next_output = cfg.output_interval.map(|dt| t0 + dt);
        let mut merged_state = None;

        while stepper.t() < t_end {
            total_steps += 1;
            if total_steps > cfg.max_steps {
                return Err(Error::TooManySteps(cfg.max_steps));
            }
            let (t_prev, y_prev) = (stepper.t(), stepper.y().to_vec());
            let seg = stepper.step(t_end).map_err(|e| ode_error(e, &y_prev, t_prev))?;
            traj.stats.accepted += 1;

            let hit = locate_crossing(&seg, n, eps, cfg.atol);
            let seg = match hit {
                Some((ts, _)) => seg.truncated(ts),
                None => seg,
            };
            let keep_end = hit.is_some() || seg.t1() >= t_end;
            record_outputs(&mut traj, &mut rec, &seg, &mut next_output, cfg, keep_end)?;
            track_drift(&mut traj.stats, &seg, cfg.sign_guard);
            traj.segments.push(seg);

            if let Some((ts, _)) = hit {
                let pre = traj.last().state.clone();
                debug_assert_eq!(pre.t(), ts);
                merged_state = Some(merge_all(&mut traj, &mut rec, pre, eps)?);
                break;
            }
        }
        traj.stats.rejected += stepper.rejected;
        match merged_state {
            Some(s) => current = s,
            None => break,
        }
    }
    Ok(traj)
}

/// Earliest time in the step at which some gap falls to `eps` while shrinking.
fn locate_crossing(seg: &DenseSegment, n: usize, eps: f64, tol: f64) -> Option<(f64, usize)> {
    let start = seg.start();
    let end = seg.end();
    let mut hit: Option<(f64, usize)> = None;
    for k in 0..n.saturating_sub(1) {
        let g0 = start[k] - start[k + 1];
        let g1 = end[k] - end[k + 1];
        if !(g0 > eps && g1 <= eps) {
            continue;
        }
        let gap = |t: f64| seg.eval_component(t, k) - seg.eval_component(t, k + 1) - eps;
        let ts = bisect_crossing(seg.t0(), seg.t1(), tol, gap);
        // the gap must be closing at the crossing
        let y = seg.eval(ts);
        let (dq, _) = rhs(&state_from(&y, ts));
        if dq[k] - dq[k + 1] >= 0.0 {
            continue;
        }
        if hit.is_none_or(|(th, _)| ts < th) {
            hit = Some((ts, k));
        }
    }
    hit
}

/// Pushes the samples that fall inside `seg`. With a fixed output interval the
/// step end is kept only when `keep_end` is set (event or final time).
fn record_outputs(
    traj: &mut Trajectory,
    rec: &mut Recorder,
    seg: &DenseSegment,
    next_output: &mut Option<f64>,
    cfg: &IntegratorConfig,
    keep_end: bool,
) -> Result<()> {
    let t1 = seg.t1();
    let mut push = |traj: &mut Trajectory, t: f64| -> Result<()> {
        if t <= traj.last().state.t() {
            return Ok(());
        }
        let y = seg.eval(t);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { t, state: Box::new(traj.last().state.clone()) });
        }
        let state = state_from(&y, t);
        let integrals = rec.integrals(&state)?;
        traj.samples.push(Sample { state, integrals, event: None });
        Ok(())
    };
    match (cfg.output_interval, next_output.as_mut()) {
        (Some(dt), Some(next)) => {
            while *next < t1 {
                push(traj, *next)?;
                *next += dt;
            }
            if keep_end {
                push(traj, t1)?;
            }
        }
        _ => push(traj, t1)?,
    }
    Ok(())
}

fn track_drift(stats: &mut IntegrationStats, seg: &DenseSegment, guard: f64) {
    let (a, b) = (state_from(seg.start(), seg.t0()), state_from(&seg.eval(seg.t1()), seg.t1()));
    if a.min_gap() < guard || b.min_gap() < guard {
        return;
    }
    let (ea, eb) = (energy(&a), energy(&b));
    let drift = (eb - ea).abs() / ea.abs().max(f64::MIN_POSITIVE);
    stats.max_step_energy_drift = stats.max_step_energy_drift.max(drift);
}

/// Merges pairs at or below `eps`, leftmost first, recording one event per merge.
fn merge_all(traj: &mut Trajectory, rec: &mut Recorder, mut state: PeakonState, eps: f64) -> Result<PeakonState> {
    while let Some(k) = pending_pair(&state, eps) {
        let (psi, _) = regularized_coords(&state, k)?;
        let post = merge(&state, k, eps)?;
        let energy_pre = energy_regularized(&state, k)?;
        let energy_post = energy(&post);
        debug_assert!((momentum(&post) - momentum(&state)).abs() <= 1e-12 * (1.0 + momentum(&state).abs()));

        let block_start = *traj.block_starts.last().expect("non-empty");
        let xi_history = traj.samples[block_start..]
            .iter()
            .filter(|s| s.state.n() == state.n())
            .filter_map(|s| {
                let (psi, xi) = regularized_coords(&s.state, k).ok()?;
                Some(ApproachSample { t: s.state.t(), gap: s.state.gap(k).ok()?, psi, xi })
            })
            .collect();

        let idx = traj.events.len();
        traj.events.push(CollisionEvent {
            t_star: state.t(),
            pair: k,
            psi,
            merge_gap: state.gap(k)?,
            xi_history,
            pre_state: state.clone(),
            post_state: post.clone(),
            energy_pre,
            energy_post,
            energy_drop: (energy_pre - energy_post).max(0.0),
        });
        if let Some(last) = traj.samples.last_mut() {
            if last.state == state {
                last.event = Some(idx);
            }
        }
        traj.block_starts.push(traj.samples.len());
        let integrals = rec.integrals(&post)?;
        traj.samples.push(Sample { state: post.clone(), integrals, event: None });
        state = post;
    }
    Ok(state)
}
