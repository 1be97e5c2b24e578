//! File formats: trajectory CSV, event JSON, wave-profile CSV with a JSON sidecar.
//!
//! Numbers are written with 17 significant digits so values round-trip exactly.
//! Peakon and pair indices in files are one-based.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynamics::{ApproachSample, CollisionEvent, Trajectory};
use crate::error::Result;
use crate::field::WaveProfile;
use crate::integrals::Convention;
use crate::state::PeakonState;

/// Round-trip formatting of a float.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn header(n: usize, integrals: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=n).map(|i| format!("q{i}")));
    cols.extend((1..=n).map(|i| format!("p{i}")));
    cols.extend((0..integrals).map(|s| format!("H{s}")));
    cols.push("event".into());
    cols.join(",")
}

/// Writes `t,q1..qn,p1..pn,H0..,event`. Each change of `n` starts a new block
/// with its own header, preceded by `# merged k=<k> t*=<t> psi=<v>`.
/// Integral columns are scaled to `convention`.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, convention: Convention, mut out: W) -> Result<()> {
    let mut event_iter = traj.events().iter();
    for (b, block) in traj.blocks().into_iter().enumerate() {
        if block.is_empty() {
            continue;
        }
        if b > 0 {
            if let Some(ev) = event_iter.next() {
                writeln!(out, "# merged k={} t*={} psi={}", ev.pair + 1, fmt_f64(ev.t_star), fmt_f64(ev.psi))?;
            }
        }
        let n = block[0].state.n();
        writeln!(out, "{}", header(n, block[0].integrals.len()))?;
        for s in block {
            let mut row: Vec<String> = Vec::with_capacity(1 + 2 * n + s.integrals.len() + 1);
            row.push(fmt_f64(s.state.t()));
            row.extend(s.state.q().iter().map(|&v| fmt_f64(v)));
            row.extend(s.state.p().iter().map(|&v| fmt_f64(v)));
            row.extend(s.integrals.iter().enumerate().map(|(k, &v)| fmt_f64(v * convention.factor(k))));
            row.push(match s.event {
                Some(i) => format!("merge:{}", traj.events()[i].pair + 1),
                None => String::new(),
            });
            writeln!(out, "{}", row.join(","))?;
        }
    }
    Ok(())
}

/// Event record as written to JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub t_star: f64,
    /// One-based index of the left peakon of the merged pair.
    pub pair: usize,
    pub psi: f64,
    pub merge_gap: f64,
    pub energy_pre: f64,
    pub energy_post: f64,
    pub energy_drop: f64,
    pub momentum_pre: f64,
    pub momentum_post: f64,
    pub pre_state: PeakonState,
    pub post_state: PeakonState,
    pub xi_history: Vec<ApproachSample>,
}

impl From<&CollisionEvent> for EventRecord {
    fn from(e: &CollisionEvent) -> Self {
        Self {
            t_star: e.t_star,
            pair: e.pair + 1,
            psi: e.psi,
            merge_gap: e.merge_gap,
            energy_pre: e.energy_pre,
            energy_post: e.energy_post,
            energy_drop: e.energy_drop,
            momentum_pre: crate::state::momentum(&e.pre_state),
            momentum_post: crate::state::momentum(&e.post_state),
            pre_state: e.pre_state.clone(),
            post_state: e.post_state.clone(),
            xi_history: e.xi_history.clone(),
        }
    }
}

pub fn write_events_json<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let records: Vec<EventRecord> = traj.events().iter().map(EventRecord::from).collect();
    serde_json::to_writer_pretty(out, &records)?;
    Ok(())
}

pub fn write_profile_csv<W: Write>(profile: &WaveProfile, mut out: W) -> Result<()> {
    writeln!(out, "x,u,ux")?;
    for ((x, u), ux) in profile.x.iter().zip(&profile.u).zip(&profile.ux) {
        writeln!(out, "{},{},{}", fmt_f64(*x), fmt_f64(*u), fmt_f64(*ux))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSidecar {
    pub t: f64,
    pub n: usize,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl From<&PeakonState> for ProfileSidecar {
    fn from(s: &PeakonState) -> Self {
        Self { t: s.t(), n: s.n(), q: s.q().to_vec(), p: s.p().to_vec() }
    }
}

pub fn write_profile_sidecar<W: Write>(state: &PeakonState, out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, &ProfileSidecar::from(state))?;
    Ok(())
}

/// Parses a profile CSV back into `(x, u, ux)` rows.
pub fn read_profile_csv(text: &str) -> Result<Vec<[f64; 3]>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let vals: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| crate::error::Error::Config(format!("line {}: {e}", i + 1)))?;
        if vals.len() != 3 {
            return Err(crate::error::Error::Config(format!("line {}: expected 3 columns", i + 1)));
        }
        rows.push([vals[0], vals[1], vals[2]]);
    }
    Ok(rows)
}
