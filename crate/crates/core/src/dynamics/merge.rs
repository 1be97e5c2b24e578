//! Dissipative merge of a colliding pair, its inverse splitting, and the
//! regularized pair coordinates `psi = p_k + p_{k+1}`, `xi = sqrt(s) (p_k - p_{k+1})`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::PeakonState;

/// `(psi, xi)` of pair `k` (zero-based): both stay finite through a collision
/// while `p_k` and `p_{k+1}` diverge.
pub fn regularized_coords(state: &PeakonState, k: usize) -> Result<(f64, f64)> {
    let s = state.gap(k)?;
    let p = state.p();
    Ok((p[k] + p[k + 1], s.max(0.0).sqrt() * (p[k] - p[k + 1])))
}

/// Replaces pair `k` by one peakon at the midpoint carrying `p_k + p_{k+1}`.
/// Fails unless the pair's gap is at most `max_gap`.
pub fn merge(state: &PeakonState, k: usize, max_gap: f64) -> Result<PeakonState> {
    let gap = state.gap(k)?;
    if gap > max_gap {
        return Err(Error::GapTooLarge { gap, threshold: max_gap });
    }
    let (q, p) = (state.q(), state.p());
    let mut nq = Vec::with_capacity(q.len() - 1);
    let mut np = Vec::with_capacity(p.len() - 1);
    nq.extend_from_slice(&q[..k]);
    np.extend_from_slice(&p[..k]);
    nq.push(0.5 * (q[k] + q[k + 1]));
    np.push(p[k] + p[k + 1]);
    nq.extend_from_slice(&q[k + 2..]);
    np.extend_from_slice(&p[k + 2..]);
    // the midpoint lies inside (q_{k+2}, q_{k-1}) whenever the input was ordered
    Ok(PeakonState::from_parts_unchecked(nq, np, state.t()))
}

/// Result of [`split`]. Splitting is momentum-preserving but does not
/// satisfy the one-sided slope bound, so the continuation is not dissipative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitState {
    pub state: PeakonState,
    pub dissipative: bool,
}

/// Replaces peakon `k` by two peakons at `q_k + gap/2` (momentum `lambda p_k`)
/// and `q_k - gap/2` (momentum `(1 - lambda) p_k`).
pub fn split(state: &PeakonState, k: usize, lambda: f64, gap: f64) -> Result<SplitState> {
    let n = state.n();
    if k >= n {
        return Err(Error::PairIndex { k, n });
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Domain(format!("split fraction {lambda} outside [0, 1]")));
    }
    if !(gap > 0.0 && gap.is_finite()) {
        return Err(Error::Domain(format!("split gap {gap} must be positive")));
    }
    let (q, p) = (state.q(), state.p());
    let (left, right) = (q[k] + 0.5 * gap, q[k] - 0.5 * gap);
    let mut nq = q.to_vec();
    let mut np = p.to_vec();
    nq.splice(k..=k, [left, right]);
    np.splice(k..=k, [lambda * p[k], p[k] - lambda * p[k]]);
    let state = PeakonState::ordered(nq, np, state.t())?;
    Ok(SplitState { state, dissipative: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{energy, momentum};

    fn st(q: &[f64], p: &[f64]) -> PeakonState {
        PeakonState::new(q.to_vec(), p.to_vec(), 0.0).unwrap()
    }

    #[test]
    fn regularized_examples() {
        assert_eq!(regularized_coords(&st(&[1.0, 0.0], &[2.0, 2.0]), 0).unwrap(), (4.0, 0.0));
        assert_eq!(regularized_coords(&st(&[1.0, 0.0], &[3.0, 1.0]), 0).unwrap(), (4.0, 2.0));
        assert!(matches!(regularized_coords(&st(&[1.0, 0.0], &[3.0, 1.0]), 1), Err(Error::PairIndex { .. })));
    }

    #[test]
    fn merge_pair() {
        let s = st(&[1e-10, 0.0], &[-1.0, 3.0]);
        let m = merge(&s, 0, 1e-9).unwrap();
        assert_eq!(m.p(), &[2.0]);
        assert_eq!(m.q(), &[5e-11]);

        let a = merge(&st(&[1e-10, 0.0], &[-1.5, 1.5]), 0, 1e-9).unwrap();
        assert_eq!(a.p(), &[0.0]);
    }

    #[test]
    fn merge_rejects_wide_gap_and_bad_index() {
        let s = st(&[1.0, 0.0], &[-1.0, 3.0]);
        assert!(matches!(merge(&s, 0, 1e-9), Err(Error::GapTooLarge { .. })));
        assert!(matches!(merge(&s, 3, 1e-9), Err(Error::PairIndex { .. })));
    }

    #[test]
    fn three_peakon_merge_keeps_momentum_and_drops_energy() {
        let s = st(&[2.0, 1e-10, 0.0], &[0.5, -30.0, 31.0]);
        let m = merge(&s, 1, 1e-9).unwrap();
        assert_eq!(m.n(), 2);
        assert_eq!(m.q()[0], 2.0);
        assert!((momentum(&m) - momentum(&s)).abs() < 1e-12);
        assert!(energy(&m) < energy(&s));
    }

    #[test]
    fn split_examples() {
        let s = st(&[1.0, -1.0], &[2.0, 0.5]);
        let sp = split(&s, 0, 0.3, 0.2).unwrap();
        assert!(!sp.dissipative);
        assert_eq!(sp.state.n(), 3);
        assert!((momentum(&sp.state) - momentum(&s)).abs() < 1e-15);
        assert!((sp.state.q()[0] - 1.1).abs() < 1e-15 && (sp.state.q()[1] - 0.9).abs() < 1e-15);

        let full = split(&s, 0, 1.0, 1e-9).unwrap().state;
        assert!((energy(&full) - energy(&s)).abs() < 1e-8);

        assert!(matches!(split(&s, 0, 0.5, 5.0), Err(Error::Ordering { .. })));
        assert!(split(&s, 0, 1.5, 0.1).is_err());
        assert!(split(&s, 0, 0.5, -0.1).is_err());
    }

    #[test]
    fn split_then_merge_round_trip() {
        let s = st(&[1.0, 0.25, -1.0], &[2.0, -0.7, 0.5]);
        let sp = split(&s, 1, 0.4, 1e-9).unwrap().state;
        let back = merge(&sp, 1, 1e-9).unwrap();
        for (a, b) in back.q().iter().zip(s.q()) {
            assert!((a - b).abs() < 1e-15);
        }
        for (a, b) in back.p().iter().zip(s.p()) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
