use peakon_lab::bihamiltonian::{apply_bivector, eval_p1};
use peakon_lab::dynamics::{integrate, merge, regularized_coords, rhs, split, IntegratorConfig};
use peakon_lab::sampling::Sampler;
use peakon_lab::{energy, grad_h, momentum, Convention, IntegralTower, PeakonState};

fn st(q: &[f64], p: &[f64]) -> PeakonState {
    PeakonState::new(q.to_vec(), p.to_vec(), 0.0).unwrap()
}

#[test]
fn rhs_two_peakon_example() {
    let (s, a): (f64, f64) = (0.7, 1.3);
    let e = (-s).exp();
    let (dq, dp) = rhs(&st(&[s, 0.0], &[a, a]));
    assert!((dq[0] - (a + a * e)).abs() < 1e-15);
    assert!((dq[1] - (a * e + a)).abs() < 1e-15);
    assert!((dp[0] - a * a * e).abs() < 1e-15);
    assert!((dp[1] + a * a * e).abs() < 1e-15);
}

#[test]
fn rhs_is_the_hamiltonian_vector_field() {
    for n in 1..=5 {
        for state in Sampler::default().states(21, 10, n) {
            let (dq, dp) = rhs(&state);
            let v = apply_bivector(&eval_p1(n), &grad_h(1, &state).unwrap()).unwrap();
            for i in 0..n {
                assert!((dq[i] - v[i]).abs() < 1e-12 * (1.0 + dq[i].abs()));
                assert!((dp[i] - v[n + i]).abs() < 1e-12 * (1.0 + dp[i].abs()));
            }
        }
    }
}

#[test]
fn overtaking_pair_conserves_integrals() {
    let state = st(&[0.0, -3.0], &[1.0, 1.0]);
    let traj = integrate(&state, 20.0, &IntegratorConfig::default()).unwrap();
    assert!(traj.events().is_empty());
    let e0 = energy(&state);
    for s in traj.samples() {
        assert!((momentum(&s.state) - 2.0).abs() < 1e-12);
        assert!((energy(&s.state) - e0).abs() / e0 < 1e-8);
    }
}

#[test]
fn peakon_antipeakon_ends_at_rest() {
    let traj = integrate(&st(&[1.0, 0.0], &[-1.0, 1.0]), 5.0, &IntegratorConfig::default()).unwrap();
    assert_eq!(traj.events().len(), 1);
    assert_eq!(traj.last().state.p(), &[0.0]);
    let ev = &traj.events()[0];
    assert_eq!(ev.pair, 0);
    assert!(ev.merge_gap <= IntegratorConfig::default().merge_gap);
    assert!(ev.energy_drop > 0.0);
}

#[test]
fn merge_examples() {
    let m = merge(&st(&[1e-10, 0.0], &[-1.0, 3.0]), 0, 1e-9).unwrap();
    assert_eq!(m.p(), &[2.0]);
    assert_eq!(m.q(), &[5e-11]);
    assert!(merge(&st(&[1.0, 0.0], &[-1.0, 3.0]), 0, 1e-9).is_err());
    assert!(merge(&st(&[1e-10, 0.0], &[-1.0, 3.0]), 1, 1e-9).is_err());
}

#[test]
fn three_peakon_merge_dissipates() {
    let state = st(&[2.0, 0.0, -2.0], &[1.0, -1.0, 2.0]);
    let traj = integrate(&state, 5.0, &IntegratorConfig::default()).unwrap();
    let ev = traj.events().first().expect("pair (2, 3) collides");
    assert_eq!(ev.pair, 1);
    assert_eq!(ev.post_state.n(), 2);
    assert!((momentum(&ev.post_state) - momentum(&ev.pre_state)).abs() < 1e-12);
    assert!(ev.energy_post < ev.energy_pre);
    assert_eq!(ev.post_state.q()[0], ev.pre_state.q()[0]);
    assert_eq!(ev.post_state.p()[0], ev.pre_state.p()[0]);
}

#[test]
fn merge_time_and_trajectory_blocks() {
    let traj = integrate(&st(&[1.0, 0.0, -3.0], &[-1.5, 1.0, 0.5]), 10.0, &IntegratorConfig::default()).unwrap();
    let blocks = traj.blocks();
    assert_eq!(blocks.len(), traj.events().len() + 1);
    for (b, block) in blocks.iter().enumerate() {
        assert!(block.iter().all(|s| s.state.n() == 3 - b));
        assert!(block.windows(2).all(|w| w[1].state.t() > w[0].state.t()));
    }
    for (ev, next) in traj.events().iter().zip(&blocks[1..]) {
        assert_eq!(next[0].state.t(), ev.t_star);
        assert_eq!(traj.state_at(ev.t_star).unwrap().n(), ev.post_state.n());
    }
}

#[test]
fn split_examples() {
    let state = st(&[0.5, -1.0], &[1.0, 2.0]);
    let e = energy(&state);
    let near = split(&state, 1, 1.0, 1e-8).unwrap();
    assert!(!near.dissipative);
    assert!((energy(&near.state) - e).abs() < 1e-7);

    let gap = 1e-9;
    let sp = split(&state, 1, 0.3, gap).unwrap();
    assert_eq!(momentum(&sp.state), momentum(&state));
    let back = merge(&sp.state, 1, gap * 1.000001).unwrap();
    assert_eq!(back.p(), state.p());
    assert!((back.q()[1] - state.q()[1]).abs() < 1e-15);

    let wide = split(&state, 0, 0.5, 0.3).unwrap();
    let traj = integrate(&wide.state, 3.0, &IntegratorConfig::default()).unwrap();
    for s in traj.samples() {
        assert!((momentum(&s.state) - momentum(&state)).abs() < 1e-12);
    }
    assert!(split(&state, 0, 0.5, 3.0).is_err());
}

#[test]
fn regularized_coordinate_examples() {
    assert_eq!(regularized_coords(&st(&[1.0, 0.0], &[0.7, 0.7]), 0).unwrap(), (1.4, 0.0));
    assert_eq!(regularized_coords(&st(&[1.0, 0.0], &[3.0, 1.0]), 0).unwrap(), (4.0, 2.0));
}

#[test]
fn xi_stays_bounded_while_momenta_blow_up() {
    let traj = integrate(&st(&[2.0, 0.0, -2.0], &[1.0, -1.0, 2.0]), 5.0, &IntegratorConfig::default()).unwrap();
    let hist = &traj.events()[0].xi_history;
    let xi_max = hist.iter().map(|a| a.xi.abs()).fold(0.0, f64::max);
    let dp_max = hist.iter().map(|a| a.xi.abs() / a.gap.sqrt()).fold(0.0, f64::max);
    assert!(xi_max < 10.0, "{xi_max}");
    assert!(dp_max > 1e4, "{dp_max}");
}

#[test]
fn tower_conserved_for_positive_momenta() {
    let n = 5;
    let tower = IntegralTower::new(n, n - 1).unwrap();
    let state = Sampler::positive().state(3, 0, n);
    let traj = integrate(&state, 8.0, &IntegratorConfig::default()).unwrap();
    let h0 = tower.values(&state, Convention::Theorem).unwrap();
    let h1 = tower.values(&traj.last().state, Convention::Theorem).unwrap();
    for (a, b) in h0.iter().zip(&h1) {
        assert!((a - b).abs() / a.abs() < 1e-8, "{a} vs {b}");
    }
}
