//! A three-peakon run with one collision. Along the approach, `p_k - p_{k+1}`
//! blows up while `psi` converges and `xi` stays bounded; after the merge the
//! two-peakon integrals are conserved and the energy has dropped.

use peakon_lab::dynamics::{integrate, IntegratorConfig};
use peakon_lab::{energy, momentum, Convention, IntegralTower, PeakonState};

fn main() -> peakon_lab::Result<()> {
    let state = PeakonState::new(vec![2.0, 0.0, -2.0], vec![1.0, -1.0, 2.0], 0.0)?;
    let traj = integrate(&state, 10.0, &IntegratorConfig::default())?;
    println!("initial: H0 = {:.12}, energy = {:.12}", momentum(&state), energy(&state));

    for ev in traj.events() {
        println!("\nmerge of pair ({}, {}) at t* = {:.9}", ev.pair + 1, ev.pair + 2, ev.t_star);
        println!("{:>14} {:>14} {:>14} {:>14}", "gap", "p_k - p_k+1", "psi", "xi");
        let step = (ev.xi_history.len() / 8).max(1);
        for a in ev.xi_history.iter().step_by(step).chain(ev.xi_history.last()) {
            let dp = a.xi / a.gap.sqrt();
            println!("{:>14.3e} {:>14.4e} {:>14.9} {:>14.9}", a.gap, dp, a.psi, a.xi);
        }
        println!(
            "H0 {:.12} -> {:.12}, energy {:.9} -> {:.9} (drop {:.3e})",
            momentum(&ev.pre_state),
            momentum(&ev.post_state),
            ev.energy_pre,
            ev.energy_post,
            ev.energy_drop
        );
    }

    let end = &traj.last().state;
    let tower = IntegralTower::new(end.n(), end.n() - 1)?;
    let post = traj.events().last().map(|e| &e.post_state).unwrap_or(&state);
    let a = tower.values(post, Convention::Theorem)?;
    let b = tower.values(end, Convention::Theorem)?;
    println!("\nafter the last merge, n = {}:", end.n());
    for (s, (x, y)) in a.iter().zip(&b).enumerate() {
        println!("  H_{s}: {x:.12} -> {y:.12} at t = {}", end.t());
    }
    Ok(())
}
