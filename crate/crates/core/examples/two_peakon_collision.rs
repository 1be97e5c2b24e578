//! Two-peakon collisions: the sign classifier, the unit-shell collision time,
//! and the dissipative merge leaving a single peakon with energy `H_0^2 / 2`.

use peakon_lab::dynamics::two_peakon::{boundary_margin, classification_grid};
use peakon_lab::dynamics::{integrate, will_collide_2peakon, IntegratorConfig};
use peakon_lab::{energy, momentum, PeakonState};

fn main() -> peakon_lab::Result<()> {
    let cfg = IntegratorConfig::default();
    for p in [[-1.0, 1.0], [-1.0, 3.0], [1.0, 1.0], [2.0, -1.0], [0.5, 2.0]] {
        let state = PeakonState::new(vec![1.0, 0.0], p.to_vec(), 0.0)?;
        let traj = integrate(&state, 20.0, &cfg)?;
        print!(
            "p = {p:>5.1?}  predicted {:<5}  margin {:>7.3}  ",
            will_collide_2peakon(&state)?,
            boundary_margin(&state)?
        );
        match traj.events().first() {
            Some(ev) => println!(
                "merged at t* = {:.6}, psi = {:.6}, energy {:.6} -> {:.6} (H_0^2/2 = {:.6})",
                ev.t_star,
                ev.psi,
                ev.energy_pre,
                ev.energy_post,
                0.5 * momentum(&state).powi(2)
            ),
            None => println!("no collision, energy {:.6} conserved to {:.1e}", energy(&state), {
                (energy(&traj.last().state) - energy(&state)).abs() / energy(&state)
            }),
        }
    }

    let grid = classification_grid(20, 2.0, 2.0, 50.0, &cfg)?;
    let agree = grid.iter().filter(|g| g.agrees()).count();
    println!("\n20x20 grid at gap 2: classifier agrees with simulation at {agree}/{} points", grid.len());
    Ok(())
}
