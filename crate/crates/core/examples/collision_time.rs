//! Compares the quadrature collision time of a unit-energy two-peakon with the
//! time at which the integrator locates the merge.

use peakon_lab::dynamics::{collision_time, integrate, time_to_gap, unit_energy_state, IntegratorConfig};

fn main() -> peakon_lab::Result<()> {
    let cfg = IntegratorConfig { record_integrals: Some(2), ..Default::default() };
    println!(
        "{:>6} {:>6} {:>18} {:>18} {:>18} {:>10}",
        "s0", "c", "t* (s -> 0)", "t* (s -> eps)", "event t*", "rel err"
    );
    for (s0, c) in [(0.5, 0.0), (1.0, 0.0), (1.0, 0.5), (2.0, -0.3), (3.0, 0.9), (0.2, -0.9)] {
        let state = unit_energy_state(s0, c)?;
        let full = collision_time(s0, c)?.finite().expect("|c| < 1");
        let to_eps = time_to_gap(s0, c, cfg.merge_gap)?.finite().expect("|c| < 1");
        let traj = integrate(&state, 2.0 * full + 1.0, &cfg)?;
        let event = traj.events().first().map(|e| e.t_star).unwrap_or(f64::NAN);
        println!(
            "{s0:>6.2} {c:>6.2} {full:>18.12} {to_eps:>18.12} {event:>18.12} {:>10.2e}",
            (event - to_eps).abs() / to_eps
        );
    }
    Ok(())
}
