//! Evaluates the first integrals `H_0..H_{n-1}` of a random 4-peakon state,
//! shows they are conserved by the flow, and that they collapse to
//! `H_0^{s+1} / (s + 1)` when all peakons sit at one point.

use peakon_lab::dynamics::{integrate, IntegratorConfig};
use peakon_lab::sampling::Sampler;
use peakon_lab::{Convention, IntegralTower, PeakonState};

fn main() -> peakon_lab::Result<()> {
    let n = 4;
    let state = Sampler::positive().state(7, 0, n);
    let tower = IntegralTower::new(n, n - 1)?;
    let theorem = tower.values(&state, Convention::Theorem)?;
    let rescaled = tower.values(&state, Convention::Rescaled)?;

    let traj = integrate(&state, 10.0, &IntegratorConfig::default())?;
    let after = tower.values(&traj.last().state, Convention::Theorem)?;

    println!("q = {:.4?}\np = {:.4?}\n", state.q(), state.p());
    println!("{:>3} {:>20} {:>20} {:>12}", "s", "H_s (theorem)", "H_s (rescaled)", "drift t=10");
    for s in 0..n {
        let drift = (after[s] - theorem[s]).abs() / theorem[s].abs();
        println!("{s:>3} {:>20.14} {:>20.14} {drift:>12.2e}", theorem[s], rescaled[s]);
    }

    // near-coincident positions
    let delta = 1e-7;
    let q: Vec<f64> = (0..n).map(|i| -(i as f64) * delta).collect();
    let tight = PeakonState::new(q, state.p().to_vec(), 0.0)?;
    let h = tower.values(&tight, Convention::Theorem)?;
    let h0 = h[0];
    println!("\npeakons within {delta:e} of each other, H_0 = {h0:.6}");
    for (s, v) in h.iter().enumerate() {
        println!("  H_{s} = {v:.10}   H_0^{}/{} = {:.10}", s + 1, s + 1, h0.powi(s as i32 + 1) / (s + 1) as f64);
    }
    Ok(())
}
