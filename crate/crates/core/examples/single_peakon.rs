//! A single peakon travels at its own amplitude: `q(t) = q0 + p t`, `u = p e^{-|x - q|}`.

use peakon_lab::dynamics::{integrate, IntegratorConfig};
use peakon_lab::field::eval_u;
use peakon_lab::{energy, PeakonState};

fn main() -> peakon_lab::Result<()> {
    let state = PeakonState::new(vec![-1.0], vec![1.5], 0.0)?;
    let cfg = IntegratorConfig { output_interval: Some(1.0), ..Default::default() };
    let traj = integrate(&state, 5.0, &cfg)?;
    println!("{:>5} {:>12} {:>12} {:>12} {:>10}", "t", "q", "exact", "u(q)", "energy");
    for s in traj.samples() {
        let t = s.state.t();
        let q = s.state.q()[0];
        println!(
            "{t:>5.1} {q:>12.9} {:>12.9} {:>12.9} {:>10.6}",
            -1.0 + 1.5 * t,
            eval_u(&s.state, q),
            energy(&s.state)
        );
    }
    Ok(())
}
