//! Splitting one peakon into two with the same total momentum. The split state
//! evolves as a conservative multipeakon but is flagged non-dissipative; merging
//! it back recovers the original up to position averaging.

use peakon_lab::dynamics::{integrate, merge, split, IntegratorConfig};
use peakon_lab::{energy, momentum, PeakonState};

fn main() -> peakon_lab::Result<()> {
    let state = PeakonState::new(vec![0.0], vec![1.0], 0.0)?;
    let cfg = IntegratorConfig::default();
    println!("original: H0 = {}, energy = {}", momentum(&state), energy(&state));

    for lambda in [1.0, 0.5, 0.0, 1.5] {
        match split(&state, 0, lambda, 0.5) {
            Ok(sp) => {
                let traj = integrate(&sp.state, 5.0, &cfg)?;
                let end = &traj.last().state;
                println!(
                    "lambda {lambda:>4}: p = {:.3?}, dissipative = {}, energy {:.6}, H0 after t=5: {:.12}, merges: {}",
                    sp.state.p(),
                    sp.dissipative,
                    energy(&sp.state),
                    momentum(end),
                    traj.events().len()
                );
            }
            Err(e) => println!("lambda {lambda:>4}: {e}"),
        }
    }

    let tiny = split(&state, 0, 0.3, cfg.merge_gap)?;
    let back = merge(&tiny.state, 0, cfg.merge_gap)?;
    println!("split at gap {:e} then merge: q = {:?}, p = {:?}", cfg.merge_gap, back.q(), back.p());
    Ok(())
}
