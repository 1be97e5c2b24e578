//! Checks the compatible Poisson pair: Schouten-Nijenhuis brackets,
//! `P0(dH_0) = P1(dH_1)`, the recursion `S dH_s = dH_{s+1}` and involution.
//! A perturbed `P0` shows the check is not vacuous.

use peakon_lab::bihamiltonian::{
    fundamental_identity_residual, verify_involution, verify_recursion, verify_structure, verify_structure_with,
    PerturbedP0,
};
use peakon_lab::sampling::sample_state;

fn main() -> peakon_lab::Result<()> {
    let state = sample_state(1, 0, 3);
    println!("fundamental identity at one state: {:.2e}", fundamental_identity_residual(&state)?);

    for (label, report) in [
        ("sn", verify_structure(3, 50, 0, 1e-10)),
        ("recursion", verify_recursion(4, 2, 50, 0, 1e-9)?),
        ("involution", verify_involution(4, 3, 50, 0, 1e-10)?),
        ("sn perturbed", verify_structure_with(&PerturbedP0 { a: 0, b: 1, factor: 1e-3 }, 3, 20, 0, 1e-10)),
    ] {
        println!(
            "{label:<13} samples {:>4}  max residual {:>9.2e}  {}",
            report.samples,
            report.max_residual,
            if report.pass { "pass" } else { "FAIL" }
        );
    }
    Ok(())
}
