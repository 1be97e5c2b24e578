//! Writes the wave profile `u(x)` and slope of a 3-peakon state as CSV, and
//! reports the H1 norm (closed form against quadrature) and the largest slope.

use peakon_lab::export::{write_profile_csv, write_profile_sidecar};
use peakon_lab::field::{h1_norm_sq, h1_norm_sq_quadrature, oleinik_sup, profile};
use peakon_lab::{energy, PeakonState};

fn main() -> peakon_lab::Result<()> {
    let state = PeakonState::new(vec![1.5, 0.0, -1.0], vec![0.8, -0.4, 1.2], 0.0)?;
    let prof = profile(&state, -6.0, 6.0, 241)?;

    let dir = std::env::temp_dir();
    let csv = dir.join("peakon_profile.csv");
    write_profile_csv(&prof, std::fs::File::create(&csv)?)?;
    write_profile_sidecar(&state, std::fs::File::create(dir.join("peakon_profile.json"))?)?;
    println!("wrote {}", csv.display());

    println!("||u||_H1^2 closed form {:.12}", h1_norm_sq(&state));
    println!("||u||_H1^2 quadrature  {:.12}", h1_norm_sq_quadrature(&state)?);
    println!("4 * energy             {:.12}", 4.0 * energy(&state));
    println!("sup u_x                {:.12}", oleinik_sup(&state));

    let i = prof.u.iter().enumerate().fold(0, |best, (i, u)| if *u > prof.u[best] { i } else { best });
    println!("grid maximum u = {:.6} at x = {:.3}", prof.u[i], prof.x[i]);
    Ok(())
}
