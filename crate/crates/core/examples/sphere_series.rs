//! Far field of the sound-soft unit sphere at k = 2π: separation of
//! variables against an axisymmetric collocation solve.

use std::f64::consts::{PI, TAU};

use bie_operator::oracles::axisym::axisym_sphere_solve;
use bie_operator::oracles::SphereSeries;

fn main() -> bie_operator::Result<()> {
    let series = SphereSeries::new(TAU)?;
    println!("series truncated at {} terms", series.n_terms());
    let colloc = axisym_sphere_solve(TAU, 48, 96)?;
    println!("{:>8} {:>26} {:>26}", "θ (deg)", "series", "collocation");
    for deg in (0..=180).step_by(20) {
        let theta = deg as f64 * PI / 180.0;
        let s = series.far_field(theta.cos());
        let c = colloc.far_field([theta.sin(), 0.0, theta.cos()]);
        println!("{deg:>8} {:>+12.6}{:>+12.6}i {:>+12.6}{:>+12.6}i", s.re, s.im, c.re, c.im);
    }
    Ok(())
}
