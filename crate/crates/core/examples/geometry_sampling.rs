//! Monte-Carlo boundary quadrature: curve length of the star at t = 1.15 and
//! the area of the hemisphere pair, against deterministic references.

use std::f64::consts::{PI, TAU};

use bie_operator::bie::ProblemSpec;
use bie_operator::geometry::trapezoid_length;
use bie_operator::rng::{stream, Purpose};

fn main() -> bie_operator::Result<()> {
    let spec = ProblemSpec::laplace();
    let curve = spec.curve().unwrap();
    let t = 1.15;
    let reference = trapezoid_length(curve, t, 100_000);
    println!("trapezoid length at t = {t}: {reference:.8}");
    for m in [100, 1000, 10_000, 100_000] {
        let s = curve.sample(t, m, &mut stream(0, Purpose::Test, 0, m as u64))?;
        let length = s.jacobians.iter().sum::<f64>() * s.weight();
        println!("  M = {m:>6}: {length:.6} ({:+.3}%)", 100.0 * (length / reference - 1.0));
    }

    let helm = ProblemSpec::helmholtz(TAU)?;
    for t in [0.0, 0.25, 0.5] {
        let s = helm.boundary.sample(t, 20_000, &mut stream(0, Purpose::Test, 1, 0))?;
        let area = s.jacobians.iter().sum::<f64>() * s.weight();
        println!("hemisphere pair, t = {t}: area {area:.5} (4π = {:.5})", 4.0 * PI);
    }
    Ok(())
}
