//! Classical Nyström reference solves: convergence on the unit circle and
//! on the Laplace and bi-harmonic star curves.

use bie_operator::bie::{relative_l2_real, FieldGrid, ProblemSpec};
use bie_operator::geometry::CurveFamily;
use bie_operator::oracles::nystrom_solve;

fn report(name: &str, spec: &ProblemSpec, t: f64) -> bie_operator::Result<()> {
    let grid = FieldGrid::interior(spec.curve().unwrap(), t, 80, 0.01)?;
    let pts = grid.kept_points();
    let truth: Vec<f64> = pts.chunks(2).map(|p| spec.exact_solution(p).unwrap()).collect();
    for n in [64, 128, 256, 512] {
        let sol = nystrom_solve(spec, t, n)?;
        let err = relative_l2_real(&sol.field(spec, &pts)?, &truth)?;
        println!("{name:<22} t = {t:<5} N = {n:>3}: field error {err:.3e}");
    }
    Ok(())
}

fn main() -> bie_operator::Result<()> {
    report("unit circle", &ProblemSpec::laplace_on(CurveFamily::UnitCircle)?, 0.0)?;
    report("laplace star", &ProblemSpec::laplace(), 1.15)?;
    report("bi-harmonic star", &ProblemSpec::biharmonic(), 1.35)?;
    Ok(())
}
