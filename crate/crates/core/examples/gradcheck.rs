//! Finite-difference check of the hand-written adjoints through the full
//! loss, plus the same check with a deliberately broken GeLU adjoint.

use bie_operator::autodiff::Fault;
use bie_operator::gradcheck::run_gradcheck;

fn main() -> bie_operator::Result<()> {
    for (label, fault) in [("exact adjoints", Fault::None), ("GeLU adjoint × 1.01", Fault::GeluAdjoint(1.01))] {
        let report = run_gradcheck(0, fault)?;
        println!("{label}:");
        for case in &report.cases {
            println!(
                "  {:<13} {:?}: {} parameters, max relative error {:.2e} at {}[{}]",
                case.problem.name(),
                case.fusion,
                case.parameters,
                case.max_rel_error,
                case.worst.0,
                case.worst.1
            );
        }
        println!("  {}", if report.passed() { "PASS" } else { "FAIL" });
    }
    Ok(())
}
