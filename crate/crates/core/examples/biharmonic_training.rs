//! Train the bi-harmonic operator (two densities) on its star family and report the interior
//! field error at three unseen shapes.
//!
//! `cargo run --example biharmonic_training -- 2000` (steps, default 1000).

use bie_operator::bie::{relative_l2, ProblemKind};
use bie_operator::checkpoint::new_trainer;
use bie_operator::commands::{evaluate_on_grid, field_grid};
use bie_operator::config::RunConfig;

fn main() -> bie_operator::Result<()> {
    let steps: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let mut cfg = RunConfig::defaults(ProblemKind::Biharmonic2d);
    cfg.batch.m = Some(1000);
    cfg.model.fourier_features = 32;
    let spec = cfg.problem_spec()?;
    let mut trainer = new_trainer(&cfg)?;
    let mut window = 0.0;
    trainer.run_to(steps, |_, rec| {
        window += rec.loss;
        if (rec.step + 1) % 100 == 0 {
            println!("step {:>6}  loss {:.4e}  lr {:.1e}", rec.step + 1, window / 100.0, rec.lr);
            window = 0.0;
        }
        Ok(())
    })?;
    for t in [1.15, 1.35, 1.45] {
        let grid = field_grid(&spec, t, 100, cfg.problem.delta)?;
        let (_, u, truth) = evaluate_on_grid(&trainer.model, &spec, t, &grid, cfg.m_eval(), 0)?;
        println!("t = {t}: relative l2 {:.4}", relative_l2(&u, &truth.unwrap())?);
    }
    Ok(())
}
