//! Sound-soft scattering of e^{ikz} by the hemisphere pair: train briefly,
//! then compare the learned far field at t = 0 with the sphere series and
//! print how it moves as the halves separate.
//!
//! `cargo run --example helmholtz_far_field -- 500` (steps, default 200).

use bie_operator::bie::{far_field, lat_lon_directions, relative_l2, ProblemKind};
use bie_operator::checkpoint::new_trainer;
use bie_operator::config::RunConfig;
use bie_operator::oracles::SphereSeries;

fn main() -> bie_operator::Result<()> {
    let steps: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let mut cfg = RunConfig::defaults(ProblemKind::Helmholtz3d);
    cfg.batch.n_y = Some(400);
    cfg.batch.m = Some(8000);
    let spec = cfg.problem_spec()?;
    let mut trainer = new_trainer(&cfg)?;
    trainer.run_to(steps, |_, rec| {
        if (rec.step + 1) % 50 == 0 {
            println!("step {:>5}  loss {:.4e}", rec.step + 1, rec.loss);
        }
        Ok(())
    })?;

    let dirs: Vec<[f64; 3]> = lat_lon_directions(18, 36).into_iter().map(|d| d.2).collect();
    let series = SphereSeries::new(spec.wavenumber)?;
    let exact = series.far_field_at(&dirs);
    let mut previous: Option<Vec<_>> = None;
    for t in [0.0, 0.1, 0.2, 0.3, 0.4, 0.5] {
        let ff = far_field(&trainer.model, &spec, t, &dirs, cfg.m_eval(), 0)?;
        let forward = ff[0];
        let mut line = format!("t = {t:.1}: u∞(+z) ≈ {:+.4}{:+.4}i", forward.re, forward.im);
        if t == 0.0 {
            line += &format!(", relative l2 vs series {:.4}", relative_l2(&ff, &exact)?);
        }
        if let Some(p) = &previous {
            line += &format!(", change from previous t {:.4}", relative_l2(&ff, p)?);
        }
        println!("{line}");
        previous = Some(ff);
    }
    Ok(())
}
