//! A small architecture sweep: encoder depth × width at two latent sizes,
//! written as one table per latent size.
//!
//! `cargo run --example sweep -- /tmp/sweep` (output directory).

use bie_operator::commands::{cmd_sweep, SweepConfig};

fn main() -> bie_operator::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "runs/sweep-example".into());
    let config = SweepConfig::parse(&format!(
        r#"[problem]
kind = "laplace2d"

[batch]
n_t = 4
n_y = 50
m = 300
m_eval = 4000

[train]
steps = 300

[output]
dir = "{out}"

[sweep]
layers = [1, 3]
neurons = [10, 50]
latent = [10, 50]
modes = ["fourier"]
t = 1.15
grid = 50
"#
    ))?;
    let report = cmd_sweep(&config, |c| {
        println!("p = {:>3}, {} × {:>3}: relative l2 {:.4}", c.latent, c.layers, c.neurons, c.rel_l2)
    })?;
    for table in &report.tables {
        println!("wrote {}", table.display());
    }
    Ok(())
}
