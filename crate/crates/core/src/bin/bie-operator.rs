use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bie_operator::checkpoint::Checkpoint;
use bie_operator::commands::{
    cmd_eval, cmd_far_field, cmd_gradcheck, cmd_oracle, cmd_sweep, cmd_train, SweepConfig,
};
use bie_operator::config::RunConfig;
use bie_operator::error::read_text;
use bie_operator::{Error, Result};

#[derive(Parser)]
#[command(name = "bie-operator", version, about = "Boundary-only neural operators and their reference solvers")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args)]
struct Common {
    /// Overrides `train.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Record the run as deterministic. Every computation already is.
    #[arg(long)]
    deterministic: bool,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Verb {
    /// Train a model; resumes when a checkpoint is given.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Overrides `train.steps`.
        #[arg(long)]
        steps: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Field on a masked grid, with the error when the truth is known.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        t: f64,
        /// Points per side.
        #[arg(long, default_value_t = 200)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Far field on a latitude-longitude grid.
    FarField {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 36)]
        n_theta: usize,
        #[arg(long, default_value_t = 72)]
        n_phi: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and score every cell of a hyper-parameter grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `train.steps` for every cell.
        #[arg(long)]
        steps: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Reference solution files for a config's problem.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        t: f64,
        /// Nyström nodes in 2D, collocation rings for the sphere.
        #[arg(long, default_value_t = 512)]
        n: usize,
        #[arg(long, default_value_t = 200)]
        grid: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Finite-difference check of the loss gradient on width-10 models.
    Gradcheck {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

fn apply(cfg: &mut RunConfig, common: &Common) {
    if let Some(seed) = common.seed {
        cfg.train.seed = seed;
    }
    if common.deterministic {
        cfg.train.deterministic = true;
    }
    if let Some(out) = &common.out {
        cfg.output.dir = out.clone();
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.verb {
        Verb::Train {
            config,
            checkpoint,
            steps,
            common,
        } => {
            let resume = checkpoint.as_deref().map(Checkpoint::load).transpose()?;
            let mut cfg = match (&config, &resume) {
                (Some(path), _) => RunConfig::load(path)?,
                (None, Some(ck)) => ck.config.clone(),
                (None, None) => return Err(Error::Argument("train needs --config or --checkpoint".into())),
            };
            apply(&mut cfg, &common);
            if let Some(steps) = steps {
                cfg.train.steps = steps;
            }
            let outcome = cmd_train(&cfg, resume.as_ref())?;
            println!(
                "step {} loss {} checkpoint {} trace {}",
                outcome.final_step,
                outcome.last_loss.map_or("-".into(), |l| format!("{l:e}")),
                outcome.checkpoint.display(),
                outcome.trace.display()
            );
        }
        Verb::Eval { checkpoint, t, grid, out } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let out = out.unwrap_or_else(|| ck.config.output.dir.clone());
            let r = cmd_eval(&ck, t, grid, &out)?;
            match r.rel_l2 {
                Some(e) => println!("{} points, relative l2 {e:.6e}, wrote {}", r.points, r.path.display()),
                None => println!("{} points, wrote {}", r.points, r.path.display()),
            }
        }
        Verb::FarField {
            checkpoint,
            t,
            n_theta,
            n_phi,
            out,
        } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let out = out.unwrap_or_else(|| ck.config.output.dir.clone());
            let r = cmd_far_field(&ck, t, n_theta, n_phi, &out)?;
            match r.rel_l2 {
                Some(e) => println!("relative l2 vs series {e:.6e}, wrote {}", r.path.display()),
                None => println!("wrote {}", r.path.display()),
            }
        }
        Verb::Sweep { config, steps, common } => {
            let mut cfg = SweepConfig::parse(&read_text(&config)?)?;
            if let Some(seed) = common.seed {
                cfg.train.seed = seed;
            }
            if common.deterministic {
                cfg.train.deterministic = true;
            }
            if let Some(out) = common.out {
                cfg.output.dir = out;
            }
            if let Some(steps) = steps {
                cfg.train.steps = steps;
            }
            let r = cmd_sweep(&cfg, |c| {
                println!(
                    "{:?} p={} layers={} neurons={} relative l2 {:.4e}",
                    c.mode, c.latent, c.layers, c.neurons, c.rel_l2
                )
            })?;
            for t in &r.tables {
                println!("wrote {}", t.display());
            }
            println!("wrote {}", r.runs.display());
        }
        Verb::Oracle {
            config,
            t,
            n,
            grid,
            common,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            apply(&mut cfg, &common);
            let r = cmd_oracle(&cfg, t, n, grid, &cfg.output.dir)?;
            println!("relative l2 {:.6e}", r.rel_l2);
            for f in &r.files {
                println!("wrote {}", f.display());
            }
        }
        Verb::Gradcheck { config, common } => {
            let seed = match (common.seed, &config) {
                (Some(s), _) => s,
                (None, Some(path)) => RunConfig::load(path)?.train.seed,
                (None, None) => 0,
            };
            let report = cmd_gradcheck(seed)?;
            for c in &report.cases {
                println!(
                    "{:?} {:?} parameters {} max relative error {:.3e} at {}[{}]",
                    c.problem, c.fusion, c.parameters, c.max_rel_error, c.worst.0, c.worst.1
                );
            }
            let verdict = if report.passed() { "PASS" } else { "FAIL" };
            println!(
                "{verdict}: max relative error {:.3e} (tolerance {:.0e})",
                report.max_rel_error(),
                report.tolerance
            );
            return Ok(report.passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
