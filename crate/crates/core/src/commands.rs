//! The operations behind the command-line verbs. Each returns a report and
//! writes its files into an output directory.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::autodiff::Fault;
use crate::bie::field::obstacle;
use crate::bie::{
    eval_field, far_field, lat_lon_directions, relative_l2, total_field, FieldGrid, ProblemKind, ProblemSpec,
};
use crate::checkpoint::{new_trainer, Checkpoint};
use crate::config::{line_at, BatchSection, ModelSection, OutputSection, ProblemSection, RunConfig, TrainSection};
use crate::error::{Error, Result};
use crate::files::{read_table, write_far_field_file, write_field_file, FileTag, TableWriter};
use crate::gradcheck::{run_gradcheck, GradcheckReport};
use crate::operator_net::{DecoderMode, Potential};
use crate::oracles::{axisym_sphere_solve, nystrom_solve, SphereSeries};
use crate::train::is_trace_step;

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const TRACE_FILE: &str = "loss_trace.csv";

/// Half-width of the Helmholtz slice box.
pub const SLICE_HALF_WIDTH: f64 = 4.0;

fn t_label(t: f64) -> String {
    format!("{t}")
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub checkpoint: PathBuf,
    pub trace: PathBuf,
    pub final_step: u64,
    pub trace_rows: usize,
    pub last_loss: Option<f64>,
}

/// Train from scratch, or continue from `resume` until `config.train.steps`
/// updates have been applied.
pub fn cmd_train(config: &RunConfig, resume: Option<&Checkpoint>) -> Result<TrainOutcome> {
    config.validate()?;
    let mut trainer = match resume {
        Some(ck) => {
            let same = ck.config.problem == config.problem
                && ck.config.batch == config.batch
                && ck.config.model == config.model
                && ck.config.train.seed == config.train.seed;
            if !same {
                return Err(Error::Argument(
                    "checkpoint was trained with a different problem, batch, model or seed".into(),
                ));
            }
            ck.trainer()?
        }
        None => new_trainer(config)?,
    };
    let dir = &config.output.dir;
    fs::create_dir_all(dir)?;
    let checkpoint = dir.join(CHECKPOINT_FILE);
    let trace = dir.join(TRACE_FILE);
    let tag = FileTag::new("loss-trace", config.train.seed, &config.hash());
    // A resumed run keeps the rows its predecessor wrote before the checkpoint.
    let earlier: Vec<Vec<f64>> = match resume {
        Some(ck) => read_table(&trace)
            .map(|t| t.rows.into_iter().filter(|r| r[0] < ck.step as f64).collect())
            .unwrap_or_default(),
        None => Vec::new(),
    };
    let mut writer = TableWriter::create(&trace, &tag, &["step", "loss", "lr"])?;
    for row in &earlier {
        writer.row(row)?;
    }
    let total = config.train.steps;
    let mut rows = earlier.len();
    let mut last_loss = None;
    trainer.run_to(total, |tr, rec| {
        last_loss = Some(rec.loss);
        if is_trace_step(rec.step, config.train.trace_every, total) {
            writer.row(&[rec.step as f64, rec.loss, rec.lr])?;
            writer.flush()?;
            rows += 1;
        }
        if tr.step() % config.train.checkpoint_every == 0 {
            Checkpoint::capture(config, tr).save(&checkpoint)?;
        }
        Ok(())
    })?;
    writer.finish()?;
    Checkpoint::capture(config, &trainer).save(&checkpoint)?;
    Ok(TrainOutcome {
        checkpoint,
        trace,
        final_step: trainer.step(),
        trace_rows: rows,
        last_loss,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub path: PathBuf,
    pub t: f64,
    pub points: usize,
    /// Squared-norm relative error against the analytic or series truth.
    pub rel_l2: Option<f64>,
}

/// Evaluation grid for a spec: the masked interior grid in 2D, the masked
/// `y = 0` slice of `[-4, 4]²` for the scatterer.
pub fn field_grid(spec: &ProblemSpec, t: f64, n: usize, delta: f64) -> Result<FieldGrid> {
    match spec.curve() {
        Some(curve) => FieldGrid::interior(curve, t, n, delta),
        None => {
            let h = obstacle(spec).expect("3D spec has an obstacle");
            FieldGrid::slice_y0(h, t, n, SLICE_HALF_WIDTH, delta)
        }
    }
}

/// Field values (total field for the scatterer) and the truth where one is
/// known: the manufactured solution in 2D, incident plus series field for
/// the sphere (`t = 0`).
pub fn evaluate_on_grid(
    potential: &dyn Potential,
    spec: &ProblemSpec,
    t: f64,
    grid: &FieldGrid,
    m_eval: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<Complex64>, Option<Vec<Complex64>>)> {
    if grid.kept_count() == 0 {
        return Err(Error::Argument("every grid point is masked; nothing to evaluate".into()));
    }
    let pts = grid.kept_points();
    match spec.kind {
        ProblemKind::Helmholtz3d => {
            let values = total_field(potential, spec, t, grid, m_eval, seed)?;
            let truth = if t == 0.0 {
                let series = SphereSeries::new(spec.wavenumber)?;
                Some(
                    pts.chunks(3)
                        .map(|y| spec.incident(y) + series.scattered([y[0], y[1], y[2]]))
                        .collect(),
                )
            } else {
                None
            };
            Ok((pts, values, truth))
        }
        _ => {
            let values = eval_field(potential, spec, t, &pts, m_eval, seed)?;
            let truth = pts
                .chunks(2)
                .map(|y| Complex64::new(spec.exact_solution(y).expect("2D data is analytic"), 0.0))
                .collect();
            Ok((pts, values, Some(truth)))
        }
    }
}

pub fn cmd_eval(checkpoint: &Checkpoint, t: f64, grid_n: usize, out: &Path) -> Result<EvalReport> {
    let cfg = &checkpoint.config;
    let spec = checkpoint.spec()?;
    spec.boundary.check_t(t)?;
    let model = checkpoint.model()?;
    let grid = field_grid(&spec, t, grid_n, cfg.problem.delta)?;
    let (pts, values, truth) = evaluate_on_grid(&model, &spec, t, &grid, cfg.m_eval(), cfg.train.seed)?;
    let rel_l2 = truth.as_ref().map(|tr| relative_l2(&values, tr)).transpose()?;
    fs::create_dir_all(out)?;
    let path = out.join(format!("field-t{}.csv", t_label(t)));
    let kind = if spec.kind == ProblemKind::Helmholtz3d { "total-field" } else { "field" };
    let mut tag = FileTag::new(kind, cfg.train.seed, &cfg.hash())
        .with("t", t)
        .with("step", checkpoint.step);
    if let Some(e) = rel_l2 {
        tag = tag.with("rel_l2", e);
    }
    write_field_file(&path, &tag, grid.dim, &pts, &values, truth.as_deref())?;
    Ok(EvalReport {
        path,
        t,
        points: values.len(),
        rel_l2,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FarFieldReport {
    pub path: PathBuf,
    pub t: f64,
    pub values: Vec<Complex64>,
    /// Against the series when `t = 0`.
    pub rel_l2: Option<f64>,
}

pub fn cmd_far_field(checkpoint: &Checkpoint, t: f64, n_theta: usize, n_phi: usize, out: &Path) -> Result<FarFieldReport> {
    let cfg = &checkpoint.config;
    let spec = checkpoint.spec()?;
    spec.boundary.check_t(t)?;
    if n_theta == 0 || n_phi == 0 {
        return Err(Error::Argument("direction grid must be non-empty".into()));
    }
    let model = checkpoint.model()?;
    let grid = lat_lon_directions(n_theta, n_phi);
    let dirs: Vec<[f64; 3]> = grid.iter().map(|g| g.2).collect();
    let values = far_field(&model, &spec, t, &dirs, cfg.m_eval(), cfg.train.seed)?;
    let rel_l2 = if t == 0.0 {
        let series = SphereSeries::new(spec.wavenumber)?;
        Some(relative_l2(&values, &series.far_field_at(&dirs))?)
    } else {
        None
    };
    fs::create_dir_all(out)?;
    let path = out.join(format!("far-field-t{}.csv", t_label(t)));
    let mut tag = FileTag::new("far-field", cfg.train.seed, &cfg.hash())
        .with("t", t)
        .with("step", checkpoint.step);
    if let Some(e) = rel_l2 {
        tag = tag.with("rel_l2", e);
    }
    let angles: Vec<(f64, f64)> = grid.iter().map(|g| (g.0, g.1)).collect();
    write_far_field_file(&path, &tag, &angles, &values)?;
    Ok(FarFieldReport {
        path,
        t,
        values,
        rel_l2,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleReport {
    pub files: Vec<PathBuf>,
    /// Field error against the manufactured solution (2D) or collocation
    /// far-field disagreement with the series (sphere).
    pub rel_l2: f64,
}

/// Reference solution for a config's problem: a Nyström solve with `n`
/// nodes in 2D, or the sphere series (checked against an `n`-ring
/// collocation solve) for the scatterer at `t = 0`.
pub fn cmd_oracle(config: &RunConfig, t: f64, n: usize, grid_n: usize, out: &Path) -> Result<OracleReport> {
    let spec = config.problem_spec()?;
    spec.boundary.check_t(t)?;
    let seed = config.train.seed;
    let hash = config.hash();
    fs::create_dir_all(out)?;
    if spec.kind == ProblemKind::Helmholtz3d {
        if t != 0.0 {
            return Err(Error::Argument("the series oracle exists for the sphere (t = 0) only".into()));
        }
        let k = spec.wavenumber;
        let check = axisym_sphere_solve(k, n, 2 * n)?;
        let series = SphereSeries::new(k)?;
        let grid = lat_lon_directions(grid_n, 2 * grid_n);
        let dirs: Vec<[f64; 3]> = grid.iter().map(|g| g.2).collect();
        let values = series.far_field_at(&dirs);
        let coarse: Vec<Complex64> = dirs.iter().map(|&d| check.far_field(d)).collect();
        let rel = relative_l2(&coarse, &values)?;
        let path = out.join("oracle-far-field-t0.csv");
        let tag = FileTag::new("far-field", seed, &hash)
            .with("t", 0)
            .with("oracle", "sphere-series")
            .with("terms", series.n_terms());
        let angles: Vec<(f64, f64)> = grid.iter().map(|g| (g.0, g.1)).collect();
        write_far_field_file(&path, &tag, &angles, &values)?;
        return Ok(OracleReport {
            files: vec![path],
            rel_l2: rel,
        });
    }
    let sol = nystrom_solve(&spec, t, n)?;
    let density_path = out.join(format!("oracle-density-t{}.csv", t_label(t)));
    let tag = FileTag::new("density", seed, &hash)
        .with("t", t)
        .with("oracle", "nystrom")
        .with("nodes", n);
    let mut header = vec!["alpha", "x", "y", "v"];
    if spec.kind == ProblemKind::Biharmonic2d {
        header.push("w");
    }
    let mut w = TableWriter::create(&density_path, &tag, &header)?;
    for i in 0..sol.len() {
        let p = sol.nodes.point(i);
        let mut row = vec![sol.nodes.params[i], p[0], p[1]];
        row.extend_from_slice(sol.density.row(i));
        w.row(&row)?;
    }
    w.finish()?;
    let grid = field_grid(&spec, t, grid_n, config.problem.delta)?;
    if grid.kept_count() == 0 {
        return Err(Error::Argument("every grid point is masked; nothing to evaluate".into()));
    }
    let pts = grid.kept_points();
    let values: Vec<Complex64> = sol.field(&spec, &pts)?.into_iter().map(Complex64::from).collect();
    let truth: Vec<Complex64> = pts
        .chunks(2)
        .map(|y| Complex64::from(spec.exact_solution(y).expect("2D data is analytic")))
        .collect();
    let rel = relative_l2(&values, &truth)?;
    let field_path = out.join(format!("oracle-field-t{}.csv", t_label(t)));
    let tag = FileTag::new("field", seed, &hash)
        .with("t", t)
        .with("oracle", "nystrom")
        .with("rel_l2", rel);
    write_field_file(&field_path, &tag, 2, &pts, &values, Some(&truth))?;
    Ok(OracleReport {
        files: vec![density_path, field_path],
        rel_l2: rel,
    })
}

pub fn cmd_gradcheck(seed: u64) -> Result<GradcheckReport> {
    run_gradcheck(seed, Fault::None)
}

/// Sweep description: a base run plus the grid to scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub problem: ProblemSection,
    #[serde(default)]
    pub batch: BatchSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub output: OutputSection,
    pub sweep: SweepSection,
}

/// `layers` and `neurons` are the encoder's depth and width, `latent` is
/// `p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub layers: Vec<usize>,
    pub neurons: Vec<usize>,
    pub latent: Vec<usize>,
    pub modes: Vec<DecoderMode>,
    /// Evaluation parameter.
    pub t: f64,
    /// Side of the evaluation grid.
    pub grid: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            layers: vec![1, 3, 5, 7],
            neurons: vec![10, 50, 100, 150],
            latent: vec![10, 50, 100, 150],
            modes: vec![DecoderMode::Fourier, DecoderMode::Plain],
            t: 1.15,
            grid: 100,
        }
    }
}

impl SweepConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config {
            line: e.span().map_or(0, |s| line_at(text, s.start)),
            message: e.message().to_string(),
        })?;
        cfg.base().validate()?;
        let s = &cfg.sweep;
        if s.layers.is_empty() || s.neurons.is_empty() || s.latent.is_empty() || s.modes.is_empty() {
            return Err(Error::Config {
                line: 0,
                message: "every sweep axis needs at least one value".into(),
            });
        }
        Ok(cfg)
    }

    pub fn base(&self) -> RunConfig {
        RunConfig {
            problem: self.problem.clone(),
            batch: self.batch.clone(),
            model: self.model.clone(),
            train: self.train.clone(),
            output: self.output.clone(),
        }
    }

    /// Config of one cell.
    pub fn cell(&self, mode: DecoderMode, latent: usize, layers: usize, neurons: usize) -> RunConfig {
        let mut cfg = self.base();
        cfg.model.decoder_mode = mode;
        cfg.model.latent = latent;
        cfg.model.encoder_depth = layers;
        cfg.model.encoder_width = neurons;
        cfg
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepCell {
    pub mode: DecoderMode,
    pub latent: usize,
    pub layers: usize,
    pub neurons: usize,
    pub rel_l2: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub cells: Vec<SweepCell>,
    /// One layers × neurons table per (mode, p).
    pub tables: Vec<PathBuf>,
    /// One row per cell.
    pub runs: PathBuf,
}

fn mode_name(mode: DecoderMode) -> &'static str {
    match mode {
        DecoderMode::Fourier => "fourier",
        DecoderMode::Plain => "plain",
    }
}

/// Train every cell for `train.steps` steps and record the relative error
/// at `sweep.t`; `on_cell` sees each result as it lands.
pub fn cmd_sweep(config: &SweepConfig, mut on_cell: impl FnMut(&SweepCell)) -> Result<SweepReport> {
    let s = &config.sweep;
    let out = &config.output.dir;
    fs::create_dir_all(out)?;
    let mut cells = Vec::new();
    let mut tables = Vec::new();
    for &mode in &s.modes {
        for &latent in &s.latent {
            let path = out.join(format!("sweep-{}-p{latent}.csv", mode_name(mode)));
            let base = config.cell(mode, latent, s.layers[0], s.neurons[0]);
            let tag = FileTag::new("sweep-table", base.train.seed, &base.hash())
                .with("mode", mode_name(mode))
                .with("p", latent)
                .with("t", s.t)
                .with("steps", base.train.steps);
            let mut header = vec!["layers".to_string()];
            header.extend(s.neurons.iter().map(|n| format!("neurons_{n}")));
            let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
            let mut w = TableWriter::create(&path, &tag, &header_refs)?;
            for &layers in &s.layers {
                let mut row = vec![layers as f64];
                for &neurons in &s.neurons {
                    let cfg = config.cell(mode, latent, layers, neurons);
                    let mut trainer = new_trainer(&cfg)?;
                    trainer.run_to(cfg.train.steps, |_, _| Ok(()))?;
                    let spec = &trainer.spec;
                    let grid = field_grid(spec, s.t, s.grid, cfg.problem.delta)?;
                    let (_, values, truth) =
                        evaluate_on_grid(&trainer.model, spec, s.t, &grid, cfg.m_eval(), cfg.train.seed)?;
                    let truth = truth.ok_or_else(|| Error::Argument("sweep needs a problem with known truth".into()))?;
                    let cell = SweepCell {
                        mode,
                        latent,
                        layers,
                        neurons,
                        rel_l2: relative_l2(&values, &truth)?,
                    };
                    on_cell(&cell);
                    row.push(cell.rel_l2);
                    cells.push(cell);
                }
                w.row(&row)?;
            }
            w.finish()?;
            tables.push(path);
        }
    }
    let runs = out.join("sweep-runs.csv");
    let base = config.base();
    let tag = FileTag::new("sweep-runs", base.train.seed, &base.hash())
        .with("t", s.t)
        .with("steps", base.train.steps);
    let mut w = TableWriter::create(&runs, &tag, &["mode", "p", "layers", "neurons", "rel_l2"])?;
    for c in &cells {
        w.text_row(&[
            mode_name(c.mode).to_string(),
            c.latent.to_string(),
            c.layers.to_string(),
            c.neurons.to_string(),
            format!("{:e}", c.rel_l2),
        ])?;
    }
    w.finish()?;
    Ok(SweepReport { cells, tables, runs })
}
