//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! `cargo test --test acceptance` runs all ten; `-- 5 7` runs a subset.
//! Training runs checkpoint under the cargo target directory and resume
//! from there, so an interrupted run picks up where it stopped.

use std::f64::consts::{PI, TAU};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use bie_operator::autodiff::Fault;
use bie_operator::bie::{
    make_batch, mc_loss, relative_l2, relative_l2_real, BatchSizes, FieldGrid, ProblemKind, ProblemSpec,
};
use bie_operator::checkpoint::Checkpoint;
use bie_operator::commands::{cmd_eval, cmd_far_field, cmd_sweep, cmd_train, SweepConfig, CHECKPOINT_FILE};
use bie_operator::config::RunConfig;
use bie_operator::geometry::{trapezoid_length, CurveFamily};
use bie_operator::gradcheck::run_gradcheck;
use bie_operator::kernels::{
    biharmonic2d, biharmonic2d_re, helmholtz3d, laplace2d, laplace2d_re, laplace3d, laplace3d_re, TruncationRule,
    DEFAULT_BETA,
};
use bie_operator::oracles::{nystrom_solve, LookupPotential};
use bie_operator::rng::{stream, Purpose};
use bie_operator::Result;
use num_complex::Complex64;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn work_dir(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name);
    fs::create_dir_all(&dir).unwrap();
    dir
}

/// Train `cfg` to completion, resuming a matching checkpoint left by an
/// earlier run. Returns the checkpoint and the total training wall time.
fn train_resumable(cfg: &RunConfig) -> Result<(Checkpoint, f64)> {
    let dir = &cfg.output.dir;
    let ck_path = dir.join(CHECKPOINT_FILE);
    let clock_path = dir.join("train_seconds");
    let previous = Checkpoint::load(&ck_path).ok().filter(|ck| ck.config == *cfg);
    let mut seconds = match &previous {
        Some(_) => fs::read_to_string(&clock_path).ok().and_then(|s| s.trim().parse().ok()).unwrap_or(0.0),
        None => 0.0,
    };
    let start = Instant::now();
    let out = cmd_train(cfg, previous.as_ref())?;
    seconds += start.elapsed().as_secs_f64();
    fs::write(&clock_path, format!("{seconds}"))?;
    Ok((Checkpoint::load(&out.checkpoint)?, seconds))
}

fn c1_gradients() -> Result<Outcome> {
    let report = run_gradcheck(0, Fault::None)?;
    let kinds: Vec<_> = report.cases.iter().map(|c| c.problem.name()).collect();
    let covered = kinds.contains(&"laplace2d") && kinds.contains(&"helmholtz3d");
    let e = report.max_rel_error();
    outcome(
        covered && e < 1e-6,
        format!("gradcheck max relative error {e:.2e} over {} cases (< 1e-6)", report.cases.len()),
    )
}

fn fd_laplacian(f: &dyn Fn(&[f64]) -> f64, p: &[f64], h: f64) -> f64 {
    let mut acc = -2.0 * p.len() as f64 * f(p);
    for d in 0..p.len() {
        let mut q = p.to_vec();
        q[d] += h;
        acc += f(&q);
        q[d] -= 2.0 * h;
        acc += f(&q);
    }
    acc / (h * h)
}

fn random_unit(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.1 && n <= 1.0 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

fn c2_kernels() -> Result<Outcome> {
    let rule = TruncationRule::new(DEFAULT_BETA).unwrap();
    let mut rng = stream(0, Purpose::Test, 2, 0);
    let mut failures = Vec::new();

    let mut unit_ok = true;
    for _ in 0..100 {
        let y: Vec<f64> = (0..2).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
        let a = rng.gen::<f64>() * TAU;
        let x = [y[0] + a.cos(), y[1] + a.sin()];
        // cos² + sin² may round away from 1, so only exact unit distances count.
        let r2 = (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2);
        if r2 == 1.0 && laplace2d(&x, &y, &rule).re != 0.0 {
            unit_ok = false;
        }
    }
    if laplace2d(&[0.0, 0.0], &[1.0, 0.0], &rule).re != 0.0 || laplace2d(&[0.3, 0.2], &[0.3, -0.8], &rule).re != 0.0
    {
        unit_ok = false;
    }
    if !unit_ok {
        failures.push("laplace2d at unit distance".to_string());
    }

    let h = helmholtz3d(&[0.0, 0.0, 0.0], &[0.0, 0.0, 1.0], TAU, &rule);
    let helm_gap = (h - Complex64::new(1.0 / (4.0 * PI), 0.0)).norm();
    if helm_gap > 1e-14 {
        failures.push(format!("helmholtz3d(r = 1) off by {helm_gap:.1e}"));
    }

    let mut symmetric = true;
    for _ in 0..200 {
        let x2: Vec<f64> = (0..2).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
        let y2: Vec<f64> = (0..2).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
        let x3: Vec<f64> = (0..3).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
        let y3: Vec<f64> = (0..3).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
        symmetric &= laplace2d(&x2, &y2, &rule) == laplace2d(&y2, &x2, &rule);
        symmetric &= biharmonic2d(&x2, &y2, &rule) == biharmonic2d(&y2, &x2, &rule);
        symmetric &= laplace3d(&x3, &y3, &rule) == laplace3d(&y3, &x3, &rule);
        symmetric &= helmholtz3d(&x3, &y3, TAU, &rule) == helmholtz3d(&y3, &x3, TAU, &rule);
    }
    if !symmetric {
        failures.push("kernel symmetry".to_string());
    }

    let (mut harm, mut helm, mut bih) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..20 {
        let r = 0.5 + 2.5 * rng.gen::<f64>();
        let y2 = [rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5];
        let d2 = random_unit(&mut rng, 2);
        let x2 = [y2[0] + r * d2[0], y2[1] + r * d2[1]];
        harm = harm.max(fd_laplacian(&|p| laplace2d_re(p, &y2, &rule), &x2, 1e-4).abs());

        let y3 = [rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5];
        let d3 = random_unit(&mut rng, 3);
        let x3: Vec<f64> = (0..3).map(|i| y3[i] + r * d3[i]).collect();
        harm = harm.max(fd_laplacian(&|p| laplace3d_re(p, &y3, &rule), &x3, 1e-4).abs());
        for part in 0..2 {
            let f = |p: &[f64]| {
                let v = helmholtz3d(p, &y3, TAU, &rule);
                if part == 0 {
                    v.re
                } else {
                    v.im
                }
            };
            helm = helm.max((fd_laplacian(&f, &x3, 1e-4) + TAU * TAU * f(&x3)).abs());
        }

        let rb = 1.0 + 2.0 * rng.gen::<f64>();
        let xb = [y2[0] + rb * d2[0], y2[1] + rb * d2[1]];
        let inner = |p: &[f64]| fd_laplacian(&|q| biharmonic2d_re(q, &y2, &rule), p, 1e-2);
        bih = bih.max(fd_laplacian(&inner, &xb, 1e-2).abs());
    }
    if harm >= 1e-4 {
        failures.push(format!("FD Laplacian {harm:.1e}"));
    }
    if helm >= 1e-3 {
        failures.push(format!("Helmholtz residual {helm:.1e}"));
    }
    if bih >= 1e-2 {
        failures.push(format!("FD bi-Laplacian {bih:.1e}"));
    }
    outcome(
        failures.is_empty(),
        format!(
            "unit distance exact, helmholtz3d(r = 1) gap {helm_gap:.1e}, symmetry {symmetric}, \
             max |ΔG| {harm:.1e}, max |ΔG + k²G| {helm:.1e}, max |Δ²G| {bih:.1e}{}",
            if failures.is_empty() { String::new() } else { format!("; failed: {}", failures.join(", ")) }
        ),
    )
}

fn c3_quadrature() -> Result<Outcome> {
    let spec = ProblemSpec::laplace();
    let curve = spec.curve().unwrap();
    let t = 1.15;
    let reference = trapezoid_length(curve, t, 100_000);
    let mut within = 0;
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let s = curve.sample(t, 3000, &mut stream(seed, Purpose::Test, 3, 0))?;
        let length = s.jacobians.iter().sum::<f64>() * s.weight();
        let rel = (length - reference).abs() / reference;
        worst = worst.max(rel);
        if rel <= 0.02 {
            within += 1;
        }
    }
    let helm = ProblemSpec::helmholtz(TAU)?;
    let s = helm.boundary.sample(0.0, 8000, &mut stream(0, Purpose::Test, 3, 1))?;
    let area = s.jacobians.iter().sum::<f64>() * s.weight();
    let area_rel = (area - 4.0 * PI).abs() / (4.0 * PI);
    outcome(
        within >= 19 && area_rel <= 0.02,
        format!(
            "curve length within 2% in {within}/20 seeds (worst {:.2}%), hemisphere-pair area {area:.4} vs 4π ({:.2}%)",
            100.0 * worst,
            100.0 * area_rel
        ),
    )
}

fn c4_nystrom() -> Result<Outcome> {
    let spec = ProblemSpec::laplace_on(CurveFamily::UnitCircle)?;
    let grid = FieldGrid::interior(spec.curve().unwrap(), 0.0, 100, 0.01)?;
    let pts = grid.kept_points();
    let truth: Vec<f64> = pts.chunks(2).map(|p| spec.exact_solution(p).unwrap()).collect();
    let mut errors = Vec::new();
    for n in [128, 256, 512] {
        let sol = nystrom_solve(&spec, 0.0, n)?;
        errors.push(relative_l2_real(&sol.field(&spec, &pts)?, &truth)?);
    }
    let monotone = errors.windows(2).all(|w| w[1] < w[0]);
    outcome(
        errors[2] < 5e-3 && monotone,
        format!(
            "unit circle interior error N=128/256/512: {:.2e} / {:.2e} / {:.2e} (< 5e-3, monotone {monotone})",
            errors[0], errors[1], errors[2]
        ),
    )
}

fn desk_config(kind: ProblemKind, name: &str) -> RunConfig {
    let mut cfg = RunConfig::defaults(kind);
    cfg.train.steps = 20_000;
    cfg.train.checkpoint_every = 1000;
    cfg.batch.n_t = Some(10);
    cfg.batch.n_y = Some(100);
    cfg.batch.m = Some(1000);
    cfg.output.dir = work_dir(name);
    cfg
}

fn field_errors(ck: &Checkpoint, ts: &[f64], out: &Path) -> Result<Vec<f64>> {
    ts.iter()
        .map(|&t| Ok(cmd_eval(ck, t, 200, out)?.rel_l2.expect("2D problems have a truth")))
        .collect()
}

fn c5_laplace() -> Result<Outcome> {
    let cfg = desk_config(ProblemKind::Laplace2d, "laplace");
    let (ck, seconds) = train_resumable(&cfg)?;
    let e = field_errors(&ck, &[1.15, 1.35, 1.45], &cfg.output.dir)?;
    outcome(
        e[0] <= 0.10 && e[1] <= 0.12 && e[2] <= 0.12,
        format!(
            "laplace 20k steps: relative l2 {:.4} @1.15 (<= 0.10), {:.4} @1.35, {:.4} @1.45 (<= 0.12); training {:.0} s",
            e[0], e[1], e[2], seconds
        ),
    )
}

fn c6_biharmonic() -> Result<Outcome> {
    let cfg = desk_config(ProblemKind::Biharmonic2d, "biharmonic");
    let (ck, seconds) = train_resumable(&cfg)?;
    let e = field_errors(&ck, &[1.15, 1.35, 1.45], &cfg.output.dir)?;
    outcome(
        e.iter().all(|&x| x <= 0.10),
        format!(
            "biharmonic 20k steps: relative l2 {:.4} @1.15, {:.4} @1.35, {:.4} @1.45 (<= 0.10); training {:.0} s",
            e[0], e[1], e[2], seconds
        ),
    )
}

fn c7_helmholtz() -> Result<Outcome> {
    let mut cfg = RunConfig::defaults(ProblemKind::Helmholtz3d);
    cfg.train.steps = 10_000;
    cfg.train.checkpoint_every = 500;
    cfg.batch.n_y = Some(400);
    cfg.batch.m = Some(8000);
    cfg.output.dir = work_dir("helmholtz");
    let (ck, seconds) = train_resumable(&cfg)?;
    let out = &cfg.output.dir;
    let (n_theta, n_phi) = (18, 36);
    let anchor = cmd_far_field(&ck, 0.0, n_theta, n_phi, out)?.rel_l2.expect("series at t = 0");
    let mut gaps = Vec::new();
    for (a, b) in [(0.1, 0.15), (0.4, 0.45)] {
        let fa = cmd_far_field(&ck, a, n_theta, n_phi, out)?.values;
        let fb = cmd_far_field(&ck, b, n_theta, n_phi, out)?.values;
        gaps.push(relative_l2(&fa, &fb)?);
    }
    outcome(
        anchor <= 0.15 && gaps.iter().all(|&g| g < 0.30),
        format!(
            "helmholtz 10k steps: far field vs series at t=0 {anchor:.4} (<= 0.15); \
             adjacent-t gaps {:.4} (0.1/0.15), {:.4} (0.4/0.45) (< 0.30); training {seconds:.0} s",
            gaps[0], gaps[1]
        ),
    )
}

fn c8_loss_floor() -> Result<Outcome> {
    let t = 1.15;
    let spec = ProblemSpec::laplace().with_t_range(t, t)?;
    let sol = nystrom_solve(&spec, t, 512)?;
    let lookup = LookupPotential::new(&sol);
    let batch = make_batch(&spec, BatchSizes { n_t: 4, n_y: 100, m: 50_000 }, 8, 0)?;
    let loss = mc_loss(&lookup, &spec, &batch)?;
    outcome(loss < 1e-3, format!("loss with the Nyström density at t=1.15, M=50000: {loss:.3e} (< 1e-3)"))
}

fn c9_sweep() -> Result<Outcome> {
    let dir = work_dir("sweep");
    let text = format!(
        r#"[problem]
kind = "laplace2d"

[batch]
n_t = 4
n_y = 50
m = 300
m_eval = 4000

[train]
steps = 1000
trace_every = 1000
checkpoint_every = 1000

[output]
dir = "{}"

[sweep]
layers = [1, 3, 5, 7]
neurons = [10, 50, 100, 150]
latent = [10, 50, 100, 150]
modes = ["fourier"]
t = 1.15
grid = 60
"#,
        dir.display()
    );
    let config = SweepConfig::parse(&text)?;
    let report = cmd_sweep(&config, |_| {})?;
    let mut shaped = report.tables.len() == 4;
    for table in &report.tables {
        let rows: Vec<String> = fs::read_to_string(table)?
            .lines()
            .filter(|l| !l.starts_with('#'))
            .map(String::from)
            .collect();
        shaped &= rows.len() == 5 && rows[0] == "layers,neurons_10,neurons_50,neurons_100,neurons_150";
    }
    let finite = report.cells.iter().all(|c| c.rel_l2.is_finite());
    let (lo, hi) = report
        .cells
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), c| (lo.min(c.rel_l2), hi.max(c.rel_l2)));
    outcome(
        shaped && finite && report.cells.len() == 64,
        format!(
            "{} cells, {} tables of 4 x 4 (layers x neurons), errors {lo:.3} to {hi:.3}",
            report.cells.len(),
            report.tables.len()
        ),
    )
}

fn c10_determinism() -> Result<Outcome> {
    let dir = tempfile::tempdir()?;
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "[problem]\nkind = \"helmholtz3d\"\n\n[batch]\nn_y = 50\nm = 600\n\n[model]\nlatent = 20\n\n[train]\nsteps = 40\ntrace_every = 1\n",
    )?;
    let mut traces = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let status = Command::new(env!("CARGO_BIN_EXE_bie-operator"))
            .args(["train", "--config"])
            .arg(&cfg)
            .args(["--seed", "11", "--deterministic", "--out"])
            .arg(&out)
            .output()?;
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        traces.push(fs::read(out.join("loss_trace.csv"))?);
    }
    let rows = traces[0].iter().filter(|&&b| b == b'\n').count().saturating_sub(2);
    outcome(
        traces[0] == traces[1] && rows == 40,
        format!("two seeded runs: {rows} trace rows, bit-identical {}", traces[0] == traces[1]),
    )
}

type Criterion = (u32, &'static str, fn() -> Result<Outcome>, Option<f64>);

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "gradient correctness", c1_gradients, Some(10.0)),
        (2, "kernel identities", c2_kernels, Some(5.0)),
        (3, "quadrature soundness", c3_quadrature, Some(10.0)),
        (4, "Nyström oracle", c4_nystrom, Some(30.0)),
        (5, "Laplace training", c5_laplace, None),
        (6, "bi-harmonic training", c6_biharmonic, None),
        (7, "Helmholtz sphere anchor", c7_helmholtz, None),
        (8, "loss floor", c8_loss_floor, Some(60.0)),
        (9, "sweep harness", c9_sweep, None),
        (10, "determinism", c10_determinism, None),
    ];
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, run, budget) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = run();
        let secs = start.elapsed().as_secs_f64();
        let (pass, detail) = match result {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let in_time = budget.is_none_or(|b| secs < b);
        let budget_note = budget.map_or(String::new(), |b| format!(", limit {b:.0} s"));
        let verdict = if pass && in_time { "PASS" } else { "FAIL" };
        if verdict == "FAIL" {
            failed += 1;
        }
        println!("criterion {id:>2} {verdict}  {name}: {detail} [{secs:.1} s{budget_note}]");
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
