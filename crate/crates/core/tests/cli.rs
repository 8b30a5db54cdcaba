use std::path::Path;
use std::process::{Command, Output};

use bie_operator::bie::ProblemKind;
use bie_operator::checkpoint::Checkpoint;
use bie_operator::config::RunConfig;
use bie_operator::files::read_table;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bie-operator"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

#[test]
fn train_with_defaults_for_100_steps_then_resume_idempotently() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "lap.toml", "[problem]\nkind = \"laplace2d\"\n");
    let out = dir.path().join("run");
    let o = run(&["train", "--config", &cfg, "--steps", "100", "--seed", "4", "--deterministic", "--out", &s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let trace = read_table(&out.join("loss_trace.csv")).unwrap();
    assert_eq!(trace.header, ["step", "loss", "lr"]);
    assert_eq!(trace.column("step").unwrap(), vec![0.0, 99.0]);
    assert!(trace.tag.contains("seed=4") && trace.tag.contains("config="));
    let ck_path = out.join("checkpoint.json");
    let ck = Checkpoint::load(&ck_path).unwrap();
    assert_eq!(ck.step, 100);
    assert_eq!(ck.config.train.seed, 4);

    let before = std::fs::read(&ck_path).unwrap();
    let o = run(&["train", "--checkpoint", &s(&ck_path)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(before, std::fs::read(&ck_path).unwrap());

    let o = run(&["eval", "--checkpoint", &s(&ck_path), "--t", "1.15", "--grid", "40"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("relative l2"));
    let field = read_table(&out.join("field-t1.15.csv")).unwrap();
    assert_eq!(field.header, ["x", "y", "re", "im", "truth_re", "truth_im"]);
    assert!(!field.rows.is_empty());
}

#[test]
fn unknown_config_key_is_reported_with_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.toml",
        "[problem]\nkind = \"laplace2d\"\n\n[train]\nstepz = 10\n",
    );
    let o = run(&["train", "--config", &cfg, "--out", &s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 5"), "{}", stderr(&o));
    assert!(!dir.path().join("checkpoint.json").exists());
}

#[test]
fn fully_masked_grid_is_an_error_without_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::defaults(ProblemKind::Laplace2d);
    cfg.problem.delta = 10.0;
    cfg.model.latent = 4;
    let ck = dir.path().join("ck.json");
    Checkpoint::fresh(&cfg).unwrap().save(&ck).unwrap();
    let out = dir.path().join("out");
    let o = run(&["eval", "--checkpoint", &s(&ck), "--t", "1.2", "--grid", "30", "--out", &s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("masked"), "{}", stderr(&o));
    assert!(!out.join("field-t1.2.csv").exists());
}

#[test]
fn out_of_range_t_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::defaults(ProblemKind::Helmholtz3d);
    let ck = dir.path().join("ck.json");
    Checkpoint::fresh(&cfg).unwrap().save(&ck).unwrap();
    let o = run(&["far-field", "--checkpoint", &s(&ck), "--t", "0.7"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("outside"), "{}", stderr(&o));
}

#[test]
fn zero_checkpoint_has_a_zero_far_field() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::defaults(ProblemKind::Helmholtz3d);
    cfg.batch.m_eval = Some(2000);
    let mut ck = Checkpoint::fresh(&cfg).unwrap();
    for p in &mut ck.params {
        p.value.data.iter_mut().for_each(|w| *w = 0.0);
    }
    let path = dir.path().join("ck.json");
    ck.save(&path).unwrap();
    let o = run(&[
        "far-field", "--checkpoint", &s(&path), "--t", "0.25", "--n-theta", "6", "--n-phi", "8", "--out", &s(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = read_table(&dir.path().join("far-field-t0.25.csv")).unwrap();
    assert_eq!(table.header, ["theta", "phi", "re", "im"]);
    assert_eq!(table.rows.len(), 48);
    assert!(table.rows.iter().all(|r| r[2] == 0.0 && r[3] == 0.0));
}

#[test]
fn oracle_files_for_circle_and_sphere() {
    let dir = tempfile::tempdir().unwrap();
    let circle = write(
        dir.path(),
        "circle.toml",
        "[problem]\nkind = \"laplace2d\"\nfamily = \"unit-circle\"\n",
    );
    let o = run(&["oracle", "--config", &circle, "--t", "1.0", "--n", "3", "--out", &s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("invalid argument"), "{}", stderr(&o));

    let o = run(&["oracle", "--config", &circle, "--t", "1.0", "--n", "512", "--grid", "60", "--out", &s(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let density = read_table(&dir.path().join("oracle-density-t1.csv")).unwrap();
    assert_eq!(density.header, ["alpha", "x", "y", "v"]);
    assert_eq!(density.rows.len(), 512);
    let field = read_table(&dir.path().join("oracle-field-t1.csv")).unwrap();
    let re = field.column("re").unwrap();
    let truth = field.column("truth_re").unwrap();
    let num: f64 = re.iter().zip(&truth).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = truth.iter().map(|b| b * b).sum();
    assert!(num / den < 5e-3, "{}", num / den);

    let sphere = write(dir.path(), "sphere.toml", "[problem]\nkind = \"helmholtz3d\"\n");
    let o = run(&["oracle", "--config", &sphere, "--t", "0", "--n", "24", "--grid", "10", "--out", &s(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ff = read_table(&dir.path().join("oracle-far-field-t0.csv")).unwrap();
    assert_eq!(ff.header, ["theta", "phi", "re", "im"]);
    assert_eq!(ff.rows.len(), 200);
    assert!(ff.tag.contains("oracle=sphere-series"));
}

#[test]
fn gradcheck_passes() {
    let o = run(&["gradcheck"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("PASS"));
}

#[test]
fn small_sweep_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sweep.toml",
        r#"[problem]
kind = "laplace2d"

[batch]
n_t = 2
n_y = 20
m = 100
m_eval = 500

[model]
fourier_features = 8
decoder_width = 20

[train]
steps = 1000

[sweep]
layers = [1, 3]
neurons = [10, 50]
latent = [10]
modes = ["fourier"]
t = 1.15
grid = 20
"#,
    );
    let o = run(&["sweep", "--config", &cfg, "--out", &s(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let runs = std::fs::read_to_string(dir.path().join("sweep-runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 2 + 4);
    let table = read_table(&dir.path().join("sweep-fourier-p10.csv")).unwrap();
    assert_eq!(table.header, ["layers", "neurons_10", "neurons_50"]);
    assert_eq!(table.rows.len(), 2);
    assert!(table.rows.iter().flat_map(|r| &r[1..]).all(|e| e.is_finite() && *e > 0.0));
}

#[test]
fn missing_file_names_the_path() {
    let o = run(&["eval", "--checkpoint", "/nonexistent/ck.json", "--t", "1.1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/nonexistent/ck.json"));
}
