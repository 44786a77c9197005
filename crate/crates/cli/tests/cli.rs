use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn krig(args: &[&str], threads: Option<usize>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_krig"));
    cmd.args(args).env_remove("RUST_LOG");
    match threads {
        Some(n) => cmd.env("KRIG_THREADS", n.to_string()),
        None => cmd.env_remove("KRIG_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Smooth field sampled at 20 scattered points of the unit square.
fn observations() -> String {
    let mut s = String::from("x,y,value\n");
    for i in 0..20 {
        let x = ((i * 7 + 3) % 20) as f64 / 20.0 + 0.02;
        let y = ((i * 13 + 5) % 20) as f64 / 20.0 + 0.01;
        let v = (3.0 * x).sin() + (2.0 * y).cos() + 0.05 * ((i * 31 % 11) as f64 - 5.0) / 5.0;
        s.push_str(&format!("{x},{y},{v}\n"));
    }
    s
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new(extra: &str) -> Self {
        let dir = TempDir::new().unwrap();
        fs::write(dir.path().join("obs.csv"), observations()).unwrap();
        let defaults = "\
model.dimension = 2
model.fixed.kappa = 0.5
run.n0 = 300
run.k_max = 3
run.seed = 11
run.posterior_draws = 200
simulate.origin = 0, 0
simulate.cell_size = 0.125, 0.25
simulate.counts = 8, 4
simulate.s = 6
io.observations = obs.csv
io.output_dir = out
";
        let key = |l: &str| l.split('=').next().unwrap().trim().to_string();
        let overridden: Vec<String> = extra.lines().map(key).collect();
        let mut config: String = defaults
            .lines()
            .filter(|l| !overridden.contains(&key(l)))
            .map(|l| format!("{l}\n"))
            .collect();
        config.push_str(extra);
        fs::write(dir.path().join("krig.conf"), config).unwrap();
        Fixture { dir }
    }

    fn config(&self) -> String {
        self.dir.path().join("krig.conf").display().to_string()
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join("out").join(name)
    }

    fn read(&self, name: &str) -> String {
        fs::read_to_string(self.out(name)).unwrap()
    }
}

fn data_rows(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn usage_errors_exit_2() {
    let o = krig(&[], None);
    assert_eq!(o.status.code(), Some(2));
    let o = krig(&["fit", "/nonexistent/krig.conf"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
    let o = krig(&["diagnose", "/nonexistent/mixture.txt"], None);
    assert_eq!(o.status.code(), Some(2));
    let f = Fixture::new("");
    let o = krig(&["simulate", &f.config()], None);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("mixture"));
    let o = krig(&["fit", &f.config()], Some(0));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_1_with_one_line() {
    let f = Fixture::new("");
    fs::write(f.dir.path().join("obs.csv"), "x,y,value\n0,0,1\n1,oops,2\n").unwrap();
    let o = krig(&["fit", &f.config()], None);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error[parse]: "), "{err}");
    assert!(err.contains(":3:"), "{err}");

    let bad = Fixture::new("run.bogus = 1\n");
    let o = krig(&["fit", &bad.config()], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown key 'run.bogus'"));
}

#[test]
fn fit_simulate_diagnose() {
    let f = Fixture::new("");
    let o = krig(&["fit", &f.config()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(data_rows(&f.out("diagnostics.csv")), 3);
    assert_eq!(data_rows(&f.out("posterior_working.csv")), 200);
    assert_eq!(data_rows(&f.out("posterior_natural.csv")), 200);
    let header = f.read("posterior_natural.csv").lines().next().unwrap().to_string();
    assert_eq!(header, "beta_0,lambda,sigma2,tau");
    assert_eq!(data_rows(&f.out("posterior_summary.csv")), 4);

    let o = krig(&["diagnose", &f.out("mixture.txt").display().to_string()], None);
    assert!(o.status.success());
    let table = String::from_utf8(o.stdout).unwrap();
    assert_eq!(table.lines().count(), 2 + 3, "{table}");

    let o = krig(&["simulate", &f.config()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let median = f.read("median.csv");
    assert!(median.starts_with("# origin=0 0 cell_size=0.125 0.25 counts=8 4\n"));
    assert_eq!(median.lines().count(), 1 + 4);
    assert!(median.lines().skip(1).all(|l| l.split(',').count() == 8));
    assert_eq!(data_rows(&f.out("theta_draws.csv")), 6);
    let ensemble: Vec<_> = fs::read_dir(f.out("ensemble")).unwrap().collect();
    assert_eq!(ensemble.len(), 6);
}

#[test]
fn gamma_stop_ends_early() {
    let f = Fixture::new("run.gamma_stop = 0\n");
    let o = krig(&["fit", &f.config()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(data_rows(&f.out("diagnostics.csv")), 1);
}

#[test]
fn single_realization_cannot_give_sd() {
    let f = Fixture::new("simulate.s = 1\n");
    assert!(krig(&["fit", &f.config()], None).status.success());
    let o = krig(&["simulate", &f.config()], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("at least 2 realizations"));
}

#[test]
fn smooth_only_changes_sd_not_shape() {
    let full = Fixture::new("simulate.write_ensemble = false\n");
    let smooth = Fixture::new("simulate.write_ensemble = false\nsimulate.predict_smooth_only = true\n");
    for f in [&full, &smooth] {
        assert!(krig(&["fit", &f.config()], None).status.success());
        let o = krig(&["simulate", &f.config()], None);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(!f.out("ensemble").exists());
    }
    let (a, b) = (full.read("sd.csv"), smooth.read("sd.csv"));
    assert_ne!(a, b);
    assert_eq!(a.lines().count(), b.lines().count());
    assert_eq!(a.lines().next(), b.lines().next());
}

#[test]
fn outputs_identical_across_runs_and_thread_counts() {
    let files = [
        "mixture.txt",
        "diagnostics.csv",
        "posterior_working.csv",
        "posterior_natural.csv",
        "posterior_summary.csv",
        "median.csv",
        "sd.csv",
        "theta_draws.csv",
    ];
    let mut runs = Vec::new();
    for threads in [1, 1, 4] {
        let f = Fixture::new("");
        assert!(krig(&["fit", &f.config()], Some(threads)).status.success());
        assert!(krig(&["simulate", &f.config()], Some(threads)).status.success());
        runs.push(files.map(|n| fs::read(f.out(n)).unwrap()));
    }
    for (i, name) in files.iter().enumerate() {
        assert!(runs[0][i] == runs[1][i], "{name} differs between identical runs");
        assert!(runs[0][i] == runs[2][i], "{name} differs between 1 and 4 workers");
    }
}
