use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_varglue"));
    c.env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn varglue");
    assert!(
        out.status.success(),
        "varglue {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const CHAIN4: &str = r#"
extents = [4]
boundary = ["periodic"]
tau = 0.3
m = 2
"#;

fn train_chain4(dir: &Path) -> PathBuf {
    let cfg = write(dir, "chain4.toml", CHAIN4);
    let out = dir.join("p4.json");
    run(&[
        "optimize",
        "--config",
        s(&cfg),
        "--steps",
        "50",
        "--lr",
        "1e-3",
        "--out",
        s(&out),
    ]);
    out
}

#[test]
fn help_lists_every_subcommand() {
    let out = run(&["--help"]);
    let text = String::from_utf8(out.stdout).unwrap();
    for cmd in [
        "optimize",
        "upscale",
        "evaluate",
        "sweep",
        "nisq",
        "observable",
        "suzuki-bench",
    ] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
}

#[test]
fn missing_config_fails() {
    let out = bin().arg("sweep").output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--config"));
}

#[test]
fn unknown_metric_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.toml", CHAIN4);
    let out = bin()
        .args(["sweep", "--config", s(&cfg), "--metric", "bogus"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn optimize_writes_an_artifact_no_worse_than_trotter() {
    let dir = TempDir::new().unwrap();
    let p = train_chain4(dir.path());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap();
    assert_eq!(v["mode"], "shared");
    assert_eq!(v["m"], 2);
    assert_eq!(v["tau"], 0.3);
    assert_eq!(v["theta"].as_array().unwrap().len(), 2);
    assert!(v["cost_trace_final"].as_f64().unwrap() <= v["cost_initial"].as_f64().unwrap());
}

#[test]
fn upscaled_plan_and_artifact_evaluate_alike() {
    let dir = TempDir::new().unwrap();
    let p = train_chain4(dir.path());
    let big = write(dir.path(), "chain7.toml", &CHAIN4.replace("[4]", "[7]"));
    let plan = dir.path().join("plan7.json");
    run(&["upscale", "--config", s(&big), "--params", s(&p), "--out", s(&plan)]);
    let eval = |params: &Path| -> serde_json::Value {
        let out = run(&["evaluate", "--config", s(&big), "--params", s(params)]);
        serde_json::from_slice(&out.stdout).unwrap()
    };
    let a = eval(&p);
    let b = eval(&plan);
    assert_eq!(a["circuit"]["cost"], b["circuit"]["cost"]);
    assert_eq!(a["n_sites"], 7);
    assert!(a["circuit"]["cost"].as_f64().unwrap() <= a["trotter_m2"]["cost"].as_f64().unwrap());
}

#[test]
fn open_gluing_with_either_seam_rule() {
    let dir = TempDir::new().unwrap();
    let bulk = train_chain4(dir.path());
    let open = write(dir.path(), "open4.toml", &CHAIN4.replace("periodic", "open"));
    let theta_o = dir.path().join("o4.json");
    run(&[
        "optimize",
        "--config",
        s(&open),
        "--steps",
        "50",
        "--lr",
        "1e-3",
        "--out",
        s(&theta_o),
    ]);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&theta_o).unwrap()).unwrap();
    assert_eq!(v["mode"], "site_resolved");

    let target = write(
        dir.path(),
        "open7.toml",
        &CHAIN4.replace("periodic", "open").replace("[4]", "[7]"),
    );
    let mut costs = Vec::new();
    for seam in ["bulk", "boundary"] {
        let map = dir.path().join(format!("map_{seam}.json"));
        run(&[
            "upscale",
            "--config",
            s(&target),
            "--params",
            s(&theta_o),
            "--bulk",
            s(&bulk),
            "--seam",
            seam,
            "--out",
            s(&map),
        ]);
        let out = run(&["evaluate", "--config", s(&target), "--params", s(&map)]);
        let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        costs.push(r["circuit"]["cost"].as_f64().unwrap());
    }
    assert!(costs.iter().all(|c| c.is_finite() && *c >= -1e-12));
    assert_ne!(costs[0], costs[1]);
}

const SCAN: &str = r#"
extents = [4]
boundary = ["periodic"]
tau = 0.5
metric = "sampled"
samples = 3
seeds = [1, 2]
[[circuits]]
family = "trotter"
m = 1
[sweep]
axis = "couplings"
jz = [0.0, 1.0]
hx = [0.0, 0.5]
"#;

#[test]
fn sweep_csv_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "scan.toml", SCAN);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    run(&["sweep", "--config", s(&cfg), "--out", s(&a)]);
    run(&["sweep", "--config", s(&cfg), "--out", s(&b)]);
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "model,d,extents,boundary,Jz,hx,Jy,tau,m,reps,N,metric,value,G,D,pg,seed"
    );
    assert_eq!(lines.count(), 4 * 2);
}

#[test]
fn seed_flag_replaces_the_seed_list() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "scan.toml", SCAN);
    let out = run(&["sweep", "--config", s(&cfg), "--seed", "9", "--samples", "2"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1 + 4);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",9")));
}

#[test]
fn nisq_projects_each_circuit() {
    let dir = TempDir::new().unwrap();
    let p = train_chain4(dir.path());
    let cfg = write(
        dir.path(),
        "sizes.toml",
        r#"
extents = [4]
boundary = ["periodic"]
tau = 0.3
samples = 3
[[circuits]]
family = "variational"
[[circuits]]
family = "trotter"
m = 2
[sweep]
axis = "n"
values = [4, 5, 6]
"#,
    );
    let out = run(&["nisq", "--config", s(&cfg), "--params", s(&p), "--target", "20"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let items = v.as_array().unwrap();
    assert_eq!(items.len(), 2);
    for item in items {
        let proj = &item["projection"];
        assert_eq!(proj["n_sites"], 20);
        assert!(proj["infidelity"].as_f64().unwrap() >= proj["noise_floor"].as_f64().unwrap());
    }
    assert_eq!(items[0]["projection"]["gates"], 2 * 40);
}

#[test]
fn observable_curves_start_at_the_initial_state() {
    let dir = TempDir::new().unwrap();
    let p = train_chain4(dir.path());
    let cfg = write(
        dir.path(),
        "obs.toml",
        r#"
extents = [5]
boundary = ["periodic"]
tau = 0.3
reps = 4
observable = [1, 2]
initial = "zero"
[[circuits]]
family = "variational"
[[circuits]]
family = "trotter"
m = 1
"#,
    );
    let out = run(&["observable", "--config", s(&cfg), "--params", s(&p)]);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 1 + 2 * 5);
    assert!(rows[1].starts_with("variational,Z1Z2,0,0,1,1,0,0"));
}

#[test]
fn suzuki_bench_reports_every_order() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "chain4.toml", &format!("{CHAIN4}samples = 2\n"));
    let out = run(&["suzuki-bench", "--config", s(&cfg), "--orders", "1,2,4"]);
    let text = String::from_utf8(out.stdout).unwrap();
    for q in [1, 2, 4] {
        assert!(text.contains(&format!("suzuki{q}_m2:nisq_infidelity")), "order {q}");
    }
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = varglue::bench::ExperimentConfig::from_toml(&fs::read_to_string(&path).unwrap())
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        seen += 1;
    }
    assert!(seen >= 8);
}
