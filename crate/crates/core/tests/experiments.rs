use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;

use membrane_lab::lab::{run_experiment, write_report, ExperimentConfig, REGISTERED};
use membrane_lab::solver::WORKERS_ENV;

const BIN: &str = env!("CARGO_BIN_EXE_membrane-lab");

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::parse(text).unwrap()
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for exp in fs::read_dir(dir).unwrap() {
        let exp = exp.unwrap().path();
        for f in fs::read_dir(&exp).unwrap() {
            let f = f.unwrap().path();
            let key = f.strip_prefix(dir).unwrap().display().to_string();
            out.insert(key, fs::read(&f).unwrap());
        }
    }
    out
}

fn header(bundle: &membrane_lab::lab::ReportBundle, table: &str) -> String {
    bundle
        .table_of(table)
        .unwrap_or_else(|| panic!("missing table {table}"))
        .lines()
        .next()
        .unwrap()
        .to_string()
}

#[test]
fn reruns_are_byte_identical_and_echo_the_config() {
    let cfg = config("experiment = \"monneau-sing2\"");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_report(&run_experiment(&cfg).unwrap(), a.path()).unwrap();
    write_report(&run_experiment(&cfg).unwrap(), b.path()).unwrap();
    let (ta, tb) = (read_tree(a.path()), read_tree(b.path()));
    assert!(ta.contains_key("monneau-sing2/summary.json"));
    assert_eq!(ta, tb);

    let summary: serde_json::Value =
        serde_json::from_slice(&ta["monneau-sing2/summary.json"]).unwrap();
    let echoed: ExperimentConfig = serde_json::from_value(summary["config"].clone()).unwrap();
    assert_eq!(echoed, ExperimentConfig::defaults("monneau-sing2").unwrap());
    assert_eq!(summary["experiment"], "monneau-sing2");
}

#[test]
fn reports_do_not_depend_on_the_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sing1.toml");
    fs::write(
        &cfg,
        "experiment = \"sing1-instability\"\nspacing = 0.015625\n",
    )
    .unwrap();
    let mut trees = Vec::new();
    for workers in ["1", "3"] {
        let out = dir.path().join(format!("w{workers}"));
        let run = Command::new(BIN)
            .env(WORKERS_ENV, workers)
            .args([
                "run",
                cfg.to_str().unwrap(),
                "--output",
                out.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert!(run.status.code().is_some_and(|c| c == 0 || c == 2));
        trees.push(read_tree(&out));
    }
    assert!(trees[0].len() >= 3);
    assert_eq!(trees[0], trees[1]);
}

#[test]
fn tables_carry_the_documented_headers() {
    let et = run_experiment(&config("experiment = \"energy-table\"\ndim = 1")).unwrap();
    assert_eq!(header(&et, "table"), "name,family,value,ratio,spread");
    assert_eq!(header(&et, "series"), "r,value,kind");
    for k in 1..=3 {
        assert_eq!(header(&et, &format!("sh_u{k}")), "x1,v");
    }

    let clog = run_experiment(&config("experiment = \"clog-width\"\nspacing = 0.015625")).unwrap();
    assert_eq!(header(&clog, "width"), "r,width,log_scaled,linear_scaled");
    assert_eq!(
        header(&clog, "width_gamma2"),
        "r,width,log_scaled,linear_scaled"
    );
    assert_eq!(
        header(&clog, "angles"),
        "r,angle_gap,epsilon,log_scaled_gap"
    );

    let mon = run_experiment(&config("experiment = \"monneau-sing2\"")).unwrap();
    assert_eq!(header(&mon, "series"), "r,value,kind");
    assert_eq!(header(&mon, "series_n4"), "r,value,kind");

    let obs = run_experiment(&config("experiment = \"obstacle-flatness\"")).unwrap();
    assert_eq!(header(&obs, "gamma"), "x1,x2,label");
    assert_eq!(
        header(&obs, "flatness"),
        "r,epsilon,width,linear_scaled,angle"
    );

    let aux = run_experiment(&config("experiment = \"aux-function\"")).unwrap();
    assert_eq!(header(&aux, "remainder"), "r,C");
}

fn cli(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(BIN).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str, text: &str| {
        let p = dir.path().join(name);
        fs::write(&p, text).unwrap();
        p.to_str().unwrap().to_string()
    };
    let out = dir.path().join("reports");
    let out = out.to_str().unwrap();

    let (code, stdout, _) = cli(&["list-experiments"]);
    assert_eq!(code, 0);
    for (name, _) in REGISTERED {
        assert!(stdout.contains(name));
    }

    let good = path("aux.toml", "experiment = \"aux-function\"\n");
    let (code, stdout, _) = cli(&["validate", &good]);
    assert_eq!(code, 0);
    assert!(stdout.contains("experiment = \"aux-function\""));
    let (code, stdout, _) = cli(&["run", &good, "--output", out]);
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("PASS A1"));
    assert!(Path::new(out).join("aux-function/summary.json").exists());

    let unknown = path("unknown.toml", "experiment = \"unknown-name\"\n");
    let (code, _, stderr) = cli(&["run", &unknown]);
    assert_eq!(code, 1);
    assert!(stderr.contains("energy-table, clog-width"), "{stderr}");

    let bad_key = path("bad.toml", "experiment = \"aux-function\"\nspeed = 2\n");
    assert_eq!(cli(&["validate", &bad_key]).0, 1);

    // flat data has no flatness to decay
    let flat = path(
        "flat.toml",
        "experiment = \"obstacle-flatness\"\namplitude = 0.0\n",
    );
    let (code, stdout, _) = cli(&["run", &flat, "--output", out]);
    assert_eq!(code, 2);
    assert!(stdout.contains("FAIL flatness_decay"));

    let blocker = path("not-a-dir", "");
    assert_eq!(cli(&["run", &good, "--output", &blocker]).0, 1);
}
