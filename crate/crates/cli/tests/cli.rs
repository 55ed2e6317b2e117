use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const TAILS_LSV: &str = "\
[experiment]
kind = tails
seed = 7

[system]
kind = lsv
alpha = 0.25

[budget]
returns = 200000
";

fn towerlimits(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_towerlimits"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

/// Run `config` into `dir/out_name` and return the exit code and output dir.
fn run_config(dir: &Path, text: &str, out_name: &str, extra: &[&str]) -> (Output, PathBuf) {
    let cfg = write_config(dir, &format!("{out_name}.ini"), text);
    let out = dir.join(out_name);
    let mut args = vec!["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    (towerlimits(&args), out)
}

fn summary(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn tails_run_writes_series_and_summary() {
    let tmp = TempDir::new().unwrap();
    let (o, out) = run_config(tmp.path(), TAILS_LSV, "tails", &["--strict", "--plots"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let csv = fs::read_to_string(out.join("survival.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("threshold,survival"));
    assert!(csv.lines().count() > 10);
    assert!(out.join("survival.gp").exists());

    let s = summary(&out);
    assert_eq!(s["experiment"], "tails");
    assert_eq!(s["config_echo"]["system"]["alpha"], "0.25");
    assert_eq!(s["seeds"]["root"], 7);
    assert_eq!(s["version"], env!("CARGO_PKG_VERSION"));
    let gamma = s["estimates"]["gamma"].as_f64().unwrap();
    assert!((3.0..5.0).contains(&gamma), "{gamma}");
    assert!(s["verdicts"]
        .as_object()
        .unwrap()
        .values()
        .all(|v| v == true));
}

#[test]
fn summary_matches_published_schema() {
    let schema: Value = serde_json::from_str(
        &fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/schema/summary.schema.json"
        ))
        .unwrap(),
    )
    .unwrap();
    let validator = jsonschema::JSONSchema::compile(&schema).unwrap();
    let tmp = TempDir::new().unwrap();
    let configs = [
        ("tails", TAILS_LSV.to_string()),
        (
            "variance",
            "[experiment]\nkind = variance\nseed = 3\n[observable]\nkind = coboundary\n[budget]\norbit = 1000000\n"
                .to_string(),
        ),
        (
            "billiard",
            "[experiment]\nkind = billiard\nseed = 4\n[system]\nkind = lorentz\n[budget]\ncollisions = 10000\nsamples = 20000\n"
                .to_string(),
        ),
    ];
    for (name, text) in configs {
        let (o, out) = run_config(tmp.path(), &text, name, &[]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stderr(&o));
        let s = summary(&out);
        if let Err(errors) = validator.validate(&s) {
            let msgs: Vec<String> = errors.map(|e| e.to_string()).collect();
            panic!("{name}: {msgs:?}");
        }
        for file in s["outputs"].as_array().unwrap() {
            let path = out.join(file["file"].as_str().unwrap());
            let header = fs::read_to_string(&path).unwrap();
            let columns: Vec<&str> = file["columns"]
                .as_array()
                .unwrap()
                .iter()
                .map(|c| c.as_str().unwrap())
                .collect();
            assert_eq!(header.lines().next().unwrap(), columns.join(","));
        }
    }
}

#[test]
fn same_seed_gives_identical_outputs() {
    let tmp = TempDir::new().unwrap();
    let (a, out_a) = run_config(tmp.path(), TAILS_LSV, "a", &[]);
    let (b, out_b) = run_config(tmp.path(), TAILS_LSV, "b", &["--threads", "1"]);
    assert!(a.status.success() && b.status.success());
    let strip = |mut v: Value| {
        v.as_object_mut().unwrap().remove("runtime_seconds");
        v
    };
    assert_eq!(strip(summary(&out_a)), strip(summary(&out_b)));
    assert_eq!(
        fs::read(out_a.join("survival.csv")).unwrap(),
        fs::read(out_b.join("survival.csv")).unwrap()
    );
}

#[test]
fn different_seeds_give_different_estimates() {
    let tmp = TempDir::new().unwrap();
    let (_, a) = run_config(tmp.path(), TAILS_LSV, "a", &[]);
    let (_, b) = run_config(
        tmp.path(),
        &TAILS_LSV.replace("seed = 7", "seed = 8"),
        "b",
        &[],
    );
    assert_ne!(summary(&a)["estimates"], summary(&b)["estimates"]);
}

#[test]
fn misspelled_key_is_rejected_by_name() {
    let tmp = TempDir::new().unwrap();
    let text = TAILS_LSV.replace("alpha = 0.25", "alpah = 0.25");
    let (o, out) = run_config(tmp.path(), &text, "typo", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("alpah"), "{}", stderr(&o));
    assert!(!out.join("summary.json").exists());
}

#[test]
fn configuration_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let cases = [
        ("no_seed", TAILS_LSV.replace("seed = 7\n", ""), "seed"),
        (
            "bad_kind",
            TAILS_LSV.replace("kind = tails", "kind = tail"),
            "tail",
        ),
        ("bad_section", format!("{TAILS_LSV}[sytem]\n"), "sytem"),
        ("budget_key", TAILS_LSV.replace("returns", "orbit"), "orbit"),
        ("zero_budget", TAILS_LSV.replace("200000", "0"), "returns"),
        (
            "wrong_system",
            TAILS_LSV.replace("kind = lsv\nalpha = 0.25", "kind = lorentz"),
            "lorentz",
        ),
        ("bad_alpha", TAILS_LSV.replace("0.25", "-1"), "alpha"),
    ];
    for (name, text, needle) in cases {
        let (o, _) = run_config(tmp.path(), &text, name, &[]);
        assert_eq!(o.status.code(), Some(2), "{name}: {}", stderr(&o));
        assert!(stderr(&o).contains(needle), "{name}: {}", stderr(&o));
    }
    let missing = towerlimits(&["run", "/nonexistent/config.ini"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn strict_mode_turns_failed_verdicts_into_exit_1() {
    let tmp = TempDir::new().unwrap();
    let text = "[experiment]\nkind = tails\nseed = 1\n[budget]\nreturns = 100000\n\
                [expect]\nestimate = mean_return\nvalue = 5\ntolerance = 0.1\n";
    let (lenient, out) = run_config(tmp.path(), text, "lenient", &[]);
    assert_eq!(lenient.status.code(), Some(0), "{}", stderr(&lenient));
    assert_eq!(summary(&out)["verdicts"]["expect_mean_return"], false);
    assert_eq!(summary(&out)["passed"], false);
    let (strict, _) = run_config(tmp.path(), text, "strict", &["--strict"]);
    assert_eq!(strict.status.code(), Some(1));
}

#[test]
fn failed_preconditions_exit_3() {
    let tmp = TempDir::new().unwrap();
    let sloped_roof = "[experiment]\nkind = flow_lift\nseed = 1\n[flow]\nroof_slope = 0.5\n";
    let (o, _) = run_config(tmp.path(), sloped_roof, "roof", &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let short_lil =
        "[experiment]\nkind = lil\nseed = 1\n[observable]\nsigma2 = 0.5\n[budget]\nlength = 1000\n";
    let (o, _) = run_config(tmp.path(), short_lil, "lil", &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn list_covers_every_kind_and_criterion() {
    let o = towerlimits(&["list"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for kind in [
        "tails",
        "decay",
        "variance",
        "tower_lift",
        "flow_lift",
        "billiard",
        "clt",
        "wip",
        "lil",
        "ps_conditions",
    ] {
        assert!(text.lines().any(|l| l.starts_with(kind)), "{kind} missing");
    }
    for ac in 1..=10 {
        assert!(
            text.contains(&format!("AC{ac}]")) || text.contains(&format!("AC{ac},")),
            "AC{ac}"
        );
    }
}

#[test]
fn list_json_is_machine_readable() {
    let o = towerlimits(&["list", "--json"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let kinds = v["experiments"].as_array().unwrap();
    assert_eq!(kinds.len(), 10);
    let mut criteria: Vec<String> = kinds
        .iter()
        .flat_map(|k| k["criteria"].as_array().unwrap().clone())
        .map(|c| c.as_str().unwrap().to_string())
        .collect();
    criteria.sort();
    criteria.dedup();
    assert_eq!(criteria.len(), 10);
    assert!(kinds
        .iter()
        .all(|k| !k["series"].as_array().unwrap().is_empty()));
}

#[test]
fn every_recipe_is_a_valid_configuration() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("recipes");
    let mut covered = Vec::new();
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let o = towerlimits(&["run", path.to_str().unwrap(), "--check"]);
        assert!(o.status.success(), "{}: {}", path.display(), stderr(&o));
        let name = path.file_name().unwrap().to_str().unwrap().to_string();
        covered.push(name[2..4].parse::<u32>().unwrap());
    }
    covered.sort_unstable();
    covered.dedup();
    assert_eq!(covered, (1..=10).collect::<Vec<_>>());
}
