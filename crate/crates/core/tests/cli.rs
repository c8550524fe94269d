use std::f64::consts::FRAC_1_SQRT_2;
use std::path::Path;
use std::process::{Command, Output};

use cbd_core::cli::{build_analysis, AnalyzeOutput, CompatOutput};
use cbd_core::cyclic::AnalysisOptions;
use cbd_core::io::read_system;

fn cbd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cbd"))
        .args(args)
        .env_remove("CBD_TOLERANCE")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn generate(dir: &Path, args: &[&str], name: &str) -> String {
    let mut full = vec!["generate"];
    full.extend_from_slice(args);
    let out = cbd(&full);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    write(dir, name, &stdout(&out))
}

#[test]
fn pr_box_report() {
    let dir = tempfile::tempdir().unwrap();
    let file = generate(dir.path(), &["pr-box"], "pr.json");
    let out = cbd(&["analyze", &file]);
    assert_eq!(out.status.code(), Some(0));
    assert!(
        stdout(&out).contains("CNTX = 1.000000000, contextual"),
        "{}",
        stdout(&out)
    );
}

#[test]
fn all_correlated_report() {
    let dir = tempfile::tempdir().unwrap();
    let file = generate(dir.path(), &["all-correlated", "--n", "4"], "ac.json");
    let out = cbd(&["analyze", &file]);
    assert_eq!(out.status.code(), Some(0));
    assert!(
        stdout(&out).contains("CNTX = 0, noncontextual"),
        "{}",
        stdout(&out)
    );
}

#[test]
fn bundled_scenarios_never_disagree() {
    let dir = tempfile::tempdir().unwrap();
    for name in [
        "pr-box",
        "tsirelson",
        "kcbs-quantum",
        "specker",
        "all-correlated",
    ] {
        let file = generate(dir.path(), &[name], &format!("{name}.json"));
        for extra in [None, Some("--no-lp"), Some("--json")] {
            let mut args = vec!["analyze", file.as_str()];
            args.extend(extra);
            let out = cbd(&args);
            assert_eq!(
                out.status.code(),
                Some(0),
                "{name} {extra:?}: {}",
                stdout(&out)
            );
        }
    }
}

#[test]
fn random_generation_roundtrip_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let a = cbd(&["generate", "random", "--n", "5", "--seed", "7"]);
    let b = cbd(&["generate", "random", "--n", "5", "--seed", "7"]);
    assert_eq!(a.stdout, b.stdout);
    for seed in 0..1000u64 {
        let n = 3 + (seed % 10) as usize;
        let text = stdout(&cbd(&[
            "generate",
            "random",
            "--n",
            &n.to_string(),
            "--seed",
            &seed.to_string(),
        ]));
        let loaded = cbd_core::io::parse_system(&text).expect("generated files parse");
        // The process round trip is exercised on a subset; the rest goes
        // through the same analysis in-process, without the LP above rank 5.
        if seed % 50 == 0 {
            let file = write(dir.path(), "r.json", &text);
            let args = if n > 5 {
                vec!["analyze", &file, "--no-lp"]
            } else {
                vec!["analyze", &file]
            };
            assert_eq!(cbd(&args).status.code(), Some(0), "seed {seed}");
        } else {
            let options = AnalysisOptions {
                run_lp: n <= 5,
                ..AnalysisOptions::default()
            };
            let output = build_analysis(&loaded, options).expect("analysis succeeds");
            assert!(output.oracle.disagreements.is_empty(), "seed {seed}");
        }
    }
}

#[test]
fn json_report_reparses_to_the_same_value() {
    let dir = tempfile::tempdir().unwrap();
    for (name, args) in [
        ("tsirelson", vec!["tsirelson"]),
        ("specker", vec!["specker"]),
        ("random", vec!["random", "--n", "6", "--seed", "3"]),
    ] {
        let file = generate(dir.path(), &args, &format!("{name}.json"));
        let out = cbd(&["analyze", &file, "--json"]);
        assert_eq!(out.status.code(), Some(0));
        let parsed: AnalyzeOutput = serde_json::from_str(&stdout(&out)).unwrap();
        let loaded = read_system(Path::new(&file)).unwrap();
        let in_memory = build_analysis(&loaded, AnalysisOptions::default()).unwrap();
        assert_eq!(parsed, in_memory, "{name}");
    }
}

#[test]
fn tsirelson_file_contents() {
    let text = stdout(&cbd(&["generate", "tsirelson"]));
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(value["type"], "cyclic-expectations");
    let vw: Vec<f64> = serde_json::from_value(value["vw"].clone()).unwrap();
    assert_eq!(
        vw,
        vec![FRAC_1_SQRT_2, FRAC_1_SQRT_2, FRAC_1_SQRT_2, -FRAC_1_SQRT_2]
    );
}

#[test]
fn specker_file_contents() {
    let text = stdout(&cbd(&["generate", "specker"]));
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(value["type"], "generic");
    for bunch in value["bunches"].as_array().unwrap() {
        assert_eq!(bunch["pmf"]["+-"], 0.5);
        assert_eq!(bunch["pmf"]["-+"], 0.5);
        assert_eq!(bunch["pmf"]["++"], 0.0);
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let malformed = write(dir.path(), "bad.json", "{\"type\": \"cyclic\",\n \"n\": ");
    let out = cbd(&["analyze", &malformed]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let invalid = write(
        dir.path(),
        "invalid.json",
        r#"{"type":"cyclic","n":3,"pairs":[
            {"i":1,"pp":1.2,"pm":-0.2,"mp":0,"mm":0},
            {"i":2,"pp":0.25,"pm":0.25,"mp":0.25,"mm":0.25},
            {"i":3,"pp":0.25,"pm":0.25,"mp":0.25,"mm":0.25}]}"#,
    );
    let out = cbd(&["analyze", &invalid]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("pair 1: probability out of range"));

    assert_eq!(
        cbd(&["analyze", "/nonexistent/file.json"]).status.code(),
        Some(1)
    );
    assert_eq!(
        cbd(&["generate", "random", "--n", "5"]).status.code(),
        Some(1)
    );
    assert_eq!(
        cbd(&["generate", "random", "--n", "2", "--seed", "1"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(cbd(&["generate", "bogus"]).status.code(), Some(1));
    assert_eq!(cbd(&["frobnicate"]).status.code(), Some(1));

    let pr = generate(dir.path(), &["pr-box"], "pr.json");
    let out = Command::new(env!("CARGO_BIN_EXE_cbd"))
        .args(["analyze", &pr])
        .env("CBD_TOLERANCE", "nonsense")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn tolerance_override_changes_the_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let file = generate(dir.path(), &["tsirelson"], "t.json");
    let out = Command::new(env!("CARGO_BIN_EXE_cbd"))
        .args(["analyze", &file])
        .env("CBD_TOLERANCE", "0.5")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(
        stdout(&out).contains("CNTX = 0.414213562, noncontextual"),
        "{}",
        stdout(&out)
    );
}

#[test]
fn compat_command() {
    let dir = tempfile::tempdir().unwrap();
    let specker = generate(dir.path(), &["specker"], "specker.json");
    let identity = write(
        dir.path(),
        "identity.json",
        r#"{"connections":[{"i":1,"vw":1},{"i":2,"vw":1},{"i":3,"pp":0.5,"pm":0,"mp":0,"mm":0.5}]}"#,
    );
    let out = cbd(&["compat", &specker, &identity]);
    assert_eq!(out.status.code(), Some(0));
    assert!(
        stdout(&out).contains("s_odd = 6 > 4 : incompatible"),
        "{}",
        stdout(&out)
    );
    assert!(stdout(&out).contains("LP cross-check: infeasible"));

    let independent = write(
        dir.path(),
        "independent.json",
        r#"{"type":"cyclic-expectations","n":4,"v":[0,0,0,0],"w":[0,0,0,0],"vw":[0,0,0,0]}"#,
    );
    let conns = write(
        dir.path(),
        "conns.json",
        r#"{"connections":[{"i":1,"vw":0},{"i":2,"vw":0},{"i":3,"vw":0},{"i":4,"vw":0}]}"#,
    );
    let out = cbd(&["compat", &independent, &conns, "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let parsed: CompatOutput = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(parsed.compatibility.compatible);
    assert_eq!(parsed.lp_feasible, Some(true));

    let mismatched = write(
        dir.path(),
        "mismatched.json",
        r#"{"connections":[{"i":1,"pp":1,"pm":0,"mp":0,"mm":0},{"i":2,"vw":0},{"i":3,"vw":0},{"i":4,"vw":0}]}"#,
    );
    let out = cbd(&["compat", &independent, &mismatched]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("marginal"));
}
