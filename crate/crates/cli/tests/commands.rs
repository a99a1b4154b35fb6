use std::path::{Path, PathBuf};

use agc_cli::{run, EXIT_INFEASIBLE, EXIT_OK, EXIT_PARSE};

const SCALAR: &str = r#"
mode = "leaderless"

[plant]
d = 1
p = 1
a = [1.0]
b = [1.0]
q = [1.0]

[synthesis]
gamma = 2.0

[topology]
agents = 2
edges = [[1, 2]]

[initial]
states = [[0.0], [1.0]]
"#;

fn agc(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let full: Vec<&str> = std::iter::once("agc").chain(args.iter().copied()).collect();
    let code = run(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn last_row(csv: &str) -> Vec<f64> {
    csv.lines()
        .last()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect()
}

#[test]
fn scalar_synthesize_prints_golden_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", SCALAR);
    let (code, out, _) = agc(&["synthesize", p(&cfg)]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("certificate = [[1.6180339887]]"), "{out}");
    assert!(out.contains("certificate_margin"));
}

#[test]
fn malformed_dimension_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", &SCALAR.replace("q = [1.0]", "q = [1.0, 2.0]"));
    let (code, _, err) = agc(&["synthesize", p(&cfg)]);
    assert_eq!(code, EXIT_PARSE);
    assert!(err.contains("plant.q"), "{err}");
}

#[test]
fn missing_file_is_a_parse_error() {
    let (code, _, err) = agc(&["synthesize", "/nonexistent/agc.toml"]);
    assert_eq!(code, EXIT_PARSE);
    assert!(!err.is_empty());
}

#[test]
fn help_exits_zero_and_bad_flags_exit_two() {
    assert_eq!(agc(&["--help"]).0, EXIT_OK);
    assert_eq!(agc(&["simulate"]).0, EXIT_PARSE);
    assert_eq!(agc(&["demo", "example-3"]).0, EXIT_PARSE);
}

#[test]
fn unstabilizable_plant_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let body = SCALAR.replace("b = [1.0]", "b = [0.0]");
    let cfg = write(dir.path(), "u.toml", &body);
    assert_eq!(agc(&["synthesize", p(&cfg)]).0, EXIT_INFEASIBLE);
}

#[test]
fn zero_disagreement_gives_zero_cost_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "z.toml",
        &SCALAR.replace("states = [[0.0], [1.0]]", "states = [[0.5], [0.5]]"),
    );
    let csv = dir.path().join("z.csv");
    let (code, out, _) = agc(&["simulate", p(&cfg), "--out", p(&csv)]);
    assert_eq!(code, EXIT_OK, "{out}");
    let text = std::fs::read_to_string(&csv).unwrap();
    for line in text.lines().skip(1) {
        let row: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        let n = row.len();
        assert_eq!(row[n - 3], 0.0);
        assert_eq!(row[n - 2], 0.0);
        assert_eq!(row[n - 1], 0.0);
    }
}

#[test]
fn two_agent_run_matches_finer_reference() {
    let dir = tempfile::tempdir().unwrap();
    let coarse = write(dir.path(), "c.toml", &format!("{SCALAR}\n[sim]\ndt = 0.001\nt_final = 1.0\nsample_stride = 100\n"));
    let fine = write(dir.path(), "f.toml", &format!("{SCALAR}\n[sim]\ndt = 0.0001\nt_final = 1.0\nsample_stride = 1000\n"));
    let (c_csv, f_csv) = (dir.path().join("c.csv"), dir.path().join("f.csv"));
    assert_eq!(agc(&["simulate", p(&coarse), "--out", p(&c_csv)]).0, EXIT_OK);
    assert_eq!(agc(&["simulate", p(&fine), "--out", p(&f_csv)]).0, EXIT_OK);
    let a = last_row(&std::fs::read_to_string(&c_csv).unwrap());
    let b = last_row(&std::fs::read_to_string(&f_csv).unwrap());
    assert_eq!(a.len(), b.len());
    assert!((a[0] - 1.0).abs() < 1e-12 && (b[0] - 1.0).abs() < 1e-12);
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-6, "{x} vs {y}");
    }
}

#[test]
fn simulate_then_verify_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", SCALAR);
    let csv = dir.path().join("t.csv");
    let plot = dir.path().join("t.gp");
    let (code, sim_out, _) = agc(&["simulate", p(&cfg), "--out", p(&csv), "--plot-script", p(&plot)]);
    assert_eq!(code, EXIT_OK);
    assert!(std::fs::read_to_string(&plot).unwrap().contains("t.csv"));
    let (code, ver_out, _) = agc(&["verify", p(&cfg), p(&csv)]);
    assert_eq!(code, EXIT_OK);
    let pick = |s: &str, key: &str| {
        s.lines()
            .find(|l| l.starts_with(key))
            .map(|l| l.split(" = ").nth(1).unwrap().parse::<f64>().unwrap())
            .unwrap()
    };
    for key in ["realized_cost", "bound", "final_disagreement"] {
        let (a, b) = (pick(&sim_out, key), pick(&ver_out, key));
        assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "{key}: {a} vs {b}");
    }
}

#[test]
fn verify_rejects_foreign_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", SCALAR);
    let csv = write(dir.path(), "bad.csv", "t,x\n0,1\n");
    assert_eq!(agc(&["verify", p(&cfg), p(&csv)]).0, EXIT_PARSE);
}

#[test]
fn seeded_ensemble_writes_one_csv_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let body = SCALAR.replace(
        "states = [[0.0], [1.0]]",
        "seed = 7\nlow = -1.0\nhigh = 1.0",
    );
    let cfg = write(dir.path(), "e.toml", &body);
    let csv = dir.path().join("e.csv");
    let (code, out, err) = agc(&["simulate", p(&cfg), "--out", p(&csv), "--runs", "3"]);
    assert_eq!(code, EXIT_OK, "{err}");
    for i in 1..=3 {
        assert!(dir.path().join(format!("e-{i}.csv")).exists());
        assert!(out.contains(&format!("initial.seed = {}", 6 + i)), "{out}");
    }
}

#[test]
fn identical_config_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let body = SCALAR.replace("states = [[0.0], [1.0]]", "seed = 11\nlow = -2.0\nhigh = 2.0");
    let cfg = write(dir.path(), "d.toml", &body);
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    agc(&["simulate", p(&cfg), "--out", p(&a)]);
    agc(&["simulate", p(&cfg), "--out", p(&b)]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn echoed_config_reparses_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", SCALAR);
    let (_, first, _) = agc(&["check-config", p(&cfg)]);
    let again = write(dir.path(), "again.toml", &first);
    let (code, second, _) = agc(&["check-config", p(&again)]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(first, second);
}

#[test]
fn example_one_demo_passes_its_checks() {
    let (code, out, _) = agc(&["demo", "example-1"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("printed_check.pass = true"));
    assert!(out.contains("consensus_achieved = true"));
    assert!(out.contains("bound_holds = true"));
    assert!(out.contains("initial.seed = 1"));
}

#[test]
fn example_two_demo_tracks_the_leader() {
    let (code, out, _) = agc(&["demo", "example-2"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("printed_check.pass = true"));
    assert!(out.contains("tracking_achieved = true"), "{out}");
}

#[test]
fn strict_example_two_reports_precondition() {
    let (code, out, err) = agc(&["demo", "example-2", "--strict"]);
    assert_eq!(code, EXIT_INFEASIBLE);
    assert!(out.contains("strict.lambda_max_bbt = 362.000000"));
    assert!(err.contains("362"), "{err}");
}
