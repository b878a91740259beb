use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn spectrum(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spectrum"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn assert_ok(o: &Output) {
    assert!(o.status.success(), "exit {:?}: {}", o.status.code(), stderr(o));
}

/// Exit status 1 with a single `error[kind]:` diagnostic line.
fn assert_diagnostic(o: &Output, kind: &str) {
    assert_eq!(o.status.code(), Some(1), "{}", stderr(o));
    let err = stderr(o);
    let lines: Vec<&str> = err.lines().collect();
    assert_eq!(lines.len(), 1, "{err}");
    assert!(lines[0].starts_with(&format!("error[{kind}]: ")), "{err}");
}

const CONFIG: &str = r#"{"licenses": ["A", "B"], "opening": 0, "increment": 1, "activity": 1.0, "max_rounds": 1000}"#;
const BIDDERS: &str = r#"[
  {"id": "x", "valuations": {"A": 10, "B": 4}, "eligibility": 2, "demand_cap": 2},
  {"id": "y", "valuations": {"A": 7, "B": 9}, "eligibility": 2, "demand_cap": 1}
]"#;

#[test]
fn auction_writes_outcome_json() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("a.json"), CONFIG).unwrap();
    fs::write(tmp.path().join("b.json"), BIDDERS).unwrap();
    let o = spectrum(
        &["auction", "--config", "a.json", "--bidders", "b.json", "--seed", "3", "--out", "o.json"],
        tmp.path(),
    );
    assert_ok(&o);
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("o.json")).unwrap()).unwrap();
    assert_eq!(v["winners"]["A"], "x");
    assert_eq!(v["winners"]["B"], "y");
    assert_eq!(v["terminated"], true);
    assert!(v.get("trace").is_none());
}

#[test]
fn malformed_and_missing_inputs_are_diagnosed() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("a.json"), "{\"licenses\": [").unwrap();
    fs::write(tmp.path().join("b.json"), BIDDERS).unwrap();
    let bad = spectrum(
        &["auction", "--config", "a.json", "--bidders", "b.json", "--seed", "1"],
        tmp.path(),
    );
    assert_diagnostic(&bad, "auction");
    assert!(stderr(&bad).contains("a.json"));

    let missing = spectrum(&["estimate", "ols", "--data", "nope.csv"], tmp.path());
    assert_diagnostic(&missing, "io");
    assert!(stderr(&missing).contains("nope.csv"));
}

#[test]
fn usage_errors_exit_with_status_2() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(spectrum(&["gen-data"], tmp.path()).status.code(), Some(2));
    assert_eq!(spectrum(&["estimate", "4sls", "--data", "x"], tmp.path()).status.code(), Some(2));
}

#[test]
fn gen_data_is_deterministic_and_estimable() {
    let tmp = tempfile::tempdir().unwrap();
    for name in ["g1.csv", "g2.csv"] {
        assert_ok(&spectrum(
            &["gen-data", "--seed", "5", "--n", "40", "--truncate", "--out", name],
            tmp.path(),
        ));
    }
    let a = fs::read(tmp.path().join("g1.csv")).unwrap();
    assert_eq!(a, fs::read(tmp.path().join("g2.csv")).unwrap());
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 41);

    let o = spectrum(&["estimate", "3sls", "--data", "g1.csv", "--format", "table"], tmp.path());
    assert_ok(&o);
    let table = String::from_utf8(o.stdout).unwrap();
    for header in ["Coefficient", "Standard error", "z", "P > z", "R²", "P(χ²)"] {
        assert!(table.contains(header), "missing {header}:\n{table}");
    }

    let o = spectrum(&["estimate", "2sls", "--data", "g1.csv", "--format", "json"], tmp.path());
    assert_ok(&o);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["equations"].as_array().unwrap().len(), 2);

    let o = spectrum(&["stats", "--data", "g1.csv"], tmp.path());
    assert_ok(&o);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v.get("summary").is_some() && v.get("correlation").is_some());
}

#[test]
fn untruncated_draws_need_lenient_loading() {
    let tmp = tempfile::tempdir().unwrap();
    assert_ok(&spectrum(&["gen-data", "--seed", "1", "--n", "400", "--out", "g.csv"], tmp.path()));
    let strict = spectrum(&["stats", "--data", "g.csv"], tmp.path());
    assert_diagnostic(&strict, "data");
    assert_ok(&spectrum(&["stats", "--data", "g.csv", "--lenient"], tmp.path()));
}

#[test]
fn supply_demand_chart_marks_both_equilibria() {
    let tmp = tempfile::tempdir().unwrap();
    assert_ok(&spectrum(
        &["market", "curves", "--out", "c.csv", "--summary", "s.json"],
        tmp.path(),
    ));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("s.json")).unwrap()).unwrap();
    let base = summary["base"]["p"].as_f64().unwrap();
    let fee = summary["fee"]["p"].as_f64().unwrap();
    assert!(fee > base);

    for out in ["c1.svg", "c2.svg"] {
        assert_ok(&spectrum(
            &["chart", "--kind", "supply-demand", "--series", "c.csv", "--out", out],
            tmp.path(),
        ));
    }
    let svg = fs::read_to_string(tmp.path().join("c1.svg")).unwrap();
    assert_eq!(svg, fs::read_to_string(tmp.path().join("c2.svg")).unwrap());
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert!(svg.contains("E0 (") && svg.contains("E1 ("));
}

#[test]
fn empty_series_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("e.csv"), "t,q,p,g\n").unwrap();
    let o = spectrum(
        &["chart", "--kind", "diffusion", "--series", "e.csv", "--out", "e.svg"],
        tmp.path(),
    );
    assert_diagnostic(&o, "chart");
    assert!(stderr(&o).contains("empty series"));
    assert!(!tmp.path().join("e.svg").exists());
}

#[test]
fn histogram_accepts_negative_reference() {
    let tmp = tempfile::tempdir().unwrap();
    assert_ok(&spectrum(
        &[
            "montecarlo", "--seed", "2", "--n", "200", "--replications", "8", "--out", "mc.json",
            "--estimates", "mc.csv",
        ],
        tmp.path(),
    ));
    let o = spectrum(
        &[
            "chart", "--kind", "mc-histogram", "--series", "mc.csv", "--column", "supply.CL",
            "--reference", "-0.0004917", "--out", "h.svg",
        ],
        tmp.path(),
    );
    assert_ok(&o);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("mc.json")).unwrap()).unwrap();
    assert_eq!(report["replications"], 8);
}

#[test]
fn fee_table_lists_every_regime() {
    let tmp = tempfile::tempdir().unwrap();
    let o = spectrum(&["market", "fees"], tmp.path());
    assert_ok(&o);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("country,initial,recurring,years,total,"));
    assert_eq!(text.lines().count(), 8);
    assert!(text.lines().any(|l| l.starts_with("\"Belgium") && l.contains(",203382,")));
}

#[test]
fn diffusion_comparison_labels_paths() {
    let tmp = tempfile::tempdir().unwrap();
    let o = spectrum(
        &["diffusion", "--cl", "0", "--compare-cl", "400", "--periods", "10", "--out", "d.csv"],
        tmp.path(),
    );
    assert_ok(&o);
    let text = fs::read_to_string(tmp.path().join("d.csv")).unwrap();
    assert!(text.starts_with("path,t,q,p,g"));
    assert_eq!(text.lines().filter(|l| l.starts_with("CL=400")).count(), 10);
    assert!(stderr(&o).contains("mean growth"));
}
