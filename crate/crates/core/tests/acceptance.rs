//! The acceptance suite, driven through the CLI exactly as a user would run
//! it. Everything lives in one test so criteria run one after another and
//! their timings are not distorted by sibling tests.

use std::fs;

use serde_json::Value;
use volterra_mrf::acceptance::BUDGETS;
use volterra_mrf::cli;

const SEED: &str = "20261018";

fn selftest(dir: &std::path::Path, workers: usize) -> (Vec<u8>, Value, Value) {
    let out = dir.join(format!("selftest-w{workers}.json"));
    let code = cli::run(["volterra-mrf", "--workers", &workers.to_string(), "--out", out.to_str().unwrap(), "selftest", "--seed", SEED]);
    assert!(code == 0 || code == 2, "selftest errored with exit code {code}");
    let bytes = fs::read(&out).unwrap();
    let report: Value = serde_json::from_slice(&bytes).unwrap();
    let timing: Value = serde_json::from_str(&fs::read_to_string(cli::sidecar(&out)).unwrap()).unwrap();
    (bytes, report, timing)
}

#[test]
fn acceptance_suite() {
    let dir = tempfile::tempdir().unwrap();
    let (first, report, timing) = selftest(dir.path(), 1);
    let (second, _, _) = selftest(dir.path(), 3);

    let seconds = |id: u64| {
        timing["detail"].as_array().unwrap().iter().find(|t| t["criterion"] == id).map(|t| t["seconds"].as_f64().unwrap()).unwrap()
    };

    let mut failures = Vec::new();
    for c in report["result"].as_array().unwrap() {
        let id = c["id"].as_u64().unwrap();
        let secs = seconds(id);
        let budget = BUDGETS[id as usize - 1];
        let within = secs < budget;
        let mut pass = c["pass"].as_bool().unwrap() && within;
        let mut summary = c["summary"].as_str().unwrap().to_string();
        if id == 10 {
            let same = first == second;
            pass &= same;
            summary.push_str(&format!("; full suite under 1 and 3 workers: {}", if same { "byte-identical" } else { "reports differ" }));
        }
        println!(
            "criterion {id:02} {:<28} {} {summary} [{secs:.1}s{}]",
            c["name"].as_str().unwrap(),
            if pass { "PASS" } else { "FAIL" },
            if budget.is_finite() { format!(" / budget {budget}s") } else { String::new() }
        );
        if !pass {
            failures.push(id);
        }
    }
    assert_eq!(report["result"].as_array().unwrap().len(), 10);
    assert!(failures.is_empty(), "failing criteria: {failures:?}");
}
