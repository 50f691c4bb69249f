use std::path::Path;

use hhcn::cli::{
    run, PlanGraphReport, PlanTreeReport, EXIT_COMPUTE, EXIT_INPUT, EXIT_OK, EXIT_USAGE,
};
use hhcn::multicast::{verify_plan, WeightedGraph};
use hhcn::prefix::{security_check, verify_prefix_free};
use serde_json::Value;

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("hhcn").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn file(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const GRAPH: &str = r#"{
  "vertices": ["r", "a", "b", "c", "d", "e", "f"],
  "edges": [["r","a",1], ["r","b",1], ["r","c",3], ["a","d",2], ["a","e",1], ["b","f",2], ["c","f",1], ["d","e",4]],
  "root": "r",
  "leaders": [{"id": 10, "p": "0.5"}, {"id": 11, "p": "0.25"}, {"id": 12, "p": "0.25"}]
}"#;

#[test]
fn plan_tree_json_round_trips_through_verifiers() {
    let dir = tempfile::tempdir().unwrap();
    let input = file(
        dir.path(),
        "p.json",
        r#"{"arity":2,"leaders":["0.4","0.3","0.2","0.1"]}"#,
    );
    let (code, out, _) = call(&["plan-tree", "--input", &input]);
    assert_eq!(code, EXIT_OK);
    let report: PlanTreeReport = serde_json::from_str(&out).unwrap();
    let plan = report.to_plan();
    assert!(verify_prefix_free(&plan));
    assert!(security_check(&plan));
    let depths: Vec<u32> = report.leaders.iter().map(|l| l.depth).collect();
    assert_eq!(depths, vec![1, 2, 3, 3]);
    assert_eq!(report.expected_depth.to_string(), "19/10");
}

#[test]
fn plan_tree_tampered_paths_fail_verification() {
    let dir = tempfile::tempdir().unwrap();
    let input = file(dir.path(), "p.json", r#"{"leaders":["1/2","1/4","1/4"]}"#);
    let (_, out, _) = call(&["plan-tree", "--input", &input]);
    let mut json: Value = serde_json::from_str(&out).unwrap();
    json["leaders"][1]["path"] = Value::String("01".into());
    let report: PlanTreeReport = serde_json::from_value(json).unwrap();
    assert!(!verify_prefix_free(&report.to_plan()));
    assert!(!security_check(&report.to_plan()));
}

#[test]
fn plan_graph_json_round_trips_through_verify_plan() {
    let dir = tempfile::tempdir().unwrap();
    let input = file(dir.path(), "g.json", GRAPH);
    let (code, out, _) = call(&["plan-graph", "--input", &input]);
    assert_eq!(code, EXIT_OK);
    let report: PlanGraphReport = serde_json::from_str(&out).unwrap();
    assert!(report.verified);

    let raw: Value = serde_json::from_str(GRAPH).unwrap();
    let names: Vec<String> = serde_json::from_value(raw["vertices"].clone()).unwrap();
    let edges: Vec<(String, String, f64)> = serde_json::from_value(raw["edges"].clone()).unwrap();
    let graph = WeightedGraph::new(names, edges).unwrap();
    let plan = report.to_plan(&graph).unwrap();
    assert!(verify_plan(&plan, &graph));

    let mut tampered: Value = serde_json::from_str(&out).unwrap();
    tampered["realized_expected_depth"] = serde_json::json!("1");
    let bad: PlanGraphReport = serde_json::from_value(tampered).unwrap();
    assert!(!verify_plan(&bad.to_plan(&graph).unwrap(), &graph));
}

#[test]
fn plan_graph_dot_marks_root_and_leaders() {
    let dir = tempfile::tempdir().unwrap();
    let input = file(dir.path(), "g.json", GRAPH);
    let (code, out, _) = call(&["plan-graph", "--input", &input, "--format", "dot"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.starts_with("graph multicast_plan {"));
    assert!(out.contains("\"r\" [shape=box"));
    assert_eq!(out.matches("fillcolor=lightblue").count(), 3);
    assert_eq!(out.matches(" -- ").count(), 6);
}

#[test]
fn tree_stats_reports_both_normalizations() {
    let dir = tempfile::tempdir().unwrap();
    let input = file(
        dir.path(),
        "t.json",
        r#"{"D":2,"n_max":2,"leaders":[{"depth":1,"count":1},{"depth":2,"count":2}]}"#,
    );
    let (code, out, _) = call(&["tree-stats", "--input", &input, "--mode", "exact"]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["node_count"], 7);
    assert_eq!(v["mode"], "exact");
    assert_eq!(v["levels"][0]["local_leader_fraction"]["num"], 1);
    assert_eq!(v["levels"][0]["local_leader_fraction"]["den"], 2);
    assert_eq!(v["p_any_local_leader"]["exact"]["num"], 3);
    assert_eq!(v["p_any_local_leader"]["exact"]["den"], 7);
    assert!(v["reliability"].is_null());
}

#[test]
fn gossip_trace_records_inward_hops() {
    let dir = tempfile::tempdir().unwrap();
    let input = file(
        dir.path(),
        "g.json",
        r#"{"nodes":[{"id":1,"x":10,"y":0},{"id":2,"x":20,"y":0},{"id":3,"x":30,"y":0}],
            "base_station":{"x":0,"y":0},"radius":10,"probabilities":[0.9,0.8,0.7],"origin":3}"#,
    );
    let trace = dir.path().join("trace.txt");
    let trace_s = trace.to_string_lossy().into_owned();
    let (code, out, _) = call(&[
        "gossip", "--input", &input, "--trials", "500", "--trace", &trace_s,
    ]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["simulation"]["trials"], 500);
    assert_eq!(v["origin_level"], 3);
    let text = std::fs::read_to_string(&trace).unwrap();
    assert_eq!(
        text.lines()
            .filter(|l| l.contains("transmissions="))
            .count(),
        100
    );
    for line in text.lines().filter(|l| l.contains(" hop ")) {
        let levels: Vec<u32> = line
            .split(['(', ')'])
            .filter_map(|t| t.strip_prefix('L'))
            .map(|t| t.parse().unwrap())
            .collect();
        assert!(levels[0] > levels[1], "{line}");
    }
}

#[test]
fn fuse_reports_every_rule_and_fails_without_agreement() {
    let dir = tempfile::tempdir().unwrap();
    let ok = file(
        dir.path(),
        "ok.json",
        r#"{"intervals":[[8,12],[11,13],[14,15]],"f":1}"#,
    );
    let (code, out, _) = call(&["fuse", "--input", &ok]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    let functions: Vec<&str> = v["results"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["function"].as_str().unwrap())
        .collect();
    assert_eq!(functions, vec!["m", "omega", "n", "s"]);
    assert_eq!(v["results"][0]["output"], serde_json::json!([[11.0, 12.0]]));

    let split = file(
        dir.path(),
        "split.json",
        r#"{"intervals":[[0,1],[2,3],[4,5]],"f":1}"#,
    );
    let (code, out, err) = call(&["fuse", "--input", &split, "--function", "m"]);
    assert_eq!(code, EXIT_COMPUTE);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["results"][0]["error"]["kind"], "NoAgreement");
    assert!(!err.is_empty());
}

#[test]
fn usage_and_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(call(&[]).0, EXIT_USAGE);
    assert_eq!(call(&["plan-tree"]).0, EXIT_USAGE);
    assert_eq!(
        call(&["plan-tree", "--input", "x", "--mode", "other"]).0,
        EXIT_USAGE
    );
    let typo = file(dir.path(), "typo.json", r#"{"arity":2,"leader":["1"]}"#);
    assert_eq!(call(&["plan-tree", "--input", &typo]).0, EXIT_INPUT);
    let unnormalized = file(dir.path(), "u.json", r#"{"leaders":["0.5","0.4"]}"#);
    let (code, _, err) = call(&["plan-tree", "--input", &unnormalized]);
    assert_eq!(code, EXIT_INPUT);
    assert!(err.contains("invalid input"));
    let (code, out, _) = call(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("plan-graph"));
}
