use std::process::Command;

use fabdecide::run_cli;
use serde_json::Value;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("fabdecide").chain(args.iter().copied());
    let code = run_cli(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn json(args: &[&str]) -> Value {
    let mut full = vec!["--json"];
    full.extend_from_slice(args);
    let (code, out, err) = run(&full);
    assert_eq!(code, 0, "{err}");
    serde_json::from_str(&out).unwrap()
}

#[test]
fn mpw_seat_price() {
    let (code, out, _) = run(&["estimate", "mpw", "--tech", "tsmc180gp", "--area", "1.0"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().next(), Some("1100.00 USD"));
}

#[test]
fn mpw_seat_price_in_pounds() {
    let (code, out, _) = run(&["estimate", "mpw", "--tech", "tsmc180gp", "--area", "1", "--currency", "EGP"]);
    assert_eq!(code, 0);
    assert!(out.lines().nth(1).unwrap().starts_with("21066.76 EGP"), "{out}");
}

#[test]
fn unknown_technology_exits_2_with_one_line() {
    let (code, out, err) = run(&["estimate", "mpw", "--tech", "nosuch", "--area", "1"]);
    assert_eq!(code, 2);
    assert!(out.is_empty());
    assert_eq!(err.lines().count(), 1);
    assert!(err.contains("unknown technology"), "{err}");
}

#[test]
fn production_unit_cost() {
    let args = [
        "estimate", "production", "--tech", "tsmc65", "--area", "100", "--volume", "1000000", "--d0", "0.0025",
        "--edge", "0", "--scribe", "0",
    ];
    let (code, out, _) = run(&args);
    assert_eq!(code, 0);
    let unit = out.lines().find(|l| l.starts_with("unit cost")).unwrap();
    assert!(unit.ends_with("$4.514000"), "{unit}");
    let v = json(&args);
    assert_eq!(v["unit_cost_micro"], 4_514_000);
    assert_eq!(v["wafers_used"], 2007);
}

#[test]
fn usage_errors_exit_2() {
    for args in [&["bogus"][..], &["estimate", "mpw", "--tech", "tsmc65"], &["estimate", "mpw", "--tech", "x", "--area", "abc"]] {
        let (code, _, err) = run(args);
        assert_eq!(code, 2, "{args:?}");
        assert_eq!(err.lines().count(), 1, "{err}");
    }
    let (code, _, _) = run(&["estimate", "production", "--tech", "tsmc65", "--area", "1", "--volume", "0"]);
    assert_eq!(code, 2);
}

#[test]
fn help_exits_0() {
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("estimate"));
}

#[test]
fn json_errors_are_reported_on_stdout_too() {
    let (code, out, _) = run(&["--json", "catalog", "show", "nosuch"]);
    assert_eq!(code, 2);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["error"]["status"], 404);
    assert_eq!(v["error"]["code"], "unknown_technology");
}

#[test]
fn wait_and_convert() {
    let (_, out, _) = run(&["wait", "--shuttles", "12"]);
    assert_eq!(out.trim(), "15.2083 days");
    let (_, out, _) = run(&["wait", "--tech", "cmos350"]);
    assert_eq!(out.trim(), "45.625 days");
    let (code, _, _) = run(&["wait", "--shuttles", "0"]);
    assert_eq!(code, 2);
    let (_, out, _) = run(&["convert", "--amount", "31200", "--from", "EUR", "--to", "EGP"]);
    assert_eq!(out.trim(), "615592.64 EGP");
    let (code, _, err) = run(&["convert", "--amount", "1", "--from", "EGP", "--to", "USD"]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn catalog_list_and_filters() {
    let v = json(&["catalog", "list", "--where", "node_nm>=180"]);
    let ids: Vec<_> = v["technologies"].as_array().unwrap().iter().map(|n| n["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["tsmc180gp", "cmos350"]);
    let (code, out, _) = run(&["catalog", "list"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 6);
    let (code, _, _) = run(&["catalog", "list", "--where", "nonsense"]);
    assert_eq!(code, 2);
}

#[test]
fn select_from_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"required_f_hz": 1000, "required_voltage_v": 1.8, "die_area_mm2": 4, "volume_forecast": 100000,
            "business_category": "cat1", "market_orientation": "cost_oriented"}"#,
    )
    .unwrap();
    let spec = spec.to_str().unwrap();
    let v = json(&["select", "--spec", spec]);
    assert_eq!(v["status"], "ranked");
    assert_eq!(v["candidates"][0]["technology_id"], "tsmc180gp");
    let (code, out, _) = run(&["select", "--spec", spec]);
    assert_eq!(code, 0);
    assert!(out.lines().nth(1).unwrap().contains("tsmc180gp"));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ \"required_f_hz\": ").unwrap();
    let (code, _, err) = run(&["select", "--spec", bad.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("malformed spec"), "{err}");

    let (code, _, _) = run(&["select", "--spec", spec, "--weights", "0.5,0.5,0.5,0,0"]);
    assert_eq!(code, 2);
}

#[test]
fn custom_catalog_and_rates_files() {
    let dir = tempfile::tempdir().unwrap();
    let catalog = dir.path().join("catalog.json");
    let mut doc: Value = serde_json::from_str(fabdecide_core::seed::CATALOG_JSON).unwrap();
    doc["nodes"].as_array_mut().unwrap().retain(|n| n["id"] == "tsmc65");
    std::fs::write(&catalog, doc.to_string()).unwrap();
    let rates = dir.path().join("rates.json");
    std::fs::write(&rates, r#"{"as_of": "2024-01-01", "rates": [{"from": "USD", "to": "EGP", "rate": "30"}]}"#).unwrap();

    let c = catalog.to_str().unwrap();
    let r = rates.to_str().unwrap();
    let v = json(&["--catalog", c, "catalog", "list"]);
    assert_eq!(v["technologies"].as_array().unwrap().len(), 1);
    let (_, out, _) = run(&["--rates", r, "convert", "--amount", "2", "--from", "USD", "--to", "EGP"]);
    assert_eq!(out.trim(), "60.00 EGP");

    let (code, _, err) = run(&["--catalog", "/nonexistent/catalog.json", "catalog", "list"]);
    assert_eq!(code, 2);
    assert!(err.contains("cannot read catalog"));

    let bin = env!("CARGO_BIN_EXE_fabdecide");
    let output = Command::new(bin)
        .args(["catalog", "list", "--json"])
        .env("FABDECIDE_CATALOG", c)
        .output()
        .unwrap();
    assert!(output.status.success());
    let v: Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(v["technologies"][0]["id"], "tsmc65");
    let output = Command::new(bin)
        .args(["convert", "--amount", "1", "--from", "USD", "--to", "EGP"])
        .env("FABDECIDE_RATES", r)
        .output()
        .unwrap();
    assert_eq!(String::from_utf8(output.stdout).unwrap().trim(), "30.00 EGP");
}

#[test]
fn breakeven_reports_none_below_the_crossing() {
    let v = json(&["breakeven", "--tech", "tsmc65", "--area", "10", "--scan-limit", "100"]);
    assert_eq!(v["breakeven_volume"], Value::Null);
    let (_, out, _) = run(&["breakeven", "--tech", "tsmc65", "--area", "10", "--scan-limit", "100"]);
    assert!(out.starts_with("no break-even up to 100 units"));
}
