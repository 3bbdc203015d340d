use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn spac(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spac"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spac runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn report(o: &Output) -> Value {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).expect("json report");
    assert!(v["manifest"]["config_digest"].as_str().is_some_and(|d| d.len() == 64));
    v
}

/// Report without the wall-clock fields.
fn stable(mut v: Value) -> Value {
    let m = v["manifest"].as_object_mut().unwrap();
    m.remove("wall_clock");
    m.remove("elapsed_ms");
    if let Some(r) = v["report"].as_object_mut() {
        r.remove("timing");
    }
    v
}

#[test]
fn protocol_check_reports_layout() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("two.spac"), "protocol p\nfield dst 8 role=routing_key\nfield src 8\n").unwrap();
    let o = spac(d.path(), &["protocol", "check", "two.spac", "--width", "256"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("header 16 bits"), "{}", stdout(&o));
    assert!(stdout(&o).contains("0 straddles"));

    fs::write(d.path().join("ab.spac"), "protocol p\nfield a 4 role=routing_key\nfield b 14\n").unwrap();
    let o = spac(d.path(), &["protocol", "check", "ab.spac", "--width", "16"]);
    assert!(stdout(&o).contains("b straddles"), "{}", stdout(&o));

    fs::write(d.path().join("bad.spac"), "protocol p\nfield a 4 role=routing_key\nfield b x\n").unwrap();
    let o = spac(d.path(), &["protocol", "check", "bad.spac"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

fn gen_params(dir: &Path, name: &str, body: &str) -> String {
    let f = format!("{name}.toml");
    fs::write(dir.join(&f), body).unwrap();
    f
}

#[test]
fn trace_gen_then_analyze() {
    let d = tempfile::tempdir().unwrap();
    let p = gen_params(
        d.path(),
        "const",
        "model = \"constant_rate\"\nports = 8\nload = 1.0\nslots = 2000\nself_traffic = true\n",
    );
    let o = spac(d.path(), &["--out", "c", "trace", "gen", "--params", &p, "--seed", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let f = report(&spac(d.path(), &["trace", "analyze", "c/trace.csv"]));
    assert_eq!(f["report"]["idc_burst"].as_f64(), Some(0.0));
    assert!((f["report"]["addr_entropy_bits"].as_f64().unwrap() - 3.0).abs() < 1e-9);

    let o = spac(d.path(), &["--out", "p", "trace", "gen", "--preset", "poisson", "--seed", "5"]);
    assert!(o.status.success());
    // 10^4 windows of 50 slots
    let f = report(&spac(d.path(), &["trace", "analyze", "p/trace.csv", "--window-ns", "500"]));
    let idc = f["report"]["idc_burst"].as_f64().unwrap();
    assert!((idc - 1.0).abs() <= 0.1, "idc {idc}");
}

const UNLOADED: &str = "# spac-trace ports=8 link_gbps=10\ntime_ns,src_port,src_addr,dst_addr,payload_bytes\n0,1,1,0,16\n2000,0,0,1,16\n";

#[test]
fn annotated_unloaded_packet() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("one.csv"), UNLOADED).unwrap();
    fs::write(d.path().join("ann.toml"), "total_ns = 57.3\n").unwrap();
    let args = |fid: &'static str| {
        vec![
            "sim", "run", "--spec", "basic", "one.csv", "--clock-mhz", "165", "--warmup-cycles", "100", "--fidelity", fid,
        ]
    };
    let mut a = args("cycle");
    a.extend(["--annotate", "ann.toml"]);
    let r = report(&spac(d.path(), &a));
    assert!((r["report"]["latency_ns"]["p50"].as_f64().unwrap() - 57.3).abs() < 1e-9);

    let c = report(&spac(d.path(), &args("cycle")));
    let s = report(&spac(d.path(), &args("surrogate")));
    assert_eq!(c["report"]["latencies_ns"], s["report"]["latencies_ns"]);
    assert_eq!(c["report"]["conservation"]["injected"], c["report"]["conservation"]["delivered"]);
}

#[test]
fn reports_are_reproducible() {
    let d = tempfile::tempdir().unwrap();
    let o = spac(d.path(), &["--out", "t", "trace", "gen", "--preset", "bursty", "--seed", "2", "--slots", "2000"]);
    assert!(o.status.success());
    let run = || stable(report(&spac(d.path(), &["sim", "run", "--spec", "basic", "t/trace.csv", "--table", "full_lookup"])));
    assert_eq!(run(), run());
}

#[test]
fn dse_selects_and_fails_cleanly() {
    let d = tempfile::tempdir().unwrap();
    assert!(spac(d.path(), &["--out", "h", "trace", "gen", "--preset", "hft", "--seed", "1"]).status.success());
    let o = spac(d.path(), &["--out", "r", "dse", "run", "--spec", "hft", "h/trace.csv", "--sla-ns", "29"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&fs::read_to_string(d.path().join("r/dse_report.json")).unwrap()).unwrap();
    let c = &v["report"]["optimal"]["config"];
    assert_eq!((c["fwd_table"].as_str(), c["voq"].as_str(), c["scheduler"].as_str()), (Some("full_lookup"), Some("nxn"), Some("rr")));
    let svg = fs::read_to_string(d.path().join("r/pareto.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<polygon"));
    assert!(fs::read_to_string(d.path().join("r/pareto.csv")).unwrap().lines().count() > 1);

    let o = spac(d.path(), &["dse", "run", "--spec", "hft", "h/trace.csv", "--sla-ns", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("[profile]") && err.contains("no feasible design"), "{err}");
}

#[test]
fn dse_oracle_containment() {
    let d = tempfile::tempdir().unwrap();
    let o = spac(d.path(), &["--out", "i", "trace", "gen", "--preset", "incast", "--seed", "1", "--slots", "4000"]);
    assert!(o.status.success());
    let o = spac(
        d.path(),
        &["--out", "r", "dse", "run", "--spec", "basic", "i/trace.csv", "--max-width", "256", "--sla-ns", "200", "--oracle"],
    );
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(o.status.success(), "{err}");
    assert!(err.contains("contained"), "{err}");
    let csv = fs::read_to_string(d.path().join("r/pareto.csv")).unwrap();
    assert!(csv.lines().any(|l| l.contains(",oracle,")));
}
