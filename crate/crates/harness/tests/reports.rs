use misnc_core::Variant;
use misnc_harness::report::{report_tables, sweep_tables};
use misnc_harness::{
    emit_report, run_experiment, run_sweep, InstanceDocument, ReportFormat, SweepConfig,
};

#[test]
fn instance_round_trip_is_identity() {
    for doc in [
        InstanceDocument::butterfly_offline(150.0),
        InstanceDocument::butterfly_online(9, 10, 10, 1.5),
        InstanceDocument::butterfly_mincost(150.0),
    ] {
        let once = InstanceDocument::from_json(&doc.to_json()).unwrap();
        let twice = InstanceDocument::from_json(&once.to_json()).unwrap();
        assert_eq!(once, doc);
        assert_eq!(twice, once);
    }
}

#[test]
fn online_utilization_matches_decision_series() {
    let mut doc = InstanceDocument::butterfly_online(2, 100, 100, 1.5);
    doc.params.phi = Some(2.0);
    let report = run_experiment(&doc).unwrap();
    let online = report.online.as_ref().unwrap();
    let caps: Vec<f64> = doc.network.links.iter().map(|l| l.capacity).collect();
    for (e, &u) in online.utilization.iter().enumerate() {
        let total: f64 = online.decisions.iter().map(|d| d.increments[e]).sum();
        assert!((total / caps[e] - u).abs() <= 1e-9);
    }
    let accepted = online.decisions.iter().filter(|d| d.accepted).count();
    assert_eq!(accepted, online.accepted);
}

#[test]
fn reports_reproduce_from_embedded_instance() {
    let mut doc = InstanceDocument::butterfly_online(4, 30, 30, 1.5);
    doc.params.variant = Some(Variant::Shifted);
    let first = run_experiment(&doc).unwrap();
    let second = run_experiment(&first.instance).unwrap();
    assert_eq!(first.instance, second.instance);
    assert_eq!(first.online, second.online);

    let offline = run_experiment(&InstanceDocument::butterfly_offline(150.0)).unwrap();
    let again = run_experiment(&offline.instance).unwrap();
    assert_eq!(offline.offline, again.offline);
}

#[test]
fn offline_butterfly_report() {
    let report = run_experiment(&InstanceDocument::butterfly_offline(150.0)).unwrap();
    let s = report.offline.as_ref().unwrap();
    assert_eq!(report.instance.params.epsilon, Some(0.1));
    assert!(s.lambda >= 0.729 && s.lambda <= 1.0);
    assert_eq!(s.bottleneck.as_deref(), Some("e10"));
    assert!(report.passed());
    let tables = report_tables(&report).unwrap();
    assert_eq!(tables[0].1.lines().count(), 17);
}

#[test]
fn sweep_tables_have_expected_shape() {
    let sweep = run_sweep(&SweepConfig::default()).unwrap();
    assert!(sweep.passed());
    let tables = sweep_tables(&sweep).unwrap();
    let rows = |name: &str| {
        tables
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t.lines().count() - 1)
            .unwrap()
    };
    assert_eq!(rows("offline_sweep.csv"), 4);
    assert_eq!(rows("online_sweep.csv"), 4);
    assert_eq!(rows("link_loads.csv"), 16);

    let reference = sweep
        .offline_rows
        .iter()
        .find(|r| r.epsilon == 0.1)
        .unwrap();
    assert_eq!(reference.normalized_time, 1.0);
    for w in sweep.online_rows.windows(2) {
        assert!(w[1].acceptance_ratio <= w[0].acceptance_ratio + 0.05);
    }
}

#[test]
fn sweep_adds_reference_runs() {
    let config = SweepConfig {
        epsilons: vec![0.4],
        phis: vec![8.0],
        ..SweepConfig::default()
    };
    let sweep = run_sweep(&config).unwrap();
    assert_eq!(sweep.offline_rows.len(), 1);
    assert_eq!(sweep.online_rows.len(), 1);
    assert_eq!(sweep.offline.len(), 2);
    assert_eq!(sweep.link_rows.len(), 16);
}

#[test]
fn emit_writes_requested_files() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&InstanceDocument::butterfly_mincost(150.0)).unwrap();
    let written = emit_report(&report, ReportFormat::Both, dir.path()).unwrap();
    let names: Vec<String> = written
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names, ["report.json", "mincost.csv"]);
    let text = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    let parsed: misnc_harness::ExperimentReport = serde_json::from_str(&text).unwrap();
    assert_eq!(parsed.mincost, report.mincost);
}

#[test]
fn emit_to_unwritable_path_fails() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let report = run_experiment(&InstanceDocument::butterfly_mincost(150.0)).unwrap();
    assert!(emit_report(&report, ReportFormat::Json, &blocker.join("sub")).is_err());
}
