use otf_core::config::{Algorithm, RunParams};
use otf_core::controller::{tune, TuneOptions, TuneTable};
use otf_core::harness::export::{read_record, tune_csv, write_json};
use otf_core::harness::run_experiment;
use otf_core::live::Param;
use otf_core::ObjectiveId;

#[test]
fn json_export_import_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    for a in Algorithm::ALL {
        let o = a.default_objective();
        let cfg = RunParams::default().resolve(a, o, 77).unwrap();
        let rec = run_experiment(a, o, &cfg, 77).unwrap();
        let path = dir.path().join(format!("{a}.json"));
        write_json(&path, &rec).unwrap();
        assert_eq!(read_record(&path).unwrap(), rec, "{a}");
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("{\n  \"schema_version\": 1,"));
    }
}

#[test]
fn tune_csv_has_one_row_per_repetition() {
    let t = tune(Algorithm::Mh, ObjectiveId::MhDensity, &TuneOptions::new(Algorithm::Mh, 20), 7).unwrap();
    let csv = tune_csv(&t).to_csv_string();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], TuneTable::CSV_HEADER);
    assert_eq!(lines.len(), 21);
    assert!(lines.iter().all(|l| l.split(',').count() == 5));
    let jsonl = t.jsonl_string();
    let last: serde_json::Value = serde_json::from_str(jsonl.lines().last().unwrap()).unwrap();
    assert_eq!(last["kind"], "chosen");
}

#[test]
fn empty_tune_table_is_header_only() {
    let t = tune(Algorithm::Gd, ObjectiveId::Bohachevsky, &TuneOptions::new(Algorithm::Gd, 0), 1).unwrap();
    assert_eq!(tune_csv(&t).to_csv_string(), format!("{}\n", TuneTable::CSV_HEADER));
}

#[test]
fn nm_live_alpha_is_atol() {
    let cfg = RunParams::default().resolve(Algorithm::Nm, ObjectiveId::Booth, 3).unwrap();
    let mut r = otf_core::live::Runner::new(Algorithm::Nm, ObjectiveId::Booth, &cfg, 3).unwrap();
    assert_eq!(r.param(Param::Alpha).unwrap(), 0.005);
    r.set_param(Param::Alpha, 0.5).unwrap();
    let events = otf_core::live::drive(&mut r, &[]).unwrap();
    // A looser tolerance stops sooner than the default.
    let default = run_experiment(Algorithm::Nm, ObjectiveId::Booth, &cfg, 3).unwrap();
    assert!(events.len() < default.events.len());
}
