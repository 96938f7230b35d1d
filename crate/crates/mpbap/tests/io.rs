mod common;

use std::path::Path;

use common::{single_berth, two_half_clash};
use mpbap::io::{self, IoError, ReportFile};
use mpbap_core::model::{generate_instance, GeneratorParams, WindowMode};
use mpbap_core::search::{solve, SolveOptions};
use mpbap_core::NullClock;

fn here() -> &'static Path {
    Path::new("x.json")
}

#[test]
fn instances_round_trip() {
    for seed in 0..3 {
        let inst = generate_instance(GeneratorParams { ships: 5, berths_per_port: 2, ports: 3, windows: WindowMode::Loose, seed }).unwrap();
        let text = io::instance_to_json(&inst);
        assert_eq!(io::parse_instance(here(), &text).unwrap(), inst);
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("i.json");
    io::write_instance(&path, &two_half_clash()).unwrap();
    assert_eq!(io::read_instance(&path).unwrap(), two_half_clash());
}

#[test]
fn parse_errors_name_the_field() {
    let mut v: serde_json::Value = serde_json::from_str(&io::instance_to_json(&two_half_clash())).unwrap();
    v["instance"]["ships"][1]["design_speed"] = "fast".into();
    match io::parse_instance(here(), &v.to_string()) {
        Err(IoError::Parse { at, .. }) => assert_eq!(at, "instance.ships[1].design_speed"),
        other => panic!("{other:?}"),
    }
    assert!(matches!(io::parse_instance(here(), "{"), Err(IoError::Parse { .. })));
}

#[test]
fn wrong_format_or_version_is_refused() {
    let text = io::instance_to_json(&two_half_clash());
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["version"] = 2.into();
    assert!(matches!(io::parse_instance(here(), &v.to_string()), Err(IoError::Format { version: 2, .. })));
    v["version"] = 1.into();
    v["format"] = "mpbap-report".into();
    assert!(matches!(io::parse_instance(here(), &v.to_string()), Err(IoError::Format { .. })));
    assert!(matches!(io::parse_report(here(), &text), Err(IoError::Format { .. })));
}

#[test]
fn invalid_instances_are_refused() {
    let mut inst = generate_instance(GeneratorParams { ships: 3, berths_per_port: 1, ports: 2, windows: WindowMode::Tight, seed: 0 }).unwrap();
    inst.ports[0].distances.clear();
    assert!(matches!(io::parse_instance(here(), &io::instance_to_json(&inst)), Err(IoError::Invalid { .. })));
    let mut inst = single_berth(10, 1, &[(3, 0, 3)]);
    inst.ships[0].route[0].handling.clear();
    assert!(matches!(io::parse_instance(here(), &io::instance_to_json(&inst)), Err(IoError::Invalid { .. })));
}

#[test]
fn missing_file_is_a_read_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(io::read_instance(&dir.path().join("none.json")), Err(IoError::Read { .. })));
}

fn values_doc(values: &str) -> String {
    format!(r#"{{"format": "mpbap-game-values", "version": 1, "values": {values}}}"#)
}

#[test]
fn game_values_parse_by_label() {
    let (n, v) = io::parse_game_values(here(), &values_doc(r#"{"A": 1, "B": 2, "AB": 2.5}"#)).unwrap();
    assert_eq!((n, v), (2, vec![0.0, 1.0, 2.0, 2.5]));
    let values = [0.0, 5.0, 6.0, 10.0, 7.0, 11.0, 12.0, 15.0];
    assert_eq!(io::parse_game_values(here(), &io::game_values_to_json(&values)).unwrap(), (3, values.to_vec()));
    assert_eq!(io::coalition_label(0b101), "AC");
}

#[test]
fn bad_game_values_are_refused() {
    for bad in [r#"{"A": 1, "b": 2, "Ab": 3}"#, r#"{"A": 1, "AA": 2}"#, r#"{"A": 1, "B": 2}"#, "{}", r#"{"": 1}"#] {
        assert!(matches!(io::parse_game_values(here(), &values_doc(bad)), Err(IoError::GameValues { .. })), "{bad}");
    }
    match io::parse_game_values(here(), &values_doc(r#"{"A": 1, "B": 2}"#)) {
        Err(e) => assert!(e.to_string().contains("`AB`"), "{e}"),
        Ok(_) => unreachable!(),
    }
    assert!(matches!(io::parse_game_values(here(), &values_doc(r#"{"A": "one"}"#)), Err(IoError::Parse { .. })));
}

#[test]
fn reports_round_trip() {
    let inst = two_half_clash();
    let options = SolveOptions::default();
    let out = solve(&inst, &options, &NullClock).unwrap();
    for timing in [false, true] {
        let r = ReportFile::new(&inst.descriptor, &options, &out.report, timing);
        assert_eq!(r.timing.is_some(), timing);
        let text = io::to_json(&r);
        assert!(text.ends_with('\n'));
        assert_eq!(io::parse_report(here(), &text).unwrap(), r);
    }
    let csv = io::plan_to_csv(&out.plan.unwrap()).unwrap();
    assert_eq!(csv.lines().count(), 1 + inst.ships.len());
    assert!(csv.starts_with("ship,port,berth_type,berth_index_within_type,start,end,speed_to_next_knots\n"));
    let empty = io::plan_to_csv(&Default::default()).unwrap();
    assert_eq!(empty.lines().count(), 1);
}
