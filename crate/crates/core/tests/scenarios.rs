//! Scenario runs are reproducible and their outputs are self-describing.

use std::fs;
use std::time::Duration;

use entangle_sense::scenario::output::{results_json, table_csv};
use entangle_sense::scenario::{run_scenario, write_outputs, ScenarioConfig, ScenarioId};

const ALL: [ScenarioId; 10] = [
    ScenarioId::Fig1f,
    ScenarioId::Fig2a,
    ScenarioId::Fig2b,
    ScenarioId::Fig2c,
    ScenarioId::Fig2d,
    ScenarioId::Fig3a,
    ScenarioId::Fig3b,
    ScenarioId::Fig4a,
    ScenarioId::Fig4b,
    ScenarioId::Fig4c,
];

fn config(id: ScenarioId, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        scenario: Some(id),
        seed,
        ..ScenarioConfig::default()
    }
}

fn bytes(id: ScenarioId, config: &ScenarioConfig) -> (Vec<u8>, String) {
    let out = run_scenario(id, config).unwrap();
    (table_csv(&out.table).unwrap(), results_json(&out, config).unwrap())
}

#[test]
fn every_scenario_is_deterministic() {
    for id in ALL {
        let c = config(id, 7);
        let first = bytes(id, &c);
        let second = bytes(id, &c);
        assert_eq!(first, second, "{id}");
        assert!(!first.0.is_empty(), "{id}");
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let pool = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    for id in [ScenarioId::Fig2c, ScenarioId::Fig3a, ScenarioId::Fig4c] {
        let c = config(id, 3);
        let one = pool(1).install(|| bytes(id, &c));
        let four = pool(4).install(|| bytes(id, &c));
        assert_eq!(one, four, "{id}");
    }
}

#[test]
fn seed_changes_noisy_scenarios() {
    let a = bytes(ScenarioId::Fig3a, &config(ScenarioId::Fig3a, 1));
    let b = bytes(ScenarioId::Fig3a, &config(ScenarioId::Fig3a, 2));
    assert_ne!(a.0, b.0);
}

#[test]
fn written_files_are_byte_identical_and_echo_the_config() {
    let id = ScenarioId::Fig4a;
    let c = config(id, 0);
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let records: Vec<_> = dirs
        .iter()
        .map(|d| {
            let out = run_scenario(id, &c).unwrap();
            write_outputs(d.path(), &out, &c, Duration::from_millis(5)).unwrap()
        })
        .collect();
    assert_eq!(records[0].config_hash, records[1].config_hash);
    for name in ["fig4a.csv", "fig4a.json"] {
        let a = fs::read(dirs[0].path().join(name)).unwrap();
        let b = fs::read(dirs[1].path().join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
    let doc: serde_json::Value =
        serde_json::from_slice(&fs::read(dirs[0].path().join("fig4a.json")).unwrap()).unwrap();
    assert_eq!(doc["config"], serde_json::to_value(c.resolved()).unwrap());
    assert_eq!(doc["scenario"], "fig4a");
    assert_eq!(doc["config"]["coupling"]["d_hz"], 58000.0);
    let meta: serde_json::Value =
        serde_json::from_slice(&fs::read(dirs[0].path().join("fig4a.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["config_hash"].as_str().unwrap().len(), 64);
    assert!(meta["wall_clock_s"].as_f64().unwrap() > 0.0);
}

#[test]
fn csv_header_carries_units() {
    for id in ALL {
        let out = run_scenario(id, &config(id, 0)).unwrap();
        assert!(!out.table.rows.is_empty(), "{id}");
        for col in &out.table.columns {
            assert!(col.ends_with(']') && col.contains('['), "{id}: {col}");
        }
        for row in &out.table.rows {
            assert_eq!(row.len(), out.table.columns.len(), "{id}");
        }
    }
}
