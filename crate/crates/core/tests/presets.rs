use std::fs;

use nonloc::experiments::{emit_tables, run_preset, Overrides, PresetId};

fn increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0])
}

#[test]
fn sigmoid_columns_increase() {
    let r = run_preset(PresetId::Sigmoid, &Overrides::<f64>::default()).unwrap();
    assert!(increasing(&r.column("df_l2")), "{:?}", r.column("df_l2"));
    assert!(increasing(&r.column("du_l2")), "{:?}", r.column("du_l2"));
    assert!(r.footnotes.iter().any(|f| f.contains("0.2")));
}

#[test]
fn bond_removal_difference_grows() {
    let r = run_preset(PresetId::BondRemoval, &Overrides::<f64>::default()).unwrap();
    assert!(increasing(&r.column("du_l2")), "{:?}", r.column("du_l2"));
}

#[test]
fn emitted_files_are_reproducible() {
    let o = Overrides::<f64> { h: Some(0.02), ..Default::default() };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = emit_tables(&run_preset(PresetId::Collar, &o).unwrap(), a.path(), &o).unwrap();
    let second = emit_tables(&run_preset(PresetId::Collar, &o).unwrap(), b.path(), &o).unwrap();
    assert_eq!(first.len(), second.len());
    for (x, y) in first.iter().zip(&second) {
        assert_eq!(x.file_name(), y.file_name());
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{x:?}");
    }
}

#[test]
fn table_and_profile_shapes() {
    let o = Overrides::<f64>::default();
    let r = run_preset(PresetId::Sinusoid, &o).unwrap();
    assert_eq!(r.rows.len(), 4);
    let dir = tempfile::tempdir().unwrap();
    emit_tables(&r, dir.path(), &o).unwrap();
    let table = fs::read_to_string(dir.path().join("sinusoid_table.csv")).unwrap();
    assert!(table.starts_with("eps,df_l2,du_l2,ratio,"));
    assert_eq!(table.lines().filter(|l| !l.starts_with('#')).count(), 5);
    let profile = fs::read_to_string(dir.path().join("sinusoid_profile_1.csv")).unwrap();
    assert_eq!(profile.lines().count() - 1, r.mesh.len());
    let manifest = fs::read_to_string(dir.path().join("manifest.toml")).unwrap();
    assert!(manifest.contains("preset = \"sinusoid\""));
    let parsed: toml::Value = toml::from_str(&manifest).unwrap();
    assert_eq!(parsed["cells"].as_integer(), Some(r.mesh.len() as i64));
}

#[test]
fn every_preset_runs_on_a_coarse_mesh() {
    for id in PresetId::ALL {
        let r = run_preset(id, &Overrides::<f64> { h: Some(0.025), ..Default::default() }).unwrap();
        assert_eq!(r.rows.len(), r.preset.grid.len(), "{id}");
        for row in &r.rows {
            assert!(row.values.iter().all(|v| !v.is_nan()), "{id}: {row:?}");
            for rep in &row.reports {
                assert!(!rep.applicable() || rep.satisfied(), "{id} {}: {rep:?}", row.parameter);
            }
        }
    }
}
