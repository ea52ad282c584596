use holo_ehb::array_model::*;
use holo_ehb::channel::realize;
use holo_ehb::ehb::*;
use holo_ehb::experiments::*;
use holo_ehb::radiation::{default_grid, impedance_matrix};
use holo_ehb::swe_coupling::CouplingMatrix;
use holo_ehb::{CVec, Complex64, EhbError};

fn direct_rates(spec: &ExperimentSpec, d: f64, snr: f64, seed: u64) -> [f64; 3] {
    let cfg = spec.physical;
    let geom = build_lattice(&cfg, d * cfg.wavelength_m, spec.geometry.layers, ApertureMode::FixedAperture).unwrap();
    let z = impedance_matrix(&geom, &spec.geometry.pattern, &cfg, &default_grid()).unwrap();
    let c = CouplingMatrix::synthetic(&geom, &cfg, spec.channel.coupling_rho);
    let ones = CVec::from_element(geom.total_count, Complex64::new(1.0, 0.0));
    let ch = &spec.channel;
    let channel = realize(&geom, &cfg, &spec.geometry.pattern, ch.paths, ch.users, seed, &ch.scatterers, &c, &ones).unwrap();
    let p = spec.optimizer.power;
    let config = OptimizerConfig {
        power: PowerBudget::from_snr_db(snr, p.analog_w, p.noise_variance).unwrap(),
        seed,
        ..spec.optimizer
    };
    let problem = EhbProblem::new(&geom, &cfg, channel, c, z, &config).unwrap();
    [
        ehb_alternating(&problem, &config).unwrap().sum_rate_bits,
        zf_baseline(&problem, &config, false).unwrap().sum_rate_bits,
        zf_baseline(&problem, &config, true).unwrap().sum_rate_bits,
    ]
}

#[test]
fn rate_vs_snr_matches_direct_calls() {
    let spec = ExperimentSpec::from_json(
        r#"{"kind": "rate_vs_snr", "geometry": {"spacing_lambda": [0.35]},
            "channel": {"users": 2, "paths": 6, "seeds": [4, 7]}, "snr_db": [0, 20]}"#,
    )
    .unwrap();
    let table = run(&spec).unwrap();
    assert_eq!(table.rows(), 2);
    assert_eq!(table.column("snr_db").unwrap(), vec![0.0, 20.0]);
    let cols = ["ehb_bits", "zf_uncoupled_bits", "zf_aware_bits"].map(|c| table.column(c).unwrap());
    for (row, snr) in [0.0, 20.0].into_iter().enumerate() {
        let a = direct_rates(&spec, 0.35, snr, 4);
        let b = direct_rates(&spec, 0.35, snr, 7);
        for k in 0..3 {
            let mean = 0.5 * (a[k] + b[k]);
            assert!((cols[k][row] - mean).abs() <= 1e-12 * mean.max(1.0), "row {row} col {k}");
        }
    }
    assert_eq!(table.column("failed_seeds").unwrap(), vec![0.0, 0.0]);
    assert_eq!(table.metadata.seeds, vec![4, 7]);
    assert_eq!(table.metadata.spec_hash, spec.hash().unwrap());
}

#[test]
fn rate_vs_spacing_ehb_dominates() {
    let spec = ExperimentSpec::from_json(
        r#"{"kind": "rate_vs_spacing", "geometry": {"spacing_lambda": [0.35, 0.5]},
            "channel": {"users": 4, "paths": 8, "seeds": [1, 2, 3, 4, 5, 6, 7, 8, 9, 10]}, "snr_db": [20]}"#,
    )
    .unwrap();
    let table = run(&spec).unwrap();
    let ehb = table.column("ehb_bits").unwrap();
    let zf = table.column("zf_uncoupled_bits").unwrap();
    assert_eq!(table.column("elements").unwrap(), vec![5.0, 4.0]);
    for k in 0..2 {
        assert!(ehb[k] >= zf[k] - 1e-6, "point {k}: {} vs {}", ehb[k], zf[k]);
    }
    assert!(ehb[0] > zf[0]);
    assert!(table.metadata.failures == 0, "{:?}", table.metadata.notes);
}

#[test]
fn pattern_cut_columns() {
    let spec = ExperimentSpec::from_json(
        r#"{"kind": "pattern_cut", "geometry": {"spacing_lambda": [0.25], "layers": 2},
            "azimuth": {"start_deg": 0, "stop_deg": 90, "step_deg": 5}}"#,
    )
    .unwrap();
    let table = run(&spec).unwrap();
    assert_eq!(table.rows(), 19);
    let az = table.column("azimuth_deg").unwrap();
    assert_eq!(az[0], 0.0);
    assert_eq!(az[18], 90.0);
    let d = table.column("directivity_dBi").unwrap();
    let g = table.column("realized_gain_dBi").unwrap();
    assert!(d.iter().zip(g.iter()).all(|(d, g)| g <= d));
    assert_eq!(run(&spec).unwrap().to_csv(), table.to_csv());
}

#[test]
fn fixed_aperture_sweeps_report_counts() {
    let spec = ExperimentSpec::from_json(
        r#"{"kind": "directivity_vs_spacing_fixed_aperture", "geometry": {"spacing_lambda": [0.25, 0.5], "layers": 2}}"#,
    )
    .unwrap();
    let table = run(&spec).unwrap();
    assert_eq!(table.column("elements").unwrap(), vec![14.0, 8.0]);
    let eff = table.column("efficiency").unwrap();
    assert!(eff.iter().all(|e| *e > 0.0 && *e <= 1.0));
    assert!(eff[0] < eff[1]);
}

#[test]
fn spec_validation_collects_fields() {
    let err = ExperimentSpec::from_json(
        r#"{"kind": "rate_vs_spacing", "geometry": {"spacing_lambda": [0.3, 0.0]},
            "channel": {"users": 3, "paths": 2, "seeds": []}}"#,
    )
    .unwrap_err();
    match err {
        EhbError::InvalidSpec(fields) => {
            let text = fields.join("\n");
            for f in ["geometry.spacing_lambda[1]", "channel.paths", "channel.seeds"] {
                assert!(text.contains(f), "{f} missing in {text}");
            }
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(ExperimentSpec::from_json(r#"{"kind": "pattern_cut"}"#).is_err());
    assert!(ExperimentSpec::from_json("not json").is_err());
}

#[test]
fn spec_hash_tracks_content() {
    let a = ExperimentSpec::from_json(r#"{"kind": "pattern_cut", "geometry": {"spacing_lambda": [0.2]}}"#).unwrap();
    let b = ExperimentSpec::from_json(r#"{"kind": "pattern_cut", "geometry": {"spacing_lambda": [0.2]}}"#).unwrap();
    let c = ExperimentSpec::from_json(r#"{"kind": "pattern_cut", "geometry": {"spacing_lambda": [0.3]}}"#).unwrap();
    assert_eq!(a.hash().unwrap(), b.hash().unwrap());
    assert_ne!(a.hash().unwrap(), c.hash().unwrap());
    assert_eq!(a.hash().unwrap().len(), 64);
}

#[test]
fn run_to_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ExperimentSpec::from_json(
        r#"{"kind": "gain_vs_spacing_fixed_aperture", "geometry": {"spacing_lambda": [0.3, 0.4]}}"#,
    )
    .unwrap();
    let path = dir.path().join("nested/out.csv");
    let table = run_to(&spec, &path).unwrap();
    let back = ResultTable::read_csv(&path).unwrap();
    let report = compare(&table, &back, &Tolerances::uniform(0.0)).unwrap();
    assert!(report.pass, "{report}");
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path.with_extension("json")).unwrap()).unwrap();
    assert_eq!(meta["kind"], "gain_vs_spacing_fixed_aperture");
    assert!(meta["spec"].is_object());
}
