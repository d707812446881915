use twpa_core::scenarios::{
    builtin, builtin_names, parallel_map, parse_scenario, run_scenario, scenario_hash,
    write_outcome, Outcome, ScenarioKind,
};
use twpa_core::Error;

const TINY: &str = r#"
kind = "tone-evolution"
[line.profile]
N = 60
[drive]
pump = "2 uA"
fp = "12.8 GHz"
fs = "6.6 GHz"
[protocol]
discard = "2 ns"
record = "5 ns"
"#;

#[test]
fn builtins_parse() {
    let names: Vec<_> = builtin_names().collect();
    assert_eq!(names.len(), 6);
    for name in names {
        let sc = builtin(name).unwrap_or_else(|e| panic!("{name}: {e}"));
        sc.validate().unwrap();
    }
    let u = builtin("uniform").unwrap();
    assert_eq!(u.kind, ScenarioKind::UniformComparison);
    assert!(u.line.profile.is_uniform());
    assert!((u.line.profile.mean() - 40e-15).abs() < 1e-24);
    let d = builtin("dispersion").unwrap();
    assert_eq!(d.linear_l_s0, Some(109e-12));
    assert!(builtin("nope").is_err());
}

#[test]
fn defaults_follow_the_kind() {
    let phase = parse_scenario("kind = \"phase-sweep\"").unwrap();
    assert!((phase.drive.pump.freq - 12.48e9).abs() < 1.0);
    let gain = parse_scenario("kind = \"gain-sweep\"").unwrap();
    assert_eq!(gain.sweep.fp.len(), 2);
    assert_eq!(gain.sweep.fs.len(), 71);
    let uniform = parse_scenario("kind = \"uniform-comparison\"").unwrap();
    assert!(uniform.line.profile.is_uniform());
}

#[test]
fn bad_files_are_rejected() {
    for text in [
        "kind = \"gain-sweep\"\nbogus = 1",
        "[line]\nL = \"84 pF\"",
        "[drive]\nfs = \"6.71 GHz\"",
        "[line.profile]\nuniform = \"40 fF\"\nC01 = \"9 fF\"",
        "[line.profile]\nN = 1501",
        "[sweep]\nzoom = [\"6 GHz\", \"5 GHz\"]",
        "[line]\nL = \"250 pH\"",
    ] {
        assert!(parse_scenario(text).is_err(), "accepted {text:?}");
    }
    let err = parse_scenario("[drive]\nfs = \"6.71 GHz\"").unwrap_err();
    assert!(matches!(err, Error::Config(_)));
}

#[test]
fn hash_ignores_workers_and_output() {
    let a = parse_scenario(TINY).unwrap();
    let mut b = a.clone();
    b.workers = 4;
    b.out = Some("/tmp/elsewhere".into());
    assert_eq!(scenario_hash(&a).unwrap(), scenario_hash(&b).unwrap());
    let c = a.clone().with_dt(2e-12);
    assert_ne!(scenario_hash(&a).unwrap(), scenario_hash(&c).unwrap());
}

#[test]
fn parallel_map_keeps_order() {
    let xs: Vec<u64> = (0..50).collect();
    let ys = parallel_map(&xs, 3, |x| x * x).unwrap();
    assert_eq!(ys, xs.iter().map(|x| x * x).collect::<Vec<_>>());
}

#[test]
fn tiny_tone_run_writes_artifacts() {
    let sc = parse_scenario(TINY).unwrap();
    let outcome = run_scenario(&sc).unwrap();
    let Outcome::Tones(t) = &outcome else { panic!("wrong outcome") };
    assert!(t.gain_db.is_finite());
    assert_eq!(t.fields.len(), 7);
    assert!(t.harmonic_conversion >= 0.0);
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_outcome(&sc, &outcome, 0.0, dir.path()).unwrap();
    for f in ["tones.csv", "summary.json", "manifest.json"] {
        assert!(manifest.files.iter().any(|m| m == f), "{f} missing");
        assert!(dir.path().join(f).exists());
    }
    let table = std::fs::read_to_string(dir.path().join("tones.csv")).unwrap();
    assert_eq!(table.lines().count(), 62);
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["scenario_hash"].as_str().unwrap(), scenario_hash(&sc).unwrap());
    assert_eq!(m["runs"].as_array().unwrap().len(), 1);
}

const TINY_GAIN: &str = r#"
kind = "gain-sweep"
[line.profile]
N = 60
[protocol]
discard = "2 ns"
record = "5 ns"
[sweep]
fp = ["12.8 GHz"]
fs = ["5.8 GHz", "6 GHz", "6.2 GHz", "6.4 GHz"]
"#;

#[test]
fn sweeps_are_deterministic_and_order_stable() {
    let sc = parse_scenario(TINY_GAIN).unwrap();
    let bytes = |sc: &twpa_core::scenarios::Scenario| {
        let dir = tempfile::tempdir().unwrap();
        let outcome = run_scenario(sc).unwrap();
        write_outcome(sc, &outcome, 0.0, dir.path()).unwrap();
        std::fs::read(dir.path().join("gain_12.80GHz.csv")).unwrap()
    };
    let first = bytes(&sc);
    assert_eq!(first, bytes(&sc));
    let mut parallel = sc.clone();
    parallel.workers = 3;
    assert_eq!(first, bytes(&parallel));

    // each point alone gives the same number as inside the sweep
    let Outcome::Gain(report) = run_scenario(&sc).unwrap() else { panic!() };
    for p in &report.points {
        let (alone, _, _) = twpa_core::scenarios::sweep_gain(
            &sc.line,
            &sc.drive,
            &sc.protocol,
            &[(p.fp, p.fs)],
            1,
            "alone",
        )
        .unwrap();
        assert_eq!(alone[0].gain_db.to_bits(), p.gain_db.to_bits());
    }
}

#[test]
fn manifest_scales_follow_from_the_config() {
    let sc = parse_scenario(TINY).unwrap();
    let outcome = run_scenario(&sc).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let m = write_outcome(&sc, &outcome, 0.0, dir.path()).unwrap();
    let again = parse_scenario(TINY).unwrap().line.derived();
    assert_eq!(m.derived.z_mean.to_bits(), again.z_mean.to_bits());
    assert_eq!(m.derived.omega0.to_bits(), again.omega0.to_bits());
    assert_eq!(m.derived.omega_c.to_bits(), again.omega_c.to_bits());
}
