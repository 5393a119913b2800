//! Bundled scenarios, the output bundle and the command line.

use std::path::{Path, PathBuf};
use std::process::Command;

use bodynfc::protocol::EventKind;
use bodynfc::scenario::{compare_coils, load_scenario, parse_scenario, render_report, run_scenario, write_bundle, ScenarioError};

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.toml"))
}

const BUNDLED: [&str; 6] = [
    "abdominal_meander",
    "arm_waist_tags",
    "chair_temperature_tag",
    "room_mobile_sensing",
    "picoring_session",
    "meander_vs_spiral",
];

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bodynfc"))
}

#[test]
fn bundled_scenarios_load_and_echo() {
    for name in BUNDLED {
        let s = load_scenario(&bundled(name)).unwrap();
        assert_eq!(s.name, name);
        assert_eq!(parse_scenario(&s.to_toml(), name).unwrap(), s);
    }
}

#[test]
fn abdominal_scenario_uses_measured_inputs() {
    let s = load_scenario(&bundled("abdominal_meander")).unwrap();
    let r = &s.readers[0];
    assert_eq!((r.drive_power_w, r.supply_power_w), (0.2, 0.515));
    assert!(s.tags.iter().all(|t| t.activation_threshold_w == 845e-6));
    let b = run_scenario(&s, s.seed).unwrap();
    let reader = &b.coils[0].electrical;
    // Simulated inductance lands near the measured 3.4 µH.
    assert!((reader.inductance_h - 3.4e-6).abs() / 3.4e-6 < 0.05, "{}", reader.inductance_h);
    assert_eq!(b.links.len(), 3);
    assert!(b.links.iter().all(|l| l.link.readable()));
}

#[test]
fn chair_tags_are_polled_periodically() {
    let s = load_scenario(&bundled("chair_temperature_tag")).unwrap();
    let b = run_scenario(&s, 1).unwrap();
    // Ten polls, each reading both tags.
    assert_eq!(b.events.count(EventKind::Read), 20);
    assert!((b.energy.duration_s() - 10.0).abs() < 1e-9);
}

#[test]
fn arm_waist_readers_only_read_their_own_panel() {
    let s = load_scenario(&bundled("arm_waist_tags")).unwrap();
    let b = run_scenario(&s, 1).unwrap();
    for l in b.links.iter().filter(|l| l.link.readable()) {
        let reader = s.reader(&l.reader).unwrap();
        assert_eq!(s.tag(&l.tag).unwrap().surface, reader.coil);
    }
    assert_eq!(b.links.iter().filter(|l| l.link.readable()).count(), 5);
}

#[test]
fn picoring_link_down_aborts() {
    let mut s = load_scenario(&bundled("picoring_session")).unwrap();
    s.picoring.as_mut().unwrap().detection_threshold = Some(0.5);
    let b = run_scenario(&s, 1).unwrap();
    let p = b.picoring.unwrap();
    assert!(p.stream.aborted);
    assert_eq!(p.log.count(EventKind::LinkDown), 2);
    assert_eq!(p.log.count(EventKind::Read), 0);
}

#[test]
fn self_comparison_has_unit_ratio() {
    let mut s = load_scenario(&bundled("meander_vs_spiral")).unwrap();
    let c = s.compare.as_mut().unwrap();
    c.spiral = c.meander.clone();
    c.tag = None;
    let r = compare_coils(&s).unwrap();
    assert!((r.ratio - 1.0).abs() < 1e-12);
    assert!(r.meander_fit.residual.is_finite() && r.spiral_fit.residual.is_finite());
}

#[test]
fn mismatched_footprints_are_rejected() {
    let text = std::fs::read_to_string(bundled("meander_vs_spiral")).unwrap();
    let text = text.replace("outer_width_m = 0.30", "outer_width_m = 0.32");
    let err = parse_scenario(&text, "m").unwrap_err();
    assert!(matches!(err, ScenarioError::Validation(ref m) if m.contains("footprints")), "{err}");
}

#[test]
fn bundle_is_reproducible_and_reportable() {
    let s = load_scenario(&bundled("chair_temperature_tag")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let m1 = write_bundle(&run_scenario(&s, 9).unwrap(), &a).unwrap();
    let m2 = write_bundle(&run_scenario(&s, 9).unwrap(), &b).unwrap();
    assert_eq!(m1, m2);
    for f in &m1.files {
        assert_eq!(std::fs::read(a.join(&f.file)).unwrap(), std::fs::read(b.join(&f.file)).unwrap());
    }
    // The echoed scenario re-runs to the same bundle.
    let echoed = load_scenario(&a.join("scenario.toml")).unwrap();
    assert_eq!(echoed.seed, 9);
    let m3 = write_bundle(&run_scenario(&echoed, echoed.seed).unwrap(), &dir.path().join("c")).unwrap();
    assert_eq!(m3, m1);
    let report = render_report(&a).unwrap();
    assert!(report.contains("garment_reader") && report.contains("files verified"));
    std::fs::write(a.join("links.csv"), "tampered").unwrap();
    assert!(render_report(&a).is_err());
}

#[test]
fn cli_simulate_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let st = cli()
        .args(["simulate", bundled("chair_temperature_tag").to_str().unwrap(), "--seed", "4", "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    assert!(out.join("manifest.txt").exists());
    let st = cli().args(["report", out.to_str().unwrap()]).output().unwrap();
    assert!(st.status.success());
    assert!(String::from_utf8_lossy(&st.stdout).contains("seed 4"));
}

#[test]
fn cli_fieldmap_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let st = cli()
        .args(["fieldmap", bundled("picoring_session").to_str().unwrap(), "--coil", "wristband_coil", "--grid", "3,3,2", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    let csv = std::fs::read_to_string(dir.path().join("fieldmap_wristband_coil.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 18);
    let st = cli().args(["compare-coils", bundled("meander_vs_spiral").to_str().unwrap()]).output().unwrap();
    assert!(st.status.success());
    assert!(String::from_utf8_lossy(&st.stdout).contains("ratio = "));
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "name = \"x\"\nfrequency_hz = 13.56e6\nbogus = 1\n").unwrap();
    let st = cli().args(["simulate", bad.to_str().unwrap()]).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&st.stderr).contains("bogus"));

    // Tag pressed into the surface: coil and tag traces touch.
    let text = std::fs::read_to_string(bundled("chair_temperature_tag")).unwrap();
    let touching = dir.path().join("touch.toml");
    std::fs::write(&touching, text.replace("position_m = [0.0, -0.05]\noffset_m = 0.004", "position_m = [0.0, -0.05]\noffset_m = 1e-9")).unwrap();
    let st = cli().args(["simulate", touching.to_str().unwrap(), "--out"]).arg(dir.path().join("t")).output().unwrap();
    assert_eq!(st.status.code(), Some(3), "{}", String::from_utf8_lossy(&st.stderr));

    let st = cli().args(["simulate", dir.path().join("missing.toml").to_str().unwrap()]).output().unwrap();
    assert_eq!(st.status.code(), Some(1));
}
