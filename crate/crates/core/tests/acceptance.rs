//! Acceptance suite: one line per criterion, nonzero exit if any fails.

mod common;

use std::collections::BTreeSet;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use bodynfc::circuit::{calibrate_k_from_eta, transfer_efficiency, DEFAULT_DETECTION_THRESHOLD, TAG_ACTIVATION_POWER_W};
use bodynfc::energy::{battery_life, integrate, PowerProfile, PowerTable, DEFAULT_RING_BATTERY_J};
use bodynfc::geometry::{Point3, WirePath};
use bodynfc::magnetics::{b_field, mutual_inductance, CoilElectrical, CARRIER_FREQUENCY_HZ};
use bodynfc::protocol::{
    duty_cycle, random_uids, run_inventory, seeded_rng, EventLog, LinkTiming, ReaderDevice, SimTime, SlotCount,
    TagDevice, WearableDevice,
};
use bodynfc::scenario::{compare_coils, load_scenario, run_scenario, write_bundle, Pipeline};
use common::*;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn scenario_path(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.toml"))
}

fn c1_coaxial() -> Outcome {
    let m = mutual_inductance(&circle(0.1, 0.0, 1e-3), &circle(0.1, 0.1, 1e-3)).unwrap();
    let near = rel(m, coaxial_mutual(0.1, 0.1, 0.1));
    let (a, d) = (0.01, 0.5);
    let far_m = mutual_inductance(&circle(a, 0.0, 1e-3), &circle(a, d, 1e-3)).unwrap();
    let far = rel(far_m, dipole_mutual(a, a, d));
    outcome(
        near < 5e-3 && far < 2e-2,
        format!("r=0.1 d=0.1: M={m:.6e} H, rel err {near:.2e} (< 5e-3); dipole r={a} d={d}: rel err {far:.2e} (< 2e-2)"),
    )
}

fn c2_field() -> Outcome {
    let wire = WirePath::new(vec![Point3::new(0.0, 0.0, -50.0), Point3::new(0.0, 0.0, 50.0)], false).unwrap();
    let rho = 0.01;
    let wire_err = rel(b_field(&wire, Point3::new(rho, 0.0, 0.0)).unwrap().norm(), infinite_wire_field(rho));
    let loop_err = rel(b_field(&circle(0.1, 0.0, 1e-3), Point3::ZERO).unwrap().z, loop_center_field(0.1));
    outcome(
        wire_err < 1e-3 && loop_err < 1e-3,
        format!("100 m wire at 1 cm: rel err {wire_err:.2e}; r=0.1 loop center: rel err {loop_err:.2e} (both < 1e-3)"),
    )
}

fn c3_localization() -> Outcome {
    let s = load_scenario(&scenario_path("meander_vs_spiral")).unwrap();
    let c = compare_coils(&s).unwrap();
    let lm = c.meander_fit.decay_length_m;
    let pass = (3.2e-3..=12.7e-3).contains(&lm) && c.ratio < 0.5 && !c.meander_fit.flagged;
    outcome(
        pass,
        format!(
            "lambda_meander {:.2} mm in [3.2, 12.7], lambda_spiral {:.1} mm, ratio {:.4} (< 0.5), residuals {:.3}/{:.3}",
            lm * 1e3,
            c.spiral_fit.decay_length_m * 1e3,
            c.ratio,
            c.meander_fit.residual,
            c.spiral_fit.residual
        ),
    )
}

fn c4_coil_values() -> Outcome {
    let a = CoilElectrical::with_q(3.4e-6, 95.0, CARRIER_FREQUENCY_HZ).unwrap();
    let b = CoilElectrical::with_q(2.7e-6, 53.0, CARRIER_FREQUENCY_HZ).unwrap();
    let checks = [
        rel(a.ac_resistance_ohm, 3.05),
        rel(a.tuning_capacitance_f, 40.5e-12),
        rel(b.ac_resistance_ohm, 4.340),
        rel(b.tuning_capacitance_f, 51.02e-12),
    ];
    outcome(
        checks.iter().all(|e| *e < 0.01),
        format!(
            "3.4 uH/95: R {:.4} ohm, C {:.2} pF; 2.7 uH/53: R {:.4} ohm, C {:.2} pF; max rel err {:.2e} (< 1e-2)",
            a.ac_resistance_ohm,
            a.tuning_capacitance_f * 1e12,
            b.ac_resistance_ohm,
            b.tuning_capacitance_f * 1e12,
            checks.iter().cloned().fold(0.0, f64::max)
        ),
    )
}

fn c5_efficiency() -> Outcome {
    let tag_q = 30.0;
    let mut pass = true;
    let mut parts = Vec::new();
    for (eta, q) in [(0.41, 95.0), (0.30, 53.0)] {
        let k = calibrate_k_from_eta(eta, q, tag_q).unwrap();
        let back = transfer_efficiency(k, q, tag_q);
        let err = (back - eta).abs();
        pass &= err < 1e-12 && k > 0.01 && k < 0.5;
        parts.push(format!("eta {eta}: k {k:.5}, round-trip err {err:.1e}"));
    }
    outcome(pass, format!("{}; assumption: tag Q = {tag_q}", parts.join("; ")))
}

fn c6_coverage() -> Outcome {
    let s = load_scenario(&scenario_path("abdominal_meander")).unwrap();
    let p = Pipeline::new(&s, s.seed).unwrap();
    let cov = p.tag_grid().unwrap().unwrap();
    let ok = cov
        .points
        .iter()
        .filter(|pt| pt.link.delivered_power_w >= TAG_ACTIVATION_POWER_W && pt.link.modulation_depth >= DEFAULT_DETECTION_THRESHOLD)
        .count();
    let frac = ok as f64 / cov.points.len() as f64;
    let coil = &p.coils["abdomen"];
    let tag = &p.coils["tag_spiral"];
    let area_ratio = {
        let (w, h) = coil.shape.footprint().unwrap();
        let (tw, th) = tag.shape.footprint().unwrap();
        tw * th / (w * h)
    };
    outcome(
        cov.points.len() == 100 && frac >= 0.95,
        format!(
            "{ok}/{} grid points readable ({:.1}% >= 95%), tag area {:.2}% of footprint, reader L {:.3} uH",
            cov.points.len(),
            100.0 * frac,
            100.0 * area_ratio,
            coil.electrical.inductance_h * 1e6
        ),
    )
}

fn c7_bend() -> Outcome {
    let s = load_scenario(&scenario_path("abdominal_meander")).unwrap();
    let p = Pipeline::new(&s, s.seed).unwrap();
    let b = p.bend_sweep().unwrap().unwrap();
    let radii: Vec<String> = b
        .rows
        .iter()
        .map(|r| if r.radius_m.is_finite() { format!("{}", r.radius_m) } else { "flat".into() })
        .collect();
    let max = b.max_rel_change();
    outcome(
        max < 0.15 && b.rows.len() == 4,
        format!("radii [{}] m, {} tags, max |dk/k| {:.2}% (< 15%)", radii.join(", "), b.tags.len(), 100.0 * max),
    )
}

fn c8_anticollision() -> Outcome {
    let reader = ReaderDevice {
        name: "reader".into(),
        slot_count: SlotCount::Sixteen,
        timing: LinkTiming::default(),
    };
    let trials = 10_000u64;
    let (mut sim_total, mut oracle_total) = (0usize, 0usize);
    let mut all_once = true;
    for seed in 0..trials {
        let uids = random_uids(&mut seeded_rng(seed), 8);
        let tags: Vec<TagDevice> = uids
            .iter()
            .enumerate()
            .map(|(i, &uid)| TagDevice {
                name: format!("tag{i}"),
                uid,
                position: Point3::ZERO,
                payload_bytes: 16,
            })
            .collect();
        let links = uids.iter().map(|&u| (u, readable_link())).collect();
        let mut log = EventLog::new(seed, "anticollision");
        let inv = run_inventory(&reader, &tags, &links, SimTime::ZERO, &mut log).unwrap();
        let distinct: BTreeSet<u64> = inv.singulated.iter().copied().collect();
        all_once &= inv.singulated.len() == 8 && distinct == uids.iter().copied().collect();
        sim_total += inv.rounds;
        oracle_total += brute_force_rounds(&uids, 4);
    }
    let sim = sim_total as f64 / trials as f64;
    let oracle = oracle_total as f64 / trials as f64;
    let err = rel(sim, oracle);
    outcome(
        err < 0.05 && all_once,
        format!(
            "{trials} trials: mean rounds {sim:.4}, brute-force tree {oracle:.4} (rel err {err:.1e} < 5e-2), analytic E(8) {:.4}, all singulated once: {all_once}",
            expected_rounds(8, 16)
        ),
    )
}

fn c9_picoring() -> Outcome {
    let s = load_scenario(&scenario_path("picoring_session")).unwrap();
    let b = run_scenario(&s, s.seed).unwrap();
    let p = b.picoring.unwrap();
    let (bytes, bulk, frame) = p.bulk.clone().unwrap();
    let bulk_s = frame.as_secs_f64();
    let airtime = p.stream.airtime_fraction(p.frame_period);
    let pass = bytes == 1024 && !bulk.aborted && bulk.bytes_up == 1024 && bulk_s < 1.0 && !p.stream.aborted && p.stream.frames == 1000 && airtime < 0.5;
    outcome(
        pass,
        format!(
            "1 kB upload {:.1} ms (< 1 s) at {} bit/s; 100 Hz x 8 B stream {} frames, airtime {:.1}% (< 50%)",
            bulk_s * 1e3,
            LinkTiming::default().data_rate_bps,
            p.stream.frames,
            100.0 * airtime
        ),
    )
}

fn c10_energy() -> Outcome {
    let ring = WearableDevice::ring("ring");
    let s = duty_cycle(&ring, 0.1, 1.0).unwrap();
    let avg = s.average_power();
    let arithmetic = ring_ten_percent_average();
    let formula_err = rel(avg, arithmetic);
    let stated_mw = 0.536;
    let three_sf = (avg * 1e3 * 1e3).round() / 1e3 == stated_mw;

    let table: PowerTable = [(
        "ring".to_owned(),
        PowerProfile {
            active_w: ring.active_power_w,
            sleep_w: ring.sleep_power_w,
            battery_capacity_j: Some(DEFAULT_RING_BATTERY_J),
        },
    )]
    .into();
    let hour = SimTime::from_millis(3_600_000);
    let mut log = EventLog::new(0, "duty");
    s.write_log(SimTime::ZERO, hour, &mut log);
    let integrated = integrate(&log, &table, SimTime::ZERO, hour).unwrap().devices[0].average_power_w;
    let integrate_err = rel(integrated, avg);

    // Randomized schedule suite: a sleepier schedule never shortens battery life.
    let mut rng = seeded_rng(10);
    let mut monotone = true;
    for _ in 0..200 {
        let period_ms: u64 = rng.random_range(10..2000);
        let a: u64 = rng.random_range(1..=period_ms);
        let b: u64 = rng.random_range(1..=period_ms);
        let (sleepy, busy) = (a.min(b), a.max(b));
        let life = |active_ms: u64| {
            let sch = duty_cycle(&ring, active_ms as f64 * 1e-3, period_ms as f64 * 1e-3).unwrap();
            let horizon = SimTime::from_millis(period_ms * 50);
            let mut log = EventLog::new(0, "suite");
            sch.write_log(SimTime::ZERO, horizon, &mut log);
            let avg = integrate(&log, &table, SimTime::ZERO, horizon).unwrap().devices[0].average_power_w;
            battery_life(DEFAULT_RING_BATTERY_J, avg).unwrap()
        };
        monotone &= life(sleepy) >= life(busy);
    }
    outcome(
        formula_err < 1e-9 && integrate_err < 1e-9 && three_sf && monotone,
        format!(
            "10% ring average {:.7} mW = 0.1*2.02 + 0.9*0.371 (rel err {formula_err:.1e}), {stated_mw} mW at 3 s.f.: {three_sf}; formula vs integrated log rel err {integrate_err:.1e}; monotone over 200 random schedule pairs: {monotone}",
            avg * 1e3
        ),
    )
}

fn c11_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let names = [
        "abdominal_meander",
        "arm_waist_tags",
        "chair_temperature_tag",
        "room_mobile_sensing",
        "picoring_session",
        "meander_vs_spiral",
    ];
    let mut mismatched = Vec::new();
    let mut files = 0;
    for name in names {
        let s = load_scenario(&scenario_path(name)).unwrap();
        let a = dir.path().join(format!("{name}_a"));
        let b = dir.path().join(format!("{name}_b"));
        let m = write_bundle(&run_scenario(&s, s.seed).unwrap(), &a).unwrap();
        write_bundle(&run_scenario(&s, s.seed).unwrap(), &b).unwrap();
        for f in m.files.iter().map(|f| f.file.as_str()).chain(["manifest.txt"]) {
            files += 1;
            if std::fs::read(a.join(f)).unwrap() != std::fs::read(b.join(f)).unwrap() {
                mismatched.push(format!("{name}/{f}"));
            }
        }
    }
    outcome(
        mismatched.is_empty(),
        format!("{} bundled scenarios, {files} files compared, mismatches: {:?}", names.len(), mismatched),
    )
}

fn main() -> ExitCode {
    type Check = fn() -> Outcome;
    let criteria: [(&str, Check, Option<Duration>); 11] = [
        ("magnetics oracle, coaxial loops", c1_coaxial, Some(Duration::from_secs(2))),
        ("field oracle", c2_field, Some(Duration::from_secs(1))),
        ("localization", c3_localization, Some(Duration::from_secs(30))),
        ("coil value consistency", c4_coil_values, None),
        ("efficiency round trip", c5_efficiency, None),
        ("1%-area readout coverage", c6_coverage, Some(Duration::from_secs(60))),
        ("deformation robustness", c7_bend, Some(Duration::from_secs(60))),
        ("anti-collision oracle", c8_anticollision, None),
        ("ring session feasibility", c9_picoring, None),
        ("energy arithmetic", c10_energy, None),
        ("determinism", c11_determinism, None),
    ];
    let mut failures = 0;
    for (i, (name, check, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        let elapsed = start.elapsed();
        let in_time = limit.is_none_or(|l| elapsed < l);
        let pass = o.pass && in_time;
        if !pass {
            failures += 1;
        }
        let budget = limit.map_or(String::new(), |l| format!(" / {} s", l.as_secs()));
        println!(
            "[{}] {:>2}. {name}: {} ({:.3} s{budget})",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            elapsed.as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
