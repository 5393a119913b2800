//! Pipeline execution and the output bundle.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::config::{
    BendAxisDir, BendConfig, CoilConfig, FieldMapConfig, PicoRingConfig, Polling, ReaderConfig,
    Scenario, Shape, TagConfig,
};
use super::report::{write_manifest, Manifest};
use super::ScenarioError;
use crate::circuit::{link_budget, link_table, DrivenReader, LinkBudget, TagLoad};
use crate::energy::{integrate, EnergyReport, PowerProfile, PowerTable};
use crate::geometry::{
    apply_cylinder_bend, gen_angled_ring_coil, gen_meander, gen_spiral, BendAxis, Point3, WirePath,
};
use crate::magnetics::{
    ac_resistance, field_map, field_map_csv, fit_decay, mutual_inductance, self_inductance,
    CoilElectrical, DecayFit, FieldSample, Grid3, LateralWindow,
};
use crate::protocol::{
    picoring_session, read_tag, run_inventory, seeded_rng, EventKind, EventLog, ReaderDevice,
    SessionOutcome, SessionSchedule, SimTime, TagDevice, WearableDevice,
};

type Result<T> = std::result::Result<T, ScenarioError>;

fn physics<E: std::fmt::Display>(context: impl Into<String>) -> impl FnOnce(E) -> ScenarioError {
    ScenarioError::physics(context)
}

/// A coil resolved to geometry and electricals.
#[derive(Debug, Clone, PartialEq)]
pub struct BuiltCoil {
    pub name: String,
    pub shape: Shape,
    /// Flat circuit loop in the coil's own frame.
    pub local: WirePath,
    /// Circuit loop after bending and placement.
    pub world: WirePath,
    pub electrical: CoilElectrical,
    /// Conductor length of the open trace, m.
    pub conductor_length_m: f64,
    /// Q taken from the scenario rather than the skin-effect model.
    pub q_fixed: bool,
}

fn bend_axis(dir: BendAxisDir) -> BendAxis {
    match dir {
        BendAxisDir::X => BendAxis::default(),
        BendAxisDir::Y => BendAxis {
            axis: Point3::new(0.0, 1.0, 0.0),
            ..BendAxis::default()
        },
    }
}

fn generate(name: &str, shape: &Shape) -> Result<WirePath> {
    let path = match shape {
        Shape::Meander(s) => gen_meander(s),
        Shape::Spiral(s) => gen_spiral(s),
        Shape::AngledRing(s) => gen_angled_ring_coil(s),
    };
    path.map_err(physics(format!("coil {name}: geometry")))
}

fn place(name: &str, local: &WirePath, bend: Option<&BendConfig>, center: Point3) -> Result<WirePath> {
    let bent = match bend {
        Some(b) if b.radius_m.is_finite() => apply_cylinder_bend(local, b.radius_m, &bend_axis(b.axis))
            .map_err(physics(format!("{name}: bend to radius {} m", b.radius_m)))?,
        _ => local.clone(),
    };
    Ok(bent.translated(center))
}

fn coil_loop(cfg: &CoilConfig) -> Result<(WirePath, WirePath)> {
    let open = generate(&cfg.name, &cfg.shape)?;
    let closed = open
        .to_circuit_loop()
        .map_err(physics(format!("coil {}: circuit loop", cfg.name)))?;
    Ok((open, closed))
}

/// Builds a coil with its configured bend.
pub fn build_coil(cfg: &CoilConfig, frequency_hz: f64) -> Result<BuiltCoil> {
    build_coil_bent(cfg, cfg.bend.as_ref(), frequency_hz)
}

/// Builds a coil with `bend` in place of its configured one. Inductance
/// comes from the placed geometry, resistance from the open trace length.
fn build_coil_bent(cfg: &CoilConfig, bend: Option<&BendConfig>, frequency_hz: f64) -> Result<BuiltCoil> {
    let ctx = |what: &str| format!("coil {}: {what}", cfg.name);
    let (open, local) = coil_loop(cfg)?;
    let world = place(&format!("coil {}", cfg.name), &local, bend, cfg.center_m)?;
    let conductor = cfg.conductor();
    let l = self_inductance(&world, &conductor).map_err(physics(ctx("self-inductance")))?;
    let electrical = match cfg.q_factor {
        Some(q) => CoilElectrical::with_q(l, q, frequency_hz),
        None => ac_resistance(&open, &conductor, frequency_hz).and_then(|r| CoilElectrical::new(l, r, frequency_hz)),
    }
    .map_err(physics(ctx("electricals")))?;
    Ok(BuiltCoil {
        name: cfg.name.clone(),
        shape: cfg.shape,
        local,
        world,
        electrical,
        conductor_length_m: open.arc_length(),
        q_fixed: cfg.q_factor.is_some(),
    })
}

/// One reader–tag link.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkRow {
    pub reader: String,
    pub tag: String,
    pub uid: u64,
    pub link: LinkBudget,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoveragePoint {
    /// Tag center in the surface's flat frame.
    pub x_m: f64,
    pub y_m: f64,
    pub link: LinkBudget,
}

/// A tag moved over a placement grid on its surface.
#[derive(Debug, Clone, PartialEq)]
pub struct Coverage {
    pub reader: String,
    pub tag: String,
    pub nx: usize,
    pub ny: usize,
    /// Row-major, x fastest.
    pub points: Vec<CoveragePoint>,
}

impl Coverage {
    pub fn readable_count(&self) -> usize {
        self.points.iter().filter(|p| p.link.readable()).count()
    }

    pub fn fraction(&self) -> f64 {
        if self.points.is_empty() {
            return 0.0;
        }
        self.readable_count() as f64 / self.points.len() as f64
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "reader = {}", self.reader);
        let _ = writeln!(out, "tag = {}", self.tag);
        let _ = writeln!(out, "grid = {}x{}", self.nx, self.ny);
        let _ = writeln!(out, "readable = {}/{}", self.readable_count(), self.points.len());
        let _ = writeln!(out, "coverage_fraction = {:.6}", self.fraction());
        let powered = self.points.iter().filter(|p| p.link.powered()).count();
        let detectable = self.points.iter().filter(|p| p.link.detectable()).count();
        let _ = writeln!(out, "powered = {powered}");
        let _ = writeln!(out, "detectable = {detectable}");
        let min = |f: fn(&LinkBudget) -> f64| self.points.iter().map(|p| f(&p.link)).fold(f64::INFINITY, f64::min);
        let max = |f: fn(&LinkBudget) -> f64| self.points.iter().map(|p| f(&p.link)).fold(0.0, f64::max);
        let _ = writeln!(out, "k_min = {:.6e}", min(|l| l.k));
        let _ = writeln!(out, "k_max = {:.6e}", max(|l| l.k));
        let _ = writeln!(out, "delivered_power_w_min = {:.6e}", min(|l| l.delivered_power_w));
        let _ = writeln!(out, "modulation_depth_min = {:.6e}", min(|l| l.modulation_depth));
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x_m,y_m,m_h,k,eta,delivered_power_w,modulation_depth,readable\n");
        for p in &self.points {
            let l = &p.link;
            let _ = writeln!(
                out,
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}",
                p.x_m,
                p.y_m,
                l.m_h,
                l.k,
                l.eta,
                l.delivered_power_w,
                l.modulation_depth,
                u8::from(l.readable())
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BendRow {
    /// Infinite for the flat surface.
    pub radius_m: f64,
    pub reader_inductance_h: f64,
    /// Coupling magnitude per swept tag.
    pub k: Vec<f64>,
}

/// Coupling of surface tags as the reader surface is bent.
#[derive(Debug, Clone, PartialEq)]
pub struct BendSweep {
    pub reader: String,
    pub tags: Vec<String>,
    pub flat: BendRow,
    pub rows: Vec<BendRow>,
}

impl BendSweep {
    /// `|k(R) − k(flat)| / k(flat)` for row `i`, tag `j`.
    pub fn rel_change(&self, i: usize, j: usize) -> f64 {
        let flat = self.flat.k[j];
        (self.rows[i].k[j] - flat).abs() / flat
    }

    pub fn max_rel_change(&self) -> f64 {
        (0..self.rows.len())
            .flat_map(|i| (0..self.tags.len()).map(move |j| (i, j)))
            .map(|(i, j)| self.rel_change(i, j))
            .fold(0.0, f64::max)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("reader = {}\n", self.reader);
        let _ = write!(out, "{:>10} {:>12}", "radius_m", "reader_L_uH");
        for t in &self.tags {
            let _ = write!(out, " {:>12} {:>9}", format!("k_{t}"), "change");
        }
        out.push('\n');
        for (i, row) in self.rows.iter().enumerate() {
            let r = if row.radius_m.is_finite() {
                format!("{:.3}", row.radius_m)
            } else {
                "flat".to_owned()
            };
            let _ = write!(out, "{r:>10} {:>12.5}", row.reader_inductance_h * 1e6);
            for (j, k) in row.k.iter().enumerate() {
                let _ = write!(out, " {k:>12.5e} {:>8.2}%", 100.0 * self.rel_change(i, j));
            }
            out.push('\n');
        }
        let _ = writeln!(out, "max_relative_change = {:.6}", self.max_rel_change());
        out
    }
}

/// Localization of two equal-footprint coils.
#[derive(Debug, Clone, PartialEq)]
pub struct CoilComparison {
    pub meander: String,
    pub spiral: String,
    pub heights_m: Vec<f64>,
    pub meander_fit: DecayFit,
    pub spiral_fit: DecayFit,
    /// `λ_meander / λ_spiral`.
    pub ratio: f64,
    pub reference_tag: Option<String>,
    pub meander_coverage: Option<f64>,
    pub spiral_coverage: Option<f64>,
}

impl CoilComparison {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "heights_m = {:?}", self.heights_m);
        for (role, name, fit) in [
            ("meander", &self.meander, &self.meander_fit),
            ("spiral", &self.spiral, &self.spiral_fit),
        ] {
            let _ = writeln!(out, "\n[{role}]");
            let _ = writeln!(out, "coil = {name}");
            let _ = writeln!(out, "decay_length_m = {:.6e}", fit.decay_length_m);
            let _ = writeln!(out, "amplitude_t_per_a = {:.6e}", fit.amplitude);
            let _ = writeln!(out, "fit_residual = {:.6e}", fit.residual);
            let _ = writeln!(out, "flagged = {}", fit.flagged);
        }
        let _ = writeln!(out, "\nratio = {:.6}", self.ratio);
        if let (Some(t), Some(m), Some(s)) = (&self.reference_tag, self.meander_coverage, self.spiral_coverage) {
            let _ = writeln!(out, "reference_tag = {t}");
            let _ = writeln!(out, "meander_coverage_fraction = {m:.6}");
            let _ = writeln!(out, "spiral_coverage_fraction = {s:.6}");
        }
        out
    }
}

/// Results of the ring ↔ wristband session.
#[derive(Debug, Clone, PartialEq)]
pub struct PicoRingOutcome {
    pub link: LinkBudget,
    pub ring_inductance_h: f64,
    pub wristband_inductance_h: f64,
    pub frame_period: SimTime,
    pub stream: SessionOutcome,
    /// Bytes, outcome and frame length of the bulk upload.
    pub bulk: Option<(u32, SessionOutcome, SimTime)>,
    pub log: EventLog,
    pub energy: EnergyReport,
}

impl PicoRingOutcome {
    pub fn to_text(&self) -> String {
        let l = &self.link;
        let mut out = String::new();
        let _ = writeln!(out, "ring_inductance_h = {:.6e}", self.ring_inductance_h);
        let _ = writeln!(out, "wristband_inductance_h = {:.6e}", self.wristband_inductance_h);
        let _ = writeln!(out, "m_h = {:.6e}", l.m_h);
        let _ = writeln!(out, "k = {:.6e}", l.k);
        let _ = writeln!(out, "modulation_depth = {:.6e}", l.modulation_depth);
        let _ = writeln!(out, "detection_threshold = {:.6e}", l.detection_threshold);
        let _ = writeln!(out, "link_readable = {}", !self.stream.aborted);
        let _ = writeln!(out, "frame_period_s = {}", self.frame_period);
        let _ = writeln!(out, "frames = {}", self.stream.frames);
        let _ = writeln!(out, "bytes_up = {}", self.stream.bytes_up);
        let _ = writeln!(out, "bytes_down = {}", self.stream.bytes_down);
        let _ = writeln!(out, "airtime_s = {}", self.stream.airtime);
        let _ = writeln!(out, "airtime_fraction = {:.6}", self.stream.airtime_fraction(self.frame_period));
        for (i, g) in self.stream.gesture_latencies.iter().enumerate() {
            let _ = writeln!(out, "gesture_{i}_latency_s = {g}");
        }
        if let Some((bytes, o, d)) = &self.bulk {
            let _ = writeln!(out, "bulk_upload_bytes = {bytes}");
            let _ = writeln!(out, "bulk_upload_s = {d}");
            let _ = writeln!(out, "bulk_upload_completed = {}", !o.aborted);
        }
        out
    }
}

/// Everything one run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    /// Input scenario with the seed and every tag uid resolved.
    pub scenario: Scenario,
    pub coils: Vec<BuiltCoil>,
    pub links: Vec<LinkRow>,
    pub events: EventLog,
    pub energy: EnergyReport,
    pub picoring: Option<PicoRingOutcome>,
    pub coverage: Option<Coverage>,
    pub bend: Option<BendSweep>,
    pub compare: Option<CoilComparison>,
    pub field_maps: Vec<(String, Vec<FieldSample>)>,
}

/// Resolved scenario with its coils built.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub scenario: Scenario,
    pub coils: BTreeMap<String, BuiltCoil>,
}

fn inset_positions(n: usize, extent: f64, tag_extent: f64) -> Vec<f64> {
    let half = ((extent - tag_extent) / 2.0).max(0.0);
    if n == 1 {
        return vec![0.0];
    }
    (0..n).map(|i| -half + 2.0 * half * i as f64 / (n - 1) as f64).collect()
}

impl Pipeline {
    /// Sets the seed, draws missing uids from it and builds every coil.
    pub fn new(scenario: &Scenario, seed: u64) -> Result<Self> {
        let mut scenario = scenario.clone();
        scenario.validate()?;
        scenario.seed = seed;
        scenario.resolve_uids(&mut seeded_rng(seed));
        let coils = scenario
            .coils
            .iter()
            .map(|c| Ok((c.name.clone(), build_coil(c, scenario.frequency_hz)?)))
            .collect::<Result<_>>()?;
        Ok(Pipeline { scenario, coils })
    }

    fn coil(&self, name: &str) -> &BuiltCoil {
        &self.coils[name]
    }

    fn coil_config(&self, name: &str) -> &CoilConfig {
        self.scenario.coil(name).expect("validated reference")
    }

    fn reader(&self, r: &ReaderConfig, coil: &CoilElectrical) -> Result<DrivenReader> {
        DrivenReader::new(*coil, r.drive_power_w, r.supply_power_w).map_err(physics(format!("reader {}", r.name)))
    }

    fn tag_load(&self, t: &TagConfig) -> Result<TagLoad> {
        let ctx = format!("tag {}", t.name);
        let coil = self
            .coil(&t.coil)
            .electrical
            .with_q_factor(t.q_factor)
            .map_err(physics(ctx.clone()))?;
        let matched = t.matched_load_ohm.unwrap_or(coil.ac_resistance_ohm);
        let modulating = t
            .modulating_load_ohm
            .unwrap_or(matched * crate::circuit::DEFAULT_MODULATING_LOAD_FRACTION);
        TagLoad::new(coil, matched, modulating, t.activation_threshold_w).map_err(physics(ctx))
    }

    /// Tag loop at `position` on its surface, with the surface bent by `bend`.
    fn tag_world(&self, t: &TagConfig, position: [f64; 2], bend: Option<&BendConfig>) -> Result<WirePath> {
        let surface = self.coil_config(&t.surface);
        let local = self
            .coil(&t.coil)
            .local
            .translated(Point3::new(position[0], position[1], t.offset_m));
        place(&format!("tag {}", t.name), &local, bend, surface.center_m)
    }

    fn tag_device(&self, t: &TagConfig) -> Result<TagDevice> {
        let surface = self.coil_config(&t.surface);
        let [x, y] = t.position_m;
        let center = match &surface.bend {
            Some(b) => {
                let p = WirePath::new(vec![Point3::new(x, y, t.offset_m), Point3::new(x, y, t.offset_m + 1e-3)], false)
                    .and_then(|p| apply_cylinder_bend(&p, b.radius_m, &bend_axis(b.axis)))
                    .map_err(physics(format!("tag {}", t.name)))?;
                p.first()
            }
            None => Point3::new(x, y, t.offset_m),
        };
        Ok(TagDevice {
            name: t.name.clone(),
            uid: t.uid.expect("uids resolved").0,
            position: center + surface.center_m,
            payload_bytes: t.payload_bytes,
        })
    }

    fn link(&self, reader_world: &WirePath, reader: &DrivenReader, tag_world: &WirePath, tag: &TagLoad, ctx: &str) -> Result<LinkBudget> {
        let m = mutual_inductance(reader_world, tag_world).map_err(physics(format!("{ctx}: mutual inductance")))?;
        link_budget(m, reader, tag, self.scenario.protocol.detection_threshold).map_err(physics(ctx.to_owned()))
    }

    /// Link budget for every reader × tag pair, readers then tags in file order.
    pub fn links(&self) -> Result<Vec<LinkRow>> {
        let mut rows = Vec::new();
        for r in &self.scenario.readers {
            let coil = self.coil(&r.coil);
            let reader = self.reader(r, &coil.electrical)?;
            for t in &self.scenario.tags {
                let world = self.tag_world(t, t.position_m, self.coil_config(&t.surface).bend.as_ref())?;
                let link = self.link(&coil.world, &reader, &world, &self.tag_load(t)?, &format!("link {} -> {}", r.name, t.name))?;
                rows.push(LinkRow {
                    reader: r.name.clone(),
                    tag: t.name.clone(),
                    uid: t.uid.expect("uids resolved").0,
                    link,
                });
            }
        }
        Ok(rows)
    }

    /// Readers poll in file order. A poll wakes the reader and its readable
    /// tags, runs the inventory, reads every singulated tag's payload, then
    /// puts all of them back to sleep.
    pub fn timeline(&self, links: &[LinkRow]) -> Result<(EventLog, EnergyReport)> {
        let s = &self.scenario;
        let mut log = EventLog::new(s.seed, &s.name);
        let timing = s.protocol.timing();
        let mut clock = SimTime::ZERO;
        let tags: Vec<TagDevice> = s.tags.iter().map(|t| self.tag_device(t)).collect::<Result<_>>()?;
        for r in &s.readers {
            let device = ReaderDevice {
                name: r.name.clone(),
                slot_count: r.slot_count,
                timing,
            };
            let budgets: BTreeMap<u64, LinkBudget> = links
                .iter()
                .filter(|l| l.reader == r.name)
                .map(|l| (l.uid, l.link))
                .collect();
            let readable: Vec<&TagDevice> = tags.iter().filter(|t| budgets[&t.uid].readable()).collect();
            let reader_start = clock;
            let polls: Vec<SimTime> = match r.polling {
                Polling::OneShot => vec![clock],
                Polling::Continuous { period_s, duration_s } => {
                    let period = SimTime::from_secs_f64(period_s).map_err(physics(format!("reader {}", r.name)))?;
                    let n = (duration_s / period_s - 1e-9).ceil().max(1.0) as u64;
                    (0..n).map(|k| clock + SimTime(period.as_nanos() * k)).collect()
                }
            };
            for at in polls {
                let t0 = at.max(clock);
                log.record(t0, &r.name, EventKind::Wake, "poll");
                for t in &readable {
                    log.record(t0, &t.name, EventKind::Wake, "");
                }
                let inv = run_inventory(&device, &tags, &budgets, t0, &mut log)
                    .map_err(physics(format!("reader {}: inventory", r.name)))?;
                let mut t = inv.end;
                for uid in &inv.singulated {
                    let tag = tags.iter().find(|d| d.uid == *uid).expect("singulated tags exist");
                    t += read_tag(&device, tag, tag.payload_bytes, &inv, t, &mut log)
                        .map_err(physics(format!("reader {}: read", r.name)))?;
                }
                for tag in &readable {
                    log.record(t, &tag.name, EventKind::Sleep, "");
                }
                log.record(t, &r.name, EventKind::Sleep, "");
                clock = t;
            }
            if let Polling::Continuous { duration_s, .. } = r.polling {
                let end = reader_start + SimTime::from_secs_f64(duration_s).map_err(physics(format!("reader {}", r.name)))?;
                clock = clock.max(end);
            }
        }
        let mut table = PowerTable::new();
        for r in &s.readers {
            table.insert(
                r.name.clone(),
                PowerProfile {
                    active_w: r.supply_power_w,
                    sleep_w: r.sleep_power_w,
                    battery_capacity_j: None,
                },
            );
        }
        for t in &s.tags {
            table.insert(
                t.name.clone(),
                PowerProfile {
                    active_w: t.activation_threshold_w,
                    sleep_w: 0.0,
                    battery_capacity_j: None,
                },
            );
        }
        let energy = integrate(&log, &table, SimTime::ZERO, clock).map_err(physics("energy"))?;
        Ok((log, energy))
    }

    pub fn picoring(&self, p: &PicoRingConfig) -> Result<PicoRingOutcome> {
        let s = &self.scenario;
        let ctx = "picoring";
        let ring_coil = self.coil(&p.ring_coil);
        let wb_coil = self.coil(&p.wristband_coil);
        let reader = DrivenReader::new(wb_coil.electrical, p.drive_power_w, p.supply_power_w).map_err(physics(ctx))?;
        let tag = TagLoad::with_default_loads(ring_coil.electrical, p.ring_activation_threshold_w).map_err(physics(ctx))?;
        let m = mutual_inductance(&wb_coil.world, &ring_coil.world).map_err(physics("picoring: mutual inductance"))?;
        let threshold = p.detection_threshold.unwrap_or(s.protocol.detection_threshold);
        let link = link_budget(m, &reader, &tag, threshold).map_err(physics(ctx))?;

        let device = |name: &str, w: &super::config::WearableConfig, harvesting: bool| WearableDevice {
            name: name.to_owned(),
            active_power_w: w.active_power_w,
            sleep_power_w: w.sleep_power_w,
            battery_capacity_j: w.battery_capacity_j,
            harvesting,
        };
        let ring = device("ring", &p.ring, p.ring_harvesting);
        let wristband = device("wristband", &p.wristband, false);
        let timing = s.protocol.timing();
        let mut log = EventLog::new(s.seed, &s.name);

        let mut schedule = SessionSchedule::motion_stream(p.stream.rate_hz, p.stream.record_bytes, p.stream.duration_s)
            .map_err(physics("picoring: stream"))?;
        schedule.sleep_between_frames = p.sleep_between_frames;
        for g in &p.gestures {
            let at = SimTime::from_secs_f64(g.at_s).map_err(physics("picoring: gesture"))?;
            schedule = schedule.with_gesture(at, g.command_bytes);
        }
        let period = schedule.frame_period;
        let stream = picoring_session(&ring, &wristband, &link, &schedule, &timing, SimTime::ZERO, &mut log)
            .map_err(physics("picoring: stream"))?;
        let mut end = stream.end.max(SimTime(period.as_nanos() * stream.frames as u64));
        let bulk = match p.bulk_upload_bytes {
            Some(bytes) => {
                let frame = timing.exchange(8 * u64::from(bytes));
                let o = picoring_session(&ring, &wristband, &link, &SessionSchedule::bulk_upload(bytes, frame), &timing, end, &mut log)
                    .map_err(physics("picoring: bulk upload"))?;
                end = end.max(o.end);
                Some((bytes, o, frame))
            }
            None => None,
        };
        let table: PowerTable = [&ring, &wristband]
            .into_iter()
            .map(|d| {
                (
                    d.name.clone(),
                    PowerProfile {
                        active_w: d.active_power_w,
                        sleep_w: d.sleep_power_w,
                        battery_capacity_j: d.battery_capacity_j,
                    },
                )
            })
            .collect();
        let energy = integrate(&log, &table, SimTime::ZERO, end).map_err(physics("picoring: energy"))?;
        Ok(PicoRingOutcome {
            link,
            ring_inductance_h: ring_coil.electrical.inductance_h,
            wristband_inductance_h: wb_coil.electrical.inductance_h,
            frame_period: period,
            stream,
            bulk,
            log,
            energy,
        })
    }

    /// Moves `tag` over an `nx × ny` grid on its surface, inset so the tag
    /// stays inside the footprint.
    fn coverage_with(&self, reader_name: &str, reader_world: &WirePath, reader: &DrivenReader, t: &TagConfig, nx: usize, ny: usize) -> Result<Coverage> {
        let surface = self.coil_config(&t.surface);
        let (w, h) = surface.shape.footprint().expect("validated surface");
        let (tw, th) = self.coil(&t.coil).shape.footprint().unwrap_or((0.0, 0.0));
        let load = self.tag_load(t)?;
        let mut points = Vec::with_capacity(nx * ny);
        for &y in &inset_positions(ny, h, th) {
            for &x in &inset_positions(nx, w, tw) {
                let world = self.tag_world(t, [x, y], surface.bend.as_ref())?;
                let link = self.link(reader_world, reader, &world, &load, &format!("grid {reader_name} -> {} at ({x}, {y})", t.name))?;
                points.push(CoveragePoint { x_m: x, y_m: y, link });
            }
        }
        Ok(Coverage {
            reader: reader_name.to_owned(),
            tag: t.name.clone(),
            nx,
            ny,
            points,
        })
    }

    pub fn tag_grid(&self) -> Result<Option<Coverage>> {
        let Some(g) = &self.scenario.sweep.tag_grid else {
            return Ok(None);
        };
        let r = self.scenario.reader(&g.reader).expect("validated");
        let t = self.scenario.tag(&g.tag).expect("validated");
        let coil = self.coil(&r.coil);
        let reader = self.reader(r, &coil.electrical)?;
        self.coverage_with(&r.name, &coil.world, &reader, t, g.nx, g.ny).map(Some)
    }

    pub fn bend_sweep(&self) -> Result<Option<BendSweep>> {
        let Some(b) = &self.scenario.sweep.bend else {
            return Ok(None);
        };
        let r = self.scenario.reader(&b.reader).expect("validated");
        let cfg = self.coil_config(&r.coil);
        let tags: Vec<&TagConfig> = if b.tags.is_empty() {
            self.scenario.tags.iter().filter(|t| t.surface == r.coil).collect()
        } else {
            b.tags.iter().map(|n| self.scenario.tag(n).expect("validated")).collect()
        };
        let row = |radius: f64| -> Result<BendRow> {
            let bend = BendConfig { radius_m: radius, axis: b.axis };
            let bend = radius.is_finite().then_some(&bend);
            let coil = if bend.copied() == cfg.bend {
                self.coil(&r.coil).clone()
            } else {
                build_coil_bent(cfg, bend, self.scenario.frequency_hz)?
            };
            let k = tags
                .iter()
                .map(|t| {
                    let world = self.tag_world(t, t.position_m, bend)?;
                    let m = mutual_inductance(&coil.world, &world)
                        .map_err(physics(format!("bend {radius} m: {} -> {}", r.name, t.name)))?;
                    Ok((m / (coil.electrical.inductance_h * self.coil(&t.coil).electrical.inductance_h).sqrt()).abs())
                })
                .collect::<Result<_>>()?;
            Ok(BendRow {
                radius_m: radius,
                reader_inductance_h: coil.electrical.inductance_h,
                k,
            })
        };
        let mut rows = Vec::with_capacity(b.radii_m.len());
        for &radius in &b.radii_m {
            rows.push(row(radius)?);
        }
        let flat = match rows.iter().find(|r| r.radius_m.is_infinite()) {
            Some(f) => f.clone(),
            None => row(f64::INFINITY)?,
        };
        Ok(Some(BendSweep {
            reader: r.name.clone(),
            tags: tags.iter().map(|t| t.name.clone()).collect(),
            flat,
            rows,
        }))
    }

    /// Localization and coverage of the compared coils.
    pub fn compare(&self) -> Result<Option<CoilComparison>> {
        let Some(c) = &self.scenario.compare else {
            return Ok(None);
        };
        let mut out = localization(&self.scenario, &self.coil(&c.meander).world, &self.coil(&c.spiral).world)?;
        if let Some(tag) = &c.tag {
            let t = self.scenario.tag(tag).expect("validated");
            let mut fractions = Vec::new();
            for name in [&c.meander, &c.spiral] {
                let coil = self.coil(name);
                let reader = DrivenReader::new(coil.electrical, crate::circuit::DEFAULT_DRIVE_POWER_W, crate::circuit::READER_SUPPLY_POWER_W)
                    .map_err(physics(format!("compare {name}")))?;
                let on_coil = TagConfig {
                    surface: name.clone(),
                    ..t.clone()
                };
                fractions.push(self.coverage_with(name, &coil.world, &reader, &on_coil, c.grid_n, c.grid_n)?.fraction());
            }
            out.reference_tag = Some(tag.clone());
            out.meander_coverage = Some(fractions[0]);
            out.spiral_coverage = Some(fractions[1]);
        }
        Ok(Some(out))
    }

    pub fn field_maps(&self) -> Result<Vec<(String, Vec<FieldSample>)>> {
        self.scenario
            .output
            .field_maps
            .iter()
            .map(|f| Ok((f.coil.clone(), field_map_for(self.coil(&f.coil), f)?)))
            .collect()
    }
}

fn localization(s: &Scenario, meander: &WirePath, spiral: &WirePath) -> Result<CoilComparison> {
    let c = s.compare.as_ref().expect("caller checked");
    let mcfg = s.coil(&c.meander).expect("validated");
    let scfg = s.coil(&c.spiral).expect("validated");
    let pitch = match mcfg.shape {
        Shape::Meander(m) => m.pitch_m,
        Shape::Spiral(sp) => sp.pitch_m,
        Shape::AngledRing(_) => unreachable!("validated surface coil"),
    };
    let fit = |cfg: &CoilConfig, path: &WirePath| {
        fit_decay(path, &c.heights_m, &LateralWindow::meander_period(cfg.center_m, pitch))
            .map_err(physics(format!("compare: decay fit of {}", cfg.name)))
    };
    let meander_fit = fit(mcfg, meander)?;
    let spiral_fit = fit(scfg, spiral)?;
    Ok(CoilComparison {
        meander: c.meander.clone(),
        spiral: c.spiral.clone(),
        heights_m: c.heights_m.clone(),
        meander_fit,
        spiral_fit,
        ratio: meander_fit.decay_length_m / spiral_fit.decay_length_m,
        reference_tag: None,
        meander_coverage: None,
        spiral_coverage: None,
    })
}

/// Decay-length comparison of the `[compare]` coils. Builds only geometry,
/// so it skips the coverage fractions that need full electricals.
pub fn compare_coils(s: &Scenario) -> Result<CoilComparison> {
    s.validate()?;
    let c = s
        .compare
        .as_ref()
        .ok_or_else(|| ScenarioError::Validation("scenario has no [compare] section".into()))?;
    let placed = |name: &str| -> Result<WirePath> {
        let cfg = s.coil(name).expect("validated");
        let (_, local) = coil_loop(cfg)?;
        place(&format!("coil {name}"), &local, None, cfg.center_m)
    };
    localization(s, &placed(&c.meander)?, &placed(&c.spiral)?)
}

/// Field samples over the coil's lateral bounding box, from `z_min_m` to
/// `z_max_m` above its highest point.
pub fn field_map_for(coil: &BuiltCoil, f: &FieldMapConfig) -> Result<Vec<FieldSample>> {
    let (lo, hi) = coil.world.bounding_box();
    let grid = Grid3::spanning(
        Point3::new(lo.x, lo.y, hi.z + f.z_min_m),
        Point3::new(hi.x, hi.y, hi.z + f.z_max_m),
        f.grid,
    );
    field_map(&coil.world, grid.points()).map_err(physics(format!("field map of {}", coil.name)))
}

/// Runs the whole pipeline for `scenario` with `seed`.
pub fn run_scenario(scenario: &Scenario, seed: u64) -> Result<Bundle> {
    let p = Pipeline::new(scenario, seed)?;
    let links = p.links()?;
    let (events, energy) = p.timeline(&links)?;
    let picoring = p.scenario.picoring.as_ref().map(|c| p.picoring(c)).transpose()?;
    let coverage = p.tag_grid()?;
    let bend = p.bend_sweep()?;
    let compare = p.compare()?;
    let field_maps = p.field_maps()?;
    let coils = p.scenario.coils.iter().map(|c| p.coils[&c.name].clone()).collect();
    Ok(Bundle {
        scenario: p.scenario,
        coils,
        links,
        events,
        energy,
        picoring,
        coverage,
        bend,
        compare,
        field_maps,
    })
}

fn electricals_text(coils: &[BuiltCoil]) -> String {
    let mut out = String::new();
    for c in coils {
        let e = &c.electrical;
        let _ = writeln!(out, "[{}]", c.name);
        let _ = writeln!(out, "kind = {}", c.shape.kind());
        let _ = writeln!(out, "inductance_h = {:.9e}", e.inductance_h);
        let _ = writeln!(out, "ac_resistance_ohm = {:.9e}", e.ac_resistance_ohm);
        let _ = writeln!(out, "q_factor = {:.6}{}", e.q_factor, if c.q_fixed { " # from scenario" } else { "" });
        let _ = writeln!(out, "tuning_capacitance_f = {:.9e}", e.tuning_capacitance_f);
        let _ = writeln!(out, "conductor_length_m = {:.9}", c.conductor_length_m);
        let _ = writeln!(out, "frequency_hz = {}", e.frequency_hz);
        out.push('\n');
    }
    out
}

fn links_csv(rows: &[LinkRow]) -> String {
    let mut out = String::from(
        "reader,tag,uid,m_h,k,eta,delivered_power_w,induced_voltage_v,modulation_depth,activation_threshold_w,detection_threshold,powered,detectable,readable\n",
    );
    for r in rows {
        let l = &r.link;
        let _ = writeln!(
            out,
            "{},{},{:016x},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{},{}",
            r.reader,
            r.tag,
            r.uid,
            l.m_h,
            l.k,
            l.eta,
            l.delivered_power_w,
            l.induced_voltage_v,
            l.modulation_depth,
            l.activation_threshold_w,
            l.detection_threshold,
            u8::from(l.powered()),
            u8::from(l.detectable()),
            u8::from(l.readable())
        );
    }
    out
}

/// Link table text with the tag Q values flagged as assumptions.
pub(crate) fn links_text(s: &Scenario, rows: &[LinkRow]) -> String {
    let mut out = String::new();
    for t in &s.tags {
        let _ = writeln!(out, "# tag {} q_factor = {} # assumption", t.name, t.q_factor);
    }
    out.push_str(&link_table(rows.iter().map(|r| (r.reader.as_str(), r.tag.as_str(), &r.link))));
    out
}

fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let tmp = dir.join(format!(".{name}.tmp"));
    let path = dir.join(name);
    std::fs::write(&tmp, contents).map_err(|e| ScenarioError::io(&tmp, e))?;
    std::fs::rename(&tmp, &path).map_err(|e| ScenarioError::io(&path, e))
}

/// Writes every artifact of `bundle` into `dir`, then the manifest.
pub fn write_bundle(bundle: &Bundle, dir: &Path) -> Result<Manifest> {
    std::fs::create_dir_all(dir).map_err(|e| ScenarioError::io(dir, e))?;
    let s = &bundle.scenario;
    let mut files: Vec<(String, String)> = vec![
        ("scenario.toml".into(), s.to_toml()),
        ("electricals.txt".into(), electricals_text(&bundle.coils)),
        ("links.csv".into(), links_csv(&bundle.links)),
        ("links.txt".into(), links_text(s, &bundle.links)),
        ("events.tsv".into(), bundle.events.to_tsv()),
        ("energy.txt".into(), bundle.energy.to_text()),
    ];
    if let Some(p) = &bundle.picoring {
        files.push(("picoring.txt".into(), p.to_text()));
        files.push(("picoring_events.tsv".into(), p.log.to_tsv()));
        files.push(("picoring_energy.txt".into(), p.energy.to_text()));
    }
    if let Some(c) = &bundle.coverage {
        files.push(("coverage.txt".into(), c.to_text()));
        if !s.output.summary_only {
            files.push(("coverage.csv".into(), c.to_csv()));
        }
    }
    if let Some(b) = &bundle.bend {
        files.push(("bend.txt".into(), b.to_text()));
    }
    if let Some(c) = &bundle.compare {
        files.push(("compare.txt".into(), c.to_text()));
    }
    for (coil, samples) in &bundle.field_maps {
        files.push((format!("fieldmap_{coil}.csv"), field_map_csv(samples)));
    }
    for (name, contents) in &files {
        write_atomic(dir, name, contents)?;
    }
    let manifest = Manifest::new(s, &files);
    write_manifest(dir, &manifest)?;
    Ok(manifest)
}
