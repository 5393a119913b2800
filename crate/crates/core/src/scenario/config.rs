//! Scenario file schema. TOML, SI units with the unit in each key name,
//! unknown keys rejected.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ScenarioError;
use crate::circuit::{
    DEFAULT_DETECTION_THRESHOLD, DEFAULT_DRIVE_POWER_W, DEFAULT_TAG_Q, READER_SUPPLY_POWER_W,
    TAG_ACTIVATION_POWER_W,
};
use crate::geometry::{AngledCoilSpec, Conductor, MeanderSpec, Point3, SpiralSpec};
use crate::magnetics::CARRIER_FREQUENCY_HZ;
use crate::protocol::{
    LinkTiming, SlotCount, RING_ACTIVE_POWER_W, RING_SLEEP_POWER_W, WRISTBAND_ACTIVE_POWER_W,
    WRISTBAND_SLEEP_POWER_W,
};

/// 64-bit tag identifier, written as 16 hex digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Uid(pub u64);

impl fmt::Display for Uid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl FromStr for Uid {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let digits = s.strip_prefix("0x").unwrap_or(s);
        if digits.is_empty() || digits.len() > 16 {
            return Err(format!("uid {s:?} must be 1 to 16 hex digits"));
        }
        u64::from_str_radix(digits, 16)
            .map(Uid)
            .map_err(|_| format!("uid {s:?} is not hexadecimal"))
    }
}

impl Serialize for Uid {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Uid {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn carrier() -> f64 {
    CARRIER_FREQUENCY_HZ
}
fn copper() -> f64 {
    Conductor::COPPER_RESISTIVITY_OHM_M
}
fn foil_8um() -> f64 {
    8e-6
}
fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn drive() -> f64 {
    DEFAULT_DRIVE_POWER_W
}
fn reader_supply() -> f64 {
    READER_SUPPLY_POWER_W
}
fn sixteen() -> SlotCount {
    SlotCount::Sixteen
}
fn tag_q() -> f64 {
    DEFAULT_TAG_Q
}
fn tag_threshold() -> f64 {
    TAG_ACTIVATION_POWER_W
}
fn payload() -> u32 {
    16
}
fn detection() -> f64 {
    DEFAULT_DETECTION_THRESHOLD
}
fn data_rate() -> f64 {
    LinkTiming::default().data_rate_bps
}
fn overhead() -> f64 {
    LinkTiming::default().frame_overhead_s
}
fn ten() -> usize {
    10
}
fn default_heights() -> Vec<f64> {
    (1..=8).map(|i| 0.0025 * f64::from(i)).collect()
}
fn default_radii() -> Vec<f64> {
    vec![f64::INFINITY, 0.20, 0.15, 0.10]
}
fn z_min() -> f64 {
    0.002
}
fn z_max() -> f64 {
    0.05
}
fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    /// Used when the command line gives no seed.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "carrier")]
    pub frequency_hz: f64,
    #[serde(default)]
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub coils: Vec<CoilConfig>,
    #[serde(default)]
    pub readers: Vec<ReaderConfig>,
    #[serde(default)]
    pub tags: Vec<TagConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub picoring: Option<PicoRingConfig>,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    #[serde(default = "data_rate")]
    pub data_rate_bps: f64,
    #[serde(default = "overhead")]
    pub frame_overhead_s: f64,
    #[serde(default = "detection")]
    pub detection_threshold: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            data_rate_bps: data_rate(),
            frame_overhead_s: overhead(),
            detection_threshold: detection(),
        }
    }
}

impl ProtocolConfig {
    pub fn timing(&self) -> LinkTiming {
        LinkTiming {
            data_rate_bps: self.data_rate_bps,
            frame_overhead_s: self.frame_overhead_s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Meander(MeanderSpec),
    Spiral(SpiralSpec),
    AngledRing(AngledCoilSpec),
}

impl Shape {
    pub fn trace_width_m(&self) -> f64 {
        match self {
            Shape::Meander(s) => s.trace_width_m,
            Shape::Spiral(s) => s.trace_width_m,
            Shape::AngledRing(s) => s.trace_width_m,
        }
    }

    /// Planar footprint (width, height) of surface coils.
    pub fn footprint(&self) -> Option<(f64, f64)> {
        match self {
            Shape::Meander(s) => Some((s.width_m, s.height_m)),
            Shape::Spiral(s) => Some((s.outer_width_m, s.outer_height_m)),
            Shape::AngledRing(_) => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Shape::Meander(_) => "meander",
            Shape::Spiral(_) => "spiral",
            Shape::AngledRing(_) => "angled_ring",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BendAxisDir {
    /// Bend axis parallel to local x: the local y coordinate wraps.
    #[default]
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BendConfig {
    pub radius_m: f64,
    #[serde(default)]
    pub axis: BendAxisDir,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoilConfig {
    pub name: String,
    pub shape: Shape,
    #[serde(default = "copper")]
    pub resistivity_ohm_m: f64,
    #[serde(default = "foil_8um")]
    pub foil_thickness_m: f64,
    #[serde(default = "one")]
    pub relative_permeability: f64,
    /// Translation of the coil's local origin.
    #[serde(default)]
    pub center_m: Point3,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bend: Option<BendConfig>,
    /// Fixes Q; the series resistance is then derived from L and Q instead
    /// of the skin-effect model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_factor: Option<f64>,
}

impl CoilConfig {
    pub fn conductor(&self) -> Conductor {
        Conductor {
            resistivity_ohm_m: self.resistivity_ohm_m,
            foil_thickness_m: self.foil_thickness_m,
            trace_width_m: self.shape.trace_width_m(),
            relative_permeability: self.relative_permeability,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Polling {
    /// One inventory and readout.
    #[default]
    OneShot,
    /// An inventory and readout every `period_s` for `duration_s`.
    Continuous { period_s: f64, duration_s: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReaderConfig {
    pub name: String,
    pub coil: String,
    #[serde(default = "drive")]
    pub drive_power_w: f64,
    /// Board draw while polling.
    #[serde(default = "reader_supply")]
    pub supply_power_w: f64,
    /// Board draw between polls.
    #[serde(default)]
    pub sleep_power_w: f64,
    #[serde(default = "sixteen")]
    pub slot_count: SlotCount,
    #[serde(default)]
    pub polling: Polling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TagConfig {
    pub name: String,
    /// Coil geometry of the tag.
    pub coil: String,
    /// Surface coil the tag lies on.
    pub surface: String,
    /// Tag center in the surface's flat local frame.
    pub position_m: [f64; 2],
    /// Height of the tag plane above the surface.
    pub offset_m: f64,
    /// Drawn from the seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uid: Option<Uid>,
    #[serde(default = "payload")]
    pub payload_bytes: u32,
    #[serde(default = "tag_q")]
    pub q_factor: f64,
    #[serde(default = "tag_threshold")]
    pub activation_threshold_w: f64,
    /// Defaults to the tag coil resistance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matched_load_ohm: Option<f64>,
    /// Defaults to a tenth of the matched load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulating_load_ohm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WearableConfig {
    pub active_power_w: f64,
    pub sleep_power_w: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub battery_capacity_j: Option<f64>,
}

fn ring_defaults() -> WearableConfig {
    WearableConfig {
        active_power_w: RING_ACTIVE_POWER_W,
        sleep_power_w: RING_SLEEP_POWER_W,
        battery_capacity_j: Some(crate::energy::DEFAULT_RING_BATTERY_J),
    }
}

fn wristband_defaults() -> WearableConfig {
    WearableConfig {
        active_power_w: WRISTBAND_ACTIVE_POWER_W,
        sleep_power_w: WRISTBAND_SLEEP_POWER_W,
        battery_capacity_j: None,
    }
}

fn wristband_supply() -> f64 {
    WRISTBAND_ACTIVE_POWER_W
}

fn ring_threshold() -> f64 {
    RING_ACTIVE_POWER_W
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamConfig {
    pub rate_hz: f64,
    pub record_bytes: u32,
    pub duration_s: f64,
}

impl Default for StreamConfig {
    fn default() -> Self {
        StreamConfig {
            rate_hz: 100.0,
            record_bytes: 8,
            duration_s: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GestureConfig {
    pub at_s: f64,
    pub command_bytes: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicoRingConfig {
    pub ring_coil: String,
    pub wristband_coil: String,
    #[serde(default = "ring_defaults")]
    pub ring: WearableConfig,
    #[serde(default = "wristband_defaults")]
    pub wristband: WearableConfig,
    /// Power the wristband puts into its coil.
    #[serde(default = "drive")]
    pub drive_power_w: f64,
    #[serde(default = "wristband_supply")]
    pub supply_power_w: f64,
    /// Only matters when the ring harvests.
    #[serde(default = "ring_threshold")]
    pub ring_activation_threshold_w: f64,
    #[serde(default)]
    pub ring_harvesting: bool,
    /// Overrides the protocol detection threshold for this link.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detection_threshold: Option<f64>,
    #[serde(default)]
    pub stream: StreamConfig,
    #[serde(default)]
    pub gestures: Vec<GestureConfig>,
    /// A bulk ring → wristband upload after the stream.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bulk_upload_bytes: Option<u32>,
    #[serde(default = "yes")]
    pub sleep_between_frames: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag_grid: Option<TagGridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bend: Option<BendSweepConfig>,
}

/// Moves one tag over an `nx × ny` grid covering its surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TagGridConfig {
    pub reader: String,
    pub tag: String,
    #[serde(default = "ten")]
    pub nx: usize,
    #[serde(default = "ten")]
    pub ny: usize,
}

/// Re-bends the reader's surface coil, and its tags with it, to each radius.
/// An infinite radius is the flat coil.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BendSweepConfig {
    pub reader: String,
    /// Tags on the reader's surface; all of them when empty.
    #[serde(default)]
    pub tags: Vec<String>,
    #[serde(default = "default_radii")]
    pub radii_m: Vec<f64>,
    #[serde(default)]
    pub axis: BendAxisDir,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub meander: String,
    pub spiral: String,
    #[serde(default = "default_heights")]
    pub heights_m: Vec<f64>,
    /// Tag moved over both coils for the coverage fractions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
    #[serde(default = "ten")]
    pub grid_n: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub field_maps: Vec<FieldMapConfig>,
    /// Skip per-point CSVs of sweeps.
    #[serde(default, skip_serializing_if = "is_false")]
    pub summary_only: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldMapConfig {
    pub coil: String,
    pub grid: [usize; 3],
    /// Height range above the coil center.
    #[serde(default = "z_min")]
    pub z_min_m: f64,
    #[serde(default = "z_max")]
    pub z_max_m: f64,
}

/// Parses and validates scenario text. `origin` names the source in errors.
pub fn parse_scenario(text: &str, origin: &str) -> Result<Scenario, ScenarioError> {
    let de = toml::Deserializer::parse(text).map_err(|e| ScenarioError::Parse {
        origin: origin.to_owned(),
        path: String::new(),
        message: e.to_string(),
    })?;
    let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| ScenarioError::Parse {
        origin: origin.to_owned(),
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    scenario.validate()?;
    Ok(scenario)
}

/// Reads, parses and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_scenario(&text, &path.display().to_string())
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation(msg.into())
}

fn positive(what: &str, v: f64) -> Result<(), ScenarioError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{what} must be positive and finite, got {v}")))
    }
}

impl Scenario {
    /// TOML text that [`parse_scenario`] reads back to an equal scenario.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario types serialize to TOML")
    }

    pub fn coil(&self, name: &str) -> Option<&CoilConfig> {
        self.coils.iter().find(|c| c.name == name)
    }

    pub fn reader(&self, name: &str) -> Option<&ReaderConfig> {
        self.readers.iter().find(|r| r.name == name)
    }

    pub fn tag(&self, name: &str) -> Option<&TagConfig> {
        self.tags.iter().find(|t| t.name == name)
    }

    /// Fills in every missing tag uid from `rng`, skipping uids already taken.
    pub fn resolve_uids(&mut self, rng: &mut impl Rng) {
        let mut taken: BTreeSet<u64> = self.tags.iter().filter_map(|t| t.uid.map(|u| u.0)).collect();
        for t in self.tags.iter_mut().filter(|t| t.uid.is_none()) {
            let uid = loop {
                let u: u64 = rng.random();
                if taken.insert(u) {
                    break u;
                }
            };
            t.uid = Some(Uid(uid));
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.name.trim().is_empty() {
            return Err(invalid("scenario name is empty"));
        }
        if self.name.contains(['\n', '\t']) {
            return Err(invalid("scenario name must be a single line"));
        }
        positive("frequency_hz", self.frequency_hz)?;
        positive("protocol.data_rate_bps", self.protocol.data_rate_bps)?;
        if !(self.protocol.frame_overhead_s.is_finite() && self.protocol.frame_overhead_s >= 0.0) {
            return Err(invalid("protocol.frame_overhead_s must be non-negative"));
        }
        positive("protocol.detection_threshold", self.protocol.detection_threshold)?;

        let mut names = BTreeSet::new();
        let all_names = self
            .coils
            .iter()
            .map(|c| &c.name)
            .chain(self.readers.iter().map(|r| &r.name))
            .chain(self.tags.iter().map(|t| &t.name));
        for n in all_names {
            if n.is_empty() || n.contains(|c: char| c.is_whitespace() || c == ',' || c == '/') {
                return Err(invalid(format!("name {n:?} must be non-empty without whitespace, commas or slashes")));
            }
            if !names.insert(n.as_str()) {
                return Err(invalid(format!("name {n:?} is defined more than once")));
            }
        }

        for c in &self.coils {
            let ctx = |e: crate::geometry::GeometryError| invalid(format!("coil {}: {e}", c.name));
            match &c.shape {
                Shape::Meander(s) => s.validate().map_err(ctx)?,
                Shape::Spiral(s) => s.validate().map_err(ctx)?,
                Shape::AngledRing(s) => s.validate().map_err(ctx)?,
            }
            c.conductor().validate().map_err(ctx)?;
            if !c.center_m.is_finite() {
                return Err(invalid(format!("coil {}: center_m must be finite", c.name)));
            }
            if let Some(b) = &c.bend {
                positive(&format!("coil {} bend.radius_m", c.name), b.radius_m)?;
                if c.shape.footprint().is_none() {
                    return Err(invalid(format!("coil {}: only surface coils can be bent", c.name)));
                }
            }
            if let Some(q) = c.q_factor {
                positive(&format!("coil {} q_factor", c.name), q)?;
            }
        }

        let surface = |what: &str, name: &str| -> Result<&CoilConfig, ScenarioError> {
            let c = self
                .coil(name)
                .ok_or_else(|| invalid(format!("{what} refers to unknown coil {name:?}")))?;
            if c.shape.footprint().is_none() {
                return Err(invalid(format!("{what}: coil {name:?} is not a surface coil")));
            }
            Ok(c)
        };

        for r in &self.readers {
            let what = format!("reader {}", r.name);
            self.coil(&r.coil)
                .ok_or_else(|| invalid(format!("{what} refers to unknown coil {:?}", r.coil)))?;
            positive(&format!("{what} supply_power_w"), r.supply_power_w)?;
            if !(r.drive_power_w.is_finite() && r.drive_power_w > 0.0 && r.drive_power_w <= r.supply_power_w) {
                return Err(invalid(format!("{what}: drive_power_w must be in (0, supply_power_w]")));
            }
            if !(r.sleep_power_w.is_finite() && r.sleep_power_w >= 0.0 && r.sleep_power_w <= r.supply_power_w) {
                return Err(invalid(format!("{what}: sleep_power_w must be in [0, supply_power_w]")));
            }
            if let Polling::Continuous { period_s, duration_s } = r.polling {
                positive(&format!("{what} polling.period_s"), period_s)?;
                positive(&format!("{what} polling.duration_s"), duration_s)?;
            }
        }

        let mut uids = BTreeSet::new();
        for t in &self.tags {
            let what = format!("tag {}", t.name);
            self.coil(&t.coil)
                .ok_or_else(|| invalid(format!("{what} refers to unknown coil {:?}", t.coil)))?;
            let s = surface(&what, &t.surface)?;
            if t.coil == t.surface {
                return Err(invalid(format!("{what}: tag coil and surface must differ")));
            }
            positive(&format!("{what} offset_m"), t.offset_m)?;
            let (w, h) = s.shape.footprint().expect("surface checked");
            let [x, y] = t.position_m;
            if !(x.is_finite() && y.is_finite() && x.abs() <= w / 2.0 && y.abs() <= h / 2.0) {
                return Err(invalid(format!("{what}: position_m {:?} lies outside surface {}", t.position_m, s.name)));
            }
            if t.payload_bytes == 0 {
                return Err(invalid(format!("{what}: payload_bytes must be at least 1")));
            }
            positive(&format!("{what} q_factor"), t.q_factor)?;
            positive(&format!("{what} activation_threshold_w"), t.activation_threshold_w)?;
            for r in [t.matched_load_ohm, t.modulating_load_ohm].into_iter().flatten() {
                positive(&format!("{what} load"), r)?;
            }
            if let Some(uid) = t.uid {
                if !uids.insert(uid) {
                    return Err(invalid(format!("duplicate tag uid {uid} ({})", t.name)));
                }
            }
        }

        if let Some(p) = &self.picoring {
            for (what, name) in [("picoring.ring_coil", &p.ring_coil), ("picoring.wristband_coil", &p.wristband_coil)] {
                self.coil(name)
                    .ok_or_else(|| invalid(format!("{what} refers to unknown coil {name:?}")))?;
            }
            if p.ring_coil == p.wristband_coil {
                return Err(invalid("picoring ring and wristband coils must differ"));
            }
            for (what, w) in [("ring", &p.ring), ("wristband", &p.wristband)] {
                positive(&format!("picoring.{what}.sleep_power_w"), w.sleep_power_w)?;
                if !(w.active_power_w.is_finite() && w.active_power_w > w.sleep_power_w) {
                    return Err(invalid(format!("picoring.{what}: active power must exceed sleep power")));
                }
                if let Some(c) = w.battery_capacity_j {
                    positive(&format!("picoring.{what}.battery_capacity_j"), c)?;
                }
            }
            positive("picoring.supply_power_w", p.supply_power_w)?;
            if !(p.drive_power_w > 0.0 && p.drive_power_w <= p.supply_power_w) {
                return Err(invalid("picoring.drive_power_w must be in (0, supply_power_w]"));
            }
            positive("picoring.ring_activation_threshold_w", p.ring_activation_threshold_w)?;
            if let Some(d) = p.detection_threshold {
                positive("picoring.detection_threshold", d)?;
            }
            positive("picoring.stream.rate_hz", p.stream.rate_hz)?;
            if !(p.stream.duration_s.is_finite() && p.stream.duration_s >= 0.0) {
                return Err(invalid("picoring.stream.duration_s must be non-negative"));
            }
            for g in &p.gestures {
                if !(g.at_s.is_finite() && g.at_s >= 0.0) {
                    return Err(invalid(format!("picoring gesture time {} s must be non-negative", g.at_s)));
                }
            }
        }

        if let Some(g) = &self.sweep.tag_grid {
            self.reader(&g.reader)
                .ok_or_else(|| invalid(format!("sweep.tag_grid refers to unknown reader {:?}", g.reader)))?;
            self.tag(&g.tag)
                .ok_or_else(|| invalid(format!("sweep.tag_grid refers to unknown tag {:?}", g.tag)))?;
            if g.nx == 0 || g.ny == 0 {
                return Err(invalid("sweep.tag_grid needs at least one point per axis"));
            }
        }
        if let Some(b) = &self.sweep.bend {
            let r = self
                .reader(&b.reader)
                .ok_or_else(|| invalid(format!("sweep.bend refers to unknown reader {:?}", b.reader)))?;
            surface("sweep.bend reader", &r.coil)?;
            for t in &b.tags {
                let tag = self
                    .tag(t)
                    .ok_or_else(|| invalid(format!("sweep.bend refers to unknown tag {t:?}")))?;
                if tag.surface != r.coil {
                    return Err(invalid(format!("sweep.bend tag {t} is not on coil {}", r.coil)));
                }
            }
            if b.radii_m.is_empty() {
                return Err(invalid("sweep.bend.radii_m is empty"));
            }
            for &radius in &b.radii_m {
                if !(radius > 0.0) {
                    return Err(invalid(format!("sweep.bend radius {radius} must be positive or inf")));
                }
            }
        }
        if let Some(c) = &self.compare {
            let m = surface("compare.meander", &c.meander)?;
            let s = surface("compare.spiral", &c.spiral)?;
            if m.bend.is_some() || s.bend.is_some() {
                return Err(invalid("compare coils must be flat"));
            }
            let (mf, sf) = (m.shape.footprint().expect("surface"), s.shape.footprint().expect("surface"));
            if (mf.0 - sf.0).abs() > 1e-9 || (mf.1 - sf.1).abs() > 1e-9 {
                return Err(invalid(format!(
                    "compare footprints differ: {} is {} x {} m, {} is {} x {} m",
                    m.name, mf.0, mf.1, s.name, sf.0, sf.1
                )));
            }
            if c.heights_m.len() < 4 || c.heights_m.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
                return Err(invalid("compare.heights_m needs at least 4 positive heights"));
            }
            if let Some(t) = &c.tag {
                self.tag(t)
                    .ok_or_else(|| invalid(format!("compare.tag refers to unknown tag {t:?}")))?;
            }
            if c.grid_n == 0 {
                return Err(invalid("compare.grid_n must be positive"));
            }
        }
        for f in &self.output.field_maps {
            self.coil(&f.coil)
                .ok_or_else(|| invalid(format!("output.field_maps refers to unknown coil {:?}", f.coil)))?;
            if f.grid.contains(&0) {
                return Err(invalid("output.field_maps grid counts must be positive"));
            }
            if !(f.z_min_m.is_finite() && f.z_max_m.is_finite() && f.z_min_m <= f.z_max_m) {
                return Err(invalid("output.field_maps needs z_min_m <= z_max_m"));
            }
        }
        Ok(())
    }
}
