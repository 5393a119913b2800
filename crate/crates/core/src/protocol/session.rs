use serde::{Deserialize, Serialize};

use super::{EventKind, EventLog, EventQueue, LinkTiming, ProtocolError, SimTime};
use crate::circuit::LinkBudget;

/// Ring active draw, 1.8 V × 1.12 mA.
pub const RING_ACTIVE_POWER_W: f64 = 2.02e-3;
/// Ring sleep draw, 1.8 V × 206 µA.
pub const RING_SLEEP_POWER_W: f64 = 371e-6;
/// Wristband active draw, 5.0 V × 141 mA.
pub const WRISTBAND_ACTIVE_POWER_W: f64 = 0.705;
/// Wristband sleep draw, 5.0 V × 16.7 mA.
pub const WRISTBAND_SLEEP_POWER_W: f64 = 83.5e-3;

/// Battery-powered endpoint with two power modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WearableDevice {
    pub name: String,
    pub active_power_w: f64,
    pub sleep_power_w: f64,
    pub battery_capacity_j: Option<f64>,
    /// Requires the link to deliver its activation power as well.
    pub harvesting: bool,
}

impl WearableDevice {
    pub fn ring(name: impl Into<String>) -> Self {
        WearableDevice {
            name: name.into(),
            active_power_w: RING_ACTIVE_POWER_W,
            sleep_power_w: RING_SLEEP_POWER_W,
            battery_capacity_j: Some(crate::energy::DEFAULT_RING_BATTERY_J),
            harvesting: false,
        }
    }

    pub fn wristband(name: impl Into<String>) -> Self {
        WearableDevice {
            name: name.into(),
            active_power_w: WRISTBAND_ACTIVE_POWER_W,
            sleep_power_w: WRISTBAND_SLEEP_POWER_W,
            battery_capacity_j: None,
            harvesting: false,
        }
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        let bad = |reason: String| ProtocolError::InvalidDevice {
            name: self.name.clone(),
            reason,
        };
        if !(self.sleep_power_w.is_finite() && self.sleep_power_w > 0.0) {
            return Err(bad(format!("sleep power {} W must be positive", self.sleep_power_w)));
        }
        if !(self.active_power_w.is_finite() && self.active_power_w > self.sleep_power_w) {
            return Err(bad(format!(
                "active power {} W must exceed sleep power {} W",
                self.active_power_w, self.sleep_power_w
            )));
        }
        if let Some(c) = self.battery_capacity_j {
            if !(c.is_finite() && c > 0.0) {
                return Err(bad(format!("battery capacity {c} J must be positive")));
            }
        }
        Ok(())
    }
}

/// Periodic wake/sleep pattern of one device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSchedule {
    pub device: String,
    pub active: SimTime,
    pub period: SimTime,
    pub active_power_w: f64,
    pub sleep_power_w: f64,
}

impl ModeSchedule {
    pub fn duty(&self) -> f64 {
        self.active.as_nanos() as f64 / self.period.as_nanos() as f64
    }

    /// `(active·P_active + (period − active)·P_sleep) / period`.
    pub fn average_power(&self) -> f64 {
        let a = self.active.as_secs_f64();
        let p = self.period.as_secs_f64();
        (a * self.active_power_w + (p - a) * self.sleep_power_w) / p
    }

    /// Emits the wake/sleep events of every period starting before `horizon`.
    pub fn write_log(&self, start: SimTime, horizon: SimTime, log: &mut EventLog) {
        let mut t = start;
        while t < horizon {
            log.record(t, &self.device, EventKind::Wake, "");
            log.record((t + self.active).min(horizon), &self.device, EventKind::Sleep, "");
            t += self.period;
        }
    }
}

/// Wake for `active_window_s` out of every `period_s`.
pub fn duty_cycle(device: &WearableDevice, active_window_s: f64, period_s: f64) -> Result<ModeSchedule, ProtocolError> {
    device.validate()?;
    let bad = || ProtocolError::InvalidDutyCycle {
        active_s: active_window_s,
        period_s,
    };
    let active = SimTime::from_secs_f64(active_window_s).map_err(|_| bad())?;
    let period = SimTime::from_secs_f64(period_s).map_err(|_| bad())?;
    if active == SimTime::ZERO || active > period {
        return Err(bad());
    }
    Ok(ModeSchedule {
        device: device.name.clone(),
        active,
        period,
        active_power_w: device.active_power_w,
        sleep_power_w: device.sleep_power_w,
    })
}

/// Payloads of one frame: down slots (wristband → ring) go first, then up
/// slots (ring → wristband).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Frame {
    pub down: Vec<u32>,
    pub up: Vec<u32>,
}

/// A user gesture on the wristband; its command rides the next frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gesture {
    pub at: SimTime,
    pub command_bytes: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSchedule {
    pub frame_period: SimTime,
    pub frames: Vec<Frame>,
    pub gestures: Vec<Gesture>,
    /// Sleep both devices between frames with traffic.
    pub sleep_between_frames: bool,
}

impl SessionSchedule {
    pub fn empty() -> Self {
        SessionSchedule {
            frame_period: SimTime::from_millis(10),
            frames: Vec::new(),
            gestures: Vec::new(),
            sleep_between_frames: true,
        }
    }

    /// One `record_bytes` up slot per frame at `rate_hz` for `duration_s`.
    pub fn motion_stream(rate_hz: f64, record_bytes: u32, duration_s: f64) -> Result<Self, ProtocolError> {
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(ProtocolError::InvalidTiming(format!("stream rate {rate_hz} Hz")));
        }
        let frame_period = SimTime::from_secs_f64(1.0 / rate_hz)?;
        let n = (duration_s * rate_hz).round();
        if !(n.is_finite() && n >= 0.0) {
            return Err(ProtocolError::InvalidTime(duration_s));
        }
        Ok(SessionSchedule {
            frame_period,
            frames: vec![
                Frame {
                    down: Vec::new(),
                    up: vec![record_bytes],
                };
                n as usize
            ],
            gestures: Vec::new(),
            sleep_between_frames: true,
        })
    }

    /// A single frame moving `bytes` from ring to wristband.
    pub fn bulk_upload(bytes: u32, frame_period: SimTime) -> Self {
        SessionSchedule {
            frame_period,
            frames: vec![Frame {
                down: Vec::new(),
                up: vec![bytes],
            }],
            gestures: Vec::new(),
            sleep_between_frames: true,
        }
    }

    pub fn with_gesture(mut self, at: SimTime, command_bytes: u32) -> Self {
        self.gestures.push(Gesture { at, command_bytes });
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SessionOutcome {
    pub aborted: bool,
    pub frames: usize,
    pub bytes_up: u64,
    pub bytes_down: u64,
    /// Total time on air.
    pub airtime: SimTime,
    /// End of the last slot, or of the session when idle.
    pub end: SimTime,
    /// Gesture time to the start of the frame carrying its command.
    pub gesture_latencies: Vec<SimTime>,
}

impl SessionOutcome {
    pub fn airtime_fraction(&self, frame_period: SimTime) -> f64 {
        if self.frames == 0 {
            return 0.0;
        }
        self.airtime.as_secs_f64() / (frame_period.as_secs_f64() * self.frames as f64)
    }
}

enum SessionEvent {
    Frame(usize),
    Gesture(Gesture),
}

/// Runs a time-division session between `ring` and `wristband` from `start`.
///
/// An unreadable link aborts the session after a `link_down` event; the log
/// still records both devices waking and going back to sleep.
pub fn picoring_session(
    ring: &WearableDevice,
    wristband: &WearableDevice,
    link: &LinkBudget,
    schedule: &SessionSchedule,
    timing: &LinkTiming,
    start: SimTime,
    log: &mut EventLog,
) -> Result<SessionOutcome, ProtocolError> {
    ring.validate()?;
    wristband.validate()?;
    timing.validate()?;
    let period = schedule.frame_period;
    if period == SimTime::ZERO {
        return Err(ProtocolError::InvalidTiming("frame period must be positive".into()));
    }
    let devices = [ring.name.as_str(), wristband.name.as_str()];
    let set_mode = |log: &mut EventLog, t: SimTime, kind: EventKind| {
        for d in devices {
            log.record(t, d, kind, "");
        }
    };
    let mut out = SessionOutcome::default();
    let readable = link.detectable() && (!ring.harvesting || link.powered());
    if !readable {
        set_mode(log, start, EventKind::Wake);
        log.record(
            start,
            &wristband.name,
            EventKind::LinkDown,
            format!(
                "depth={:e} threshold={:e} delivered_w={:e}",
                link.modulation_depth, link.detection_threshold, link.delivered_power_w
            ),
        );
        set_mode(log, start, EventKind::Sleep);
        out.aborted = true;
        out.end = start;
        return Ok(out);
    }

    let last_gesture_frame = schedule
        .gestures
        .iter()
        .map(|g| (g.at.as_nanos() / period.as_nanos()) as usize + 1)
        .max();
    let n_frames = schedule.frames.len().max(last_gesture_frame.map_or(0, |f| f + 1));
    let mut queue = EventQueue::new();
    for i in 0..n_frames {
        queue.schedule(start + SimTime(period.as_nanos() * i as u64), SessionEvent::Frame(i));
    }
    for g in &schedule.gestures {
        queue.schedule(start + g.at, SessionEvent::Gesture(*g));
    }

    let has_traffic = schedule.frames.iter().any(|f| !f.down.is_empty() || !f.up.is_empty())
        || !schedule.gestures.is_empty();
    let duty = schedule.sleep_between_frames && has_traffic;
    if !duty {
        set_mode(log, start, EventKind::Wake);
    }
    let mut pending: Vec<Gesture> = Vec::new();
    while let Some((t0, ev)) = queue.pop() {
        let i = match ev {
            SessionEvent::Gesture(g) => {
                pending.push(g);
                continue;
            }
            SessionEvent::Frame(i) => i,
        };
        let frame = schedule.frames.get(i);
        let mut down: Vec<u32> = frame.map(|f| f.down.clone()).unwrap_or_default();
        down.extend(pending.iter().map(|g| g.command_bytes));
        let up: &[u32] = frame.map_or(&[], |f| &f.up);
        out.gesture_latencies.extend(pending.drain(..).map(|g| t0 - (start + g.at)));
        let airtime = down
            .iter()
            .chain(up)
            .fold(SimTime::ZERO, |acc, &b| acc + timing.exchange(8 * u64::from(b)));
        if airtime > period {
            return Err(ProtocolError::Unschedulable {
                frame: i,
                airtime,
                period,
            });
        }
        out.frames = i + 1;
        if down.is_empty() && up.is_empty() {
            continue;
        }
        if duty {
            set_mode(log, t0, EventKind::Wake);
        }
        let mut t = t0;
        for &b in &down {
            log.record(t, &wristband.name, EventKind::Write, format!("frame={i} to={} bytes={b}", ring.name));
            t += timing.exchange(8 * u64::from(b));
            out.bytes_down += u64::from(b);
        }
        for &b in up {
            log.record(t, &wristband.name, EventKind::Read, format!("frame={i} from={} bytes={b}", ring.name));
            t += timing.exchange(8 * u64::from(b));
            out.bytes_up += u64::from(b);
        }
        out.airtime += airtime;
        out.end = t;
        if duty {
            set_mode(log, t, EventKind::Sleep);
        }
    }
    if !duty {
        let end = start + SimTime(period.as_nanos() * n_frames as u64);
        out.end = out.end.max(end);
        set_mode(log, out.end, EventKind::Sleep);
    }
    Ok(out)
}
