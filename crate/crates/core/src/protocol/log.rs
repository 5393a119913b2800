use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::ops::{Add, AddAssign, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ProtocolError;

/// Simulation clock in integer nanoseconds, so sums of slot durations are
/// exact and logs are byte-reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_nanos(ns: u64) -> Self {
        SimTime(ns)
    }

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us * 1_000)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000_000)
    }

    /// Rounds to the nearest nanosecond. Negative or non-finite input is an error.
    pub fn from_secs_f64(s: f64) -> Result<Self, ProtocolError> {
        if !(s.is_finite() && s >= 0.0 && s < u64::MAX as f64 / 1e9) {
            return Err(ProtocolError::InvalidTime(s));
        }
        Ok(SimTime((s * 1e9).round() as u64))
    }

    pub fn as_nanos(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 * 1e-9
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, o: SimTime) -> SimTime {
        SimTime(self.0 + o.0)
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, o: SimTime) {
        self.0 += o.0;
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, o: SimTime) -> SimTime {
        SimTime(self.0 - o.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:09}", self.0 / 1_000_000_000, self.0 % 1_000_000_000)
    }
}

impl FromStr for SimTime {
    type Err = ProtocolError;

    /// Parses the `seconds.nanoseconds` form written by `Display`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ProtocolError::Parse(format!("bad time {s:?}"));
        let (whole, frac) = s.split_once('.').unwrap_or((s, ""));
        if frac.len() > 9 || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let secs: u64 = whole.parse().map_err(|_| bad())?;
        let nanos: u64 = if frac.is_empty() {
            0
        } else {
            format!("{frac:0<9}").parse().map_err(|_| bad())?
        };
        secs.checked_mul(1_000_000_000)
            .and_then(|n| n.checked_add(nanos))
            .map(SimTime)
            .ok_or_else(bad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    SlotOpen,
    Response,
    Collision,
    Singulated,
    Read,
    Write,
    Wake,
    Sleep,
    LinkDown,
    Error,
}

impl EventKind {
    pub const ALL: [EventKind; 10] = [
        EventKind::SlotOpen,
        EventKind::Response,
        EventKind::Collision,
        EventKind::Singulated,
        EventKind::Read,
        EventKind::Write,
        EventKind::Wake,
        EventKind::Sleep,
        EventKind::LinkDown,
        EventKind::Error,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::SlotOpen => "slot_open",
            EventKind::Response => "response",
            EventKind::Collision => "collision",
            EventKind::Singulated => "singulated",
            EventKind::Read => "read",
            EventKind::Write => "write",
            EventKind::Wake => "wake",
            EventKind::Sleep => "sleep",
            EventKind::LinkDown => "link_down",
            EventKind::Error => "error",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = ProtocolError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| ProtocolError::Parse(format!("unknown event kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub time: SimTime,
    pub device: String,
    pub kind: EventKind,
    pub detail: String,
}

/// Time-ordered trace of one run.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EventLog {
    pub seed: u64,
    pub scenario: String,
    events: Vec<Event>,
}

impl EventLog {
    pub fn new(seed: u64, scenario: impl Into<String>) -> Self {
        EventLog {
            seed,
            scenario: scenario.into(),
            events: Vec::new(),
        }
    }

    /// Appends an event. Times must not go backwards.
    pub fn record(&mut self, time: SimTime, device: &str, kind: EventKind, detail: impl Into<String>) {
        debug_assert!(
            self.events.last().is_none_or(|e| e.time <= time),
            "event at {time} precedes the log tail"
        );
        self.events.push(Event {
            time,
            device: device.to_owned(),
            kind,
            detail: detail.into(),
        });
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Time of the last event, zero if empty.
    pub fn end_time(&self) -> SimTime {
        self.events.last().map_or(SimTime::ZERO, |e| e.time)
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    /// Appends `other`'s events, which must start no earlier than this log ends.
    pub fn append(&mut self, other: &EventLog) -> Result<(), ProtocolError> {
        if let Some(first) = other.events.first() {
            if first.time < self.end_time() {
                return Err(ProtocolError::OutOfOrder {
                    at: first.time,
                    tail: self.end_time(),
                });
            }
        }
        self.events.extend(other.events.iter().cloned());
        Ok(())
    }

    /// `t_seconds<TAB>device<TAB>event<TAB>detail` lines after `# seed=` and
    /// `# scenario=` headers.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("# seed={}\n# scenario={}\n", self.seed, self.scenario);
        for e in &self.events {
            out.push_str(&format!("{}\t{}\t{}\t{}\n", e.time, e.device, e.kind, e.detail));
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<EventLog, ProtocolError> {
        let mut log = EventLog::default();
        for (n, line) in text.lines().enumerate() {
            if let Some(header) = line.strip_prefix('#') {
                let header = header.trim();
                if let Some(seed) = header.strip_prefix("seed=") {
                    log.seed = seed
                        .parse()
                        .map_err(|_| ProtocolError::Parse(format!("line {}: bad seed", n + 1)))?;
                } else if let Some(name) = header.strip_prefix("scenario=") {
                    log.scenario = name.to_owned();
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let mut f = line.splitn(4, '\t');
            let (Some(t), Some(device), Some(kind), detail) = (f.next(), f.next(), f.next(), f.next()) else {
                return Err(ProtocolError::Parse(format!("line {}: expected 4 fields", n + 1)));
            };
            let time: SimTime = t.parse()?;
            if time < log.end_time() {
                return Err(ProtocolError::OutOfOrder {
                    at: time,
                    tail: log.end_time(),
                });
            }
            log.events.push(Event {
                time,
                device: device.to_owned(),
                kind: kind.parse()?,
                detail: detail.unwrap_or("").to_owned(),
            });
        }
        Ok(log)
    }
}

struct Entry<T> {
    time: SimTime,
    seq: u64,
    item: T,
}

impl<T> PartialEq for Entry<T> {
    fn eq(&self, o: &Self) -> bool {
        (self.time, self.seq) == (o.time, o.seq)
    }
}
impl<T> Eq for Entry<T> {}
impl<T> PartialOrd for Entry<T> {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl<T> Ord for Entry<T> {
    fn cmp(&self, o: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap.
        (o.time, o.seq).cmp(&(self.time, self.seq))
    }
}

/// Future-event list. Equal times pop in scheduling order.
pub struct EventQueue<T> {
    heap: BinaryHeap<Entry<T>>,
    next_seq: u64,
}

impl<T> Default for EventQueue<T> {
    fn default() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            next_seq: 0,
        }
    }
}

impl<T> EventQueue<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn schedule(&mut self, time: SimTime, item: T) {
        self.heap.push(Entry {
            time,
            seq: self.next_seq,
            item,
        });
        self.next_seq += 1;
    }

    pub fn pop(&mut self) -> Option<(SimTime, T)> {
        self.heap.pop().map(|e| (e.time, e.item))
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_formats_and_parses() {
        let t = SimTime::from_nanos(12_000_000_345);
        assert_eq!(t.to_string(), "12.000000345");
        assert_eq!("12.000000345".parse::<SimTime>().unwrap(), t);
        assert_eq!("3.5".parse::<SimTime>().unwrap(), SimTime::from_millis(3500));
        assert_eq!("7".parse::<SimTime>().unwrap(), SimTime::from_millis(7000));
        assert!("1.0000000001".parse::<SimTime>().is_err());
        assert!(SimTime::from_secs_f64(-1.0).is_err());
        assert_eq!(SimTime::from_secs_f64(0.3e-3).unwrap(), SimTime::from_micros(300));
    }

    #[test]
    fn tsv_round_trip() {
        let mut log = EventLog::new(42, "demo");
        log.record(SimTime::ZERO, "reader", EventKind::Wake, "");
        log.record(SimTime::from_micros(300), "reader", EventKind::SlotOpen, "round=1 slot=0");
        log.record(SimTime::from_micros(300), "tag-1", EventKind::Response, "uid=00000000000000ff");
        let text = log.to_tsv();
        assert!(text.starts_with("# seed=42\n# scenario=demo\n"));
        assert_eq!(EventLog::from_tsv(&text).unwrap(), log);
    }

    #[test]
    fn append_rejects_overlap() {
        let mut a = EventLog::new(1, "a");
        a.record(SimTime::from_millis(5), "x", EventKind::Wake, "");
        let mut b = EventLog::new(1, "a");
        b.record(SimTime::from_millis(4), "x", EventKind::Sleep, "");
        assert!(a.append(&b).is_err());
    }

    #[test]
    fn queue_orders_by_time_then_insertion() {
        let mut q = EventQueue::new();
        q.schedule(SimTime(5), "b");
        q.schedule(SimTime(1), "a");
        q.schedule(SimTime(5), "c");
        let order: Vec<_> = std::iter::from_fn(|| q.pop().map(|(_, x)| x)).collect();
        assert_eq!(order, ["a", "b", "c"]);
    }
}
