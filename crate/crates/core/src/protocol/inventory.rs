use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{EventKind, EventLog, LinkTiming, ProtocolError, SimTime};
use crate::circuit::LinkBudget;
use crate::geometry::Point3;

/// Inventory request: flags, command, mask length and CRC; the mask value
/// is added in whole bytes.
pub const INVENTORY_REQUEST_BITS: u64 = 40;
/// Slot response: flags, DSFID, 64-bit uid and CRC.
pub const RESPONSE_BITS: u64 = 96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum SlotCount {
    One,
    Sixteen,
}

impl SlotCount {
    /// Uid bits consumed per round.
    pub fn bits(self) -> u32 {
        match self {
            SlotCount::One => 0,
            SlotCount::Sixteen => 4,
        }
    }

    pub fn slots(self) -> u64 {
        1 << self.bits()
    }
}

impl TryFrom<u32> for SlotCount {
    type Error = String;
    fn try_from(n: u32) -> Result<Self, String> {
        match n {
            1 => Ok(SlotCount::One),
            16 => Ok(SlotCount::Sixteen),
            _ => Err(format!("slot count must be 1 or 16, got {n}")),
        }
    }
}

impl From<SlotCount> for u32 {
    fn from(s: SlotCount) -> u32 {
        s.slots() as u32
    }
}

/// The low `len` uid bits that a tag must match to take part in a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mask {
    pub value: u64,
    pub len: u32,
}

impl Mask {
    pub const EMPTY: Mask = Mask { value: 0, len: 0 };

    pub fn matches(self, uid: u64) -> bool {
        match self.len {
            0 => true,
            64.. => uid == self.value,
            n => uid & ((1u64 << n) - 1) == self.value,
        }
    }

    fn extended(self, bits: u64, width: u32) -> Mask {
        Mask {
            value: self.value | (bits << self.len),
            len: self.len + width,
        }
    }

    /// Bytes needed to carry the mask value in a request.
    pub fn bytes(self) -> u64 {
        u64::from(self.len).div_ceil(8)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReaderDevice {
    pub name: String,
    pub slot_count: SlotCount,
    pub timing: LinkTiming,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagDevice {
    pub name: String,
    pub uid: u64,
    /// Tag center in world coordinates.
    pub position: Point3,
    pub payload_bytes: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagState {
    /// Below the power or detection threshold; never transmits.
    Unpowered,
    /// Powered and not yet singulated.
    Idle,
    /// Singulated and silenced for the rest of the inventory.
    Quiet,
    /// Addressed for a data exchange.
    Selected,
}

/// Uids of the tags this reader both powers and can hear.
pub fn powered_tags(
    tags: &[TagDevice],
    links: &BTreeMap<u64, LinkBudget>,
) -> Result<BTreeSet<u64>, ProtocolError> {
    let mut out = BTreeSet::new();
    for t in tags {
        let link = links
            .get(&t.uid)
            .ok_or_else(|| ProtocolError::MissingLink(t.name.clone()))?;
        if link.readable() {
            out.insert(t.uid);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RoundOutcome {
    pub singulated: Vec<u64>,
    /// Masks to descend into, in slot order.
    pub collided: Vec<Mask>,
    pub responders: usize,
}

/// One inventory command and its slots. `candidates` are the tags still
/// answering; each matching tag replies in slot `(uid >> mask.len) mod slots`.
/// Advances `clock` past the round.
pub fn inventory_round(
    reader: &ReaderDevice,
    candidates: &[&TagDevice],
    mask: Mask,
    round: usize,
    clock: &mut SimTime,
    log: &mut EventLog,
) -> RoundOutcome {
    let timing = &reader.timing;
    let width = reader.slot_count.bits();
    let slots = reader.slot_count.slots();
    *clock += timing.exchange(INVENTORY_REQUEST_BITS + 8 * mask.bytes());
    let mut by_slot: Vec<Vec<&TagDevice>> = vec![Vec::new(); slots as usize];
    for &tag in candidates.iter().filter(|t| mask.matches(t.uid)) {
        let slot = if width == 0 { 0 } else { (tag.uid >> mask.len) & (slots - 1) };
        by_slot[slot as usize].push(tag);
    }
    let mut out = RoundOutcome::default();
    for (slot, responders) in by_slot.iter().enumerate() {
        log.record(
            *clock,
            &reader.name,
            EventKind::SlotOpen,
            format!("round={round} slot={slot} mask={}:{:x}", mask.len, mask.value),
        );
        if responders.is_empty() {
            *clock += timing.overhead();
            continue;
        }
        out.responders += responders.len();
        for t in responders {
            log.record(*clock, &t.name, EventKind::Response, format!("uid={:016x}", t.uid));
        }
        *clock += timing.exchange(RESPONSE_BITS);
        if let [t] = responders.as_slice() {
            log.record(*clock, &reader.name, EventKind::Singulated, format!("uid={:016x}", t.uid));
            out.singulated.push(t.uid);
        } else {
            log.record(
                *clock,
                &reader.name,
                EventKind::Collision,
                format!("round={round} slot={slot} tags={}", responders.len()),
            );
            if width == 0 {
                out.collided.push(mask.extended(0, 1));
                out.collided.push(mask.extended(1, 1));
            } else {
                out.collided.push(mask.extended(slot as u64, width));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct InventoryResult {
    /// In singulation order.
    pub singulated: Vec<u64>,
    pub rounds: usize,
    pub start: SimTime,
    pub end: SimTime,
    pub states: BTreeMap<u64, TagState>,
}

impl InventoryResult {
    pub fn is_singulated(&self, uid: u64) -> bool {
        self.states.get(&uid) == Some(&TagState::Quiet)
    }
}

/// Repeats inventory rounds, descending depth-first into collided masks,
/// until every readable tag is singulated. Tags failing the link check
/// never appear in the log.
pub fn run_inventory(
    reader: &ReaderDevice,
    tags: &[TagDevice],
    links: &BTreeMap<u64, LinkBudget>,
    start: SimTime,
    log: &mut EventLog,
) -> Result<InventoryResult, ProtocolError> {
    reader.timing.validate()?;
    let mut seen = BTreeSet::new();
    for t in tags {
        if !seen.insert(t.uid) {
            return Err(ProtocolError::DuplicateUid(t.uid));
        }
    }
    let powered = powered_tags(tags, links)?;
    let mut states: BTreeMap<u64, TagState> = tags
        .iter()
        .map(|t| {
            let s = if powered.contains(&t.uid) { TagState::Idle } else { TagState::Unpowered };
            (t.uid, s)
        })
        .collect();
    let mut remaining: Vec<&TagDevice> = tags.iter().filter(|t| powered.contains(&t.uid)).collect();
    let mut clock = start;
    let mut stack = vec![Mask::EMPTY];
    let mut rounds = 0;
    let mut singulated = Vec::new();
    while let Some(mask) = stack.pop() {
        rounds += 1;
        let outcome = inventory_round(reader, &remaining, mask, rounds, &mut clock, log);
        for uid in &outcome.singulated {
            states.insert(*uid, TagState::Quiet);
        }
        remaining.retain(|t| !outcome.singulated.contains(&t.uid));
        singulated.extend(outcome.singulated);
        stack.extend(outcome.collided.into_iter().rev());
    }
    Ok(InventoryResult {
        singulated,
        rounds,
        start,
        end: clock,
        states,
    })
}

/// Reads `n_bytes` from a singulated tag starting at `clock`; returns the
/// exchange duration. A read of an unsingulated tag logs an error event.
pub fn read_tag(
    reader: &ReaderDevice,
    tag: &TagDevice,
    n_bytes: u32,
    inventory: &InventoryResult,
    clock: SimTime,
    log: &mut EventLog,
) -> Result<SimTime, ProtocolError> {
    if !inventory.is_singulated(tag.uid) {
        log.record(
            clock,
            &reader.name,
            EventKind::Error,
            format!("read of unsingulated uid={:016x}", tag.uid),
        );
        return Err(ProtocolError::NotSingulated(tag.uid));
    }
    let duration = reader.timing.exchange(8 * u64::from(n_bytes));
    log.record(
        clock,
        &tag.name,
        EventKind::Read,
        format!("uid={:016x} bytes={n_bytes} duration={duration}", tag.uid),
    );
    Ok(duration)
}
