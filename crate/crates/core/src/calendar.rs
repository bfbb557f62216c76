//! The shared weekly calendar: a circular grid of 40 slots (5 days of 8
//! slots) with a cursor on the current day.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DAYS: usize = 5;
pub const SLOTS_PER_DAY: usize = 8;
pub const SLOT_COUNT: usize = DAYS * SLOTS_PER_DAY;

/// Meeting lengths the workload can request, in slots.
pub const DURATIONS: [usize; 4] = [1, 2, 4, 6];

pub const DAY_NAMES: [&str; DAYS] = ["Monday", "Tuesday", "Wednesday", "Thursday", "Friday"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CalendarError {
    #[error("meeting duration {0} is not one of 1, 2, 4 or 6 slots")]
    InvalidDuration(usize),
    #[error("slot {0} is outside the 40-slot week")]
    SlotOutOfRange(usize),
    #[error("a {duration}-slot meeting starting at slot {start} crosses a day boundary")]
    DayBandViolation { start: usize, duration: usize },
    #[error("slot {slot} is already booked by meeting {holder}")]
    DoubleBooking { slot: usize, holder: MeetingId },
    #[error("meeting has no participants")]
    NoParticipants,
    #[error("participant {0} is listed twice")]
    DuplicateParticipant(UserId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MeetingId(pub u64);

impl fmt::Display for MeetingId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UserId(pub u32);

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Seniority of a meeting's initiator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Designation {
    Junior,
    Mid,
    Senior,
}

impl Designation {
    pub const ALL: [Designation; 3] = [Designation::Junior, Designation::Mid, Designation::Senior];

    pub fn index(self) -> usize {
        match self {
            Designation::Junior => 0,
            Designation::Mid => 1,
            Designation::Senior => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Designation::Junior => "junior",
            Designation::Mid => "mid",
            Designation::Senior => "senior",
        }
    }

    pub fn parse(s: &str) -> Option<Designation> {
        match s.to_ascii_lowercase().as_str() {
            "junior" => Some(Designation::Junior),
            "mid" => Some(Designation::Mid),
            "senior" => Some(Designation::Senior),
            _ => None,
        }
    }
}

/// A scheduling request.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Meeting {
    pub id: MeetingId,
    pub duration: usize,
    pub participants: Vec<UserId>,
    pub initiator: UserId,
    pub designation: Designation,
    pub arrival_timestep: u64,
}

impl Meeting {
    pub fn new(
        id: MeetingId,
        duration: usize,
        participants: Vec<UserId>,
        initiator: UserId,
        designation: Designation,
        arrival_timestep: u64,
    ) -> Result<Meeting, CalendarError> {
        if !DURATIONS.contains(&duration) {
            return Err(CalendarError::InvalidDuration(duration));
        }
        if participants.is_empty() {
            return Err(CalendarError::NoParticipants);
        }
        for (i, p) in participants.iter().enumerate() {
            if participants[..i].contains(p) {
                return Err(CalendarError::DuplicateParticipant(*p));
            }
        }
        Ok(Meeting {
            id,
            duration,
            participants,
            initiator,
            designation,
            arrival_timestep,
        })
    }

    /// Index of `duration` within [`DURATIONS`].
    pub fn duration_class(&self) -> usize {
        duration_class(self.duration)
    }
}

pub fn duration_class(duration: usize) -> usize {
    DURATIONS
        .iter()
        .position(|&d| d == duration)
        .expect("meeting durations are validated on construction")
}

/// Set of slots, one bit per slot. Serialized as a list of slot indices.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct SlotMask(u64);

impl TryFrom<Vec<usize>> for SlotMask {
    type Error = CalendarError;

    fn try_from(slots: Vec<usize>) -> Result<Self, Self::Error> {
        SlotMask::from_slots(slots)
    }
}

impl From<SlotMask> for Vec<usize> {
    fn from(mask: SlotMask) -> Self {
        mask.iter().collect()
    }
}

impl SlotMask {
    const FULL: u64 = (1u64 << SLOT_COUNT) - 1;

    pub const fn empty() -> SlotMask {
        SlotMask(0)
    }

    pub const fn full() -> SlotMask {
        SlotMask(Self::FULL)
    }

    pub fn from_bits(bits: u64) -> SlotMask {
        SlotMask(bits & Self::FULL)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn day(day: usize) -> SlotMask {
        assert!(day < DAYS);
        SlotMask(0xffu64 << (day * SLOTS_PER_DAY))
    }

    pub fn from_slots<I: IntoIterator<Item = usize>>(slots: I) -> Result<SlotMask, CalendarError> {
        let mut mask = SlotMask::empty();
        for s in slots {
            if s >= SLOT_COUNT {
                return Err(CalendarError::SlotOutOfRange(s));
            }
            mask.insert(s);
        }
        Ok(mask)
    }

    pub fn contains(self, slot: usize) -> bool {
        slot < SLOT_COUNT && self.0 & (1u64 << slot) != 0
    }

    pub fn insert(&mut self, slot: usize) {
        assert!(slot < SLOT_COUNT, "slot {slot} out of range");
        self.0 |= 1u64 << slot;
    }

    pub fn union(self, other: SlotMask) -> SlotMask {
        SlotMask(self.0 | other.0)
    }

    pub fn intersect(self, other: SlotMask) -> SlotMask {
        SlotMask(self.0 & other.0)
    }

    pub fn difference(self, other: SlotMask) -> SlotMask {
        SlotMask(self.0 & !other.0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn count(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..SLOT_COUNT).filter(move |&s| self.contains(s))
    }

    /// Does `[start, start + len)` lie entirely inside the mask?
    pub fn covers_run(self, start: usize, len: usize) -> bool {
        start + len <= SLOT_COUNT && (start..start + len).all(|s| self.contains(s))
    }

    /// 40-character `0`/`1` string, slot 0 first.
    pub fn to_bitstring(self) -> String {
        (0..SLOT_COUNT)
            .map(|s| if self.contains(s) { '1' } else { '0' })
            .collect()
    }

    pub fn from_bitstring(s: &str) -> Option<SlotMask> {
        if s.len() != SLOT_COUNT {
            return None;
        }
        let mut mask = SlotMask::empty();
        for (i, c) in s.chars().enumerate() {
            match c {
                '1' => mask.insert(i),
                '0' => {}
                _ => return None,
            }
        }
        Some(mask)
    }
}

pub fn day_of(slot: usize) -> usize {
    slot / SLOTS_PER_DAY
}

/// Human label such as `Wednesday 13:00` (slots are one-hour blocks from 09:00).
pub fn slot_label(slot: usize) -> String {
    format!(
        "{} {:02}:00",
        DAY_NAMES[day_of(slot)],
        9 + slot % SLOTS_PER_DAY
    )
}

fn within_one_day(start: usize, duration: usize) -> bool {
    duration > 0 && day_of(start) == day_of(start + duration - 1)
}

/// One organization-wide calendar.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlotGrid {
    booked_by: [Option<MeetingId>; SLOT_COUNT],
    day_cursor: usize,
}

impl Default for SlotGrid {
    fn default() -> Self {
        SlotGrid::new()
    }
}

impl SlotGrid {
    pub fn new() -> SlotGrid {
        SlotGrid {
            booked_by: [None; SLOT_COUNT],
            day_cursor: 0,
        }
    }

    pub fn with_cursor(day_cursor: usize) -> SlotGrid {
        assert!(day_cursor < DAYS);
        SlotGrid {
            booked_by: [None; SLOT_COUNT],
            day_cursor,
        }
    }

    pub fn day_cursor(&self) -> usize {
        self.day_cursor
    }

    pub fn is_free(&self, slot: usize) -> bool {
        self.booked_by[slot].is_none()
    }

    pub fn holder(&self, slot: usize) -> Option<MeetingId> {
        self.booked_by[slot]
    }

    pub fn occupancy(&self) -> [bool; SLOT_COUNT] {
        let mut occ = [false; SLOT_COUNT];
        for (o, b) in occ.iter_mut().zip(self.booked_by.iter()) {
            *o = b.is_some();
        }
        occ
    }

    pub fn free_mask(&self) -> SlotMask {
        let mut mask = SlotMask::empty();
        for s in 0..SLOT_COUNT {
            if self.is_free(s) {
                mask.insert(s);
            }
        }
        mask
    }

    pub fn free_slot_count(&self) -> usize {
        self.booked_by.iter().filter(|b| b.is_none()).count()
    }

    /// Earliest start of a free run of `duration` slots inside one day,
    /// scanning days from the cursor onwards (wrapping) and slots left to
    /// right within a day.
    pub fn find_first_fit(&self, duration: usize) -> Option<usize> {
        self.find_first_fit_within(duration, SlotMask::full())
    }

    /// First-fit restricted to runs lying entirely inside `allowed`.
    pub fn find_first_fit_within(&self, duration: usize, allowed: SlotMask) -> Option<usize> {
        if duration == 0 || duration > SLOTS_PER_DAY {
            return None;
        }
        let usable = self.free_mask().intersect(allowed);
        (0..DAYS)
            .map(|k| (self.day_cursor + k) % DAYS)
            .flat_map(|day| {
                let base = day * SLOTS_PER_DAY;
                base..=base + SLOTS_PER_DAY - duration
            })
            .find(|&start| usable.covers_run(start, duration))
    }

    /// Would `occupy(start, _, duration)` succeed?
    pub fn check_placement(&self, start: usize, duration: usize) -> Result<(), CalendarError> {
        if !DURATIONS.contains(&duration) {
            return Err(CalendarError::InvalidDuration(duration));
        }
        if start >= SLOT_COUNT {
            return Err(CalendarError::SlotOutOfRange(start));
        }
        if !within_one_day(start, duration) {
            return Err(CalendarError::DayBandViolation { start, duration });
        }
        for slot in start..start + duration {
            if let Some(holder) = self.booked_by[slot] {
                return Err(CalendarError::DoubleBooking { slot, holder });
            }
        }
        Ok(())
    }

    pub fn occupy(&mut self, start: usize, meeting: &Meeting) -> Result<(), CalendarError> {
        self.occupy_run(start, meeting.id, meeting.duration)
    }

    pub fn occupy_run(
        &mut self,
        start: usize,
        id: MeetingId,
        duration: usize,
    ) -> Result<(), CalendarError> {
        self.check_placement(start, duration)?;
        for slot in &mut self.booked_by[start..start + duration] {
            *slot = Some(id);
        }
        Ok(())
    }

    /// Clears the current day, advances the cursor and returns the ids of
    /// the meetings that elapsed, in slot order.
    pub fn rotate_day(&mut self) -> Vec<MeetingId> {
        let base = self.day_cursor * SLOTS_PER_DAY;
        let mut freed: Vec<MeetingId> = Vec::new();
        for slot in &mut self.booked_by[base..base + SLOTS_PER_DAY] {
            if let Some(id) = slot.take() {
                if freed.last() != Some(&id) {
                    freed.push(id);
                }
            }
        }
        self.day_cursor = (self.day_cursor + 1) % DAYS;
        freed
    }

    /// Ids of booked meetings together with their start slot and length.
    pub fn bookings(&self) -> Vec<(MeetingId, usize, usize)> {
        let mut out: Vec<(MeetingId, usize, usize)> = Vec::new();
        for (slot, b) in self.booked_by.iter().enumerate() {
            if let Some(id) = b {
                match out.last_mut() {
                    Some((last, start, len)) if last == id && *start + *len == slot => *len += 1,
                    _ => out.push((*id, slot, 1)),
                }
            }
        }
        out
    }
}
