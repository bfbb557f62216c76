use crate::calendar::{Designation, Meeting, SlotGrid, SLOTS_PER_DAY, SLOT_COUNT};
use crate::env::{backlog_vector, BACKLOG_VECTOR_LEN, WAITING_CAPACITY};

const OCCUPANCY: usize = 0;
const PROPOSAL: usize = OCCUPANCY + SLOT_COUNT;
const CURRENT_DAY: usize = PROPOSAL + SLOT_COUNT;
const DURATIONS: usize = CURRENT_DAY + SLOT_COUNT;
const BACKLOG: usize = DURATIONS + WAITING_CAPACITY;
const DESIGNATION: usize = BACKLOG + BACKLOG_VECTOR_LEN;

/// Length of the policy input:
/// occupancy (40) | proposed slot (40) | current day (40) |
/// waiting durations / 6 (7) | backlog thermometer (5) | designation (3).
pub const STATE_LEN: usize = DESIGNATION + Designation::ALL.len();

const LONGEST_MEETING: f64 = 6.0;

/// Encodes what the agent sees. `waiting` starts with the meeting under
/// decision; `proposed_slot` is `None` for an all-zero proposal row.
pub fn encode_state<'a, I>(
    grid: &SlotGrid,
    waiting: I,
    backlog_len: usize,
    proposed_slot: Option<usize>,
    designation: Designation,
) -> Vec<f64>
where
    I: IntoIterator<Item = &'a Meeting>,
{
    let mut s = vec![0.0; STATE_LEN];
    for (slot, booked) in grid.occupancy().iter().enumerate() {
        if *booked {
            s[OCCUPANCY + slot] = 1.0;
        }
    }
    if let Some(slot) = proposed_slot {
        assert!(slot < SLOT_COUNT, "proposed slot {slot} out of range");
        s[PROPOSAL + slot] = 1.0;
    }
    let day = grid.day_cursor() * SLOTS_PER_DAY;
    s[CURRENT_DAY + day..CURRENT_DAY + day + SLOTS_PER_DAY].fill(1.0);
    for (i, m) in waiting.into_iter().take(WAITING_CAPACITY).enumerate() {
        s[DURATIONS + i] = m.duration as f64 / LONGEST_MEETING;
    }
    s[BACKLOG..DESIGNATION].copy_from_slice(&backlog_vector(backlog_len));
    s[DESIGNATION + designation.index()] = 1.0;
    s
}
