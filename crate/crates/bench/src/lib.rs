//! Fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use meetsched::calendar::{Designation, Meeting, MeetingId, SlotGrid, UserId, DURATIONS, SLOT_COUNT};
use meetsched::env::{Action, UserDirectory};
use meetsched::slotmap::{generate_dataset, LabeledSample, PhraseTable, DEFAULT_FRAMES};
use meetsched::trainer::{encode_state, Experience};

pub fn meeting(id: u64, duration: usize) -> Meeting {
    Meeting::new(MeetingId(id), duration, vec![UserId(1), UserId(2)], UserId(0), Designation::Junior, 0)
        .expect("valid meeting")
}

/// A grid with roughly `fill` of its slots booked by one-slot meetings.
pub fn partly_booked_grid(fill: f64, seed: u64) -> SlotGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut grid = SlotGrid::new();
    for slot in 0..SLOT_COUNT {
        if rng.gen_bool(fill) {
            grid.occupy(slot, &meeting(slot as u64, 1)).expect("free slot");
        }
    }
    grid
}

/// Random but well-formed policy experiences.
pub fn experiences(n: usize, seed: u64) -> Vec<Experience> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let grid = partly_booked_grid(rng.gen_range(0.1..0.8), rng.gen());
            let waiting: Vec<Meeting> = (0..rng.gen_range(1..=7))
                .map(|k| meeting(k, DURATIONS[rng.gen_range(0..DURATIONS.len())]))
                .collect();
            let proposal = grid.find_first_fit(waiting[0].duration);
            let state = encode_state(&grid, &waiting, rng.gen_range(0..20), proposal, Designation::ALL[i % 3]);
            Experience {
                state,
                action: if rng.gen_bool(0.5) { Action::Schedule } else { Action::Defer },
                reward: if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
                episode: 0,
                timestep: i as u32,
            }
        })
        .collect()
}

pub fn sentences(n: usize, seed: u64) -> Vec<LabeledSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate_dataset(&PhraseTable::default(), &DEFAULT_FRAMES, &UserDirectory::default(), n, &mut rng)
        .expect("dataset")
}
