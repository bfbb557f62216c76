//! The scheduling environment: backlog and waiting queues over the shared
//! calendar, meeting arrivals, and simulated participants.
//!
//! One timestep walks the waiting queue front to back. For each meeting the
//! environment proposes its first-fit slot and a [`Decider`] chooses to
//! request it or to push the meeting back to the backlog. Afterwards the
//! current day elapses, new meetings arrive in the backlog and the waiting
//! queue is refilled from the backlog front.

mod participants;
mod workload;

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use participants::{participant_respond, ParticipantProfile, Response};
pub use workload::{
    expected_slots_per_meeting, meetings_for_load, read_replay, write_replay, ArrivalBatch,
    LoadBand, UserDirectory, WorkloadGenerator, CAPACITY_PER_TIMESTEP, DESIGNATION_PROBS,
    DURATION_PROBS, MAX_PARTICIPANTS, MIN_PARTICIPANTS,
};

use crate::calendar::{Designation, Meeting, MeetingId, SlotGrid};
use crate::error::{Error, Result};

pub const WAITING_CAPACITY: usize = 7;

/// Backlog length at which [`backlog_vector`] saturates.
pub const BACKLOG_CAPACITY: usize = 50;
pub const BACKLOG_VECTOR_LEN: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Action {
    Schedule,
    Defer,
}

impl Action {
    pub fn index(self) -> usize {
        match self {
            Action::Schedule => 0,
            Action::Defer => 1,
        }
    }

    pub fn from_index(i: usize) -> Action {
        match i {
            0 => Action::Schedule,
            _ => Action::Defer,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Outcome {
    Booked,
    Rejected,
    Deferred,
}

/// `floor(free slots * |waiting| / total slots requested by waiting)`, or 0
/// when nothing is waiting.
pub fn compute_benchmark<'a, I>(grid: &SlotGrid, waiting: I) -> usize
where
    I: IntoIterator<Item = &'a Meeting>,
{
    let (count, slots) = waiting
        .into_iter()
        .fold((0usize, 0usize), |(n, s), m| (n + 1, s + m.duration));
    if count == 0 {
        return 0;
    }
    grid.free_slot_count() * count / slots
}

/// Thermometer code of the backlog length: element `i` fills as the
/// backlog grows from `10 i` to `10 (i + 1)` meetings.
pub fn backlog_vector(backlog_len: usize) -> [f64; BACKLOG_VECTOR_LEN] {
    let per_cell = (BACKLOG_CAPACITY / BACKLOG_VECTOR_LEN) as f64;
    let mut v = [0.0; BACKLOG_VECTOR_LEN];
    for (i, cell) in v.iter_mut().enumerate() {
        *cell = ((backlog_len as f64 - per_cell * i as f64) / per_cell).clamp(0.0, 1.0);
    }
    v
}

/// What a [`Decider`] sees when asked about the meeting at the front of
/// the waiting queue.
pub struct DecisionView<'a> {
    pub grid: &'a SlotGrid,
    /// Undecided meetings of this timestep; the one under decision is first.
    pub waiting: &'a VecDeque<Meeting>,
    pub backlog_len: usize,
    pub slot: usize,
}

impl DecisionView<'_> {
    pub fn meeting(&self) -> &Meeting {
        &self.waiting[0]
    }
}

pub trait Decider {
    /// Optional permutation of the waiting queue applied before any decision.
    fn order(&mut self, _waiting: &[Meeting]) -> Option<Vec<usize>> {
        None
    }

    fn decide(&mut self, view: &DecisionView<'_>) -> Action;
}

/// One pass over one waiting meeting.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecisionRecord {
    pub meeting: MeetingId,
    pub duration: usize,
    pub designation: Designation,
    /// First-fit proposal; `None` when the meeting fit nowhere.
    pub slot: Option<usize>,
    /// `None` when no slot was found and the meeting went back without a decision.
    pub action: Option<Action>,
    pub outcome: Outcome,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TimestepReport {
    pub timestep: u64,
    pub benchmark: usize,
    /// Size of the waiting queue when the timestep started.
    pub waiting_at_start: usize,
    pub decisions: Vec<DecisionRecord>,
    pub scheduled: usize,
    pub elapsed: Vec<MeetingId>,
}

enum ArrivalSource {
    Generated(WorkloadGenerator),
    Replay(VecDeque<ArrivalBatch>),
}

pub struct Environment {
    grid: SlotGrid,
    backlog: VecDeque<Meeting>,
    waiting: VecDeque<Meeting>,
    profile: ParticipantProfile,
    load: LoadBand,
    source: ArrivalSource,
    rng: ChaCha8Rng,
    timestep: u64,
    arrivals_open: bool,
    arrived: u64,
    elapsed: u64,
    log: Option<Vec<ArrivalBatch>>,
}

impl Environment {
    pub fn new(load: LoadBand, profile: ParticipantProfile, seed: u64) -> Environment {
        Environment::with_source(
            ArrivalSource::Generated(WorkloadGenerator::new(UserDirectory::default().len())),
            load,
            profile,
            seed,
        )
    }

    /// Environment whose arrivals come from a recorded workload instead of the generator.
    pub fn from_replay(
        batches: Vec<ArrivalBatch>,
        profile: ParticipantProfile,
        seed: u64,
    ) -> Environment {
        Environment::with_source(
            ArrivalSource::Replay(batches.into()),
            LoadBand::ZERO,
            profile,
            seed,
        )
    }

    fn with_source(
        source: ArrivalSource,
        load: LoadBand,
        profile: ParticipantProfile,
        seed: u64,
    ) -> Environment {
        Environment {
            grid: SlotGrid::new(),
            backlog: VecDeque::new(),
            waiting: VecDeque::new(),
            profile,
            load,
            source,
            rng: ChaCha8Rng::seed_from_u64(seed),
            timestep: 0,
            arrivals_open: true,
            arrived: 0,
            elapsed: 0,
            log: None,
        }
    }

    /// Keep a copy of every arrival batch for [`write_replay`].
    pub fn record_arrivals(&mut self) {
        self.log.get_or_insert_with(Vec::new);
    }

    pub fn arrival_log(&self) -> Option<&[ArrivalBatch]> {
        self.log.as_deref()
    }

    pub fn grid(&self) -> &SlotGrid {
        &self.grid
    }

    pub fn backlog(&self) -> &VecDeque<Meeting> {
        &self.backlog
    }

    pub fn waiting(&self) -> &VecDeque<Meeting> {
        &self.waiting
    }

    pub fn profile(&self) -> &ParticipantProfile {
        &self.profile
    }

    pub fn set_profile(&mut self, profile: ParticipantProfile) {
        self.profile = profile;
    }

    pub fn load(&self) -> LoadBand {
        self.load
    }

    pub fn set_load(&mut self, load: LoadBand) {
        self.load = load;
    }

    pub fn timestep(&self) -> u64 {
        self.timestep
    }

    pub fn arrived(&self) -> u64 {
        self.arrived
    }

    pub fn elapsed(&self) -> u64 {
        self.elapsed
    }

    /// Stop generating arrivals (the drain phase).
    pub fn close_arrivals(&mut self) {
        self.arrivals_open = false;
    }

    pub fn is_drained(&self) -> bool {
        self.backlog.is_empty() && self.waiting.is_empty()
    }

    /// Sample this timestep's arrivals into the backlog and refill the waiting queue.
    pub fn admit_arrivals(&mut self) {
        if self.arrivals_open {
            let meetings = match &mut self.source {
                ArrivalSource::Generated(gen) => {
                    gen.sample_arrivals(self.load, &mut self.rng, self.timestep)
                }
                ArrivalSource::Replay(batches) => {
                    while batches.front().is_some_and(|b| b.timestep < self.timestep) {
                        batches.pop_front();
                    }
                    match batches.front() {
                        Some(b) if b.timestep == self.timestep => {
                            batches.pop_front().map(|b| b.meetings).unwrap_or_default()
                        }
                        _ => Vec::new(),
                    }
                }
            };
            if let Some(log) = &mut self.log {
                if !meetings.is_empty() {
                    log.push(ArrivalBatch {
                        timestep: self.timestep,
                        meetings: meetings.clone(),
                    });
                }
            }
            self.arrived += meetings.len() as u64;
            self.backlog.extend(meetings);
        }
        self.refill_waiting();
    }

    /// Push meetings directly into the backlog (tests and the dialogue front end).
    pub fn enqueue(&mut self, meeting: Meeting) {
        self.arrived += 1;
        self.backlog.push_back(meeting);
    }

    pub fn refill_waiting(&mut self) {
        while self.waiting.len() < WAITING_CAPACITY {
            match self.backlog.pop_front() {
                Some(m) => self.waiting.push_back(m),
                None => break,
            }
        }
    }

    /// Carry out a decision on a meeting already removed from the waiting queue.
    pub fn apply_decision(
        &mut self,
        meeting: Meeting,
        slot: Option<usize>,
        action: Action,
    ) -> Result<Outcome> {
        match action {
            Action::Defer => {
                self.backlog.push_back(meeting);
                Ok(Outcome::Deferred)
            }
            Action::Schedule => {
                let slot = slot.ok_or_else(|| {
                    Error::Config(format!("meeting {} scheduled without a slot", meeting.id))
                })?;
                self.grid.check_placement(slot, meeting.duration)?;
                match participant_respond(&meeting, slot, &self.profile, &mut self.rng) {
                    Response::Accept => {
                        self.grid.occupy(slot, &meeting)?;
                        Ok(Outcome::Booked)
                    }
                    Response::Reject => {
                        self.backlog.push_back(meeting);
                        Ok(Outcome::Rejected)
                    }
                }
            }
        }
    }

    /// Decide on every waiting meeting, let the current day elapse, admit
    /// the next arrivals and refill the waiting queue.
    pub fn run_timestep<D: Decider + ?Sized>(&mut self, decider: &mut D) -> TimestepReport {
        let benchmark = compute_benchmark(&self.grid, &self.waiting);
        let waiting_at_start = self.waiting.len();
        if let Some(order) = decider.order(self.waiting.make_contiguous()) {
            let mut slots: Vec<Option<Meeting>> = self.waiting.drain(..).map(Some).collect();
            debug_assert_eq!(order.len(), slots.len());
            self.waiting = order
                .into_iter()
                .map(|i| slots[i].take().expect("order must be a permutation"))
                .collect();
        }

        let mut decisions = Vec::with_capacity(self.waiting.len());
        let mut scheduled = 0;
        while let Some(front) = self.waiting.front() {
            let slot = self.grid.find_first_fit(front.duration);
            let action = slot.map(|slot| {
                decider.decide(&DecisionView {
                    grid: &self.grid,
                    waiting: &self.waiting,
                    backlog_len: self.backlog.len(),
                    slot,
                })
            });
            let meeting = self.waiting.pop_front().expect("front exists");
            let (id, duration, designation) = (meeting.id, meeting.duration, meeting.designation);
            let outcome = self
                .apply_decision(meeting, slot, action.unwrap_or(Action::Defer))
                .expect("first-fit proposals are always placeable");
            if outcome == Outcome::Booked {
                scheduled += 1;
            }
            decisions.push(DecisionRecord {
                meeting: id,
                duration,
                designation,
                slot,
                action,
                outcome,
            });
        }

        let elapsed = self.grid.rotate_day();
        self.elapsed += elapsed.len() as u64;
        self.timestep += 1;
        self.admit_arrivals();

        TimestepReport {
            timestep: self.timestep - 1,
            benchmark,
            waiting_at_start,
            decisions,
            scheduled,
            elapsed,
        }
    }

    /// Meetings currently booked on the grid.
    pub fn booked(&self) -> usize {
        self.grid.bookings().len()
    }

    /// `arrived == booked + elapsed + |backlog| + |waiting|`.
    pub fn conserves_meetings(&self) -> bool {
        self.arrived
            == self.booked() as u64
                + self.elapsed
                + self.backlog.len() as u64
                + self.waiting.len() as u64
    }
}
