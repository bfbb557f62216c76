//! Episode orchestration for the learning agent.
//!
//! Each timestep the agent decides on every waiting meeting. Its
//! decisions share a delayed reward of +1 when the number of meetings it
//! booked reaches the timestep's benchmark and -1 otherwise; in the
//! immediate modes each request is additionally rewarded +1 when the
//! participants accept and -1 when they refuse. Positively rewarded
//! experiences are kept in a replay buffer spanning the last 20 episodes;
//! negatively rewarded ones are used once, at the end of their episode.

mod replay;
mod state;
mod stats;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use replay::{ReplayBuffer, DEFAULT_RETENTION};
pub use state::{encode_state, STATE_LEN};
pub use stats::{
    pooled_pushback_rate, stats_header, stats_row, summed_asks, tail, write_designation_asks_csv,
    write_stats_csv, EpisodeStats,
};

use crate::env::{Action, Decider, DecisionView, Environment, Outcome, TimestepReport};
use crate::error::Result;
use crate::policy::{PolicyParams, DEFAULT_LEARNING_RATE};

pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_ARRIVAL_TIMESTEPS: usize = 50;
pub const DEFAULT_DRAIN_CAP: usize = 200;

/// One agent decision.
#[derive(Clone, Debug, PartialEq)]
pub struct Experience {
    pub state: Vec<f64>,
    pub action: Action,
    pub reward: f64,
    pub episode: u32,
    pub timestep: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// Benchmark comparison only.
    Delayed,
    /// Participant accept/refuse only.
    Immediate,
    /// Sum of both.
    Combined,
}

impl RewardMode {
    pub fn delayed(self) -> bool {
        matches!(self, RewardMode::Delayed | RewardMode::Combined)
    }

    pub fn immediate(self) -> bool {
        matches!(self, RewardMode::Immediate | RewardMode::Combined)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub arrival_timesteps: usize,
    pub drain_cap: usize,
    pub epsilon: f64,
    pub learning_rate: f64,
    pub reward_mode: RewardMode,
    /// Discount applied backwards over the decisions of one timestep.
    pub gamma: f64,
    /// Also take an update step after every timestep.
    pub train_every_timestep: bool,
    /// Limit the benchmark to the number of meetings that were waiting.
    pub cap_benchmark: bool,
    pub retention: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            arrival_timesteps: DEFAULT_ARRIVAL_TIMESTEPS,
            drain_cap: DEFAULT_DRAIN_CAP,
            epsilon: DEFAULT_EPSILON,
            learning_rate: DEFAULT_LEARNING_RATE,
            reward_mode: RewardMode::Delayed,
            gamma: 1.0,
            train_every_timestep: false,
            cap_benchmark: true,
            retention: DEFAULT_RETENTION,
        }
    }
}

/// With probability `epsilon` a uniformly random action, otherwise a draw
/// from `probs`. The flag tells whether the random branch was taken.
pub fn select_action<R: Rng + ?Sized>(probs: [f64; 2], epsilon: f64, rng: &mut R) -> (Action, bool) {
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        return (Action::from_index(rng.gen_range(0..2)), true);
    }
    let action = if rng.gen::<f64>() < probs[0] {
        Action::Schedule
    } else {
        Action::Defer
    };
    (action, false)
}

/// The threshold a timestep's bookings are compared against.
pub fn reward_threshold(report: &TimestepReport, cap: bool) -> usize {
    if cap {
        report.benchmark.min(report.waiting_at_start)
    } else {
        report.benchmark
    }
}

/// Adds the delayed reward to every experience of a timestep: `+1` if
/// `scheduled >= benchmark`, else `-1`, discounted by `gamma` per decision
/// counted back from the last one.
pub fn assign_delayed_rewards(experiences: &mut [Experience], benchmark: usize, scheduled: usize, gamma: f64) {
    let r = if scheduled >= benchmark { 1.0 } else { -1.0 };
    let n = experiences.len();
    for (i, e) in experiences.iter_mut().enumerate() {
        e.reward += r * gamma.powi((n - 1 - i) as i32);
    }
}

pub fn immediate_reward(outcome: Outcome) -> f64 {
    match outcome {
        Outcome::Booked => 1.0,
        Outcome::Rejected => -1.0,
        Outcome::Deferred => 0.0,
    }
}

/// Arrival and drain bounds of one episode.
#[derive(Clone, Copy, Debug)]
pub struct EpisodeTiming {
    pub arrival_timesteps: usize,
    pub drain_cap: usize,
}

/// Runs one episode against `decider`, calling `on_step` after each
/// timestep with the report and whether it was an arrival timestep.
/// Returns whether the system drained inside the cap.
pub fn drive_episode<D, F>(env: &mut Environment, decider: &mut D, timing: EpisodeTiming, mut on_step: F) -> bool
where
    D: Decider + ?Sized,
    F: FnMut(&TimestepReport, bool, &mut D),
{
    if timing.arrival_timesteps == 0 {
        env.close_arrivals();
    }
    env.admit_arrivals();
    for t in 0..timing.arrival_timesteps {
        if t + 1 == timing.arrival_timesteps {
            env.close_arrivals();
        }
        let report = env.run_timestep(decider);
        on_step(&report, true, decider);
    }
    let mut drain = 0;
    while !env.is_drained() && drain < timing.drain_cap {
        let report = env.run_timestep(decider);
        on_step(&report, false, decider);
        drain += 1;
    }
    env.is_drained()
}

/// Queries the policy and remembers what it saw.
struct PolicyDecider<'a> {
    params: &'a PolicyParams,
    rng: &'a mut ChaCha8Rng,
    epsilon: f64,
    pending: Vec<(Vec<f64>, Action, bool)>,
}

impl Decider for PolicyDecider<'_> {
    fn decide(&mut self, view: &DecisionView<'_>) -> Action {
        let state = encode_state(
            view.grid,
            view.waiting,
            view.backlog_len,
            Some(view.slot),
            view.meeting().designation,
        );
        let probs = self.params.forward(&state).expect("encoded states have the policy's input size");
        let (action, explored) = select_action(probs, self.epsilon, self.rng);
        self.pending.push((state, action, explored));
        action
    }
}

/// The learning scheduler: policy parameters, replay buffer and its own RNG.
pub struct Agent {
    pub params: PolicyParams,
    pub buffer: ReplayBuffer,
    pub config: TrainerConfig,
    rng: ChaCha8Rng,
}

impl Agent {
    pub fn new(params: PolicyParams, config: TrainerConfig, seed: u64) -> Agent {
        Agent {
            params,
            buffer: ReplayBuffer::new(config.retention),
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn timing(&self) -> EpisodeTiming {
        EpisodeTiming {
            arrival_timesteps: self.config.arrival_timesteps,
            drain_cap: self.config.drain_cap,
        }
    }

    /// Runs a single timestep and returns its rewarded experiences and report.
    pub fn run_timestep(&mut self, env: &mut Environment, episode: usize) -> (Vec<Experience>, TimestepReport, Vec<bool>) {
        let mut decider = PolicyDecider {
            params: &self.params,
            rng: &mut self.rng,
            epsilon: self.config.epsilon,
            pending: Vec::new(),
        };
        let report = env.run_timestep(&mut decider);
        let pending = std::mem::take(&mut decider.pending);
        let (experiences, explored) = rewarded(&self.config, &report, pending, episode);
        (experiences, report, explored)
    }

    /// Plays one episode; when `learn` is set, stores positive experiences
    /// and takes the end-of-episode update step.
    pub fn run_episode(&mut self, env: &mut Environment, episode: usize, learn: bool) -> Result<EpisodeStats> {
        let timing = self.timing();
        let config = self.config;
        let mut stats = EpisodeStats::new(episode);
        let mut positives = Vec::new();
        let mut negatives = Vec::new();
        let mut step_error = None;

        let mut decider = PolicyDecider {
            params: &self.params,
            rng: &mut self.rng,
            epsilon: config.epsilon,
            pending: Vec::new(),
        };
        let mut per_step_batches: Vec<Vec<Experience>> = Vec::new();
        let complete = drive_episode(env, &mut decider, timing, |report, arrival, d| {
            let pending = std::mem::take(&mut d.pending);
            let (experiences, explored) = rewarded(&config, report, pending, episode);
            stats.record(report, arrival, report.scheduled >= reward_threshold(report, config.cap_benchmark), &explored);
            if !learn {
                return;
            }
            if config.train_every_timestep {
                per_step_batches.push(experiences.clone());
            }
            for e in experiences {
                if e.reward > 0.0 {
                    positives.push(e);
                } else if e.reward < 0.0 {
                    negatives.push(e);
                }
            }
        });
        stats.complete = complete;
        stats.arrived = env.arrived();

        if learn {
            if config.train_every_timestep {
                // Per-timestep steps replay the episode's timesteps in order
                // against the evolving parameters.
                for batch in &per_step_batches {
                    if let Err(e) = self.params.reinforce_update(batch, config.learning_rate) {
                        step_error = Some(e);
                        break;
                    }
                }
            }
            if let Some(e) = step_error {
                return Err(e);
            }
            self.buffer.push(episode, positives);
            self.params
                .reinforce_update(self.buffer.iter().chain(negatives.iter()), config.learning_rate)?;
        }
        Ok(stats)
    }
}

fn rewarded(
    config: &TrainerConfig,
    report: &TimestepReport,
    pending: Vec<(Vec<f64>, Action, bool)>,
    episode: usize,
) -> (Vec<Experience>, Vec<bool>) {
    let decided = report.decisions.iter().filter(|d| d.action.is_some());
    let mut experiences = Vec::with_capacity(pending.len());
    let mut explored = Vec::with_capacity(pending.len());
    for ((state, action, flag), record) in pending.into_iter().zip(decided) {
        debug_assert_eq!(Some(action), record.action);
        let reward = if config.reward_mode.immediate() {
            immediate_reward(record.outcome)
        } else {
            0.0
        };
        experiences.push(Experience {
            state,
            action,
            reward,
            episode: episode as u32,
            timestep: report.timestep as u32,
        });
        explored.push(flag);
    }
    if config.reward_mode.delayed() {
        let threshold = reward_threshold(report, config.cap_benchmark);
        assign_delayed_rewards(&mut experiences, threshold, report.scheduled, config.gamma);
    }
    (experiences, explored)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendar::{Designation, Meeting, MeetingId, UserId};
    use crate::env::{LoadBand, ParticipantProfile};

    fn exp(reward: f64) -> Experience {
        Experience {
            state: vec![],
            action: Action::Schedule,
            reward,
            episode: 0,
            timestep: 0,
        }
    }

    #[test]
    fn pure_exploration_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 10_000;
        let schedules = (0..n)
            .filter(|_| select_action([0.9, 0.1], 1.0, &mut rng).0 == Action::Schedule)
            .count();
        assert!((schedules as f64 / n as f64 - 0.5).abs() < 0.03);
    }

    #[test]
    fn no_exploration_follows_the_policy() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 10_000;
        let schedules = (0..n)
            .filter(|_| select_action([0.9, 0.1], 0.0, &mut rng).0 == Action::Schedule)
            .count();
        assert!((schedules as f64 / n as f64 - 0.9).abs() < 0.02);
    }

    #[test]
    fn exploration_puts_half_of_epsilon_on_the_other_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 10_000;
        let defers = (0..n)
            .filter(|_| select_action([1.0, 0.0], 0.1, &mut rng).0 == Action::Defer)
            .count();
        assert!((defers as f64 / n as f64 - 0.05).abs() < 0.01);
    }

    #[test]
    fn delayed_reward_branches() {
        let mut e = vec![exp(0.0), exp(0.0)];
        assign_delayed_rewards(&mut e, 5, 5, 1.0);
        assert!(e.iter().all(|x| x.reward == 1.0));
        let mut e = vec![exp(0.0), exp(0.0)];
        assign_delayed_rewards(&mut e, 8, 2, 1.0);
        assert!(e.iter().all(|x| x.reward == -1.0));
    }

    #[test]
    fn immediate_and_delayed_rewards_add_up() {
        let mut e = vec![exp(immediate_reward(Outcome::Rejected)), exp(0.0), exp(immediate_reward(Outcome::Booked))];
        assign_delayed_rewards(&mut e, 3, 3, 1.0);
        let r: Vec<f64> = e.iter().map(|x| x.reward).collect();
        assert_eq!(r, vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn zero_load_episode_learns_nothing() {
        let mut agent = Agent::new(PolicyParams::init(0), TrainerConfig::default(), 0);
        let before = agent.params.clone();
        let mut env = Environment::new(LoadBand::ZERO, ParticipantProfile::default(), 0);
        let stats = agent.run_episode(&mut env, 0, true).unwrap();
        assert_eq!(stats.scheduled, 0);
        assert_eq!(stats.arrival_timesteps, 50);
        assert!(agent.buffer.is_empty());
        assert_eq!(agent.params, before);
    }

    #[test]
    fn drain_bookings_do_not_count_towards_the_average() {
        let mut agent = Agent::new(PolicyParams::init(0), TrainerConfig::default(), 0);
        let mut env = Environment::new(LoadBand::high(), ParticipantProfile::default(), 1);
        let stats = agent.run_episode(&mut env, 0, false).unwrap();
        assert!(stats.complete);
        assert!(stats.drain_timesteps > 0);
        assert!(stats.drained > 0);
        assert_eq!(stats.avg_scheduled(), stats.scheduled as f64 / 50.0);
        assert!(env.conserves_meetings());
        assert_eq!(stats.scheduled + stats.drained, env.arrived() as usize);
    }

    #[test]
    fn single_meeting_timestep() {
        let mut agent = Agent::new(PolicyParams::init(0), TrainerConfig { epsilon: 0.0, ..Default::default() }, 0);
        // force "schedule" by biasing the output layer
        let n = agent.params.parameters().len();
        agent.params.parameters_mut()[n - 2] = 50.0;
        let mut env = Environment::new(LoadBand::ZERO, ParticipantProfile::default(), 0);
        env.enqueue(Meeting::new(MeetingId(1), 1, vec![UserId(1)], UserId(0), Designation::Junior, 0).unwrap());
        env.refill_waiting();
        let (exps, report, _) = agent.run_timestep(&mut env, 0);
        assert_eq!(report.scheduled, 1);
        assert_eq!(exps.len(), 1);
        // benchmark floor(40*1/1) = 40 capped to the single waiting meeting
        assert_eq!(exps[0].reward, 1.0);
    }
}
