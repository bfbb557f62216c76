//! Fixed scheduling policies used as references for the agent. They always
//! request the first-fit slot and differ only in the order in which the
//! waiting queue is visited.

use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calendar::Meeting;
use crate::env::{Action, Decider, DecisionView, Environment};
use crate::trainer::{drive_episode, reward_threshold, EpisodeStats, EpisodeTiming};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaselineKind {
    #[serde(rename = "sjf")]
    ShortestJobFirst,
    #[serde(rename = "fcfs")]
    FirstComeFirstServe,
    #[serde(rename = "random")]
    Random,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 3] = [
        BaselineKind::ShortestJobFirst,
        BaselineKind::FirstComeFirstServe,
        BaselineKind::Random,
    ];

    pub fn label(self) -> &'static str {
        match self {
            BaselineKind::ShortestJobFirst => "sjf",
            BaselineKind::FirstComeFirstServe => "fcfs",
            BaselineKind::Random => "random",
        }
    }
}

impl FromStr for BaselineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sjf" => Ok(BaselineKind::ShortestJobFirst),
            "fcfs" => Ok(BaselineKind::FirstComeFirstServe),
            "random" => Ok(BaselineKind::Random),
            other => Err(format!("unknown baseline `{other}`")),
        }
    }
}

pub struct BaselinePolicy {
    kind: BaselineKind,
    rng: ChaCha8Rng,
}

impl BaselinePolicy {
    pub fn new(kind: BaselineKind, seed: u64) -> BaselinePolicy {
        BaselinePolicy {
            kind,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn kind(&self) -> BaselineKind {
        self.kind
    }
}

/// Visiting order over `waiting` (indices into the queue).
pub fn baseline_order(policy: &mut BaselinePolicy, waiting: &[Meeting]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..waiting.len()).collect();
    match policy.kind {
        BaselineKind::ShortestJobFirst => order.sort_by_key(|&i| waiting[i].duration),
        BaselineKind::FirstComeFirstServe => {}
        BaselineKind::Random => order.shuffle(&mut policy.rng),
    }
    order
}

impl Decider for BaselinePolicy {
    fn order(&mut self, waiting: &[Meeting]) -> Option<Vec<usize>> {
        Some(baseline_order(self, waiting))
    }

    fn decide(&mut self, _view: &DecisionView<'_>) -> Action {
        Action::Schedule
    }
}

/// Plays one episode with a fixed policy.
pub fn run_baseline_episode(
    policy: &mut BaselinePolicy,
    env: &mut Environment,
    timing: EpisodeTiming,
    episode: usize,
    cap_benchmark: bool,
) -> EpisodeStats {
    let mut stats = EpisodeStats::new(episode);
    let complete = drive_episode(env, policy, timing, |report, arrival, _| {
        let hit = report.scheduled >= reward_threshold(report, cap_benchmark);
        stats.record(report, arrival, hit, &[]);
    });
    stats.complete = complete;
    stats.arrived = env.arrived();
    stats
}

/// Runs `episodes` episodes, building each environment with `make_env(episode)`.
pub fn run_baseline<F>(
    policy: &mut BaselinePolicy,
    mut make_env: F,
    episodes: usize,
    timing: EpisodeTiming,
) -> Vec<EpisodeStats>
where
    F: FnMut(usize) -> Environment,
{
    (0..episodes)
        .map(|e| {
            let mut env = make_env(e);
            run_baseline_episode(policy, &mut env, timing, e, true)
        })
        .collect()
}

pub fn mean_scheduled(stats: &[EpisodeStats]) -> f64 {
    if stats.is_empty() {
        return 0.0;
    }
    stats.iter().map(EpisodeStats::avg_scheduled).sum::<f64>() / stats.len() as f64
}
