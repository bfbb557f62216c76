use std::collections::VecDeque;

use super::Experience;

pub const DEFAULT_RETENTION: usize = 20;

/// Positively rewarded experiences of recent episodes.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    retention: usize,
    entries: VecDeque<(usize, Vec<Experience>)>,
}

impl Default for ReplayBuffer {
    fn default() -> Self {
        ReplayBuffer::new(DEFAULT_RETENTION)
    }
}

impl ReplayBuffer {
    pub fn new(retention: usize) -> ReplayBuffer {
        assert!(retention > 0);
        ReplayBuffer {
            retention,
            entries: VecDeque::new(),
        }
    }

    /// Adds one batch (typically a timestep) from `episode` and drops
    /// everything older than the retention window.
    pub fn push(&mut self, episode: usize, experiences: Vec<Experience>) {
        if !experiences.is_empty() {
            self.entries.push_back((episode, experiences));
        }
        self.evict(episode);
    }

    /// Forget entries from episodes at or before `newest - retention`.
    pub fn evict(&mut self, newest: usize) {
        while let Some((e, _)) = self.entries.front() {
            if e + self.retention <= newest {
                self.entries.pop_front();
            } else {
                break;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.entries.iter().map(|(_, v)| v.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn episodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|(e, _)| *e)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> + Clone + '_ {
        self.entries.iter().flat_map(|(_, v)| v.iter())
    }
}
