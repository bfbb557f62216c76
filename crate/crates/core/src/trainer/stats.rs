use std::io::Write;

use crate::calendar::{duration_class, Designation, DURATIONS, SLOT_COUNT};
use crate::env::{Action, Outcome, TimestepReport};
use crate::error::Result;

/// Per-episode metrics. Asks and pushbacks count only the agent's own
/// choices on arrival timesteps; exploratory actions are tallied apart.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeStats {
    pub episode: usize,
    pub arrival_timesteps: usize,
    pub drain_timesteps: usize,
    /// Arrivals and the drain both finished inside the cap.
    pub complete: bool,
    pub arrived: u64,
    /// Meetings booked on arrival timesteps.
    pub scheduled: usize,
    /// Meetings booked during the drain.
    pub drained: usize,
    pub benchmark_hits: usize,
    /// Requests covering each slot, by initiator designation.
    pub asks: [[u32; SLOT_COUNT]; 3],
    pub pushbacks: [u32; 4],
    /// Times a meeting of each length was taken from the waiting queue.
    pub passes: [u32; 4],
    pub rejected: u32,
    pub exploratory_actions: u32,
}

impl EpisodeStats {
    pub fn new(episode: usize) -> EpisodeStats {
        EpisodeStats {
            episode,
            arrival_timesteps: 0,
            drain_timesteps: 0,
            complete: true,
            arrived: 0,
            scheduled: 0,
            drained: 0,
            benchmark_hits: 0,
            asks: [[0; SLOT_COUNT]; 3],
            pushbacks: [0; 4],
            passes: [0; 4],
            rejected: 0,
            exploratory_actions: 0,
        }
    }

    pub fn avg_scheduled(&self) -> f64 {
        if self.arrival_timesteps == 0 {
            0.0
        } else {
            self.scheduled as f64 / self.arrival_timesteps as f64
        }
    }

    pub fn benchmark_hit_rate(&self) -> f64 {
        if self.arrival_timesteps == 0 {
            0.0
        } else {
            self.benchmark_hits as f64 / self.arrival_timesteps as f64
        }
    }

    pub fn total_asks(&self) -> [u32; SLOT_COUNT] {
        let mut out = [0; SLOT_COUNT];
        for row in &self.asks {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out
    }

    pub fn pushback_rate(&self, duration: usize) -> f64 {
        let c = duration_class(duration);
        if self.passes[c] == 0 {
            0.0
        } else {
            self.pushbacks[c] as f64 / self.passes[c] as f64
        }
    }

    /// Fold one timestep in. `exploratory[i]` flags the i-th agent decision
    /// (records without an action are skipped when indexing).
    pub fn record(
        &mut self,
        report: &TimestepReport,
        arrival: bool,
        threshold_hit: bool,
        exploratory: &[bool],
    ) {
        if !arrival {
            self.drain_timesteps += 1;
            self.drained += report.scheduled;
            return;
        }
        self.arrival_timesteps += 1;
        self.scheduled += report.scheduled;
        if threshold_hit {
            self.benchmark_hits += 1;
        }
        let mut flags = exploratory.iter();
        for d in &report.decisions {
            let explored = match d.action {
                Some(_) => *flags.next().unwrap_or(&false),
                None => false,
            };
            if d.outcome == Outcome::Rejected {
                self.rejected += 1;
            }
            if explored {
                self.exploratory_actions += 1;
                continue;
            }
            let c = duration_class(d.duration);
            self.passes[c] += 1;
            if d.outcome != Outcome::Booked {
                self.pushbacks[c] += 1;
            }
            if let (Some(Action::Schedule), Some(slot)) = (d.action, d.slot) {
                for s in slot..slot + d.duration {
                    self.asks[d.designation.index()][s] += 1;
                }
            }
        }
    }
}

/// The last `fraction` of `stats`, at least one episode when any exist.
pub fn tail(stats: &[EpisodeStats], fraction: f64) -> &[EpisodeStats] {
    let n = ((stats.len() as f64 * fraction).ceil() as usize).clamp(stats.len().min(1), stats.len());
    &stats[stats.len() - n..]
}

/// Pushbacks over passes for one meeting length, pooled across episodes.
pub fn pooled_pushback_rate(stats: &[EpisodeStats], duration: usize) -> f64 {
    let c = duration_class(duration);
    let pushbacks: u64 = stats.iter().map(|s| u64::from(s.pushbacks[c])).sum();
    let passes: u64 = stats.iter().map(|s| u64::from(s.passes[c])).sum();
    if passes == 0 {
        0.0
    } else {
        pushbacks as f64 / passes as f64
    }
}

/// Per-slot asks summed over episodes, by designation index.
pub fn summed_asks(stats: &[EpisodeStats]) -> [[u64; SLOT_COUNT]; 3] {
    let mut out = [[0; SLOT_COUNT]; 3];
    for s in stats {
        for (row, src) in out.iter_mut().zip(&s.asks) {
            for (o, v) in row.iter_mut().zip(src) {
                *o += u64::from(*v);
            }
        }
    }
    out
}

pub fn stats_header() -> Vec<String> {
    let mut h = vec![
        "episode".to_string(),
        "avg_meetings_per_timestep".to_string(),
        "benchmark_hit_rate".to_string(),
    ];
    h.extend((0..SLOT_COUNT).map(|s| format!("ask_{s}")));
    h.extend(DURATIONS.iter().map(|d| format!("pushback_{d}")));
    h.extend(DURATIONS.iter().map(|d| format!("passes_{d}")));
    h.extend(
        [
            "arrived",
            "scheduled",
            "drained",
            "rejected",
            "exploratory_actions",
            "drain_timesteps",
            "complete",
        ]
        .map(String::from),
    );
    h
}

pub fn stats_row(s: &EpisodeStats) -> Vec<String> {
    let mut r = vec![
        s.episode.to_string(),
        format!("{:.6}", s.avg_scheduled()),
        format!("{:.6}", s.benchmark_hit_rate()),
    ];
    r.extend(s.total_asks().iter().map(u32::to_string));
    r.extend(s.pushbacks.iter().map(u32::to_string));
    r.extend(s.passes.iter().map(u32::to_string));
    r.extend([
        s.arrived.to_string(),
        s.scheduled.to_string(),
        s.drained.to_string(),
        s.rejected.to_string(),
        s.exploratory_actions.to_string(),
        s.drain_timesteps.to_string(),
        u8::from(s.complete).to_string(),
    ]);
    r
}

/// One row per episode in the shared stats schema.
pub fn write_stats_csv<W: Write>(out: W, stats: &[EpisodeStats]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(stats_header())?;
    for s in stats {
        w.write_record(stats_row(s))?;
    }
    w.flush()?;
    Ok(())
}

/// Per-slot asks split by initiator designation, one row per episode and designation.
pub fn write_designation_asks_csv<W: Write>(out: W, stats: &[EpisodeStats]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["episode".to_string(), "designation".to_string()];
    header.extend((0..SLOT_COUNT).map(|s| format!("ask_{s}")));
    w.write_record(&header)?;
    for s in stats {
        for d in Designation::ALL {
            let mut row = vec![s.episode.to_string(), d.as_str().to_string()];
            row.extend(s.asks[d.index()].iter().map(u32::to_string));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendar::MeetingId;
    use crate::env::DecisionRecord;

    fn rec(duration: usize, slot: Option<usize>, action: Option<Action>, outcome: Outcome) -> DecisionRecord {
        DecisionRecord {
            meeting: MeetingId(0),
            duration,
            designation: Designation::Junior,
            slot,
            action,
            outcome,
        }
    }

    #[test]
    fn counts_asks_over_the_whole_span_and_skips_exploration() {
        let report = TimestepReport {
            timestep: 0,
            benchmark: 1,
            waiting_at_start: 4,
            decisions: vec![
                rec(2, Some(4), Some(Action::Schedule), Outcome::Booked),
                rec(1, Some(6), Some(Action::Schedule), Outcome::Rejected),
                rec(6, None, None, Outcome::Deferred),
                rec(4, Some(8), Some(Action::Defer), Outcome::Deferred),
            ],
            scheduled: 1,
            elapsed: vec![],
        };
        let mut s = EpisodeStats::new(0);
        s.record(&report, true, true, &[false, true, false]);
        let asks = s.total_asks();
        assert_eq!(&asks[4..7], &[1, 1, 0]);
        assert_eq!(s.exploratory_actions, 1);
        assert_eq!(s.rejected, 1);
        assert_eq!(s.passes, [0, 1, 1, 1]);
        assert_eq!(s.pushbacks, [0, 0, 1, 1]);
        assert_eq!(s.avg_scheduled(), 1.0);
    }

    #[test]
    fn tail_keeps_the_last_fifth() {
        let stats: Vec<_> = (0..10).map(EpisodeStats::new).collect();
        let t = tail(&stats, 0.2);
        assert_eq!(t.iter().map(|s| s.episode).collect::<Vec<_>>(), vec![8, 9]);
        assert_eq!(tail(&stats[..1], 0.2).len(), 1);
        assert!(tail(&[], 0.2).is_empty());
    }

    #[test]
    fn pooled_rate_weights_by_passes() {
        let mut a = EpisodeStats::new(0);
        a.passes[3] = 1;
        a.pushbacks[3] = 1;
        let mut b = EpisodeStats::new(1);
        b.passes[3] = 3;
        assert_eq!(pooled_pushback_rate(&[a, b], 6), 0.25);
    }

    #[test]
    fn header_and_row_agree() {
        let s = EpisodeStats::new(3);
        assert_eq!(stats_header().len(), stats_row(&s).len());
        assert_eq!(stats_header().len(), 3 + 40 + 4 + 4 + 7);
    }
}
