//! Meeting arrivals: the load model, the random generator and the
//! line-oriented replay format.

use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::calendar::{Designation, Meeting, MeetingId, UserId, DURATIONS, SLOTS_PER_DAY};
use crate::error::{Error, Result};

/// Probability of each entry of [`DURATIONS`].
pub const DURATION_PROBS: [f64; 4] = [0.4, 0.2, 0.2, 0.2];

/// Initiator designation frequencies (junior, mid, senior).
pub const DESIGNATION_PROBS: [f64; 3] = [0.5, 0.3, 0.2];

pub const MIN_PARTICIPANTS: usize = 2;
pub const MAX_PARTICIPANTS: usize = 5;

/// Slots freed per timestep; load percentages are relative to this.
pub const CAPACITY_PER_TIMESTEP: f64 = SLOTS_PER_DAY as f64;

pub fn expected_slots_per_meeting() -> f64 {
    DURATIONS
        .iter()
        .zip(DURATION_PROBS.iter())
        .map(|(&d, &p)| d as f64 * p)
        .sum()
}

/// Number of meetings that make up `load_pct` percent of one timestep's capacity.
pub fn meetings_for_load(load_pct: f64) -> usize {
    (load_pct / 100.0 * CAPACITY_PER_TIMESTEP / expected_slots_per_meeting()).round() as usize
}

/// Arrival load as a percentage band of scheduling capacity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadBand {
    pub low_pct: f64,
    pub high_pct: f64,
}

impl LoadBand {
    pub fn new(low_pct: f64, high_pct: f64) -> Result<LoadBand> {
        if !(low_pct.is_finite() && high_pct.is_finite()) || low_pct < 0.0 || low_pct > high_pct {
            return Err(Error::Config(format!(
                "load band must satisfy 0 <= low <= high, got ({low_pct}, {high_pct})"
            )));
        }
        Ok(LoadBand { low_pct, high_pct })
    }

    pub const ZERO: LoadBand = LoadBand {
        low_pct: 0.0,
        high_pct: 0.0,
    };

    pub fn low() -> LoadBand {
        LoadBand {
            low_pct: 30.0,
            high_pct: 70.0,
        }
    }

    pub fn medium() -> LoadBand {
        LoadBand {
            low_pct: 140.0,
            high_pct: 160.0,
        }
    }

    pub fn high() -> LoadBand {
        LoadBand {
            low_pct: 190.0,
            high_pct: 210.0,
        }
    }

    pub fn label(&self) -> String {
        format!("{}-{}", self.low_pct, self.high_pct)
    }
}

/// People known to the scheduler.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UserDirectory {
    names: Vec<String>,
}

impl UserDirectory {
    pub fn new(names: Vec<String>) -> UserDirectory {
        assert!(
            names.len() >= MAX_PARTICIPANTS,
            "directory needs at least {MAX_PARTICIPANTS} users"
        );
        UserDirectory { names }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, id: UserId) -> Option<&str> {
        self.names.get(id.0 as usize).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (UserId, &str)> {
        self.names
            .iter()
            .enumerate()
            .map(|(i, n)| (UserId(i as u32), n.as_str()))
    }
}

impl Default for UserDirectory {
    fn default() -> Self {
        let names = [
            "Gautam", "Puneet", "Lovekesh", "Vishwanath", "Asha", "Rahul", "Meera", "Kiran",
            "Anil", "Priya", "Sanjay", "Divya", "Arjun", "Neha", "Vikram", "Pooja",
        ];
        UserDirectory::new(names.iter().map(|s| s.to_string()).collect())
    }
}

fn sample_weighted<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Produces fresh meetings with unique ids.
#[derive(Clone, Debug)]
pub struct WorkloadGenerator {
    directory_size: usize,
    next_id: u64,
}

impl WorkloadGenerator {
    pub fn new(directory_size: usize) -> WorkloadGenerator {
        assert!(directory_size >= MAX_PARTICIPANTS);
        WorkloadGenerator {
            directory_size,
            next_id: 0,
        }
    }

    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    /// Draws one timestep's arrivals for `band`.
    pub fn sample_arrivals<R: Rng + ?Sized>(
        &mut self,
        band: LoadBand,
        rng: &mut R,
        timestep: u64,
    ) -> Vec<Meeting> {
        let load = if band.high_pct > band.low_pct {
            rng.gen_range(band.low_pct..=band.high_pct)
        } else {
            band.low_pct
        };
        let n = meetings_for_load(load);
        (0..n).map(|_| self.sample_meeting(rng, timestep)).collect()
    }

    pub fn sample_meeting<R: Rng + ?Sized>(&mut self, rng: &mut R, timestep: u64) -> Meeting {
        let duration = DURATIONS[sample_weighted(rng, &DURATION_PROBS)];
        let count = rng.gen_range(MIN_PARTICIPANTS..=MAX_PARTICIPANTS);
        let participants: Vec<UserId> = sample(rng, self.directory_size, count)
            .into_iter()
            .map(|i| UserId(i as u32))
            .collect();
        let initiator = UserId(rng.gen_range(0..self.directory_size) as u32);
        let designation = Designation::ALL[sample_weighted(rng, &DESIGNATION_PROBS)];
        let id = MeetingId(self.next_id);
        self.next_id += 1;
        Meeting::new(id, duration, participants, initiator, designation, timestep)
            .expect("generated meetings are valid")
    }
}

/// Arrivals of one timestep, as recorded in a replay file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArrivalBatch {
    pub timestep: u64,
    pub meetings: Vec<Meeting>,
}

/// Writes arrivals as `timestep id duration initiator designation p1,p2,...`,
/// one meeting per line.
pub fn write_replay<W: Write>(mut out: W, batches: &[ArrivalBatch]) -> io::Result<()> {
    writeln!(out, "# timestep meeting_id duration initiator designation participants")?;
    for batch in batches {
        for m in &batch.meetings {
            let mut participants = String::new();
            for (i, p) in m.participants.iter().enumerate() {
                if i > 0 {
                    participants.push(',');
                }
                let _ = write!(participants, "{p}");
            }
            writeln!(
                out,
                "{} {} {} {} {} {}",
                batch.timestep,
                m.id,
                m.duration,
                m.initiator,
                m.designation.as_str(),
                participants
            )?;
        }
    }
    Ok(())
}

pub fn read_replay<R: BufRead>(input: R) -> Result<Vec<ArrivalBatch>> {
    let mut batches: Vec<ArrivalBatch> = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |what: &str| Error::Parse {
            line: lineno + 1,
            message: format!("{what} in `{line}`"),
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(bad("expected 6 fields"));
        }
        let timestep: u64 = fields[0].parse().map_err(|_| bad("bad timestep"))?;
        let id: u64 = fields[1].parse().map_err(|_| bad("bad meeting id"))?;
        let duration: usize = fields[2].parse().map_err(|_| bad("bad duration"))?;
        let initiator: u32 = fields[3].parse().map_err(|_| bad("bad initiator"))?;
        let designation = Designation::parse(fields[4]).ok_or_else(|| bad("bad designation"))?;
        let participants = fields[5]
            .split(',')
            .map(|p| p.parse::<u32>().map(UserId))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| bad("bad participant list"))?;
        let meeting = Meeting::new(
            MeetingId(id),
            duration,
            participants,
            UserId(initiator),
            designation,
            timestep,
        )
        .map_err(|e| bad(&e.to_string()))?;
        match batches.last_mut() {
            Some(b) if b.timestep == timestep => b.meetings.push(meeting),
            Some(b) if b.timestep > timestep => return Err(bad("timesteps must not decrease")),
            _ => batches.push(ArrivalBatch {
                timestep,
                meetings: vec![meeting],
            }),
        }
    }
    Ok(batches)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn expected_meeting_length_is_2_8() {
        assert!((expected_slots_per_meeting() - 2.8).abs() < 1e-12);
    }

    #[test]
    fn two_hundred_percent_is_six_meetings() {
        assert_eq!(meetings_for_load(200.0), 6);
        assert_eq!(meetings_for_load(0.0), 0);
    }

    #[test]
    fn zero_band_yields_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut gen = WorkloadGenerator::new(16);
        assert!(gen.sample_arrivals(LoadBand::ZERO, &mut rng, 0).is_empty());
    }

    #[test]
    fn band_validation() {
        assert!(LoadBand::new(70.0, 30.0).is_err());
        assert!(LoadBand::new(-1.0, 30.0).is_err());
        assert!(LoadBand::new(30.0, 70.0).is_ok());
    }

    #[test]
    fn sampled_meetings_follow_the_mix() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut gen = WorkloadGenerator::new(16);
        let mut by_duration = [0usize; 4];
        let mut senior = 0usize;
        let n = 20_000;
        for _ in 0..n {
            let m = gen.sample_meeting(&mut rng, 0);
            by_duration[m.duration_class()] += 1;
            if m.designation == Designation::Senior {
                senior += 1;
            }
            assert!((2..=5).contains(&m.participants.len()));
            assert!(m.participants.iter().all(|p| (p.0 as usize) < 16));
        }
        for (count, p) in by_duration.iter().zip(DURATION_PROBS) {
            assert!((*count as f64 / n as f64 - p).abs() < 0.02);
        }
        assert!((senior as f64 / n as f64 - 0.2).abs() < 0.02);
        assert_eq!(gen.next_id(), n as u64);
    }

    #[test]
    fn high_band_emits_about_six_per_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut gen = WorkloadGenerator::new(16);
        for t in 0..100 {
            let n = gen.sample_arrivals(LoadBand::high(), &mut rng, t).len();
            assert!((5..=6).contains(&n), "{n}");
        }
    }

    #[test]
    fn replay_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut gen = WorkloadGenerator::new(16);
        let batches: Vec<ArrivalBatch> = (0..5)
            .map(|t| ArrivalBatch {
                timestep: t,
                meetings: gen.sample_arrivals(LoadBand::high(), &mut rng, t),
            })
            .collect();
        let mut buf = Vec::new();
        write_replay(&mut buf, &batches).unwrap();
        assert_eq!(read_replay(&buf[..]).unwrap(), batches);
    }

    #[test]
    fn replay_errors_carry_line_numbers() {
        let text = "# header\n0 1 3 0 junior 1,2\n";
        match read_replay(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
