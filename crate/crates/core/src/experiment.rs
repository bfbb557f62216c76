//! Reproducible experiment runs driven by a TOML file.
//!
//! Every experiment is fully determined by its configuration and master
//! seed. Per-episode environments draw their seeds from the master seed and
//! the episode index only, so the agent and the baselines of one load band
//! see exactly the same arrivals.
//!
//! ```toml
//! experiment = "obj2"
//! seed = 7
//! episodes = 3000
//!
//! [[load_schedule]]
//! start = 0
//! end = 1000
//! load = [190, 210]
//! ```
//!
//! Unset fields take the preset of the chosen experiment.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{mean_scheduled, run_baseline, BaselineKind, BaselinePolicy};
use crate::calendar::{SlotMask, DURATIONS, SLOT_COUNT};
use crate::env::{read_replay, write_replay, ArrivalBatch, Environment, LoadBand, ParticipantProfile, UserDirectory};
use crate::error::{Error, Result};
use crate::gradcheck::GradCheckReport;
use crate::nn::Adam;
use crate::policy::PolicyParams;
use crate::slotmap::{
    generate_dataset, split_dataset, train_mapper, write_dataset, EpochMetrics, LossMode, MapperConfig,
    MapperModel, OutputMode, PhraseTable, Scores, Vocab, DATASET_SIZE, DEFAULT_FRAMES,
};
use crate::trainer::{
    pooled_pushback_rate, summed_asks, tail, write_stats_csv, Agent, EpisodeStats, EpisodeTiming, Experience,
    RewardMode, TrainerConfig,
};

/// Overrides `output_dir` when set.
pub const OUT_DIR_ENV: &str = "MEETSCHED_OUT_DIR";

/// Episodes averaged for the "before learning" reference point.
pub const EARLY_EPISODES: usize = 51;

const ENV_STREAM: u64 = 1;
const AGENT_STREAM: u64 = 2;
const BASELINE_STREAM: u64 = 3;
const DATASET_STREAM: u64 = 4;
const MAPPER_STREAM: u64 = 5;

/// Mixes a master seed with a stream tag and an index (splitmix64 finalizer).
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    let mut z = master
        ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15)
        ^ index.wrapping_add(1).wrapping_mul(0xc2b2_ae3d_27d4_eb4f);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Learning curve and pushbacks per load band, against the baselines.
    Obj1,
    /// Load switched during training.
    Obj2,
    /// Immediate rewards with uncomfortable slots.
    Obj3,
    /// Like obj3, with Senior initiators overriding discomfort.
    Obj4,
    /// Baselines only.
    Baselines,
    /// Dataset generation and slot-mapper training.
    Mapper,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Obj1 => "obj1",
            ExperimentKind::Obj2 => "obj2",
            ExperimentKind::Obj3 => "obj3",
            ExperimentKind::Obj4 => "obj4",
            ExperimentKind::Baselines => "baselines",
            ExperimentKind::Mapper => "mapper",
        }
    }
}

/// Arrival load for the episodes `start..end`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadPhase {
    pub start: usize,
    pub end: usize,
    pub load: [f64; 2],
}

/// Slots participants refuse during the episodes `start..end`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComfortPhase {
    pub start: usize,
    pub end: usize,
    pub slots: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub episodes: usize,
    pub output_dir: PathBuf,
    /// Load bands trained independently (obj1) or evaluated (baselines).
    pub load_bands: Vec<[f64; 2]>,
    /// Load over time for obj2, obj3 and obj4.
    pub load_schedule: Vec<LoadPhase>,
    pub uncomfortable_schedule: Vec<ComfortPhase>,
    pub senior_override: bool,
    pub baselines: Vec<BaselineKind>,
    /// Share of final episodes summarised as the converged behaviour.
    pub tail_fraction: f64,
    /// Episodes per row of the ask-count tables.
    pub window: usize,
    /// Take arrivals from this workload file instead of the generator.
    pub replay: Option<PathBuf>,
    /// Save the arrivals of the first episode of each agent run.
    pub record_replay: bool,
    pub trainer: TrainerConfig,
    pub mapper: MapperConfig,
    pub mapper_seeds: usize,
    pub mapper_losses: Vec<LossMode>,
}

/// What a config file may contain; anything left out comes from the preset.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: ExperimentKind,
    seed: Option<u64>,
    episodes: Option<usize>,
    output_dir: Option<PathBuf>,
    load_bands: Option<Vec<[f64; 2]>>,
    load_schedule: Option<Vec<LoadPhase>>,
    uncomfortable_schedule: Option<Vec<ComfortPhase>>,
    reward_mode: Option<RewardMode>,
    senior_override: Option<bool>,
    baselines: Option<Vec<BaselineKind>>,
    tail_fraction: Option<f64>,
    window: Option<usize>,
    replay: Option<PathBuf>,
    record_replay: Option<bool>,
    trainer: Option<TrainerConfig>,
    mapper: Option<MapperConfig>,
    mapper_seeds: Option<usize>,
    mapper_losses: Option<Vec<LossMode>>,
}

fn band(b: LoadBand) -> [f64; 2] {
    [b.low_pct, b.high_pct]
}

fn phase(start: usize, end: usize, b: LoadBand) -> LoadPhase {
    LoadPhase {
        start,
        end,
        load: band(b),
    }
}

const DEFAULT_UNCOMFORTABLE: [usize; 4] = [5, 14, 26, 35];
const SWITCHED_UNCOMFORTABLE: [usize; 2] = [2, 9];

impl ExperimentConfig {
    /// Defaults reproducing the named experiment.
    pub fn preset(kind: ExperimentKind) -> ExperimentConfig {
        let mut c = ExperimentConfig {
            experiment: kind,
            seed: 1,
            episodes: 1000,
            output_dir: PathBuf::from("out"),
            load_bands: Vec::new(),
            load_schedule: Vec::new(),
            uncomfortable_schedule: Vec::new(),
            senior_override: false,
            baselines: BaselineKind::ALL.to_vec(),
            tail_fraction: 0.2,
            window: 100,
            replay: None,
            record_replay: false,
            trainer: TrainerConfig::default(),
            mapper: MapperConfig::default(),
            mapper_seeds: 5,
            mapper_losses: vec![LossMode::Separate, LossMode::Shared],
        };
        match kind {
            ExperimentKind::Obj1 => {
                c.load_bands = vec![band(LoadBand::low()), band(LoadBand::medium()), band(LoadBand::high())];
            }
            ExperimentKind::Obj2 => {
                c.episodes = 3000;
                c.load_schedule = vec![
                    phase(0, 1000, LoadBand::high()),
                    phase(1000, 2000, LoadBand::low()),
                    phase(2000, 3000, LoadBand::high()),
                ];
            }
            ExperimentKind::Obj3 => {
                c.episodes = 2000;
                c.trainer.reward_mode = RewardMode::Immediate;
                c.load_schedule = vec![phase(0, 2000, LoadBand::high())];
                c.uncomfortable_schedule = vec![
                    ComfortPhase {
                        start: 0,
                        end: 1000,
                        slots: DEFAULT_UNCOMFORTABLE.to_vec(),
                    },
                    ComfortPhase {
                        start: 1000,
                        end: 2000,
                        slots: SWITCHED_UNCOMFORTABLE.to_vec(),
                    },
                ];
            }
            ExperimentKind::Obj4 => {
                c.trainer.reward_mode = RewardMode::Immediate;
                c.senior_override = true;
                c.load_schedule = vec![phase(0, 1000, LoadBand::high())];
                c.uncomfortable_schedule = vec![ComfortPhase {
                    start: 0,
                    end: 1000,
                    slots: DEFAULT_UNCOMFORTABLE.to_vec(),
                }];
            }
            ExperimentKind::Baselines => {
                c.episodes = 200;
                c.load_bands = vec![band(LoadBand::low()), band(LoadBand::medium()), band(LoadBand::high())];
            }
            ExperimentKind::Mapper => {
                c.episodes = 0;
            }
        }
        c
    }

    pub fn from_toml(text: &str) -> Result<ExperimentConfig> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut c = ExperimentConfig::preset(raw.experiment);
        let episodes_given = raw.episodes.is_some();
        c.seed = raw.seed.unwrap_or(c.seed);
        c.episodes = raw.episodes.unwrap_or(c.episodes);
        c.output_dir = raw.output_dir.unwrap_or(c.output_dir);
        c.load_bands = raw.load_bands.unwrap_or(c.load_bands);
        c.senior_override = raw.senior_override.unwrap_or(c.senior_override);
        c.baselines = raw.baselines.unwrap_or(c.baselines);
        c.tail_fraction = raw.tail_fraction.unwrap_or(c.tail_fraction);
        c.window = raw.window.unwrap_or(c.window);
        c.replay = raw.replay.or(c.replay);
        c.record_replay = raw.record_replay.unwrap_or(c.record_replay);
        c.mapper = raw.mapper.unwrap_or(c.mapper);
        c.mapper_seeds = raw.mapper_seeds.unwrap_or(c.mapper_seeds);
        c.mapper_losses = raw.mapper_losses.unwrap_or(c.mapper_losses);
        if let Some(t) = raw.trainer {
            // The preset's reward mode survives a [trainer] table that leaves it out.
            let mode = c.trainer.reward_mode;
            c.trainer = t;
            if !text_sets_trainer_reward_mode(text) {
                c.trainer.reward_mode = mode;
            }
        }
        if let Some(mode) = raw.reward_mode {
            c.trainer.reward_mode = mode;
        }
        match (raw.load_schedule, episodes_given) {
            (Some(s), _) => c.load_schedule = s,
            // A shorter or longer run stretches the preset's last phase.
            (None, true) => stretch(&mut c.load_schedule, c.episodes),
            (None, false) => {}
        }
        if let Some(s) = raw.uncomfortable_schedule {
            c.uncomfortable_schedule = s;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = fs::read_to_string(path)?;
        ExperimentConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment configs serialize")
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if !(self.tail_fraction > 0.0 && self.tail_fraction <= 1.0) {
            return err(format!("tail_fraction must lie in (0, 1], got {}", self.tail_fraction));
        }
        if self.window == 0 {
            return err("window must be positive".into());
        }
        for (i, b) in self.load_bands.iter().enumerate() {
            LoadBand::new(b[0], b[1]).map_err(|e| Error::Config(format!("load_bands[{i}]: {e}")))?;
        }
        let mut prev_end = 0;
        for (i, p) in self.load_schedule.iter().enumerate() {
            LoadBand::new(p.load[0], p.load[1]).map_err(|e| Error::Config(format!("load_schedule[{i}]: {e}")))?;
            if p.start != prev_end || p.end <= p.start {
                return err(format!(
                    "load_schedule[{i}]: phases must be ordered, contiguous and non-empty starting at episode 0 (got {}..{})",
                    p.start, p.end
                ));
            }
            prev_end = p.end;
        }
        let mut prev_end = 0;
        for (i, p) in self.uncomfortable_schedule.iter().enumerate() {
            if p.start < prev_end || p.end <= p.start {
                return err(format!(
                    "uncomfortable_schedule[{i}]: phases must be ordered, non-overlapping and non-empty (got {}..{})",
                    p.start, p.end
                ));
            }
            if let Some(s) = p.slots.iter().find(|&&s| s >= SLOT_COUNT) {
                return err(format!("uncomfortable_schedule[{i}]: slot {s} is outside 0..{SLOT_COUNT}"));
            }
            prev_end = p.end;
        }
        match self.experiment {
            ExperimentKind::Obj1 | ExperimentKind::Baselines => {
                if self.load_bands.is_empty() {
                    return err("load_bands must not be empty".into());
                }
                if self.experiment == ExperimentKind::Baselines && self.baselines.is_empty() {
                    return err("baselines must not be empty".into());
                }
            }
            ExperimentKind::Obj2 | ExperimentKind::Obj3 | ExperimentKind::Obj4 => {
                if self.replay.is_none() && self.load_schedule.last().map(|p| p.end) != Some(self.episodes) {
                    return err(format!("load_schedule must cover episodes 0..{}", self.episodes));
                }
            }
            ExperimentKind::Mapper => {
                if self.mapper_seeds == 0 || self.mapper_losses.is_empty() {
                    return err("mapper_seeds and mapper_losses must be non-empty".into());
                }
            }
        }
        if self.experiment != ExperimentKind::Mapper && self.episodes == 0 {
            return err("episodes must be positive".into());
        }
        Ok(())
    }

    /// The output directory, unless `override_dir` (normally the value of
    /// [`OUT_DIR_ENV`]) replaces it.
    pub fn resolved_output_dir(&self, override_dir: Option<&Path>) -> PathBuf {
        match override_dir {
            Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
            _ => self.output_dir.clone(),
        }
    }

    pub fn load_at(&self, episode: usize) -> LoadBand {
        self.load_schedule
            .iter()
            .find(|p| (p.start..p.end).contains(&episode))
            .or(self.load_schedule.last())
            .map(|p| LoadBand {
                low_pct: p.load[0],
                high_pct: p.load[1],
            })
            .unwrap_or(LoadBand::ZERO)
    }

    pub fn uncomfortable_at(&self, episode: usize) -> SlotMask {
        self.uncomfortable_schedule
            .iter()
            .find(|p| (p.start..p.end).contains(&episode))
            .map(|p| SlotMask::from_slots(p.slots.iter().copied()).expect("validated slot sets"))
            .unwrap_or_else(SlotMask::empty)
    }

    fn profile_at(&self, episode: usize) -> ParticipantProfile {
        ParticipantProfile {
            uncomfortable: self.uncomfortable_at(episode),
            senior_override: self.senior_override,
            random_reject: 0.0,
        }
    }

    fn timing(&self) -> EpisodeTiming {
        EpisodeTiming {
            arrival_timesteps: self.trainer.arrival_timesteps,
            drain_cap: self.trainer.drain_cap,
        }
    }
}

fn text_sets_trainer_reward_mode(text: &str) -> bool {
    let Ok(value) = text.parse::<toml::Table>() else {
        return false;
    };
    value
        .get("trainer")
        .and_then(|t| t.as_table())
        .is_some_and(|t| t.contains_key("reward_mode"))
}

fn stretch(schedule: &mut Vec<LoadPhase>, episodes: usize) {
    schedule.retain(|p| p.start < episodes);
    if let Some(last) = schedule.last_mut() {
        last.end = episodes;
    }
}

/// Episode statistics of one policy in one setting.
#[derive(Clone, Debug)]
pub struct PolicyRun {
    /// `agent` or a baseline label.
    pub policy: String,
    /// Load band label, or `schedule` when the load varies.
    pub setting: String,
    pub stats: Vec<EpisodeStats>,
}

#[derive(Clone, Debug)]
pub struct MapperResult {
    pub seed_index: usize,
    pub loss: LossMode,
    pub validation: Scores,
    pub test: Scores,
    pub best_epoch: usize,
    pub history: Vec<EpochMetrics>,
}

#[derive(Clone, Debug, Default)]
pub struct ExperimentReport {
    pub runs: Vec<PolicyRun>,
    pub mapper: Vec<MapperResult>,
    pub files: Vec<PathBuf>,
}

impl ExperimentReport {
    pub fn run(&self, policy: &str, setting: &str) -> Option<&PolicyRun> {
        self.runs.iter().find(|r| r.policy == policy && r.setting == setting)
    }
}

struct Output {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Output {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        let file = File::create(&path)?;
        self.files.push(path);
        Ok(BufWriter::new(file))
    }

    fn csv(&mut self, name: &str) -> Result<csv::Writer<BufWriter<File>>> {
        Ok(csv::Writer::from_writer(self.create(name)?))
    }
}

/// Runs `config` and writes its CSV files into `out_dir`.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentReport> {
    config.validate()?;
    fs::create_dir_all(out_dir)?;
    let mut out = Output {
        dir: out_dir.to_path_buf(),
        files: Vec::new(),
    };
    let name = config.experiment.name();
    write!(out.create(&format!("{name}_config.toml"))?, "{}", config.to_toml())?;
    write!(out.create("COLUMNS.txt")?, "{COLUMN_LEGEND}")?;
    let replay = match &config.replay {
        Some(path) => Some(read_replay(BufReader::new(File::open(path)?))?),
        None => None,
    };

    let mut report = ExperimentReport::default();
    match config.experiment {
        ExperimentKind::Obj1 => run_obj1(config, replay.as_deref(), &mut out, &mut report)?,
        ExperimentKind::Obj2 | ExperimentKind::Obj3 | ExperimentKind::Obj4 => {
            run_scheduled(config, replay.as_deref(), &mut out, &mut report)?
        }
        ExperimentKind::Baselines => run_baselines(config, replay.as_deref(), &mut out, &mut report)?,
        ExperimentKind::Mapper => run_mapper(config, &mut out, &mut report)?,
    }
    report.files = out.files;
    Ok(report)
}

fn environment(
    config: &ExperimentConfig,
    replay: Option<&[ArrivalBatch]>,
    load: LoadBand,
    stream: u64,
    episode: usize,
) -> Environment {
    let seed = derive_seed(config.seed, ENV_STREAM + 16 * stream, episode as u64);
    let profile = config.profile_at(episode);
    match replay {
        Some(batches) => Environment::from_replay(batches.to_vec(), profile, seed),
        None => Environment::new(load, profile, seed),
    }
}

fn train_agent<F>(
    config: &ExperimentConfig,
    run: u64,
    out: &mut Output,
    prefix: &str,
    mut make_env: F,
) -> Result<Vec<EpisodeStats>>
where
    F: FnMut(usize) -> Environment,
{
    let params = PolicyParams::init(derive_seed(config.seed, AGENT_STREAM, 2 * run));
    let mut agent = Agent::new(params, config.trainer, derive_seed(config.seed, AGENT_STREAM, 2 * run + 1));
    let mut stats = Vec::with_capacity(config.episodes);
    for e in 0..config.episodes {
        let mut env = make_env(e);
        let record = config.record_replay && e == 0;
        if record {
            env.record_arrivals();
        }
        stats.push(agent.run_episode(&mut env, e, true)?);
        if record {
            let log = env.arrival_log().unwrap_or_default();
            write_replay(out.create(&format!("{prefix}_episode0.replay"))?, log)?;
        }
    }
    agent.params.save(out.create(&format!("{prefix}_policy.ckpt"))?)?;
    write_stats_csv(out.create(&format!("{prefix}.csv"))?, &stats)?;
    Ok(stats)
}

fn baseline_runs(
    config: &ExperimentConfig,
    replay: Option<&[ArrivalBatch]>,
    band_index: usize,
    load: LoadBand,
    out: &mut Output,
    prefix: &str,
    report: &mut ExperimentReport,
) -> Result<()> {
    for (k, kind) in config.baselines.iter().enumerate() {
        let mut policy = BaselinePolicy::new(*kind, derive_seed(config.seed, BASELINE_STREAM, k as u64));
        let stats = run_baseline(
            &mut policy,
            |e| environment(config, replay, load, band_index as u64, e),
            config.episodes,
            config.timing(),
        );
        write_stats_csv(out.create(&format!("{prefix}_{}_{}.csv", kind.label(), load.label()))?, &stats)?;
        report.runs.push(PolicyRun {
            policy: kind.label().to_string(),
            setting: load.label(),
            stats,
        });
    }
    Ok(())
}

fn run_obj1(
    config: &ExperimentConfig,
    replay: Option<&[ArrivalBatch]>,
    out: &mut Output,
    report: &mut ExperimentReport,
) -> Result<()> {
    for (i, b) in config.load_bands.iter().enumerate() {
        let load = LoadBand::new(b[0], b[1])?;
        let stats = train_agent(config, i as u64, out, &format!("obj1_agent_{}", load.label()), |e| {
            environment(config, replay, load, i as u64, e)
        })?;
        report.runs.push(PolicyRun {
            policy: "agent".into(),
            setting: load.label(),
            stats,
        });
        baseline_runs(config, replay, i, load, out, "obj1", report)?;
    }
    write_summary(config, out, "obj1_summary.csv", report)?;

    let mut w = out.csv("obj1_pushback.csv")?;
    w.write_record(["load", "duration", "pushbacks", "passes", "rate"])?;
    for run in report.runs.iter().filter(|r| r.policy == "agent") {
        let t = tail(&run.stats, config.tail_fraction);
        for d in DURATIONS {
            let c = crate::calendar::duration_class(d);
            let pushbacks: u64 = t.iter().map(|s| u64::from(s.pushbacks[c])).sum();
            let passes: u64 = t.iter().map(|s| u64::from(s.passes[c])).sum();
            w.write_record([
                run.setting.clone(),
                d.to_string(),
                pushbacks.to_string(),
                passes.to_string(),
                format!("{:.6}", pooled_pushback_rate(t, d)),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_summary(config: &ExperimentConfig, out: &mut Output, name: &str, report: &ExperimentReport) -> Result<()> {
    let mut w = out.csv(name)?;
    w.write_record(["policy", "load", "episodes", "early_mean", "tail_mean"])?;
    for run in &report.runs {
        let early = &run.stats[..run.stats.len().min(EARLY_EPISODES)];
        w.write_record([
            run.policy.clone(),
            run.setting.clone(),
            run.stats.len().to_string(),
            format!("{:.6}", mean_scheduled(early)),
            format!("{:.6}", mean_scheduled(tail(&run.stats, config.tail_fraction))),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn run_scheduled(
    config: &ExperimentConfig,
    replay: Option<&[ArrivalBatch]>,
    out: &mut Output,
    report: &mut ExperimentReport,
) -> Result<()> {
    let name = config.experiment.name();
    let stats = train_agent(config, 0, out, &format!("{name}_curve"), |e| {
        environment(config, replay, config.load_at(e), 0, e)
    })?;
    match config.experiment {
        ExperimentKind::Obj2 => {
            let mut w = out.csv("obj2_phases.csv")?;
            w.write_record(["start", "end", "load", "first_100_mean", "tail_mean"])?;
            for p in &config.load_schedule {
                let phase = &stats[p.start.min(stats.len())..p.end.min(stats.len())];
                let head = &phase[..phase.len().min(100)];
                w.write_record([
                    p.start.to_string(),
                    p.end.to_string(),
                    format!("{}-{}", p.load[0], p.load[1]),
                    format!("{:.6}", mean_scheduled(head)),
                    format!("{:.6}", mean_scheduled(tail(phase, config.tail_fraction))),
                ])?;
            }
            w.flush()?;
        }
        ExperimentKind::Obj3 => write_window_asks(out.csv("obj3_asks.csv")?, &stats, config.window, false)?,
        ExperimentKind::Obj4 => write_window_asks(out.csv("obj4_asks.csv")?, &stats, config.window, true)?,
        _ => unreachable!("only scheduled experiments get here"),
    }
    report.runs.push(PolicyRun {
        policy: "agent".into(),
        setting: "schedule".into(),
        stats,
    });
    Ok(())
}

/// One row per window of episodes with the summed per-slot asks; split by
/// initiator designation when `by_designation` is set.
fn write_window_asks<W: Write>(
    mut w: csv::Writer<W>,
    stats: &[EpisodeStats],
    window: usize,
    by_designation: bool,
) -> Result<()> {
    let mut header = vec!["window_start".to_string(), "window_end".to_string()];
    if by_designation {
        header.push("designation".into());
    }
    header.extend((0..SLOT_COUNT).map(|s| format!("ask_{s}")));
    w.write_record(&header)?;
    for chunk in stats.chunks(window) {
        let asks = summed_asks(chunk);
        let start = chunk[0].episode.to_string();
        let end = (chunk[chunk.len() - 1].episode + 1).to_string();
        let rows: Vec<(Option<&str>, [u64; SLOT_COUNT])> = if by_designation {
            crate::calendar::Designation::ALL
                .iter()
                .map(|d| (Some(d.as_str()), asks[d.index()]))
                .collect()
        } else {
            let mut total = [0; SLOT_COUNT];
            for row in &asks {
                for (t, v) in total.iter_mut().zip(row) {
                    *t += v;
                }
            }
            vec![(None, total)]
        };
        for (d, counts) in rows {
            let mut row = vec![start.clone(), end.clone()];
            row.extend(d.map(str::to_string));
            row.extend(counts.iter().map(u64::to_string));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn run_baselines(
    config: &ExperimentConfig,
    replay: Option<&[ArrivalBatch]>,
    out: &mut Output,
    report: &mut ExperimentReport,
) -> Result<()> {
    for (i, b) in config.load_bands.iter().enumerate() {
        baseline_runs(config, replay, i, LoadBand::new(b[0], b[1])?, out, "baselines", report)?;
    }
    write_summary(config, out, "baselines_summary.csv", report)
}

fn run_mapper(config: &ExperimentConfig, out: &mut Output, report: &mut ExperimentReport) -> Result<()> {
    let table = PhraseTable::default();
    let directory = UserDirectory::default();
    let mut metrics = out.csv("mapper_metrics.csv")?;
    metrics.write_record([
        "seed_index", "loss", "split", "precision", "recall", "f1", "true_positives", "false_positives",
        "false_negatives", "best_epoch",
    ])?;
    let mut history = out.csv("mapper_history.csv")?;
    history.write_record(["seed_index", "loss", "epoch", "train_loss", "validation_f1"])?;
    for k in 0..config.mapper_seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, DATASET_STREAM, k as u64));
        let data = generate_dataset(&table, &DEFAULT_FRAMES, &directory, DATASET_SIZE, &mut rng)?;
        if k == 0 {
            write_dataset(out.create("mapper_dataset.tsv")?, &data)?;
        }
        let split = split_dataset(data);
        for &loss in &config.mapper_losses {
            let cfg = MapperConfig { loss, ..config.mapper };
            let trained = train_mapper(
                &split.train,
                &split.validation,
                &cfg,
                derive_seed(config.seed, MAPPER_STREAM, k as u64),
            )?;
            let validation = trained.model.evaluate(&split.validation);
            let test = trained.model.evaluate(&split.test);
            for (name, s) in [("validation", &validation), ("test", &test)] {
                metrics.write_record([
                    k.to_string(),
                    loss_label(loss).to_string(),
                    name.to_string(),
                    format!("{:.6}", s.precision),
                    format!("{:.6}", s.recall),
                    format!("{:.6}", s.f1),
                    s.true_positives.to_string(),
                    s.false_positives.to_string(),
                    s.false_negatives.to_string(),
                    trained.best_epoch.to_string(),
                ])?;
            }
            for h in &trained.history {
                history.write_record([
                    k.to_string(),
                    loss_label(loss).to_string(),
                    h.epoch.to_string(),
                    format!("{:.6}", h.train_loss),
                    format!("{:.6}", h.validation.f1),
                ])?;
            }
            if k == 0 {
                trained
                    .model
                    .save(out.create(&format!("mapper_{}.ckpt", loss_label(loss)))?)?;
            }
            report.mapper.push(MapperResult {
                seed_index: k,
                loss,
                validation,
                test,
                best_epoch: trained.best_epoch,
                history: trained.history,
            });
        }
    }
    metrics.flush()?;
    history.flush()?;
    Ok(())
}

fn loss_label(loss: LossMode) -> &'static str {
    match loss {
        LossMode::Separate => "separate",
        LossMode::Shared => "shared",
    }
}

/// Largest acceptable relative error between backprop and finite differences.
pub const GRAD_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct GradCheckRow {
    pub network: String,
    pub stage: String,
    pub report: GradCheckReport,
}

impl GradCheckRow {
    pub fn passed(&self, samples: usize) -> bool {
        self.report.checked >= samples && self.report.max_relative_error < GRAD_TOLERANCE
    }
}

fn collect_experiences(agent: &mut Agent, env: &mut Environment, at_least: usize) -> Vec<Experience> {
    let mut batch = Vec::new();
    while batch.len() < at_least {
        batch.extend(agent.run_timestep(env, 0).0);
    }
    batch
}

/// Backprop against central differences for the policy and the mapper
/// variants, each at initialisation and after `updates` optimiser steps.
/// Parameters are drawn among those the checked batch can influence.
pub fn grad_check_suite(seed: u64, samples: usize, updates: usize) -> Result<Vec<GradCheckRow>> {
    let mut rows = Vec::new();
    let mut push = |network: &str, stage: &str, report: GradCheckReport| {
        rows.push(GradCheckRow {
            network: network.to_string(),
            stage: stage.to_string(),
            report,
        })
    };
    let after = format!("after {updates} updates");

    // Real states from the simulator, with both reward kinds in play.
    let config = TrainerConfig {
        reward_mode: RewardMode::Combined,
        ..TrainerConfig::default()
    };
    let mut agent = Agent::new(
        PolicyParams::init(derive_seed(seed, AGENT_STREAM, 0)),
        config,
        derive_seed(seed, AGENT_STREAM, 1),
    );
    let profile = ParticipantProfile::with_uncomfortable(
        SlotMask::from_slots(DEFAULT_UNCOMFORTABLE).expect("slots are in range"),
    );
    let mut env = Environment::new(LoadBand::high(), profile, derive_seed(seed, ENV_STREAM, 0));
    env.admit_arrivals();
    let batch = collect_experiences(&mut agent, &mut env, 32);
    push("policy", "init", agent.params.gradient_check_active(&batch, samples, seed));
    let mut done = 0;
    while done < updates {
        let (experiences, _, _) = agent.run_timestep(&mut env, 0);
        if experiences.is_empty() {
            continue;
        }
        agent.params.reinforce_update(&experiences, config.learning_rate)?;
        done += 1;
    }
    let batch = collect_experiences(&mut agent, &mut env, 32);
    push("policy", &after, agent.params.gradient_check_active(&batch, samples, seed + 1));

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, DATASET_STREAM, 0));
    let data = generate_dataset(&PhraseTable::default(), &DEFAULT_FRAMES, &UserDirectory::default(), DATASET_SIZE, &mut rng)?;
    let split = split_dataset(data);
    let vocab = Vocab::build(split.train.iter().map(|s| s.sentence.as_str()));
    let variants = [
        (OutputMode::Sigmoid, LossMode::Separate, false),
        (OutputMode::Sigmoid, LossMode::Shared, false),
        (OutputMode::SoftmaxPairs, LossMode::Separate, false),
        (OutputMode::SoftmaxPairs, LossMode::Shared, false),
        (OutputMode::Sigmoid, LossMode::Separate, true),
    ];
    let batch = &split.train[..8];
    for (i, (output, loss, bidirectional)) in variants.into_iter().enumerate() {
        let cfg = MapperConfig {
            output,
            loss,
            bidirectional,
            ..MapperConfig::default()
        };
        let name = format!(
            "mapper {}/{}{}",
            match output {
                OutputMode::Sigmoid => "sigmoid",
                OutputMode::SoftmaxPairs => "softmax-pairs",
            },
            loss_label(loss),
            if bidirectional { "/bidirectional" } else { "" }
        );
        let mut model = MapperModel::init(vocab.clone(), cfg, derive_seed(seed, MAPPER_STREAM, i as u64));
        push(&name, "init", model.gradient_check_active(batch, samples, seed));
        let mut adam = Adam::new(model.parameters().len());
        let cycle = split.train.chunks(cfg.batch_size).cycle().take(updates);
        for b in cycle {
            model.train_step(&mut adam, b)?;
        }
        push(&name, &after, model.gradient_check_active(batch, samples, seed + 1));
    }
    Ok(rows)
}

const COLUMN_LEGEND: &str = "\
Per-episode statistics (obj1_agent_*.csv, obj1_<policy>_*.csv, obj2_curve.csv,
obj3_curve.csv, obj4_curve.csv, baselines_<policy>_*.csv):
  episode                    episode index
  avg_meetings_per_timestep  meetings booked per arrival timestep
  benchmark_hit_rate         share of arrival timesteps reaching the reward threshold
  ask_0 .. ask_39            requests covering each slot (agent's own choices only)
  pushback_1 .. pushback_6   meetings of that length returned to the backlog
  passes_1 .. passes_6       meetings of that length taken from the waiting queue
  arrived                    meetings that arrived during the episode
  scheduled                  bookings on arrival timesteps
  drained                    bookings after arrivals stopped
  rejected                   requests refused by participants (exploration included)
  exploratory_actions        decisions taken by the random branch
  drain_timesteps            timesteps spent draining the queues
  complete                   1 when the drain finished inside its cap

obj1_summary.csv, baselines_summary.csv:
  policy, load, episodes, early_mean (first 51 episodes), tail_mean (final share)

obj1_pushback.csv: load, duration, pushbacks, passes, rate over the final share

obj2_phases.csv: start, end, load, first_100_mean, tail_mean per load phase

obj3_asks.csv: window_start, window_end, ask_0 .. ask_39 summed over the window
obj4_asks.csv: as obj3_asks.csv with a designation column (junior, mid, senior)

mapper_metrics.csv: seed_index, loss, split, precision, recall, f1,
  true_positives, false_positives, false_negatives, best_epoch
mapper_history.csv: seed_index, loss, epoch, train_loss, validation_f1
";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for kind in [
            ExperimentKind::Obj1,
            ExperimentKind::Obj2,
            ExperimentKind::Obj3,
            ExperimentKind::Obj4,
            ExperimentKind::Baselines,
            ExperimentKind::Mapper,
        ] {
            ExperimentConfig::preset(kind).validate().unwrap();
        }
    }

    #[test]
    fn obj2_switches_at_1000_and_2000() {
        let c = ExperimentConfig::preset(ExperimentKind::Obj2);
        assert_eq!(c.load_at(999), LoadBand::high());
        assert_eq!(c.load_at(1000), LoadBand::low());
        assert_eq!(c.load_at(1999), LoadBand::low());
        assert_eq!(c.load_at(2000), LoadBand::high());
    }

    #[test]
    fn obj3_switches_uncomfortable_slots() {
        let c = ExperimentConfig::preset(ExperimentKind::Obj3);
        assert_eq!(c.uncomfortable_at(0).iter().collect::<Vec<_>>(), vec![5, 14, 26, 35]);
        assert_eq!(c.uncomfortable_at(1500).iter().collect::<Vec<_>>(), vec![2, 9]);
        assert_eq!(c.trainer.reward_mode, RewardMode::Immediate);
    }

    #[test]
    fn toml_overrides_the_preset() {
        let c = ExperimentConfig::from_toml(
            r#"
            experiment = "obj3"
            seed = 9
            episodes = 40
            [trainer]
            epsilon = 0.2
            "#,
        )
        .unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.load_schedule.last().unwrap().end, 40);
        assert_eq!(c.trainer.epsilon, 0.2);
        // The [trainer] table did not mention the reward mode.
        assert_eq!(c.trainer.reward_mode, RewardMode::Immediate);
        assert_eq!(c.uncomfortable_at(0).count(), 4);
    }

    #[test]
    fn config_round_trips_through_toml() {
        let c = ExperimentConfig::preset(ExperimentKind::Obj4);
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn invalid_fields_are_named() {
        let cases = [
            ("experiment = \"obj5\"", "experiment"),
            ("experiment = \"obj1\"\nepisodez = 3", "episodez"),
            ("experiment = \"obj1\"\ntail_fraction = 0.0", "tail_fraction"),
            (
                "experiment = \"obj3\"\n[[uncomfortable_schedule]]\nstart = 0\nend = 5\nslots = [40]",
                "uncomfortable_schedule",
            ),
            (
                "experiment = \"obj2\"\nepisodes = 10\n[[load_schedule]]\nstart = 2\nend = 10\nload = [1, 2]",
                "load_schedule",
            ),
            ("experiment = \"obj1\"\nload_bands = [[50, 10]]", "load_bands"),
        ];
        for (text, field) in cases {
            let e = ExperimentConfig::from_toml(text).unwrap_err().to_string();
            assert!(e.contains(field), "`{e}` should mention {field}");
        }
    }

    #[test]
    fn environment_overrides_output_dir() {
        let c = ExperimentConfig::preset(ExperimentKind::Obj1);
        assert_eq!(c.resolved_output_dir(None), PathBuf::from("out"));
        assert_eq!(c.resolved_output_dir(Some(Path::new("/tmp/x"))), PathBuf::from("/tmp/x"));
        assert_eq!(c.resolved_output_dir(Some(Path::new(""))), PathBuf::from("out"));
    }

    #[test]
    fn derived_seeds_differ_by_stream_and_index() {
        let a = derive_seed(1, ENV_STREAM, 0);
        assert_ne!(a, derive_seed(1, ENV_STREAM, 1));
        assert_ne!(a, derive_seed(1, AGENT_STREAM, 0));
        assert_ne!(a, derive_seed(2, ENV_STREAM, 0));
        assert_eq!(a, derive_seed(1, ENV_STREAM, 0));
    }

    #[test]
    fn gradient_suite_passes_on_small_budgets() {
        let rows = grad_check_suite(3, 40, 5).unwrap();
        assert_eq!(rows.len(), 12);
        for r in &rows {
            assert!(r.passed(40), "{} {}: {:?}", r.network, r.stage, r.report);
        }
    }

    #[test]
    fn ask_windows_sum_episodes() {
        let mut stats: Vec<EpisodeStats> = (0..5).map(EpisodeStats::new).collect();
        for s in &mut stats {
            s.asks[2][7] = 1;
            s.asks[0][7] = 2;
        }
        let mut buf = Vec::new();
        write_window_asks(csv::Writer::from_writer(&mut buf), &stats, 2, false).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,2,0,0,0,0,0,0,0,6,"));
        assert!(lines[3].starts_with("4,5,0,0,0,0,0,0,0,3,"));
    }
}
