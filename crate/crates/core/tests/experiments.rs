use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use meetsched::env::{read_replay, write_replay};
use meetsched::experiment::{run_experiment, ExperimentConfig, ExperimentKind};
use meetsched::policy::PolicyParams;
use meetsched::slotmap::{read_dataset, MapperModel, DATASET_SIZE};

fn small(kind: ExperimentKind, episodes: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::preset(kind);
    c.episodes = episodes;
    c.window = 5;
    let phases = c.load_schedule.len().max(1);
    for (i, p) in c.load_schedule.iter_mut().enumerate() {
        p.start = i * episodes / phases;
        p.end = (i + 1) * episodes / phases;
    }
    let phases = c.uncomfortable_schedule.len().max(1);
    for (i, p) in c.uncomfortable_schedule.iter_mut().enumerate() {
        p.start = i * episodes / phases;
        p.end = (i + 1) * episodes / phases;
    }
    c
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn find(files: &[PathBuf], name: &str) -> PathBuf {
    files
        .iter()
        .find(|f| f.file_name().unwrap() == name)
        .unwrap_or_else(|| panic!("{name} not written"))
        .clone()
}

#[test]
fn obj1_writes_per_band_stats_and_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&small(ExperimentKind::Obj1, 12), dir.path()).unwrap();
    for f in &report.files {
        assert!(f.exists(), "{}", f.display());
    }
    let (header, rows) = csv_rows(&find(&report.files, "obj1_agent_190-210.csv"));
    assert_eq!(&header[..3], ["episode", "avg_meetings_per_timestep", "benchmark_hit_rate"]);
    assert_eq!(rows.len(), 12);
    assert!(header.iter().any(|h| h == "ask_39"));

    let (header, rows) = csv_rows(&find(&report.files, "obj1_summary.csv"));
    assert_eq!(header, ["policy", "load", "episodes", "early_mean", "tail_mean"]);
    assert_eq!(rows.len(), 3 * 4);

    let (_, rows) = csv_rows(&find(&report.files, "obj1_pushback.csv"));
    assert_eq!(rows.len(), 3 * 4);
    for row in &rows {
        let rate: f64 = row[4].parse().unwrap();
        assert!((0.0..=1.0).contains(&rate) || rate.is_nan());
    }

    let ckpt = find(&report.files, "obj1_agent_190-210_policy.ckpt");
    PolicyParams::load(BufReader::new(File::open(ckpt).unwrap())).unwrap();
    assert!(dir.path().join("COLUMNS.txt").exists());
    assert!(dir.path().join("obj1_config.toml").exists());
}

#[test]
fn saved_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = small(ExperimentKind::Obj4, 6);
    run_experiment(&config, &dir.path().join("a")).unwrap();
    let saved = ExperimentConfig::load(&dir.path().join("a/obj4_config.toml")).unwrap();
    run_experiment(&saved, &dir.path().join("b")).unwrap();
    let a = fs::read(dir.path().join("a/obj4_curve.csv")).unwrap();
    let b = fs::read(dir.path().join("b/obj4_curve.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn recorded_workload_replays_through_the_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small(ExperimentKind::Obj3, 4);
    config.record_replay = true;
    let report = run_experiment(&config, &dir.path().join("rec")).unwrap();
    let recorded = report
        .files
        .iter()
        .find(|f| f.extension().is_some_and(|e| e == "replay"))
        .expect("replay file written")
        .clone();
    let batches = read_replay(BufReader::new(File::open(&recorded).unwrap())).unwrap();
    let arrivals: usize = batches.iter().map(|b| b.meetings.len()).sum();
    assert_eq!(arrivals as u64, report.run("agent", "schedule").unwrap().stats[0].arrived);

    let mut rewritten = Vec::new();
    write_replay(&mut rewritten, &batches).unwrap();
    assert_eq!(read_replay(&rewritten[..]).unwrap(), batches);

    config.record_replay = false;
    config.replay = Some(recorded);
    let replayed = run_experiment(&config, &dir.path().join("play")).unwrap();
    for s in &replayed.run("agent", "schedule").unwrap().stats {
        assert_eq!(s.arrived as usize, arrivals);
    }
}

#[test]
fn mapper_run_writes_dataset_metrics_and_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = ExperimentConfig::preset(ExperimentKind::Mapper);
    config.mapper_seeds = 1;
    config.mapper.max_epochs = 2;
    let report = run_experiment(&config, dir.path()).unwrap();
    assert_eq!(report.mapper.len(), 2);

    let data = read_dataset(BufReader::new(File::open(dir.path().join("mapper_dataset.tsv")).unwrap())).unwrap();
    assert_eq!(data.len(), DATASET_SIZE);

    let (header, rows) = csv_rows(&dir.path().join("mapper_metrics.csv"));
    assert_eq!(header[2], "split");
    // validation and test rows for each loss
    assert_eq!(rows.len(), 4);
    let (_, history) = csv_rows(&dir.path().join("mapper_history.csv"));
    assert!(!history.is_empty());
    for loss in ["separate", "shared"] {
        let path = dir.path().join(format!("mapper_{loss}.ckpt"));
        MapperModel::load(BufReader::new(File::open(path).unwrap())).unwrap();
    }
}

#[test]
fn baselines_summary_covers_every_band() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&small(ExperimentKind::Baselines, 5), dir.path()).unwrap();
    let (_, rows) = csv_rows(&dir.path().join("baselines_summary.csv"));
    assert_eq!(rows.len(), 3 * 3);
    assert_eq!(report.runs.len(), 9);
    assert!(report.runs.iter().all(|r| r.stats.len() == 5));
}
