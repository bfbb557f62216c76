use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use meetsched::nn::Adam;
use meetsched::slotmap::{rule_map, LabeledSample, MapperConfig, MapperModel, PhraseTable, Vocab};

const SENTENCE: &str = "schedule a meeting with Gautam for Wednesday afternoon";

fn meetsched() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_meetsched"));
    c.env_remove("MEETSCHED_OUT_DIR");
    c
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn with_stdin(mut cmd: Command, input: &str) -> Output {
    let mut child = cmd
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

/// A mapper that has memorised one sentence.
fn tiny_mapper(dir: &Path) -> PathBuf {
    let label = rule_map(&PhraseTable::default(), SENTENCE);
    let sample = LabeledSample {
        sentence: SENTENCE.to_string(),
        label,
    };
    let config = MapperConfig {
        hidden: 8,
        dense: 8,
        ..MapperConfig::default()
    };
    let mut model = MapperModel::init(Vocab::build([SENTENCE.to_lowercase().as_str()]), config, 3);
    let mut adam = Adam::new(model.parameters().len());
    for _ in 0..400 {
        model.train_step(&mut adam, std::slice::from_ref(&sample)).unwrap();
    }
    assert_eq!(model.predict_slots(SENTENCE), label);
    let path = dir.join("tiny.ckpt");
    model.save(BufWriter::new(File::create(&path).unwrap())).unwrap();
    path
}

#[test]
fn gen_dataset_writes_the_requested_size() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("data.tsv");
    let o = meetsched()
        .args(["gen-dataset", "--size", "40", "--seed", "3"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().filter(|l| !l.is_empty()).count(), 40);
    for line in text.lines() {
        let (_, label) = line.split_once('\t').expect("tab-separated");
        assert_eq!(label.len(), 40);
        assert!(label.chars().all(|c| c == '0' || c == '1'));
    }
}

#[test]
fn run_honours_the_output_directory_override() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("tiny.toml");
    fs::write(
        &config,
        "experiment = \"baselines\"\nepisodes = 3\nwindow = 2\noutput_dir = \"never-used\"\n",
    )
    .unwrap();
    let out = dir.path().join("elsewhere");
    let o = meetsched()
        .current_dir(dir.path())
        .arg("run")
        .arg(&config)
        .env("MEETSCHED_OUT_DIR", &out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("baselines_summary.csv").exists());
    assert!(!dir.path().join("never-used").exists());
    assert!(stdout(&o).contains("baselines_summary.csv"));
}

#[test]
fn run_reports_bad_configs() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "experiment = \"obj1\"\ntail_fraction = 2.0\n").unwrap();
    let o = meetsched().arg("run").arg(&config).output().unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("tail_fraction"));
}

#[test]
fn grad_check_prints_a_table() {
    let o = meetsched()
        .args(["grad-check", "--samples", "10", "--updates", "2"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.contains("max rel err"));
    assert!(text.contains("all checks below"));
}

#[test]
fn repl_books_a_meeting_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let mapper = tiny_mapper(dir.path());
    let mut cmd = meetsched();
    cmd.arg("repl").arg(&mapper);
    let o = with_stdin(cmd, &format!("{SENTENCE}\nmaybe\nyes\ncalendar\nquit\n"));
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("Asking Gautam"), "{text}");
    assert!(text.contains("Please answer yes or no."), "{text}");
    assert!(text.contains("Booked with Gautam on Wednesday 13:00-14:00"), "{text}");
    assert!(text.contains("meeting 0:"), "{text}");
}

#[test]
fn repl_asks_for_missing_details_and_stops_at_eof() {
    let dir = tempfile::tempdir().unwrap();
    let mapper = tiny_mapper(dir.path());
    let mut cmd = meetsched();
    cmd.arg("repl").arg(&mapper).arg("--simulate");
    let o = with_stdin(cmd, "schedule a meeting for Wednesday afternoon\nbacklog\n");
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("Who should attend?"), "{text}");
    assert!(text.contains("0 meeting(s) in the backlog."), "{text}");
}

#[test]
fn repl_rejects_unknown_initiators() {
    let dir = tempfile::tempdir().unwrap();
    let mapper = tiny_mapper(dir.path());
    let o = meetsched()
        .arg("repl")
        .arg(&mapper)
        .args(["--initiator", "Nobody"])
        .stdin(Stdio::null())
        .output()
        .unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown initiator"));
}
