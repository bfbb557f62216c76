use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng;

use super::phrases::{oracle_map, PhraseTable};
use crate::calendar::{SlotMask, SLOT_COUNT};
use crate::env::UserDirectory;
use crate::error::{Error, Result};

pub const DATASET_SIZE: usize = 1056;

/// Request templates; `{name}` is a directory user and `{when}` the time expression.
pub const DEFAULT_FRAMES: [&str; 8] = [
    "please schedule a meeting with {name} for {when}",
    "schedule a meeting with {name} on {when}",
    "can you set up a call with {name} {when}",
    "i want to meet {name} {when}",
    "book a slot with {name} on {when}",
    "let us catch up with {name} {when}",
    "arrange a discussion with {name} for {when}",
    "{when} works for a sync with {name}",
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledSample {
    pub sentence: String,
    pub label: SlotMask,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<LabeledSample>,
    pub validation: Vec<LabeledSample>,
    pub test: Vec<LabeledSample>,
}

/// Share of each kind of time expression in the generated set.
#[derive(Clone, Copy, Debug)]
struct Mix {
    single: f64,
    day_only: f64,
    multi_day: f64,
}

const MIX: Mix = Mix {
    single: 0.57,
    day_only: 0.04,
    multi_day: 0.22,
};

fn fill(frame: &str, name: &str, when: &str) -> String {
    frame.replace("{name}", name).replace("{when}", when)
}

/// All time expressions of one kind, with their labels.
fn expressions(table: &PhraseTable) -> Result<[Vec<(String, SlotMask)>; 4]> {
    let days = table.day_names();
    let phrases: Vec<&str> = table.phrase_names().collect();
    let mut single = Vec::new();
    let mut day_only = Vec::new();
    let mut multi = Vec::new();
    let mut exclusion = Vec::new();
    for &d in &days {
        let whole = SlotMask::day(table.day_index(d)?);
        day_only.push((d.to_string(), whole));
        for &p in &phrases {
            let m = oracle_map(table, d, p)?;
            single.push((format!("{d} {p}"), m));
            single.push((format!("{p} on {d}"), m));
            exclusion.push((format!("{d} but not {p}"), whole.difference(m)));
            exclusion.push((format!("any time on {d} except {p}"), whole.difference(m)));
        }
        for &e in &days {
            if e == d {
                continue;
            }
            let other = SlotMask::day(table.day_index(e)?);
            for &p in &phrases {
                let m = oracle_map(table, d, p)?.union(oracle_map(table, e, p)?);
                multi.push((format!("{d} or {e} {p}"), m));
                exclusion.push((format!("{d} or {e} but avoid {p}"), whole.union(other).difference(m)));
            }
        }
    }
    exclusion.retain(|(_, m)| !m.is_empty());
    Ok([single, day_only, multi, exclusion])
}

/// Builds the template dataset: frames crossed with time expressions,
/// drawn per kind in fixed proportions, with a random directory user in
/// each sentence. Labels come from the phrase table, never from a model.
pub fn generate_dataset<R: Rng + ?Sized>(
    table: &PhraseTable,
    frames: &[&str],
    directory: &UserDirectory,
    size: usize,
    rng: &mut R,
) -> Result<Vec<LabeledSample>> {
    if frames.is_empty() {
        return Err(Error::Config("at least one sentence frame is required".into()));
    }
    let names: Vec<&str> = directory.iter().map(|(_, n)| n).collect();
    let kinds = expressions(table)?;
    let quotas = {
        let a = (size as f64 * MIX.single).round() as usize;
        let b = (size as f64 * MIX.day_only).round() as usize;
        let c = (size as f64 * MIX.multi_day).round() as usize;
        let mut q = [a, b, c, size.saturating_sub(a + b + c)];
        // kinds a small table cannot express fall back to single-day requests
        for k in 1..4 {
            if kinds[k].is_empty() {
                q[0] += std::mem::take(&mut q[k]);
            }
        }
        q
    };
    let mut out = Vec::with_capacity(size);
    for (pool, quota) in kinds.iter().zip(quotas) {
        if quota == 0 {
            continue;
        }
        let mut cross: Vec<(&str, &(String, SlotMask))> = frames
            .iter()
            .flat_map(|f| pool.iter().map(move |e| (*f, e)))
            .collect();
        cross.shuffle(rng);
        // pad by resampling when the cross product is smaller than the quota
        while cross.len() < quota {
            let extra = cross[rng.gen_range(0..cross.len())];
            cross.push(extra);
        }
        for (frame, (when, label)) in cross.into_iter().take(quota) {
            let name = names[rng.gen_range(0..names.len())];
            out.push(LabeledSample {
                sentence: fill(frame, name, when),
                label: *label,
            });
        }
    }
    out.shuffle(rng);
    Ok(out)
}

/// Splits 0.6 / 0.2 / 0.2 in order (the input is already shuffled).
pub fn split_dataset(samples: Vec<LabeledSample>) -> DatasetSplit {
    let n = samples.len();
    let n_train = (n as f64 * 0.6).round() as usize;
    let n_val = (n as f64 * 0.2).round() as usize;
    let mut it = samples.into_iter();
    let train = it.by_ref().take(n_train).collect();
    let validation = it.by_ref().take(n_val).collect();
    let test = it.collect();
    DatasetSplit {
        train,
        validation,
        test,
    }
}

/// One sample per line: `sentence<TAB>bitstring`, bit `i` is slot `i`.
pub fn write_dataset<W: Write>(mut out: W, samples: &[LabeledSample]) -> Result<()> {
    for s in samples {
        writeln!(out, "{}\t{}", s.sentence, s.label.to_bitstring())?;
    }
    Ok(())
}

pub fn read_dataset<R: BufRead>(input: R) -> Result<Vec<LabeledSample>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse { line: i + 1, message };
        let (sentence, bits) = line
            .split_once('\t')
            .ok_or_else(|| parse_err("expected `sentence<TAB>bitstring`".into()))?;
        if bits.len() != SLOT_COUNT {
            return Err(parse_err(format!("label has {} bits, expected {SLOT_COUNT}", bits.len())));
        }
        let label = SlotMask::from_bitstring(bits).ok_or_else(|| parse_err(format!("bad bitstring `{bits}`")))?;
        out.push(LabeledSample {
            sentence: sentence.to_string(),
            label,
        });
    }
    Ok(out)
}
