use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::calendar::{SlotMask, DAYS, SLOTS_PER_DAY};
use crate::error::{Error, Result};

pub const DEFAULT_PHRASES: &str = include_str!("phrases.toml");

/// Words that turn the phrases after them into exclusions.
pub const EXCLUSION_WORDS: [&str; 3] = ["avoid", "not", "except"];

#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhraseTable {
    pub days: BTreeMap<String, usize>,
    pub phrases: BTreeMap<String, Vec<usize>>,
}

impl Default for PhraseTable {
    fn default() -> Self {
        PhraseTable::from_toml(DEFAULT_PHRASES).expect("bundled phrase table is valid")
    }
}

impl PhraseTable {
    pub fn from_toml(text: &str) -> Result<PhraseTable> {
        let raw: PhraseTable = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut table = PhraseTable {
            days: BTreeMap::new(),
            phrases: BTreeMap::new(),
        };
        for (name, day) in raw.days {
            if day >= DAYS {
                return Err(Error::Config(format!("day `{name}` maps to {day}, outside 0..{DAYS}")));
            }
            table.days.insert(normalize(&name), day);
        }
        for (phrase, offsets) in raw.phrases {
            if offsets.is_empty() || offsets.iter().any(|&o| o >= SLOTS_PER_DAY) {
                return Err(Error::Config(format!(
                    "phrase `{phrase}` needs a non-empty offset set inside 0..{SLOTS_PER_DAY}"
                )));
            }
            table.phrases.insert(normalize(&phrase), offsets);
        }
        if table.days.is_empty() || table.phrases.is_empty() {
            return Err(Error::Config("phrase table needs days and phrases".into()));
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<PhraseTable> {
        PhraseTable::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn day_index(&self, day: &str) -> Result<usize> {
        self.days
            .get(&normalize(day))
            .copied()
            .ok_or_else(|| Error::UnknownDay(day.to_string()))
    }

    pub fn offsets(&self, phrase: &str) -> Result<&[usize]> {
        self.phrases
            .get(&normalize(phrase))
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownPhrase(phrase.to_string()))
    }

    /// Day names in index order.
    pub fn day_names(&self) -> Vec<&str> {
        let mut v: Vec<(&str, usize)> = self.days.iter().map(|(k, &d)| (k.as_str(), d)).collect();
        v.sort_by_key(|&(_, d)| d);
        v.into_iter().map(|(k, _)| k).collect()
    }

    pub fn phrase_names(&self) -> impl Iterator<Item = &str> {
        self.phrases.keys().map(String::as_str)
    }
}

/// Lower-cases and splits on anything that is not a letter or digit.
pub fn tokenize(sentence: &str) -> Vec<String> {
    sentence
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn normalize(s: &str) -> String {
    tokenize(s).join(" ")
}

fn offsets_mask(day: usize, offsets: impl IntoIterator<Item = usize>) -> SlotMask {
    let mut m = SlotMask::empty();
    for o in offsets {
        m.insert(day * SLOTS_PER_DAY + o);
    }
    m
}

/// Slots named by one day and one time-of-day phrase.
pub fn oracle_map(table: &PhraseTable, day: &str, phrase: &str) -> Result<SlotMask> {
    let d = table.day_index(day)?;
    Ok(offsets_mask(d, table.offsets(phrase)?.iter().copied()))
}

/// Rule-based reading of a free sentence: every named day, restricted to
/// the union of the named phrases (the whole day when none is named),
/// minus phrases that follow an exclusion word. Sentences without a day
/// map to the empty mask.
pub fn rule_map(table: &PhraseTable, sentence: &str) -> SlotMask {
    let tokens = tokenize(sentence);
    let longest = table.phrases.keys().map(|p| p.split(' ').count()).max().unwrap_or(1);
    let mut days = Vec::new();
    let mut include: Option<SlotMask> = None;
    let mut exclude = SlotMask::empty();
    let mut negate = false;
    let mut i = 0;
    while i < tokens.len() {
        if let Some(&d) = table.days.get(&tokens[i]) {
            if !days.contains(&d) {
                days.push(d);
            }
            i += 1;
            continue;
        }
        if EXCLUSION_WORDS.contains(&tokens[i].as_str()) {
            negate = true;
            i += 1;
            continue;
        }
        let matched = (1..=longest.min(tokens.len() - i)).rev().find_map(|n| {
            let key = tokens[i..i + n].join(" ");
            table.phrases.get(&key).map(|o| (n, offsets_mask(0, o.iter().copied())))
        });
        match matched {
            Some((n, m)) => {
                if negate {
                    exclude = exclude.union(m);
                } else {
                    include = Some(include.unwrap_or_default().union(m));
                }
                i += n;
            }
            None => i += 1,
        }
    }
    let within = include
        .unwrap_or_else(|| SlotMask::day(0))
        .difference(exclude);
    let mut out = SlotMask::empty();
    for d in days {
        out = out.union(offsets_mask(d, within.iter()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slots(m: SlotMask) -> Vec<usize> {
        m.iter().collect()
    }

    #[test]
    fn oracle_examples() {
        let t = PhraseTable::default();
        assert_eq!(slots(oracle_map(&t, "Wednesday", "afternoon").unwrap()), vec![20, 21, 22, 23]);
        assert_eq!(slots(oracle_map(&t, "Monday", "early morning").unwrap()), vec![0, 1]);
        assert!(matches!(oracle_map(&t, "Monday", "midnightish"), Err(Error::UnknownPhrase(_))));
        assert!(matches!(oracle_map(&t, "Caturday", "morning"), Err(Error::UnknownDay(_))));
    }

    #[test]
    fn bundled_table_matches_the_documented_extents() {
        let t = PhraseTable::default();
        assert_eq!(t.phrases.len(), 11);
        assert_eq!(t.offsets("before lunch").unwrap(), &[0, 1, 2, 3]);
        assert_eq!(t.offsets("after lunch").unwrap(), &[4]);
        assert_eq!(t.day_names(), vec!["monday", "tuesday", "wednesday", "thursday", "friday"]);
    }

    #[test]
    fn malformed_tables_are_rejected() {
        assert!(PhraseTable::from_toml("[days]\nmonday = 7\n[phrases]\nx = [1]\n").is_err());
        assert!(PhraseTable::from_toml("[days]\nmonday = 0\n[phrases]\nx = []\n").is_err());
        assert!(PhraseTable::from_toml("[days]\nmonday = 0\n[phrases]\nx = [8]\n").is_err());
    }

    #[test]
    fn rule_mapper_reads_compound_requests() {
        let t = PhraseTable::default();
        assert_eq!(
            slots(rule_map(&t, "Please schedule a meeting with Gautam for Wednesday afternoon")),
            vec![20, 21, 22, 23]
        );
        // longest match: "late afternoon" is not "afternoon"
        assert_eq!(slots(rule_map(&t, "thursday late afternoon")), vec![30, 31]);
        assert_eq!(
            slots(rule_map(&t, "Friday or Monday, but avoid morning")),
            vec![3, 4, 5, 6, 7, 35, 36, 37, 38, 39]
        );
        assert_eq!(slots(rule_map(&t, "tuesday")), (8..16).collect::<Vec<_>>());
        assert!(rule_map(&t, "sometime soon").is_empty());
    }

    #[test]
    fn tokenizer_drops_punctuation_and_case() {
        assert_eq!(tokenize("Hi, Gautam!  Monday?"), vec!["hi", "gautam", "monday"]);
        assert!(tokenize("").is_empty());
    }
}
