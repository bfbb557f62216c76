//! Plain-text checkpoint container shared by both networks.
//!
//! ```text
//! meetsched-checkpoint 1
//! kind policy
//! meta sizes 135 128 32 2
//! array params 21634
//! 0.0123 -0.5 ...            (8 values per line)
//! list vocab 3
//! <unk>
//! monday
//! ...
//! end
//! ```
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! save/load cycle is bit-exact.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub const MAGIC: &str = "meetsched-checkpoint";
pub const FORMAT_VERSION: u32 = 1;

const PER_LINE: usize = 8;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    pub kind: String,
    meta: BTreeMap<String, Vec<String>>,
    arrays: BTreeMap<String, Vec<f64>>,
    lists: BTreeMap<String, Vec<String>>,
}

fn bad(message: impl Into<String>) -> Error {
    Error::Checkpoint(message.into())
}

impl Checkpoint {
    pub fn new(kind: &str) -> Checkpoint {
        Checkpoint {
            kind: kind.to_string(),
            ..Default::default()
        }
    }

    pub fn set_meta<T: ToString>(&mut self, key: &str, values: &[T]) {
        self.meta
            .insert(key.to_string(), values.iter().map(ToString::to_string).collect());
    }

    pub fn set_array(&mut self, key: &str, values: &[f64]) {
        self.arrays.insert(key.to_string(), values.to_vec());
    }

    pub fn set_list(&mut self, key: &str, values: &[String]) {
        for v in values {
            assert!(!v.contains('\n'), "list entries must be single-line");
        }
        self.lists.insert(key.to_string(), values.to_vec());
    }

    pub fn meta<T: std::str::FromStr>(&self, key: &str) -> Result<Vec<T>> {
        let raw = self.meta.get(key).ok_or_else(|| bad(format!("missing meta `{key}`")))?;
        raw.iter()
            .map(|s| s.parse::<T>().map_err(|_| bad(format!("bad value `{s}` in meta `{key}`"))))
            .collect()
    }

    pub fn array(&self, key: &str) -> Result<&[f64]> {
        self.arrays
            .get(key)
            .map(Vec::as_slice)
            .ok_or_else(|| bad(format!("missing array `{key}`")))
    }

    pub fn list(&self, key: &str) -> Result<&[String]> {
        self.lists
            .get(key)
            .map(Vec::as_slice)
            .ok_or_else(|| bad(format!("missing list `{key}`")))
    }

    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind != kind {
            return Err(bad(format!("expected a {kind} checkpoint, found {}", self.kind)));
        }
        Ok(())
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{MAGIC} {FORMAT_VERSION}")?;
        writeln!(out, "kind {}", self.kind)?;
        for (k, v) in &self.meta {
            writeln!(out, "meta {k} {}", v.join(" "))?;
        }
        for (k, values) in &self.arrays {
            writeln!(out, "array {k} {}", values.len())?;
            for chunk in values.chunks(PER_LINE) {
                let line: Vec<String> = chunk.iter().map(|x| format!("{x:?}")).collect();
                writeln!(out, "{}", line.join(" "))?;
            }
        }
        for (k, values) in &self.lists {
            writeln!(out, "list {k} {}", values.len())?;
            for v in values {
                writeln!(out, "{v}")?;
            }
        }
        writeln!(out, "end")?;
        Ok(())
    }

    pub fn read<R: BufRead>(input: R) -> Result<Checkpoint> {
        let mut lines = input.lines();
        let mut next_line = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| bad("unexpected end of file"))?
                .map_err(Error::from)
        };
        let header = next_line()?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some(MAGIC) {
            return Err(bad("not a meetsched checkpoint"));
        }
        let version: u32 = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("missing format version"))?;
        if version != FORMAT_VERSION {
            return Err(bad(format!("unsupported format version {version}")));
        }
        let mut ckpt = Checkpoint::default();
        loop {
            let line = next_line()?;
            let mut parts = line.splitn(3, ' ');
            match parts.next() {
                Some("end") => break,
                Some("kind") => {
                    ckpt.kind = parts.next().ok_or_else(|| bad("empty kind"))?.to_string();
                }
                Some("meta") => {
                    let key = parts.next().ok_or_else(|| bad("meta without key"))?;
                    let values = parts
                        .next()
                        .unwrap_or("")
                        .split_whitespace()
                        .map(str::to_string)
                        .collect();
                    ckpt.meta.insert(key.to_string(), values);
                }
                Some("array") => {
                    let key = parts.next().ok_or_else(|| bad("array without key"))?;
                    let len: usize = parts
                        .next()
                        .and_then(|n| n.trim().parse().ok())
                        .ok_or_else(|| bad(format!("array `{key}` without length")))?;
                    let mut values = Vec::with_capacity(len);
                    while values.len() < len {
                        for tok in next_line()?.split_whitespace() {
                            let v: f64 = tok
                                .parse()
                                .map_err(|_| bad(format!("bad float `{tok}` in `{key}`")))?;
                            values.push(v);
                        }
                    }
                    if values.len() != len {
                        return Err(bad(format!("array `{key}` has {} values, header says {len}", values.len())));
                    }
                    ckpt.arrays.insert(key.to_string(), values);
                }
                Some("list") => {
                    let key = parts.next().ok_or_else(|| bad("list without key"))?;
                    let len: usize = parts
                        .next()
                        .and_then(|n| n.trim().parse().ok())
                        .ok_or_else(|| bad(format!("list `{key}` without length")))?;
                    let values = (0..len).map(|_| next_line()).collect::<Result<Vec<_>>>()?;
                    ckpt.lists.insert(key.to_string(), values);
                }
                _ => return Err(bad(format!("unexpected line `{line}`"))),
            }
        }
        Ok(ckpt)
    }
}
