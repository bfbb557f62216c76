use crate::calendar::{SlotMask, SLOT_COUNT};

/// Micro-averaged scores pooled over every output bit of every sample.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Scores {
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

impl Scores {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64) -> Scores {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Scores {
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
            precision,
            recall,
            f1,
        }
    }
}

/// Running counters, one sample at a time.
#[derive(Clone, Copy, Debug, Default)]
pub struct MicroCounter {
    tp: u64,
    fp: u64,
    fn_: u64,
}

impl MicroCounter {
    pub fn add(&mut self, predicted: SlotMask, truth: SlotMask) {
        self.tp += predicted.intersect(truth).count() as u64;
        self.fp += predicted.difference(truth).count() as u64;
        self.fn_ += truth.difference(predicted).count() as u64;
    }

    pub fn scores(&self) -> Scores {
        Scores::from_counts(self.tp, self.fp, self.fn_)
    }
}

pub fn micro_scores(pairs: &[(SlotMask, SlotMask)]) -> Scores {
    let mut c = MicroCounter::default();
    for &(p, t) in pairs {
        c.add(p, t);
    }
    c.scores()
}

/// The same scores recounted column by column from dense 0/1 matrices.
pub fn micro_scores_dense(pairs: &[(SlotMask, SlotMask)]) -> Scores {
    let pred: Vec<[bool; SLOT_COUNT]> = pairs.iter().map(|(p, _)| dense(*p)).collect();
    let truth: Vec<[bool; SLOT_COUNT]> = pairs.iter().map(|(_, t)| dense(*t)).collect();
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for bit in 0..SLOT_COUNT {
        for (p, t) in pred.iter().zip(&truth) {
            match (p[bit], t[bit]) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
    }
    Scores::from_counts(tp, fp, fn_)
}

fn dense(m: SlotMask) -> [bool; SLOT_COUNT] {
    let mut out = [false; SLOT_COUNT];
    for s in m.iter() {
        out[s] = true;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mask(slots: &[usize]) -> SlotMask {
        SlotMask::from_slots(slots.iter().copied()).unwrap()
    }

    #[test]
    fn perfect_and_empty_predictions() {
        let t = mask(&[1, 2, 3]);
        let s = micro_scores(&[(t, t)]);
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
        let s = micro_scores(&[(SlotMask::empty(), t)]);
        assert_eq!(s.recall, 0.0);
        assert_eq!(s.f1, 0.0);
    }

    #[test]
    fn three_sample_example() {
        // per-bit tally by hand:
        //   sample 1: predicted {0,1}, truth {0,1,2}   -> tp 2, fn 1
        //   sample 2: predicted {8,9,10}, truth {8}    -> tp 1, fp 2
        //   sample 3: predicted {}, truth {39}         -> fn 1
        let pairs = [
            (mask(&[0, 1]), mask(&[0, 1, 2])),
            (mask(&[8, 9, 10]), mask(&[8])),
            (mask(&[]), mask(&[39])),
        ];
        let s = micro_scores(&pairs);
        assert_eq!((s.true_positives, s.false_positives, s.false_negatives), (3, 2, 2));
        assert!((s.precision - 0.6).abs() < 1e-12);
        assert!((s.recall - 0.6).abs() < 1e-12);
        assert!((s.f1 - 0.6).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn both_counting_methods_agree(raw in prop::collection::vec((0u64..1 << 40, 0u64..1 << 40), 0..30)) {
            let pairs: Vec<(SlotMask, SlotMask)> =
                raw.iter().map(|&(a, b)| (SlotMask::from_bits(a), SlotMask::from_bits(b))).collect();
            prop_assert_eq!(micro_scores(&pairs), micro_scores_dense(&pairs));
        }
    }
}
