//! Central finite-difference checks for hand-written backprop.
//!
//! Both networks use rectified-linear units, whose derivative jumps at zero.
//! A parameter whose `±h` perturbation flips any unit's on/off state (or the
//! probability clip) has no meaningful numeric derivative; such samples are
//! reported as skipped and replaced by another draw.

use rand::Rng;

pub const DEFAULT_STEP: f64 = 1e-5;

/// Gradients smaller than this (times the loss magnitude, when that
/// exceeds one) are compared absolutely. A loss of size `L` can only be
/// resolved to about `L * f64::EPSILON / h` by central differences, so the
/// floor has to grow with the loss to keep the check scale-invariant.
pub const MAGNITUDE_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_index: Option<usize>,
    pub checked: usize,
    pub skipped_at_kinks: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    relative_error_with_floor(analytic, numeric, MAGNITUDE_FLOOR)
}

pub fn relative_error_with_floor(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(floor);
    (analytic - numeric).abs() / scale
}

/// The comparison floor for a loss of the given value.
pub fn floor_for_loss(loss: f64) -> f64 {
    MAGNITUDE_FLOOR * loss.abs().max(1.0)
}

/// A loss over a flat parameter vector, together with the activation
/// pattern of its piecewise-linear parts.
pub trait Probe {
    fn loss_at(&mut self, params: &[f64]) -> (f64, Vec<bool>);
}

impl<F: FnMut(&[f64]) -> (f64, Vec<bool>)> Probe for F {
    fn loss_at(&mut self, params: &[f64]) -> (f64, Vec<bool>) {
        self(params)
    }
}

/// Checks `analytic` against central differences at the given indices.
pub fn check_indices<P: Probe>(
    params: &[f64],
    analytic: &[f64],
    probe: &mut P,
    indices: &[usize],
    h: f64,
) -> GradCheckReport {
    let mut work = params.to_vec();
    let floor = floor_for_loss(probe.loss_at(params).0);
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_index: None,
        checked: 0,
        skipped_at_kinks: 0,
    };
    for &i in indices {
        let original = work[i];
        work[i] = original + h;
        let (plus, pattern_plus) = probe.loss_at(&work);
        work[i] = original - h;
        let (minus, pattern_minus) = probe.loss_at(&work);
        work[i] = original;
        if pattern_plus != pattern_minus {
            report.skipped_at_kinks += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * h);
        let err = relative_error_with_floor(analytic[i], numeric, floor);
        report.checked += 1;
        if report.worst_index.is_none() || err > report.max_relative_error {
            report.max_relative_error = err;
            report.worst_index = Some(i);
        }
    }
    report
}

/// Checks `samples` distinct randomly chosen parameters (fewer if the
/// model is smaller), drawing replacements for kink-crossing draws.
pub fn check_random<P: Probe, R: Rng + ?Sized>(
    params: &[f64],
    analytic: &[f64],
    probe: &mut P,
    samples: usize,
    h: f64,
    rng: &mut R,
) -> GradCheckReport {
    let all: Vec<usize> = (0..params.len()).collect();
    check_random_among(params, analytic, probe, &all, samples, h, rng)
}

/// Like [`check_random`], drawing only from `candidates`.
pub fn check_random_among<P: Probe, R: Rng + ?Sized>(
    params: &[f64],
    analytic: &[f64],
    probe: &mut P,
    candidates: &[usize],
    samples: usize,
    h: f64,
    rng: &mut R,
) -> GradCheckReport {
    let target = samples.min(candidates.len());
    let mut order = candidates.to_vec();
    // partial Fisher-Yates, consumed lazily
    let mut next = 0;
    let mut total = GradCheckReport {
        max_relative_error: 0.0,
        worst_index: None,
        checked: 0,
        skipped_at_kinks: 0,
    };
    while total.checked < target && next < order.len() {
        let j = rng.gen_range(next..order.len());
        order.swap(next, j);
        let idx = order[next];
        next += 1;
        let r = check_indices(params, analytic, probe, &[idx], h);
        total.checked += r.checked;
        total.skipped_at_kinks += r.skipped_at_kinks;
        if r.checked > 0 && (total.worst_index.is_none() || r.max_relative_error > total.max_relative_error) {
            total.max_relative_error = r.max_relative_error;
            total.worst_index = Some(idx);
        }
    }
    total
}
