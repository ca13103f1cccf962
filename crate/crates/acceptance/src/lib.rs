//! Pass/fail rules for the sparsification sweeps, kept separate from the
//! experiment run so they can be tested on hand-made records.

use phasor_snn::harness::SweepRecord;

/// Best relative accuracy among grid points removing at least `min_fraction`.
pub fn best_at_or_above(records: &[SweepRecord], min_fraction: f64) -> Option<&SweepRecord> {
    records
        .iter()
        .filter(|r| r.fraction_removed >= min_fraction)
        .max_by(|a, b| a.relative_accuracy.total_cmp(&b.relative_accuracy))
}

/// Relative accuracy at `fraction`, linearly interpolated between the two
/// neighbouring grid points. `None` outside the measured range.
pub fn interpolate(records: &[SweepRecord], fraction: f64) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> = records.iter().map(|r| (r.fraction_removed, r.relative_accuracy)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.windows(2).find_map(|w| {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if fraction < x0 || fraction > x1 {
            return None;
        }
        if x1 == x0 {
            return Some(y0.min(y1));
        }
        Some(y0 + (y1 - y0) * (fraction - x0) / (x1 - x0))
    })
}

/// Comparison of explicit and random removal at one matched fraction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchedGap {
    pub fraction: f64,
    pub explicit: f64,
    pub random: f64,
}

impl MatchedGap {
    pub fn gap(&self) -> f64 {
        self.explicit - self.random
    }
}

/// Matched-fraction comparisons in `[lo, hi]`: every explicit grid point in
/// the band, random interpolated to it. With no explicit point in the band
/// both curves are interpolated at its centre.
pub fn matched_gaps(explicit: &[SweepRecord], random: &[SweepRecord], lo: f64, hi: f64) -> Vec<MatchedGap> {
    let mut fractions: Vec<f64> = explicit
        .iter()
        .map(|r| r.fraction_removed)
        .filter(|f| (lo..=hi).contains(f))
        .collect();
    if fractions.is_empty() {
        fractions.push(0.5 * (lo + hi));
    }
    fractions
        .into_iter()
        .filter_map(|f| {
            Some(MatchedGap {
                fraction: f,
                explicit: interpolate(explicit, f)?,
                random: interpolate(random, f)?,
            })
        })
        .collect()
}
