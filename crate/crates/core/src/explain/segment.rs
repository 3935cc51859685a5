//! Support recovery on the difference series.

use crate::funclib::Interval;

/// Segmentation knobs, in post-normalization units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegmentConfig {
    /// Sliding-RMS window width (centered).
    pub window: usize,
    pub tol: f64,
    /// Runs separated by fewer samples than this are merged.
    pub gap_merge: usize,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        SegmentConfig {
            window: 5,
            tol: 0.05,
            gap_merge: 10,
        }
    }
}

fn sliding_rms(x: &[f64], window: usize) -> Vec<f64> {
    let n = x.len();
    let half = window / 2;
    let mut prefix = vec![0.0; n + 1];
    for (i, v) in x.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v * v;
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            ((prefix[hi] - prefix[lo]).max(0.0) / (hi - lo) as f64).sqrt()
        })
        .collect()
}

/// Maximal runs where the centered sliding RMS of `delta` exceeds `tol`,
/// trimmed to samples that individually exceed `tol`, with close runs
/// merged. Isolated samples above `6·tol` always survive as length-1
/// intervals. Sorted by start.
pub fn segment_delta(delta: &[f64], config: &SegmentConfig) -> Vec<Interval> {
    let tol = config.tol;
    let rms = sliding_rms(delta, config.window.max(1));
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut t = 0;
    while t < delta.len() {
        if rms[t] <= tol {
            t += 1;
            continue;
        }
        let start = t;
        while t < delta.len() && rms[t] > tol {
            t += 1;
        }
        let end = t - 1;
        // trim to the outermost samples that are themselves above tol
        let inside = (start..=end).filter(|&i| delta[i].abs() > tol);
        let (mut lo, mut hi) = (usize::MAX, 0);
        for i in inside {
            lo = lo.min(i);
            hi = hi.max(i);
        }
        if lo <= hi {
            runs.push((lo, hi));
        }
    }
    for (i, v) in delta.iter().enumerate() {
        if v.abs() > 6.0 * tol && !runs.iter().any(|&(s, e)| s <= i && i <= e) {
            runs.push((i, i));
        }
    }
    runs.sort_unstable();

    let mut merged: Vec<(usize, usize)> = Vec::new();
    for (s, e) in runs {
        match merged.last_mut() {
            Some(last) if s <= last.1 + config.gap_merge => last.1 = last.1.max(e),
            _ => merged.push((s, e)),
        }
    }
    merged.into_iter().map(|(s, e)| Interval::new(s, e)).collect()
}

/// Grows `interval` outward while the neighbouring samples exceed `eps` in
/// magnitude.
pub fn extend_support(delta: &[f64], interval: Interval, eps: f64) -> Interval {
    let (mut s, mut e) = (interval.start, interval.end);
    while s > 0 && delta[s - 1].abs() > eps {
        s -= 1;
    }
    while e + 1 < delta.len() && delta[e + 1].abs() > eps {
        e += 1;
    }
    Interval::new(s, e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_delta_has_no_support() {
        assert!(segment_delta(&[0.0; 50], &SegmentConfig::default()).is_empty());
    }

    #[test]
    fn block_is_recovered() {
        let mut d = vec![0.0; 300];
        for v in &mut d[36..=237] {
            *v = 1.0;
        }
        let segs = segment_delta(&d, &SegmentConfig::default());
        assert_eq!(segs, vec![Interval::new(36, 237)]);
    }

    #[test]
    fn separated_events_are_ordered() {
        let mut d = vec![0.0; 300];
        d[250] = -2.0;
        for v in &mut d[20..30] {
            *v = 1.0;
        }
        let segs = segment_delta(&d, &SegmentConfig::default());
        assert_eq!(segs, vec![Interval::new(20, 29), Interval::new(250, 250)]);
    }

    #[test]
    fn close_runs_merge_and_extension_stops_at_zero() {
        let mut d = vec![0.0; 100];
        for v in &mut d[10..20] {
            *v = 1.0;
        }
        for v in &mut d[25..30] {
            *v = 1.0;
        }
        d[9] = 0.01;
        d[8] = 0.001;
        let segs = segment_delta(&d, &SegmentConfig::default());
        assert_eq!(segs, vec![Interval::new(10, 29)]);
        assert_eq!(extend_support(&d, segs[0], 1e-9), Interval::new(8, 29));
    }
}
