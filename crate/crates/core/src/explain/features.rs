//! Hand-crafted fixed-length series embedding.
//!
//! Layout (74 values):
//! - 16 equal windows × (mean, std, slope·window length)
//! - 16 spectral bands: RMS magnitude of the non-DC half spectrum, split
//!   into equal bands, divided by T
//! - mean, std, skewness, excess kurtosis, min, max, argmin/(T−1),
//!   argmax/(T−1), lag-1 autocorrelation, mean |first difference|

use std::cell::RefCell;

use rustfft::{num_complex::Complex, FftPlanner};
use sha2::{Digest, Sha256};

use crate::stats;

pub const WINDOWS: usize = 16;
pub const BANDS: usize = 16;
const GLOBALS: [&str; 10] = [
    "mean", "std", "skewness", "kurtosis", "min", "max", "argmin", "argmax", "lag1", "mean_abs_diff",
];
pub const FEATURE_DIM: usize = 3 * WINDOWS + BANDS + GLOBALS.len();

/// Identifies the layout above; pools built under another layout are
/// rejected on load.
pub const FEATURE_VERSION: &str = "windows16-mean-std-slope/bands16-rms/globals10/v1";

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Hex SHA-256 of [`FEATURE_VERSION`].
pub fn feature_version_hash() -> String {
    hex::encode(Sha256::digest(FEATURE_VERSION.as_bytes()))
}

pub fn feature_names() -> Vec<String> {
    let mut names = Vec::with_capacity(FEATURE_DIM);
    for w in 0..WINDOWS {
        for s in ["mean", "std", "slope"] {
            names.push(format!("w{w:02}_{s}"));
        }
    }
    for b in 0..BANDS {
        names.push(format!("band{b:02}"));
    }
    names.extend(GLOBALS.iter().map(|s| s.to_string()));
    names
}

fn spectrum_bands(x: &[f64]) -> [f64; BANDS] {
    let n = x.len();
    let mut out = [0.0; BANDS];
    let half = n / 2;
    if half == 0 {
        return out;
    }
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n).process(&mut buf));
    for (b, o) in out.iter_mut().enumerate() {
        // bins 1..=half split into equal bands
        let lo = 1 + b * half / BANDS;
        let hi = 1 + (b + 1) * half / BANDS;
        if hi > lo {
            let power: f64 = buf[lo..hi].iter().map(|c| c.norm_sqr()).sum();
            *o = (power / (hi - lo) as f64).sqrt() / n as f64;
        }
    }
    out
}

fn argext(x: &[f64], better: impl Fn(f64, f64) -> bool) -> usize {
    let mut best = 0;
    for (i, &v) in x.iter().enumerate() {
        if better(v, x[best]) {
            best = i;
        }
    }
    best
}

/// Deterministic embedding of length [`FEATURE_DIM`] for any input length.
pub fn feature_embed(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut out = Vec::with_capacity(FEATURE_DIM);
    for w in 0..WINDOWS {
        let (lo, hi) = (w * n / WINDOWS, (w + 1) * n / WINDOWS);
        if hi <= lo {
            out.extend([0.0; 3]);
            continue;
        }
        let seg = &x[lo..hi];
        let m = stats::moments(seg);
        let slope = if seg.len() > 1 { stats::linear_fit(seg).1 * seg.len() as f64 } else { 0.0 };
        out.extend([m.mean, m.std, slope]);
    }
    out.extend(spectrum_bands(x));
    if n == 0 {
        out.extend([0.0; GLOBALS.len()]);
        return out;
    }
    let m = stats::moments(x);
    let span = (n - 1).max(1) as f64;
    let imin = argext(x, |a, b| a < b);
    let imax = argext(x, |a, b| a > b);
    let mad = if n > 1 {
        x.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    out.extend([
        m.mean,
        m.std,
        m.skewness,
        m.excess_kurtosis,
        x[imin],
        x[imax],
        imin as f64 / span,
        imax as f64 / span,
        stats::lag1_autocorrelation(x),
        mad,
    ]);
    debug_assert_eq!(out.len(), FEATURE_DIM);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimension_is_fixed() {
        for n in [0, 1, 7, 16, 300, 1001] {
            assert_eq!(feature_embed(&vec![0.5; n]).len(), FEATURE_DIM);
        }
        assert_eq!(feature_names().len(), FEATURE_DIM);
    }

    #[test]
    fn zeros_embed_to_zeros() {
        assert!(feature_embed(&[0.0; 300]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn spike_position_moves_extremum_features() {
        let mut a = vec![0.0; 300];
        let mut b = vec![0.0; 300];
        a[40] = 3.0;
        b[250] = 3.0;
        let (fa, fb) = (feature_embed(&a), feature_embed(&b));
        let argmax = FEATURE_DIM - 3;
        assert!((fa[argmax] - 40.0 / 299.0).abs() < 1e-12);
        assert!((fb[argmax] - 250.0 / 299.0).abs() < 1e-12);
    }

    #[test]
    fn band_energy_follows_frequency() {
        let n = 512;
        let x: Vec<f64> = (0..n).map(|t| (std::f64::consts::TAU * 200.0 * t as f64 / n as f64).sin()).collect();
        let bands = &feature_embed(&x)[3 * WINDOWS..3 * WINDOWS + BANDS];
        let top = bands.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(top, 200 * BANDS / (n / 2));
    }
}
