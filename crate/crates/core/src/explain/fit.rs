//! Least-squares template fitting over the function library.
//!
//! Amplitudes enter every shape linearly, so for fixed frequency and phase
//! the best amplitude is a projection. Sinusoids are fitted in closed form
//! (sine/cosine regression) over a frequency grid with golden-section
//! refinement; the other periodic shapes start from the sinusoid's
//! frequency and the phase of their fundamental, then refine frequency and
//! phase by golden-section search.

use std::f64::consts::{PI, TAU};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::funclib::{unit_shape, Category, FuncId, FunctionSpec, Interval, Param, ParamVector};
use crate::stats;

/// Below this relative residual a deterministic fit is considered an
/// explanation of the data rather than a coincidence.
pub const DETERMINISTIC_FIT: f64 = 0.5;
/// Excess kurtosis separating Gaussian (0) from Laplace (3) fluctuations.
pub const KURTOSIS_SPLIT: f64 = 0.9;

const FREQ_STEP: f64 = 0.1;
const PHASE_GRID: usize = 24;
/// Relative residual above which a periodic fit gets a joint local search.
const ROUGH_FIT: f64 = 0.02;
/// Share of the energy the best sinusoid must explain before the other
/// periodic shapes are refined (a sawtooth keeps 6/π² ≈ 61% in its
/// fundamental, the others more).
const PERIODIC_PLAUSIBLE: f64 = 0.3;

/// One fitted component on one side.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub func: FuncId,
    pub theta: ParamVector,
    pub interval: Interval,
    /// RMS of the fit error over the interval.
    pub residual: f64,
}

/// Per-side outcome of [`fit_component`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SideEvidence {
    /// Best candidate, if any candidate could be fitted.
    pub best: Option<FitResult>,
    /// RMS of the detrended segment: the residual of "no component".
    pub null_residual: f64,
    /// Best deterministic residual divided by `null_residual`.
    pub relative_residual: f64,
    pub excess_kurtosis: f64,
    /// Candidates with fewer samples than parameters.
    pub skipped: Vec<FuncId>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComponentFit {
    pub reference: SideEvidence,
    pub target: SideEvidence,
}

/// A signed template fit: `coef · shape(func, F, φ)` on `interval`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct ShapeFit {
    pub func: FuncId,
    pub interval: Interval,
    pub coef: f64,
    pub frequency: f64,
    pub phase: f64,
    /// Squared norm of the data explained by the template.
    pub explained: f64,
}

impl ShapeFit {
    pub fn values(&self) -> Vec<f64> {
        template(self.func, self.interval.len(), self.frequency, self.phase)
            .into_iter()
            .map(|v| self.coef * v)
            .collect()
    }

    /// Parameter vector with a non-negative amplitude where the library
    /// allows it, and the function id adjusted to match.
    pub fn to_params(self) -> (FuncId, ParamVector) {
        let mut func = self.func;
        let mut amp = self.coef;
        let mut phase = self.phase;
        if amp < 0.0 {
            if let Some(m) = func.mirror() {
                func = m;
                amp = -amp;
            } else if matches!(func, FuncId::Sinusoidal | FuncId::SquareWave | FuncId::TriangleWave) {
                // half-period shift negates these waves
                amp = -amp;
                phase += PI;
            }
        }
        let theta = if func.category() == Category::Periodic {
            ParamVector::new([
                (Param::Amplitude, amp),
                (Param::Frequency, self.frequency),
                (Param::Phase, phase.rem_euclid(TAU)),
            ])
        } else {
            ParamVector::new([(Param::Amplitude, amp)])
        };
        (func, theta)
    }
}

/// Unit-amplitude samples of a deterministic shape on `n` points.
pub(crate) fn template(func: FuncId, n: usize, frequency: f64, phase: f64) -> Vec<f64> {
    let denom = n.saturating_sub(1).max(1) as f64;
    let span = if n > 1 { 1.0 } else { 0.0 };
    (0..n)
        .map(|k| unit_shape(func, span * k as f64 / denom, frequency, phase))
        .collect()
}

/// Representative of a sign-mirror pair (the member listed first).
pub(crate) fn canonical(func: FuncId) -> FuncId {
    match func.mirror() {
        Some(m) if (m as usize) < (func as usize) => m,
        _ => func,
    }
}

fn projection(y: &[f64], h: &[f64]) -> (f64, f64) {
    let hh = stats::dot(h, h);
    if hh <= 0.0 {
        return (0.0, 0.0);
    }
    let yh = stats::dot(y, h);
    (yh / hh, yh * yh / hh)
}

fn golden_max(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, iters: usize) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut best = if fc >= fd { (c, fc) } else { (d, fd) };
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
            if fc > best.1 {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
            if fd > best.1 {
                best = (d, fd);
            }
        }
    }
    best
}

/// Closed-form `a·sin + b·cos` regression at frequency `f`.
/// Returns (explained, amplitude, phase).
fn sine_regression(y: &[f64], f: f64) -> (f64, f64, f64) {
    let denom = y.len().saturating_sub(1).max(1) as f64;
    let (mut s, mut c, mut ss, mut cc, mut sc) = (0.0, 0.0, 0.0, 0.0, 0.0);
    // rotate (sin, cos) by a fixed step instead of calling sin_cos per sample
    let (sw, cw) = (TAU * f / denom).sin_cos();
    let (mut sn, mut cs) = (0.0f64, 1.0f64);
    for &v in y {
        s += v * sn;
        c += v * cs;
        ss += sn * sn;
        cc += cs * cs;
        sc += sn * cs;
        (sn, cs) = (sn * cw + cs * sw, cs * cw - sn * sw);
    }
    let det = ss * cc - sc * sc;
    if det <= 1e-9 * (ss + cc) * (ss + cc) {
        // sine and cosine columns are collinear on this grid
        return if cc >= ss && cc > 0.0 {
            let b = c / cc;
            (b * c, b.abs(), if b >= 0.0 { PI / 2.0 } else { -PI / 2.0 })
        } else if ss > 0.0 {
            let a = s / ss;
            (a * s, a.abs(), if a >= 0.0 { 0.0 } else { PI })
        } else {
            (0.0, 0.0, 0.0)
        };
    }
    let a = (s * cc - c * sc) / det;
    let b = (c * ss - s * sc) / det;
    (a * s + b * c, a.hypot(b), b.atan2(a))
}

/// Frequencies (cycles per interval) searched for periodic shapes.
///
/// Low frequencies must stay excluded: a fraction of a sawtooth or
/// triangle cycle is a straight line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct FreqBand {
    pub lo: f64,
    pub hi: f64,
}

impl FreqBand {
    /// Base frequencies and their largest modification, with 25% slack
    /// for interval misestimation.
    pub fn from_specs(specs: &[&FunctionSpec]) -> FreqBand {
        let mut band: Option<FreqBand> = None;
        for s in specs {
            let Some(base) = s.base_ranges.get(&Param::Frequency) else {
                continue;
            };
            let ratio = s.modifiable.get(&Param::Frequency).map_or(1.0, |r| r.range().hi);
            let b = FreqBand {
                lo: 0.75 * base.lo,
                hi: 1.25 * base.hi * ratio,
            };
            band = Some(match band {
                Some(a) => FreqBand { lo: a.lo.min(b.lo), hi: a.hi.max(b.hi) },
                None => b,
            });
        }
        band.unwrap_or_default()
    }
}

impl Default for FreqBand {
    fn default() -> Self {
        FreqBand { lo: 1.5, hi: 37.5 }
    }
}

/// Best sinusoid on `y`: (frequency, phase, explained).
fn scan_sine(y: &[f64], band: FreqBand) -> (f64, f64, f64) {
    let n = y.len();
    let f_lo = band.lo.max(FREQ_STEP);
    let f_hi = band.hi.min((n - 1) as f64 / 2.0).max(f_lo + FREQ_STEP);
    let steps = ((f_hi - f_lo) / FREQ_STEP).ceil() as usize;
    let mut best = (f_lo, f64::NEG_INFINITY);
    for i in 0..=steps {
        let f = (f_lo + i as f64 * FREQ_STEP).min(f_hi);
        let e = sine_regression(y, f).0;
        if e > best.1 {
            best = (f, e);
        }
    }
    let lo = (best.0 - FREQ_STEP).max(f_lo * 0.5);
    let hi = best.0 + FREQ_STEP;
    let (f, _) = golden_max(|f| sine_regression(y, f).0, lo, hi, 40);
    let (explained, _, phase) = sine_regression(y, f);
    (f, phase, explained)
}

fn periodic_explained(func: FuncId, y: &[f64], f: f64, phase: f64) -> f64 {
    projection(y, &template(func, y.len(), f, phase)).1
}

/// Fits a periodic shape to `y`; `sine` is the precomputed [`scan_sine`].
fn fit_periodic(func: FuncId, y: &[f64], sine: (f64, f64, f64), band: FreqBand) -> (f64, f64, f64) {
    let (f0, phi_s, sine_explained) = sine;
    if func == FuncId::Sinusoidal {
        return (f0, phi_s, sine_explained);
    }
    let offset = if func == FuncId::Sawtooth { PI } else { 0.0 };
    let mut best = (f0, phi_s + offset, periodic_explained(func, y, f0, phi_s + offset));
    for k in 0..PHASE_GRID {
        let phi = TAU * k as f64 / PHASE_GRID as f64;
        let e = periodic_explained(func, y, f0, phi);
        if e > best.2 {
            best = (f0, phi, e);
        }
    }
    let energy = stats::dot(y, y);
    if sine_explained < PERIODIC_PLAUSIBLE * energy {
        // no periodic shape fits well when its fundamental is this weak
        return best;
    }
    if best.2 < energy * (1.0 - ROUGH_FIT * ROUGH_FIT) {
        // harmonics bias the sinusoid's frequency; search jointly nearby
        for k in -15..=15 {
            let f = f0 + 0.02 * k as f64;
            if f < band.lo {
                continue;
            }
            for j in 0..2 * PHASE_GRID {
                let phi = TAU * j as f64 / (2 * PHASE_GRID) as f64;
                let e = periodic_explained(func, y, f, phi);
                if e > best.2 {
                    best = (f, phi, e);
                }
            }
        }
    }
    compass_refine(func, y, best, band)
}

/// Pattern search over the cycle positions at the two interval ends,
/// `p0 = φ/2π` and `p1 = p0 + F`. Mismatches near either end depend mostly
/// on one coordinate, which suits the piecewise-constant objective of the
/// discontinuous waves.
fn compass_refine(func: FuncId, y: &[f64], start: (f64, f64, f64), band: FreqBand) -> (f64, f64, f64) {
    let (f, phi, e) = start;
    let mut p = (phi / TAU, phi / TAU + f);
    let mut best_e = e;
    let eval = |p: (f64, f64)| periodic_explained(func, y, p.1 - p.0, p.0 * TAU);
    let mut step = 0.02;
    let dirs = [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)];
    let mut evals = 0;
    while step > 1e-7 && evals < 600 {
        let mut moved = false;
        for (d0, d1) in dirs {
            let q = (p.0 + d0 * step, p.1 + d1 * step);
            if q.1 - q.0 < band.lo {
                continue;
            }
            let e = eval(q);
            evals += 1;
            if e > best_e {
                best_e = e;
                p = q;
                moved = true;
                break;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    (p.1 - p.0, p.0 * TAU, best_e)
}

/// Best signed fit of `func` to the samples `y` (taken on one interval).
pub(crate) fn fit_shape(
    func: FuncId,
    y: &[f64],
    interval: Interval,
    sine: Option<(f64, f64, f64)>,
    band: FreqBand,
) -> Option<ShapeFit> {
    if y.len() < func.params().len() || func.is_stochastic() {
        return None;
    }
    let (frequency, phase) = if func.category() == Category::Periodic {
        let sine = sine.unwrap_or_else(|| scan_sine(y, band));
        let (f, p, _) = fit_periodic(func, y, sine, band);
        (f, p)
    } else {
        (1.0, 0.0)
    };
    let h = template(func, y.len(), frequency, phase);
    let (coef, explained) = projection(y, &h);
    Some(ShapeFit {
        func,
        interval,
        coef,
        frequency,
        phase,
        explained,
    })
}

/// Fits every candidate on every admissible variant interval of `series`.
/// A variant is admissible for a candidate when the candidate's duration
/// bounds admit its length (unless `strict` is false). Returns the best fit
/// per candidate.
pub(crate) fn fit_variants(
    series: &[f64],
    variants: &[Interval],
    candidates: &[&FunctionSpec],
    strict: bool,
) -> Vec<ShapeFit> {
    let mut out = Vec::new();
    let band = FreqBand::from_specs(candidates);
    let sines: Vec<Option<(f64, f64, f64)>> = variants
        .iter()
        .map(|v| {
            let any_periodic = candidates.iter().any(|c| c.category == Category::Periodic);
            (any_periodic && v.len() >= 3).then(|| scan_sine(&series[v.start..=v.end], band))
        })
        .collect();
    for spec in candidates {
        let mut best: Option<ShapeFit> = None;
        for (v, sine) in variants.iter().zip(&sines) {
            if strict && !spec.duration.admits(v.len()) {
                continue;
            }
            if let Some(fit) = fit_shape(spec.id, &series[v.start..=v.end], *v, *sine, band) {
                if best.is_none_or(|b| fit.explained > b.explained) {
                    best = Some(fit);
                }
            }
        }
        out.extend(best);
    }
    out
}

/// Straight line through the means of up to `w` samples on each side of
/// `interval`, evaluated inside it. Falls back to a constant when only one
/// side exists and to the segment mean when neither does.
pub fn local_baseline(series: &[f64], interval: Interval, w: usize) -> Vec<f64> {
    let (s, e) = (interval.start, interval.end);
    let left = (s > 0).then(|| {
        let lo = s.saturating_sub(w);
        let xs = &series[lo..s];
        (stats::moments(xs).mean, (lo + s - 1) as f64 / 2.0)
    });
    let right = (e + 1 < series.len()).then(|| {
        let hi = (e + w).min(series.len() - 1);
        let xs = &series[e + 1..=hi];
        (stats::moments(xs).mean, (e + 1 + hi) as f64 / 2.0)
    });
    match (left, right) {
        (Some((a, ta)), Some((b, tb))) => (s..=e)
            .map(|t| a + (b - a) * (t as f64 - ta) / (tb - ta))
            .collect(),
        (Some((a, _)), None) | (None, Some((a, _))) => vec![a; interval.len()],
        (None, None) => vec![stats::moments(&series[s..=e]).mean; interval.len()],
    }
}

/// `series` on `interval` minus its [`local_baseline`].
pub fn detrended(series: &[f64], interval: Interval, w: usize) -> Vec<f64> {
    let base = local_baseline(series, interval, w);
    series[interval.start..=interval.end]
        .iter()
        .zip(base)
        .map(|(v, b)| v - b)
        .collect()
}

/// Gaussian or Laplace, by the excess kurtosis of `x`.
pub fn classify_fluctuation(x: &[f64]) -> FuncId {
    if stats::moments(x).excess_kurtosis > KURTOSIS_SPLIT {
        FuncId::LaplaceNoise
    } else {
        FuncId::GaussianNoise
    }
}

fn fit_side(y: &[f64], interval: Interval, candidates: &[&FunctionSpec]) -> SideEvidence {
    let m = stats::moments(y);
    let null_residual = stats::rms(y);
    let mut skipped = Vec::new();
    let mut best: Option<ShapeFit> = None;
    let needs_sine = candidates.iter().any(|c| c.category == Category::Periodic) && y.len() >= 3;
    let band = FreqBand::from_specs(candidates);
    let sine = needs_sine.then(|| scan_sine(y, band));
    skipped.extend(
        candidates
            .iter()
            .filter(|c| !c.id.is_stochastic() && y.len() < c.id.params().len())
            .map(|c| c.id),
    );
    let admitted: Vec<&FunctionSpec> = candidates
        .iter()
        .copied()
        .filter(|c| c.duration.admits(y.len()))
        .collect();
    let candidates = if admitted.is_empty() { candidates } else { &admitted[..] };
    for spec in candidates {
        if spec.id.is_stochastic() {
            continue;
        }
        if let Some(fit) = fit_shape(spec.id, y, interval, sine, band) {
            if best.is_none_or(|b| fit.explained > b.explained) {
                best = Some(fit);
            }
        }
    }
    let energy = stats::dot(y, y);
    let relative = |explained: f64| {
        if energy > 0.0 {
            ((energy - explained).max(0.0) / energy).sqrt()
        } else {
            0.0
        }
    };
    let relative_residual = best.map_or(1.0, |b| relative(b.explained));
    let n = y.len() as f64;
    let deterministic = best.map(|b| {
        let (func, theta) = b.to_params();
        FitResult {
            func,
            theta,
            interval,
            residual: ((energy - b.explained).max(0.0) / n).sqrt(),
        }
    });
    let fluctuation = candidates
        .iter()
        .any(|c| c.id.is_stochastic())
        .then(|| {
            let func = classify_fluctuation(y);
            FitResult {
                func,
                theta: ParamVector::new([(Param::Amplitude, m.std)]),
                interval,
                residual: m.std,
            }
        });
    let best = match (deterministic, fluctuation) {
        (Some(d), Some(f)) => Some(if relative_residual < DETERMINISTIC_FIT { d } else { f }),
        (d, f) => d.or(f),
    };
    SideEvidence {
        best,
        null_residual,
        relative_residual,
        excess_kurtosis: m.excess_kurtosis,
        skipped,
    }
}

/// Fits every candidate to each side on `interval`, after removing a local
/// linear baseline estimated from `w` samples outside the interval.
/// Candidates whose duration bounds reject the interval length are ignored
/// unless none admit it. Deterministic candidates are scored by
/// least-squares residual;
/// fluctuation candidates by variance and excess kurtosis, and chosen only
/// when no deterministic shape explains at least 75% of the energy.
pub fn fit_component(
    reference: &[f64],
    target: &[f64],
    interval: Interval,
    candidates: &[&FunctionSpec],
    w: usize,
) -> Result<ComponentFit> {
    if reference.len() != target.len() {
        return Err(Error::Data(format!(
            "reference has {} samples, target {}",
            reference.len(),
            target.len()
        )));
    }
    interval.check(reference.len())?;
    Ok(ComponentFit {
        reference: fit_side(&detrended(reference, interval, w), interval, candidates),
        target: fit_side(&detrended(target, interval, w), interval, candidates),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funclib::{self, Catalog};
    use crate::rng::substream;
    use rand::Rng;

    fn embed(func: FuncId, theta: &ParamVector, interval: Interval, t: usize) -> Vec<f64> {
        let cat = Catalog::standard(t).unwrap();
        funclib::evaluate(cat.spec(func), theta, interval, t, 1).unwrap().into_inner()
    }

    #[test]
    fn clean_sinusoid_self_fit() {
        let cat = Catalog::standard(300).unwrap();
        let iv = Interval::new(40, 239);
        let theta = ParamVector::new([(Param::Amplitude, 2.0), (Param::Frequency, 5.0), (Param::Phase, 0.0)]);
        let y = embed(FuncId::Sinusoidal, &theta, iv, 300);
        let zeros = vec![0.0; 300];
        let cands: Vec<_> = cat.specs().iter().collect();
        let fit = fit_component(&zeros, &y, iv, &cands, 5).unwrap();
        let best = fit.target.best.unwrap();
        assert_eq!(best.func, FuncId::Sinusoidal);
        assert!((best.theta.amplitude() - 2.0).abs() < 0.05);
        assert!(best.residual < 1e-6, "{}", best.residual);
        // the empty side explains nothing and needs nothing
        assert!(fit.reference.null_residual < 1e-12);
        let a = fit.reference.best.unwrap().theta.amplitude();
        assert!(a.abs() < 1e-9);
    }

    #[test]
    fn periodic_shapes_with_fractional_frequency() {
        let mut rng = substream(3, 0);
        for func in [FuncId::Sawtooth, FuncId::SquareWave, FuncId::TriangleWave, FuncId::Sinusoidal] {
            for _ in 0..10 {
                let n = rng.random_range(45..270);
                let f = rng.random_range(2.0..25.0f64).min((n - 1) as f64 / 2.2);
                let phase = rng.random_range(0.0..TAU);
                let theta = ParamVector::new([(Param::Amplitude, 1.7), (Param::Frequency, f), (Param::Phase, phase)]);
                let y = embed(func, &theta, Interval::new(0, n - 1), n);
                let fit = fit_shape(func, &y, Interval::new(0, n - 1), None, FreqBand::default()).unwrap();
                let e = stats::dot(&y, &y);
                let rr = ((e - fit.explained).max(0.0) / e).sqrt();
                assert!(rr < 0.1, "{func} n={n} f={f} phase={phase}: rr={rr} fit={fit:?}");
            }
        }
    }

    #[test]
    fn mirrored_fit_reports_positive_amplitude() {
        let theta = ParamVector::new([(Param::Amplitude, 1.2)]);
        let y = embed(FuncId::InvertedSigmoid, &theta, Interval::new(0, 99), 100);
        let fit = fit_shape(canonical(FuncId::InvertedSigmoid), &y, Interval::new(0, 99), None, FreqBand::default()).unwrap();
        assert_eq!(fit.func, FuncId::Sigmoid);
        let (func, theta) = fit.to_params();
        assert_eq!(func, FuncId::InvertedSigmoid);
        assert!((theta.amplitude() - 1.2).abs() < 1e-12);
    }

    #[test]
    fn kurtosis_separates_noise_families() {
        let mut correct = 0;
        for trial in 0..200u64 {
            let func = if trial % 2 == 0 { FuncId::GaussianNoise } else { FuncId::LaplaceNoise };
            let z = funclib::noise_unit(func, 2000, trial);
            if classify_fluctuation(&z) == func {
                correct += 1;
            }
        }
        assert!(correct >= 190, "{correct}");
    }

    #[test]
    fn local_baseline_interpolates_between_flanks() {
        let x: Vec<f64> = (0..50).map(|t| 0.5 * t as f64).collect();
        let base = local_baseline(&x, Interval::new(10, 39), 5);
        for (k, b) in base.iter().enumerate() {
            assert!((b - 0.5 * (k + 10) as f64).abs() < 1e-12);
        }
        assert!(detrended(&x, Interval::new(10, 39), 5).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn short_interval_skips_periodic_candidates() {
        let cat = Catalog::standard(300).unwrap();
        let cands: Vec<_> = cat.specs().iter().collect();
        let mut y = vec![0.0; 300];
        y[100] = 2.0;
        let fit = fit_component(&vec![0.0; 300], &y, Interval::new(100, 100), &cands, 5).unwrap();
        assert!(fit.target.skipped.contains(&FuncId::Sinusoidal));
        assert_eq!(fit.target.best.unwrap().func, FuncId::Spike);
    }
}
