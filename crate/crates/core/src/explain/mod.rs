//! Baseline explainers: least-squares template matching, nearest-neighbour
//! retrieval, and an oracle that echoes ground truth.

mod features;
mod fit;
mod retrieval;
mod segment;

use serde::{Deserialize, Serialize};

pub use features::{feature_embed, feature_names, feature_version_hash, FEATURE_DIM, FEATURE_VERSION};
pub use fit::{
    classify_fluctuation, detrended, fit_component, local_baseline, ComponentFit, FitResult, SideEvidence,
    KURTOSIS_SPLIT,
};
pub use retrieval::{difference_embedding, explain_retrieval, PoolEntry, RetrievalPool};
pub use segment::{extend_support, segment_delta, SegmentConfig};

use crate::error::{Error, Result};
use crate::funclib::{Catalog, Category, FuncId, FunctionSpec, Interval, LibraryConfig, Param};
use crate::pairgen::PairSample;
use crate::schema::{self, DifferenceRecord, ExplanationList, Magnitude, Presence};
use crate::series::TimeSeries;
use crate::stats;
use fit::{canonical, fit_variants, ShapeFit};

/// Knobs of [`explain_lsq`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    pub window: usize,
    pub tol: f64,
    pub gap_merge: usize,
    /// Minimum fitted amplitude for a side to count as carrying the
    /// component.
    pub presence_threshold: f64,
    /// Supports grow outward through samples with `|Δ| > eps`.
    pub eps: f64,
    /// Relative residual below which a single template explains Δ.
    pub delta_fit: f64,
    /// Relative residual (per side) below which both sides are taken to
    /// carry the same periodic shape with different parameters.
    pub side_fit: f64,
    /// Upper bound on matching-pursuit rounds.
    pub max_components: usize,
    /// Duration bounds used to restrict candidates.
    pub library: LibraryConfig,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            window: 5,
            tol: 0.05,
            gap_merge: 10,
            presence_threshold: 0.15,
            eps: 1e-9,
            delta_fit: 0.1,
            side_fit: 0.15,
            max_components: 8,
            library: LibraryConfig::default(),
        }
    }
}

impl ExplainConfig {
    pub fn segment(&self) -> SegmentConfig {
        SegmentConfig {
            window: self.window,
            tol: self.tol,
            gap_merge: self.gap_merge,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.presence_threshold >= 0.0 && self.eps >= 0.0) {
            return Err(Error::Config("tol must be positive; thresholds non-negative".into()));
        }
        if self.window == 0 {
            return Err(Error::Config("window must be at least 1".into()));
        }
        self.library.validate()
    }
}

/// `Δ(t) = tgt(t) − ref(t)`.
pub fn compute_delta(reference: &TimeSeries, target: &TimeSeries) -> Result<TimeSeries> {
    if reference.len() != target.len() {
        return Err(Error::Data(format!(
            "reference has {} samples, target {}",
            reference.len(),
            target.len()
        )));
    }
    TimeSeries::new(
        target
            .values()
            .iter()
            .zip(reference.values())
            .map(|(t, r)| t - r)
            .collect(),
    )
}

/// Ground truth of a generated sample.
pub fn explain_oracle(sample: &PairSample) -> ExplanationList {
    sample.pair.ground_truth.clone()
}

/// What one segment was explained as, plus what to subtract before the next
/// matching-pursuit round.
struct Explained {
    record: DifferenceRecord,
    window: Interval,
    delta_fit: Vec<f64>,
    ref_fit: Vec<f64>,
    tgt_fit: Vec<f64>,
    /// The fit left most of the energy unexplained; clear the window.
    exhaustive: bool,
}

fn clip_variants(seg: Interval, length: usize) -> Vec<Interval> {
    let starts = [seg.start.checked_sub(1), Some(seg.start)];
    let ends = [Some(seg.end), (seg.end + 1 < length).then_some(seg.end + 1)];
    let mut out = Vec::new();
    for s in starts.into_iter().flatten() {
        for e in ends.into_iter().flatten() {
            out.push(Interval::new(s, e));
        }
    }
    out
}

fn hull(intervals: &[Interval]) -> Interval {
    let s = intervals.iter().map(|i| i.start).min().unwrap_or(0);
    let e = intervals.iter().map(|i| i.end).max().unwrap_or(0);
    Interval::new(s, e)
}

fn embed(values: &[f64], at: Interval, window: Interval) -> Vec<f64> {
    let mut out = vec![0.0; window.len()];
    out[at.start - window.start..=at.end - window.start].copy_from_slice(values);
    out
}

fn projection(y: &[f64], h: &[f64]) -> f64 {
    let hh = stats::dot(h, h);
    if hh > 0.0 {
        stats::dot(y, h) / hh
    } else {
        0.0
    }
}

fn signed_func(func: FuncId, sign: f64) -> FuncId {
    if sign < 0.0 {
        func.mirror().unwrap_or(func)
    } else {
        func
    }
}

/// Type and fields from the amplitudes each side carries of one template.
fn decide(func: FuncId, interval: Interval, a_ref: f64, a_tgt: f64, coef: f64, threshold: f64) -> DifferenceRecord {
    let (on_ref, on_tgt) = (a_ref.abs() > threshold, a_tgt.abs() > threshold);
    match (on_ref, on_tgt) {
        (true, true) => {
            let dominant = if a_tgt.abs() >= a_ref.abs() { a_tgt } else { a_ref };
            let magnitude = if a_tgt.abs() > a_ref.abs() {
                Magnitude::Larger
            } else {
                Magnitude::Smaller
            };
            DifferenceRecord::type2(signed_func(func, dominant), interval, Param::Amplitude, magnitude)
        }
        (true, false) => DifferenceRecord::type1(signed_func(func, a_ref), interval, Presence::Absent),
        (false, true) => DifferenceRecord::type1(signed_func(func, a_tgt), interval, Presence::Present),
        // neither side clearly carries it: read Δ as an added component
        (false, false) => DifferenceRecord::type1(signed_func(func, coef), interval, Presence::Present),
    }
}

fn relative_residual(energy: f64, explained: f64) -> f64 {
    if energy > 0.0 {
        ((energy - explained).max(0.0) / energy).sqrt()
    } else {
        0.0
    }
}

fn explain_segment(
    delta: &[f64],
    reference: &[f64],
    target: &[f64],
    seg: Interval,
    catalog: &Catalog,
    config: &ExplainConfig,
) -> Explained {
    let length = delta.len();
    let variants = clip_variants(seg, length);
    let window = hull(&variants);
    let energy: f64 = delta[window.start..=window.end].iter().map(|v| v * v).sum();

    // 1. a single signed template on Δ
    let reps: Vec<&FunctionSpec> = catalog
        .specs()
        .iter()
        .filter(|s| !s.id.is_stochastic() && canonical(s.id) == s.id)
        .collect();
    let mut fits = fit_variants(delta, &variants, &reps, true);
    if fits.is_empty() {
        fits = fit_variants(delta, &variants, &reps, false);
    }
    let best = fits
        .iter()
        .copied()
        .fold(None::<ShapeFit>, |acc, f| match acc {
            Some(a) if a.explained >= f.explained => Some(a),
            _ => Some(f),
        });
    if let Some(best) = best {
        if relative_residual(energy, best.explained) < config.delta_fit {
            let h = best.values();
            let unit: Vec<f64> = h.iter().map(|v| v / best.coef).collect();
            let y_ref = detrended(reference, best.interval, config.window);
            let y_tgt = detrended(target, best.interval, config.window);
            let (a_ref, a_tgt) = if best.coef != 0.0 {
                (projection(&y_ref, &unit), projection(&y_tgt, &unit))
            } else {
                (0.0, 0.0)
            };
            let record = decide(best.func, best.interval, a_ref, a_tgt, best.coef, config.presence_threshold);
            let scale = |a: f64| -> Vec<f64> { embed(&unit.iter().map(|v| a * v).collect::<Vec<_>>(), best.interval, window) };
            return Explained {
                record,
                window,
                delta_fit: embed(&h, best.interval, window),
                ref_fit: scale(a_ref),
                tgt_fit: scale(a_tgt),
                exhaustive: false,
            };
        }
    }

    // 2. the same periodic shape on both sides with different parameters
    let periodic: Vec<&FunctionSpec> = catalog.in_category(Category::Periodic).collect();
    let mut side_best: Option<(f64, Interval, ShapeFit, ShapeFit)> = None;
    for v in &variants {
        if v.len() < 3 {
            continue;
        }
        let y_ref = detrended(reference, *v, config.window);
        let y_tgt = detrended(target, *v, config.window);
        let (e_ref, e_tgt) = (stats::dot(&y_ref, &y_ref), stats::dot(&y_tgt, &y_tgt));
        let fr = fit_variants(&y_ref, &[Interval::new(0, v.len() - 1)], &periodic, false);
        let ft = fit_variants(&y_tgt, &[Interval::new(0, v.len() - 1)], &periodic, false);
        for (r, t) in fr.iter().zip(&ft) {
            let score = relative_residual(e_ref, r.explained).max(relative_residual(e_tgt, t.explained));
            if side_best.as_ref().is_none_or(|b| score < b.0) {
                side_best = Some((score, *v, *r, *t));
            }
        }
    }
    if let Some((score, v, r, t)) = side_best {
        let (_, theta_r) = r.to_params();
        let (_, theta_t) = t.to_params();
        let (ar, at) = (theta_r.amplitude().abs(), theta_t.amplitude().abs());
        if score < config.side_fit && ar > config.presence_threshold && at > config.presence_threshold {
            let rel = |x: f64, y: f64| (x - y).abs() / x.abs().max(y.abs()).max(f64::MIN_POSITIVE);
            let (fr, ft) = (theta_r.frequency(), theta_t.frequency());
            let (param, larger) = if rel(fr, ft) > rel(ar, at) {
                (Param::Frequency, ft > fr)
            } else {
                (Param::Amplitude, at > ar)
            };
            let magnitude = if larger { Magnitude::Larger } else { Magnitude::Smaller };
            let ref_fit = embed(&r.values(), v, window);
            let tgt_fit = embed(&t.values(), v, window);
            let delta_fit = tgt_fit.iter().zip(&ref_fit).map(|(a, b)| a - b).collect();
            return Explained {
                record: DifferenceRecord::type2(r.func, v, param, magnitude),
                window,
                delta_fit,
                ref_fit,
                tgt_fit,
                exhaustive: false,
            };
        }
    }

    // 3. a fluctuation: Δ is one noise realization scaled by the amplitude
    //    change, so it serves as its own template
    let d = &delta[seg.start..=seg.end];
    let func = classify_fluctuation(d);
    let y_ref = detrended(reference, seg, config.window);
    let y_tgt = detrended(target, seg, config.window);
    let (a_ref, a_tgt) = (projection(&y_ref, d), projection(&y_tgt, d));
    let record = decide(func, seg, a_ref, a_tgt, 1.0, config.presence_threshold);
    Explained {
        record,
        window,
        delta_fit: embed(d, seg, window),
        ref_fit: embed(&d.iter().map(|v| a_ref * v).collect::<Vec<_>>(), seg, window),
        tgt_fit: embed(&d.iter().map(|v| a_tgt * v).collect::<Vec<_>>(), seg, window),
        exhaustive: true,
    }
}

/// Least-squares explainer.
///
/// Segments Δ, then repeatedly explains the highest-energy segment and
/// subtracts the fitted contribution before re-segmenting (matching
/// pursuit). Each segment is read, in order of preference, as one signed
/// library template on Δ (TYPE1 or an AMPLITUDE change, decided by how much
/// of the template each side carries), as the same periodic shape on both
/// sides with different parameters, or as a fluctuation classified by
/// excess kurtosis. Identical inputs yield an empty list.
pub fn explain_lsq(reference: &TimeSeries, target: &TimeSeries, config: &ExplainConfig) -> Result<ExplanationList> {
    config.validate()?;
    let length = reference.len();
    let catalog = Catalog::new(&config.library, length)?;
    let mut delta = compute_delta(reference, target)?.into_inner();
    let mut ref_rest = reference.values().to_vec();
    let mut tgt_rest = target.values().to_vec();
    let mut out = Vec::new();
    for _ in 0..config.max_components {
        let segs = segment_delta(&delta, &config.segment());
        let Some(seg) = segs
            .into_iter()
            .map(|s| extend_support(&delta, s, config.eps))
            .map(|s| (delta[s.start..=s.end].iter().map(|v| v * v).sum::<f64>(), s))
            .fold(None::<(f64, Interval)>, |acc, x| match acc {
                Some(a) if a.0 >= x.0 => Some(a),
                _ => Some(x),
            })
            .map(|(_, s)| s)
        else {
            break;
        };
        let ex = explain_segment(&delta, &ref_rest, &tgt_rest, seg, &catalog, config);
        let w = ex.window;
        for (k, t) in (w.start..=w.end).enumerate() {
            if ex.exhaustive {
                delta[t] = 0.0;
            } else {
                delta[t] -= ex.delta_fit[k];
            }
            ref_rest[t] -= ex.ref_fit[k];
            tgt_rest[t] -= ex.tgt_fit[k];
        }
        out.push(ex.record);
    }
    for r in &out {
        let v = schema::validate(r, Some(length));
        if !v.is_empty() {
            return Err(Error::Schema { record: 0, violations: v });
        }
    }
    schema::sort_records(&mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funclib::{self, ParamVector};
    use crate::pairgen::{BaselineKind, BaselineSource, GenConfig, Generator};
    use crate::schema::DiffType;

    fn series(v: Vec<f64>) -> TimeSeries {
        TimeSeries::new(v).unwrap()
    }

    #[test]
    fn delta_arithmetic() {
        let d = compute_delta(&series(vec![1.0, 2.0]), &series(vec![3.0, 1.0])).unwrap();
        assert_eq!(d.values(), &[2.0, -1.0]);
        assert!(compute_delta(&series(vec![1.0]), &series(vec![1.0, 2.0])).is_err());
    }

    #[test]
    fn identical_inputs_explain_to_nothing() {
        let x = series((0..300).map(|t| (t as f64 * 0.1).sin()).collect());
        assert!(explain_lsq(&x, &x, &ExplainConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn triangle_frequency_change() {
        let cat = Catalog::standard(300).unwrap();
        let spec = cat.spec(FuncId::TriangleWave);
        let iv = Interval::new(36, 237);
        let theta = ParamVector::new([(Param::Amplitude, 1.75), (Param::Frequency, 4.0), (Param::Phase, 1.0)]);
        let wider = funclib::modify_param_with(spec, &theta, Param::Frequency, 2.2).unwrap();
        let r = funclib::evaluate(spec, &theta, iv, 300, 0).unwrap();
        let t = funclib::evaluate(spec, &wider, iv, 300, 0).unwrap();
        let out = explain_lsq(&r, &t, &ExplainConfig::default()).unwrap();
        assert_eq!(out.len(), 1, "{out:?}");
        let rec = &out[0];
        assert_eq!(rec.func, FuncId::TriangleWave);
        assert_eq!(rec.param, Some(Param::Frequency));
        assert_eq!(rec.magnitude, Some(Magnitude::Larger));
        assert!(crate::evaluator::interval_iou(rec.interval(), iv) >= 0.8);
    }

    #[test]
    fn single_drop() {
        let cat = Catalog::standard(300).unwrap();
        let theta = ParamVector::new([(Param::Amplitude, 2.0)]);
        let d = funclib::evaluate(cat.spec(FuncId::Drop), &theta, Interval::new(268, 268), 300, 0).unwrap();
        let out = explain_lsq(&TimeSeries::zeros(300), &d, &ExplainConfig::default()).unwrap();
        assert_eq!(out, vec![DifferenceRecord::type1(FuncId::Drop, Interval::new(268, 268), Presence::Present)]);
    }

    #[test]
    fn clean_pairs_are_mostly_recovered() {
        let config = GenConfig {
            source: BaselineSource::Synthetic(BaselineKind::PiecewiseConst { segments: Some(1) }),
            categories: Some(vec![Category::Trend, Category::Periodic, Category::Event]),
            seed: 2024,
            ..GenConfig::default()
        };
        let g = Generator::new(config).unwrap();
        let mut misses = Vec::new();
        let n = 60;
        for i in 0..n {
            let s = g.sample(i).unwrap();
            let out = explain_lsq(&s.pair.reference, &s.pair.target, &ExplainConfig::default()).unwrap();
            let gt = &s.pair.ground_truth[0];
            if out.len() != 1 || out[0].func != gt.func {
                misses.push((gt.clone(), out));
            }
        }
        assert!(misses.len() <= n as usize / 10, "{misses:#?}");
    }

    #[test]
    fn type_fields_on_clean_amplitude_change() {
        let cat = Catalog::standard(300).unwrap();
        let spec = cat.spec(FuncId::Sigmoid);
        let iv = Interval::new(50, 200);
        let theta = ParamVector::new([(Param::Amplitude, 1.0)]);
        let big = funclib::modify_param_with(spec, &theta, Param::Amplitude, 1.0).unwrap();
        let r = funclib::evaluate(spec, &big, iv, 300, 0).unwrap();
        let t = funclib::evaluate(spec, &theta, iv, 300, 0).unwrap();
        let out = explain_lsq(&r, &t, &ExplainConfig::default()).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].diff_type, DiffType::Type2);
        assert_eq!(out[0].func, FuncId::Sigmoid);
        assert_eq!(out[0].magnitude, Some(Magnitude::Smaller));
        assert_eq!(out[0].interval(), iv);
    }
}
