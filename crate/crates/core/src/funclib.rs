//! Component-function library.
//!
//! Twenty-eight parametric shapes in four categories. Every deterministic
//! shape is written on interval-local time `u = (t - start) / (end - start)`
//! so the same parameters describe the same picture at any interval length.
//! Amplitudes are always the leading parameter and enter linearly.

use std::collections::BTreeMap;
use std::f64::consts::{LN_10, PI, TAU};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::series::TimeSeries;

/// Growth rate of the exponential trend shapes.
pub const EXP_RATE: f64 = 4.0;
/// Steepness of the sigmoid shapes.
pub const SIGMOID_STEEPNESS: f64 = 12.0;
/// Width of the Gaussian bump in interval-local time.
pub const GAUSSIAN_WIDTH: f64 = 0.15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Category {
    Trend,
    Periodic,
    Fluctuation,
    Event,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::Trend,
        Category::Periodic,
        Category::Fluctuation,
        Category::Event,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Trend => "TREND",
            Category::Periodic => "PERIODIC",
            Category::Fluctuation => "FLUCTUATION",
            Category::Event => "EVENT",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown category {s:?}")))
    }
}

/// Parameter names shared by all component functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Param {
    Amplitude,
    Frequency,
    Phase,
}

impl Param {
    pub const ALL: [Param; 3] = [Param::Amplitude, Param::Frequency, Param::Phase];

    pub fn as_str(self) -> &'static str {
        match self {
            Param::Amplitude => "AMPLITUDE",
            Param::Frequency => "FREQUENCY",
            Param::Phase => "PHASE",
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Param {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Param::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown parameter {s:?}")))
    }
}

macro_rules! func_ids {
    ($($variant:ident => $name:literal, $cat:ident;)*) => {
        /// Identifier of a component function, serialized in uppercase.
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum FuncId {
            $(#[serde(rename = $name)] $variant,)*
        }

        impl FuncId {
            /// Every identifier, grouped by category in table order.
            pub const ALL: [FuncId; 28] = [$(FuncId::$variant,)*];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(FuncId::$variant => $name,)*
                }
            }

            pub fn category(self) -> Category {
                match self {
                    $(FuncId::$variant => Category::$cat,)*
                }
            }
        }
    };
}

func_ids! {
    LinearIncrease => "LINEAR_INCREASE", Trend;
    LinearDecrease => "LINEAR_DECREASE", Trend;
    QuadraticIncrease => "QUADRATIC_INCREASE", Trend;
    QuadraticDecrease => "QUADRATIC_DECREASE", Trend;
    CubicIncrease => "CUBIC_INCREASE", Trend;
    CubicDecrease => "CUBIC_DECREASE", Trend;
    ExponentialGrowth => "EXPONENTIAL_GROWTH", Trend;
    InvertedExponentialGrowth => "INVERTED_EXPONENTIAL_GROWTH", Trend;
    ExponentialDecay => "EXPONENTIAL_DECAY", Trend;
    InvertedExponentialDecay => "INVERTED_EXPONENTIAL_DECAY", Trend;
    LogIncrease => "LOG_INCREASE", Trend;
    LogDecrease => "LOG_DECREASE", Trend;
    Sigmoid => "SIGMOID", Trend;
    InvertedSigmoid => "INVERTED_SIGMOID", Trend;
    Gaussian => "GAUSSIAN", Trend;
    InvertedGaussian => "INVERTED_GAUSSIAN", Trend;
    Sinusoidal => "SINUSOIDAL", Periodic;
    Sawtooth => "SAWTOOTH", Periodic;
    SquareWave => "SQUARE_WAVE", Periodic;
    TriangleWave => "TRIANGLE_WAVE", Periodic;
    GaussianNoise => "GAUSSIAN_NOISE", Fluctuation;
    LaplaceNoise => "LAPLACE_NOISE", Fluctuation;
    Spike => "SPIKE", Event;
    Drop => "DROP", Event;
    PositiveStep => "POSITIVE_STEP", Event;
    NegativeStep => "NEGATIVE_STEP", Event;
    PositivePulse => "POSITIVE_PULSE", Event;
    NegativePulse => "NEGATIVE_PULSE", Event;
}

impl FuncId {
    /// The function whose shape is the pointwise negation of this one.
    pub fn mirror(self) -> Option<FuncId> {
        use FuncId::*;
        let m = match self {
            LinearIncrease => LinearDecrease,
            LinearDecrease => LinearIncrease,
            QuadraticIncrease => QuadraticDecrease,
            QuadraticDecrease => QuadraticIncrease,
            CubicIncrease => CubicDecrease,
            CubicDecrease => CubicIncrease,
            ExponentialGrowth => InvertedExponentialGrowth,
            InvertedExponentialGrowth => ExponentialGrowth,
            ExponentialDecay => InvertedExponentialDecay,
            InvertedExponentialDecay => ExponentialDecay,
            LogIncrease => LogDecrease,
            LogDecrease => LogIncrease,
            Sigmoid => InvertedSigmoid,
            InvertedSigmoid => Sigmoid,
            Gaussian => InvertedGaussian,
            InvertedGaussian => Gaussian,
            Spike => Drop,
            Drop => Spike,
            PositiveStep => NegativeStep,
            NegativeStep => PositiveStep,
            PositivePulse => NegativePulse,
            NegativePulse => PositivePulse,
            Sinusoidal | Sawtooth | SquareWave | TriangleWave | GaussianNoise | LaplaceNoise => {
                return None
            }
        };
        Some(m)
    }

    /// Ordered parameter names.
    pub fn params(self) -> &'static [Param] {
        match self.category() {
            Category::Periodic => &[Param::Amplitude, Param::Frequency, Param::Phase],
            _ => &[Param::Amplitude],
        }
    }

    /// Parameters eligible to differ in a Type-2 difference.
    pub fn modifiable(self) -> &'static [Param] {
        match self.category() {
            Category::Periodic => &[Param::Amplitude, Param::Frequency],
            _ => &[Param::Amplitude],
        }
    }

    pub fn is_stochastic(self) -> bool {
        self.category() == Category::Fluctuation
    }

    /// Single-sample events.
    pub fn is_point_event(self) -> bool {
        matches!(self, FuncId::Spike | FuncId::Drop)
    }
}

impl fmt::Display for FuncId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FuncId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FuncId::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown component function {s:?}")))
    }
}

/// Closed real interval `[lo, hi]`, serialized as a two-element array.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 2]", from = "[f64; 2]")]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Range { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    fn check(&self, what: &str) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi) {
            return Err(Error::Config(format!(
                "{what} range [{}, {}] is empty or non-finite",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.lo + u * (self.hi - self.lo)
    }

    /// Uniform draw over the integers inside the range.
    pub fn sample_integer<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let lo = self.lo.ceil() as i64;
        let hi = self.hi.floor() as i64;
        rng.random_range(lo..=hi) as f64
    }
}

impl From<Range> for [f64; 2] {
    fn from(r: Range) -> Self {
        [r.lo, r.hi]
    }
}

impl From<[f64; 2]> for Range {
    fn from([lo, hi]: [f64; 2]) -> Self {
        Range { lo, hi }
    }
}

/// How a Type-2 difference enlarges the magnitude of its parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ModRule {
    /// `|v'| = |v| + eta`, eta > 0.
    Offset(Range),
    /// `|v'| = |v| * rho`, rho > 1.
    Ratio(Range),
}

impl ModRule {
    pub fn range(&self) -> Range {
        match *self {
            ModRule::Offset(r) | ModRule::Ratio(r) => r,
        }
    }

    /// Applies the rule with a fixed draw, keeping the sign of `value`.
    pub fn apply(&self, value: f64, draw: f64) -> f64 {
        let sign = if value < 0.0 { -1.0 } else { 1.0 };
        match self {
            ModRule::Offset(_) => sign * (value.abs() + draw),
            ModRule::Ratio(_) => sign * value.abs() * draw,
        }
    }
}

/// Tunable numeric ranges of the library. Duration bounds are fractions
/// of the series length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LibraryConfig {
    pub amplitude: Range,
    /// Cycles per interval; base draws are integers.
    pub frequency: Range,
    pub phase: Range,
    pub amplitude_offset: Range,
    pub frequency_ratio: Range,
    pub long_min_fraction: f64,
    pub long_max_fraction: f64,
    pub event_max_fraction: f64,
}

impl Default for LibraryConfig {
    fn default() -> Self {
        LibraryConfig {
            amplitude: Range::new(0.5, 3.0),
            frequency: Range::new(2.0, 10.0),
            phase: Range::new(0.0, TAU),
            amplitude_offset: Range::new(0.5, 1.5),
            frequency_ratio: Range::new(1.5, 3.0),
            long_min_fraction: 0.15,
            long_max_fraction: 0.9,
            event_max_fraction: 0.05,
        }
    }
}

impl LibraryConfig {
    pub fn validate(&self) -> Result<()> {
        self.amplitude.check("amplitude")?;
        self.frequency.check("frequency")?;
        self.phase.check("phase")?;
        self.amplitude_offset.check("amplitude_offset")?;
        self.frequency_ratio.check("frequency_ratio")?;
        if self.amplitude.lo <= 0.0 {
            return Err(Error::Config("amplitude range must be positive".into()));
        }
        if self.frequency.hi.floor() < self.frequency.lo.ceil() || self.frequency.lo <= 0.0 {
            return Err(Error::Config(
                "frequency range must contain a positive integer".into(),
            ));
        }
        if self.amplitude_offset.lo <= 0.0 {
            return Err(Error::Config("offset values must be > 0".into()));
        }
        if self.frequency_ratio.lo <= 1.0 {
            return Err(Error::Config("ratio values must be > 1".into()));
        }
        for (name, f) in [
            ("long_min_fraction", self.long_min_fraction),
            ("long_max_fraction", self.long_max_fraction),
            ("event_max_fraction", self.event_max_fraction),
        ] {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1]")));
            }
        }
        Ok(())
    }
}

/// Admissible interval lengths, in samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DurationBounds {
    pub min: usize,
    pub max: usize,
}

impl DurationBounds {
    pub fn admits(&self, len: usize) -> bool {
        self.min <= len && len <= self.max
    }
}

/// Static catalog entry for one component function.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FunctionSpec {
    pub id: FuncId,
    pub category: Category,
    pub params: Vec<Param>,
    pub base_ranges: BTreeMap<Param, Range>,
    pub duration: DurationBounds,
    pub modifiable: BTreeMap<Param, ModRule>,
}

/// The full library instantiated for one series length.
#[derive(Clone, Debug)]
pub struct Catalog {
    length: usize,
    specs: Vec<FunctionSpec>,
}

impl Catalog {
    /// Builds all 28 specs for series length `length` and checks the
    /// duration invariants.
    pub fn new(config: &LibraryConfig, length: usize) -> Result<Self> {
        config.validate()?;
        if length == 0 {
            return Err(Error::Config("series length must be positive".into()));
        }
        let t = length as f64;
        let long = DurationBounds {
            min: ((config.long_min_fraction * t).ceil() as usize).max(1),
            max: ((config.long_max_fraction * t).floor() as usize).min(length),
        };
        let event_max = ((config.event_max_fraction * t).floor() as usize)
            .max(2)
            .min(length);
        let specs = FuncId::ALL
            .iter()
            .map(|&id| {
                let duration = match id.category() {
                    Category::Event if id.is_point_event() => DurationBounds { min: 1, max: 1 },
                    // Two samples keep steps and pulses distinguishable
                    // from single-sample spikes.
                    Category::Event => DurationBounds {
                        min: 2,
                        max: event_max,
                    },
                    _ => long,
                };
                let base_ranges = id
                    .params()
                    .iter()
                    .map(|&p| {
                        let r = match p {
                            Param::Amplitude => config.amplitude,
                            Param::Frequency => config.frequency,
                            Param::Phase => config.phase,
                        };
                        (p, r)
                    })
                    .collect();
                let modifiable = id
                    .modifiable()
                    .iter()
                    .map(|&p| {
                        let rule = match p {
                            Param::Frequency => ModRule::Ratio(config.frequency_ratio),
                            _ => ModRule::Offset(config.amplitude_offset),
                        };
                        (p, rule)
                    })
                    .collect();
                FunctionSpec {
                    id,
                    category: id.category(),
                    params: id.params().to_vec(),
                    base_ranges,
                    duration,
                    modifiable,
                }
            })
            .collect();
        let catalog = Catalog { length, specs };
        catalog.check_invariants()?;
        Ok(catalog)
    }

    /// Library with default ranges.
    pub fn standard(length: usize) -> Result<Self> {
        Catalog::new(&LibraryConfig::default(), length)
    }

    fn check_invariants(&self) -> Result<()> {
        let mut shortest_long = usize::MAX;
        let mut longest_event = 0;
        for s in &self.specs {
            let d = s.duration;
            if !(1 <= d.min && d.min <= d.max && d.max <= self.length) {
                return Err(Error::Config(format!(
                    "{}: duration bounds [{}, {}] invalid for length {}",
                    s.id, d.min, d.max, self.length
                )));
            }
            if s.category == Category::Event {
                longest_event = longest_event.max(d.max);
            } else {
                shortest_long = shortest_long.min(d.min);
            }
        }
        if longest_event >= shortest_long {
            return Err(Error::Config(format!(
                "event intervals (up to {longest_event}) must be shorter than other components (from {shortest_long}); length {} is too small",
                self.length
            )));
        }
        Ok(())
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn specs(&self) -> &[FunctionSpec] {
        &self.specs
    }

    pub fn spec(&self, id: FuncId) -> &FunctionSpec {
        // specs are stored in FuncId::ALL order
        &self.specs[id as usize]
    }

    pub fn in_category(&self, category: Category) -> impl Iterator<Item = &FunctionSpec> {
        self.specs.iter().filter(move |s| s.category == category)
    }
}

/// Parameter values of one instantiated component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(BTreeMap<Param, f64>);

impl ParamVector {
    pub fn new(entries: impl IntoIterator<Item = (Param, f64)>) -> Self {
        ParamVector(entries.into_iter().collect())
    }

    pub fn get(&self, p: Param) -> Option<f64> {
        self.0.get(&p).copied()
    }

    pub fn amplitude(&self) -> f64 {
        self.get(Param::Amplitude).unwrap_or(0.0)
    }

    pub fn frequency(&self) -> f64 {
        self.get(Param::Frequency).unwrap_or(1.0)
    }

    pub fn phase(&self) -> f64 {
        self.get(Param::Phase).unwrap_or(0.0)
    }

    pub fn set(&mut self, p: Param, value: f64) {
        self.0.insert(p, value);
    }

    pub fn iter(&self) -> impl Iterator<Item = (Param, f64)> + '_ {
        self.0.iter().map(|(&p, &v)| (p, v))
    }

    /// Checks that keys match `spec.params` exactly and values are finite.
    pub fn check(&self, spec: &FunctionSpec) -> Result<()> {
        let keys: Vec<Param> = self.0.keys().copied().collect();
        let mut expected = spec.params.clone();
        expected.sort();
        if keys != expected {
            return Err(Error::Precondition(format!(
                "{} expects parameters {:?}, got {:?}",
                spec.id, expected, keys
            )));
        }
        if let Some((p, v)) = self.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Precondition(format!("{}: {p} = {v} is not finite", spec.id)));
        }
        Ok(())
    }
}

/// Inclusive sample-index interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Interval {
    pub start: usize,
    pub end: usize,
}

impl Interval {
    pub fn new(start: usize, end: usize) -> Self {
        Interval { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, t: usize) -> bool {
        self.start <= t && t <= self.end
    }

    pub fn check(&self, length: usize) -> Result<()> {
        if self.start > self.end || self.end >= length {
            return Err(Error::Precondition(format!(
                "interval [{}, {}] invalid for length {length}",
                self.start, self.end
            )));
        }
        Ok(())
    }

    /// Interval-local time of sample `t`.
    pub fn local_time(&self, t: usize) -> f64 {
        if self.end == self.start {
            0.0
        } else {
            (t as f64 - self.start as f64) / (self.end - self.start) as f64
        }
    }
}

fn sawtooth_wave(x: f64) -> f64 {
    2.0 * (x - x.floor()) - 1.0
}

fn square_wave(x: f64) -> f64 {
    if x - x.floor() < 0.5 {
        1.0
    } else {
        -1.0
    }
}

fn triangle_wave(x: f64) -> f64 {
    let y = x - 0.25;
    4.0 * (y - y.floor() - 0.5).abs() - 1.0
}

/// Unit-amplitude value of a deterministic shape at local time `u`.
///
/// `frequency` and `phase` are only read by periodic shapes. Stochastic
/// shapes return 0; their samples come from [`noise_unit`].
pub fn unit_shape(id: FuncId, u: f64, frequency: f64, phase: f64) -> f64 {
    use FuncId::*;
    let exp_growth = |u: f64| (EXP_RATE * u).exp_m1() / EXP_RATE.exp_m1();
    let sigmoid = |u: f64| 1.0 / (1.0 + (-SIGMOID_STEEPNESS * (u - 0.5)).exp());
    let gauss = |u: f64| (-(u - 0.5).powi(2) / (2.0 * GAUSSIAN_WIDTH * GAUSSIAN_WIDTH)).exp();
    let cycles = frequency * u + phase / TAU;
    match id {
        LinearIncrease => u,
        LinearDecrease => -u,
        QuadraticIncrease => u * u,
        QuadraticDecrease => -u * u,
        CubicIncrease => u * u * u,
        CubicDecrease => -u * u * u,
        ExponentialGrowth => exp_growth(u),
        InvertedExponentialGrowth => -exp_growth(u),
        ExponentialDecay => (-EXP_RATE * u).exp(),
        InvertedExponentialDecay => -(-EXP_RATE * u).exp(),
        LogIncrease => (9.0 * u).ln_1p() / LN_10,
        LogDecrease => -(9.0 * u).ln_1p() / LN_10,
        Sigmoid => sigmoid(u),
        InvertedSigmoid => -sigmoid(u),
        Gaussian => gauss(u),
        InvertedGaussian => -gauss(u),
        Sinusoidal => (2.0 * PI * frequency * u + phase).sin(),
        Sawtooth => sawtooth_wave(cycles),
        SquareWave => square_wave(cycles),
        TriangleWave => triangle_wave(cycles),
        GaussianNoise | LaplaceNoise => 0.0,
        Spike | PositivePulse => 1.0,
        Drop | NegativePulse => -1.0,
        // two-level staircase inside the interval
        PositiveStep => {
            if u >= 0.5 {
                1.0
            } else {
                0.5
            }
        }
        NegativeStep => {
            if u >= 0.5 {
                -1.0
            } else {
                -0.5
            }
        }
    }
}

/// Unit-variance noise realization of length `len` for a fluctuation shape.
pub fn noise_unit(id: FuncId, len: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng::keyed(seed);
    match id {
        FuncId::LaplaceNoise => {
            let scale = std::f64::consts::FRAC_1_SQRT_2;
            (0..len)
                .map(|_| {
                    // inverse CDF on (-1/2, 1/2)
                    let u: f64 = rng.random::<f64>() - 0.5;
                    let u = if u == -0.5 { 0.0 } else { u };
                    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
                })
                .collect()
        }
        _ => (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
    }
}

/// Evaluates one component on a length-`length` grid: zero outside
/// `interval`, the parameterized shape inside. `noise_seed` fixes the
/// realization of stochastic shapes and is ignored otherwise.
pub fn evaluate(
    spec: &FunctionSpec,
    theta: &ParamVector,
    interval: Interval,
    length: usize,
    noise_seed: u64,
) -> Result<TimeSeries> {
    theta.check(spec)?;
    interval.check(length)?;
    let mut out = vec![0.0; length];
    let amp = theta.amplitude();
    if spec.id.is_stochastic() {
        let z = noise_unit(spec.id, interval.len(), noise_seed);
        for (o, z) in out[interval.start..=interval.end].iter_mut().zip(z) {
            *o = amp * z;
        }
    } else {
        let (f, phi) = (theta.frequency(), theta.phase());
        for (t, o) in out.iter_mut().enumerate().take(interval.end + 1).skip(interval.start) {
            *o = amp * unit_shape(spec.id, interval.local_time(t), f, phi);
        }
    }
    TimeSeries::new(out)
}

/// Draws every parameter independently and uniformly from its base range.
pub fn sample_base_params<R: Rng + ?Sized>(spec: &FunctionSpec, rng: &mut R) -> ParamVector {
    ParamVector::new(spec.params.iter().map(|&p| {
        let range = spec.base_ranges[&p];
        let v = match p {
            Param::Frequency => range.sample_integer(rng),
            _ => range.sample(rng),
        };
        (p, v)
    }))
}

/// Draws an interval length uniformly from the duration bounds, then a start
/// uniformly among the positions where it fits.
pub fn sample_interval<R: Rng + ?Sized>(
    spec: &FunctionSpec,
    length: usize,
    rng: &mut R,
) -> Result<Interval> {
    let d = spec.duration;
    if d.min > length {
        return Err(Error::Config(format!(
            "{}: minimum duration {} exceeds series length {length}",
            spec.id, d.min
        )));
    }
    let len = rng.random_range(d.min..=d.max.min(length));
    let start = rng.random_range(0..=length - len);
    Ok(Interval::new(start, start + len - 1))
}

/// Returns a copy of `theta` whose entry `p` is enlarged in magnitude by the
/// function's modification rule; all other entries are untouched.
pub fn modify_param<R: Rng + ?Sized>(
    spec: &FunctionSpec,
    theta: &ParamVector,
    p: Param,
    rng: &mut R,
) -> Result<ParamVector> {
    let rule = spec.modifiable.get(&p).ok_or_else(|| {
        Error::Precondition(format!("{p} is not modifiable for {}", spec.id))
    })?;
    let draw = rule.range().sample(rng);
    modify_param_with(spec, theta, p, draw)
}

/// [`modify_param`] with an explicit offset or ratio value.
pub fn modify_param_with(
    spec: &FunctionSpec,
    theta: &ParamVector,
    p: Param,
    draw: f64,
) -> Result<ParamVector> {
    let rule = spec.modifiable.get(&p).ok_or_else(|| {
        Error::Precondition(format!("{p} is not modifiable for {}", spec.id))
    })?;
    let old = theta
        .get(p)
        .ok_or_else(|| Error::Precondition(format!("{} has no {p}", spec.id)))?;
    let mut out = theta.clone();
    out.set(p, rule.apply(old, draw));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use crate::stats;

    fn cat() -> Catalog {
        Catalog::standard(300).unwrap()
    }

    #[test]
    fn table_membership_and_counts() {
        let c = cat();
        assert_eq!(c.spec(FuncId::TriangleWave).category, Category::Periodic);
        assert_eq!(c.spec(FuncId::Drop).category, Category::Event);
        let count = |k| c.in_category(k).count();
        assert_eq!(count(Category::Trend), 16);
        assert_eq!(count(Category::Periodic), 4);
        assert_eq!(count(Category::Fluctuation), 2);
        assert_eq!(count(Category::Event), 6);
        for (i, s) in c.specs().iter().enumerate() {
            assert_eq!(s.id as usize, i);
            assert_eq!(s.id.as_str().parse::<FuncId>().unwrap(), s.id);
        }
    }

    #[test]
    fn mirrors_are_involutive_and_negate() {
        for id in FuncId::ALL {
            if let Some(m) = id.mirror() {
                assert_eq!(m.mirror(), Some(id));
                assert_eq!(m.category(), id.category());
                for k in 0..=10 {
                    let u = k as f64 / 10.0;
                    assert_eq!(unit_shape(m, u, 3.0, 0.4), -unit_shape(id, u, 3.0, 0.4));
                }
            }
        }
    }

    #[test]
    fn duration_invariants() {
        let c = cat();
        let long = c.spec(FuncId::Sigmoid).duration;
        assert_eq!((long.min, long.max), (45, 270));
        assert_eq!(c.spec(FuncId::PositivePulse).duration, DurationBounds { min: 2, max: 15 });
        assert_eq!(c.spec(FuncId::Spike).duration, DurationBounds { min: 1, max: 1 });
        assert!(Catalog::standard(10).is_err());
        assert!(Catalog::standard(20).is_ok());
    }

    #[test]
    fn modification_rules_are_strict() {
        let c = cat();
        for s in c.specs() {
            for (p, rule) in &s.modifiable {
                match rule {
                    ModRule::Offset(r) => assert!(r.lo > 0.0, "{} {p}", s.id),
                    ModRule::Ratio(r) => assert!(r.lo > 1.0, "{} {p}", s.id),
                }
            }
        }
    }

    #[test]
    fn support_is_the_interval() {
        let c = cat();
        let mut rng = substream(1, 0);
        for s in c.specs() {
            let theta = sample_base_params(s, &mut rng);
            let iv = sample_interval(s, 300, &mut rng).unwrap();
            let y = evaluate(s, &theta, iv, 300, 99).unwrap();
            for (t, v) in y.values().iter().enumerate() {
                if !iv.contains(t) {
                    assert_eq!(*v, 0.0, "{} at {t}", s.id);
                }
                assert!(v.is_finite());
            }
        }
    }

    #[test]
    fn sine_starts_at_zero_with_zero_phase() {
        let c = cat();
        let theta = ParamVector::new([
            (Param::Amplitude, 2.0),
            (Param::Frequency, 5.0),
            (Param::Phase, 0.0),
        ]);
        let iv = Interval::new(10, 200);
        let y = evaluate(c.spec(FuncId::Sinusoidal), &theta, iv, 300, 0).unwrap();
        assert_eq!(y.values()[10], 0.0);
    }

    #[test]
    fn gaussian_noise_moments() {
        let c = Catalog::standard(10_000).unwrap();
        let theta = ParamVector::new([(Param::Amplitude, 1.0)]);
        let y = evaluate(c.spec(FuncId::GaussianNoise), &theta, Interval::new(0, 9_999), 10_000, 5).unwrap();
        let m = stats::moments(y.values());
        assert!(m.mean.abs() < 0.05, "mean {}", m.mean);
        assert!((m.std - 1.0).abs() < 0.05, "std {}", m.std);
    }

    #[test]
    fn noise_kurtosis_separates_families() {
        let c = Catalog::standard(10_000).unwrap();
        let theta = ParamVector::new([(Param::Amplitude, 1.0)]);
        let full = Interval::new(0, 9_999);
        let g = evaluate(c.spec(FuncId::GaussianNoise), &theta, full, 10_000, 11).unwrap();
        let l = evaluate(c.spec(FuncId::LaplaceNoise), &theta, full, 10_000, 11).unwrap();
        let kg = stats::moments(g.values()).excess_kurtosis;
        let kl = stats::moments(l.values()).excess_kurtosis;
        assert!((-0.5..=0.5).contains(&kg), "gaussian kurtosis {kg}");
        assert!((2.0..=4.0).contains(&kl), "laplace kurtosis {kl}");
        assert!((stats::moments(l.values()).std - 1.0).abs() < 0.05);
    }

    #[test]
    fn base_params_domain_and_containment() {
        let c = cat();
        let s = c.spec(FuncId::SquareWave);
        let mut rng = substream(2, 0);
        for _ in 0..1000 {
            let th = sample_base_params(s, &mut rng);
            th.check(s).unwrap();
            assert!(s.base_ranges[&Param::Amplitude].contains(th.amplitude()));
            let f = th.frequency();
            assert_eq!(f, f.round());
            assert!((2.0..=10.0).contains(&f));
        }
    }

    #[test]
    fn amplitude_draws_are_uniform_on_average() {
        // Monte-Carlo oracle: mean of U[a, b] is (a + b) / 2.
        let c = cat();
        let s = c.spec(FuncId::Gaussian);
        let r = s.base_ranges[&Param::Amplitude];
        let mut rng = substream(3, 0);
        let n = 10_000;
        let mean = (0..n).map(|_| sample_base_params(s, &mut rng).amplitude()).sum::<f64>() / n as f64;
        assert!((mean - r.midpoint()).abs() < 0.02 * (r.hi - r.lo), "mean {mean}");
    }

    #[test]
    fn degenerate_interval_length() {
        let c = cat();
        let mut rng = substream(4, 0);
        for _ in 0..100 {
            let iv = sample_interval(c.spec(FuncId::Drop), 300, &mut rng).unwrap();
            assert_eq!(iv.start, iv.end);
        }
    }

    #[test]
    fn intervals_stay_inside() {
        let c = cat();
        let mut rng = substream(5, 0);
        for _ in 0..1000 {
            let iv = sample_interval(c.spec(FuncId::LogIncrease), 300, &mut rng).unwrap();
            assert!(iv.end <= 299);
            assert!(c.spec(FuncId::LogIncrease).duration.admits(iv.len()));
        }
    }

    #[test]
    fn interval_lengths_pass_chi_square() {
        // Uniformity oracle over the 14 admissible event lengths [2, 15].
        let c = cat();
        let s = c.spec(FuncId::PositivePulse);
        let mut rng = substream(6, 0);
        let n = 10_000;
        let mut counts = [0usize; 14];
        for _ in 0..n {
            counts[sample_interval(s, 300, &mut rng).unwrap().len() - 2] += 1;
        }
        let expected = n as f64 / 14.0;
        let chi2: f64 = counts.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
        // 99th percentile of chi-square with 13 degrees of freedom
        assert!(chi2 < 27.69, "chi2 {chi2}");
    }

    #[test]
    fn short_series_is_a_config_error() {
        let spec = cat().spec(FuncId::Sigmoid).clone();
        let mut rng = substream(0, 0);
        assert!(matches!(sample_interval(&spec, 20, &mut rng), Err(Error::Config(_))));
    }

    #[test]
    fn modification_touches_one_entry_and_grows_it() {
        let c = cat();
        let s = c.spec(FuncId::TriangleWave);
        let mut rng = substream(7, 0);
        for i in 0..1000 {
            let th = sample_base_params(s, &mut rng);
            let p = if i % 2 == 0 { Param::Amplitude } else { Param::Frequency };
            let m = modify_param(s, &th, p, &mut rng).unwrap();
            for (q, v) in th.iter() {
                if q != p {
                    assert_eq!(m.get(q).unwrap().to_bits(), v.to_bits());
                }
            }
            assert!(m.get(p).unwrap().abs() > th.get(p).unwrap().abs());
        }
        let err = modify_param(s, &sample_base_params(s, &mut rng), Param::Phase, &mut rng);
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    #[test]
    fn ratio_rule_keeps_sign() {
        let rule = ModRule::Ratio(Range::new(1.5, 3.0));
        assert_eq!(rule.apply(-2.0, 1.5), -3.0);
        let offset = ModRule::Offset(Range::new(0.5, 1.5));
        assert_eq!(offset.apply(-2.0, 0.5), -2.5);
    }

    #[test]
    fn evaluate_rejects_bad_inputs() {
        let c = cat();
        let s = c.spec(FuncId::Sinusoidal);
        let bad = ParamVector::new([(Param::Amplitude, 1.0)]);
        assert!(evaluate(s, &bad, Interval::new(0, 10), 300, 0).is_err());
        let th = sample_base_params(s, &mut substream(0, 0));
        assert!(evaluate(s, &th, Interval::new(10, 300), 300, 0).is_err());
        assert!(evaluate(s, &th, Interval::new(20, 10), 300, 0).is_err());
    }
}
