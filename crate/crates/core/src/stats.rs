//! Small descriptive statistics over sample slices.

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

/// Population moments. Skewness and kurtosis are 0 for constant input.
pub fn moments(x: &[f64]) -> Moments {
    if x.is_empty() {
        return Moments::default();
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let std = m2.sqrt();
    if m2 <= f64::MIN_POSITIVE {
        return Moments {
            mean,
            std,
            ..Moments::default()
        };
    }
    Moments {
        mean,
        std,
        skewness: m3 / (m2 * std),
        excess_kurtosis: m4 / (m2 * m2) - 3.0,
    }
}

/// Lag-1 autocorrelation; 0 for constant input.
pub fn lag1_autocorrelation(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    if var <= f64::MIN_POSITIVE {
        return 0.0;
    }
    let cov: f64 = x.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
    cov / var
}

/// Least-squares line `(intercept, slope)` against sample position.
pub fn linear_fit(x: &[f64]) -> (f64, f64) {
    let n = x.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    if n == 1 {
        return (x[0], 0.0);
    }
    let nf = n as f64;
    let tbar = (nf - 1.0) / 2.0;
    let ybar = x.iter().sum::<f64>() / nf;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, y) in x.iter().enumerate() {
        let dt = t as f64 - tbar;
        sxy += dt * (y - ybar);
        sxx += dt * dt;
    }
    let slope = sxy / sxx;
    (ybar - slope * tbar, slope)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        (dot(x, x) / x.len() as f64).sqrt()
    }
}
