//! Monte Carlo summaries.

use serde::{Deserialize, Serialize};

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    /// Summarises samples, summing in slice order so the result is reproducible bit
    /// for bit. Constant samples give their value exactly.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Estimate { mean: 0.0, se: 0.0, n };
        }
        if xs.iter().all(|&x| x == xs[0]) {
            return Estimate { mean: xs[0], se: 0.0, n };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
            (ss / (n - 1) as f64 / n as f64).sqrt()
        } else {
            0.0
        };
        Estimate { mean, se, n }
    }

    pub fn exact(value: f64) -> Self {
        Estimate { mean: value, se: 0.0, n: 0 }
    }

    pub fn scale(self, c: f64) -> Self {
        Estimate { mean: self.mean * c, se: self.se * c.abs(), n: self.n }
    }

    /// Sum of independent estimates.
    pub fn add_independent(self, other: Estimate) -> Self {
        Estimate {
            mean: self.mean + other.mean,
            se: self.se.hypot(other.se),
            n: self.n.min(other.n),
        }
    }
}

/// Empirical pmf of nonnegative integer samples.
pub fn empirical_pmf(samples: &[usize]) -> Vec<f64> {
    let top = samples.iter().copied().max().unwrap_or(0);
    let mut counts = vec![0usize; top + 1];
    for &s in samples {
        counts[s] += 1;
    }
    let n = samples.len().max(1) as f64;
    counts.into_iter().map(|c| c as f64 / n).collect()
}

/// Least-squares slope of `ys` against `xs`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Total variation between an empirical pmf from `n` samples and a reference
/// pmf with tail mass `ref_tail` (empirical mass beyond the table is lumped
/// into the tail symbol). Also returns the Monte Carlo scale of that
/// statistic, `1/2 sum_w sqrt(p_w (1 - p_w) / n)` over the reference symbols,
/// which bounds its standard deviation and its mean under the null.
pub fn tv_to_reference(empirical: &[f64], reference: &[f64], ref_tail: f64, n: usize) -> (f64, f64) {
    let k = reference.len();
    let emp_tail: f64 = empirical.iter().skip(k).sum();
    let body: f64 = (0..k).map(|w| (empirical.get(w).copied().unwrap_or(0.0) - reference[w]).abs()).sum();
    let tv = 0.5 * (body + (emp_tail - ref_tail).abs());
    let nf = n.max(1) as f64;
    let scale = 0.5
        * reference
            .iter()
            .chain(std::iter::once(&ref_tail))
            .map(|&p| (p * (1.0 - p) / nf).sqrt())
            .sum::<f64>();
    (tv, scale)
}
