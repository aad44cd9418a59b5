//! Samplers for the application processes: Matérn type I hard-core
//! processes on `[0,1]^d`, marked locally dependent Bernoulli processes on a
//! lifted carrier, and renewal processes on `[0, T]` with their superpositions.
//!
//! Every sampler is a pure function of its spec and a master seed.

use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};
use serde::{Deserialize, Serialize};

use crate::carrier::{Configuration, Loc, Point};
use crate::error::{domain, Error, Result};
use crate::rng::{rng_for, SimRng};

const MATERN_STREAM: u64 = 0x4d41_5445;
const PALM_STREAM: u64 = 0x5041_4c4d;
const MARK_STREAM: u64 = 0x4d41_524b;
const RENEWAL_STREAM: u64 = 0x5245_4e45;

/// Arrivals per renewal path after which a sampler gives up.
pub const MAX_RENEWAL_ARRIVALS: usize = 1_000_000;

// ---------------------------------------------------------------------------
// Matérn type I

/// Matérn type I hard-core process on `[0,1]^dim`: a uniform Poisson parent
/// with mean total count `mu`, keeping the points with no other parent point
/// within distance `r` (boundary included).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaternSpec {
    pub mu: f64,
    pub r: f64,
    pub dim: usize,
}

impl MaternSpec {
    pub fn new(mu: f64, r: f64, dim: usize) -> Result<Self> {
        if !(mu.is_finite() && mu >= 0.0) {
            return domain(format!("parent mean {mu} must be finite and nonnegative"));
        }
        if !(r.is_finite() && r > 0.0) {
            return domain(format!("hard-core radius {r} must be positive"));
        }
        if dim == 0 {
            return domain("dimension must be at least 1");
        }
        Ok(MaternSpec { mu, r, dim })
    }

    /// Parent intensity; the window has unit volume, so this equals `mu`.
    pub fn nu(&self) -> f64 {
        self.mu
    }
}

/// Both layers of a Matérn sample.
#[derive(Clone, Debug, PartialEq)]
pub struct MaternSample {
    pub parent: Configuration,
    pub thinned: Configuration,
}

fn uniform_site(rng: &mut SimRng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.random::<f64>()).collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn poisson_count(rng: &mut SimRng, mean: f64) -> usize {
    if mean <= 0.0 {
        0
    } else {
        Poisson::new(mean).expect("finite positive mean").sample(rng) as usize
    }
}

// Type I rule: keep a point iff no other point lies within distance r.
fn thin(sites: &[Vec<f64>], r: f64) -> Vec<bool> {
    let r2 = r * r;
    let n = sites.len();
    let mut keep = vec![true; n];
    for i in 0..n {
        for j in i + 1..n {
            if sq_dist(&sites[i], &sites[j]) <= r2 {
                keep[i] = false;
                keep[j] = false;
            }
        }
    }
    keep
}

fn to_config(sites: &[Vec<f64>]) -> Configuration {
    sites.iter().map(|x| Point::site(x)).collect()
}

pub fn sample_matern(spec: &MaternSpec, seed: u64) -> MaternSample {
    sample_matern_with(spec, &mut rng_for(seed, MATERN_STREAM, 0))
}

pub(crate) fn sample_matern_with(spec: &MaternSpec, rng: &mut SimRng) -> MaternSample {
    let n = poisson_count(rng, spec.mu);
    let sites: Vec<Vec<f64>> = (0..n).map(|_| uniform_site(rng, spec.dim)).collect();
    let keep = thin(&sites, spec.r);
    let kept: Vec<Vec<f64>> = sites.iter().zip(&keep).filter(|(_, &k)| k).map(|(x, _)| x.clone()).collect();
    MaternSample { parent: to_config(&sites), thinned: to_config(&kept) }
}

/// Reduced Palm process of the Matérn process at `alpha`.
///
/// The parent's Palm law adds `alpha` to an unchanged Poisson process. The
/// point `alpha` survives iff the parent is void on `B(alpha, r)`, and
/// conditioning a Poisson process on a void set restricts it to the
/// complement. So the parent here is the uniform Poisson process restricted
/// to `B(alpha, r)^c`; the thinning rule is applied to it, and `alpha`
/// itself deletes nothing.
pub fn sample_matern_reduced_palm(spec: &MaternSpec, alpha: &[f64], seed: u64) -> Result<Configuration> {
    let mut rng = rng_for(seed, PALM_STREAM, 0);
    sample_matern_reduced_palm_with(spec, alpha, &mut rng)
}

pub(crate) fn sample_matern_reduced_palm_with(spec: &MaternSpec, alpha: &[f64], rng: &mut SimRng) -> Result<Configuration> {
    if alpha.len() != spec.dim || alpha.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return domain("Palm location must lie in the unit cube");
    }
    let r2 = spec.r * spec.r;
    let n = poisson_count(rng, spec.mu);
    let sites: Vec<Vec<f64>> = (0..n)
        .map(|_| uniform_site(rng, spec.dim))
        .filter(|x| sq_dist(x, alpha) > r2)
        .collect();
    let keep = thin(&sites, spec.r);
    Ok(sites.iter().zip(&keep).filter(|(_, &k)| k).map(|(x, _)| Point::site(x)).collect())
}

// Area of B(0, r) intersected with [0, x] x [0, y] for x, y >= 0.
fn quarter_disc_area(x: f64, y: f64, r: f64) -> f64 {
    let x = x.min(r);
    let y = y.min(r);
    let g = |u: f64| 0.5 * (u * (r * r - u * u).max(0.0).sqrt() + r * r * (u / r).clamp(-1.0, 1.0).asin());
    let c = (r * r - y * y).max(0.0).sqrt();
    let m = x.min(c);
    y * m + g(x) - g(m)
}

fn signed_quarter(x: f64, y: f64, r: f64) -> f64 {
    x.signum() * y.signum() * quarter_disc_area(x.abs(), y.abs(), r)
}

/// `Vol(B(x, r) ∩ [0,1]^d)`, exact for `d = 1, 2`.
pub fn ball_volume_in_cube(x: &[f64], r: f64) -> Result<f64> {
    match x.len() {
        1 => Ok(((x[0] + r).min(1.0) - (x[0] - r).max(0.0)).max(0.0)),
        2 => {
            // corners of the square relative to the disc centre
            let (x0, x1) = (-x[0], 1.0 - x[0]);
            let (y0, y1) = (-x[1], 1.0 - x[1]);
            let a = signed_quarter(x1, y1, r) - signed_quarter(x0, y1, r) - signed_quarter(x1, y0, r)
                + signed_quarter(x0, y0, r);
            Ok(a.max(0.0))
        }
        d => Err(Error::Unsupported(format!("intersection volume in dimension {d}"))),
    }
}

/// Intensity density of the Matérn process: `nu exp(-nu Vol(B(x,r) ∩ [0,1]^d))`,
/// the parent intensity times the void probability of the ball around `x`.
pub fn matern_intensity_density(spec: &MaternSpec, x: &[f64]) -> Result<f64> {
    if x.len() != spec.dim || x.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return domain("density is evaluated on the unit cube");
    }
    let nu = spec.nu();
    Ok(nu * (-nu * ball_volume_in_cube(x, spec.r)?).exp())
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

// Pieces of [0,1] on which the section length of B(x, r) is smooth.
fn breakpoints(r: f64) -> Vec<f64> {
    let mut b = vec![0.0, 1.0];
    for v in [r, 1.0 - r] {
        if v > 0.0 && v < 1.0 {
            b.push(v);
        }
    }
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

/// Total intensity `λ = ∫ density`. Closed form for `d = 1, r <= 1/2`;
/// piecewise Gauss–Legendre otherwise.
pub fn matern_total_intensity(spec: &MaternSpec) -> Result<f64> {
    let (nu, r) = (spec.nu(), spec.r);
    if spec.dim == 1 && r <= 0.5 {
        let e = (-nu * r).exp();
        return Ok(nu * (1.0 - 2.0 * r) * e * e + 2.0 * e * (1.0 - e));
    }
    if spec.dim > 2 {
        return Err(Error::Unsupported(format!("Matérn intensity in dimension {}", spec.dim)));
    }
    let rule = gauss_legendre(24);
    let b = breakpoints(r);
    let mut nodes = Vec::new();
    for w in b.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let h = 0.5 * (hi - lo);
        for &(t, wt) in &rule {
            nodes.push((lo + h * (t + 1.0), h * wt));
        }
    }
    let mut total = 0.0;
    if spec.dim == 1 {
        for &(x, w) in &nodes {
            total += w * matern_intensity_density(spec, &[x])?;
        }
    } else {
        for &(x, wx) in &nodes {
            for &(y, wy) in &nodes {
                total += wx * wy * matern_intensity_density(spec, &[x, y])?;
            }
        }
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Marked Bernoulli

/// Joint law of the indicators `I_1..I_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum IndicatorLaw {
    /// `table[mask]` is the probability that exactly the indicators in `mask` are 1.
    Table { table: Vec<f64> },
    Independent { p: Vec<f64> },
    /// `I_i = Y_i Y_{i+1} ... Y_{i+m}` for i.i.d. `Y_k ~ Bernoulli(s)`: each
    /// indicator depends only on those within distance `m`.
    Runs { n: usize, m: usize, s: f64 },
}

/// Law of the i.i.d. marks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum MarkLaw {
    /// Mark of indicator `i` fixed at `sites[i]`.
    Fixed { sites: Vec<Vec<f64>> },
    Uniform { dim: usize },
    /// Atom `s` with probability `weights[s]`.
    Atoms { weights: Vec<f64> },
}

/// `Xi = sum_i I_i delta_{U_i}` with marks independent of the indicators and
/// neighbourhoods `A_i` such that `I_i` is independent of `{I_j : j ∉ A_i}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkedBernoulliSpec {
    pub indicators: IndicatorLaw,
    pub neighborhoods: Vec<Vec<usize>>,
    pub marks: MarkLaw,
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return domain(format!("{name} = {p} is not a probability"));
    }
    Ok(())
}

impl IndicatorLaw {
    pub fn len(&self) -> usize {
        match self {
            IndicatorLaw::Table { table } => table.len().trailing_zeros() as usize,
            IndicatorLaw::Independent { p } => p.len(),
            IndicatorLaw::Runs { n, .. } => *n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self) -> Result<()> {
        match self {
            IndicatorLaw::Table { table } => {
                if !table.len().is_power_of_two() {
                    return domain("indicator table length must be a power of two");
                }
                if table.len() > 1 << crate::palmexact::MAX_ENUMERATED_ATOMS {
                    return Err(Error::Resource("indicator table exceeds 2^20 entries".into()));
                }
                for &q in table {
                    check_prob("table entry", q)?;
                }
                let s: f64 = table.iter().sum();
                if (s - 1.0).abs() > 1e-12 {
                    return domain(format!("indicator table sums to {s}"));
                }
            }
            IndicatorLaw::Independent { p } => {
                for &q in p {
                    check_prob("p_i", q)?;
                }
            }
            IndicatorLaw::Runs { s, .. } => check_prob("s", *s)?,
        }
        Ok(())
    }

    /// Marginal probabilities `p_i = P(I_i = 1)`.
    pub fn marginals(&self) -> Vec<f64> {
        match self {
            IndicatorLaw::Table { table } => {
                let n = self.len();
                let mut p = vec![0.0; n];
                for (mask, &q) in table.iter().enumerate() {
                    for (i, pi) in p.iter_mut().enumerate() {
                        if mask >> i & 1 == 1 {
                            *pi += q;
                        }
                    }
                }
                p
            }
            IndicatorLaw::Independent { p } => p.clone(),
            IndicatorLaw::Runs { n, m, s } => vec![s.powi(*m as i32 + 1); *n],
        }
    }

    /// Full `2^n` joint table.
    pub fn joint_table(&self) -> Result<Vec<f64>> {
        let max = crate::palmexact::MAX_ENUMERATED_ATOMS;
        match self {
            IndicatorLaw::Table { table } => Ok(table.clone()),
            IndicatorLaw::Independent { p } => {
                if p.len() > max {
                    return Err(Error::Resource(format!("2^{} indicator patterns", p.len())));
                }
                Ok((0..1usize << p.len())
                    .map(|mask| {
                        p.iter().enumerate().map(|(i, &q)| if mask >> i & 1 == 1 { q } else { 1.0 - q }).product()
                    })
                    .collect())
            }
            IndicatorLaw::Runs { n, m, s } => {
                let len = n + m;
                if len > max {
                    return Err(Error::Resource(format!("2^{len} underlying patterns")));
                }
                let mut table = vec![0.0; 1 << n];
                let run = (1usize << (m + 1)) - 1;
                for y in 0..1usize << len {
                    let ones = y.count_ones() as i32;
                    let q = s.powi(ones) * (1.0 - s).powi(len as i32 - ones);
                    let mask = (0..*n).filter(|&i| (y >> i) & run == run).fold(0usize, |acc, i| acc | 1 << i);
                    table[mask] += q;
                }
                Ok(table)
            }
        }
    }

    pub(crate) fn sample(&self, rng: &mut SimRng) -> Vec<bool> {
        match self {
            IndicatorLaw::Table { table } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut mask = table.len() - 1;
                for (m, &q) in table.iter().enumerate() {
                    acc += q;
                    if u < acc {
                        mask = m;
                        break;
                    }
                }
                (0..self.len()).map(|i| mask >> i & 1 == 1).collect()
            }
            IndicatorLaw::Independent { p } => p.iter().map(|&q| rng.random::<f64>() < q).collect(),
            IndicatorLaw::Runs { n, m, s } => {
                let y: Vec<bool> = (0..n + m).map(|_| rng.random::<f64>() < *s).collect();
                (0..*n).map(|i| y[i..=i + m].iter().all(|&b| b)).collect()
            }
        }
    }
}

impl MarkLaw {
    fn validate(&self, n: usize) -> Result<()> {
        match self {
            MarkLaw::Fixed { sites } if sites.len() != n => {
                domain(format!("{} fixed marks for {n} indicators", sites.len()))
            }
            MarkLaw::Uniform { dim: 0 } => domain("mark dimension must be positive"),
            MarkLaw::Atoms { weights } => {
                if weights.is_empty() || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                    return domain("mark weights must be finite, nonnegative and nonempty");
                }
                let s: f64 = weights.iter().sum();
                if (s - 1.0).abs() > 1e-12 {
                    return domain(format!("mark weights sum to {s}"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn sample(&self, i: usize, rng: &mut SimRng) -> Point {
        match self {
            MarkLaw::Fixed { sites } => Point::site(&sites[i]),
            MarkLaw::Uniform { dim } => Point::site(&uniform_site(rng, *dim)),
            MarkLaw::Atoms { weights } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (s, &w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        return Point::atom(s);
                    }
                }
                Point::atom(weights.iter().rposition(|&w| w > 0.0).unwrap_or(0))
            }
        }
    }
}

impl MarkedBernoulliSpec {
    /// Validates the laws and that `i ∈ A_i`. For the runs generator every
    /// `A_i` must contain `{j : |i - j| <= m}`.
    pub fn new(indicators: IndicatorLaw, neighborhoods: Vec<Vec<usize>>, marks: MarkLaw) -> Result<Self> {
        indicators.validate()?;
        let n = indicators.len();
        marks.validate(n)?;
        if neighborhoods.len() != n {
            return domain(format!("{} neighbourhoods for {n} indicators", neighborhoods.len()));
        }
        for (i, a) in neighborhoods.iter().enumerate() {
            if a.iter().any(|&j| j >= n) {
                return domain(format!("neighbourhood {i} names an index out of range"));
            }
            if !a.contains(&i) {
                return domain(format!("neighbourhood {i} must contain {i}"));
            }
            if let IndicatorLaw::Runs { m, .. } = indicators {
                let lo = i.saturating_sub(m);
                if !(lo..=(i + m).min(n - 1)).all(|j| a.contains(&j)) {
                    return domain(format!("neighbourhood {i} misses indices within {m}"));
                }
            }
        }
        Ok(MarkedBernoulliSpec { indicators, neighborhoods, marks })
    }

    /// Independent indicators with `A_i = {i}`.
    pub fn independent(p: Vec<f64>, marks: MarkLaw) -> Result<Self> {
        let n = p.len();
        Self::new(IndicatorLaw::Independent { p }, (0..n).map(|i| vec![i]).collect(), marks)
    }

    /// Runs generator with the minimal neighbourhoods `{j : |i - j| <= m}`.
    pub fn runs(n: usize, m: usize, s: f64, marks: MarkLaw) -> Result<Self> {
        let a = (0..n).map(|i| (i.saturating_sub(m)..=(i + m).min(n.saturating_sub(1))).collect()).collect();
        Self::new(IndicatorLaw::Runs { n, m, s }, a, marks)
    }

    pub fn len(&self) -> usize {
        self.indicators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Largest `|P(I_i = 1, I_B = b) - p_i P(I_B = b)|` over `i` and patterns
    /// `b` of `B = A_i^c`, from the joint table. Zero iff the neighbourhoods
    /// are valid.
    pub fn dependence_discrepancy(&self) -> Result<f64> {
        let table = self.indicators.joint_table()?;
        let p = self.indicators.marginals();
        let mut worst = 0.0f64;
        for (i, a) in self.neighborhoods.iter().enumerate() {
            let outside: usize = (0..self.len()).filter(|j| !a.contains(j)).fold(0, |acc, j| acc | 1 << j);
            let mut joint: std::collections::HashMap<usize, (f64, f64)> = std::collections::HashMap::new();
            for (mask, &q) in table.iter().enumerate() {
                let e = joint.entry(mask & outside).or_insert((0.0, 0.0));
                e.1 += q;
                if mask >> i & 1 == 1 {
                    e.0 += q;
                }
            }
            for (both, marg) in joint.values() {
                worst = worst.max((both - p[i] * marg).abs());
            }
        }
        Ok(worst)
    }
}

/// A marked Bernoulli sample on the base space and on the lifted space.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkedSample {
    pub indicators: Vec<bool>,
    pub base: Configuration,
    /// Points `(i, U_i)` for the indicators that fired; always simple.
    pub lifted: Configuration,
}

pub fn sample_marked_bernoulli(spec: &MarkedBernoulliSpec, seed: u64) -> MarkedSample {
    let mut rng = rng_for(seed, MARK_STREAM, 0);
    sample_marked_bernoulli_with(spec, &mut rng)
}

pub(crate) fn sample_marked_bernoulli_with(spec: &MarkedBernoulliSpec, rng: &mut SimRng) -> MarkedSample {
    let indicators = spec.indicators.sample(rng);
    // marks are drawn for every index so the mark stream does not depend on the indicators
    let marks: Vec<Point> = (0..spec.len()).map(|i| spec.marks.sample(i, rng)).collect();
    let mut base = Configuration::empty();
    let mut lifted = Configuration::empty();
    for (i, (fired, u)) in indicators.iter().zip(marks).enumerate() {
        if *fired {
            base.push(u.clone());
            lifted.push(u.with_label(i));
        }
    }
    MarkedSample { indicators, base, lifted }
}

// ---------------------------------------------------------------------------
// Renewal processes

/// Law of a first-arrival time or an inter-arrival gap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum WaitLaw {
    Exponential { rate: f64 },
    Uniform { lo: f64, hi: f64 },
    Deterministic { at: f64 },
    /// Value `k` with probability `pmf[k - 1]`, `k = 1, 2, ...`.
    Discrete { pmf: Vec<f64> },
}

impl WaitLaw {
    pub fn validate(&self) -> Result<()> {
        match self {
            WaitLaw::Exponential { rate } if !(rate.is_finite() && *rate > 0.0) => {
                domain(format!("exponential rate {rate} must be positive"))
            }
            WaitLaw::Uniform { lo, hi } if !(lo.is_finite() && hi.is_finite() && *lo >= 0.0 && lo < hi) => {
                domain(format!("uniform law on [{lo}, {hi}] is not a valid waiting time"))
            }
            WaitLaw::Deterministic { at } if !(at.is_finite() && *at >= 0.0) => {
                domain(format!("deterministic wait {at} must be finite and nonnegative"))
            }
            WaitLaw::Discrete { pmf } => {
                if pmf.iter().any(|q| !(0.0..=1.0).contains(q)) {
                    return domain("discrete wait pmf entries must be probabilities");
                }
                let s: f64 = pmf.iter().sum();
                if (s - 1.0).abs() > 1e-12 {
                    return domain(format!("discrete wait pmf sums to {s}"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// `P(X <= t)`.
    pub fn cdf(&self, t: f64) -> f64 {
        match self {
            WaitLaw::Exponential { rate } => {
                if t <= 0.0 {
                    0.0
                } else {
                    -(-rate * t).exp_m1()
                }
            }
            WaitLaw::Uniform { lo, hi } => ((t - lo) / (hi - lo)).clamp(0.0, 1.0),
            WaitLaw::Deterministic { at } => f64::from(u8::from(t >= *at)),
            WaitLaw::Discrete { pmf } => {
                let k = t.floor();
                if k < 1.0 {
                    0.0
                } else {
                    pmf.iter().take(k.min(pmf.len() as f64) as usize).sum::<f64>().min(1.0)
                }
            }
        }
    }

    fn sample(&self, rng: &mut SimRng) -> f64 {
        match self {
            WaitLaw::Exponential { rate } => Exp::new(*rate).expect("positive rate").sample(rng),
            WaitLaw::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            WaitLaw::Deterministic { at } => *at,
            WaitLaw::Discrete { pmf } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (k, &q) in pmf.iter().enumerate() {
                    acc += q;
                    if u < acc {
                        return (k + 1) as f64;
                    }
                }
                pmf.iter().rposition(|&q| q > 0.0).map_or(1.0, |k| (k + 1) as f64)
            }
        }
    }

    /// Slot pmf for the exact engine; `None` for continuous laws.
    pub fn slot_pmf(&self) -> Option<&[f64]> {
        match self {
            WaitLaw::Discrete { pmf } => Some(pmf),
            _ => None,
        }
    }
}

/// One renewal process: first arrival `S_1 ~ first`, gaps `~ gap`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenewalComponent {
    pub first: WaitLaw,
    pub gap: WaitLaw,
}

/// Renewal processes on `[0, horizon]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenewalSpec {
    pub horizon: f64,
    pub components: Vec<RenewalComponent>,
}

impl RenewalComponent {
    /// Checks both laws and that gaps are strictly positive (`F(0) = 0`).
    pub fn new(first: WaitLaw, gap: WaitLaw) -> Result<Self> {
        first.validate()?;
        gap.validate()?;
        if gap.cdf(0.0) > 0.0 {
            return domain("inter-arrival law puts mass at 0");
        }
        Ok(RenewalComponent { first, gap })
    }
}

impl RenewalSpec {
    pub fn new(horizon: f64, components: Vec<RenewalComponent>) -> Result<Self> {
        if !(horizon.is_finite() && horizon >= 0.0) {
            return domain(format!("horizon {horizon} must be finite and nonnegative"));
        }
        for c in &components {
            RenewalComponent::new(c.first.clone(), c.gap.clone())?;
        }
        Ok(RenewalSpec { horizon, components })
    }

    /// `(G_i(T), F_i(T))` for every component.
    pub fn cdf_values(&self) -> Vec<(f64, f64)> {
        self.components.iter().map(|c| (c.first.cdf(self.horizon), c.gap.cdf(self.horizon))).collect()
    }
}

fn renewal_path(first: &WaitLaw, gap: &WaitLaw, horizon: f64, rng: &mut SimRng) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    let mut t = first.sample(rng);
    while t <= horizon {
        if out.len() >= MAX_RENEWAL_ARRIVALS {
            return Err(Error::Resource(format!(
                "more than {MAX_RENEWAL_ARRIVALS} arrivals before the horizon; the gap law is too concentrated near 0"
            )));
        }
        out.push(t);
        t += gap.sample(rng);
    }
    Ok(out)
}

/// Arrival times in `[0, horizon]` of one renewal process, in increasing order.
pub fn sample_renewal(first: &WaitLaw, gap: &WaitLaw, horizon: f64, seed: u64) -> Result<Configuration> {
    first.validate()?;
    gap.validate()?;
    let mut rng = rng_for(seed, RENEWAL_STREAM, 0);
    Ok(Configuration::on_line(&renewal_path(first, gap, horizon, &mut rng)?))
}

fn check_groups(groups: &[Vec<usize>], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for g in groups {
        for &i in g {
            if i >= n || seen[i] {
                return domain("dependence groups must partition the component indices");
            }
            seen[i] = true;
        }
    }
    if seen.iter().any(|s| !s) {
        return domain("dependence groups must cover every component");
    }
    Ok(())
}

/// Per-component arrival times. Components in different groups use independent
/// streams; inside a group every component replays the group's stream, so
/// components of a group are driven by common random numbers.
pub fn sample_superposition_components(spec: &RenewalSpec, groups: &[Vec<usize>], seed: u64) -> Result<Vec<Configuration>> {
    check_groups(groups, spec.components.len())?;
    let mut out = vec![Configuration::empty(); spec.components.len()];
    for (g, members) in groups.iter().enumerate() {
        for &i in members {
            let mut rng = rng_for(seed, RENEWAL_STREAM, 1 + g as u64);
            let c = &spec.components[i];
            out[i] = Configuration::on_line(&renewal_path(&c.first, &c.gap, spec.horizon, &mut rng)?);
        }
    }
    Ok(out)
}

/// Multiset sum of the component processes; see [`sample_superposition_components`].
pub fn sample_superposition(spec: &RenewalSpec, groups: &[Vec<usize>], seed: u64) -> Result<Configuration> {
    let parts = sample_superposition_components(spec, groups, seed)?;
    Ok(parts.iter().fold(Configuration::empty(), |acc, c| acc.sum(c)))
}

/// Singleton groups: every component independent.
pub fn independent_groups(n: usize) -> Vec<Vec<usize>> {
    (0..n).map(|i| vec![i]).collect()
}

// ---------------------------------------------------------------------------
// Dump

/// CSV dump of a configuration: one row per point with its coordinates
/// (`x1..xd`) or atom index, preceded by a `label` column when any point is labelled.
pub fn configuration_to_csv(xi: &Configuration) -> String {
    let labelled = xi.iter().any(|p| p.label.is_some());
    let dim = xi.iter().filter_map(|p| p.coords().map(<[f64]>::len)).max();
    let mut head: Vec<String> = Vec::new();
    if labelled {
        head.push("label".into());
    }
    match dim {
        Some(d) => head.extend((1..=d).map(|k| format!("x{k}"))),
        None => head.push("atom".into()),
    }
    let mut out = head.join(",");
    out.push('\n');
    for p in xi.iter() {
        let mut row: Vec<String> = Vec::new();
        if labelled {
            row.push(p.label.map_or(String::new(), |l| l.to_string()));
        }
        match &p.loc {
            Loc::Site(c) => row.extend(c.iter().map(|x| format!("{x:?}"))),
            Loc::Atom(i) => row.push(i.to_string()),
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::carrier::DistanceMatrix;
    use crate::palmexact::{discrete_renewal_dist, intensity, lifted_marked_dist};
    use crate::stats::Estimate;

    fn coords(xi: &Configuration) -> Vec<Vec<f64>> {
        xi.iter().map(|p| p.coords().unwrap().to_vec()).collect()
    }

    #[test]
    fn matern_trivial_cases() {
        let s = sample_matern(&MaternSpec::new(0.0, 0.1, 1).unwrap(), 1);
        assert!(s.parent.is_empty() && s.thinned.is_empty());
        assert!(sample_matern_reduced_palm(&MaternSpec::new(0.0, 0.1, 2).unwrap(), &[0.5, 0.5], 3).unwrap().is_empty());
        // a lone parent point always survives
        let spec = MaternSpec::new(0.05, 0.3, 2).unwrap();
        for seed in 0..400 {
            let s = sample_matern(&spec, seed);
            if s.parent.len() == 1 {
                assert_eq!(s.thinned.len(), 1);
            }
        }
        assert!(MaternSpec::new(1.0, 0.0, 1).is_err());
        assert!(MaternSpec::new(-1.0, 0.1, 1).is_err());
    }

    #[test]
    fn matern_structure_every_sample() {
        for dim in [1, 2] {
            let spec = MaternSpec::new(40.0, 0.05, dim).unwrap();
            for seed in 0..200 {
                let s = sample_matern(&spec, seed);
                assert!(s.thinned.is_subset_of(&s.parent));
                let c = coords(&s.thinned);
                for i in 0..c.len() {
                    for j in i + 1..c.len() {
                        assert!(sq_dist(&c[i], &c[j]).sqrt() > spec.r);
                    }
                }
                let alpha = vec![0.3; dim];
                let palm = sample_matern_reduced_palm(&spec, &alpha, seed).unwrap();
                assert!(palm.iter().all(|p| sq_dist(p.coords().unwrap(), &alpha).sqrt() > spec.r));
            }
        }
    }

    #[test]
    fn ball_volume_examples() {
        assert!((ball_volume_in_cube(&[0.5], 0.1).unwrap() - 0.2).abs() < 1e-15);
        assert!((ball_volume_in_cube(&[0.05], 0.1).unwrap() - 0.15).abs() < 1e-15);
        assert_eq!(ball_volume_in_cube(&[0.5], 2.0).unwrap(), 1.0);
        let pi = std::f64::consts::PI;
        assert!((ball_volume_in_cube(&[0.5, 0.5], 0.2).unwrap() - pi * 0.04).abs() < 1e-14);
        assert!((ball_volume_in_cube(&[0.0, 0.0], 0.2).unwrap() - pi * 0.01).abs() < 1e-14);
        assert!((ball_volume_in_cube(&[0.0, 0.5], 0.2).unwrap() - pi * 0.02).abs() < 1e-14);
        assert!((ball_volume_in_cube(&[0.5, 0.5], 1.0).unwrap() - 1.0).abs() < 1e-14);
        // disc centred on the square's centre with r = 0.5 sqrt(2) covers it exactly
        assert!((ball_volume_in_cube(&[0.5, 0.5], 0.5f64.sqrt()).unwrap() - 1.0).abs() < 1e-14);
        assert!(matches!(ball_volume_in_cube(&[0.5; 3], 0.1), Err(Error::Unsupported(_))));
    }

    #[test]
    fn ball_volume_matches_grid_count() {
        let m = 1000;
        for (x, r) in [([0.1, 0.8], 0.25), ([0.95, 0.02], 0.4), ([0.3, 0.5], 0.6)] {
            let mut hits = 0usize;
            for i in 0..m {
                for j in 0..m {
                    let p = [(i as f64 + 0.5) / m as f64, (j as f64 + 0.5) / m as f64];
                    if sq_dist(&p, &x) <= r * r {
                        hits += 1;
                    }
                }
            }
            let grid = hits as f64 / (m * m) as f64;
            assert!((ball_volume_in_cube(&x, r).unwrap() - grid).abs() < 2e-3);
        }
    }

    #[test]
    fn matern_density_examples() {
        let spec = MaternSpec::new(50.0, 0.01, 1).unwrap();
        let d = matern_intensity_density(&spec, &[0.5]).unwrap();
        assert!((d - 50.0 * (-1.0f64).exp()).abs() < 1e-12);
        let big = MaternSpec::new(200.0, 2.0, 2).unwrap();
        assert!(matern_intensity_density(&big, &[0.2, 0.7]).unwrap() < 1e-80);
        assert!(matches!(
            matern_intensity_density(&MaternSpec::new(1.0, 0.1, 3).unwrap(), &[0.5; 3]),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn matern_total_intensity_quadrature_matches_closed_form() {
        let spec = MaternSpec::new(30.0, 0.05, 1).unwrap();
        let closed = matern_total_intensity(&spec).unwrap();
        let rule = gauss_legendre(24);
        let mut q = 0.0;
        for w in breakpoints(spec.r).windows(2) {
            let h = 0.5 * (w[1] - w[0]);
            for &(t, wt) in &rule {
                q += h * wt * matern_intensity_density(&spec, &[w[0] + h * (t + 1.0)]).unwrap();
            }
        }
        assert!((closed - q).abs() < 1e-12);
    }

    #[test]
    fn matern_retention_matches_void_probability() {
        // interior point of a d=1 window: survival probability e^{-2 nu r}
        let spec = MaternSpec::new(20.0, 0.02, 1).unwrap();
        let reps = 20_000;
        let kept: Vec<f64> = (0..reps)
            .map(|seed| {
                let mut rng = rng_for(seed, 99, 0);
                let n = poisson_count(&mut rng, spec.mu);
                let mut sites: Vec<Vec<f64>> = vec![vec![0.5]];
                sites.extend((0..n).map(|_| uniform_site(&mut rng, 1)));
                f64::from(u8::from(thin(&sites, spec.r)[0]))
            })
            .collect();
        let e = Estimate::from_samples(&kept);
        let want = (-2.0 * spec.nu() * spec.r).exp();
        assert!((e.mean - want).abs() < 3.0 * e.se, "{} vs {want}", e.mean);
    }

    #[test]
    fn matern_mean_count_matches_intensity() {
        for dim in [1, 2] {
            let spec = MaternSpec::new(30.0, 0.08, dim).unwrap();
            let counts: Vec<f64> = (0..20_000).map(|s| sample_matern(&spec, s).thinned.len() as f64).collect();
            let e = Estimate::from_samples(&counts);
            let lam = matern_total_intensity(&spec).unwrap();
            assert!((e.mean - lam).abs() < 3.0 * e.se, "d={dim}: {} vs {lam}", e.mean);
        }
    }

    #[test]
    fn marked_bernoulli_examples() {
        let n = 4;
        let sites: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / n as f64]).collect();
        let spec = MarkedBernoulliSpec::independent(vec![1.0; n], MarkLaw::Fixed { sites: sites.clone() }).unwrap();
        let s = sample_marked_bernoulli(&spec, 5);
        assert_eq!(s.base, Configuration::new(sites.iter().map(|x| Point::site(x)).collect()));
        // colliding marks stay distinct on the lifted space
        let spec = MarkedBernoulliSpec::independent(vec![1.0; 3], MarkLaw::Atoms { weights: vec![1.0] }).unwrap();
        let s = sample_marked_bernoulli(&spec, 6);
        assert!(!s.base.is_simple() && s.lifted.is_simple());
        assert_eq!(s.lifted.project(), s.base);

        assert!(MarkedBernoulliSpec::new(
            IndicatorLaw::Independent { p: vec![0.5, 0.5] },
            vec![vec![1], vec![1]],
            MarkLaw::Uniform { dim: 1 }
        )
        .is_err());
        assert!(MarkedBernoulliSpec::new(
            IndicatorLaw::Runs { n: 3, m: 1, s: 0.5 },
            vec![vec![0], vec![1], vec![2]],
            MarkLaw::Uniform { dim: 1 }
        )
        .is_err());
    }

    #[test]
    fn lifted_intensity_matches_exact_law() {
        let p = vec![0.2, 0.6, 0.9];
        let weights = vec![0.3, 0.7];
        let spec = MarkedBernoulliSpec::independent(p.clone(), MarkLaw::Atoms { weights: weights.clone() }).unwrap();
        let base = DistanceMatrix::from_line(&[0.0, 1.0]);
        let exact = intensity(&lifted_marked_dist(&spec.indicators.joint_table().unwrap(), &weights, &base).unwrap());
        let reps = 40_000;
        let mut hits = [0.0; 6];
        let mut per_label = vec![vec![]; 3];
        for seed in 0..reps {
            let s = sample_marked_bernoulli(&spec, seed);
            let mut fired = [0.0; 3];
            for q in s.lifted.iter() {
                let i = q.label.unwrap();
                hits[2 * i + q.atom_index().unwrap()] += 1.0;
                fired[i] = 1.0;
            }
            for i in 0..3 {
                per_label[i].push(fired[i]);
            }
        }
        for i in 0..3 {
            let e = Estimate::from_samples(&per_label[i]);
            assert!((e.mean - p[i]).abs() < 3.0 * e.se.max(1e-3));
        }
        for (h, want) in hits.iter().zip(&exact) {
            let m = h / reps as f64;
            let se = (want * (1.0 - want) / reps as f64).sqrt();
            assert!((m - want).abs() < 4.0 * se.max(1e-4));
        }
    }

    #[test]
    fn runs_table_is_locally_dependent() {
        let spec = MarkedBernoulliSpec::runs(6, 2, 0.6, MarkLaw::Uniform { dim: 1 }).unwrap();
        let table = spec.indicators.joint_table().unwrap();
        assert!((table.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let p = spec.indicators.marginals();
        let q = IndicatorLaw::Table { table }.marginals();
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(spec.dependence_discrepancy().unwrap() < 1e-14);
        let narrow = MarkedBernoulliSpec {
            neighborhoods: (0..6).map(|i| vec![i]).collect(),
            ..spec
        };
        assert!(narrow.dependence_discrepancy().unwrap() > 1e-3);
    }

    #[test]
    fn renewal_examples() {
        let never = WaitLaw::Deterministic { at: 5.0 };
        assert!(sample_renewal(&never, &WaitLaw::Exponential { rate: 1.0 }, 4.0, 1).unwrap().is_empty());
        let fixed = sample_renewal(&WaitLaw::Deterministic { at: 0.5 }, &WaitLaw::Deterministic { at: 1.0 }, 3.0, 1).unwrap();
        assert_eq!(fixed, Configuration::on_line(&[0.5, 1.5, 2.5]));
        assert!(RenewalComponent::new(never.clone(), WaitLaw::Deterministic { at: 0.0 }).is_err());
        let tiny = WaitLaw::Deterministic { at: 1e-7 };
        assert!(matches!(sample_renewal(&tiny, &tiny, 1.0, 1), Err(Error::Resource(_))));
    }

    #[test]
    fn renewal_arrivals_increase() {
        let first = WaitLaw::Uniform { lo: 0.0, hi: 2.0 };
        let gap = WaitLaw::Exponential { rate: 3.0 };
        for seed in 0..200 {
            let xi = sample_renewal(&first, &gap, 5.0, seed).unwrap();
            let t: Vec<f64> = xi.iter().map(|p| p.coords().unwrap()[0]).collect();
            assert!(t.windows(2).all(|w| w[0] < w[1]));
            assert!(t.iter().all(|&x| (0.0..=5.0).contains(&x)));
        }
    }

    #[test]
    fn exponential_renewal_count_is_poisson() {
        let (theta, horizon) = (1.5, 2.0);
        let law = WaitLaw::Exponential { rate: theta };
        let reps = 40_000;
        let counts: Vec<usize> = (0..reps).map(|s| sample_renewal(&law, &law, horizon, s).unwrap().len()).collect();
        let emp = crate::stats::empirical_pmf(&counts);
        let po = crate::univariate::poisson_pmf(theta * horizon, emp.len()).unwrap();
        // chi-square over cells with expected count >= 5, lumping the tail
        let mut chi = 0.0;
        let mut cells = 0;
        let mut rest_obs = 0.0;
        let mut rest_exp = 0.0;
        for (k, &e) in emp.iter().enumerate() {
            let expct = po.get(k) * reps as f64;
            if expct >= 5.0 {
                chi += (e * reps as f64 - expct).powi(2) / expct;
                cells += 1;
            } else {
                rest_obs += e * reps as f64;
                rest_exp += expct;
            }
        }
        rest_exp += po.tail_mass() * reps as f64;
        chi += (rest_obs - rest_exp).powi(2) / rest_exp;
        // 99.9% point of chi-square with `cells` degrees of freedom is below 3 * cells + 12 here
        assert!(chi < 3.0 * cells as f64 + 12.0, "chi2 = {chi} on {cells} cells");
    }

    #[test]
    fn discrete_renewal_mean_count_matches_dp() {
        let g = vec![0.2, 0.3, 0.1, 0.4];
        let f = vec![0.5, 0.25, 0.25];
        let horizon = 6;
        let exact = intensity(
            &discrete_renewal_dist(&g, &f, horizon, DistanceMatrix::from_line(&(0..horizon).map(|t| t as f64).collect::<Vec<_>>())).unwrap(),
        );
        let want: f64 = exact.iter().sum();
        let first = WaitLaw::Discrete { pmf: g };
        let gap = WaitLaw::Discrete { pmf: f };
        let counts: Vec<f64> =
            (0..40_000).map(|s| sample_renewal(&first, &gap, horizon as f64, s).unwrap().len() as f64).collect();
        let e = Estimate::from_samples(&counts);
        assert!((e.mean - want).abs() < 3.0 * e.se, "{} vs {want}", e.mean);
    }

    #[test]
    fn superposition_examples() {
        let c = RenewalComponent::new(WaitLaw::Uniform { lo: 0.0, hi: 4.0 }, WaitLaw::Exponential { rate: 2.0 }).unwrap();
        let one = RenewalSpec::new(3.0, vec![c.clone()]).unwrap();
        let a = sample_superposition(&one, &[vec![0]], 7).unwrap();
        let b = sample_superposition_components(&one, &[vec![0]], 7).unwrap();
        assert_eq!(a, b[0]);
        let two = RenewalSpec::new(3.0, vec![c.clone(), c.clone()]).unwrap();
        let shared = sample_superposition_components(&two, &[vec![0, 1]], 3).unwrap();
        assert_eq!(shared[0], shared[1]);
        assert!(sample_superposition(&two, &[vec![0]], 3).is_err());
        assert!(sample_superposition(&two, &[vec![0, 1], vec![1]], 3).is_err());

        let reps = 20_000;
        let single: Vec<f64> = (0..reps).map(|s| sample_superposition(&one, &[vec![0]], s).unwrap().len() as f64).collect();
        let pair: Vec<f64> =
            (0..reps).map(|s| sample_superposition(&two, &independent_groups(2), s).unwrap().len() as f64).collect();
        let (e1, e2) = (Estimate::from_samples(&single), Estimate::from_samples(&pair));
        let se = (4.0 * e1.se * e1.se + e2.se * e2.se).sqrt();
        assert!((e2.mean - 2.0 * e1.mean).abs() < 3.0 * se);
    }

    #[test]
    fn csv_dump() {
        let xi = Configuration::new(vec![Point::site(&[0.25, 0.5]).with_label(2), Point::site(&[1.0, 0.0]).with_label(0)]);
        assert_eq!(configuration_to_csv(&xi), "label,x1,x2\n2,0.25,0.5\n0,1.0,0.0\n");
        assert_eq!(configuration_to_csv(&Configuration::from_counts(&[0, 2])), "atom\n1\n1\n");
    }

    #[test]
    fn samplers_are_reproducible() {
        let spec = MaternSpec::new(25.0, 0.04, 2).unwrap();
        assert_eq!(sample_matern(&spec, 11), sample_matern(&spec, 11));
        let m = MarkedBernoulliSpec::runs(5, 1, 0.4, MarkLaw::Uniform { dim: 2 }).unwrap();
        assert_eq!(sample_marked_bernoulli(&m, 4), sample_marked_bernoulli(&m, 4));
    }
}
