//! Error bounds for Poisson and Poisson process approximation.
//!
//! Each evaluator returns a [`BoundReport`]: the bound, its component terms,
//! standard errors for Monte Carlo terms and an interval. A bound whose
//! formula is undefined for the input (nonpositive denominator, zero total
//! intensity) is reported as invalid rather than raised as an error, so
//! sweeps can record it.
//!
//! All bounds share the nonuniform Stein factor `3.5/λ + 2.5/(n + 1)`, where
//! `n` is the number of points the local term does not depend on.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::carrier::{Configuration, DistanceMatrix};
use crate::error::{domain, Error, Result};
use crate::models::{
    ball_volume_in_cube, matern_intensity_density, matern_total_intensity, sample_matern_reduced_palm_with,
    sample_matern_with, MarkedBernoulliSpec, MaternSpec,
};
use crate::palmexact::{
    d1_prime_counts_on, intensity, local_dependence_check, palm, reduced_palm, wasserstein_d1_prime,
    ConfigDistribution, CountConfiguration,
};
use crate::rng::{replicate, SimRng};
use crate::stats::{ols_slope, Estimate};
use crate::transport::{solve_transport, CostMatrix};
use crate::univariate::{expected_reciprocal_count, BernoulliVector};

const MATERN_TERM1_STREAM: u64 = 0x5431;
const MATERN_TERM2_STREAM: u64 = 0x5432;
const CORR52_STREAM: u64 = 0x4335;
const THM51_STREAM: u64 = 0x5435;

/// Standard errors covered by a Monte Carlo interval.
pub const INTERVAL_SE: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Exact,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundTerm {
    pub name: String,
    pub value: f64,
    /// `None` for terms computed exactly.
    pub se: Option<f64>,
}

impl BoundTerm {
    pub fn exact(name: &str, value: f64) -> Self {
        BoundTerm { name: name.into(), value, se: None }
    }

    pub fn estimated(name: &str, e: Estimate) -> Self {
        BoundTerm { name: name.into(), value: e.mean, se: Some(e.se) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound: String,
    pub mode: Mode,
    /// `None` when the bound is invalid for this input.
    pub value: Option<f64>,
    /// Standard error of `value` when any term is estimated.
    pub se: Option<f64>,
    /// `[lower, upper]`, always containing `value`.
    pub interval: Option<[f64; 2]>,
    pub terms: Vec<BoundTerm>,
    /// Why the bound is invalid.
    pub invalid: Option<String>,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
}

impl BoundReport {
    /// Sum of `terms`; the interval adds `INTERVAL_SE` standard errors and `width` on each side.
    pub fn from_terms(bound: &str, mode: Mode, terms: Vec<BoundTerm>, width: f64) -> Self {
        let value: f64 = terms.iter().map(|t| t.value).sum();
        let se = if terms.iter().any(|t| t.se.is_some()) {
            Some(terms.iter().filter_map(|t| t.se).map(|s| s * s).sum::<f64>().sqrt())
        } else {
            None
        };
        let half = INTERVAL_SE * se.unwrap_or(0.0) + width;
        BoundReport {
            bound: bound.into(),
            mode,
            value: Some(value),
            se,
            interval: Some([(value - half).max(0.0).min(value), value + half]),
            terms,
            invalid: None,
            warnings: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn invalid(bound: &str, mode: Mode, reason: impl Into<String>, terms: Vec<BoundTerm>) -> Self {
        BoundReport {
            bound: bound.into(),
            mode,
            value: None,
            se: None,
            interval: None,
            terms,
            invalid: Some(reason.into()),
            warnings: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn is_valid(&self) -> bool {
        self.value.is_some()
    }

    /// Bound value, NaN when invalid.
    pub fn value_or_nan(&self) -> f64 {
        self.value.unwrap_or(f64::NAN)
    }

    pub fn term(&self, name: &str) -> Option<&BoundTerm> {
        self.terms.iter().find(|t| t.name == name)
    }

    fn warn(mut self, w: impl Into<String>) -> Self {
        self.warnings.push(w.into());
        self
    }

    fn note(mut self, n: impl Into<String>) -> Self {
        self.notes.push(n.into());
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports are plain data")
    }

    pub fn csv_header() -> [&'static str; 9] {
        ["bound", "mode", "valid", "value", "se", "lower", "upper", "terms", "invalid_reason"]
    }

    /// One CSV row; terms are written as `name=value` pairs joined by `;`.
    pub fn csv_row(&self) -> Vec<String> {
        let opt = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:?}"));
        let mode = match self.mode {
            Mode::Exact => "exact",
            Mode::MonteCarlo => "mc",
        };
        let terms: Vec<String> = self.terms.iter().map(|t| format!("{}={:?}", t.name, t.value)).collect();
        vec![
            self.bound.clone(),
            mode.into(),
            self.is_valid().to_string(),
            opt(self.value),
            opt(self.se),
            opt(self.interval.map(|i| i[0])),
            opt(self.interval.map(|i| i[1])),
            terms.join(";"),
            self.invalid.clone().unwrap_or_default(),
        ]
    }
}

fn stein_weight(lambda: f64, n: f64) -> f64 {
    3.5 / lambda + 2.5 / (n + 1.0)
}

// ---------------------------------------------------------------------------
// Independent Bernoulli

/// Sharp and crude forms of the independent-trials bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BernoulliBounds {
    /// `sum_i p_i^2 (3.5/λ + 2.5 E[1/(sum_{j≠i} X_j + 1)])`.
    pub sharp: BoundReport,
    /// `6 sum_i p_i^2 / (λ - max_i p_i)`.
    pub crude: BoundReport,
}

pub fn bound_eq7(p: &BernoulliVector) -> BernoulliBounds {
    let lambda = p.lambda();
    let sum_sq = p.sum_sq();
    let sharp = if lambda > 0.0 {
        let mut first = 0.0;
        let mut second = 0.0;
        for (i, &pi) in p.probs().iter().enumerate() {
            first += pi * pi * 3.5 / lambda;
            second += pi * pi * 2.5 * expected_reciprocal_count(p, i).expect("index in range");
        }
        BoundReport::from_terms(
            "bernoulli-sharp",
            Mode::Exact,
            vec![BoundTerm::exact("uniform", first), BoundTerm::exact("nonuniform", second)],
            0.0,
        )
    } else {
        BoundReport::invalid("bernoulli-sharp", Mode::Exact, "total intensity is 0", vec![])
    };
    let denom = lambda - p.max();
    let crude = if denom > 0.0 {
        BoundReport::from_terms("bernoulli-crude", Mode::Exact, vec![BoundTerm::exact("crude", 6.0 * sum_sq / denom)], 0.0)
    } else {
        BoundReport::invalid(
            "bernoulli-crude",
            Mode::Exact,
            format!("denominator λ - max p_i = {denom} is not positive"),
            vec![],
        )
    };
    BernoulliBounds { sharp, crude }
}

// ---------------------------------------------------------------------------
// Locally dependent processes

/// Neighbourhoods on a lifted carrier with `marks` atoms per label: atom
/// `(i, s)` gets every atom whose label lies in `A_i`.
pub fn lift_neighborhoods(neighborhoods: &[Vec<usize>], marks: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(neighborhoods.len() * marks);
    for a in neighborhoods {
        let lifted: Vec<usize> = a.iter().flat_map(|&j| (0..marks).map(move |t| j * marks + t)).collect();
        out.extend(std::iter::repeat_n(lifted, marks));
    }
    out
}

fn check_neighborhoods(neighborhoods: &[Vec<usize>], atoms: usize) -> Result<Vec<Vec<bool>>> {
    if neighborhoods.len() != atoms {
        return Err(Error::Config(format!("{} neighbourhoods for {atoms} atoms", neighborhoods.len())));
    }
    neighborhoods
        .iter()
        .map(|a| {
            let mut mask = vec![false; atoms];
            for &b in a {
                if b >= atoms {
                    return Err(Error::Config(format!("neighbourhood atom {b} out of range")));
                }
                mask[b] = true;
            }
            Ok(mask)
        })
        .collect()
}

fn outside_count(c: &CountConfiguration, inside: &[bool]) -> f64 {
    c.counts().iter().zip(inside).filter(|(_, &i)| !i).map(|(&n, _)| n as f64).sum()
}

/// Locally dependent process bound, evaluated exactly on a finite law.
///
/// First term: `E sum_a Xi(a) (Xi(A_a) - 1) w(|Xi outside A_a|)`.
/// Second term: `sum_a sum_{b in A_a} λ_a λ_b E_{Palm at b} w(|Xi outside A_a|)`,
/// with `w(n) = 3.5/λ + 2.5/(n + 1)`. When the neighbourhoods do not satisfy
/// local dependence the report is invalid.
pub fn bound_theorem41(d: &ConfigDistribution, neighborhoods: &[Vec<usize>]) -> Result<BoundReport> {
    const NAME: &str = "local-dependence";
    let inside = check_neighborhoods(neighborhoods, d.atoms())?;
    let lam = intensity(d);
    let lambda: f64 = lam.iter().sum();
    if lambda <= 0.0 {
        return Ok(BoundReport::invalid(NAME, Mode::Exact, "total intensity is 0", vec![]));
    }
    let check = local_dependence_check(d, neighborhoods)?;
    if !check.holds {
        return Ok(BoundReport::invalid(
            NAME,
            Mode::Exact,
            format!("neighbourhoods violate local dependence (discrepancy {:e})", check.max_discrepancy),
            vec![],
        ));
    }
    let mut first = 0.0;
    for (c, p) in d.iter() {
        let mut s = 0.0;
        for (a, mask) in inside.iter().enumerate() {
            let here = c.get(a);
            if here == 0 {
                continue;
            }
            let near = c.mass_on(&neighborhoods[a]) as f64;
            s += here as f64 * (near - 1.0) * stein_weight(lambda, outside_count(c, mask));
        }
        first += p * s;
    }
    let mut palms: BTreeMap<usize, ConfigDistribution> = BTreeMap::new();
    let mut second = 0.0;
    for (a, mask) in inside.iter().enumerate() {
        if lam[a] == 0.0 {
            continue;
        }
        for &b in &neighborhoods[a] {
            if lam[b] == 0.0 {
                continue;
            }
            if let std::collections::btree_map::Entry::Vacant(e) = palms.entry(b) {
                e.insert(palm(d, b)?);
            }
            let e = palms[&b].expect(|c| stein_weight(lambda, outside_count(c, mask)));
            second += lam[a] * lam[b] * e;
        }
    }
    let mut r = BoundReport::from_terms(
        NAME,
        Mode::Exact,
        vec![BoundTerm::exact("first", first), BoundTerm::exact("second", second)],
        0.0,
    );
    if d.truncated_mass() > 0.0 {
        r = r.warn(format!("law is truncated; {:e} of mass is not tabulated", d.truncated_mass()));
    }
    Ok(r)
}

fn sample_from_intensity(spec: &MaternSpec, rng: &mut SimRng) -> Result<Vec<f64>> {
    let nu = spec.nu();
    loop {
        let x: Vec<f64> = (0..spec.dim).map(|_| rng.random::<f64>()).collect();
        if rng.random::<f64>() * nu < matern_intensity_density(spec, &x)? {
            return Ok(x);
        }
    }
}

// Uniform point of B(centre, radius) ∩ [0,1]^d by rejection from the clipped box.
fn sample_in_ball(centre: &[f64], radius: f64, rng: &mut SimRng) -> Vec<f64> {
    loop {
        let x: Vec<f64> = centre
            .iter()
            .map(|&c| {
                let lo = (c - radius).max(0.0);
                let hi = (c + radius).min(1.0);
                lo + (hi - lo) * rng.random::<f64>()
            })
            .collect();
        let d2: f64 = x.iter().zip(centre).map(|(a, b)| (a - b) * (a - b)).sum();
        if d2 <= radius * radius {
            return x;
        }
    }
}

fn count_beyond(xi: &Configuration, centre: &[f64], radius: f64) -> usize {
    xi.iter()
        .filter(|p| {
            let c = p.coords().expect("site points");
            c.iter().zip(centre).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() > radius * radius
        })
        .count()
}

/// `∫∫_{β ∈ B(α, 2r)} λ(dα) λ(dβ)`, the intensity mass of the neighbourhood
/// pairs, by the same sampling of `(α, β)` as the second bound term.
pub fn matern_neighbourhood_mass(spec: &MaternSpec, reps: usize, seed: u64) -> Result<Estimate> {
    let lambda = matern_total_intensity(spec)?;
    if lambda <= 0.0 {
        return Ok(Estimate::exact(0.0));
    }
    let reach = 2.0 * spec.r;
    let xs: Vec<Result<f64>> = replicate(reps, seed, MATERN_TERM2_STREAM, |rng| {
        let alpha = sample_from_intensity(spec, rng)?;
        let beta = sample_in_ball(&alpha, reach, rng);
        Ok(lambda * ball_volume_in_cube(&alpha, reach)? * matern_intensity_density(spec, &beta)?)
    });
    Ok(Estimate::from_samples(&xs.into_iter().collect::<Result<Vec<_>>>()?))
}

/// Monte Carlo evaluation of the local dependence bound for a Matérn process
/// with neighbourhoods `B(α, 2r)`.
///
/// The first term averages over Matérn samples. For the second, `α` is drawn
/// from `λ/λ`, `β` uniformly from `B(α, 2r) ∩ [0,1]^d`, and the reduced Palm
/// process at `β` is counted outside `B(α, 2r)`; the estimator is
/// `λ Vol(B(α,2r) ∩ [0,1]^d) density(β) w(count)`.
pub fn bound_theorem41_matern(spec: &MaternSpec, reps: usize, seed: u64) -> Result<BoundReport> {
    const NAME: &str = "local-dependence";
    if reps == 0 {
        return domain("at least one replication is required");
    }
    let lambda = matern_total_intensity(spec)?;
    if lambda <= 0.0 {
        return Ok(BoundReport::invalid(NAME, Mode::MonteCarlo, "total intensity is 0", vec![]));
    }
    let reach = 2.0 * spec.r;
    let first: Vec<f64> = replicate(reps, seed, MATERN_TERM1_STREAM, |rng| {
        let xi = sample_matern_with(spec, rng).thinned;
        let pts: Vec<&[f64]> = xi.iter().map(|p| p.coords().expect("site points")).collect();
        let mut s = 0.0;
        for a in &pts {
            let beyond = count_beyond(&xi, a, reach);
            let near = pts.len() - beyond;
            s += (near as f64 - 1.0) * stein_weight(lambda, beyond as f64);
        }
        s
    });
    let second: Vec<Result<f64>> = replicate(reps, seed, MATERN_TERM2_STREAM, |rng| {
        let alpha = sample_from_intensity(spec, rng)?;
        let beta = sample_in_ball(&alpha, reach, rng);
        let vol = ball_volume_in_cube(&alpha, reach)?;
        let dens = matern_intensity_density(spec, &beta)?;
        let xi = sample_matern_reduced_palm_with(spec, &beta, rng)?;
        Ok(lambda * vol * dens * stein_weight(lambda, count_beyond(&xi, &alpha, reach) as f64))
    });
    let second: Vec<f64> = second.into_iter().collect::<Result<_>>()?;
    Ok(BoundReport::from_terms(
        NAME,
        Mode::MonteCarlo,
        vec![
            BoundTerm::estimated("first", Estimate::from_samples(&first)),
            BoundTerm::estimated("second", Estimate::from_samples(&second)),
        ],
        0.0,
    )
    .note(format!("total intensity {lambda:e}")))
}

// ---------------------------------------------------------------------------
// Marked Bernoulli

fn masks_of(neighborhoods: &[Vec<usize>]) -> Vec<u64> {
    neighborhoods.iter().map(|a| a.iter().fold(0u64, |m, &j| m | 1 << j)).collect()
}

/// Bound for a locally dependent marked Bernoulli process with
/// `V_i = sum_{j ∉ A_i} I_j`:
///
/// `E sum_i sum_{j ∈ A_i, j ≠ i} w(V_i) I_i I_j + sum_i sum_{j ∈ A_i} (3.5/λ + E[2.5/(V_i+1) | I_j = 1]) p_i p_j`.
///
/// The conditional expectation enters as `E[2.5 I_j/(V_i+1)] / p_j`, so the
/// second sum only needs unconditional moments. Exact mode enumerates the
/// joint table; Monte Carlo mode samples indicator vectors.
pub fn bound_corollary52(spec: &MarkedBernoulliSpec, mode: Mode, reps: usize, seed: u64) -> Result<BoundReport> {
    const NAME: &str = "marked-bernoulli";
    let n = spec.len();
    if n > 63 {
        return Err(Error::Resource("at most 63 indicators are supported".into()));
    }
    let p = spec.indicators.marginals();
    let lambda: f64 = p.iter().sum();
    if lambda <= 0.0 {
        return Ok(BoundReport::invalid(NAME, mode, "total intensity is 0", vec![]));
    }
    let masks = masks_of(&spec.neighborhoods);
    // per-pattern contribution of the random parts of both sums
    let sample_value = |fired: u64| -> (f64, f64) {
        let mut first = 0.0;
        let mut second = 0.0;
        for i in 0..n {
            let v = (fired & !masks[i]).count_ones() as f64;
            let recip = 2.5 / (v + 1.0);
            for &j in &spec.neighborhoods[i] {
                if fired >> j & 1 == 1 {
                    if j != i && fired >> i & 1 == 1 {
                        first += 3.5 / lambda + recip;
                    }
                    second += p[i] * recip;
                }
            }
        }
        (first, second)
    };
    let fixed: f64 = (0..n).map(|i| spec.neighborhoods[i].iter().map(|&j| 3.5 / lambda * p[i] * p[j]).sum::<f64>()).sum();
    let (first, second) = match mode {
        Mode::Exact => {
            let table = spec.indicators.joint_table()?;
            let mut f = 0.0;
            let mut s = 0.0;
            for (mask, &q) in table.iter().enumerate() {
                if q > 0.0 {
                    let (a, b) = sample_value(mask as u64);
                    f += q * a;
                    s += q * b;
                }
            }
            (Estimate::exact(f), Estimate::exact(s))
        }
        Mode::MonteCarlo => {
            if reps == 0 {
                return domain("at least one replication is required");
            }
            let draws: Vec<(f64, f64)> = replicate(reps, seed, CORR52_STREAM, |rng| {
                let fired = spec.indicators.sample(rng).iter().enumerate().fold(0u64, |m, (i, &b)| m | u64::from(b) << i);
                sample_value(fired)
            });
            let a: Vec<f64> = draws.iter().map(|d| d.0).collect();
            let b: Vec<f64> = draws.iter().map(|d| d.1).collect();
            (Estimate::from_samples(&a), Estimate::from_samples(&b))
        }
    };
    let term = |name: &str, e: Estimate| match mode {
        Mode::Exact => BoundTerm::exact(name, e.mean),
        Mode::MonteCarlo => BoundTerm::estimated(name, e),
    };
    let second = Estimate { mean: second.mean + fixed, ..second };
    let mut r = BoundReport::from_terms(NAME, mode, vec![term("first", first), term("second", second)], 0.0);
    for i in 0..n {
        for &j in &spec.neighborhoods[i] {
            if p[j] == 0.0 && p[i] > 0.0 {
                r = r.warn(format!("P(I_{j} = 1) = 0: the conditional term for ({i}, {j}) keeps only 3.5/λ p_i p_j"));
            }
        }
    }
    Ok(r)
}

// ---------------------------------------------------------------------------
// Locally dependent superpositions

/// Joint law of component processes `(Xi_1, ..., Xi_m)` on a common finite carrier.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentLaw {
    carrier: DistanceMatrix,
    components: usize,
    outcomes: Vec<(Vec<CountConfiguration>, f64)>,
    truncated_mass: f64,
}

impl ComponentLaw {
    pub fn new(carrier: DistanceMatrix, outcomes: Vec<(Vec<CountConfiguration>, f64)>, truncated_mass: f64) -> Result<Self> {
        let components = outcomes.first().map_or(0, |o| o.0.len());
        let k = carrier.len();
        for (tuple, q) in &outcomes {
            if tuple.len() != components || tuple.iter().any(|c| c.atoms() != k) {
                return domain("every outcome needs one configuration per component on the carrier");
            }
            if !(q.is_finite() && *q >= 0.0) {
                return domain(format!("outcome probability {q} is invalid"));
            }
        }
        let s: f64 = outcomes.iter().map(|o| o.1).sum::<f64>() + truncated_mass;
        if (s - 1.0).abs() > 1e-12 {
            return domain(format!("component law sums to {s}"));
        }
        Ok(ComponentLaw { carrier, components, outcomes, truncated_mass })
    }

    /// Product law of independent components, with at most `cap` joint outcomes.
    pub fn independent(parts: &[ConfigDistribution], cap: usize) -> Result<Self> {
        let carrier = parts.first().ok_or_else(|| Error::Config("no components".into()))?.carrier().clone();
        if parts.iter().any(|d| d.carrier() != &carrier) {
            return Err(Error::Config("components live on different carriers".into()));
        }
        let size = parts.iter().fold(1usize, |acc, d| acc.saturating_mul(d.support_len()));
        if size > cap {
            return Err(Error::Resource(format!("{size} joint outcomes exceed the cap of {cap}")));
        }
        let mut outcomes: Vec<(Vec<CountConfiguration>, f64)> = vec![(Vec::new(), 1.0)];
        let mut kept = 1.0;
        for d in parts {
            kept *= 1.0 - d.truncated_mass();
            let mut next = Vec::with_capacity(outcomes.len() * d.support_len());
            for (tuple, q) in &outcomes {
                for (c, p) in d.iter() {
                    let mut t = tuple.clone();
                    t.push(c.clone());
                    next.push((t, q * p));
                }
            }
            outcomes = next;
        }
        Self::new(carrier, outcomes, 1.0 - kept)
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn carrier(&self) -> &DistanceMatrix {
        &self.carrier
    }

    fn law_of(&self, f: impl Fn(&[CountConfiguration]) -> CountConfiguration) -> Result<ConfigDistribution> {
        let mut probs: BTreeMap<CountConfiguration, f64> = BTreeMap::new();
        for (t, q) in &self.outcomes {
            *probs.entry(f(t)).or_insert(0.0) += q;
        }
        ConfigDistribution::new(self.carrier.clone(), probs, self.truncated_mass)
    }

    pub fn marginal(&self, i: usize) -> Result<ConfigDistribution> {
        self.law_of(|t| t[i].clone())
    }

    /// Law of the superposition `sum_i Xi_i`.
    pub fn superposition(&self) -> Result<ConfigDistribution> {
        let k = self.carrier.len();
        self.law_of(|t| t.iter().fold(CountConfiguration::zeros(k), |acc, c| acc.add(c)))
    }
}

/// Superposition bound evaluated exactly under the minimal coupling.
///
/// For each component `i`, with `Xi^(i) = sum_{j ∉ A_i} Xi_j` and
/// `V_i = sum_{j ∈ A_i, j ≠ i} Xi_j`:
///
/// - first term: `sum_α λ_i(α)` times the cheapest transport from the joint
///   law of `(|Xi^(i)|, V_i)` onto the Palm law of `V_i` at `α`, with cost
///   `w(|Xi^(i)|) d'_1(v, v')`;
/// - second term: `(3.5/λ + E 2.5/(|Xi^(i)|+1)) sum_α λ_i(α) W(Xi_i, Xi_{i,α})`,
///   `W` being the Wasserstein distance with ground cost `d'_1` and `Xi_{i,α}`
///   the reduced Palm process.
///
/// The couplings are the optimal ones for each expectation, which gives the
/// smallest value the expression can take.
pub fn bound_theorem51(law: &ComponentLaw, neighborhoods: &[Vec<usize>], cap: usize) -> Result<BoundReport> {
    const NAME: &str = "superposition";
    let m = law.components();
    if neighborhoods.len() != m {
        return Err(Error::Config(format!("{} neighbourhoods for {m} components", neighborhoods.len())));
    }
    for (i, a) in neighborhoods.iter().enumerate() {
        if !a.contains(&i) || a.iter().any(|&j| j >= m) {
            return Err(Error::Config(format!("neighbourhood {i} must contain {i} and valid indices only")));
        }
    }
    let k = law.carrier.len();
    let marginals: Vec<ConfigDistribution> = (0..m).map(|i| law.marginal(i)).collect::<Result<_>>()?;
    let lam_i: Vec<Vec<f64>> = marginals.iter().map(intensity).collect();
    let lambda: f64 = lam_i.iter().flatten().sum();
    if lambda <= 0.0 {
        return Ok(BoundReport::invalid(NAME, Mode::Exact, "total intensity is 0", vec![]));
    }
    let d1p = d1_prime_counts_on(&law.carrier);
    let mut first = 0.0;
    let mut second = 0.0;
    for i in 0..m {
        let near = &neighborhoods[i];
        let mut joint: BTreeMap<(u32, CountConfiguration), f64> = BTreeMap::new();
        let mut palm_v: Vec<BTreeMap<CountConfiguration, f64>> = vec![BTreeMap::new(); k];
        let mut mean_recip = 0.0;
        let mut mass = 0.0;
        for (t, q) in &law.outcomes {
            let outside: u32 = (0..m).filter(|j| !near.contains(j)).map(|j| t[j].total()).sum();
            let v = near
                .iter()
                .filter(|&&j| j != i)
                .fold(CountConfiguration::zeros(k), |acc, &j| acc.add(&t[j]));
            mean_recip += q * 2.5 / (outside as f64 + 1.0);
            mass += q;
            for (a, pv) in palm_v.iter_mut().enumerate() {
                let here = t[i].get(a);
                if here > 0 {
                    *pv.entry(v.clone()).or_insert(0.0) += q * here as f64;
                }
            }
            *joint.entry((outside, v)).or_insert(0.0) += q;
        }
        mean_recip /= mass;
        let rows: Vec<(&(u32, CountConfiguration), f64)> = joint.iter().map(|(k, &q)| (k, q / mass)).collect();
        for (a, pv) in palm_v.iter().enumerate() {
            let la = lam_i[i][a];
            if la == 0.0 {
                continue;
            }
            let cols: Vec<(&CountConfiguration, f64)> = pv.iter().map(|(c, &q)| (c, q)).collect();
            let total: f64 = cols.iter().map(|c| c.1).sum();
            if rows.len().saturating_mul(cols.len()) > cap {
                return Err(Error::Resource(format!("{} x {} coupling exceeds the cap of {cap}", rows.len(), cols.len())));
            }
            let supply: Vec<f64> = rows.iter().map(|r| r.1).collect();
            let demand: Vec<f64> = cols.iter().map(|c| c.1 / total).collect();
            let cost = CostMatrix::from_fn(rows.len(), cols.len(), |r, c| {
                let ((n, v), _) = rows[r];
                stein_weight(lambda, *n as f64) * d1p(v, cols[c].0)
            });
            first += la * solve_transport(&supply, &demand, &cost)?.cost;
            let rp = reduced_palm(&marginals[i], a)?;
            second += (3.5 / lambda + mean_recip) * la * wasserstein_d1_prime(&marginals[i], &rp, cap)?;
        }
    }
    let mut r = BoundReport::from_terms(
        NAME,
        Mode::Exact,
        vec![BoundTerm::exact("first", first), BoundTerm::exact("second", second)],
        0.0,
    )
    .note("d'_1 expectations use the minimal (optimal transport) coupling");
    if law.truncated_mass > 0.0 {
        r = r.warn(format!("component law is truncated; {:e} of mass is not tabulated", law.truncated_mass));
    }
    Ok(r)
}

/// One draw from a user coupling for the Monte Carlo superposition bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoupledDraw {
    /// `|Xi^(i)|`.
    pub outside: usize,
    /// `d'_1(V_i, V_{i,α})` under the coupling, with `α ~ λ_i / λ_i`.
    pub v_distance: f64,
    /// `d'_1(Xi_i, Xi_{i,α})` under the coupling, for the same `α`.
    pub palm_distance: f64,
}

/// Joint sampler of the quantities the superposition bound integrates.
pub trait ComponentCoupling: Sync {
    fn components(&self) -> usize;
    /// Total intensity `λ_i(Γ)` of component `i`.
    fn component_mass(&self, i: usize) -> f64;
    fn draw(&self, i: usize, rng: &mut SimRng) -> CoupledDraw;
}

/// Monte Carlo superposition bound. The coupling of `(V_i, V_{i,α})` and
/// `(Xi_i, Xi_{i,α})` must be supplied; `None` is a configuration error.
pub fn bound_theorem51_mc(coupling: Option<&dyn ComponentCoupling>, reps: usize, seed: u64) -> Result<BoundReport> {
    const NAME: &str = "superposition";
    let coupling = coupling.ok_or_else(|| Error::Config("Monte Carlo mode needs an explicit coupling".into()))?;
    if reps == 0 {
        return domain("at least one replication is required");
    }
    let m = coupling.components();
    let lambda: f64 = (0..m).map(|i| coupling.component_mass(i)).sum();
    if lambda <= 0.0 {
        return Ok(BoundReport::invalid(NAME, Mode::MonteCarlo, "total intensity is 0", vec![]));
    }
    let mut first = Estimate::exact(0.0);
    let mut second = Estimate::exact(0.0);
    for i in 0..m {
        let li = coupling.component_mass(i);
        if li == 0.0 {
            continue;
        }
        let draws = replicate(reps, seed, THM51_STREAM + i as u64, |rng| coupling.draw(i, rng));
        let t1: Vec<f64> = draws.iter().map(|d| li * stein_weight(lambda, d.outside as f64) * d.v_distance).collect();
        let recip: Vec<f64> = draws.iter().map(|d| 2.5 / (d.outside as f64 + 1.0)).collect();
        let dist: Vec<f64> = draws.iter().map(|d| li * d.palm_distance).collect();
        first = first.add_independent(Estimate::from_samples(&t1));
        let (r, d) = (Estimate::from_samples(&recip), Estimate::from_samples(&dist));
        let factor = 3.5 / lambda + r.mean;
        // delta method for the product of two means
        let se = (factor * d.se).hypot(d.mean * r.se);
        second = second.add_independent(Estimate { mean: factor * d.mean, se, n: reps });
    }
    Ok(BoundReport::from_terms(
        NAME,
        Mode::MonteCarlo,
        vec![BoundTerm::estimated("first", first), BoundTerm::estimated("second", second)],
        0.0,
    )
    .note("d'_1 expectations use the supplied coupling"))
}

// ---------------------------------------------------------------------------
// Independent renewal processes

/// Closed-form bound for independent renewal processes from `G_i(T)` and `F_i(T)`:
///
/// `6 sum_i (2F_i + G_i) G_i / (1 - F_i)^2 / (sum_i G_i - max_j G_j / (1 - F_j))`.
pub fn bound_corollary53(g: &[f64], f: &[f64]) -> BoundReport {
    const NAME: &str = "renewal";
    if g.len() != f.len() || g.is_empty() {
        return BoundReport::invalid(NAME, Mode::Exact, "need one G_i(T) and F_i(T) per process", vec![]);
    }
    if g.iter().chain(f).any(|v| !(0.0..=1.0).contains(v)) {
        return BoundReport::invalid(NAME, Mode::Exact, "G_i(T) and F_i(T) must lie in [0, 1]", vec![]);
    }
    if let Some(i) = f.iter().position(|&v| v >= 1.0) {
        return BoundReport::invalid(NAME, Mode::Exact, format!("F_{i}(T) = 1 makes the bound undefined"), vec![]);
    }
    let numerator: f64 = g.iter().zip(f).map(|(&gi, &fi)| 6.0 * (2.0 * fi + gi) * gi / ((1.0 - fi) * (1.0 - fi))).sum();
    let worst = g.iter().zip(f).map(|(&gi, &fi)| gi / (1.0 - fi)).fold(0.0, f64::max);
    let denominator = g.iter().sum::<f64>() - worst;
    let terms = vec![BoundTerm::exact("numerator", numerator), BoundTerm::exact("denominator", denominator)];
    if denominator <= 0.0 {
        return BoundReport::invalid(
            NAME,
            Mode::Exact,
            format!("denominator sum G_i - max G_j/(1-F_j) = {denominator:e} is not positive"),
            terms,
        );
    }
    let value = numerator / denominator;
    BoundReport {
        bound: NAME.into(),
        mode: Mode::Exact,
        value: Some(value),
        se: None,
        interval: Some([value, value]),
        terms,
        invalid: None,
        warnings: Vec::new(),
        notes: Vec::new(),
    }
}

// ---------------------------------------------------------------------------
// Matérn scaling

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub r: f64,
    pub bound: f64,
    pub se: f64,
    pub first: f64,
    pub second: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingStudy {
    pub nu: f64,
    pub dim: usize,
    pub rows: Vec<ScalingRow>,
    /// Least-squares slope of `log bound` against `log r`.
    pub slope: f64,
}

/// Monte Carlo Matérn bound over a grid of radii, with the fitted log-log slope.
pub fn matern_scaling_study(nu: f64, dim: usize, radii: &[f64], reps: usize, seed: u64) -> Result<ScalingStudy> {
    if radii.len() < 2 {
        return domain("at least two radii are needed for a slope");
    }
    let mut rows = Vec::with_capacity(radii.len());
    for (k, &r) in radii.iter().enumerate() {
        if 2.0 * r >= 0.5 {
            return domain(format!("radius {r} is too large for neighbourhoods B(α, 2r) in the unit cube"));
        }
        let spec = MaternSpec::new(nu, r, dim)?;
        let rep = bound_theorem41_matern(&spec, reps, crate::rng::derive_seed(seed, 0x5343, k as u64))?;
        let value = rep.value.ok_or_else(|| Error::Domain(format!("bound invalid at r = {r}")))?;
        rows.push(ScalingRow {
            r,
            bound: value,
            se: rep.se.unwrap_or(0.0),
            first: rep.term("first").map_or(0.0, |t| t.value),
            second: rep.term("second").map_or(0.0, |t| t.value),
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.r.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.bound.ln()).collect();
    Ok(ScalingStudy { nu, dim, slope: ols_slope(&xs, &ys), rows })
}

#[cfg(test)]
mod tests;
