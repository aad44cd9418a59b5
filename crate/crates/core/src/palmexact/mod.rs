//! Exact calculus for point processes with finitely many configurations on a
//! finite carrier.
//!
//! A law is a table from atom-count vectors to probabilities, plus the mass
//! that a truncation discarded. On such a carrier the Campbell measure
//! disintegrates elementarily, `Q_a(xi) = P(xi) xi(a) / lambda(a)`, so Palm
//! distributions, the Campbell identity, the `D` operator and local
//! dependence can all be evaluated by enumeration.

mod build;
mod d2;
mod text;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::carrier::DistanceMatrix;
use crate::error::{domain, Error, Result};

pub use build::{
    bernoulli_process_dist, discrete_renewal_dist, independent_sum, indicator_table_dist, lift_carrier,
    lifted_marked_dist, poisson_cap_for_tail, project_lifted, truncated_poisson_dist, truncated_poisson_total,
    MAX_ENUMERATED_ATOMS,
};
pub use d2::{
    exact_d2, exact_d2_poisson, exact_d2_with_cap, rho1_count, transport_value, wasserstein_d1_prime, D2Result,
    DEFAULT_TRANSPORT_CAP,
};
pub use text::{from_text, to_text};
pub(crate) use d2::d1_prime_counts_on;

/// Atom counts of a configuration on a finite carrier.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CountConfiguration(Vec<u32>);

impl CountConfiguration {
    pub fn new(counts: Vec<u32>) -> Self {
        CountConfiguration(counts)
    }

    pub fn zeros(k: usize) -> Self {
        CountConfiguration(vec![0; k])
    }

    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    pub fn atoms(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, a: usize) -> u32 {
        self.0[a]
    }

    /// `|xi|`.
    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    /// `xi + delta_a`.
    pub fn plus(&self, a: usize) -> Self {
        let mut c = self.0.clone();
        c[a] += 1;
        CountConfiguration(c)
    }

    /// `xi - delta_a`, if `xi(a) >= 1`.
    pub fn minus(&self, a: usize) -> Option<Self> {
        if self.0[a] == 0 {
            return None;
        }
        let mut c = self.0.clone();
        c[a] -= 1;
        Some(CountConfiguration(c))
    }

    /// Counts on the atoms where `keep` holds, zero elsewhere.
    pub fn restrict(&self, keep: &[bool]) -> Self {
        CountConfiguration(self.0.iter().zip(keep).map(|(&c, &k)| if k { c } else { 0 }).collect())
    }

    /// `xi(B)` for the atom set `set`.
    pub fn mass_on(&self, set: &[usize]) -> u32 {
        set.iter().map(|&a| self.0[a]).sum()
    }

    /// Componentwise sum.
    pub fn add(&self, other: &CountConfiguration) -> Self {
        CountConfiguration(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

impl From<Vec<u32>> for CountConfiguration {
    fn from(v: Vec<u32>) -> Self {
        CountConfiguration(v)
    }
}

/// Finitely supported law of a point process on a finite carrier.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigDistribution {
    carrier: DistanceMatrix,
    probs: BTreeMap<CountConfiguration, f64>,
    truncated_mass: f64,
}

const NORMALISATION_TOL: f64 = 1e-12;

impl ConfigDistribution {
    /// Builds a law from `(counts, probability)` entries, merging repeats and
    /// dropping zero entries. Probabilities plus `truncated_mass` must sum to 1.
    pub fn new(
        carrier: DistanceMatrix,
        entries: impl IntoIterator<Item = (CountConfiguration, f64)>,
        truncated_mass: f64,
    ) -> Result<Self> {
        let d = Self::assemble(carrier, entries, truncated_mass)?;
        let total: f64 = d.probs.values().sum::<f64>() + d.truncated_mass;
        if (total - 1.0).abs() > NORMALISATION_TOL {
            return domain(format!("probabilities and truncated mass sum to {total}"));
        }
        Ok(d)
    }

    fn assemble(
        carrier: DistanceMatrix,
        entries: impl IntoIterator<Item = (CountConfiguration, f64)>,
        truncated_mass: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0 + NORMALISATION_TOL).contains(&truncated_mass) {
            return domain(format!("truncated mass {truncated_mass} outside [0,1]"));
        }
        let k = carrier.len();
        let mut probs = BTreeMap::new();
        for (c, p) in entries {
            if c.atoms() != k {
                return Err(Error::Config(format!("configuration has {} atoms, carrier has {k}", c.atoms())));
            }
            if !(p >= 0.0) || !p.is_finite() {
                return domain(format!("probability {p} is not a finite nonnegative number"));
            }
            if p > 0.0 {
                *probs.entry(c).or_insert(0.0) += p;
            }
        }
        Ok(ConfigDistribution { carrier, probs, truncated_mass: truncated_mass.max(0.0) })
    }

    pub fn point_mass(carrier: DistanceMatrix, counts: CountConfiguration) -> Result<Self> {
        Self::new(carrier, [(counts, 1.0)], 0.0)
    }

    pub fn carrier(&self) -> &DistanceMatrix {
        &self.carrier
    }

    pub fn atoms(&self) -> usize {
        self.carrier.len()
    }

    pub fn truncated_mass(&self) -> f64 {
        self.truncated_mass
    }

    /// Number of configurations with positive probability.
    pub fn support_len(&self) -> usize {
        self.probs.len()
    }

    pub fn prob(&self, c: &CountConfiguration) -> f64 {
        self.probs.get(c).copied().unwrap_or(0.0)
    }

    /// Entries in increasing order of count vectors.
    pub fn iter(&self) -> impl Iterator<Item = (&CountConfiguration, f64)> {
        self.probs.iter().map(|(c, &p)| (c, p))
    }

    /// `E f(Xi)` over the tabulated configurations.
    pub fn expect(&self, f: impl Fn(&CountConfiguration) -> f64) -> f64 {
        self.probs.iter().map(|(c, &p)| p * f(c)).sum()
    }

    /// Law of `|Xi|` over the table (the truncated mass is not included).
    pub fn total_count_pmf(&self) -> Vec<f64> {
        let top = self.probs.keys().map(CountConfiguration::total).max().unwrap_or(0) as usize;
        let mut pmf = vec![0.0; top + 1];
        for (c, &p) in &self.probs {
            pmf[c.total() as usize] += p;
        }
        pmf
    }

    /// Image law under `f`, on the same carrier.
    pub fn map(&self, f: impl Fn(&CountConfiguration) -> CountConfiguration) -> Self {
        let mut probs = BTreeMap::new();
        for (c, &p) in &self.probs {
            *probs.entry(f(c)).or_insert(0.0) += p;
        }
        ConfigDistribution { carrier: self.carrier.clone(), probs, truncated_mass: self.truncated_mass }
    }

    /// Law of `Xi` restricted to the atoms where `keep` holds.
    pub fn restrict(&self, keep: &[bool]) -> Self {
        self.map(|c| c.restrict(keep))
    }

    /// Law of `Xi + delta_a`.
    pub fn shift_up(&self, a: usize) -> Self {
        self.map(|c| c.plus(a))
    }

    /// The table renormalised to total mass 1, with no truncated mass.
    pub fn renormalized(&self) -> Result<Self> {
        let s: f64 = self.probs.values().sum();
        if s <= 0.0 {
            return domain("cannot renormalise an empty table");
        }
        let probs = self.probs.iter().map(|(c, &p)| (c.clone(), p / s)).collect();
        Ok(ConfigDistribution { carrier: self.carrier.clone(), probs, truncated_mass: 0.0 })
    }
}

/// Total variation between two laws on the same carrier, the truncated
/// masses acting as one extra configuration.
pub fn total_variation(p: &ConfigDistribution, q: &ConfigDistribution) -> f64 {
    let mut s = 0.0;
    for (c, &x) in &p.probs {
        s += (x - q.prob(c)).abs();
    }
    for (c, &y) in &q.probs {
        if !p.probs.contains_key(c) {
            s += y;
        }
    }
    (0.5 * (s + (p.truncated_mass - q.truncated_mass).abs())).min(1.0)
}

/// `lambda(a) = E Xi(a)`.
pub fn intensity(d: &ConfigDistribution) -> Vec<f64> {
    let mut lam = vec![0.0; d.atoms()];
    for (c, &p) in &d.probs {
        for (a, &n) in c.counts().iter().enumerate() {
            lam[a] += p * n as f64;
        }
    }
    lam
}

/// Palm distribution at `a`: `Q_a(xi) = P(xi) xi(a) / lambda(a)`.
pub fn palm(d: &ConfigDistribution, a: usize) -> Result<ConfigDistribution> {
    if a >= d.atoms() {
        return domain(format!("atom {a} out of range"));
    }
    let lam: f64 = d.probs.iter().map(|(c, &p)| p * c.get(a) as f64).sum();
    if lam <= 0.0 {
        return Err(Error::PalmUndefined { atom: a });
    }
    let probs = d
        .probs
        .iter()
        .filter(|(c, _)| c.get(a) > 0)
        .map(|(c, &p)| (c.clone(), p * c.get(a) as f64 / lam))
        .collect();
    Ok(ConfigDistribution { carrier: d.carrier.clone(), probs, truncated_mass: 0.0 })
}

/// Reduced Palm distribution at `a`: the Palm law of `Xi_a - delta_a`.
pub fn reduced_palm(d: &ConfigDistribution, a: usize) -> Result<ConfigDistribution> {
    Ok(palm(d, a)?.map(|c| c.minus(a).expect("Palm support has xi(a) >= 1")))
}

/// Both sides of the Campbell identity
/// `E sum_a f(a, Xi) Xi(a) = sum_a lambda(a) E_{Q_a} f(a, .)`.
/// Atoms with zero intensity contribute nothing to either side.
pub fn campbell_check(d: &ConfigDistribution, f: &dyn Fn(usize, &CountConfiguration) -> f64) -> Result<(f64, f64)> {
    let lhs: f64 = d
        .probs
        .iter()
        .map(|(c, &p)| p * (0..d.atoms()).map(|a| f(a, c) * c.get(a) as f64).sum::<f64>())
        .sum();
    let lam = intensity(d);
    let mut rhs = 0.0;
    for (a, &la) in lam.iter().enumerate() {
        if la > 0.0 {
            rhs += la * palm(d, a)?.expect(|c| f(a, c));
        }
    }
    Ok((lhs, rhs))
}

/// `E Df(Xi)` with `Df(xi) = sum_a lambda(a) f(a, xi + delta_a) - sum_a xi(a) f(a, xi)`
/// and `lambda` the intensity of `d`.
pub fn d_operator_expectation(d: &ConfigDistribution, f: &dyn Fn(usize, &CountConfiguration) -> f64) -> f64 {
    d_operator_expectation_with(d, f, &intensity(d))
}

/// As [`d_operator_expectation`] with an explicit intensity vector.
pub fn d_operator_expectation_with(
    d: &ConfigDistribution,
    f: &dyn Fn(usize, &CountConfiguration) -> f64,
    lambda: &[f64],
) -> f64 {
    d.expect(|c| {
        (0..d.atoms())
            .map(|a| lambda[a] * f(a, &c.plus(a)) - c.get(a) as f64 * f(a, c))
            .sum::<f64>()
    })
}

/// `E Ah(Xi)` for the immigration-death generator with immigration intensity `lambda`:
/// `Ah(xi) = sum_a lambda(a) [h(xi + delta_a) - h(xi)] + sum_a xi(a) [h(xi - delta_a) - h(xi)]`.
pub fn generator_expectation(d: &ConfigDistribution, h: &dyn Fn(&CountConfiguration) -> f64, lambda: &[f64]) -> f64 {
    d.expect(|c| {
        let hc = h(c);
        (0..d.atoms())
            .map(|a| {
                let birth = lambda[a] * (h(&c.plus(a)) - hc);
                let death = match c.minus(a) {
                    Some(m) => c.get(a) as f64 * (h(&m) - hc),
                    None => 0.0,
                };
                birth + death
            })
            .sum::<f64>()
    })
}

/// Outcome of comparing `L(Xi|_{A_a^c})` with `L(Xi_a|_{A_a^c})` at every atom.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalDependenceReport {
    /// Total variation per atom; `None` where the intensity vanishes.
    pub per_atom: Vec<Option<f64>>,
    pub max_discrepancy: f64,
    /// `max_discrepancy <= 1e-12`.
    pub holds: bool,
}

/// Exact local dependence test. `neighborhoods[a]` must contain `a`.
pub fn local_dependence_check(d: &ConfigDistribution, neighborhoods: &[Vec<usize>]) -> Result<LocalDependenceReport> {
    let k = d.atoms();
    if neighborhoods.len() != k {
        return Err(Error::Config(format!("{} neighborhoods for {k} atoms", neighborhoods.len())));
    }
    let lam = intensity(d);
    let mut per_atom = Vec::with_capacity(k);
    let mut worst = 0.0f64;
    for a in 0..k {
        let nb = &neighborhoods[a];
        if !nb.contains(&a) || nb.iter().any(|&b| b >= k) {
            return Err(Error::Config(format!("neighborhood of atom {a} must contain it and stay in range")));
        }
        if lam[a] <= 0.0 {
            per_atom.push(None);
            continue;
        }
        let keep: Vec<bool> = (0..k).map(|b| !nb.contains(&b)).collect();
        let tv = total_variation(&d.restrict(&keep), &palm(d, a)?.restrict(&keep));
        worst = worst.max(tv);
        per_atom.push(Some(tv));
    }
    Ok(LocalDependenceReport { per_atom, max_discrepancy: worst, holds: worst <= 1e-12 })
}
