//! Exact Wasserstein distances between finitely supported laws.
//!
//! With ground cost `rho_1`, configurations of different total count are at
//! distance 1 and configurations of equal total at distance at most 1. An
//! exchange argument then shows that some optimal coupling keeps
//! `min(a_n, b_n)` of the mass of every count class `n` inside the class, so
//!
//! `d_2(P, Q) = sum_n W_n + 1/2 sum_n |a_n - b_n|`,
//!
//! where `W_n` is the cheapest way to move `min(a_n, b_n)` units inside class
//! `n`. Each `W_n` is a small balanced transport problem (the surplus side
//! feeds a zero-cost dummy node), solved exactly with its dual certificate.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::build::poisson_class;
use super::{ConfigDistribution, CountConfiguration};
use crate::carrier::{d1_prime, rho1, CarrierSpace, Configuration, DistanceMatrix};
use crate::error::{Error, Result};
use crate::transport::{solve_transport, CostMatrix};

/// Default limit on the number of cost-matrix cells across all transport problems.
pub const DEFAULT_TRANSPORT_CAP: usize = 4_000_000;

/// Exact `d_2` value with its truncation interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct D2Result {
    /// Distance between the two tables, each renormalised to mass 1.
    pub value: f64,
    /// `value - truncation_width`, clamped to `[0, 1]`.
    pub lower: f64,
    /// `value + truncation_width`, clamped to `[0, 1]`.
    pub upper: f64,
    /// Sum of the truncated masses; the distance between the untruncated laws lies in `[lower, upper]`.
    pub truncation_width: f64,
    /// Largest `|primal - dual|` over the class problems.
    pub dual_gap: f64,
    /// Cells in all cost matrices that were solved.
    pub transport_cells: usize,
}

impl D2Result {
    fn new(value: f64, width: f64, dual_gap: f64, cells: usize) -> Self {
        let value = value.clamp(0.0, 1.0);
        D2Result {
            value,
            lower: (value - width).max(0.0),
            upper: (value + width).min(1.0),
            truncation_width: width,
            dual_gap,
            transport_cells: cells,
        }
    }
}

/// `rho_1` between two count vectors.
pub fn rho1_count(space: &CarrierSpace, a: &CountConfiguration, b: &CountConfiguration) -> f64 {
    rho1(&Configuration::from_counts(a.counts()), &Configuration::from_counts(b.counts()), space)
}

fn d1_prime_count(space: &CarrierSpace, a: &CountConfiguration, b: &CountConfiguration) -> f64 {
    d1_prime(&Configuration::from_counts(a.counts()), &Configuration::from_counts(b.counts()), space)
}

type Class = Vec<(CountConfiguration, f64)>;

fn classes(d: &ConfigDistribution, scale: f64) -> BTreeMap<u32, Class> {
    let mut out: BTreeMap<u32, Class> = BTreeMap::new();
    for (c, p) in d.iter() {
        out.entry(c.total()).or_default().push((c.clone(), p * scale));
    }
    out
}

fn mass(c: &Class) -> f64 {
    c.iter().map(|(_, p)| p).sum()
}

// Cheapest transport of min(a, b) units inside one count class; returns (primal, dual).
fn class_transport(space: &CarrierSpace, p: &Class, q: &Class) -> Result<(f64, f64)> {
    let a = mass(p);
    let b = mass(q);
    if a == 0.0 || b == 0.0 {
        return Ok((0.0, 0.0));
    }
    let mut supply: Vec<f64> = p.iter().map(|(_, x)| *x).collect();
    let mut demand: Vec<f64> = q.iter().map(|(_, y)| *y).collect();
    let (m, n) = (supply.len(), demand.len());
    let dummy_row = b > a;
    let dummy_col = a > b;
    if dummy_row {
        supply.push(b - a);
    }
    if dummy_col {
        demand.push(a - b);
    }
    let cost = CostMatrix::from_fn(supply.len(), demand.len(), |i, j| {
        if i >= m || j >= n {
            0.0
        } else {
            rho1_count(space, &p[i].0, &q[j].0)
        }
    });
    let sol = solve_transport(&supply, &demand, &cost)?;
    Ok((sol.cost, sol.dual_objective(&supply, &demand)))
}

fn check_carriers(d1: &ConfigDistribution, d2: &ConfigDistribution) -> Result<()> {
    if d1.carrier() != d2.carrier() {
        return Err(Error::Config("laws live on different carriers".into()));
    }
    Ok(())
}

fn kept_scale(d: &ConfigDistribution) -> Result<f64> {
    let kept: f64 = d.iter().map(|(_, p)| p).sum();
    if kept <= 0.0 {
        return Err(Error::Domain("law has no tabulated mass".into()));
    }
    Ok(1.0 / kept)
}

fn class_sum(
    space: &CarrierSpace,
    p: &BTreeMap<u32, Class>,
    q: &BTreeMap<u32, Class>,
    cap: usize,
) -> Result<(f64, f64, f64, usize)> {
    let mut cells = 0usize;
    for (n, pc) in p {
        if let Some(qc) = q.get(n) {
            cells = cells.saturating_add((pc.len() + 1).saturating_mul(qc.len() + 1));
        }
    }
    if cells > cap {
        return Err(Error::Resource(format!("{cells} transport cells exceed the cap of {cap}")));
    }
    let mut inner = 0.0;
    let mut gap = 0.0f64;
    let mut mismatch = 0.0;
    for (n, pc) in p {
        match q.get(n) {
            Some(qc) => {
                let (primal, dual) = class_transport(space, pc, qc)?;
                inner += primal;
                gap = gap.max((primal - dual).abs());
                mismatch += (mass(pc) - mass(qc)).abs();
            }
            None => mismatch += mass(pc),
        }
    }
    for (n, qc) in q {
        if !p.contains_key(n) {
            mismatch += mass(qc);
        }
    }
    Ok((inner, 0.5 * mismatch, gap, cells))
}

/// `d_2(D1, D2)` by optimal transport with cost `rho_1`, using [`DEFAULT_TRANSPORT_CAP`].
pub fn exact_d2(d1: &ConfigDistribution, d2: &ConfigDistribution) -> Result<D2Result> {
    exact_d2_with_cap(d1, d2, DEFAULT_TRANSPORT_CAP)
}

/// `d_2(D1, D2)` with an explicit limit on the transport problem size.
///
/// Both tables are renormalised before solving. Since `rho_1 <= 1`, the
/// distance between the untruncated laws differs from the returned value by
/// at most the sum of the truncated masses.
pub fn exact_d2_with_cap(d1: &ConfigDistribution, d2: &ConfigDistribution, cap: usize) -> Result<D2Result> {
    check_carriers(d1, d2)?;
    let space = CarrierSpace::FiniteAtoms(d1.carrier().clone());
    let p = classes(d1, kept_scale(d1)?);
    let q = classes(d2, kept_scale(d2)?);
    let (inner, across, gap, cells) = class_sum(&space, &p, &q, cap)?;
    Ok(D2Result::new(inner + across, d1.truncated_mass() + d2.truncated_mass(), gap, cells))
}

/// `d_2(D, Po(means))` against the untruncated Poisson law. Only count classes
/// where `D` has mass are enumerated; every other class contributes its
/// Poisson mass to the cross-class term, so the reference is exact and the
/// interval width is the truncated mass of `D` alone.
pub fn exact_d2_poisson(d: &ConfigDistribution, means: &[f64], cap: usize) -> Result<D2Result> {
    if means.len() != d.atoms() {
        return Err(Error::Config("one Poisson mean per atom required".into()));
    }
    let space = CarrierSpace::FiniteAtoms(d.carrier().clone());
    let p = classes(d, kept_scale(d)?);
    let mut cells = 0usize;
    for (n, pc) in &p {
        let size = class_size(means, *n);
        cells = cells.saturating_add((pc.len() + 1).saturating_mul(size + 1));
    }
    if cells > cap {
        return Err(Error::Resource(format!("{cells} transport cells exceed the cap of {cap}")));
    }
    let lambda: f64 = means.iter().sum();
    let mut inner = 0.0;
    let mut gap = 0.0f64;
    let mut mismatch = 0.0;
    for (n, pc) in &p {
        let qc = poisson_class(means, *n);
        let (primal, dual) = class_transport(&space, pc, &qc)?;
        inner += primal;
        gap = gap.max((primal - dual).abs());
        mismatch += (mass(pc) - mass(&qc)).abs();
    }
    mismatch += poisson_complement(lambda, &p);
    Ok(D2Result::new(inner + 0.5 * mismatch, d.truncated_mass(), gap, cells))
}

// Poisson mass of the count classes where the table has none.
fn poisson_complement(lambda: f64, p: &BTreeMap<u32, Class>) -> f64 {
    let top = p.keys().copied().max().unwrap_or(0) as usize;
    let pmf = crate::univariate::poisson_pmf(lambda, top).expect("valid mean");
    let below: f64 = (0..=top).filter(|n| !p.contains_key(&(*n as u32))).map(|n| pmf.get(n)).sum();
    below + pmf.tail_mass()
}

// Number of compositions of n into the atoms with positive mean.
fn class_size(means: &[f64], n: u32) -> usize {
    let k = means.iter().filter(|&&m| m > 0.0).count();
    if k == 0 {
        return usize::from(n == 0);
    }
    // C(n + k - 1, k - 1)
    let mut c: u128 = 1;
    for i in 1..k as u128 {
        c = c * (n as u128 + i) / i;
        if c > usize::MAX as u128 {
            return usize::MAX;
        }
    }
    c as usize
}

/// Minimal cost of transporting `supply` onto `demand` with the given costs (equal totals).
pub fn transport_value(supply: &[f64], demand: &[f64], cost: &CostMatrix) -> Result<f64> {
    Ok(solve_transport(supply, demand, cost)?.cost)
}

/// Wasserstein distance with ground cost `d'_1` between two tables (renormalised).
pub fn wasserstein_d1_prime(d1: &ConfigDistribution, d2: &ConfigDistribution, cap: usize) -> Result<f64> {
    check_carriers(d1, d2)?;
    let cells = d1.support_len().saturating_mul(d2.support_len());
    if cells > cap {
        return Err(Error::Resource(format!("{cells} transport cells exceed the cap of {cap}")));
    }
    let space = CarrierSpace::FiniteAtoms(d1.carrier().clone());
    let s1 = kept_scale(d1)?;
    let s2 = kept_scale(d2)?;
    let a: Vec<(&CountConfiguration, f64)> = d1.iter().collect();
    let b: Vec<(&CountConfiguration, f64)> = d2.iter().collect();
    let supply: Vec<f64> = a.iter().map(|(_, p)| p * s1).collect();
    let demand: Vec<f64> = b.iter().map(|(_, q)| q * s2).collect();
    let cost = CostMatrix::from_fn(a.len(), b.len(), |i, j| d1_prime_count(&space, a[i].0, b[j].0));
    transport_value(&supply, &demand, &cost)
}

/// Exposed for the bound evaluators: `d'_1` between count vectors on `carrier`.
pub(crate) fn d1_prime_counts_on(carrier: &DistanceMatrix) -> impl Fn(&CountConfiguration, &CountConfiguration) -> f64 {
    let space = CarrierSpace::FiniteAtoms(carrier.clone());
    move |a, b| d1_prime_count(&space, a, b)
}
