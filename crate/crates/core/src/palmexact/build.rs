//! Constructors for the laws used throughout: truncated Poisson products,
//! Bernoulli and indicator-table processes, lifted marked processes, discrete
//! renewal processes and independent superpositions.

use std::collections::BTreeMap;

use super::{ConfigDistribution, CountConfiguration};
use crate::carrier::DistanceMatrix;
use crate::error::{domain, Error, Result};
use crate::univariate::{poisson_pmf, BernoulliVector};

/// Largest atom or slot count for which `2^n` enumeration is attempted.
pub const MAX_ENUMERATED_ATOMS: usize = 20;

/// Smallest `cap` with `P(Po(mean) > cap) <= eps`.
pub fn poisson_cap_for_tail(mean: f64, eps: f64) -> Result<usize> {
    if mean == 0.0 {
        return Ok(0);
    }
    let top = crate::univariate::default_cutoff(mean) * 2 + 50;
    let t = poisson_pmf(mean, top)?;
    // suffix[c] = P(Po > c), summed from the right
    let mut suffix = vec![0.0; top + 1];
    suffix[top] = t.tail_mass();
    for c in (0..top).rev() {
        suffix[c] = suffix[c + 1] + t.get(c + 1);
    }
    Ok(suffix.iter().position(|&s| s <= eps).unwrap_or(top))
}

fn check_means(means: &[f64]) -> Result<()> {
    if means.iter().any(|&m| !(m >= 0.0) || !m.is_finite()) {
        return domain("Poisson means must be finite and nonnegative");
    }
    Ok(())
}

/// Independent `Po(means[a])` counts truncated at `caps[a]`. Configurations
/// beyond any cap are dropped; their mass `1 - prod_a P(Po(means[a]) <= caps[a])`
/// is recorded as the truncated mass.
pub fn truncated_poisson_dist(carrier: DistanceMatrix, means: &[f64], caps: &[usize]) -> Result<ConfigDistribution> {
    check_means(means)?;
    let k = carrier.len();
    if means.len() != k || caps.len() != k {
        return Err(Error::Config("means and caps must have one entry per atom".into()));
    }
    let mut tables = Vec::with_capacity(k);
    let mut log_kept = 0.0;
    for a in 0..k {
        let t = poisson_pmf(means[a], caps[a])?;
        log_kept += (-t.tail_mass()).ln_1p();
        tables.push(t.probs()[..=caps[a]].to_vec());
    }
    let mut entries: Vec<(Vec<u32>, f64)> = vec![(Vec::with_capacity(k), 1.0)];
    for table in &tables {
        let mut next = Vec::new();
        for (c, p) in &entries {
            for (n, &q) in table.iter().enumerate() {
                if q > 0.0 {
                    let mut c2 = c.clone();
                    c2.push(n as u32);
                    next.push((c2, p * q));
                }
            }
        }
        entries = next;
    }
    let probs: BTreeMap<CountConfiguration, f64> =
        entries.into_iter().map(|(c, p)| (CountConfiguration::new(c), p)).collect();
    Ok(ConfigDistribution { carrier, probs, truncated_mass: -log_kept.exp_m1() })
}

/// Independent Poisson counts with all configurations of total at most
/// `max_total`; the truncated mass is `P(Po(sum means) > max_total)`.
pub fn truncated_poisson_total(carrier: DistanceMatrix, means: &[f64], max_total: u32) -> Result<ConfigDistribution> {
    check_means(means)?;
    let k = carrier.len();
    if means.len() != k {
        return Err(Error::Config("means must have one entry per atom".into()));
    }
    let lambda: f64 = means.iter().sum();
    let pmf = poisson_pmf(lambda, max_total as usize)?;
    let mut probs = BTreeMap::new();
    for n in 0..=max_total {
        for (c, p) in poisson_class(means, n) {
            probs.insert(c, p);
        }
    }
    Ok(ConfigDistribution { carrier, probs, truncated_mass: pmf.tail_mass() })
}

/// All configurations of total `n` with their probabilities under independent
/// `Po(means[a])` counts: `prod_a e^{-m_a} m_a^{c_a} / c_a!`.
pub(crate) fn poisson_class(means: &[f64], n: u32) -> Vec<(CountConfiguration, f64)> {
    let k = means.len();
    let active: Vec<usize> = (0..k).filter(|&a| means[a] > 0.0).collect();
    let lambda: f64 = means.iter().sum();
    let mut out = Vec::new();
    if active.is_empty() {
        if n == 0 {
            out.push((CountConfiguration::zeros(k), 1.0));
        }
        return out;
    }
    let ln_fact: Vec<f64> = (0..=n as usize)
        .scan(0.0, |acc, i| {
            if i > 0 {
                *acc += (i as f64).ln();
            }
            Some(*acc)
        })
        .collect();
    let ln_m: Vec<f64> = means.iter().map(|m| if *m > 0.0 { m.ln() } else { 0.0 }).collect();
    let mut counts = vec![0u32; k];
    fn rec(
        idx: usize,
        left: u32,
        active: &[usize],
        counts: &mut Vec<u32>,
        acc: f64,
        ln_m: &[f64],
        ln_fact: &[f64],
        lambda: f64,
        out: &mut Vec<(CountConfiguration, f64)>,
    ) {
        let a = active[idx];
        if idx + 1 == active.len() {
            counts[a] = left;
            let lp = acc + left as f64 * ln_m[a] - ln_fact[left as usize] - lambda;
            out.push((CountConfiguration::new(counts.clone()), lp.exp()));
            counts[a] = 0;
            return;
        }
        for c in 0..=left {
            counts[a] = c;
            let term = c as f64 * ln_m[a] - ln_fact[c as usize];
            rec(idx + 1, left - c, active, counts, acc + term, ln_m, ln_fact, lambda, out);
        }
        counts[a] = 0;
    }
    rec(0, n, &active, &mut counts, 0.0, &ln_m, &ln_fact, lambda, &mut out);
    out
}

/// `Xi = sum_i X_i delta_{a_i}` with independent `X_i ~ Bernoulli(p_i)`, atom `i` for indicator `i`.
pub fn bernoulli_process_dist(p: &BernoulliVector, carrier: DistanceMatrix) -> Result<ConfigDistribution> {
    let n = p.len();
    if n > MAX_ENUMERATED_ATOMS {
        return Err(Error::Resource(format!("2^{n} configurations exceed the enumeration limit")));
    }
    let mut table = vec![1.0; 1usize << n];
    for (mask, t) in table.iter_mut().enumerate() {
        for (i, &pi) in p.probs().iter().enumerate() {
            *t *= if mask >> i & 1 == 1 { pi } else { 1.0 - pi };
        }
    }
    indicator_table_dist(&table, carrier)
}

/// Law of `sum_i I_i delta_{a_i}` from a joint table: `table[mask]` is the
/// probability that exactly the indicators in `mask` equal 1.
pub fn indicator_table_dist(table: &[f64], carrier: DistanceMatrix) -> Result<ConfigDistribution> {
    let n = carrier.len();
    if n > MAX_ENUMERATED_ATOMS {
        return Err(Error::Resource(format!("2^{n} configurations exceed the enumeration limit")));
    }
    if table.len() != 1usize << n {
        return Err(Error::Config(format!("table has {} entries, expected 2^{n}", table.len())));
    }
    let entries = table.iter().enumerate().map(|(mask, &p)| {
        (CountConfiguration::new((0..n).map(|i| (mask >> i & 1) as u32).collect()), p)
    });
    ConfigDistribution::new(carrier, entries, 0.0)
}

/// Carrier `{0..labels} x base` with `rho0((i,s),(j,t)) = d0(s,t)`; atom
/// `(i, s)` has index `i * base.len() + s`.
pub fn lift_carrier(labels: usize, base: &DistanceMatrix) -> DistanceMatrix {
    let k = base.len();
    let rows: Vec<Vec<f64>> = (0..labels * k)
        .map(|x| (0..labels * k).map(|y| base.get(x % k, y % k)).collect())
        .collect();
    DistanceMatrix::new(&rows).expect("lifting preserves the pseudo-metric axioms")
}

/// Lifted marked process `sum_i I_i delta_{(i, U_i)}` with indicator table
/// `table` (as in [`indicator_table_dist`]) and i.i.d. marks `U_i ~ marks` on
/// the atoms of `base`, independent of the indicators.
pub fn lifted_marked_dist(table: &[f64], marks: &[f64], base: &DistanceMatrix) -> Result<ConfigDistribution> {
    let k = base.len();
    if marks.len() != k {
        return Err(Error::Config("mark law must have one entry per base atom".into()));
    }
    let n = table.len().trailing_zeros() as usize;
    if table.len() != 1usize << n {
        return Err(Error::Config("indicator table length must be a power of two".into()));
    }
    if n > MAX_ENUMERATED_ATOMS {
        return Err(Error::Resource(format!("2^{n} configurations exceed the enumeration limit")));
    }
    let carrier = lift_carrier(n, base);
    let mut entries = Vec::new();
    for (mask, &p) in table.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let active: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
        let mut partial: Vec<(Vec<u32>, f64)> = vec![(vec![0; n * k], p)];
        for &i in &active {
            let mut next = Vec::new();
            for (c, q) in &partial {
                for (s, &m) in marks.iter().enumerate() {
                    if m > 0.0 {
                        let mut c2 = c.clone();
                        c2[i * k + s] += 1;
                        next.push((c2, q * m));
                    }
                }
            }
            partial = next;
        }
        entries.extend(partial.into_iter().map(|(c, q)| (CountConfiguration::new(c), q)));
    }
    ConfigDistribution::new(carrier, entries, 0.0)
}

/// Projection of a lifted law onto its base carrier.
pub fn project_lifted(d: &ConfigDistribution, base: &DistanceMatrix) -> Result<ConfigDistribution> {
    let k = base.len();
    if k == 0 || !d.atoms().is_multiple_of(k) {
        return Err(Error::Config("lifted carrier size is not a multiple of the base size".into()));
    }
    let mut probs = BTreeMap::new();
    for (c, p) in d.iter() {
        let mut b = vec![0u32; k];
        for (x, &n) in c.counts().iter().enumerate() {
            b[x % k] += n;
        }
        *probs.entry(CountConfiguration::new(b)).or_insert(0.0) += p;
    }
    Ok(ConfigDistribution { carrier: base.clone(), probs, truncated_mass: d.truncated_mass() })
}

fn check_slot_pmf(name: &str, pmf: &[f64]) -> Result<()> {
    if pmf.iter().any(|&x| !(x >= 0.0)) {
        return domain(format!("{name} has a negative entry"));
    }
    let s: f64 = pmf.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        return domain(format!("{name} sums to {s}, not 1"));
    }
    Ok(())
}

/// Exact law of the arrival slots of a discrete renewal process on slots
/// `1..=horizon` (atoms `0..horizon`). `g[k-1]` and `f[k-1]` are the
/// probabilities that the first arrival, respectively a gap, equals `k`.
/// Slot `t` is atom `t - 1` of `carrier`.
pub fn discrete_renewal_dist(g: &[f64], f: &[f64], horizon: usize, carrier: DistanceMatrix) -> Result<ConfigDistribution> {
    if horizon > MAX_ENUMERATED_ATOMS {
        return Err(Error::Resource(format!("2^{horizon} slot subsets exceed the enumeration limit")));
    }
    if carrier.len() != horizon {
        return Err(Error::Config(format!("carrier has {} atoms, expected {horizon} slots", carrier.len())));
    }
    check_slot_pmf("first-arrival pmf", g)?;
    check_slot_pmf("gap pmf", f)?;
    let at = |v: &[f64], k: usize| if k >= 1 && k <= v.len() { v[k - 1] } else { 0.0 };
    let mut probs: BTreeMap<CountConfiguration, f64> = BTreeMap::new();
    let mut add = |mask: u32, p: f64| {
        if p > 0.0 {
            let c = CountConfiguration::new((0..horizon).map(|t| mask >> t & 1).collect());
            *probs.entry(c).or_insert(0.0) += p;
        }
    };
    // depth-first over arrival slots; `mask` bit t-1 marks an arrival at slot t
    // mass of a pmf strictly beyond `k`, summed directly
    let beyond = |v: &[f64], k: usize| v.iter().skip(k).sum::<f64>();
    let mut stack: Vec<(usize, u32, f64)> = Vec::new();
    for s in 1..=horizon {
        let p = at(g, s);
        if p > 0.0 {
            stack.push((s, 1 << (s - 1), p));
        }
    }
    add(0, beyond(g, horizon));
    while let Some((s, mask, p)) = stack.pop() {
        for k in 1..=horizon - s {
            let q = at(f, k);
            if q > 0.0 {
                stack.push((s + k, mask | 1 << (s + k - 1), p * q));
            }
        }
        add(mask, p * beyond(f, horizon - s));
    }
    ConfigDistribution::new(carrier, probs, 0.0)
}

/// Law of `Xi_1 + Xi_2` for independent processes on the same carrier.
pub fn independent_sum(d1: &ConfigDistribution, d2: &ConfigDistribution) -> Result<ConfigDistribution> {
    if d1.carrier() != d2.carrier() {
        return Err(Error::Config("independent sum needs a common carrier".into()));
    }
    let mut probs = BTreeMap::new();
    for (a, p) in d1.iter() {
        for (b, q) in d2.iter() {
            *probs.entry(a.add(b)).or_insert(0.0) += p * q;
        }
    }
    let t = 1.0 - (1.0 - d1.truncated_mass()) * (1.0 - d2.truncated_mass());
    Ok(ConfigDistribution { carrier: d1.carrier().clone(), probs, truncated_mass: t })
}
