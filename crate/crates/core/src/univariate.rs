//! Chen's method on the nonnegative integers.
//!
//! Exact Poisson and Poisson-binomial laws, total variation, the Stein
//! equation `lambda f(w+1) - w f(w) = 1_A(w) - Po(lambda)(A)` with its
//! recursive solution, and the Monte Carlo representation of the same
//! solution through the immigration-death chain.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::imdeath::{next_step, Step, EVENT_STREAM};
use crate::rng::{replicate, rng_for, SimRng};
use crate::stats::Estimate;

/// Independent success probabilities `p_1..p_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BernoulliVector {
    p: Vec<f64>,
}

impl BernoulliVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if let Some(bad) = p.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return domain(format!("success probability {bad} outside [0,1]"));
        }
        Ok(BernoulliVector { p })
    }

    pub fn probs(&self) -> &[f64] {
        &self.p
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// `lambda = sum p_i`.
    pub fn lambda(&self) -> f64 {
        self.p.iter().sum()
    }

    pub fn sum_sq(&self) -> f64 {
        self.p.iter().map(|x| x * x).sum()
    }

    pub fn max(&self) -> f64 {
        self.p.iter().copied().fold(0.0, f64::max)
    }

    /// The vector with entry `i` removed.
    pub fn without(&self, i: usize) -> BernoulliVector {
        let mut p = self.p.clone();
        p.remove(i);
        BernoulliVector { p }
    }
}

/// Probabilities on `{0..N}` plus the mass beyond `N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PmfTable {
    probs: Vec<f64>,
    tail: f64,
}

impl PmfTable {
    pub fn new(probs: Vec<f64>, tail: f64) -> Result<Self> {
        if probs.is_empty() {
            return domain("pmf table needs at least one entry");
        }
        if probs.iter().any(|&x| !(x >= 0.0)) || !(tail >= 0.0) {
            return domain("pmf entries and tail must be nonnegative");
        }
        let total: f64 = probs.iter().sum::<f64>() + tail;
        if (total - 1.0).abs() > 1e-12 {
            return domain(format!("pmf table sums to {total}"));
        }
        Ok(PmfTable { probs, tail })
    }

    pub fn point_mass(w: usize) -> Self {
        let mut probs = vec![0.0; w + 1];
        probs[w] = 1.0;
        PmfTable { probs, tail: 0.0 }
    }

    pub fn cutoff(&self) -> usize {
        self.probs.len() - 1
    }

    /// `P(w)`, zero beyond the cutoff.
    pub fn get(&self, w: usize) -> f64 {
        self.probs.get(w).copied().unwrap_or(0.0)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(w, p)| w as f64 * p).sum()
    }
}

/// Truncation point `ceil(lambda + 12 sqrt(lambda) + 30)` used when no cutoff is given.
pub fn default_cutoff(lambda: f64) -> usize {
    (lambda + 12.0 * lambda.sqrt() + 30.0).ceil() as usize
}

/// `Po(lambda)` on `{0..N}`, with the upper tail computed by direct summation
/// when it is small so that tiny tails are not lost to cancellation.
pub fn poisson_pmf(lambda: f64, cutoff: usize) -> Result<PmfTable> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return domain(format!("Poisson mean {lambda} must be finite and nonnegative"));
    }
    if lambda == 0.0 {
        return Ok(PmfTable::point_mass(0).padded(cutoff));
    }
    let ln_l = lambda.ln();
    let mut ln_fact = 0.0;
    let mut probs = Vec::with_capacity(cutoff + 1);
    for w in 0..=cutoff {
        if w > 0 {
            ln_fact += (w as f64).ln();
        }
        probs.push((-lambda + w as f64 * ln_l - ln_fact).exp());
    }
    let head: f64 = probs.iter().sum();
    let tail = if head < 0.5 {
        (1.0 - head).max(0.0)
    } else {
        let mut term = probs[cutoff];
        let mut acc = 0.0;
        let mut k = cutoff;
        loop {
            k += 1;
            term *= lambda / k as f64;
            acc += term;
            if term <= acc * 1e-17 || term == 0.0 {
                break;
            }
        }
        acc
    };
    Ok(PmfTable { probs, tail })
}

impl PmfTable {
    fn padded(mut self, cutoff: usize) -> Self {
        if self.probs.len() <= cutoff {
            self.probs.resize(cutoff + 1, 0.0);
        }
        self
    }
}

/// Exact law of `W = sum X_i` by sequential convolution.
pub fn poisson_binomial_pmf(p: &BernoulliVector) -> PmfTable {
    let mut pmf = vec![1.0];
    for &pi in p.probs() {
        let mut next = vec![0.0; pmf.len() + 1];
        for (k, &q) in pmf.iter().enumerate() {
            next[k] += q * (1.0 - pi);
            next[k + 1] += q * pi;
        }
        pmf = next;
    }
    PmfTable { probs: pmf, tail: 0.0 }
}

/// `1/2 sum_w |P(w) - Q(w)|`, with each table's tail counted as one extra symbol.
pub fn total_variation(p: &PmfTable, q: &PmfTable) -> f64 {
    let len = p.probs.len().max(q.probs.len());
    let body: f64 = (0..len).map(|w| (p.get(w) - q.get(w)).abs()).sum();
    (0.5 * (body + (p.tail - q.tail).abs())).min(1.0)
}

/// A subset `A` of the nonnegative integers: explicit membership on
/// `0..members.len()`, and `cofinal` decides every larger integer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSet {
    members: Vec<bool>,
    cofinal: bool,
}

impl TargetSet {
    pub fn empty() -> Self {
        TargetSet { members: Vec::new(), cofinal: false }
    }

    /// All of `Z_+`.
    pub fn everything() -> Self {
        TargetSet { members: Vec::new(), cofinal: true }
    }

    pub fn from_mask(members: Vec<bool>) -> Self {
        TargetSet { members, cofinal: false }
    }

    pub fn from_elements(elements: &[usize]) -> Self {
        let top = elements.iter().copied().max().map_or(0, |m| m + 1);
        let mut members = vec![false; top];
        for &e in elements {
            members[e] = true;
        }
        TargetSet { members, cofinal: false }
    }

    /// Complement of a finite set: `members` on the listed range, everything above.
    pub fn cofinal(members: Vec<bool>) -> Self {
        TargetSet { members, cofinal: true }
    }

    pub fn is_cofinal(&self) -> bool {
        self.cofinal
    }

    pub fn contains(&self, w: usize) -> bool {
        self.members.get(w).copied().unwrap_or(self.cofinal)
    }

    /// Length of the explicitly listed range.
    pub fn listed(&self) -> usize {
        self.members.len()
    }

    /// `Po(lambda)(A)`, including the tail mass when `A` is cofinal.
    pub fn poisson_measure(&self, lambda: f64) -> Result<f64> {
        let top = self.members.len().max(1) - 1;
        let table = poisson_pmf(lambda, top)?;
        let head: f64 = (0..self.members.len()).filter(|&w| self.members[w]).map(|w| table.get(w)).sum();
        let beyond = if self.cofinal {
            if self.members.is_empty() {
                1.0
            } else {
                table.tail_mass()
            }
        } else {
            0.0
        };
        Ok(head + beyond)
    }
}

/// Values `f(0..=N+1)` of the Stein solution for `1_A`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteinSolutionTable {
    pub target: TargetSet,
    pub lambda: f64,
    /// `Po(lambda)(A)`.
    pub po_target: f64,
    values: Vec<f64>,
}

impl SteinSolutionTable {
    pub fn cutoff(&self) -> usize {
        self.values.len() - 2
    }

    pub fn value(&self, w: usize) -> f64 {
        self.values[w]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `Delta f(w) = f(w+1) - f(w)` for `w <= N`.
    pub fn delta(&self, w: usize) -> f64 {
        self.values[w + 1] - self.values[w]
    }

    /// `lambda f(w+1) - w f(w) - (1_A(w) - Po(lambda)(A))`.
    pub fn residual(&self, w: usize) -> f64 {
        let lhs = self.lambda * self.values[w + 1] - w as f64 * self.values[w];
        let rhs = f64::from(u8::from(self.target.contains(w))) - self.po_target;
        lhs - rhs
    }

    pub fn max_residual(&self) -> f64 {
        (0..=self.cutoff()).map(|w| self.residual(w).abs()).fold(0.0, f64::max)
    }
}

/// Solves the Stein equation forward from `f(0) = 0` on `{0..N}`.
///
/// `f(0)` never enters an expectation (it is multiplied by `w = 0`), so the
/// convention is immaterial. `A` may list elements up to `N`; larger elements
/// are only expressible through the cofinal flag.
pub fn stein_solution_recursive(target: &TargetSet, lambda: f64, cutoff: usize) -> Result<SteinSolutionTable> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return domain(format!("Stein equation needs lambda > 0, got {lambda}"));
    }
    if target.listed() > cutoff + 1 {
        return domain(format!("target lists elements up to {} beyond cutoff {cutoff}", target.listed() - 1));
    }
    let po_target = target.poisson_measure(lambda)?;
    let mut values = vec![0.0; cutoff + 2];
    for w in 0..=cutoff {
        let ind = f64::from(u8::from(target.contains(w)));
        values[w + 1] = (ind - po_target + w as f64 * values[w]) / lambda;
    }
    Ok(SteinSolutionTable { target: target.clone(), lambda, po_target, values })
}

/// `(1 - e^{-lambda}) / lambda`.
pub fn delta_bound(lambda: f64) -> f64 {
    -(-lambda).exp_m1() / lambda
}

/// Outcome of the exhaustive check of `|Delta f_A(w)| <= (1 - e^{-lambda})/lambda`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaBoundReport {
    pub lambda: f64,
    pub cutoff: usize,
    pub subsets: usize,
    pub bound: f64,
    pub max_abs_delta: f64,
    /// `max |Delta f| / bound`.
    pub max_ratio: f64,
    pub violations: usize,
    pub max_residual: f64,
}

impl DeltaBoundReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Solves the Stein equation for every `A ⊆ {0..N}` and checks the bound on
/// `Delta f_A(w)` for `w = 1..N` (with slack `1e-10`).
pub fn check_delta_bound(lambda: f64, cutoff: usize) -> Result<DeltaBoundReport> {
    if cutoff > 16 {
        return Err(crate::Error::Resource(format!("2^{} subsets is too many", cutoff + 1)));
    }
    let bound = delta_bound(lambda);
    let mut report = DeltaBoundReport {
        lambda,
        cutoff,
        subsets: 0,
        bound,
        max_abs_delta: 0.0,
        max_ratio: 0.0,
        violations: 0,
        max_residual: 0.0,
    };
    for mask in 0u64..(1u64 << (cutoff + 1)) {
        let target = TargetSet::from_mask((0..=cutoff).map(|i| mask >> i & 1 == 1).collect());
        let sol = stein_solution_recursive(&target, lambda, cutoff)?;
        report.subsets += 1;
        report.max_residual = report.max_residual.max(sol.max_residual());
        for w in 1..=cutoff {
            let d = sol.delta(w).abs();
            report.max_abs_delta = report.max_abs_delta.max(d);
            if d > bound + 1e-10 {
                report.violations += 1;
            }
        }
    }
    report.max_ratio = report.max_abs_delta / bound;
    Ok(report)
}

/// `sum_w P(w) [lambda f(w+1) - w f(w)]` over the support of `P`.
pub fn chen_identity_residual(p: &PmfTable, lambda: f64, f: &SteinSolutionTable) -> Result<f64> {
    if p.cutoff() > f.cutoff() {
        return domain(format!("pmf cutoff {} exceeds solution cutoff {}", p.cutoff(), f.cutoff()));
    }
    Ok(p.probs
        .iter()
        .enumerate()
        .map(|(w, &pw)| pw * (lambda * f.value(w + 1) - w as f64 * f.value(w)))
        .sum())
}

/// `(1 ∧ 1/lambda) sum p_i^2`; zero for an empty or all-zero vector.
pub fn dtv_bound_independent(p: &BernoulliVector) -> f64 {
    let lambda = p.lambda();
    if lambda == 0.0 {
        return 0.0;
    }
    (1.0f64).min(1.0 / lambda) * p.sum_sq()
}

/// `E[1 / (sum_{j != i} X_j + 1)] = ∫_0^1 prod_{j != i} (z p_j + 1 - p_j) dz`,
/// integrated exactly term by term. The polynomial's coefficients are the
/// Poisson-binomial probabilities of the other indicators, all nonnegative,
/// so the expansion is numerically benign.
pub fn expected_reciprocal_count(p: &BernoulliVector, i: usize) -> Result<f64> {
    if i >= p.len() {
        return domain(format!("index {i} out of range for {} indicators", p.len()));
    }
    let coeffs = poisson_binomial_pmf(&p.without(i));
    Ok(coeffs.probs.iter().enumerate().map(|(k, c)| c / (k as f64 + 1.0)).sum())
}

/// One jump of the counting chain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountEvent {
    pub time: f64,
    pub birth: bool,
}

/// Path of the immigration-death count with birth rate `lambda` and unit per-capita death rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountTrajectory {
    pub initial: usize,
    pub events: Vec<CountEvent>,
    pub horizon: f64,
}

impl CountTrajectory {
    pub fn state_at(&self, t: f64) -> usize {
        let mut z = self.initial;
        for e in self.events.iter().take_while(|e| e.time <= t) {
            if e.birth {
                z += 1;
            } else {
                z -= 1;
            }
        }
        z
    }

    pub fn final_count(&self) -> usize {
        self.state_at(self.horizon)
    }
}

/// Event-driven simulation on `[0, T]`. Draws come from the event stream of
/// `seed`, the same stream the spatial simulator uses for its jump times, so
/// both produce identical count paths for the same seed.
pub fn simulate_count_imdeath(w0: usize, lambda: f64, horizon: f64, seed: u64) -> Result<CountTrajectory> {
    if !(lambda >= 0.0) || !(horizon >= 0.0) {
        return domain("need lambda >= 0 and T >= 0");
    }
    let mut rng = rng_for(seed, EVENT_STREAM, 0);
    Ok(count_path(w0, lambda, horizon, &mut rng))
}

pub(crate) fn count_path(w0: usize, lambda: f64, horizon: f64, rng: &mut SimRng) -> CountTrajectory {
    let mut events = Vec::new();
    let mut t = 0.0;
    let mut z = w0;
    while let Some((dt, step)) = next_step(rng, lambda, z) {
        t += dt;
        if t > horizon {
            break;
        }
        match step {
            Step::Birth => {
                z += 1;
                events.push(CountEvent { time: t, birth: true });
            }
            Step::Death(_) => {
                z -= 1;
                events.push(CountEvent { time: t, birth: false });
            }
        }
    }
    CountTrajectory { initial: w0, events, horizon }
}

/// Monte Carlo estimate with its deterministic truncation error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub se: f64,
    /// Bound on the bias from cutting the time integral at `T*`.
    pub truncation_bound: f64,
    pub reps: usize,
}

impl From<(Estimate, f64)> for McEstimate {
    fn from((e, truncation_bound): (Estimate, f64)) -> Self {
        McEstimate { estimate: e.mean, se: e.se, truncation_bound, reps: e.n }
    }
}

const PROBABILISTIC_STREAM: u64 = 0x5052_4f42;

/// Estimates `f_A(w) = g_A(w) - g_A(w-1)` for `w >= 1` from coupled chains.
///
/// The chain from `w` is the chain from `w - 1` plus one extra individual
/// with its own `Exp(1)` lifetime `tau`; all births and the other deaths are
/// shared. The integrand `1_A(Z_w(t)) - 1_A(Z_{w-1}(t))` vanishes after
/// `tau`, and is integrated exactly between jumps on `[0, min(tau, T*)]`,
/// so the only bias is at most `e^{-T*}`.
pub fn stein_solution_probabilistic(
    target: &TargetSet,
    lambda: f64,
    w: usize,
    reps: usize,
    t_star: f64,
    seed: u64,
) -> Result<McEstimate> {
    if w == 0 {
        return domain("f(0) is a convention; the probabilistic solution starts at w = 1");
    }
    if !(lambda > 0.0) || !(t_star > 0.0) || reps == 0 {
        return domain("need lambda > 0, T* > 0 and reps >= 1");
    }
    let samples = replicate(reps, seed, PROBABILISTIC_STREAM, |rng| {
        let tau: f64 = rng.sample(Exp1);
        let end = tau.min(t_star);
        let mut t = 0.0;
        let mut z = w - 1;
        let mut integral = 0.0;
        let diff = |z: usize| f64::from(u8::from(target.contains(z + 1))) - f64::from(u8::from(target.contains(z)));
        loop {
            let step = next_step(rng, lambda, z);
            let next_t = step.as_ref().map_or(f64::INFINITY, |(dt, _)| t + dt);
            let seg_end = next_t.min(end);
            integral += diff(z) * (seg_end - t);
            if next_t >= end {
                break;
            }
            t = next_t;
            match step {
                Some((_, Step::Birth)) => z += 1,
                Some((_, Step::Death(_))) => z -= 1,
                None => unreachable!(),
            }
        }
        -integral
    });
    Ok((Estimate::from_samples(&samples), (-t_star).exp()).into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use stein_oracle as oracle;

    #[test]
    fn poisson_examples() {
        let t = poisson_pmf(0.0, 5).unwrap();
        assert_eq!(t.get(0), 1.0);
        assert_eq!(t.tail_mass(), 0.0);
        let t = poisson_pmf(1.0, 0).unwrap();
        assert!((t.get(0) - (-1.0f64).exp()).abs() < 1e-16);
        assert!((t.tail_mass() - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        let t = poisson_pmf(0.5, 20).unwrap();
        assert!(t.tail_mass() < 1e-15);
        assert!(poisson_pmf(-1.0, 3).is_err());
    }

    #[test]
    fn poisson_against_textbook_formula() {
        for &lambda in &[0.3, 1.0, 4.5, 20.0, 150.0] {
            let n = default_cutoff(lambda);
            let t = poisson_pmf(lambda, n).unwrap();
            for w in 0..=n {
                let want = oracle::poisson_point(lambda, w);
                assert!((t.get(w) - want).abs() <= 1e-13 * want.max(1e-300) + 1e-300, "lambda {lambda} w {w}");
            }
            let total: f64 = t.probs().iter().sum::<f64>() + t.tail_mass();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn poisson_binomial_examples() {
        let t = poisson_binomial_pmf(&BernoulliVector::new(vec![]).unwrap());
        assert_eq!(t.probs(), &[1.0]);
        let t = poisson_binomial_pmf(&BernoulliVector::new(vec![0.5, 0.5]).unwrap());
        assert_eq!(t.probs(), &[0.25, 0.5, 0.25]);
        let t = poisson_binomial_pmf(&BernoulliVector::new(vec![0.1, 0.2]).unwrap());
        for (a, b) in t.probs().iter().zip([0.72, 0.26, 0.02]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(BernoulliVector::new(vec![1.2]).is_err());
    }

    #[test]
    fn tv_examples() {
        let a = poisson_pmf(2.0, 30).unwrap();
        assert_eq!(total_variation(&a, &a), 0.0);
        let p = PmfTable::point_mass(0);
        let q = PmfTable::point_mass(3);
        assert_eq!(total_variation(&p, &q), 1.0);
        let b = poisson_binomial_pmf(&BernoulliVector::new(vec![0.5]).unwrap());
        let po = poisson_pmf(0.5, 1).unwrap();
        let e = (-0.5f64).exp();
        let want = 0.5 * ((0.5 - e).abs() + (0.5 - 0.5 * e).abs() + (1.0 - 1.5 * e));
        assert!((total_variation(&b, &po) - want).abs() < 1e-15);
        assert!((want - 0.19673).abs() < 1e-5);
        // same value whatever the Poisson cutoff
        let po = poisson_pmf(0.5, 25).unwrap();
        assert!((total_variation(&b, &po) - want).abs() < 1e-15);
    }

    #[test]
    fn tv_equals_sup_over_sets() {
        let p = poisson_binomial_pmf(&BernoulliVector::new(vec![0.3, 0.1, 0.6, 0.2]).unwrap());
        let q = poisson_pmf(1.2, 60).unwrap();
        let sup = oracle::tv_sup_over_sets(p.probs(), q.probs()) + (p.tail_mass() - q.tail_mass()).max(0.0);
        assert!((total_variation(&p, &q) - sup).abs() < 1e-14);
    }

    #[test]
    fn stein_trivial_targets() {
        let f = stein_solution_recursive(&TargetSet::empty(), 1.3, 10).unwrap();
        assert!(f.values().iter().all(|&v| v == 0.0));
        let f = stein_solution_recursive(&TargetSet::everything(), 1.3, 10).unwrap();
        assert!(f.values().iter().all(|&v| v.abs() < 1e-15));
        let f = stein_solution_recursive(&TargetSet::cofinal(vec![true; 11]), 0.7, 10).unwrap();
        assert!(f.values().iter().all(|&v| v.abs() < 1e-13));
        let f = stein_solution_recursive(&TargetSet::from_elements(&[0]), 1.0, 5).unwrap();
        assert!((f.value(1) - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!(stein_solution_recursive(&TargetSet::empty(), 0.0, 3).is_err());
        assert!(stein_solution_recursive(&TargetSet::from_elements(&[7]), 1.0, 3).is_err());
    }

    #[test]
    fn stein_matches_closed_form() {
        for &lambda in &[0.5, 1.0, 2.0, 5.0] {
            for a in [vec![0usize], vec![1, 3], vec![0, 2, 4, 6, 8], vec![5]] {
                let t = TargetSet::from_elements(&a);
                let f = stein_solution_recursive(&t, lambda, 10).unwrap();
                let mask: Vec<bool> = (0..t.listed()).map(|w| t.contains(w)).collect();
                for w in 1..=8 {
                    let want = oracle::stein_solution_closed_form(&mask, false, lambda, w);
                    assert!((f.value(w) - want).abs() < 1e-9, "lambda {lambda} A {a:?} w {w}");
                }
            }
        }
    }

    #[test]
    fn delta_bound_exhaustive() {
        let r = check_delta_bound(1.0, 10).unwrap();
        assert_eq!(r.subsets, 2048);
        assert!(r.passed());
        assert!(r.max_ratio <= 1.0 + 1e-10);
        let r = check_delta_bound(0.5, 8).unwrap();
        assert!(r.passed());
        assert!(r.max_residual < 1e-12);
    }

    #[test]
    fn chen_residual_examples() {
        let po = poisson_pmf(1.0, 40).unwrap();
        let f = stein_solution_recursive(&TargetSet::from_elements(&[0, 2, 3]), 1.0, 40).unwrap();
        assert!(chen_identity_residual(&po, 1.0, &f).unwrap().abs() < 1e-12);

        let f = stein_solution_recursive(&TargetSet::from_elements(&[0]), 1.0, 3).unwrap();
        let r = chen_identity_residual(&PmfTable::point_mass(0), 1.0, &f).unwrap();
        assert!((r - (1.0 - (-1.0f64).exp())).abs() < 1e-15);

        let p = BernoulliVector::new(vec![0.2, 0.4, 0.1, 0.3]).unwrap();
        let pb = poisson_binomial_pmf(&p);
        let lambda = p.lambda();
        let a = TargetSet::from_elements(&[1, 3]);
        let f = stein_solution_recursive(&a, lambda, p.len()).unwrap();
        let want = pb.get(1) + pb.get(3) - a.poisson_measure(lambda).unwrap();
        assert!((chen_identity_residual(&pb, lambda, &f).unwrap() - want).abs() < 1e-12);

        let big = poisson_pmf(1.0, 50).unwrap();
        assert!(chen_identity_residual(&big, 1.0, &f).is_err());
    }

    #[test]
    fn dtv_bound_examples() {
        assert_eq!(dtv_bound_independent(&BernoulliVector::new(vec![0.5, 0.5]).unwrap()), 0.5);
        let b = dtv_bound_independent(&BernoulliVector::new(vec![0.01; 100]).unwrap());
        assert!((b - 0.01).abs() < 1e-15);
        assert_eq!(dtv_bound_independent(&BernoulliVector::new(vec![0.0, 0.0]).unwrap()), 0.0);
        assert_eq!(dtv_bound_independent(&BernoulliVector::new(vec![]).unwrap()), 0.0);
    }

    #[test]
    fn reciprocal_count_examples() {
        let p = BernoulliVector::new(vec![0.0, 0.0, 0.0]).unwrap();
        assert_eq!(expected_reciprocal_count(&p, 1).unwrap(), 1.0);
        let p = BernoulliVector::new(vec![0.3, 0.6]).unwrap();
        assert!((expected_reciprocal_count(&p, 0).unwrap() - (1.0 - 0.6 / 2.0)).abs() < 1e-15);
        let p = BernoulliVector::new(vec![0.3, 0.6, 0.2, 0.9, 0.5]).unwrap();
        for i in 0..p.len() {
            let v = expected_reciprocal_count(&p, i).unwrap();
            assert!((v - oracle::reciprocal_count_enumerate(p.probs(), i)).abs() < 1e-14);
            assert!(v <= 1.0 / (p.lambda() - p.probs()[i]));
        }
        assert!(expected_reciprocal_count(&p, 5).is_err());
    }

    #[test]
    fn count_chain_trivial_and_ordered() {
        let t = simulate_count_imdeath(0, 0.0, 10.0, 1).unwrap();
        assert!(t.events.is_empty());
        assert_eq!(t.final_count(), 0);
        let t = simulate_count_imdeath(5, 2.0, 10.0, 3).unwrap();
        assert!(t.events.windows(2).all(|w| w[0].time < w[1].time));
        assert!(t.events.iter().all(|e| e.time <= 10.0));
    }

    #[test]
    fn count_chain_mean_follows_moment_ode() {
        let reps = 20_000;
        for &t in &[0.5, 2.0] {
            let finals: Vec<f64> = (0..reps)
                .map(|s| simulate_count_imdeath(5, 2.0, t, s as u64).unwrap().final_count() as f64)
                .collect();
            let e = Estimate::from_samples(&finals);
            let want = oracle::imdeath_mean(5.0, 2.0, t);
            assert!((e.mean - want).abs() < 4.0 * e.se, "t {t}: {} vs {want}", e.mean);
        }
    }

    #[test]
    fn probabilistic_solution_basics() {
        let e = stein_solution_probabilistic(&TargetSet::empty(), 1.0, 2, 100, 30.0, 1).unwrap();
        assert_eq!(e.estimate, 0.0);
        assert_eq!(e.se, 0.0);
        assert!(stein_solution_probabilistic(&TargetSet::empty(), 1.0, 0, 100, 30.0, 1).is_err());
        let e = stein_solution_probabilistic(&TargetSet::from_elements(&[0]), 1.0, 1, 40_000, 30.0, 9).unwrap();
        let want = 1.0 - (-1.0f64).exp();
        assert!((e.estimate - want).abs() <= 4.0 * e.se + e.truncation_bound);
    }
}
