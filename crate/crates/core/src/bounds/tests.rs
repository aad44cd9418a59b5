use proptest::prelude::*;
use rand::Rng;

use super::*;
use crate::models::{IndicatorLaw, MarkLaw};
use crate::palmexact::{
    bernoulli_process_dist, discrete_renewal_dist, exact_d2_poisson, indicator_table_dist, lifted_marked_dist,
    truncated_poisson_dist, DEFAULT_TRANSPORT_CAP,
};
use crate::rng::rng_for;
use crate::univariate::default_cutoff;

fn line(k: usize) -> DistanceMatrix {
    DistanceMatrix::from_line(&(0..k).map(|i| i as f64 / k.max(1) as f64).collect::<Vec<_>>())
}

fn own(n: usize) -> Vec<Vec<usize>> {
    (0..n).map(|i| vec![i]).collect()
}

fn random_p(seed: u64, n: usize) -> BernoulliVector {
    let mut rng = rng_for(seed, 7, 0);
    BernoulliVector::new((0..n).map(|_| rng.random::<f64>() * 0.6).collect()).unwrap()
}

fn random_table(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = rng_for(seed, 8, 0);
    let w: Vec<f64> = (0..1 << n).map(|_| rng.random::<f64>().powi(3)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

#[test]
fn bernoulli_crude_examples() {
    let b = bound_eq7(&BernoulliVector::new(vec![0.1, 0.1]).unwrap());
    assert!((b.crude.value.unwrap() - 1.2).abs() < 1e-12);
    let b = bound_eq7(&BernoulliVector::new(vec![0.01; 100]).unwrap());
    assert!((b.crude.value.unwrap() - 6.0 * 0.01 / 0.99).abs() < 1e-12);
    let b = bound_eq7(&BernoulliVector::new(vec![0.5]).unwrap());
    assert!(!b.crude.is_valid() && b.crude.invalid.is_some());
    assert!(b.sharp.is_valid());
    // one trial: E[1 / (0 + 1)] = 1, so sharp = p^2 (3.5/p + 2.5)
    assert!((b.sharp.value.unwrap() - 0.25 * (7.0 + 2.5)).abs() < 1e-15);
    assert!(!bound_eq7(&BernoulliVector::new(vec![0.0, 0.0]).unwrap()).sharp.is_valid());
}

proptest! {
    #[test]
    fn sharp_never_exceeds_crude(p in prop::collection::vec(0.0f64..1.0, 1..12)) {
        let b = bound_eq7(&BernoulliVector::new(p).unwrap());
        if let (Some(s), Some(c)) = (b.sharp.value, b.crude.value) {
            prop_assert!(s <= c + 1e-12);
        }
    }

    #[test]
    fn renewal_bound_increases_with_gap_cdf(
        g in prop::collection::vec(0.01f64..0.3, 3..6),
        f in prop::collection::vec(0.0f64..0.5, 3..6),
        k in 0usize..3,
        bump in 0.001f64..0.2,
    ) {
        let n = g.len().min(f.len());
        let (g, f) = (&g[..n], &f[..n]);
        let base = bound_corollary53(g, f);
        let mut f2 = f.to_vec();
        f2[k] = (f2[k] + bump).min(0.99);
        let up = bound_corollary53(g, &f2);
        if let (Some(a), Some(b)) = (base.value, up.value) {
            prop_assert!(b >= a - 1e-12);
        }
    }
}

#[test]
fn bernoulli_dominance_small_n() {
    for seed in 0..20 {
        let n = 1 + (seed as usize % 4);
        let p = random_p(seed, n);
        let d = bernoulli_process_dist(&p, line(n)).unwrap();
        let d2 = exact_d2_poisson(&d, p.probs(), DEFAULT_TRANSPORT_CAP).unwrap();
        let b = bound_eq7(&p);
        assert!(d2.truncation_width < 1e-8);
        assert!(d2.value <= b.sharp.value.unwrap() + d2.truncation_width);
        if let Some(c) = b.crude.value {
            assert!(b.sharp.value.unwrap() <= c);
        }
    }
}

#[test]
fn local_dependence_bound_reduces_to_sharp_form() {
    for seed in 0..10 {
        let n = 2 + seed as usize % 4;
        let p = random_p(100 + seed, n);
        let d = bernoulli_process_dist(&p, line(n)).unwrap();
        let r = bound_theorem41(&d, &own(n)).unwrap();
        assert_eq!(r.term("first").unwrap().value, 0.0);
        let sharp = bound_eq7(&p).sharp.value.unwrap();
        assert!((r.value.unwrap() - sharp).abs() < 1e-10);
    }
}

#[test]
fn local_dependence_bound_on_lifted_process() {
    let p = vec![0.3, 0.1, 0.45];
    let marks = vec![0.2, 0.5, 0.3];
    let base = DistanceMatrix::from_line(&[0.0, 0.4, 1.0]);
    let spec = MarkedBernoulliSpec::independent(p.clone(), MarkLaw::Atoms { weights: marks.clone() }).unwrap();
    let lifted = lifted_marked_dist(&spec.indicators.joint_table().unwrap(), &marks, &base).unwrap();
    let r = bound_theorem41(&lifted, &lift_neighborhoods(&own(3), 3)).unwrap();
    let sharp = bound_eq7(&BernoulliVector::new(p).unwrap()).sharp.value.unwrap();
    assert!((r.value.unwrap() - sharp).abs() < 1e-10);
}

#[test]
fn local_dependence_bound_on_poisson_is_positive() {
    let means = [0.4, 0.9];
    let caps = [default_cutoff(0.4), default_cutoff(0.9)];
    let d = truncated_poisson_dist(line(2), &means, &caps).unwrap();
    let r = bound_theorem41(&d, &own(2)).unwrap();
    let d2 = exact_d2_poisson(&d, &means, DEFAULT_TRANSPORT_CAP).unwrap();
    assert!(d2.value <= d2.truncation_width + 1e-12);
    assert!(r.value.unwrap() > 0.1);
    assert!(r.value.unwrap() >= d2.upper);
}

#[test]
fn local_dependence_bound_rejects_bad_neighbourhoods() {
    let d = indicator_table_dist(&[0.5, 0.0, 0.0, 0.5], line(2)).unwrap();
    let r = bound_theorem41(&d, &own(2)).unwrap();
    assert!(!r.is_valid() && r.invalid.as_deref().unwrap().contains("local dependence"));
    let full = vec![vec![0, 1], vec![0, 1]];
    assert!(bound_theorem41(&d, &full).unwrap().is_valid());
    assert!(bound_theorem41(&d, &[vec![0]]).is_err());
    let empty = crate::palmexact::ConfigDistribution::point_mass(line(2), CountConfiguration::zeros(2)).unwrap();
    assert!(!bound_theorem41(&empty, &own(2)).unwrap().is_valid());
}

#[test]
fn marked_bound_independent_matches_sharp_form() {
    let p = vec![0.2, 0.35, 0.05, 0.4];
    let spec = MarkedBernoulliSpec::independent(p.clone(), MarkLaw::Uniform { dim: 1 }).unwrap();
    let r = bound_corollary52(&spec, Mode::Exact, 0, 0).unwrap();
    assert_eq!(r.term("first").unwrap().value, 0.0);
    let sharp = bound_eq7(&BernoulliVector::new(p).unwrap()).sharp.value.unwrap();
    assert!((r.value.unwrap() - sharp).abs() < 1e-12);
}

#[test]
fn marked_bound_correlated_pair_by_hand() {
    // I_1 = I_2 ~ Bernoulli(q), A = both, so V_i = 0 and lambda = 2q:
    // first = 2q (3.5/(2q) + 2.5) = 3.5 + 5q, second = 4q^2 (3.5/(2q) + 2.5) = 7q + 10q^2
    let q = 0.3;
    let spec = MarkedBernoulliSpec::new(
        IndicatorLaw::Table { table: vec![1.0 - q, 0.0, 0.0, q] },
        vec![vec![0, 1], vec![0, 1]],
        MarkLaw::Uniform { dim: 1 },
    )
    .unwrap();
    let r = bound_corollary52(&spec, Mode::Exact, 0, 0).unwrap();
    assert!((r.term("first").unwrap().value - (3.5 + 5.0 * q)).abs() < 1e-12);
    assert!((r.term("second").unwrap().value - (7.0 * q + 10.0 * q * q)).abs() < 1e-12);
}

#[test]
fn marked_bound_null_conditioning_warns() {
    let spec = MarkedBernoulliSpec::new(
        IndicatorLaw::Independent { p: vec![0.5, 0.0] },
        vec![vec![0, 1], vec![1]],
        MarkLaw::Uniform { dim: 1 },
    )
    .unwrap();
    let r = bound_corollary52(&spec, Mode::Exact, 0, 0).unwrap();
    assert_eq!(r.warnings.len(), 1);
    // (0,0) gives p_0^2 (3.5/λ + 2.5); (0,1) contributes nothing
    assert!((r.value.unwrap() - 0.25 * (7.0 + 2.5)).abs() < 1e-12);
}

#[test]
fn marked_bound_equals_local_dependence_bound_on_lift() {
    let spec = MarkedBernoulliSpec::runs(5, 1, 0.5, MarkLaw::Atoms { weights: vec![0.6, 0.4] }).unwrap();
    let table = spec.indicators.joint_table().unwrap();
    let base = DistanceMatrix::from_line(&[0.0, 1.0]);
    let lifted = lifted_marked_dist(&table, &[0.6, 0.4], &base).unwrap();
    let a = bound_theorem41(&lifted, &lift_neighborhoods(&spec.neighborhoods, 2)).unwrap();
    let b = bound_corollary52(&spec, Mode::Exact, 0, 0).unwrap();
    assert!((a.value.unwrap() - b.value.unwrap()).abs() < 1e-10);
}

#[test]
fn marked_bound_monte_carlo_agrees_with_table() {
    let spec = MarkedBernoulliSpec::runs(6, 1, 0.4, MarkLaw::Uniform { dim: 1 }).unwrap();
    let exact = bound_corollary52(&spec, Mode::Exact, 0, 0).unwrap();
    let mc = bound_corollary52(&spec, Mode::MonteCarlo, 40_000, 9).unwrap();
    assert!((mc.value.unwrap() - exact.value.unwrap()).abs() < 3.0 * mc.se.unwrap());
    let again = bound_corollary52(&spec, Mode::MonteCarlo, 40_000, 9).unwrap();
    assert_eq!(mc.value.unwrap().to_bits(), again.value.unwrap().to_bits());
}

#[test]
fn correlated_tables_are_dominated() {
    for seed in 0..12 {
        let n = 2 + seed as usize % 3;
        let table = random_table(seed, n);
        let all: Vec<Vec<usize>> = (0..n).map(|_| (0..n).collect()).collect();
        let spec = MarkedBernoulliSpec::new(IndicatorLaw::Table { table: table.clone() }, all, MarkLaw::Uniform { dim: 1 }).unwrap();
        let d = indicator_table_dist(&table, line(n)).unwrap();
        let lam = intensity(&d);
        let d2 = exact_d2_poisson(&d, &lam, DEFAULT_TRANSPORT_CAP).unwrap();
        let b = bound_corollary52(&spec, Mode::Exact, 0, 0).unwrap();
        assert!(d2.value <= b.value.unwrap() + d2.truncation_width);
    }
}

fn renewal_law(g: &[f64], f: &[f64], horizon: usize) -> ConfigDistribution {
    discrete_renewal_dist(g, f, horizon, line(horizon)).unwrap()
}

#[test]
fn superposition_bound_independent_components() {
    let a = renewal_law(&[0.1, 0.1, 0.8], &[0.3, 0.7], 5);
    let b = renewal_law(&[0.05, 0.15, 0.1, 0.7], &[0.2, 0.2, 0.6], 5);
    let law = ComponentLaw::independent(&[a.clone(), b.clone()], 1 << 20).unwrap();
    let r = bound_theorem51(&law, &own(2), DEFAULT_TRANSPORT_CAP).unwrap();
    assert_eq!(r.term("first").unwrap().value, 0.0);
    assert!(r.term("second").unwrap().value > 0.0);
    let sup = law.superposition().unwrap();
    let d2 = exact_d2_poisson(&sup, &intensity(&sup), DEFAULT_TRANSPORT_CAP).unwrap();
    assert!(d2.value <= r.value.unwrap());
    let both = vec![vec![0, 1], vec![0, 1]];
    let r2 = bound_theorem51(&law, &both, DEFAULT_TRANSPORT_CAP).unwrap();
    assert!(r2.value.unwrap() >= d2.value);
}

#[test]
fn superposition_bound_single_poisson_component() {
    let means = [0.3, 0.5];
    let caps = [25, 25];
    let d = truncated_poisson_dist(line(2), &means, &caps).unwrap();
    let law = ComponentLaw::independent(&[d], 1 << 20).unwrap();
    let r = bound_theorem51(&law, &own(1), DEFAULT_TRANSPORT_CAP).unwrap();
    assert!(r.value.unwrap() < 1e-12, "{}", r.value.unwrap());
}

#[test]
fn superposition_bound_dependent_components() {
    // two copies of one Bernoulli indicator at atom 0, perfectly correlated
    let k = 2;
    let z = CountConfiguration::zeros(k);
    let one = CountConfiguration::new(vec![1, 0]);
    let law = ComponentLaw::new(line(k), vec![(vec![z.clone(), z.clone()], 0.6), (vec![one.clone(), one.clone()], 0.4)], 0.0).unwrap();
    let r = bound_theorem51(&law, &[vec![0, 1], vec![0, 1]], DEFAULT_TRANSPORT_CAP).unwrap();
    // V_1 = Xi_2: under Palm at atom 0 it is {atom 0} surely, so d'_1(V, V_α) is 1 when V = 0
    let lambda = 0.8;
    let w0 = 3.5 / lambda + 2.5;
    let first_one = 0.4 * w0 * 0.6;
    assert!((r.term("first").unwrap().value - 2.0 * first_one).abs() < 1e-12);
    let sup = law.superposition().unwrap();
    let d2 = exact_d2_poisson(&sup, &intensity(&sup), DEFAULT_TRANSPORT_CAP).unwrap();
    assert!(d2.value <= r.value.unwrap());
    assert!(bound_theorem51(&law, &[vec![1], vec![1]], DEFAULT_TRANSPORT_CAP).is_err());
}

struct FixedCoupling;

impl ComponentCoupling for FixedCoupling {
    fn components(&self) -> usize {
        2
    }

    fn component_mass(&self, _: usize) -> f64 {
        0.5
    }

    fn draw(&self, _: usize, _: &mut SimRng) -> CoupledDraw {
        CoupledDraw { outside: 1, v_distance: 0.5, palm_distance: 0.25 }
    }
}

#[test]
fn superposition_monte_carlo_needs_coupling() {
    assert!(matches!(bound_theorem51_mc(None, 10, 1), Err(Error::Config(_))));
    let r = bound_theorem51_mc(Some(&FixedCoupling), 10, 1).unwrap();
    let w = 3.5 + 1.25;
    assert!((r.term("first").unwrap().value - 2.0 * 0.5 * w * 0.5).abs() < 1e-12);
    assert!((r.term("second").unwrap().value - 2.0 * (3.5 + 1.25) * 0.5 * 0.25).abs() < 1e-12);
    assert_eq!(r.se, Some(0.0));
}

#[test]
fn renewal_closed_form_examples() {
    let r = bound_corollary53(&[0.1, 0.1], &[0.1, 0.1]);
    let num = 6.0 * 2.0 * (0.3 * 0.1) / 0.81;
    let den = 0.2 - 0.1 / 0.9;
    assert!((r.value.unwrap() - num / den).abs() < 1e-12);
    assert!((r.value.unwrap() - 5.0).abs() < 1e-9);
    assert!(!bound_corollary53(&[0.3], &[0.2]).is_valid());
    assert!(!bound_corollary53(&[0.3, 0.2], &[1.0, 0.1]).is_valid());
    assert!(!bound_corollary53(&[0.3], &[0.2, 0.1]).is_valid());
    let r = bound_corollary53(&[0.02; 50], &[0.02; 50]);
    let want = 6.0 * 50.0 * (0.06 * 0.02) / 0.9604 / (1.0 - 0.02 / 0.98);
    assert!((r.value.unwrap() - want).abs() < 1e-12);
    assert!((r.value.unwrap() - 0.383).abs() < 5e-4);
}

#[test]
fn renewal_bound_monotone_along_equal_g() {
    let f = [0.05, 0.1, 0.2];
    let mut last = 0.0;
    for k in 1..=20 {
        let g = 0.01 * k as f64;
        let r = bound_corollary53(&[g; 3], &f);
        if let Some(v) = r.value {
            assert!(v >= last - 1e-12);
            last = v;
        }
    }
    // coordinatewise increase in one G_i can lower the bound
    let a = bound_corollary53(&[0.05, 0.1], &[0.01, 0.01]).value.unwrap();
    let b = bound_corollary53(&[0.1, 0.1], &[0.01, 0.01]).value.unwrap();
    assert!(b < a);
}

#[test]
fn report_serialisation() {
    let r = bound_corollary53(&[0.1, 0.1], &[0.1, 0.1]);
    let back: BoundReport = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(back, r);
    let bad = bound_corollary53(&[0.3], &[0.2]);
    let v: serde_json::Value = serde_json::from_str(&bad.to_json()).unwrap();
    assert!(v["value"].is_null() && v["invalid"].is_string());
    let row = bad.csv_row();
    assert_eq!(row.len(), BoundReport::csv_header().len());
    assert_eq!(row[2], "false");
}

#[test]
fn matern_bound_basics() {
    let spec = MaternSpec::new(50.0, 0.01, 1).unwrap();
    let a = bound_theorem41_matern(&spec, 2000, 3).unwrap();
    let b = bound_theorem41_matern(&spec, 2000, 3).unwrap();
    assert_eq!(a, b);
    let [lo, hi] = a.interval.unwrap();
    assert!(lo <= a.value.unwrap() && a.value.unwrap() <= hi);
    assert!(a.term("first").unwrap().se.is_some());
    let tiny = bound_theorem41_matern(&MaternSpec::new(50.0, 1e-5, 1).unwrap(), 2000, 3).unwrap();
    assert!(tiny.value.unwrap() < 0.02 && tiny.value.unwrap() < 0.01 * a.value.unwrap());
    assert!(!bound_theorem41_matern(&MaternSpec::new(0.0, 0.01, 1).unwrap(), 10, 3).unwrap().is_valid());
    let spec2 = MaternSpec::new(30.0, 0.02, 2).unwrap();
    assert!(bound_theorem41_matern(&spec2, 500, 4).unwrap().value.unwrap() > 0.0);
}

#[test]
fn neighbourhood_mass_scales_with_squared_intensity() {
    let r = 0.001;
    let small = matern_neighbourhood_mass(&MaternSpec::new(20.0, r, 1).unwrap(), 20_000, 5).unwrap();
    let big = matern_neighbourhood_mass(&MaternSpec::new(40.0, r, 1).unwrap(), 20_000, 5).unwrap();
    let ratio = big.mean / small.mean;
    assert!((ratio - 4.0).abs() < 0.3 * 4.0, "ratio {ratio}");
    // leading order: λ^2 times the neighbourhood length 4r
    let want = 20.0f64.powi(2) * 4.0 * r;
    assert!((small.mean - want).abs() < 0.1 * want);
}

#[test]
fn scaling_study_shape() {
    let s = matern_scaling_study(50.0, 1, &[0.002, 0.004, 0.008], 2000, 1).unwrap();
    assert_eq!(s.rows.len(), 3);
    assert!(s.rows.windows(2).all(|w| w[0].bound < w[1].bound));
    assert!(s.slope > 0.0);
    assert!(matern_scaling_study(50.0, 1, &[0.002], 10, 1).is_err());
    assert!(matern_scaling_study(50.0, 1, &[0.002, 0.3], 10, 1).is_err());
}
