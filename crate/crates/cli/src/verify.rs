//! Quick self-checks of the library against independent references.

use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};
use stein_oracle::{d1_prime_brute, poisson_binomial_enumerate, rho1_brute};
use stein_poisson::bounds::{bound_corollary53, bound_eq7, bound_theorem41};
use stein_poisson::carrier::{d1_prime, rho1, CarrierSpace, Configuration, DistanceMatrix, Point};
use stein_poisson::models::{sample_marked_bernoulli, sample_matern, MarkLaw, MarkedBernoulliSpec, MaternSpec};
use stein_poisson::palmexact::{
    bernoulli_process_dist, campbell_check, exact_d2_poisson, palm, total_variation, truncated_poisson_dist,
    CountConfiguration, DEFAULT_TRANSPORT_CAP,
};
use stein_poisson::rng::{derive_seed, rng_for, SimRng};
use stein_poisson::stats::{empirical_pmf, tv_to_reference};
use stein_poisson::univariate::{
    check_delta_bound, default_cutoff, dtv_bound_independent, poisson_binomial_pmf, poisson_pmf, simulate_count_imdeath,
    total_variation as pmf_tv, BernoulliVector,
};

use crate::CliError;

pub const SUITES: [&str; 6] = ["univariate", "metrics", "palm", "imdeath", "models", "bounds"];

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: Value,
}

#[derive(Debug, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
}

fn check(name: &str, passed: bool, detail: Value) -> Check {
    Check { name: name.into(), passed, detail }
}

type R<T> = Result<T, CliError>;

pub fn run_suite(suite: &str, seed: u64, reps: usize) -> R<SuiteReport> {
    let checks = match suite {
        "univariate" => univariate(seed)?,
        "metrics" => metrics(seed),
        "palm" => palm_checks(seed)?,
        "imdeath" => imdeath(seed, reps)?,
        "models" => models(seed, reps)?,
        "bounds" => bounds(seed)?,
        "all" => {
            let mut all = Vec::new();
            for s in SUITES {
                let r = run_suite(s, seed, reps)?;
                all.extend(r.checks.into_iter().map(|c| Check { name: format!("{s}/{}", c.name), ..c }));
            }
            all
        }
        other => return Err(CliError::Config(format!("unknown suite `{other}`; expected one of {SUITES:?} or all"))),
    };
    Ok(SuiteReport { suite: suite.into(), seed, passed: checks.iter().all(|c| c.passed), checks })
}

fn random_p(rng: &mut SimRng, n: usize) -> BernoulliVector {
    BernoulliVector::new((0..n).map(|_| rng.random::<f64>()).collect()).expect("probabilities in [0,1)")
}

fn line(k: usize) -> DistanceMatrix {
    DistanceMatrix::from_line(&(0..k).map(|i| i as f64 / k as f64).collect::<Vec<_>>())
}

fn univariate(seed: u64) -> R<Vec<Check>> {
    let mut out = Vec::new();
    for lambda in [0.5, 1.0, 2.0, 5.0] {
        let r = check_delta_bound(lambda, 10)?;
        let ok = r.passed() && r.max_residual <= 1e-12;
        out.push(check(&format!("stein-factor-lambda-{lambda}"), ok, json!(r)));
    }
    let mut rng = rng_for(seed, 1, 0);
    let (mut violations, mut pmf_err, mut min_ratio) = (0, 0.0f64, f64::INFINITY);
    for _ in 0..200 {
        let n = rng.random_range(1..=12);
        let p = random_p(&mut rng, n);
        let pb = poisson_binomial_pmf(&p);
        let brute = poisson_binomial_enumerate(p.probs());
        pmf_err = brute.iter().enumerate().fold(pmf_err, |m, (w, &q)| m.max((pb.get(w) - q).abs()));
        let pois = poisson_pmf(p.lambda(), default_cutoff(p.lambda()))?;
        let tv = pmf_tv(&pb, &pois);
        let bound = dtv_bound_independent(&p);
        if tv > bound + 1e-12 {
            violations += 1;
        }
        if tv > 0.0 {
            min_ratio = min_ratio.min(bound / tv);
        }
    }
    out.push(check("poisson-binomial-enumeration", pmf_err < 1e-12, json!({ "max_error": pmf_err })));
    out.push(check("dtv-dominance", violations == 0, json!({ "violations": violations, "min_bound_over_tv": min_ratio })));
    Ok(out)
}

fn random_config(rng: &mut SimRng, max: usize, space: &CarrierSpace) -> Configuration {
    let n = rng.random_range(0..=max);
    match space {
        CarrierSpace::FiniteAtoms(dm) => (0..n).map(|_| Point::atom(rng.random_range(0..dm.len()))).collect(),
        _ => (0..n).map(|_| Point::site(&[rng.random::<f64>(), rng.random::<f64>()])).collect(),
    }
}

fn metrics(seed: u64) -> Vec<Check> {
    let mut rng = rng_for(seed, 2, 0);
    let spaces = [CarrierSpace::cube(2), CarrierSpace::FiniteAtoms(line(3))];
    let mut out = Vec::new();
    for (name, space) in ["cube", "atoms"].into_iter().zip(&spaces) {
        let d0 = |a: &Point, b: &Point| space.distance(a, b);
        let (mut e_rho, mut e_d1) = (0.0f64, 0.0f64);
        for _ in 0..300 {
            let x = random_config(&mut rng, 5, space);
            let y = random_config(&mut rng, 5, space);
            e_rho = e_rho.max((rho1(&x, &y, space) - rho1_brute(x.points(), y.points(), d0)).abs());
            e_d1 = e_d1.max((d1_prime(&x, &y, space) - d1_prime_brute(x.points(), y.points(), d0)).abs());
        }
        out.push(check(&format!("rho1-vs-brute-{name}"), e_rho <= 1e-12, json!({ "max_error": e_rho })));
        out.push(check(&format!("d1prime-vs-brute-{name}"), e_d1 <= 1e-12, json!({ "max_error": e_d1 })));
    }
    out
}

fn palm_checks(seed: u64) -> R<Vec<Check>> {
    let mut rng = rng_for(seed, 3, 0);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(1..=4);
        let p = random_p(&mut rng, n);
        let d = bernoulli_process_dist(&p, line(n))?;
        let (c1, c2) = (rng.random::<f64>(), rng.random::<f64>());
        let f = move |a: usize, c: &CountConfiguration| (c1 * a as f64 + 1.0) / (1.0 + c2 * c.total() as f64);
        let (lhs, rhs) = campbell_check(&d, &f)?;
        worst = worst.max((lhs - rhs).abs());
    }
    let mut out = vec![check("campbell", worst <= 1e-10, json!({ "max_error": worst }))];

    let means = [0.8, 1.5, 0.3];
    let caps = [7usize, 10, 5];
    let d = truncated_poisson_dist(line(3), &means, &caps)?;
    let mut err = 0.0f64;
    for a in 0..3 {
        let tv = total_variation(&palm(&d, a)?, &d.shift_up(a));
        let mut kept = 1.0;
        for b in 0..3 {
            let cap = if b == a { caps[b] - 1 } else { caps[b] };
            kept *= 1.0 - poisson_pmf(means[b], cap)?.tail_mass();
        }
        err = err.max((tv - (1.0 - kept)).abs());
    }
    out.push(check("poisson-palm-is-shift", err <= 1e-12, json!({ "max_error": err })));
    Ok(out)
}

fn imdeath(seed: u64, reps: usize) -> R<Vec<Check>> {
    let mut out = Vec::new();
    for lambda in [1.0, 4.0] {
        let finals: Vec<usize> = (0..reps)
            .map(|i| simulate_count_imdeath(0, lambda, 30.0, derive_seed(seed, 4, i as u64)).map(|t| t.final_count()))
            .collect::<Result<_, _>>()?;
        let reference = poisson_pmf(lambda, default_cutoff(lambda))?;
        let (tv, scale) = tv_to_reference(&empirical_pmf(&finals), reference.probs(), reference.tail_mass(), reps);
        out.push(check(&format!("stationary-law-lambda-{lambda}"), tv <= 3.0 * scale, json!({ "tv": tv, "scale": scale, "reps": reps })));
    }
    Ok(out)
}

fn models(seed: u64, reps: usize) -> R<Vec<Check>> {
    let spec = MaternSpec::new(40.0, 0.03, 2)?;
    let mut close = 0;
    for i in 0..reps.min(500) {
        let s = sample_matern(&spec, derive_seed(seed, 5, i as u64));
        let pts = s.thinned.points();
        for (j, a) in pts.iter().enumerate() {
            for b in &pts[j + 1..] {
                let (x, y) = (a.coords().unwrap_or(&[]), b.coords().unwrap_or(&[]));
                let d2: f64 = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
                if d2.sqrt() <= spec.r {
                    close += 1;
                }
            }
        }
    }
    let mut out = vec![check("matern-hard-core", close == 0, json!({ "close_pairs": close }))];
    let marked = MarkedBernoulliSpec::independent(vec![0.6, 0.9, 0.3], MarkLaw::Atoms { weights: vec![0.5, 0.5] })?;
    let non_simple = (0..reps.min(500))
        .filter(|&i| !sample_marked_bernoulli(&marked, derive_seed(seed, 6, i as u64)).lifted.is_simple())
        .count();
    out.push(check("lifted-sample-is-simple", non_simple == 0, json!({ "non_simple": non_simple })));
    Ok(out)
}

fn bounds(seed: u64) -> R<Vec<Check>> {
    let mut rng = rng_for(seed, 7, 0);
    let (mut dominated, mut reduction_err) = (true, 0.0f64);
    for _ in 0..10 {
        let n = rng.random_range(1..=4);
        let p = BernoulliVector::new((0..n).map(|_| 0.6 * rng.random::<f64>()).collect())?;
        let d = bernoulli_process_dist(&p, line(n))?;
        let sharp = bound_eq7(&p).sharp.value_or_nan();
        let d2 = exact_d2_poisson(&d, p.probs(), DEFAULT_TRANSPORT_CAP)?;
        dominated &= d2.value <= sharp + d2.truncation_width;
        let own: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        reduction_err = reduction_err.max((bound_theorem41(&d, &own)?.value_or_nan() - sharp).abs());
    }
    let r2 = bound_corollary53(&[0.1, 0.1], &[0.1, 0.1]);
    let r1 = bound_corollary53(&[0.3], &[0.2]);
    Ok(vec![
        check("exact-d2-dominated", dominated, json!({})),
        check("reduction-identity", reduction_err <= 1e-10, json!({ "max_error": reduction_err })),
        check("renewal-two-component", (r2.value_or_nan() - 5.0).abs() <= 1e-9, json!({ "bound": r2.value })),
        check("renewal-single-component-invalid", !r1.is_valid(), json!({ "reason": r1.invalid })),
    ])
}
