//! The named experiments. Each produces a table plus metadata for the sidecar.

use rand::Rng;
use serde_json::{json, Value};
use stein_poisson::bounds::{bound_corollary53, bound_eq7, matern_scaling_study};
use stein_poisson::carrier::{CarrierSpace, Configuration, DistanceMatrix, Point};
use stein_poisson::imdeath::{estimate_second_difference, stein_factor_bound, AnchorTestFunction, SpatialIntensity};
use stein_poisson::palmexact::{
    bernoulli_process_dist, campbell_check, d_operator_expectation_with, exact_d2_poisson, intensity, palm,
    poisson_cap_for_tail, total_variation, truncated_poisson_dist, ConfigDistribution, CountConfiguration,
    DEFAULT_TRANSPORT_CAP,
};
use stein_poisson::rng::{derive_seed, rng_for};
use stein_poisson::univariate::BernoulliVector;

use crate::config::{
    BernoulliParams, Experiment, MaternParams, PalmParams, RenewalParams, ResolvedConfig, RunMode, SteinFactorParams,
};
use crate::CliError;

pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub meta: Value,
    /// Rows where a checked inequality failed.
    pub violations: usize,
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt(x: Option<f64>) -> String {
    x.map_or(String::new(), num)
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|c| c.to_string()).collect()
}

/// Mode the experiment runs in: the explicit choice if it is supported, else its default.
pub fn effective_mode(exp: &Experiment, requested: Option<RunMode>) -> Result<RunMode, CliError> {
    let (default, allowed): (RunMode, &[RunMode]) = match exp {
        Experiment::BernoulliBound(_) => (RunMode::Exact, &[RunMode::Exact, RunMode::Mc]),
        Experiment::RenewalBound(_) => (RunMode::Exact, &[RunMode::Exact]),
        Experiment::PalmExact(_) => (RunMode::Exact, &[RunMode::Exact]),
        Experiment::MaternScaling(_) | Experiment::SteinFactor(_) => (RunMode::Mc, &[RunMode::Mc]),
    };
    match requested {
        None => Ok(default),
        Some(m) if allowed.contains(&m) => Ok(m),
        Some(m) => Err(CliError::Config(format!("at `mode`: {} does not support {m:?} mode", exp.name()))),
    }
}

pub fn run(cfg: &ResolvedConfig) -> Result<Table, CliError> {
    match &cfg.experiment {
        Experiment::BernoulliBound(p) => bernoulli_bound(p, cfg),
        Experiment::MaternScaling(p) => matern_scaling(p, cfg),
        Experiment::RenewalBound(p) => renewal_bound(p),
        Experiment::SteinFactor(p) => stein_factor(p, cfg),
        Experiment::PalmExact(p) => palm_exact(p),
    }
}

fn line_carrier(k: usize) -> DistanceMatrix {
    DistanceMatrix::from_line(&(0..k).map(|i| i as f64 / k as f64).collect::<Vec<_>>())
}

const EXACT_D2_MAX_TRIALS: usize = 4;

fn bernoulli_bound(params: &BernoulliParams, cfg: &ResolvedConfig) -> Result<Table, CliError> {
    let mut rows = Vec::new();
    let mut widths = Vec::new();
    let mut violations = 0;
    for (idx, v) in params.vectors.iter().enumerate() {
        let p = BernoulliVector::new(v.clone()).map_err(|e| CliError::Config(format!("at `params.vectors[{idx}]`: {e}")))?;
        let b = bound_eq7(&p);
        let exact = if cfg.mode == RunMode::Exact && p.len() <= EXACT_D2_MAX_TRIALS && p.lambda() > 0.0 {
            let d = bernoulli_process_dist(&p, line_carrier(p.len()))?;
            Some(exact_d2_poisson(&d, p.probs(), DEFAULT_TRANSPORT_CAP)?)
        } else {
            None
        };
        let dominated = exact.map(|d2| b.sharp.value.is_some_and(|s| d2.lower <= s));
        if dominated == Some(false) {
            violations += 1;
        }
        if let Some(d2) = exact {
            widths.push(d2.truncation_width);
        }
        rows.push(vec![
            idx.to_string(),
            p.len().to_string(),
            num(p.lambda()),
            num(p.sum_sq()),
            opt(b.sharp.value),
            opt(b.crude.value),
            b.crude.is_valid().to_string(),
            opt(exact.map(|d| d.value)),
            opt(exact.map(|d| d.lower)),
            opt(exact.map(|d| d.upper)),
            dominated.map_or(String::new(), |d| d.to_string()),
        ]);
    }
    Ok(Table {
        header: header(&[
            "index", "n", "lambda", "sum_sq", "sharp", "crude", "crude_valid", "exact_d2", "d2_lower", "d2_upper", "dominated",
        ]),
        rows,
        meta: json!({ "truncation_widths": widths, "exact_d2_max_trials": EXACT_D2_MAX_TRIALS }),
        violations,
    })
}

fn matern_scaling(params: &MaternParams, cfg: &ResolvedConfig) -> Result<Table, CliError> {
    let study = matern_scaling_study(params.nu, params.dim, &params.radii, cfg.reps, cfg.seed)?;
    let rows = study
        .rows
        .iter()
        .map(|r| vec![num(r.r), num(r.bound), num(r.se), num(r.first), num(r.second), num(study.slope)])
        .collect();
    Ok(Table {
        header: header(&["r", "bound", "se", "first", "second", "slope"]),
        rows,
        meta: json!({ "slope": study.slope, "expected_slope": params.dim, "nu": params.nu }),
        violations: 0,
    })
}

fn renewal_bound(params: &RenewalParams) -> Result<Table, CliError> {
    let mut cases: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    if let Some(grid) = &params.grid {
        for &n in &grid.n {
            for &g in &grid.g {
                for &f in &grid.f {
                    cases.push((vec![g; n], vec![f; n]));
                }
            }
        }
    }
    cases.extend(params.cases.iter().map(|c| (c.g.clone(), c.f.clone())));
    if cases.is_empty() {
        return Err(CliError::Config("at `params`: give a `grid` or at least one case".into()));
    }
    let join = |v: &[f64]| v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(";");
    let mut rows = Vec::new();
    let mut invalid = 0;
    for (i, (g, f)) in cases.iter().enumerate() {
        let r = bound_corollary53(g, f);
        if !r.is_valid() {
            invalid += 1;
        }
        let term = |name: &str| r.term(name).map(|t| t.value);
        // homogeneous cases print a single value
        let show = |v: &[f64]| if v.windows(2).all(|w| w[0] == w[1]) { v.first().map_or(String::new(), |x| num(*x)) } else { join(v) };
        rows.push(vec![
            i.to_string(),
            g.len().to_string(),
            show(g),
            show(f),
            r.is_valid().to_string(),
            opt(r.value),
            opt(term("numerator")),
            opt(term("denominator")),
            r.invalid.clone().unwrap_or_default(),
        ]);
    }
    Ok(Table {
        header: header(&["case", "n", "g", "f", "valid", "bound", "numerator", "denominator", "invalid_reason"]),
        rows,
        meta: json!({ "cases": cases.len(), "invalid": invalid }),
        violations: 0,
    })
}

fn stein_factor(params: &SteinFactorParams, cfg: &ResolvedConfig) -> Result<Table, CliError> {
    let k = params.masses.len();
    if k == 0 || params.sizes.is_empty() {
        return Err(CliError::Config("at `params`: need at least one atom mass and one size".into()));
    }
    let intensity = SpatialIntensity::on_atoms(params.masses.clone())?;
    let lambda = intensity.total_mass();
    let space = CarrierSpace::FiniteAtoms(line_carrier(k));
    let truncation = 4.0 * (-cfg.t_star).exp();
    let mut rows = Vec::new();
    let mut violations = 0;
    for case in 0..params.cases {
        let mut rng = rng_for(cfg.seed, 0x5346, case as u64);
        let size = params.sizes[case % params.sizes.len()];
        let xi: Configuration = (0..size).map(|_| Point::atom(rng.random_range(0..k))).collect();
        let anchor: Configuration = (0..rng.random_range(0..=3)).map(|_| Point::atom(rng.random_range(0..k))).collect();
        let alpha = Point::atom(rng.random_range(0..k));
        let beta = Point::atom(rng.random_range(0..k));
        let h = AnchorTestFunction::new(anchor, space.clone());
        let est = estimate_second_difference(&h, &xi, &alpha, &beta, &intensity, cfg.t_star, cfg.reps, derive_seed(cfg.seed, 0x5347, case as u64))?;
        let bound = stein_factor_bound(lambda, size);
        let allowed = bound + 3.0 * est.se + truncation;
        let within = est.estimate.abs() <= allowed;
        if !within {
            violations += 1;
        }
        rows.push(vec![
            case.to_string(),
            size.to_string(),
            alpha.to_string(),
            beta.to_string(),
            num(est.estimate),
            num(est.se),
            num(bound),
            num(allowed),
            within.to_string(),
        ]);
    }
    Ok(Table {
        header: header(&["case", "xi_len", "alpha", "beta", "estimate", "se", "bound", "allowed", "within"]),
        rows,
        meta: json!({ "lambda": lambda, "truncation_bound": truncation }),
        violations,
    })
}

const PALM_TAIL: f64 = 1e-12;

fn palm_rows(name: &str, d: &ConfigDistribution, lam: &[f64], rows: &mut Vec<Vec<String>>) -> Result<(), CliError> {
    let f = |a: usize, c: &CountConfiguration| (a as f64 + 1.0) / (1.0 + c.total() as f64);
    let (lhs, rhs) = campbell_check(d, &f)?;
    let d_op = d_operator_expectation_with(d, &f, lam);
    for (a, &la) in intensity(d).iter().enumerate() {
        let tv = if la > 0.0 { Some(total_variation(&palm(d, a)?, &d.shift_up(a))) } else { None };
        rows.push(vec![
            name.into(),
            a.to_string(),
            num(la),
            num(lhs),
            num(rhs),
            opt(tv),
            num(d.truncated_mass()),
            num(d_op),
        ]);
    }
    Ok(())
}

fn palm_exact(params: &PalmParams) -> Result<Table, CliError> {
    let k = params.means.len();
    if k == 0 {
        return Err(CliError::Config("at `params.means`: need at least one atom".into()));
    }
    let caps: Vec<usize> = params.means.iter().map(|&m| poisson_cap_for_tail(m, PALM_TAIL)).collect::<Result<_, _>>()?;
    let d = truncated_poisson_dist(line_carrier(k), &params.means, &caps)?;
    let mut rows = Vec::new();
    palm_rows("poisson", &d, &params.means, &mut rows)?;
    let mut tails = vec![json!({ "law": "poisson", "truncated_mass": d.truncated_mass() })];
    if let Some(p) = &params.bernoulli {
        let p = BernoulliVector::new(p.clone()).map_err(|e| CliError::Config(format!("at `params.bernoulli`: {e}")))?;
        let b = bernoulli_process_dist(&p, line_carrier(p.len()))?;
        palm_rows("bernoulli", &b, p.probs(), &mut rows)?;
        tails.push(json!({ "law": "bernoulli", "truncated_mass": 0.0 }));
    }
    Ok(Table {
        header: header(&[
            "law", "atom", "intensity", "campbell_lhs", "campbell_rhs", "palm_shift_tv", "truncated_mass", "d_operator",
        ]),
        rows,
        meta: json!({ "tail_masses": tails, "caps": caps }),
        violations: 0,
    })
}
