//! Spatial immigration-death process.
//!
//! Immigrants arrive at rate `lambda` (the total mass of the intensity
//! measure) at `lambda / lambda`-distributed locations, and every point dies
//! at unit rate. The process started from any configuration has the Poisson
//! process with that intensity as its stationary law; the solution of the
//! Stein equation is a time integral along its paths, estimated here by
//! coupled simulation.

use std::fmt;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::{Exp1, Poisson};
use serde::{Deserialize, Serialize};

use crate::carrier::{rho1, CarrierSpace, Configuration, Point};
use crate::error::{domain, Result};
use crate::rng::{replicate, rng_for};
use crate::stats::Estimate;
use crate::univariate::McEstimate;

pub(crate) const EVENT_STREAM: u64 = 0x4556_454e_5453;
const LOCATION_STREAM: u64 = 0x4c4f_4341_5445;
const GH_STREAM: u64 = 0x4748_4449_4646;
const SECOND_STREAM: u64 = 0x4748_3244_4946;
const POISSON_STREAM: u64 = 0x504f_4953;

/// Default integration horizon for the coupled estimators.
pub const DEFAULT_T_STAR: f64 = 30.0;

pub(crate) enum Step {
    Birth,
    Death(usize),
}

/// Next jump of a chain with `n` live points. The death index is always drawn
/// so the count chain and the spatial chain consume identical random numbers.
pub(crate) fn next_step<R: Rng + ?Sized>(rng: &mut R, birth_rate: f64, n: usize) -> Option<(f64, Step)> {
    let total = birth_rate + n as f64;
    if total <= 0.0 {
        return None;
    }
    let e: f64 = rng.sample(Exp1);
    let dt = e / total;
    let u = rng.random::<f64>() * total;
    if u < birth_rate || n == 0 {
        Some((dt, Step::Birth))
    } else {
        Some((dt, Step::Death(rng.random_range(0..n))))
    }
}

type DensityFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum IntensityKind {
    Discrete { atoms: Vec<Point>, masses: Vec<f64>, index: Option<WeightedIndex<f64>> },
    Density { dim: usize, density: DensityFn, sup: f64 },
}

/// Finite intensity measure on a carrier.
#[derive(Clone)]
pub struct SpatialIntensity {
    kind: IntensityKind,
    total: f64,
}

impl fmt::Debug for SpatialIntensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            IntensityKind::Discrete { atoms, masses, .. } => f
                .debug_struct("Discrete")
                .field("atoms", atoms)
                .field("masses", masses)
                .finish(),
            IntensityKind::Density { dim, sup, .. } => f
                .debug_struct("Density")
                .field("dim", dim)
                .field("sup", sup)
                .field("total", &self.total)
                .finish(),
        }
    }
}

impl SpatialIntensity {
    /// Point masses `masses[i]` at `atoms[i]`.
    pub fn discrete(atoms: Vec<Point>, masses: Vec<f64>) -> Result<Self> {
        if atoms.len() != masses.len() {
            return domain("atoms and masses differ in length");
        }
        if masses.iter().any(|&m| !(m >= 0.0) || !m.is_finite()) {
            return domain("intensity masses must be finite and nonnegative");
        }
        let total: f64 = masses.iter().sum();
        let index = if total > 0.0 { WeightedIndex::new(masses.iter().copied()).ok() } else { None };
        Ok(SpatialIntensity { kind: IntensityKind::Discrete { atoms, masses, index }, total })
    }

    /// Masses on atoms `0..k` of a finite carrier.
    pub fn on_atoms(masses: Vec<f64>) -> Result<Self> {
        let atoms = (0..masses.len()).map(Point::atom).collect();
        Self::discrete(atoms, masses)
    }

    /// Density on `[0,1]^dim`, bounded by `sup`. The total mass is computed by
    /// midpoint quadrature and the bound is checked on the quadrature grid.
    pub fn density(dim: usize, density: impl Fn(&[f64]) -> f64 + Send + Sync + 'static, sup: f64) -> Result<Self> {
        if !sup.is_finite() || sup < 0.0 {
            return domain(format!("density supremum {sup} must be finite and nonnegative"));
        }
        if dim == 0 || dim > 3 {
            return domain(format!("density carrier dimension {dim} not in 1..=3"));
        }
        let per_axis: usize = match dim {
            1 => 4096,
            2 => 256,
            _ => 48,
        };
        let h = 1.0 / per_axis as f64;
        let cells = per_axis.pow(dim as u32);
        let mut total = 0.0;
        let mut x = vec![0.0; dim];
        for c in 0..cells {
            let mut rest = c;
            for xi in x.iter_mut() {
                *xi = (rest % per_axis) as f64 * h + 0.5 * h;
                rest /= per_axis;
            }
            let v = density(&x);
            if !(v >= 0.0) {
                return domain(format!("density is negative or undefined at {x:?}"));
            }
            if v > sup * (1.0 + 1e-12) {
                return domain(format!("density {v} at {x:?} exceeds declared supremum {sup}"));
            }
            total += v;
        }
        total *= h.powi(dim as i32);
        Ok(SpatialIntensity { kind: IntensityKind::Density { dim, density: Arc::new(density), sup }, total })
    }

    /// Uniform intensity of total mass `mass` on `[0,1]^dim`.
    pub fn uniform(dim: usize, mass: f64) -> Result<Self> {
        let mut s = Self::density(dim, move |_| mass, mass)?;
        s.total = mass;
        Ok(s)
    }

    /// Replaces the quadrature value of the total mass by a known one.
    pub fn with_total_mass(mut self, total: f64) -> Self {
        self.total = total;
        self
    }

    pub fn total_mass(&self) -> f64 {
        self.total
    }

    /// Atoms and masses of a discrete intensity.
    pub fn atoms(&self) -> Option<(&[Point], &[f64])> {
        match &self.kind {
            IntensityKind::Discrete { atoms, masses, .. } => Some((atoms, masses)),
            IntensityKind::Density { .. } => None,
        }
    }

    pub fn density_at(&self, x: &[f64]) -> Option<f64> {
        match &self.kind {
            IntensityKind::Density { density, .. } => Some(density(x)),
            IntensityKind::Discrete { .. } => None,
        }
    }

    /// Monte Carlo estimate of the integral of a density over `[0,1]^d`, for
    /// checking the total mass. Discrete intensities return their mass exactly.
    pub fn mass_estimate(&self, reps: usize, seed: u64) -> Estimate {
        match &self.kind {
            IntensityKind::Discrete { .. } => Estimate::exact(self.total),
            IntensityKind::Density { dim, density, .. } => {
                let xs = replicate(reps, seed, LOCATION_STREAM, |rng| {
                    let x: Vec<f64> = (0..*dim).map(|_| rng.random::<f64>()).collect();
                    density(&x)
                });
                Estimate::from_samples(&xs)
            }
        }
    }

    /// One location drawn from `lambda / lambda`.
    pub fn sample_location<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match &self.kind {
            IntensityKind::Discrete { atoms, index, .. } => {
                let i = index.as_ref().expect("sampling a location from a zero intensity").sample(rng);
                atoms[i].clone()
            }
            IntensityKind::Density { dim, density, sup } => loop {
                let x: Vec<f64> = (0..*dim).map(|_| rng.random::<f64>()).collect();
                if rng.random::<f64>() * sup < density(&x) {
                    return Point::site(&x);
                }
            },
        }
    }

    /// `Po(lambda)` sample using the supplied generator.
    pub fn sample_poisson_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Configuration {
        if self.total <= 0.0 {
            return Configuration::empty();
        }
        let n = Poisson::new(self.total).expect("finite positive mean").sample(rng) as usize;
        (0..n).map(|_| self.sample_location(rng)).collect()
    }
}

/// Sample of the Poisson process with intensity `intensity`.
pub fn sample_poisson_process(intensity: &SpatialIntensity, seed: u64) -> Result<Configuration> {
    let mut rng = rng_for(seed, POISSON_STREAM, 0);
    Ok(intensity.sample_poisson_with(&mut rng))
}

#[derive(Clone, Debug, PartialEq)]
pub enum Event {
    Birth(Point),
    /// Death of the point at this index of the current configuration.
    Death(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimedEvent {
    pub time: f64,
    pub event: Event,
}

/// Event log of a spatial immigration-death path on `[0, horizon]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub initial: Configuration,
    pub events: Vec<TimedEvent>,
    pub horizon: f64,
}

impl Trajectory {
    /// Configuration at time `t` (right-continuous).
    pub fn state_at(&self, t: f64) -> Configuration {
        let mut z = self.initial.clone();
        for e in self.events.iter().take_while(|e| e.time <= t) {
            match &e.event {
                Event::Birth(p) => z.push(p.clone()),
                Event::Death(i) => {
                    z.remove_at(*i);
                }
            }
        }
        z
    }

    pub fn final_state(&self) -> Configuration {
        self.state_at(self.horizon)
    }

    /// Counts `|Z(t)|` after each event, starting with `|Z(0)|`.
    pub fn count_path(&self) -> Vec<usize> {
        let mut n = self.initial.len();
        let mut out = vec![n];
        for e in &self.events {
            match e.event {
                Event::Birth(_) => n += 1,
                Event::Death(_) => n -= 1,
            }
            out.push(n);
        }
        out
    }

    /// Checks that times increase strictly within `[0, horizon]` and every death hits a live point.
    pub fn validate(&self) -> Result<()> {
        let mut n = self.initial.len();
        let mut last = 0.0;
        for (k, e) in self.events.iter().enumerate() {
            if !(e.time > last || (k == 0 && e.time >= 0.0)) || e.time > self.horizon {
                return domain(format!("event {k} at time {} is out of order", e.time));
            }
            last = e.time;
            match e.event {
                Event::Birth(_) => n += 1,
                Event::Death(i) if i < n => n -= 1,
                Event::Death(i) => return domain(format!("event {k} kills point {i} of {n}")),
            }
        }
        Ok(())
    }

    /// `time,event,location` rows; the initial points appear as `initial` rows at time 0.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,event,location\n");
        let mut z = self.initial.clone();
        for p in self.initial.iter() {
            out.push_str(&format!("0,initial,{p}\n"));
        }
        for e in &self.events {
            match &e.event {
                Event::Birth(p) => {
                    out.push_str(&format!("{},birth,{p}\n", e.time));
                    z.push(p.clone());
                }
                Event::Death(i) => {
                    let p = z.remove_at(*i);
                    out.push_str(&format!("{},death,{p}\n", e.time));
                }
            }
        }
        out
    }
}

/// Event-driven simulation. Jump times and the birth/death choice come from
/// the event stream of `seed`, locations from a separate stream, so the count
/// path coincides with [`crate::univariate::simulate_count_imdeath`] for the
/// same seed and rate.
pub fn simulate_spatial_imdeath(
    xi0: &Configuration,
    intensity: &SpatialIntensity,
    horizon: f64,
    seed: u64,
) -> Result<Trajectory> {
    if !(horizon >= 0.0) {
        return domain("horizon must be nonnegative");
    }
    let mut events_rng = rng_for(seed, EVENT_STREAM, 0);
    let mut loc_rng = rng_for(seed, LOCATION_STREAM, 0);
    let lambda = intensity.total_mass();
    let mut events = Vec::new();
    let mut n = xi0.len();
    let mut t = 0.0;
    while let Some((dt, step)) = next_step(&mut events_rng, lambda, n) {
        t += dt;
        if t > horizon {
            break;
        }
        match step {
            Step::Birth => {
                events.push(TimedEvent { time: t, event: Event::Birth(intensity.sample_location(&mut loc_rng)) });
                n += 1;
            }
            Step::Death(i) => {
                events.push(TimedEvent { time: t, event: Event::Death(i) });
                n -= 1;
            }
        }
    }
    Ok(Trajectory { initial: xi0.clone(), events, horizon })
}

/// Test function `h` on configurations.
pub trait TestFunction: Sync {
    fn eval(&self, xi: &Configuration) -> f64;
}

/// `h(xi) = rho_1(xi, xi0)`, a member of the Lipschitz class by the triangle inequality.
#[derive(Clone, Debug)]
pub struct AnchorTestFunction {
    pub anchor: Configuration,
    pub space: CarrierSpace,
}

impl AnchorTestFunction {
    pub fn new(anchor: Configuration, space: CarrierSpace) -> Self {
        AnchorTestFunction { anchor, space }
    }
}

impl TestFunction for AnchorTestFunction {
    fn eval(&self, xi: &Configuration) -> f64 {
        rho1(xi, &self.anchor, &self.space)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ConstantTestFunction(pub f64);

impl TestFunction for ConstantTestFunction {
    fn eval(&self, _xi: &Configuration) -> f64 {
        self.0
    }
}

/// Common path from `xi` together with independent `Exp(1)` lifetimes of
/// extra points. The path started from `xi + sum_{k in S} delta_{x_k}` is
/// `base(t) + sum_{k in S, lifetimes[k] > t} delta_{x_k}`.
#[derive(Clone, Debug)]
pub struct CoupledPaths {
    pub base: Trajectory,
    pub extras: Vec<Point>,
    pub lifetimes: Vec<f64>,
}

impl CoupledPaths {
    /// Configuration at time `t` of the path that includes the extras in `subset`.
    pub fn state_at(&self, t: f64, subset: &[bool]) -> Configuration {
        let mut z = self.base.state_at(t);
        for (k, p) in self.extras.iter().enumerate() {
            if subset[k] && self.lifetimes[k] > t {
                z.push(p.clone());
            }
        }
        z
    }
}

/// Simulates the coupled family on `[0, horizon]` from one generator.
pub fn simulate_coupled<R: Rng + ?Sized>(
    xi: &Configuration,
    extras: &[Point],
    intensity: &SpatialIntensity,
    horizon: f64,
    rng: &mut R,
) -> CoupledPaths {
    let lifetimes: Vec<f64> = extras.iter().map(|_| rng.sample(Exp1)).collect();
    let base = base_path(xi, intensity, horizon, rng);
    CoupledPaths { base, extras: extras.to_vec(), lifetimes }
}

fn base_path<R: Rng + ?Sized>(xi: &Configuration, intensity: &SpatialIntensity, horizon: f64, rng: &mut R) -> Trajectory {
    let lambda = intensity.total_mass();
    let mut events = Vec::new();
    let mut n = xi.len();
    let mut t = 0.0;
    while let Some((dt, step)) = next_step(rng, lambda, n) {
        t += dt;
        if t > horizon {
            break;
        }
        match step {
            Step::Birth => {
                events.push(TimedEvent { time: t, event: Event::Birth(intensity.sample_location(rng)) });
                n += 1;
            }
            Step::Death(i) => {
                events.push(TimedEvent { time: t, event: Event::Death(i) });
                n -= 1;
            }
        }
    }
    Trajectory { initial: xi.clone(), events, horizon }
}

// Integral over [0, end] of sum_S sign(S) h(base(t) + extras in S), where the
// extras are alive until their lifetimes. The integrand is constant between
// base events and extra deaths, so the integral is exact.
fn coupled_integral(
    h: &dyn TestFunction,
    paths: &CoupledPaths,
    end: f64,
    terms: &[(Vec<bool>, f64)],
) -> f64 {
    let mut cuts: Vec<f64> = paths.base.events.iter().map(|e| e.time).filter(|&t| t < end).collect();
    cuts.extend(paths.lifetimes.iter().copied().filter(|&t| t < end));
    cuts.push(end);
    cuts.sort_by(f64::total_cmp);
    let mut integral = 0.0;
    let mut z = paths.base.initial.clone();
    let mut next_event = 0;
    let mut t0 = 0.0;
    for &t1 in &cuts {
        if t1 > t0 {
            let mut value = 0.0;
            for (subset, sign) in terms {
                let mut cfg = z.clone();
                for (k, p) in paths.extras.iter().enumerate() {
                    if subset[k] && paths.lifetimes[k] > t0 {
                        cfg.push(p.clone());
                    }
                }
                value += sign * h.eval(&cfg);
            }
            integral += value * (t1 - t0);
        }
        while next_event < paths.base.events.len() && paths.base.events[next_event].time <= t1 {
            match &paths.base.events[next_event].event {
                Event::Birth(p) => z.push(p.clone()),
                Event::Death(i) => {
                    z.remove_at(*i);
                }
            }
            next_event += 1;
        }
        t0 = t1;
    }
    integral
}

/// Estimate of `g_h(xi + delta_x) - g_h(xi)`.
///
/// Paths from `xi + delta_x` and `xi` share all immigrants and the death
/// clocks of the points of `xi`; the extra point lives `tau ~ Exp(1)`, after
/// which the paths coincide. The integral of `h(Z_{xi+x}) - h(Z_xi)` is taken
/// exactly over `[0, min(tau, T*)]`; the discarded part has expectation at
/// most `e^{-T*}` for `0 <= h <= 1`.
pub fn estimate_gh_difference(
    h: &dyn TestFunction,
    xi: &Configuration,
    x: &Point,
    intensity: &SpatialIntensity,
    t_star: f64,
    reps: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_mc(t_star, reps)?;
    let terms = [(vec![true], 1.0), (vec![false], -1.0)];
    let extras = [x.clone()];
    let samples = replicate(reps, seed, GH_STREAM, |rng| {
        let tau: f64 = rng.sample(Exp1);
        let end = tau.min(t_star);
        let base = base_path(xi, intensity, end, rng);
        let paths = CoupledPaths { base, extras: extras.to_vec(), lifetimes: vec![tau] };
        -coupled_integral(h, &paths, end, &terms)
    });
    Ok((Estimate::from_samples(&samples), (-t_star).exp()).into())
}

/// Estimate of `g_h(xi + delta_a + delta_b) - g_h(xi + delta_a) - g_h(xi + delta_b) + g_h(xi)`
/// from four coupled paths. The integrand vanishes once either extra point
/// has died, so the horizon is `min(tau_a, tau_b, T*)` and the truncation
/// error is at most `e^{-2 T*}`.
pub fn estimate_second_difference(
    h: &dyn TestFunction,
    xi: &Configuration,
    alpha: &Point,
    beta: &Point,
    intensity: &SpatialIntensity,
    t_star: f64,
    reps: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_mc(t_star, reps)?;
    let terms = [
        (vec![true, true], 1.0),
        (vec![true, false], -1.0),
        (vec![false, true], -1.0),
        (vec![false, false], 1.0),
    ];
    let extras = [alpha.clone(), beta.clone()];
    let samples = replicate(reps, seed, SECOND_STREAM, |rng| {
        let ta: f64 = rng.sample(Exp1);
        let tb: f64 = rng.sample(Exp1);
        let end = ta.min(tb).min(t_star);
        let base = base_path(xi, intensity, end, rng);
        let paths = CoupledPaths { base, extras: extras.to_vec(), lifetimes: vec![ta, tb] };
        -coupled_integral(h, &paths, end, &terms)
    });
    Ok((Estimate::from_samples(&samples), (-2.0 * t_star).exp()).into())
}

/// Right side of the bound on second differences, `3.5/lambda + 2.5/(|xi|+1)`.
pub fn stein_factor_bound(lambda: f64, xi_len: usize) -> f64 {
    3.5 / lambda + 2.5 / (xi_len as f64 + 1.0)
}

fn check_mc(t_star: f64, reps: usize) -> Result<()> {
    if !(t_star > 0.0) {
        return domain("T* must be positive");
    }
    if reps == 0 {
        return domain("need at least one replication");
    }
    Ok(())
}

/// Residual of the Stein equation at `xi`, with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualEstimate {
    /// `A g_h(xi) - [h(xi) - Po(lambda)(h)]`.
    pub residual: f64,
    pub se: f64,
    /// Sum of the truncation bounds of all difference terms.
    pub truncation_bound: f64,
}

/// Evaluates `A g_h(xi) - [h(xi) - Po(lambda)(h)]` with
/// `A g(xi) = int [g(xi + delta_x) - g(xi)] lambda(dx) + sum_{x in xi} [g(xi - delta_x) - g(xi)]`.
/// Each difference of `g_h` and `Po(lambda)(h)` is estimated independently
/// with `reps` replications; for a density intensity the immigration integral
/// is itself sampled, one location per replication.
pub fn stein_equation_residual(
    h: &dyn TestFunction,
    xi: &Configuration,
    intensity: &SpatialIntensity,
    reps: usize,
    t_star: f64,
    seed: u64,
) -> Result<ResidualEstimate> {
    check_mc(t_star, reps)?;
    let lambda = intensity.total_mass();
    let mut total = Estimate::exact(0.0);
    let mut truncation = 0.0;
    let mut stream_seed = 0u64;
    let mut next_seed = || {
        stream_seed += 1;
        crate::rng::derive_seed(seed, 0x5245_5349, stream_seed)
    };
    match intensity.atoms() {
        Some((atoms, masses)) => {
            for (a, &m) in atoms.iter().zip(masses) {
                if m == 0.0 {
                    continue;
                }
                let e = estimate_gh_difference(h, xi, a, intensity, t_star, reps, next_seed())?;
                total = total.add_independent(Estimate { mean: e.estimate, se: e.se, n: e.reps }.scale(m));
                truncation += m * e.truncation_bound;
            }
        }
        None if lambda > 0.0 => {
            let s = next_seed();
            let terms = [(vec![true], 1.0), (vec![false], -1.0)];
            let samples = replicate(reps, s, GH_STREAM, |rng| {
                let x = intensity.sample_location(rng);
                let tau: f64 = rng.sample(Exp1);
                let end = tau.min(t_star);
                let base = base_path(xi, intensity, end, rng);
                let paths = CoupledPaths { base, extras: vec![x], lifetimes: vec![tau] };
                -lambda * coupled_integral(h, &paths, end, &terms)
            });
            total = total.add_independent(Estimate::from_samples(&samples));
            truncation += lambda * (-t_star).exp();
        }
        None => {}
    }
    for i in 0..xi.len() {
        let mut rest = xi.clone();
        let x = rest.remove_at(i);
        let e = estimate_gh_difference(h, &rest, &x, intensity, t_star, reps, next_seed())?;
        total = total.add_independent(Estimate { mean: e.estimate, se: e.se, n: e.reps }.scale(-1.0));
        truncation += e.truncation_bound;
    }
    let po_seed = next_seed();
    let po_h = Estimate::from_samples(&replicate(reps, po_seed, POISSON_STREAM, |rng| {
        h.eval(&intensity.sample_poisson_with(rng))
    }));
    let rhs_const = h.eval(xi);
    // residual = A g - h(xi) + Po(h)
    let residual = total.add_independent(po_h);
    Ok(ResidualEstimate { residual: residual.mean - rhs_const, se: residual.se, truncation_bound: truncation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::univariate::simulate_count_imdeath;

    fn line_space() -> CarrierSpace {
        CarrierSpace::Interval
    }

    #[test]
    fn zero_intensity_empty_path() {
        let z = SpatialIntensity::on_atoms(vec![0.0, 0.0]).unwrap();
        let t = simulate_spatial_imdeath(&Configuration::empty(), &z, 10.0, 1).unwrap();
        assert!(t.events.is_empty());
        assert!(sample_poisson_process(&z, 3).unwrap().is_empty());
    }

    #[test]
    fn count_marginal_matches_count_chain() {
        let lambda = SpatialIntensity::on_atoms(vec![0.5, 1.0, 1.5]).unwrap();
        for seed in 0..50 {
            let xi0 = Configuration::from_counts(&[1, 0, 2]);
            let sp = simulate_spatial_imdeath(&xi0, &lambda, 7.0, seed).unwrap();
            sp.validate().unwrap();
            let ct = simulate_count_imdeath(3, 3.0, 7.0, seed).unwrap();
            assert_eq!(sp.events.len(), ct.events.len());
            for (a, b) in sp.events.iter().zip(&ct.events) {
                assert_eq!(a.time, b.time);
                assert_eq!(matches!(a.event, Event::Birth(_)), b.birth);
            }
        }
    }

    #[test]
    fn density_validation() {
        assert!(SpatialIntensity::density(1, |x| 2.0 * x[0], 1.0).is_err());
        assert!(SpatialIntensity::density(1, |x| x[0], f64::INFINITY).is_err());
        let s = SpatialIntensity::density(1, |x| 2.0 * x[0], 2.0).unwrap();
        assert!((s.total_mass() - 1.0).abs() < 1e-9);
        let e = s.mass_estimate(20_000, 5);
        assert!((e.mean - 1.0).abs() < 3.0 * e.se);
    }

    #[test]
    fn trajectory_csv_and_validation() {
        let u = SpatialIntensity::uniform(1, 2.0).unwrap();
        let t = simulate_spatial_imdeath(&Configuration::on_line(&[0.25]), &u, 3.0, 4).unwrap();
        t.validate().unwrap();
        let csv = t.to_csv();
        assert!(csv.starts_with("time,event,location\n0,initial,0.25\n"));
        assert_eq!(csv.lines().count(), 2 + t.events.len());
        let mut bad = t.clone();
        bad.events.insert(0, TimedEvent { time: 0.1, event: Event::Death(5) });
        assert!(bad.validate().is_err());
    }

    #[test]
    fn constant_h_gives_zero() {
        let u = SpatialIntensity::uniform(1, 1.0).unwrap();
        let h = ConstantTestFunction(0.3);
        let xi = Configuration::on_line(&[0.1, 0.7]);
        let e = estimate_gh_difference(&h, &xi, &Point::at(0.5), &u, 30.0, 50, 1).unwrap();
        assert_eq!(e.estimate, 0.0);
        let e = estimate_second_difference(&h, &xi, &Point::at(0.5), &Point::at(0.2), &u, 30.0, 50, 1).unwrap();
        assert_eq!(e.estimate, 0.0);
        let r = stein_equation_residual(&h, &xi, &u, 50, 30.0, 2).unwrap();
        assert_eq!(r.residual, 0.0);
    }

    #[test]
    fn pure_death_closed_form() {
        let zero = SpatialIntensity::on_atoms(vec![0.0]).unwrap();
        let h = AnchorTestFunction::new(Configuration::empty(), line_space());
        let e = estimate_gh_difference(&h, &Configuration::empty(), &Point::at(0.4), &zero, 30.0, 20_000, 3).unwrap();
        assert!((e.estimate + 1.0).abs() <= 3.0 * e.se + e.truncation_bound, "{e:?}");
    }

    #[test]
    fn coupled_paths_merge_after_death() {
        let u = SpatialIntensity::uniform(1, 1.5).unwrap();
        let xi = Configuration::on_line(&[0.3]);
        let mut rng = rng_for(11, 0, 0);
        for _ in 0..20 {
            let p = simulate_coupled(&xi, &[Point::at(0.9)], &u, 10.0, &mut rng);
            let tau = p.lifetimes[0];
            for k in 0..20 {
                let t = tau + k as f64 * 0.37;
                if t > 10.0 {
                    break;
                }
                assert_eq!(p.state_at(t, &[true]), p.state_at(t, &[false]));
            }
        }
    }

    #[test]
    fn stein_factor_bound_arithmetic() {
        assert_eq!(stein_factor_bound(2.0, 0), 1.75 + 2.5);
    }
}
