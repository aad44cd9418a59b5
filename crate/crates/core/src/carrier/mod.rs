//! Carrier spaces, point configurations and matching metrics.
//!
//! A [`CarrierSpace`] pairs a set of locations with a distance `d0` bounded
//! by 1. Configurations are finite multisets of points; the metrics between
//! them are
//!
//! - `rho_1`: 1 when the point counts differ, otherwise the smallest
//!   average distance of a perfect matching;
//! - `d'_1`: smallest total distance of an injection of the smaller
//!   configuration into the larger one, plus the count difference.
//!
//! Both are computed exactly with [`assignment::solve_assignment`], or, for
//! large configurations on finitely many atoms, with a transport problem over
//! atom counts.

pub mod assignment;

use std::cmp::Ordering;
use std::fmt;

use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::transport::{solve_transport, CostMatrix};

pub use assignment::{min_cost_assignment, solve_assignment, Assignment};

pub type Coords = SmallVec<[f64; 3]>;

/// Location part of a point.
#[derive(Clone, Debug, PartialEq)]
pub enum Loc {
    /// Coordinates in `[0,1]^d` (or any subset of `R^d`).
    Site(Coords),
    /// Index into a finite atom set.
    Atom(usize),
}

/// A carrier point, optionally carrying a label for lifted spaces.
#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    pub label: Option<usize>,
    pub loc: Loc,
}

impl Point {
    /// Point on the line.
    pub fn at(x: f64) -> Self {
        Point { label: None, loc: Loc::Site(smallvec::smallvec![x]) }
    }

    pub fn site(coords: &[f64]) -> Self {
        Point { label: None, loc: Loc::Site(Coords::from_slice(coords)) }
    }

    pub fn atom(index: usize) -> Self {
        Point { label: None, loc: Loc::Atom(index) }
    }

    pub fn with_label(mut self, label: usize) -> Self {
        self.label = Some(label);
        self
    }

    /// The same location without its label.
    pub fn base(&self) -> Point {
        Point { label: None, loc: self.loc.clone() }
    }

    pub fn coords(&self) -> Option<&[f64]> {
        match &self.loc {
            Loc::Site(c) => Some(c.as_slice()),
            Loc::Atom(_) => None,
        }
    }

    pub fn atom_index(&self) -> Option<usize> {
        match self.loc {
            Loc::Atom(i) => Some(i),
            Loc::Site(_) => None,
        }
    }

    /// Total order used for multiset comparison.
    pub fn total_cmp(&self, other: &Point) -> Ordering {
        self.label.cmp(&other.label).then_with(|| match (&self.loc, &other.loc) {
            (Loc::Atom(a), Loc::Atom(b)) => a.cmp(b),
            (Loc::Atom(_), Loc::Site(_)) => Ordering::Less,
            (Loc::Site(_), Loc::Atom(_)) => Ordering::Greater,
            (Loc::Site(a), Loc::Site(b)) => {
                for (x, y) in a.iter().zip(b.iter()) {
                    match x.total_cmp(y) {
                        Ordering::Equal => {}
                        o => return o,
                    }
                }
                a.len().cmp(&b.len())
            }
        })
    }
}

impl fmt::Display for Point {
    /// `x`, `x;y;...` for sites, `a<i>` for atoms; lifted points are prefixed by `label:`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(l) = self.label {
            write!(f, "{l}:")?;
        }
        match &self.loc {
            Loc::Atom(i) => write!(f, "a{i}"),
            Loc::Site(c) => {
                for (k, x) in c.iter().enumerate() {
                    if k > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{x}")?;
                }
                Ok(())
            }
        }
    }
}

/// Symmetric `k x k` distance table between finitely many atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    k: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    /// Validates the (pseudo-)metric axioms: symmetry, zero diagonal, values
    /// in `[0,1]` and the triangle inequality (to `1e-12`). Distinct atoms at
    /// distance 0 are allowed.
    pub fn new(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::Domain("distance matrix must be square".into()));
        }
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        let dm = DistanceMatrix { k, data };
        for i in 0..k {
            if dm.get(i, i) != 0.0 {
                return Err(Error::Domain(format!("nonzero diagonal at atom {i}")));
            }
            for j in 0..k {
                let d = dm.get(i, j);
                if !(0.0..=1.0).contains(&d) {
                    return Err(Error::Domain(format!("distance ({i},{j}) = {d} outside [0,1]")));
                }
                if d != dm.get(j, i) {
                    return Err(Error::Domain(format!("asymmetric distance at ({i},{j})")));
                }
            }
        }
        for i in 0..k {
            for j in 0..k {
                for l in 0..k {
                    if dm.get(i, j) > dm.get(i, l) + dm.get(l, j) + 1e-12 {
                        return Err(Error::Domain(format!("triangle inequality fails for ({i},{l},{j})")));
                    }
                }
            }
        }
        Ok(dm)
    }

    /// Distances `min(|x_i - x_j|, 1)` between points of the line.
    pub fn from_line(xs: &[f64]) -> Self {
        let k = xs.len();
        let data = (0..k * k).map(|n| (xs[n / k] - xs[n % k]).abs().min(1.0)).collect();
        DistanceMatrix { k, data }
    }

    /// Distances induced by an arbitrary carrier on a list of points.
    pub fn from_points(space: &CarrierSpace, points: &[Point]) -> Self {
        let k = points.len();
        let data = (0..k * k).map(|n| space.distance(&points[n / k], &points[n % k])).collect();
        DistanceMatrix { k, data }
    }

    /// All distinct atoms at distance 1.
    pub fn discrete(k: usize) -> Self {
        let data = (0..k * k).map(|n| if n / k == n % k { 0.0 } else { 1.0 }).collect();
        DistanceMatrix { k, data }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.k + j]
    }

    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.k.max(1)).map(<[f64]>::to_vec).take(self.k).collect()
    }
}

/// A carrier set with its bounded (pseudo-)metric.
#[derive(Clone, Debug, PartialEq)]
pub enum CarrierSpace {
    /// `[0,1]` with `d0(x,y) = min(|x-y|, 1)`.
    Interval,
    /// `[0,1]^d` with `d0 = min(Euclidean, 1)`.
    Cube { dim: usize },
    /// Finitely many atoms with a distance table.
    FiniteAtoms(DistanceMatrix),
    /// `{0..labels} x base` with `rho0((i,s),(j,t)) = d0(s,t)`.
    Lifted { labels: usize, base: Box<CarrierSpace> },
}

impl CarrierSpace {
    pub fn cube(dim: usize) -> Self {
        if dim == 1 {
            CarrierSpace::Interval
        } else {
            CarrierSpace::Cube { dim }
        }
    }

    pub fn finite_atoms(rows: &[Vec<f64>]) -> Result<Self> {
        DistanceMatrix::new(rows).map(CarrierSpace::FiniteAtoms)
    }

    pub fn lifted(labels: usize, base: CarrierSpace) -> Self {
        CarrierSpace::Lifted { labels, base: Box::new(base) }
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            CarrierSpace::Interval => Some(1),
            CarrierSpace::Cube { dim } => Some(*dim),
            CarrierSpace::FiniteAtoms(_) => None,
            CarrierSpace::Lifted { base, .. } => base.dim(),
        }
    }

    /// Whether `p` is a point of this space (right kind, label and coordinates in range).
    pub fn contains(&self, p: &Point) -> bool {
        match self {
            CarrierSpace::Lifted { labels, base } => {
                matches!(p.label, Some(l) if l < *labels) && base.contains(&p.base())
            }
            _ if p.label.is_some() => false,
            CarrierSpace::Interval | CarrierSpace::Cube { .. } => match p.coords() {
                Some(c) => c.len() == self.dim().unwrap_or(0) && c.iter().all(|x| (0.0..=1.0).contains(x)),
                None => false,
            },
            CarrierSpace::FiniteAtoms(dm) => matches!(p.atom_index(), Some(i) if i < dm.len()),
        }
    }

    /// `d0` (or `rho0` on lifted spaces). Points of the wrong kind are at distance 1.
    pub fn distance(&self, a: &Point, b: &Point) -> f64 {
        match self {
            CarrierSpace::Interval | CarrierSpace::Cube { .. } => match (&a.loc, &b.loc) {
                (Loc::Site(x), Loc::Site(y)) => {
                    let s: f64 = x.iter().zip(y.iter()).map(|(p, q)| (p - q) * (p - q)).sum();
                    s.sqrt().min(1.0)
                }
                _ => 1.0,
            },
            CarrierSpace::FiniteAtoms(dm) => match (&a.loc, &b.loc) {
                (&Loc::Atom(i), &Loc::Atom(j)) if i < dm.len() && j < dm.len() => dm.get(i, j),
                _ => 1.0,
            },
            CarrierSpace::Lifted { base, .. } => base.distance(a, b),
        }
    }

    /// The atom table when this space (or its lifted base) is finite.
    pub fn atom_table(&self) -> Option<&DistanceMatrix> {
        match self {
            CarrierSpace::FiniteAtoms(dm) => Some(dm),
            CarrierSpace::Lifted { base, .. } => base.atom_table(),
            _ => None,
        }
    }
}

/// A finite multiset of carrier points. Equality ignores order.
#[derive(Clone, Debug, Default)]
pub struct Configuration {
    points: Vec<Point>,
}

impl PartialEq for Configuration {
    fn eq(&self, other: &Self) -> bool {
        if self.points.len() != other.points.len() {
            return false;
        }
        let a = self.sorted_points();
        let b = other.sorted_points();
        a.iter().zip(&b).all(|(p, q)| p.total_cmp(q) == Ordering::Equal)
    }
}

impl FromIterator<Point> for Configuration {
    fn from_iter<I: IntoIterator<Item = Point>>(iter: I) -> Self {
        Configuration { points: iter.into_iter().collect() }
    }
}

impl Configuration {
    pub fn new(points: Vec<Point>) -> Self {
        Configuration { points }
    }

    pub fn empty() -> Self {
        Configuration::default()
    }

    /// Points on the line.
    pub fn on_line(xs: &[f64]) -> Self {
        xs.iter().map(|&x| Point::at(x)).collect()
    }

    /// Atom configuration with the given multiplicities.
    pub fn from_counts(counts: &[u32]) -> Self {
        counts
            .iter()
            .enumerate()
            .flat_map(|(i, &c)| std::iter::repeat_n(Point::atom(i), c as usize))
            .collect()
    }

    /// Multiplicities of atoms `0..k`; non-atom points and atoms `>= k` are ignored.
    pub fn counts(&self, k: usize) -> Vec<u32> {
        let mut c = vec![0u32; k];
        for p in &self.points {
            if let Some(i) = p.atom_index() {
                if i < k {
                    c[i] += 1;
                }
            }
        }
        c
    }

    /// Total mass `|xi|`.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Point> {
        self.points.iter()
    }

    pub fn push(&mut self, p: Point) {
        self.points.push(p);
    }

    /// Removes the point at `index`, keeping the order of the others.
    pub fn remove_at(&mut self, index: usize) -> Point {
        self.points.remove(index)
    }

    /// `xi + delta_x`.
    pub fn with_point(&self, p: Point) -> Self {
        let mut out = self.clone();
        out.points.push(p);
        out
    }

    /// `xi - delta_x`, or `None` when `x` is not a point of `xi`.
    pub fn without(&self, p: &Point) -> Option<Self> {
        let i = self.points.iter().position(|q| q.total_cmp(p) == Ordering::Equal)?;
        let mut out = self.clone();
        out.points.remove(i);
        Some(out)
    }

    /// `xi + eta`.
    pub fn sum(&self, other: &Configuration) -> Self {
        let mut out = self.clone();
        out.points.extend(other.points.iter().cloned());
        out
    }

    /// Drops labels (projection from a lifted space to its base).
    pub fn project(&self) -> Self {
        self.points.iter().map(Point::base).collect()
    }

    /// Whether no point is repeated.
    pub fn is_simple(&self) -> bool {
        let s = self.sorted_points();
        s.windows(2).all(|w| w[0].total_cmp(&w[1]) != Ordering::Equal)
    }

    pub fn sorted_points(&self) -> Vec<Point> {
        let mut s = self.points.clone();
        s.sort_by(Point::total_cmp);
        s
    }

    /// Multiset inclusion.
    pub fn is_subset_of(&self, other: &Configuration) -> bool {
        let mut rest = other.clone();
        self.points.iter().all(|p| match rest.without(p) {
            Some(r) => {
                rest = r;
                true
            }
            None => false,
        })
    }
}

// Above this size, configurations on finite atoms are compared through their
// count vectors (a k x k transport) instead of an n x n assignment.
const COUNT_ROUTE_MIN_POINTS: usize = 8;

/// `rho_1(xi1, xi2)` on `space`.
pub fn rho1(xi1: &Configuration, xi2: &Configuration, space: &CarrierSpace) -> f64 {
    let m = xi1.len();
    if m != xi2.len() {
        return 1.0;
    }
    if m == 0 {
        return 0.0;
    }
    if let CarrierSpace::FiniteAtoms(dm) = space {
        if m > COUNT_ROUTE_MIN_POINTS && m > dm.len() {
            return rho1_counts(dm, &xi1.counts(dm.len()), &xi2.counts(dm.len()));
        }
    }
    let cost = CostMatrix::from_fn(m, m, |i, j| space.distance(&xi1.points[i], &xi2.points[j]));
    solve_assignment(&cost).cost / m as f64
}

/// `d'_1(xi1, xi2)`: injective matching of the smaller configuration into the larger plus the count difference.
pub fn d1_prime(xi1: &Configuration, xi2: &Configuration, space: &CarrierSpace) -> f64 {
    let (small, large) = if xi1.len() <= xi2.len() { (xi1, xi2) } else { (xi2, xi1) };
    let n = small.len();
    let m = large.len();
    if n == 0 {
        return m as f64;
    }
    if let CarrierSpace::FiniteAtoms(dm) = space {
        if n > COUNT_ROUTE_MIN_POINTS && n > dm.len() {
            return d1_prime_counts(dm, &small.counts(dm.len()), &large.counts(dm.len()));
        }
    }
    let cost = CostMatrix::from_fn(m, n, |i, j| space.distance(&small.points[j], &large.points[i]));
    solve_assignment(&cost).cost + (m - n) as f64
}

/// `rho_1` between two atom-count vectors of equal total.
pub fn rho1_counts(dm: &DistanceMatrix, a: &[u32], b: &[u32]) -> f64 {
    let na: u32 = a.iter().sum();
    let nb: u32 = b.iter().sum();
    if na != nb {
        return 1.0;
    }
    if na == 0 {
        return 0.0;
    }
    count_transport(dm, a, b, false) / na as f64
}

/// `d'_1` between two atom-count vectors.
pub fn d1_prime_counts(dm: &DistanceMatrix, a: &[u32], b: &[u32]) -> f64 {
    let na: u32 = a.iter().sum();
    let nb: u32 = b.iter().sum();
    let (small, large) = if na <= nb { (a, b) } else { (b, a) };
    if na.min(nb) == 0 {
        return na.max(nb) as f64;
    }
    count_transport(dm, small, large, true)
}

// Transport between count vectors; with `pad` the smaller side gets a dummy
// source of the missing mass at cost 1, which adds exactly (m - n).
fn count_transport(dm: &DistanceMatrix, small: &[u32], large: &[u32], pad: bool) -> f64 {
    let rows: Vec<usize> = (0..small.len()).filter(|&i| small[i] > 0).collect();
    let cols: Vec<usize> = (0..large.len()).filter(|&j| large[j] > 0).collect();
    let mut supply: Vec<f64> = rows.iter().map(|&i| small[i] as f64).collect();
    let demand: Vec<f64> = cols.iter().map(|&j| large[j] as f64).collect();
    let ns: f64 = supply.iter().sum();
    let nl: f64 = demand.iter().sum();
    let extra = pad && nl > ns;
    if extra {
        supply.push(nl - ns);
    }
    let cost = CostMatrix::from_fn(supply.len(), cols.len(), |i, j| {
        if i == rows.len() {
            1.0
        } else {
            dm.get(rows[i], cols[j])
        }
    });
    // Integral masses on a tiny instance: the simplex cannot fail here.
    solve_transport(&supply, &demand, &cost).expect("count transport").cost
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use stein_oracle::{d1_prime_brute, rho1_brute};

    fn line(xs: &[f64]) -> Configuration {
        Configuration::on_line(xs)
    }

    #[test]
    fn rho1_examples() {
        let s = CarrierSpace::Interval;
        assert_eq!(rho1(&line(&[0.2]), &line(&[0.2, 0.5]), &s), 1.0);
        assert_eq!(rho1(&Configuration::empty(), &Configuration::empty(), &s), 0.0);
        let xi = line(&[0.3, 0.9, 0.1]);
        assert_eq!(rho1(&xi, &xi, &s), 0.0);
        let v = rho1(&line(&[0.2, 0.5]), &line(&[0.25, 0.5]), &s);
        assert!((v - 0.025).abs() < 1e-15);
    }

    #[test]
    fn d1_prime_examples() {
        let s = CarrierSpace::Interval;
        assert_eq!(d1_prime(&Configuration::empty(), &line(&[0.4]), &s), 1.0);
        let v = d1_prime(&line(&[0.2, 0.5]), &line(&[0.25]), &s);
        assert!((v - 1.05).abs() < 1e-15);
        let xi = line(&[0.3, 0.7]);
        assert_eq!(d1_prime(&xi, &xi, &s), 0.0);
    }

    #[test]
    fn lifted_pseudo_metric() {
        let s = CarrierSpace::lifted(3, CarrierSpace::Interval);
        let a = Point::at(0.4).with_label(0);
        let b = Point::at(0.4).with_label(2);
        assert_eq!(s.distance(&a, &b), 0.0);
        assert!(s.contains(&a));
        assert!(!s.contains(&Point::at(0.4).with_label(3)));
        let xi1 = Configuration::new(vec![a.clone()]);
        let xi2 = Configuration::new(vec![b.clone()]);
        assert_ne!(xi1, xi2);
        assert_eq!(rho1(&xi1, &xi2, &s), 0.0);
    }

    #[test]
    fn distance_matrix_validation() {
        assert!(DistanceMatrix::new(&[vec![0.0, 0.5], vec![0.4, 0.0]]).is_err());
        assert!(DistanceMatrix::new(&[vec![0.0, 1.5], vec![1.5, 0.0]]).is_err());
        assert!(DistanceMatrix::new(&[
            vec![0.0, 0.1, 0.9],
            vec![0.1, 0.0, 0.1],
            vec![0.9, 0.1, 0.0]
        ])
        .is_err());
        assert!(DistanceMatrix::new(&[vec![0.0, 0.0], vec![0.0, 0.0]]).is_ok());
    }

    #[test]
    fn multiset_equality_and_ops() {
        let a = line(&[0.1, 0.5, 0.5]);
        let b = line(&[0.5, 0.1, 0.5]);
        assert_eq!(a, b);
        assert_ne!(a, line(&[0.1, 0.5]));
        let c = a.with_point(Point::at(0.7));
        assert_eq!(c.len(), a.len() + 1);
        let d = c.without(&Point::at(0.5)).unwrap();
        assert_eq!(d.len(), c.len() - 1);
        assert!(d.without(&Point::at(0.33)).is_none());
        assert!(!a.is_simple());
        assert!(line(&[0.1, 0.5]).is_subset_of(&a));
        assert!(!line(&[0.1, 0.1]).is_subset_of(&a));
    }

    #[test]
    fn counts_round_trip() {
        let c = Configuration::from_counts(&[2, 0, 1]);
        assert_eq!(c.len(), 3);
        assert_eq!(c.counts(3), vec![2, 0, 1]);
    }

    #[test]
    fn count_route_agrees_with_assignment() {
        let dm = DistanceMatrix::from_line(&[0.0, 0.2, 0.45, 0.9]);
        let space = CarrierSpace::FiniteAtoms(dm.clone());
        for (a, b) in [([3u32, 0, 4, 5], [1u32, 6, 2, 3]), ([0, 0, 12, 0], [4, 4, 0, 4])] {
            let xa = Configuration::from_counts(&a);
            let xb = Configuration::from_counts(&b);
            let cost = CostMatrix::from_fn(12, 12, |i, j| space.distance(&xa.points()[i], &xb.points()[j]));
            let direct = solve_assignment(&cost).cost / 12.0;
            assert!((rho1(&xa, &xb, &space) - direct).abs() < 1e-12);
            assert!((rho1_counts(&dm, &a, &b) - direct).abs() < 1e-12);
        }
        let a = [2u32, 1, 0, 0];
        let b = [0u32, 3, 4, 5];
        let xa = Configuration::from_counts(&a);
        let xb = Configuration::from_counts(&b);
        let brute = {
            let cost = CostMatrix::from_fn(12, 3, |i, j| space.distance(&xa.points()[j], &xb.points()[i]));
            solve_assignment(&cost).cost + 9.0
        };
        assert!((d1_prime_counts(&dm, &a, &b) - brute).abs() < 1e-12);
    }

    fn arb_line_config(max: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, 0..=max)
    }

    proptest! {
        #[test]
        fn rho1_matches_brute(xs in arb_line_config(5), ys in arb_line_config(5)) {
            let s = CarrierSpace::Interval;
            let want = rho1_brute(&xs, &ys, |a, b| (a - b).abs().min(1.0));
            prop_assert!((rho1(&line(&xs), &line(&ys), &s) - want).abs() <= 1e-12);
            let want = d1_prime_brute(&xs, &ys, |a, b| (a - b).abs().min(1.0));
            prop_assert!((d1_prime(&line(&xs), &line(&ys), &s) - want).abs() <= 1e-12);
        }

        #[test]
        fn metric_axioms(xs in arb_line_config(4), ys in arb_line_config(4), zs in arb_line_config(4)) {
            let s = CarrierSpace::Interval;
            let (a, b, c) = (line(&xs), line(&ys), line(&zs));
            for dist in [rho1 as fn(&Configuration, &Configuration, &CarrierSpace) -> f64, d1_prime] {
                let ab = dist(&a, &b, &s);
                prop_assert!((ab - dist(&b, &a, &s)).abs() <= 1e-12);
                prop_assert!(ab <= dist(&a, &c, &s) + dist(&c, &b, &s) + 1e-12);
            }
            prop_assert!(rho1(&a, &b, &s) <= 1.0);
            prop_assert!(d1_prime(&a, &b, &s) >= (xs.len() as f64 - ys.len() as f64).abs());
        }
    }
}
