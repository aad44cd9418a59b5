//! Brute-force reference computations.
//!
//! Everything here is deliberately naive: exhaustive enumeration over
//! permutations, subsets and outcome vectors. These functions exist only to
//! cross-check the solvers in `stein-poisson` and share no code with them.

/// Calls `visit` with every injective map from `0..n` into `0..m` (as a slice
/// of row indices, one per column), in lexicographic order.
pub fn for_each_injection(m: usize, n: usize, mut visit: impl FnMut(&[usize])) {
    fn rec(m: usize, n: usize, used: &mut Vec<bool>, cur: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
        if cur.len() == n {
            visit(cur);
            return;
        }
        for r in 0..m {
            if !used[r] {
                used[r] = true;
                cur.push(r);
                rec(m, n, used, cur, visit);
                cur.pop();
                used[r] = false;
            }
        }
    }
    assert!(n <= m, "injection needs n <= m");
    let mut used = vec![false; m];
    let mut cur = Vec::with_capacity(n);
    rec(m, n, &mut used, &mut cur, &mut visit);
}

/// Minimum over injections of columns into rows of `sum_j cost[row(j)][j]`.
/// `cost` is row-major with `m` rows and `n <= m` columns.
pub fn brute_force_assignment(cost: &[Vec<f64>]) -> (f64, Vec<usize>) {
    let m = cost.len();
    if m == 0 {
        return (0.0, Vec::new());
    }
    let n = cost[0].len();
    let mut best = f64::INFINITY;
    let mut best_map = Vec::new();
    for_each_injection(m, n, |map| {
        let c: f64 = map.iter().enumerate().map(|(j, &r)| cost[r][j]).sum();
        if c < best {
            best = c;
            best_map = map.to_vec();
        }
    });
    (best, best_map)
}

/// rho_1 between two point lists by trying every permutation.
pub fn rho1_brute<P>(xs: &[P], ys: &[P], d0: impl Fn(&P, &P) -> f64) -> f64 {
    if xs.len() != ys.len() {
        return 1.0;
    }
    if xs.is_empty() {
        return 0.0;
    }
    let cost: Vec<Vec<f64>> = xs.iter().map(|x| ys.iter().map(|y| d0(x, y)).collect()).collect();
    brute_force_assignment(&cost).0 / xs.len() as f64
}

/// d'_1 by trying every injection of the smaller list into the larger one.
pub fn d1_prime_brute<P>(xs: &[P], ys: &[P], d0: impl Fn(&P, &P) -> f64) -> f64 {
    let (small, large) = if xs.len() <= ys.len() { (xs, ys) } else { (ys, xs) };
    if small.is_empty() {
        return large.len() as f64;
    }
    let cost: Vec<Vec<f64>> = large.iter().map(|z| small.iter().map(|y| d0(y, z)).collect()).collect();
    brute_force_assignment(&cost).0 + (large.len() - small.len()) as f64
}

/// Poisson point probability from the textbook formula, evaluated in log space.
pub fn poisson_point(lambda: f64, w: usize) -> f64 {
    if lambda == 0.0 {
        return if w == 0 { 1.0 } else { 0.0 };
    }
    let ln_fact: f64 = (1..=w).map(|k| (k as f64).ln()).sum();
    (-lambda + w as f64 * lambda.ln() - ln_fact).exp()
}

/// P(Po(lambda) <= n).
pub fn poisson_cdf(lambda: f64, n: usize) -> f64 {
    (0..=n).map(|w| poisson_point(lambda, w)).sum()
}

/// Law of a sum of independent Bernoulli variables by enumerating all 2^n outcomes.
pub fn poisson_binomial_enumerate(p: &[f64]) -> Vec<f64> {
    let n = p.len();
    assert!(n <= 24, "enumeration is exponential");
    let mut pmf = vec![0.0; n + 1];
    for mask in 0u32..(1u32 << n) {
        let mut prob = 1.0;
        for (i, &pi) in p.iter().enumerate() {
            prob *= if mask >> i & 1 == 1 { pi } else { 1.0 - pi };
        }
        pmf[mask.count_ones() as usize] += prob;
    }
    pmf
}

/// E[1 / (sum_{j != i} X_j + 1)] by enumeration.
pub fn reciprocal_count_enumerate(p: &[f64], i: usize) -> f64 {
    let others: Vec<f64> = p.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &x)| x).collect();
    poisson_binomial_enumerate(&others)
        .iter()
        .enumerate()
        .map(|(k, &q)| q / (k as f64 + 1.0))
        .sum()
}

/// Total variation as a supremum over events: the event {P > Q} attains it,
/// so the value is sum of (P - Q)^+ over a common support (missing entries = 0).
pub fn tv_sup_over_sets(p: &[f64], q: &[f64]) -> f64 {
    let len = p.len().max(q.len());
    let get = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    (0..len).map(|i| (get(p, i) - get(q, i)).max(0.0)).sum()
}

/// Stein solution for the indicator of `a` (elements > `n` decided by `cofinal`), from the
/// closed form f(w+1) = [Po(A ∩ {0..w}) - Po(A) Po({0..w})] / (lambda * Po({w})).
/// Evaluated with a long Poisson table so that Po(A) is essentially exact.
pub fn stein_solution_closed_form(a: &[bool], cofinal: bool, lambda: f64, w: usize) -> f64 {
    if w == 0 {
        return 0.0;
    }
    let top = a.len().max(w) + 200 + (lambda * 4.0) as usize;
    let pmf: Vec<f64> = (0..=top).map(|k| poisson_point(lambda, k)).collect();
    let member = |k: usize| if k < a.len() { a[k] } else { cofinal };
    let po_a: f64 = (0..=top).filter(|&k| member(k)).map(|k| pmf[k]).sum();
    let v = w - 1;
    let a_cap: f64 = (0..=v).filter(|&k| member(k)).map(|k| pmf[k]).sum();
    let u: f64 = (0..=v).map(|k| pmf[k]).sum();
    (a_cap - po_a * u) / (lambda * pmf[v])
}

/// Mean of the immigration-death count started from `w0`: w0 e^{-t} + lambda (1 - e^{-t}).
pub fn imdeath_mean(w0: f64, lambda: f64, t: f64) -> f64 {
    w0 * (-t).exp() + lambda * (1.0 - (-t).exp())
}

/// Renewal density on slots 1..=horizon: u(t) = g(t) + sum_{s<t} u(s) f(t - s).
/// `g[k-1]`, `f[k-1]` are the probabilities of value `k`.
#[allow(clippy::needless_range_loop)]
pub fn renewal_intensity_dp(g: &[f64], f: &[f64], horizon: usize) -> Vec<f64> {
    let at = |v: &[f64], k: usize| if k >= 1 && k <= v.len() { v[k - 1] } else { 0.0 };
    let mut u = vec![0.0; horizon + 1];
    for t in 1..=horizon {
        let mut acc = at(g, t);
        for s in 1..t {
            acc += u[s] * at(f, t - s);
        }
        u[t] = acc;
    }
    u[1..].to_vec()
}

/// All subsets of `0..n` as membership vectors.
pub fn all_subsets(n: usize) -> impl Iterator<Item = Vec<bool>> {
    (0u64..(1u64 << n)).map(move |mask| (0..n).map(|i| mask >> i & 1 == 1).collect())
}
