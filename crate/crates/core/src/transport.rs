//! Exact solver for the discrete transportation problem.
//!
//! Primal network simplex on the bipartite supply/demand graph with real
//! costs and real masses. The basis is a spanning tree of `m + n - 1` cells
//! (degenerate cells carry zero flow). Pricing is a deterministic block
//! search, so repeated solves of the same instance pivot identically.
//!
//! The optimal row/column potentials are returned: they are a feasible dual
//! (`u_i + v_j <= c_ij`) whose objective matches the primal cost, which is the
//! Kantorovich witness used by callers to certify results.

use crate::error::{Error, Result};

/// Dense row-major cost matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "cost matrix shape mismatch");
        CostMatrix { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CostMatrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let data = rows.iter().flat_map(|row| {
            assert_eq!(row.len(), c, "ragged cost matrix");
            row.iter().copied()
        });
        CostMatrix { rows: r, cols: c, data: data.collect() }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }
}

/// Optimal plan with certifying potentials.
#[derive(Clone, Debug)]
pub struct TransportSolution {
    pub cost: f64,
    /// Nonzero flows `(row, col, mass)`.
    pub flows: Vec<(usize, usize, f64)>,
    pub row_potentials: Vec<f64>,
    pub col_potentials: Vec<f64>,
    pub pivots: usize,
}

impl TransportSolution {
    /// `sum_i a_i u_i + sum_j b_j v_j`.
    pub fn dual_objective(&self, supply: &[f64], demand: &[f64]) -> f64 {
        let a: f64 = supply.iter().zip(&self.row_potentials).map(|(x, u)| x * u).sum();
        let b: f64 = demand.iter().zip(&self.col_potentials).map(|(x, v)| x * v).sum();
        a + b
    }

    /// Largest violation of `u_i + v_j <= c_ij` (0 when dual feasible).
    pub fn dual_infeasibility(&self, cost: &CostMatrix) -> f64 {
        let mut worst = 0.0f64;
        for (i, u) in self.row_potentials.iter().enumerate() {
            for (j, v) in self.col_potentials.iter().enumerate() {
                worst = worst.max(u + v - cost.get(i, j));
            }
        }
        worst
    }
}

const MAX_PIVOT_FACTOR: usize = 200;

/// Minimises `sum c_ij x_ij` subject to row sums `supply` and column sums `demand`.
///
/// Totals must agree to a relative `1e-9`; the demand vector is rescaled to
/// the supply total before solving. Costs must be finite.
pub fn solve_transport(supply: &[f64], demand: &[f64], cost: &CostMatrix) -> Result<TransportSolution> {
    let m = supply.len();
    let n = demand.len();
    if cost.rows() != m || cost.cols() != n {
        return Err(Error::Config(format!(
            "cost matrix is {}x{}, expected {}x{}",
            cost.rows(),
            cost.cols(),
            m,
            n
        )));
    }
    if supply.iter().chain(demand).any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::Domain("masses must be finite and nonnegative".into()));
    }
    let sa: f64 = supply.iter().sum();
    let sb: f64 = demand.iter().sum();
    if (sa - sb).abs() > 1e-9 * sa.max(sb).max(1e-300) {
        return Err(Error::Domain(format!("unbalanced transport: supply {sa} vs demand {sb}")));
    }
    if m == 0 || n == 0 || sa == 0.0 {
        return Ok(TransportSolution {
            cost: 0.0,
            flows: Vec::new(),
            row_potentials: vec![0.0; m],
            col_potentials: vec![0.0; n],
            pivots: 0,
        });
    }
    let scale = sa / sb;
    let demand: Vec<f64> = demand.iter().map(|b| b * scale).collect();

    // Work on the rows/columns with positive mass; the rest get potentials afterwards.
    let rows: Vec<usize> = (0..m).filter(|&i| supply[i] > 0.0).collect();
    let cols: Vec<usize> = (0..n).filter(|&j| demand[j] > 0.0).collect();
    let sub = CostMatrix::from_fn(rows.len(), cols.len(), |i, j| cost.get(rows[i], cols[j]));
    let a: Vec<f64> = rows.iter().map(|&i| supply[i]).collect();
    let b: Vec<f64> = cols.iter().map(|&j| demand[j]).collect();

    let mut simplex = Simplex::new(&a, &b, &sub);
    simplex.run()?;

    let mut row_potentials = vec![0.0; m];
    let mut col_potentials = vec![0.0; n];
    for (k, &i) in rows.iter().enumerate() {
        row_potentials[i] = simplex.u[k];
    }
    for (k, &j) in cols.iter().enumerate() {
        col_potentials[j] = simplex.v[k];
    }
    // Zero-mass rows/columns do not affect the objective; give them the largest
    // potential that keeps the dual feasible.
    for i in (0..m).filter(|&i| supply[i] <= 0.0) {
        row_potentials[i] = cols
            .iter()
            .map(|&j| cost.get(i, j) - col_potentials[j])
            .fold(f64::INFINITY, f64::min);
        if !row_potentials[i].is_finite() {
            row_potentials[i] = 0.0;
        }
    }
    for j in (0..n).filter(|&j| demand[j] <= 0.0) {
        col_potentials[j] = (0..m)
            .map(|i| cost.get(i, j) - row_potentials[i])
            .fold(f64::INFINITY, f64::min);
        if !col_potentials[j].is_finite() {
            col_potentials[j] = 0.0;
        }
    }

    let mut flows = Vec::new();
    let mut total = 0.0;
    for (k, &(i, j)) in simplex.basis.iter().enumerate() {
        let x = simplex.flow[k];
        if x > 0.0 {
            total += x * sub.get(i, j);
            flows.push((rows[i], cols[j], x));
        }
    }
    flows.sort_by_key(|p| (p.0, p.1));
    Ok(TransportSolution { cost: total, flows, row_potentials, col_potentials, pivots: simplex.pivots })
}

struct Simplex<'a> {
    m: usize,
    n: usize,
    cost: &'a CostMatrix,
    basis: Vec<(usize, usize)>,
    flow: Vec<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
    eps: f64,
    pivots: usize,
    // tree scratch: nodes 0..m are rows, m..m+n are columns
    adj_start: Vec<usize>,
    adj: Vec<(usize, usize)>,
    parent: Vec<usize>,
    parent_edge: Vec<usize>,
    depth: Vec<usize>,
    next_block: usize,
}

impl<'a> Simplex<'a> {
    fn new(a: &[f64], b: &[f64], cost: &'a CostMatrix) -> Self {
        let m = a.len();
        let n = b.len();
        let (basis, flow) = initial_basis(a, b, cost);
        let nodes = m + n;
        Simplex {
            m,
            n,
            cost,
            basis,
            flow,
            u: vec![0.0; m],
            v: vec![0.0; n],
            eps: 1e-12 * (1.0 + cost.max_abs()),
            pivots: 0,
            adj_start: vec![0; nodes + 1],
            adj: vec![(0, 0); 2 * (nodes - 1)],
            parent: vec![usize::MAX; nodes],
            parent_edge: vec![usize::MAX; nodes],
            depth: vec![0; nodes],
            next_block: 0,
        }
    }

    fn build_tree(&mut self) -> Result<()> {
        let nodes = self.m + self.n;
        self.adj_start.iter_mut().for_each(|s| *s = 0);
        for &(i, j) in &self.basis {
            self.adj_start[i + 1] += 1;
            self.adj_start[self.m + j + 1] += 1;
        }
        for k in 0..nodes {
            self.adj_start[k + 1] += self.adj_start[k];
        }
        let mut fill = self.adj_start.clone();
        for (e, &(i, j)) in self.basis.iter().enumerate() {
            let cj = self.m + j;
            self.adj[fill[i]] = (cj, e);
            fill[i] += 1;
            self.adj[fill[cj]] = (i, e);
            fill[cj] += 1;
        }
        self.parent.iter_mut().for_each(|p| *p = usize::MAX);
        let mut stack = vec![0usize];
        self.parent[0] = 0;
        self.parent_edge[0] = usize::MAX;
        self.depth[0] = 0;
        self.u[0] = 0.0;
        let mut seen = 1;
        while let Some(node) = stack.pop() {
            for k in self.adj_start[node]..self.adj_start[node + 1] {
                let (next, e) = self.adj[k];
                if self.parent[next] != usize::MAX {
                    continue;
                }
                self.parent[next] = node;
                self.parent_edge[next] = e;
                self.depth[next] = self.depth[node] + 1;
                let (i, j) = self.basis[e];
                let c = self.cost.get(i, j);
                if next >= self.m {
                    self.v[next - self.m] = c - self.u[node];
                } else {
                    self.u[next] = c - self.v[node - self.m];
                }
                seen += 1;
                stack.push(next);
            }
        }
        if seen != nodes {
            return Err(Error::Solver("basis is not a spanning tree".into()));
        }
        Ok(())
    }

    /// Block search: scan blocks of cells in a fixed cyclic order, take the
    /// most negative reduced cost of the first block that has one.
    fn price(&mut self) -> Option<(usize, usize)> {
        let total = self.m * self.n;
        let block = ((total as f64).sqrt() as usize).max(self.m + self.n).min(total);
        let mut scanned = 0;
        let mut pos = self.next_block % total;
        while scanned < total {
            let mut best = -self.eps;
            let mut best_cell = None;
            let end = (scanned + block).min(total);
            while scanned < end {
                let i = pos / self.n;
                let j = pos % self.n;
                let rc = self.cost.get(i, j) - self.u[i] - self.v[j];
                if rc < best {
                    best = rc;
                    best_cell = Some((i, j));
                }
                pos += 1;
                if pos == total {
                    pos = 0;
                }
                scanned += 1;
            }
            if best_cell.is_some() {
                self.next_block = pos;
                return best_cell;
            }
        }
        None
    }

    fn run(&mut self) -> Result<()> {
        let limit = MAX_PIVOT_FACTOR * (self.m + self.n) * (self.m + self.n).max(10);
        loop {
            self.build_tree()?;
            let Some((ei, ej)) = self.price() else {
                return Ok(());
            };
            self.pivot(ei, ej);
            self.pivots += 1;
            if self.pivots > limit {
                return Err(Error::Solver(format!("no convergence after {} pivots", self.pivots)));
            }
        }
    }

    fn pivot(&mut self, ei: usize, ej: usize) {
        // Cycle = entering edge + tree path from column ej to row ei.
        // Edges on the path alternate -, +, -, ... starting at ej.
        let mut left = self.m + ej;
        let mut right = ei;
        let mut from_col = Vec::new();
        let mut from_row = Vec::new();
        while self.depth[left] > self.depth[right] {
            from_col.push(self.parent_edge[left]);
            left = self.parent[left];
        }
        while self.depth[right] > self.depth[left] {
            from_row.push(self.parent_edge[right]);
            right = self.parent[right];
        }
        while left != right {
            from_col.push(self.parent_edge[left]);
            left = self.parent[left];
            from_row.push(self.parent_edge[right]);
            right = self.parent[right];
        }
        from_row.reverse();
        let path: Vec<usize> = from_col.into_iter().chain(from_row).collect();

        let mut theta = f64::INFINITY;
        let mut leave = usize::MAX;
        for (k, &e) in path.iter().enumerate() {
            if k % 2 == 0 && self.flow[e] < theta {
                theta = self.flow[e];
                leave = k;
            }
        }
        for (k, &e) in path.iter().enumerate() {
            if k % 2 == 0 {
                self.flow[e] -= theta;
            } else {
                self.flow[e] += theta;
            }
        }
        let out = path[leave];
        self.basis[out] = (ei, ej);
        self.flow[out] = theta;
    }
}

/// Row-minimum greedy start: each row in turn fills its cheapest open
/// columns. Every cell closes exactly one row or column (the last closes
/// both), which yields `m + n - 1` cells forming a spanning tree.
fn initial_basis(a: &[f64], b: &[f64], cost: &CostMatrix) -> (Vec<(usize, usize)>, Vec<f64>) {
    let m = a.len();
    let n = b.len();
    let mut ra = a.to_vec();
    let mut rb = b.to_vec();
    let mut row_done = vec![false; m];
    let mut col_done = vec![false; n];
    let mut basis = Vec::with_capacity(m + n - 1);
    let mut flow = Vec::with_capacity(m + n - 1);

    let mut open_rows = m;
    let mut open_cols = n;
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for i in 0..m {
        order.clear();
        order.extend((0..n).filter(|&j| !col_done[j]));
        order.sort_by(|&p, &q| cost.get(i, p).total_cmp(&cost.get(i, q)).then(p.cmp(&q)));
        for &j in &order {
            if row_done[i] {
                break;
            }
            if col_done[j] {
                continue;
            }
            let x = ra[i].min(rb[j]);
            basis.push((i, j));
            flow.push(x);
            ra[i] -= x;
            rb[j] -= x;
            // close exactly one line per cell, except the very last cell
            let last = open_rows == 1 && open_cols == 1;
            if last {
                row_done[i] = true;
                col_done[j] = true;
                open_rows -= 1;
                open_cols -= 1;
            } else if (ra[i] <= rb[j] && open_rows > 1) || open_cols == 1 {
                row_done[i] = true;
                open_rows -= 1;
                rb[j] = rb[j].max(0.0);
                ra[i] = 0.0;
            } else {
                col_done[j] = true;
                open_cols -= 1;
                ra[i] = ra[i].max(0.0);
                rb[j] = 0.0;
            }
        }
        // A row can only remain open if every column closed, which the
        // open_cols == 1 rule prevents.
        debug_assert!(row_done[i]);
    }
    debug_assert_eq!(basis.len(), m + n - 1);
    (basis, flow)
}
