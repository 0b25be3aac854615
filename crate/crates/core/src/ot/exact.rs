//! Exact transportation solver: network simplex on the bipartite graph.
//!
//! Nodes are the N_S sources, the N_T targets and one artificial root.
//! Real arc (i, j) has cost C_ij; every node is initially attached to the
//! root by an artificial big-M arc, giving a strongly feasible starting
//! tree. Pivots keep the tree strongly feasible (Cunningham's last
//! blocking arc rule), which rules out cycling even on the heavily
//! degenerate instances produced by uniform marginals.
//!
//! The entering arc is the most negative reduced cost, ties broken by the
//! lowest arc index in row-major order, so runs are deterministic.

use ndarray::Array2;

use crate::data::{CostMatrix, EmpiricalMeasure};
use crate::error::{Error, Result};
use crate::ot::{Coupling, EXACT_MARGINAL_TOL};

const NO_NODE: usize = usize::MAX;

/// Minimize `<gamma, C>` over couplings of `mu_s` and `mu_t`.
///
/// Returns a vertex of the transportation polytope: at most
/// N_S + N_T - 1 entries are nonzero and the marginals hold to float
/// accumulation (validated at 1e-12).
pub fn solve_exact(
    mu_s: &EmpiricalMeasure,
    mu_t: &EmpiricalMeasure,
    c: &CostMatrix,
) -> Result<Coupling> {
    if mu_s.len() != c.n_rows() || mu_t.len() != c.n_cols() {
        return Err(Error::DimensionMismatch(format!(
            "cost is {}x{} but measures have {} and {} points",
            c.n_rows(),
            c.n_cols(),
            mu_s.len(),
            mu_t.len()
        )));
    }

    // Zero-mass support points receive no flow; solve on the positive part.
    let rows: Vec<usize> = (0..mu_s.len()).filter(|&i| mu_s.as_slice()[i] > 0.0).collect();
    let cols: Vec<usize> = (0..mu_t.len()).filter(|&j| mu_t.as_slice()[j] > 0.0).collect();
    if rows.is_empty() || cols.is_empty() {
        return Err(Error::InvalidMeasure("measure has zero total mass".into()));
    }

    let a: Vec<f64> = rows.iter().map(|&i| mu_s.as_slice()[i]).collect();
    let b: Vec<f64> = cols.iter().map(|&j| mu_t.as_slice()[j]).collect();
    let mut cost = Array2::zeros((rows.len(), cols.len()));
    for (ii, &i) in rows.iter().enumerate() {
        for (jj, &j) in cols.iter().enumerate() {
            cost[[ii, jj]] = c.values()[[i, j]];
        }
    }

    let flow = Simplex::new(&a, &b, &cost).run()?;

    let mut full = Array2::zeros((mu_s.len(), mu_t.len()));
    for (ii, &i) in rows.iter().enumerate() {
        for (jj, &j) in cols.iter().enumerate() {
            full[[i, j]] = flow[[ii, jj]];
        }
    }
    Coupling::new(full, mu_s.clone(), mu_t.clone(), EXACT_MARGINAL_TOL)
}

/// Transportation network simplex over strictly positive supplies/demands.
struct Simplex<'a> {
    m: usize,
    n: usize,
    cost: &'a Array2<f64>,
    a: &'a [f64],
    b: &'a [f64],
    big: f64,
    eps: f64,
    // Arc ids: k < m*n is the real arc (k / n, k % n); k = m*n + v is the
    // artificial arc attaching node v to the root.
    flow: Vec<f64>,
    in_tree: Vec<bool>,
    // Tree arrays over nodes 0..m (sources), m..m+n (targets), m+n (root).
    parent: Vec<usize>,
    pred: Vec<usize>,
    depth: Vec<usize>,
    pi: Vec<f64>,
    children: Vec<Vec<usize>>,
}

impl<'a> Simplex<'a> {
    fn new(a: &'a [f64], b: &'a [f64], cost: &'a Array2<f64>) -> Self {
        let m = a.len();
        let n = b.len();
        let n_nodes = m + n + 1;
        let n_arcs = m * n + m + n;
        let max_cost = cost.iter().fold(0.0f64, |acc, &v| acc.max(v));
        let big = (max_cost + 1.0) * (m + n + 1) as f64;
        let eps = 1e-10 * (1.0 + max_cost);

        let mut s = Simplex {
            m,
            n,
            cost,
            a,
            b,
            big,
            eps,
            flow: vec![0.0; n_arcs],
            in_tree: vec![false; n_arcs],
            parent: vec![NO_NODE; n_nodes],
            pred: vec![usize::MAX; n_nodes],
            depth: vec![0; n_nodes],
            pi: vec![0.0; n_nodes],
            children: vec![Vec::new(); n_nodes],
        };
        s.init_star_tree();
        s
    }

    fn root(&self) -> usize {
        self.m + self.n
    }

    fn tail(&self, arc: usize) -> usize {
        if arc < self.m * self.n {
            arc / self.n
        } else {
            let v = arc - self.m * self.n;
            if v < self.m {
                v // source -> root
            } else {
                self.root() // root -> target
            }
        }
    }

    fn head(&self, arc: usize) -> usize {
        if arc < self.m * self.n {
            self.m + arc % self.n
        } else {
            let v = arc - self.m * self.n;
            if v < self.m {
                self.root()
            } else {
                v
            }
        }
    }

    fn arc_cost(&self, arc: usize) -> f64 {
        if arc < self.m * self.n {
            self.cost[[arc / self.n, arc % self.n]]
        } else {
            self.big
        }
    }

    /// Star tree on the artificial arcs: sources point up to the root with
    /// flow a_i, targets hang below it with flow b_j. All flows are
    /// positive, so the tree starts strongly feasible.
    fn init_star_tree(&mut self) {
        let root = self.root();
        let base = self.m * self.n;
        for v in 0..self.m + self.n {
            let arc = base + v;
            self.parent[v] = root;
            self.pred[v] = arc;
            self.depth[v] = 1;
            self.in_tree[arc] = true;
            self.flow[arc] = if v < self.m { self.a[v] } else { self.b[v - self.m] };
        }
        self.rebuild_tree_arrays();
    }

    /// Recompute children lists, depths and potentials from parent/pred.
    fn rebuild_tree_arrays(&mut self) {
        let root = self.root();
        for ch in self.children.iter_mut() {
            ch.clear();
        }
        for v in 0..root {
            self.children[self.parent[v]].push(v);
        }
        self.depth[root] = 0;
        self.pi[root] = 0.0;
        let mut stack = vec![root];
        while let Some(u) = stack.pop() {
            for idx in 0..self.children[u].len() {
                let v = self.children[u][idx];
                self.depth[v] = self.depth[u] + 1;
                let arc = self.pred[v];
                // Tree arcs have zero reduced cost: c - pi[tail] + pi[head] = 0.
                self.pi[v] = if self.tail(arc) == v {
                    self.arc_cost(arc) + self.pi[u]
                } else {
                    self.pi[u] - self.arc_cost(arc)
                };
                stack.push(v);
            }
        }
    }

    /// Potentials derived from the real basic arcs only, anchored at node 0.
    ///
    /// Once the basis holds a single artificial arc the real arcs span all
    /// bipartite nodes; dropping the big-M arc removes its magnitude from
    /// the potentials so the final optimality scan is not polluted by the
    /// rounding of `big +- cost` sums.
    fn clean_potentials(&self) -> Option<Vec<f64>> {
        let nodes = self.m + self.n;
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];
        let mut count = 0;
        for k in 0..self.m * self.n {
            if self.in_tree[k] {
                adj[self.tail(k)].push(k);
                adj[self.head(k)].push(k);
                count += 1;
            }
        }
        if count + 1 != nodes {
            return None; // more than one artificial arc still basic
        }
        let mut pi = vec![f64::NAN; nodes];
        let mut stack = vec![0usize];
        pi[0] = 0.0;
        while let Some(u) = stack.pop() {
            for &arc in &adj[u] {
                let (t, h) = (self.tail(arc), self.head(arc));
                let other = if t == u { h } else { t };
                if pi[other].is_nan() {
                    pi[other] = if t == u {
                        // c - pi[u] + pi[other] = 0
                        self.pi_from(self.arc_cost(arc), pi[u], true)
                    } else {
                        self.pi_from(self.arc_cost(arc), pi[u], false)
                    };
                    stack.push(other);
                }
            }
        }
        if pi.iter().any(|v| v.is_nan()) {
            return None; // disconnected: cannot happen with one artificial
        }
        Some(pi)
    }

    fn pi_from(&self, cost: f64, pi_known: f64, known_is_tail: bool) -> f64 {
        if known_is_tail {
            // pi[head] = pi[tail] - c
            pi_known - cost
        } else {
            // pi[tail] = c + pi[head]
            cost + pi_known
        }
    }

    /// Most negative reduced cost among nonbasic real arcs, lowest index
    /// on ties. `pi` has one slot per bipartite node (root excluded when
    /// using clean potentials; the root never borders a real arc).
    fn entering_arc(&self, pi: &[f64]) -> Option<usize> {
        let mut best = -self.eps;
        let mut best_arc = None;
        let mut k = 0;
        for i in 0..self.m {
            let pi_i = pi[i];
            let row = self.cost.row(i);
            for j in 0..self.n {
                if !self.in_tree[k] {
                    let r = row[j] - pi_i + pi[self.m + j];
                    if r < best {
                        best = r;
                        best_arc = Some(k);
                    }
                }
                k += 1;
            }
        }
        best_arc
    }

    fn run(mut self) -> Result<Array2<f64>> {
        let max_pivots = 100 * (self.m + self.n) + 10_000;
        let mut pivots = 0;
        loop {
            let entering = match self.entering_arc(&self.pi) {
                Some(arc) => Some(arc),
                None => match self.clean_potentials() {
                    Some(clean) => self.entering_arc(&clean),
                    // Multiple artificial arcs left: any real arc bridging
                    // them has reduced cost around -2*big, so the dirty
                    // scan cannot have missed it; the basis is final.
                    None => None,
                },
            };
            let Some(arc) = entering else { break };
            self.pivot(arc)?;
            pivots += 1;
            if pivots > max_pivots {
                return Err(Error::Solver(format!(
                    "network simplex exceeded {} pivots",
                    max_pivots
                )));
            }
        }
        self.extract_flows()
    }

    /// One simplex pivot on the given entering arc.
    fn pivot(&mut self, entering: usize) -> Result<()> {
        let u = self.tail(entering);
        let v = self.head(entering);

        // Tree paths from both endpoints up to their first common ancestor.
        let mut path_u: Vec<usize> = Vec::new(); // nodes below the apex on u's side
        let mut path_v: Vec<usize> = Vec::new();
        let (mut x, mut y) = (u, v);
        while self.depth[x] > self.depth[y] {
            path_u.push(x);
            x = self.parent[x];
        }
        while self.depth[y] > self.depth[x] {
            path_v.push(y);
            y = self.parent[y];
        }
        while x != y {
            path_u.push(x);
            path_v.push(y);
            x = self.parent[x];
            y = self.parent[y];
        }

        // Cycle in the orientation of the entering arc, starting at the
        // apex: down to u, across (u, v), back up to the apex. An arc is
        // forward when the traversal follows its direction.
        // Candidates are (arc, node whose pred it is, forward?).
        let mut cycle: Vec<(usize, usize, bool)> = Vec::new();
        for &node in path_u.iter().rev() {
            let arc = self.pred[node];
            // traversal parent -> node
            cycle.push((arc, node, self.head(arc) == node));
        }
        let entering_pos = cycle.len();
        cycle.push((entering, NO_NODE, true));
        for &node in path_v.iter() {
            let arc = self.pred[node];
            // traversal node -> parent
            cycle.push((arc, node, self.tail(arc) == node));
        }

        // Flow change = min flow over backward arcs; the leaving arc is the
        // last blocking arc in traversal order (keeps the tree strongly
        // feasible).
        let mut delta = f64::INFINITY;
        for &(arc, _, forward) in &cycle {
            if !forward {
                delta = delta.min(self.flow[arc]);
            }
        }
        if !delta.is_finite() {
            return Err(Error::Solver("unbounded pivot cycle".into()));
        }
        let mut leaving_pos = None;
        for (pos, &(arc, _, forward)) in cycle.iter().enumerate() {
            if !forward && self.flow[arc] == delta {
                leaving_pos = Some(pos);
            }
        }
        let leaving_pos = leaving_pos
            .ok_or_else(|| Error::Solver("degenerate cycle without blocking arc".into()))?;
        let (leaving_arc, leaving_node, _) = cycle[leaving_pos];

        for &(arc, _, forward) in &cycle {
            if forward {
                self.flow[arc] += delta;
            } else {
                self.flow[arc] -= delta;
            }
        }
        self.flow[leaving_arc] = 0.0;

        // Swap basis membership and re-hang the detached subtree at the
        // entering endpoint that lives inside it.
        self.in_tree[leaving_arc] = false;
        self.in_tree[entering] = true;
        let (attach, new_parent) = if leaving_pos < entering_pos {
            (u, v) // leaving on u's side: u's component re-roots at u
        } else {
            (v, u)
        };
        self.reroot(attach, leaving_node);
        self.parent[attach] = new_parent;
        self.pred[attach] = entering;
        self.rebuild_tree_arrays();
        Ok(())
    }

    /// Reverse parent/pred links on the path from `from` up to `top`
    /// (the node whose pred arc just left the basis).
    fn reroot(&mut self, from: usize, top: usize) {
        let mut chain = vec![from];
        let mut node = from;
        while node != top {
            node = self.parent[node];
            chain.push(node);
        }
        for w in (1..chain.len()).rev() {
            self.parent[chain[w]] = chain[w - 1];
            self.pred[chain[w]] = self.pred[chain[w - 1]];
        }
    }

    /// Recompute the basic flows exactly from the marginals by peeling
    /// leaves, then read off the real-arc flows.
    fn extract_flows(&self) -> Result<Array2<f64>> {
        let root = self.root();
        let mut order: Vec<usize> = (0..root).collect();
        order.sort_by(|&x, &y| self.depth[y].cmp(&self.depth[x]).then(x.cmp(&y)));

        let mut residual: Vec<f64> = (0..=root)
            .map(|v| {
                if v < self.m {
                    self.a[v]
                } else if v < root {
                    -self.b[v - self.m]
                } else {
                    0.0
                }
            })
            .collect();

        let mut gamma = Array2::zeros((self.m, self.n));
        for &node in &order {
            let arc = self.pred[node];
            let toward_parent = self.tail(arc) == node;
            let f = if toward_parent { residual[node] } else { -residual[node] };
            if arc < self.m * self.n {
                // Basic flows are nonnegative up to rounding.
                if f < -1e-9 {
                    return Err(Error::Solver(format!(
                        "negative basic flow {} extracted",
                        f
                    )));
                }
                gamma[[arc / self.n, arc % self.n]] = f.max(0.0);
            } else if f.abs() > 1e-9 {
                return Err(Error::Solver(format!(
                    "artificial arc kept flow {}; instance infeasible",
                    f
                )));
            }
            residual[self.parent[node]] += residual[node];
        }
        Ok(gamma)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{squared_euclidean_cost, DataMatrix};
    use crate::ot::transport_cost;
    use ndarray::array;

    fn uniform(n: usize) -> EmpiricalMeasure {
        EmpiricalMeasure::uniform(n).unwrap()
    }

    #[test]
    fn single_pair() {
        let c = CostMatrix::new(array![[0.0]]).unwrap();
        let gamma = solve_exact(&uniform(1), &uniform(1), &c).unwrap();
        assert_eq!(gamma.values()[[0, 0]], 1.0);
        assert_eq!(transport_cost(&gamma, &c).unwrap(), 0.0);
    }

    #[test]
    fn perfect_matching_on_the_line() {
        let s = DataMatrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let t = DataMatrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let c = squared_euclidean_cost(&s, &t).unwrap();
        let gamma = solve_exact(&uniform(2), &uniform(2), &c).unwrap();
        assert_eq!(gamma.values()[[0, 0]], 0.5);
        assert_eq!(gamma.values()[[1, 1]], 0.5);
        assert_eq!(gamma.values()[[0, 1]], 0.0);
        assert_eq!(gamma.values()[[1, 0]], 0.0);
        assert_eq!(transport_cost(&gamma, &c).unwrap(), 0.0);
    }

    #[test]
    fn vertex_support_bound() {
        let c = CostMatrix::new(array![
            [0.2, 1.3, 0.7, 2.0],
            [1.1, 0.4, 0.9, 0.3],
            [0.8, 0.6, 0.1, 1.7],
        ])
        .unwrap();
        let mu_s = EmpiricalMeasure::new(vec![0.5, 0.3, 0.2]).unwrap();
        let mu_t = EmpiricalMeasure::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let gamma = solve_exact(&mu_s, &mu_t, &c).unwrap();
        assert!(gamma.support_size() <= 3 + 4 - 1);
        assert!(gamma.max_marginal_violation() <= EXACT_MARGINAL_TOL);
    }

    #[test]
    fn forced_row_when_single_source() {
        let c = CostMatrix::new(array![[0.3, 0.9, 0.1]]).unwrap();
        let gamma = solve_exact(&uniform(1), &uniform(3), &c).unwrap();
        for j in 0..3 {
            assert!((gamma.values()[[0, j]] - 1.0 / 3.0).abs() <= 1e-15);
        }
    }

    #[test]
    fn zero_weight_points_get_no_mass() {
        let c = CostMatrix::new(array![[1.0, 2.0], [3.0, 0.5], [2.0, 2.0]]).unwrap();
        let mu_s = EmpiricalMeasure::new(vec![0.5, 0.5, 0.0]).unwrap();
        let mu_t = EmpiricalMeasure::new(vec![0.5, 0.5]).unwrap();
        let gamma = solve_exact(&mu_s, &mu_t, &c).unwrap();
        assert_eq!(gamma.values().row(2).sum(), 0.0);
        assert!(gamma.max_marginal_violation() <= EXACT_MARGINAL_TOL);
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let c = CostMatrix::new(array![[0.0, 1.0]]).unwrap();
        assert!(solve_exact(&uniform(2), &uniform(2), &c).is_err());
    }
}
