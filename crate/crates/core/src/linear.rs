//! Exact solver for the linear transport problem and the integer counting bound.
//!
//! The solver is a transportation simplex: a northwest-corner starting basis,
//! MODI potentials `u_i + v_j = c_ij` on basic cells, and Bland's rule for both
//! the entering cell (first cell in row-major order with negative reduced cost)
//! and the leaving cell (smallest row-major index among the tied minimum flows).

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigUint;

use crate::error::{Error, Result};
use crate::instance::{evaluate_cost, Objective, ProblemInstance, TransportPlan};
use crate::linalg::Matrix;

/// Spanning-tree basis of a transportation vertex with its dual potentials.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisState {
    /// Basic cells `(i, j)`, sorted row-major. Always `N + L − 1` of them.
    pub cells: Vec<(usize, usize)>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl BasisState {
    /// `c_ij − u_i − v_j` for every cell.
    pub fn reduced_costs(&self, cost: &Matrix) -> Matrix {
        Matrix::from_fn(cost.rows(), cost.cols(), |i, j| cost[(i, j)] - self.u[i] - self.v[j])
    }

    /// Dual objective `Σ u_i μ_i + Σ v_j ν_j`.
    pub fn dual_objective(&self, supply: &[f64], capacity: &[f64]) -> f64 {
        self.u.iter().zip(supply).map(|(a, b)| a * b).sum::<f64>()
            + self.v.iter().zip(capacity).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.cells.binary_search(&(i, j)).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSolution {
    pub plan: TransportPlan,
    pub basis: BasisState,
    pub pivots: usize,
}

/// Northwest-corner vertex: returns the flows and the `N + L − 1` basic cells.
///
/// Degenerate steps keep a zero-flow basic cell so the basis stays a spanning tree.
pub fn northwest_corner(supply: &[f64], capacity: &[f64]) -> (Matrix, Vec<(usize, usize)>) {
    let (n, l) = (supply.len(), capacity.len());
    let mut s = supply.to_vec();
    let mut d = capacity.to_vec();
    let mut flow = Matrix::zeros(n, l);
    let mut cells = Vec::with_capacity(n + l - 1);
    let (mut i, mut j) = (0, 0);
    loop {
        let x = s[i].min(d[j]).max(0.0);
        flow[(i, j)] = x;
        cells.push((i, j));
        s[i] -= x;
        d[j] -= x;
        if i + 1 == n && j + 1 == l {
            break;
        }
        if j + 1 == l || (i + 1 < n && s[i] <= d[j]) {
            i += 1;
        } else {
            j += 1;
        }
    }
    (flow, cells)
}

/// Potentials on a spanning-tree basis, anchored at `u_0 = 0`.
fn potentials(n: usize, l: usize, cells: &[(usize, usize)], cost: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let adj = adjacency(n, l, cells);
    let mut u = vec![f64::NAN; n];
    let mut v = vec![f64::NAN; l];
    u[0] = 0.0;
    let mut queue = VecDeque::from([0usize]);
    while let Some(node) = queue.pop_front() {
        for &(other, (i, j)) in &adj[node] {
            if node < n {
                if v[j].is_nan() {
                    v[j] = cost[(i, j)] - u[i];
                    queue.push_back(other);
                }
            } else if u[i].is_nan() {
                u[i] = cost[(i, j)] - v[j];
                queue.push_back(other);
            }
        }
    }
    (u, v)
}

/// Node adjacency of the bipartite basis graph. Row `i` is node `i`, column `j` is node `N + j`.
fn adjacency(n: usize, l: usize, cells: &[(usize, usize)]) -> Vec<Vec<(usize, (usize, usize))>> {
    let mut adj = vec![Vec::new(); n + l];
    for &(i, j) in cells {
        adj[i].push((n + j, (i, j)));
        adj[n + j].push((i, (i, j)));
    }
    adj
}

/// Cells on the tree path from column node `N + j` to row node `i`, in walk order.
fn tree_path(n: usize, l: usize, cells: &[(usize, usize)], i: usize, j: usize) -> Vec<(usize, usize)> {
    let adj = adjacency(n, l, cells);
    let start = n + j;
    let mut parent: Vec<Option<(usize, (usize, usize))>> = vec![None; n + l];
    let mut seen = vec![false; n + l];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(node) = queue.pop_front() {
        if node == i {
            break;
        }
        for &(other, cell) in &adj[node] {
            if !seen[other] {
                seen[other] = true;
                parent[other] = Some((node, cell));
                queue.push_back(other);
            }
        }
    }
    let mut path = Vec::new();
    let mut node = i;
    while node != start {
        let (prev, cell) = parent[node].expect("basis is a spanning tree");
        path.push(cell);
        node = prev;
    }
    path.reverse();
    path
}

/// Solves `min Σ c_ij π_ij` over the transport polytope exactly.
pub fn solve_linear(inst: &ProblemInstance) -> Result<LinearSolution> {
    inst.check_balanced()?;
    let (n, l) = inst.shape();
    let cost = &inst.linear_cost;
    let (mut flow, mut cells) = northwest_corner(&inst.supply, &inst.capacity);
    cells.sort_unstable();

    let scale = cost.max_abs().max(1.0);
    let enter_tol = 1e-12 * scale;
    let max_pivots = 50 * n * l * (n + l) + 1000;
    let mut pivots = 0;

    loop {
        let (u, v) = potentials(n, l, &cells, cost);
        let entering = (0..n)
            .flat_map(|i| (0..l).map(move |j| (i, j)))
            .find(|&(i, j)| cost[(i, j)] - u[i] - v[j] < -enter_tol && cells.binary_search(&(i, j)).is_err());
        let Some((ei, ej)) = entering else {
            let objective = evaluate_cost(Objective::Linear(inst), &flow)?;
            return Ok(LinearSolution {
                plan: TransportPlan { pi: flow, objective },
                basis: BasisState { cells, u, v },
                pivots,
            });
        };
        if pivots >= max_pivots {
            return Err(Error::CyclingGuard { iterations: pivots });
        }
        pivots += 1;

        // Walking from column ej back to row ei, signs alternate -, +, -, ...
        let path = tree_path(n, l, &cells, ei, ej);
        let mut leaving: Option<(usize, usize)> = None;
        let mut theta = f64::INFINITY;
        for &cell in path.iter().step_by(2) {
            let f = flow[cell];
            if f < theta || (f == theta && leaving.is_some_and(|lv| cell < lv)) {
                theta = f;
                leaving = Some(cell);
            }
        }
        let leaving = leaving.expect("cycle has a decreasing cell");
        flow[(ei, ej)] += theta;
        for (k, &cell) in path.iter().enumerate() {
            if k % 2 == 0 {
                flow[cell] -= theta;
            } else {
                flow[cell] += theta;
            }
        }
        flow[leaving] = 0.0;
        let pos = cells.binary_search(&leaving).expect("leaving cell is basic");
        cells.remove(pos);
        let ins = cells.binary_search(&(ei, ej)).unwrap_err();
        cells.insert(ins, (ei, ej));
    }
}

/// Upper bounds on the number of integer plans with row sums `μ`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountBounds {
    /// `Π_i C(μ_i + L − 1, L − 1)`: row fillings counted independently.
    pub product_bound: BigUint,
    /// `L^M` with `M = Σ μ_i`.
    pub power_bound: BigUint,
    pub total_mass: u64,
}

pub fn binomial(n: u64, k: u64) -> BigUint {
    let k = k.min(n.saturating_sub(k));
    let mut acc = BigUint::from(1u32);
    for t in 1..=k {
        acc *= BigUint::from(n - k + t);
        acc /= BigUint::from(t);
    }
    acc
}

/// Counting bounds for integer plans; needs integral supplies only.
pub fn count_upper_bound(inst: &ProblemInstance) -> Result<CountBounds> {
    let mu = inst.integral_supply()?;
    let l = inst.n_schools as u64;
    let total_mass: u64 = mu.iter().sum();
    let product_bound = mu
        .iter()
        .fold(BigUint::from(1u32), |acc, &m| acc * binomial(m + l - 1, l - 1));
    let power_bound = BigUint::from(l).pow(u32::try_from(total_mass).expect("total mass fits u32"));
    Ok(CountBounds {
        product_bound,
        power_bound,
        total_mass,
    })
}
