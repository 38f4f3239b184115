//! Exact solver for the dense transportation problem
//! `min sum_ij w_ij c_ij` over couplings `w` of two histograms.
//!
//! Primal transportation simplex (MODI method): a northwest-corner basis is
//! improved by pivoting on the most negative reduced cost until all reduced
//! costs are nonnegative. The basis is kept as a spanning tree of the
//! bipartite row/column graph with exactly `m + n - 1` cells, including
//! degenerate zero-flow cells. After a run of degenerate pivots the entering
//! rule switches to Bland's rule so the method cannot cycle.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    /// Row-major `m x n` coupling.
    pub flow: Vec<Vec<f64>>,
    pub cost: f64,
}

const EPS: f64 = 1e-14;

pub fn solve_transport(supply: &[f64], demand: &[f64], cost: &[Vec<f64>]) -> Result<TransportPlan> {
    let m = supply.len();
    let n = demand.len();
    if m == 0 || n == 0 {
        return Err(Error::Parameter("empty histogram".into()));
    }
    if cost.len() != m || cost.iter().any(|row| row.len() != n) {
        return Err(Error::Dimension(format!("cost matrix must be {m} x {n}")));
    }
    if supply.iter().chain(demand).any(|v| !v.is_finite() || *v < 0.0)
        || cost.iter().flatten().any(|c| !c.is_finite())
    {
        return Err(Error::Parameter("transport inputs must be finite, masses nonnegative".into()));
    }
    let total_a: f64 = supply.iter().sum();
    let total_b: f64 = demand.iter().sum();
    if (total_a - total_b).abs() > 1e-9 * total_a.max(total_b).max(1.0) {
        return Err(Error::Parameter(format!(
            "unbalanced transport problem: {total_a} vs {total_b}"
        )));
    }

    let mut flow = vec![vec![0.0; n]; m];
    let mut basic = vec![vec![false; n]; m];
    northwest_corner(supply, demand, &mut flow, &mut basic);

    let scale = cost.iter().flatten().fold(0.0f64, |a, c| a.max(c.abs())).max(1.0);
    let max_iter = 50 * (m + n) * (m + n) + 100;
    let mut degenerate_run = 0usize;
    let mut u = vec![0.0; m];
    let mut v = vec![0.0; n];

    for _ in 0..max_iter {
        potentials(cost, &basic, &mut u, &mut v);
        let bland = degenerate_run > m * n;
        let mut entering = None;
        let mut best = -1e-12 * scale;
        'search: for i in 0..m {
            for j in 0..n {
                if basic[i][j] {
                    continue;
                }
                let reduced = cost[i][j] - u[i] - v[j];
                if reduced < best {
                    entering = Some((i, j));
                    if bland {
                        break 'search;
                    }
                    best = reduced;
                }
            }
        }
        let Some((ei, ej)) = entering else {
            let total = flow
                .iter()
                .zip(cost)
                .flat_map(|(fr, cr)| fr.iter().zip(cr).map(|(f, c)| f * c))
                .sum();
            return Ok(TransportPlan { flow, cost: total });
        };

        let cycle = basis_path(&basic, ej, ei).ok_or_else(|| {
            Error::Numeric("transport basis is not a spanning tree".into())
        })?;
        // cycle[0] shares column ej with the entering cell and is a donor;
        // donors and receivers alternate along the path.
        let mut theta = f64::INFINITY;
        let mut leaving = (usize::MAX, usize::MAX);
        for &(i, j) in cycle.iter().step_by(2) {
            let f = flow[i][j];
            if f < theta - EPS || (f <= theta + EPS && (i, j) < leaving) {
                theta = f.min(theta);
                leaving = (i, j);
            }
        }
        let theta = theta.max(0.0);
        degenerate_run = if theta <= EPS { degenerate_run + 1 } else { 0 };
        for (k, &(i, j)) in cycle.iter().enumerate() {
            if k % 2 == 0 {
                flow[i][j] = (flow[i][j] - theta).max(0.0);
            } else {
                flow[i][j] += theta;
            }
        }
        flow[ei][ej] = theta;
        basic[ei][ej] = true;
        basic[leaving.0][leaving.1] = false;
        flow[leaving.0][leaving.1] = 0.0;
    }
    Err(Error::Numeric("transportation simplex did not converge".into()))
}

fn northwest_corner(supply: &[f64], demand: &[f64], flow: &mut [Vec<f64>], basic: &mut [Vec<bool>]) {
    let (m, n) = (supply.len(), demand.len());
    let mut ra = supply.to_vec();
    let mut rb = demand.to_vec();
    let (mut i, mut j) = (0, 0);
    loop {
        let x = if i == m - 1 && j == n - 1 {
            // Absorb round-off in the final cell.
            ra[i].max(rb[j]).max(0.0)
        } else {
            ra[i].min(rb[j]).max(0.0)
        };
        flow[i][j] = x;
        basic[i][j] = true;
        ra[i] -= x;
        rb[j] -= x;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if j == n - 1 || (i < m - 1 && ra[i] <= rb[j]) {
            i += 1;
        } else {
            j += 1;
        }
    }
}

/// Solves `u_i + v_j = c_ij` on the basis tree with `u_0 = 0`.
fn potentials(cost: &[Vec<f64>], basic: &[Vec<bool>], u: &mut [f64], v: &mut [f64]) {
    let (m, n) = (u.len(), v.len());
    let mut row_done = vec![false; m];
    let mut col_done = vec![false; n];
    let mut queue = VecDeque::new();
    u[0] = 0.0;
    row_done[0] = true;
    queue.push_back((true, 0usize));
    while let Some((is_row, k)) = queue.pop_front() {
        if is_row {
            for j in 0..n {
                if basic[k][j] && !col_done[j] {
                    v[j] = cost[k][j] - u[k];
                    col_done[j] = true;
                    queue.push_back((false, j));
                }
            }
        } else {
            for i in 0..m {
                if basic[i][k] && !row_done[i] {
                    u[i] = cost[i][k] - v[k];
                    row_done[i] = true;
                    queue.push_back((true, i));
                }
            }
        }
    }
}

/// Path of basic cells from column `col` to row `row` in the basis tree.
fn basis_path(basic: &[Vec<bool>], col: usize, row: usize) -> Option<Vec<(usize, usize)>> {
    let (m, n) = (basic.len(), basic[0].len());
    // Nodes: rows 0..m, columns m..m+n.
    let start = m + col;
    let goal = row;
    let mut parent = vec![usize::MAX; m + n];
    parent[start] = start;
    let mut queue = VecDeque::from([start]);
    while let Some(node) = queue.pop_front() {
        if node == goal {
            break;
        }
        if node < m {
            for j in 0..n {
                if basic[node][j] && parent[m + j] == usize::MAX {
                    parent[m + j] = node;
                    queue.push_back(m + j);
                }
            }
        } else {
            let j = node - m;
            for i in 0..m {
                if basic[i][j] && parent[i] == usize::MAX {
                    parent[i] = node;
                    queue.push_back(i);
                }
            }
        }
    }
    if parent[goal] == usize::MAX {
        return None;
    }
    let mut cells = Vec::new();
    let mut node = goal;
    while node != start {
        let prev = parent[node];
        let cell = if node < m { (node, prev - m) } else { (prev, node - m) };
        cells.push(cell);
        node = prev;
    }
    cells.reverse();
    Some(cells)
}
