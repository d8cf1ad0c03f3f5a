//! Transportation simplex on a dense cost matrix.
//!
//! The basis is a spanning tree of the complete bipartite graph between
//! sources (rows) and sinks (columns), seeded by the north-west corner rule.
//! Each pivot prices all non-basic cells against the tree potentials, enters
//! the most negative one (Bland's rule after a run of degenerate pivots) and
//! pushes flow around the unique cycle it closes.

use crate::error::{Error, Result};

/// Minimises `Σ cost[i*n+j] x[i*n+j]` subject to row sums `supply`, column
/// sums `demand` and `x >= 0`. Returns the optimal plan, row-major.
pub(crate) fn solve(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<Vec<f64>> {
    let (m, n) = (supply.len(), demand.len());
    assert_eq!(cost.len(), m * n, "cost matrix shape");
    assert!(m > 0 && n > 0);

    let mut flow = vec![0.0; m * n];
    let mut basic = vec![false; m * n];
    let mut basis: Vec<(usize, usize)> = Vec::with_capacity(m + n - 1);

    // North-west corner start: exactly m + n - 1 cells forming a staircase tree.
    let (mut ra, mut rb) = (supply.to_vec(), demand.to_vec());
    let (mut i, mut j) = (0, 0);
    loop {
        let q = ra[i].min(rb[j]).max(0.0);
        flow[i * n + j] = q;
        basic[i * n + j] = true;
        basis.push((i, j));
        let row_done = ra[i] <= rb[j];
        ra[i] -= q;
        rb[j] -= q;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if j == n - 1 || (i < m - 1 && row_done) {
            i += 1;
        } else {
            j += 1;
        }
    }
    debug_assert_eq!(basis.len(), m + n - 1);

    let scale = cost.iter().fold(1.0f64, |a, c| a.max(c.abs()));
    let tol = 1e-12 * scale;
    let nodes = m + n;
    let mut u = vec![0.0; m];
    let mut v = vec![0.0; n];
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nodes];
    let mut seen = vec![false; nodes];
    let mut pred: Vec<(usize, usize)> = vec![(usize::MAX, usize::MAX); nodes];
    let mut stack = Vec::with_capacity(nodes);
    let mut degenerate_run = 0usize;
    let max_pivots = 50 * (m * n + nodes) + 1000;

    for _ in 0..max_pivots {
        for a in adj.iter_mut() {
            a.clear();
        }
        for (k, &(r, c)) in basis.iter().enumerate() {
            adj[r].push((m + c, k));
            adj[m + c].push((r, k));
        }

        // Potentials: u_r + v_c = cost on basic cells, u_0 = 0.
        seen.iter_mut().for_each(|s| *s = false);
        seen[0] = true;
        u[0] = 0.0;
        stack.clear();
        stack.push(0);
        while let Some(a) = stack.pop() {
            for &(b, k) in &adj[a] {
                if seen[b] {
                    continue;
                }
                seen[b] = true;
                let (r, c) = basis[k];
                if b >= m {
                    v[c] = cost[r * n + c] - u[r];
                } else {
                    u[r] = cost[r * n + c] - v[c];
                }
                stack.push(b);
            }
        }

        // Pricing.
        let bland = degenerate_run > 2 * nodes;
        let mut entering: Option<(usize, usize)> = None;
        let mut best = -tol;
        'price: for r in 0..m {
            for c in 0..n {
                if basic[r * n + c] {
                    continue;
                }
                let rc = cost[r * n + c] - u[r] - v[c];
                if rc < best {
                    entering = Some((r, c));
                    if bland {
                        break 'price;
                    }
                    best = rc;
                }
            }
        }
        let Some((er, ec)) = entering else {
            flow.iter_mut().for_each(|x| *x = x.max(0.0));
            return Ok(flow);
        };

        // Tree path from column ec to row er.
        seen.iter_mut().for_each(|s| *s = false);
        let start = m + ec;
        seen[start] = true;
        stack.clear();
        stack.push(start);
        while let Some(a) = stack.pop() {
            if a == er {
                break;
            }
            for &(b, k) in &adj[a] {
                if !seen[b] {
                    seen[b] = true;
                    pred[b] = (a, k);
                    stack.push(b);
                }
            }
        }
        // Walking back from the row, edges alternate -, +, -, ... .
        let mut cycle: Vec<usize> = Vec::new();
        let mut node = er;
        while node != start {
            let (prev, k) = pred[node];
            cycle.push(k);
            node = prev;
        }
        let mut theta = f64::INFINITY;
        let mut leave = usize::MAX;
        for &k in cycle.iter().step_by(2) {
            let (r, c) = basis[k];
            let f = flow[r * n + c];
            let better = f < theta || (bland && f == theta && r * n + c < cell_of(&basis, leave, n));
            if better {
                theta = f;
                leave = k;
            }
        }
        let theta = theta.max(0.0);
        degenerate_run = if theta == 0.0 { degenerate_run + 1 } else { 0 };
        for (pos, &k) in cycle.iter().enumerate() {
            let (r, c) = basis[k];
            if pos % 2 == 0 {
                flow[r * n + c] -= theta;
            } else {
                flow[r * n + c] += theta;
            }
        }
        let (lr, lc) = basis[leave];
        flow[lr * n + lc] = 0.0;
        basic[lr * n + lc] = false;
        flow[er * n + ec] = theta;
        basic[er * n + ec] = true;
        basis[leave] = (er, ec);
    }
    Err(Error::Solver(format!(
        "no optimum after {max_pivots} pivots on a {m}x{n} problem"
    )))
}

fn cell_of(basis: &[(usize, usize)], k: usize, n: usize) -> usize {
    match basis.get(k) {
        Some(&(r, c)) => r * n + c,
        None => usize::MAX,
    }
}
