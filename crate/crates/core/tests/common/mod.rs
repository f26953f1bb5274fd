#![allow(dead_code)]

use mlia_core::lp::{LinearProgram, Relation, VarId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleResult {
    Infeasible,
    Unbounded,
    Optimal(f64),
}

/// Solves a small dense system with partial pivoting; `None` if singular.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-9 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..n {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn combinations(k: usize, n: usize, f: &mut dyn FnMut(&[usize])) {
    fn rec(start: usize, k: usize, n: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, k, n, cur, f);
            cur.pop();
        }
    }
    rec(0, k, n, &mut Vec::new(), f);
}

/// Minimum over all basic feasible solutions of the LP with infinite bounds
/// replaced by `±box_size`.
fn boxed_vertex_min(lp: &LinearProgram<f64>, box_size: f64) -> Option<f64> {
    let n = lp.num_vars();
    // hyperplanes: (coeffs, rhs)
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for i in 0..lp.num_constraints() {
        planes.push((lp.dense_row(mlia_core::lp::RowId(i)), lp.constraints()[i].rhs));
    }
    let lo: Vec<f64> = lp.vars().iter().map(|v| v.lower.max(-box_size)).collect();
    let hi: Vec<f64> = lp.vars().iter().map(|v| v.upper.min(box_size)).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), lo[j]));
        planes.push((e, hi[j]));
    }
    let feasible = |x: &[f64]| {
        let tol = 1e-7 * (1.0 + box_size * 1e-3);
        for j in 0..n {
            if x[j] < lo[j] - tol || x[j] > hi[j] + tol {
                return false;
            }
        }
        lp.constraints().iter().all(|c| {
            let act: f64 = c.terms.iter().map(|&(v, a)| a * x[v.0]).sum();
            match c.relation {
                Relation::Le => act <= c.rhs + tol,
                Relation::Ge => act >= c.rhs - tol,
                Relation::Eq => (act - c.rhs).abs() <= tol,
            }
        })
    };
    let mut best: Option<f64> = None;
    combinations(n, planes.len(), &mut |idx| {
        let a: Vec<Vec<f64>> = idx.iter().map(|&i| planes[i].0.clone()).collect();
        let b: Vec<f64> = idx.iter().map(|&i| planes[i].1).collect();
        if let Some(x) = gauss_solve(a, b) {
            if feasible(&x) {
                let obj = lp.objective_value(&x);
                best = Some(best.map_or(obj, |b: f64| b.min(obj)));
            }
        }
    });
    best
}

/// Brute-force LP oracle by vertex enumeration.
pub fn vertex_oracle(lp: &LinearProgram<f64>) -> OracleResult {
    let small = boxed_vertex_min(lp, 1e5);
    let large = boxed_vertex_min(lp, 1e6);
    match (small, large) {
        (None, None) => OracleResult::Infeasible,
        (Some(a), Some(b)) if b < a - 1e-6 * (1.0 + a.abs()) => OracleResult::Unbounded,
        (_, Some(b)) => OracleResult::Optimal(b),
        (Some(a), None) => OracleResult::Optimal(a),
    }
}

/// Small random LP with integer data: ≤ 6 variables, ≤ 8 rows, mixed bounds
/// and relations so that all three statuses occur.
pub fn random_lp(seed: u64) -> LinearProgram<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=6);
    let m = rng.gen_range(1..=8);
    let mut lp = LinearProgram::new();
    let vars: Vec<VarId> = (0..n)
        .map(|j| {
            let lower = match rng.gen_range(0..6) {
                0 => f64::NEG_INFINITY,
                1 => -3.0,
                _ => 0.0,
            };
            let upper = match rng.gen_range(0..6) {
                0 => 5.0,
                1 => 10.0,
                _ => f64::INFINITY,
            };
            lp.add_var(format!("x{j}"), lower, upper)
        })
        .collect();
    for &v in &vars {
        lp.set_objective(v, rng.gen_range(-5..=5) as f64);
    }
    for _ in 0..m {
        let terms: Vec<(VarId, f64)> = vars
            .iter()
            .filter_map(|&v| {
                let a = rng.gen_range(-5..=5);
                (a != 0).then_some((v, a as f64))
            })
            .collect();
        let rel = match rng.gen_range(0..10) {
            0 => Relation::Eq,
            1..=2 => Relation::Ge,
            _ => Relation::Le,
        };
        let rhs = rng.gen_range(-4..=12) as f64;
        lp.add_constraint(terms, rel, rhs);
    }
    lp
}
