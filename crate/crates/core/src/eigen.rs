//! Leading eigenpairs of small symmetric matrices by power iteration with
//! deflation.

use rand::Rng;

use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    /// Unit eigenvector.
    pub vector: Vec<f64>,
}

fn mat_vec(a: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum())
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn project_out(v: &mut [f64], basis: &[EigenPair]) {
    for p in basis {
        let c = dot(v, &p.vector);
        for (x, u) in v.iter_mut().zip(&p.vector) {
            *x -= c * u;
        }
    }
}

/// Smallest shift making `a + shift·I` positive semidefinite by the
/// Gershgorin bound.
pub fn gershgorin_shift(a: &[Vec<f64>]) -> f64 {
    a.iter()
        .enumerate()
        .map(|(i, row)| {
            let off: f64 = row
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, x)| x.abs())
                .sum();
            -(row[i] - off)
        })
        .fold(0.0, f64::max)
}

/// The `count` algebraically largest eigenpairs of the symmetric matrix `a`,
/// in descending order.
///
/// The matrix is shifted to be positive semidefinite so that power iteration
/// converges to the largest eigenvalue rather than the largest in magnitude;
/// each found pair is deflated out of the shifted matrix before the next.
/// Iteration stops when successive unit iterates differ by less than `tol`.
pub fn top_eigenpairs(a: &[Vec<f64>], count: usize, tol: f64, max_iters: usize) -> Vec<EigenPair> {
    let n = a.len();
    let count = count.min(n);
    let shift = gershgorin_shift(a);
    let mut b: Vec<Vec<f64>> = a.to_vec();
    for (i, row) in b.iter_mut().enumerate() {
        row[i] += shift;
    }
    let mut rng = seed::rng(0x5eed_e16e);
    let mut found: Vec<EigenPair> = Vec::with_capacity(count);
    for _ in 0..count {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
        project_out(&mut v, &found);
        let nv = norm(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        for _ in 0..max_iters {
            let mut w = mat_vec(&b, &v);
            project_out(&mut w, &found);
            let nw = norm(&w);
            if nw < 1e-300 {
                break;
            }
            w.iter_mut().for_each(|x| *x /= nw);
            let delta = norm(&w.iter().zip(&v).map(|(x, y)| x - y).collect::<Vec<_>>());
            v = w;
            if delta < tol {
                break;
            }
        }
        let mu = dot(&v, &mat_vec(&b, &v));
        for (i, row) in b.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x -= mu * v[i] * v[j];
            }
        }
        found.push(EigenPair {
            value: mu - shift,
            vector: v,
        });
    }
    found
}
