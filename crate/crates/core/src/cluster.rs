//! Axial K-means.
//!
//! Each cluster is a unit axis in term space. Documents attach to the axis
//! onto which they project most strongly, and each axis is updated to the
//! normalized projection-weighted sum of its members,
//! `a ← normalize(Σ_{d∈C} ⟨d, a⟩ d)`, which is one power-iteration step on
//! the cluster's scatter matrix. The objective `J = Σ_d ⟨d, a(d)⟩²` therefore
//! never decreases.
//!
//! Axis accumulation runs in ascending row order regardless of thread count,
//! so results are bit-identical across `rayon` pool sizes.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{PeriodId, Vocabulary};
use crate::error::{Error, Result};
use crate::seed;
use crate::vectorize::{DocTermMatrix, SparseVec, SparseView};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    pub k: usize,
    pub max_iters: usize,
    /// Stop once the relative objective change falls below this.
    pub tol: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Axes are kept dense up to this many vocabulary columns, sparse above.
    pub dense_axis_limit: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            k: 20,
            max_iters: 100,
            tol: 1e-9,
            restarts: 10,
            seed: 0,
            dense_axis_limit: 50_000,
        }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be positive".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidConfig("restarts must be at least 1".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidConfig("tol must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Axis {
    Dense(Vec<f64>),
    Sparse(SparseVec),
}

impl Axis {
    pub fn dot(&self, row: &SparseView<'_>) -> f64 {
        match self {
            Axis::Dense(d) => row.dot_dense(d),
            Axis::Sparse(s) => row.dot(&s.view()),
        }
    }

    pub fn to_sparse(&self) -> SparseVec {
        match self {
            Axis::Dense(d) => SparseVec::from_dense(d),
            Axis::Sparse(s) => s.clone(),
        }
    }

    pub fn to_dense(&self, n_cols: usize) -> Vec<f64> {
        match self {
            Axis::Dense(d) => d.clone(),
            Axis::Sparse(s) => s.to_dense(n_cols),
        }
    }

    fn from_row(row: &SparseView<'_>, n_cols: usize, dense: bool) -> Self {
        let s = SparseVec {
            indices: row.indices.to_vec(),
            values: row.values.to_vec(),
        };
        if dense {
            Axis::Dense(s.to_dense(n_cols))
        } else {
            Axis::Sparse(s)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub period: PeriodId,
    pub n_cols: usize,
    pub vocabulary_hash: String,
    pub axes: Vec<Axis>,
    /// Cluster id per matrix row.
    pub assignment: Vec<usize>,
    pub doc_ids: Vec<String>,
    pub objective_trace: Vec<f64>,
    pub sizes: Vec<usize>,
    /// Which restart produced this model.
    pub restart: usize,
}

impl ClusterModel {
    pub fn k(&self) -> usize {
        self.axes.len()
    }

    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().unwrap_or(&0.0)
    }

    /// Reassign every row to its best axis; equals `assignment` for a
    /// converged model.
    pub fn reassign(&self, matrix: &DocTermMatrix) -> Vec<usize> {
        assign(matrix, &self.axes).0
    }

    pub fn members(&self, cluster: usize) -> impl Iterator<Item = &str> + '_ {
        self.assignment
            .iter()
            .zip(&self.doc_ids)
            .filter(move |(c, _)| **c == cluster)
            .map(|(_, id)| id.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub id: usize,
    pub label: String,
    pub top_terms: Vec<(String, f64)>,
    pub size: usize,
}

/// Argmax projection per row; ties go to the lowest cluster id.
fn assign(matrix: &DocTermMatrix, axes: &[Axis]) -> (Vec<usize>, Vec<f64>) {
    (0..matrix.n_rows())
        .into_par_iter()
        .map(|i| {
            let row = matrix.row(i);
            let mut best = (0, f64::NEG_INFINITY);
            for (k, a) in axes.iter().enumerate() {
                let p = a.dot(&row);
                if p > best.1 {
                    best = (k, p);
                }
            }
            best
        })
        .unzip()
}

fn sizes_of(assignment: &[usize], k: usize) -> Vec<usize> {
    let mut sizes = vec![0; k];
    for &c in assignment {
        sizes[c] += 1;
    }
    sizes
}

/// Re-seed empty clusters with the row projecting least onto its own axis,
/// never taking the last member of a cluster.
fn repair_empty(
    matrix: &DocTermMatrix,
    axes: &mut [Axis],
    assignment: &mut Vec<usize>,
    proj: &mut Vec<f64>,
    dense: bool,
) {
    for _ in 0..axes.len() {
        let sizes = sizes_of(assignment, axes.len());
        let empty: Vec<usize> = (0..axes.len()).filter(|&k| sizes[k] == 0).collect();
        if empty.is_empty() {
            return;
        }
        let mut order: Vec<usize> = (0..matrix.n_rows())
            .filter(|&i| sizes[assignment[i]] > 1)
            .collect();
        order.sort_by(|&a, &b| proj[a].total_cmp(&proj[b]).then(a.cmp(&b)));
        let mut donors = sizes.clone();
        let mut pos = 0;
        let mut reseeded = false;
        for &k in &empty {
            while pos < order.len() && donors[assignment[order[pos]]] <= 1 {
                pos += 1;
            }
            let Some(&i) = order.get(pos) else { break };
            pos += 1;
            donors[assignment[i]] -= 1;
            axes[k] = Axis::from_row(&matrix.row(i), matrix.n_cols, dense);
            reseeded = true;
        }
        if !reseeded {
            return;
        }
        let (a, p) = assign(matrix, axes);
        *assignment = a;
        *proj = p;
    }
}

/// Projection-weighted sum per cluster, accumulated in ascending row order.
fn update_axes(
    matrix: &DocTermMatrix,
    axes: &[Axis],
    assignment: &[usize],
    proj: &[f64],
    dense: bool,
) -> Vec<Axis> {
    let k = axes.len();
    let sums: Vec<SparseVec> = if dense {
        let mut acc = vec![vec![0.0; matrix.n_cols]; k];
        for (i, row) in matrix.rows().enumerate() {
            let buf = &mut acc[assignment[i]];
            for (&c, &v) in row.indices.iter().zip(row.values) {
                buf[c as usize] += proj[i] * v;
            }
        }
        acc.iter().map(|d| SparseVec::from_dense(d)).collect()
    } else {
        let mut acc: Vec<Vec<(u32, f64)>> = vec![Vec::new(); k];
        for (i, row) in matrix.rows().enumerate() {
            let buf = &mut acc[assignment[i]];
            for (&c, &v) in row.indices.iter().zip(row.values) {
                buf.push((c, proj[i] * v));
            }
        }
        acc.into_iter().map(SparseVec::from_pairs).collect()
    };
    sums.into_iter()
        .zip(axes)
        .map(|(sum, old)| {
            let norm = sum.values.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(norm > 0.0) {
                return old.clone();
            }
            let unit = SparseVec {
                indices: sum.indices,
                values: sum.values.iter().map(|v| v / norm).collect(),
            };
            if dense {
                Axis::Dense(unit.to_dense(matrix.n_cols))
            } else {
                Axis::Sparse(unit)
            }
        })
        .collect()
}

fn objective(proj: &[f64]) -> f64 {
    proj.iter().map(|p| p * p).sum()
}

/// Farthest-first seeding on cosine: a seeded uniform first row, then
/// repeatedly the row whose largest cosine to the chosen axes is smallest.
/// Exact ties, common among sparse rows with disjoint support, are broken by
/// the seeded generator.
pub fn init_axes(matrix: &DocTermMatrix, k: usize, seed: u64) -> Result<Vec<SparseVec>> {
    let n = matrix.n_rows();
    if k > n || n == 0 {
        return Err(Error::TooManyClusters { k, n_rows: n });
    }
    let mut rng = seed::rng(seed);
    let first = rng.gen_range(0..n);
    let mut chosen = vec![first];
    let mut max_cos: Vec<f64> = (0..n).map(|i| matrix.row(i).dot(&matrix.row(first))).collect();
    let mut used = vec![false; n];
    used[first] = true;
    while chosen.len() < k {
        let lowest = (0..n)
            .filter(|&i| !used[i])
            .map(|i| max_cos[i])
            .min_by(f64::total_cmp)
            .expect("k <= n leaves an unused row");
        let ties: Vec<usize> = (0..n).filter(|&i| !used[i] && max_cos[i] == lowest).collect();
        let next = ties[rng.gen_range(0..ties.len())];
        used[next] = true;
        chosen.push(next);
        let pick = matrix.row(next);
        for (i, m) in max_cos.iter_mut().enumerate() {
            *m = m.max(matrix.row(i).dot(&pick));
        }
    }
    Ok(chosen
        .into_iter()
        .map(|i| {
            let r = matrix.row(i);
            SparseVec {
                indices: r.indices.to_vec(),
                values: r.values.to_vec(),
            }
        })
        .collect())
}

struct Run {
    axes: Vec<Axis>,
    assignment: Vec<usize>,
    trace: Vec<f64>,
}

fn run_once(matrix: &DocTermMatrix, config: &ClusterConfig, seed: u64) -> Result<Run> {
    let dense = matrix.n_cols <= config.dense_axis_limit;
    let mut axes: Vec<Axis> = init_axes(matrix, config.k, seed)?
        .into_iter()
        .map(|s| {
            if dense {
                Axis::Dense(s.to_dense(matrix.n_cols))
            } else {
                Axis::Sparse(s)
            }
        })
        .collect();
    let (mut assignment, mut proj) = assign(matrix, &axes);
    repair_empty(matrix, &mut axes, &mut assignment, &mut proj, dense);
    let mut j = objective(&proj);
    let mut trace = vec![j];

    for _ in 0..config.max_iters {
        let mut new_axes = update_axes(matrix, &axes, &assignment, &proj, dense);
        let (mut new_assignment, mut new_proj) = assign(matrix, &new_axes);
        repair_empty(matrix, &mut new_axes, &mut new_assignment, &mut new_proj, dense);
        let new_j = objective(&new_proj);
        if new_j < j {
            // rounding-level decrease at the fixed point
            break;
        }
        let converged = new_j == 0.0 || (new_j - j) / new_j < config.tol;
        axes = new_axes;
        assignment = new_assignment;
        proj = new_proj;
        j = new_j;
        trace.push(j);
        if converged {
            break;
        }
    }
    Ok(Run {
        axes,
        assignment,
        trace,
    })
}

/// Best of `config.restarts` seeded runs by final objective, lowest restart
/// index on ties.
pub fn fit_axial_kmeans(matrix: &DocTermMatrix, config: &ClusterConfig) -> Result<ClusterModel> {
    config.validate()?;
    if config.k > matrix.n_rows() || matrix.n_rows() == 0 {
        return Err(Error::TooManyClusters {
            k: config.k,
            n_rows: matrix.n_rows(),
        });
    }
    let runs = (0..config.restarts)
        .into_par_iter()
        .map(|r| run_once(matrix, config, seed::derive(config.seed, &format!("restart.{r}"))))
        .collect::<Result<Vec<Run>>>()?;
    let mut best = 0;
    for (r, run) in runs.iter().enumerate() {
        if run.trace.last() > runs[best].trace.last() {
            best = r;
        }
    }
    let run = runs.into_iter().nth(best).unwrap();
    Ok(ClusterModel {
        period: matrix.period,
        n_cols: matrix.n_cols,
        vocabulary_hash: matrix.vocabulary_hash.clone(),
        sizes: sizes_of(&run.assignment, config.k),
        axes: run.axes,
        assignment: run.assignment,
        doc_ids: matrix.doc_ids.clone(),
        objective_trace: run.trace,
        restart: best,
    })
}

/// Top `top_m` positive axis components per cluster, by weight descending
/// then term ascending. The label is the first top term.
pub fn summarize_clusters(
    model: &ClusterModel,
    vocab: &Vocabulary,
    top_m: usize,
) -> Vec<ClusterSummary> {
    model
        .axes
        .iter()
        .enumerate()
        .map(|(id, axis)| {
            let sparse = axis.to_sparse();
            let mut comps: Vec<(u32, f64)> = sparse
                .indices
                .iter()
                .copied()
                .zip(sparse.values.iter().copied())
                .filter(|&(_, w)| w > 0.0)
                .collect();
            comps.sort_by(|a, b| {
                b.1.total_cmp(&a.1)
                    .then_with(|| vocab.terms[a.0 as usize].cmp(&vocab.terms[b.0 as usize]))
            });
            comps.truncate(top_m);
            let top_terms: Vec<(String, f64)> = comps
                .into_iter()
                .map(|(c, w)| (vocab.terms[c as usize].clone(), w))
                .collect();
            ClusterSummary {
                id,
                label: top_terms.first().map(|t| t.0.clone()).unwrap_or_default(),
                top_terms,
                size: model.sizes[id],
            }
        })
        .collect()
}
