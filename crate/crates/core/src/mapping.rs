//! Per-period cluster maps: PCA of cluster axes, similarity edges, and the
//! connected cluster networks they form.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::PeriodId;
use crate::eigen::top_eigenpairs;
use crate::error::{Error, Result};
use crate::vectorize::{cosine, SparseVec};

pub const EIGEN_TOL: f64 = 1e-12;
pub const EIGEN_MAX_ITERS: usize = 10_000;

/// Eigenvalues below this fraction of the mean squared input norm are zero.
const NULL_EIGENVALUE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub coords: Vec<(f64, f64)>,
    /// `(λ₁, λ₂)`, population scaling, `λ₁ ≥ λ₂ ≥ 0`.
    pub eigenvalues: (f64, f64),
    /// Sum of all eigenvalues of the centered Gram matrix.
    pub total_variance: f64,
    /// Orthonormal projection directions in input space.
    pub directions: [Vec<f64>; 2],
}

impl Pca {
    pub fn explained_variance(&self) -> f64 {
        if self.total_variance > 0.0 {
            ((self.eigenvalues.0 + self.eigenvalues.1) / self.total_variance).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }
}

/// Two-component PCA of `points` (one dense row each).
///
/// The rows are mean-centered and the k×k Gram matrix `X Xᵀ / k` is
/// eigendecomposed; it shares its nonzero spectrum with the covariance
/// `Xᵀ X / k`. Coordinates are `√(kλ)·u`. Each component is signed so its
/// largest-magnitude coordinate is positive.
pub fn pca_2d(points: &[Vec<f64>]) -> Result<Pca> {
    let k = points.len();
    if k < 2 {
        return Err(Error::TooFewPoints(k));
    }
    let dim = points[0].len();
    let mut mean = vec![0.0; dim];
    for p in points {
        for (m, x) in mean.iter_mut().zip(p) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= k as f64);
    let centered: Vec<Vec<f64>> = points
        .iter()
        .map(|p| p.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut gram = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i..k {
            let g = dot(&centered[i], &centered[j]) / k as f64;
            gram[i][j] = g;
            gram[j][i] = g;
        }
    }
    let total_variance: f64 = (0..k).map(|i| gram[i][i]).sum();
    let scale = points.iter().map(|p| dot(p, p)).sum::<f64>() / k as f64;
    let floor = NULL_EIGENVALUE * scale.max(f64::MIN_POSITIVE);

    let pairs = top_eigenpairs(&gram, 2, EIGEN_TOL, EIGEN_MAX_ITERS);
    let mut values = [0.0; 2];
    let mut comps: [Vec<f64>; 2] = [vec![0.0; k], vec![0.0; k]];
    let mut directions: [Vec<f64>; 2] = [vec![0.0; dim], vec![0.0; dim]];
    for (c, pair) in pairs.iter().enumerate() {
        let lambda = if pair.value > floor { pair.value } else { 0.0 };
        values[c] = lambda;
        if lambda == 0.0 {
            continue;
        }
        let s = (k as f64 * lambda).sqrt();
        let mut coords: Vec<f64> = pair.vector.iter().map(|u| s * u).collect();
        let pivot = coords
            .iter()
            .enumerate()
            .fold(0, |best, (i, x)| if x.abs() > coords[best].abs() { i } else { best });
        let sign = if coords[pivot] < 0.0 { -1.0 } else { 1.0 };
        coords.iter_mut().for_each(|x| *x *= sign);
        // v = Xᵀu / √(kλ)
        let mut dir = vec![0.0; dim];
        for (row, u) in centered.iter().zip(&pair.vector) {
            for (d, x) in dir.iter_mut().zip(row) {
                *d += x * u * sign / s;
            }
        }
        comps[c] = coords;
        directions[c] = dir;
    }
    complete_orthonormal(&mut directions, &values);
    Ok(Pca {
        coords: comps[0].iter().copied().zip(comps[1].iter().copied()).collect(),
        eigenvalues: (values[0], values[1]),
        total_variance,
        directions,
    })
}

/// Fill directions of null components with unit vectors orthogonal to the
/// others, so the pair is always orthonormal.
fn complete_orthonormal(dirs: &mut [Vec<f64>; 2], values: &[f64; 2]) {
    let dim = dirs[0].len();
    for c in 0..2 {
        if values[c] > 0.0 {
            continue;
        }
        let other = dirs[1 - c].clone();
        let has_other = values[1 - c] > 0.0 || c == 1;
        for e in 0..dim {
            let mut v = vec![0.0; dim];
            v[e] = 1.0;
            if has_other {
                let p = other[e];
                v.iter_mut().zip(&other).for_each(|(x, o)| *x -= p * o);
            }
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-6 {
                dirs[c] = v.into_iter().map(|x| x / n).collect();
                break;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub similarity: f64,
}

/// Pairs `i < j` whose axis cosine is at least `threshold`, in `(i, j)` order.
pub fn build_edges(axes: &[SparseVec], threshold: f64) -> Vec<Edge> {
    let mut edges = Vec::new();
    for i in 0..axes.len() {
        for j in i + 1..axes.len() {
            let similarity = cosine(&axes[i].view(), &axes[j].view());
            if similarity >= threshold {
                edges.push(Edge {
                    source: i,
                    target: j,
                    similarity,
                });
            }
        }
    }
    edges
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Connected components, largest first; ties by smallest member. Members are
/// listed in ascending order.
pub fn connected_components(k: usize, edges: &[Edge]) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..k).collect();
    for e in edges {
        let (a, b) = (find(&mut parent, e.source), find(&mut parent, e.target));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for x in 0..k {
        let r = find(&mut parent, x);
        groups.entry(r).or_default().push(x);
    }
    let mut comps: Vec<Vec<usize>> = groups.into_values().collect();
    comps.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    comps
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapCluster {
    pub id: usize,
    pub label: String,
    pub size: usize,
    pub x: f64,
    pub y: f64,
}

/// One period's cluster map; the machine-readable twin of the SVG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterMap {
    pub period: PeriodId,
    pub clusters: Vec<MapCluster>,
    pub eigenvalues: (f64, f64),
    pub explained_variance: f64,
    pub edge_threshold: f64,
    pub edges: Vec<Edge>,
    pub components: Vec<Vec<usize>>,
}

impl ClusterMap {
    pub fn build(
        period: PeriodId,
        axes: &[SparseVec],
        n_cols: usize,
        labels: &[String],
        sizes: &[usize],
        edge_threshold: f64,
    ) -> Result<Self> {
        let dense: Vec<Vec<f64>> = axes.iter().map(|a| a.to_dense(n_cols)).collect();
        let pca = pca_2d(&dense)?;
        let edges = build_edges(axes, edge_threshold);
        let components = connected_components(axes.len(), &edges);
        Ok(ClusterMap {
            period,
            clusters: pca
                .coords
                .iter()
                .enumerate()
                .map(|(id, &(x, y))| MapCluster {
                    id,
                    label: labels[id].clone(),
                    size: sizes[id],
                    x,
                    y,
                })
                .collect(),
            eigenvalues: pca.eigenvalues,
            explained_variance: pca.explained_variance(),
            edge_threshold,
            edges,
            components,
        })
    }

    /// Components with more than one cluster.
    pub fn networks(&self) -> impl Iterator<Item = &Vec<usize>> {
        self.components.iter().filter(|c| c.len() > 1)
    }
}

const WIDTH: f64 = 1000.0;
const HEIGHT: f64 = 800.0;
const MARGIN: f64 = 50.0;
const MAX_RADIUS: f64 = 30.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Static SVG map: circles with area proportional to cluster size placed at
/// the PCA coordinates, edges with opacity equal to similarity, and labels.
/// Networks are coloured; isolated clusters are grey.
pub fn render_svg(map: &ClusterMap) -> String {
    let xs = map.clusters.iter().map(|c| c.x);
    let ys = map.clusters.iter().map(|c| c.y);
    let (x0, x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let (y0, y1) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
    let (w, h) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
    let span = |lo: f64, hi: f64| if hi > lo { hi - lo } else { 0.0 };
    let scale = match (span(x0, x1), span(y0, y1)) {
        (0.0, 0.0) => 0.0,
        (0.0, sy) => h / sy,
        (sx, 0.0) => w / sx,
        (sx, sy) => (w / sx).min(h / sy),
    };
    let cx = if x1 >= x0 { (x0 + x1) / 2.0 } else { 0.0 };
    let cy = if y1 >= y0 { (y0 + y1) / 2.0 } else { 0.0 };
    let px = |x: f64| WIDTH / 2.0 + (x - cx) * scale;
    let py = |y: f64| HEIGHT / 2.0 - (y - cy) * scale;

    let mut colour = vec!["#999999"; map.clusters.len()];
    for (i, comp) in map.networks().enumerate() {
        for &c in comp {
            colour[c] = PALETTE[i % PALETTE.len()];
        }
    }
    let max_size = map.clusters.iter().map(|c| c.size).max().unwrap_or(0).max(1);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="30" font-family="sans-serif" font-size="16">{} (explained variance {:.3})</text>"#,
        map.period, map.explained_variance
    );
    s.push_str("<g id=\"edges\" stroke=\"#444444\" stroke-width=\"1.5\">\n");
    for e in &map.edges {
        let (a, b) = (&map.clusters[e.source], &map.clusters[e.target]);
        let _ = writeln!(
            s,
            r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke-opacity="{:.3}"/>"#,
            px(a.x),
            py(a.y),
            px(b.x),
            py(b.y),
            e.similarity.clamp(0.0, 1.0)
        );
    }
    s.push_str("</g>\n<g id=\"clusters\" fill-opacity=\"0.6\">\n");
    for c in &map.clusters {
        let r = (MAX_RADIUS * (c.size as f64 / max_size as f64).sqrt()).max(2.0);
        let _ = writeln!(
            s,
            r#"<circle cx="{:.3}" cy="{:.3}" r="{:.3}" fill="{}" stroke="{}"/>"#,
            px(c.x),
            py(c.y),
            r,
            colour[c.id],
            colour[c.id]
        );
    }
    s.push_str("</g>\n<g id=\"labels\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">\n");
    for c in &map.clusters {
        let _ = writeln!(
            s,
            r#"<text x="{:.3}" y="{:.3}">{}</text>"#,
            px(c.x),
            py(c.y) - 4.0,
            escape(&c.label)
        );
    }
    s.push_str("</g>\n</svg>\n");
    s
}
