//! Per-period sparse document-term matrices.

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusSlice, PeriodId, Vocabulary};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    Binary,
    #[default]
    Tfidf,
}

/// Borrowed sparse vector: strictly increasing column ids with their weights.
#[derive(Debug, Clone, Copy)]
pub struct SparseView<'a> {
    pub indices: &'a [u32],
    pub values: &'a [f64],
}

impl<'a> SparseView<'a> {
    pub fn dot(&self, other: &SparseView<'_>) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < self.indices.len() && j < other.indices.len() {
            match self.indices[i].cmp(&other.indices[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.values[i] * other.values[j];
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    /// Dot product with a dense vector indexed by column id.
    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(self.values)
            .map(|(&c, &v)| v * dense[c as usize])
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVec {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseVec {
    /// Builds from `(column, weight)` pairs in any order; zero weights are
    /// dropped and repeated columns summed.
    pub fn from_pairs(mut pairs: Vec<(u32, f64)>) -> Self {
        pairs.sort_by_key(|p| p.0);
        let mut out = SparseVec::default();
        for (c, v) in pairs {
            if out.indices.last() == Some(&c) {
                *out.values.last_mut().unwrap() += v;
            } else {
                out.indices.push(c);
                out.values.push(v);
            }
        }
        let keep: Vec<bool> = out.values.iter().map(|v| *v != 0.0).collect();
        let mut k = keep.iter();
        out.indices.retain(|_| *k.next().unwrap());
        let mut k = keep.iter();
        out.values.retain(|_| *k.next().unwrap());
        out
    }

    pub fn from_dense(dense: &[f64]) -> Self {
        let mut out = SparseVec::default();
        for (c, &v) in dense.iter().enumerate() {
            if v != 0.0 {
                out.indices.push(c as u32);
                out.values.push(v);
            }
        }
        out
    }

    pub fn view(&self) -> SparseView<'_> {
        SparseView {
            indices: &self.indices,
            values: &self.values,
        }
    }

    pub fn to_dense(&self, n_cols: usize) -> Vec<f64> {
        let mut dense = vec![0.0; n_cols];
        for (&c, &v) in self.indices.iter().zip(&self.values) {
            dense[c as usize] = v;
        }
        dense
    }
}

/// Cosine similarity; 0 when either side is all-zero.
pub fn cosine(u: &SparseView<'_>, v: &SparseView<'_>) -> f64 {
    let (nu, nv) = (u.norm(), v.norm());
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    (u.dot(v) / (nu * nv)).clamp(-1.0, 1.0)
}

pub fn cosine_dense(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    (dot / (nu * nv)).clamp(-1.0, 1.0)
}

/// Compressed sparse row matrix of L2-normalized document vectors, one row
/// per surviving record in id order.
#[derive(Debug, Clone, PartialEq)]
pub struct DocTermMatrix {
    pub period: PeriodId,
    pub n_cols: usize,
    /// Identifies the vocabulary whose columns this matrix uses.
    pub vocabulary_hash: String,
    pub indptr: Vec<usize>,
    pub indices: Vec<u32>,
    pub data: Vec<f64>,
    pub doc_ids: Vec<String>,
    /// Records with no vocabulary term left.
    pub dropped_docs: Vec<String>,
}

impl DocTermMatrix {
    /// Assemble from already-normalized rows.
    pub fn from_rows(
        period: PeriodId,
        n_cols: usize,
        vocabulary_hash: String,
        rows: Vec<(String, SparseVec)>,
    ) -> Self {
        let mut m = DocTermMatrix {
            period,
            n_cols,
            vocabulary_hash,
            indptr: vec![0],
            indices: Vec::new(),
            data: Vec::new(),
            doc_ids: Vec::new(),
            dropped_docs: Vec::new(),
        };
        for (id, row) in rows {
            if row.indices.is_empty() {
                m.dropped_docs.push(id);
                continue;
            }
            m.indices.extend_from_slice(&row.indices);
            m.data.extend_from_slice(&row.values);
            m.indptr.push(m.indices.len());
            m.doc_ids.push(id);
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, i: usize) -> SparseView<'_> {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        SparseView {
            indices: &self.indices[a..b],
            values: &self.data[a..b],
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = SparseView<'_>> + '_ {
        (0..self.n_rows()).map(|i| self.row(i))
    }

    pub fn dump(&self) -> MatrixDump {
        MatrixDump {
            period: self.period,
            vocabulary_hash: self.vocabulary_hash.clone(),
            n_cols: self.n_cols,
            doc_ids: self.doc_ids.clone(),
            dropped_docs: self.dropped_docs.clone(),
            rows: self
                .rows()
                .map(|r| r.indices.iter().copied().zip(r.values.iter().copied()).collect())
                .collect(),
        }
    }
}

/// Serialized form of a [`DocTermMatrix`], for debugging and golden tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixDump {
    pub period: PeriodId,
    pub vocabulary_hash: String,
    pub n_cols: usize,
    pub doc_ids: Vec<String>,
    pub dropped_docs: Vec<String>,
    pub rows: Vec<Vec<(u32, f64)>>,
}

/// Entry (d, t) is present iff record d holds term t. Binary weighting uses
/// 1, tfidf uses the pooled idf (per-record tf is always 1). Zero weights are
/// not stored and rows left empty are dropped.
pub fn build_matrix(slice: &CorpusSlice, vocab: &Vocabulary, weighting: Weighting) -> DocTermMatrix {
    let rows = slice
        .records
        .iter()
        .map(|r| {
            let mut pairs: Vec<(u32, f64)> = r
                .term_set()
                .iter()
                .filter_map(|t| vocab.get(t))
                .map(|col| {
                    let w = match weighting {
                        Weighting::Binary => 1.0,
                        Weighting::Tfidf => vocab.idf(col),
                    };
                    (col as u32, w)
                })
                .filter(|&(_, w)| w > 0.0)
                .collect();
            pairs.sort_by_key(|p| p.0);
            let norm = pairs.iter().map(|p| p.1 * p.1).sum::<f64>().sqrt();
            let row = SparseVec {
                indices: pairs.iter().map(|p| p.0).collect(),
                values: pairs.iter().map(|p| p.1 / norm).collect(),
            };
            (r.id.clone(), row)
        })
        .collect();
    DocTermMatrix::from_rows(slice.period, vocab.len(), vocab.hash(), rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocabulary, Record};

    fn rec(id: &str, kws: &[&str]) -> Record {
        Record {
            id: id.into(),
            year: 2000,
            keywords: kws.iter().map(|s| s.to_string()).collect(),
            categories: vec![],
            title: None,
        }
    }

    fn slice(period: PeriodId, records: Vec<Record>) -> CorpusSlice {
        CorpusSlice { period, records }
    }

    #[test]
    fn binary_rows_are_unit() {
        let p1 = slice(
            PeriodId::P1,
            vec![rec("a", &["w"]), rec("b", &["w", "x", "y", "z"])],
        );
        let p2 = slice(PeriodId::P2, vec![rec("c", &["q"])]);
        let vocab = build_vocabulary(&p1, &p2, 1).unwrap();
        let m = build_matrix(&p1, &vocab, Weighting::Binary);
        assert_eq!(m.row(0).values, &[1.0]);
        assert_eq!(m.row(1).values, &[0.5, 0.5, 0.5, 0.5]);
        assert_eq!(m.nnz(), 5);
        assert!(m.dropped_docs.is_empty());
    }

    #[test]
    fn tfidf_row_weights() {
        // N = 100; "ten" in 10 docs, "one" in 1 doc → idf ln10 and ln100
        let mut p1 = vec![rec("d000", &["ten", "one"])];
        for i in 1..10 {
            p1.push(rec(&format!("d{i:03}"), &["ten"]));
        }
        for i in 10..100 {
            p1.push(rec(&format!("d{i:03}"), &["filler"]));
        }
        let p1 = slice(PeriodId::P1, p1);
        let p2 = slice(PeriodId::P2, vec![]);
        let vocab = build_vocabulary(&p1, &p2, 1).unwrap();
        let m = build_matrix(&p1, &vocab, Weighting::Tfidf);
        let row = m.row(0);
        // columns sorted: "one" < "ten"
        let (w_one, w_ten) = (row.values[0], row.values[1]);
        let (a, b) = (10f64.ln(), 100f64.ln());
        let n = (a * a + b * b).sqrt();
        assert!((w_ten - a / n).abs() < 1e-12);
        assert!((w_one - b / n).abs() < 1e-12);
        assert!((w_ten - 0.4472).abs() < 1e-4 && (w_one - 0.8944).abs() < 1e-4);
    }

    #[test]
    fn ubiquitous_term_drops_row() {
        let p1 = slice(PeriodId::P1, vec![rec("a", &["all"]), rec("b", &["all", "x"])]);
        let p2 = slice(PeriodId::P2, vec![rec("c", &["all", "x"])]);
        let vocab = build_vocabulary(&p1, &p2, 1).unwrap();
        let m = build_matrix(&p1, &vocab, Weighting::Tfidf);
        assert_eq!(m.doc_ids, vec!["b"]);
        assert_eq!(m.dropped_docs, vec!["a"]);
        assert!(m.data.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn cosine_examples() {
        let u = SparseVec::from_pairs(vec![(0, 3.0), (2, 4.0)]);
        assert!((cosine(&u.view(), &u.view()) - 1.0).abs() < 1e-15);
        let w = SparseVec::from_pairs(vec![(1, 1.0), (3, 2.0)]);
        assert_eq!(cosine(&u.view(), &w.view()), 0.0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let a = SparseVec::from_pairs(vec![(0, s), (1, s)]);
        let b = SparseVec::from_pairs(vec![(0, 1.0)]);
        assert!((cosine(&a.view(), &b.view()) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
        assert_eq!(cosine(&SparseVec::default().view(), &a.view()), 0.0);
    }

    #[test]
    fn from_pairs_merges_and_drops_zero() {
        let v = SparseVec::from_pairs(vec![(3, 1.0), (1, 0.0), (3, 2.0), (0, 5.0)]);
        assert_eq!(v.indices, vec![0, 3]);
        assert_eq!(v.values, vec![5.0, 3.0]);
        assert_eq!(SparseVec::from_dense(&v.to_dense(5)), v);
    }
}
