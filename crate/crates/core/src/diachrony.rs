//! Cross-period linkage of clusters and the term-category cross-table.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cluster::{ClusterModel, ClusterSummary};
use crate::corpus::Vocabulary;
use crate::diffusion::{Category, TermStats};
use crate::error::{Error, Result};
use crate::vectorize::{cosine, SparseVec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkStatus {
    Rooted,
    New,
}

impl LinkStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            LinkStatus::Rooted => "rooted",
            LinkStatus::New => "new",
        }
    }
}

impl fmt::Display for LinkStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Parent {
    /// First-period cluster id.
    pub cluster: usize,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterLink {
    /// Second-period cluster id.
    pub cluster: usize,
    pub status: LinkStatus,
    /// Sorted by similarity descending, then parent id ascending.
    pub parents: Vec<Parent>,
}

impl ClusterLink {
    pub fn best_parent(&self) -> Option<&Parent> {
        self.parents.first()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linkage {
    pub threshold: f64,
    pub links: Vec<ClusterLink>,
    /// `similarity[j][i]`: second-period cluster j against first-period cluster i.
    pub similarity: Vec<Vec<f64>>,
}

impl Linkage {
    pub fn count(&self, status: LinkStatus) -> usize {
        self.links.iter().filter(|l| l.status == status).count()
    }
}

/// Cosine of every second-period axis against every first-period axis;
/// parents are those at or above `threshold`.
pub fn link_axes(axes_p1: &[SparseVec], axes_p2: &[SparseVec], threshold: f64) -> Linkage {
    let similarity: Vec<Vec<f64>> = axes_p2
        .iter()
        .map(|b| axes_p1.iter().map(|a| cosine(&b.view(), &a.view())).collect())
        .collect();
    let links = similarity
        .iter()
        .enumerate()
        .map(|(j, row)| {
            let mut parents: Vec<Parent> = row
                .iter()
                .enumerate()
                .filter(|&(_, &s)| s >= threshold)
                .map(|(i, &s)| Parent {
                    cluster: i,
                    similarity: s,
                })
                .collect();
            parents.sort_by(|a, b| {
                b.similarity
                    .total_cmp(&a.similarity)
                    .then(a.cluster.cmp(&b.cluster))
            });
            ClusterLink {
                cluster: j,
                status: if parents.is_empty() {
                    LinkStatus::New
                } else {
                    LinkStatus::Rooted
                },
                parents,
            }
        })
        .collect();
    Linkage {
        threshold,
        links,
        similarity,
    }
}

pub fn link_periods(
    model_p1: &ClusterModel,
    model_p2: &ClusterModel,
    vocab: &Vocabulary,
    threshold: f64,
) -> Result<Linkage> {
    let hash = vocab.hash();
    if model_p1.vocabulary_hash != hash
        || model_p2.vocabulary_hash != hash
        || model_p1.n_cols != vocab.len()
        || model_p2.n_cols != vocab.len()
    {
        return Err(Error::VocabularyMismatch);
    }
    let a1: Vec<SparseVec> = model_p1.axes.iter().map(|a| a.to_sparse()).collect();
    let a2: Vec<SparseVec> = model_p2.axes.iter().map(|a| a.to_sparse()).collect();
    Ok(link_axes(&a1, &a2, threshold))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossTabRow {
    pub status: LinkStatus,
    pub n_clusters: usize,
    pub n_terms: usize,
    /// Shares in [`Category::ALL`] order; `None` when the status has no
    /// clusters or no terms.
    pub shares: Option<[f64; 4]>,
}

impl CrossTabRow {
    pub fn share(&self, category: Category) -> Option<f64> {
        self.shares.map(|s| s[category.index()])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossTab {
    pub rows: Vec<CrossTabRow>,
}

impl CrossTab {
    pub fn row(&self, status: LinkStatus) -> &CrossTabRow {
        self.rows.iter().find(|r| r.status == status).expect("both rows present")
    }

    /// `status,established,unusual,cross_section,unclassified,n_terms`, shares
    /// with six decimals; rows without clusters carry `NA` shares.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "status,established,unusual,cross_section,unclassified,n_terms")?;
        for r in &self.rows {
            match r.shares {
                Some(s) => writeln!(
                    w,
                    "{},{:.6},{:.6},{:.6},{:.6},{}",
                    r.status, s[0], s[1], s[2], s[3], r.n_terms
                )?,
                None => writeln!(w, "{},NA,NA,NA,NA,{}", r.status, r.n_terms)?,
            }
        }
        Ok(())
    }
}

/// Pools the top `top_m` terms of every second-period cluster by cluster
/// status and reports the category shares of each pool.
pub fn cross_table(
    linkage: &Linkage,
    summaries_p2: &[ClusterSummary],
    term_stats: &[TermStats],
    top_m: usize,
) -> Result<CrossTab> {
    let category: HashMap<&str, Category> = term_stats
        .iter()
        .map(|t| (t.term.as_str(), t.category))
        .collect();
    cross_table_with(linkage, summaries_p2, |t| category.get(t).copied(), top_m)
}

/// [`cross_table`] with categories supplied by a lookup function.
pub fn cross_table_with(
    linkage: &Linkage,
    summaries_p2: &[ClusterSummary],
    category_of: impl Fn(&str) -> Option<Category>,
    top_m: usize,
) -> Result<CrossTab> {
    let mut rows = Vec::new();
    for status in [LinkStatus::Rooted, LinkStatus::New] {
        let mut counts = [0usize; 4];
        let mut n_clusters = 0;
        for link in linkage.links.iter().filter(|l| l.status == status) {
            n_clusters += 1;
            let summary = summaries_p2
                .iter()
                .find(|s| s.id == link.cluster)
                .ok_or_else(|| {
                    Error::InvalidConfig(format!("no summary for cluster {}", link.cluster))
                })?;
            for (term, _) in summary.top_terms.iter().take(top_m) {
                let c = category_of(term).ok_or_else(|| Error::UnknownTerm(term.clone()))?;
                counts[c.index()] += 1;
            }
        }
        let n_terms: usize = counts.iter().sum();
        let shares = (n_terms > 0).then(|| counts.map(|c| c as f64 / n_terms as f64));
        rows.push(CrossTabRow {
            status,
            n_clusters,
            n_terms,
            shares,
        });
    }
    Ok(CrossTab { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(pairs: &[(u32, f64)]) -> SparseVec {
        SparseVec::from_pairs(pairs.to_vec())
    }

    fn stats(term: &str, category: Category) -> TermStats {
        TermStats {
            term: term.into(),
            tf_p1: 1,
            tf_p2: 1,
            df_p1: 1,
            df_p2: 1,
            idf_pooled: 0.0,
            tfidf: 0.0,
            gini: 0.0,
            category,
        }
    }

    fn summary(id: usize, terms: &[&str]) -> ClusterSummary {
        ClusterSummary {
            id,
            label: terms[0].into(),
            top_terms: terms.iter().map(|t| (t.to_string(), 0.5)).collect(),
            size: 1,
        }
    }

    #[test]
    fn identical_periods_are_rooted_in_twins() {
        let axes = vec![sv(&[(0, 1.0)]), sv(&[(1, 0.6), (2, 0.8)]), sv(&[(3, 1.0)])];
        let l = link_axes(&axes, &axes, 0.3);
        for (j, link) in l.links.iter().enumerate() {
            assert_eq!(link.status, LinkStatus::Rooted);
            let best = link.best_parent().unwrap();
            assert_eq!(best.cluster, j);
            assert!((best.similarity - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn disjoint_support_is_new() {
        let p1 = vec![sv(&[(0, 1.0)]), sv(&[(1, 1.0)])];
        let p2 = vec![sv(&[(0, 1.0)]), sv(&[(5, 0.6), (6, 0.8)])];
        let l = link_axes(&p1, &p2, 0.2);
        assert_eq!(l.links[1].status, LinkStatus::New);
        assert!(l.links[1].best_parent().is_none());
        assert_eq!(l.count(LinkStatus::New), 1);
    }

    #[test]
    fn parents_sorted_and_thresholded() {
        let p1 = vec![sv(&[(0, 1.0)]), sv(&[(1, 1.0)]), sv(&[(0, 1.0)])];
        let p2 = vec![sv(&[(0, 0.8), (1, 0.6)])];
        let l = link_axes(&p1, &p2, 0.7);
        let ids: Vec<usize> = l.links[0].parents.iter().map(|p| p.cluster).collect();
        assert_eq!(ids, vec![0, 2]);
        // lowering the threshold admits every overlapping axis
        assert_eq!(link_axes(&p1, &p2, 1e-9).links[0].parents.len(), 3);
        // ρ = 1 keeps only exact matches
        assert_eq!(link_axes(&p1, &p1, 1.0).links[0].parents.len(), 2);
    }

    #[test]
    fn cross_table_rows() {
        let p1 = vec![sv(&[(0, 1.0)])];
        let p2 = vec![sv(&[(0, 1.0)]), sv(&[(9, 1.0)])];
        let l = link_axes(&p1, &p2, 0.3);
        let terms = vec![
            stats("a", Category::Established),
            stats("b", Category::Established),
            stats("n1", Category::Unusual),
            stats("n2", Category::Unclassified),
        ];
        let sums = vec![summary(0, &["a", "b"]), summary(1, &["n1", "n2"])];
        let t = cross_table(&l, &sums, &terms, 10).unwrap();
        assert_eq!(t.row(LinkStatus::Rooted).shares, Some([1.0, 0.0, 0.0, 0.0]));
        assert_eq!(t.row(LinkStatus::New).shares, Some([0.0, 0.5, 0.0, 0.5]));
        for r in &t.rows {
            assert!((r.shares.unwrap().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_status_row() {
        let axes = vec![sv(&[(0, 1.0)])];
        let l = link_axes(&axes, &axes, 0.3);
        let terms = vec![stats("a", Category::Established)];
        let t = cross_table(&l, &[summary(0, &["a"])], &terms, 10).unwrap();
        let new = t.row(LinkStatus::New);
        assert_eq!(new.n_clusters, 0);
        assert_eq!(new.shares, None);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "status,established,unusual,cross_section,unclassified,n_terms\n\
             rooted,1.000000,0.000000,0.000000,0.000000,1\n\
             new,NA,NA,NA,NA,0\n"
        );
    }

    #[test]
    fn missing_term_stats_is_error() {
        let axes = vec![sv(&[(0, 1.0)])];
        let l = link_axes(&axes, &axes, 0.3);
        assert!(matches!(
            cross_table(&l, &[summary(0, &["zz"])], &[], 10),
            Err(Error::UnknownTerm(_))
        ));
    }
}
