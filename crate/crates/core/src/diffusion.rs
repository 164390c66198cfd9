//! Term diffusion indicators: TF-IDF salience, Gini dispersion, and the
//! three-way classification into established, unusual and cross-section terms.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusSlice, Record, Vocabulary};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Established,
    Unusual,
    CrossSection,
    Unclassified,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::Established,
        Category::Unusual,
        Category::CrossSection,
        Category::Unclassified,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Established => "established",
            Category::Unusual => "unusual",
            Category::CrossSection => "cross_section",
            Category::Unclassified => "unclassified",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown term category `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermStats {
    pub term: String,
    pub tf_p1: u32,
    pub tf_p2: u32,
    pub df_p1: u32,
    pub df_p2: u32,
    pub idf_pooled: f64,
    pub tfidf: f64,
    pub gini: f64,
    pub category: Category,
}

/// Cut points of the classification table. Quantile cuts are taken over the
/// vocabulary's own distributions, so they are rank based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffusionThresholds {
    pub df_high_quantile: f64,
    pub gini_low_quantile: f64,
    pub novelty_share: f64,
}

impl Default for DiffusionThresholds {
    fn default() -> Self {
        DiffusionThresholds {
            df_high_quantile: 0.75,
            gini_low_quantile: 0.25,
            novelty_share: 0.8,
        }
    }
}

impl DiffusionThresholds {
    pub fn validate(&self) -> Result<()> {
        let open = |x: f64| x > 0.0 && x < 1.0;
        if !open(self.df_high_quantile) || !open(self.gini_low_quantile) {
            return Err(Error::InvalidConfig(
                "diffusion quantiles must lie strictly between 0 and 1".into(),
            ));
        }
        if !(self.novelty_share > 0.0 && self.novelty_share <= 1.0) {
            return Err(Error::InvalidConfig("novelty_share must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Gini coefficient over ordered pairs, `Σ_i Σ_j |x_i − x_j| / (2 m Σ x)`,
/// evaluated with the sorted closed form. Ranges over `[0, 1 − 1/m]`.
pub fn gini(shares: &[f64]) -> Result<f64> {
    let total: f64 = shares.iter().sum();
    if shares.is_empty() || !(total > 0.0) {
        return Err(Error::ZeroShares);
    }
    let m = shares.len() as f64;
    let mut sorted = shares.to_vec();
    sorted.sort_by(f64::total_cmp);
    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, x)| (i + 1) as f64 * x)
        .sum();
    let g = 2.0 * weighted / (m * total) - (m + 1.0) / m;
    Ok(g.max(0.0))
}

/// `tf · ln(N / df)`.
pub fn tfidf_score(tf: u32, df: u32, n_docs: usize) -> f64 {
    tf as f64 * (n_docs as f64 / df as f64).ln()
}

pub fn tfidf(vocab: &Vocabulary, term: &str) -> Result<f64> {
    let col = vocab
        .get(term)
        .ok_or_else(|| Error::UnknownTerm(term.to_string()))?;
    Ok(tfidf_score(vocab.tf_pooled(col), vocab.df_pooled(col), vocab.n_pooled()))
}

/// Label given to records without any classification category.
pub const UNCATEGORIZED: &str = "(uncategorized)";

/// Per-term occurrence counts over a partition of the corpus into cells
/// (classification categories or clusters).
#[derive(Debug, Clone, PartialEq)]
pub struct DispersionCells {
    pub labels: Vec<String>,
    /// `counts[col][cell]`
    pub counts: Vec<Vec<u32>>,
}

impl DispersionCells {
    /// Cells are the classification categories pooled over both periods. A
    /// record carrying several categories counts once in each.
    pub fn by_categories(vocab: &Vocabulary, p1: &CorpusSlice, p2: &CorpusSlice) -> Self {
        let docs = p1.records.iter().chain(&p2.records).map(|r| {
            let cats: Vec<String> = r.category_set().into_iter().collect();
            if cats.is_empty() {
                (r, vec![UNCATEGORIZED.to_string()])
            } else {
                (r, cats)
            }
        });
        Self::build(vocab, docs)
    }

    /// Cells are cluster labels keyed by record id (for example `"P1:3"`).
    /// Records absent from the map hold no vocabulary term and are skipped.
    pub fn by_clusters(
        vocab: &Vocabulary,
        p1: &CorpusSlice,
        p2: &CorpusSlice,
        cell_of: &HashMap<String, String>,
    ) -> Self {
        let docs = p1
            .records
            .iter()
            .chain(&p2.records)
            .filter_map(|r| cell_of.get(&r.id).map(|c| (r, vec![c.clone()])));
        Self::build(vocab, docs)
    }

    fn build<'a>(
        vocab: &Vocabulary,
        docs: impl Iterator<Item = (&'a Record, Vec<String>)>,
    ) -> Self {
        let docs: Vec<_> = docs.collect();
        let labels: Vec<String> = docs
            .iter()
            .flat_map(|(_, cells)| cells.iter().cloned())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let cell_index: BTreeMap<&str, usize> = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i))
            .collect();
        let mut counts = vec![vec![0u32; labels.len()]; vocab.len()];
        for (record, cells) in &docs {
            for term in record.term_set() {
                if let Some(col) = vocab.get(&term) {
                    for c in cells {
                        counts[col][cell_index[c.as_str()]] += 1;
                    }
                }
            }
        }
        DispersionCells { labels, counts }
    }

    pub fn n_cells(&self) -> usize {
        self.labels.len()
    }

    pub fn gini_of(&self, col: usize) -> Result<f64> {
        let shares: Vec<f64> = self.counts[col].iter().map(|&c| c as f64).collect();
        gini(&shares)
    }
}

pub fn term_gini(vocab: &Vocabulary, cells: &DispersionCells, term: &str) -> Result<f64> {
    let col = vocab
        .get(term)
        .ok_or_else(|| Error::UnknownTerm(term.to_string()))?;
    cells.gini_of(col)
}

/// Nearest-rank quantile. A constant distribution yields its midpoint.
pub fn quantile_cut(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    if min == max {
        return (min + max) / 2.0;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// The classification table; first matching row wins.
pub fn decide(
    df_p1: u32,
    df_p2: u32,
    gini: f64,
    df_cut: f64,
    gini_cut: f64,
    novelty_share: f64,
) -> Category {
    let pooled = df_p1 + df_p2;
    let novelty = df_p2 as f64 / pooled as f64;
    if novelty >= novelty_share && (pooled as f64) < df_cut {
        Category::Unusual
    } else if gini < gini_cut && df_p1 >= 1 {
        Category::CrossSection
    } else if pooled as f64 >= df_cut && df_p1 >= 1 {
        Category::Established
    } else {
        Category::Unclassified
    }
}

pub fn classify_terms(
    vocab: &Vocabulary,
    cells: &DispersionCells,
    thresholds: &DiffusionThresholds,
) -> Result<Vec<TermStats>> {
    thresholds.validate()?;
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary { min_df: 0 });
    }
    let ginis = (0..vocab.len())
        .into_par_iter()
        .map(|col| cells.gini_of(col))
        .collect::<Result<Vec<f64>>>()?;
    let dfs: Vec<f64> = (0..vocab.len()).map(|c| vocab.df_pooled(c) as f64).collect();
    let df_cut = quantile_cut(&dfs, thresholds.df_high_quantile);
    let gini_cut = quantile_cut(&ginis, thresholds.gini_low_quantile);

    Ok((0..vocab.len())
        .map(|col| {
            let idf = vocab.idf(col);
            TermStats {
                term: vocab.terms[col].clone(),
                tf_p1: vocab.tf_p1[col],
                tf_p2: vocab.tf_p2[col],
                df_p1: vocab.df_p1[col],
                df_p2: vocab.df_p2[col],
                idf_pooled: idf,
                tfidf: vocab.tf_pooled(col) as f64 * idf,
                gini: ginis[col],
                category: decide(
                    vocab.df_p1[col],
                    vocab.df_p2[col],
                    ginis[col],
                    df_cut,
                    gini_cut,
                    thresholds.novelty_share,
                ),
            }
        })
        .collect())
}
