//! Artifact file names, formats and readers.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use diachron_core::cluster::{Axis, ClusterSummary};
use diachron_core::diachrony::LinkStatus;
use diachron_core::{
    Category, ClusterConfig, ClusterModel, Linkage, PeriodId, SparseVec, TermStats,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::config::RunConfig;
use crate::error::{CliError, Result, Stage};

pub const CORPUS: &str = "corpus.jsonl";
pub const LOAD_REPORT: &str = "load_report.json";
pub const TERMS: &str = "terms.csv";
pub const LINKAGE: &str = "linkage.json";
pub const CROSSTAB: &str = "crosstab.csv";
pub const MANIFEST: &str = "run_manifest.json";

pub fn clusters_file(period: PeriodId) -> String {
    format!("clusters_{period}.json")
}

pub fn matrix_file(period: PeriodId) -> String {
    format!("matrix_{period}.json")
}

pub fn map_json_file(period: PeriodId) -> String {
    format!("map_{period}.json")
}

pub fn map_svg_file(period: PeriodId) -> String {
    format!("map_{period}.svg")
}

/// A JSON number printed with six decimals.
pub fn fixed6(x: f64) -> Box<RawValue> {
    RawValue::from_string(format!("{x:.6}")).expect("formatted float is valid JSON")
}

fn parse_fixed(stage: Stage, file: &str, raw: &RawValue) -> Result<f64> {
    raw.get().parse().map_err(|_| CliError::BadArtifact {
        stage,
        file: file.to_string(),
        message: format!("`{}` is not a number", raw.get()),
    })
}

/// Path of an upstream artifact, or an error naming it.
pub fn require(
    stage: Stage,
    dir: &Path,
    file: &str,
    what: &'static str,
    needs: &'static str,
) -> Result<PathBuf> {
    let path = dir.join(file);
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError::MissingArtifact {
            stage,
            what,
            file: file.to_string(),
            needs,
        })
    }
}

pub fn write_bytes(stage: Stage, path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(stage, path, e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(stage: Stage, path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
    text.push('\n');
    write_bytes(stage, path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(stage: Stage, path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(stage, path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::BadArtifact {
        stage,
        file: file_name(path),
        message: e.to_string(),
    })
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub records_read: usize,
    pub dropped_empty_keywords: usize,
    pub loaded: usize,
    pub dropped_outside_periods: usize,
    pub docs_p1: usize,
    pub docs_p2: usize,
}

/// `term,tf_p1,tf_p2,df_p1,df_p2,tfidf,gini,category`, reals with six decimals.
pub fn write_terms(stage: Stage, path: &Path, stats: &[TermStats]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Core {
        stage,
        source: e.into(),
    };
    w.write_record([
        "term", "tf_p1", "tf_p2", "df_p1", "df_p2", "tfidf", "gini", "category",
    ])
    .map_err(csv_err)?;
    for s in stats {
        w.write_record([
            s.term.clone(),
            s.tf_p1.to_string(),
            s.tf_p2.to_string(),
            s.df_p1.to_string(),
            s.df_p2.to_string(),
            format!("{:.6}", s.tfidf),
            format!("{:.6}", s.gini),
            s.category.as_str().to_string(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::io(stage, path, e.into_error()))?;
    write_bytes(stage, path, &bytes)
}

#[derive(Deserialize)]
struct TermRow {
    term: String,
    category: String,
}

/// Category per term from `terms.csv`.
pub fn read_term_categories(stage: Stage, path: &Path) -> Result<HashMap<String, Category>> {
    let bad = |message: String| CliError::BadArtifact {
        stage,
        file: TERMS.to_string(),
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let mut out = HashMap::new();
    for row in reader.deserialize::<TermRow>() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        let category = row.category.parse().map_err(|_| bad(row.category.clone()))?;
        out.insert(row.term, category);
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ClusterEntry {
    pub id: usize,
    pub label: String,
    pub size: usize,
    pub top_terms: Vec<(String, Box<RawValue>)>,
    pub members: Vec<String>,
    /// Nonzero axis components `(column, weight)`, full precision.
    pub axis: Vec<(u32, f64)>,
}

/// One period's clustering as written to `clusters_Px.json`.
#[derive(Debug, Serialize, Deserialize)]
pub struct ClustersFile {
    pub period: PeriodId,
    pub vocabulary_hash: String,
    pub n_cols: usize,
    pub config: ClusterConfig,
    pub restart: usize,
    pub objective_trace: Vec<f64>,
    /// Records without any vocabulary term, hence unclustered.
    pub dropped_docs: Vec<String>,
    pub clusters: Vec<ClusterEntry>,
}

impl ClustersFile {
    pub fn new(
        model: &ClusterModel,
        summaries: &[ClusterSummary],
        config: ClusterConfig,
        dropped_docs: Vec<String>,
    ) -> Self {
        let clusters = summaries
            .iter()
            .map(|s| {
                let axis = model.axes[s.id].to_sparse();
                ClusterEntry {
                    id: s.id,
                    label: s.label.clone(),
                    size: s.size,
                    top_terms: s
                        .top_terms
                        .iter()
                        .map(|(t, w)| (t.clone(), fixed6(*w)))
                        .collect(),
                    members: model.members(s.id).map(str::to_string).collect(),
                    axis: axis.indices.into_iter().zip(axis.values).collect(),
                }
            })
            .collect();
        ClustersFile {
            period: model.period,
            vocabulary_hash: model.vocabulary_hash.clone(),
            n_cols: model.n_cols,
            config,
            restart: model.restart,
            objective_trace: model.objective_trace.clone(),
            dropped_docs,
            clusters,
        }
    }

    pub fn axes(&self) -> Vec<SparseVec> {
        self.clusters
            .iter()
            .map(|c| SparseVec::from_pairs(c.axis.clone()))
            .collect()
    }

    pub fn labels(&self) -> Vec<String> {
        self.clusters.iter().map(|c| c.label.clone()).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.clusters.iter().map(|c| c.size).collect()
    }

    /// Model rebuilt from the file; rows are listed cluster by cluster.
    pub fn model(&self) -> ClusterModel {
        let mut assignment = Vec::new();
        let mut doc_ids = Vec::new();
        for c in &self.clusters {
            for m in &c.members {
                assignment.push(c.id);
                doc_ids.push(m.clone());
            }
        }
        ClusterModel {
            period: self.period,
            n_cols: self.n_cols,
            vocabulary_hash: self.vocabulary_hash.clone(),
            axes: self.axes().into_iter().map(Axis::Sparse).collect(),
            assignment,
            doc_ids,
            objective_trace: self.objective_trace.clone(),
            sizes: self.sizes(),
            restart: self.restart,
        }
    }

    pub fn summaries(&self, stage: Stage) -> Result<Vec<ClusterSummary>> {
        let file = clusters_file(self.period);
        self.clusters
            .iter()
            .map(|c| {
                let top_terms = c
                    .top_terms
                    .iter()
                    .map(|(t, w)| Ok((t.clone(), parse_fixed(stage, &file, w)?)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(ClusterSummary {
                    id: c.id,
                    label: c.label.clone(),
                    top_terms,
                    size: c.size,
                })
            })
            .collect()
    }

    /// Cell label per clustered record, e.g. `"P1:3"`.
    pub fn cells(&self) -> impl Iterator<Item = (String, String)> + '_ {
        self.clusters.iter().flat_map(move |c| {
            c.members
                .iter()
                .map(move |m| (m.clone(), format!("{}:{}", self.period, c.id)))
        })
    }
}

#[derive(Debug, Serialize)]
pub struct ParentEntry {
    pub cluster: usize,
    pub label: String,
    pub similarity: Box<RawValue>,
}

#[derive(Debug, Serialize)]
pub struct LinkEntry {
    pub cluster: usize,
    pub label: String,
    pub status: LinkStatus,
    pub best_parent: Option<usize>,
    pub parents: Vec<ParentEntry>,
}

#[derive(Debug, Serialize)]
pub struct LinkageFile {
    pub threshold: f64,
    pub rooted: usize,
    pub new: usize,
    pub clusters: Vec<LinkEntry>,
    /// `similarity[j][i]`: second-period cluster j against first-period cluster i.
    pub similarity: Vec<Vec<Box<RawValue>>>,
}

impl LinkageFile {
    pub fn new(linkage: &Linkage, labels_p1: &[String], labels_p2: &[String]) -> Self {
        LinkageFile {
            threshold: linkage.threshold,
            rooted: linkage.count(LinkStatus::Rooted),
            new: linkage.count(LinkStatus::New),
            clusters: linkage
                .links
                .iter()
                .map(|l| LinkEntry {
                    cluster: l.cluster,
                    label: labels_p2[l.cluster].clone(),
                    status: l.status,
                    best_parent: l.best_parent().map(|p| p.cluster),
                    parents: l
                        .parents
                        .iter()
                        .map(|p| ParentEntry {
                            cluster: p.cluster,
                            label: labels_p1[p.cluster].clone(),
                            similarity: fixed6(p.similarity),
                        })
                        .collect(),
                })
                .collect(),
            similarity: linkage
                .similarity
                .iter()
                .map(|row| row.iter().map(|&s| fixed6(s)).collect())
                .collect(),
        }
    }
}

/// `run_manifest.json`: what produced the artifact directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config: RunConfig,
    pub input_sha256: String,
    /// Completed stages in pipeline order.
    pub stages: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<BTreeMap<String, u64>>,
}
