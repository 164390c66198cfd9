//! Term diffusion indicators and diachronic cluster analysis for
//! keyword-indexed bibliographic corpora.
//!
//! The crate covers two complementary views of a field observed over two
//! successive time periods:
//!
//! * [`diffusion`] scores every keyword with TF-IDF and a Gini dispersion
//!   indicator and sorts it into established, unusual or cross-section terms.
//! * [`cluster`], [`mapping`] and [`diachrony`] cluster each period with axial
//!   K-means, project the cluster axes to a 2D map, and link second-period
//!   clusters to their first-period roots.
//!
//! [`syngen`] produces synthetic corpora with planted structure for testing.

pub mod cluster;
pub mod corpus;
pub mod diachrony;
pub mod diffusion;
pub mod eigen;
mod error;
pub mod mapping;
pub mod seed;
pub mod syngen;
pub mod vectorize;

pub use cluster::{fit_axial_kmeans, ClusterConfig, ClusterModel, ClusterSummary};
pub use corpus::{
    build_vocabulary, load_corpus, normalize_term, split_periods, CorpusSlice, Format, PeriodId,
    PeriodSpec, Record, Vocabulary,
};
pub use diachrony::{cross_table, cross_table_with, link_periods, CrossTab, Linkage, LinkStatus};
pub use diffusion::{classify_terms, gini, Category, DiffusionThresholds, TermStats};
pub use error::{Error, ErrorKind, Result};
pub use mapping::{build_edges, connected_components, pca_2d, ClusterMap, Edge};
pub use vectorize::{build_matrix, cosine, DocTermMatrix, SparseVec, Weighting};
