//! Pipeline stages. Each reads its inputs from the artifact directory (the
//! first reads the configured corpus) and writes its own artifacts there.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use diachron_core::cluster::summarize_clusters;
use diachron_core::diachrony::link_axes;
use diachron_core::diffusion::DispersionCells;
use diachron_core::mapping::render_svg;
use diachron_core::{
    build_matrix, build_vocabulary, classify_terms, cross_table_with, fit_axial_kmeans,
    load_corpus, split_periods, ClusterMap, Error as CoreError, Format, PeriodId, Record,
    Vocabulary,
};
use diachron_core::corpus::{write_jsonl, PeriodSplit};
use log::info;
use sha2::{Digest, Sha256};

use crate::artifacts::{self as art, ClustersFile, IngestReport, LinkageFile, Manifest};
use crate::config::{GiniCells, Resolved, RunConfig};
use crate::error::{CliError, Result, Stage, StageExt};

const PERIODS: [PeriodId; 2] = [PeriodId::P1, PeriodId::P2];

/// Stages in execution order for the configured dispersion cells.
pub fn pipeline(config: &RunConfig) -> Vec<Stage> {
    match config.gini_cells {
        GiniCells::Categories => vec![
            Stage::Ingest,
            Stage::Terms,
            Stage::Cluster,
            Stage::Map,
            Stage::Link,
            Stage::Report,
        ],
        GiniCells::Clusters => vec![
            Stage::Ingest,
            Stage::Cluster,
            Stage::Terms,
            Stage::Map,
            Stage::Link,
            Stage::Report,
        ],
    }
}

/// Run one stage against `dir` and record it in the manifest.
pub fn run_stage(stage: Stage, resolved: &Resolved, dir: &Path) -> Result<()> {
    let started = Instant::now();
    info!("{stage}: start");
    let config = &resolved.config;
    match stage {
        Stage::Ingest => ingest(config, &resolved.input_path, dir)?,
        Stage::Terms => terms(config, dir)?,
        Stage::Cluster => cluster(config, dir)?,
        Stage::Map => map(config, dir)?,
        Stage::Link => link(config, dir)?,
        Stage::Report => report(dir)?,
        Stage::Config | Stage::Syngen | Stage::Run => unreachable!("not a pipeline stage"),
    }
    let elapsed = started.elapsed().as_millis() as u64;
    info!("{stage}: done in {elapsed} ms");
    update_manifest(stage, resolved, dir, elapsed)
}

/// Full pipeline into a staging directory next to the output directory;
/// files move into place only once every stage succeeded.
pub fn run_all(resolved: &Resolved) -> Result<()> {
    let out = &resolved.out_dir;
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(|e| CliError::io(Stage::Run, &parent, e))?;
    let staging = tempfile::Builder::new()
        .prefix(".diachron-staging-")
        .tempdir_in(&parent)
        .map_err(|e| CliError::io(Stage::Run, &parent, e))?;
    for stage in pipeline(&resolved.config) {
        run_stage(stage, resolved, staging.path())?;
    }
    fs::create_dir_all(out).map_err(|e| CliError::io(Stage::Run, out, e))?;
    let entries = fs::read_dir(staging.path()).map_err(|e| CliError::io(Stage::Run, staging.path(), e))?;
    let mut names: Vec<_> = entries
        .map(|e| e.map(|e| e.file_name()))
        .collect::<std::io::Result<_>>()
        .map_err(|e| CliError::io(Stage::Run, staging.path(), e))?;
    names.sort();
    for name in names {
        let target = out.join(&name);
        fs::rename(staging.path().join(&name), &target)
            .map_err(|e| CliError::io(Stage::Run, &target, e))?;
    }
    Ok(())
}

fn hash_file(stage: Stage, path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(stage, path, e))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn update_manifest(stage: Stage, resolved: &Resolved, dir: &Path, elapsed_ms: u64) -> Result<()> {
    let path = dir.join(art::MANIFEST);
    let existing: Option<Manifest> = if path.is_file() {
        art::read_json(stage, &path).ok()
    } else {
        None
    };
    let mut manifest = match existing {
        Some(m) if m.config == resolved.config && stage != Stage::Ingest => m,
        _ => Manifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: resolved.config.clone(),
            input_sha256: hash_file(stage, &resolved.input_path)?,
            stages: Vec::new(),
            timings_ms: None,
        },
    };
    let order = pipeline(&resolved.config);
    let mut done: Vec<Stage> = order
        .iter()
        .copied()
        .filter(|s| manifest.stages.iter().any(|n| n == s.as_str()))
        .collect();
    if !done.contains(&stage) {
        done.push(stage);
    }
    done.sort_by_key(|s| order.iter().position(|o| o == s));
    manifest.stages = done.iter().map(|s| s.as_str().to_string()).collect();
    if resolved.config.record_timings {
        manifest
            .timings_ms
            .get_or_insert_with(BTreeMap::new)
            .insert(stage.as_str().to_string(), elapsed_ms);
    } else {
        manifest.timings_ms = None;
    }
    art::write_json(stage, &path, &manifest)
}

struct Corpus {
    split: PeriodSplit,
    vocab: Vocabulary,
}

fn read_corpus(stage: Stage, config: &RunConfig, dir: &Path) -> Result<Corpus> {
    let path = art::require(stage, dir, art::CORPUS, "corpus", "ingest")?;
    let (records, _) = load_corpus(&path, Format::Jsonl).at(stage)?;
    let split = split_periods(&records, &config.periods).at(stage)?;
    let vocab = build_vocabulary(&split.p1, &split.p2, config.min_df).at(stage)?;
    Ok(Corpus { split, vocab })
}

fn read_clusters(stage: Stage, dir: &Path, period: PeriodId) -> Result<ClustersFile> {
    let path = art::require(stage, dir, &art::clusters_file(period), "clusters", "cluster")?;
    art::read_json(stage, &path)
}

fn ingest(config: &RunConfig, input: &Path, dir: &Path) -> Result<()> {
    let stage = Stage::Ingest;
    let (records, report) = load_corpus(input, config.format).at(stage)?;
    let split = split_periods(&records, &config.periods).at(stage)?;
    build_vocabulary(&split.p1, &split.p2, config.min_df).at(stage)?;
    fs::create_dir_all(dir).map_err(|e| CliError::io(stage, dir, e))?;
    let mut sorted: Vec<&Record> = records.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut buf = Vec::new();
    let owned: Vec<Record> = sorted.into_iter().cloned().collect();
    write_jsonl(&owned, &mut buf).map_err(|e| CliError::io(stage, dir.join(art::CORPUS), e))?;
    art::write_bytes(stage, &dir.join(art::CORPUS), &buf)?;
    let report = IngestReport {
        records_read: report.records_read,
        dropped_empty_keywords: report.dropped_empty_keywords,
        loaded: report.loaded,
        dropped_outside_periods: split.dropped_outside,
        docs_p1: split.p1.n_docs(),
        docs_p2: split.p2.n_docs(),
    };
    info!(
        "ingest: {} records loaded, {} in P1, {} in P2",
        report.loaded, report.docs_p1, report.docs_p2
    );
    art::write_json(stage, &dir.join(art::LOAD_REPORT), &report)
}

fn terms(config: &RunConfig, dir: &Path) -> Result<()> {
    let stage = Stage::Terms;
    let corpus = read_corpus(stage, config, dir)?;
    let (p1, p2) = (&corpus.split.p1, &corpus.split.p2);
    let cells = match config.gini_cells {
        GiniCells::Categories => DispersionCells::by_categories(&corpus.vocab, p1, p2),
        GiniCells::Clusters => {
            let mut cell_of = HashMap::new();
            for period in PERIODS {
                let file = read_clusters(stage, dir, period)?;
                if file.vocabulary_hash != corpus.vocab.hash() {
                    return Err(CoreError::VocabularyMismatch).at(stage);
                }
                cell_of.extend(file.cells());
            }
            DispersionCells::by_clusters(&corpus.vocab, p1, p2, &cell_of)
        }
    };
    let stats = classify_terms(&corpus.vocab, &cells, &config.thresholds).at(stage)?;
    info!("terms: {} terms classified", stats.len());
    art::write_terms(stage, &dir.join(art::TERMS), &stats)
}

fn cluster(config: &RunConfig, dir: &Path) -> Result<()> {
    let stage = Stage::Cluster;
    let corpus = read_corpus(stage, config, dir)?;
    for (period, slice) in [(PeriodId::P1, &corpus.split.p1), (PeriodId::P2, &corpus.split.p2)] {
        let matrix = build_matrix(slice, &corpus.vocab, config.weighting);
        if config.dump_matrix {
            art::write_json(stage, &dir.join(art::matrix_file(period)), &matrix.dump())?;
        }
        let cfg = config.cluster_config(period);
        let model = fit_axial_kmeans(&matrix, &cfg).at(stage)?;
        info!(
            "cluster: {period} k = {} objective {:.6} after {} iterations",
            model.k(),
            model.objective(),
            model.objective_trace.len()
        );
        let summaries = summarize_clusters(&model, &corpus.vocab, config.top_m);
        let file = ClustersFile::new(&model, &summaries, cfg, matrix.dropped_docs.clone());
        art::write_json(stage, &dir.join(art::clusters_file(period)), &file)?;
    }
    Ok(())
}

fn map(config: &RunConfig, dir: &Path) -> Result<()> {
    let stage = Stage::Map;
    for period in PERIODS {
        let file = read_clusters(stage, dir, period)?;
        let map = ClusterMap::build(
            period,
            &file.axes(),
            file.n_cols,
            &file.labels(),
            &file.sizes(),
            config.edge_threshold,
        )
        .at(stage)?;
        info!(
            "map: {period} {} edges, {} networks",
            map.edges.len(),
            map.networks().count()
        );
        art::write_json(stage, &dir.join(art::map_json_file(period)), &map)?;
        art::write_bytes(stage, &dir.join(art::map_svg_file(period)), render_svg(&map).as_bytes())?;
    }
    Ok(())
}

fn link(config: &RunConfig, dir: &Path) -> Result<()> {
    let stage = Stage::Link;
    let p1 = read_clusters(stage, dir, PeriodId::P1)?;
    let p2 = read_clusters(stage, dir, PeriodId::P2)?;
    if p1.vocabulary_hash != p2.vocabulary_hash || p1.n_cols != p2.n_cols {
        return Err(CoreError::VocabularyMismatch).at(stage);
    }
    let terms_path = art::require(stage, dir, art::TERMS, "terms", "terms")?;
    let categories = art::read_term_categories(stage, &terms_path)?;
    let linkage = link_axes(&p1.axes(), &p2.axes(), config.link_threshold);
    let summaries = p2.summaries(stage)?;
    let table = cross_table_with(&linkage, &summaries, |t| categories.get(t).copied(), config.top_m)
        .at(stage)?;
    info!(
        "link: {} rooted, {} new",
        linkage.count(diachron_core::LinkStatus::Rooted),
        linkage.count(diachron_core::LinkStatus::New)
    );
    art::write_json(
        stage,
        &dir.join(art::LINKAGE),
        &LinkageFile::new(&linkage, &p1.labels(), &p2.labels()),
    )?;
    let mut buf = Vec::new();
    table
        .write_csv(&mut buf)
        .map_err(|e| CliError::io(stage, dir.join(art::CROSSTAB), e))?;
    art::write_bytes(stage, &dir.join(art::CROSSTAB), &buf)
}

/// Re-render the SVG maps from their JSON twins.
fn report(dir: &Path) -> Result<()> {
    let stage = Stage::Report;
    for period in PERIODS {
        let path = art::require(stage, dir, &art::map_json_file(period), "map", "map")?;
        let map: ClusterMap = art::read_json(stage, &path)?;
        art::write_bytes(stage, &dir.join(art::map_svg_file(period)), render_svg(&map).as_bytes())?;
    }
    Ok(())
}
