//! Deterministic synthetic corpora with planted topic blocks.
//!
//! Every block owns a disjoint vocabulary split into a frequently drawn
//! core and a rarer tail. Optional ingredients:
//!
//! * shared terms drawn by documents of every block (cross-section truth),
//! * a novel block that only exists in the second period (unusual truth),
//! * groups: documents of a grouped block borrow core terms from a sibling
//!   block of the same group, which links their cluster axes into one network,
//! * noise: an occasional core term borrowed from another block.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{PeriodSpec, Record};
use crate::diffusion::Category;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    pub vocab_size: usize,
    /// Leading terms of the block vocabulary drawn with `core_share`
    /// probability. Equal to `vocab_size` for a uniform block.
    pub core_terms: usize,
    pub docs_p1: usize,
    pub docs_p2: usize,
    pub category: String,
    #[serde(default)]
    pub group: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NovelBlockSpec {
    pub vocab_size: usize,
    pub docs: usize,
    pub category: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantSpec {
    pub blocks: Vec<BlockSpec>,
    pub shared_terms: usize,
    /// Probability that a document carries one shared term.
    pub shared_rate: f64,
    pub novel_block: Option<NovelBlockSpec>,
    /// Probability that a document of a grouped block borrows from a sibling.
    pub group_rate: f64,
    /// Sibling core terms borrowed per borrowing document.
    pub group_draws: usize,
    /// Probability that a block draw falls in the core.
    pub core_share: f64,
    pub min_keywords: usize,
    pub max_keywords: usize,
    /// Probability of one off-block keyword per document.
    pub noise_rate: f64,
    pub periods: PeriodSpec,
    pub seed: u64,
}

const GROUP_RATE: f64 = 0.7;
const GROUP_DRAWS: usize = 3;

fn block(i: usize, vocab_size: usize, core_terms: usize, docs: usize) -> BlockSpec {
    BlockSpec {
        vocab_size,
        core_terms,
        docs_p1: docs,
        docs_p2: docs,
        category: format!("cat-{i}"),
        group: None,
    }
}

impl Default for PlantSpec {
    /// Three blocks of 200 documents per period, eight shared terms and a
    /// second-period novel block.
    fn default() -> Self {
        PlantSpec {
            blocks: (0..3).map(|i| block(i, 36, 12, 200)).collect(),
            shared_terms: 8,
            shared_rate: 0.5,
            novel_block: Some(NovelBlockSpec {
                vocab_size: 60,
                docs: 200,
                category: "cat-novel".into(),
            }),
            group_rate: 0.0,
            group_draws: 0,
            core_share: 0.6,
            min_keywords: 4,
            max_keywords: 8,
            noise_rate: 0.0,
            periods: PeriodSpec {
                p1_start: 1996,
                p1_end: 2000,
                p2_start: 2001,
                p2_end: 2005,
            },
            seed: 1,
        }
    }
}

impl PlantSpec {
    /// Disjoint blocks only: no shared terms, no novel block.
    pub fn blocks_only(n_blocks: usize, docs_per_period: usize) -> Self {
        PlantSpec {
            blocks: (0..n_blocks).map(|i| block(i, 36, 12, docs_per_period)).collect(),
            shared_terms: 0,
            shared_rate: 0.0,
            novel_block: None,
            ..PlantSpec::default()
        }
    }

    /// Two groups of linked blocks (sizes from `groups`) plus `singletons`
    /// unlinked blocks.
    pub fn networks(groups: &[usize], singletons: usize) -> Self {
        let mut blocks = Vec::new();
        for (g, &n) in groups.iter().enumerate() {
            for _ in 0..n {
                let mut b = block(blocks.len(), 36, 12, 150);
                b.group = Some(g);
                blocks.push(b);
            }
        }
        for _ in 0..singletons {
            blocks.push(block(blocks.len(), 36, 12, 150));
        }
        PlantSpec {
            blocks,
            shared_terms: 0,
            shared_rate: 0.0,
            novel_block: None,
            group_rate: GROUP_RATE,
            group_draws: GROUP_DRAWS,
            ..PlantSpec::default()
        }
    }

    /// Twenty uniform blocks, 10 000 documents and 5 000 terms in total.
    pub fn scale() -> Self {
        PlantSpec {
            blocks: (0..20).map(|i| block(i, 245, 245, 250)).collect(),
            shared_terms: 100,
            shared_rate: 0.5,
            novel_block: None,
            // deep enough that every block term reaches df >= 2
            min_keywords: 6,
            max_keywords: 10,
            ..PlantSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("plant spec: {m}")));
        self.periods.validate()?;
        if self.blocks.is_empty() {
            return bad("at least one block is required");
        }
        if !(0.0..=0.2).contains(&self.noise_rate) {
            return bad("noise_rate must lie in [0, 0.2]");
        }
        if [self.shared_rate, self.core_share, self.group_rate]
            .iter()
            .any(|r| !(0.0..=1.0).contains(r))
        {
            return bad("rates must lie in [0, 1]");
        }
        if self.min_keywords == 0 || self.min_keywords > self.max_keywords {
            return bad("keyword count range is empty");
        }
        for b in &self.blocks {
            if b.core_terms == 0 || b.core_terms > b.vocab_size {
                return bad("core_terms must lie in 1..=vocab_size");
            }
            if b.group.is_some() && self.group_rate > 0.0 && self.group_draws == 0 {
                return bad("grouped blocks need group_draws > 0");
            }
        }
        if self.shared_rate > 0.0 && self.shared_terms == 0 {
            return bad("shared_rate > 0 needs shared terms");
        }
        if matches!(&self.novel_block, Some(n) if n.vocab_size == 0) {
            return bad("novel block vocabulary is empty");
        }
        Ok(())
    }
}

/// Planted structure of a generated corpus.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Block name per record id (`"b0"`, `"b1"`, ..., `"novel"`).
    pub blocks: BTreeMap<String, String>,
    /// Planted diffusion category per term; terms without a planted truth
    /// are absent.
    pub terms: BTreeMap<String, Category>,
}

fn core_term(b: usize, j: usize) -> String {
    format!("b{b}-core-{j:03}")
}

fn tail_term(b: usize, j: usize) -> String {
    format!("b{b}-term-{j:03}")
}

fn shared_term(j: usize) -> String {
    format!("shared-{j:03}")
}

fn novel_term(j: usize) -> String {
    format!("novel-{j:03}")
}

struct Gen<'a> {
    spec: &'a PlantSpec,
    rng: ChaCha8Rng,
}

impl Gen<'_> {
    fn block_terms(&mut self, b: usize) -> BTreeSet<String> {
        let blk = &self.spec.blocks[b];
        let want = self
            .rng
            .gen_range(self.spec.min_keywords..=self.spec.max_keywords)
            .min(blk.vocab_size);
        let tail = blk.vocab_size - blk.core_terms;
        let mut out = BTreeSet::new();
        while out.len() < want {
            let t = if tail == 0 || self.rng.gen_bool(self.spec.core_share) {
                core_term(b, self.rng.gen_range(0..blk.core_terms))
            } else {
                tail_term(b, self.rng.gen_range(0..tail))
            };
            out.insert(t);
        }
        out
    }

    fn novel_terms(&mut self, novel: &NovelBlockSpec) -> BTreeSet<String> {
        let want = self
            .rng
            .gen_range(self.spec.min_keywords..=self.spec.max_keywords)
            .min(novel.vocab_size);
        let mut out = BTreeSet::new();
        while out.len() < want {
            out.insert(novel_term(self.rng.gen_range(0..novel.vocab_size)));
        }
        out
    }

    fn extras(&mut self, terms: &mut BTreeSet<String>, own_block: Option<usize>) {
        if let Some(own) = own_block {
            if let Some(g) = self.spec.blocks[own].group {
                let siblings: Vec<usize> = (0..self.spec.blocks.len())
                    .filter(|&b| b != own && self.spec.blocks[b].group == Some(g))
                    .collect();
                if !siblings.is_empty() && self.rng.gen_bool(self.spec.group_rate) {
                    let s = *siblings.choose(&mut self.rng).expect("non-empty");
                    let core = self.spec.blocks[s].core_terms;
                    for _ in 0..self.spec.group_draws {
                        terms.insert(core_term(s, self.rng.gen_range(0..core)));
                    }
                }
            }
        }
        if self.spec.shared_rate > 0.0 && self.rng.gen_bool(self.spec.shared_rate) {
            terms.insert(shared_term(self.rng.gen_range(0..self.spec.shared_terms)));
        }
        let n_blocks = self.spec.blocks.len();
        let others = n_blocks - usize::from(own_block.is_some());
        if self.spec.noise_rate > 0.0 && others > 0 && self.rng.gen_bool(self.spec.noise_rate) {
            let mut other = self.rng.gen_range(0..others);
            if let Some(own) = own_block {
                if other >= own {
                    other += 1;
                }
            }
            let core = self.spec.blocks[other].core_terms;
            terms.insert(core_term(other, self.rng.gen_range(0..core)));
        }
    }

    fn year(&mut self, p2: bool) -> i32 {
        let p = &self.spec.periods;
        if p2 {
            self.rng.gen_range(p.p2_start..=p.p2_end)
        } else {
            self.rng.gen_range(p.p1_start..=p.p1_end)
        }
    }
}

/// Generate records (sorted by id) and their planted truth.
pub fn generate(spec: &PlantSpec) -> Result<(Vec<Record>, GroundTruth)> {
    spec.validate()?;
    let mut g = Gen {
        spec,
        rng: seed::rng(seed::derive(spec.seed, "syngen")),
    };
    let mut records = Vec::new();
    let mut truth = GroundTruth::default();

    for (b, blk) in spec.blocks.iter().enumerate() {
        for (period, n, p2) in [("P1", blk.docs_p1, false), ("P2", blk.docs_p2, true)] {
            for i in 0..n {
                let mut terms = g.block_terms(b);
                g.extras(&mut terms, Some(b));
                let id = format!("{period}-b{b:02}-{i:05}");
                truth.blocks.insert(id.clone(), format!("b{b}"));
                records.push(Record {
                    id,
                    year: g.year(p2),
                    keywords: terms.into_iter().collect(),
                    categories: vec![blk.category.clone()],
                    title: None,
                });
            }
        }
        if blk.core_terms < blk.vocab_size {
            for j in 0..blk.core_terms {
                truth.terms.insert(core_term(b, j), Category::Established);
            }
        }
    }
    if let Some(novel) = &spec.novel_block {
        for i in 0..novel.docs {
            let mut terms = g.novel_terms(novel);
            g.extras(&mut terms, None);
            let id = format!("P2-novel-{i:05}");
            truth.blocks.insert(id.clone(), "novel".into());
            records.push(Record {
                id,
                year: g.year(true),
                keywords: terms.into_iter().collect(),
                categories: vec![novel.category.clone()],
                title: None,
            });
        }
        for j in 0..novel.vocab_size {
            truth.terms.insert(novel_term(j), Category::Unusual);
        }
    }
    for j in 0..spec.shared_terms {
        truth.terms.insert(shared_term(j), Category::CrossSection);
    }
    records.sort_by(|a, b| a.id.cmp(&b.id));
    Ok((records, truth))
}
