//! Continuation candidates, their conditional probabilities, and rollout
//! trees of depth up to three.
//!
//! The probability of a candidate next sentence is a softmax over cosine
//! similarities between the context embedding and every candidate, divided by
//! a temperature. For deeper rollouts each internal node acts as the context
//! for its own children and a leaf's probability is the product of the
//! conditionals along its path.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use indexmap::IndexMap;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{fnv1a, EmbeddingSet};
use crate::story::{Corpus, Story};
use crate::vector::{cosine, softmax};

/// Deepest rollout supported.
pub const MAX_DEPTH: usize = 3;

#[derive(Debug, Error)]
pub enum ContinuationError {
    #[error("zero-norm vector in probability computation")]
    ZeroNormVector,
    #[error("empty candidate set")]
    EmptyCandidateSet,
    #[error("vector dimensions differ ({0} vs {1})")]
    DimMismatch(usize, usize),
    #[error("temperature must be positive and finite, got {0}")]
    BadTemperature(f64),
    #[error("corpus has {available} eligible sentences, {needed} requested")]
    InsufficientCorpus { needed: usize, available: usize },
    #[error("rollout tree has no nodes at depth {0}")]
    EmptyDepth(usize),
    #[error("story `{story_id}` position {position}: invalid rollout tree: {reason}")]
    InvalidTree {
        story_id: String,
        position: usize,
        reason: String,
    },
    #[error("story `{0}` position {1}: no context embedding for rollout tree")]
    MissingContext(String, usize),
    #[error("{path}: line {line_no}: malformed continuation record: {reason}")]
    MalformedLine {
        path: String,
        line_no: usize,
        reason: String,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidateSource {
    #[default]
    Corpus,
    Generated,
}

impl CandidateSource {
    pub fn as_str(self) -> &'static str {
        match self {
            CandidateSource::Corpus => "corpus",
            CandidateSource::Generated => "generated",
        }
    }
}

impl std::str::FromStr for CandidateSource {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "corpus" => Ok(CandidateSource::Corpus),
            "generated" => Ok(CandidateSource::Generated),
            other => Err(format!("unknown candidate source `{other}`")),
        }
    }
}

/// Where a corpus-sampled candidate came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SentenceRef {
    pub story_id: String,
    pub sentence_idx: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateNode {
    pub node_id: usize,
    /// `None` for children of the context (depth 1).
    pub parent_id: Option<usize>,
    pub depth: usize,
    pub embedding: Vec<f64>,
    pub source: CandidateSource,
    pub text: Option<String>,
    pub origin: Option<SentenceRef>,
}

/// Candidate futures of one story position. The context embedding is the
/// depth-0 root.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutTree {
    pub story_id: String,
    pub position: usize,
    pub context: Vec<f64>,
    pub nodes: Vec<CandidateNode>,
    children: HashMap<Option<usize>, Vec<usize>>,
}

impl RolloutTree {
    pub fn new(
        story_id: impl Into<String>,
        position: usize,
        context: Vec<f64>,
        nodes: Vec<CandidateNode>,
    ) -> Result<Self, ContinuationError> {
        let story_id = story_id.into();
        let invalid = |reason: String| ContinuationError::InvalidTree {
            story_id: story_id.clone(),
            position,
            reason,
        };
        let mut by_id: HashMap<usize, usize> = HashMap::with_capacity(nodes.len());
        for (slot, n) in nodes.iter().enumerate() {
            if by_id.insert(n.node_id, slot).is_some() {
                return Err(invalid(format!("duplicate node id {}", n.node_id)));
            }
            if n.embedding.len() != context.len() {
                return Err(invalid(format!(
                    "node {} has dimension {}, context has {}",
                    n.node_id,
                    n.embedding.len(),
                    context.len()
                )));
            }
            if !(1..=MAX_DEPTH).contains(&n.depth) {
                return Err(invalid(format!("node {} has depth {}", n.node_id, n.depth)));
            }
        }
        let mut children: HashMap<Option<usize>, Vec<usize>> = HashMap::new();
        for (slot, n) in nodes.iter().enumerate() {
            let parent_depth = match n.parent_id {
                None => 0,
                Some(p) => match by_id.get(&p) {
                    Some(&ps) => nodes[ps].depth,
                    None => {
                        return Err(invalid(format!(
                            "node {} has unknown parent {p}",
                            n.node_id
                        )))
                    }
                },
            };
            if n.depth != parent_depth + 1 {
                return Err(invalid(format!(
                    "node {} at depth {} under a depth-{parent_depth} parent",
                    n.node_id, n.depth
                )));
            }
            children.entry(n.parent_id).or_default().push(slot);
        }
        Ok(RolloutTree {
            story_id,
            position,
            context,
            nodes,
            children,
        })
    }

    pub fn max_depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    pub fn nodes_at_depth(&self, depth: usize) -> impl Iterator<Item = &CandidateNode> {
        self.nodes.iter().filter(move |n| n.depth == depth)
    }

    /// Children of the root (`None`) or of a node id.
    pub fn children_of(&self, parent: Option<usize>) -> impl Iterator<Item = &CandidateNode> {
        self.children
            .get(&parent)
            .into_iter()
            .flatten()
            .map(move |&slot| &self.nodes[slot])
    }

    /// Largest number of children any node has at each parent depth.
    pub fn branching(&self) -> Vec<usize> {
        let mut out = vec![0; self.max_depth()];
        for (parent, kids) in &self.children {
            let depth = match parent {
                None => 0,
                Some(_) => self.nodes[kids[0]].depth - 1,
            };
            out[depth] = out[depth].max(kids.len());
        }
        out
    }
}

/// Default candidates per level for rollouts of depth 1, 2 and 3.
pub fn default_branching(depth: usize) -> Vec<usize> {
    match depth {
        1 => vec![100],
        2 => vec![50, 50],
        _ => vec![25; MAX_DEPTH],
    }
}

/// Probabilities over the candidates at one depth of one rollout tree.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationDistribution {
    pub position: usize,
    pub depth: usize,
    pub node_ids: Vec<usize>,
    pub probs: Vec<f64>,
}

fn check_temperature(t: f64) -> Result<(), ContinuationError> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(ContinuationError::BadTemperature(t))
    }
}

/// Softmax of `cos(context, c_i) / temperature` over the candidates.
pub fn conditional_probabilities<V: AsRef<[f64]>>(
    context: &[f64],
    candidates: &[V],
    temperature: f64,
) -> Result<Vec<f64>, ContinuationError> {
    check_temperature(temperature)?;
    if candidates.is_empty() {
        return Err(ContinuationError::EmptyCandidateSet);
    }
    let logits = candidates
        .iter()
        .map(|c| {
            let c = c.as_ref();
            if c.len() != context.len() {
                return Err(ContinuationError::DimMismatch(context.len(), c.len()));
            }
            cosine(context, c)
                .map(|s| s / temperature)
                .ok_or(ContinuationError::ZeroNormVector)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(softmax(&logits))
}

/// Probability of the sentence that actually came next, normalised over
/// itself and the alternatives that were available at the previous step.
pub fn realized_probability<V: AsRef<[f64]>>(
    prev_context: &[f64],
    actual_next: &[f64],
    alternatives: &[V],
    temperature: f64,
) -> Result<f64, ContinuationError> {
    let mut all: Vec<&[f64]> = Vec::with_capacity(alternatives.len() + 1);
    all.push(actual_next);
    all.extend(alternatives.iter().map(|a| a.as_ref()));
    Ok(conditional_probabilities(prev_context, &all, temperature)?[0])
}

/// Unnormalised path products for every node at `depth`.
pub fn path_masses(
    tree: &RolloutTree,
    depth: usize,
    temperature: f64,
) -> Result<Vec<(usize, f64)>, ContinuationError> {
    check_temperature(temperature)?;
    let mut out = Vec::new();
    let mut frontier: Vec<(Option<usize>, &[f64], f64)> = vec![(None, &tree.context, 1.0)];
    for level in 1..=depth {
        let mut next = Vec::new();
        for (parent, ctx, mass) in frontier {
            let kids: Vec<&CandidateNode> = tree.children_of(parent).collect();
            if kids.is_empty() {
                continue;
            }
            let emb: Vec<&[f64]> = kids.iter().map(|k| k.embedding.as_slice()).collect();
            let probs = conditional_probabilities(ctx, &emb, temperature)?;
            for (k, p) in kids.into_iter().zip(probs) {
                if level == depth {
                    out.push((k.node_id, mass * p));
                } else {
                    next.push((Some(k.node_id), k.embedding.as_slice(), mass * p));
                }
            }
        }
        frontier = next;
    }
    Ok(out)
}

/// Renormalised distribution over the nodes at `depth`.
pub fn path_distribution(
    tree: &RolloutTree,
    depth: usize,
    temperature: f64,
) -> Result<ContinuationDistribution, ContinuationError> {
    if depth == 0 || depth > MAX_DEPTH {
        return Err(ContinuationError::EmptyDepth(depth));
    }
    let masses = path_masses(tree, depth, temperature)?;
    let total: f64 = masses.iter().map(|(_, m)| m).sum();
    if masses.is_empty() || total <= 0.0 {
        return Err(ContinuationError::EmptyDepth(depth));
    }
    let (node_ids, probs) = masses.into_iter().map(|(id, m)| (id, m / total)).unzip();
    Ok(ContinuationDistribution {
        position: tree.position,
        depth,
        node_ids,
        probs,
    })
}

fn mix_seed(parts: &[u64]) -> u64 {
    // splitmix64 finaliser folded over the parts
    parts.iter().fold(0x9e37_79b9_7f4a_7c15u64, |acc, &p| {
        let mut z = acc ^ p.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    })
}

/// Draws `n` distinct non-skipped sentences uniformly without replacement
/// from every story except `exclude_story`. Returned nodes are depth 1 with
/// ids `0..n`.
pub fn sample_corpus_candidates(
    corpus: &Corpus,
    embeddings: &EmbeddingSet,
    n: usize,
    seed: u64,
    exclude_story: Option<&str>,
) -> Result<Vec<CandidateNode>, ContinuationError> {
    let pool = candidate_pool(corpus, embeddings, exclude_story);
    sample_from_pool(&pool, n, seed)
}

struct PoolEntry<'a> {
    story: &'a Story,
    idx: usize,
    vector: &'a [f64],
}

fn candidate_pool<'a>(
    corpus: &'a Corpus,
    embeddings: &'a EmbeddingSet,
    exclude_story: Option<&str>,
) -> Vec<PoolEntry<'a>> {
    let mut pool = Vec::new();
    for story in corpus.iter() {
        if Some(story.id.as_str()) == exclude_story {
            continue;
        }
        let Some(m) = embeddings.get(&story.id) else {
            continue;
        };
        for s in story.active() {
            if let Some(v) = m.get(s.index) {
                pool.push(PoolEntry {
                    story,
                    idx: s.index,
                    vector: v,
                });
            }
        }
    }
    pool
}

fn sample_from_pool(
    pool: &[PoolEntry<'_>],
    n: usize,
    seed: u64,
) -> Result<Vec<CandidateNode>, ContinuationError> {
    if n > pool.len() {
        return Err(ContinuationError::InsufficientCorpus {
            needed: n,
            available: pool.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = rand::seq::index::sample(&mut rng, pool.len(), n);
    Ok(picks
        .into_iter()
        .enumerate()
        .map(|(node_id, i)| {
            let e = &pool[i];
            CandidateNode {
                node_id,
                parent_id: None,
                depth: 1,
                embedding: e.vector.to_vec(),
                source: CandidateSource::Corpus,
                text: Some(e.story.sentences[e.idx].text.clone()),
                origin: Some(SentenceRef {
                    story_id: e.story.id.clone(),
                    sentence_idx: e.idx,
                }),
            }
        })
        .collect())
}

/// Rollout trees for one story keyed by position.
pub type StoryTrees = BTreeMap<usize, RolloutTree>;

/// Builds a corpus-sampled rollout tree at every non-skipped position of
/// `story`. `branching[k]` candidates are drawn under each node at depth `k`.
/// Each sample uses its own seed derived from `(seed, story, position, node)`.
pub fn build_corpus_trees(
    story: &Story,
    corpus: &Corpus,
    embeddings: &EmbeddingSet,
    branching: &[usize],
    seed: u64,
) -> Result<StoryTrees, ContinuationError> {
    let matrix = embeddings.get(&story.id);
    let pool = candidate_pool(corpus, embeddings, Some(&story.id));
    let story_hash = fnv1a(story.id.as_bytes());
    let mut trees = StoryTrees::new();
    for s in story.active() {
        let context = matrix
            .and_then(|m| m.get(s.index))
            .ok_or_else(|| ContinuationError::MissingContext(story.id.clone(), s.index))?
            .to_vec();
        let mut nodes: Vec<CandidateNode> = Vec::new();
        let mut parents: Vec<Option<usize>> = vec![None];
        for (level, &width) in branching.iter().enumerate().take(MAX_DEPTH) {
            let mut next_parents = Vec::new();
            for parent in parents {
                let parent_key = parent.map_or(u64::MAX, |p| p as u64);
                let sub_seed = mix_seed(&[seed, story_hash, s.index as u64, parent_key]);
                for mut node in sample_from_pool(&pool, width, sub_seed)? {
                    node.node_id = nodes.len();
                    node.parent_id = parent;
                    node.depth = level + 1;
                    next_parents.push(Some(node.node_id));
                    nodes.push(node);
                }
            }
            parents = next_parents;
        }
        trees.insert(
            s.index,
            RolloutTree::new(story.id.clone(), s.index, context, nodes)?,
        );
    }
    Ok(trees)
}

/// Rollout trees for many stories.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContinuationSet {
    pub stories: IndexMap<String, StoryTrees>,
}

impl ContinuationSet {
    pub fn get(&self, story_id: &str) -> Option<&StoryTrees> {
        self.stories.get(story_id)
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for trees in self.stories.values() {
            for tree in trees.values() {
                for n in &tree.nodes {
                    let rec = ContinuationRecord {
                        story_id: tree.story_id.clone(),
                        position: tree.position,
                        node_id: n.node_id,
                        parent_id: n.parent_id,
                        depth: n.depth,
                        source: n.source,
                        vector: n.embedding.clone(),
                        text: n.text.clone(),
                    };
                    serde_json::to_writer(&mut out, &rec)?;
                    out.write_all(b"\n")?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ContinuationRecord {
    story_id: String,
    position: usize,
    node_id: usize,
    parent_id: Option<usize>,
    depth: usize,
    source: CandidateSource,
    vector: Vec<f64>,
    text: Option<String>,
}

pub fn load_continuations(
    path: impl AsRef<Path>,
    embeddings: &EmbeddingSet,
) -> Result<ContinuationSet, ContinuationError> {
    let path = path.as_ref();
    read_continuations(
        BufReader::new(File::open(path)?),
        &path.display().to_string(),
        embeddings,
    )
}

/// Parses continuation JSONL. Each tree's root context is the stored
/// embedding of the sentence at its position.
pub fn read_continuations<R: BufRead>(
    reader: R,
    name: &str,
    embeddings: &EmbeddingSet,
) -> Result<ContinuationSet, ContinuationError> {
    let mut grouped: IndexMap<(String, usize), Vec<CandidateNode>> = IndexMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ContinuationRecord =
            serde_json::from_str(&line).map_err(|e| ContinuationError::MalformedLine {
                path: name.to_string(),
                line_no: i + 1,
                reason: e.to_string(),
            })?;
        if rec.vector.iter().any(|x| !x.is_finite()) {
            return Err(ContinuationError::MalformedLine {
                path: name.to_string(),
                line_no: i + 1,
                reason: "non-finite vector component".into(),
            });
        }
        grouped
            .entry((rec.story_id, rec.position))
            .or_default()
            .push(CandidateNode {
                node_id: rec.node_id,
                parent_id: rec.parent_id,
                depth: rec.depth,
                embedding: rec.vector,
                source: rec.source,
                text: rec.text,
                origin: None,
            });
    }
    let mut set = ContinuationSet::default();
    for ((story_id, position), nodes) in grouped {
        let context = embeddings
            .get(&story_id)
            .and_then(|m| m.get(position))
            .ok_or_else(|| ContinuationError::MissingContext(story_id.clone(), position))?
            .to_vec();
        let tree = RolloutTree::new(story_id.clone(), position, context, nodes)?;
        set.stories
            .entry(story_id)
            .or_default()
            .insert(position, tree);
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::mock_embed_corpus;
    use crate::story::{Split, Story};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn node(id: usize, parent: Option<usize>, depth: usize, v: Vec<f64>) -> CandidateNode {
        CandidateNode {
            node_id: id,
            parent_id: parent,
            depth,
            embedding: v,
            source: CandidateSource::Generated,
            text: None,
            origin: None,
        }
    }

    /// Unit vector whose cosine with `[1, 0]` is `c`.
    fn at_cos(c: f64) -> Vec<f64> {
        vec![c, (1.0 - c * c).max(0.0).sqrt()]
    }

    #[test]
    fn equal_cosines_are_uniform() {
        let ctx = [1.0, 0.0];
        let cands = vec![at_cos(0.3); 4];
        let p = conditional_probabilities(&ctx, &cands, 1.0).unwrap();
        for x in p {
            assert_abs_diff_eq!(x, 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn opposite_cosines() {
        // softmax(1, -1) = (e / (e + 1/e), ...) = (0.880797, 0.119203)
        let p = conditional_probabilities(&[1.0, 0.0], &[vec![1.0, 0.0], vec![-1.0, 0.0]], 1.0)
            .unwrap();
        assert_abs_diff_eq!(p[0], 0.8808, epsilon = 1e-3);
        assert_abs_diff_eq!(p[1], 0.1192, epsilon = 1e-3);
        assert_eq!(
            conditional_probabilities(&[1.0, 0.0], &[vec![2.0, 0.0]], 1.0).unwrap(),
            vec![1.0]
        );
    }

    #[test]
    fn probability_errors() {
        let empty: Vec<Vec<f64>> = vec![];
        assert!(matches!(
            conditional_probabilities(&[1.0, 0.0], &empty, 1.0),
            Err(ContinuationError::EmptyCandidateSet)
        ));
        assert!(matches!(
            conditional_probabilities(&[1.0, 0.0], &[vec![0.0, 0.0]], 1.0),
            Err(ContinuationError::ZeroNormVector)
        ));
        assert!(matches!(
            conditional_probabilities(&[1.0, 0.0], &[vec![1.0, 0.0]], 0.0),
            Err(ContinuationError::BadTemperature(_))
        ));
    }

    #[test]
    fn realized_examples() {
        let ctx = [1.0, 0.0];
        let none: Vec<Vec<f64>> = vec![];
        assert_eq!(
            realized_probability(&ctx, &at_cos(0.2), &none, 1.0).unwrap(),
            1.0
        );
        let alts = vec![at_cos(0.5); 3];
        assert_abs_diff_eq!(
            realized_probability(&ctx, &at_cos(0.5), &alts, 1.0).unwrap(),
            0.25,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            realized_probability(&ctx, &[1.0, 0.0], &[vec![-1.0, 0.0]], 1.0).unwrap(),
            0.8808,
            epsilon = 1e-3
        );
    }

    /// Builds a depth-2 tree whose conditionals are (p, 1-p) at the root and
    /// uniform below each child.
    fn two_level_tree(first_level: [Vec<f64>; 2]) -> RolloutTree {
        let [a, b] = first_level;
        // grandchildren equidistant from their parent: mirror images around it
        let around = |v: &[f64]| {
            let perp = [-v[1], v[0]];
            (
                vec![v[0] + 0.5 * perp[0], v[1] + 0.5 * perp[1]],
                vec![v[0] - 0.5 * perp[0], v[1] - 0.5 * perp[1]],
            )
        };
        let (a1, a2) = around(&a);
        let (b1, b2) = around(&b);
        RolloutTree::new(
            "s",
            0,
            vec![1.0, 0.0],
            vec![
                node(0, None, 1, a),
                node(1, None, 1, b),
                node(2, Some(0), 2, a1),
                node(3, Some(0), 2, a2),
                node(4, Some(1), 2, b1),
                node(5, Some(1), 2, b2),
            ],
        )
        .unwrap()
    }

    #[test]
    fn uniform_two_by_two() {
        let tree = two_level_tree([at_cos(0.4), at_cos(0.4)]);
        let d = path_distribution(&tree, 2, 1.0).unwrap();
        assert_eq!(d.node_ids, vec![2, 3, 4, 5]);
        for p in d.probs {
            assert_abs_diff_eq!(p, 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn product_rule() {
        // choose temperature so the root split is exactly (0.8, 0.2):
        // (c_a - c_b) / T = ln 4 with cosines 1 and 0
        let t = 1.0 / 4f64.ln();
        let tree = two_level_tree([vec![1.0, 0.0], vec![0.0, 1.0]]);
        let root = path_distribution(&tree, 1, t).unwrap();
        assert_abs_diff_eq!(root.probs[0], 0.8, epsilon = 1e-12);
        let d = path_distribution(&tree, 2, t).unwrap();
        let expected = [0.4, 0.4, 0.1, 0.1];
        for (p, e) in d.probs.iter().zip(expected) {
            assert_abs_diff_eq!(*p, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn depth_one_matches_conditionals() {
        let tree = two_level_tree([at_cos(0.9), at_cos(-0.3)]);
        let d = path_distribution(&tree, 1, 0.7).unwrap();
        let direct =
            conditional_probabilities(&[1.0, 0.0], &[at_cos(0.9), at_cos(-0.3)], 0.7).unwrap();
        assert_eq!(d.probs, direct);
        assert!(matches!(
            path_distribution(&tree, 3, 1.0),
            Err(ContinuationError::EmptyDepth(3))
        ));
    }

    #[test]
    fn tree_validation() {
        let bad_parent = RolloutTree::new(
            "s",
            0,
            vec![1.0, 0.0],
            vec![
                node(0, None, 1, vec![1.0, 0.0]),
                node(1, Some(9), 2, vec![1.0, 0.0]),
            ],
        );
        assert!(matches!(
            bad_parent,
            Err(ContinuationError::InvalidTree { .. })
        ));
        let bad_depth = RolloutTree::new(
            "s",
            0,
            vec![1.0, 0.0],
            vec![
                node(0, None, 1, vec![1.0, 0.0]),
                node(1, Some(0), 3, vec![1.0, 0.0]),
            ],
        );
        assert!(matches!(
            bad_depth,
            Err(ContinuationError::InvalidTree { .. })
        ));
        let tree = two_level_tree([at_cos(0.1), at_cos(0.2)]);
        assert_eq!(tree.branching(), vec![2, 2]);
    }

    fn small_corpus() -> Corpus {
        let mut c = Corpus::new(Split::Test);
        for s in 0..4 {
            let texts: Vec<String> = (0..5)
                .map(|i| format!("story {s} sentence number {i} here"))
                .collect();
            c.insert(Story::from_texts(format!("s{s}"), &texts))
                .unwrap();
        }
        c
    }

    #[test]
    fn corpus_sampling() {
        let c = small_corpus();
        let e = mock_embed_corpus(&c, 16, 1);
        let a = sample_corpus_candidates(&c, &e, 5, 42, Some("s0")).unwrap();
        let b = sample_corpus_candidates(&c, &e, 5, 42, Some("s0")).unwrap();
        assert_eq!(a, b);
        assert!(a
            .iter()
            .all(|n| n.origin.as_ref().unwrap().story_id != "s0"));
        let mut seen: Vec<_> = a.iter().map(|n| n.origin.clone().unwrap()).collect();
        seen.sort_by(|x, y| (&x.story_id, x.sentence_idx).cmp(&(&y.story_id, y.sentence_idx)));
        seen.dedup();
        assert_eq!(seen.len(), 5);
        assert!(matches!(
            sample_corpus_candidates(&c, &e, 16, 42, Some("s0")),
            Err(ContinuationError::InsufficientCorpus {
                needed: 16,
                available: 15
            })
        ));
    }

    #[test]
    fn corpus_trees_have_requested_shape() {
        let c = small_corpus();
        let e = mock_embed_corpus(&c, 16, 1);
        let story = c.get("s1").unwrap();
        let trees = build_corpus_trees(story, &c, &e, &[3, 2], 9).unwrap();
        assert_eq!(trees.len(), 5);
        for t in trees.values() {
            assert_eq!(t.branching(), vec![3, 2]);
            assert_eq!(t.nodes_at_depth(2).count(), 6);
        }
    }

    #[test]
    fn continuation_jsonl_round_trip() {
        let c = small_corpus();
        let e = mock_embed_corpus(&c, 8, 3);
        let story = c.get("s2").unwrap();
        let mut set = ContinuationSet::default();
        let mut trees = build_corpus_trees(story, &c, &e, &[2, 2], 5).unwrap();
        for t in trees.values_mut() {
            for n in &mut t.nodes {
                n.origin = None;
            }
        }
        set.stories.insert("s2".into(), trees);
        let mut buf = Vec::new();
        set.write_jsonl(&mut buf).unwrap();
        let back = read_continuations(buf.as_slice(), "mem", &e).unwrap();
        assert_eq!(back, set);
    }

    proptest! {
        #[test]
        fn scale_invariance(
            ctx in proptest::collection::vec(-1.0f64..1.0, 4),
            cands in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 4), 1..6),
            k in 0.01f64..100.0,
        ) {
            prop_assume!(crate::vector::norm(&ctx) > 1e-3);
            prop_assume!(cands.iter().all(|c| crate::vector::norm(c) > 1e-3));
            let p = conditional_probabilities(&ctx, &cands, 1.0).unwrap();
            let scaled: Vec<Vec<f64>> = cands.iter().map(|c| c.iter().map(|x| x * k).collect()).collect();
            let ctx_scaled: Vec<f64> = ctx.iter().map(|x| x * k).collect();
            let q = conditional_probabilities(&ctx_scaled, &scaled, 1.0).unwrap();
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn subtree_marginals(c1 in -1.0f64..1.0, c2 in -1.0f64..1.0, t in 0.1f64..5.0) {
            let tree = two_level_tree([at_cos(c1), at_cos(c2)]);
            let level1 = path_masses(&tree, 1, t).unwrap();
            let level2 = path_masses(&tree, 2, t).unwrap();
            let sub_a: f64 = level2.iter().filter(|(id, _)| *id == 2 || *id == 3).map(|(_, m)| m).sum();
            prop_assert!((sub_a - level1[0].1).abs() < 1e-12);
            let total: f64 = level2.iter().map(|(_, m)| m).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
