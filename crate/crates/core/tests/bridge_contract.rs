//! Files shaped like the Python embedding bridge writes them (default
//! `json.dumps` separators, one record per line) must load in the engine's
//! loaders unchanged.

use std::fmt::Write as _;
use std::io::Write as _;

use suspense::{
    default_branching, load_continuations, load_embeddings, load_sentiment, load_stories,
    CandidateSource,
};
use tempfile::NamedTempFile;

fn file(contents: &str) -> NamedTempFile {
    let mut f = NamedTempFile::new().unwrap();
    f.write_all(contents.as_bytes()).unwrap();
    f
}

fn py_list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
    format!("[{}]", items.join(", "))
}

const STORIES: &str = r#"{"id": "s1", "sentences": ["The door creaked.", "Nobody was there.", "Then a hand touched her shoulder."]}
{"id": "s2", "sentences": ["It rained.", "***", "The bus was late."]}
"#;

fn embeddings_jsonl() -> String {
    let mut out = String::new();
    for (story, idxs) in [("s1", vec![0, 1, 2]), ("s2", vec![0, 2])] {
        for i in idxs {
            let v = [0.25 * i as f64, -0.5, 1.0e-3, 0.125 + i as f64];
            writeln!(
                out,
                r#"{{"story_id": "{story}", "sentence_idx": {i}, "vector": {}}}"#,
                py_list(&v)
            )
            .unwrap();
        }
    }
    out
}

#[test]
fn embedding_file_loads() {
    let corpus = load_stories(file(STORIES).path()).unwrap();
    let emb = load_embeddings(file(&embeddings_jsonl()).path()).unwrap();
    assert_eq!(emb.dim(), Some(4));
    emb.check_covers(&corpus).unwrap();
    assert_eq!(
        emb.get("s1").unwrap().get(2).unwrap(),
        &[0.5, -0.5, 1.0e-3, 2.125]
    );
}

#[test]
fn sentiment_file_loads() {
    let text = "{\"story_id\": \"s1\", \"sentence_idx\": 0, \"score\": 0.0}\n\
                {\"story_id\": \"s1\", \"sentence_idx\": 1, \"score\": -0.296}\n\
                \n\
                {\"story_id\": \"s1\", \"sentence_idx\": 2, \"score\": 0.6369}\n\
                {\"story_id\": \"s2\", \"sentence_idx\": 0, \"score\": -1.0}\n";
    let s = load_sentiment(file(text).path()).unwrap();
    assert_eq!(s.score("s1", 1), Some(-0.296));
    assert_eq!(s.score("s2", 0), Some(-1.0));
}

/// Writes a full generated tree at every position of `s1`, node ids
/// assigned breadth first, as the bridge does.
fn generated_tree_jsonl(branching: &[usize]) -> String {
    let mut out = String::new();
    for position in 0..3 {
        let mut next_id = 0usize;
        let mut frontier: Vec<Option<usize>> = vec![None];
        for (depth, &b) in branching.iter().enumerate() {
            let mut level = Vec::with_capacity(frontier.len() * b);
            for parent in &frontier {
                for k in 0..b {
                    let id = next_id;
                    next_id += 1;
                    let parent_json = parent.map_or("null".to_string(), |p| p.to_string());
                    let v = [((id * 7 + k) % 13) as f64 / 13.0, 1.0 - depth as f64 * 0.25];
                    writeln!(
                        out,
                        r#"{{"story_id": "s1", "position": {position}, "node_id": {id}, "parent_id": {parent_json}, "depth": {}, "source": "generated", "vector": {}, "text": "continuation {id}"}}"#,
                        depth + 1,
                        py_list(&v)
                    )
                    .unwrap();
                    level.push(Some(id));
                }
            }
            frontier = level;
        }
    }
    out
}

fn two_dim_embeddings() -> String {
    (0..3)
        .map(|i| {
            format!("{{\"story_id\": \"s1\", \"sentence_idx\": {i}, \"vector\": [1.0, {i}.0]}}\n")
        })
        .collect()
}

#[test]
fn generated_trees_match_each_branching_schedule() {
    let emb = load_embeddings(file(&two_dim_embeddings()).path()).unwrap();
    for depth in 1..=3 {
        let schedule = default_branching(depth);
        let set = load_continuations(file(&generated_tree_jsonl(&schedule)).path(), &emb).unwrap();
        let trees = set.get("s1").unwrap();
        assert_eq!(trees.len(), 3);
        for tree in trees.values() {
            assert_eq!(tree.branching(), schedule);
            assert_eq!(tree.max_depth(), depth);
            let leaves: usize = schedule.iter().product();
            assert_eq!(tree.nodes_at_depth(depth).count(), leaves);
            assert!(tree
                .nodes_at_depth(1)
                .all(|n| n.source == CandidateSource::Generated));
        }
    }
}

#[test]
fn schedules_are_the_documented_ones() {
    assert_eq!(default_branching(1), vec![100]);
    assert_eq!(default_branching(2), vec![50, 50]);
    assert_eq!(default_branching(3), vec![25, 25, 25]);
}

#[test]
fn small_custom_schedule_round_trips_through_writer() {
    let emb = load_embeddings(file(&two_dim_embeddings()).path()).unwrap();
    let set = load_continuations(file(&generated_tree_jsonl(&[2, 3])).path(), &emb).unwrap();
    let mut buf = Vec::new();
    set.write_jsonl(&mut buf).unwrap();
    let again = load_continuations(file(std::str::from_utf8(&buf).unwrap()).path(), &emb).unwrap();
    for (pos, tree) in set.get("s1").unwrap() {
        let other = &again.get("s1").unwrap()[pos];
        assert_eq!(other.branching(), vec![2, 3]);
        assert_eq!(
            tree.nodes_at_depth(2).count(),
            other.nodes_at_depth(2).count()
        );
    }
}
