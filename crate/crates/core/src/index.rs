//! Popularity-ordered candidate generation over the query catalog.
//!
//! The index is a character trie. Every node records the highest popularity
//! found in its subtree, which lets retrieval walk the trie best-first and
//! stop as soon as the top `m` results are settled.
//!
//! A catalog query matches a typed prefix when
//!
//! * it starts with the prefix (exact match), or
//! * some prefix of the query, including the empty one, is within
//!   Levenshtein distance 1 of the typed prefix (fuzzy match).
//!
//! Results are ordered by exact-first, then popularity descending, then text
//! ascending.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::sim::QueryRecord;

const INDEX_MAGIC: &[u8; 8] = b"QACIDX1\0";
const INDEX_FORMAT_VERSION: u32 = 1;

/// Position of a query in the catalog the index was built from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QueryId(pub u32);

impl QueryId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A retrieved suggestion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub query: QueryId,
    /// The query text starts with the (lowercased) typed prefix.
    pub is_exact_match: bool,
    /// Popularity of the query; the ordering key inside each match class.
    pub retrieval_score: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
struct Node {
    /// Sorted by character.
    children: Vec<(char, u32)>,
    terminal: Option<QueryId>,
    /// Max popularity of any query in this subtree.
    best: f64,
}

#[derive(Serialize, Deserialize)]
struct Stored {
    catalog: Vec<QueryRecord>,
    nodes: Vec<Node>,
}

/// Immutable prefix index over a catalog.
#[derive(Clone, Debug)]
pub struct PrefixIndex {
    catalog: Vec<QueryRecord>,
    nodes: Vec<Node>,
    by_text: HashMap<String, QueryId>,
}

impl PrefixIndex {
    /// Build the trie. Query texts must be unique.
    pub fn build(catalog: Vec<QueryRecord>) -> Result<Self> {
        let mut by_text = HashMap::with_capacity(catalog.len());
        for (i, record) in catalog.iter().enumerate() {
            if by_text
                .insert(record.text.clone(), QueryId(i as u32))
                .is_some()
            {
                return Err(Error::DuplicateQuery(record.text.clone()));
            }
        }

        let mut nodes = vec![Node::default()];
        for (i, record) in catalog.iter().enumerate() {
            let mut at = 0usize;
            for c in record.text.chars() {
                at = match nodes[at].children.binary_search_by_key(&c, |&(k, _)| k) {
                    Ok(pos) => nodes[at].children[pos].1 as usize,
                    Err(pos) => {
                        let id = nodes.len() as u32;
                        nodes.push(Node::default());
                        nodes[at].children.insert(pos, (c, id));
                        id as usize
                    }
                };
            }
            nodes[at].terminal = Some(QueryId(i as u32));
        }

        // Children always have larger ids than their parent.
        for id in (0..nodes.len()).rev() {
            let own = nodes[id]
                .terminal
                .map(|q| catalog[q.index()].popularity)
                .unwrap_or(f64::NEG_INFINITY);
            let best = nodes[id]
                .children
                .iter()
                .map(|&(_, child)| nodes[child as usize].best)
                .fold(own, f64::max);
            nodes[id].best = best;
        }

        Ok(PrefixIndex {
            catalog,
            nodes,
            by_text,
        })
    }

    pub fn catalog(&self) -> &[QueryRecord] {
        &self.catalog
    }

    pub fn len(&self) -> usize {
        self.catalog.len()
    }

    pub fn is_empty(&self) -> bool {
        self.catalog.is_empty()
    }

    pub fn query(&self, id: QueryId) -> &QueryRecord {
        &self.catalog[id.index()]
    }

    pub fn lookup(&self, text: &str) -> Option<QueryId> {
        self.by_text.get(text).copied()
    }

    /// A candidate for a known query as it would be retrieved for `prefix`.
    pub fn candidate_for(&self, id: QueryId, prefix: &str) -> Candidate {
        let record = self.query(id);
        Candidate {
            query: id,
            is_exact_match: record.text.starts_with(&prefix.to_lowercase()),
            retrieval_score: record.popularity,
        }
    }

    /// Top-`m` exact and fuzzy matches for `prefix`.
    pub fn retrieve(&self, prefix: &str, m: usize) -> Result<Vec<Candidate>> {
        if prefix.is_empty() {
            return Err(Error::Argument("prefix must not be empty".into()));
        }
        if m == 0 {
            return Err(Error::Argument("m must be at least 1".into()));
        }
        if self.catalog.is_empty() {
            return Ok(Vec::new());
        }
        let typed: Vec<char> = prefix.to_lowercase().chars().collect();

        let exact_node = self.walk(&typed);
        let mut out: Vec<Candidate> = match exact_node {
            Some(node) => self
                .best_first(&[node], None, m)
                .into_iter()
                .map(|q| Candidate {
                    query: q,
                    is_exact_match: true,
                    retrieval_score: self.catalog[q.index()].popularity,
                })
                .collect(),
            None => Vec::new(),
        };
        if out.len() < m {
            let roots = self.fuzzy_roots(&typed);
            let fuzzy = self.best_first(&roots, exact_node, m - out.len());
            out.extend(fuzzy.into_iter().map(|q| Candidate {
                query: q,
                is_exact_match: false,
                retrieval_score: self.catalog[q.index()].popularity,
            }));
        }
        Ok(out)
    }

    fn walk(&self, chars: &[char]) -> Option<u32> {
        let mut at = 0u32;
        for c in chars {
            let node = &self.nodes[at as usize];
            let pos = node.children.binary_search_by_key(c, |&(k, _)| k).ok()?;
            at = node.children[pos].1;
        }
        Some(at)
    }

    /// Topmost trie nodes whose path is within edit distance 1 of `typed`.
    /// Every query below one of these nodes is a (fuzzy or exact) match, and
    /// the subtrees are disjoint.
    fn fuzzy_roots(&self, typed: &[char]) -> Vec<u32> {
        let n = typed.len();
        let first: Vec<usize> = (0..=n).collect();
        let mut roots = Vec::new();
        if first[n] <= 1 {
            roots.push(0);
            return roots;
        }
        let mut stack: Vec<(u32, Vec<usize>)> = vec![(0, first)];
        while let Some((node, row)) = stack.pop() {
            for &(c, child) in &self.nodes[node as usize].children {
                let mut next = Vec::with_capacity(n + 1);
                next.push(row[0] + 1);
                for j in 1..=n {
                    let sub = row[j - 1] + usize::from(typed[j - 1] != c);
                    next.push(sub.min(row[j] + 1).min(next[j - 1] + 1));
                }
                if next[n] <= 1 {
                    roots.push(child);
                } else if next.iter().min().copied().unwrap_or(usize::MAX) <= 1 {
                    stack.push((child, next));
                }
            }
        }
        roots
    }

    /// Best `k` queries below `roots` (skipping the subtree at `skip`), by
    /// popularity descending then text ascending.
    fn best_first(&self, roots: &[u32], skip: Option<u32>, k: usize) -> Vec<QueryId> {
        let mut heap = BinaryHeap::new();
        for &r in roots {
            if Some(r) != skip {
                heap.push(Entry::node(self.nodes[r as usize].best, r));
            }
        }
        let mut found: Vec<QueryId> = Vec::new();
        while let Some(top) = heap.pop() {
            if found.len() >= k {
                let kth = self.catalog[found[k - 1].index()].popularity;
                if top.bound < kth {
                    break;
                }
            }
            match top.item {
                Item::Query(q) => found.push(q),
                Item::Node(id) => {
                    let node = &self.nodes[id as usize];
                    if let Some(q) = node.terminal {
                        heap.push(Entry {
                            bound: self.catalog[q.index()].popularity,
                            item: Item::Query(q),
                        });
                    }
                    for &(_, child) in &node.children {
                        if Some(child) != skip {
                            heap.push(Entry::node(self.nodes[child as usize].best, child));
                        }
                    }
                }
            }
        }
        found.sort_by(|a, b| self.order(*a, *b));
        found.truncate(k);
        found
    }

    fn order(&self, a: QueryId, b: QueryId) -> Ordering {
        let (qa, qb) = (&self.catalog[a.index()], &self.catalog[b.index()]);
        qb.popularity
            .total_cmp(&qa.popularity)
            .then_with(|| qa.text.cmp(&qb.text))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        #[derive(Serialize)]
        struct StoredRef<'a> {
            catalog: &'a [QueryRecord],
            nodes: &'a [Node],
        }
        io::encode_container(
            INDEX_MAGIC,
            INDEX_FORMAT_VERSION,
            &StoredRef {
                catalog: &self.catalog,
                nodes: &self.nodes,
            },
        )
    }

    pub fn from_bytes(path: &Path, bytes: &[u8]) -> Result<Self> {
        let stored: Stored =
            io::decode_container(path, INDEX_MAGIC, INDEX_FORMAT_VERSION, bytes)?;
        let by_text = stored
            .catalog
            .iter()
            .enumerate()
            .map(|(i, r)| (r.text.clone(), QueryId(i as u32)))
            .collect::<HashMap<_, _>>();
        if by_text.len() != stored.catalog.len() || stored.nodes.is_empty() {
            return Err(Error::format(path, "corrupt index payload"));
        }
        Ok(PrefixIndex {
            catalog: stored.catalog,
            nodes: stored.nodes,
            by_text,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        io::write_bytes(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(path, &io::read_bytes(path)?)
    }
}

#[derive(Clone, Copy, Debug)]
enum Item {
    Node(u32),
    Query(QueryId),
}

#[derive(Clone, Copy, Debug)]
struct Entry {
    bound: f64,
    item: Item,
}

impl Entry {
    fn node(bound: f64, id: u32) -> Self {
        Entry {
            bound,
            item: Item::Node(id),
        }
    }
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound.total_cmp(&other.bound)
    }
}
