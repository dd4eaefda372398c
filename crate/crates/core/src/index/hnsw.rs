use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embed::EmbeddingVector;

use super::flat::dot;
use super::{rank_entries, ScoredEntry};

/// Graph-construction and search parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HnswParams {
    /// Max neighbors per node on layers above 0; layer 0 allows 2m.
    pub m: usize,
    /// Beam width while inserting.
    pub ef_construction: usize,
    /// Beam width while searching; the effective width is max(ef_search, k).
    pub ef_search: usize,
    /// Seed for level assignment; fixes the graph shape for a given input order.
    pub seed: u64,
}

impl Default for HnswParams {
    fn default() -> Self {
        Self {
            m: 16,
            ef_construction: 200,
            ef_search: 100,
            seed: 0,
        }
    }
}

/// Approximate nearest-neighbor graph over normalized vectors.
///
/// Distance is 1 - dot on unit vectors; ties compare by node insertion id.
/// Build order and the seed fully determine the graph.
#[derive(Debug, Clone)]
pub struct HnswIndex {
    pub(crate) params: HnswParams,
    pub(crate) dim: usize,
    pub(crate) ids: Vec<String>,
    pub(crate) vectors: Vec<Vec<f64>>,
    pub(crate) zero: Vec<bool>,
    /// Top layer of each node.
    pub(crate) levels: Vec<usize>,
    /// neighbors[node][layer] for layer in 0..=levels[node].
    pub(crate) neighbors: Vec<Vec<Vec<usize>>>,
    pub(crate) entry_point: usize,
    pub(crate) max_level: usize,
}

/// Candidate ordered by (distance, node id); BinaryHeap pops the largest.
#[derive(Debug, Clone, Copy)]
struct HeapItem {
    dist: f64,
    node: usize,
}

impl PartialEq for HeapItem {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then_with(|| self.node.cmp(&other.node))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl HnswIndex {
    pub(crate) fn build(pairs: &[(String, EmbeddingVector)], dim: usize, params: HnswParams) -> Self {
        let mut index = Self {
            params,
            dim,
            ids: Vec::with_capacity(pairs.len()),
            vectors: Vec::with_capacity(pairs.len()),
            zero: Vec::with_capacity(pairs.len()),
            levels: Vec::with_capacity(pairs.len()),
            neighbors: Vec::with_capacity(pairs.len()),
            entry_point: 0,
            max_level: 0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(index.params.seed);
        let ml = 1.0 / (index.params.m as f64).ln();
        for (id, v) in pairs {
            let unit = v.clone().normalize();
            index.ids.push(id.clone());
            index.zero.push(unit.is_zero());
            index.vectors.push(unit.values);
            // U is clamped away from 0 so ln stays finite.
            let u: f64 = 1.0 - rng.random::<f64>();
            let level = (-u.ln() * ml).floor() as usize;
            index.insert(index.vectors.len() - 1, level);
        }
        index
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn params(&self) -> &HnswParams {
        &self.params
    }

    fn distance(&self, q: &[f64], node: usize) -> f64 {
        if self.zero[node] {
            1.0
        } else {
            1.0 - dot(q, &self.vectors[node])
        }
    }

    fn insert(&mut self, node: usize, level: usize) {
        self.levels.push(level);
        self.neighbors.push(vec![Vec::new(); level + 1]);
        if node == 0 {
            self.entry_point = 0;
            self.max_level = level;
            return;
        }

        let query = self.vectors[node].clone();
        let mut ep = self.entry_point;

        // Greedy descent through layers the new node does not occupy.
        let mut layer = self.max_level;
        while layer > level {
            ep = self.greedy_closest(&query, ep, layer);
            layer -= 1;
        }

        // Beam search and connect on each shared layer, top down.
        let mut eps = vec![ep];
        let top = level.min(self.max_level);
        for layer in (0..=top).rev() {
            let found = self.search_layer(&query, &eps, self.params.ef_construction, layer);
            // Layer 0 fills to its full capacity so the base graph stays
            // dense; upper layers keep the sparser long-range role.
            let want = if layer == 0 {
                self.params.m * 2
            } else {
                self.params.m
            };
            let chosen = self.select_diverse(&found, want);
            for &peer in &chosen {
                self.neighbors[node][layer].push(peer);
                self.neighbors[peer][layer].push(node);
                self.prune(peer, layer);
            }
            eps = found.into_iter().map(|item| item.node).collect();
        }

        if level > self.max_level {
            self.entry_point = node;
            self.max_level = level;
        }
    }

    /// Re-selects the neighbors of `node` on `layer` when it exceeds the cap.
    fn prune(&mut self, node: usize, layer: usize) {
        let cap = if layer == 0 {
            self.params.m * 2
        } else {
            self.params.m
        };
        if self.neighbors[node][layer].len() <= cap {
            return;
        }
        let origin = self.vectors[node].clone();
        let mut ranked: Vec<HeapItem> = self.neighbors[node][layer]
            .iter()
            .map(|&peer| HeapItem {
                dist: self.distance(&origin, peer),
                node: peer,
            })
            .collect();
        ranked.sort();
        self.neighbors[node][layer] = self.select_diverse(&ranked, cap);
    }

    /// Picks up to `cap` links from a distance-sorted candidate list.
    ///
    /// A candidate is kept only when it is closer to the base point than to
    /// every neighbor kept before it, so the links spread across directions
    /// instead of piling into one cluster. Plain closest-first truncation
    /// strands whole regions of the graph, which shows up directly as lost
    /// search recall.
    fn select_diverse(&self, ranked: &[HeapItem], cap: usize) -> Vec<usize> {
        let mut kept: Vec<HeapItem> = Vec::with_capacity(cap);
        let mut rejected: Vec<usize> = Vec::new();
        for &item in ranked {
            if kept.len() >= cap {
                break;
            }
            let candidate = &self.vectors[item.node];
            let blocked = kept
                .iter()
                .any(|held| self.distance(candidate, held.node) < item.dist);
            if blocked {
                rejected.push(item.node);
            } else {
                kept.push(item);
            }
        }
        let mut out: Vec<usize> = kept.into_iter().map(|item| item.node).collect();
        for node in rejected {
            if out.len() >= cap {
                break;
            }
            out.push(node);
        }
        out
    }

    /// Single-step hill descent to the locally closest node on `layer`.
    fn greedy_closest(&self, query: &[f64], mut ep: usize, layer: usize) -> usize {
        let mut best = self.distance(query, ep);
        loop {
            let mut improved = false;
            for &peer in &self.neighbors[ep][layer] {
                let d = self.distance(query, peer);
                if d < best || (d == best && peer < ep) {
                    best = d;
                    ep = peer;
                    improved = true;
                }
            }
            if !improved {
                return ep;
            }
        }
    }

    /// Best-first beam search on one layer; returns up to `ef` closest nodes
    /// sorted by (distance, node id).
    fn search_layer(&self, query: &[f64], eps: &[usize], ef: usize, layer: usize) -> Vec<HeapItem> {
        let mut visited = vec![false; self.ids.len()];
        // Min-heap of frontier nodes via Reverse; max-heap of current best.
        let mut frontier: BinaryHeap<std::cmp::Reverse<HeapItem>> = BinaryHeap::new();
        let mut best: BinaryHeap<HeapItem> = BinaryHeap::new();

        for &ep in eps {
            if visited[ep] {
                continue;
            }
            visited[ep] = true;
            let item = HeapItem {
                dist: self.distance(query, ep),
                node: ep,
            };
            frontier.push(std::cmp::Reverse(item));
            best.push(item);
        }
        while best.len() > ef {
            best.pop();
        }

        while let Some(std::cmp::Reverse(current)) = frontier.pop() {
            let worst = best.peek().copied().expect("beam never empty");
            if current.dist > worst.dist && best.len() >= ef {
                break;
            }
            for &peer in &self.neighbors[current.node][layer] {
                if visited[peer] {
                    continue;
                }
                visited[peer] = true;
                let item = HeapItem {
                    dist: self.distance(query, peer),
                    node: peer,
                };
                let worst = best.peek().copied().expect("beam never empty");
                if best.len() < ef || item < worst {
                    frontier.push(std::cmp::Reverse(item));
                    best.push(item);
                    if best.len() > ef {
                        best.pop();
                    }
                }
            }
        }

        let mut out = best.into_vec();
        out.sort();
        out
    }

    pub fn search(&self, query: &EmbeddingVector, k: usize) -> Vec<ScoredEntry> {
        let q = query.clone().normalize();
        if q.is_zero() {
            // Every document is equidistant from a zero query; fall back to
            // the canonical all-zero ranking.
            let entries: Vec<ScoredEntry> = self
                .ids
                .iter()
                .map(|id| ScoredEntry {
                    sha: id.clone(),
                    score: 0.0,
                })
                .collect();
            return rank_entries(entries, k);
        }

        let mut ep = self.entry_point;
        for layer in (1..=self.max_level).rev() {
            ep = self.greedy_closest(&q.values, ep, layer);
        }
        let ef = self.params.ef_search.max(k);
        let found = self.search_layer(&q.values, &[ep], ef, 0);
        let entries: Vec<ScoredEntry> = found
            .into_iter()
            .map(|item| ScoredEntry {
                sha: self.ids[item.node].clone(),
                score: if self.zero[item.node] {
                    0.0
                } else {
                    1.0 - item.dist
                },
            })
            .collect();
        rank_entries(entries, k)
    }
}
