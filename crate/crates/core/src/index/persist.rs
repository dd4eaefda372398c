use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::embed::EmbeddingVector;

use super::hnsw::{HnswIndex, HnswParams};
use super::IndexError;

/// One stored vector, as serialized to the vectors file.
#[derive(Debug, Serialize, Deserialize)]
struct VectorLine {
    id: String,
    dim: usize,
    v: Vec<f64>,
}

/// Writes vectors as JSONL, one `{"id", "dim", "v"}` object per line, in the
/// given order.
pub fn save_vectors<W: Write>(
    mut out: W,
    pairs: &[(String, EmbeddingVector)],
) -> Result<(), IndexError> {
    for (id, vec) in pairs {
        let line = VectorLine {
            id: id.clone(),
            dim: vec.dim,
            v: vec.values.clone(),
        };
        serde_json::to_writer(&mut out, &line).map_err(|e| IndexError::Corrupt(e.to_string()))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads a vectors JSONL stream back into ordered `(id, vector)` pairs.
pub fn load_vectors<R: Read>(input: R) -> Result<Vec<(String, EmbeddingVector)>, IndexError> {
    let reader = BufReader::new(input);
    let mut pairs = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: VectorLine = serde_json::from_str(&line)
            .map_err(|e| IndexError::Corrupt(format!("vectors line {}: {e}", lineno + 1)))?;
        if parsed.v.len() != parsed.dim {
            return Err(IndexError::Corrupt(format!(
                "vectors line {}: dim {} but {} values",
                lineno + 1,
                parsed.dim,
                parsed.v.len()
            )));
        }
        pairs.push((parsed.id, EmbeddingVector::new(parsed.v)));
    }
    Ok(pairs)
}

/// Graph topology without the vectors; pairs with the vectors file to
/// reconstitute the index.
#[derive(Debug, Serialize, Deserialize)]
struct GraphFile {
    params: HnswParams,
    dim: usize,
    /// Node order; position is the node id used in `layers`.
    ids: Vec<String>,
    /// Top layer per node.
    levels: Vec<usize>,
    /// layers[node][layer] lists neighbor node ids, layer 0 first.
    layers: Vec<Vec<Vec<usize>>>,
    entry_point: usize,
    max_level: usize,
}

/// Serializes the graph adjacency structure as a single JSON document.
pub fn save_hnsw_graph<W: Write>(out: W, index: &HnswIndex) -> Result<(), IndexError> {
    let file = GraphFile {
        params: index.params.clone(),
        dim: index.dim,
        ids: index.ids.clone(),
        levels: index.levels.clone(),
        layers: index.neighbors.clone(),
        entry_point: index.entry_point,
        max_level: index.max_level,
    };
    serde_json::to_writer(out, &file).map_err(|e| IndexError::Corrupt(e.to_string()))?;
    Ok(())
}

/// Rebuilds an index from a graph document plus the matching vectors.
/// The vector ids must match the graph's node order exactly.
pub fn load_hnsw_graph<R: Read>(
    input: R,
    pairs: &[(String, EmbeddingVector)],
) -> Result<HnswIndex, IndexError> {
    let file: GraphFile =
        serde_json::from_reader(input).map_err(|e| IndexError::Corrupt(e.to_string()))?;
    if file.ids.len() != pairs.len() {
        return Err(IndexError::Corrupt(format!(
            "graph lists {} nodes but {} vectors were supplied",
            file.ids.len(),
            pairs.len()
        )));
    }
    if file.levels.len() != file.ids.len() || file.layers.len() != file.ids.len() {
        return Err(IndexError::Corrupt(
            "levels/layers length disagrees with ids".into(),
        ));
    }
    if file.entry_point >= file.ids.len() {
        return Err(IndexError::Corrupt("entry point out of range".into()));
    }
    let mut vectors = Vec::with_capacity(pairs.len());
    let mut zero = Vec::with_capacity(pairs.len());
    for (i, (id, vec)) in pairs.iter().enumerate() {
        if *id != file.ids[i] {
            return Err(IndexError::Corrupt(format!(
                "vector {i} is {id:?} but the graph expects {:?}",
                file.ids[i]
            )));
        }
        if vec.dim != file.dim {
            return Err(IndexError::Corrupt(format!(
                "vector {id:?} has dim {} but the graph stores dim {}",
                vec.dim, file.dim
            )));
        }
        let unit = vec.clone().normalize();
        zero.push(unit.is_zero());
        vectors.push(unit.values);
    }
    for (node, layers) in file.layers.iter().enumerate() {
        if layers.len() != file.levels[node] + 1 {
            return Err(IndexError::Corrupt(format!(
                "node {node} has {} layers but level {}",
                layers.len(),
                file.levels[node]
            )));
        }
        for peers in layers {
            for &peer in peers {
                if peer >= file.ids.len() {
                    return Err(IndexError::Corrupt(format!(
                        "node {node} links to out-of-range node {peer}"
                    )));
                }
            }
        }
    }
    Ok(HnswIndex {
        params: file.params,
        dim: file.dim,
        ids: file.ids,
        vectors,
        zero,
        levels: file.levels,
        neighbors: file.layers,
        entry_point: file.entry_point,
        max_level: file.max_level,
    })
}
