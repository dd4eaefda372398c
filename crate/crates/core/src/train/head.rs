use std::io::{Read, Write};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embed::EmbeddingVector;

use super::TrainError;

/// Trainable linear map applied on top of frozen base embeddings.
///
/// `w` is row-major with d_in rows of d_out entries; a vector v maps to
/// u[j] = sum_i w[i][j] * v[i].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionHead {
    pub d_in: usize,
    pub d_out: usize,
    pub w: Vec<Vec<f64>>,
}

impl ProjectionHead {
    /// Identity on the first min(d_in, d_out) coordinates, zero elsewhere.
    pub fn identity_padded(d_in: usize, d_out: usize) -> Self {
        let w = (0..d_in)
            .map(|i| {
                (0..d_out)
                    .map(|j| if i == j { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        Self { d_in, d_out, w }
    }

    /// Identity-padded matrix plus uniform noise in [-1e-3, 1e-3]; the noise
    /// breaks ties between the truncated coordinates.
    pub fn identity_with_noise(d_in: usize, d_out: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::init_from_rng(d_in, d_out, &mut rng)
    }

    pub(crate) fn init_from_rng(d_in: usize, d_out: usize, rng: &mut impl Rng) -> Self {
        let mut head = Self::identity_padded(d_in, d_out);
        for row in &mut head.w {
            for cell in row.iter_mut() {
                *cell += rng.random_range(-1e-3..=1e-3);
            }
        }
        head
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if self.w.len() != self.d_in {
            return Err(TrainError::Corrupt(format!(
                "matrix has {} rows, d_in is {}",
                self.w.len(),
                self.d_in
            )));
        }
        for (i, row) in self.w.iter().enumerate() {
            if row.len() != self.d_out {
                return Err(TrainError::Corrupt(format!(
                    "row {i} has {} entries, d_out is {}",
                    row.len(),
                    self.d_out
                )));
            }
            if let Some(j) = row.iter().position(|x| !x.is_finite()) {
                return Err(TrainError::Corrupt(format!(
                    "non-finite entry at ({i}, {j})"
                )));
            }
        }
        Ok(())
    }

    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.d_in);
        let mut out = vec![0.0; self.d_out];
        for (row, &x) in self.w.iter().zip(v.iter()) {
            if x == 0.0 {
                continue;
            }
            for (o, &cell) in out.iter_mut().zip(row.iter()) {
                *o += cell * x;
            }
        }
        out
    }

    pub fn project_vec(&self, v: &EmbeddingVector) -> EmbeddingVector {
        EmbeddingVector::new(self.project(&v.values))
    }

    /// Every entry multiplied by `lambda`. Cosine similarity between
    /// projected vectors is invariant under positive scaling.
    pub fn scaled(&self, lambda: f64) -> Self {
        let w = self
            .w
            .iter()
            .map(|row| row.iter().map(|x| x * lambda).collect())
            .collect();
        Self {
            d_in: self.d_in,
            d_out: self.d_out,
            w,
        }
    }

    /// Content hash identifying this exact matrix: the first 12 hex chars of
    /// the SHA-256 of the serialized JSON.
    pub fn id(&self) -> String {
        let json = serde_json::to_string(self).expect("head serializes");
        let digest = Sha256::digest(json.as_bytes());
        let mut out = String::with_capacity(12);
        for byte in digest.iter().take(6) {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }

    pub fn save<W: Write>(&self, out: W) -> Result<(), TrainError> {
        self.validate()?;
        serde_json::to_writer(out, self).map_err(|e| TrainError::Corrupt(e.to_string()))?;
        Ok(())
    }

    pub fn load<R: Read>(input: R) -> Result<Self, TrainError> {
        let head: Self =
            serde_json::from_reader(input).map_err(|e| TrainError::Corrupt(e.to_string()))?;
        head.validate()?;
        Ok(head)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_padded_truncates_to_leading_coordinates() {
        let head = ProjectionHead::identity_padded(5, 3);
        let out = head.project(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(out, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn noise_stays_within_band() {
        let head = ProjectionHead::identity_with_noise(8, 4, 42);
        head.validate().unwrap();
        for (i, row) in head.w.iter().enumerate() {
            for (j, &cell) in row.iter().enumerate() {
                let base = if i == j { 1.0 } else { 0.0 };
                assert!((cell - base).abs() <= 1e-3, "({i},{j}) = {cell}");
            }
        }
    }

    #[test]
    fn save_load_round_trips_bitwise() {
        let head = ProjectionHead::identity_with_noise(16, 8, 7);
        let mut buf = Vec::new();
        head.save(&mut buf).unwrap();
        let loaded = ProjectionHead::load(buf.as_slice()).unwrap();
        assert_eq!(head, loaded);
        assert_eq!(head.id(), loaded.id());
    }

    #[test]
    fn persisted_layout_uses_the_documented_keys() {
        let head = ProjectionHead::identity_padded(2, 1);
        let mut buf = Vec::new();
        head.save(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "{\"d_in\":2,\"d_out\":1,\"w\":[[1.0],[0.0]]}");
    }

    #[test]
    fn id_is_twelve_hex_chars_and_tracks_content() {
        let a = ProjectionHead::identity_with_noise(8, 4, 1);
        let b = ProjectionHead::identity_with_noise(8, 4, 2);
        assert_eq!(a.id().len(), 12);
        assert!(a.id().chars().all(|c| c.is_ascii_hexdigit()));
        assert_ne!(a.id(), b.id());
        assert_eq!(a.id(), a.clone().id());
    }

    #[test]
    fn load_rejects_non_finite_and_misshapen_matrices() {
        let bad_shape = "{\"d_in\":2,\"d_out\":2,\"w\":[[1.0,0.0]]}";
        assert!(ProjectionHead::load(bad_shape.as_bytes()).is_err());
        let bad_value = "{\"d_in\":1,\"d_out\":1,\"w\":[[null]]}";
        assert!(ProjectionHead::load(bad_value.as_bytes()).is_err());
    }

    #[test]
    fn scaling_multiplies_every_entry() {
        let head = ProjectionHead::identity_with_noise(4, 2, 3);
        let scaled = head.scaled(2.0);
        for (row_a, row_b) in head.w.iter().zip(scaled.w.iter()) {
            for (&a, &b) in row_a.iter().zip(row_b.iter()) {
                assert_eq!(b, a * 2.0);
            }
        }
    }
}
