use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::embed::EmbeddingVector;

use super::loss::{example_grad, example_loss};
use super::{ProjectionHead, TrainConfig, TrainError, TrainingExample};

/// Trained head plus the mean loss per epoch, measured before each batch's
/// update so the trace reflects the model the batch was scored with.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub head: ProjectionHead,
    pub epoch_mean_loss: Vec<f64>,
}

/// Plain SGD over InfoNCE with a fixed learning rate.
///
/// One generator drives everything: the init noise, then one shuffle per
/// epoch. Per-example gradients within a batch are averaged in shuffle
/// order, so a run is a pure function of (examples, config).
pub fn train_projection(
    examples: &[TrainingExample],
    config: &TrainConfig,
) -> Result<TrainReport, TrainError> {
    config.validate()?;
    if examples.is_empty() {
        return Err(TrainError::NoExamples);
    }
    let d_in = examples[0].dim();
    for ex in examples {
        ex.validate()?;
        if ex.dim() != d_in {
            return Err(TrainError::DimMismatch {
                want: d_in,
                got: ex.dim(),
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut head = ProjectionHead::init_from_rng(d_in, config.d_out, &mut rng);

    let mut epoch_mean_loss = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for _epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            // Gradients are pure per example; compute them in parallel and
            // reduce in batch order to keep the sum deterministic. A zero
            // rate skips gradient work so initialization passes through
            // bitwise.
            let per_example: Vec<(f64, Option<Vec<Vec<f64>>>)> = batch
                .par_iter()
                .map(|&idx| {
                    let ex = &examples[idx];
                    let extras = in_batch_extras(examples, batch, idx, config);
                    let loss = example_loss(&head, ex, &extras, config.tau)?;
                    let grad = if config.learning_rate > 0.0 {
                        Some(example_grad(&head, ex, &extras, config.tau)?)
                    } else {
                        None
                    };
                    Ok((loss, grad))
                })
                .collect::<Result<_, TrainError>>()?;

            let scale = config.learning_rate / batch.len() as f64;
            for (loss, grad) in per_example {
                loss_sum += loss;
                let Some(grad) = grad else { continue };
                for (wrow, grow) in head.w.iter_mut().zip(grad.iter()) {
                    for (w, g) in wrow.iter_mut().zip(grow.iter()) {
                        *w -= scale * g;
                    }
                }
            }
        }
        epoch_mean_loss.push(loss_sum / examples.len() as f64);
    }

    Ok(TrainReport {
        head,
        epoch_mean_loss,
    })
}

/// Positives of the other examples in the batch, excluding any that belong
/// to the same vulnerability or share the positive commit.
fn in_batch_extras<'a>(
    examples: &'a [TrainingExample],
    batch: &[usize],
    current: usize,
    config: &TrainConfig,
) -> Vec<&'a EmbeddingVector> {
    if !config.in_batch_negatives {
        return Vec::new();
    }
    let ex = &examples[current];
    batch
        .iter()
        .filter(|&&other| other != current)
        .map(|&other| &examples[other])
        .filter(|b| b.cve_id != ex.cve_id && b.positive_id != ex.positive_id)
        .map(|b| &b.positive_vec)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::{make_embedder, EmbedderConfig, EmbedderKind};
    use rand_chacha::ChaCha8Rng;

    /// One example per synthetic query: the positive repeats content words
    /// of the query, hard negatives draw from an unrelated vocabulary.
    fn separable_examples(n: usize, dim: usize, seed: u64) -> Vec<TrainingExample> {
        let embedder = make_embedder(&EmbedderConfig {
            kind: EmbedderKind::Hash,
            dim,
            ..Default::default()
        })
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut examples = Vec::with_capacity(n);
        for i in 0..n {
            let content: Vec<String> = (0..10).map(|t| format!("topic{i}word{t}")).collect();
            let query = content.join(" ");
            let positive = format!("{} patch hardening", content.join(" "));
            let negatives: Vec<String> = (0..4)
                .map(|_| {
                    let noise: Vec<String> = (0..8)
                        .map(|_| format!("junk{}", rng.random_range(0..2000u32)))
                        .collect();
                    noise.join(" ")
                })
                .collect();
            examples.push(TrainingExample {
                cve_id: format!("CVE-2021-{:04}", 1000 + i),
                query_vec: embedder.embed_one(&query).unwrap(),
                positive_id: format!("{i:040x}"),
                positive_vec: embedder.embed_one(&positive).unwrap(),
                hard_negative_ids: (0..4).map(|j| format!("{:040x}", 10_000 + i * 10 + j)).collect(),
                hard_negative_vecs: negatives
                    .iter()
                    .map(|t| embedder.embed_one(t).unwrap())
                    .collect(),
            });
        }
        examples
    }

    #[test]
    fn zero_learning_rate_returns_the_initialization_bitwise() {
        let examples = separable_examples(8, 64, 5);
        let config = TrainConfig {
            learning_rate: 0.0,
            d_out: 16,
            seed: 31,
            ..Default::default()
        };
        let report = train_projection(&examples, &config).unwrap();
        let expected = ProjectionHead::identity_with_noise(64, 16, 31);
        assert_eq!(report.head.w, expected.w);
        assert_eq!(report.epoch_mean_loss.len(), config.epochs);
    }

    #[test]
    fn same_seed_is_bitwise_reproducible() {
        let examples = separable_examples(12, 64, 6);
        let config = TrainConfig {
            learning_rate: 0.05,
            d_out: 16,
            seed: 9,
            batch_size: 5,
            ..Default::default()
        };
        let a = train_projection(&examples, &config).unwrap();
        let b = train_projection(&examples, &config).unwrap();
        assert_eq!(a.head.w, b.head.w);
        assert_eq!(a.epoch_mean_loss, b.epoch_mean_loss);

        let other = TrainConfig { seed: 10, ..config };
        let c = train_projection(&examples, &other).unwrap();
        assert_ne!(a.head.w, c.head.w);
    }

    #[test]
    fn loss_descends_on_a_separable_fixture() {
        // A soft temperature keeps the softmax away from saturation so the
        // three default epochs leave a visible descent signal.
        let examples = separable_examples(24, 128, 7);
        let config = TrainConfig {
            learning_rate: 0.2,
            tau: 0.5,
            d_out: 64,
            seed: 3,
            batch_size: 8,
            ..Default::default()
        };
        let report = train_projection(&examples, &config).unwrap();
        let first = report.epoch_mean_loss[0];
        let last = *report.epoch_mean_loss.last().unwrap();
        assert!(
            last < first,
            "no descent: first {first}, last {last}, trace {:?}",
            report.epoch_mean_loss
        );
    }

    #[test]
    fn mixed_dims_are_rejected() {
        let mut examples = separable_examples(4, 64, 8);
        let narrow = separable_examples(1, 32, 8);
        examples.push(narrow.into_iter().next().unwrap());
        let err = train_projection(&examples, &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, TrainError::DimMismatch { .. }));
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(matches!(
            train_projection(&[], &TrainConfig::default()),
            Err(TrainError::NoExamples)
        ));
    }

    #[test]
    fn in_batch_negatives_skip_same_cve_and_same_positive() {
        let examples = separable_examples(3, 64, 11);
        let mut twin = examples[0].clone();
        twin.cve_id = "CVE-2021-9999".into();
        let all = vec![examples[0].clone(), twin, examples[1].clone(), examples[2].clone()];
        let batch: Vec<usize> = (0..all.len()).collect();
        let config = TrainConfig::default();
        // Example 1 shares its positive commit with example 0, so each sees
        // two extras, not three.
        let extras = in_batch_extras(&all, &batch, 0, &config);
        assert_eq!(extras.len(), 2);
        let extras = in_batch_extras(&all, &batch, 2, &config);
        assert_eq!(extras.len(), 3);

        let off = TrainConfig {
            in_batch_negatives: false,
            ..Default::default()
        };
        assert!(in_batch_extras(&all, &batch, 0, &off).is_empty());
    }
}
