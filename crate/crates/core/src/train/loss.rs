use crate::embed::{cosine, EmbedError, EmbeddingVector};

use super::{ProjectionHead, TrainError, TrainingExample};

fn map_cos_err(e: EmbedError) -> TrainError {
    match e {
        EmbedError::DimMismatch { want, got, .. } => TrainError::DimMismatch { want, got },
        other => TrainError::Embed(other),
    }
}

fn check_tau(tau: f64) -> Result<(), TrainError> {
    if !(tau > 0.0) {
        return Err(TrainError::InvalidTau(tau));
    }
    Ok(())
}

/// Softmax cross-entropy against slot 0, computed from similarity logits
/// with max-subtraction. Returns -ln(exp(l0 - m) / sum exp(l - m)).
fn nll_of_logits(logits: &[f64]) -> f64 {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logits.iter().map(|l| (l - m).exp()).sum();
    z.ln() - (logits[0] - m)
}

/// Contrastive loss over raw vectors: the negative log-probability that the
/// positive is selected among {positive} + negatives under a
/// temperature-scaled cosine softmax. No negatives means the softmax has one
/// candidate, so the loss is exactly zero.
pub fn infonce_loss(
    query: &EmbeddingVector,
    positive: &EmbeddingVector,
    negatives: &[EmbeddingVector],
    tau: f64,
) -> Result<f64, TrainError> {
    check_tau(tau)?;
    if negatives.is_empty() {
        // Still surface dim mismatches on the degenerate path.
        cosine(query, positive).map_err(map_cos_err)?;
        return Ok(0.0);
    }
    let mut logits = Vec::with_capacity(negatives.len() + 1);
    logits.push(cosine(query, positive).map_err(map_cos_err)? / tau);
    for n in negatives {
        logits.push(cosine(query, n).map_err(map_cos_err)? / tau);
    }
    Ok(nll_of_logits(&logits))
}

/// Loss of one training example under the head, with optional extra negative
/// base vectors appended (in-batch negatives).
pub(crate) fn example_loss(
    head: &ProjectionHead,
    example: &TrainingExample,
    extra_negatives: &[&EmbeddingVector],
    tau: f64,
) -> Result<f64, TrainError> {
    check_tau(tau)?;
    let q = head.project_vec(&example.query_vec);
    let p = head.project_vec(&example.positive_vec);
    let mut negs: Vec<EmbeddingVector> = example
        .hard_negative_vecs
        .iter()
        .map(|v| head.project_vec(v))
        .collect();
    negs.extend(extra_negatives.iter().map(|v| head.project_vec(v)));
    infonce_loss(&q, &p, &negs, tau)
}

/// Analytic dL/dW for one example; `extra_negatives` are appended to the
/// mined negatives. Errors if any projected vector is exactly zero.
pub(crate) fn example_grad(
    head: &ProjectionHead,
    example: &TrainingExample,
    extra_negatives: &[&EmbeddingVector],
    tau: f64,
) -> Result<Vec<Vec<f64>>, TrainError> {
    check_tau(tau)?;
    example.validate()?;
    if example.dim() != head.d_in {
        return Err(TrainError::DimMismatch {
            want: head.d_in,
            got: example.dim(),
        });
    }
    for v in extra_negatives {
        if v.dim != head.d_in {
            return Err(TrainError::DimMismatch {
                want: head.d_in,
                got: v.dim,
            });
        }
    }

    // Base-space candidates: positive first, then negatives.
    let mut bases: Vec<&EmbeddingVector> = Vec::with_capacity(
        1 + example.hard_negative_vecs.len() + extra_negatives.len(),
    );
    bases.push(&example.positive_vec);
    bases.extend(example.hard_negative_vecs.iter());
    bases.extend(extra_negatives.iter().copied());

    let u = head.project(&example.query_vec.values);
    let norm_u = l2(&u);
    if norm_u == 0.0 {
        return Err(TrainError::DegenerateProjection(format!(
            "query of {}",
            example.cve_id
        )));
    }

    let mut projected = Vec::with_capacity(bases.len());
    let mut norms = Vec::with_capacity(bases.len());
    let mut sims = Vec::with_capacity(bases.len());
    for (i, base) in bases.iter().enumerate() {
        let v = head.project(&base.values);
        let norm_v = l2(&v);
        if norm_v == 0.0 {
            let name = if i == 0 {
                format!("positive {}", example.positive_id)
            } else {
                format!("candidate {i} of {}", example.cve_id)
            };
            return Err(TrainError::DegenerateProjection(name));
        }
        sims.push(dot(&u, &v) / (norm_u * norm_v));
        projected.push(v);
        norms.push(norm_v);
    }

    // Softmax over logits s/tau, then dL/ds_i = (p_i - [i == 0]) / tau.
    let logits: Vec<f64> = sims.iter().map(|s| s / tau).collect();
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    let coeff: Vec<f64> = exps
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let p = e / z;
            (if i == 0 { p - 1.0 } else { p }) / tau
        })
        .collect();

    let d_out = head.d_out;
    // Chain through u: ds_i/du = (v_i/|v_i| - s_i u/|u|) / |u|.
    let mut du = vec![0.0; d_out];
    for i in 0..bases.len() {
        for j in 0..d_out {
            let term = (projected[i][j] / norms[i] - sims[i] * u[j] / norm_u) / norm_u;
            du[j] += coeff[i] * term;
        }
    }

    // dL/dW = e_q (x) du + sum_i e_i (x) coeff_i * ds_i/dv_i.
    let mut grad = vec![vec![0.0; d_out]; head.d_in];
    outer_add(&mut grad, &example.query_vec.values, &du);
    let mut dv = vec![0.0; d_out];
    for i in 0..bases.len() {
        for j in 0..d_out {
            dv[j] = coeff[i] * (u[j] / norm_u - sims[i] * projected[i][j] / norms[i]) / norms[i];
        }
        outer_add(&mut grad, &bases[i].values, &dv);
    }
    Ok(grad)
}

/// Gradient of the contrastive loss with respect to the head for one
/// example's mined negatives.
pub fn infonce_grad(
    head: &ProjectionHead,
    example: &TrainingExample,
    tau: f64,
) -> Result<Vec<Vec<f64>>, TrainError> {
    example_grad(head, example, &[], tau)
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// grad[a][b] += left[a] * right[b], skipping zero rows.
fn outer_add(grad: &mut [Vec<f64>], left: &[f64], right: &[f64]) {
    for (row, &x) in grad.iter_mut().zip(left.iter()) {
        if x == 0.0 {
            continue;
        }
        for (cell, &y) in row.iter_mut().zip(right.iter()) {
            *cell += x * y;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn vector(values: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(values.to_vec())
    }

    fn planar(theta: f64) -> EmbeddingVector {
        vector(&[theta.cos(), theta.sin()])
    }

    fn random_unit(rng: &mut impl Rng, dim: usize) -> EmbeddingVector {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let e = EmbeddingVector::new(v).normalize();
            if !e.is_zero() {
                return e;
            }
        }
    }

    #[test]
    fn equal_similarity_with_one_negative_gives_ln_two() {
        let q = vector(&[1.0, 0.0]);
        let p = vector(&[0.6, 0.8]);
        let loss = infonce_loss(&q, &p, &[p.clone()], 1.0).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12, "{loss}");
    }

    #[test]
    fn no_negatives_is_exactly_zero() {
        let q = vector(&[1.0, 0.0]);
        let p = vector(&[0.3, 0.7]);
        assert_eq!(infonce_loss(&q, &p, &[], 0.01).unwrap(), 0.0);
    }

    #[test]
    fn aligned_positive_orthogonal_negative_matches_closed_form() {
        let q = vector(&[1.0, 0.0]);
        let p = vector(&[2.0, 0.0]);
        let n = vector(&[0.0, 5.0]);
        let loss = infonce_loss(&q, &p, &[n], 1.0).unwrap();
        let expected = (1.0 + (-1.0f64).exp()).ln();
        assert!((loss - expected).abs() < 1e-12, "{loss} vs {expected}");
        assert!((expected - 0.313262).abs() < 1e-6);
    }

    #[test]
    fn invalid_tau_and_dim_mismatch_are_errors() {
        let q = vector(&[1.0, 0.0]);
        let p = vector(&[0.0, 1.0]);
        assert!(matches!(
            infonce_loss(&q, &p, &[], 0.0),
            Err(TrainError::InvalidTau(_))
        ));
        assert!(matches!(
            infonce_loss(&q, &p, &[], -1.0),
            Err(TrainError::InvalidTau(_))
        ));
        let wide = vector(&[1.0, 0.0, 0.0]);
        assert!(matches!(
            infonce_loss(&q, &wide, &[], 1.0),
            Err(TrainError::DimMismatch { .. })
        ));
        assert!(matches!(
            infonce_loss(&q, &p, &[wide], 1.0),
            Err(TrainError::DimMismatch { .. })
        ));
    }

    #[test]
    fn loss_decreases_as_positive_alignment_grows() {
        let q = planar(0.0);
        let negatives = vec![planar(1.0), planar(2.2)];
        for tau in [0.01, 0.1, 1.0] {
            let mut last = f64::INFINITY;
            // cos(theta) increases as theta drops toward 0. At small tau the
            // softmax saturates and the loss underflows to exactly 0, so the
            // strict check applies only until the floor is reached.
            for step in 0..30 {
                let theta = 1.5 - step as f64 * 0.05;
                let loss = infonce_loss(&q, &planar(theta), &negatives, tau).unwrap();
                if last > 1e-12 {
                    assert!(loss < last, "tau {tau} step {step}: {loss} !< {last}");
                } else {
                    assert!(loss <= last, "tau {tau} step {step}: {loss} !<= {last}");
                }
                assert!(loss >= 0.0 || loss.abs() < 1e-15);
                last = loss;
            }
        }
    }

    proptest! {
        #[test]
        fn equal_similarities_give_ln_n_plus_one(
            n in 0usize..8,
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = random_unit(&mut rng, 6);
            let c = random_unit(&mut rng, 6);
            let negatives = vec![c.clone(); n];
            let loss = infonce_loss(&q, &c, &negatives, 0.5).unwrap();
            let expected = ((n + 1) as f64).ln();
            prop_assert!((loss - expected).abs() < 1e-9, "{} vs {}", loss, expected);
        }

        #[test]
        fn loss_is_never_negative(
            seed in any::<u64>(),
            n in 0usize..6,
            tau in 0.01f64..2.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = random_unit(&mut rng, 8);
            let p = random_unit(&mut rng, 8);
            let negatives: Vec<EmbeddingVector> =
                (0..n).map(|_| random_unit(&mut rng, 8)).collect();
            let loss = infonce_loss(&q, &p, &negatives, tau).unwrap();
            // The positive is always in the softmax, so p_0 <= 1.
            prop_assert!(loss >= 0.0, "{}", loss);
        }
    }

    // Gradient checks against central finite differences of the loss.

    fn fd_grad(
        head: &ProjectionHead,
        example: &TrainingExample,
        tau: f64,
        h: f64,
    ) -> Vec<Vec<f64>> {
        let mut grad = vec![vec![0.0; head.d_out]; head.d_in];
        let mut perturbed = head.clone();
        for a in 0..head.d_in {
            for b in 0..head.d_out {
                let orig = perturbed.w[a][b];
                perturbed.w[a][b] = orig + h;
                let plus = example_loss(&perturbed, example, &[], tau).unwrap();
                perturbed.w[a][b] = orig - h;
                let minus = example_loss(&perturbed, example, &[], tau).unwrap();
                perturbed.w[a][b] = orig;
                grad[a][b] = (plus - minus) / (2.0 * h);
            }
        }
        grad
    }

    fn frobenius(m: &[Vec<f64>]) -> f64 {
        m.iter()
            .flat_map(|r| r.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    fn matrix_diff_norm(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
        a.iter()
            .zip(b.iter())
            .flat_map(|(ra, rb)| ra.iter().zip(rb.iter()))
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    /// Candidates cluster around the query with a spread of `width`, so no
    /// softmax slot saturates and the gradient keeps a workable magnitude.
    /// Callers shrink the width with the temperature: the logit spread is
    /// roughly (cosine spread)/tau.
    fn clustered_example(
        rng: &mut impl Rng,
        dim: usize,
        n_negs: usize,
        width: f64,
    ) -> TrainingExample {
        let q = random_unit(rng, dim);
        let mut near = |anchor: &EmbeddingVector| loop {
            let values: Vec<f64> = anchor
                .values
                .iter()
                .map(|x| {
                    let (a, b): (f64, f64) = (rng.random(), rng.random());
                    // Box-Muller standard normal.
                    let g = (-2.0 * a.max(1e-12).ln()).sqrt() * (std::f64::consts::TAU * b).cos();
                    x + width * g
                })
                .collect();
            let e = EmbeddingVector::new(values).normalize();
            if !e.is_zero() {
                return e;
            }
        };
        TrainingExample {
            cve_id: "CVE-2020-0001".into(),
            query_vec: q.clone(),
            positive_id: "pos".into(),
            positive_vec: near(&q),
            hard_negative_ids: (0..n_negs).map(|i| format!("neg{i}")).collect(),
            hard_negative_vecs: (0..n_negs).map(|_| near(&q)).collect(),
        }
    }

    #[test]
    fn gradient_matches_finite_differences_on_many_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(20_240_901);
        let taus = [0.01f64, 0.1, 1.0];
        let mut checked = 0usize;
        for trial in 0..54 {
            let tau = taus[trial % taus.len()];
            let n_negs = trial % 9;
            let example = clustered_example(&mut rng, 16, n_negs, 0.15 * tau.sqrt());
            let head = ProjectionHead::init_from_rng(16, 8, &mut rng);

            let analytic = infonce_grad(&head, &example, tau).unwrap();
            let numeric = fd_grad(&head, &example, tau, 1e-5);
            let scale = frobenius(&analytic).max(frobenius(&numeric));
            if scale < 1e-12 {
                // Constant loss (no negatives): both sides are zero.
                assert!(n_negs == 0, "vanishing gradient on trial {trial}");
                checked += 1;
                continue;
            }
            let rel = matrix_diff_norm(&analytic, &numeric) / scale;
            assert!(rel < 1e-4, "trial {trial} tau {tau} negs {n_negs}: rel {rel}");
            checked += 1;
        }
        assert!(checked >= 50);
    }

    #[test]
    fn identical_candidates_yield_a_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let q = random_unit(&mut rng, 12);
        let c = random_unit(&mut rng, 12);
        let example = TrainingExample {
            cve_id: "CVE-2020-0002".into(),
            query_vec: q,
            positive_id: "pos".into(),
            positive_vec: c.clone(),
            hard_negative_ids: vec!["n0".into(), "n1".into(), "n2".into()],
            hard_negative_vecs: vec![c.clone(), c.clone(), c],
        };
        let head = ProjectionHead::init_from_rng(12, 6, &mut rng);
        let grad = infonce_grad(&head, &example, 0.1).unwrap();
        let worst = grad
            .iter()
            .flat_map(|r| r.iter())
            .fold(0.0f64, |acc, x| acc.max(x.abs()));
        assert!(worst < 1e-10, "max entry {worst}");
    }

    #[test]
    fn directional_derivative_along_w_is_zero() {
        // Cosine is scale-invariant, so L((1 + t) W) is constant in t and
        // the gradient must be orthogonal to W itself.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..10 {
            let example = clustered_example(&mut rng, 10, 4, 0.05);
            let head = ProjectionHead::init_from_rng(10, 5, &mut rng);
            let grad = infonce_grad(&head, &example, 0.1).unwrap();
            let mut directional = 0.0;
            for (grow, wrow) in grad.iter().zip(head.w.iter()) {
                for (&g, &w) in grow.iter().zip(wrow.iter()) {
                    directional += g * w;
                }
            }
            assert!(directional.abs() < 1e-8, "{directional}");
        }
    }

    #[test]
    fn zero_projection_is_reported() {
        let example = TrainingExample {
            cve_id: "CVE-2020-0003".into(),
            query_vec: vector(&[0.0, 0.0, 1.0]),
            positive_id: "pos".into(),
            positive_vec: vector(&[1.0, 0.0, 0.0]),
            hard_negative_ids: vec!["n0".into()],
            hard_negative_vecs: vec![vector(&[0.0, 1.0, 0.0])],
        };
        // The head keeps only the first two coordinates, so the query
        // projects to zero.
        let head = ProjectionHead::identity_padded(3, 2);
        assert!(matches!(
            infonce_grad(&head, &example, 0.1),
            Err(TrainError::DegenerateProjection(_))
        ));
    }
}
