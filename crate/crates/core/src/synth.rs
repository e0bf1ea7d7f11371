//! Seeded synthetic data drawn from the bundled models' generative
//! processes. All generators use ChaCha8 so output is stable across
//! platforms.

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson, StandardNormal};

use crate::ctm::CtmParams;
use crate::data::{Document, LabeledInstance};
use crate::error::{Error, Result};
use crate::numerics::{sigmoid, softmax, spd_factorize, Matrix};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn dist_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Input(e.to_string())
}

fn dirichlet(rng: &mut ChaCha8Rng, alpha: &[f64]) -> Result<Vec<f64>> {
    let mut draw = alpha
        .iter()
        .map(|&a| Ok(Gamma::new(a, 1.0).map_err(dist_err)?.sample(rng)))
        .collect::<Result<Vec<f64>>>()?;
    let total: f64 = draw.iter().sum();
    if !(total > 0.0) {
        // Every component underflowed; fall back to the largest parameter.
        let best = alpha.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map_or(0, |(i, _)| i);
        draw.iter_mut().enumerate().for_each(|(i, d)| *d = if i == best { 1.0 } else { 0.0 });
        return Ok(draw);
    }
    draw.iter_mut().for_each(|d| *d /= total);
    Ok(draw)
}

fn multinomial(rng: &mut ChaCha8Rng, probs: &[f64], n: usize) -> Result<Document> {
    let index = WeightedIndex::new(probs).map_err(dist_err)?;
    let tokens: Vec<usize> = (0..n).map(|_| index.sample(rng)).collect();
    Ok(Document::from_tokens(&tokens))
}

/// Unigram corpus: `θ ~ N(0, I)`, `z_d ~ Dir(e^θ)`, `doc_len` words per
/// document. Returns the drawn `θ` and the documents.
pub fn unigram_corpus(vocab_size: usize, num_docs: usize, doc_len: usize, seed: u64) -> Result<(Vec<f64>, Vec<Document>)> {
    let mut rng = rng(seed);
    let theta: Vec<f64> = (0..vocab_size).map(|_| rng.sample(StandardNormal)).collect();
    let alpha: Vec<f64> = theta.iter().map(|t| t.exp()).collect();
    let docs = (0..num_docs)
        .map(|_| {
            let z = dirichlet(&mut rng, &alpha)?;
            multinomial(&mut rng, &z, doc_len)
        })
        .collect::<Result<_>>()?;
    Ok((theta, docs))
}

/// Random CTM parameters: topics from `Dir(topic_concentration)`, prior
/// mean from `N(0, 0.25)`, and a correlated prior covariance `BBᵀ/K + 0.5I`
/// with `B` standard normal.
pub fn ctm_params(num_topics: usize, vocab_size: usize, topic_concentration: f64, seed: u64) -> Result<CtmParams<f64>> {
    let mut rng = rng(seed);
    let topics = (0..num_topics)
        .map(|_| {
            let t = dirichlet(&mut rng, &vec![topic_concentration; vocab_size])?;
            let total: f64 = t.iter().map(|p| p + 1e-10).sum();
            Ok(t.iter().map(|p| (p + 1e-10) / total).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let normal = Normal::new(0.0, 0.5).map_err(dist_err)?;
    let mean: Vec<f64> = (0..num_topics).map(|_| normal.sample(&mut rng)).collect();
    let mut b = Matrix::zeros(num_topics);
    for i in 0..num_topics {
        for j in 0..num_topics {
            b[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let mut cov = b.mul_mat(&b.transpose()).scale(1.0 / num_topics as f64);
    cov.add_diagonal(0.5);
    cov.symmetrize();
    CtmParams::new(topics, mean, cov)
}

/// Documents from the CTM generative process; lengths are
/// `max(2, Poisson(mean_len))`.
pub fn ctm_corpus(params: &CtmParams<f64>, num_docs: usize, mean_len: f64, seed: u64) -> Result<Vec<Document>> {
    let mut rng = rng(seed);
    let chol = spd_factorize(&params.prior_cov)?;
    let lower = chol.lower();
    let k = params.num_topics();
    let lengths = Poisson::new(mean_len).map_err(dist_err)?;
    let topic_index = params
        .topics
        .iter()
        .map(|t| WeightedIndex::new(t).map_err(dist_err))
        .collect::<Result<Vec<_>>>()?;
    (0..num_docs)
        .map(|_| {
            let eps: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
            let theta: Vec<f64> = (0..k)
                .map(|i| params.prior_mean[i] + (0..=i).map(|j| lower[(i, j)] * eps[j]).sum::<f64>())
                .collect();
            let pi = WeightedIndex::new(softmax(&theta)).map_err(dist_err)?;
            let n = (lengths.sample(&mut rng) as usize).max(2);
            let tokens: Vec<usize> = (0..n).map(|_| topic_index[pi.sample(&mut rng)].sample(&mut rng)).collect();
            Ok(Document::from_tokens(&tokens))
        })
        .collect()
}

/// Task coefficients `θ_m = shared + N(0, task_sd² I)`.
pub fn logistic_coefficients(shared: &[f64], task_sd: f64, num_tasks: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if shared.is_empty() {
        return Err(Error::Input("need at least one coefficient".into()));
    }
    let mut rng = rng(seed);
    let spread = Normal::new(0.0, task_sd).map_err(dist_err)?;
    Ok((0..num_tasks)
        .map(|_| shared.iter().map(|&s| s + spread.sample(&mut rng)).collect())
        .collect())
}

/// `per_task` instances per coefficient vector: covariates standard normal
/// except a trailing constant 1, labels drawn from `σ(θᵀt)`.
pub fn logistic_instances(coefficients: &[Vec<f64>], per_task: usize, seed: u64) -> Vec<Vec<LabeledInstance<f64>>> {
    let mut rng = rng(seed);
    coefficients
        .iter()
        .map(|theta| {
            (0..per_task)
                .map(|_| {
                    let mut t: Vec<f64> = (1..theta.len()).map(|_| rng.sample(StandardNormal)).collect();
                    t.push(1.0);
                    let a: f64 = theta.iter().zip(&t).map(|(x, y)| x * y).sum();
                    let positive = rng.random_bool(sigmoid(a));
                    LabeledInstance::new(t, positive)
                })
                .collect()
        })
        .collect()
}

/// [`logistic_coefficients`] followed by [`logistic_instances`].
pub fn logistic_tasks(shared: &[f64], task_sd: f64, num_tasks: usize, per_task: usize, seed: u64) -> Result<(Vec<Vec<f64>>, Vec<Vec<LabeledInstance<f64>>>)> {
    let coefs = logistic_coefficients(shared, task_sd, num_tasks, seed)?;
    let tasks = logistic_instances(&coefs, per_task, seed.wrapping_add(1));
    Ok((coefs, tasks))
}
