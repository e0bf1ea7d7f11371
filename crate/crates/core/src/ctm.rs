//! Correlated topic model.
//!
//! Per document, log topic proportions `θ ~ N(μ₀, Σ₀)`, topic assignments
//! `z_n ~ Mult(softmax θ)` and words `x_n ~ Mult(β_{z_n})`. Inference over
//! `θ` uses the engine; `(β, μ₀, Σ₀)` are fitted by variational EM.
//!
//! Tokens sharing a term index share one assignment distribution, weighted
//! by the term's count.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use crate::data::Document;
use crate::engine::{conjugate_step, run_coordinate_ascent, Failure, InferenceConfig, InferenceTrace, TraceRecord};
use crate::error::{Error, Result};
use crate::model::{ExpectedStats, GaussianVariational, ModelContract};
use crate::numerics::{log_sum_exp, softmax, spd_factorize, Matrix};
use crate::scalar::{norm2, Real};

/// Smoothing added to every topic-word accumulator in the M-step.
pub const TOPIC_SMOOTHING: f64 = 1e-8;
/// Ridge added to the fitted prior covariance.
pub const PRIOR_COV_RIDGE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct CtmParams<T> {
    /// `K` rows, each a distribution over the `V` terms.
    pub topics: Vec<Vec<T>>,
    pub prior_mean: Vec<T>,
    pub prior_cov: Matrix<T>,
}

impl<T: Real> CtmParams<T> {
    pub fn new(topics: Vec<Vec<T>>, prior_mean: Vec<T>, prior_cov: Matrix<T>) -> Result<Self> {
        let k = topics.len();
        if k == 0 {
            return Err(Error::Input("at least one topic is required".into()));
        }
        let v = topics[0].len();
        if v == 0 || topics.iter().any(|t| t.len() != v) {
            return Err(Error::Input("topics must be nonempty and share one vocabulary size".into()));
        }
        for (i, t) in topics.iter().enumerate() {
            let sum: T = t.iter().copied().sum();
            if t.iter().any(|&p| !(p >= T::zero()) || !p.is_finite()) || (sum - T::one()).abs() > T::lit(1e-9) {
                return Err(Error::Input(format!("topic {i} is not a probability distribution")));
            }
        }
        if prior_mean.len() != k || prior_cov.dim() != k {
            return Err(Error::Input(format!("prior must have dimension {k}")));
        }
        spd_factorize(&prior_cov)?;
        Ok(Self {
            topics,
            prior_mean,
            prior_cov,
        })
    }

    pub fn num_topics(&self) -> usize {
        self.topics.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.topics[0].len()
    }
}

/// [`CtmParams`] with the prior precision and log topics precomputed.
#[derive(Debug, Clone)]
pub struct CtmModel<T> {
    params: CtmParams<T>,
    prior_precision: Matrix<T>,
    prior_log_det: T,
    /// `V × K`: row `w` holds `log β_kw` over topics.
    log_topics_by_term: Vec<Vec<T>>,
}

impl<T: Real> CtmModel<T> {
    pub fn new(params: CtmParams<T>) -> Result<Self> {
        let chol = spd_factorize(&params.prior_cov)?;
        let k = params.num_topics();
        let log_topics_by_term = (0..params.vocab_size())
            .map(|w| (0..k).map(|t| params.topics[t][w].ln()).collect())
            .collect();
        Ok(Self {
            prior_precision: chol.inverse(),
            prior_log_det: chol.log_det(),
            params,
            log_topics_by_term,
        })
    }

    pub fn params(&self) -> &CtmParams<T> {
        &self.params
    }

    pub fn prior_precision(&self) -> &Matrix<T> {
        &self.prior_precision
    }

    fn check_doc(&self, doc: &Document) -> Result<()> {
        if doc.min_vocab() > self.params.vocab_size() {
            return Err(Error::Input(format!(
                "term index {} outside the vocabulary of {} terms",
                doc.min_vocab() - 1,
                self.params.vocab_size()
            )));
        }
        Ok(())
    }
}

/// Value, gradient and Hessian of
/// `f(θ) = θᵀs − N log Σ_k e^{θ_k} − ½(θ−μ₀)ᵀΣ₀⁻¹(θ−μ₀)`, where `s` holds
/// the expected topic counts and `N = Σ_k s_k`.
pub fn ctm_f<T: Real>(theta: &[T], stats: &ExpectedStats<T>, prior_mean: &[T], prior_precision: &Matrix<T>) -> Result<(T, Vec<T>, Matrix<T>)> {
    let k = theta.len();
    if stats.len() != k || prior_mean.len() != k || prior_precision.dim() != k {
        return Err(Error::Input("dimension mismatch in topic proportions".into()));
    }
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::Input("non-finite log topic proportions".into()));
    }
    let half = T::lit(0.5);
    let n: T = stats.values().iter().copied().sum();
    let lse = log_sum_exp(theta);
    let pi = softmax(theta);
    let centered: Vec<T> = theta.iter().zip(prior_mean).map(|(&t, &m)| t - m).collect();
    let pull = prior_precision.mul_vec(&centered);
    let value = crate::scalar::dot(theta, stats.values()) - n * lse - half * crate::scalar::dot(&centered, &pull);
    let grad = (0..k).map(|i| stats.values()[i] - n * pi[i] - pull[i]).collect();
    let mut hess = prior_precision.scale(-T::one());
    hess.add_outer(&pi, n);
    for i in 0..k {
        hess[(i, i)] -= n * pi[i];
    }
    Ok((value, grad, hess))
}

/// `∇_θ Tr{∇²f(θ) Σ}` for the topic-proportion `f`:
/// `N · J (2Σπ − diag Σ)` with `J = diag(π) − ππᵀ`.
pub fn ctm_trace_grad<T: Real>(theta: &[T], sigma: &Matrix<T>, stats: &ExpectedStats<T>) -> Result<Vec<T>> {
    if sigma.dim() != theta.len() || stats.len() != theta.len() {
        return Err(Error::Input("dimension mismatch in topic proportions".into()));
    }
    let n: T = stats.values().iter().copied().sum();
    let pi = softmax(theta);
    let two = T::lit(2.0);
    let sigma_pi = sigma.mul_vec(&pi);
    let v: Vec<T> = (0..pi.len()).map(|i| two * sigma_pi[i] - sigma[(i, i)]).collect();
    let pi_v = crate::scalar::dot(&pi, &v);
    Ok(pi.iter().zip(&v).map(|(&p, &vi)| n * p * (vi - pi_v)).collect())
}

/// Per-term topic responsibilities for one document, aligned with
/// [`Document::terms`].
pub type WordTopics<T> = Vec<Vec<T>>;

impl<T: Real> ModelContract<T> for CtmModel<T> {
    type Data = Document;
    type Conjugate = WordTopics<T>;

    fn dim(&self) -> usize {
        self.params.num_topics()
    }

    fn expected_stats(&self, q_z: &Self::Conjugate, data: &Document) -> Result<ExpectedStats<T>> {
        if q_z.len() != data.num_unique() {
            return Err(Error::Input("one topic distribution per distinct term is required".into()));
        }
        let mut s = vec![T::zero(); self.dim()];
        for (phi, &(_, c)) in q_z.iter().zip(data.terms()) {
            let c = T::lit(c as f64);
            for (sk, &p) in s.iter_mut().zip(phi) {
                *sk += c * p;
            }
        }
        Ok(ExpectedStats(s))
    }

    fn value_grad(&self, theta: &[T], stats: &ExpectedStats<T>, _data: &Document) -> Result<(T, Vec<T>)> {
        let (v, g, _) = ctm_f(theta, stats, &self.params.prior_mean, &self.prior_precision)?;
        Ok((v, g))
    }

    fn hessian(&self, theta: &[T], stats: &ExpectedStats<T>, _data: &Document) -> Result<Matrix<T>> {
        Ok(ctm_f(theta, stats, &self.params.prior_mean, &self.prior_precision)?.2)
    }

    fn trace_grad(&self, theta: &[T], sigma: &Matrix<T>, stats: &ExpectedStats<T>, _data: &Document) -> Result<Vec<T>> {
        ctm_trace_grad(theta, sigma, stats)
    }

    fn eta_with_hessians(&self, theta: &[T], _data: &Document) -> Result<(Vec<T>, Vec<Matrix<T>>)> {
        let lse = log_sum_exp(theta);
        let pi = softmax(theta);
        let mut h = Matrix::from_diagonal(&pi).scale(-T::one());
        h.add_outer(&pi, T::one());
        let eta = theta.iter().map(|&t| t - lse).collect();
        Ok((eta, vec![h; theta.len()]))
    }

    fn conjugate_update(&self, eta_expectation: &[T], data: &Document) -> Result<Self::Conjugate> {
        self.check_doc(data)?;
        if eta_expectation.iter().any(|e| !e.is_finite()) {
            return Err(Error::NonFinite("expected topic log proportions".into()));
        }
        Ok(data
            .terms()
            .iter()
            .map(|&(w, _)| {
                let logits: Vec<T> = eta_expectation
                    .iter()
                    .zip(&self.log_topics_by_term[w])
                    .map(|(&e, &lb)| e + lb)
                    .collect();
                softmax(&logits)
            })
            .collect())
    }

    fn conjugate_bound(&self, q_z: &Self::Conjugate, data: &Document) -> Result<T> {
        let mut total = T::zero();
        for (phi, &(w, c)) in q_z.iter().zip(data.terms()) {
            let mut term = T::zero();
            for (&p, &lb) in phi.iter().zip(&self.log_topics_by_term[w]) {
                if p > T::zero() {
                    term += p * (lb - p.ln());
                }
            }
            total += T::lit(c as f64) * term;
        }
        Ok(total)
    }

    fn log_prior_normalizer(&self) -> T {
        let half = T::lit(0.5);
        -half * self.prior_log_det - half * T::from_usize_lossy(self.dim()) * (T::lit(2.0) * T::PI()).ln()
    }

    fn diagonal_delta_covariance(&self) -> bool {
        true
    }
}

/// Variational posterior for one document.
#[derive(Debug, Clone)]
pub struct CtmDocState<T> {
    pub q_theta: GaussianVariational<T>,
    /// Topic distribution per distinct term (empty for an empty document).
    pub word_topics: WordTopics<T>,
    pub trace: InferenceTrace,
    pub converged: bool,
}

/// Infers `q(θ) q(z)` for one document, starting from `q(θ) = N(0, I)`.
/// An empty document gets the prior.
pub fn ctm_infer_doc<T: Real>(model: &CtmModel<T>, doc: &Document, cfg: &InferenceConfig<T>) -> std::result::Result<CtmDocState<T>, Failure> {
    let fail = |error| Failure {
        error,
        trace: InferenceTrace::default(),
    };
    model.check_doc(doc).map_err(fail)?;
    if doc.is_empty() {
        return Ok(CtmDocState {
            q_theta: GaussianVariational {
                mean: model.params.prior_mean.clone(),
                cov: model.params.prior_cov.clone(),
            },
            word_topics: Vec::new(),
            trace: InferenceTrace::default(),
            converged: true,
        });
    }
    let init = GaussianVariational::standard(model.dim());
    let q_z = conjugate_step(model, doc, &init).map_err(fail)?;
    let fit = run_coordinate_ascent(model, doc, init, q_z, cfg)?;
    Ok(CtmDocState {
        q_theta: fit.q_theta,
        word_topics: fit.q_z,
        trace: fit.trace,
        converged: fit.converged,
    })
}

/// `p(w) ≈ Σ_k β_kw π_k` with `π = softmax(E[θ])`.
pub fn ctm_predictive<T: Real>(params: &CtmParams<T>, q_theta: &GaussianVariational<T>) -> Vec<T> {
    let pi = softmax(&q_theta.mean);
    let mut p = vec![T::zero(); params.vocab_size()];
    for (topic, &weight) in params.topics.iter().zip(&pi) {
        for (pw, &b) in p.iter_mut().zip(topic) {
            *pw += weight * b;
        }
    }
    p
}

/// One variational EM run.
#[derive(Debug, Clone)]
pub struct CtmEmFit<T> {
    pub params: CtmParams<T>,
    /// One record per EM iteration: the summed approximate objective after
    /// the E-step, and the change in `μ₀` made by the following M-step.
    pub trace: InferenceTrace,
    /// Number of tokens in the non-empty documents.
    pub num_words: u64,
}

impl<T> CtmEmFit<T> {
    /// Summed bounds divided by the number of tokens.
    pub fn per_word_bounds(&self) -> Vec<f64> {
        self.trace.records.iter().map(|r| r.objective / self.num_words as f64).collect()
    }
}

/// Seeded initial parameters: topics drawn from a uniform Dirichlet,
/// `μ₀ = 0`, `Σ₀ = I`.
pub fn ctm_initial_params<T: Real>(num_topics: usize, vocab_size: usize, seed: u64) -> Result<CtmParams<T>> {
    if num_topics == 0 || vocab_size < 2 {
        return Err(Error::Input("need at least one topic and two terms".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Normalized unit-exponential draws are uniform on the simplex.
    let topics = (0..num_topics)
        .map(|_| {
            let draw: Vec<f64> = (0..vocab_size).map(|_| Exp1.sample(&mut rng)).collect();
            let total: f64 = draw.iter().sum();
            normalize_topic(draw.iter().map(|&g| T::lit(g / total) + T::lit(TOPIC_SMOOTHING)).collect())
        })
        .collect();
    CtmParams::new(topics, vec![T::zero(); num_topics], Matrix::identity(num_topics))
}

fn normalize_topic<T: Real>(mut row: Vec<T>) -> Vec<T> {
    let total: T = row.iter().copied().sum();
    for p in &mut row {
        *p /= total;
    }
    row
}

/// Runs every non-empty document's E-step in parallel, keeping corpus order.
pub fn ctm_e_step<T: Real>(model: &CtmModel<T>, corpus: &[Document], cfg: &InferenceConfig<T>) -> Result<Vec<Option<CtmDocState<T>>>> {
    corpus
        .par_iter()
        .map(|doc| {
            if doc.is_empty() {
                Ok(None)
            } else {
                ctm_infer_doc(model, doc, cfg).map(Some).map_err(Error::from)
            }
        })
        .collect()
}

fn m_step<T: Real>(corpus: &[Document], states: &[Option<CtmDocState<T>>], num_topics: usize, vocab_size: usize) -> Result<CtmParams<T>> {
    let smoothing = T::lit(TOPIC_SMOOTHING);
    let mut counts = vec![vec![smoothing; vocab_size]; num_topics];
    let mut mean = vec![T::zero(); num_topics];
    let mut used = 0usize;
    for (doc, state) in corpus.iter().zip(states) {
        let Some(state) = state else { continue };
        used += 1;
        for (phi, &(w, c)) in state.word_topics.iter().zip(doc.terms()) {
            let c = T::lit(c as f64);
            for (k, &p) in phi.iter().enumerate() {
                counts[k][w] += c * p;
            }
        }
        for (m, &x) in mean.iter_mut().zip(&state.q_theta.mean) {
            *m += x;
        }
    }
    let d = T::from_usize_lossy(used);
    for m in &mut mean {
        *m /= d;
    }
    let mut cov = Matrix::zeros(num_topics);
    for state in states.iter().flatten() {
        cov = cov.add(&state.q_theta.cov);
        let diff: Vec<T> = state.q_theta.mean.iter().zip(&mean).map(|(&a, &b)| a - b).collect();
        cov.add_outer(&diff, T::one());
    }
    let mut cov = cov.scale(d.recip());
    cov.add_diagonal(T::lit(PRIOR_COV_RIDGE));
    cov.symmetrize();
    CtmParams::new(counts.into_iter().map(normalize_topic).collect(), mean, cov)
}

fn check_corpus(corpus: &[Document], num_topics: usize, vocab_size: usize) -> Result<u64> {
    if let Some(doc) = corpus.iter().find(|d| d.min_vocab() > vocab_size) {
        return Err(Error::Input(format!("term index {} outside the vocabulary", doc.min_vocab() - 1)));
    }
    let num_words: u64 = corpus.iter().map(Document::total).sum();
    if num_words == 0 {
        return Err(Error::Input("corpus has no words".into()));
    }
    if num_topics as u64 > num_words {
        return Err(Error::Input(format!("{num_topics} topics requested but the corpus has only {num_words} tokens")));
    }
    Ok(num_words)
}

/// Variational EM from the given starting parameters.
pub fn ctm_em_fit_from<T: Real>(corpus: &[Document], init: CtmParams<T>, cfg: &InferenceConfig<T>, em_iters: usize) -> Result<CtmEmFit<T>> {
    cfg.validate()?;
    let (k, v) = (init.num_topics(), init.vocab_size());
    let num_words = check_corpus(corpus, k, v)?;
    let start = Instant::now();
    let mut params = init;
    let mut trace = InferenceTrace::default();
    for iteration in 1..=em_iters {
        let model = CtmModel::new(params.clone())?;
        let states = ctm_e_step(&model, corpus, cfg)?;
        let mut bound = T::zero();
        for state in states.iter().flatten() {
            bound += T::lit(state.trace.last_objective().unwrap_or(0.0));
        }
        let next = m_step(corpus, &states, k, v)?;
        let shift: Vec<T> = next.prior_mean.iter().zip(&params.prior_mean).map(|(&a, &b)| a - b).collect();
        trace.push(TraceRecord {
            iteration,
            objective: bound.as_f64(),
            mean_change: norm2(&shift).as_f64(),
            seconds: start.elapsed().as_secs_f64(),
        });
        params = next;
    }
    Ok(CtmEmFit { params, trace, num_words })
}

/// Variational EM from seeded uniform-Dirichlet topics.
pub fn ctm_em_fit<T: Real>(corpus: &[Document], num_topics: usize, vocab_size: usize, cfg: &InferenceConfig<T>, em_iters: usize, seed: u64) -> Result<CtmEmFit<T>> {
    check_corpus(corpus, num_topics, vocab_size)?;
    let init = ctm_initial_params(num_topics, vocab_size, seed)?;
    ctm_em_fit_from(corpus, init, cfg, em_iters)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Method;
    use crate::numerics::{finite_diff_gradient, max_relative_error};
    use rand::Rng;

    fn uniform_params(k: usize, v: usize) -> CtmParams<f64> {
        CtmParams::new(vec![vec![1.0 / v as f64; v]; k], vec![0.0; k], Matrix::identity(k)).unwrap()
    }

    #[test]
    fn softmax_symmetry() {
        let p = softmax(&[0.0f64, 0.0]);
        assert_eq!(p, vec![0.5, 0.5]);
    }

    #[test]
    fn prior_only_objective() {
        let prec = Matrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let (_, g, h) = ctm_f(&[0.0, 0.0], &ExpectedStats(vec![0.0, 0.0]), &[0.0, 0.0], &prec).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
        assert!(h.add(&prec).max_abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..25 {
            let k = rng.random_range(2..6);
            let theta: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mu0: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
            let s = ExpectedStats((0..k).map(|_| rng.random_range(0.0..20.0)).collect::<Vec<_>>());
            let mut b = Matrix::zeros(k);
            for i in 0..k {
                for j in 0..k {
                    b[(i, j)] = rng.random_range(-1.0..1.0);
                }
            }
            let mut prec = b.mul_mat(&b.transpose());
            prec.add_diagonal(1.0);
            let f = |x: &[f64]| ctm_f(x, &s, &mu0, &prec);
            let (_, g, h) = f(&theta).unwrap();
            let fd = finite_diff_gradient(|x| Ok(f(x)?.0), &theta, None).unwrap();
            assert!(max_relative_error(&g, &fd) < 1e-5);
            for i in 0..k {
                let fd_row = finite_diff_gradient(|x| Ok(f(x)?.1[i]), &theta, None).unwrap();
                assert!(max_relative_error(h.row(i), &fd_row) < 1e-4);
            }
            let sigma_diag: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..2.0)).collect();
            let sigma = Matrix::from_diagonal(&sigma_diag);
            let tg = ctm_trace_grad(&theta, &sigma, &s).unwrap();
            let fd_tr = finite_diff_gradient(|x| Ok(f(x)?.2.trace_product(&sigma)), &theta, None).unwrap();
            assert!(max_relative_error(&tg, &fd_tr) < 1e-3);
        }
    }

    #[test]
    fn trace_grad_limits() {
        let s = ExpectedStats(vec![3.0, 1.0, 2.0]);
        let zero = ctm_trace_grad(&[0.3, -0.2, 1.0], &Matrix::zeros(3), &s).unwrap();
        assert!(zero.iter().all(|&x| x == 0.0));
        let sym = ctm_trace_grad(&[0.0f64; 3], &Matrix::scaled_identity(3, 0.7), &s).unwrap();
        assert!(sym.iter().all(|&x| (x - sym[0]).abs() < 1e-15));
    }

    #[test]
    fn single_word_with_equal_topic_columns_is_split_evenly() {
        let params = CtmParams::new(vec![vec![0.5, 0.25, 0.25], vec![0.5, 0.1, 0.4]], vec![0.0; 2], Matrix::identity(2)).unwrap();
        let model: CtmModel<f64> = CtmModel::new(params).unwrap();
        let doc = Document::from_dense(&[1, 0, 0]);
        for method in [Method::Laplace, Method::Delta] {
            let state = ctm_infer_doc(&model, &doc, &InferenceConfig::with_method(method)).unwrap();
            assert!((state.word_topics[0][0] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_document_returns_prior() {
        let model = CtmModel::new(uniform_params(3, 4)).unwrap();
        let state = ctm_infer_doc(&model, &Document::default(), &InferenceConfig::default()).unwrap();
        assert_eq!(state.q_theta.mean, vec![0.0; 3]);
        assert!(state.word_topics.is_empty() && state.trace.is_empty());
    }

    #[test]
    fn dominant_topic_is_recovered() {
        let k = 4;
        let v = 12;
        let topics = (0..k)
            .map(|t| normalize_topic((0..v).map(|w| if w / 3 == t { 1.0 } else { 1e-6 }).collect()))
            .collect();
        let model: CtmModel<f64> = CtmModel::new(CtmParams::new(topics, vec![0.0; k], Matrix::identity(k)).unwrap()).unwrap();
        let doc = Document::from_dense(&[0, 0, 0, 0, 0, 0, 3, 4, 2, 0, 0, 0]);
        for method in [Method::Laplace, Method::Delta] {
            let state = ctm_infer_doc(&model, &doc, &InferenceConfig::with_method(method)).unwrap();
            let best = (0..k).max_by(|&a, &b| state.q_theta.mean[a].total_cmp(&state.q_theta.mean[b])).unwrap();
            assert_eq!(best, 2);
            for phi in &state.word_topics {
                assert!((phi.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn delta_path_keeps_covariance_diagonal() {
        let model = CtmModel::new(ctm_initial_params::<f64>(3, 6, 1).unwrap()).unwrap();
        let doc = Document::from_dense(&[2, 1, 0, 3, 1, 1]);
        let state = ctm_infer_doc(&model, &doc, &InferenceConfig::with_method(Method::Delta)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!(state.q_theta.cov[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn predictive_examples() {
        let params = ctm_initial_params::<f64>(3, 5, 9).unwrap();
        let q = GaussianVariational::standard(3);
        let p = ctm_predictive(&params, &q);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (w, &pw) in p.iter().enumerate() {
            let mix = params.topics.iter().map(|t| t[w]).sum::<f64>() / 3.0;
            assert!((pw - mix).abs() < 1e-15);
        }
        let peaked = GaussianVariational::new(vec![60.0, 0.0, 0.0], Matrix::identity(3)).unwrap();
        let p = ctm_predictive(&params, &peaked);
        assert!(max_relative_error(&p, &params.topics[0]) < 1e-12);
        let shifted = GaussianVariational::new(vec![60.0 + 3.5, 3.5, 3.5], Matrix::identity(3)).unwrap();
        assert!(max_relative_error(&ctm_predictive(&params, &shifted), &p) < 1e-12);

        let single = ctm_initial_params::<f64>(1, 5, 9).unwrap();
        assert_eq!(ctm_predictive(&single, &GaussianVariational::standard(1)), single.topics[0]);
    }

    #[test]
    fn identical_one_word_documents_collapse_topics() {
        let corpus = vec![Document::from_dense(&[0, 0, 1, 0]); 6];
        for k in [1, 2] {
            let fit = ctm_em_fit(&corpus, k, 4, &InferenceConfig::<f64>::default(), 5, 3).unwrap();
            for topic in &fit.params.topics {
                assert!(topic[2] > 1.0 - 1e-6, "{topic:?}");
            }
        }
    }

    #[test]
    fn too_many_topics_is_an_input_error() {
        let corpus = vec![Document::from_dense(&[1, 1, 0])];
        assert!(matches!(ctm_em_fit(&corpus, 3, 3, &InferenceConfig::<f64>::default(), 1, 0), Err(Error::Input(_))));
        assert!(matches!(ctm_em_fit(&[Document::default()], 1, 3, &InferenceConfig::<f64>::default(), 1, 0), Err(Error::Input(_))));
    }
}
