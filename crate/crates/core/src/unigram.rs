//! Hierarchical unigram language model.
//!
//! `θ ~ N(0, I)` are log Dirichlet parameters shared by all documents;
//! each document draws `z_d ~ Dir(exp θ)` and then word counts
//! `x_d ~ Mult(z_d)`. The Gaussian prior on `exp θ`'s log is not conjugate to
//! the Dirichlet, which makes this the smallest interesting instance of the
//! engine.

use crate::data::Document;
use crate::engine::{conjugate_step, run_coordinate_ascent, Failure, Fit, InferenceConfig};
use crate::error::{Error, Result};
use crate::model::{ExpectedStats, GaussianVariational, ModelContract};
use crate::numerics::{digamma, log_gamma, tetragamma, trigamma, Matrix};
use crate::scalar::Real;

const EXP_LIMIT: f64 = 700.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnigramModel {
    vocab_size: usize,
}

impl UnigramModel {
    pub fn new(vocab_size: usize) -> Result<Self> {
        if vocab_size < 2 {
            return Err(Error::Input(format!("vocabulary size must be at least 2, got {vocab_size}")));
        }
        Ok(Self { vocab_size })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn check_docs(&self, docs: &[Document]) -> Result<()> {
        for (d, doc) in docs.iter().enumerate() {
            if doc.min_vocab() > self.vocab_size {
                return Err(Error::Input(format!(
                    "document {d} uses term {} but the vocabulary has {} terms",
                    doc.min_vocab() - 1,
                    self.vocab_size
                )));
            }
        }
        Ok(())
    }
}

fn checked_exp<T: Real>(x: T, index: usize) -> Result<T> {
    if !x.is_finite() {
        return Err(Error::NonFinite(format!("component {index} of θ")));
    }
    if x > T::lit(EXP_LIMIT) {
        return Err(Error::Overflow { index, value: x.as_f64() });
    }
    Ok(x.exp())
}

/// `(α, ln Γ(α), αΨ(α), α²Ψ'(α), α³Ψ''(α))` for `α = e^θ`. Below 1 the
/// recurrence `Γ(α+1) = αΓ(α)` keeps the products finite as `α → 0`.
fn scaled_polygammas<T: Real>(theta: T, index: usize) -> Result<[T; 5]> {
    let a = checked_exp(theta, index)?;
    if a >= T::one() {
        return Ok([a, log_gamma(a)?, a * digamma(a)?, a * a * trigamma(a)?, a * a * a * tetragamma(a)?]);
    }
    let b = a + T::one();
    let two = T::lit(2.0);
    Ok([
        a,
        log_gamma(b)? - theta,
        a * digamma(b)? - T::one(),
        a * a * trigamma(b)? + T::one(),
        a * a * a * tetragamma(b)? - two,
    ])
}

fn check_stats<T: Real>(theta: &[T], stats: &ExpectedStats<T>) -> Result<()> {
    if stats.len() != theta.len() {
        return Err(Error::Input(format!(
            "statistics have dimension {} but θ has dimension {}",
            stats.len(),
            theta.len()
        )));
    }
    Ok(())
}

/// Value, gradient and Hessian of
/// `f(θ) = e^θᵀS − D(Σᵢ ln Γ(e^θᵢ) − ln Γ(Σᵢ e^θᵢ)) − ½θᵀθ`
/// where `S = Σ_d E[log z_d]`.
pub fn unigram_f<T: Real>(theta: &[T], stats: &ExpectedStats<T>, num_docs: usize) -> Result<(T, Vec<T>, Matrix<T>)> {
    check_stats(theta, stats)?;
    let n = theta.len();
    let d = T::from_usize_lossy(num_docs);
    let half = T::lit(0.5);
    let parts = theta
        .iter()
        .enumerate()
        .map(|(i, &t)| scaled_polygammas(t, i))
        .collect::<Result<Vec<_>>>()?;
    let total: T = parts.iter().map(|p| p[0]).sum();
    let lg_total = log_gamma(total)?;
    let dg_total = digamma(total)?;
    let tg_total = trigamma(total)?;

    let mut value = d * lg_total;
    let mut grad = Vec::with_capacity(n);
    let mut hess = Matrix::zeros(n);
    for (i, (p, (&t, &s))) in parts.iter().zip(theta.iter().zip(stats.values())).enumerate() {
        let [a, lg, a_dg, a2_tg, _] = *p;
        value += a * s - d * lg - half * t * t;
        grad.push(a * s - d * (a_dg - a * dg_total) - t);
        hess[(i, i)] = a * s - d * (a_dg + a2_tg - a * dg_total) - T::one();
    }
    for i in 0..n {
        for j in 0..n {
            hess[(i, j)] += d * parts[i][0] * parts[j][0] * tg_total;
        }
    }
    if !value.is_finite() {
        return Err(Error::NonFinite("unigram objective".into()));
    }
    Ok((value, grad, hess))
}

/// `∇_θ Tr{∇²f(θ) Σ}` for the unigram `f`.
pub fn unigram_trace_grad<T: Real>(theta: &[T], sigma: &Matrix<T>, stats: &ExpectedStats<T>, num_docs: usize) -> Result<Vec<T>> {
    check_stats(theta, stats)?;
    let d = T::from_usize_lossy(num_docs);
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let parts = theta
        .iter()
        .enumerate()
        .map(|(i, &t)| scaled_polygammas(t, i))
        .collect::<Result<Vec<_>>>()?;
    let alpha: Vec<T> = parts.iter().map(|p| p[0]).collect();
    let total: T = alpha.iter().copied().sum();
    let dg_total = digamma(total)?;
    let tg_total = trigamma(total)?;
    let qg_total = tetragamma(total)?;
    let sigma_alpha = sigma.mul_vec(&alpha);
    let alpha_sigma_alpha: T = alpha.iter().zip(&sigma_alpha).map(|(&a, &b)| a * b).sum();
    let diag_weighted: T = alpha.iter().enumerate().map(|(i, &a)| sigma[(i, i)] * a).sum();

    Ok(parts
        .iter()
        .zip(stats.values())
        .enumerate()
        .map(|(k, (p, &s))| {
            let [a, _, a_dg, a2_tg, a3_qg] = *p;
            let own = a * s - d * (a_dg + three * a2_tg + a3_qg - a * dg_total);
            sigma[(k, k)] * own
                + d * a * tg_total * diag_weighted
                + d * qg_total * a * alpha_sigma_alpha
                + two * d * tg_total * a * sigma_alpha[k]
        })
        .collect())
}

/// `Σ_d [Ψ(φ_d) − Ψ(Σᵢ φ_dᵢ)]`.
pub fn unigram_expected_stats<T: Real>(phis: &[Vec<T>]) -> Result<ExpectedStats<T>> {
    let dim = phis.first().map_or(0, Vec::len);
    let mut out = vec![T::zero(); dim];
    for phi in phis {
        if phi.len() != dim {
            return Err(Error::Input("Dirichlet parameters have inconsistent dimensions".into()));
        }
        let s = crate::model::expected_stats_from_natural(crate::model::ConjugateFamily::Dirichlet, phi)?;
        for (o, v) in out.iter_mut().zip(s.values()) {
            *o += *v;
        }
    }
    Ok(ExpectedStats(out))
}

/// Exact log-normal mean `exp(μ + diag(Σ)/2)`.
pub fn unigram_eta_expectation<T: Real>(q: &GaussianVariational<T>) -> Result<Vec<T>> {
    let half = T::lit(0.5);
    q.mean
        .iter()
        .enumerate()
        .map(|(i, &m)| checked_exp(m + half * q.cov[(i, i)], i))
        .collect()
}

/// `Dir(exp(μ + diag(Σ)/2) + x_d)`.
pub fn unigram_conjugate_update<T: Real>(q: &GaussianVariational<T>, doc: &Document) -> Result<Vec<T>> {
    let mut phi = unigram_eta_expectation(q)?;
    add_counts(&mut phi, doc)?;
    Ok(phi)
}

fn add_counts<T: Real>(phi: &mut [T], doc: &Document) -> Result<()> {
    for &(t, c) in doc.terms() {
        let slot = phi
            .get_mut(t)
            .ok_or_else(|| Error::Input(format!("term index {t} outside the vocabulary")))?;
        *slot += T::lit(c as f64);
    }
    if let Some(i) = phi.iter().position(|&p| !(p > T::zero()) || !p.is_finite()) {
        return Err(Error::Domain {
            function: "dirichlet parameter",
            value: phi[i].as_f64(),
        });
    }
    Ok(())
}

/// `E[log Mult(x | z) + log h(z) − log Dir(z | φ)]` for one document, with
/// `h(z) = Πᵢ zᵢ⁻¹`.
fn doc_bound<T: Real>(phi: &[T], doc: &Document) -> Result<T> {
    let total: T = phi.iter().copied().sum();
    let dg_total = digamma(total)?;
    let mut value = log_gamma(T::lit(doc.total() as f64 + 1.0))? - log_gamma(total)?;
    let mut counts = doc.terms().iter().peekable();
    for (i, &p) in phi.iter().enumerate() {
        let x = match counts.peek() {
            Some(&&(t, c)) if t == i => {
                counts.next();
                value -= log_gamma(T::lit(c as f64 + 1.0))?;
                T::lit(c as f64)
            }
            _ => T::zero(),
        };
        value += (x - p) * (digamma(p)? - dg_total) + log_gamma(p)?;
    }
    Ok(value)
}

impl<T: Real> ModelContract<T> for UnigramModel {
    type Data = [Document];
    type Conjugate = Vec<Vec<T>>;

    fn dim(&self) -> usize {
        self.vocab_size
    }

    fn expected_stats(&self, q_z: &Self::Conjugate, data: &Self::Data) -> Result<ExpectedStats<T>> {
        if q_z.len() != data.len() {
            return Err(Error::Input("one Dirichlet factor per document is required".into()));
        }
        if data.is_empty() {
            return Ok(ExpectedStats(vec![T::zero(); self.vocab_size]));
        }
        unigram_expected_stats(q_z)
    }

    fn value_grad(&self, theta: &[T], stats: &ExpectedStats<T>, data: &Self::Data) -> Result<(T, Vec<T>)> {
        let (v, g, _) = unigram_f(theta, stats, data.len())?;
        Ok((v, g))
    }

    fn hessian(&self, theta: &[T], stats: &ExpectedStats<T>, data: &Self::Data) -> Result<Matrix<T>> {
        Ok(unigram_f(theta, stats, data.len())?.2)
    }

    fn trace_grad(&self, theta: &[T], sigma: &Matrix<T>, stats: &ExpectedStats<T>, data: &Self::Data) -> Result<Vec<T>> {
        unigram_trace_grad(theta, sigma, stats, data.len())
    }

    fn exact_eta_expectation(&self, q: &GaussianVariational<T>, _data: &Self::Data) -> Option<Result<Vec<T>>> {
        Some(unigram_eta_expectation(q))
    }

    fn conjugate_update(&self, eta_expectation: &[T], data: &Self::Data) -> Result<Self::Conjugate> {
        self.check_docs(data)?;
        data.iter()
            .map(|doc| {
                let mut phi = eta_expectation.to_vec();
                add_counts(&mut phi, doc)?;
                Ok(phi)
            })
            .collect()
    }

    fn conjugate_bound(&self, q_z: &Self::Conjugate, data: &Self::Data) -> Result<T> {
        q_z.iter().zip(data).map(|(phi, doc)| doc_bound(phi, doc)).sum()
    }

    fn log_prior_normalizer(&self) -> T {
        -T::lit(0.5) * T::from_usize_lossy(self.vocab_size) * (T::lit(2.0) * T::PI()).ln()
    }
}

/// Runs coordinate ascent from `q(θ) = N(0, I)` and the matching `q(z)`.
pub fn unigram_infer<T: Real>(model: &UnigramModel, docs: &[Document], cfg: &InferenceConfig<T>) -> std::result::Result<Fit<T, Vec<Vec<T>>>, Failure> {
    let init = GaussianVariational::standard(model.vocab_size);
    let q_z = conjugate_step(model, docs, &init).map_err(|error| Failure {
        error,
        trace: Default::default(),
    })?;
    run_coordinate_ascent(model, docs, init, q_z, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{delta_objective, delta_step, laplace_step};
    use crate::numerics::{finite_diff_gradient, max_relative_error};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Beta, Distribution, Normal};

    fn stats(v: &[f64]) -> ExpectedStats<f64> {
        ExpectedStats(v.to_vec())
    }

    #[test]
    fn value_at_origin_is_zero() {
        let (v, _, _) = unigram_f(&[0.0, 0.0], &stats(&[0.0, 0.0]), 1).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn prior_only_objective() {
        let theta = [0.3, -1.2, 2.0];
        let (v, g, h) = unigram_f(&theta, &stats(&[0.0; 3]), 0).unwrap();
        assert!((v + 0.5 * (0.09 + 1.44 + 4.0)).abs() < 1e-12);
        for (gi, ti) in g.iter().zip(&theta) {
            assert!((gi + ti).abs() < 1e-12);
        }
        assert!(h.sub(&Matrix::identity(3).scale(-1.0)).max_abs() < 1e-12);
    }

    #[test]
    fn overflow_is_reported() {
        let err = unigram_f(&[701.0, 0.0], &stats(&[0.0, 0.0]), 1).unwrap_err();
        assert!(matches!(err, Error::Overflow { index: 0, .. }));
    }

    #[test]
    fn very_negative_theta_stays_finite() {
        let theta = [-800.0, 0.5, 0.1];
        let s = stats(&[-5.0, -1.0, -2.0]);
        let (v, g, h) = unigram_f(&theta, &s, 3).unwrap();
        assert!(v.is_finite() && g.iter().all(|x| x.is_finite()) && h.is_finite());
        let tg = unigram_trace_grad(&theta, &Matrix::identity(3), &s, 3).unwrap();
        assert!(tg.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..25 {
            let v = rng.random_range(2..6);
            let d = rng.random_range(0..5);
            let theta: Vec<f64> = (0..v).map(|_| rng.random_range(-2.0..2.0)).collect();
            let s = stats(&(0..v).map(|_| rng.random_range(-8.0..0.0)).collect::<Vec<_>>());
            let (_, g, h) = unigram_f(&theta, &s, d).unwrap();
            let fd = finite_diff_gradient(|x| Ok(unigram_f(x, &s, d)?.0), &theta, None).unwrap();
            assert!(max_relative_error(&g, &fd) < 1e-5);
            for i in 0..v {
                let fd_row = finite_diff_gradient(|x| Ok(unigram_f(x, &s, d)?.1[i]), &theta, None).unwrap();
                assert!(max_relative_error(h.row(i), &fd_row) < 1e-4);
            }
            let mut b = Matrix::zeros(v);
            for i in 0..v {
                for j in 0..v {
                    b[(i, j)] = rng.random_range(-0.5..0.5);
                }
            }
            let mut sigma = b.mul_mat(&b.transpose());
            sigma.add_diagonal(0.1);
            let tg = unigram_trace_grad(&theta, &sigma, &s, d).unwrap();
            let fd_tr = finite_diff_gradient(|x| Ok(unigram_f(x, &s, d)?.2.trace_product(&sigma)), &theta, None).unwrap();
            assert!(max_relative_error(&tg, &fd_tr) < 1e-3, "{tg:?} vs {fd_tr:?}");
        }
    }

    #[test]
    fn expected_stats_examples() {
        let one = unigram_expected_stats(&[vec![1.0f64, 1.0]]).unwrap();
        assert!(one.values().iter().all(|v| (v + 1.0).abs() < 1e-12));
        let two = unigram_expected_stats(&[vec![1.0f64, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(two.values().iter().all(|v| (v + 2.0).abs() < 1e-12));
        assert!(unigram_expected_stats(&[vec![1.0, 0.0]]).is_err());
    }

    #[test]
    fn expected_log_matches_beta_monte_carlo() {
        let got = unigram_expected_stats(&[vec![10.0f64, 10.0]]).unwrap();
        let beta = Beta::new(10.0f64, 10.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let mc = (0..n).map(|_| beta.sample(&mut rng).ln()).sum::<f64>() / n as f64;
        assert!((got.values()[0] - mc).abs() < 1e-3, "{} vs {mc}", got.values()[0]);
    }

    #[test]
    fn eta_expectation_examples() {
        let e = unigram_eta_expectation(&GaussianVariational::<f64>::standard(3)).unwrap();
        assert!(e.iter().all(|v| (v - 1.6487212707001282).abs() < 1e-15));
        let tiny = GaussianVariational::new(vec![0.2, -0.4], Matrix::scaled_identity(2, 1e-14)).unwrap();
        let e = unigram_eta_expectation(&tiny).unwrap();
        assert!((e[0] - 0.2f64.exp()).abs() < 1e-12 && (e[1] - (-0.4f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn eta_expectation_matches_log_normal_monte_carlo() {
        let q = GaussianVariational::new(vec![0.3f64, -0.5], Matrix::from_rows(&[vec![0.4, 0.1], vec![0.1, 0.2]]).unwrap()).unwrap();
        let exact = unigram_eta_expectation(&q).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let l = crate::numerics::spd_factorize(&q.cov).unwrap().lower().clone();
        let n = 1_000_000;
        let mut acc = [0.0; 2];
        for _ in 0..n {
            let e = [normal.sample(&mut rng), normal.sample(&mut rng)];
            let x0 = q.mean[0] + l[(0, 0)] * e[0];
            let x1 = q.mean[1] + l[(1, 0)] * e[0] + l[(1, 1)] * e[1];
            acc[0] += x0.exp();
            acc[1] += x1.exp();
        }
        for i in 0..2 {
            let mc = acc[i] / n as f64;
            assert!((exact[i] - mc).abs() / exact[i] < 0.01);
        }
    }

    #[test]
    fn conjugate_update_examples() {
        let q = GaussianVariational::<f64>::standard(3);
        let e = 0.5f64.exp();
        let phi = unigram_conjugate_update(&q, &Document::from_dense(&[2, 0, 1])).unwrap();
        assert_eq!(phi, vec![e + 2.0, e, e + 1.0]);
        let phi = unigram_conjugate_update(&q, &Document::default()).unwrap();
        assert_eq!(phi, vec![e; 3]);
    }

    #[test]
    fn symmetric_two_term_document() {
        let model = UnigramModel::new(2).unwrap();
        let docs = [Document::from_dense(&[5, 5])];
        let fit = unigram_infer(&model, &docs, &InferenceConfig::<f64>::default()).unwrap();
        assert!(fit.converged);
        assert!((fit.q_theta.mean[0] - fit.q_theta.mean[1]).abs() < 1e-6);
    }

    /// Maximizes `f` over `[-3, 3]³` on successively finer grids, ending at
    /// step 1e-3.
    fn grid_argmax(s: &ExpectedStats<f64>, d: usize) -> Vec<f64> {
        let f = |x: &[f64]| unigram_f(x, s, d).map(|r| r.0).unwrap_or(f64::NEG_INFINITY);
        let mut center = vec![0.0; 3];
        let mut half_width = 3.0f64;
        for step in [0.1f64, 1e-2, 1e-3] {
            let n = (half_width / step).round() as i64;
            let mut best = (f64::NEG_INFINITY, center.clone());
            for i in -n..=n {
                for j in -n..=n {
                    for k in -n..=n {
                        let x = [
                            (center[0] + i as f64 * step).clamp(-3.0, 3.0),
                            (center[1] + j as f64 * step).clamp(-3.0, 3.0),
                            (center[2] + k as f64 * step).clamp(-3.0, 3.0),
                        ];
                        let v = f(&x);
                        if v > best.0 {
                            best = (v, x.to_vec());
                        }
                    }
                }
            }
            center = best.1;
            half_width = step * 2.0;
        }
        center
    }

    #[test]
    fn laplace_matches_grid_search() {
        let model = UnigramModel::new(3).unwrap();
        let docs = [Document::from_dense(&[3, 1, 0]), Document::from_dense(&[2, 2, 1])];
        let phis = vec![vec![4.0, 2.0, 1.0], vec![3.0, 3.0, 2.0]];
        let s = unigram_expected_stats(&phis).unwrap();
        let out = laplace_step(&model, &docs[..], &s, &[0.0; 3], &InferenceConfig::default()).unwrap();
        let grid = grid_argmax(&s, 2);
        for (m, g) in out.q.mean.iter().zip(&grid) {
            assert!((m - g).abs() < 2e-3, "{:?} vs {grid:?}", out.q.mean);
        }
    }

    #[test]
    fn delta_objective_beats_laplace_point() {
        let model = UnigramModel::new(3).unwrap();
        let docs = [Document::from_dense(&[3, 1, 0]), Document::from_dense(&[2, 2, 1])];
        let s = unigram_expected_stats(&[vec![4.0, 2.0, 1.0], vec![3.0, 3.0, 2.0]]).unwrap();
        let cfg = InferenceConfig::default();
        let lap = laplace_step(&model, &docs[..], &s, &[0.0; 3], &cfg).unwrap();
        let del = delta_step(&model, &docs[..], &s, &GaussianVariational::standard(3), &cfg).unwrap();
        let at_lap = delta_objective(&model, &docs[..], &s, &lap.q).unwrap();
        let at_del = delta_objective(&model, &docs[..], &s, &del.q).unwrap();
        assert!(at_del >= at_lap - 1e-10, "{at_del} < {at_lap}");
    }
}
