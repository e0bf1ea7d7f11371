//! Bayesian logistic regression and its hierarchical multi-task extension.
//!
//! Labels are observed, so the conjugate factor is degenerate: the expected
//! statistics are the labels themselves and one `q(θ)` update is the whole
//! inference.

use rayon::prelude::*;

use crate::data::LabeledInstance;
use crate::engine::{delta_objective, delta_step, laplace_step, InferenceConfig, InferenceTrace, Method, StepOutcome, TraceRecord};
use crate::error::{Error, Result};
use crate::model::{ExpectedStats, GaussianVariational, ModelContract};
use crate::numerics::{log_sigmoid, sigmoid, spd_factorize, Matrix};
use crate::scalar::{dot, norm2, Real};

/// Floor applied to predictive probabilities before taking logs.
pub const MIN_PREDICTIVE_PROB: f64 = 1e-300;

/// Gaussian prior `N(μ₀, Σ₀)` on the coefficients, with `Σ₀⁻¹` cached.
#[derive(Debug, Clone, PartialEq)]
pub struct BlrPrior<T> {
    mean: Vec<T>,
    cov: Matrix<T>,
    precision: Matrix<T>,
    log_det: T,
}

impl<T: Real> BlrPrior<T> {
    pub fn new(mean: Vec<T>, cov: Matrix<T>) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::Input("prior mean and covariance dimensions differ".into()));
        }
        let chol = spd_factorize(&cov)?;
        Ok(Self {
            mean,
            precision: chol.inverse(),
            log_det: chol.log_det(),
            cov,
        })
    }

    /// `N(0, I)`.
    pub fn standard(dim: usize) -> Self {
        Self::new(vec![T::zero(); dim], Matrix::identity(dim)).expect("identity is positive definite")
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn cov(&self) -> &Matrix<T> {
        &self.cov
    }

    pub fn precision(&self) -> &Matrix<T> {
        &self.precision
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

fn check_dims<T: Real>(theta: &[T], data: &[LabeledInstance<T>], prior: &BlrPrior<T>) -> Result<()> {
    if theta.len() != prior.dim() {
        return Err(Error::Input(format!("coefficients have dimension {}, prior {}", theta.len(), prior.dim())));
    }
    if let Some(n) = data.iter().position(|x| x.dim() != prior.dim()) {
        return Err(Error::Input(format!("instance {n} has {} covariates, expected {}", data[n].dim(), prior.dim())));
    }
    Ok(())
}

/// Value, gradient and Hessian of the log joint
/// `Σ_n [z₁ ln σ(θᵀt_n) + z₂ ln σ(−θᵀt_n)] − ½(θ−μ₀)ᵀΣ₀⁻¹(θ−μ₀)`.
pub fn blr_f<T: Real>(theta: &[T], data: &[LabeledInstance<T>], prior: &BlrPrior<T>) -> Result<(T, Vec<T>, Matrix<T>)> {
    check_dims(theta, data, prior)?;
    let half = T::lit(0.5);
    let centered: Vec<T> = theta.iter().zip(&prior.mean).map(|(&t, &m)| t - m).collect();
    let pull = prior.precision.mul_vec(&centered);
    let mut value = -half * dot(&centered, &pull);
    let mut grad: Vec<T> = pull.iter().map(|&p| -p).collect();
    let mut hess = prior.precision.scale(-T::one());
    for x in data {
        let a = dot(theta, &x.covariates);
        let (z1, z2) = x.indicator();
        value += z1 * log_sigmoid(a) + z2 * log_sigmoid(-a);
        let s = sigmoid(a);
        let resid = z1 - s;
        for (g, &t) in grad.iter_mut().zip(&x.covariates) {
            *g += resid * t;
        }
        hess.add_outer(&x.covariates, -s * sigmoid(-a));
    }
    if !value.is_finite() {
        return Err(Error::NonFinite("logistic regression objective".into()));
    }
    Ok((value, grad, hess))
}

/// `∂/∂θᵢ Tr{∇²f(θ)Σ} = −Σ_n σ_n(1−σ_n)(1−2σ_n)(t_nᵀΣt_n) t_nᵢ` with
/// `σ_n = σ(θᵀt_n)`.
pub fn blr_trace_grad<T: Real>(theta: &[T], sigma: &Matrix<T>, data: &[LabeledInstance<T>]) -> Result<Vec<T>> {
    if sigma.dim() != theta.len() || data.iter().any(|x| x.dim() != theta.len()) {
        return Err(Error::Input("dimension mismatch in logistic regression".into()));
    }
    let two = T::lit(2.0);
    let mut out = vec![T::zero(); theta.len()];
    for x in data {
        let a = dot(theta, &x.covariates);
        let s = sigmoid(a);
        let w = s * sigmoid(-a) * (T::one() - two * s) * sigma.quad_form(&x.covariates);
        for (o, &t) in out.iter_mut().zip(&x.covariates) {
            *o -= w * t;
        }
    }
    Ok(out)
}

/// Logistic regression posterior as an engine model; the data are the
/// labeled instances.
#[derive(Debug, Clone)]
pub struct BlrModel<T> {
    prior: BlrPrior<T>,
}

impl<T: Real> BlrModel<T> {
    pub fn new(prior: BlrPrior<T>) -> Self {
        Self { prior }
    }

    pub fn prior(&self) -> &BlrPrior<T> {
        &self.prior
    }

    /// The observed labels `z_{n,1}` as statistics.
    pub fn label_stats(data: &[LabeledInstance<T>]) -> ExpectedStats<T> {
        ExpectedStats(data.iter().map(|x| x.indicator().0).collect())
    }
}

impl<T: Real> ModelContract<T> for BlrModel<T> {
    type Data = [LabeledInstance<T>];
    type Conjugate = ();

    fn dim(&self) -> usize {
        self.prior.dim()
    }

    fn expected_stats(&self, _q_z: &(), data: &Self::Data) -> Result<ExpectedStats<T>> {
        Ok(Self::label_stats(data))
    }

    fn value_grad(&self, theta: &[T], _stats: &ExpectedStats<T>, data: &Self::Data) -> Result<(T, Vec<T>)> {
        let (v, g, _) = blr_f(theta, data, &self.prior)?;
        Ok((v, g))
    }

    fn hessian(&self, theta: &[T], _stats: &ExpectedStats<T>, data: &Self::Data) -> Result<Matrix<T>> {
        Ok(blr_f(theta, data, &self.prior)?.2)
    }

    fn trace_grad(&self, theta: &[T], sigma: &Matrix<T>, _stats: &ExpectedStats<T>, data: &Self::Data) -> Result<Vec<T>> {
        blr_trace_grad(theta, sigma, data)
    }

    fn conjugate_update(&self, _eta: &[T], _data: &Self::Data) -> Result<()> {
        Ok(())
    }

    fn conjugate_bound(&self, _q_z: &(), _data: &Self::Data) -> Result<T> {
        Ok(T::zero())
    }

    fn log_prior_normalizer(&self) -> T {
        let half = T::lit(0.5);
        -half * self.prior.log_det - half * T::from_usize_lossy(self.dim()) * (T::lit(2.0) * T::PI()).ln()
    }
}

/// A fitted task posterior with its one-record trace.
#[derive(Debug, Clone)]
pub struct BlrFit<T> {
    pub q: GaussianVariational<T>,
    pub jitter: T,
    /// Approximate objective at the returned posterior.
    pub objective: T,
}

impl<T: Real> BlrFit<T> {
    pub fn trace(&self) -> InferenceTrace {
        let mut trace = InferenceTrace::default();
        trace.push(TraceRecord {
            iteration: 1,
            objective: self.objective.as_f64(),
            mean_change: norm2(&self.q.mean).as_f64(),
            seconds: 0.0,
        });
        trace
    }
}

/// One `q(θ)` update from `N(0, I)`.
pub fn blr_fit<T: Real>(data: &[LabeledInstance<T>], prior: &BlrPrior<T>, method: Method, cfg: &InferenceConfig<T>) -> Result<BlrFit<T>> {
    cfg.validate()?;
    let model = BlrModel::new(prior.clone());
    let stats = BlrModel::label_stats(data);
    let init = GaussianVariational::standard(prior.dim());
    let StepOutcome { q, jitter, .. } = match method {
        Method::Laplace => laplace_step(&model, data, &stats, &init.mean, cfg)?,
        Method::Delta => delta_step(&model, data, &stats, &init, cfg)?,
    };
    let objective = delta_objective(&model, data, &stats, &q)? + model.log_prior_normalizer();
    Ok(BlrFit { q, jitter, objective })
}

/// Plug-in log likelihood of one instance at the posterior mean, floored at
/// `ln 1e-300`.
pub fn blr_predict_loglik<T: Real>(q: &GaussianVariational<T>, instance: &LabeledInstance<T>) -> T {
    let a = dot(&q.mean, &instance.covariates);
    let ll = if instance.positive { log_sigmoid(a) } else { log_sigmoid(-a) };
    ll.max(T::lit(MIN_PREDICTIVE_PROB.ln()))
}

/// Predicted label: positive iff `σ(μᵀt) ≥ 0.5`.
pub fn blr_predict_label<T: Real>(q: &GaussianVariational<T>, covariates: &[T]) -> bool {
    sigmoid(dot(&q.mean, covariates)) >= T::lit(0.5)
}

/// Hyperprior of the hierarchical model: `Σ₀⁻¹ ~ Wishart(ν, Φ₀)` and
/// `μ₀ ~ N(0, Φ₁)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HierPrior<T> {
    pub nu: T,
    pub phi0: Matrix<T>,
    pub phi1: Matrix<T>,
}

impl<T: Real> HierPrior<T> {
    /// `ν = p + nu_offset`, `Φ₀ = phi0·I`, `Φ₁ = phi1·I`.
    pub fn scaled(dim: usize, nu_offset: T, phi0: T, phi1: T) -> Result<Self> {
        let prior = Self {
            nu: T::from_usize_lossy(dim) + nu_offset,
            phi0: Matrix::scaled_identity(dim, phi0),
            phi1: Matrix::scaled_identity(dim, phi1),
        };
        prior.validate()?;
        Ok(prior)
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.phi0.dim();
        if self.phi1.dim() != p {
            return Err(Error::Config("Φ₀ and Φ₁ dimensions differ".into()));
        }
        if !(self.nu > T::from_usize_lossy(p) - T::one()) {
            return Err(Error::Config(format!("ν must exceed p − 1 = {}", p as f64 - 1.0)));
        }
        spd_factorize(&self.phi0).map_err(|_| Error::Config("Φ₀ is not positive definite".into()))?;
        spd_factorize(&self.phi1).map_err(|_| Error::Config("Φ₁ is not positive definite".into()))?;
        Ok(())
    }
}

/// MAP update of `(μ₀, Σ₀)` from the task posterior means:
/// `μ₀ = Φ₁(Σ₀/M + Φ₁)⁻¹ m̄` with the current `Σ₀`, then
/// `Σ₀ = (Φ₀⁻¹ + Σ_m (μ_m−μ₀)(μ_m−μ₀)ᵀ) / (M + ν − p − 1)`.
pub fn hblr_hyper_update<T: Real>(task_posteriors: &[GaussianVariational<T>], hier: &HierPrior<T>, current_sigma0: &Matrix<T>) -> Result<(Vec<T>, Matrix<T>)> {
    let m = task_posteriors.len();
    let p = hier.phi0.dim();
    if m == 0 {
        return Err(Error::Input("at least one task posterior is required".into()));
    }
    if task_posteriors.iter().any(|q| q.dim() != p) || current_sigma0.dim() != p {
        return Err(Error::Input("task posteriors and hyperprior dimensions differ".into()));
    }
    let denom = T::from_usize_lossy(m) + hier.nu - T::from_usize_lossy(p) - T::one();
    if !(denom > T::zero()) {
        return Err(Error::Config(format!("M + ν − p − 1 = {} must be positive", denom.as_f64())));
    }
    let mf = T::from_usize_lossy(m);
    let mut avg = vec![T::zero(); p];
    for q in task_posteriors {
        for (a, &x) in avg.iter_mut().zip(&q.mean) {
            *a += x / mf;
        }
    }
    let mut shrink = current_sigma0.scale(mf.recip()).add(&hier.phi1);
    shrink.symmetrize();
    let solved = spd_factorize(&shrink)?.solve(&avg);
    let mu0 = hier.phi1.mul_vec(&solved);

    let mut scatter = spd_factorize(&hier.phi0)?.inverse();
    for q in task_posteriors {
        let d: Vec<T> = q.mean.iter().zip(&mu0).map(|(&a, &b)| a - b).collect();
        scatter.add_outer(&d, T::one());
    }
    let mut sigma0 = scatter.scale(denom.recip());
    sigma0.symmetrize();
    Ok((mu0, sigma0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HblrOptions {
    pub em_iters: usize,
    /// With `false` the hyperparameters stay at their initial values.
    pub update_hyperparameters: bool,
}

impl Default for HblrOptions {
    fn default() -> Self {
        Self {
            em_iters: 20,
            update_hyperparameters: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HblrFit<T> {
    pub tasks: Vec<BlrFit<T>>,
    pub mu0: Vec<T>,
    pub sigma0: Matrix<T>,
    /// One record per EM round: summed task objectives and `‖Δμ₀‖₂`.
    pub trace: InferenceTrace,
}

/// Alternates per-task fits under the current `(μ₀, Σ₀)` with the MAP
/// hyperparameter update, starting from `μ₀ = 0`, `Σ₀ = I`. Stops after
/// `em_iters` rounds or once `‖Δμ₀‖₂ < cfg.conv_tol`.
pub fn hblr_fit_em<T: Real>(tasks: &[Vec<LabeledInstance<T>>], hier: &HierPrior<T>, method: Method, cfg: &InferenceConfig<T>, options: HblrOptions) -> Result<HblrFit<T>> {
    hier.validate()?;
    if tasks.is_empty() || options.em_iters == 0 {
        return Err(Error::Input("need at least one task and one EM round".into()));
    }
    let p = hier.phi0.dim();
    let start = std::time::Instant::now();
    let mut mu0 = vec![T::zero(); p];
    let mut sigma0 = Matrix::identity(p);
    let mut trace = InferenceTrace::default();
    let mut fits = Vec::new();
    for iteration in 1..=options.em_iters {
        let prior = BlrPrior::new(mu0.clone(), sigma0.clone())?;
        fits = tasks
            .par_iter()
            .map(|data| blr_fit(data, &prior, method, cfg))
            .collect::<Result<Vec<_>>>()?;
        let objective: T = fits.iter().map(|f| f.objective).sum();
        let change = if options.update_hyperparameters {
            let posteriors: Vec<_> = fits.iter().map(|f| f.q.clone()).collect();
            let (new_mu0, new_sigma0) = hblr_hyper_update(&posteriors, hier, &sigma0)?;
            let diff: Vec<T> = new_mu0.iter().zip(&mu0).map(|(&a, &b)| a - b).collect();
            mu0 = new_mu0;
            sigma0 = new_sigma0;
            norm2(&diff)
        } else {
            T::zero()
        };
        trace.push(TraceRecord {
            iteration,
            objective: objective.as_f64(),
            mean_change: change.as_f64(),
            seconds: start.elapsed().as_secs_f64(),
        });
        if change < cfg.conv_tol {
            break;
        }
    }
    Ok(HblrFit { tasks: fits, mu0, sigma0, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_gradient, max_relative_error};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn inst(t: &[f64], positive: bool) -> LabeledInstance<f64> {
        LabeledInstance::new(t.to_vec(), positive)
    }

    #[test]
    fn no_data_gives_the_prior() {
        let prior = BlrPrior::new(vec![0.5, -1.0], Matrix::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap()).unwrap();
        let fit = blr_fit(&[], &prior, Method::Laplace, &InferenceConfig::default()).unwrap();
        assert!(max_relative_error(&fit.q.mean, prior.mean()) < 1e-8);
        assert!(fit.q.cov.sub(prior.cov()).max_abs() < 1e-8);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..25 {
            let p = rng.random_range(1..5);
            let data: Vec<_> = (0..rng.random_range(0..15))
                .map(|_| inst(&(0..p).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<_>>(), rng.random_bool(0.5)))
                .collect();
            let prior = BlrPrior::new((0..p).map(|_| rng.random_range(-1.0..1.0)).collect(), Matrix::scaled_identity(p, 2.0)).unwrap();
            let theta: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
            let (_, g, h) = blr_f(&theta, &data, &prior).unwrap();
            let fd = finite_diff_gradient(|x| Ok(blr_f(x, &data, &prior)?.0), &theta, None).unwrap();
            assert!(max_relative_error(&g, &fd) < 1e-5);
            for i in 0..p {
                let row = finite_diff_gradient(|x| Ok(blr_f(x, &data, &prior)?.1[i]), &theta, None).unwrap();
                assert!(max_relative_error(h.row(i), &row) < 1e-4);
            }
            let sigma = Matrix::from_diagonal(&(0..p).map(|_| rng.random_range(0.1..1.0)).collect::<Vec<_>>());
            let tg = blr_trace_grad(&theta, &sigma, &data).unwrap();
            let fd_tr = finite_diff_gradient(|x| Ok(blr_f(x, &data, &prior)?.2.trace_product(&sigma)), &theta, None).unwrap();
            assert!(max_relative_error(&tg, &fd_tr) < 1e-3);
        }
    }

    #[test]
    fn trace_grad_vanishes_at_decision_boundary() {
        let data = [inst(&[1.0, 2.0], true), inst(&[-3.0, 0.5], false)];
        let tg = blr_trace_grad(&[0.0, 0.0], &Matrix::identity(2), &data).unwrap();
        assert_eq!(tg, vec![0.0, 0.0]);
        let tg = blr_trace_grad(&[0.4, 0.1], &Matrix::zeros(2), &data).unwrap();
        assert_eq!(tg, vec![0.0, 0.0]);
    }

    #[test]
    fn symmetric_data_gives_zero_mean() {
        let mut data = Vec::new();
        for t in [[1.0, 0.5], [-0.3, 2.0], [0.7, -1.1]] {
            data.push(inst(&t, true));
            data.push(inst(&t, false));
        }
        for method in [Method::Laplace, Method::Delta] {
            let fit = blr_fit(&data, &BlrPrior::standard(2), method, &InferenceConfig::default()).unwrap();
            assert!(norm2(&fit.q.mean) < 1e-6);
        }
    }

    #[test]
    fn separable_data_stays_finite() {
        let data: Vec<_> = (1..=10).map(|i| inst(&[i as f64], true)).chain((1..=10).map(|i| inst(&[-(i as f64)], false))).collect();
        let prior = BlrPrior::new(vec![0.0], Matrix::scaled_identity(1, 0.5)).unwrap();
        let fit = blr_fit(&data, &prior, Method::Laplace, &InferenceConfig::default()).unwrap();
        assert!(fit.q.mean[0].is_finite() && fit.q.mean[0] > 0.0 && fit.q.mean[0] < 10.0);
        assert_eq!(fit.jitter, 0.0);
    }

    #[test]
    fn predictive_log_likelihood() {
        let q = GaussianVariational::new(vec![0.0], Matrix::identity(1)).unwrap();
        assert!((blr_predict_loglik(&q, &inst(&[3.0], true)) - 0.5f64.ln()).abs() < 1e-15);
        let q = GaussianVariational::new(vec![1e4], Matrix::identity(1)).unwrap();
        assert!(blr_predict_loglik(&q, &inst(&[1.0], true)).abs() < 1e-300);
        assert_eq!(blr_predict_loglik(&q, &inst(&[1.0], false)), 1e-300f64.ln());
        assert!(blr_predict_label(&GaussianVariational::standard(1), &[1.0]));
    }

    #[test]
    fn label_swap_negates_the_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let data: Vec<_> = (0..30)
            .map(|_| inst(&[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 1.0], rng.random_bool(0.3)))
            .collect();
        let flipped: Vec<_> = data.iter().map(LabeledInstance::flipped).collect();
        let prior = BlrPrior::new(vec![0.2, -0.1, 0.4], Matrix::identity(3)).unwrap();
        let negated = BlrPrior::new(vec![-0.2, 0.1, -0.4], Matrix::identity(3)).unwrap();
        let cfg = InferenceConfig::default();
        let a = blr_fit(&data, &prior, Method::Laplace, &cfg).unwrap();
        let b = blr_fit(&flipped, &negated, Method::Laplace, &cfg).unwrap();
        for (x, y) in a.q.mean.iter().zip(&b.q.mean) {
            assert!((x + y).abs() < 1e-8);
        }
        assert!(a.q.cov.trace() <= prior.cov().trace());
    }

    #[test]
    fn hyper_update_limits() {
        let hier = HierPrior::scaled(2, 100.0, 0.01, 1e-12).unwrap();
        let zero = vec![GaussianVariational::standard(2); 3];
        let (mu0, sigma0) = hblr_hyper_update(&zero, &hier, &Matrix::identity(2)).unwrap();
        assert!(norm2(&mu0) < 1e-15);
        spd_factorize(&sigma0).unwrap();
        let one = vec![GaussianVariational::new(vec![2.0, -1.0], Matrix::identity(2)).unwrap()];
        let (mu0, _) = hblr_hyper_update(&one, &hier, &Matrix::identity(2)).unwrap();
        assert!(norm2(&mu0) < 1e-9);
    }

    #[test]
    fn nonpositive_denominator_is_a_config_error() {
        let hier = HierPrior {
            nu: 0.5,
            phi0: Matrix::identity(3),
            phi1: Matrix::identity(3),
        };
        let q = vec![GaussianVariational::standard(3)];
        assert!(matches!(hblr_hyper_update(&q, &hier, &Matrix::identity(3)), Err(Error::Config(_))));
    }

    #[test]
    fn single_task_without_updates_matches_plain_fit() {
        let data = vec![inst(&[1.0, 0.2], true), inst(&[-0.5, 1.0], false), inst(&[0.3, 0.3], true)];
        let hier = HierPrior::scaled(2, 100.0, 0.01, 0.01).unwrap();
        let cfg = InferenceConfig::default();
        let options = HblrOptions {
            em_iters: 1,
            update_hyperparameters: false,
        };
        let h = hblr_fit_em(std::slice::from_ref(&data), &hier, Method::Laplace, &cfg, options).unwrap();
        let plain = blr_fit(&data, &BlrPrior::standard(2), Method::Laplace, &cfg).unwrap();
        assert_eq!(h.tasks[0].q, plain.q);
    }

    #[test]
    fn identical_tasks_share_one_posterior() {
        let data = vec![inst(&[1.0, 0.2], true), inst(&[-0.5, 1.0], false), inst(&[0.3, 0.3], true)];
        let tasks = vec![data; 4];
        let hier = HierPrior::scaled(2, 100.0, 0.01, 0.01).unwrap();
        let fit = hblr_fit_em(&tasks, &hier, Method::Laplace, &InferenceConfig::default(), HblrOptions::default()).unwrap();
        for t in &fit.tasks[1..] {
            assert!(max_relative_error(&t.q.mean, &fit.tasks[0].q.mean) < 1e-6);
        }
    }
}
