//! Coordinate-ascent variational inference for nonconjugate models.
//!
//! Each outer iteration computes `E_q(z)[t(z)]`, updates `q(θ)` with either a
//! Laplace step or a delta-method step, forms `E_q(θ)[η(θ)]` (exactly when
//! the model can, otherwise by a second-order Taylor expansion), and updates
//! `q(z)`. Convergence is declared when the variational mean moves less
//! than `conv_tol` in L2 norm.

use std::fmt::Write as _;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::model::{ExpectedStats, GaussianVariational, ModelContract};
use crate::numerics::{spd_factorize, Matrix};
use crate::optim::{maximize, OptimizerConfig};
use crate::scalar::{norm2, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Laplace,
    Delta,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "laplace" => Ok(Method::Laplace),
            "delta" => Ok(Method::Delta),
            other => Err(Error::Config(format!("unknown method '{other}' (expected laplace or delta)"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Laplace => "laplace",
            Method::Delta => "delta",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceConfig<T> {
    pub method: Method,
    /// Threshold on `‖μ⁽ᵗ⁾ − μ⁽ᵗ⁻¹⁾‖₂`.
    pub conv_tol: T,
    pub max_outer_iters: usize,
    pub jitter_init: T,
    pub jitter_max: T,
    pub delta_inner_rounds: usize,
    /// The delta-method alternation also stops when its objective moves less than this.
    pub delta_inner_tol: T,
    pub optimizer: OptimizerConfig<T>,
}

impl<T: Real> Default for InferenceConfig<T> {
    fn default() -> Self {
        Self {
            method: Method::Laplace,
            conv_tol: T::lit(1e-4),
            max_outer_iters: 100,
            jitter_init: T::lit(1e-6),
            jitter_max: T::lit(1e-2),
            delta_inner_rounds: 10,
            delta_inner_tol: T::lit(1e-8),
            optimizer: OptimizerConfig::default(),
        }
    }
}

impl<T: Real> InferenceConfig<T> {
    pub fn with_method(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.conv_tol > T::zero()) {
            return Err(Error::Config("conv_tol must be positive".into()));
        }
        if self.max_outer_iters == 0 || self.delta_inner_rounds == 0 {
            return Err(Error::Config("iteration limits must be positive".into()));
        }
        if !(self.jitter_init > T::zero() && self.jitter_init <= self.jitter_max) {
            return Err(Error::Config("need 0 < jitter_init <= jitter_max".into()));
        }
        self.optimizer.validate()
    }
}

/// One row of the inference trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    /// Approximate objective after the iteration.
    pub objective: f64,
    pub mean_change: f64,
    /// Wall-clock seconds since inference started.
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct InferenceTrace {
    pub records: Vec<TraceRecord>,
}

impl InferenceTrace {
    pub fn push(&mut self, record: TraceRecord) {
        debug_assert!(self.records.last().is_none_or(|r| r.iteration < record.iteration));
        self.records.push(record);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }

    pub fn last_objective(&self) -> Option<f64> {
        self.records.last().map(|r| r.objective)
    }

    /// CSV with header `iter,objective,mean_change,seconds`.
    ///
    /// With `wall_clock = false` the seconds column is written as `0`, which
    /// makes the file a pure function of the inputs.
    pub fn to_csv(&self, wall_clock: bool) -> String {
        let mut out = String::from("iter,objective,mean_change,seconds\n");
        for r in &self.records {
            let secs = if wall_clock { r.seconds } else { 0.0 };
            let _ = writeln!(out, "{},{:?},{:?},{:?}", r.iteration, r.objective, r.mean_change, secs);
        }
        out
    }
}

/// Result of one `q(θ)` update.
#[derive(Debug, Clone)]
pub struct StepOutcome<T> {
    pub q: GaussianVariational<T>,
    /// Diagonal regularizer that had to be added to `−∇²f` (zero if none).
    pub jitter: T,
    pub optimizer_iterations: usize,
    pub grad_norm: T,
}

/// Final state of [`run_coordinate_ascent`].
#[derive(Debug, Clone)]
pub struct Fit<T, C> {
    pub q_theta: GaussianVariational<T>,
    pub q_z: C,
    pub trace: InferenceTrace,
    pub converged: bool,
    /// Largest jitter used by any `q(θ)` update.
    pub max_jitter: T,
}

/// An inference error together with the trace recorded before it happened.
#[derive(Debug, Clone, thiserror::Error)]
#[error("inference failed after {} iterations: {error}", trace.len())]
pub struct Failure {
    #[source]
    pub error: Error,
    pub trace: InferenceTrace,
}

impl From<Failure> for Error {
    fn from(f: Failure) -> Self {
        f.error
    }
}

/// `(−H)⁻¹`, adding `λI` to `−H` with `λ` doubling from `jitter_init` to
/// `jitter_max` when `−H` does not factorize.
pub fn negative_inverse_with_jitter<T: Real>(hessian: &Matrix<T>, jitter_init: T, jitter_max: T) -> Result<(Matrix<T>, T)> {
    let neg = hessian.scale(-T::one());
    if let Ok(chol) = spd_factorize(&neg) {
        return Ok((chol.inverse(), T::zero()));
    }
    let mut lambda = jitter_init;
    while lambda <= jitter_max {
        let mut shifted = neg.clone();
        shifted.add_diagonal(lambda);
        if let Ok(chol) = spd_factorize(&shifted) {
            return Ok((chol.inverse(), lambda));
        }
        lambda = lambda + lambda;
    }
    Err(Error::NonConcave { jitter: jitter_max.as_f64() })
}

fn diagonal_negative_inverse<T: Real>(hessian: &Matrix<T>, jitter_init: T, jitter_max: T) -> Result<(Matrix<T>, T)> {
    let diag = hessian.diagonal();
    let mut lambda = T::zero();
    loop {
        if diag.iter().all(|&h| -h + lambda > T::zero()) {
            let inv: Vec<T> = diag.iter().map(|&h| (-h + lambda).recip()).collect();
            return Ok((Matrix::from_diagonal(&inv), lambda));
        }
        lambda = if lambda == T::zero() { jitter_init } else { lambda + lambda };
        if lambda > jitter_max {
            return Err(Error::NonConcave { jitter: jitter_max.as_f64() });
        }
    }
}

/// Laplace update: `q(θ) = N(θ̂, −∇²f(θ̂)⁻¹)` with `θ̂ = argmax f`, searched
/// from `init`.
pub fn laplace_step<T, M>(model: &M, data: &M::Data, stats: &ExpectedStats<T>, init: &[T], cfg: &InferenceConfig<T>) -> Result<StepOutcome<T>>
where
    T: Real,
    M: ModelContract<T> + ?Sized,
{
    let opt = maximize(|theta| model.value_grad(theta, stats, data), init, &cfg.optimizer)?;
    let hessian = model.hessian(&opt.argmax, stats, data)?;
    let (cov, jitter) = negative_inverse_with_jitter(&hessian, cfg.jitter_init, cfg.jitter_max)?;
    Ok(StepOutcome {
        q: GaussianVariational { mean: opt.argmax, cov },
        jitter,
        optimizer_iterations: opt.iterations,
        grad_norm: opt.grad_norm,
    })
}

/// The delta-method objective `f(μ) + ½Tr{∇²f(μ)Σ} + ½log|Σ|`.
pub fn delta_objective<T, M>(model: &M, data: &M::Data, stats: &ExpectedStats<T>, q: &GaussianVariational<T>) -> Result<T>
where
    T: Real,
    M: ModelContract<T> + ?Sized,
{
    let f = model.value(&q.mean, stats, data)?;
    let h = model.hessian(&q.mean, stats, data)?;
    let log_det = spd_factorize(&q.cov)?.log_det();
    let half = T::lit(0.5);
    Ok(f + half * (h.trace_product(&q.cov) + log_det))
}

/// Delta-method update: alternately maximize the delta-method objective in
/// `μ` (gradient ascent, `Σ` fixed) and set `Σ = −∇²f(μ)⁻¹` (restricted to
/// its diagonal when the model asks for that).
pub fn delta_step<T, M>(model: &M, data: &M::Data, stats: &ExpectedStats<T>, init_q: &GaussianVariational<T>, cfg: &InferenceConfig<T>) -> Result<StepOutcome<T>>
where
    T: Real,
    M: ModelContract<T> + ?Sized,
{
    let half = T::lit(0.5);
    let diagonal = model.diagonal_delta_covariance();
    let mut q = init_q.clone();
    if diagonal {
        q.cov = Matrix::from_diagonal(&q.cov.diagonal());
    }
    let mut prev = delta_objective(model, data, stats, &q).ok();
    let mut jitter = T::zero();
    let mut iterations = 0;
    let mut grad_norm = T::zero();
    for _ in 0..cfg.delta_inner_rounds {
        let sigma = q.cov.clone();
        let mean_step = |mu: &[T]| -> Result<(T, Vec<T>)> {
            let (f, mut g) = model.value_grad(mu, stats, data)?;
            let h = model.hessian(mu, stats, data)?;
            let tg = model.trace_grad(mu, &sigma, stats, data)?;
            for (gi, ti) in g.iter_mut().zip(&tg) {
                *gi += half * *ti;
            }
            Ok((f + half * h.trace_product(&sigma), g))
        };
        let opt = maximize(mean_step, &q.mean, &cfg.optimizer)?;
        iterations += opt.iterations;
        grad_norm = opt.grad_norm;
        let h = model.hessian(&opt.argmax, stats, data)?;
        let (cov, lambda) = if diagonal {
            diagonal_negative_inverse(&h, cfg.jitter_init, cfg.jitter_max)?
        } else {
            negative_inverse_with_jitter(&h, cfg.jitter_init, cfg.jitter_max)?
        };
        jitter = jitter.max(lambda);
        q = GaussianVariational { mean: opt.argmax, cov };
        let current = delta_objective(model, data, stats, &q)?;
        if let Some(p) = prev {
            if (current - p).abs() < cfg.delta_inner_tol {
                break;
            }
        }
        prev = Some(current);
    }
    Ok(StepOutcome {
        q,
        jitter,
        optimizer_iterations: iterations,
        grad_norm,
    })
}

/// Second-order Taylor estimate `ηᵢ(μ) + ½Tr{∇²ηᵢ(μ)Σ}` of `E_q(θ)[ηᵢ(θ)]`,
/// from `η(μ)` and the component Hessians at `μ`.
pub fn eta_taylor_expectation<T: Real>(eta_at_mean: &[T], eta_hessians: &[Matrix<T>], sigma: &Matrix<T>) -> Vec<T> {
    let half = T::lit(0.5);
    eta_at_mean
        .iter()
        .enumerate()
        .map(|(i, &e)| match eta_hessians.get(i) {
            Some(h) => e + half * h.trace_product(sigma),
            None => e,
        })
        .collect()
}

/// `E_q(θ)[η(θ)]`: exact when the model provides it, Taylor otherwise.
pub fn eta_expectation<T, M>(model: &M, data: &M::Data, q_theta: &GaussianVariational<T>) -> Result<Vec<T>>
where
    T: Real,
    M: ModelContract<T> + ?Sized,
{
    if let Some(exact) = model.exact_eta_expectation(q_theta, data) {
        return exact;
    }
    let (eta, hessians) = model.eta_with_hessians(&q_theta.mean, data)?;
    Ok(eta_taylor_expectation(&eta, &hessians, &q_theta.cov))
}

/// Conjugate update `φ = E_q(θ)[η(θ)] + t(x)`.
pub fn conjugate_step<T, M>(model: &M, data: &M::Data, q_theta: &GaussianVariational<T>) -> Result<M::Conjugate>
where
    T: Real,
    M: ModelContract<T> + ?Sized,
{
    let eta = eta_expectation(model, data, q_theta)?;
    model.conjugate_update(&eta, data)
}

/// Approximate variational objective, expanded around `theta_hat`:
///
/// ```text
/// f(θ̂) + ∇f(θ̂)ᵀ(μ−θ̂) + ½(μ−θ̂)ᵀ∇²f(θ̂)(μ−θ̂) + ½(Tr{∇²f(θ̂)Σ} + log|Σ|)
///   + [log p(θ) normalizer] + E_q(z)[log p(x|z) + log h(z) − log q(z)]
/// ```
///
/// The Gaussian entropy constant `(d/2)(1 + log 2π)` is left out.
pub fn approx_objective<T, M>(model: &M, data: &M::Data, q_theta: &GaussianVariational<T>, q_z: &M::Conjugate, theta_hat: &[T]) -> Result<T>
where
    T: Real,
    M: ModelContract<T> + ?Sized,
{
    let half = T::lit(0.5);
    let stats = model.expected_stats(q_z, data)?;
    let (f, g) = model.value_grad(theta_hat, &stats, data)?;
    let h = model.hessian(theta_hat, &stats, data)?;
    let diff: Vec<T> = q_theta.mean.iter().zip(theta_hat).map(|(&m, &t)| m - t).collect();
    let linear = crate::scalar::dot(&g, &diff);
    let quadratic = half * h.quad_form(&diff);
    let log_det = spd_factorize(&q_theta.cov)?.log_det();
    let value = f
        + linear
        + quadratic
        + half * (h.trace_product(&q_theta.cov) + log_det)
        + model.log_prior_normalizer()
        + model.conjugate_bound(q_z, data)?;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite("approximate objective".into()))
    }
}

fn update_q_theta<T, M>(model: &M, data: &M::Data, stats: &ExpectedStats<T>, q_theta: &GaussianVariational<T>, cfg: &InferenceConfig<T>) -> Result<StepOutcome<T>>
where
    T: Real,
    M: ModelContract<T> + ?Sized,
{
    match cfg.method {
        Method::Laplace => laplace_step(model, data, stats, &q_theta.mean, cfg),
        Method::Delta => delta_step(model, data, stats, q_theta, cfg),
    }
}

/// Runs the full coordinate-ascent loop from `(init_theta, init_z)`.
pub fn run_coordinate_ascent<T, M>(
    model: &M,
    data: &M::Data,
    init_theta: GaussianVariational<T>,
    init_z: M::Conjugate,
    cfg: &InferenceConfig<T>,
) -> std::result::Result<Fit<T, M::Conjugate>, Failure>
where
    T: Real,
    M: ModelContract<T> + ?Sized,
{
    let mut trace = InferenceTrace::default();
    if let Err(error) = cfg.validate() {
        return Err(Failure { error, trace });
    }
    if init_theta.dim() != model.dim() {
        let error = Error::Input(format!("initial q(θ) has dimension {}, model expects {}", init_theta.dim(), model.dim()));
        return Err(Failure { error, trace });
    }
    let start = Instant::now();
    let mut q_theta = init_theta;
    let mut q_z = init_z;
    let mut max_jitter = T::zero();
    let mut converged = false;

    for iteration in 1..=cfg.max_outer_iters {
        let step = (|| -> Result<(GaussianVariational<T>, M::Conjugate, T, T)> {
            let stats = model.expected_stats(&q_z, data)?;
            let out = update_q_theta(model, data, &stats, &q_theta, cfg)?;
            let change: Vec<T> = out.q.mean.iter().zip(&q_theta.mean).map(|(&a, &b)| a - b).collect();
            let new_z = conjugate_step(model, data, &out.q)?;
            Ok((out.q, new_z, norm2(&change), out.jitter))
        })();
        let (new_theta, new_z, change, jitter) = match step {
            Ok(s) => s,
            Err(error) => return Err(Failure { error, trace }),
        };
        q_theta = new_theta;
        q_z = new_z;
        max_jitter = max_jitter.max(jitter);
        let objective = match approx_objective(model, data, &q_theta, &q_z, &q_theta.mean) {
            Ok(v) => v,
            Err(error) => return Err(Failure { error, trace }),
        };
        trace.push(TraceRecord {
            iteration,
            objective: objective.as_f64(),
            mean_change: change.as_f64(),
            seconds: start.elapsed().as_secs_f64(),
        });
        if change < cfg.conv_tol {
            converged = true;
            break;
        }
    }
    Ok(Fit {
        q_theta,
        q_z,
        trace,
        converged,
        max_jitter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    /// `θ ~ N(μ₀, Σ₀)` with `n` unit-variance Gaussian observations summing
    /// to `s`: `f(θ) = sᵀθ − (n/2)θᵀθ − ½(θ−μ₀)ᵀΣ₀⁻¹(θ−μ₀)`.
    struct Gaussian {
        mu0: Vec<f64>,
        prec0: Matrix<f64>,
        n: f64,
        sum: Vec<f64>,
        fail_after: Option<usize>,
        calls: Cell<usize>,
    }

    impl Gaussian {
        fn new(mu0: Vec<f64>, sigma0: Matrix<f64>, n: f64, sum: Vec<f64>) -> Self {
            Self {
                mu0,
                prec0: spd_factorize(&sigma0).unwrap().inverse(),
                n,
                sum,
                fail_after: None,
                calls: Cell::new(0),
            }
        }

        fn posterior(&self) -> (Vec<f64>, Matrix<f64>) {
            let mut prec = self.prec0.clone();
            prec.add_diagonal(self.n);
            let chol = spd_factorize(&prec).unwrap();
            let rhs: Vec<f64> = self.prec0.mul_vec(&self.mu0).iter().zip(&self.sum).map(|(a, b)| a + b).collect();
            (chol.solve(&rhs), chol.inverse())
        }
    }

    impl ModelContract<f64> for Gaussian {
        type Data = ();
        type Conjugate = ();

        fn dim(&self) -> usize {
            self.mu0.len()
        }

        fn expected_stats(&self, _: &(), _: &()) -> Result<ExpectedStats<f64>> {
            self.calls.set(self.calls.get() + 1);
            if self.fail_after.is_some_and(|k| self.calls.get() > k) {
                return Err(Error::NonFinite("injected".into()));
            }
            Ok(ExpectedStats(self.sum.clone()))
        }

        fn value_grad(&self, theta: &[f64], stats: &ExpectedStats<f64>, _: &()) -> Result<(f64, Vec<f64>)> {
            let c: Vec<f64> = theta.iter().zip(&self.mu0).map(|(t, m)| t - m).collect();
            let pull = self.prec0.mul_vec(&c);
            let v = crate::scalar::dot(stats.values(), theta) - 0.5 * self.n * crate::scalar::dot(theta, theta) - 0.5 * crate::scalar::dot(&c, &pull);
            let g = (0..theta.len()).map(|i| stats.values()[i] - self.n * theta[i] - pull[i]).collect();
            Ok((v, g))
        }

        fn hessian(&self, _: &[f64], _: &ExpectedStats<f64>, _: &()) -> Result<Matrix<f64>> {
            let mut h = self.prec0.scale(-1.0);
            h.add_diagonal(-self.n);
            Ok(h)
        }

        fn trace_grad(&self, theta: &[f64], _: &Matrix<f64>, _: &ExpectedStats<f64>, _: &()) -> Result<Vec<f64>> {
            Ok(vec![0.0; theta.len()])
        }

        fn conjugate_update(&self, _: &[f64], _: &()) -> Result<()> {
            Ok(())
        }

        fn conjugate_bound(&self, _: &(), _: &()) -> Result<f64> {
            Ok(0.0)
        }
    }

    fn close(a: &Matrix<f64>, b: &Matrix<f64>, tol: f64) -> bool {
        a.sub(b).max_abs() < tol
    }

    #[test]
    fn one_dimensional_quadratic() {
        // f(θ) = −θ²/2 + θ.
        let model = Gaussian::new(vec![0.0], Matrix::identity(1), 0.0, vec![1.0]);
        let stats = ExpectedStats(vec![1.0]);
        let cfg = InferenceConfig::default();
        let lap = laplace_step(&model, &(), &stats, &[0.0], &cfg).unwrap();
        let del = delta_step(&model, &(), &stats, &GaussianVariational::standard(1), &cfg).unwrap();
        for q in [lap.q, del.q] {
            assert!((q.mean[0] - 1.0).abs() < 1e-8);
            assert!((q.cov[(0, 0)] - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn prior_only_model_returns_the_prior() {
        let sigma0 = Matrix::from_rows(&[vec![2.0, 0.5, 0.0], vec![0.5, 1.0, 0.3], vec![0.0, 0.3, 0.7]]).unwrap();
        let model = Gaussian::new(vec![1.0, -2.0, 0.5], sigma0.clone(), 0.0, vec![0.0; 3]);
        let stats = ExpectedStats(vec![0.0; 3]);
        let cfg = InferenceConfig::default();
        let lap = laplace_step(&model, &(), &stats, &[0.0; 3], &cfg).unwrap();
        let del = delta_step(&model, &(), &stats, &GaussianVariational::standard(3), &cfg).unwrap();
        for q in [lap.q, del.q] {
            assert!(q.mean.iter().zip(&model.mu0).all(|(a, b)| (a - b).abs() < 1e-8));
            assert!(close(&q.cov, &sigma0, 1e-8));
        }
        assert!(lap.grad_norm <= cfg.optimizer.grad_tol);
    }

    #[test]
    fn conjugate_pair_is_exact_after_one_iteration() {
        let model = Gaussian::new(vec![0.5, -0.5], Matrix::from_rows(&[vec![1.0, 0.4], vec![0.4, 2.0]]).unwrap(), 3.0, vec![2.0, 1.0]);
        let (mean, cov) = model.posterior();
        for method in [Method::Laplace, Method::Delta] {
            let cfg = InferenceConfig {
                max_outer_iters: 1,
                ..InferenceConfig::with_method(method)
            };
            let fit = run_coordinate_ascent(&model, &(), GaussianVariational::standard(2), (), &cfg).unwrap();
            assert!(fit.q_theta.mean.iter().zip(&mean).all(|(a, b)| (a - b).abs() < 1e-8));
            assert!(close(&fit.q_theta.cov, &cov, 1e-8));
            let fit = run_coordinate_ascent(&model, &(), GaussianVariational::standard(2), (), &InferenceConfig::with_method(method)).unwrap();
            assert!(fit.converged && fit.trace.len() == 2);
            let obj = fit.trace.objectives();
            assert!((obj[0] - obj[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn taylor_expectation_examples() {
        let sigma = Matrix::identity(1);
        assert_eq!(eta_taylor_expectation(&[0.7], &[Matrix::zeros(1)], &sigma), vec![0.7]);
        // exp at 0: value 1, second derivative 1.
        assert_eq!(eta_taylor_expectation(&[1.0], &[Matrix::identity(1)], &sigma), vec![1.5]);
        // θ² at m = 0.3 with variance 0.2.
        let got = eta_taylor_expectation(&[0.09], &[Matrix::scaled_identity(1, 2.0)], &Matrix::scaled_identity(1, 0.2));
        assert!((got[0] - (0.09f64 + 0.2)).abs() < 1e-15);
    }

    #[test]
    fn jitter_policy() {
        let slightly = Matrix::from_rows(&[vec![-1.0, 0.0], vec![0.0, 1e-7]]).unwrap();
        let (_, lambda) = negative_inverse_with_jitter(&slightly, 1e-6, 1e-2).unwrap();
        assert_eq!(lambda, 1e-6);
        let badly = Matrix::from_rows(&[vec![-1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(negative_inverse_with_jitter(&badly, 1e-6, 1e-2), Err(Error::NonConcave { .. })));
        let fine = Matrix::scaled_identity(2, -2.0);
        assert_eq!(negative_inverse_with_jitter(&fine, 1e-6, 1e-2).unwrap().1, 0.0);
    }

    #[test]
    fn failure_carries_the_partial_trace() {
        let mut model = Gaussian::new(vec![0.0], Matrix::identity(1), 1.0, vec![1.0]);
        // Two calls per iteration: the q(θ) update and the objective.
        model.fail_after = Some(2);
        let cfg = InferenceConfig {
            conv_tol: 1e-300,
            ..InferenceConfig::default()
        };
        let err = run_coordinate_ascent(&model, &(), GaussianVariational::standard(1), (), &cfg).unwrap_err();
        assert_eq!(err.trace.len(), 1);
        assert!(matches!(err.error, Error::NonFinite(_)));
    }

    #[test]
    fn trace_csv_format() {
        let mut t = InferenceTrace::default();
        t.push(TraceRecord {
            iteration: 1,
            objective: -3.5,
            mean_change: 0.25,
            seconds: 1.5,
        });
        assert_eq!(t.to_csv(false), "iter,objective,mean_change,seconds\n1,-3.5,0.25,0.0\n");
        assert_eq!(t.to_csv(true), "iter,objective,mean_change,seconds\n1,-3.5,0.25,1.5\n");
    }

    #[test]
    fn delta_alternation_is_monotone() {
        use crate::data::Document;
        use crate::unigram::{unigram_expected_stats, UnigramModel};
        let model = UnigramModel::new(4).unwrap();
        let docs = [Document::from_dense(&[5, 1, 0, 2]), Document::from_dense(&[0, 3, 3, 1])];
        let stats = unigram_expected_stats(&[vec![6.0, 2.0, 0.5, 3.0], vec![1.0, 4.0, 4.0, 2.0]]).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for rounds in 1..=6 {
            let cfg = InferenceConfig {
                delta_inner_rounds: rounds,
                delta_inner_tol: 0.0,
                ..InferenceConfig::with_method(Method::Delta)
            };
            let out = delta_step(&model, &docs[..], &stats, &GaussianVariational::standard(4), &cfg).unwrap();
            let value = delta_objective(&model, &docs[..], &stats, &out.q).unwrap();
            assert!(value >= prev - 1e-10, "round {rounds}: {value} < {prev}");
            prev = value;
        }
    }
}
