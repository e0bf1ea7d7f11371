//! The contract between a nonconjugate model and the inference engine.
//!
//! A model factors as `p(θ) p(z | θ) p(x | z)`, where `θ` is real-valued
//! with a Gaussian variational factor and `z` is an exponential-family
//! variable whose variational factor stays in its own family. Everything the
//! engine needs is the function
//!
//! ```text
//! f(θ) = η(θ)ᵀ E_q(z)[t(z)] − a(η(θ)) + log p(θ)
//! ```
//!
//! with its derivatives, plus the pieces of the conjugate update.

use crate::error::{Error, Result};
use crate::numerics::{digamma, softmax, spd_factorize, Matrix};
use crate::scalar::{all_finite, Real};

/// Gaussian factor `q(θ) = N(mean, cov)` over the nonconjugate variable.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianVariational<T> {
    pub mean: Vec<T>,
    pub cov: Matrix<T>,
}

impl<T: Real> GaussianVariational<T> {
    /// Validated constructor: finite mean, symmetric positive definite covariance.
    pub fn new(mean: Vec<T>, cov: Matrix<T>) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::Input(format!(
                "mean has dimension {} but covariance has dimension {}",
                mean.len(),
                cov.dim()
            )));
        }
        if !all_finite(&mean) {
            return Err(Error::NonFinite("variational mean".into()));
        }
        if !cov.is_symmetric(T::lit(1e-10)) {
            return Err(Error::Input("variational covariance is not symmetric".into()));
        }
        spd_factorize(&cov)?;
        Ok(Self { mean, cov })
    }

    /// `N(0, I)`.
    pub fn standard(dim: usize) -> Self {
        Self {
            mean: vec![T::zero(); dim],
            cov: Matrix::identity(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Expected sufficient statistics `E_q(z)[t(z)]`, in the coordinates the
/// model's `f` consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedStats<T>(pub Vec<T>);

impl<T: Real> ExpectedStats<T> {
    pub fn values(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Conjugate families with a closed-form mean parameter `∇a(φ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConjugateFamily {
    /// Natural parameter = Dirichlet concentration; `t(z) = log z`.
    Dirichlet,
    /// Natural parameter = unnormalized log probabilities; `t(z)` = indicator.
    Categorical,
}

/// `E[t(z)] = ∇a(φ)` for the given family.
pub fn expected_stats_from_natural<T: Real>(family: ConjugateFamily, phi: &[T]) -> Result<ExpectedStats<T>> {
    match family {
        ConjugateFamily::Dirichlet => {
            let mut total = T::zero();
            for &p in phi {
                if !(p > T::zero()) || !p.is_finite() {
                    return Err(Error::Domain {
                        function: "dirichlet natural parameter",
                        value: p.as_f64(),
                    });
                }
                total += p;
            }
            let dg_total = digamma(total)?;
            phi.iter()
                .map(|&p| Ok(digamma(p)? - dg_total))
                .collect::<Result<Vec<_>>>()
                .map(ExpectedStats)
        }
        ConjugateFamily::Categorical => {
            if phi.is_empty() || phi.iter().any(|p| p.is_nan() || *p == T::infinity()) {
                return Err(Error::Domain {
                    function: "categorical natural parameter",
                    value: f64::NAN,
                });
            }
            Ok(ExpectedStats(softmax(phi)))
        }
    }
}

/// Capability set a model supplies to the coordinate-ascent engine.
///
/// Implementations must be immutable after construction. `Data` is the
/// per-problem observation set; one model can serve many data shards.
pub trait ModelContract<T: Real> {
    type Data: ?Sized;
    /// Parameters `φ` of the conjugate factor `q(z | φ)`.
    type Conjugate: Clone;

    /// Dimension of `θ`.
    fn dim(&self) -> usize;

    /// `E_q(z)[t(z)]`.
    fn expected_stats(&self, q_z: &Self::Conjugate, data: &Self::Data) -> Result<ExpectedStats<T>>;

    /// `f(θ)` and `∇f(θ)`.
    fn value_grad(&self, theta: &[T], stats: &ExpectedStats<T>, data: &Self::Data) -> Result<(T, Vec<T>)>;

    fn value(&self, theta: &[T], stats: &ExpectedStats<T>, data: &Self::Data) -> Result<T> {
        Ok(self.value_grad(theta, stats, data)?.0)
    }

    /// `∇²f(θ)`.
    fn hessian(&self, theta: &[T], stats: &ExpectedStats<T>, data: &Self::Data) -> Result<Matrix<T>>;

    /// `∇_θ Tr{∇²f(θ) Σ}` for fixed `Σ`.
    fn trace_grad(&self, theta: &[T], sigma: &Matrix<T>, stats: &ExpectedStats<T>, data: &Self::Data) -> Result<Vec<T>>;

    /// `E_q(θ)[η(θ)]` in closed form, when the model has one.
    fn exact_eta_expectation(&self, _q: &GaussianVariational<T>, _data: &Self::Data) -> Option<Result<Vec<T>>> {
        None
    }

    /// `η(θ)` and the Hessians `∇²ηᵢ(θ)`, used by the second-order Taylor
    /// fallback when no exact expectation exists.
    fn eta_with_hessians(&self, _theta: &[T], _data: &Self::Data) -> Result<(Vec<T>, Vec<Matrix<T>>)> {
        Ok((Vec::new(), Vec::new()))
    }

    /// New conjugate parameters `φ = E[η(θ)] + t(x)`, in family coordinates.
    fn conjugate_update(&self, eta_expectation: &[T], data: &Self::Data) -> Result<Self::Conjugate>;

    /// The `z`-dependent remainder of the bound that `f` does not carry:
    /// `E_q(z)[log p(x | z) + log h(z)] − E_q(z)[log q(z)]`.
    fn conjugate_bound(&self, q_z: &Self::Conjugate, data: &Self::Data) -> Result<T>;

    /// Normalizing constant of `log p(θ)` left out of `f`.
    fn log_prior_normalizer(&self) -> T {
        T::zero()
    }

    /// Whether delta-method updates restrict `Σ` to be diagonal.
    fn diagonal_delta_covariance(&self) -> bool {
        false
    }
}
