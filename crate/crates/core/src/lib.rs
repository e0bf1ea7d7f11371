//! Mean-field variational inference for nonconjugate models via Laplace and
//! delta-method updates, with three bundled models (hierarchical unigram
//! language model, correlated topic model, Bayesian logistic regression).
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the aliases at
//! the crate root fix `f64`.

mod error;
mod scalar;

pub mod blr;
pub mod ctm;
pub mod data;
pub mod engine;
pub mod eval;
pub mod io;
pub mod model;
pub mod numerics;
pub mod optim;
pub mod synth;
pub mod unigram;

pub use blr::{
    blr_f, blr_fit, blr_predict_label, blr_predict_loglik, blr_trace_grad, hblr_fit_em,
    hblr_hyper_update, BlrFit, BlrModel, BlrPrior, HblrFit, HblrOptions, HierPrior,
};
pub use ctm::{
    ctm_e_step, ctm_em_fit, ctm_em_fit_from, ctm_f, ctm_infer_doc, ctm_initial_params,
    ctm_predictive, ctm_trace_grad, CtmDocState, CtmEmFit, CtmModel, CtmParams,
};
pub use data::{Document, LabeledInstance};
pub use engine::{
    approx_objective, conjugate_step, delta_objective, delta_step, eta_expectation,
    eta_taylor_expectation, laplace_step, negative_inverse_with_jitter, run_coordinate_ascent,
    Failure, Fit, InferenceConfig, InferenceTrace, Method, StepOutcome, TraceRecord,
};
pub use error::{Error, Result};
pub use model::{
    expected_stats_from_natural, ConjugateFamily, ExpectedStats, GaussianVariational,
    ModelContract,
};
pub use numerics::{Cholesky, Matrix};
pub use optim::{maximize, OptimResult, OptimizerConfig};
pub use scalar::Real;
pub use unigram::{
    unigram_conjugate_update, unigram_eta_expectation, unigram_expected_stats, unigram_f,
    unigram_infer, unigram_trace_grad, UnigramModel,
};

/// `f64` instantiations.
pub type Gaussian = GaussianVariational<f64>;
pub type Mat = Matrix<f64>;
pub type Config = InferenceConfig<f64>;
pub type Params = CtmParams<f64>;
