//! Evaluation: half-document held-out likelihood for topic models, accuracy
//! and log predictive likelihood for classifiers, and a one-sided paired
//! t-test.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::blr::{blr_predict_label, blr_predict_loglik};
use crate::ctm::{ctm_infer_doc, ctm_predictive, CtmModel};
use crate::data::{Document, LabeledInstance};
use crate::engine::{InferenceConfig, InferenceTrace};
use crate::error::{Error, Result};
use crate::model::GaussianVariational;
use crate::numerics::log_gamma;
use crate::scalar::Real;

pub const DEFAULT_SPLIT_SEED: u64 = 42;

/// Per-unit values of one metric and their arithmetic mean.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub metric: String,
    /// `(unit id, value)`.
    pub values: Vec<(String, f64)>,
    pub mean: f64,
}

impl MetricReport {
    pub fn new(metric: impl Into<String>, values: Vec<(String, f64)>) -> Self {
        let mean = if values.is_empty() {
            f64::NAN
        } else {
            values.iter().map(|(_, v)| v).sum::<f64>() / values.len() as f64
        };
        Self {
            metric: metric.into(),
            values,
            mean,
        }
    }

    pub fn count(&self) -> usize {
        self.values.len()
    }

    /// Rows `unit_id,metric,value` without a header.
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for (id, v) in &self.values {
            let _ = writeln!(out, "{id},{},{v:?}", self.metric);
        }
        out
    }

    /// The summary row `mean,<metric>,<mean>`.
    pub fn summary_row(&self) -> String {
        format!("mean,{},{:?}\n", self.metric, self.mean)
    }
}

/// Header, every report's rows, then every report's summary row.
pub fn metrics_csv(reports: &[MetricReport]) -> String {
    let mut out = String::from("unit_id,metric,value\n");
    for r in reports {
        out.push_str(&r.csv_rows());
    }
    for r in reports {
        out.push_str(&r.summary_row());
    }
    out
}

/// Seed for document `index` derived from the run seed.
pub fn document_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Splits a document's tokens into two halves by a seeded shuffle; the first
/// half gets the extra token when the count is odd. `None` when the document
/// has fewer than two tokens.
pub fn split_document(doc: &Document, seed: u64) -> Option<(Document, Document)> {
    let mut tokens = doc.tokens();
    if tokens.len() < 2 {
        return None;
    }
    tokens.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = tokens.len().div_ceil(2);
    Some((Document::from_tokens(&tokens[..cut]), Document::from_tokens(&tokens[cut..])))
}

/// Per-word held-out log likelihood: infer on the first half, score the
/// second under the plug-in predictive. `None` when the document cannot be
/// split.
pub fn heldout_doc_loglik<T: Real>(model: &CtmModel<T>, doc: &Document, cfg: &InferenceConfig<T>, seed: u64) -> Result<Option<HeldoutScore>> {
    Ok(heldout_doc_traced(model, doc, cfg, seed)?.map(|(score, _)| score))
}

fn heldout_doc_traced<T: Real>(model: &CtmModel<T>, doc: &Document, cfg: &InferenceConfig<T>, seed: u64) -> Result<Option<(HeldoutScore, InferenceTrace)>> {
    let Some((observed, heldout)) = split_document(doc, seed) else {
        return Ok(None);
    };
    let state = ctm_infer_doc(model, &observed, cfg)?;
    Ok(Some((score_heldout(&ctm_predictive(model.params(), &state.q_theta), &heldout), state.trace)))
}

/// Log likelihood of a held-out half and its token count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeldoutScore {
    pub loglik: f64,
    pub words: u64,
}

impl HeldoutScore {
    pub fn per_word(&self) -> f64 {
        self.loglik / self.words as f64
    }
}

fn score_heldout<T: Real>(predictive: &[T], heldout: &Document) -> HeldoutScore {
    let loglik = heldout
        .terms()
        .iter()
        .map(|&(w, c)| c as f64 * predictive[w].as_f64().ln())
        .sum();
    HeldoutScore {
        loglik,
        words: heldout.total(),
    }
}

/// Held-out scores for a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct HeldoutReport {
    /// Per-document per-word log likelihood, keyed by document index.
    pub per_doc: MetricReport,
    pub total_loglik: f64,
    pub total_words: u64,
    pub skipped: usize,
    pub seed: u64,
    /// Inference traces of the scored documents, in document order.
    pub traces: Vec<InferenceTrace>,
}

impl HeldoutReport {
    /// Corpus-level per-word log likelihood (token weighted).
    pub fn per_word(&self) -> f64 {
        self.total_loglik / self.total_words as f64
    }
}

/// Runs [`heldout_doc_loglik`] on every document in parallel; document `d`
/// is split with [`document_seed`]`(seed, d)`.
pub fn heldout_corpus<T: Real>(model: &CtmModel<T>, docs: &[Document], cfg: &InferenceConfig<T>, seed: u64) -> Result<HeldoutReport> {
    let scores = docs
        .par_iter()
        .enumerate()
        .map(|(d, doc)| heldout_doc_traced(model, doc, cfg, document_seed(seed, d)))
        .collect::<Result<Vec<_>>>()?;
    let mut values = Vec::new();
    let mut traces = Vec::new();
    let mut total_loglik = 0.0;
    let mut total_words = 0;
    for (d, s) in scores.into_iter().enumerate() {
        if let Some((s, trace)) = s {
            values.push((d.to_string(), s.per_word()));
            traces.push(trace);
            total_loglik += s.loglik;
            total_words += s.words;
        }
    }
    let skipped = docs.len() - values.len();
    Ok(HeldoutReport {
        per_doc: MetricReport::new("heldout_loglik_per_word", values),
        total_loglik,
        total_words,
        skipped,
        seed,
        traces,
    })
}

/// Fraction of matching labels.
pub fn accuracy(predictions: &[bool], truth: &[bool]) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(Error::Input(format!("{} predictions for {} labels", predictions.len(), truth.len())));
    }
    if truth.is_empty() {
        return Err(Error::Input("no labels to score".into()));
    }
    let hits = predictions.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Predicted labels for a set of instances.
pub fn predict_labels<T: Real>(q: &GaussianVariational<T>, data: &[LabeledInstance<T>]) -> Vec<bool> {
    data.iter().map(|x| blr_predict_label(q, &x.covariates)).collect()
}

/// Per-instance plug-in log likelihood over every `(posterior, test set)`
/// problem, in order; units are `problem:instance`.
pub fn avg_log_pred<T: Real>(problems: &[(GaussianVariational<T>, Vec<LabeledInstance<T>>)]) -> MetricReport {
    let values = problems
        .iter()
        .enumerate()
        .flat_map(|(p, (q, data))| {
            data.iter()
                .enumerate()
                .map(move |(n, x)| (format!("{p}:{n}"), blr_predict_loglik(q, x).as_f64()))
        })
        .collect();
    MetricReport::new("log_pred", values)
}

/// Outcome of a one-sided paired t-test of `mean(a − b) > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    /// `+∞` when the differences are a constant positive shift.
    pub t: f64,
    pub critical: f64,
    pub significant: bool,
}

/// One-sided paired t-test at `level`, with `n − 1` degrees of freedom.
pub fn paired_t_test(a: &[f64], b: &[f64], level: f64) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::Input("paired samples must have equal length".into()));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Input("a paired t-test needs at least two pairs".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Input(format!("test level must lie in (0, 1), got {level}")));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let critical = student_t_quantile(1.0 - level, (n - 1) as f64)?;
    // Rounding in a − b can leave a spurious spread around a constant shift.
    let degenerate = var.sqrt() <= 1e-12 * mean.abs();
    let t = if var > 0.0 && !degenerate {
        mean / (var / n as f64).sqrt()
    } else if mean > 0.0 {
        f64::INFINITY
    } else if mean < 0.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    };
    Ok(TTest {
        t,
        critical,
        significant: t > critical,
    })
}

/// Regularized incomplete beta `I_x(a, b)` by Lentz's continued fraction.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) || !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain {
            function: "regularized_incomplete_beta",
            value: x,
        });
    }
    if x == 0.0 || x == 1.0 {
        return Ok(x);
    }
    let ln_front = log_gamma(a + b)? - log_gamma(a)? - log_gamma(b)? + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    // The fraction converges fast for x below the mean; use symmetry above it.
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(front * beta_fraction(x, a, b) / a)
    } else {
        Ok(1.0 - front * beta_fraction(1.0 - x, b, a) / b)
    }
}

fn beta_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=300 {
        let m = m as f64;
        let m2 = 2.0 * m;
        for aa in [m * (b - m) * x / ((qam + m2) * (a + m2)), -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))] {
            d = 1.0 + aa * d;
            if d.abs() < TINY {
                d = TINY;
            }
            c = 1.0 + aa / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            h *= d * c;
        }
        if (d * c - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// Student-t CDF with `df` degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> Result<f64> {
    if !(df > 0.0) || t.is_nan() {
        return Err(Error::Domain { function: "student_t_cdf", value: df });
    }
    if t.is_infinite() {
        return Ok(if t > 0.0 { 1.0 } else { 0.0 });
    }
    let tail = 0.5 * regularized_incomplete_beta(df / (df + t * t), 0.5 * df, 0.5)?;
    Ok(if t >= 0.0 { 1.0 - tail } else { tail })
}

/// Inverse Student-t CDF by bracketing bisection.
pub fn student_t_quantile(p: f64, df: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain {
            function: "student_t_quantile",
            value: p,
        });
    }
    if p < 0.5 {
        return Ok(-student_t_quantile(1.0 - p, df)?);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while student_t_cdf(hi, df)? < p {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::NonFinite("student-t quantile".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if student_t_cdf(mid, df)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
