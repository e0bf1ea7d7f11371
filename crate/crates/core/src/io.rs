//! Text formats.
//!
//! * Corpus: header `V <vocab size>`, then one document per line,
//!   `N idx:count ...` with `N` the number of distinct terms.
//! * Labeled data: header `P <dim>`, then `label idx:value ...` per line,
//!   label 0 or 1, unlisted covariates 0.
//! * CTM parameters: `K V`, `K` topic rows, the prior mean, `K` prior
//!   covariance rows.
//! * Gaussian posterior: `p`, the mean, `p` covariance rows.
//!
//! Blank lines are ignored. Floats are written with 17 significant digits.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::ctm::CtmParams;
use crate::data::{Document, LabeledInstance};
use crate::error::{Error, Result};
use crate::model::GaussianVariational;
use crate::numerics::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub vocab_size: usize,
    pub docs: Vec<Document>,
    /// Indices of documents with no terms.
    pub empty_docs: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledData {
    pub dim: usize,
    pub instances: Vec<LabeledInstance<f64>>,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Non-blank lines with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty())
}

fn parse_header(lines: &mut dyn Iterator<Item = (usize, &str)>, tag: &str) -> Result<usize> {
    let (line, text) = lines.next().ok_or_else(|| parse_err(1, format!("missing '{tag} <int>' header")))?;
    let mut parts = text.split_whitespace();
    match (parts.next(), parts.next().map(str::parse::<usize>), parts.next()) {
        (Some(t), Some(Ok(n)), None) if t == tag && n > 0 => Ok(n),
        _ => Err(parse_err(line, format!("expected header '{tag} <positive int>', found '{text}'"))),
    }
}

/// Splits `idx:value`, reporting the 1-based field position on failure.
fn parse_pair(line: usize, field: usize, token: &str) -> Result<(usize, &str)> {
    let (idx, value) = token
        .split_once(':')
        .ok_or_else(|| parse_err(line, format!("field {field}: expected idx:value, found '{token}'")))?;
    let idx = idx
        .parse::<usize>()
        .map_err(|_| parse_err(line, format!("field {field}: bad index '{idx}'")))?;
    Ok((idx, value))
}

pub fn parse_corpus_str(text: &str) -> Result<Corpus> {
    let mut lines = content_lines(text);
    let vocab_size = parse_header(&mut lines, "V")?;
    let mut docs = Vec::new();
    let mut empty_docs = Vec::new();
    for (line, text) in lines {
        let mut fields = text.split_whitespace();
        let declared = fields
            .next()
            .and_then(|n| n.parse::<usize>().ok())
            .ok_or_else(|| parse_err(line, "field 1: expected the number of distinct terms"))?;
        let mut counts = Vec::with_capacity(declared);
        let mut seen = HashSet::with_capacity(declared);
        for (i, token) in fields.enumerate() {
            let field = i + 2;
            let (idx, count) = parse_pair(line, field, token)?;
            let count = match count.parse::<u32>() {
                Ok(c) if c > 0 => c,
                _ => return Err(parse_err(line, format!("field {field}: count must be a positive integer, found '{count}'"))),
            };
            if !seen.insert(idx) {
                return Err(parse_err(line, format!("field {field}: duplicate term index {idx}")));
            }
            if idx >= vocab_size {
                return Err(Error::Validation {
                    line,
                    message: format!("term index {idx} is not below the vocabulary size {vocab_size}"),
                });
            }
            counts.push((idx, count));
        }
        if counts.len() != declared {
            return Err(parse_err(line, format!("declared {declared} terms but found {}", counts.len())));
        }
        if counts.is_empty() {
            empty_docs.push(docs.len());
        }
        docs.push(Document::from_counts(counts)?);
    }
    Ok(Corpus {
        vocab_size,
        docs,
        empty_docs,
    })
}

pub fn parse_labeled_str(text: &str) -> Result<LabeledData> {
    let mut lines = content_lines(text);
    let dim = parse_header(&mut lines, "P")?;
    let mut instances = Vec::new();
    for (line, text) in lines {
        let mut fields = text.split_whitespace();
        let positive = match fields.next() {
            Some("1") => true,
            Some("0") => false,
            other => return Err(parse_err(line, format!("field 1: label must be 0 or 1, found '{}'", other.unwrap_or("")))),
        };
        let mut covariates = vec![0.0; dim];
        let mut seen = HashSet::new();
        for (i, token) in fields.enumerate() {
            let field = i + 2;
            let (idx, value) = parse_pair(line, field, token)?;
            let value = match value.parse::<f64>() {
                Ok(v) if v.is_finite() => v,
                _ => return Err(parse_err(line, format!("field {field}: bad value '{value}'"))),
            };
            if !seen.insert(idx) {
                return Err(parse_err(line, format!("field {field}: duplicate covariate index {idx}")));
            }
            if idx >= dim {
                return Err(Error::Validation {
                    line,
                    message: format!("covariate index {idx} is not below the dimension {dim}"),
                });
            }
            covariates[idx] = value;
        }
        instances.push(LabeledInstance::new(covariates, positive));
    }
    Ok(LabeledData { dim, instances })
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn parse_corpus(path: &Path) -> Result<Corpus> {
    parse_corpus_str(&read(path)?)
}

pub fn parse_labeled(path: &Path) -> Result<LabeledData> {
    parse_labeled_str(&read(path)?)
}

/// Every regular file in `dir`, sorted by file name, parsed as one labeled
/// task. Returns the file names with the tasks.
pub fn parse_task_dir(dir: &Path) -> Result<(Vec<String>, Vec<LabeledData>)> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let mut paths = Vec::new();
    for entry in entries {
        let entry = entry?;
        if entry.file_type()?.is_file() {
            paths.push(entry.path());
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Input(format!("{}: no task files", dir.display())));
    }
    let mut names = Vec::with_capacity(paths.len());
    let mut tasks = Vec::with_capacity(paths.len());
    for path in paths {
        let task = parse_labeled(&path).map_err(|e| match e {
            Error::Parse { line, message } => Error::Parse {
                line,
                message: format!("{}: {message}", path.display()),
            },
            Error::Validation { line, message } => Error::Validation {
                line,
                message: format!("{}: {message}", path.display()),
            },
            other => other,
        })?;
        if let Some(first) = tasks.first().map(|t: &LabeledData| t.dim) {
            if task.dim != first {
                return Err(Error::Input(format!("{}: dimension {} differs from {first}", path.display(), task.dim)));
            }
        }
        names.push(path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default());
        tasks.push(task);
    }
    Ok((names, tasks))
}

pub fn format_corpus(vocab_size: usize, docs: &[Document]) -> String {
    let mut out = format!("V {vocab_size}\n");
    for doc in docs {
        let _ = write!(out, "{}", doc.num_unique());
        for &(t, c) in doc.terms() {
            let _ = write!(out, " {t}:{c}");
        }
        out.push('\n');
    }
    out
}

pub fn format_labeled(dim: usize, data: &[LabeledInstance<f64>]) -> String {
    let mut out = format!("P {dim}\n");
    for x in data {
        out.push(if x.positive { '1' } else { '0' });
        for (i, &v) in x.covariates.iter().enumerate() {
            if v != 0.0 {
                let _ = write!(out, " {i}:{v:?}");
            }
        }
        out.push('\n');
    }
    out
}

fn push_row(out: &mut String, row: &[f64]) {
    for (i, v) in row.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v:.16e}");
    }
    out.push('\n');
}

fn push_matrix(out: &mut String, m: &Matrix<f64>) {
    for i in 0..m.dim() {
        push_row(out, m.row(i));
    }
}

pub fn format_ctm_params(params: &CtmParams<f64>) -> String {
    let mut out = format!("{} {}\n", params.num_topics(), params.vocab_size());
    for t in &params.topics {
        push_row(&mut out, t);
    }
    push_row(&mut out, &params.prior_mean);
    push_matrix(&mut out, &params.prior_cov);
    out
}

pub fn format_gaussian(q: &GaussianVariational<f64>) -> String {
    let mut out = format!("{}\n", q.dim());
    push_row(&mut out, &q.mean);
    push_matrix(&mut out, &q.cov);
    out
}

struct Rows<'a> {
    lines: std::iter::Peekable<Box<dyn Iterator<Item = (usize, &'a str)> + 'a>>,
}

impl<'a> Rows<'a> {
    fn new(text: &'a str) -> Self {
        let it: Box<dyn Iterator<Item = (usize, &'a str)> + 'a> = Box::new(content_lines(text));
        Self { lines: it.peekable() }
    }

    fn ints(&mut self, n: usize) -> Result<Vec<usize>> {
        let (line, text) = self.lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
        let v: Vec<usize> = text
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| parse_err(line, format!("expected {n} integers, found '{text}'")))?;
        if v.len() != n || v.contains(&0) {
            return Err(parse_err(line, format!("expected {n} positive integers, found '{text}'")));
        }
        Ok(v)
    }

    fn floats(&mut self, n: usize) -> Result<Vec<f64>> {
        let (line, text) = self.lines.next().ok_or_else(|| parse_err(0, format!("unexpected end of file, expected {n} values")))?;
        let mut out = Vec::with_capacity(n);
        for (i, tok) in text.split_whitespace().enumerate() {
            out.push(tok.parse::<f64>().map_err(|_| parse_err(line, format!("field {}: bad number '{tok}'", i + 1)))?);
        }
        if out.len() != n {
            return Err(parse_err(line, format!("expected {n} values, found {}", out.len())));
        }
        Ok(out)
    }

    fn matrix(&mut self, n: usize) -> Result<Matrix<f64>> {
        let rows = (0..n).map(|_| self.floats(n)).collect::<Result<Vec<_>>>()?;
        Matrix::from_rows(&rows)
    }

    fn finish(mut self) -> Result<()> {
        match self.lines.next() {
            Some((line, _)) => Err(parse_err(line, "unexpected trailing content")),
            None => Ok(()),
        }
    }
}

pub fn parse_ctm_params_str(text: &str) -> Result<CtmParams<f64>> {
    let mut rows = Rows::new(text);
    let kv = rows.ints(2)?;
    let (k, v) = (kv[0], kv[1]);
    let topics = (0..k).map(|_| rows.floats(v)).collect::<Result<Vec<_>>>()?;
    let mean = rows.floats(k)?;
    let cov = rows.matrix(k)?;
    rows.finish()?;
    CtmParams::new(topics, mean, cov)
}

pub fn parse_gaussian_str(text: &str) -> Result<GaussianVariational<f64>> {
    let mut rows = Rows::new(text);
    let p = rows.ints(1)?[0];
    let mean = rows.floats(p)?;
    let cov = rows.matrix(p)?;
    rows.finish()?;
    GaussianVariational::new(mean, cov)
}

pub fn read_ctm_params(path: &Path) -> Result<CtmParams<f64>> {
    parse_ctm_params_str(&read(path)?)
}

pub fn read_gaussian(path: &Path) -> Result<GaussianVariational<f64>> {
    parse_gaussian_str(&read(path)?)
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
