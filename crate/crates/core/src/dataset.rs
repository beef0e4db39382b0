//! Labeled prediction datasets and their CSV format.
//!
//! The CSV layout is a header `c0,...,c{n-1},label` followed by one row per
//! instance. Columns hold either probabilities or logits; logits are
//! softmaxed on load, probabilities within `1e-6` of the simplex are
//! renormalized and anything further off is rejected.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::simplex::{softmax, LogitVector, ProbVector, INGEST_TOL};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledPredictions {
    predictions: Vec<ProbVector>,
    labels: Vec<usize>,
    n_classes: usize,
}

impl LabeledPredictions {
    pub fn new(predictions: Vec<ProbVector>, labels: Vec<usize>) -> Result<Self> {
        if predictions.is_empty() {
            return Err(Error::validation("dataset must contain at least one row"));
        }
        if predictions.len() != labels.len() {
            return Err(Error::validation(format!(
                "{} predictions but {} labels",
                predictions.len(),
                labels.len()
            )));
        }
        let n = predictions[0].len();
        if let Some(p) = predictions.iter().find(|p| p.len() != n) {
            return Err(Error::validation(format!(
                "mixed class counts: {} and {}",
                n,
                p.len()
            )));
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= n) {
            return Err(Error::Index { index: y, len: n });
        }
        Ok(LabeledPredictions { predictions, labels, n_classes: n })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn predictions(&self) -> &[ProbVector] {
        &self.predictions
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ProbVector, usize)> + '_ {
        self.predictions.iter().zip(self.labels.iter().copied())
    }

    /// Rows at `indices`, in that order. Rows are shared, not copied.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let predictions = indices.iter().map(|&i| self.predictions[i].clone()).collect();
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        LabeledPredictions::new(predictions, labels)
    }

    /// Same labels, predictions replaced row by row.
    pub fn with_predictions(&self, predictions: Vec<ProbVector>) -> Result<Self> {
        LabeledPredictions::new(predictions, self.labels.clone())
    }

    /// Fraction of rows whose top label equals the true label.
    pub fn accuracy(&self) -> f64 {
        let hits = self.iter().filter(|(p, y)| p.top_label().0 == *y).count();
        hits as f64 / self.len() as f64
    }

    /// SHA-256 over the canonical CSV serialization, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        hex::encode(Sha256::digest(&buf))
    }

    /// Writes the probability CSV. Values use the shortest representation
    /// that parses back to the same `f64`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = (0..self.n_classes).map(|k| format!("c{k}")).collect();
        writeln!(w, "{},label", header.join(","))?;
        for (p, y) in self.iter() {
            let row: Vec<String> = p.iter().map(|v| format!("{v:?}")).collect();
            writeln!(w, "{},{}", row.join(","), y)?;
        }
        Ok(())
    }
}

/// Whether CSV columns hold probabilities or logits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnFormat {
    Probs,
    Logits,
}

impl std::str::FromStr for ColumnFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "probs" | "probabilities" => Ok(ColumnFormat::Probs),
            "logits" => Ok(ColumnFormat::Logits),
            other => Err(Error::config(format!("unknown column format '{other}' (expected probs|logits)"))),
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, format: ColumnFormat) -> Result<LabeledPredictions> {
    let file = std::fs::File::open(path)?;
    read_csv(file, format)
}

pub fn read_csv<R: Read>(reader: R, format: ColumnFormat) -> Result<LabeledPredictions> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?
        .clone();
    let n = check_header(&headers)?;

    let mut predictions = Vec::new();
    let mut labels = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != n + 1 {
            return Err(Error::Parse { line, message: format!("expected {} fields, found {}", n + 1, rec.len()) });
        }
        let mut values = Vec::with_capacity(n);
        for field in rec.iter().take(n) {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Parse { line, message: format!("not a number: '{field}'") })?;
            values.push(v);
        }
        let label_field = &rec[n];
        let label: usize = label_field
            .parse()
            .map_err(|_| Error::Parse { line, message: format!("invalid label '{label_field}'") })?;
        if label >= n {
            return Err(Error::Validation(format!("line {line}: label {label} out of range for {n} classes")));
        }
        let p = match format {
            ColumnFormat::Probs => ProbVector::renormalized(values, INGEST_TOL),
            ColumnFormat::Logits => LogitVector::new(values).and_then(|z| softmax(&z)),
        }
        .map_err(|e| Error::Validation(format!("line {line}: {e}")))?;
        predictions.push(p);
        labels.push(label);
    }
    LabeledPredictions::new(predictions, labels)
}

fn check_header(headers: &csv::StringRecord) -> Result<usize> {
    let fields: Vec<&str> = headers.iter().collect();
    let bad = |msg: String| Error::Parse { line: 1, message: msg };
    if fields.len() < 3 || fields[fields.len() - 1] != "label" {
        return Err(bad(format!("header must be c0,...,c{{n-1}},label with n >= 2; got '{}'", fields.join(","))));
    }
    for (k, f) in fields[..fields.len() - 1].iter().enumerate() {
        if *f != format!("c{k}") {
            return Err(bad(format!("expected column 'c{k}', found '{f}'")));
        }
    }
    Ok(fields.len() - 1)
}

/// Validation and test data for one model.
#[derive(Clone, Debug)]
pub struct Split {
    pub validation: LabeledPredictions,
    pub test: LabeledPredictions,
}

impl Split {
    pub fn new(validation: LabeledPredictions, test: LabeledPredictions) -> Result<Self> {
        if validation.n_classes() != test.n_classes() {
            return Err(Error::validation(format!(
                "validation has {} classes, test has {}",
                validation.n_classes(),
                test.n_classes()
            )));
        }
        Ok(Split { validation, test })
    }

    /// Disjoint random split of one pool; `n_validation` rows go to validation.
    pub fn from_pool(pool: &LabeledPredictions, n_validation: usize, seed: u64) -> Result<Self> {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        if n_validation == 0 || n_validation >= pool.len() {
            return Err(Error::config(format!(
                "validation size {n_validation} must be in 1..{}",
                pool.len()
            )));
        }
        let mut idx: Vec<usize> = (0..pool.len()).collect();
        idx.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let (v, t) = idx.split_at(n_validation);
        Split::new(pool.select(v)?, pool.select(t)?)
    }
}
