//! Pair-level scoring against a gold set, the synthetic corpus generator and
//! report rendering.

mod report;
pub mod synth;

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dedup::{canonical_ids, DuplicateLabel, LabeledPair, Reason};

pub use report::{report_render, ReportDocument, ReportFormat};
pub use synth::{pseudo_languages, synth_corpus, DupPlan, PseudoLanguage, SynthConfig, SynthCorpus};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("pair ({0:?}, {1:?}) predicted more than once")]
    DuplicatePrediction(String, String),
    #[error("gold label NONE for pair ({0:?}, {1:?})")]
    NoneLabel(String, String),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("synthetic corpus configuration: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Known duplicate pairs, canonically keyed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GoldSet {
    pairs: BTreeMap<(String, String), DuplicateLabel>,
}

impl GoldSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a pair in either order; a later insert for the same pair wins.
    pub fn insert(&mut self, a: &str, b: &str, label: DuplicateLabel) -> Result<(), EvalError> {
        if label == DuplicateLabel::None {
            return Err(EvalError::NoneLabel(a.into(), b.into()));
        }
        let (a, b) = canonical_ids(a, b);
        self.pairs.insert((a.to_string(), b.to_string()), label);
        Ok(())
    }

    pub fn get(&self, a: &str, b: &str) -> Option<DuplicateLabel> {
        let (a, b) = canonical_ids(a, b);
        self.pairs.get(&(a.to_string(), b.to_string())).copied()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, DuplicateLabel)> {
        self.pairs.iter().map(|((a, b), l)| (a.as_str(), b.as_str(), *l))
    }

    pub fn count(&self, label: DuplicateLabel) -> usize {
        self.pairs.values().filter(|l| **l == label).count()
    }

    /// CSV with header `id1,id2,label`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, EvalError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header_ok = rdr
            .headers()
            .map(|h| h.iter().collect::<Vec<_>>() == ["id1", "id2", "label"])
            .unwrap_or(false);
        if !header_ok {
            return Err(EvalError::Malformed {
                line: 1,
                message: "expected header id1,id2,label".into(),
            });
        }
        let mut gold = GoldSet::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| EvalError::Malformed {
                line,
                message: e.to_string(),
            })?;
            let label: DuplicateLabel = rec[2]
                .parse()
                .map_err(|message| EvalError::Malformed { line, message })?;
            if rec[0] == rec[1] {
                return Err(EvalError::Malformed {
                    line,
                    message: "self pair".into(),
                });
            }
            gold.insert(&rec[0], &rec[1], label)?;
        }
        Ok(gold)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), EvalError> {
        let mut wtr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| EvalError::Io(e.into());
        wtr.write_record(["id1", "id2", "label"]).map_err(io)?;
        for (a, b, l) in self.iter() {
            wtr.write_record([a, b, l.as_str()]).map_err(io)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), EvalError> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ClassScore {
    fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            precision,
            recall,
            f1,
            tp,
            fp,
            fn_,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(rename = "FULL")]
    pub full: ClassScore,
    #[serde(rename = "SEMANTIC")]
    pub semantic: ClassScore,
    #[serde(rename = "TEMPORAL")]
    pub temporal: ClassScore,
    pub macro_f1: f64,
}

impl EvalReport {
    pub fn class(&self, label: DuplicateLabel) -> Option<&ClassScore> {
        match label {
            DuplicateLabel::Full => Some(&self.full),
            DuplicateLabel::Semantic => Some(&self.semantic),
            DuplicateLabel::Temporal => Some(&self.temporal),
            DuplicateLabel::None => None,
        }
    }
}

/// Per-class precision, recall and F1. Predictions absent from the gold set
/// are false positives; 0/0 ratios are 0. A NONE prediction only counts as
/// a miss for the gold class.
pub fn score(predicted: &[LabeledPair], gold: &GoldSet) -> Result<EvalReport, EvalError> {
    let mut seen = HashSet::new();
    // [tp, fp, fn] per positive class
    let mut counts = [[0usize; 3]; 3];
    let slot = |l: DuplicateLabel| DuplicateLabel::POSITIVE.iter().position(|c| *c == l);
    for p in predicted {
        let (a, b) = canonical_ids(&p.id_a, &p.id_b);
        if !seen.insert((a, b)) {
            return Err(EvalError::DuplicatePrediction(a.into(), b.into()));
        }
        let Some(pi) = slot(p.label) else {
            // an explicit NONE is a miss for the gold class
            if let Some(gi) = gold.get(a, b).and_then(slot) {
                counts[gi][2] += 1;
            }
            continue;
        };
        match gold.get(a, b) {
            Some(g) if g == p.label => counts[pi][0] += 1,
            g => {
                counts[pi][1] += 1;
                if let Some(gi) = g.and_then(slot) {
                    counts[gi][2] += 1;
                }
            }
        }
    }
    for (a, b, l) in gold.iter() {
        if !seen.contains(&(a, b)) {
            if let Some(gi) = slot(l) {
                counts[gi][2] += 1;
            }
        }
    }
    let s = |i: usize| ClassScore::from_counts(counts[i][0], counts[i][1], counts[i][2]);
    let (full, semantic, temporal) = (s(0), s(1), s(2));
    Ok(EvalReport {
        macro_f1: (full.f1 + semantic.f1 + temporal.f1) / 3.0,
        full,
        semantic,
        temporal,
    })
}

pub const RESULTS_HEADER: [&str; 5] = ["id1", "id2", "label", "distance", "reason"];

/// Results CSV: `id1,id2,label,distance,reason`; distance with six
/// decimals, empty for exact-fingerprint pairs.
pub fn write_results<W: Write>(w: W, pairs: &[LabeledPair]) -> Result<(), EvalError> {
    let mut wtr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| EvalError::Io(e.into());
    wtr.write_record(RESULTS_HEADER).map_err(io)?;
    for p in pairs {
        let d = p.distance.map(|d| format!("{d:.6}")).unwrap_or_default();
        wtr.write_record([&p.id_a, &p.id_b, p.label.as_str(), &d, &p.reason.to_string()])
            .map_err(io)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_results<R: Read>(reader: R) -> Result<Vec<LabeledPair>, EvalError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header_ok = rdr
        .headers()
        .map(|h| h.iter().collect::<Vec<_>>() == RESULTS_HEADER)
        .unwrap_or(false);
    if !header_ok {
        return Err(EvalError::Malformed {
            line: 1,
            message: format!("expected header {}", RESULTS_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let bad = |message: String| EvalError::Malformed { line, message };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let label: DuplicateLabel = rec[2].parse().map_err(bad)?;
        let distance = match &rec[3] {
            "" => None,
            d => Some(d.parse::<f64>().map_err(|e| bad(e.to_string()))?),
        };
        let reason: Reason = rec[4].parse().map_err(bad)?;
        out.push(LabeledPair {
            id_a: rec[0].to_string(),
            id_b: rec[1].to_string(),
            label,
            distance,
            reason,
        });
    }
    Ok(out)
}
