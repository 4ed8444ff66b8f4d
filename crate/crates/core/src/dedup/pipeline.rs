//! End-to-end run: canonicalize, group exact duplicates, translate and embed
//! one representative per group, retrieve k-NN candidates, apply rules, and
//! classify. Every stage is public so callers can run them one at a time.

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{
    apply_rules, candidate_pairs, classify, expand_exact_groups, saturation_report, threshold_sweep, CandidatePair,
    Candidates, LabeledPair, Reason, RuleAction, SaturationReport, SweepRow,
};
use crate::config::{EmbedBackend, Mode, PipelineConfig};
use crate::corpus::{pair_count, Posting, UNKNOWN_LANGUAGE};
use crate::embed::{embed_batch, truncation_report, Embedder, EmbeddingVector, HashedEmbedder, RemoteEmbedder, TruncationReport};
use crate::error::Error;
use crate::index::{IndexConfig, IndexKind, VectorIndex};
use crate::normalize::{canonicalize_all, group_exact, CanonicalText, ExactGroup, Fingerprint, NormalizeConfig};
use crate::translate::{
    make_backend, translate_batch, TranslateOptions, TranslationCache, TranslationRequest, Translator, DEFAULT_TARGET,
};

use super::ExpertRule;

/// Cleaned texts and their exact-duplicate groups.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub canonicals: Vec<CanonicalText>,
    pub groups: Vec<ExactGroup>,
}

pub fn prepare(postings: &[Posting], config: &NormalizeConfig) -> Result<Prepared, Error> {
    let canonicals = canonicalize_all(postings, config);
    let groups = group_exact(&canonicals)?;
    Ok(Prepared { canonicals, groups })
}

/// Text of one group representative on its way to the embedder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepText {
    pub id: String,
    pub fingerprint: Fingerprint,
    pub text: String,
}

/// Representative of each group with its cleaned text, in group order.
pub fn representatives(prepared: &Prepared) -> Vec<RepText> {
    let by_id: HashMap<&str, &CanonicalText> =
        prepared.canonicals.iter().map(|c| (c.source_id.as_str(), c)).collect();
    prepared
        .groups
        .iter()
        .map(|g| {
            let c = by_id[g.representative_id.as_str()];
            RepText {
                id: c.source_id.clone(),
                fingerprint: c.fingerprint,
                text: c.text.clone(),
            }
        })
        .collect()
}

/// Translates representatives into English. Texts already tagged with the
/// target language are passed through untouched.
pub fn translate_representatives<B: Translator + ?Sized>(
    reps: &[RepText],
    postings: &[Posting],
    backend: &B,
    cache: &TranslationCache,
    options: &TranslateOptions,
) -> Result<Vec<RepText>, Error> {
    let langs: HashMap<&str, Option<&str>> = postings
        .iter()
        .map(|p| (p.id.as_str(), p.language.as_deref()))
        .collect();
    let mut todo = Vec::new();
    let mut requests = Vec::new();
    for (i, r) in reps.iter().enumerate() {
        let lang = langs.get(r.id.as_str()).copied().flatten();
        if lang == Some(DEFAULT_TARGET) {
            continue;
        }
        let source = lang.filter(|l| *l != UNKNOWN_LANGUAGE).map(str::to_string);
        todo.push(i);
        requests.push(TranslationRequest::new(r.fingerprint, r.text.clone(), source));
    }
    let translated = translate_batch(&requests, backend, cache, options)?;
    let mut out = reps.to_vec();
    for (i, t) in todo.into_iter().zip(translated) {
        out[i].text = t;
    }
    Ok(out)
}

/// Embeds texts; records whose text has no tokens get a zero vector and are
/// left out. Returns the kept vectors and the number left out.
pub fn embed_texts<E: Embedder<f32> + ?Sized>(
    texts: &[RepText],
    embedder: &E,
) -> Result<(Vec<(String, EmbeddingVector)>, usize), Error> {
    let raw: Vec<String> = texts.iter().map(|t| t.text.clone()).collect();
    let vectors = embed_batch(&raw, embedder)?;
    let mut kept = Vec::with_capacity(vectors.len());
    let mut zeros = 0;
    for (t, v) in texts.iter().zip(vectors) {
        if v.is_zero() {
            zeros += 1;
        } else {
            kept.push((t.id.clone(), v));
        }
    }
    Ok((kept, zeros))
}

/// Candidates and the number of distance evaluations spent finding them.
#[derive(Debug, Clone)]
pub struct Detection {
    pub candidates: Candidates,
    pub distance_evaluations: u64,
}

pub fn detect(index: &VectorIndex, vectors: &[(String, EmbeddingVector)], k: usize) -> Result<Detection, Error> {
    index.reset_comparisons();
    let candidates = candidate_pairs(index, vectors, k)?;
    Ok(Detection {
        candidates,
        distance_evaluations: index.comparisons(),
    })
}

/// Labels exact groups and the candidate pairs that survive the rules.
/// Semantic decisions made between representatives are expanded to every
/// cross pair of their groups. Output is sorted by `(id_a, id_b)`.
pub fn label_pairs(
    postings: &[Posting],
    prepared: &Prepared,
    candidates: &[CandidatePair],
    rules: &[ExpertRule],
    theta: f64,
) -> Result<Vec<LabeledPair>, Error> {
    let by_id: HashMap<&str, &Posting> = postings.iter().map(|p| (p.id.as_str(), p)).collect();
    let fps: HashMap<&str, Fingerprint> = prepared
        .canonicals
        .iter()
        .map(|c| (c.source_id.as_str(), c.fingerprint))
        .collect();
    let members: HashMap<&str, &ExactGroup> = prepared
        .groups
        .iter()
        .map(|g| (g.representative_id.as_str(), g))
        .collect();

    let mut out = expand_exact_groups(&prepared.groups, &by_id, &fps)?;
    for kept in apply_rules(candidates, &by_id, rules, theta)? {
        let reason = match rules.get(kept.rule) {
            Some(r) if !(r.is_catch_all() && r.action == RuleAction::Threshold(None)) => Reason::Rule(kept.rule),
            _ => Reason::SemanticThreshold,
        };
        let group = |id: &str| {
            members
                .get(id)
                .map(|g| g.member_ids.iter().map(String::as_str).collect::<Vec<_>>())
                .unwrap_or_default()
        };
        let (ga, gb) = (group(&kept.pair.id_a), group(&kept.pair.id_b));
        if ga.is_empty() || gb.is_empty() {
            return Err(Error::Data(format!(
                "candidate pair ({}, {}) is not between group representatives",
                kept.pair.id_a, kept.pair.id_b
            )));
        }
        for a in &ga {
            for b in &gb {
                let (x, y) = super::canonical_ids(a, b);
                let label = classify(x, y, &by_id, &fps, true)?;
                out.push(LabeledPair {
                    id_a: x.to_string(),
                    id_b: y.to_string(),
                    label,
                    distance: Some(kept.pair.distance),
                    reason,
                });
            }
        }
    }
    out.sort_by(|p, q| (&p.id_a, &p.id_b).cmp(&(&q.id_a, &q.id_b)));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub n_postings: usize,
    /// Distinct canonical texts.
    pub n_groups: usize,
    pub n_embedded: usize,
    pub n_zero_vectors: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonCounters {
    /// Brute-force pairs over all postings.
    pub all_pairs: u128,
    /// Brute-force pairs after exact-duplicate collapsing.
    pub unique_pairs: u128,
    /// Vector distances evaluated by the index (centroids excluded).
    pub index_distance_evaluations: u64,
    pub candidate_pairs: usize,
    /// Candidate pairs kept by thresholds and rules.
    pub kept_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: Mode,
    pub k: usize,
    pub theta: f64,
    pub index_kind: IndexKind,
    pub n_rules: usize,
    pub counts: Counts,
    pub comparisons: ComparisonCounters,
    pub timings: Vec<StageTiming>,
    pub truncation: TruncationReport,
    pub saturation: SaturationReport,
    pub sweep: Vec<SweepRow>,
    pub label_counts: BTreeMap<String, usize>,
}

/// Translator, embedder and cache used by a run.
pub struct Backends {
    /// Required in two-step mode.
    pub translator: Option<Box<dyn Translator>>,
    pub embedder: Box<dyn Embedder<f32>>,
    pub cache: TranslationCache,
}

impl Backends {
    pub fn from_config(config: &PipelineConfig) -> Result<Self, Error> {
        let translator = match (config.mode, &config.translate.backend) {
            (Mode::TwoStep, Some(kind)) => Some(make_backend(kind)?),
            (Mode::TwoStep, None) => return Err(Error::Config("two_step mode requires a translate.backend".into())),
            (Mode::Multilingual, _) => None,
        };
        let embedder: Box<dyn Embedder<f32>> = match &config.embed.backend {
            EmbedBackend::Hashed => Box::new(HashedEmbedder::new(config.embed.dim, config.embed.max_tokens)?),
            EmbedBackend::Remote { endpoint } => Box::new(RemoteEmbedder::new(
                endpoint,
                config.embed.dim,
                std::env::var("DEDUP_EMBED_API_KEY").ok(),
                config.embed.batch_size,
                config.embed.max_in_flight,
                config.translate.retry.clone(),
            )?),
        };
        let cache = match &config.translate.cache_path {
            Some(p) => TranslationCache::open(p)?,
            None => TranslationCache::in_memory(),
        };
        Ok(Self {
            translator,
            embedder,
            cache,
        })
    }
}

/// Everything a run produces.
pub struct PipelineRun {
    pub pairs: Vec<LabeledPair>,
    pub report: RunReport,
    /// `None` when no record had any tokens.
    pub index: Option<VectorIndex>,
    pub prepared: Prepared,
    pub candidates: Vec<CandidatePair>,
}

pub fn translate_options(config: &PipelineConfig) -> TranslateOptions {
    TranslateOptions {
        max_in_flight: config.translate.max_in_flight,
        batch_size: config.translate.batch_size,
        retry: config.translate.retry.clone(),
    }
}

pub fn index_config(config: &PipelineConfig) -> IndexConfig {
    IndexConfig {
        dim: config.embed.dim,
        ..config.index.clone()
    }
}

struct Timer(Vec<StageTiming>, Instant);

impl Timer {
    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.0.push(StageTiming {
            stage: stage.to_string(),
            seconds: (now - self.1).as_secs_f64(),
        });
        log::info!("stage {stage} done in {:.3} s", (now - self.1).as_secs_f64());
        self.1 = now;
    }
}

pub fn run_pipeline(postings: &[Posting], config: &PipelineConfig, backends: &Backends) -> Result<PipelineRun, Error> {
    config.validate()?;
    let mut timer = Timer(Vec::new(), Instant::now());

    let prepared = prepare(postings, &config.normalize)?;
    timer.lap("normalize");

    let reps = representatives(&prepared);
    let texts = match config.mode {
        Mode::TwoStep => {
            let t = backends
                .translator
                .as_deref()
                .ok_or_else(|| Error::Config("two_step mode requires a translator".into()))?;
            translate_representatives(&reps, postings, t, &backends.cache, &translate_options(config))?
        }
        Mode::Multilingual => reps,
    };
    timer.lap("translate");

    let truncation = truncation_report(&texts.iter().map(|t| t.text.as_str()).collect::<Vec<_>>(), config.embed.max_tokens);
    let (vectors, n_zero) = embed_texts(&texts, backends.embedder.as_ref())?;
    timer.lap("embed");

    let index = if vectors.is_empty() {
        None
    } else {
        Some(VectorIndex::build(&vectors, &index_config(config))?)
    };
    timer.lap("index");

    let mut run = finish(postings, config, prepared, &vectors, index, n_zero, truncation, &mut timer)?;
    run.report.timings = timer.0;
    Ok(run)
}

/// Candidate retrieval, rules and classification over an already built
/// index. `vectors` are the indexed representatives.
#[allow(clippy::too_many_arguments)]
fn finish(
    postings: &[Posting],
    config: &PipelineConfig,
    prepared: Prepared,
    vectors: &[(String, EmbeddingVector)],
    index: Option<VectorIndex>,
    n_zero: usize,
    truncation: TruncationReport,
    timer: &mut Timer,
) -> Result<PipelineRun, Error> {
    let k = config.dedup.k;
    let theta = config.dedup.base_theta;
    let detection = match &index {
        Some(ix) => detect(ix, vectors, k)?,
        None => Detection {
            candidates: Candidates {
                pairs: Vec::new(),
                neighbors: Vec::new(),
            },
            distance_evaluations: 0,
        },
    };
    timer.lap("candidates");

    let pairs = label_pairs(postings, &prepared, &detection.candidates.pairs, &config.dedup.rules, theta)?;
    let kept_pairs = {
        let by_id: HashMap<&str, &Posting> = postings.iter().map(|p| (p.id.as_str(), p)).collect();
        apply_rules(&detection.candidates.pairs, &by_id, &config.dedup.rules, theta)?.len()
    };
    timer.lap("classify");

    let mut label_counts = BTreeMap::new();
    for p in &pairs {
        *label_counts.entry(p.label.to_string()).or_insert(0) += 1;
    }
    let report = RunReport {
        mode: config.mode,
        k,
        theta,
        index_kind: config.index.kind,
        n_rules: config.dedup.rules.len(),
        counts: Counts {
            n_postings: postings.len(),
            n_groups: prepared.groups.len(),
            n_embedded: vectors.len(),
            n_zero_vectors: n_zero,
        },
        comparisons: ComparisonCounters {
            all_pairs: pair_count(postings.len() as u64),
            unique_pairs: pair_count(prepared.groups.len() as u64),
            index_distance_evaluations: detection.distance_evaluations,
            candidate_pairs: detection.candidates.pairs.len(),
            kept_pairs,
        },
        timings: Vec::new(),
        truncation,
        saturation: saturation_report(&detection.candidates.neighbors, theta, k),
        sweep: threshold_sweep(&detection.candidates.pairs, &config.dedup.sweep)?,
        label_counts,
    };
    Ok(PipelineRun {
        pairs,
        report,
        index,
        prepared,
        candidates: detection.candidates.pairs,
    })
}

/// The tail of [`run_pipeline`] for callers that produced the index and
/// translated texts themselves (stage by stage). `texts` are the texts that
/// were embedded, one per group.
pub fn run_from_index(
    postings: &[Posting],
    config: &PipelineConfig,
    texts: &[RepText],
    index: Option<VectorIndex>,
) -> Result<PipelineRun, Error> {
    config.validate()?;
    let mut timer = Timer(Vec::new(), Instant::now());
    let prepared = prepare(postings, &config.normalize)?;
    timer.lap("normalize");
    let truncation = truncation_report(&texts.iter().map(|t| t.text.as_str()).collect::<Vec<_>>(), config.embed.max_tokens);
    let mut index = index;
    if let Some(ix) = index.as_mut() {
        if ix.kind() == IndexKind::Ivf {
            ix.set_nprobe(config.index.nprobe);
        }
    }
    let vectors = index.as_ref().map(|ix| ix.to_vectors()).unwrap_or_default();
    let n_zero = prepared.groups.len().saturating_sub(vectors.len());
    let mut run = finish(postings, config, prepared, &vectors, index, n_zero, truncation, &mut timer)?;
    run.report.timings = timer.0;
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dedup::DuplicateLabel;
    use crate::translate::IdentityTranslator;
    use chrono::NaiveDate;

    fn posting(id: &str, text: &str, day: u32) -> Posting {
        Posting {
            id: id.into(),
            title: text.into(),
            description: String::new(),
            company: None,
            location: None,
            country: None,
            language: Some("en".into()),
            retrieval_date: NaiveDate::from_ymd_opt(2024, 3, day).unwrap(),
            source: "s".into(),
        }
    }

    fn backends() -> Backends {
        Backends {
            translator: Some(Box::new(IdentityTranslator)),
            embedder: Box::new(HashedEmbedder::default()),
            cache: TranslationCache::in_memory(),
        }
    }

    fn config() -> PipelineConfig {
        let mut c = PipelineConfig::default();
        c.translate.backend = Some(crate::translate::BackendKind::Identity);
        c
    }

    #[test]
    fn single_posting_has_no_pairs() {
        let run = run_pipeline(&[posting("a", "chef wanted", 1)], &config(), &backends()).unwrap();
        assert!(run.pairs.is_empty());
        assert_eq!(run.report.counts.n_embedded, 1);
    }

    #[test]
    fn identical_postings_are_full() {
        let ps = [posting("a", "Chef wanted", 1), posting("b", "chef  WANTED", 1)];
        let run = run_pipeline(&ps, &config(), &backends()).unwrap();
        assert_eq!(run.pairs.len(), 1);
        assert_eq!(run.pairs[0].label, DuplicateLabel::Full);
        assert_eq!(run.pairs[0].reason, Reason::ExactFingerprint);
        assert_eq!(run.report.counts.n_groups, 1);
    }

    #[test]
    fn semantic_pairs_expand_over_groups() {
        let long = |extra: &str| {
            let mut s: String = (0..60).map(|i| format!("word{i} ")).collect();
            s.push_str(extra);
            s
        };
        let ps = [
            posting("a", &long("alpha"), 1),
            posting("b", &long("alpha"), 1),
            posting("c", &long("beta"), 2),
            posting("z", "something else entirely", 1),
        ];
        let run = run_pipeline(&ps, &config(), &backends()).unwrap();
        let got: Vec<_> = run
            .pairs
            .iter()
            .map(|p| (p.id_a.as_str(), p.id_b.as_str(), p.label))
            .collect();
        assert_eq!(
            got,
            [
                ("a", "b", DuplicateLabel::Full),
                ("a", "c", DuplicateLabel::Temporal),
                ("b", "c", DuplicateLabel::Temporal)
            ]
        );
        assert_eq!(run.report.comparisons.all_pairs, 6);
        assert_eq!(run.report.comparisons.unique_pairs, 3);
    }

    #[test]
    fn empty_text_is_not_indexed() {
        let ps = [posting("a", "<br>", 1), posting("b", "cook", 1)];
        let run = run_pipeline(&ps, &config(), &backends()).unwrap();
        assert_eq!(run.report.counts.n_zero_vectors, 1);
        assert_eq!(run.index.unwrap().len(), 1);
    }
}
