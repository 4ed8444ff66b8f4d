//! Synthetic corpus with planted duplicates.
//!
//! Base postings are drawn from a generated lowercase vocabulary in which
//! every word has exactly one synonym. Duplicates are planted per base
//! posting (at most one each):
//!
//! * FULL: case, whitespace and markup perturbations that cleaning undoes.
//! * SEMANTIC: one or two synonym swaps plus sentence shuffling, possibly
//!   rendered in a pseudo-language.
//! * TEMPORAL: either of the above with a shifted retrieval date.
//!
//! Pseudo-languages map each English word to a distinct foreign word and
//! back, so the dictionary translator recovers the English text exactly.
//!
//! With `metadata_signal` the generator also plants pairs just above the
//! base threshold: hard positives (gold SEMANTIC, same company and
//! location) and hard negatives (not duplicates, different company). No
//! single threshold separates them; company and location do.

use std::collections::{BTreeMap, HashMap};

use chrono::{Duration, NaiveDate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EvalError, GoldSet};
use crate::corpus::Posting;
use crate::dedup::DuplicateLabel;
use crate::embed::{HashedEmbedder, DEFAULT_DIM, DEFAULT_MAX_TOKENS};
use crate::scalar::l2;

/// Planted semantic duplicates lie below this embedding distance.
pub const POSITIVE_MARGIN: f64 = 0.20;
/// Unrelated postings lie above this distance.
pub const NEGATIVE_MARGIN: f64 = 0.40;
/// Distance band of hard positives and hard negatives.
pub const HARD_BAND: (f64, f64) = (0.255, 0.295);

const VOCAB_SIZE: usize = 4000;
const VOCAB_SEED: u64 = 0x5eed_0f70_6be5;
const CONSONANTS: &[u8] = b"bcdfghjklmnprstvw";
const VOWELS: &[u8] = b"aeiou";

const ROLES: &[&str] = &[
    "engineer", "developer", "nurse", "chef", "driver", "accountant", "analyst", "teacher", "electrician",
    "mechanic", "cashier", "cleaner", "consultant", "designer", "manager", "technician", "pharmacist", "plumber",
    "welder", "baker", "receptionist", "assistant", "auditor", "architect", "carpenter", "courier", "editor",
    "gardener", "librarian", "painter", "physician", "pilot", "recruiter", "scientist", "surveyor", "translator",
    "tutor", "waiter", "warehouseman", "writer",
];
const ADJECTIVES: &[&str] = &[
    "senior", "junior", "lead", "chief", "head", "trainee", "principal", "regional", "deputy", "associate",
    "certified", "temporary", "remote", "night", "mobile",
];
const SOURCES: &[&str] = &["portal-a", "portal-b", "portal-c", "portal-d"];
const COUNTRIES: &[&str] = &["DE", "FR", "IT", "ES", "PL", "NL", "AT", "SE"];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DupPlan {
    pub full_rate: f64,
    pub semantic_rate: f64,
    pub temporal_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_base: usize,
    pub plan: DupPlan,
    pub seed: u64,
    /// Plant hard positives and hard negatives around the base threshold.
    pub metadata_signal: bool,
    /// Hard positives and hard negatives, each as a fraction of `n_base`.
    pub hard_rate: f64,
    /// Embedder dimension the distance margins are measured with.
    pub dim: usize,
    pub max_tokens: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_base: 2000,
            plan: DupPlan {
                full_rate: 0.15,
                semantic_rate: 0.15,
                temporal_rate: 0.10,
            },
            seed: 0,
            metadata_signal: false,
            hard_rate: 0.05,
            dim: DEFAULT_DIM,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }
}

/// A word-bijection "language".
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PseudoLanguage {
    pub code: String,
    /// Foreign word to English word.
    pub to_english: BTreeMap<String, String>,
    from_english: HashMap<String, String>,
}

impl PseudoLanguage {
    pub fn foreign(&self, english: &str) -> Option<&str> {
        self.from_english.get(english).map(String::as_str)
    }
}

/// Description vocabulary: unique consonant-vowel words; word `2i` and
/// `2i + 1` are synonyms.
fn vocabulary() -> &'static [String] {
    static VOCAB: std::sync::OnceLock<Vec<String>> = std::sync::OnceLock::new();
    VOCAB.get_or_init(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(VOCAB_SEED);
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::with_capacity(VOCAB_SIZE);
        while out.len() < VOCAB_SIZE {
            let n_syl = rng.gen_range(2..=3);
            let mut w = String::new();
            for _ in 0..n_syl {
                w.push(CONSONANTS[rng.gen_range(0..CONSONANTS.len())] as char);
                w.push(VOWELS[rng.gen_range(0..VOWELS.len())] as char);
            }
            if !ROLES.contains(&w.as_str()) && !ADJECTIVES.contains(&w.as_str()) && seen.insert(w.clone()) {
                out.push(w);
            }
        }
        out
    })
}

fn synonym(word_idx: usize) -> usize {
    word_idx ^ 1
}

/// `n` pseudo-languages with codes `qaa`, `qab`, ... (the ISO 639 private-use
/// range). Every English word of the generator maps to `q<letter>` followed
/// by the reversed word, which keeps the map bijective and the languages
/// disjoint from English and from each other.
pub fn pseudo_languages(n: usize) -> Vec<PseudoLanguage> {
    assert!(n <= 26, "at most 26 pseudo-languages");
    let english: Vec<&str> = vocabulary()
        .iter()
        .map(String::as_str)
        .chain(ROLES.iter().copied())
        .chain(ADJECTIVES.iter().copied())
        .collect();
    (0..n)
        .map(|i| {
            let letter = (b'a' + i as u8) as char;
            let mut to_english = BTreeMap::new();
            let mut from_english = HashMap::new();
            for w in &english {
                let f = format!("q{letter}{}", w.chars().rev().collect::<String>());
                to_english.insert(f.clone(), w.to_string());
                from_english.insert(w.to_string(), f);
            }
            PseudoLanguage {
                code: format!("qa{letter}"),
                to_english,
                from_english,
            }
        })
        .collect()
}

/// Output of [`synth_corpus`].
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub postings: Vec<Posting>,
    pub gold: GoldSet,
    /// Foreign to English over all languages, for the dictionary translator.
    pub dictionary: BTreeMap<String, String>,
    /// English text of every posting as the pipeline sees it after
    /// translation (cleaning leaves generated text unchanged).
    pub english: BTreeMap<String, String>,
    /// Gold SEMANTIC pairs planted in the hard band.
    pub hard_positives: Vec<(String, String)>,
    /// Non-duplicate pairs planted in the hard band.
    pub hard_negatives: Vec<(String, String)>,
}

#[derive(Debug, Clone)]
struct Doc {
    title: Vec<String>,
    sentences: Vec<Vec<usize>>,
}

impl Doc {
    fn render(&self, lang: Option<&PseudoLanguage>) -> (String, String) {
        let vocab = vocabulary();
        let word = |w: &str| match lang {
            Some(l) => l.foreign(w).expect("word in dictionary").to_string(),
            None => w.to_string(),
        };
        let title = self.title.iter().map(|w| word(w)).collect::<Vec<_>>().join(" ");
        let description = self
            .sentences
            .iter()
            .map(|s| {
                let mut words: Vec<String> = s.iter().map(|&i| word(&vocab[i])).collect();
                if let Some(last) = words.last_mut() {
                    last.push('.');
                }
                words.join(" ")
            })
            .collect::<Vec<_>>()
            .join(" ");
        (title, description)
    }

    fn english(&self) -> String {
        let (t, d) = self.render(None);
        format!("{t} {d}")
    }

    fn positions(&self) -> Vec<(usize, usize)> {
        self.sentences
            .iter()
            .enumerate()
            .flat_map(|(s, ws)| (0..ws.len()).map(move |w| (s, w)))
            .collect()
    }
}

fn random_doc(rng: &mut ChaCha8Rng) -> Doc {
    let mut title = Vec::new();
    if rng.gen_bool(0.6) {
        title.push(ADJECTIVES[rng.gen_range(0..ADJECTIVES.len())].to_string());
    }
    title.push(ROLES[rng.gen_range(0..ROLES.len())].to_string());
    let n_sent = rng.gen_range(6..=9);
    let sentences = (0..n_sent)
        .map(|_| {
            let len = rng.gen_range(14..=22);
            (0..len).map(|_| rng.gen_range(0..VOCAB_SIZE)).collect()
        })
        .collect();
    Doc { title, sentences }
}

struct Meta {
    company: Option<String>,
    location: Option<String>,
    country: Option<String>,
    language: String,
    date: NaiveDate,
    source: String,
}

/// Case, whitespace and markup noise that cleaning removes again. Case is
/// changed per whole word so no lower-to-upper boundary appears inside one.
fn perturb(text: &str, rng: &mut ChaCha8Rng, wrap: &str) -> String {
    let mut out = String::new();
    for (i, w) in text.split(' ').enumerate() {
        if i > 0 {
            out.push_str(match rng.gen_range(0..10) {
                0 => "  ",
                1 => "\n",
                2 => " <br> ",
                3 => "<br/>",
                _ => " ",
            });
        }
        match rng.gen_range(0..8) {
            0 => out.push_str(&w.to_uppercase()),
            1 => {
                let mut c = w.chars();
                if let Some(f) = c.next() {
                    out.extend(f.to_uppercase());
                    out.push_str(c.as_str());
                }
            }
            _ => out.push_str(w),
        }
    }
    format!("<{wrap}>{out}</{wrap}> ")
}

struct Gen<'a> {
    rng: ChaCha8Rng,
    embedder: HashedEmbedder,
    languages: &'a [PseudoLanguage],
    companies: Vec<String>,
    locations: Vec<String>,
}

impl Gen<'_> {
    fn distance(&self, a: &Doc, b: &Doc) -> f64 {
        let va = self.embedder.embed_one::<f32>(&a.english());
        let vb = self.embedder.embed_one::<f32>(&b.english());
        l2(va.values(), vb.values())
    }

    /// Copy of `doc` with `n` synonym swaps at distinct random positions and
    /// shuffled sentences.
    fn variant(&mut self, doc: &Doc, n: usize) -> Doc {
        let mut out = doc.clone();
        let mut pos = doc.positions();
        pos.shuffle(&mut self.rng);
        for &(s, w) in pos.iter().take(n) {
            out.sentences[s][w] = synonym(out.sentences[s][w]);
        }
        out.sentences.shuffle(&mut self.rng);
        out
    }

    fn semantic_variant(&mut self, doc: &Doc) -> Result<Doc, EvalError> {
        for attempt in 0..50 {
            let n = if attempt < 10 { self.rng.gen_range(1..=2) } else { 1 };
            let v = self.variant(doc, n);
            if self.distance(doc, &v) < POSITIVE_MARGIN {
                return Ok(v);
            }
        }
        Err(EvalError::Config("could not plant a semantic duplicate inside the margin".into()))
    }

    /// Variant whose distance to `doc` lies in [`HARD_BAND`].
    fn hard_variant(&mut self, doc: &Doc) -> Result<Doc, EvalError> {
        for _ in 0..100 {
            let mut pos = doc.positions();
            pos.shuffle(&mut self.rng);
            let mut v = doc.clone();
            for &(s, w) in &pos {
                v.sentences[s][w] = synonym(v.sentences[s][w]);
                let d = self.distance(doc, &v);
                if d >= HARD_BAND.0 {
                    if d < HARD_BAND.1 {
                        v.sentences.shuffle(&mut self.rng);
                        return Ok(v);
                    }
                    break;
                }
            }
        }
        Err(EvalError::Config("could not plant a pair inside the hard band".into()))
    }

    fn pick<T: Clone>(&mut self, items: &[T]) -> T {
        items[self.rng.gen_range(0..items.len())].clone()
    }

    fn base_meta(&mut self, force_metadata: bool) -> Meta {
        let company = (force_metadata || self.rng.gen_bool(0.75)).then(|| {
            let c = self.companies.clone();
            self.pick(&c)
        });
        let location = (force_metadata || self.rng.gen_bool(0.5)).then(|| {
            let l = self.locations.clone();
            self.pick(&l)
        });
        let language = if self.languages.is_empty() || self.rng.gen_bool(0.4) {
            "en".to_string()
        } else {
            self.languages[self.rng.gen_range(0..self.languages.len())].code.clone()
        };
        Meta {
            company,
            location,
            country: self.rng.gen_bool(0.9).then(|| self.pick(COUNTRIES).to_string()),
            language,
            date: NaiveDate::from_ymd_opt(2023, 1, 1).expect("valid date") + Duration::days(self.rng.gen_range(0..365)),
            source: self.pick(SOURCES).to_string(),
        }
    }

    fn other_language(&mut self, current: &str) -> String {
        let mut options: Vec<String> = self.languages.iter().map(|l| l.code.clone()).collect();
        options.push("en".into());
        options.retain(|c| c != current);
        if options.is_empty() {
            current.to_string()
        } else {
            self.pick(&options)
        }
    }

    fn language(&self, code: &str) -> Option<&PseudoLanguage> {
        self.languages.iter().find(|l| l.code == code)
    }
}

fn name_pool(rng: &mut ChaCha8Rng, n: usize, suffixes: &[&str]) -> Vec<String> {
    let vocab = vocabulary();
    let mut out: Vec<String> = Vec::with_capacity(n);
    while out.len() < n {
        let w = &vocab[rng.gen_range(0..vocab.len())];
        let mut name = w[..1].to_uppercase() + &w[1..];
        if !suffixes.is_empty() {
            name.push(' ');
            name.push_str(suffixes[rng.gen_range(0..suffixes.len())]);
        }
        if !out.contains(&name) {
            out.push(name);
        }
    }
    out
}

/// Generates postings and the gold set of planted pairs. Deterministic for a
/// given configuration and language list.
pub fn synth_corpus(config: &SynthConfig, languages: &[PseudoLanguage]) -> Result<SynthCorpus, EvalError> {
    let plan = config.plan;
    let rates = [plan.full_rate, plan.semantic_rate, plan.temporal_rate];
    if rates.iter().any(|r| !(0.0..=1.0).contains(r)) || rates.iter().sum::<f64>() > 1.0 + 1e-12 {
        return Err(EvalError::Config("rates must be in [0, 1] and sum to at most 1".into()));
    }
    if !(0.0..=1.0).contains(&config.hard_rate) {
        return Err(EvalError::Config("hard_rate must be in [0, 1]".into()));
    }
    let embedder =
        HashedEmbedder::new(config.dim, config.max_tokens).map_err(|e| EvalError::Config(e.to_string()))?;
    let count = |r: f64| (r * config.n_base as f64).round() as usize;
    let (n_full, n_sem, n_temp) = (count(plan.full_rate), count(plan.semantic_rate), count(plan.temporal_rate));
    let n_hard = if config.metadata_signal { count(config.hard_rate) } else { 0 };
    let planned = n_full + n_sem + n_temp + 2 * n_hard;
    if planned > config.n_base {
        return Err(EvalError::Config(format!(
            "{planned} planted pairs need more than {} base postings",
            config.n_base
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let companies = name_pool(&mut rng, 300, &["GmbH", "Ltd", "SA", "AG", "Group"]);
    let locations = name_pool(&mut rng, 60, &[]);
    let mut g = Gen {
        rng,
        embedder,
        languages,
        companies,
        locations,
    };

    #[derive(Clone, Copy, PartialEq)]
    enum Plant {
        None,
        Full,
        Semantic,
        Temporal,
        HardPositive,
        HardNegative,
    }
    let mut plants = vec![Plant::None; config.n_base];
    let mut order: Vec<usize> = (0..config.n_base).collect();
    order.shuffle(&mut g.rng);
    let mut it = order.into_iter();
    for (kind, n) in [
        (Plant::Full, n_full),
        (Plant::Semantic, n_sem),
        (Plant::Temporal, n_temp),
        (Plant::HardPositive, n_hard),
        (Plant::HardNegative, n_hard),
    ] {
        for i in it.by_ref().take(n) {
            plants[i] = kind;
        }
    }

    // (posting, english text) in creation order; ids assigned after shuffling
    let mut items: Vec<(Posting, String)> = Vec::new();
    let mut gold_raw: Vec<(usize, usize, DuplicateLabel)> = Vec::new();
    let mut hard_pos_raw = Vec::new();
    let mut hard_neg_raw = Vec::new();

    let make = |doc: &Doc, meta: &Meta, g: &Gen, noisy: Option<&mut ChaCha8Rng>| -> (Posting, String) {
        let (mut title, mut description) = doc.render(g.language(&meta.language));
        if let Some(rng) = noisy {
            title = perturb(&title, rng, "b");
            description = perturb(&description, rng, "p");
        }
        (
            Posting {
                id: String::new(),
                title,
                description,
                company: meta.company.clone(),
                location: meta.location.clone(),
                country: meta.country.clone(),
                language: Some(meta.language.clone()),
                retrieval_date: meta.date,
                source: meta.source.clone(),
            },
            doc.english(),
        )
    };

    for plant in plants {
        let hard = matches!(plant, Plant::HardPositive | Plant::HardNegative);
        let doc = random_doc(&mut g.rng);
        let meta = g.base_meta(hard);
        let base = items.len();
        items.push(make(&doc, &meta, &g, None));

        let mut dup_meta = Meta {
            source: g.pick(SOURCES).to_string(),
            ..meta
        };
        let (dup_doc, label, noisy) = match plant {
            Plant::None => continue,
            Plant::Full => (doc, DuplicateLabel::Full, true),
            Plant::Semantic => (g.semantic_variant(&doc)?, DuplicateLabel::Semantic, false),
            Plant::Temporal => {
                dup_meta.date += Duration::days(g.rng.gen_range(1..=90));
                if g.rng.gen_bool(0.5) {
                    (doc, DuplicateLabel::Temporal, true)
                } else {
                    (g.semantic_variant(&doc)?, DuplicateLabel::Temporal, false)
                }
            }
            Plant::HardPositive => (g.hard_variant(&doc)?, DuplicateLabel::Semantic, false),
            Plant::HardNegative => {
                let current = dup_meta.company.clone();
                while dup_meta.company == current {
                    let c = g.companies.clone();
                    dup_meta.company = Some(g.pick(&c));
                }
                (g.hard_variant(&doc)?, DuplicateLabel::None, false)
            }
        };
        if !noisy && matches!(plant, Plant::Semantic | Plant::Temporal) && g.rng.gen_bool(0.5) {
            dup_meta.language = g.other_language(&dup_meta.language);
        }
        let dup = items.len();
        let mut noise_rng = ChaCha8Rng::seed_from_u64(g.rng.gen());
        items.push(make(&dup_doc, &dup_meta, &g, noisy.then_some(&mut noise_rng)));
        match plant {
            Plant::HardNegative => hard_neg_raw.push((base, dup)),
            Plant::HardPositive => {
                hard_pos_raw.push((base, dup));
                gold_raw.push((base, dup, label));
            }
            _ => gold_raw.push((base, dup, label)),
        }
    }

    let mut perm: Vec<usize> = (0..items.len()).collect();
    perm.shuffle(&mut g.rng);
    // perm[slot] = creation index; invert to name each item by its slot
    let mut slot_of = vec![0usize; items.len()];
    for (slot, &i) in perm.iter().enumerate() {
        slot_of[i] = slot;
    }
    let width = items.len().max(1).to_string().len().max(5);
    let id_of = |i: usize| format!("job{:0width$}", slot_of[i]);
    for (i, (p, _)) in items.iter_mut().enumerate() {
        p.id = id_of(i);
    }

    let mut gold = GoldSet::new();
    for (a, b, l) in gold_raw {
        gold.insert(&id_of(a), &id_of(b), l)?;
    }
    let pair = |(a, b): (usize, usize)| {
        let (x, y) = (id_of(a), id_of(b));
        if x <= y {
            (x, y)
        } else {
            (y, x)
        }
    };
    let hard_positives = hard_pos_raw.into_iter().map(pair).collect();
    let hard_negatives = hard_neg_raw.into_iter().map(pair).collect();

    let english = items.iter().map(|(p, e)| (p.id.clone(), e.clone())).collect();
    let mut postings: Vec<Posting> = items.into_iter().map(|(p, _)| p).collect();
    postings.sort_by(|a, b| a.id.cmp(&b.id));

    let mut dictionary = BTreeMap::new();
    for l in languages {
        dictionary.extend(l.to_english.iter().map(|(k, v)| (k.clone(), v.clone())));
    }
    Ok(SynthCorpus {
        postings,
        gold,
        dictionary,
        english,
        hard_positives,
        hard_negatives,
    })
}
