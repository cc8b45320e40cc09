//! SentiMix-style corpus handling: CoNLL parsing, label/language statistics,
//! stratified sampling and synthetic fixtures.
//!
//! Corpus file format: records separated by one blank line. The first line of
//! a record is `meta<TAB><uid><TAB><sentiment>`, every following line is
//! `<token><TAB><langtag>`.

use std::collections::{HashMap, HashSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-token language tag. Unrecognized input tags degrade to `Unk`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LangTag {
    /// English
    Lang1,
    /// Spanish
    Lang2,
    Other,
    Ne,
    Ambiguous,
    Mixed,
    Fw,
    Unk,
}

impl LangTag {
    pub fn parse(s: &str) -> LangTag {
        match s.trim() {
            "lang1" => LangTag::Lang1,
            "lang2" => LangTag::Lang2,
            "other" => LangTag::Other,
            "ne" => LangTag::Ne,
            "ambiguous" => LangTag::Ambiguous,
            "mixed" => LangTag::Mixed,
            "fw" => LangTag::Fw,
            _ => LangTag::Unk,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            LangTag::Lang1 => "lang1",
            LangTag::Lang2 => "lang2",
            LangTag::Other => "other",
            LangTag::Ne => "ne",
            LangTag::Ambiguous => "ambiguous",
            LangTag::Mixed => "mixed",
            LangTag::Fw => "fw",
            LangTag::Unk => "unk",
        }
    }
}

/// Sentiment label. Class order (negative < neutral < positive) is fixed and
/// doubles as the class index used by the models and metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sentiment {
    Negative,
    Neutral,
    Positive,
}

impl Sentiment {
    pub const ALL: [Sentiment; 3] = [Sentiment::Negative, Sentiment::Neutral, Sentiment::Positive];

    /// Case-insensitive parse of `positive|negative|neutral`.
    pub fn parse(s: &str) -> Option<Sentiment> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" => Some(Sentiment::Positive),
            "negative" => Some(Sentiment::Negative),
            "neutral" => Some(Sentiment::Neutral),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Sentiment::Negative => "negative",
            Sentiment::Neutral => "neutral",
            Sentiment::Positive => "positive",
        }
    }

    /// Class index in the fixed order negative=0, neutral=1, positive=2.
    pub fn index(&self) -> usize {
        match self {
            Sentiment::Negative => 0,
            Sentiment::Neutral => 1,
            Sentiment::Positive => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Sentiment> {
        Sentiment::ALL.get(i).copied()
    }
}

impl fmt::Display for Sentiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One annotated token. `text` never contains tab or newline characters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub lang: LangTag,
}

impl Token {
    pub fn new(text: impl Into<String>, lang: LangTag) -> Token {
        Token {
            text: text.into(),
            lang,
        }
    }
}

/// One tweet: a unique id, a non-empty token sequence and a sentiment label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tweet {
    pub uid: String,
    pub tokens: Vec<Token>,
    pub sentiment: Sentiment,
}

impl Tweet {
    /// The most frequent tag among lang1/lang2 over this tweet's tokens.
    /// Ties return `Mixed`; `Other` when neither tag occurs.
    pub fn mode_language(&self) -> LangTag {
        let mut n1 = 0usize;
        let mut n2 = 0usize;
        for tok in &self.tokens {
            match tok.lang {
                LangTag::Lang1 => n1 += 1,
                LangTag::Lang2 => n2 += 1,
                _ => {}
            }
        }
        if n1 == 0 && n2 == 0 {
            LangTag::Other
        } else if n1 > n2 {
            LangTag::Lang1
        } else if n2 > n1 {
            LangTag::Lang2
        } else {
            LangTag::Mixed
        }
    }

    /// Space-joined surface text.
    pub fn text(&self) -> String {
        self.tokens
            .iter()
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Label counts and proportions over a corpus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelDistribution {
    pub counts: HashMap<Sentiment, usize>,
    pub proportions: HashMap<Sentiment, f64>,
}

impl LabelDistribution {
    pub fn count(&self, s: Sentiment) -> usize {
        self.counts.get(&s).copied().unwrap_or(0)
    }

    pub fn proportion(&self, s: Sentiment) -> f64 {
        self.proportions.get(&s).copied().unwrap_or(0.0)
    }
}

/// An immutable parsed corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub tweets: Vec<Tweet>,
}

impl Corpus {
    pub fn new(tweets: Vec<Tweet>) -> Corpus {
        Corpus { tweets }
    }

    pub fn len(&self) -> usize {
        self.tweets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tweets.is_empty()
    }

    /// Parse the CoNLL-style corpus format. Errors carry 1-based line numbers.
    pub fn parse_conll(text: &str) -> Result<Corpus> {
        let mut tweets = Vec::new();
        let mut seen_uids: HashSet<String> = HashSet::new();

        let mut current: Option<(usize, String, Sentiment, Vec<Token>)> = None;
        for (idx, raw_line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
            if line.trim().is_empty() {
                if let Some(record) = current.take() {
                    tweets.push(finish_record(record)?);
                }
                continue;
            }
            match current {
                None => {
                    let mut fields = line.split('\t');
                    let head = fields.next().unwrap_or("");
                    if head != "meta" {
                        return Err(Error::parse(
                            lineno,
                            format!("expected a meta line, got {:?}", line),
                        ));
                    }
                    let uid = fields
                        .next()
                        .filter(|s| !s.trim().is_empty())
                        .ok_or_else(|| Error::parse(lineno, "meta line is missing the uid"))?
                        .trim()
                        .to_string();
                    let label_str = fields.next().ok_or_else(|| {
                        Error::parse(lineno, "meta line is missing the sentiment")
                    })?;
                    let sentiment = Sentiment::parse(label_str).ok_or_else(|| {
                        Error::parse(lineno, format!("unknown sentiment {:?}", label_str.trim()))
                    })?;
                    if !seen_uids.insert(uid.clone()) {
                        return Err(Error::parse(lineno, format!("duplicate uid {:?}", uid)));
                    }
                    current = Some((lineno, uid, sentiment, Vec::new()));
                }
                Some((_, _, _, ref mut tokens)) => {
                    let (text, tag) = match line.split_once('\t') {
                        Some((t, l)) => (t, LangTag::parse(l)),
                        // tokens without a tag column degrade to unk
                        None => (line, LangTag::Unk),
                    };
                    if text.is_empty() {
                        return Err(Error::parse(lineno, "empty token text"));
                    }
                    tokens.push(Token::new(text, tag));
                }
            }
        }
        if let Some(record) = current.take() {
            tweets.push(finish_record(record)?);
        }
        Ok(Corpus { tweets })
    }

    /// Serialize back into the CoNLL-style format; `parse_conll` inverts this.
    pub fn to_conll(&self) -> String {
        let mut out = String::new();
        for (i, tw) in self.tweets.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            out.push_str("meta\t");
            out.push_str(&tw.uid);
            out.push('\t');
            out.push_str(tw.sentiment.as_str());
            out.push('\n');
            for tok in &tw.tokens {
                out.push_str(&tok.text);
                out.push('\t');
                out.push_str(tok.lang.as_str());
                out.push('\n');
            }
        }
        out
    }

    /// Label counts and proportions. Errors on an empty corpus.
    pub fn label_distribution(&self) -> Result<LabelDistribution> {
        if self.tweets.is_empty() {
            return Err(Error::InvalidInput(
                "label distribution of an empty corpus".into(),
            ));
        }
        let mut counts: HashMap<Sentiment, usize> = HashMap::new();
        for s in Sentiment::ALL {
            counts.insert(s, 0);
        }
        for tw in &self.tweets {
            *counts.get_mut(&tw.sentiment).unwrap() += 1;
        }
        let total = self.tweets.len() as f64;
        let proportions = counts
            .iter()
            .map(|(&s, &c)| (s, c as f64 / total))
            .collect();
        Ok(LabelDistribution {
            counts,
            proportions,
        })
    }

    /// Fraction of tweets whose mode language is `tag`.
    pub fn mode_language_fraction(&self, tag: LangTag) -> f64 {
        if self.tweets.is_empty() {
            return 0.0;
        }
        let hits = self
            .tweets
            .iter()
            .filter(|t| t.mode_language() == tag)
            .count();
        hits as f64 / self.tweets.len() as f64
    }

    /// Stratified sample of `n` tweets. Per-class quotas come from
    /// largest-remainder apportionment of the corpus label counts; selection
    /// within a class is uniform without replacement under `seed`.
    pub fn stratified_sample(&self, n: usize, seed: u64) -> Result<Corpus> {
        if n > self.tweets.len() {
            return Err(Error::InvalidInput(format!(
                "sample size {} exceeds corpus size {}",
                n,
                self.tweets.len()
            )));
        }
        let counts: Vec<usize> = Sentiment::ALL
            .iter()
            .map(|&s| self.tweets.iter().filter(|t| t.sentiment == s).count())
            .collect();
        let quotas = largest_remainder(n, &counts);

        let mut sampled = Vec::with_capacity(n);
        for (class_idx, &quota) in quotas.iter().enumerate() {
            let class = Sentiment::ALL[class_idx];
            let mut indices: Vec<usize> = self
                .tweets
                .iter()
                .enumerate()
                .filter(|(_, t)| t.sentiment == class)
                .map(|(i, _)| i)
                .collect();
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, class_idx as u64));
            indices.shuffle(&mut rng);
            for &i in indices.iter().take(quota) {
                sampled.push(self.tweets[i].clone());
            }
        }
        Ok(Corpus { tweets: sampled })
    }
}

fn finish_record(
    (lineno, uid, sentiment, tokens): (usize, String, Sentiment, Vec<Token>),
) -> Result<Tweet> {
    if tokens.is_empty() {
        return Err(Error::parse(
            lineno,
            format!("record {:?} has no tokens", uid),
        ));
    }
    Ok(Tweet {
        uid,
        tokens,
        sentiment,
    })
}

/// Largest-remainder apportionment of `n` items over integer `weights`.
/// Remainder ties resolve to the lower index.
pub fn largest_remainder(n: usize, weights: &[usize]) -> Vec<usize> {
    let total: u128 = weights.iter().map(|&w| w as u128).sum();
    if total == 0 {
        return vec![0; weights.len()];
    }
    let mut quotas: Vec<usize> = Vec::with_capacity(weights.len());
    let mut remainders: Vec<(u128, usize)> = Vec::with_capacity(weights.len());
    let mut assigned = 0usize;
    for (i, &w) in weights.iter().enumerate() {
        let num = n as u128 * w as u128;
        let floor = (num / total) as usize;
        quotas.push(floor);
        assigned += floor;
        remainders.push((num % total, i));
    }
    // distribute leftovers by descending fractional remainder
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut left = n - assigned;
    for &(_, i) in &remainders {
        if left == 0 {
            break;
        }
        quotas[i] += 1;
        left -= 1;
    }
    quotas
}

pub(crate) fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 step over (seed, stream)
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Label weights for the synthetic corpus; mirrors the train-split label
/// distribution of the SentiMix Spanglish data (negative/neutral/positive).
const FIXTURE_LABEL_WEIGHTS: [usize; 3] = [2023, 3974, 6005];

const NEGATIVE_CUES: &[&str] = &["terrible", "awful", "horrible", "worst", "hate", "sad"];
const NEUTRAL_CUES: &[&str] = &["schedule", "update", "info", "meeting", "regular", "normal"];
const POSITIVE_CUES: &[&str] = &["great", "awesome", "love", "happy", "best", "amazing"];
const ENGLISH_FILLERS: &[&str] = &["the", "a", "is", "today", "very", "this", "so", "my"];
const SPANISH_FILLERS: &[&str] = &["que", "el", "la", "dia", "muy", "es", "pero", "como"];

/// Cue word pools per class, in class order. Pools are disjoint so a fixture
/// corpus is separable by construction.
pub fn fixture_cue_words(class: Sentiment) -> &'static [&'static str] {
    match class {
        Sentiment::Negative => NEGATIVE_CUES,
        Sentiment::Neutral => NEUTRAL_CUES,
        Sentiment::Positive => POSITIVE_CUES,
    }
}

/// Deterministic synthetic corpus: `n` tweets with class-separable cue words,
/// mixed lang1/lang2 tags, and label quotas apportioned like the SentiMix
/// train split.
pub fn generate_fixture(seed: u64, n: usize) -> Corpus {
    assert!(n >= 3, "fixture needs at least 3 tweets");
    let quotas = largest_remainder(n, &FIXTURE_LABEL_WEIGHTS);
    let mut labels: Vec<Sentiment> = Vec::with_capacity(n);
    for (i, &q) in quotas.iter().enumerate() {
        labels.extend(std::iter::repeat(Sentiment::ALL[i]).take(q));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0xf1c));
    labels.shuffle(&mut rng);

    let tweets = labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let cues = fixture_cue_words(label);
            let mut tokens: Vec<Token> = Vec::new();
            // one or two class cues plus two or three fillers, shuffled
            let n_cues = 1 + rng.gen_range(0..2usize);
            for _ in 0..n_cues {
                let cue = cues[rng.gen_range(0..cues.len())];
                tokens.push(Token::new(cue, LangTag::Lang1));
            }
            let n_fill = 2 + rng.gen_range(0..2usize);
            for _ in 0..n_fill {
                if rng.gen_bool(0.5) {
                    let w = ENGLISH_FILLERS[rng.gen_range(0..ENGLISH_FILLERS.len())];
                    tokens.push(Token::new(w, LangTag::Lang1));
                } else {
                    let w = SPANISH_FILLERS[rng.gen_range(0..SPANISH_FILLERS.len())];
                    tokens.push(Token::new(w, LangTag::Lang2));
                }
            }
            tokens.shuffle(&mut rng);
            Tweet {
                uid: format!("fx{}", i + 1),
                tokens,
                sentiment: label,
            }
        })
        .collect();
    Corpus { tweets }
}
