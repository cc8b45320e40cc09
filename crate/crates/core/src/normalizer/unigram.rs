//! Word-frequency model backing the segmenter, spellchecker and elongation
//! reduction. Loaded from plain `<word><SPACE><count>` lines or counted from
//! a corpus.

use std::collections::{BTreeSet, HashMap};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct UnigramModel {
    frequency: HashMap<String, u64>,
    total: u64,
    alphabet: BTreeSet<char>,
}

impl UnigramModel {
    pub fn empty() -> UnigramModel {
        UnigramModel::default()
    }

    pub fn from_counts<I, S>(counts: I) -> UnigramModel
    where
        I: IntoIterator<Item = (S, u64)>,
        S: Into<String>,
    {
        let mut model = UnigramModel::empty();
        for (word, count) in counts {
            model.add(word.into(), count);
        }
        model
    }

    /// Count lowercased token surfaces over a corpus.
    pub fn from_corpus(corpus: &Corpus) -> UnigramModel {
        let mut model = UnigramModel::empty();
        for tweet in &corpus.tweets {
            for token in &tweet.tokens {
                model.add(token.text.to_lowercase(), 1);
            }
        }
        model
    }

    /// Parse `<word><SPACE><count>` lines; blank lines are ignored.
    pub fn parse(text: &str) -> Result<UnigramModel> {
        let mut model = UnigramModel::empty();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (word, count) = line
                .rsplit_once(' ')
                .ok_or_else(|| Error::parse(idx + 1, "expected `<word> <count>`"))?;
            let count: u64 = count
                .trim()
                .parse()
                .map_err(|_| Error::parse(idx + 1, format!("bad count {:?}", count)))?;
            if count == 0 {
                return Err(Error::parse(idx + 1, "count must be positive"));
            }
            model.add(word.trim().to_string(), count);
        }
        Ok(model)
    }

    fn add(&mut self, word: String, count: u64) {
        if word.is_empty() || count == 0 {
            return;
        }
        self.alphabet.extend(word.chars());
        self.total += count;
        *self.frequency.entry(word).or_insert(0) += count;
    }

    pub fn frequency(&self, word: &str) -> u64 {
        self.frequency.get(word).copied().unwrap_or(0)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.frequency.contains_key(word)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.frequency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequency.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = (&str, u64)> {
        self.frequency.iter().map(|(w, &c)| (w.as_str(), c))
    }

    /// Characters occurring in model words; the spellchecker's edit alphabet.
    pub fn alphabet(&self) -> impl Iterator<Item = char> + '_ {
        self.alphabet.iter().copied()
    }

    /// Natural-log probability. Unseen words score `1 / (total * 10)`, with
    /// `total` clamped to 1 so an empty model stays finite.
    pub fn log_prob(&self, word: &str) -> f64 {
        let total = self.total.max(1) as f64;
        match self.frequency(word) {
            0 => (1.0 / (total * 10.0)).ln(),
            f => (f as f64 / total).ln(),
        }
    }
}
