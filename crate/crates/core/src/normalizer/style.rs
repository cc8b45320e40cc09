//! Stylistic-pattern annotation: allcaps, elongated, repeated, emphasized
//! and censored words.

use serde::{Deserialize, Serialize};

use super::unigram::UnigramModel;

/// Annotation order is canonical; `annotations` lists are kept sorted by it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StyleAnnotation {
    Allcaps,
    Elongated,
    Repeated,
    Emphasized,
    Censored,
}

impl StyleAnnotation {
    pub fn token(&self) -> &'static str {
        match self {
            StyleAnnotation::Allcaps => "<allcaps>",
            StyleAnnotation::Elongated => "<elongated>",
            StyleAnnotation::Repeated => "<repeated>",
            StyleAnnotation::Emphasized => "<emphasized>",
            StyleAnnotation::Censored => "<censored>",
        }
    }

    /// Inverse of `token()`.
    pub fn parse_token(s: &str) -> Option<StyleAnnotation> {
        match s {
            "<allcaps>" => Some(StyleAnnotation::Allcaps),
            "<elongated>" => Some(StyleAnnotation::Elongated),
            "<repeated>" => Some(StyleAnnotation::Repeated),
            "<emphasized>" => Some(StyleAnnotation::Emphasized),
            "<censored>" => Some(StyleAnnotation::Censored),
            _ => None,
        }
    }
}

/// A canonical surface form plus its ordered style annotations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizedToken {
    pub surface: String,
    pub annotations: Vec<StyleAnnotation>,
}

impl NormalizedToken {
    pub fn plain(surface: impl Into<String>) -> NormalizedToken {
        NormalizedToken {
            surface: surface.into(),
            annotations: Vec::new(),
        }
    }

    pub(crate) fn push_annotation(&mut self, ann: StyleAnnotation) {
        if !self.annotations.contains(&ann) {
            self.annotations.push(ann);
            self.annotations.sort();
        }
    }
}

fn is_punct(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

fn all_alphabetic(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_alphabetic())
}

/// `*word*` / `_word_`, possibly stacked like `__word__`.
fn unwrap_emphasis(s: &str) -> Option<String> {
    let chars: Vec<char> = s.chars().collect();
    if chars.len() < 3 {
        return None;
    }
    let wrap = chars[0];
    if (wrap != '*' && wrap != '_') || chars[chars.len() - 1] != wrap {
        return None;
    }
    let inner: String = chars[1..chars.len() - 1].iter().collect();
    if inner.is_empty() || !inner.chars().any(|c| c.is_alphanumeric()) {
        return None;
    }
    Some(inner)
}

/// Collapse every character run of length >= 3, choosing per run between
/// keeping one or two characters by the resulting word's unigram frequency.
/// Falls back to the all-ones reduction on ties.
fn reduce_elongation(word: &str, unigrams: &UnigramModel) -> Option<String> {
    let chars: Vec<char> = word.chars().collect();
    let mut runs: Vec<(usize, usize)> = Vec::new(); // (start, len)
    let mut i = 0;
    while i < chars.len() {
        let mut j = i + 1;
        while j < chars.len() && chars[j] == chars[i] {
            j += 1;
        }
        if j - i >= 3 {
            runs.push((i, j - i));
        }
        i = j;
    }
    if runs.is_empty() {
        return None;
    }

    // enumerate target lengths {1,2} per run; the all-ones combination comes
    // first so ties prefer it
    let mut best: Option<(u64, String)> = None;
    for combo in 0..(1usize << runs.len()) {
        let mut out = String::new();
        let mut pos = 0;
        for (r, &(start, len)) in runs.iter().enumerate() {
            out.extend(&chars[pos..start]);
            let keep = if combo & (1 << r) == 0 { 1 } else { 2 };
            for _ in 0..keep {
                out.push(chars[start]);
            }
            pos = start + len;
        }
        out.extend(&chars[pos..]);
        let score = unigrams.frequency(&out);
        match &best {
            Some((s, _)) if *s >= score => {}
            _ => best = Some((score, out)),
        }
    }
    best.map(|(_, w)| w)
}

/// Apply the stylistic rules to one non-entity token.
pub fn annotate_style(token: &str, unigrams: &UnigramModel) -> NormalizedToken {
    let chars: Vec<char> = token.chars().collect();

    // a run of >= 2 identical punctuation marks collapses to one
    if chars.len() >= 2 && is_punct(chars[0]) && chars.iter().all(|&c| c == chars[0]) {
        let mut nt = NormalizedToken::plain(chars[0].to_string());
        nt.push_annotation(StyleAnnotation::Repeated);
        return nt;
    }

    let mut annotations: Vec<StyleAnnotation> = Vec::new();
    let mut surface = token.to_string();

    while let Some(inner) = unwrap_emphasis(&surface) {
        surface = inner;
        if !annotations.contains(&StyleAnnotation::Emphasized) {
            annotations.push(StyleAnnotation::Emphasized);
        }
    }

    // censored words keep their surface
    let has_letter = surface.chars().any(|c| c.is_alphabetic());
    if has_letter && surface.contains('*') {
        annotations.push(StyleAnnotation::Censored);
        annotations.sort();
        return NormalizedToken {
            surface,
            annotations,
        };
    }

    if surface.chars().count() >= 2
        && all_alphabetic(&surface)
        && surface.chars().all(|c| c.is_uppercase())
    {
        surface = surface.to_lowercase();
        annotations.push(StyleAnnotation::Allcaps);
    }

    if all_alphabetic(&surface) {
        if let Some(reduced) = reduce_elongation(&surface, unigrams) {
            surface = reduced;
            annotations.push(StyleAnnotation::Elongated);
        }
    }

    annotations.sort();
    NormalizedToken {
        surface,
        annotations,
    }
}
