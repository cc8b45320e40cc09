//! Spell correction: highest-frequency in-model word within edit distance 1.

use std::collections::BTreeSet;

use super::unigram::UnigramModel;

/// Return `word` if it is in the model, otherwise the most frequent model
/// word at Levenshtein distance 1 (ties break lexicographically), otherwise
/// the input unchanged.
pub fn spell_correct(word: &str, unigrams: &UnigramModel) -> String {
    if word.is_empty() || unigrams.contains(word) {
        return word.to_string();
    }
    let alphabet: Vec<char> = unigrams.alphabet().collect();
    let mut best: Option<(u64, String)> = None;
    // edits1 iterates in lexicographic order, so on frequency ties the
    // strictly-greater test keeps the lexicographically smaller word
    for candidate in edits1(word, &alphabet) {
        let freq = unigrams.frequency(&candidate);
        if freq == 0 {
            continue;
        }
        match &best {
            Some((bf, _)) if *bf >= freq => {}
            _ => best = Some((freq, candidate)),
        }
    }
    best.map(|(_, w)| w).unwrap_or_else(|| word.to_string())
}

/// All distinct strings at Levenshtein distance exactly <= 1:
/// deletions, substitutions and insertions over `alphabet`.
fn edits1(word: &str, alphabet: &[char]) -> BTreeSet<String> {
    let chars: Vec<char> = word.chars().collect();
    let mut out = BTreeSet::new();
    for i in 0..chars.len() {
        let mut deleted: Vec<char> = chars.clone();
        deleted.remove(i);
        out.insert(deleted.iter().collect());
        for &c in alphabet {
            if c != chars[i] {
                let mut substituted = chars.clone();
                substituted[i] = c;
                out.insert(substituted.iter().collect());
            }
        }
    }
    for i in 0..=chars.len() {
        for &c in alphabet {
            let mut inserted = chars.clone();
            inserted.insert(i, c);
            out.insert(inserted.iter().collect());
        }
    }
    out.remove(word);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Textbook Levenshtein DP; the test oracle for candidate enumeration.
    pub(crate) fn levenshtein(a: &str, b: &str) -> usize {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        let mut prev: Vec<usize> = (0..=b.len()).collect();
        for (i, &ca) in a.iter().enumerate() {
            let mut row = vec![i + 1];
            for (j, &cb) in b.iter().enumerate() {
                let cost = if ca == cb { 0 } else { 1 };
                row.push((prev[j] + cost).min(prev[j + 1] + 1).min(row[j] + 1));
            }
            prev = row;
        }
        prev[b.len()]
    }

    fn model() -> UnigramModel {
        UnigramModel::from_counts([
            ("good", 80u64),
            ("food", 40u64),
            ("mood", 40u64),
            ("goods", 10u64),
            ("hola", 50u64),
        ])
    }

    /// Brute-force scan over the whole model with the reference distance.
    fn oracle(word: &str, unigrams: &UnigramModel) -> String {
        if unigrams.contains(word) {
            return word.to_string();
        }
        let mut candidates: Vec<(&str, u64)> = unigrams
            .words()
            .filter(|(w, _)| levenshtein(word, w) <= 1)
            .collect();
        candidates.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        candidates
            .first()
            .map(|(w, _)| w.to_string())
            .unwrap_or_else(|| word.to_string())
    }

    #[test]
    fn in_model_words_are_unchanged() {
        assert_eq!(spell_correct("good", &model()), "good");
    }

    #[test]
    fn corrects_to_distance_one_neighbor() {
        assert_eq!(spell_correct("goood", &model()), "good");
        assert_eq!(spell_correct("gud", &model()), "gud"); // distance 2, untouched
        assert_eq!(spell_correct("hila", &model()), "hola");
    }

    #[test]
    fn no_neighbor_returns_input() {
        assert_eq!(spell_correct("qqqqq", &model()), "qqqqq");
    }

    #[test]
    fn ties_break_lexicographically() {
        // "fool" and "foot" share frequency 40 and both are one edit away
        let m = UnigramModel::from_counts([("fool", 40u64), ("foot", 40u64)]);
        assert_eq!(spell_correct("foo", &m), "fool");
    }

    #[test]
    fn matches_brute_force_oracle() {
        let m = model();
        for w in [
            "goood", "god", "fod", "zood", "hole", "hol", "xyz", "goodss", "mod",
        ] {
            assert_eq!(spell_correct(w, &m), oracle(w, &m), "word {w:?}");
        }
    }

    #[test]
    fn corrections_stay_within_distance_one() {
        let m = model();
        for w in ["goood", "god", "zood", "hole", "abcdefg"] {
            let c = spell_correct(w, &m);
            assert!(levenshtein(w, &c) <= 1, "{w:?} -> {c:?}");
        }
    }
}
