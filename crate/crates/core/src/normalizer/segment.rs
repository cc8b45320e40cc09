//! Word segmentation: dynamic program over split points maximizing the
//! product of unigram probabilities.

use super::unigram::UnigramModel;

/// Split `compound` into the segmentation with the highest product of unigram
/// probabilities. Unseen segments score `1/(total*10)`, which makes the
/// single-segment reading win whenever no split scores higher.
pub fn segment_words(compound: &str, unigrams: &UnigramModel) -> Vec<String> {
    let chars: Vec<char> = compound.chars().collect();
    let n = chars.len();
    if n == 0 {
        return Vec::new();
    }

    // best[i]: top score for the prefix of length i; back[i]: its last split
    let mut best = vec![f64::NEG_INFINITY; n + 1];
    let mut back = vec![0usize; n + 1];
    best[0] = 0.0;
    for i in 1..=n {
        for j in 0..i {
            let segment: String = chars[j..i].iter().collect();
            let score = best[j] + unigrams.log_prob(&segment);
            if score > best[i] {
                best[i] = score;
                back[i] = j;
            }
        }
    }

    let mut cuts = Vec::new();
    let mut i = n;
    while i > 0 {
        cuts.push((back[i], i));
        i = back[i];
    }
    cuts.reverse();
    cuts.into_iter()
        .map(|(a, b)| chars[a..b].iter().collect())
        .collect()
}
