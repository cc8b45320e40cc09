//! Social-media text normalization: entity mapping, style annotation, word
//! segmentation, spell correction and language-aware application.
//!
//! Annotation tokens are emitted as separate vocabulary items after the word
//! they describe (`wow <allcaps>`), and hashtag bodies expand to
//! `<hashtag> segment ... </hashtag>`.

mod entities;
mod segment;
mod spell;
mod style;
mod tokenize;
mod unigram;

pub use entities::{map_entity, EntityKind};
pub use segment::segment_words;
pub use spell::spell_correct;
pub use style::{annotate_style, NormalizedToken, StyleAnnotation};
pub use tokenize::tokenize_raw;
pub use unigram::UnigramModel;

use crate::corpus::{LangTag, Token};

pub const HASHTAG_OPEN: &str = "<hashtag>";
pub const HASHTAG_CLOSE: &str = "</hashtag>";

/// Tokens of the form `<word>` or `</word>`: entity tokens, style annotation
/// tokens and hashtag wrappers. They pass through normalization verbatim.
fn is_marker(token: &str) -> bool {
    let inner = match token.strip_prefix('<').and_then(|s| s.strip_suffix('>')) {
        Some(inner) => inner.strip_prefix('/').unwrap_or(inner),
        None => return false,
    };
    !inner.is_empty() && inner.chars().all(|c| c.is_ascii_lowercase())
}

fn can_absorb(prev: &NormalizedToken) -> bool {
    !is_marker(&prev.surface)
}

/// Normalize a tagged token sequence.
///
/// Entity mapping applies to every token regardless of language. With
/// `lang_aware` set, style annotation, hashtag segmentation and spell
/// correction skip tokens tagged lang2, leaving their surfaces byte-identical.
/// Re-applying the function to its own serialized output is a no-op: style
/// annotation tokens found in the input are absorbed back into the preceding
/// word.
pub fn normalize_tokens(
    tokens: &[Token],
    unigrams: &UnigramModel,
    lang_aware: bool,
) -> Vec<NormalizedToken> {
    let mut out: Vec<NormalizedToken> = Vec::with_capacity(tokens.len());
    for token in tokens {
        // a style marker re-attaches to the word before it
        if let Some(ann) = StyleAnnotation::parse_token(&token.text) {
            match out.last_mut() {
                Some(prev) if can_absorb(prev) => prev.push_annotation(ann),
                _ => out.push(NormalizedToken::plain(token.text.clone())),
            }
            continue;
        }
        if is_marker(&token.text) {
            out.push(NormalizedToken::plain(token.text.clone()));
            continue;
        }

        let bypass = lang_aware && token.lang == LangTag::Lang2;
        if let Some(kind) = map_entity(&token.text) {
            if kind == EntityKind::Hashtag {
                let body = token.text.trim_start_matches('#');
                out.push(NormalizedToken::plain(HASHTAG_OPEN));
                if bypass {
                    out.push(NormalizedToken::plain(body));
                } else {
                    for segment in segment_words(&body.to_lowercase(), unigrams) {
                        let corrected = if segment.chars().all(|c| c.is_alphabetic()) {
                            spell_correct(&segment, unigrams)
                        } else {
                            segment
                        };
                        out.push(NormalizedToken::plain(corrected));
                    }
                }
                out.push(NormalizedToken::plain(HASHTAG_CLOSE));
            } else {
                out.push(NormalizedToken::plain(kind.token()));
            }
            continue;
        }

        if bypass {
            out.push(NormalizedToken::plain(token.text.clone()));
            continue;
        }

        let mut nt = annotate_style(&token.text, unigrams);
        if nt.surface.chars().all(|c| c.is_alphabetic()) && !nt.surface.is_empty() {
            nt.surface = spell_correct(&nt.surface, unigrams);
        }
        out.push(nt);
    }
    out
}

/// Space-joined surfaces with annotation tokens after each word.
pub fn serialize_normalized(tokens: &[NormalizedToken]) -> String {
    flatten_surfaces(tokens).join(" ")
}

/// The flat token stream fed to vocabulary building and encoding: each
/// surface followed by its annotation tokens.
pub fn flatten_surfaces(tokens: &[NormalizedToken]) -> Vec<String> {
    let mut out = Vec::with_capacity(tokens.len());
    for nt in tokens {
        out.push(nt.surface.clone());
        for ann in &nt.annotations {
            out.push(ann.token().to_string());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{LangTag, Token};

    fn model() -> UnigramModel {
        UnigramModel::from_counts([
            ("good", 80u64),
            ("nice", 50u64),
            ("love", 40u64),
            ("my", 60u64),
            ("life", 30u64),
            ("hola", 70u64),
        ])
    }

    fn tok(text: &str, lang: LangTag) -> Token {
        Token::new(text, lang)
    }

    #[test]
    fn spanish_tokens_bypass_style_rules_when_lang_aware() {
        let tokens = [tok("JAJAJA", LangTag::Lang2), tok("GOOOD", LangTag::Lang1)];
        let out = normalize_tokens(&tokens, &model(), true);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0], NormalizedToken::plain("JAJAJA"));
        assert_eq!(out[1].surface, "good");
        assert_eq!(
            out[1].annotations,
            vec![StyleAnnotation::Allcaps, StyleAnnotation::Elongated]
        );

        // without lang_aware the Spanish token is processed too
        let out = normalize_tokens(&tokens, &model(), false);
        assert_eq!(out[0].surface, "jajaja");
        assert_eq!(out[0].annotations, vec![StyleAnnotation::Allcaps]);
    }

    #[test]
    fn hashtags_expand_to_segments() {
        let out = normalize_tokens(&[tok("#lovemylife", LangTag::Other)], &model(), true);
        let surfaces: Vec<&str> = out.iter().map(|t| t.surface.as_str()).collect();
        assert_eq!(
            surfaces,
            vec!["<hashtag>", "love", "my", "life", "</hashtag>"]
        );
        assert!(out.iter().all(|t| t.annotations.is_empty()));
    }

    #[test]
    fn lang2_hashtags_keep_an_unsegmented_body() {
        let out = normalize_tokens(&[tok("#lovemylife", LangTag::Lang2)], &model(), true);
        let surfaces: Vec<&str> = out.iter().map(|t| t.surface.as_str()).collect();
        assert_eq!(surfaces, vec!["<hashtag>", "lovemylife", "</hashtag>"]);
    }

    #[test]
    fn entity_mapping_is_language_neutral() {
        let tokens = [tok("@ana", LangTag::Lang2), tok("50%", LangTag::Other)];
        let out = normalize_tokens(&tokens, &model(), true);
        let surfaces: Vec<&str> = out.iter().map(|t| t.surface.as_str()).collect();
        assert_eq!(surfaces, vec!["<user>", "<percent>"]);
        assert!(out.iter().all(|t| t.annotations.is_empty()));
    }

    #[test]
    fn serialization_places_annotations_after_the_word() {
        let out = normalize_tokens(&[tok("WOW", LangTag::Lang1)], &model(), true);
        assert_eq!(serialize_normalized(&out), "wow <allcaps>");
    }

    #[test]
    fn normalization_is_idempotent_on_its_own_output() {
        let tokens = [
            tok("WOW", LangTag::Lang1),
            tok("niiiice", LangTag::Lang1),
            tok("!!!", LangTag::Other),
            tok("#lovemylife", LangTag::Other),
            tok("f**k", LangTag::Lang1),
            tok("@ana", LangTag::Other),
            tok("http://t.co/x", LangTag::Other),
        ];
        let m = model();
        let once = normalize_tokens(&tokens, &m, false);
        let serialized = serialize_normalized(&once);
        let reparsed: Vec<Token> = serialized
            .split_whitespace()
            .map(|t| Token::new(t, LangTag::Unk))
            .collect();
        let twice = normalize_tokens(&reparsed, &m, false);
        assert_eq!(once, twice, "first pass: {serialized:?}");
        assert_eq!(serialize_normalized(&twice), serialized);
    }

    #[test]
    fn marker_absorption_deduplicates() {
        let reparsed = [
            tok("f**k", LangTag::Unk),
            tok("<censored>", LangTag::Unk),
            tok("<censored>", LangTag::Unk),
        ];
        let out = normalize_tokens(&reparsed, &model(), false);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].annotations, vec![StyleAnnotation::Censored]);
    }

    #[test]
    fn orphan_markers_pass_through() {
        let out = normalize_tokens(&[tok("<allcaps>", LangTag::Unk)], &model(), false);
        assert_eq!(out, vec![NormalizedToken::plain("<allcaps>")]);
    }
}
