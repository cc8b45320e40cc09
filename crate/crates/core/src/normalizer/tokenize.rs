//! Whitespace-and-punctuation tokenizer for raw prediction input. Dataset
//! tweets arrive pre-tokenized; this is only used for `--text` style input.

use super::entities::map_entity;

const EMOTICONS: &[&str] = &[
    ":)", ":(", ":D", ":P", ":p", ";)", ":/", ":|", ":*", ":-)", ":-(", ":-D", ":-P", ";-)", ":'(",
    ":')", "<3", "xD", "XD", "=)", "=(",
];

fn is_punct(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

/// Entity patterns and emoticons must survive unsplit.
fn is_protected(chunk: &str) -> bool {
    EMOTICONS.contains(&chunk) || map_entity(chunk).is_some()
}

/// Split on whitespace, then peel leading/trailing punctuation runs into
/// their own tokens, protecting entities and emoticons.
pub fn tokenize_raw(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        if is_protected(chunk) {
            out.push(chunk.to_string());
            continue;
        }
        let chars: Vec<char> = chunk.chars().collect();
        let mut start = 0;
        let mut end = chars.len();
        while start < end && is_punct(chars[start]) {
            start += 1;
        }
        while end > start && is_punct(chars[end - 1]) {
            end -= 1;
        }
        if start == end {
            // the chunk is pure punctuation
            out.push(chunk.to_string());
            continue;
        }
        if start > 0 {
            out.push(chars[..start].iter().collect());
        }
        out.push(chars[start..end].iter().collect());
        if end < chars.len() {
            out.push(chars[end..].iter().collect());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_trailing_punctuation() {
        assert_eq!(tokenize_raw("@ana hola!!!"), vec!["@ana", "hola", "!!!"]);
    }

    #[test]
    fn protects_urls_and_emoticons() {
        assert_eq!(
            tokenize_raw("see http://t.co/x :)"),
            vec!["see", "http://t.co/x", ":)"]
        );
        assert_eq!(tokenize_raw("#feliz dia"), vec!["#feliz", "dia"]);
    }

    #[test]
    fn empty_input_yields_no_tokens() {
        assert!(tokenize_raw("").is_empty());
        assert!(tokenize_raw("   ").is_empty());
    }

    #[test]
    fn leading_and_trailing_runs_split_separately() {
        assert_eq!(tokenize_raw("(hola)"), vec!["(", "hola", ")"]);
        assert_eq!(tokenize_raw("¡¡hola!!"), vec!["¡¡", "hola", "!!"]);
    }

    #[test]
    fn interior_punctuation_is_kept() {
        assert_eq!(tokenize_raw("don't stop"), vec!["don't", "stop"]);
    }

    #[test]
    fn pure_punctuation_chunks_stay_whole() {
        assert_eq!(tokenize_raw("... !!!"), vec!["...", "!!!"]);
    }
}
