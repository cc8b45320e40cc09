//! Vocabulary construction, plain-text embedding loading and embedding-matrix
//! initialization.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const PAD_INDEX: usize = 0;
pub const UNK_INDEX: usize = 1;

/// OOV embedding components are drawn uniformly from this range.
pub const OOV_INIT_RANGE: f64 = 0.25;

/// token -> index map with `<pad>` and `<unk>` pinned to rows 0 and 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index_of: HashMap<String, usize>,
}

impl Vocabulary {
    /// Build from an explicit word list (checkpoint restore path).
    pub fn from_words(words: Vec<String>) -> Result<Vocabulary> {
        if words.len() < 2 || words[PAD_INDEX] != PAD_TOKEN || words[UNK_INDEX] != UNK_TOKEN {
            return Err(Error::InvalidInput(
                "vocabulary must start with <pad>, <unk>".into(),
            ));
        }
        let index_of = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        Ok(Vocabulary { words, index_of })
    }

    /// Most frequent `max_size - 2` lowercased surfaces after the specials;
    /// frequency ties break lexicographically.
    pub fn build<'a, I, T>(documents: I, max_size: usize) -> Vocabulary
    where
        I: IntoIterator<Item = T>,
        T: IntoIterator<Item = &'a str>,
    {
        assert!(max_size >= 3, "vocabulary needs room beyond the specials");
        let mut freq: HashMap<String, u64> = HashMap::new();
        for doc in documents {
            for token in doc {
                *freq.entry(token.to_lowercase()).or_insert(0) += 1;
            }
        }
        freq.remove(PAD_TOKEN);
        freq.remove(UNK_TOKEN);
        let mut ranked: Vec<(String, u64)> = freq.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));

        let mut words = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        words.extend(ranked.into_iter().take(max_size - 2).map(|(w, _)| w));
        let index_of = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        Vocabulary { words, index_of }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index_of.get(word).copied()
    }

    pub fn word(&self, index: usize) -> Option<&str> {
        self.words.get(index).map(|s| s.as_str())
    }

    /// Lowercased lookup; unseen surfaces map to `<unk>`.
    pub fn encode<'a, I: IntoIterator<Item = &'a str>>(&self, surfaces: I) -> Vec<usize> {
        surfaces
            .into_iter()
            .map(|s| {
                self.index_of
                    .get(&s.to_lowercase())
                    .copied()
                    .unwrap_or(UNK_INDEX)
            })
            .collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<&str> {
        ids.iter()
            .map(|&i| self.words.get(i).map(|s| s.as_str()).unwrap_or(UNK_TOKEN))
            .collect()
    }
}

/// Pretrained word vectors keyed by surface form.
#[derive(Debug, Clone)]
pub struct PretrainedTable {
    vectors: HashMap<String, Vec<f64>>,
    dim: usize,
}

impl PretrainedTable {
    pub fn empty(dim: usize) -> PretrainedTable {
        PretrainedTable {
            vectors: HashMap::new(),
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(|v| v.as_slice())
    }
}

/// Parse the plain-text embedding format: an optional `<count> <dim>` header
/// followed by `<word> <v1> ... <vd>` lines. Duplicate words keep the first
/// occurrence. Errors carry 1-based line numbers.
pub fn load_embeddings_text(text: &str, expected_dim: Option<usize>) -> Result<PretrainedTable> {
    let mut vectors: HashMap<String, Vec<f64>> = HashMap::new();
    let mut dim: Option<usize> = expected_dim;
    let mut first_data_line = true;

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        // a first line of exactly two integer fields is a header
        if first_data_line && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok())
        {
            let header_dim: usize = fields[1].parse().unwrap();
            match dim {
                Some(d) if d != header_dim => {
                    return Err(Error::embedding(
                        lineno,
                        format!(
                            "header dimension {} does not match expected {}",
                            header_dim, d
                        ),
                    ));
                }
                _ => dim = Some(header_dim),
            }
            first_data_line = false;
            continue;
        }
        first_data_line = false;

        if fields.len() < 2 {
            return Err(Error::embedding(lineno, "expected `<word> <v1> ...`"));
        }
        let word = fields[0];
        let values: Vec<f64> = fields[1..]
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::embedding(lineno, format!("non-numeric value {:?}", f)))
            })
            .collect::<Result<_>>()?;
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(Error::embedding(
                    lineno,
                    format!("expected {} values, found {}", d, values.len()),
                ));
            }
            Some(_) => {}
        }
        vectors.entry(word.to_string()).or_insert(values);
    }

    Ok(PretrainedTable {
        vectors,
        dim: dim.unwrap_or(0),
    })
}

/// Dense |vocab| x d matrix. Row 0 (pad) is all zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn zeros(rows: usize, dim: usize) -> EmbeddingMatrix {
        EmbeddingMatrix {
            rows,
            dim,
            data: vec![0.0; rows * dim],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
}

/// Copy pretrained rows for in-table words; draw every component of an
/// out-of-table row uniformly from the OOV range under `seed`. The pad row
/// stays zero.
pub fn init_embedding_matrix(
    vocab: &Vocabulary,
    table: &PretrainedTable,
    seed: u64,
) -> EmbeddingMatrix {
    let dim = table.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = vec![0.0f64; vocab.len() * dim];
    for (i, word) in vocab.words().iter().enumerate() {
        if i == PAD_INDEX {
            continue;
        }
        let row = &mut data[i * dim..(i + 1) * dim];
        match table.get(word) {
            Some(vector) => row.copy_from_slice(vector),
            None => {
                for v in row.iter_mut() {
                    *v = rng.gen_range(-OOV_INIT_RANGE..=OOV_INIT_RANGE);
                }
            }
        }
    }
    EmbeddingMatrix {
        rows: vocab.len(),
        dim,
        data,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_autodetected() {
        let table = load_embeddings_text("2 3\nhola 1 2 3\ncasa 4 5 6\n", None).unwrap();
        assert_eq!(table.len(), 2);
        assert_eq!(table.dim(), 3);
        assert_eq!(table.get("hola"), Some(&[1.0, 2.0, 3.0][..]));
    }

    #[test]
    fn headerless_files_load_too() {
        let table = load_embeddings_text("hola 1 2 3\ncasa 4 5 6\n", None).unwrap();
        assert_eq!(table.len(), 2);
        assert_eq!(table.dim(), 3);
    }

    #[test]
    fn dimension_mismatch_reports_the_line() {
        let err = load_embeddings_text("hola 1 2 3\ncasa 4 5\n", None).unwrap_err();
        assert!(
            matches!(err, Error::EmbeddingLoad { line: 2, .. }),
            "{err:?}"
        );

        let err = load_embeddings_text("hola 1 2 3\n", Some(5)).unwrap_err();
        assert!(
            matches!(err, Error::EmbeddingLoad { line: 1, .. }),
            "{err:?}"
        );
    }

    #[test]
    fn non_numeric_values_report_the_line() {
        let err = load_embeddings_text("hola 1 2 3\ncasa 4 x 6\n", None).unwrap_err();
        assert!(
            matches!(err, Error::EmbeddingLoad { line: 2, .. }),
            "{err:?}"
        );
    }

    #[test]
    fn duplicate_words_keep_the_first_vector() {
        let table = load_embeddings_text("hola 1 2\nhola 9 9\n", None).unwrap();
        assert_eq!(table.get("hola"), Some(&[1.0, 2.0][..]));
    }

    #[test]
    fn vocabulary_ranks_by_frequency_then_lexicographic() {
        let docs = vec![vec!["a", "a", "a", "b", "b", "c"], vec!["x", "y", "x", "y"]];
        let vocab = Vocabulary::build(docs.iter().map(|d| d.iter().copied()), 6);
        // b, x and y all occur twice; the tie is lexicographic
        assert_eq!(vocab.words(), &["<pad>", "<unk>", "a", "b", "x", "y"]);

        let docs = vec![vec!["x", "y", "x", "y"]];
        let vocab = Vocabulary::build(docs.iter().map(|d| d.iter().copied()), 4);
        assert_eq!(vocab.words(), &["<pad>", "<unk>", "x", "y"]);
    }

    #[test]
    fn vocabulary_is_capped_at_max_size() {
        let doc: Vec<String> = (0..50).map(|i| format!("w{i}")).collect();
        let vocab = Vocabulary::build([doc.iter().map(|s| s.as_str())], 10);
        assert_eq!(vocab.len(), 10);

        // the stock cap over a larger type inventory
        let doc: Vec<String> = (0..20_000).map(|i| format!("w{i}")).collect();
        let vocab = Vocabulary::build([doc.iter().map(|s| s.as_str())], 15_000);
        assert_eq!(vocab.len(), 15_000);
    }

    #[test]
    fn encode_folds_case_and_maps_unknowns() {
        let docs = vec![vec!["a", "a", "b"]];
        let vocab = Vocabulary::build(docs.iter().map(|d| d.iter().copied()), 4);
        assert_eq!(vocab.encode(["a", "zzz"]), vec![2, UNK_INDEX]);
        assert_eq!(vocab.encode(["A"]), vec![2]);
        assert_eq!(vocab.encode([]), Vec::<usize>::new());
    }

    #[test]
    fn encode_decode_round_trips_in_vocabulary_tokens() {
        let docs = vec![vec!["uno", "dos", "tres"]];
        let vocab = Vocabulary::build(docs.iter().map(|d| d.iter().copied()), 8);
        let ids = vocab.encode(["uno", "tres", "dos"]);
        let words = vocab.decode(&ids);
        assert_eq!(vocab.encode(words.iter().copied()), ids);
    }

    #[test]
    fn matrix_copies_pretrained_rows_and_zeroes_pad() {
        let docs = vec![vec!["hola", "mundo"]];
        let vocab = Vocabulary::build(docs.iter().map(|d| d.iter().copied()), 5);
        let table = load_embeddings_text("hola 1 2 3\n", None).unwrap();
        let m = init_embedding_matrix(&vocab, &table, 3);
        assert_eq!(m.row(PAD_INDEX), &[0.0, 0.0, 0.0]);
        let hola = vocab.index_of("hola").unwrap();
        assert_eq!(m.row(hola), &[1.0, 2.0, 3.0]);
        // OOV rows are random but bounded and deterministic
        let mundo = vocab.index_of("mundo").unwrap();
        assert!(m.row(mundo).iter().all(|v| v.abs() <= OOV_INIT_RANGE));
        let again = init_embedding_matrix(&vocab, &table, 3);
        assert_eq!(m, again);
        let other_seed = init_embedding_matrix(&vocab, &table, 4);
        assert_ne!(m.row(mundo), other_seed.row(mundo));
    }
}
