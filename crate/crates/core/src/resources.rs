//! Per-word feature sources: context embeddings, emotion lexicons and POS
//! one-hot vectors.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{PAD, URL_TOKEN, USER_TOKEN};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Word → dense vector table. Unknown words and [`PAD`] map to zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable<S> {
    dim: usize,
    index: HashMap<String, usize>,
    data: Vec<S>,
    zeros: Vec<S>,
}

impl<S: Scalar> EmbeddingTable<S> {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            index: HashMap::new(),
            data: Vec::new(),
            zeros: vec![S::zero(); dim],
        }
    }

    /// Inserts a vector; returns `false` (and keeps the old one) on duplicates.
    pub fn insert(&mut self, word: &str, vector: &[S]) -> Result<bool> {
        if vector.len() != self.dim {
            return Err(Error::Format(format!(
                "vector for '{word}' has {} components, expected {}",
                vector.len(),
                self.dim
            )));
        }
        if self.index.contains_key(word) {
            return Ok(false);
        }
        self.index.insert(word.to_string(), self.index.len());
        self.data.extend_from_slice(vector);
        Ok(true)
    }

    pub fn from_entries<'a>(
        dim: usize,
        entries: impl IntoIterator<Item = (&'a str, Vec<S>)>,
    ) -> Result<Self> {
        let mut table = Self::new(dim);
        for (w, v) in entries {
            table.insert(w, &v)?;
        }
        Ok(table)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        word != PAD && self.index.contains_key(word)
    }

    /// Context vector for `word`; zeros for OOV and padding.
    pub fn lookup(&self, word: &str) -> &[S] {
        if word == PAD {
            return &self.zeros;
        }
        match self.index.get(word) {
            Some(&i) => &self.data[i * self.dim..(i + 1) * self.dim],
            None => &self.zeros,
        }
    }
}

/// Parses whitespace-separated `word v1 ... vd` lines. The dimension is
/// taken from the first line; duplicate words keep their first vector.
pub fn parse_embeddings<S: Scalar>(content: &str) -> Result<EmbeddingTable<S>> {
    let mut table: Option<EmbeddingTable<S>> = None;
    for (idx, line) in content.lines().enumerate() {
        let line_no = idx + 1;
        let mut parts = line.split_whitespace();
        let Some(word) = parts.next() else { continue };
        let values = parts
            .map(|p| {
                p.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .map(S::lit)
                    .ok_or_else(|| Error::Parse {
                        line: line_no,
                        message: format!("non-numeric component '{p}'"),
                    })
            })
            .collect::<Result<Vec<S>>>()?;
        let table = table.get_or_insert_with(|| EmbeddingTable::new(values.len()));
        if values.is_empty() || values.len() != table.dim {
            return Err(Error::Format(format!(
                "line {line_no}: {} components, expected {}",
                values.len(),
                table.dim
            )));
        }
        table.insert(word, &values)?;
    }
    table.ok_or_else(|| Error::Format("embedding file is empty".into()))
}

pub fn load_embeddings<S: Scalar>(path: impl AsRef<Path>) -> Result<EmbeddingTable<S>> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(&content)
}

/// Emotion lexicon: word → score per emotion column.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon<S> {
    pub name: String,
    pub emotion_columns: Vec<String>,
    entries: HashMap<String, Vec<S>>,
}

impl<S: Scalar> Lexicon<S> {
    pub fn new(
        name: impl Into<String>,
        emotion_columns: Vec<String>,
        entries: impl IntoIterator<Item = (String, Vec<S>)>,
    ) -> Result<Self> {
        let width = emotion_columns.len();
        let mut map = HashMap::new();
        for (term, scores) in entries {
            if scores.len() != width || scores.iter().any(|s| !s.is_finite()) {
                return Err(Error::Format(format!(
                    "lexicon entry '{term}' must carry {width} finite scores"
                )));
            }
            map.entry(term.to_lowercase()).or_insert(scores);
        }
        Ok(Self {
            name: name.into(),
            emotion_columns,
            entries: map,
        })
    }

    /// Number of emotion columns.
    pub fn width(&self) -> usize {
        self.emotion_columns.len()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[S]> {
        self.entries.get(word).map(Vec::as_slice)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LexiconFormat {
    /// `term<TAB>emotion<TAB>score` rows (NRC intensity style).
    Pivot,
    /// Header row of emotion columns, one term per row (DepecheMood style).
    Table,
}

fn parse_score(field: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse {
            line,
            message: format!("non-numeric score '{field}'"),
        })
}

/// Guesses the format from the first non-empty line.
pub fn detect_lexicon_format(content: &str) -> LexiconFormat {
    let first = content.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    let fields: Vec<&str> = first.split('\t').collect();
    if fields.len() == 3
        && fields[1].trim().parse::<f64>().is_err()
        && fields[2].trim().parse::<f64>().is_ok()
    {
        LexiconFormat::Pivot
    } else {
        LexiconFormat::Table
    }
}

pub fn parse_lexicon<S: Scalar>(
    name: &str,
    content: &str,
    format: LexiconFormat,
) -> Result<Lexicon<S>> {
    match format {
        LexiconFormat::Pivot => {
            let mut columns: Vec<String> = Vec::new();
            let mut rows: Vec<(String, Vec<(usize, f64)>)> = Vec::new();
            let mut by_term: HashMap<String, usize> = HashMap::new();
            for (idx, line) in content.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let fields: Vec<&str> = line.split('\t').collect();
                if fields.len() != 3 {
                    return Err(Error::Parse {
                        line: idx + 1,
                        message: "expected term<TAB>emotion<TAB>score".into(),
                    });
                }
                let emotion = fields[1].trim();
                let col = match columns.iter().position(|c| c == emotion) {
                    Some(c) => c,
                    None => {
                        columns.push(emotion.to_string());
                        columns.len() - 1
                    }
                };
                let score = parse_score(fields[2], idx + 1)?;
                let term = fields[0].trim().to_lowercase();
                let slot = *by_term.entry(term.clone()).or_insert_with(|| {
                    rows.push((term, Vec::new()));
                    rows.len() - 1
                });
                rows[slot].1.push((col, score));
            }
            let width = columns.len();
            let entries = rows.into_iter().map(|(term, cells)| {
                let mut v = vec![S::zero(); width];
                for (c, s) in cells {
                    v[c] = S::lit(s);
                }
                (term, v)
            });
            Lexicon::new(name, columns, entries)
        }
        LexiconFormat::Table => {
            let mut lines = content
                .lines()
                .enumerate()
                .filter(|(_, l)| !l.trim().is_empty());
            let (_, header) = lines
                .next()
                .ok_or_else(|| Error::Format("lexicon file is empty".into()))?;
            let columns: Vec<String> = header
                .split('\t')
                .skip(1)
                .map(|c| c.trim().to_string())
                .collect();
            if columns.is_empty() {
                return Err(Error::Format("lexicon header names no emotion columns".into()));
            }
            let mut entries = Vec::new();
            for (idx, line) in lines {
                let fields: Vec<&str> = line.split('\t').collect();
                if fields.len() != columns.len() + 1 {
                    return Err(Error::Format(format!(
                        "line {}: {} fields, expected {}",
                        idx + 1,
                        fields.len(),
                        columns.len() + 1
                    )));
                }
                let scores = fields[1..]
                    .iter()
                    .map(|f| parse_score(f, idx + 1).map(S::lit))
                    .collect::<Result<Vec<S>>>()?;
                entries.push((fields[0].trim().to_string(), scores));
            }
            Lexicon::new(name, columns, entries)
        }
    }
}

/// Loads a lexicon, detecting the format when `format` is `None`.
pub fn load_lexicon<S: Scalar>(
    path: impl AsRef<Path>,
    format: Option<LexiconFormat>,
) -> Result<Lexicon<S>> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let format = format.unwrap_or_else(|| detect_lexicon_format(&content));
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "lexicon".into());
    parse_lexicon(&name, &content, format)
}

/// Concatenated lexicon scores for `word`; a lexicon miss contributes a
/// zero block of that lexicon's width.
pub fn emotion_vector<S: Scalar>(word: &str, lexicons: &[Lexicon<S>]) -> Vec<S> {
    let mut out = Vec::with_capacity(lexicons.iter().map(Lexicon::width).sum());
    for lex in lexicons {
        match (word != PAD).then(|| lex.get(word)).flatten() {
            Some(scores) => out.extend_from_slice(scores),
            None => out.extend(std::iter::repeat_n(S::zero(), lex.width())),
        }
    }
    out
}

/// The 17 universal POS tags.
pub const UNIVERSAL_TAGS: [&str; 17] = [
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM", "PART", "PRON", "PROPN",
    "PUNCT", "SCONJ", "SYM", "VERB", "X",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PosTagset {
    tags: Vec<String>,
}

impl Default for PosTagset {
    fn default() -> Self {
        Self {
            tags: UNIVERSAL_TAGS.iter().map(|t| t.to_string()).collect(),
        }
    }
}

impl PosTagset {
    pub fn new(tags: Vec<String>) -> Result<Self> {
        if tags.len() < 2 {
            return Err(Error::Config("a tagset needs at least two tags".into()));
        }
        let mut seen = std::collections::HashSet::new();
        if !tags.iter().all(|t| seen.insert(t.as_str())) {
            return Err(Error::Config("tagset contains duplicate tags".into()));
        }
        Ok(Self { tags })
    }

    /// Tagset size μ.
    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn index_of(&self, tag: &str) -> Option<usize> {
        self.tags.iter().position(|t| t == tag)
    }

    /// One-hot vector for `tag`; all zeros for tags outside the set.
    pub fn pos_vector<S: Scalar>(&self, tag: &str) -> Vec<S> {
        let mut v = vec![S::zero(); self.tags.len()];
        if let Some(i) = self.index_of(tag) {
            v[i] = S::one();
        }
        v
    }
}

const CLOSED_CLASS: &[(&str, &[&str])] = &[
    ("DET", &["the", "a", "an", "this", "that", "these", "those", "every", "each", "some", "any", "no", "all"]),
    ("PRON", &["i", "me", "my", "mine", "you", "your", "yours", "he", "him", "his", "she", "her", "hers", "it", "its", "we", "us", "our", "they", "them", "their", "myself", "yourself", "who", "what", "i'm", "you're", "it's", "we're", "they're", "i've", "i'll", "i'd"]),
    ("ADP", &["in", "on", "at", "of", "for", "with", "from", "to", "by", "about", "into", "over", "under", "after", "before", "between", "through", "during", "without", "against"]),
    ("CCONJ", &["and", "or", "but", "nor", "yet", "so"]),
    ("SCONJ", &["because", "if", "while", "although", "though", "since", "unless", "whether", "when", "than"]),
    ("AUX", &["is", "am", "are", "was", "were", "be", "been", "being", "have", "has", "had", "do", "does", "did", "will", "would", "can", "could", "shall", "should", "may", "might", "must", "don't", "can't", "won't", "isn't", "didn't"]),
    ("PART", &["not", "n't", "'s"]),
    ("INTJ", &["oh", "wow", "ugh", "hey", "yay", "lol", "omg", "ouch", "haha", "hmm", "yes", "no"]),
    ("ADV", &["very", "too", "really", "just", "never", "always", "so", "now", "then", "here", "there", "still", "again", "soon", "often", "ever"]),
];

const SUFFIXES: &[(&str, &str)] = &[
    ("ly", "ADV"),
    ("ing", "VERB"),
    ("ed", "VERB"),
    ("ize", "VERB"),
    ("ise", "VERB"),
    ("ous", "ADJ"),
    ("ful", "ADJ"),
    ("ive", "ADJ"),
    ("able", "ADJ"),
    ("ible", "ADJ"),
    ("less", "ADJ"),
    ("ish", "ADJ"),
    ("ic", "ADJ"),
    ("al", "ADJ"),
    ("tion", "NOUN"),
    ("sion", "NOUN"),
    ("ness", "NOUN"),
    ("ment", "NOUN"),
    ("ity", "NOUN"),
    ("ship", "NOUN"),
];

/// Deterministic heuristic tag for a single token.
pub fn fallback_tag(token: &str) -> &'static str {
    if token == URL_TOKEN {
        return "X";
    }
    if token == USER_TOKEN {
        return "PROPN";
    }
    if token == PAD {
        return "X";
    }
    if !token.chars().any(char::is_alphanumeric) {
        return "PUNCT";
    }
    if token.chars().all(|c| c.is_ascii_digit() || c == '.' || c == ',') {
        return "NUM";
    }
    for (tag, words) in CLOSED_CLASS {
        if words.contains(&token) {
            return tag;
        }
    }
    let len = token.chars().count();
    for (suffix, tag) in SUFFIXES {
        if len > suffix.len() + 2 && token.ends_with(suffix) {
            return tag;
        }
    }
    "NOUN"
}

/// One tag per token: external tags when supplied with matching length,
/// otherwise the heuristic fallback.
pub fn tag_tokens(tokens: &[String], external: Option<&[String]>) -> Vec<String> {
    match external {
        Some(tags) if tags.len() == tokens.len() => tags.to_vec(),
        Some(tags) => {
            log::warn!(
                "{} external tags for {} tokens; using heuristic tags",
                tags.len(),
                tokens.len()
            );
            tokens.iter().map(|t| fallback_tag(t).to_string()).collect()
        }
        None => tokens.iter().map(|t| fallback_tag(t).to_string()).collect(),
    }
}

/// All three feature sources together.
#[derive(Debug, Clone)]
pub struct Resources<S> {
    pub embeddings: EmbeddingTable<S>,
    pub lexicons: Vec<Lexicon<S>>,
    pub tagset: PosTagset,
    /// Content digests of the files the resources were loaded from.
    pub fingerprints: Vec<String>,
}

impl<S: Scalar> Resources<S> {
    pub fn new(embeddings: EmbeddingTable<S>, lexicons: Vec<Lexicon<S>>, tagset: PosTagset) -> Self {
        Self {
            embeddings,
            lexicons,
            tagset,
            fingerprints: Vec::new(),
        }
    }

    /// Loads embeddings and lexicons from disk and records content digests.
    pub fn load(embeddings: &Path, lexicons: &[impl AsRef<Path>], tagset: PosTagset) -> Result<Self> {
        let mut fingerprints = vec![fingerprint_file(embeddings)?];
        let table = load_embeddings(embeddings)?;
        let mut lex = Vec::new();
        for p in lexicons {
            fingerprints.push(fingerprint_file(p.as_ref())?);
            lex.push(load_lexicon(p, None)?);
        }
        Ok(Self {
            embeddings: table,
            lexicons: lex,
            tagset,
            fingerprints,
        })
    }

    /// Context dimension d.
    pub fn dim(&self) -> usize {
        self.embeddings.dim()
    }

    /// Total lexicon width ΣΦ.
    pub fn emotion_width(&self) -> usize {
        self.lexicons.iter().map(Lexicon::width).sum()
    }

    /// Tagset size μ.
    pub fn pos_width(&self) -> usize {
        self.tagset.len()
    }
}

/// SHA-256 of a file, hex encoded.
pub fn fingerprint_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn embeddings_parse_and_lookup() {
        let t: EmbeddingTable<f64> = parse_embeddings("cat 1 2 3\ndog 4 5 6\n").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.dim(), 3);
        assert_eq!(t.lookup("dog"), &[4.0, 5.0, 6.0]);
        assert_eq!(t.lookup("zebra"), &[0.0, 0.0, 0.0]);
        assert_eq!(t.lookup(PAD), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn embeddings_duplicate_keeps_first() {
        let t: EmbeddingTable<f32> = parse_embeddings("cat 1 2\ncat 3 4\n").unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.lookup("cat"), &[1.0, 2.0]);
    }

    #[test]
    fn embeddings_errors() {
        assert!(matches!(
            parse_embeddings::<f64>("cat 1 2 3\ndog 1 2\n"),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            parse_embeddings::<f64>("cat 1 x 3\n"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn pad_is_zero_even_if_listed() {
        let t: EmbeddingTable<f64> = parse_embeddings("<pad> 1 1\n").unwrap();
        assert_eq!(t.lookup(PAD), &[0.0, 0.0]);
    }

    fn lexicon_a() -> Lexicon<f64> {
        let cols: Vec<String> = (0..8).map(|i| format!("a{i}")).collect();
        Lexicon::new("A", cols, vec![("happy".to_string(), vec![1.0; 8])]).unwrap()
    }

    fn lexicon_b() -> Lexicon<f64> {
        let cols: Vec<String> = (0..5).map(|i| format!("b{i}")).collect();
        Lexicon::new(
            "B",
            cols,
            vec![
                ("happy".to_string(), vec![0.5; 5]),
                ("gloom".to_string(), vec![0.1, 0.2, 0.3, 0.4, 0.5]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn emotion_vector_blocks() {
        let lex = [lexicon_a(), lexicon_b()];
        assert_eq!(emotion_vector("happy", &lex).len(), 13);
        assert_eq!(emotion_vector("unknown", &lex), vec![0.0; 13]);
        let gloom = emotion_vector("gloom", &lex);
        assert_eq!(&gloom[..8], &[0.0; 8]);
        assert_eq!(&gloom[8..], &[0.1, 0.2, 0.3, 0.4, 0.5]);
    }

    #[test]
    fn lexicon_pivot_format() {
        let text = "happy\tjoy\t0.9\nhappy\tanger\t0.1\nmad\tanger\t0.8\n";
        assert_eq!(detect_lexicon_format(text), LexiconFormat::Pivot);
        let lex: Lexicon<f64> = parse_lexicon("nrc", text, LexiconFormat::Pivot).unwrap();
        assert_eq!(lex.emotion_columns, vec!["joy", "anger"]);
        assert_eq!(lex.get("happy").unwrap(), &[0.9, 0.1]);
        assert_eq!(lex.get("mad").unwrap(), &[0.0, 0.8]);
    }

    #[test]
    fn lexicon_table_format() {
        let text = "term\tjoy\tfear\nHappy\t0.7\t0.3\ndark\t0.1\t0.9\n";
        assert_eq!(detect_lexicon_format(text), LexiconFormat::Table);
        let lex: Lexicon<f64> = parse_lexicon("dm", text, LexiconFormat::Table).unwrap();
        assert_eq!(lex.width(), 2);
        assert_eq!(lex.get("happy").unwrap(), &[0.7, 0.3]);
        assert!(parse_lexicon::<f64>("dm", "term\tjoy\nx\t0.1\t0.2\n", LexiconFormat::Table).is_err());
    }

    #[test]
    fn pos_one_hot() {
        let tags = PosTagset::default();
        assert_eq!(tags.len(), 17);
        let noun: Vec<f64> = tags.pos_vector("NOUN");
        let i = tags.index_of("NOUN").unwrap();
        assert_eq!(noun[i], 1.0);
        assert_eq!(noun.iter().sum::<f64>(), 1.0);
        assert_eq!(tags.pos_vector::<f64>("BOGUS"), vec![0.0; 17]);
    }

    #[test]
    fn tagset_validation() {
        assert!(PosTagset::new(vec!["A".into()]).is_err());
        assert!(PosTagset::new(vec!["A".into(), "A".into()]).is_err());
        assert!(PosTagset::new(vec!["A".into(), "B".into()]).is_ok());
    }

    #[test]
    fn tagging() {
        let toks: Vec<String> = ["the", "dog", "runs"].iter().map(|s| s.to_string()).collect();
        let ext: Vec<String> = ["DET", "NOUN", "VERB"].iter().map(|s| s.to_string()).collect();
        assert_eq!(tag_tokens(&toks, Some(&ext)), ext);
        assert_eq!(fallback_tag("quickly"), "ADV");
        assert_eq!(fallback_tag("the"), "DET");
        assert_eq!(fallback_tag("happiness"), "NOUN");
        assert_eq!(fallback_tag("42"), "NUM");
        assert_eq!(fallback_tag("<user>"), "PROPN");
    }

    proptest! {
        #[test]
        fn tag_count_matches_tokens(words in proptest::collection::vec("[a-z']{1,10}", 1..30)) {
            prop_assert_eq!(tag_tokens(&words, None).len(), words.len());
        }

        #[test]
        fn pos_vectors_are_one_hot_or_zero(tag in "[A-Z]{1,6}") {
            let v: Vec<f64> = PosTagset::default().pos_vector(&tag);
            prop_assert!(v.iter().all(|&x| x == 0.0 || x == 1.0));
            prop_assert!(v.iter().sum::<f64>() <= 1.0);
        }

        #[test]
        fn lookup_always_has_dim(word in "\\PC{0,12}") {
            let t: EmbeddingTable<f64> = parse_embeddings("a 1 2 3 4\n").unwrap();
            prop_assert_eq!(t.lookup(&word).len(), 4);
        }

        #[test]
        fn emotion_width_is_additive(word in "[a-z]{1,8}") {
            let lex = [lexicon_a(), lexicon_b()];
            prop_assert_eq!(emotion_vector(&word, &lex).len(), 13);
        }
    }
}
