//! Deterministic hashed text embeddings and cosine similarity, plus
//! pluggable providers so externally computed embedding tables (or an
//! embedding service) can stand in for the builtin hash.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

/// Default dimension of similarity embeddings.
pub const DEFAULT_EMBED_DIM: usize = 256;

/// Ordered lowercase alphabetic tokens.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TokenSeq(pub Vec<String>);

impl TokenSeq {
    pub fn as_slice(&self) -> &[String] {
        &self.0
    }
}

/// 64-bit FNV-1a. Used for every hashed feature in the crate so fixtures stay
/// stable across platforms.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET_BASIS: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut hash = OFFSET_BASIS;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(PRIME);
    }
    hash
}

/// Lowercase and split on any non-alphabetic character; digits and
/// underscores act as separators, so pure digit runs vanish.
pub fn tokenize(text: &str) -> TokenSeq {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphabetic() {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    TokenSeq(tokens)
}

/// Add signed hashed n-gram features of `tokens` into `out`, each feature
/// contributing +1 or -1 (sign taken from hash bit 63) at `hash % dim`.
/// `prefix` namespaces the features; `bigrams` adds adjacent pairs joined by
/// `|` in addition to the unigrams.
pub(crate) fn accumulate_ngrams(tokens: &[String], prefix: &str, bigrams: bool, out: &mut [f64]) {
    let dim = out.len() as u64;
    let mut bump = |feature: &str| {
        let h = fnv1a64(feature.as_bytes());
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        out[(h % dim) as usize] += sign;
    };
    for t in tokens {
        bump(&format!("{prefix}{t}"));
    }
    if bigrams {
        for pair in tokens.windows(2) {
            bump(&format!("{prefix}{}|{}", pair[0], pair[1]));
        }
    }
}

pub(crate) fn l2_normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

/// Hashed bag-of-(uni+bi)grams embedding, L2-normalized. Empty input yields
/// the zero vector.
pub fn embed_hashed(tokens: &TokenSeq, dim: usize) -> Vec<f64> {
    embed_hashed_opts(tokens, dim, true)
}

/// `embed_hashed` with the bigram features switchable, which makes the
/// unigram contribution testable on its own.
pub fn embed_hashed_opts(tokens: &TokenSeq, dim: usize, bigrams: bool) -> Vec<f64> {
    assert!(dim >= 2, "embedding dimension must be at least 2");
    let mut v = vec![0.0; dim];
    accumulate_ngrams(tokens.as_slice(), "", bigrams, &mut v);
    l2_normalize(&mut v);
    v
}

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("embedding provider has no entry for activity `{name}`")]
    MissingActivity { name: String },
    #[error("similarity matrix needs at least 2 activities, got {got}")]
    TooFewActivities { got: usize },
    #[error("failed to read embedding table {path}: {source}")]
    TableIo {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad embedding table line {line} in {path}: {reason}")]
    TableParse { path: String, line: usize, reason: String },
    #[error("embedding service error: {0}")]
    Http(String),
}

/// Cosine similarity; zero vectors compare as 0.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, EmbedError> {
    if a.len() != b.len() {
        return Err(EmbedError::DimensionMismatch { left: a.len(), right: b.len() });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok(dot / (na * nb))
}

/// Source of activity-description embeddings.
pub trait EmbeddingProvider {
    fn embed(&self, name: &str, description: &str) -> Result<Vec<f64>, EmbedError>;
}

/// The builtin deterministic hashed embedding.
#[derive(Clone, Debug)]
pub struct HashedProvider {
    pub dim: usize,
}

impl Default for HashedProvider {
    fn default() -> Self {
        HashedProvider { dim: DEFAULT_EMBED_DIM }
    }
}

impl EmbeddingProvider for HashedProvider {
    fn embed(&self, _name: &str, description: &str) -> Result<Vec<f64>, EmbedError> {
        Ok(embed_hashed(&tokenize(description), self.dim))
    }
}

/// Looks embeddings up in a table loaded from disk: one record per line,
/// `<activity-name> <v1> <v2> ... <vD>`, space-separated decimal floats.
#[derive(Clone, Debug)]
pub struct FileProvider {
    table: BTreeMap<String, Vec<f64>>,
}

impl FileProvider {
    pub fn load(path: &Path) -> Result<Self, EmbedError> {
        let text = std::fs::read_to_string(path).map_err(|source| EmbedError::TableIo {
            path: path.display().to_string(),
            source,
        })?;
        let mut table = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let name = fields.next().expect("nonempty line has a first field");
            let values: Result<Vec<f64>, _> = fields.map(str::parse::<f64>).collect();
            let values = values.map_err(|e| EmbedError::TableParse {
                path: path.display().to_string(),
                line: i + 1,
                reason: e.to_string(),
            })?;
            if values.is_empty() {
                return Err(EmbedError::TableParse {
                    path: path.display().to_string(),
                    line: i + 1,
                    reason: "record has no vector components".into(),
                });
            }
            table.insert(name.to_string(), values);
        }
        Ok(FileProvider { table })
    }
}

impl EmbeddingProvider for FileProvider {
    fn embed(&self, name: &str, _description: &str) -> Result<Vec<f64>, EmbedError> {
        self.table
            .get(name)
            .cloned()
            .ok_or_else(|| EmbedError::MissingActivity { name: name.to_string() })
    }
}

/// Calls `POST {base_url}/embed` with `{"text": "<description>"}` and expects
/// `{"vector": [floats]}` back.
#[derive(Clone, Debug)]
pub struct HttpProvider {
    pub base_url: String,
}

#[derive(Deserialize)]
struct EmbedResponse {
    vector: Vec<f64>,
}

impl EmbeddingProvider for HttpProvider {
    fn embed(&self, _name: &str, description: &str) -> Result<Vec<f64>, EmbedError> {
        let url = format!("{}/embed", self.base_url.trim_end_matches('/'));
        let body = serde_json::json!({ "text": description }).to_string();
        let mut response = ureq::post(&url)
            .header("content-type", "application/json")
            .send(body.as_bytes())
            .map_err(|e| EmbedError::Http(e.to_string()))?;
        if response.status() != 200 {
            return Err(EmbedError::Http(format!("{url} returned {}", response.status())));
        }
        let body: EmbedResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| EmbedError::Http(format!("bad response body: {e}")))?;
        Ok(body.vector)
    }
}

/// Pairwise cosine similarities between activity descriptions.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMatrix {
    pub labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl SimilarityMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == a)?;
        let j = self.labels.iter().position(|l| l == b)?;
        Some(self.values[i][j])
    }
}

impl fmt::Display for SimilarityMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "activity")?;
        for l in &self.labels {
            write!(f, ",{l}")?;
        }
        writeln!(f)?;
        for (i, l) in self.labels.iter().enumerate() {
            write!(f, "{l}")?;
            for v in &self.values[i] {
                write!(f, ",{v:.3}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Embed every description and fill the pairwise cosine matrix. Labels are
/// sorted, so the result does not depend on the map's iteration order.
pub fn similarity_matrix(
    descriptions: &BTreeMap<String, String>,
    provider: &dyn EmbeddingProvider,
) -> Result<SimilarityMatrix, EmbedError> {
    if descriptions.len() < 2 {
        return Err(EmbedError::TooFewActivities { got: descriptions.len() });
    }
    let labels: Vec<String> = descriptions.keys().cloned().collect();
    let mut vectors = Vec::with_capacity(labels.len());
    for name in &labels {
        vectors.push(provider.embed(name, &descriptions[name])?);
    }
    let n = labels.len();
    let mut values = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let c = cosine(&vectors[i], &vectors[j])?;
            values[i][j] = c;
            values[j][i] = c;
        }
    }
    Ok(SimilarityMatrix { labels, values })
}
