//! Word-vector and dictionary files.
//!
//! Vectors use the fastText text layout: a `"<V> <d>"` header followed by one
//! `token f1 ... fd` line per word, most frequent first. Dictionaries are
//! whitespace-separated `src tgt` pairs, one per line.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use log::warn;
use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};

/// Monolingual vocabulary with one row vector per word, in frequency order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSpace {
    words: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Array2<f64>,
    lang_tag: String,
}

impl EmbeddingSpace {
    pub fn new(words: Vec<String>, vectors: Array2<f64>, lang_tag: impl Into<String>) -> Result<Self> {
        if words.len() != vectors.nrows() {
            return Err(Error::DimMismatch {
                expected: vectors.nrows(),
                found: words.len(),
                context: "word count vs matrix rows",
            });
        }
        if vectors.ncols() == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate word `{w}`")));
            }
        }
        Ok(EmbeddingSpace {
            words,
            index,
            vectors,
            lang_tag: lang_tag.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word(&self, i: usize) -> &str {
        &self.words[i]
    }

    pub fn vectors(&self) -> &Array2<f64> {
        &self.vectors
    }

    pub fn lang_tag(&self) -> &str {
        &self.lang_tag
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    /// Keeps the `n` most frequent words.
    pub fn truncate(mut self, n: usize) -> Self {
        if n < self.len() {
            for w in self.words.drain(n..) {
                self.index.remove(&w);
            }
            self.vectors = self.vectors.slice_move(ndarray::s![..n, ..]);
        }
        self
    }
}

/// Warning counters collected while reading a `.vec` file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub duplicates: usize,
    pub malformed: usize,
}

/// Reads at most `max_vocab` words from a fastText `.vec` file.
pub fn load_vec(path: impl AsRef<Path>, max_vocab: usize) -> Result<(EmbeddingSpace, LoadReport)> {
    load_vec_with_dim(path, max_vocab, None)
}

/// As [`load_vec`], additionally rejecting a header whose dimension differs
/// from `expected_dim`.
pub fn load_vec_with_dim(
    path: impl AsRef<Path>,
    max_vocab: usize,
    expected_dim: Option<usize>,
) -> Result<(EmbeddingSpace, LoadReport)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut buf = Vec::new();

    let header_err = |reason: &str| Error::MalformedHeader {
        path: path.to_owned(),
        reason: reason.to_owned(),
    };
    reader.read_until(b'\n', &mut buf).map_err(|e| Error::io(path, e))?;
    let header = std::str::from_utf8(&buf).map_err(|_| header_err("not UTF-8"))?;
    let mut fields = header.split_ascii_whitespace();
    let (n_words, dim) = match (fields.next(), fields.next(), fields.next()) {
        (Some(v), Some(d), None) => (
            v.parse::<usize>().map_err(|_| header_err("vocabulary size is not an integer"))?,
            d.parse::<usize>().map_err(|_| header_err("dimension is not an integer"))?,
        ),
        _ => return Err(header_err("expected `<V> <d>`")),
    };
    if dim == 0 {
        return Err(header_err("dimension must be positive"));
    }
    if let Some(expected) = expected_dim {
        if expected != dim {
            return Err(Error::DimMismatch {
                expected,
                found: dim,
                context: "vector file header",
            });
        }
    }

    let cap = n_words.min(max_vocab);
    let mut words = Vec::with_capacity(cap);
    let mut seen = HashMap::with_capacity(cap);
    let mut data = Vec::with_capacity(cap * dim);
    let mut report = LoadReport::default();
    let mut lines_read = 0usize;

    while words.len() < cap {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        lines_read += 1;
        let Some((word, values)) = parse_vec_line(&buf, dim) else {
            report.malformed += 1;
            continue;
        };
        if seen.contains_key(&word) {
            report.duplicates += 1;
            continue;
        }
        seen.insert(word.clone(), words.len());
        words.push(word);
        data.extend_from_slice(&values);
    }

    // more than 1% of examined lines malformed
    if report.malformed * 100 > lines_read {
        return Err(Error::TooManyMalformed {
            path: path.to_owned(),
            malformed: report.malformed,
            total: lines_read,
        });
    }
    if report.malformed > 0 || report.duplicates > 0 {
        warn!(
            "{}: skipped {} malformed and {} duplicate lines",
            path.display(),
            report.malformed,
            report.duplicates
        );
    }

    let rows = words.len();
    let vectors = Array2::from_shape_vec((rows, dim), data).expect("row-major buffer matches shape");
    let tag = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok((EmbeddingSpace::new(words, vectors, tag)?, report))
}

fn parse_vec_line(line: &[u8], dim: usize) -> Option<(String, Vec<f64>)> {
    let line = std::str::from_utf8(line).ok()?;
    let mut fields = line.split_ascii_whitespace();
    let word = fields.next()?;
    let mut values = Vec::with_capacity(dim);
    for f in fields {
        values.push(f.parse::<f64>().ok().filter(|v| v.is_finite())?);
    }
    (values.len() == dim).then(|| (word.to_owned(), values))
}

/// Writes `space` in the `.vec` text format with 32-bit precision.
pub fn save_vec(space: &EmbeddingSpace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{} {}", space.len(), space.dim()).map_err(io)?;
    for (word, row) in space.words.iter().zip(space.vectors.rows()) {
        write!(w, "{word}").map_err(io)?;
        for v in row {
            write!(w, " {}", *v as f32).map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormScheme {
    Unit,
    #[default]
    UnitCenterUnit,
}

impl FromStr for NormScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit" => Ok(NormScheme::Unit),
            "unit_center_unit" => Ok(NormScheme::UnitCenterUnit),
            other => Err(Error::Config(format!("unknown normalization `{other}`"))),
        }
    }
}

impl fmt::Display for NormScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormScheme::Unit => "unit",
            NormScheme::UnitCenterUnit => "unit_center_unit",
        })
    }
}

/// Row-normalizes the space, optionally mean-centering and renormalizing.
pub fn normalize(mut space: EmbeddingSpace, scheme: NormScheme) -> EmbeddingSpace {
    let zeros = normalize_rows(&mut space.vectors);
    if zeros > 0 {
        warn!("{}: replaced {zeros} zero rows with a uniform vector", space.lang_tag);
    }
    if scheme == NormScheme::UnitCenterUnit {
        let mean = space.vectors.mean_axis(Axis(0)).expect("non-empty space");
        space.vectors -= &mean;
        normalize_rows(&mut space.vectors);
    }
    space
}

/// L2-normalizes each row in place; zero rows become the uniform unit vector.
/// Returns the number of zero rows replaced.
pub fn normalize_rows(m: &mut Array2<f64>) -> usize {
    let d = m.ncols();
    let mut zeros = 0;
    for mut row in m.rows_mut() {
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            row.mapv_inplace(|v| v / norm);
        } else {
            zeros += 1;
            row.fill(1.0 / (d as f64).sqrt());
        }
    }
    zeros
}

pub fn row_norms(m: &Array2<f64>) -> Array1<f64> {
    m.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect()
}

/// Bilingual word pairs. A source word may appear with several targets.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dictionary {
    pairs: Vec<(String, String)>,
}

impl Dictionary {
    pub fn new(pairs: Vec<(String, String)>) -> Result<Self> {
        if let Some((s, t)) = pairs.iter().find(|(s, t)| s.is_empty() || t.is_empty()) {
            return Err(Error::Config(format!("empty word in pair ({s:?}, {t:?})")));
        }
        Ok(Dictionary { pairs })
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Gold target sets keyed by source word.
    pub fn targets_by_source(&self) -> BTreeMap<&str, BTreeSet<&str>> {
        let mut map: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for (s, t) in &self.pairs {
            map.entry(s.as_str()).or_default().insert(t.as_str());
        }
        map
    }

    /// Builds a dictionary from `(source index, target index)` pairs.
    pub fn from_indices(pairs: &[(usize, usize)], source: &EmbeddingSpace, target: &EmbeddingSpace) -> Self {
        Dictionary {
            pairs: pairs
                .iter()
                .map(|&(i, j)| (source.word(i).to_owned(), target.word(j).to_owned()))
                .collect(),
        }
    }

    /// Pairs whose words are both in vocabulary, as row indices.
    pub fn to_indices(&self, source: &EmbeddingSpace, target: &EmbeddingSpace) -> Vec<(usize, usize)> {
        self.pairs
            .iter()
            .filter_map(|(s, t)| Some((source.index_of(s)?, target.index_of(t)?)))
            .collect()
    }
}

pub fn load_dictionary(path: impl AsRef<Path>) -> Result<Dictionary> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let mut fields = line.split_whitespace();
        match (fields.next(), fields.next()) {
            (None, _) => continue,
            (Some(s), Some(t)) => pairs.push((s.to_owned(), t.to_owned())),
            (Some(_), None) => {
                return Err(Error::Parse {
                    path: path.to_owned(),
                    line: i + 1,
                    reason: "expected two whitespace-separated fields".into(),
                })
            }
        }
    }
    if pairs.is_empty() {
        warn!("{}: dictionary is empty", path.display());
    }
    Ok(Dictionary { pairs })
}

pub fn save_dictionary(dict: &Dictionary, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    for (s, t) in &dict.pairs {
        writeln!(w, "{s} {t}").map_err(io)?;
    }
    w.flush().map_err(io)
}
