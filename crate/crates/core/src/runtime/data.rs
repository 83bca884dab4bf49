//! Data-layer sources: CSV tables and token-sequence files, served as
//! deterministic epoch-shuffled streams.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::RuntimeError;
use crate::backend::{Batch, Tensor};
use crate::modulesys::{DataSource, Params};
use crate::util::mix_seed;

/// Samples column-wise: one flat buffer per output port.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    ports: Vec<String>,
    /// Per-sample shape of each port.
    shapes: Vec<Vec<usize>>,
    columns: Vec<Vec<f32>>,
    len: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn ports(&self) -> &[String] {
        &self.ports
    }

    /// Tensors for the given samples keyed by port, each with a leading batch axis.
    pub fn gather(&self, indices: &[usize]) -> BTreeMap<String, Tensor> {
        let mut out = BTreeMap::new();
        for ((port, shape), col) in self.ports.iter().zip(&self.shapes).zip(&self.columns) {
            let n: usize = shape.iter().product();
            let mut data = Vec::with_capacity(n * indices.len());
            for &i in indices {
                data.extend_from_slice(&col[i * n..(i + 1) * n]);
            }
            let mut full = vec![indices.len()];
            full.extend_from_slice(shape);
            out.insert(
                port.clone(),
                Tensor::new(full, data).expect("gathered sizes match"),
            );
        }
        out
    }
}

fn resolve(path: &str, base: Option<&Path>) -> PathBuf {
    let p = Path::new(path);
    match base {
        Some(b) if p.is_relative() => b.join(p),
        _ => p.to_path_buf(),
    }
}

fn read(path: &Path) -> Result<String, RuntimeError> {
    std::fs::read_to_string(path).map_err(|e| RuntimeError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Load the samples behind a data-layer instance.
pub fn load_dataset(
    source: DataSource,
    params: &Params,
    base: Option<&Path>,
) -> Result<Dataset, RuntimeError> {
    let path = resolve(params.str("path")?, base);
    let text = read(&path)?;
    match source {
        DataSource::Csv => parse_csv(
            &text,
            &path,
            params.str_list("feature_columns")?,
            params.str("label_column")?,
            params.usize("num_classes")?,
        ),
        DataSource::Sequence => parse_sequences(
            &text,
            &path,
            params.usize("max_len")?,
            params.usize("vocab_size")?,
            params.int("pad_id")?,
        ),
    }
}

/// Comma-separated, header row first, no quoting. Blank lines are skipped.
/// `num_classes` of 0 reads real-valued labels; otherwise labels are class
/// indices in `[0, num_classes)`.
pub fn parse_csv(
    text: &str,
    path: &Path,
    feature_columns: &[String],
    label_column: &str,
    num_classes: usize,
) -> Result<Dataset, RuntimeError> {
    let err = |line: usize, message: String| RuntimeError::Data {
        path: format!("{}:{line}", path.display()),
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| err(1, "missing header row".into()))?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    let col = |name: &str| {
        names
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| err(1, format!("no column `{name}`")))
    };
    let feats = feature_columns
        .iter()
        .map(|c| col(c))
        .collect::<Result<Vec<_>, _>>()?;
    let label = col(label_column)?;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut len = 0;
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != names.len() {
            return Err(err(
                i + 1,
                format!("expected {} fields, got {}", names.len(), fields.len()),
            ));
        }
        for &c in &feats {
            xs.push(
                fields[c]
                    .parse::<f32>()
                    .map_err(|_| err(i + 1, format!("`{}` is not a number", fields[c])))?,
            );
        }
        if num_classes == 0 {
            ys.push(
                fields[label].parse::<f32>().map_err(|_| {
                    err(i + 1, format!("label `{}` is not a number", fields[label]))
                })?,
            );
        } else {
            let y: i64 = fields[label].parse().map_err(|_| {
                err(
                    i + 1,
                    format!("label `{}` is not an integer", fields[label]),
                )
            })?;
            if y < 0 || y as usize >= num_classes {
                return Err(err(i + 1, format!("label {y} outside [0, {num_classes})")));
            }
            ys.push(y as f32);
        }
        len += 1;
    }
    Ok(Dataset {
        ports: vec!["features".into(), "labels".into()],
        shapes: vec![vec![feats.len()], vec![1]],
        columns: vec![xs, ys],
        len,
    })
}

/// One space-separated token sequence per line, truncated or padded to
/// `max_len`. Labels are the next token, `-1` where there is none.
pub fn parse_sequences(
    text: &str,
    path: &Path,
    max_len: usize,
    vocab_size: usize,
    pad_id: i64,
) -> Result<Dataset, RuntimeError> {
    let (mut tokens, mut mask, mut labels) = (Vec::new(), Vec::new(), Vec::new());
    let mut len = 0;
    for (i, line) in text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
    {
        let err = |message: String| RuntimeError::Data {
            path: format!("{}:{}", path.display(), i + 1),
            message,
        };
        let ids = line
            .split_whitespace()
            .map(|t| {
                let id: i64 = t
                    .parse()
                    .map_err(|_| err(format!("`{t}` is not a token id")))?;
                if id < 0 || id as usize >= vocab_size {
                    return Err(err(format!("token {id} outside [0, {vocab_size})")));
                }
                Ok(id)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let n = ids.len().min(max_len);
        for t in 0..max_len {
            tokens.push(if t < n { ids[t] } else { pad_id } as f32);
            mask.push(if t < n { 1.0 } else { 0.0 });
            labels.push(if t + 1 < n { ids[t + 1] as f32 } else { -1.0 });
        }
        len += 1;
    }
    Ok(Dataset {
        ports: vec!["tokens".into(), "mask".into(), "labels".into()],
        shapes: vec![vec![max_len], vec![max_len], vec![max_len, 1]],
        columns: vec![tokens, mask, labels],
        len,
    })
}

/// An endless (or single-pass, when not repeating) sample order over a
/// dataset. Position `p` falls in epoch `p / len`; each epoch has its own
/// permutation derived from the seed, so any position is reproducible
/// without replaying earlier ones.
#[derive(Debug, Clone)]
pub struct DataStream {
    data: Arc<Dataset>,
    name: String,
    seed: u64,
    shuffle: bool,
    repeats: bool,
    epoch: Option<(u64, Vec<usize>)>,
}

impl DataStream {
    pub fn new(data: Arc<Dataset>, name: &str, seed: u64, shuffle: bool, repeats: bool) -> Self {
        DataStream {
            data,
            name: name.to_string(),
            seed: mix_seed(seed, name),
            shuffle,
            repeats,
            epoch: None,
        }
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data
    }

    fn permutation(&mut self, epoch: u64) -> &[usize] {
        if self.epoch.as_ref().map(|(e, _)| *e) != Some(epoch) {
            let mut order: Vec<usize> = (0..self.data.len()).collect();
            if self.shuffle {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(mix_seed(self.seed, &format!("epoch{epoch}")));
                order.shuffle(&mut rng);
            }
            self.epoch = Some((epoch, order));
        }
        &self.epoch.as_ref().unwrap().1
    }

    /// Sample indices for positions `start .. start + count`.
    pub fn indices(&mut self, start: u64, count: usize) -> Result<Vec<usize>, RuntimeError> {
        let n = self.data.len() as u64;
        if n == 0 || (!self.repeats && start + count as u64 > n) {
            return Err(RuntimeError::DataExhausted(self.name.clone()));
        }
        (start..start + count as u64)
            .map(|p| Ok(self.permutation(p / n)[(p % n) as usize]))
            .collect()
    }

    /// A batch keyed `<instance>.<port>`.
    pub fn batch(&mut self, start: u64, count: usize) -> Result<Batch, RuntimeError> {
        let idx = self.indices(start, count)?;
        Ok(self.prefixed(&idx))
    }

    pub fn prefixed(&self, idx: &[usize]) -> Batch {
        self.data
            .gather(idx)
            .into_iter()
            .map(|(port, t)| (format!("{}.{port}", self.name), t))
            .collect()
    }
}
