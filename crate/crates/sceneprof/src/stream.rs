//! Per-frame feature streams and their on-disk CSV format.
//!
//! A stream file is plain text: the first line holds the feature
//! dimension, every following line holds one frame as comma-separated
//! 64-bit floats.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// An ordered sequence of per-frame feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStream {
    dim: usize,
    data: Vec<f64>,
}

impl FrameStream {
    pub fn from_rows(dim: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter(
                "frame dimension must be positive".into(),
            ));
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::InvalidParameter(format!(
                    "frame {i} has {} values, expected {dim}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("frame stream"));
            }
            data.extend_from_slice(row);
        }
        Ok(FrameStream { dim, data })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Feature dimension of every frame.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frame(&self, index: usize) -> &[f64] {
        &self.data[index * self.dim..(index + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines().enumerate();

        let (_, first) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "empty file, expected dimension header"))?;
        let first = first.map_err(|e| Error::io(path, e))?;
        let dim: usize = first
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, 1, format!("bad dimension header {first:?}")))?;
        if dim == 0 {
            return Err(Error::parse(path, 1, "dimension header must be positive"));
        }

        let mut data = Vec::new();
        let mut frames = 0usize;
        for (idx, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() {
                continue;
            }
            let mut count = 0usize;
            for field in line.split(',') {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(path, idx + 1, format!("bad float {field:?}")))?;
                if !v.is_finite() {
                    return Err(Error::parse(path, idx + 1, "non-finite value"));
                }
                data.push(v);
                count += 1;
            }
            if count != dim {
                return Err(Error::parse(
                    path,
                    idx + 1,
                    format!("expected {dim} values, found {count}"),
                ));
            }
            frames += 1;
        }
        let _ = frames;
        Ok(FrameStream { dim, data })
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let write = |out: &mut BufWriter<File>, s: &str| -> Result<()> {
            out.write_all(s.as_bytes()).map_err(|e| Error::io(path, e))
        };
        write(&mut out, &format!("{}\n", self.dim))?;
        let mut line = String::new();
        for frame in self.iter() {
            line.clear();
            for (i, v) in frame.iter().enumerate() {
                if i > 0 {
                    line.push(',');
                }
                line.push_str(&format!("{v}"));
            }
            line.push('\n');
            write(&mut out, &line)?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}
