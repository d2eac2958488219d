//! Training data containers.
//!
//! A [`Dataset`] is an ordered multiset of `(x, y)` pairs sharing one feature
//! dimension. Features are stored row-major in a single buffer.

use std::cmp::Ordering;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DataPoint {
    pub x: Vec<f64>,
    pub y: f64,
}

impl DataPoint {
    pub fn new(x: Vec<f64>, y: f64) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    d: usize,
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl Dataset {
    /// Empty dataset of feature dimension `d`.
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("feature dimension must be >= 1".into()));
        }
        Ok(Self { d, xs: Vec::new(), ys: Vec::new() })
    }

    pub fn with_capacity(d: usize, n: usize) -> Result<Self> {
        let mut ds = Self::new(d)?;
        ds.xs.reserve(n * d);
        ds.ys.reserve(n);
        Ok(ds)
    }

    pub fn from_points(d: usize, points: impl IntoIterator<Item = DataPoint>) -> Result<Self> {
        let mut ds = Self::new(d)?;
        for p in points {
            ds.push(&p.x, p.y)?;
        }
        Ok(ds)
    }

    /// Builds a one-dimensional dataset from `(x, y)` pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        let mut ds = Self::with_capacity(1, pairs.len())?;
        for &(x, y) in pairs {
            ds.push(&[x], y)?;
        }
        Ok(ds)
    }

    pub fn push(&mut self, x: &[f64], y: f64) -> Result<()> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: x.len() });
        }
        if !y.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        self.xs.extend_from_slice(x);
        self.ys.push(y);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.xs[i * self.d..(i + 1) * self.d]
    }

    pub fn y(&self, i: usize) -> f64 {
        self.ys[i]
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn point(&self, i: usize) -> DataPoint {
        DataPoint::new(self.x(i).to_vec(), self.y(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.xs.chunks_exact(self.d).zip(self.ys.iter().copied())
    }

    /// First `n` points.
    pub fn prefix(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset { d: self.d, xs: self.xs[..n * self.d].to_vec(), ys: self.ys[..n].to_vec() }
    }

    /// Points in `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Dataset {
        Dataset {
            d: self.d,
            xs: self.xs[start * self.d..end * self.d].to_vec(),
            ys: self.ys[start..end].to_vec(),
        }
    }

    pub fn select(&self, idx: &[usize]) -> Dataset {
        let mut xs = Vec::with_capacity(idx.len() * self.d);
        let mut ys = Vec::with_capacity(idx.len());
        for &i in idx {
            xs.extend_from_slice(self.x(i));
            ys.push(self.ys[i]);
        }
        Dataset { d: self.d, xs, ys }
    }

    pub fn without(&self, skip: usize) -> Dataset {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| i != skip).collect();
        self.select(&idx)
    }

    /// Copy of `self` with one extra point appended.
    pub fn with_point(&self, x: &[f64], y: f64) -> Result<Dataset> {
        let mut ds = self.clone();
        ds.push(x, y)?;
        Ok(ds)
    }

    /// Concatenation of `self` and `other`.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if other.d != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: other.d });
        }
        let mut ds = self.clone();
        ds.xs.extend_from_slice(&other.xs);
        ds.ys.extend_from_slice(&other.ys);
        Ok(ds)
    }

    /// Lexicographic order on `(x_1, ..., x_d, y)`.
    pub fn cmp_points(&self, i: usize, j: usize) -> Ordering {
        self.x(i)
            .iter()
            .zip(self.x(j))
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or_else(|| self.ys[i].total_cmp(&self.ys[j]))
    }

    /// The same multiset, sorted lexicographically by `(x, y)`.
    ///
    /// Learners whose computations depend on point order run on this view, so
    /// any permutation of the input produces bitwise-identical fits.
    pub fn canonical(&self) -> Dataset {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.cmp_points(a, b));
        self.select(&idx)
    }

    /// Order-invariant 64-bit digest of the multiset.
    pub fn digest(&self) -> u64 {
        let canon = self.canonical();
        let mut h = 0x243f_6a88_85a3_08d3u64 ^ (canon.len() as u64);
        for (x, y) in canon.iter() {
            for v in x.iter().chain(std::iter::once(&y)) {
                h = mix64(h ^ v.to_bits());
            }
        }
        h
    }

    pub fn min_y(&self) -> Option<f64> {
        self.ys.iter().copied().reduce(f64::min)
    }

    pub fn max_y(&self) -> Option<f64> {
        self.ys.iter().copied().reduce(f64::max)
    }

    /// Reads a CSV with header `x_1,...,x_d,y`.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Dataset> {
        let mut rdr = csv::Reader::from_path(path)?;
        let headers = rdr.headers()?.clone();
        if headers.len() < 2 {
            return Err(Error::Config("dataset CSV needs at least one feature column and y".into()));
        }
        let d = headers.len() - 1;
        for (j, h) in headers.iter().take(d).enumerate() {
            if h.trim() != format!("x_{}", j + 1) {
                return Err(Error::Config(format!("unexpected column header `{h}`")));
            }
        }
        if headers.get(d).map(str::trim) != Some("y") {
            return Err(Error::Config("last column must be `y`".into()));
        }
        let mut ds = Dataset::new(d)?;
        let mut row = vec![0.0; d];
        for rec in rdr.records() {
            let rec = rec?;
            for (j, v) in row.iter_mut().enumerate() {
                *v = parse_f64(&rec[j])?;
            }
            ds.push(&row, parse_f64(&rec[d])?)?;
        }
        Ok(ds)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut wtr = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = (1..=self.d).map(|j| format!("x_{j}")).collect();
        header.push("y".into());
        wtr.write_record(&header)?;
        for (x, y) in self.iter() {
            let rec: Vec<String> = x.iter().chain(std::iter::once(&y)).map(|v| format_f64(*v)).collect();
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Config(format!("cannot parse `{s}` as a number")))
}

/// 17 significant digits, enough for exact round trips of any `f64`.
pub fn format_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

// splitmix64 finaliser
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
