use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Sparse real vector with sorted, unique indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVec {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseVec {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds from arbitrary (index, value) pairs; duplicates are summed.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut acc = BTreeMap::new();
        for (i, v) in pairs {
            *acc.entry(i).or_insert(0.0) += v;
        }
        let (indices, values) = acc.into_iter().unzip();
        Self { indices, values }
    }

    pub fn from_dense(dense: &[f64]) -> Self {
        Self::from_pairs(
            dense
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| (i, *v)),
        )
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn max_index(&self) -> Option<usize> {
        self.indices.last().copied()
    }

    pub fn get(&self, index: usize) -> f64 {
        match self.indices.binary_search(&index) {
            Ok(k) => self.values[k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for (i, v) in self.iter() {
            out[i] += v;
        }
        out
    }

    /// Row-vector times matrix: `self · m`, one output entry per column of `m`.
    pub fn mul_mat(&self, m: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.check_width(m.nrows(), "sparse row times matrix")?;
        let mut out = DVector::zeros(m.ncols());
        for (p, val) in self.iter() {
            for j in 0..m.ncols() {
                out[j] += val * m[(p, j)];
            }
        }
        Ok(out)
    }

    pub fn check_width(&self, width: usize, what: &'static str) -> Result<()> {
        match self.max_index() {
            Some(i) if i >= width => Err(Error::WidthMismatch {
                what,
                expected: width,
                actual: i + 1,
            }),
            _ => Ok(()),
        }
    }
}

/// Compressed-row matrix of non-negative integer counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseCountMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    counts: Vec<u32>,
}

impl SparseCountMatrix {
    pub fn empty(cols: usize) -> Self {
        Self {
            rows: 0,
            cols,
            indptr: vec![0],
            indices: Vec::new(),
            counts: Vec::new(),
        }
    }

    /// Builds from per-row count maps. Zero counts are dropped.
    pub fn from_rows(cols: usize, rows: &[BTreeMap<usize, u32>]) -> Result<Self> {
        let mut m = Self::empty(cols);
        for row in rows {
            m.push_row(row)?;
        }
        Ok(m)
    }

    /// Builds from (row, col, count) triplets; repeated pairs are summed.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        entries: impl IntoIterator<Item = (usize, usize, u32)>,
    ) -> Result<Self> {
        let mut per_row = vec![BTreeMap::new(); rows];
        for (r, c, n) in entries {
            if r >= rows {
                return Err(Error::WidthMismatch {
                    what: "triplet row",
                    expected: rows,
                    actual: r + 1,
                });
            }
            *per_row[r].entry(c).or_insert(0) += n;
        }
        Self::from_rows(cols, &per_row)
    }

    pub fn push_row(&mut self, row: &BTreeMap<usize, u32>) -> Result<()> {
        for (&c, &n) in row {
            if c >= self.cols {
                return Err(Error::WidthMismatch {
                    what: "count matrix column",
                    expected: self.cols,
                    actual: c + 1,
                });
            }
            if n > 0 {
                self.indices.push(c);
                self.counts.push(n);
            }
        }
        self.indptr.push(self.indices.len());
        self.rows += 1;
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row_entries(&self, row: usize) -> impl Iterator<Item = (usize, u32)> + '_ {
        let span = self.indptr[row]..self.indptr[row + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.counts[span].iter().copied())
    }

    pub fn row(&self, row: usize) -> SparseVec {
        let (indices, values) = self
            .row_entries(row)
            .map(|(c, n)| (c, f64::from(n)))
            .unzip();
        SparseVec { indices, values }
    }

    pub fn row_sum(&self, row: usize) -> u64 {
        self.row_entries(row).map(|(_, n)| u64::from(n)).sum()
    }

    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.row_entries(row)
            .find(|(c, _)| *c == col)
            .map_or(0, |(_, n)| n)
    }

    /// All stored entries in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        (0..self.rows).flat_map(move |r| self.row_entries(r).map(move |(c, n)| (r, c, n)))
    }
}
