//! Coordinate-format sparse matrices.
//!
//! Entries are kept as `(row, col, value)` triplets in row-major sorted order
//! with duplicates merged and exact zeros removed, so two matrices holding the
//! same operator compare equal entry by entry.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::C64;

/// Largest dimension for which dense conversion is allowed.
pub const DENSE_LIMIT: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, C64)>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    /// Builds a matrix from unordered triplets; repeated coordinates are summed.
    pub fn from_triplets<I>(nrows: usize, ncols: usize, triplets: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, C64)>,
    {
        let mut entries: Vec<_> = triplets.into_iter().collect();
        for &(r, c, _) in &entries {
            assert!(
                r < nrows && c < ncols,
                "triplet ({r}, {c}) outside {nrows}x{ncols}"
            );
        }
        entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut merged: Vec<(usize, usize, C64)> = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|e| e.2 != C64::new(0.0, 0.0));
        Self {
            nrows,
            ncols,
            entries: merged,
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::from_triplets(
            n,
            n,
            diag.iter()
                .enumerate()
                .map(|(i, &d)| (i, i, C64::new(d, 0.0))),
        )
    }

    pub fn from_dense(m: &DMatrix<C64>) -> Self {
        let mut triplets = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let v = m[(r, c)];
                if v != C64::new(0.0, 0.0) {
                    triplets.push((r, c, v));
                }
            }
        }
        Self {
            nrows: m.nrows(),
            ncols: m.ncols(),
            entries: triplets,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn triplets(&self) -> &[(usize, usize, C64)] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        match self
            .entries
            .binary_search_by_key(&(row, col), |&(r, c, _)| (r, c))
        {
            Ok(pos) => self.entries[pos].2,
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn to_dense(&self) -> Result<DMatrix<C64>> {
        let dim = self.nrows.max(self.ncols);
        if dim > DENSE_LIMIT {
            return Err(Error::SizeGuard {
                what: "dense conversion",
                size: dim,
                cap: DENSE_LIMIT,
            });
        }
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for &(r, c, v) in &self.entries {
            m[(r, c)] = v;
        }
        Ok(m)
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        Self::from_triplets(
            self.nrows,
            self.ncols,
            self.entries.iter().chain(other.entries.iter()).copied(),
        )
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self::from_triplets(
            self.nrows,
            self.ncols,
            self.entries.iter().map(|&(r, c, v)| (r, c, v * factor)),
        )
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(
            self.ncols,
            self.nrows,
            self.entries.iter().map(|&(r, c, v)| (c, r, v.conj())),
        )
    }

    pub fn mul_vec(&self, x: &DVector<C64>) -> DVector<C64> {
        assert_eq!(x.len(), self.ncols);
        let mut y = DVector::zeros(self.nrows);
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
        y
    }

    /// Largest absolute entry of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
            .entries
            .iter()
            .map(|e| e.2.norm())
            .fold(0.0, f64::max)
    }

    /// `max |H - H†|`; zero for Hermitian matrices.
    pub fn hermiticity_defect(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    /// Restriction to the given rows and columns, in the given order.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> DMatrix<C64> {
        let mut row_pos = vec![usize::MAX; self.nrows];
        for (i, &r) in rows.iter().enumerate() {
            row_pos[r] = i;
        }
        let mut col_pos = vec![usize::MAX; self.ncols];
        for (j, &c) in cols.iter().enumerate() {
            col_pos[c] = j;
        }
        let mut m = DMatrix::zeros(rows.len(), cols.len());
        for &(r, c, v) in &self.entries {
            if row_pos[r] != usize::MAX && col_pos[c] != usize::MAX {
                m[(row_pos[r], col_pos[c])] = v;
            }
        }
        m
    }

    /// Writes the plain-text exchange format: a `dim nnz` header line followed
    /// by one `row col re im` line per stored entry, 17 significant digits.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        if self.nrows != self.ncols {
            return Err(Error::DimensionMismatch {
                context: "text export (square matrices only)",
                expected: self.nrows,
                got: self.ncols,
            });
        }
        writeln!(w, "{} {}", self.nrows, self.entries.len())?;
        for &(r, c, v) in &self.entries {
            writeln!(w, "{} {} {:.16e} {:.16e}", r, c, v.re, v.im)?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("missing header".into()))??;
        let mut it = header.split_whitespace();
        let dim: usize = parse_field(it.next(), "dim")?;
        let nnz: usize = parse_field(it.next(), "nnz")?;
        let mut triplets = Vec::with_capacity(nnz);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut f = line.split_whitespace();
            let r: usize = parse_field(f.next(), "row")?;
            let c: usize = parse_field(f.next(), "col")?;
            let re: f64 = parse_field(f.next(), "re")?;
            let im: f64 = parse_field(f.next(), "im")?;
            if r >= dim || c >= dim {
                return Err(Error::Parse(format!(
                    "entry ({r}, {c}) outside dimension {dim}"
                )));
            }
            triplets.push((r, c, C64::new(re, im)));
        }
        if triplets.len() != nnz {
            return Err(Error::Parse(format!(
                "header announces {nnz} entries, found {}",
                triplets.len()
            )));
        }
        Ok(Self::from_triplets(dim, dim, triplets))
    }
}

fn parse_field<T: std::str::FromStr>(field: Option<&str>, name: &str) -> Result<T> {
    field
        .ok_or_else(|| Error::Parse(format!("missing {name}")))?
        .parse()
        .map_err(|_| Error::Parse(format!("bad {name}")))
}
