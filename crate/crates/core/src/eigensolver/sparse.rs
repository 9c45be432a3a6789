use std::io::{Read, Write};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};

const MAGIC: &[u8; 5] = b"QLMX1";

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Triplets are summed per (row, column) in their given order after a stable sort.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(u32, u32, f64)>) -> Self {
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(u32, u32)> = None;
        for (i, j, v) in triplets {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(j);
                values.push(v);
                indptr[i as usize + 1] += 1;
                last = Some((i, j));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        CsrMatrix { nrows, ncols, indptr, indices, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()]
            .iter()
            .zip(&self.values[span])
            .map(|(&j, &v)| (j as usize, v))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.indptr[i]..self.indptr[i + 1];
        match self.indices[span.clone()].binary_search(&(j as u32)) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nrows)
            .into_par_iter()
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// A·X for a dense block X.
    pub fn mul_block(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let m = x.ncols();
        let rows: Vec<Vec<f64>> = (0..self.nrows)
            .into_par_iter()
            .with_min_len(256)
            .map(|i| {
                let mut acc = vec![0.0; m];
                for (j, v) in self.row(i) {
                    for (c, a) in acc.iter_mut().enumerate() {
                        *a += v * x[(j, c)];
                    }
                }
                acc
            })
            .collect();
        DMatrix::from_fn(self.nrows, m, |i, c| rows[i][c])
    }

    /// xᵀ A y.
    pub fn form(&self, x: &[f64], y: &[f64]) -> f64 {
        let ay = self.mul_vec(y);
        x.iter().zip(&ay).map(|(a, b)| a * b).sum()
    }

    /// max |Aᵢⱼ − Aⱼᵢ| relative to max |Aᵢⱼ|.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut worst = 0.0f64;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        if scale > 0.0 {
            worst / scale
        } else {
            0.0
        }
    }

    /// Binary dump: magic, u64 rows/cols/nnz, then (u32 i, u32 j, f64 v) row-major, little-endian.
    pub fn write_qlmx<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        for v in [self.nrows as u64, self.ncols as u64, self.nnz() as u64] {
            w.write_all(&v.to_le_bytes())?;
        }
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                w.write_all(&(i as u32).to_le_bytes())?;
                w.write_all(&(j as u32).to_le_bytes())?;
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_qlmx<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::InvalidArgument("not a QLMX1 stream".into()));
        }
        let mut u64s = [0u64; 3];
        for v in u64s.iter_mut() {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            *v = u64::from_le_bytes(b);
        }
        let [nrows, ncols, nnz] = u64s.map(|v| v as usize);
        let mut trip = Vec::with_capacity(nnz);
        let mut rec = [0u8; 16];
        for _ in 0..nnz {
            r.read_exact(&mut rec)?;
            let i = u32::from_le_bytes(rec[0..4].try_into().unwrap());
            let j = u32::from_le_bytes(rec[4..8].try_into().unwrap());
            let v = f64::from_le_bytes(rec[8..16].try_into().unwrap());
            trip.push((i, j, v));
        }
        Ok(Self::from_triplets(nrows, ncols, trip))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CsrMatrix {
        CsrMatrix::from_triplets(
            3,
            3,
            vec![(2, 0, 1.0), (0, 0, 2.0), (1, 1, 3.0), (0, 0, 0.5), (0, 2, 1.0), (2, 2, 4.0)],
        )
    }

    #[test]
    fn duplicates_are_summed() {
        let a = sample();
        assert_eq!(a.nnz(), 5);
        assert_eq!(a.get(0, 0), 2.5);
        assert_eq!(a.diagonal(), vec![2.5, 3.0, 4.0]);
        assert_eq!(a.mul_vec(&[1.0, 1.0, 1.0]), vec![3.5, 3.0, 5.0]);
        assert_eq!(a.asymmetry(), 0.0);
    }

    #[test]
    fn qlmx_round_trip() {
        let a = sample();
        let mut buf = Vec::new();
        a.write_qlmx(&mut buf).unwrap();
        assert_eq!(&buf[..5], b"QLMX1");
        assert_eq!(buf.len(), 5 + 24 + 16 * a.nnz());
        assert_eq!(u64::from_le_bytes(buf[21..29].try_into().unwrap()), 5);
        assert_eq!(CsrMatrix::read_qlmx(&buf[..]).unwrap(), a);
        assert!(CsrMatrix::read_qlmx(&b"QLMX2"[..]).is_err());
    }

    #[test]
    fn block_product_matches_columns() {
        let a = sample();
        let x = DMatrix::from_column_slice(3, 2, &[1.0, 2.0, 3.0, -1.0, 0.0, 1.0]);
        let y = a.mul_block(&x);
        for c in 0..2 {
            let col: Vec<f64> = x.column(c).iter().copied().collect();
            let expect = a.mul_vec(&col);
            for i in 0..3 {
                assert_eq!(y[(i, c)], expect[i]);
            }
        }
    }
}
