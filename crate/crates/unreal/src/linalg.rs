//! Minimal dense matrix support for the training kernels.
//!
//! Row-major `f64` storage. Multiplications parallelize over output rows;
//! within a row the accumulation order is fixed, so results are identical
//! to the sequential evaluation regardless of thread count.

use rayon::prelude::*;

#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in &rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols: c, data }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    /// `self · other`, parallel over rows of the output.
    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        let cols = self.cols;
        let ocols = other.cols;
        out.data
            .par_chunks_mut(ocols)
            .enumerate()
            .for_each(|(i, orow)| {
                let arow = &self.data[i * cols..(i + 1) * cols];
                for (k, &a) in arow.iter().enumerate() {
                    if a == 0.0 {
                        continue;
                    }
                    let brow = &other.data[k * ocols..(k + 1) * ocols];
                    for (o, &b) in orow.iter_mut().zip(brow) {
                        *o += a * b;
                    }
                }
            });
        out
    }

    /// `selfᵀ · other` without materializing the transpose.
    pub fn transpose_matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.rows, other.rows, "transpose_matmul shape mismatch");
        let mut out = Mat::zeros(self.cols, other.cols);
        let ocols = other.cols;
        // Accumulate sequentially over the shared row dimension; k-order is
        // fixed so the result does not depend on scheduling.
        for k in 0..self.rows {
            let arow = self.row(k);
            let brow = other.row(k);
            for (i, &a) in arow.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let orow = &mut out.data[i * ocols..(i + 1) * ocols];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self · otherᵀ`.
    pub fn matmul_transpose(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.cols, "matmul_transpose shape mismatch");
        let mut out = Mat::zeros(self.rows, other.rows);
        let cols = self.cols;
        let ocols = other.rows;
        out.data
            .par_chunks_mut(ocols)
            .enumerate()
            .for_each(|(i, orow)| {
                let arow = &self.data[i * cols..(i + 1) * cols];
                for (j, o) in orow.iter_mut().enumerate() {
                    let brow = &other.data[j * cols..(j + 1) * cols];
                    let mut acc = 0.0;
                    for (&a, &b) in arow.iter().zip(brow) {
                        acc += a * b;
                    }
                    *o = acc;
                }
            });
        out
    }

    pub fn add_assign(&mut self, other: &Mat) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in &mut self.data {
            *a *= s;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Squared Euclidean distance between two equal-length vectors.
#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_small() {
        let a = Mat::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let b = Mat::from_rows(vec![vec![5.0, 6.0], vec![7.0, 8.0]]);
        let c = a.matmul(&b);
        assert_eq!(c.data, vec![19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn transpose_variants_agree_with_explicit_transpose() {
        let a = Mat::from_rows(vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);
        let b = Mat::from_rows(vec![vec![1.0, 0.0], vec![2.0, 1.0]]);
        // aᵀ(2x3→3x2 transposed) · b
        let atb = a.transpose_matmul(&b);
        assert_eq!(atb.rows, 3);
        assert_eq!(atb.cols, 2);
        assert_eq!(atb.get(0, 0), 1.0 * 1.0 + 4.0 * 2.0);
        assert_eq!(atb.get(2, 1), 3.0 * 0.0 + 6.0 * 1.0);

        let c = Mat::from_rows(vec![vec![1.0, 2.0, 3.0]]);
        let cat = c.matmul_transpose(&a);
        assert_eq!(cat.rows, 1);
        assert_eq!(cat.cols, 2);
        assert_eq!(cat.get(0, 0), 14.0);
        assert_eq!(cat.get(0, 1), 32.0);
    }

    #[test]
    fn distances() {
        assert_eq!(sq_dist(&[0.0, 0.0], &[3.0, 4.0]), 25.0);
        assert_eq!(euclidean(&[0.0, 0.0], &[3.0, 4.0]), 5.0);
    }
}
