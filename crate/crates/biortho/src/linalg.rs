//! Complex dense matrices stored as real/imaginary pairs so that products
//! go through the real gemm kernels.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

/// Row block size for parallel products; fixed so that results do not
/// depend on the worker count.
const ROW_BLOCK: usize = 64;

#[derive(Clone, Debug)]
pub struct CMat {
    pub re: DMatrix<f64>,
    pub im: DMatrix<f64>,
}

impl CMat {
    pub fn nrows(&self) -> usize {
        self.re.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.re.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.re[(i, j)], self.im[(i, j)])
    }

    /// Builds the matrix row by row in parallel.
    pub fn from_fn<F>(rows: usize, cols: usize, f: F) -> CMat
    where
        F: Fn(usize, usize) -> Complex64 + Sync,
    {
        let data: Vec<Vec<Complex64>> = (0..rows)
            .into_par_iter()
            .map(|i| (0..cols).map(|j| f(i, j)).collect())
            .collect();
        let mut re = DMatrix::zeros(rows, cols);
        let mut im = DMatrix::zeros(rows, cols);
        for (i, row) in data.iter().enumerate() {
            for (j, z) in row.iter().enumerate() {
                re[(i, j)] = z.re;
                im[(i, j)] = z.im;
            }
        }
        CMat { re, im }
    }

    /// Entrywise modulus.
    pub fn abs(&self) -> DMatrix<f64> {
        self.re.zip_map(&self.im, f64::hypot)
    }

    pub fn mul(&self, other: &CMat) -> CMat {
        assert_eq!(self.ncols(), other.nrows());
        let rows = self.nrows();
        let cols = other.ncols();
        let blocks: Vec<usize> = (0..rows).step_by(ROW_BLOCK).collect();
        let parts: Vec<(usize, DMatrix<f64>, DMatrix<f64>)> = blocks
            .par_iter()
            .map(|&i0| {
                let n = ROW_BLOCK.min(rows - i0);
                let ar = self.re.rows(i0, n);
                let ai = self.im.rows(i0, n);
                let re = &ar * &other.re - &ai * &other.im;
                let im = &ar * &other.im + &ai * &other.re;
                (i0, re, im)
            })
            .collect();
        let mut re = DMatrix::zeros(rows, cols);
        let mut im = DMatrix::zeros(rows, cols);
        for (i0, pr, pi) in parts {
            re.rows_mut(i0, pr.nrows()).copy_from(&pr);
            im.rows_mut(i0, pi.nrows()).copy_from(&pi);
        }
        CMat { re, im }
    }
}

/// Determinant of a complex matrix via LU with partial pivoting.
pub fn complex_det(m: &CMat) -> Complex64 {
    let n = m.nrows();
    let a = DMatrix::from_fn(n, n, |i, j| m.get(i, j));
    a.lu().determinant()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_matches_naive() {
        let a = CMat::from_fn(70, 5, |i, j| Complex64::new(i as f64 * 0.1, j as f64 - 1.0));
        let b = CMat::from_fn(5, 3, |i, j| Complex64::new(1.0 / (1.0 + i as f64), j as f64));
        let c = a.mul(&b);
        for i in [0, 33, 69] {
            for j in 0..3 {
                let mut s = Complex64::new(0.0, 0.0);
                for k in 0..5 {
                    s += a.get(i, k) * b.get(k, j);
                }
                assert!((s - c.get(i, j)).norm() < 1e-12);
            }
        }
    }
}
