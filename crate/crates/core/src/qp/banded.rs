//! Cholesky factorization of symmetric positive definite band matrices.

use nalgebra::DVector;

/// Lower band of a symmetric matrix: row `i` stores columns `i - bw ..= i`.
#[derive(Clone, Debug)]
pub struct SymmetricBand {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl SymmetricBand {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (j + self.bw - i)
    }

    /// Adds `v` to entry `(i, j)` of the symmetric matrix (either triangle).
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    /// In-place `L L^T` factorization. Returns `None` if a pivot is not
    /// strictly positive.
    pub fn cholesky(mut self) -> Option<BandCholesky> {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let lo_i = i.saturating_sub(bw);
            for j in lo_i..=i {
                let lo = lo_i.max(j.saturating_sub(bw));
                let mut sum = self.data[self.idx(i, j)];
                let ri = i * (bw + 1) + bw - i;
                let rj = j * (bw + 1) + bw - j;
                for k in lo..j {
                    sum -= self.data[ri + k] * self.data[rj + k];
                }
                let pos = self.idx(i, j);
                if i == j {
                    if !(sum > 0.0) || !sum.is_finite() {
                        return None;
                    }
                    self.data[pos] = sum.sqrt();
                } else {
                    self.data[pos] = sum / self.data[self.idx(j, j)];
                }
            }
        }
        Some(BandCholesky { band: self })
    }
}

#[derive(Clone, Debug)]
pub struct BandCholesky {
    band: SymmetricBand,
}

impl BandCholesky {
    /// Solves `L L^T x = b` in place.
    pub fn solve_in_place(&self, b: &mut DVector<f64>) {
        let (n, bw) = (self.band.n, self.band.bw);
        let l = &self.band.data;
        for i in 0..n {
            let row = i * (bw + 1) + bw - i;
            let mut s = b[i];
            for k in i.saturating_sub(bw)..i {
                s -= l[row + k] * b[k];
            }
            b[i] = s / l[row + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for r in i + 1..(i + bw + 1).min(n) {
                s -= l[r * (bw + 1) + bw - r + i] * b[r];
            }
            b[i] = s / l[i * (bw + 1) + bw];
        }
    }
}
