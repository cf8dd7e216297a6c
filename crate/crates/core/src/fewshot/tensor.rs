use serde::{Deserialize, Serialize};

/// Dense row-major matrix of `f64`. Vectors are `1 × n` or `n × 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "tensor shape does not match data");
        Tensor { rows, cols, data }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn zeros_like(&self) -> Self {
        Tensor::zeros(self.rows, self.cols)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `out[c] += Σ_r x[r] · self[r, c]`
    pub(crate) fn accumulate_vec_mat(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (r, &xr) in x.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(self.row(r)) {
                *o += xr * w;
            }
        }
    }

    /// `self[r, c] += x[r] · g[c]`
    pub(crate) fn add_outer(&mut self, x: &[f64], g: &[f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(g.len(), self.cols);
        for (r, &xr) in x.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            for (o, gc) in self.row_mut(r).iter_mut().zip(g) {
                *o += xr * gc;
            }
        }
    }

    /// `out[r] = Σ_c self[r, c] · g[c]`
    pub(crate) fn mat_vec(&self, g: &[f64]) -> Vec<f64> {
        debug_assert_eq!(g.len(), self.cols);
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(g).map(|(w, x)| w * x).sum())
            .collect()
    }
}
