//! Dense row-major tensors and the matrix kernels behind the graph ops.

use crate::error::{Error, Result};
use crate::exec::Exec;

/// Work (multiply-adds) below which kernels stay on the calling thread.
const PAR_MIN_WORK: usize = 1 << 15;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::Shape(format!("zero-sized dimension in {shape:?}")));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![v],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Tensor::new(vec![n, m], rows.concat())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// Size of the last axis.
    pub fn cols(&self) -> usize {
        *self.shape.last().unwrap_or(&1)
    }

    /// Product of all axes but the last.
    pub fn rows(&self) -> usize {
        self.data.len() / self.cols().max(1)
    }

    pub fn reshaped(mut self, shape: Vec<usize>) -> Result<Self> {
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} to {shape:?}",
                self.shape
            )));
        }
        self.shape = shape;
        Ok(self)
    }
}

fn exec_for(exec: Exec, work: usize) -> Exec {
    if work >= PAR_MIN_WORK {
        exec
    } else {
        Exec::Sequential
    }
}

/// `a[n,k] · b[k,m]`.
pub fn matmul(a: &[f64], b: &[f64], n: usize, k: usize, m: usize, exec: Exec) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    exec_for(exec, n * k * m).for_each_chunk(&mut out, m, |i, row| {
        let a_row = &a[i * k..(i + 1) * k];
        for (p, &av) in a_row.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let b_row = &b[p * m..(p + 1) * m];
            for (o, &bv) in row.iter_mut().zip(b_row) {
                *o += av * bv;
            }
        }
    });
    out
}

/// `a[n,m] · b[k,m]ᵀ`, giving `[n,k]`.
pub fn matmul_a_bt(a: &[f64], b: &[f64], n: usize, m: usize, k: usize, exec: Exec) -> Vec<f64> {
    let mut out = vec![0.0; n * k];
    exec_for(exec, n * k * m).for_each_chunk(&mut out, k, |i, row| {
        let a_row = &a[i * m..(i + 1) * m];
        for (j, o) in row.iter_mut().enumerate() {
            let b_row = &b[j * m..(j + 1) * m];
            *o = a_row.iter().zip(b_row).map(|(x, y)| x * y).sum();
        }
    });
    out
}

/// `a[n,k]ᵀ · b[n,m]`, giving `[k,m]`.
pub fn matmul_at_b(a: &[f64], b: &[f64], n: usize, k: usize, m: usize, exec: Exec) -> Vec<f64> {
    let mut out = vec![0.0; k * m];
    exec_for(exec, n * k * m).for_each_chunk(&mut out, m, |i, row| {
        for r in 0..n {
            let av = a[r * k + i];
            if av == 0.0 {
                continue;
            }
            let b_row = &b[r * m..(r + 1) * m];
            for (o, &bv) in row.iter_mut().zip(b_row) {
                *o += av * bv;
            }
        }
    });
    out
}
