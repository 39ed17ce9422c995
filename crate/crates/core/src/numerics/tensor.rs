use alloc::vec;
use alloc::vec::Vec;

use super::kernels;
use crate::error::{dim_err, Error, Result};

/// Row-major dense tensor of `f64`.
///
/// Vectors have shape `[n]`, matrices `[rows, cols]`, scalars `[]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::Argument(alloc::format!(
                "tensor shape {shape:?} has a zero extent"
            )));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(dim_err("tensor", &shape, &[data.len()]));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor {
            shape: Vec::new(),
            data: vec![v],
        }
    }

    /// Panics on an empty slice; use [`Tensor::new`] for fallible construction.
    pub fn vector(data: Vec<f64>) -> Self {
        assert!(!data.is_empty(), "empty vector");
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Argument("ragged rows".into()));
        }
        Self::matrix(rows.len(), cols, rows.concat())
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
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

    pub fn is_vector(&self) -> bool {
        self.shape.len() == 1
    }

    pub fn is_matrix(&self) -> bool {
        self.shape.len() == 2
    }

    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(1)
    }

    pub fn cols(&self) -> usize {
        if self.shape.len() == 2 {
            self.shape[1]
        } else {
            1
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let c = self.cols();
        &self.data[row * c..(row + 1) * c]
    }

    /// Single value of a scalar or length-1 tensor.
    pub fn item(&self) -> f64 {
        self.data[0]
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        Self::new(shape.to_vec(), self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn matvec(&self, v: &Tensor) -> Result<Tensor> {
        if !self.is_matrix() || !v.is_vector() || self.shape[1] != v.len() {
            return Err(dim_err("matvec", &self.shape, &v.shape));
        }
        Ok(Tensor::vector(kernels::matvec(&self.data, self.shape[1], &v.data)))
    }

    pub fn outer(&self, v: &Tensor) -> Result<Tensor> {
        if self.is_empty() || v.is_empty() || !self.is_vector() || !v.is_vector() {
            return Err(dim_err("outer", &self.shape, &v.shape));
        }
        let mut out = Tensor::zeros(&[self.len(), v.len()]);
        kernels::outer_acc(&self.data, &v.data, &mut out.data);
        Ok(out)
    }

    pub fn dot(&self, other: &Tensor) -> Result<f64> {
        if self.len() != other.len() {
            return Err(dim_err("dot", &self.shape, &other.shape));
        }
        Ok(kernels::dot(&self.data, &other.data))
    }

    pub fn softmax(&self) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: kernels::softmax(&self.data),
        }
    }

    pub fn log_softmax(&self) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: kernels::log_softmax(&self.data),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn tanh(&self) -> Tensor {
        self.map(libm::tanh)
    }

    pub fn sigmoid(&self) -> Tensor {
        self.map(kernels::sigmoid)
    }

    pub fn scale(&self, alpha: f64) -> Tensor {
        self.map(|v| alpha * v)
    }

    fn zip_with(&self, other: &Tensor, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(dim_err(op, &self.shape, &other.shape));
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "mul", |a, b| a * b)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn norm_sq(&self) -> f64 {
        kernels::dot(&self.data, &self.data)
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| libm::fabs(a - b))
            .fold(0.0, f64::max)
    }

    pub fn argmax(&self) -> usize {
        // first maximum wins, so ties resolve to the lowest index
        let mut best = 0;
        for (i, &v) in self.data.iter().enumerate() {
            if v > self.data[best] {
                best = i;
            }
        }
        best
    }
}

/// Joins vectors end to end.
pub fn concat(parts: &[&Tensor]) -> Result<Tensor> {
    if parts.is_empty() {
        return Err(Error::Argument("concat of nothing".into()));
    }
    let mut data = Vec::with_capacity(parts.iter().map(|p| p.len()).sum());
    for p in parts {
        if p.shape.len() > 1 {
            return Err(dim_err("concat", &p.shape, &[]));
        }
        data.extend_from_slice(&p.data);
    }
    Ok(Tensor::vector(data))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementwiseOp {
    Tanh,
    Sigmoid,
    Mul,
    Add,
    Concat,
}

/// Pointwise dispatch over [`ElementwiseOp`]; unary ops take one argument,
/// binary ops two, concat any positive number.
pub fn elementwise(op: ElementwiseOp, args: &[&Tensor]) -> Result<Tensor> {
    let arity = |n: usize| -> Result<()> {
        if args.len() != n {
            return Err(Error::Argument(alloc::format!(
                "{op:?} takes {n} operand(s), got {}",
                args.len()
            )));
        }
        Ok(())
    };
    match op {
        ElementwiseOp::Tanh => {
            arity(1)?;
            Ok(args[0].tanh())
        }
        ElementwiseOp::Sigmoid => {
            arity(1)?;
            Ok(args[0].sigmoid())
        }
        ElementwiseOp::Mul => {
            arity(2)?;
            args[0].mul(args[1])
        }
        ElementwiseOp::Add => {
            arity(2)?;
            args[0].add(args[1])
        }
        ElementwiseOp::Concat => concat(args),
    }
}
