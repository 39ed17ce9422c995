//! Slice-level kernels shared by eager tensors and the tape.

use alloc::vec::Vec;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // four lanes, fixed reduction order
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn matvec(m: &[f64], cols: usize, x: &[f64]) -> Vec<f64> {
    m.chunks_exact(cols).map(|row| dot(row, x)).collect()
}

/// `out += mᵀ g`
pub fn matvec_t_acc(m: &[f64], cols: usize, g: &[f64], out: &mut [f64]) {
    for (row, &gi) in m.chunks_exact(cols).zip(g) {
        if gi != 0.0 {
            axpy(gi, row, out);
        }
    }
}

/// `out += g xᵀ` for `out` of shape `[len(g), len(x)]`.
pub fn outer_acc(g: &[f64], x: &[f64], out: &mut [f64]) {
    for (row, &gi) in out.chunks_exact_mut(x.len()).zip(g) {
        if gi != 0.0 {
            axpy(gi, x, row);
        }
    }
}

pub fn max(x: &[f64]) -> f64 {
    x.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

pub fn softmax(x: &[f64]) -> Vec<f64> {
    let m = max(x);
    let mut out: Vec<f64> = x.iter().map(|&v| libm::exp(v - m)).collect();
    let z: f64 = out.iter().sum();
    for v in &mut out {
        *v /= z;
    }
    out
}

pub fn log_softmax(x: &[f64]) -> Vec<f64> {
    let m = max(x);
    let z: f64 = x.iter().map(|&v| libm::exp(v - m)).sum();
    let lz = m + libm::log(z);
    x.iter().map(|&v| v - lz).collect()
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}
