//! Small dense complex-vector kernels.
//!
//! None of these functions touch an [`OpCounter`](crate::OpCounter); callers
//! account for the multiplications they trigger, so every count sits next to
//! the operation that produced it.

use crate::C64;

/// `aᴴ b`.
#[inline]
pub fn dot_conj(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

#[inline]
pub fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

#[inline]
pub fn norm(v: &[C64]) -> f64 {
    norm_sqr(v).sqrt()
}

/// `y ← y − alpha·x`.
#[inline]
pub fn sub_scaled(y: &mut [C64], alpha: C64, x: &[C64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi -= alpha * xi;
    }
}

pub fn scale(v: &mut [C64], s: f64) {
    for z in v {
        *z *= s;
    }
}

/// Kronecker product of two vectors, `a` varying slowest.
pub fn kron(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        out.extend(b.iter().map(|&y| x * y));
    }
    out
}

/// Kronecker product of a list of vectors in the given order.
pub fn kron_all<V: AsRef<[C64]>>(factors: &[V]) -> Vec<C64> {
    factors
        .iter()
        .fold(vec![C64::new(1.0, 0.0)], |acc, f| kron(&acc, f.as_ref()))
}

/// Contract a row-major `lead × trailing` tensor with `conj(atom)` along its
/// leading axis: `out[r] = Σ_n conj(atom[n]) · tensor[n·trailing + r]`.
pub fn contract_leading(atom: &[C64], tensor: &[C64], trailing: usize, out: &mut [C64]) {
    debug_assert_eq!(atom.len() * trailing, tensor.len());
    debug_assert_eq!(out.len(), trailing);
    out.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
    for (a, row) in atom.iter().zip(tensor.chunks_exact(trailing)) {
        let w = a.conj();
        for (o, x) in out.iter_mut().zip(row) {
            *o += w * x;
        }
    }
}
