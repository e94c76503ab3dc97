//! Dense vector kernels.
//!
//! Reductions are evaluated over fixed-size chunks whose partial sums are
//! combined sequentially, so results do not depend on the rayon pool size.

use rayon::prelude::*;

/// Chunk length used for parallel reductions and element-wise maps.
pub const CHUNK: usize = 4096;

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "dot: length mismatch");
    if x.len() <= CHUNK {
        return serial_dot(x, y);
    }
    let partials: Vec<f64> = x
        .par_chunks(CHUNK)
        .zip(y.par_chunks(CHUNK))
        .map(|(a, b)| serial_dot(a, b))
        .collect();
    partials.iter().sum()
}

fn serial_dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// y <- y + a x
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    assert_eq!(x.len(), y.len(), "axpy: length mismatch");
    y.par_chunks_mut(CHUNK)
        .zip(x.par_chunks(CHUNK))
        .for_each(|(yc, xc)| {
            for (yi, xi) in yc.iter_mut().zip(xc) {
                *yi += a * xi;
            }
        });
}

/// y <- a x + b y
pub fn axpby(a: f64, x: &[f64], b: f64, y: &mut [f64]) {
    assert_eq!(x.len(), y.len(), "axpby: length mismatch");
    y.par_chunks_mut(CHUNK)
        .zip(x.par_chunks(CHUNK))
        .for_each(|(yc, xc)| {
            for (yi, xi) in yc.iter_mut().zip(xc) {
                *yi = a * xi + b * *yi;
            }
        });
}

pub fn scale(a: f64, x: &mut [f64]) {
    x.par_chunks_mut(CHUNK).for_each(|c| {
        for v in c {
            *v *= a;
        }
    });
}

/// out <- x - y
pub fn sub(x: &[f64], y: &[f64], out: &mut [f64]) {
    assert_eq!(x.len(), y.len(), "sub: length mismatch");
    assert_eq!(x.len(), out.len(), "sub: length mismatch");
    out.par_chunks_mut(CHUNK)
        .zip(x.par_chunks(CHUNK).zip(y.par_chunks(CHUNK)))
        .for_each(|(oc, (xc, yc))| {
            for ((o, a), b) in oc.iter_mut().zip(xc).zip(yc) {
                *o = a - b;
            }
        });
}
