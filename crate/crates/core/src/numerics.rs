//! Dense vectors and matrices, seeded sampling, FFT circular convolution,
//! and spectral-norm estimation. Everything downstream builds on this module.
//!
//! All values are `f64`. Vectors are plain `Vec<f64>` / `&[f64]`; only
//! matrices get a dedicated type (row-major storage).

use crate::error::{Error, Result};
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("matrix dimensions must be positive"));
        }
        if data.len() != rows * cols {
            return Err(Error::DimMismatch {
                context: "Mat::new data length",
                expected: rows * cols,
                got: data.len(),
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("matrix entries must be finite"));
        }
        Ok(Mat { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// y = A x
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimMismatch {
                context: "matvec",
                expected: self.cols,
                got: x.len(),
            });
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    /// y = Aᵀ x
    pub fn matvec_transpose(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.rows {
            return Err(Error::DimMismatch {
                context: "matvec_transpose",
                expected: self.rows,
                got: x.len(),
            });
        }
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * xi;
            }
        }
        Ok(out)
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Seeded pseudo-random generator.
///
/// Wraps ChaCha8 keyed by a 64-bit seed; identical seed and call sequence
/// reproduce identical draws within this implementation. Normal variates
/// come from the ziggurat sampler of `rand_distr` (pinned by Cargo.lock),
/// so cross-version bit-equality is not promised, only reproducibility
/// within a build.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn from_seed(seed: u64) -> Self {
        Rng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derive an independent child generator; advances this generator.
    pub fn fork(&mut self) -> Rng {
        Rng::from_seed(self.inner.random::<u64>())
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    pub fn normal(&mut self, sigma: f64) -> f64 {
        sigma * self.standard_normal()
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    /// ±1 with equal probability.
    pub fn sign(&mut self) -> f64 {
        if self.inner.random::<bool>() {
            1.0
        } else {
            -1.0
        }
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Sample `count` distinct indices from 0..n (partial Fisher-Yates).
    pub fn distinct_indices(&mut self, n: usize, count: usize) -> Vec<usize> {
        assert!(count <= n, "cannot sample {count} distinct from {n}");
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..count {
            let j = i + self.index(n - i);
            pool.swap(i, j);
        }
        pool.truncate(count);
        pool
    }
}

/// Derive a child seed from a base seed and two indices (splitmix64 mixing);
/// used to give every (sweep value, trial) pair its own stream.
pub fn mix_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut x = base
        .wrapping_add(a.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(b.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// n i.i.d. draws from Normal(0, sigma²).
pub fn randn(rng: &mut Rng, n: usize, sigma: f64) -> Vec<f64> {
    assert!(n >= 1, "randn needs n >= 1");
    assert!(sigma >= 0.0, "randn needs sigma >= 0");
    (0..n).map(|_| rng.normal(sigma)).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn norm2_sq(v: &[f64]) -> f64 {
    dot(v, v)
}

pub fn norm1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(v: &[f64], s: f64) -> Vec<f64> {
    v.iter().map(|x| x * s).collect()
}

/// Mean squared error per coordinate: ‖a − b‖²/n.
pub fn mse(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    norm2_sq(&sub(a, b)) / a.len() as f64
}

/// Full circulant action: `out[i] = Σ_j g[(i−j) mod n]·x[j]`.
///
/// Computed in the Fourier domain; rustfft handles arbitrary n, so no
/// explicit padding path is needed.
pub fn fft_circular_convolve(g: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    if g.len() != x.len() {
        return Err(Error::DimMismatch {
            context: "fft_circular_convolve",
            expected: g.len(),
            got: x.len(),
        });
    }
    if g.is_empty() {
        return Err(Error::invalid("fft_circular_convolve needs n >= 1"));
    }
    let n = g.len();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);

    let mut gf: Vec<Complex<f64>> = g.iter().map(|&v| Complex::new(v, 0.0)).collect();
    let mut xf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft.process(&mut gf);
    fft.process(&mut xf);
    for (a, b) in gf.iter_mut().zip(&xf) {
        *a *= b;
    }
    ifft.process(&mut gf);
    let inv_n = 1.0 / n as f64;
    Ok(gf.iter().map(|c| c.re * inv_n).collect())
}

/// Result of power-iteration spectral norm estimation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralNorm {
    pub value: f64,
    pub converged: bool,
}

/// Largest singular value of `w` by power iteration on WᵀW.
///
/// The Rayleigh-quotient estimate approaches σ_max from below, so a
/// converged value is within σ_max·(1+tol). The zero matrix reports 0,
/// converged. Start vector is seeded internally for determinism.
pub fn spectral_norm(w: &Mat, iters: usize, tol: f64) -> SpectralNorm {
    assert!(iters >= 1, "spectral_norm needs iters >= 1");
    if w.frobenius_norm() == 0.0 {
        return SpectralNorm {
            value: 0.0,
            converged: true,
        };
    }
    let mut rng = Rng::from_seed(0x5eed_0123);
    let mut v = randn(&mut rng, w.cols(), 1.0);
    let nv = norm2(&v);
    for x in &mut v {
        *x /= nv;
    }
    let mut sigma = 0.0;
    let mut converged = false;
    for _ in 0..iters {
        let wv = w.matvec(&v).expect("dims fixed");
        let wtwv = w.matvec_transpose(&wv).expect("dims fixed");
        let norm = norm2(&wtwv);
        if norm == 0.0 {
            // v landed in the null space; restart from a fresh direction
            v = randn(&mut rng, w.cols(), 1.0);
            let nv = norm2(&v);
            for x in &mut v {
                *x /= nv;
            }
            continue;
        }
        let next = norm2(&wv);
        for (vi, wi) in v.iter_mut().zip(&wtwv) {
            *vi = wi / norm;
        }
        if (next - sigma).abs() <= tol * next.max(f64::MIN_POSITIVE) {
            sigma = next;
            converged = true;
            break;
        }
        sigma = next;
    }
    SpectralNorm {
        value: sigma,
        converged,
    }
}
