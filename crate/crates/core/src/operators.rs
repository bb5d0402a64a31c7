//! Linear measurement processes y = Ax + noise with exact adjoints:
//! inpainting masks, dense Gaussian ensembles, FFT-backed signed partial
//! circulant matrices, block-average downsampling, and identity.

use crate::error::{Error, Result};
use crate::numerics::{fft_circular_convolve, randn, Mat, Rng};
use serde::{Deserialize, Serialize};

/// A linear map R^n → R^m with an exact adjoint.
#[derive(Debug, Clone)]
pub enum MeasurementOperator {
    Identity {
        n: usize,
    },
    /// Rows of the identity indexed by `observed`.
    Mask {
        n: usize,
        observed: Vec<usize>,
    },
    /// Dense matrix, i.i.d. N(0, 1/m) entries when built via [`make_gaussian`].
    Gaussian {
        mat: Mat,
    },
    /// Row subset of circulant(g)·D where g sits in the first row of the
    /// circulant factor and D is a ±1 diagonal.
    CirculantSigned {
        n: usize,
        g: Vec<f64>,
        signs: Vec<f64>,
        rows: Vec<usize>,
    },
    /// Non-overlapping block average of width `factor`.
    Downsample {
        n: usize,
        factor: usize,
    },
}

use MeasurementOperator::*;

impl MeasurementOperator {
    pub fn m(&self) -> usize {
        match self {
            Identity { n } => *n,
            Mask { observed, .. } => observed.len(),
            Gaussian { mat } => mat.rows(),
            CirculantSigned { rows, .. } => rows.len(),
            Downsample { n, factor } => n / factor,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Identity { n } => *n,
            Mask { n, .. } => *n,
            Gaussian { mat } => mat.cols(),
            CirculantSigned { n, .. } => *n,
            Downsample { n, .. } => *n,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Identity { .. } => "identity",
            Mask { .. } => "mask",
            Gaussian { .. } => "gaussian",
            CirculantSigned { .. } => "circulant_signed",
            Downsample { .. } => "downsample",
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n() {
            return Err(Error::DimMismatch {
                context: "operator apply",
                expected: self.n(),
                got: x.len(),
            });
        }
        Ok(match self {
            Identity { .. } => x.to_vec(),
            Mask { observed, .. } => observed.iter().map(|&i| x[i]).collect(),
            Gaussian { mat } => mat.matvec(x)?,
            CirculantSigned { n, g, signs, rows } => {
                // circulant with g in its first row acts as correlation:
                // (Cx)[i] = Σ_j g[(j−i) mod n]·x[j] = conv(rev g, Dx)[i]
                let dx: Vec<f64> = signs.iter().zip(x).map(|(s, v)| s * v).collect();
                let rev_g: Vec<f64> = (0..*n).map(|t| g[(*n - t) % *n]).collect();
                let full = fft_circular_convolve(&rev_g, &dx)?;
                rows.iter().map(|&r| full[r]).collect()
            }
            Downsample { n, factor } => {
                let inv = 1.0 / *factor as f64;
                (0..n / factor)
                    .map(|b| x[b * factor..(b + 1) * factor].iter().sum::<f64>() * inv)
                    .collect()
            }
        })
    }

    pub fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.m() {
            return Err(Error::DimMismatch {
                context: "operator adjoint",
                expected: self.m(),
                got: y.len(),
            });
        }
        Ok(match self {
            Identity { .. } => y.to_vec(),
            Mask { n, observed } => {
                let mut out = vec![0.0; *n];
                for (&i, &v) in observed.iter().zip(y) {
                    out[i] = v;
                }
                out
            }
            Gaussian { mat } => mat.matvec_transpose(y)?,
            CirculantSigned { n, g, signs, rows } => {
                // Aᵀ = D·Cᵀ·Rᵀ and Cᵀ acts as plain convolution with g
                let mut scattered = vec![0.0; *n];
                for (&r, &v) in rows.iter().zip(y) {
                    scattered[r] = v;
                }
                let full = fft_circular_convolve(g, &scattered)?;
                signs.iter().zip(&full).map(|(s, v)| s * v).collect()
            }
            Downsample { n, factor } => {
                let inv = 1.0 / *factor as f64;
                let mut out = vec![0.0; *n];
                for (b, &v) in y.iter().enumerate() {
                    for o in out[b * factor..(b + 1) * factor].iter_mut() {
                        *o = v * inv;
                    }
                }
                out
            }
        })
    }
}

pub fn make_identity(n: usize) -> MeasurementOperator {
    Identity { n }
}

/// Inpainting mask keeping the listed coordinates (unique, in range).
pub fn make_mask(n: usize, observed: Vec<usize>) -> Result<MeasurementOperator> {
    if observed.is_empty() {
        return Err(Error::invalid("mask needs at least one observed index"));
    }
    let mut seen = vec![false; n];
    for &i in &observed {
        if i >= n {
            return Err(Error::invalid(format!("mask index {i} out of range 0..{n}")));
        }
        if seen[i] {
            return Err(Error::invalid(format!("duplicate mask index {i}")));
        }
        seen[i] = true;
    }
    Ok(Mask { n, observed })
}

/// Randomized inpainting: keep each coordinate independently with
/// `keep_prob`. An empty draw is resampled so sweeps stay total.
pub fn make_random_mask(rng: &mut Rng, n: usize, keep_prob: f64) -> Result<MeasurementOperator> {
    if !(keep_prob > 0.0 && keep_prob <= 1.0) {
        return Err(Error::invalid(format!(
            "keep_prob must lie in (0,1], got {keep_prob}"
        )));
    }
    loop {
        let observed: Vec<usize> = (0..n).filter(|_| rng.bernoulli(keep_prob)).collect();
        if !observed.is_empty() {
            return Ok(Mask { n, observed });
        }
    }
}

/// Dense matrix with i.i.d. N(0, 1/m) entries.
pub fn make_gaussian(rng: &mut Rng, m: usize, n: usize) -> Result<MeasurementOperator> {
    if m == 0 || n == 0 {
        return Err(Error::invalid("gaussian operator needs m, n >= 1"));
    }
    let sigma = 1.0 / (m as f64).sqrt();
    let mat = Mat::new(m, n, randn(rng, m * n, sigma))?;
    Ok(Gaussian { mat })
}

/// Signed partial circulant: m rows of circulant(g)·D with g ~ N(0, 1/m)
/// and D = diag(±1). Row subset defaults to the first m rows; pass
/// `random_rows` for a uniformly sampled subset instead.
pub fn make_circulant_signed(
    rng: &mut Rng,
    m: usize,
    n: usize,
    random_rows: bool,
) -> Result<MeasurementOperator> {
    if m == 0 || m > n {
        return Err(Error::invalid(format!(
            "circulant operator needs 1 <= m <= n, got m={m}, n={n}"
        )));
    }
    let g = randn(rng, n, 1.0 / (m as f64).sqrt());
    let signs: Vec<f64> = (0..n).map(|_| rng.sign()).collect();
    let rows = if random_rows {
        let mut r = rng.distinct_indices(n, m);
        r.sort_unstable();
        r
    } else {
        (0..m).collect()
    };
    Ok(CirculantSigned { n, g, signs, rows })
}

/// Circulant operator from explicit parts; used by tests and the wire format.
pub fn circulant_from_parts(
    g: Vec<f64>,
    signs: Vec<f64>,
    rows: Vec<usize>,
) -> Result<MeasurementOperator> {
    let n = g.len();
    if signs.len() != n {
        return Err(Error::DimMismatch {
            context: "circulant signs",
            expected: n,
            got: signs.len(),
        });
    }
    if signs.iter().any(|s| s.abs() != 1.0) {
        return Err(Error::invalid("circulant signs must be ±1"));
    }
    if rows.is_empty() || rows.len() > n || rows.iter().any(|&r| r >= n) {
        return Err(Error::invalid("circulant row subset out of range"));
    }
    Ok(CirculantSigned { n, g, signs, rows })
}

/// Block-average downsampling by `factor` (must divide n).
pub fn make_downsample(n: usize, factor: usize) -> Result<MeasurementOperator> {
    if factor == 0 || n == 0 || !n.is_multiple_of(factor) {
        return Err(Error::invalid(format!(
            "downsample factor {factor} must divide n={n}"
        )));
    }
    Ok(Downsample { n, factor })
}

/// Additive measurement noise, optionally clipped.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub sigma: f64,
    #[serde(default)]
    pub clip: Option<(f64, f64)>,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            sigma: 0.0,
            clip: None,
        }
    }
}

impl NoiseSpec {
    pub fn noiseless() -> Self {
        Self::default()
    }

    pub fn gaussian(sigma: f64) -> Self {
        NoiseSpec { sigma, clip: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma < 0.0 {
            return Err(Error::invalid("noise sigma must be >= 0"));
        }
        if let Some((lo, hi)) = self.clip {
            if lo >= hi {
                return Err(Error::invalid(format!("clip range ({lo},{hi}) is empty")));
            }
        }
        Ok(())
    }
}

/// y = A x + sigma·ε, then optional clipping.
pub fn sense(
    op: &MeasurementOperator,
    x: &[f64],
    noise: &NoiseSpec,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    noise.validate()?;
    let mut y = op.apply(x)?;
    if noise.sigma > 0.0 {
        for v in &mut y {
            *v += rng.normal(noise.sigma);
        }
    }
    if let Some((lo, hi)) = noise.clip {
        for v in &mut y {
            *v = v.clamp(lo, hi);
        }
    }
    Ok(y)
}

/// Serializable operator descriptor: together with its seed it fully
/// determines the measurement process, so reports can be reproduced.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    Identity {
        n: usize,
    },
    Mask {
        n: usize,
        observed: Vec<usize>,
    },
    RandomMask {
        n: usize,
        keep_prob: f64,
        seed: u64,
    },
    Gaussian {
        m: usize,
        n: usize,
        seed: u64,
    },
    CirculantSigned {
        m: usize,
        n: usize,
        seed: u64,
        #[serde(default)]
        random_rows: bool,
    },
    Downsample {
        n: usize,
        factor: usize,
    },
}

impl OperatorSpec {
    pub fn build(&self) -> Result<MeasurementOperator> {
        match self {
            OperatorSpec::Identity { n } => Ok(make_identity(*n)),
            OperatorSpec::Mask { n, observed } => make_mask(*n, observed.clone()),
            OperatorSpec::RandomMask { n, keep_prob, seed } => {
                make_random_mask(&mut Rng::from_seed(*seed), *n, *keep_prob)
            }
            OperatorSpec::Gaussian { m, n, seed } => {
                make_gaussian(&mut Rng::from_seed(*seed), *m, *n)
            }
            OperatorSpec::CirculantSigned {
                m,
                n,
                seed,
                random_rows,
            } => make_circulant_signed(&mut Rng::from_seed(*seed), *m, *n, *random_rows),
            OperatorSpec::Downsample { n, factor } => make_downsample(*n, *factor),
        }
    }

    pub fn signal_dim(&self) -> usize {
        match self {
            OperatorSpec::Identity { n }
            | OperatorSpec::Mask { n, .. }
            | OperatorSpec::RandomMask { n, .. }
            | OperatorSpec::Gaussian { n, .. }
            | OperatorSpec::CirculantSigned { n, .. }
            | OperatorSpec::Downsample { n, .. } => *n,
        }
    }
}
