//! Executable covering-number and sample-complexity machinery: l1-ball cover
//! bounds (empirical-average construction, volumetric, Sudakov), net
//! enumeration and sampling, measurement-count and error-bound evaluation,
//! and Monte-Carlo certification of the set-restricted eigenvalue condition.
//!
//! All covering bounds are in nats.

use crate::error::{Error, Result};
use crate::generator::GeneratorSplit;
use crate::numerics::{norm2, randn, Rng};
use crate::operators::MeasurementOperator;
use crate::projections::project_l2;
use serde::{Deserialize, Serialize};

/// Parameters feeding the bounds: dims (k, p, n), the free radius parameter
/// K ≤ √p, net resolution δ, contraction γ, input radius r1, Lipschitz
/// bounds L1/L2, and the explicit constant C standing in for the hidden
/// big-Ω factor.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TheoryParams {
    pub k: usize,
    pub p: usize,
    pub n: usize,
    pub big_k: f64,
    pub delta: f64,
    pub gamma: f64,
    pub r1: f64,
    pub l1: f64,
    pub l2: f64,
    #[serde(default = "default_c")]
    pub c: f64,
}

fn default_c() -> f64 {
    1.0
}

impl TheoryParams {
    /// Intermediate l1 radius r2 = K·δ/L2.
    pub fn r2(&self) -> f64 {
        self.big_k * self.delta / self.l2
    }

    pub fn validate(&self) -> Result<()> {
        if self.big_k <= 1.0 || self.big_k > (self.p as f64).sqrt() {
            return Err(Error::invalid(format!(
                "K must satisfy 1 < K <= sqrt(p); got K={}, p={}",
                self.big_k, self.p
            )));
        }
        if self.delta <= 0.0 || self.gamma <= 0.0 || self.gamma >= 1.0 {
            return Err(Error::invalid("need delta > 0 and gamma in (0,1)"));
        }
        if self.r1 <= 0.0 || self.l1 <= 0.0 || self.l2 <= 0.0 || self.c <= 0.0 {
            return Err(Error::invalid("r1, L1, L2, C must be positive"));
        }
        Ok(())
    }
}

/// Empirical-average cover bound: log N ≤ (r²/δ²)·log(2d+1).
pub fn bound_maurey(r: f64, delta: f64, d: usize) -> f64 {
    assert!(r > 0.0 && delta > 0.0 && d >= 1);
    (r * r) / (delta * delta) * ((2 * d + 1) as f64).ln()
}

/// Volumetric cover bound: log N ≤ d·log(4r/δ), floored at 0.
pub fn bound_volumetric(r: f64, delta: f64, d: usize) -> f64 {
    assert!(r > 0.0 && delta > 0.0 && d >= 1);
    if delta >= 4.0 * r {
        return 0.0;
    }
    d as f64 * (4.0 * r / delta).ln()
}

/// Sudakov-route cover bound: log N ≤ 16·(r²/δ²)·log d. Needs d ≥ 2
/// (log 1 = 0 degenerates the bound).
pub fn bound_sudakov(r: f64, delta: f64, d: usize) -> f64 {
    assert!(d >= 2, "bound_sudakov needs d >= 2");
    assert!(r > 0.0 && delta > 0.0);
    16.0 * (r * r) / (delta * delta) * (d as f64).ln()
}

/// Atom count t = ceil(r²/δ²) of the empirical-average net.
pub fn maurey_t(r: f64, delta: f64) -> usize {
    ((r * r) / (delta * delta)).ceil() as usize
}

const ENUMERATION_BUDGET: f64 = 1e6;

/// δ-net of B₁^d(r) built from averages of t atoms drawn from
/// {±r·e_i, 0}. `points` is populated in enumerate mode; sampling mode
/// keeps only the recipe and draws on demand via [`MaureyNet::sample_for`].
#[derive(Debug, Clone)]
pub struct MaureyNet {
    pub d: usize,
    pub r: f64,
    pub delta: f64,
    pub t: usize,
    pub points: Option<Vec<Vec<f64>>>,
}

impl MaureyNet {
    /// Enumerate all distinct t-atom averages. These are exactly the lattice
    /// points (r/t)·c with c ∈ Z^d, ‖c‖₁ ≤ t, so deduplication is exact by
    /// construction. Nominal count (2d+1)^t must stay within budget.
    pub fn enumerate(d: usize, r: f64, delta: f64) -> Result<Self> {
        assert!(d >= 1 && r > 0.0 && delta > 0.0);
        let t = maurey_t(r, delta);
        let nominal = ((2 * d + 1) as f64).powi(t as i32);
        if nominal > ENUMERATION_BUDGET {
            return Err(Error::BudgetExceeded(format!(
                "(2d+1)^t = {nominal:.3e} exceeds {ENUMERATION_BUDGET:.0e}"
            )));
        }
        let mut points = Vec::new();
        let mut coeff = vec![0i64; d];
        enumerate_lattice(d, t as i64, 0, &mut coeff, &mut points, r / t as f64);
        Ok(MaureyNet {
            d,
            r,
            delta,
            t,
            points: Some(points),
        })
    }

    /// Sampling-mode net (no materialized points).
    pub fn sampler(d: usize, r: f64, delta: f64) -> Self {
        assert!(d >= 1 && r > 0.0 && delta > 0.0);
        MaureyNet {
            d,
            r,
            delta,
            t: maurey_t(r, delta),
            points: None,
        }
    }

    /// Draw one t-atom average targeting `x` ∈ B₁^d(r): atom i is
    /// sgn(x_j)·r·e_j with probability |x_j|/r, else 0. The expected squared
    /// distance to `x` is r·‖x‖₁/t ≤ δ².
    pub fn sample_for(&self, x: &[f64], rng: &mut Rng) -> Vec<f64> {
        assert_eq!(x.len(), self.d);
        let mut acc = vec![0.0; self.d];
        for _ in 0..self.t {
            let mut u = rng.uniform() * self.r;
            for (j, &xj) in x.iter().enumerate() {
                u -= xj.abs();
                if u < 0.0 {
                    acc[j] += xj.signum() * self.r;
                    break;
                }
            }
            // falling through leaves the zero atom
        }
        let inv_t = 1.0 / self.t as f64;
        acc.iter_mut().for_each(|a| *a *= inv_t);
        acc
    }

    pub fn len(&self) -> usize {
        self.points.as_ref().map_or(0, |p| p.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn enumerate_lattice(
    d: usize,
    budget: i64,
    axis: usize,
    coeff: &mut Vec<i64>,
    out: &mut Vec<Vec<f64>>,
    unit: f64,
) {
    if axis == d {
        out.push(coeff.iter().map(|&c| c as f64 * unit).collect());
        return;
    }
    for c in -budget..=budget {
        coeff[axis] = c;
        enumerate_lattice(d, budget - c.abs(), axis + 1, coeff, out, unit);
    }
    coeff[axis] = 0;
}

/// Measurement count with the flag set when the k-term's log is floored.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct SampleComplexity {
    pub m: usize,
    pub log_term_floored: bool,
}

/// m = ceil( C/(1−γ)² · (k·log(L1·L2·r1/δ) + K²·log p) ).
pub fn sample_complexity(tp: &TheoryParams) -> SampleComplexity {
    let ratio = tp.l1 * tp.l2 * tp.r1 / tp.delta;
    let log_term_floored = ratio <= 1.0;
    let k_term = tp.k as f64 * ratio.ln().max(0.0);
    let p_term = tp.big_k * tp.big_k * (tp.p as f64).ln();
    let m = (tp.c / ((1.0 - tp.gamma) * (1.0 - tp.gamma)) * (k_term + p_term)).ceil();
    SampleComplexity {
        m: m as usize,
        log_term_floored,
    }
}

/// Additive slack of the recovery bound:
/// δ·(log(4K)/γ)·(√p/K)·log(√p/K), floored at 0 when K ≥ √p.
pub fn additive_error_term(tp: &TheoryParams) -> f64 {
    let sqrt_p = (tp.p as f64).sqrt();
    let log_factor = (sqrt_p / tp.big_k).ln();
    if log_factor <= 0.0 {
        return 0.0;
    }
    tp.delta * ((4.0 * tp.big_k).ln() / tp.gamma) * (sqrt_p / tp.big_k) * log_factor
}

/// Right side of the recovery guarantee:
/// (1 + 4/γ)·oracle_error + additive term.
pub fn error_bound_rhs(tp: &TheoryParams, oracle_error: f64) -> f64 {
    assert!(oracle_error >= 0.0);
    (1.0 + 4.0 / tp.gamma) * oracle_error + additive_error_term(tp)
}

/// Smallest δ making ‖A(x1−x2)‖ ≥ γ‖x1−x2‖ − δ hold over sampled pairs:
/// max(0, max over pairs of γ‖x1−x2‖ − ‖A(x1−x2)‖). A Monte-Carlo
/// necessary-condition check, not a proof.
pub fn srec_check(
    op: &MeasurementOperator,
    mut sampler: impl FnMut(&mut Rng) -> Vec<f64>,
    gamma: f64,
    pairs: usize,
    rng: &mut Rng,
) -> f64 {
    assert!(pairs >= 1);
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let x1 = sampler(rng);
        let x2 = sampler(rng);
        let diff: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a - b).collect();
        let lhs = norm2(&op.apply(&diff).expect("sampler dim matches operator"));
        let rhs = gamma * norm2(&diff);
        worst = worst.max(rhs - lhs);
    }
    worst
}

/// A point of G2(G1(B₂^k(r1)) ⊕ B₁^p(r2)) with its planted witnesses.
#[derive(Debug, Clone)]
pub struct ExtendedRangeSample {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub v: Vec<f64>,
}

/// Draw x = G2(G1(z) + v): z uniform in the r1-ball (uniform direction,
/// radius r1·u^(1/k)), v s-sparse with exponential magnitudes normalized to
/// l1 mass `v_l1` and uniform signs/support.
pub fn extended_range_sample(
    split: &GeneratorSplit,
    r1: f64,
    v_l1: f64,
    sparsity: usize,
    rng: &mut Rng,
) -> Result<ExtendedRangeSample> {
    let k = split.prefix.in_dim();
    let p = split.intermediate_dim();
    if sparsity > p {
        return Err(Error::invalid(format!(
            "sparsity {sparsity} exceeds intermediate dim {p}"
        )));
    }
    let dir = randn(rng, k, 1.0);
    let nd = norm2(&dir).max(f64::MIN_POSITIVE);
    let radius = r1 * rng.uniform().powf(1.0 / k as f64);
    let z: Vec<f64> = dir.iter().map(|d| d / nd * radius).collect();
    let z = project_l2(&z, &vec![0.0; k], r1);

    let mut v = vec![0.0; p];
    if v_l1 > 0.0 && sparsity > 0 {
        let support = rng.distinct_indices(p, sparsity);
        let mut mags: Vec<f64> = (0..sparsity)
            .map(|_| -rng.uniform().max(f64::MIN_POSITIVE).ln())
            .collect();
        let total: f64 = mags.iter().sum();
        for m in &mut mags {
            *m *= v_l1 / total;
        }
        for (idx, mag) in support.into_iter().zip(mags) {
            v[idx] = rng.sign() * mag;
        }
    }
    let zp: Vec<f64> = split
        .prefix
        .forward(&z)?
        .iter()
        .zip(&v)
        .map(|(a, b)| a + b)
        .collect();
    let x = split.suffix.forward(&zp)?;
    Ok(ExtendedRangeSample { x, z, v })
}

/// One scale of the chaining bound table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainScaleRow {
    pub i: usize,
    pub delta_i: f64,
    /// log|T_i| ≤ 2·log|N_{i+1}| with the l1 factor covered by the
    /// empirical-average bound.
    pub log_t_maurey: f64,
    /// Same with the volumetric bound on the l1 factor.
    pub log_t_volumetric: f64,
    /// Which bound the scale-switch rule picks at this level.
    pub regime: String,
}

/// Per-scale net-size bounds for the chained cover of the extended range.
/// Scales are δ_i = δ/2^i for i = 0..log2(n); the switch from the
/// empirical-average bound to the volumetric bound happens at
/// i = log2(√p/K). No nets are materialized; this is bound arithmetic only.
pub fn chain_bound_table(tp: &TheoryParams) -> Vec<ChainScaleRow> {
    let l = (tp.n as f64).log2().ceil() as usize;
    let switch = ((tp.p as f64).sqrt() / tp.big_k).log2();
    let r_l1 = tp.big_k * tp.delta; // L2-scaled radius of the l1 factor's image
    let mut rows = Vec::with_capacity(l);
    for i in 0..l {
        let delta_i = tp.delta / 2f64.powi(i as i32);
        let delta_next = delta_i / 2.0;
        let k_factor = tp.k as f64 * (4.0 * tp.l1 * tp.l2 * tp.r1 / delta_next).ln().max(0.0);
        let maurey_l1 = bound_maurey(r_l1, delta_next, tp.p);
        let vol_l1 = bound_volumetric(r_l1, delta_next, tp.p);
        rows.push(ChainScaleRow {
            i,
            delta_i,
            log_t_maurey: 2.0 * (maurey_l1 + k_factor),
            log_t_volumetric: 2.0 * (vol_l1 + k_factor),
            regime: if (i as f64) < switch {
                "maurey".into()
            } else {
                "volumetric".into()
            },
        });
    }
    rows
}
