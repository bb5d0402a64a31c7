//! Exact Euclidean projections onto the solver's constraint sets: l2 balls,
//! the sphere, and l1 balls centered at arbitrary anchors. The anchored l1
//! ball realizes the Minkowski-sum constraint around an intermediate code.

use crate::numerics::{norm1, norm2, sub};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BallNorm {
    L1,
    L2,
}

/// A norm ball with explicit center, usable as a projection target.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BallSpec {
    pub center: Vec<f64>,
    pub radius: f64,
    pub norm: BallNorm,
}

impl BallSpec {
    pub fn l2(center: Vec<f64>, radius: f64) -> Self {
        BallSpec {
            center,
            radius,
            norm: BallNorm::L2,
        }
    }

    pub fn l1(center: Vec<f64>, radius: f64) -> Self {
        BallSpec {
            center,
            radius,
            norm: BallNorm::L1,
        }
    }

    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        match self.norm {
            BallNorm::L2 => project_l2(v, &self.center, self.radius),
            BallNorm::L1 => project_l1(v, &self.center, self.radius),
        }
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        let d = sub(v, &self.center);
        let dist = match self.norm {
            BallNorm::L2 => norm2(&d),
            BallNorm::L1 => norm1(&d),
        };
        dist <= self.radius + tol
    }
}

/// Nearest point of the l2 ball of `radius` around `center`.
///
/// The output satisfies its own feasibility check under floating point
/// (the scale is nudged down by an ulp when re-evaluation rounds outward),
/// which makes the projection exactly idempotent.
pub fn project_l2(v: &[f64], center: &[f64], radius: f64) -> Vec<f64> {
    debug_assert_eq!(v.len(), center.len());
    debug_assert!(radius >= 0.0);
    let d = sub(v, center);
    let dist = norm2(&d);
    if dist <= radius {
        return v.to_vec();
    }
    let mut scale = radius / dist;
    loop {
        let out: Vec<f64> = center.iter().zip(&d).map(|(c, di)| c + scale * di).collect();
        if norm2(&sub(&out, center)) <= radius {
            return out;
        }
        scale *= 1.0 - 4.0 * f64::EPSILON;
    }
}

/// Euclidean projection onto {u : ‖u − center‖₁ ≤ radius}.
///
/// Sort-based threshold search, O(p log p): shift by the center, sort
/// magnitudes descending (ties broken by original index for determinism),
/// find the largest support whose soft-threshold keeps all entries positive,
/// soft-threshold, restore signs, shift back.
pub fn project_l1(v: &[f64], center: &[f64], radius: f64) -> Vec<f64> {
    debug_assert_eq!(v.len(), center.len());
    debug_assert!(radius >= 0.0);
    if radius == 0.0 {
        return center.to_vec();
    }
    let d = sub(v, center);
    if norm1(&d) <= radius {
        return v.to_vec();
    }
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.sort_by(|&a, &b| {
        d[b].abs()
            .partial_cmp(&d[a].abs())
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (rank, &idx) in order.iter().enumerate() {
        let mag = d[idx].abs();
        cumsum += mag;
        let candidate = (cumsum - radius) / (rank + 1) as f64;
        if mag - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    loop {
        let out: Vec<f64> = center
            .iter()
            .zip(&d)
            .map(|(c, &di)| c + di.signum() * (di.abs() - theta).max(0.0))
            .collect();
        // re-evaluation can round a hair outward; bump the threshold so the
        // output passes its own feasibility check and reprojects to itself
        if norm1(&sub(&out, center)) <= radius {
            return out;
        }
        theta += theta.abs().max(radius) * 4.0 * f64::EPSILON;
    }
}

/// radius·v/‖v‖; the zero vector maps to radius·e₁ so the result is always
/// defined and deterministic. Points already on the sphere up to a few ulps
/// are returned unchanged, making the projection exactly idempotent.
pub fn project_sphere(v: &[f64], radius: f64) -> Vec<f64> {
    debug_assert!(radius > 0.0);
    let n = norm2(v);
    if n == 0.0 {
        let mut e = vec![0.0; v.len()];
        e[0] = radius;
        return e;
    }
    if (n / radius - 1.0).abs() <= 4.0 * f64::EPSILON {
        return v.to_vec();
    }
    let scale = radius / n;
    v.iter().map(|x| x * scale).collect()
}
