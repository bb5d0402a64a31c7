//! Browser bindings for the interactive demo page. Three operations are
//! exposed, each taking scalar parameters and returning a JSON string the
//! page plots on canvases:
//!
//! - `recovery_demo`: plant a signal, sense it, recover with CSGM and
//!   intermediate layer optimization, return signals and loss traces.
//! - `theory_curves`: the three l1-ball covering bounds over a δ grid.
//! - `maurey_demo`: the enumerated 2-D net and the sampler's draws around
//!   a target point.
//!
//! The `demo` module holds the plain-Rust implementations (testable on any
//! target); the `#[wasm_bindgen]` exports are thin wasm32-only wrappers.

use wasm_bindgen::prelude::*;

pub mod demo {
    use ilo_core::generator::{LayeredGenerator, SynthesisSpec};
    use ilo_core::numerics::{mix_seed, randn, Rng};
    use ilo_core::operators::{
        make_circulant_signed, make_downsample, make_gaussian, make_identity, make_random_mask,
        sense, MeasurementOperator, NoiseSpec,
    };
    use ilo_core::projections::project_l2;
    use ilo_core::solver::{csgm_solve, ilo_solve, LayerSchedule, OptimizerKind, SolverConfig};
    use ilo_core::theory::{
        bound_maurey, bound_sudakov, bound_volumetric, extended_range_sample, MaureyNet,
    };
    use serde::Serialize;

    const DIMS: [usize; 5] = [8, 16, 32, 64, 128];
    const SPLIT_AT: usize = 2;

    fn toy_generator(seed: u64) -> LayeredGenerator {
        LayeredGenerator::synthesize(&SynthesisSpec {
            dims: DIMS.to_vec(),
            activation: "leaky_relu".into(),
            slope: 0.2,
            layer_lipschitz: 1.0,
            bias_sigma: 0.1,
            seed,
        })
        .expect("static dims are valid")
    }

    fn build_operator(kind: &str, m: usize, rng: &mut Rng) -> Result<MeasurementOperator, String> {
        let n = DIMS[DIMS.len() - 1];
        match kind {
            "identity" => Ok(make_identity(n)),
            "gaussian" => make_gaussian(rng, m.clamp(1, 4 * n), n).map_err(|e| e.to_string()),
            "circulant" => {
                make_circulant_signed(rng, m.clamp(1, n), n, false).map_err(|e| e.to_string())
            }
            "mask" => {
                let keep = (m as f64 / n as f64).clamp(0.01, 1.0);
                make_random_mask(rng, n, keep).map_err(|e| e.to_string())
            }
            "downsample" => {
                let factor = (n / m.max(1)).max(1);
                let factor = [1usize, 2, 4, 8, 16, 32]
                    .iter()
                    .rev()
                    .find(|&&f| f <= factor)
                    .copied()
                    .unwrap_or(1);
                make_downsample(n, factor).map_err(|e| e.to_string())
            }
            other => Err(format!("unknown operator kind '{other}'")),
        }
    }

    #[derive(Serialize)]
    struct RecoveryOut {
        n: usize,
        m: usize,
        operator: String,
        truth: Vec<f64>,
        observed_view: Vec<f64>,
        csgm_estimate: Vec<f64>,
        ilo_estimate: Vec<f64>,
        csgm_trace: Vec<f64>,
        ilo_trace: Vec<f64>,
        csgm_true_mse: f64,
        ilo_true_mse: f64,
    }

    pub fn recovery_demo(
        operator: &str,
        m: usize,
        noise_sigma: f64,
        extended_plant: bool,
        steps: usize,
        seed: u64,
    ) -> Result<String, String> {
        let g = toy_generator(mix_seed(seed, 1, 0));
        let r1 = 1.25 * (DIMS[0] as f64).sqrt();
        let r2 = 0.5 * (DIMS[SPLIT_AT] as f64).sqrt();
        let mut rng = Rng::from_seed(mix_seed(seed, 2, 0));

        let x = if extended_plant {
            let split = g.split(SPLIT_AT).map_err(|e| e.to_string())?;
            extended_range_sample(&split, r1, 0.8 * r2, 3, &mut rng)
                .map_err(|e| e.to_string())?
                .x
        } else {
            let k = g.in_dim();
            let z = project_l2(&randn(&mut rng, k, 1.0), &vec![0.0; k], r1);
            g.forward(&z).map_err(|e| e.to_string())?
        };

        let op = build_operator(operator, m, &mut rng)?;
        let noise = NoiseSpec::gaussian(noise_sigma.max(0.0));
        let y = sense(&op, &x, &noise, &mut rng).map_err(|e| e.to_string())?;

        let steps = steps.clamp(10, 1000);
        let cfg = SolverConfig {
            input_radius: r1,
            per_layer: vec![
                LayerSchedule {
                    steps,
                    lr_max: 0.1,
                    l1_radius: 0.0,
                },
                LayerSchedule {
                    steps: steps * 2 / 3,
                    lr_max: 0.1,
                    l1_radius: r2,
                },
            ],
            rounds: 2,
            range_projection_steps: steps / 2,
            restarts: 3,
            sna_sigma: if noise_sigma > 0.0 && operator == "identity" {
                noise_sigma
            } else {
                0.0
            },
            seed: mix_seed(seed, 3, 0),
            optimizer: OptimizerKind::Adam,
        };
        let mut csgm_cfg = cfg.clone();
        csgm_cfg.per_layer.truncate(1);

        let (z_c, rep_c) =
            csgm_solve(&g, &op, &y, &csgm_cfg, Some(&x)).map_err(|e| e.to_string())?;
        let csgm_estimate = g.forward(&z_c).map_err(|e| e.to_string())?;
        let (ilo_estimate, rep_i) =
            ilo_solve(&g, &[SPLIT_AT], &op, &y, &cfg, Some(&x)).map_err(|e| e.to_string())?;

        let out = RecoveryOut {
            n: op.n(),
            m: op.m(),
            operator: operator.to_string(),
            observed_view: op.adjoint(&y).map_err(|e| e.to_string())?,
            truth: x,
            csgm_estimate,
            ilo_estimate,
            csgm_trace: rep_c
                .running_best()
                .iter()
                .map(|l| l.max(1e-18).log10())
                .collect(),
            ilo_trace: rep_i
                .running_best()
                .iter()
                .map(|l| l.max(1e-18).log10())
                .collect(),
            csgm_true_mse: rep_c.true_mse.unwrap_or(f64::NAN),
            ilo_true_mse: rep_i.true_mse.unwrap_or(f64::NAN),
        };
        Ok(serde_json::to_string(&out).expect("serializable"))
    }

    #[derive(Serialize)]
    struct CurvesOut {
        d: usize,
        r: f64,
        deltas: Vec<f64>,
        maurey: Vec<f64>,
        volumetric: Vec<f64>,
        sudakov: Vec<f64>,
        /// δ = 4r/√d, where the coarse-scale regime starts.
        crossover_delta: f64,
    }

    pub fn theory_curves(d: usize, r: f64) -> Result<String, String> {
        if d < 2 || r <= 0.0 || !r.is_finite() {
            return Err("need d >= 2 and r > 0".into());
        }
        let lo = 0.05 * r / (d as f64).sqrt();
        let hi = r;
        let points = 120;
        let mut deltas = Vec::with_capacity(points);
        let mut maurey = Vec::with_capacity(points);
        let mut volumetric = Vec::with_capacity(points);
        let mut sudakov = Vec::with_capacity(points);
        for i in 0..points {
            let t = i as f64 / (points - 1) as f64;
            let delta = lo * (hi / lo).powf(t);
            deltas.push(delta);
            maurey.push(bound_maurey(r, delta, d));
            volumetric.push(bound_volumetric(r, delta, d));
            sudakov.push(bound_sudakov(r, delta, d));
        }
        let out = CurvesOut {
            d,
            r,
            deltas,
            maurey,
            volumetric,
            sudakov,
            crossover_delta: 4.0 * r / (d as f64).sqrt(),
        };
        Ok(serde_json::to_string(&out).expect("serializable"))
    }

    #[derive(Serialize)]
    struct MaureyOut {
        r: f64,
        delta: f64,
        t: usize,
        net: Vec<Vec<f64>>,
        target: Vec<f64>,
        samples: Vec<Vec<f64>>,
        mean_sq_dist: f64,
        bound: f64,
    }

    pub fn maurey_demo(r: f64, delta: f64, samples: usize, seed: u64) -> Result<String, String> {
        if r <= 0.0 || delta <= 0.0 || !r.is_finite() || !delta.is_finite() {
            return Err("need r > 0 and delta > 0".into());
        }
        let net = MaureyNet::enumerate(2, r, delta).map_err(|e| e.to_string())?;
        let mut rng = Rng::from_seed(seed);
        let mut target = vec![
            rng.sign() * -(rng.uniform().max(1e-12)).ln(),
            rng.sign() * -(rng.uniform().max(1e-12)).ln(),
        ];
        let mass: f64 = rng.uniform() * r;
        let total = target[0].abs() + target[1].abs();
        target.iter_mut().for_each(|t| *t *= mass / total);

        let samples = samples.clamp(1, 2000);
        let mut drawn = Vec::with_capacity(samples);
        let mut acc = 0.0;
        for _ in 0..samples {
            let z = net.sample_for(&target, &mut rng);
            acc += (z[0] - target[0]).powi(2) + (z[1] - target[1]).powi(2);
            drawn.push(z);
        }
        let out = MaureyOut {
            r,
            delta,
            t: net.t,
            net: net.points.clone().unwrap_or_default(),
            target,
            mean_sq_dist: acc / samples as f64,
            bound: delta * delta,
            samples: drawn,
        };
        Ok(serde_json::to_string(&out).expect("serializable"))
    }
}

#[wasm_bindgen]
pub fn recovery_demo(
    operator: &str,
    m: usize,
    noise_sigma: f64,
    extended_plant: bool,
    steps: usize,
    seed: u64,
) -> Result<String, JsValue> {
    demo::recovery_demo(operator, m, noise_sigma, extended_plant, steps, seed)
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn theory_curves(d: usize, r: f64) -> Result<String, JsValue> {
    demo::theory_curves(d, r).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn maurey_demo(r: f64, delta: f64, samples: usize, seed: u64) -> Result<String, JsValue> {
    demo::maurey_demo(r, delta, samples, seed).map_err(|e| JsValue::from_str(&e))
}
