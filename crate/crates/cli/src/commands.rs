//! Subcommand implementations.

use crate::config::*;
use crate::AppError;
use ilo_core::generator::LayeredGenerator;
use ilo_core::numerics::{mix_seed, randn, Rng};
use ilo_core::operators::{sense, MeasurementOperator, OperatorSpec};
use ilo_core::projections::project_l2;
use ilo_core::solver::{csgm_solve, ilo_solve, RecoveryReport, SolverConfig};
use ilo_core::theory::{
    additive_error_term, bound_maurey, bound_sudakov, bound_volumetric, chain_bound_table,
    extended_range_sample, sample_complexity, srec_check, TheoryParams,
};
use serde::Serialize;
use std::path::Path;

fn runtime(e: impl std::fmt::Display) -> AppError {
    AppError::Runtime(e.to_string())
}

fn write_text(path: &Path, text: &str) -> Result<(), AppError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)
                .map_err(|e| AppError::Runtime(format!("mkdir {}: {e}", dir.display())))?;
        }
    }
    std::fs::write(path, text)
        .map_err(|e| AppError::Runtime(format!("write {}: {e}", path.display())))
}

pub fn gen_model(config: &Path, out: &Path, seed: Option<u64>, quiet: bool) -> Result<(), AppError> {
    let mut cfg: GenModelConfig = read_config(config)?;
    check_schema_version(cfg.schema_version, config)?;
    if let Some(s) = seed {
        cfg.synthesize.seed = s;
    }
    let model = LayeredGenerator::synthesize(&cfg.synthesize)
        .map_err(|e| AppError::Config(format!("synthesis: {e}")))?;
    model.save(out).map_err(runtime)?;
    if !quiet {
        println!("model written to {}", out.display());
        let bounds = model.per_layer_lipschitz();
        for (i, b) in bounds.iter().enumerate() {
            println!("layer {i}: lipschitz bound {b:.6}");
        }
        println!("total lipschitz bound {:.6}", bounds.iter().product::<f64>());
    }
    Ok(())
}

/// Plant the hidden signal per config. Returns (x, description).
fn plant_signal(
    model: &LayeredGenerator,
    plant: &PlantSpec,
    split_indices: &[usize],
    solver: &SolverConfig,
) -> Result<(Vec<f64>, String), AppError> {
    match plant {
        PlantSpec::InRange { seed } => {
            let mut rng = Rng::from_seed(*seed);
            let k = model.in_dim();
            let z = project_l2(
                &randn(&mut rng, k, 1.0),
                &vec![0.0; k],
                solver.input_radius,
            );
            let x = model.forward(&z).map_err(runtime)?;
            Ok((x, "in_range".into()))
        }
        PlantSpec::ExtendedRange {
            seed,
            sparsity,
            l1_budget_fraction,
            split_index,
        } => {
            let s = split_index
                .or_else(|| split_indices.first().copied())
                .ok_or_else(|| {
                    AppError::Config(
                        "extended_range plant needs split_index or solver split_indices".into(),
                    )
                })?;
            let pos = split_indices.iter().position(|&x| x == s);
            let r2 = match pos {
                Some(i) => solver.per_layer.get(i + 1).map(|l| l.l1_radius),
                None => None,
            }
            .ok_or_else(|| {
                AppError::Config(format!(
                    "no per_layer schedule configures split {s}; cannot size the plant"
                ))
            })?;
            let split = model.split(s).map_err(|e| AppError::Config(e.to_string()))?;
            let mut rng = Rng::from_seed(*seed);
            let sample = extended_range_sample(
                &split,
                solver.input_radius,
                l1_budget_fraction * r2,
                *sparsity,
                &mut rng,
            )
            .map_err(|e| AppError::Config(e.to_string()))?;
            Ok((sample.x, format!("extended_range(split={s})")))
        }
    }
}

fn run_method(
    method: Method,
    model: &LayeredGenerator,
    split_indices: &[usize],
    op: &MeasurementOperator,
    y: &[f64],
    solver: &SolverConfig,
    truth: &[f64],
) -> Result<RecoveryReport, AppError> {
    match method {
        Method::Csgm => {
            let mut cfg = solver.clone();
            cfg.per_layer.truncate(1);
            let (_, report) = csgm_solve(model, op, y, &cfg, Some(truth)).map_err(runtime)?;
            Ok(report)
        }
        Method::Ilo => {
            let (_, report) =
                ilo_solve(model, split_indices, op, y, solver, Some(truth)).map_err(runtime)?;
            Ok(report)
        }
    }
}

/// Output file of `ilo solve`: the full experiment config echo plus the
/// recovery report.
#[derive(Serialize)]
struct SolveOutput<'a> {
    schema_version: u32,
    experiment: &'a SolveConfig,
    report: &'a RecoveryReport,
}

pub fn solve(
    config: &Path,
    out: Option<&Path>,
    seed: Option<u64>,
    method: Option<Method>,
    quiet: bool,
) -> Result<(), AppError> {
    let mut cfg: SolveConfig = read_config(config)?;
    check_schema_version(cfg.schema_version, config)?;
    if let Some(s) = seed {
        cfg.solver.seed = s;
    }
    if let Some(m) = method {
        cfg.method = m;
    }
    let model = cfg.model.load()?;
    let op = cfg
        .operator
        .build()
        .map_err(|e| AppError::Config(format!("operator: {e}")))?;
    if op.n() != model.out_dim() {
        return Err(AppError::Config(format!(
            "operator signal dim {} does not match model output dim {}",
            op.n(),
            model.out_dim()
        )));
    }
    cfg.solver
        .validate(match cfg.method {
            Method::Csgm => cfg.solver.per_layer.len() - 1,
            Method::Ilo => cfg.split_indices.len(),
        })
        .map_err(|e| AppError::Config(e.to_string()))?;

    let (x, plant_desc) = plant_signal(&model, &cfg.plant, &cfg.split_indices, &cfg.solver)?;
    let mut noise_rng = Rng::from_seed(mix_seed(cfg.plant.seed(), 0x6e6f_6973, 0));
    let y = sense(&op, &x, &cfg.noise, &mut noise_rng).map_err(runtime)?;

    let report = run_method(
        cfg.method,
        &model,
        &cfg.split_indices,
        &op,
        &y,
        &cfg.solver,
        &x,
    )?;

    if !quiet {
        println!(
            "{} plant={} m={} best_loss={:.6e} true_mse={:.6e} ({:.2}s)",
            report.method,
            plant_desc,
            report.m,
            report.best_loss,
            report.true_mse.unwrap_or(f64::NAN),
            report.wall_time_s
        );
    }
    let text = serde_json::to_string_pretty(&SolveOutput {
        schema_version: SCHEMA_VERSION,
        experiment: &cfg,
        report: &report,
    })
    .map_err(runtime)?;
    match out {
        Some(p) => write_text(p, &text)?,
        None => println!("{text}"),
    }
    Ok(())
}

pub const BENCH_CSV_HEADER: &str =
    "trial,method,m,k,p,n,true_mse,meas_mse,steps_total,seconds,seed";

pub fn bench(config: &Path, out: &Path, seed: Option<u64>, quiet: bool) -> Result<(), AppError> {
    let mut cfg: BenchConfig = read_config(config)?;
    check_schema_version(cfg.schema_version, config)?;
    if let Some(s) = seed {
        cfg.solver.seed = s;
    }
    if cfg.trials == 0 || cfg.sweep.values.is_empty() {
        return Err(AppError::Config("bench needs trials >= 1 and sweep values".into()));
    }
    cfg.solver
        .validate(cfg.split_indices.len())
        .map_err(|e| AppError::Config(e.to_string()))?;
    let model = cfg.model.load()?;
    let n = model.out_dim();
    let k = model.in_dim();
    let p = cfg
        .split_indices
        .first()
        .map(|&s| model.dims()[s])
        .unwrap_or(k);

    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (vi, &value) in cfg.sweep.values.iter().enumerate() {
        let mut per_method: Vec<(f64, Vec<f64>)> = Vec::new(); // med per method later
        let mut csgm_mses = Vec::new();
        let mut ilo_mses = Vec::new();
        for trial in 0..cfg.trials {
            let op_seed = mix_seed(cfg.solver.seed, vi as u64 + 1, trial as u64 + 1);
            let op_spec = sweep_operator(&cfg.operator, &cfg.sweep.parameter, value, n, op_seed)?;
            let op = op_spec
                .build()
                .map_err(|e| AppError::Config(format!("operator at sweep value {value}: {e}")))?;

            let plant = cfg
                .plant
                .with_seed(mix_seed(cfg.plant.seed(), vi as u64 + 1, trial as u64 + 1));
            let (x, _) = plant_signal(&model, &plant, &cfg.split_indices, &cfg.solver)?;
            let mut noise_rng = Rng::from_seed(mix_seed(plant.seed(), 0x6e6f_6973, 1));
            let y = sense(&op, &x, &cfg.noise, &mut noise_rng).map_err(runtime)?;

            let mut solver = cfg.solver.clone();
            solver.seed = mix_seed(cfg.solver.seed, 0x7472_6961, trial as u64);
            // paired discipline: both methods consume identical (x, A, y)
            for method in [Method::Csgm, Method::Ilo] {
                let report =
                    run_method(method, &model, &cfg.split_indices, &op, &y, &solver, &x)?;
                let tm = report.true_mse.unwrap_or(f64::NAN);
                match method {
                    Method::Csgm => csgm_mses.push(tm),
                    Method::Ilo => ilo_mses.push(tm),
                }
                rows.push(format!(
                    "{},{},{},{},{},{},{:e},{:e},{},{:.6},{}",
                    trial,
                    report.method,
                    report.m,
                    k,
                    p,
                    n,
                    tm,
                    report.best_loss,
                    report.steps_total,
                    report.wall_time_s,
                    report.seed
                ));
            }
        }
        per_method.push((median(&mut csgm_mses), Vec::new()));
        per_method.push((median(&mut ilo_mses), Vec::new()));
        summary.push(format!(
            "# summary {}={} csgm_median_true_mse={:e} ilo_median_true_mse={:e}",
            cfg.sweep.parameter, value, per_method[0].0, per_method[1].0
        ));
    }

    let mut text = String::from(BENCH_CSV_HEADER);
    text.push('\n');
    for row in &rows {
        text.push_str(row);
        text.push('\n');
    }
    for line in &summary {
        text.push_str(line);
        text.push('\n');
    }
    write_text(out, &text)?;
    if !quiet {
        for line in &summary {
            println!("{}", line.trim_start_matches("# "));
        }
        println!("{} rows written to {}", rows.len(), out.display());
    }
    Ok(())
}

fn sweep_operator(
    base: &OperatorSpec,
    parameter: &str,
    value: f64,
    n: usize,
    seed: u64,
) -> Result<OperatorSpec, AppError> {
    match (parameter, base) {
        ("m", OperatorSpec::Gaussian { .. }) => Ok(OperatorSpec::Gaussian {
            m: value as usize,
            n,
            seed,
        }),
        ("m", OperatorSpec::CirculantSigned { random_rows, .. }) => {
            Ok(OperatorSpec::CirculantSigned {
                m: value as usize,
                n,
                seed,
                random_rows: *random_rows,
            })
        }
        ("keep_prob", OperatorSpec::RandomMask { .. }) => Ok(OperatorSpec::RandomMask {
            n,
            keep_prob: value,
            seed,
        }),
        _ => Err(AppError::Config(format!(
            "sweep parameter '{parameter}' incompatible with operator kind"
        ))),
    }
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values[values.len() / 2]
}

pub fn theory_table(config: &Path, out_stem: &Path, quiet: bool) -> Result<(), AppError> {
    let cfg: TheoryTableConfig = read_config(config)?;
    check_schema_version(cfg.schema_version, config)?;
    if cfg.bounds.is_none() && cfg.complexity.is_none() && cfg.chain.is_none() {
        return Err(AppError::Config(
            "theory-table config needs at least one of: bounds, complexity, chain".into(),
        ));
    }
    let stem = out_stem.to_string_lossy();
    if let Some(grid) = &cfg.bounds {
        if grid.d.iter().any(|&d| d < 2) {
            return Err(AppError::Config("bounds grid needs d >= 2".into()));
        }
        let mut text = String::from("d,r,delta,bound_maurey,bound_volumetric,bound_sudakov\n");
        for &d in &grid.d {
            for &r in &grid.r {
                for &delta in &grid.delta {
                    text.push_str(&format!(
                        "{d},{r},{delta},{:e},{:e},{:e}\n",
                        bound_maurey(r, delta, d),
                        bound_volumetric(r, delta, d),
                        bound_sudakov(r, delta, d),
                    ));
                }
            }
        }
        let path = format!("{stem}_bounds.csv");
        write_text(Path::new(&path), &text)?;
        if !quiet {
            println!("bounds table written to {path}");
        }
    }
    if let Some(grid) = &cfg.complexity {
        let mut text = String::from("k,p,K,gamma,delta,m,additive_error_term\n");
        for &big_k in &grid.big_k {
            for &delta in &grid.delta {
                let tp = TheoryParams {
                    k: grid.k,
                    p: grid.p,
                    n: grid.n,
                    big_k,
                    delta,
                    gamma: grid.gamma,
                    r1: grid.r1,
                    l1: grid.l1,
                    l2: grid.l2,
                    c: grid.c,
                };
                tp.validate().map_err(|e| AppError::Config(e.to_string()))?;
                let sc = sample_complexity(&tp);
                text.push_str(&format!(
                    "{},{},{},{},{},{},{:e}\n",
                    grid.k,
                    grid.p,
                    big_k,
                    grid.gamma,
                    delta,
                    sc.m,
                    additive_error_term(&tp),
                ));
            }
        }
        let path = format!("{stem}_complexity.csv");
        write_text(Path::new(&path), &text)?;
        if !quiet {
            println!("complexity table written to {path}");
        }
    }
    if let Some(tp) = &cfg.chain {
        tp.validate().map_err(|e| AppError::Config(e.to_string()))?;
        let mut text = String::from("i,delta_i,log_t_maurey,log_t_volumetric,regime\n");
        for row in chain_bound_table(tp) {
            text.push_str(&format!(
                "{},{:e},{:e},{:e},{}\n",
                row.i, row.delta_i, row.log_t_maurey, row.log_t_volumetric, row.regime
            ));
        }
        let path = format!("{stem}_chain.csv");
        write_text(Path::new(&path), &text)?;
        if !quiet {
            println!("chain table written to {path}");
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct EnsembleReport {
    kind: String,
    m: usize,
    deltas: Vec<f64>,
    min: f64,
    median: f64,
    max: f64,
}

#[derive(Serialize)]
struct SrecOutput<'a> {
    schema_version: u32,
    experiment: &'a SrecConfig,
    theory: TheoryParams,
    m_base: usize,
    additive_error_term: f64,
    pairs_per_draw: usize,
    matrix_draws: usize,
    ensembles: Vec<EnsembleReport>,
    note: &'static str,
}

pub fn srec_test(
    config: &Path,
    out: Option<&Path>,
    seed: Option<u64>,
    quiet: bool,
) -> Result<(), AppError> {
    let mut cfg: SrecConfig = read_config(config)?;
    check_schema_version(cfg.schema_version, config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if cfg.pairs == 0 || cfg.matrix_draws == 0 {
        return Err(AppError::Config("srec needs pairs >= 1 and matrix_draws >= 1".into()));
    }
    let model = cfg.model.load()?;
    let split = model
        .split(cfg.split_index)
        .map_err(|e| AppError::Config(e.to_string()))?;
    let lip = split.lipschitz();
    let n = model.out_dim();
    let tp = TheoryParams {
        k: model.in_dim(),
        p: split.intermediate_dim(),
        n,
        big_k: cfg.big_k,
        delta: cfg.delta,
        gamma: cfg.gamma,
        r1: cfg.r1,
        l1: lip.prefix_bound,
        l2: lip.suffix_bound,
        c: cfg.c,
    };
    tp.validate().map_err(|e| AppError::Config(e.to_string()))?;
    let m_base = sample_complexity(&tp).m;
    let term = additive_error_term(&tp);
    let r2 = tp.r2();
    let sparsity = cfg.sparsity;
    let r1 = cfg.r1;

    let mut rng = Rng::from_seed(cfg.seed);
    let mut ensembles = Vec::new();
    for kind in &cfg.ensembles {
        let m = match kind.as_str() {
            "gaussian" => m_base,
            "circulant_signed" => {
                // a partial circulant has at most n rows, so the inflated
                // count caps there
                if cfg.circulant_log4_inflation {
                    let log4 = (n as f64).ln().powi(4);
                    ((m_base as f64 * log4).ceil() as usize).min(n)
                } else {
                    m_base.min(n)
                }
            }
            other => {
                return Err(AppError::Config(format!(
                    "unknown srec ensemble '{other}' (use gaussian | circulant_signed)"
                )))
            }
        };
        let mut deltas = Vec::with_capacity(cfg.matrix_draws);
        for draw in 0..cfg.matrix_draws {
            let mut draw_rng = Rng::from_seed(mix_seed(cfg.seed, ensembles.len() as u64, draw as u64));
            let op = match kind.as_str() {
                "gaussian" => ilo_core::operators::make_gaussian(&mut draw_rng, m, n),
                _ => ilo_core::operators::make_circulant_signed(&mut draw_rng, m, n, false),
            }
            .map_err(runtime)?;
            let split_ref = &split;
            let delta = srec_check(
                &op,
                |r| {
                    let budget = r.uniform() * r2;
                    extended_range_sample(split_ref, r1, budget, sparsity, r)
                        .expect("sampler dims")
                        .x
                },
                cfg.gamma,
                cfg.pairs,
                &mut rng,
            );
            deltas.push(delta);
        }
        let mut sorted = deltas.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ensembles.push(EnsembleReport {
            kind: kind.clone(),
            m,
            min: sorted[0],
            median: sorted[sorted.len() / 2],
            max: sorted[sorted.len() - 1],
            deltas,
        });
    }

    if !quiet {
        println!("m_base={m_base} additive_error_term={term:.6e}");
        for e in &ensembles {
            println!(
                "{}: m={} empirical delta min={:.3e} median={:.3e} max={:.3e}",
                e.kind, e.m, e.min, e.median, e.max
            );
        }
    }
    let output = SrecOutput {
        schema_version: SCHEMA_VERSION,
        experiment: &cfg,
        theory: tp,
        m_base,
        additive_error_term: term,
        pairs_per_draw: cfg.pairs,
        matrix_draws: cfg.matrix_draws,
        ensembles,
        note: "Monte-Carlo necessary-condition check over sampled pairs, not a proof",
    };
    let text = serde_json::to_string_pretty(&output).map_err(runtime)?;
    match out {
        Some(p) => write_text(p, &text)?,
        None => println!("{text}"),
    }
    Ok(())
}
