//! End-to-end tests of the `ilo` binary: exit codes, config validation,
//! output schemas, and reproducibility.

use std::path::Path;
use std::process::{Command, Output};

fn ilo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ilo"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn synth_model_json() -> &'static str {
    r#"{
      "synthesize": {
        "dims": [6, 10, 16, 24],
        "activation": "leaky_relu",
        "slope": 0.2,
        "layer_lipschitz": 1.0,
        "bias_sigma": 0.1,
        "seed": 7
      }
    }"#
}

fn solve_config(model: &str) -> String {
    format!(
        r#"{{
          "schema_version": 1,
          "model": {model},
          "operator": {{ "kind": "gaussian", "m": 16, "n": 24, "seed": 11 }},
          "noise": {{ "sigma": 0.0 }},
          "plant": {{ "kind": "in_range", "seed": 3 }},
          "method": "ilo",
          "split_indices": [2],
          "solver": {{
            "input_radius": 3.0,
            "per_layer": [
              {{ "steps": 60, "lr_max": 0.1, "l1_radius": 0.0 }},
              {{ "steps": 40, "lr_max": 0.1, "l1_radius": 0.4 }}
            ],
            "rounds": 1,
            "range_projection_steps": 40,
            "restarts": 2,
            "sna_sigma": 0.0,
            "seed": 5,
            "optimizer": "adam"
          }}
        }}"#
    )
}

#[test]
fn missing_model_file_exits_2_and_names_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("solve.json");
    write(&cfg, &solve_config(r#"{"path": "/nonexistent/model_xyz.json"}"#));
    let out = ilo(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("/nonexistent/model_xyz.json"),
        "stderr: {stderr}"
    );
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("solve.json");
    let mut text = solve_config(synth_model_json());
    text = text.replacen("\"schema_version\": 1,", "\"schema_version\": 1, \"typo_key\": 1,", 1);
    write(&cfg, &text);
    let out = ilo(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn wrong_schema_version_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("solve.json");
    write(
        &cfg,
        &solve_config(synth_model_json()).replacen("\"schema_version\": 1", "\"schema_version\": 9", 1),
    );
    let out = ilo(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

fn strip_timing(value: &mut serde_json::Value) {
    match value {
        serde_json::Value::Object(map) => {
            map.remove("wall_time_s");
            for v in map.values_mut() {
                strip_timing(v);
            }
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

#[test]
fn solve_reports_are_identical_modulo_timing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("solve.json");
    write(&cfg, &solve_config(synth_model_json()));
    let out1 = dir.path().join("r1.json");
    let out2 = dir.path().join("r2.json");
    for out in [&out1, &out2] {
        let run = ilo(&[
            "solve",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--quiet",
        ]);
        assert_eq!(run.status.code(), Some(0), "{:?}", run);
    }
    let mut a: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out1).unwrap()).unwrap();
    let mut b: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out2).unwrap()).unwrap();
    strip_timing(&mut a);
    strip_timing(&mut b);
    assert_eq!(a, b);
}

#[test]
fn solve_report_contains_config_echo_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("solve.json");
    write(&cfg, &solve_config(synth_model_json()));
    let out = dir.path().join("r.json");
    let run = ilo(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(run.status.code(), Some(0));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["experiment"]["solver"]["seed"], 5);
    assert!(v["report"]["true_mse"].is_number());
    let phases = v["report"]["phases"].as_array().unwrap();
    assert!(phases.len() >= 3); // 2 restarts + 1 round
    // running best of the trace is non-increasing
    let mut best = f64::INFINITY;
    for phase in phases {
        for l in phase["losses"].as_array().unwrap() {
            let l = l.as_f64().unwrap();
            best = best.min(l);
        }
    }
    assert!((v["report"]["best_loss"].as_f64().unwrap() - best).abs() <= 1e-15 * best.max(1.0));
}

#[test]
fn method_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("solve.json");
    write(&cfg, &solve_config(synth_model_json()));
    let out = dir.path().join("r.json");
    let run = ilo(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--method",
        "csgm",
        "--quiet",
    ]);
    assert_eq!(run.status.code(), Some(0));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["report"]["method"], "csgm");
}

#[test]
fn gen_model_same_seed_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("gen.json");
    write(
        &cfg,
        &format!(
            r#"{{ "schema_version": 1, "synthesize": {} }}"#,
            synth_model_json()
                .trim()
                .trim_start_matches('{')
                .trim_end_matches('}')
                .replacen("\"synthesize\":", "", 1)
        ),
    );
    let m1 = dir.path().join("a.json");
    let m2 = dir.path().join("b.json");
    for m in [&m1, &m2] {
        let run = ilo(&[
            "gen-model",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            m.to_str().unwrap(),
            "--quiet",
        ]);
        assert_eq!(run.status.code(), Some(0), "{:?}", run);
    }
    assert_eq!(
        std::fs::read(&m1).unwrap(),
        std::fs::read(&m2).unwrap(),
        "model files differ"
    );
}

#[test]
fn gen_model_loads_back() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("gen.json");
    write(
        &cfg,
        r#"{
          "schema_version": 1,
          "synthesize": {
            "dims": [2, 2],
            "activation": "identity",
            "layer_lipschitz": 1.0,
            "bias_sigma": 0.0,
            "seed": 1
          }
        }"#,
    );
    let model = dir.path().join("m.json");
    let run = ilo(&[
        "gen-model",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        model.to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(stdout.contains("lipschitz"), "{stdout}");
    let g = ilo_core::generator::LayeredGenerator::load(&model).unwrap();
    assert_eq!(g.in_dim(), 2);
}

fn bench_config(trials: usize, values: &str) -> String {
    format!(
        r#"{{
          "schema_version": 1,
          "model": {},
          "operator": {{ "kind": "gaussian", "m": 12, "n": 24, "seed": 11 }},
          "noise": {{ "sigma": 0.0 }},
          "plant": {{ "kind": "in_range", "seed": 3 }},
          "split_indices": [2],
          "solver": {{
            "input_radius": 3.0,
            "per_layer": [
              {{ "steps": 40, "lr_max": 0.1, "l1_radius": 0.0 }},
              {{ "steps": 30, "lr_max": 0.1, "l1_radius": 0.4 }}
            ],
            "rounds": 1,
            "range_projection_steps": 30,
            "restarts": 2,
            "sna_sigma": 0.0,
            "seed": 5,
            "optimizer": "adam"
          }},
          "trials": {trials},
          "sweep": {{ "parameter": "m", "values": [{values}] }}
        }}"#,
        synth_model_json()
    )
}

#[test]
fn bench_single_value_single_trial_emits_two_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bench.json");
    write(&cfg, &bench_config(1, "12"));
    let out = dir.path().join("bench.csv");
    let run = ilo(&[
        "bench",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(run.status.code(), Some(0), "{:?}", run);
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "trial,method,m,k,p,n,true_mse,meas_mse,steps_total,seconds,seed"
    );
    let data: Vec<&str> = lines[1..].iter().filter(|l| !l.starts_with('#')).copied().collect();
    assert_eq!(data.len(), 2);
    assert!(data[0].contains(",csgm,"));
    assert!(data[1].contains(",ilo,"));
}

#[test]
fn bench_rows_are_paired_and_deterministic_modulo_seconds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bench.json");
    write(&cfg, &bench_config(2, "8, 24"));
    let strip = |text: &str| -> Vec<String> {
        // drop the seconds column (index 9)
        text.lines()
            .map(|l| {
                if l.starts_with('#') || l.starts_with("trial") {
                    l.to_string()
                } else {
                    let mut f: Vec<&str> = l.split(',').collect();
                    f.remove(9);
                    f.join(",")
                }
            })
            .collect()
    };
    let mut outputs = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let out = dir.path().join(name);
        let run = ilo(&[
            "bench",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--quiet",
        ]);
        assert_eq!(run.status.code(), Some(0));
        outputs.push(strip(&std::fs::read_to_string(&out).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    // paired rows see the same operator: csgm/ilo rows alternate per trial
    let data: Vec<&String> = outputs[0]
        .iter()
        .filter(|l| !l.starts_with('#') && !l.starts_with("trial"))
        .collect();
    assert_eq!(data.len(), 8); // 2 values × 2 trials × 2 methods
    for pair in data.chunks(2) {
        let c: Vec<&str> = pair[0].split(',').collect();
        let i: Vec<&str> = pair[1].split(',').collect();
        assert_eq!(c[0], i[0], "trial");
        assert_eq!(c[2], i[2], "m");
        assert_eq!(c[9], i[9], "seed echo differs: methods not paired");
    }
}

#[test]
fn bench_keep_prob_sweep_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bench.json");
    let text = bench_config(1, "0.5")
        .replacen(
            r#""operator": { "kind": "gaussian", "m": 12, "n": 24, "seed": 11 }"#,
            r#""operator": { "kind": "random_mask", "n": 24, "keep_prob": 0.5, "seed": 11 }"#,
            1,
        )
        .replacen(r#""parameter": "m""#, r#""parameter": "keep_prob""#, 1);
    write(&cfg, &text);
    let out = dir.path().join("bench.csv");
    let run = ilo(&[
        "bench",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(run.status.code(), Some(0), "{:?}", run);
}

#[test]
fn bench_circulant_comparable_to_gaussian_at_matched_m() {
    // same in-range plants and budgets, gaussian vs signed-circulant rows:
    // medians land within 2x of each other
    let dir = tempfile::tempdir().unwrap();
    let make = |kind: &str| {
        bench_config(5, "16").replacen(
            r#""operator": { "kind": "gaussian", "m": 12, "n": 24, "seed": 11 }"#,
            &format!(r#""operator": {{ "kind": "{kind}", "m": 12, "n": 24, "seed": 11 }}"#),
            1,
        )
    };
    let mut medians = Vec::new();
    for kind in ["gaussian", "circulant_signed"] {
        let cfg = dir.path().join(format!("{kind}.json"));
        write(&cfg, &make(kind));
        let out = dir.path().join(format!("{kind}.csv"));
        let run = ilo(&[
            "bench",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--quiet",
        ]);
        assert_eq!(run.status.code(), Some(0), "{:?}", run);
        let text = std::fs::read_to_string(&out).unwrap();
        let summary = text
            .lines()
            .find(|l| l.starts_with("# summary"))
            .unwrap()
            .to_string();
        let grab = |tag: &str| -> f64 {
            summary
                .split_whitespace()
                .find(|t| t.starts_with(tag))
                .unwrap()
                .split('=')
                .nth(1)
                .unwrap()
                .parse()
                .unwrap()
        };
        medians.push((grab("csgm_median_true_mse"), grab("ilo_median_true_mse")));
    }
    let (gc, gi) = medians[0];
    let (cc, ci) = medians[1];
    let ratio_c = (gc / cc).max(cc / gc);
    let ratio_i = (gi / ci).max(ci / gi);
    assert!(ratio_c <= 2.0, "csgm medians differ {ratio_c:.2}x: {gc:e} vs {cc:e}");
    assert!(ratio_i <= 2.0, "ilo medians differ {ratio_i:.2}x: {gi:e} vs {ci:e}");
}

#[test]
fn bench_extended_plants_ilo_beats_csgm_at_full_m() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_text = bench_config(4, "24").replacen(
        r#""plant": { "kind": "in_range", "seed": 3 }"#,
        r#""plant": { "kind": "extended_range", "seed": 3, "sparsity": 2, "l1_budget_fraction": 0.8 }"#,
        1,
    );
    let cfg = dir.path().join("bench.json");
    write(&cfg, &cfg_text);
    let out = dir.path().join("bench.csv");
    let run = ilo(&[
        "bench",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(run.status.code(), Some(0), "{:?}", run);
    let text = std::fs::read_to_string(&out).unwrap();
    let summary = text.lines().find(|l| l.starts_with("# summary")).unwrap();
    let grab = |tag: &str| -> f64 {
        summary
            .split_whitespace()
            .find(|t| t.starts_with(tag))
            .unwrap()
            .split('=')
            .nth(1)
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!(
        grab("ilo_median_true_mse") <= grab("csgm_median_true_mse"),
        "{summary}"
    );
}

#[test]
fn theory_table_golden_headers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("theory.json");
    write(
        &cfg,
        r#"{
          "schema_version": 1,
          "bounds": { "d": [16], "r": [1.0], "delta": [0.5] },
          "complexity": {
            "k": 8, "p": 32, "n": 128, "gamma": 0.8, "c": 1.0,
            "l1": 1.0, "l2": 1.0, "r1": 3.0,
            "big_k": [2.0], "delta": [0.25]
          },
          "chain": {
            "k": 8, "p": 32, "n": 128, "big_k": 2.0, "delta": 0.25,
            "gamma": 0.8, "r1": 3.0, "l1": 1.0, "l2": 1.0, "c": 1.0
          }
        }"#,
    );
    let stem = dir.path().join("t");
    let run = ilo(&[
        "theory-table",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        stem.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(run.status.code(), Some(0), "{:?}", run);
    let bounds = std::fs::read_to_string(dir.path().join("t_bounds.csv")).unwrap();
    assert!(bounds.starts_with("d,r,delta,bound_maurey,bound_volumetric,bound_sudakov\n"));
    let cx = std::fs::read_to_string(dir.path().join("t_complexity.csv")).unwrap();
    assert!(cx.starts_with("k,p,K,gamma,delta,m,additive_error_term\n"));
    let chain = std::fs::read_to_string(dir.path().join("t_chain.csv")).unwrap();
    assert!(chain.starts_with("i,delta_i,log_t_maurey,log_t_volumetric,regime\n"));
}

#[test]
fn theory_table_monotone_in_big_k() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("theory.json");
    write(
        &cfg,
        r#"{
          "schema_version": 1,
          "complexity": {
            "k": 8, "p": 64, "n": 128, "gamma": 0.8, "c": 1.0,
            "l1": 1.0, "l2": 1.0, "r1": 3.0,
            "big_k": [1.5, 2.0, 3.0, 5.0, 7.9], "delta": [0.1]
          }
        }"#,
    );
    let stem = dir.path().join("t");
    let run = ilo(&[
        "theory-table",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        stem.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(run.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("t_complexity.csv")).unwrap();
    let mut ms = Vec::new();
    let mut terms = Vec::new();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        ms.push(f[5].parse::<u64>().unwrap());
        terms.push(f[6].parse::<f64>().unwrap());
    }
    assert!(ms.windows(2).all(|w| w[1] > w[0]), "m not increasing in K: {ms:?}");
    assert!(
        terms.windows(2).all(|w| w[1] < w[0]),
        "additive term not decreasing in K: {terms:?}"
    );
}

#[test]
fn srec_identity_reference_behavior() {
    // quick gaussian-only run: output schema and the reported fields
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("srec.json");
    write(
        &cfg,
        &format!(
            r#"{{
              "schema_version": 1,
              "model": {},
              "split_index": 2,
              "big_k": 2.0,
              "delta": 0.25,
              "gamma": 0.8,
              "c": 1.0,
              "r1": 3.0,
              "pairs": 20,
              "matrix_draws": 3,
              "sparsity": 2,
              "ensembles": ["gaussian"],
              "circulant_log4_inflation": true,
              "seed": 5
            }}"#,
            synth_model_json()
        ),
    );
    let out = dir.path().join("srec.json.out");
    let run = ilo(&[
        "srec-test",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(run.status.code(), Some(0), "{:?}", run);
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(v["additive_error_term"].as_f64().unwrap() > 0.0);
    assert_eq!(v["ensembles"][0]["kind"], "gaussian");
    assert_eq!(v["ensembles"][0]["deltas"].as_array().unwrap().len(), 3);
    assert!(v["note"].as_str().unwrap().contains("not a proof"));
}
