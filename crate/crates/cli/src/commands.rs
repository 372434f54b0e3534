use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use fuzzy_pomdp::em::{run_em, Checkpoint, EmConfig};
use fuzzy_pomdp::eval::evaluate;
use fuzzy_pomdp::experiment::{
    add_noise, format_mg_table, format_summary_table, generate_fuzzy_trajectories, kmeans_init, random_init, run_regime,
    sample_dataset, write_outputs, Algorithm, ExperimentConfig, Regime, RegimeSummary,
};
use fuzzy_pomdp::fuzzy::FuzzyModel;
use fuzzy_pomdp::fuzzy_map::{run_fuzzy_map_em, FuzzyMapConfig, TrainingReport};
use fuzzy_pomdp::pomdp::{GroundTruthEnv, Policy, PomdpModel};
use fuzzy_pomdp::seeding::{derive_seed, stream};
use serde_json::Value;

use crate::files::{
    detect, read_dataset, read_json, read_model, validate_as, write_json, write_text, DatasetFile, DatasetManifest, SweepPoint,
    SweepReport,
};
use crate::{Algo, CliError, EvalArgs, GenDataArgs, GenFuzzyDataArgs, InitKind, RegimeArg, RegimeOpts, ReproduceArgs, SweepArgs, TrainArgs, ValidateArgs};

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn parse_policy(text: &str) -> Result<Policy, CliError> {
    let bad = || usage(format!("bad policy {text:?}; use uniform, constant:<a> or cycle:<a>,<b>,..."));
    let parse_actions = |s: &str| s.split(',').map(|a| a.trim().parse::<usize>().map_err(|_| bad())).collect::<Result<Vec<_>, _>>();
    match text.split_once(':') {
        None if text == "uniform" => Ok(Policy::UniformRandom),
        Some(("constant", a)) => Ok(Policy::Constant {
            action: a.trim().parse().map_err(|_| bad())?,
        }),
        Some(("cycle", list)) => Ok(Policy::Cycle {
            actions: parse_actions(list)?,
        }),
        _ => Err(bad()),
    }
}

/// Converts `--noise` to a standard deviation.
fn noise_std(noise: f64, is_std: bool) -> Result<f64, CliError> {
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(usage(format!("--noise must be finite and non-negative, got {noise}")));
    }
    Ok(if is_std { noise } else { noise.sqrt() })
}

pub fn gen_data(a: GenDataArgs) -> Result<(), CliError> {
    let env: GroundTruthEnv = read_json(&a.env)?;
    let policy = parse_policy(&a.policy)?;
    policy.check(env.num_actions()).map_err(usage)?;
    let sigma = noise_std(a.noise, a.noise_is_std)?;
    let (n, horizon) = (a.n as usize, a.horizon as usize);
    // Same sub-streams as the experiment harness, so seed s here matches seed s there.
    let clean = sample_dataset(&env, &policy, n, horizon, &mut stream(a.seed, "data", &[]))?;
    let trajectories = add_noise(&clean, sigma, &mut stream(a.seed, "noise", &[]))?;
    let file = DatasetFile {
        manifest: DatasetManifest {
            generator: "gen-data".into(),
            source: a.env.display().to_string(),
            n,
            horizon,
            seed: a.seed,
            policy,
            noise_sigma: sigma,
            noise_arg: Some(a.noise),
            noise_is_std: a.noise_is_std,
            num_actions: env.num_actions(),
            obs_dim: env.obs_dim(),
            num_states: Some(env.num_states()),
            action_labels: env.action_labels.clone(),
        },
        trajectories,
    };
    write_json(&a.out, &file)?;
    println!("wrote {n} trajectories of length {horizon} to {}", a.out.display());
    Ok(())
}

pub fn gen_fuzzy_data(a: GenFuzzyDataArgs) -> Result<(), CliError> {
    let fuzzy: FuzzyModel = read_json(&a.fuzzy_model)?;
    let policy = parse_policy(&a.policy)?;
    policy.check(fuzzy.num_actions).map_err(usage)?;
    let sigma = noise_std(a.output_noise_sigma, true)?;
    let (n, horizon) = (a.n as usize, a.horizon as usize);
    let trajectories = generate_fuzzy_trajectories(&fuzzy, n, horizon, &policy, sigma, &mut stream(a.seed, "data", &[]))?;
    let file = DatasetFile {
        manifest: DatasetManifest {
            generator: "gen-fuzzy-data".into(),
            source: a.fuzzy_model.display().to_string(),
            n,
            horizon,
            seed: a.seed,
            policy,
            noise_sigma: sigma,
            noise_arg: None,
            noise_is_std: true,
            num_actions: fuzzy.num_actions,
            obs_dim: fuzzy.obs_dim,
            num_states: None,
            action_labels: fuzzy.action_labels.clone(),
        },
        trajectories,
    };
    write_json(&a.out, &file)?;
    println!("wrote {n} trajectories of length {horizon} to {}", a.out.display());
    Ok(())
}

fn report_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "model".into());
    out.with_file_name(format!("{stem}.report.json"))
}

pub fn train(a: TrainArgs) -> Result<(), CliError> {
    let fuzzy: Option<FuzzyModel> = a.fuzzy_model.as_deref().map(read_json).transpose()?;
    if a.algo == Algo::FuzzyMap && fuzzy.is_none() {
        return Err(usage("--algo fuzzy-map requires --fuzzy-model"));
    }
    if a.init_file.is_some() != (a.init == InitKind::File) {
        return Err(usage("--init-file goes together with --init file"));
    }
    let (data, manifest) = read_dataset(&a.dataset)?;
    let num_actions = manifest
        .as_ref()
        .map(|m| m.num_actions)
        .or(fuzzy.as_ref().map(|f| f.num_actions))
        .unwrap_or_else(|| data.iter().flat_map(|t| t.actions.iter().copied()).max().map_or(1, |x| x + 1));
    let num_states = a
        .states
        .map(|s| s as usize)
        .or(manifest.as_ref().and_then(|m| m.num_states))
        .unwrap_or(2);

    let em_config = EmConfig {
        max_iterations: a.max_iterations as usize,
        loglik_tolerance: a.tolerance,
        seed: a.seed,
        ..EmConfig::default()
    };
    em_config.check().map_err(usage)?;

    let (init_name, init): (&str, PomdpModel) = match a.init {
        InitKind::Random => (
            "random",
            random_init(&data, num_states, num_actions, em_config.covariance_ridge, &mut stream(a.seed, "init", &[0]))?,
        ),
        InitKind::Kmeans => ("kmeans", kmeans_init(&data, num_states, num_actions, &mut stream(a.seed, "init", &[]))?),
        InitKind::File => ("file", read_model(a.init_file.as_deref().expect("checked above"))?),
    };

    let report = match a.algo {
        Algo::Em => {
            let out = run_em(&data, &init, &em_config)?;
            TrainingReport::from_em(&out, &em_config, init_name, &init)
        }
        Algo::FuzzyMap => {
            let config = FuzzyMapConfig {
                lambda_t: a.lambda_t,
                lambda_o: a.lambda_o,
                matchant_samples: a.matchant_samples as usize,
                seed: derive_seed(a.seed, "matchant", &[0]),
                final_standard_em_iterations: a.final_em_iterations as usize,
            };
            config.check().map_err(usage)?;
            let out = run_fuzzy_map_em(&data, &init, fuzzy.as_ref().expect("checked above"), &config, &em_config)?;
            TrainingReport::from_fuzzy_map(&out, &config, &em_config, init_name, &init)
        }
    };
    let checkpoint = Checkpoint {
        model: report.model.clone(),
        iteration: report.iteration,
        loglik_trace: report.loglik_trace.clone(),
    };
    write_json(&a.out, &checkpoint)?;
    let rpath = a.report.clone().unwrap_or_else(|| report_path(&a.out));
    write_json(&rpath, &report)?;
    println!(
        "{}: {} iterations, final log-likelihood {:.6}, {}",
        report.algorithm,
        report.iteration,
        report.loglik_trace.last().copied().unwrap_or(f64::NAN),
        if report.converged { "converged" } else { "stopped at the iteration limit" }
    );
    println!("checkpoint {}, report {}", a.out.display(), rpath.display());
    Ok(())
}

pub fn eval(a: EvalArgs) -> Result<(), CliError> {
    let model = read_model(&a.model)?;
    let env: GroundTruthEnv = read_json(&a.env)?;
    let report = evaluate(&model, &env)?;
    match &a.out {
        Some(path) => {
            write_json(path, &report)?;
            println!("L1 (per-row average) {:.6}", report.l1_transition);
            println!("L1 (total)           {:.6}", report.l1_transition_total);
            for (label, kl) in report.truth_labels.iter().zip(&report.kl_per_state) {
                println!("KL {label:<18}{kl}");
            }
        }
        None => {
            let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Runtime(e.to_string()))?;
            println!("{text}");
        }
    }
    Ok(())
}

fn regime_of(arg: RegimeArg) -> Regime {
    match arg {
        RegimeArg::LowData => Regime::LowData,
        RegimeArg::HighNoise => Regime::HighNoise,
        RegimeArg::Mg => Regime::MgPipeline,
    }
}

/// Regime preset, then the config file, then command-line flags.
fn experiment_config(o: &RegimeOpts) -> Result<ExperimentConfig, CliError> {
    let file: Option<Value> = o.config.as_deref().map(read_json).transpose()?;
    if let Some(v) = &file {
        if !v.is_object() {
            return Err(CliError::Runtime("config file must hold a JSON object".into()));
        }
    }
    let regime = match (o.regime, file.as_ref().and_then(|v| v.get("regime"))) {
        (Some(r), _) => regime_of(r),
        (None, Some(r)) => serde_json::from_value(r.clone()).map_err(|e| CliError::Runtime(format!("config regime: {e}")))?,
        (None, None) => return Err(usage("--regime is required (low-data, high-noise or mg)")),
    };
    let mut cfg = ExperimentConfig::preset(regime, 20);
    if let Some(Value::Object(overlay)) = file {
        let mut merged = serde_json::to_value(&cfg).map_err(|e| CliError::Runtime(e.to_string()))?;
        let target = merged.as_object_mut().expect("config serializes to an object");
        for (k, v) in overlay {
            target.insert(k, v);
        }
        target.insert("regime".into(), serde_json::to_value(regime).expect("regime serializes"));
        cfg = serde_json::from_value(merged).map_err(|e| CliError::Runtime(format!("config: {e}")))?;
    }
    if let Some(n) = o.seeds {
        cfg.seeds = (0..n).collect();
    }
    if let Some(r) = o.restarts {
        cfg.restarts = r as usize;
    }
    if let Some(m) = o.matchant_samples {
        cfg.matchant_samples = m as usize;
    }
    if let Some(p) = &o.env {
        cfg.env_file = Some(p.clone());
    }
    if let Some(p) = &o.fuzzy_model {
        cfg.fuzzy_model_file = Some(p.clone());
    }
    match o.noise {
        Some(n) => cfg.noise_sigma = noise_std(n, o.noise_is_std)?,
        None if o.noise_is_std => return Err(usage("--noise-is-std needs --noise")),
        None => {}
    }
    Ok(cfg)
}

fn out_dir(o: &RegimeOpts, cfg: &ExperimentConfig, default_name: &str) -> PathBuf {
    o.out_dir
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("results").join(default_name))
}

pub fn reproduce(a: ReproduceArgs) -> Result<(), CliError> {
    let mut cfg = experiment_config(&a.regime)?;
    if let Some(l) = a.lambda_t {
        cfg.lambda_t = l;
    }
    if let Some(l) = a.lambda_o {
        cfg.lambda_o = l;
    }
    cfg.check().map_err(usage)?;
    let dir = out_dir(&a.regime, &cfg, cfg.regime.as_str());
    let report = run_regime(&cfg)?;
    write_outputs(&report, &dir)?;
    print!("{}", format_summary_table(&report.summary));
    if cfg.regime == Regime::MgPipeline {
        println!();
        print!("{}", format_mg_table(&report.results, &report.action_labels));
    }
    for f in &report.summary.failures {
        eprintln!(
            "seed {} {}: {}",
            f.seed,
            f.algorithm.map_or("(data/init)", Algorithm::as_str),
            f.error
        );
    }
    eprintln!("outputs written to {}", dir.display());
    if report.results.is_empty() {
        return Err(CliError::Runtime(format!(
            "every seed failed; partial results in {}",
            dir.display()
        )));
    }
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x}"))
}

fn sweep_row(p: &SweepPoint) -> Vec<String> {
    let s: &RegimeSummary = &p.summary;
    let (em, fz) = (&s.algorithms[0], &s.algorithms[1]);
    let fz_mg: Vec<_> = s.mg_structure.iter().filter(|m| m.algorithm == Algorithm::FuzzyMap).collect();
    let collapsed = (!fz_mg.is_empty()).then(|| fz_mg.iter().filter(|m| m.collapsed).count() as f64 / fz_mg.len() as f64);
    let min_gap = fz_mg.iter().map(|m| m.max_mean_gap).reduce(f64::min);
    vec![
        format!("{}", p.lambda_t),
        format!("{}", p.lambda_o),
        opt(em.median_l1_avg),
        opt(fz.median_l1_avg),
        opt(s.comparison.as_ref().map(|c| c.l1_win_rate)),
        opt(s.comparison.as_ref().map(|c| c.median_relative_l1_improvement)),
        opt(em.median_final_loglik),
        opt(fz.median_final_loglik),
        opt(min_gap),
        opt(collapsed),
    ]
}

const SWEEP_HEADER: [&str; 10] = [
    "lambda_t",
    "lambda_o",
    "em_median_l1_avg",
    "fuzzy_median_l1_avg",
    "l1_win_rate",
    "median_relative_l1_improvement",
    "em_median_loglik",
    "fuzzy_median_loglik",
    "fuzzy_min_mean_gap",
    "fuzzy_collapsed_fraction",
];

pub fn sweep(a: SweepArgs) -> Result<(), CliError> {
    let base = experiment_config(&a.regime)?;
    let grid_o = match (&a.grid_o, a.tied) {
        (Some(_), true) => return Err(usage("--grid-o cannot be combined with --tied")),
        (Some(g), false) => g.clone(),
        (None, _) => a.grid.clone(),
    };
    if a.grid.is_empty() || a.grid.iter().chain(&grid_o).any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(usage("grid values must be finite and non-negative"));
    }
    let pairs: Vec<(f64, f64)> = if a.tied {
        a.grid.iter().map(|&l| (l, l)).collect()
    } else {
        a.grid.iter().flat_map(|&t| grid_o.iter().map(move |&o| (t, o))).collect()
    };
    base.check().map_err(usage)?;
    let dir = out_dir(&a.regime, &base, &format!("sweep_{}", base.regime.as_str()));

    let mut points = Vec::with_capacity(pairs.len());
    for (lt, lo) in pairs {
        log::info!("sweep point lambda_t={lt} lambda_o={lo}");
        let cfg = ExperimentConfig {
            lambda_t: lt,
            lambda_o: lo,
            ..base.clone()
        };
        let report = run_regime(&cfg)?;
        points.push(SweepPoint {
            lambda_t: lt,
            lambda_o: lo,
            summary: report.summary,
        });
    }
    let report = SweepReport {
        regime: base.regime.as_str().into(),
        seeds: base.seeds.clone(),
        grid_t: a.grid.clone(),
        grid_o: if a.tied { a.grid.clone() } else { grid_o },
        points,
    };
    write_json(&dir.join("sweep.json"), &report)?;
    let mut csv = SWEEP_HEADER.join(",");
    csv.push('\n');
    let mut table = String::new();
    let _ = writeln!(table, "{:>9} {:>9} {:>12} {:>12} {:>9} {:>12}", "lambda_t", "lambda_o", "EM L1", "Fuzzy L1", "win rate", "Fuzzy loglik");
    for p in &report.points {
        let row = sweep_row(p);
        csv.push_str(&row.join(","));
        csv.push('\n');
        let cell = |s: &str| s.parse::<f64>().map_or_else(|_| "n/a".to_string(), |x| format!("{x:.4}"));
        let _ = writeln!(
            table,
            "{:>9} {:>9} {:>12} {:>12} {:>9} {:>12}",
            row[0],
            row[1],
            cell(&row[2]),
            cell(&row[3]),
            cell(&row[4]),
            cell(&row[7])
        );
    }
    write_text(&dir.join("sweep.csv"), &csv)?;
    print!("{table}");
    eprintln!("outputs written to {}", dir.display());
    Ok(())
}

pub fn validate(a: ValidateArgs) -> Result<(), CliError> {
    let mut bad = 0;
    for path in &a.files {
        let outcome = read_json::<Value>(path).map_err(|e| e.to_string()).and_then(|value| {
            let kind = a.kind.or_else(|| detect(&value)).ok_or("unrecognized file layout")?;
            validate_as(kind, value).map(|()| kind)
        });
        match outcome {
            Ok(kind) => println!("ok {} {}", kind.name(), path.display()),
            Err(e) => {
                bad += 1;
                println!("invalid {}: {e}", path.display());
            }
        }
    }
    if bad > 0 {
        return Err(CliError::Runtime(format!("{bad} of {} files failed validation", a.files.len())));
    }
    Ok(())
}
