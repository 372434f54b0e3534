use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Algorithm, RegimeReport, RegimeSummary, SeedResult};
use crate::em::Checkpoint;
use crate::error::{Error, Result};
use crate::pomdp::PomdpModel;

pub const RUNS_CSV: &str = "runs.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const MG_TABLE: &str = "mg_table.txt";
pub const TABLE_TXT: &str = "table.txt";

/// Per-action row L1 gap above which a state is highlighted.
const ACTION_GAP: f64 = 0.1;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v > 0.0 {
        "inf".into()
    } else {
        "nan".into()
    }
}

fn runs_csv(report: &RegimeReport) -> Result<Vec<u8>> {
    let labels = &report.summary.state_labels;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["regime", "seed", "algorithm", "lambda_t", "lambda_o", "l1_avg", "l1_total"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(labels.iter().map(|l| format!("kl_{}", l.to_lowercase())));
    w.write_record(&header)?;
    let cfg = &report.config;
    for r in &report.results {
        for (alg, outcome) in &r.runs {
            let Ok(run) = outcome else { continue };
            let (lt, lo) = match alg {
                Algorithm::Em => (0.0, 0.0),
                Algorithm::FuzzyMap => (cfg.lambda_t, cfg.lambda_o),
            };
            let mut row = vec![
                cfg.regime.as_str().to_string(),
                r.seed.to_string(),
                alg.as_str().to_string(),
                num(lt),
                num(lo),
            ];
            match &run.eval {
                Some(e) => {
                    row.push(num(e.l1_transition));
                    row.push(num(e.l1_transition_total));
                    row.extend(e.kl_per_state.iter().map(|k| num(k.as_f64())));
                }
                None => row.extend(std::iter::repeat_n(String::new(), 2 + labels.len())),
            }
            w.write_record(&row)?;
        }
    }
    w.into_inner().map_err(|e| Error::InvalidConfig(format!("csv buffer: {e}")))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.4}"))
}

/// Median table laid out as measure rows by algorithm columns.
pub fn format_summary_table(summary: &RegimeSummary) -> String {
    let mut out = String::new();
    let em = &summary.algorithms[0];
    let fz = &summary.algorithms[1];
    let _ = writeln!(
        out,
        "Regime: {} ({} seeds, medians over completed runs)",
        summary.regime.as_str(),
        summary.seeds.len()
    );
    let _ = writeln!(out, "{:<28} {:>14} {:>14}", "Measure", "Standard EM", "Fuzzy-MAP EM");
    let _ = writeln!(out, "{}", "-".repeat(58));
    let _ = writeln!(
        out,
        "{:<28} {:>14} {:>14}",
        "L1 distance transitions",
        fmt_opt(em.median_l1_avg),
        fmt_opt(fz.median_l1_avg)
    );
    let _ = writeln!(
        out,
        "{:<28} {:>14} {:>14}",
        "L1 total (unnormalized)",
        fmt_opt(em.median_l1_total),
        fmt_opt(fz.median_l1_total)
    );
    for (i, label) in summary.state_labels.iter().enumerate() {
        let _ = writeln!(
            out,
            "{:<28} {:>14} {:>14}",
            format!("KL divergence {label}"),
            em.median_kl[i].to_string(),
            fz.median_kl[i].to_string()
        );
    }
    if let Some(c) = &summary.comparison {
        let _ = writeln!(
            out,
            "Fuzzy-MAP lower L1 in {:.0}% of {} paired seeds; median relative improvement {:.1}%",
            100.0 * c.l1_win_rate,
            c.paired_seeds,
            100.0 * c.median_relative_l1_improvement
        );
    }
    if let Some(r2) = &summary.expert_r2 {
        let parts: Vec<String> = r2.iter().map(|v| format!("{v:.3}")).collect();
        let _ = writeln!(out, "Expert model holdout R^2 per dimension: {}", parts.join(", "));
    }
    if !summary.failures.is_empty() {
        let _ = writeln!(out, "{} failed run(s) recorded in {SUMMARY_JSON}", summary.failures.len());
    }
    out
}

fn model_table(out: &mut String, model: &PomdpModel, action_labels: &[String]) {
    let ns = model.num_states();
    let labels = &model.state_labels;
    for (a, action) in action_labels.iter().enumerate() {
        let _ = writeln!(out, "Action: {action}");
        let mut head = format!("  {:<14}", "current \\ next");
        for l in labels {
            let _ = write!(head, " {l:>10}");
        }
        let _ = writeln!(out, "{head}");
        for s in 0..ns {
            let gap: f64 = (0..action_labels.len())
                .filter(|&b| b != a)
                .map(|b| {
                    model
                        .transitions
                        .row(s, a)
                        .iter()
                        .zip(model.transitions.row(s, b))
                        .map(|(x, y)| (x - y).abs())
                        .sum::<f64>()
                })
                .fold(0.0, f64::max);
            let mut line = format!("  {:<14}", labels[s]);
            for v in model.transitions.row(s, a) {
                let _ = write!(line, " {v:>10.3}");
            }
            if gap > ACTION_GAP {
                let _ = write!(line, "  * actions differ (row L1 gap {gap:.3})");
            }
            let _ = writeln!(out, "{line}");
        }
    }
    let _ = writeln!(out, "Observation means:");
    for s in 0..ns {
        let parts: Vec<String> = model.obs_means[s].iter().map(|v| format!("{v:.3}")).collect();
        let _ = writeln!(out, "  {:<14} [{}]", labels[s], parts.join(", "));
    }
}

/// Learned transitions per action plus state means, one block per seed.
pub fn format_mg_table(results: &[SeedResult], action_labels: &[String]) -> String {
    let mut out = String::new();
    for r in results {
        for (alg, outcome) in &r.runs {
            let name = match alg {
                Algorithm::Em => "Standard EM",
                Algorithm::FuzzyMap => "Fuzzy-MAP EM",
            };
            let _ = writeln!(out, "== seed {} / {name} ==", r.seed);
            match outcome {
                Ok(run) => model_table(&mut out, &run.model, action_labels),
                Err(e) => {
                    let _ = writeln!(out, "failed: {e}");
                }
            }
            let _ = writeln!(out);
        }
    }
    out
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(io_err(path))
}

/// Writes runs.csv, summary.json, per-run checkpoints and the text tables.
pub fn write_outputs(report: &RegimeReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write(&dir.join(RUNS_CSV), &runs_csv(report)?)?;
    let mut summary = serde_json::to_string_pretty(&report.summary)?;
    summary.push('\n');
    write(&dir.join(SUMMARY_JSON), summary.as_bytes())?;
    for r in &report.results {
        for (alg, outcome) in &r.runs {
            let Ok(run) = outcome else { continue };
            let ckpt = Checkpoint {
                model: run.model.clone(),
                iteration: run.loglik_trace.len().saturating_sub(1),
                loglik_trace: run.loglik_trace.clone(),
            };
            let mut text = serde_json::to_string_pretty(&ckpt)?;
            text.push('\n');
            write(&dir.join(format!("model_{}_{}.json", r.seed, alg.as_str())), text.as_bytes())?;
        }
    }
    write(&dir.join(TABLE_TXT), format_summary_table(&report.summary).as_bytes())?;
    if report.summary.regime == super::Regime::MgPipeline {
        write(&dir.join(MG_TABLE), format_mg_table(&report.results, &report.action_labels).as_bytes())?;
    }
    Ok(())
}
