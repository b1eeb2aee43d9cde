//! Command entry points: run a preset and write its files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::aces_run::{run_aces, AcesRunReport, CZ_LABEL};
use crate::appendix::{run_appendix, AppendixReport};
use crate::config::{ExperimentConfig, Preset};
use crate::confusion::{run_confusion_demo, ConfusionReport};
use crate::error::Result;
use crate::output::{ensure_dir, write_csv, write_json, write_text};
use crate::rb::{run_rb, RbReport};
use crate::twirl::{run_twirl_demo, TwirlDemoReport};
use aces_core::pipeline::BoxStats;
use aces_core::rb::RbResult;

/// Runs `preset` with `cfg` and writes its outputs under `out`.
pub fn run_preset(preset: Preset, cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate(preset)?;
    match preset {
        Preset::TwirlDemo => cmd_twirl_demo(cfg, out),
        Preset::ConfusionDemo => cmd_confusion_demo(cfg, out),
        Preset::AcesRun => cmd_aces_run(cfg, out),
        Preset::AppendixModels => cmd_appendix_models(cfg, out),
        Preset::Rb => cmd_rb(cfg, out),
    }
}

fn config_copy(cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf> {
    write_json(out, "config.json", cfg)
}

pub fn cmd_twirl_demo(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let report = run_twirl_demo(cfg)?;
    ensure_dir(out)?;
    Ok(vec![
        config_copy(cfg, out)?,
        write_csv(out, "twirl_curves.csv", &report.points)?,
        write_csv(out, "twirl_fits.csv", &report.fits)?,
        write_text(out, "summary.txt", &twirl_summary(&report))?,
    ])
}

fn twirl_summary(r: &TwirlDemoReport) -> String {
    let mut s = format!("twirl demo, {} shots per point\n", r.shots);
    for f in &r.fits {
        let _ = writeln!(
            s,
            "n_cz={:<3} twirl={:<5} amplitude={:.4} best_power={} preferred={}",
            f.n_cz, f.twirl, f.amplitude, f.best_power, f.preferred
        );
    }
    s
}

#[derive(Serialize)]
struct ConfusionRow {
    qubit: usize,
    kind: &'static str,
    truth: usize,
    measured: usize,
    probability: f64,
}

pub fn cmd_confusion_demo(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let report = run_confusion_demo(cfg)?;
    ensure_dir(out)?;
    let mut rows = Vec::new();
    for e in &report.entries {
        for (kind, m) in [
            ("planted", &e.planted),
            ("planted_symmetrized", &e.planted_symmetrized),
            ("raw", &e.raw),
            ("twirled", &e.twirled),
        ] {
            for truth in 0..2 {
                for measured in 0..2 {
                    rows.push(ConfusionRow {
                        qubit: e.qubit,
                        kind,
                        truth,
                        measured,
                        probability: m.get(truth, measured),
                    });
                }
            }
        }
    }
    Ok(vec![
        config_copy(cfg, out)?,
        write_csv(out, "confusion.csv", &rows)?,
        write_json(out, "confusion.json", &report)?,
        write_text(out, "summary.txt", &confusion_summary(&report))?,
    ])
}

fn confusion_summary(r: &ConfusionReport) -> String {
    let mut s = format!("confusion demo, {} shots per prepared state\n", r.shots);
    for e in &r.entries {
        let _ = writeln!(
            s,
            "qubit {}: asymmetry raw={:.4} twirled={:.4} (sigma {:.4})",
            e.qubit, e.raw_asymmetry, e.twirled_asymmetry, e.twirled_sigma
        );
    }
    s
}

#[derive(Serialize)]
struct BoxRow<'a> {
    key: &'a str,
    min: f64,
    q1: f64,
    median: f64,
    q3: f64,
    max: f64,
    mean: f64,
    planted: Option<f64>,
}

impl<'a> BoxRow<'a> {
    fn new(key: &'a str, b: &BoxStats, planted: Option<f64>) -> Self {
        BoxRow {
            key,
            min: b.min,
            q1: b.q1,
            median: b.median,
            q3: b.q3,
            max: b.max,
            mean: b.mean,
            planted,
        }
    }
}

#[derive(Serialize)]
struct CdfRow {
    shots: u64,
    abs_residual: f64,
    cumulative: f64,
}

#[derive(Serialize)]
struct RateRow<'a> {
    turns: f64,
    pauli: &'a str,
    min: f64,
    q1: f64,
    median: f64,
    q3: f64,
    max: f64,
    mean: f64,
}

#[derive(Serialize)]
struct ResidualRow {
    shots: u64,
    mean: f64,
    std: f64,
    mean_abs: f64,
    median_abs: f64,
    log_std: f64,
}

pub fn cmd_aces_run(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let r = run_aces(cfg)?;
    ensure_dir(out)?;
    let fid: Vec<BoxRow> = r
        .fidelity_stats
        .iter()
        .map(|(k, b)| BoxRow::new(k, b, r.planted_fidelities.get(k).copied()))
        .collect();
    let cdf: Vec<CdfRow> = r
        .residuals
        .iter()
        .flat_map(|c| {
            c.cdf.iter().map(move |&(x, p)| CdfRow {
                shots: c.shots,
                abs_residual: x,
                cumulative: p,
            })
        })
        .collect();
    let res: Vec<ResidualRow> = r
        .residuals
        .iter()
        .map(|c| ResidualRow {
            shots: c.shots,
            mean: c.mean,
            std: c.std,
            mean_abs: c.mean_abs,
            median_abs: c.median_abs,
            log_std: c.log_std,
        })
        .collect();
    let rates: Vec<RateRow> = r
        .injected
        .iter()
        .flat_map(|s| {
            s.cz_rates.iter().map(move |(p, b)| RateRow {
                turns: s.turns,
                pauli: p,
                min: b.min,
                q1: b.q1,
                median: b.median,
                q3: b.q3,
                max: b.max,
                mean: b.mean,
            })
        })
        .collect();
    Ok(vec![
        config_copy(cfg, out)?,
        write_csv(out, "fidelity_box.csv", &fid)?,
        write_csv(out, "cz_fidelity_hist.csv", &r.cz_fidelity_histogram)?,
        write_csv(out, "residual_cdf.csv", &cdf)?,
        write_csv(out, "residual_summary.csv", &res)?,
        write_csv(out, "cz_rates.csv", &rates)?,
        write_json(out, "fits.json", &r)?,
        write_text(out, "summary.txt", &aces_summary(&r))?,
    ])
}

fn aces_summary(r: &AcesRunReport) -> String {
    let mut s = format!(
        "ACES run: seed {}, {} shots, pool {} rows / {} circuits (rank {}), {} design sets\n",
        r.seed, r.shots, r.pool.rows, r.pool.circuits, r.pool.rank, r.pool.sets
    );
    s.push_str("average fidelity (median over fits, planted):\n");
    for (k, b) in &r.fidelity_stats {
        let planted = r.planted_fidelities.get(k).copied().unwrap_or(f64::NAN);
        let _ = writeln!(s, "  {k:<10} {:.5}  {:.5}", b.median, planted);
    }
    s.push_str("residuals (shots, std, median |r|):\n");
    for c in &r.residuals {
        let _ = writeln!(s, "  {:>7} {:.3e} {:.3e}", c.shots, c.std, c.median_abs);
    }
    s.push_str("injected Rz on qubit 1 (turns, median p_IZ, median CZ fidelity):\n");
    for inj in &r.injected {
        let iz = inj.cz_rates.get("IZ").map_or(f64::NAN, |b| b.median);
        let _ = writeln!(s, "  {:.3} {:.5} {:.5}", inj.turns, iz, inj.cz_fidelity.median);
    }
    let _ = writeln!(s, "CZ key: {CZ_LABEL}");
    s
}

#[derive(Serialize)]
struct CurveRow {
    model: &'static str,
    shots: u64,
    std: f64,
    mean: f64,
    median_abs: f64,
}

pub fn cmd_appendix_models(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let r = run_appendix(cfg)?;
    ensure_dir(out)?;
    let curves: Vec<CurveRow> = r
        .curves
        .iter()
        .flat_map(|c| {
            c.points.iter().map(move |p| CurveRow {
                model: c.model.name(),
                shots: p.shots,
                std: p.std,
                mean: p.mean,
                median_abs: p.median_abs,
            })
        })
        .collect();
    Ok(vec![
        config_copy(cfg, out)?,
        write_csv(out, "residual_vs_shots.csv", &curves)?,
        write_csv(out, "optimizer_comparison.csv", &r.comparison.instances)?,
        write_json(out, "appendix.json", &r)?,
        write_text(out, "summary.txt", &appendix_summary(&r))?,
    ])
}

fn appendix_summary(r: &AppendixReport) -> String {
    let mut s = format!("benchmark models, seed {}\n", r.seed);
    for c in &r.curves {
        let _ = writeln!(
            s,
            "model {:<3} slope {:+.3}  top-decade slope {:+.3}  final std {:.3e}",
            c.model.name(),
            c.slope,
            c.top_slope,
            c.final_std()
        );
    }
    let c = &r.comparison;
    let _ = writeln!(
        s,
        "optimizer comparison at {} shots: {} of {} instances projected; mean signed residual LS+TVD {:+.3e}, bound-constrained {:+.3e}",
        c.shots,
        c.projected,
        c.instances.len(),
        c.ls_mean_signed,
        c.bc_mean_signed
    );
    s
}

#[derive(Serialize)]
struct RbRow<'a> {
    experiment: &'a str,
    qubits: String,
    depth: usize,
    mean: f64,
    std: f64,
    fit: f64,
}

fn rb_rows<'a>(name: &'a str, r: &RbResult, rows: &mut Vec<RbRow<'a>>) {
    let qubits = r.qubits.iter().map(|q| q.to_string()).collect::<Vec<_>>().join(" ");
    for (i, &d) in r.depths.iter().enumerate() {
        rows.push(RbRow {
            experiment: name,
            qubits: qubits.clone(),
            depth: d,
            mean: r.mean[i],
            std: r.std[i],
            fit: r.fit.predict(d as f64),
        });
    }
}

pub fn cmd_rb(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let r = run_rb(cfg)?;
    ensure_dir(out)?;
    let mut rows = Vec::new();
    for x in &r.individual {
        rb_rows("individual", x, &mut rows);
    }
    for x in &r.simultaneous {
        rb_rows("simultaneous", x, &mut rows);
    }
    rb_rows("reference", &r.reference, &mut rows);
    rb_rows("interleaved", &r.interleaved, &mut rows);
    Ok(vec![
        config_copy(cfg, out)?,
        write_csv(out, "rb_curves.csv", &rows)?,
        write_json(out, "rb.json", &r)?,
        write_text(out, "summary.txt", &rb_summary(&r))?,
    ])
}

fn rb_summary(r: &RbReport) -> String {
    let mut s = format!("RB, seed {}, {} shots per sequence\n", r.seed, r.shots);
    for (q, f) in r.fidelity_1q.iter().enumerate() {
        let sim = r.fidelity_1q_simultaneous.get(q).copied().unwrap_or(f64::NAN);
        let _ = writeln!(
            s,
            "qubit {q}: alpha {:.5}, fidelity {:.5} (simultaneous {:.5}), {:.3} gates per Clifford",
            r.individual[q].fit.alpha, f, sim, r.individual[q].gates_per_clifford
        );
    }
    let _ = writeln!(
        s,
        "two-qubit: alpha_ref {:.5}, alpha_int {:.5}, CZ fidelity {:.5} +/- {:.5}",
        r.reference.fit.alpha, r.interleaved.fit.alpha, r.cz_fidelity, r.cz_fidelity_err
    );
    if let Some(p) = r.cz_planted {
        let _ = writeln!(s, "planted CZ fidelity {p:.5}");
    }
    s
}
