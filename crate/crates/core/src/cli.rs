//! Batch front door: experiment orchestration and CSV/JSON emission for the
//! `simulate | verify | sweep | check-law` subcommands.

use crate::config::RunConfig;
use crate::constitutive::{check_admissibility, AdmissibilityReport};
use crate::entropy::EntropyReport;
use crate::error::{Error, Result};
use crate::fields::Grid;
use crate::solver::{fit_decay_rate, run, RunError, RunOutcome};
use crate::verifier::{
    jensen_logsobolev_check, lower_bound_split, modulated_entropy_bound, poincare_zero_set,
    GeneratorKind, ProfileEnsemble, RatioReport, SplitParams,
};
use rayon::prelude::*;
use serde::Serialize;
use std::path::{Path, PathBuf};

/// Map an error onto the documented process exit codes: 2 for configuration
/// and validation problems, 3 for solver failures, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Domain(_) | Error::Admissibility(_) | Error::WindowTooShort { .. } => 2,
        Error::VacuumReached { .. } | Error::RetryCapExhausted { .. } => 3,
        _ => 1,
    }
}

/// Resolve the output directory: CLI flag, then config, then `$NSK_OUT`,
/// then `./out`.
pub fn resolve_out_dir(cli: Option<&Path>, cfg: &RunConfig) -> PathBuf {
    if let Some(p) = cli {
        return p.to_path_buf();
    }
    if let Some(d) = &cfg.output.dir {
        return PathBuf::from(d);
    }
    if let Ok(d) = std::env::var("NSK_OUT") {
        if !d.is_empty() {
            return PathBuf::from(d);
        }
    }
    PathBuf::from("out")
}

#[derive(Debug, Clone, Serialize)]
pub struct FitSummary {
    pub c: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
}

#[derive(Debug, Clone, Serialize)]
pub struct SimRecord {
    pub fit: Option<FitSummary>,
    pub fit_error: Option<String>,
    pub monotone: bool,
    pub max_entropy_increase: f64,
    pub e_initial: f64,
    pub e_final: f64,
    pub records: usize,
    pub steps: u64,
    pub rejected_steps: u64,
    pub error: Option<RunError>,
}

fn write_series_csv(path: &Path, records: &[EntropyReport]) -> Result<()> {
    let mut text = String::with_capacity(64 * (records.len() + 1));
    text.push_str(EntropyReport::CSV_HEADER);
    text.push('\n');
    for r in records {
        text.push_str(&r.csv_row());
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Run one experiment into `dir` (series.csv + run.json). Used by both
/// `simulate` and each sweep member.
pub fn simulate_to_dir(
    cfg: &RunConfig,
    dir: &Path,
    override_admissibility: bool,
) -> Result<SimRecord> {
    std::fs::create_dir_all(dir)?;
    let started = std::time::Instant::now();
    let grid = cfg.grid()?;
    let initial = cfg.initial_state(grid)?;
    let r_mean = cfg.resolved_r(&initial);
    let solver_cfg = cfg.solver_config(r_mean, override_admissibility)?;

    let RunOutcome { series, error } = run(&solver_cfg, &initial)?;
    write_series_csv(&dir.join("series.csv"), &series.records)?;

    let window = cfg.fit_window();
    let (fit, fit_error) = if error.is_none() {
        match fit_decay_rate(&series, window) {
            Ok((c, r_squared)) => (
                Some(FitSummary {
                    c,
                    r_squared,
                    window,
                }),
                None,
            ),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, Some("run ended early; decay fit skipped".into()))
    };

    let record = SimRecord {
        fit: fit.clone(),
        fit_error,
        monotone: series.is_monotone(solver_cfg.residual_tol),
        max_entropy_increase: series.max_entropy_increase(),
        e_initial: series.records.first().map(|r| r.e_total).unwrap_or(f64::NAN),
        e_final: series.records.last().map(|r| r.e_total).unwrap_or(f64::NAN),
        records: series.records.len(),
        steps: series.telemetry.steps,
        rejected_steps: series.telemetry.rejected_steps,
        error,
    };

    let run_json = serde_json::json!({
        "schema_version": 1,
        "config": cfg,
        "resolved": {
            "r_mean": r_mean,
            "rho_floor": solver_cfg.rho_floor,
        },
        "summary": record,
        "telemetry": series.telemetry,
        "channel_conventions": {
            "d_pressure": "kappa * int mu'(rho) H''(rho) |grad rho|^2; the doubled-weight variant of the same channel is exactly 2 * d_pressure",
            "d_capillary": "c_diss * epsilon * int |dxx Z(rho)|^2",
            "d_z1_quartic": "c_diss * epsilon * int |dx Z1(rho)|^4 (reported, not part of the residual)",
        },
        "runtime_seconds": started.elapsed().as_secs_f64(),
    });
    std::fs::write(
        dir.join("run.json"),
        serde_json::to_string_pretty(&run_json).map_err(|e| Error::Config(e.to_string()))? + "\n",
    )?;

    Ok(record)
}

/// `simulate`: run, emit series.csv and run.json, print the verdict line.
pub fn cmd_simulate(cfg: &RunConfig, out_dir: &Path, override_admissibility: bool) -> Result<SimRecord> {
    let record = simulate_to_dir(cfg, out_dir, override_admissibility)?;
    if let Some(err) = record.error {
        eprintln!("run failed: {err}");
        return Err(match err {
            RunError::Vacuum { cell, t } => Error::VacuumReached {
                cell,
                t,
                rho: f64::NAN,
                floor: f64::NAN,
            },
            RunError::RetryCapExhausted { t } => Error::RetryCapExhausted { t, retries: 0 },
        });
    }
    match &record.fit {
        Some(f) => println!("decay: C={} r2={} monotone={}", f.c, f.r_squared, record.monotone),
        None => println!("decay: C=nan r2=nan monotone={}", record.monotone),
    }
    Ok(record)
}

/// `check-law`: evaluate the admissibility report for the configured pair.
pub fn cmd_check_law(cfg: &RunConfig) -> Result<AdmissibilityReport> {
    let law = cfg.law()?;
    let pressure = cfg.pressure_law()?;
    let report = check_admissibility(&law, &pressure, (1e-5, 1e5), 400)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&serde_json::json!({
            "law": law,
            "pressure": pressure,
            "report": report,
            "admissible": report.admissible(),
        }))
        .map_err(|e| Error::Config(e.to_string()))?
    );
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaSummary {
    pub lemma: String,
    pub parameters: std::collections::BTreeMap<String, f64>,
    pub max_ratio: Option<f64>,
    pub argmax_profile: Option<usize>,
    pub evaluated: usize,
    pub skipped: usize,
    pub max_ratio_refined: Option<f64>,
    /// Relative change of the max ratio under grid doubling.
    pub stability_rel: Option<f64>,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifySummary {
    pub schema_version: u32,
    pub seed: u64,
    pub grid_n: usize,
    pub refined_grid_n: usize,
    pub profiles: usize,
    pub lemmas: Vec<LemmaSummary>,
    pub all_ok: bool,
}

pub struct VerifyOpts {
    pub lemma: String,
    pub delta: Option<f64>,
    pub profiles: Option<usize>,
    pub seed: Option<u64>,
    /// Re-evaluate on the doubled grid and require < 5% drift of each max.
    pub check_refinement: bool,
}

const STABILITY_TOL: f64 = 0.05;

fn summarize(base: RatioReport, refined: Option<&RatioReport>) -> LemmaSummary {
    let evaluated = base.evaluated_count();
    let skipped = base.entries.len() - evaluated;
    let max_ratio_refined = refined.and_then(|r| r.max_ratio);
    let stability_rel = match (base.max_ratio, max_ratio_refined) {
        (Some(a), Some(b)) if a != 0.0 => Some(((a - b) / a).abs()),
        _ => None,
    };
    let finite = base.max_ratio.map(f64::is_finite).unwrap_or(false);
    let stable = match (refined, stability_rel) {
        (None, _) => true,
        (Some(_), Some(s)) => s < STABILITY_TOL,
        (Some(_), None) => false,
    };
    LemmaSummary {
        lemma: base.lemma.clone(),
        parameters: base.parameters.clone(),
        max_ratio: base.max_ratio,
        argmax_profile: base.argmax_profile,
        evaluated,
        skipped,
        max_ratio_refined,
        stability_rel,
        ok: finite && stable,
    }
}

fn write_verify_csv(path: &Path, reports: &[&RatioReport]) -> Result<()> {
    let mut text = String::from("lemma,params,profile,component,lhs,rhs,ratio,note\n");
    for rep in reports {
        let params = rep
            .parameters
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";");
        for e in &rep.entries {
            let ratio = e.ratio.map(|r| r.to_string()).unwrap_or_default();
            let note = e.note.clone().unwrap_or_default().replace(',', ";");
            text.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                rep.lemma, params, e.profile, e.component, e.lhs, e.rhs, ratio, note
            ));
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// `verify`: run the requested inequality check(s) over seeded ensembles,
/// write verify.csv and verify-summary.json.
pub fn cmd_verify(cfg: &RunConfig, opts: &VerifyOpts, out_dir: &Path) -> Result<VerifySummary> {
    const LEMMAS: [&str; 4] = ["poincare", "lower-bound", "modulated", "jensen"];
    let selected: Vec<&str> = if opts.lemma == "all" {
        LEMMAS.to_vec()
    } else if LEMMAS.contains(&opts.lemma.as_str()) {
        vec![opts.lemma.as_str()]
    } else {
        return Err(Error::Config(format!(
            "unknown lemma {:?} (expected one of poincare | lower-bound | modulated | jensen | all)",
            opts.lemma
        )));
    };

    std::fs::create_dir_all(out_dir)?;
    let seed = opts.seed.unwrap_or(cfg.seed);
    let profiles = opts.profiles.unwrap_or(cfg.verify.profiles);
    if profiles == 0 {
        return Err(Error::Config("verify needs at least one profile".into()));
    }
    let r = cfg.verify.r;
    let grid = cfg.grid()?;
    let grid2 = Grid::new(grid.n() * 2, grid.length())?;
    let law = cfg.law()?;
    let pressure = cfg.pressure_law()?;
    let m_big = (8.0 * r).max(16.0);

    // evaluate one lemma on one grid; the same seed regenerates the same
    // continuum profiles at either resolution
    let eval = |lemma: &str, g: Grid| -> Result<Vec<RatioReport>> {
        match lemma {
            "poincare" => {
                let levels: Vec<f64> = match opts.delta {
                    Some(d) => vec![d],
                    None => vec![0.5, 0.25, 0.125],
                };
                let pool = ProfileEnsemble::zero_set_pool(profiles, &levels, g, seed)?;
                Ok(levels.iter().map(|&d| poincare_zero_set(&pool, d)).collect())
            }
            "lower-bound" => {
                let ens = ProfileEnsemble::generate(GeneratorKind::SmoothRandom, profiles, r, g, seed)?;
                let beta = check_admissibility(&law, &pressure, (1e-5, 1e5), 200)?.beta_limit;
                let mut sp = SplitParams::from_proof_choices(r, beta);
                sp.eta = cfg.verify.eta;
                Ok(vec![lower_bound_split(&ens, &law, &pressure, &sp)?])
            }
            "modulated" => {
                let ens = ProfileEnsemble::generate(GeneratorKind::SmoothRandom, profiles, r, g, seed)?;
                let params = cfg.entropy_params(r)?;
                Ok(vec![modulated_entropy_bound(&ens, &law, &pressure, &params)?])
            }
            "jensen" => {
                let ens = ProfileEnsemble::generate(GeneratorKind::HeavyTail, profiles, r, g, seed)?;
                Ok(vec![jensen_logsobolev_check(&ens, m_big)?])
            }
            _ => unreachable!(),
        }
    };

    let mut base_reports: Vec<RatioReport> = Vec::new();
    let mut lemma_summaries: Vec<LemmaSummary> = Vec::new();
    for lemma in &selected {
        let base = eval(lemma, grid)?;
        let refined = if opts.check_refinement {
            Some(eval(lemma, grid2)?)
        } else {
            None
        };
        for (i, rep) in base.into_iter().enumerate() {
            let refined_rep = refined.as_ref().map(|v| &v[i]);
            lemma_summaries.push(summarize(rep.clone(), refined_rep));
            base_reports.push(rep);
        }
    }

    write_verify_csv(&out_dir.join("verify.csv"), &base_reports.iter().collect::<Vec<_>>())?;
    let all_ok = lemma_summaries.iter().all(|l| l.ok);
    let summary = VerifySummary {
        schema_version: 1,
        seed,
        grid_n: grid.n(),
        refined_grid_n: grid2.n(),
        profiles,
        lemmas: lemma_summaries,
        all_ok,
    };
    std::fs::write(
        out_dir.join("verify-summary.json"),
        serde_json::to_string_pretty(&summary).map_err(|e| Error::Config(e.to_string()))? + "\n",
    )?;
    for l in &summary.lemmas {
        println!(
            "verify {}: max_ratio={} evaluated={} stability={} ok={}",
            l.lemma,
            l.max_ratio.map(|v| v.to_string()).unwrap_or_else(|| "none".into()),
            l.evaluated,
            l.stability_rel
                .map(|v| format!("{:.2}%", 100.0 * v))
                .unwrap_or_else(|| "n/a".into()),
            l.ok
        );
    }
    Ok(summary)
}

pub struct SweepOpts {
    /// Each entry is `KEY=V1,V2,...`; the sweep is the Cartesian product.
    pub vary: Vec<String>,
    pub override_admissibility: bool,
}

const MAX_SWEEP_RUNS: usize = 64;

/// `sweep`: fan a parameter grid out into per-run directories plus a summary
/// CSV. Individual run failures are recorded and do not abort the sweep.
pub fn cmd_sweep(cfg: &RunConfig, opts: &SweepOpts, out_dir: &Path) -> Result<PathBuf> {
    if opts.vary.is_empty() {
        return Err(Error::Config("sweep needs at least one --vary KEY=V1,V2,...".into()));
    }
    let mut axes: Vec<(String, Vec<String>)> = Vec::new();
    for spec in &opts.vary {
        let (key, vals) = spec
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--vary {spec:?} is not KEY=V1,V2,...")))?;
        let values: Vec<String> = vals.split(',').map(|s| s.trim().to_string()).collect();
        if values.is_empty() || values.iter().any(|v| v.is_empty()) {
            return Err(Error::Config(format!("--vary {spec:?} has an empty value list")));
        }
        axes.push((key.to_string(), values));
    }
    let total: usize = axes.iter().map(|(_, v)| v.len()).product();
    if total == 0 {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    if total > MAX_SWEEP_RUNS {
        return Err(Error::Config(format!(
            "sweep grid has {total} runs; the cap is {MAX_SWEEP_RUNS}"
        )));
    }

    // enumerate the Cartesian product in row-major order
    let mut combos: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for (key, values) in &axes {
        let mut next = Vec::with_capacity(combos.len() * values.len());
        for combo in &combos {
            for v in values {
                let mut c = combo.clone();
                c.push((key.clone(), v.clone()));
                next.push(c);
            }
        }
        combos = next;
    }

    std::fs::create_dir_all(out_dir)?;
    let results: Vec<(usize, Vec<(String, String)>, std::result::Result<SimRecord, String>)> =
        combos
            .into_par_iter()
            .enumerate()
            .map(|(idx, combo)| {
                let dir = out_dir.join(format!("run-{idx:03}"));
                let overrides: Vec<String> =
                    combo.iter().map(|(k, v)| format!("{k}={v}")).collect();
                let result = cfg
                    .with_overrides(&overrides)
                    .and_then(|c| simulate_to_dir(&c, &dir, opts.override_admissibility))
                    .map_err(|e| e.to_string())
                    .and_then(|rec| match rec.error {
                        Some(err) => Err(err.to_string()),
                        None => Ok(rec),
                    });
                (idx, combo, result)
            })
            .collect();

    let keys: Vec<String> = axes.iter().map(|(k, _)| k.clone()).collect();
    let mut text = String::from("index,");
    text.push_str(&keys.join(","));
    text.push_str(",c,r_squared,monotone,status\n");
    for (idx, combo, result) in &results {
        let values = combo.iter().map(|(_, v)| v.clone()).collect::<Vec<_>>().join(",");
        match result {
            Ok(rec) => {
                let (c, r2) = rec
                    .fit
                    .as_ref()
                    .map(|f| (f.c.to_string(), f.r_squared.to_string()))
                    .unwrap_or_default();
                text.push_str(&format!(
                    "{idx},{values},{c},{r2},{},ok\n",
                    rec.monotone
                ));
            }
            Err(msg) => {
                text.push_str(&format!("{idx},{values},,,,error: {}\n", msg.replace(',', ";")));
            }
        }
    }
    let summary_path = out_dir.join("sweep-summary.csv");
    std::fs::write(&summary_path, text)?;
    let failed = results.iter().filter(|(_, _, r)| r.is_err()).count();
    println!(
        "sweep: {} runs, {} failed, summary at {}",
        results.len(),
        failed,
        summary_path.display()
    );
    Ok(summary_path)
}

impl RunConfig {
    /// Re-apply dotted-path overrides on top of this config (sweep members).
    pub fn with_overrides(&self, overrides: &[String]) -> Result<RunConfig> {
        let text = toml::to_string(self).map_err(|e| Error::Config(e.to_string()))?;
        RunConfig::from_toml_with_overrides(&text, overrides)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_match_the_contract() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::Domain("x".into())), 2);
        assert_eq!(exit_code(&Error::Admissibility("x".into())), 2);
        assert_eq!(
            exit_code(&Error::VacuumReached {
                cell: 0,
                t: 0.0,
                rho: 0.0,
                floor: 0.0
            }),
            3
        );
        assert_eq!(exit_code(&Error::RetryCapExhausted { t: 0.0, retries: 1 }), 3);
    }

    #[test]
    fn with_overrides_round_trips() {
        let cfg = RunConfig::from_toml_str("").unwrap();
        let varied = cfg.with_overrides(&["entropy.r3=2.0".into()]).unwrap();
        assert_eq!(varied.entropy.r3, 2.0);
        assert_eq!(varied.grid, cfg.grid);
    }
}
