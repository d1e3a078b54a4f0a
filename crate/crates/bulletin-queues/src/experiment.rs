//! The four experiment commands behind the CLI: sweep, optimize, charts,
//! and conformance.
//!
//! Every command stages its outputs in memory first and only then touches
//! the filesystem, writing all files or none: a failure during writing
//! unlinks whatever was already written, so a crashed run never leaves a
//! half-populated output directory behind. Each run also records a manifest
//! with the tool version, the config digest, the base seed, timestamps, and
//! the files it wrote.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::charts::{
    box_chart_svg, heatmap_svg, rate_chart_svg, rate_series, wait_boxes, BoxGrouping, RateMetric,
};
use crate::config::ExperimentConfig;
use crate::error::Error;
use crate::optimizer::{objective, optimize, OptimizationResult};
use crate::report::{
    aggregate_json, conformance_csv, conformance_table, parse_replication_csv, policy_trace_csv,
    replication_csv, SummaryRow, SummaryTable,
};
use crate::sim::{run_experiment, PolicyFilter};
use crate::state::QueueParams;
use crate::Result;

/// Provenance record written next to every command's outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_digest: String,
    /// Canonical serialization of the fully-defaulted configuration, so a
    /// run can be reproduced from the manifest alone.
    pub config: String,
    pub base_seed: u64,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<String>,
}

impl RunManifest {
    fn begin(command: &str, config: &ExperimentConfig) -> Self {
        Self {
            tool: "bulletin-queues",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config_digest: config.digest(),
            config: config.canonical_string(),
            base_seed: config.seed,
            started_unix: unix_now(),
            finished_unix: 0,
            outputs: Vec::new(),
        }
    }

    fn finish(mut self, outputs: &[(String, String)]) -> Result<(String, String)> {
        self.finished_unix = unix_now();
        self.outputs = outputs.iter().map(|(name, _)| name.clone()).collect();
        let json = serde_json::to_string_pretty(&self)
            .map_err(|e| Error::ValidationError(format!("manifest serialization: {e}")))?;
        Ok(("manifest.json".to_string(), json))
    }
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .unwrap_or_default()
        .as_secs()
}

/// Write staged files into `out_dir`; on any failure remove what was
/// already written and report the error.
fn write_all(out_dir: &Path, files: Vec<(String, String)>) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written: Vec<PathBuf> = Vec::new();
    for (name, content) in files {
        let path = out_dir.join(&name);
        match fs::write(&path, content) {
            Ok(()) => written.push(path),
            Err(e) => {
                for done in &written {
                    let _ = fs::remove_file(done);
                }
                return Err(Error::io(&path, e));
            }
        }
    }
    Ok(written)
}

/// Run the configured sweep and write `sweep.csv` (one row per
/// replication), `aggregate.json` (per-cell statistics), one recalibration
/// trace per policy-on cell (its first replication), and the manifest.
pub fn cmd_sweep(
    config: &ExperimentConfig,
    policy: PolicyFilter,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let manifest = RunManifest::begin("sweep", config);
    let spec = config.sweep_spec(policy)?;
    let results = run_experiment(&spec)?;
    let mut files = vec![
        ("sweep.csv".to_string(), replication_csv(&results.rows)),
        ("aggregate.json".to_string(), aggregate_json(&results.cells)?),
    ];
    for row in &results.rows {
        if row.policy && row.seed == spec.template.seed {
            files.push((
                format!("policy_trace_r{}_l{}.csv", row.r, row.lambda),
                policy_trace_csv(&row.metrics.policy_trace),
            ));
        }
    }
    let manifest_file = manifest.finish(&files)?;
    files.push(manifest_file);
    write_all(out_dir, files)
}

/// The fixed non-optimized operating points used for comparison, by
/// dispatch interval.
pub fn reference_pair(r: f64) -> Option<(f64, f64)> {
    [
        (3.0, (4.5, 2.5)),
        (5.0, (2.5, 0.5)),
        (7.0, (6.5, 5.5)),
        (9.0, (8.5, 6.5)),
    ]
    .into_iter()
    .find(|(key, _)| (key - r).abs() < 1e-9)
    .map(|(_, pair)| pair)
}

/// Queue descriptions for the optimizer at the config's own λ: rate bounds
/// come from the policy lattice, and the stored current rate is the derived
/// initial rate clamped into them.
fn optimizer_queues(config: &ExperimentConfig) -> Result<(QueueParams, QueueParams)> {
    let (lo, hi) = (config.policy_min, config.policy_max);
    let (mu_i, mu_j) = config.initial_rates(config.lambda_total);
    let li = config.lambda_total * config.split;
    let lj = config.lambda_total * (1.0 - config.split);
    Ok((
        QueueParams::new(li, mu_i.clamp(lo, hi), lo, hi)?,
        QueueParams::new(lj, mu_j.clamp(lo, hi), lo, hi)?,
    ))
}

/// Scan the rate lattice once per configured interval. Returns the summary
/// table and each interval's full optimization result (`None` where no
/// lattice point was feasible).
pub fn optimize_intervals(
    config: &ExperimentConfig,
) -> Result<(SummaryTable, Vec<(f64, Option<OptimizationResult>)>)> {
    let grid = config.grid_spec()?;
    let weights = config.weights()?;
    let mut rows = Vec::new();
    let mut landscapes = Vec::new();
    for &r in &config.intervals {
        let mut bp = config.behavior()?;
        bp = crate::impatience::BehaviorParams::new(bp.t_local, bp.d, bp.eta, r)?;
        let queues = match optimizer_queues(config) {
            Ok(q) => q,
            Err(Error::UnstableQueue { .. }) => {
                // the arrival rate swamps every admissible service rate
                rows.push(SummaryRow {
                    r,
                    optimized: None,
                    reference: None,
                });
                landscapes.push((r, None));
                continue;
            }
            Err(other) => return Err(other),
        };
        let (qi, qj) = queues;
        let optimized = match optimize(&grid, &qi, &qj, &bp, &weights) {
            Ok(result) => Some(result),
            Err(Error::NoFeasiblePoint) => None,
            Err(other) => return Err(other),
        };
        let reference = reference_pair(r).and_then(|(ri, rj)| {
            objective(ri, rj, &qi, &qj, &bp, &weights)
                .ok()
                .map(|value| (ri, rj, value))
        });
        rows.push(SummaryRow {
            r,
            optimized: optimized
                .as_ref()
                .map(|o| (o.best_mu_i, o.best_mu_j, o.best_value)),
            reference,
        });
        landscapes.push((r, optimized));
    }
    Ok((SummaryTable { rows }, landscapes))
}

/// Optimize every configured interval and write `summary.csv`,
/// `summary.txt`, and the manifest. Returns the table along with the
/// written paths.
pub fn cmd_optimize(
    config: &ExperimentConfig,
    out_dir: &Path,
) -> Result<(SummaryTable, Vec<PathBuf>)> {
    let manifest = RunManifest::begin("optimize", config);
    let (table, _) = optimize_intervals(config)?;
    let mut files = vec![
        ("summary.csv".to_string(), table.to_csv()),
        ("summary.txt".to_string(), table.render_text()),
    ];
    let manifest_file = manifest.finish(&files)?;
    files.push(manifest_file);
    let written = write_all(out_dir, files)?;
    Ok((table, written))
}

/// Render charts from a sweep CSV: per-model rate lines, waiting-time box
/// plots under the chosen grouping, and one objective-landscape heatmap per
/// interval present in the data. Refuses to write anything when the CSV has
/// no data rows.
pub fn cmd_charts(
    config: &ExperimentConfig,
    csv_path: &Path,
    grouping: BoxGrouping,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let manifest = RunManifest::begin("charts", config);
    let text = fs::read_to_string(csv_path).map_err(|e| Error::io(csv_path, e))?;
    let rows = parse_replication_csv(&text)?;
    if rows.is_empty() {
        return Err(Error::MissingInput(format!(
            "{}: the sweep CSV has a header but no data rows",
            csv_path.display()
        )));
    }
    let mut files: Vec<(String, String)> = Vec::new();
    for (metric, title) in [
        (RateMetric::RenegeFsd, "reneging rate, rate-chain bulletins"),
        (RateMetric::RenegeIcd, "reneging rate, inter-change bulletins"),
        (RateMetric::JockeyFsd, "jockeying rate, rate-chain bulletins"),
        (RateMetric::JockeyIcd, "jockeying rate, inter-change bulletins"),
    ] {
        let series = rate_series(&rows, metric);
        files.push((
            format!("{}.svg", metric.name()),
            rate_chart_svg(&series, title, "events per second"),
        ));
    }
    let boxes = wait_boxes(&rows, grouping);
    let box_name = match grouping {
        BoxGrouping::Pooled => "wait_boxes_pooled.svg",
        BoxGrouping::ByInterval => "wait_boxes_by_interval.svg",
    };
    files.push((
        box_name.to_string(),
        box_chart_svg(&boxes, "waiting-time medians by outcome and policy"),
    ));
    // heatmaps for the intervals that actually appear in the data, with the
    // same optima a summary run would report
    let mut intervals: Vec<f64> = rows.iter().map(|row| row.r).collect();
    intervals.sort_by(|a, b| a.total_cmp(b));
    intervals.dedup();
    let chart_config = ExperimentConfig {
        intervals: intervals.clone(),
        ..config.clone()
    };
    let grid = config.grid_spec()?;
    let (_, landscapes) = optimize_intervals(&chart_config)?;
    for (r, result) in landscapes {
        let Some(result) = result else { continue };
        let svg = heatmap_svg(
            &result.landscape,
            &grid,
            (result.best_mu_i, result.best_mu_j),
            reference_pair(r),
            &format!("objective landscape, bulletins every {r}s"),
        );
        files.push((format!("landscape_r{r}.svg"), svg));
    }
    let manifest_file = manifest.finish(&files)?;
    files.push(manifest_file);
    write_all(out_dir, files)
}

/// Tabulate the numeric jockeying probability against the printed
/// closed-form series over the standard grid and write `conformance.csv`.
pub fn cmd_conformance(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let manifest = RunManifest::begin("conformance", config);
    let ells: Vec<usize> = (1..=6).collect();
    let ks: Vec<usize> = (1..=6).collect();
    let xis = [0.5, 1.0, 2.0, 4.0];
    let rows = conformance_table(&ells, &ks, &xis)?;
    let mut files = vec![("conformance.csv".to_string(), conformance_csv(&rows))];
    let manifest_file = manifest.finish(&files)?;
    files.push(manifest_file);
    write_all(out_dir, files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn small_config() -> ExperimentConfig {
        parse_config(
            "[system]\nlambda_total = 4\n\
             [sim]\nhorizon = 120\nseed = 7\n\
             [sweep]\nintervals = 3, 5\nlambdas = 3, 5\nreplications = 2\n",
        )
        .unwrap()
    }

    #[test]
    fn sweep_writes_csv_json_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config();
        let written = cmd_sweep(&cfg, PolicyFilter::Both, dir.path()).unwrap();
        let names: Vec<String> = written
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(
            names,
            [
                "sweep.csv",
                "aggregate.json",
                "policy_trace_r3_l3.csv",
                "policy_trace_r3_l5.csv",
                "policy_trace_r5_l3.csv",
                "policy_trace_r5_l5.csv",
                "manifest.json",
            ]
        );

        let csv = fs::read_to_string(&written[0]).unwrap();
        let rows = parse_replication_csv(&csv).unwrap();
        assert_eq!(rows.len(), 2 * 2 * 2 * 2); // r × λ × policy × reps

        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&written[1]).unwrap()).unwrap();
        assert_eq!(json.as_array().unwrap().len(), 2 * 2 * 2);

        // one trace per policy-on cell, first replication: one row per
        // bulletin over the 120 s horizon
        let trace = fs::read_to_string(&written[2]).unwrap();
        assert!(trace.starts_with(crate::report::POLICY_TRACE_CSV_HEADER));
        assert_eq!(trace.lines().count(), 1 + 40); // bulletins at 3, 6, …, 120

        let manifest: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(written.last().unwrap()).unwrap()).unwrap();
        assert_eq!(manifest["config_digest"], cfg.digest().as_str());
        assert_eq!(manifest["config"], cfg.canonical_string().as_str());
        assert_eq!(manifest["base_seed"], 7);
        assert_eq!(manifest["command"], "sweep");
        assert_eq!(manifest["outputs"].as_array().unwrap().len(), 6);

        // the same config reproduces the same data bytes in a fresh dir
        let dir2 = tempfile::tempdir().unwrap();
        let again = cmd_sweep(&cfg, PolicyFilter::Both, dir2.path()).unwrap();
        assert_eq!(csv, fs::read_to_string(&again[0]).unwrap());
    }

    #[test]
    fn sweep_failure_leaves_no_outputs() {
        // fixed absolute rate: fine at the base λ, unstable once the sweep
        // raises λ past it
        let cfg = parse_config(
            "[system]\nlambda_total = 4\nmu_i = 5\nmu_j = 5\n\
             [sweep]\nintervals = 3\nlambdas = 3, 12\nreplications = 1\n",
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let err = cmd_sweep(&cfg, PolicyFilter::Off, dir.path()).unwrap_err();
        assert!(err.to_string().contains("stability"), "{err}");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn optimize_summary_beats_references() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse_config("").unwrap(); // defaults: λ = 0.8, r ∈ {3,5,7,9}
        let (table, written) = cmd_optimize(&cfg, dir.path()).unwrap();
        assert_eq!(table.rows.len(), 4);
        for row in &table.rows {
            let (_, _, opt) = row.optimized.expect("defaults must be feasible");
            let (_, _, reference) = row.reference.expect("the four intervals have references");
            assert!(
                opt <= reference,
                "r={}: optimized {opt} must not exceed reference {reference}",
                row.r
            );
        }
        let footer = table.footer();
        assert!(footer.average_improvement.unwrap() > 0.0);

        // the footer is a pure function of the rows
        let values: Vec<f64> = table
            .rows
            .iter()
            .map(|row| row.optimized.unwrap().2)
            .collect();
        let by_hand = values.iter().sum::<f64>() / values.len() as f64;
        assert!((footer.optimized.mean.unwrap() - by_hand).abs() < 1e-12);

        let names: Vec<String> = written
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, ["summary.csv", "summary.txt", "manifest.json"]);
        let text = fs::read_to_string(&written[1]).unwrap();
        assert!(text.contains("average improvement"));
    }

    #[test]
    fn unknown_intervals_get_no_reference_column() {
        let cfg = parse_config("[sweep]\nintervals = 4\n").unwrap();
        let (table, _) = optimize_intervals(&cfg).unwrap();
        assert_eq!(table.rows.len(), 1);
        assert!(table.rows[0].optimized.is_some());
        assert_eq!(table.rows[0].reference, None);
        assert_eq!(table.footer().average_improvement, None);
    }

    #[test]
    fn charts_render_from_sweep_output() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config();
        let written = cmd_sweep(&cfg, PolicyFilter::Both, dir.path()).unwrap();
        let charts_dir = tempfile::tempdir().unwrap();
        let charts = cmd_charts(&cfg, &written[0], BoxGrouping::Pooled, charts_dir.path()).unwrap();
        let names: Vec<String> = charts
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(
            names,
            [
                "renege_rate_fsd.svg",
                "renege_rate_icd.svg",
                "jockey_rate_fsd.svg",
                "jockey_rate_icd.svg",
                "wait_boxes_pooled.svg",
                "landscape_r3.svg",
                "landscape_r5.svg",
                "manifest.json",
            ]
        );
        for path in charts.iter().filter(|p| p.extension().unwrap() == "svg") {
            let svg = fs::read_to_string(path).unwrap();
            assert!(svg.starts_with("<svg"), "{}", path.display());
            assert!(svg.ends_with("</svg>\n"), "{}", path.display());
        }

        // identical inputs produce identical chart bytes
        let again_dir = tempfile::tempdir().unwrap();
        let again = cmd_charts(&cfg, &written[0], BoxGrouping::Pooled, again_dir.path()).unwrap();
        for (a, b) in charts.iter().zip(&again) {
            if a.extension().unwrap() == "svg" {
                assert_eq!(
                    fs::read_to_string(a).unwrap(),
                    fs::read_to_string(b).unwrap()
                );
            }
        }

        // the interval grouping writes under its own name
        let by_r_dir = tempfile::tempdir().unwrap();
        let by_r =
            cmd_charts(&cfg, &written[0], BoxGrouping::ByInterval, by_r_dir.path()).unwrap();
        assert!(by_r
            .iter()
            .any(|p| p.file_name().unwrap() == "wait_boxes_by_interval.svg"));
    }

    #[test]
    fn charts_refuse_headers_without_data() {
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("empty.csv");
        fs::write(&csv_path, format!("{}\n", crate::report::REPLICATION_CSV_HEADER)).unwrap();
        let out_dir = dir.path().join("charts");
        let err = cmd_charts(
            &small_config(),
            &csv_path,
            BoxGrouping::Pooled,
            &out_dir,
        )
        .unwrap_err();
        assert!(matches!(err, Error::MissingInput(_)), "{err}");
        assert!(!out_dir.exists(), "no partial chart output may appear");

        let missing = dir.path().join("nope.csv");
        let err = cmd_charts(&small_config(), &missing, BoxGrouping::Pooled, &out_dir).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn conformance_covers_the_position_grid() {
        let dir = tempfile::tempdir().unwrap();
        let written = cmd_conformance(&small_config(), dir.path()).unwrap();
        let csv = fs::read_to_string(&written[0]).unwrap();
        assert_eq!(csv.lines().count(), 1 + 6 * 6 * 16);
        assert!(csv.starts_with("ell,k,xi_i,xi_j,numeric,closed,abs_diff"));
    }
}
