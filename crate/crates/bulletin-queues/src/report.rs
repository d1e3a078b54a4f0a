//! Tabular outputs: the optimization summary table, the per-replication
//! sweep CSV (and its parser, used by the chart command), the aggregate
//! JSON, and the jockeying-probability conformance table.
//!
//! All numbers are written with Rust's shortest round-trip float formatting
//! and parsed back with `str::parse`, so a write/read cycle is lossless.
//! Missing medians (empty outcome buckets) are written as `nan` and read
//! back as `None`.

use std::fmt::Write as _;

use crate::error::Error;
use crate::impatience::{jockey_probability_fsd_closed, jockey_probability_fsd_numeric};
use crate::numeric;
use crate::sim::{CellAggregate, PolicyTraceRow, ReplicationRow};
use crate::Result;

/// One interval's optimization outcome next to its reference operating
/// point. `None` marks a cell with no feasible lattice point.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub r: f64,
    /// (μ_i, μ_j, objective) found by the lattice scan.
    pub optimized: Option<(f64, f64, f64)>,
    /// (μ_i, μ_j, objective) of the fixed reference pair, when one is known
    /// for this interval.
    pub reference: Option<(f64, f64, f64)>,
}

impl SummaryRow {
    /// Objective saved by optimizing: reference minus optimized.
    pub fn improvement(&self) -> Option<f64> {
        match (self.optimized, self.reference) {
            (Some((_, _, opt)), Some((_, _, reference))) => Some(reference - opt),
            _ => None,
        }
    }
}

/// Mean/std/min/max over one column of the summary table.
#[derive(Debug, Clone, PartialEq)]
pub struct FooterStats {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

fn footer_stats(values: &[f64]) -> FooterStats {
    if values.is_empty() {
        return FooterStats {
            mean: None,
            std: None,
            min: None,
            max: None,
        };
    }
    FooterStats {
        mean: Some(numeric::mean(values)),
        std: numeric::sample_std(values),
        min: values.iter().copied().reduce(f64::min),
        max: values.iter().copied().reduce(f64::max),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryFooter {
    pub optimized: FooterStats,
    pub reference: FooterStats,
    pub average_improvement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
}

impl SummaryTable {
    /// Footer statistics recomputed from the rows on every call, so the
    /// footer can never drift from the table body.
    pub fn footer(&self) -> SummaryFooter {
        let optimized: Vec<f64> = self
            .rows
            .iter()
            .filter_map(|row| row.optimized.map(|(_, _, v)| v))
            .collect();
        let reference: Vec<f64> = self
            .rows
            .iter()
            .filter_map(|row| row.reference.map(|(_, _, v)| v))
            .collect();
        let improvements: Vec<f64> = self.rows.iter().filter_map(SummaryRow::improvement).collect();
        SummaryFooter {
            optimized: footer_stats(&optimized),
            reference: footer_stats(&reference),
            average_improvement: if improvements.is_empty() {
                None
            } else {
                Some(numeric::mean(&improvements))
            },
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "r,mu_i_opt,mu_j_opt,objective_opt,mu_i_ref,mu_j_ref,objective_ref,improvement\n",
        );
        for row in &self.rows {
            let (oi, oj, ov) = match row.optimized {
                Some((a, b, c)) => (fmt_f64(a), fmt_f64(b), fmt_f64(c)),
                None => ("nan".into(), "nan".into(), "nan".into()),
            };
            let (ri, rj, rv) = match row.reference {
                Some((a, b, c)) => (fmt_f64(a), fmt_f64(b), fmt_f64(c)),
                None => ("nan".into(), "nan".into(), "nan".into()),
            };
            let imp = row
                .improvement()
                .map_or_else(|| "nan".into(), fmt_f64);
            let _ = writeln!(out, "{},{oi},{oj},{ov},{ri},{rj},{rv},{imp}", fmt_f64(row.r));
        }
        out
    }

    /// Fixed-width rendering for terminals and log files.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>4}  {:>16}  {:>14}  {:>16}  {:>14}  {:>12}",
            "r", "optimized pair", "objective", "reference pair", "objective", "improvement"
        );
        let dash = "-".repeat(4 + 16 + 14 + 16 + 14 + 12 + 10);
        let _ = writeln!(out, "{dash}");
        for row in &self.rows {
            let pair = |p: Option<(f64, f64, f64)>| match p {
                Some((a, b, _)) => format!("({}, {})", fmt_f64(a), fmt_f64(b)),
                None => "infeasible".to_string(),
            };
            let value = |p: Option<(f64, f64, f64)>| match p {
                Some((_, _, v)) => format!("{v:.6}"),
                None => "-".to_string(),
            };
            let imp = match row.improvement() {
                Some(v) => format!("{v:.6}"),
                None => "-".to_string(),
            };
            let _ = writeln!(
                out,
                "{:>4}  {:>16}  {:>14}  {:>16}  {:>14}  {:>12}",
                fmt_f64(row.r),
                pair(row.optimized),
                value(row.optimized),
                pair(row.reference),
                value(row.reference),
                imp
            );
        }
        let footer = self.footer();
        let _ = writeln!(out, "{dash}");
        let stat = |s: &FooterStats| -> String {
            match (s.mean, s.std, s.min, s.max) {
                (Some(mean), std, Some(min), Some(max)) => format!(
                    "mean {:.6}  std {}  min {:.6}  max {:.6}",
                    mean,
                    std.map_or_else(|| "-".into(), |v| format!("{v:.6}")),
                    min,
                    max
                ),
                _ => "no feasible cells".to_string(),
            }
        };
        let _ = writeln!(out, "optimized: {}", stat(&footer.optimized));
        let _ = writeln!(out, "reference: {}", stat(&footer.reference));
        let _ = writeln!(
            out,
            "average improvement: {}",
            footer
                .average_improvement
                .map_or_else(|| "-".to_string(), |v| format!("{v:.6}"))
        );
        out
    }
}

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        v.to_string()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), fmt_f64)
}

pub const REPLICATION_CSV_HEADER: &str = "r,lambda,policy,seed,renege_rate_fsd,renege_rate_icd,\
jockey_rate_fsd,jockey_rate_icd,wait_median_reneged,wait_median_jockeyed,wait_median_served,\
mu_i_final,mu_j_final";

/// Serialize sweep replications into the pinned CSV column order.
pub fn replication_csv(rows: &[ReplicationRow]) -> String {
    let mut out = String::from(REPLICATION_CSV_HEADER);
    out.push('\n');
    for row in rows {
        let m = &row.metrics;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt_f64(row.r),
            fmt_f64(row.lambda),
            if row.policy { "on" } else { "off" },
            row.seed,
            fmt_f64(m.renege_rate_fsd),
            fmt_f64(m.renege_rate_icd),
            fmt_f64(m.jockey_rate_fsd),
            fmt_f64(m.jockey_rate_icd),
            fmt_opt(m.wait_median_reneged),
            fmt_opt(m.wait_median_jockeyed),
            fmt_opt(m.wait_median_served),
            fmt_f64(m.mu_final.0),
            fmt_f64(m.mu_final.1),
        );
    }
    out
}

pub const POLICY_TRACE_CSV_HEADER: &str =
    "time,mu_i,mu_j,utility,predicted_renege,predicted_jockey";

/// Serialize one replication's recalibration trace: one row per bulletin,
/// recorded after the policy step.
pub fn policy_trace_csv(rows: &[PolicyTraceRow]) -> String {
    let mut out = String::from(POLICY_TRACE_CSV_HEADER);
    out.push('\n');
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_f64(row.time),
            fmt_f64(row.mu_i),
            fmt_f64(row.mu_j),
            fmt_f64(row.utility),
            fmt_f64(row.predicted_renege),
            fmt_f64(row.predicted_jockey),
        );
    }
    out
}

/// One parsed line of the sweep CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCsvRow {
    pub r: f64,
    pub lambda: f64,
    pub policy: bool,
    pub seed: u64,
    pub renege_rate_fsd: f64,
    pub renege_rate_icd: f64,
    pub jockey_rate_fsd: f64,
    pub jockey_rate_icd: f64,
    pub wait_median_reneged: Option<f64>,
    pub wait_median_jockeyed: Option<f64>,
    pub wait_median_served: Option<f64>,
    pub mu_i_final: f64,
    pub mu_j_final: f64,
}

fn csv_f64(line: usize, field: &str, value: &str) -> Result<f64> {
    value.parse::<f64>().map_err(|_| Error::ParseError {
        line,
        msg: format!("column `{field}`: cannot read `{value}` as a number"),
    })
}

fn csv_opt(line: usize, field: &str, value: &str) -> Result<Option<f64>> {
    if value == "nan" {
        return Ok(None);
    }
    csv_f64(line, field, value).map(Some)
}

/// Parse text produced by [`replication_csv`]. The header row is required
/// and must match the pinned column order.
pub fn parse_replication_csv(text: &str) -> Result<Vec<SweepCsvRow>> {
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Err(Error::ParseError {
            line: 1,
            msg: "empty input: expected the sweep CSV header".to_string(),
        });
    };
    if header.trim() != REPLICATION_CSV_HEADER {
        return Err(Error::ParseError {
            line: 1,
            msg: format!("unexpected header `{header}`"),
        });
    }
    let mut rows = Vec::new();
    for (index, raw) in lines {
        let line = index + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        if fields.len() != 13 {
            return Err(Error::ParseError {
                line,
                msg: format!("expected 13 columns, found {}", fields.len()),
            });
        }
        let policy = match fields[2] {
            "on" => true,
            "off" => false,
            other => {
                return Err(Error::ParseError {
                    line,
                    msg: format!("column `policy`: expected on or off, got `{other}`"),
                })
            }
        };
        rows.push(SweepCsvRow {
            r: csv_f64(line, "r", fields[0])?,
            lambda: csv_f64(line, "lambda", fields[1])?,
            policy,
            seed: fields[3].parse::<u64>().map_err(|_| Error::ParseError {
                line,
                msg: format!("column `seed`: cannot read `{}` as an integer", fields[3]),
            })?,
            renege_rate_fsd: csv_f64(line, "renege_rate_fsd", fields[4])?,
            renege_rate_icd: csv_f64(line, "renege_rate_icd", fields[5])?,
            jockey_rate_fsd: csv_f64(line, "jockey_rate_fsd", fields[6])?,
            jockey_rate_icd: csv_f64(line, "jockey_rate_icd", fields[7])?,
            wait_median_reneged: csv_opt(line, "wait_median_reneged", fields[8])?,
            wait_median_jockeyed: csv_opt(line, "wait_median_jockeyed", fields[9])?,
            wait_median_served: csv_opt(line, "wait_median_served", fields[10])?,
            mu_i_final: csv_f64(line, "mu_i_final", fields[11])?,
            mu_j_final: csv_f64(line, "mu_j_final", fields[12])?,
        });
    }
    Ok(rows)
}

/// Pretty-printed JSON of the per-cell aggregates.
pub fn aggregate_json(cells: &[CellAggregate]) -> Result<String> {
    serde_json::to_string_pretty(cells)
        .map_err(|e| Error::ValidationError(format!("aggregate serialization: {e}")))
}

/// One comparison of the numeric jockeying probability against the printed
/// closed-form series.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformanceRow {
    pub ell: usize,
    pub k: usize,
    pub xi_i: f64,
    pub xi_j: f64,
    pub numeric: f64,
    pub closed: f64,
    pub abs_diff: f64,
}

/// Tabulate numeric vs closed-form jockeying probabilities over a grid of
/// positions and rate margins. The divergence is reported, never corrected:
/// the `closed` column is the series exactly as printed.
pub fn conformance_table(
    ells: &[usize],
    ks: &[usize],
    xis: &[f64],
) -> Result<Vec<ConformanceRow>> {
    let mut rows = Vec::new();
    for &ell in ells {
        for &k in ks {
            for &xi_i in xis {
                for &xi_j in xis {
                    let numeric = jockey_probability_fsd_numeric(ell, k, xi_i, xi_j, 0.0)?;
                    let closed = jockey_probability_fsd_closed(ell, k, xi_i, xi_j);
                    rows.push(ConformanceRow {
                        ell,
                        k,
                        xi_i,
                        xi_j,
                        numeric,
                        closed,
                        abs_diff: (numeric - closed).abs(),
                    });
                }
            }
        }
    }
    Ok(rows)
}

pub fn conformance_csv(rows: &[ConformanceRow]) -> String {
    let mut out = String::from("ell,k,xi_i,xi_j,numeric,closed,abs_diff\n");
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            row.ell,
            row.k,
            fmt_f64(row.xi_i),
            fmt_f64(row.xi_j),
            fmt_f64(row.numeric),
            fmt_f64(row.closed),
            fmt_f64(row.abs_diff),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{run_experiment, PolicyFilter, SimConfig, SweepSpec};

    fn table() -> SummaryTable {
        SummaryTable {
            rows: vec![
                SummaryRow {
                    r: 3.0,
                    optimized: Some((4.0, 4.5, 1.25)),
                    reference: Some((4.5, 2.5, 1.6)),
                },
                SummaryRow {
                    r: 5.0,
                    optimized: Some((5.0, 5.5, 1.05)),
                    reference: Some((2.5, 0.5, 1.3)),
                },
            ],
        }
    }

    #[test]
    fn footer_recomputes_from_rows() {
        let mut t = table();
        let f = t.footer();
        assert_eq!(f.optimized.mean, Some((1.25 + 1.05) / 2.0));
        assert_eq!(f.optimized.min, Some(1.05));
        assert_eq!(f.optimized.max, Some(1.25));
        let imp = f.average_improvement.unwrap();
        assert!((imp - ((1.6 - 1.25) + (1.3 - 1.05)) / 2.0).abs() < 1e-15);

        // the footer follows edits to the body
        t.rows[0].optimized = None;
        let f = t.footer();
        assert_eq!(f.optimized.mean, Some(1.05));
        assert_eq!(f.optimized.std, None);
        assert_eq!(f.average_improvement, Some(1.3 - 1.05));
    }

    #[test]
    fn summary_renders_infeasible_cells() {
        let t = SummaryTable {
            rows: vec![SummaryRow {
                r: 3.0,
                optimized: None,
                reference: Some((4.5, 2.5, 1.6)),
            }],
        };
        let text = t.render_text();
        assert!(text.contains("infeasible"));
        let csv = t.to_csv();
        let row = csv.lines().nth(1).unwrap();
        assert!(row.starts_with("3,nan,nan,nan,4.5,2.5,1.6,nan"));
        assert_eq!(t.footer().optimized.mean, None);
    }

    #[test]
    fn replication_csv_round_trips() {
        let template = SimConfig::baseline(4.0, 5.0, 5.0, 11).unwrap();
        let spec = SweepSpec {
            template,
            intervals: vec![3.0],
            lambdas: vec![3.0, 5.0],
            replications: 2,
            policy: PolicyFilter::Both,
            rho_init: Some((0.75, 0.8)),
        };
        let results = run_experiment(&spec).unwrap();
        let csv = replication_csv(&results.rows);
        assert!(csv.starts_with(REPLICATION_CSV_HEADER));
        let parsed = parse_replication_csv(&csv).unwrap();
        assert_eq!(parsed.len(), results.rows.len());
        for (row, orig) in parsed.iter().zip(&results.rows) {
            assert_eq!(row.r, orig.r);
            assert_eq!(row.lambda, orig.lambda);
            assert_eq!(row.policy, orig.policy);
            assert_eq!(row.seed, orig.seed);
            assert_eq!(row.renege_rate_fsd, orig.metrics.renege_rate_fsd);
            assert_eq!(row.wait_median_served, orig.metrics.wait_median_served);
            assert_eq!(row.mu_i_final, orig.metrics.mu_final.0);
        }
    }

    #[test]
    fn csv_parser_reports_line_and_column() {
        let err = parse_replication_csv("").unwrap_err();
        assert!(matches!(err, Error::ParseError { line: 1, .. }));

        let err = parse_replication_csv("r,lambda,nope\n").unwrap_err();
        assert!(err.to_string().contains("unexpected header"));

        let text = format!("{REPLICATION_CSV_HEADER}\n3,5,maybe,1,0,0,0,0,nan,nan,nan,4,4\n");
        let err = parse_replication_csv(&text).unwrap_err();
        match err {
            Error::ParseError { line, msg } => {
                assert_eq!(line, 2);
                assert!(msg.contains("policy"), "{msg}");
            }
            other => panic!("expected a parse error, got {other}"),
        }

        let text = format!("{REPLICATION_CSV_HEADER}\n3,5,on,1,0,0\n");
        let err = parse_replication_csv(&text).unwrap_err();
        assert!(err.to_string().contains("13 columns"), "{err}");
    }

    #[test]
    fn nan_medians_survive_the_round_trip() {
        let text = format!(
            "{REPLICATION_CSV_HEADER}\n3,5,off,7,0.1,0.2,0.3,0.4,nan,0.5,nan,4,4.5\n"
        );
        let rows = parse_replication_csv(&text).unwrap();
        assert_eq!(rows[0].wait_median_reneged, None);
        assert_eq!(rows[0].wait_median_jockeyed, Some(0.5));
        assert_eq!(rows[0].wait_median_served, None);
    }

    #[test]
    fn conformance_grid_has_expected_shape_and_bounds() {
        let rows = conformance_table(&[1, 2], &[1, 2, 3], &[0.5, 2.0]).unwrap();
        assert_eq!(rows.len(), 2 * 3 * 4);
        for row in &rows {
            assert!((0.0..=1.0).contains(&row.numeric), "{row:?}");
            assert!(row.abs_diff >= 0.0);
            assert!(
                (row.abs_diff - (row.numeric - row.closed).abs()).abs() < 1e-15,
                "diff column must restate the columns it came from"
            );
        }
        // the printed series agrees at the single-position case...
        let agree = rows
            .iter()
            .find(|r| r.ell == 1 && r.k == 1 && r.xi_i == 0.5 && r.xi_j == 2.0)
            .unwrap();
        assert!(agree.abs_diff < 1e-8, "{agree:?}");
        // ...and drifts beyond it, which the table reports without touching
        let drift = rows
            .iter()
            .find(|r| r.ell == 2 && r.k == 1 && r.xi_i == 0.5 && r.xi_j == 2.0)
            .unwrap();
        assert!(drift.abs_diff > 0.01, "{drift:?}");

        let csv = conformance_csv(&rows);
        assert!(csv.starts_with("ell,k,xi_i,xi_j,numeric,closed,abs_diff\n"));
        assert_eq!(csv.lines().count(), rows.len() + 1);
    }
}
