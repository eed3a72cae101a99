//! Per-component savings between two runs and the weight-dominance check.

use std::io::Write;

use serde::Serialize;

use super::{HarnessError, ResultRow, ResultTable, REPORT_TOL};
use crate::model::Weights;

/// Compared quantities, in column order.
pub const COMPONENTS: [&str; 14] =
    ["tpc", "pc", "pn", "pap", "pcp", "ar", "ay", "agb", "pr", "py", "pgb", "ponu", "pq", "td"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SavingsRow {
    /// `None` on the averages row.
    pub demand_gflops: Option<f64>,
    /// Percent saved by run a relative to run b, per [`COMPONENTS`] entry;
    /// `None` where either side is missing or b is zero while a is not.
    pub savings_pct: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SavingsTable {
    /// One row per sweep point, then the averages row.
    pub rows: Vec<SavingsRow>,
}

impl SavingsTable {
    pub fn average(&self) -> Option<&SavingsRow> {
        self.rows.last().filter(|r| r.demand_gflops.is_none())
    }

    /// `demand_gflops,<component>_saving_pct...`; the averages row has
    /// `average` in the first column.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), HarnessError> {
        let err = |e: csv::Error| HarnessError::Table(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["demand_gflops".to_string()];
        header.extend(COMPONENTS.iter().map(|c| format!("{c}_saving_pct")));
        w.write_record(&header).map_err(err)?;
        for r in &self.rows {
            let mut rec = vec![r.demand_gflops.map_or("average".to_string(), |d| format!("{d}"))];
            rec.extend(r.savings_pct.iter().map(|v| v.map_or(String::new(), |x| format!("{x:.6}"))));
            w.write_record(&rec).map_err(err)?;
        }
        w.flush().map_err(|e| HarnessError::Table(e.to_string()))?;
        Ok(())
    }
}

fn components(row: &ResultRow) -> Vec<Option<f64>> {
    let mut out: Vec<Option<f64>> = match &row.power {
        Some(p) => p.entries().iter().map(|&(_, v)| Some(v)).collect(),
        None => vec![None; 13],
    };
    out.push(row.td);
    out
}

fn saving(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    let (a, b) = (a?, b?);
    if b == 0.0 {
        return (a == 0.0).then_some(0.0);
    }
    Some((b - a) / b * 100.0)
}

fn check_sweeps(a: &ResultTable, b: &ResultTable) -> Result<(), HarnessError> {
    if a.rows.len() != b.rows.len() {
        return Err(HarnessError::MismatchedSweeps(format!("{} vs {} points", a.rows.len(), b.rows.len())));
    }
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        if (ra.demand_gflops - rb.demand_gflops).abs() > 1e-9 {
            return Err(HarnessError::MismatchedSweeps(format!("{} vs {} GFLOPs", ra.demand_gflops, rb.demand_gflops)));
        }
    }
    Ok(())
}

/// Percentage saved by run `a` relative to run `b`, `(b - a) / b`, per
/// component and sweep point, with an averages row appended.
pub fn compare_runs(a: &ResultTable, b: &ResultTable) -> Result<SavingsTable, HarnessError> {
    check_sweeps(a, b)?;
    let mut rows: Vec<SavingsRow> = a
        .rows
        .iter()
        .zip(&b.rows)
        .map(|(ra, rb)| SavingsRow {
            demand_gflops: Some(ra.demand_gflops),
            savings_pct: components(ra).into_iter().zip(components(rb)).map(|(x, y)| saving(x, y)).collect(),
        })
        .collect();
    let avg = (0..COMPONENTS.len())
        .map(|c| {
            let vals: Vec<f64> = rows.iter().filter_map(|r| r.savings_pct[c]).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        })
        .collect();
    rows.push(SavingsRow { demand_gflops: None, savings_pct: avg });
    Ok(SavingsTable { rows })
}

/// Weight-dominance outcome at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceRow {
    pub demand_gflops: f64,
    pub td_power: f64,
    pub td_delay: f64,
    pub tpc_power: f64,
    pub tpc_delay: f64,
    /// Allowed excess of the delay run's TD over the power run's.
    pub td_slack: f64,
    /// Allowed excess of the power run's TPC over the delay run's.
    pub tpc_slack: f64,
    pub td_ok: bool,
    pub tpc_ok: bool,
}

fn abs_gap(row: &ResultRow, w: Weights) -> Option<f64> {
    row.abs_gap().or_else(|| {
        let obj = w.alpha * row.power?.tpc + w.beta * row.td.unwrap_or(0.0);
        Some(row.gap? * obj.abs().max(1.0))
    })
}

/// Each run's solution can be no worse than the other's under its own
/// weights, up to its absolute optimality gap:
/// `a_d TPC_d + b_d TD_d <= a_d TPC_p + b_d TD_p + gap_d`, and the same with
/// the power weights. Reported components carry the relative error of
/// solutions accepted at [`REPORT_TOL`], so each side gets that much room.
/// Points where either run lacks a solution are skipped.
pub fn weight_dominance(
    power: &ResultTable,
    power_w: Weights,
    delay: &ResultTable,
    delay_w: Weights,
) -> Result<Vec<DominanceRow>, HarnessError> {
    check_sweeps(power, delay)?;
    let mut out = Vec::new();
    for (p, d) in power.rows.iter().zip(&delay.rows) {
        let (Some(pp), Some(dp), Some(td_p), Some(td_d)) = (p.power, d.power, p.td, d.td) else { continue };
        let (Some(gap_p), Some(gap_d)) = (abs_gap(p, power_w), abs_gap(d, delay_w)) else { continue };
        if delay_w.beta <= 0.0 || power_w.alpha <= 0.0 {
            return Err(HarnessError::Invalid("dominance needs beta > 0 for the delay run and alpha > 0 for the power run".into()));
        }
        let td_slack = (gap_d + delay_w.alpha * (pp.tpc - dp.tpc)) / delay_w.beta;
        let tpc_slack = (gap_p + power_w.beta * (td_d - td_p)) / power_w.alpha;
        out.push(DominanceRow {
            demand_gflops: p.demand_gflops,
            td_power: td_p,
            td_delay: td_d,
            tpc_power: pp.tpc,
            tpc_delay: dp.tpc,
            td_slack,
            tpc_slack,
            td_ok: td_d <= td_p + td_slack + REPORT_TOL * td_p.abs(),
            tpc_ok: pp.tpc <= dp.tpc + tpc_slack + REPORT_TOL * dp.tpc.abs(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PowerBreakdown;

    fn row(demand: f64, tpc: f64, td: f64) -> ResultRow {
        let mut r = ResultRow::failed(demand, String::new());
        r.status = "optimal".into();
        r.power = Some(PowerBreakdown { tpc, pc: tpc / 2.0, pn: tpc / 2.0, ..PowerBreakdown::default() });
        r.td = Some(td);
        r.gap = Some(0.0);
        r
    }

    fn table(rows: Vec<ResultRow>) -> ResultTable {
        ResultTable { scenario: "t".into(), weights: None, rows }
    }

    #[test]
    fn self_comparison_saves_nothing() {
        let t = table(vec![row(6.0, 80.0, 1e-5), row(8.0, 90.0, 2e-5)]);
        let s = compare_runs(&t, &t).unwrap();
        assert_eq!(s.rows.len(), 3);
        for r in &s.rows {
            assert!(r.savings_pct.iter().all(|v| *v == Some(0.0)));
        }
    }

    #[test]
    fn doubled_power_is_half_saved() {
        let a = table(vec![row(6.0, 80.0, 1e-5), row(8.0, 90.0, 2e-5)]);
        let b = table(vec![row(6.0, 160.0, 1e-5), row(8.0, 180.0, 2e-5)]);
        let s = compare_runs(&a, &b).unwrap();
        for r in &s.rows {
            assert_eq!(r.savings_pct[0], Some(50.0));
        }
        assert_eq!(s.average().unwrap().savings_pct[13], Some(0.0));
    }

    #[test]
    fn mismatched_sweeps_are_rejected() {
        let a = table(vec![row(6.0, 80.0, 1e-5)]);
        let b = table(vec![row(8.0, 80.0, 1e-5)]);
        assert!(matches!(compare_runs(&a, &b), Err(HarnessError::MismatchedSweeps(_))));
        assert!(compare_runs(&a, &table(vec![])).is_err());
    }

    #[test]
    fn dominance_flags_violations() {
        let p = table(vec![row(6.0, 80.0, 2e-5)]);
        let good = table(vec![row(6.0, 81.0, 1e-5)]);
        let d = weight_dominance(&p, Weights::POWER_AWARE, &good, Weights::DELAY_AWARE).unwrap();
        assert!(d[0].td_ok && d[0].tpc_ok);
        let worse = table(vec![row(6.0, 79.0, 3e-5)]);
        let d = weight_dominance(&p, Weights::POWER_AWARE, &worse, Weights::DELAY_AWARE).unwrap();
        assert!(!d[0].td_ok && !d[0].tpc_ok);
    }
}
