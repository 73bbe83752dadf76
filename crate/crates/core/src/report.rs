//! CSV, verdict and plot-data emission with byte-stable formatting.

use crate::analysis::{EpsRecord, Outcome, RateFit, SweepReport, Verdict};
use crate::Result;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;

fn fmt(v: f64) -> String {
    format!("{v:.17e}")
}

pub const SWEEP_CSV_HEADER: &str = "epsilon,max_grad_neck,max_grad_segment,pressure_osc,max_stress,grad_floor_scaled,sigma_floor_scaled,a11_11,a11_22,a11_33,a11_12,a11_23,a11_13,C1_1,C1_2,C1_3,C2_1,C2_2,C2_3,b_tilde_1_1,b_tilde_1_2,b_tilde_1_3,q_R,condition,balance_max_rel,envelope_sup,envelope_headline,hessian_proxy,dofs";

pub fn sweep_csv_row(r: &EpsRecord) -> String {
    let mut s = String::new();
    let cols = [
        r.epsilon,
        r.max_grad_neck,
        r.max_grad_segment,
        r.pressure_osc,
        r.max_stress,
        r.grad_floor_scaled,
        r.sigma_floor_scaled,
        r.a[0][0],
        r.a[1][1],
        r.a[2][2],
        r.a[0][1],
        r.a[1][2],
        r.a[0][2],
        r.constants[0],
        r.constants[1],
        r.constants[2],
        r.constants[3],
        r.constants[4],
        r.constants[5],
        r.b_tilde[0][0],
        r.b_tilde[1][0],
        r.b_tilde[2][0],
        r.q_r,
        r.condition,
        r.balance_max_rel,
        r.envelope_sup,
        r.envelope_headline_sup,
        r.hessian_proxy,
    ];
    for (i, c) in cols.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        let _ = write!(s, "{}", fmt(*c));
    }
    let _ = write!(s, ",{}", r.dof_count);
    s
}

pub fn sweep_csv(records: &[EpsRecord]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&sweep_csv_row(r));
        out.push('\n');
    }
    out
}

/// gnuplot-ready log-log columns for the headline quantities.
pub fn loglog_data(records: &[EpsRecord]) -> String {
    let mut out =
        String::from("# log10(eps) log10(max_grad) log10(pressure_osc) log10(max_stress)\n");
    for r in records {
        let _ = writeln!(
            out,
            "{} {} {} {}",
            fmt(r.epsilon.log10()),
            fmt(r.max_grad_neck.log10()),
            fmt(r.pressure_osc.max(1e-300).log10()),
            fmt(r.max_stress.log10())
        );
    }
    out
}

#[derive(Serialize)]
pub struct VerdictFile<'a> {
    pub rates: &'a [(String, RateFit)],
    pub criteria: &'a [Verdict],
    pub all_pass: bool,
}

pub fn verdicts_pass(verdicts: &[Verdict]) -> bool {
    verdicts.iter().all(|v| v.outcome != Outcome::Fail)
}

pub fn write_sweep_outputs(dir: &Path, report: &SweepReport, extra: &[Verdict]) -> Result<bool> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("sweep.csv"), sweep_csv(&report.records))?;
    std::fs::write(dir.join("loglog.dat"), loglog_data(&report.records))?;
    let mut all: Vec<Verdict> = report.verdicts.clone();
    all.extend_from_slice(extra);
    let pass = verdicts_pass(&all);
    let file = VerdictFile { rates: &report.rates, criteria: &all, all_pass: pass };
    std::fs::write(dir.join("verdicts.json"), serde_json::to_string_pretty(&file)?)?;
    Ok(pass)
}

pub fn print_verdicts(verdicts: &[Verdict]) {
    for v in verdicts {
        let mark = match v.outcome {
            Outcome::Pass => "PASS",
            Outcome::Fail => "FAIL",
            Outcome::Inconclusive => "INCONCLUSIVE",
        };
        println!(
            "{mark:12} {:24} measured {:+.4e} in [{:+.3e}, {:+.3e}] -- {}",
            v.id, v.measured, v.bounds[0], v.bounds[1], v.description
        );
    }
}

/// Applies configured band overrides by id.
pub fn apply_overrides(verdicts: &mut [Verdict], overrides: &[crate::config::ToleranceOverride]) {
    for o in overrides {
        for v in verdicts.iter_mut() {
            if v.id == o.id && v.outcome != Outcome::Inconclusive {
                v.bounds = o.bounds;
                v.outcome = if v.measured >= o.bounds[0] && v.measured <= o.bounds[1] {
                    Outcome::Pass
                } else {
                    Outcome::Fail
                };
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_is_fixed_width_and_stable() {
        assert_eq!(fmt(1.0), "1.00000000000000000e0");
        assert_eq!(fmt(-0.25), "-2.50000000000000000e-1");
        assert_eq!(fmt(1.0), fmt(1.0));
    }
}
