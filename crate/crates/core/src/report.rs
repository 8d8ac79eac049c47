//! Result serialization: one CSV row per phenotype or replicate and a JSON
//! summary document. Floating-point values carry 6 significant digits.

use std::io::Write;

use serde_json::{json, Value};

use crate::biobank::{BatchReport, BatchRow, BiobankDecision};
use crate::error::{Error, Result};
use crate::sim::{Campaign, MeanSe};

/// Formats `x` with 6 significant digits, trimming trailing zeros, using
/// scientific notation outside `[1e-4, 1e6)` like C's `%g`.
pub fn fmt_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    // Round first so the exponent reflects carries like 9.999999 -> 10.
    let sci = format!("{x:.5e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if !(-4..6).contains(&exp) {
        let (mant, _) = sci.split_at(sci.find('e').unwrap());
        let mant = trim_zeros(mant);
        return format!("{mant}e{exp}");
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// `x` rounded to 6 significant digits.
pub fn round_sig6(x: f64) -> f64 {
    if x.is_finite() {
        fmt_sig6(x).parse().unwrap_or(x)
    } else {
        x
    }
}

fn num(x: f64) -> Value {
    let r = round_sig6(x);
    serde_json::Number::from_f64(r).map_or(Value::Null, Value::Number)
}

fn opt_num(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Csv {
        path: "<output>".into(),
        message: e.to_string(),
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<output>", e)
}

pub const RESULT_HEADER: [&str; 8] = [
    "phenotype_id",
    "branch",
    "alpha_hat",
    "alpha_hat_c",
    "n_selected",
    "selected",
    "wall_time",
    "error",
];

/// Selected indices as 1-based column numbers joined by `;`.
pub fn join_selected(set: &[usize]) -> String {
    set.iter().map(|j| (j + 1).to_string()).collect::<Vec<_>>().join(";")
}

fn decision_record(d: &BiobankDecision) -> Vec<String> {
    vec![
        d.phenotype_id.clone(),
        d.branch.to_string(),
        fmt_sig6(d.alpha_hat),
        fmt_sig6(d.alpha_hat_c),
        d.final_set.len().to_string(),
        join_selected(&d.final_set),
        fmt_sig6(d.wall_time),
        String::new(),
    ]
}

/// Writes the per-phenotype results table in report order.
pub fn write_results_csv<W: Write>(rows: &[BatchRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULT_HEADER).map_err(csv_err)?;
    for row in rows {
        let rec = match row {
            BatchRow::Done(d) => decision_record(d),
            BatchRow::Failed { phenotype_id, error } => vec![
                phenotype_id.clone(),
                "error".into(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                error.clone(),
            ],
        };
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn decision_json(d: &BiobankDecision, labels: Option<&[String]>) -> Value {
    let mut v = json!({
        "phenotype_id": d.phenotype_id,
        "branch": d.branch,
        "alpha_hat": num(d.alpha_hat),
        "alpha_hat_c": num(d.alpha_hat_c),
        "gamma": opt_num(d.gamma),
        "n_selected": d.final_set.len(),
        "selected": d.final_set.iter().map(|j| j + 1).collect::<Vec<_>>(),
        "fallback_used": d.fallback_used,
        "wall_time": num(d.wall_time),
    });
    if let Some(labels) = labels {
        v["selected_labels"] = json!(d.final_set.iter().map(|&j| labels[j].as_str()).collect::<Vec<_>>());
    }
    if let Some(f) = &d.fallback {
        v["fallback"] = json!({
            "t_star": f.t_star,
            "v_star": num(f.v_star),
            "fdr_estimate": num(f.fdr_estimate),
            "feasible": f.feasible,
        });
    }
    v
}

pub fn batch_summary_json(report: &BatchReport) -> Value {
    let s = &report.summary;
    let errors: Vec<Value> = report
        .rows
        .iter()
        .filter_map(|r| match r {
            BatchRow::Failed { phenotype_id, error } => Some(json!({ "phenotype_id": phenotype_id, "error": error })),
            BatchRow::Done(_) => None,
        })
        .collect();
    json!({
        "phenotypes": s.phenotypes,
        "succeeded": s.succeeded,
        "failed": s.failed,
        "branch_counts": {
            "confidence": s.confidence,
            "ordinary": s.ordinary,
            "fallback": s.fallback,
        },
        "total_wall_time": num(s.total_wall_time),
        "errors": errors,
    })
}

pub const METRIC_HEADER: [&str; 9] = [
    "rep",
    "snr",
    "method",
    "fdp",
    "tpp",
    "alpha_hat",
    "n_selected",
    "p1",
    "wall_time",
];

pub fn write_metrics_csv<W: Write>(campaign: &Campaign, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRIC_HEADER).map_err(csv_err)?;
    for r in &campaign.rows {
        w.write_record([
            r.rep.to_string(),
            fmt_sig6(r.snr),
            r.method.to_string(),
            fmt_sig6(r.fdp),
            fmt_sig6(r.tpp),
            fmt_sig6(r.alpha_hat),
            r.n_selected.to_string(),
            r.p1.to_string(),
            fmt_sig6(r.wall_time),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(io_err)
}

fn mean_se(m: &MeanSe) -> Value {
    json!({ "mean": num(m.mean), "se": num(m.se) })
}

pub fn campaign_summary_json(c: &Campaign) -> Value {
    let blocks: Vec<Value> = c
        .summaries
        .iter()
        .map(|s| {
            json!({
                "method": s.method,
                "snr": num(s.snr),
                "reps": s.reps,
                "fdp": mean_se(&s.fdp),
                "alpha_hat": mean_se(&s.alpha_hat),
                "tpp": mean_se(&s.tpp),
                "n_selected": mean_se(&s.n_selected),
                "wall_time": mean_se(&s.wall_time),
                "fdr_within_estimate": s.fdr_within_estimate(),
            })
        })
        .collect();
    json!({
        "rows": c.rows.len(),
        "failures": c.failures,
        "failure_messages": c.failure_messages,
        "summaries": blocks,
    })
}
