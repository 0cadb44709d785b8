//! Evaluation reports as JSON and as a plain-text table.
//!
//! JSON keys: `overall.{pearson,mae,n}`, `per_corpus.<name>.{pearson,mae,n}`
//! and `worst[k].{id,corpus,target,predicted,gold,residual}`. An undefined
//! correlation is `null`.

use std::fmt::Write as _;

use lcp_core::metrics::{EvalReport, SliceMetrics, REFERENCE_MAE, REFERENCE_PEARSON};
use serde_json::{json, Map, Value};

use crate::error::{LcpError, Result};

fn slice_json(s: &SliceMetrics) -> Value {
    json!({ "pearson": s.pearson, "mae": s.mae, "n": s.n })
}

pub fn report_json(report: &EvalReport, config_hash: &str, seed: u64) -> Value {
    let per_corpus: Map<String, Value> = report.per_corpus.iter().map(|(k, s)| (k.clone(), slice_json(s))).collect();
    let worst: Vec<Value> = report
        .worst
        .iter()
        .map(|w| {
            json!({
                "id": w.id,
                "corpus": w.corpus.as_str(),
                "target": w.target,
                "predicted": w.predicted,
                "gold": w.gold,
                "residual": w.residual,
            })
        })
        .collect();
    json!({
        "config_hash": config_hash,
        "seed": seed,
        "overall": slice_json(&report.overall),
        "per_corpus": per_corpus,
        "worst": worst,
        "reference": { "pearson": REFERENCE_PEARSON, "mae": REFERENCE_MAE },
    })
}

fn num(v: &Value) -> String {
    v.as_f64().map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

fn field<'a>(v: &'a Value, key: &str) -> Result<&'a Value> {
    v.get(key).ok_or_else(|| LcpError::Data(format!("report has no `{key}` field")))
}

/// Renders a report previously produced by [`report_json`].
pub fn render_table(report: &Value) -> Result<String> {
    let mut out = String::new();
    let _ = writeln!(out, "{:<12} {:>8} {:>8} {:>6}", "slice", "pearson", "mae", "n");
    let mut row = |name: &str, s: &Value| -> Result<()> {
        let _ = writeln!(out, "{:<12} {:>8} {:>8} {:>6}", name, num(field(s, "pearson")?), num(field(s, "mae")?), field(s, "n")?);
        Ok(())
    };
    row("overall", field(report, "overall")?)?;
    if let Some(slices) = field(report, "per_corpus")?.as_object() {
        for (name, s) in slices {
            row(name, s)?;
        }
    }
    if let Some(r) = report.get("reference") {
        let _ = writeln!(out, "{:<12} {:>8} {:>8}", "reference", num(field(r, "pearson")?), num(field(r, "mae")?));
    }
    let worst = field(report, "worst")?.as_array().cloned().unwrap_or_default();
    if !worst.is_empty() {
        let _ = writeln!(out, "\nlargest residuals:");
        let _ = writeln!(out, "{:<16} {:<10} {:>9} {:>9} {:>9}  target", "id", "corpus", "predicted", "gold", "residual");
        for w in &worst {
            let s = |k: &str| w.get(k).and_then(Value::as_str).unwrap_or("").to_string();
            let _ = writeln!(
                out,
                "{:<16} {:<10} {:>9} {:>9} {:>9}  {}",
                s("id"),
                s("corpus"),
                num(field(w, "predicted")?),
                num(field(w, "gold")?),
                num(field(w, "residual")?),
                s("target")
            );
        }
    }
    Ok(out)
}

fn delta(a: &SliceMetrics, b: &SliceMetrics) -> Value {
    json!({
        "pearson": a.pearson.zip(b.pearson).map(|(x, y)| y - x),
        "mae": b.mae - a.mae,
    })
}

/// Paired comparison of two reports over the same gold entries. Deltas are
/// `b - a`; `b_closer` counts entries where `b` has the smaller residual.
pub fn compare_json(a: &EvalReport, b: &EvalReport, b_closer: usize, ties: usize, config_hash: &str, seed: u64) -> Value {
    let per_corpus: Map<String, Value> = a
        .per_corpus
        .iter()
        .filter_map(|(k, sa)| b.per_corpus.get(k).map(|sb| (k.clone(), delta(sa, sb))))
        .collect();
    json!({
        "config_hash": config_hash,
        "seed": seed,
        "a": report_json(a, config_hash, seed),
        "b": report_json(b, config_hash, seed),
        "delta": { "overall": delta(&a.overall, &b.overall), "per_corpus": per_corpus },
        "paired": { "n": a.overall.n, "b_closer": b_closer, "ties": ties },
    })
}

pub fn render_compare(cmp: &Value) -> Result<String> {
    let mut out = String::new();
    let a = field(cmp, "a")?;
    let b = field(cmp, "b")?;
    let d = field(cmp, "delta")?;
    let _ = writeln!(out, "{:<12} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}", "slice", "pearson.a", "pearson.b", "delta", "mae.a", "mae.b", "delta");
    let mut row = |name: &str, sa: &Value, sb: &Value, sd: &Value| -> Result<()> {
        let _ = writeln!(
            out,
            "{:<12} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}",
            name,
            num(field(sa, "pearson")?),
            num(field(sb, "pearson")?),
            num(field(sd, "pearson")?),
            num(field(sa, "mae")?),
            num(field(sb, "mae")?),
            num(field(sd, "mae")?)
        );
        Ok(())
    };
    row("overall", field(a, "overall")?, field(b, "overall")?, field(d, "overall")?)?;
    if let Some(slices) = field(d, "per_corpus")?.as_object() {
        for (name, sd) in slices {
            row(name, &field(a, "per_corpus")?[name], &field(b, "per_corpus")?[name], sd)?;
        }
    }
    let p = field(cmp, "paired")?;
    let _ = writeln!(out, "\nb closer to gold on {} of {} entries ({} ties)", p["b_closer"], p["n"], p["ties"]);
    Ok(out)
}
