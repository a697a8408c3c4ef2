//! File emission helpers. Every float is printed with 17 significant
//! digits so reruns are byte-identical and values round-trip exactly.

use std::fmt::Write as _;
use std::path::Path;

use powercast::backtest::{BacktestResult, DmResult, ErrorTensor};
use powercast::error::{Error, Result};
use powercast::market::fmt_f64;
use powercast::{ModelKind, QuantileFan};

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// `model,window,origin,horizon_day,hour,error`; skipped windows emit no rows.
pub fn errors_csv(result: &BacktestResult) -> String {
    let mut out = String::from("model,window,origin,horizon_day,hour,error\n");
    for (kind, tensor) in &result.tensors {
        for (w_idx, window) in result.windows.iter().enumerate() {
            for c in 0..tensor.horizon_days {
                for h in 0..24 {
                    let v = tensor.get(c, h, w_idx);
                    if v.is_nan() {
                        continue;
                    }
                    writeln!(
                        out,
                        "{},{},{},{},{},{}",
                        kind,
                        window.index,
                        window.origin,
                        c + 1,
                        h + 1,
                        fmt_f64(v)
                    )
                    .expect("write to string");
                }
            }
        }
    }
    out
}

/// Per-model MAE grid and MMAE curve as JSON.
pub fn metrics_json(result: &BacktestResult) -> serde_json::Value {
    let mut models = serde_json::Map::new();
    for (kind, tensor) in &result.tensors {
        let grid = powercast::backtest::mae_ch(tensor);
        let flat = powercast::backtest::mae_k(tensor);
        let mmae_curve: Vec<f64> = (1..=flat.len())
            .map(|k| powercast::backtest::mmae(tensor, k).expect("k in range"))
            .collect();
        let mae_rows: Vec<Vec<f64>> = grid.iter().map(|row| row.to_vec()).collect();
        models.insert(
            kind.to_string(),
            serde_json::json!({
                "mae_ch": mae_rows,
                "mmae": mmae_curve,
                "mmae_final": mmae_curve.last(),
                "nan_cells": tensor.nan_count(),
            }),
        );
    }
    serde_json::json!({
        "num_windows": result.windows.len(),
        "skipped_windows": result.skipped.iter().map(|(i, m)| serde_json::json!({"window": i, "reason": m})).collect::<Vec<_>>(),
        "models": models,
    })
}

/// `modelA,modelB,horizon_day,dm,p_two_sided,p_one_sided,degenerate`.
pub fn dm_csv(model_a: ModelKind, model_b: ModelKind, rows: &[DmResult]) -> String {
    let mut out = String::from("modelA,modelB,horizon_day,dm,p_two_sided,p_one_sided,degenerate\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            model_a,
            model_b,
            r.horizon_day,
            fmt_f64(r.dm.unwrap_or(f64::NAN)),
            fmt_f64(r.p_two_sided),
            fmt_f64(r.p_one_sided),
            r.degenerate
        )
        .expect("write to string");
    }
    out
}

pub fn dm_rows(a: &ErrorTensor, b: &ErrorTensor) -> Result<Vec<DmResult>> {
    let horizon = a.horizon_days.min(b.horizon_days);
    (1..=horizon)
        .map(|c| powercast::backtest::dm_test(a, b, c))
        .collect()
}

/// `date,hour,level,value` for every cell of the fan.
pub fn quantiles_csv(origin: chrono::NaiveDate, fan: &QuantileFan) -> String {
    let mut out = String::from("date,hour,level,value\n");
    for day in 0..fan.horizon_days {
        let date = origin + chrono::Days::new(day as u64 + 1);
        for hour in 0..24 {
            for (li, level) in fan.levels.iter().enumerate() {
                writeln!(
                    out,
                    "{},{},{},{}",
                    date,
                    hour + 1,
                    fmt_f64(*level),
                    fmt_f64(fan.get(li, day, hour))
                )
                .expect("write to string");
            }
        }
    }
    out
}

/// `model,hour,column,chances,included,frequency` aggregated over windows.
pub fn inclusion_csv(result: &BacktestResult) -> String {
    let mut out = String::from("model,hour,column,chances,included,frequency\n");
    for (kind, stats) in &result.inclusion {
        let p = stats.columns.len();
        for h in 0..24 {
            for (j, col) in stats.columns.iter().enumerate() {
                let chances = stats.chances[h * p + j];
                let included = stats.included[h * p + j];
                if chances == 0 {
                    continue;
                }
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    kind,
                    h + 1,
                    col.name,
                    chances,
                    included,
                    fmt_f64(included as f64 / chances as f64)
                )
                .expect("write to string");
            }
        }
    }
    out
}
