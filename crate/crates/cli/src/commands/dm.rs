//! Diebold-Mariano comparison of two backtest error files.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use clap::Args as ClapArgs;

use powercast::backtest::ErrorTensor;
use powercast::error::{Error, Result};
use powercast::ModelKind;

use crate::config::RunContext;
use crate::output;

#[derive(Debug, ClapArgs)]
pub struct Args {
    /// errors.csv of model A.
    errors_a: PathBuf,
    /// errors.csv of model B.
    errors_b: PathBuf,
    /// Model name to select from the first file (needed when it holds
    /// several).
    #[arg(long)]
    model_a: Option<ModelKind>,
    #[arg(long)]
    model_b: Option<ModelKind>,
}

type CellKey = (usize, usize, usize); // window, horizon_day, hour

struct ErrorFile {
    models: BTreeMap<ModelKind, BTreeMap<CellKey, f64>>,
}

fn parse_errors(path: &Path) -> Result<ErrorFile> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::schema(path, 1, e.to_string()))?;
    {
        let headers = reader.headers().map_err(|e| Error::schema(path, 1, e.to_string()))?;
        let got: Vec<&str> = headers.iter().collect();
        if got != ["model", "window", "origin", "horizon_day", "hour", "error"] {
            return Err(Error::schema(path, 1, format!("unexpected header {got:?}")));
        }
    }
    let mut models: BTreeMap<ModelKind, BTreeMap<CellKey, f64>> = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::schema(path, line, e.to_string()))?;
        let model: ModelKind = record[0]
            .parse()
            .map_err(|e| Error::schema(path, line, e))?;
        let window: usize = record[1]
            .parse()
            .map_err(|e| Error::schema(path, line, format!("bad window: {e}")))?;
        let horizon_day: usize = record[3]
            .parse()
            .map_err(|e| Error::schema(path, line, format!("bad horizon_day: {e}")))?;
        let hour: usize = record[4]
            .parse()
            .map_err(|e| Error::schema(path, line, format!("bad hour: {e}")))?;
        let error: f64 = record[5]
            .parse()
            .map_err(|e| Error::schema(path, line, format!("bad error: {e}")))?;
        models
            .entry(model)
            .or_default()
            .insert((window, horizon_day, hour), error);
    }
    Ok(ErrorFile { models })
}

fn select_model(file: &ErrorFile, wanted: Option<ModelKind>, path: &Path) -> Result<ModelKind> {
    match wanted {
        Some(kind) => {
            if file.models.contains_key(&kind) {
                Ok(kind)
            } else {
                Err(Error::domain(format!(
                    "{} does not contain model {kind}",
                    path.display()
                )))
            }
        }
        None => {
            if file.models.len() == 1 {
                Ok(*file.models.keys().next().expect("non-empty"))
            } else {
                Err(Error::domain(format!(
                    "{} holds {} models; pass --model-a/--model-b",
                    path.display(),
                    file.models.len()
                )))
            }
        }
    }
}

fn to_tensor(cells: &BTreeMap<CellKey, f64>) -> Result<(ErrorTensor, Vec<usize>)> {
    if cells.is_empty() {
        return Err(Error::domain("error file holds no rows for the model"));
    }
    let windows: Vec<usize> = cells
        .keys()
        .map(|(w, _, _)| *w)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let horizon = cells.keys().map(|(_, c, _)| *c).max().expect("non-empty");
    let mut tensor = ErrorTensor::new(horizon, windows.len());
    for (&(w, c, h), &v) in cells {
        let w_idx = windows.binary_search(&w).expect("window listed");
        tensor.set(c - 1, h - 1, w_idx, v);
    }
    Ok((tensor, windows))
}

pub fn run(ctx: &RunContext, args: Args) -> Result<()> {
    let file_a = parse_errors(&args.errors_a)?;
    let file_b = parse_errors(&args.errors_b)?;
    let model_a = select_model(&file_a, args.model_a, &args.errors_a)?;
    let model_b = select_model(&file_b, args.model_b, &args.errors_b)?;
    let cells_a = &file_a.models[&model_a];
    let cells_b = &file_b.models[&model_b];

    // The files must describe the same forecasting exercise.
    if let Some(diverging) = cells_a
        .keys()
        .find(|k| !cells_b.contains_key(k))
        .or_else(|| cells_b.keys().find(|k| !cells_a.contains_key(k)))
    {
        return Err(Error::domain(format!(
            "key mismatch between error files: first divergence at (window {}, horizon_day {}, hour {})",
            diverging.0, diverging.1, diverging.2
        )));
    }

    let (tensor_a, _) = to_tensor(cells_a)?;
    let (tensor_b, _) = to_tensor(cells_b)?;
    let rows = output::dm_rows(&tensor_a, &tensor_b)?;
    let out = ctx.ensure_out_dir()?;
    let path = out.join("dm.csv");
    output::write_text(&path, &output::dm_csv(model_a, model_b, &rows))?;
    println!("dm: {} rows ({model_a} vs {model_b}) -> {}", rows.len(), path.display());
    Ok(())
}
