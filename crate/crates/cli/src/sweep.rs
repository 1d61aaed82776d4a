//! Parameter sweeps over one or two numeric config fields.

use rayon::prelude::*;
use serde_json::Value;

use crate::config::{ScenarioConfig, SweepAxis};
use crate::error::{CliError, CliResult};
use crate::pipeline::{run, Command};
use crate::report::sci;

pub const COLUMNS: [&str; 4] = ["residual_rel", "min_fidelity", "mean_fidelity", "probability_defect"];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub point: Vec<f64>,
    pub residual_rel: f64,
    /// `None` when the residual is above the ceiling and no recovery was built.
    pub min_fidelity: Option<f64>,
    pub mean_fidelity: Option<f64>,
    pub probability_defect: Option<f64>,
}

fn axes(cfg: &ScenarioConfig) -> CliResult<&[SweepAxis]> {
    let spec = cfg
        .outputs
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("sweep needs outputs.sweep".into()))?;
    match spec.axes.len() {
        0 => Err(CliError::Config("sweep axis list is empty".into())),
        1 | 2 => {
            if let Some(a) = spec.axes.iter().find(|a| a.values.is_empty()) {
                return Err(CliError::Config(format!("sweep axis {} has no values", a.path)));
            }
            Ok(&spec.axes)
        }
        n => Err(CliError::Config(format!("at most two sweep axes are supported, got {n}"))),
    }
}

/// Grid points in lexicographic order: the first axis varies slowest.
pub fn grid(axes: &[SweepAxis]) -> Vec<Vec<f64>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.into_iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |&x| {
                    let mut p = prefix.clone();
                    p.push(x);
                    p
                })
            })
            .collect()
    })
}

/// Overwrite the number at a dotted path. Integer fields only accept integral values.
pub fn set_path(root: &mut Value, path: &str, x: f64) -> CliResult<()> {
    let missing = || CliError::Config(format!("sweep path {path} does not name a config field"));
    let mut node = root;
    for seg in path.split('.') {
        node = match node {
            Value::Object(map) => map.get_mut(seg).ok_or_else(missing)?,
            Value::Array(items) => seg.parse::<usize>().ok().and_then(|k| items.get_mut(k)).ok_or_else(missing)?,
            _ => return Err(missing()),
        };
    }
    let Value::Number(old) = node else {
        return Err(CliError::Config(format!("sweep path {path} is not numeric")));
    };
    *node = if old.is_f64() {
        serde_json::Number::from_f64(x)
            .map(Value::Number)
            .ok_or_else(|| CliError::Config(format!("sweep value {x} is not finite")))?
    } else if x >= 0.0 && x.fract() == 0.0 && x <= u64::MAX as f64 {
        Value::from(x as u64)
    } else {
        return Err(CliError::Config(format!("sweep path {path} takes non-negative integers, got {x}")));
    };
    Ok(())
}

fn point_config(base: &Value, axes: &[SweepAxis], point: &[f64]) -> CliResult<ScenarioConfig> {
    let mut value = base.clone();
    for (axis, &x) in axes.iter().zip(point) {
        set_path(&mut value, &axis.path, x)?;
    }
    ScenarioConfig::from_value(value)
}

pub fn run_sweep(cfg: &ScenarioConfig, jobs: Option<usize>) -> CliResult<Vec<SweepRow>> {
    let axes = axes(cfg)?;
    let base = serde_json::to_value(cfg).map_err(|e| CliError::Config(e.to_string()))?;
    let points = grid(axes);
    // configs are resolved up front so that a bad path fails before any solve
    let configs = points
        .iter()
        .map(|p| point_config(&base, axes, p))
        .collect::<CliResult<Vec<_>>>()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder.build().map_err(|e| CliError::Config(format!("cannot start {jobs:?} workers: {e}")))?;
    let results: Vec<CliResult<SweepRow>> = pool.install(|| {
        configs
            .par_iter()
            .zip(points.par_iter())
            .map(|(c, p)| {
                let out = run(c, Command::Recover)?;
                let rec = out.report.recovery.as_ref();
                Ok(SweepRow {
                    point: p.clone(),
                    residual_rel: out.report.criterion.residual_rel,
                    min_fidelity: rec.map(|r| r.min_fidelity),
                    mean_fidelity: rec.map(|r| r.mean_fidelity),
                    probability_defect: rec.map(|r| r.probability_defect),
                })
            })
            .collect()
    });
    results.into_iter().collect()
}

/// RFC 4180 CSV with LF line endings; empty cells for missing values.
pub fn to_csv(axes: &[SweepAxis], rows: &[SweepRow]) -> CliResult<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let header: Vec<String> = axes.iter().map(SweepAxis::column).chain(COLUMNS.iter().map(|s| s.to_string())).collect();
    let csv_err = |e: csv::Error| CliError::Config(format!("csv: {e}"));
    w.write_record(&header).map_err(csv_err)?;
    let opt = |x: Option<f64>| x.map(sci).unwrap_or_default();
    for r in rows {
        let record: Vec<String> = r
            .point
            .iter()
            .map(|&x| sci(x))
            .chain([sci(r.residual_rel), opt(r.min_fidelity), opt(r.mean_fidelity), opt(r.probability_defect)])
            .collect();
        w.write_record(&record).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Config(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv cells are ASCII"))
}

pub fn sweep_csv(cfg: &ScenarioConfig, jobs: Option<usize>) -> CliResult<String> {
    let rows = run_sweep(cfg, jobs)?;
    to_csv(axes(cfg)?, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn axis(path: &str, values: &[f64]) -> SweepAxis {
        SweepAxis { path: path.into(), values: values.to_vec(), name: None }
    }

    #[test]
    fn grid_is_lexicographic() {
        let g = grid(&[axis("a", &[1.0, 2.0]), axis("b", &[10.0, 20.0, 30.0])]);
        assert_eq!(g.len(), 6);
        assert_eq!(g[0], vec![1.0, 10.0]);
        assert_eq!(g[2], vec![1.0, 30.0]);
        assert_eq!(g[3], vec![2.0, 10.0]);
    }

    #[test]
    fn set_path_walks_objects_and_arrays() {
        let mut v = json!({"a": {"b": [1.5, 2.5]}, "n": 3});
        set_path(&mut v, "a.b.1", 7.25).unwrap();
        assert_eq!(v["a"]["b"][1], json!(7.25));
        set_path(&mut v, "n", 5.0).unwrap();
        assert_eq!(v["n"], json!(5));
        assert!(set_path(&mut v, "n", 5.5).is_err());
        assert!(set_path(&mut v, "a.c", 1.0).is_err());
        assert!(set_path(&mut v, "a.b.9", 1.0).is_err());
        assert!(set_path(&mut v, "a", 1.0).is_err());
    }

    #[test]
    fn csv_uses_lf_and_blank_cells() {
        let rows = vec![SweepRow {
            point: vec![2.0],
            residual_rel: 0.5,
            min_fidelity: None,
            mean_fidelity: Some(1.0),
            probability_defect: None,
        }];
        let text = to_csv(&[axis("x.alpha", &[2.0])], &rows).unwrap();
        assert_eq!(
            text,
            "alpha,residual_rel,min_fidelity,mean_fidelity,probability_defect\n\
             2.0000000000000000e0,5.0000000000000000e-1,,1.0000000000000000e0,\n"
        );
    }
}
