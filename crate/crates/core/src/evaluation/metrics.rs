use std::collections::BTreeMap;

use crate::error::{Error, Result};

fn check_lengths(a: &[f64], b: &[f64], w: Option<&[f64]>) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Arity {
            expected: a.len(),
            got: b.len(),
        });
    }
    if let Some(w) = w {
        if w.len() != a.len() {
            return Err(Error::Arity {
                expected: a.len(),
                got: w.len(),
            });
        }
        if w.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::invalid("weights must be nonnegative"));
        }
    }
    if a.len() < 2 {
        return Err(Error::TooFewRows {
            context: "R²".into(),
            needed: 2,
            got: a.len(),
        });
    }
    Ok(())
}

/// Weighted (co)variance sums of two series about their means.
struct Moments2 {
    var_a: f64,
    var_b: f64,
    cov: f64,
}

fn moments(a: &[f64], b: &[f64], w: Option<&[f64]>) -> Moments2 {
    let weight = |i: usize| w.map_or(1.0, |w| w[i]);
    let total: f64 = (0..a.len()).map(weight).sum();
    let mean_a = (0..a.len()).map(|i| weight(i) * a[i]).sum::<f64>() / total;
    let mean_b = (0..a.len()).map(|i| weight(i) * b[i]).sum::<f64>() / total;
    let (mut var_a, mut var_b, mut cov) = (0.0, 0.0, 0.0);
    for i in 0..a.len() {
        let (da, db) = (a[i] - mean_a, b[i] - mean_b);
        var_a += weight(i) * da * da;
        var_b += weight(i) * db * db;
        cov += weight(i) * da * db;
    }
    Moments2 {
        var_a,
        var_b,
        cov,
    }
}

/// Relative size below which a variance counts as zero.
const VARIANCE_FLOOR: f64 = 1e-24;

fn is_degenerate(var: f64, values: &[f64]) -> bool {
    let scale = values.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    var <= VARIANCE_FLOOR * scale
}

/// Coefficient of determination of the (weighted) least-squares line of
/// `y_true` on `y_pred`: the squared (weighted) Pearson correlation.
pub fn r_squared(y_true: &[f64], y_pred: &[f64], weights: Option<&[f64]>) -> Result<f64> {
    check_lengths(y_true, y_pred, weights)?;
    let m = moments(y_true, y_pred, weights);
    if is_degenerate(m.var_a, y_true) {
        return Err(Error::UndefinedMetric("observed values have zero variance".into()));
    }
    if is_degenerate(m.var_b, y_pred) {
        return Err(Error::UndefinedMetric("predictions have zero variance".into()));
    }
    Ok((m.cov * m.cov / (m.var_a * m.var_b)).min(1.0))
}

/// `1 - SSE/SST`, the fit-quality variant that is not affine invariant.
pub fn r_squared_sse(y_true: &[f64], y_pred: &[f64], weights: Option<&[f64]>) -> Result<f64> {
    check_lengths(y_true, y_pred, weights)?;
    let m = moments(y_true, y_pred, weights);
    if is_degenerate(m.var_a, y_true) {
        return Err(Error::UndefinedMetric("observed values have zero variance".into()));
    }
    let sse: f64 = (0..y_true.len())
        .map(|i| weights.map_or(1.0, |w| w[i]) * (y_true[i] - y_pred[i]).powi(2))
        .sum();
    Ok(1.0 - sse / m.var_a)
}

pub fn mean_squared_error(y_true: &[f64], y_pred: &[f64]) -> f64 {
    let n = y_true.len().max(1) as f64;
    y_true
        .iter()
        .zip(y_pred)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n
}

/// Spearman rank correlation (Pearson on mid-ranks).
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    let ra = crate::awe::mid_rank_quantiles(a);
    let rb = crate::awe::mid_rank_quantiles(b);
    check_lengths(&ra, &rb, None)?;
    let m = moments(&ra, &rb, None);
    if m.var_a <= 0.0 || m.var_b <= 0.0 {
        return Err(Error::UndefinedMetric("constant ranks".into()));
    }
    Ok(m.cov / (m.var_a * m.var_b).sqrt())
}

/// R² within each group and over all rows together.
#[derive(Debug)]
pub struct SubsetR2 {
    pub groups: BTreeMap<String, Result<f64>>,
    pub pooled: Result<f64>,
}

pub fn subset_r_squared(y_true: &[f64], y_pred: &[f64], groups: &[String]) -> Result<SubsetR2> {
    check_lengths(y_true, y_pred, None)?;
    if groups.len() != y_true.len() {
        return Err(Error::Arity {
            expected: y_true.len(),
            got: groups.len(),
        });
    }
    let mut members: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, g) in groups.iter().enumerate() {
        members.entry(g.clone()).or_default().push(i);
    }
    let groups = members
        .into_iter()
        .map(|(g, idx)| {
            let t: Vec<f64> = idx.iter().map(|&i| y_true[i]).collect();
            let p: Vec<f64> = idx.iter().map(|&i| y_pred[i]).collect();
            let r2 = r_squared(&t, &p, None);
            if let Err(e) = &r2 {
                log::warn!("group {g}: {e}");
            }
            (g, r2)
        })
        .collect();
    Ok(SubsetR2 {
        groups,
        pooled: r_squared(y_true, y_pred, None),
    })
}
