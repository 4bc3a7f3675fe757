//! Post-processing of error-vs-cost curves.

use crate::error::{Error, Result};

/// Intersection of two error-vs-cost curves.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Crossover {
    pub cost: f64,
    pub error: f64,
    /// The curves coincide on the shared range; the first shared point is
    /// reported.
    pub degenerate: bool,
}

fn log_curve(points: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    if points.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "crossover needs >= 4 points per curve, got {}",
            points.len()
        )));
    }
    let mut c: Vec<(f64, f64)> = points
        .iter()
        .map(|&(x, y)| {
            if x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite() {
                Ok((x.ln(), y.ln()))
            } else {
                Err(Error::InvalidArgument(format!("non-positive point ({x}, {y})")))
            }
        })
        .collect::<Result<_>>()?;
    c.sort_by(|a, b| a.0.total_cmp(&b.0));
    if c.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::InvalidArgument("repeated cost value".into()));
    }
    Ok(c)
}

fn interp(c: &[(f64, f64)], x: f64) -> f64 {
    let i = c.partition_point(|p| p.0 <= x).clamp(1, c.len() - 1);
    let (x0, y0) = c[i - 1];
    let (x1, y1) = c[i];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// First crossing of `log(error)` vs `log(cost)` for piecewise-linear
/// interpolants on the shared cost range.
pub fn find_crossover(a: &[(f64, f64)], b: &[(f64, f64)]) -> Result<Option<Crossover>> {
    let ca = log_curve(a)?;
    let cb = log_curve(b)?;
    let lo = ca[0].0.max(cb[0].0);
    let hi = ca[ca.len() - 1].0.min(cb[cb.len() - 1].0);
    if lo > hi {
        return Ok(None);
    }
    let mut xs: Vec<f64> = ca.iter().chain(&cb).map(|p| p.0).filter(|x| *x >= lo && *x <= hi).collect();
    xs.push(lo);
    xs.push(hi);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let diff = |x: f64| interp(&ca, x) - interp(&cb, x);
    let tol = 1e-12;
    if xs.iter().all(|&x| diff(x).abs() <= tol) {
        return Ok(Some(Crossover {
            cost: lo.exp(),
            error: interp(&ca, lo).exp(),
            degenerate: true,
        }));
    }
    for w in xs.windows(2) {
        let (d0, d1) = (diff(w[0]), diff(w[1]));
        if d0.abs() <= tol {
            return Ok(Some(Crossover {
                cost: w[0].exp(),
                error: interp(&ca, w[0]).exp(),
                degenerate: false,
            }));
        }
        if d0 * d1 < 0.0 || d1.abs() <= tol {
            let x = w[0] + (w[1] - w[0]) * d0 / (d0 - d1);
            return Ok(Some(Crossover {
                cost: x.exp(),
                error: interp(&ca, x).exp(),
                degenerate: false,
            }));
        }
    }
    Ok(None)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument("slope needs >= 2 points".into()));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = logs.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("slope needs distinct x values".into()));
    }
    Ok(sxy / sxx)
}

/// Plateau of an error-vs-degree curve: the level from the first degree
/// after which every step of `window` degrees changes the error by less
/// than `rel_tol` (relative). Returns the median error over the plateau.
pub fn detect_floor(points: &[(usize, f64)], window: usize, rel_tol: f64) -> Option<f64> {
    let mut p = points.to_vec();
    p.sort_by_key(|x| x.0);
    let at = |d: usize| p.iter().find(|x| x.0 == d).map(|x| x.1);
    let stable = |i: usize| -> Option<bool> {
        let (d, e) = p[i];
        at(d + window).map(|e2| (e2 - e).abs() <= rel_tol * e)
    };
    let checks: Vec<(usize, bool)> = (0..p.len()).filter_map(|i| stable(i).map(|s| (i, s))).collect();
    if checks.is_empty() {
        return None;
    }
    let start = checks
        .iter()
        .rposition(|(_, s)| !s)
        .map(|pos| pos + 1)
        .unwrap_or(0);
    if start >= checks.len() {
        return None;
    }
    let first = checks[start].0;
    let mut tail: Vec<f64> = p[first..].iter().map(|x| x.1).collect();
    tail.sort_by(f64::total_cmp);
    Some(tail[tail.len() / 2])
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument("spearman needs two equal-length samples of size >= 2".into()));
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return Ok(0.0);
    }
    Ok(cov / (vx * vy).sqrt())
}
