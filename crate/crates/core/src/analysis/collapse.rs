use serde::{Deserialize, Serialize};

use crate::error::{config, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeProfile {
    pub t: usize,
    /// Coordinate of `n[0]`.
    pub first_site: i64,
    pub n: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseRow {
    pub t: usize,
    pub r: i64,
    pub x: f64,
    pub y: f64,
}

/// x = r / t^(1/z), y = n(r,t) · t^(1/z − Θ).
pub fn scaling_collapse(profiles: &[TimeProfile], theta: f64, z: f64) -> Result<Vec<CollapseRow>> {
    if !(z > 0.0) {
        return config("z must be positive");
    }
    let mut rows = Vec::new();
    for prof in profiles {
        if prof.t == 0 {
            return config("scaling collapse needs t >= 1");
        }
        let t = prof.t as f64;
        let (sx, sy) = (t.powf(1.0 / z), t.powf(1.0 / z - theta));
        for (i, n) in prof.n.iter().enumerate() {
            let r = prof.first_site + i as i64;
            rows.push(CollapseRow {
                t: prof.t,
                r,
                x: r as f64 / sx,
                y: n * sy,
            });
        }
    }
    Ok(rows)
}

fn interpolate(curve: &[(f64, f64)], x: f64) -> f64 {
    let k = curve.partition_point(|(cx, _)| *cx < x).clamp(1, curve.len() - 1);
    let ((x0, y0), (x1, y1)) = (curve[k - 1], curve[k]);
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Mean variance across times of the linearly interpolated y(x) on `samples`
/// points of the shared x range, divided by the squared mean of y. `None`
/// with fewer than two times or no overlap.
pub fn collapse_residual(rows: &[CollapseRow], samples: usize) -> Option<f64> {
    let mut ts: Vec<usize> = rows.iter().map(|r| r.t).collect();
    ts.sort_unstable();
    ts.dedup();
    if ts.len() < 2 || samples < 2 {
        return None;
    }
    let curves: Vec<Vec<(f64, f64)>> = ts
        .iter()
        .map(|&t| {
            let mut c: Vec<(f64, f64)> = rows.iter().filter(|r| r.t == t).map(|r| (r.x, r.y)).collect();
            c.sort_by(|a, b| a.0.total_cmp(&b.0));
            c
        })
        .collect();
    if curves.iter().any(|c| c.len() < 2) {
        return None;
    }
    let lo = curves.iter().map(|c| c[0].0).fold(f64::NEG_INFINITY, f64::max);
    let hi = curves.iter().map(|c| c[c.len() - 1].0).fold(f64::INFINITY, f64::min);
    if !(hi > lo) {
        return None;
    }
    let (mut var_sum, mut mean_sum) = (0.0, 0.0);
    for i in 0..samples {
        let x = lo + (hi - lo) * i as f64 / (samples - 1) as f64;
        let ys: Vec<f64> = curves.iter().map(|c| interpolate(c, x)).collect();
        let m = ys.iter().sum::<f64>() / ys.len() as f64;
        var_sum += ys.iter().map(|y| (y - m).powi(2)).sum::<f64>() / ys.len() as f64;
        mean_sum += m;
    }
    let mean = mean_sum / samples as f64;
    Some(var_sum / samples as f64 / (mean * mean).max(f64::MIN_POSITIVE))
}
