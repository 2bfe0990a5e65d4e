use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::series::ObservableSeries;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentPoint {
    pub t: usize,
    pub value: f64,
    pub stderr: f64,
}

/// δ_O(t) = ln[O(t+dt)/O(t)] / ln[(t+dt)/t].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveExponentCurve {
    pub dt: usize,
    pub points: Vec<ExponentPoint>,
    /// Times skipped because O(t) or O(t+dt) was missing or not positive.
    pub skipped: Vec<usize>,
}

impl EffectiveExponentCurve {
    pub fn at(&self, t: usize) -> Option<&ExponentPoint> {
        self.points
            .binary_search_by_key(&t, |p| p.t)
            .ok()
            .map(|i| &self.points[i])
    }
}

pub fn effective_exponent(series: &ObservableSeries, dt: usize) -> Result<EffectiveExponentCurve> {
    if dt == 0 {
        return config("dt must be at least 1");
    }
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for a in &series.points {
        if a.t == 0 {
            continue;
        }
        let Some(b) = series.get(a.t + dt) else {
            continue;
        };
        match (a.value, b.value) {
            (Some(o1), Some(o2)) if o1 > 0.0 && o2 > 0.0 => {
                let log_t = ((a.t + dt) as f64 / a.t as f64).ln();
                let rel = ((a.stderr / o1).powi(2) + (b.stderr / o2).powi(2)).sqrt();
                points.push(ExponentPoint {
                    t: a.t,
                    value: (o2 / o1).ln() / log_t,
                    stderr: rel / log_t,
                });
            }
            _ => skipped.push(a.t),
        }
    }
    Ok(EffectiveExponentCurve {
        dt,
        points,
        skipped,
    })
}
