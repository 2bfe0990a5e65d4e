use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::stats::Moments;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub t: usize,
    /// `None` where the observable is undefined (R² with no activity).
    pub value: Option<f64>,
    pub stderr: f64,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub name: String,
    pub points: Vec<SeriesPoint>,
    pub provenance: String,
}

impl ObservableSeries {
    pub fn new(
        name: impl Into<String>,
        provenance: impl Into<String>,
        points: Vec<SeriesPoint>,
    ) -> Result<Self> {
        if points.windows(2).any(|w| w[1].t <= w[0].t) {
            return config("series times must be strictly increasing");
        }
        if points.iter().any(|p| !(p.stderr >= 0.0)) {
            return config("series standard errors must be non-negative");
        }
        Ok(Self {
            name: name.into(),
            points,
            provenance: provenance.into(),
        })
    }

    /// Exact values with zero error, e.g. from a deterministic engine.
    pub fn exact(
        name: impl Into<String>,
        provenance: impl Into<String>,
        values: impl IntoIterator<Item = (usize, Option<f64>)>,
    ) -> Result<Self> {
        let points = values
            .into_iter()
            .map(|(t, value)| SeriesPoint {
                t,
                value,
                stderr: 0.0,
                count: 1,
            })
            .collect();
        Self::new(name, provenance, points)
    }

    pub fn get(&self, t: usize) -> Option<&SeriesPoint> {
        self.points
            .binary_search_by_key(&t, |p| p.t)
            .ok()
            .map(|i| &self.points[i])
    }

    pub fn value(&self, t: usize) -> Option<f64> {
        self.get(t).and_then(|p| p.value)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Index of each per-sample observable in the moment vectors.
pub mod sample_obs {
    pub const N: usize = 0;
    pub const S2: usize = 1;
    pub const P: usize = 2;
    pub const N0: usize = 3;
    pub const P_RIGHT: usize = 4;
    pub const COUNT: usize = 5;
}

/// Observable series produced by a sampling engine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledRun {
    pub n: ObservableSeries,
    pub r2: ObservableSeries,
    pub survival: ObservableSeries,
    pub n_center: ObservableSeries,
    pub survival_right: ObservableSeries,
}

impl SampledRun {
    pub fn all(&self) -> [&ObservableSeries; 5] {
        [
            &self.n,
            &self.r2,
            &self.survival,
            &self.n_center,
            &self.survival_right,
        ]
    }

    /// Assemble series from per-time moments; linear observables are scaled
    /// by `reweight`, R² is a ratio and is not.
    pub fn from_moments(
        moments: &[Moments<{ sample_obs::COUNT }>],
        reweight: f64,
        provenance: &str,
    ) -> Result<Self> {
        use sample_obs::*;
        let linear = |name: &str, k: usize| {
            let points = moments
                .iter()
                .enumerate()
                .map(|(t, m)| SeriesPoint {
                    t,
                    value: Some(reweight * m.mean[k]),
                    stderr: reweight * m.stderr(k),
                    count: m.count,
                })
                .collect();
            ObservableSeries::new(name, provenance, points)
        };
        let r2_points = moments
            .iter()
            .enumerate()
            .map(|(t, m)| {
                let (mn, ms) = (m.mean[N], m.mean[S2]);
                if m.count == 0 || mn <= 1e-300 {
                    return SeriesPoint {
                        t,
                        value: None,
                        stderr: 0.0,
                        count: m.count,
                    };
                }
                let ratio = ms / mn;
                let var = (m.variance(S2) - 2.0 * ratio * m.covariance(S2, N)
                    + ratio * ratio * m.variance(N))
                    / (mn * mn * m.count as f64);
                SeriesPoint {
                    t,
                    value: Some(ratio),
                    stderr: var.max(0.0).sqrt(),
                    count: m.count,
                }
            })
            .collect();
        Ok(Self {
            n: linear("N", N)?,
            r2: ObservableSeries::new("R2", provenance, r2_points)?,
            survival: linear("P", P)?,
            n_center: linear("n0", N0)?,
            survival_right: linear("P_right", P_RIGHT)?,
        })
    }
}
