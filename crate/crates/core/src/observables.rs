use serde::{Deserialize, Serialize};

use crate::model::Chain;

/// Bound violations larger than this are flagged.
pub const FLAG_TOLERANCE: f64 = 1e-6;
/// Below this total activity R² is undefined.
pub const ACTIVITY_FLOOR: f64 = 1e-12;

/// Observables of one density matrix at one time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableSnapshot {
    pub t: usize,
    pub first_site: i64,
    pub n_profile: Vec<f64>,
    pub n_total: f64,
    pub r2: Option<f64>,
    pub survival: f64,
    pub survival_right: f64,
    pub n_center: f64,
    pub purity: f64,
    pub s_mpo: f64,
    pub i2: f64,
    pub flagged: bool,
}

/// Engine-specific raw quantities from which a snapshot is assembled.
pub struct RawObservables {
    pub n_profile: Vec<f64>,
    pub survival: f64,
    pub survival_right: f64,
    pub purity: f64,
    pub s_mpo: f64,
    pub i2: f64,
}

impl ObservableSnapshot {
    /// Linear observables are multiplied by `reweight`; R², purity and entropies are not.
    pub fn assemble(t: usize, chain: &Chain, raw: RawObservables, reweight: f64) -> Self {
        let n_total_raw: f64 = raw.n_profile.iter().sum();
        let s2: f64 = raw
            .n_profile
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let r = chain.site(i) as f64;
                r * r * n
            })
            .sum();
        let r2 = (n_total_raw.abs() > ACTIVITY_FLOOR).then(|| s2 / n_total_raw);
        let n_center = chain.index(0).map_or(0.0, |i| raw.n_profile[i]);
        let out_of_unit = |x: f64| !(-FLAG_TOLERANCE..=1.0 + FLAG_TOLERANCE).contains(&x);
        let flagged = raw.n_profile.iter().any(|&n| out_of_unit(n))
            || out_of_unit(raw.survival)
            || out_of_unit(raw.survival_right)
            || out_of_unit(raw.purity)
            || !raw.n_profile.iter().all(|x| x.is_finite());
        Self {
            t,
            first_site: chain.first,
            n_profile: raw.n_profile.iter().map(|n| n * reweight).collect(),
            n_total: n_total_raw * reweight,
            r2,
            survival: raw.survival * reweight,
            survival_right: raw.survival_right * reweight,
            n_center: n_center * reweight,
            purity: raw.purity,
            s_mpo: raw.s_mpo,
            i2: raw.i2,
            flagged,
        }
    }

    /// Scalar fields in a fixed order, for tabular output.
    pub fn scalars(&self) -> [(&'static str, Option<f64>); 8] {
        [
            ("N", Some(self.n_total)),
            ("R2", self.r2),
            ("P", Some(self.survival)),
            ("P_right", Some(self.survival_right)),
            ("n_center", Some(self.n_center)),
            ("purity", Some(self.purity)),
            ("S_mpo", Some(self.s_mpo)),
            ("I2", Some(self.i2)),
        ]
    }

    /// Largest absolute difference over every field; infinite if the shapes
    /// or the definedness of R² differ.
    pub fn max_deviation(&self, other: &Self) -> f64 {
        if self.n_profile.len() != other.n_profile.len() || self.first_site != other.first_site {
            return f64::INFINITY;
        }
        let mut d: f64 = 0.0;
        for (a, b) in self.scalars().iter().zip(other.scalars().iter()) {
            match (a.1, b.1) {
                (Some(x), Some(y)) => d = d.max((x - y).abs()),
                (None, None) => {}
                _ => return f64::INFINITY,
            }
        }
        for (x, y) in self.n_profile.iter().zip(&other.n_profile) {
            d = d.max((x - y).abs());
        }
        d
    }
}
