use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analysis::crossing::interpolate_crossing;

/// R_L = ln[τ(L)/τ(L−2)] / ln[L/(L−2)], which equals z for τ = c·L^z.
/// Entries without a positive finite τ at L−2 are skipped with a warning.
pub fn rl_ratio(tau_by_l: &BTreeMap<usize, f64>) -> BTreeMap<usize, f64> {
    let usable = |t: f64| t.is_finite() && t > 0.0;
    let mut out = BTreeMap::new();
    for (&l, &tau) in tau_by_l {
        if l < 3 || !usable(tau) {
            continue;
        }
        match tau_by_l.get(&(l - 2)) {
            Some(&prev) if usable(prev) => {
                out.insert(l, (tau / prev).ln() / (l as f64 / (l - 2) as f64).ln());
            }
            _ => log::warn!("no usable tau at L={} for R_{l}; skipped", l - 2),
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum FiniteSizeOutcome {
    /// R_L and R_{L+2} cross at p_c(L) with common value z(L).
    Crossing { l: usize, p_c: f64, z: f64, p_lo: f64, p_hi: f64 },
    NoCrossing { l: usize },
}

impl FiniteSizeOutcome {
    pub fn l(&self) -> usize {
        match self {
            Self::Crossing { l, .. } | Self::NoCrossing { l } => *l,
        }
    }
}

/// Crossings of R_L and R_{L+2} for every L whose partner is present.
/// `curves` maps L to (p, R_L(p)) samples; points are matched on equal p.
pub fn finite_size_critical(curves: &BTreeMap<usize, Vec<(f64, f64)>>) -> Vec<FiniteSizeOutcome> {
    let mut out = Vec::new();
    for (&l, lower) in curves {
        let Some(upper) = curves.get(&(l + 2)) else { continue };
        let mut rows: Vec<(f64, f64, f64)> = lower
            .iter()
            .filter_map(|&(p, r)| {
                let (_, r2) = upper.iter().find(|(q, _)| *q == p)?;
                Some((p, r, r2 - r))
            })
            .filter(|(_, r, d)| r.is_finite() && d.is_finite())
            .collect();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        out.push(match interpolate_crossing(&rows, None) {
            Some(b) => FiniteSizeOutcome::Crossing {
                l,
                p_c: b.p_c,
                z: b.value,
                p_lo: b.p_lo,
                p_hi: b.p_hi,
            },
            None => FiniteSizeOutcome::NoCrossing { l },
        });
    }
    out
}
