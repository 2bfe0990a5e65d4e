use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};

/// Consecutive phases closer than this are treated as degenerate.
pub const DEGENERATE_GAP: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub mean_ratio: f64,
    pub ratios_used: usize,
    pub ratios_skipped: usize,
}

/// Mean of min(s_j, s_{j+1}) / max(s_j, s_{j+1}) over the phases mapped to
/// [0, 2π) and sorted; the wrap-around gap is not used.
pub fn level_spacing_ratio(phases: &[f64]) -> Result<LevelStats> {
    if phases.len() < 3 {
        return config("level spacing ratio needs at least three phases");
    }
    let mut sorted: Vec<f64> = phases.iter().map(|x| x.rem_euclid(TAU)).collect();
    sorted.sort_by(f64::total_cmp);
    let gaps: Vec<f64> = sorted.windows(2).map(|w| w[1] - w[0]).collect();
    let (mut sum, mut used, mut skipped) = (0.0, 0, 0);
    for g in gaps.windows(2) {
        if g[0] < DEGENERATE_GAP || g[1] < DEGENERATE_GAP {
            skipped += 1;
            continue;
        }
        sum += g[0].min(g[1]) / g[0].max(g[1]);
        used += 1;
    }
    if used == 0 {
        return config("all level spacings are degenerate");
    }
    Ok(LevelStats {
        mean_ratio: sum / used as f64,
        ratios_used: used,
        ratios_skipped: skipped,
    })
}
