use serde::{Deserialize, Serialize};

use super::exponent::EffectiveExponentCurve;
use crate::error::{config, Result};

/// Largest p spacing trusted around a quantum-point crossing.
pub const QUANTUM_MAX_BRACKET: f64 = 2e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingPoint {
    pub t: usize,
    pub p_c: f64,
    pub delta: f64,
    pub p_lo: f64,
    pub p_hi: f64,
    /// Set when p_hi − p_lo exceeds the configured maximum.
    pub wide_bracket: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum CrossingOutcome {
    Crossing(CrossingPoint),
    NoCrossing { t: usize },
}

impl CrossingOutcome {
    pub fn point(&self) -> Option<&CrossingPoint> {
        match self {
            Self::Crossing(c) => Some(c),
            Self::NoCrossing { .. } => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrossingOptions {
    pub max_bracket: f64,
    /// Crossing found at the previous time; picks among several brackets.
    pub previous: Option<f64>,
}

impl Default for CrossingOptions {
    fn default() -> Self {
        Self {
            max_bracket: f64::INFINITY,
            previous: None,
        }
    }
}

/// Locate p where δ(t+τ; p) = δ(t; p) by linear interpolation on the p-grid.
/// `curves` must be sorted by p; grid points lacking either time are ignored.
pub fn find_crossings(
    curves: &[(f64, EffectiveExponentCurve)],
    t: usize,
    tau: usize,
    opts: CrossingOptions,
) -> Result<CrossingOutcome> {
    if tau == 0 {
        return config("tau must be at least 1");
    }
    if curves.windows(2).any(|w| w[1].0 <= w[0].0) {
        return config("p-grid must be strictly increasing");
    }
    // (p, δ(t), δ(t+τ) − δ(t))
    let rows: Vec<(f64, f64, f64)> = curves
        .iter()
        .filter_map(|(p, c)| {
            let a = c.at(t)?.value;
            let b = c.at(t + tau)?.value;
            Some((*p, a, b - a))
        })
        .collect();
    Ok(match interpolate_crossing(&rows, opts.previous) {
        Some(b) => CrossingOutcome::Crossing(CrossingPoint {
            t,
            p_c: b.p_c,
            delta: b.value,
            p_lo: b.p_lo,
            p_hi: b.p_hi,
            wide_bracket: b.p_hi - b.p_lo > opts.max_bracket,
        }),
        None => CrossingOutcome::NoCrossing { t },
    })
}

/// A zero of a sampled difference, linearly interpolated inside one grid bracket.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Bracketed {
    pub p_c: f64,
    pub value: f64,
    pub p_lo: f64,
    pub p_hi: f64,
}

/// Rows are (p, a(p), d(p)) sorted by p; returns where d changes sign, with a
/// interpolated there. Several brackets: closest to `previous` if given, else
/// the one minimizing |d_lo| + |d_hi|.
pub(crate) fn interpolate_crossing(rows: &[(f64, f64, f64)], previous: Option<f64>) -> Option<Bracketed> {
    let mut best: Option<(f64, Bracketed)> = None;
    for w in rows.windows(2) {
        let ((p_lo, a_lo, d_lo), (p_hi, a_hi, d_hi)) = (w[0], w[1]);
        if d_lo * d_hi > 0.0 || (d_lo == 0.0 && d_hi == 0.0) {
            continue;
        }
        let f = d_lo / (d_lo - d_hi);
        let b = Bracketed {
            p_c: p_lo + f * (p_hi - p_lo),
            value: a_lo + f * (a_hi - a_lo),
            p_lo,
            p_hi,
        };
        let score = match previous {
            Some(prev) => (b.p_c - prev).abs(),
            None => d_lo.abs() + d_hi.abs(),
        };
        if best.is_none_or(|(s, _)| score < s) {
            best = Some((score, b));
        }
    }
    best.map(|(_, b)| b)
}

/// Crossings at each t in `ts`, each search seeded by the last crossing found.
pub fn crossing_sequence(
    curves: &[(f64, EffectiveExponentCurve)],
    ts: &[usize],
    tau: usize,
    max_bracket: f64,
) -> Result<Vec<CrossingOutcome>> {
    let mut previous = None;
    let mut out = Vec::with_capacity(ts.len());
    for &t in ts {
        let outcome = find_crossings(curves, t, tau, CrossingOptions { max_bracket, previous })?;
        if let Some(c) = outcome.point() {
            previous = Some(c.p_c);
        }
        out.push(outcome);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::ExponentPoint;
    use proptest::prelude::*;

    fn curve(points: &[(usize, f64)]) -> EffectiveExponentCurve {
        EffectiveExponentCurve {
            dt: 1,
            points: points
                .iter()
                .map(|&(t, value)| ExponentPoint { t, value, stderr: 0.0 })
                .collect(),
            skipped: vec![],
        }
    }

    fn linear_family(grid: &[f64], a: f64, b: f64, c: f64, p_star: f64) -> Vec<(f64, EffectiveExponentCurve)> {
        grid.iter()
            .map(|&p| (p, curve(&[(10, a + b * (p - p_star)), (12, a + c * (p - p_star))])))
            .collect()
    }

    #[test]
    fn constructed_linear_crossing() {
        let grid: Vec<f64> = (0..11).map(|i| 0.30 + 0.01 * i as f64).collect();
        let curves = linear_family(&grid, 0.31, 2.0, -1.5, 0.3437);
        let c = *find_crossings(&curves, 10, 2, CrossingOptions::default()).unwrap().point().unwrap();
        assert!((c.p_c - 0.3437).abs() < 1e-12);
        assert!((c.delta - 0.31).abs() < 1e-12);
        assert!(c.p_lo < c.p_c && c.p_c < c.p_hi);
        assert!(!c.wide_bracket);
    }

    #[test]
    fn missing_bracket_is_reported() {
        let grid = [0.1, 0.2, 0.3];
        let curves = linear_family(&grid, 0.3, 1.0, 2.0, 0.5);
        assert_eq!(
            find_crossings(&curves, 10, 2, CrossingOptions::default()).unwrap(),
            CrossingOutcome::NoCrossing { t: 10 }
        );
    }

    #[test]
    fn wide_bracket_is_flagged() {
        let curves = linear_family(&[0.30, 0.31], 0.3, 1.0, -1.0, 0.305);
        let opts = CrossingOptions { max_bracket: QUANTUM_MAX_BRACKET, previous: None };
        assert!(find_crossings(&curves, 10, 2, opts).unwrap().point().unwrap().wide_bracket);
    }

    #[test]
    fn previous_crossing_picks_nearest_bracket() {
        // d(p) = (p − 0.2)(p − 0.6) changes sign twice.
        let curves: Vec<_> = (0..9)
            .map(|i| {
                let p = 0.1 * i as f64;
                (p, curve(&[(5, 0.0), (7, (p - 0.2) * (p - 0.6) + 1e-3)]))
            })
            .collect();
        let near = |prev| {
            find_crossings(&curves, 5, 2, CrossingOptions { max_bracket: 1.0, previous: Some(prev) })
                .unwrap()
                .point()
                .unwrap()
                .p_c
        };
        assert!((near(0.65) - 0.6).abs() < 0.02);
        assert!((near(0.15) - 0.2).abs() < 0.02);
    }

    #[test]
    fn sequence_carries_previous() {
        let grid: Vec<f64> = (0..21).map(|i| 0.38 + 0.001 * i as f64).collect();
        let curves: Vec<_> = grid
            .iter()
            .map(|&p| {
                (p, curve(&[(10, 0.3 + (p - 0.39)), (12, 0.3 - (p - 0.39)), (14, 0.3 - 3.0 * (p - 0.391))]))
            })
            .collect();
        let seq = crossing_sequence(&curves, &[10, 12], 2, 1.0).unwrap();
        assert!((seq[0].point().unwrap().p_c - 0.39).abs() < 1e-12);
        assert!(seq[1].point().is_some());
    }

    proptest! {
        #[test]
        fn unaffected_by_points_outside_bracket(
            p_star in 0.31f64..0.39,
            b in 0.5f64..3.0,
            c in -3.0f64..-0.5,
            extra in proptest::collection::vec(0.0f64..0.29, 0..5),
        ) {
            let base: Vec<f64> = (0..11).map(|i| 0.30 + 0.01 * i as f64).collect();
            let mut grid = base.clone();
            grid.extend(extra);
            grid.sort_by(f64::total_cmp);
            grid.dedup();
            let a = find_crossings(&linear_family(&base, 0.3, b, c, p_star), 10, 2, CrossingOptions::default()).unwrap();
            let z = find_crossings(&linear_family(&grid, 0.3, b, c, p_star), 10, 2, CrossingOptions::default()).unwrap();
            prop_assert_eq!(a, z);
        }

        #[test]
        fn monotone_relabel_keeps_bracket(p_star in 0.31f64..0.39, scale in 0.1f64..10.0, shift in -1.0f64..1.0) {
            let grid: Vec<f64> = (0..11).map(|i| 0.30 + 0.01 * i as f64).collect();
            let curves = linear_family(&grid, 0.3, 1.0, -1.0, p_star);
            let mapped: Vec<_> = curves.iter().map(|(p, c)| (scale * p + shift, c.clone())).collect();
            let a = *find_crossings(&curves, 10, 2, CrossingOptions::default()).unwrap().point().unwrap();
            let m = *find_crossings(&mapped, 10, 2, CrossingOptions::default()).unwrap().point().unwrap();
            prop_assert!((m.p_lo - (scale * a.p_lo + shift)).abs() < 1e-12);
            prop_assert!((m.p_c - (scale * a.p_c + shift)).abs() < 1e-9);
            prop_assert!((m.delta - a.delta).abs() < 1e-12);
        }
    }
}
