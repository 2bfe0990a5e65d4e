use serde::{Deserialize, Serialize};

use crate::error::{config, Result};

/// Tableau denominators below this (relative to the sequence scale) are regularized.
pub const BST_REG_EPS: f64 = 1e-14;
pub const OMEGA_MIN: f64 = 1e-3;
pub const OMEGA_MAX: f64 = 5.0;
pub const OMEGA_GRID_POINTS: usize = 512;
const REFINE_ITERATIONS: usize = 80;
/// Leave-one-out errors below this (relative to the sequence scale) count as an exact fit.
pub const BST_EXACT_FLOOR: f64 = 1e-10;
const L2O_TOLERANCE: f64 = 1e-8;
const ROOT_ITERATIONS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BstExtrapolation {
    pub limit: f64,
    /// Number of tableau columns beyond the input column.
    pub depth: usize,
    /// Entries replaced by their predecessor because a denominator vanished.
    pub regularized: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BstResult {
    pub omega: f64,
    pub limit: f64,
    pub error: f64,
    pub depth: usize,
    pub regularized: bool,
}

fn check_sequence(seq: &[(f64, f64)], min_len: usize) -> Result<()> {
    if seq.len() < min_len {
        return config(format!("BST needs at least {min_len} points, got {}", seq.len()));
    }
    if seq.iter().any(|(t, y)| !(*t > 0.0) || !y.is_finite()) {
        return config("BST needs positive times and finite values");
    }
    if seq.windows(2).any(|w| w[1].0 <= w[0].0) {
        return config("BST times must be strictly increasing");
    }
    Ok(())
}

/// Henkel–Schütz BST tableau with h_n = 1/t_n; returns the deepest entry.
pub fn bst_extrapolate(seq: &[(f64, f64)], omega: f64) -> Result<BstExtrapolation> {
    check_sequence(seq, 3)?;
    if !(omega > 0.0) {
        return config("omega must be positive");
    }
    Ok(tableau(seq, omega))
}

fn tableau(seq: &[(f64, f64)], omega: f64) -> BstExtrapolation {
    let n = seq.len();
    let scale = seq.iter().map(|(_, y)| y.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let eps = BST_REG_EPS * scale;
    let mut older = vec![0.0; n + 1];
    let mut prev: Vec<f64> = seq.iter().map(|(_, y)| *y).collect();
    let mut regularized = 0;
    for m in 1..n {
        let mut next = Vec::with_capacity(n - m);
        for k in 0..n - m {
            let (lo, hi) = (prev[k], prev[k + 1]);
            let diff = hi - lo;
            if diff.abs() <= eps {
                // Converged at roundoff; deeper columns would divide noise by noise.
                next.push(hi);
                continue;
            }
            let inner = hi - older[k + 1];
            let ratio = (seq[k + m].0 / seq[k].0).powf(omega);
            let den = if inner.abs() < eps {
                None
            } else {
                Some(ratio * (1.0 - diff / inner) - 1.0)
            };
            match den {
                Some(d) if d.abs() >= eps => next.push(hi + diff / d),
                _ => {
                    regularized += 1;
                    next.push(hi);
                }
            }
        }
        older = prev;
        prev = next;
    }
    BstExtrapolation {
        limit: prev[0],
        depth: n - 1,
        regularized,
    }
}

/// Geometric ω grid over [OMEGA_MIN, OMEGA_MAX].
pub fn omega_grid() -> Vec<f64> {
    let ratio = (OMEGA_MAX / OMEGA_MIN).ln() / (OMEGA_GRID_POINTS - 1) as f64;
    (0..OMEGA_GRID_POINTS)
        .map(|i| OMEGA_MIN * (ratio * i as f64).exp())
        .collect()
}

/// Scan the default ω grid, minimizing the leave-one-out extrapolation error.
pub fn bst_scan(seq: &[(f64, f64)]) -> Result<Option<BstResult>> {
    bst_scan_on(seq, &omega_grid())
}

/// Leave-one-out extrapolation error at one ω.
fn scan_point(seq: &[(f64, f64)], omega: f64) -> BstResult {
    loo(seq, omega).0
}

/// (result, Σ squared leave-one-out differences).
fn loo(seq: &[(f64, f64)], omega: f64) -> (BstResult, f64) {
    let full = tableau(seq, omega);
    let mut error = 0.0;
    let mut sq = 0.0;
    let mut regularized = full.regularized > 0;
    let mut reduced = Vec::with_capacity(seq.len() - 1);
    for drop in 0..seq.len() {
        reduced.clear();
        reduced.extend(seq.iter().enumerate().filter(|(i, _)| *i != drop).map(|(_, x)| *x));
        let r = tableau(&reduced, omega);
        regularized |= r.regularized > 0;
        error += (full.limit - r.limit).abs();
        sq += (full.limit - r.limit).powi(2);
    }
    let result = BstResult {
        omega,
        limit: full.limit,
        error,
        depth: full.depth,
        regularized,
    };
    (result, sq)
}

fn usable(r: &BstResult) -> bool {
    r.error.is_finite() && r.limit.is_finite()
}

/// Golden-section minimum of the squared leave-one-out sum on [lo, hi]. The
/// absolute sum is rugged near its minimum; the squared sum shares its zero
/// at an exact-fit ω but is smooth.
fn refine(seq: &[(f64, f64)], mut lo: f64, mut hi: f64) -> BstResult {
    let sq = |w: f64| {
        let (r, e) = loo(seq, w);
        if usable(&r) {
            e
        } else {
            f64::INFINITY
        }
    };
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut fa, mut fb) = (sq(a), sq(b));
    for _ in 0..REFINE_ITERATIONS {
        if fa < fb {
            hi = b;
            (b, fb) = (a, fa);
            a = hi - g * (hi - lo);
            fa = sq(a);
        } else {
            lo = a;
            (a, fa) = (b, fb);
            b = lo + g * (hi - lo);
            fb = sq(b);
        }
    }
    scan_point(seq, 0.5 * (lo + hi))
}

/// Scan `omegas` (ascending) for the smallest leave-one-out error, refining ω
/// around every local minimum of the grid. BST at ω also removes t^(−kω)
/// corrections, so an exact fit recurs at ω*/k.
pub fn bst_scan_on(seq: &[(f64, f64)], omegas: &[f64]) -> Result<Option<BstResult>> {
    check_sequence(seq, 4)?;
    if omegas.iter().any(|w| !(*w > 0.0)) {
        return config("omega must be positive");
    }
    let scanned: Vec<BstResult> = omegas.iter().map(|&w| scan_point(seq, w)).collect();
    let err = |i: usize| {
        if usable(&scanned[i]) {
            scanned[i].error
        } else {
            f64::INFINITY
        }
    };
    let minima: Vec<usize> = (0..scanned.len())
        .filter(|&i| {
            err(i).is_finite()
                && (i == 0 || err(i) <= err(i - 1))
                && (i + 1 == scanned.len() || err(i) <= err(i + 1))
        })
        .collect();
    let mut candidates: Vec<BstResult> = Vec::new();
    for &i in &minima {
        candidates.push(scanned[i]);
        if omegas.len() >= 3 && scanned[i].error > 0.0 {
            let (lo, hi) = (omegas[i.saturating_sub(1)], omegas[(i + 1).min(omegas.len() - 1)]);
            let r = refine(seq, lo, hi);
            if usable(&r) {
                candidates.push(r);
            }
        }
    }
    candidates.extend(root_candidates(seq, omegas));
    let scale = seq.iter().map(|(_, y)| y.abs()).fold(0.0, f64::max);
    let floor = BST_EXACT_FLOOR * scale.max(f64::MIN_POSITIVE);
    let Some(best) = candidates.iter().min_by(|a, b| a.error.total_cmp(&b.error)).copied() else {
        return Ok(None);
    };
    if best.error > floor {
        return Ok(Some(best));
    }
    // Several ω can fit exactly: aliases ω*/k of the true exponent, and
    // occasional accidental leave-one-out agreements, which leave-two-out
    // subsets expose. Among confirmed fits the largest ω is the leading one.
    let tol = BST_EXACT_FLOOR * scale.max(1.0);
    let exact: Vec<BstResult> = candidates.iter().filter(|r| r.error <= floor).copied().collect();
    let confirmed: Vec<BstResult> = exact
        .iter()
        .filter(|r| seq.len() < 6 || leave_two_out_spread(seq, r.omega, r.limit) <= L2O_TOLERANCE * scale.max(1.0))
        .copied()
        .collect();
    let pool = if confirmed.is_empty() { exact } else { confirmed };
    let anchor = *pool.iter().min_by(|a, b| a.error.total_cmp(&b.error)).unwrap();
    Ok(pool
        .iter()
        .filter(|r| (r.limit - anchor.limit).abs() <= tol)
        .max_by(|a, b| a.omega.total_cmp(&b.omega))
        .copied())
}

/// Exact fits are common roots of f_k(ω) = BST(seq) − BST(seq without k);
/// bisect every sign change of each f_k on the grid.
fn root_candidates(seq: &[(f64, f64)], omegas: &[f64]) -> Vec<BstResult> {
    let n = seq.len();
    let mut out = Vec::new();
    for k in 0..n {
        let reduced: Vec<(f64, f64)> = seq
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != k)
            .map(|(_, x)| *x)
            .collect();
        let f = |w: f64| tableau(seq, w).limit - tableau(&reduced, w).limit;
        let values: Vec<f64> = omegas.iter().map(|&w| f(w)).collect();
        for i in 1..omegas.len() {
            let (mut lo, mut hi) = (omegas[i - 1], omegas[i]);
            let (mut f_lo, f_hi) = (values[i - 1], values[i]);
            if !(f_lo.is_finite() && f_hi.is_finite()) || f_lo * f_hi > 0.0 {
                continue;
            }
            for _ in 0..ROOT_ITERATIONS {
                let mid = 0.5 * (lo + hi);
                let f_mid = f(mid);
                if !f_mid.is_finite() {
                    break;
                }
                if f_lo * f_mid <= 0.0 {
                    hi = mid;
                } else {
                    (lo, f_lo) = (mid, f_mid);
                }
            }
            let r = scan_point(seq, 0.5 * (lo + hi));
            if usable(&r) {
                out.push(r);
            }
        }
    }
    out
}

/// Largest |BST(seq without i, j) − limit| over all pairs i < j.
fn leave_two_out_spread(seq: &[(f64, f64)], omega: f64, limit: f64) -> f64 {
    let mut worst: f64 = 0.0;
    let mut reduced = Vec::with_capacity(seq.len() - 2);
    for i in 0..seq.len() {
        for j in i + 1..seq.len() {
            reduced.clear();
            reduced.extend(
                seq.iter()
                    .enumerate()
                    .filter(|(k, _)| *k != i && *k != j)
                    .map(|(_, x)| *x),
            );
            let d = (tableau(&reduced, omega).limit - limit).abs();
            worst = if d.is_nan() { f64::INFINITY } else { worst.max(d) };
        }
    }
    worst
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BstPrefixRow {
    pub len: usize,
    pub t_last: f64,
    pub result: Option<BstResult>,
    /// Relative change in limit, error or ω from the previous row exceeds the threshold.
    pub jump: bool,
}

/// `bst_scan` on every prefix of at least four points.
pub fn bst_prefix_table(seq: &[(f64, f64)], jump_threshold: f64) -> Result<Vec<BstPrefixRow>> {
    check_sequence(seq, 4)?;
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
    let mut rows: Vec<BstPrefixRow> = Vec::new();
    for len in 4..=seq.len() {
        let result = bst_scan(&seq[..len])?;
        let jump = match (rows.last().and_then(|r| r.result), result) {
            (Some(a), Some(b)) => {
                rel(b.limit, a.limit) > jump_threshold
                    || rel(b.omega, a.omega) > jump_threshold
                    || (a.error > 0.0 && rel(b.error, a.error) > jump_threshold)
            }
            (Some(_), None) => true,
            _ => false,
        };
        rows.push(BstPrefixRow {
            len,
            t_last: seq[len - 1].0,
            result,
            jump,
        });
    }
    Ok(rows)
}
