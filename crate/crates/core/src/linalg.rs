//! Thin wrappers over LAPACK (via ndarray-linalg) with the conventions the
//! tensor engines need.

use ndarray::{s, Array1, Array2};
use ndarray_linalg::{Eig, EigVals, Eigh, JobSvd, QR, SVD, SVDDC, UPLO};

use crate::error::{FqcpError, Result};
use crate::C64;

pub fn dagger(m: &Array2<C64>) -> Array2<C64> {
    m.t().mapv(|x| x.conj())
}

pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    Array2::from_shape_fn((ar * br, ac * bc), |(i, j)| a[[i / br, j / bc]] * b[[i % br, j % bc]])
}

pub fn identity(n: usize) -> Array2<C64> {
    Array2::from_diag(&Array1::from_elem(n, C64::new(1.0, 0.0)))
}

pub fn max_abs_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Fresh row-major copy; LAPACK rejects the zero strides ndarray gives some slices.
fn packed(m: &Array2<C64>) -> Array2<C64> {
    Array2::from_shape_vec(m.dim(), m.iter().copied().collect()).unwrap()
}

fn lapack(e: ndarray_linalg::error::LinalgError) -> FqcpError {
    FqcpError::Linalg(e.to_string())
}

/// Thin singular value decomposition, singular values descending.
pub struct Svd {
    pub u: Array2<C64>,
    pub s: Vec<f64>,
    pub vt: Array2<C64>,
}

pub fn svd(m: &Array2<C64>) -> Result<Svd> {
    let k = m.nrows().min(m.ncols());
    let m = &packed(m);
    let (u, s, vt) = match m.svddc(JobSvd::Some) {
        Ok((Some(u), s, Some(vt))) => (u, s, vt),
        _ => {
            // divide and conquer occasionally fails to converge; fall back to QR iteration
            let (u, s, vt) = m.svd(true, true).map_err(lapack)?;
            let u = u.unwrap().slice(s![.., ..k]).to_owned();
            let vt = vt.unwrap().slice(s![..k, ..]).to_owned();
            (u, s, vt)
        }
    };
    Ok(Svd {
        u,
        s: s.to_vec(),
        vt,
    })
}

/// Result of truncating an SVD to at most `max_rank` values above `floor`.
pub struct Truncation {
    pub u: Array2<C64>,
    pub s: Vec<f64>,
    pub vt: Array2<C64>,
    /// Discarded Σs² over total Σs².
    pub discarded: f64,
}

pub fn truncated_svd(m: &Array2<C64>, max_rank: usize, floor: f64) -> Result<Truncation> {
    let Svd { u, s, vt } = svd(m)?;
    let total: f64 = s.iter().map(|x| x * x).sum();
    let mut keep = s.iter().take_while(|&&x| x > floor).count().min(max_rank);
    if keep == 0 {
        keep = 1;
    }
    let kept: f64 = s[..keep].iter().map(|x| x * x).sum();
    let discarded = if total > 0.0 {
        ((total - kept) / total).max(0.0)
    } else {
        0.0
    };
    Ok(Truncation {
        u: u.slice(s![.., ..keep]).to_owned(),
        s: s[..keep].to_vec(),
        vt: vt.slice(s![..keep, ..]).to_owned(),
        discarded,
    })
}

/// Truncated SVD keeping the fewest values whose discarded weight
/// (relative to Σs²) is at most `rel_tol`, capped at `max_rank`.
pub fn truncated_svd_weight(m: &Array2<C64>, max_rank: usize, rel_tol: f64) -> Result<Truncation> {
    let Svd { u, s, vt } = svd(m)?;
    let total: f64 = s.iter().map(|x| x * x).sum();
    let mut tail = 0.0;
    let mut keep = s.len();
    while keep > 1 && tail + s[keep - 1] * s[keep - 1] <= rel_tol * total {
        tail += s[keep - 1] * s[keep - 1];
        keep -= 1;
    }
    let keep = keep.min(max_rank).max(1);
    let kept: f64 = s[..keep].iter().map(|x| x * x).sum();
    let discarded = if total > 0.0 {
        ((total - kept) / total).max(0.0)
    } else {
        0.0
    };
    Ok(Truncation {
        u: u.slice(s![.., ..keep]).to_owned(),
        s: s[..keep].to_vec(),
        vt: vt.slice(s![..keep, ..]).to_owned(),
        discarded,
    })
}

/// Thin QR: `m = q r` with `q` having orthonormal columns.
pub fn qr(m: &Array2<C64>) -> Result<(Array2<C64>, Array2<C64>)> {
    packed(m).qr().map_err(lapack)
}

/// Eigenvalues and right eigenvectors of a general square matrix.
pub fn eig(m: &Array2<C64>) -> Result<(Array1<C64>, Array2<C64>)> {
    packed(m).eig().map_err(lapack)
}

pub fn eigvals(m: &Array2<C64>) -> Result<Array1<C64>> {
    packed(m).eigvals().map_err(lapack)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn eigvalsh(m: &Array2<C64>) -> Result<Array1<f64>> {
    let (vals, _) = packed(m).eigh(UPLO::Lower).map_err(lapack)?;
    Ok(vals)
}

/// Von Neumann entropy of the normalized squared singular values.
pub fn schmidt_entropy(s: &[f64]) -> f64 {
    let total: f64 = s.iter().map(|x| x * x).sum();
    if total <= 0.0 {
        return 0.0;
    }
    s.iter()
        .map(|x| x * x / total)
        .filter(|&w| w > 0.0)
        .map(|w| -w * w.ln())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Array2<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((rows, cols), |_| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    #[test]
    fn sliced_single_element_is_accepted() {
        let big = Array2::from_elem((3, 3), C64::new(0.5, 0.0));
        let one = big.slice(s![..1, ..1]).to_owned();
        assert_eq!(eig(&one).unwrap().0[0], C64::new(0.5, 0.0));
        assert_eq!(svd(&one).unwrap().s, vec![0.5]);
    }

    #[test]
    fn svd_reconstructs() {
        for (r, c) in [(6, 4), (4, 6), (5, 5)] {
            let m = random(r, c, 3);
            let Svd { u, s, vt } = svd(&m).unwrap();
            let us = Array2::from_shape_fn(u.dim(), |(i, j)| u[[i, j]] * s[j]);
            assert!(max_abs_diff(&us.dot(&vt), &m) < 1e-13);
            assert!(s.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn truncation_weight() {
        let m = random(8, 8, 5);
        let full = svd(&m).unwrap();
        let t = truncated_svd(&m, 3, 1e-14).unwrap();
        let total: f64 = full.s.iter().map(|x| x * x).sum();
        let tail: f64 = full.s[3..].iter().map(|x| x * x).sum();
        assert_eq!(t.s.len(), 3);
        assert!((t.discarded - tail / total).abs() < 1e-13);
    }

    #[test]
    fn qr_is_thin_and_exact() {
        let m = random(12, 3, 9);
        let (q, r) = qr(&m).unwrap();
        assert_eq!(q.dim(), (12, 3));
        assert_eq!(r.dim(), (3, 3));
        assert!(max_abs_diff(&q.dot(&r), &m) < 1e-13);
        assert!(max_abs_diff(&dagger(&q).dot(&q), &identity(3)) < 1e-13);
    }

    #[test]
    fn kron_of_identities() {
        assert_eq!(kron(&identity(2), &identity(3)), identity(6));
    }
}
