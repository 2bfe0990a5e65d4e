//! Largest-real-part eigenpairs of non-Hermitian local operators.

use ndarray::{s, Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{FqcpError, Result};
use crate::linalg;
use crate::C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArnoldiOptions {
    pub krylov_dim: usize,
    /// Absolute residual ‖Ax − λx‖ accepted for a unit vector x.
    pub tol: f64,
    pub max_restarts: usize,
}

impl Default for ArnoldiOptions {
    fn default() -> Self {
        Self {
            krylov_dim: 40,
            tol: 1e-11,
            max_restarts: 400,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LocalEigen {
    pub value: C64,
    pub vector: Array1<C64>,
    pub residual: f64,
    pub matvecs: usize,
    pub converged: bool,
}

/// Index of the eigenvalue with largest real part; near-ties go to larger imaginary part.
pub fn select_largest_real(values: &[C64]) -> usize {
    let mut best = 0;
    for (k, v) in values.iter().enumerate().skip(1) {
        let b = values[best];
        let tie = 1e-12 * (1.0 + b.norm());
        if v.re > b.re + tie || ((v.re - b.re).abs() <= tie && v.im > b.im) {
            best = k;
        }
    }
    best
}

fn normalized(v: Array1<C64>) -> Option<Array1<C64>> {
    let n = norm(&v);
    (n > 0.0 && n.is_finite()).then(|| v.mapv(|x| x / n))
}

fn norm(v: &Array1<C64>) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(a: &Array1<C64>, b: &Array1<C64>) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Full eigendecomposition of an explicit matrix.
pub fn largest_real_dense(m: &Array2<C64>) -> Result<LocalEigen> {
    let (vals, vecs) = linalg::eig(m)?;
    let k = select_largest_real(vals.as_slice().unwrap());
    let vector = normalized(vecs.column(k).to_owned())
        .ok_or_else(|| FqcpError::Linalg("degenerate eigenvector".into()))?;
    let residual = norm(&(m.dot(&vector) - vector.mapv(|x| x * vals[k])));
    Ok(LocalEigen {
        value: vals[k],
        vector,
        residual,
        matvecs: 0,
        converged: true,
    })
}

/// Materialize a linear map on C^dim column by column.
pub fn dense_from_map<F>(dim: usize, mut op: F) -> Array2<C64>
where
    F: FnMut(&Array1<C64>) -> Array1<C64>,
{
    let mut m = Array2::<C64>::zeros((dim, dim));
    let mut e = Array1::<C64>::zeros(dim);
    for k in 0..dim {
        e[k] = C64::new(1.0, 0.0);
        m.column_mut(k).assign(&op(&e));
        e[k] = ZERO;
    }
    m
}

/// Thick-restarted Arnoldi: after each cycle of `krylov_dim` vectors the basis
/// is contracted onto the Ritz vectors of the half of the spectrum with largest
/// real part, which keeps an exact relation A V = V T + v bᵀ.
pub fn largest_real_arnoldi<F>(mut op: F, start: &Array1<C64>, opts: ArnoldiOptions) -> Result<LocalEigen>
where
    F: FnMut(&Array1<C64>) -> Array1<C64>,
{
    let dim = start.len();
    let m = opts.krylov_dim.clamp(1, dim);
    let keep = (m / 2).max(1);
    let first = normalized(start.clone()).unwrap_or_else(|| {
        Array1::from_elem(dim, C64::new(1.0 / (dim as f64).sqrt(), 0.0))
    });
    let mut basis: Vec<Array1<C64>> = vec![first];
    // A·basis[..j] = basis[..j+1]·h[..j+1, ..j]
    let mut h = Array2::<C64>::zeros((m + 1, m));
    let mut j = 0;
    let mut matvecs = 0;
    for restart in 0..=opts.max_restarts {
        let mut breakdown = false;
        while j < m {
            let mut w = op(&basis[j]);
            matvecs += 1;
            for _ in 0..2 {
                for (i, q) in basis.iter().enumerate() {
                    let c = dot(q, &w);
                    h[[i, j]] += c;
                    w.scaled_add(-c, q);
                }
            }
            let beta = norm(&w);
            h[[j + 1, j]] = C64::new(beta, 0.0);
            j += 1;
            let scale = h.slice(s![..j, j - 1]).iter().map(|x| x.norm()).fold(1e-300, f64::max);
            if beta <= 1e-14 * scale {
                breakdown = true;
                break;
            }
            basis.push(w.mapv(|x| x / beta));
        }
        let hk = h.slice(s![..j, ..j]).to_owned();
        let (vals, vecs) = linalg::eig(&hk)?;
        let top = select_largest_real(vals.as_slice().unwrap());
        let y = vecs.column(top);
        let residual = if breakdown {
            0.0
        } else {
            (0..j).map(|c| h[[j, c]] * y[c]).sum::<C64>().norm()
        };
        let converged = residual <= opts.tol;
        if converged || breakdown || restart == opts.max_restarts || j < 2 {
            let mut x = Array1::<C64>::zeros(dim);
            for (q, c) in basis.iter().zip(y.iter()) {
                x.scaled_add(*c, q);
            }
            let vector = normalized(x).ok_or_else(|| FqcpError::Linalg("Ritz vector vanished".into()))?;
            return Ok(LocalEigen {
                value: vals[top],
                vector,
                residual,
                matvecs,
                converged: converged || breakdown,
            });
        }
        let mut order: Vec<usize> = (0..j).filter(|&i| i != top).collect();
        order.sort_by(|&a, &b| vals[b].re.total_cmp(&vals[a].re));
        let k = keep.min(j - 1);
        let mut kept = Array2::<C64>::zeros((j, k));
        kept.column_mut(0).assign(&y);
        for (c, &idx) in order.iter().take(k - 1).enumerate() {
            kept.column_mut(c + 1).assign(&vecs.column(idx));
        }
        let (q, _) = linalg::qr(&kept)?;
        let k = q.ncols();
        let t = linalg::dagger(&q).dot(&hk).dot(&q);
        let b = h.slice(s![j, ..j]).dot(&q);
        let mut new_basis: Vec<Array1<C64>> = (0..k)
            .map(|c| {
                let mut v = Array1::<C64>::zeros(dim);
                for (qv, coef) in basis[..j].iter().zip(q.column(c).iter()) {
                    v.scaled_add(*coef, qv);
                }
                v
            })
            .collect();
        let mut next = basis[j].clone();
        for v in &new_basis {
            let c = dot(v, &next);
            next.scaled_add(-c, v);
        }
        let next = normalized(next).ok_or_else(|| FqcpError::Linalg("restart vector vanished".into()))?;
        new_basis.push(next);
        basis = new_basis;
        h.fill(C64::new(0.0, 0.0));
        h.slice_mut(s![..k, ..k]).assign(&t);
        h.slice_mut(s![k, ..k]).assign(&b);
        j = k;
    }
    unreachable!("the final restart returns")
}
