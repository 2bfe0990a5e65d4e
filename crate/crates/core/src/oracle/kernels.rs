//! Dense state-vector kernels. Site `i` of an `n`-site register is bit
//! `n - 1 - i` of the basis index (leftmost site most significant).

use ndarray::Array2;

use crate::C64;

pub fn bit(n: usize, site: usize) -> usize {
    1 << (n - 1 - site)
}

pub fn flat4(u: &Array2<C64>) -> [C64; 16] {
    let mut out = [C64::new(0.0, 0.0); 16];
    for i in 0..4 {
        for j in 0..4 {
            out[4 * i + j] = u[[i, j]];
        }
    }
    out
}

/// Apply a 4×4 operator, basis index 2·bit(a) + bit(b), to sites `a`, `b`.
pub fn apply_two(psi: &mut [C64], n: usize, a: usize, b: usize, u: &[C64; 16]) {
    let (ma, mb) = (bit(n, a), bit(n, b));
    for base in 0..psi.len() {
        if base & (ma | mb) != 0 {
            continue;
        }
        let idx = [base, base | mb, base | ma, base | ma | mb];
        let v = [psi[idx[0]], psi[idx[1]], psi[idx[2]], psi[idx[3]]];
        for r in 0..4 {
            psi[idx[r]] = u[4 * r] * v[0] + u[4 * r + 1] * v[1] + u[4 * r + 2] * v[2] + u[4 * r + 3] * v[3];
        }
    }
}

/// Apply a 2×2 operator to site `a`.
pub fn apply_one(psi: &mut [C64], n: usize, a: usize, u: &Array2<C64>) {
    let m = bit(n, a);
    let (u00, u01, u10, u11) = (u[[0, 0]], u[[0, 1]], u[[1, 0]], u[[1, 1]]);
    for base in 0..psi.len() {
        if base & m != 0 {
            continue;
        }
        let (x, y) = (psi[base], psi[base | m]);
        psi[base] = u00 * x + u01 * y;
        psi[base | m] = u10 * x + u11 * y;
    }
}

pub fn conj16(u: &[C64; 16]) -> [C64; 16] {
    u.map(|x| x.conj())
}
