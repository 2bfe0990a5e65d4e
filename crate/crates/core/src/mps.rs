//! Open-boundary tensor trains with a tracked canonical center.
//!
//! Site tensors have shape (D_left, d, D_right). Tensors left of `center` are
//! left-isometric, tensors right of it right-isometric.

use ndarray::{s, Array1, Array2, Array3, Array4, Axis as NdAxis};

use crate::error::{FqcpError, Result};
use crate::linalg::{self, Truncation};
use crate::C64;

#[derive(Clone, Debug)]
pub struct TensorTrain {
    pub tensors: Vec<Array3<C64>>,
    pub center: usize,
    pub d: usize,
}

fn reshape2(a: Array3<C64>, rows: usize, cols: usize) -> Array2<C64> {
    a.as_standard_layout()
        .into_owned()
        .into_shape_with_order((rows, cols))
        .unwrap()
}

fn reshape3(a: Array2<C64>, d0: usize, d1: usize, d2: usize) -> Array3<C64> {
    a.as_standard_layout()
        .into_owned()
        .into_shape_with_order((d0, d1, d2))
        .unwrap()
}

fn flatten_two_site(theta: &Array4<C64>) -> Array2<C64> {
    let (dl, d, d2, dr) = theta.dim();
    theta
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((dl * d, d2 * dr))
        .unwrap()
}

/// Σ_μ v_μ A[:, μ, :].
pub fn transfer(a: &Array3<C64>, v: &[C64]) -> Array2<C64> {
    let (dl, d, dr) = a.dim();
    let mut out = Array2::<C64>::zeros((dl, dr));
    for mu in 0..d {
        if v[mu] != C64::new(0.0, 0.0) {
            out.scaled_add(v[mu], &a.index_axis(NdAxis(1), mu));
        }
    }
    out
}

impl TensorTrain {
    /// Bond-dimension-one product of local vectors.
    pub fn product(vectors: &[Vec<C64>]) -> Self {
        let d = vectors[0].len();
        let tensors = vectors
            .iter()
            .map(|v| Array3::from_shape_fn((1, d, 1), |(_, m, _)| v[m]))
            .collect();
        Self {
            tensors,
            center: 0,
            d,
        }
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Bond dimensions including the trivial outer bonds (length L+1).
    pub fn bond_dims(&self) -> Vec<usize> {
        let mut dims: Vec<usize> = self.tensors.iter().map(|t| t.dim().0).collect();
        dims.push(self.tensors.last().map_or(1, |t| t.dim().2));
        dims
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    fn check_site(&self, j: usize) -> Result<()> {
        if j >= self.len() {
            return Err(FqcpError::Index {
                index: j,
                len: self.len(),
            });
        }
        Ok(())
    }

    fn shift_right(&mut self) -> Result<()> {
        let j = self.center;
        let a = self.tensors[j].clone();
        let (dl, d, dr) = a.dim();
        let (q, r) = linalg::qr(&reshape2(a, dl * d, dr))?;
        let k = q.ncols();
        self.tensors[j] = reshape3(q, dl, d, k);
        let b = self.tensors[j + 1].clone();
        let (_, d2, dr2) = b.dim();
        self.tensors[j + 1] = reshape3(r.dot(&reshape2(b, dr, d2 * dr2)), k, d2, dr2);
        self.center = j + 1;
        Ok(())
    }

    fn shift_left(&mut self) -> Result<()> {
        let j = self.center;
        let a = self.tensors[j].clone();
        let (dl, d, dr) = a.dim();
        let m = reshape2(a, dl, d * dr);
        let (q, r) = linalg::qr(&linalg::dagger(&m))?;
        let k = q.ncols();
        self.tensors[j] = reshape3(linalg::dagger(&q), k, d, dr);
        let b = self.tensors[j - 1].clone();
        let (dl2, d2, _) = b.dim();
        self.tensors[j - 1] = reshape3(reshape2(b, dl2 * d2, dl).dot(&linalg::dagger(&r)), dl2, d2, k);
        self.center = j - 1;
        Ok(())
    }

    pub fn move_center(&mut self, to: usize) -> Result<()> {
        self.check_site(to)?;
        while self.center < to {
            self.shift_right()?;
        }
        while self.center > to {
            self.shift_left()?;
        }
        Ok(())
    }

    /// Bring the train into canonical form with center `to`, from arbitrary tensors.
    pub fn canonicalize(&mut self, to: usize) -> Result<()> {
        self.center = 0;
        while self.center + 1 < self.len() {
            self.shift_right()?;
        }
        self.move_center(to)
    }

    /// Contraction of sites `j` and `j+1`, shape (D_left, d, d, D_right).
    pub fn two_site(&self, j: usize) -> Array4<C64> {
        let a = &self.tensors[j];
        let b = &self.tensors[j + 1];
        let (dl, d, dm) = a.dim();
        let (_, d2, dr) = b.dim();
        let m = reshape2(a.clone(), dl * d, dm).dot(&reshape2(b.clone(), dm, d2 * dr));
        m.into_shape_with_order((dl, d, d2, dr)).unwrap()
    }

    /// Replace sites `j`, `j+1` by a truncated SVD of `theta`; the singular
    /// values go right when `center_right`, else left.
    pub fn split_two_site(
        &mut self,
        j: usize,
        theta: &Array4<C64>,
        max_bond: usize,
        floor: f64,
        center_right: bool,
    ) -> Result<Truncation> {
        let m = flatten_two_site(theta);
        let t = linalg::truncated_svd(&m, max_bond, floor)?;
        self.install_split(j, theta.dim(), &t, center_right);
        Ok(t)
    }

    fn install_split(
        &mut self,
        j: usize,
        (dl, d, d2, dr): (usize, usize, usize, usize),
        t: &Truncation,
        center_right: bool,
    ) {
        let k = t.s.len();
        if center_right {
            self.tensors[j] = reshape3(t.u.clone(), dl, d, k);
            let mut svt = t.vt.clone();
            for (mut row, s) in svt.rows_mut().into_iter().zip(&t.s) {
                row.mapv_inplace(|x| x * *s);
            }
            self.tensors[j + 1] = reshape3(svt, k, d2, dr);
            self.center = j + 1;
        } else {
            let mut us = t.u.clone();
            for (mut col, s) in us.columns_mut().into_iter().zip(&t.s) {
                col.mapv_inplace(|x| x * *s);
            }
            self.tensors[j] = reshape3(us, dl, d, k);
            self.tensors[j + 1] = reshape3(t.vt.clone(), k, d2, dr);
            self.center = j;
        }
    }

    /// Multiply the physical index of site `j` by `op` (d×d).
    pub fn apply_local(&mut self, j: usize, op: &Array2<C64>) {
        let a = &self.tensors[j];
        let (dl, d, dr) = a.dim();
        let mut out = Array3::<C64>::zeros((dl, d, dr));
        for mu in 0..d {
            for nu in 0..d {
                let c = op[[mu, nu]];
                if c != C64::new(0.0, 0.0) {
                    out.index_axis_mut(NdAxis(1), mu)
                        .scaled_add(c, &a.index_axis(NdAxis(1), nu));
                }
            }
        }
        self.tensors[j] = out;
    }

    pub fn scale(&mut self, c: C64) {
        self.tensors[self.center].mapv_inplace(|x| x * c);
    }

    /// Row vector contracting sites `0..upto` with the local vectors.
    pub fn left_env<'a>(&self, upto: usize, v: impl Fn(usize) -> &'a [C64]) -> Array1<C64> {
        let mut env = Array1::from_elem(1, C64::new(1.0, 0.0));
        for j in 0..upto {
            env = env.dot(&transfer(&self.tensors[j], v(j)));
        }
        env
    }

    /// Column vector contracting sites `from..L` with the local vectors.
    pub fn right_env<'a>(&self, from: usize, v: impl Fn(usize) -> &'a [C64]) -> Array1<C64> {
        let mut env = Array1::from_elem(1, C64::new(1.0, 0.0));
        for j in (from..self.len()).rev() {
            env = transfer(&self.tensors[j], v(j)).dot(&env);
        }
        env
    }

    /// Full contraction with one local vector per site.
    pub fn contract<'a>(&self, v: impl Fn(usize) -> &'a [C64]) -> C64 {
        self.left_env(self.len(), v)[0]
    }

    /// ⟨ψ|ψ⟩ from the center tensor; requires canonical form.
    pub fn norm_sqr(&self) -> f64 {
        self.tensors[self.center].iter().map(|x| x.norm_sqr()).sum()
    }

    /// ⟨self|other⟩ with complex conjugation on `self`.
    pub fn inner(&self, other: &Self) -> C64 {
        let mut env = Array2::from_elem((1, 1), C64::new(1.0, 0.0));
        for (a, b) in self.tensors.iter().zip(&other.tensors) {
            let mut next = Array2::<C64>::zeros((a.dim().2, b.dim().2));
            for mu in 0..self.d {
                let am = a.index_axis(NdAxis(1), mu).mapv(|x| x.conj());
                let bm = b.index_axis(NdAxis(1), mu);
                next = next + am.t().dot(&env).dot(&bm);
            }
            env = next;
        }
        env[[0, 0]]
    }

    /// Dense vector of all d^L amplitudes, leftmost site most significant.
    pub fn to_dense(&self) -> Array1<C64> {
        let mut acc = Array2::from_elem((1, 1), C64::new(1.0, 0.0));
        for a in &self.tensors {
            let (dl, d, dr) = a.dim();
            let rows = acc.nrows();
            let m = acc.dot(&reshape2(a.clone(), dl, d * dr));
            acc = m.into_shape_with_order((rows * d, dr)).unwrap();
        }
        acc.column(0).to_owned()
    }

    /// Singular values across the bond left of site `j`; moves the center to `j - 1`.
    pub fn bond_spectrum(&mut self, j: usize) -> Result<Vec<f64>> {
        if j == 0 || j >= self.len() {
            return Ok(vec![1.0]);
        }
        self.move_center(j - 1)?;
        let a = self.tensors[j - 1].clone();
        let (dl, d, dr) = a.dim();
        Ok(linalg::svd(&reshape2(a, dl * d, dr))?.s)
    }

    /// Maximum deviation from isometry over the non-center tensors.
    pub fn isometry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, a) in self.tensors.iter().enumerate() {
            let (dl, d, dr) = a.dim();
            let m = if j < self.center {
                let m = reshape2(a.clone(), dl * d, dr);
                linalg::dagger(&m).dot(&m)
            } else if j > self.center {
                let m = reshape2(a.clone(), dl, d * dr);
                m.dot(&linalg::dagger(&m))
            } else {
                continue;
            };
            worst = worst.max(linalg::max_abs_diff(&m, &linalg::identity(m.nrows())));
        }
        worst
    }

    /// Truncate every bond to at most `max_bond` values, dropping per bond the
    /// smallest tail with relative weight ≤ `rel_tol`. Returns Π(1 − discarded).
    /// Ends with the center on site 0.
    pub fn compress(&mut self, max_bond: usize, rel_tol: f64) -> Result<f64> {
        self.canonicalize(self.len() - 1)?;
        let mut fidelity = 1.0;
        for j in (1..self.len()).rev() {
            let a = self.tensors[j].clone();
            let (dl, d, dr) = a.dim();
            let t = linalg::truncated_svd_weight(&reshape2(a, dl, d * dr), max_bond, rel_tol)?;
            let k = t.s.len();
            fidelity *= 1.0 - t.discarded;
            self.tensors[j] = reshape3(t.vt, k, d, dr);
            let mut us = t.u;
            for (mut col, s) in us.columns_mut().into_iter().zip(&t.s) {
                col.mapv_inplace(|x| x * *s);
            }
            let b = self.tensors[j - 1].clone();
            let (dl2, d2, _) = b.dim();
            self.tensors[j - 1] = reshape3(reshape2(b, dl2 * d2, dl).dot(&us), dl2, d2, k);
            self.center = j - 1;
        }
        Ok(fidelity)
    }

    /// `self − other` as a train with block-diagonal bond spaces (D₁ + D₂).
    pub fn difference(&self, other: &Self) -> Self {
        let l = self.len();
        let tensors = self
            .tensors
            .iter()
            .zip(&other.tensors)
            .enumerate()
            .map(|(j, (a, b))| {
                let (al, d, ar) = a.dim();
                let (bl, _, br) = b.dim();
                let (first, last) = (j == 0, j + 1 == l);
                if first && last {
                    return a - b;
                }
                let dl = if first { 1 } else { al + bl };
                let dr = if last { 1 } else { ar + br };
                let mut out = Array3::<C64>::zeros((dl, d, dr));
                let (bl0, br0) = (if first { 0 } else { al }, if last { 0 } else { ar });
                out.slice_mut(s![..al, .., ..ar]).assign(a);
                let sign = if first { -1.0 } else { 1.0 };
                out.slice_mut(s![bl0..bl0 + bl, .., br0..br0 + br])
                    .assign(&b.mapv(|x| x * sign));
                out
            })
            .collect();
        Self {
            tensors,
            center: 0,
            d: self.d,
        }
    }

    /// Slice of a tensor along the physical index, for tests and debugging.
    pub fn matrix(&self, j: usize, mu: usize) -> Array2<C64> {
        self.tensors[j].slice(s![.., mu, ..]).to_owned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_train(l: usize, d: usize, bond: usize, seed: u64) -> TensorTrain {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tensors = Vec::new();
        for j in 0..l {
            let dl = if j == 0 { 1 } else { bond };
            let dr = if j + 1 == l { 1 } else { bond };
            tensors.push(Array3::from_shape_fn((dl, d, dr), |_| {
                C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            }));
        }
        TensorTrain {
            tensors,
            center: 0,
            d,
        }
    }

    fn max_diff(a: &Array1<C64>, b: &Array1<C64>) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn canonicalization_preserves_state() {
        let mut t = random_train(5, 3, 4, 1);
        let before = t.to_dense();
        t.canonicalize(2).unwrap();
        assert!(max_diff(&before, &t.to_dense()) < 1e-12);
        assert!(t.isometry_defect() < 1e-12);
        t.move_center(0).unwrap();
        assert!(t.isometry_defect() < 1e-12);
        assert!(max_diff(&before, &t.to_dense()) < 1e-12);
        let norm: f64 = before.iter().map(|x| x.norm_sqr()).sum();
        assert!((t.norm_sqr() - norm).abs() < 1e-10 * norm);
        assert!((t.inner(&t).re - norm).abs() < 1e-10 * norm);
    }

    #[test]
    fn exact_split_roundtrip() {
        let mut t = random_train(4, 2, 2, 2);
        t.canonicalize(1).unwrap();
        let before = t.to_dense();
        let theta = t.two_site(1);
        let tr = t.split_two_site(1, &theta, 64, 0.0, true).unwrap();
        assert!(tr.discarded < 1e-14);
        assert_eq!(t.center, 2);
        assert!(max_diff(&before, &t.to_dense()) < 1e-12);
        assert!(t.isometry_defect() < 1e-12);
    }

    #[test]
    fn compression_is_exact_below_rank() {
        let mut t = random_train(5, 2, 3, 7);
        let before = t.to_dense();
        let mut wide = t.clone();
        wide.tensors = t
            .tensors
            .iter()
            .enumerate()
            .map(|(j, a)| {
                // pad bonds with zeros to dimension 6
                let (dl, d, dr) = a.dim();
                let (pl, pr) = (if j == 0 { 1 } else { 6 }, if j == 4 { 1 } else { 6 });
                let mut out = Array3::<C64>::zeros((pl, d, pr));
                out.slice_mut(s![..dl, .., ..dr]).assign(a);
                out
            })
            .collect();
        let fidelity = wide.compress(64, 1e-12).unwrap();
        assert!((1.0 - fidelity).abs() < 1e-12);
        assert!(wide.max_bond() <= 4);
        assert!(max_diff(&before, &wide.to_dense()) < 1e-12);
        let f = t.compress(1, 0.0).unwrap();
        assert!(f < 1.0 && f > 0.0);
        assert_eq!(t.max_bond(), 1);
    }

    #[test]
    fn difference_matches_dense() {
        let a = random_train(4, 3, 2, 4);
        let b = random_train(4, 3, 3, 5);
        let mut diff = a.difference(&b);
        let want = a.to_dense() - b.to_dense();
        assert!(max_diff(&diff.to_dense(), &want) < 1e-12);
        diff.canonicalize(0).unwrap();
        let norm: f64 = want.iter().map(|x| x.norm_sqr()).sum();
        assert!((diff.norm_sqr() - norm).abs() < 1e-10 * norm);
        let single = random_train(1, 3, 1, 6);
        let zero = single.difference(&single).to_dense();
        assert!(zero.iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn contraction_against_dense() {
        let t = random_train(4, 2, 3, 3);
        let dense = t.to_dense();
        let v = [C64::new(0.3, 0.1), C64::new(-1.0, 0.5)];
        let got = t.contract(|_| &v);
        let want: C64 = (0..16)
            .map(|idx| {
                let w: C64 = (0..4).map(|j| v[(idx >> (3 - j)) & 1]).product();
                w * dense[idx]
            })
            .sum();
        assert!((got - want).norm() < 1e-12);
    }
}
