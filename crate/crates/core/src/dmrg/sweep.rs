use ndarray::{Array1, Array2, Array3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::eigen::{dense_from_map, largest_real_arnoldi, largest_real_dense, ArnoldiOptions, LocalEigen};
use super::superop::SuperoperatorMpo;
use crate::error::{config, Result};
use crate::mpo::{TRACE_VEC, ZERO_VEC};
use crate::mps::{transfer, TensorTrain};
use crate::rng::stream_rng;
use crate::C64;

const ONE: C64 = C64 { re: 1.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DmrgOptions {
    /// Deflation weight of the normalized identity projector.
    pub w: f64,
    /// Bond cap D of the vectorized state.
    pub bond_dim: usize,
    pub min_sweeps: usize,
    pub max_sweeps: usize,
    /// Largest eigenvalue change over a full sweep accepted as converged.
    pub tol: f64,
    pub seed: u64,
    /// Bond dimension of the random initial state.
    pub init_bond: usize,
    /// Local problems up to this dimension are diagonalized densely.
    pub dense_local_max: usize,
    pub arnoldi: ArnoldiOptions,
    pub svd_floor: f64,
}

impl Default for DmrgOptions {
    fn default() -> Self {
        Self {
            w: 1.0,
            bond_dim: 64,
            min_sweeps: 4,
            max_sweeps: 30,
            tol: 1e-9,
            seed: 0,
            init_bond: 8,
            dense_local_max: 400,
            arnoldi: ArnoldiOptions::default(),
            svd_floor: 1e-13,
        }
    }
}

/// The vectorized density matrix |ρ⟩⟩ over μ = 2·ket + bra.
#[derive(Clone, Debug)]
pub struct VectorizedMps(pub TensorTrain);

impl VectorizedMps {
    pub fn canonical_center(&self) -> usize {
        self.0.center
    }

    /// |⟨⟨ρ₀|ρ⟩⟩| / ‖ρ‖ with ρ₀ the all-inactive state.
    pub fn absorbing_overlap(&self) -> f64 {
        let rho0 = TensorTrain::product(&vec![ZERO_VEC.to_vec(); self.0.len()]);
        rho0.inner(&self.0).norm() / self.0.inner(&self.0).re.sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapResult {
    pub l: usize,
    pub p: f64,
    pub theta: f64,
    pub bond_dim: usize,
    pub d_o: usize,
    pub w: f64,
    /// Eigenvalue of E′ with largest real part.
    pub lambda: C64,
    pub epsilon1: C64,
    pub tau: f64,
    pub converged: bool,
    pub sweeps: usize,
    /// |Δλ| over the last full sweep.
    pub last_change: f64,
    pub max_bond: usize,
    pub absorbing_overlap: f64,
    pub compression_residual: f64,
    pub local_residual: f64,
    /// Operator applications spent in local eigensolves.
    pub matvecs: usize,
}

/// Principal-branch logarithm and relaxation time −1/Re ε.
pub fn exponent_and_tau(lambda: C64) -> (C64, f64) {
    let eps = if lambda.norm() == 0.0 {
        C64::new(f64::NEG_INFINITY, 0.0)
    } else {
        lambda.ln()
    };
    let tau = if eps.re < 0.0 { -1.0 / eps.re } else { f64::INFINITY };
    (eps, tau)
}

fn reshape_mat(a: Array3<C64>, rows: usize, cols: usize) -> Array2<C64> {
    a.as_standard_layout().into_owned().into_shape_with_order((rows, cols)).unwrap()
}

/// Permute the axes of a row-major tensor with shape `dims` and flatten it to `(rows, ·)`.
fn permute_flat(data: Array2<C64>, dims: &[usize], order: &[usize], rows: usize) -> Array2<C64> {
    let t = data.into_shape_with_order(ndarray::IxDyn(dims)).unwrap();
    let t = t.permuted_axes(ndarray::IxDyn(order)).as_standard_layout().into_owned();
    let cols = t.len() / rows;
    t.into_shape_with_order((rows, cols)).unwrap()
}

/// A dense matrix, or compressed rows when most entries vanish (the classical
/// point gives bulk superoperator tensors with a few percent nonzeros).
enum OpMatrix {
    Dense(Array2<C64>),
    Sparse {
        rows: usize,
        indptr: Vec<usize>,
        cols: Vec<usize>,
        vals: Vec<C64>,
    },
}

const SPARSE_FILL: f64 = 0.25;

impl OpMatrix {
    fn new(m: Array2<C64>) -> Self {
        let nnz = m.iter().filter(|x| **x != C64::new(0.0, 0.0)).count();
        if (nnz as f64) > SPARSE_FILL * m.len() as f64 {
            return OpMatrix::Dense(m);
        }
        let mut indptr = vec![0];
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        for row in m.rows() {
            for (c, v) in row.iter().enumerate() {
                if *v != C64::new(0.0, 0.0) {
                    cols.push(c);
                    vals.push(*v);
                }
            }
            indptr.push(cols.len());
        }
        OpMatrix::Sparse {
            rows: m.nrows(),
            indptr,
            cols,
            vals,
        }
    }

    /// self · x
    fn mul(&self, x: &Array2<C64>) -> Array2<C64> {
        match self {
            OpMatrix::Dense(m) => m.dot(x),
            OpMatrix::Sparse { rows, indptr, cols, vals } => {
                let mut out = Array2::<C64>::zeros((*rows, x.ncols()));
                for (r, mut orow) in out.rows_mut().into_iter().enumerate() {
                    let orow = orow.as_slice_mut().unwrap();
                    for k in indptr[r]..indptr[r + 1] {
                        let v = vals[k];
                        let xrow = x.row(cols[k]);
                        for (o, xv) in orow.iter_mut().zip(xrow.as_slice().unwrap()) {
                            *o += v * xv;
                        }
                    }
                }
                out
            }
        }
    }
}

/// Per-site superoperator W[w, o, i, w'] in the two matrix layouts the contractions need.
struct SiteOp {
    wl: usize,
    wr: usize,
    /// rows (o, w'), columns (w, i)
    forward: OpMatrix,
    /// rows (w, o), columns (i, w')
    backward: OpMatrix,
}

impl SiteOp {
    fn new(tensor: &Array3<C64>) -> Self {
        let (wl, _, wr) = tensor.dim();
        let t4 = tensor
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((wl, 4, 4, wr))
            .unwrap();
        let forward = t4
            .view()
            .permuted_axes([1, 3, 0, 2])
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((4 * wr, wl * 4))
            .unwrap();
        let backward = t4.into_shape_with_order((wl * 4, 4 * wr)).unwrap();
        Self {
            wl,
            wr,
            forward: OpMatrix::new(forward),
            backward: OpMatrix::new(backward),
        }
    }
}

/// Left environment (a', w, a) grown by one site tensor A (a, i, c).
fn grow_left(env: &Array3<C64>, a: &Array3<C64>, op: &SiteOp) -> Array3<C64> {
    let (ab, w, ak) = env.dim();
    let (_, _, c) = a.dim();
    let t1 = reshape_mat(env.clone(), ab * w, ak).dot(&reshape_mat(a.clone(), ak, 4 * c));
    // (a', w, i, c) -> (w, i, a', c)
    let t1 = permute_flat(t1, &[ab, w, 4, c], &[1, 2, 0, 3], w * 4);
    let t2 = op.forward.mul(&t1);
    // (o, w', a', c) -> (c, w', a', o)
    let t2 = permute_flat(t2, &[4, op.wr, ab, c], &[3, 1, 2, 0], c * op.wr);
    let bra = reshape_mat(a.mapv(|x| x.conj()), ab * 4, c);
    t2.dot(&bra)
        .into_shape_with_order((c, op.wr, c))
        .unwrap()
        .permuted_axes([2, 1, 0])
        .as_standard_layout()
        .into_owned()
}

/// Right environment (w, b, b') grown by one site tensor B (c, i, b).
fn grow_right(env: &Array3<C64>, b: &Array3<C64>, op: &SiteOp) -> Array3<C64> {
    let (w, bk, bb) = env.dim();
    let (c, _, _) = b.dim();
    let r = env
        .view()
        .permuted_axes([1, 0, 2])
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((bk, w * bb))
        .unwrap();
    let t1 = reshape_mat(b.clone(), c * 4, bk).dot(&r);
    // (c, i, w, b') -> (i, w, c, b')
    let t1 = permute_flat(t1, &[c, 4, w, bb], &[1, 2, 0, 3], 4 * w);
    let t2 = op.backward.mul(&t1);
    // (w_l, o, c, b') -> (w_l, c, o, b')
    let t2 = permute_flat(t2, &[op.wl, 4, c, bb], &[0, 2, 1, 3], op.wl * c);
    let bra = b
        .mapv(|x| x.conj())
        .permuted_axes([1, 2, 0])
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((4 * bb, c))
        .unwrap();
    t2.dot(&bra).into_shape_with_order((op.wl, c, c)).unwrap()
}

/// H_eff on a two-site block (a, i1, i2, b), optionally minus w·p p†.
struct BlockOperator<'a> {
    lenv: &'a Array3<C64>,
    renv: &'a Array3<C64>,
    w1: &'a SiteOp,
    w2: &'a SiteOp,
    dl: usize,
    dr: usize,
    projector: Option<(f64, Array1<C64>)>,
}

impl BlockOperator<'_> {
    fn dim(&self) -> usize {
        self.dl * 16 * self.dr
    }

    fn apply(&self, x: &Array1<C64>) -> Array1<C64> {
        let (dl, dr) = (self.dl, self.dr);
        let (ab, w, _) = self.lenv.dim();
        let (w1, w2) = (self.w1.wr, self.w2.wr);
        let xm = x.view().into_shape_with_order((dl, 16 * dr)).unwrap();
        let t1 = self.lenv.view().into_shape_with_order((ab * w, dl)).unwrap().dot(&xm);
        // (a', w, i1, i2, b) -> (w, i1, a', i2, b)
        let t1 = permute_flat(t1, &[ab, w, 4, 4, dr], &[1, 2, 0, 3, 4], w * 4);
        let t2 = self.w1.forward.mul(&t1);
        // (o1, w1, a', i2, b) -> (w1, i2, o1, a', b)
        let t2 = permute_flat(t2, &[4, w1, ab, 4, dr], &[1, 3, 0, 2, 4], w1 * 4);
        let t3 = self.w2.forward.mul(&t2);
        // (o2, w2, o1, a', b) -> (a', o1, o2, w2, b)
        let t3 = permute_flat(t3, &[4, w2, 4, ab, dr], &[3, 2, 0, 1, 4], ab * 16);
        let (_, _, bb) = self.renv.dim();
        let r = self.renv.view().into_shape_with_order((w2 * dr, bb)).unwrap();
        let mut y = t3.dot(&r).into_shape_with_order(ab * 16 * bb).unwrap();
        if let Some((w, coeff)) = &self.projector {
            let overlap: C64 = coeff.iter().zip(x).map(|(c, v)| c * v).sum();
            y.zip_mut_with(coeff, |yi, c| *yi -= *w * overlap * c.conj());
        }
        y
    }
}

struct Sweeper<'a> {
    ops: Vec<SiteOp>,
    psi: TensorTrain,
    lenv: Vec<Array3<C64>>,
    renv: Vec<Array3<C64>>,
    lid: Vec<Array1<C64>>,
    rid: Vec<Array1<C64>>,
    opts: &'a DmrgOptions,
    local_residual: f64,
    matvecs: usize,
}

fn trivial_env() -> Array3<C64> {
    Array3::from_elem((1, 1, 1), ONE)
}

fn site_identity() -> [C64; 4] {
    TRACE_VEC.map(|x| x * std::f64::consts::FRAC_1_SQRT_2)
}

impl<'a> Sweeper<'a> {
    fn new(e: &'a SuperoperatorMpo, opts: &'a DmrgOptions) -> Result<Self> {
        let l = e.len();
        let mut rng = stream_rng(opts.seed, l as u64);
        let mut tensors = Vec::with_capacity(l);
        let bond = |j: usize| -> usize {
            let edge = j.min(l - j) as u32;
            opts.init_bond.min(opts.bond_dim).min(4usize.saturating_pow(edge)).max(1)
        };
        for j in 0..l {
            let (dl, dr) = (bond(j), bond(j + 1));
            tensors.push(Array3::from_shape_fn((dl, 4, dr), |_| {
                C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            }));
        }
        let mut psi = TensorTrain { tensors, center: 0, d: 4 };
        psi.canonicalize(0)?;
        let n = psi.norm_sqr().sqrt();
        psi.scale(C64::new(1.0 / n, 0.0));
        let ops = e.train.tensors.iter().map(SiteOp::new).collect();
        let mut s = Self {
            ops,
            psi,
            lenv: vec![trivial_env(); l + 1],
            renv: vec![trivial_env(); l + 1],
            lid: vec![Array1::from_elem(1, ONE); l + 1],
            rid: vec![Array1::from_elem(1, ONE); l + 1],
            opts,
            local_residual: 0.0,
            matvecs: 0,
        };
        for j in (2..l).rev() {
            s.update_right(j);
        }
        Ok(s)
    }

    fn update_left(&mut self, j: usize) {
        let a = &self.psi.tensors[j];
        self.lenv[j + 1] = grow_left(&self.lenv[j], a, &self.ops[j]);
        self.lid[j + 1] = self.lid[j].dot(&transfer(a, &site_identity()));
    }

    fn update_right(&mut self, j: usize) {
        let b = &self.psi.tensors[j];
        self.renv[j] = grow_right(&self.renv[j + 1], b, &self.ops[j]);
        self.rid[j] = transfer(b, &site_identity()).dot(&self.rid[j + 1]);
    }

    fn solve(&self, j: usize) -> Result<(LocalEigen, (usize, usize))> {
        let theta = self.psi.two_site(j);
        let (dl, _, _, dr) = theta.dim();
        let projector = (self.opts.w != 0.0).then(|| {
            let t = site_identity();
            let (lid, rid) = (&self.lid[j], &self.rid[j + 2]);
            let coeff = Array1::from_shape_fn(dl * 16 * dr, |idx| {
                let (a, rest) = (idx / (16 * dr), idx % (16 * dr));
                let (i1, i2, b) = (rest / (4 * dr), (rest / dr) % 4, rest % dr);
                lid[a] * t[i1] * t[i2] * rid[b]
            });
            (self.opts.w, coeff)
        });
        let block = BlockOperator {
            lenv: &self.lenv[j],
            renv: &self.renv[j + 2],
            w1: &self.ops[j],
            w2: &self.ops[j + 1],
            dl,
            dr,
            projector,
        };
        let dim = block.dim();
        let start = theta.into_shape_with_order(dim).unwrap();
        let eig = if dim <= self.opts.dense_local_max {
            largest_real_dense(&dense_from_map(dim, |x| block.apply(x)))?
        } else {
            largest_real_arnoldi(|x| block.apply(x), &start, self.opts.arnoldi)?
        };
        Ok((eig, (dl, dr)))
    }

    fn step(&mut self, j: usize, center_right: bool) -> Result<C64> {
        let (eig, (dl, dr)) = self.solve(j)?;
        self.local_residual = self.local_residual.max(eig.residual);
        self.matvecs += eig.matvecs;
        let theta = eig.vector.into_shape_with_order((dl, 4, 4, dr)).unwrap();
        self.psi
            .split_two_site(j, &theta, self.opts.bond_dim, self.opts.svd_floor, center_right)?;
        let n = self.psi.norm_sqr().sqrt();
        self.psi.scale(C64::new(1.0 / n, 0.0));
        if center_right {
            self.update_left(j);
        } else {
            self.update_right(j + 1);
        }
        Ok(eig.value)
    }

    fn sweep(&mut self) -> Result<C64> {
        let l = self.psi.len();
        self.local_residual = 0.0;
        for j in 0..l - 1 {
            self.step(j, true)?;
        }
        let mut value = C64::new(0.0, 0.0);
        for j in (0..l - 1).rev() {
            value = self.step(j, false)?;
        }
        Ok(value)
    }
}

/// Two-site DMRG for the eigenpair of E′ = E − w|Î⟩⟩⟨⟨Î| with largest real part,
/// Î the identity normalized to ⟨⟨Î|Î⟩⟩ = 1.
pub fn quasi_steady_state(e: &SuperoperatorMpo, opts: &DmrgOptions) -> Result<(GapResult, VectorizedMps)> {
    if e.len() < 2 {
        return config("DMRG needs at least two sites");
    }
    if opts.bond_dim == 0 || opts.init_bond == 0 {
        return config("bond dimensions must be at least 1");
    }
    if opts.w < 0.0 || !opts.w.is_finite() {
        return config("deflation weight must be finite and non-negative");
    }
    if opts.max_sweeps < opts.min_sweeps.max(1) {
        return config("max_sweeps must be at least min_sweeps and at least 1");
    }
    let mut sweeper = Sweeper::new(e, opts)?;
    let mut previous: Option<C64> = None;
    let mut last_change = f64::INFINITY;
    let mut converged = false;
    let mut sweeps = 0;
    let mut lambda = C64::new(0.0, 0.0);
    while sweeps < opts.max_sweeps {
        lambda = sweeper.sweep()?;
        sweeps += 1;
        if let Some(prev) = previous {
            last_change = (lambda - prev).norm();
        }
        previous = Some(lambda);
        if sweeps >= opts.min_sweeps && last_change <= opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!(
            "DMRG at L={} p={} not converged after {sweeps} sweeps (|Δλ| = {last_change:e})",
            e.len(),
            e.params.p()
        );
    }
    let state = VectorizedMps(sweeper.psi);
    let (epsilon1, tau) = exponent_and_tau(lambda);
    let result = GapResult {
        l: e.len(),
        p: e.params.p(),
        theta: e.params.theta,
        bond_dim: opts.bond_dim,
        d_o: e.max_bond(),
        w: opts.w,
        lambda,
        epsilon1,
        tau,
        converged,
        sweeps,
        last_change,
        max_bond: state.0.max_bond(),
        absorbing_overlap: state.absorbing_overlap(),
        compression_residual: e.residual,
        local_residual: sweeper.local_residual,
        matvecs: sweeper.matvecs,
    };
    Ok((result, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dmrg::{build_superoperator, DEFAULT_D_O};
    use crate::model::ModelParams;
    use crate::oracle::{dense_superoperator, spectrum_by_real_part};
    use std::f64::consts::PI;

    fn small_opts() -> DmrgOptions {
        DmrgOptions {
            bond_dim: 64,
            ..Default::default()
        }
    }

    #[test]
    fn block_operator_matches_dense_superoperator() {
        // with the full bond space the block operator is E in a unitary change of basis
        let params = ModelParams::new(0.75 * PI, 0.3).unwrap();
        let e = build_superoperator(&params, 3, DEFAULT_D_O).unwrap();
        let opts = DmrgOptions { w: 0.0, init_bond: 16, ..small_opts() };
        let sweeper = Sweeper::new(&e, &opts).unwrap();
        let block = BlockOperator {
            lenv: &sweeper.lenv[0],
            renv: &sweeper.renv[2],
            w1: &sweeper.ops[0],
            w2: &sweeper.ops[1],
            dl: 1,
            dr: sweeper.psi.tensors[1].dim().2,
            projector: None,
        };
        let m = dense_from_map(block.dim(), |x| block.apply(x));
        let mut got = spectrum_by_real_part(&m).unwrap();
        let mut want = spectrum_by_real_part(&dense_superoperator(&params, 3).unwrap()).unwrap();
        let key = |v: &C64| (v.re * 1e6).round() as i64 * 1_000_000_000 + (v.im * 1e6).round() as i64;
        got.sort_by_key(key);
        want.sort_by_key(key);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).norm() < 1e-9, "{a} vs {b}");
        }
    }

    fn dense_pair(params: &ModelParams, l: usize) -> (C64, C64) {
        let vals = spectrum_by_real_part(&dense_superoperator(params, l).unwrap()).unwrap();
        (vals[0], vals[1])
    }

    #[test]
    fn slowest_mode_matches_dense() {
        for (theta, p) in [(0.75 * PI, 0.3), (PI, 0.4), (1.3, 0.6)] {
            let params = ModelParams::new(theta, p).unwrap();
            for l in 2..=4 {
                let e = build_superoperator(&params, l, DEFAULT_D_O).unwrap();
                let (lead, second) = dense_pair(&params, l);
                assert!((lead - ONE).norm() < 1e-12);
                let (gap, state) = quasi_steady_state(&e, &small_opts()).unwrap();
                assert!(gap.converged, "θ={theta} p={p} L={l}");
                assert!((gap.lambda.re - second.re).abs() < 1e-8, "θ={theta} p={p} L={l}: {} vs {second}", gap.lambda);
                assert!((gap.lambda.im.abs() - second.im.abs()).abs() < 1e-8);
                assert!((gap.epsilon1.re - second.ln().re).abs() < 1e-8);
                assert!(gap.epsilon1.re < 0.0 && gap.tau > 0.0);
                assert!(gap.absorbing_overlap < 0.999);
                assert!((state.0.norm_sqr() - 1.0).abs() < 1e-12);
                let (steady, _) = quasi_steady_state(&e, &DmrgOptions { w: 0.0, ..small_opts() }).unwrap();
                assert!(exponent_and_tau(steady.lambda).0.norm() < 1e-10);
            }
        }
    }

    #[test]
    fn full_reset_has_maximal_gap() {
        let params = ModelParams::new(1.1, 1.0).unwrap();
        let e = build_superoperator(&params, 2, DEFAULT_D_O).unwrap();
        let (_, second) = dense_pair(&params, 2);
        assert!(second.norm() < 1e-12);
        let (gap, _) = quasi_steady_state(&e, &small_opts()).unwrap();
        assert!(gap.lambda.norm() < 1e-6, "{}", gap.lambda);
        assert!(gap.tau >= 0.0 && gap.tau < 0.1);
    }

    #[test]
    fn log_branch_and_tau() {
        let (eps, tau) = exponent_and_tau(C64::new(-0.5, 0.0));
        assert!((eps.im - PI).abs() < 1e-15);
        assert!((tau - 1.0 / 2f64.ln()).abs() < 1e-15);
        assert_eq!(exponent_and_tau(C64::new(0.0, 0.0)).1, 0.0);
        assert_eq!(exponent_and_tau(C64::new(1.0, 0.0)).1, f64::INFINITY);
    }

    #[test]
    fn rejects_bad_options() {
        let e = build_superoperator(&ModelParams::new(PI, 0.3).unwrap(), 2, DEFAULT_D_O).unwrap();
        let bad = [
            DmrgOptions { bond_dim: 0, ..small_opts() },
            DmrgOptions { w: -1.0, ..small_opts() },
            DmrgOptions { min_sweeps: 5, max_sweeps: 3, ..small_opts() },
        ];
        for o in bad {
            assert!(quasi_steady_state(&e, &o).is_err());
        }
    }
}
