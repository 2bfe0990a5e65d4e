use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use ndarray::{array, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{config, FqcpError, Result};
use crate::C64;

/// Reset probability, validated to lie in [0, 1].
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Probability(f64);

impl Probability {
    pub fn new(p: f64) -> Result<Self> {
        if p.is_finite() && (0.0..=1.0).contains(&p) {
            Ok(Self(p))
        } else {
            config(format!("probability {p} outside [0, 1]"))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Probability {
    type Error = FqcpError;
    fn try_from(p: f64) -> Result<Self> {
        Self::new(p)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

impl FromStr for Axis {
    type Err = FqcpError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" | "X" => Ok(Axis::X),
            "y" | "Y" => Ok(Axis::Y),
            other => config(format!("invalid rotation axis `{other}`")),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationVariant {
    #[default]
    Xy,
    AllX,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelVariant {
    #[default]
    ProbabilisticReset,
    AmplitudeDamping,
}

/// Which rotation axis each gate layer uses.
///
/// With `alternate_steps` the two sublattices swap axes on odd time steps, so
/// the drive has period two in time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AxisAssignment {
    pub odd_control: Axis,
    pub even_control: Axis,
    pub alternate_steps: bool,
}

impl Default for AxisAssignment {
    fn default() -> Self {
        Self {
            odd_control: Axis::X,
            even_control: Axis::Y,
            alternate_steps: true,
        }
    }
}

impl AxisAssignment {
    pub fn all_x() -> Self {
        Self {
            odd_control: Axis::X,
            even_control: Axis::X,
            alternate_steps: false,
        }
    }

    pub fn axis(&self, control: i64, step: usize) -> Axis {
        let odd = control.rem_euclid(2) == 1;
        let swap = self.alternate_steps && step % 2 == 1;
        if odd != swap {
            self.odd_control
        } else {
            self.even_control
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub theta: f64,
    pub p: Probability,
    #[serde(default)]
    pub rotation_variant: RotationVariant,
    #[serde(default)]
    pub channel_variant: ChannelVariant,
    #[serde(default)]
    pub skip_first_reset_layer: bool,
    #[serde(default)]
    pub axis_assignment: AxisAssignment,
}

impl ModelParams {
    pub fn new(theta: f64, p: f64) -> Result<Self> {
        let params = Self {
            theta,
            p: Probability::new(p)?,
            rotation_variant: RotationVariant::Xy,
            channel_variant: ChannelVariant::ProbabilisticReset,
            skip_first_reset_layer: false,
            axis_assignment: AxisAssignment::default(),
        };
        params.validate()?;
        Ok(params)
    }

    /// θ = π, where the dynamics maps bitstrings to bitstrings.
    pub fn classical_point(p: f64) -> Result<Self> {
        Self::new(PI, p)
    }

    /// θ = 3π/4, the quantum point studied at scale.
    pub fn quantum_point(p: f64) -> Result<Self> {
        Self::new(0.75 * PI, p)
    }

    pub fn with_variant(mut self, variant: RotationVariant) -> Self {
        self.rotation_variant = variant;
        self
    }

    pub fn with_channel(mut self, channel: ChannelVariant) -> Self {
        self.channel_variant = channel;
        self
    }

    pub fn with_skip_first_reset(mut self, skip: bool) -> Self {
        self.skip_first_reset_layer = skip;
        self
    }

    pub fn p(&self) -> f64 {
        self.p.get()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.theta.is_finite() || !(0.0..=2.0 * PI).contains(&self.theta) {
            return config(format!("theta {} outside [0, 2π]", self.theta));
        }
        Probability::new(self.p.get())?;
        Ok(())
    }

    pub fn is_classical(&self) -> bool {
        (self.theta - PI).abs() < 1e-12
    }

    pub fn axes(&self) -> AxisAssignment {
        match self.rotation_variant {
            RotationVariant::Xy => self.axis_assignment,
            RotationVariant::AllX => AxisAssignment::all_x(),
        }
    }

    pub fn axis(&self, control: i64, step: usize) -> Axis {
        self.axes().axis(control, step)
    }

    pub fn kraus(&self) -> Vec<Array2<C64>> {
        channel_kraus(self.channel_variant, self.p.get()).expect("validated probability")
    }

    /// Factor applied to linear observables when the first reset layer is skipped.
    pub fn reweight(&self) -> f64 {
        if self.skip_first_reset_layer {
            1.0 - self.p.get()
        } else {
            1.0
        }
    }
}

/// Reference directed-percolation exponents in one dimension.
pub struct DpConstants;

impl DpConstants {
    pub const THETA: f64 = 0.313686;
    pub const Z: f64 = 1.580745;
    pub const DELTA: f64 = 0.159464;
}

/// A contiguous run of integer site coordinates `first..first+len`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chain {
    pub first: i64,
    pub len: usize,
}

impl Chain {
    pub fn new(first: i64, len: usize) -> Result<Self> {
        if len == 0 {
            return config("chain must contain at least one site");
        }
        Ok(Self { first, len })
    }

    /// Sites `-half..=half`.
    pub fn symmetric(half: usize) -> Self {
        Self {
            first: -(half as i64),
            len: 2 * half + 1,
        }
    }

    /// The 4t+1 sites reachable from a seed at the origin in t steps.
    pub fn seed_cone(t: usize) -> Self {
        Self::symmetric(2 * t)
    }

    /// 4t+2 sites `-2t..=2t+1`, whose two central sites see no boundary for t steps.
    pub fn uniform(t: usize) -> Self {
        Self {
            first: -2 * t as i64,
            len: 4 * t + 2,
        }
    }

    /// An open chain of `len` sites around the origin; even lengths extend one site further right.
    pub fn open(len: usize) -> Self {
        Self {
            first: -((len as i64 - 1) / 2),
            len,
        }
    }

    pub fn last(&self) -> i64 {
        self.first + self.len as i64 - 1
    }

    pub fn contains(&self, r: i64) -> bool {
        r >= self.first && r <= self.last()
    }

    pub fn index(&self, r: i64) -> Option<usize> {
        self.contains(r).then(|| (r - self.first) as usize)
    }

    pub fn site(&self, index: usize) -> i64 {
        self.first + index as i64
    }

    pub fn sites(&self) -> impl Iterator<Item = i64> {
        self.first..=self.last()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    SingleSeed,
    UniformActive,
    CustomBitstring(Vec<i64>),
}

impl InitialState {
    /// Active sites of this state restricted to `chain`, validated.
    pub fn active_sites(&self, chain: &Chain) -> Result<Vec<i64>> {
        match self {
            InitialState::SingleSeed => {
                if !chain.contains(0) {
                    return config("single seed requires site 0 in the chain");
                }
                Ok(vec![0])
            }
            InitialState::UniformActive => Ok(chain.sites().collect()),
            InitialState::CustomBitstring(sites) => {
                let mut sorted = sites.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if let Some(r) = sorted.iter().find(|r| !chain.contains(**r)) {
                    return config(format!("active site {r} outside chain"));
                }
                Ok(sorted)
            }
        }
    }

    pub fn bits(&self, chain: &Chain) -> Result<Vec<bool>> {
        let active = self.active_sites(chain)?;
        let mut bits = vec![false; chain.len];
        for r in active {
            bits[chain.index(r).unwrap()] = true;
        }
        Ok(bits)
    }
}

pub fn rotation(axis: Axis, theta: f64) -> Array2<C64> {
    let c = C64::new((theta / 2.0).cos(), 0.0);
    let s = (theta / 2.0).sin();
    match axis {
        Axis::X => array![[c, C64::new(0.0, -s)], [C64::new(0.0, -s), c]],
        Axis::Y => array![[c, C64::new(-s, 0.0)], [C64::new(s, 0.0), c]],
    }
}

/// Controlled rotation in the basis |control target⟩, index 2·control + target.
pub fn gate_matrix(axis: Axis, theta: f64) -> Array2<C64> {
    let r = rotation(axis, theta);
    let mut g = Array2::<C64>::zeros((4, 4));
    g[[0, 0]] = C64::new(1.0, 0.0);
    g[[1, 1]] = C64::new(1.0, 0.0);
    for i in 0..2 {
        for j in 0..2 {
            g[[2 + i, 2 + j]] = r[[i, j]];
        }
    }
    g
}

/// Kraus operators of the single-site channel; zero operators are omitted.
pub fn channel_kraus(variant: ChannelVariant, p: f64) -> Result<Vec<Array2<C64>>> {
    Probability::new(p)?;
    let re = |x: f64| C64::new(x, 0.0);
    let z = re(0.0);
    let ops = match variant {
        ChannelVariant::ProbabilisticReset => vec![
            array![[re((1.0 - p).sqrt()), z], [z, re((1.0 - p).sqrt())]],
            array![[re(p.sqrt()), z], [z, z]],
            array![[z, re(p.sqrt())], [z, z]],
        ],
        ChannelVariant::AmplitudeDamping => vec![
            array![[re(1.0), z], [z, re((1.0 - p).sqrt())]],
            array![[z, re(p.sqrt())], [z, z]],
        ],
    };
    Ok(ops
        .into_iter()
        .filter(|k| k.iter().any(|x| x.norm() > 0.0))
        .collect())
}

/// Σ K†K − I, max-abs entry.
pub fn completeness_defect(kraus: &[Array2<C64>]) -> f64 {
    let mut acc = Array2::<C64>::zeros((2, 2));
    for k in kraus {
        acc = acc + k.t().mapv(|x| x.conj()).dot(k);
    }
    acc[[0, 0]] -= 1.0;
    acc[[1, 1]] -= 1.0;
    acc.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unitarity_defect(u: &Array2<C64>) -> f64 {
        let prod = u.t().mapv(|x| x.conj()).dot(u);
        let mut d: f64 = 0.0;
        for i in 0..prod.nrows() {
            for j in 0..prod.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                d = d.max((prod[[i, j]] - target).norm());
            }
        }
        d
    }

    #[test]
    fn zero_angle_is_identity() {
        let g = gate_matrix(Axis::X, 0.0);
        assert_eq!(g, Array2::from_diag(&ndarray::Array1::from_elem(4, C64::new(1.0, 0.0))));
    }

    #[test]
    fn y_rotation_branches_with_half_angle() {
        let theta = 0.75 * PI;
        let g = gate_matrix(Axis::Y, theta);
        // |10⟩ is index 2
        assert!((g[[2, 2]] - C64::new((3.0 * PI / 8.0).cos(), 0.0)).norm() < 1e-15);
        assert!((g[[3, 2]] - C64::new((3.0 * PI / 8.0).sin(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn x_pi_flips_with_phase() {
        let g = gate_matrix(Axis::X, PI);
        assert!((g[[3, 2]] - C64::new(0.0, -1.0)).norm() < 1e-15);
        assert!(g[[2, 2]].norm() < 1e-15);
        assert_eq!(g[[0, 0]], C64::new(1.0, 0.0));
        assert_eq!(g[[1, 1]], C64::new(1.0, 0.0));
    }

    #[test]
    fn gates_are_unitary() {
        for axis in [Axis::X, Axis::Y] {
            for k in 0..17 {
                let theta = 2.0 * PI * k as f64 / 16.0;
                assert!(unitarity_defect(&gate_matrix(axis, theta)) < 1e-14);
            }
        }
    }

    #[test]
    fn kraus_sets_are_complete() {
        for variant in [ChannelVariant::ProbabilisticReset, ChannelVariant::AmplitudeDamping] {
            for p in [0.0, 0.1, 0.3944, 0.9, 1.0] {
                assert!(completeness_defect(&channel_kraus(variant, p).unwrap()) < 1e-14);
            }
        }
    }

    #[test]
    fn zero_reset_is_identity_only() {
        let k = channel_kraus(ChannelVariant::ProbabilisticReset, 0.0).unwrap();
        assert_eq!(k.len(), 1);
    }

    #[test]
    fn out_of_range_probability_rejected() {
        assert!(channel_kraus(ChannelVariant::ProbabilisticReset, 1.5).is_err());
        assert!(ModelParams::new(1.0, -0.1).is_err());
        assert!(ModelParams::new(7.0, 0.1).is_err());
        assert!("z".parse::<Axis>().is_err());
    }

    #[test]
    fn all_x_overrides_assignment() {
        let params = ModelParams::new(1.0, 0.1).unwrap().with_variant(RotationVariant::AllX);
        for c in -3..4 {
            for step in 0..3 {
                assert_eq!(params.axis(c, step), Axis::X);
            }
        }
    }

    #[test]
    fn default_assignment_alternates_between_steps() {
        let a = AxisAssignment::default();
        assert_eq!(a.axis(1, 0), Axis::X);
        assert_eq!(a.axis(-1, 0), Axis::X);
        assert_eq!(a.axis(2, 0), Axis::Y);
        assert_eq!(a.axis(1, 1), Axis::Y);
        assert_eq!(a.axis(2, 1), Axis::X);
    }

    #[test]
    fn params_json_keys() {
        let params = ModelParams::quantum_point(0.3).unwrap();
        let v = serde_json::to_value(params).unwrap();
        for key in [
            "theta",
            "p",
            "rotation_variant",
            "channel_variant",
            "skip_first_reset_layer",
            "axis_assignment",
        ] {
            assert!(v.get(key).is_some(), "{key}");
        }
        let back: ModelParams = serde_json::from_value(v).unwrap();
        assert_eq!(back, params);
        let bad = serde_json::json!({"theta": 1.0, "p": 2.0});
        assert!(serde_json::from_value::<ModelParams>(bad).is_err());
    }

    #[test]
    fn dp_constants_consistent() {
        assert!((2.0 / DpConstants::Z - 1.265226).abs() < 1e-6);
    }

    #[test]
    fn chain_geometry() {
        let c = Chain::seed_cone(2);
        assert_eq!((c.first, c.last(), c.len), (-4, 4, 9));
        let u = Chain::uniform(2);
        assert_eq!((u.first, u.last(), u.len), (-4, 5, 10));
        let o = Chain::open(4);
        assert_eq!((o.first, o.last()), (-1, 2));
        assert_eq!(c.index(-4), Some(0));
        assert_eq!(c.index(5), None);
    }
}
