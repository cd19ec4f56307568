//! Heralded entanglement distribution over one fiber segment.
//!
//! Both protocols are simulated through the [`field`](crate::field) branch
//! algebra; the closed forms below are kept only as oracles and for the fast
//! planner sweeps.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::field::{apply_loss, controlled_displace, csd_measure, CoherentBranchState, CsdDevice, CsdKind, LossChannel};
use crate::qmat::{bell_matrix, BellState, DensityOperator};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionParams {
    pub alpha_mag: f64,
    pub channel: LossChannel,
    /// Pulse amplitude |β|; a displacement frame that leaves every result unchanged.
    pub beta_mag: f64,
}

impl DistributionParams {
    pub fn new(alpha_mag: f64, channel: LossChannel, beta_mag: f64) -> Result<Self> {
        if !(alpha_mag > 0.0 && alpha_mag <= 1.0) {
            return Err(Error::InvalidParameter(format!("|alpha| = {alpha_mag} must lie in (0, 1]")));
        }
        if !(beta_mag.is_finite() && beta_mag >= 0.0) {
            return Err(Error::InvalidParameter(format!("|beta| = {beta_mag} must be finite and >= 0")));
        }
        Ok(Self { alpha_mag, channel, beta_mag })
    }

    /// |β| = 1, ℓ₀ = 25 km.
    pub fn standard(alpha_mag: f64, ell_km: f64) -> Result<Self> {
        Self::new(alpha_mag, LossChannel::with_default_attenuation(ell_km)?, 1.0)
    }

    pub fn alpha(&self) -> C64 {
        C64::new(0.0, self.alpha_mag)
    }

    pub fn beta(&self) -> C64 {
        C64::new(0.0, self.beta_mag)
    }

    pub fn eta(&self) -> f64 {
        self.channel.eta()
    }

    /// Two parameter sets describe the same segment if α and η agree.
    pub fn same_segment(&self, other: &DistributionParams) -> bool {
        (self.alpha_mag - other.alpha_mag).abs() <= 1e-12 && (self.eta() - other.eta()).abs() <= 1e-12
    }
}

/// A heralded state together with its success probability and origin.
#[derive(Debug, Clone)]
pub struct Heralded<T> {
    pub state: T,
    pub success_prob: f64,
    pub params: DistributionParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Pauli {
    #[default]
    I,
    X,
    Y,
    Z,
}

/// Pauli correction applied to each qubit of a pair to reach its labelling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PauliFrame {
    pub first: Pauli,
    pub second: Pauli,
}

/// Mixture of Bell states with weights in the order φ⁺, φ⁻, ψ⁺, ψ⁻.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellDiagonalPair {
    weights: [f64; 4],
    pub frame: PauliFrame,
}

/// Off-diagonal Bell-basis elements above this make a state non Bell-diagonal.
pub const BELL_DIAGONAL_TOL: f64 = 1e-10;

impl BellDiagonalPair {
    pub fn new(weights: [f64; 4]) -> Result<Self> {
        if weights.iter().any(|&w| w < -1e-12 || !w.is_finite()) {
            return Err(Error::InvalidParameter(format!("negative Bell weight in {weights:?}")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("Bell weights sum to {sum}")));
        }
        Ok(Self { weights: weights.map(|w| w.max(0.0)), frame: PauliFrame::default() })
    }

    /// F·|dominant⟩⟨dominant| + (1−F)·|other⟩⟨other|.
    pub fn rank2(dominant: BellState, other: BellState, f: f64) -> Result<Self> {
        if dominant == other {
            return Err(Error::InvalidParameter("rank-2 pair needs two distinct Bell states".into()));
        }
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::InvalidParameter(format!("fidelity {f} outside [0, 1]")));
        }
        let mut w = [0.0; 4];
        w[dominant.index()] = f;
        w[other.index()] = 1.0 - f;
        Self::new(w)
    }

    /// Reads the Bell weights of a two-qubit state, rejecting coherences.
    pub fn from_density(rho: &DensityOperator) -> Result<Self> {
        if rho.dims() != [2, 2] {
            return Err(Error::DimensionMismatch(format!("expected a qubit pair, got dims {:?}", rho.dims())));
        }
        let b = bell_matrix(rho.matrix());
        let mut off = 0.0f64;
        for r in 0..4 {
            for c in 0..4 {
                if r != c {
                    off = off.max(b[(r, c)].norm());
                }
            }
        }
        if off > BELL_DIAGONAL_TOL {
            return Err(Error::NotBellDiagonal { off_diagonal: off });
        }
        Self::new([b[(0, 0)].re, b[(1, 1)].re, b[(2, 2)].re, b[(3, 3)].re])
    }

    /// Bell weights of an arbitrary two-qubit state, ignoring coherences.
    pub fn bell_weights_of(rho: &DMatrix<C64>) -> [f64; 4] {
        let b = bell_matrix(rho);
        [b[(0, 0)].re, b[(1, 1)].re, b[(2, 2)].re, b[(3, 3)].re]
    }

    pub fn weights(&self) -> [f64; 4] {
        self.weights
    }

    pub fn weight(&self, b: BellState) -> f64 {
        self.weights[b.index()]
    }

    pub fn dominant(&self) -> (BellState, f64) {
        let mut best = (BellState::PhiPlus, self.weights[0]);
        for b in BellState::ALL {
            if self.weights[b.index()] > best.1 {
                best = (b, self.weights[b.index()]);
            }
        }
        best
    }

    pub fn fidelity(&self) -> f64 {
        self.dominant().1
    }

    pub fn rank(&self, tol: f64) -> usize {
        self.weights.iter().filter(|&&w| w > tol).count()
    }

    /// Bell states carrying weight above `tol`.
    pub fn support(&self, tol: f64) -> Vec<BellState> {
        BellState::ALL.into_iter().filter(|b| self.weights[b.index()] > tol).collect()
    }

    pub fn to_density(&self) -> DensityOperator {
        let mut m = DMatrix::<C64>::zeros(4, 4);
        for b in BellState::ALL {
            let v = b.vector();
            m += v.vector() * v.vector().adjoint() * C64::new(self.weights[b.index()], 0.0);
        }
        DensityOperator::new(m, vec![2, 2]).expect("Bell mixture is a valid density operator")
    }

    pub fn max_weight_diff(&self, other: &BellDiagonalPair) -> f64 {
        self.weights.iter().zip(other.weights).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// (1 + e^{−2|α|²(1−η)})/2.
pub fn pair_fidelity_closed_form(alpha_mag: f64, eta: f64) -> f64 {
    0.5 * (1.0 + (-2.0 * alpha_mag * alpha_mag * (1.0 - eta)).exp())
}

/// N₋/4 = (1 − e^{−8η|α|²})/4.
pub fn success_probability_closed_form(alpha_mag: f64, eta: f64) -> f64 {
    0.25 * (1.0 - (-8.0 * eta * alpha_mag * alpha_mag).exp())
}

fn device(p: &DistributionParams, kind: CsdKind) -> Result<CsdDevice> {
    let t = p.eta().sqrt();
    CsdDevice::new(kind, p.beta() * t, p.alpha() * t)
}

/// Two-qubit heralded state before reading it as Bell weights.
pub fn distribute_pair_density(p: &DistributionParams) -> Result<Heralded<DensityOperator>> {
    let s = CoherentBranchState::new(2, p.beta());
    let s = controlled_displace(&s, &[0], p.alpha())?;
    let s = apply_loss(&s, &p.channel)?;
    let s = controlled_displace(&s, &[1], p.alpha() * p.eta().sqrt())?;
    let report = csd_measure(&s, &device(p, CsdKind::Single)?)?;
    herald(report, *p)
}

fn herald(report: crate::field::CsdReport, params: DistributionParams) -> Result<Heralded<DensityOperator>> {
    let success = report.success();
    match &success.state {
        Some(state) => Ok(Heralded { state: state.clone(), success_prob: success.probability, params }),
        None => Err(Error::ImpossibleOutcome { probability: success.probability }),
    }
}

/// Heralded Bell pair between the two segment ends.
pub fn distribute_pair(p: &DistributionParams) -> Result<Heralded<BellDiagonalPair>> {
    let h = distribute_pair_density(p)?;
    Ok(Heralded { state: BellDiagonalPair::from_density(&h.state)?, success_prob: h.success_prob, params: h.params })
}

/// Four-atom state from two displacements per node and the double
/// discriminator. Qubit order: first node's two atoms, then the second node's.
pub fn distribute_quad(p: &DistributionParams) -> Result<Heralded<DensityOperator>> {
    let s = CoherentBranchState::new(4, p.beta());
    let s = controlled_displace(&s, &[0, 1], p.alpha())?;
    let s = apply_loss(&s, &p.channel)?;
    let s = controlled_displace(&s, &[2, 3], p.alpha() * p.eta().sqrt())?;
    let report = csd_measure(&s, &device(p, CsdKind::Double)?)?;
    herald(report, *p)
}

/// Pipeline fidelity f at each segment length.
pub fn fidelity_curve(alpha_mag: f64, ell_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    if ell_grid.is_empty() {
        return Err(Error::InvalidParameter("empty length grid".into()));
    }
    ell_grid
        .iter()
        .map(|&ell| {
            let h = distribute_pair(&DistributionParams::standard(alpha_mag, ell)?)?;
            Ok((ell, h.state.weight(BellState::PsiPlus)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn lossless_pair_is_pure() {
        let h = distribute_pair(&DistributionParams::standard(0.8, 0.0).unwrap()).unwrap();
        assert_abs_diff_eq!(h.state.weight(BellState::PsiPlus), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn pair_at_one_attenuation_length() {
        let h = distribute_pair(&DistributionParams::standard(1.0, 25.0).unwrap()).unwrap();
        let f = h.state.weight(BellState::PsiPlus);
        assert_abs_diff_eq!(f, pair_fidelity_closed_form(1.0, (-1.0f64).exp()), epsilon = 1e-10);
        assert_abs_diff_eq!(f, 0.6412268, epsilon = 1e-7);
        assert_abs_diff_eq!(h.success_prob, 0.2368236, epsilon = 1e-7);
        assert_abs_diff_eq!(h.state.weight(BellState::PhiPlus), 1.0 - f, epsilon = 1e-10);
        assert!(h.state.rank(1e-12) <= 2);
    }

    #[test]
    fn fidelity_monotone_and_saturating() {
        let grid: Vec<f64> = (0..=40).map(|k| 5.0 * k as f64).collect();
        let curve = fidelity_curve(1.0, &grid).unwrap();
        assert_abs_diff_eq!(curve[0].1, 1.0, epsilon = 1e-12);
        for w in curve.windows(2) {
            assert!(w[1].1 <= w[0].1 + 1e-12);
        }
        assert_abs_diff_eq!(curve.last().unwrap().1, 0.5676676, epsilon = 1e-3);
        assert_abs_diff_eq!(pair_fidelity_closed_form(1.0, 0.0), 0.5676676, epsilon = 1e-7);
        assert!(fidelity_curve(1.0, &[]).is_err());
    }

    #[test]
    fn success_decreases_with_length() {
        let mut last = 1.0;
        for ell in [0.0, 20.0, 50.0, 100.0, 200.0] {
            let h = distribute_pair(&DistributionParams::standard(0.5, ell).unwrap()).unwrap();
            assert!(h.success_prob < last);
            last = h.success_prob;
        }
    }

    #[test]
    fn quad_dominant_term() {
        let h = distribute_quad(&DistributionParams::standard(0.75, 5.0).unwrap()).unwrap();
        assert_abs_diff_eq!(h.state.trace(), 1.0, epsilon = 1e-12);
        // |φ⁻⟩₁₂|ψ⁺⟩₃₄ carries the largest diagonal weight 1/2
        let phi_m = BellState::PhiMinus.vector();
        let psi_p = BellState::PsiPlus.vector();
        let v = crate::qmat::tensor(&phi_m, &psi_p).unwrap();
        assert_abs_diff_eq!(h.state.expectation_pure(&v), 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(h.success_prob, success_probability_closed_form(0.75, (-0.2f64).exp()), epsilon = 1e-10);
    }

    #[test]
    fn params_validated() {
        assert!(DistributionParams::standard(0.0, 1.0).is_err());
        assert!(DistributionParams::standard(1.5, 1.0).is_err());
        assert!(DistributionParams::standard(0.5, -1.0).is_err());
    }

    #[test]
    fn bell_pair_checks() {
        assert!(BellDiagonalPair::new([0.5, 0.5, 0.1, 0.0]).is_err());
        let p = BellDiagonalPair::rank2(BellState::PhiMinus, BellState::PsiMinus, 0.9).unwrap();
        assert_eq!(p.dominant(), (BellState::PhiMinus, 0.9));
        let round = BellDiagonalPair::from_density(&p.to_density()).unwrap();
        assert!(round.max_weight_diff(&p) < 1e-14);
        let pure = DensityOperator::from_pure(&crate::qmat::PureState::qubits("00").unwrap());
        assert!(matches!(BellDiagonalPair::from_density(&pure), Err(Error::NotBellDiagonal { .. })));
    }
}
