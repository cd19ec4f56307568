//! Entanglement swapping and chain composition.
//!
//! A junction joins pair (a,b) and pair (c,d) by measuring (b,c) in either the
//! Bell basis or the modified Bell basis produced by XX evolution followed by a
//! computational readout. The three-pair swap is two junctions; an N-segment
//! chain is N−1 junctions contracted left to right; after each one a local
//! unitary on the left end maps the ideal-input outcome back to φ⁻.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::distribution::{BellDiagonalPair, Pauli, PauliFrame};
use crate::qmat::{self, pauli, BellState, DensityOperator, HermitianOperator, PureState};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwapMethod {
    Conventional,
    Dynamical,
}

impl SwapMethod {
    pub fn label(self) -> &'static str {
        match self {
            SwapMethod::Conventional => "conventional",
            SwapMethod::Dynamical => "dynamical",
        }
    }
}

impl std::str::FromStr for SwapMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conventional" => Ok(SwapMethod::Conventional),
            "dynamical" => Ok(SwapMethod::Dynamical),
            other => Err(Error::Config(format!("unknown method '{other}' (conventional|dynamical)"))),
        }
    }
}

/// Single-bond (J₂/2) σ^Xσ^X on a pair.
pub fn xx_hamiltonian(j2: f64) -> Result<HermitianOperator> {
    let m = pauli::x().kronecker(&pauli::x()) * C64::new(0.5 * j2, 0.0);
    HermitianOperator::new(m, vec![2, 2])
}

/// exp(−iH_XX T₃) applied to |11⟩, |00⟩, |10⟩, |01⟩ with T₃ = π/(2J₂).
pub fn modified_bell_basis(j2: f64) -> Result<[PureState; 4]> {
    if !(j2.is_finite() && j2 != 0.0) {
        return Err(Error::InvalidParameter(format!("J2 = {j2} must be finite and nonzero")));
    }
    let h = xx_hamiltonian(j2)?;
    let t3 = std::f64::consts::PI / (2.0 * j2);
    let evolve = |bits: &str| qmat::evolve_pure(&PureState::qubits(bits)?, &h, t3);
    Ok([evolve("11")?, evolve("00")?, evolve("10")?, evolve("01")?])
}

/// Junction measurement basis in outcome order 1..4.
pub fn measurement_basis(method: SwapMethod) -> [PureState; 4] {
    match method {
        SwapMethod::Conventional => BellState::ALL.map(|b| b.vector()),
        SwapMethod::Dynamical => modified_bell_basis(1.0).expect("unit coupling is valid"),
    }
}

/// Unnormalized state of (a,d) after projecting (b,c) of ρ_ab ⊗ ρ_cd onto |m⟩.
pub fn junction(left: &DMatrix<C64>, right: &DMatrix<C64>, m: &DVector<C64>) -> DMatrix<C64> {
    let mut out = DMatrix::<C64>::zeros(4, 4);
    for a in 0..2 {
        for d in 0..2 {
            for a2 in 0..2 {
                for d2 in 0..2 {
                    let mut acc = C64::new(0.0, 0.0);
                    for b in 0..2 {
                        for c in 0..2 {
                            let mbra = m[2 * b + c].conj();
                            for b2 in 0..2 {
                                for c2 in 0..2 {
                                    acc += mbra * m[2 * b2 + c2] * left[(2 * a + b, 2 * a2 + b2)] * right[(2 * c + d, 2 * c2 + d2)];
                                }
                            }
                        }
                    }
                    out[(2 * a + d, 2 * a2 + d2)] = acc;
                }
            }
        }
    }
    out
}

fn pure_projector(s: BellState) -> DMatrix<C64> {
    let v = s.vector();
    v.vector() * v.vector().adjoint()
}

fn bell_label_of(rho: &DMatrix<C64>) -> BellState {
    let w = BellDiagonalPair::bell_weights_of(rho);
    let k = (0..4).max_by(|&a, &b| w[a].total_cmp(&w[b])).expect("four weights");
    BellState::ALL[k]
}

/// Unitary L on the first qubit with (L ⊗ I)|ψ⟩ ∝ |φ⁻⟩, for the maximally
/// entangled pure state `ideal` (possibly unnormalized). The first qubit is
/// never measured again, so correcting it leaves later junctions untouched.
fn left_correction(ideal: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let k = (0..4).max_by(|&a, &b| ideal[(a, a)].re.total_cmp(&ideal[(b, b)].re)).expect("four entries");
    let col = ideal.column(k);
    let norm = col.norm();
    let psi = DMatrix::from_fn(2, 2, |a, d| col[2 * a + d] / norm);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let phi = DMatrix::from_row_slice(2, 2, &[C64::new(h, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(-h, 0.0)]);
    let inv = psi.try_inverse().ok_or_else(|| Error::Invariant("ideal junction output is not maximally entangled".into()))?;
    Ok(phi * inv)
}

fn apply_first(rho: &DMatrix<C64>, op: &DMatrix<C64>) -> DMatrix<C64> {
    let u = op.kronecker(&DMatrix::<C64>::identity(2, 2));
    &u * rho * u.adjoint()
}

fn apply_second(rho: &DMatrix<C64>, op: &DMatrix<C64>) -> DMatrix<C64> {
    let u = DMatrix::<C64>::identity(2, 2).kronecker(op);
    &u * rho * u.adjoint()
}

fn frame_for(op_from: BellState) -> PauliFrame {
    let family = matches!(op_from, BellState::PsiPlus | BellState::PsiMinus);
    let sign = matches!(op_from, BellState::PhiPlus | BellState::PsiPlus);
    let second = match (family, sign) {
        (false, false) => Pauli::I,
        (true, false) => Pauli::X,
        (false, true) => Pauli::Z,
        (true, true) => Pauli::Y,
    };
    PauliFrame { first: Pauli::I, second }
}

#[derive(Debug, Clone, Serialize)]
pub struct SwapResult {
    /// (i, j), 1-based: i for the left junction (8,1), j for the right one (2,9).
    pub outcome_pair: (usize, usize),
    pub probability: f64,
    /// Frame lookup: the Bell state ideal inputs would produce for this outcome.
    pub frame: BellState,
    /// Weights after correcting `frame` to φ⁻ on the right end.
    pub corrected_state: BellDiagonalPair,
}

#[derive(Debug, Clone, Serialize)]
pub struct SwapReport {
    pub method: SwapMethod,
    pub outcomes: Vec<SwapResult>,
    /// True when every input is rank 2 on {φ⁻, ψ⁻}, where the polynomial laws apply.
    pub closed_form: bool,
    /// Largest weight difference between corrected outcome states.
    pub outcome_spread: f64,
}

impl SwapReport {
    pub fn corrected(&self) -> BellDiagonalPair {
        self.outcomes[0].corrected_state
    }

    pub fn frame_table(&self) -> [[BellState; 4]; 4] {
        let mut t = [[BellState::PhiPlus; 4]; 4];
        for r in &self.outcomes {
            t[r.outcome_pair.1 - 1][r.outcome_pair.0 - 1] = r.frame;
        }
        t
    }
}

fn is_standard_rank2(p: &BellDiagonalPair) -> bool {
    p.support(1e-14).iter().all(|b| matches!(b, BellState::PhiMinus | BellState::PsiMinus))
}

/// Swap of left (7,8), mid (1,2) and right (9,10) pairs by measuring (8,1) and (2,9).
pub fn swap(left: &BellDiagonalPair, mid: &BellDiagonalPair, right: &BellDiagonalPair, method: SwapMethod) -> Result<SwapReport> {
    let basis = measurement_basis(method);
    let (l, m, r) = (left.to_density(), mid.to_density(), right.to_density());
    let ideal = pure_projector(BellState::PhiMinus);
    let mut outcomes = Vec::with_capacity(16);
    for (i, bi) in basis.iter().enumerate() {
        let first = junction(l.matrix(), m.matrix(), bi.vector());
        let ideal_first = junction(&ideal, &ideal, bi.vector());
        for (j, bj) in basis.iter().enumerate() {
            let raw = junction(&first, r.matrix(), bj.vector());
            let frame = bell_label_of(&junction(&ideal_first, &ideal, bj.vector()));
            let corrected = apply_second(&raw, &frame.correction_to(BellState::PhiMinus));
            let (density, probability) = DensityOperator::from_unnormalized(corrected, vec![2, 2])?;
            let mut corrected_state = BellDiagonalPair::from_density(&density)?;
            corrected_state.frame = frame_for(frame);
            outcomes.push(SwapResult { outcome_pair: (i + 1, j + 1), probability, frame, corrected_state });
        }
    }
    let reference = outcomes[0].corrected_state;
    let outcome_spread = outcomes.iter().map(|o| o.corrected_state.max_weight_diff(&reference)).fold(0.0, f64::max);
    let closed_form = [left, mid, right].iter().all(|p| is_standard_rank2(p));
    Ok(SwapReport { method, outcomes, closed_form, outcome_spread })
}

pub fn swap_conventional(left: &BellDiagonalPair, mid: &BellDiagonalPair, right: &BellDiagonalPair) -> Result<SwapReport> {
    swap(left, mid, right, SwapMethod::Conventional)
}

pub fn swap_dynamical(left: &BellDiagonalPair, mid: &BellDiagonalPair, right: &BellDiagonalPair) -> Result<SwapReport> {
    swap(left, mid, right, SwapMethod::Dynamical)
}

/// S = F(3 − 6F + 4F²).
pub fn conventional_fidelity(f: f64) -> f64 {
    f * (3.0 - 6.0 * f + 4.0 * f * f)
}

/// (S₁, S₂, S₃, S₄) of the dynamical swap.
pub fn dynamical_weights(f: f64) -> [f64; 4] {
    [
        f * (1.0 - 2.0 * f + 2.0 * f * f),
        2.0 * (1.0 - f) * f * f,
        1.0 - 3.0 * f + 4.0 * f * f - 2.0 * f * f * f,
        2.0 * (f - 1.0).powi(2) * f,
    ]
}

fn weights_ordered(f: f64) -> bool {
    let s = dynamical_weights(f);
    s.windows(2).all(|w| w[0] >= w[1] - 1e-15)
}

/// Smallest F, scanning down from 1 in steps of 1e-6, above which
/// S₁ ≥ S₂ ≥ S₃ ≥ S₄ holds throughout. Analytically 1/2: the gaps S₁ − S₂ and
/// S₃ − S₄ are multiples of (2F − 1)², and S₂ − S₃ = (1 − F)(2F − 1).
pub fn weight_ordering_threshold() -> f64 {
    let steps = 1_000_000;
    let mut last = 1.0;
    for k in (0..=steps).rev() {
        let f = k as f64 / steps as f64;
        if !weights_ordered(f) {
            break;
        }
        last = f;
    }
    last
}

/// Bell states carrying S₁..S₄ after correction to φ⁻.
pub const DYNAMICAL_WEIGHT_ORDER: [BellState; 4] = [BellState::PhiMinus, BellState::PsiMinus, BellState::PsiPlus, BellState::PhiPlus];

/// (1 + (2F − 1)^N)/2.
pub fn conventional_chain_fidelity(f: f64, n: u32) -> f64 {
    0.5 * (1.0 + (2.0 * f - 1.0).powi(n as i32))
}

/// Frame lookup for the conventional swap, indexed `[j-1][i-1]`.
pub const CONVENTIONAL_FRAMES: [[BellState; 4]; 4] = {
    use BellState::*;
    [
        [PhiMinus, PhiPlus, PsiMinus, PsiPlus],
        [PhiPlus, PhiMinus, PsiPlus, PsiMinus],
        [PsiMinus, PsiPlus, PhiMinus, PhiPlus],
        [PsiPlus, PsiMinus, PhiPlus, PhiMinus],
    ]
};

/// Frame lookup for the dynamical swap, indexed `[j-1][i-1]`.
pub const DYNAMICAL_FRAMES: [[BellState; 4]; 4] = {
    use BellState::*;
    [
        [PhiPlus, PhiMinus, PsiMinus, PsiPlus],
        [PhiMinus, PhiPlus, PsiPlus, PsiMinus],
        [PsiPlus, PsiMinus, PhiMinus, PhiPlus],
        [PsiMinus, PsiPlus, PhiPlus, PhiMinus],
    ]
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainSpec {
    pub n_segments: u32,
    pub fidelity: f64,
    pub method: SwapMethod,
}

impl ChainSpec {
    pub fn new(n_segments: u32, fidelity: f64, method: SwapMethod) -> Result<Self> {
        if n_segments == 0 || n_segments.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!("segment count {n_segments} must be odd")));
        }
        if !(0.0..=1.0).contains(&fidelity) {
            return Err(Error::InvalidParameter(format!("fidelity {fidelity} outside [0, 1]")));
        }
        Ok(Self { n_segments, fidelity, method })
    }

    /// Every segment is F|φ⁻⟩⟨φ⁻| + (1−F)|ψ⁻⟩⟨ψ⁻|.
    pub fn segment(&self) -> BellDiagonalPair {
        BellDiagonalPair::rank2(BellState::PhiMinus, BellState::PsiMinus, self.fidelity).expect("validated fidelity")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainResult {
    pub final_weights: [f64; 4],
    /// φ⁻ weight after the last frame correction.
    pub f_final: f64,
    /// Conventional closed form, when it applies.
    pub closed_form: Option<f64>,
    pub definition: &'static str,
}

/// Left-to-right contraction of the chain with outcome-averaged, frame-corrected
/// junctions.
pub fn chain_compose(spec: &ChainSpec) -> Result<ChainResult> {
    let segment = spec.segment();
    chain_compose_pairs(&segment, spec.n_segments, spec.method)
}

pub fn chain_compose_pairs(segment: &BellDiagonalPair, n_segments: u32, method: SwapMethod) -> Result<ChainResult> {
    if n_segments == 0 || n_segments.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!("segment count {n_segments} must be odd")));
    }
    let basis = measurement_basis(method);
    let seg = segment.to_density().into_matrix();
    let ideal = pure_projector(BellState::PhiMinus);
    let corrections = basis.iter().map(|m| left_correction(&junction(&ideal, &ideal, m.vector()))).collect::<Result<Vec<_>>>()?;

    let mut current = seg.clone();
    for _ in 1..n_segments {
        let mut next = DMatrix::<C64>::zeros(4, 4);
        for (m, c) in basis.iter().zip(&corrections) {
            next += apply_first(&junction(&current, &seg, m.vector()), c);
        }
        current = DensityOperator::from_unnormalized(next, vec![2, 2])?.0.into_matrix();
    }
    let final_weights = BellDiagonalPair::bell_weights_of(&current);
    let closed_form = (method == SwapMethod::Conventional && is_standard_rank2(segment))
        .then(|| conventional_chain_fidelity(segment.weight(BellState::PhiMinus), n_segments));
    Ok(ChainResult {
        final_weights,
        f_final: final_weights[BellState::PhiMinus.index()],
        closed_form,
        definition: "phi- weight after per-junction left-end correction, averaged over junction outcomes",
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn seg(f: f64) -> BellDiagonalPair {
        BellDiagonalPair::rank2(BellState::PhiMinus, BellState::PsiMinus, f).unwrap()
    }

    #[test]
    fn ordering_threshold_is_one_half() {
        assert_abs_diff_eq!(weight_ordering_threshold(), 0.5, epsilon = 1e-6);
    }

    #[test]
    fn conventional_examples() {
        assert_abs_diff_eq!(conventional_fidelity(1.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(conventional_fidelity(0.5), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(conventional_fidelity(0.9), 0.756, epsilon = 1e-12);
        let r = swap_conventional(&seg(0.9), &seg(0.9), &seg(0.9)).unwrap();
        assert!(r.closed_form);
        assert_abs_diff_eq!(r.corrected().weight(BellState::PhiMinus), 0.756, epsilon = 1e-12);
        assert_eq!(r.frame_table(), CONVENTIONAL_FRAMES);
    }

    #[test]
    fn dynamical_examples() {
        let s = dynamical_weights(0.9);
        for (a, b) in s.iter().zip([0.738, 0.162, 0.082, 0.018]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        let r = swap_dynamical(&seg(0.9), &seg(0.9), &seg(0.9)).unwrap();
        for (k, b) in DYNAMICAL_WEIGHT_ORDER.iter().enumerate() {
            assert_abs_diff_eq!(r.corrected().weight(*b), s[k], epsilon = 1e-12);
        }
        assert_eq!(r.frame_table(), DYNAMICAL_FRAMES);
        let one = swap_dynamical(&seg(1.0), &seg(1.0), &seg(1.0)).unwrap();
        assert_abs_diff_eq!(one.corrected().weight(BellState::PhiMinus), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn first_xx_mapping() {
        let m = modified_bell_basis(1.0).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        // |11⟩ → (−i/√2)(|00⟩ + i|11⟩)
        let v = m[0].vector();
        assert_abs_diff_eq!((v[0] - C64::new(0.0, -h)).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!((v[3] - C64::new(h, 0.0)).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn chains() {
        let r = chain_compose(&ChainSpec::new(1, 0.9, SwapMethod::Dynamical).unwrap()).unwrap();
        assert_abs_diff_eq!(r.f_final, 0.9, epsilon = 1e-12);
        let r = chain_compose(&ChainSpec::new(3, 0.9, SwapMethod::Conventional).unwrap()).unwrap();
        assert_abs_diff_eq!(r.f_final, 0.756, epsilon = 1e-12);
        let r = chain_compose(&ChainSpec::new(3, 0.9, SwapMethod::Dynamical).unwrap()).unwrap();
        assert_abs_diff_eq!(r.f_final, dynamical_weights(0.9)[0], epsilon = 1e-12);
        assert!(ChainSpec::new(4, 0.9, SwapMethod::Conventional).is_err());
    }
}
