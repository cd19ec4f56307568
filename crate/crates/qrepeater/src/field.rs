//! Exact coherent-state algebra for a single optical pulse entangled with
//! atomic qubits and a loss environment.
//!
//! A state is a finite superposition of branches
//! `coeff · |qubits⟩ ⊗ |field⟩ ⊗ |env⟩` where both modes are coherent states, so
//! every inner product is closed form and no Fock truncation is needed. The
//! truncated-Fock path in [`fock_check`] exists only as an independent oracle.

use nalgebra::{DMatrix, DVector};

use crate::qmat::DensityOperator;
use crate::{Error, Result, C64};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
/// Rank tolerance for Gram orthonormalization.
pub const GRAM_RANK_TOL: f64 = 1e-10;
/// Two branches whose amplitudes agree this closely are merged.
const MERGE_TOL: f64 = 1e-14;

/// ⟨γ|δ⟩ = exp(−|γ|²/2 − |δ|²/2 + γ*δ).
pub fn coherent_overlap(gamma: C64, delta: C64) -> C64 {
    (-0.5 * gamma.norm_sqr() - 0.5 * delta.norm_sqr() + gamma.conj() * delta).exp()
}

/// Photon-number amplitudes ⟨n|γ⟩ for n = 0..=cutoff.
pub fn fock_amplitudes(gamma: C64, cutoff: usize) -> DVector<C64> {
    let mut out = DVector::zeros(cutoff + 1);
    let mut term = C64::new((-0.5 * gamma.norm_sqr()).exp(), 0.0);
    out[0] = term;
    for n in 1..=cutoff {
        term = term * gamma / (n as f64).sqrt();
        out[n] = term;
    }
    out
}

/// Single-qubit state label. X-basis labels appear after a controlled
/// displacement re-expresses a target in the σ^X eigenbasis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QubitLabel {
    Zero,
    One,
    Plus,
    Minus,
}

impl QubitLabel {
    pub fn amplitudes(self) -> [C64; 2] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            QubitLabel::Zero => [ONE, ZERO],
            QubitLabel::One => [ZERO, ONE],
            QubitLabel::Plus => [C64::new(h, 0.0), C64::new(h, 0.0)],
            QubitLabel::Minus => [C64::new(h, 0.0), C64::new(-h, 0.0)],
        }
    }

    /// σ^X decomposition: (X eigenvalue, amplitude) pairs.
    fn x_expansion(self) -> Vec<(f64, C64)> {
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        match self {
            QubitLabel::Zero => vec![(1.0, h), (-1.0, h)],
            QubitLabel::One => vec![(1.0, h), (-1.0, -h)],
            QubitLabel::Plus => vec![(1.0, ONE)],
            QubitLabel::Minus => vec![(-1.0, ONE)],
        }
    }

    pub fn symbol(self) -> char {
        match self {
            QubitLabel::Zero => '0',
            QubitLabel::One => '1',
            QubitLabel::Plus => '+',
            QubitLabel::Minus => '-',
        }
    }
}

/// Computational-basis vector of a product of labels (first label = most significant qubit).
pub fn qubit_vector(labels: &[QubitLabel]) -> DVector<C64> {
    let mut v = DVector::from_element(1, ONE);
    for l in labels {
        let a = l.amplitudes();
        v = v.kronecker(&DVector::from_row_slice(&a));
    }
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub qubits: Vec<QubitLabel>,
    pub field: C64,
    pub env: C64,
    pub coeff: C64,
}

impl Branch {
    fn same_slot(&self, other: &Branch) -> bool {
        self.qubits == other.qubits
            && (self.field - other.field).norm() <= MERGE_TOL * (1.0 + self.field.norm())
            && (self.env - other.env).norm() <= MERGE_TOL * (1.0 + self.env.norm())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherentBranchState {
    qubit_count: usize,
    branches: Vec<Branch>,
}

impl CoherentBranchState {
    /// All qubits in |0⟩, pulse in |field⟩, environment in vacuum.
    pub fn new(qubit_count: usize, field: C64) -> Self {
        let branch = Branch { qubits: vec![QubitLabel::Zero; qubit_count], field, env: ZERO, coeff: ONE };
        Self { qubit_count, branches: vec![branch] }
    }

    pub fn from_branches(qubit_count: usize, branches: Vec<Branch>) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::InvalidParameter("state needs at least one branch".into()));
        }
        if let Some(b) = branches.iter().find(|b| b.qubits.len() != qubit_count) {
            return Err(Error::DimensionMismatch(format!(
                "branch has {} qubit labels, state has {qubit_count}",
                b.qubits.len()
            )));
        }
        Ok(Self { qubit_count, branches })
    }

    pub fn qubit_count(&self) -> usize {
        self.qubit_count
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    fn qubit_vectors(&self) -> Vec<DVector<C64>> {
        self.branches.iter().map(|b| qubit_vector(&b.qubits)).collect()
    }

    /// Σ_ij c_i c_j* ⟨γ_j|γ_i⟩⟨ε_j|ε_i⟩⟨q_j|q_i⟩.
    pub fn norm_sqr(&self) -> f64 {
        let qv = self.qubit_vectors();
        let mut total = ZERO;
        for (i, bi) in self.branches.iter().enumerate() {
            for (j, bj) in self.branches.iter().enumerate() {
                total += bi.coeff
                    * bj.coeff.conj()
                    * coherent_overlap(bj.field, bi.field)
                    * coherent_overlap(bj.env, bi.env)
                    * qv[j].dotc(&qv[i]);
            }
        }
        total.re
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm_sqr();
        if n <= 1e-300 {
            return Err(Error::NotNormalized { norm: n.max(0.0).sqrt() });
        }
        let s = 1.0 / n.sqrt();
        for b in &mut self.branches {
            b.coeff *= s;
        }
        Ok(self)
    }

    fn merged(branches: Vec<Branch>, qubit_count: usize) -> Self {
        let mut out: Vec<Branch> = Vec::with_capacity(branches.len());
        for b in branches {
            if let Some(existing) = out.iter_mut().find(|e| e.same_slot(&b)) {
                existing.coeff += b.coeff;
            } else {
                out.push(b);
            }
        }
        out.retain(|b| b.coeff.norm() > 1e-300);
        Self { qubit_count, branches: out }
    }

    pub fn max_field_amplitude(&self) -> f64 {
        self.branches.iter().map(|b| b.field.norm()).fold(0.0, f64::max)
    }
}

/// Fiber segment modeled as a beam splitter into an environment mode.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossChannel {
    pub ell_km: f64,
    pub attenuation_km: f64,
}

impl LossChannel {
    pub const DEFAULT_ATTENUATION_KM: f64 = 25.0;

    pub fn new(ell_km: f64, attenuation_km: f64) -> Result<Self> {
        if !(ell_km.is_finite() && ell_km >= 0.0) {
            return Err(Error::InvalidParameter(format!("segment length {ell_km} km must be finite and >= 0")));
        }
        if !(attenuation_km.is_finite() && attenuation_km > 0.0) {
            return Err(Error::InvalidParameter(format!("attenuation length {attenuation_km} km must be > 0")));
        }
        Ok(Self { ell_km, attenuation_km })
    }

    pub fn with_default_attenuation(ell_km: f64) -> Result<Self> {
        Self::new(ell_km, Self::DEFAULT_ATTENUATION_KM)
    }

    pub fn eta(&self) -> f64 {
        (-self.ell_km / self.attenuation_km).exp()
    }
}

/// Applies D(amount·σ^X) on each target sequentially; branches split along the
/// X eigenbasis of the targets.
pub fn controlled_displace(state: &CoherentBranchState, targets: &[usize], amount: C64) -> Result<CoherentBranchState> {
    if targets.is_empty() {
        return Err(Error::InvalidParameter("controlled displacement needs at least one target".into()));
    }
    if amount.re.abs() > 1e-15 * amount.norm().max(1.0) {
        return Err(Error::NonImaginaryDisplacement { re: amount.re, im: amount.im });
    }
    for (pos, &t) in targets.iter().enumerate() {
        if t >= state.qubit_count || targets[..pos].contains(&t) {
            return Err(Error::InvalidSubsystem { index: t, count: state.qubit_count });
        }
    }
    if amount == ZERO {
        return Ok(state.clone());
    }
    let mut current = state.branches.clone();
    for &t in targets {
        let mut next = Vec::with_capacity(current.len() * 2);
        for b in &current {
            for (s, amp) in b.qubits[t].x_expansion() {
                let mut nb = b.clone();
                nb.qubits[t] = if s > 0.0 { QubitLabel::Plus } else { QubitLabel::Minus };
                nb.field += amount * s;
                nb.coeff *= amp;
                next.push(nb);
            }
        }
        current = next;
    }
    Ok(CoherentBranchState::merged(current, state.qubit_count))
}

/// Beam-splitter loss: field → √η·field, environment ← √(1−η)·field.
pub fn apply_loss(state: &CoherentBranchState, ch: &LossChannel) -> Result<CoherentBranchState> {
    let eta = ch.eta();
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidParameter(format!("transmittance {eta} outside (0, 1]")));
    }
    if state.branches.iter().any(|b| b.env != ZERO) {
        return Err(Error::InvalidParameter("environment mode already populated; one loss event per pulse".into()));
    }
    let (t, r) = (eta.sqrt(), (1.0 - eta).sqrt());
    let branches = state
        .branches
        .iter()
        .map(|b| Branch { qubits: b.qubits.clone(), field: b.field * t, env: b.field * r, coeff: b.coeff })
        .collect();
    Ok(CoherentBranchState::merged(branches, state.qubit_count))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// (|center+offset⟩ ± |center−offset⟩)/√(2N±), N± = 1 ± e^{−2|offset|²}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatSpec {
    pub center: C64,
    pub offset: C64,
    pub parity: Parity,
}

impl CatSpec {
    pub fn new(center: C64, offset: C64, parity: Parity) -> Result<Self> {
        if parity == Parity::Odd && offset.norm() == 0.0 {
            return Err(Error::DegenerateCat);
        }
        Ok(Self { center, offset, parity })
    }

    pub fn normalization(&self) -> f64 {
        let e = (-2.0 * self.offset.norm_sqr()).exp();
        match self.parity {
            Parity::Even => 1.0 + e,
            Parity::Odd => 1.0 - e,
        }
    }
}

/// Finite linear combination Σ c_k |γ_k⟩ of coherent states.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldVector {
    pub terms: Vec<(C64, C64)>,
}

impl FieldVector {
    pub fn coherent(amplitude: C64) -> Self {
        Self { terms: vec![(ONE, amplitude)] }
    }

    pub fn inner(&self, other: &FieldVector) -> C64 {
        let mut acc = ZERO;
        for &(ca, ga) in &self.terms {
            for &(cb, gb) in &other.terms {
                acc += ca.conj() * cb * coherent_overlap(ga, gb);
            }
        }
        acc
    }

    /// ⟨self|γ⟩.
    pub fn overlap_coherent(&self, gamma: C64) -> C64 {
        self.terms.iter().map(|&(c, g)| c.conj() * coherent_overlap(g, gamma)).sum()
    }

    pub fn fock(&self, cutoff: usize) -> DVector<C64> {
        let mut v = DVector::zeros(cutoff + 1);
        for &(c, g) in &self.terms {
            v += fock_amplitudes(g, cutoff) * c;
        }
        v
    }
}

impl From<CatSpec> for FieldVector {
    fn from(cat: CatSpec) -> Self {
        let s = match cat.parity {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        };
        let k = 1.0 / (2.0 * cat.normalization()).sqrt();
        Self {
            terms: vec![(C64::new(k, 0.0), cat.center + cat.offset), (C64::new(s * k, 0.0), cat.center - cat.offset)],
        }
    }
}

impl From<C64> for FieldVector {
    fn from(amplitude: C64) -> Self {
        Self::coherent(amplitude)
    }
}

pub fn gram_matrix(basis: &[FieldVector]) -> DMatrix<C64> {
    DMatrix::from_fn(basis.len(), basis.len(), |r, c| basis[r].inner(&basis[c]))
}

/// Pivoted Cholesky orthonormalization. Returns the coefficient matrix `w`
/// (row m holds the coefficients of orthonormal vector e_m over the basis) and
/// the pivot order actually kept.
fn orthonormalize(gram: &DMatrix<C64>) -> (DMatrix<C64>, Vec<usize>) {
    let n = gram.nrows();
    let mut rows: Vec<DVector<C64>> = Vec::new();
    let mut kept = Vec::new();
    loop {
        // residual norm² of each unused candidate after removing the current span
        let mut best: Option<(usize, f64)> = None;
        for k in (0..n).filter(|k| !kept.contains(k)) {
            let mut res = gram[(k, k)].re;
            for w in &rows {
                res -= proj(w, gram, k).norm_sqr();
            }
            if best.is_none_or(|(_, r)| res > r) {
                best = Some((k, res));
            }
        }
        let Some((k, res)) = best else { break };
        if res <= GRAM_RANK_TOL {
            break;
        }
        // e_new ∝ b_k − Σ_m ⟨e_m|b_k⟩ e_m
        let mut w_new = DVector::<C64>::zeros(n);
        w_new[k] = ONE;
        for w in &rows {
            let p = proj(w, gram, k);
            w_new -= w * p;
        }
        let norm = (w_new.dotc(&(gram * &w_new))).re.sqrt();
        rows.push(w_new / C64::new(norm, 0.0));
        kept.push(k);
    }
    let w = DMatrix::from_fn(rows.len(), n, |m, k| rows[m][k]);
    (w, kept)
}

/// ⟨e_w|b_k⟩ = Σ_l w_l* G_lk.
fn proj(w: &DVector<C64>, gram: &DMatrix<C64>, k: usize) -> C64 {
    (0..w.len()).map(|l| w[l].conj() * gram[(l, k)]).sum()
}

/// Qubit ⊗ field reduced state with the field expressed in an orthonormalized
/// span of the requested basis.
#[derive(Debug, Clone)]
pub struct ReducedState {
    pub density: DensityOperator,
    /// Basis indices used for orthonormalization, in pivot order.
    pub kept: Vec<usize>,
    /// Indices discarded as linearly dependent.
    pub dropped: Vec<usize>,
    /// Row m: coefficients of orthonormal vector e_m over the supplied basis.
    pub coefficients: DMatrix<C64>,
    basis: Vec<FieldVector>,
}

impl ReducedState {
    /// Orthonormal field vectors in photon-number representation.
    pub fn fock_isometry(&self, cutoff: usize) -> DMatrix<C64> {
        let fock: Vec<DVector<C64>> = self.basis.iter().map(|b| b.fock(cutoff)).collect();
        let r = self.coefficients.nrows();
        DMatrix::from_fn(cutoff + 1, r, |n, m| (0..fock.len()).map(|k| self.coefficients[(m, k)] * fock[k][n]).sum())
    }

    /// The reduced state re-expressed on qubits ⊗ Fock(cutoff).
    pub fn in_fock_basis(&self, cutoff: usize) -> Result<DensityOperator> {
        let iso = self.fock_isometry(cutoff);
        let nq = self.density.dims().len() - 1;
        let full = DMatrix::<C64>::identity(1 << nq, 1 << nq).kronecker(&iso);
        let mat = &full * self.density.matrix() * full.adjoint();
        let mut dims = vec![2; nq];
        dims.push(cutoff + 1);
        Ok(DensityOperator::from_unnormalized(mat, dims)?.0)
    }
}

/// Traces out the environment analytically and expresses the field in the span
/// of `field_basis`, which must contain every branch field amplitude.
pub fn reduce_to_density(state: &CoherentBranchState, field_basis: &[FieldVector]) -> Result<ReducedState> {
    if field_basis.is_empty() {
        return Err(Error::InvalidParameter("empty field basis".into()));
    }
    let gram = gram_matrix(field_basis);
    let (w, kept) = orthonormalize(&gram);
    let dropped = (0..field_basis.len()).filter(|k| !kept.contains(k)).collect();
    let r = w.nrows();

    let qv = state.qubit_vectors();
    let mut joint = Vec::with_capacity(state.branches.len());
    for (b, q) in state.branches.iter().zip(&qv) {
        let overlaps = DVector::from_iterator(field_basis.len(), field_basis.iter().map(|f| f.overlap_coherent(b.field)));
        let coords = DVector::from_fn(r, |m, _| (0..field_basis.len()).map(|k| w[(m, k)].conj() * overlaps[k]).sum());
        let captured: f64 = coords.norm_squared();
        if captured < 1.0 - GRAM_RANK_TOL {
            return Err(Error::OutsideFieldBasis { amplitude: format!("{}", b.field), residual: (1.0 - captured).sqrt() });
        }
        joint.push(q.kronecker(&coords));
    }
    let dim = joint[0].len();
    let mut mat = DMatrix::<C64>::zeros(dim, dim);
    for (i, bi) in state.branches.iter().enumerate() {
        for (j, bj) in state.branches.iter().enumerate() {
            let w_ij = bi.coeff * bj.coeff.conj() * coherent_overlap(bj.env, bi.env);
            mat += &joint[i] * joint[j].adjoint() * w_ij;
        }
    }
    let mut dims = vec![2; state.qubit_count];
    dims.push(r);
    let (density, _) = DensityOperator::from_unnormalized(mat, dims)?;
    Ok(ReducedState { density, kept, dropped, coefficients: w, basis: field_basis.to_vec() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsdKind {
    /// Basis {|β̃⟩, |c₊⟩, |c₋⟩}.
    Single,
    /// Basis {|β̃⟩, |c₊⟩, |c₋⟩, |d₊⟩, |d₋⟩}.
    Double,
}

/// Cat-state discriminator aligned on `center` with displacement step `step`
/// (the per-node displacement reaching the detector).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsdDevice {
    pub kind: CsdKind,
    pub center: C64,
    pub step: C64,
}

impl CsdDevice {
    pub fn new(kind: CsdKind, center: C64, step: C64) -> Result<Self> {
        if step.norm() == 0.0 {
            return Err(Error::DegenerateCat);
        }
        Ok(Self { kind, center, step })
    }

    /// Discrimination basis; index 2 is the odd cat |c₋⟩ that heralds success.
    pub fn basis(&self) -> Result<Vec<FieldVector>> {
        let mut b = vec![
            FieldVector::coherent(self.center),
            CatSpec::new(self.center, self.step * 2.0, Parity::Even)?.into(),
            CatSpec::new(self.center, self.step * 2.0, Parity::Odd)?.into(),
        ];
        if self.kind == CsdKind::Double {
            b.push(CatSpec::new(self.center, self.step * 4.0, Parity::Even)?.into());
            b.push(CatSpec::new(self.center, self.step * 4.0, Parity::Odd)?.into());
        }
        Ok(b)
    }

    pub fn labels(&self) -> &'static [&'static str] {
        match self.kind {
            CsdKind::Single => &["beta", "c+", "c-"],
            CsdKind::Double => &["beta", "c+", "c-", "d+", "d-"],
        }
    }
}

pub const SUCCESS_INDEX: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsdLabel {
    OddCatSuccess,
    Failure,
}

#[derive(Debug, Clone)]
pub struct CsdOutcome {
    pub label: CsdLabel,
    pub probability: f64,
    /// Heralded qubit state; only the success outcome is postselected.
    pub state: Option<DensityOperator>,
}

#[derive(Debug, Clone)]
pub struct CsdReport {
    pub outcomes: Vec<CsdOutcome>,
    /// Squared norm of each basis component in the non-orthogonal expansion.
    /// Non-unique as a split of the failure probability; diagnostic only.
    pub diagnostic_weights: Vec<(&'static str, f64)>,
}

impl CsdReport {
    pub fn success(&self) -> &CsdOutcome {
        &self.outcomes[0]
    }
}

/// Heralds the odd cat |c₋⟩. Each branch field is expanded uniquely in the
/// (linearly independent) discrimination basis and the |c₋⟩ coefficient is
/// kept; for the single device this coincides with projection onto |c₋⟩.
pub fn csd_measure(state: &CoherentBranchState, device: &CsdDevice) -> Result<CsdReport> {
    let basis = device.basis()?;
    let gram = gram_matrix(&basis);
    let chol = gram
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Invariant("discrimination basis is linearly dependent".into()))?;

    let nb = basis.len();
    let qv = state.qubit_vectors();
    // coefficients x[i][k] of branch i's field over basis k
    let mut coeffs = Vec::with_capacity(state.branches.len());
    for b in &state.branches {
        let rhs = DVector::from_iterator(nb, basis.iter().map(|f| f.overlap_coherent(b.field)));
        let x = chol.solve(&rhs);
        let captured = rhs.dotc(&x).re;
        if captured < 1.0 - GRAM_RANK_TOL {
            return Err(Error::OutsideFieldBasis { amplitude: format!("{}", b.field), residual: (1.0 - captured).max(0.0).sqrt() });
        }
        coeffs.push(x);
    }

    let component = |k: usize| -> DMatrix<C64> {
        let d = qv[0].len();
        let mut m = DMatrix::<C64>::zeros(d, d);
        for (i, bi) in state.branches.iter().enumerate() {
            for (j, bj) in state.branches.iter().enumerate() {
                let w = bi.coeff * coeffs[i][k] * (bj.coeff * coeffs[j][k]).conj() * coherent_overlap(bj.env, bi.env);
                m += &qv[i] * qv[j].adjoint() * w;
            }
        }
        m
    };

    let norm = state.norm_sqr();
    let success = component(SUCCESS_INDEX);
    let p_success = success.diagonal().iter().map(|z| z.re).sum::<f64>() / norm;
    let success_state = if p_success > crate::qmat::IMPOSSIBLE_PROB {
        Some(DensityOperator::from_unnormalized(success, vec![2; state.qubit_count])?.0)
    } else {
        None
    };
    let diagnostic_weights = device
        .labels()
        .iter()
        .enumerate()
        .map(|(k, &label)| (label, component(k).diagonal().iter().map(|z| z.re).sum::<f64>() / norm))
        .collect();
    Ok(CsdReport {
        outcomes: vec![
            CsdOutcome { label: CsdLabel::OddCatSuccess, probability: p_success, state: success_state },
            CsdOutcome { label: CsdLabel::Failure, probability: 1.0 - p_success, state: None },
        ],
        diagnostic_weights,
    })
}

/// Same reduced state as [`reduce_to_density`], built directly in a truncated
/// photon-number basis.
pub fn fock_check(state: &CoherentBranchState, cutoff: usize) -> Result<DensityOperator> {
    let mut joint = Vec::with_capacity(state.branches.len());
    for b in &state.branches {
        let amps = fock_amplitudes(b.field, cutoff);
        let tail_mass = (1.0 - amps.norm_squared()).max(0.0);
        if tail_mass > 1e-8 {
            return Err(Error::FockTail { cutoff, tail_mass });
        }
        joint.push(qubit_vector(&b.qubits).kronecker(&amps));
    }
    let dim = joint[0].len();
    let mut mat = DMatrix::<C64>::zeros(dim, dim);
    for (i, bi) in state.branches.iter().enumerate() {
        for (j, bj) in state.branches.iter().enumerate() {
            let w = bi.coeff * bj.coeff.conj() * coherent_overlap(bj.env, bi.env);
            mat += &joint[i] * joint[j].adjoint() * w;
        }
    }
    let mut dims = vec![2; state.qubit_count];
    dims.push(cutoff + 1);
    Ok(DensityOperator::from_unnormalized(mat, dims)?.0)
}

/// Smallest cutoff whose tail mass is below 1e-8 for every branch.
pub fn minimal_cutoff(state: &CoherentBranchState) -> usize {
    let a = state.max_field_amplitude();
    let mut cutoff = ((a * a) + 6.0 * a).ceil() as usize + 1;
    while state.branches.iter().any(|b| 1.0 - fock_amplitudes(b.field, cutoff).norm_squared() > 1e-8) {
        cutoff += 1;
    }
    cutoff
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn im(x: f64) -> C64 {
        C64::new(0.0, x)
    }

    #[test]
    fn single_target_displacement() {
        let s = CoherentBranchState::new(1, im(1.0));
        let out = controlled_displace(&s, &[0], im(0.5)).unwrap();
        let b = out.branches();
        assert_eq!(b.len(), 2);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(b[0].qubits, vec![QubitLabel::Plus]);
        assert_abs_diff_eq!((b[0].field - im(1.5)).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((b[1].field - im(0.5)).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b[0].coeff.re, h, epsilon = 1e-15);
        assert_abs_diff_eq!(b[1].coeff.re, h, epsilon = 1e-15);
    }

    #[test]
    fn zero_displacement_is_identity() {
        let s = CoherentBranchState::new(2, im(1.0));
        assert_eq!(controlled_displace(&s, &[0, 1], C64::new(0.0, 0.0)).unwrap(), s);
    }

    #[test]
    fn real_displacement_rejected() {
        let s = CoherentBranchState::new(1, im(1.0));
        assert!(matches!(controlled_displace(&s, &[0], C64::new(0.1, 0.5)), Err(Error::NonImaginaryDisplacement { .. })));
        assert!(controlled_displace(&s, &[], im(0.5)).is_err());
        assert!(controlled_displace(&s, &[1], im(0.5)).is_err());
    }

    #[test]
    fn two_targets_binomial() {
        let s = CoherentBranchState::new(2, im(1.0));
        let out = controlled_displace(&s, &[0, 1], im(0.5)).unwrap();
        // four X configurations, amplitude 1/2 each; fields β+2α, β (twice), β−2α
        assert_eq!(out.branches().len(), 4);
        let mut by_field = std::collections::BTreeMap::new();
        for b in out.branches() {
            *by_field.entry((b.field.im * 1e6).round() as i64).or_insert(0.0) += b.coeff.norm_sqr();
        }
        let weights: Vec<f64> = by_field.values().copied().collect();
        assert_eq!(weights.len(), 3);
        assert_abs_diff_eq!(weights[0], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(weights[1], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(weights[2], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(out.norm_sqr(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn loss_splits_amplitude() {
        let s = CoherentBranchState::new(1, im(1.0));
        let s = controlled_displace(&s, &[0], im(0.5)).unwrap();
        let ch = LossChannel::with_default_attenuation(10.0).unwrap();
        let out = apply_loss(&s, &ch).unwrap();
        let eta = ch.eta();
        let b = &out.branches()[0];
        assert_abs_diff_eq!((b.field - im(1.5) * eta.sqrt()).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((b.env - im(1.5) * (1.0 - eta).sqrt()).norm(), 0.0, epsilon = 1e-15);
        // decoherence factor between the ±α branches
        let e = coherent_overlap(out.branches()[1].env, out.branches()[0].env);
        assert_abs_diff_eq!(e.re, (-2.0 * 0.25 * (1.0 - eta)).exp(), epsilon = 1e-14);
        assert_abs_diff_eq!(e.im, 0.0, epsilon = 1e-14);
        assert!(apply_loss(&out, &ch).is_err());
        let lossless = LossChannel::with_default_attenuation(0.0).unwrap();
        assert_eq!(lossless.eta(), 1.0);
        assert_eq!(apply_loss(&s, &lossless).unwrap(), s);
    }

    #[test]
    fn cat_orthogonality() {
        let (center, step) = (im(0.8), im(0.6));
        let dev = CsdDevice::new(CsdKind::Double, center, step).unwrap();
        let g = gram_matrix(&dev.basis().unwrap());
        for k in 0..5 {
            assert_abs_diff_eq!(g[(k, k)].re, 1.0, epsilon = 1e-14);
        }
        assert!(g[(2, 0)].norm() < 1e-15);
        assert!(g[(2, 1)].norm() < 1e-15);
        // the odd cat overlaps the wider odd cat; this is why the coefficient
        // model, not plain projection, is used for the double device
        assert!(g[(2, 4)].norm() > 1e-3);
    }

    #[test]
    fn vacuum_branch_in_fock() {
        let s = CoherentBranchState::new(1, C64::new(0.0, 0.0));
        let rho = fock_check(&s, 5).unwrap();
        assert_abs_diff_eq!(rho.matrix()[(0, 0)].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(fock_amplitudes(im(1.0), 40)[0].re, (-0.5f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!((-0.5f64).exp(), 0.6065307, epsilon = 1e-7);
    }

    #[test]
    fn fock_tail_reported() {
        let s = CoherentBranchState::new(1, im(3.0));
        assert!(matches!(fock_check(&s, 5), Err(Error::FockTail { .. })));
    }

    #[test]
    fn single_branch_reduces_to_pure() {
        let s = CoherentBranchState::new(1, im(1.0));
        let red = reduce_to_density(&s, &[FieldVector::coherent(im(1.0))]).unwrap();
        assert_eq!(red.density.dims(), &[2, 1]);
        assert_abs_diff_eq!(red.density.matrix()[(0, 0)].re, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn dependent_basis_is_pruned() {
        let s = CoherentBranchState::new(1, im(1.0));
        let s = controlled_displace(&s, &[0], im(0.5)).unwrap();
        let basis = vec![
            FieldVector::coherent(im(1.5)),
            FieldVector::coherent(im(0.5)),
            CatSpec::new(im(1.0), im(0.5), Parity::Even).unwrap().into(),
        ];
        let red = reduce_to_density(&s, &basis).unwrap();
        assert_eq!(red.kept.len(), 2);
        assert_eq!(red.dropped.len(), 1);
        assert!(reduce_to_density(&s, &basis[..1]).is_err());
    }

    #[test]
    fn degenerate_device() {
        assert!(matches!(CsdDevice::new(CsdKind::Single, im(1.0), C64::new(0.0, 0.0)), Err(Error::DegenerateCat)));
    }
}
