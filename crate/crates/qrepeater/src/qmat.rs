//! Dense complex linear algebra on explicit tensor-product spaces.
//!
//! Every operator carries its ordered list of subsystem dimensions; subsystem
//! `0` is the most significant digit of a basis index. No ordering convention
//! is inherited from nalgebra, which only supplies storage and the Hermitian
//! eigensolver.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result, C64};

/// Largest Hilbert-space dimension any operator may have.
pub const MAX_DIM: usize = 4096;
pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;
pub const NORM_TOL: f64 = 1e-12;
/// Below this probability a projective outcome is treated as impossible.
pub const IMPOSSIBLE_PROB: f64 = 1e-14;

const I: C64 = C64::new(0.0, 1.0);

fn dims_product(dims: &[usize]) -> Result<usize> {
    let mut total: usize = 1;
    for &d in dims {
        if d == 0 {
            return Err(Error::DimensionMismatch("zero-dimensional subsystem".into()));
        }
        total = total.checked_mul(d).ok_or(Error::DimensionOverflow {
            required: usize::MAX,
            max: MAX_DIM,
        })?;
    }
    if total > MAX_DIM {
        return Err(Error::DimensionOverflow { required: total, max: MAX_DIM });
    }
    Ok(total)
}

fn check_square(m: &DMatrix<C64>, dims: &[usize]) -> Result<()> {
    let d = dims_product(dims)?;
    if m.nrows() != d || m.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}x{} but subsystem dims {:?} give {}",
            m.nrows(),
            m.ncols(),
            dims,
            d
        )));
    }
    Ok(())
}

/// Largest elementwise |M − M†|.
pub fn hermitian_deviation(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for r in 0..n {
        for c in r..n {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

fn trace_re(m: &DMatrix<C64>) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

/// Unit-trace, Hermitian, positive semidefinite operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    mat: DMatrix<C64>,
    dims: Vec<usize>,
}

impl DensityOperator {
    /// Validates Hermiticity and unit trace. Positivity is checked separately by
    /// [`DensityOperator::check_psd`] because it needs a full eigendecomposition.
    pub fn new(mat: DMatrix<C64>, dims: Vec<usize>) -> Result<Self> {
        check_square(&mat, &dims)?;
        let deviation = hermitian_deviation(&mat);
        if deviation > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        let trace = trace_re(&mat);
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(Error::BadTrace { trace });
        }
        Ok(Self { mat: symmetrize(mat), dims })
    }

    /// Normalizes a positive, Hermitian but unnormalized operator and returns the
    /// discarded trace alongside it.
    pub fn from_unnormalized(mat: DMatrix<C64>, dims: Vec<usize>) -> Result<(Self, f64)> {
        check_square(&mat, &dims)?;
        let trace = trace_re(&mat);
        if trace <= IMPOSSIBLE_PROB {
            return Err(Error::ImpossibleOutcome { probability: trace });
        }
        let scaled = mat.map(|z| z / trace);
        Ok((Self::new(scaled, dims)?, trace))
    }

    pub fn from_pure(psi: &PureState) -> Self {
        let v = psi.vector();
        Self { mat: v * v.adjoint(), dims: psi.dims.clone() }
    }

    pub fn maximally_mixed(dims: Vec<usize>) -> Result<Self> {
        let d = dims_product(&dims)?;
        let mat = DMatrix::from_diagonal_element(d, d, C64::new(1.0 / d as f64, 0.0));
        Ok(Self { mat, dims })
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.mat
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn trace(&self) -> f64 {
        trace_re(&self.mat)
    }

    /// ⟨ψ|ρ|ψ⟩.
    pub fn expectation_pure(&self, psi: &PureState) -> f64 {
        let v = psi.vector();
        (v.adjoint() * &self.mat * v)[(0, 0)].re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        eigh_matrix(&self.mat).0
    }

    pub fn check_psd(&self) -> Result<()> {
        let min = self.eigenvalues().first().copied().unwrap_or(0.0);
        if min < -PSD_TOL {
            return Err(Error::NotPositive { min_eigenvalue: min });
        }
        Ok(())
    }

    /// Number of eigenvalues above `tol`.
    pub fn rank(&self, tol: f64) -> usize {
        self.eigenvalues().iter().filter(|&&e| e > tol).count()
    }

    pub fn max_abs_diff(&self, other: &DensityOperator) -> f64 {
        max_abs(&(&self.mat - &other.mat))
    }
}

/// Averages M and M† to clear round-off asymmetry.
fn symmetrize(m: DMatrix<C64>) -> DMatrix<C64> {
    let adj = m.adjoint();
    (m + adj).map(|z| z * 0.5)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    mat: DMatrix<C64>,
    dims: Vec<usize>,
}

impl HermitianOperator {
    /// Hermiticity is checked relative to the largest element so energy units
    /// do not matter.
    pub fn new(mat: DMatrix<C64>, dims: Vec<usize>) -> Result<Self> {
        check_square(&mat, &dims)?;
        let deviation = hermitian_deviation(&mat);
        if deviation > HERMITIAN_TOL * max_abs(&mat).max(1.0) {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self { mat: symmetrize(mat), dims })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        let d = dims_product(&dims)?;
        Ok(Self { mat: DMatrix::zeros(d, d), dims })
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self { mat: self.mat.map(|z| z * k), dims: self.dims.clone() }
    }

    pub fn commutator_norm(&self, other: &DMatrix<C64>) -> f64 {
        max_abs(&(&self.mat * other - other * &self.mat))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    vec: DVector<C64>,
    dims: Vec<usize>,
}

impl PureState {
    pub fn new(vec: DVector<C64>, dims: Vec<usize>) -> Result<Self> {
        let d = dims_product(&dims)?;
        if vec.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "vector length {} but dims {:?} give {}",
                vec.len(),
                dims,
                d
            )));
        }
        let norm = vec.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self { vec, dims })
    }

    pub fn normalized(vec: DVector<C64>, dims: Vec<usize>) -> Result<Self> {
        let norm = vec.norm();
        if norm <= IMPOSSIBLE_PROB {
            return Err(Error::NotNormalized { norm });
        }
        Self::new(vec.map(|z| z / norm), dims)
    }

    /// Computational basis vector with digits `digits` (one per subsystem).
    pub fn basis(dims: Vec<usize>, digits: &[usize]) -> Result<Self> {
        if digits.len() != dims.len() {
            return Err(Error::DimensionMismatch("one digit per subsystem required".into()));
        }
        let d = dims_product(&dims)?;
        let mut index = 0;
        for (&digit, &n) in digits.iter().zip(&dims) {
            if digit >= n {
                return Err(Error::DimensionMismatch(format!("digit {digit} out of range {n}")));
            }
            index = index * n + digit;
        }
        let mut vec = DVector::zeros(d);
        vec[index] = C64::new(1.0, 0.0);
        Ok(Self { vec, dims })
    }

    /// Qubit register state from a bit string such as `"0110"`.
    pub fn qubits(bits: &str) -> Result<Self> {
        let digits: Vec<usize> = bits
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(Error::InvalidParameter(format!("bad bit '{c}'"))),
            })
            .collect::<Result<_>>()?;
        Self::basis(vec![2; digits.len()], &digits)
    }

    pub fn vector(&self) -> &DVector<C64> {
        &self.vec
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.vec.len()
    }

    pub fn inner(&self, other: &PureState) -> C64 {
        self.vec.dotc(&other.vec)
    }
}

/// Orthogonal projector, P² = P.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    mat: DMatrix<C64>,
    dims: Vec<usize>,
}

impl Projector {
    pub fn new(mat: DMatrix<C64>, dims: Vec<usize>) -> Result<Self> {
        check_square(&mat, &dims)?;
        let deviation = max_abs(&(&mat * &mat - &mat));
        if deviation > 1e-12 {
            return Err(Error::NotProjector { deviation });
        }
        Ok(Self { mat, dims })
    }

    pub fn onto(psi: &PureState) -> Self {
        let v = psi.vector();
        Self { mat: v * v.adjoint(), dims: psi.dims.clone() }
    }

    /// Projector onto `pattern` on the given qubit `sites` of a register with
    /// `dims`, identity elsewhere.
    pub fn computational(dims: &[usize], sites: &[usize], pattern: &[usize]) -> Result<Self> {
        if sites.len() != pattern.len() {
            return Err(Error::DimensionMismatch("one digit per projected site".into()));
        }
        let sub_dims: Vec<usize> = sites
            .iter()
            .map(|&s| dims.get(s).copied().ok_or(Error::InvalidSubsystem { index: s, count: dims.len() }))
            .collect::<Result<_>>()?;
        let local = Projector::onto(&PureState::basis(sub_dims, pattern)?);
        let mat = embed(local.matrix(), sites, dims)?;
        Ok(Self { mat, dims: dims.to_vec() })
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }
}

/// Kronecker product with concatenated subsystem dims.
pub trait Tensor: Sized {
    fn tensor(&self, other: &Self) -> Result<Self>;
}

impl Tensor for DensityOperator {
    fn tensor(&self, other: &Self) -> Result<Self> {
        let dims = [self.dims.clone(), other.dims.clone()].concat();
        dims_product(&dims)?;
        Ok(Self { mat: self.mat.kronecker(&other.mat), dims })
    }
}

impl Tensor for PureState {
    fn tensor(&self, other: &Self) -> Result<Self> {
        let dims = [self.dims.clone(), other.dims.clone()].concat();
        dims_product(&dims)?;
        Ok(Self { vec: self.vec.kronecker(&other.vec), dims })
    }
}

impl Tensor for HermitianOperator {
    fn tensor(&self, other: &Self) -> Result<Self> {
        let dims = [self.dims.clone(), other.dims.clone()].concat();
        dims_product(&dims)?;
        Ok(Self { mat: self.mat.kronecker(&other.mat), dims })
    }
}

pub fn tensor<T: Tensor>(a: &T, b: &T) -> Result<T> {
    a.tensor(b)
}

fn digits_of(mut index: usize, dims: &[usize], out: &mut [usize]) {
    for k in (0..dims.len()).rev() {
        out[k] = index % dims[k];
        index /= dims[k];
    }
}

fn index_of(digits: impl Iterator<Item = (usize, usize)>) -> usize {
    digits.fold(0, |acc, (digit, n)| acc * n + digit)
}

/// Traces out every subsystem not listed in `keep`. The kept subsystems retain
/// their original relative order; an empty `keep` yields the 1×1 operator [1].
pub fn partial_trace(rho: &DensityOperator, keep: &[usize]) -> Result<DensityOperator> {
    let n = rho.dims.len();
    let mut keep_sorted = keep.to_vec();
    keep_sorted.sort_unstable();
    keep_sorted.dedup();
    if let Some(&bad) = keep_sorted.iter().find(|&&k| k >= n) {
        return Err(Error::InvalidSubsystem { index: bad, count: n });
    }
    let traced: Vec<usize> = (0..n).filter(|k| !keep_sorted.contains(k)).collect();
    let kept_dims: Vec<usize> = keep_sorted.iter().map(|&k| rho.dims[k]).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&k| rho.dims[k]).collect();
    let dk: usize = kept_dims.iter().product();
    let dt: usize = traced_dims.iter().product();

    // full index from (kept digits, traced digits)
    let mut full_digits = vec![0usize; n];
    let mut kd = vec![0usize; kept_dims.len()];
    let mut td = vec![0usize; traced_dims.len()];
    let mut compose = |k: usize, t: usize| -> usize {
        digits_of(k, &kept_dims, &mut kd);
        digits_of(t, &traced_dims, &mut td);
        for (pos, &s) in keep_sorted.iter().enumerate() {
            full_digits[s] = kd[pos];
        }
        for (pos, &s) in traced.iter().enumerate() {
            full_digits[s] = td[pos];
        }
        index_of(full_digits.iter().copied().zip(rho.dims.iter().copied()))
    };
    let mut map = vec![0usize; dk * dt];
    for k in 0..dk {
        for t in 0..dt {
            map[k * dt + t] = compose(k, t);
        }
    }
    let mut out = DMatrix::<C64>::zeros(dk, dk);
    for r in 0..dk {
        for c in 0..dk {
            let mut acc = C64::new(0.0, 0.0);
            for t in 0..dt {
                acc += rho.mat[(map[r * dt + t], map[c * dt + t])];
            }
            out[(r, c)] = acc;
        }
    }
    Ok(DensityOperator { mat: symmetrize(out), dims: kept_dims })
}

/// Embeds `op`, acting on `sites` (in the given order), into the full space.
pub fn embed(op: &DMatrix<C64>, sites: &[usize], dims: &[usize]) -> Result<DMatrix<C64>> {
    let n = dims.len();
    let d = dims_product(dims)?;
    for (pos, &s) in sites.iter().enumerate() {
        if s >= n {
            return Err(Error::InvalidSubsystem { index: s, count: n });
        }
        if sites[..pos].contains(&s) {
            return Err(Error::DimensionMismatch(format!("site {s} listed twice")));
        }
    }
    let sub_dims: Vec<usize> = sites.iter().map(|&s| dims[s]).collect();
    let ds: usize = sub_dims.iter().product();
    if op.nrows() != ds || op.ncols() != ds {
        return Err(Error::DimensionMismatch(format!(
            "operator is {}x{}, sites need {ds}",
            op.nrows(),
            op.ncols()
        )));
    }
    let mut out = DMatrix::<C64>::zeros(d, d);
    let mut rd = vec![0usize; n];
    let mut cd = vec![0usize; n];
    for r in 0..d {
        digits_of(r, dims, &mut rd);
        let sub_r = index_of(sites.iter().map(|&s| (rd[s], dims[s])));
        for sub_c in 0..ds {
            let v = op[(sub_r, sub_c)];
            if v == C64::new(0.0, 0.0) {
                continue;
            }
            cd.copy_from_slice(&rd);
            let mut rem = sub_c;
            for k in (0..sites.len()).rev() {
                cd[sites[k]] = rem % sub_dims[k];
                rem /= sub_dims[k];
            }
            let c = index_of(cd.iter().copied().zip(dims.iter().copied()));
            out[(r, c)] = v;
        }
    }
    Ok(out)
}

/// Spectral decomposition with eigenvalues ascending and orthonormal columns.
#[derive(Debug, Clone)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: DMatrix<C64>,
}

fn eigh_matrix(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let se = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..se.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let values = order.iter().map(|&k| se.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| se.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn eigh(h: &HermitianOperator) -> Result<Eigh> {
    let deviation = hermitian_deviation(&h.mat);
    if deviation > HERMITIAN_TOL * max_abs(&h.mat).max(1.0) {
        return Err(Error::NotHermitian { deviation });
    }
    let (values, vectors) = eigh_matrix(&h.mat);
    Ok(Eigh { values, vectors })
}

/// Arbitrary matrix checked for Hermiticity before diagonalizing.
pub fn eigh_checked(m: &DMatrix<C64>) -> Result<Eigh> {
    let deviation = hermitian_deviation(m);
    if deviation > HERMITIAN_TOL * max_abs(m).max(1.0) {
        return Err(Error::NotHermitian { deviation });
    }
    let (values, vectors) = eigh_matrix(m);
    Ok(Eigh { values, vectors })
}

/// exp(−iHt) assembled from the spectral decomposition.
pub fn unitary(h: &HermitianOperator, t: f64) -> Result<DMatrix<C64>> {
    let e = eigh(h)?;
    let phases = DVector::from_iterator(e.values.len(), e.values.iter().map(|&x| (-I * x * t).exp()));
    let scaled = DMatrix::from_fn(e.vectors.nrows(), e.vectors.ncols(), |r, c| e.vectors[(r, c)] * phases[c]);
    Ok(scaled * e.vectors.adjoint())
}

pub fn evolve(rho: &DensityOperator, h: &HermitianOperator, t: f64) -> Result<DensityOperator> {
    if rho.dims != h.dims {
        return Err(Error::DimensionMismatch(format!(
            "state dims {:?} vs Hamiltonian dims {:?}",
            rho.dims, h.dims
        )));
    }
    let u = unitary(h, t)?;
    Ok(conjugate(rho, &u))
}

pub fn evolve_pure(psi: &PureState, h: &HermitianOperator, t: f64) -> Result<PureState> {
    if psi.dims != h.dims {
        return Err(Error::DimensionMismatch(format!(
            "state dims {:?} vs Hamiltonian dims {:?}",
            psi.dims, h.dims
        )));
    }
    let u = unitary(h, t)?;
    Ok(PureState { vec: u * &psi.vec, dims: psi.dims.clone() })
}

/// U ρ U† for a unitary `u` of matching dimension.
pub fn conjugate(rho: &DensityOperator, u: &DMatrix<C64>) -> DensityOperator {
    DensityOperator { mat: symmetrize(u * &rho.mat * u.adjoint()), dims: rho.dims.clone() }
}

/// Result of a projective measurement branch.
#[derive(Debug, Clone)]
pub struct Projection {
    pub probability: f64,
    /// PρP, or PρP / probability when normalization was requested.
    pub matrix: DMatrix<C64>,
    pub dims: Vec<usize>,
    pub normalized: bool,
}

impl Projection {
    pub fn density(&self) -> Result<DensityOperator> {
        if !self.normalized {
            return Err(Error::Invariant("projection was not normalized".into()));
        }
        DensityOperator::new(self.matrix.clone(), self.dims.clone())
    }
}

pub fn project(rho: &DensityOperator, p: &Projector, normalize: bool) -> Result<Projection> {
    if rho.dims != p.dims {
        return Err(Error::DimensionMismatch(format!(
            "state dims {:?} vs projector dims {:?}",
            rho.dims, p.dims
        )));
    }
    let out = &p.mat * &rho.mat * &p.mat;
    let probability = trace_re(&out);
    if normalize && probability <= IMPOSSIBLE_PROB {
        return Err(Error::ImpossibleOutcome { probability });
    }
    let matrix = if normalize { out.map(|z| z / probability) } else { out };
    Ok(Projection { probability, matrix: symmetrize(matrix), dims: rho.dims.clone(), normalized: normalize })
}

/// Uhlmann fidelity (Tr√(√ρ σ √ρ))².
pub fn fidelity(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch("fidelity of operators of different size".into()));
    }
    let sqrt_rho = psd_sqrt(&rho.mat);
    let inner = &sqrt_rho * &sigma.mat * &sqrt_rho;
    let (values, _) = eigh_matrix(&symmetrize(inner));
    let root: f64 = values.iter().map(|&v| v.max(0.0).sqrt()).sum();
    Ok((root * root).min(1.0))
}

fn psd_sqrt(m: &DMatrix<C64>) -> DMatrix<C64> {
    let (values, vectors) = eigh_matrix(m);
    let scaled = DMatrix::from_fn(vectors.nrows(), vectors.ncols(), |r, c| vectors[(r, c)] * values[c].max(0.0).sqrt());
    scaled * vectors.adjoint()
}

pub mod pauli {
    use super::*;

    pub fn identity() -> DMatrix<C64> {
        DMatrix::identity(2, 2)
    }

    pub fn x() -> DMatrix<C64> {
        DMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)])
    }

    pub fn y() -> DMatrix<C64> {
        DMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), -I, I, C64::new(0.0, 0.0)])
    }

    pub fn z() -> DMatrix<C64> {
        DMatrix::from_row_slice(2, 2, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(-1.0, 0.0)])
    }
}

/// The four Bell states, in the fixed order φ⁺, φ⁻, ψ⁺, ψ⁻ used for weight vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum BellState {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellState {
    pub const ALL: [BellState; 4] = [BellState::PhiPlus, BellState::PhiMinus, BellState::PsiPlus, BellState::PsiMinus];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            BellState::PhiPlus => "phi+",
            BellState::PhiMinus => "phi-",
            BellState::PsiPlus => "psi+",
            BellState::PsiMinus => "psi-",
        }
    }

    pub fn vector(self) -> PureState {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let a = match self {
            BellState::PhiPlus => [h, 0.0, 0.0, h],
            BellState::PhiMinus => [h, 0.0, 0.0, -h],
            BellState::PsiPlus => [0.0, h, h, 0.0],
            BellState::PsiMinus => [0.0, h, -h, 0.0],
        };
        PureState { vec: DVector::from_iterator(4, a.iter().map(|&x| C64::new(x, 0.0))), dims: vec![2, 2] }
    }

    /// Single-qubit Pauli on the second qubit that maps `self` to `target`
    /// (up to a global phase): one of I, X, Z, XZ.
    pub fn correction_to(self, target: BellState) -> DMatrix<C64> {
        // X flips φ↔ψ (same sign), Z flips the sign (same family).
        let family = |b: BellState| matches!(b, BellState::PsiPlus | BellState::PsiMinus);
        let sign = |b: BellState| matches!(b, BellState::PhiMinus | BellState::PsiMinus);
        let mut op = pauli::identity();
        if sign(self) != sign(target) {
            op = pauli::z() * op;
        }
        if family(self) != family(target) {
            op = pauli::x() * op;
        }
        op
    }
}

/// Full Bell-basis matrix elements ⟨b_r|ρ|b_c⟩ of a two-qubit operator.
pub fn bell_matrix(rho: &DMatrix<C64>) -> DMatrix<C64> {
    let basis = DMatrix::from_fn(4, 4, |r, c| BellState::ALL[c].vector().vector()[r]);
    basis.adjoint() * rho * basis
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn maximally_mixed_product() {
        let half = DensityOperator::maximally_mixed(vec![2]).unwrap();
        let prod = tensor(&half, &half).unwrap();
        let quarter = DensityOperator::maximally_mixed(vec![2, 2]).unwrap();
        assert!(prod.max_abs_diff(&quarter) < 1e-15);
        assert_eq!(prod.dims(), &[2, 2]);
    }

    #[test]
    fn basis_product() {
        let a = PureState::qubits("0").unwrap();
        let b = PureState::qubits("1").unwrap();
        assert_eq!(tensor(&a, &b).unwrap(), PureState::qubits("01").unwrap());
    }

    #[test]
    fn overflow_is_reported() {
        let a = PureState::basis(vec![64], &[0]).unwrap();
        let b = PureState::basis(vec![128], &[0]).unwrap();
        match tensor(&a, &b) {
            Err(Error::DimensionOverflow { required, max }) => {
                assert_eq!(required, 8192);
                assert_eq!(max, MAX_DIM);
            }
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn bell_marginal_is_mixed() {
        let rho = DensityOperator::from_pure(&BellState::PhiPlus.vector());
        let reduced = partial_trace(&rho, &[0]).unwrap();
        assert!(reduced.max_abs_diff(&DensityOperator::maximally_mixed(vec![2]).unwrap()) < 1e-15);
        assert_eq!(partial_trace(&rho, &[0, 1]).unwrap(), rho);
        let scalar = partial_trace(&rho, &[]).unwrap();
        assert_abs_diff_eq!(scalar.matrix()[(0, 0)].re, 1.0, epsilon = 1e-15);
        assert!(matches!(partial_trace(&rho, &[2]), Err(Error::InvalidSubsystem { .. })));
    }

    #[test]
    fn pauli_x_spectrum() {
        let h = HermitianOperator::new(pauli::x(), vec![2]).unwrap();
        let e = eigh(&h).unwrap();
        assert_abs_diff_eq!(e.values[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn non_hermitian_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)]);
        assert!(matches!(HermitianOperator::new(m.clone(), vec![2]), Err(Error::NotHermitian { .. })));
        assert!(eigh_checked(&m).is_err());
    }

    #[test]
    fn rabi_half_period() {
        let h = HermitianOperator::new(pauli::x(), vec![2]).unwrap();
        let rho = DensityOperator::from_pure(&PureState::qubits("0").unwrap());
        let out = evolve(&rho, &h, std::f64::consts::FRAC_PI_2).unwrap();
        assert_abs_diff_eq!(out.matrix()[(1, 1)].re, 1.0, epsilon = 1e-14);
        assert!(evolve(&rho, &h, 0.0).unwrap().max_abs_diff(&rho) < 1e-15);
    }

    #[test]
    fn projections() {
        let mixed = DensityOperator::maximally_mixed(vec![2]).unwrap();
        let p0 = Projector::computational(&[2], &[0], &[0]).unwrap();
        assert_abs_diff_eq!(project(&mixed, &p0, true).unwrap().probability, 0.5, epsilon = 1e-15);

        let phi = DensityOperator::from_pure(&BellState::PhiPlus.vector());
        let p00 = Projector::onto(&PureState::qubits("00").unwrap());
        let out = project(&phi, &p00, true).unwrap();
        assert_abs_diff_eq!(out.probability, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(out.density().unwrap().matrix()[(0, 0)].re, 1.0, epsilon = 1e-15);

        let p01 = Projector::onto(&PureState::qubits("01").unwrap());
        assert!(matches!(project(&phi, &p01, true), Err(Error::ImpossibleOutcome { .. })));
        assert!(project(&phi, &p01, false).is_ok());
    }

    #[test]
    fn projector_must_be_idempotent() {
        let m = DMatrix::from_diagonal_element(2, 2, c(0.5));
        assert!(matches!(Projector::new(m, vec![2]), Err(Error::NotProjector { .. })));
    }

    #[test]
    fn embed_matches_kronecker() {
        let dims = [2, 3, 2];
        let x0 = embed(&pauli::x(), &[0], &dims).unwrap();
        let expect = pauli::x().kronecker(&DMatrix::identity(6, 6));
        assert!(max_abs(&(x0 - expect)) < 1e-15);
        // reversed site order swaps the factor order
        let zx = pauli::z().kronecker(&pauli::x());
        let via = embed(&zx, &[2, 0], &dims).unwrap();
        let expect = pauli::x().kronecker(&DMatrix::identity(3, 3)).kronecker(&pauli::z());
        assert!(max_abs(&(via - expect)) < 1e-15);
    }

    #[test]
    fn bell_corrections() {
        for from in BellState::ALL {
            for to in BellState::ALL {
                let u = DMatrix::identity(2, 2).kronecker(&from.correction_to(to));
                let mapped = &u * from.vector().vector();
                let overlap = to.vector().vector().dotc(&mapped).norm();
                assert_abs_diff_eq!(overlap, 1.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn fidelity_of_identical_states() {
        let rho = DensityOperator::from_pure(&BellState::PsiMinus.vector());
        assert_abs_diff_eq!(fidelity(&rho, &rho).unwrap(), 1.0, epsilon = 1e-10);
        let other = DensityOperator::from_pure(&BellState::PhiPlus.vector());
        assert!(fidelity(&rho, &other).unwrap() < 1e-10);
    }
}
