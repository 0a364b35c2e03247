//! Quantum operations in Kraus form: complete-positivity and trace checks,
//! composition, and the fiducial machinery for state tomography and channel
//! fingerprints.

use crate::linalg::{ComplexMatrix, C64, DEFAULT_TOL};
use crate::qstate::DensityOperator;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpError {
    #[error("linear algebra: {0}")]
    Linalg(#[from] crate::linalg::LinalgError),
    #[error("state: {0}")]
    State(#[from] crate::qstate::StateError),
    #[error("Kraus list must be nonempty")]
    EmptyKraus,
    #[error("Kraus matrix {0} is {1}x{2}, expected {3}x{4}")]
    KrausShape(usize, usize, usize, usize, usize),
    #[error("operation is not trace-nonincreasing (max eigenvalue of ΣK†K is {0})")]
    TraceIncreasing(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("fiducial set must contain n² rank-1 projectors (got {0} for dimension {1})")]
    FiducialCount(usize, usize),
    #[error("fiducial element {0} is not a rank-1 projector")]
    FiducialNotRankOne(usize),
    #[error("fiducial set is not informationally complete (Gram matrix singular)")]
    FiducialIncomplete,
    #[error("probability vector has length {0}, expected {1}")]
    ProbCount(usize, usize),
    #[error("inconsistent fiducial probabilities: {0}")]
    InconsistentProbs(String),
}

/// Completely positive trace-nonincreasing map in Kraus form between labeled
/// Hilbert spaces. CP is structural; the trace conditions are checked at
/// construction.
#[derive(Debug, Clone)]
pub struct QuantumOperation {
    kraus: Vec<ComplexMatrix>,
    in_dims: Vec<usize>,
    out_dims: Vec<usize>,
}

impl QuantumOperation {
    pub fn new(
        kraus: Vec<ComplexMatrix>,
        in_dims: Vec<usize>,
        out_dims: Vec<usize>,
        tol: f64,
    ) -> Result<Self, OpError> {
        if kraus.is_empty() {
            return Err(OpError::EmptyKraus);
        }
        let in_dim: usize = in_dims.iter().product();
        let out_dim: usize = out_dims.iter().product();
        for (k, m) in kraus.iter().enumerate() {
            if m.rows() != out_dim || m.cols() != in_dim {
                return Err(OpError::KrausShape(k, m.rows(), m.cols(), out_dim, in_dim));
            }
        }
        let op = Self { kraus, in_dims, out_dims };
        let max = op.kraus_gram()?.hermitian_eigenvalues()?.last().copied().unwrap_or(0.0);
        if max > 1.0 + tol {
            return Err(OpError::TraceIncreasing(max));
        }
        Ok(op)
    }

    /// Identity channel on the given factor dimensions.
    pub fn identity(dims: Vec<usize>) -> Self {
        let n: usize = dims.iter().product();
        Self { kraus: vec![ComplexMatrix::identity(n)], in_dims: dims.clone(), out_dims: dims }
    }

    /// Unitary channel `σ ↦ U σ U†`.
    pub fn from_unitary(u: ComplexMatrix, dims: Vec<usize>, tol: f64) -> Result<Self, OpError> {
        Self::new(vec![u], dims.clone(), dims, tol)
    }

    pub fn kraus(&self) -> &[ComplexMatrix] {
        &self.kraus
    }

    pub fn in_dims(&self) -> &[usize] {
        &self.in_dims
    }

    pub fn out_dims(&self) -> &[usize] {
        &self.out_dims
    }

    pub fn in_dim(&self) -> usize {
        self.in_dims.iter().product()
    }

    pub fn out_dim(&self) -> usize {
        self.out_dims.iter().product()
    }

    /// `Σ K†K`.
    fn kraus_gram(&self) -> Result<ComplexMatrix, OpError> {
        let n = self.in_dim();
        let mut acc = ComplexMatrix::zeros(n, n);
        for k in &self.kraus {
            acc = acc.add(&k.adjoint().mul(k)?)?;
        }
        Ok(acc)
    }

    /// Apply to a raw matrix: `Σ K m K†`.
    pub fn apply_matrix(&self, m: &ComplexMatrix) -> Result<ComplexMatrix, OpError> {
        if m.rows() != self.in_dim() {
            return Err(OpError::DimMismatch { expected: self.in_dim(), got: m.rows() });
        }
        let n = self.out_dim();
        let mut acc = ComplexMatrix::zeros(n, n);
        for k in &self.kraus {
            acc = acc.add(&k.mul(m)?.mul(&k.adjoint())?)?;
        }
        Ok(acc)
    }

    /// Apply to a state; the output trace never exceeds the input trace.
    pub fn apply(&self, s: &DensityOperator) -> Result<DensityOperator, OpError> {
        if s.dims() != self.in_dims.as_slice() {
            return Err(OpError::DimMismatch { expected: self.in_dim(), got: s.dim() });
        }
        let m = self.apply_matrix(s.matrix())?;
        Ok(DensityOperator::new(m, self.out_dims.clone(), 1e-7)?)
    }

    /// Trace-preserving iff `ΣK†K = I` entrywise.
    pub fn is_trace_preserving(&self, tol: f64) -> Result<bool, OpError> {
        let g = self.kraus_gram()?;
        Ok(g.max_abs_diff(&ComplexMatrix::identity(self.in_dim())) <= tol)
    }

    /// Trace-nonincreasing iff the top eigenvalue of `ΣK†K` is at most 1.
    pub fn is_trace_nonincreasing(&self, tol: f64) -> Result<bool, OpError> {
        let max = self.kraus_gram()?.hermitian_eigenvalues()?.last().copied().unwrap_or(0.0);
        Ok(max <= 1.0 + tol)
    }

    /// Choi matrix `Σ_ij |i⟩⟨j| ⊗ A(|i⟩⟨j|)` on the (in ⊗ out) space.
    pub fn choi_matrix(&self) -> Result<ComplexMatrix, OpError> {
        let n = self.in_dim();
        let m = self.out_dim();
        let mut choi = ComplexMatrix::zeros(n * m, n * m);
        for i in 0..n {
            for j in 0..n {
                let mut e = ComplexMatrix::zeros(n, n);
                e.set(i, j, C64::ONE);
                let a = self.apply_matrix(&e)?;
                for r in 0..m {
                    for c in 0..m {
                        choi.set(i * m + r, j * m + c, a.get(r, c));
                    }
                }
            }
        }
        Ok(choi)
    }

    /// A map given by its Choi matrix is completely positive iff the Choi
    /// matrix is PSD.
    pub fn is_completely_positive(
        choi: &ComplexMatrix,
        in_dim: usize,
        out_dim: usize,
        tol: f64,
    ) -> Result<bool, OpError> {
        if choi.rows() != in_dim * out_dim {
            return Err(OpError::DimMismatch { expected: in_dim * out_dim, got: choi.rows() });
        }
        Ok(choi.is_psd(tol)?)
    }

    /// Sequential composition: `apply(compose(a, b), s) = apply(a, apply(b, s))`.
    pub fn compose(outer: &Self, inner: &Self) -> Result<Self, OpError> {
        if inner.out_dims != outer.in_dims {
            return Err(OpError::DimMismatch { expected: outer.in_dim(), got: inner.out_dim() });
        }
        let mut kraus = Vec::with_capacity(outer.kraus.len() * inner.kraus.len());
        for ko in &outer.kraus {
            for ki in &inner.kraus {
                kraus.push(ko.mul(ki)?);
            }
        }
        Ok(Self { kraus, in_dims: inner.in_dims.clone(), out_dims: outer.out_dims.clone() })
    }

    /// Merge component operations into one by concatenating Kraus lists.
    pub fn aggregate(ops: &[Self]) -> Result<Self, OpError> {
        let first = ops.first().ok_or(OpError::EmptyKraus)?;
        let mut kraus = Vec::new();
        for op in ops {
            if op.in_dims != first.in_dims || op.out_dims != first.out_dims {
                return Err(OpError::DimMismatch { expected: first.in_dim(), got: op.in_dim() });
            }
            kraus.extend(op.kraus.iter().cloned());
        }
        Ok(Self { kraus, in_dims: first.in_dims.clone(), out_dims: first.out_dims.clone() })
    }

    /// Fingerprint `M_ij = Tr(G_j A(F_i) G_j)` over all fiducial pairs.
    pub fn fiducial_fingerprint(
        &self,
        fin: &FiducialSet,
        fout: &FiducialSet,
    ) -> Result<Vec<Vec<f64>>, OpError> {
        if fin.dim() != self.in_dim() || fout.dim() != self.out_dim() {
            return Err(OpError::DimMismatch { expected: self.in_dim(), got: fin.dim() });
        }
        let mut rows = Vec::with_capacity(fin.len());
        for f in fin.projectors() {
            let out = self.apply_matrix(f)?;
            let mut row = Vec::with_capacity(fout.len());
            for g in fout.projectors() {
                row.push(g.mul(&out)?.mul(g)?.trace()?.re);
            }
            rows.push(row);
        }
        Ok(rows)
    }
}

/// Fingerprint equality implies operational equality of the channels.
pub fn ops_equal(
    a: &QuantumOperation,
    b: &QuantumOperation,
    fin: &FiducialSet,
    fout: &FiducialSet,
    tol: f64,
) -> Result<bool, OpError> {
    let fa = a.fiducial_fingerprint(fin, fout)?;
    let fb = b.fiducial_fingerprint(fin, fout)?;
    Ok(fa
        .iter()
        .zip(&fb)
        .all(|(ra, rb)| ra.iter().zip(rb).all(|(x, y)| (x - y).abs() <= tol)))
}

/// An informationally complete set of n² rank-1 projectors on an
/// n-dimensional space.
#[derive(Debug, Clone)]
pub struct FiducialSet {
    projectors: Vec<ComplexMatrix>,
    dim: usize,
    condition_number: f64,
}

impl FiducialSet {
    pub fn new(projectors: Vec<ComplexMatrix>, tol: f64) -> Result<Self, OpError> {
        let count = projectors.len();
        let dim = projectors.first().map(|p| p.rows()).unwrap_or(0);
        if dim == 0 || count != dim * dim {
            return Err(OpError::FiducialCount(count, dim));
        }
        for (k, p) in projectors.iter().enumerate() {
            if p.rows() != dim || p.cols() != dim {
                return Err(OpError::FiducialNotRankOne(k));
            }
            let herm = p.is_hermitian(tol)?;
            let idem = p.mul(p)?.max_abs_diff(p) <= tol.max(1e-9);
            let tr = p.trace()?.re;
            if !herm || !idem || (tr - 1.0).abs() > tol.max(1e-9) {
                return Err(OpError::FiducialNotRankOne(k));
            }
        }
        // Gram matrix G_ij = Tr(F_i F_j) must be invertible.
        let n2 = count;
        let mut gram = nalgebra::DMatrix::<f64>::zeros(n2, n2);
        for i in 0..n2 {
            for j in 0..n2 {
                gram[(i, j)] = projectors[i].mul(&projectors[j]).unwrap().trace().unwrap().re;
            }
        }
        let svd = gram.svd(false, false);
        let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
        let smin = svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
        if smin <= 1e-12 * smax.max(1.0) {
            return Err(OpError::FiducialIncomplete);
        }
        Ok(Self { projectors, dim, condition_number: smax / smin })
    }

    /// The standard tomographic family: `|j⟩`, `(|j⟩+|k⟩)/√2`, and
    /// `(|j⟩+i|k⟩)/√2` for `j < k`.
    pub fn canonical(n: usize) -> Self {
        let mut projectors = Vec::with_capacity(n * n);
        for j in 0..n {
            let mut v = vec![C64::ZERO; n];
            v[j] = C64::ONE;
            projectors.push(ComplexMatrix::outer(&v));
        }
        let h = C64::new(0.5f64.sqrt(), 0.0);
        for j in 0..n {
            for k in (j + 1)..n {
                let mut v = vec![C64::ZERO; n];
                v[j] = h;
                v[k] = h;
                projectors.push(ComplexMatrix::outer(&v));
                let mut v = vec![C64::ZERO; n];
                v[j] = h;
                v[k] = C64::new(0.0, 0.5f64.sqrt());
                projectors.push(ComplexMatrix::outer(&v));
            }
        }
        Self::new(projectors, DEFAULT_TOL).expect("canonical family is informationally complete")
    }

    pub fn projectors(&self) -> &[ComplexMatrix] {
        &self.projectors
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn condition_number(&self) -> f64 {
        self.condition_number
    }

    /// Forward Born probabilities `Tr(F_i σ F_i)` for each fiducial element.
    pub fn probabilities(&self, s: &DensityOperator) -> Result<Vec<f64>, OpError> {
        if s.dim() != self.dim {
            return Err(OpError::DimMismatch { expected: self.dim, got: s.dim() });
        }
        self.projectors
            .iter()
            .map(|f| Ok(f.mul(s.matrix())?.mul(f)?.trace()?.re))
            .collect()
    }
}

/// Reconstruct the unique density operator with the given fiducial Born
/// probabilities, solving the linear system in a Hermitian operator basis.
///
/// Tiny negative eigenvalues (≥ -1e-7) are clamped to zero and the result
/// renormalized; larger violations are reported as inconsistent input.
pub fn state_from_fiducial(
    probs: &[f64],
    fs: &FiducialSet,
    tol: f64,
) -> Result<DensityOperator, OpError> {
    let n = fs.dim();
    let n2 = n * n;
    if probs.len() != n2 {
        return Err(OpError::ProbCount(probs.len(), n2));
    }
    let basis = hermitian_basis(n);
    let mut m = nalgebra::DMatrix::<f64>::zeros(n2, n2);
    for (i, f) in fs.projectors().iter().enumerate() {
        for (j, b) in basis.iter().enumerate() {
            // Tr(F σ F) = Tr(F σ) for rank-1 projectors F.
            m[(i, j)] = f.mul(b).unwrap().trace().unwrap().re;
        }
    }
    let rhs = nalgebra::DVector::from_column_slice(probs);
    let sol = m
        .lu()
        .solve(&rhs)
        .ok_or(OpError::FiducialIncomplete)?;
    let mut sigma = ComplexMatrix::zeros(n, n);
    for (c, b) in sol.iter().zip(&basis) {
        sigma = sigma.add(&b.scale_real(*c))?;
    }

    let sd_tol = tol.max(DEFAULT_TOL);
    let eigs = sigma.hermitian_eigenvalues()?;
    let min_eig = eigs.first().copied().unwrap_or(0.0);
    if min_eig < -1e-7 {
        return Err(OpError::InconsistentProbs(format!(
            "reconstructed operator has eigenvalue {min_eig}"
        )));
    }
    let tr = sigma.trace()?.re;
    if (tr - 1.0).abs() > 1e-6 {
        return Err(OpError::InconsistentProbs(format!("reconstructed trace {tr}")));
    }
    // Clamp round-off negatives by eigenvalue truncation, then renormalize.
    let sigma = if min_eig < 0.0 {
        let sd = sigma.spectral_decompose(0.0)?;
        let mut acc = ComplexMatrix::zeros(n, n);
        for (w, q) in sd.weights.iter().zip(&sd.projectors) {
            if *w > 0.0 {
                acc = acc.add(&q.scale_real(*w))?;
            }
        }
        acc
    } else {
        sigma
    };
    let tr = sigma.trace()?.re;
    Ok(DensityOperator::normalized(sigma.scale_real(1.0 / tr), vec![n], sd_tol.max(1e-7))?)
}

/// Real basis of Hermitian n×n matrices: diagonal units, symmetric pairs,
/// antisymmetric (imaginary) pairs.
fn hermitian_basis(n: usize) -> Vec<ComplexMatrix> {
    let mut basis = Vec::with_capacity(n * n);
    for k in 0..n {
        let mut m = ComplexMatrix::zeros(n, n);
        m.set(k, k, C64::ONE);
        basis.push(m);
    }
    for j in 0..n {
        for k in (j + 1)..n {
            let mut m = ComplexMatrix::zeros(n, n);
            m.set(j, k, C64::ONE);
            m.set(k, j, C64::ONE);
            basis.push(m);
            let mut m = ComplexMatrix::zeros(n, n);
            m.set(j, k, C64::new(0.0, 1.0));
            m.set(k, j, C64::new(0.0, -1.0));
            basis.push(m);
        }
    }
    basis
}
