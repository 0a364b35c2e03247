//! Density operators, projection sets, Born-rule probabilities, projective
//! reduction, and unitary evolution.

use crate::linalg::{ComplexMatrix, C64, DEFAULT_TOL};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("linear algebra: {0}")]
    Linalg(#[from] crate::linalg::LinalgError),
    #[error("operator is not Hermitian within {0}")]
    NotHermitian(f64),
    #[error("operator is not positive semidefinite within {0}")]
    NotPsd(f64),
    #[error("trace {0} outside [0, 1+tol]")]
    BadTrace(f64),
    #[error("matrix dimension {dim} does not match factors {dims:?}")]
    DimMismatch { dim: usize, dims: Vec<usize> },
    #[error("dimension mismatch: state {0}, operator {1}")]
    SpaceMismatch(usize, usize),
    #[error("projection set violates condition {0}")]
    BadProjectionSet(&'static str),
    #[error("state has (near-)zero trace")]
    ZeroTrace,
    #[error("outcome {0} has (near-)zero Born probability")]
    ZeroProbabilityOutcome(usize),
    #[error("unknown outcome index {0}")]
    UnknownOutcome(usize),
}

/// A positive, Hermitian operator on a (possibly composite) Hilbert space.
///
/// The trace lies in `[0, 1+ε]`; unit-trace instances are *normalized*
/// states, smaller traces arise as un-normalized reduction outcomes.
#[derive(Debug, Clone)]
pub struct DensityOperator {
    matrix: ComplexMatrix,
    dims: Vec<usize>,
    trace_value: f64,
}

impl DensityOperator {
    pub fn new(matrix: ComplexMatrix, dims: Vec<usize>, tol: f64) -> Result<Self, StateError> {
        let total: usize = dims.iter().product();
        if !matrix.is_square() || matrix.rows() != total || dims.iter().any(|&d| d == 0) {
            return Err(StateError::DimMismatch { dim: matrix.rows(), dims });
        }
        if !matrix.is_hermitian(tol)? {
            return Err(StateError::NotHermitian(tol));
        }
        if !matrix.is_psd(tol)? {
            return Err(StateError::NotPsd(tol));
        }
        let trace_value = matrix.trace()?.re;
        if !(-tol..=1.0 + tol).contains(&trace_value) {
            return Err(StateError::BadTrace(trace_value));
        }
        Ok(Self { matrix, dims, trace_value })
    }

    /// Like [`DensityOperator::new`] but additionally requires unit trace.
    pub fn normalized(matrix: ComplexMatrix, dims: Vec<usize>, tol: f64) -> Result<Self, StateError> {
        let s = Self::new(matrix, dims, tol)?;
        if (s.trace_value - 1.0).abs() > tol {
            return Err(StateError::BadTrace(s.trace_value));
        }
        Ok(s)
    }

    /// Pure state `|v⟩⟨v|` from a normalized ket.
    pub fn pure(ket: &[C64], dims: Vec<usize>) -> Result<Self, StateError> {
        let norm: f64 = ket.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let v: Vec<C64> = ket.iter().map(|z| z / norm).collect();
        Self::new(ComplexMatrix::outer(&v), dims, DEFAULT_TOL)
    }

    /// Computational basis state `|k⟩⟨k|`.
    pub fn basis(dims: Vec<usize>, k: usize) -> Result<Self, StateError> {
        let n: usize = dims.iter().product();
        let mut v = vec![C64::ZERO; n];
        v[k] = C64::ONE;
        Self::pure(&v, dims)
    }

    pub fn maximally_mixed(dims: Vec<usize>) -> Self {
        let n: usize = dims.iter().product();
        Self {
            matrix: ComplexMatrix::identity(n).scale_real(1.0 / n as f64),
            dims,
            trace_value: 1.0,
        }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn trace_value(&self) -> f64 {
        self.trace_value
    }

    pub fn tensor(&self, other: &Self) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self {
            matrix: self.matrix.tensor(&other.matrix),
            dims,
            trace_value: self.trace_value * other.trace_value,
        }
    }

    /// Reduced state on the kept factors (quantum marginalization).
    pub fn reduced(&self, keep: &[usize]) -> Result<Self, StateError> {
        let m = self.matrix.partial_trace(&self.dims, keep)?;
        let mut keep_sorted = keep.to_vec();
        keep_sorted.sort_unstable();
        keep_sorted.dedup();
        let dims: Vec<usize> = keep_sorted.iter().map(|&k| self.dims[k]).collect();
        let trace_value = m.trace()?.re;
        Ok(Self { matrix: m, dims, trace_value })
    }

    /// Rescale so the trace is exactly 1.
    pub fn renormalized(&self) -> Result<Self, StateError> {
        if self.trace_value <= DEFAULT_TOL {
            return Err(StateError::ZeroTrace);
        }
        Ok(Self {
            matrix: self.matrix.scale_real(1.0 / self.trace_value),
            dims: self.dims.clone(),
            trace_value: 1.0,
        })
    }

    /// Total Hilbert-space dimension — the upper bound on the number of
    /// outcomes of any projective reduction on this space.
    pub fn max_outcomes(&self) -> usize {
        self.dim()
    }

    /// Unitary evolution `U σ U†` with `U = exp(-i h t)`.
    pub fn evolve(&self, h: &Hamiltonian, t: f64) -> Result<Self, StateError> {
        if h.matrix.rows() != self.dim() {
            return Err(StateError::SpaceMismatch(self.dim(), h.matrix.rows()));
        }
        let u = h.matrix.herm_expm(t)?;
        let m = u.mul(&self.matrix)?.mul(&u.adjoint())?;
        Ok(Self { matrix: m, dims: self.dims.clone(), trace_value: self.trace_value })
    }

    /// Born probabilities `Tr(P_i σ P_i)/Tr(σ)` for each outcome of `ps`.
    pub fn born_probabilities(&self, ps: &ProjectionSet) -> Result<Vec<f64>, StateError> {
        if ps.space_dim() != self.dim() {
            return Err(StateError::SpaceMismatch(self.dim(), ps.space_dim()));
        }
        if self.trace_value <= DEFAULT_TOL {
            return Err(StateError::ZeroTrace);
        }
        ps.projectors
            .iter()
            .map(|p| {
                let psp = p.mul(&self.matrix)?.mul(p)?;
                Ok(psp.trace()?.re / self.trace_value)
            })
            .collect()
    }

    /// Normalized reduction outcome `P_i σ P_i / Tr(P_i σ P_i)`.
    pub fn reduce(&self, ps: &ProjectionSet, outcome: usize) -> Result<Self, StateError> {
        if outcome >= ps.len() {
            return Err(StateError::UnknownOutcome(outcome));
        }
        let probs = self.born_probabilities(ps)?;
        if probs[outcome] <= DEFAULT_TOL {
            return Err(StateError::ZeroProbabilityOutcome(outcome));
        }
        let p = &ps.projectors[outcome];
        let psp = p.mul(&self.matrix)?.mul(p)?;
        let t = psp.trace()?.re;
        Ok(Self {
            matrix: psp.scale_real(1.0 / t),
            dims: self.dims.clone(),
            trace_value: 1.0,
        })
    }
}

/// A set of mutually orthogonal projectors summing to the identity, with
/// opaque outcome labels.
#[derive(Debug, Clone)]
pub struct ProjectionSet {
    projectors: Vec<ComplexMatrix>,
    labels: Vec<String>,
}

impl ProjectionSet {
    /// Validate conditions i–iii. Labels default to `o0`, `o1`, ….
    pub fn new(
        projectors: Vec<ComplexMatrix>,
        labels: Option<Vec<String>>,
        tol: f64,
    ) -> Result<Self, StateError> {
        if projectors.is_empty() {
            return Err(StateError::BadProjectionSet("nonempty"));
        }
        let n = projectors[0].rows();
        for p in &projectors {
            if !p.is_square() || p.rows() != n {
                return Err(StateError::BadProjectionSet("common space"));
            }
        }
        for (i, p) in projectors.iter().enumerate() {
            if p.mul(p)?.max_abs_diff(p) > tol {
                return Err(StateError::BadProjectionSet("i (idempotence)"));
            }
            for q in &projectors[i + 1..] {
                if p.mul(q)?.max_abs() > tol {
                    return Err(StateError::BadProjectionSet("ii (orthogonality)"));
                }
            }
        }
        let mut sum = ComplexMatrix::zeros(n, n);
        for p in &projectors {
            sum = sum.add(p)?;
        }
        if sum.max_abs_diff(&ComplexMatrix::identity(n)) > tol {
            return Err(StateError::BadProjectionSet("iii (completeness)"));
        }
        let labels = match labels {
            Some(ls) => {
                if ls.len() != projectors.len() {
                    return Err(StateError::BadProjectionSet("label count"));
                }
                ls
            }
            None => (0..projectors.len()).map(|k| format!("o{k}")).collect(),
        };
        Ok(Self { projectors, labels })
    }

    /// Projectors onto the computational basis of dimension `n`.
    pub fn computational(n: usize) -> Self {
        let projectors = (0..n)
            .map(|k| {
                let mut d = vec![0.0; n];
                d[k] = 1.0;
                ComplexMatrix::diagonal(&d)
            })
            .collect();
        Self::new(projectors, None, DEFAULT_TOL).expect("basis projectors are valid")
    }

    pub fn projectors(&self) -> &[ComplexMatrix] {
        &self.projectors
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }

    pub fn space_dim(&self) -> usize {
        self.projectors[0].rows()
    }
}

/// Hermitian generator of unitary evolution.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    matrix: ComplexMatrix,
}

impl Hamiltonian {
    pub fn new(matrix: ComplexMatrix, tol: f64) -> Result<Self, StateError> {
        if !matrix.is_hermitian(tol)? {
            return Err(StateError::NotHermitian(tol));
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{pauli_x, DEFAULT_TOL};

    fn plus() -> DensityOperator {
        let h = C64::new(0.5f64.sqrt(), 0.0);
        DensityOperator::pure(&[h, h], vec![2]).unwrap()
    }

    fn bell() -> DensityOperator {
        let h = C64::new(0.5f64.sqrt(), 0.0);
        DensityOperator::pure(&[h, C64::ZERO, C64::ZERO, h], vec![2, 2]).unwrap()
    }

    #[test]
    fn evolve_identity_hamiltonian() {
        let s = plus();
        let h = Hamiltonian::new(ComplexMatrix::zeros(2, 2), DEFAULT_TOL).unwrap();
        let out = s.evolve(&h, 3.0).unwrap();
        assert!(out.matrix().approx_eq(s.matrix(), 1e-12));
    }

    #[test]
    fn evolve_bit_flip() {
        let s = DensityOperator::basis(vec![2], 0).unwrap();
        let h = Hamiltonian::new(pauli_x(), DEFAULT_TOL).unwrap();
        let out = s.evolve(&h, std::f64::consts::FRAC_PI_2).unwrap();
        let one = DensityOperator::basis(vec![2], 1).unwrap();
        assert!(out.matrix().approx_eq(one.matrix(), 1e-12));
    }

    #[test]
    fn evolve_preserves_trace_and_spectrum() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let m = crate::linalg::tests::random_psd(3, &mut rng);
            let t = m.trace().unwrap().re;
            let s = DensityOperator::new(m.scale_real(1.0 / t), vec![3], 1e-8).unwrap();
            let g = crate::linalg::tests::random_psd(3, &mut rng);
            let ham = Hamiltonian::new(g, 1e-8).unwrap();
            let out = s.evolve(&ham, 0.9).unwrap();
            assert!((out.trace_value() - s.trace_value()).abs() < 1e-10);
            let e0 = s.matrix().hermitian_eigenvalues().unwrap();
            let e1 = out.matrix().hermitian_eigenvalues().unwrap();
            for (a, b) in e0.iter().zip(&e1) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn born_computational() {
        let ps = ProjectionSet::computational(2);
        let zero = DensityOperator::basis(vec![2], 0).unwrap();
        let p = zero.born_probabilities(&ps).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1].abs() < 1e-12);

        let mixed = DensityOperator::maximally_mixed(vec![2]);
        let p = mixed.born_probabilities(&ps).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);

        let p = plus().born_probabilities(&ps).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn reduce_examples() {
        let ps = ProjectionSet::computational(2);
        let out = plus().reduce(&ps, 0).unwrap();
        assert!(out.matrix().approx_eq(DensityOperator::basis(vec![2], 0).unwrap().matrix(), 1e-12));

        // Reducing a basis state onto its own projector is idempotent.
        let zero = DensityOperator::basis(vec![2], 0).unwrap();
        let again = zero.reduce(&ps, 0).unwrap();
        assert!(again.matrix().approx_eq(zero.matrix(), 1e-12));

        // Bell state with P = |0⟩⟨0| ⊗ I collapses to |00⟩⟨00|.
        let p0 = ComplexMatrix::diagonal(&[1.0, 0.0]).tensor(&ComplexMatrix::identity(2));
        let p1 = ComplexMatrix::diagonal(&[0.0, 1.0]).tensor(&ComplexMatrix::identity(2));
        let ps2 = ProjectionSet::new(vec![p0, p1], None, DEFAULT_TOL).unwrap();
        let out = bell().reduce(&ps2, 0).unwrap();
        assert!(out.matrix().approx_eq(DensityOperator::basis(vec![2, 2], 0).unwrap().matrix(), 1e-12));
    }

    #[test]
    fn reduce_zero_probability_errors() {
        let ps = ProjectionSet::computational(2);
        let zero = DensityOperator::basis(vec![2], 0).unwrap();
        assert!(matches!(
            zero.reduce(&ps, 1),
            Err(StateError::ZeroProbabilityOutcome(1))
        ));
    }

    #[test]
    fn reduce_idempotent() {
        let ps = ProjectionSet::computational(2);
        let once = plus().reduce(&ps, 0).unwrap();
        let twice = once.reduce(&ps, 0).unwrap();
        assert!(once.matrix().approx_eq(twice.matrix(), 1e-9));
    }

    #[test]
    fn max_outcomes_examples() {
        assert_eq!(DensityOperator::maximally_mixed(vec![2]).max_outcomes(), 2);
        assert_eq!(DensityOperator::maximally_mixed(vec![2, 2]).max_outcomes(), 4);
        assert_eq!(DensityOperator::maximally_mixed(vec![1]).max_outcomes(), 1);
    }

    #[test]
    fn born_sums_to_one_random() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for n in [2usize, 4, 8] {
            for _ in 0..10 {
                let m = crate::linalg::tests::random_psd(n, &mut rng);
                let t = m.trace().unwrap().re;
                let s = DensityOperator::new(m.scale_real(1.0 / t), vec![n], 1e-8).unwrap();
                let u = crate::linalg::haar_unitary(n, &mut rng);
                let projs: Vec<ComplexMatrix> = (0..n)
                    .map(|k| {
                        let v: Vec<C64> = (0..n).map(|i| u.get(i, k)).collect();
                        ComplexMatrix::outer(&v)
                    })
                    .collect();
                let ps = ProjectionSet::new(projs, None, 1e-8).unwrap();
                let sum: f64 = s.born_probabilities(&ps).unwrap().iter().sum();
                assert!((sum - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn spectral_round_trip() {
        // Decompose a mixed state into rank-1 terms and resum.
        let mixed = DensityOperator::new(
            ComplexMatrix::diagonal(&[0.6, 0.3, 0.1]),
            vec![3],
            DEFAULT_TOL,
        )
        .unwrap();
        let sd = mixed.matrix().spectral_decompose(1e-9).unwrap();
        assert!(sd.reconstruct(3).approx_eq(mixed.matrix(), 1e-9));
    }

    #[test]
    fn projection_set_rejects_bad() {
        let p = ComplexMatrix::diagonal(&[1.0, 0.0]);
        assert!(ProjectionSet::new(vec![p.clone()], None, DEFAULT_TOL).is_err()); // no completeness
        let q = ComplexMatrix::diagonal(&[1.0, 0.0]); // overlapping
        assert!(ProjectionSet::new(vec![p, q], None, DEFAULT_TOL).is_err());
    }
}
