//! Dense complex linear algebra kernel.
//!
//! Everything in this crate ultimately bottoms out in [`ComplexMatrix`]:
//! construction, Hermitian/PSD tests, trace, tensor product, partial trace,
//! spectral decomposition, and the Hermitian matrix exponential.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

/// Complex scalar used throughout.
pub type C64 = Complex64;

/// Default tolerance for equality and positivity checks.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Eigenvalue gap below which eigenvectors are treated as degenerate and
/// re-orthonormalized deterministically.
pub const DEGENERACY_GAP: f64 = 1e-8;

/// Threshold for locating the first nonzero component when fixing the
/// global phase of an eigenvector.
const PHASE_SCAN_TOL: f64 = 1e-10;

/// Default cap on the total joint dimension of any constructed operator.
pub const DEFAULT_DIM_CAP: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("entry ({0},{1}) is not finite")]
    NonFiniteEntry(usize, usize),
    #[error("expected {rows}x{cols} entries, got {got}")]
    ShapeMismatch { rows: usize, cols: usize, got: usize },
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix dimension {dim} does not match factor dimensions {dims:?}")]
    FactorMismatch { dim: usize, dims: Vec<usize> },
    #[error("kept factor set is empty or out of range")]
    BadKeepSet,
    #[error("matrix is not Hermitian within tolerance {0}")]
    NotHermitian(f64),
    #[error("incompatible shapes {0}x{1} and {2}x{3}")]
    IncompatibleShapes(usize, usize, usize, usize),
}

/// Dense complex matrix, the substrate for all operators in this crate.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    data: DMatrix<C64>,
}

impl ComplexMatrix {
    /// Build from row-major entries, rejecting NaN/Inf components.
    pub fn from_rows(rows: usize, cols: usize, entries: &[C64]) -> Result<Self, LinalgError> {
        if entries.len() != rows * cols {
            return Err(LinalgError::ShapeMismatch { rows, cols, got: entries.len() });
        }
        let m = Self { data: DMatrix::from_row_slice(rows, cols, entries) };
        m.check_finite()?;
        Ok(m)
    }

    /// Build from real row-major entries.
    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Result<Self, LinalgError> {
        let cs: Vec<C64> = entries.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::from_rows(rows, cols, &cs)
    }

    pub(crate) fn from_dmatrix(data: DMatrix<C64>) -> Self {
        Self { data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { data: DMatrix::zeros(rows, cols) }
    }

    pub fn identity(n: usize) -> Self {
        Self { data: DMatrix::identity(n, n) }
    }

    pub fn diagonal(entries: &[f64]) -> Self {
        let n = entries.len();
        let mut m = DMatrix::zeros(n, n);
        for (k, &x) in entries.iter().enumerate() {
            m[(k, k)] = C64::new(x, 0.0);
        }
        Self { data: m }
    }

    /// Rank-1 outer product `v v†` of a (not necessarily normalized) ket.
    pub fn outer(ket: &[C64]) -> Self {
        let n = ket.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = ket[i] * ket[j].conj();
            }
        }
        Self { data: m }
    }

    /// Column matrix holding a ket.
    pub fn ket(v: &[C64]) -> Self {
        Self { data: DMatrix::from_column_slice(v.len(), 1, v) }
    }

    /// Computational basis ket `|k⟩` of dimension `n`.
    pub fn basis_ket(n: usize, k: usize) -> Self {
        let mut v = vec![C64::ZERO; n];
        v[k] = C64::ONE;
        Self::ket(&v)
    }

    fn check_finite(&self) -> Result<(), LinalgError> {
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                let z = self.data[(i, j)];
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(LinalgError::NonFiniteEntry(i, j));
                }
            }
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, z: C64) {
        self.data[(i, j)] = z;
    }

    /// Row-major iteration over entries.
    pub fn entries(&self) -> impl Iterator<Item = C64> + '_ {
        (0..self.rows()).flat_map(move |i| (0..self.cols()).map(move |j| self.data[(i, j)]))
    }

    pub fn mul(&self, other: &Self) -> Result<Self, LinalgError> {
        if self.cols() != other.rows() {
            return Err(LinalgError::IncompatibleShapes(
                self.rows(),
                self.cols(),
                other.rows(),
                other.cols(),
            ));
        }
        Ok(Self { data: &self.data * &other.data })
    }

    pub fn add(&self, other: &Self) -> Result<Self, LinalgError> {
        if self.rows() != other.rows() || self.cols() != other.cols() {
            return Err(LinalgError::IncompatibleShapes(
                self.rows(),
                self.cols(),
                other.rows(),
                other.cols(),
            ));
        }
        Ok(Self { data: &self.data + &other.data })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, LinalgError> {
        if self.rows() != other.rows() || self.cols() != other.cols() {
            return Err(LinalgError::IncompatibleShapes(
                self.rows(),
                self.cols(),
                other.rows(),
                other.cols(),
            ));
        }
        Ok(Self { data: &self.data - &other.data })
    }

    pub fn scale(&self, z: C64) -> Self {
        Self { data: self.data.map(|x| x * z) }
    }

    pub fn scale_real(&self, x: f64) -> Self {
        self.scale(C64::new(x, 0.0))
    }

    pub fn adjoint(&self) -> Self {
        Self { data: self.data.adjoint() }
    }

    pub fn transpose(&self) -> Self {
        Self { data: self.data.transpose() }
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.rows(), other.rows());
        assert_eq!(self.cols(), other.cols());
        let mut m = 0.0f64;
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                m = m.max((self.data[(i, j)] - other.data[(i, j)]).norm());
            }
        }
        m
    }

    /// Largest entrywise modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.rows() == other.rows()
            && self.cols() == other.cols()
            && self.max_abs_diff(other) <= tol
    }

    /// Sum of diagonal entries.
    pub fn trace(&self) -> Result<C64, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare { rows: self.rows(), cols: self.cols() });
        }
        Ok((0..self.rows()).map(|k| self.data[(k, k)]).sum())
    }

    /// Kronecker product; dimensions multiply.
    pub fn tensor(&self, other: &Self) -> Self {
        Self { data: self.data.kronecker(&other.data) }
    }

    pub fn is_hermitian(&self, tol: f64) -> Result<bool, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare { rows: self.rows(), cols: self.cols() });
        }
        Ok(self.max_abs_diff(&self.adjoint()) <= tol)
    }

    /// PSD iff Hermitian and the minimum eigenvalue is at least `-tol`.
    pub fn is_psd(&self, tol: f64) -> Result<bool, LinalgError> {
        if !self.is_hermitian(tol)? {
            return Ok(false);
        }
        let eigs = self.hermitian_eigenvalues()?;
        if eigs.iter().all(|x| x.is_finite()) {
            return Ok(eigs.iter().all(|&x| x >= -tol));
        }
        // The iterative eigensolver can fail to converge on large degenerate
        // matrices; fall back to Cholesky of the tol-shifted matrix.
        let shift = ComplexMatrix::identity(self.rows()).scale_real(2.0 * tol);
        Ok(self.add(&shift)?.data.cholesky().is_some())
    }

    /// Real eigenvalues of a Hermitian matrix, ascending.
    pub fn hermitian_eigenvalues(&self) -> Result<Vec<f64>, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare { rows: self.rows(), cols: self.cols() });
        }
        let se = self.data.clone().symmetric_eigen();
        let mut v: Vec<f64> = se.eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        Ok(v)
    }

    /// Reduced operator on the kept tensor factors.
    ///
    /// `dims` are the factor dimensions (their product must equal the matrix
    /// dimension); `keep` is a nonempty list of factor indices. Kept factors
    /// appear in increasing original order.
    pub fn partial_trace(&self, dims: &[usize], keep: &[usize]) -> Result<Self, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare { rows: self.rows(), cols: self.cols() });
        }
        let total: usize = dims.iter().product();
        if total != self.rows() || dims.iter().any(|&d| d == 0) {
            return Err(LinalgError::FactorMismatch { dim: self.rows(), dims: dims.to_vec() });
        }
        let mut keep_sorted: Vec<usize> = keep.to_vec();
        keep_sorted.sort_unstable();
        keep_sorted.dedup();
        if keep_sorted.is_empty() || keep_sorted.iter().any(|&k| k >= dims.len()) {
            return Err(LinalgError::BadKeepSet);
        }
        let traced: Vec<usize> =
            (0..dims.len()).filter(|k| !keep_sorted.contains(k)).collect();
        let keep_dims: Vec<usize> = keep_sorted.iter().map(|&k| dims[k]).collect();
        let traced_dims: Vec<usize> = traced.iter().map(|&k| dims[k]).collect();
        let out_dim: usize = keep_dims.iter().product();
        let trace_dim: usize = traced_dims.iter().product::<usize>().max(1);

        let mut out = DMatrix::zeros(out_dim, out_dim);
        let mut full_i = vec![0usize; dims.len()];
        let mut full_j = vec![0usize; dims.len()];
        for oi in 0..out_dim {
            let ki = unindex(oi, &keep_dims);
            for oj in 0..out_dim {
                let kj = unindex(oj, &keep_dims);
                let mut acc = C64::ZERO;
                for t in 0..trace_dim {
                    let td = unindex(t, &traced_dims);
                    for (s, &f) in keep_sorted.iter().enumerate() {
                        full_i[f] = ki[s];
                        full_j[f] = kj[s];
                    }
                    for (s, &f) in traced.iter().enumerate() {
                        full_i[f] = td[s];
                        full_j[f] = td[s];
                    }
                    acc += self.data[(index(&full_i, dims), index(&full_j, dims))];
                }
                out[(oi, oj)] = acc;
            }
        }
        Ok(Self { data: out })
    }

    /// Spectral decomposition `a = Σ θ_i Q_i` of a Hermitian PSD matrix into
    /// rank-1 mutually orthogonal projectors with canonical ordering and a
    /// deterministic treatment of degenerate eigenspaces.
    pub fn spectral_decompose(&self, tol: f64) -> Result<SpectralDecomposition, LinalgError> {
        let pairs = self.hermitian_eigenpairs(tol)?;
        let mut items: Vec<(f64, ComplexMatrix)> = pairs
            .into_iter()
            .filter(|(w, _)| *w >= tol)
            .map(|(w, v)| (w, ComplexMatrix::outer(&v)))
            .collect();
        items.sort_by(|a, b| {
            b.0.total_cmp(&a.0).then_with(|| cmp_entries(&a.1, &b.1))
        });
        let (weights, projectors) = items.into_iter().unzip();
        Ok(SpectralDecomposition { weights, projectors })
    }

    /// All eigenpairs of a Hermitian matrix with normalized kets, sorted by
    /// descending eigenvalue, with deterministic re-orthonormalization of
    /// degenerate clusters and fixed phases.
    pub fn hermitian_eigenpairs(&self, tol: f64) -> Result<Vec<(f64, Vec<C64>)>, LinalgError> {
        if !self.is_hermitian(tol)? {
            return Err(LinalgError::NotHermitian(tol));
        }
        let n = self.rows();
        let se = self.data.clone().symmetric_eigen();
        let mut pairs: Vec<(f64, Vec<C64>)> = (0..n)
            .map(|k| {
                (se.eigenvalues[k], se.eigenvectors.column(k).iter().copied().collect())
            })
            .collect();
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n && (pairs[end - 1].0 - pairs[end].0).abs() < DEGENERACY_GAP {
                end += 1;
            }
            gram_schmidt(&mut pairs[start..end]);
            start = end;
        }
        for (_, v) in pairs.iter_mut() {
            fix_phase(v);
        }
        Ok(pairs)
    }

    /// Unitary `exp(-i h t)` of a Hermitian generator `h` (natural units),
    /// computed by eigendecomposition.
    pub fn herm_expm(&self, t: f64) -> Result<Self, LinalgError> {
        if !self.is_hermitian(DEFAULT_TOL)? {
            return Err(LinalgError::NotHermitian(DEFAULT_TOL));
        }
        let se = self.data.clone().symmetric_eigen();
        let n = self.rows();
        let mut d = DMatrix::zeros(n, n);
        for k in 0..n {
            d[(k, k)] = (C64::new(0.0, -1.0) * se.eigenvalues[k] * t).exp();
        }
        let v = &se.eigenvectors;
        Ok(Self { data: v * d * v.adjoint() })
    }
}

/// Result of [`ComplexMatrix::spectral_decompose`]: nonnegative weights and
/// mutually orthogonal rank-1 projectors, ordered by descending weight.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub weights: Vec<f64>,
    pub projectors: Vec<ComplexMatrix>,
}

impl SpectralDecomposition {
    /// Reassemble `Σ θ_i Q_i`.
    pub fn reconstruct(&self, n: usize) -> ComplexMatrix {
        let mut acc = ComplexMatrix::zeros(n, n);
        for (w, q) in self.weights.iter().zip(&self.projectors) {
            acc = acc.add(&q.scale_real(*w)).expect("uniform dimensions");
        }
        acc
    }

    /// Extract the normalized ket of rank-1 projector `k`.
    pub fn eigenvector(&self, k: usize) -> Vec<C64> {
        projector_ket(&self.projectors[k])
    }
}

/// Recover a normalized, phase-fixed ket from a rank-1 projector.
pub fn projector_ket(p: &ComplexMatrix) -> Vec<C64> {
    let n = p.rows();
    // Column with the largest diagonal entry carries the ket up to phase.
    let mut best = 0;
    let mut best_val = -1.0f64;
    for j in 0..n {
        let d = p.get(j, j).re;
        if d > best_val {
            best_val = d;
            best = j;
        }
    }
    let norm = best_val.max(0.0).sqrt();
    let mut v: Vec<C64> = (0..n).map(|i| p.get(i, best) / norm).collect();
    fix_phase(&mut v);
    v
}

fn gram_schmidt(cluster: &mut [(f64, Vec<C64>)]) {
    for k in 0..cluster.len() {
        let (done, rest) = cluster.split_at_mut(k);
        let v = &mut rest[0].1;
        for (_, u) in done.iter() {
            let ip: C64 = u.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
            for (x, y) in v.iter_mut().zip(u.iter()) {
                *x -= ip * y;
            }
        }
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > PHASE_SCAN_TOL {
            for x in v.iter_mut() {
                *x /= norm;
            }
        }
    }
}

/// Rotate a ket so its first component of modulus above the scan threshold
/// is real positive.
fn fix_phase(v: &mut [C64]) {
    if let Some(z) = v.iter().find(|z| z.norm() > PHASE_SCAN_TOL) {
        let phase = z / z.norm();
        let correction = phase.conj();
        for x in v.iter_mut() {
            *x *= correction;
        }
    }
}

/// Lexicographic comparison of entry sequences, (re, im) per entry.
fn cmp_entries(a: &ComplexMatrix, b: &ComplexMatrix) -> std::cmp::Ordering {
    for (x, y) in a.entries().zip(b.entries()) {
        let c = x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im));
        if c != std::cmp::Ordering::Equal {
            return c;
        }
    }
    std::cmp::Ordering::Equal
}

/// Decompose a flat index into mixed-radix digits (first factor most
/// significant, matching row-major Kronecker ordering).
pub fn unindex(mut idx: usize, dims: &[usize]) -> Vec<usize> {
    let mut digits = vec![0usize; dims.len()];
    for k in (0..dims.len()).rev() {
        digits[k] = idx % dims[k];
        idx /= dims[k];
    }
    digits
}

/// Inverse of [`unindex`].
pub fn index(digits: &[usize], dims: &[usize]) -> usize {
    let mut idx = 0usize;
    for (d, &n) in digits.iter().zip(dims.iter()) {
        idx = idx * n + d;
    }
    idx
}

/// Assemble an operator on the full tensor space from per-group operators.
///
/// `groups` is a list of (global factor slots, operator on the tensor product
/// of those slots in the given order); the groups must partition
/// `0..dims.len()`. This covers plain Kronecker products as well as factor
/// permutations.
pub fn compose_groups(
    dims: &[usize],
    groups: &[(Vec<usize>, &ComplexMatrix)],
) -> Result<ComplexMatrix, LinalgError> {
    let mut seen = vec![false; dims.len()];
    for (slots, m) in groups {
        let gdim: usize = slots.iter().map(|&s| dims[s]).product();
        if m.rows() != gdim || m.cols() != gdim {
            return Err(LinalgError::FactorMismatch {
                dim: m.rows(),
                dims: slots.iter().map(|&s| dims[s]).collect(),
            });
        }
        for &s in slots {
            if s >= dims.len() || seen[s] {
                return Err(LinalgError::BadKeepSet);
            }
            seen[s] = true;
        }
    }
    if seen.iter().any(|&s| !s) {
        return Err(LinalgError::BadKeepSet);
    }
    let total: usize = dims.iter().product();
    let mut out = DMatrix::zeros(total, total);
    for i in 0..total {
        let di = unindex(i, dims);
        for j in 0..total {
            let dj = unindex(j, dims);
            let mut acc = C64::ONE;
            for (slots, m) in groups {
                let gdims: Vec<usize> = slots.iter().map(|&s| dims[s]).collect();
                let gi: Vec<usize> = slots.iter().map(|&s| di[s]).collect();
                let gj: Vec<usize> = slots.iter().map(|&s| dj[s]).collect();
                acc *= m.get(index(&gi, &gdims), index(&gj, &gdims));
                if acc == C64::ZERO {
                    break;
                }
            }
            out[(i, j)] = acc;
        }
    }
    Ok(ComplexMatrix::from_dmatrix(out))
}

/// Haar-distributed random unitary via QR of a Ginibre matrix with the
/// standard phase correction.
pub fn haar_unitary<R: rand::Rng>(n: usize, rng: &mut R) -> ComplexMatrix {
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            g[(i, j)] = C64::new(gauss(rng), gauss(rng));
        }
    }
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::ONE };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    ComplexMatrix::from_dmatrix(q)
}

// Box-Muller standard normal.
fn gauss<R: rand::Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Pauli matrices, used pervasively in tests and channel constructions.
pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap()
}

pub fn pauli_y() -> ComplexMatrix {
    let i = C64::new(0.0, 1.0);
    ComplexMatrix::from_rows(2, 2, &[C64::ZERO, -i, i, C64::ZERO]).unwrap()
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, -1.0]).unwrap()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    fn random_hermitian(n: usize, rng: &mut impl rand::Rng) -> ComplexMatrix {
        let mut entries = vec![C64::ZERO; n * n];
        for i in 0..n {
            for j in 0..n {
                entries[i * n + j] = C64::new(gauss(rng), gauss(rng));
            }
        }
        let a = ComplexMatrix::from_rows(n, n, &entries).unwrap();
        a.add(&a.adjoint()).unwrap().scale_real(0.5)
    }

    pub(crate) fn random_psd(n: usize, rng: &mut impl rand::Rng) -> ComplexMatrix {
        let mut entries = vec![C64::ZERO; n * n];
        for i in 0..n {
            for j in 0..n {
                entries[i * n + j] = C64::new(gauss(rng), gauss(rng));
            }
        }
        let a = ComplexMatrix::from_rows(n, n, &entries).unwrap();
        a.mul(&a.adjoint()).unwrap()
    }

    fn rng() -> impl rand::Rng {
        use rand::SeedableRng;
        rand_chacha::ChaCha8Rng::seed_from_u64(17)
    }

    #[test]
    fn tensor_identity() {
        let i2 = ComplexMatrix::identity(2);
        assert!(i2.tensor(&i2).approx_eq(&ComplexMatrix::identity(4), 0.0));
    }

    #[test]
    fn tensor_diag() {
        let d = ComplexMatrix::diagonal(&[1.0, 0.0]);
        let got = d.tensor(&d);
        assert!(got.approx_eq(&ComplexMatrix::diagonal(&[1.0, 0.0, 0.0, 0.0]), 0.0));
    }

    #[test]
    fn tensor_kets() {
        // |0⟩⟨0| ⊗ |1⟩⟨1| has its single 1 at row-major position (1,1).
        let p0 = ComplexMatrix::diagonal(&[1.0, 0.0]);
        let p1 = ComplexMatrix::diagonal(&[0.0, 1.0]);
        let got = p0.tensor(&p1);
        let mut want = ComplexMatrix::zeros(4, 4);
        want.set(1, 1, C64::ONE);
        assert!(got.approx_eq(&want, 0.0));
    }

    #[test]
    fn tensor_mixed_product() {
        let mut r = rng();
        let a = random_hermitian(2, &mut r);
        let b = random_hermitian(3, &mut r);
        let c = random_hermitian(2, &mut r);
        let d = random_hermitian(3, &mut r);
        let lhs = a.tensor(&b).mul(&c.tensor(&d)).unwrap();
        let rhs = a.mul(&c).unwrap().tensor(&b.mul(&d).unwrap());
        assert!(lhs.approx_eq(&rhs, 1e-12));
    }

    #[test]
    fn trace_examples() {
        assert_eq!(ComplexMatrix::identity(4).trace().unwrap(), C64::new(4.0, 0.0));
        let d = ComplexMatrix::diagonal(&[0.7, 0.3]);
        assert!((d.trace().unwrap() - C64::ONE).norm() < 1e-15);
        assert!(ComplexMatrix::zeros(2, 3).trace().is_err());
    }

    #[test]
    fn trace_cyclic() {
        let mut r = rng();
        for _ in 0..10 {
            let a = random_hermitian(4, &mut r);
            let b = random_hermitian(4, &mut r);
            let ab = a.mul(&b).unwrap().trace().unwrap();
            let ba = b.mul(&a).unwrap().trace().unwrap();
            assert!((ab - ba).norm() < 1e-10);
        }
    }

    #[test]
    fn partial_trace_product() {
        let mut r = rng();
        let sigma = random_hermitian(2, &mut r);
        let rho = {
            let p = random_psd(3, &mut r);
            let t = p.trace().unwrap().re;
            p.scale_real(1.0 / t)
        };
        let joint = sigma.tensor(&rho);
        let red = joint.partial_trace(&[2, 3], &[0]).unwrap();
        assert!(red.approx_eq(&sigma, 1e-10));
    }

    #[test]
    fn partial_trace_bell() {
        let h = 0.5f64.sqrt();
        let bell = ComplexMatrix::outer(&[
            C64::new(h, 0.0),
            C64::ZERO,
            C64::ZERO,
            C64::new(h, 0.0),
        ]);
        let half = ComplexMatrix::identity(2).scale_real(0.5);
        assert!(bell.partial_trace(&[2, 2], &[0]).unwrap().approx_eq(&half, 1e-12));
        assert!(bell.partial_trace(&[2, 2], &[1]).unwrap().approx_eq(&half, 1e-12));
    }

    #[test]
    fn partial_trace_keep_all() {
        let mut r = rng();
        let a = random_psd(6, &mut r);
        let kept = a.partial_trace(&[2, 3], &[0, 1]).unwrap();
        assert!(kept.approx_eq(&a, 1e-12));
    }

    #[test]
    fn partial_trace_preserves_trace() {
        let mut r = rng();
        for dims in [vec![2, 2], vec![2, 2, 2, 2], vec![4, 4], vec![2, 3, 2]] {
            let n: usize = dims.iter().product();
            let a = random_psd(n, &mut r);
            let red = a.partial_trace(&dims, &[0]).unwrap();
            let diff = (red.trace().unwrap() - a.trace().unwrap()).norm();
            assert!(diff <= 1e-10, "trace drift {diff}");
        }
    }

    #[test]
    fn partial_trace_errors() {
        let a = ComplexMatrix::identity(4);
        assert!(a.partial_trace(&[2, 3], &[0]).is_err());
        assert!(a.partial_trace(&[2, 2], &[]).is_err());
    }

    #[test]
    fn hermitian_psd_examples() {
        assert!(pauli_x().is_hermitian(1e-12).unwrap());
        assert!(!pauli_x().is_psd(1e-12).unwrap());
        let half = ComplexMatrix::identity(2).scale_real(0.5);
        assert!(half.is_hermitian(1e-12).unwrap());
        assert!(half.is_psd(1e-12).unwrap());
        let nil = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(!nil.is_hermitian(1e-12).unwrap());
    }

    #[test]
    fn spectral_diagonal() {
        let d = ComplexMatrix::diagonal(&[0.7, 0.3]);
        let sd = d.spectral_decompose(1e-9).unwrap();
        assert_eq!(sd.weights.len(), 2);
        assert!((sd.weights[0] - 0.7).abs() < 1e-12);
        assert!((sd.weights[1] - 0.3).abs() < 1e-12);
        assert!(sd.projectors[0].approx_eq(&ComplexMatrix::diagonal(&[1.0, 0.0]), 1e-12));
        assert!(sd.projectors[1].approx_eq(&ComplexMatrix::diagonal(&[0.0, 1.0]), 1e-12));
    }

    #[test]
    fn spectral_rank_one() {
        let plus = ComplexMatrix::from_real(2, 2, &[0.5, 0.5, 0.5, 0.5]).unwrap();
        let sd = plus.spectral_decompose(1e-9).unwrap();
        assert_eq!(sd.weights.len(), 1);
        assert!((sd.weights[0] - 1.0).abs() < 1e-10);
        assert!(sd.projectors[0].approx_eq(&plus, 1e-10));
    }

    #[test]
    fn spectral_degenerate() {
        let half = ComplexMatrix::identity(2).scale_real(0.5);
        let sd = half.spectral_decompose(1e-9).unwrap();
        assert_eq!(sd.weights.len(), 2);
        // Orthonormal rank-1 projectors summing back to I/2.
        let q01 = sd.projectors[0].mul(&sd.projectors[1]).unwrap();
        assert!(q01.max_abs() < 1e-10);
        assert!(sd.reconstruct(2).approx_eq(&half, 1e-10));
    }

    #[test]
    fn spectral_reconstruction_random() {
        let mut r = rng();
        for n in [2usize, 3, 4, 8] {
            let a = random_psd(n, &mut r);
            let sd = a.spectral_decompose(1e-9).unwrap();
            assert!(sd.reconstruct(n).max_abs_diff(&a) <= 1e-9 * a.max_abs().max(1.0));
            for (i, p) in sd.projectors.iter().enumerate() {
                assert!(p.mul(p).unwrap().max_abs_diff(p) < 1e-9);
                for q in &sd.projectors[i + 1..] {
                    assert!(p.mul(q).unwrap().max_abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn spectral_rejects_non_hermitian() {
        let nil = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(nil.spectral_decompose(1e-9).is_err());
    }

    #[test]
    fn expm_zero() {
        let z = ComplexMatrix::zeros(3, 3);
        assert!(z.herm_expm(2.5).unwrap().approx_eq(&ComplexMatrix::identity(3), 1e-12));
    }

    #[test]
    fn expm_pauli_x_quarter() {
        // exp(-i σ_x π/2) = -i σ_x.
        let u = pauli_x().herm_expm(std::f64::consts::FRAC_PI_2).unwrap();
        let want = pauli_x().scale(C64::new(0.0, -1.0));
        assert!(u.approx_eq(&want, 1e-12));
    }

    #[test]
    fn expm_unitary_and_group() {
        let mut r = rng();
        for _ in 0..5 {
            let h = random_hermitian(3, &mut r);
            let u = h.herm_expm(0.7).unwrap();
            let uu = u.mul(&u.adjoint()).unwrap();
            assert!(uu.approx_eq(&ComplexMatrix::identity(3), 1e-9));
            let s = h.herm_expm(0.3).unwrap();
            let st = h.herm_expm(1.0).unwrap();
            assert!(s.mul(&u).unwrap().approx_eq(&st, 1e-9));
        }
    }

    #[test]
    fn tensor_associativity() {
        let mut r = rng();
        let a = random_hermitian(2, &mut r);
        let b = random_hermitian(2, &mut r);
        let c = random_hermitian(3, &mut r);
        let lhs = a.tensor(&b).tensor(&c);
        let rhs = a.tensor(&b.tensor(&c));
        assert!(lhs.approx_eq(&rhs, 1e-12));
    }

    #[test]
    fn compose_groups_permutes() {
        let mut r = rng();
        let a = random_hermitian(2, &mut r);
        let b = random_hermitian(3, &mut r);
        // Group (slot 1 = a, slot 0 = b) must equal b ⊗ a.
        let got = compose_groups(&[3, 2], &[(vec![1], &a), (vec![0], &b)]).unwrap();
        assert!(got.approx_eq(&b.tensor(&a), 1e-12));
        // A single group listing slots out of order reorders factors.
        let ab = a.tensor(&b);
        let got = compose_groups(&[3, 2], &[(vec![1, 0], &ab)]).unwrap();
        assert!(got.approx_eq(&b.tensor(&a), 1e-12));
    }

    #[test]
    fn haar_unitary_is_unitary() {
        let mut r = rng();
        for n in [2usize, 3, 4] {
            let u = haar_unitary(n, &mut r);
            let uu = u.mul(&u.adjoint()).unwrap();
            assert!(uu.approx_eq(&ComplexMatrix::identity(n), 1e-10));
        }
    }

    #[test]
    fn rejects_non_finite() {
        let bad = [C64::new(f64::NAN, 0.0)];
        assert!(ComplexMatrix::from_rows(1, 1, &bad).is_err());
    }
}
