//! Exact linear algebra over small multi-qubit density operators.
//!
//! Register convention (used everywhere in this crate): qubits are indexed
//! little-endian, so qubit `k` is bit `k` of a basis index. The tensor
//! product `tensor_product(a, b)` places `a` in the *high* bits, which makes
//! a two-qubit basis index read like the Dirac string `|q1 q0⟩`: for
//! `tensor_product(spin, photon)` the spin is qubit 1 and the photon qubit 0,
//! and `|↑V⟩ = |0⟩⊗|1⟩` is basis index 1.

use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::ser::{Serialize, SerializeStruct, Serializer};

use crate::{Error, Result};

/// Hard cap on register size; 2^6 = 64-dimensional matrices at most.
pub const MAX_QUBITS: usize = 6;

/// Hermiticity tolerance for validated construction.
pub const TOL_HERMITIAN: f64 = 1e-10;
/// Unit-trace tolerance for validated construction.
pub const TOL_TRACE: f64 = 1e-9;
/// Eigenvalue floor for the positive-semidefinite check.
pub const TOL_PSD: f64 = 1e-9;
/// Unit-norm tolerance for pure states.
pub const TOL_NORM: f64 = 1e-10;

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// The four maximally entangled two-qubit states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum BellKind {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellKind {
    pub const ALL: [BellKind; 4] = [
        BellKind::PhiPlus,
        BellKind::PhiMinus,
        BellKind::PsiPlus,
        BellKind::PsiMinus,
    ];

    /// Signs (s_x, s_y, s_z) of the (XX, YY, ZZ) correlators of the state,
    /// i.e. the Bell projector is ¼(II + s_x XX + s_y YY + s_z ZZ).
    pub fn correlator_signs(self) -> (f64, f64, f64) {
        match self {
            BellKind::PhiPlus => (1.0, -1.0, 1.0),
            BellKind::PhiMinus => (-1.0, 1.0, 1.0),
            BellKind::PsiPlus => (1.0, 1.0, -1.0),
            BellKind::PsiMinus => (-1.0, -1.0, -1.0),
        }
    }

    /// (x, z) Pauli label of the state under Bell_k = (I ⊗ P_k)|Φ⁺⟩,
    /// with P: Φ⁺↦I, Ψ⁺↦X, Φ⁻↦Z, Ψ⁻↦Y. Used for swap correction frames.
    pub fn pauli_label(self) -> (bool, bool) {
        match self {
            BellKind::PhiPlus => (false, false),
            BellKind::PsiPlus => (true, false),
            BellKind::PhiMinus => (false, true),
            BellKind::PsiMinus => (true, true),
        }
    }

    /// Bell kind with the given (x, z) Pauli label.
    pub fn from_pauli_label(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => BellKind::PhiPlus,
            (true, false) => BellKind::PsiPlus,
            (false, true) => BellKind::PhiMinus,
            (true, true) => BellKind::PsiMinus,
        }
    }
}

/// Single-qubit Pauli operator label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> DMatrix<Complex64> {
        let i = Complex64::new(0.0, 1.0);
        match self {
            Pauli::I => DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ONE]),
            Pauli::X => DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
            Pauli::Y => DMatrix::from_row_slice(2, 2, &[ZERO, -i, i, ZERO]),
            Pauli::Z => DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        }
    }
}

/// A tensor product of single-qubit Paulis, one label per qubit.
///
/// `labels[k]` acts on qubit `k`; the full operator is
/// `labels[n-1] ⊗ … ⊗ labels[0]` in matrix (kron) order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PauliObservable {
    labels: Vec<Pauli>,
}

impl PauliObservable {
    pub fn new(labels: Vec<Pauli>) -> Self {
        Self { labels }
    }

    /// Two-qubit observable `first ⊗ second` with `first` on qubit 1 (the
    /// first tensor factor) and `second` on qubit 0.
    pub fn two(first: Pauli, second: Pauli) -> Self {
        Self {
            labels: vec![second, first],
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[Pauli] {
        &self.labels
    }

    /// Dense matrix of the observable.
    pub fn matrix(&self) -> DMatrix<Complex64> {
        let mut op = DMatrix::from_element(1, 1, ONE);
        for &label in self.labels.iter().rev() {
            op = op.kronecker(&label.matrix());
        }
        op
    }
}

/// An orthonormal single-qubit measurement basis {|b0⟩, |b1⟩}.
#[derive(Debug, Clone)]
pub struct QubitBasis {
    b0: [Complex64; 2],
    b1: [Complex64; 2],
}

impl QubitBasis {
    /// Builds a basis from two vectors, checking orthonormality to 1e-10.
    pub fn new(b0: [Complex64; 2], b1: [Complex64; 2]) -> Result<Self> {
        let n0 = b0[0].norm_sqr() + b0[1].norm_sqr();
        let n1 = b1[0].norm_sqr() + b1[1].norm_sqr();
        let overlap = b0[0].conj() * b1[0] + b0[1].conj() * b1[1];
        if (n0 - 1.0).abs() > TOL_NORM || (n1 - 1.0).abs() > TOL_NORM || overlap.norm() > TOL_NORM
        {
            return Err(Error::InvalidArgument(
                "basis vectors are not orthonormal".into(),
            ));
        }
        Ok(Self { b0, b1 })
    }

    /// Computational basis {|0⟩, |1⟩} ({↑,↓} for a spin, {H,V} for a photon).
    pub fn z() -> Self {
        Self {
            b0: [ONE, ZERO],
            b1: [ZERO, ONE],
        }
    }

    /// Superposition basis {(|0⟩+|1⟩)/√2, (|0⟩−|1⟩)/√2}
    /// ({→,←} for a spin, the diagonal pair for a photon).
    pub fn x() -> Self {
        let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self {
            b0: [s, s],
            b1: [s, -s],
        }
    }

    /// Circular basis {(|0⟩+i|1⟩)/√2, (|0⟩−i|1⟩)/√2}
    /// ({σ⁺, σ⁻} for a photon).
    pub fn y() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            b0: [Complex64::new(s, 0.0), Complex64::new(0.0, s)],
            b1: [Complex64::new(s, 0.0), Complex64::new(0.0, -s)],
        }
    }

    pub fn vector(&self, outcome: usize) -> [Complex64; 2] {
        if outcome == 0 {
            self.b0
        } else {
            self.b1
        }
    }

    /// Unitary U with rows ⟨b0| and ⟨b1|: applying it rewrites amplitudes in
    /// this basis.
    pub fn rewrite_unitary(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(
            2,
            2,
            &[
                self.b0[0].conj(),
                self.b0[1].conj(),
                self.b1[0].conj(),
                self.b1[1].conj(),
            ],
        )
    }

    /// Projector |b_outcome⟩⟨b_outcome|.
    pub fn projector(&self, outcome: usize) -> DMatrix<Complex64> {
        let v = self.vector(outcome);
        DMatrix::from_fn(2, 2, |r, c| v[r] * v[c].conj())
    }
}

/// A normalized pure state over an n-qubit register.
///
/// The global phase is fixed at construction: the first nonzero amplitude is
/// made real and positive, so equal states compare equal elementwise.
#[derive(Debug, Clone)]
pub struct PureState {
    n_qubits: usize,
    amplitudes: DVector<Complex64>,
}

impl PureState {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        let dim = amplitudes.len();
        let n_qubits = qubit_count(dim)?;
        let v = DVector::from_vec(amplitudes);
        let norm = v.norm();
        if (norm - 1.0).abs() > TOL_NORM {
            return Err(Error::InvalidState(format!(
                "pure state norm {norm} deviates from 1"
            )));
        }
        Ok(Self {
            n_qubits,
            amplitudes: fix_global_phase(v),
        })
    }

    /// Normalizes an arbitrary nonzero vector into a valid state.
    pub fn normalized(amplitudes: Vec<Complex64>) -> Result<Self> {
        let dim = amplitudes.len();
        let n_qubits = qubit_count(dim)?;
        let v = DVector::from_vec(amplitudes);
        let norm = v.norm();
        if norm < 1e-12 {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        Ok(Self {
            n_qubits,
            amplitudes: fix_global_phase(v / Complex64::new(norm, 0.0)),
        })
    }

    /// Computational basis state |index⟩.
    pub fn basis(n_qubits: usize, index: usize) -> Self {
        let dim = 1 << n_qubits;
        assert!(index < dim);
        let mut v = DVector::zeros(dim);
        v[index] = ONE;
        Self {
            n_qubits,
            amplitudes: v,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    /// Tensor product with `other`, `self` occupying the high bits.
    pub fn tensor(&self, other: &PureState) -> Result<PureState> {
        let n = self.n_qubits + other.n_qubits;
        if n > MAX_QUBITS {
            return Err(Error::RegisterTooLarge {
                qubits: n,
                max: MAX_QUBITS,
            });
        }
        Ok(PureState {
            n_qubits: n,
            amplitudes: fix_global_phase(self.amplitudes.kronecker(&other.amplitudes)),
        })
    }

    /// Overlap ⟨self|other⟩.
    pub fn overlap(&self, other: &PureState) -> Complex64 {
        self.amplitudes.dotc(&other.amplitudes)
    }
}

/// Builds one of the four Bell states as a 2-qubit pure state:
/// Φ± = (|00⟩ ± |11⟩)/√2, Ψ± = (|01⟩ ± |10⟩)/√2.
pub fn bell_state(kind: BellKind) -> PureState {
    let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let amps = match kind {
        BellKind::PhiPlus => vec![s, ZERO, ZERO, s],
        BellKind::PhiMinus => vec![s, ZERO, ZERO, -s],
        BellKind::PsiPlus => vec![ZERO, s, s, ZERO],
        BellKind::PsiMinus => vec![ZERO, s, -s, ZERO],
    };
    PureState::new(amps).expect("bell states are normalized")
}

/// A complex Hermitian, positive semidefinite, trace-one matrix over a
/// 2ⁿ-dimensional qubit register: the universal state carrier.
#[derive(Debug, Clone)]
pub struct DensityOperator {
    n_qubits: usize,
    matrix: DMatrix<Complex64>,
}

impl DensityOperator {
    /// Validated construction: Hermitian to 1e-10, trace one to 1e-9,
    /// minimum eigenvalue ≥ −1e-9.
    pub fn from_matrix(matrix: DMatrix<Complex64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::InvalidState("matrix is not square".into()));
        }
        let n_qubits = qubit_count(matrix.nrows())?;
        let herm_dev = (&matrix - matrix.adjoint()).norm();
        if herm_dev > TOL_HERMITIAN * matrix.nrows() as f64 {
            return Err(Error::InvalidState(format!(
                "not Hermitian: ‖ρ−ρ†‖ = {herm_dev:.3e}"
            )));
        }
        let trace = matrix.trace();
        if (trace.re - 1.0).abs() > TOL_TRACE || trace.im.abs() > TOL_TRACE {
            return Err(Error::InvalidState(format!("trace {trace} is not 1")));
        }
        let state = Self { n_qubits, matrix };
        let min = state.min_eigenvalue();
        if min < -TOL_PSD {
            return Err(Error::InvalidState(format!(
                "not positive semidefinite: min eigenvalue {min:.3e}"
            )));
        }
        Ok(state)
    }

    /// Internal constructor for matrices known valid up to round-off:
    /// symmetrizes and renormalizes the trace, skipping the eigenvalue check.
    pub(crate) fn from_matrix_unchecked(matrix: DMatrix<Complex64>) -> Self {
        let n_qubits = qubit_count(matrix.nrows()).expect("dimension is a power of two");
        let herm = (matrix.adjoint() + &matrix) * Complex64::new(0.5, 0.0);
        let trace = herm.trace().re;
        Self {
            n_qubits,
            matrix: herm / Complex64::new(trace, 0.0),
        }
    }

    /// Rank-one projector |ψ⟩⟨ψ|.
    pub fn from_pure(psi: &PureState) -> Self {
        let v = psi.amplitudes();
        let matrix = DMatrix::from_fn(psi.dim(), psi.dim(), |r, c| v[r] * v[c].conj());
        Self {
            n_qubits: psi.n_qubits(),
            matrix,
        }
    }

    /// Maximally mixed state I/2ⁿ.
    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let dim = 1 << n_qubits;
        let p = Complex64::new(1.0 / dim as f64, 0.0);
        Self {
            n_qubits,
            matrix: DMatrix::from_diagonal_element(dim, dim, p),
        }
    }

    /// Convex mixture Σ wᵢ ρᵢ; weights must be nonnegative and sum to 1.
    pub fn mixture(parts: &[(f64, DensityOperator)]) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidArgument("empty mixture".into()));
        }
        let dim = parts[0].1.dim();
        let mut total = 0.0;
        let mut m = DMatrix::zeros(dim, dim);
        for (w, rho) in parts {
            if *w < -1e-12 {
                return Err(Error::InvalidArgument("negative mixture weight".into()));
            }
            if rho.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: rho.dim(),
                });
            }
            total += w;
            m += &rho.matrix * Complex64::new(*w, 0.0);
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "mixture weights sum to {total}, expected 1"
            )));
        }
        Ok(Self::from_matrix_unchecked(m))
    }

    /// Werner-like state: F on the target Bell projector, (1−F)/3 on each of
    /// the other three.
    pub fn werner(fidelity: f64, target: BellKind) -> Result<Self> {
        if !(0.0..=1.0).contains(&fidelity) {
            return Err(Error::InvalidArgument(format!(
                "werner fidelity {fidelity} outside [0,1]"
            )));
        }
        let rest = (1.0 - fidelity) / 3.0;
        let parts: Vec<(f64, DensityOperator)> = BellKind::ALL
            .iter()
            .map(|&k| {
                let w = if k == target { fidelity } else { rest };
                (w, DensityOperator::from_pure(&bell_state(k)))
            })
            .collect();
        Self::mixture(&parts)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.matrix[(row, col)]
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// Tr(ρ²); 1 for pure states, 1/dim for the maximally mixed state.
    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    /// Real eigenvalues of the (Hermitian) matrix, unordered.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.matrix
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Tensor product with `other`, `self` occupying the high bits; errors
    /// beyond the register limit.
    pub fn tensor_product(&self, other: &DensityOperator) -> Result<DensityOperator> {
        let n = self.n_qubits + other.n_qubits;
        if n > MAX_QUBITS {
            return Err(Error::RegisterTooLarge {
                qubits: n,
                max: MAX_QUBITS,
            });
        }
        Ok(DensityOperator {
            n_qubits: n,
            matrix: self.matrix.kronecker(&other.matrix),
        })
    }

    /// Traces out every qubit not in `keep`. The kept qubits are relabeled in
    /// ascending register order (keep = {0, 2} maps old qubit 0 → new 0,
    /// old 2 → new 1).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityOperator> {
        if keep.is_empty() {
            return Err(Error::InvalidArgument("empty keep set".into()));
        }
        let mut keep_sorted = keep.to_vec();
        keep_sorted.sort_unstable();
        keep_sorted.dedup();
        if keep_sorted.len() != keep.len() {
            return Err(Error::InvalidArgument("duplicate qubit index".into()));
        }
        if *keep_sorted.last().unwrap() >= self.n_qubits {
            return Err(Error::InvalidArgument(format!(
                "qubit index {} out of range for {} qubits",
                keep_sorted.last().unwrap(),
                self.n_qubits
            )));
        }
        let traced: Vec<usize> = (0..self.n_qubits)
            .filter(|q| !keep_sorted.contains(q))
            .collect();
        let m = keep_sorted.len();
        let out_dim = 1 << m;
        let tr_dim = 1 << traced.len();
        let mut out = DMatrix::zeros(out_dim, out_dim);
        for r1 in 0..out_dim {
            for r2 in 0..out_dim {
                let mut acc = ZERO;
                for t in 0..tr_dim {
                    let i1 = scatter_bits(r1, &keep_sorted) | scatter_bits(t, &traced);
                    let i2 = scatter_bits(r2, &keep_sorted) | scatter_bits(t, &traced);
                    acc += self.matrix[(i1, i2)];
                }
                out[(r1, r2)] = acc;
            }
        }
        Ok(DensityOperator {
            n_qubits: m,
            matrix: out,
        })
    }

    /// Projects the register qubits `qubits` onto the pure state `phi` and
    /// traces them out.
    ///
    /// `qubits[0]` binds to phi's most significant qubit, so the slice reads
    /// like the subscript of `|φ⟩_{qubits}`. Returns the projection
    /// probability and, when it is nonzero, the renormalized state of the
    /// remaining qubits (relabeled in ascending register order).
    pub fn project_onto(
        &self,
        qubits: &[usize],
        phi: &PureState,
    ) -> Result<(f64, Option<DensityOperator>)> {
        let k = phi.n_qubits();
        if qubits.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                actual: qubits.len(),
            });
        }
        let mut seen = vec![false; self.n_qubits];
        for &q in qubits {
            if q >= self.n_qubits || seen[q] {
                return Err(Error::InvalidArgument(format!(
                    "bad projection qubit index {q}"
                )));
            }
            seen[q] = true;
        }
        if k == self.n_qubits {
            return Err(Error::InvalidArgument(
                "projection must leave at least one qubit".into(),
            ));
        }
        // phi local qubit (k-1-i) lives on register qubit qubits[i].
        let phi_positions: Vec<usize> = (0..k).map(|local| qubits[k - 1 - local]).collect();
        let rest: Vec<usize> = (0..self.n_qubits).filter(|q| !seen[*q]).collect();
        let m = rest.len();
        let out_dim = 1 << m;
        let sub_dim = 1 << k;
        let amps = phi.amplitudes();
        let mut out = DMatrix::zeros(out_dim, out_dim);
        for r1 in 0..out_dim {
            for r2 in 0..out_dim {
                let mut acc = ZERO;
                for s1 in 0..sub_dim {
                    let i1 = scatter_bits(r1, &rest) | scatter_bits(s1, &phi_positions);
                    for s2 in 0..sub_dim {
                        let i2 = scatter_bits(r2, &rest) | scatter_bits(s2, &phi_positions);
                        acc += amps[s1].conj() * self.matrix[(i1, i2)] * amps[s2];
                    }
                }
                out[(r1, r2)] = acc;
            }
        }
        let prob = out.trace().re.max(0.0);
        if prob < 1e-12 {
            return Ok((prob.max(0.0), None));
        }
        out /= Complex64::new(prob, 0.0);
        Ok((
            prob,
            Some(DensityOperator::from_matrix_unchecked(out)),
        ))
    }

    /// Conjugates one qubit by a 2×2 unitary: ρ → (U_q ⊗ I) ρ (U_q ⊗ I)†.
    pub fn apply_one_qubit_unitary(
        &self,
        qubit: usize,
        u: &DMatrix<Complex64>,
    ) -> Result<DensityOperator> {
        let m = self.apply_one_qubit_op(qubit, u)?;
        Ok(DensityOperator {
            n_qubits: self.n_qubits,
            matrix: m,
        })
    }

    /// Sandwich ρ → A_q ρ A_q† (A need not be unitary; trace not restored).
    fn apply_one_qubit_op(&self, qubit: usize, a: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        if qubit >= self.n_qubits {
            return Err(Error::InvalidArgument(format!(
                "qubit index {qubit} out of range"
            )));
        }
        let dim = self.dim();
        let mask = 1usize << qubit;
        // Left multiply by A on the qubit.
        let mut left = DMatrix::zeros(dim, dim);
        for row in 0..dim {
            let rb = (row & mask != 0) as usize;
            let row0 = row & !mask;
            for col in 0..dim {
                let mut acc = ZERO;
                for sb in 0..2 {
                    let src = row0 | if sb == 1 { mask } else { 0 };
                    acc += a[(rb, sb)] * self.matrix[(src, col)];
                }
                left[(row, col)] = acc;
            }
        }
        // Right multiply by A†.
        let mut out = DMatrix::zeros(dim, dim);
        for row in 0..dim {
            for col in 0..dim {
                let cb = (col & mask != 0) as usize;
                let col0 = col & !mask;
                let mut acc = ZERO;
                for sb in 0..2 {
                    let src = col0 | if sb == 1 { mask } else { 0 };
                    acc += left[(row, src)] * a[(cb, sb)].conj();
                }
                out[(row, col)] = acc;
            }
        }
        Ok(out)
    }

    /// Phase-damping channel on one qubit: every matrix element whose row and
    /// column differ in the qubit's Z bit is scaled by (1 − strength).
    /// strength 0 is the identity; strength 1 erases that qubit's coherence.
    pub fn apply_dephasing(&self, qubit: usize, strength: f64) -> Result<DensityOperator> {
        if !(0.0..=1.0).contains(&strength) {
            return Err(Error::InvalidArgument(format!(
                "dephasing strength {strength} outside [0,1]"
            )));
        }
        if qubit >= self.n_qubits {
            return Err(Error::InvalidArgument(format!(
                "qubit index {qubit} out of range"
            )));
        }
        let mask = 1usize << qubit;
        let keep = Complex64::new(1.0 - strength, 0.0);
        let mut m = self.matrix.clone();
        for r in 0..self.dim() {
            for c in 0..self.dim() {
                if (r & mask) != (c & mask) {
                    m[(r, c)] *= keep;
                }
            }
        }
        Ok(DensityOperator {
            n_qubits: self.n_qubits,
            matrix: m,
        })
    }

    /// Controlled-NOT between two register qubits (a basis permutation):
    /// the target bit flips wherever the control bit is set.
    pub fn apply_cnot(&self, control: usize, target: usize) -> Result<DensityOperator> {
        if control >= self.n_qubits || target >= self.n_qubits || control == target {
            return Err(Error::InvalidArgument(format!(
                "bad CNOT qubits ({control}, {target})"
            )));
        }
        let cmask = 1usize << control;
        let tmask = 1usize << target;
        let map = |i: usize| if i & cmask != 0 { i ^ tmask } else { i };
        let dim = self.dim();
        let mut m = DMatrix::zeros(dim, dim);
        for r in 0..dim {
            for c in 0..dim {
                m[(map(r), map(c))] = self.matrix[(r, c)];
            }
        }
        Ok(DensityOperator {
            n_qubits: self.n_qubits,
            matrix: m,
        })
    }

    /// Depolarizing channel over the whole register: ρ → (1−p)ρ + p·I/dim.
    pub fn depolarize(&self, p: f64) -> Result<DensityOperator> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!(
                "depolarizing probability {p} outside [0,1]"
            )));
        }
        let mixed = DensityOperator::maximally_mixed(self.n_qubits);
        let m = &self.matrix * Complex64::new(1.0 - p, 0.0)
            + &mixed.matrix * Complex64::new(p, 0.0);
        Ok(DensityOperator {
            n_qubits: self.n_qubits,
            matrix: m,
        })
    }

    /// Expectation value Tr[ρ · (⊗ σ)] of a Pauli string; real.
    pub fn pauli_expectation(&self, obs: &PauliObservable) -> Result<f64> {
        if obs.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                actual: obs.n_qubits(),
            });
        }
        let op = obs.matrix();
        Ok((&self.matrix * op).trace().re)
    }

    /// Trace distance ½‖ρ − σ‖₁.
    pub fn trace_distance(&self, other: &DensityOperator) -> Result<f64> {
        if other.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        let diff = &self.matrix - &other.matrix;
        let eigs = diff.symmetric_eigen().eigenvalues;
        Ok(eigs.iter().map(|e| e.abs()).sum::<f64>() / 2.0)
    }

    /// Fidelity F = ⟨ψ|ρ|ψ⟩ to a pure target; clamped into [0, 1].
    pub fn fidelity_pure_target(&self, target: &PureState) -> Result<f64> {
        if target.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: target.dim(),
            });
        }
        let v = target.amplitudes();
        let mut acc = ZERO;
        for r in 0..self.dim() {
            for c in 0..self.dim() {
                acc += v[r].conj() * self.matrix[(r, c)] * v[c];
            }
        }
        Ok(acc.re.clamp(0.0, 1.0))
    }

    /// Projective measurement of one qubit in an orthonormal basis.
    ///
    /// Post-measurement states keep the full register dimension with the
    /// measured qubit collapsed; a zero-probability branch carries no state.
    pub fn projective_measure_probs(
        &self,
        qubit: usize,
        basis: &QubitBasis,
    ) -> Result<MeasurementOutcome> {
        let mut probs = [0.0f64; 2];
        let mut posts: [Option<DensityOperator>; 2] = [None, None];
        for outcome in 0..2 {
            let proj = basis.projector(outcome);
            let m = self.apply_one_qubit_op(qubit, &proj)?;
            let p = m.trace().re.max(0.0);
            probs[outcome] = p;
            if p > 1e-12 {
                posts[outcome] = Some(DensityOperator::from_matrix_unchecked(
                    m / Complex64::new(p, 0.0),
                ));
            }
        }
        let [post0, post1] = posts;
        Ok(MeasurementOutcome {
            prob0: probs[0],
            prob1: probs[1],
            post0,
            post1,
        })
    }
}

/// Result of a single-qubit projective measurement: branch probabilities and
/// renormalized post-measurement states (absent on zero-probability branches).
#[derive(Debug, Clone)]
pub struct MeasurementOutcome {
    pub prob0: f64,
    pub prob1: f64,
    pub post0: Option<DensityOperator>,
    pub post1: Option<DensityOperator>,
}

impl Serialize for DensityOperator {
    /// Serializes as row-major `[re, im]` pairs.
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let dim = self.dim();
        let mut entries = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                let z = self.matrix[(r, c)];
                entries.push([z.re, z.im]);
            }
        }
        let mut s = serializer.serialize_struct("DensityOperator", 2)?;
        s.serialize_field("dim", &dim)?;
        s.serialize_field("entries", &entries)?;
        s.end()
    }
}

/// Tensor product of two density operators; `a` occupies the high bits.
pub fn tensor_product(a: &DensityOperator, b: &DensityOperator) -> Result<DensityOperator> {
    a.tensor_product(b)
}

/// Builds the pure product state of several disjoint factors embedded on the
/// given register qubits.
///
/// Each factor lists its register qubits high-to-low exactly as in
/// [`DensityOperator::project_onto`]; the qubit sets must partition
/// `0..n_total`.
pub fn embed_product(factors: &[(&PureState, &[usize])], n_total: usize) -> Result<PureState> {
    let mut seen = vec![false; n_total];
    for (phi, qubits) in factors {
        if phi.n_qubits() != qubits.len() {
            return Err(Error::DimensionMismatch {
                expected: phi.n_qubits(),
                actual: qubits.len(),
            });
        }
        for &q in *qubits {
            if q >= n_total || seen[q] {
                return Err(Error::InvalidArgument(format!("bad embed qubit {q}")));
            }
            seen[q] = true;
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::InvalidArgument(
            "factors do not cover the register".into(),
        ));
    }
    let dim = 1 << n_total;
    let mut amps = vec![ONE; dim];
    for (index, amp) in amps.iter_mut().enumerate() {
        let mut a = ONE;
        for (phi, qubits) in factors {
            let k = qubits.len();
            let mut s = 0usize;
            for (i, &q) in qubits.iter().enumerate() {
                if index & (1 << q) != 0 {
                    s |= 1 << (k - 1 - i);
                }
            }
            a *= phi.amplitudes()[s];
        }
        *amp = a;
    }
    PureState::normalized(amps)
}

/// A Haar-random pure state.
pub fn random_pure<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> PureState {
    let dim = 1 << n_qubits;
    let normal = StandardNormal;
    let amps: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(normal.sample(rng), normal.sample(rng)))
        .collect();
    PureState::normalized(amps).expect("gaussian vector is nonzero")
}

/// A random full-rank density operator (Ginibre ensemble: ρ = GG†/Tr GG†).
pub fn random_density<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> DensityOperator {
    let dim = 1 << n_qubits;
    let normal = StandardNormal;
    let g = DMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(normal.sample(rng), normal.sample(rng))
    });
    let m = &g * g.adjoint();
    DensityOperator::from_matrix_unchecked(m)
}

/// Number of qubits for a dimension that must be a power of two within the
/// register limit.
fn qubit_count(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::InvalidState(format!(
            "dimension {dim} is not a power of two"
        )));
    }
    let n = dim.trailing_zeros() as usize;
    if n > MAX_QUBITS {
        return Err(Error::RegisterTooLarge {
            qubits: n,
            max: MAX_QUBITS,
        });
    }
    Ok(n)
}

/// Spreads the bits of `value` onto the register bit `positions`
/// (bit i of value → bit positions[i] of the result).
fn scatter_bits(value: usize, positions: &[usize]) -> usize {
    let mut out = 0;
    for (i, &pos) in positions.iter().enumerate() {
        if value & (1 << i) != 0 {
            out |= 1 << pos;
        }
    }
    out
}

/// Makes the first nonzero amplitude real positive.
fn fix_global_phase(mut v: DVector<Complex64>) -> DVector<Complex64> {
    for i in 0..v.len() {
        if v[i].norm() > 1e-12 {
            let phase = v[i] / Complex64::new(v[i].norm(), 0.0);
            v /= phase;
            break;
        }
    }
    v
}
