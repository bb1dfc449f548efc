//! Entanglement swapping and a single BBPSSW purification round, both
//! computed exactly on the joint density operator.

use rand::Rng;

use crate::state::{bell_state, BellKind, DensityOperator, Pauli, PureState};
use crate::{Error, Result};

/// One Bell-measurement branch of a swap: its outcome, Born probability, and
/// the conditional A–C state (absent on zero-probability branches).
#[derive(Debug, Clone)]
pub struct SwapBranch {
    pub outcome: BellKind,
    pub prob: f64,
    pub state: Option<DensityOperator>,
}

/// A sampled swap: the measured Bell outcome and the conditional state, with
/// the Pauli correction frame kept alongside instead of being applied as a
/// physical gate.
#[derive(Debug, Clone)]
pub struct SwapResult {
    pub outcome: BellKind,
    /// A–C state, node A on qubit 1 and node C on qubit 0.
    pub state: DensityOperator,
}

impl SwapResult {
    /// State after aligning the correction frame, given the Bell kinds the
    /// two input pairs were referenced to. Ideal inputs land on Φ⁺.
    pub fn aligned_state(&self, input_ab: BellKind, input_bc: BellKind) -> DensityOperator {
        let (x, z) = correction_frame(input_ab, input_bc, self.outcome);
        apply_pauli_frame(&self.state, x, z)
    }
}

/// All four Bell-measurement branches of swapping `rho_ab` (A on qubit 1,
/// B on qubit 0) with `rho_bc` (B on qubit 1, C on qubit 0). Node B's two
/// memories are measured; branch states live on (A, C).
pub fn swap_branches(
    rho_ab: &DensityOperator,
    rho_bc: &DensityOperator,
) -> Result<Vec<SwapBranch>> {
    if rho_ab.n_qubits() != 2 || rho_bc.n_qubits() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            actual: rho_ab.dim().max(rho_bc.dim()),
        });
    }
    // Register: qubit 3 = A, 2 = B (first pair), 1 = B (second pair), 0 = C.
    let joint = rho_ab.tensor_product(rho_bc)?;
    BellKind::ALL
        .iter()
        .map(|&kind| {
            let (prob, state) = joint.project_onto(&[2, 1], &bell_state(kind))?;
            Ok(SwapBranch {
                outcome: kind,
                prob,
                state,
            })
        })
        .collect()
}

/// Samples a Bell-basis measurement on node B's two memories per the Born
/// rule and returns the conditioned A–C state.
pub fn entanglement_swap<R: Rng + ?Sized>(
    rho_ab: &DensityOperator,
    rho_bc: &DensityOperator,
    rng: &mut R,
) -> Result<SwapResult> {
    let branches = swap_branches(rho_ab, rho_bc)?;
    let mut u = rng.random::<f64>();
    let mut fallback: Option<SwapResult> = None;
    for branch in branches {
        if branch.prob <= 0.0 {
            continue;
        }
        let result = branch.state.map(|state| SwapResult {
            outcome: branch.outcome,
            state,
        });
        if let Some(result) = result {
            if u < branch.prob {
                return Ok(result);
            }
            u -= branch.prob;
            fallback = Some(result);
        }
    }
    // Round-off can leave a sliver of probability unassigned; the last
    // nonzero branch absorbs it.
    fallback.ok_or_else(|| Error::InvalidState("no swap branch has support".into()))
}

/// Pauli correction (x, z) on the C-side qubit that maps the ideal swap
/// output onto Φ⁺, given the Bell kinds of the inputs and the measured
/// outcome. Labels compose by XOR (they form the Pauli group mod phase).
pub fn correction_frame(
    input_ab: BellKind,
    input_bc: BellKind,
    outcome: BellKind,
) -> (bool, bool) {
    let (ax, az) = input_ab.pauli_label();
    let (bx, bz) = input_bc.pauli_label();
    let (kx, kz) = outcome.pauli_label();
    (ax ^ bx ^ kx, az ^ bz ^ kz)
}

/// Applies X^x Z^z to qubit 0 of a 2-qubit state.
pub fn apply_pauli_frame(state: &DensityOperator, x: bool, z: bool) -> DensityOperator {
    let mut out = state.clone();
    if z {
        out = out
            .apply_one_qubit_unitary(0, &Pauli::Z.matrix())
            .expect("2-qubit state");
    }
    if x {
        out = out
            .apply_one_qubit_unitary(0, &Pauli::X.matrix())
            .expect("2-qubit state");
    }
    out
}

/// Outcome of a deterministic BBPSSW purification round.
#[derive(Debug, Clone)]
pub struct PurifyOutcome {
    /// Probability that the target-pair measurements agree.
    pub success_prob: f64,
    /// Post-selected source-pair state on success.
    pub state: Option<DensityOperator>,
}

/// One BBPSSW round computed exactly on the 4-qubit joint state: bilateral
/// CNOT from pair 1 onto pair 2, Z⊗Z measurement of pair 2, keep on equal
/// outcomes.
///
/// Both inputs are A–B pairs (A on qubit 1, B on qubit 0); the kept state is
/// the first pair's.
pub fn purify_pair_deterministic(
    rho1: &DensityOperator,
    rho2: &DensityOperator,
) -> Result<PurifyOutcome> {
    if rho1.n_qubits() != 2 || rho2.n_qubits() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            actual: rho1.dim().max(rho2.dim()),
        });
    }
    // Register: qubit 3 = A₁, 2 = B₁, 1 = A₂, 0 = B₂.
    let joint = rho1.tensor_product(rho2)?;
    let after = joint.apply_cnot(3, 1)?.apply_cnot(2, 0)?;

    let zero_zero = PureState::basis(2, 0);
    let one_one = PureState::basis(2, 3);
    let (p00, kept00) = after.project_onto(&[1, 0], &zero_zero)?;
    let (p11, kept11) = after.project_onto(&[1, 0], &one_one)?;
    let success_prob = p00 + p11;
    let state = match (kept00, kept11) {
        (Some(a), Some(b)) => Some(DensityOperator::mixture(&[
            (p00 / success_prob, a),
            (p11 / success_prob, b),
        ])?),
        (Some(a), None) => Some(a),
        (None, Some(b)) => Some(b),
        (None, None) => None,
    };
    Ok(PurifyOutcome {
        success_prob,
        state,
    })
}

/// Sampled BBPSSW round: returns the purified pair on success, `None` on the
/// (valid) failure outcome.
pub fn purify_pair<R: Rng + ?Sized>(
    rho1: &DensityOperator,
    rho2: &DensityOperator,
    rng: &mut R,
) -> Result<Option<DensityOperator>> {
    let out = purify_pair_deterministic(rho1, rho2)?;
    if rng.random::<f64>() < out.success_prob {
        Ok(out.state)
    } else {
        Ok(None)
    }
}
