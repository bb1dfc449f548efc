//! Spin-photon entangled-pair source: a charged quantum dot in a
//! Voigt-geometry magnetic field, with its imperfection knobs.
//!
//! The source emits the two-qubit state (i|↑⟩|H⟩ + |↓⟩|V⟩)/√2 with the spin
//! on qubit 1 and the photon polarization on qubit 0. The imaginary phase
//! on the |↑H⟩ branch is kept explicitly so reconstructions show the
//! imaginary off-diagonal structure of the real device.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::state::{DensityOperator, Pauli, PureState, QubitBasis};
use crate::{Error, Result};

/// Four-level quantum-dot source parameters.
///
/// Field names carry units. `transition_energy_ev` is informational only:
/// the photonic qubit is modeled in a 2-dimensional polarization space with
/// the energy label already erased.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QDSourceModel {
    /// Electron Zeeman splitting δ_e (rad/s); the Larmor period is 2π/δ_e.
    pub zeeman_splitting_rad_per_s: f64,
    /// Energy of the |↑↓⇓⟩ ↔ |↓⟩ optical transition (eV).
    pub transition_energy_ev: f64,
    /// Trion radiative lifetime τ (s).
    pub trion_lifetime_s: f64,
    /// Entanglement attempt rate R₀ (Hz).
    pub repetition_rate_hz: f64,
}

impl QDSourceModel {
    pub fn validate(&self) -> Result<()> {
        if self.zeeman_splitting_rad_per_s <= 0.0 {
            return Err(Error::InvalidArgument("zeeman splitting must be > 0".into()));
        }
        if self.trion_lifetime_s <= 0.0 {
            return Err(Error::InvalidArgument("trion lifetime must be > 0".into()));
        }
        if self.repetition_rate_hz <= 0.0 {
            return Err(Error::InvalidArgument("repetition rate must be > 0".into()));
        }
        Ok(())
    }

    /// The attempt rate cannot exceed the inverse radiative lifetime; a
    /// model that does is flagged (warning, not an error).
    pub fn exceeds_lifetime_limit(&self) -> bool {
        self.repetition_rate_hz > 1.0 / self.trion_lifetime_s
    }

    pub fn larmor_period_s(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.zeeman_splitting_rad_per_s
    }

    /// Builds a model from the Larmor period instead of δ_e.
    pub fn from_larmor_period(
        larmor_period_s: f64,
        transition_energy_ev: f64,
        trion_lifetime_s: f64,
        repetition_rate_hz: f64,
    ) -> Result<Self> {
        if larmor_period_s <= 0.0 {
            return Err(Error::InvalidArgument("larmor period must be > 0".into()));
        }
        let model = Self {
            zeeman_splitting_rad_per_s: 2.0 * std::f64::consts::PI / larmor_period_s,
            transition_energy_ev,
            trion_lifetime_s,
            repetition_rate_hz,
        };
        model.validate()?;
        Ok(model)
    }
}

impl Default for QDSourceModel {
    /// InAs dot at 910 nm: 57 ps Larmor period, 0.6 ns lifetime, 1 MHz attempts.
    fn default() -> Self {
        Self::from_larmor_period(57e-12, 1.3625, 0.6e-9, 1.0e6).unwrap()
    }
}

/// Source imperfection knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceImperfections {
    /// Second-order correlation g²(0): per-attempt probability of an extra
    /// uncorrelated photon. Consumed by the heralding model, not here.
    pub g2_zero: f64,
    /// Detection / timing-resolution window T_w (s).
    pub detection_window_s: f64,
    /// Two-qubit depolarizing probability.
    pub depolarizing_prob: f64,
    /// Probability the spin was pumped into the intended branch.
    pub init_fidelity: f64,
}

impl SourceImperfections {
    pub fn validate(&self) -> Result<()> {
        if self.g2_zero < 0.0 {
            return Err(Error::InvalidArgument("g2_zero must be ≥ 0".into()));
        }
        if self.detection_window_s < 0.0 {
            return Err(Error::InvalidArgument("detection window must be ≥ 0".into()));
        }
        if !(0.0..=1.0).contains(&self.depolarizing_prob) {
            return Err(Error::InvalidArgument(
                "depolarizing probability outside [0,1]".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.init_fidelity) {
            return Err(Error::InvalidArgument("init fidelity outside [0,1]".into()));
        }
        Ok(())
    }
}

impl Default for SourceImperfections {
    fn default() -> Self {
        Self {
            g2_zero: 0.0,
            detection_window_s: 0.0,
            depolarizing_prob: 0.0,
            init_fidelity: 1.0,
        }
    }
}

/// The ideal emitted pure state (i|↑H⟩ + |↓V⟩)/√2, up to global phase.
pub fn ideal_spin_photon_target() -> PureState {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    PureState::normalized(vec![
        Complex64::new(0.0, s),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(s, 0.0),
    ])
    .expect("amplitudes are normalized")
}

/// The ideal emitted state as a rank-1 density operator
/// (spin on qubit 1, photon on qubit 0).
pub fn ideal_spin_photon_state() -> DensityOperator {
    DensityOperator::from_pure(&ideal_spin_photon_target())
}

/// Rewrites one qubit of a state in a different orthonormal basis.
///
/// This is a unitary conjugation, so the spectrum is unchanged; only the
/// matrix representation moves.
pub fn change_local_basis(
    rho: &DensityOperator,
    qubit: usize,
    basis: &QubitBasis,
) -> Result<DensityOperator> {
    rho.apply_one_qubit_unitary(qubit, &basis.rewrite_unitary())
}

/// Visibility left after averaging the Larmor phase e^{iδ_e t} over a
/// uniform detection window of width T_w: |sinc(δ_e·T_w/2)|.
///
/// Perfect timing resolution (T_w = 0) gives 1; a window of one full Larmor
/// period gives 0.
pub fn timing_visibility(detection_window_s: f64, zeeman_splitting_rad_per_s: f64) -> Result<f64> {
    if detection_window_s < 0.0 {
        return Err(Error::InvalidArgument(
            "detection window must be ≥ 0".into(),
        ));
    }
    let half_phase = zeeman_splitting_rad_per_s * detection_window_s / 2.0;
    if half_phase.abs() < 1e-12 {
        return Ok(1.0);
    }
    Ok((half_phase.sin() / half_phase).abs())
}

/// Applies the source imperfection chain to a 2-qubit spin-photon state:
/// initialization error as a classical mixture with the branch-flipped state,
/// then photon-coherence dephasing at 1 − timing_visibility, then two-qubit
/// depolarization.
pub fn apply_source_imperfections(
    rho: &DensityOperator,
    imp: &SourceImperfections,
    model: &QDSourceModel,
) -> Result<DensityOperator> {
    if rho.n_qubits() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            actual: rho.dim(),
        });
    }
    imp.validate()?;
    model.validate()?;

    let mut out = rho.clone();
    if imp.init_fidelity < 1.0 {
        let x = Pauli::X.matrix();
        let flipped = out
            .apply_one_qubit_unitary(0, &x)?
            .apply_one_qubit_unitary(1, &x)?;
        out = DensityOperator::mixture(&[
            (imp.init_fidelity, out),
            (1.0 - imp.init_fidelity, flipped),
        ])?;
    }

    let visibility = timing_visibility(imp.detection_window_s, model.zeeman_splitting_rad_per_s)?;
    if visibility < 1.0 {
        out = out.apply_dephasing(0, 1.0 - visibility)?;
    }

    if imp.depolarizing_prob > 0.0 {
        out = out.depolarize(imp.depolarizing_prob)?;
    }
    Ok(out)
}

/// Draws a spontaneous-emission delay: exponential with mean τ.
pub fn sample_emission_time<R: Rng + ?Sized>(trion_lifetime_s: f64, rng: &mut R) -> Result<f64> {
    if trion_lifetime_s <= 0.0 {
        return Err(Error::InvalidArgument("lifetime must be > 0".into()));
    }
    let exp = Exp::new(1.0 / trion_lifetime_s)
        .map_err(|e| Error::InvalidArgument(format!("bad exponential rate: {e}")))?;
    Ok(exp.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{bell_state, random_density, BellKind, Pauli, PauliObservable};
    use approx::assert_abs_diff_eq;
    use rand::{rngs::StdRng, SeedableRng};

    fn conditional_prob(
        rho: &DensityOperator,
        photon_basis: &QubitBasis,
        photon_outcome: usize,
        spin_basis: &QubitBasis,
        spin_outcome: usize,
    ) -> f64 {
        let photon = rho.projective_measure_probs(0, photon_basis).unwrap();
        let post = if photon_outcome == 0 {
            photon.post0
        } else {
            photon.post1
        }
        .expect("conditioning outcome has support");
        let spin = post.projective_measure_probs(1, spin_basis).unwrap();
        if spin_outcome == 0 {
            spin.prob0
        } else {
            spin.prob1
        }
    }

    #[test]
    fn ideal_state_has_unit_fidelity_to_target() {
        let rho = ideal_spin_photon_state();
        assert_abs_diff_eq!(
            rho.fidelity_pure_target(&ideal_spin_photon_target()).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        // The spin-photon coherence is purely imaginary: |ρ[0,3]| = 1/2 on the
        // imaginary axis.
        assert_abs_diff_eq!(rho.entry(0, 3).re, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rho.entry(0, 3).im.abs(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn ideal_state_conditionals_in_both_basis_pairs() {
        let rho = ideal_spin_photon_state();
        // {↑,↓} ⊗ {H,V}: spin ↑ given H, spin ↓ given V.
        assert_abs_diff_eq!(
            conditional_prob(&rho, &QubitBasis::z(), 0, &QubitBasis::z(), 0),
            1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            conditional_prob(&rho, &QubitBasis::z(), 1, &QubitBasis::z(), 1),
            1.0,
            epsilon = 1e-12
        );
        // {→,←} ⊗ {σ⁺,σ⁻}: spin ← given σ⁺, spin → given σ⁻.
        assert_abs_diff_eq!(
            conditional_prob(&rho, &QubitBasis::y(), 0, &QubitBasis::x(), 1),
            1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            conditional_prob(&rho, &QubitBasis::y(), 1, &QubitBasis::x(), 0),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn rotated_basis_rewrite_matches_superposition_form() {
        // In {→,←} ⊗ {σ⁺,σ⁻} the state reads (i/√2)(|→σ⁻⟩ + |←σ⁺⟩):
        // all support on indices 1 (→σ⁻) and 2 (←σ⁺).
        let rho = ideal_spin_photon_state();
        let rewritten = change_local_basis(
            &change_local_basis(&rho, 1, &QubitBasis::x()).unwrap(),
            0,
            &QubitBasis::y(),
        )
        .unwrap();
        assert_abs_diff_eq!(rewritten.entry(1, 1).re, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(rewritten.entry(2, 2).re, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(rewritten.entry(1, 2).norm(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(rewritten.entry(0, 0).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rewritten.entry(3, 3).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn basis_change_preserves_spectrum_and_identity() {
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..20 {
            let rho = random_density(2, &mut rng);
            let same = change_local_basis(&rho, 0, &QubitBasis::z()).unwrap();
            assert!((same.matrix() - rho.matrix()).norm() < 1e-12);

            let rotated = change_local_basis(&rho, 1, &QubitBasis::y()).unwrap();
            let mut a = rho.eigenvalues();
            let mut b = rotated.eigenvalues();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            for (x, y) in a.iter().zip(&b) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-10);
            }
            assert_abs_diff_eq!(rotated.trace(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn timing_visibility_limits() {
        let delta_e = 2.0 * std::f64::consts::PI / 57e-12;
        assert_abs_diff_eq!(timing_visibility(0.0, delta_e).unwrap(), 1.0, epsilon = 1e-15);
        // One full Larmor period averages the phase to zero.
        assert_abs_diff_eq!(
            timing_visibility(57e-12, delta_e).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        assert!(timing_visibility(-1e-12, delta_e).is_err());
    }

    #[test]
    fn timing_visibility_matches_window_average_oracle() {
        // Independent oracle: numerically average e^{iδt} over the window.
        let delta_e = 2.0 * std::f64::consts::PI / 57e-12;
        let t_w = 8e-12;
        let steps = 200_000;
        let mut re = 0.0;
        let mut im = 0.0;
        for k in 0..steps {
            let t = (k as f64 + 0.5) / steps as f64 * t_w - t_w / 2.0;
            re += (delta_e * t).cos();
            im += (delta_e * t).sin();
        }
        let oracle = (re * re + im * im).sqrt() / steps as f64;
        let got = timing_visibility(t_w, delta_e).unwrap();
        assert_abs_diff_eq!(got, oracle, epsilon = 1e-9);
        assert_abs_diff_eq!(got, 0.968, epsilon = 1e-3);
    }

    #[test]
    fn no_imperfections_leaves_state_unchanged() {
        let rho = ideal_spin_photon_state();
        let out = apply_source_imperfections(
            &rho,
            &SourceImperfections::default(),
            &QDSourceModel::default(),
        )
        .unwrap();
        assert!((out.matrix() - rho.matrix()).norm() < 1e-12);
    }

    #[test]
    fn depolarization_gives_closed_form_fidelity() {
        let target = ideal_spin_photon_target();
        for &p in &[0.0, 0.05, 0.2, 0.5, 1.0] {
            let imp = SourceImperfections {
                depolarizing_prob: p,
                ..Default::default()
            };
            let out = apply_source_imperfections(
                &ideal_spin_photon_state(),
                &imp,
                &QDSourceModel::default(),
            )
            .unwrap();
            let f = out.fidelity_pure_target(&target).unwrap();
            assert_abs_diff_eq!(f, 1.0 - 3.0 * p / 4.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn half_larmor_window_scales_cross_correlators_by_two_over_pi() {
        let model = QDSourceModel::default();
        let imp = SourceImperfections {
            detection_window_s: model.larmor_period_s() / 2.0,
            ..Default::default()
        };
        let ideal = ideal_spin_photon_state();
        let out = apply_source_imperfections(&ideal, &imp, &model).unwrap();

        let corr = |rho: &DensityOperator, a, b| {
            rho.pauli_expectation(&PauliObservable::two(a, b)).unwrap()
        };
        let scale = 2.0 / std::f64::consts::PI;
        // The ideal state's coherence lives in the spin-X ⊗ photon-Y (and
        // X↔Y swapped) correlators; those scale by sinc(π/2) = 2/π.
        assert_abs_diff_eq!(corr(&ideal, Pauli::X, Pauli::Y), -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(corr(&out, Pauli::X, Pauli::Y), -scale, epsilon = 1e-12);
        assert_abs_diff_eq!(corr(&out, Pauli::Y, Pauli::X), -scale, epsilon = 1e-12);
        // Z-basis correlations are untouched.
        assert_abs_diff_eq!(corr(&out, Pauli::Z, Pauli::Z), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            conditional_prob(&out, &QubitBasis::z(), 0, &QubitBasis::z(), 0),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn imperfections_never_increase_fidelity_to_ideal() {
        let mut rng = StdRng::seed_from_u64(17);
        let model = QDSourceModel::default();
        let ideal = ideal_spin_photon_state();
        let target = ideal_spin_photon_target();
        for _ in 0..200 {
            let imp = SourceImperfections {
                g2_zero: 0.0,
                detection_window_s: rng.random::<f64>() * 100e-12,
                depolarizing_prob: rng.random::<f64>(),
                init_fidelity: 0.5 + rng.random::<f64>() * 0.5,
            };
            let out = apply_source_imperfections(&ideal, &imp, &model).unwrap();
            let f = out.fidelity_pure_target(&target).unwrap();
            assert!(f <= 1.0 + 1e-12);
            if imp.depolarizing_prob > 1e-6 {
                assert!(f < 1.0);
            }
        }
    }

    #[test]
    fn init_error_mixes_in_orthogonal_branch() {
        let model = QDSourceModel::default();
        let imp = SourceImperfections {
            init_fidelity: 0.8,
            ..Default::default()
        };
        let out = apply_source_imperfections(&ideal_spin_photon_state(), &imp, &model).unwrap();
        let f = out
            .fidelity_pure_target(&ideal_spin_photon_target())
            .unwrap();
        // The branch-flipped state is orthogonal to the ideal one.
        assert_abs_diff_eq!(f, 0.8, epsilon = 1e-12);
    }

    #[test]
    fn emission_time_sampling_statistics() {
        let tau = 0.6e-9;
        let mut rng = StdRng::seed_from_u64(99);
        let n = 1_000_000;
        let mut sum = 0.0;
        let mut min = f64::INFINITY;
        for _ in 0..n {
            let t = sample_emission_time(tau, &mut rng).unwrap();
            sum += t;
            min = min.min(t);
        }
        let mean = sum / n as f64;
        assert!((mean - tau).abs() < 0.002e-9, "mean {mean} too far from {tau}");
        assert!(min >= 0.0);

        // Same seed reproduces the same stream.
        let mut r1 = StdRng::seed_from_u64(123);
        let mut r2 = StdRng::seed_from_u64(123);
        for _ in 0..100 {
            assert_eq!(
                sample_emission_time(tau, &mut r1).unwrap().to_bits(),
                sample_emission_time(tau, &mut r2).unwrap().to_bits()
            );
        }
        assert!(sample_emission_time(0.0, &mut rng).is_err());
    }

    #[test]
    fn lifetime_limit_warning() {
        let mut model = QDSourceModel::default();
        assert!(!model.exceeds_lifetime_limit());
        model.repetition_rate_hz = 1e10; // faster than 1/0.6 ns ≈ 1.7 GHz
        assert!(model.exceeds_lifetime_limit());
    }

    #[test]
    fn ideal_sources_drive_quarter_probability_herald() {
        let pair = ideal_spin_photon_state();
        let joint = pair.tensor_product(&pair).unwrap();
        let (prob, post) = joint
            .project_onto(&[2, 0], &bell_state(BellKind::PsiMinus))
            .unwrap();
        assert_abs_diff_eq!(prob, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(
            post.unwrap()
                .fidelity_pure_target(&bell_state(BellKind::PsiMinus))
                .unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }
}
