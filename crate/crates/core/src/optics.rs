//! Fiber transport and the midpoint beamsplitter Bell-state measurement.
//!
//! Analytic pieces: the attenuation power law, propagation delay, and the
//! link entanglement-rate formula. Monte Carlo piece: [`HeraldSetup`], a
//! per-attempt herald-trial model with detector efficiency, dark counts,
//! multi-photon (g²) events, and an optional photon-distinguishability knob.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::state::{bell_state, BellKind, DensityOperator};
use crate::{Error, Result};

/// Vacuum speed of light (m/s).
pub const SPEED_OF_LIGHT_M_PER_S: f64 = 299_792_458.0;

/// Built-in fiber attenuation presets, dB/km by wavelength.
pub const FIBER_ATTENUATION_PRESETS: [(u32, f64); 2] = [(1550, 0.17), (850, 3.5)];

/// Attenuation preset for a wavelength, if one is shipped.
pub fn attenuation_preset(wavelength_nm: u32) -> Option<f64> {
    FIBER_ATTENUATION_PRESETS
        .iter()
        .find(|(wl, _)| *wl == wavelength_nm)
        .map(|(_, a)| *a)
}

/// A fiber span.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiberChannel {
    pub length_km: f64,
    pub attenuation_db_per_km: f64,
    /// Core refractive index; the in-fiber speed is c/n_core.
    pub n_core: f64,
}

impl FiberChannel {
    pub fn new(length_km: f64, attenuation_db_per_km: f64, n_core: f64) -> Result<Self> {
        let ch = Self {
            length_km,
            attenuation_db_per_km,
            n_core,
        };
        ch.validate()?;
        Ok(ch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.length_km < 0.0 {
            return Err(Error::InvalidArgument("fiber length must be ≥ 0".into()));
        }
        if self.attenuation_db_per_km < 0.0 {
            return Err(Error::InvalidArgument("attenuation must be ≥ 0".into()));
        }
        if self.n_core < 1.0 {
            return Err(Error::InvalidArgument("n_core must be ≥ 1".into()));
        }
        Ok(())
    }

    pub fn transmission_probability(&self) -> f64 {
        transmission_probability(self.length_km, self.attenuation_db_per_km)
            .expect("validated channel")
    }

    pub fn delay_s(&self) -> f64 {
        propagation_delay(self.length_km, self.n_core).expect("validated channel")
    }
}

/// Photon survival probability over a fiber: p = 10^(−L·α/10).
pub fn transmission_probability(length_km: f64, attenuation_db_per_km: f64) -> Result<f64> {
    if length_km < 0.0 || attenuation_db_per_km < 0.0 {
        return Err(Error::InvalidArgument(
            "length and attenuation must be ≥ 0".into(),
        ));
    }
    Ok(10f64.powf(-length_km * attenuation_db_per_km / 10.0))
}

/// One-way propagation delay through fiber: L·n_core/c.
pub fn propagation_delay(length_km: f64, n_core: f64) -> Result<f64> {
    if length_km < 0.0 {
        return Err(Error::InvalidArgument("length must be ≥ 0".into()));
    }
    if n_core < 1.0 {
        return Err(Error::InvalidArgument("n_core must be ≥ 1".into()));
    }
    Ok(length_km * 1000.0 * n_core / SPEED_OF_LIGHT_M_PER_S)
}

/// Detector behaviour at each beamsplitter output arm.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectorModel {
    /// Detection efficiency η.
    pub efficiency: f64,
    /// Dark-count probability per detector per attempt window.
    pub dark_count_prob: f64,
    /// Number-resolving upgrade; with it (plus polarizers) Ψ⁺ heralds too.
    pub number_resolving: bool,
}

impl DetectorModel {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::InvalidArgument("efficiency outside [0,1]".into()));
        }
        if !(0.0..=1.0).contains(&self.dark_count_prob) {
            return Err(Error::InvalidArgument(
                "dark count probability outside [0,1]".into(),
            ));
        }
        Ok(())
    }
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self {
            efficiency: 1.0,
            dark_count_prob: 0.0,
            number_resolving: false,
        }
    }
}

/// Entanglement generation rate of a heralded link with the midpoint station
/// halfway along `l_total_km`: R = R₀·(η·10^(−(L/2)·α/10))².
pub fn link_entanglement_rate(
    r0_hz: f64,
    l_total_km: f64,
    attenuation_db_per_km: f64,
    det: &DetectorModel,
) -> Result<f64> {
    if r0_hz < 0.0 {
        return Err(Error::InvalidArgument("rate must be ≥ 0".into()));
    }
    det.validate()?;
    let p_arm =
        det.efficiency * transmission_probability(l_total_km / 2.0, attenuation_db_per_km)?;
    Ok(r0_hz * p_arm * p_arm)
}

/// Result of projecting two photons onto |Ψ⁻⟩ at the beamsplitter.
#[derive(Debug, Clone)]
pub struct BsmOutcome {
    /// Born probability of the antisymmetric (coincidence) component.
    pub success_prob: f64,
    /// Post-herald state of the two memories; absent when the projection
    /// probability is zero.
    pub memory_state: Option<DensityOperator>,
}

/// Projects the photon qubits of two spin-photon pairs onto |Ψ⁻⟩ and traces
/// them out.
///
/// Each input is a 2-qubit state with the memory on qubit 1 and the photon on
/// qubit 0. The returned memory state has source A's memory on qubit 1 and
/// source B's on qubit 0.
pub fn two_photon_bsm(
    source_a: &DensityOperator,
    source_b: &DensityOperator,
) -> Result<BsmOutcome> {
    project_photons(source_a, source_b, BellKind::PsiMinus)
}

fn project_photons(
    source_a: &DensityOperator,
    source_b: &DensityOperator,
    kind: BellKind,
) -> Result<BsmOutcome> {
    if source_a.n_qubits() != 2 || source_b.n_qubits() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            actual: source_a.dim().max(source_b.dim()),
        });
    }
    let joint = source_a.tensor_product(source_b)?;
    // Register: qubit 3 = memory A, 2 = photon A, 1 = memory B, 0 = photon B.
    let (success_prob, memory_state) = joint.project_onto(&[2, 0], &bell_state(kind))?;
    Ok(BsmOutcome {
        success_prob,
        memory_state,
    })
}

/// One herald attempt's outcome.
#[derive(Debug, Clone)]
pub struct HeraldOutcome {
    pub heralded: bool,
    /// Heralded, but the double click was not produced by the two genuine
    /// photons interfering at the beamsplitter.
    pub false_herald: bool,
    /// Memory state conditioned on the click pattern; present iff heralded.
    pub memory_state: Option<DensityOperator>,
    /// Delay from the attempt to the herald decision at the midpoint.
    pub latency_s: f64,
}

impl HeraldOutcome {
    fn not_heralded(latency_s: f64) -> Self {
        Self {
            heralded: false,
            false_herald: false,
            memory_state: None,
            latency_s,
        }
    }
}

/// Exact per-attempt herald probabilities of a [`HeraldSetup`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeraldProbs {
    /// Total double-click probability.
    pub herald: f64,
    /// Double clicks caused by the two genuine photons.
    pub genuine: f64,
    /// Double clicks involving dark counts or extra photons.
    pub false_herald: f64,
}

/// Precomputed herald-trial model for one link.
///
/// `p_a`/`p_b` are photon arrival probabilities at the midpoint (transmission
/// only); detector efficiency multiplies them per arm. Extra (g²) photons are
/// unpolarized, uncorrelated with the memories, and land in a uniformly
/// random output arm; dark counts are independent Bernoulli per detector per
/// window.
#[derive(Debug, Clone)]
pub struct HeraldSetup {
    p_detect_a: f64,
    p_detect_b: f64,
    p_extra_a: f64,
    p_extra_b: f64,
    dark: f64,
    herald_psi_plus: bool,
    latency_s: f64,
    /// Weight of the interfering (indistinguishable) photon component.
    hom_overlap: f64,
    psi_minus_prob: f64,
    psi_minus_state: Option<DensityOperator>,
    psi_plus_prob: f64,
    psi_plus_state: Option<DensityOperator>,
    /// Memories after a non-Ψ⁻ (bunched) photon projection.
    bunched_state: Option<DensityOperator>,
    /// Memories with the photons simply lost or ignored.
    traced_state: DensityOperator,
}

impl HeraldSetup {
    pub fn new(
        p_a: f64,
        p_b: f64,
        det: &DetectorModel,
        imp_a: &crate::source::SourceImperfections,
        imp_b: &crate::source::SourceImperfections,
        source_a: &DensityOperator,
        source_b: &DensityOperator,
    ) -> Result<Self> {
        Self::with_options(p_a, p_b, det, imp_a, imp_b, source_a, source_b, 1.0, 0.0)
    }

    /// Full constructor with the photon-indistinguishability overlap (1 =
    /// perfect two-photon interference, 0 = fully distinguishable) and the
    /// attempt-to-decision latency.
    #[allow(clippy::too_many_arguments)]
    pub fn with_options(
        p_a: f64,
        p_b: f64,
        det: &DetectorModel,
        imp_a: &crate::source::SourceImperfections,
        imp_b: &crate::source::SourceImperfections,
        source_a: &DensityOperator,
        source_b: &DensityOperator,
        hom_overlap: f64,
        latency_s: f64,
    ) -> Result<Self> {
        for p in [p_a, p_b] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!(
                    "arrival probability {p} outside [0,1]"
                )));
            }
        }
        if !(0.0..=1.0).contains(&hom_overlap) {
            return Err(Error::InvalidArgument("HOM overlap outside [0,1]".into()));
        }
        det.validate()?;
        imp_a.validate()?;
        imp_b.validate()?;

        let minus = project_photons(source_a, source_b, BellKind::PsiMinus)?;
        let plus = project_photons(source_a, source_b, BellKind::PsiPlus)?;
        let joint = source_a.tensor_product(source_b)?;
        let traced_state = joint.partial_trace(&[1, 3])?;
        // Complement of the Ψ⁻ projection: what the memories hold when the
        // photons bunched into one arm.
        let bunched_state = if minus.success_prob < 1.0 - 1e-12 {
            let q = minus.success_prob;
            match &minus.memory_state {
                Some(psi_state) => {
                    let m = (traced_state.matrix()
                        - psi_state.matrix() * num_complex::Complex64::new(q, 0.0))
                        / num_complex::Complex64::new(1.0 - q, 0.0);
                    Some(DensityOperator::from_matrix_unchecked(m))
                }
                None => Some(traced_state.clone()),
            }
        } else {
            None
        };

        Ok(Self {
            p_detect_a: p_a * det.efficiency,
            p_detect_b: p_b * det.efficiency,
            // An extra photon rides the same fiber and detector chain.
            p_extra_a: imp_a.g2_zero * p_a * det.efficiency,
            p_extra_b: imp_b.g2_zero * p_b * det.efficiency,
            dark: det.dark_count_prob,
            herald_psi_plus: det.number_resolving,
            latency_s,
            hom_overlap,
            psi_minus_prob: minus.success_prob,
            psi_minus_state: minus.memory_state,
            psi_plus_prob: plus.success_prob,
            psi_plus_state: plus.memory_state,
            bunched_state,
            traced_state,
        })
    }

    /// Exact closed-form herald probabilities for the configured rule.
    pub fn analytic_probs(&self) -> HeraldProbs {
        let a = self.p_detect_a;
        let b = self.p_detect_b;
        // Probability that an interfering genuine pair produces the heralded
        // click pattern.
        let q_interfering = self.psi_minus_prob
            + if self.herald_psi_plus {
                self.psi_plus_prob
            } else {
                0.0
            };
        // Distinguishable pairs coincide half the time.
        let q = self.hom_overlap * q_interfering + (1.0 - self.hom_overlap) * 0.5;
        let d = self.dark;
        // Probability that one specific arm receives no extra-photon or dark
        // click.
        let quiet = (1.0 - d) * (1.0 - self.p_extra_a / 2.0) * (1.0 - self.p_extra_b / 2.0);
        let quiet_both = (1.0 - d).powi(2) * (1.0 - self.p_extra_a) * (1.0 - self.p_extra_b);

        let genuine = a * b * q;
        // Bunched photons, or a single arrival, occupy one arm; the other arm
        // must click from noise. With no genuine arrivals both arms must.
        let false_herald = a * b * (1.0 - q) * (1.0 - quiet)
            + (a * (1.0 - b) + (1.0 - a) * b) * (1.0 - quiet)
            + (1.0 - a) * (1.0 - b) * (1.0 - 2.0 * quiet + quiet_both);
        HeraldProbs {
            herald: genuine + false_herald,
            genuine,
            false_herald,
        }
    }

    /// Samples one herald attempt.
    pub fn trial<R: Rng + ?Sized>(&self, rng: &mut R) -> HeraldOutcome {
        let a_arrived = rng.random::<f64>() < self.p_detect_a;
        let b_arrived = rng.random::<f64>() < self.p_detect_b;

        let mut clicks = [false, false];
        let mut genuine = false;
        let mut memory: Option<DensityOperator> = None;

        if a_arrived && b_arrived {
            let interfering = self.hom_overlap >= 1.0 || rng.random::<f64>() < self.hom_overlap;
            if interfering {
                let u = rng.random::<f64>();
                if u < self.psi_minus_prob && self.psi_minus_state.is_some() {
                    // Antisymmetric component: one photon per arm.
                    clicks = [true, true];
                    genuine = true;
                    memory = self.psi_minus_state.clone();
                } else if self.herald_psi_plus
                    && u < self.psi_minus_prob + self.psi_plus_prob
                    && self.psi_plus_state.is_some()
                {
                    // Number-resolving upgrade: Ψ⁺ (same arm, orthogonal
                    // polarizations) heralds too.
                    clicks = [true, true];
                    genuine = true;
                    memory = self.psi_plus_state.clone();
                } else {
                    // Symmetric component: both photons bunch into one arm.
                    let arm = rng.random::<f64>() < 0.5;
                    clicks[arm as usize] = true;
                    memory = self.bunched_state.clone();
                }
            } else {
                // Distinguishable photons: independent 50/50 arms. A
                // coincidence carries no polarization information, leaving
                // the memory marginals.
                let arm_a = rng.random::<f64>() < 0.5;
                let arm_b = rng.random::<f64>() < 0.5;
                clicks[arm_a as usize] = true;
                clicks[arm_b as usize] = true;
                if arm_a != arm_b {
                    genuine = true;
                }
                memory = Some(self.traced_state.clone());
            }
        } else if a_arrived || b_arrived {
            let arm = rng.random::<f64>() < 0.5;
            clicks[arm as usize] = true;
            memory = Some(self.traced_state.clone());
        }

        for p_extra in [self.p_extra_a, self.p_extra_b] {
            if p_extra > 0.0 && rng.random::<f64>() < p_extra {
                let arm = rng.random::<f64>() < 0.5;
                clicks[arm as usize] = true;
            }
        }
        for click in &mut clicks {
            if self.dark > 0.0 && rng.random::<f64>() < self.dark {
                *click = true;
            }
        }

        if !(clicks[0] && clicks[1]) {
            return HeraldOutcome::not_heralded(self.latency_s);
        }
        let memory_state = Some(memory.unwrap_or_else(|| self.traced_state.clone()));
        HeraldOutcome {
            heralded: true,
            false_herald: !genuine,
            memory_state,
            latency_s: self.latency_s,
        }
    }
}
