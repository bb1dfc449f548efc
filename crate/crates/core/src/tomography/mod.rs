//! Two-qubit tomography: coincidence-count simulation, direct and
//! maximum-likelihood density-matrix reconstruction, closed-form Bell
//! fidelities, a certified two-basis fidelity lower bound, and bootstrap
//! uncertainty on the reconstructed fidelity.
//!
//! Throughout, "first" refers to qubit 1 (the spin in a spin-photon pair)
//! and "second" to qubit 0 (the photon); a photon's Z basis is {H, V}, X the
//! diagonal pair, and Y the circular pair {σ⁺, σ⁻}.

mod mle;

pub use mle::{mle_reconstruction, verify_informationally_complete};

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::state::{
    BellKind, DensityOperator, Pauli, PauliObservable, PureState, QubitBasis,
};
use crate::optics::DetectorModel;
use crate::{derive_seed, Error, Result};

/// A measurement basis label for one qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MeasBasis {
    Z,
    X,
    Y,
}

impl MeasBasis {
    pub const ALL: [MeasBasis; 3] = [MeasBasis::Z, MeasBasis::X, MeasBasis::Y];

    pub fn qubit_basis(self) -> QubitBasis {
        match self {
            MeasBasis::Z => QubitBasis::z(),
            MeasBasis::X => QubitBasis::x(),
            MeasBasis::Y => QubitBasis::y(),
        }
    }

    pub fn pauli(self) -> Pauli {
        match self {
            MeasBasis::Z => Pauli::Z,
            MeasBasis::X => Pauli::X,
            MeasBasis::Y => Pauli::Y,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            MeasBasis::Z => "Z",
            MeasBasis::X => "X",
            MeasBasis::Y => "Y",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "Z" | "z" => Ok(MeasBasis::Z),
            "X" | "x" => Ok(MeasBasis::X),
            "Y" | "y" => Ok(MeasBasis::Y),
            other => Err(Error::InvalidArgument(format!("unknown basis {other:?}"))),
        }
    }
}

/// One coincidence-measurement setting: a basis per qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisSetting {
    /// Basis of qubit 1 (the spin).
    pub first: MeasBasis,
    /// Basis of qubit 0 (the photon).
    pub second: MeasBasis,
}

impl BasisSetting {
    pub fn new(first: MeasBasis, second: MeasBasis) -> Self {
        Self { first, second }
    }

    /// Born-rule outcome probabilities [p00, p01, p10, p11] where the first
    /// index is the first qubit's outcome.
    pub fn outcome_probs(&self, rho: &DensityOperator) -> Result<[f64; 4]> {
        let fb = self.first.qubit_basis();
        let sb = self.second.qubit_basis();
        let first = rho.projective_measure_probs(1, &fb)?;
        let mut probs = [0.0; 4];
        for (a, (pa, post)) in [(0, (first.prob0, first.post0)), (1, (first.prob1, first.post1))]
        {
            if let Some(post) = post {
                let second = post.projective_measure_probs(0, &sb)?;
                probs[a * 2] = pa * second.prob0;
                probs[a * 2 + 1] = pa * second.prob1;
            }
        }
        Ok(probs)
    }
}

/// The symmetric 9-setting design {Z,X,Y} ⊗ {Z,X,Y}; informationally
/// complete for two qubits.
pub fn standard_settings() -> Vec<BasisSetting> {
    let mut settings = Vec::with_capacity(9);
    for &first in &MeasBasis::ALL {
        for &second in &MeasBasis::ALL {
            settings.push(BasisSetting::new(first, second));
        }
    }
    settings
}

/// Per-setting coincidence counts; `counts[s][a*2 + b]` is the number of
/// shots of setting `s` with first-qubit outcome `a` and second-qubit
/// outcome `b`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountsTable {
    pub settings: Vec<BasisSetting>,
    pub counts: Vec<[u64; 4]>,
}

impl CountsTable {
    pub fn new(settings: Vec<BasisSetting>, counts: Vec<[u64; 4]>) -> Result<Self> {
        if settings.len() != counts.len() {
            return Err(Error::InvalidArgument(format!(
                "{} settings with {} count rows",
                settings.len(),
                counts.len()
            )));
        }
        Ok(Self { settings, counts })
    }

    pub fn shots(&self, setting_idx: usize) -> u64 {
        self.counts[setting_idx].iter().sum()
    }

    /// CSV with columns (setting_a, setting_b, outcome_a, outcome_b, count).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("setting_a,setting_b,outcome_a,outcome_b,count\n");
        for (setting, row) in self.settings.iter().zip(&self.counts) {
            for a in 0..2 {
                for b in 0..2 {
                    out.push_str(&format!(
                        "{},{},{},{},{}\n",
                        setting.first.label(),
                        setting.second.label(),
                        a,
                        b,
                        row[a * 2 + b]
                    ));
                }
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut settings = Vec::new();
        let mut counts: Vec<[u64; 4]> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || lineno == 0 && line.starts_with("setting_a") {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(Error::InvalidArgument(format!(
                    "line {}: expected 5 fields",
                    lineno + 1
                )));
            }
            let setting = BasisSetting::new(
                MeasBasis::parse(fields[0])?,
                MeasBasis::parse(fields[1])?,
            );
            let a: usize = fields[2]
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("line {}: bad outcome", lineno + 1)))?;
            let b: usize = fields[3]
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("line {}: bad outcome", lineno + 1)))?;
            let count: u64 = fields[4]
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("line {}: bad count", lineno + 1)))?;
            if a > 1 || b > 1 {
                return Err(Error::InvalidArgument(format!(
                    "line {}: outcomes must be 0 or 1",
                    lineno + 1
                )));
            }
            let idx = match settings.iter().position(|s| *s == setting) {
                Some(i) => i,
                None => {
                    settings.push(setting);
                    counts.push([0; 4]);
                    settings.len() - 1
                }
            };
            counts[idx][a * 2 + b] += count;
        }
        Self::new(settings, counts)
    }
}

/// Draws a multinomial sample by sequential binomial splitting.
pub fn sample_multinomial<R: Rng + ?Sized>(shots: u64, probs: &[f64], rng: &mut R) -> Vec<u64> {
    let mut out = vec![0u64; probs.len()];
    let mut remaining_shots = shots;
    let mut remaining_prob: f64 = probs.iter().sum();
    for (i, &p) in probs.iter().enumerate() {
        if remaining_shots == 0 {
            break;
        }
        if i == probs.len() - 1 || remaining_prob <= 0.0 {
            out[i] = remaining_shots;
            break;
        }
        let cond = (p / remaining_prob).clamp(0.0, 1.0);
        let draw = Binomial::new(remaining_shots, cond)
            .expect("conditional probability in range")
            .sample(rng);
        out[i] = draw;
        remaining_shots -= draw;
        remaining_prob -= p;
    }
    out
}

/// Simulates coincidence counting of `rho_true` over the given settings:
/// multinomial sampling of the Born-rule probabilities, mixed with a flat
/// dark-count background of weight `det.dark_count_prob`.
pub fn simulate_counts<R: Rng + ?Sized>(
    rho_true: &DensityOperator,
    settings: &[BasisSetting],
    shots_per_setting: u64,
    det: &DetectorModel,
    rng: &mut R,
) -> Result<CountsTable> {
    if rho_true.n_qubits() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            actual: rho_true.dim(),
        });
    }
    if shots_per_setting == 0 {
        return Err(Error::InvalidArgument("shots must be > 0".into()));
    }
    det.validate()?;
    let background = det.dark_count_prob;
    let mut counts = Vec::with_capacity(settings.len());
    for setting in settings {
        let born = setting.outcome_probs(rho_true)?;
        let mixed: Vec<f64> = born
            .iter()
            .map(|p| (1.0 - background) * p + background / 4.0)
            .collect();
        let drawn = sample_multinomial(shots_per_setting, &mixed, rng);
        counts.push([drawn[0], drawn[1], drawn[2], drawn[3]]);
    }
    CountsTable::new(settings.to_vec(), counts)
}

/// Conditional probabilities Pr[first = a | second = b] per setting; `None`
/// where the conditioning count is zero.
pub fn conditional_probabilities(counts: &CountsTable) -> Vec<[[Option<f64>; 2]; 2]> {
    counts
        .counts
        .iter()
        .map(|row| {
            let mut table = [[None; 2]; 2];
            for b in 0..2 {
                let conditioning = row[b] + row[2 + b];
                if conditioning > 0 {
                    for a in 0..2 {
                        table[a][b] = Some(row[a * 2 + b] as f64 / conditioning as f64);
                    }
                }
            }
            table
        })
        .collect()
}

/// The 16 Pauli correlators r[i][j] = ⟨σ_i ⊗ σ_j⟩ (index order I, X, Y, Z;
/// i on the first qubit). r_II is forced to 1; single-qubit marginals are
/// averaged over the settings that share the relevant basis.
pub fn correlators_from_counts(counts: &CountsTable) -> [[f64; 4]; 4] {
    let mut r = [[0.0f64; 4]; 4];
    r[0][0] = 1.0;
    let pauli_idx = |b: MeasBasis| match b {
        MeasBasis::X => 1usize,
        MeasBasis::Y => 2,
        MeasBasis::Z => 3,
    };
    let mut marg_first = [[0.0f64; 4]; 2]; // [sums, counts] per pauli index
    let mut marg_second = [[0.0f64; 4]; 2];
    for (setting, row) in counts.settings.iter().zip(&counts.counts) {
        let shots: u64 = row.iter().sum();
        if shots == 0 {
            continue;
        }
        let n = shots as f64;
        let p = [
            row[0] as f64 / n,
            row[1] as f64 / n,
            row[2] as f64 / n,
            row[3] as f64 / n,
        ];
        let i = pauli_idx(setting.first);
        let j = pauli_idx(setting.second);
        r[i][j] = p[0] - p[1] - p[2] + p[3];
        let first_marg = p[0] + p[1] - p[2] - p[3];
        let second_marg = p[0] - p[1] + p[2] - p[3];
        marg_first[0][i] += first_marg;
        marg_first[1][i] += 1.0;
        marg_second[0][j] += second_marg;
        marg_second[1][j] += 1.0;
    }
    for k in 1..4 {
        if marg_first[1][k] > 0.0 {
            r[k][0] = marg_first[0][k] / marg_first[1][k];
        }
        if marg_second[1][k] > 0.0 {
            r[0][k] = marg_second[0][k] / marg_second[1][k];
        }
    }
    r
}

/// Extracts the exact correlator table of a known state.
pub fn exact_correlators(rho: &DensityOperator) -> Result<[[f64; 4]; 4]> {
    let mut r = [[0.0f64; 4]; 4];
    for (i, &a) in Pauli::ALL.iter().enumerate() {
        for (j, &b) in Pauli::ALL.iter().enumerate() {
            r[i][j] = rho.pauli_expectation(&PauliObservable::two(a, b))?;
        }
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReconstructionMethod {
    Direct,
    Mle,
}

/// A reconstructed state plus its diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct TomographyResult {
    pub rho: DensityOperator,
    pub method: ReconstructionMethod,
    pub fidelity_to_target: Option<f64>,
    pub min_eigenvalue: f64,
    /// False when the reconstruction has a negative eigenvalue (possible for
    /// the direct method; never silently repaired).
    pub physical: bool,
    pub log_likelihood: Option<f64>,
    pub iterations: Option<usize>,
}

/// Direct linear-inversion reconstruction ρ = ¼ Σ r_ij σ_i ⊗ σ_j.
///
/// Hermitian and trace-one by construction (r_II is forced to 1); positivity
/// is *not* guaranteed — the minimum eigenvalue is reported and flagged.
pub fn direct_reconstruction(
    correlators: &[[f64; 4]; 4],
    target: Option<&PureState>,
) -> Result<TomographyResult> {
    let mut m = nalgebra::DMatrix::<num_complex::Complex64>::zeros(4, 4);
    for (i, &a) in Pauli::ALL.iter().enumerate() {
        for (j, &b) in Pauli::ALL.iter().enumerate() {
            let weight = if i == 0 && j == 0 { 1.0 } else { correlators[i][j] };
            let op = PauliObservable::two(a, b).matrix();
            m += op * num_complex::Complex64::new(weight / 4.0, 0.0);
        }
    }
    let rho = DensityOperator::from_matrix_unchecked(m);
    let min_eigenvalue = rho.min_eigenvalue();
    let fidelity_to_target = match target {
        Some(t) => Some(raw_fidelity(&rho, t)?),
        None => None,
    };
    Ok(TomographyResult {
        physical: min_eigenvalue >= -crate::state::TOL_PSD,
        rho,
        method: ReconstructionMethod::Direct,
        fidelity_to_target,
        min_eigenvalue,
        log_likelihood: None,
        iterations: None,
    })
}

/// ⟨ψ|ρ|ψ⟩ without clamping (direct reconstructions may dip below zero).
fn raw_fidelity(rho: &DensityOperator, target: &PureState) -> Result<f64> {
    if target.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            actual: target.dim(),
        });
    }
    let v = target.amplitudes();
    let mut acc = num_complex::Complex64::new(0.0, 0.0);
    for r in 0..rho.dim() {
        for c in 0..rho.dim() {
            acc += v[r].conj() * rho.entry(r, c) * v[c];
        }
    }
    Ok(acc.re)
}

/// Closed-form fidelity of a state to a Bell target from its (XX, YY, ZZ)
/// correlators: F = ¼(1 + s_x·xx + s_y·yy + s_z·zz).
pub fn fidelity_from_correlators(xx: f64, yy: f64, zz: f64, target: BellKind) -> f64 {
    let (sx, sy, sz) = target.correlator_signs();
    (1.0 + sx * xx + sy * yy + sz * zz) / 4.0
}

/// A complete conditional-probability table in one basis pair:
/// `cond[a][b]` = Pr[first = a | second = b]. Columns must sum to 1.
#[derive(Debug, Clone, Copy)]
pub struct ConditionalTable {
    pub cond: [[f64; 2]; 2],
}

impl ConditionalTable {
    pub fn new(cond: [[f64; 2]; 2]) -> Result<Self> {
        for (b, column) in (0..2).map(|b| (b, cond[0][b] + cond[1][b])) {
            if (column - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidArgument(format!(
                    "conditional column {b} sums to {column}, expected 1"
                )));
            }
        }
        Ok(Self { cond })
    }

    /// Correlated-outcome probability certified against any conditioning
    /// marginal: the worst case over Pr[second = b] is the smaller of the
    /// two matched conditionals.
    fn certified_correlation(&self, same_outcomes: bool) -> f64 {
        if same_outcomes {
            self.cond[0][0].min(self.cond[1][1])
        } else {
            self.cond[1][0].min(self.cond[0][1])
        }
    }
}

/// Certified fidelity lower bound from conditional tables in the Z-pair and
/// X-pair bases: F ≥ C_Z + C_X − 1, where C_B is the correlated-outcome
/// probability matching the target's sign in basis B.
///
/// Soundness needs only ρ ⪰ 0: the partner Bell state with (−s_x, s_y, −s_z)
/// has nonnegative fidelity, which bounds the unmeasured YY correlator.
pub fn fidelity_lower_bound_two_bases(
    z_table: &ConditionalTable,
    x_table: &ConditionalTable,
    target: BellKind,
) -> f64 {
    let (sx, _, sz) = target.correlator_signs();
    let c_z = z_table.certified_correlation(sz > 0.0);
    let c_x = x_table.certified_correlation(sx > 0.0);
    c_z + c_x - 1.0
}

/// Bootstrap distribution summary of the MLE fidelity.
#[derive(Debug, Clone, Serialize)]
pub struct BootstrapStats {
    pub n_resamples: usize,
    pub mean: f64,
    pub median: f64,
    /// Sample standard deviation; absent for a single resample.
    pub std: Option<f64>,
    pub fidelities: Vec<f64>,
}

/// Nonparametric bootstrap: resamples each setting's counts multinomially at
/// the original shot totals, refits by maximum likelihood, and collects the
/// fidelity distribution.
///
/// Every resample runs on its own seed derived from one master draw, so the
/// result is identical for any `workers` count; workers only partition the
/// index range across threads.
pub fn bootstrap_statistics<R: Rng + ?Sized>(
    counts: &CountsTable,
    target: &PureState,
    n_resamples: usize,
    workers: usize,
    rng: &mut R,
) -> Result<BootstrapStats> {
    if n_resamples == 0 {
        return Err(Error::InvalidArgument("need at least one resample".into()));
    }
    let master: u64 = rng.random();
    let one_fit = |i: usize| -> Result<f64> {
        let mut stream =
            <rand::rngs::StdRng as rand::SeedableRng>::seed_from_u64(derive_seed(master, i as u64));
        let resampled = resample_counts(counts, &mut stream);
        let fit = mle_reconstruction(&resampled, Some(target))?;
        Ok(fit.fidelity_to_target.expect("target supplied"))
    };

    let workers = workers.max(1).min(n_resamples);
    let mut fidelities: Vec<f64>;
    if workers == 1 {
        fidelities = Vec::with_capacity(n_resamples);
        for i in 0..n_resamples {
            fidelities.push(one_fit(i)?);
        }
    } else {
        let mut slots: Vec<Result<f64>> = (0..n_resamples)
            .map(|_| Err(Error::InvalidState("unfilled".into())))
            .collect();
        let chunk = n_resamples.div_ceil(workers);
        std::thread::scope(|scope| {
            for (w, slice) in slots.chunks_mut(chunk).enumerate() {
                let one_fit = &one_fit;
                scope.spawn(move || {
                    for (k, slot) in slice.iter_mut().enumerate() {
                        *slot = one_fit(w * chunk + k);
                    }
                });
            }
        });
        fidelities = slots.into_iter().collect::<Result<Vec<f64>>>()?;
    }
    let mean = fidelities.iter().sum::<f64>() / n_resamples as f64;
    let mut sorted = fidelities.clone();
    sorted.sort_by(f64::total_cmp);
    let median = if n_resamples % 2 == 1 {
        sorted[n_resamples / 2]
    } else {
        (sorted[n_resamples / 2 - 1] + sorted[n_resamples / 2]) / 2.0
    };
    let std = (n_resamples > 1).then(|| {
        let var = fidelities
            .iter()
            .map(|f| (f - mean).powi(2))
            .sum::<f64>()
            / (n_resamples - 1) as f64;
        var.sqrt()
    });
    Ok(BootstrapStats {
        n_resamples,
        mean,
        median,
        std,
        fidelities,
    })
}

fn resample_counts<R: Rng + ?Sized>(counts: &CountsTable, rng: &mut R) -> CountsTable {
    let resampled = counts
        .counts
        .iter()
        .map(|row| {
            let shots: u64 = row.iter().sum();
            if shots == 0 {
                return *row;
            }
            let probs: Vec<f64> = row.iter().map(|&c| c as f64 / shots as f64).collect();
            let drawn = sample_multinomial(shots, &probs, rng);
            [drawn[0], drawn[1], drawn[2], drawn[3]]
        })
        .collect();
    CountsTable {
        settings: counts.settings.clone(),
        counts: resampled,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::{ideal_spin_photon_state, ideal_spin_photon_target};
    use crate::state::{bell_state, random_density};
    use approx::assert_abs_diff_eq;
    use rand::{rngs::StdRng, SeedableRng};

    #[test]
    fn simulated_counts_reproduce_ideal_conditionals() {
        let rho = ideal_spin_photon_state();
        let settings = vec![BasisSetting::new(MeasBasis::Z, MeasBasis::Z)];
        let mut rng = StdRng::seed_from_u64(1);
        let counts =
            simulate_counts(&rho, &settings, 10_000, &DetectorModel::default(), &mut rng).unwrap();
        let cond = conditional_probabilities(&counts);
        // Pr[spin ↑ | photon H] = 1 and Pr[spin ↓ | photon V] = 1, up to
        // having no wrong-outcome counts at all.
        assert_abs_diff_eq!(cond[0][0][0].unwrap(), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(cond[0][1][1].unwrap(), 1.0, epsilon = 1e-9);
        assert_eq!(counts.shots(0), 10_000);
    }

    #[test]
    fn maximally_mixed_counts_are_flat() {
        let rho = DensityOperator::maximally_mixed(2);
        let settings = standard_settings();
        let mut rng = StdRng::seed_from_u64(2);
        let shots = 40_000u64;
        let counts =
            simulate_counts(&rho, &settings, shots, &DetectorModel::default(), &mut rng).unwrap();
        for row in &counts.counts {
            for &c in row {
                let freq = c as f64 / shots as f64;
                let sigma = (0.25 * 0.75 / shots as f64).sqrt();
                assert!((freq - 0.25).abs() < 5.0 * sigma, "freq {freq}");
            }
        }
    }

    #[test]
    fn counts_are_deterministic_under_a_seed() {
        let rho = ideal_spin_photon_state();
        let settings = standard_settings();
        let make = |seed| {
            let mut rng = StdRng::seed_from_u64(seed);
            simulate_counts(&rho, &settings, 1000, &DetectorModel::default(), &mut rng).unwrap()
        };
        assert_eq!(make(5), make(5));
        assert_ne!(make(5), make(6));
    }

    #[test]
    fn csv_round_trip() {
        let rho = ideal_spin_photon_state();
        let settings = standard_settings();
        let mut rng = StdRng::seed_from_u64(3);
        let counts =
            simulate_counts(&rho, &settings, 500, &DetectorModel::default(), &mut rng).unwrap();
        let csv = counts.to_csv();
        let parsed = CountsTable::from_csv(&csv).unwrap();
        assert_eq!(parsed, counts);
    }

    #[test]
    fn zero_conditioning_count_yields_none() {
        let counts = CountsTable::new(
            vec![BasisSetting::new(MeasBasis::Z, MeasBasis::Z)],
            vec![[10, 0, 5, 0]],
        )
        .unwrap();
        let cond = conditional_probabilities(&counts);
        assert!(cond[0][0][1].is_none());
        assert_abs_diff_eq!(cond[0][0][0].unwrap(), 10.0 / 15.0, epsilon = 1e-12);
    }

    #[test]
    fn direct_reconstruction_inverts_bell_correlators() {
        let mut r = [[0.0; 4]; 4];
        r[0][0] = 1.0;
        r[1][1] = 1.0; // XX
        r[2][2] = -1.0; // YY
        r[3][3] = 1.0; // ZZ
        let phi = bell_state(BellKind::PhiPlus);
        let result = direct_reconstruction(&r, Some(&phi)).unwrap();
        assert!(result.physical);
        assert_abs_diff_eq!(result.fidelity_to_target.unwrap(), 1.0, epsilon = 1e-12);
        let expect = DensityOperator::from_pure(&phi);
        assert!((result.rho.matrix() - expect.matrix()).norm() < 1e-12);
    }

    #[test]
    fn direct_reconstruction_round_trips_random_states() {
        let mut rng = StdRng::seed_from_u64(12);
        for _ in 0..100 {
            let rho = random_density(2, &mut rng);
            let r = exact_correlators(&rho).unwrap();
            let rebuilt = direct_reconstruction(&r, None).unwrap();
            assert!(
                (rebuilt.rho.matrix() - rho.matrix()).norm() < 1e-10,
                "round trip drifted"
            );
        }
    }

    #[test]
    fn impossible_conditionals_flag_nonphysical_reconstruction() {
        // A measured conditional slightly above 1 (e.g. 1.02 from imperfect
        // normalization) pushes the ZZ correlator past the physical range.
        let over = 1.02f64;
        let zz = over * 0.5 + 0.5 * 1.0 - 0.0 - (-0.02) * 0.5; // joint algebra, > 1
        let mut r = [[0.0; 4]; 4];
        r[0][0] = 1.0;
        r[1][1] = 1.0;
        r[2][2] = -1.0;
        r[3][3] = zz;
        let result = direct_reconstruction(&r, None).unwrap();
        assert!(result.min_eigenvalue < 0.0);
        assert!(!result.physical);
    }

    #[test]
    fn correlator_fidelity_identity_matches_matrix_fidelity() {
        let mut rng = StdRng::seed_from_u64(9);
        for _ in 0..200 {
            let rho = random_density(2, &mut rng);
            let r = exact_correlators(&rho).unwrap();
            for &kind in &BellKind::ALL {
                let from_corr = fidelity_from_correlators(r[1][1], r[2][2], r[3][3], kind);
                let direct = rho.fidelity_pure_target(&bell_state(kind)).unwrap();
                assert_abs_diff_eq!(from_corr, direct, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn correlator_fidelity_reference_points() {
        assert_abs_diff_eq!(
            fidelity_from_correlators(1.0, -1.0, 1.0, BellKind::PhiPlus),
            1.0,
            epsilon = 0.0
        );
        assert_abs_diff_eq!(
            fidelity_from_correlators(0.0, 0.0, 0.0, BellKind::PhiPlus),
            0.25,
            epsilon = 0.0
        );
    }

    #[test]
    fn lower_bound_certifies_ideal_data_and_not_classical() {
        // Ideal Φ⁺ data: perfect same-outcome correlations in both bases.
        let perfect = ConditionalTable::new([[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let bound = fidelity_lower_bound_two_bases(&perfect, &perfect, BellKind::PhiPlus);
        assert!(bound >= 0.99, "ideal bound {bound}");

        // The classically correlated state: perfect in Z, flat in X.
        let flat = ConditionalTable::new([[0.5, 0.5], [0.5, 0.5]]).unwrap();
        let bound = fidelity_lower_bound_two_bases(&perfect, &flat, BellKind::PhiPlus);
        assert!(bound <= 0.5 + 1e-12, "classical bound {bound}");
    }

    #[test]
    fn lower_bound_is_sound_on_random_states() {
        let mut rng = StdRng::seed_from_u64(31);
        for _ in 0..1000 {
            let rho = random_density(2, &mut rng);
            let z = conditional_table_of(&rho, MeasBasis::Z);
            let x = conditional_table_of(&rho, MeasBasis::X);
            for &kind in &BellKind::ALL {
                let bound = fidelity_lower_bound_two_bases(&z, &x, kind);
                let truth = rho.fidelity_pure_target(&bell_state(kind)).unwrap();
                assert!(
                    bound <= truth + 1e-9,
                    "bound {bound} exceeds fidelity {truth}"
                );
            }
        }
    }

    fn conditional_table_of(rho: &DensityOperator, basis: MeasBasis) -> ConditionalTable {
        let probs = BasisSetting::new(basis, basis).outcome_probs(rho).unwrap();
        let mut cond = [[0.0; 2]; 2];
        for b in 0..2 {
            let conditioning = probs[b] + probs[2 + b];
            for a in 0..2 {
                cond[a][b] = if conditioning > 1e-15 {
                    probs[a * 2 + b] / conditioning
                } else {
                    0.5
                };
            }
        }
        ConditionalTable::new(cond).unwrap()
    }

    #[test]
    fn inconsistent_conditional_table_is_rejected() {
        assert!(ConditionalTable::new([[0.9, 0.0], [0.0, 1.0]]).is_err());
    }

    #[test]
    fn bootstrap_single_resample_has_no_std() {
        let rho = ideal_spin_photon_state();
        let settings = standard_settings();
        let mut rng = StdRng::seed_from_u64(17);
        let counts =
            simulate_counts(&rho, &settings, 400, &DetectorModel::default(), &mut rng).unwrap();
        let stats =
            bootstrap_statistics(&counts, &ideal_spin_photon_target(), 1, 1, &mut rng).unwrap();
        assert!(stats.std.is_none());
        assert_eq!(stats.fidelities.len(), 1);
        assert_abs_diff_eq!(stats.mean, stats.median, epsilon = 0.0);
    }

    #[test]
    fn bootstrap_std_shrinks_with_shots() {
        let rho = ideal_spin_photon_state()
            .depolarize(0.1)
            .unwrap();
        let settings = standard_settings();
        let target = ideal_spin_photon_target();
        let mut widths = Vec::new();
        for &shots in &[250u64, 1000u64] {
            let mut rng = StdRng::seed_from_u64(23);
            let counts =
                simulate_counts(&rho, &settings, shots, &DetectorModel::default(), &mut rng)
                    .unwrap();
            let stats = bootstrap_statistics(&counts, &target, 60, 2, &mut rng).unwrap();
            widths.push(stats.std.unwrap());
        }
        // Quadrupling the shots should roughly halve the spread.
        let ratio = widths[0] / widths[1];
        assert!(
            ratio > 1.4 && ratio < 2.9,
            "σ(250)/σ(1000) = {ratio}, widths {widths:?}"
        );
    }

    #[test]
    fn flat_conditionals_for_classical_state_in_x_basis() {
        // ½(|↑↑⟩⟨↑↑| + |↓↓⟩⟨↓↓|) measured in X ⊗ X: no correlation left.
        let rho_m = DensityOperator::mixture(&[
            (0.5, DensityOperator::from_pure(&crate::state::PureState::basis(2, 0))),
            (0.5, DensityOperator::from_pure(&crate::state::PureState::basis(2, 3))),
        ])
        .unwrap();
        let settings = vec![BasisSetting::new(MeasBasis::X, MeasBasis::X)];
        let mut rng = StdRng::seed_from_u64(44);
        let shots = 40_000;
        let counts =
            simulate_counts(&rho_m, &settings, shots, &DetectorModel::default(), &mut rng)
                .unwrap();
        let cond = conditional_probabilities(&counts);
        let sigma = (0.25f64 / shots as f64).sqrt() * 2.0; // conditioning ≈ half the shots
        for a in 0..2 {
            for b in 0..2 {
                let p = cond[0][a][b].unwrap();
                assert!((p - 0.5).abs() < 5.0 * sigma, "Pr[{a}|{b}] = {p}");
            }
        }
    }

    #[test]
    fn bootstrap_mean_converges_to_point_estimate() {
        // High-shot ideal data: the bootstrap mean sits within 2σ of the
        // point-estimate fidelity.
        let rho = ideal_spin_photon_state();
        let target = ideal_spin_photon_target();
        let settings = standard_settings();
        let mut rng = StdRng::seed_from_u64(71);
        let counts =
            simulate_counts(&rho, &settings, 100_000, &DetectorModel::default(), &mut rng)
                .unwrap();
        let point = mle_reconstruction(&counts, Some(&target))
            .unwrap()
            .fidelity_to_target
            .unwrap();
        let stats = bootstrap_statistics(&counts, &target, 50, 2, &mut rng).unwrap();
        let std = stats.std.unwrap();
        assert!(
            (stats.mean - point).abs() <= 2.0 * std,
            "bootstrap mean {} vs point {point} (σ = {std})",
            stats.mean
        );
    }

    #[test]
    fn bootstrap_is_invariant_under_worker_count() {
        let rho = ideal_spin_photon_state().depolarize(0.05).unwrap();
        let settings = standard_settings();
        let mut rng = StdRng::seed_from_u64(41);
        let counts =
            simulate_counts(&rho, &settings, 300, &DetectorModel::default(), &mut rng).unwrap();
        let target = ideal_spin_photon_target();
        let run = |workers: usize| {
            let mut rng = StdRng::seed_from_u64(1234);
            bootstrap_statistics(&counts, &target, 24, workers, &mut rng)
                .unwrap()
                .fidelities
        };
        let serial = run(1);
        assert_eq!(serial.len(), 24);
        for workers in [2, 3, 8] {
            assert_eq!(serial, run(workers), "workers={workers} changed results");
        }
    }

    #[test]
    fn multinomial_conserves_shots() {
        let mut rng = StdRng::seed_from_u64(9);
        for _ in 0..100 {
            let probs = [0.1, 0.2, 0.3, 0.4];
            let drawn = sample_multinomial(1000, &probs, &mut rng);
            assert_eq!(drawn.iter().sum::<u64>(), 1000);
        }
    }
}
