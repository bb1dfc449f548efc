//! The four scenario drivers behind the subcommands: rate tables, the
//! two-link protocol, N-node chains, and the tomography round trip.

use std::collections::BTreeMap;

use rand::{rngs::StdRng, SeedableRng};
use serde::Serialize;

use repsim_core::network::{
    check_coherence_budget, simulate_chain, simulate_two_link_protocol, ChainConfig,
    ChainProtocol, ChainStats, LinkSpec, NodeSpec, SourceTiming, TwoLinkConfig, TwoLinkStats,
};
use repsim_core::optics::{attenuation_preset, transmission_probability, DetectorModel, FiberChannel};
use repsim_core::source::{
    apply_source_imperfections, ideal_spin_photon_state, ideal_spin_photon_target, QDSourceModel,
    SourceImperfections,
};
use repsim_core::state::{bell_state, BellKind, DensityOperator, PureState};
use repsim_core::tomography::{
    bootstrap_statistics, direct_reconstruction, exact_correlators, mle_reconstruction,
    simulate_counts, standard_settings, verify_informationally_complete, BasisSetting,
    MeasBasis,
};
use repsim_core::{derive_seed, Error, Result};

use crate::config::ExperimentConfig;

/// Everything a command hands back to `main` for writing.
pub struct CommandOutput {
    /// Full artifact (resolved config, warnings, results).
    pub json: serde_json::Value,
    /// Tabular rendering for `--format csv`, when the command has one.
    pub csv: Option<String>,
    /// Line-delimited JSON event log, when recorded.
    pub events_jsonl: Option<String>,
    /// Companion CSV artifacts written next to the output file: (suffix, text).
    pub extra_csv: Vec<(String, String)>,
    /// Statistically unresolved result (exit code 3).
    pub unresolved: bool,
}

#[derive(Serialize)]
struct Artifact<T: Serialize> {
    command: &'static str,
    resolved_config: BTreeMap<String, BTreeMap<String, String>>,
    warnings: Vec<String>,
    results: T,
}

fn finish<T: Serialize>(
    command: &'static str,
    cfg: &ExperimentConfig,
    warnings: Vec<String>,
    results: T,
) -> Result<serde_json::Value> {
    serde_json::to_value(Artifact {
        command,
        resolved_config: cfg.resolved(),
        warnings,
        results,
    })
    .map_err(|e| Error::InvalidState(format!("serialization failed: {e}")))
}

/// Master seed: `--seed` beats the config; stochastic scenarios require one.
pub fn master_seed(cfg: &ExperimentConfig, flag: Option<u64>, required: bool) -> Result<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match cfg.get_opt_str("run", "master_seed") {
        Some(text) => text
            .parse::<u64>()
            .map_err(|_| Error::Config(format!("run.master_seed: bad integer {text:?}"))),
        None if required => Err(Error::Config(
            "a master seed is required (run.master_seed or --seed)".into(),
        )),
        None => Ok(0),
    }
}

fn alpha_db_per_km(cfg: &ExperimentConfig, section: &str) -> Result<f64> {
    if let Some(text) = cfg.get_opt_str(section, "alpha_db_per_km") {
        return text
            .parse::<f64>()
            .map_err(|_| Error::Config(format!("{section}.alpha_db_per_km: bad number")));
    }
    if let Some(text) = cfg.get_opt_str(section, "wavelength_nm") {
        let wl: u32 = text
            .parse()
            .map_err(|_| Error::Config(format!("{section}.wavelength_nm: bad integer")))?;
        return attenuation_preset(wl).ok_or_else(|| {
            Error::Config(format!("no attenuation preset for {wl} nm; set alpha_db_per_km"))
        });
    }
    Err(Error::Config(format!(
        "missing {section}.alpha_db_per_km (or wavelength_nm preset)"
    )))
}

fn parse_t2_list(cfg: &ExperimentConfig, section: &str, key: &str, n: usize) -> Result<Vec<f64>> {
    let text = cfg.get_str(section, key, Some("inf"))?;
    let mut values: Vec<f64> = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let v = if part.eq_ignore_ascii_case("inf") {
            f64::INFINITY
        } else {
            part.parse::<f64>()
                .map_err(|_| Error::Config(format!("{section}.{key}: bad number {part:?}")))?
                * 1e-6
        };
        values.push(v);
    }
    match values.len() {
        1 => Ok(vec![values[0]; n]),
        len if len == n => Ok(values),
        len => Err(Error::Config(format!(
            "{section}.{key}: expected 1 or {n} values, got {len}"
        ))),
    }
}

// ---------------------------------------------------------------- rate table

#[derive(Serialize)]
struct RateRow {
    l_per_arm_km: f64,
    p_arm: f64,
    p_success: f64,
    rate_hz: f64,
    seconds_per_pair: f64,
}

/// Tabulates the heralded-link rate law R = R₀·(η·10^(−Lα/10))² per arm
/// length.
pub fn run_rate_table(cfg: &ExperimentConfig) -> Result<CommandOutput> {
    let r0_hz = cfg.get_f64("rate_table", "r0_hz", Some(1e6))?;
    let alpha = alpha_db_per_km(cfg, "rate_table")?;
    let efficiency = cfg.get_f64("rate_table", "efficiency", Some(1.0))?;
    let lengths = cfg.get_f64_list(
        "rate_table",
        "arm_lengths_km",
        Some(&[10.0, 100.0, 200.0, 300.0]),
    )?;

    let mut rows = Vec::with_capacity(lengths.len());
    for l in lengths {
        let p_arm = efficiency * transmission_probability(l, alpha)?;
        let p_success = p_arm * p_arm;
        let rate_hz = r0_hz * p_success;
        rows.push(RateRow {
            l_per_arm_km: l,
            p_arm,
            p_success,
            rate_hz,
            seconds_per_pair: 1.0 / rate_hz,
        });
    }

    let mut csv = String::from("l_per_arm_km,p_arm,p_success,rate_hz,seconds_per_pair\n");
    for row in &rows {
        csv.push_str(&format!(
            "{},{:.9e},{:.9e},{:.9e},{:.9e}\n",
            row.l_per_arm_km, row.p_arm, row.p_success, row.rate_hz, row.seconds_per_pair
        ));
    }

    Ok(CommandOutput {
        json: finish("rate-table", cfg, Vec::new(), rows)?,
        csv: Some(csv),
        events_jsonl: None,
        extra_csv: Vec::new(),
        unresolved: false,
    })
}

// ------------------------------------------------------------------ two-link

fn coherence_warnings(cfg: &ExperimentConfig, t2_s: f64, t_rep_s: f64, p: f64) -> Vec<String> {
    let mut warnings = Vec::new();
    if let Some(text) = cfg.get_opt_str("fiber", "length_km") {
        if let Ok(l_km) = text.parse::<f64>() {
            let n_core = cfg.get_f64("fiber", "n_core", Some(1.468)).unwrap_or(1.468);
            if t2_s.is_finite() {
                if let Ok(report) = check_coherence_budget(l_km, n_core, t2_s, t_rep_s, p) {
                    if !report.propagation_ok {
                        warnings.push(format!(
                            "coherence budget: herald round trip {:.3e} s exceeds T2 {:.3e} s (L_max ≈ {:.3} km)",
                            report.round_trip_s, t2_s, report.l_max_km
                        ));
                    }
                    if !report.storage_ok {
                        warnings.push(format!(
                            "coherence budget: storage demands T2 ≳ {:.3e} s, memory has {:.3e} s",
                            report.required_t2_s, t2_s
                        ));
                    }
                }
            }
        }
    }
    warnings
}

#[derive(Serialize)]
struct TwoLinkResults {
    replicas: usize,
    combined: CombinedSimStats,
    per_replica: Vec<TwoLinkStats>,
}

#[derive(Serialize)]
struct CombinedSimStats {
    deliveries: u64,
    total_rounds: u64,
    total_time_s: f64,
    rate_hz: f64,
    mean_fidelity: Option<f64>,
    min_fidelity: Option<f64>,
    resolved: bool,
}

/// Drives the two-link protocol; replicas (each on a derived seed) run in
/// parallel across `workers` threads and merge in replica order.
pub fn run_link_sim(cfg: &ExperimentConfig, seed: u64, workers: usize) -> Result<CommandOutput> {
    let p_default = derived_link_success(cfg)?;
    let p_link = match cfg.get_opt_str("twolink", "p_link") {
        Some(text) => text
            .parse::<f64>()
            .map_err(|_| Error::Config("twolink.p_link: bad number".into()))?,
        None => p_default.ok_or_else(|| {
            Error::Config("set twolink.p_link or a [fiber] section to derive it".into())
        })?,
    };
    let rounds = cfg.get_u64("twolink", "rounds", Some(1_000_000))?;
    let memoryless = cfg.get_bool("twolink", "memoryless", Some(false))?;
    let r0_hz = cfg.get_f64("twolink", "r0_hz", Some(1e6))?;
    let t2 = parse_t2_list(cfg, "twolink", "node_t2_us", 3)?;
    let swap_depol = cfg.get_f64("twolink", "swap_depol_prob", Some(0.0))?;
    let delays = cfg.get_f64_list("twolink", "classical_delays_us", Some(&[0.0, 0.0]))?;
    if delays.len() != 2 {
        return Err(Error::Config("twolink.classical_delays_us needs 2 values".into()));
    }
    let op_time = cfg.get_f64("twolink", "local_op_time_us", Some(0.0))? * 1e-6;
    let record_events = cfg.get_bool("twolink", "record_events", Some(false))?;
    let replicas = cfg.get_u64("run", "replicas", Some(1))? as usize;

    let base = TwoLinkConfig {
        link_success_prob: [p_link, p_link],
        attempt_period_s: 1.0 / r0_hz,
        classical_delay_s: [delays[0] * 1e-6, delays[1] * 1e-6],
        node_t2_s: [t2[0], t2[1], t2[2]],
        swap_depolarizing_prob: swap_depol,
        local_op_time_s: op_time,
        link_pair_kind: BellKind::PsiMinus,
        memoryless,
        max_rounds: rounds.div_ceil(replicas as u64).max(1),
        record_events: record_events && replicas == 1,
    };
    base.validate()?;

    let warnings = coherence_warnings(cfg, t2[0], base.attempt_period_s, p_link);

    let stats = run_replicas(replicas, workers, seed, |replica_seed| {
        let mut rng = StdRng::seed_from_u64(replica_seed);
        simulate_two_link_protocol(&base, &mut rng)
    })?;

    let combined = combine_twolink(&stats);
    let unresolved = !combined.resolved;
    let events_jsonl = stats
        .first()
        .and_then(|s| s.events.as_ref())
        .map(|events| {
            events
                .iter()
                .map(|e| serde_json::to_string(e).expect("event serializes"))
                .collect::<Vec<_>>()
                .join("\n")
        });

    let results = TwoLinkResults {
        replicas,
        combined,
        per_replica: stats,
    };
    Ok(CommandOutput {
        json: finish("link-sim", cfg, warnings, results)?,
        csv: None,
        events_jsonl,
        extra_csv: Vec::new(),
        unresolved,
    })
}

fn derived_link_success(cfg: &ExperimentConfig) -> Result<Option<f64>> {
    if cfg.get_opt_str("fiber", "length_km").is_none() {
        return Ok(None);
    }
    let link = LinkSpec {
        channel: FiberChannel::new(
            cfg.get_f64("fiber", "length_km", None)?,
            alpha_db_per_km(cfg, "fiber")?,
            cfg.get_f64("fiber", "n_core", Some(1.468))?,
        )?,
        timing: SourceTiming::RateHz(cfg.get_f64("twolink", "r0_hz", Some(1e6))?),
        p_success: None,
        detectors: detectors_from(cfg)?,
    };
    Ok(Some(link.success_prob()?))
}

fn detectors_from(cfg: &ExperimentConfig) -> Result<DetectorModel> {
    let det = DetectorModel {
        efficiency: cfg.get_f64("detectors", "efficiency", Some(1.0))?,
        dark_count_prob: cfg.get_f64("detectors", "dark_count_prob", Some(0.0))?,
        number_resolving: cfg.get_bool("detectors", "number_resolving", Some(false))?,
    };
    det.validate()?;
    Ok(det)
}

fn run_replicas<T: Send>(
    replicas: usize,
    workers: usize,
    seed: u64,
    job: impl Fn(u64) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let replicas = replicas.max(1);
    let workers = workers.max(1).min(replicas);
    if workers == 1 {
        return (0..replicas)
            .map(|i| job(derive_seed(seed, i as u64)))
            .collect();
    }
    let mut slots: Vec<Option<Result<T>>> = (0..replicas).map(|_| None).collect();
    let chunk = replicas.div_ceil(workers);
    std::thread::scope(|scope| {
        for (w, slice) in slots.chunks_mut(chunk).enumerate() {
            let job = &job;
            scope.spawn(move || {
                for (k, slot) in slice.iter_mut().enumerate() {
                    let idx = w * chunk + k;
                    *slot = Some(job(derive_seed(seed, idx as u64)));
                }
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.expect("all replicas filled"))
        .collect()
}

fn combine_twolink(stats: &[TwoLinkStats]) -> CombinedSimStats {
    let deliveries: u64 = stats.iter().map(|s| s.deliveries).sum();
    let total_rounds: u64 = stats.iter().map(|s| s.total_rounds).sum();
    let total_time_s: f64 = stats.iter().map(|s| s.total_time_s).sum();
    let fid_weight: f64 = stats
        .iter()
        .filter_map(|s| s.mean_fidelity.map(|f| f * s.deliveries as f64))
        .sum();
    let min_fidelity = stats
        .iter()
        .filter_map(|s| s.min_fidelity)
        .fold(None, |acc: Option<f64>, f| {
            Some(acc.map_or(f, |a| a.min(f)))
        });
    CombinedSimStats {
        deliveries,
        total_rounds,
        total_time_s,
        rate_hz: deliveries as f64 / total_time_s,
        mean_fidelity: (deliveries > 0).then(|| fid_weight / deliveries as f64),
        min_fidelity,
        resolved: deliveries > 0,
    }
}

// --------------------------------------------------------------------- chain

#[derive(Serialize)]
struct ChainResults {
    n_nodes: usize,
    heralded: bool,
    replicas: usize,
    combined: CombinedChainStats,
    per_replica: Vec<ChainStats>,
}

#[derive(Serialize)]
struct CombinedChainStats {
    completions: u64,
    total_rounds: u64,
    rate_hz: f64,
    mean_completion_rounds: f64,
    mean_fidelity: Option<f64>,
    unheralded_success_weight: Option<f64>,
    unheralded_effective_fidelity: Option<f64>,
    resolved: bool,
}

/// Drives the N-node chain simulation.
pub fn run_chain_sim(cfg: &ExperimentConfig, seed: u64, workers: usize) -> Result<CommandOutput> {
    let n_nodes = cfg.get_u64("chain", "n_nodes", None)? as usize;
    if n_nodes < 2 {
        return Err(Error::Config("chain.n_nodes must be ≥ 2".into()));
    }
    let p_success = cfg.get_f64("chain", "p_success", None)?;
    let heralded = cfg.get_bool("chain", "heralded", Some(true))?;
    let protocol = match cfg
        .get_str("chain", "protocol", Some("stop-on-success"))?
        .as_str()
    {
        "stop-on-success" => ChainProtocol::StopOnSuccess,
        "reset-on-full-chain" => ChainProtocol::ResetOnFullChain,
        other => {
            return Err(Error::Config(format!("unknown chain.protocol {other:?}")))
        }
    };
    let rounds = cfg.get_u64("chain", "rounds", Some(1_000_000))?;
    let r0_hz = cfg.get_f64("chain", "r0_hz", Some(1e6))?;
    let t2 = parse_t2_list(cfg, "chain", "node_t2_us", n_nodes)?;
    let swap_depol = cfg.get_f64("chain", "swap_depol_prob", Some(0.0))?;
    let track_states = cfg.get_bool("chain", "track_states", Some(true))?;
    let replicas = cfg.get_u64("run", "replicas", Some(1))? as usize;

    let link = LinkSpec {
        channel: FiberChannel::new(0.0, 0.17, 1.468)?,
        timing: SourceTiming::RateHz(r0_hz),
        p_success: Some(p_success),
        detectors: DetectorModel::default(),
    };
    let chain = ChainConfig {
        nodes: t2
            .iter()
            .map(|&t2_s| NodeSpec {
                memory_t2_s: t2_s,
                memory_t1_s: None,
                swap_depolarizing_prob: swap_depol,
                local_op_time_s: 0.0,
            })
            .collect(),
        links: vec![link; n_nodes - 1],
        heralded,
        protocol,
        link_pair_state: DensityOperator::from_pure(&bell_state(BellKind::PsiMinus)),
        link_pair_kind: BellKind::PsiMinus,
        track_states,
    };
    chain.validate()?;

    let warnings = coherence_warnings(cfg, t2[0], 1.0 / r0_hz, p_success);
    let per_replica_rounds = rounds.div_ceil(replicas as u64).max(1);
    let stats = run_replicas(replicas, workers, seed, |replica_seed| {
        let mut rng = StdRng::seed_from_u64(replica_seed);
        simulate_chain(&chain, &mut rng, per_replica_rounds)
    })?;

    let completions: u64 = stats.iter().map(|s| s.completions).sum();
    let total_rounds: u64 = stats.iter().map(|s| s.total_rounds).sum();
    let fid_weight: f64 = stats
        .iter()
        .filter_map(|s| s.mean_fidelity.map(|f| f * s.completions as f64))
        .sum();
    let resolved = stats.iter().all(|s| s.resolved) && completions > 0;
    let combined = CombinedChainStats {
        completions,
        total_rounds,
        rate_hz: completions as f64 / (total_rounds as f64 / r0_hz),
        mean_completion_rounds: total_rounds as f64 / completions.max(1) as f64,
        mean_fidelity: (completions > 0 && track_states)
            .then(|| fid_weight / completions as f64),
        unheralded_success_weight: stats.first().and_then(|s| s.unheralded_success_weight),
        unheralded_effective_fidelity: stats
            .first()
            .and_then(|s| s.unheralded_effective_fidelity),
        resolved,
    };
    let unresolved = !resolved;
    let results = ChainResults {
        n_nodes,
        heralded,
        replicas,
        combined,
        per_replica: stats,
    };
    Ok(CommandOutput {
        json: finish("chain-sim", cfg, warnings, results)?,
        csv: None,
        events_jsonl: None,
        extra_csv: Vec::new(),
        unresolved,
    })
}

// ---------------------------------------------------------------- tomography

#[derive(Serialize)]
struct TomographyArtifact {
    target: String,
    shots_per_setting: u64,
    analytic_mode: bool,
    true_state_fidelity: f64,
    direct: repsim_core::tomography::TomographyResult,
    mle: Option<repsim_core::tomography::TomographyResult>,
    bootstrap: Option<repsim_core::tomography::BootstrapStats>,
    histogram: Option<Vec<HistogramBin>>,
}

#[derive(Serialize)]
struct HistogramBin {
    low: f64,
    high: f64,
    count: usize,
}

/// Forward-simulates coincidence counts from the configured noisy source,
/// reconstructs the state by direct inversion and maximum likelihood, and
/// bootstraps the fidelity uncertainty.
pub fn run_tomography(cfg: &ExperimentConfig, seed: u64, workers: usize) -> Result<CommandOutput> {
    let settings = parse_settings(cfg)?;
    // Informational completeness is a configuration error, caught before any
    // simulation work.
    verify_informationally_complete(&settings).map_err(|e| match e {
        Error::IncompleteSettings { rank, needed } => Error::Config(format!(
            "measurement settings are informationally incomplete (rank {rank} < {needed})"
        )),
        other => other,
    })?;

    let shots = cfg.get_u64("tomography", "shots_per_setting", Some(500))?;
    let n_resamples = cfg.get_u64("tomography", "n_resamples", Some(300))? as usize;
    let analytic_mode = cfg.get_bool("tomography", "analytic_mode", Some(false))?;
    let (target_name, target) = parse_target(cfg)?;

    let source = QDSourceModel::from_larmor_period(
        cfg.get_f64("source", "larmor_period_ps", Some(57.0))? * 1e-12,
        cfg.get_f64("source", "transition_energy_ev", Some(1.3625))?,
        cfg.get_f64("source", "trion_lifetime_ns", Some(0.6))? * 1e-9,
        cfg.get_f64("source", "r0_hz", Some(1e6))?,
    )?;
    let imperfections = SourceImperfections {
        g2_zero: cfg.get_f64("imperfections", "g2_zero", Some(0.0))?,
        detection_window_s: cfg.get_f64("imperfections", "detection_window_ps", Some(0.0))?
            * 1e-12,
        depolarizing_prob: cfg.get_f64("imperfections", "depolarizing_prob", Some(0.0))?,
        init_fidelity: cfg.get_f64("imperfections", "init_fidelity", Some(1.0))?,
    };
    let detectors = detectors_from(cfg)?;

    let mut warnings = Vec::new();
    if source.exceeds_lifetime_limit() {
        warnings.push("source repetition rate exceeds the inverse trion lifetime".into());
    }

    let rho_true = apply_source_imperfections(&ideal_spin_photon_state(), &imperfections, &source)?;
    let true_state_fidelity = rho_true.fidelity_pure_target(&target)?;

    let mut rng = StdRng::seed_from_u64(seed);
    let (direct, mle, bootstrap, counts_csv) = if analytic_mode {
        // Infinite-shot limit: exact correlators stand in for counts, so the
        // direct inversion reproduces the true state exactly.
        let r = exact_correlators(&rho_true)?;
        let direct = direct_reconstruction(&r, Some(&target))?;
        (direct, None, None, None)
    } else {
        let counts = simulate_counts(&rho_true, &settings, shots, &detectors, &mut rng)?;
        let r = repsim_core::tomography::correlators_from_counts(&counts);
        let direct = direct_reconstruction(&r, Some(&target))?;
        let mle = mle_reconstruction(&counts, Some(&target))?;
        let bootstrap = bootstrap_statistics(&counts, &target, n_resamples, workers, &mut rng)?;
        let csv = counts.to_csv();
        (direct, Some(mle), Some(bootstrap), Some(csv))
    };

    let histogram = bootstrap.as_ref().map(|b| build_histogram(&b.fidelities, 20));
    let mut extra_csv = Vec::new();
    if let Some(csv) = counts_csv {
        extra_csv.push(("counts.csv".to_string(), csv));
    }
    if let Some(bins) = &histogram {
        let mut text = String::from("fidelity_low,fidelity_high,count\n");
        for bin in bins {
            text.push_str(&format!("{:.6},{:.6},{}\n", bin.low, bin.high, bin.count));
        }
        extra_csv.push(("hist.csv".to_string(), text));
    }

    let results = TomographyArtifact {
        target: target_name,
        shots_per_setting: shots,
        analytic_mode,
        true_state_fidelity,
        direct,
        mle,
        bootstrap,
        histogram,
    };
    Ok(CommandOutput {
        json: finish("tomo", cfg, warnings, results)?,
        csv: None,
        events_jsonl: None,
        extra_csv,
        unresolved: false,
    })
}

fn parse_settings(cfg: &ExperimentConfig) -> Result<Vec<BasisSetting>> {
    match cfg.get_opt_str("tomography", "settings") {
        None => {
            cfg.get_str("tomography", "settings", Some("standard-9"))?;
            Ok(standard_settings())
        }
        Some(text) if text.trim() == "standard-9" => Ok(standard_settings()),
        Some(text) => {
            let mut settings = Vec::new();
            for part in text.split(',') {
                let part = part.trim();
                if part.is_empty() {
                    continue;
                }
                let Some((a, b)) = part.split_once('-') else {
                    return Err(Error::Config(format!(
                        "tomography.settings entries look like Z-X, got {part:?}"
                    )));
                };
                settings.push(BasisSetting::new(
                    MeasBasis::parse(a).map_err(|e| Error::Config(e.to_string()))?,
                    MeasBasis::parse(b).map_err(|e| Error::Config(e.to_string()))?,
                ));
            }
            if settings.is_empty() {
                return Err(Error::Config("tomography.settings is empty".into()));
            }
            Ok(settings)
        }
    }
}

fn parse_target(cfg: &ExperimentConfig) -> Result<(String, PureState)> {
    let name = cfg.get_str("tomography", "target", Some("ideal-spin-photon"))?;
    let state = match name.as_str() {
        "ideal-spin-photon" => ideal_spin_photon_target(),
        "phi-plus" => bell_state(BellKind::PhiPlus),
        "phi-minus" => bell_state(BellKind::PhiMinus),
        "psi-plus" => bell_state(BellKind::PsiPlus),
        "psi-minus" => bell_state(BellKind::PsiMinus),
        other => {
            return Err(Error::Config(format!(
                "unknown tomography.target {other:?}"
            )))
        }
    };
    Ok((name, state))
}

fn build_histogram(values: &[f64], bins: usize) -> Vec<HistogramBin> {
    if values.is_empty() {
        return Vec::new();
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = ((hi - lo) / bins as f64).max(1e-12);
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|i| HistogramBin {
            low: lo + i as f64 * width,
            high: lo + (i + 1) as f64 * width,
            count: 0,
        })
        .collect();
    for &v in values {
        let idx = (((v - lo) / width) as usize).min(bins - 1);
        out[idx].count += 1;
    }
    out
}

/// Dispatches a parsed configuration to its scenario driver.
pub fn run_scenario(
    cfg: &ExperimentConfig,
    seed_flag: Option<u64>,
    workers: usize,
) -> Result<CommandOutput> {
    let kind = cfg.scenario()?;
    let seed = master_seed(cfg, seed_flag, kind.is_stochastic())?;
    match kind {
        crate::config::ScenarioKind::RateTable => run_rate_table(cfg),
        crate::config::ScenarioKind::TwoLink => run_link_sim(cfg, seed, workers),
        crate::config::ScenarioKind::Chain => run_chain_sim(cfg, seed, workers),
        crate::config::ScenarioKind::Tomography => run_tomography(cfg, seed, workers),
    }
}
