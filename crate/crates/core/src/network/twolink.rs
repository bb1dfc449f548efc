//! Event-driven simulation of the two-link repeater protocol: both links
//! attempt every round, each stops on success, the repeater swaps once both
//! hold a pair, and everything resets after delivery.

use rand::Rng;
use serde::Serialize;

use super::swap::{correction_frame, entanglement_swap, swap_branches, apply_pauli_frame};
use super::decay_memory;
use crate::state::{bell_state, BellKind, DensityOperator};
use crate::{Error, Result};

/// Configuration of the three-node (A — repeater — B) experiment.
#[derive(Debug, Clone)]
pub struct TwoLinkConfig {
    /// Per-attempt success probability of each link.
    pub link_success_prob: [f64; 2],
    /// Attempt period T_rep = 1/R₀ (s); both links share the clock.
    pub attempt_period_s: f64,
    /// One-way classical delay from each link's midpoint station to its
    /// nodes (s); charged before a pair can be used or the protocol reset.
    pub classical_delay_s: [f64; 2],
    /// Memory T₂ of node A, the repeater, and node B (s).
    pub node_t2_s: [f64; 3],
    /// Gate noise of the repeater's Bell measurement: the swapped pair is
    /// depolarized with this probability.
    pub swap_depolarizing_prob: f64,
    /// Time charged for the swap operation (s).
    pub local_op_time_s: f64,
    /// Bell state a successful link holds (Ψ⁻ for the double-click herald).
    pub link_pair_kind: BellKind,
    /// Disable storage: deliver only when both links fire in the same round.
    pub memoryless: bool,
    /// Round budget; the simulation stops after consuming this many rounds.
    pub max_rounds: u64,
    pub record_events: bool,
}

impl Default for TwoLinkConfig {
    fn default() -> Self {
        Self {
            link_success_prob: [0.02, 0.02],
            attempt_period_s: 1e-6,
            classical_delay_s: [0.0, 0.0],
            node_t2_s: [f64::INFINITY; 3],
            swap_depolarizing_prob: 0.0,
            local_op_time_s: 0.0,
            link_pair_kind: BellKind::PsiMinus,
            memoryless: false,
            max_rounds: 1_000_000,
            record_events: false,
        }
    }
}

impl TwoLinkConfig {
    pub fn validate(&self) -> Result<()> {
        for p in self.link_success_prob {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "link success probability {p} outside (0,1]"
                )));
            }
        }
        if self.attempt_period_s <= 0.0 {
            return Err(Error::InvalidArgument("attempt period must be > 0".into()));
        }
        for d in self.classical_delay_s {
            if d < 0.0 {
                return Err(Error::InvalidArgument("classical delay must be ≥ 0".into()));
            }
        }
        for t2 in self.node_t2_s {
            if t2 <= 0.0 {
                return Err(Error::InvalidArgument("T2 must be > 0".into()));
            }
        }
        if !(0.0..=1.0).contains(&self.swap_depolarizing_prob) {
            return Err(Error::InvalidArgument(
                "swap depolarizing probability outside [0,1]".into(),
            ));
        }
        if self.local_op_time_s < 0.0 {
            return Err(Error::InvalidArgument("op time must be ≥ 0".into()));
        }
        if self.max_rounds == 0 {
            return Err(Error::InvalidArgument("max_rounds must be > 0".into()));
        }
        Ok(())
    }
}

/// Timeline entry of the event log.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SimEvent {
    CycleStart { t_s: f64 },
    LinkSuccess { link: usize, t_s: f64 },
    MemoryDecay { link: usize, from_s: f64, to_s: f64 },
    Swap { t_s: f64, outcome: BellKind },
    Delivery { t_s: f64, fidelity: f64 },
}

impl SimEvent {
    fn timestamp(&self) -> f64 {
        match self {
            SimEvent::CycleStart { t_s }
            | SimEvent::LinkSuccess { t_s, .. }
            | SimEvent::Swap { t_s, .. }
            | SimEvent::Delivery { t_s, .. } => *t_s,
            SimEvent::MemoryDecay { to_s, .. } => *to_s,
        }
    }
}

/// Aggregate statistics of one simulation run.
#[derive(Debug, Clone, Serialize)]
pub struct TwoLinkStats {
    pub deliveries: u64,
    pub total_rounds: u64,
    pub total_time_s: f64,
    pub rate_hz: f64,
    pub mean_fidelity: Option<f64>,
    pub min_fidelity: Option<f64>,
    /// Wall-clock duration of a delivery cycle (s).
    pub mean_cycle_s: Option<f64>,
    pub max_cycle_s: Option<f64>,
    /// False when the run produced no deliveries within the round budget.
    pub resolved: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub events: Option<Vec<SimEvent>>,
}

/// Checks the event log: timestamps are non-decreasing and every decay entry
/// covers exactly the interval from that link's success to the swap that
/// consumed it.
pub fn audit_event_log(events: &[SimEvent]) -> Result<()> {
    let mut last_t = f64::NEG_INFINITY;
    let mut pending: [Option<f64>; 2] = [None, None];
    let mut decayed: [Option<(f64, f64)>; 2] = [None, None];
    for event in events {
        let t = event.timestamp();
        if t < last_t - 1e-12 {
            return Err(Error::InvalidState(format!(
                "timestamps regressed: {t} after {last_t}"
            )));
        }
        last_t = t;
        match event {
            SimEvent::CycleStart { .. } => {
                pending = [None, None];
                decayed = [None, None];
            }
            SimEvent::LinkSuccess { link, t_s } => {
                if pending[*link].is_some() {
                    return Err(Error::InvalidState(format!(
                        "link {link} succeeded twice in one cycle"
                    )));
                }
                pending[*link] = Some(*t_s);
            }
            SimEvent::MemoryDecay { link, from_s, to_s } => {
                let established = pending[*link].ok_or_else(|| {
                    Error::InvalidState(format!("decay on link {link} with no pair"))
                })?;
                if (from_s - established).abs() > 1e-12 {
                    return Err(Error::InvalidState(format!(
                        "decay interval starts at {from_s}, pair established at {established}"
                    )));
                }
                decayed[*link] = Some((*from_s, *to_s));
            }
            SimEvent::Swap { t_s, .. } => {
                for link in 0..2 {
                    if pending[link].is_none() {
                        return Err(Error::InvalidState(format!(
                            "swap at {t_s} with link {link} empty"
                        )));
                    }
                    if let Some((_, to_s)) = decayed[link] {
                        if (to_s - t_s).abs() > 1e-12 {
                            return Err(Error::InvalidState(format!(
                                "link {link} decay ends at {to_s}, swap at {t_s}"
                            )));
                        }
                    }
                }
            }
            SimEvent::Delivery { .. } => {}
        }
    }
    Ok(())
}

/// Runs the two-link protocol for `cfg.max_rounds` attempt rounds.
pub fn simulate_two_link_protocol<R: Rng + ?Sized>(
    cfg: &TwoLinkConfig,
    rng: &mut R,
) -> Result<TwoLinkStats> {
    cfg.validate()?;
    if cfg.memoryless {
        simulate_memoryless(cfg, rng)
    } else {
        simulate_with_memory(cfg, rng)
    }
}

/// Rounds until the first success of a Bernoulli(p) sequence (support ≥ 1).
fn sample_geometric<R: Rng + ?Sized>(p: f64, rng: &mut R) -> u64 {
    if p >= 1.0 {
        return 1;
    }
    let u: f64 = rng.random();
    // u ∈ [0,1) keeps the log argument in (0,1].
    1 + ((1.0 - u).ln() / (1.0 - p).ln()).floor() as u64
}

fn simulate_with_memory<R: Rng + ?Sized>(
    cfg: &TwoLinkConfig,
    rng: &mut R,
) -> Result<TwoLinkStats> {
    let t_rep = cfg.attempt_period_s;
    let pair = DensityOperator::from_pure(&bell_state(cfg.link_pair_kind));
    let target = bell_state(BellKind::PhiPlus);
    let no_decay = cfg.node_t2_s.iter().all(|t2| t2.is_infinite());

    let mut events = cfg.record_events.then(Vec::new);
    let mut start_round: u64 = 0;
    let mut deliveries = 0u64;
    let mut fid_sum = 0.0;
    let mut fid_min = f64::INFINITY;
    let mut cycle_sum = 0.0;
    let mut cycle_max: f64 = 0.0;

    while start_round < cfg.max_rounds {
        let cycle_start_t = start_round as f64 * t_rep;
        if let Some(log) = events.as_mut() {
            log.push(SimEvent::CycleStart { t_s: cycle_start_t });
        }
        let g_a = sample_geometric(cfg.link_success_prob[0], rng);
        let g_b = sample_geometric(cfg.link_success_prob[1], rng);
        let t_a = (start_round + g_a) as f64 * t_rep;
        let t_b = (start_round + g_b) as f64 * t_rep;
        // The swap happens once both heralds reached the repeater.
        let t_swap = (t_a + cfg.classical_delay_s[0])
            .max(t_b + cfg.classical_delay_s[1])
            + cfg.local_op_time_s;

        if let Some(log) = events.as_mut() {
            let (first, second) = if t_a <= t_b { (0, 1) } else { (1, 0) };
            for link in [first, second] {
                log.push(SimEvent::LinkSuccess {
                    link,
                    t_s: if link == 0 { t_a } else { t_b },
                });
            }
        }

        // Each stored pair dephases from its creation until the swap; the
        // end-node qubit is on qubit 1, the repeater qubit on qubit 0.
        let mut rho_a = pair.clone();
        let mut rho_b = pair.clone();
        if !no_decay {
            rho_a = decay_memory(&rho_a, 1, t_swap - t_a, cfg.node_t2_s[0])?;
            rho_a = decay_memory(&rho_a, 0, t_swap - t_a, cfg.node_t2_s[1])?;
            rho_b = decay_memory(&rho_b, 1, t_swap - t_b, cfg.node_t2_s[1])?;
            rho_b = decay_memory(&rho_b, 0, t_swap - t_b, cfg.node_t2_s[2])?;
        }
        if let Some(log) = events.as_mut() {
            log.push(SimEvent::MemoryDecay {
                link: if t_a <= t_b { 0 } else { 1 },
                from_s: t_a.min(t_b),
                to_s: t_swap,
            });
            log.push(SimEvent::MemoryDecay {
                link: if t_a <= t_b { 1 } else { 0 },
                from_s: t_a.max(t_b),
                to_s: t_swap,
            });
        }

        let swap = entanglement_swap(&rho_a, &rho_b, rng)?;
        let mut aligned = swap.aligned_state(cfg.link_pair_kind, cfg.link_pair_kind);
        if cfg.swap_depolarizing_prob > 0.0 {
            aligned = aligned.depolarize(cfg.swap_depolarizing_prob)?;
        }
        let fidelity = aligned.fidelity_pure_target(&target)?;
        if let Some(log) = events.as_mut() {
            log.push(SimEvent::Swap {
                t_s: t_swap,
                outcome: swap.outcome,
            });
            log.push(SimEvent::Delivery {
                t_s: t_swap,
                fidelity,
            });
        }

        deliveries += 1;
        fid_sum += fidelity;
        fid_min = fid_min.min(fidelity);
        let cycle_s = t_swap - cycle_start_t;
        cycle_sum += cycle_s;
        cycle_max = cycle_max.max(cycle_s);

        // Resume attempting on the shared clock after the swap completes.
        let rounds_used = g_a.max(g_b);
        let next_by_time = (t_swap / t_rep).ceil() as u64;
        start_round = (start_round + rounds_used).max(next_by_time);
    }

    let total_rounds = start_round;
    let total_time_s = total_rounds as f64 * t_rep;
    Ok(TwoLinkStats {
        deliveries,
        total_rounds,
        total_time_s,
        rate_hz: deliveries as f64 / total_time_s,
        mean_fidelity: (deliveries > 0).then(|| fid_sum / deliveries as f64),
        min_fidelity: (deliveries > 0).then_some(fid_min),
        mean_cycle_s: (deliveries > 0).then(|| cycle_sum / deliveries as f64),
        max_cycle_s: (deliveries > 0).then_some(cycle_max),
        resolved: deliveries > 0,
        events,
    })
}

fn simulate_memoryless<R: Rng + ?Sized>(
    cfg: &TwoLinkConfig,
    rng: &mut R,
) -> Result<TwoLinkStats> {
    let pair = DensityOperator::from_pure(&bell_state(cfg.link_pair_kind));
    let target = bell_state(BellKind::PhiPlus);
    // Fresh pairs every delivery: precompute the aligned fidelity per swap
    // outcome and sample outcomes from the branch probabilities.
    let branches = swap_branches(&pair, &pair)?;
    let table: Vec<(f64, f64)> = branches
        .into_iter()
        .filter_map(|b| {
            let state = b.state?;
            let (x, z) = correction_frame(cfg.link_pair_kind, cfg.link_pair_kind, b.outcome);
            let mut aligned = apply_pauli_frame(&state, x, z);
            if cfg.swap_depolarizing_prob > 0.0 {
                aligned = aligned.depolarize(cfg.swap_depolarizing_prob).ok()?;
            }
            let f = aligned.fidelity_pure_target(&target).ok()?;
            Some((b.prob, f))
        })
        .collect();

    let mut deliveries = 0u64;
    let mut fid_sum = 0.0;
    let mut fid_min = f64::INFINITY;
    for _ in 0..cfg.max_rounds {
        let a = rng.random::<f64>() < cfg.link_success_prob[0];
        let b = rng.random::<f64>() < cfg.link_success_prob[1];
        if a && b {
            deliveries += 1;
            let mut u = rng.random::<f64>();
            let mut fidelity = table.last().map(|(_, f)| *f).unwrap_or(0.0);
            for (prob, f) in &table {
                if u < *prob {
                    fidelity = *f;
                    break;
                }
                u -= prob;
            }
            fid_sum += fidelity;
            fid_min = fid_min.min(fidelity);
        }
    }
    let total_time_s = cfg.max_rounds as f64 * cfg.attempt_period_s;
    Ok(TwoLinkStats {
        deliveries,
        total_rounds: cfg.max_rounds,
        total_time_s,
        rate_hz: deliveries as f64 / total_time_s,
        mean_fidelity: (deliveries > 0).then(|| fid_sum / deliveries as f64),
        min_fidelity: (deliveries > 0).then_some(fid_min),
        mean_cycle_s: None,
        max_cycle_s: None,
        resolved: deliveries > 0,
        events: None,
    })
}
