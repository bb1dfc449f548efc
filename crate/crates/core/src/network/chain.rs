//! Monte Carlo simulation of an N-node chain: heralded links stop on
//! success and the chain collapses through a swap cascade, or unheralded
//! links must all fire within one round.

use rand::Rng;
use serde::Serialize;

use super::swap::{apply_pauli_frame, correction_frame, entanglement_swap};
use super::{decay_memory, ChainConfig, ChainProtocol, UnheraldedMixture};
use crate::state::{bell_state, BellKind, DensityOperator};
use crate::Result;

/// Aggregate statistics over many chain completions.
#[derive(Debug, Clone, Serialize)]
pub struct ChainStats {
    pub completions: u64,
    pub total_rounds: u64,
    pub rate_hz: f64,
    pub mean_completion_rounds: f64,
    pub min_completion_rounds: u64,
    pub max_completion_rounds: u64,
    pub mean_fidelity: Option<f64>,
    /// Per-round full-chain success weight q in unheralded mode.
    pub unheralded_success_weight: Option<f64>,
    /// Fidelity of the mixed state an unheralded protocol hands out:
    /// q·F(target) + (1−q)·F(residual).
    pub unheralded_effective_fidelity: Option<f64>,
    /// False when no completion fit in the round budget, or the unheralded
    /// success weight is below 1/max_rounds.
    pub resolved: bool,
}

/// Runs the chain protocol until `max_rounds` rounds are consumed.
pub fn simulate_chain<R: Rng + ?Sized>(
    cfg: &ChainConfig,
    rng: &mut R,
    max_rounds: u64,
) -> Result<ChainStats> {
    cfg.validate()?;
    let stop_on_success = cfg.heralded && cfg.protocol == ChainProtocol::StopOnSuccess;
    let probs: Vec<f64> = cfg
        .links
        .iter()
        .map(|l| l.success_prob())
        .collect::<Result<_>>()?;
    let t_rep = cfg.links[0].timing.period_s();

    let mut completions = 0u64;
    let mut total_rounds = 0u64;
    let mut rounds_min = u64::MAX;
    let mut rounds_max = 0u64;
    let mut fid_sum = 0.0;
    let mut tracked = 0u64;

    let q_all: f64 = probs.iter().product();

    while total_rounds < max_rounds {
        let (rounds, successes) = if stop_on_success {
            let gs: Vec<u64> = probs.iter().map(|&p| sample_geometric(p, rng)).collect();
            let max_g = *gs.iter().max().expect("at least one link");
            (max_g, gs)
        } else {
            // All links must fire together; the wait is geometric in the
            // product probability.
            let rounds = sample_geometric(q_all, rng);
            (rounds, vec![rounds; probs.len()])
        };

        completions += 1;
        total_rounds += rounds;
        rounds_min = rounds_min.min(rounds);
        rounds_max = rounds_max.max(rounds);

        if cfg.track_states {
            let fidelity = cascade_fidelity(cfg, &successes, rounds, t_rep, rng)?;
            fid_sum += fidelity;
            tracked += 1;
        }
    }

    let resolved = completions > 0 && (stop_on_success || q_all >= 1.0 / max_rounds as f64);
    let total_time = total_rounds as f64 * t_rep;

    let (unheralded_success_weight, unheralded_effective_fidelity) = if stop_on_success {
        (None, None)
    } else {
        let target = DensityOperator::from_pure(&bell_state(BellKind::PhiPlus));
        let mixture = UnheraldedMixture::new(
            q_all,
            target,
            vec![(1.0 - q_all, DensityOperator::maximally_mixed(2))],
        )?;
        let f = mixture
            .effective_state()?
            .fidelity_pure_target(&bell_state(BellKind::PhiPlus))?;
        (Some(q_all), Some(f))
    };

    Ok(ChainStats {
        completions,
        total_rounds,
        rate_hz: completions as f64 / total_time,
        mean_completion_rounds: total_rounds as f64 / completions as f64,
        min_completion_rounds: rounds_min,
        max_completion_rounds: rounds_max,
        mean_fidelity: (tracked > 0).then(|| fid_sum / tracked as f64),
        unheralded_success_weight,
        unheralded_effective_fidelity,
        resolved,
    })
}

/// Collapses the chain through successive swaps at the interior nodes and
/// returns the end-to-end fidelity after frame alignment.
fn cascade_fidelity<R: Rng + ?Sized>(
    cfg: &ChainConfig,
    success_rounds: &[u64],
    completion_round: u64,
    t_rep: f64,
    rng: &mut R,
) -> Result<f64> {
    let target = bell_state(BellKind::PhiPlus);
    let mut states = Vec::with_capacity(cfg.links.len());
    for (idx, &g) in success_rounds.iter().enumerate() {
        let mut rho = cfg.link_pair_state.clone();
        let wait_s = (completion_round - g) as f64 * t_rep;
        if wait_s > 0.0 {
            // Link idx spans nodes idx (qubit 1) and idx+1 (qubit 0).
            rho = decay_memory(&rho, 1, wait_s, cfg.nodes[idx].memory_t2_s)?;
            rho = decay_memory(&rho, 0, wait_s, cfg.nodes[idx + 1].memory_t2_s)?;
        }
        states.push(rho);
    }

    let mut iter = states.into_iter();
    let mut current = iter.next().expect("at least one link");
    let mut current_kind = cfg.link_pair_kind;
    for (fold, next) in iter.enumerate() {
        let swap = entanglement_swap(&current, &next, rng)?;
        let (x, z) = correction_frame(current_kind, cfg.link_pair_kind, swap.outcome);
        current = apply_pauli_frame(&swap.state, x, z);
        // After alignment the running pair is Φ⁺-referenced.
        current_kind = BellKind::PhiPlus;
        // Gate noise of the node that performed this Bell measurement.
        let gate_noise = cfg.nodes[fold + 1].swap_depolarizing_prob;
        if gate_noise > 0.0 {
            current = current.depolarize(gate_noise)?;
        }
    }
    current.fidelity_pure_target(&target)
}

fn sample_geometric<R: Rng + ?Sized>(p: f64, rng: &mut R) -> u64 {
    if p >= 1.0 {
        return 1;
    }
    let u: f64 = rng.random();
    1 + ((1.0 - u).ln() / (1.0 - p).ln()).floor() as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{LinkSpec, NodeSpec, SourceTiming};
    use crate::optics::{DetectorModel, FiberChannel};
    use rand::{rngs::StdRng, SeedableRng};

    fn uniform_chain(n_nodes: usize, p: f64, heralded: bool) -> ChainConfig {
        let link = LinkSpec {
            channel: FiberChannel::new(0.0, 0.17, 1.468).unwrap(),
            timing: SourceTiming::RateHz(1e6),
            p_success: Some(p),
            detectors: DetectorModel::default(),
        };
        ChainConfig {
            nodes: vec![NodeSpec::perfect(); n_nodes],
            links: vec![link; n_nodes - 1],
            heralded,
            protocol: if heralded {
                ChainProtocol::StopOnSuccess
            } else {
                ChainProtocol::ResetOnFullChain
            },
            link_pair_state: DensityOperator::from_pure(&bell_state(BellKind::PsiMinus)),
            link_pair_kind: BellKind::PsiMinus,
            track_states: true,
        }
    }

    /// E[max of k Geometric(p)] by direct summation of the tail CDF.
    fn expected_max_geometric(k: usize, p: f64) -> f64 {
        let q: f64 = 1.0 - p;
        let mut expect = 0.0;
        let mut i = 0u32;
        loop {
            let tail = 1.0 - (1.0 - q.powi(i as i32)).powi(k as i32);
            expect += tail;
            if tail < 1e-12 {
                break;
            }
            i += 1;
        }
        expect
    }

    #[test]
    fn heralded_completion_rounds_match_max_geometric_oracle() {
        for &n in &[3usize, 5, 9] {
            let cfg = uniform_chain(n, 0.1, true);
            let mut rng = StdRng::seed_from_u64(n as u64);
            let stats = simulate_chain(&cfg, &mut rng, 400_000).unwrap();
            let expect = expected_max_geometric(n - 1, 0.1);
            let got = stats.mean_completion_rounds;
            assert!(
                (got / expect - 1.0).abs() < 0.03,
                "N={n}: mean rounds {got} vs {expect}"
            );
            // Perfect components: end-to-end pairs are exactly Bell.
            assert!((stats.mean_fidelity.unwrap() - 1.0).abs() < 1e-9);
            assert!(stats.resolved);
        }
    }

    #[test]
    fn unheralded_completion_matches_product_law() {
        let cfg = uniform_chain(4, 0.5, false);
        let mut rng = StdRng::seed_from_u64(12);
        let stats = simulate_chain(&cfg, &mut rng, 400_000).unwrap();
        // Completion probability per round is p³ = 0.125.
        let per_round = stats.completions as f64 / stats.total_rounds as f64;
        let sigma = (0.125 * 0.875 / stats.total_rounds as f64).sqrt();
        assert!(
            (per_round - 0.125).abs() < 4.0 * sigma,
            "per-round {per_round}"
        );
        assert_eq!(stats.unheralded_success_weight, Some(0.125));
        let eff = stats.unheralded_effective_fidelity.unwrap();
        assert!((eff - (0.125 + 0.875 * 0.25)).abs() < 1e-9);
    }

    #[test]
    fn two_nodes_collapse_to_single_link_rate() {
        let p = 0.3;
        let heralded = uniform_chain(2, p, true);
        let unheralded = uniform_chain(2, p, false);
        let mut r1 = StdRng::seed_from_u64(9);
        let mut r2 = StdRng::seed_from_u64(9);
        let s1 = simulate_chain(&heralded, &mut r1, 100_000).unwrap();
        let s2 = simulate_chain(&unheralded, &mut r2, 100_000).unwrap();
        // A single link needs 1/p rounds per pair in both modes; same seed
        // draws the same geometrics.
        assert_eq!(s1.completions, s2.completions);
        assert!((s1.mean_completion_rounds - 1.0 / p).abs() / (1.0 / p) < 0.02);
    }

    #[test]
    fn unresolved_when_product_probability_is_hopeless() {
        let cfg = uniform_chain(12, 0.05, false);
        let mut rng = StdRng::seed_from_u64(2);
        // q = 0.05^11 ≈ 5e-15; a tiny budget cannot resolve it.
        let stats = simulate_chain(&cfg, &mut rng, 10_000);
        // The first completion wait exceeds any budget; the run still ends
        // (geometric sampling jumps straight to the completion round), but
        // must be flagged unresolved.
        let stats = stats.unwrap();
        assert!(!stats.resolved);
    }

    #[test]
    fn decaying_memories_reduce_chain_fidelity() {
        let mut cfg = uniform_chain(5, 0.2, true);
        for node in &mut cfg.nodes {
            node.memory_t2_s = 20e-6; // ~20 rounds at 1 MHz
        }
        let mut rng = StdRng::seed_from_u64(33);
        let stats = simulate_chain(&cfg, &mut rng, 100_000).unwrap();
        let f = stats.mean_fidelity.unwrap();
        assert!(f < 1.0 - 1e-3, "decay must bite: {f}");
        assert!(f > 0.25, "but not below the floor: {f}");
    }

    #[test]
    fn identical_seeds_reproduce_chain_statistics() {
        let cfg = uniform_chain(5, 0.1, true);
        let run = |seed| {
            let mut rng = StdRng::seed_from_u64(seed);
            let s = simulate_chain(&cfg, &mut rng, 50_000).unwrap();
            (s.completions, s.total_rounds, s.mean_fidelity.map(f64::to_bits))
        };
        assert_eq!(run(11), run(11));
    }
}
