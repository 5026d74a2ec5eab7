//! Capacity evaluators for the four channel classes: the degraded
//! multi-receiver wiretap channel (nested superposition bounds), parallel
//! channels (common-message and sum secrecy capacities), the reversely
//! degraded product channel (six-bound regions, with and without a common
//! message), and the time-shared sum of two such channels.
//!
//! Every evaluator is an inner approximation: it samples auxiliary-chain
//! distributions (seeded Dirichlet restarts), sharpens each restart by
//! coordinate ascent on per-direction support functions, and accumulates the
//! resulting inequality pieces into a convex hull. Identical configurations
//! produce identical results.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ChannelError;
use crate::geometry::{self, GeometryError, LinearInequality, Piece, RateRegion};
use crate::orderings::{check_degraded, check_less_noisy, classify_parallel, OrderingBudget};
use crate::{AuxiliaryChain, BroadcastWiretapChannel, Channel, Distribution, ParallelChannel, Terminal};

/// Grid cross-checks are skipped above this many grid points.
const MAX_GRID_POINTS: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum RegionError {
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Search parameters shared by every evaluator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Auxiliary cardinalities, one per auxiliary variable (nested chain) or
    /// one per sub-channel (product/time-shared). Empty means `|X|` each.
    pub aux_cardinalities: Vec<usize>,
    pub num_restarts: usize,
    pub grid_resolution: usize,
    pub ascent_steps: usize,
    pub seed: u64,
    /// Number of uniform time-sharing weights swept in [0, 1].
    pub alpha_steps: usize,
    /// Explicit time-sharing weights; overrides `alpha_steps` when set.
    pub alpha_values: Option<Vec<f64>>,
    /// Downgrade hypothesis violations to warnings; output is then labeled
    /// formula-only.
    pub force: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            aux_cardinalities: Vec::new(),
            num_restarts: 24,
            grid_resolution: 201,
            ascent_steps: 60,
            seed: 0,
            alpha_steps: 11,
            alpha_values: None,
            force: false,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), RegionError> {
        if self.num_restarts == 0 || self.ascent_steps == 0 || self.alpha_steps == 0 {
            return Err(RegionError::Config(
                "restart, ascent, and alpha counts must be positive".into(),
            ));
        }
        if self.grid_resolution < 2 {
            return Err(RegionError::Config("grid resolution must be at least 2".into()));
        }
        if self.aux_cardinalities.contains(&0) {
            return Err(RegionError::Config("auxiliary cardinalities must be positive".into()));
        }
        if let Some(vals) = &self.alpha_values {
            if vals.iter().any(|a| !(0.0..=1.0).contains(a)) {
                return Err(RegionError::Config("alpha values must lie in [0, 1]".into()));
            }
        }
        Ok(())
    }

    fn ordering_budget(&self) -> OrderingBudget {
        OrderingBudget {
            num_restarts: 60,
            descent_steps: 200,
            num_pairs: 100,
            seed: self.seed,
            ..OrderingBudget::default()
        }
    }

    fn alphas(&self) -> Vec<f64> {
        if let Some(vals) = &self.alpha_values {
            return vals.clone();
        }
        if self.alpha_steps == 1 {
            return vec![0.5];
        }
        (0..self.alpha_steps)
            .map(|i| i as f64 / (self.alpha_steps - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HypothesisStatus {
    Verified,
    /// A pre-check failed but evaluation was forced; the numbers are the
    /// theorem formulas only, not capacities.
    FormulaOnly,
}

/// The auxiliary chains supporting one direction of the accumulated hull.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SupportPoint {
    pub direction: Vec<f64>,
    pub alpha: Option<f64>,
    pub chains: Vec<AuxiliaryChain>,
    /// `max { direction . v : v in piece(chains) }`.
    pub support: f64,
}

/// Frontier samples restricted to one family of coding configurations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurfaceFrontier {
    pub label: String,
    pub samples: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Max minus median of per-restart best sum-rate supports; a convergence
    /// proxy (small means the restarts agree).
    pub restart_spread: f64,
    /// Best value found by the full grid cross-check, when it ran.
    pub grid_value: Option<f64>,
    pub hypothesis: HypothesisStatus,
    pub warnings: Vec<String>,
    pub surfaces: Vec<SurfaceFrontier>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Argmax {
    /// Per-sub-channel input distributions (scalar capacities).
    Inputs(Vec<Vec<f64>>),
    /// Supporting auxiliary chains per hull direction (region capacities).
    Chains(Vec<SupportPoint>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CapacityResult {
    pub value: Option<f64>,
    pub region: Option<RateRegion>,
    pub argmax: Argmax,
    pub diagnostics: Diagnostics,
}

// ---------------------------------------------------------------------------
// Sampling and ascent over simplex-block parameterizations.

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one chain sample, derived from the chain's shape rather than its
/// slot, so equal-shaped chains in different evaluators draw identical
/// samples at the same restart.
fn chain_seed(seed: u64, restart: usize, cards: &[usize]) -> u64 {
    let mut h = splitmix(seed ^ 0xA5A5_5A5A_D00D_F00D);
    h = splitmix(h ^ restart as u64);
    for &c in cards {
        h = splitmix(h ^ c as u64);
    }
    h
}

fn dirichlet(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    use rand::Rng;
    let mut v: Vec<f64> = (0..n)
        .map(|_| -(1.0 - rng.gen::<f64>()).ln().max(1e-12))
        .collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// Simplex blocks for a chain with variable cardinalities `cards`
/// (`[|U_1|, ..., |X|]`): the root distribution followed by every link row.
fn block_shapes(cards: &[usize]) -> Vec<usize> {
    let mut shapes = vec![cards[0]];
    for w in cards.windows(2) {
        shapes.extend(std::iter::repeat_n(w[1], w[0]));
    }
    shapes
}

fn blocks_for(seed: u64, restart: usize, cards: &[usize]) -> Vec<Vec<f64>> {
    let shapes = block_shapes(cards);
    if restart == 0 {
        return shapes.iter().map(|&n| vec![1.0 / n as f64; n]).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(chain_seed(seed, restart, cards));
    shapes.iter().map(|&n| dirichlet(&mut rng, n)).collect()
}

fn chain_from_blocks(cards: &[usize], blocks: &[Vec<f64>]) -> Result<AuxiliaryChain, ChannelError> {
    let root = Distribution::new(blocks[0].clone())?;
    let mut links = Vec::new();
    let mut at = 1;
    for w in cards.windows(2) {
        let rows: Vec<Vec<f64>> = blocks[at..at + w[0]].to_vec();
        links.push(Channel::new(rows)?);
        at += w[0];
    }
    AuxiliaryChain::new(root, links)
}

/// Deterministic coordinate ascent over a list of per-chain simplex blocks:
/// moves mass between pairs of coordinates, keeping improvements, halving
/// the step when a full sweep stalls.
fn ascend(blocks: &mut [Vec<Vec<f64>>], steps: usize, f: &mut impl FnMut(&[Vec<Vec<f64>>]) -> f64) -> f64 {
    let mut best = f(blocks);
    let mut step = 0.25f64;
    for _ in 0..steps {
        let mut improved = false;
        for c in 0..blocks.len() {
            for b in 0..blocks[c].len() {
                let n = blocks[c][b].len();
                if n < 2 {
                    continue;
                }
                for i in 0..n {
                    for j in 0..n {
                        if i == j {
                            continue;
                        }
                        let amt = step.min(blocks[c][b][j]);
                        if amt <= 1e-12 {
                            continue;
                        }
                        blocks[c][b][j] -= amt;
                        blocks[c][b][i] += amt;
                        let v = f(blocks);
                        if v > best + 1e-12 {
                            best = v;
                            improved = true;
                        } else {
                            blocks[c][b][i] -= amt;
                            blocks[c][b][j] += amt;
                        }
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
            if step < 1e-7 {
                break;
            }
        }
    }
    best
}

/// Ascent directions in rate space: unit vectors, pair sums, and all-ones.
fn directions_for(d: usize) -> Vec<Vec<f64>> {
    let mut dirs = Vec::new();
    for i in 0..d {
        let mut w = vec![0.0; d];
        w[i] = 1.0;
        dirs.push(w);
    }
    if d > 2 {
        for i in 0..d {
            for j in i + 1..d {
                let mut w = vec![0.0; d];
                w[i] = 1.0;
                w[j] = 1.0;
                dirs.push(w);
            }
        }
    }
    if d > 1 {
        dirs.push(vec![1.0; d]);
    }
    dirs
}

fn piece_support(piece: &Piece, vars: &[String], w: &[f64]) -> f64 {
    geometry::piece_vertices(piece, vars)
        .iter()
        .map(|v| w.iter().zip(v).map(|(a, b)| a * b).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

struct SearchOutcome {
    region: RateRegion,
    supports: Vec<SupportPoint>,
    spread: f64,
}

/// Piece evaluator at given auxiliary chains and time-sharing weight.
type PieceEval<'a> = &'a mut dyn FnMut(&[AuxiliaryChain], Option<f64>) -> Result<Piece, RegionError>;

/// Shared driver for the region-valued theorems: sample chains per restart,
/// emit the raw piece, then ascend each support direction (per time-sharing
/// weight) and emit the sharpened pieces.
fn search_pieces(
    vars: &[String],
    cfg: &SearchConfig,
    chain_cards: &[Vec<usize>],
    alphas: &[Option<f64>],
    eval: PieceEval,
) -> Result<SearchOutcome, RegionError> {
    let dirs = directions_for(vars.len());
    let ones = vec![1.0; vars.len()];
    let mut region = RateRegion::new(vars.to_vec());
    let mut best: BTreeMap<(usize, usize), SupportPoint> = BTreeMap::new();
    let mut restart_scores = Vec::new();

    for r in 0..cfg.num_restarts {
        let start: Vec<Vec<Vec<f64>>> = chain_cards
            .iter()
            .map(|c| blocks_for(cfg.seed, r, c))
            .collect();
        let mut score = f64::NEG_INFINITY;
        for (ai, &alpha) in alphas.iter().enumerate() {
            let chains = chains_of(chain_cards, &start)?;
            let raw = eval(&chains, alpha)?;
            score = score.max(piece_support(&raw, vars, &ones));
            region.push_piece(raw)?;

            for (di, w) in dirs.iter().enumerate() {
                let mut blocks = start.clone();
                let mut objective = |bl: &[Vec<Vec<f64>>]| -> f64 {
                    match chains_of(chain_cards, bl).map_err(RegionError::from).and_then(|ch| eval(&ch, alpha)) {
                        Ok(p) => piece_support(&p, vars, w),
                        Err(_) => f64::NEG_INFINITY,
                    }
                };
                let support = ascend(&mut blocks, cfg.ascent_steps, &mut objective);
                let chains = chains_of(chain_cards, &blocks)?;
                let piece = eval(&chains, alpha)?;
                score = score.max(piece_support(&piece, vars, &ones));
                region.push_piece(piece)?;
                let entry = best.get(&(di, ai));
                if entry.is_none_or(|e| support > e.support + 1e-12) {
                    best.insert(
                        (di, ai),
                        SupportPoint {
                            direction: w.clone(),
                            alpha,
                            chains,
                            support,
                        },
                    );
                }
            }
        }
        restart_scores.push(score);
    }
    region.hull_accumulate()?;
    Ok(SearchOutcome {
        region,
        supports: best.into_values().collect(),
        spread: spread_of(&restart_scores),
    })
}

fn chains_of(cards: &[Vec<usize>], blocks: &[Vec<Vec<f64>>]) -> Result<Vec<AuxiliaryChain>, ChannelError> {
    cards
        .iter()
        .zip(blocks)
        .map(|(c, b)| chain_from_blocks(c, b))
        .collect()
}

fn spread_of(scores: &[f64]) -> f64 {
    let mut sorted: Vec<f64> = scores.iter().copied().filter(|s| s.is_finite()).collect();
    if sorted.is_empty() {
        return 0.0;
    }
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted[sorted.len() - 1] - sorted[sorted.len() / 2]
}

// ---------------------------------------------------------------------------
// Hypothesis pre-checks.

struct Hypothesis {
    violations: Vec<String>,
}

impl Hypothesis {
    fn new() -> Self {
        Self { violations: Vec::new() }
    }

    fn require(&mut self, ok: bool, msg: impl Into<String>) {
        if !ok {
            self.violations.push(msg.into());
        }
    }

    fn resolve(self, cfg: &SearchConfig) -> Result<(HypothesisStatus, Vec<String>), RegionError> {
        if self.violations.is_empty() {
            Ok((HypothesisStatus::Verified, Vec::new()))
        } else if cfg.force {
            Ok((HypothesisStatus::FormulaOnly, self.violations))
        } else {
            Err(RegionError::HypothesisViolated(self.violations.join("; ")))
        }
    }
}

/// Receivers must be ordered weakest first: `X -> Y_K -> ... -> Y_1`, with
/// receiver index 0 the weakest.
fn check_receiver_chain(bc: &BroadcastWiretapChannel, hyp: &mut Hypothesis) -> Result<(), RegionError> {
    for k in 1..bc.num_receivers() {
        let strong = bc.marginal_channel(Terminal::Receiver(k))?;
        let weak = bc.marginal_channel(Terminal::Receiver(k - 1))?;
        hyp.require(
            check_degraded(&strong, &weak)?.is_degraded(),
            format!("receiver {} is not a degraded version of receiver {}", k - 1, k),
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Bound evaluation through the probability kernel.

/// Right-hand sides of the nested superposition bounds for a degraded
/// receiver chain: one bound per prefix of users, either penalized by the
/// eavesdropper information at the top layer (`conditioned = false`) or
/// conditioned on the eavesdropper throughout (`conditioned = true`).
pub fn nested_chain_bounds(
    bc: &BroadcastWiretapChannel,
    chain: &AuxiliaryChain,
    conditioned: bool,
) -> Result<Vec<f64>, RegionError> {
    let k_users = bc.num_receivers();
    if chain.num_vars() != k_users {
        return Err(RegionError::Config(format!(
            "chain must have {} variables for {} receivers",
            k_users, k_users
        )));
    }
    let joint = chain.joint_with_channel(bc)?;
    let u_axis = |k: usize| k - 1; // users are 1-based here, U_K = X
    let y_axis = |k: usize| k_users + k - 1;
    let z_axis = 2 * k_users;

    let mut bounds = Vec::with_capacity(k_users);
    let mut acc = 0.0;
    for l in 1..=k_users {
        let mut cond: Vec<usize> = if l > 1 { vec![u_axis(l - 1)] } else { vec![] };
        if conditioned {
            cond.push(z_axis);
        }
        acc += joint.conditional_mutual_information(&[u_axis(l)], &[y_axis(l)], &cond)?;
        if conditioned {
            bounds.push(acc);
        } else {
            let leak = joint.conditional_mutual_information(&[u_axis(l)], &[z_axis], &[])?;
            bounds.push(acc - leak);
        }
    }
    Ok(bounds)
}

fn nested_piece(vars: &[String], bounds: &[f64]) -> Result<Piece, GeometryError> {
    bounds
        .iter()
        .enumerate()
        .map(|(l, &b)| {
            let coeffs: BTreeMap<String, f64> = vars[..l + 2].iter().map(|v| (v.clone(), 1.0)).collect();
            LinearInequality::new(coeffs, b)
        })
        .collect()
}

fn rate_vars(k_users: usize) -> Vec<String> {
    (0..=k_users).map(|k| format!("R{k}")).collect()
}

/// Conditional informations of one two-user sub-channel under a `(U, X)`
/// auxiliary pair: each receiver at the auxiliary and input levels, plus the
/// input level conditioned on the auxiliary.
#[derive(Debug, Clone, Copy)]
pub struct TwoUserStats {
    /// I(U; Y_k | Z) for receivers k = 0, 1.
    pub aux: [f64; 2],
    /// I(X; Y_k | Z).
    pub input: [f64; 2],
    /// I(X; Y_k | U, Z).
    pub refined: [f64; 2],
}

pub fn two_user_stats(bc: &BroadcastWiretapChannel, chain: &AuxiliaryChain) -> Result<TwoUserStats, RegionError> {
    if bc.num_receivers() != 2 || chain.num_vars() != 2 {
        return Err(RegionError::Config("two-user statistics need K=2 and a (U, X) chain".into()));
    }
    let joint = chain.joint_with_channel(bc)?;
    // Axes: 0 = U, 1 = X, 2 = Y_0, 3 = Y_1, 4 = Z.
    let mut s = TwoUserStats {
        aux: [0.0; 2],
        input: [0.0; 2],
        refined: [0.0; 2],
    };
    for k in 0..2 {
        let y = 2 + k;
        s.aux[k] = joint.conditional_mutual_information(&[0], &[y], &[4])?;
        s.input[k] = joint.conditional_mutual_information(&[1], &[y], &[4])?;
        s.refined[k] = joint.conditional_mutual_information(&[1], &[y], &[0, 4])?;
    }
    Ok(s)
}

/// Six bounds of the product-channel region, `first[l]` telling whether
/// receiver 0 is the strong user in sub-channel `l`. Order: R0 (twice),
/// R0+R1, R0+R2, R0+R1+R2 (twice).
pub fn product_bounds(
    pc: &ParallelChannel,
    chains: &[AuxiliaryChain],
    first: &[bool],
) -> Result<[f64; 6], RegionError> {
    let m = pc.num_subchannels();
    if chains.len() != m || first.len() != m {
        return Err(RegionError::Config("one chain and one orientation per sub-channel".into()));
    }
    let mut b = [0.0; 6];
    for l in 0..m {
        let s = two_user_stats(&pc.subchannels()[l], &chains[l])?;
        accumulate_product_bounds(&mut b, &s, first[l], 1.0);
    }
    Ok(b)
}

/// Six bounds of the time-shared region: channel 1 (receiver 0 strong)
/// weighted by `alpha`, channel 2 (receiver 1 strong) by `1 - alpha`.
pub fn timeshared_bounds(
    ch1: &BroadcastWiretapChannel,
    ch2: &BroadcastWiretapChannel,
    c1: &AuxiliaryChain,
    c2: &AuxiliaryChain,
    alpha: f64,
) -> Result<[f64; 6], RegionError> {
    let mut b = [0.0; 6];
    accumulate_product_bounds(&mut b, &two_user_stats(ch1, c1)?, true, alpha);
    accumulate_product_bounds(&mut b, &two_user_stats(ch2, c2)?, false, 1.0 - alpha);
    Ok(b)
}

fn accumulate_product_bounds(b: &mut [f64; 6], s: &TwoUserStats, first: bool, weight: f64) {
    b[0] += weight * s.aux[0];
    b[1] += weight * s.aux[1];
    if first {
        // Receiver 0 decodes down to the input level here.
        b[2] += weight * s.input[0];
        b[3] += weight * s.aux[1];
        b[4] += weight * s.input[0];
        b[5] += weight * (s.aux[1] + s.refined[0]);
    } else {
        b[2] += weight * s.aux[0];
        b[3] += weight * s.input[1];
        b[4] += weight * (s.aux[0] + s.refined[1]);
        b[5] += weight * s.input[1];
    }
}

pub fn six_bound_piece(bounds: &[f64; 6]) -> Result<Piece, GeometryError> {
    let rows: [(&[&str], f64); 6] = [
        (&["R0"], bounds[0]),
        (&["R0"], bounds[1]),
        (&["R0", "R1"], bounds[2]),
        (&["R0", "R2"], bounds[3]),
        (&["R0", "R1", "R2"], bounds[4]),
        (&["R0", "R1", "R2"], bounds[5]),
    ];
    rows.iter()
        .map(|(names, b)| {
            LinearInequality::new(names.iter().map(|n| (n.to_string(), 1.0)).collect(), *b)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Theorem evaluators: degraded chains.

fn aux_cards_for_chain(bc: &BroadcastWiretapChannel, cfg: &SearchConfig) -> Result<Vec<usize>, RegionError> {
    let k = bc.num_receivers();
    let aux = if cfg.aux_cardinalities.is_empty() {
        vec![bc.input_size(); k - 1]
    } else if cfg.aux_cardinalities.len() == k - 1 {
        cfg.aux_cardinalities.clone()
    } else {
        return Err(RegionError::Config(format!(
            "expected {} auxiliary cardinalities, got {}",
            k - 1,
            cfg.aux_cardinalities.len()
        )));
    };
    let mut cards = aux;
    cards.push(bc.input_size());
    Ok(cards)
}

fn nested_region(
    bc: &BroadcastWiretapChannel,
    cfg: &SearchConfig,
    conditioned: bool,
    hypothesis: (HypothesisStatus, Vec<String>),
) -> Result<CapacityResult, RegionError> {
    let k = bc.num_receivers();
    let vars = rate_vars(k);
    let cards = aux_cards_for_chain(bc, cfg)?;
    let mut eval = |chains: &[AuxiliaryChain], _alpha: Option<f64>| -> Result<Piece, RegionError> {
        let bounds = nested_chain_bounds(bc, &chains[0], conditioned)?;
        Ok(nested_piece(&vars, &bounds)?)
    };
    let outcome = search_pieces(&vars, cfg, &[cards], &[None], &mut eval)?;
    Ok(CapacityResult {
        value: None,
        region: Some(outcome.region),
        argmax: Argmax::Chains(outcome.supports),
        diagnostics: Diagnostics {
            restart_spread: outcome.spread,
            grid_value: None,
            hypothesis: hypothesis.0,
            warnings: hypothesis.1,
            surfaces: Vec::new(),
        },
    })
}

/// Region of the degraded multi-receiver wiretap channel with a more noisy
/// eavesdropper: nested superposition bounds penalized by the eavesdropper
/// information at the top decoded layer.
pub fn region_theorem1(bc: &BroadcastWiretapChannel, cfg: &SearchConfig) -> Result<CapacityResult, RegionError> {
    cfg.validate()?;
    let mut hyp = Hypothesis::new();
    check_receiver_chain(bc, &mut hyp)?;
    let weakest = bc.marginal_channel(Terminal::Receiver(0))?;
    let eve = bc.marginal_channel(Terminal::Eavesdropper)?;
    hyp.require(
        check_less_noisy(&weakest, &eve, &cfg.ordering_budget())?.is_less_noisy(),
        "weakest receiver is not verifiably less noisy than the eavesdropper",
    );
    let resolved = hyp.resolve(cfg)?;
    nested_region(bc, cfg, false, resolved)
}

/// Region of the fully degraded multi-receiver wiretap channel: the same
/// nested bounds written with eavesdropper-conditioned informations.
pub fn region_corollary1(bc: &BroadcastWiretapChannel, cfg: &SearchConfig) -> Result<CapacityResult, RegionError> {
    cfg.validate()?;
    let mut hyp = Hypothesis::new();
    check_receiver_chain(bc, &mut hyp)?;
    let weakest = bc.marginal_channel(Terminal::Receiver(0))?;
    let eve = bc.marginal_channel(Terminal::Eavesdropper)?;
    hyp.require(
        check_degraded(&weakest, &eve)?.is_degraded(),
        "eavesdropper is not a degraded version of the weakest receiver",
    );
    let resolved = hyp.resolve(cfg)?;
    nested_region(bc, cfg, true, resolved)
}

// ---------------------------------------------------------------------------
// Scalar evaluators: parallel channels.

struct SubchannelMarginals {
    receivers: Vec<Channel>,
    eve: Channel,
}

fn parallel_marginals(pc: &ParallelChannel) -> Result<Vec<SubchannelMarginals>, RegionError> {
    pc.subchannels()
        .iter()
        .map(|sub| {
            let receivers = (0..sub.num_receivers())
                .map(|r| sub.marginal_channel(Terminal::Receiver(r)))
                .collect::<Result<Vec<_>, _>>()?;
            let eve = sub.marginal_channel(Terminal::Eavesdropper)?;
            Ok(SubchannelMarginals { receivers, eve })
        })
        .collect()
}

/// `sum_l [I(X_l;Y_kl) - I(X_l;Z_l)]^+` for one user over given inputs.
fn clipped_user_sum(marginals: &[SubchannelMarginals], k: usize, inputs: &[Distribution]) -> Result<f64, RegionError> {
    let mut total = 0.0;
    for (m, p) in marginals.iter().zip(inputs) {
        let gain = m.receivers[k].mutual_information(p)? - m.eve.mutual_information(p)?;
        total += gain.max(0.0);
    }
    Ok(total)
}

fn simplex_grid_count(n: usize, g: usize) -> usize {
    // C(g - 1 + n - 1, n - 1), saturating.
    let mut c: usize = 1;
    for i in 0..n - 1 {
        c = c.saturating_mul(g - 1 + n - 1 - i);
        c /= i + 1;
    }
    c
}

fn for_each_simplex_grid(n: usize, g: usize, f: &mut impl FnMut(&[f64])) {
    let mut point = vec![0.0; n];
    fn rec(left: usize, i: usize, n: usize, g: usize, point: &mut Vec<f64>, f: &mut impl FnMut(&[f64])) {
        if i == n - 1 {
            point[i] = left as f64 / (g - 1) as f64;
            f(point);
            return;
        }
        for t in 0..=left {
            point[i] = t as f64 / (g - 1) as f64;
            rec(left - t, i + 1, n, g, point, f);
        }
    }
    rec(g - 1, 0, n, g, &mut point, f);
}

fn dists_of(blocks: &[Vec<Vec<f64>>]) -> Result<Vec<Distribution>, ChannelError> {
    blocks.iter().map(|b| Distribution::new(b[0].clone())).collect()
}

/// Common-message secrecy capacity of a parallel channel with a more noisy
/// eavesdropper: `max min_k sum_l [I(X_l;Y_kl) - I(X_l;Z_l)]^+` over product
/// inputs.
pub fn common_message_capacity(pc: &ParallelChannel, cfg: &SearchConfig) -> Result<CapacityResult, RegionError> {
    cfg.validate()?;
    let mut hyp = Hypothesis::new();
    let classification = classify_parallel(pc, &cfg.ordering_budget())?;
    hyp.require(
        classification.fully_resolved(),
        "a user/eavesdropper pair has an undetermined less-noisiness order",
    );
    let (status, warnings) = hyp.resolve(cfg)?;

    let marginals = parallel_marginals(pc)?;
    let k_users = pc.num_receivers();
    let objective = |inputs: &[Distribution]| -> Result<f64, RegionError> {
        let mut worst = f64::INFINITY;
        for k in 0..k_users {
            worst = worst.min(clipped_user_sum(&marginals, k, inputs)?);
        }
        Ok(worst)
    };

    let cards: Vec<Vec<usize>> = pc.subchannels().iter().map(|s| vec![s.input_size()]).collect();
    let (value, inputs, spread) = maximize_over_inputs(cfg, &cards, &|d| objective(d))?;

    // Full product-grid cross-check when affordable.
    let total: usize = cards
        .iter()
        .map(|c| simplex_grid_count(c[0], cfg.grid_resolution))
        .fold(1usize, |a, b| a.saturating_mul(b));
    let mut grid_value = None;
    if total <= MAX_GRID_POINTS {
        let mut best = f64::NEG_INFINITY;
        let sizes: Vec<usize> = cards.iter().map(|c| c[0]).collect();
        grid_product(&sizes, cfg.grid_resolution, &mut |dists| {
            if let Ok(v) = objective(dists) {
                if v > best {
                    best = v;
                }
            }
        });
        grid_value = Some(best);
    }
    let final_value = grid_value.map_or(value, |g| g.max(value));
    Ok(CapacityResult {
        value: Some(final_value),
        region: None,
        argmax: Argmax::Inputs(inputs.iter().map(|d| d.probs().to_vec()).collect()),
        diagnostics: Diagnostics {
            restart_spread: spread,
            grid_value,
            hypothesis: status,
            warnings,
            surfaces: Vec::new(),
        },
    })
}

/// Multi-start coordinate ascent of a scalar objective over a product of
/// input simplices. Returns (best value, best inputs, restart spread).
fn maximize_over_inputs(
    cfg: &SearchConfig,
    cards: &[Vec<usize>],
    objective: &dyn Fn(&[Distribution]) -> Result<f64, RegionError>,
) -> Result<(f64, Vec<Distribution>, f64), RegionError> {
    let mut best = f64::NEG_INFINITY;
    let mut best_inputs: Option<Vec<Distribution>> = None;
    let mut scores = Vec::new();
    for r in 0..cfg.num_restarts {
        let mut blocks: Vec<Vec<Vec<f64>>> = cards.iter().map(|c| blocks_for(cfg.seed, r, c)).collect();
        let mut f = |bl: &[Vec<Vec<f64>>]| -> f64 {
            dists_of(bl)
                .map_err(RegionError::from)
                .and_then(|d| objective(&d))
                .unwrap_or(f64::NEG_INFINITY)
        };
        let v = ascend(&mut blocks, cfg.ascent_steps, &mut f);
        scores.push(v);
        if v > best {
            best = v;
            best_inputs = Some(dists_of(&blocks)?);
        }
    }
    Ok((best, best_inputs.unwrap(), spread_of(&scores)))
}

fn grid_product(sizes: &[usize], g: usize, f: &mut impl FnMut(&[Distribution])) {
    fn rec(sizes: &[usize], g: usize, at: usize, acc: &mut Vec<Distribution>, f: &mut impl FnMut(&[Distribution])) {
        if at == sizes.len() {
            f(acc);
            return;
        }
        for_each_simplex_grid(sizes[at], g, &mut |p| {
            if let Ok(d) = Distribution::new(p.to_vec()) {
                acc.push(d);
                rec(sizes, g, at + 1, acc, f);
                acc.pop();
            }
        });
    }
    rec(sizes, g, 0, &mut Vec::new(), f);
}

/// Sum secrecy capacity of a parallel channel with a per-sub-channel
/// less-noisiness order: each sub-channel serves only its strongest user, and
/// the objective separates across sub-channels.
pub fn sum_secrecy_capacity(pc: &ParallelChannel, cfg: &SearchConfig) -> Result<CapacityResult, RegionError> {
    cfg.validate()?;
    let mut hyp = Hypothesis::new();
    let classification = classify_parallel(pc, &cfg.ordering_budget())?;
    hyp.require(
        classification.totally_ordered(),
        "a sub-channel lacks a total less-noisiness order",
    );
    let (status, warnings) = hyp.resolve(cfg)?;

    let marginals = parallel_marginals(pc)?;
    let mut value = 0.0;
    let mut inputs = Vec::new();
    let mut spread = 0.0;
    let mut grid_total = 0.0;
    let mut grid_all = true;
    for (l, m) in marginals.iter().enumerate() {
        let strongest = classification.per_subchannel[l].strongest_user;
        let per_sub = |d: &[Distribution]| -> Result<f64, RegionError> {
            let gain = m.receivers[strongest].mutual_information(&d[0])? - m.eve.mutual_information(&d[0])?;
            Ok(gain.max(0.0))
        };
        let cards = vec![vec![pc.subchannels()[l].input_size()]];
        let (v, d, s) = maximize_over_inputs(cfg, &cards, &per_sub)?;
        let mut best = v;
        if simplex_grid_count(cards[0][0], cfg.grid_resolution) <= MAX_GRID_POINTS {
            let mut gbest = f64::NEG_INFINITY;
            for_each_simplex_grid(cards[0][0], cfg.grid_resolution, &mut |p| {
                if let Ok(dist) = Distribution::new(p.to_vec()) {
                    if let Ok(v) = per_sub(&[dist]) {
                        gbest = gbest.max(v);
                    }
                }
            });
            grid_total += gbest;
            best = best.max(gbest);
        } else {
            grid_all = false;
        }
        value += best;
        spread += s;
        inputs.push(d[0].probs().to_vec());
    }
    Ok(CapacityResult {
        value: Some(value),
        region: None,
        argmax: Argmax::Inputs(inputs),
        diagnostics: Diagnostics {
            restart_spread: spread,
            grid_value: grid_all.then_some(grid_total),
            hypothesis: status,
            warnings,
            surfaces: Vec::new(),
        },
    })
}

// ---------------------------------------------------------------------------
// Product-channel regions.

fn product_cards(pc: &ParallelChannel, cfg: &SearchConfig) -> Result<Vec<Vec<usize>>, RegionError> {
    let m = pc.num_subchannels();
    let aux = if cfg.aux_cardinalities.is_empty() {
        pc.subchannels().iter().map(|s| s.input_size()).collect()
    } else if cfg.aux_cardinalities.len() == m {
        cfg.aux_cardinalities.clone()
    } else {
        return Err(RegionError::Config(format!(
            "expected {} auxiliary cardinalities, got {}",
            m,
            cfg.aux_cardinalities.len()
        )));
    };
    Ok(pc
        .subchannels()
        .iter()
        .zip(aux)
        .map(|(s, u)| vec![u, s.input_size()])
        .collect())
}

fn check_subchannel_chain(
    sub: &BroadcastWiretapChannel,
    strong: usize,
    label: &str,
    hyp: &mut Hypothesis,
) -> Result<(), RegionError> {
    let weak = 1 - strong;
    let m_strong = sub.marginal_channel(Terminal::Receiver(strong))?;
    let m_weak = sub.marginal_channel(Terminal::Receiver(weak))?;
    let eve = sub.marginal_channel(Terminal::Eavesdropper)?;
    hyp.require(
        check_degraded(&m_strong, &m_weak)?.is_degraded(),
        format!("{label}: receiver {weak} is not a degraded version of receiver {strong}"),
    );
    hyp.require(
        check_degraded(&m_weak, &eve)?.is_degraded(),
        format!("{label}: eavesdropper is not a degraded version of receiver {weak}"),
    );
    Ok(())
}

fn product_region_outcome(
    pc: &ParallelChannel,
    cfg: &SearchConfig,
    first: &[bool],
) -> Result<SearchOutcome, RegionError> {
    let vars = rate_vars(2);
    let cards = product_cards(pc, cfg)?;
    let first = first.to_vec();
    let mut eval = |chains: &[AuxiliaryChain], _alpha: Option<f64>| -> Result<Piece, RegionError> {
        let b = product_bounds(pc, chains, &first)?;
        Ok(six_bound_piece(&b)?)
    };
    search_pieces(&vars, cfg, &cards, &[None], &mut eval)
}

/// Region of the two-sub-channel reversely degraded product channel:
/// receiver 0 strong in sub-channel 0, receiver 1 strong in sub-channel 1.
/// Diagnostics expose the boundary decomposition into the three coding
/// surfaces (no layering in one sub-channel, or layering in both).
pub fn region_theorem4(pc: &ParallelChannel, cfg: &SearchConfig) -> Result<CapacityResult, RegionError> {
    cfg.validate()?;
    if pc.num_subchannels() != 2 || pc.num_receivers() != 2 {
        return Err(RegionError::Config("product region needs exactly 2 users and 2 sub-channels".into()));
    }
    let mut hyp = Hypothesis::new();
    check_subchannel_chain(&pc.subchannels()[0], 0, "sub-channel 0", &mut hyp)?;
    check_subchannel_chain(&pc.subchannels()[1], 1, "sub-channel 1", &mut hyp)?;
    let (status, warnings) = hyp.resolve(cfg)?;

    let first = [true, false];
    let outcome = product_region_outcome(pc, cfg, &first)?;

    // Surface sweeps: collapse the auxiliary in one sub-channel at a time.
    let dirs = directions_for(3);
    let mut surfaces = Vec::new();
    let base_cards = product_cards(pc, cfg)?;
    let surface_cfg = SearchConfig {
        num_restarts: cfg.num_restarts.div_ceil(2),
        ..cfg.clone()
    };
    for (label, collapse) in [("no-layering-sub0", 0usize), ("no-layering-sub1", 1usize)] {
        let mut cards = base_cards.clone();
        cards[collapse][0] = 1;
        let mut eval = |chains: &[AuxiliaryChain], _a: Option<f64>| -> Result<Piece, RegionError> {
            let b = product_bounds(pc, chains, &first)?;
            Ok(six_bound_piece(&b)?)
        };
        let sweep = search_pieces(&rate_vars(2), &surface_cfg, &cards, &[None], &mut eval)?;
        surfaces.push(SurfaceFrontier {
            label: label.into(),
            samples: sweep.region.pareto_frontier(&dirs)?,
        });
    }
    surfaces.push(SurfaceFrontier {
        label: "layering-both".into(),
        samples: outcome.region.pareto_frontier(&dirs)?,
    });

    Ok(CapacityResult {
        value: None,
        region: Some(outcome.region),
        argmax: Argmax::Chains(outcome.supports),
        diagnostics: Diagnostics {
            restart_spread: outcome.spread,
            grid_value: None,
            hypothesis: status,
            warnings,
            surfaces,
        },
    })
}

/// Region of the parallel degraded channel with M sub-channels: the
/// orientation of each sub-channel (which receiver is strong) is derived
/// from the ordering classification.
pub fn region_theorem5(pc: &ParallelChannel, cfg: &SearchConfig) -> Result<CapacityResult, RegionError> {
    cfg.validate()?;
    if pc.num_receivers() != 2 {
        return Err(RegionError::Config("the M-sub-channel region needs exactly 2 users".into()));
    }
    let classification = classify_parallel(pc, &cfg.ordering_budget())?;
    let first: Vec<bool> = classification
        .per_subchannel
        .iter()
        .map(|s| s.strongest_user == 0)
        .collect();
    let mut hyp = Hypothesis::new();
    for (l, sub) in pc.subchannels().iter().enumerate() {
        let strong = usize::from(!first[l]);
        check_subchannel_chain(sub, strong, &format!("sub-channel {l}"), &mut hyp)?;
    }
    let (status, warnings) = hyp.resolve(cfg)?;
    let outcome = product_region_outcome(pc, cfg, &first)?;
    Ok(CapacityResult {
        value: None,
        region: Some(outcome.region),
        argmax: Argmax::Chains(outcome.supports),
        diagnostics: Diagnostics {
            restart_spread: outcome.spread,
            grid_value: None,
            hypothesis: status,
            warnings,
            surfaces: Vec::new(),
        },
    })
}

/// Substituted system used to remove the common rate: writes the six product
/// bounds over `(R1, R2, alpha, beta)` with `R0 = alpha + beta` folded into
/// the private rates.
fn no_common_system(bounds: &[f64; 6]) -> Result<Vec<LinearInequality>, GeometryError> {
    let rows: [(&[(&str, f64)], f64); 10] = [
        (&[("alpha", 1.0), ("beta", 1.0)], bounds[0]),
        (&[("alpha", 1.0), ("beta", 1.0)], bounds[1]),
        (&[("R1", 1.0), ("beta", 1.0)], bounds[2]),
        (&[("R2", 1.0), ("alpha", 1.0)], bounds[3]),
        (&[("R1", 1.0), ("R2", 1.0)], bounds[4]),
        (&[("R1", 1.0), ("R2", 1.0)], bounds[5]),
        (&[("alpha", 1.0), ("R1", -1.0)], 0.0),
        (&[("beta", 1.0), ("R2", -1.0)], 0.0),
        (&[("alpha", -1.0)], 0.0),
        (&[("beta", -1.0)], 0.0),
    ];
    rows.iter().map(|(terms, b)| LinearInequality::from_terms(terms, *b)).collect()
}

/// Rows implied by nonnegativity alone carry no information.
fn drop_orthant_implied(rows: Vec<LinearInequality>) -> Vec<LinearInequality> {
    rows.into_iter()
        .filter(|r| r.coeffs.values().any(|&c| c > 0.0) || r.bound < -1e-9)
        .collect()
}

/// Eliminates the common-rate split variables from one six-bound piece,
/// leaving a private-rate piece over `(R1, R2)`.
pub fn no_common_piece(bounds: &[f64; 6]) -> Result<Piece, GeometryError> {
    let sys = no_common_system(bounds)?;
    let reduced = geometry::eliminate(&geometry::eliminate(&sys, "alpha"), "beta");
    Ok(drop_orthant_implied(reduced))
}

/// Same elimination with the six right-hand sides kept as symbolic slack
/// variables (coefficient -1, never eliminated): the surviving coefficient
/// sets are the closed-form private-rate bounds.
pub fn no_common_symbolic_elimination() -> Vec<LinearInequality> {
    let mut sys = Vec::new();
    let symbolic: [(&[(&str, f64)], &str); 6] = [
        (&[("alpha", 1.0), ("beta", 1.0)], "b1"),
        (&[("alpha", 1.0), ("beta", 1.0)], "b2"),
        (&[("R1", 1.0), ("beta", 1.0)], "b3"),
        (&[("R2", 1.0), ("alpha", 1.0)], "b4"),
        (&[("R1", 1.0), ("R2", 1.0)], "b5"),
        (&[("R1", 1.0), ("R2", 1.0)], "b6"),
    ];
    for (terms, b) in symbolic {
        let mut all = terms.to_vec();
        all.push((b, -1.0));
        sys.push(LinearInequality::from_terms(&all, 0.0).unwrap());
    }
    sys.push(LinearInequality::from_terms(&[("alpha", 1.0), ("R1", -1.0)], 0.0).unwrap());
    sys.push(LinearInequality::from_terms(&[("beta", 1.0), ("R2", -1.0)], 0.0).unwrap());
    sys.push(LinearInequality::from_terms(&[("alpha", -1.0)], 0.0).unwrap());
    sys.push(LinearInequality::from_terms(&[("beta", -1.0)], 0.0).unwrap());
    let reduced = geometry::eliminate(&geometry::eliminate(&sys, "alpha"), "beta");
    drop_orthant_implied(reduced)
}

/// Private-rate region of the product channel with no common message,
/// obtained by eliminating the common-rate split from every piece.
pub fn region_no_common(pc: &ParallelChannel, cfg: &SearchConfig) -> Result<CapacityResult, RegionError> {
    cfg.validate()?;
    if pc.num_subchannels() != 2 || pc.num_receivers() != 2 {
        return Err(RegionError::Config("product region needs exactly 2 users and 2 sub-channels".into()));
    }
    let mut hyp = Hypothesis::new();
    check_subchannel_chain(&pc.subchannels()[0], 0, "sub-channel 0", &mut hyp)?;
    check_subchannel_chain(&pc.subchannels()[1], 1, "sub-channel 1", &mut hyp)?;
    let (status, warnings) = hyp.resolve(cfg)?;

    let vars = vec!["R1".to_string(), "R2".to_string()];
    let cards = product_cards(pc, cfg)?;
    let first = [true, false];
    let mut eval = |chains: &[AuxiliaryChain], _a: Option<f64>| -> Result<Piece, RegionError> {
        let b = product_bounds(pc, chains, &first)?;
        Ok(no_common_piece(&b)?)
    };
    let outcome = search_pieces(&vars, cfg, &cards, &[None], &mut eval)?;
    Ok(CapacityResult {
        value: None,
        region: Some(outcome.region),
        argmax: Argmax::Chains(outcome.supports),
        diagnostics: Diagnostics {
            restart_spread: outcome.spread,
            grid_value: None,
            hypothesis: status,
            warnings,
            surfaces: Vec::new(),
        },
    })
}

/// Region of the switched sum of two degraded channels: the product bounds
/// weighted by the time share `alpha` spent on channel 1, swept over a grid
/// of weights.
pub fn region_theorem6(
    ch1: &BroadcastWiretapChannel,
    ch2: &BroadcastWiretapChannel,
    cfg: &SearchConfig,
) -> Result<CapacityResult, RegionError> {
    cfg.validate()?;
    if ch1.num_receivers() != 2 || ch2.num_receivers() != 2 {
        return Err(RegionError::Config("the switched-sum region needs exactly 2 users".into()));
    }
    let mut hyp = Hypothesis::new();
    check_subchannel_chain(ch1, 0, "channel 1", &mut hyp)?;
    check_subchannel_chain(ch2, 1, "channel 2", &mut hyp)?;
    let (status, warnings) = hyp.resolve(cfg)?;

    let vars = rate_vars(2);
    let mut cards = Vec::new();
    for (i, ch) in [ch1, ch2].into_iter().enumerate() {
        let u = if cfg.aux_cardinalities.is_empty() {
            ch.input_size()
        } else if cfg.aux_cardinalities.len() == 2 {
            cfg.aux_cardinalities[i]
        } else {
            return Err(RegionError::Config("expected 2 auxiliary cardinalities".into()));
        };
        cards.push(vec![u, ch.input_size()]);
    }
    let alphas: Vec<Option<f64>> = cfg.alphas().into_iter().map(Some).collect();
    let mut eval = |chains: &[AuxiliaryChain], alpha: Option<f64>| -> Result<Piece, RegionError> {
        let b = timeshared_bounds(ch1, ch2, &chains[0], &chains[1], alpha.unwrap())?;
        Ok(six_bound_piece(&b)?)
    };
    let outcome = search_pieces(&vars, cfg, &cards, &alphas, &mut eval)?;
    Ok(CapacityResult {
        value: None,
        region: Some(outcome.region),
        argmax: Argmax::Chains(outcome.supports),
        diagnostics: Diagnostics {
            restart_spread: outcome.spread,
            grid_value: None,
            hypothesis: status,
            warnings,
            surfaces: Vec::new(),
        },
    })
}
