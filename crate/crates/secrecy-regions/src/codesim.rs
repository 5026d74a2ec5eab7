//! Desk-scale simulation of layered wiretap codes: random superposition
//! codebooks with stochastic (confusion-index) encoding, frequency-typicality
//! decoding, Monte-Carlo error estimation, and exact equivocation by full
//! enumeration at tiny block lengths.
//!
//! One engine covers three schemes: plain superposition on a single channel,
//! a rate-split pair of parallel sub-channels, and a time-shared pair of
//! segments. A codebook is a list of segments; each segment carries its own
//! channel, auxiliary chain, symbol range, and layered codeword arrays.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ChannelError;
use crate::scalar::plog2p;
use crate::{AuxiliaryChain, BroadcastWiretapChannel, Distribution, JointDistribution, ParallelChannel, Terminal};

/// Total codeword cells a codebook may materialize.
pub const CODEBOOK_CELL_CAP: usize = 50_000_000;
/// Cells (message x confusion x z-sequence) the exact equivocation
/// enumeration may touch.
pub const EQUIVOCATION_CELL_CAP: u128 = 100_000_000;

#[derive(Debug, Error)]
pub enum CodeSimError {
    #[error("codebook would need {cells} cells, cap is {cap}")]
    CapacityExceeded { cells: u128, cap: u128 },
    #[error("equivocation enumeration would touch {cells} cells, cap is {cap}")]
    EnumerationTooLarge { cells: u128, cap: u128 },
    #[error("{what} index {index} out of range (limit {limit})")]
    IndexOutOfRange { what: String, index: usize, limit: usize },
    #[error("invalid joint: {0}")]
    InvalidJoint(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

type Result<T> = std::result::Result<T, CodeSimError>;

// ---------------------------------------------------------------------------
// Specs.

/// Plain superposition code on one broadcast channel: one layer per chain
/// variable, message 0 the common message and message k user (k-1)'s private
/// message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodebookSpec {
    pub n: usize,
    /// Nominal rates `R_0..R_K` in bits per channel use.
    pub message_rates: Vec<f64>,
    /// Per-layer confusion rates; defaults to the layer's eavesdropper
    /// information `I(U_k; Z | U_{k-1})` evaluated on the chain.
    pub confusion_rates: Option<Vec<f64>>,
    pub chain: AuxiliaryChain,
    pub seed: u64,
    /// Per-symbol typicality slack.
    pub epsilon: f64,
}

/// Rate-split code on a two-sub-channel parallel channel: user 0's private
/// rate splits across a dedicated codeword on sub-channel 0 and the common
/// layer of sub-channel 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSplitSpec {
    pub n: usize,
    /// `[R_0, R_1, R_2]` in bits per use; `R_1` is split internally.
    pub rates: [f64; 3],
    /// Fraction of `R_1` carried by sub-channel 0; default chooses it
    /// proportionally to the two secrecy budgets.
    pub split: Option<f64>,
    /// Input distribution of sub-channel 0 (no layering there).
    pub input0: Distribution,
    /// `(U, X)` chain for sub-channel 1.
    pub chain1: AuxiliaryChain,
    pub seed: u64,
    pub epsilon: f64,
}

/// Time-shared code: channel 1 for the first `round(alpha n)` symbols,
/// channel 2 for the rest, the common message repeated in both segments and
/// each private rate split across its segment's two layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSharedSpec {
    pub n: usize,
    pub alpha: f64,
    pub rates: [f64; 3],
    /// `(U, X)` chains for the two segments.
    pub chain1: AuxiliaryChain,
    pub chain2: AuxiliaryChain,
    /// Fraction of each private rate carried by the segment's lower layer.
    pub split1: Option<f64>,
    pub split2: Option<f64>,
    pub seed: u64,
    pub epsilon: f64,
}

// ---------------------------------------------------------------------------
// Codebook structure.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// Global message ids first indexed at this layer.
    pub attach: Vec<usize>,
    /// Message ids indexing this layer's array (all layers up to here).
    pub cum_messages: Vec<usize>,
    pub confusion_count: usize,
    /// Realized confusion rate, bits per symbol of this segment.
    pub confusion_rate: f64,
    /// Flat codeword array: `index * len .. (index+1) * len`.
    words: Vec<usize>,
    /// Conditional law p(y_r | u) per receiver, for the typicality test.
    cond: Vec<Vec<Vec<f64>>>,
    u_card: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub channel: BroadcastWiretapChannel,
    pub chain: AuxiliaryChain,
    pub len: usize,
    pub layers: Vec<Layer>,
}

/// Per-user decoding plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserPlan {
    /// Layer this user decodes in each segment (`None` = segment ignored).
    pub decode_layers: Vec<Option<usize>>,
    /// Message ids that must be correct for this user's decoding to count
    /// as a success (the common message plus the user's own parts).
    pub required: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub n: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub message_counts: Vec<usize>,
    pub nominal_rates: Vec<f64>,
    /// `log2(count) / n` per message id.
    pub realized_rates: Vec<f64>,
    pub segments: Vec<Segment>,
    pub users: Vec<UserPlan>,
}

fn count_for(rate: f64, symbols: usize) -> usize {
    let c = (2f64.powf(rate * symbols as f64)).round();
    (c as usize).max(1)
}

fn sample_index(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let mut t = rng.gen::<f64>();
    for (i, &p) in probs.iter().enumerate() {
        t -= p;
        if t < 0.0 {
            return i;
        }
    }
    probs.len() - 1
}

impl Layer {
    pub fn word(&self, index: usize, len: usize) -> &[usize] {
        &self.words[index * len..(index + 1) * len]
    }
}

impl Segment {
    /// Confusion index counts of layers `0..=layer`.
    fn conf_dims(&self, layer: usize) -> Vec<usize> {
        self.layers[..=layer].iter().map(|l| l.confusion_count).collect()
    }

    /// Flat index into `layer`'s array for given global message values and
    /// per-layer confusion indices (`confs[j]` for layer j).
    fn word_index(&self, layer: usize, msgs: &[usize], counts: &[usize], confs: &[usize]) -> usize {
        let mut idx = 0usize;
        for &id in &self.layers[layer].cum_messages {
            idx = idx * counts[id] + msgs[id];
        }
        for (j, l) in self.layers[..=layer].iter().enumerate() {
            idx = idx * l.confusion_count + confs[j];
        }
        idx
    }

    fn index_space(&self, layer: usize, counts: &[usize]) -> u128 {
        let mut total: u128 = 1;
        for &id in &self.layers[layer].cum_messages {
            total *= counts[id] as u128;
        }
        for l in &self.layers[..=layer] {
            total *= l.confusion_count as u128;
        }
        total
    }
}

/// Internal layout handed to the generic builder.
struct SegmentPlan {
    channel: BroadcastWiretapChannel,
    chain: AuxiliaryChain,
    len: usize,
    attach: Vec<Vec<usize>>,
    confusion_rates: Option<Vec<f64>>,
}

fn build_engine(
    n: usize,
    message_counts: Vec<usize>,
    nominal_rates: Vec<f64>,
    plans: Vec<SegmentPlan>,
    users: Vec<UserPlan>,
    seed: u64,
    epsilon: f64,
) -> Result<Codebook> {
    if epsilon <= 0.0 {
        return Err(CodeSimError::Config("typicality slack must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut segments = Vec::new();
    let mut total_cells: u128 = 0;

    for plan in plans {
        let m = plan.chain.num_vars();
        if plan.attach.len() != m {
            return Err(CodeSimError::Config("one message-attachment list per layer".into()));
        }
        let joint = plan.chain.joint_with_channel(&plan.channel)?;
        let k_users = plan.channel.num_receivers();
        let z_axis = m + k_users;
        let cards = plan.chain.cardinalities();

        let mut layers: Vec<Layer> = Vec::new();
        let mut cum: Vec<usize> = Vec::new();
        for j in 0..m {
            cum.extend(plan.attach[j].iter().copied());
            let mi = match &plan.confusion_rates {
                Some(r) => r[j],
                None => {
                    let cond: Vec<usize> = if j > 0 { vec![j - 1] } else { vec![] };
                    joint.conditional_mutual_information(&[j], &[z_axis], &cond)?
                }
            };
            let conf_count = count_for(mi, plan.len);
            // Conditional laws p(y_r | u_j) from the chain's joint.
            let mut cond = Vec::new();
            for r in 0..k_users {
                let pair = joint.marginalize(&[j, m + r])?;
                let (u_card, y_card) = (pair.dims()[0], pair.dims()[1]);
                let mut law = vec![vec![0.0; y_card]; u_card];
                for u in 0..u_card {
                    let row: Vec<f64> = (0..y_card).map(|y| pair.probs()[u * y_card + y]).collect();
                    let s: f64 = row.iter().sum();
                    if s > 0.0 {
                        law[u] = row.iter().map(|p| p / s).collect();
                    }
                }
                cond.push(law);
            }
            layers.push(Layer {
                attach: plan.attach[j].clone(),
                cum_messages: cum.clone(),
                confusion_count: conf_count,
                confusion_rate: (conf_count as f64).log2() / plan.len.max(1) as f64,
                words: Vec::new(),
                cond,
                u_card: cards[j],
            });
        }

        let mut segment = Segment {
            channel: plan.channel,
            chain: plan.chain,
            len: plan.len,
            layers,
        };

        // Materialize the codewords layer by layer; a layer index projects to
        // its parent by dropping the newly attached messages and its own
        // confusion digit.
        for j in 0..m {
            let space = segment.index_space(j, &message_counts);
            total_cells += space * segment.len as u128;
            if total_cells > CODEBOOK_CELL_CAP as u128 {
                return Err(CodeSimError::CapacityExceeded {
                    cells: total_cells,
                    cap: CODEBOOK_CELL_CAP as u128,
                });
            }
            let space = space as usize;
            let mut words = vec![0usize; space * segment.len];
            let msg_ids = segment.layers[j].cum_messages.clone();
            let dims: Vec<usize> = msg_ids
                .iter()
                .map(|&id| message_counts[id])
                .chain(segment.conf_dims(j))
                .collect();
            let mut digits = vec![0usize; dims.len()];
            for idx in 0..space {
                decompose(idx, &dims, &mut digits);
                let dest = &mut words[idx * segment.len..(idx + 1) * segment.len];
                if j == 0 {
                    for s in dest.iter_mut() {
                        *s = sample_index(&mut rng, segment.chain.root().probs());
                    }
                } else {
                    // Parent index: same messages restricted to the previous
                    // layer's list, confusion digits 0..j-1.
                    let mut msgs = vec![0usize; message_counts.len()];
                    for (d, &id) in msg_ids.iter().enumerate() {
                        msgs[id] = digits[d];
                    }
                    let confs = &digits[msg_ids.len()..];
                    let parent_idx = segment.word_index(j - 1, &msgs, &message_counts, &confs[..j]);
                    let parent: Vec<usize> =
                        segment.layers[j - 1].word(parent_idx, segment.len).to_vec();
                    let link = &segment.chain.links()[j - 1];
                    for (s, &pu) in dest.iter_mut().zip(&parent) {
                        *s = sample_index(&mut rng, link.row(pu));
                    }
                }
            }
            segment.layers[j].words = words;
        }
        segments.push(segment);
    }

    let realized_rates = message_counts
        .iter()
        .map(|&c| (c as f64).log2() / n as f64)
        .collect();
    Ok(Codebook {
        n,
        epsilon,
        seed,
        message_counts,
        nominal_rates,
        realized_rates,
        segments,
        users,
    })
}

fn decompose(mut idx: usize, dims: &[usize], out: &mut [usize]) {
    for (d, &dim) in dims.iter().enumerate().rev() {
        out[d] = idx % dim;
        idx /= dim;
    }
}

/// Plain superposition codebook: layer 0 carries the common message and the
/// weakest user's private message, each further layer one more private
/// message, the top layer being the channel input.
pub fn build_codebook(spec: &CodebookSpec, bc: &BroadcastWiretapChannel) -> Result<Codebook> {
    let k = bc.num_receivers();
    if spec.chain.num_vars() != k {
        return Err(CodeSimError::Config(format!(
            "chain must have {k} variables for {k} receivers"
        )));
    }
    if spec.message_rates.len() != k + 1 {
        return Err(CodeSimError::Config(format!("expected {} message rates", k + 1)));
    }
    if spec.message_rates.iter().any(|&r| r < 0.0) {
        return Err(CodeSimError::Config("rates must be nonnegative".into()));
    }
    if let Some(c) = &spec.confusion_rates {
        if c.len() != k {
            return Err(CodeSimError::Config(format!("expected {k} confusion rates")));
        }
    }
    let message_counts: Vec<usize> = spec.message_rates.iter().map(|&r| count_for(r, spec.n)).collect();
    let mut attach: Vec<Vec<usize>> = vec![vec![0, 1]];
    for j in 1..k {
        attach.push(vec![j + 1]);
    }
    let users = (0..k)
        .map(|r| UserPlan {
            decode_layers: vec![Some(r)],
            required: vec![0, r + 1],
        })
        .collect();
    build_engine(
        spec.n,
        message_counts,
        spec.message_rates.clone(),
        vec![SegmentPlan {
            channel: bc.clone(),
            chain: spec.chain.clone(),
            len: spec.n,
            attach,
            confusion_rates: spec.confusion_rates.clone(),
        }],
        users,
        spec.seed,
        spec.epsilon,
    )
}

/// Rate-split codebook on two parallel sub-channels (receiver 0 strong in
/// sub-channel 0): message ids are `[w0, w1a, w1b, w2]`, with user 0's rate
/// split between a dedicated codeword on sub-channel 0 and the common layer
/// of sub-channel 1.
pub fn build_rate_split(spec: &RateSplitSpec, pc: &ParallelChannel) -> Result<Codebook> {
    if pc.num_subchannels() != 2 || pc.num_receivers() != 2 {
        return Err(CodeSimError::Config("rate splitting needs 2 users and 2 sub-channels".into()));
    }
    if spec.rates.iter().any(|&r| r < 0.0) {
        return Err(CodeSimError::Config("rates must be nonnegative".into()));
    }
    let sub0 = &pc.subchannels()[0];
    let sub1 = &pc.subchannels()[1];
    let s = match spec.split {
        Some(s) if (0.0..=1.0).contains(&s) => s,
        Some(_) => return Err(CodeSimError::Config("split must lie in [0, 1]".into())),
        None => {
            let y0 = sub0.marginal_channel(Terminal::Receiver(0))?;
            let z0 = sub0.marginal_channel(Terminal::Eavesdropper)?;
            let p0 = spec.input0.clone();
            let b0 = (y0.mutual_information(&p0)? - z0.mutual_information(&p0)?).max(0.0);
            let joint = spec.chain1.joint_with_channel(sub1)?;
            let b1 = (joint.conditional_mutual_information(&[0], &[2], &[])?
                - joint.conditional_mutual_information(&[0], &[4], &[])?)
                .max(0.0);
            if b0 + b1 > 0.0 {
                b0 / (b0 + b1)
            } else {
                0.5
            }
        }
    };
    let message_counts = vec![
        count_for(spec.rates[0], spec.n),
        count_for(spec.rates[1] * s, spec.n),
        count_for(spec.rates[1] * (1.0 - s), spec.n),
        count_for(spec.rates[2], spec.n),
    ];
    let chain0 = AuxiliaryChain::new(spec.input0.clone(), vec![])?;
    let plans = vec![
        SegmentPlan {
            channel: sub0.clone(),
            chain: chain0,
            len: spec.n,
            attach: vec![vec![1]],
            confusion_rates: None,
        },
        SegmentPlan {
            channel: sub1.clone(),
            chain: spec.chain1.clone(),
            len: spec.n,
            attach: vec![vec![0, 2], vec![3]],
            confusion_rates: None,
        },
    ];
    let users = vec![
        UserPlan {
            decode_layers: vec![Some(0), Some(0)],
            required: vec![0, 1, 2],
        },
        UserPlan {
            decode_layers: vec![None, Some(1)],
            required: vec![0, 3],
        },
    ];
    build_engine(
        spec.n,
        message_counts,
        vec![spec.rates[0], spec.rates[1], spec.rates[2]],
        plans,
        users,
        spec.seed,
        spec.epsilon,
    )
}

/// Time-shared codebook: the common message is repeated in both segments,
/// each user's private rate splits across its segment's two layers. Message
/// ids are `[w0, w1a, w1b, w2a, w2b]`.
pub fn build_time_shared(
    spec: &TimeSharedSpec,
    ch1: &BroadcastWiretapChannel,
    ch2: &BroadcastWiretapChannel,
) -> Result<Codebook> {
    if ch1.num_receivers() != 2 || ch2.num_receivers() != 2 {
        return Err(CodeSimError::Config("time sharing needs 2 users".into()));
    }
    if !(0.0..=1.0).contains(&spec.alpha) {
        return Err(CodeSimError::Config("alpha must lie in [0, 1]".into()));
    }
    let n1 = (spec.alpha * spec.n as f64).round() as usize;
    if n1 == 0 || n1 == spec.n {
        return Err(CodeSimError::Config("alpha must give both segments at least one symbol".into()));
    }
    let s1 = spec.split1.unwrap_or(0.5);
    let s2 = spec.split2.unwrap_or(0.5);
    if !(0.0..=1.0).contains(&s1) || !(0.0..=1.0).contains(&s2) {
        return Err(CodeSimError::Config("splits must lie in [0, 1]".into()));
    }
    let message_counts = vec![
        count_for(spec.rates[0], spec.n),
        count_for(spec.rates[1] * s1, spec.n),
        count_for(spec.rates[1] * (1.0 - s1), spec.n),
        count_for(spec.rates[2] * s2, spec.n),
        count_for(spec.rates[2] * (1.0 - s2), spec.n),
    ];
    let plans = vec![
        SegmentPlan {
            channel: ch1.clone(),
            chain: spec.chain1.clone(),
            len: n1,
            attach: vec![vec![0, 1], vec![2]],
            confusion_rates: None,
        },
        SegmentPlan {
            channel: ch2.clone(),
            chain: spec.chain2.clone(),
            len: spec.n - n1,
            attach: vec![vec![0, 3], vec![4]],
            confusion_rates: None,
        },
    ];
    // In channel 1 receiver 0 is strong (decodes both layers); mirrored in
    // channel 2.
    let users = vec![
        UserPlan {
            decode_layers: vec![Some(1), Some(0)],
            required: vec![0, 1, 2],
        },
        UserPlan {
            decode_layers: vec![Some(0), Some(1)],
            required: vec![0, 3, 4],
        },
    ];
    build_engine(
        spec.n,
        message_counts,
        vec![spec.rates[0], spec.rates[1], spec.rates[2]],
        plans,
        users,
        spec.seed,
        spec.epsilon,
    )
}

// ---------------------------------------------------------------------------
// Encoding, transmission, decoding.

/// Stochastic encoding: uniform confusion indices, then the top-layer
/// codeword of every segment. Returns one input sequence per segment.
pub fn encode(cb: &Codebook, messages: &[usize], rng: &mut ChaCha8Rng) -> Result<Vec<Vec<usize>>> {
    if messages.len() != cb.message_counts.len() {
        return Err(CodeSimError::Config(format!(
            "expected {} message indices",
            cb.message_counts.len()
        )));
    }
    for (id, (&w, &count)) in messages.iter().zip(&cb.message_counts).enumerate() {
        if w >= count {
            return Err(CodeSimError::IndexOutOfRange {
                what: format!("message {id}"),
                index: w,
                limit: count,
            });
        }
    }
    let mut out = Vec::new();
    for seg in &cb.segments {
        let top = seg.layers.len() - 1;
        let confs: Vec<usize> = seg
            .layers
            .iter()
            .map(|l| rng.gen_range(0..l.confusion_count))
            .collect();
        let idx = seg.word_index(top, messages, &cb.message_counts, &confs);
        out.push(seg.layers[top].word(idx, seg.len).to_vec());
    }
    Ok(out)
}

/// Samples every receiver's and the eavesdropper's observation of one
/// transmitted block. Returns `(y, z)` with `y[segment][receiver][symbol]`.
pub fn transmit(
    cb: &Codebook,
    x: &[Vec<usize>],
    rng: &mut ChaCha8Rng,
) -> (Vec<Vec<Vec<usize>>>, Vec<Vec<usize>>) {
    let mut ys = Vec::new();
    let mut zs = Vec::new();
    for (seg, xs) in cb.segments.iter().zip(x) {
        let k = seg.channel.num_receivers();
        let dims = seg.channel.output_dims();
        let mut y = vec![vec![0usize; seg.len]; k];
        let mut z = vec![0usize; seg.len];
        for (i, &xi) in xs.iter().enumerate() {
            let flat = sample_index(rng, &seg.channel.joint()[xi]);
            let mut rest = flat;
            let mut coords = vec![0usize; dims.len()];
            for (d, &dim) in dims.iter().enumerate().rev() {
                coords[d] = rest % dim;
                rest /= dim;
            }
            for r in 0..k {
                y[r][i] = coords[r];
            }
            z[i] = coords[k];
        }
        ys.push(y);
        zs.push(z);
    }
    (ys, zs)
}

/// Frequency typicality against the channel law conditioned on the
/// codeword's own composition: for every symbol pair, the empirical joint
/// frequency must be within `eps` of `freq(u) * p(y|u)`.
fn conditionally_typical(u: &[usize], y: &[usize], law: &[Vec<f64>], eps: f64) -> bool {
    let n = u.len() as f64;
    let u_card = law.len();
    let y_card = law.first().map_or(0, |r| r.len());
    let mut joint = vec![0usize; u_card * y_card];
    let mut comp = vec![0usize; u_card];
    for (&a, &b) in u.iter().zip(y) {
        joint[a * y_card + b] += 1;
        comp[a] += 1;
    }
    for a in 0..u_card {
        for b in 0..y_card {
            let expect = comp[a] as f64 / n * law[a][b];
            let freq = joint[a * y_card + b] as f64 / n;
            if (freq - expect).abs() > eps {
                return false;
            }
        }
    }
    true
}

/// Message ids user `user` decodes (its candidate scope), sorted.
pub fn user_scope(cb: &Codebook, user: usize) -> Vec<usize> {
    let mut scope = BTreeSet::new();
    for (seg, dl) in cb.segments.iter().zip(&cb.users[user].decode_layers) {
        if let Some(layer) = dl {
            scope.extend(seg.layers[*layer].cum_messages.iter().copied());
        }
    }
    scope.into_iter().collect()
}

/// Joint-typicality decoding for one user: a candidate assignment over the
/// user's message scope succeeds if, in every segment the user listens to,
/// some confusion-index choice makes the layer codeword typical with the
/// observation. Exactly one succeeding assignment is required; otherwise the
/// decode fails.
///
/// `y[segment]` is this user's observation (ignored segments may be empty).
pub fn decode(cb: &Codebook, user: usize, y: &[Vec<usize>]) -> Option<Vec<usize>> {
    let scope = user_scope(cb, user);
    let dims: Vec<usize> = scope.iter().map(|&id| cb.message_counts[id]).collect();
    let total: usize = dims.iter().product();
    let mut winner: Option<Vec<usize>> = None;
    let mut digits = vec![0usize; dims.len()];
    let mut msgs = vec![0usize; cb.message_counts.len()];

    for cand in 0..total {
        decompose(cand, &dims, &mut digits);
        for (d, &id) in scope.iter().enumerate() {
            msgs[id] = digits[d];
        }
        let mut ok = true;
        for (si, (seg, dl)) in cb.segments.iter().zip(&cb.users[user].decode_layers).enumerate() {
            let Some(layer) = *dl else { continue };
            let conf_dims = seg.conf_dims(layer);
            let conf_total: usize = conf_dims.iter().product();
            let mut confs = vec![0usize; conf_dims.len()];
            let mut found = false;
            for c in 0..conf_total {
                decompose(c, &conf_dims, &mut confs);
                let idx = seg.word_index(layer, &msgs, &cb.message_counts, &confs);
                let word = seg.layers[layer].word(idx, seg.len);
                if conditionally_typical(word, &y[si], &seg.layers[layer].cond[user], cb.epsilon) {
                    found = true;
                    break;
                }
            }
            if !found {
                ok = false;
                break;
            }
        }
        if ok {
            if winner.is_some() {
                return None; // ambiguous
            }
            winner = Some(digits.clone());
        }
    }
    winner
}

// ---------------------------------------------------------------------------
// Monte-Carlo error estimation.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorEstimate {
    pub errors: usize,
    pub trials: usize,
    pub rate: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
}

fn wilson(errors: usize, trials: usize) -> ErrorEstimate {
    let z = 1.959_963_984_540_054f64; // 95%
    let n = trials as f64;
    let p = errors as f64 / n;
    let denom = 1.0 + z * z / n;
    let center = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ErrorEstimate {
        errors,
        trials,
        rate: p,
        wilson_low: (center - half).max(0.0),
        wilson_high: (center + half).min(1.0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivocationEntry {
    pub subset: Vec<usize>,
    pub bits_per_use: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub trials: usize,
    pub error_estimates: Vec<ErrorEstimate>,
    pub equivocation: Vec<EquivocationEntry>,
}

/// Uniform random messages through the true channel law; per-user empirical
/// error probability (wrong or failed decode of the user's required
/// messages) with 95% Wilson intervals.
pub fn estimate_error(cb: &Codebook, trials: usize, seed: u64) -> Result<SimulationReport> {
    if trials == 0 {
        return Err(CodeSimError::Config("at least one trial required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = cb.users.len();
    let mut errors = vec![0usize; k];
    let scopes: Vec<Vec<usize>> = (0..k).map(|u| user_scope(cb, u)).collect();
    for _ in 0..trials {
        let messages: Vec<usize> = cb.message_counts.iter().map(|&c| rng.gen_range(0..c)).collect();
        let x = encode(cb, &messages, &mut rng)?;
        let (ys, _z) = transmit(cb, &x, &mut rng);
        for u in 0..k {
            let y_u: Vec<Vec<usize>> = cb
                .segments
                .iter()
                .enumerate()
                .map(|(si, _)| {
                    if cb.users[u].decode_layers[si].is_some() {
                        ys[si][u].clone()
                    } else {
                        Vec::new()
                    }
                })
                .collect();
            let got = decode(cb, u, &y_u);
            let ok = match got {
                None => false,
                Some(vals) => cb.users[u].required.iter().all(|req| {
                    scopes[u]
                        .iter()
                        .position(|id| id == req)
                        .is_some_and(|pos| vals[pos] == messages[*req])
                }),
            };
            if !ok {
                errors[u] += 1;
            }
        }
    }
    Ok(SimulationReport {
        trials,
        error_estimates: errors.into_iter().map(|e| wilson(e, trials)).collect(),
        equivocation: Vec::new(),
    })
}

// ---------------------------------------------------------------------------
// Exact equivocation.

/// Exact `H(W_subset | Z^n) / n` by enumerating every message tuple, every
/// confusion tuple, and every eavesdropper sequence, weighted by the true
/// channel law. The empty subset gives 0.
pub fn exact_equivocation(cb: &Codebook, subset: &[usize]) -> Result<f64> {
    for &id in subset {
        if id >= cb.message_counts.len() {
            return Err(CodeSimError::IndexOutOfRange {
                what: "message".into(),
                index: id,
                limit: cb.message_counts.len(),
            });
        }
    }
    if subset.is_empty() {
        return Ok(0.0);
    }
    let subset: Vec<usize> = {
        let s: BTreeSet<usize> = subset.iter().copied().collect();
        s.into_iter().collect()
    };

    // Sizes.
    let w_total: u128 = cb.message_counts.iter().map(|&c| c as u128).product();
    let conf_dims: Vec<usize> = cb
        .segments
        .iter()
        .flat_map(|s| s.layers.iter().map(|l| l.confusion_count))
        .collect();
    let conf_total: u128 = conf_dims.iter().map(|&c| c as u128).product();
    let z_dims: Vec<usize> = cb
        .segments
        .iter()
        .flat_map(|s| std::iter::repeat_n(s.channel.eavesdropper_alphabet(), s.len))
        .collect();
    let z_space: u128 = z_dims.iter().map(|&d| d as u128).product();
    let cells = w_total * conf_total * z_space;
    if cells > EQUIVOCATION_CELL_CAP {
        return Err(CodeSimError::EnumerationTooLarge {
            cells,
            cap: EQUIVOCATION_CELL_CAP,
        });
    }
    let ws_total: usize = subset.iter().map(|&id| cb.message_counts[id]).product();
    let z_space = z_space as usize;

    let eve: Vec<crate::Channel> = cb
        .segments
        .iter()
        .map(|s| s.channel.marginal_channel(Terminal::Eavesdropper))
        .collect::<std::result::Result<_, _>>()?;

    let mut joint = vec![0.0f64; ws_total * z_space];
    let w_dims: Vec<usize> = cb.message_counts.clone();
    let base_prob = 1.0 / (w_total as f64 * conf_total as f64);

    let mut w_digits = vec![0usize; w_dims.len()];
    let mut conf_digits = vec![0usize; conf_dims.len()];
    for w in 0..w_total as usize {
        decompose(w, &w_dims, &mut w_digits);
        let ws_idx = subset
            .iter()
            .fold(0usize, |acc, &id| acc * cb.message_counts[id] + w_digits[id]);
        for c in 0..conf_total as usize {
            decompose(c, &conf_dims, &mut conf_digits);
            // Assemble the transmitted sequences.
            let mut x_all: Vec<usize> = Vec::with_capacity(cb.n);
            let mut which_seg: Vec<usize> = Vec::with_capacity(cb.n);
            let mut at = 0;
            for (si, seg) in cb.segments.iter().enumerate() {
                let top = seg.layers.len() - 1;
                let confs = &conf_digits[at..at + seg.layers.len()];
                at += seg.layers.len();
                let idx = seg.word_index(top, &w_digits, &cb.message_counts, confs);
                x_all.extend_from_slice(seg.layers[top].word(idx, seg.len));
                which_seg.extend(std::iter::repeat_n(si, seg.len));
            }
            // Accumulate p(z-sequence | x) over all z sequences.
            accumulate_z(
                &x_all,
                &which_seg,
                &eve,
                0,
                0,
                base_prob,
                &mut joint[ws_idx * z_space..(ws_idx + 1) * z_space],
                &z_dims,
            );
        }
    }

    let h_joint: f64 = -joint.iter().map(|&p| plog2p(p)).sum::<f64>();
    let mut pz = vec![0.0f64; z_space];
    for ws in 0..ws_total {
        for (z, acc) in pz.iter_mut().enumerate() {
            *acc += joint[ws * z_space + z];
        }
    }
    let h_z: f64 = -pz.iter().map(|&p| plog2p(p)).sum::<f64>();
    Ok((h_joint - h_z) / cb.n as f64)
}

#[allow(clippy::too_many_arguments)]
fn accumulate_z(
    x: &[usize],
    which_seg: &[usize],
    eve: &[crate::Channel],
    pos: usize,
    z_idx: usize,
    prob: f64,
    out: &mut [f64],
    z_dims: &[usize],
) {
    if prob == 0.0 {
        return;
    }
    if pos == x.len() {
        out[z_idx] += prob;
        return;
    }
    let row = eve[which_seg[pos]].row(x[pos]);
    let dim = z_dims[pos];
    for z in 0..dim {
        accumulate_z(x, which_seg, eve, pos + 1, z_idx * dim + z, prob * row[z], out, z_dims);
    }
}

// ---------------------------------------------------------------------------
// Sum-rate secrecy implies subset secrecy.

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Lemma1Report {
    /// Realized sum-rate slack `sum(R) - H(all W | Z)`.
    pub slack: f64,
    /// Smallest subset margin `H(S|Z) - (sum_S R - slack)`; nonnegative when
    /// the implication holds.
    pub worst_margin: f64,
    pub worst_subset: Vec<usize>,
    pub holds: bool,
}

/// Checks, on a single-letter proxy joint over `(W_0..W_K, Z)`, that
/// satisfying the sum-rate secrecy constraint at its realized slack implies
/// every subset constraint at the same slack. Requires uniform, mutually
/// independent messages.
pub fn check_lemma1(joint: &JointDistribution, rates: &[f64], tolerance: f64) -> Result<Lemma1Report> {
    let axes = joint.num_axes();
    if axes < 2 {
        return Err(CodeSimError::InvalidJoint("need at least one message and the observation".into()));
    }
    let k = axes - 1; // message axes 0..k, observation axis k
    if rates.len() != k {
        return Err(CodeSimError::InvalidJoint(format!("expected {k} rates")));
    }
    let w_axes: Vec<usize> = (0..k).collect();
    let w_marginal = joint.marginalize(&w_axes)?;
    // Uniform, independent messages: the joint message marginal must be the
    // uniform distribution over the product alphabet.
    let total: usize = w_marginal.dims().iter().product();
    let uniform = 1.0 / total as f64;
    for (i, &p) in w_marginal.probs().iter().enumerate() {
        if (p - uniform).abs() > 1e-9 {
            return Err(CodeSimError::InvalidJoint(format!(
                "messages are not uniform and independent (cell {i}: {p})"
            )));
        }
    }
    for (j, &r) in rates.iter().enumerate() {
        let expect = (joint.dims()[j] as f64).log2();
        if (r - expect).abs() > 1e-6 {
            return Err(CodeSimError::InvalidJoint(format!(
                "rate {j} does not match the uniform message entropy"
            )));
        }
    }

    let h_all = joint.conditional_entropy(&w_axes, &[k])?;
    let sum_rates: f64 = rates.iter().sum();
    let slack = sum_rates - h_all;

    let mut worst_margin = f64::INFINITY;
    let mut worst_subset = Vec::new();
    for mask in 0..(1usize << k) {
        let subset: Vec<usize> = (0..k).filter(|&j| mask >> j & 1 == 1).collect();
        let h_s = if subset.is_empty() {
            0.0
        } else {
            joint.conditional_entropy(&subset, &[k])?
        };
        let target: f64 = subset.iter().map(|&j| rates[j]).sum::<f64>() - slack;
        let margin = h_s - target;
        if margin < worst_margin {
            worst_margin = margin;
            worst_subset = subset;
        }
    }
    Ok(Lemma1Report {
        slack,
        worst_margin,
        worst_subset,
        holds: worst_margin >= -tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Channel;
    use approx::assert_abs_diff_eq;

    fn wiretap(bsc_y: f64, bsc_extra: f64) -> BroadcastWiretapChannel {
        BroadcastWiretapChannel::from_degraded_chain(
            &[Channel::bsc(bsc_y), Channel::bsc(bsc_extra)],
            &[Terminal::Receiver(0), Terminal::Eavesdropper],
        )
        .unwrap()
    }

    fn no_eve_wiretap() -> BroadcastWiretapChannel {
        BroadcastWiretapChannel::from_degraded_chain(
            &[Channel::identity(2), Channel::constant(2)],
            &[Terminal::Receiver(0), Terminal::Eavesdropper],
        )
        .unwrap()
    }

    fn plain_spec(n: usize, r: f64, chain: AuxiliaryChain, seed: u64) -> CodebookSpec {
        CodebookSpec {
            n,
            message_rates: vec![0.0, r],
            confusion_rates: None,
            chain,
            seed,
            epsilon: 0.1,
        }
    }

    fn uniform_chain() -> AuxiliaryChain {
        AuxiliaryChain::new(Distribution::uniform(2), vec![]).unwrap()
    }

    fn qsc(p: f64) -> Channel {
        let off = p / 3.0;
        let rows = (0..4)
            .map(|i| (0..4).map(|j| if i == j { 1.0 - p } else { off }).collect())
            .collect();
        Channel::new(rows).unwrap()
    }

    #[test]
    fn half_rate_single_layer_gives_four_codewords() {
        let bc = no_eve_wiretap();
        let cb = build_codebook(&plain_spec(4, 0.5, uniform_chain(), 1), &bc).unwrap();
        let seg = &cb.segments[0];
        assert_eq!(cb.message_counts, vec![1, 4]);
        assert_eq!(seg.layers[0].confusion_count, 1); // Z constant
        assert_eq!(seg.layers[0].words.len(), 4 * 4);
        assert_abs_diff_eq!(cb.realized_rates[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn same_seed_reproduces_the_codebook() {
        let bc = wiretap(0.1, 0.1);
        let a = build_codebook(&plain_spec(6, 0.3, uniform_chain(), 9), &bc).unwrap();
        let b = build_codebook(&plain_spec(6, 0.3, uniform_chain(), 9), &bc).unwrap();
        assert_eq!(a, b);
        let c = build_codebook(&plain_spec(6, 0.3, uniform_chain(), 10), &bc).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn default_confusion_counts_match_chain_information() {
        // Two-user degraded chain with a (U, X) auxiliary pair.
        let bc = BroadcastWiretapChannel::from_degraded_chain(
            &[Channel::bsc(0.05), Channel::bsc(0.1), Channel::bsc(0.1)],
            &[Terminal::Receiver(1), Terminal::Receiver(0), Terminal::Eavesdropper],
        )
        .unwrap();
        let chain = AuxiliaryChain::new(Distribution::uniform(2), vec![Channel::bsc(0.2)]).unwrap();
        let n = 8;
        let spec = CodebookSpec {
            n,
            message_rates: vec![0.1, 0.1, 0.1],
            confusion_rates: None,
            chain: chain.clone(),
            seed: 3,
            epsilon: 0.1,
        };
        let cb = build_codebook(&spec, &bc).unwrap();
        let joint = chain.joint_with_channel(&bc).unwrap();
        // Axes: U=0, X=1, Y0=2, Y1=3, Z=4.
        let mi0 = joint.conditional_mutual_information(&[0], &[4], &[]).unwrap();
        let mi1 = joint.conditional_mutual_information(&[1], &[4], &[0]).unwrap();
        let expect = |mi: f64| ((2f64.powf(mi * n as f64)).round() as usize).max(1);
        assert_eq!(cb.segments[0].layers[0].confusion_count, expect(mi0));
        assert_eq!(cb.segments[0].layers[1].confusion_count, expect(mi1));
    }

    #[test]
    fn zero_confusion_makes_encoding_deterministic() {
        let bc = no_eve_wiretap();
        let cb = build_codebook(&plain_spec(5, 0.4, uniform_chain(), 2), &bc).unwrap();
        let mut r1 = ChaCha8Rng::seed_from_u64(11);
        let mut r2 = ChaCha8Rng::seed_from_u64(77);
        let a = encode(&cb, &[0, 1], &mut r1).unwrap();
        let b = encode(&cb, &[0, 1], &mut r2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn confusion_indices_are_uniform() {
        // Force 4 confusion indices, no messages; track which codeword was
        // emitted and chi-square the frequencies.
        let bc = wiretap(0.1, 0.1);
        let spec = CodebookSpec {
            n: 8,
            message_rates: vec![0.0, 0.0],
            confusion_rates: Some(vec![0.25]), // 2^{8*0.25} = 4 indices
            chain: uniform_chain(),
            seed: 5,
            epsilon: 0.1,
        };
        let cb = build_codebook(&spec, &bc).unwrap();
        let seg = &cb.segments[0];
        assert_eq!(seg.layers[0].confusion_count, 4);
        for a in 0..4 {
            for b in a + 1..4 {
                assert_ne!(seg.layers[0].word(a, 8), seg.layers[0].word(b, 8));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let trials = 4000;
        let mut counts = [0usize; 4];
        for _ in 0..trials {
            let x = encode(&cb, &[0, 0], &mut rng).unwrap();
            let hit = (0..4)
                .find(|&c| seg.layers[0].word(c, 8) == x[0].as_slice())
                .expect("emitted word must be in the codebook");
            counts[hit] += 1;
        }
        let expected = trials as f64 / 4.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 5% critical value for 3 degrees of freedom.
        assert!(chi2 < 7.815, "chi-square {chi2}");
    }

    #[test]
    fn emitted_word_is_the_indexed_codeword() {
        let bc = no_eve_wiretap();
        let cb = build_codebook(&plain_spec(5, 0.4, uniform_chain(), 2), &bc).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for w in 0..cb.message_counts[1] {
            let x = encode(&cb, &[0, w], &mut rng).unwrap();
            let seg = &cb.segments[0];
            let idx = seg.word_index(0, &[0, w], &cb.message_counts, &[0]);
            assert_eq!(x[0], seg.layers[0].word(idx, 5));
        }
    }

    #[test]
    fn noiseless_channel_decodes_every_message() {
        let bc = no_eve_wiretap();
        // Distinct codewords are guaranteed only probabilistically; this
        // seed gives an injective draw.
        let cb = build_codebook(&plain_spec(8, 0.25, uniform_chain(), 4), &bc).unwrap();
        assert_eq!(cb.message_counts[1], 4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for w in 0..4 {
            let x = encode(&cb, &[0, w], &mut rng).unwrap();
            let decoded = decode(&cb, 0, &[x[0].clone()]).expect("decode failure");
            assert_eq!(decoded, vec![0, w]);
        }
    }

    #[test]
    fn single_message_codebook_always_decodes() {
        let bc = no_eve_wiretap();
        let cb = build_codebook(&plain_spec(6, 0.0, uniform_chain(), 8), &bc).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = encode(&cb, &[0, 0], &mut rng).unwrap();
        assert_eq!(decode(&cb, 0, &[x[0].clone()]), Some(vec![0, 0]));
    }

    #[test]
    fn foreign_codebook_output_usually_fails() {
        let bc = no_eve_wiretap();
        let cb = build_codebook(&plain_spec(8, 0.25, uniform_chain(), 4), &bc).unwrap();
        let other = build_codebook(&plain_spec(8, 0.25, uniform_chain(), 99), &bc).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut failures = 0;
        let trials = 20;
        for t in 0..trials {
            let x = encode(&other, &[0, t % 4], &mut rng).unwrap();
            if decode(&cb, 0, &[x[0].clone()]).is_none() {
                failures += 1;
            }
        }
        assert!(failures > trials / 2, "only {failures}/{trials} failures");
    }

    #[test]
    fn noiseless_error_estimate_is_zero() {
        let bc = no_eve_wiretap();
        let cb = build_codebook(&plain_spec(8, 0.25, uniform_chain(), 4), &bc).unwrap();
        let report = estimate_error(&cb, 200, 7).unwrap();
        assert_eq!(report.error_estimates[0].errors, 0);
        assert_eq!(report.trials, 200);
    }

    #[test]
    fn rate_above_capacity_fails_badly() {
        // BSC(0.4) has capacity ~0.029 bits; run at 0.125.
        let bc = BroadcastWiretapChannel::from_degraded_chain(
            &[Channel::bsc(0.4), Channel::constant(2)],
            &[Terminal::Receiver(0), Terminal::Eavesdropper],
        )
        .unwrap();
        let cb = build_codebook(&plain_spec(64, 0.125, uniform_chain(), 6), &bc).unwrap();
        assert_eq!(cb.message_counts[1], 256);
        let report = estimate_error(&cb, 200, 11).unwrap();
        assert!(report.error_estimates[0].rate > 0.9, "error {}", report.error_estimates[0].rate);
    }

    #[test]
    fn doubling_trials_shrinks_the_interval() {
        let bc = wiretap(0.2, 0.1);
        let cb = build_codebook(&plain_spec(8, 0.25, uniform_chain(), 4), &bc).unwrap();
        let small = estimate_error(&cb, 500, 7).unwrap();
        let large = estimate_error(&cb, 2000, 7).unwrap();
        let w = |e: &ErrorEstimate| e.wilson_high - e.wilson_low;
        let ratio = w(&small.error_estimates[0]) / w(&large.error_estimates[0]);
        // Quadrupling the trials should about halve the width.
        assert!(ratio > 1.5 && ratio < 2.7, "ratio {ratio}");
    }

    #[test]
    fn blind_eavesdropper_equivocation_equals_message_entropy() {
        let bc = no_eve_wiretap();
        let cb = build_codebook(&plain_spec(6, 0.5, uniform_chain(), 4), &bc).unwrap();
        let eq = exact_equivocation(&cb, &[1]).unwrap();
        assert_abs_diff_eq!(eq, cb.realized_rates[1], epsilon = 1e-9);
        let eq_all = exact_equivocation(&cb, &[0, 1]).unwrap();
        assert_abs_diff_eq!(eq_all, cb.realized_rates[0] + cb.realized_rates[1], epsilon = 1e-9);
        assert_eq!(exact_equivocation(&cb, &[]).unwrap(), 0.0);
    }

    #[test]
    fn perfect_eavesdropper_with_injective_codebook_leaks_everything() {
        // Z sees X noiselessly; no confusion indices.
        let bc = BroadcastWiretapChannel::from_degraded_chain(
            &[Channel::identity(2), Channel::identity(2)],
            &[Terminal::Receiver(0), Terminal::Eavesdropper],
        )
        .unwrap();
        let spec = CodebookSpec {
            n: 8,
            message_rates: vec![0.0, 0.25],
            confusion_rates: Some(vec![0.0]),
            chain: uniform_chain(),
            seed: 12,
            epsilon: 0.1,
        };
        let cb = build_codebook(&spec, &bc).unwrap();
        // Verify the draw is injective, then equivocation must vanish.
        let seg = &cb.segments[0];
        let words: Vec<&[usize]> = (0..4).map(|i| seg.layers[0].word(i, 8)).collect();
        for i in 0..4 {
            for j in i + 1..4 {
                assert_ne!(words[i], words[j], "seed no longer injective");
            }
        }
        let eq = exact_equivocation(&cb, &[1]).unwrap();
        assert_abs_diff_eq!(eq, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn equivocation_never_exceeds_subset_rates() {
        let bc = wiretap(0.1, 0.1);
        let cb = build_codebook(&plain_spec(6, 0.3, uniform_chain(), 21), &bc).unwrap();
        let eq = exact_equivocation(&cb, &[1]).unwrap();
        assert!(eq <= cb.realized_rates[1] + 1e-9);
        assert!(eq >= 0.0);
    }

    #[test]
    fn equivocation_ratio_improves_with_block_length() {
        // Quaternary symmetric degraded wiretap at 80% of secrecy capacity;
        // the larger alphabet concentrates the random-codebook draws enough
        // for a per-seed length comparison.
        let bc = BroadcastWiretapChannel::from_degraded_chain(
            &[qsc(0.08), qsc(0.546)],
            &[Terminal::Receiver(0), Terminal::Eavesdropper],
        )
        .unwrap();
        let input = Distribution::uniform(4);
        let iy = bc.marginal_channel(Terminal::Receiver(0)).unwrap().mutual_information(&input).unwrap();
        let iz = bc.marginal_channel(Terminal::Eavesdropper).unwrap().mutual_information(&input).unwrap();
        let rate = 0.8 * (iy - iz);
        let ratio_at = |n: usize, seed: u64| {
            let chain = AuxiliaryChain::new(Distribution::uniform(4), vec![]).unwrap();
            let cb = build_codebook(&plain_spec(n, rate, chain, seed), &bc).unwrap();
            let sum: f64 = cb.realized_rates.iter().sum();
            exact_equivocation(&cb, &[0, 1]).unwrap() / sum
        };
        for seed in [1u64, 2, 3] {
            let short = ratio_at(4, seed);
            let long = ratio_at(8, seed);
            assert!(long > short, "seed {seed}: no improvement ({short} vs {long})");
            assert!(long > 0.75, "seed {seed}: ratio {long} too small");
        }
    }

    #[test]
    fn rate_split_codebook_round_trips_over_clean_subchannels() {
        let clean = |strong: usize| {
            let assign = if strong == 0 {
                [Terminal::Receiver(0), Terminal::Receiver(1), Terminal::Eavesdropper]
            } else {
                [Terminal::Receiver(1), Terminal::Receiver(0), Terminal::Eavesdropper]
            };
            BroadcastWiretapChannel::from_degraded_chain(
                &[Channel::identity(4), Channel::identity(4), Channel::constant(4)],
                &assign,
            )
            .unwrap()
        };
        let pc = ParallelChannel::new(vec![clean(0), clean(1)]).unwrap();
        // An identity chain link makes the top layer a copy of its parent, so
        // the second user's private rate is set to zero and the test checks
        // the multi-segment plumbing deterministically.
        let spec = RateSplitSpec {
            n: 8,
            rates: [0.125, 0.25, 0.0],
            split: Some(0.5),
            input0: Distribution::uniform(4),
            chain1: AuxiliaryChain::new(Distribution::uniform(4), vec![Channel::identity(4)]).unwrap(),
            seed: 40,
            epsilon: 0.1,
        };
        let cb = build_rate_split(&spec, &pc).unwrap();
        assert_eq!(cb.message_counts, vec![2, 2, 2, 1]);
        let report = estimate_error(&cb, 100, 5).unwrap();
        // Identity receivers decode perfectly at these sizes.
        assert_eq!(report.error_estimates[0].errors, 0);
        assert_eq!(report.error_estimates[1].errors, 0);
    }

    #[test]
    fn time_shared_codebook_round_trips_over_clean_segments() {
        let clean = |strong: usize| {
            let assign = if strong == 0 {
                [Terminal::Receiver(0), Terminal::Receiver(1), Terminal::Eavesdropper]
            } else {
                [Terminal::Receiver(1), Terminal::Receiver(0), Terminal::Eavesdropper]
            };
            BroadcastWiretapChannel::from_degraded_chain(
                &[Channel::identity(4), Channel::identity(4), Channel::constant(4)],
                &assign,
            )
            .unwrap()
        };
        // Splits of 1.0 keep the copied top layers message-free (identity
        // links cannot carry new information), making the decode exact.
        let spec = TimeSharedSpec {
            n: 8,
            alpha: 0.5,
            rates: [0.125, 0.125, 0.125],
            chain1: AuxiliaryChain::new(Distribution::uniform(4), vec![Channel::identity(4)]).unwrap(),
            chain2: AuxiliaryChain::new(Distribution::uniform(4), vec![Channel::identity(4)]).unwrap(),
            split1: Some(1.0),
            split2: Some(1.0),
            seed: 8,
            epsilon: 0.1,
        };
        let cb = build_time_shared(&spec, &clean(0), &clean(1)).unwrap();
        assert_eq!(cb.segments[0].len + cb.segments[1].len, 8);
        let report = estimate_error(&cb, 100, 5).unwrap();
        assert_eq!(report.error_estimates[0].errors, 0);
        assert_eq!(report.error_estimates[1].errors, 0);
    }

    #[test]
    fn lemma_check_blind_observation_has_zero_margin() {
        // Two uniform binary messages, constant Z.
        let joint = JointDistribution::new(vec![2, 2, 1], vec![0.25; 4]).unwrap();
        let report = check_lemma1(&joint, &[1.0, 1.0], 1e-9).unwrap();
        assert!(report.holds);
        assert_abs_diff_eq!(report.slack, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(report.worst_margin, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn lemma_check_rejects_dependent_messages() {
        // W1 = W0: not independent.
        let mut probs = vec![0.0; 8];
        probs[0] = 0.5; // (0,0,z=0)
        probs[6] = 0.5; // (1,1,z=0)
        let joint = JointDistribution::new(vec![2, 2, 2], probs).unwrap();
        assert!(matches!(
            check_lemma1(&joint, &[1.0, 1.0], 1e-9),
            Err(CodeSimError::InvalidJoint(_))
        ));
    }

    #[test]
    fn lemma_property_on_random_couplings() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..25 {
            // Uniform independent (W0, W1); Z coupled through a random
            // channel from (W0, W1).
            let zc = rng.gen_range(2..4);
            let mut probs = Vec::new();
            for _ in 0..4 {
                let mut row: Vec<f64> = (0..zc).map(|_| rng.gen::<f64>()).collect();
                let s: f64 = row.iter().sum();
                row.iter_mut().for_each(|p| *p *= 0.25 / s);
                probs.extend(row);
            }
            let joint = JointDistribution::new(vec![2, 2, zc], probs).unwrap();
            let report = check_lemma1(&joint, &[1.0, 1.0], 1e-9).unwrap();
            assert!(report.holds, "margin {}", report.worst_margin);
        }
    }
}
