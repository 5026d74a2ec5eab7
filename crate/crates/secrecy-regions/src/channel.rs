//! Finite-alphabet probability objects: distributions, discrete memoryless
//! channels, broadcast wiretap channels with an eavesdropper output, parallel
//! compositions, and Markov chains of auxiliary variables.
//!
//! Everything here is immutable after construction and all operations are
//! pure functions, so values can be shared freely across worker threads.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{plog2p, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("row {row} is not stochastic (deviation {deviation})")]
    NotStochastic { row: usize, deviation: f64 },
    #[error("negative entry {value} at row {row}, column {col}")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },
    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },
    #[error("invalid joint distribution: {context}")]
    InvalidJoint { context: String },
}

pub type Result<T> = std::result::Result<T, ChannelError>;

fn dim_err<T>(context: impl Into<String>) -> Result<T> {
    Err(ChannelError::DimensionMismatch {
        context: context.into(),
    })
}

/// Validates one probability vector: clamps tiny negatives, rejects larger
/// ones, and checks normalization against the row-sum tolerance.
fn validate_row<F: Real>(row: &mut [F], row_index: usize) -> Result<()> {
    for (col, v) in row.iter_mut().enumerate() {
        if *v < F::zero() {
            if -*v < F::entry_clamp_tol() {
                *v = F::zero();
            } else {
                return Err(ChannelError::NegativeEntry {
                    row: row_index,
                    col,
                    value: v.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
    }
    let sum: F = row.iter().copied().sum();
    let deviation = (sum - F::one()).abs();
    if deviation > F::row_sum_tol() {
        return Err(ChannelError::NotStochastic {
            row: row_index,
            deviation: deviation.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(())
}

/// A probability distribution over a finite alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution<F> {
    probs: Vec<F>,
}

impl<F: Real> Distribution<F> {
    pub fn new(mut probs: Vec<F>) -> Result<Self> {
        if probs.is_empty() {
            return dim_err("distribution must be non-empty");
        }
        validate_row(&mut probs, 0)?;
        Ok(Self { probs })
    }

    pub fn uniform(n: usize) -> Self {
        let p = F::one() / F::from_usize(n).unwrap();
        Self {
            probs: vec![p; n],
        }
    }

    /// Point mass on `index`.
    pub fn delta(n: usize, index: usize) -> Self {
        let mut probs = vec![F::zero(); n];
        probs[index] = F::one();
        Self { probs }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[F] {
        &self.probs
    }

    /// Shannon entropy in bits.
    pub fn entropy(&self) -> F {
        -self.probs.iter().map(|&p| plog2p(p)).sum::<F>()
    }
}

/// A discrete memoryless channel: a row-stochastic transition matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel<F> {
    matrix: Vec<Vec<F>>,
}

impl<F: Real> Channel<F> {
    /// Validates a transition matrix, clamping float noise in `(-1e-12, 0)`.
    pub fn new(mut matrix: Vec<Vec<F>>) -> Result<Self> {
        if matrix.is_empty() || matrix[0].is_empty() {
            return dim_err("channel matrix must be non-empty");
        }
        let cols = matrix[0].len();
        if matrix.iter().any(|r| r.len() != cols) {
            return dim_err("channel matrix must be rectangular");
        }
        for (i, row) in matrix.iter_mut().enumerate() {
            validate_row(row, i)?;
        }
        Ok(Self { matrix })
    }

    pub fn identity(n: usize) -> Self {
        let matrix = (0..n)
            .map(|i| {
                let mut row = vec![F::zero(); n];
                row[i] = F::one();
                row
            })
            .collect();
        Self { matrix }
    }

    /// Binary symmetric channel with crossover probability `p`.
    pub fn bsc(p: F) -> Self {
        let q = F::one() - p;
        Self {
            matrix: vec![vec![q, p], vec![p, q]],
        }
    }

    /// Binary erasure channel with erasure probability `e`; output symbol 2
    /// is the erasure.
    pub fn bec(e: F) -> Self {
        let q = F::one() - e;
        Self {
            matrix: vec![vec![q, F::zero(), e], vec![F::zero(), q, e]],
        }
    }

    /// Channel whose every input produces the same single output.
    pub fn constant(input_size: usize) -> Self {
        Self {
            matrix: vec![vec![F::one()]; input_size],
        }
    }

    pub fn input_size(&self) -> usize {
        self.matrix.len()
    }

    pub fn output_size(&self) -> usize {
        self.matrix[0].len()
    }

    pub fn matrix(&self) -> &[Vec<F>] {
        &self.matrix
    }

    pub fn row(&self, x: usize) -> &[F] {
        &self.matrix[x]
    }

    /// Matrix product `self · second`: feeds this channel's output into
    /// `second`. The physically degraded composition.
    pub fn cascade(&self, second: &Channel<F>) -> Result<Channel<F>> {
        if self.output_size() != second.input_size() {
            return dim_err(format!(
                "cascade: {} outputs vs {} inputs",
                self.output_size(),
                second.input_size()
            ));
        }
        let mut matrix = vec![vec![F::zero(); second.output_size()]; self.input_size()];
        for (x, out_row) in matrix.iter_mut().enumerate() {
            for y in 0..self.output_size() {
                let p = self.matrix[x][y];
                if p > F::zero() {
                    for (z, cell) in out_row.iter_mut().enumerate() {
                        *cell += p * second.matrix[y][z];
                    }
                }
            }
        }
        Channel::new(matrix)
    }

    /// Output distribution induced by `input`.
    pub fn output_distribution(&self, input: &Distribution<F>) -> Result<Distribution<F>> {
        if input.len() != self.input_size() {
            return dim_err("input length must match channel input size");
        }
        let mut out = vec![F::zero(); self.output_size()];
        for (x, &px) in input.probs().iter().enumerate() {
            for (y, o) in out.iter_mut().enumerate() {
                *o += px * self.matrix[x][y];
            }
        }
        Distribution::new(out)
    }

    /// `I(X;Y)` in bits for input distribution `input` through this channel,
    /// with `0·log 0 = 0`.
    pub fn mutual_information(&self, input: &Distribution<F>) -> Result<F> {
        if input.len() != self.input_size() {
            return dim_err("input length must match channel input size");
        }
        let out = self.output_distribution(input)?;
        let mut mi = F::zero();
        for (x, &px) in input.probs().iter().enumerate() {
            if px <= F::prob_floor() {
                continue;
            }
            for (y, &py) in out.probs().iter().enumerate() {
                let pyx = self.matrix[x][y];
                if pyx > F::prob_floor() && py > F::prob_floor() {
                    mi += px * pyx * (pyx / py).log2();
                }
            }
        }
        Ok(mi)
    }
}

/// A dense joint distribution over several finite axes, stored row-major in
/// the declared axis order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution<F> {
    dims: Vec<usize>,
    probs: Vec<F>,
}

impl<F: Real> JointDistribution<F> {
    pub fn new(dims: Vec<usize>, mut probs: Vec<F>) -> Result<Self> {
        let expect: usize = dims.iter().product();
        if dims.is_empty() || expect == 0 {
            return dim_err("joint distribution needs at least one non-empty axis");
        }
        if probs.len() != expect {
            return dim_err(format!(
                "joint has {} cells but axes require {}",
                probs.len(),
                expect
            ));
        }
        validate_row(&mut probs, 0).map_err(|e| ChannelError::InvalidJoint {
            context: e.to_string(),
        })?;
        Ok(Self { dims, probs })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn probs(&self) -> &[F] {
        &self.probs
    }

    pub fn num_axes(&self) -> usize {
        self.dims.len()
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1usize; self.dims.len()];
        for i in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.dims[i + 1];
        }
        strides
    }

    pub fn index_of(&self, coords: &[usize]) -> usize {
        let strides = self.strides();
        coords.iter().zip(&strides).map(|(c, s)| c * s).sum()
    }

    /// Marginal over the given axes (kept in the listed order).
    pub fn marginalize(&self, axes: &[usize]) -> Result<JointDistribution<F>> {
        for &a in axes {
            if a >= self.dims.len() {
                return Err(ChannelError::IndexOutOfRange {
                    index: a,
                    limit: self.dims.len(),
                });
            }
        }
        let out_dims: Vec<usize> = axes.iter().map(|&a| self.dims[a]).collect();
        let out_len: usize = out_dims.iter().product();
        let mut out = vec![F::zero(); out_len];
        let strides = self.strides();
        let mut coords = vec![0usize; self.dims.len()];
        for (idx, &p) in self.probs.iter().enumerate() {
            if p == F::zero() {
                continue;
            }
            let mut rem = idx;
            for (a, &s) in strides.iter().enumerate() {
                coords[a] = rem / s;
                rem %= s;
            }
            let mut oi = 0usize;
            for &a in axes {
                oi = oi * self.dims[a] + coords[a];
            }
            out[oi] += p;
        }
        Ok(JointDistribution {
            dims: out_dims,
            probs: out,
        })
    }

    /// Conditional mutual information `I(A;B|C)` in bits, where `A`, `B` and
    /// `C` are disjoint groups of axes (`C` may be empty, giving `I(A;B)`).
    pub fn conditional_mutual_information(
        &self,
        a_axes: &[usize],
        b_axes: &[usize],
        c_axes: &[usize],
    ) -> Result<F> {
        for group in [a_axes, b_axes] {
            if group.is_empty() {
                return dim_err("A and B axis groups must be non-empty");
            }
        }
        let mut all: Vec<usize> = Vec::new();
        all.extend_from_slice(a_axes);
        all.extend_from_slice(b_axes);
        all.extend_from_slice(c_axes);
        let mut sorted = all.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != all.len() {
            return dim_err("axis groups must be disjoint");
        }

        let abc = self.marginalize(&all)?;
        let na = a_axes.len();
        let nb = b_axes.len();
        // Within `abc`, axes are ordered (A.., B.., C..).
        let a_idx: Vec<usize> = (0..na).collect();
        let b_idx: Vec<usize> = (na..na + nb).collect();
        let c_idx: Vec<usize> = (na + nb..all.len()).collect();
        let ac = abc.marginalize(&a_idx.iter().chain(&c_idx).copied().collect::<Vec<_>>())?;
        let bc = abc.marginalize(&b_idx.iter().chain(&c_idx).copied().collect::<Vec<_>>())?;
        let c = abc.marginalize(&c_idx)?;

        let strides = abc.strides();
        let mut coords = vec![0usize; abc.dims.len()];
        let mut mi = F::zero();
        for (idx, &p_abc) in abc.probs.iter().enumerate() {
            if p_abc <= F::prob_floor() {
                continue;
            }
            let mut rem = idx;
            for (a, &s) in strides.iter().enumerate() {
                coords[a] = rem / s;
                rem %= s;
            }
            let mut ac_i = 0usize;
            for &a in a_idx.iter().chain(&c_idx) {
                ac_i = ac_i * abc.dims[a] + coords[a];
            }
            let mut bc_i = 0usize;
            for &a in b_idx.iter().chain(&c_idx) {
                bc_i = bc_i * abc.dims[a] + coords[a];
            }
            let mut c_i = 0usize;
            for &a in &c_idx {
                c_i = c_i * abc.dims[a] + coords[a];
            }
            let p_ac = ac.probs[ac_i];
            let p_bc = bc.probs[bc_i];
            let p_c = if c_idx.is_empty() { F::one() } else { c.probs[c_i] };
            // p(a,b,c) * log2( p(a,b,c) p(c) / (p(a,c) p(b,c)) )
            mi += p_abc * ((p_abc * p_c) / (p_ac * p_bc)).log2();
        }
        Ok(mi)
    }

    /// `H(axes)` in bits of the marginal over the listed axes.
    pub fn entropy_of(&self, axes: &[usize]) -> Result<F> {
        let m = self.marginalize(axes)?;
        Ok(-m.probs.iter().map(|&p| plog2p(p)).sum::<F>())
    }

    /// `H(A | B)` in bits with axis groups as in
    /// [`conditional_mutual_information`].
    pub fn conditional_entropy(&self, a_axes: &[usize], b_axes: &[usize]) -> Result<F> {
        let mut all: Vec<usize> = a_axes.to_vec();
        all.extend_from_slice(b_axes);
        Ok(self.entropy_of(&all)? - self.entropy_of(b_axes)?)
    }
}

/// Which output terminal of a broadcast wiretap channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Terminal {
    Receiver(usize),
    Eavesdropper,
}

/// A memoryless broadcast channel with `K` legitimate receivers and one
/// eavesdropper: `p(y_1,...,y_K,z | x)` with the output tuple flattened
/// row-major as `(y_1,...,y_K,z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BroadcastWiretapChannel<F> {
    input_size: usize,
    receiver_alphabets: Vec<usize>,
    eavesdropper_alphabet: usize,
    joint: Vec<Vec<F>>,
}

impl<F: Real> BroadcastWiretapChannel<F> {
    pub fn new(
        input_size: usize,
        receiver_alphabets: Vec<usize>,
        eavesdropper_alphabet: usize,
        mut joint: Vec<Vec<F>>,
    ) -> Result<Self> {
        if receiver_alphabets.is_empty() {
            return dim_err("need at least one receiver");
        }
        if input_size == 0 || eavesdropper_alphabet == 0 || receiver_alphabets.contains(&0) {
            return dim_err("alphabet sizes must be positive");
        }
        let cols: usize = receiver_alphabets.iter().product::<usize>() * eavesdropper_alphabet;
        if joint.len() != input_size || joint.iter().any(|r| r.len() != cols) {
            return dim_err(format!(
                "joint must be {} x {} for the declared alphabets",
                input_size, cols
            ));
        }
        for (i, row) in joint.iter_mut().enumerate() {
            validate_row(row, i)?;
        }
        Ok(Self {
            input_size,
            receiver_alphabets,
            eavesdropper_alphabet,
            joint,
        })
    }

    /// Builds the joint from conditionally independent factors
    /// `p(y_1|x)...p(y_K|x)p(z|x)`.
    pub fn from_conditionals(receivers: &[Channel<F>], eavesdropper: &Channel<F>) -> Result<Self> {
        if receivers.is_empty() {
            return dim_err("need at least one receiver");
        }
        let input_size = eavesdropper.input_size();
        if receivers.iter().any(|c| c.input_size() != input_size) {
            return dim_err("all factors must share the input alphabet");
        }
        let receiver_alphabets: Vec<usize> = receivers.iter().map(|c| c.output_size()).collect();
        let ez = eavesdropper.output_size();
        let cols: usize = receiver_alphabets.iter().product::<usize>() * ez;
        let mut joint = vec![vec![F::zero(); cols]; input_size];
        for (x, row) in joint.iter_mut().enumerate() {
            for (col, cell) in row.iter_mut().enumerate() {
                let mut rem = col;
                let z = rem % ez;
                rem /= ez;
                let mut p = eavesdropper.row(x)[z];
                for k in (0..receivers.len()).rev() {
                    let yk = rem % receiver_alphabets[k];
                    rem /= receiver_alphabets[k];
                    p *= receivers[k].row(x)[yk];
                }
                *cell = p;
            }
        }
        Self::new(input_size, receiver_alphabets, ez, joint)
    }

    /// Builds the joint from a physically degraded chain
    /// `X -> T_0 -> T_1 -> ... -> T_m`, where `links[0]` is `p(t_0|x)` and
    /// `links[i]` is `p(t_i|t_{i-1})`. `assign[i]` states which output tuple
    /// slot terminal `i` occupies; every receiver and the eavesdropper must
    /// appear exactly once.
    pub fn from_degraded_chain(links: &[Channel<F>], assign: &[Terminal]) -> Result<Self> {
        if links.is_empty() || links.len() != assign.len() {
            return dim_err("need one terminal assignment per chain link");
        }
        for w in links.windows(2) {
            if w[0].output_size() != w[1].input_size() {
                return dim_err("chain link dimensions are incompatible");
            }
        }
        let k = links.len() - 1;
        let mut receiver_alphabets = vec![0usize; k];
        let mut eavesdropper_alphabet = 0usize;
        for (i, t) in assign.iter().enumerate() {
            match *t {
                Terminal::Receiver(r) => {
                    if r >= k || receiver_alphabets[r] != 0 {
                        return dim_err("receiver assignment invalid or repeated");
                    }
                    receiver_alphabets[r] = links[i].output_size();
                }
                Terminal::Eavesdropper => {
                    if eavesdropper_alphabet != 0 {
                        return dim_err("eavesdropper assigned twice");
                    }
                    eavesdropper_alphabet = links[i].output_size();
                }
            }
        }
        if eavesdropper_alphabet == 0 {
            return dim_err("eavesdropper must be assigned");
        }
        let input_size = links[0].input_size();
        let cols: usize = receiver_alphabets.iter().product::<usize>() * eavesdropper_alphabet;
        let mut joint = vec![vec![F::zero(); cols]; input_size];
        // Enumerate chain terminal tuples recursively.
        let mut terminal_values = vec![0usize; links.len()];
        for x in 0..input_size {
            enumerate_chain(
                links,
                0,
                x,
                F::one(),
                &mut terminal_values,
                &mut |vals, p| {
                    let mut col = 0usize;
                    for (r, &size) in receiver_alphabets.iter().enumerate() {
                        let i = assign
                            .iter()
                            .position(|t| *t == Terminal::Receiver(r))
                            .unwrap();
                        col = col * size + vals[i];
                    }
                    let ei = assign
                        .iter()
                        .position(|t| *t == Terminal::Eavesdropper)
                        .unwrap();
                    col = col * eavesdropper_alphabet + vals[ei];
                    joint[x][col] += p;
                },
            );
        }
        Self::new(input_size, receiver_alphabets, eavesdropper_alphabet, joint)
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn num_receivers(&self) -> usize {
        self.receiver_alphabets.len()
    }

    pub fn receiver_alphabets(&self) -> &[usize] {
        &self.receiver_alphabets
    }

    pub fn eavesdropper_alphabet(&self) -> usize {
        self.eavesdropper_alphabet
    }

    pub fn joint(&self) -> &[Vec<F>] {
        &self.joint
    }

    pub fn output_dims(&self) -> Vec<usize> {
        let mut dims = self.receiver_alphabets.clone();
        dims.push(self.eavesdropper_alphabet);
        dims
    }

    /// Extracts `p(y_k|x)` or `p(z|x)` by summing out the other outputs.
    pub fn marginal_channel(&self, which: Terminal) -> Result<Channel<F>> {
        let dims = self.output_dims();
        let pos = match which {
            Terminal::Receiver(r) => {
                if r >= self.num_receivers() {
                    return Err(ChannelError::IndexOutOfRange {
                        index: r,
                        limit: self.num_receivers(),
                    });
                }
                r
            }
            Terminal::Eavesdropper => dims.len() - 1,
        };
        let size = dims[pos];
        let mut matrix = vec![vec![F::zero(); size]; self.input_size];
        for (x, row) in self.joint.iter().enumerate() {
            for (col, &p) in row.iter().enumerate() {
                if p == F::zero() {
                    continue;
                }
                let mut rem = col;
                let mut sym = 0usize;
                for (a, &d) in dims.iter().enumerate().rev() {
                    let v = rem % d;
                    rem /= d;
                    if a == pos {
                        sym = v;
                    }
                }
                matrix[x][sym] += p;
            }
        }
        Channel::new(matrix)
    }

    /// Joint over `(X, Y_1, ..., Y_K, Z)` under input distribution `input`.
    pub fn joint_with_input(&self, input: &Distribution<F>) -> Result<JointDistribution<F>> {
        if input.len() != self.input_size {
            return dim_err("input length must match channel input size");
        }
        let mut dims = vec![self.input_size];
        dims.extend(self.output_dims());
        let cols = self.joint[0].len();
        let mut probs = Vec::with_capacity(self.input_size * cols);
        for (x, row) in self.joint.iter().enumerate() {
            let px = input.probs()[x];
            probs.extend(row.iter().map(|&p| px * p));
        }
        JointDistribution::new(dims, probs)
    }
}

fn enumerate_chain<F: Real>(
    links: &[Channel<F>],
    depth: usize,
    parent: usize,
    p: F,
    vals: &mut Vec<usize>,
    emit: &mut impl FnMut(&[usize], F),
) {
    if depth == links.len() {
        emit(vals, p);
        return;
    }
    for t in 0..links[depth].output_size() {
        let pt = links[depth].row(parent)[t];
        if pt == F::zero() {
            continue;
        }
        vals[depth] = t;
        enumerate_chain(links, depth + 1, t, p * pt, vals, emit);
    }
}

/// An ordered list of independent broadcast wiretap sub-channels sharing the
/// same number of receivers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelChannel<F> {
    subchannels: Vec<BroadcastWiretapChannel<F>>,
}

impl<F: Real> ParallelChannel<F> {
    pub fn new(subchannels: Vec<BroadcastWiretapChannel<F>>) -> Result<Self> {
        if subchannels.is_empty() {
            return dim_err("need at least one sub-channel");
        }
        let k = subchannels[0].num_receivers();
        if subchannels.iter().any(|c| c.num_receivers() != k) {
            return dim_err("all sub-channels must have the same receiver count");
        }
        Ok(Self { subchannels })
    }

    pub fn subchannels(&self) -> &[BroadcastWiretapChannel<F>] {
        &self.subchannels
    }

    pub fn num_subchannels(&self) -> usize {
        self.subchannels.len()
    }

    pub fn num_receivers(&self) -> usize {
        self.subchannels[0].num_receivers()
    }
}

/// A Markov chain of auxiliary variables `U_1 -> U_2 -> ... -> X`: the root
/// is `p(u_1)` and each link is a conditional `p(u_{j+1}|u_j)`, the last link
/// producing `X`. With no links the chain is just `p(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxiliaryChain<F> {
    root: Distribution<F>,
    links: Vec<Channel<F>>,
}

impl<F: Real> AuxiliaryChain<F> {
    pub fn new(root: Distribution<F>, links: Vec<Channel<F>>) -> Result<Self> {
        let mut size = root.len();
        for link in &links {
            if link.input_size() != size {
                return dim_err("chain link dimensions are incompatible");
            }
            size = link.output_size();
        }
        Ok(Self { root, links })
    }

    /// Number of chained variables, including `X` itself.
    pub fn num_vars(&self) -> usize {
        self.links.len() + 1
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        let mut out = vec![self.root.len()];
        out.extend(self.links.iter().map(|l| l.output_size()));
        out
    }

    pub fn x_cardinality(&self) -> usize {
        *self.cardinalities().last().unwrap()
    }

    pub fn root(&self) -> &Distribution<F> {
        &self.root
    }

    pub fn links(&self) -> &[Channel<F>] {
        &self.links
    }

    /// Composes all links into the marginal `p(x)`.
    pub fn x_marginal(&self) -> Result<Distribution<F>> {
        let mut d = self.root.clone();
        for link in &self.links {
            d = link.output_distribution(&d)?;
        }
        Ok(d)
    }

    /// Full joint over `(U_1,...,U_{m-1}, X, Y_1,...,Y_K, Z)` where `m` is
    /// [`Self::num_vars`]. Marginalizing back to `(Y,Z)` given `X` reproduces
    /// the broadcast channel exactly.
    pub fn joint_with_channel(
        &self,
        bc: &BroadcastWiretapChannel<F>,
    ) -> Result<JointDistribution<F>> {
        if self.x_cardinality() != bc.input_size() {
            return dim_err("chain X cardinality must match channel input size");
        }
        let chain_dims = self.cardinalities();
        let out_dims = bc.output_dims();
        let mut dims = chain_dims.clone();
        dims.extend(out_dims.iter().copied());
        let total: usize = dims.iter().product();
        let mut probs = vec![F::zero(); total];
        let cols = bc.joint()[0].len();

        let mut vals = vec![0usize; self.num_vars()];
        let stack = |vals: &[usize], p_chain: F, probs: &mut Vec<F>| {
            let x = *vals.last().unwrap();
            let mut base = 0usize;
            for (i, &d) in chain_dims.iter().enumerate() {
                base = base * d + vals[i];
            }
            let base = base * cols;
            for (col, &pc) in bc.joint()[x].iter().enumerate() {
                if pc > F::zero() {
                    probs[base + col] += p_chain * pc;
                }
            }
        };
        enumerate_chain_with_root(
            &self.root,
            &self.links,
            &mut vals,
            &mut |vals, p| stack(vals, p, &mut probs),
        );
        JointDistribution::new(dims, probs)
    }
}

fn enumerate_chain_with_root<F: Real>(
    root: &Distribution<F>,
    links: &[Channel<F>],
    vals: &mut Vec<usize>,
    emit: &mut impl FnMut(&[usize], F),
) {
    for (u, &pu) in root.probs().iter().enumerate() {
        if pu == F::zero() {
            continue;
        }
        vals[0] = u;
        descend(links, 0, u, pu, vals, emit);
    }
}

fn descend<F: Real>(
    links: &[Channel<F>],
    depth: usize,
    parent: usize,
    p: F,
    vals: &mut Vec<usize>,
    emit: &mut impl FnMut(&[usize], F),
) {
    if depth == links.len() {
        emit(vals, p);
        return;
    }
    for t in 0..links[depth].output_size() {
        let pt = links[depth].row(parent)[t];
        if pt == F::zero() {
            continue;
        }
        vals[depth + 1] = t;
        descend(links, depth + 1, t, p * pt, vals, emit);
    }
}
