//! Layer set used by the sketch and refinement networks.

use rand::Rng;

use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{arg_err, Result};

const LN_EPS: f64 = 1e-5;

/// Affine map `x·W + b` applied row-wise.
#[derive(Clone, Debug)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let w = store.add_glorot(format!("{name}.w"), in_dim, out_dim, rng);
        let b = store.add(format!("{name}.b"), Tensor::zeros(&[out_dim]));
        Self {
            w,
            b,
            in_dim,
            out_dim,
        }
    }

    pub fn forward<'t>(&self, tape: &'t Tape, p: &ParamStore, x: Var<'t>) -> Result<Var<'t>> {
        x.matmul(tape.param(p, self.w))?
            .add_row(tape.param(p, self.b))
    }
}

/// Row-wise layer normalization with learned gain and bias.
#[derive(Clone, Debug)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize) -> Self {
        Self {
            gamma: store.add(format!("{name}.gamma"), Tensor::filled(&[dim], 1.0)),
            beta: store.add(format!("{name}.beta"), Tensor::zeros(&[dim])),
        }
    }

    pub fn forward<'t>(&self, tape: &'t Tape, p: &ParamStore, x: Var<'t>) -> Result<Var<'t>> {
        x.layer_norm(LN_EPS)
            .mul_row(tape.param(p, self.gamma))?
            .add_row(tape.param(p, self.beta))
    }
}

/// Multi-head attention with query/key/value/output projections.
#[derive(Clone, Debug)]
pub struct MultiHeadAttention {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
    pub heads: usize,
}

impl MultiHeadAttention {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        dim: usize,
        heads: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if heads == 0 || !dim.is_multiple_of(heads) {
            return arg_err(format!("width {dim} not divisible by {heads} heads"));
        }
        Ok(Self {
            q: Linear::new(store, &format!("{name}.q"), dim, dim, rng),
            k: Linear::new(store, &format!("{name}.k"), dim, dim, rng),
            v: Linear::new(store, &format!("{name}.v"), dim, dim, rng),
            o: Linear::new(store, &format!("{name}.o"), dim, dim, rng),
            heads,
        })
    }

    pub fn forward<'t>(
        &self,
        tape: &'t Tape,
        p: &ParamStore,
        queries: Var<'t>,
        memory: Var<'t>,
    ) -> Result<Var<'t>> {
        let q = self.q.forward(tape, p, queries)?;
        let k = self.k.forward(tape, p, memory)?;
        let v = self.v.forward(tape, p, memory)?;
        let mixed = q.attend(k, v, self.heads)?;
        self.o.forward(tape, p, mixed)
    }
}

/// Two-layer GELU feed-forward block.
#[derive(Clone, Debug)]
pub struct FeedForward {
    pub up: Linear,
    pub down: Linear,
}

impl FeedForward {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        dim: usize,
        hidden: usize,
        rng: &mut impl Rng,
    ) -> Self {
        Self {
            up: Linear::new(store, &format!("{name}.up"), dim, hidden, rng),
            down: Linear::new(store, &format!("{name}.down"), hidden, dim, rng),
        }
    }

    pub fn forward<'t>(&self, tape: &'t Tape, p: &ParamStore, x: Var<'t>) -> Result<Var<'t>> {
        let h = self.up.forward(tape, p, x)?.gelu();
        self.down.forward(tape, p, h)
    }
}

/// Learned table of row vectors (positions, part queries).
#[derive(Clone, Debug)]
pub struct Embedding {
    pub table: ParamId,
    pub rows: usize,
    pub dim: usize,
}

impl Embedding {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        rows: usize,
        dim: usize,
        std: f64,
        rng: &mut impl Rng,
    ) -> Self {
        Self {
            table: store.add_normal(name, &[rows, dim], std, rng),
            rows,
            dim,
        }
    }

    pub fn all<'t>(&self, tape: &'t Tape, p: &ParamStore) -> Var<'t> {
        tape.param(p, self.table)
    }
}

/// ReLU multilayer perceptron; no activation after the last layer.
#[derive(Clone, Debug)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    pub fn new(store: &mut ParamStore, name: &str, dims: &[usize], rng: &mut impl Rng) -> Self {
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(store, &format!("{name}.{i}"), w[0], w[1], rng))
            .collect();
        Self { layers }
    }

    pub fn forward<'t>(&self, tape: &'t Tape, p: &ParamStore, x: Var<'t>) -> Result<Var<'t>> {
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            if i > 0 {
                h = h.relu();
            }
            h = layer.forward(tape, p, h)?;
        }
        Ok(h)
    }
}

/// MLP followed by a logistic output, one score per row.
#[derive(Clone, Debug)]
pub struct SigmoidHead {
    pub mlp: Mlp,
}

impl SigmoidHead {
    pub fn new(store: &mut ParamStore, name: &str, dims: &[usize], rng: &mut impl Rng) -> Self {
        assert_eq!(dims.last(), Some(&1), "sigmoid head must end in width 1");
        Self {
            mlp: Mlp::new(store, name, dims, rng),
        }
    }

    /// Returns a `[n]` vector of probabilities.
    pub fn forward<'t>(&self, tape: &'t Tape, p: &ParamStore, x: Var<'t>) -> Result<Var<'t>> {
        let logits = self.mlp.forward(tape, p, x)?;
        let n = logits.value().rows();
        logits.sigmoid().reshape(vec![n])
    }
}

/// Pre-norm transformer encoder block (self-attention + feed-forward).
#[derive(Clone, Debug)]
pub struct EncoderBlock {
    pub ln1: LayerNorm,
    pub attn: MultiHeadAttention,
    pub ln2: LayerNorm,
    pub ffn: FeedForward,
}

impl EncoderBlock {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        dim: usize,
        heads: usize,
        hidden: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        Ok(Self {
            ln1: LayerNorm::new(store, &format!("{name}.ln1"), dim),
            attn: MultiHeadAttention::new(store, &format!("{name}.attn"), dim, heads, rng)?,
            ln2: LayerNorm::new(store, &format!("{name}.ln2"), dim),
            ffn: FeedForward::new(store, &format!("{name}.ffn"), dim, hidden, rng),
        })
    }

    pub fn forward<'t>(&self, tape: &'t Tape, p: &ParamStore, x: Var<'t>) -> Result<Var<'t>> {
        let h = self.ln1.forward(tape, p, x)?;
        let x = x.add(self.attn.forward(tape, p, h, h)?)?;
        let h = self.ln2.forward(tape, p, x)?;
        x.add(self.ffn.forward(tape, p, h)?)
    }
}

/// Pre-norm transformer decoder block: self-attention over queries,
/// cross-attention into a memory sequence, then feed-forward.
#[derive(Clone, Debug)]
pub struct DecoderBlock {
    pub ln1: LayerNorm,
    pub self_attn: MultiHeadAttention,
    pub ln2: LayerNorm,
    pub cross_attn: MultiHeadAttention,
    pub ln3: LayerNorm,
    pub ffn: FeedForward,
}

impl DecoderBlock {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        dim: usize,
        heads: usize,
        hidden: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        Ok(Self {
            ln1: LayerNorm::new(store, &format!("{name}.ln1"), dim),
            self_attn: MultiHeadAttention::new(store, &format!("{name}.self"), dim, heads, rng)?,
            ln2: LayerNorm::new(store, &format!("{name}.ln2"), dim),
            cross_attn: MultiHeadAttention::new(store, &format!("{name}.cross"), dim, heads, rng)?,
            ln3: LayerNorm::new(store, &format!("{name}.ln3"), dim),
            ffn: FeedForward::new(store, &format!("{name}.ffn"), dim, hidden, rng),
        })
    }

    pub fn forward<'t>(
        &self,
        tape: &'t Tape,
        p: &ParamStore,
        x: Var<'t>,
        memory: Var<'t>,
    ) -> Result<Var<'t>> {
        let h = self.ln1.forward(tape, p, x)?;
        let x = x.add(self.self_attn.forward(tape, p, h, h)?)?;
        let h = self.ln2.forward(tape, p, x)?;
        let x = x.add(self.cross_attn.forward(tape, p, h, memory)?)?;
        let h = self.ln3.forward(tape, p, x)?;
        x.add(self.ffn.forward(tape, p, h)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity_attention(dim: usize, heads: usize) -> (ParamStore, MultiHeadAttention) {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mha = MultiHeadAttention::new(&mut store, "a", dim, heads, &mut rng).unwrap();
        let mut eye = Tensor::zeros(&[dim, dim]);
        for i in 0..dim {
            eye.data_mut()[i * dim + i] = 1.0;
        }
        for lin in [&mha.q, &mha.k, &mha.v, &mha.o] {
            *store.get_mut(lin.w) = eye.clone();
        }
        (store, mha)
    }

    #[test]
    fn single_key_attention_returns_value() {
        let (store, mha) = identity_attention(4, 2);
        let tape = Tape::new();
        let q = tape.constant(Tensor::matrix(1, 4, vec![0.1, 0.2, 0.3, 0.4]).unwrap());
        let v = tape.constant(Tensor::matrix(1, 4, vec![5.0, -1.0, 2.0, 7.0]).unwrap());
        let out = mha.forward(&tape, &store, q, v).unwrap().value();
        for (a, b) in out.data().iter().zip([5.0, -1.0, 2.0, 7.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_logits_average_values() {
        // identity projections: keys = values, so make both rows score equally
        // against a zero query.
        let (store, mha) = identity_attention(2, 1);
        let tape = Tape::new();
        let q = tape.constant(Tensor::matrix(1, 2, vec![0.0, 0.0]).unwrap());
        let kv = tape.constant(Tensor::matrix(2, 2, vec![1.0, 3.0, 5.0, -1.0]).unwrap());
        let out = mha.forward(&tape, &store, q, kv).unwrap().value();
        assert!((out.data()[0] - 3.0).abs() < 1e-12);
        assert!((out.data()[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn attention_shape_contract() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mha = MultiHeadAttention::new(&mut store, "a", 64, 4, &mut rng).unwrap();
        let tape = Tape::new();
        let x = tape.constant(Tensor::filled(&[256, 64], 0.1));
        let out = mha.forward(&tape, &store, x, x).unwrap();
        assert_eq!(out.shape(), vec![256, 64]);
    }

    #[test]
    fn attention_rejects_bad_heads() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(MultiHeadAttention::new(&mut store, "a", 10, 4, &mut rng).is_err());
    }
}
