//! The routing policy: a light encoder, a heavy decoder of stacked
//! attention layers and a multi-expert head selected by a hard gate on the
//! instance's constraint tightness. A POMO-style decoder (one attention
//! glimpse plus a clipped compatibility head per expert) is also provided.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use vrptight_core::{Instance, ProblemKind};

use crate::checkpoint::Checkpoint;
use crate::decode::DecoderState;
use crate::error::{domain, NnError, Result};
use crate::tape::{concat_cols, concat_rows, Tape, Var};
use crate::tensor::{ParamId, ParamStore, Tensor};

/// Per-node input features: x, y, demand / C, e / l0, l / l0, s / l0.
pub const NODE_FEATURES: usize = 6;
/// Depot input features: x, y.
pub const DEPOT_FEATURES: usize = 2;
/// Scalar context features: remaining load / C, tightness, time / l0.
pub const CONTEXT_SCALARS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderKind {
    Heavy,
    Pomo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub decoder: DecoderKind,
    pub embed_dim: usize,
    pub ff_dim: usize,
    pub heads: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub experts: usize,
    pub expert_depth: usize,
    pub tightness_min: f64,
    pub tightness_max: f64,
    pub logit_clip: f64,
}

impl ModelConfig {
    /// Desk-scale heavy decoder used by the tests and experiments.
    pub fn desk() -> Self {
        ModelConfig {
            decoder: DecoderKind::Heavy,
            embed_dim: 64,
            ff_dim: 128,
            heads: 4,
            encoder_layers: 1,
            decoder_layers: 3,
            experts: 3,
            expert_depth: 2,
            tightness_min: 10.0,
            tightness_max: 500.0,
            logit_clip: 10.0,
        }
    }

    /// Full-scale dimensions.
    pub fn paper() -> Self {
        ModelConfig {
            embed_dim: 192,
            ff_dim: 512,
            heads: 12,
            decoder_layers: 6,
            expert_depth: 3,
            ..Self::desk()
        }
    }

    /// Desk-scale POMO variant for time windows (tightness = alpha).
    pub fn pomo_desk() -> Self {
        ModelConfig {
            decoder: DecoderKind::Pomo,
            encoder_layers: 3,
            decoder_layers: 0,
            expert_depth: 1,
            tightness_min: 0.0,
            tightness_max: 3.0,
            ..Self::desk()
        }
    }

    /// POMO dimensions from its original description.
    pub fn pomo_paper() -> Self {
        ModelConfig { embed_dim: 128, ff_dim: 512, heads: 8, encoder_layers: 6, ..Self::pomo_desk() }
    }

    pub fn preset(name: &str, decoder: DecoderKind) -> Result<Self> {
        match (name, decoder) {
            ("desk", DecoderKind::Heavy) => Ok(Self::desk()),
            ("paper", DecoderKind::Heavy) => Ok(Self::paper()),
            ("desk", DecoderKind::Pomo) => Ok(Self::pomo_desk()),
            ("paper", DecoderKind::Pomo) => Ok(Self::pomo_paper()),
            (other, _) => Err(domain(format!("unknown preset `{other}` (expected desk or paper)"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.heads == 0 || self.embed_dim % self.heads != 0 {
            return Err(domain(format!("embed_dim {} not divisible by {} heads", self.embed_dim, self.heads)));
        }
        if self.experts == 0 || self.expert_depth == 0 || self.ff_dim == 0 {
            return Err(domain("experts, expert_depth and ff_dim must be positive"));
        }
        if !(self.tightness_min < self.tightness_max) {
            return Err(domain("tightness_min must be below tightness_max"));
        }
        if !(self.logit_clip > 0.0) {
            return Err(domain("logit_clip must be positive"));
        }
        Ok(())
    }

    /// Gate interval width.
    pub fn beta(&self) -> f64 {
        (self.tightness_max - self.tightness_min) / self.experts as f64
    }
}

/// One hot gate: expert `i` (0-based) owns tightness values with
/// `i * beta <= c - c_min < (i + 1) * beta`; `c_max` belongs to the last.
pub fn gate(c_k: f64, config: &ModelConfig) -> Result<(usize, Vec<f64>)> {
    let (lo, hi) = (config.tightness_min, config.tightness_max);
    if !(c_k >= lo && c_k <= hi) {
        return Err(domain(format!("tightness {c_k} outside [{lo}, {hi}]")));
    }
    let i = (((c_k - lo) / config.beta()).floor() as usize).min(config.experts - 1);
    let mut one_hot = vec![0.0; config.experts];
    one_hot[i] = 1.0;
    Ok((i, one_hot))
}

/// Linear projection parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    fn new(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (fan_in as f64).sqrt();
        Linear {
            w: store.add(format!("{name}.w"), Tensor::uniform(fan_in, fan_out, bound, rng)),
            b: store.add(format!("{name}.b"), Tensor::uniform(1, fan_out, bound, rng)),
        }
    }

    pub fn forward<'t>(&self, tape: &'t Tape, store: &ParamStore, x: Var<'t>) -> Result<Var<'t>> {
        x.matmul(tape.param(store, self.w))?.add_row(tape.param(store, self.b))
    }
}

/// Multi-head attention projections; the per-head matrices are column
/// blocks of `wq`, `wk` and `wv`.
#[derive(Debug, Clone, PartialEq)]
pub struct MhaParams {
    pub wq: ParamId,
    pub wk: ParamId,
    pub wv: ParamId,
    pub wo: ParamId,
}

impl MhaParams {
    fn new(store: &mut ParamStore, name: &str, q_in: usize, d: usize, rng: &mut ChaCha8Rng) -> Self {
        let bq = 1.0 / (q_in as f64).sqrt();
        let b = 1.0 / (d as f64).sqrt();
        MhaParams {
            wq: store.add(format!("{name}.wq"), Tensor::uniform(q_in, d, bq, rng)),
            wk: store.add(format!("{name}.wk"), Tensor::uniform(d, d, b, rng)),
            wv: store.add(format!("{name}.wv"), Tensor::uniform(d, d, b, rng)),
            wo: store.add(format!("{name}.wo"), Tensor::uniform(d, d, b, rng)),
        }
    }
}

/// `Concat(head_1..head_h) W_O` with
/// `head_i = softmax(X W_Q^i (Y W_K^i)^T / sqrt(d)) Y W_V^i`.
pub fn mha<'t>(tape: &'t Tape, store: &ParamStore, p: &MhaParams, heads: usize, x: Var<'t>, y: Var<'t>) -> Result<Var<'t>> {
    let d = store.get(p.wk).cols();
    let dk = d / heads;
    let q = x.matmul(tape.param(store, p.wq))?;
    let k = y.matmul(tape.param(store, p.wk))?;
    let v = y.matmul(tape.param(store, p.wv))?;
    let scale = 1.0 / (d as f64).sqrt();
    let mut outs = Vec::with_capacity(heads);
    for h in 0..heads {
        let (qh, kh, vh) = (q.slice_cols(h * dk, dk)?, k.slice_cols(h * dk, dk)?, v.slice_cols(h * dk, dk)?);
        let attn = qh.matmul_bt(kh)?.scale(scale).softmax_rows()?;
        outs.push(attn.matmul(vh)?);
    }
    let cat = if heads == 1 { outs[0] } else { concat_cols(&outs)? };
    cat.matmul(tape.param(store, p.wo))
}

/// Normalisation with learnable per-feature scale and shift.
#[derive(Debug, Clone, PartialEq)]
pub struct Norm {
    pub gain: ParamId,
    pub shift: ParamId,
}

impl Norm {
    fn new(store: &mut ParamStore, name: &str, d: usize) -> Self {
        Norm {
            gain: store.add(format!("{name}.gain"), Tensor::filled(1, d, 1.0)),
            shift: store.add(format!("{name}.shift"), Tensor::zeros(1, d)),
        }
    }

    fn forward<'t>(&self, tape: &'t Tape, store: &ParamStore, x: Var<'t>) -> Result<Var<'t>> {
        x.standardize().mul_row(tape.param(store, self.gain))?.add_row(tape.param(store, self.shift))
    }
}

/// Position-wise `max(0, X W1 + b1) W2 + b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedForward {
    pub l1: Linear,
    pub l2: Linear,
}

impl FeedForward {
    fn new(store: &mut ParamStore, name: &str, d: usize, ff: usize, rng: &mut ChaCha8Rng) -> Self {
        FeedForward {
            l1: Linear::new(store, &format!("{name}.ff1"), d, ff, rng),
            l2: Linear::new(store, &format!("{name}.ff2"), ff, d, rng),
        }
    }

    pub fn forward<'t>(&self, tape: &'t Tape, store: &ParamStore, x: Var<'t>) -> Result<Var<'t>> {
        let h = self.l1.forward(tape, store, x)?.relu();
        self.l2.forward(tape, store, h)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionLayerParams {
    pub mha: MhaParams,
    pub norm1: Norm,
    pub ff: FeedForward,
    pub norm2: Norm,
}

impl AttentionLayerParams {
    fn new(store: &mut ParamStore, name: &str, d: usize, ff: usize, rng: &mut ChaCha8Rng) -> Self {
        AttentionLayerParams {
            mha: MhaParams::new(store, &format!("{name}.mha"), d, d, rng),
            norm1: Norm::new(store, &format!("{name}.norm1"), d),
            ff: FeedForward::new(store, name, d, ff, rng),
            norm2: Norm::new(store, &format!("{name}.norm2"), d),
        }
    }
}

/// `X' = Norm(MHA(X, Y) + X)`, then `Norm(FF(X') + X')`.
pub fn attention_layer<'t>(
    tape: &'t Tape,
    store: &ParamStore,
    p: &AttentionLayerParams,
    heads: usize,
    x: Var<'t>,
    y: Var<'t>,
) -> Result<Var<'t>> {
    let h = p.norm1.forward(tape, store, mha(tape, store, &p.mha, heads, x, y)?.add(x)?)?;
    p.norm2.forward(tape, store, p.ff.forward(tape, store, h)?.add(h)?)
}

/// `m_e` self-attention layers followed by a scalar score per token.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertLayerParams {
    pub layers: Vec<AttentionLayerParams>,
    pub out: Linear,
}

/// Glimpse, residual feed-forward and clipped compatibility.
#[derive(Debug, Clone, PartialEq)]
pub struct PomoExpertParams {
    pub glimpse: MhaParams,
    pub ff: FeedForward,
}

/// Expert head on `h` = [context row; candidate rows]: the candidates'
/// scores, masked-softmaxed into a 1 x K selection distribution.
pub fn expert_forward<'t>(
    tape: &'t Tape,
    store: &ParamStore,
    expert: &ExpertLayerParams,
    heads: usize,
    h: Var<'t>,
    allowed: &[bool],
) -> Result<Var<'t>> {
    let mut x = h;
    for layer in &expert.layers {
        x = attention_layer(tape, store, layer, heads, x, x)?;
    }
    let k = x.shape().0 - 1;
    let rows: Vec<usize> = (1..=k).collect();
    let scores = expert.out.forward(tape, store, x)?.select_rows(&rows)?.transpose();
    scores.masked_softmax_rows(allowed)
}

/// The gated mixture `sum_i G_i(c_k) E_i(h)`. The gate is one-hot, so the
/// sum is exactly the selected expert's output; unselected experts are
/// not evaluated at all.
pub fn mem_forward<'t>(
    tape: &'t Tape,
    store: &ParamStore,
    experts: &[ExpertLayerParams],
    config: &ModelConfig,
    h: Var<'t>,
    c_k: f64,
    allowed: &[bool],
) -> Result<Var<'t>> {
    let (i, _) = gate(c_k, config)?;
    expert_forward(tape, store, &experts[i], config.heads, h, allowed)
}

/// `h' = MHA(h_c, H)`, `h^ = FF(h') + h'`,
/// `P = softmax(C_l tanh(h^ H^T / sqrt(d)))` over the allowed candidates.
#[allow(clippy::too_many_arguments)]
pub fn pomo_expert_forward<'t>(
    tape: &'t Tape,
    store: &ParamStore,
    expert: &PomoExpertParams,
    heads: usize,
    hc: Var<'t>,
    ht: Var<'t>,
    logit_clip: f64,
    allowed: &[bool],
) -> Result<Var<'t>> {
    let d = ht.shape().1;
    let g = mha(tape, store, &expert.glimpse, heads, hc, ht)?;
    let g = expert.ff.forward(tape, store, g)?.add(g)?;
    let logits = g.matmul_bt(ht)?.scale(1.0 / (d as f64).sqrt()).tanh().scale(logit_clip);
    logits.masked_softmax_rows(allowed)
}

#[derive(Debug, Clone, PartialEq)]
struct Layout {
    depot_in: Linear,
    node_in: Linear,
    encoder: Vec<AttentionLayerParams>,
    context: Linear,
    decoder: Vec<AttentionLayerParams>,
    experts: Vec<ExpertLayerParams>,
    pomo_experts: Vec<PomoExpertParams>,
}

/// Decision distribution at one step.
pub struct StepOutput<'t> {
    /// 1 x K probabilities over `candidates`.
    pub probs: Var<'t>,
    pub candidates: Vec<usize>,
    pub allowed: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyModel {
    pub config: ModelConfig,
    pub store: ParamStore,
    layout: Layout,
}

impl PolicyModel {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let (d, ff) = (config.embed_dim, config.ff_dim);
        let s = &mut store;
        let depot_in = Linear::new(s, "enc.depot_in", DEPOT_FEATURES, d, &mut rng);
        let node_in = Linear::new(s, "enc.node_in", NODE_FEATURES, d, &mut rng);
        let encoder = (0..config.encoder_layers)
            .map(|l| AttentionLayerParams::new(s, &format!("enc.layer{l}"), d, ff, &mut rng))
            .collect();
        let ctx_in = 2 * d + CONTEXT_SCALARS;
        let mut decoder = Vec::new();
        let mut experts = Vec::new();
        let mut pomo_experts = Vec::new();
        let context = Linear::new(s, "dec.context", ctx_in, d, &mut rng);
        match config.decoder {
            DecoderKind::Heavy => {
                decoder = (0..config.decoder_layers)
                    .map(|l| AttentionLayerParams::new(s, &format!("dec.layer{l}"), d, ff, &mut rng))
                    .collect();
                for i in 0..config.experts {
                    let layers = (0..config.expert_depth)
                        .map(|j| AttentionLayerParams::new(s, &format!("expert{i}.layer{j}"), d, ff, &mut rng))
                        .collect();
                    let out = Linear::new(s, &format!("expert{i}.out"), d, 1, &mut rng);
                    experts.push(ExpertLayerParams { layers, out });
                }
            }
            DecoderKind::Pomo => {
                for i in 0..config.experts {
                    pomo_experts.push(PomoExpertParams {
                        glimpse: MhaParams::new(s, &format!("expert{i}.glimpse"), ctx_in, d, &mut rng),
                        ff: FeedForward::new(s, &format!("expert{i}"), d, ff, &mut rng),
                    });
                }
            }
        }
        let layout = Layout { depot_in, node_in, encoder, context, decoder, experts, pomo_experts };
        Ok(PolicyModel { config, store, layout })
    }

    pub fn experts(&self) -> &[ExpertLayerParams] {
        &self.layout.experts
    }

    pub fn pomo_experts(&self) -> &[PomoExpertParams] {
        &self.layout.pomo_experts
    }

    /// Parameter ids of expert `i`.
    pub fn expert_param_ids(&self, i: usize) -> Vec<ParamId> {
        let prefix = format!("expert{i}.");
        self.store.ids_with_prefix(&prefix).collect()
    }

    /// The gate input of an instance: alpha for time windows, capacity for
    /// the other depot problems. TSP has no binding constraint and sits at
    /// the loose end of the range.
    pub fn tightness(&self, inst: &Instance) -> f64 {
        match inst.kind {
            ProblemKind::Cvrptw => inst.alpha,
            ProblemKind::Cvrp | ProblemKind::Ovrp => inst.capacity as f64,
            ProblemKind::Tsp => self.config.tightness_max,
        }
    }

    /// Tightness mapped onto `[0, 1]` over the configured range.
    pub fn tightness_feature(&self, inst: &Instance) -> f64 {
        let c = &self.config;
        (self.tightness(inst) - c.tightness_min) / (c.tightness_max - c.tightness_min)
    }

    /// Node embeddings, one row per node.
    pub fn encode<'t>(&self, tape: &'t Tape, inst: &Instance) -> Result<Var<'t>> {
        let s = &self.store;
        let lay = &self.layout;
        let (depot_x, node_x) = input_features(inst);
        let mut parts = Vec::with_capacity(2);
        if let Some(dx) = depot_x {
            parts.push(lay.depot_in.forward(tape, s, tape.constant(dx))?);
        }
        parts.push(lay.node_in.forward(tape, s, tape.constant(node_x))?);
        let mut h = if parts.len() == 1 { parts[0] } else { concat_rows(&parts)? };
        for layer in &lay.encoder {
            h = attention_layer(tape, s, layer, self.config.heads, h, h)?;
        }
        Ok(h)
    }

    fn context_input<'t>(&self, tape: &'t Tape, emb: Var<'t>, inst: &Instance, st: &DecoderState) -> Result<Var<'t>> {
        let first = st.route_first.unwrap_or(0);
        let scalars = Tensor::row_vector(st.context_scalars(inst, self.tightness_feature(inst)).to_vec());
        concat_cols(&[emb.select_rows(&[first])?, emb.select_rows(&[st.current])?, tape.constant(scalars)])
    }

    /// Selection distribution over the current candidates.
    pub fn decode_step<'t>(&self, tape: &'t Tape, emb: Var<'t>, inst: &Instance, st: &DecoderState) -> Result<StepOutput<'t>> {
        let (candidates, allowed) = st.candidates(inst);
        if !allowed.iter().any(|&a| a) {
            return Err(NnError::DeadEnd(format!("no feasible move from node {}", st.current)));
        }
        let s = &self.store;
        let heads = self.config.heads;
        let ctx_in = self.context_input(tape, emb, inst, st)?;
        let nodes = emb.select_rows(&candidates)?;
        let c_k = self.tightness(inst);
        let probs = match self.config.decoder {
            DecoderKind::Heavy => {
                let ctx = self.layout.context.forward(tape, s, ctx_in)?;
                let mut h = concat_rows(&[ctx, nodes])?;
                for layer in &self.layout.decoder {
                    h = attention_layer(tape, s, layer, heads, h, h)?;
                }
                mem_forward(tape, s, &self.layout.experts, &self.config, h, c_k, &allowed)?
            }
            DecoderKind::Pomo => {
                let (i, _) = gate(c_k, &self.config)?;
                let ex = &self.layout.pomo_experts[i];
                pomo_expert_forward(tape, s, ex, heads, ctx_in, nodes, self.config.logit_clip, &allowed)?
            }
        };
        Ok(StepOutput { probs, candidates, allowed })
    }

    pub fn to_checkpoint(&self, extra_meta: serde_json::Value, extra: Vec<(String, Tensor)>) -> Checkpoint {
        let meta = serde_json::json!({ "model": self.config, "extra": extra_meta });
        let mut entries: Vec<(String, Tensor)> =
            self.store.ids().map(|id| (self.store.name(id).to_string(), self.store.get(id).clone())).collect();
        entries.extend(extra);
        Checkpoint { meta: meta.to_string(), entries }
    }

    /// Rebuilds a model from a checkpoint; returns it with the extra
    /// metadata stored alongside.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<(Self, serde_json::Value)> {
        let meta: serde_json::Value =
            serde_json::from_str(&ck.meta).map_err(|e| NnError::Checkpoint(format!("meta: {e}")))?;
        let config: ModelConfig = serde_json::from_value(meta["model"].clone())
            .map_err(|e| NnError::Checkpoint(format!("model config: {e}")))?;
        let mut model = PolicyModel::new(config, 0)?;
        for id in model.store.ids().collect::<Vec<_>>() {
            let name = model.store.name(id).to_string();
            let t = ck.get(&name).ok_or_else(|| NnError::Checkpoint(format!("missing parameter {name}")))?;
            if t.shape() != model.store.get(id).shape() {
                return Err(NnError::Checkpoint(format!("{name}: shape {:?}", t.shape())));
            }
            *model.store.get_mut(id) = t.clone();
        }
        Ok((model, meta["extra"].clone()))
    }
}

/// Depot features (depot problems only) and per-node features.
fn input_features(inst: &Instance) -> (Option<Tensor>, Tensor) {
    let tw = inst.kind.has_time_windows();
    let horizon = if tw { inst.nodes[0].late } else { 1.0 };
    let cap = if inst.kind.has_depot() && inst.capacity > 0 { inst.capacity as f64 } else { 1.0 };
    let skip = usize::from(inst.kind.has_depot());
    let mut data = Vec::with_capacity((inst.nodes.len() - skip) * NODE_FEATURES);
    for n in &inst.nodes[skip..] {
        let demand = if inst.kind.has_depot() { n.demand as f64 / cap } else { 0.0 };
        let (e, l, s) = if tw { (n.early / horizon, n.late / horizon, n.service / horizon) } else { (0.0, 0.0, 0.0) };
        data.extend_from_slice(&[n.x, n.y, demand, e, l, s]);
    }
    let nodes = Tensor::new(inst.nodes.len() - skip, NODE_FEATURES, data).expect("feature shape");
    let depot = inst.kind.has_depot().then(|| Tensor::row_vector(vec![inst.nodes[0].x, inst.nodes[0].y]));
    (depot, nodes)
}
