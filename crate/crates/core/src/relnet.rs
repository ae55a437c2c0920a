//! Single- and multi-layer relation networks.
//!
//! With objects `o₁…oₙ`, question `q`, relation MLPs `h₀ = g, h₁ … h_m` and
//! output MLP `f`:
//!
//! ```text
//! r₀(i,k) = g(oᵢ, o_k, q)
//! r_d(i,k) = h_d(Σⱼ r_{d−1}(i,j), Σₗ r_{d−1}(k,l), q)      d = 1…m
//! out      = f(Σ_{i,k} r_m(i,k))
//! ```
//!
//! `m = 0` is the plain relation network `f(Σ_{i,j} g(oᵢ, oⱼ, q))`. Every
//! layer evaluates its relation function on all `n²` ordered pairs, self
//! pairs included, and the per-object sums `Σⱼ r_{d−1}(i,j)` are formed once
//! and reused on both sides of the next layer's pairs, so a forward pass
//! costs `n²·(m+1)` relation evaluations.
//!
//! The first layer of each relation MLP is linear in the concatenation
//! `[oᵢ, o_k, q]`, so it is evaluated as `oᵢ·W_left + o_k·W_right + q·W_q`
//! with the three products computed once per object (resp. question) and
//! gathered per pair.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::layers::{finish_mlp, init_mlp, mlp_forward, Activation, MlpSpec};
use crate::params::ParameterStore;
use crate::tensor::Tensor;

/// The objects `{oᵢ}` and question `q` fed to a relation network.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectSet {
    pub objects: Vec<Tensor>,
    pub question: Tensor,
}

impl ObjectSet {
    pub fn new(objects: Vec<Tensor>, question: Tensor) -> Result<Self> {
        let first = objects
            .first()
            .ok_or_else(|| Error::Data("an object set needs at least one object".into()))?;
        for o in &objects {
            if o.shape().len() != 1 || o.shape() != first.shape() {
                return Err(Error::shape("ObjectSet", first.shape(), o.shape()));
            }
        }
        if question.shape().len() != 1 {
            return Err(Error::shape("ObjectSet", first.shape(), question.shape()));
        }
        Ok(ObjectSet { objects, question })
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn object_width(&self) -> usize {
        self.objects[0].len()
    }

    pub fn question_width(&self) -> usize {
        self.question.len()
    }

    /// Object `perm[i]` becomes object `i`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        ObjectSet {
            objects: perm.iter().map(|&p| self.objects[p].clone()).collect(),
            question: self.question.clone(),
        }
    }

    /// `([n × w], [1 × q])` constant nodes.
    pub fn to_nodes(&self, graph: &mut Graph) -> Result<(NodeId, NodeId)> {
        let rows: Vec<&[f64]> = self.objects.iter().map(|o| o.data()).collect();
        let objects = graph.constant(Tensor::from_rows(&rows)?);
        let question = graph.constant(self.question.reshape(vec![1, self.question_width()])?);
        Ok((objects, question))
    }
}

/// Relation functions `g = h₀, h₁ … h_m` and output function `f`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelNetConfig {
    pub object_width: usize,
    pub question_width: usize,
    pub g: MlpSpec,
    /// `h₁ … h_m`; its length is the layer count `m`.
    pub h: Vec<MlpSpec>,
    pub f: MlpSpec,
    /// All of `h₁ … h_m` use `h₁`'s parameters.
    pub share_relation_weights: bool,
}

impl RelNetConfig {
    /// Chains widths: `g` sees `2·object_width + q`, each `h_d` sees
    /// `2·out(h_{d−1}) + q`, `f` sees the last relation width and ends in
    /// `classes` linear outputs. Relation MLPs end in ReLU.
    pub fn new(
        object_width: usize,
        question_width: usize,
        g_widths: Vec<usize>,
        h_widths: Vec<Vec<usize>>,
        f_hidden: Vec<usize>,
        classes: usize,
    ) -> Result<Self> {
        let g = MlpSpec::new(2 * object_width + question_width, g_widths, Activation::Relu)?;
        let mut prev = g.output();
        let mut h = Vec::with_capacity(h_widths.len());
        for widths in h_widths {
            let spec = MlpSpec::new(2 * prev + question_width, widths, Activation::Relu)?;
            prev = spec.output();
            h.push(spec);
        }
        let mut f_widths = f_hidden;
        f_widths.push(classes);
        let f = MlpSpec::new(prev, f_widths, Activation::Linear)?;
        let cfg = RelNetConfig {
            object_width,
            question_width,
            g,
            h,
            f,
            share_relation_weights: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_shared_relation_weights(mut self, share: bool) -> Result<Self> {
        self.share_relation_weights = share;
        self.validate()?;
        Ok(self)
    }

    /// Layer count `m`.
    pub fn layers(&self) -> usize {
        self.h.len()
    }

    pub fn classes(&self) -> usize {
        self.f.output()
    }

    pub fn relation_spec(&self, depth: usize) -> &MlpSpec {
        if depth == 0 {
            &self.g
        } else {
            &self.h[depth - 1]
        }
    }

    /// Parameter prefix of the relation MLP at `depth`.
    pub fn relation_prefix(&self, depth: usize) -> String {
        match depth {
            0 => "g".to_string(),
            _ if self.share_relation_weights => "h1".to_string(),
            d => format!("h{d}"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.g.validate()?;
        self.f.validate()?;
        let expected = 2 * self.object_width + self.question_width;
        if self.g.input != expected {
            return Err(Error::config(
                "relnet.g",
                format!("input width {} but pairs are {expected} wide", self.g.input),
            ));
        }
        let mut prev = self.g.output();
        for (d, spec) in self.h.iter().enumerate() {
            spec.validate()?;
            let expected = 2 * prev + self.question_width;
            if spec.input != expected {
                return Err(Error::config(
                    format!("relnet.h{}", d + 1),
                    format!("input width {} but pairs are {expected} wide", spec.input),
                ));
            }
            prev = spec.output();
        }
        if self.f.input != prev {
            return Err(Error::config(
                "relnet.f",
                format!("input width {} but relations are {prev} wide", self.f.input),
            ));
        }
        if self.share_relation_weights && self.h.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::config(
                "relnet.share_relation_weights",
                "sharing needs identical h layers (relation widths must all match)",
            ));
        }
        Ok(())
    }

    pub fn init<R: Rng>(&self, store: &mut ParameterStore, rng: &mut R) -> Result<()> {
        self.validate()?;
        init_mlp(store, "g", &self.g, rng)?;
        for d in 1..=self.layers() {
            let prefix = self.relation_prefix(d);
            if !store.contains(&format!("{prefix}.0.weight")) {
                init_mlp(store, &prefix, self.relation_spec(d), rng)?;
            }
        }
        init_mlp(store, "f", &self.f, rng)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LayerTrace {
    pub layer: usize,
    /// Relation-function applications at this layer.
    pub evaluations: usize,
    /// Frobenius norm of the per-object sums this layer hands on (for the
    /// last layer, of the total sum fed to `f`).
    pub aggregate_norm: f64,
}

/// Per-layer cost and aggregate magnitudes of one forward pass.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RelationTrace {
    pub layers: Vec<LayerTrace>,
}

impl RelationTrace {
    pub fn total_evaluations(&self) -> usize {
        self.layers.iter().map(|l| l.evaluations).sum()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["layer", "evaluations", "aggregate_norm"])?;
        for l in &self.layers {
            w.write_record([
                l.layer.to_string(),
                l.evaluations.to_string(),
                format!("{:.17e}", l.aggregate_norm),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

/// Applies the relation MLP to `[oᵢ, oⱼ, q]` for every ordered pair of
/// every sample. `objects` is `[batch·n × w]`, `questions` is `[batch × q]`;
/// the result is `[batch·n·n × out]` with rows ordered `(sample, i, j)`.
pub fn pair_relations(
    graph: &mut Graph,
    store: &ParameterStore,
    prefix: &str,
    spec: &MlpSpec,
    objects: NodeId,
    questions: NodeId,
    n: usize,
) -> Result<NodeId> {
    let (rows, w) = graph.value(objects).dims2()?;
    let (batch, qw) = graph.value(questions).dims2()?;
    if n == 0 || rows != batch * n {
        return Err(Error::shape("pair_relations", &[rows, w], &[batch, qw]));
    }
    if spec.input != 2 * w + qw {
        return Err(Error::shape("pair_relations", &[spec.input], &[2 * w + qw]));
    }
    let weight = graph.param(store, &format!("{prefix}.0.weight"))?;
    let w_left = graph.narrow(weight, 0, 0, w)?;
    let w_right = graph.narrow(weight, 0, w, w)?;
    let w_question = graph.narrow(weight, 0, 2 * w, qw)?;
    let left = graph.matmul(objects, w_left)?;
    let right = graph.matmul(objects, w_right)?;
    let quest = graph.matmul(questions, w_question)?;

    let pairs = batch * n * n;
    let mut left_ids = Vec::with_capacity(pairs);
    let mut right_ids = Vec::with_capacity(pairs);
    let mut quest_ids = Vec::with_capacity(pairs);
    for b in 0..batch {
        for i in 0..n {
            for j in 0..n {
                left_ids.push(b * n + i);
                right_ids.push(b * n + j);
                quest_ids.push(b);
            }
        }
    }
    let l = graph.gather_rows(left, &left_ids)?;
    let r = graph.gather_rows(right, &right_ids)?;
    let q = graph.gather_rows(quest, &quest_ids)?;
    let lr = graph.add(l, r)?;
    let first = graph.add(lr, q)?;
    finish_mlp(graph, store, prefix, spec, first)
}

/// Sums pair outputs over the second index: `[batch·n·n × d]` → `[batch·n × d]`.
pub fn aggregate_by_first_index(graph: &mut Graph, pairs: NodeId, n: usize) -> Result<NodeId> {
    graph.group_sum(pairs, n)
}

/// Tensor form of [`aggregate_by_first_index`] for a single `[n × n × d]` block.
pub fn aggregate_pairs(pairs: &Tensor) -> Result<Vec<Tensor>> {
    let (n, n2, d) = match pairs.shape() {
        [a, b, c] => (*a, *b, *c),
        other => return Err(Error::shape("aggregate_by_first_index", other, &[0, 0, 0])),
    };
    if n != n2 {
        return Err(Error::shape("aggregate_by_first_index", pairs.shape(), &[n, n, d]));
    }
    let mut g = Graph::new();
    let p = g.constant(pairs.reshape(vec![n * n, d])?);
    let s = aggregate_by_first_index(&mut g, p, n)?;
    let s = g.value(s);
    (0..n).map(|i| Tensor::vector(s.row(i).to_vec())).collect()
}

/// Batched forward pass. Returns `[batch × classes]` logits.
pub fn forward_nodes(
    graph: &mut Graph,
    store: &ParameterStore,
    cfg: &RelNetConfig,
    objects: NodeId,
    questions: NodeId,
    n: usize,
) -> Result<(NodeId, RelationTrace)> {
    let m = cfg.layers();
    let mut trace = RelationTrace::default();
    let mut current = objects;
    let mut total = None;
    for depth in 0..=m {
        let prefix = cfg.relation_prefix(depth);
        let pairs = pair_relations(
            graph,
            store,
            &prefix,
            cfg.relation_spec(depth),
            current,
            questions,
            n,
        )?;
        let evaluations = graph.shape(pairs)[0];
        let aggregate = if depth < m {
            current = aggregate_by_first_index(graph, pairs, n)?;
            current
        } else {
            let sum = graph.group_sum(pairs, n * n)?;
            total = Some(sum);
            sum
        };
        trace.layers.push(LayerTrace {
            layer: depth,
            evaluations,
            aggregate_norm: graph.value(aggregate).sum_squares().sqrt(),
        });
    }
    let logits = mlp_forward(graph, store, "f", &cfg.f, total.expect("at least one layer"))?;
    Ok((logits, trace))
}

/// Single-layer relation network `f(Σ_{i,j} g(oᵢ, oⱼ, q))`. Rejects `m > 0`.
pub fn rn_forward(cfg: &RelNetConfig, store: &ParameterStore, set: &ObjectSet) -> Result<Tensor> {
    if cfg.layers() != 0 {
        return Err(Error::config(
            "relnet.layers",
            format!("rn_forward needs m = 0, got m = {}", cfg.layers()),
        ));
    }
    mlrn_forward(cfg, store, set).map(|(logits, _)| logits)
}

/// Multi-layer relation network on one object set: `[classes]` logits plus the trace.
pub fn mlrn_forward(
    cfg: &RelNetConfig,
    store: &ParameterStore,
    set: &ObjectSet,
) -> Result<(Tensor, RelationTrace)> {
    let mut g = Graph::new();
    let (objects, question) = set.to_nodes(&mut g)?;
    let (logits, trace) = forward_nodes(&mut g, store, cfg, objects, question, set.len())?;
    Ok((g.value(logits).reshape(vec![cfg.classes()])?, trace))
}

/// Argmax with ties going to the lowest class index.
pub fn predict_answer(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate() {
        if v > logits[best] {
            best = i;
        }
    }
    best
}
