//! Reference implementations used as test oracles. They read parameter
//! values from the store but compute everything with plain loops.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relnet::layers::{Activation, MlpSpec};
use relnet::{ObjectSet, ParameterStore, RelNetConfig, Tensor};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn random_set(rng: &mut ChaCha8Rng, n: usize, width: usize, qwidth: usize) -> ObjectSet {
    let objects = (0..n)
        .map(|_| Tensor::vector(random_vec(rng, width)).unwrap())
        .collect();
    ObjectSet::new(objects, Tensor::vector(random_vec(rng, qwidth)).unwrap()).unwrap()
}

/// Relation network with random weights and nonzero biases.
pub fn random_relnet(
    rng: &mut ChaCha8Rng,
    layers: usize,
    width: usize,
    qwidth: usize,
    hidden: usize,
    classes: usize,
) -> (RelNetConfig, ParameterStore) {
    let cfg = RelNetConfig::new(
        width,
        qwidth,
        vec![hidden, hidden],
        vec![vec![hidden, hidden]; layers],
        vec![hidden],
        classes,
    )
    .unwrap();
    let mut store = ParameterStore::new();
    cfg.init(&mut store, rng).unwrap();
    let names: Vec<String> = store.names().map(str::to_string).collect();
    for name in names {
        let t = store.value(&name).unwrap();
        let v = Tensor::new(t.shape().to_vec(), random_vec(rng, t.len())).unwrap();
        store.set_value(&name, v).unwrap();
    }
    (cfg, store)
}

/// `y = act(x·W + b)` layer by layer with `W` stored row-major `[in × out]`.
pub fn mlp_ref(store: &ParameterStore, prefix: &str, spec: &MlpSpec, x: &[f64]) -> Vec<f64> {
    assert_eq!(x.len(), spec.input);
    let mut x = x.to_vec();
    for (l, &out) in spec.widths.iter().enumerate() {
        let w = store.value(&format!("{prefix}.{l}.weight")).unwrap().data();
        let b = store.value(&format!("{prefix}.{l}.bias")).unwrap().data();
        let mut y = b.to_vec();
        for (i, xi) in x.iter().enumerate() {
            for j in 0..out {
                y[j] += xi * w[i * out + j];
            }
        }
        let last = l + 1 == spec.widths.len();
        if !last || spec.final_activation == Activation::Relu {
            y.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        x = y;
    }
    x
}

pub fn cat(parts: &[&[f64]]) -> Vec<f64> {
    parts.iter().flat_map(|p| p.iter().copied()).collect()
}

pub fn add_into(acc: &mut [f64], v: &[f64]) {
    acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
}

/// `f(Σ_{i,j} g(oᵢ, oⱼ, q))`, written out directly.
pub fn rn_ref(cfg: &RelNetConfig, store: &ParameterStore, set: &ObjectSet) -> Vec<f64> {
    let q = set.question.data();
    let mut total = vec![0.0; cfg.g.output()];
    for oi in &set.objects {
        for oj in &set.objects {
            let r = mlp_ref(store, "g", &cfg.g, &cat(&[oi.data(), oj.data(), q]));
            add_into(&mut total, &r);
        }
    }
    mlp_ref(store, "f", &cfg.f, &total)
}

/// Two-layer network with four nested loops: for every pair `(i, k)` both
/// inner sums over `j` and `l` are recomputed from scratch.
pub fn two_layer_ref(cfg: &RelNetConfig, store: &ParameterStore, set: &ObjectSet) -> Vec<f64> {
    let q = set.question.data();
    let o = &set.objects;
    let n = o.len();
    let dg = cfg.g.output();
    let mut total = vec![0.0; cfg.h[0].output()];
    for i in 0..n {
        for k in 0..n {
            let mut left = vec![0.0; dg];
            let mut right = vec![0.0; dg];
            for j in 0..n {
                for l in 0..n {
                    if l == 0 {
                        let r = mlp_ref(store, "g", &cfg.g, &cat(&[o[i].data(), o[j].data(), q]));
                        add_into(&mut left, &r);
                    }
                    if j == 0 {
                        let r = mlp_ref(store, "g", &cfg.g, &cat(&[o[k].data(), o[l].data(), q]));
                        add_into(&mut right, &r);
                    }
                }
            }
            let r = mlp_ref(store, "h1", &cfg.h[0], &cat(&[&left, &right, q]));
            add_into(&mut total, &r);
        }
    }
    mlp_ref(store, "f", &cfg.f, &total)
}

/// Relation value at depth `d` for pair `(i, k)` by direct recursion.
fn relation_at(cfg: &RelNetConfig, store: &ParameterStore, set: &ObjectSet, d: usize, i: usize, k: usize) -> Vec<f64> {
    let q = set.question.data();
    if d == 0 {
        let o = &set.objects;
        return mlp_ref(store, "g", &cfg.g, &cat(&[o[i].data(), o[k].data(), q]));
    }
    let n = set.len();
    let width = if d == 1 { cfg.g.output() } else { cfg.h[d - 2].output() };
    let mut left = vec![0.0; width];
    let mut right = vec![0.0; width];
    for j in 0..n {
        add_into(&mut left, &relation_at(cfg, store, set, d - 1, i, j));
        add_into(&mut right, &relation_at(cfg, store, set, d - 1, k, j));
    }
    mlp_ref(store, &format!("h{d}"), &cfg.h[d - 1], &cat(&[&left, &right, q]))
}

/// Any depth, by unmemoized recursion (exponential cost; tiny inputs only).
pub fn recursive_ref(cfg: &RelNetConfig, store: &ParameterStore, set: &ObjectSet) -> Vec<f64> {
    let m = cfg.layers();
    let n = set.len();
    let width = if m == 0 { cfg.g.output() } else { cfg.h[m - 1].output() };
    let mut total = vec![0.0; width];
    for i in 0..n {
        for k in 0..n {
            add_into(&mut total, &relation_at(cfg, store, set, m, i, k));
        }
    }
    mlp_ref(store, "f", &cfg.f, &total)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Peephole LSTM step written per unit: input and forget gates see `c_{t−1}`,
/// the output gate sees `c_t`. Weights are `[in × 4u]`, `[u × 4u]` in gate
/// order input, forget, candidate, output.
pub fn lstm_ref(store: &ParameterStore, prefix: &str, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let u = h.len();
    let wx = store.value(&format!("{prefix}.wx")).unwrap().data();
    let wh = store.value(&format!("{prefix}.wh")).unwrap().data();
    let b = store.value(&format!("{prefix}.bias")).unwrap().data();
    let pi = store.value(&format!("{prefix}.peep_i")).unwrap().data();
    let pf = store.value(&format!("{prefix}.peep_f")).unwrap().data();
    let po = store.value(&format!("{prefix}.peep_o")).unwrap().data();
    let pre = |gate: usize, j: usize| {
        let col = gate * u + j;
        let mut z = b[col];
        for (a, xa) in x.iter().enumerate() {
            z += xa * wx[a * 4 * u + col];
        }
        for (a, ha) in h.iter().enumerate() {
            z += ha * wh[a * 4 * u + col];
        }
        z
    };
    let mut h_new = vec![0.0; u];
    let mut c_new = vec![0.0; u];
    for j in 0..u {
        let i_gate = sigmoid(pre(0, j) + pi[j] * c[j]);
        let f_gate = sigmoid(pre(1, j) + pf[j] * c[j]);
        let cand = pre(2, j).tanh();
        c_new[j] = f_gate * c[j] + i_gate * cand;
        let o_gate = sigmoid(pre(3, j) + po[j] * c_new[j]);
        h_new[j] = o_gate * c_new[j].tanh();
    }
    (h_new, c_new)
}

/// Textbook Adam on a flat vector, one step.
pub struct AdamRef {
    pub lr: f64,
    pub b1: f64,
    pub b2: f64,
    pub eps: f64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: i32,
}

impl AdamRef {
    pub fn new(n: usize, lr: f64) -> Self {
        AdamRef {
            lr,
            b1: 0.9,
            b2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, w: &mut [f64], g: &[f64]) {
        self.t += 1;
        for k in 0..w.len() {
            self.m[k] = self.b1 * self.m[k] + (1.0 - self.b1) * g[k];
            self.v[k] = self.b2 * self.v[k] + (1.0 - self.b2) * g[k] * g[k];
            let mh = self.m[k] / (1.0 - self.b1.powi(self.t));
            let vh = self.v[k] / (1.0 - self.b2.powi(self.t));
            w[k] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

pub const FIXTURE_TASK2: &str = "\
1 Mary got the milk there.
2 John moved to the bedroom.
3 Sandra went back to the kitchen.
4 Mary travelled to the hallway.
5 Where is the milk?\thallway\t1 4
";

pub const FIXTURE_TASK3: &str = "\
1 John moved to the bedroom.
2 John grabbed the apple there.
3 Sandra moved to the hallway.
4 John went to the office.
5 Sandra went back to the bedroom.
6 Sandra took the milk.
7 John journeyed to the bathroom.
8 John travelled to the office.
9 Sandra left the milk.
10 Mary went to the bedroom.
11 Mary moved to the office.
12 John travelled to the hallway.
13 Sandra moved to the garden.
14 Mary moved to the kitchen.
15 Daniel took the football.
16 Mary journeyed to the bedroom.
17 Mary grabbed the milk there.
18 Mary discarded the milk.
19 John went to the garden.
20 John discarded the apple there.
21 Where was the apple before the bathroom?\toffice\t2 4 7
";

pub const FIXTURE_TASK16_AMBIGUOUS: &str = "\
1 Greg is a frog.
2 Bernhard is a swan.
3 Julius is a frog.
4 Bernhard is white.
5 Julius is green.
6 Lily is a frog.
7 Brian is a frog.
8 Lily is gray.
9 Brian is gray.
10 What color is Greg?\tgray\t7 9 1
";

pub const FIXTURE_TASK16_CLEAR: &str = "\
1 Lily is a swan.
2 Bernhard is a lion.
3 Greg is a swan.
4 Bernhard is white.
5 Brian is a lion.
6 Lily is gray.
7 Julius is a rhino.
8 Julius is gray.
9 Greg is gray.
10 What color is Brian?\twhite\t5 2 4
";

/// One hundred samples in bAbI text form: the four worked examples above
/// plus generated one-, two- and three-hop stories, all parsed back through
/// the bAbI reader.
pub fn overfit_suite() -> Vec<relnet::babi::Sample> {
    use relnet::babi::{extract_samples, parse_babi_str};
    use relnet::synth::{generate, render_babi, SynthConfig};
    let mut out = Vec::new();
    for (text, task) in [
        (FIXTURE_TASK2, 2),
        (FIXTURE_TASK3, 3),
        (FIXTURE_TASK16_AMBIGUOUS, 16),
        (FIXTURE_TASK16_CLEAR, 16),
    ] {
        out.extend(extract_samples(&parse_babi_str(text).unwrap(), task, "fixture"));
    }
    for k in 1..=3u8 {
        let cfg = SynthConfig {
            k,
            seed: 40 + k as u64,
            ..SynthConfig::default()
        };
        let text = render_babi(&generate(&cfg, 32, "overfit").unwrap());
        out.extend(extract_samples(&parse_babi_str(&text).unwrap(), k, &format!("overfit-k{k}")));
    }
    assert_eq!(out.len(), 100);
    out
}
