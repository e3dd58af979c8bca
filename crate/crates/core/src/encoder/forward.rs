use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};

use super::{EncoderError, EncoderParams, FeatureTable, StateHistory};
use crate::graph::BuildingGraph;
use crate::nn::{Activation, Params};

/// One graph convolution: row `i` of the result is
/// `σ(W · Σ_j Â_ij h_j)` with `Â` the graph's normalized adjacency.
/// `w` is stored `out x in`.
pub fn gcn_layer(
    h: &Array2<f64>,
    graph: &BuildingGraph,
    w: &Array2<f64>,
    activation: Activation,
) -> Result<Array2<f64>, EncoderError> {
    if h.nrows() != graph.n() {
        return Err(EncoderError::Shape(format!("{} feature rows for {} buildings", h.nrows(), graph.n())));
    }
    if h.ncols() != w.ncols() {
        return Err(EncoderError::Shape(format!("features have {} columns, weight expects {}", h.ncols(), w.ncols())));
    }
    let pre = graph.norm_adjacency.dot(h).dot(&w.t());
    Ok(pre.mapv(|z| activation.apply(z)))
}

/// Numerically stable softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|v| v / total).collect()
}

/// Affine fusion `W_s h + W_t z + b`.
pub fn fuse(h: &[f64], z: &[f64], params: &EncoderParams) -> Result<Vec<f64>, EncoderError> {
    if h.len() != params.ws.ncols() || z.len() != params.wt.ncols() {
        return Err(EncoderError::Shape(format!(
            "fuse expects h of {} and z of {}, got {} and {}",
            params.ws.ncols(),
            params.wt.ncols(),
            h.len(),
            z.len()
        )));
    }
    let r = params.ws.dot(&ArrayView1::from(h)) + params.wt.dot(&ArrayView1::from(z)) + &params.b;
    Ok(r.to_vec())
}

/// Attention of one query over `rows` of the key/value matrices.
fn attend(q: ArrayView1<f64>, k: ArrayView2<f64>, v: ArrayView2<f64>, rows: &[usize]) -> (Vec<f64>, Array1<f64>) {
    let scores: Vec<f64> = rows.iter().map(|&r| q.dot(&k.row(r))).collect();
    let alpha = softmax(&scores);
    let mut z = Array1::zeros(v.ncols());
    for (&r, &a) in rows.iter().zip(&alpha) {
        z.scaled_add(a, &v.row(r));
    }
    (alpha, z)
}

/// Temporal attention for a single building history: returns the projected
/// multi-head output and the per-head weights, oldest step first.
pub fn temporal_attention(history: &StateHistory, params: &EncoderParams) -> (Vec<f64>, Vec<Vec<f64>>) {
    let entries = history.padded();
    let x = Array2::from_shape_fn((entries.len(), entries[0].len()), |(r, c)| entries[r][c]);
    let rows: Vec<usize> = (0..entries.len()).collect();
    let last = x.row(entries.len() - 1);
    let mut concat = Vec::with_capacity(params.config.attn_dim());
    let mut weights = Vec::with_capacity(params.config.heads);
    for h in 0..params.config.heads {
        let k = x.dot(&params.wk[h].t());
        let v = x.dot(&params.wv[h].t());
        let q = params.wq[h].dot(&last);
        let (alpha, z) = attend(q.view(), k.view(), v.view(), &rows);
        concat.extend(z.iter());
        weights.push(alpha);
    }
    let out = params.wo.dot(&Array1::from(concat));
    (out.to_vec(), weights)
}

/// Encode the latest step of every building's history. Returns `N x output_dim`.
pub fn encode(
    graph: &BuildingGraph,
    histories: &[StateHistory],
    params: &EncoderParams,
) -> Result<Array2<f64>, EncoderError> {
    let table = StateHistory::to_table(histories)?;
    let last = table.steps() - 1;
    let (r, _) = encode_steps(params, graph, &table, &[last])?;
    Ok(r)
}

/// Per-head attention weights for the latest step of each history:
/// `result[i][h]` has `T + 1` entries, oldest first.
pub fn attention_weights(histories: &[StateHistory], params: &EncoderParams) -> Vec<Vec<Vec<f64>>> {
    histories.iter().map(|h| temporal_attention(h, params).1).collect()
}

/// Activations kept from a batched forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub(super) fingerprint: u64,
    pub(super) n: usize,
    pub(super) adj: Array2<f64>,
    pub(super) steps: Vec<usize>,
    /// Current features of each query, `queries x input_dim`.
    pub(super) x_query: Array2<f64>,
    /// Features of every row any window touches.
    pub(super) x_all: Array2<f64>,
    pub(super) agg: Vec<Array2<f64>>,
    pub(super) pre: Vec<Array2<f64>>,
    pub(super) out: Vec<Array2<f64>>,
    pub(super) q: Vec<Array2<f64>>,
    pub(super) k: Vec<Array2<f64>>,
    pub(super) v: Vec<Array2<f64>>,
    /// Local `x_all` row indices of each query's window.
    pub(super) windows: Vec<Vec<usize>>,
    /// Per head, `queries x (T + 1)`.
    pub(super) alpha: Vec<Array2<f64>>,
    pub(super) concat: Array2<f64>,
    pub(super) z: Array2<f64>,
}

impl ForwardCache {
    pub fn queries(&self) -> usize {
        self.x_query.nrows()
    }

    pub fn steps(&self) -> &[usize] {
        &self.steps
    }

    /// Row of the representation matrix holding building `i` at `self.steps()[s]`.
    pub fn query_index(&self, s: usize, i: usize) -> usize {
        s * self.n + i
    }

    pub fn attention(&self, query: usize, head: usize) -> ArrayView1<'_, f64> {
        self.alpha[head].row(query)
    }
}

/// Apply `Â` independently to each consecutive block of `n` rows.
pub(super) fn aggregate(adj: &Array2<f64>, h: &Array2<f64>, n: usize) -> Array2<f64> {
    let mut out = Array2::zeros(h.raw_dim());
    for b in 0..h.nrows() / n {
        let block = h.slice(s![b * n..(b + 1) * n, ..]);
        out.slice_mut(s![b * n..(b + 1) * n, ..]).assign(&adj.dot(&block));
    }
    out
}

fn check_table(params: &EncoderParams, graph: &BuildingGraph, table: &FeatureTable) -> Result<(), EncoderError> {
    if table.n() != graph.n() {
        return Err(EncoderError::Shape(format!("table has {} buildings, graph {}", table.n(), graph.n())));
    }
    if table.dim() != params.config.input_dim {
        return Err(EncoderError::Shape(format!(
            "table feature dim {} but encoder expects {}",
            table.dim(),
            params.config.input_dim
        )));
    }
    Ok(())
}

fn gcn_stack(
    params: &EncoderParams,
    graph: &BuildingGraph,
    x: &Array2<f64>,
    n: usize,
) -> (Vec<Array2<f64>>, Vec<Array2<f64>>, Vec<Array2<f64>>) {
    let act = params.config.activation;
    let mut agg = Vec::with_capacity(params.gcn.len());
    let mut pre = Vec::with_capacity(params.gcn.len());
    let mut out: Vec<Array2<f64>> = Vec::with_capacity(params.gcn.len());
    for (l, w) in params.gcn.iter().enumerate() {
        let h = if l == 0 { x } else { &out[l - 1] };
        let a = aggregate(&graph.norm_adjacency, h, n);
        let p = a.dot(&w.t());
        out.push(p.mapv(|z| act.apply(z)));
        agg.push(a);
        pre.push(p);
    }
    (agg, pre, out)
}

/// Encode every building at each of `steps` (indices into `table`).
/// Returns the `steps.len() * N x output_dim` representations, row
/// `s * N + i`, with the activations needed by [`super::encoder_backward`].
pub fn encode_steps(
    params: &EncoderParams,
    graph: &BuildingGraph,
    table: &FeatureTable,
    steps: &[usize],
) -> Result<(Array2<f64>, ForwardCache), EncoderError> {
    check_table(params, graph, table)?;
    let n = table.n();
    let cfg = &params.config;
    if let Some(&bad) = steps.iter().find(|&&t| t >= table.steps()) {
        return Err(EncoderError::Shape(format!("step {bad} beyond table of {} steps", table.steps())));
    }
    let t_lo = steps.iter().min().map_or(0, |&t| t.saturating_sub(cfg.window));
    let t_hi = steps.iter().max().map_or(0, |&t| t + 1);
    let row0 = t_lo * n;
    let x_all = table.data().slice(s![row0..t_hi * n, ..]).to_owned();
    let mut x_query = Array2::zeros((steps.len() * n, cfg.input_dim));
    let mut windows = Vec::with_capacity(steps.len() * n);
    for (si, &t) in steps.iter().enumerate() {
        for i in 0..n {
            x_query.row_mut(si * n + i).assign(&table.row(t, i));
            windows.push(table.window_rows(t, i, cfg.window).map(|r| r - row0).collect::<Vec<_>>());
        }
    }

    let (agg, pre, out) = gcn_stack(params, graph, &x_query, n);

    let queries = x_query.nrows();
    let mut q = Vec::with_capacity(cfg.heads);
    let mut k = Vec::with_capacity(cfg.heads);
    let mut v = Vec::with_capacity(cfg.heads);
    let mut alpha = Vec::with_capacity(cfg.heads);
    let mut concat = Array2::zeros((queries, cfg.attn_dim()));
    for h in 0..cfg.heads {
        let qh = x_query.dot(&params.wq[h].t());
        let kh = x_all.dot(&params.wk[h].t());
        let vh = x_all.dot(&params.wv[h].t());
        let mut ah = Array2::zeros((queries, cfg.window + 1));
        for (r, rows) in windows.iter().enumerate() {
            let (a, zh) = attend(qh.row(r), kh.view(), vh.view(), rows);
            ah.row_mut(r).assign(&ArrayView1::from(a.as_slice()));
            concat.slice_mut(s![r, h * cfg.head_dim..(h + 1) * cfg.head_dim]).assign(&zh);
        }
        q.push(qh);
        k.push(kh);
        v.push(vh);
        alpha.push(ah);
    }
    let z = concat.dot(&params.wo.t());
    let h_last = out.last().expect("at least one gcn layer");
    let r = h_last.dot(&params.ws.t()) + z.dot(&params.wt.t()) + &params.b;

    let cache = ForwardCache {
        fingerprint: params.fingerprint(),
        n,
        adj: graph.norm_adjacency.clone(),
        steps: steps.to_vec(),
        x_query,
        x_all,
        agg,
        pre,
        out,
        q,
        k,
        v,
        windows,
        alpha,
        concat,
        z,
    };
    Ok((r, cache))
}

/// Rollout-time encoder that projects each table row to keys and values
/// once and reuses them while the window slides forward.
#[derive(Debug, Clone)]
pub struct StreamingEncoder {
    fingerprint: u64,
    rows: usize,
    k: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl StreamingEncoder {
    pub fn new(params: &EncoderParams) -> Self {
        let cfg = &params.config;
        StreamingEncoder {
            fingerprint: params.fingerprint(),
            rows: 0,
            k: vec![Array2::zeros((0, cfg.head_dim)); cfg.heads],
            v: vec![Array2::zeros((0, cfg.head_dim)); cfg.heads],
        }
    }

    /// Representations of every building at the table's most recent step.
    /// The table may only grow between calls, and `params` must not change.
    pub fn encode_latest(
        &mut self,
        params: &EncoderParams,
        graph: &BuildingGraph,
        table: &FeatureTable,
    ) -> Result<Array2<f64>, EncoderError> {
        check_table(params, graph, table)?;
        if table.steps() == 0 {
            return Err(EncoderError::Shape("empty feature table".into()));
        }
        if params.fingerprint() != self.fingerprint || table.data().nrows() < self.rows {
            return Err(EncoderError::StaleCache);
        }
        let cfg = &params.config;
        let n = table.n();
        let fresh = table.data().slice(s![self.rows.., ..]);
        for h in 0..cfg.heads {
            for row in fresh.dot(&params.wk[h].t()).rows() {
                self.k[h].push_row(row).expect("head width fixed");
            }
            for row in fresh.dot(&params.wv[h].t()).rows() {
                self.v[h].push_row(row).expect("head width fixed");
            }
        }
        self.rows = table.data().nrows();

        let t = table.steps() - 1;
        let x = table.data().slice(s![t * n.., ..]).to_owned();
        let (_, _, out) = gcn_stack(params, graph, &x, n);
        let mut concat = Array2::zeros((n, cfg.attn_dim()));
        for h in 0..cfg.heads {
            let qh = x.dot(&params.wq[h].t());
            for i in 0..n {
                let rows: Vec<usize> = table.window_rows(t, i, cfg.window).collect();
                let (_, zh) = attend(qh.row(i), self.k[h].view(), self.v[h].view(), &rows);
                concat.slice_mut(s![i, h * cfg.head_dim..(h + 1) * cfg.head_dim]).assign(&zh);
            }
        }
        let z = concat.dot(&params.wo.t());
        Ok(out.last().unwrap().dot(&params.ws.t()) + z.dot(&params.wt.t()) + &params.b)
    }
}
