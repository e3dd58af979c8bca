use ndarray::{s, Array2};

use super::forward::aggregate;
use super::{EncoderError, EncoderParams, ForwardCache, ParamGrads};
use crate::nn::Params;

/// Reverse-mode gradients of every encoder parameter for a scalar loss whose
/// gradient with respect to each representation row is `upstream`.
pub fn encoder_backward(
    params: &EncoderParams,
    cache: &ForwardCache,
    upstream: &Array2<f64>,
) -> Result<ParamGrads, EncoderError> {
    if params.fingerprint() != cache.fingerprint {
        return Err(EncoderError::StaleCache);
    }
    let cfg = &params.config;
    if upstream.dim() != (cache.queries(), cfg.output_dim) {
        return Err(EncoderError::Shape(format!(
            "upstream gradient is {:?}, expected ({}, {})",
            upstream.dim(),
            cache.queries(),
            cfg.output_dim
        )));
    }
    let mut g = params.zeros_like();
    let d_r = upstream;
    let h_last = cache.out.last().unwrap();

    g.b = d_r.sum_axis(ndarray::Axis(0));
    g.ws = d_r.t().dot(h_last);
    g.wt = d_r.t().dot(&cache.z);
    let mut d_h = d_r.dot(&params.ws);
    let d_z = d_r.dot(&params.wt);
    g.wo = d_z.t().dot(&cache.concat);
    let d_concat = d_z.dot(&params.wo);

    for h in 0..cfg.heads {
        let d_zh = d_concat.slice(s![.., h * cfg.head_dim..(h + 1) * cfg.head_dim]);
        let (qh, kh, vh) = (&cache.q[h], &cache.k[h], &cache.v[h]);
        let mut d_q = Array2::zeros(qh.raw_dim());
        let mut d_k = Array2::zeros(kh.raw_dim());
        let mut d_v = Array2::zeros(vh.raw_dim());
        for (r, rows) in cache.windows.iter().enumerate() {
            let alpha = cache.alpha[h].row(r);
            let dz = d_zh.row(r);
            let d_alpha: Vec<f64> = rows.iter().map(|&row| dz.dot(&vh.row(row))).collect();
            let mean: f64 = alpha.iter().zip(&d_alpha).map(|(a, d)| a * d).sum();
            for ((&row, &a), &da) in rows.iter().zip(alpha.iter()).zip(&d_alpha) {
                d_v.row_mut(row).scaled_add(a, &dz);
                let ds = a * (da - mean);
                d_q.row_mut(r).scaled_add(ds, &kh.row(row));
                d_k.row_mut(row).scaled_add(ds, &qh.row(r));
            }
        }
        g.wq[h] = d_q.t().dot(&cache.x_query);
        g.wk[h] = d_k.t().dot(&cache.x_all);
        g.wv[h] = d_v.t().dot(&cache.x_all);
    }

    let act = cfg.activation;
    let adj_t = cache.adj.t().to_owned();
    for l in (0..params.gcn.len()).rev() {
        let mut d_pre = d_h;
        ndarray::Zip::from(&mut d_pre)
            .and(&cache.pre[l])
            .and(&cache.out[l])
            .for_each(|d, &z, &y| *d *= act.derivative(z, y));
        g.gcn[l] = d_pre.t().dot(&cache.agg[l]);
        if l == 0 {
            break;
        }
        d_h = aggregate(&adj_t, &d_pre.dot(&params.gcn[l]), cache.n);
    }
    Ok(g)
}
