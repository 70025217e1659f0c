//! Encoder-only transformer over the N mode phases, with a hand-written
//! backward pass. All weights live in one flat vector; [`Layout`] maps
//! tensor names to slices of it.

use ndarray::{s, Array1, Array2, ArrayView2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{PositionalEncoding, TnnError, TnnHyperparams};

const LN_EPS: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
struct LayerSlots {
    wq: usize,
    bq: usize,
    wk: usize,
    bk: usize,
    wv: usize,
    bv: usize,
    wo: usize,
    bo: usize,
    ln1_g: usize,
    ln1_b: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
    ln2_g: usize,
    ln2_b: usize,
}

/// One named block of the flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorSlot {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl TensorSlot {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    n: usize,
    d_m: usize,
    d_t: usize,
    heads: usize,
    dh: usize,
    emb_w: usize,
    emb_b: usize,
    pe: Option<usize>,
    layers: Vec<LayerSlots>,
    head_w: usize,
    head_b: usize,
    tensors: Vec<TensorSlot>,
    total: usize,
}

impl Layout {
    pub fn new(h: &TnnHyperparams) -> Self {
        let (n, d_m, d_t) = (h.n_modes, h.d_m, h.d_t);
        let heads = h.n_attn;
        let dh = h.head_dim();
        let hd = heads * dh;
        let mut tensors = Vec::new();
        let mut next = 0usize;
        let mut alloc = |name: String, rows: usize, cols: usize| {
            let offset = next;
            next += rows * cols;
            tensors.push(TensorSlot { name, offset, rows, cols });
            offset
        };
        let emb_w = alloc("embed.w".into(), 1, d_m);
        let emb_b = alloc("embed.b".into(), 1, d_m);
        let pe = match h.positional_encoding {
            PositionalEncoding::Learned => Some(alloc("pos".into(), n, d_m)),
            PositionalEncoding::Sinusoidal => None,
        };
        let mut layers = Vec::with_capacity(h.n_layers);
        for l in 0..h.n_layers {
            let mut a = |t: &str, r, c| alloc(format!("layer{l}.{t}"), r, c);
            layers.push(LayerSlots {
                wq: a("wq", d_m, hd),
                bq: a("bq", 1, hd),
                wk: a("wk", d_m, hd),
                bk: a("bk", 1, hd),
                wv: a("wv", d_m, hd),
                bv: a("bv", 1, hd),
                wo: a("wo", hd, d_m),
                bo: a("bo", 1, d_m),
                ln1_g: a("ln1.g", 1, d_m),
                ln1_b: a("ln1.b", 1, d_m),
                w2: a("w2", d_m, d_t),
                b2: a("b2", 1, d_t),
                w3: a("w3", d_t, d_m),
                b3: a("b3", 1, d_m),
                ln2_g: a("ln2.g", 1, d_m),
                ln2_b: a("ln2.b", 1, d_m),
            });
        }
        let head_w = alloc("head.w".into(), d_m, 1);
        let head_b = alloc("head.b".into(), 1, 1);
        Self { n, d_m, d_t, heads, dh, emb_w, emb_b, pe, layers, head_w, head_b, tensors, total: next }
    }

    pub fn param_count(&self) -> usize {
        self.total
    }

    pub fn tensors(&self) -> &[TensorSlot] {
        &self.tensors
    }
}

/// Fixed table PE[i, 2j] = sin(i/10000^(2j/d)), PE[i, 2j+1] = cos(same).
pub fn sinusoidal_table(n: usize, d_m: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, d_m), |(i, c)| {
        let j = (c / 2) as f64;
        let angle = i as f64 / 10000f64.powf(2.0 * j / d_m as f64);
        if c % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TnnModel {
    hyper: TnnHyperparams,
    layout: Layout,
    params: Vec<f64>,
    fixed_pe: Array2<f64>,
}

fn view2(p: &[f64], off: usize, r: usize, c: usize) -> ArrayView2<'_, f64> {
    ArrayView2::from_shape((r, c), &p[off..off + r * c]).expect("slot fits layout")
}

fn accumulate<'a>(g: &mut [f64], off: usize, a: impl IntoIterator<Item = &'a f64>) {
    for (d, s) in g[off..].iter_mut().zip(a) {
        *d += *s;
    }
}

struct LnCache {
    xhat: Array2<f64>,
    inv_std: Vec<f64>,
}

fn slot(p: &[f64], off: usize, len: usize) -> &[f64] {
    &p[off..off + len]
}

fn ln_forward(x: &Array2<f64>, g: &[f64], b: &[f64]) -> (Array2<f64>, LnCache) {
    let d = x.ncols();
    let mut xhat = x.as_standard_layout().into_owned();
    let mut out = Array2::zeros(x.raw_dim());
    let mut inv_std = vec![0.0; x.nrows()];
    let rows = xhat.as_slice_mut().expect("standard layout").chunks_exact_mut(d);
    let outs = out.as_slice_mut().expect("standard layout").chunks_exact_mut(d);
    for ((row, orow), is) in rows.zip(outs).zip(inv_std.iter_mut()) {
        let mean = row.iter().sum::<f64>() / d as f64;
        let mut var = 0.0;
        for v in row.iter_mut() {
            *v -= mean;
            var += *v * *v;
        }
        *is = 1.0 / (var / d as f64 + LN_EPS).sqrt();
        for ((v, o), (gc, bc)) in row.iter_mut().zip(orow).zip(g.iter().zip(b)) {
            *v *= *is;
            *o = *v * gc + bc;
        }
    }
    (out, LnCache { xhat, inv_std })
}

/// Returns (dx, dgain, dbias).
fn ln_backward(c: &LnCache, g: &[f64], dy: &Array2<f64>) -> (Array2<f64>, Vec<f64>, Vec<f64>) {
    let d = dy.ncols();
    let dy = dy.as_standard_layout();
    let mut dx = Array2::zeros(dy.raw_dim());
    let (mut dg, mut db) = (vec![0.0; d], vec![0.0; d]);
    let xh_rows = c.xhat.as_slice().expect("standard layout").chunks_exact(d);
    let dy_rows = dy.as_slice().expect("standard layout").chunks_exact(d);
    let dx_rows = dx.as_slice_mut().expect("standard layout").chunks_exact_mut(d);
    for (((xh, dyr), dxr), is) in xh_rows.zip(dy_rows).zip(dx_rows).zip(&c.inv_std) {
        let (mut m1, mut m2) = (0.0, 0.0);
        for col in 0..d {
            dg[col] += dyr[col] * xh[col];
            db[col] += dyr[col];
            let t = dyr[col] * g[col];
            dxr[col] = t;
            m1 += t;
            m2 += t * xh[col];
        }
        m1 /= d as f64;
        m2 /= d as f64;
        for (v, x) in dxr.iter_mut().zip(xh) {
            *v = is * (*v - m1 - x * m2);
        }
    }
    (dx, dg, db)
}

fn dropout_mask(rng: Option<&mut ChaCha8Rng>, p: f64, shape: (usize, usize)) -> Option<Array2<f64>> {
    let rng = rng?;
    if p == 0.0 {
        return None;
    }
    let keep = 1.0 - p;
    let mask = (0..shape.0 * shape.1).map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 }).collect();
    Some(Array2::from_shape_vec(shape, mask).expect("mask shape"))
}

fn add_bias(a: &mut Array2<f64>, b: &[f64]) {
    for row in a.as_slice_mut().expect("standard layout").chunks_exact_mut(b.len()) {
        for (v, c) in row.iter_mut().zip(b) {
            *v += c;
        }
    }
}

fn column_sums(a: &Array2<f64>) -> Vec<f64> {
    let mut out = vec![0.0; a.ncols()];
    for row in a.as_standard_layout().as_slice().expect("standard layout").chunks_exact(a.ncols()) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yv, xv) in y.iter_mut().zip(x) {
        *yv += a * xv;
    }
}

struct LayerTape {
    x_in: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    /// Attention weights, one row-major N × N block per (sample, head).
    probs: Vec<f64>,
    ocat: Array2<f64>,
    attn_mask: Option<Array2<f64>>,
    ln1: LnCache,
    x1: Array2<f64>,
    f1: Array2<f64>,
    act: Array2<f64>,
    ffn_mask: Option<Array2<f64>>,
    ln2: LnCache,
}

/// Intermediate values of one batched forward pass.
pub struct Tape {
    batch: usize,
    inputs: Array2<f64>,
    embed_mask: Option<Array2<f64>>,
    layers: Vec<LayerTape>,
    x_final: Array2<f64>,
}

impl TnnModel {
    /// Randomly initialized model (Glorot-uniform weights, zero biases,
    /// unit layer-norm gains).
    pub fn new(hyper: TnnHyperparams) -> Result<Self, TnnError> {
        hyper.validate()?;
        let layout = Layout::new(&hyper);
        let mut params = vec![0.0; layout.total];
        let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(hyper.seed);
        for t in &layout.tensors {
            let leaf = t.name.rsplit('.').next().unwrap_or("");
            let block = &mut params[t.range()];
            if t.name == "pos" {
                for v in block {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *v = 0.02 * z;
                }
            } else if leaf == "g" {
                block.fill(1.0);
            } else if leaf.starts_with('w') {
                let limit = (6.0 / (t.rows + t.cols) as f64).sqrt();
                for v in block {
                    *v = rng.gen_range(-limit..limit);
                }
            }
        }
        let fixed_pe = sinusoidal_table(hyper.n_modes, hyper.d_m);
        Ok(Self { hyper, layout, params, fixed_pe })
    }

    /// Rebuilds a model from stored weights.
    pub fn from_parts(hyper: TnnHyperparams, params: Vec<f64>) -> Result<Self, TnnError> {
        hyper.validate()?;
        let layout = Layout::new(&hyper);
        if params.len() != layout.total {
            return Err(TnnError::Dimension { expected: layout.total, got: params.len() });
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(TnnError::InvalidHyper("non-finite weight".into()));
        }
        let fixed_pe = sinusoidal_table(hyper.n_modes, hyper.d_m);
        Ok(Self { hyper, layout, params, fixed_pe })
    }

    pub fn hyper(&self) -> &TnnHyperparams {
        &self.hyper
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.layout.total
    }

    pub fn n_modes(&self) -> usize {
        self.hyper.n_modes
    }

    /// Inference on one phase vector; dropout off.
    pub fn forward(&self, phases: &[f64]) -> Result<Vec<f64>, TnnError> {
        let n = self.hyper.n_modes;
        if phases.len() != n {
            return Err(TnnError::Dimension { expected: n, got: phases.len() });
        }
        let x = ArrayView2::from_shape((1, n), phases).expect("row vector");
        Ok(self.predict(x)?.into_raw_vec_and_offset().0)
    }

    /// Inference on a batch (rows = samples).
    pub fn predict(&self, inputs: ArrayView2<f64>) -> Result<Array2<f64>, TnnError> {
        let n = self.hyper.n_modes;
        if inputs.ncols() != n {
            return Err(TnnError::Dimension { expected: n, got: inputs.ncols() });
        }
        let mut out = Array2::zeros(inputs.raw_dim());
        const CHUNK: usize = 256;
        for start in (0..inputs.nrows()).step_by(CHUNK) {
            let end = (start + CHUNK).min(inputs.nrows());
            let (y, _) = self.run(inputs.slice(s![start..end, ..]), None);
            out.slice_mut(s![start..end, ..]).assign(&y);
        }
        Ok(out)
    }

    /// Single-sample forward with dropout drawn from `rng`.
    pub fn forward_train(&self, phases: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<f64>, TnnError> {
        let n = self.hyper.n_modes;
        if phases.len() != n {
            return Err(TnnError::Dimension { expected: n, got: phases.len() });
        }
        let x = ArrayView2::from_shape((1, n), phases).expect("row vector");
        Ok(self.run(x, Some(rng)).0.into_raw_vec_and_offset().0)
    }

    /// Batched forward pass. Dropout is active iff `rng` is given.
    pub fn run(&self, inputs: ArrayView2<f64>, mut rng: Option<&mut ChaCha8Rng>) -> (Array2<f64>, Tape) {
        let l = &self.layout;
        let p = &self.params[..];
        let (b, n, d_m) = (inputs.nrows(), l.n, l.d_m);
        let rows = b * n;
        let drop = self.hyper.dropout_rate;

        let we = slot(p, l.emb_w, d_m);
        let be = slot(p, l.emb_b, d_m);
        let pe = match l.pe {
            Some(off) => view2(p, off, n, d_m),
            None => self.fixed_pe.view(),
        };
        let mut x = Array2::zeros((rows, d_m));
        for (r, row) in x.as_slice_mut().unwrap().chunks_exact_mut(d_m).enumerate() {
            let phase = inputs[[r / n, r % n]];
            for (c, v) in row.iter_mut().enumerate() {
                *v = we[c] * phase + be[c] + pe[[r % n, c]];
            }
        }
        let embed_mask = dropout_mask(rng.as_deref_mut(), drop, (rows, d_m));
        if let Some(m) = &embed_mask {
            x *= m;
        }

        let scale = 1.0 / (l.dh as f64).sqrt();
        let hd = l.heads * l.dh;
        let mut tapes = Vec::with_capacity(l.layers.len());
        for ls in &l.layers {
            let x_in = x;
            let mut q = x_in.dot(&view2(p, ls.wq, d_m, hd));
            add_bias(&mut q, slot(p, ls.bq, hd));
            let mut k = x_in.dot(&view2(p, ls.wk, d_m, hd));
            add_bias(&mut k, slot(p, ls.bk, hd));
            let mut v = x_in.dot(&view2(p, ls.wv, d_m, hd));
            add_bias(&mut v, slot(p, ls.bv, hd));

            let (qs, ks, vs) = (q.as_slice().unwrap(), k.as_slice().unwrap(), v.as_slice().unwrap());
            let mut ocat = Array2::zeros((rows, hd));
            let os = ocat.as_slice_mut().unwrap();
            let mut probs = vec![0.0; b * l.heads * n * n];
            for (blk, pblk) in probs.chunks_exact_mut(n * n).enumerate() {
                let (bi, h) = (blk / l.heads, blk % l.heads);
                let at = |r: usize| (bi * n + r) * hd + h * l.dh;
                for (i, prow) in pblk.chunks_exact_mut(n).enumerate() {
                    let qi = &qs[at(i)..at(i) + l.dh];
                    let mut mx = f64::NEG_INFINITY;
                    for (j, pv) in prow.iter_mut().enumerate() {
                        *pv = dot(qi, &ks[at(j)..at(j) + l.dh]) * scale;
                        mx = mx.max(*pv);
                    }
                    let mut z = 0.0;
                    for pv in prow.iter_mut() {
                        *pv = (*pv - mx).exp();
                        z += *pv;
                    }
                    let oi = &mut os[at(i)..at(i) + l.dh];
                    for (j, pv) in prow.iter_mut().enumerate() {
                        *pv /= z;
                        axpy(oi, *pv, &vs[at(j)..at(j) + l.dh]);
                    }
                }
            }
            let mut a = ocat.dot(&view2(p, ls.wo, hd, d_m));
            add_bias(&mut a, slot(p, ls.bo, d_m));
            let attn_mask = dropout_mask(rng.as_deref_mut(), drop, (rows, d_m));
            if let Some(m) = &attn_mask {
                a *= m;
            }
            let y = &x_in + &a;
            let (x1, ln1) = ln_forward(&y, slot(p, ls.ln1_g, d_m), slot(p, ls.ln1_b, d_m));

            let mut f1 = x1.dot(&view2(p, ls.w2, d_m, l.d_t));
            add_bias(&mut f1, slot(p, ls.b2, l.d_t));
            let act = f1.mapv(|v| v.max(0.0));
            let mut f2 = act.dot(&view2(p, ls.w3, l.d_t, d_m));
            add_bias(&mut f2, slot(p, ls.b3, d_m));
            let ffn_mask = dropout_mask(rng.as_deref_mut(), drop, (rows, d_m));
            if let Some(m) = &ffn_mask {
                f2 *= m;
            }
            let z = &x1 + &f2;
            let (x2, ln2) = ln_forward(&z, slot(p, ls.ln2_g, d_m), slot(p, ls.ln2_b, d_m));
            tapes.push(LayerTape { x_in, q, k, v, probs, ocat, attn_mask, ln1, x1, f1, act, ffn_mask, ln2 });
            x = x2;
        }

        let out = x.dot(&view2(p, l.head_w, d_m, 1)) + p[l.head_b];
        let out = out.into_shape_with_order((b, n)).expect("one scalar per position");
        let tape = Tape { batch: b, inputs: inputs.to_owned(), embed_mask, layers: tapes, x_final: x };
        (out, tape)
    }

    /// Gradient of a scalar objective with respect to every parameter,
    /// given its gradient `dout` (batch × N) with respect to the outputs.
    pub fn backward(&self, tape: &Tape, dout: ArrayView2<f64>) -> Vec<f64> {
        let l = &self.layout;
        let p = &self.params[..];
        let (b, n, d_m) = (tape.batch, l.n, l.d_m);
        let rows = b * n;
        let hd = l.heads * l.dh;
        let mut g = vec![0.0; l.total];

        let dcol = dout.to_owned().into_shape_with_order((rows, 1)).expect("column");
        accumulate(&mut g, l.head_w, tape.x_final.t().dot(&dcol).iter());
        g[l.head_b] += dcol.sum();
        let mut dx = dcol.dot(&view2(p, l.head_w, d_m, 1).t());

        let scale = 1.0 / (l.dh as f64).sqrt();
        for (ls, t) in l.layers.iter().zip(&tape.layers).rev() {
            let (mut dz, dg2, db2n) = ln_backward(&t.ln2, slot(p, ls.ln2_g, d_m), &dx);
            accumulate(&mut g, ls.ln2_g, &dg2);
            accumulate(&mut g, ls.ln2_b, &db2n);
            let mut dx1 = dz.clone();
            if let Some(m) = &t.ffn_mask {
                dz *= m;
            }
            accumulate(&mut g, ls.w3, t.act.t().dot(&dz).iter());
            accumulate(&mut g, ls.b3, &column_sums(&dz));
            let mut dh = dz.dot(&view2(p, ls.w3, l.d_t, d_m).t());
            dh.zip_mut_with(&t.f1, |d, f| {
                if *f <= 0.0 {
                    *d = 0.0
                }
            });
            accumulate(&mut g, ls.w2, t.x1.t().dot(&dh).iter());
            accumulate(&mut g, ls.b2, &column_sums(&dh));
            dx1 += &dh.dot(&view2(p, ls.w2, d_m, l.d_t).t());

            let (dy, dg1, db1n) = ln_backward(&t.ln1, slot(p, ls.ln1_g, d_m), &dx1);
            accumulate(&mut g, ls.ln1_g, &dg1);
            accumulate(&mut g, ls.ln1_b, &db1n);
            let mut dx_in = dy.clone();
            let mut da = dy;
            if let Some(m) = &t.attn_mask {
                da *= m;
            }
            accumulate(&mut g, ls.wo, t.ocat.t().dot(&da).iter());
            accumulate(&mut g, ls.bo, &column_sums(&da));
            let docat = da.dot(&view2(p, ls.wo, hd, d_m).t());

            let ds_ = docat.as_slice().unwrap();
            let (qs, ks, vs) = (t.q.as_slice().unwrap(), t.k.as_slice().unwrap(), t.v.as_slice().unwrap());
            let mut dq = Array2::zeros((rows, hd));
            let mut dk = Array2::zeros((rows, hd));
            let mut dv = Array2::zeros((rows, hd));
            {
                let (dqs, dks, dvs) = (dq.as_slice_mut().unwrap(), dk.as_slice_mut().unwrap(), dv.as_slice_mut().unwrap());
                let mut dp = vec![0.0; n];
                for (blk, pblk) in t.probs.chunks_exact(n * n).enumerate() {
                    let (bi, h) = (blk / l.heads, blk % l.heads);
                    let at = |r: usize| (bi * n + r) * hd + h * l.dh;
                    for (i, prow) in pblk.chunks_exact(n).enumerate() {
                        let doi = &ds_[at(i)..at(i) + l.dh];
                        let mut tot = 0.0;
                        for j in 0..n {
                            dp[j] = dot(doi, &vs[at(j)..at(j) + l.dh]);
                            tot += prow[j] * dp[j];
                            axpy(&mut dvs[at(j)..at(j) + l.dh], prow[j], doi);
                        }
                        let qi = &qs[at(i)..at(i) + l.dh];
                        for j in 0..n {
                            let dsij = prow[j] * (dp[j] - tot) * scale;
                            axpy(&mut dqs[at(i)..at(i) + l.dh], dsij, &ks[at(j)..at(j) + l.dh]);
                            axpy(&mut dks[at(j)..at(j) + l.dh], dsij, qi);
                        }
                    }
                }
            }
            for (dm, w, bias) in [(&dq, ls.wq, ls.bq), (&dk, ls.wk, ls.bk), (&dv, ls.wv, ls.bv)] {
                accumulate(&mut g, w, t.x_in.t().dot(dm).iter());
                accumulate(&mut g, bias, &column_sums(dm));
                dx_in += &dm.dot(&view2(p, w, d_m, hd).t());
            }
            dx = dx_in;
        }

        if let Some(m) = &tape.embed_mask {
            dx *= m;
        }
        let phases = tape.inputs.view().into_shape_with_order(rows).expect("flat inputs");
        let dwe: Array1<f64> = dx.t().dot(&phases);
        accumulate(&mut g, l.emb_w, dwe.iter());
        accumulate(&mut g, l.emb_b, &column_sums(&dx));
        if let Some(off) = l.pe {
            let mut dpe = Array2::<f64>::zeros((n, d_m));
            for (r, row) in dx.rows().into_iter().enumerate() {
                let mut target = dpe.row_mut(r % n);
                target += &row;
            }
            accumulate(&mut g, off, dpe.iter());
        }
        g
    }
}
