//! Layer implementations: 1x4 convolution, batch normalization, ReLU,
//! pooling, dropout, fully-connected and softmax cross-entropy.
//!
//! Forward passes cache whatever their backward pass needs. Batch work is
//! split into fixed-size sample chunks whose partial reductions are combined
//! in chunk order, so results are bit-identical whether the chunks run on
//! one thread or many.

use crate::{Error, Result};
use rayon::prelude::*;

/// Fixed sample-chunk size for parallel work; part of the numeric contract.
pub const CHUNK: usize = 16;

/// A batch of activations shaped `[n][c][rows][w]`, row-major, f32.
#[derive(Debug, Clone, PartialEq)]
pub struct Act {
    pub n: usize,
    pub c: usize,
    pub rows: usize,
    pub w: usize,
    pub data: Vec<f32>,
}

impl Act {
    pub fn zeros(n: usize, c: usize, rows: usize, w: usize) -> Self {
        Self { n, c, rows, w, data: vec![0.0; n * c * rows * w] }
    }

    pub fn from_batch(tensor: Vec<f32>, n: usize, rows: usize, w: usize) -> Self {
        debug_assert_eq!(tensor.len(), n * rows * w);
        Self { n, c: 1, rows, w, data: tensor }
    }

    pub fn sample_len(&self) -> usize {
        self.c * self.rows * self.w
    }

    pub fn sample(&self, i: usize) -> &[f32] {
        let l = self.sample_len();
        &self.data[i * l..(i + 1) * l]
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Divergence("non-finite activation".into()))
        }
    }
}

/// Run `op(chunk_index, sample_range)` over fixed-size sample chunks,
/// optionally in parallel, collecting per-chunk outputs in chunk order.
fn map_chunks<T: Send>(
    n: usize,
    parallel: bool,
    op: impl Fn(usize, std::ops::Range<usize>) -> T + Sync,
) -> Vec<T> {
    let n_chunks = n.div_ceil(CHUNK);
    let run = |ci: usize| {
        let lo = ci * CHUNK;
        let hi = ((ci + 1) * CHUNK).min(n);
        op(ci, lo..hi)
    };
    if parallel {
        (0..n_chunks).into_par_iter().map(run).collect()
    } else {
        (0..n_chunks).map(run).collect()
    }
}

/// Same-padded 1x4 convolution along the width axis; rows share weights.
///
/// Output column `w` correlates input columns `w-2 .. w+1` with the kernel,
/// i.e. padding is two columns on the left and one on the right.
pub struct Conv1x4 {
    pub in_c: usize,
    pub out_c: usize,
    /// Weights `[out_c][in_c][4]`.
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
    pub grad_weight: Vec<f32>,
    pub grad_bias: Vec<f32>,
    cached_x: Option<Act>,
}

pub const KERNEL: usize = 4;
const PAD_LEFT: isize = 2;

impl Conv1x4 {
    pub fn new(in_c: usize, out_c: usize) -> Self {
        Self {
            in_c,
            out_c,
            weight: vec![0.0; out_c * in_c * KERNEL],
            bias: vec![0.0; out_c],
            grad_weight: vec![0.0; out_c * in_c * KERNEL],
            grad_bias: vec![0.0; out_c],
            cached_x: None,
        }
    }

    fn conv_sample(&self, x: &[f32], out: &mut [f32], rows: usize, w: usize) {
        for f in 0..self.out_c {
            let out_f = &mut out[f * rows * w..(f + 1) * rows * w];
            out_f.fill(self.bias[f]);
            for c in 0..self.in_c {
                let x_c = &x[c * rows * w..(c + 1) * rows * w];
                let k = &self.weight[(f * self.in_c + c) * KERNEL..(f * self.in_c + c + 1) * KERNEL];
                for r in 0..rows {
                    let xr = &x_c[r * w..(r + 1) * w];
                    let or = &mut out_f[r * w..(r + 1) * w];
                    for (t, &kt) in k.iter().enumerate() {
                        let shift = t as isize - PAD_LEFT; // x index = out index + shift
                        let (o_lo, x_lo) =
                            if shift < 0 { ((-shift) as usize, 0) } else { (0, shift as usize) };
                        let count = w - o_lo.max(x_lo);
                        let dst = &mut or[o_lo..o_lo + count];
                        let src = &xr[x_lo..x_lo + count];
                        for (o, &v) in dst.iter_mut().zip(src) {
                            *o += kt * v;
                        }
                    }
                }
            }
        }
    }

    pub fn forward(&mut self, x: &Act, parallel: bool, cache: bool) -> Act {
        debug_assert_eq!(x.c, self.in_c);
        let mut out = Act::zeros(x.n, self.out_c, x.rows, x.w);
        let in_len = x.sample_len();
        let out_len = out.sample_len();
        let chunks: Vec<(usize, Vec<f32>)> = map_chunks(x.n, parallel, |_ci, range| {
            let mut buf = vec![0.0f32; (range.end - range.start) * out_len];
            for (j, i) in range.clone().enumerate() {
                self.conv_sample(
                    &x.data[i * in_len..(i + 1) * in_len],
                    &mut buf[j * out_len..(j + 1) * out_len],
                    x.rows,
                    x.w,
                );
            }
            (range.start, buf)
        });
        for (start, buf) in chunks {
            out.data[start * out_len..start * out_len + buf.len()].copy_from_slice(&buf);
        }
        if cache {
            self.cached_x = Some(x.clone());
        }
        out
    }

    pub fn backward(&mut self, grad_out: &Act, parallel: bool) -> Act {
        let x = self.cached_x.take().expect("forward before backward");
        let (rows, w) = (x.rows, x.w);
        let in_len = x.sample_len();
        let out_len = grad_out.sample_len();
        let wlen = self.weight.len();

        struct Partial {
            start: usize,
            dx: Vec<f32>,
            dw: Vec<f32>,
            db: Vec<f32>,
        }
        let parts: Vec<Partial> = map_chunks(x.n, parallel, |_ci, range| {
            let mut dx = vec![0.0f32; (range.end - range.start) * in_len];
            let mut dw = vec![0.0f32; wlen];
            let mut db = vec![0.0f32; self.out_c];
            for (j, i) in range.clone().enumerate() {
                let g = &grad_out.data[i * out_len..(i + 1) * out_len];
                let xs = &x.data[i * in_len..(i + 1) * in_len];
                let dxs = &mut dx[j * in_len..(j + 1) * in_len];
                for f in 0..self.out_c {
                    let g_f = &g[f * rows * w..(f + 1) * rows * w];
                    db[f] += g_f.iter().sum::<f32>();
                    for c in 0..self.in_c {
                        let x_c = &xs[c * rows * w..(c + 1) * rows * w];
                        let dx_c = &mut dxs[c * rows * w..(c + 1) * rows * w];
                        let kbase = (f * self.in_c + c) * KERNEL;
                        for r in 0..rows {
                            let gr = &g_f[r * w..(r + 1) * w];
                            let xr = &x_c[r * w..(r + 1) * w];
                            let dxr = &mut dx_c[r * w..(r + 1) * w];
                            for t in 0..KERNEL {
                                let shift = t as isize - PAD_LEFT;
                                let (o_lo, x_lo) =
                                    if shift < 0 { ((-shift) as usize, 0) } else { (0, shift as usize) };
                                let count = w - o_lo.max(x_lo);
                                let kt = self.weight[kbase + t];
                                let mut dot = 0.0f32;
                                for i2 in 0..count {
                                    let gv = gr[o_lo + i2];
                                    dot += gv * xr[x_lo + i2];
                                    dxr[x_lo + i2] += kt * gv;
                                }
                                dw[kbase + t] += dot;
                            }
                        }
                    }
                }
            }
            Partial { start: range.start, dx, dw, db }
        });

        let mut dx = Act::zeros(x.n, self.in_c, rows, w);
        for p in parts {
            dx.data[p.start * in_len..p.start * in_len + p.dx.len()].copy_from_slice(&p.dx);
            for (a, b) in self.grad_weight.iter_mut().zip(&p.dw) {
                *a += b;
            }
            for (a, b) in self.grad_bias.iter_mut().zip(&p.db) {
                *a += b;
            }
        }
        dx
    }
}

/// Per-channel batch normalization over the (sample, row, width) axes.
pub struct BatchNorm {
    pub c: usize,
    pub gamma: Vec<f32>,
    pub beta: Vec<f32>,
    pub grad_gamma: Vec<f32>,
    pub grad_beta: Vec<f32>,
    pub running_mean: Vec<f32>,
    pub running_var: Vec<f32>,
    pub eps: f32,
    pub momentum: f32,
    cached: Option<(Act, Vec<f32>, Vec<f32>)>, // xhat, mean, inv_std
}

impl BatchNorm {
    pub fn new(c: usize) -> Self {
        Self {
            c,
            gamma: vec![1.0; c],
            beta: vec![0.0; c],
            grad_gamma: vec![0.0; c],
            grad_beta: vec![0.0; c],
            running_mean: vec![0.0; c],
            running_var: vec![1.0; c],
            eps: 1e-5,
            momentum: 0.1,
            cached: None,
        }
    }

    pub fn forward(&mut self, x: &Act, train: bool, parallel: bool) -> Result<Act> {
        let per = x.rows * x.w;
        let count = (x.n * per) as f64;
        let (mean, var) = if train {
            if x.n < 2 {
                return Err(Error::DegenerateBatch("batchnorm needs batch size >= 2".into()));
            }
            // chunked two-pass statistics, reduced in chunk order
            let partials: Vec<(Vec<f64>, Vec<f64>)> = map_chunks(x.n, parallel, |_, range| {
                let mut s = vec![0.0f64; self.c];
                let mut s2 = vec![0.0f64; self.c];
                for i in range {
                    let xs = x.sample(i);
                    for c in 0..self.c {
                        let (mut a, mut b) = (0.0f64, 0.0f64);
                        for &v in &xs[c * per..(c + 1) * per] {
                            a += v as f64;
                            b += (v as f64) * (v as f64);
                        }
                        s[c] += a;
                        s2[c] += b;
                    }
                }
                (s, s2)
            });
            let mut mean = vec![0.0f64; self.c];
            let mut var = vec![0.0f64; self.c];
            for (s, s2) in &partials {
                for c in 0..self.c {
                    mean[c] += s[c];
                    var[c] += s2[c];
                }
            }
            for c in 0..self.c {
                mean[c] /= count;
                var[c] = (var[c] / count - mean[c] * mean[c]).max(0.0);
            }
            for c in 0..self.c {
                self.running_mean[c] =
                    (1.0 - self.momentum) * self.running_mean[c] + self.momentum * mean[c] as f32;
                self.running_var[c] =
                    (1.0 - self.momentum) * self.running_var[c] + self.momentum * var[c] as f32;
            }
            (
                mean.iter().map(|&v| v as f32).collect::<Vec<f32>>(),
                var.iter().map(|&v| v as f32).collect::<Vec<f32>>(),
            )
        } else {
            (self.running_mean.clone(), self.running_var.clone())
        };

        let inv_std: Vec<f32> = var.iter().map(|&v| 1.0 / (v + self.eps).sqrt()).collect();
        let mut xhat = Act::zeros(x.n, x.c, x.rows, x.w);
        let mut out = Act::zeros(x.n, x.c, x.rows, x.w);
        let sl = x.sample_len();
        let pieces: Vec<(usize, Vec<f32>, Vec<f32>)> = map_chunks(x.n, parallel, |_, range| {
            let mut xh = vec![0.0f32; (range.end - range.start) * sl];
            let mut o = vec![0.0f32; (range.end - range.start) * sl];
            for (j, i) in range.clone().enumerate() {
                let xs = x.sample(i);
                for c in 0..self.c {
                    let (m, is, g, b) = (mean[c], inv_std[c], self.gamma[c], self.beta[c]);
                    for k in 0..per {
                        let h = (xs[c * per + k] - m) * is;
                        xh[j * sl + c * per + k] = h;
                        o[j * sl + c * per + k] = g * h + b;
                    }
                }
            }
            (range.start, xh, o)
        });
        for (start, xh, o) in pieces {
            xhat.data[start * sl..start * sl + xh.len()].copy_from_slice(&xh);
            out.data[start * sl..start * sl + o.len()].copy_from_slice(&o);
        }
        if train {
            self.cached = Some((xhat, mean, inv_std));
        }
        Ok(out)
    }

    pub fn backward(&mut self, grad_out: &Act, parallel: bool) -> Act {
        let (xhat, _mean, inv_std) = self.cached.take().expect("forward(train) before backward");
        let per = xhat.rows * xhat.w;
        let count = (xhat.n * per) as f32;
        let sl = xhat.sample_len();

        // per-channel reductions: sum(g) and sum(g * xhat)
        let partials: Vec<(Vec<f64>, Vec<f64>)> = map_chunks(xhat.n, parallel, |_, range| {
            let mut sg = vec![0.0f64; self.c];
            let mut sgx = vec![0.0f64; self.c];
            for i in range {
                let g = grad_out.sample(i);
                let xh = xhat.sample(i);
                for c in 0..self.c {
                    let (mut a, mut b) = (0.0f64, 0.0f64);
                    for k in 0..per {
                        let gv = g[c * per + k] as f64;
                        a += gv;
                        b += gv * xh[c * per + k] as f64;
                    }
                    sg[c] += a;
                    sgx[c] += b;
                }
            }
            (sg, sgx)
        });
        let mut sum_g = vec![0.0f64; self.c];
        let mut sum_gx = vec![0.0f64; self.c];
        for (sg, sgx) in &partials {
            for c in 0..self.c {
                sum_g[c] += sg[c];
                sum_gx[c] += sgx[c];
            }
        }
        for c in 0..self.c {
            self.grad_beta[c] += sum_g[c] as f32;
            self.grad_gamma[c] += sum_gx[c] as f32;
        }

        let mut dx = Act::zeros(xhat.n, xhat.c, xhat.rows, xhat.w);
        let pieces: Vec<(usize, Vec<f32>)> = map_chunks(xhat.n, parallel, |_, range| {
            let mut d = vec![0.0f32; (range.end - range.start) * sl];
            for (j, i) in range.clone().enumerate() {
                let g = grad_out.sample(i);
                let xh = xhat.sample(i);
                for c in 0..self.c {
                    let scale = self.gamma[c] * inv_std[c] / count;
                    let (sg, sgx) = (sum_g[c] as f32, sum_gx[c] as f32);
                    for k in 0..per {
                        let idx = c * per + k;
                        d[j * sl + idx] = scale * (count * g[idx] - sg - xh[idx] * sgx);
                    }
                }
            }
            (range.start, d)
        });
        for (start, d) in pieces {
            dx.data[start * sl..start * sl + d.len()].copy_from_slice(&d);
        }
        dx
    }
}

/// Rectified linear activation.
pub struct Relu {
    cached_out: Option<Act>,
}

impl Relu {
    pub fn new() -> Self {
        Self { cached_out: None }
    }

    pub fn forward(&mut self, x: &Act, cache: bool) -> Act {
        let mut out = x.clone();
        for v in &mut out.data {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        if cache {
            self.cached_out = Some(out.clone());
        }
        out
    }

    pub fn backward(&mut self, grad_out: &Act) -> Act {
        let out = self.cached_out.take().expect("forward before backward");
        let mut dx = grad_out.clone();
        for (d, &o) in dx.data.iter_mut().zip(&out.data) {
            if o <= 0.0 {
                *d = 0.0;
            }
        }
        dx
    }
}

/// Width-halving max pool (1x2 windows, stride 2); gradient routes to the
/// argmax position of each window.
pub struct MaxPool1x2 {
    argmax: Option<Vec<u8>>, // 0 or 1 per output element
    in_w: usize,
}

impl MaxPool1x2 {
    pub fn new() -> Self {
        Self { argmax: None, in_w: 0 }
    }

    pub fn forward(&mut self, x: &Act, cache: bool) -> Act {
        debug_assert!(x.w % 2 == 0);
        let w_out = x.w / 2;
        let mut out = Act::zeros(x.n, x.c, x.rows, w_out);
        let mut arg = vec![0u8; out.data.len()];
        let rows_total = x.n * x.c * x.rows;
        for rr in 0..rows_total {
            let xi = &x.data[rr * x.w..(rr + 1) * x.w];
            let oi = &mut out.data[rr * w_out..(rr + 1) * w_out];
            let ai = &mut arg[rr * w_out..(rr + 1) * w_out];
            for k in 0..w_out {
                let (a, b) = (xi[2 * k], xi[2 * k + 1]);
                if b > a {
                    oi[k] = b;
                    ai[k] = 1;
                } else {
                    oi[k] = a;
                }
            }
        }
        if cache {
            self.argmax = Some(arg);
            self.in_w = x.w;
        }
        out
    }

    pub fn backward(&mut self, grad_out: &Act) -> Act {
        let arg = self.argmax.take().expect("forward before backward");
        let w_in = self.in_w;
        let w_out = grad_out.w;
        let mut dx = Act::zeros(grad_out.n, grad_out.c, grad_out.rows, w_in);
        let rows_total = grad_out.n * grad_out.c * grad_out.rows;
        for rr in 0..rows_total {
            let gi = &grad_out.data[rr * w_out..(rr + 1) * w_out];
            let ai = &arg[rr * w_out..(rr + 1) * w_out];
            let di = &mut dx.data[rr * w_in..(rr + 1) * w_in];
            for k in 0..w_out {
                di[2 * k + ai[k] as usize] = gi[k];
            }
        }
        dx
    }
}

/// Width-averaging pool with a fixed window (stride = window).
pub struct AvgPool {
    pub window: usize,
    in_w: usize,
}

impl AvgPool {
    pub fn new(window: usize) -> Self {
        Self { window, in_w: 0 }
    }

    pub fn forward(&mut self, x: &Act) -> Act {
        debug_assert!(x.w % self.window == 0);
        let w_out = x.w / self.window;
        self.in_w = x.w;
        let mut out = Act::zeros(x.n, x.c, x.rows, w_out);
        let inv = 1.0 / self.window as f32;
        let rows_total = x.n * x.c * x.rows;
        for rr in 0..rows_total {
            let xi = &x.data[rr * x.w..(rr + 1) * x.w];
            let oi = &mut out.data[rr * w_out..(rr + 1) * w_out];
            for k in 0..w_out {
                oi[k] = xi[k * self.window..(k + 1) * self.window].iter().sum::<f32>() * inv;
            }
        }
        out
    }

    pub fn backward(&mut self, grad_out: &Act) -> Act {
        let w_in = self.in_w;
        let w_out = grad_out.w;
        let inv = 1.0 / self.window as f32;
        let mut dx = Act::zeros(grad_out.n, grad_out.c, grad_out.rows, w_in);
        let rows_total = grad_out.n * grad_out.c * grad_out.rows;
        for rr in 0..rows_total {
            let gi = &grad_out.data[rr * w_out..(rr + 1) * w_out];
            let di = &mut dx.data[rr * w_in..(rr + 1) * w_in];
            for k in 0..w_out {
                let g = gi[k] * inv;
                for t in 0..self.window {
                    di[k * self.window + t] = g;
                }
            }
        }
        dx
    }
}

/// Inverted dropout on flat feature vectors.
pub struct Dropout {
    pub rate: f32,
    mask: Option<Vec<f32>>,
}

impl Dropout {
    pub fn new(rate: f32) -> Self {
        Self { rate, mask: None }
    }

    /// Train-mode forward; `rng` supplies the mask (drawn serially so the
    /// stream is independent of thread scheduling).
    pub fn forward_train(&mut self, x: &[f32], rng: &mut rand_chacha::ChaCha8Rng) -> Vec<f32> {
        use rand::Rng;
        let keep = 1.0 - self.rate;
        let scale = 1.0 / keep;
        let mask: Vec<f32> =
            (0..x.len()).map(|_| if rng.gen::<f32>() < keep { scale } else { 0.0 }).collect();
        let out = x.iter().zip(&mask).map(|(v, m)| v * m).collect();
        self.mask = Some(mask);
        out
    }

    pub fn forward_infer(&self, x: &[f32]) -> Vec<f32> {
        x.to_vec()
    }

    pub fn backward(&mut self, grad_out: &[f32]) -> Vec<f32> {
        let mask = self.mask.take().expect("forward_train before backward");
        grad_out.iter().zip(&mask).map(|(g, m)| g * m).collect()
    }
}

/// Fully-connected layer on flat per-sample features.
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Weights `[out_dim][in_dim]`.
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
    pub grad_weight: Vec<f32>,
    pub grad_bias: Vec<f32>,
    cached_x: Option<Vec<f32>>,
    cached_n: usize,
}

impl Dense {
    pub fn new(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weight: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
            grad_weight: vec![0.0; in_dim * out_dim],
            grad_bias: vec![0.0; out_dim],
            cached_x: None,
            cached_n: 0,
        }
    }

    pub fn forward(&mut self, x: &[f32], n: usize, cache: bool) -> Vec<f32> {
        debug_assert_eq!(x.len(), n * self.in_dim);
        let mut out = vec![0.0f32; n * self.out_dim];
        for i in 0..n {
            let xi = &x[i * self.in_dim..(i + 1) * self.in_dim];
            let oi = &mut out[i * self.out_dim..(i + 1) * self.out_dim];
            for (o, (wrow, b)) in
                oi.iter_mut().zip(self.weight.chunks_exact(self.in_dim).zip(&self.bias))
            {
                let mut acc = *b;
                for (a, v) in wrow.iter().zip(xi) {
                    acc += a * v;
                }
                *o = acc;
            }
        }
        if cache {
            self.cached_x = Some(x.to_vec());
            self.cached_n = n;
        }
        out
    }

    pub fn backward(&mut self, grad_out: &[f32]) -> Vec<f32> {
        let x = self.cached_x.take().expect("forward before backward");
        let n = self.cached_n;
        let mut dx = vec![0.0f32; n * self.in_dim];
        for i in 0..n {
            let gi = &grad_out[i * self.out_dim..(i + 1) * self.out_dim];
            let xi = &x[i * self.in_dim..(i + 1) * self.in_dim];
            let di = &mut dx[i * self.in_dim..(i + 1) * self.in_dim];
            for (f, &g) in gi.iter().enumerate() {
                self.grad_bias[f] += g;
                let wrow = &self.weight[f * self.in_dim..(f + 1) * self.in_dim];
                let grow = &mut self.grad_weight[f * self.in_dim..(f + 1) * self.in_dim];
                for k in 0..self.in_dim {
                    grow[k] += g * xi[k];
                    di[k] += g * wrow[k];
                }
            }
        }
        dx
    }
}

/// Softmax + categorical cross-entropy head.
///
/// Returns the mean loss and the probability tensor; its backward is
/// `(p - onehot) / batch`.
pub fn softmax_xent(logits: &[f32], labels: &[u8], classes: usize) -> (f32, Vec<f32>) {
    let n = labels.len();
    debug_assert_eq!(logits.len(), n * classes);
    let mut probs = vec![0.0f32; logits.len()];
    let mut loss = 0.0f64;
    for i in 0..n {
        let li = &logits[i * classes..(i + 1) * classes];
        let pi = &mut probs[i * classes..(i + 1) * classes];
        let m = li.iter().fold(f32::NEG_INFINITY, |a, &b| a.max(b));
        let mut z = 0.0f32;
        for (p, &l) in pi.iter_mut().zip(li) {
            *p = (l - m).exp();
            z += *p;
        }
        for p in pi.iter_mut() {
            *p /= z;
        }
        loss -= (pi[labels[i] as usize].max(1e-30) as f64).ln();
    }
    ((loss / n as f64) as f32, probs)
}

pub fn softmax_xent_backward(probs: &[f32], labels: &[u8], classes: usize) -> Vec<f32> {
    let n = labels.len();
    let mut grad = probs.to_vec();
    let inv = 1.0 / n as f32;
    for i in 0..n {
        grad[i * classes + labels[i] as usize] -= 1.0;
        for g in &mut grad[i * classes..(i + 1) * classes] {
            *g *= inv;
        }
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn rng() -> rand_chacha::ChaCha8Rng {
        crate::seeds::rng(&[99])
    }

    fn random_act(n: usize, c: usize, rows: usize, w: usize, r: &mut rand_chacha::ChaCha8Rng) -> Act {
        let mut a = Act::zeros(n, c, rows, w);
        for v in &mut a.data {
            *v = r.gen_range(-1.0..1.0);
        }
        a
    }

    #[test]
    fn conv_identity_kernel_passes_rows_through() {
        let mut conv = Conv1x4::new(1, 1);
        conv.weight = vec![0.0, 0.0, 1.0, 0.0]; // delta at the aligned tap
        let mut r = rng();
        let x = random_act(2, 1, 2, 16, &mut r);
        let y = conv.forward(&x, false, false);
        assert_eq!(y.data, x.data);
    }

    #[test]
    fn conv_sliding_sum_example() {
        // input row [1,2,3,4], all-ones kernel, same padding (left 2, right 1)
        let mut conv = Conv1x4::new(1, 1);
        conv.weight = vec![1.0; 4];
        let mut x = Act::zeros(1, 1, 1, 4);
        x.data = vec![1.0, 2.0, 3.0, 4.0];
        let y = conv.forward(&x, false, false);
        assert_eq!(y.data, vec![3.0, 6.0, 10.0, 9.0]);
    }

    #[test]
    fn conv_rows_share_weights() {
        let mut conv = Conv1x4::new(1, 3);
        let mut r = rng();
        for v in &mut conv.weight {
            *v = r.gen_range(-1.0..1.0);
        }
        let mut x = Act::zeros(1, 1, 2, 12);
        let row: Vec<f32> = (0..12).map(|k| (k as f32 * 0.3).sin()).collect();
        x.data[..12].copy_from_slice(&row);
        x.data[12..].copy_from_slice(&row);
        let y = conv.forward(&x, false, false);
        for f in 0..3 {
            let base = f * 2 * 12;
            assert_eq!(y.data[base..base + 12], y.data[base + 12..base + 24]);
        }
    }

    /// Central finite-difference check of a scalar loss wrt a parameter vec.
    fn finite_diff_check(
        analytic: &[f32],
        params: &mut [f32],
        mut loss: impl FnMut(&[f32]) -> f32,
        step: f32,
        tol: f32,
        what: &str,
    ) {
        let mut max_rel = 0.0f32;
        for i in 0..params.len() {
            let orig = params[i];
            params[i] = orig + step;
            let lp = loss(params);
            params[i] = orig - step;
            let lm = loss(params);
            params[i] = orig;
            let numeric = (lp - lm) / (2.0 * step);
            let denom = numeric.abs().max(analytic[i].abs()).max(1e-4);
            let rel = (numeric - analytic[i]).abs() / denom;
            max_rel = max_rel.max(rel);
        }
        assert!(max_rel < tol, "{what}: max rel err {max_rel}");
    }

    #[test]
    fn conv_gradients_match_finite_differences() {
        let mut r = rng();
        let x = random_act(1, 1, 2, 8, &mut r);
        let proj: Vec<f32> = (0..2 * 2 * 8).map(|_| r.gen_range(-1.0..1.0)).collect();
        let mut conv = Conv1x4::new(1, 2);
        for v in &mut conv.weight {
            *v = r.gen_range(-1.0..1.0);
        }
        for v in &mut conv.bias {
            *v = r.gen_range(-0.5..0.5);
        }

        // analytic grads under loss = proj . conv(x)
        let _ = conv.forward(&x, false, true);
        let mut g = Act::zeros(1, 2, 2, 8);
        g.data.copy_from_slice(&proj);
        let dx = conv.backward(&g, false);

        let w0 = conv.weight.clone();
        let b0 = conv.bias.clone();
        let x0 = x.clone();

        let mut eval = |w: &[f32], b: &[f32], xs: &Act| -> f32 {
            let mut c2 = Conv1x4::new(1, 2);
            c2.weight = w.to_vec();
            c2.bias = b.to_vec();
            let y = c2.forward(xs, false, false);
            y.data.iter().zip(&proj).map(|(a, p)| (a * p) as f64).sum::<f64>() as f32
        };

        let mut w = w0.clone();
        let gw = conv.grad_weight.clone();
        finite_diff_check(&gw, &mut w, |wv| eval(wv, &b0, &x0), 1e-2, 1e-3, "conv dW");
        let mut b = b0.clone();
        let gb = conv.grad_bias.clone();
        finite_diff_check(&gb, &mut b, |bv| eval(&w0, bv, &x0), 1e-2, 1e-3, "conv db");
        let mut xd = x0.data.clone();
        finite_diff_check(
            &dx.data,
            &mut xd,
            |xv| {
                let mut xa = x0.clone();
                xa.data = xv.to_vec();
                eval(&w0, &b0, &xa)
            },
            1e-2,
            1e-3,
            "conv dx",
        );
    }

    #[test]
    fn conv_zero_upstream_gives_zero_grads() {
        let mut r = rng();
        let x = random_act(2, 2, 2, 8, &mut r);
        let mut conv = Conv1x4::new(2, 3);
        for v in &mut conv.weight {
            *v = r.gen_range(-1.0..1.0);
        }
        let _ = conv.forward(&x, false, true);
        let g = Act::zeros(2, 3, 2, 8);
        let dx = conv.backward(&g, false);
        assert!(dx.data.iter().all(|&v| v == 0.0));
        assert!(conv.grad_weight.iter().all(|&v| v == 0.0));
        assert!(conv.grad_bias.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conv_bias_grad_is_upstream_sum() {
        let mut r = rng();
        let x = random_act(2, 1, 2, 8, &mut r);
        let mut conv = Conv1x4::new(1, 2);
        let _ = conv.forward(&x, false, true);
        let g = random_act(2, 2, 2, 8, &mut r);
        let _ = conv.backward(&g, false);
        for f in 0..2 {
            let mut sum = 0.0f32;
            for i in 0..2 {
                let s = g.sample(i);
                sum += s[f * 16..(f + 1) * 16].iter().sum::<f32>();
            }
            assert!((conv.grad_bias[f] - sum).abs() < 1e-4);
        }
    }

    #[test]
    fn conv_parallel_matches_serial_bitwise() {
        let mut r = rng();
        let x = random_act(40, 3, 2, 32, &mut r);
        let mut conv = Conv1x4::new(3, 5);
        for v in &mut conv.weight {
            *v = r.gen_range(-1.0..1.0);
        }
        let y_ser = conv.forward(&x, false, false);
        let y_par = conv.forward(&x, true, true);
        assert_eq!(y_ser.data, y_par.data);
        let g = random_act(40, 5, 2, 32, &mut r);
        let dx_par = conv.backward(&g, true);
        let gw_par = conv.grad_weight.clone();
        conv.grad_weight.fill(0.0);
        conv.grad_bias.fill(0.0);
        let _ = conv.forward(&x, false, true);
        let dx_ser = conv.backward(&g, false);
        assert_eq!(dx_ser.data, dx_par.data);
        assert_eq!(conv.grad_weight, gw_par);
    }

    #[test]
    fn batchnorm_normalizes_batch() {
        let mut r = rng();
        let x = random_act(8, 3, 2, 16, &mut r);
        let mut bn = BatchNorm::new(3);
        let y = bn.forward(&x, true, false).unwrap();
        let per = 2 * 16;
        for c in 0..3 {
            let mut sum = 0.0f64;
            let mut sq = 0.0f64;
            for i in 0..8 {
                for k in 0..per {
                    let v = y.sample(i)[c * per + k] as f64;
                    sum += v;
                    sq += v * v;
                }
            }
            let n = (8 * per) as f64;
            let mean = sum / n;
            let var = sq / n - mean * mean;
            assert!(mean.abs() < 1e-5, "mean {mean}");
            assert!((var - 1.0).abs() < 1e-3, "var {var}");
        }
    }

    #[test]
    fn batchnorm_identity_when_already_standard() {
        // gamma=1, beta=0 on a pre-standardized batch changes little
        let mut r = rng();
        let mut x = random_act(16, 1, 1, 64, &mut r);
        let m: f32 = x.data.iter().sum::<f32>() / x.data.len() as f32;
        let v: f32 =
            x.data.iter().map(|&a| (a - m) * (a - m)).sum::<f32>() / x.data.len() as f32;
        for a in &mut x.data {
            *a = (*a - m) / v.sqrt();
        }
        let mut bn = BatchNorm::new(1);
        let y = bn.forward(&x, true, false).unwrap();
        for (a, b) in y.data.iter().zip(&x.data) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn batchnorm_rejects_batch_of_one() {
        let x = Act::zeros(1, 2, 2, 4);
        let mut bn = BatchNorm::new(2);
        assert!(matches!(bn.forward(&x, true, false), Err(Error::DegenerateBatch(_))));
    }

    #[test]
    fn batchnorm_infer_uses_running_stats() {
        let mut r = rng();
        let mut bn = BatchNorm::new(2);
        for _ in 0..50 {
            let x = random_act(8, 2, 1, 8, &mut r);
            let _ = bn.forward(&x, true, false).unwrap();
        }
        let x = random_act(1, 2, 1, 8, &mut r);
        let y = bn.forward(&x, false, false).unwrap();
        for c in 0..2 {
            let inv = 1.0 / (bn.running_var[c] + bn.eps).sqrt();
            for k in 0..8 {
                let expect = (x.data[c * 8 + k] - bn.running_mean[c]) * inv;
                assert!((y.data[c * 8 + k] - expect).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn batchnorm_gradients_match_finite_differences() {
        let mut r = rng();
        let x = random_act(4, 2, 1, 6, &mut r);
        let proj: Vec<f32> = (0..4 * 2 * 6).map(|_| r.gen_range(-1.0..1.0)).collect();
        let gamma0: Vec<f32> = (0..2).map(|_| r.gen_range(0.5..1.5)).collect();
        let beta0: Vec<f32> = (0..2).map(|_| r.gen_range(-0.5..0.5)).collect();

        let eval = |g: &[f32], b: &[f32], xs: &Act| -> f32 {
            let mut bn = BatchNorm::new(2);
            bn.gamma = g.to_vec();
            bn.beta = b.to_vec();
            let y = bn.forward(xs, true, false).unwrap();
            y.data.iter().zip(&proj).map(|(a, p)| (a * p) as f64).sum::<f64>() as f32
        };

        let mut bn = BatchNorm::new(2);
        bn.gamma = gamma0.clone();
        bn.beta = beta0.clone();
        let _ = bn.forward(&x, true, false).unwrap();
        let mut g = Act::zeros(4, 2, 1, 6);
        g.data.copy_from_slice(&proj);
        let dx = bn.backward(&g, false);

        let mut gm = gamma0.clone();
        let gg = bn.grad_gamma.clone();
        finite_diff_check(&gg, &mut gm, |gv| eval(gv, &beta0, &x), 1e-2, 1e-3, "bn dgamma");
        let mut bt = beta0.clone();
        let gb = bn.grad_beta.clone();
        finite_diff_check(&gb, &mut bt, |bv| eval(&gamma0, bv, &x), 1e-2, 1e-3, "bn dbeta");
        let mut xd = x.data.clone();
        finite_diff_check(
            &dx.data,
            &mut xd,
            |xv| {
                let mut xa = x.clone();
                xa.data = xv.to_vec();
                eval(&gamma0, &beta0, &xa)
            },
            1e-2,
            2e-3,
            "bn dx",
        );
    }

    #[test]
    fn relu_and_backward() {
        let mut x = Act::zeros(1, 1, 1, 2);
        x.data = vec![-1.0, 2.0];
        let mut relu = Relu::new();
        let y = relu.forward(&x, true);
        assert_eq!(y.data, vec![0.0, 2.0]);
        let mut g = Act::zeros(1, 1, 1, 2);
        g.data = vec![5.0, 7.0];
        let dx = relu.backward(&g);
        assert_eq!(dx.data, vec![0.0, 7.0]);
    }

    #[test]
    fn maxpool_values_and_routing() {
        let mut x = Act::zeros(1, 1, 1, 4);
        x.data = vec![1.0, 3.0, 2.0, 0.0];
        let mut pool = MaxPool1x2::new();
        let y = pool.forward(&x, true);
        assert_eq!(y.data, vec![3.0, 2.0]);
        let mut g = Act::zeros(1, 1, 1, 2);
        g.data = vec![10.0, 20.0];
        let dx = pool.backward(&g);
        assert_eq!(dx.data, vec![0.0, 10.0, 20.0, 0.0]);
    }

    #[test]
    fn avgpool_forward_backward() {
        let mut x = Act::zeros(1, 1, 1, 8);
        x.data = (1..=8).map(|v| v as f32).collect();
        let mut pool = AvgPool::new(4);
        let y = pool.forward(&x);
        assert_eq!(y.data, vec![2.5, 6.5]);
        let mut g = Act::zeros(1, 1, 1, 2);
        g.data = vec![4.0, 8.0];
        let dx = pool.backward(&g);
        assert_eq!(dx.data, vec![1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 2.0]);
    }

    #[test]
    fn dropout_infer_is_identity_train_preserves_mean() {
        let mut d = Dropout::new(0.5);
        let x = vec![1.0f32; 4096];
        assert_eq!(d.forward_infer(&x), x);
        let mut r = rng();
        let mut mean_sum = 0.0f64;
        let trials = 200;
        for _ in 0..trials {
            let y = d.forward_train(&x, &mut r);
            mean_sum += y.iter().map(|&v| v as f64).sum::<f64>() / y.len() as f64;
        }
        let mean = mean_sum / trials as f64;
        assert!((mean - 1.0).abs() < 0.02, "dropout expectation {mean}");
    }

    #[test]
    fn dropout_backward_uses_same_mask() {
        let mut d = Dropout::new(0.5);
        let mut r = rng();
        let x = vec![1.0f32; 64];
        let y = d.forward_train(&x, &mut r);
        let g = vec![1.0f32; 64];
        let dx = d.backward(&g);
        assert_eq!(dx, y);
    }

    #[test]
    fn dense_gradients_match_finite_differences() {
        let mut r = rng();
        let n = 3;
        let x: Vec<f32> = (0..n * 5).map(|_| r.gen_range(-1.0..1.0)).collect();
        let proj: Vec<f32> = (0..n * 4).map(|_| r.gen_range(-1.0..1.0)).collect();
        let w0: Vec<f32> = (0..20).map(|_| r.gen_range(-1.0..1.0)).collect();
        let b0: Vec<f32> = (0..4).map(|_| r.gen_range(-0.5..0.5)).collect();

        let eval = |w: &[f32], b: &[f32], xv: &[f32]| -> f32 {
            let mut dl = Dense::new(5, 4);
            dl.weight = w.to_vec();
            dl.bias = b.to_vec();
            let y = dl.forward(xv, n, false);
            y.iter().zip(&proj).map(|(a, p)| (a * p) as f64).sum::<f64>() as f32
        };

        let mut dense = Dense::new(5, 4);
        dense.weight = w0.clone();
        dense.bias = b0.clone();
        let _ = dense.forward(&x, n, true);
        let dx = dense.backward(&proj);

        let mut w = w0.clone();
        let gw = dense.grad_weight.clone();
        finite_diff_check(&gw, &mut w, |wv| eval(wv, &b0, &x), 1e-2, 1e-3, "dense dW");
        let mut b = b0.clone();
        let gb = dense.grad_bias.clone();
        finite_diff_check(&gb, &mut b, |bv| eval(&w0, bv, &x), 1e-2, 1e-3, "dense db");
        let mut xv = x.clone();
        finite_diff_check(&dx, &mut xv, |xx| eval(&w0, &b0, xx), 1e-2, 1e-3, "dense dx");
    }

    #[test]
    fn softmax_uniform_logits() {
        let logits = vec![0.7f32; 5];
        let (loss, probs) = softmax_xent(&logits, &[2], 5);
        for p in &probs {
            assert!((p - 0.2).abs() < 1e-6);
        }
        assert!((loss - (5.0f32).ln()).abs() < 1e-5);
    }

    #[test]
    fn softmax_probabilities_form_simplex() {
        let mut r = rng();
        let n = 7;
        let logits: Vec<f32> = (0..n * 5).map(|_| r.gen_range(-4.0..4.0)).collect();
        let labels: Vec<u8> = (0..n).map(|_| r.gen_range(0..5u8)).collect();
        let (_, probs) = softmax_xent(&logits, &labels, 5);
        for i in 0..n {
            let s: f32 = probs[i * 5..(i + 1) * 5].iter().sum();
            assert!((s - 1.0).abs() < 1e-6);
            assert!(probs[i * 5..(i + 1) * 5].iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn softmax_xent_gradient_matches_finite_differences() {
        let mut r = rng();
        let n = 4;
        let logits0: Vec<f32> = (0..n * 5).map(|_| r.gen_range(-2.0..2.0)).collect();
        let labels: Vec<u8> = vec![0, 3, 2, 4];
        let (_, probs) = softmax_xent(&logits0, &labels, 5);
        let analytic = softmax_xent_backward(&probs, &labels, 5);
        let mut l = logits0.clone();
        finite_diff_check(
            &analytic,
            &mut l,
            |lv| softmax_xent(lv, &labels, 5).0,
            1e-2,
            1e-3,
            "softmax-xent dlogits",
        );
    }
}
