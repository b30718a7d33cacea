//! Tape-free reference implementations over plain buffers.

use epnet::metrics::YImage;
use epnet::model::{EPNetConfig, ModelParams};
use epnet::tensor::Tensor;

#[derive(Clone)]
pub struct Feat {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub d: Vec<f64>,
}

impl Feat {
    pub fn new(c: usize, h: usize, w: usize) -> Self {
        Feat { c, h, w, d: vec![0.0; c * h * w] }
    }
    pub fn of(t: &Tensor<f64>, n: usize) -> Self {
        let s = t.shape();
        let len = s.c * s.h * s.w;
        Feat { c: s.c, h: s.h, w: s.w, d: t.data()[n * len..(n + 1) * len].to_vec() }
    }
    pub fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.d[(c * self.h + y) * self.w + x]
    }
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f64) {
        self.d[(c * self.h + y) * self.w + x] = v;
    }
}

pub fn pointwise(f: &Feat, p: &ModelParams<f64>, name: &str) -> Feat {
    let w = p.get(&format!("{name}.weight")).unwrap();
    let b = p.get(&format!("{name}.bias")).unwrap();
    let cout = w.shape().n;
    let mut out = Feat::new(cout, f.h, f.w);
    for co in 0..cout {
        for y in 0..f.h {
            for x in 0..f.w {
                let mut acc = b.data()[co];
                for ci in 0..f.c {
                    acc += w.at(co, ci, 0, 0) * f.at(ci, y, x);
                }
                out.set(co, y, x, acc);
            }
        }
    }
    out
}

pub fn layer_norm_ref(f: &Feat, p: &ModelParams<f64>, name: &str) -> Feat {
    let g = p.get(&format!("{name}.weight")).unwrap().data();
    let b = p.get(&format!("{name}.bias")).unwrap().data();
    let mut out = f.clone();
    for y in 0..f.h {
        for x in 0..f.w {
            let v: Vec<f64> = (0..f.c).map(|c| f.at(c, y, x)).collect();
            let mean = v.iter().sum::<f64>() / f.c as f64;
            let var = v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / f.c as f64;
            for c in 0..f.c {
                out.set(c, y, x, g[c] * (v[c] - mean) / (var + 1e-5).sqrt() + b[c]);
            }
        }
    }
    out
}

pub fn gelu_ref(x: f64) -> f64 {
    0.5 * x * (1.0 + ((2.0 / std::f64::consts::PI).sqrt() * (x + 0.044715 * x.powi(3))).tanh())
}

pub fn sigmoid_ref(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn reflect(i: usize, n: usize) -> usize {
    // explicit mirror walk
    let mut i = i as isize;
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    loop {
        if i < n {
            return i as usize;
        }
        i = 2 * (n - 1) - i;
        if i < 0 {
            i = -i;
        }
    }
}

/// One transformer block, looping over windows, heads and query positions.
pub fn swin_ref(x: &Feat, p: &ModelParams<f64>, prefix: &str, cfg: &EPNetConfig, shifted: bool) -> Feat {
    let (c, h, w) = (x.c, x.h, x.w);
    let ws = cfg.window_size;
    let s = if shifted { ws / 2 } else { 0 };
    let heads = cfg.num_heads;
    let d = c / heads;
    let hp = h.div_ceil(ws) * ws;
    let wp = w.div_ceil(ws) * ws;
    let y = layer_norm_ref(x, p, &format!("{prefix}.norm1"));
    let qkv = pointwise(&y, p, &format!("{prefix}.qkv"));
    // padded, then rolled by −s
    let mut rolled = Feat::new(3 * c, hp, wp);
    for ch in 0..3 * c {
        for yy in 0..hp {
            for xx in 0..wp {
                let (sy, sx) = ((yy + s) % hp, (xx + s) % wp);
                rolled.set(ch, yy, xx, qkv.at(ch, reflect(sy, h), reflect(sx, w)));
            }
        }
    }
    let region = |i: usize, size: usize| if i < size - ws { 0 } else if i < size - s { 1 } else { 2 };
    let mut attn_out = Feat::new(c, hp, wp);
    for wy in 0..hp / ws {
        for wx in 0..wp / ws {
            let toks: Vec<(usize, usize)> = (0..ws * ws).map(|t| (wy * ws + t / ws, wx * ws + t % ws)).collect();
            for hd in 0..heads {
                for &(qy, qx) in &toks {
                    let mut scores = Vec::new();
                    for &(ky, kx) in &toks {
                        let mut dot = 0.0;
                        for j in 0..d {
                            dot += rolled.at(hd * d + j, qy, qx) * rolled.at(c + hd * d + j, ky, kx);
                        }
                        let mut sc = dot / (d as f64).sqrt();
                        if s > 0 && (region(qy, hp), region(qx, wp)) != (region(ky, hp), region(kx, wp)) {
                            sc -= 100.0;
                        }
                        scores.push(sc);
                    }
                    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let e: Vec<f64> = scores.iter().map(|v| (v - m).exp()).collect();
                    let z: f64 = e.iter().sum();
                    for j in 0..d {
                        let mut acc = 0.0;
                        for (t, &(ky, kx)) in toks.iter().enumerate() {
                            acc += e[t] / z * rolled.at(2 * c + hd * d + j, ky, kx);
                        }
                        attn_out.set(hd * d + j, qy, qx, acc);
                    }
                }
            }
        }
    }
    // roll back by +s and crop
    let mut a = Feat::new(c, h, w);
    for ch in 0..c {
        for yy in 0..h {
            for xx in 0..w {
                a.set(ch, yy, xx, attn_out.at(ch, (yy + hp - s) % hp, (xx + wp - s) % wp));
            }
        }
    }
    let a = pointwise(&a, p, &format!("{prefix}.proj"));
    let mut x1 = x.clone();
    x1.d.iter_mut().zip(&a.d).for_each(|(u, v)| *u += v);
    let y = layer_norm_ref(&x1, p, &format!("{prefix}.norm2"));
    let mut hid = pointwise(&y, p, &format!("{prefix}.fc1"));
    hid.d.iter_mut().for_each(|v| *v = gelu_ref(*v));
    let m = pointwise(&hid, p, &format!("{prefix}.fc2"));
    x1.d.iter_mut().zip(&m.d).for_each(|(u, v)| *u += v);
    x1
}

/// Crossover block with plain loops.
pub fn dcab_ref(x: &Feat, p: &ModelParams<f64>, prefix: &str, split: usize) -> Feat {
    let gate = |lo: usize, hi: usize, name: &str| -> Vec<f64> {
        let k = p.get(&format!("{prefix}.{name}.weight")).unwrap().data().to_vec();
        let desc: Vec<f64> = (lo..hi).map(|c| x.d[c * x.h * x.w..(c + 1) * x.h * x.w].iter().sum::<f64>() / (x.h * x.w) as f64).collect();
        (0..desc.len())
            .map(|i| {
                let mut acc = 0.0;
                for t in 0..3 {
                    let j = i as isize + t as isize - 1;
                    if j >= 0 && (j as usize) < desc.len() {
                        acc += k[t] * desc[j as usize];
                    }
                }
                sigmoid_ref(acc)
            })
            .collect()
    };
    let alpha = gate(0, split, "gate_a");
    let beta = gate(split, x.c, "gate_b");
    let plane = x.h * x.w;
    let mut cross = Feat::new(2 * x.c, x.h, x.w);
    for c in 0..x.c {
        for i in 0..plane {
            let v = x.d[c * plane + i];
            let (first, second) = if c < split { (alpha[c] * v, v) } else { (v, beta[c - split] * v) };
            cross.d[c * plane + i] = first;
            cross.d[(x.c + c) * plane + i] = second;
        }
    }
    let fused = pointwise(&cross, p, &format!("{prefix}.fuse"));
    let mut out = x.clone();
    out.d.iter_mut().zip(&fused.d).for_each(|(u, v)| *u += v);
    out
}

/// Six nested loops, no unfolding.
pub fn naive_conv(x: &Tensor<f64>, w: &Tensor<f64>, b: Option<&Tensor<f64>>, stride: usize, pad: usize) -> Vec<f64> {
    let (xs, ws) = (x.shape(), w.shape());
    let oh = (xs.h + 2 * pad - ws.h) / stride + 1;
    let ow = (xs.w + 2 * pad - ws.w) / stride + 1;
    let mut out = vec![0.0; xs.n * ws.n * oh * ow];
    for n in 0..xs.n {
        for co in 0..ws.n {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = b.map(|b| b.data()[co]).unwrap_or(0.0);
                    for ci in 0..xs.c {
                        for ky in 0..ws.h {
                            for kx in 0..ws.w {
                                let iy = (oy * stride + ky) as isize - pad as isize;
                                let ix = (ox * stride + kx) as isize - pad as isize;
                                if iy >= 0 && ix >= 0 && (iy as usize) < xs.h && (ix as usize) < xs.w {
                                    acc += x.at(n, ci, iy as usize, ix as usize) * w.at(co, ci, ky, kx);
                                }
                            }
                        }
                    }
                    out[((n * ws.n + co) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
    out
}

/// Direct SSIM: every window evaluated with a full 2-D Gaussian and
/// two-pass moments.
pub fn ssim_loop(a: &YImage, b: &YImage) -> f64 {
    let mut g = [[0.0f64; 11]; 11];
    let mut s = 0.0;
    for (i, row) in g.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (dy, dx) = (i as f64 - 5.0, j as f64 - 5.0);
            *v = (-(dx * dx + dy * dy) / 4.5).exp();
            s += *v;
        }
    }
    let c1 = 6.5025;
    let c2 = 58.5225;
    let mut total = 0.0;
    let mut count = 0;
    for y0 in 0..=a.height - 11 {
        for x0 in 0..=a.width - 11 {
            let (mut ma, mut mb) = (0.0, 0.0);
            for i in 0..11 {
                for j in 0..11 {
                    ma += g[i][j] / s * a.at(x0 + j, y0 + i);
                    mb += g[i][j] / s * b.at(x0 + j, y0 + i);
                }
            }
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for i in 0..11 {
                for j in 0..11 {
                    let (da, db) = (a.at(x0 + j, y0 + i) - ma, b.at(x0 + j, y0 + i) - mb);
                    va += g[i][j] / s * da * da;
                    vb += g[i][j] / s * db * db;
                    cov += g[i][j] / s * da * db;
                }
            }
            total += (2.0 * ma * mb + c1) * (2.0 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    total / count as f64
}

