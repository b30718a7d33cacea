use crate::error::{Axis, Error, Result};
use crate::tensor::{macs, Element, Shape, Tensor};

/// Batched matrix product over the last two axes:
/// `[N, C, M, K] × [N, C, K, P] → [N, C, M, P]`.
pub fn matmul<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (sa, sb) = (a.shape(), b.shape());
    if sa.n != sb.n {
        return Err(Error::dim(Axis::Batch, format!("matmul {sa} × {sb}")));
    }
    if sa.c != sb.c {
        return Err(Error::dim(Axis::Channel, format!("matmul {sa} × {sb}")));
    }
    if sa.w != sb.h {
        return Err(Error::dim(Axis::Inner, format!("matmul {sa} × {sb}")));
    }
    let (m, k, p) = (sa.h, sa.w, sb.w);
    let batches = sa.n * sa.c;
    let mut out = vec![T::zero(); batches * m * p];
    for bi in 0..batches {
        T::gemm(
            m,
            k,
            p,
            &a.data()[bi * m * k..(bi + 1) * m * k],
            (k as isize, 1),
            &b.data()[bi * k * p..(bi + 1) * k * p],
            (p as isize, 1),
            T::zero(),
            &mut out[bi * m * p..(bi + 1) * m * p],
        );
    }
    macs::add((batches * m * k * p) as u64);
    let (ai, bi_) = (a.clone(), b.clone());
    Ok(Tensor::from_op(
        "matmul",
        Shape::new(sa.n, sa.c, m, p),
        out,
        vec![a.clone(), b.clone()],
        Box::new(move |ctx| {
            let g = ctx.grad;
            let ga = ai.requires_grad().then(|| {
                let bd = bi_.data();
                let mut ga = vec![T::zero(); batches * m * k];
                for t in 0..batches {
                    // dA = G · Bᵀ
                    T::gemm(m, p, k, &g[t * m * p..(t + 1) * m * p], (p as isize, 1), &bd[t * k * p..(t + 1) * k * p], (1, p as isize), T::zero(), &mut ga[t * m * k..(t + 1) * m * k]);
                }
                ga
            });
            let gb = bi_.requires_grad().then(|| {
                let ad = ai.data();
                let mut gb = vec![T::zero(); batches * k * p];
                for t in 0..batches {
                    // dB = Aᵀ · G
                    T::gemm(k, m, p, &ad[t * m * k..(t + 1) * m * k], (1, k as isize), &g[t * m * p..(t + 1) * m * p], (p as isize, 1), T::zero(), &mut gb[t * k * p..(t + 1) * k * p]);
                }
                gb
            });
            vec![ga, gb]
        }),
    ))
}

/// Visit every 1-D lane along `axis`, passing the flat indices of the lane.
fn for_each_lane(s: Shape, axis: usize, mut f: impl FnMut(&[usize])) {
    let dims = s.dims();
    let len = dims[axis];
    let inner: usize = dims[axis + 1..].iter().product();
    let outer: usize = dims[..axis].iter().product();
    let mut lane = vec![0; len];
    for o in 0..outer {
        for i in 0..inner {
            for (k, slot) in lane.iter_mut().enumerate() {
                *slot = (o * len + k) * inner + i;
            }
            f(&lane);
        }
    }
}

/// Numerically stable softmax along `axis` (0..4).
pub fn softmax<T: Element>(x: &Tensor<T>, axis: usize) -> Result<Tensor<T>> {
    if axis > 3 {
        return Err(Error::Usage(format!("softmax axis {axis} out of range")));
    }
    let s = x.shape();
    let src = x.data();
    let mut out = vec![T::zero(); x.numel()];
    for_each_lane(s, axis, |lane| {
        let max = lane.iter().map(|&j| src[j]).fold(T::neg_infinity(), T::max);
        let mut total = T::zero();
        for &j in lane {
            let e = (src[j] - max).exp();
            out[j] = e;
            total = total + e;
        }
        for &j in lane {
            out[j] = out[j] / total;
        }
    });
    Ok(Tensor::from_op(
        "softmax",
        s,
        out,
        vec![x.clone()],
        Box::new(move |ctx| {
            let (g, y) = (ctx.grad, ctx.output);
            let mut gx = vec![T::zero(); y.len()];
            for_each_lane(s, axis, |lane| {
                let dot: T = lane.iter().map(|&j| g[j] * y[j]).sum();
                for &j in lane {
                    gx[j] = y[j] * (g[j] - dot);
                }
            });
            vec![Some(gx)]
        }),
    ))
}

/// Layer normalisation over the channel axis at every `(n, h, w)` position,
/// followed by the per-channel affine map `gamma · x̂ + beta`.
pub fn layer_norm<T: Element>(x: &Tensor<T>, gamma: &Tensor<T>, beta: &Tensor<T>, eps: f64) -> Result<Tensor<T>> {
    let s = x.shape();
    if gamma.numel() != s.c || beta.numel() != s.c {
        return Err(Error::dim(
            Axis::Channel,
            format!("layer_norm affine has {}/{} entries for {} channels", gamma.numel(), beta.numel(), s.c),
        ));
    }
    let (plane, c) = (s.plane(), s.c);
    let eps = T::from_f64(eps);
    let inv_c = T::from_f64(1.0 / c as f64);
    let src = x.data();
    let mut xhat = vec![T::zero(); x.numel()];
    let mut inv_std = vec![T::zero(); s.n * plane];
    for n in 0..s.n {
        for p in 0..plane {
            let at = |ch: usize| (n * c + ch) * plane + p;
            let mean = (0..c).map(|ch| src[at(ch)]).sum::<T>() * inv_c;
            let var = (0..c).map(|ch| (src[at(ch)] - mean).powi(2)).sum::<T>() * inv_c;
            let is = T::one() / (var + eps).sqrt();
            inv_std[n * plane + p] = is;
            for ch in 0..c {
                xhat[at(ch)] = (src[at(ch)] - mean) * is;
            }
        }
    }
    let (gd, bd) = (gamma.data(), beta.data());
    let out = xhat
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let ch = (i / plane) % c;
            gd[ch] * v + bd[ch]
        })
        .collect();
    let (gi, bi) = (gamma.clone(), beta.clone());
    let xi = x.clone();
    Ok(Tensor::from_op(
        "layer_norm",
        s,
        out,
        vec![x.clone(), gamma.clone(), beta.clone()],
        Box::new(move |ctx| {
            let g = ctx.grad;
            let gd = gi.data();
            let gx = xi.requires_grad().then(|| {
                let mut gx = vec![T::zero(); g.len()];
                for n in 0..s.n {
                    for p in 0..plane {
                        let at = |ch: usize| (n * c + ch) * plane + p;
                        let mut m1 = T::zero();
                        let mut m2 = T::zero();
                        for ch in 0..c {
                            let gh = g[at(ch)] * gd[ch];
                            m1 = m1 + gh;
                            m2 = m2 + gh * xhat[at(ch)];
                        }
                        m1 = m1 * inv_c;
                        m2 = m2 * inv_c;
                        let is = inv_std[n * plane + p];
                        for ch in 0..c {
                            let gh = g[at(ch)] * gd[ch];
                            gx[at(ch)] = is * (gh - m1 - xhat[at(ch)] * m2);
                        }
                    }
                }
                gx
            });
            let ggamma = gi.requires_grad().then(|| {
                let mut acc = vec![T::zero(); c];
                for (i, (&gv, &xv)) in g.iter().zip(&xhat).enumerate() {
                    let ch = (i / plane) % c;
                    acc[ch] = acc[ch] + gv * xv;
                }
                acc
            });
            let gbeta = bi.requires_grad().then(|| {
                let mut acc = vec![T::zero(); c];
                for (i, &gv) in g.iter().enumerate() {
                    let ch = (i / plane) % c;
                    acc[ch] = acc[ch] + gv;
                }
                acc
            });
            vec![gx, ggamma, gbeta]
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_softmax() {
        let x = Tensor::<f64>::full(Shape::new(1, 1, 2, 5), 3.0);
        let y = softmax(&x, 3).unwrap();
        assert!(y.data().iter().all(|&v| (v - 0.2).abs() < 1e-15));
    }

    #[test]
    fn matmul_small() {
        let a = Tensor::<f64>::from_vec(Shape::new(1, 1, 2, 3), vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let b = Tensor::<f64>::from_vec(Shape::new(1, 1, 3, 1), vec![1., 0., -1.]).unwrap();
        assert_eq!(matmul(&a, &b).unwrap().data(), &[-2.0, -2.0]);
        let bad = Tensor::<f64>::zeros(Shape::new(1, 1, 2, 1));
        assert!(matches!(matmul(&a, &bad), Err(Error::Dimension { axis: Axis::Inner, .. })));
    }

    #[test]
    fn layer_norm_standardises_channels() {
        let s = Shape::new(2, 5, 3, 3);
        let x = Tensor::<f64>::from_vec(s, (0..s.numel()).map(|i| ((i * 7919) % 23) as f64 * 0.3).collect()).unwrap();
        let ones = Tensor::full(Shape::new(1, 5, 1, 1), 1.0);
        let zeros = Tensor::zeros(Shape::new(1, 5, 1, 1));
        let y = layer_norm(&x, &ones, &zeros, 1e-12).unwrap();
        for n in 0..2 {
            for h in 0..3 {
                for w in 0..3 {
                    let vals: Vec<f64> = (0..5).map(|c| y.at(n, c, h, w)).collect();
                    let mean = vals.iter().sum::<f64>() / 5.0;
                    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 5.0;
                    assert!(mean.abs() < 1e-12);
                    assert!((var - 1.0).abs() < 1e-9);
                }
            }
        }
    }
}
