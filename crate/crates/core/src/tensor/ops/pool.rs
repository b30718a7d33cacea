use crate::error::{Axis, Error, Result};
use crate::tensor::{Element, Shape, Tensor};

/// Mean over each spatial plane: `N×C×H×W → N×C×1×1`.
pub fn global_avg_pool<T: Element>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let s = x.shape();
    let plane = s.plane();
    if plane == 0 {
        return Err(Error::dim(Axis::Height, "global pooling over an empty plane"));
    }
    let inv = T::from_f64(1.0 / plane as f64);
    let out: Vec<T> = x.data().chunks(plane).map(|p| p.iter().copied().sum::<T>() * inv).collect();
    Ok(Tensor::from_op(
        "global_avg_pool",
        Shape::new(s.n, s.c, 1, 1),
        out,
        vec![x.clone()],
        Box::new(move |ctx| {
            let g = ctx.grad.iter().flat_map(|&g| std::iter::repeat_n(g * inv, plane)).collect();
            vec![Some(g)]
        }),
    ))
}

/// Unpadded max pooling. Output extents follow the convolution rule
/// `floor((H − k)/stride) + 1`. On ties the first maximum in row-major scan
/// order receives the gradient.
pub fn max_pool2d<T: Element>(x: &Tensor<T>, kernel: usize, stride: usize) -> Result<Tensor<T>> {
    let s = x.shape();
    if stride == 0 {
        return Err(Error::Usage("max_pool2d stride must be positive".into()));
    }
    if kernel == 0 || kernel > s.h {
        return Err(Error::dim(Axis::Height, format!("pool kernel {kernel} vs height {}", s.h)));
    }
    if kernel > s.w {
        return Err(Error::dim(Axis::Width, format!("pool kernel {kernel} vs width {}", s.w)));
    }
    let oh = (s.h - kernel) / stride + 1;
    let ow = (s.w - kernel) / stride + 1;
    let out_shape = Shape::new(s.n, s.c, oh, ow);
    let src = x.data();
    let mut out = Vec::with_capacity(out_shape.numel());
    let mut argmax = Vec::with_capacity(out_shape.numel());
    for n in 0..s.n {
        for c in 0..s.c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = s.index(n, c, oy * stride, ox * stride);
                    for ky in 0..kernel {
                        for kx in 0..kernel {
                            let j = s.index(n, c, oy * stride + ky, ox * stride + kx);
                            if src[j] > src[best] {
                                best = j;
                            }
                        }
                    }
                    out.push(src[best]);
                    argmax.push(best);
                }
            }
        }
    }
    let in_len = x.numel();
    Ok(Tensor::from_op(
        "max_pool2d",
        out_shape,
        out,
        vec![x.clone()],
        Box::new(move |ctx| {
            let mut g = vec![T::zero(); in_len];
            for (&j, &v) in argmax.iter().zip(ctx.grad) {
                g[j] = g[j] + v;
            }
            vec![Some(g)]
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn avg_of_constant() {
        let x = Tensor::<f64>::full(Shape::new(2, 3, 4, 5), 0.75);
        let y = global_avg_pool(&x).unwrap();
        assert_eq!(y.shape(), Shape::new(2, 3, 1, 1));
        assert!(y.data().iter().all(|&v| (v - 0.75).abs() < 1e-15));
    }

    #[test]
    fn max_of_grid() {
        let x = Tensor::<f64>::from_vec(Shape::new(1, 1, 3, 3), (1..=9).map(f64::from).collect()).unwrap();
        let y = max_pool2d(&x, 3, 1).unwrap();
        assert_eq!(y.data(), &[9.0]);
        assert!(max_pool2d(&x, 4, 1).is_err());
    }

    #[test]
    fn tie_routes_to_first() {
        let x = Tensor::<f64>::leaf(Shape::new(1, 1, 2, 2), vec![1.0, 1.0, 1.0, 0.0], true).unwrap();
        let y = max_pool2d(&x, 2, 2).unwrap();
        let loss = crate::tensor::ops::sum_all(&y);
        loss.backward().unwrap();
        assert_eq!(x.grad().unwrap().as_slice(), &[1.0, 0.0, 0.0, 0.0]);
    }
}
