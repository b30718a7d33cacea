use crate::error::{Error, Result};
use crate::tensor::{Element, Shape, Tensor};

/// Pointwise activations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unary {
    Relu,
    /// `0.5·x·(1 + tanh(√(2/π)·(x + 0.044715·x³)))`
    Gelu,
    Sigmoid,
}

const GELU_K: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_C: f64 = 0.044_715;

impl Unary {
    pub fn apply<T: Element>(self, x: T) -> T {
        match self {
            Unary::Relu => x.max(T::zero()),
            Unary::Gelu => {
                let half = T::from_f64(0.5);
                let inner = T::from_f64(GELU_K) * (x + T::from_f64(GELU_C) * x * x * x);
                half * x * (T::one() + inner.tanh())
            }
            Unary::Sigmoid => T::one() / (T::one() + (-x).exp()),
        }
    }

    /// Derivative given the input `x` and the forward output `y`.
    fn derivative<T: Element>(self, x: T, y: T) -> T {
        match self {
            Unary::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Unary::Gelu => {
                let half = T::from_f64(0.5);
                let k = T::from_f64(GELU_K);
                let c = T::from_f64(GELU_C);
                let t = (k * (x + c * x * x * x)).tanh();
                half * (T::one() + t)
                    + half * x * (T::one() - t * t) * k * (T::one() + T::from_f64(3.0) * c * x * x)
            }
            Unary::Sigmoid => y * (T::one() - y),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Unary::Relu => "relu",
            Unary::Gelu => "gelu",
            Unary::Sigmoid => "sigmoid",
        }
    }
}

fn unary<T: Element>(x: &Tensor<T>, op: Unary) -> Tensor<T> {
    let out: Vec<T> = x.data().iter().map(|&v| op.apply(v)).collect();
    let xi = x.clone();
    Tensor::from_op(
        op.name(),
        x.shape(),
        out,
        vec![x.clone()],
        Box::new(move |ctx| {
            let g = xi
                .data()
                .iter()
                .zip(ctx.output)
                .zip(ctx.grad)
                .map(|((&x, &y), &g)| g * op.derivative(x, y))
                .collect();
            vec![Some(g)]
        }),
    )
}

pub fn relu<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    unary(x, Unary::Relu)
}

pub fn gelu<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    unary(x, Unary::Gelu)
}

pub fn sigmoid<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    unary(x, Unary::Sigmoid)
}

pub fn scalar_mul<T: Element>(x: &Tensor<T>, s: f64) -> Tensor<T> {
    let s = T::from_f64(s);
    let out = x.data().iter().map(|&v| v * s).collect();
    Tensor::from_op(
        "scalar_mul",
        x.shape(),
        out,
        vec![x.clone()],
        Box::new(move |ctx| vec![Some(ctx.grad.iter().map(|&g| g * s).collect())]),
    )
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Binary {
    Add,
    Sub,
    Mul,
}

/// How `b` maps onto the full output index space.
#[derive(Clone, Copy)]
struct Broadcast {
    out: Shape,
    /// Strides into `b`, zero along broadcast axes.
    b_strides: [usize; 4],
    same: bool,
}

impl Broadcast {
    fn new(a: Shape, b: Shape) -> Result<Self> {
        let bs = b.strides();
        let mut strides = [0; 4];
        for i in 0..4 {
            let (ad, bd) = (a.dims()[i], b.dims()[i]);
            if bd == ad {
                strides[i] = bs[i];
            } else if bd == 1 {
                strides[i] = 0;
            } else {
                return Err(Error::dim(
                    Shape::axis(i),
                    format!("cannot broadcast {b} against {a}"),
                ));
            }
        }
        Ok(Broadcast {
            out: a,
            b_strides: strides,
            same: a == b,
        })
    }

    /// Calls `f(out_index, b_index)` for every output element in row-major order.
    fn for_each(&self, mut f: impl FnMut(usize, usize)) {
        if self.same {
            (0..self.out.numel()).for_each(|i| f(i, i));
            return;
        }
        let s = self.b_strides;
        let mut i = 0;
        for n in 0..self.out.n {
            for c in 0..self.out.c {
                for h in 0..self.out.h {
                    let base = n * s[0] + c * s[1] + h * s[2];
                    for w in 0..self.out.w {
                        f(i, base + w * s[3]);
                        i += 1;
                    }
                }
            }
        }
    }
}

fn binary<T: Element>(a: &Tensor<T>, b: &Tensor<T>, op: Binary) -> Result<Tensor<T>> {
    let bc = Broadcast::new(a.shape(), b.shape())?;
    let (ad, bd) = (a.data(), b.data());
    let mut out = vec![T::zero(); a.numel()];
    bc.for_each(|i, j| {
        out[i] = match op {
            Binary::Add => ad[i] + bd[j],
            Binary::Sub => ad[i] - bd[j],
            Binary::Mul => ad[i] * bd[j],
        }
    });
    let name = match op {
        Binary::Add => "add",
        Binary::Sub => "sub",
        Binary::Mul => "mul",
    };
    let (ai, bi) = (a.clone(), b.clone());
    Ok(Tensor::from_op(
        name,
        a.shape(),
        out,
        vec![a.clone(), b.clone()],
        Box::new(move |ctx| {
            let g = ctx.grad;
            let ga = ai.requires_grad().then(|| match op {
                Binary::Add | Binary::Sub => g.to_vec(),
                Binary::Mul => {
                    let bd = bi.data();
                    let mut ga = vec![T::zero(); g.len()];
                    bc.for_each(|i, j| ga[i] = g[i] * bd[j]);
                    ga
                }
            });
            let gb = bi.requires_grad().then(|| {
                let mut gb = vec![T::zero(); bi.numel()];
                let ad = ai.data();
                bc.for_each(|i, j| {
                    let v = match op {
                        Binary::Add => g[i],
                        Binary::Sub => -g[i],
                        Binary::Mul => g[i] * ad[i],
                    };
                    gb[j] = gb[j] + v;
                });
                gb
            });
            vec![ga, gb]
        }),
    ))
}

/// `a + b`; `b` may broadcast along axes where its extent is 1.
pub fn add<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    binary(a, b, Binary::Add)
}

/// `a - b`; `b` may broadcast along axes where its extent is 1.
pub fn sub<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    binary(a, b, Binary::Sub)
}

/// `a ⊙ b`; `b` may broadcast along axes where its extent is 1 (e.g. a
/// per-channel `N×C×1×1` gate against `N×C×H×W` features).
pub fn mul<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    binary(a, b, Binary::Mul)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: Shape, v: &[f64]) -> Tensor<f64> {
        Tensor::from_f64s(shape, v).unwrap()
    }

    #[test]
    fn activation_values() {
        assert_eq!(Unary::Sigmoid.apply(0.0f64), 0.5);
        assert_eq!(Unary::Relu.apply(-2.0f64), 0.0);
        assert_eq!(Unary::Relu.apply(3.0f64), 3.0);
        assert_eq!(Unary::Gelu.apply(0.0f64), 0.0);
        // tanh form at x = 1
        let expect = 0.5 * (1.0 + (GELU_K * (1.0 + GELU_C)).tanh());
        assert!((Unary::Gelu.apply(1.0f64) - expect).abs() < 1e-15);
    }

    #[test]
    fn add_of_negation_is_zero() {
        let s = Shape::new(2, 3, 2, 2);
        let v: Vec<f64> = (0..s.numel()).map(|i| i as f64 * 0.37 - 2.0).collect();
        let x = t(s, &v);
        let neg = scalar_mul(&x, -1.0);
        assert!(add(&x, &neg).unwrap().data().iter().all(|&z| z == 0.0));
    }

    #[test]
    fn per_channel_broadcast() {
        let x = t(Shape::new(1, 2, 1, 2), &[1.0, 2.0, 3.0, 4.0]);
        let g = t(Shape::new(1, 2, 1, 1), &[10.0, 100.0]);
        assert_eq!(mul(&x, &g).unwrap().data(), &[10.0, 20.0, 300.0, 400.0]);
    }

    #[test]
    fn incompatible_shapes_rejected() {
        let a = Tensor::<f64>::zeros(Shape::new(1, 2, 3, 3));
        let b = Tensor::<f64>::zeros(Shape::new(1, 3, 3, 3));
        let err = add(&a, &b).unwrap_err();
        assert!(matches!(err, Error::Dimension { axis: crate::error::Axis::Channel, .. }));
    }
}
