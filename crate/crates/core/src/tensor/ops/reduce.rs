use crate::tensor::{Element, Shape, Tensor};

/// Sum of all elements as a `1×1×1×1` tensor.
pub fn sum_all<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    let total: T = x.data().iter().copied().sum();
    let len = x.numel();
    Tensor::from_op(
        "sum_all",
        Shape::scalar(),
        vec![total],
        vec![x.clone()],
        Box::new(move |ctx| vec![Some(vec![ctx.grad[0]; len])]),
    )
}

/// Mean of all elements as a `1×1×1×1` tensor.
pub fn mean_all<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    let len = x.numel();
    let inv = T::from_f64(1.0 / len.max(1) as f64);
    let total: T = x.data().iter().copied().sum();
    Tensor::from_op(
        "mean_all",
        Shape::scalar(),
        vec![total * inv],
        vec![x.clone()],
        Box::new(move |ctx| vec![Some(vec![ctx.grad[0] * inv; len])]),
    )
}
