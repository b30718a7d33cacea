use crate::error::Result;
use crate::tensor::{Element, Shape, Tensor};

/// Mean absolute difference. The gradient with respect to `pred` is
/// `sign(pred − target) / numel`, zero at exact ties; `target` receives none.
pub fn l1_loss<T: Element>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<Tensor<T>> {
    pred.shape().expect_eq(&target.shape(), "l1_loss")?;
    let n = pred.numel();
    let diff: Vec<f64> = pred.data().iter().zip(target.data()).map(|(a, b)| a.as_f64() - b.as_f64()).collect();
    let mean = diff.iter().map(|d| d.abs()).sum::<f64>() / n.max(1) as f64;
    let inv = T::from_f64(1.0 / n.max(1) as f64);
    Ok(Tensor::from_op(
        "l1_loss",
        Shape::scalar(),
        vec![T::from_f64(mean)],
        vec![pred.clone()],
        Box::new(move |ctx| {
            let g = ctx.grad[0] * inv;
            let out = diff
                .iter()
                .map(|&d| {
                    if d > 0.0 {
                        g
                    } else if d < 0.0 {
                        -g
                    } else {
                        T::zero()
                    }
                })
                .collect();
            vec![Some(out)]
        }),
    ))
}
