use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::tensor::{Element, Tensor};

/// Shadow weights `s ← d·s + (1 − d)·p`, initialised to the starting
/// parameters. The shadow never records a tape.
#[derive(Clone, Debug)]
pub struct EmaState<T: Element> {
    pub shadow: ModelParams<T>,
    pub decay: f64,
}

impl<T: Element> EmaState<T> {
    pub fn new(params: &ModelParams<T>, decay: f64) -> Self {
        EmaState { shadow: params.frozen(), decay }
    }
}

/// Move the shadow toward `params`.
pub fn ema_update<T: Element>(ema: &mut EmaState<T>, params: &ModelParams<T>) -> Result<()> {
    let d = ema.decay;
    let names: Vec<String> = ema.shadow.names().map(str::to_string).collect();
    for name in names {
        let s = ema.shadow.get(&name)?;
        let p = params.get(&name)?;
        if s.shape() != p.shape() {
            return Err(Error::Usage(format!("EMA shadow {name} is {} but parameter is {}", s.shape(), p.shape())));
        }
        let data = s
            .data()
            .iter()
            .zip(p.data())
            .map(|(a, b)| {
                let (a, b) = (a.as_f64(), b.as_f64());
                T::from_f64(a + (1.0 - d) * (b - a))
            })
            .collect();
        let next = Tensor::leaf(s.shape(), data, false)?;
        ema.shadow.insert(name, next);
    }
    Ok(())
}
