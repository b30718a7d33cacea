//! Thread-local multiply-accumulate counter fed by forward convolution and
//! matrix-product kernels. Used to cross-check analytic complexity figures.

use std::cell::Cell;

thread_local! {
    static COUNT: Cell<u64> = const { Cell::new(0) };
}

pub fn reset() {
    COUNT.with(|c| c.set(0));
}

pub fn get() -> u64 {
    COUNT.with(|c| c.get())
}

pub(crate) fn add(n: u64) {
    COUNT.with(|c| c.set(c.get() + n));
}
