//! Differentiable operators. Each forward validates shapes, computes the
//! result eagerly, and attaches a backward rule when an input is tracked.

mod attention;
mod conv;
mod elementwise;
mod layout;
mod pool;
mod reduce;

pub use attention::{layer_norm, matmul, softmax};
pub use conv::{conv2d, conv2d_padded, Conv2dGeometry};
pub use elementwise::{add, gelu, mul, relu, scalar_mul, sigmoid, sub, Unary};
pub use layout::{
    channel_concat, channel_split, crop, cyclic_shift, pad_reflect, pixel_shuffle, reflect_index,
    reshape, transpose_hw, upsample_nearest, window_partition, window_reverse,
};
pub use pool::{global_avg_pool, max_pool2d};
pub use reduce::{mean_all, sum_all};
