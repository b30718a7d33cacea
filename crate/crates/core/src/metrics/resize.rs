use crate::metrics::Image;
use crate::tensor::{Element, Shape, Tensor};

const A: f64 = -0.5;

/// Keys cubic convolution kernel with `a = -0.5`.
pub fn cubic_kernel(t: f64) -> f64 {
    let t = t.abs();
    if t <= 1.0 {
        ((A + 2.0) * t - (A + 3.0)) * t * t + 1.0
    } else if t < 2.0 {
        ((A * t - 5.0 * A) * t + 8.0 * A) * t - 4.0 * A
    } else {
        0.0
    }
}

/// Four source indices (already clamped) and their weights for one output sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Taps {
    pub index: [usize; 4],
    pub weight: [f64; 4],
}

/// Sampling taps along one axis for an `in_len → out_len` resize, using
/// half-pixel centres: `src = (dst + 0.5)·in/out − 0.5`.
pub fn resample_taps(in_len: usize, out_len: usize) -> Vec<Taps> {
    let scale = in_len as f64 / out_len as f64;
    let last = in_len as isize - 1;
    (0..out_len)
        .map(|d| {
            let src = (d as f64 + 0.5) * scale - 0.5;
            let base = src.floor();
            let frac = src - base;
            let mut taps = Taps { index: [0; 4], weight: [0.0; 4] };
            for k in 0..4 {
                let i = base as isize - 1 + k as isize;
                taps.index[k] = i.clamp(0, last) as usize;
                taps.weight[k] = cubic_kernel(frac + 1.0 - k as f64);
            }
            taps
        })
        .collect()
}

/// Resize one `h×w` row-major plane to `out_h×out_w`, rows first then columns.
pub fn bicubic_resize_plane(plane: &[f64], w: usize, h: usize, out_w: usize, out_h: usize) -> Vec<f64> {
    assert_eq!(plane.len(), w * h, "plane does not match {w}x{h}");
    let xs = resample_taps(w, out_w);
    let ys = resample_taps(h, out_h);
    let mut tmp = vec![0.0; h * out_w];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for (x, t) in xs.iter().enumerate() {
            tmp[y * out_w + x] = (0..4).map(|k| t.weight[k] * row[t.index[k]]).sum();
        }
    }
    let mut out = vec![0.0; out_h * out_w];
    for (y, t) in ys.iter().enumerate() {
        for x in 0..out_w {
            out[y * out_w + x] = (0..4).map(|k| t.weight[k] * tmp[t.index[k] * out_w + x]).sum();
        }
    }
    out
}

/// Bicubic resize of an 8-bit image; results are rounded and clamped.
pub fn bicubic_resize(img: &Image, out_w: usize, out_h: usize) -> Image {
    let (w, h) = (img.width(), img.height());
    let mut pixels = vec![0u8; 3 * out_w * out_h];
    for c in 0..3 {
        let plane: Vec<f64> = img.pixels().iter().skip(c).step_by(3).map(|&v| v as f64).collect();
        let out = bicubic_resize_plane(&plane, w, h, out_w, out_h);
        for (i, v) in out.into_iter().enumerate() {
            pixels[3 * i + c] = v.round().clamp(0.0, 255.0) as u8;
        }
    }
    Image::new(out_w, out_h, pixels).expect("output extent is positive")
}

/// Resize every plane of a tensor without quantisation. The result carries no gradient.
pub fn bicubic_resize_tensor<T: Element>(t: &Tensor<T>, out_h: usize, out_w: usize) -> Tensor<T> {
    let s = t.shape();
    let mut data = Vec::with_capacity(s.n * s.c * out_h * out_w);
    for plane in t.data().chunks(s.plane().max(1)) {
        let p: Vec<f64> = plane.iter().map(|v| v.as_f64()).collect();
        data.extend(bicubic_resize_plane(&p, s.w, s.h, out_w, out_h).into_iter().map(T::from_f64));
    }
    Tensor::from_vec(Shape::new(s.n, s.c, out_h, out_w), data).expect("resized planes fill the shape")
}
