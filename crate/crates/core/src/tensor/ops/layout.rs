//! Data-movement operators. Most are a gather `out[i] = x[index[i]]` whose
//! backward is the matching scatter-add.

use crate::error::{Axis, Error, Result};
use crate::tensor::{Element, Shape, Tensor};

fn gather<T: Element>(name: &'static str, x: &Tensor<T>, out: Shape, index: Vec<usize>) -> Tensor<T> {
    debug_assert_eq!(index.len(), out.numel());
    let src = x.data();
    let data = index.iter().map(|&j| src[j]).collect();
    let in_len = x.numel();
    Tensor::from_op(
        name,
        out,
        data,
        vec![x.clone()],
        Box::new(move |ctx| {
            let mut g = vec![T::zero(); in_len];
            for (&j, &v) in index.iter().zip(ctx.grad) {
                g[j] = g[j] + v;
            }
            vec![Some(g)]
        }),
    )
}

/// Builds the gather index for `out` by mapping each output coordinate to a
/// source coordinate in `src`.
fn index_map(out: Shape, src: Shape, f: impl Fn(usize, usize, usize, usize) -> (usize, usize, usize, usize)) -> Vec<usize> {
    let mut idx = Vec::with_capacity(out.numel());
    for n in 0..out.n {
        for c in 0..out.c {
            for h in 0..out.h {
                for w in 0..out.w {
                    let (sn, sc, sh, sw) = f(n, c, h, w);
                    idx.push(src.index(sn, sc, sh, sw));
                }
            }
        }
    }
    idx
}

/// Same data under a new shape with equal element count.
pub fn reshape<T: Element>(x: &Tensor<T>, shape: Shape) -> Result<Tensor<T>> {
    if shape.numel() != x.numel() {
        return Err(Error::Usage(format!("cannot reshape {} into {shape}", x.shape())));
    }
    Ok(Tensor::from_op(
        "reshape",
        shape,
        x.to_vec(),
        vec![x.clone()],
        Box::new(|ctx| vec![Some(ctx.grad.to_vec())]),
    ))
}

/// Swap the last two axes: `N×C×H×W → N×C×W×H`.
pub fn transpose_hw<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    let s = x.shape();
    let out = Shape::new(s.n, s.c, s.w, s.h);
    gather("transpose_hw", x, out, index_map(out, s, |n, c, h, w| (n, c, w, h)))
}

/// Channels `[0, boundary)` and `[boundary, C)`.
pub fn channel_split<T: Element>(x: &Tensor<T>, boundary: usize) -> Result<(Tensor<T>, Tensor<T>)> {
    let s = x.shape();
    if boundary == 0 || boundary >= s.c {
        return Err(Error::Index(format!(
            "split boundary {boundary} outside (0, {})",
            s.c
        )));
    }
    let lo = Shape::new(s.n, boundary, s.h, s.w);
    let hi = Shape::new(s.n, s.c - boundary, s.h, s.w);
    let a = gather("channel_split", x, lo, index_map(lo, s, |n, c, h, w| (n, c, h, w)));
    let b = gather("channel_split", x, hi, index_map(hi, s, |n, c, h, w| (n, c + boundary, h, w)));
    Ok((a, b))
}

/// Concatenate along channels, preserving part order.
pub fn channel_concat<T: Element>(parts: &[Tensor<T>]) -> Result<Tensor<T>> {
    let first = parts
        .first()
        .ok_or_else(|| Error::Usage("channel_concat needs at least one part".into()))?
        .shape();
    for p in parts {
        let s = p.shape();
        for (axis, a, b) in [
            (Axis::Batch, first.n, s.n),
            (Axis::Height, first.h, s.h),
            (Axis::Width, first.w, s.w),
        ] {
            if a != b {
                return Err(Error::dim(axis, format!("cannot concat {s} with {first}")));
            }
        }
    }
    let channels: Vec<usize> = parts.iter().map(|p| p.shape().c).collect();
    let total: usize = channels.iter().sum();
    let out_shape = Shape::new(first.n, total, first.h, first.w);
    let plane = first.plane();
    let mut data = Vec::with_capacity(out_shape.numel());
    for n in 0..first.n {
        for (p, &c) in parts.iter().zip(&channels) {
            data.extend_from_slice(&p.data()[n * c * plane..(n + 1) * c * plane]);
        }
    }
    let batch = first.n;
    Ok(Tensor::from_op(
        "channel_concat",
        out_shape,
        data,
        parts.to_vec(),
        Box::new(move |ctx| {
            let mut grads: Vec<Vec<T>> = channels.iter().map(|&c| Vec::with_capacity(batch * c * plane)).collect();
            let mut off = 0;
            for _ in 0..batch {
                for (g, &c) in grads.iter_mut().zip(&channels) {
                    g.extend_from_slice(&ctx.grad[off..off + c * plane]);
                    off += c * plane;
                }
            }
            grads.into_iter().map(Some).collect()
        }),
    ))
}

/// `N×(C·r²)×H×W → N×C×(H·r)×(W·r)` with
/// `out(n, c, h·r+i, w·r+j) = in(n, c·r²+i·r+j, h, w)`.
pub fn pixel_shuffle<T: Element>(x: &Tensor<T>, r: usize) -> Result<Tensor<T>> {
    let s = x.shape();
    if r == 0 || s.c % (r * r) != 0 {
        return Err(Error::dim(
            Axis::Channel,
            format!("{} channels not divisible by r²={}", s.c, r * r),
        ));
    }
    let out = Shape::new(s.n, s.c / (r * r), s.h * r, s.w * r);
    let idx = index_map(out, s, |n, c, h, w| (n, c * r * r + (h % r) * r + (w % r), h / r, w / r));
    Ok(gather("pixel_shuffle", x, out, idx))
}

/// Split `N×C×H×W` into non-overlapping `w×w` windows, giving
/// `(N·(H/w)·(W/w))×C×w×w` ordered by (image, window row, window column).
pub fn window_partition<T: Element>(x: &Tensor<T>, w: usize) -> Result<Tensor<T>> {
    let s = x.shape();
    if w == 0 || s.h % w != 0 {
        return Err(Error::dim(Axis::Height, format!("height {} not divisible by window {w}", s.h)));
    }
    if s.w % w != 0 {
        return Err(Error::dim(Axis::Width, format!("width {} not divisible by window {w}", s.w)));
    }
    let (nh, nw) = (s.h / w, s.w / w);
    let out = Shape::new(s.n * nh * nw, s.c, w, w);
    let idx = index_map(out, s, |b, c, i, j| {
        let n = b / (nh * nw);
        let wy = (b / nw) % nh;
        let wx = b % nw;
        (n, c, wy * w + i, wx * w + j)
    });
    Ok(gather("window_partition", x, out, idx))
}

/// Inverse of [`window_partition`] for an `h×w_img` image.
pub fn window_reverse<T: Element>(windows: &Tensor<T>, w: usize, h: usize, w_img: usize) -> Result<Tensor<T>> {
    let s = windows.shape();
    if s.h != w || s.w != w || w == 0 {
        return Err(Error::dim(Axis::Height, format!("windows {s} are not {w}x{w}")));
    }
    if h % w != 0 {
        return Err(Error::dim(Axis::Height, format!("height {h} not divisible by window {w}")));
    }
    if w_img % w != 0 {
        return Err(Error::dim(Axis::Width, format!("width {w_img} not divisible by window {w}")));
    }
    let (nh, nw) = (h / w, w_img / w);
    if s.n % (nh * nw) != 0 {
        return Err(Error::dim(
            Axis::Batch,
            format!("{} windows do not tile {h}x{w_img} images", s.n),
        ));
    }
    let out = Shape::new(s.n / (nh * nw), s.c, h, w_img);
    let idx = index_map(out, s, |n, c, y, x| {
        let b = (n * nh + y / w) * nw + x / w;
        (b, c, y % w, x % w)
    });
    Ok(gather("window_reverse", windows, out, idx))
}

/// Circular roll of the spatial axes: `out(h, w) = x((h − dy) mod H, (w − dx) mod W)`.
pub fn cyclic_shift<T: Element>(x: &Tensor<T>, dy: isize, dx: isize) -> Tensor<T> {
    let s = x.shape();
    let (hh, ww) = (s.h as isize, s.w as isize);
    let idx = index_map(s, s, |n, c, h, w| {
        let sh = (h as isize - dy).rem_euclid(hh) as usize;
        let sw = (w as isize - dx).rem_euclid(ww) as usize;
        (n, c, sh, sw)
    });
    gather("cyclic_shift", x, s, idx)
}

/// Mirror index without edge repetition (`reflect` mode), folding repeatedly
/// so any pad width is valid.
pub fn reflect_index(i: usize, n: usize) -> usize {
    if n <= 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let m = i % period;
    if m < n {
        m
    } else {
        period - m
    }
}

/// Reflect-pad the bottom and right edges.
pub fn pad_reflect<T: Element>(x: &Tensor<T>, bottom: usize, right: usize) -> Tensor<T> {
    if bottom == 0 && right == 0 {
        return x.clone();
    }
    let s = x.shape();
    let out = Shape::new(s.n, s.c, s.h + bottom, s.w + right);
    let idx = index_map(out, s, |n, c, h, w| (n, c, reflect_index(h, s.h), reflect_index(w, s.w)));
    gather("pad_reflect", x, out, idx)
}

/// Keep the top-left `h×w` region.
pub fn crop<T: Element>(x: &Tensor<T>, h: usize, w: usize) -> Result<Tensor<T>> {
    let s = x.shape();
    if h > s.h {
        return Err(Error::dim(Axis::Height, format!("crop height {h} exceeds {}", s.h)));
    }
    if w > s.w {
        return Err(Error::dim(Axis::Width, format!("crop width {w} exceeds {}", s.w)));
    }
    if h == s.h && w == s.w {
        return Ok(x.clone());
    }
    let out = Shape::new(s.n, s.c, h, w);
    Ok(gather("crop", x, out, index_map(out, s, |n, c, y, xx| (n, c, y, xx))))
}

/// Nearest-neighbour resize to `out_h×out_w`, source index `floor(dst·in/out)`.
pub fn upsample_nearest<T: Element>(x: &Tensor<T>, out_h: usize, out_w: usize) -> Result<Tensor<T>> {
    let s = x.shape();
    if out_h == 0 || s.h == 0 {
        return Err(Error::dim(Axis::Height, "empty resize"));
    }
    if out_w == 0 || s.w == 0 {
        return Err(Error::dim(Axis::Width, "empty resize"));
    }
    let out = Shape::new(s.n, s.c, out_h, out_w);
    let idx = index_map(out, s, |n, c, h, w| (n, c, h * s.h / out_h, w * s.w / out_w));
    Ok(gather("upsample_nearest", x, out, idx))
}
