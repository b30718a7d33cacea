use crate::error::{Axis, Error, Result};
use crate::tensor::{macs, Element, Shape, Tensor};

/// Resolved geometry of one 2-D cross-correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv2dGeometry {
    pub batch: usize,
    pub in_channels: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub pad_h: usize,
    pub pad_w: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl Conv2dGeometry {
    pub fn new(input: Shape, weight: Shape, stride: usize, pad: (usize, usize)) -> Result<Self> {
        if stride == 0 {
            return Err(Error::Usage("conv2d stride must be positive".into()));
        }
        if weight.c != input.c {
            return Err(Error::dim(
                Axis::Channel,
                format!("conv2d weight expects {} input channels, input has {}", weight.c, input.c),
            ));
        }
        let (ph, pw) = pad;
        if weight.h == 0 || weight.h > input.h + 2 * ph {
            return Err(Error::dim(
                Axis::Height,
                format!("kernel height {} exceeds padded input height {}", weight.h, input.h + 2 * ph),
            ));
        }
        if weight.w == 0 || weight.w > input.w + 2 * pw {
            return Err(Error::dim(
                Axis::Width,
                format!("kernel width {} exceeds padded input width {}", weight.w, input.w + 2 * pw),
            ));
        }
        Ok(Conv2dGeometry {
            batch: input.n,
            in_channels: input.c,
            in_h: input.h,
            in_w: input.w,
            out_channels: weight.n,
            kernel_h: weight.h,
            kernel_w: weight.w,
            stride,
            pad_h: ph,
            pad_w: pw,
            out_h: (input.h + 2 * ph - weight.h) / stride + 1,
            out_w: (input.w + 2 * pw - weight.w) / stride + 1,
        })
    }

    pub fn output_shape(&self) -> Shape {
        Shape::new(self.batch, self.out_channels, self.out_h, self.out_w)
    }

    /// Rows of the unfolded patch matrix.
    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel_h * self.kernel_w
    }

    fn out_plane(&self) -> usize {
        self.out_h * self.out_w
    }

    fn is_pointwise(&self) -> bool {
        self.kernel_h == 1 && self.kernel_w == 1 && self.stride == 1 && self.pad_h == 0 && self.pad_w == 0
    }

    /// Multiply-accumulates for one image.
    pub fn macs_per_image(&self) -> u64 {
        (self.out_plane() * self.out_channels * self.patch_len()) as u64
    }

    /// Unfold one image `[Cin, H, W]` into `[Cin·kh·kw, H'·W']`.
    fn im2col<T: Element>(&self, img: &[T], cols: &mut [T]) {
        let plane = self.out_plane();
        for ci in 0..self.in_channels {
            let src = &img[ci * self.in_h * self.in_w..(ci + 1) * self.in_h * self.in_w];
            for ki in 0..self.kernel_h {
                for kj in 0..self.kernel_w {
                    let row = (ci * self.kernel_h + ki) * self.kernel_w + kj;
                    let dst = &mut cols[row * plane..(row + 1) * plane];
                    for oy in 0..self.out_h {
                        let iy = (oy * self.stride + ki) as isize - self.pad_h as isize;
                        let line = &mut dst[oy * self.out_w..(oy + 1) * self.out_w];
                        if iy < 0 || iy >= self.in_h as isize {
                            line.fill(T::zero());
                            continue;
                        }
                        let srow = &src[iy as usize * self.in_w..(iy as usize + 1) * self.in_w];
                        for (ox, v) in line.iter_mut().enumerate() {
                            let ix = (ox * self.stride + kj) as isize - self.pad_w as isize;
                            *v = if ix < 0 || ix >= self.in_w as isize {
                                T::zero()
                            } else {
                                srow[ix as usize]
                            };
                        }
                    }
                }
            }
        }
    }

    /// Scatter-add of an unfolded gradient back onto `[Cin, H, W]`.
    fn col2im<T: Element>(&self, cols: &[T], img: &mut [T]) {
        let plane = self.out_plane();
        for ci in 0..self.in_channels {
            let dst = &mut img[ci * self.in_h * self.in_w..(ci + 1) * self.in_h * self.in_w];
            for ki in 0..self.kernel_h {
                for kj in 0..self.kernel_w {
                    let row = (ci * self.kernel_h + ki) * self.kernel_w + kj;
                    let src = &cols[row * plane..(row + 1) * plane];
                    for oy in 0..self.out_h {
                        let iy = (oy * self.stride + ki) as isize - self.pad_h as isize;
                        if iy < 0 || iy >= self.in_h as isize {
                            continue;
                        }
                        let drow = &mut dst[iy as usize * self.in_w..(iy as usize + 1) * self.in_w];
                        for ox in 0..self.out_w {
                            let ix = (ox * self.stride + kj) as isize - self.pad_w as isize;
                            if ix >= 0 && ix < self.in_w as isize {
                                drow[ix as usize] = drow[ix as usize] + src[oy * self.out_w + ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// 2-D cross-correlation (no kernel flip) with symmetric zero padding.
pub fn conv2d<T: Element>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<T>> {
    conv2d_padded(input, weight, bias, stride, (padding, padding))
}

/// [`conv2d`] with independent vertical and horizontal padding.
pub fn conv2d_padded<T: Element>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    stride: usize,
    padding: (usize, usize),
) -> Result<Tensor<T>> {
    let g = Conv2dGeometry::new(input.shape(), weight.shape(), stride, padding)?;
    if let Some(b) = bias {
        if b.numel() != g.out_channels {
            return Err(Error::dim(
                Axis::Channel,
                format!("bias has {} entries for {} output channels", b.numel(), g.out_channels),
            ));
        }
    }
    let k = g.patch_len();
    let plane = g.out_plane();
    let in_img = g.in_channels * g.in_h * g.in_w;
    let out_img = g.out_channels * plane;
    let mut out = vec![T::zero(); g.batch * out_img];
    let mut cols = if g.is_pointwise() { Vec::new() } else { vec![T::zero(); k * plane] };
    let x = input.data();
    let wt = weight.data();
    for n in 0..g.batch {
        let img = &x[n * in_img..(n + 1) * in_img];
        let patches: &[T] = if g.is_pointwise() {
            img
        } else {
            g.im2col(img, &mut cols);
            &cols
        };
        let dst = &mut out[n * out_img..(n + 1) * out_img];
        T::gemm(g.out_channels, k, plane, wt, (k as isize, 1), patches, (plane as isize, 1), T::zero(), dst);
        if let Some(b) = bias {
            for (co, chunk) in dst.chunks_mut(plane).enumerate() {
                let bv = b.data()[co];
                chunk.iter_mut().for_each(|v| *v = *v + bv);
            }
        }
    }
    macs::add(g.macs_per_image() * g.batch as u64);

    let mut inputs = vec![input.clone(), weight.clone()];
    if let Some(b) = bias {
        inputs.push(b.clone());
    }
    let (xi, wi) = (input.clone(), weight.clone());
    let has_bias = bias.is_some();
    Ok(Tensor::from_op(
        "conv2d",
        g.output_shape(),
        out,
        inputs,
        Box::new(move |ctx| {
            let gout = ctx.grad;
            let x = xi.data();
            let wt = wi.data();
            let mut gx = xi.requires_grad().then(|| vec![T::zero(); x.len()]);
            let mut gw = wi.requires_grad().then(|| vec![T::zero(); wt.len()]);
            let mut cols = vec![T::zero(); k * plane];
            for n in 0..g.batch {
                let go = &gout[n * out_img..(n + 1) * out_img];
                if let Some(gw) = gw.as_mut() {
                    let img = &x[n * in_img..(n + 1) * in_img];
                    let patches: &[T] = if g.is_pointwise() {
                        img
                    } else {
                        g.im2col(img, &mut cols);
                        &cols
                    };
                    // dW[co, r] += sum_p gout[co, p] * patches[r, p]
                    T::gemm(g.out_channels, plane, k, go, (plane as isize, 1), patches, (1, plane as isize), T::one(), gw);
                }
                if let Some(gx) = gx.as_mut() {
                    let dst = &mut gx[n * in_img..(n + 1) * in_img];
                    if g.is_pointwise() {
                        T::gemm(k, g.out_channels, plane, wt, (1, k as isize), go, (plane as isize, 1), T::one(), dst);
                    } else {
                        T::gemm(k, g.out_channels, plane, wt, (1, k as isize), go, (plane as isize, 1), T::zero(), &mut cols);
                        g.col2im(&cols, dst);
                    }
                }
            }
            let mut grads = vec![gx, gw];
            if has_bias {
                let gb = (0..g.out_channels)
                    .map(|co| {
                        (0..g.batch)
                            .map(|n| {
                                let s = n * out_img + co * plane;
                                gout[s..s + plane].iter().copied().sum::<T>()
                            })
                            .sum()
                    })
                    .collect();
                grads.push(Some(gb));
            }
            grads
        }),
    ))
}
