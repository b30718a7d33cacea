//! Image files, bicubic resampling, luma conversion and the PSNR/SSIM
//! evaluation protocol.

mod image;
mod quality;
mod resize;

pub use image::{load_image, save_image, Image, ImageFormat, YImage};
pub use quality::{format_db, psnr, rgb_to_y, ssim, SSIM_SIGMA, SSIM_WINDOW};
pub use resize::{bicubic_resize, bicubic_resize_plane, bicubic_resize_tensor, cubic_kernel, resample_taps, Taps};
