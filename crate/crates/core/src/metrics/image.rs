use std::cell::Cell;
use std::fs;
use std::io::{self, BufRead, Cursor, Read, Seek};
use std::rc::Rc;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Element, Shape, Tensor};

/// 8-bit RGB image, row-major, three bytes per pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Usage(format!("image extent {width}x{height} must be positive")));
        }
        if pixels.len() != 3 * width * height {
            return Err(Error::Usage(format!(
                "{} bytes do not fill a {width}x{height} RGB image",
                pixels.len()
            )));
        }
        Ok(Image { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        Image::new(width, height, rgb.repeat(width * height))
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Result<Self> {
        let mut pixels = Vec::with_capacity(3 * width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.extend_from_slice(&f(x, y));
            }
        }
        Image::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    /// Sub-image with top-left corner `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<Image> {
        if x0 + width > self.width || y0 + height > self.height {
            return Err(Error::Usage(format!(
                "crop {width}x{height}+{x0}+{y0} exceeds {}x{}",
                self.width, self.height
            )));
        }
        Image::from_fn(width, height, |x, y| self.pixel(x0 + x, y0 + y))
    }

    /// Trim to the largest extent divisible by `scale`.
    pub fn mod_crop(&self, scale: usize) -> Result<Image> {
        let (w, h) = (self.width - self.width % scale, self.height - self.height % scale);
        if w == 0 || h == 0 {
            return Err(Error::Usage(format!(
                "{}x{} image is smaller than scale {scale}",
                self.width, self.height
            )));
        }
        self.crop(0, 0, w, h)
    }

    /// Channel-planar copy scaled to `[0, 1]`.
    pub fn to_planes(&self) -> Vec<f64> {
        let plane = self.width * self.height;
        let mut out = vec![0.0; 3 * plane];
        for (i, px) in self.pixels.chunks_exact(3).enumerate() {
            for c in 0..3 {
                out[c * plane + i] = px[c] as f64 / 255.0;
            }
        }
        out
    }

    /// Inverse of [`Image::to_planes`]: values are clamped to `[0, 1]` and rounded.
    pub fn from_planes(width: usize, height: usize, planes: &[f64]) -> Result<Image> {
        let plane = width * height;
        if planes.len() != 3 * plane {
            return Err(Error::Usage(format!("{} values do not fill 3x{height}x{width}", planes.len())));
        }
        let mut pixels = vec![0u8; 3 * plane];
        for i in 0..plane {
            for c in 0..3 {
                pixels[3 * i + c] = quantize(planes[c * plane + i]);
            }
        }
        Image::new(width, height, pixels)
    }

    /// `1×3×H×W` tensor in `[0, 1]`.
    pub fn to_tensor<T: Element>(&self) -> Tensor<T> {
        let data = self.to_planes().into_iter().map(T::from_f64).collect();
        Tensor::from_vec(Shape::new(1, 3, self.height, self.width), data).expect("planes fill the shape")
    }

    /// Image `n` of a `N×3×H×W` tensor.
    pub fn from_tensor<T: Element>(t: &Tensor<T>, n: usize) -> Result<Image> {
        let s = t.shape();
        if s.c != 3 || n >= s.n {
            return Err(Error::Usage(format!("cannot take RGB image {n} from {s}")));
        }
        let len = 3 * s.h * s.w;
        let planes: Vec<f64> = t.data()[n * len..(n + 1) * len].iter().map(|v| v.as_f64()).collect();
        Image::from_planes(s.w, s.h, &planes)
    }
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Luminance plane with values on the `[0, 255]` scale.
#[derive(Clone, Debug, PartialEq)]
pub struct YImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl YImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Usage(format!("{} values do not fill {width}x{height}", data.len())));
        }
        Ok(YImage { width, height, data })
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Drop `border` pixels from every edge.
    pub fn shave(&self, border: usize) -> Result<YImage> {
        if 2 * border >= self.width || 2 * border >= self.height {
            return Err(Error::Usage(format!(
                "shaving {border} px leaves nothing of {}x{}",
                self.width, self.height
            )));
        }
        let (w, h) = (self.width - 2 * border, self.height - 2 * border);
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            let row = (y + border) * self.width + border;
            data.extend_from_slice(&self.data[row..row + w]);
        }
        YImage::new(w, h, data)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImageFormat {
    Png,
    Ppm,
}

impl ImageFormat {
    pub const EXTENSIONS: [&'static str; 3] = ["png", "ppm", "pnm"];

    pub fn from_path(path: &Path) -> Option<ImageFormat> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "png" => Some(ImageFormat::Png),
            "ppm" | "pnm" => Some(ImageFormat::Ppm),
            _ => None,
        }
    }

    fn sniff(bytes: &[u8]) -> Option<ImageFormat> {
        if bytes.starts_with(b"\x89PNG") {
            Some(ImageFormat::Png)
        } else if bytes.starts_with(b"P6") {
            Some(ImageFormat::Ppm)
        } else {
            None
        }
    }
}

/// Decode a PNG or binary PPM file, chosen by content and falling back to
/// the extension.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    match ImageFormat::sniff(&bytes).or_else(|| ImageFormat::from_path(path)) {
        Some(ImageFormat::Png) => decode_png(&bytes),
        Some(ImageFormat::Ppm) => decode_ppm(&bytes),
        None => Err(Error::Parse {
            offset: 0,
            msg: format!("{} is neither PNG nor P6 PPM", path.display()),
        }),
    }
}

/// Encode by extension; anything other than `.ppm`/`.pnm` is written as PNG.
pub fn save_image(path: impl AsRef<Path>, img: &Image) -> Result<()> {
    let path = path.as_ref();
    let bytes = match ImageFormat::from_path(path) {
        Some(ImageFormat::Ppm) => encode_ppm(img),
        _ => encode_png(img)?,
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn encode_ppm(img: &Image) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

pub(crate) fn decode_ppm(bytes: &[u8]) -> Result<Image> {
    let mut pos = 0;
    if !bytes.starts_with(b"P6") {
        return Err(Error::Parse { offset: 0, msg: "missing P6 magic".into() });
    }
    pos += 2;
    let mut fields = [0usize; 3];
    for (k, field) in fields.iter_mut().enumerate() {
        // whitespace and comments before each header field
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            let msg = match bytes.get(pos) {
                None => "header truncated".to_string(),
                Some(b) => format!("expected digit in header field {k}, found {:?}", *b as char),
            };
            return Err(Error::Parse { offset: pos, msg });
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        *field = text
            .parse()
            .map_err(|_| Error::Parse { offset: start, msg: format!("header value {text} out of range") })?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(Error::Parse { offset: pos, msg: format!("only maxval 255 is supported, got {maxval}") });
    }
    if width == 0 || height == 0 {
        return Err(Error::Parse { offset: pos, msg: format!("empty extent {width}x{height}") });
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::Parse { offset: pos, msg: "header truncated before raster".into() }),
    }
    let need = 3 * width * height;
    let raster = &bytes[pos..];
    if raster.len() < need {
        return Err(Error::Parse {
            offset: bytes.len(),
            msg: format!("raster has {} of {need} bytes", raster.len()),
        });
    }
    Image::new(width, height, raster[..need].to_vec())
}

pub(crate) fn encode_png(img: &Image) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width as u32, img.height as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc
            .write_header()
            .map_err(|e| Error::Usage(format!("png encode: {e}")))?;
        writer
            .write_image_data(&img.pixels)
            .map_err(|e| Error::Usage(format!("png encode: {e}")))?;
    }
    Ok(out)
}

/// Tracks how far the decoder read so failures carry a byte offset.
struct Counting<'a> {
    inner: Cursor<&'a [u8]>,
    reached: Rc<Cell<u64>>,
}

impl Counting<'_> {
    fn note(&self) {
        self.reached.set(self.reached.get().max(self.inner.position()));
    }
}

impl Read for Counting<'_> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.note();
        Ok(n)
    }
}

impl BufRead for Counting<'_> {
    fn fill_buf(&mut self) -> io::Result<&[u8]> {
        self.inner.fill_buf()
    }
    fn consume(&mut self, n: usize) {
        self.inner.consume(n);
        self.note();
    }
}

impl Seek for Counting<'_> {
    fn seek(&mut self, pos: io::SeekFrom) -> io::Result<u64> {
        let p = self.inner.seek(pos)?;
        self.note();
        Ok(p)
    }
}

pub(crate) fn decode_png(bytes: &[u8]) -> Result<Image> {
    let reached = Rc::new(Cell::new(0));
    let source = Counting { inner: Cursor::new(bytes), reached: reached.clone() };
    let fail = |e: png::DecodingError| Error::Parse {
        offset: reached.get() as usize,
        msg: format!("png: {e}"),
    };
    let mut decoder = png::Decoder::new(source);
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder.read_info().map_err(fail)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Parse { offset: reached.get() as usize, msg: "png: image too large".into() })?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(fail)?;
    let (w, h) = (info.width as usize, info.height as usize);
    let channels = info.color_type.samples();
    let mut pixels = Vec::with_capacity(3 * w * h);
    for px in buf[..info.buffer_size()].chunks_exact(channels) {
        match channels {
            1 | 2 => pixels.extend_from_slice(&[px[0]; 3]),
            _ => pixels.extend_from_slice(&px[..3]),
        }
    }
    Image::new(w, h, pixels)
}
