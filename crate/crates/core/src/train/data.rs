use std::path::{Path, PathBuf};

use rand::Rng;

use crate::error::{Error, Result};
use crate::metrics::{bicubic_resize, load_image, Image, ImageFormat};
use crate::tensor::{Element, Shape, Tensor};

/// A mod-cropped HR image and its bicubic downscale.
#[derive(Clone, Debug)]
pub struct TrainPair {
    pub name: String,
    pub hr: Image,
    pub lr: Image,
    hr_planes: Vec<f64>,
    lr_planes: Vec<f64>,
}

impl TrainPair {
    pub fn new(name: impl Into<String>, hr: &Image, scale: usize) -> Result<Self> {
        let hr = hr.mod_crop(scale)?;
        let lr = bicubic_resize(&hr, hr.width() / scale, hr.height() / scale);
        Ok(TrainPair {
            name: name.into(),
            hr_planes: hr.to_planes(),
            lr_planes: lr.to_planes(),
            hr,
            lr,
        })
    }
}

/// Training images at one scale factor.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub scale: usize,
    pub pairs: Vec<TrainPair>,
}

impl Dataset {
    pub fn from_images(images: impl IntoIterator<Item = (String, Image)>, scale: usize) -> Result<Self> {
        let pairs = images
            .into_iter()
            .map(|(name, img)| TrainPair::new(name, &img, scale))
            .collect::<Result<Vec<_>>>()?;
        if pairs.is_empty() {
            return Err(Error::Usage("dataset is empty".into()));
        }
        Ok(Dataset { scale, pairs })
    }

    /// Every PNG/PPM file directly inside `dir`, in filename order.
    pub fn from_dir(dir: impl AsRef<Path>, scale: usize) -> Result<Self> {
        let files = image_files(dir.as_ref())?;
        let images = files
            .iter()
            .map(|p| Ok((p.file_name().unwrap_or_default().to_string_lossy().into_owned(), load_image(p)?)))
            .collect::<Result<Vec<_>>>()?;
        Dataset::from_images(images, scale)
    }

    /// Fails unless every image can supply a `patch×patch` LR crop.
    pub fn check_patch(&self, patch: usize) -> Result<()> {
        for p in &self.pairs {
            if p.lr.width() < patch || p.lr.height() < patch {
                let need = patch * self.scale;
                return Err(Error::Usage(format!(
                    "{} is {}x{}; patch {patch} at scale {} needs at least {need}x{need}",
                    p.name,
                    p.hr.width(),
                    p.hr.height(),
                    self.scale
                )));
            }
        }
        Ok(())
    }
}

/// Image files in `dir` with an accepted extension, sorted by name.
pub fn image_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let accepted = ImageFormat::EXTENSIONS.join(", ");
    let entries = std::fs::read_dir(dir).map_err(|e| {
        Error::Usage(format!("cannot read image directory {}: {e} (accepted: {accepted})", dir.display()))
    })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && ImageFormat::from_path(p).is_some())
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Usage(format!("no images in {} (accepted: {accepted})", dir.display())));
    }
    Ok(files)
}

/// Per-patch geometric augmentation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Augment {
    pub hflip: bool,
    pub rot90: bool,
}

impl Augment {
    pub fn draw(rng: &mut impl Rng) -> Self {
        Augment { hflip: rng.random_bool(0.5), rot90: rng.random_bool(0.5) }
    }

    /// Source coordinate for output `(x, y)` of a `side×side` patch.
    fn source(self, x: usize, y: usize, side: usize) -> (usize, usize) {
        let (x, y) = if self.rot90 { (y, side - 1 - x) } else { (x, y) };
        if self.hflip { (side - 1 - x, y) } else { (x, y) }
    }
}

fn cut<T: Element>(planes: &[f64], width: usize, height: usize, x0: usize, y0: usize, side: usize, aug: Augment, out: &mut Vec<T>) {
    let plane = width * height;
    for c in 0..3 {
        for y in 0..side {
            for x in 0..side {
                let (sx, sy) = aug.source(x, y, side);
                out.push(T::from_f64(planes[c * plane + (y0 + sy) * width + x0 + sx]));
            }
        }
    }
}

/// One aligned LR/HR patch pair: `1×3×p×p` and `1×3×(p·s)×(p·s)`.
pub fn sample_patch<T: Element>(
    pair: &TrainPair,
    scale: usize,
    patch: usize,
    augment: bool,
    rng: &mut impl Rng,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let mut lr = Vec::new();
    let mut hr = Vec::new();
    draw_into(pair, scale, patch, augment, rng, &mut lr, &mut hr)?;
    let hp = patch * scale;
    Ok((
        Tensor::from_vec(Shape::new(1, 3, patch, patch), lr)?,
        Tensor::from_vec(Shape::new(1, 3, hp, hp), hr)?,
    ))
}

fn draw_into<T: Element>(
    pair: &TrainPair,
    scale: usize,
    patch: usize,
    augment: bool,
    rng: &mut impl Rng,
    lr: &mut Vec<T>,
    hr: &mut Vec<T>,
) -> Result<()> {
    let (lw, lh) = (pair.lr.width(), pair.lr.height());
    if lw < patch || lh < patch || pair.hr.width() != lw * scale || pair.hr.height() != lh * scale {
        let need = patch * scale;
        return Err(Error::Usage(format!(
            "{} ({}x{}) is too small: patch {patch} at scale {scale} needs at least {need}x{need}",
            pair.name,
            pair.hr.width(),
            pair.hr.height()
        )));
    }
    let x0 = rng.random_range(0..=lw - patch);
    let y0 = rng.random_range(0..=lh - patch);
    let aug = if augment { Augment::draw(rng) } else { Augment::default() };
    cut(&pair.lr_planes, lw, lh, x0, y0, patch, aug, lr);
    cut(&pair.hr_planes, lw * scale, lh * scale, x0 * scale, y0 * scale, patch * scale, aug, hr);
    Ok(())
}

/// `batch` patches, each from a uniformly chosen image, stacked along N.
pub fn sample_batch<T: Element>(
    data: &Dataset,
    patch: usize,
    batch: usize,
    augment: bool,
    rng: &mut impl Rng,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let mut lr = Vec::new();
    let mut hr = Vec::new();
    for _ in 0..batch {
        let pair = &data.pairs[rng.random_range(0..data.pairs.len())];
        draw_into(pair, data.scale, patch, augment, rng, &mut lr, &mut hr)?;
    }
    let hp = patch * data.scale;
    Ok((
        Tensor::from_vec(Shape::new(batch, 3, patch, patch), lr)?,
        Tensor::from_vec(Shape::new(batch, 3, hp, hp), hr)?,
    ))
}
