use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::cli::RunConfig;
use crate::error::{Error, Result};
use crate::metrics::{bicubic_resize, format_db, load_image, psnr, rgb_to_y, save_image, ssim, Image};
use crate::model::{epnet_infer, report, ComplexityReport, ModelParams};
use crate::train::{
    image_files, train_loop_with, write_loss_csv, Checkpoint, Dataset, TrainError, TrainState, EMA_FILE, PARAMS_FILE,
};

pub const CONFIG_ECHO: &str = "config.json";
pub const LOSS_CSV: &str = "loss.csv";
pub const METRICS_CSV: &str = "metrics.csv";

fn write_out(out: &mut impl Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

fn required<'a>(p: &'a Option<PathBuf>, what: &str, flag: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Usage(format!("{what} is required (--{flag} or paths.{})", flag.replace('-', "_"))))
}

/// Write the resolved configuration next to a run's outputs.
pub fn echo_config(cfg: &RunConfig, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(CONFIG_ECHO);
    std::fs::write(&path, cfg.to_json()).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub rows: usize,
    pub first_loss: f64,
    pub final_loss: f64,
}

/// Train from scratch and write the checkpoint, its averaged twin, the loss
/// trace and the resolved configuration.
pub fn cmd_train(cfg: &RunConfig, out: &mut impl Write) -> Result<TrainSummary> {
    cfg.validate()?;
    let data_dir = required(&cfg.paths.data_dir, "training image directory", "data-dir")?;
    let ckpt = required(&cfg.paths.checkpoint, "checkpoint directory", "checkpoint")?.to_path_buf();
    let data = Dataset::from_dir(data_dir, cfg.model.scale)?;
    data.check_patch(cfg.train.patch_size)?;
    echo_config(cfg, &ckpt)?;
    if let Some(dir) = &cfg.paths.output_dir {
        echo_config(cfg, dir)?;
    }
    let init = ModelParams::<f32>::init(&cfg.model, cfg.train.seed)?;
    let state = TrainState::new(init, &cfg.train);
    let mut log_err = None;
    let result = train_loop_with(&cfg.model, &data, &cfg.train, state, |row| {
        if let Err(e) = writeln!(out, "iter {} loss {:.6}", row.iter, row.loss) {
            log_err.get_or_insert(e);
        }
    });
    if let Some(e) = log_err {
        return Err(Error::io("<stdout>", e));
    }
    let fingerprint = cfg.model_fingerprint();
    match result {
        Ok(outcome) => {
            write_loss_csv(ckpt.join(LOSS_CSV), &outcome.trace)?;
            Checkpoint::new(outcome.state, cfg.train.seed, &fingerprint).save(&ckpt)?;
            Ok(TrainSummary {
                checkpoint: ckpt,
                rows: outcome.trace.len(),
                first_loss: outcome.losses.first().copied().unwrap_or(f64::NAN),
                final_loss: outcome.losses.last().copied().unwrap_or(f64::NAN),
            })
        }
        Err(TrainError::Diverged { iteration, loss, last_good, trace }) => {
            write_loss_csv(ckpt.join(LOSS_CSV), &trace)?;
            let saved = match last_good {
                Some(state) => {
                    let dir = ckpt.join("last_good");
                    Checkpoint::new(*state, cfg.train.seed, &fingerprint).save(&dir)?;
                    format!("last good state saved to {}", dir.display())
                }
                None => "no finite step to save".to_string(),
            };
            Err(Error::Numeric(format!("loss became {loss} at iteration {iteration}; {saved}")))
        }
        Err(TrainError::Failed(e)) => Err(e),
    }
}

/// Weights from a checkpoint directory (averaged unless `raw`) or a single container file.
pub fn load_weights(cfg: &RunConfig, raw: bool) -> Result<ModelParams<f32>> {
    let ckpt = required(&cfg.paths.checkpoint, "checkpoint", "checkpoint")?;
    let file = if ckpt.is_dir() {
        ckpt.join(if raw { PARAMS_FILE } else { EMA_FILE })
    } else {
        ckpt.to_path_buf()
    };
    Ok(ModelParams::<f32>::load(file, &cfg.model)?.frozen())
}

/// Super-resolve one image.
pub fn upscale_image(lr: &Image, params: &ModelParams<f32>, cfg: &RunConfig) -> Result<Image> {
    let sr = epnet_infer(&lr.to_tensor::<f32>(), params, &cfg.model)?;
    Image::from_tensor(&sr, 0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub image: String,
    pub psnr_db: f64,
    pub ssim: f64,
}

pub fn render_eval_csv(rows: &[EvalRow]) -> String {
    let mut s = String::from("image,psnr_db,ssim\n");
    for r in rows {
        s.push_str(&format!("{},{},{:.6}\n", r.image, format_db(r.psnr_db), r.ssim));
    }
    s
}

fn mean_row(name: &str, rows: &[&EvalRow]) -> EvalRow {
    let n = rows.len() as f64;
    EvalRow {
        image: name.to_string(),
        psnr_db: rows.iter().map(|r| r.psnr_db).sum::<f64>() / n,
        ssim: rows.iter().map(|r| r.ssim).sum::<f64>() / n,
    }
}

/// Downscale each HR image, super-resolve it and score it against the
/// original on luma with a `scale`-pixel shave, next to plain bicubic.
/// Rows come in filename order, followed by the two means.
pub fn cmd_eval(cfg: &RunConfig, raw: bool, out: &mut impl Write) -> Result<Vec<EvalRow>> {
    cfg.model.validate()?;
    let hr_dir = required(&cfg.paths.data_dir, "HR image directory", "data-dir")?;
    let params = load_weights(cfg, raw)?;
    let s = cfg.model.scale;
    let mut model_rows = Vec::new();
    let mut bicubic_rows = Vec::new();
    for path in image_files(hr_dir)? {
        let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
        let hr = load_image(&path)?.mod_crop(s)?;
        let lr = bicubic_resize(&hr, hr.width() / s, hr.height() / s);
        let sr = upscale_image(&lr, &params, cfg)?;
        let base = bicubic_resize(&lr, hr.width(), hr.height());
        let y = rgb_to_y(&hr);
        for (img, rows, label) in [(&sr, &mut model_rows, name.clone()), (&base, &mut bicubic_rows, format!("bicubic:{name}"))] {
            let yi = rgb_to_y(img);
            rows.push(EvalRow { image: label, psnr_db: psnr(&y, &yi, s)?, ssim: ssim(&y, &yi, s)? });
        }
    }
    let mut rows = Vec::new();
    for (m, b) in model_rows.iter().zip(&bicubic_rows) {
        rows.push(m.clone());
        rows.push(b.clone());
    }
    rows.push(mean_row("mean", &model_rows.iter().collect::<Vec<_>>()));
    rows.push(mean_row("bicubic:mean", &bicubic_rows.iter().collect::<Vec<_>>()));
    let csv = render_eval_csv(&rows);
    if let Some(dir) = &cfg.paths.output_dir {
        echo_config(cfg, dir)?;
        let path = dir.join(METRICS_CSV);
        std::fs::write(&path, &csv).map_err(|e| Error::io(&path, e))?;
    }
    write_out(out, &csv)?;
    Ok(rows)
}

/// Write an image exactly `scale×` the input.
pub fn cmd_upscale(cfg: &RunConfig, raw: bool, input: &Path, output: &Path) -> Result<(usize, usize)> {
    cfg.model.validate()?;
    let lr = load_image(input)?;
    let params = load_weights(cfg, raw)?;
    let sr = upscale_image(&lr, &params, cfg)?;
    save_image(output, &sr)?;
    if let Some(dir) = &cfg.paths.output_dir {
        echo_config(cfg, dir)?;
    }
    Ok((sr.width(), sr.height()))
}

pub fn render_table(r: &ComplexityReport) -> String {
    let mut s = format!(
        "complexity at {}x{} output ({}x{} input)\n{:<16} {:>12} {:>18}\n",
        r.out_w, r.out_h, r.in_w, r.in_h, "module", "params", "multi-adds"
    );
    for (name, c) in &r.modules {
        s.push_str(&format!("{name:<16} {:>12} {:>18}\n", c.params, c.multi_adds));
    }
    s.push_str(&format!("{:<16} {:>12} {:>18}\n", "total", r.params, r.multi_adds));
    s
}

pub fn report_json(r: &ComplexityReport) -> serde_json::Value {
    let modules: serde_json::Map<String, serde_json::Value> = r
        .modules
        .iter()
        .map(|(k, c)| (k.clone(), json!({ "params": c.params, "multi_adds": c.multi_adds })))
        .collect();
    json!({
        "output": { "width": r.out_w, "height": r.out_h },
        "input": { "width": r.in_w, "height": r.in_h },
        "params": r.params,
        "multi_adds": r.multi_adds,
        "modules": modules,
    })
}

/// Parameter and multi-add totals with a per-module breakdown, as a table
/// followed by JSON.
pub fn cmd_analyze(cfg: &RunConfig, width: usize, height: usize, out: &mut impl Write) -> Result<ComplexityReport> {
    cfg.model.validate()?;
    let r = report(&cfg.model, height, width);
    let json = serde_json::to_string_pretty(&report_json(&r)).expect("plain values serialise");
    write_out(out, &format!("{}\n{json}\n", render_table(&r)))?;
    if let Some(dir) = &cfg.paths.output_dir {
        echo_config(cfg, dir)?;
    }
    Ok(r)
}
