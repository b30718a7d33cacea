//! Closed-form parameter and multiply-accumulate counts.
//!
//! Counts are derived from layer arithmetic only, independently of parameter
//! instantiation and of the forward kernels. One multiply-accumulate is
//! charged per convolution output element per kernel tap
//! (`H'·W'·Cout·Cin·kh·kw`), per matrix-product term in `QKᵀ` and `attn·V`,
//! and per MLP term (the MLP is a pair of 1×1 convolutions).

use indexmap::IndexMap;

use super::blocks::esab_branch_extent;
use super::EPNetConfig;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ModuleCost {
    pub params: u64,
    pub multi_adds: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityReport {
    pub params: u64,
    pub multi_adds: u64,
    pub out_h: usize,
    pub out_w: usize,
    /// Input extent the network runs at (`out / scale`, rounded down).
    pub in_h: usize,
    pub in_w: usize,
    pub modules: IndexMap<String, ModuleCost>,
}

#[derive(Default)]
struct Ledger {
    modules: IndexMap<String, ModuleCost>,
}

impl Ledger {
    fn entry(&mut self, module: &str) -> &mut ModuleCost {
        self.modules.entry(module.to_string()).or_default()
    }

    /// Convolution with bias at output extent `oh×ow`.
    fn conv(&mut self, module: &str, cin: usize, cout: usize, k: usize, oh: usize, ow: usize, count_params: bool) {
        let e = self.entry(module);
        if count_params {
            e.params += (cin * cout * k * k + cout) as u64;
        }
        e.multi_adds += (oh * ow * cout * cin * k * k) as u64;
    }

    /// Three-tap channel gate on a `c`-channel descriptor.
    fn gate(&mut self, module: &str, c: usize, count_params: bool) {
        let e = self.entry(module);
        if count_params {
            e.params += 3;
        }
        e.multi_adds += 3 * c as u64;
    }

    fn params(&mut self, module: &str, n: usize, count: bool) {
        if count {
            self.entry(module).params += n as u64;
        }
    }

    fn macs(&mut self, module: &str, n: usize) {
        self.entry(module).multi_adds += n as u64;
    }
}

fn walk(cfg: &EPNetConfig, h: usize, w: usize) -> Ledger {
    let c = cfg.base_channels;
    let mut led = Ledger::default();
    led.conv("shallow", 3, c, 3, h, w, true);

    for i in 0..cfg.n_pfem {
        let owned = !cfg.share_pfem_weights || i == 0;
        if cfg.use_lfeb {
            led.conv("pfem.lfeb", c, c, 3, h, w, owned);
            led.conv("pfem.lfeb", c, c, 3, h, w, owned);
            led.gate("pfem.lfeb", c, owned);
        }
        let ws = cfg.window_size;
        let windows = h.div_ceil(ws) * w.div_ceil(ws);
        let t = ws * ws;
        let hid = cfg.mlp_hidden();
        led.params("pfem.swin", 4 * c, owned);
        led.conv("pfem.swin", c, 3 * c, 1, h, w, owned);
        // QKᵀ and attn·V, summed over heads: 2 · windows · T² · C
        led.macs("pfem.swin", 2 * windows * t * t * c);
        led.conv("pfem.swin", c, c, 1, h, w, owned);
        led.conv("pfem.swin", c, hid, 1, h, w, owned);
        led.conv("pfem.swin", hid, c, 1, h, w, owned);
        if cfg.use_esab {
            let r = cfg.esab_channels();
            let (dh, dw) = (h.div_ceil(2), w.div_ceil(2));
            let (bh, bw) = esab_branch_extent(h, w);
            led.conv("pfem.esab", c, r, 1, h, w, owned);
            led.conv("pfem.esab", r, r, 3, dh, dw, owned);
            led.conv("pfem.esab", r, r, 3, bh, bw, owned);
            led.conv("pfem.esab", r, r, 3, bh, bw, owned);
            led.conv("pfem.esab", r, c, 1, h, w, owned);
        }
    }

    if cfg.use_espm {
        let mut sizes = vec![(h, w)];
        for l in 1..cfg.pyramid_levels {
            let (ph, pw) = sizes[l - 1];
            let next = (ph.div_ceil(2), pw.div_ceil(2));
            led.conv("espm", c, c, 3, next.0, next.1, true);
            sizes.push(next);
        }
        let c1 = cfg.split_channels();
        for &(lh, lw) in &sizes {
            led.gate("espm", c1, true);
            led.gate("espm", c - c1, true);
            led.conv("espm", 2 * c, c, 1, lh, lw, true);
        }
        for &(lh, lw) in &sizes[1..] {
            led.conv("espm", c, c, 1, lh, lw, true);
        }
        led.conv("espm", c, c, 3, h, w, true);
    }

    led.conv("reconstruction", c, cfg.head_channels(), 3, h, w, true);
    led
}

/// Exact number of parameter elements for `cfg`.
pub fn count_params(cfg: &EPNetConfig) -> u64 {
    walk(cfg, 1, 1).modules.values().map(|m| m.params).sum()
}

/// Multiply-accumulates of one forward pass producing an `out_h×out_w` image.
pub fn count_multi_adds(cfg: &EPNetConfig, out_h: usize, out_w: usize) -> u64 {
    report(cfg, out_h, out_w).multi_adds
}

/// Multiply-accumulates at a given low-resolution input extent.
pub fn count_multi_adds_at_input(cfg: &EPNetConfig, in_h: usize, in_w: usize) -> u64 {
    walk(cfg, in_h, in_w).modules.values().map(|m| m.multi_adds).sum()
}

pub fn report(cfg: &EPNetConfig, out_h: usize, out_w: usize) -> ComplexityReport {
    let (in_h, in_w) = (out_h / cfg.scale, out_w / cfg.scale);
    let led = walk(cfg, in_h, in_w);
    ComplexityReport {
        params: led.modules.values().map(|m| m.params).sum(),
        multi_adds: led.modules.values().map(|m| m.multi_adds).sum(),
        out_h,
        out_w,
        in_h,
        in_w,
        modules: led.modules,
    }
}
