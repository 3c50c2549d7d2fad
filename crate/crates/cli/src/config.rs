//! Run configuration: a TOML file whose values command-line flags override.

use std::path::Path;

use anyhow::{bail, Context};
use quadtext::targets::LevelSpec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub shrink_r: f64,
    pub iou_refine: f64,
    pub pnms_thresh: f64,
    pub score_thresh: f64,
    pub eval_taus: Vec<f64>,
    pub kernel: KernelSize,
    pub levels: Vec<LevelEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSize {
    pub h: usize,
    pub w: usize,
}

/// One pyramid level. The stride is `2^level`; `hi` may be `inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelEntry {
    pub level: u8,
    pub lo: f64,
    pub hi: f64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            shrink_r: 0.25,
            iou_refine: 0.5,
            pnms_thresh: 0.3,
            score_thresh: 0.5,
            eval_taus: vec![0.5, 0.75],
            kernel: KernelSize { h: 3, w: 3 },
            levels: LevelSpec::pyramid().iter().map(|l| LevelEntry { level: l.level, lo: l.lo, hi: l.hi }).collect(),
        }
    }
}

fn unit(name: &str, v: f64) -> anyhow::Result<()> {
    if !(0.0..=1.0).contains(&v) {
        bail!("{name} = {v} is outside [0, 1]");
    }
    Ok(())
}

impl Config {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Config = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate().with_context(|| format!("in {}", path.display()))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if !(0.0..0.5).contains(&self.shrink_r) {
            bail!("shrink_r = {} is outside [0, 0.5)", self.shrink_r);
        }
        unit("iou_refine", self.iou_refine)?;
        unit("pnms_thresh", self.pnms_thresh)?;
        unit("score_thresh", self.score_thresh)?;
        if self.eval_taus.is_empty() {
            bail!("eval_taus is empty");
        }
        for &t in &self.eval_taus {
            unit("eval_taus entry", t)?;
        }
        if self.kernel.h < 2 || self.kernel.w < 2 {
            bail!("kernel {}x{} needs both sides >= 2", self.kernel.h, self.kernel.w);
        }
        if self.levels.is_empty() {
            bail!("levels table is empty");
        }
        self.level_specs()?;
        Ok(())
    }

    pub fn level_specs(&self) -> anyhow::Result<Vec<LevelSpec>> {
        self.levels
            .iter()
            .map(|l| LevelSpec::new(l.level, l.lo, l.hi).map_err(anyhow::Error::from))
            .collect()
    }
}
