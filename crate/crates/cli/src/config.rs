//! Pipeline configuration: defaults, then a flat JSON file, then `P3_*`
//! environment variables, then flags.

use anyhow::Context;
use p3_core::detect::DetectConfig;
use p3_core::geometry::Zone;
use p3_core::kpi::{CountFilter, KpiFilters};
use p3_core::model::{BaselineConfig, CnnTrainConfig, SplitPolicy};
use p3_core::render::RenderConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub data: PathBuf,
    pub store: PathBuf,
    pub models: PathBuf,
    pub images: PathBuf,
    pub eval: PathBuf,
    pub kpi: PathBuf,
    pub seed: u64,

    pub zone_lo: f64,
    pub zone_hi: f64,
    pub min_opponents: usize,
    pub boundary_counts_inside: bool,
    pub exclude_set_pieces: bool,

    pub width: usize,
    pub height: usize,
    pub clip_to_visible_area: bool,

    pub input_size: usize,
    pub train_fraction: f64,
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub baseline_epochs: usize,
    pub baseline_lr: f64,

    pub calibration_bins: usize,
    pub histogram_bin_width: f64,

    pub min_minutes: u32,
    /// `None` means the group median.
    pub min_potential: Option<u64>,

    pub addr: String,
    pub cors_origins: Vec<String>,
    pub cache_capacity: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let detect = DetectConfig::default();
        let render = RenderConfig::default();
        let cnn = CnnTrainConfig::default();
        let baseline = BaselineConfig::default();
        Self {
            data: "data".into(),
            store: "store".into(),
            models: "models".into(),
            images: "images".into(),
            eval: "eval".into(),
            kpi: "kpi".into(),
            seed: 7,
            zone_lo: detect.zone.lo,
            zone_hi: detect.zone.hi,
            min_opponents: detect.min_opponents_for_hull,
            boundary_counts_inside: detect.boundary_counts_inside,
            exclude_set_pieces: detect.exclude_set_pieces,
            width: render.width,
            height: render.height,
            clip_to_visible_area: render.clip_to_visible_area,
            input_size: 64,
            train_fraction: SplitPolicy::default().train_fraction,
            epochs: cnn.epochs,
            lr: cnn.lr,
            momentum: cnn.momentum,
            batch_size: cnn.batch_size,
            baseline_epochs: baseline.epochs,
            baseline_lr: baseline.lr,
            calibration_bins: 10,
            histogram_bin_width: 0.05,
            min_minutes: KpiFilters::default().min_minutes,
            min_potential: None,
            addr: "127.0.0.1:8080".into(),
            cors_origins: Vec::new(),
            cache_capacity: 1024,
        }
    }
}

impl PipelineConfig {
    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let bytes =
            std::fs::read(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_slice(&bytes).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn detect(&self) -> DetectConfig {
        DetectConfig {
            min_opponents_for_hull: self.min_opponents,
            boundary_counts_inside: self.boundary_counts_inside,
            zone: Zone {
                lo: self.zone_lo,
                hi: self.zone_hi,
            },
            exclude_set_pieces: self.exclude_set_pieces,
        }
    }

    pub fn render(&self) -> RenderConfig {
        RenderConfig {
            width: self.width,
            height: self.height,
            clip_to_visible_area: self.clip_to_visible_area,
            ..RenderConfig::default()
        }
    }

    pub fn split(&self) -> SplitPolicy {
        SplitPolicy {
            train_fraction: self.train_fraction,
        }
    }

    pub fn cnn(&self) -> CnnTrainConfig {
        CnnTrainConfig {
            lr: self.lr,
            momentum: self.momentum,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            stop_below: None,
        }
    }

    pub fn baseline(&self) -> BaselineConfig {
        BaselineConfig {
            lr: self.baseline_lr,
            epochs: self.baseline_epochs,
            seed: self.seed,
        }
    }

    pub fn kpi_filters(&self) -> KpiFilters {
        KpiFilters {
            min_minutes: self.min_minutes,
            count_filter: match self.min_potential {
                Some(n) => CountFilter::Fixed(n),
                None => CountFilter::GroupMedian,
            },
            ..KpiFilters::default()
        }
    }

    pub fn model_path(&self, method: &str) -> PathBuf {
        self.models.join(format!("{method}.p3m"))
    }

    pub fn service(&self, method: &str) -> p3_service::ServiceConfig {
        p3_service::ServiceConfig {
            store_dir: self.store.clone(),
            images_dir: self.images.clone(),
            eval_dir: self.eval.clone(),
            kpi_dir: self.kpi.clone(),
            model_path: self.model_path(method),
            detect: self.detect(),
            render: self.render(),
            cors_origins: self.cors_origins.clone(),
            cache_capacity: self.cache_capacity,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_overrides_defaults_and_rejects_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"seed": 11, "epochs": 40}"#).unwrap();
        let c = PipelineConfig::from_file(&p).unwrap();
        assert_eq!(
            (c.seed, c.epochs, c.lr),
            (11, 40, PipelineConfig::default().lr)
        );
        std::fs::write(&p, r#"{"sed": 11}"#).unwrap();
        assert!(PipelineConfig::from_file(&p).is_err());
    }
}
