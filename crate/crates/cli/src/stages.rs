//! One function per pipeline stage. Each checks its inputs exist, hashes
//! them, writes its outputs and then a stage manifest.

use crate::config::PipelineConfig;
use crate::manifest::{hash_files, write_manifest, StageManifest};
use crate::UsageError;
use anyhow::{bail, Context};
use p3_core::detect::{self, P3Moment};
use p3_core::kpi::{self, Group, Side};
use p3_core::metrics::{
    calibration, confusion, roc_curve, score_distribution, select_threshold, CalibrationBin,
    ConfusionReport, RocPoint,
};
use p3_core::model::{
    build_cnn, extract_features, load_model, save_model, train_baseline, train_cnn, Architecture,
    InputShape, SavedModel, Split, TrainReport,
};
use p3_core::render::{decode_png, encode_png, render_moment, ImageIndexEntry, RasterImage};
use p3_core::scoring::{score_with_image, ScoreRecord, SplitSide};
use p3_core::store::{self, read_file, sha256_hex, write_file, write_json, write_jsonl};
use p3_core::synth::{self, SynthConfig};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Method {
    Cnn,
    Baseline,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Cnn => "cnn",
            Method::Baseline => "baseline",
        }
    }
}

struct Stage<'a> {
    name: String,
    cfg: &'a PipelineConfig,
    started: Instant,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl<'a> Stage<'a> {
    fn start(name: impl Into<String>, cfg: &'a PipelineConfig) -> Self {
        let name = name.into();
        log::info!("{name}: starting");
        Self {
            name,
            cfg,
            started: Instant::now(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    fn finish(self, dir: &Path) -> anyhow::Result<()> {
        let m = StageManifest {
            stage: self.name.clone(),
            seed: self.cfg.seed,
            config: self.cfg.clone(),
            inputs: hash_files(&self.inputs)?,
            outputs: hash_files(&self.outputs)?,
            duration_ms: self.started.elapsed().as_millis() as u64,
        };
        write_manifest(dir, &m)?;
        log::info!(
            "{}: wrote {} files in {} ms",
            self.name,
            self.outputs.len(),
            m.duration_ms
        );
        Ok(())
    }
}

fn require(path: &Path, hint: &str) -> anyhow::Result<()> {
    if !path.exists() {
        bail!("{} not found; {hint}", path.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------

pub fn ingest(cfg: &PipelineConfig) -> anyhow::Result<()> {
    let mut stage = Stage::start("ingest", cfg);
    require(&cfg.data, "pass `--data` or run `p3 synth`")?;
    let matches = store::ingest_dir(&cfg.data)?;
    for sub in ["events", "three-sixty", "lineups"] {
        let dir = cfg.data.join(sub);
        if dir.is_dir() {
            for m in &matches {
                let p = dir.join(format!("{}.json", m.match_id));
                if p.exists() {
                    stage.inputs.push(p);
                }
            }
        }
    }
    let skipped: usize = matches.iter().map(|m| m.counts.skipped_records).sum();
    if skipped > 0 {
        log::warn!("ingest: {skipped} malformed records skipped");
    }
    stage.outputs = store::write_store(&cfg.store, &matches)?;
    log::info!("ingest: {} matches", matches.len());
    stage.finish(&cfg.store)
}

pub fn detect(cfg: &PipelineConfig) -> anyhow::Result<()> {
    let mut stage = Stage::start("detect", cfg);
    let dc = cfg.detect();
    dc.validate().map_err(|e| UsageError(e.to_string()))?;
    require(&store::manifest_path(&cfg.store), "run `p3 ingest` first")?;
    stage.inputs = store::store_files(&cfg.store)?;
    let (moments, report) = detect::scan_corpus(&cfg.store, &dc)?;
    let mp = detect::moments_path(&cfg.store);
    write_jsonl(&mp, &moments)?;
    let rp = detect::report_path(&cfg.store);
    write_json(&rp, &report)?;
    stage.outputs = vec![mp, rp];
    log::info!(
        "detect: {} moments from {} snapshots ({} penetrative)",
        report.moments,
        report.snapshots,
        report.positives
    );
    stage.finish(&cfg.store)
}

fn load_moments(cfg: &PipelineConfig) -> anyhow::Result<(PathBuf, Vec<P3Moment>)> {
    let mp = detect::moments_path(&cfg.store);
    require(&mp, "run `p3 detect` first")?;
    Ok((mp, detect::read_moments(&cfg.store)?))
}

pub fn image_path(cfg: &PipelineConfig, moment_id: &str) -> PathBuf {
    cfg.images.join(format!("{moment_id}.png"))
}

pub fn render(cfg: &PipelineConfig) -> anyhow::Result<()> {
    let mut stage = Stage::start("render", cfg);
    let rc = cfg.render();
    rc.validate().map_err(|e| UsageError(e.to_string()))?;
    let (mp, moments) = load_moments(cfg)?;
    stage.inputs.push(mp);
    let mut index = Vec::with_capacity(moments.len());
    for m in &moments {
        let png = encode_png(&render_moment(m, &rc));
        let p = image_path(cfg, &m.moment_id);
        write_file(&p, &png)?;
        index.push(ImageIndexEntry {
            moment_id: m.moment_id.clone(),
            match_id: m.match_id.clone(),
            label: m.label,
            file: format!("{}.png", m.moment_id),
            sha256: sha256_hex(&png),
        });
        stage.outputs.push(p);
    }
    let ip = cfg.images.join("index.jsonl");
    write_jsonl(&ip, &index)?;
    stage.outputs.push(ip);
    log::info!("render: {} images", moments.len());
    stage.finish(&cfg.images)
}

fn load_image(cfg: &PipelineConfig, moment_id: &str) -> anyhow::Result<RasterImage> {
    let p = image_path(cfg, moment_id);
    require(&p, "run `p3 render` first")?;
    decode_png(&read_file(&p)?).with_context(|| format!("decoding {}", p.display()))
}

fn split_for(cfg: &PipelineConfig, moments: &[P3Moment]) -> anyhow::Result<Split> {
    if !(0.0..=1.0).contains(&cfg.train_fraction) {
        return Err(UsageError(format!(
            "train_fraction {} outside [0, 1]",
            cfg.train_fraction
        ))
        .into());
    }
    let split = cfg
        .split()
        .split(moments.iter().map(|m| m.match_id.as_str()))?;
    if split.val.is_empty() {
        bail!("need at least two matches to hold out a validation split");
    }
    Ok(split)
}

pub fn train(cfg: &PipelineConfig, method: Method) -> anyhow::Result<()> {
    let mut stage = Stage::start(format!("train-{}", method.as_str()), cfg);
    let (mp, moments) = load_moments(cfg)?;
    stage.inputs.push(mp);
    let split = split_for(cfg, &moments)?;
    let (train_m, val_m): (Vec<&P3Moment>, Vec<&P3Moment>) = moments
        .iter()
        .partition(|m| split.train.contains(&m.match_id));
    let (model, report): (SavedModel, TrainReport) = match method {
        Method::Baseline => {
            let feats = |ms: &[&P3Moment]| -> Vec<_> {
                ms.iter()
                    .map(|m| (extract_features(m), m.label.is_positive()))
                    .collect()
            };
            let (m, r) = train_baseline(&feats(&train_m), &feats(&val_m), &cfg.baseline())?;
            (SavedModel::Baseline(m), r)
        }
        Method::Cnn => {
            let shape = InputShape {
                channels: 3,
                height: cfg.input_size,
                width: cfg.input_size,
            };
            let tensors = |ms: &[&P3Moment],
                           inputs: &mut Vec<PathBuf>|
             -> anyhow::Result<Vec<(Vec<f64>, bool)>> {
                ms.iter()
                    .map(|m| {
                        inputs.push(image_path(cfg, &m.moment_id));
                        let img = load_image(cfg, &m.moment_id)?;
                        Ok((
                            img.to_tensor(shape.width, shape.height),
                            m.label.is_positive(),
                        ))
                    })
                    .collect()
            };
            let tr = tensors(&train_m, &mut stage.inputs)?;
            let va = tensors(&val_m, &mut stage.inputs)?;
            let tr_ref: Vec<(&[f64], bool)> = tr.iter().map(|(x, y)| (x.as_slice(), *y)).collect();
            let va_ref: Vec<(&[f64], bool)> = va.iter().map(|(x, y)| (x.as_slice(), *y)).collect();
            let mut model = build_cnn(Architecture::default_for(shape), cfg.seed)?;
            let report = train_cnn(&mut model, &tr_ref, &va_ref, &cfg.cnn())?;
            (SavedModel::Cnn(model), report)
        }
    };
    let model_path = cfg.model_path(method.as_str());
    save_model(&model_path, &model)?;
    let report_path = cfg.models.join(format!("{}.report.json", method.as_str()));
    write_json(&report_path, &report)?;
    let split_path = cfg.models.join("split.json");
    write_json(&split_path, &split)?;
    stage.outputs = vec![model_path, report_path, split_path];
    log::info!(
        "train: {} on {} / {} moments, val AUC {:?}",
        method.as_str(),
        train_m.len(),
        val_m.len(),
        report.val_auc
    );
    stage.finish(&cfg.models)
}

#[derive(Serialize)]
struct RocArtifact<'a> {
    auc: f64,
    selected_threshold: f64,
    points: &'a [RocPoint],
}

#[derive(Serialize)]
struct CalibrationArtifact {
    n: usize,
    bins: Vec<CalibrationBin>,
}

#[derive(Serialize)]
struct EvalSummary {
    method: &'static str,
    model_sha256: String,
    n_train: usize,
    n_val: usize,
    val_auc: f64,
    selected_threshold: f64,
    val_positive_share: f64,
    val_median_probability: f64,
}

pub fn eval(cfg: &PipelineConfig, method: Method) -> anyhow::Result<()> {
    let mut stage = Stage::start(format!("eval-{}", method.as_str()), cfg);
    let model_path = cfg.model_path(method.as_str());
    require(
        &model_path,
        &format!(
            "no {} model; run `p3 train --method {}` first",
            method.as_str(),
            method.as_str()
        ),
    )?;
    let model = load_model(&model_path)?;
    let (mp, moments) = load_moments(cfg)?;
    stage.inputs.extend([model_path.clone(), mp]);
    // Score against the split the model was trained on.
    let split_path = cfg.models.join("split.json");
    let split: Split = if split_path.exists() {
        stage.inputs.push(split_path.clone());
        store::read_json(&split_path)?
    } else {
        split_for(cfg, &moments)?
    };

    let mut records = Vec::with_capacity(moments.len());
    for m in &moments {
        let probability = match &model {
            SavedModel::Cnn(_) => {
                stage.inputs.push(image_path(cfg, &m.moment_id));
                score_with_image(&model, m, &load_image(cfg, &m.moment_id)?)?
            }
            SavedModel::Baseline(_) => {
                score_with_image(&model, m, &RasterImage::filled(1, 1, [0, 0, 0]))?
            }
        };
        records.push(ScoreRecord {
            moment_id: m.moment_id.clone(),
            match_id: m.match_id.clone(),
            label: m.label,
            probability,
            split: if split.train.contains(&m.match_id) {
                SplitSide::Train
            } else {
                SplitSide::Val
            },
        });
    }
    let val: Vec<&ScoreRecord> = records
        .iter()
        .filter(|r| r.split == SplitSide::Val)
        .collect();
    let scores: Vec<f64> = val.iter().map(|r| r.probability).collect();
    let labels: Vec<bool> = val.iter().map(|r| r.label.is_positive()).collect();
    let curve = roc_curve(&scores, &labels).context("validation split")?;
    let threshold = select_threshold(&curve);
    let cm = confusion(&scores, &labels, threshold)?;
    let bins = calibration(
        &scores,
        &labels,
        cfg.calibration_bins.min(scores.len()).max(1),
    )?;
    let hist = score_distribution(&scores, cfg.histogram_bin_width)?;

    std::fs::create_dir_all(&cfg.eval)?;
    let mut out = |name: &str, value: &dyn erased::Json| -> anyhow::Result<()> {
        let p = cfg.eval.join(name);
        value.write(&p)?;
        stage.outputs.push(p);
        Ok(())
    };
    let sp = cfg.eval.join("scores.jsonl");
    write_jsonl(&sp, &records)?;
    out(
        "roc.json",
        &RocArtifact {
            auc: curve.auc,
            selected_threshold: threshold,
            points: &curve.points,
        },
    )?;
    out("confusion.json", &ConfusionReport::new(&cm, threshold))?;
    out(
        "calibration.json",
        &CalibrationArtifact {
            n: scores.len(),
            bins,
        },
    )?;
    out("histogram.json", &hist)?;
    out(
        "summary.json",
        &EvalSummary {
            method: method.as_str(),
            model_sha256: store::hash_file(&model_path)?,
            n_train: records.len() - val.len(),
            n_val: val.len(),
            val_auc: curve.auc,
            selected_threshold: threshold,
            val_positive_share: cm.positive_share().unwrap_or(0.0),
            val_median_probability: hist.median,
        },
    )?;
    stage.outputs.push(sp);
    log::info!(
        "eval: validation AUC {:.4} at threshold {threshold:.4}",
        curve.auc
    );
    stage.finish(&cfg.eval)
}

/// Lets `eval` write heterogeneous artifacts through one closure.
mod erased {
    use std::path::Path;

    pub trait Json {
        fn write(&self, path: &Path) -> anyhow::Result<()>;
    }

    impl<T: serde::Serialize> Json for T {
        fn write(&self, path: &Path) -> anyhow::Result<()> {
            p3_core::store::write_json(path, self)?;
            Ok(())
        }
    }
}

pub fn kpi(cfg: &PipelineConfig, groups: &[Group], teams: bool) -> anyhow::Result<()> {
    let mut stage = Stage::start("kpi", cfg);
    let (mp, moments) = load_moments(cfg)?;
    stage.inputs.push(mp);
    stage.inputs.extend(
        store::store_files(&cfg.store)?
            .into_iter()
            .filter(|p| p.to_string_lossy().ends_with(".roster.json")),
    );
    let rosters = store::read_rosters(&cfg.store)?;
    if rosters.is_empty() {
        log::warn!("kpi: no lineups in the store; player tables will be empty");
    }
    let filters = cfg.kpi_filters();
    let (groups, teams) = if groups.is_empty() && !teams {
        (Group::ALL.to_vec(), true)
    } else {
        (groups.to_vec(), teams)
    };
    let minutes = kpi::minutes_played(&rosters);
    let directory = kpi::player_directory(&rosters);
    for g in groups {
        let rows = kpi::player_kpi(&moments, &minutes, &directory, g, &filters);
        let jp = cfg.kpi.join(format!("players_{g}.json"));
        write_json(&jp, &rows)?;
        let cp = cfg.kpi.join(format!("players_{g}.csv"));
        write_file(&cp, &kpi::players_csv(&rows)?)?;
        stage.outputs.extend([jp, cp]);
        log::info!("kpi: {} {g} rows", rows.len());
    }
    if teams {
        let fixtures = kpi::fixtures_from_rosters(&rosters);
        let tables = [
            (Side::Attack, kpi::team_attack_kpi(&moments)),
            (Side::Defense, kpi::team_defense_kpi(&moments, &fixtures)),
        ];
        for (side, rows) in tables {
            let jp = cfg.kpi.join(format!("teams_{}.json", side.as_str()));
            write_json(&jp, &rows)?;
            let cp = cfg.kpi.join(format!("teams_{}.csv", side.as_str()));
            write_file(&cp, &kpi::teams_csv(&rows, side)?)?;
            stage.outputs.extend([jp, cp]);
        }
    }
    stage.finish(&cfg.kpi)
}

pub fn synth(cfg: &PipelineConfig, n: usize, matches: Option<usize>) -> anyhow::Result<()> {
    let mut stage = Stage::start("synth", cfg);
    let mut sc = SynthConfig::for_moments(n, cfg.seed);
    if let Some(m) = matches {
        sc.matches = m.max(2);
    }
    let corpus = synth::generate(&sc);
    stage.outputs = synth::write_raw(&corpus, &cfg.data)?;
    log::info!(
        "synth: {} matches, {} qualifying moments",
        sc.matches,
        sc.matches * sc.moments_per_match
    );
    stage.finish(&cfg.data)?;
    ingest(cfg)
}

pub fn serve(cfg: &PipelineConfig, method: Method) -> anyhow::Result<()> {
    let sc = cfg.service(method.as_str());
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(p3_service::serve(sc, &cfg.addr))?;
    Ok(())
}
