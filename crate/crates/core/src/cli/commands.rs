//! The subcommands as library functions. Each writes its outputs through
//! temp files and atomic renames and records the config hash in `run.json`.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::augment::{augment_strategy, derive_seed, Sample, Strategy};
use crate::channels::{
    augment_labeled, boxes_from_labels, compute_bundle, fuse_forward, init_channel, instantiate,
    network_input, save_boxes, train_channel, ChannelBundle, ChannelKind, EpochLoss, Example,
    LabeledImage, ProbMap,
};
use crate::diffnet::{seeded_rng, NetworkParams};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::labelops::{edge_labels, fill_boxes, InstanceMap};
use crate::metrics::{
    evaluate_dataset, rank_aggregate, Column, EvalItem, EvalOptions, MethodScores, Metric,
    MetricsReport, RankTable, ScoreGrid,
};
use crate::netpbm;

use super::config::RunConfig;
use super::gradcheck::{gradcheck_suite, GradCheckCase};
use super::manifest::{LoadedRecord, Manifest, Record};
use super::synth::{generate, SynthConfig};

/// Environment variable holding the worker thread count (0 or unset = all cores).
pub const THREADS_ENV: &str = "GLANDSEG_THREADS";

/// Sizes the global worker pool from [`THREADS_ENV`]. Returns the count used.
pub fn configure_threads() -> Result<usize> {
    let n = match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::config(format!("{THREADS_ENV} must be a non-negative integer, got `{v}`")))?,
        _ => 0,
    };
    // a pool that already exists (e.g. in tests) is kept as is
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(rayon::current_num_threads())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fsutil::write_atomic(path, &bytes)
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut bytes = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut bytes, r)?;
        bytes.push(b'\n');
    }
    fsutil::write_atomic(path, &bytes)
}

fn write_run(out_dir: &Path, command: &str, cfg: &RunConfig, details: serde_json::Value) -> Result<()> {
    write_json(
        &out_dir.join("run.json"),
        &json!({ "command": command, "config_hash": cfg.hash(), "details": details }),
    )
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Summary {
    pub written: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

/// Boxes of a record: its box file if present, else jittered tight boxes
/// derived from the labels with a per-record seed.
fn record_boxes(rec: &LoadedRecord, cfg: &RunConfig) -> Vec<crate::labelops::BBox> {
    rec.boxes.clone().unwrap_or_else(|| {
        let mut rng = seeded_rng(derive_seed(cfg.seed, &rec.id));
        boxes_from_labels(&rec.labels, cfg.box_jitter, &mut rng)
    })
}

/// Edge labels (`<id>.edge.pgm`) and box coverage (`<id>.coverage.pgm`).
pub fn cmd_prep(cfg: &RunConfig, manifest: &Manifest, out_dir: &Path) -> Result<Summary> {
    ensure_dir(out_dir)?;
    let results = manifest
        .records
        .par_iter()
        .map(|r| -> Result<(Vec<PathBuf>, Option<String>)> {
            let rec = manifest.load_record(r)?;
            let edges = edge_labels(&rec.labels, cfg.pipeline.edge_radius)?;
            let edge_path = out_dir.join(format!("{}.edge.pgm", rec.id));
            netpbm::save_mask(&edge_path, &edges)?;
            let mut written = vec![edge_path];
            let warning = match &rec.boxes {
                Some(b) => {
                    let cov = fill_boxes(b, rec.labels.width(), rec.labels.height())
                        .map_err(|e| e.context(format_args!("record `{}`", rec.id)))?;
                    let p = out_dir.join(format!("{}.coverage.pgm", rec.id));
                    netpbm::save_coverage(&p, &cov)?;
                    written.push(p);
                    None
                }
                None => Some(format!("record `{}` has no boxes; coverage skipped", rec.id)),
            };
            Ok((written, warning))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut s = Summary::default();
    for (w, warn) in results {
        s.written.extend(w);
        s.warnings.extend(warn);
    }
    for w in &s.warnings {
        log::warn!("{w}");
    }
    write_run(out_dir, "prep", cfg, json!({ "edge_radius": cfg.pipeline.edge_radius, "warnings": s.warnings }))?;
    Ok(s)
}

/// One line of `transforms.jsonl`.
#[derive(Debug, Clone, Serialize, serde::Deserialize, PartialEq)]
pub struct TransformRecord {
    pub id: String,
    pub source: String,
    pub strategy: Strategy,
    pub seed: u64,
    pub transforms: Vec<crate::augment::TransformSpec>,
}

/// Augmented corpus: `<id>_<k>.ppm/.pgm/.boxes.json`, `transforms.jsonl`
/// and a `manifest.json` for the corpus.
pub fn cmd_augment(
    cfg: &RunConfig,
    manifest: &Manifest,
    strategy: Strategy,
    out_dir: &Path,
) -> Result<Summary> {
    ensure_dir(out_dir)?;
    let per_source = manifest
        .records
        .par_iter()
        .map(|r| -> Result<Vec<(Record, TransformRecord)>> {
            let rec = manifest.load_record(r)?;
            let sample = Sample::new(rec.id.clone(), rec.image, rec.labels)?;
            let variants = augment_strategy(&sample, strategy, cfg.seed, &cfg.augment)?;
            let mut out = Vec::with_capacity(variants.len());
            for (k, v) in variants.into_iter().enumerate() {
                let id = format!("{}_{k}", rec.id);
                let image = PathBuf::from(format!("{id}.ppm"));
                let labels = PathBuf::from(format!("{id}.pgm"));
                let boxes = PathBuf::from(format!("{id}.boxes.json"));
                netpbm::save_rgb(&out_dir.join(&image), &v.image)?;
                netpbm::save_instance_map(&out_dir.join(&labels), &v.labels)?;
                let tight: Vec<_> = v.labels.bounding_boxes().into_iter().map(|(_, b)| b).collect();
                save_boxes(&out_dir.join(&boxes), &tight)?;
                out.push((
                    Record {
                        id: id.clone(),
                        image,
                        labels,
                        boxes: Some(boxes),
                    },
                    TransformRecord {
                        id,
                        source: rec.id.clone(),
                        strategy,
                        seed: cfg.seed,
                        transforms: v.transforms,
                    },
                ));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut corpus = Manifest::new(manifest.split.clone(), out_dir);
    let mut log = Vec::new();
    for (rec, tr) in per_source.into_iter().flatten() {
        corpus.records.push(rec);
        log.push(tr);
    }
    write_jsonl(&out_dir.join("transforms.jsonl"), &log)?;
    corpus.save(&out_dir.join("manifest.json"))?;
    write_run(out_dir, "augment", cfg, json!({ "strategy": strategy, "samples": log.len() }))?;
    Ok(Summary {
        written: corpus.records.iter().map(|r| out_dir.join(&r.image)).collect(),
        warnings: Vec::new(),
    })
}

pub fn weights_path(model_dir: &Path, kind: ChannelKind) -> PathBuf {
    model_dir.join(format!("{kind}.gmcn"))
}

fn load_weights(model_dir: &Path, kind: ChannelKind) -> Result<NetworkParams> {
    let p = weights_path(model_dir, kind);
    if !p.exists() {
        return Err(Error::data(format!(
            "missing {kind} weights {}; run `train --channel {kind}` first",
            p.display()
        )));
    }
    NetworkParams::load(&p)
}

fn channel_seed(cfg: &RunConfig, kind: ChannelKind) -> u64 {
    cfg.seed.wrapping_add(match kind {
        ChannelKind::Seg => 0,
        ChannelKind::Edge => 1,
        ChannelKind::Fusion => 2,
    })
}

#[derive(Serialize)]
struct LossLine<'a> {
    #[serde(flatten)]
    loss: &'a EpochLoss,
    config_hash: &'a str,
}

/// Trains one channel, or all three in order when `channel` is `None`.
/// Fusion reads the seg and edge weights already in `model_dir`.
pub fn cmd_train(
    cfg: &RunConfig,
    manifest: &Manifest,
    model_dir: &Path,
    channel: Option<ChannelKind>,
) -> Result<Summary> {
    ensure_dir(model_dir)?;
    let records = manifest.load_all()?;
    if records.is_empty() {
        return Err(Error::data("training manifest has no records"));
    }
    let mut items: Vec<LabeledImage> = records
        .iter()
        .map(|r| LabeledImage {
            id: r.id.clone(),
            image: r.image.clone(),
            labels: r.labels.clone(),
            boxes: record_boxes(r, cfg),
        })
        .collect();
    if let Some(s) = cfg.train_augment {
        items = augment_labeled(&items, s, cfg.seed, &cfg.augment)?;
    }
    let kinds = match channel {
        Some(k) => vec![k],
        None => vec![ChannelKind::Seg, ChannelKind::Edge, ChannelKind::Fusion],
    };
    let hash = cfg.hash();
    let mut summary = Summary::default();
    for kind in kinds {
        let examples: Vec<Example> = if kind == ChannelKind::Fusion {
            let seg = load_weights(model_dir, ChannelKind::Seg)?;
            let edge = load_weights(model_dir, ChannelKind::Edge)?;
            items
                .par_iter()
                .map(|it| {
                    let b = compute_bundle(&seg, &edge, &cfg.pipeline, &it.image, &it.boxes)?;
                    Ok(Example {
                        id: it.id.clone(),
                        input: b.to_tensor(),
                        labels: it.labels.clone(),
                    })
                })
                .collect::<Result<_>>()?
        } else {
            items
                .iter()
                .map(|it| Example {
                    id: it.id.clone(),
                    input: network_input(&it.image),
                    labels: it.labels.clone(),
                })
                .collect()
        };
        log::info!("training {kind} on {} examples", examples.len());
        let trained = train_channel(&examples, &cfg.pipeline, kind, channel_seed(cfg, kind))?;
        let wp = weights_path(model_dir, kind);
        trained.params.save(&wp)?;
        let lp = model_dir.join(format!("loss_{kind}.jsonl"));
        let lines: Vec<LossLine> = trained
            .curve
            .iter()
            .map(|l| LossLine {
                loss: l,
                config_hash: &hash,
            })
            .collect();
        write_jsonl(&lp, &lines)?;
        summary.written.extend([wp, lp]);
    }
    fsutil::write_atomic(&model_dir.join("config.txt"), cfg.to_text().as_bytes())?;
    write_run(model_dir, "train", cfg, json!({ "examples": items.len() }))?;
    Ok(summary)
}

/// Initial weights of a channel, as written by a zero-epoch run.
pub fn initial_weights(cfg: &RunConfig, kind: ChannelKind) -> Result<NetworkParams> {
    init_channel(kind, &cfg.pipeline, channel_seed(cfg, kind))
}

/// Writes `<id>.pgm` instance maps plus channel caches (`<id>.seg.f64`,
/// `<id>.edge.f64`, `<id>.coverage.pgm`, `<id>.fused.f64`). With
/// `seg_only`, instances come from the segmentation channel alone.
pub fn cmd_infer(
    cfg: &RunConfig,
    manifest: &Manifest,
    model_dir: &Path,
    out_dir: &Path,
    seg_only: bool,
) -> Result<Summary> {
    ensure_dir(out_dir)?;
    let seg = load_weights(model_dir, ChannelKind::Seg)?;
    let edge = load_weights(model_dir, ChannelKind::Edge)?;
    let fusion = if seg_only {
        None
    } else {
        Some(load_weights(model_dir, ChannelKind::Fusion)?)
    };
    let p = &cfg.pipeline;
    let results = manifest
        .records
        .par_iter()
        .map(|r| -> Result<(PathBuf, Option<String>)> {
            let rec = manifest.load_record(r)?;
            let warning = rec
                .boxes
                .is_none()
                .then(|| format!("record `{}` has no boxes; detection channel is empty", rec.id));
            let boxes = rec.boxes.clone().unwrap_or_default();
            let bundle: ChannelBundle = compute_bundle(&seg, &edge, p, &rec.image, &boxes)?;
            bundle.seg.save(&out_dir.join(format!("{}.seg.f64", rec.id)))?;
            bundle.edge.save(&out_dir.join(format!("{}.edge.f64", rec.id)))?;
            netpbm::save_coverage(&out_dir.join(format!("{}.coverage.pgm", rec.id)), &bundle.det)?;
            let instances = match &fusion {
                Some(f) => {
                    let fused: ProbMap = fuse_forward(f, &p.fusion, &bundle)?;
                    fused.save(&out_dir.join(format!("{}.fused.f64", rec.id)))?;
                    instantiate(&fused, p.threshold, p.min_area)?
                }
                None => instantiate(&bundle.seg, p.threshold, p.min_area)?,
            };
            let path = out_dir.join(format!("{}.pgm", rec.id));
            netpbm::save_instance_map(&path, &instances)?;
            Ok((path, warning))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut s = Summary::default();
    for (p, w) in results {
        s.written.push(p);
        s.warnings.extend(w);
    }
    for w in &s.warnings {
        log::warn!("{w}");
    }
    write_run(out_dir, "infer", cfg, json!({ "seg_only": seg_only, "warnings": s.warnings }))?;
    Ok(s)
}

/// Scores `<pred_dir>/<id>.pgm` against the manifest's labels.
pub fn cmd_eval(cfg: &RunConfig, manifest: &Manifest, pred_dir: &Path) -> Result<MetricsReport> {
    let gts = manifest
        .records
        .par_iter()
        .map(|r| netpbm::load_instance_map(&manifest.resolve(&r.labels)))
        .collect::<Result<Vec<InstanceMap>>>()?;
    let preds = manifest
        .records
        .par_iter()
        .map(|r| {
            let p = pred_dir.join(format!("{}.pgm", r.id));
            if p.exists() {
                netpbm::load_instance_map(&p).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect::<Result<Vec<Option<InstanceMap>>>>()?;
    let items: Vec<EvalItem> = manifest
        .records
        .iter()
        .zip(&gts)
        .zip(&preds)
        .map(|((r, gt), pred)| EvalItem {
            id: &r.id,
            pred: pred.as_ref(),
            gt,
        })
        .collect();
    let mut report = evaluate_dataset(
        &items,
        EvalOptions {
            hausdorff_fallback: cfg.hausdorff_fallback,
        },
    )?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    report.config_hash = Some(cfg.hash());
    Ok(report)
}

/// One `rank` input: a whole score grid, or one method's report on a split.
#[derive(Debug, Clone, PartialEq)]
pub enum RankInput {
    Grid(PathBuf),
    Report {
        method: String,
        split: String,
        path: PathBuf,
    },
}

impl std::str::FromStr for RankInput {
    type Err = Error;

    /// `METHOD:SPLIT=report.json` or a plain path to a score grid.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('=') {
            Some((key, path)) => {
                let (method, split) = key.split_once(':').ok_or_else(|| {
                    Error::config(format!("rank input `{s}`: expected METHOD:SPLIT=PATH"))
                })?;
                if method.is_empty() || split.is_empty() {
                    return Err(Error::config(format!("rank input `{s}`: empty method or split")));
                }
                Ok(RankInput::Report {
                    method: method.to_string(),
                    split: split.to_string(),
                    path: PathBuf::from(path),
                })
            }
            None => Ok(RankInput::Grid(PathBuf::from(s))),
        }
    }
}

/// Builds a grid from per-method reports: columns are metric-major
/// (F1, Dice, Hausdorff), splits in first-seen order.
pub fn grid_from_reports(reports: &[(String, String, MetricsReport)]) -> ScoreGrid {
    let mut splits: Vec<String> = Vec::new();
    let mut methods: Vec<String> = Vec::new();
    for (m, s, _) in reports {
        if !splits.contains(s) {
            splits.push(s.clone());
        }
        if !methods.contains(m) {
            methods.push(m.clone());
        }
    }
    let columns: Vec<Column> = [Metric::F1, Metric::ObjectDice, Metric::ObjectHausdorff]
        .into_iter()
        .flat_map(|metric| splits.iter().map(move |s| Column::new(metric, s.clone())))
        .collect();
    let methods = methods
        .into_iter()
        .map(|name| {
            let scores = columns
                .iter()
                .map(|c| {
                    reports
                        .iter()
                        .find(|(m, s, _)| *m == name && *s == c.split)
                        .map(|(_, _, r)| match c.metric {
                            Metric::F1 => r.dataset.f1,
                            Metric::ObjectDice => r.dataset.object_dice,
                            Metric::ObjectHausdorff => r.dataset.object_hausdorff,
                        })
                })
                .collect();
            MethodScores { name, scores }
        })
        .collect();
    ScoreGrid { columns, methods }
}

pub fn cmd_rank(cfg: &RunConfig, inputs: &[RankInput]) -> Result<RankTable> {
    let grid = match inputs {
        [RankInput::Grid(p)] => serde_json::from_slice::<ScoreGrid>(&fsutil::read(p)?)
            .map_err(|e| Error::data(format!("{}: {e}", p.display())))?,
        _ => {
            let mut reports = Vec::new();
            for i in inputs {
                match i {
                    RankInput::Grid(p) => {
                        return Err(Error::config(format!(
                            "score grid {} cannot be combined with other inputs",
                            p.display()
                        )))
                    }
                    RankInput::Report { method, split, path } => {
                        let r: MetricsReport = serde_json::from_slice(&fsutil::read(path)?)
                            .map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
                        reports.push((method.clone(), split.clone(), r));
                    }
                }
            }
            grid_from_reports(&reports)
        }
    };
    if grid.methods.len() < 2 {
        return Err(Error::data(format!(
            "ranking needs at least two methods, got {}",
            grid.methods.len()
        )));
    }
    rank_aggregate(&grid, &cfg.split_weights, cfg.tie_rule)
}

/// Writes `n` synthetic images (`<id>.ppm`, `<id>.pgm`, `<id>.boxes.json`)
/// and a manifest for them.
pub fn cmd_synth(
    cfg: &RunConfig,
    synth: &SynthConfig,
    n: usize,
    split: &str,
    out_dir: &Path,
) -> Result<Manifest> {
    if n == 0 {
        return Err(Error::config("synth needs n >= 1"));
    }
    synth.validate()?;
    ensure_dir(out_dir)?;
    let made = (0..n)
        .into_par_iter()
        .map(|i| -> Result<(Record, bool)> {
            let s = generate(synth, cfg.seed, i)?;
            let rec = Record {
                id: s.id.clone(),
                image: PathBuf::from(format!("{}.ppm", s.id)),
                labels: PathBuf::from(format!("{}.pgm", s.id)),
                boxes: Some(PathBuf::from(format!("{}.boxes.json", s.id))),
            };
            netpbm::save_rgb(&out_dir.join(&rec.image), &s.image)?;
            netpbm::save_instance_map(&out_dir.join(&rec.labels), &s.labels)?;
            save_boxes(&out_dir.join(rec.boxes.as_ref().expect("set")), &s.boxes)?;
            Ok((rec, s.touching))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut manifest = Manifest::new(split, out_dir);
    let mut touching = Vec::new();
    for (rec, t) in made {
        if t {
            touching.push(rec.id.clone());
        }
        manifest.records.push(rec);
    }
    manifest.save(&out_dir.join("manifest.json"))?;
    write_run(out_dir, "synth", cfg, json!({ "n": n, "touching": touching }))?;
    Ok(manifest)
}

/// Runs the gradient-check suite; any case at or above `tolerance` is an
/// internal error.
pub fn cmd_gradcheck(cfg: &RunConfig, eps: f64, tolerance: f64) -> Result<Vec<GradCheckCase>> {
    let cases = gradcheck_suite(cfg.seed, eps)?;
    let failed: Vec<String> = cases
        .iter()
        .filter(|c| !(c.max_rel_error < tolerance))
        .map(|c| format!("{} ({:e})", c.name, c.max_rel_error))
        .collect();
    if failed.is_empty() {
        Ok(cases)
    } else {
        Err(Error::Internal(format!(
            "gradient check above {tolerance:e}: {}",
            failed.join(", ")
        )))
    }
}
