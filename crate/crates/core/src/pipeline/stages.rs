use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::Serialize;

use super::config::{PipelineConfig, Scenario};
use super::strips::{overlay_boxes, write_strip};
use crate::degrade::{build_paired_corpus, PairedCorpus};
use crate::error::{Error, Result};
use crate::gan::{latest_checkpoint, translate_images, LossRecord, Trainer, TranslationTiming, CHECKPOINT_MANIFEST};
use crate::imaging::{
    patient_wise_split, raster_to_unit, unit_to_raster, DatasetManifest, FrameRecord, ImageTensor, Quality, Raster,
};
use crate::metrics::{
    aggregate_runs, evaluate, format_detections, load_detections, ImageDetections, MetricsReport, PointMetrics,
};
use crate::nn::{Network, Tensor};

/// Set to `1` to keep wall-clock timings out of written artifacts, so that
/// repeated runs produce byte-identical files. Computation itself is always
/// single-threaded and seeded.
pub const DETERMINISTIC_ENV: &str = "FRAMERESTORE_DETERMINISTIC";

pub fn deterministic_mode() -> bool {
    std::env::var(DETERMINISTIC_ENV).is_ok_and(|v| v == "1")
}

/// Strips written per scenario run.
const MAX_STRIPS: usize = 8;

pub(crate) fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub(crate) fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    let text = serde_json::to_string_pretty(value).expect("artifact serializes");
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Rejects an artifact stamped with a different configuration hash.
/// Unstamped inputs are accepted.
pub fn check_hash(found: Option<&str>, expected: &str, what: &str) -> Result<()> {
    match found {
        Some(h) if h != expected => Err(Error::Mismatch(format!(
            "{what} was produced under config {h}, current config is {expected}"
        ))),
        _ => Ok(()),
    }
}

fn required<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a PathBuf> {
    p.as_ref().ok_or_else(|| Error::Config(format!("`data.{key}` must be set for this stage")))
}

/// Loads the configured input manifest and checks its stamp.
pub fn load_input_manifest(cfg: &PipelineConfig) -> Result<DatasetManifest> {
    let path = required(&cfg.data.manifest, "manifest")?;
    let m = DatasetManifest::load(path)?;
    check_hash(m.config_hash.as_deref(), &cfg.hash(), &format!("manifest {}", path.display()))?;
    Ok(m)
}

pub fn load_frame(manifest: &DatasetManifest, rec: &FrameRecord) -> Result<ImageTensor> {
    Ok(raster_to_unit(&Raster::load_png(&manifest.resolved_path(rec))?))
}

/// Rounds through 8-bit levels, as a PNG round trip would.
pub fn quantize(img: &ImageTensor) -> ImageTensor {
    raster_to_unit(&unit_to_raster(img))
}

fn stamped(mut m: DatasetManifest, hash: &str) -> DatasetManifest {
    m.config_hash = Some(hash.to_string());
    m
}

pub fn stage_degrade(cfg: &PipelineConfig, out: &Path) -> Result<PairedCorpus> {
    let m = load_input_manifest(cfg)?;
    build_paired_corpus(&stamped(m, &cfg.hash()), &cfg.degradation, out, cfg.seed)
}

/// Writes `train.json`, `val.json` and `test.json` under `out`.
pub fn stage_split(cfg: &PipelineConfig, out: &Path) -> Result<[DatasetManifest; 3]> {
    let m = load_input_manifest(cfg)?;
    split_into(&stamped(m, &cfg.hash()), cfg, out)
}

fn split_into(m: &DatasetManifest, cfg: &PipelineConfig, out: &Path) -> Result<[DatasetManifest; 3]> {
    let s = patient_wise_split(m, cfg.split, cfg.seed)?;
    Ok([
        s.train.save_relocated(&out.join("train.json"))?,
        s.val.save_relocated(&out.join("val.json"))?,
        s.test.save_relocated(&out.join("test.json"))?,
    ])
}

/// Domain A (uninformative) and domain B (informative) training tensors in
/// the [-1, 1] range.
pub fn domain_tensors(m: &DatasetManifest, image_size: usize) -> Result<(Vec<Tensor<f32>>, Vec<Tensor<f32>>)> {
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for rec in &m.records {
        let dest = match rec.quality {
            Quality::Uninformative => &mut a,
            Quality::Informative => &mut b,
            Quality::Unrecognized(_) => continue,
        };
        let img = load_frame(m, rec)?;
        if img.height() != image_size || img.width() != image_size {
            return Err(Error::Shape(format!(
                "frame {} is {}x{}, training expects {image_size}x{image_size}",
                rec.frame_id,
                img.height(),
                img.width()
            )));
        }
        dest.push(img.from_unit().to_tensor());
    }
    if a.is_empty() {
        return Err(Error::Empty("uninformative training frames"));
    }
    if b.is_empty() {
        return Err(Error::Empty("informative training frames"));
    }
    Ok((a, b))
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub epochs_completed: usize,
    pub resumed_from: Option<PathBuf>,
    pub checkpoint: PathBuf,
    pub domain_a: usize,
    pub domain_b: usize,
    pub first_records: Vec<LossRecord>,
}

/// Trains on `manifest` (uninformative = A, informative = B), resuming from
/// the newest checkpoint under `checkpoint_root` when one exists.
pub fn train_on(
    cfg: &PipelineConfig,
    manifest: &DatasetManifest,
    checkpoint_root: &Path,
    log: &mut dyn FnMut(&str),
) -> Result<TrainSummary> {
    let hash = cfg.hash();
    let (a, b) = domain_tensors(manifest, cfg.train.image_size)?;
    let (mut trainer, resumed_from) = match Trainer::<f32>::resume_latest(checkpoint_root, Some(&hash))? {
        Some((t, dir)) => {
            log(&format!("resuming from {} (epoch {})", dir.display(), t.epoch));
            (t, Some(dir))
        }
        None => {
            let mut t = Trainer::new(cfg.train, cfg.seed)?;
            t.config_hash = hash.clone();
            (t, None)
        }
    };
    let mut first = Vec::new();
    while trainer.epoch < trainer.config().epochs {
        let started = Instant::now();
        let records = trainer.run_epoch(&a, &b, |r| {
            if first.len() < 10 {
                first.push(*r);
            }
        })?;
        let dir = crate::gan::epoch_dir(checkpoint_root, trainer.epoch);
        trainer.save_checkpoint(&dir)?;
        let m = trainer.history.last().copied().unwrap_or_default();
        log(&format!(
            "epoch {}/{}: {} steps, G {:.4} (cycle {:.4}), D_A {:.4}, D_B {:.4}, {:.1}s",
            trainer.epoch,
            trainer.config().epochs,
            records.len(),
            m.total_g,
            m.cycle,
            m.d_a,
            m.d_b,
            started.elapsed().as_secs_f64()
        ));
    }
    Ok(TrainSummary {
        epochs_completed: trainer.epoch,
        resumed_from,
        checkpoint: crate::gan::epoch_dir(checkpoint_root, trainer.epoch),
        domain_a: a.len(),
        domain_b: b.len(),
        first_records: first,
    })
}

pub fn stage_train(cfg: &PipelineConfig, out: &Path, log: &mut dyn FnMut(&str)) -> Result<TrainSummary> {
    let m = load_input_manifest(cfg)?;
    let summary = train_on(cfg, &m, &out.join("checkpoints"), log)?;
    write_json(&out.join("train_summary.json"), &summary)?;
    Ok(summary)
}

/// The checkpoint to translate with: `data.checkpoint` (a checkpoint or a
/// directory of them), else the newest under `out/checkpoints`.
pub fn find_checkpoint(cfg: &PipelineConfig, out: &Path) -> Result<PathBuf> {
    let candidates = match &cfg.data.checkpoint {
        Some(p) => vec![p.clone()],
        None => vec![out.join("checkpoints")],
    };
    for c in candidates {
        if c.join(CHECKPOINT_MANIFEST).exists() {
            return Ok(c);
        }
        if let Some(latest) = latest_checkpoint(&c)? {
            return Ok(latest);
        }
    }
    Err(Error::Config(
        "the translated scenario needs a trained checkpoint: set `data.checkpoint` or run `train` first".into(),
    ))
}

pub fn load_translator(cfg: &PipelineConfig, dir: &Path) -> Result<Network<f32>> {
    Ok(Trainer::<f32>::load_checkpoint(dir, Some(&cfg.hash()))?.model.g_ab)
}

#[derive(Debug, Clone, Serialize)]
pub struct TranslateOutcome {
    pub manifest: PathBuf,
    pub translated: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<TranslationTiming>,
}

/// Replaces every uninformative frame of `m` with its translation, written
/// under `out_dir/frames/`, and saves the resulting manifest as `name`.
pub fn translate_manifest(
    m: &DatasetManifest,
    g_ab: &Network<f32>,
    out_dir: &Path,
    name: &str,
    hash: &str,
) -> Result<(DatasetManifest, TranslationTiming)> {
    let frames = out_dir.join("frames");
    ensure_dir(&frames)?;
    let mut io = Duration::ZERO;
    let mut compute = Duration::ZERO;
    let mut records = Vec::with_capacity(m.len());
    let mut count = 0;
    for rec in &m.records {
        if rec.quality != Quality::Uninformative {
            let mut r = rec.clone();
            r.path = m.resolved_path(rec);
            records.push(r);
            continue;
        }
        let t0 = Instant::now();
        let img = load_frame(m, rec)?;
        io += t0.elapsed();
        let (out, took) = translate_images(g_ab, std::slice::from_ref(&img))?;
        compute += took;
        let t1 = Instant::now();
        let rel = PathBuf::from("frames").join(format!("{}.png", crate::degrade::file_stem(&rec.frame_id)));
        unit_to_raster(&out[0]).save_png(&out_dir.join(&rel))?;
        io += t1.elapsed();
        records.push(FrameRecord {
            path: out_dir.join(rel),
            ..rec.clone()
        });
        count += 1;
    }
    let mut tm = DatasetManifest::new(format!("{}-translated", m.name), records);
    tm.config_hash = Some(hash.to_string());
    tm.seed_note = m.seed_note.clone();
    let saved = tm.save_relocated(&out_dir.join(name))?;
    Ok((saved, TranslationTiming::new(count, compute, io)))
}

/// Reference throughput printed by `translate --bench`; never asserted.
pub const REFERENCE_FPS_LINE: &str =
    "reference: 14 frames per second reported for the original GPU translator (context only, not compared)";

pub fn stage_translate(cfg: &PipelineConfig, out: &Path) -> Result<TranslateOutcome> {
    let ckpt = find_checkpoint(cfg, out)?;
    let m = load_input_manifest(cfg)?;
    let g_ab = load_translator(cfg, &ckpt)?;
    let (_, timing) = translate_manifest(&m, &g_ab, out, "translated.json", &cfg.hash())?;
    let outcome = TranslateOutcome {
        manifest: out.join("translated.json"),
        translated: timing.images,
        timing: Some(timing),
    };
    let on_disk = TranslateOutcome {
        timing: (!deterministic_mode()).then_some(timing),
        ..outcome.clone()
    };
    write_json(&out.join("translate_summary.json"), &on_disk)?;
    Ok(outcome)
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioOutcome {
    pub scenario: Scenario,
    pub metrics: PointMetrics,
    pub report: MetricsReport,
    pub report_path: PathBuf,
    pub frames: usize,
    pub translated_frames: usize,
}

fn scenario_name(s: Scenario) -> &'static str {
    match s {
        Scenario::Raw => "raw",
        Scenario::Translated => "translated",
    }
}

/// Header line recorded with every scenario report.
pub fn scenario_header(s: Scenario) -> String {
    match s {
        Scenario::Raw => "scenario: raw (frames evaluated as stored)".into(),
        Scenario::Translated => {
            "scenario: translated (every uninformative frame replaced by its translation, train and test splits alike)"
                .into()
        }
    }
}

/// Evaluates a manifest under `cfg.scenario`. In the translated scenario the
/// checkpoint is located before any image is read.
pub fn run_scenario(cfg: &PipelineConfig, manifest: &DatasetManifest, out: &Path) -> Result<ScenarioOutcome> {
    let translator = match cfg.scenario {
        Scenario::Raw => None,
        Scenario::Translated => {
            let ckpt = find_checkpoint(cfg, out)?;
            Some(load_translator(cfg, &ckpt)?)
        }
    };
    let external = match &cfg.data.detections {
        Some(p) => Some(load_detections(p)?),
        None => None,
    };
    ensure_dir(out)?;
    let name = scenario_name(cfg.scenario);
    let strips_dir = out.join("strips").join(name);
    let mut images = Vec::with_capacity(manifest.len());
    let mut det_lines: BTreeMap<String, Vec<_>> = BTreeMap::new();
    let mut translated = 0;
    let mut strips = 0;
    for rec in &manifest.records {
        let input = load_frame(manifest, rec)?;
        let frame = match (&translator, &rec.quality) {
            (Some(g), Quality::Uninformative) => {
                translated += 1;
                quantize(&translate_images(g, std::slice::from_ref(&input))?.0[0])
            }
            _ => input.clone(),
        };
        let detections = match &external {
            Some(all) => all.get(&rec.frame_id).cloned().unwrap_or_default(),
            None => cfg.detector.detect(&frame)?,
        };
        if rec.quality == Quality::Uninformative && strips < MAX_STRIPS {
            ensure_dir(&strips_dir)?;
            let overlay = overlay_boxes(&frame, &rec.gt_boxes, &detections);
            let panels = if translator.is_some() {
                vec![input, frame.clone(), overlay]
            } else {
                vec![input, overlay]
            };
            write_strip(
                &strips_dir.join(format!("{}.png", crate::degrade::file_stem(&rec.frame_id))),
                &panels,
            )?;
            strips += 1;
        }
        det_lines.insert(rec.frame_id.clone(), detections.clone());
        images.push(ImageDetections {
            frame_id: rec.frame_id.clone(),
            detections,
            ground_truth: rec.gt_boxes.clone(),
        });
    }
    let metrics = evaluate(&images, &cfg.eval)?;
    let mut report = aggregate_runs(&[metrics])?;
    report.config_hash = Some(cfg.hash());
    report.aggregation_axis = Some("single run".into());
    let report_path = out.join(format!("report_{name}.json"));
    report.save(&report_path)?;
    write_text(
        &out.join(format!("report_{name}.txt")),
        &format!("# {}\n{}", scenario_header(cfg.scenario), render_single(&report)),
    )?;
    write_text(
        &out.join(format!("detections_{name}.txt")),
        &format_detections(det_lines.iter().map(|(k, v)| (k.as_str(), v.as_slice()))),
    )?;
    Ok(ScenarioOutcome {
        scenario: cfg.scenario,
        metrics,
        report,
        report_path,
        frames: manifest.len(),
        translated_frames: translated,
    })
}

/// One-column table of a report.
pub fn render_single(r: &MetricsReport) -> String {
    let labels = ["Precision (%)", "Recall (%)", "F1-score (%)", "mAP@0.5 (%)", "mAP@0.5:0.95 (%)"];
    let mut s = String::new();
    for (l, m) in labels.iter().zip(r.stats()) {
        s.push_str(&format!("{l:<18} {:>8.2} ± {:.2} (n={})\n", m.mean, m.std, m.n));
    }
    s
}

pub fn stage_detect_eval(cfg: &PipelineConfig, out: &Path) -> Result<ScenarioOutcome> {
    let m = load_input_manifest(cfg)?;
    run_scenario(cfg, &m, out)
}

pub fn stage_report(cfg: &PipelineConfig, out: &Path) -> Result<crate::metrics::ReportComparison> {
    let raw = MetricsReport::load(required(&cfg.data.raw_report, "raw_report")?)?;
    let tr = MetricsReport::load(required(&cfg.data.translated_report, "translated_report")?)?;
    if let (Some(a), Some(b)) = (&raw.config_hash, &tr.config_hash) {
        if a != b {
            return Err(Error::Mismatch(format!("reports come from different configs ({a} vs {b})")));
        }
    }
    let cmp = crate::metrics::compare_reports(&raw, &tr);
    write_json(&out.join("comparison.json"), &cmp)?;
    write_text(&out.join("comparison.txt"), &cmp.render())?;
    Ok(cmp)
}
