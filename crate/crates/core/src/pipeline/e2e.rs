use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use super::config::{PipelineConfig, Scenario};
use super::stages::{
    deterministic_mode, ensure_dir, load_frame, quantize, run_scenario, scenario_header, train_on, translate_manifest,
    write_json, ScenarioOutcome, TrainSummary,
};
use super::strips::{overlay_boxes, write_strip};
use crate::degrade::scene::write_scene_set;
use crate::degrade::{build_paired_corpus, file_stem};
use crate::error::{Error, Result};
use crate::gan::{translate_images, Trainer};
use crate::imaging::{patient_wise_split, psnr, DatasetManifest, ImageTensor, Quality};
use crate::metrics::{compare_reports, precision_recall_f1, ImageDetections, ReportComparison};

/// Paired restoration quality on held-out scenes: every test scene's
/// degraded version against its clean original, before and after
/// translation.
#[derive(Debug, Clone, Serialize)]
pub struct RestorationSummary {
    pub frames: usize,
    pub median_psnr_degraded: f64,
    pub median_psnr_translated: f64,
    /// Toy-detector F1 (%) on the degraded and on the translated frames.
    pub f1_degraded: f64,
    pub f1_translated: f64,
}

impl RestorationSummary {
    pub fn psnr_gain(&self) -> f64 {
        self.median_psnr_translated - self.median_psnr_degraded
    }

    pub fn f1_gain(&self) -> f64 {
        self.f1_translated - self.f1_degraded
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct E2eSummary {
    pub config_hash: String,
    pub scenes: usize,
    pub split_sizes: [usize; 3],
    pub train: TrainSummary,
    pub restoration: RestorationSummary,
    pub raw: ScenarioOutcome,
    pub translated: ScenarioOutcome,
    pub comparison: ReportComparison,
    pub header: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// PSNR capped so identical frames do not turn the median infinite.
fn bounded_psnr(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    Ok(psnr(a, b)?.min(100.0))
}

/// Mixed dataset: within the clean and degraded corpora, odd-numbered
/// frames take their degraded (uninformative) version and even-numbered
/// frames stay clean, so the two translator domains hold different scenes.
fn mixed_manifest(clean: &DatasetManifest, degraded: &DatasetManifest, root: &Path) -> DatasetManifest {
    let records = clean
        .records
        .iter()
        .zip(&degraded.records)
        .enumerate()
        .map(|(i, (c, d))| if i % 2 == 1 { d.clone() } else { c.clone() })
        .collect();
    let mut m = DatasetManifest::new(format!("{}-mixed", clean.name), records).with_root(root);
    m.config_hash = clean.config_hash.clone();
    m.seed_note = clean.seed_note.clone();
    m
}

/// Generates scenes, degrades them, splits by patient, trains the
/// translator, translates, and evaluates both scenarios plus the paired
/// restoration summary. Artifacts land under `out`.
pub fn e2e_synthetic(cfg: &PipelineConfig, out: &Path, log: &mut dyn FnMut(&str)) -> Result<E2eSummary> {
    cfg.validate_synthetic()?;
    let started = Instant::now();
    let hash = cfg.hash();
    ensure_dir(out)?;

    log(&format!("rendering {} scenes", cfg.synthetic.scenes));
    let mut scenes = write_scene_set(
        out,
        &cfg.synthetic.scene,
        cfg.synthetic.scenes,
        cfg.synthetic.frames_per_patient,
        cfg.seed,
    )?;
    scenes.config_hash = Some(hash.clone());
    let scenes = scenes.save_relocated(&out.join("scenes.json"))?;

    log("degrading");
    let corpus_dir = out.join("corpus");
    let corpus = build_paired_corpus(&scenes, &cfg.degradation, &corpus_dir, cfg.seed)?;
    let mixed = mixed_manifest(&corpus.clean, &corpus.degraded, &corpus_dir);
    let mixed = mixed.save_relocated(&corpus_dir.join("mixed.json"))?;

    log("splitting by patient");
    let splits = patient_wise_split(&mixed, cfg.split, cfg.seed)?;
    let split_dir = out.join("splits");
    let train_m = splits.train.save_relocated(&split_dir.join("train.json"))?;
    splits.val.save_relocated(&split_dir.join("val.json"))?;
    let test_m = splits.test.save_relocated(&split_dir.join("test.json"))?;
    if test_m.is_empty() {
        return Err(Error::Empty("test split"));
    }

    log("training");
    let ckpt_root = out.join("checkpoints");
    let train = train_on(cfg, &train_m, &ckpt_root, log)?;
    let g_ab = Trainer::<f32>::load_checkpoint(&train.checkpoint, Some(&hash))?.model.g_ab;

    log("translating uninformative frames (train and test)");
    let tdir = out.join("translated");
    translate_manifest(&train_m, &g_ab, &tdir, "train.json", &hash)?;
    translate_manifest(&test_m, &g_ab, &tdir, "test.json", &hash)?;

    log("restoration summary");
    let restoration = restoration_summary(cfg, &test_m, &corpus.clean, &corpus.degraded, &g_ab, out)?;

    log("evaluating scenarios");
    let reports_dir = out.join("reports");
    let raw_cfg = PipelineConfig {
        scenario: Scenario::Raw,
        ..cfg.clone()
    };
    let raw = run_scenario(&raw_cfg, &test_m, &reports_dir)?;
    let mut tr_cfg = PipelineConfig {
        scenario: Scenario::Translated,
        ..cfg.clone()
    };
    tr_cfg.data.checkpoint = Some(train.checkpoint.clone());
    let translated = run_scenario(&tr_cfg, &test_m, &reports_dir)?;
    let comparison = compare_reports(&raw.report, &translated.report);
    let header = scenario_header(Scenario::Translated);
    std::fs::write(
        reports_dir.join("comparison.txt"),
        format!("# {header}\n{}", comparison.render()),
    )
    .map_err(|e| Error::io(reports_dir.join("comparison.txt"), e))?;

    let summary = E2eSummary {
        config_hash: hash,
        scenes: scenes.len(),
        split_sizes: [train_m.len(), splits.val.len(), test_m.len()],
        train,
        restoration,
        raw,
        translated,
        comparison,
        header,
        seconds: (!deterministic_mode()).then(|| started.elapsed().as_secs_f64()),
    };
    write_json(&out.join("e2e_summary.json"), &summary)?;
    Ok(summary)
}

fn restoration_summary(
    cfg: &PipelineConfig,
    test: &DatasetManifest,
    clean: &DatasetManifest,
    degraded: &DatasetManifest,
    g_ab: &crate::nn::Network<f32>,
    out: &Path,
) -> Result<RestorationSummary> {
    let strips: PathBuf = out.join("strips").join("restoration");
    ensure_dir(&strips)?;
    let (mut p_deg, mut p_tr) = (Vec::new(), Vec::new());
    let (mut e_deg, mut e_tr) = (Vec::new(), Vec::new());
    for (i, rec) in test.records.iter().enumerate() {
        // each test frame, whichever version the mixed set holds, maps back
        // to its clean original and degraded counterpart
        let clean_id = match rec.quality {
            Quality::Uninformative => rec.frame_id.strip_suffix("_degraded").unwrap_or(&rec.frame_id),
            _ => rec.frame_id.as_str(),
        };
        let idx = clean
            .records
            .iter()
            .position(|r| r.frame_id == clean_id)
            .ok_or_else(|| Error::Validation(format!("no clean original for {}", rec.frame_id)))?;
        let c = load_frame(clean, &clean.records[idx])?;
        let d = load_frame(degraded, &degraded.records[idx])?;
        let t = quantize(&translate_images(g_ab, std::slice::from_ref(&d))?.0[0]);
        p_deg.push(bounded_psnr(&c, &d)?);
        p_tr.push(bounded_psnr(&c, &t)?);
        let gts = clean.records[idx].gt_boxes.clone();
        let det_d = cfg.detector.detect(&d)?;
        let det_t = cfg.detector.detect(&t)?;
        if i < 8 {
            let overlay = overlay_boxes(&t, &gts, &det_t);
            write_strip(&strips.join(format!("{}.png", file_stem(clean_id))), &[c, d, t, overlay])?;
        }
        e_deg.push(ImageDetections {
            frame_id: clean_id.to_string(),
            detections: det_d,
            ground_truth: gts.clone(),
        });
        e_tr.push(ImageDetections {
            frame_id: clean_id.to_string(),
            detections: det_t,
            ground_truth: gts,
        });
    }
    let f1 = |e: &[ImageDetections]| 100.0 * precision_recall_f1(e, cfg.eval.conf_thresh, cfg.eval.iou_thresh).f1;
    Ok(RestorationSummary {
        frames: p_deg.len(),
        median_psnr_degraded: median(p_deg),
        median_psnr_translated: median(p_tr),
        f1_degraded: f1(&e_deg),
        f1_translated: f1(&e_tr),
    })
}
