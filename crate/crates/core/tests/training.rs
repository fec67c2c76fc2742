//! Training loop, checkpoint and pipeline-stage behaviour.

use std::path::Path;

use framerestore_core::degrade::scene::write_scene_set;
use framerestore_core::gan::{
    DiscriminatorConfig, GeneratorConfig, PoolConfig, Trainer, TrainConfig, CHECKPOINT_MANIFEST,
};
use framerestore_core::metrics::{MetricStat, MetricsReport};
use framerestore_core::nn::Tensor;
use framerestore_core::pipeline::{run_scenario, stage_report, PipelineConfig, Scenario};
use framerestore_core::{Error, ErrorCategory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn micro_config(epochs: usize) -> TrainConfig {
    TrainConfig {
        generator: GeneratorConfig {
            base_width: 4,
            n_res_blocks: 1,
        },
        discriminator: DiscriminatorConfig {
            base_width: 4,
            n_layers: 1,
        },
        pool: PoolConfig {
            capacity: 3,
            swap_probability: 0.5,
        },
        image_size: 16,
        epochs,
        ..TrainConfig::default()
    }
}

fn random_images(n: usize, seed: u64) -> Vec<Tensor<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Tensor::from_vec(1, 3, 16, 16, (0..3 * 16 * 16).map(|_| rng.gen_range(-1.0..1.0)).collect()))
        .collect()
}

#[test]
fn resumed_epoch_matches_uninterrupted_epoch() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (random_images(5, 1), random_images(3, 2));
    let mut t = Trainer::<f64>::new(micro_config(3), 11).unwrap();
    t.run_epoch(&a, &b, |_| {}).unwrap();
    t.save_checkpoint(dir.path()).unwrap();
    let straight = t.run_epoch(&a, &b, |_| {}).unwrap();

    let mut resumed = Trainer::<f64>::load_checkpoint(dir.path(), Some(&t.config_hash)).unwrap();
    assert_eq!(resumed.epoch, 1);
    let again = resumed.run_epoch(&a, &b, |_| {}).unwrap();
    assert_eq!(straight, again);
    assert_eq!(resumed.model, t.model);
    assert_eq!(resumed.step, t.step);
    assert_eq!(resumed.history, t.history);
}

#[test]
fn checkpoint_from_other_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let t = Trainer::<f32>::new(micro_config(2), 0).unwrap();
    t.save_checkpoint(dir.path()).unwrap();
    assert!(dir.path().join(CHECKPOINT_MANIFEST).exists());
    let err = Trainer::<f32>::load_checkpoint(dir.path(), Some("not-the-hash")).unwrap_err();
    assert!(matches!(err, Error::Mismatch(_)), "{err}");
    assert_eq!(err.category(), ErrorCategory::Config);
    let err = Trainer::<f64>::load_checkpoint(dir.path(), None).unwrap_err();
    assert!(matches!(err, Error::Mismatch(_)), "{err}");
}

#[test]
fn small_generator_step_does_not_increase_objective() {
    let t = Trainer::<f64>::new(micro_config(1), 5).unwrap();
    let (a, b) = (&random_images(1, 3)[0], &random_images(1, 4)[0]);
    let model = &t.model;
    let g = model.generator_gradients(a, b).unwrap();
    let lr = 1e-5;
    let mut stepped = model.clone();
    for (p, d) in stepped.g_ab.params_mut().iter_mut().zip(&g.grads_ab) {
        *p -= lr * d;
    }
    for (p, d) in stepped.g_ba.params_mut().iter_mut().zip(&g.grads_ba) {
        *p -= lr * d;
    }
    let (_, after) = stepped.generator_objective(a, b).unwrap();
    assert!(after <= g.total, "{after} > {}", g.total);
}

#[test]
fn training_reports_empty_domains() {
    let mut t = Trainer::<f64>::new(micro_config(1), 0).unwrap();
    let err = t.run_epoch(&[], &random_images(1, 0), |_| {}).unwrap_err();
    assert!(matches!(err, Error::Empty(_)));
}

fn scene_config(out: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig::synthetic_default();
    cfg.output_root = out.to_path_buf();
    cfg
}

#[test]
fn raw_scenario_scores_clean_scenes_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scene_config(dir.path());
    let scenes = write_scene_set(dir.path(), &cfg.synthetic.scene, 6, 2, 3).unwrap();
    let out = dir.path().join("reports");
    let outcome = run_scenario(&cfg, &scenes, &out).unwrap();
    assert_eq!(outcome.frames, 6);
    assert_eq!(outcome.translated_frames, 0);
    assert_eq!(outcome.metrics.f1, 100.0);
    assert_eq!(outcome.report.config_hash.as_deref(), Some(cfg.hash().as_str()));
    assert!(out.join("report_raw.json").exists());
    assert!(out.join("detections_raw.txt").exists());
}

#[test]
fn translated_scenario_without_checkpoint_fails_before_writing() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = scene_config(dir.path());
    cfg.scenario = Scenario::Translated;
    let scenes = write_scene_set(dir.path(), &cfg.synthetic.scene, 2, 2, 3).unwrap();
    let out = dir.path().join("reports");
    let err = run_scenario(&cfg, &scenes, &out).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");
    assert!(!out.exists());
}

fn report(values: [(f64, f64); 5], hash: &str) -> MetricsReport {
    let mut r = MetricsReport::from_stats(values.map(|(mean, std)| MetricStat { mean, std, n: 5 }));
    r.config_hash = Some(hash.into());
    r
}

#[test]
fn report_stage_renders_deltas() {
    let dir = tempfile::tempdir().unwrap();
    let raw = report([(92.03, 0.60), (88.9, 3.12), (90.4, 1.51), (95.37, 0.95), (57.53, 0.32)], "h");
    let tr = report([(93.0, 0.87), (90.2, 1.3), (91.57, 0.38), (95.6, 0.21), (57.07, 0.31)], "h");
    let mut cfg = scene_config(dir.path());
    cfg.data.raw_report = Some(dir.path().join("raw.json"));
    cfg.data.translated_report = Some(dir.path().join("tr.json"));
    raw.save(cfg.data.raw_report.as_ref().unwrap()).unwrap();
    tr.save(cfg.data.translated_report.as_ref().unwrap()).unwrap();

    let cmp = stage_report(&cfg, dir.path()).unwrap();
    let expected = [0.97, 1.3, 1.17, 0.23, -0.46];
    for (d, e) in cmp.deltas().iter().zip(expected) {
        assert!((d - e).abs() < 1e-9, "{d} vs {e}");
    }
    let text = std::fs::read_to_string(dir.path().join("comparison.txt")).unwrap();
    assert!(text.contains("92.03 ± 0.60"));
    assert!(text.contains("-0.46"));

    let other = report([(93.0, 0.87), (90.2, 1.3), (91.57, 0.38), (95.6, 0.21), (57.07, 0.31)], "other");
    other.save(cfg.data.translated_report.as_ref().unwrap()).unwrap();
    assert!(matches!(stage_report(&cfg, dir.path()), Err(Error::Mismatch(_))));
}
