//! Stage orchestration behind the `framerestore` command line: degrade,
//! split, train, translate, detect-eval, report and the synthetic
//! end-to-end run.

mod config;
mod e2e;
mod stages;
mod strips;

pub use config::{DataPaths, PipelineConfig, Scenario, SyntheticConfig};
pub use e2e::{e2e_synthetic, E2eSummary, RestorationSummary};
pub use stages::{
    check_hash, deterministic_mode, domain_tensors, find_checkpoint, load_frame, load_input_manifest, quantize,
    render_single, run_scenario, scenario_header, stage_degrade, stage_detect_eval, stage_report, stage_split,
    stage_train, stage_translate, train_on, translate_manifest, ScenarioOutcome, TrainSummary, TranslateOutcome,
    DETERMINISTIC_ENV, REFERENCE_FPS_LINE,
};
pub use strips::{overlay_boxes, strip, write_strip};
