//! Per-stage wall-clock latency of the frame pipeline.
//!
//! The workload is the closed loop driven by the oracle, so timings include
//! real fusion, projection and activation work with every marker in view.
//! Image-domain marker detection is not part of this pipeline and is not
//! measured.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::bench::{BenchError, OracleConfig, OraclePolicy};
use crate::runtime::{ClosedLoop, GazeInput, Pipeline, StageTimes, FRAME_MS};
use crate::sim::{SceneConfig, SceneError, World};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageStats {
    pub mean_ms: f64,
    pub std_ms: f64,
}

impl StageStats {
    fn from_samples(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return Self {
                mean_ms: 0.0,
                std_ms: 0.0,
            };
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = if samples.len() > 1 {
            samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean_ms: mean,
            std_ms: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub frames: usize,
    pub markers: usize,
    pub buttons: usize,
    pub fuse: StageStats,
    pub project_hit: StageStats,
    pub step: StageStats,
    pub servo: StageStats,
    pub total: StageStats,
}

impl LatencyReport {
    pub fn from_times(times: &[StageTimes], markers: usize, buttons: usize) -> Self {
        let ms = |f: fn(&StageTimes) -> Duration| -> Vec<f64> {
            times.iter().map(|t| f(t).as_secs_f64() * 1000.0).collect()
        };
        Self {
            frames: times.len(),
            markers,
            buttons,
            fuse: StageStats::from_samples(&ms(|t| t.fuse)),
            project_hit: StageStats::from_samples(&ms(|t| t.project_hit)),
            step: StageStats::from_samples(&ms(|t| t.step)),
            servo: StageStats::from_samples(&ms(|t| t.servo)),
            total: StageStats::from_samples(&ms(|t| t.total())),
        }
    }

    /// `(stage, stats, cumulative mean)` in pipeline order.
    pub fn rows(&self) -> [(&'static str, StageStats, f64); 4] {
        let c1 = self.fuse.mean_ms;
        let c2 = c1 + self.project_hit.mean_ms;
        let c3 = c2 + self.step.mean_ms;
        let c4 = c3 + self.servo.mean_ms;
        [
            ("fuse", self.fuse, c1),
            ("project+hit", self.project_hit, c2),
            ("step", self.step, c3),
            ("servo", self.servo, c4),
        ]
    }

    pub fn cumulative_means(&self) -> [f64; 4] {
        self.rows().map(|r| r.2)
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "Cumulative latency ({} frames, {} markers, {} buttons)",
            self.frames, self.markers, self.buttons
        );
        let _ = writeln!(s, "{:<12} {:>10} {:>10} {:>16}", "stage", "mean (ms)", "std (ms)", "cumulative (ms)");
        for (name, st, cum) in self.rows() {
            let _ = writeln!(s, "{:<12} {:>10.4} {:>10.4} {:>16.4}", name, st.mean_ms, st.std_ms, cum);
        }
        let _ = writeln!(
            s,
            "{:<12} {:>10.4} {:>10.4} {:>16.4}",
            "total", self.total.mean_ms, self.total.std_ms, self.total.mean_ms
        );
        s
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LatencyError {
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

fn oracle_loop(scene: &SceneConfig) -> Result<(ClosedLoop, OraclePolicy), BenchError> {
    let lp = ClosedLoop::new(World::new(scene.clone()))?;
    let policy = OraclePolicy::new(&scene.registry, OracleConfig::default())?;
    Ok((lp, policy))
}

/// Runs `seconds` of simulated activity and collects per-frame stage times.
pub fn collect_stage_times(scene: &SceneConfig, seconds: u64) -> Result<Vec<StageTimes>, BenchError> {
    let (mut lp, mut policy) = oracle_loop(scene)?;
    let frames = seconds * 1000 / FRAME_MS;
    let mut times = Vec::with_capacity(frames as usize);
    for _ in 0..frames {
        let gaze = policy.decide(&lp).unwrap_or(policy.config.rest_gaze);
        times.push(lp.frame(GazeInput::Target(gaze))?.times);
    }
    Ok(times)
}

pub fn measure_latency(scene: &SceneConfig, seconds: u64) -> Result<LatencyReport, BenchError> {
    let times = collect_stage_times(scene, seconds)?;
    Ok(LatencyReport::from_times(
        &times,
        scene.file.markers.len(),
        scene.registry.len(),
    ))
}

/// Mean projection plus hit-test time (ms) for the scene's registry with
/// `copies` extra copies of every button, over `frames` recorded frames.
///
/// Returns the best of `repeats` passes to damp scheduler noise.
pub fn project_hit_time(scene: &SceneConfig, copies: usize, frames: u64, repeats: usize) -> Result<f64, LatencyError> {
    let (mut lp, mut policy) = oracle_loop(scene)?;
    let mut records = Vec::new();
    for _ in 0..frames {
        let gaze = policy.decide(&lp).unwrap_or(policy.config.rest_gaze);
        records.push(lp.frame(GazeInput::Target(gaze)).map_err(BenchError::from)?.record);
    }
    let registry = scene.registry.replicated(copies);
    let pipeline = Pipeline::new(registry, &scene.pipeline, 0);
    let fused: Vec<_> = records.iter().map(|r| pipeline.fuse(&r.markers)).collect();
    let mut best = f64::INFINITY;
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        let mut hits = 0usize;
        for (r, f) in records.iter().zip(&fused) {
            let zones = pipeline.project(f);
            hits += Pipeline::hit_test(&zones, &r.gaze).len();
        }
        std::hint::black_box(hits);
        let per_frame = start.elapsed().as_secs_f64() * 1000.0 / records.len().max(1) as f64;
        best = best.min(per_frame);
    }
    Ok(best)
}
