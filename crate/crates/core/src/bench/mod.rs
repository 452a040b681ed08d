//! Block pick-and-place benchmark.
//!
//! Eight cubes are carried onto eight stencil squares through the gaze
//! interface alone. Each release is scored on the spot (see [`score`]); a run
//! that aborts counts every block still unplaced as −2.
//!
//! Timing follows the protocol form: a block's pick time runs from the end of
//! the previous block (or the start) to the grasp, its drop time from the
//! grasp to the release, and whatever follows the last release is transit.
//! Pick, drop and transit therefore add up to the total time exactly.

pub mod oracle;
pub mod score;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::runtime::{ClosedLoop, GazeInput, RuntimeError, SimEvent};
use crate::servo::ServoError;
use crate::sim::{SceneConfig, World};

pub use oracle::{OracleConfig, OraclePolicy, Phase, PolicyError};
pub use score::{score_block, BlockScore, Rect, Scorer};

/// Anything that chooses a fixation point each frame.
pub trait Policy {
    fn decide(&mut self, lp: &ClosedLoop) -> Result<Vec2, PolicyError>;
}

impl Policy for OraclePolicy {
    fn decide(&mut self, lp: &ClosedLoop) -> Result<Vec2, PolicyError> {
        OraclePolicy::decide(self, lp)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOptions {
    /// Abort when no block has been placed for this long (sim ms).
    pub stuck_after_ms: u64,
    /// Latch the e-stop at this sim time, as an external stop would.
    pub inject_estop_at_ms: Option<u64>,
    /// The operator clears a latched e-stop after this long.
    pub estop_clear_after_ms: u64,
    /// Recalibrate the gaze tracker every this many ms.
    pub recalibrate_every_ms: Option<u64>,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            stuck_after_ms: 120_000,
            inject_estop_at_ms: None,
            estop_clear_after_ms: 2_000,
            recalibrate_every_ms: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreEvent {
    pub block: usize,
    pub points: i32,
    pub square: Option<usize>,
    pub t_pick: u64,
    pub t_drop: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    pub block: usize,
    pub points: i32,
    pub placed: bool,
    pub square: Option<usize>,
    pub t_pick_ms: Option<u64>,
    pub t_drop_ms: Option<u64>,
    pub pick_s: f64,
    pub drop_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub seed: u64,
    pub total_score: i32,
    pub max_score: i32,
    pub blocks: Vec<BlockReport>,
    pub transit_s: f64,
    pub total_s: f64,
    /// Time spent with the e-stop latched; included in `total_s`.
    pub estop_paused_s: f64,
    pub recalibrations: u32,
    pub estop_count: u32,
    pub frames: u64,
    pub aborted: Option<String>,
}

impl BenchReport {
    pub fn events(&self) -> Vec<ScoreEvent> {
        self.blocks
            .iter()
            .filter_map(|b| {
                Some(ScoreEvent {
                    block: b.block,
                    points: b.points,
                    square: b.square,
                    t_pick: b.t_pick_ms?,
                    t_drop: b.t_drop_ms?,
                })
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    /// Plain-text table in the shape of the protocol score sheet.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "YCB block pick and place (seed {})", self.seed);
        let _ = writeln!(s, "{:>5}  {:>6}  {:>6}  {:>9}  {:>9}", "block", "points", "square", "pick (s)", "drop (s)");
        for b in &self.blocks {
            let square = b.square.map_or("-".to_string(), |q| (q + 1).to_string());
            let (pick, drop) = if b.placed {
                (format!("{:.2}", b.pick_s), format!("{:.2}", b.drop_s))
            } else {
                ("-".into(), "-".into())
            };
            let _ = writeln!(s, "{:>5}  {:>+6}  {:>6}  {:>9}  {:>9}", b.block + 1, b.points, square, pick, drop);
        }
        let _ = writeln!(s, "transit (s)        {:.2}", self.transit_s);
        let _ = writeln!(s, "total time (s)     {:.2}", self.total_s);
        let _ = writeln!(s, "e-stop paused (s)  {:.2}", self.estop_paused_s);
        let _ = writeln!(s, "score              {} / {}", self.total_score, self.max_score);
        let _ = writeln!(s, "recalibrations     {}", self.recalibrations);
        let _ = writeln!(s, "e-stops            {}", self.estop_count);
        if let Some(why) = &self.aborted {
            let _ = writeln!(s, "aborted            {why}");
        }
        s
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Servo(#[from] ServoError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("scene has {cubes} cubes and {squares} squares")]
    Layout { cubes: usize, squares: usize },
}

#[derive(Debug, Clone, Copy, Default)]
struct BlockTrack {
    t_pick: Option<u64>,
    score: Option<(BlockScore, u64)>,
}

/// Runs the protocol to completion or abort with the given policy.
///
/// Runtime faults are returned as errors; a stuck or failing policy ends the
/// run with a partial report whose `aborted` field says why.
pub fn run_protocol(scene: &SceneConfig, policy: &mut dyn Policy, options: &BenchOptions) -> Result<BenchReport, BenchError> {
    let file = &scene.file;
    if file.cubes.positions.len() != file.stencil.squares.len() {
        return Err(BenchError::Layout {
            cubes: file.cubes.positions.len(),
            squares: file.stencil.squares.len(),
        });
    }
    let n = file.cubes.positions.len();
    let mut lp = ClosedLoop::new(World::new(scene.clone()))?;
    let mut scorer = Scorer::new(file.stencil.clone(), file.cubes.edge_m);
    let mut blocks = vec![BlockTrack::default(); n];
    let mut last_progress = 0u64;
    let mut estop_since: Option<u64> = None;
    let mut paused_ms = 0u64;
    let mut injected = false;
    let mut next_recal = options.recalibrate_every_ms;
    let mut aborted = None;

    while blocks.iter().any(|b| b.score.is_none()) {
        let t = lp.state.t;
        if t.saturating_sub(last_progress) > options.stuck_after_ms {
            aborted = Some(format!(
                "no block placed for {} s (at {:.2} s)",
                options.stuck_after_ms / 1000,
                t as f64 / 1000.0
            ));
            break;
        }
        if let Some(at) = options.inject_estop_at_ms {
            if !injected && t >= at {
                lp.inject_estop();
                injected = true;
            }
        }
        if let Some(due) = next_recal {
            if t >= due {
                lp.recalibrate();
                next_recal = options.recalibrate_every_ms.map(|every| due + every);
            }
        }
        if lp.controller.safety.estop {
            let since = *estop_since.get_or_insert(t);
            if t - since >= options.estop_clear_after_ms {
                lp.clear_estop();
                paused_ms += t - since;
                estop_since = None;
            }
        }
        let gaze = match policy.decide(&lp) {
            Ok(g) => g,
            Err(e) => {
                aborted = Some(e.to_string());
                break;
            }
        };
        let step = lp.frame(GazeInput::Target(gaze))?;
        for ev in step.sim_events {
            match ev {
                SimEvent::Picked { cube, t } => {
                    if blocks[cube].score.is_none() {
                        blocks[cube].t_pick = Some(t);
                    }
                }
                SimEvent::Released { cube, t } => {
                    if blocks[cube].score.is_none() {
                        let c = lp.state.cubes[cube].position;
                        let s = scorer.score(&Vec2::new(c.x, c.y));
                        lp.state.score += s.points;
                        blocks[cube].score = Some((s, t));
                        last_progress = t;
                    }
                }
                SimEvent::EstopLatched { t } => {
                    estop_since.get_or_insert(t);
                }
            }
        }
    }
    if let Some(since) = estop_since {
        paused_ms += lp.state.t - since;
    }

    let t_end = lp.state.t;
    let mut placed: Vec<(usize, u64, u64, BlockScore)> = blocks
        .iter()
        .enumerate()
        .filter_map(|(i, b)| {
            let (s, t_drop) = b.score?;
            Some((i, b.t_pick.unwrap_or(t_drop), t_drop, s))
        })
        .collect();
    placed.sort_by_key(|p| p.2);
    let mut reports = Vec::with_capacity(n);
    let mut phase_start = 0u64;
    for &(i, t_pick, t_drop, s) in &placed {
        reports.push(BlockReport {
            block: i,
            points: s.points,
            placed: true,
            square: s.square,
            t_pick_ms: Some(t_pick),
            t_drop_ms: Some(t_drop),
            pick_s: (t_pick - phase_start) as f64 / 1000.0,
            drop_s: (t_drop - t_pick) as f64 / 1000.0,
        });
        phase_start = t_drop;
    }
    for (i, b) in blocks.iter().enumerate() {
        if b.score.is_none() {
            reports.push(BlockReport {
                block: i,
                points: -2,
                placed: false,
                square: None,
                t_pick_ms: None,
                t_drop_ms: None,
                pick_s: 0.0,
                drop_s: 0.0,
            });
        }
    }
    Ok(BenchReport {
        seed: file.seed,
        total_score: reports.iter().map(|b| b.points).sum(),
        max_score: 2 * n as i32,
        blocks: reports,
        transit_s: (t_end - phase_start) as f64 / 1000.0,
        total_s: t_end as f64 / 1000.0,
        estop_paused_s: paused_ms as f64 / 1000.0,
        recalibrations: lp.state.recalibrations,
        estop_count: lp.estop_count,
        frames: lp.frames,
        aborted,
    })
}

/// Runs the oracle with default settings.
pub fn run_oracle(scene: &SceneConfig, options: &BenchOptions) -> Result<BenchReport, BenchError> {
    let mut policy = OraclePolicy::new(&scene.registry, OracleConfig::default())?;
    run_protocol(scene, &mut policy, options)
}

#[cfg(test)]
mod tests;
