use super::*;
use crate::sim::NoiseConfig;

fn scene() -> SceneConfig {
    SceneConfig::load(std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets/scene.json")).unwrap()
}

fn check_timing(r: &BenchReport) {
    let sum: f64 = r.blocks.iter().map(|b| b.pick_s + b.drop_s).sum::<f64>() + r.transit_s;
    assert!((sum - r.total_s).abs() < 0.02, "{sum} vs {}", r.total_s);
    assert!(r.total_score >= -16 && r.total_score <= 16);
}

#[test]
fn oracle_zero_noise_scores_full_and_repeats() {
    let a = run_oracle(&scene(), &BenchOptions::default()).unwrap();
    assert_eq!(a.aborted, None);
    assert_eq!(a.total_score, 16);
    assert_eq!(a.events().len(), 8);
    assert!(a.events().iter().all(|e| e.t_pick < e.t_drop));
    check_timing(&a);
    let b = run_oracle(&scene(), &BenchOptions::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn gaze_noise_keeps_score() {
    let sc = scene()
        .with_noise(NoiseConfig {
            gaze_sigma_px: 5.0,
            ..NoiseConfig::default()
        })
        .unwrap()
        .with_seed(3);
    let r = run_oracle(&sc, &BenchOptions::default()).unwrap();
    assert!(r.total_score >= 14, "{}", r.to_table());
}

#[test]
fn injected_estop_pauses_the_run() {
    let options = BenchOptions {
        inject_estop_at_ms: Some(3_000),
        estop_clear_after_ms: 2_000,
        ..BenchOptions::default()
    };
    let r = run_oracle(&scene(), &options).unwrap();
    assert_eq!(r.estop_count, 1);
    assert!(r.estop_paused_s >= 2.0);
    assert_eq!(r.total_score, 16);
    check_timing(&r);
}

#[test]
fn dropping_everything_off_sheet_scores_minus_16() {
    let sc = scene();
    let targets = sc.file.cubes.positions.clone();
    let config = OracleConfig {
        drop_targets: Some(targets),
        ..OracleConfig::default()
    };
    let mut policy = OraclePolicy::new(&sc.registry, config).unwrap();
    let r = run_protocol(&sc, &mut policy, &BenchOptions::default()).unwrap();
    assert_eq!(r.total_score, -16);
    assert_eq!(r.events().len(), 8);
}

/// Oracle that stops working after a number of blocks.
struct Quitter {
    inner: OraclePolicy,
    after: usize,
}

impl Policy for Quitter {
    fn decide(&mut self, lp: &ClosedLoop) -> Result<Vec2, PolicyError> {
        if self.inner.block >= self.after {
            return Ok(self.inner.config.rest_gaze);
        }
        self.inner.decide(lp)
    }
}

#[test]
fn abort_penalizes_unplaced_blocks() {
    let sc = scene();
    let mut policy = Quitter {
        inner: OraclePolicy::new(&sc.registry, OracleConfig::default()).unwrap(),
        after: 6,
    };
    let options = BenchOptions {
        stuck_after_ms: 20_000,
        ..BenchOptions::default()
    };
    let r = run_protocol(&sc, &mut policy, &options).unwrap();
    assert!(r.aborted.is_some());
    assert_eq!(r.events().len(), 6);
    assert_eq!(r.total_score, 12 - 4);
    check_timing(&r);
    assert!(r.to_table().contains("aborted"));
}

#[test]
fn report_formats() {
    let r = run_oracle(&scene(), &BenchOptions::default()).unwrap();
    let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(json["total_score"], 16);
    assert_eq!(json["blocks"].as_array().unwrap().len(), 8);
    let table = r.to_table();
    assert!(table.contains("score              16 / 16"));
    assert_eq!(table.lines().filter(|l| l.contains("+2")).count(), 8);
}
