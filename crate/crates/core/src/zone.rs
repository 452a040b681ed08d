//! Interaction zone projection and gaze hit testing.

use serde::{Deserialize, Serialize};

use crate::fusion::FusedButtonPose;
use crate::geometry::{project_point, CameraIntrinsics, Vec2};
use crate::registry::ZoneCorners;

/// Projected quads smaller than this (px²) are treated as invisible.
pub const MIN_VISIBLE_AREA: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedZone {
    pub button_id: String,
    /// Pixel corners, same order as the button's [`ZoneCorners`].
    #[serde(with = "quad_array")]
    pub quad: [Vec2; 4],
    pub visible: bool,
}

impl ProjectedZone {
    pub fn centroid(&self) -> Vec2 {
        self.quad.iter().sum::<Vec2>() / 4.0
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.quad).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeSample {
    pub u: f64,
    pub v: f64,
    pub valid: bool,
    #[serde(skip)]
    pub t: u64,
}

impl GazeSample {
    pub fn at(u: f64, v: f64, t: u64) -> Self {
        Self { u, v, valid: true, t }
    }

    pub fn invalid(t: u64) -> Self {
        Self {
            u: 0.0,
            v: 0.0,
            valid: false,
            t,
        }
    }

    pub fn point(&self) -> Vec2 {
        Vec2::new(self.u, self.v)
    }
}

fn polygon_area(quad: &[Vec2; 4]) -> f64 {
    (0..4)
        .map(|i| {
            let (a, b) = (quad[i], quad[(i + 1) % 4]);
            a.x * b.y - b.x * a.y
        })
        .sum::<f64>()
        / 2.0
}

/// Transforms the zone corners by the fused button pose and projects them.
pub fn project_zone(fused: &FusedButtonPose, corners: &ZoneCorners, k: &CameraIntrinsics) -> ProjectedZone {
    let mut quad = [Vec2::zeros(); 4];
    let mut visible = true;
    for (dst, corner) in quad.iter_mut().zip(corners.0.iter()) {
        match project_point(k, &fused.pose.transform_point(corner)) {
            Ok(px) => *dst = px,
            Err(_) => visible = false,
        }
    }
    let mut zone = ProjectedZone {
        button_id: fused.button_id.clone(),
        quad,
        visible,
    };
    if zone.visible && !(zone.area() >= MIN_VISIBLE_AREA) {
        zone.visible = false;
    }
    zone
}

/// Crossing-number containment with the boundary counted as inside.
pub fn point_in_quad(quad: &[Vec2; 4], p: &Vec2) -> bool {
    let mut inside = false;
    for i in 0..4 {
        let a = quad[i];
        let b = quad[(i + 1) % 4];
        if on_segment(&a, &b, p) {
            return true;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

fn on_segment(a: &Vec2, b: &Vec2, p: &Vec2) -> bool {
    let ab = b - a;
    let ap = p - a;
    let cross = ab.x * ap.y - ab.y * ap.x;
    let scale = ab.norm().max(1.0);
    if cross.abs() > 1e-9 * scale {
        return false;
    }
    let dot = ab.dot(&ap);
    dot >= 0.0 && dot <= ab.norm_squared()
}

pub fn gaze_hit(zone: &ProjectedZone, gaze: &GazeSample) -> bool {
    zone.visible && gaze.valid && point_in_quad(&zone.quad, &gaze.point())
}

mod quad_array {
    use super::Vec2;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(q: &[Vec2; 4], s: S) -> Result<S::Ok, S::Error> {
        q.map(|p| [p.x, p.y]).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[Vec2; 4], D::Error> {
        let raw = <[[f64; 2]; 4]>::deserialize(d)?;
        Ok(raw.map(|[x, y]| Vec2::new(x, y)))
    }
}
