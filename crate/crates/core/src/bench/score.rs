//! Block scoring against the stencil.
//!
//! | footprint                                       | points |
//! |-------------------------------------------------|--------|
//! | fully inside the nearest free square            | +2     |
//! | overlapping the nearest free square             | +1     |
//! | on the sheet, touching no square                | 0      |
//! | partially off the sheet                         | −1     |
//! | fully off the sheet                             | −2     |
//!
//! Containment is inclusive (a block flush with a square edge is inside),
//! overlap needs positive area. A square that earns points is consumed and
//! is not available to later blocks. Cube rotation is locked to the stencil,
//! so all tests are axis-aligned rectangles.

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::sim::StencilConfig;

/// Slack for float comparisons of edge positions (m).
pub const SCORE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub fn centered(c: Vec2, half: f64) -> Self {
        Self {
            min: c.add_scalar(-half),
            max: c.add_scalar(half),
        }
    }

    pub fn contains(&self, inner: &Rect) -> bool {
        inner.min.x >= self.min.x - SCORE_EPS
            && inner.min.y >= self.min.y - SCORE_EPS
            && inner.max.x <= self.max.x + SCORE_EPS
            && inner.max.y <= self.max.y + SCORE_EPS
    }

    pub fn overlaps(&self, other: &Rect) -> bool {
        self.min.x < other.max.x - SCORE_EPS
            && other.min.x < self.max.x - SCORE_EPS
            && self.min.y < other.max.y - SCORE_EPS
            && other.min.y < self.max.y - SCORE_EPS
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockScore {
    pub points: i32,
    /// Square the block was judged against, consumed when `points > 0`.
    pub square: Option<usize>,
}

/// Index of the nearest square not yet consumed; ties go to the lower index.
pub fn nearest_free_square(center: &Vec2, stencil: &StencilConfig, consumed: &[bool]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, _) in stencil.squares.iter().enumerate() {
        if consumed.get(i).copied().unwrap_or(false) {
            continue;
        }
        let d = (stencil.square_center(i) - center).norm_squared();
        if best.is_none_or(|(_, bd)| d < bd - 1e-15) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i)
}

/// Scores one resting block given its center on the stencil plane.
pub fn score_block(center: &Vec2, cube_edge: f64, stencil: &StencilConfig, consumed: &[bool]) -> BlockScore {
    let footprint = Rect::centered(*center, cube_edge / 2.0);
    let square = nearest_free_square(center, stencil, consumed);
    if let Some(i) = square {
        let target = Rect::centered(stencil.square_center(i), stencil.square_edge_m / 2.0);
        if target.contains(&footprint) {
            return BlockScore { points: 2, square };
        }
        if target.overlaps(&footprint) {
            return BlockScore { points: 1, square };
        }
    }
    let sheet = Rect {
        min: Vec2::new(stencil.sheet_min[0], stencil.sheet_min[1]),
        max: Vec2::new(stencil.sheet_max[0], stencil.sheet_max[1]),
    };
    let points = if sheet.contains(&footprint) {
        0
    } else if sheet.overlaps(&footprint) {
        -1
    } else {
        -2
    };
    BlockScore { points, square }
}

/// Scores blocks in placement order, consuming squares as they earn points.
#[derive(Debug, Clone)]
pub struct Scorer {
    stencil: StencilConfig,
    cube_edge: f64,
    consumed: Vec<bool>,
}

impl Scorer {
    pub fn new(stencil: StencilConfig, cube_edge: f64) -> Self {
        let consumed = vec![false; stencil.squares.len()];
        Self {
            stencil,
            cube_edge,
            consumed,
        }
    }

    pub fn score(&mut self, center: &Vec2) -> BlockScore {
        let s = score_block(center, self.cube_edge, &self.stencil, &self.consumed);
        if s.points > 0 {
            if let Some(i) = s.square {
                self.consumed[i] = true;
            }
        }
        s
    }
}
