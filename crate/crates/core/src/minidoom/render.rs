use std::sync::Arc;

use super::map::Pos;
use super::world::WorldState;

pub const CEILING: [f32; 3] = [0.25, 0.25, 0.35];
pub const FLOOR: [f32; 3] = [0.45, 0.40, 0.30];
pub const WALL: [f32; 3] = [0.60, 0.60, 0.60];
pub const MONSTER: [f32; 3] = [0.90, 0.10, 0.10];
pub const OBJECT: [f32; 3] = [0.10, 0.85, 0.20];

const MONSTER_HEIGHT: f64 = 0.8;
const OBJECT_HEIGHT: f64 = 0.4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ViewDims {
    pub height: usize,
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("view dimensions must be positive, got {height}x{width}")]
pub struct DimsError {
    pub height: usize,
    pub width: usize,
}

impl ViewDims {
    pub const PAPER: ViewDims = ViewDims { height: 84, width: 84 };

    pub fn new(height: usize, width: usize) -> Result<ViewDims, DimsError> {
        if height == 0 || width == 0 {
            return Err(DimsError { height, width });
        }
        Ok(ViewDims { height, width })
    }
}

/// RGB frame in height x width x channel order, values in [0, 1].
///
/// Pixel storage is shared, so clones are cheap.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub height: usize,
    pub width: usize,
    data: Arc<[f32]>,
}

impl Observation {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Observation {
        assert_eq!(data.len(), height * width * 3, "observation buffer size");
        Observation { height, width, data: data.into() }
    }

    pub fn zeros(height: usize, width: usize) -> Observation {
        Observation::new(height, width, vec![0.0; height * width * 3])
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn pixel(&self, row: usize, col: usize) -> [f32; 3] {
        let i = (row * self.width + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn dims(&self) -> ViewDims {
        ViewDims { height: self.height, width: self.width }
    }
}

fn shade(distance: f64) -> f32 {
    (1.0 / (1.0 + 0.25 * (distance - 0.5).max(0.0))) as f32
}

fn scaled(color: [f32; 3], s: f32) -> [f32; 3] {
    [color[0] * s, color[1] * s, color[2] * s]
}

#[derive(Clone, Copy, PartialEq)]
enum Sprite {
    Monster,
    Object,
}

struct ColumnHit {
    wall_dist: f64,
    side_face: bool,
    entity: Option<(f64, Sprite)>,
}

fn cast(state: &WorldState, cam: f64) -> ColumnHit {
    let (fx, fy) = state.heading.delta();
    let (rx, ry) = state.heading.right().delta();
    let dir_x = fx as f64 + rx as f64 * cam;
    let dir_y = fy as f64 + ry as f64 * cam;
    let px = state.agent.x as f64 + 0.5;
    let py = state.agent.y as f64 + 0.5;

    let mut map_x = state.agent.x as isize;
    let mut map_y = state.agent.y as isize;
    let delta_x = if dir_x == 0.0 { f64::INFINITY } else { (1.0 / dir_x).abs() };
    let delta_y = if dir_y == 0.0 { f64::INFINITY } else { (1.0 / dir_y).abs() };
    let (step_x, mut side_x) = if dir_x < 0.0 {
        (-1, (px - map_x as f64) * delta_x)
    } else {
        (1, (map_x as f64 + 1.0 - px) * delta_x)
    };
    let (step_y, mut side_y) = if dir_y < 0.0 {
        (-1, (py - map_y as f64) * delta_y)
    } else {
        (1, (map_y as f64 + 1.0 - py) * delta_y)
    };

    let mut entity = None;
    loop {
        let x_side = side_x < side_y;
        if x_side {
            side_x += delta_x;
            map_x += step_x;
        } else {
            side_y += delta_y;
            map_y += step_y;
        }
        let cell = Pos::new(map_x as usize, map_y as usize);
        if !state.map.is_floor(cell) {
            let dist = if x_side { side_x - delta_x } else { side_y - delta_y };
            // Faces perpendicular to the view direction are lit, side faces darker.
            let facing_axis_x = fx != 0;
            return ColumnHit { wall_dist: dist, side_face: x_side != facing_axis_x, entity };
        }
        if entity.is_none() {
            let fwd = ((map_x - state.agent.x as isize) * fx + (map_y - state.agent.y as isize) * fy) as f64;
            if state.monsters.iter().any(|m| m.pos == cell) {
                entity = Some((fwd, Sprite::Monster));
            } else if state.has_object(cell) {
                entity = Some((fwd, Sprite::Object));
            }
        }
    }
}

/// Column raycast from the agent's cell centre with a 90 degree field of view.
pub fn render(state: &WorldState, dims: ViewDims) -> Result<Observation, DimsError> {
    let ViewDims { height: h, width: w } = ViewDims::new(dims.height, dims.width)?;
    let mut data = vec![0.0f32; h * w * 3];
    let mid = h as f64 / 2.0;
    for col in 0..w {
        let cam = 2.0 * (col as f64 + 0.5) / w as f64 - 1.0;
        let hit = cast(state, cam);
        let wall_band = h as f64 / hit.wall_dist;
        let mut wall_color = scaled(WALL, shade(hit.wall_dist));
        if hit.side_face {
            wall_color = scaled(wall_color, 0.8);
        }
        let (wall_top, wall_bottom) = (mid - wall_band / 2.0, mid + wall_band / 2.0);
        let entity = hit.entity.map(|(d, sprite)| {
            let band = h as f64 / d;
            match sprite {
                // Monsters stand centred; objects sit on the floor.
                Sprite::Monster => (
                    mid - band * MONSTER_HEIGHT / 2.0,
                    mid + band * MONSTER_HEIGHT / 2.0,
                    scaled(MONSTER, shade(d)),
                ),
                Sprite::Object => (
                    mid + band / 2.0 - band * OBJECT_HEIGHT,
                    mid + band / 2.0,
                    scaled(OBJECT, shade(d)),
                ),
            }
        });
        for row in 0..h {
            let y = row as f64 + 0.5;
            let mut px = if y < mid { CEILING } else { FLOOR };
            if y >= wall_top && y < wall_bottom {
                px = wall_color;
            }
            if let Some((top, bottom, color)) = entity {
                if y >= top && y < bottom {
                    px = color;
                }
            }
            let i = (row * w + col) * 3;
            data[i..i + 3].copy_from_slice(&px);
        }
    }
    Ok(Observation::new(h, w, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minidoom::{load_map, EpisodeMode, Heading, WorldOptions};

    fn state(text: &str, h: Heading) -> WorldState {
        let map = Arc::new(load_map(text).unwrap());
        let opts = WorldOptions { view: ViewDims::new(21, 21).unwrap(), mode: EpisodeMode::UntilDeath };
        let (mut s, _) = WorldState::reset(map, 0, opts);
        s.heading = h;
        s
    }

    #[test]
    fn deterministic() {
        let s = state("#######\n#S..M.#\n#..O..#\n#######", Heading::East);
        let d = ViewDims::new(21, 21).unwrap();
        assert_eq!(render(&s, d).unwrap(), render(&s, d).unwrap());
    }

    #[test]
    fn all_wall_view_is_constant() {
        for h in Heading::ALL {
            let s = state("###\n#S#\n###", h);
            let obs = render(&s, ViewDims::new(16, 11).unwrap()).unwrap();
            for r in 0..16 {
                for c in 0..11 {
                    assert_eq!(obs.pixel(r, c), WALL, "{h:?} ({r},{c})");
                }
            }
        }
    }

    #[test]
    fn monster_death_changes_pixels() {
        let mut s = state("#######\n#S..M.#\n#######", Heading::East);
        let before = render(&s, ViewDims::new(21, 21).unwrap()).unwrap();
        s.monsters.clear();
        let after = render(&s, ViewDims::new(21, 21).unwrap()).unwrap();
        assert_ne!(before, after);
    }

    #[test]
    fn values_in_unit_range() {
        let s = state("#########\n#S.....M#\n#..O....#\n#.......#\n#########", Heading::East);
        let obs = render(&s, ViewDims::new(84, 84).unwrap()).unwrap();
        assert!(obs.data().iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(obs.data().iter().any(|&v| v == MONSTER[0] * shade(6.0)));
    }

    #[test]
    fn rejects_zero_dims() {
        assert!(ViewDims::new(0, 4).is_err());
        let s = state("###\n#S#\n###", Heading::North);
        assert!(render(&s, ViewDims { height: 4, width: 0 }).is_err());
    }
}
