//! Spatiotemporal cube grid: mapping GPS points to `(x, y, t)` cube indices
//! and back, the neighbor-cube relation, and gap interpolation.
//!
//! Cubes are linearised as `id = x + g_w * (y + g_h * t)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("point ({lon}, {lat}, {time}) lies outside the domain")]
    PointOutOfDomain { lon: f64, lat: f64, time: f64 },
    #[error("cube ({x}, {y}, {t}) lies outside the grid")]
    CubeOutOfGrid { x: u32, y: u32, t: u32 },
    #[error("time index goes backwards: {from} -> {to}")]
    NonMonotonicTime { from: u32, to: u32 },
    #[error("trajectory has no points inside the domain")]
    EmptyAfterFiltering,
    #[error("timestamps not strictly increasing at point {index}")]
    UnsortedTimestamps { index: usize },
}

/// A raw GPS point: longitude and latitude in degrees, time in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub lon: f64,
    pub lat: f64,
    pub time: f64,
}

impl Point {
    pub fn new(lon: f64, lat: f64, time: f64) -> Self {
        Self { lon, lat, time }
    }
}

/// Continuous bounding box and time window covered by the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatioTemporalDomain {
    pub left: f64,
    pub right: f64,
    pub bottom: f64,
    pub top: f64,
    pub s_time: f64,
    pub e_time: f64,
}

impl SpatioTemporalDomain {
    pub fn new(
        left: f64,
        right: f64,
        bottom: f64,
        top: f64,
        s_time: f64,
        e_time: f64,
    ) -> Result<Self, GridError> {
        let dom = Self {
            left,
            right,
            bottom,
            top,
            s_time,
            e_time,
        };
        dom.validate()?;
        Ok(dom)
    }

    pub fn validate(&self) -> Result<(), GridError> {
        let all = [
            self.left,
            self.right,
            self.bottom,
            self.top,
            self.s_time,
            self.e_time,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(GridError::InvalidDomain("non-finite bound".into()));
        }
        if !(self.left < self.right) {
            return Err(GridError::InvalidDomain(format!(
                "left {} must be < right {}",
                self.left, self.right
            )));
        }
        if !(self.bottom < self.top) {
            return Err(GridError::InvalidDomain(format!(
                "bottom {} must be < top {}",
                self.bottom, self.top
            )));
        }
        if !(self.s_time < self.e_time) {
            return Err(GridError::InvalidDomain(format!(
                "s_time {} must be < e_time {}",
                self.s_time, self.e_time
            )));
        }
        Ok(())
    }

    pub fn contains_space(&self, lon: f64, lat: f64) -> bool {
        lon >= self.left && lon <= self.right && lat >= self.bottom && lat <= self.top
    }

    pub fn contains_time(&self, time: f64) -> bool {
        time >= self.s_time && time <= self.e_time
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.contains_space(p.lon, p.lat) && self.contains_time(p.time)
    }
}

/// Cell counts along each axis plus the dwell-jump parameter `v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    pub g_w: u32,
    pub g_h: u32,
    pub g_t: u32,
    pub v: u32,
}

impl GridSpec {
    pub fn new(g_w: u32, g_h: u32, g_t: u32, v: u32) -> Result<Self, GridError> {
        let g = Self { g_w, g_h, g_t, v };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), GridError> {
        if self.g_w == 0 || self.g_h == 0 || self.g_t == 0 {
            return Err(GridError::InvalidGrid(format!(
                "cell counts must be positive, got {}x{}x{}",
                self.g_w, self.g_h, self.g_t
            )));
        }
        if self.v == 0 {
            return Err(GridError::InvalidGrid("v must be >= 1".into()));
        }
        if (self.g_w as u64) * (self.g_h as u64) * (self.g_t as u64) > u32::MAX as u64 {
            return Err(GridError::InvalidGrid("too many cubes".into()));
        }
        Ok(())
    }

    /// Total number of cubes, `|ST|`.
    pub fn num_cubes(&self) -> usize {
        self.g_w as usize * self.g_h as usize * self.g_t as usize
    }

    pub fn contains(&self, c: Cube) -> bool {
        c.x < self.g_w && c.y < self.g_h && c.t < self.g_t
    }

    pub fn check(&self, c: Cube) -> Result<(), GridError> {
        if self.contains(c) {
            Ok(())
        } else {
            Err(GridError::CubeOutOfGrid {
                x: c.x,
                y: c.y,
                t: c.t,
            })
        }
    }

    pub fn cube_id(&self, c: Cube) -> usize {
        c.x as usize + self.g_w as usize * (c.y as usize + self.g_h as usize * c.t as usize)
    }

    pub fn cube_at(&self, id: usize) -> Cube {
        let w = self.g_w as usize;
        let h = self.g_h as usize;
        Cube {
            x: (id % w) as u32,
            y: ((id / w) % h) as u32,
            t: (id / (w * h)) as u32,
        }
    }

    pub fn cell_sizes(&self, dom: &SpatioTemporalDomain) -> (f64, f64, f64) {
        (
            (dom.right - dom.left) / self.g_w as f64,
            (dom.top - dom.bottom) / self.g_h as f64,
            (dom.e_time - dom.s_time) / self.g_t as f64,
        )
    }
}

/// One cell of the `g_w × g_h × g_t` decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cube {
    pub x: u32,
    pub y: u32,
    pub t: u32,
}

impl Cube {
    pub const fn new(x: u32, y: u32, t: u32) -> Self {
        Self { x, y, t }
    }
}

/// Neighbor-linked cube sequence. `terminated` marks the appended stop symbol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CubeTrajectory {
    pub cubes: Vec<Cube>,
    pub terminated: bool,
}

impl CubeTrajectory {
    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    /// Returns the index of the first pair that breaks an invariant, if any.
    pub fn first_violation(&self, g: &GridSpec) -> Option<usize> {
        if self.cubes.is_empty() {
            return Some(0);
        }
        if let Some(i) = self.cubes.iter().position(|c| !g.contains(*c)) {
            return Some(i);
        }
        self.cubes
            .windows(2)
            .position(|w| !is_neighbor(w[0], w[1], g))
            .map(|i| i + 1)
    }

    pub fn is_valid(&self, g: &GridSpec) -> bool {
        self.first_violation(g).is_none()
    }
}

pub(crate) fn axis_index(value: f64, origin: f64, size: f64, cells: u32) -> u32 {
    let raw = ((value - origin) / size).floor();
    if raw <= 0.0 {
        0
    } else if raw >= cells as f64 {
        cells - 1
    } else {
        raw as u32
    }
}

/// Floor-divides a point into its cube. Points on the right/top/end
/// boundary land in the last cell.
pub fn discretize_point(
    p: &Point,
    dom: &SpatioTemporalDomain,
    g: &GridSpec,
) -> Result<Cube, GridError> {
    if !dom.contains(p) {
        return Err(GridError::PointOutOfDomain {
            lon: p.lon,
            lat: p.lat,
            time: p.time,
        });
    }
    let (dw, dh, dt) = g.cell_sizes(dom);
    Ok(Cube {
        x: axis_index(p.lon, dom.left, dw, g.g_w),
        y: axis_index(p.lat, dom.bottom, dh, g.g_h),
        t: axis_index(p.time, dom.s_time, dt, g.g_t),
    })
}

/// Center of a cube in continuous coordinates.
pub fn cube_center(c: Cube, dom: &SpatioTemporalDomain, g: &GridSpec) -> Result<Point, GridError> {
    g.check(c)?;
    let (dw, dh, dt) = g.cell_sizes(dom);
    Ok(Point {
        lon: dom.left + c.x as f64 * dw + dw / 2.0,
        lat: dom.bottom + c.y as f64 * dh + dh / 2.0,
        time: dom.s_time + c.t as f64 * dt + dt / 2.0,
    })
}

/// Whether `to` is reachable from `from` in one step: a spatial move of at
/// most one cell with time advancing by 0 or 1, or a dwell in the same
/// spatial cell advancing time by `1..=v`.
pub fn is_neighbor(from: Cube, to: Cube, g: &GridSpec) -> bool {
    if to.t < from.t {
        return false;
    }
    let dt = to.t - from.t;
    let same_cell = from.x == to.x && from.y == to.y;
    let adjacent = from.x.abs_diff(to.x) <= 1 && from.y.abs_diff(to.y) <= 1;
    (adjacent && dt <= 1 && from != to) || (same_cell && dt >= 1 && dt <= g.v)
}

/// All in-grid neighbors of `c`, ordered by x, then y, then t.
pub fn neighbors(c: Cube, g: &GridSpec) -> Vec<Cube> {
    let mut out = Vec::new();
    let dt_max = g.v.max(1);
    for x in c.x.saturating_sub(1)..=(c.x + 1).min(g.g_w - 1) {
        for y in c.y.saturating_sub(1)..=(c.y + 1).min(g.g_h - 1) {
            let t_hi = (c.t as u64 + dt_max as u64).min(g.g_t as u64 - 1) as u32;
            for t in c.t..=t_hi {
                let b = Cube { x, y, t };
                if is_neighbor(c, b, g) {
                    out.push(b);
                }
            }
        }
    }
    out
}

fn step_toward(from: u32, to: u32) -> u32 {
    match from.cmp(&to) {
        std::cmp::Ordering::Less => from + 1,
        std::cmp::Ordering::Greater => from - 1,
        std::cmp::Ordering::Equal => from,
    }
}

/// Cubes strictly between `from` and `to` on the unit-stepping path. Every
/// differing coordinate moves one unit per hop, so each hop is a neighbor
/// step. Empty when `to` is already a neighbor of `from`.
pub fn interpolate_gap(from: Cube, to: Cube, g: &GridSpec) -> Result<Vec<Cube>, GridError> {
    if to.t < from.t {
        return Err(GridError::NonMonotonicTime {
            from: from.t,
            to: to.t,
        });
    }
    if from == to || is_neighbor(from, to, g) {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut cur = from;
    loop {
        cur = Cube {
            x: step_toward(cur.x, to.x),
            y: step_toward(cur.y, to.y),
            t: step_toward(cur.t, to.t),
        };
        if cur == to {
            break;
        }
        out.push(cur);
    }
    Ok(out)
}

fn collapse_repeats(cubes: &mut Vec<Cube>) {
    cubes.dedup();
}

/// Turns a raw trajectory into a terminated cube trajectory. Points outside
/// the domain are dropped; timestamps must be strictly increasing.
pub fn discretize_trajectory(
    points: &[Point],
    dom: &SpatioTemporalDomain,
    g: &GridSpec,
) -> Result<CubeTrajectory, GridError> {
    if let Some(i) = points.windows(2).position(|w| !(w[0].time < w[1].time)) {
        return Err(GridError::UnsortedTimestamps { index: i + 1 });
    }
    let mut raw: Vec<Cube> = points
        .iter()
        .filter(|p| dom.contains(p))
        .map(|p| discretize_point(p, dom, g))
        .collect::<Result<_, _>>()?;
    if raw.is_empty() {
        return Err(GridError::EmptyAfterFiltering);
    }
    collapse_repeats(&mut raw);

    let mut cubes = Vec::with_capacity(raw.len());
    cubes.push(raw[0]);
    for pair in raw.windows(2) {
        cubes.extend(interpolate_gap(pair[0], pair[1], g)?);
        cubes.push(pair[1]);
    }
    collapse_repeats(&mut cubes);
    Ok(CubeTrajectory {
        cubes,
        terminated: true,
    })
}
