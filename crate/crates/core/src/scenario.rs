//! Field layout, target mobility and event generation for the detection and
//! relay workload.

use rand::Rng;

use crate::frame::EventId;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance(self, other: Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    JitteredGrid,
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioParams {
    /// m
    pub width: f64,
    /// m
    pub height: f64,
    /// sensors excluding the base station
    pub n_sensors: usize,
    pub n_targets: usize,
    pub n_radio_targets: usize,
    /// s
    pub event_period: f64,
    /// s, upper bound of the uniform extra delay
    pub event_jitter: f64,
    /// m
    pub detection_range: f64,
    /// m/s
    pub target_speed: f64,
    /// s
    pub sim_duration: f64,
    /// defaults to the midpoint of the left edge
    pub base_position: Option<Position>,
    pub placement: Placement,
    /// fraction of pitch, uniform in +-fraction
    pub grid_jitter: f64,
    /// s before a detection is reported unidentified
    pub identification_timeout: f64,
    /// s
    pub mobility_tick: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            width: 140.0,
            height: 70.0,
            n_sensors: 59,
            n_targets: 6,
            n_radio_targets: 2,
            event_period: 1.0,
            event_jitter: 0.1,
            detection_range: 15.0,
            target_speed: 1.0,
            sim_duration: 100.0,
            base_position: None,
            placement: Placement::JitteredGrid,
            grid_jitter: 0.2,
            identification_timeout: 0.05,
            mobility_tick: 0.1,
        }
    }
}

impl ScenarioParams {
    pub fn base(&self) -> Position {
        self.base_position
            .unwrap_or(Position::new(0.0, self.height / 2.0))
    }

    pub fn contains(&self, p: Position) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }

    pub fn diagonal(&self) -> f64 {
        self.width.hypot(self.height)
    }

    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if !(self.width > 0.0 && self.height > 0.0) {
            return Err(("scenario.width", "area dimensions must be > 0".into()));
        }
        if self.n_sensors == 0 {
            return Err(("scenario.n_sensors", "must be >= 1".into()));
        }
        if self.n_radio_targets > self.n_targets {
            return Err((
                "scenario.n_radio_targets",
                "must not exceed scenario.n_targets".into(),
            ));
        }
        if !(self.event_period > 0.0) {
            return Err(("scenario.event_period", "must be > 0".into()));
        }
        if !(self.event_jitter >= 0.0) {
            return Err(("scenario.event_jitter", "must be >= 0".into()));
        }
        if !(self.detection_range > 0.0) {
            return Err(("scenario.detection_range", "must be > 0".into()));
        }
        if !(self.target_speed >= 0.0) {
            return Err(("scenario.target_speed", "must be >= 0".into()));
        }
        if !(self.sim_duration > 0.0) {
            return Err(("scenario.sim_duration", "must be > 0".into()));
        }
        if !(0.0..0.5).contains(&self.grid_jitter) {
            return Err(("scenario.grid_jitter", "must be in [0, 0.5)".into()));
        }
        if !(self.identification_timeout > 0.0) {
            return Err(("scenario.identification_timeout", "must be > 0".into()));
        }
        if !(self.mobility_tick > 0.0) {
            return Err(("scenario.mobility_tick", "must be > 0".into()));
        }
        if !self.contains(self.base()) {
            return Err(("scenario.base_x", "base station outside the area".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub base: Position,
    pub sensors: Vec<Position>,
    /// (columns, rows); (0, 0) for uniform placement
    pub grid: (usize, usize),
    /// (x, y) pitch in metres
    pub pitch: (f64, f64),
}

/// Largest grid pitch, as a fraction of the maximum hop distance.
pub const MAX_PITCH_FRACTION: f64 = 0.7;

/// Grid dimensions with pitch at most `max_pitch` and at least `n` cells,
/// growing whichever dimension currently has the coarser pitch.
pub fn grid_dimensions(
    width: f64,
    height: f64,
    n: usize,
    max_pitch: f64,
) -> Result<(usize, usize), String> {
    let mut cols = (width / max_pitch).ceil().max(1.0) as usize;
    let mut rows = (height / max_pitch).ceil().max(1.0) as usize;
    if cols * rows > n {
        return Err(format!(
            "{n} sensors cannot cover {width} x {height} m at pitch <= {max_pitch:.3} m \
             (needs {cols} x {rows} = {} cells)",
            cols * rows
        ));
    }
    while cols * rows < n {
        if width / cols as f64 > height / rows as f64 {
            cols += 1;
        } else {
            rows += 1;
        }
    }
    Ok((cols, rows))
}

/// Places sensors and the base station.
pub fn place_nodes<R: Rng>(
    params: &ScenarioParams,
    max_hop: f64,
    rng: &mut R,
) -> Result<Layout, String> {
    let base = params.base();
    match params.placement {
        Placement::Uniform => {
            let sensors = (0..params.n_sensors)
                .map(|_| {
                    Position::new(
                        rng.gen_range(0.0..=params.width),
                        rng.gen_range(0.0..=params.height),
                    )
                })
                .collect();
            Ok(Layout {
                base,
                sensors,
                grid: (0, 0),
                pitch: (0.0, 0.0),
            })
        }
        Placement::JitteredGrid => {
            let max_pitch = MAX_PITCH_FRACTION * max_hop;
            let (cols, rows) =
                grid_dimensions(params.width, params.height, params.n_sensors, max_pitch)?;
            let px = params.width / cols as f64;
            let py = params.height / rows as f64;
            let j = params.grid_jitter;
            let mut sensors = Vec::with_capacity(params.n_sensors);
            'fill: for r in 0..rows {
                for c in 0..cols {
                    if sensors.len() == params.n_sensors {
                        break 'fill;
                    }
                    let cx = (c as f64 + 0.5) * px;
                    let cy = (r as f64 + 0.5) * py;
                    let (dx, dy) = if j > 0.0 {
                        (rng.gen_range(-j..=j) * px, rng.gen_range(-j..=j) * py)
                    } else {
                        (0.0, 0.0)
                    };
                    sensors.push(Position::new(
                        (cx + dx).clamp(0.0, params.width),
                        (cy + dy).clamp(0.0, params.height),
                    ));
                }
            }
            Ok(Layout {
                base,
                sensors,
                grid: (cols, rows),
                pitch: (px, py),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub index: usize,
    pub position: Position,
    pub waypoint: Option<Position>,
    pub radio: bool,
    pub emitted: u64,
}

impl Target {
    pub fn new(index: usize, position: Position, radio: bool) -> Self {
        Target {
            index,
            position,
            waypoint: None,
            radio,
            emitted: 0,
        }
    }
}

fn random_point<R: Rng>(params: &ScenarioParams, rng: &mut R) -> Position {
    Position::new(
        rng.gen_range(0.0..=params.width),
        rng.gen_range(0.0..=params.height),
    )
}

pub fn spawn_targets<R: Rng>(params: &ScenarioParams, rng: &mut R) -> Vec<Target> {
    (0..params.n_targets)
        .map(|i| Target::new(i, random_point(params, rng), i < params.n_radio_targets))
        .collect()
}

/// One random-waypoint tick of `dt` seconds.
pub fn mobility_step<R: Rng>(target: &mut Target, params: &ScenarioParams, dt: f64, rng: &mut R) {
    if params.target_speed <= 0.0 {
        return;
    }
    let wp = *target
        .waypoint
        .get_or_insert_with(|| random_point(params, rng));
    let step = params.target_speed * dt;
    let dist = target.position.distance(wp);
    if dist <= step {
        target.position = wp;
        target.waypoint = Some(random_point(params, rng));
    } else {
        let f = step / dist;
        target.position = Position::new(
            target.position.x + (wp.x - target.position.x) * f,
            target.position.y + (wp.y - target.position.y) * f,
        );
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppEvent {
    pub id: EventId,
    pub emit_time: f64,
    pub emit_position: Position,
}

/// Emits the target's next event at `now`.
pub fn emit_event(target: &mut Target, now: f64) -> AppEvent {
    let id = EventId {
        target: target.index,
        counter: target.emitted,
    };
    target.emitted += 1;
    AppEvent {
        id,
        emit_time: now,
        emit_position: target.position,
    }
}

/// Delay until the next emission: one period plus a uniform jitter draw.
pub fn next_emission_delay<R: Rng>(params: &ScenarioParams, rng: &mut R) -> f64 {
    if params.event_jitter > 0.0 {
        params.event_period + rng.gen_range(0.0..=params.event_jitter)
    } else {
        params.event_period
    }
}

/// Indices of sensors within detection range of `at`.
pub fn detecting_sensors(at: Position, sensors: &[Position], range: f64) -> Vec<usize> {
    sensors
        .iter()
        .enumerate()
        .filter(|(_, p)| p.distance(at) <= range)
        .map(|(i, _)| i)
        .collect()
}
