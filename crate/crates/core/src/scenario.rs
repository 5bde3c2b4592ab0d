//! Scenario configuration files and the built-in scenarios.
//!
//! Configurations are TOML documents. Every optional key is filled in on
//! load, so writing a loaded configuration back out reproduces it exactly:
//!
//! ```toml
//! name = "square16"
//! n_vehicles = 16
//! mode = "saturated"            # or "raw"
//!
//! [domain]
//! vertices = [[0, 0], [20, 0], [20, 20], [0, 20]]   # counter-clockwise, m
//! velocity = [0, 0]                                # optional, m/s
//!
//! [layout]
//! kind = "line"                 # or "explicit" with `positions`
//! offset = 5.0                  # gap between the domain and the line, m
//! spacing = 5.0                 # optional, default max(extent/(N-1), r_d)
//! direction = [1, 0]            # optional
//!
//! [sim]
//! v_max = 10.0
//! u_max = 3.0
//! dt = 0.01                     # optional
//! t_end = 120.0
//! eps_v = 0.001                 # optional
//!
//! [coverage]                    # whole section optional
//! r_d = "auto"                  # or a number
//! k_inter = 5.0                 # each gain defaults to 1
//! k_domain = 3.0
//! damping = 1.0
//!
//! [safety]
//! enabled = true
//! collision_radius = 2.0
//! t_safety = 5.0
//!
//! [output]                      # optional
//! dir = "out/square16"
//! tail_seconds = 5.0
//! snapshots = [0.0, 4.5, 11.0, 43.0]
//! ```

use std::f64::consts::FRAC_PI_4;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ParamError;
use crate::geom::{shapes, DomainSpec, GeomError, PolygonDomain};
use crate::potential::{r_d_heuristic, CoverageParams};
use crate::reachability::SafetyParams;
use crate::sim::{ControlMode, Scenario, SimParams, VehicleState, DEFAULT_EPS_V};
use crate::vec2::Vec2;

/// Default line spacing never drops below this multiple of the collision radius.
const MIN_LINE_SPACING_FACTOR: f64 = 1.5;

/// Spring and braking gains of the built-in scenarios: `(k_inter, k_domain, damping)`.
pub const BUILTIN_GAINS: (f64, f64, f64) = (5.0, 3.0, 1.0);

/// Half-width of the square each initial position is jittered within (m).
pub const LAYOUT_JITTER: f64 = 0.25;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid domain: {0}")]
    Domain(#[from] GeomError),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error("unknown built-in scenario `{0}` (expected square<N>, triangle<N> or arrow<N>)")]
    UnknownBuiltin(String),
}

/// Initial placement of the vehicles.
#[derive(Debug, Clone, PartialEq)]
pub enum Layout {
    /// Vehicles at rest on a segment parallel to `direction`, centered on the
    /// domain and `offset` metres beyond it on the side to the right of
    /// `direction`.
    Line {
        offset: f64,
        spacing: f64,
        direction: Vec2,
    },
    Explicit(Vec<VehicleState>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: String,
    /// Length of the position history drawn behind each vehicle (s).
    pub tail_seconds: f64,
    /// Times at which plot snapshots are written.
    pub snapshots: Vec<f64>,
}

/// A validated scenario with every default resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub domain: PolygonDomain,
    pub n_vehicles: usize,
    pub layout: Layout,
    pub params: SimParams,
    pub eps_v: f64,
    pub output: OutputConfig,
}

impl ScenarioConfig {
    pub fn initial_states(&self) -> Vec<VehicleState> {
        match &self.layout {
            Layout::Explicit(states) => states.clone(),
            Layout::Line {
                offset,
                spacing,
                direction,
            } => line_positions(&self.domain, self.n_vehicles, *offset, *spacing, *direction)
                .into_iter()
                .map(VehicleState::at_rest)
                .collect(),
        }
    }

    pub fn to_scenario(&self) -> Scenario {
        Scenario {
            domain: self.domain.clone(),
            initial: self.initial_states(),
            params: self.params,
        }
    }

    /// Re-check the invariants that the file format cannot express.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.n_vehicles == 0 {
            return Err(ScenarioError::Validation("n_vehicles must be at least 1".into()));
        }
        if !(self.eps_v.is_finite() && self.eps_v > 0.0) {
            return Err(ScenarioError::Validation("eps_v must be positive".into()));
        }
        let states = self.initial_states();
        if states.len() != self.n_vehicles {
            return Err(ScenarioError::Validation(format!(
                "layout gives {} vehicles but n_vehicles = {}",
                states.len(),
                self.n_vehicles
            )));
        }
        if let Some(i) = states.iter().position(|s| !s.is_finite()) {
            return Err(ScenarioError::Validation(format!("vehicle {i} has a non-finite state")));
        }
        if let Some(i) = states.iter().position(|s| s.v.norm() > self.params.v_max) {
            return Err(ScenarioError::Validation(format!("vehicle {i} starts faster than v_max")));
        }
        let c_r = self.params.safety.collision_radius;
        for i in 0..states.len() {
            for j in i + 1..states.len() {
                let d = states[i].p.distance(states[j].p);
                if d <= c_r {
                    return Err(ScenarioError::Validation(format!(
                        "unsafe initial condition: vehicles {i} and {j} are {d} m apart, \
                         within the collision radius {c_r} m"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Copy with every initial position moved uniformly within
    /// `±LAYOUT_JITTER` per axis, reproducibly from `seed`. The layout becomes
    /// explicit so the perturbed positions are written out with the config.
    pub fn with_layout_jitter(&self, seed: u64) -> Result<ScenarioConfig, ScenarioError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let states = self
            .initial_states()
            .into_iter()
            .map(|s| {
                let d = Vec2::new(
                    rng.gen_range(-LAYOUT_JITTER..=LAYOUT_JITTER),
                    rng.gen_range(-LAYOUT_JITTER..=LAYOUT_JITTER),
                );
                VehicleState::new(s.p + d, s.v)
            })
            .collect();
        let jittered = ScenarioConfig {
            layout: Layout::Explicit(states),
            ..self.clone()
        };
        jittered.validate()?;
        Ok(jittered)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(&ConfigFile::from(self)).expect("config serializes")
    }
}

/// Evenly spaced points on the line layout.
pub fn line_positions(
    domain: &PolygonDomain,
    n: usize,
    offset: f64,
    spacing: f64,
    direction: Vec2,
) -> Vec<Vec2> {
    let (center, dir, _) = line_frame(domain, offset, direction);
    let mid = (n as f64 - 1.0) / 2.0;
    (0..n)
        .map(|k| center + dir * (spacing * (k as f64 - mid)))
        .collect()
}

/// Center and unit direction of the line, and the domain's extent along it.
fn line_frame(domain: &PolygonDomain, offset: f64, direction: Vec2) -> (Vec2, Vec2, f64) {
    let dir = direction.normalized().unwrap_or(Vec2::new(1.0, 0.0));
    let normal = Vec2::new(dir.y, -dir.x);
    let c = domain.centroid(0.0);
    let (mut lo, mut hi, mut reach) = (f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for v in domain.vertices_at(0.0) {
        let r = v - c;
        lo = lo.min(r.dot(dir));
        hi = hi.max(r.dot(dir));
        reach = reach.max(r.dot(normal));
    }
    let center = c + normal * (reach + offset) + dir * (0.5 * (lo + hi));
    (center, dir, hi - lo)
}

/// Spread the line over the domain's extent, but keep neighbours at least
/// `r_d` apart so the swarm starts without inter-vehicle forces.
fn default_line_spacing(domain: &PolygonDomain, n: usize, direction: Vec2, r_d: f64, c_r: f64) -> f64 {
    let (_, _, width) = line_frame(domain, 0.0, direction);
    let floor = r_d.max(MIN_LINE_SPACING_FACTOR * c_r);
    if n < 2 {
        floor
    } else {
        (width / (n as f64 - 1.0)).max(floor)
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    file.resolve()
}

pub fn write_scenario(config: &ScenarioConfig, path: impl AsRef<Path>) -> std::io::Result<()> {
    std::fs::write(path, config.to_toml())
}

/// Resolve a built-in name or a configuration file path.
pub fn resolve(name_or_path: &str) -> Result<ScenarioConfig, ScenarioError> {
    match builtin(name_or_path) {
        Err(ScenarioError::UnknownBuiltin(name))
            if !name.contains(['/', '.']) && !Path::new(&name).exists() =>
        {
            Err(ScenarioError::UnknownBuiltin(name))
        }
        Err(ScenarioError::UnknownBuiltin(_)) => load_scenario(name_or_path),
        other => other,
    }
}

/// Which built-in domain a scenario family uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Square,
    Triangle,
    Arrow,
}

impl Family {
    pub fn parse(s: &str) -> Option<Family> {
        match s {
            "square" => Some(Family::Square),
            "triangle" => Some(Family::Triangle),
            "arrow" => Some(Family::Arrow),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Square => "square",
            Family::Triangle => "triangle",
            Family::Arrow => "arrow",
        }
    }
}

/// `square<N>`, `triangle<N>` or `arrow<N>`.
///
/// All share `c_r = 2 m`, `v_max = 10 m/s`, `u_max = 3 m/s²`,
/// `t_safety = 5 s` and `r_d = √(area / N)`. The square has side 20 m, the
/// triangle is equilateral with side `25√3/2` m, and the arrow has area
/// 225 m² and translates at `(0.3, 0.3)` m/s. Vehicles start at rest on a
/// line 5 m outside the domain, perpendicular to the arrow's motion.
pub fn builtin(name: &str) -> Result<ScenarioConfig, ScenarioError> {
    let split = name
        .find(|c: char| c.is_ascii_digit())
        .ok_or_else(|| ScenarioError::UnknownBuiltin(name.into()))?;
    let family =
        Family::parse(&name[..split]).ok_or_else(|| ScenarioError::UnknownBuiltin(name.into()))?;
    let n: usize = name[split..]
        .parse()
        .map_err(|_| ScenarioError::UnknownBuiltin(name.into()))?;
    family_scenario(family, n)
}

pub fn family_scenario(family: Family, n: usize) -> Result<ScenarioConfig, ScenarioError> {
    let (domain, t_end, direction, snapshots, tail) = match family {
        Family::Square => (
            shapes::square(20.0),
            120.0,
            Vec2::new(1.0, 0.0),
            vec![0.0, 4.5, 11.0, 43.0, 120.0],
            5.0,
        ),
        Family::Triangle => (
            shapes::equilateral_triangle(12.5 * 3f64.sqrt()),
            120.0,
            Vec2::new(1.0, 0.0),
            vec![0.0, 5.0, 15.0, 40.0, 120.0],
            5.0,
        ),
        Family::Arrow => (
            shapes::arrow(Vec2::new(5.0, 5.0), FRAC_PI_4, Vec2::new(0.3, 0.3)),
            70.0,
            Vec2::new(1.0, -1.0),
            vec![0.0, 9.0, 39.0, 69.0],
            30.0,
        ),
    };
    let file = ConfigFile {
        name: format!("{}{n}", family.name()),
        n_vehicles: n,
        mode: ModeName::Saturated,
        domain: domain.into(),
        layout: LayoutSpec::Line {
            offset: 5.0,
            spacing: None,
            direction: Some(direction),
        },
        sim: SimSection {
            v_max: 10.0,
            u_max: 3.0,
            dt: None,
            t_end,
            eps_v: None,
        },
        coverage: CoverageSection {
            k_inter: BUILTIN_GAINS.0,
            k_domain: BUILTIN_GAINS.1,
            damping: BUILTIN_GAINS.2,
            ..CoverageSection::default()
        },
        safety: SafetySection {
            enabled: true,
            collision_radius: 2.0,
            t_safety: 5.0,
        },
        output: Some(OutputSection {
            dir: None,
            tail_seconds: Some(tail),
            snapshots: Some(snapshots),
        }),
    };
    file.resolve()
}

// ---- file format ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
enum ModeName {
    #[default]
    Saturated,
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum Spacing {
    Fixed(f64),
    Auto(AutoWord),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum AutoWord {
    Auto,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    name: String,
    n_vehicles: usize,
    #[serde(default)]
    mode: ModeName,
    domain: DomainSpec,
    layout: LayoutSpec,
    sim: SimSection,
    #[serde(default)]
    coverage: CoverageSection,
    safety: SafetySection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    output: Option<OutputSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum LayoutSpec {
    Line {
        offset: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        spacing: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        direction: Option<Vec2>,
    },
    Explicit {
        positions: Vec<Vec2>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        velocities: Option<Vec<Vec2>>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimSection {
    v_max: f64,
    u_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dt: Option<f64>,
    t_end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eps_v: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoverageSection {
    #[serde(default = "auto")]
    r_d: Spacing,
    #[serde(default = "one")]
    k_inter: f64,
    #[serde(default = "one")]
    k_domain: f64,
    #[serde(default = "one")]
    damping: f64,
}

impl Default for CoverageSection {
    fn default() -> Self {
        Self {
            r_d: auto(),
            k_inter: 1.0,
            k_domain: 1.0,
            damping: 1.0,
        }
    }
}

fn auto() -> Spacing {
    Spacing::Auto(AutoWord::Auto)
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SafetySection {
    #[serde(default = "yes")]
    enabled: bool,
    collision_radius: f64,
    t_safety: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tail_seconds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    snapshots: Option<Vec<f64>>,
}

impl ConfigFile {
    fn resolve(self) -> Result<ScenarioConfig, ScenarioError> {
        let domain = PolygonDomain::try_from(self.domain)?;
        let n = self.n_vehicles;
        if n == 0 {
            return Err(ScenarioError::Validation("n_vehicles must be at least 1".into()));
        }
        let r_d = match self.coverage.r_d {
            Spacing::Fixed(r) => r,
            Spacing::Auto(_) => r_d_heuristic(domain.area(), n),
        };
        let coverage = CoverageParams::new(
            r_d,
            self.coverage.k_inter,
            self.coverage.k_domain,
            self.coverage.damping,
        )?;
        let safety = SafetyParams::new(
            self.safety.collision_radius,
            self.sim.u_max,
            self.safety.t_safety,
        )?;
        let mode = match self.mode {
            ModeName::Saturated => ControlMode::Saturated,
            ModeName::Raw => ControlMode::Raw,
        };
        let params = SimParams::new(
            self.sim.v_max,
            self.sim.dt.unwrap_or(0.01),
            self.sim.t_end,
            coverage,
            safety,
            mode,
            self.safety.enabled,
        )?;

        let layout = match self.layout {
            LayoutSpec::Line {
                offset,
                spacing,
                direction,
            } => {
                let direction = direction.unwrap_or(Vec2::new(1.0, 0.0));
                if direction.normalized().is_none() || !offset.is_finite() {
                    return Err(ScenarioError::Validation(
                        "line layout needs a finite offset and a nonzero direction".into(),
                    ));
                }
                let spacing = spacing.unwrap_or_else(|| {
                    default_line_spacing(&domain, n, direction, r_d, safety.collision_radius)
                });
                Layout::Line {
                    offset,
                    spacing,
                    direction,
                }
            }
            LayoutSpec::Explicit {
                positions,
                velocities,
            } => {
                let velocities = velocities.unwrap_or_else(|| vec![Vec2::ZERO; positions.len()]);
                if velocities.len() != positions.len() {
                    return Err(ScenarioError::Validation(
                        "explicit layout: positions and velocities differ in length".into(),
                    ));
                }
                Layout::Explicit(
                    positions
                        .into_iter()
                        .zip(velocities)
                        .map(|(p, v)| VehicleState::new(p, v))
                        .collect(),
                )
            }
        };

        let output = self.output.unwrap_or_default();
        let config = ScenarioConfig {
            output: OutputConfig {
                dir: output.dir.unwrap_or_else(|| format!("out/{}", self.name)),
                tail_seconds: output.tail_seconds.unwrap_or(5.0),
                snapshots: output.snapshots.unwrap_or_default(),
            },
            name: self.name,
            domain,
            n_vehicles: n,
            layout,
            params,
            eps_v: self.sim.eps_v.unwrap_or(DEFAULT_EPS_V),
        };
        config.validate()?;
        Ok(config)
    }
}

impl From<&ScenarioConfig> for ConfigFile {
    fn from(c: &ScenarioConfig) -> Self {
        let p = &c.params;
        let layout = match &c.layout {
            Layout::Line {
                offset,
                spacing,
                direction,
            } => LayoutSpec::Line {
                offset: *offset,
                spacing: Some(*spacing),
                direction: Some(*direction),
            },
            Layout::Explicit(states) => LayoutSpec::Explicit {
                positions: states.iter().map(|s| s.p).collect(),
                velocities: Some(states.iter().map(|s| s.v).collect()),
            },
        };
        ConfigFile {
            name: c.name.clone(),
            n_vehicles: c.n_vehicles,
            mode: match p.mode {
                ControlMode::Saturated => ModeName::Saturated,
                ControlMode::Raw => ModeName::Raw,
            },
            domain: c.domain.clone().into(),
            layout,
            sim: SimSection {
                v_max: p.v_max,
                u_max: p.safety.u_max,
                dt: Some(p.dt),
                t_end: p.t_end,
                eps_v: Some(c.eps_v),
            },
            coverage: CoverageSection {
                r_d: Spacing::Fixed(p.coverage.r_d),
                k_inter: p.coverage.k_inter,
                k_domain: p.coverage.k_domain,
                damping: p.coverage.damping,
            },
            safety: SafetySection {
                enabled: p.avoidance,
                collision_radius: p.safety.collision_radius,
                t_safety: p.safety.t_safety,
            },
            output: Some(OutputSection {
                dir: Some(c.output.dir.clone()),
                tail_seconds: Some(c.output.tail_seconds),
                snapshots: Some(c.output.snapshots.clone()),
            }),
        }
    }
}
