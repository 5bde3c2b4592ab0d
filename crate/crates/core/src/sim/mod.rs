//! Closed-loop simulation: per-vehicle control switching, saturated
//! double-integrator stepping, and run bookkeeping.
//!
//! Every step computes all controls from the same time-`t` snapshot, then
//! advances each vehicle with semi-implicit Euler:
//!
//! ```text
//! v' = clip(v + u dt, v_max),   p' = p + v' dt
//! ```
//!
//! A vehicle uses the coverage controller unless some other vehicle's time to
//! reach is within the conflict horizon, in which case it evades the
//! lowest-indexed such vehicle.

mod events;

pub use events::{detect_collision_events, scan_distance_trace, CollisionEvent};

use thiserror::Error;

use crate::error::{require_positive, ParamError};
use crate::geom::PolygonDomain;
use crate::potential::{
    coverage_control, lyapunov_energy, CoverageError, CoverageParams, COINCIDENT_EPS,
};
use crate::reachability::{avoid_control, time_to_reach, RelativeState, SafetyParams};
pub use crate::state::VehicleState;
use crate::vec2::Vec2;

/// Largest admissible integration step (s).
pub const MAX_DT: f64 = 0.05;
/// Default steady-state speed threshold (m/s).
pub const DEFAULT_EPS_V: f64 = 1e-3;
/// Slack in the r-subcover inequalities.
pub const SUBCOVER_TOL: f64 = 1e-6;

/// How the coverage control is turned into an applied acceleration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ControlMode {
    /// Scale every control to the acceleration bound.
    Saturated,
    /// Apply the potential-based control as is (Lyapunov analysis setting).
    Raw,
}

/// Which controller produced a vehicle's input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ControlSource {
    Coverage,
    Safety,
    /// Conflict detected but the avoidance gradient was undefined; fled radially.
    Fallback,
}

impl ControlSource {
    pub fn tag(self) -> &'static str {
        match self {
            ControlSource::Coverage => "coverage",
            ControlSource::Safety => "safety",
            ControlSource::Fallback => "fallback",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "coverage" => Some(ControlSource::Coverage),
            "safety" => Some(ControlSource::Safety),
            "fallback" => Some(ControlSource::Fallback),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimParams {
    /// Speed bound (m/s).
    pub v_max: f64,
    /// Step (s).
    pub dt: f64,
    /// Final time (s).
    pub t_end: f64,
    pub coverage: CoverageParams,
    /// Collision radius, acceleration bound and conflict horizon.
    pub safety: SafetyParams,
    pub mode: ControlMode,
    /// Whether the pairwise avoidance controller may override coverage.
    pub avoidance: bool,
}

impl SimParams {
    pub fn new(
        v_max: f64,
        dt: f64,
        t_end: f64,
        coverage: CoverageParams,
        safety: SafetyParams,
        mode: ControlMode,
        avoidance: bool,
    ) -> Result<Self, ParamError> {
        require_positive("v_max", v_max)?;
        require_positive("dt", dt)?;
        require_positive("t_end", t_end)?;
        if dt > MAX_DT {
            return Err(ParamError {
                name: "dt",
                value: dt,
                reason: "must not exceed 0.05 s",
            });
        }
        if safety.t_safety <= dt {
            return Err(ParamError {
                name: "t_safety",
                value: safety.t_safety,
                reason: "must exceed the time step",
            });
        }
        Ok(Self {
            v_max,
            dt,
            t_end,
            coverage,
            safety,
            mode,
            avoidance,
        })
    }

    pub fn u_max(&self) -> f64 {
        self.safety.u_max
    }

    /// Number of integration steps between `t = 0` and `t_end`.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Coverage(#[from] CoverageError),
    #[error("vehicle {vehicle} has a non-finite state at t = {t} s")]
    NonFinite { vehicle: usize, t: f64 },
    #[error("scenario has no vehicles")]
    NoVehicles,
}

/// Map a raw coverage control onto the acceleration bound.
///
/// Controls longer than `u_max` are scaled back onto the bound; shorter ones
/// pass through, so the swarm can come to rest instead of chattering at
/// `±u_max` around every equilibrium. A zero control stays zero.
pub fn saturate(raw: Vec2, u_max: f64) -> Vec2 {
    let m = raw.norm();
    if m > u_max {
        raw * (u_max / m)
    } else {
        raw
    }
}

/// Control for vehicle `i` from the time-`t` snapshot.
pub fn control_logic(
    i: usize,
    states: &[VehicleState],
    domain: &PolygonDomain,
    t: f64,
    params: &SimParams,
) -> Result<(Vec2, ControlSource), SimError> {
    let safety = &params.safety;
    if params.avoidance {
        for (j, other) in states.iter().enumerate() {
            if j == i {
                continue;
            }
            let z = RelativeState::between(&states[i], other);
            if time_to_reach(&z, safety.collision_radius).value() > safety.t_safety {
                continue;
            }
            return match avoid_control(&z, safety) {
                Ok(u) => Ok((u, ControlSource::Safety)),
                Err(_) => {
                    let dist = z.p.norm();
                    if dist < COINCIDENT_EPS {
                        let err = CoverageError::CoincidentVehicles(i.min(j), i.max(j), dist);
                        return Err(err.into());
                    }
                    Ok((z.p * (safety.u_max / dist), ControlSource::Fallback))
                }
            };
        }
    }

    let raw = coverage_control(i, states, domain, t, &params.coverage)?;
    let u = match params.mode {
        ControlMode::Raw => raw,
        ControlMode::Saturated => saturate(raw, safety.u_max),
    };
    Ok((u, ControlSource::Coverage))
}

/// Controls for every vehicle from one snapshot.
pub fn compute_controls(
    states: &[VehicleState],
    domain: &PolygonDomain,
    t: f64,
    params: &SimParams,
) -> Result<Vec<(Vec2, ControlSource)>, SimError> {
    (0..states.len())
        .map(|i| control_logic(i, states, domain, t, params))
        .collect()
}

/// Semi-implicit Euler update with radial speed clipping.
pub fn integrate(state: &VehicleState, u: Vec2, v_max: f64, dt: f64) -> VehicleState {
    let mut v = state.v + u * dt;
    let speed = v.norm();
    if speed > v_max {
        v = v * (v_max / speed);
        // rounding can leave the norm an ulp above the bound
        while v.norm() > v_max {
            v = v * (1.0 - f64::EPSILON);
        }
    }
    VehicleState::new(state.p + v * dt, v)
}

/// One closed-loop step from time `t` to `t + dt`.
pub fn step(
    states: &[VehicleState],
    domain: &PolygonDomain,
    t: f64,
    params: &SimParams,
) -> Result<Vec<VehicleState>, SimError> {
    let controls = compute_controls(states, domain, t, params)?;
    advance(states, &controls, t + params.dt, params)
}

fn advance(
    states: &[VehicleState],
    controls: &[(Vec2, ControlSource)],
    t_next: f64,
    params: &SimParams,
) -> Result<Vec<VehicleState>, SimError> {
    states
        .iter()
        .zip(controls)
        .enumerate()
        .map(|(i, (s, (u, _)))| {
            let next = integrate(s, *u, params.v_max, params.dt);
            if next.is_finite() {
                Ok(next)
            } else {
                Err(SimError::NonFinite { vehicle: i, t: t_next })
            }
        })
        .collect()
}

/// Every pair at least `r - tol` apart and every vehicle at signed distance
/// at most `-r/2 + tol`.
pub fn is_r_subcover(states: &[VehicleState], domain: &PolygonDomain, t: f64, r: f64) -> bool {
    let deep = states
        .iter()
        .all(|s| domain.signed_distance(s.p, t).distance <= -0.5 * r + SUBCOVER_TOL);
    deep && min_pairwise_distance(states) >= r - SUBCOVER_TOL
}

pub fn min_pairwise_distance(states: &[VehicleState]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..states.len() {
        for j in i + 1..states.len() {
            best = best.min(states[i].p.distance(states[j].p));
        }
    }
    best
}

/// All speeds below `eps_v`.
pub fn is_steady(states: &[VehicleState], eps_v: f64) -> bool {
    states.iter().all(|s| s.v.norm() < eps_v)
}

/// A domain, initial states and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub domain: PolygonDomain,
    pub initial: Vec<VehicleState>,
    pub params: SimParams,
}

/// Time-indexed record of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    /// `states[k][i]`: vehicle `i` at `times[k]`.
    pub states: Vec<Vec<VehicleState>>,
    /// Input applied over `[times[k], times[k] + dt)`.
    pub controls: Vec<Vec<Vec2>>,
    pub sources: Vec<Vec<ControlSource>>,
    /// Lyapunov energy at each recorded time.
    pub energy: Vec<f64>,
    /// Translation of the domain at each recorded time.
    pub domain_offsets: Vec<Vec2>,
    pub events: Vec<CollisionEvent>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_vehicles(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn final_states(&self) -> &[VehicleState] {
        self.states.last().map_or(&[], Vec::as_slice)
    }

    pub fn final_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// Earliest recorded time from which every later sample is steady.
    pub fn steady_time(&self, eps_v: f64) -> Option<f64> {
        let mut first = None;
        for (k, s) in self.states.iter().enumerate().rev() {
            if is_steady(s, eps_v) {
                first = Some(self.times[k]);
            } else {
                break;
            }
        }
        first
    }

    /// Index of the sample closest to time `t`.
    pub fn index_at(&self, t: f64) -> usize {
        let k = (t / self.dt).round().max(0.0) as usize;
        k.min(self.len().saturating_sub(1))
    }
}

/// Integrate a scenario from `t = 0` to `t_end`, recording every step.
pub fn run(scenario: &Scenario) -> Result<Trajectory, SimError> {
    let params = &scenario.params;
    let domain = &scenario.domain;
    let n = scenario.initial.len();
    if n == 0 {
        return Err(SimError::NoVehicles);
    }
    if let Some(i) = scenario.initial.iter().position(|s| !s.is_finite()) {
        return Err(SimError::NonFinite { vehicle: i, t: 0.0 });
    }
    let steps = params.steps();
    let mut traj = Trajectory {
        dt: params.dt,
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        controls: Vec::with_capacity(steps + 1),
        sources: Vec::with_capacity(steps + 1),
        energy: Vec::with_capacity(steps + 1),
        domain_offsets: Vec::with_capacity(steps + 1),
        events: Vec::new(),
    };

    let mut states = scenario.initial.clone();
    for k in 0..=steps {
        let t = k as f64 * params.dt;
        let controls = compute_controls(&states, domain, t, params)?;
        let next = if k < steps {
            Some(advance(&states, &controls, (k + 1) as f64 * params.dt, params)?)
        } else {
            None
        };
        traj.times.push(t);
        traj.energy.push(lyapunov_energy(&states, domain, t, &params.coverage));
        traj.domain_offsets.push(domain.offset_at(t));
        traj.controls.push(controls.iter().map(|c| c.0).collect());
        traj.sources.push(controls.iter().map(|c| c.1).collect());
        traj.states.push(states);
        match next {
            Some(s) => states = s,
            None => break,
        }
    }
    traj.events = detect_collision_events(&traj, params.safety.collision_radius);
    Ok(traj)
}
