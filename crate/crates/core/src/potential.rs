//! Artificial-potential coverage controller.
//!
//! Each vehicle feels three forces: a short-range repulsion from every other
//! vehicle closer than the desired spacing `r_d`, a vehicle-domain force that
//! pulls it in from outside and pushes it off the boundary until it sits at
//! least `r_d / 2` deep, and linear braking. The first two are spring-like
//! (piecewise linear in distance) and derive from the potentials
//! [`potential_inter`] and [`potential_domain`]. Kinetic plus potential energy
//! is the Lyapunov function [`lyapunov_energy`]; with braking `-a v` it
//! decreases at rate `a Σ‖v_i‖²`.

use thiserror::Error;

use crate::error::{require_positive, ParamError};
use crate::geom::PolygonDomain;
use crate::state::VehicleState;
use crate::vec2::Vec2;

/// Vehicles closer than this are considered coincident.
pub const COINCIDENT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageParams {
    /// Desired inter-vehicle spacing (m).
    pub r_d: f64,
    /// Inter-vehicle stiffness (s⁻²).
    pub k_inter: f64,
    /// Vehicle-domain stiffness (s⁻²).
    pub k_domain: f64,
    /// Braking coefficient `a` (s⁻¹), shared by all vehicles.
    pub damping: f64,
}

impl CoverageParams {
    pub fn new(r_d: f64, k_inter: f64, k_domain: f64, damping: f64) -> Result<Self, ParamError> {
        Ok(Self {
            r_d: require_positive("r_d", r_d)?,
            k_inter: require_positive("k_inter", k_inter)?,
            k_domain: require_positive("k_domain", k_domain)?,
            damping: require_positive("damping", damping)?,
        })
    }

    /// Unit stiffnesses and damping.
    pub fn with_spacing(r_d: f64) -> Result<Self, ParamError> {
        Self::new(r_d, 1.0, 1.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoverageError {
    #[error("vehicles {0} and {1} coincide (distance {2:e} m)")]
    CoincidentVehicles(usize, usize, f64),
}

/// Inter-vehicle force magnitude `f_I(s)`: `-k_I (r_d - s)` below `r_d`, zero beyond.
#[inline]
pub fn f_inter(s: f64, params: &CoverageParams) -> f64 {
    if s < params.r_d {
        -params.k_inter * (params.r_d - s)
    } else {
        0.0
    }
}

/// Vehicle-domain force magnitude `f_h(b)`: `k_h (b + r_d/2)` above `-r_d/2`, zero below.
#[inline]
pub fn f_domain(b: f64, params: &CoverageParams) -> f64 {
    let shifted = b + 0.5 * params.r_d;
    if shifted > 0.0 {
        params.k_domain * shifted
    } else {
        0.0
    }
}

/// `-a v`, the continuous extension of `f_v(‖v‖) v/‖v‖` with `f_v(s) = -a s`.
#[inline]
pub fn braking_force(v: Vec2, params: &CoverageParams) -> Vec2 {
    -(v * params.damping)
}

/// `V_I(s) = ∫_{r_d}^{s} f_I`.
#[inline]
pub fn potential_inter(s: f64, params: &CoverageParams) -> f64 {
    if s < params.r_d {
        let gap = params.r_d - s;
        0.5 * params.k_inter * gap * gap
    } else {
        0.0
    }
}

/// `V_h(b) = ∫_{-r_d/2}^{b} f_h`.
#[inline]
pub fn potential_domain(b: f64, params: &CoverageParams) -> f64 {
    let shifted = b + 0.5 * params.r_d;
    if shifted > 0.0 {
        0.5 * params.k_domain * shifted * shifted
    } else {
        0.0
    }
}

/// Force exerted on a vehicle at `p_i` by one at `p_j`.
///
/// Antisymmetric in its arguments, bit for bit.
#[inline]
pub fn pair_force(p_i: Vec2, p_j: Vec2, params: &CoverageParams) -> Vec2 {
    let p_ij = p_i - p_j;
    let s = p_ij.norm();
    let f = f_inter(s, params);
    if f == 0.0 {
        return Vec2::ZERO;
    }
    p_ij * (-f / s)
}

/// Inter-vehicle plus vehicle-domain force on vehicle `i`: the negative
/// gradient of its share of the artificial potential.
pub fn potential_force(
    i: usize,
    states: &[VehicleState],
    domain: &PolygonDomain,
    t: f64,
    params: &CoverageParams,
) -> Result<Vec2, CoverageError> {
    let p_i = states[i].p;
    let mut force = Vec2::ZERO;
    for (j, other) in states.iter().enumerate() {
        if j == i {
            continue;
        }
        let s = (p_i - other.p).norm();
        if s < COINCIDENT_EPS {
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            return Err(CoverageError::CoincidentVehicles(a, b, s));
        }
        force += pair_force(p_i, other.p, params);
    }

    let b = domain.signed_distance(p_i, t).distance;
    let fh = f_domain(b, params);
    if fh != 0.0 {
        force -= domain.boundary_direction(p_i, t) * fh;
    }
    Ok(force)
}

/// Raw (unsaturated) coverage control for vehicle `i`.
pub fn coverage_control(
    i: usize,
    states: &[VehicleState],
    domain: &PolygonDomain,
    t: f64,
    params: &CoverageParams,
) -> Result<Vec2, CoverageError> {
    Ok(potential_force(i, states, domain, t, params)? + braking_force(states[i].v, params))
}

/// `Φ = ½ Σ_i (‖v_i‖² + Σ_{j≠i} V_I(‖p_ij‖) + 2 V_h(b(p_i)))`.
pub fn lyapunov_energy(
    states: &[VehicleState],
    domain: &PolygonDomain,
    t: f64,
    params: &CoverageParams,
) -> f64 {
    let mut total = 0.0;
    for (i, s) in states.iter().enumerate() {
        let mut inter = 0.0;
        for (j, o) in states.iter().enumerate() {
            if j != i {
                inter += potential_inter((s.p - o.p).norm(), params);
            }
        }
        let b = domain.signed_distance(s.p, t).distance;
        total += s.v.norm_squared() + inter + 2.0 * potential_domain(b, params);
    }
    0.5 * total
}

/// Spacing at which each of `n` vehicles covers an equal square share of `area`.
pub fn r_d_heuristic(area: f64, n: usize) -> f64 {
    (area / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::shapes::square;

    fn unit(r_d: f64) -> CoverageParams {
        CoverageParams::with_spacing(r_d).unwrap()
    }

    /// Composite Simpson quadrature, used as an independent check on the
    /// closed-form potentials.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(a + k as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn force_law_examples() {
        let p = unit(5.0);
        assert_eq!(f_inter(2.5, &p), -2.5);
        assert_eq!(f_inter(6.0, &p), 0.0);
        assert_eq!(f_inter(5.0, &p), 0.0);
        assert_eq!(f_domain(0.0, &p), 2.5);
        assert_eq!(f_domain(-2.5, &p), 0.0);
        assert_eq!(f_domain(-4.0, &p), 0.0);
    }

    #[test]
    fn braking_examples() {
        assert_eq!(braking_force(Vec2::ZERO, &unit(5.0)), Vec2::ZERO);
        assert_eq!(braking_force(Vec2::new(2.0, 0.0), &unit(5.0)), Vec2::new(-2.0, 0.0));
        let half = CoverageParams::new(5.0, 1.0, 1.0, 0.5).unwrap();
        assert_eq!(braking_force(Vec2::new(3.0, 4.0), &half), Vec2::new(-1.5, -2.0));
    }

    #[test]
    fn potentials_match_quadrature() {
        let p = unit(5.0);
        assert_eq!(potential_inter(5.0, &p), 0.0);
        assert_eq!(potential_inter(10.0, &p), 0.0);
        let quad = simpson(|s| f_inter(s, &p), 5.0, 2.5, 1000);
        assert!((quad - 3.125).abs() / 3.125 < 1e-10);
        assert!((potential_inter(2.5, &p) - quad).abs() / quad < 1e-10);

        assert_eq!(potential_domain(-2.5, &p), 0.0);
        assert_eq!(potential_domain(-4.0, &p), 0.0);
        let quad = simpson(|b| f_domain(b, &p), -2.5, 0.0, 1000);
        assert!((potential_domain(0.0, &p) - quad).abs() / quad < 1e-10);
        assert!((quad - 3.125).abs() < 1e-10);
    }

    #[test]
    fn coverage_control_examples() {
        let p = unit(5.0);
        let d = square(20.0);
        let deep = [VehicleState::at_rest(Vec2::new(10.0, 10.0))];
        assert_eq!(coverage_control(0, &deep, &d, 0.0, &p).unwrap(), Vec2::ZERO);

        let outside = [VehicleState::at_rest(Vec2::new(10.0, 25.0))];
        assert_eq!(coverage_control(0, &outside, &d, 0.0, &p).unwrap(), Vec2::new(0.0, -7.5));

        let pair = [
            VehicleState::at_rest(Vec2::new(8.75, 10.0)),
            VehicleState::at_rest(Vec2::new(11.25, 10.0)),
        ];
        assert_eq!(coverage_control(0, &pair, &d, 0.0, &p).unwrap(), Vec2::new(-2.5, 0.0));
        assert_eq!(coverage_control(1, &pair, &d, 0.0, &p).unwrap(), Vec2::new(2.5, 0.0));
    }

    #[test]
    fn coincident_vehicles_are_reported() {
        let d = square(20.0);
        let s = [
            VehicleState::at_rest(Vec2::new(5.0, 5.0)),
            VehicleState::at_rest(Vec2::new(9.0, 9.0)),
            VehicleState::at_rest(Vec2::new(5.0, 5.0)),
        ];
        assert!(matches!(
            coverage_control(2, &s, &d, 0.0, &unit(5.0)),
            Err(CoverageError::CoincidentVehicles(0, 2, _))
        ));
    }

    #[test]
    fn energy_examples() {
        let p = unit(5.0);
        let d = square(20.0);
        let grid: Vec<_> = (0..16)
            .map(|k| VehicleState::at_rest(Vec2::new(2.5 + 5.0 * (k % 4) as f64, 2.5 + 5.0 * (k / 4) as f64)))
            .collect();
        assert_eq!(lyapunov_energy(&grid, &d, 0.0, &p), 0.0);

        let moving = [VehicleState::new(Vec2::new(10.0, 10.0), Vec2::new(2.0, 0.0))];
        assert_eq!(lyapunov_energy(&moving, &d, 0.0, &p), 2.0);

        let pair = [
            VehicleState::at_rest(Vec2::new(8.75, 10.0)),
            VehicleState::at_rest(Vec2::new(11.25, 10.0)),
        ];
        assert_eq!(lyapunov_energy(&pair, &d, 0.0, &p), 3.125);
    }

    #[test]
    fn r_d_examples() {
        assert_eq!(r_d_heuristic(400.0, 16), 5.0);
        assert_eq!(r_d_heuristic(225.0, 9), 5.0);
        let tri = 1875.0 * 3f64.sqrt() / 16.0;
        let expected = 1.25 * (5.0 * 3f64.sqrt()).sqrt();
        assert!((r_d_heuristic(tri, 15) - expected).abs() < 1e-12);
        assert!((expected - 3.6785).abs() < 1e-4);
    }

    #[test]
    fn rejects_non_positive_params() {
        assert!(CoverageParams::new(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(CoverageParams::new(5.0, 1.0, f64::NAN, 1.0).is_err());
        assert!(CoverageParams::new(5.0, 1.0, 1.0, -1.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn pt() -> impl Strategy<Value = Vec2> {
            (-10.0..30.0f64, -10.0..30.0f64).prop_map(|(x, y)| Vec2::new(x, y))
        }

        proptest! {
            #[test]
            fn newton_third_law(a in pt(), b in pt(), r_d in 0.5..10.0f64) {
                let p = unit(r_d);
                prop_assert_eq!(pair_force(a, b, &p), -pair_force(b, a, &p));
            }

            #[test]
            fn support_is_exact(s in 0.0..100.0f64, b in -50.0..50.0f64, r_d in 0.5..10.0f64) {
                let p = unit(r_d);
                if s >= r_d { prop_assert_eq!(f_inter(s, &p), 0.0); }
                if b <= -r_d / 2.0 { prop_assert_eq!(f_domain(b, &p), 0.0); }
                prop_assert!(f_inter(s, &p) <= 0.0);
                prop_assert!(f_domain(b, &p) >= 0.0);
            }

            #[test]
            fn potentials_differentiate_to_forces(s in 0.1..20.0f64, b in -20.0..20.0f64) {
                let p = unit(5.0);
                let h = 1e-6;
                let ds = (potential_inter(s + h, &p) - potential_inter(s - h, &p)) / (2.0 * h);
                let db = (potential_domain(b + h, &p) - potential_domain(b - h, &p)) / (2.0 * h);
                prop_assert!((ds - f_inter(s, &p)).abs() < 1e-6);
                prop_assert!((db - f_domain(b, &p)).abs() < 1e-6);
            }
        }
    }
}
