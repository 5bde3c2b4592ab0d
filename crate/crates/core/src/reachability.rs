//! Analytic time-to-reach for the pairwise pursuit-evasion game.
//!
//! Two double integrators with equal acceleration bounds are written in
//! relative coordinates `z = (p_r, v_r) = x_i - x_j`, vehicle `i` evading and
//! vehicle `j` pursuing. The target set is the collision disc
//! `‖p_r‖ ≤ c_r`. Under optimal play the evader's and pursuer's inputs cancel,
//! so the relative state drifts in a straight line and the time to reach the
//! disc is the smaller root `ψ` of
//!
//! ```text
//! ‖v_r‖² ψ² + 2 (p_r·v_r) ψ + (‖p_r‖² - c_r²) = 0.
//! ```
//!
//! States from which the disc is never reached get `ψ = +∞`. Implicit
//! differentiation of the quadratic gives closed-form partials, and the
//! optimal evasion input points along `∂ψ/∂v_r`.

use thiserror::Error;

use crate::error::{require_positive, ParamError};
use crate::state::VehicleState;
use crate::vec2::Vec2;

/// `|D|` below this makes the closed-form partials unreliable (grazing contact).
pub const DEGENERATE_EPS: f64 = 1e-12;

/// Relative state of an evader with respect to a pursuer.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RelativeState {
    pub p: Vec2,
    pub v: Vec2,
}

impl RelativeState {
    pub const fn new(p: Vec2, v: Vec2) -> Self {
        Self { p, v }
    }

    pub fn from_components(p_rx: f64, p_ry: f64, v_rx: f64, v_ry: f64) -> Self {
        Self::new(Vec2::new(p_rx, p_ry), Vec2::new(v_rx, v_ry))
    }

    /// `x_evader - x_pursuer`.
    pub fn between(evader: &VehicleState, pursuer: &VehicleState) -> Self {
        Self::new(evader.p - pursuer.p, evader.v - pursuer.v)
    }

    /// Advance along the straight line followed under optimal play.
    pub fn drift(&self, t: f64) -> Self {
        Self::new(self.p + self.v * t, self.v)
    }

    /// Swap x and y components of position and velocity.
    pub fn transposed(&self) -> Self {
        Self::new(Vec2::new(self.p.y, self.p.x), Vec2::new(self.v.y, self.v.x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyParams {
    /// Collision radius `c_r` (m).
    pub collision_radius: f64,
    /// Acceleration bound shared by every vehicle (m/s²).
    pub u_max: f64,
    /// Conflict horizon (s): a pair is in conflict when `ψ ≤ t_safety`.
    pub t_safety: f64,
}

impl SafetyParams {
    pub fn new(collision_radius: f64, u_max: f64, t_safety: f64) -> Result<Self, ParamError> {
        Ok(Self {
            collision_radius: require_positive("collision_radius", collision_radius)?,
            u_max: require_positive("u_max", u_max)?,
            t_safety: require_positive("t_safety", t_safety)?,
        })
    }
}

/// Time for the relative state to reach the collision disc; `+∞` outside the
/// capturability set.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct TimeToReach(f64);

impl TimeToReach {
    pub const ZERO: TimeToReach = TimeToReach(0.0);
    pub const NEVER: TimeToReach = TimeToReach(f64::INFINITY);

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }
}

/// The four partials of `ψ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TtrGradient {
    /// `(∂ψ/∂p_rx, ∂ψ/∂p_ry)`
    pub dp: Vec2,
    /// `(∂ψ/∂v_rx, ∂ψ/∂v_ry)`
    pub dv: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ReachError {
    #[error("time to reach {0} is not finite and positive; gradient undefined")]
    NotDifferentiable(f64),
    #[error("grazing contact: denominator {0:e} too small for closed-form gradient")]
    DegenerateGradient(f64),
}

/// Smaller root of the time-to-reach quadratic, `0` inside the disc, `+∞` when
/// the disc is never reached.
pub fn time_to_reach(z: &RelativeState, collision_radius: f64) -> TimeToReach {
    let c2 = collision_radius * collision_radius;
    let pp = z.p.norm_squared();
    if pp <= c2 {
        return TimeToReach::ZERO;
    }
    let vv = z.v.norm_squared();
    if vv == 0.0 {
        return TimeToReach::NEVER;
    }
    let pv = z.p.dot(z.v);
    let disc = pv * pv - vv * (pp - c2);
    // outside the disc both roots share a sign; they are negative when receding
    if disc < 0.0 || pv >= 0.0 {
        return TimeToReach::NEVER;
    }
    // (-pv - √Δ)/‖v‖² rewritten without cancellation
    TimeToReach((pp - c2) / (-pv + disc.sqrt()))
}

/// Closed-form partials of `ψ` by implicit differentiation of the quadratic.
///
/// With `D = ‖v_r‖² ψ + p_r·v_r` (equal to `-√Δ` at the smaller root):
/// `∂ψ/∂p_r = -(v_r ψ + p_r)/D` and `∂ψ/∂v_r = -(v_r ψ² + p_r ψ)/D`.
pub fn ttr_gradients(z: &RelativeState, psi: f64) -> Result<TtrGradient, ReachError> {
    if !(psi.is_finite() && psi > 0.0) {
        return Err(ReachError::NotDifferentiable(psi));
    }
    let denom = z.v.norm_squared() * psi + z.p.dot(z.v);
    if denom.abs() <= DEGENERATE_EPS {
        return Err(ReachError::DegenerateGradient(denom));
    }
    let contact = z.v * psi + z.p;
    Ok(TtrGradient {
        dp: contact * (-1.0 / denom),
        dv: contact * (-psi / denom),
    })
}

/// Optimal evader input `u* = u_max ∂ψ/∂v_r / ‖∂ψ/∂v_r‖`.
pub fn avoid_control(z: &RelativeState, params: &SafetyParams) -> Result<Vec2, ReachError> {
    let psi = time_to_reach(z, params.collision_radius).value();
    let grad = ttr_gradients(z, psi)?;
    unit_along(grad.dv, params.u_max)
}

/// Optimal evader input and worst-case pursuer input `(u*, d*)`.
///
/// The pursuer's input enters the relative dynamics with a minus sign, so
/// both optimizers point along `∂ψ/∂v_r` and their effects cancel.
pub fn optimal_inputs(
    grad: &TtrGradient,
    u_max: f64,
) -> Result<(Vec2, Vec2), ReachError> {
    let u = unit_along(grad.dv, u_max)?;
    // max over ‖d‖ ≤ u_max of ∂ψ/∂v_r · d
    let d = unit_along(grad.dv, u_max)?;
    Ok((u, d))
}

fn unit_along(g: Vec2, u_max: f64) -> Result<Vec2, ReachError> {
    g.normalized()
        .map(|dir| dir * u_max)
        .ok_or(ReachError::DegenerateGradient(0.0))
}

/// `min_u max_d { -∇ψ·f(z,u,d) - 1 }` evaluated with the closed-form
/// gradient; zero wherever `ψ` solves the stationary HJ equation.
pub fn hamiltonian_residual(z: &RelativeState, collision_radius: f64) -> Result<f64, ReachError> {
    let psi = time_to_reach(z, collision_radius).value();
    let grad = ttr_gradients(z, psi)?;
    // the optimizers do not depend on the authority; use unit bounds
    let (u, d) = optimal_inputs(&grad, 1.0)?;
    let rel_accel = u - d;
    Ok(-(grad.dp.dot(z.v) + grad.dv.dot(rel_accel)) - 1.0)
}

/// Independent time-to-reach: first time the ray `p_r + t v_r`, `t ≥ 0`,
/// enters the disc, found from the point of closest approach.
pub fn ttr_oracle(z: &RelativeState, collision_radius: f64) -> TimeToReach {
    let dist = z.p.norm();
    if dist <= collision_radius {
        return TimeToReach::ZERO;
    }
    let speed = z.v.norm();
    if speed == 0.0 {
        return TimeToReach::NEVER;
    }
    let dir = z.v / speed;
    // signed distance along the ray to the foot of the perpendicular from the origin
    let along = -z.p.dot(dir);
    if along < 0.0 {
        return TimeToReach::NEVER;
    }
    let miss = z.p.cross(dir).abs();
    if miss > collision_radius {
        return TimeToReach::NEVER;
    }
    let half_chord = ((collision_radius - miss) * (collision_radius + miss)).sqrt();
    TimeToReach((along - half_chord) / speed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn z(px: f64, py: f64, vx: f64, vy: f64) -> RelativeState {
        RelativeState::from_components(px, py, vx, vy)
    }

    fn random_state(rng: &mut ChaCha8Rng) -> RelativeState {
        z(
            rng.gen_range(-50.0..50.0),
            rng.gen_range(-50.0..50.0),
            rng.gen_range(-10.0..10.0),
            rng.gen_range(-10.0..10.0),
        )
    }

    #[test]
    fn time_to_reach_examples() {
        assert_eq!(time_to_reach(&z(10.0, 0.0, -1.0, 0.0), 2.0).value(), 8.0);
        assert_eq!(time_to_reach(&z(1.0, 0.0, 7.0, -3.0), 2.0), TimeToReach::ZERO);
        assert_eq!(time_to_reach(&z(10.0, 0.0, 1.0, 0.0), 2.0), TimeToReach::NEVER);
        assert_eq!(time_to_reach(&z(0.0, 10.0, 1.0, 0.0), 2.0), TimeToReach::NEVER);
        assert_eq!(time_to_reach(&z(10.0, 0.0, 0.0, 0.0), 2.0), TimeToReach::NEVER);
    }

    #[test]
    fn oracle_examples() {
        assert_eq!(ttr_oracle(&z(10.0, 0.0, -1.0, 0.0), 2.0).value(), 8.0);
        assert_eq!(ttr_oracle(&z(0.5, 0.5, 1.0, 1.0), 2.0), TimeToReach::ZERO);
        assert_eq!(ttr_oracle(&z(0.0, 10.0, 1.0, 0.0), 2.0), TimeToReach::NEVER);
    }

    #[test]
    fn gradient_example() {
        let s = z(10.0, 0.0, -1.0, 0.0);
        let g = ttr_gradients(&s, 8.0).unwrap();
        assert_eq!(g.dv, Vec2::new(8.0, 0.0));
        // receding the start point by one metre delays contact by one second
        assert_eq!(g.dp, Vec2::new(1.0, 0.0));
    }

    /// Fourth-order central differences with relative step 1e-6; near
    /// grazing contact the second-order stencil's truncation error alone
    /// exceeds 1e-5.
    fn fd_gradient(s: &RelativeState, c: f64) -> [f64; 4] {
        let comps = [s.p.x, s.p.y, s.v.x, s.v.y];
        let f = |k: usize, dx: f64| {
            let mut c4 = comps;
            c4[k] += dx;
            time_to_reach(&z(c4[0], c4[1], c4[2], c4[3]), c).value()
        };
        let mut out = [0.0; 4];
        for k in 0..4 {
            let h = 1e-6 * comps[k].abs().max(1.0);
            out[k] = (8.0 * (f(k, h) - f(k, -h)) - (f(k, 2.0 * h) - f(k, -2.0 * h))) / (12.0 * h);
        }
        out
    }

    #[test]
    fn gradient_example_matches_finite_differences() {
        let s = z(10.0, 0.0, -1.0, 0.0);
        let fd = fd_gradient(&s, 2.0);
        let exact = [1.0, 0.0, 8.0, 0.0];
        for k in 0..4 {
            assert!((fd[k] - exact[k]).abs() <= 1e-6 * exact[k].abs().max(1.0), "{k}: {fd:?}");
        }
    }

    #[test]
    fn transposing_permutes_partials() {
        let s = z(7.0, -4.0, -2.0, 1.5);
        let psi = time_to_reach(&s, 2.0).value();
        assert!(psi.is_finite());
        let g = ttr_gradients(&s, psi).unwrap();
        let t = s.transposed();
        let gt = ttr_gradients(&t, time_to_reach(&t, 2.0).value()).unwrap();
        assert_eq!((gt.dp.x, gt.dp.y, gt.dv.x, gt.dv.y), (g.dp.y, g.dp.x, g.dv.y, g.dv.x));
    }

    #[test]
    fn random_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c = 2.0;
        let mut checked = 0;
        while checked < 1000 {
            let s = random_state(&mut rng);
            let pv = s.p.dot(s.v);
            let disc = pv * pv - s.v.norm_squared() * (s.p.norm_squared() - c * c);
            let psi = time_to_reach(&s, c).value();
            if !(psi.is_finite() && psi > 0.0) || disc <= 1e-4 {
                continue;
            }
            let g = ttr_gradients(&s, psi).unwrap();
            let exact = [g.dp.x, g.dp.y, g.dv.x, g.dv.y];
            let fd = fd_gradient(&s, c);
            let err: f64 = exact.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let norm: f64 = exact.iter().map(|a| a * a).sum::<f64>().sqrt();
            assert!(err / norm < 1e-5, "{s:?}: {exact:?} vs {fd:?}");
            checked += 1;
        }
    }

    fn safety() -> SafetyParams {
        SafetyParams::new(2.0, 3.0, 5.0).unwrap()
    }

    #[test]
    fn avoid_control_examples() {
        assert_eq!(avoid_control(&z(10.0, 0.0, -1.0, 0.0), &safety()).unwrap(), Vec2::new(3.0, 0.0));
        assert_eq!(avoid_control(&z(-10.0, 0.0, 1.0, 0.0), &safety()).unwrap(), Vec2::new(-3.0, 0.0));
        let u = avoid_control(&z(9.0, 1.0, -2.0, -0.2), &safety()).unwrap();
        assert!((u.norm() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn avoid_control_refuses_outside_capture_set() {
        assert!(matches!(
            avoid_control(&z(10.0, 0.0, 1.0, 0.0), &safety()),
            Err(ReachError::NotDifferentiable(_))
        ));
        assert!(matches!(
            avoid_control(&z(1.0, 0.0, 1.0, 0.0), &safety()),
            Err(ReachError::NotDifferentiable(_))
        ));
    }

    #[test]
    fn tangent_contact_is_degenerate() {
        // line y = 2 grazes the disc of radius 2 at (0, 2)
        let s = z(10.0, 2.0, -1.0, 0.0);
        let psi = time_to_reach(&s, 2.0).value();
        assert_eq!(psi, 10.0);
        assert!(matches!(ttr_gradients(&s, psi), Err(ReachError::DegenerateGradient(_))));
    }

    #[test]
    fn residual_example_is_zero() {
        let r = hamiltonian_residual(&z(10.0, 0.0, -1.0, 0.0), 2.0).unwrap();
        assert!(r.abs() < 1e-12);
    }

    #[test]
    fn residual_vanishes_on_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut n = 0;
        while n < 10_000 {
            let s = random_state(&mut rng);
            let pv = s.p.dot(s.v);
            let disc = pv * pv - s.v.norm_squared() * (s.p.norm_squared() - 4.0);
            let psi = time_to_reach(&s, 2.0).value();
            if !(psi.is_finite() && psi > 0.0) || disc <= 1e-6 {
                continue;
            }
            let r = hamiltonian_residual(&s, 2.0).unwrap();
            assert!(r.abs() < 1e-9, "{s:?}: {r}");
            n += 1;
        }
    }

    #[test]
    fn control_and_disturbance_coincide() {
        let s = z(6.0, 2.0, -3.0, -1.0);
        let g = ttr_gradients(&s, time_to_reach(&s, 2.0).value()).unwrap();
        let (u, d) = optimal_inputs(&g, 3.0).unwrap();
        assert_eq!(u, d);
        assert!((u.norm() - 3.0).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn state() -> impl Strategy<Value = RelativeState> {
            (-50.0..50.0f64, -50.0..50.0f64, -10.0..10.0f64, -10.0..10.0f64)
                .prop_map(|(a, b, c, d)| z(a, b, c, d))
        }

        proptest! {
            #[test]
            fn matches_oracle(s in state(), c in 0.5..5.0f64) {
                let a = time_to_reach(&s, c);
                let b = ttr_oracle(&s, c);
                prop_assert_eq!(a.is_finite(), b.is_finite());
                if a.is_finite() {
                    prop_assert!((a.value() - b.value()).abs() < 1e-9);
                }
            }

            #[test]
            fn zero_exactly_inside(r in 0.0..2.0f64, th in 0.0..6.3f64, v in state()) {
                let s = RelativeState::new(Vec2::new(r * th.cos(), r * th.sin()), v.v);
                prop_assert_eq!(time_to_reach(&s, 2.0).value(), 0.0);
            }

            #[test]
            fn decreases_at_unit_rate_along_drift(
                s in state(),
                aim in (-1.9..1.9f64, -1.9..1.9f64),
                rate in 0.05..1.0f64,
                frac in 0.0..1.0f64,
            ) {
                // aim the relative velocity at a point of the disc
                let target = Vec2::new(aim.0, aim.1) * (1.9 / aim.0.hypot(aim.1).max(1.9));
                let s = RelativeState::new(s.p, (target - s.p) * rate);
                let psi = time_to_reach(&s, 2.0).value();
                prop_assume!(psi.is_finite() && psi > 0.0);
                let t = frac * psi;
                let later = time_to_reach(&s.drift(t), 2.0).value();
                prop_assert!((later - (psi - t)).abs() < 1e-8, "{} vs {}", later, psi - t);
            }
        }
    }
}
