//! Safe coverage of planar domains by double-integrator vehicles.
//!
//! A swarm of vehicles with bounded speed and acceleration spreads over a
//! polygonal domain under artificial-potential forces, while each vehicle
//! avoids pairwise collisions using an analytic time-to-reach value function.
//!
//! The crate is organized bottom-up:
//!
//! - [`geom`]: signed distance, projection and gradient for simple polygons.
//! - [`potential`]: force laws, their potentials, and the Lyapunov energy.
//! - [`reachability`]: the closed-form time to reach, its gradient, and the
//!   optimal evasion input.
//! - [`sim`]: control switching, stepping, collision accounting.
//! - [`scenario`]: configuration files and the built-in scenarios.
//! - [`report`]: trajectory, energy, summary and plot-data files.
//!
//! ```
//! use safe_coverage::scenario::builtin;
//! use safe_coverage::sim::run;
//!
//! let mut config = builtin("square9").unwrap();
//! config.params.t_end = 2.0;
//! let traj = run(&config.to_scenario()).unwrap();
//! assert_eq!(traj.len(), 201);
//! ```

pub mod error;
pub mod geom;
pub mod potential;
pub mod reachability;
pub mod report;
pub mod scenario;
pub mod sim;
mod state;
pub mod vec2;

pub use geom::PolygonDomain;
pub use state::VehicleState;
pub use vec2::Vec2;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/potentials.md")]
    mod potentials {}
    #[doc = include_str!("../../../book/src/time-to-reach.md")]
    mod time_to_reach {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
