use crate::sim::Trajectory;

/// A maximal interval during which a pair is within the collision radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionEvent {
    /// Vehicle indices, `pair.0 < pair.1`.
    pub pair: (usize, usize),
    /// First recorded time with distance `≤ c_r`.
    pub t_start: f64,
    /// First later recorded time with distance `> c_r`; `None` if the run
    /// ended inside the event.
    pub t_end: Option<f64>,
}

/// Scan one pair's distance trace: entering `≤ c_r` opens an interval,
/// leaving closes it.
pub fn scan_distance_trace(
    times: &[f64],
    distances: impl IntoIterator<Item = f64>,
    collision_radius: f64,
) -> Vec<(f64, Option<f64>)> {
    let mut out = Vec::new();
    let mut open: Option<f64> = None;
    for (&t, d) in times.iter().zip(distances) {
        match open {
            None if d <= collision_radius => open = Some(t),
            Some(start) if d > collision_radius => {
                out.push((start, Some(t)));
                open = None;
            }
            _ => {}
        }
    }
    if let Some(start) = open {
        out.push((start, None));
    }
    out
}

/// All collision events in a trajectory, ordered by pair then start time.
pub fn detect_collision_events(traj: &Trajectory, collision_radius: f64) -> Vec<CollisionEvent> {
    let n = traj.n_vehicles();
    let mut events = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let dists = traj.states.iter().map(|s| s[i].p.distance(s[j].p));
            events.extend(
                scan_distance_trace(&traj.times, dists, collision_radius)
                    .into_iter()
                    .map(|(t_start, t_end)| CollisionEvent {
                        pair: (i, j),
                        t_start,
                        t_end,
                    }),
            );
        }
    }
    events
}

#[cfg(test)]
mod tests {
    use super::*;

    fn times(n: usize) -> Vec<f64> {
        (0..n).map(|k| k as f64).collect()
    }

    #[test]
    fn single_dip() {
        let ev = scan_distance_trace(&times(3), [2.5, 1.8, 2.5], 2.0);
        assert_eq!(ev, vec![(1.0, Some(2.0))]);
    }

    #[test]
    fn never_close() {
        assert!(scan_distance_trace(&times(4), [2.5, 3.0, 2.1, 9.0], 2.0).is_empty());
    }

    #[test]
    fn two_dips() {
        let ev = scan_distance_trace(&times(5), [2.5, 1.9, 2.5, 1.7, 3.0], 2.0);
        assert_eq!(ev, vec![(1.0, Some(2.0)), (3.0, Some(4.0))]);
    }

    #[test]
    fn touching_counts_and_open_events_are_reported() {
        let ev = scan_distance_trace(&times(4), [2.0, 2.0, 2.1, 1.0], 2.0);
        assert_eq!(ev, vec![(0.0, Some(2.0)), (3.0, None)]);
    }
}
