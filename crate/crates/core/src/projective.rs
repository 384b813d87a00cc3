//! Projected dynamics on real projective space, with the planar case worked
//! out in angle coordinates: the invariant control set of the projected
//! system with control range `I = [lo, hi]` and bang-bang steering inside it.
//!
//! Angles live in `[0, π)`; a direction and its antipode are the same point.

use std::f64::consts::PI;

use nalgebra::DVector;
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lie::{check_plarc, DEFAULT_PLARC_SAMPLES};
use crate::matcore::{expm, require_square, Matrix};
use crate::rates::FeedbackSystem;
use crate::signals::{PESignal, Segment};

/// Default number of angle cells.
pub const DEFAULT_RESOLUTION: usize = 4096;

/// A point of projective space: a unit vector whose first nonzero coordinate
/// is positive.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjPoint {
    direction: DVector<f64>,
}

impl ProjPoint {
    pub fn new(x: &DVector<f64>) -> Result<Self> {
        let n = x.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::InvalidInput(
                "projective point needs a finite nonzero vector".into(),
            ));
        }
        let mut direction = x / n;
        if let Some(&first) = direction.iter().find(|&&v| v != 0.0) {
            if first < 0.0 {
                direction = -direction;
            }
        }
        Ok(Self { direction })
    }

    pub fn from_angle(theta: f64) -> Self {
        Self::new(&DVector::from_vec(vec![theta.cos(), theta.sin()])).expect("unit vector")
    }

    pub fn direction(&self) -> &DVector<f64> {
        &self.direction
    }

    pub fn dim(&self) -> usize {
        self.direction.len()
    }

    /// Angle in `[0, π)` of a planar point.
    pub fn angle(&self) -> Result<f64> {
        if self.dim() != 2 {
            return Err(Error::Precondition("angles need a planar point".into()));
        }
        Ok(wrap(self.direction[1].atan2(self.direction[0])))
    }
}

fn wrap(theta: f64) -> f64 {
    let w = theta.rem_euclid(PI);
    if w >= PI {
        0.0
    } else {
        w
    }
}

/// Tangent part `Mx − (xᵀMx)x` of `Mx` at the unit representative `x`.
pub fn project_field(m: &Matrix, q: &ProjPoint) -> Result<DVector<f64>> {
    let d = require_square(m, "field matrix")?;
    if q.dim() != d {
        return Err(Error::Shape(format!(
            "point has dimension {}, matrix is {d}x{d}",
            q.dim()
        )));
    }
    let x = q.direction();
    let mx = m * x;
    let radial = x.dot(&mx);
    Ok(mx - x * radial)
}

/// Polar form of a planar system: `θ' = f(θ, α)` and `(log|x|)' = g(θ, α)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AngleDynamics {
    a: Matrix,
    bk: Matrix,
}

pub fn angle_dynamics_d2(sys: &FeedbackSystem) -> Result<AngleDynamics> {
    if sys.dim() != 2 {
        return Err(Error::Precondition(format!(
            "angle dynamics need d = 2, got {}",
            sys.dim()
        )));
    }
    Ok(AngleDynamics {
        a: sys.a.clone(),
        bk: sys.bk.clone(),
    })
}

impl AngleDynamics {
    fn quad(&self, u: [f64; 2], w: [f64; 2], alpha: f64) -> f64 {
        let mut s = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                s += u[i] * (self.a[(i, j)] + alpha * self.bk[(i, j)]) * w[j];
            }
        }
        s
    }

    pub fn f(&self, theta: f64, alpha: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        self.quad([-s, c], [c, s], alpha)
    }

    pub fn g(&self, theta: f64, alpha: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        self.quad([c, s], [c, s], alpha)
    }

    /// Fastest counter-clockwise speed over the control range, and the control
    /// attaining it.
    fn up(&self, theta: f64, range: (f64, f64)) -> (f64, f64) {
        let (lo, hi) = (self.f(theta, range.0), self.f(theta, range.1));
        if hi >= lo {
            (hi, range.1)
        } else {
            (lo, range.0)
        }
    }

    /// Fastest clockwise speed (as a positive number when available).
    fn down(&self, theta: f64, range: (f64, f64)) -> (f64, f64) {
        let (lo, hi) = (self.f(theta, range.0), self.f(theta, range.1));
        if hi <= lo {
            (-hi, range.1)
        } else {
            (-lo, range.0)
        }
    }
}

/// Disjoint half-open arcs `[lo, hi)` of `[0, π)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CircleArcSet {
    pub arcs: Vec<(f64, f64)>,
}

impl CircleArcSet {
    pub fn full() -> Self {
        Self {
            arcs: vec![(0.0, PI)],
        }
    }

    pub fn is_full(&self) -> bool {
        self.measure() >= PI
    }

    pub fn measure(&self) -> f64 {
        self.arcs.iter().map(|(a, b)| b - a).sum()
    }

    pub fn contains(&self, theta: f64) -> bool {
        let t = wrap(theta);
        self.arcs.iter().any(|&(a, b)| a <= t && t < b)
    }

    /// Angular distance to the set, measured modulo `π`.
    pub fn distance(&self, theta: f64) -> f64 {
        if self.contains(theta) {
            return 0.0;
        }
        let t = wrap(theta);
        let gap = |x: f64| {
            let d = (t - x).rem_euclid(PI);
            d.min(PI - d)
        };
        self.arcs
            .iter()
            .map(|&(a, b)| gap(a).min(gap(b)))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Grid approximation of the invariant control set of a planar system.
#[derive(Clone, Debug, Serialize)]
pub struct ControlSetD2 {
    pub set: CircleArcSet,
    pub resolution: usize,
    pub control_range: (f64, f64),
    /// Number of terminal strongly connected components merged into `set`.
    /// More than one means the grid could not resolve a single set.
    pub components: usize,
    /// Per-cell membership, cell `c` being `[cπ/n, (c+1)π/n)`.
    pub indicator: Vec<bool>,
    #[serde(skip)]
    dynamics: AngleDynamics,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum ControlSetOutcome {
    Computed(ControlSetD2),
    NotApplicable { reason: String },
}

impl ControlSetD2 {
    fn h(&self) -> f64 {
        PI / self.resolution as f64
    }

    fn boundary(&self, c: usize) -> f64 {
        (c % self.resolution) as f64 * self.h()
    }

    fn cell_of(&self, theta: f64) -> usize {
        ((wrap(theta) / self.h()).floor() as usize).min(self.resolution - 1)
    }

    pub fn dynamics(&self) -> &AngleDynamics {
        &self.dynamics
    }

    /// Whether `theta` sits at least `margin` cells inside the set.
    pub fn is_interior(&self, theta: f64, margin: usize) -> bool {
        let n = self.resolution as isize;
        let c = self.cell_of(theta) as isize;
        (-(margin as isize)..=margin as isize)
            .all(|k| self.indicator[(c + k).rem_euclid(n) as usize])
    }
}

/// Invariant control set for controls in `range`, approximated on a grid of
/// `resolution` cells. Cells are linked to a neighbour when some control
/// pushes the shared boundary point across; the set is the union of the
/// terminal strongly connected components of that graph.
pub fn invariant_control_set_d2(
    a: &Matrix,
    b: &Matrix,
    k: &Matrix,
    range: (f64, f64),
    resolution: usize,
) -> Result<ControlSetOutcome> {
    let sys = FeedbackSystem::new(a, b, k)?;
    let dynamics = angle_dynamics_d2(&sys)?;
    if !(0.0..=1.0).contains(&range.0) || !(range.0 < range.1 && range.1 <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "control range {range:?} must be a nondegenerate subinterval of [0, 1]"
        )));
    }
    if resolution < 8 {
        return Err(Error::InvalidInput(format!(
            "resolution {resolution} below 8"
        )));
    }
    let cert = check_plarc(a, b, k, DEFAULT_PLARC_SAMPLES, 0)?;
    if !cert.verdict {
        return Ok(ControlSetOutcome::NotApplicable {
            reason: format!(
                "projected rank condition fails at {} sample points",
                cert.failing_samples.len()
            ),
        });
    }
    let n = resolution;
    let h = PI / n as f64;
    let mut graph = DiGraph::<(), ()>::with_capacity(n, 2 * n);
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for c in 0..n {
        let upper = ((c + 1) % n) as f64 * h;
        let lower = c as f64 * h;
        if dynamics.up(upper, range).0 > 0.0 {
            graph.add_edge(nodes[c], nodes[(c + 1) % n], ());
        }
        if dynamics.down(lower, range).0 > 0.0 {
            graph.add_edge(nodes[c], nodes[(c + n - 1) % n], ());
        }
    }
    let sccs = tarjan_scc(&graph);
    let mut component = vec![0usize; n];
    for (i, scc) in sccs.iter().enumerate() {
        for v in scc {
            component[v.index()] = i;
        }
    }
    let mut terminal = vec![true; sccs.len()];
    for e in graph.edge_indices() {
        let (s, t) = graph.edge_endpoints(e).expect("edge exists");
        if component[s.index()] != component[t.index()] {
            terminal[component[s.index()]] = false;
        }
    }
    let indicator: Vec<bool> = (0..n).map(|c| terminal[component[c]]).collect();
    let components = terminal.iter().filter(|&&t| t).count();
    Ok(ControlSetOutcome::Computed(ControlSetD2 {
        set: arcs_of(&indicator, h),
        resolution: n,
        control_range: range,
        components,
        indicator,
        dynamics,
    }))
}

fn arcs_of(indicator: &[bool], h: f64) -> CircleArcSet {
    let n = indicator.len();
    if indicator.iter().all(|&x| x) {
        return CircleArcSet::full();
    }
    let mut arcs = Vec::new();
    let mut c = 0;
    while c < n {
        if indicator[c] {
            let start = c;
            while c < n && indicator[c] {
                c += 1;
            }
            arcs.push((start as f64 * h, if c == n { PI } else { c as f64 * h }));
        } else {
            c += 1;
        }
    }
    CircleArcSet { arcs }
}

/// Result of steering one projective point to another.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Steering {
    /// Control segments with values at the ends of the control range.
    pub segments: Vec<Segment>,
    pub tau: f64,
    /// Grid bound on the steering time to this target, uniform over starts.
    pub tau_hat: f64,
    /// Angular distance between the reached point and the target.
    pub final_error: f64,
}

impl Steering {
    /// The steering control as an aperiodic signal. An empty control becomes
    /// the constant upper end of the range.
    pub fn signal(&self, range: (f64, f64)) -> Result<PESignal> {
        if self.segments.is_empty() {
            PESignal::aperiodic(vec![Segment::new(1.0, range.1)])
        } else {
            PESignal::aperiodic(self.segments.clone())
        }
    }
}

/// Upper bounds on the time to reach the target cell from every start cell
/// when travelling in one direction; `None` where some crossing is blocked.
/// Each cell costs its width over the smaller boundary speed, except that the
/// start cell only needs its exit speed and the target cell its entry speed
/// when the other one vanishes.
fn direction_times(cs: &ControlSetD2, target: usize, up: bool) -> Vec<Option<f64>> {
    let n = cs.resolution;
    let h = cs.h();
    let speed = |theta: f64| {
        if up {
            cs.dynamics.up(theta, cs.control_range).0
        } else {
            cs.dynamics.down(theta, cs.control_range).0
        }
    };
    // (entry, exit) boundary speeds of each cell in the travel direction.
    let speeds: Vec<(f64, f64)> = (0..n)
        .map(|c| {
            let (lo, hi) = (speed(cs.boundary(c)), speed(cs.boundary(c + 1)));
            if up {
                (lo, hi)
            } else {
                (hi, lo)
            }
        })
        .collect();
    let cost = |v: f64| if v > 0.0 { Some(h / v) } else { None };
    let (t_entry, t_exit) = speeds[target];
    let target_cost = if t_exit <= 0.0 {
        cost(t_entry)
    } else {
        cost(t_entry.min(t_exit))
    };
    let mut out = vec![None; n];
    out[target] = if t_entry <= 0.0 {
        cost(t_exit)
    } else {
        cost(t_entry.min(t_exit))
    };
    // Walk backwards from the target, accumulating the cost of the rest of
    // the path.
    let mut tail = target_cost;
    let prev = |c: usize| if up { (c + n - 1) % n } else { (c + 1) % n };
    let mut c = prev(target);
    while c != target {
        let (entry, exit) = speeds[c];
        if exit <= 0.0 {
            tail = None;
        } else {
            let start_cost = if entry <= 0.0 {
                cost(exit)
            } else {
                cost(entry.min(exit))
            };
            out[c] = start_cost.zip(tail).map(|(a, b)| a + b);
            tail = cost(entry.min(exit)).zip(tail).map(|(a, b)| a + b);
        }
        c = prev(c);
    }
    out
}

/// Time bound for reaching `target` from the worst grid cell.
pub fn steering_time_bound(cs: &ControlSetD2, target: f64) -> Result<f64> {
    let t = cs.cell_of(target);
    let up = direction_times(cs, t, true);
    let down = direction_times(cs, t, false);
    let mut worst: f64 = 0.0;
    for s in 0..cs.resolution {
        let best = match (up[s], down[s]) {
            (Some(u), Some(d)) => u.min(d),
            (Some(u), None) => u,
            (None, Some(d)) => d,
            (None, None) => {
                return Err(Error::Steering(format!(
                    "target angle {target} is not reachable from cell {s}"
                )))
            }
        };
        worst = worst.max(best);
    }
    Ok(1.1 * worst)
}

fn unwrap_near(theta: f64, reference: f64) -> f64 {
    theta + PI * ((reference - theta) / PI).round()
}

fn angle_of(x: &DVector<f64>) -> f64 {
    x[1].atan2(x[0])
}

/// Bang-bang steering of `q0` to `target` for the planar system `sys`.
///
/// The direction of travel comes from the grid bound; each step of length
/// `dt` applies the end of the control range that moves fastest that way.
/// The last step is shortened by bisection so the target is hit exactly.
pub fn steer_d2(
    q0: &ProjPoint,
    target: &ProjPoint,
    sys: &FeedbackSystem,
    cs: &ControlSetD2,
    dt: f64,
) -> Result<Steering> {
    let theta0 = q0.angle()?;
    let theta_t = target.angle()?;
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("step {dt} must be positive")));
    }
    if !cs.set.contains(theta_t) {
        return Err(Error::Steering(format!(
            "target angle {theta_t} lies outside the control set"
        )));
    }
    let tau_hat = steering_time_bound(cs, theta_t)?;
    if theta0 == theta_t {
        return Ok(Steering {
            segments: Vec::new(),
            tau: 0.0,
            tau_hat,
            final_error: 0.0,
        });
    }
    let (s, t) = (cs.cell_of(theta0), cs.cell_of(theta_t));
    let up = match (
        direction_times(cs, t, true)[s],
        direction_times(cs, t, false)[s],
    ) {
        (Some(u), Some(d)) => {
            // Inside one cell the short way wins; otherwise the faster bound.
            if s == t {
                theta_t > theta0
            } else {
                u <= d
            }
        }
        (Some(_), None) => true,
        (None, Some(_)) => false,
        (None, None) => {
            return Err(Error::Steering(format!(
                "no admissible direction from {theta0} to {theta_t}"
            )))
        }
    };
    let range = cs.control_range;
    let steps = [
        (range.0, expm(&sys.generator(range.0), dt)?),
        (range.1, expm(&sys.generator(range.1), dt)?),
    ];
    let goal = if up {
        theta0 + (theta_t - theta0).rem_euclid(PI)
    } else {
        theta0 - (theta0 - theta_t).rem_euclid(PI)
    };
    let passed = |phi: f64| if up { phi >= goal } else { phi <= goal };

    let mut x = q0.direction().clone();
    let mut phi = theta0;
    let mut best = phi;
    let mut since_progress = 0usize;
    let stall_limit = (1.0 / dt).ceil() as usize * 4;
    let max_steps = ((4.0 * tau_hat + 10.0) / dt).ceil() as usize;
    let mut segments: Vec<Segment> = Vec::new();
    let mut full_steps = 0usize;
    let push = |segments: &mut Vec<Segment>, dur: f64, v: f64| match segments.last_mut() {
        Some(last) if last.value == v => last.duration += dur,
        _ => segments.push(Segment::new(dur, v)),
    };
    for _ in 0..max_steps {
        let (_, control) = if up {
            cs.dynamics.up(phi, range)
        } else {
            cs.dynamics.down(phi, range)
        };
        let which = usize::from(control == range.1);
        let next = &steps[which].1 * &x;
        let next_phi = unwrap_near(angle_of(&next), phi);
        if passed(next_phi) {
            let m = sys.generator(control);
            let (mut lo, mut hi) = (0.0, dt);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                let y = expm(&m, mid)? * &x;
                if passed(unwrap_near(angle_of(&y), phi)) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            push(&mut segments, hi, control);
            let y = expm(&m, hi)? * &x;
            let reached = ProjPoint::new(&y)?.angle()?;
            let err = (reached - theta_t).rem_euclid(PI);
            return Ok(Steering {
                segments,
                tau: full_steps as f64 * dt + hi,
                tau_hat,
                final_error: err.min(PI - err),
            });
        }
        push(&mut segments, dt, control);
        full_steps += 1;
        let norm = next.norm();
        x = next / norm;
        phi = next_phi;
        let improved = if up { phi > best } else { phi < best };
        if improved {
            best = phi;
            since_progress = 0;
        } else {
            since_progress += 1;
            if since_progress > stall_limit {
                return Err(Error::Steering(format!(
                    "no progress toward {theta_t} from angle {}",
                    wrap(phi)
                )));
            }
        }
    }
    Err(Error::Steering(format!(
        "target {theta_t} not reached within {max_steps} steps"
    )))
}

/// Outcome of the forward-invariance simulation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvarianceAudit {
    pub points: usize,
    pub signals: usize,
    /// Largest angular distance from the set seen along any trajectory.
    pub max_excursion: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Start points spread over the grid boundaries nearest to the ends of each
/// arc, or evenly over the circle when the set is everything.
fn boundary_points(cs: &ControlSetD2, count: usize) -> Vec<f64> {
    let h = cs.h();
    if cs.set.is_full() {
        return (0..count).map(|i| i as f64 * PI / count as f64).collect();
    }
    let arcs = &cs.set.arcs;
    let per_end = count.div_ceil(2 * arcs.len());
    let mut out = Vec::with_capacity(count);
    'outer: for k in 0..per_end {
        for &(a, b) in arcs {
            let cells = ((b - a) / h).round() as usize;
            // Walk inward from both ends, wrapping around for short arcs.
            let step = (k % cells.max(1)) as f64 * h;
            for theta in [a + step, b - step] {
                if out.len() == count {
                    break 'outer;
                }
                out.push(wrap(theta.clamp(a, b)));
            }
        }
    }
    out
}

/// Simulates `points` start directions near the boundary of the set under
/// `signals` random piecewise-constant controls with values in the control
/// range, for time `horizon`, and records how far the trajectories leave the
/// set. The tolerance is `2π/resolution`.
pub fn audit_forward_invariance(
    sys: &FeedbackSystem,
    cs: &ControlSetD2,
    points: usize,
    signals: usize,
    horizon: f64,
    seed: u64,
) -> Result<InvarianceAudit> {
    const LEVELS: usize = 5;
    let dt = horizon / 512.0;
    let (lo, hi) = cs.control_range;
    let step_maps: Vec<Matrix> = (0..LEVELS)
        .map(|i| {
            expm(
                &sys.generator(lo + (hi - lo) * i as f64 / (LEVELS - 1) as f64),
                dt,
            )
        })
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let controls: Vec<Vec<usize>> = (0..signals)
        .map(|_| {
            let mut seq = Vec::with_capacity(512);
            while seq.len() < 512 {
                let level = rng.random_range(0..LEVELS);
                let len = rng.random_range(1..=32);
                seq.extend(std::iter::repeat_n(level, len));
            }
            seq.truncate(512);
            seq
        })
        .collect();
    let mut worst: f64 = 0.0;
    let starts = boundary_points(cs, points);
    for &theta in &starts {
        for seq in &controls {
            let mut x = DVector::from_vec(vec![theta.cos(), theta.sin()]);
            for &level in seq {
                x = &step_maps[level] * x;
                x /= x.norm();
                worst = worst.max(cs.set.distance(angle_of(&x)));
            }
        }
    }
    let tolerance = 2.0 * PI / cs.resolution as f64;
    Ok(InvarianceAudit {
        points: starts.len(),
        signals,
        max_excursion: worst,
        tolerance,
        passed: worst <= tolerance,
    })
}

/// Steering results for seeded starts and interior targets.
#[derive(Clone, Debug, Serialize)]
pub struct SteeringSummary {
    pub targets: usize,
    pub reached: usize,
    pub within_bound: usize,
    pub max_tau: f64,
    pub max_final_error: f64,
}

/// Steers seeded start points of the set to `count` targets spread over the
/// cells lying `margin` cells inside the set.
pub fn steering_trials(
    sys: &FeedbackSystem,
    cs: &ControlSetD2,
    count: usize,
    dt: f64,
    seed: u64,
) -> Result<SteeringSummary> {
    const MARGIN: usize = 2;
    let h = PI / cs.resolution as f64;
    let centre = |c: usize| (c as f64 + 0.5) * h;
    let inside: Vec<usize> = (0..cs.resolution).filter(|&c| cs.indicator[c]).collect();
    let interior: Vec<usize> = inside
        .iter()
        .copied()
        .filter(|&c| cs.is_interior(centre(c), MARGIN))
        .collect();
    if interior.is_empty() || count == 0 {
        return Err(Error::Steering("the set has no interior cells".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SteeringSummary {
        targets: count,
        reached: 0,
        within_bound: 0,
        max_tau: 0.0,
        max_final_error: 0.0,
    };
    for i in 0..count {
        let target = centre(interior[i * interior.len() / count]);
        let start = centre(inside[rng.random_range(0..inside.len())]);
        let st = steer_d2(
            &ProjPoint::from_angle(start),
            &ProjPoint::from_angle(target),
            sys,
            cs,
            dt,
        )?;
        let tol = 1e-8;
        if st.final_error <= tol {
            out.reached += 1;
        }
        if st.tau <= st.tau_hat {
            out.within_bound += 1;
        }
        out.max_tau = out.max_tau.max(st.tau);
        out.max_final_error = out.max_final_error.max(st.final_error);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{basis_column, gaussian_matrix, rotation_generator, shift};
    use crate::rates::fundamental_solution;

    fn diag(a: f64, b: f64) -> Matrix {
        Matrix::from_row_slice(2, 2, &[a, 0.0, 0.0, b])
    }

    fn computed(o: ControlSetOutcome) -> ControlSetD2 {
        match o {
            ControlSetOutcome::Computed(c) => c,
            ControlSetOutcome::NotApplicable { reason } => panic!("not applicable: {reason}"),
        }
    }

    #[test]
    fn proj_point_canonical() {
        let p = ProjPoint::new(&DVector::from_vec(vec![-3.0, 4.0])).unwrap();
        assert_eq!(p.direction().as_slice(), &[0.6, -0.8]);
        let q = ProjPoint::new(&DVector::from_vec(vec![0.0, -2.0])).unwrap();
        assert_eq!(q.direction().as_slice(), &[0.0, 1.0]);
        assert!(
            (ProjPoint::from_angle(3.0 * PI / 4.0).angle().unwrap() - 3.0 * PI / 4.0).abs() < 1e-15
        );
        assert!(ProjPoint::new(&DVector::zeros(2)).is_err());
    }

    #[test]
    fn project_field_examples() {
        let q = ProjPoint::from_angle(0.3);
        assert!(project_field(&Matrix::identity(2, 2), &q).unwrap().amax() < 1e-16);
        let e1 = ProjPoint::new(&DVector::from_vec(vec![1.0, 0.0])).unwrap();
        let v = project_field(&rotation_generator(), &e1).unwrap();
        assert!((v[1] - 1.0).abs() < 1e-16 && v[0].abs() < 1e-16);
        let v = project_field(&diag(1.0, -1.0), &ProjPoint::from_angle(PI / 4.0)).unwrap();
        assert!(v[0] > 0.5 && v[1] < -0.5);
    }

    #[test]
    fn project_field_ignores_identity_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for d in 2..=4 {
            let m = gaussian_matrix(&mut rng, d, d);
            let q =
                ProjPoint::new(&DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0))).unwrap();
            let shifted = &m + Matrix::identity(d, d) * 2.7;
            let diff = project_field(&m, &q).unwrap() - project_field(&shifted, &q).unwrap();
            assert!(diff.amax() < 1e-14);
        }
    }

    #[test]
    fn angle_dynamics_examples() {
        let zero_in = Matrix::zeros(2, 1);
        let zero_k = Matrix::zeros(1, 2);
        let rot = angle_dynamics_d2(
            &FeedbackSystem::new(&rotation_generator(), &zero_in, &zero_k).unwrap(),
        )
        .unwrap();
        for t in [0.0, 0.4, 2.0] {
            assert!((rot.f(t, 0.5) - 1.0).abs() < 1e-15 && rot.g(t, 0.5).abs() < 1e-15);
        }
        let (a, b) = (0.7, -1.3);
        let dd = angle_dynamics_d2(&FeedbackSystem::new(&diag(a, b), &zero_in, &zero_k).unwrap())
            .unwrap();
        for t in [0.1, 1.0, 2.5] {
            let (s, c) = f64::sin_cos(t);
            assert!((dd.f(t, 0.0) - (b - a) * s * c).abs() < 1e-15);
            assert!((dd.g(t, 0.0) - (a * c * c + b * s * s)).abs() < 1e-15);
            assert!((dd.f(t + PI, 0.3) - dd.f(t, 0.3)).abs() < 1e-14);
        }
    }

    #[test]
    fn polar_form_reproduces_trajectory() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let sys = FeedbackSystem::new(
                &gaussian_matrix(&mut rng, 2, 2),
                &gaussian_matrix(&mut rng, 2, 1),
                &gaussian_matrix(&mut rng, 1, 2),
            )
            .unwrap();
            let dynamics = angle_dynamics_d2(&sys).unwrap();
            let s =
                PESignal::periodic(vec![Segment::new(0.5, 1.0), Segment::new(0.5, 0.2)]).unwrap();
            let theta0: f64 = rng.random_range(0.0..PI);
            // RK4 on (θ, log|x|) with steps aligned to the switch.
            let (mut th, mut lg) = (theta0, 0.0);
            let n = 20_000;
            let h = 1.0 / n as f64;
            for i in 0..n {
                let al = s.value_at((i as f64 + 0.5) * h);
                let k1 = (dynamics.f(th, al), dynamics.g(th, al));
                let k2 = (
                    dynamics.f(th + 0.5 * h * k1.0, al),
                    dynamics.g(th + 0.5 * h * k1.0, al),
                );
                let k3 = (
                    dynamics.f(th + 0.5 * h * k2.0, al),
                    dynamics.g(th + 0.5 * h * k2.0, al),
                );
                let k4 = (dynamics.f(th + h * k3.0, al), dynamics.g(th + h * k3.0, al));
                th += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
                lg += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
            }
            let x = fundamental_solution(&sys, &s, 1.0).unwrap()
                * DVector::from_vec(vec![theta0.cos(), theta0.sin()]);
            assert!((lg - x.norm().ln()).abs() < 1e-6);
            let d = (wrap(th) - ProjPoint::new(&x).unwrap().angle().unwrap()).rem_euclid(PI);
            assert!(d.min(PI - d) < 1e-6);
        }
    }

    #[test]
    fn rotation_gives_full_circle() {
        let cs = computed(
            invariant_control_set_d2(
                &rotation_generator(),
                &Matrix::zeros(2, 1),
                &Matrix::zeros(1, 2),
                (0.4, 1.0),
                512,
            )
            .unwrap(),
        );
        assert!(cs.set.is_full());
        assert_eq!(cs.components, 1);
    }

    #[test]
    fn saddle_gives_arc_at_attracting_direction() {
        let b = Matrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let k = Matrix::from_row_slice(1, 2, &[0.05, -0.05]);
        let cs =
            computed(invariant_control_set_d2(&diag(1.0, -1.0), &b, &k, (0.4, 1.0), 1024).unwrap());
        // Equilibria solve sin 2θ = 0.05α/(1 + 0.05α) for α in [0.4, 1].
        let lo = (0.02f64 / 1.02).asin() / 2.0;
        let hi = (0.05f64 / 1.05).asin() / 2.0;
        assert_eq!(cs.set.arcs.len(), 1);
        let (start, end) = cs.set.arcs[0];
        let h = PI / 1024.0;
        assert!(
            (start - lo).abs() < 2.0 * h && (end - hi).abs() < 2.0 * h,
            "{start} {end} vs {lo} {hi}"
        );
        assert!(!cs.set.contains(PI / 2.0));
        let sys = FeedbackSystem::new(&diag(1.0, -1.0), &b, &k).unwrap();
        let audit = audit_forward_invariance(&sys, &cs, 40, 20, 4.0, 3).unwrap();
        assert!(audit.passed, "{audit:?}");
    }

    #[test]
    fn non_plarc_is_not_applicable() {
        let out = invariant_control_set_d2(
            &diag(1.0, 2.0),
            &Matrix::from_row_slice(2, 1, &[1.0, 0.0]),
            &Matrix::from_row_slice(1, 2, &[1.0, 0.0]),
            (0.5, 1.0),
            256,
        )
        .unwrap();
        assert!(matches!(out, ControlSetOutcome::NotApplicable { .. }));
    }

    #[test]
    fn rotation_steering_within_pi() {
        let sys = FeedbackSystem::new(
            &rotation_generator(),
            &Matrix::zeros(2, 1),
            &Matrix::zeros(1, 2),
        )
        .unwrap();
        let cs = computed(
            invariant_control_set_d2(
                &sys.a,
                &Matrix::zeros(2, 1),
                &Matrix::zeros(1, 2),
                (0.4, 1.0),
                1024,
            )
            .unwrap(),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let q0 = ProjPoint::from_angle(rng.random_range(0.0..PI));
            let qt = ProjPoint::from_angle(rng.random_range(0.0..PI));
            let st = steer_d2(&q0, &qt, &sys, &cs, 1.0 / 256.0).unwrap();
            assert!(st.tau <= PI + 1e-12);
            assert!(st.tau <= st.tau_hat);
            assert!(st.final_error < 1e-10);
        }
        let q = ProjPoint::from_angle(1.0);
        let st = steer_d2(&q, &q, &sys, &cs, 1.0 / 256.0).unwrap();
        assert_eq!(st.tau, 0.0);
        assert!(st.segments.is_empty());
    }

    #[test]
    fn steering_random_full_circle_system() {
        let sys = FeedbackSystem::new(
            &shift(2),
            &basis_column(2, 2),
            &Matrix::from_row_slice(1, 2, &[-2.0, -1.0]),
        )
        .unwrap();
        let b = basis_column(2, 2);
        let k = Matrix::from_row_slice(1, 2, &[-2.0, -1.0]);
        let cs = computed(invariant_control_set_d2(&sys.a, &b, &k, (0.4, 1.0), 2048).unwrap());
        assert!(cs.set.is_full());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let q0 = ProjPoint::from_angle(rng.random_range(0.0..PI));
            let qt = ProjPoint::from_angle(rng.random_range(0.0..PI));
            let st = steer_d2(&q0, &qt, &sys, &cs, 1.0 / 256.0).unwrap();
            assert!(st.tau <= st.tau_hat, "{} > {}", st.tau, st.tau_hat);
            assert!(st.final_error < 1e-9);
            assert!(st.segments.iter().all(|s| s.value == 0.4 || s.value == 1.0));
        }
    }

    #[test]
    fn arc_set_distance() {
        let s = CircleArcSet {
            arcs: vec![(0.2, 0.5)],
        };
        assert_eq!(s.distance(0.3), 0.0);
        assert!((s.distance(0.6) - 0.1).abs() < 1e-15);
        assert!((s.distance(PI + 0.1) - 0.1).abs() < 1e-12);
        assert!((s.distance(PI - 0.05) - 0.25).abs() < 1e-12);
    }
}
