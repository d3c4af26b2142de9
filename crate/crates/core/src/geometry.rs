//! Concrete geometry for the one-dimensional network set.
//!
//! Distance queries against a network need a representation of its
//! connecting orbits; we sample each one into a polyline by integrating from
//! just off the source equilibrium along an unstable direction until the
//! trajectory lands on the target equilibrium. Equilibrium positions are
//! appended to both ends so the polylines close up.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::FlowError;
use crate::flow::{dist, integrate, linearize_at, IntegrateOptions, Tolerances, VectorField};
use crate::network::{ConnectionId, EquilibriumId, HeteroclinicNetwork};

/// Options for tracing connection polylines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceOptions {
    /// Launch offset from the source equilibrium along the unstable direction.
    pub start_offset: f64,
    /// Tracing stops when the state comes this close to the target.
    pub stop_radius: f64,
    /// Resampled points per connection.
    pub points_per_connection: usize,
    /// Give up after this much flow time.
    pub t_max: f64,
    pub tol: Tolerances,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            start_offset: 1e-7,
            stop_radius: 1e-7,
            points_per_connection: 500,
            t_max: 200.0,
            tol: Tolerances { rel: 1e-10, abs: 1e-12 },
        }
    }
}

/// Polyline samplings of every connection plus the equilibrium points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkGeometry {
    dim: usize,
    equilibria: BTreeMap<EquilibriumId, Vec<f64>>,
    polylines: BTreeMap<ConnectionId, Polyline>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub points: Vec<Vec<f64>>,
    /// Axis-aligned bounds used to prune distance queries.
    bbox_lo: Vec<f64>,
    bbox_hi: Vec<f64>,
    arc_length: f64,
}

impl Polyline {
    pub fn new(points: Vec<Vec<f64>>) -> Self {
        let dim = points.first().map(|p| p.len()).unwrap_or(0);
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        let mut arc = 0.0;
        for (i, p) in points.iter().enumerate() {
            for (k, &v) in p.iter().enumerate() {
                lo[k] = lo[k].min(v);
                hi[k] = hi[k].max(v);
            }
            if i > 0 {
                arc += dist(p, &points[i - 1]);
            }
        }
        Self { points, bbox_lo: lo, bbox_hi: hi, arc_length: arc }
    }

    pub fn arc_length(&self) -> f64 {
        self.arc_length
    }

    pub fn bbox(&self) -> (&[f64], &[f64]) {
        (&self.bbox_lo, &self.bbox_hi)
    }

    /// Point at a given fraction of the arc length.
    pub fn point_at_fraction(&self, fraction: f64) -> Vec<f64> {
        let target = self.arc_length * fraction.clamp(0.0, 1.0);
        let mut walked = 0.0;
        for w in self.points.windows(2) {
            let seg = dist(&w[0], &w[1]);
            if walked + seg >= target && seg > 0.0 {
                let t = (target - walked) / seg;
                return w[0]
                    .iter()
                    .zip(&w[1])
                    .map(|(a, b)| a + t * (b - a))
                    .collect();
            }
            walked += seg;
        }
        self.points.last().cloned().unwrap_or_default()
    }

    /// Distance from the bounding box (zero inside).
    fn bbox_distance(&self, x: &[f64]) -> f64 {
        let mut sum = 0.0;
        for (k, &v) in x.iter().enumerate() {
            let d = if v < self.bbox_lo[k] {
                self.bbox_lo[k] - v
            } else if v > self.bbox_hi[k] {
                v - self.bbox_hi[k]
            } else {
                0.0
            };
            sum += d * d;
        }
        sum.sqrt()
    }

    fn distance_to(&self, x: &[f64], best: f64) -> f64 {
        if self.bbox_distance(x) >= best {
            return f64::INFINITY;
        }
        let mut min = f64::INFINITY;
        for w in self.points.windows(2) {
            min = min.min(point_segment_distance(x, &w[0], &w[1]));
        }
        min
    }

    /// Subdivides segments until none is longer than `max_len`.
    pub fn refined(&self, max_len: f64) -> Polyline {
        let mut points = Vec::with_capacity(self.points.len());
        for w in self.points.windows(2) {
            points.push(w[0].clone());
            let seg = dist(&w[0], &w[1]);
            if seg > max_len {
                let pieces = (seg / max_len).ceil() as usize;
                for i in 1..pieces {
                    let t = i as f64 / pieces as f64;
                    points.push(
                        w[0].iter().zip(&w[1]).map(|(a, b)| a + t * (b - a)).collect(),
                    );
                }
            }
        }
        if let Some(last) = self.points.last() {
            points.push(last.clone());
        }
        Polyline::new(points)
    }

    pub fn max_segment_length(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| dist(&w[0], &w[1]))
            .fold(0.0, f64::max)
    }
}

/// Distance from `x` to the segment `[a, b]`.
pub fn point_segment_distance(x: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let mut ab_sq = 0.0;
    let mut ax_dot_ab = 0.0;
    for k in 0..x.len() {
        let ab = b[k] - a[k];
        ab_sq += ab * ab;
        ax_dot_ab += (x[k] - a[k]) * ab;
    }
    let t = if ab_sq > 0.0 { (ax_dot_ab / ab_sq).clamp(0.0, 1.0) } else { 0.0 };
    let mut sum = 0.0;
    for k in 0..x.len() {
        let closest = a[k] + t * (b[k] - a[k]);
        let d = x[k] - closest;
        sum += d * d;
    }
    sum.sqrt()
}

impl NetworkGeometry {
    /// Builds geometry from explicit polylines (used by tests and callers
    /// that bring their own samplings).
    pub fn from_polylines(
        net: &HeteroclinicNetwork,
        polylines: BTreeMap<ConnectionId, Vec<Vec<f64>>>,
    ) -> Self {
        Self {
            dim: net.ambient_dim(),
            equilibria: net
                .equilibria()
                .iter()
                .map(|e| (e.id, e.position.clone()))
                .collect(),
            polylines: polylines
                .into_iter()
                .map(|(id, pts)| (id, Polyline::new(pts)))
                .collect(),
        }
    }

    /// Traces every connection of `net` under `field`.
    ///
    /// The launch direction at the source is the projection of
    /// `witness − source` onto the unstable eigenspace, which picks the
    /// correct branch at nodes with several outgoing connections. Tracing
    /// fails if the trajectory does not reach the declared target.
    pub fn trace(
        net: &HeteroclinicNetwork,
        field: &VectorField,
        opts: &TraceOptions,
    ) -> Result<Self, FlowError> {
        let mut polylines = BTreeMap::new();
        for conn in net.connections() {
            let source = &net.equilibrium(conn.source).expect("validated").position;
            let target = &net.equilibrium(conn.target).expect("validated").position;
            let lin = linearize_at(field, source, 1e-6).map_err(|e| FlowError::TraceFailed {
                connection: conn.id.0,
                reason: format!("linearization at source failed: {e}"),
            })?;
            let unstable = lin.real_unstable_directions(1e-9);
            if unstable.is_empty() {
                return Err(FlowError::TraceFailed {
                    connection: conn.id.0,
                    reason: "source has no real unstable direction".into(),
                });
            }
            // Project (witness - source) onto the unstable span.
            let rel: Vec<f64> = conn.witness.iter().zip(source).map(|(w, s)| w - s).collect();
            let mut dir = vec![0.0; net.ambient_dim()];
            for (_, v) in &unstable {
                let dot: f64 = rel.iter().zip(v).map(|(r, vi)| r * vi).sum();
                for (d, vi) in dir.iter_mut().zip(v) {
                    *d += dot * vi;
                }
            }
            let dir_norm = crate::flow::norm(&dir);
            let dir = if dir_norm > 1e-10 {
                dir.iter().map(|d| d / dir_norm).collect::<Vec<_>>()
            } else {
                // Witness gives no signal; fall back to the fastest direction.
                unstable
                    .iter()
                    .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
                    .unwrap()
                    .1
                    .clone()
            };

            let start: Vec<f64> = source
                .iter()
                .zip(&dir)
                .map(|(s, d)| s + opts.start_offset * d)
                .collect();

            let raw = trace_until(field, &start, target, conn.id.0, opts)?;
            let mut points = Vec::with_capacity(raw.len() + 2);
            points.push(source.clone());
            points.extend(raw);
            points.push(target.clone());
            let line = Polyline::new(points);
            // Resample to the requested density; keep the raw vertices when
            // they are already finer.
            let spacing = line.arc_length() / opts.points_per_connection as f64;
            let line = if line.max_segment_length() > spacing { line.refined(spacing) } else { line };
            polylines.insert(conn.id, line);
        }
        Ok(Self {
            dim: net.ambient_dim(),
            equilibria: net
                .equilibria()
                .iter()
                .map(|e| (e.id, e.position.clone()))
                .collect(),
            polylines,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn polyline(&self, id: ConnectionId) -> Option<&Polyline> {
        self.polylines.get(&id)
    }

    pub fn polylines(&self) -> &BTreeMap<ConnectionId, Polyline> {
        &self.polylines
    }

    pub fn equilibrium_position(&self, id: EquilibriumId) -> Option<&Vec<f64>> {
        self.equilibria.get(&id)
    }

    pub fn equilibria(&self) -> &BTreeMap<EquilibriumId, Vec<f64>> {
        &self.equilibria
    }

    /// Minimum distance from `x` to the sampled network: all polyline
    /// segments and all equilibrium points, with bounding-box pruning.
    pub fn distance_to_network(&self, x: &[f64]) -> f64 {
        let mut best = f64::INFINITY;
        for p in self.equilibria.values() {
            best = best.min(dist(x, p));
        }
        for line in self.polylines.values() {
            let d = line.distance_to(x, best);
            best = best.min(d);
        }
        best
    }

    /// Nearest polyline point (vertex) to `x`, with its connection.
    pub fn nearest_vertex(&self, x: &[f64]) -> Option<(ConnectionId, Vec<f64>, f64)> {
        let mut best: Option<(ConnectionId, Vec<f64>, f64)> = None;
        for (&id, line) in &self.polylines {
            for p in &line.points {
                let d = dist(x, p);
                if best.as_ref().map(|b| d < b.2).unwrap_or(true) {
                    best = Some((id, p.clone(), d));
                }
            }
        }
        best
    }

    /// Ensures every segment is shorter than `max_len`.
    pub fn refined(&self, max_len: f64) -> Self {
        Self {
            dim: self.dim,
            equilibria: self.equilibria.clone(),
            polylines: self
                .polylines
                .iter()
                .map(|(&id, line)| (id, line.refined(max_len)))
                .collect(),
        }
    }

    /// Union bounding box of all polylines, inflated by `margin`.
    pub fn bounding_box(&self, margin: f64) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for line in self.polylines.values() {
            let (l, h) = line.bbox();
            for k in 0..self.dim {
                lo[k] = lo[k].min(l[k] - margin);
                hi[k] = hi[k].max(h[k] + margin);
            }
        }
        for p in self.equilibria.values() {
            for k in 0..self.dim {
                lo[k] = lo[k].min(p[k] - margin);
                hi[k] = hi[k].max(p[k] + margin);
            }
        }
        (lo, hi)
    }
}

/// Integrates forward until within `stop_radius` of `target`, recording the
/// accepted steps. Chunked so the stop check can interrupt the flow.
fn trace_until(
    field: &VectorField,
    start: &[f64],
    target: &[f64],
    connection: u32,
    opts: &TraceOptions,
) -> Result<Vec<Vec<f64>>, FlowError> {
    let chunk = (opts.t_max / 64.0).max(1.0);
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut current = start.to_vec();
    let mut elapsed = 0.0;
    let integrate_opts = IntegrateOptions {
        tol: opts.tol,
        max_step: Some(0.05),
        escape_radius: 1e6,
        ..Default::default()
    };
    while elapsed < opts.t_max {
        let record = integrate(field, &current, chunk, &integrate_opts, None).map_err(|e| {
            FlowError::TraceFailed { connection, reason: format!("integration failed: {e}") }
        })?;
        for state in &record.states {
            points.push(state.clone());
            if dist(state, target) < opts.stop_radius {
                return Ok(points);
            }
        }
        current = record.final_state().to_vec();
        elapsed += chunk;
    }
    Err(FlowError::TraceFailed {
        connection,
        reason: format!(
            "did not reach the target within t = {} (final distance {:.3e})",
            opts.t_max,
            dist(&current, target)
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Simple L-shaped polyline in the plane.
    fn sample_geometry() -> NetworkGeometry {
        let net = crate::network::kirk_silber_graph();
        let mut lines = BTreeMap::new();
        // Only connection 1 gets a polyline here; enough for distance tests.
        let points: Vec<Vec<f64>> = (0..=100)
            .map(|i| {
                let t = i as f64 / 100.0;
                // Quarter circle from (1,0,0,0) to (0,1,0,0).
                let angle = t * std::f64::consts::FRAC_PI_2;
                vec![angle.cos(), angle.sin(), 0.0, 0.0]
            })
            .collect();
        lines.insert(ConnectionId(1), points);
        NetworkGeometry::from_polylines(&net, lines)
    }

    #[test]
    fn point_on_a_vertex_has_zero_distance() {
        let geom = sample_geometry();
        let p = geom.polyline(ConnectionId(1)).unwrap().points[17].clone();
        assert!(geom.distance_to_network(&p) < 1e-12);
    }

    #[test]
    fn offset_point_reports_the_offset() {
        let geom = sample_geometry();
        // Radially outside the quarter circle by 0.025.
        let x = vec![1.025 * (0.3_f64).cos(), 1.025 * (0.3_f64).sin(), 0.0, 0.0];
        let d = geom.distance_to_network(&x);
        let seg = geom.polyline(ConnectionId(1)).unwrap().max_segment_length();
        assert!((d - 0.025).abs() < seg * seg); // chord error is quadratic
    }

    #[test]
    fn distance_matches_a_refined_vertex_oracle() {
        let geom = sample_geometry();
        let coarse_seg = geom.polyline(ConnectionId(1)).unwrap().max_segment_length();
        let refined = geom.refined(coarse_seg / 10.0);
        let mut state = 0.123_f64;
        for _ in 0..50 {
            // Cheap deterministic pseudo-random points near the arc.
            state = (state * 97.31 + 0.17).fract();
            let a = state * 1.4;
            state = (state * 57.13 + 0.71).fract();
            let r = 0.8 + 0.4 * state;
            let x = vec![r * a.cos(), r * a.sin(), 0.1 * state, 0.0];
            let fast = geom.distance_to_network(&x);
            // Brute-force oracle: nearest vertex of the 10x refined sampling,
            // no segment projection involved.
            let mut brute = f64::INFINITY;
            for p in geom.equilibria().values() {
                brute = brute.min(dist(&x, p));
            }
            for line in refined.polylines().values() {
                for p in &line.points {
                    brute = brute.min(dist(&x, p));
                }
            }
            assert!(
                (fast - brute).abs() <= coarse_seg,
                "disagreement {fast} vs {brute} beyond segment length {coarse_seg}"
            );
        }
    }

    #[test]
    fn refinement_shortens_segments() {
        let geom = sample_geometry();
        let line = geom.polyline(ConnectionId(1)).unwrap();
        let refined = line.refined(line.max_segment_length() / 7.0);
        assert!(refined.max_segment_length() <= line.max_segment_length() / 7.0 + 1e-12);
        assert_relative_eq!(refined.arc_length(), line.arc_length(), max_relative = 1e-9);
    }

    #[test]
    fn fraction_half_sits_mid_arc() {
        let geom = sample_geometry();
        let mid = geom.polyline(ConnectionId(1)).unwrap().point_at_fraction(0.5);
        let expect = [std::f64::consts::FRAC_PI_4.cos(), std::f64::consts::FRAC_PI_4.sin()];
        assert_relative_eq!(mid[0], expect[0], epsilon = 1e-3);
        assert_relative_eq!(mid[1], expect[1], epsilon = 1e-3);
    }

    #[test]
    fn segment_distance_basics() {
        let a = [0.0, 0.0];
        let b = [1.0, 0.0];
        assert_relative_eq!(point_segment_distance(&[0.5, 0.7], &a, &b), 0.7);
        assert_relative_eq!(point_segment_distance(&[2.0, 0.0], &a, &b), 1.0);
        assert_relative_eq!(point_segment_distance(&[-3.0, 4.0], &a, &b), 5.0);
        // Degenerate segment falls back to point distance.
        assert_relative_eq!(point_segment_distance(&[3.0, 4.0], &a, &a), 5.0);
    }
}
