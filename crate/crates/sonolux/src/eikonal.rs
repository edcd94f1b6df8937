//! First-order fast-marching solver for the eikonal equation `|grad tau| = 1/c`
//! and gradient access to the resulting travel-time field.
//!
//! The solver uses the upwind Godunov discretization with a binary heap,
//! applied to the additively factored unknown `T = tau - tau0` where
//! `tau0(y) = |y - x| / c(x)` is the analytic constant-speed distance. The
//! factorization removes the point-source singularity from the discretized
//! quantity: the scheme is exact for constant speed and retains plain
//! first-order behavior elsewhere. The 3x3x3 neighborhood of the source is
//! seeded with exact constant-speed distances at the local speed.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::grid::{dist3, Grid3, GridGeometry, VecField3};
use crate::media::Phantom;

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapEntry {
    tau: f64,
    idx: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on tau via reversed total order.
        other.tau.total_cmp(&self.tau).then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Travel-time field from a fixed source point, with precomputed node
/// gradients for interpolation and geodesic tracing.
#[derive(Debug, Clone)]
pub struct TravelTimeField {
    /// Source position snapped to a grid node.
    pub source: [f64; 3],
    pub source_node: [usize; 3],
    pub geom: GridGeometry,
    pub tau: Grid3,
    /// Acceptance mask of the marching; all reachable nodes end up frozen.
    pub frozen: Vec<bool>,
    grad: VecField3,
}

const STATE_FAR: u8 = 0;
const STATE_NARROW: u8 = 1;
const STATE_ACCEPTED: u8 = 2;

/// Solve `|grad tau| = 1/c` from source `x` by first-order fast marching.
///
/// The source is snapped to the nearest grid node. Rejects non-positive
/// speed. Converges to the viscosity solution as the grid is refined.
pub fn solve_travel_time(phantom: &Phantom, x: [f64; 3]) -> Result<TravelTimeField> {
    solve_travel_time_with_seed(phantom, x, 1)
}

/// Fast marching with an explicit exact-seed radius (in nodes) around the
/// source. Radius 1 seeds the 3x3x3 neighborhood; larger radii trade the
/// point-singularity error against the local-speed approximation inside the
/// seed ball.
pub fn solve_travel_time_with_seed(
    phantom: &Phantom,
    x: [f64; 3],
    seed_radius: i64,
) -> Result<TravelTimeField> {
    if phantom.c.min() <= 0.0 {
        return Err(Error::Config("sound speed must be positive everywhere".into()));
    }
    let seed_radius = seed_radius.max(1);
    let geom = phantom.geom;
    let src_node = geom.nearest_node(x)?;
    let src = geom.node(src_node[0], src_node[1], src_node[2]);
    let h = geom.spacing;
    let [nx, ny, nz] = geom.dims;
    let n = geom.len();

    let mut tau = vec![f64::INFINITY; n];
    let mut tfac = vec![f64::INFINITY; n]; // factored unknown T = tau - tau0
    let mut state = vec![STATE_FAR; n];
    let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::new();

    // Seed the neighborhood with exact constant-speed distances (T = 0).
    let c_src = phantom.c.at(src_node[0], src_node[1], src_node[2]);
    let r = seed_radius;
    let mut seeded: Vec<[usize; 3]> = Vec::new();
    for dk in -r..=r {
        for dj in -r..=r {
            for di in -r..=r {
                if di * di + dj * dj + dk * dk > r * r + 1 {
                    continue;
                }
                let i = src_node[0] as i64 + di;
                let j = src_node[1] as i64 + dj;
                let k = src_node[2] as i64 + dk;
                if i < 0 || j < 0 || k < 0 || i >= nx as i64 || j >= ny as i64 || k >= nz as i64 {
                    continue;
                }
                let (i, j, k) = (i as usize, j as usize, k as usize);
                let idx = geom.idx(i, j, k);
                let p = geom.node(i, j, k);
                tau[idx] = dist3(p, src) / c_src;
                tfac[idx] = 0.0;
                state[idx] = STATE_ACCEPTED;
                seeded.push([i, j, k]);
            }
        }
    }

    let offsets: [(i64, i64, i64); 6] =
        [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)];
    let update_neighbors = |node: [usize; 3],
                            tau: &mut Vec<f64>,
                            tfac: &mut Vec<f64>,
                            state: &mut Vec<u8>,
                            heap: &mut BinaryHeap<HeapEntry>| {
        for (di, dj, dk) in offsets {
            let i = node[0] as i64 + di;
            let j = node[1] as i64 + dj;
            let k = node[2] as i64 + dk;
            if i < 0 || j < 0 || k < 0 || i >= nx as i64 || j >= ny as i64 || k >= nz as i64 {
                continue;
            }
            let (i, j, k) = (i as usize, j as usize, k as usize);
            let idx = geom.idx(i, j, k);
            if state[idx] == STATE_ACCEPTED {
                continue;
            }
            let slowness = 1.0 / phantom.c.at(i, j, k);
            if let Some((new_tau, new_t)) = factored_update(
                &geom, tau, tfac, state, [i, j, k], slowness, src, c_src, h,
            ) {
                if new_tau < tau[idx] {
                    tau[idx] = new_tau;
                    tfac[idx] = new_t;
                    state[idx] = STATE_NARROW;
                    heap.push(HeapEntry { tau: new_tau, idx });
                }
            }
        }
    };

    for node in &seeded {
        update_neighbors(*node, &mut tau, &mut tfac, &mut state, &mut heap);
    }

    while let Some(HeapEntry { tau: t, idx }) = heap.pop() {
        if state[idx] == STATE_ACCEPTED || t > tau[idx] {
            continue;
        }
        state[idx] = STATE_ACCEPTED;
        let k = idx / (nx * ny);
        let j = (idx / nx) % ny;
        let i = idx % nx;
        update_neighbors([i, j, k], &mut tau, &mut tfac, &mut state, &mut heap);
    }

    let frozen: Vec<bool> = state.iter().map(|&s| s == STATE_ACCEPTED).collect();
    let tau_field = Grid3::new(geom, tau)?;
    let grad = VecField3::gradient_of(&tau_field);
    Ok(TravelTimeField { source: src, source_node: src_node, geom, tau: tau_field, frozen, grad })
}

/// Upwind Godunov update of the factored unknown at `node`.
///
/// With `tau = tau0 + T`, the gradient component along axis `i` is
/// approximated as `g_i - s_i (T - T_i)/h` where `g_i` is the analytic
/// derivative of `tau0` at the node and `(s_i, T_i)` the upwind neighbor.
/// Solving `sum_i (g_i - s_i (T - T_i)/h)^2 = 1/c^2` gives a quadratic in T;
/// axes violating the upwind (causality) condition are dropped and the
/// system re-solved, as in the plain Godunov scheme.
#[allow(clippy::too_many_arguments)]
fn factored_update(
    geom: &GridGeometry,
    tau: &[f64],
    tfac: &[f64],
    state: &[u8],
    node: [usize; 3],
    slowness: f64,
    src: [f64; 3],
    c_src: f64,
    h: f64,
) -> Option<(f64, f64)> {
    let dims = geom.dims;
    let p = geom.node(node[0], node[1], node[2]);
    let r = dist3(p, src);
    if r < 1e-12 {
        return Some((0.0, 0.0));
    }
    let g = [
        (p[0] - src[0]) / (r * c_src),
        (p[1] - src[1]) / (r * c_src),
        (p[2] - src[2]) / (r * c_src),
    ];

    // Upwind neighbor per axis: the accepted side with smaller tau.
    struct Arm {
        axis: usize,
        sign: f64,
        t_nb: f64,
        tau_nb: f64,
    }
    let mut arms: Vec<Arm> = Vec::with_capacity(3);
    for axis in 0..3 {
        let mut best: Option<Arm> = None;
        for sign in [-1i64, 1i64] {
            let q = node[axis] as i64 + sign;
            if q < 0 || q >= dims[axis] as i64 {
                continue;
            }
            let mut m = node;
            m[axis] = q as usize;
            let idx = geom.idx(m[0], m[1], m[2]);
            if state[idx] != STATE_ACCEPTED {
                continue;
            }
            if best.as_ref().map_or(true, |b| tau[idx] < b.tau_nb) {
                best = Some(Arm { axis, sign: sign as f64, t_nb: tfac[idx], tau_nb: tau[idx] });
            }
        }
        if let Some(arm) = best {
            arms.push(arm);
        }
    }
    if arms.is_empty() {
        return None;
    }

    let tau0_here = r / c_src;
    loop {
        // sum_i (A_i t + B_i)^2 = slowness^2 with A_i = -s_i/h,
        // B_i = g_i + s_i T_i / h.
        let mut qa = 0.0;
        let mut qb = 0.0;
        let mut qc = -slowness * slowness;
        for arm in &arms {
            let a = -arm.sign / h;
            let b = g[arm.axis] + arm.sign * arm.t_nb / h;
            qa += a * a;
            qb += 2.0 * a * b;
            qc += b * b;
        }
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= 0.0 {
            let t = (-qb + disc.sqrt()) / (2.0 * qa);
            // Causality: each used component must point away from its
            // upwind neighbor, and the node value must not undercut it.
            let mut worst: Option<(usize, f64)> = None;
            for (ai, arm) in arms.iter().enumerate() {
                let comp = g[arm.axis] - arm.sign * (t - arm.t_nb) / h;
                let violation = arm.sign * comp;
                let tau_here = tau0_here + t;
                let monotone_violation = arm.tau_nb - tau_here;
                let v = violation.max(monotone_violation / h);
                if v > 1e-12 && worst.map_or(true, |(_, w)| v > w) {
                    worst = Some((ai, v));
                }
            }
            match worst {
                None => return Some((tau0_here + t, t)),
                Some((ai, _)) if arms.len() > 1 => {
                    arms.remove(ai);
                    continue;
                }
                _ => {}
            }
        } else if arms.len() > 1 {
            // Drop the arm with the largest neighbor tau and retry.
            let (ai, _) = arms
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.tau_nb.total_cmp(&b.1.tau_nb))?;
            arms.remove(ai);
            continue;
        }
        // Unfactored one-dimensional fallback from the best neighbor.
        let arm = arms.iter().min_by(|a, b| a.tau_nb.total_cmp(&b.tau_nb))?;
        let tau_new = arm.tau_nb + h * slowness;
        return Some((tau_new, tau_new - tau0_here));
    }
}

impl TravelTimeField {
    /// Interpolated travel time at `y`.
    pub fn value_at(&self, y: [f64; 3]) -> Result<f64> {
        self.tau.interp(y)
    }

    /// Interpolated gradient of tau at `y`.
    ///
    /// Returns the gradient and a warning flag set when `y` lies within one
    /// cell of the source, where the interpolated central differences lose
    /// accuracy against the conical singularity.
    pub fn grad_at(&self, y: [f64; 3]) -> Result<([f64; 3], bool)> {
        let g = self.grad.interp(y)?;
        let near = (0..3).all(|a| (y[a] - self.source[a]).abs() <= self.geom.spacing + 1e-12);
        Ok((g, near))
    }

    /// Distance from `y` to the source.
    pub fn source_distance(&self, y: [f64; 3]) -> f64 {
        dist3(y, self.source)
    }

    /// Median of `| |grad tau| c - 1 |` over interior accepted nodes farther
    /// than `exclude_radius` from the source.
    pub fn eikonal_residual_median(&self, phantom: &Phantom, exclude_radius: f64) -> f64 {
        let g = self.geom;
        let mut residuals = Vec::new();
        for [i, j, k] in g.iter_nodes() {
            if i == 0 || j == 0 || k == 0 || i == g.dims[0] - 1 || j == g.dims[1] - 1
                || k == g.dims[2] - 1
            {
                continue;
            }
            let idx = g.idx(i, j, k);
            if !self.frozen[idx] {
                continue;
            }
            let p = g.node(i, j, k);
            if dist3(p, self.source) < exclude_radius {
                continue;
            }
            let grad = self.tau.node_gradient(i, j, k);
            let norm = (grad[0] * grad[0] + grad[1] * grad[1] + grad[2] * grad[2]).sqrt();
            residuals.push((norm * phantom.c.at(i, j, k) - 1.0).abs());
        }
        median(&mut residuals)
    }
}

pub(crate) fn median(values: &mut Vec<f64>) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Independent reference solvers used by tests to cross-check the fast
/// marching implementation. These deliberately share no code with the
/// solver above.
pub mod oracles {
    use super::*;

    /// Dijkstra shortest-path travel time on a weighted lattice graph.
    ///
    /// Edges connect nodes within Chebyshev radius `radius` (deduplicated by
    /// direction); edge weight is the Euclidean length times the average
    /// slowness of the endpoints. Overestimates the continuum travel time by
    /// the lattice anisotropy.
    pub fn dijkstra_travel_time(phantom: &Phantom, source_node: [usize; 3], radius: i64) -> Grid3 {
        let geom = phantom.geom;
        let [nx, ny, nz] = geom.dims;
        let h = geom.spacing;
        let mut offsets: Vec<(i64, i64, i64)> = Vec::new();
        for dk in -radius..=radius {
            for dj in -radius..=radius {
                for di in -radius..=radius {
                    if di == 0 && dj == 0 && dk == 0 {
                        continue;
                    }
                    // Skip directions that repeat a shorter offset.
                    let g = gcd3(di.abs(), dj.abs(), dk.abs());
                    if g > 1 {
                        continue;
                    }
                    offsets.push((di, dj, dk));
                }
            }
        }
        let mut dist = vec![f64::INFINITY; geom.len()];
        let mut done = vec![false; geom.len()];
        let src_idx = geom.idx(source_node[0], source_node[1], source_node[2]);
        dist[src_idx] = 0.0;
        let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::new();
        heap.push(HeapEntry { tau: 0.0, idx: src_idx });
        while let Some(HeapEntry { tau: t, idx }) = heap.pop() {
            if done[idx] || t > dist[idx] {
                continue;
            }
            done[idx] = true;
            let k = idx / (nx * ny);
            let j = (idx / nx) % ny;
            let i = idx % nx;
            let s_here = 1.0 / phantom.c.at(i, j, k);
            for &(di, dj, dk) in &offsets {
                let (i2, j2, k2) = (i as i64 + di, j as i64 + dj, k as i64 + dk);
                if i2 < 0 || j2 < 0 || k2 < 0 || i2 >= nx as i64 || j2 >= ny as i64
                    || k2 >= nz as i64
                {
                    continue;
                }
                let (i2, j2, k2) = (i2 as usize, j2 as usize, k2 as usize);
                let nidx = geom.idx(i2, j2, k2);
                if done[nidx] {
                    continue;
                }
                let len = h * ((di * di + dj * dj + dk * dk) as f64).sqrt();
                let s_there = 1.0 / phantom.c.at(i2, j2, k2);
                let cand = t + len * 0.5 * (s_here + s_there);
                if cand < dist[nidx] {
                    dist[nidx] = cand;
                    heap.push(HeapEntry { tau: cand, idx: nidx });
                }
            }
        }
        Grid3 { geom, values: dist }
    }

    fn gcd3(a: i64, b: i64, c: i64) -> i64 {
        fn gcd(x: i64, y: i64) -> i64 {
            if y == 0 {
                x
            } else {
                gcd(y, x % y)
            }
        }
        gcd(gcd(a, b), c)
    }
}
