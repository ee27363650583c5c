//! Quadrature building blocks shared by the form engines.
//!
//! Every accumulation goes through [`pairwise_sum`] over values laid out in a
//! fixed order, so a parallel evaluation returns the same bits as a serial one.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::CellReport;

/// Gauss–Legendre nodes and weights mapped to `[a, b]`, ascending.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let n = NonZeroUsize::new(n.max(1)).expect("nonzero");
    let rule = GaussLegendre::new(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    let mut pairs: Vec<(f64, f64)> = rule
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (mid + half * x, half * w))
        .collect();
    pairs.sort_by(|l, r| l.0.total_cmp(&r.0));
    pairs
}

/// Cascade summation in a fixed binary-tree order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        values.iter().sum()
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

/// Angles of the uniform periodic grid `2 pi j / m`.
pub fn periodic_nodes(m: usize) -> impl Iterator<Item = f64> + Clone {
    let h = 2.0 * PI / m as f64;
    (0..m).map(move |j| j as f64 * h)
}

/// Integral over the unit disk of `f(r, theta)` (Jacobian included) on a
/// tensor Gauss–Legendre (radius) by trapezoid (angle) grid.
pub fn disk_tensor<F>(f: &F, n_r: usize, n_theta: usize) -> f64
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let radial = gauss_legendre(n_r, 0.0, 1.0);
    let dtheta = 2.0 * PI / n_theta as f64;
    let rows: Vec<f64> = radial
        .par_iter()
        .map(|&(r, w)| {
            let ring: Vec<f64> = periodic_nodes(n_theta).map(|t| f(r, t)).collect();
            w * r * dtheta * pairwise_sum(&ring)
        })
        .collect();
    pairwise_sum(&rows)
}

/// As [`disk_tensor`] with radial nodes graded towards the circle by
/// `1 - r = δ = (1-s)^k`: a factor `δ^{1/k - 1}` in the integrand becomes
/// bounded. The integrand receives `(δ, θ)`, so that it can be evaluated
/// without forming `1 - r` by cancellation.
pub fn disk_tensor_graded<F>(f: &F, n_r: usize, n_theta: usize, k: f64) -> f64
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let radial: Vec<(f64, f64)> = gauss_legendre(n_r, 0.0, 1.0)
        .into_iter()
        .map(|(s, w)| ((1.0 - s).powf(k), w * k * (1.0 - s).powf(k - 1.0)))
        .collect();
    let dtheta = 2.0 * PI / n_theta as f64;
    let rows: Vec<f64> = radial
        .par_iter()
        .map(|&(delta, w)| {
            let ring: Vec<f64> = periodic_nodes(n_theta).map(|t| f(delta, t)).collect();
            w * (1.0 - delta) * dtheta * pairwise_sum(&ring)
        })
        .collect();
    pairwise_sum(&rows)
}

/// Integral over the unit disk in polar coordinates centred at the interior
/// point `center`. The integrand receives the Cartesian point and the distance
/// `rho` to the centre; the `rho` Jacobian is applied here.
pub fn disk_polar_about<F>(f: &F, center: [f64; 2], n_rho: usize, n_phi: usize) -> f64
where
    F: Fn([f64; 2], f64) -> f64 + Sync,
{
    let unit = gauss_legendre(n_rho, 0.0, 1.0);
    let dphi = 2.0 * PI / n_phi as f64;
    let c2 = center[0] * center[0] + center[1] * center[1];
    let phis: Vec<f64> = periodic_nodes(n_phi).collect();
    let rays: Vec<f64> = phis
        .par_iter()
        .map(|&phi| {
            let (s, c) = phi.sin_cos();
            let proj = center[0] * c + center[1] * s;
            let reach = -proj + (proj * proj + 1.0 - c2).sqrt();
            let ray: Vec<f64> = unit
                .iter()
                .map(|&(t, w)| {
                    let rho = reach * t;
                    let y = [center[0] + rho * c, center[1] + rho * s];
                    w * reach * rho * f(y, rho)
                })
                .collect();
            dphi * pairwise_sum(&ray)
        })
        .collect();
    pairwise_sum(&rays)
}

/// Orthonormal frame whose third vector is `pole` (normalised).
pub fn frame_about(pole: [f64; 3]) -> [[f64; 3]; 3] {
    let n = norm3(pole);
    let e3 = [pole[0] / n, pole[1] / n, pole[2] / n];
    let helper = if e3[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let e1 = normalize3(cross3(helper, e3));
    let e2 = cross3(e3, e1);
    [e1, e2, e3]
}

/// Points and weights on the unit sphere: Gauss–Legendre in the cosine of the
/// polar angle against the frame's pole, trapezoid in azimuth.
pub fn sphere_rule(n_polar: usize, n_azimuth: usize, frame: &[[f64; 3]; 3]) -> Vec<([f64; 3], f64)> {
    let dphi = 2.0 * PI / n_azimuth as f64;
    let mut out = Vec::with_capacity(n_polar * n_azimuth);
    for (ct, w) in gauss_legendre(n_polar, -1.0, 1.0) {
        let st = (1.0 - ct * ct).max(0.0).sqrt();
        for phi in periodic_nodes(n_azimuth) {
            let (s, c) = phi.sin_cos();
            let local = [st * c, st * s, ct];
            out.push((rotate_out(frame, local), w * dphi));
        }
    }
    out
}

pub(crate) fn rotate_out(frame: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (k, e) in frame.iter().enumerate() {
        for i in 0..3 {
            out[i] += v[k] * e[i];
        }
    }
    out
}

pub(crate) fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub(crate) fn normalize3(v: [f64; 3]) -> [f64; 3] {
    let n = norm3(v);
    [v[0] / n, v[1] / n, v[2] / n]
}

pub(crate) fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Settings for adaptive polar cubature on the unit disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Leaf-cell budget.
    pub max_cells: usize,
    /// Gauss points per direction inside a cell.
    pub order: usize,
    pub initial_r: usize,
    pub initial_theta: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-7,
            abs_tol: 1e-12,
            max_cells: 40_000,
            order: 6,
            initial_r: 8,
            initial_theta: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptiveDiagnostics {
    pub cells: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub error_estimate: f64,
    /// Cells with the largest remaining error, worst first.
    pub worst: Vec<CellReport>,
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    r0: f64,
    r1: f64,
    t0: f64,
    t1: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then(other.r0.total_cmp(&self.r0))
            .then(other.t0.total_cmp(&self.t0))
    }
}

impl Cell {
    fn report(&self) -> CellReport {
        CellReport {
            r: (self.r0, self.r1),
            theta: (self.t0, self.t1),
            value: self.value,
            error: self.error,
        }
    }
}

struct CellRule<'a, F> {
    f: &'a F,
    unit: Vec<(f64, f64)>,
    evaluations: usize,
}

impl<F: Fn(f64, f64) -> f64> CellRule<'_, F> {
    fn apply(&mut self, r0: f64, r1: f64, t0: f64, t1: f64) -> f64 {
        let hr = r1 - r0;
        let ht = t1 - t0;
        let mut acc = 0.0;
        for &(u, wu) in &self.unit {
            let r = r0 + hr * u;
            let mut row = 0.0;
            for &(v, wv) in &self.unit {
                row += wv * (self.f)(r, t0 + ht * v);
            }
            acc += wu * r * row;
        }
        self.evaluations += self.unit.len() * self.unit.len();
        acc * hr * ht
    }

    fn cell(&mut self, r0: f64, r1: f64, t0: f64, t1: f64) -> Cell {
        let coarse = self.apply(r0, r1, t0, t1);
        let rm = 0.5 * (r0 + r1);
        let tm = 0.5 * (t0 + t1);
        let fine = self.apply(r0, rm, t0, tm)
            + self.apply(rm, r1, t0, tm)
            + self.apply(r0, rm, tm, t1)
            + self.apply(rm, r1, tm, t1);
        let error = if fine.is_finite() && coarse.is_finite() {
            (fine - coarse).abs()
        } else {
            f64::INFINITY
        };
        Cell {
            r0,
            r1,
            t0,
            t1,
            value: fine,
            error,
        }
    }
}

/// Adaptive cubature of `f(r, theta)` (Jacobian included) over the unit disk.
///
/// Each leaf compares a Gauss rule on the cell with the same rule on its four
/// children; the worst leaf is split until the summed error meets the target
/// or the leaf budget is spent. Returns the value and the diagnostics; the
/// caller decides whether a non-converged result is an error.
pub fn disk_adaptive<F>(f: &F, opts: &AdaptiveOptions) -> (f64, AdaptiveDiagnostics)
where
    F: Fn(f64, f64) -> f64,
{
    let mut rule = CellRule {
        f,
        unit: gauss_legendre(opts.order, 0.0, 1.0),
        evaluations: 0,
    };
    let mut heap = BinaryHeap::new();
    let dr = 1.0 / opts.initial_r as f64;
    let dt = 2.0 * PI / opts.initial_theta as f64;
    for i in 0..opts.initial_r {
        for j in 0..opts.initial_theta {
            let r0 = i as f64 * dr;
            let t0 = j as f64 * dt;
            heap.push(rule.cell(r0, r0 + dr, t0, t0 + dt));
        }
    }

    let totals = |heap: &BinaryHeap<Cell>| -> (f64, f64) {
        let mut leaves: Vec<&Cell> = heap.iter().collect();
        leaves.sort_by(|a, b| a.r0.total_cmp(&b.r0).then(a.t0.total_cmp(&b.t0)));
        let v: Vec<f64> = leaves.iter().map(|c| c.value).collect();
        let e: Vec<f64> = leaves.iter().map(|c| c.error).collect();
        (pairwise_sum(&v), pairwise_sum(&e))
    };

    let (mut value, mut error) = totals(&heap);
    let mut since_resum = 0usize;
    while error > opts.abs_tol.max(opts.rel_tol * value.abs()) && heap.len() + 3 <= opts.max_cells {
        let worst = heap.pop().expect("non-empty");
        let rm = 0.5 * (worst.r0 + worst.r1);
        let tm = 0.5 * (worst.t0 + worst.t1);
        let kids = [
            rule.cell(worst.r0, rm, worst.t0, tm),
            rule.cell(rm, worst.r1, worst.t0, tm),
            rule.cell(worst.r0, rm, tm, worst.t1),
            rule.cell(rm, worst.r1, tm, worst.t1),
        ];
        if worst.value.is_finite() && worst.error.is_finite() && kids.iter().all(|k| k.value.is_finite() && k.error.is_finite()) {
            value += kids.iter().map(|k| k.value).sum::<f64>() - worst.value;
            error += kids.iter().map(|k| k.error).sum::<f64>() - worst.error;
        } else {
            since_resum = usize::MAX / 2;
        }
        heap.extend(kids);
        since_resum += 1;
        if since_resum >= 256 {
            (value, error) = totals(&heap);
            since_resum = 0;
        }
    }
    (value, error) = totals(&heap);
    let converged = error <= opts.abs_tol.max(opts.rel_tol * value.abs());
    let cells = heap.len();
    let worst: Vec<CellReport> = heap.into_sorted_vec().iter().rev().take(5).map(Cell::report).collect();
    (
        value,
        AdaptiveDiagnostics {
            cells,
            evaluations: rule.evaluations,
            converged,
            error_estimate: error,
            worst,
        },
    )
}
