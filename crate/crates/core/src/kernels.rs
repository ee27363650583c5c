//! Signed powers, the Bregman divergence of `|t|^p`, and closed-form Poisson,
//! Green and Feller kernels of the interval, the unit disk and the unit ball
//! in three dimensions.
//!
//! Kernels are normalised for the Laplacian itself: the Green function
//! satisfies `-Δ G(x, ·) = δ_x`, the Poisson kernel is its inward normal
//! derivative, and the Feller kernel is the inward normal derivative of the
//! Poisson kernel at a boundary point.

use std::f64::consts::PI;
use std::fmt;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// An exponent `p` in `(1, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Exponent(f64);

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if p.is_finite() && p > 1.0 {
            Ok(Self(p))
        } else {
            Err(invalid(format!("exponent must be finite and > 1, got {p}")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// `p (p - 1)`, the factor in front of the interior form.
    pub fn energy_factor(self) -> f64 {
        self.0 * (self.0 - 1.0)
    }

    pub fn is_two(self) -> bool {
        self.0 == 2.0
    }
}

impl TryFrom<f64> for Exponent {
    type Error = Error;
    fn try_from(p: f64) -> Result<Self> {
        Self::new(p)
    }
}

impl From<Exponent> for f64 {
    fn from(p: Exponent) -> f64 {
        p.0
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// `|a|^κ sgn(a)`.
pub fn signed_power(a: f64, kappa: f64) -> Result<f64> {
    if !a.is_finite() || !kappa.is_finite() {
        return Err(invalid(format!("signed_power({a}, {kappa}): non-finite input")));
    }
    if kappa <= 0.0 {
        return Err(invalid(format!("signed_power: exponent must be positive, got {kappa}")));
    }
    Ok(spow(a, kappa))
}

#[inline]
pub(crate) fn spow(a: f64, kappa: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else if kappa == 1.0 {
        a
    } else {
        a.abs().powf(kappa).copysign(a)
    }
}

// Eight-point Gauss–Legendre rule on [0, 1]; used for the integral forms of
// differences of powers when the arguments are close.
const GL8: [(f64, f64); 8] = [
    (0.019_855_071_751_231_856, 0.050_614_268_145_188_13),
    (0.101_666_761_293_186_63, 0.111_190_517_226_687_24),
    (0.237_233_795_041_835_5, 0.156_853_322_938_943_64),
    (0.408_282_678_752_175_1, 0.181_341_891_689_180_99),
    (0.591_717_321_247_824_9, 0.181_341_891_689_180_99),
    (0.762_766_204_958_164_5, 0.156_853_322_938_943_64),
    (0.898_333_238_706_813_4, 0.111_190_517_226_687_24),
    (0.980_144_928_248_768_1, 0.050_614_268_145_188_13),
];

#[inline]
fn close_same_sign(a: f64, b: f64) -> bool {
    a * b > 0.0 && (a - b).abs() <= 0.25 * a.abs().max(b.abs())
}

/// `a^⟨κ⟩ - b^⟨κ⟩` without cancellation when `a ≈ b`.
#[inline]
pub(crate) fn spow_diff(a: f64, b: f64, kappa: f64) -> f64 {
    if kappa == 1.0 {
        return a - b;
    }
    if close_same_sign(a, b) {
        let d = a - b;
        let s: f64 = GL8
            .iter()
            .map(|&(t, w)| w * (b + t * d).abs().powf(kappa - 1.0))
            .sum();
        kappa * d * s
    } else {
        spow(a, kappa) - spow(b, kappa)
    }
}

/// Unchecked `F_p(a, b)`.
#[inline]
pub(crate) fn fp(p: f64, a: f64, b: f64) -> f64 {
    let d = b - a;
    if d == 0.0 {
        return 0.0;
    }
    if p == 2.0 {
        return d * d;
    }
    if close_same_sign(a, b) {
        // Integral Taylor remainder: p(p-1) d² ∫₀¹ |a + t d|^{p-2} (1 - t) dt.
        let s: f64 = GL8
            .iter()
            .map(|&(t, w)| w * (a + t * d).abs().powf(p - 2.0) * (1.0 - t))
            .sum();
        p * (p - 1.0) * d * d * s
    } else {
        let v = b.abs().powf(p) - a.abs().powf(p) - p * spow(a, p - 1.0) * d;
        v.max(0.0)
    }
}

/// Unchecked `H_p(a, b)`.
#[inline]
pub(crate) fn hp(p: f64, a: f64, b: f64) -> f64 {
    0.5 * p * spow_diff(a, b, p - 1.0) * (a - b)
}

fn check_pair(a: f64, b: f64) -> Result<()> {
    if a.is_finite() && b.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("non-finite argument pair ({a}, {b})")))
    }
}

/// Bregman divergence of `t ↦ |t|^p`: `|b|^p - |a|^p - p a^⟨p-1⟩ (b - a)`.
pub fn bregman_fp(p: Exponent, a: f64, b: f64) -> Result<f64> {
    check_pair(a, b)?;
    Ok(fp(p.get(), a, b))
}

/// Symmetrised divergence `(p/2)(a^⟨p-1⟩ - b^⟨p-1⟩)(a - b)`.
pub fn symmetrized_hp(p: Exponent, a: f64, b: f64) -> Result<f64> {
    check_pair(a, b)?;
    Ok(hp(p.get(), a, b))
}

/// The four mutually comparable expressions `H_p`, `F_p`,
/// `(a-b)² (|a| ∨ |b|)^{p-2}` and `(a^⟨p/2⟩ - b^⟨p/2⟩)²`, in that order.
pub fn comparison_chain(p: Exponent, a: f64, b: f64) -> Result<[f64; 4]> {
    check_pair(a, b)?;
    let p = p.get();
    let d = a - b;
    let m = a.abs().max(b.abs());
    let weighted = if d == 0.0 { 0.0 } else { d * d * m.powf(p - 2.0) };
    let half = spow_diff(a, b, 0.5 * p);
    Ok([hp(p, a, b), fp(p, a, b), weighted, half * half])
}

/// Labels of the four expressions in [`comparison_chain`].
pub const CHAIN_LABELS: [&str; 4] = ["H_p", "F_p", "weighted_square", "half_power_square"];

/// Observed range of a ratio of two comparable quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioEnvelope {
    pub min: f64,
    pub max: f64,
    pub samples: usize,
}

impl RatioEnvelope {
    fn empty() -> Self {
        Self {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            samples: 0,
        }
    }

    fn push(&mut self, ratio: f64) {
        self.min = self.min.min(ratio);
        self.max = self.max.max(ratio);
        self.samples += 1;
    }

    /// Finite and strictly positive at both ends.
    pub fn is_bounded(&self) -> bool {
        self.samples > 0 && self.min.is_finite() && self.max.is_finite() && self.min > 0.0
    }
}

/// Pairwise ratio envelopes of the comparison chain for one exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainEnvelopes {
    pub p: f64,
    /// `(i, j, envelope of expr_i / expr_j)` for `i < j`.
    pub ratios: Vec<(usize, usize, RatioEnvelope)>,
    pub excluded_diagonal: usize,
}

/// Sample `samples` random pairs and record every pairwise ratio of the four
/// chain expressions. Pairs with `a == b` are counted and excluded.
///
/// The expressions are all homogeneous of degree `p`, so pairs are drawn as
/// uniform directions scaled by a log-uniform radius.
pub fn chain_envelopes(p: Exponent, samples: usize, seed: u64) -> ChainEnvelopes {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ratios: Vec<(usize, usize, RatioEnvelope)> = (0..4)
        .flat_map(|i| ((i + 1)..4).map(move |j| (i, j, RatioEnvelope::empty())))
        .collect();
    let mut excluded = 0;
    let mut draw = |k: usize| -> (f64, f64) {
        // A few structured pairs first: one side zero, opposite signs, equal.
        match k {
            0 => (1.0, 0.0),
            1 => (0.0, -2.0),
            2 => (1.0, -1.0),
            3 => (3.0, 3.0),
            _ => {
                let angle: f64 = rng.random_range(0.0..2.0 * PI);
                let scale = 10f64.powf(rng.random_range(-3.0..3.0));
                (scale * angle.cos(), scale * angle.sin())
            }
        }
    };
    for k in 0..samples {
        let (a, b) = draw(k);
        if a == b {
            excluded += 1;
            continue;
        }
        let vals = comparison_chain(p, a, b).expect("finite draws");
        for (i, j, env) in ratios.iter_mut() {
            env.push(vals[*i] / vals[*j]);
        }
    }
    ChainEnvelopes {
        p: p.get(),
        ratios,
        excluded_diagonal: excluded,
    }
}

/// Model domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DomainSpec {
    Interval { a: f64, b: f64 },
    Disk,
    Ball { d: u32 },
}

const ON_BOUNDARY_TOL: f64 = 1e-9;

impl DomainSpec {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        if a.is_finite() && b.is_finite() && a < b {
            Ok(Self::Interval { a, b })
        } else {
            Err(invalid(format!("interval needs finite a < b, got ({a}, {b})")))
        }
    }

    pub fn disk() -> Self {
        Self::Disk
    }

    pub fn ball(d: u32) -> Result<Self> {
        if d == 3 {
            Ok(Self::Ball { d })
        } else {
            Err(invalid(format!("only the three-dimensional ball is supported, got d = {d}")))
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Interval { .. } => 1,
            Self::Disk => 2,
            Self::Ball { d } => *d as usize,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Interval { .. } => "interval",
            Self::Disk => "disk",
            Self::Ball { .. } => "ball",
        }
    }

    /// Scale at which interior and exterior tangent balls exist; diagnostics only.
    pub fn scale(&self) -> f64 {
        match self {
            Self::Interval { a, b } => 0.5 * (b - a),
            _ => 1.0,
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() == self.dim() && x.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(self.domain_err(x, format!("expected {} finite coordinates", self.dim())))
        }
    }

    fn domain_err(&self, x: &[f64], reason: impl Into<String>) -> Error {
        Error::Domain {
            point: x.to_vec(),
            domain: self.to_string(),
            reason: reason.into(),
        }
    }

    /// Distance from `x` to the boundary.
    pub fn distance_to_boundary(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(match self {
            Self::Interval { a, b } => (x[0] - a).abs().min((x[0] - b).abs()),
            _ => (1.0 - norm(x)).abs(),
        })
    }

    pub fn is_interior(&self, x: &[f64]) -> bool {
        if self.check_dim(x).is_err() {
            return false;
        }
        match self {
            Self::Interval { a, b } => *a < x[0] && x[0] < *b,
            _ => norm(x) < 1.0,
        }
    }

    pub fn is_on_boundary(&self, z: &[f64]) -> bool {
        if self.check_dim(z).is_err() {
            return false;
        }
        match self {
            Self::Interval { a, b } => {
                let tol = ON_BOUNDARY_TOL * (b - a);
                (z[0] - a).abs() <= tol || (z[0] - b).abs() <= tol
            }
            _ => (norm(z) - 1.0).abs() <= ON_BOUNDARY_TOL,
        }
    }

    /// Inward unit normal at a boundary point.
    pub fn inward_normal(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.require_boundary(z)?;
        Ok(match self {
            Self::Interval { a, b } => {
                if (z[0] - a).abs() <= (z[0] - b).abs() {
                    vec![1.0]
                } else {
                    vec![-1.0]
                }
            }
            _ => {
                let n = norm(z);
                z.iter().map(|v| -v / n).collect()
            }
        })
    }

    pub(crate) fn require_interior(&self, x: &[f64]) -> Result<()> {
        self.check_dim(x)?;
        if self.is_interior(x) {
            Ok(())
        } else {
            Err(self.domain_err(x, "point must lie strictly inside the domain"))
        }
    }

    pub(crate) fn require_boundary(&self, z: &[f64]) -> Result<()> {
        self.check_dim(z)?;
        if self.is_on_boundary(z) {
            Ok(())
        } else {
            Err(self.domain_err(z, "point must lie on the boundary"))
        }
    }
}

impl fmt::Display for DomainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Interval { a, b } => write!(f, "interval({a}, {b})"),
            Self::Disk => write!(f, "disk"),
            Self::Ball { d } => write!(f, "ball(d={d})"),
        }
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dist_sq(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// `|y|² |x - y*|²` with `y* = y / |y|²`, written in the symmetric form
/// `1 - 2 x·y + |x|² |y|²` that stays finite at `y = 0`.
fn reflected_dist_sq(x: &[f64], y: &[f64]) -> f64 {
    1.0 - 2.0 * dot(x, y) + dot(x, x) * dot(y, y)
}

/// Disk Feller kernel in angle form, `1 / (4π sin²((ξ - η)/2))`.
pub fn feller_disk_angles(xi: f64, eta: f64) -> f64 {
    let s = (0.5 * (xi - eta)).sin();
    1.0 / (4.0 * PI * s * s)
}

/// Disk Poisson kernel in polar form, `(1 - r²) / (2π (1 - 2 r cos(θ - η) + r²))`.
pub fn poisson_disk_polar(r: f64, theta: f64, eta: f64) -> f64 {
    (1.0 - r * r) / (2.0 * PI * (1.0 - 2.0 * r * (theta - eta).cos() + r * r))
}

/// Closed-form kernel evaluators for one domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSet {
    pub domain: DomainSpec,
}

/// Which kernel estimate to probe in [`KernelSet::bound_envelope`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelEstimate {
    Green,
    Poisson,
    Feller,
}

impl KernelSet {
    pub fn new(domain: DomainSpec) -> Self {
        Self { domain }
    }

    /// Poisson kernel `P_D(x, z)`: density of harmonic measure from `x` at `z`.
    /// On the interval it is the endpoint weight of `z`.
    pub fn poisson(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        self.domain.require_interior(x)?;
        self.domain.require_boundary(z)?;
        Ok(match self.domain {
            DomainSpec::Interval { a, b } => {
                if (z[0] - a).abs() <= (z[0] - b).abs() {
                    (b - x[0]) / (b - a)
                } else {
                    (x[0] - a) / (b - a)
                }
            }
            DomainSpec::Disk => (1.0 - dot(x, x)) / (2.0 * PI * dist_sq(x, z)),
            DomainSpec::Ball { .. } => (1.0 - dot(x, x)) / (4.0 * PI * dist_sq(x, z).powf(1.5)),
        })
    }

    /// Green function `G_D(x, y)` of the Dirichlet Laplacian.
    pub fn green(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.domain.require_interior(x)?;
        self.domain.require_interior(y)?;
        if x == y {
            return Err(Error::Singularity(format!("Green function at the diagonal x = y = {x:?}")));
        }
        Ok(match self.domain {
            DomainSpec::Interval { a, b } => {
                let (lo, hi) = if x[0] < y[0] { (x[0], y[0]) } else { (y[0], x[0]) };
                (lo - a) * (b - hi) / (b - a)
            }
            DomainSpec::Disk => green_disk(x, y),
            DomainSpec::Ball { .. } => green_ball(x, y),
        })
    }

    /// Feller kernel `γ_D(z, w)`, the inward normal derivative at `z` of `P_D(·, w)`.
    pub fn feller(&self, z: &[f64], w: &[f64]) -> Result<f64> {
        self.domain.require_boundary(z)?;
        self.domain.require_boundary(w)?;
        let d2 = dist_sq(z, w);
        let coincide = match self.domain {
            DomainSpec::Interval { a, b } => d2.sqrt() <= ON_BOUNDARY_TOL * (b - a),
            _ => d2 == 0.0,
        };
        if coincide {
            return Err(Error::Singularity(format!("Feller kernel at z = w = {z:?}")));
        }
        Ok(match self.domain {
            DomainSpec::Interval { a, b } => 1.0 / (b - a),
            DomainSpec::Disk => 1.0 / (PI * d2),
            DomainSpec::Ball { .. } => 2.0 / (4.0 * PI * d2.powf(1.5)),
        })
    }

    /// Comparison function on the right of the two-sided estimate for `which`.
    pub fn comparison(&self, which: KernelEstimate, x: &[f64], y: &[f64]) -> Result<f64> {
        let d = self.domain.dim() as i32;
        Ok(match which {
            KernelEstimate::Green => {
                let dx = self.domain.distance_to_boundary(x)?;
                let dy = self.domain.distance_to_boundary(y)?;
                let r2 = dist_sq(x, y);
                if d == 2 {
                    (1.0 + dx * dy / r2).ln()
                } else {
                    (dx * dy / r2).min(1.0) * r2.sqrt().powi(2 - d)
                }
            }
            KernelEstimate::Poisson => self.domain.distance_to_boundary(x)? / dist_sq(x, y).sqrt().powi(d),
            KernelEstimate::Feller => dist_sq(x, y).sqrt().powi(-d),
        })
    }

    /// Empirical range of `kernel / comparison` over random admissible pairs.
    pub fn bound_envelope(&self, which: KernelEstimate, samples: usize, seed: u64) -> Result<RatioEnvelope> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut env = RatioEnvelope::empty();
        for _ in 0..samples {
            let (x, y) = match which {
                KernelEstimate::Green => (self.random_interior(&mut rng), self.random_interior(&mut rng)),
                KernelEstimate::Poisson => (self.random_interior(&mut rng), self.random_boundary(&mut rng)),
                KernelEstimate::Feller => (self.random_boundary(&mut rng), self.random_boundary(&mut rng)),
            };
            let k = match which {
                KernelEstimate::Green => self.green(&x, &y),
                KernelEstimate::Poisson => self.poisson(&x, &y),
                KernelEstimate::Feller => self.feller(&x, &y),
            };
            // Coincident draws carry no information about the estimate.
            let Ok(k) = k else { continue };
            env.push(k / self.comparison(which, &x, &y)?);
        }
        Ok(env)
    }

    fn random_interior(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self.domain {
            DomainSpec::Interval { a, b } => vec![a + (b - a) * rng.random_range(1e-6..1.0 - 1e-6)],
            _ => loop {
                let x: Vec<f64> = (0..self.domain.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let n = norm(&x);
                if n < 1.0 - 1e-6 {
                    break x;
                }
            },
        }
    }

    fn random_boundary(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self.domain {
            DomainSpec::Interval { a, b } => vec![if rng.random::<bool>() { a } else { b }],
            DomainSpec::Disk => {
                let t: f64 = rng.random_range(0.0..2.0 * PI);
                vec![t.cos(), t.sin()]
            }
            DomainSpec::Ball { .. } => {
                let c: f64 = rng.random_range(-1.0..1.0);
                let t: f64 = rng.random_range(0.0..2.0 * PI);
                let s = (1.0 - c * c).sqrt();
                vec![s * t.cos(), s * t.sin(), c]
            }
        }
    }
}

pub(crate) fn green_disk(x: &[f64], y: &[f64]) -> f64 {
    (reflected_dist_sq(x, y) / dist_sq(x, y)).ln() / (4.0 * PI)
}

pub(crate) fn green_ball(x: &[f64], y: &[f64]) -> f64 {
    (1.0 / dist_sq(x, y).sqrt() - 1.0 / reflected_dist_sq(x, y).sqrt()) / (4.0 * PI)
}
