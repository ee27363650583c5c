//! Monte Carlo harmonic measure: exact exit sampling on the disk via a Möbius
//! map, walk-on-spheres on the ball, and a two-point law on the interval.
//!
//! Sampling runs over [`STREAMS`] ChaCha8 streams derived from `(seed, i)`;
//! per-stream moments are merged in stream order, so results do not depend on
//! the thread count.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::harmonic::BoundaryFunction;
use crate::kernels::{norm, DomainSpec, Exponent};

pub const STREAMS: u64 = 64;
pub const WOS_STEP_CAP: usize = 10_000;
pub const DEFAULT_WOS_EPS: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n: u64,
    pub seed: u64,
    pub x: Vec<f64>,
    pub domain: DomainSpec,
    /// Shell thickness at which walk-on-spheres stops (ball only).
    pub wos_eps: f64,
}

impl McConfig {
    pub fn new(domain: DomainSpec, x: Vec<f64>, n: u64, seed: u64) -> Self {
        Self {
            n,
            seed,
            x,
            domain,
            wos_eps: DEFAULT_WOS_EPS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("sample count must be at least 1"));
        }
        if !(self.wos_eps > 0.0 && self.wos_eps < 0.1) {
            return Err(invalid(format!("walk-on-spheres epsilon must lie in (0, 0.1), got {}", self.wos_eps)));
        }
        self.domain.require_interior(&self.x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
    pub seed: u64,
}

/// Running mean and centred second moment.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, o: Moments) -> Moments {
        if self.n == 0 {
            return o;
        }
        if o.n == 0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        let (na, nb) = (self.n as f64, o.n as f64);
        Moments {
            n,
            mean: self.mean + d * nb / n as f64,
            m2: self.m2 + o.m2 + d * d * na * nb / n as f64,
        }
    }
}

fn stream_rng(seed: u64, i: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i);
    rng
}

/// Exit angle of Brownian motion started at `x`, distributed with density
/// `P_D(x, e^{iθ})`: the image of a uniform angle under the disk automorphism
/// `w ↦ (w + a)/(1 + ā w)` that sends 0 to `a = x`.
pub fn sample_exit_disk<R: Rng + ?Sized>(x: [f64; 2], rng: &mut R) -> f64 {
    let a = Complex64::new(x[0], x[1]);
    let phi: f64 = rng.random_range(0.0..TAU);
    let w = Complex64::from_polar(1.0, phi);
    let z = (w + a) / (Complex64::new(1.0, 0.0) + a.conj() * w);
    z.arg().rem_euclid(TAU)
}

fn uniform_sphere<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    let c: f64 = rng.random_range(-1.0..1.0);
    let phi: f64 = rng.random_range(0.0..TAU);
    let s = (1.0 - c * c).max(0.0).sqrt();
    [s * phi.cos(), s * phi.sin(), c]
}

/// Walk-on-spheres in the unit ball: jump to a uniform point on the largest
/// inscribed sphere until within `eps` of the boundary, then project.
pub fn walk_on_spheres<R: Rng + ?Sized>(x: [f64; 3], rng: &mut R, eps: f64) -> Result<[f64; 3]> {
    let mut y = x;
    for _ in 0..WOS_STEP_CAP {
        let r = norm(&y);
        let dist = 1.0 - r;
        if dist < eps {
            return Ok(if r > 0.0 { [y[0] / r, y[1] / r, y[2] / r] } else { [0.0, 0.0, 1.0] });
        }
        let s = uniform_sphere(rng);
        for k in 0..3 {
            y[k] += dist * s[k];
        }
    }
    Err(Error::NonTermination { cap: WOS_STEP_CAP })
}

/// Draw one exit point as Cartesian coordinates.
fn sample_exit<R: Rng + ?Sized>(cfg: &McConfig, rng: &mut R) -> Result<Vec<f64>> {
    match cfg.domain {
        DomainSpec::Interval { a, b } => {
            let pb = (cfg.x[0] - a) / (b - a);
            Ok(vec![if rng.random::<f64>() < pb { b } else { a }])
        }
        DomainSpec::Disk => Ok(vec![sample_exit_disk([cfg.x[0], cfg.x[1]], rng)]),
        DomainSpec::Ball { .. } => Ok(walk_on_spheres([cfg.x[0], cfg.x[1], cfg.x[2]], rng, cfg.wos_eps)?.to_vec()),
    }
}

/// Estimate of `E^x f(X_τ)`, with `f` a function of the exit point given as
/// an angle (disk), a coordinate (interval) or a point (ball).
pub fn mc_mean<F>(cfg: &McConfig, f: F) -> Result<McEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    cfg.validate()?;
    let per = cfg.n / STREAMS;
    let extra = cfg.n % STREAMS;
    let parts: Vec<Result<Moments>> = (0..STREAMS)
        .into_par_iter()
        .map(|i| {
            let count = per + u64::from(i < extra);
            let mut rng = stream_rng(cfg.seed, i);
            let mut m = Moments::default();
            for _ in 0..count {
                m.push(f(&sample_exit(cfg, &mut rng)?));
            }
            Ok(m)
        })
        .collect();
    let mut total = Moments::default();
    for part in parts {
        total = total.merge(part?);
    }
    let var = if total.n > 1 { total.m2 / (total.n - 1) as f64 } else { 0.0 };
    Ok(McEstimate {
        mean: total.mean,
        stderr: (var / total.n as f64).sqrt(),
        n: total.n,
        seed: cfg.seed,
    })
}

/// Estimate of `E^x |g(X_τ)|^p`.
pub fn mc_expectation(cfg: &McConfig, g: &BoundaryFunction, p: Exponent) -> Result<McEstimate> {
    if cfg.domain == DomainSpec::Disk {
        g.require_disk_data()?;
    }
    if matches!(cfg.domain, DomainSpec::Ball { .. }) && g.as_sphere().is_none() {
        return Err(Error::Unsupported(format!("`{}` is not data on the sphere", g.describe())));
    }
    let q = p.get();
    mc_mean(cfg, |z| g.value_at(z).abs().powf(q))
}

/// Exit angles from `x`, `n` samples on the first stream of `seed`.
pub fn sample_exit_angles(x: [f64; 2], n: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, 0);
    (0..n).map(|_| sample_exit_disk(x, &mut rng)).collect()
}

/// Probability that the exit angle from `x` lies in `[0, θ]`, `θ ∈ [0, 2π)`.
pub fn disk_exit_cdf(x: [f64; 2], theta: f64) -> f64 {
    let r = x[0].hypot(x[1]);
    let alpha = x[1].atan2(x[0]);
    let k = (1.0 + r) / (1.0 - r);
    // CDF of the angle relative to arg x on (-π, π].
    let rel = |psi: f64| {
        let w = (psi + PI).rem_euclid(TAU) - PI;
        0.5 + (k * (0.5 * w).tan()).atan() / PI
    };
    (rel(theta - alpha) - rel(-alpha)).rem_euclid(1.0)
}

/// Kolmogorov–Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &v)| {
            let c = cdf(v);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

/// Number of seeds (out of `seeds`) whose estimate lies within `k` standard
/// errors (plus `bias`) of `reference`.
pub fn envelope_count(cfg: &McConfig, g: &BoundaryFunction, p: Exponent, reference: f64, k: f64, bias: f64, seeds: u64) -> Result<u64> {
    let mut inside = 0;
    for s in 0..seeds {
        let c = McConfig {
            seed: cfg.seed.wrapping_add(s),
            ..cfg.clone()
        };
        let est = mc_expectation(&c, g, p)?;
        if (est.mean - reference).abs() <= k * est.stderr + bias {
            inside += 1;
        }
    }
    Ok(inside)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonic::SphereFunction;

    fn p(v: f64) -> Exponent {
        Exponent::new(v).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(McConfig::new(DomainSpec::Disk, vec![0.0, 0.0], 0, 1).validate().is_err());
        assert!(McConfig::new(DomainSpec::Disk, vec![1.0, 0.0], 10, 1).validate().is_err());
        let mut c = McConfig::new(DomainSpec::Disk, vec![0.0, 0.0], 10, 1);
        c.wos_eps = 0.2;
        assert!(c.validate().is_err());
    }

    #[test]
    fn moments_merge_matches_serial() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let mut all = Moments::default();
        xs.iter().for_each(|&x| all.push(x));
        let mut a = Moments::default();
        let mut b = Moments::default();
        xs[..300].iter().for_each(|&x| a.push(x));
        xs[300..].iter().for_each(|&x| b.push(x));
        let m = a.merge(b);
        assert!((m.mean - all.mean).abs() < 1e-12 && (m.m2 - all.m2).abs() < 1e-8 * all.m2);
    }

    #[test]
    fn origin_exit_is_uniform() {
        let cfg = McConfig::new(DomainSpec::Disk, vec![0.0, 0.0], 1_000_000, 7);
        let est = mc_mean(&cfg, |z| z[0].cos()).unwrap();
        assert!(est.mean.abs() <= 4.0 / 1000.0, "{est:?}");
    }

    #[test]
    fn off_centre_mean_of_cos() {
        let cfg = McConfig::new(DomainSpec::Disk, vec![0.3, 0.0], 400_000, 11);
        let est = mc_mean(&cfg, |z| z[0].cos()).unwrap();
        assert!((est.mean - 0.3).abs() <= 4.0 * est.stderr, "{est:?}");
    }

    #[test]
    fn ks_against_poisson_cdf() {
        for x in [[0.3, 0.0], [-0.2, 0.5]] {
            let s = sample_exit_angles(x, 100_000, 3);
            let d = ks_statistic(&s, |t| disk_exit_cdf(x, t));
            assert!(d < ks_critical_1pct(s.len()), "D = {d}");
        }
        // The CDF agrees with quadrature of the kernel.
        let x = [0.4, -0.3];
        let (r, a) = (0.5f64, (-0.3f64).atan2(0.4));
        let n = 20_000;
        let theta = 2.0;
        let h = theta / n as f64;
        let q: f64 = (0..n)
            .map(|i| crate::kernels::poisson_disk_polar(r, a, (i as f64 + 0.5) * h) * h)
            .sum();
        assert!((q - disk_exit_cdf(x, theta)).abs() < 1e-8);
    }

    #[test]
    fn constant_data_is_exact() {
        let cfg = McConfig::new(DomainSpec::Disk, vec![0.2, 0.1], 1000, 5);
        let est = mc_expectation(&cfg, &"const:-1.5".parse().unwrap(), p(3.0)).unwrap();
        assert_eq!(est.mean, 1.5f64.powi(3));
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let cfg = McConfig::new(DomainSpec::Disk, vec![0.3, 0.0], 10_000, 42);
        let g = "cos".parse().unwrap();
        let a = mc_expectation(&cfg, &g, p(2.0)).unwrap();
        let b = mc_expectation(&cfg, &g, p(2.0)).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
        assert_eq!(a.n, 10_000);
    }

    #[test]
    fn walk_on_spheres_examples() {
        let ball = DomainSpec::ball(3).unwrap();
        let g = BoundaryFunction::sphere(SphereFunction::Linear { c: [0.0, 0.0, 1.0], d: 0.0 });
        let cfg = McConfig::new(ball, vec![0.0, 0.0, 0.0], 100_000, 1);
        for k in 0..3 {
            let est = mc_mean(&cfg, |z| z[k]).unwrap();
            assert!(est.mean.abs() <= 4.0 * est.stderr, "{k}: {est:?}");
        }
        let cfg = McConfig::new(ball, vec![0.0, 0.0, 0.4], 200_000, 2);
        let est = mc_mean(&cfg, |z| g.value_at(z)).unwrap();
        assert!((est.mean - 0.4).abs() <= 4.0 * est.stderr + 2.0 * cfg.wos_eps, "{est:?}");
    }

    #[test]
    fn interval_two_point_law() {
        let iv = DomainSpec::interval(0.0, 2.0).unwrap();
        let cfg = McConfig::new(iv, vec![0.5], 100_000, 9);
        let est = mc_expectation(&cfg, &"linear:1,0".parse().unwrap(), p(2.0)).unwrap();
        // P(exit at 2) = 1/4, so E|X|² = 1.
        assert!((est.mean - 1.0).abs() <= 4.0 * est.stderr, "{est:?}");
    }

    #[test]
    fn wos_cap_is_reported() {
        // A zero shell is never reached.
        let mut rng = stream_rng(1, 0);
        assert!(matches!(walk_on_spheres([0.0; 3], &mut rng, 0.0), Err(Error::NonTermination { .. })));
    }
}
