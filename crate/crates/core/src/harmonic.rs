//! Boundary data and their harmonic extensions.
//!
//! On the disk the extension of `g` is carried as a truncated Fourier series
//! `u(r, θ) = a0 + Σ rⁿ (aₙ cos nθ + bₙ sin nθ)`, which is exactly harmonic for
//! every truncation. Internally it is evaluated as the real part of the
//! holomorphic polynomial `F(z) = a0 + Σ (aₙ - i bₙ) zⁿ`, so `|∇u|² = |F'(z)|²`
//! has no coordinate singularity at the origin.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernels::{norm, poisson_disk_polar, spow, DomainSpec, KernelSet};
use crate::quadrature::{frame_about, pairwise_sum, periodic_nodes, sphere_rule};

/// Named boundary data. Angles are in radians; on the interval the `linear`
/// preset is a function of the coordinate.
#[derive(Debug, Clone, PartialEq)]
pub enum Preset {
    Const(f64),
    Cos,
    /// `cos kθ`.
    CosK(u32),
    /// `a0 + a1 cos θ + b1 sin θ + a2 cos 2θ + …`.
    Trig(Vec<f64>),
    /// `c + cos θ`.
    ShiftedCos(f64),
    /// `|sin θ|`; Lipschitz with kinks at 0 and π.
    AbsSin,
    /// `c x + d` on an interval.
    Linear { c: f64, d: f64 },
}

pub const DISK_PRESETS: &[&str] = &["const:c", "cos", "cosk:k", "trig:a0,a1,b1,...", "shifted-cos:c", "abs-sin"];
pub const INTERVAL_PRESETS: &[&str] = &["linear:c,d", "const:c"];
pub const BALL_PRESETS: &[&str] = &["linear:c1,c2,c3,d", "zonal:s", "const:c"];

fn parse_list(name: &str, body: &str) -> Result<Vec<f64>> {
    body.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("preset `{name}`: cannot parse `{s}` as a number")))
        })
        .collect()
}

fn parse_one(name: &str, body: Option<&str>) -> Result<f64> {
    let body = body.ok_or_else(|| Error::Config(format!("preset `{name}` needs a parameter")))?;
    let v = parse_list(name, body)?;
    if v.len() != 1 {
        return Err(Error::Config(format!("preset `{name}` takes exactly one parameter")));
    }
    Ok(v[0])
}

fn unknown_preset(s: &str, known: &[&str]) -> Error {
    Error::Config(format!("unknown boundary data `{s}`; known presets: {}", known.join(", ")))
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, body) = match s.split_once(':') {
            Some((n, b)) => (n.trim(), Some(b)),
            None => (s, None),
        };
        let no_args = |p: Preset| {
            if body.is_some() {
                Err(Error::Config(format!("preset `{name}` takes no parameters")))
            } else {
                Ok(p)
            }
        };
        let mut known = DISK_PRESETS.to_vec();
        known.extend_from_slice(&INTERVAL_PRESETS[..1]);
        match name {
            "const" => Ok(Preset::Const(parse_one(name, body)?)),
            "cos" => no_args(Preset::Cos),
            "cosk" | "coskθ" | "cosktheta" => {
                let k = parse_one(name, body)?;
                if k < 0.0 || k.fract() != 0.0 || k > u32::MAX as f64 {
                    return Err(Error::Config(format!("preset `cosk` needs a nonnegative integer, got {k}")));
                }
                Ok(Preset::CosK(k as u32))
            }
            "trig" => {
                let body = body.ok_or_else(|| Error::Config("preset `trig` needs coefficients".into()))?;
                Ok(Preset::Trig(parse_list(name, body)?))
            }
            "shifted-cos" => Ok(Preset::ShiftedCos(parse_one(name, body)?)),
            "abs-sin" => no_args(Preset::AbsSin),
            "linear" => {
                let body = body.ok_or_else(|| Error::Config("preset `linear` needs c,d".into()))?;
                match parse_list(name, body)?[..] {
                    [c, d] => Ok(Preset::Linear { c, d }),
                    _ => Err(Error::Config("preset `linear` takes exactly two parameters c,d".into())),
                }
            }
            _ => Err(unknown_preset(s, &known)),
        }
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Preset::Const(c) => write!(f, "const:{c}"),
            Preset::Cos => write!(f, "cos"),
            Preset::CosK(k) => write!(f, "cosk:{k}"),
            Preset::Trig(v) => write!(f, "trig:{}", join(v)),
            Preset::ShiftedCos(c) => write!(f, "shifted-cos:{c}"),
            Preset::AbsSin => write!(f, "abs-sin"),
            Preset::Linear { c, d } => write!(f, "linear:{c},{d}"),
        }
    }
}

impl Serialize for Preset {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Preset {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl Preset {
    fn value(&self, t: f64) -> f64 {
        match self {
            Preset::Const(c) => *c,
            Preset::Cos => t.cos(),
            Preset::CosK(k) => (*k as f64 * t).cos(),
            Preset::Trig(v) => trig_value(v, t),
            Preset::ShiftedCos(c) => c + t.cos(),
            Preset::AbsSin => t.sin().abs(),
            Preset::Linear { c, d } => c * t + d,
        }
    }

    fn derivative(&self, t: f64) -> f64 {
        match self {
            Preset::Const(_) => 0.0,
            Preset::Cos | Preset::ShiftedCos(_) => -t.sin(),
            Preset::CosK(k) => -(*k as f64) * (*k as f64 * t).sin(),
            Preset::Trig(v) => trig_derivative(v, t),
            // One-sided derivative from the right at the kinks; only its
            // square enters the diagonal limit.
            Preset::AbsSin => {
                if t.sin() >= 0.0 {
                    t.cos()
                } else {
                    -t.cos()
                }
            }
            Preset::Linear { c, .. } => *c,
        }
    }

    fn is_periodic(&self) -> bool {
        !matches!(self, Preset::Linear { c, .. } if *c != 0.0)
    }

    /// Exact Fourier coefficients up to order `n`.
    fn coefficients(&self, n: usize) -> Option<FourierTable> {
        let mut t = FourierTable::zeros(n);
        match self {
            Preset::Const(c) => t.a0 = *c,
            Preset::Cos => t.set(1, 1.0, 0.0),
            Preset::CosK(0) => t.a0 = 1.0,
            Preset::CosK(k) => t.set(*k as usize, 1.0, 0.0),
            Preset::ShiftedCos(c) => {
                t.a0 = *c;
                t.set(1, 1.0, 0.0);
            }
            Preset::Trig(v) => {
                t.a0 = v.first().copied().unwrap_or(0.0);
                for (i, pair) in v[1.min(v.len())..].chunks(2).enumerate() {
                    t.set(i + 1, pair[0], pair.get(1).copied().unwrap_or(0.0));
                }
            }
            // |sin θ| = 2/π - (4/π) Σ cos 2kθ / (4k² - 1).
            Preset::AbsSin => {
                t.a0 = 2.0 / PI;
                for k in 1..=n / 2 {
                    let kk = k as f64;
                    t.set(2 * k, -4.0 / (PI * (4.0 * kk * kk - 1.0)), 0.0);
                }
            }
            Preset::Linear { .. } => return None,
        }
        Some(t)
    }

    /// Degree if `g` is a trigonometric polynomial.
    fn band_limit(&self) -> Option<usize> {
        match self {
            Preset::Const(_) => Some(0),
            Preset::Cos | Preset::ShiftedCos(_) => Some(1),
            Preset::CosK(k) => Some(*k as usize),
            Preset::Trig(v) => Some(v.len() / 2),
            Preset::AbsSin | Preset::Linear { .. } => None,
        }
    }
}

fn trig_value(v: &[f64], t: f64) -> f64 {
    let mut s = v.first().copied().unwrap_or(0.0);
    for (i, pair) in v.get(1..).unwrap_or(&[]).chunks(2).enumerate() {
        let n = (i + 1) as f64;
        s += pair[0] * (n * t).cos() + pair.get(1).copied().unwrap_or(0.0) * (n * t).sin();
    }
    s
}

fn trig_derivative(v: &[f64], t: f64) -> f64 {
    let mut s = 0.0;
    for (i, pair) in v.get(1..).unwrap_or(&[]).chunks(2).enumerate() {
        let n = (i + 1) as f64;
        s += n * (-pair[0] * (n * t).sin() + pair.get(1).copied().unwrap_or(0.0) * (n * t).cos());
    }
    s
}

/// Fourier coefficient table `a0, (aₙ, bₙ)` for `n = 1..N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierTable {
    pub a0: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FourierRow {
    n: usize,
    a_n: f64,
    b_n: f64,
}

impl FourierTable {
    pub fn zeros(order: usize) -> Self {
        Self {
            a0: 0.0,
            a: vec![0.0; order],
            b: vec![0.0; order],
        }
    }

    pub fn order(&self) -> usize {
        self.a.len()
    }

    fn set(&mut self, n: usize, a: f64, b: f64) {
        if n >= 1 && n <= self.a.len() {
            self.a[n - 1] = a;
            self.b[n - 1] = b;
        }
    }

    /// Copy truncated or zero-padded to order `n`.
    pub fn resized(&self, n: usize) -> Self {
        let mut t = self.clone();
        t.a.resize(n, 0.0);
        t.b.resize(n, 0.0);
        t
    }

    fn validate(&self) -> Result<()> {
        if self.a.len() != self.b.len() {
            return Err(invalid("Fourier table needs equally many cosine and sine coefficients"));
        }
        if !(self.a0.is_finite() && self.a.iter().chain(&self.b).all(|v| v.is_finite())) {
            return Err(invalid("Fourier table has non-finite coefficients"));
        }
        Ok(())
    }

    /// Evaluate `Σ (aₙ cos nθ + bₙ sin nθ)` and its angular derivative.
    pub fn eval_with_derivative(&self, t: f64) -> (f64, f64) {
        let step = Complex64::from_polar(1.0, t);
        let mut e = Complex64::new(1.0, 0.0);
        let (mut v, mut dv) = (self.a0, 0.0);
        for (i, (&a, &b)) in self.a.iter().zip(&self.b).enumerate() {
            e *= step;
            let n = (i + 1) as f64;
            v += a * e.re + b * e.im;
            dv += n * (b * e.re - a * e.im);
        }
        (v, dv)
    }

    /// Read a CSV table with columns `n, a_n, b_n`; `n = 0` holds `a0`.
    pub fn from_csv_reader<R: Read>(rdr: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(rdr);
        let mut rows: Vec<FourierRow> = Vec::new();
        for row in r.deserialize() {
            rows.push(row?);
        }
        let order = rows.iter().map(|r| r.n).max().unwrap_or(0);
        let mut t = Self::zeros(order);
        let mut seen = vec![false; order + 1];
        for row in rows {
            if std::mem::replace(&mut seen[row.n], true) {
                return Err(Error::Config(format!("Fourier table lists n = {} twice", row.n)));
            }
            if row.n == 0 {
                t.a0 = row.a_n;
            } else {
                t.set(row.n, row.a_n, row.b_n);
            }
        }
        t.validate()?;
        Ok(t)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn to_csv_writer<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.serialize(FourierRow { n: 0, a_n: self.a0, b_n: 0.0 })?;
        for (i, (&a_n, &b_n)) in self.a.iter().zip(&self.b).enumerate() {
            wr.serialize(FourierRow { n: i + 1, a_n, b_n })?;
        }
        wr.flush()?;
        Ok(())
    }
}

pub type AngleFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Repr {
    Preset(Preset),
    /// Uniform samples with their trigonometric interpolant.
    Sampled { samples: Vec<f64>, interp: FourierTable },
    Fourier(FourierTable),
    /// Data on the unit sphere of the three-dimensional ball.
    Sphere(SphereFunction),
    Custom {
        name: String,
        f: AngleFn,
        df: Option<AngleFn>,
        lipschitz: bool,
    },
}

/// Boundary datum `g`: a function of the angle on the circle, of the
/// coordinate at the two endpoints of an interval, or of the point on the
/// sphere bounding the ball.
#[derive(Clone)]
pub struct BoundaryFunction {
    repr: Repr,
}

impl fmt::Debug for BoundaryFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BoundaryFunction({})", self.describe())
    }
}

impl From<Preset> for BoundaryFunction {
    fn from(p: Preset) -> Self {
        Self { repr: Repr::Preset(p) }
    }
}

impl FromStr for BoundaryFunction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(s.parse::<Preset>()?.into())
    }
}

impl BoundaryFunction {
    pub fn preset(p: Preset) -> Self {
        p.into()
    }

    /// Uniform samples `g(2πj/M)`, `j = 0..M`; `M` must be a power of two ≥ 4.
    pub fn sampled(samples: Vec<f64>) -> Result<Self> {
        let m = samples.len();
        if m < 4 || !m.is_power_of_two() {
            return Err(invalid(format!("sample grid size must be a power of two >= 4, got {m}")));
        }
        if let Some(j) = samples.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("sample {j} is not finite")));
        }
        let spec = dft(&samples);
        let mut interp = FourierTable::zeros(m / 2);
        interp.a0 = spec[0].re / m as f64;
        for n in 1..m / 2 {
            interp.set(n, 2.0 * spec[n].re / m as f64, -2.0 * spec[n].im / m as f64);
        }
        interp.set(m / 2, spec[m / 2].re / m as f64, 0.0);
        Ok(Self {
            repr: Repr::Sampled { samples, interp },
        })
    }

    pub fn fourier(table: FourierTable) -> Result<Self> {
        table.validate()?;
        Ok(Self { repr: Repr::Fourier(table) })
    }

    pub fn custom(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: Option<AngleFn>,
        lipschitz: bool,
    ) -> Self {
        Self {
            repr: Repr::Custom {
                name: name.into(),
                f: Arc::new(f),
                df,
                lipschitz,
            },
        }
    }

    pub fn sphere(f: SphereFunction) -> Self {
        Self { repr: Repr::Sphere(f) }
    }

    /// Parse a preset valid for `domain`.
    pub fn parse_for(domain: &DomainSpec, s: &str) -> Result<Self> {
        match domain {
            DomainSpec::Ball { .. } => Ok(Self::sphere(s.parse()?)),
            DomainSpec::Interval { .. } => {
                let p: Preset = s.parse()?;
                match p {
                    Preset::Linear { .. } | Preset::Const(_) => Ok(p.into()),
                    _ => Err(unknown_preset(s, INTERVAL_PRESETS)),
                }
            }
            DomainSpec::Disk => {
                let g: Self = s.parse()?;
                g.require_disk_data()?;
                Ok(g)
            }
        }
    }

    pub fn as_sphere(&self) -> Option<&SphereFunction> {
        match &self.repr {
            Repr::Sphere(f) => Some(f),
            _ => None,
        }
    }

    /// Value at a boundary point given in Cartesian coordinates.
    pub fn value_at(&self, z: &[f64]) -> f64 {
        match (&self.repr, z.len()) {
            (Repr::Sphere(f), 3) => f.value([z[0], z[1], z[2]]),
            (_, 1) => self.value(z[0]),
            (_, 2) => self.value(z[1].atan2(z[0])),
            _ => f64::NAN,
        }
    }

    pub fn describe(&self) -> String {
        match &self.repr {
            Repr::Preset(p) => p.to_string(),
            Repr::Sampled { samples, .. } => format!("sampled[{}]", samples.len()),
            Repr::Fourier(t) => format!("fourier[{}]", t.order()),
            Repr::Sphere(f) => f.to_string(),
            Repr::Custom { name, .. } => name.clone(),
        }
    }

    pub fn as_preset(&self) -> Option<&Preset> {
        match &self.repr {
            Repr::Preset(p) => Some(p),
            _ => None,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match &self.repr {
            Repr::Preset(p) => p.value(t),
            Repr::Sampled { interp, .. } => interp.eval_with_derivative(t).0,
            Repr::Fourier(tab) => tab.eval_with_derivative(t).0,
            Repr::Sphere(_) => f64::NAN,
            Repr::Custom { f, .. } => f(t),
        }
    }

    /// Angular derivative, when available.
    pub fn derivative(&self, t: f64) -> Option<f64> {
        match &self.repr {
            Repr::Preset(p) => Some(p.derivative(t)),
            Repr::Sampled { interp, .. } => Some(interp.eval_with_derivative(t).1),
            Repr::Fourier(tab) => Some(tab.eval_with_derivative(t).1),
            Repr::Sphere(_) => None,
            Repr::Custom { df, .. } => df.as_ref().map(|d| d(t)),
        }
    }

    pub fn is_lipschitz(&self) -> bool {
        match &self.repr {
            Repr::Custom { lipschitz, .. } => *lipschitz,
            _ => true,
        }
    }

    /// Whether `g` is a function on the circle.
    pub fn is_periodic(&self) -> bool {
        match &self.repr {
            Repr::Preset(p) => p.is_periodic(),
            Repr::Sphere(_) => false,
            _ => true,
        }
    }

    /// Degree if `g` is known to be a trigonometric polynomial.
    pub fn band_limit(&self) -> Option<usize> {
        match &self.repr {
            Repr::Preset(p) => p.band_limit(),
            Repr::Fourier(t) => Some(t.order()),
            Repr::Sampled { .. } | Repr::Sphere(_) | Repr::Custom { .. } => None,
        }
    }

    /// Exact or precomputed coefficients, if the representation carries them.
    fn known_coefficients(&self, n: usize) -> Option<FourierTable> {
        match &self.repr {
            Repr::Preset(p) => p.coefficients(n),
            Repr::Fourier(t) => Some(t.resized(n)),
            _ => None,
        }
    }

    pub(crate) fn require_disk_data(&self) -> Result<()> {
        if self.is_periodic() && self.as_sphere().is_none() {
            Ok(())
        } else {
            Err(Error::Unsupported(format!("`{}` is not a function on the circle", self.describe())))
        }
    }

    /// `g(θ)^⟨κ⟩` as new boundary data with the chain-rule derivative.
    pub fn signed_power(&self, kappa: f64) -> BoundaryFunction {
        let g = self.clone();
        let g2 = self.clone();
        let df: Option<AngleFn> = self.derivative(0.0).map(|_| {
            Arc::new(move |t: f64| {
                let v = g2.value(t);
                let d = g2.derivative(t).unwrap_or(0.0);
                if v == 0.0 {
                    if kappa == 1.0 {
                        d
                    } else if kappa > 1.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    kappa * v.abs().powf(kappa - 1.0) * d
                }
            }) as AngleFn
        });
        BoundaryFunction::custom(
            format!("({})^<{kappa}>", self.describe()),
            move |t| spow(g.value(t), kappa),
            df,
            kappa >= 1.0 && self.is_lipschitz(),
        )
    }
}

fn dft(samples: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::<f64>::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// Harmonic extension of boundary data on the unit disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicDiskFunction {
    pub a0: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl HarmonicDiskFunction {
    pub fn from_table(t: FourierTable) -> Result<Self> {
        t.validate()?;
        Ok(Self { a0: t.a0, a: t.a, b: t.b })
    }

    pub fn table(&self) -> FourierTable {
        FourierTable {
            a0: self.a0,
            a: self.a.clone(),
            b: self.b.clone(),
        }
    }

    pub fn order(&self) -> usize {
        self.a.len()
    }

    pub fn is_constant(&self) -> bool {
        self.a.iter().chain(&self.b).all(|&c| c == 0.0)
    }

    /// `F(z)` and `F'(z)` by Horner's scheme.
    #[inline]
    fn holomorphic(&self, z: Complex64) -> (Complex64, Complex64) {
        let mut f = Complex64::new(0.0, 0.0);
        let mut df = Complex64::new(0.0, 0.0);
        for n in (1..=self.a.len()).rev() {
            let c = Complex64::new(self.a[n - 1], -self.b[n - 1]);
            df = df * z + f;
            f = f * z + c;
        }
        // f currently holds Σ cₙ z^{n-1}; shift once more.
        df = df * z + f;
        f = f * z + self.a0;
        (f, df)
    }

    /// Value at the Cartesian point `(x, y)`; no domain check.
    #[inline]
    pub fn value_xy(&self, x: f64, y: f64) -> f64 {
        self.holomorphic(Complex64::new(x, y)).0.re
    }

    /// Gradient `(∂₁u, ∂₂u)` at `(x, y)`.
    #[inline]
    pub fn gradient_xy(&self, x: f64, y: f64) -> [f64; 2] {
        let d = self.holomorphic(Complex64::new(x, y)).1;
        [d.re, -d.im]
    }

    #[inline]
    pub fn grad_sq_xy(&self, x: f64, y: f64) -> f64 {
        self.holomorphic(Complex64::new(x, y)).1.norm_sqr()
    }

    fn check_radius(r: f64) -> Result<()> {
        if (0.0..1.0).contains(&r) {
            Ok(())
        } else {
            Err(Error::Domain {
                point: vec![r],
                domain: "disk".into(),
                reason: "radius must lie in [0, 1); boundary values go through radial_trace".into(),
            })
        }
    }

    /// `u(r, θ)` for `0 ≤ r < 1`.
    pub fn eval_u(&self, r: f64, theta: f64) -> Result<f64> {
        Self::check_radius(r)?;
        Ok(self.value_xy(r * theta.cos(), r * theta.sin()))
    }

    /// `|∇u(r, θ)|²` for `0 ≤ r < 1`.
    pub fn eval_grad_sq(&self, r: f64, theta: f64) -> Result<f64> {
        Self::check_radius(r)?;
        Ok(self.grad_sq_xy(r * theta.cos(), r * theta.sin()))
    }

    /// The series summed at `r = 1`.
    pub fn boundary_value(&self, theta: f64) -> f64 {
        self.value_xy(theta.cos(), theta.sin())
    }

    /// `∫_D |∇u|² = π Σ n (aₙ² + bₙ²)`.
    pub fn dirichlet_energy(&self) -> f64 {
        let terms: Vec<f64> = (1..=self.a.len())
            .map(|n| PI * n as f64 * (self.a[n - 1].powi(2) + self.b[n - 1].powi(2)))
            .collect();
        pairwise_sum(&terms)
    }

    /// `x ↦ u(ρ x)`: the extension of the values of `u` on the circle of radius ρ.
    pub fn dilate(&self, rho: f64) -> Self {
        let mut out = self.clone();
        let mut s = 1.0;
        for n in 0..out.a.len() {
            s *= rho;
            out.a[n] *= s;
            out.b[n] *= s;
        }
        out
    }

    /// Boundary data equal to `u` on the unit circle.
    pub fn trace_data(&self) -> BoundaryFunction {
        BoundaryFunction { repr: Repr::Fourier(self.table()) }
    }
}

/// Default sample count used when projecting an analytic `g` of order `n`.
pub fn default_sample_count(n: usize) -> usize {
    (8 * n).next_power_of_two().max(256)
}

/// Fourier projection of `g` to order `n`.
///
/// Named presets and coefficient tables use their exact coefficients; sampled
/// data use the discrete transform of the samples; other functions are sampled
/// on [`default_sample_count`] points.
pub fn fourier_project(g: &BoundaryFunction, n: usize) -> Result<HarmonicDiskFunction> {
    if n == 0 {
        return Err(invalid("truncation order must be at least 1"));
    }
    g.require_disk_data()?;
    if let Some(t) = g.known_coefficients(n) {
        return HarmonicDiskFunction::from_table(t);
    }
    match &g.repr {
        Repr::Sampled { samples, .. } => project_samples(samples, n),
        _ => fourier_project_with(g, n, default_sample_count(n)),
    }
}

/// Fourier projection from `m` uniform samples of `g`.
pub fn fourier_project_with(g: &BoundaryFunction, n: usize, m: usize) -> Result<HarmonicDiskFunction> {
    if n == 0 {
        return Err(invalid("truncation order must be at least 1"));
    }
    g.require_disk_data()?;
    let samples: Vec<f64> = periodic_nodes(m).map(|t| g.value(t)).collect();
    if let Some(j) = samples.iter().position(|v| !v.is_finite()) {
        return Err(invalid(format!("g is not finite at sample {j}")));
    }
    project_samples(&samples, n)
}

fn project_samples(samples: &[f64], n: usize) -> Result<HarmonicDiskFunction> {
    let m = samples.len();
    if m < 2 * n + 2 {
        return Err(Error::Aliasing {
            samples: m,
            order: n,
            need: 2 * n + 2,
        });
    }
    let spec = dft(samples);
    let mut t = FourierTable::zeros(n);
    t.a0 = spec[0].re / m as f64;
    for k in 1..=n {
        t.set(k, 2.0 * spec[k].re / m as f64, -2.0 * spec[k].im / m as f64);
    }
    HarmonicDiskFunction::from_table(t)
}

/// `∫ g(z) P_D(x, z) dz` by direct quadrature against the closed-form kernel.
///
/// On the disk the periodic trapezoid rule is doubled until two successive
/// values agree to `1e-11` relative (absolute below `1e-2`). The rule is
/// spectrally accurate for smooth data, so the returned value is much closer
/// than that; data with kinks converge at second order.
pub fn poisson_extend_pointwise(ks: &KernelSet, g: &BoundaryFunction, x: &[f64]) -> Result<f64> {
    ks.domain.require_interior(x)?;
    match ks.domain {
        DomainSpec::Interval { a, b } => {
            Ok(ks.poisson(x, &[a])? * g.value(a) + ks.poisson(x, &[b])? * g.value(b))
        }
        DomainSpec::Disk => {
            g.require_disk_data()?;
            let r = norm(x);
            let th = x[1].atan2(x[0]);
            periodic_converged("Poisson extension", |eta| g.value(eta) * poisson_disk_polar(r, th, eta))
        }
        DomainSpec::Ball { .. } => Err(Error::Unsupported(
            "angle-parametrised data on the ball; use SphereFunction and poisson_extend_sphere".into(),
        )),
    }
}

/// Periodic trapezoid rule on `[0, 2π)` with doubling until convergence.
pub(crate) fn periodic_converged(context: &str, f: impl Fn(f64) -> f64) -> Result<f64> {
    let mut m = 64;
    let mut prev = f64::NAN;
    let mut last_diff = f64::INFINITY;
    while m <= 1 << 20 {
        let vals: Vec<f64> = periodic_nodes(m).map(&f).collect();
        let v = pairwise_sum(&vals) * TAU / m as f64;
        if !v.is_finite() {
            return Err(Error::Accuracy {
                context: context.into(),
                value: v,
                estimate: f64::INFINITY,
                cells: vec![],
            });
        }
        last_diff = (v - prev).abs();
        if last_diff <= 1e-11 * v.abs().max(1e-2) {
            return Ok(v);
        }
        prev = v;
        m *= 2;
    }
    // Data with kinks converge only algebraically; accept the finest rule
    // when it is still well inside every downstream tolerance.
    if last_diff <= 1e-9 * prev.abs().max(1.0) {
        return Ok(prev);
    }
    Err(Error::Accuracy {
        context: context.into(),
        value: prev,
        estimate: last_diff,
        cells: vec![],
    })
}

/// Default radii `1 - 2^{-k}`, `k = 1..=12`.
pub fn default_trace_radii() -> Vec<f64> {
    (1..=12).map(|k| 1.0 - 0.5f64.powi(k)).collect()
}

/// Tolerance on successive extrapolants in [`radial_trace`].
pub const TRACE_TOL: f64 = 1e-10;

/// Boundary value of `u` along the ray at angle `θ`, by polynomial
/// extrapolation of `u(r_k, θ)` in `h = 1 - r` to `h = 0`.
pub fn radial_trace(h: &HarmonicDiskFunction, theta: f64, radii: &[f64]) -> Result<f64> {
    extrapolate_ray(theta, radii, |r| h.value_xy(r * theta.cos(), r * theta.sin()))
}

/// Trace defined through `u^⟨p/2⟩`: extrapolate `u^⟨p/2⟩` along the ray and
/// undo the signed power.
pub fn radial_trace_signed(h: &HarmonicDiskFunction, p: f64, theta: f64, radii: &[f64]) -> Result<f64> {
    let k = 0.5 * p;
    let w = extrapolate_ray(theta, radii, |r| spow(h.value_xy(r * theta.cos(), r * theta.sin()), k))?;
    Ok(spow(w, 1.0 / k))
}

fn extrapolate_ray(theta: f64, radii: &[f64], f: impl Fn(f64) -> f64) -> Result<f64> {
    if radii.len() < 2 {
        return Err(invalid("radial trace needs at least two radii"));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) || radii[0] < 0.0 || radii[radii.len() - 1] >= 1.0 {
        return Err(invalid("radii must increase strictly inside [0, 1)"));
    }
    let hs: Vec<f64> = radii.iter().map(|r| 1.0 - r).collect();
    let mut table: Vec<f64> = radii.iter().map(|&r| f(r)).collect();
    // Neville: after stage j, table[i] is the degree-j extrapolant through
    // nodes i-j..=i evaluated at 0. Track the last entry of each stage.
    let mut diag = vec![table[table.len() - 1]];
    for j in 1..hs.len() {
        for i in (j..hs.len()).rev() {
            let (hi, hj) = (hs[i], hs[i - j]);
            table[i] = (hj * table[i] - hi * table[i - 1]) / (hj - hi);
        }
        diag.push(table[hs.len() - 1]);
    }
    let (mut best, mut best_diff) = (diag[diag.len() - 1], f64::INFINITY);
    for w in diag.windows(2) {
        let d = (w[1] - w[0]).abs();
        if d < best_diff {
            best_diff = d;
            best = w[1];
        }
    }
    let scale = best.abs().max(1.0);
    if best_diff <= TRACE_TOL * scale && best.is_finite() {
        Ok(best)
    } else {
        Err(Error::TraceFailure {
            angle: theta,
            residual: best_diff,
        })
    }
}

/// `u(x) = c x + d` on `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalHarmonic {
    pub c: f64,
    pub dconst: f64,
    pub a: f64,
    pub b: f64,
}

impl IntervalHarmonic {
    pub fn new(c: f64, dconst: f64, domain: DomainSpec) -> Result<Self> {
        match domain {
            DomainSpec::Interval { a, b } => Ok(Self { c, dconst, a, b }),
            other => Err(invalid(format!("interval harmonic function on {other}"))),
        }
    }

    /// The extension of endpoint values `u(a)`, `u(b)`.
    pub fn from_endpoints(ua: f64, ub: f64, domain: DomainSpec) -> Result<Self> {
        let DomainSpec::Interval { a, b } = domain else {
            return Err(invalid(format!("interval harmonic function on {domain}")));
        };
        let c = (ub - ua) / (b - a);
        Self::new(c, ua - c * a, domain)
    }

    /// Extension of `g` evaluated at the endpoint coordinates.
    pub fn from_boundary(g: &BoundaryFunction, domain: DomainSpec) -> Result<Self> {
        let DomainSpec::Interval { a, b } = domain else {
            return Err(invalid(format!("interval harmonic function on {domain}")));
        };
        Self::from_endpoints(g.value(a), g.value(b), domain)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.c * x + self.dconst
    }

    pub fn ua(&self) -> f64 {
        self.eval(self.a)
    }

    pub fn ub(&self) -> f64 {
        self.eval(self.b)
    }

    pub fn domain(&self) -> DomainSpec {
        DomainSpec::Interval { a: self.a, b: self.b }
    }
}

/// Boundary data on the unit sphere in three dimensions.
#[derive(Debug, Clone, PartialEq)]
pub enum SphereFunction {
    Const(f64),
    /// `c · z + d`.
    Linear { c: [f64; 3], d: f64 },
    /// `s (z₃² - (z₁² + z₂²)/2)`, the restriction of a harmonic quadratic.
    Zonal(f64),
}

impl FromStr for SphereFunction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, body) = match s.split_once(':') {
            Some((n, b)) => (n.trim(), Some(b)),
            None => (s, None),
        };
        match name {
            "const" => Ok(Self::Const(parse_one(name, body)?)),
            "zonal" => Ok(Self::Zonal(parse_one(name, body)?)),
            "linear" => {
                let body = body.ok_or_else(|| Error::Config("preset `linear` needs c1,c2,c3,d".into()))?;
                match parse_list(name, body)?[..] {
                    [c1, c2, c3, d] => Ok(Self::Linear { c: [c1, c2, c3], d }),
                    _ => Err(Error::Config("ball preset `linear` takes four parameters c1,c2,c3,d".into())),
                }
            }
            _ => Err(unknown_preset(s, BALL_PRESETS)),
        }
    }
}

impl fmt::Display for SphereFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Const(c) => write!(f, "const:{c}"),
            Self::Linear { c, d } => write!(f, "linear:{},{},{},{d}", c[0], c[1], c[2]),
            Self::Zonal(s) => write!(f, "zonal:{s}"),
        }
    }
}

impl Serialize for SphereFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SphereFunction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

impl SphereFunction {
    pub fn value(&self, z: [f64; 3]) -> f64 {
        self.extension().eval(z)
    }

    /// The harmonic extension, a polynomial of degree at most two.
    pub fn extension(&self) -> BallHarmonic {
        match *self {
            Self::Const(c) => BallHarmonic::constant(c),
            Self::Linear { c, d } => BallHarmonic::linear(c, d),
            Self::Zonal(s) => BallHarmonic::zonal(s),
        }
    }
}

/// `u(x) = xᵀ A x + c · x + d` with `A` symmetric and traceless, hence harmonic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallHarmonic {
    pub quad: [[f64; 3]; 3],
    pub lin: [f64; 3],
    pub d: f64,
}

impl BallHarmonic {
    pub fn new(quad: [[f64; 3]; 3], lin: [f64; 3], d: f64) -> Result<Self> {
        let tr = quad[0][0] + quad[1][1] + quad[2][2];
        let scale = quad.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        if tr.abs() > 1e-14 * scale {
            return Err(invalid(format!("quadratic part has trace {tr}; not harmonic")));
        }
        for i in 0..3 {
            for j in 0..i {
                if quad[i][j] != quad[j][i] {
                    return Err(invalid("quadratic part must be symmetric"));
                }
            }
        }
        Ok(Self { quad, lin, d })
    }

    pub fn constant(c: f64) -> Self {
        Self {
            quad: [[0.0; 3]; 3],
            lin: [0.0; 3],
            d: c,
        }
    }

    pub fn linear(c: [f64; 3], d: f64) -> Self {
        Self {
            quad: [[0.0; 3]; 3],
            lin: c,
            d,
        }
    }

    pub fn zonal(s: f64) -> Self {
        Self {
            quad: [[-0.5 * s, 0.0, 0.0], [0.0, -0.5 * s, 0.0], [0.0, 0.0, s]],
            lin: [0.0; 3],
            d: 0.0,
        }
    }

    pub fn eval(&self, x: [f64; 3]) -> f64 {
        let mut v = self.d;
        for i in 0..3 {
            v += self.lin[i] * x[i];
            for j in 0..3 {
                v += x[i] * self.quad[i][j] * x[j];
            }
        }
        v
    }

    pub fn gradient(&self, x: [f64; 3]) -> [f64; 3] {
        let mut g = self.lin;
        for (i, gi) in g.iter_mut().enumerate() {
            for j in 0..3 {
                *gi += 2.0 * self.quad[i][j] * x[j];
            }
        }
        g
    }

    pub fn grad_sq(&self, x: [f64; 3]) -> f64 {
        self.gradient(x).iter().map(|v| v * v).sum()
    }

    pub fn is_constant(&self) -> bool {
        self.lin.iter().chain(self.quad.iter().flatten()).all(|&v| v == 0.0)
    }
}

/// `∫_{S²} f(z) P(x, z) dz` on the unit ball, by a product rule in geodesic
/// polar coordinates about `x/|x|` that resolves the peak of the kernel.
pub fn poisson_extend_sphere(f: impl Fn([f64; 3]) -> f64, x: [f64; 3]) -> Result<f64> {
    let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    if !(r < 1.0) {
        return Err(Error::Domain {
            point: x.to_vec(),
            domain: "ball(d=3)".into(),
            reason: "point must lie strictly inside the domain".into(),
        });
    }
    let pole = if r > 0.0 { [x[0] / r, x[1] / r, x[2] / r] } else { [0.0, 0.0, 1.0] };
    let frame = frame_about(pole);
    let mut prev = f64::NAN;
    let mut n = 16;
    let mut last_diff = f64::INFINITY;
    while n <= 2048 {
        let vals: Vec<f64> = sphere_rule(n, 2 * n, &frame)
            .into_iter()
            .map(|(z, w)| {
                let d2 = (x[0] - z[0]).powi(2) + (x[1] - z[1]).powi(2) + (x[2] - z[2]).powi(2);
                w * f(z) * (1.0 - r * r) / (4.0 * PI * d2 * d2.sqrt())
            })
            .collect();
        let v = pairwise_sum(&vals);
        last_diff = (v - prev).abs();
        if last_diff <= 1e-12 * v.abs() || last_diff <= 1e-14 {
            return Ok(v);
        }
        prev = v;
        n *= 2;
    }
    Err(Error::Accuracy {
        context: "ball Poisson extension".into(),
        value: prev,
        estimate: last_diff,
        cells: vec![],
    })
}
