//! Grid-refinement studies against closed-form references.
//!
//! Only targets with an exact value are accepted: `p = 2` with band-limited
//! disk data (Douglas and Hardy–Stein), linear data on the interval, and
//! linear data on the ball.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{
    boundary_form_hdp, green_weighted_energy, interval_boundary_form, interval_interior_energy, QuadratureGrid,
};
use crate::harmonic::{fourier_project, fourier_project_with, BoundaryFunction, IntervalHarmonic, SphereFunction};
use crate::kernels::{DomainSpec, Exponent};

/// Relative error at or below which a level counts as exact.
pub const EXACT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyKind {
    Douglas,
    HardyStein,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub level: u32,
    pub value: f64,
    pub abs_error: f64,
    pub observed_order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub kind: StudyKind,
    pub domain: String,
    pub g: String,
    pub p: f64,
    pub reference: f64,
    pub rows: Vec<ConvergenceRow>,
}

pub const CSV_HEADER: [&str; 4] = ["level", "value", "abs_error", "observed_order"];

impl ConvergenceTable {
    fn resolved(&self, e: f64) -> bool {
        e <= EXACT_FLOOR * self.reference.abs().max(1.0)
    }

    /// Errors do not grow by more than a factor two from one level to the
    /// next, and the finest error is no larger than the coarsest; levels
    /// already at the exactness floor are ignored.
    pub fn is_monotone(&self) -> bool {
        let errs: Vec<f64> = self.rows.iter().map(|r| r.abs_error).collect();
        let steps_ok = errs
            .windows(2)
            .all(|w| self.resolved(w[1]) || w[1] <= 2.0 * w[0]);
        let ends_ok = match (errs.first(), errs.last()) {
            (Some(&a), Some(&b)) => self.resolved(b) || b <= a,
            _ => true,
        };
        steps_ok && ends_ok
    }

    /// Smallest observed order over the levels where one is defined.
    pub fn min_order(&self) -> Option<f64> {
        self.rows.iter().filter_map(|r| r.observed_order).reduce(f64::min)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(CSV_HEADER)?;
        for r in &self.rows {
            wr.write_record([
                r.level.to_string(),
                format!("{:.17e}", r.value),
                format!("{:.6e}", r.abs_error),
                r.observed_order.map(|o| format!("{o:.4}")).unwrap_or_default(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn not_anchored(what: &str) -> Error {
    Error::NotAnchored(format!(
        "{what}; anchored targets are p = 2 with band-limited disk data, linear interval data, or linear ball data"
    ))
}

/// `H[g]` at `p = 2` for a trigonometric polynomial: `2π Σ n (aₙ² + bₙ²)`.
fn douglas_reference_disk(g: &BoundaryFunction) -> Result<f64> {
    let n = g.band_limit().ok_or_else(|| not_anchored("data are not band-limited"))?;
    Ok(2.0 * fourier_project(g, n.max(1))?.dirichlet_energy())
}

/// `E^x g² - u(x)²` at `p = 2` for a trigonometric polynomial: `g²` has
/// degree `2n` and its extension is summed exactly.
fn hardy_stein_reference(g: &BoundaryFunction, x: [f64; 2]) -> Result<f64> {
    let n = g.band_limit().ok_or_else(|| not_anchored("data are not band-limited"))?.max(1);
    let u = fourier_project(g, n)?.value_xy(x[0], x[1]);
    let sq = BoundaryFunction::custom("g^2", {
        let g = g.clone();
        move |t| g.value(t).powi(2)
    }, None, true);
    let m = (8 * n + 8).next_power_of_two();
    let e = fourier_project_with(&sq, 2 * n, m)?.value_xy(x[0], x[1]);
    Ok(e - u * u)
}

fn ball_reference(f: &SphereFunction) -> Result<f64> {
    match f {
        SphereFunction::Linear { c, .. } => Ok(2.0 * (4.0 * PI / 3.0) * (c[0] * c[0] + c[1] * c[1] + c[2] * c[2])),
        SphereFunction::Const(_) => Ok(0.0),
        SphereFunction::Zonal(_) => Err(not_anchored("zonal ball data")),
    }
}

/// Value of the discretised side at each level against its exact reference.
pub fn convergence(
    kind: StudyKind,
    domain: &DomainSpec,
    g: &BoundaryFunction,
    p: Exponent,
    x: Option<[f64; 2]>,
    levels: &[u32],
) -> Result<ConvergenceTable> {
    if levels.is_empty() {
        return Err(Error::InvalidArgument("at least one level is required".into()));
    }
    let (reference, values): (f64, Vec<f64>) = match (kind, *domain) {
        (StudyKind::Douglas, DomainSpec::Interval { .. }) => {
            let u = IntervalHarmonic::from_boundary(g, *domain)?;
            let reference = interval_interior_energy(&u, p);
            (reference, levels.iter().map(|_| interval_boundary_form(&u, p)).collect())
        }
        (StudyKind::Douglas, DomainSpec::Disk) => {
            if !p.is_two() {
                return Err(not_anchored("no closed form for the disk at p != 2"));
            }
            let reference = douglas_reference_disk(g)?;
            let values = levels
                .iter()
                .map(|&l| Ok(boundary_form_hdp(g, p, domain, &QuadratureGrid::at_level(l))?.value))
                .collect::<Result<_>>()?;
            (reference, values)
        }
        (StudyKind::Douglas, DomainSpec::Ball { .. }) => {
            if !p.is_two() {
                return Err(not_anchored("no closed form for the ball at p != 2"));
            }
            let f = g.as_sphere().ok_or_else(|| not_anchored("data are not a sphere function"))?;
            let reference = ball_reference(f)?;
            let values = levels
                .iter()
                .map(|&l| Ok(boundary_form_hdp(g, p, domain, &QuadratureGrid::at_level(l))?.value))
                .collect::<Result<_>>()?;
            (reference, values)
        }
        (StudyKind::HardyStein, DomainSpec::Disk) => {
            if !p.is_two() {
                return Err(not_anchored("no closed form for Hardy–Stein at p != 2"));
            }
            let x = x.unwrap_or([0.0, 0.0]);
            let reference = hardy_stein_reference(g, x)?;
            let n = g.band_limit().unwrap_or(1).max(16);
            let h = fourier_project(g, n)?;
            let values = levels
                .iter()
                .map(|&l| Ok(p.energy_factor() * green_weighted_energy(&h, p, x, &QuadratureGrid::at_level(l))?.value))
                .collect::<Result<_>>()?;
            (reference, values)
        }
        (StudyKind::HardyStein, _) => return Err(not_anchored("Hardy–Stein studies run on the disk")),
    };
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(levels.len());
    let floor = EXACT_FLOOR * reference.abs().max(1.0);
    for (&level, &value) in levels.iter().zip(&values) {
        let abs_error = (value - reference).abs();
        let observed_order = rows.last().and_then(|prev| {
            (prev.abs_error > floor && abs_error > floor).then(|| (prev.abs_error / abs_error).log2() / (level as f64 - prev.level as f64))
        });
        rows.push(ConvergenceRow {
            level,
            value,
            abs_error,
            observed_order,
        });
    }
    Ok(ConvergenceTable {
        kind,
        domain: domain.name().into(),
        g: g.describe(),
        p: p.get(),
        reference,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn p(v: f64) -> Exponent {
        Exponent::new(v).unwrap()
    }

    #[test]
    fn douglas_disk_cos() {
        let t = convergence(StudyKind::Douglas, &DomainSpec::Disk, &"cos".parse().unwrap(), p(2.0), None, &[1, 2, 3]).unwrap();
        assert!((t.reference - TAU).abs() < 1e-14);
        assert!(t.is_monotone(), "{t:?}");
        assert!(t.rows[2].abs_error < 1e-6 * TAU);
    }

    #[test]
    fn hardy_stein_origin_and_off_centre() {
        let g = "cos".parse().unwrap();
        let t = convergence(StudyKind::HardyStein, &DomainSpec::Disk, &g, p(2.0), None, &[1, 2, 3]).unwrap();
        assert!((t.reference - 0.5).abs() < 1e-15);
        assert!(t.is_monotone(), "{t:?}");
        let t = convergence(StudyKind::HardyStein, &DomainSpec::Disk, &g, p(2.0), Some([0.3, 0.0]), &[1, 2, 3]).unwrap();
        assert!((t.reference - (0.545 - 0.09)).abs() < 1e-14, "{}", t.reference);
    }

    #[test]
    fn interval_is_exact_at_every_level() {
        let iv = DomainSpec::interval(0.0, 1.0).unwrap();
        for q in [1.5, 2.0, 3.0] {
            let t = convergence(StudyKind::Douglas, &iv, &"linear:1,0".parse().unwrap(), p(q), None, &[1, 2, 3]).unwrap();
            assert!(t.rows.iter().all(|r| r.abs_error <= 1e-12 && r.observed_order.is_none()));
            assert!(t.is_monotone());
        }
    }

    #[test]
    fn unanchored_targets_are_refused() {
        let g = "shifted-cos:0.5".parse().unwrap();
        assert!(matches!(
            convergence(StudyKind::Douglas, &DomainSpec::Disk, &g, p(3.0), None, &[1, 2]),
            Err(Error::NotAnchored(_))
        ));
        assert!(matches!(
            convergence(StudyKind::Douglas, &DomainSpec::Disk, &"abs-sin".parse().unwrap(), p(2.0), None, &[1, 2]),
            Err(Error::NotAnchored(_))
        ));
    }

    #[test]
    fn csv_header_is_stable() {
        let t = convergence(StudyKind::Douglas, &DomainSpec::Disk, &"cos".parse().unwrap(), p(2.0), None, &[1, 2]).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().next().unwrap(), "level,value,abs_error,observed_order");
        assert_eq!(s.lines().count(), 3);
    }
}
