//! Fit workload base-op counts to published iteration times.
//!
//! The iteration times are linear in the op counts once the transfer size
//! of a derated ring multiply is fixed, so the fit is a one-dimensional
//! search over that size with a weighted least-squares solve at each point.
//! Rows are weighted by their target so the residual is relative.

use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use super::{coefficients, derate_pct, time_s, ChipModel, CountSource, IoKind, IoModel, OpCounts, RpuConfigName, Table1Row, WorkloadSpec};

/// Tolerances a fit must meet.
pub const IDEAL_TOLERANCE: f64 = 0.05;
pub const DERATE_TOLERANCE_PTS: i64 = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub config: RpuConfigName,
    pub io: IoKind,
    pub bootstrap: bool,
    pub target_s: f64,
    pub predicted_s: f64,
    /// `(predicted - target) / target`
    pub rel_err: f64,
    pub target_derate_pct: Option<i64>,
    pub predicted_derate_pct: Option<i64>,
    /// Whether this row took part in the fit.
    pub fitted: bool,
}

impl Residual {
    pub fn ok(&self) -> bool {
        match (self.target_derate_pct, self.predicted_derate_pct) {
            (Some(t), Some(p)) => (t - p).abs() <= DERATE_TOLERANCE_PTS,
            _ => self.rel_err.abs() <= IDEAL_TOLERANCE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub workload: WorkloadSpec,
    /// Iteration op counts with bootstrapping, as fitted.
    pub with_bs_ops: OpCounts,
    pub residuals: Vec<Residual>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CalibrationError {
    /// No rows to fit, or no key switches to attribute bootstrap cost to.
    Underdetermined,
    /// The best fit needs negative op counts.
    Negative(OpCounts),
    /// The best fit misses a tolerance; all residuals attached.
    Residuals(Vec<Residual>),
}

impl fmt::Display for CalibrationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CalibrationError::Underdetermined => write!(f, "calibration is underdetermined"),
            CalibrationError::Negative(o) => write!(f, "fit needs negative op counts: {o:?}"),
            CalibrationError::Residuals(r) => {
                let bad = r.iter().filter(|r| !r.ok()).count();
                write!(f, "{bad} of {} rows outside tolerance", r.len())
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for CalibrationError {}

/// Solve `a x = b` for 3x3 `a`; `None` when singular.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for c in 0..3 {
        let p = (c..3).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-300 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..3 {
            let f = a[r][c] / a[c][c];
            for k in c..3 {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = [0.0; 3];
    for c in (0..3).rev() {
        let s: f64 = (c + 1..3).map(|k| a[c][k] * x[k]).sum();
        x[c] = (b[c] - s) / a[c][c];
    }
    Some(x)
}

/// Weighted least squares with weights `1/y`; returns the solution and the
/// sum of squared relative residuals.
fn fit_rows(rows: &[([f64; 3], f64)]) -> Option<([f64; 3], f64)> {
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for (x, y) in rows {
        let xr: Vec<f64> = x.iter().map(|v| v / y).collect();
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += xr[i] * xr[j];
            }
            atb[i] += xr[i];
        }
    }
    let c = solve3(ata, atb)?;
    let ss = rows
        .iter()
        .map(|(x, y)| {
            let p: f64 = (0..3).map(|i| x[i] * c[i]).sum();
            ((p - y) / y) * ((p - y) / y)
        })
        .sum();
    Some((c, ss))
}

fn counts(c: [f64; 3]) -> OpCounts {
    OpCounts::new(c[0], c[1], c[2])
}

/// Fit `base`'s op counts and ring-multiply transfer size against the
/// `targets` rows whose interface is in `fit_on`; every target row is then
/// predicted and checked.
pub fn calibrate(
    base: &WorkloadSpec,
    chips: &[ChipModel],
    targets: &[Table1Row],
    fit_on: &[IoKind],
) -> Result<Calibration, CalibrationError> {
    let chip = |c: RpuConfigName| chips.iter().find(|m| m.name == c);
    let used: Vec<&Table1Row> = targets.iter().filter(|r| fit_on.contains(&r.io) && chip(r.config).is_some()).collect();
    let sw = base.switches();
    if used.len() < 3 || sw.keyswitch <= 0.0 || base.towers_bootstrap == 0 {
        return Err(CalibrationError::Underdetermined);
    }
    let mut w = base.clone();
    let mut best: Option<(f64, f64, [f64; 3], [f64; 3])> = None;
    for step in 0..=2500 {
        w.vectors_per_ring_mult = 0.5 + step as f64 * 0.001;
        let coef = |r: &Table1Row| coefficients(chip(r.config).unwrap(), &IoModel::of(r.io), &w);
        let nb: Vec<_> = used.iter().map(|r| (coef(r), r.no_bs_s)).collect();
        let bs: Vec<_> = used.iter().map(|r| (coef(r), r.with_bs_s)).collect();
        let (Some((a, sa)), Some((b, sb))) = (fit_rows(&nb), fit_rows(&bs)) else { continue };
        if best.is_none_or(|(s, ..)| sa + sb < s) {
            best = Some((sa + sb, w.vectors_per_ring_mult, a, b));
        }
    }
    let (_, k, nb, bs) = best.ok_or(CalibrationError::Underdetermined)?;
    w.vectors_per_ring_mult = k;
    let nb = counts(nb);
    let bs = counts(bs);
    let t = base.towers_bootstrap as f64;
    let rest = bs.add(nb.scale(-1.0)).add(base.modswitch_ops.scale(-sw.modswitch * t));
    let ks = rest.scale(1.0 / (sw.keyswitch * t));
    if !nb.non_negative() {
        return Err(CalibrationError::Negative(nb));
    }
    if !ks.non_negative() {
        return Err(CalibrationError::Negative(ks));
    }
    w.base_ops = Some(nb);
    w.keyswitch_ops = Some(ks);
    w.source = CountSource::Calibrated;
    let residuals = residuals(&w, chips, targets, fit_on);
    if residuals.iter().all(Residual::ok) {
        Ok(Calibration { workload: w, with_bs_ops: bs, residuals })
    } else {
        Err(CalibrationError::Residuals(residuals))
    }
}

/// Predicted against published times for every row with a known chip.
pub fn residuals(w: &WorkloadSpec, chips: &[ChipModel], targets: &[Table1Row], fit_on: &[IoKind]) -> Vec<Residual> {
    let mut out = Vec::new();
    for bootstrap in [false, true] {
        let Some(ops) = (if bootstrap { w.with_bootstrap_ops() } else { w.base_ops }) else { continue };
        for r in targets {
            let Some(chip) = chips.iter().find(|m| m.name == r.config) else { continue };
            let p = time_s(ops, chip, &IoModel::of(r.io), w);
            let ideal = time_s(ops, chip, &IoModel::ideal(), w);
            let (target, target_derate) =
                if bootstrap { (r.with_bs_s, r.with_bs_derate_pct) } else { (r.no_bs_s, r.no_bs_derate_pct) };
            out.push(Residual {
                config: r.config,
                io: r.io,
                bootstrap,
                target_s: target,
                predicted_s: p,
                rel_err: (p - target) / target,
                target_derate_pct: target_derate,
                predicted_derate_pct: target_derate.map(|_| derate_pct(p, ideal)),
                fitted: fit_on.contains(&r.io),
            });
        }
    }
    out
}
