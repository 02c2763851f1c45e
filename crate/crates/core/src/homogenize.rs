//! The ε-sweep: solve the oscillatory problem for each ε on a common grid,
//! solve the effective problem once, and fit the decay of the sup-norm gap.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::cell::{affine_fit, EffectiveTable, TorusGrid};
use crate::fmt::sig12;
use crate::fraccalc::FracOrder;
use crate::hamiltonian::{HamiltonianSpec, InitialData};
use crate::tfhj::{solve, Dynamics, FieldHistory, Scheme, SchemeParams, TimeOrder};
use crate::{Error, Result};

/// Errors at or below this level count as exact homogenization.
pub const EXACT_FLOOR: f64 = 1e-8;

/// `max_{n,i} |u^ε − ū|`.
pub fn sup_error(ue: &FieldHistory, ubar: &FieldHistory) -> Result<f64> {
    if ue.grid() != ubar.grid()
        || ue.filled() != ubar.filled()
        || ue.time_grid().n_steps() != ubar.time_grid().n_steps()
        || ue.time_grid().dt() != ubar.time_grid().dt()
    {
        return Err(Error::ShapeMismatch(format!(
            "{} cells × {} rows vs {} cells × {} rows",
            ue.n_cells(),
            ue.filled(),
            ubar.n_cells(),
            ubar.filled()
        )));
    }
    Ok(ue
        .rows()
        .flatten()
        .zip(ubar.rows().flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Least-squares slope of `ln error` against `ln eps`.
pub fn fit_rate(eps: &[f64], errors: &[f64]) -> Result<f64> {
    if eps.len() != errors.len() || eps.len() < 3 {
        return Err(Error::Fit(format!(
            "rate fit needs ≥ 3 aligned points, got {} eps and {} errors",
            eps.len(),
            errors.len()
        )));
    }
    if let Some(e) = errors.iter().find(|&&e| !(e > 0.0)) {
        return Err(Error::DegenerateFit(format!("error {e} is not positive")));
    }
    if eps.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Domain("eps entries must be positive".into()));
    }
    let lx: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    Ok(affine_fit(&lx, &ly).1)
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub hamiltonian: HamiltonianSpec,
    pub u0: InitialData,
    pub order: TimeOrder,
    pub t_final: f64,
    pub n_steps: usize,
    pub n_cells: usize,
    pub eps_ladder: Vec<f64>,
    pub lambda_ladder: Vec<f64>,
    pub nu: f64,
    pub scheme: Scheme,
    /// Resolution of the cell problems behind the `H̄` table.
    pub cell_cells: usize,
    /// `(lo, hi, count)` of the uniform `H̄` table.
    pub p_table: (f64, f64, usize),
    pub cell_tol: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            hamiltonian: HamiltonianSpec::eikonal_potential(1.0, 1).expect("valid catalog entry"),
            u0: InitialData::Cosine { amplitude: 0.25, frequency: 1 },
            order: TimeOrder::Caputo(FracOrder::new(0.5).expect("valid order")),
            t_final: 1.0,
            n_steps: 2000,
            n_cells: 4096,
            eps_ladder: vec![1.0 / 4.0, 1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0],
            lambda_ladder: vec![0.1, 0.05, 0.025, 0.0125],
            nu: 0.5,
            scheme: Scheme::Implicit,
            cell_cells: 512,
            p_table: (-4.0, 4.0, 33),
            cell_tol: 1e-10,
        }
    }
}

impl SweepConfig {
    /// Exponent `1/(3(2−ν))`, or `1/3` for the classical order.
    pub fn theorem_exponent(&self) -> f64 {
        match self.order {
            TimeOrder::Caputo(_) => 1.0 / (3.0 * (2.0 - self.nu)),
            TimeOrder::Classical => 1.0 / 3.0,
        }
    }

    /// Smallest fitted order accepted as a pass.
    pub fn rate_floor(&self) -> f64 {
        match self.order {
            TimeOrder::Caputo(_) => self.theorem_exponent() - 0.02,
            TimeOrder::Classical => self.theorem_exponent() - 0.05,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return Err(Error::Config(format!("nu must lie in (0, 1), got {}", self.nu)));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::Config(format!("T must be positive, got {}", self.t_final)));
        }
        if self.eps_ladder.is_empty() {
            return Err(Error::Config("eps ladder is empty".into()));
        }
        self.u0.validate()
    }
}

/// Outcome of a sweep. `fitted_order` is `None` on the exact branch
/// (all errors ≤ [`EXACT_FLOOR`]) or when the sweep aborted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    #[serde(rename = "eps")]
    pub eps_ladder: Vec<f64>,
    #[serde(rename = "error")]
    pub errors: Vec<f64>,
    pub fitted_order: Option<f64>,
    pub nu: f64,
    pub theorem_exponent: f64,
    pub alpha: f64,
    pub rate_floor: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl RateReport {
    /// Applies the pass rule to measured errors.
    pub fn assess(config: &SweepConfig, eps_ladder: Vec<f64>, errors: Vec<f64>) -> Self {
        let mut report = Self {
            eps_ladder,
            errors,
            fitted_order: None,
            nu: config.nu,
            theorem_exponent: config.theorem_exponent(),
            alpha: config.order.alpha(),
            rate_floor: config.rate_floor(),
            pass: false,
            failure: None,
        };
        if report.errors.iter().all(|&e| e <= EXACT_FLOOR) {
            report.pass = true;
            return report;
        }
        match fit_rate(&report.eps_ladder, &report.errors) {
            Ok(order) => {
                report.fitted_order = Some(order);
                report.pass = strictly_decreasing_along(&report.eps_ladder, &report.errors) && order >= report.rate_floor;
            }
            Err(e) => report.failure = Some(e.to_string()),
        }
        report
    }

    /// CSV with header `eps,error`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("eps,error\n");
        for (e, err) in self.eps_ladder.iter().zip(&self.errors) {
            let _ = writeln!(out, "{},{}", sig12(*e), sig12(*err));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Log–log plot of the errors with the fitted line and a reference
    /// line of slope `theorem_exponent` through the coarsest point.
    pub fn to_svg(&self) -> String {
        svg_plot(self)
    }
}

/// Errors decrease strictly as ε decreases.
fn strictly_decreasing_along(eps: &[f64], errors: &[f64]) -> bool {
    let mut idx: Vec<usize> = (0..eps.len()).collect();
    idx.sort_by(|&a, &b| eps[b].total_cmp(&eps[a]));
    idx.windows(2).all(|w| errors[w[1]] < errors[w[0]])
}

/// Full sweep result: the report together with the effective table it used.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub report: RateReport,
    pub table: EffectiveTable,
}

/// Runs the sweep. Solver failures for individual ε do not abort the call:
/// the report then carries the errors computed so far and a failure message.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepOutcome> {
    config.validate()?;
    let grid = TorusGrid::new(config.n_cells)?;
    let tgrid = config.order.time_grid(config.t_final, config.n_steps)?;
    let (lo, hi, count) = config.p_table;
    let table = EffectiveTable::build(
        &config.hamiltonian,
        &EffectiveTable::uniform_p_grid(lo, hi, count),
        &config.lambda_ladder,
        TorusGrid::new(config.cell_cells)?,
        config.cell_tol,
    )?;

    let effective = Dynamics::Effective(&table);
    let theta = config.hamiltonian.lip_p().max(table.lipschitz());
    let params = SchemeParams::new(theta, config.order, &tgrid, grid, config.scheme)?;
    let ubar = solve(&effective, &config.u0, &tgrid, grid, &params)?;

    let results: Vec<Result<f64>> = config
        .eps_ladder
        .par_iter()
        .map(|&eps| {
            let dynamics = Dynamics::Oscillatory { h: &config.hamiltonian, eps };
            let ue = solve(&dynamics, &config.u0, &tgrid, grid, &params)?;
            sup_error(&ue, &ubar)
        })
        .collect();

    let mut eps_done = Vec::new();
    let mut errors = Vec::new();
    let mut failure = None;
    for (eps, r) in config.eps_ladder.iter().zip(results) {
        match r {
            Ok(e) => {
                eps_done.push(*eps);
                errors.push(e);
            }
            Err(e) => {
                failure = Some(format!("eps = {}: {e}", sig12(*eps)));
                break;
            }
        }
    }
    let report = match failure {
        None => RateReport::assess(config, eps_done, errors),
        Some(msg) => RateReport {
            eps_ladder: eps_done,
            errors,
            fitted_order: None,
            nu: config.nu,
            theorem_exponent: config.theorem_exponent(),
            alpha: config.order.alpha(),
            rate_floor: config.rate_floor(),
            pass: false,
            failure: Some(msg),
        },
    };
    Ok(SweepOutcome { report, table })
}

fn svg_plot(report: &RateReport) -> String {
    const W: f64 = 640.0;
    const H: f64 = 480.0;
    const PAD: f64 = 60.0;
    let pts: Vec<(f64, f64)> = report
        .eps_ladder
        .iter()
        .zip(&report.errors)
        .filter(|(e, r)| **e > 0.0 && **r > 0.0)
        .map(|(e, r)| (e.log10(), r.log10()))
        .collect();

    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<line x1="{PAD}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        H - PAD,
        W - PAD,
        H - PAD
    );
    let _ = writeln!(out, r#"<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{}" stroke="black"/>"#, H - PAD);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="14" text-anchor="middle">log10 eps</text>"#,
        W / 2.0,
        H - 15.0
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{}" font-size="14" text-anchor="middle" transform="rotate(-90 18 {})">log10 error</text>"#,
        H / 2.0,
        H / 2.0
    );
    if pts.is_empty() {
        out.push_str("</svg>\n");
        return out;
    }

    let (mut x0, mut x1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (mut y0, mut y1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    if x1 - x0 < 1e-12 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let (mx, my) = (0.05 * (x1 - x0), 0.1 * (y1 - y0));
    let (x0, x1, y0, y1) = (x0 - mx, x1 + mx, y0 - my, y1 + my);
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let fmt = |v: f64| format!("{v:.2}");

    for (x, label) in [(x0, x0), (x1, x1)] {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">{}</text>"#,
            fmt(sx(x)),
            fmt(H - PAD + 16.0),
            fmt(label)
        );
    }
    for (y, label) in [(y0, y0), (y1, y1)] {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{}</text>"#,
            fmt(PAD - 4.0),
            fmt(sy(y)),
            fmt(label)
        );
    }

    let line = |slope: f64, through: (f64, f64), color: &str, dash: &str, out: &mut String| {
        let (ax, ay) = (x0, through.1 + slope * (x0 - through.0));
        let (bx, by) = (x1, through.1 + slope * (x1 - through.0));
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{color}" stroke-dasharray="{dash}"/>"#,
            fmt(sx(ax)),
            fmt(sy(ay)),
            fmt(sx(bx)),
            fmt(sy(by))
        );
    };
    let coarsest = *pts.iter().max_by(|a, b| a.0.total_cmp(&b.0)).expect("nonempty");
    line(report.theorem_exponent, coarsest, "gray", "6 4", &mut out);
    if let Some(order) = report.fitted_order {
        let n = pts.len() as f64;
        let cx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let cy = pts.iter().map(|p| p.1).sum::<f64>() / n;
        line(order, (cx, cy), "steelblue", "none", &mut out);
    }

    let poly: Vec<String> = pts.iter().map(|p| format!("{},{}", fmt(sx(p.0)), fmt(sy(p.1)))).collect();
    let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="black"/>"#, poly.join(" "));
    for p in &pts {
        let _ = writeln!(out, r#"<circle cx="{}" cy="{}" r="3" fill="black"/>"#, fmt(sx(p.0)), fmt(sy(p.1)));
    }
    let legend = match report.fitted_order {
        Some(o) => format!("fitted order {o:.4}, reference slope {:.4}", report.theorem_exponent),
        None => format!("reference slope {:.4}", report.theorem_exponent),
    };
    let _ = writeln!(out, r#"<text x="{}" y="30" font-size="13" text-anchor="middle">{legend}</text>"#, W / 2.0);
    out.push_str("</svg>\n");
    out
}
