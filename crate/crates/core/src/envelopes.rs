//! Parabolic sup/inf convolutions in time,
//!
//! ```text
//! f^δ(t) = max_ξ { f(ξ) − |t − ξ|² / (2δ) },   f_δ(t) = min_ξ { f(ξ) + |t − ξ|² / (2δ) },
//! ```
//!
//! taken over the grid nodes of a [`HistoryScalar`], and the measured
//! versions of their regularity estimates.

use rayon::prelude::*;
use serde::Serialize;

use crate::fraccalc::{FracOrder, HistoryScalar};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvolutionKind {
    Sup,
    Inf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvolvedFunction {
    base: HistoryScalar,
    delta: f64,
    kind: ConvolutionKind,
    values: Vec<f64>,
    argpoints: Vec<usize>,
}

impl ConvolvedFunction {
    pub fn base(&self) -> &HistoryScalar {
        &self.base
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn kind(&self) -> ConvolutionKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Index of the optimizing node for each grid node.
    pub fn argpoints(&self) -> &[usize] {
        &self.argpoints
    }

    /// The envelope as a history on the same grid.
    pub fn to_history(&self) -> HistoryScalar {
        HistoryScalar::new(self.base.dt(), self.values.clone()).expect("same grid as a valid base")
    }
}

fn convolve(f: &HistoryScalar, delta: f64, kind: ConvolutionKind) -> Result<ConvolvedFunction> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Domain(format!("delta must be positive, got {delta}")));
    }
    let samples = f.samples();
    let sign = match kind {
        ConvolutionKind::Sup => 1.0,
        ConvolutionKind::Inf => -1.0,
    };
    let dt = f.dt();
    let (values, argpoints): (Vec<f64>, Vec<usize>) = (0..samples.len())
        .into_par_iter()
        .map(|n| {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for (m, fm) in samples.iter().enumerate() {
                let gap = (n as f64 - m as f64) * dt;
                let cand = sign * fm - gap * gap / (2.0 * delta);
                // Strict comparison keeps the smallest index on ties.
                if cand > best {
                    best = cand;
                    arg = m;
                }
            }
            (sign * best, arg)
        })
        .unzip();
    Ok(ConvolvedFunction { base: f.clone(), delta, kind, values, argpoints })
}

pub fn sup_convolve(f: &HistoryScalar, delta: f64) -> Result<ConvolvedFunction> {
    convolve(f, delta, ConvolutionKind::Sup)
}

pub fn inf_convolve(f: &HistoryScalar, delta: f64) -> Result<ConvolvedFunction> {
    convolve(f, delta, ConvolutionKind::Inf)
}

/// `max_{m<n} |f(t_n) − f(t_m)| / (t_n − t_m)^α` over all node pairs.
pub fn holder_constant(f: &HistoryScalar, alpha: f64) -> f64 {
    let s = f.samples();
    let dt = f.dt();
    (1..s.len())
        .into_par_iter()
        .map(|lag| {
            let denom = (lag as f64 * dt).powf(alpha);
            s.windows(lag + 1).map(|w| (w[lag] - w[0]).abs()).fold(0.0, f64::max) / denom
        })
        .reduce(|| 0.0, f64::max)
}

/// Largest difference quotient between neighbouring nodes.
pub fn lipschitz_constant(f: &HistoryScalar) -> f64 {
    f.samples().windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max) / f.dt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaItem {
    pub holds: bool,
    pub measured: f64,
    pub bound: f64,
}

impl LemmaItem {
    fn new(measured: f64, bound: f64) -> Self {
        Self { holds: measured <= bound, measured, bound }
    }
}

/// Measured regularity of `f^δ` against the stated bounds. In (a) the
/// measured value is the worst violation of `f ≤ f^δ ≤ max f` (zero when it holds).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma36Report {
    pub delta: f64,
    pub holder_m: f64,
    pub alpha: f64,
    pub grid_slack: f64,
    /// `2 (max f − min f) + T`.
    pub constant_c: f64,
    pub a: LemmaItem,
    pub b: LemmaItem,
    #[serde(rename = "c")]
    pub c_item: LemmaItem,
    pub d: LemmaItem,
    pub e: LemmaItem,
}

impl Lemma36Report {
    pub fn all_hold(&self) -> bool {
        [self.a, self.b, self.c_item, self.d, self.e].iter().all(|i| i.holds)
    }
}

/// Checks the sup-convolution estimates for an `α`-Hölder `f` with constant `m`.
pub fn check_lemma36(f: &HistoryScalar, delta: f64, holder: (f64, f64)) -> Result<Lemma36Report> {
    let (m, alpha) = holder;
    if !(alpha > 0.0 && alpha < 1.0) || !(m >= 0.0 && m.is_finite()) {
        return Err(Error::Domain(format!("Hölder pair (M = {m}, α = {alpha}) outside [0, ∞) × (0, 1)")));
    }
    let measured = holder_constant(f, alpha);
    if measured > m * (1.0 + 1e-12) + 1e-14 {
        return Err(Error::Certification(format!(
            "f is not {alpha}-Hölder with constant {m} on the grid (measured {measured})"
        )));
    }

    let conv = sup_convolve(f, delta)?;
    let base = f.samples();
    let vals = conv.values();
    let dt = f.dt();
    let slack = 2.0 * dt.powf(alpha) * m;
    let (fmin, fmax) = base.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    let c = 2.0 * (fmax - fmin) + f.t_final();

    let ordering = base
        .iter()
        .zip(vals)
        .map(|(b, v)| (b - v).max(v - fmax).max(0.0))
        .fold(0.0, f64::max);
    let a = LemmaItem::new(ordering, 0.0);

    let b = LemmaItem::new(lipschitz_constant(&conv.to_history()), c / delta);

    let reach = conv
        .argpoints()
        .iter()
        .enumerate()
        .map(|(n, &xi)| ((n as f64 - xi as f64).abs() * dt).powf(2.0 - alpha))
        .fold(0.0, f64::max);
    let c_item = LemmaItem::new(reach, 2.0 * m * delta + slack);

    let gap = base.iter().zip(vals).map(|(b, v)| (v - b).abs()).fold(0.0, f64::max);
    let d_bound = (2.0 * m).powf(2.0 / (2.0 - alpha)) * delta.powf(alpha / (2.0 - alpha));
    let d = LemmaItem::new(gap, d_bound + slack);

    let e = LemmaItem::new(holder_constant(&conv.to_history(), alpha), 16.0 * c * m);

    Ok(Lemma36Report { delta, holder_m: m, alpha, grid_slack: slack, constant_c: c, a, b, c_item, d, e })
}

/// `2^{α+2} α M^{2−α} / Γ(1−α) · δ^{(1−α)/4}`.
pub fn eta_delta(frac: &FracOrder, holder_m: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("delta must lie in (0, 1), got {delta}")));
    }
    if !(holder_m >= 0.0 && holder_m.is_finite()) {
        return Err(Error::Domain(format!("Hölder constant must be ≥ 0, got {holder_m}")));
    }
    let a = frac.alpha();
    Ok(2f64.powf(a + 2.0) * a * holder_m.powf(2.0 - a) / frac.gamma_1ma() * delta.powf((1.0 - a) / 4.0))
}
