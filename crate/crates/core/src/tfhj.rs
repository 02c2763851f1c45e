//! Monotone time stepping for `∂ₜᵅ u + H(x/ε, Du) = 0` and for the effective
//! equation `∂ₜᵅ ū + H̄(Dū) = 0` on the unit torus.
//!
//! The Caputo derivative is discretized by the L1 scheme with the full
//! history kept in memory. With `c = Γ(2−α) dt^α` the update at step `n` is
//!
//! ```text
//! u[n] − u[n−1] + Σ_{k=1}^{n−1} b_k (u[n−k] − u[n−k−1]) + c H_LF(x/ε, D⁻u, D⁺u) = 0
//! ```
//!
//! where the flux is evaluated at row `n−1` ([`Scheme::Explicit`]) or at
//! row `n` ([`Scheme::Implicit`]). The explicit update is monotone only under
//! `c θ / dx ≤ 2 − 2^{1−α}`; the implicit one is monotone for every step size
//! and each step is a periodic monotone system solved by Newton.
//! [`TimeOrder::Classical`] replaces the L1 sum by a first-order difference.

use serde::{Deserialize, Serialize};

use crate::cell::{EffectiveTable, TorusGrid};
use crate::fmt::sig12;
use crate::fraccalc::{FracOrder, TimeGrid};
use crate::hamiltonian::{HamiltonianSpec, InitialData};
use crate::monotone::MonotoneSystem;
use crate::{Error, Result};

/// Order of the time derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeOrder {
    Caputo(FracOrder),
    /// Ordinary first-order derivative (the `α = 1` baseline).
    Classical,
}

impl TimeOrder {
    pub fn alpha(&self) -> f64 {
        match self {
            Self::Caputo(f) => f.alpha(),
            Self::Classical => 1.0,
        }
    }

    /// Time grid carrying the matching L1 weights.
    pub fn time_grid(&self, t_final: f64, n_steps: usize) -> Result<TimeGrid> {
        match self {
            Self::Caputo(f) => TimeGrid::new(t_final, n_steps, f),
            Self::Classical => TimeGrid::classical(t_final, n_steps),
        }
    }

    /// Coefficient `c` in front of the Hamiltonian: `Γ(2−α) dt^α` or `dt`.
    fn flux_coefficient(&self, dt: f64) -> f64 {
        match self {
            Self::Caputo(f) => f.gamma_2ma() * dt.powf(f.alpha()),
            Self::Classical => dt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Explicit,
    #[default]
    Implicit,
}

/// The Hamiltonian driving a solve.
#[derive(Debug, Clone, Copy)]
pub enum Dynamics<'a> {
    /// `H(x/ε, p)`; `1/ε` must be an integer.
    Oscillatory { h: &'a HamiltonianSpec, eps: f64 },
    /// Interpolated `H̄(p)`.
    Effective(&'a EffectiveTable),
}

impl Dynamics<'_> {
    /// Smallest admissible Lax–Friedrichs coefficient.
    pub fn min_theta(&self) -> f64 {
        match self {
            Self::Oscillatory { h, .. } => h.lip_p(),
            Self::Effective(t) => t.lipschitz(),
        }
    }

    fn eps(&self) -> Option<f64> {
        match self {
            Self::Oscillatory { eps, .. } => Some(*eps),
            Self::Effective(_) => None,
        }
    }

    /// `(H, ∂H/∂p)` at position `x` and slope `p`.
    fn eval(&self, x: f64, p: f64) -> Result<(f64, f64)> {
        match self {
            Self::Oscillatory { h, eps } => {
                let y = x / eps;
                Ok((h.eval(y, p), h.dp(y, p)))
            }
            Self::Effective(t) => Ok((t.eval(p)?, t.derivative(p)?)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeParams {
    pub theta_lf: f64,
    pub dt: f64,
    pub dx: f64,
    pub order: TimeOrder,
    pub scheme: Scheme,
}

impl SchemeParams {
    /// Parameters with the minimal viscosity admitted by `dynamics`.
    pub fn for_dynamics(
        dynamics: &Dynamics<'_>,
        order: TimeOrder,
        tgrid: &TimeGrid,
        grid: TorusGrid,
        scheme: Scheme,
    ) -> Result<Self> {
        Self::new(dynamics.min_theta(), order, tgrid, grid, scheme)
    }

    pub fn new(theta_lf: f64, order: TimeOrder, tgrid: &TimeGrid, grid: TorusGrid, scheme: Scheme) -> Result<Self> {
        if !(theta_lf >= 0.0 && theta_lf.is_finite()) {
            return Err(Error::Config(format!("viscosity coefficient must be ≥ 0, got {theta_lf}")));
        }
        let params = Self { theta_lf, dt: tgrid.dt(), dx: grid.dy(), order, scheme };
        params.check_cfl()?;
        Ok(params)
    }

    /// `c θ / dx` with `c = Γ(2−α) dt^α` (or `dt` for the classical order).
    pub fn cfl_ratio(&self) -> f64 {
        self.order.flux_coefficient(self.dt) * self.theta_lf / self.dx
    }

    /// Largest ratio keeping the update monotone.
    pub fn cfl_limit(&self) -> f64 {
        match (self.scheme, self.order) {
            (Scheme::Implicit, _) => f64::INFINITY,
            (Scheme::Explicit, TimeOrder::Classical) => 1.0,
            // The coefficient of u[n−1] is 1 − b_1 − ratio.
            (Scheme::Explicit, TimeOrder::Caputo(f)) => 2.0 - 2f64.powf(1.0 - f.alpha()),
        }
    }

    pub fn check_cfl(&self) -> Result<()> {
        let (ratio, limit) = (self.cfl_ratio(), self.cfl_limit());
        if ratio > limit {
            return Err(Error::Cfl { ratio, limit });
        }
        Ok(())
    }
}

/// Space–time solution `u[n][i]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldHistory {
    grid: TorusGrid,
    tgrid: TimeGrid,
    /// `None` tags the effective (homogenized) problem.
    eps: Option<f64>,
    data: Vec<f64>,
    filled: usize,
}

impl FieldHistory {
    /// History with row 0 set to the sampled initial data.
    pub fn new(grid: TorusGrid, tgrid: TimeGrid, eps: Option<f64>, u0: &InitialData) -> Self {
        let n = grid.n_cells();
        let mut data = vec![0.0; (tgrid.n_steps() + 1) * n];
        for (i, x) in grid.nodes().enumerate() {
            data[i] = u0.eval(x);
        }
        Self { grid, tgrid, eps, data, filled: 1 }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn time_grid(&self) -> &TimeGrid {
        &self.tgrid
    }

    pub fn eps(&self) -> Option<f64> {
        self.eps
    }

    pub fn n_cells(&self) -> usize {
        self.grid.n_cells()
    }

    /// Number of rows filled so far (row 0 included).
    pub fn filled(&self) -> usize {
        self.filled
    }

    pub fn row(&self, n: usize) -> &[f64] {
        let w = self.n_cells();
        &self.data[n * w..(n + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_cells()).take(self.filled)
    }

    /// Adds `c` to every entry.
    pub fn shifted(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v += c);
        out
    }

    pub fn sup_norm(&self) -> f64 {
        self.rows().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// CSV `t,x,u` for the given time indices (all rows when `None`).
    pub fn to_csv(&self, rows: Option<&[usize]>) -> Result<String> {
        let all: Vec<usize> = (0..self.filled).collect();
        let rows = rows.unwrap_or(&all);
        let mut out = String::from("t,x,u\n");
        for &n in rows {
            if n >= self.filled {
                return Err(Error::Index(format!("snapshot row {n} not computed (filled {})", self.filled)));
            }
            let t = sig12(self.tgrid.time(n));
            for (x, u) in self.grid.nodes().zip(self.row(n)) {
                out.push_str(&format!("{t},{},{}\n", sig12(x), sig12(*u)));
            }
        }
        Ok(out)
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid
            || self.tgrid.n_steps() != other.tgrid.n_steps()
            || self.tgrid.dt() != other.tgrid.dt()
            || self.filled != other.filled
        {
            return Err(Error::ShapeMismatch(format!(
                "{} cells × {} rows vs {} cells × {} rows",
                self.n_cells(),
                self.filled,
                other.n_cells(),
                other.filled
            )));
        }
        Ok(())
    }
}

/// Fills row `n` from rows `0..n`.
pub fn step(state: &mut FieldHistory, params: &SchemeParams, dynamics: &Dynamics<'_>, n: usize) -> Result<()> {
    if n == 0 || n > state.tgrid.n_steps() {
        return Err(Error::Index(format!("step index {n} outside 1..={}", state.tgrid.n_steps())));
    }
    if state.filled < n {
        return Err(Error::Precondition(format!("rows 0..{n} must be filled before step {n}")));
    }
    params.check_cfl()?;
    if params.theta_lf < dynamics.min_theta() {
        return Err(Error::Config(format!(
            "Lax–Friedrichs coefficient {} is below the p-Lipschitz constant {}",
            params.theta_lf,
            dynamics.min_theta()
        )));
    }

    let w = state.n_cells();
    let dx = state.grid.dy();
    let c = params.order.flux_coefficient(params.dt);

    // rhs = u[n−1] − Σ_{k=1}^{n−1} b_k (u[n−k] − u[n−k−1])
    let mut rhs = state.row(n - 1).to_vec();
    if let TimeOrder::Caputo(_) = params.order {
        let weights = state.tgrid.l1_weights();
        for k in 1..n {
            let b = weights[k];
            let (older, newer) = state.data[(n - k - 1) * w..(n - k + 1) * w].split_at(w);
            for ((r, a), o) in rhs.iter_mut().zip(newer).zip(older) {
                *r -= b * (a - o);
            }
        }
    }

    let new_row: Vec<f64> = match params.scheme {
        Scheme::Explicit => {
            let prev = state.row(n - 1);
            let mut out = Vec::with_capacity(w);
            for i in 0..w {
                let pm = (prev[i] - prev[(i + w - 1) % w]) / dx;
                let pp = (prev[(i + 1) % w] - prev[i]) / dx;
                let (h, _) = dynamics.eval(state.grid.node(i), 0.5 * (pm + pp))?;
                let flux = h - 0.5 * params.theta_lf * (pp - pm);
                out.push(rhs[i] - c * flux);
            }
            out
        }
        Scheme::Implicit => {
            let kappa = 1.0 / c;
            let source: Vec<f64> = rhs.iter().map(|r| r * kappa).collect();
            let system = MonotoneSystem { kappa, theta: params.theta_lf, dy: dx, source: Some(&source) };
            let grid = state.grid;
            let ham = |i: usize, q: f64| dynamics.eval(grid.node(i), q);
            let mut v = state.row(n - 1).to_vec();
            let scale = source.iter().fold(1.0f64, |m, g| m.max(g.abs()));
            system.solve_newton(&ham, &mut v, 1e-13 * scale, 200)?;
            v
        }
    };
    state.data[n * w..(n + 1) * w].copy_from_slice(&new_row);
    state.filled = state.filled.max(n + 1);
    Ok(())
}

/// Runs all time steps from the sampled initial data.
pub fn solve(
    dynamics: &Dynamics<'_>,
    u0: &InitialData,
    tgrid: &TimeGrid,
    grid: TorusGrid,
    params: &SchemeParams,
) -> Result<FieldHistory> {
    u0.validate()?;
    let initial: Vec<f64> = grid.nodes().map(|x| u0.eval(x)).collect();
    solve_from(dynamics, &initial, tgrid, grid, params)
}

/// Runs all time steps from nodal initial values.
pub fn solve_from(
    dynamics: &Dynamics<'_>,
    initial: &[f64],
    tgrid: &TimeGrid,
    grid: TorusGrid,
    params: &SchemeParams,
) -> Result<FieldHistory> {
    if initial.len() != grid.n_cells() {
        return Err(Error::ShapeMismatch(format!(
            "{} initial values for {} cells",
            initial.len(),
            grid.n_cells()
        )));
    }
    if let Some(eps) = dynamics.eps() {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::Domain(format!("eps must lie in (0, 1], got {eps}")));
        }
        let inv = 1.0 / eps;
        if (inv - inv.round()).abs() > 1e-9 * inv {
            return Err(Error::Domain(format!("1/eps must be an integer on the unit torus, got eps = {eps}")));
        }
        let limit = eps / 16.0;
        if grid.dy() > limit * (1.0 + 1e-12) {
            return Err(Error::Resolution { dx: grid.dy(), limit });
        }
    }
    if let TimeOrder::Caputo(_) = params.order {
        if tgrid.l1_weights().len() != tgrid.n_steps() {
            return Err(Error::Config("fractional solve needs a time grid with L1 weights".into()));
        }
    }
    let mut state = FieldHistory::new(grid, tgrid.clone(), dynamics.eps(), &InitialData::Zero);
    state.data[..grid.n_cells()].copy_from_slice(initial);
    for n in 1..=tgrid.n_steps() {
        step(&mut state, params, dynamics, n)?;
    }
    Ok(state)
}

/// `max_{n,i} (u_a[n][i] − u_b[n][i])`, requiring `u_a[0] ≤ u_b[0]`.
pub fn comparison_check(ua: &FieldHistory, ub: &FieldHistory) -> Result<f64> {
    ua.same_shape(ub)?;
    if ua.row(0).iter().zip(ub.row(0)).any(|(a, b)| a > b) {
        return Err(Error::Precondition("initial rows are not ordered (u_a[0] ≤ u_b[0])".into()));
    }
    Ok(ua
        .rows()
        .flatten()
        .zip(ub.rows().flatten())
        .map(|(a, b)| a - b)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// `max_i max_{n<m} |u[m][i] − u[n][i]| / (t_m − t_n)^α`.
pub fn time_holder_seminorm(state: &FieldHistory, alpha: f64) -> f64 {
    let rows = state.filled;
    let w = state.n_cells();
    let dt = state.tgrid.dt();
    let mut best = 0.0f64;
    for lag in 1..rows {
        let denom = (lag as f64 * dt).powf(alpha);
        let mut worst = 0.0f64;
        for n in 0..rows - lag {
            let a = &state.data[n * w..(n + 1) * w];
            let b = &state.data[(n + lag) * w..(n + lag + 1) * w];
            for (x, y) in a.iter().zip(b) {
                worst = worst.max((x - y).abs());
            }
        }
        best = best.max(worst / denom);
    }
    best
}

/// `max |u[n][i] − u[n][j]| / ((1 + |ln d|) d)` over all node pairs of the given rows,
/// `d` being the torus distance.
pub fn space_log_modulus(state: &FieldHistory, rows: &[usize]) -> Result<f64> {
    let w = state.n_cells();
    let dx = state.grid.dy();
    let weight: Vec<f64> = (0..w)
        .map(|k| {
            let d = (k.min(w - k)) as f64 * dx;
            if k == 0 {
                0.0
            } else {
                1.0 / ((1.0 + d.ln().abs()) * d)
            }
        })
        .collect();
    let mut best = 0.0f64;
    for &n in rows {
        if n >= state.filled {
            return Err(Error::Index(format!("row {n} not computed")));
        }
        let u = state.row(n);
        for i in 0..w {
            for j in i + 1..w {
                best = best.max((u[i] - u[j]).abs() * weight[j - i]);
            }
        }
    }
    Ok(best)
}

/// `max_{n,i} (|u[n][i] − u₀(x_i)| − rate · t_n^α)`: nonpositive when the
/// history stays inside the barrier `u₀ ± rate · t^α`.
pub fn barrier_gap(state: &FieldHistory, u0: &InitialData, rate: f64, alpha: f64) -> f64 {
    let init: Vec<f64> = state.grid.nodes().map(|x| u0.eval(x)).collect();
    state
        .rows()
        .enumerate()
        .map(|(n, row)| {
            let allowance = rate * state.tgrid.time(n).powf(alpha);
            row.iter()
                .zip(&init)
                .map(|(u, u0)| (u - u0).abs() - allowance)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}
