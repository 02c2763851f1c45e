//! Discounted cell problem `λ v + H(y, p + Dv) = 0` on the unit torus and
//! the effective Hamiltonian obtained by extrapolating `−λ v^λ` to `λ = 0`.

use rayon::prelude::*;
use serde::Serialize;

use crate::fmt::sig12;
use crate::hamiltonian::{HamiltonianKind, HamiltonianSpec};
use crate::monotone::{MonotoneSystem, SolveStats};
use crate::{Error, Result};

/// Uniform periodic grid `y_i = i / n_cells` on the unit torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TorusGrid {
    n_cells: usize,
}

impl TorusGrid {
    pub const MIN_CELLS: usize = 16;

    pub fn new(n_cells: usize) -> Result<Self> {
        if n_cells < Self::MIN_CELLS {
            return Err(Error::Domain(format!(
                "torus grid needs at least {} cells, got {n_cells}",
                Self::MIN_CELLS
            )));
        }
        Ok(Self { n_cells })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn dy(&self) -> f64 {
        1.0 / self.n_cells as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        (i % self.n_cells) as f64 / self.n_cells as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_cells).map(|i| self.node(i))
    }
}

/// Iteration used for the discounted problem. Both converge to the same
/// discrete fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CellSolver {
    /// Semismooth Newton; falls back to [`CellSolver::PseudoTime`] if it stalls.
    #[default]
    Newton,
    /// Explicit pseudo-time relaxation with `dτ = 0.4 dy / (θ + λ dy)`.
    PseudoTime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscountedSolution {
    pub p: f64,
    pub lambda: f64,
    pub values: Vec<f64>,
    pub residual_inf: f64,
    pub iterations: usize,
}

impl DiscountedSolution {
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn oscillation(&self) -> f64 {
        let (lo, hi) = min_max(&self.values);
        hi - lo
    }
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Solves `λ v + H_LF(y, p + D⁻v, p + D⁺v) = 0` with `θ = lip_p`.
pub fn solve_discounted(
    h: &HamiltonianSpec,
    p: f64,
    lambda: f64,
    grid: TorusGrid,
    tol: f64,
    max_iter: usize,
) -> Result<DiscountedSolution> {
    solve_discounted_with(h, p, lambda, grid, tol, max_iter, CellSolver::Newton, None)
}

#[allow(clippy::too_many_arguments)]
pub fn solve_discounted_with(
    h: &HamiltonianSpec,
    p: f64,
    lambda: f64,
    grid: TorusGrid,
    tol: f64,
    max_iter: usize,
    method: CellSolver,
    initial: Option<&[f64]>,
) -> Result<DiscountedSolution> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("discount must be positive, got {lambda}")));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let n = grid.n_cells();
    let mut values = match initial {
        Some(v) if v.len() == n => v.to_vec(),
        Some(v) => {
            return Err(Error::ShapeMismatch(format!(
                "initial guess has {} entries, grid has {n}",
                v.len()
            )))
        }
        None => {
            let mean = grid.nodes().map(|y| h.eval(y, p)).sum::<f64>() / n as f64;
            vec![-mean / lambda; n]
        }
    };
    let ham = |i: usize, q: f64| -> Result<(f64, f64)> {
        let y = grid.node(i);
        Ok((h.eval(y, p + q), h.dp(y, p + q)))
    };
    let system = MonotoneSystem { kappa: lambda, theta: h.lip_p(), dy: grid.dy(), source: None };

    let stats: SolveStats = match method {
        CellSolver::Newton => {
            let start = values.clone();
            match system.solve_newton(&ham, &mut values, tol, max_iter.min(4 * n + 50)) {
                Ok(s) => s,
                Err(Error::NonConvergence { .. }) => {
                    values = start;
                    system.solve_pseudo_time(&ham, &mut values, tol, max_iter)?
                }
                Err(e) => return Err(e),
            }
        }
        CellSolver::PseudoTime => system.solve_pseudo_time(&ham, &mut values, tol, max_iter)?,
    };
    Ok(DiscountedSolution {
        p,
        lambda,
        values,
        residual_inf: stats.residual_inf,
        iterations: stats.iterations,
    })
}

/// Result of the `λ → 0` extrapolation at one slope `p`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectiveEstimate {
    pub p: f64,
    pub hbar: f64,
    /// Decay order of `max_y |λ v^λ + H̄|` in `λ`; `None` when the gap
    /// vanishes to roundoff on the whole ladder (y-independent `H`).
    pub fit_slope: Option<f64>,
    pub lambda_ladder: Vec<f64>,
    /// `λ · mean(v^λ)` per ladder entry.
    pub scaled_means: Vec<f64>,
    /// `max_y |λ v^λ(y) + H̄|` per ladder entry.
    pub sup_gaps: Vec<f64>,
}

const MAX_ITER: usize = 5_000_000;

fn check_ladder(ladder: &[f64]) -> Result<()> {
    if ladder.len() < 3 {
        return Err(Error::Fit(format!(
            "λ ladder needs at least 3 entries, got {}",
            ladder.len()
        )));
    }
    if ladder.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::Domain("λ ladder entries must be positive".into()));
    }
    if ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Domain("λ ladder must be strictly decreasing".into()));
    }
    Ok(())
}

/// Ordinary least squares `y ≈ a + b x`; returns `(a, b)`.
pub(crate) fn affine_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

/// Estimates `H̄(p)` as the intercept of the affine fit of `−λ mean(v^λ)`
/// against `λ` over a strictly decreasing ladder.
pub fn effective_hamiltonian(
    h: &HamiltonianSpec,
    p: f64,
    lambda_ladder: &[f64],
    grid: TorusGrid,
    tol: f64,
) -> Result<EffectiveEstimate> {
    check_ladder(lambda_ladder)?;
    let mut solutions: Vec<DiscountedSolution> = Vec::with_capacity(lambda_ladder.len());
    for &lambda in lambda_ladder {
        // Warm start: keep the previous profile, rescale only its mean.
        let guess: Option<Vec<f64>> = solutions.last().map(|prev| {
            let shift = prev.mean() * (prev.lambda / lambda - 1.0);
            prev.values.iter().map(|v| v + shift).collect()
        });
        solutions.push(solve_discounted_with(
            h,
            p,
            lambda,
            grid,
            tol,
            MAX_ITER,
            CellSolver::Newton,
            guess.as_deref(),
        )?);
    }
    let scaled_means: Vec<f64> = solutions.iter().map(|s| s.lambda * s.mean()).collect();
    let neg: Vec<f64> = scaled_means.iter().map(|m| -m).collect();
    let (hbar, _) = affine_fit(lambda_ladder, &neg);

    let sup_gaps: Vec<f64> = solutions
        .iter()
        .map(|s| {
            s.values
                .iter()
                .map(|v| (s.lambda * v + hbar).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let floor = 1e-9 * (1.0 + p.abs());
    let fit_slope = if sup_gaps.iter().all(|&g| g <= floor) {
        None
    } else if sup_gaps.iter().any(|&g| g <= 0.0) {
        return Err(Error::Fit(format!("vanishing gap on part of the ladder at p = {p}")));
    } else {
        let lx: Vec<f64> = lambda_ladder.iter().map(|l| l.ln()).collect();
        let ly: Vec<f64> = sup_gaps.iter().map(|g| g.ln()).collect();
        Some(affine_fit(&lx, &ly).1)
    };

    Ok(EffectiveEstimate {
        p,
        hbar,
        fit_slope,
        lambda_ladder: lambda_ladder.to_vec(),
        scaled_means,
        sup_gaps,
    })
}

/// Tabulated effective Hamiltonian with piecewise-linear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveTable {
    pub p_grid: Vec<f64>,
    pub hbar: Vec<f64>,
    pub lambda_ladder: Vec<f64>,
    /// Per-node decay order; `NaN` marks the exact (zero-gap) case.
    pub fit_slope: Vec<f64>,
}

impl EffectiveTable {
    /// Builds a table directly from values (no fit information).
    pub fn from_values(p_grid: Vec<f64>, hbar: Vec<f64>) -> Result<Self> {
        if p_grid.len() < 2 || p_grid.len() != hbar.len() {
            return Err(Error::ShapeMismatch(format!(
                "table needs ≥ 2 aligned nodes, got {} p values and {} H̄ values",
                p_grid.len(),
                hbar.len()
            )));
        }
        if p_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("p grid must be strictly increasing".into()));
        }
        if hbar.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("H̄ values must be finite".into()));
        }
        let n = p_grid.len();
        Ok(Self { p_grid, hbar, lambda_ladder: Vec::new(), fit_slope: vec![f64::NAN; n] })
    }

    /// Evaluates `effective_hamiltonian` at every node of `p_grid` (in parallel).
    pub fn build(
        h: &HamiltonianSpec,
        p_grid: &[f64],
        lambda_ladder: &[f64],
        grid: TorusGrid,
        tol: f64,
    ) -> Result<Self> {
        check_ladder(lambda_ladder)?;
        let estimates: Vec<EffectiveEstimate> = p_grid
            .par_iter()
            .map(|&p| effective_hamiltonian(h, p, lambda_ladder, grid, tol))
            .collect::<Result<_>>()?;
        let mut table = Self::from_values(p_grid.to_vec(), estimates.iter().map(|e| e.hbar).collect())?;
        table.lambda_ladder = lambda_ladder.to_vec();
        table.fit_slope = estimates.iter().map(|e| e.fit_slope.unwrap_or(f64::NAN)).collect();
        Ok(table)
    }

    /// `count` uniform nodes on `[lo, hi]`.
    pub fn uniform_p_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
        (0..count)
            .map(|j| lo + (hi - lo) * j as f64 / (count - 1) as f64)
            .collect()
    }

    pub fn p_range(&self) -> (f64, f64) {
        (self.p_grid[0], *self.p_grid.last().unwrap())
    }

    fn segment(&self, p: f64) -> Result<usize> {
        let (min, max) = self.p_range();
        if !(p >= min && p <= max) {
            return Err(Error::InterpolationRange { slope: p, min, max });
        }
        let j = self.p_grid.partition_point(|&x| x <= p);
        Ok(j.clamp(1, self.p_grid.len() - 1) - 1)
    }

    /// Piecewise-linear interpolation; slopes outside the grid are an error.
    pub fn eval(&self, p: f64) -> Result<f64> {
        let j = self.segment(p)?;
        let (p0, p1) = (self.p_grid[j], self.p_grid[j + 1]);
        let w = (p - p0) / (p1 - p0);
        Ok(self.hbar[j] * (1.0 - w) + self.hbar[j + 1] * w)
    }

    /// Slope of the interpolant on the segment containing `p`.
    pub fn derivative(&self, p: f64) -> Result<f64> {
        let j = self.segment(p)?;
        Ok((self.hbar[j + 1] - self.hbar[j]) / (self.p_grid[j + 1] - self.p_grid[j]))
    }

    /// Lipschitz constant of the interpolant.
    pub fn lipschitz(&self) -> f64 {
        self.p_grid
            .windows(2)
            .zip(self.hbar.windows(2))
            .map(|(p, v)| ((v[1] - v[0]) / (p[1] - p[0])).abs())
            .fold(0.0, f64::max)
    }

    /// CSV with header `p,hbar,fit_slope`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("p,hbar,fit_slope\n");
        for ((p, hb), s) in self.p_grid.iter().zip(&self.hbar).zip(&self.fit_slope) {
            out.push_str(&format!("{},{},{}\n", sig12(*p), sig12(*hb), sig12(*s)));
        }
        out
    }
}

/// Effective Hamiltonian of `|p| + V(y)` in one dimension by bisection on
/// `E ≥ max V` for `∫₀¹ (E − V) dy ≥ |p|`, using a 10⁴-point trapezoid rule.
pub fn cell_oracle_1d(h: &HamiltonianSpec, p: f64) -> Result<f64> {
    let (a, m) = match h.kind() {
        HamiltonianKind::EikonalPotential { amplitude, frequency } if *amplitude > 0.0 => (*amplitude, *frequency),
        other => {
            return Err(Error::Form(format!(
                "cell oracle needs EikonalPotential with positive amplitude, got {other:?}"
            )))
        }
    };
    const N: usize = 10_000;
    let potential = |y: f64| a * (2.0 * std::f64::consts::PI * m as f64 * y).cos();
    let samples: Vec<f64> = (0..=N).map(|k| potential(k as f64 / N as f64)).collect();
    let v_max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let excess = |e: f64| {
        let inner: f64 = samples[1..N].iter().map(|v| e - v).sum();
        (inner + 0.5 * ((e - samples[0]) + (e - samples[N]))) / N as f64 - p.abs()
    };
    if excess(v_max) >= 0.0 {
        return Ok(v_max);
    }
    let (mut lo, mut hi) = (v_max, v_max + p.abs() + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if excess(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-14 * (1.0 + hi.abs()) {
            break;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma51Report {
    pub p: f64,
    pub q: f64,
    pub lambda: f64,
    /// `λ max_y |v^λ(y,p) − v^λ(y,q)| / |p − q|`
    pub lip_ratio: f64,
    pub lip_bound: f64,
    pub fit_slope: Option<f64>,
    pub rate_ok: bool,
}

/// Checks the uniform `p`-Lipschitz bound of `λ v^λ` for one pair and the
/// linear `λ`-rate of the discounted approximation at `p`.
#[allow(clippy::too_many_arguments)]
pub fn check_lemma51(
    h: &HamiltonianSpec,
    p: f64,
    q: f64,
    lambda: f64,
    lambda_ladder: &[f64],
    grid: TorusGrid,
    tol: f64,
) -> Result<Lemma51Report> {
    if p == q {
        return Err(Error::Precondition("check_lemma51 needs p ≠ q".into()));
    }
    let vp = solve_discounted(h, p, lambda, grid, tol, MAX_ITER)?;
    let vq = solve_discounted(h, q, lambda, grid, tol, MAX_ITER)?;
    let lip_ratio = lambda_lip_ratio(&vp, &vq);
    let est = effective_hamiltonian(h, p, lambda_ladder, grid, tol)?;
    let lip_bound = 4.0 * (1.0 + h.lip_p());
    let slope_ok = est.fit_slope.map_or(true, |s| (0.7..=1.3).contains(&s));
    Ok(Lemma51Report {
        p,
        q,
        lambda,
        lip_ratio,
        lip_bound,
        fit_slope: est.fit_slope,
        rate_ok: lip_ratio <= lip_bound && slope_ok,
    })
}

fn lambda_lip_ratio(a: &DiscountedSolution, b: &DiscountedSolution) -> f64 {
    let diff = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    a.lambda * diff / (a.p - b.p).abs()
}

/// `λ Lip_p(v^λ)` measured over adjacent pairs of an increasing slope set.
pub fn lambda_lip_p(
    h: &HamiltonianSpec,
    slopes: &[f64],
    lambda: f64,
    grid: TorusGrid,
    tol: f64,
) -> Result<f64> {
    if slopes.len() < 2 || slopes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("need at least two strictly increasing slopes".into()));
    }
    let sols: Vec<DiscountedSolution> = slopes
        .par_iter()
        .map(|&p| solve_discounted(h, p, lambda, grid, tol, MAX_ITER))
        .collect::<Result<_>>()?;
    Ok(sols
        .windows(2)
        .map(|w| lambda_lip_ratio(&w[0], &w[1]))
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    const LADDER: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];

    #[test]
    fn torus_grid() {
        assert!(TorusGrid::new(15).is_err());
        let g = TorusGrid::new(16).unwrap();
        assert_eq!(g.node(17), g.node(1));
        assert_eq!(g.dy(), 1.0 / 16.0);
    }

    #[test]
    fn eikonal_constant_solution() {
        let h = HamiltonianSpec::eikonal();
        let grid = TorusGrid::new(64).unwrap();
        for p in [-1.5, 0.0, 0.7] {
            let s = solve_discounted(&h, p, 0.1, grid, 1e-10, 1000).unwrap();
            assert!(s.residual_inf <= 1e-10);
            for v in &s.values {
                assert!((0.1 * v + p.abs()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn potential_discounted_examples() {
        let h = HamiltonianSpec::eikonal_potential(1.0, 1).unwrap();
        let grid = TorusGrid::new(256).unwrap();
        let s = solve_discounted(&h, 0.0, 0.05, grid, 1e-9, 100_000).unwrap();
        let m = 0.05 * s.mean();
        assert!((-1.05..=-0.95).contains(&m), "λ mean v = {m}");
        assert!(s.oscillation() <= 40.0);
        assert!(0.05 * s.oscillation() <= 4.0 * h.lip_y());
    }

    #[test]
    fn pseudo_time_matches_newton() {
        let h = HamiltonianSpec::eikonal_potential(1.0, 1).unwrap();
        let grid = TorusGrid::new(32).unwrap();
        let a = solve_discounted_with(&h, 0.4, 0.5, grid, 1e-11, 100, CellSolver::Newton, None).unwrap();
        let b = solve_discounted_with(&h, 0.4, 0.5, grid, 1e-11, 10_000_000, CellSolver::PseudoTime, None)
            .unwrap();
        assert!(b.iterations > a.iterations);
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn non_convergence_is_reported() {
        let h = HamiltonianSpec::eikonal_potential(1.0, 1).unwrap();
        let grid = TorusGrid::new(32).unwrap();
        let err = solve_discounted_with(&h, 0.4, 0.5, grid, 1e-11, 3, CellSolver::PseudoTime, None).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { iterations: 3, .. }));
        assert!(solve_discounted(&h, 0.0, 0.0, grid, 1e-9, 10).is_err());
    }

    #[test]
    fn eikonal_effective_is_exact() {
        let h = HamiltonianSpec::eikonal();
        let grid = TorusGrid::new(32).unwrap();
        let e = effective_hamiltonian(&h, 1.5, &LADDER, grid, 1e-10).unwrap();
        assert!((e.hbar - 1.5).abs() < 1e-6);
        assert_eq!(e.fit_slope, None);
        assert!(matches!(
            effective_hamiltonian(&h, 1.5, &LADDER[..2], grid, 1e-10),
            Err(Error::Fit(_))
        ));
    }

    #[test]
    fn oracle_examples() {
        let h = HamiltonianSpec::eikonal_potential(1.0, 1).unwrap();
        assert!((cell_oracle_1d(&h, 0.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((cell_oracle_1d(&h, 3.0).unwrap() - 3.0).abs() < 1e-10);
        assert!((cell_oracle_1d(&h, -0.5).unwrap() - 1.0).abs() < 1e-12);
        let tiny = HamiltonianSpec::eikonal_potential(1e-9, 1).unwrap();
        assert!((cell_oracle_1d(&tiny, 0.7).unwrap() - 0.7).abs() < 1e-6);
        assert!(matches!(cell_oracle_1d(&HamiltonianSpec::eikonal(), 0.0), Err(Error::Form(_))));
    }

    #[test]
    fn potential_effective_matches_oracle() {
        let h = HamiltonianSpec::eikonal_potential(1.0, 1).unwrap();
        let grid = TorusGrid::new(256).unwrap();
        for p in [0.0, 2.0] {
            let e = effective_hamiltonian(&h, p, &LADDER, grid, 1e-9).unwrap();
            let oracle = cell_oracle_1d(&h, p).unwrap();
            assert!((e.hbar - oracle).abs() <= 0.02, "p = {p}: {} vs {oracle}", e.hbar);
        }
    }

    #[test]
    fn eikonal_rate_ratio_is_one() {
        let h = HamiltonianSpec::eikonal();
        let grid = TorusGrid::new(32).unwrap();
        let r = check_lemma51(&h, 1.0, 2.0, 0.05, &LADDER, grid, 1e-10).unwrap();
        assert!((r.lip_ratio - 1.0).abs() < 1e-9);
        assert!(r.rate_ok);
        assert!(matches!(
            check_lemma51(&h, 1.0, 1.0, 0.05, &LADDER, grid, 1e-10),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn table_interpolation() {
        let t = EffectiveTable::from_values(vec![-1.0, 0.0, 2.0], vec![1.0, 0.0, 4.0]).unwrap();
        assert_eq!(t.eval(-0.5).unwrap(), 0.5);
        assert_eq!(t.eval(1.0).unwrap(), 2.0);
        assert_eq!(t.eval(2.0).unwrap(), 4.0);
        assert_eq!(t.derivative(0.5).unwrap(), 2.0);
        assert_eq!(t.lipschitz(), 2.0);
        assert!(matches!(t.eval(2.5), Err(Error::InterpolationRange { .. })));
        assert!(t.eval(f64::NAN).is_err());
        assert_eq!(t.to_csv().lines().next(), Some("p,hbar,fit_slope"));
    }

    #[test]
    fn affine_fit_recovers_line() {
        let x = [0.1, 0.05, 0.025];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 3.0 * v).collect();
        let (a, b) = affine_fit(&x, &y);
        assert!((a - 2.0).abs() < 1e-14 && (b + 3.0).abs() < 1e-13);
    }
}
