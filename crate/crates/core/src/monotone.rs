//! Solver for the periodic monotone system
//!
//! ```text
//! κ v_i + H_i(q_i) − θ/(2 dy) (v_{i+1} − 2 v_i + v_{i−1}) = g_i,   q_i = (v_{i+1} − v_{i−1}) / (2 dy)
//! ```
//!
//! which is `κ v + H_LF(y, D⁻v, D⁺v) = g` written out for the Lax–Friedrichs
//! flux. The discounted cell problem (`κ = λ`, `g = 0`) and every implicit
//! L1 time step (`κ = 1/(Γ(2−α) dt^α)`) have this form. With `θ ≥ sup |H_p|`
//! the Jacobian is a strictly diagonally dominant M-matrix, so semismooth
//! Newton is well defined; the explicit pseudo-time relaxation is kept as the
//! reference iteration and as a fallback.

use crate::{Error, Result};

/// Node-wise Hamiltonian: returns `(H_i(q), ∂H_i/∂q)` at node `i`.
pub(crate) trait NodeHamiltonian {
    fn eval(&self, i: usize, q: f64) -> Result<(f64, f64)>;
}

impl<F> NodeHamiltonian for F
where
    F: Fn(usize, f64) -> Result<(f64, f64)>,
{
    fn eval(&self, i: usize, q: f64) -> Result<(f64, f64)> {
        self(i, q)
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct MonotoneSystem<'a> {
    pub kappa: f64,
    pub theta: f64,
    pub dy: f64,
    pub source: Option<&'a [f64]>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SolveStats {
    pub residual_inf: f64,
    pub iterations: usize,
}

impl MonotoneSystem<'_> {
    /// Residual vector; returns its sup norm.
    pub fn residual(&self, ham: &impl NodeHamiltonian, v: &[f64], out: &mut [f64]) -> Result<f64> {
        let n = v.len();
        let inv2 = 0.5 / self.dy;
        let visc = 0.5 * self.theta / self.dy;
        let mut sup = 0.0f64;
        for i in 0..n {
            let vm = v[(i + n - 1) % n];
            let vp = v[(i + 1) % n];
            let (h, _) = ham.eval(i, (vp - vm) * inv2)?;
            let g = self.source.map_or(0.0, |s| s[i]);
            let r = self.kappa * v[i] + h - visc * (vp - 2.0 * v[i] + vm) - g;
            out[i] = r;
            sup = sup.max(r.abs());
        }
        Ok(sup)
    }

    /// Semismooth Newton (policy iteration for convex `H`).
    pub fn solve_newton(
        &self,
        ham: &impl NodeHamiltonian,
        v: &mut [f64],
        tol: f64,
        max_iter: usize,
    ) -> Result<SolveStats> {
        let n = v.len();
        let inv2 = 0.5 / self.dy;
        let visc = 0.5 * self.theta / self.dy;
        let mut res = vec![0.0; n];
        let (mut sub, mut diag, mut sup) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut delta = vec![0.0; n];

        let mut r_inf = self.residual(ham, v, &mut res)?;
        for it in 0..max_iter {
            if r_inf <= tol {
                return Ok(SolveStats { residual_inf: r_inf, iterations: it });
            }
            for i in 0..n {
                let vm = v[(i + n - 1) % n];
                let vp = v[(i + 1) % n];
                let (_, hp) = ham.eval(i, (vp - vm) * inv2)?;
                diag[i] = self.kappa + 2.0 * visc;
                sup[i] = hp * inv2 - visc;
                sub[i] = -hp * inv2 - visc;
                delta[i] = -res[i];
            }
            cyclic_tridiagonal(&sub, &diag, &sup, &mut delta);

            // Full steps: for convex H this is policy iteration, which converges
            // monotonically even when the sup-norm residual does not decrease.
            let mut step_inf = 0.0f64;
            let mut v_inf = 0.0f64;
            for i in 0..n {
                v[i] += delta[i];
                step_inf = step_inf.max(delta[i].abs());
                v_inf = v_inf.max(v[i].abs());
            }
            r_inf = self.residual(ham, v, &mut res)?;
            if !r_inf.is_finite() {
                return Err(Error::NonConvergence { iterations: it + 1, residual: r_inf });
            }
            if step_inf <= 4.0 * f64::EPSILON * (1.0 + v_inf) && r_inf <= 1e3 * tol {
                // Converged to roundoff just above the requested tolerance.
                return Ok(SolveStats { residual_inf: r_inf, iterations: it + 1 });
            }
        }
        if r_inf <= tol {
            Ok(SolveStats { residual_inf: r_inf, iterations: max_iter })
        } else {
            Err(Error::NonConvergence { iterations: max_iter, residual: r_inf })
        }
    }

    /// Explicit relaxation `v ← v − dτ · residual(v)` with
    /// `dτ = 0.4 dy / (θ + κ dy)`, a monotone contraction.
    pub fn solve_pseudo_time(
        &self,
        ham: &impl NodeHamiltonian,
        v: &mut [f64],
        tol: f64,
        max_iter: usize,
    ) -> Result<SolveStats> {
        let dtau = 0.4 * self.dy / (self.theta + self.kappa * self.dy);
        let mut res = vec![0.0; v.len()];
        let mut r_inf = self.residual(ham, v, &mut res)?;
        for it in 0..max_iter {
            if r_inf <= tol {
                return Ok(SolveStats { residual_inf: r_inf, iterations: it });
            }
            for (vi, ri) in v.iter_mut().zip(&res) {
                *vi -= dtau * ri;
            }
            r_inf = self.residual(ham, v, &mut res)?;
        }
        if r_inf <= tol {
            Ok(SolveStats { residual_inf: r_inf, iterations: max_iter })
        } else {
            Err(Error::NonConvergence { iterations: max_iter, residual: r_inf })
        }
    }
}

/// Solves a periodic tridiagonal system in place (Sherman–Morrison).
///
/// Row `i` reads `sub[i] x_{i−1} + diag[i] x_i + sup[i] x_{i+1} = rhs[i]`
/// with indices taken modulo `n`. Requires `n ≥ 3` and diagonal dominance.
pub(crate) fn cyclic_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    debug_assert!(n >= 3);
    let corner_low = sup[n - 1]; // A[n-1][0]
    let corner_high = sub[0]; // A[0][n-1]
    let gamma = -diag[0];

    let mut bb = diag.to_vec();
    bb[0] -= gamma;
    bb[n - 1] -= corner_low * corner_high / gamma;

    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = corner_low;

    let mut cp = vec![0.0; n];
    thomas(sub, &bb, sup, rhs, &mut cp);
    thomas(sub, &bb, sup, &mut u, &mut cp);

    let fact = (rhs[0] + corner_high * rhs[n - 1] / gamma) / (1.0 + u[0] + corner_high * u[n - 1] / gamma);
    for (x, z) in rhs.iter_mut().zip(&u) {
        *x -= fact * z;
    }
}

fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], x: &mut [f64], cp: &mut [f64]) {
    let n = diag.len();
    cp[0] = sup[0] / diag[0];
    x[0] /= diag[0];
    for i in 1..n {
        let m = diag[i] - sub[i] * cp[i - 1];
        cp[i] = if i + 1 < n { sup[i] / m } else { 0.0 };
        x[i] = (x[i] - sub[i] * x[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        x[i] -= cp[i] * x[i + 1];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cyclic_solver_matches_dense_product() {
        let n = 7;
        let sub: Vec<f64> = (0..n).map(|i| -0.3 - 0.01 * i as f64).collect();
        let sup: Vec<f64> = (0..n).map(|i| -0.5 + 0.02 * i as f64).collect();
        let diag: Vec<f64> = (0..n).map(|i| 2.0 + 0.1 * i as f64).collect();
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let mut rhs: Vec<f64> = (0..n)
            .map(|i| sub[i] * x_true[(i + n - 1) % n] + diag[i] * x_true[i] + sup[i] * x_true[(i + 1) % n])
            .collect();
        cyclic_tridiagonal(&sub, &diag, &sup, &mut rhs);
        for (a, b) in rhs.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn newton_and_relaxation_share_the_fixed_point() {
        let n = 64;
        let dy = 1.0 / n as f64;
        let ham = |i: usize, q: f64| -> Result<(f64, f64)> {
            let y = i as f64 * dy;
            Ok(((q + 0.3).abs() + (2.0 * std::f64::consts::PI * y).cos(), (q + 0.3).signum()))
        };
        let sys = MonotoneSystem { kappa: 0.5, theta: 1.0, dy, source: None };
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        let sa = sys.solve_newton(&ham, &mut a, 1e-12, 100).unwrap();
        sys.solve_pseudo_time(&ham, &mut b, 1e-12, 1_000_000).unwrap();
        assert!(sa.residual_inf <= 1e-12);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
    }
}
