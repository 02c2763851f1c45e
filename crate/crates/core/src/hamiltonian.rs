//! Periodic coercive Hamiltonians `H(y, p)` in one space dimension, periodic
//! Lipschitz initial data, and the monotone numerical fluxes used by the
//! cell-problem and time-stepping solvers.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::fraccalc::FracOrder;
use crate::{Error, Result};

type HamFn = dyn Fn(f64, f64) -> f64 + Send + Sync;

/// Catalog entry of a Hamiltonian.
#[derive(Clone)]
pub enum HamiltonianKind {
    /// `|p|`
    Eikonal,
    /// `|p| + a cos(2π m y)`
    EikonalPotential { amplitude: f64, frequency: u32 },
    /// `|p| + c0`
    EikonalPlusConstant { c0: f64 },
    /// User supplied, assumed 1-periodic in `y`.
    Custom(Arc<HamFn>),
}

impl fmt::Debug for HamiltonianKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Eikonal => write!(f, "Eikonal"),
            Self::EikonalPotential { amplitude, frequency } => {
                write!(f, "EikonalPotential({amplitude}, {frequency})")
            }
            Self::EikonalPlusConstant { c0 } => write!(f, "EikonalPlusConstant({c0})"),
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// A Hamiltonian together with its declared structural constants:
/// Lipschitz constants in `y` and `p`, and the coercivity bound
/// `H(y, p) ≥ c_low |p| − c_off`.
#[derive(Debug, Clone)]
pub struct HamiltonianSpec {
    kind: HamiltonianKind,
    lip_y: f64,
    lip_p: f64,
    coercivity: (f64, f64),
}

impl HamiltonianSpec {
    pub fn eikonal() -> Self {
        Self {
            kind: HamiltonianKind::Eikonal,
            lip_y: 0.0,
            lip_p: 1.0,
            coercivity: (1.0, 0.0),
        }
    }

    pub fn eikonal_potential(amplitude: f64, frequency: u32) -> Result<Self> {
        if !amplitude.is_finite() || frequency == 0 {
            return Err(Error::Config(format!(
                "potential needs a finite amplitude and a positive integer frequency, got ({amplitude}, {frequency})"
            )));
        }
        Ok(Self {
            kind: HamiltonianKind::EikonalPotential { amplitude, frequency },
            lip_y: 2.0 * PI * frequency as f64 * amplitude.abs(),
            lip_p: 1.0,
            coercivity: (1.0, amplitude.abs()),
        })
    }

    pub fn eikonal_plus_constant(c0: f64) -> Result<Self> {
        if !c0.is_finite() {
            return Err(Error::Config(format!("constant must be finite, got {c0}")));
        }
        Ok(Self {
            kind: HamiltonianKind::EikonalPlusConstant { c0 },
            lip_y: 0.0,
            lip_p: 1.0,
            coercivity: (1.0, (-c0).max(0.0)),
        })
    }

    /// Wraps an arbitrary 1-periodic Hamiltonian with declared constants.
    pub fn custom<F>(f: F, lip_y: f64, lip_p: f64, coercivity: (f64, f64)) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        if !(lip_y >= 0.0 && lip_p > 0.0 && coercivity.0 > 0.0 && coercivity.1 >= 0.0) {
            return Err(Error::Config(
                "custom Hamiltonian needs lip_y ≥ 0, lip_p > 0, c_low > 0, c_off ≥ 0".into(),
            ));
        }
        Ok(Self {
            kind: HamiltonianKind::Custom(Arc::new(f)),
            lip_y,
            lip_p,
            coercivity,
        })
    }

    pub fn kind(&self) -> &HamiltonianKind {
        &self.kind
    }

    pub fn lip_y(&self) -> f64 {
        self.lip_y
    }

    pub fn lip_p(&self) -> f64 {
        self.lip_p
    }

    pub fn coercivity(&self) -> (f64, f64) {
        self.coercivity
    }

    /// True when `H` does not depend on `y`.
    pub fn is_y_independent(&self) -> bool {
        match &self.kind {
            HamiltonianKind::Eikonal | HamiltonianKind::EikonalPlusConstant { .. } => true,
            HamiltonianKind::EikonalPotential { amplitude, .. } => *amplitude == 0.0,
            HamiltonianKind::Custom(_) => self.lip_y == 0.0,
        }
    }

    pub fn eval(&self, y: f64, p: f64) -> f64 {
        match &self.kind {
            HamiltonianKind::Eikonal => p.abs(),
            HamiltonianKind::EikonalPotential { amplitude, frequency } => {
                p.abs() + amplitude * (2.0 * PI * *frequency as f64 * y).cos()
            }
            HamiltonianKind::EikonalPlusConstant { c0 } => p.abs() + c0,
            HamiltonianKind::Custom(f) => f(y, p),
        }
    }

    /// An element of the generalized derivative `∂H/∂p`.
    pub fn dp(&self, y: f64, p: f64) -> f64 {
        match &self.kind {
            HamiltonianKind::Custom(f) => {
                let h = 1e-6 * (1.0 + p.abs());
                ((f(y, p + h) - f(y, p - h)) / (2.0 * h)).clamp(-self.lip_p, self.lip_p)
            }
            _ => sign0(p),
        }
    }

    /// `max { H(y, p) : y ∈ [0, 1), |p| ≤ radius }`.
    ///
    /// Closed form for catalog entries; a 256 × 257 sample for custom ones.
    pub fn max_over_ball(&self, radius: f64) -> f64 {
        let r = radius.abs();
        match &self.kind {
            HamiltonianKind::Eikonal => r,
            HamiltonianKind::EikonalPotential { amplitude, .. } => r + amplitude.abs(),
            HamiltonianKind::EikonalPlusConstant { c0 } => r + c0,
            HamiltonianKind::Custom(f) => {
                let mut best = f64::NEG_INFINITY;
                for i in 0..256 {
                    let y = i as f64 / 256.0;
                    for j in 0..=256 {
                        let p = -r + 2.0 * r * j as f64 / 256.0;
                        best = best.max(f(y, p));
                    }
                }
                best
            }
        }
    }
}

fn sign0(p: f64) -> f64 {
    if p > 0.0 {
        1.0
    } else if p < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Periodic Lipschitz initial data on the unit torus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    Zero,
    /// `amplitude · cos(2π frequency x)`
    Cosine { amplitude: f64, frequency: u32 },
    /// Periodic tent of the given height centred at `center` with half-width `width`.
    Hat { height: f64, center: f64, width: f64 },
}

impl InitialData {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Zero => Ok(()),
            Self::Cosine { amplitude, frequency } => {
                if amplitude.is_finite() && frequency > 0 {
                    Ok(())
                } else {
                    Err(Error::Config("cosine data needs finite amplitude and frequency ≥ 1".into()))
                }
            }
            Self::Hat { height, center, width } => {
                if height.is_finite() && center.is_finite() && width > 0.0 && width <= 0.5 {
                    Ok(())
                } else {
                    Err(Error::Config("hat data needs finite height/center and width in (0, 0.5]".into()))
                }
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Cosine { amplitude, frequency } => amplitude * (2.0 * PI * frequency as f64 * x).cos(),
            Self::Hat { height, center, width } => {
                height * (1.0 - torus_distance(x, center) / width).max(0.0)
            }
        }
    }

    /// Lipschitz constant `Lip[u₀]`.
    pub fn lip(&self) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Cosine { amplitude, frequency } => 2.0 * PI * frequency as f64 * amplitude.abs(),
            Self::Hat { height, width, .. } => height.abs() / width,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Cosine { amplitude, .. } => amplitude.abs(),
            Self::Hat { height, .. } => height.abs(),
        }
    }
}

/// Distance on the unit circle.
pub fn torus_distance(x: f64, y: f64) -> f64 {
    let d = (x - y).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Lax–Friedrichs numerical Hamiltonian with a validated viscosity
/// coefficient `theta ≥ lip_p`.
#[derive(Debug, Clone)]
pub struct LaxFriedrichs<'a> {
    h: &'a HamiltonianSpec,
    theta: f64,
}

impl<'a> LaxFriedrichs<'a> {
    pub fn new(h: &'a HamiltonianSpec, theta: f64) -> Result<Self> {
        if !(theta >= h.lip_p()) {
            return Err(Error::Config(format!(
                "Lax–Friedrichs coefficient {theta} is below the p-Lipschitz constant {}",
                h.lip_p()
            )));
        }
        Ok(Self { h, theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    #[inline]
    pub fn flux(&self, y: f64, p_minus: f64, p_plus: f64) -> f64 {
        self.h.eval(y, 0.5 * (p_minus + p_plus)) - 0.5 * self.theta * (p_plus - p_minus)
    }
}

/// `H(y, (p⁻ + p⁺)/2) − θ/2 (p⁺ − p⁻)`, monotone whenever `θ ≥ lip_p`.
pub fn lax_friedrichs(h: &HamiltonianSpec, y: f64, p_minus: f64, p_plus: f64, theta_lf: f64) -> Result<f64> {
    Ok(LaxFriedrichs::new(h, theta_lf)?.flux(y, p_minus, p_plus))
}

/// Godunov flux for `|p|`: `max(max(p⁻, 0), −min(p⁺, 0))`.
pub fn godunov_eikonal(p_minus: f64, p_plus: f64) -> f64 {
    p_minus.max(0.0).max(-p_plus.min(0.0))
}

/// `(1/Γ(1−α)) max { H(y, p) : |p| ≤ Lip[u₀] }`.
pub fn barrier_constant(h: &HamiltonianSpec, u0: &InitialData, frac: &FracOrder) -> f64 {
    h.max_over_ball(u0.lip()) / frac.gamma_1ma()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn catalog() -> Vec<HamiltonianSpec> {
        vec![
            HamiltonianSpec::eikonal(),
            HamiltonianSpec::eikonal_potential(1.0, 1).unwrap(),
            HamiltonianSpec::eikonal_potential(-0.7, 3).unwrap(),
            HamiltonianSpec::eikonal_plus_constant(1.0).unwrap(),
            HamiltonianSpec::eikonal_plus_constant(-2.5).unwrap(),
        ]
    }

    #[test]
    fn eval_examples() {
        let eik = HamiltonianSpec::eikonal();
        assert_eq!(eik.eval(0.3, -2.0), 2.0);
        let pot = HamiltonianSpec::eikonal_potential(1.0, 1).unwrap();
        assert_eq!(pot.eval(0.0, 0.0), 1.0);
        assert!((pot.eval(0.5, 3.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn lax_friedrichs_examples() {
        let eik = HamiltonianSpec::eikonal();
        assert_eq!(lax_friedrichs(&eik, 0.0, 1.0, 1.0, 1.0).unwrap(), 1.0);
        assert_eq!(lax_friedrichs(&eik, 0.0, 0.0, 2.0, 1.0).unwrap(), 0.0);
        assert!(matches!(lax_friedrichs(&eik, 0.0, 0.0, 2.0, 0.5), Err(Error::Config(_))));
    }

    #[test]
    fn godunov_examples() {
        assert_eq!(godunov_eikonal(1.0, 2.0), 1.0);
        assert_eq!(godunov_eikonal(-1.0, -2.0), 2.0);
        assert_eq!(godunov_eikonal(-1.0, 1.0), 0.0);
        assert_eq!(godunov_eikonal(2.0, -3.0), 3.0);
    }

    #[test]
    fn barrier_examples() {
        let frac = FracOrder::new(0.5).unwrap();
        let zero = InitialData::Zero;
        assert_eq!(barrier_constant(&HamiltonianSpec::eikonal(), &zero, &frac), 0.0);
        let lip1 = InitialData::Hat { height: 0.25, center: 0.5, width: 0.25 };
        assert_eq!(lip1.lip(), 1.0);
        let pot = HamiltonianSpec::eikonal_potential(1.0, 1).unwrap();
        assert!((barrier_constant(&pot, &lip1, &frac) - 1.128_379_167_1).abs() < 1e-9);
        let c = HamiltonianSpec::eikonal_plus_constant(1.0).unwrap();
        assert!((barrier_constant(&c, &zero, &frac) - 0.564_189_583_5).abs() < 1e-9);
    }

    #[test]
    fn custom_max_is_sampled() {
        let h = HamiltonianSpec::custom(|y, p| p * p / 2.0 + (2.0 * PI * y).sin(), 2.0 * PI, 2.0, (0.5, 2.0)).unwrap();
        assert!((h.max_over_ball(2.0) - 3.0).abs() < 1e-3);
        assert!((h.dp(0.1, 1.5) - 1.5).abs() < 1e-6);
    }

    #[test]
    fn declared_constants_are_honest() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for h in catalog() {
            let (c_low, c_off) = h.coercivity();
            for _ in 0..2000 {
                let y: f64 = rng.gen_range(-3.0..3.0);
                let p: f64 = rng.gen_range(-10.0..10.0);
                let y2: f64 = rng.gen_range(-3.0..3.0);
                let p2: f64 = rng.gen_range(-10.0..10.0);
                assert!((h.eval(y + 1.0, p) - h.eval(y, p)).abs() <= 1e-12);
                let lhs = (h.eval(y, p) - h.eval(y2, p2)).abs();
                assert!(lhs <= h.lip_y() * (y - y2).abs() + h.lip_p() * (p - p2).abs() + 1e-12, "{h:?}");
                assert!(h.eval(y, p) >= c_low * p.abs() - c_off - 1e-12);
            }
        }
    }

    #[test]
    fn lax_friedrichs_is_monotone_and_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for h in catalog() {
            let lf = LaxFriedrichs::new(&h, h.lip_p()).unwrap();
            for _ in 0..10_000 {
                let y: f64 = rng.gen_range(0.0..1.0);
                let a: f64 = rng.gen_range(-5.0..5.0);
                let b: f64 = rng.gen_range(-5.0..5.0);
                let bump: f64 = rng.gen_range(0.0..1.0);
                assert_eq!(lf.flux(y, a, a), h.eval(y, a));
                assert!(lf.flux(y, a, b + bump) <= lf.flux(y, a, b) + 1e-12);
                assert!(lf.flux(y, a + bump, b) >= lf.flux(y, a, b) - 1e-12);
            }
        }
    }

    #[test]
    fn initial_data() {
        let cos = InitialData::Cosine { amplitude: 0.25, frequency: 1 };
        assert!((cos.lip() - PI / 2.0).abs() < 1e-15);
        assert!((cos.eval(1.3) - cos.eval(0.3)).abs() < 1e-15);
        let hat = InitialData::Hat { height: 1.0, center: 0.9, width: 0.2 };
        assert!((hat.eval(0.05) - 0.25).abs() < 1e-12);
        assert_eq!(hat.eval(0.5), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for u0 in [cos, hat] {
            for _ in 0..1000 {
                let x: f64 = rng.gen_range(0.0..1.0);
                let y: f64 = rng.gen_range(0.0..1.0);
                assert!((u0.eval(x) - u0.eval(y)).abs() <= u0.lip() * torus_distance(x, y) + 1e-12);
            }
        }
        assert!(InitialData::Hat { height: 1.0, center: 0.0, width: 0.0 }.validate().is_err());
    }
}
