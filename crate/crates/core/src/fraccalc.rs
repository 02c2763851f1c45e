//! Gamma function and Caputo-derivative quadratures on uniform time grids.
//!
//! Two quadratures of the Caputo derivative of order `alpha ∈ (0, 1)` are
//! provided. [`caputo_l1`] is the classical L1 scheme. [`caputo_jk`] splits
//! the derivative into an initial-jump term `J[f](t) = (f(t) − f(0)) / (t^α Γ(1−α))`
//! and history integrals
//!
//! ```text
//! K_(a,b)[f](t) = α / Γ(1−α) ∫_a^b (f(t) − f(t − τ)) τ^{−(α+1)} dτ
//! ```
//!
//! Both act on the same piecewise-linear interpolant of the samples, so
//! `J + K_(0,r) + K_(r,t)` reproduces the L1 value to roundoff.

use crate::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function for positive real arguments (Lanczos, g = 7, 9 terms).
pub fn gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("gamma requires x > 0, got {x}")));
    }
    if x > 170.0 {
        return Err(Error::Overflow(x));
    }
    if x < 0.5 {
        // Γ(x) = Γ(x + 1) / x keeps the Lanczos sum in its accurate range.
        return Ok(lanczos(x + 1.0) / x);
    }
    Ok(lanczos(x))
}

fn lanczos(x: f64) -> f64 {
    let z = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    // t^(z+1/2) is split in two halves so that x close to 170 does not overflow.
    let half = t.powf(0.5 * (z + 0.5));
    (2.0 * std::f64::consts::PI).sqrt() * half * (half * (-t).exp()) * acc
}

/// Fractional order `alpha ∈ (0, 1)` with the Gamma values used throughout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FracOrder {
    alpha: f64,
    gamma_1ma: f64,
    gamma_2ma: f64,
    gamma_1pa: f64,
}

impl FracOrder {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain(format!(
                "fractional order must lie in the open interval (0, 1), got {alpha}"
            )));
        }
        Ok(Self {
            alpha,
            gamma_1ma: gamma(1.0 - alpha)?,
            gamma_2ma: gamma(2.0 - alpha)?,
            gamma_1pa: gamma(1.0 + alpha)?,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Γ(1 − α)
    pub fn gamma_1ma(&self) -> f64 {
        self.gamma_1ma
    }

    /// Γ(2 − α)
    pub fn gamma_2ma(&self) -> f64 {
        self.gamma_2ma
    }

    /// Γ(1 + α)
    pub fn gamma_1pa(&self) -> f64 {
        self.gamma_1pa
    }

    /// L1 weight `b_k = (k+1)^{1−α} − k^{1−α}`.
    pub fn l1_weight(&self, k: usize) -> f64 {
        let e = 1.0 - self.alpha;
        let k = k as f64;
        (k + 1.0).powf(e) - k.powf(e)
    }
}

/// Uniform grid on `[0, T]`.
///
/// Fractional grids carry the L1 weights `b_0 .. b_{n_steps−1}`; classical
/// grids (first-order time derivative) carry none.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    t_final: f64,
    n_steps: usize,
    dt: f64,
    l1_weights: Vec<f64>,
}

impl TimeGrid {
    pub fn new(t_final: f64, n_steps: usize, frac: &FracOrder) -> Result<Self> {
        let mut grid = Self::classical(t_final, n_steps)?;
        grid.l1_weights = (0..n_steps).map(|k| frac.l1_weight(k)).collect();
        Ok(grid)
    }

    pub fn classical(t_final: f64, n_steps: usize) -> Result<Self> {
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::Domain(format!("final time must be positive, got {t_final}")));
        }
        if n_steps == 0 {
            return Err(Error::Domain("n_steps must be positive".into()));
        }
        Ok(Self {
            t_final,
            n_steps,
            dt: t_final / n_steps as f64,
            l1_weights: Vec::new(),
        })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    pub fn l1_weights(&self) -> &[f64] {
        &self.l1_weights
    }
}

/// Samples `f(t_0), …, f(t_n)` of a scalar function on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryScalar {
    dt: f64,
    samples: Vec<f64>,
}

impl HistoryScalar {
    pub fn new(dt: f64, samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Domain("history must hold at least f(0)".into()));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Domain(format!("time step must be positive, got {dt}")));
        }
        Ok(Self { dt, samples })
    }

    /// Samples `f` at `t_0 .. t_{n_steps}` of `grid`.
    pub fn from_fn(grid: &TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        Self {
            dt: grid.dt(),
            samples: (0..=grid.n_steps()).map(|n| f(grid.time(n))).collect(),
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    /// Final time `t_{len−1}`.
    pub fn t_final(&self) -> f64 {
        self.time(self.samples.len() - 1)
    }

    fn check_index(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::Index(
                "the Caputo derivative is evaluated only for t > 0 (n ≥ 1)".into(),
            ));
        }
        if n >= self.samples.len() {
            return Err(Error::Index(format!(
                "index {n} beyond history of length {}",
                self.samples.len()
            )));
        }
        Ok(())
    }
}

/// L1 approximation of the Caputo derivative at `t_n`.
pub fn caputo_l1(f: &HistoryScalar, frac: &FracOrder, n: usize) -> Result<f64> {
    f.check_index(n)?;
    let s = f.samples();
    let sum: f64 = (0..n)
        .map(|k| frac.l1_weight(k) * (s[n - k] - s[n - k - 1]))
        .sum();
    Ok(f.dt().powf(-frac.alpha()) / frac.gamma_2ma() * sum)
}

/// The three terms of the J + K splitting at `t_n` with split point `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JkSplit {
    pub j_part: f64,
    pub k_head: f64,
    pub k_tail: f64,
}

impl JkSplit {
    pub fn total(&self) -> f64 {
        self.j_part + self.k_head + self.k_tail
    }
}

/// Caputo derivative at `t_n` as `J + K_(0,r) + K_(r,t_n)`.
pub fn caputo_jk(f: &HistoryScalar, frac: &FracOrder, n: usize, split: f64) -> Result<JkSplit> {
    f.check_index(n)?;
    let t_n = f.time(n);
    if !(split > 0.0 && split < t_n) {
        return Err(Error::SplitDomain { split, t_n });
    }
    let s = f.samples();
    let j_part = (s[n] - s[0]) / (t_n.powf(frac.alpha()) * frac.gamma_1ma());
    Ok(JkSplit {
        j_part,
        k_head: k_integral(f, frac, n, 0.0, split),
        k_tail: k_integral(f, frac, n, split, t_n),
    })
}

/// `K_(a,b)[f](t_n)` integrated exactly against the piecewise-linear interpolant.
fn k_integral(f: &HistoryScalar, frac: &FracOrder, n: usize, a: f64, b: f64) -> f64 {
    let alpha = frac.alpha();
    let dt = f.dt();
    let s = f.samples();
    let first = ((a / dt).floor() as usize).min(n - 1);
    let last = ((b / dt).ceil() as usize).min(n);

    let mut acc = 0.0;
    for k in first..last {
        let lo = (k as f64 * dt).max(a);
        let hi = ((k + 1) as f64 * dt).min(b);
        if hi <= lo {
            continue;
        }
        // On τ ∈ [k dt, (k+1) dt]: f(t_n) − f(t_n − τ) = c + d (τ − k dt).
        let c = s[n] - s[n - k];
        let d = (s[n - k] - s[n - k - 1]) / dt;
        let offset = c - d * k as f64 * dt;
        if offset != 0.0 {
            acc += offset * (lo.powf(-alpha) - hi.powf(-alpha)) / alpha;
        }
        acc += d * (hi.powf(1.0 - alpha) - lo.powf(1.0 - alpha)) / (1.0 - alpha);
    }
    alpha / frac.gamma_1ma() * acc
}

/// Closed-form Caputo derivative of `t^γ`: `Γ(γ+1)/Γ(γ+1−α) t^{γ−α}`.
pub fn caputo_power_oracle(exponent: f64, frac: &FracOrder, t: f64) -> Result<f64> {
    if exponent < frac.alpha() {
        return Err(Error::Domain(format!(
            "power oracle requires exponent ≥ alpha = {}, got {exponent}",
            frac.alpha()
        )));
    }
    if !(t > 0.0) {
        return Err(Error::Domain(format!("power oracle requires t > 0, got {t}")));
    }
    Ok(gamma(exponent + 1.0)? / gamma(exponent + 1.0 - frac.alpha())? * t.powf(exponent - frac.alpha()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SQRT_PI: f64 = 1.772_453_850_905_516;

    /// Stirling series for ln Γ after shifting the argument above 20.
    fn gamma_oracle(x: f64) -> f64 {
        let mut shift = 1.0;
        let mut w = x;
        while w < 20.0 {
            shift *= w;
            w += 1.0;
        }
        let w2 = w * w;
        let series = 1.0 / (12.0 * w) - 1.0 / (360.0 * w * w2) + 1.0 / (1260.0 * w * w2 * w2)
            - 1.0 / (1680.0 * w * w2 * w2 * w2)
            + 1.0 / (1188.0 * w * w2 * w2 * w2 * w2);
        let ln = (w - 0.5) * w.ln() - w + 0.5 * (2.0 * std::f64::consts::PI).ln() + series;
        ln.exp() / shift
    }

    #[test]
    fn gamma_identities() {
        assert!((gamma(1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((gamma(2.0).unwrap() - 1.0).abs() < 1e-14);
        assert!(((gamma(0.5).unwrap() - SQRT_PI) / SQRT_PI).abs() < 1e-12);
        assert!((gamma(0.5).unwrap() - 1.772_453_850_905_516_0).abs() < 1e-14);
    }

    #[test]
    fn gamma_against_stirling_oracle() {
        let mut x = 0.01;
        while x < 60.0 {
            let rel = (gamma(x).unwrap() / gamma_oracle(x) - 1.0).abs();
            assert!(rel <= 1e-12, "x = {x}: rel err {rel:e}");
            x *= 1.137;
        }
    }

    #[test]
    fn gamma_errors() {
        assert!(matches!(gamma(0.0), Err(Error::Domain(_))));
        assert!(matches!(gamma(-1.5), Err(Error::Domain(_))));
        assert!(matches!(gamma(f64::NAN), Err(Error::Domain(_))));
        assert!(matches!(gamma(170.5), Err(Error::Overflow(_))));
        assert!(gamma(170.0).unwrap().is_finite());
    }

    #[test]
    fn frac_order_rejects_endpoints() {
        assert!(FracOrder::new(0.0).is_err());
        assert!(FracOrder::new(1.0).is_err());
        let f = FracOrder::new(0.3).unwrap();
        assert!((f.gamma_1ma() / gamma_oracle(0.7) - 1.0).abs() < 1e-12);
        assert!((f.gamma_2ma() / gamma_oracle(1.7) - 1.0).abs() < 1e-12);
        assert!((f.gamma_1pa() / gamma_oracle(1.3) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn l1_weights_telescope() {
        for &alpha in &[0.1, 0.5, 0.9] {
            let frac = FracOrder::new(alpha).unwrap();
            let grid = TimeGrid::new(1.0, 1000, &frac).unwrap();
            let w = grid.l1_weights();
            assert!(w.iter().all(|&b| b > 0.0));
            assert!(w.windows(2).all(|p| p[1] < p[0]));
            let total: f64 = w.iter().sum();
            let exact = 1000f64.powf(1.0 - alpha);
            assert!(((total - exact) / exact).abs() < 1e-12);
        }
    }

    #[test]
    fn l1_examples() {
        let frac = FracOrder::new(0.5).unwrap();
        let grid = TimeGrid::new(1.0, 37, &frac).unwrap();
        let c = HistoryScalar::from_fn(&grid, |_| 7.0);
        assert_eq!(caputo_l1(&c, &frac, 20).unwrap(), 0.0);

        let lin = HistoryScalar::from_fn(&grid, |t| t);
        let v = caputo_l1(&lin, &frac, 37).unwrap();
        assert!((v - 1.128_379_167_095_512_6).abs() < 1e-12);

        let grid = TimeGrid::new(1.0, 1000, &frac).unwrap();
        let sq = HistoryScalar::from_fn(&grid, |t| t * t);
        let v = caputo_l1(&sq, &frac, 1000).unwrap();
        assert!((v - 1.504_505_556_127_350_1).abs() < 2e-4);
    }

    #[test]
    fn l1_rejects_bad_index() {
        let frac = FracOrder::new(0.5).unwrap();
        let f = HistoryScalar::new(0.1, vec![0.0, 1.0, 2.0]).unwrap();
        assert!(matches!(caputo_l1(&f, &frac, 0), Err(Error::Index(_))));
        assert!(matches!(caputo_l1(&f, &frac, 3), Err(Error::Index(_))));
    }

    #[test]
    fn jk_examples() {
        let frac = FracOrder::new(0.5).unwrap();
        let grid = TimeGrid::new(1.0, 40, &frac).unwrap();
        let c = HistoryScalar::from_fn(&grid, |_| -3.0);
        let z = caputo_jk(&c, &frac, 40, 0.5).unwrap();
        assert_eq!((z.j_part, z.k_head, z.k_tail), (0.0, 0.0, 0.0));

        let lin = HistoryScalar::from_fn(&grid, |t| t);
        let s = caputo_jk(&lin, &frac, 40, 0.5).unwrap();
        assert!((s.j_part - 0.564_189_583_547_756_3).abs() < 1e-12);
        assert!((s.k_head + s.k_tail - 0.564_189_583_547_756_3).abs() < 1e-10);
    }

    #[test]
    fn jk_split_off_grid_and_errors() {
        let frac = FracOrder::new(0.7).unwrap();
        let f = HistoryScalar::new(0.1, vec![0.0, 0.3, -0.2, 0.9, 1.1, 0.4]).unwrap();
        let l1 = caputo_l1(&f, &frac, 5).unwrap();
        for r in [0.013, 0.1, 0.2371, 0.45] {
            let s = caputo_jk(&f, &frac, 5, r).unwrap();
            assert!((s.total() - l1).abs() < 1e-12, "r = {r}");
        }
        assert!(matches!(caputo_jk(&f, &frac, 5, 0.0), Err(Error::SplitDomain { .. })));
        assert!(matches!(caputo_jk(&f, &frac, 5, 0.5), Err(Error::SplitDomain { .. })));
    }

    #[test]
    fn power_oracle_examples() {
        for &alpha in &[0.2, 0.5, 0.8] {
            let frac = FracOrder::new(alpha).unwrap();
            let v = caputo_power_oracle(alpha, &frac, 3.7).unwrap();
            assert!((v - frac.gamma_1pa()).abs() < 1e-14);
        }
        let frac = FracOrder::new(0.5).unwrap();
        assert!((caputo_power_oracle(1.0, &frac, 1.0).unwrap() - 1.128_379_167_095_512_6).abs() < 1e-13);
        assert!((caputo_power_oracle(2.0, &frac, 1.0).unwrap() - 1.504_505_556_127_350_1).abs() < 1e-13);
        assert!(caputo_power_oracle(0.4, &frac, 1.0).is_err());
        assert!(caputo_power_oracle(1.0, &frac, 0.0).is_err());
    }

    #[test]
    fn l1_convergence_order_for_square() {
        let frac = FracOrder::new(0.5).unwrap();
        let exact = caputo_power_oracle(2.0, &frac, 1.0).unwrap();
        let errs: Vec<f64> = [100, 200, 400, 800, 1600]
            .iter()
            .map(|&n| {
                let grid = TimeGrid::new(1.0, n, &frac).unwrap();
                let f = HistoryScalar::from_fn(&grid, |t| t * t);
                (caputo_l1(&f, &frac, n).unwrap() - exact).abs()
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 1.5).abs() < 0.2, "order {order}");
        }
    }

    proptest! {
        #[test]
        fn jk_matches_l1(
            samples in prop::collection::vec(-5.0f64..5.0, 2..60),
            alpha in 0.05f64..0.95,
            frac_r in 0.05f64..0.95,
        ) {
            let frac = FracOrder::new(alpha).unwrap();
            let n = samples.len() - 1;
            let f = HistoryScalar::new(0.37, samples).unwrap();
            let l1 = caputo_l1(&f, &frac, n).unwrap();
            let max = f.samples().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let s = caputo_jk(&f, &frac, n, frac_r * f.time(n)).unwrap();
            prop_assert!((s.total() - l1).abs() <= 1e-10 * (1.0 + max));
        }

        #[test]
        fn nondecreasing_history_has_nonnegative_l1(
            steps in prop::collection::vec(0.0f64..2.0, 1..80),
            alpha in 0.05f64..0.95,
        ) {
            let frac = FracOrder::new(alpha).unwrap();
            let mut samples = vec![0.0];
            for s in &steps {
                let last = *samples.last().unwrap();
                samples.push(last + s);
            }
            let f = HistoryScalar::new(0.01, samples).unwrap();
            prop_assert!(caputo_l1(&f, &frac, steps.len()).unwrap() >= 0.0);
        }
    }
}
