//! Subcommand drivers. Each writes its artifacts into the output directory
//! and returns whether its checks passed.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use tfhj_core::cell::{cell_oracle_1d, check_lemma51, lambda_lip_p, EffectiveTable, Lemma51Report, TorusGrid};
use tfhj_core::envelopes::{check_lemma36, Lemma36Report};
use tfhj_core::fraccalc::{caputo_jk, caputo_l1, caputo_power_oracle, FracOrder, HistoryScalar, TimeGrid};
use tfhj_core::hamiltonian::HamiltonianKind;
use tfhj_core::homogenize::run_sweep;
use tfhj_core::tfhj::{barrier_gap, solve, Dynamics, SchemeParams};

use crate::config::{RunConfig, Subcommand};

/// What a subcommand produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub pass: bool,
    pub summary: String,
    pub artifacts: Vec<PathBuf>,
}

impl Outcome {
    /// Process exit status: 0 pass, 2 failed check.
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            2
        }
    }
}

pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    fs::create_dir_all(&cfg.output_dir)
        .with_context(|| format!("cannot create output directory {}", cfg.output_dir.display()))?;
    match cfg.subcommand {
        Subcommand::CaputoCheck => caputo_check(cfg),
        Subcommand::Cell => cell(cfg),
        Subcommand::Solve => solve_one(cfg),
        Subcommand::Homogenize => homogenize(cfg),
        Subcommand::Lemmas => lemmas(cfg),
    }
}

fn write(dir: &Path, name: &str, contents: &str, artifacts: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
    artifacts.push(path);
    Ok(())
}

fn to_json(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

#[derive(Debug, Serialize)]
struct CaputoCheckReport {
    seed: u64,
    split_histories: usize,
    split_max_discrepancy: f64,
    split_ok: bool,
    linear_alphas: Vec<f64>,
    linear_errors: Vec<f64>,
    linear_ok: bool,
    quadratic_alpha: f64,
    quadratic_steps: Vec<usize>,
    quadratic_errors: Vec<f64>,
    quadratic_order: f64,
    quadratic_ok: bool,
    pass: bool,
}

fn caputo_check(cfg: &RunConfig) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let frac = FracOrder::new(cfg.alpha)?;

    // Split identity on random piecewise-linear histories.
    let mut worst = 0.0f64;
    let histories = 100;
    for _ in 0..histories {
        let n_steps = rng.gen_range(10..200);
        let tgrid = TimeGrid::new(1.0, n_steps, &frac)?;
        let samples: Vec<f64> = (0..=n_steps).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let scale = 1.0 + samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let f = HistoryScalar::new(tgrid.dt(), samples)?;
        let n = rng.gen_range(1..=n_steps);
        let l1 = caputo_l1(&f, &frac, n)?;
        for r in [0.1, 0.5, 0.9] {
            let split = caputo_jk(&f, &frac, n, r * f.time(n))?;
            worst = worst.max((split.total() - l1).abs() / scale);
        }
    }
    let split_ok = worst <= 1e-10;

    let linear_alphas = vec![0.3, 0.5, 0.7];
    let mut linear_errors = Vec::new();
    for &a in &linear_alphas {
        let fr = FracOrder::new(a)?;
        let tgrid = TimeGrid::new(1.0, 100, &fr)?;
        let f = HistoryScalar::from_fn(&tgrid, |t| t);
        linear_errors.push((caputo_l1(&f, &fr, 100)? - caputo_power_oracle(1.0, &fr, 1.0)?).abs());
    }
    let linear_ok = linear_errors.iter().all(|e| *e <= 1e-10);

    let quadratic_steps = vec![100, 200, 400, 800, 1600];
    let mut quadratic_errors = Vec::new();
    let exact = caputo_power_oracle(2.0, &frac, 1.0)?;
    for &n in &quadratic_steps {
        let tgrid = TimeGrid::new(1.0, n, &frac)?;
        let f = HistoryScalar::from_fn(&tgrid, |t| t * t);
        quadratic_errors.push((caputo_l1(&f, &frac, n)? - exact).abs());
    }
    let lx: Vec<f64> = quadratic_steps.iter().map(|&n| (1.0 / n as f64).ln()).collect();
    let ly: Vec<f64> = quadratic_errors.iter().map(|e| e.ln()).collect();
    let quadratic_order = slope(&lx, &ly);
    let quadratic_ok = (quadratic_order - (2.0 - cfg.alpha)).abs() <= 0.2;

    let pass = split_ok && linear_ok && quadratic_ok;
    let report = CaputoCheckReport {
        seed: cfg.seed,
        split_histories: histories,
        split_max_discrepancy: worst,
        split_ok,
        linear_alphas,
        linear_errors,
        linear_ok,
        quadratic_alpha: cfg.alpha,
        quadratic_steps,
        quadratic_errors,
        quadratic_order,
        quadratic_ok,
        pass,
    };
    let mut artifacts = Vec::new();
    write(&cfg.output_dir, "caputo_check.json", &to_json(&report), &mut artifacts)?;
    Ok(Outcome {
        pass,
        summary: format!(
            "caputo-check: split discrepancy {worst:.3e}, t² order {quadratic_order:.4} (expected {:.2}) -> {}",
            2.0 - cfg.alpha,
            verdict(pass)
        ),
        artifacts,
    })
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn cell(cfg: &RunConfig) -> Result<Outcome> {
    let h = cfg.hamiltonian_spec();
    let grid = TorusGrid::new(cfg.cell_cells)?;
    let p_grid = EffectiveTable::uniform_p_grid(cfg.p_min, cfg.p_max, cfg.p_count);
    let table = EffectiveTable::build(&h, &p_grid, &cfg.lambda_ladder, grid, 1e-10)?;

    // Reference values: closed form for y-independent H, the quadrature oracle otherwise.
    let (reference, tol): (Vec<f64>, f64) = match h.kind() {
        HamiltonianKind::EikonalPotential { amplitude, .. } if *amplitude > 0.0 => {
            (p_grid.iter().map(|&p| cell_oracle_1d(&h, p)).collect::<tfhj_core::Result<_>>()?, 0.02)
        }
        _ => (p_grid.iter().map(|&p| h.eval(0.0, p)).collect(), 1e-6),
    };
    let dev = table.hbar.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let pass = dev <= tol;

    let mut artifacts = Vec::new();
    write(&cfg.output_dir, "hbar.csv", &table.to_csv(), &mut artifacts)?;
    Ok(Outcome {
        pass,
        summary: format!(
            "cell: {} slopes on [{}, {}], max deviation from reference {dev:.3e} (tolerance {tol:e}) -> {}",
            cfg.p_count,
            cfg.p_min,
            cfg.p_max,
            verdict(pass)
        ),
        artifacts,
    })
}

#[derive(Debug, Serialize)]
struct SolveSummary {
    eps: f64,
    alpha: f64,
    n_cells: usize,
    n_steps: usize,
    sup_norm: f64,
    barrier_rate: f64,
    barrier_gap: f64,
    pass: bool,
}

fn solve_one(cfg: &RunConfig) -> Result<Outcome> {
    let h = cfg.hamiltonian_spec();
    let order = cfg.time_order();
    let tgrid = order.time_grid(cfg.t_final, cfg.n_steps)?;
    let grid = TorusGrid::new(cfg.n_cells)?;
    let dynamics = Dynamics::Oscillatory { h: &h, eps: cfg.eps };
    let params = SchemeParams::for_dynamics(&dynamics, order, &tgrid, grid, cfg.scheme)?;
    let u = solve(&dynamics, &cfg.u0, &tgrid, grid, &params)?;

    let rate = h.max_over_ball(cfg.u0.lip());
    let gap = barrier_gap(&u, &cfg.u0, rate, order.alpha());
    let pass = gap <= 0.05;

    let rows: Vec<usize> = cfg
        .snapshots
        .iter()
        .map(|t| ((t / tgrid.dt()).round() as usize).min(tgrid.n_steps()))
        .collect();
    let summary = SolveSummary {
        eps: cfg.eps,
        alpha: order.alpha(),
        n_cells: cfg.n_cells,
        n_steps: cfg.n_steps,
        sup_norm: u.sup_norm(),
        barrier_rate: rate,
        barrier_gap: gap,
        pass,
    };
    let mut artifacts = Vec::new();
    write(&cfg.output_dir, "solution.csv", &u.to_csv(Some(&rows))?, &mut artifacts)?;
    write(&cfg.output_dir, "solve_summary.json", &to_json(&summary), &mut artifacts)?;
    Ok(Outcome {
        pass,
        summary: format!(
            "solve: eps {}, sup norm {:.6}, barrier gap {gap:.3e} (allowed 0.05) -> {}",
            cfg.eps,
            summary.sup_norm,
            verdict(pass)
        ),
        artifacts,
    })
}

fn homogenize(cfg: &RunConfig) -> Result<Outcome> {
    let outcome = run_sweep(&cfg.sweep_config())?;
    let report = outcome.report;
    let mut artifacts = Vec::new();
    let mut json = report.to_json();
    json.push('\n');
    write(&cfg.output_dir, "rate_report.json", &json, &mut artifacts)?;
    write(&cfg.output_dir, "errors.csv", &report.to_csv(), &mut artifacts)?;
    write(&cfg.output_dir, "rate_plot.svg", &report.to_svg(), &mut artifacts)?;
    let order = report.fitted_order.map_or_else(|| "undefined".to_string(), |o| format!("{o:.4}"));
    let mut summary = format!(
        "homogenize: {} eps values, fitted order {order} (floor {:.4}) -> {}",
        report.errors.len(),
        report.rate_floor,
        verdict(report.pass)
    );
    if let Some(f) = &report.failure {
        summary.push_str(&format!(" [{f}]"));
    }
    Ok(Outcome { pass: report.pass, summary, artifacts })
}

#[derive(Debug, Serialize)]
struct Lemma36Suite {
    function: &'static str,
    holder_m: f64,
    alpha: f64,
    nodes: usize,
    reports: Vec<Lemma36Report>,
    all_hold: bool,
}

#[derive(Debug, Serialize)]
struct Lemma51Suite {
    slopes: Vec<f64>,
    lambdas: Vec<f64>,
    /// `λ Lip_p(v^λ)` at each λ.
    lambda_lip: Vec<f64>,
    lip_bounded: bool,
    lip_stable: bool,
    pairs: Vec<Lemma51Report>,
    rates_ok: bool,
    all_hold: bool,
}

/// Slopes over which the uniform `p`-Lipschitz bound is measured.
pub const LEMMA51_SLOPES: [f64; 7] = [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0];

fn lemmas(cfg: &RunConfig) -> Result<Outcome> {
    let tgrid = TimeGrid::classical(1.0, 2000)?;
    let f = HistoryScalar::from_fn(&tgrid, f64::sqrt);
    let reports = [0.1, 0.01, 0.001]
        .iter()
        .map(|&d| check_lemma36(&f, d, (1.0, 0.5)))
        .collect::<tfhj_core::Result<Vec<_>>>()?;
    let s36 = Lemma36Suite {
        function: "sqrt(t)",
        holder_m: 1.0,
        alpha: 0.5,
        nodes: 2001,
        all_hold: reports.iter().all(|r| r.all_hold()),
        reports,
    };

    let h = cfg.hamiltonian_spec();
    let grid = TorusGrid::new(cfg.cell_cells)?;
    let lambdas: Vec<f64> = cfg.lambda_ladder.iter().take(2).copied().collect();
    let lambda_lip = lambdas
        .iter()
        .map(|&l| lambda_lip_p(&h, &LEMMA51_SLOPES, l, grid, 1e-10))
        .collect::<tfhj_core::Result<Vec<_>>>()?;
    let lip_bounded = lambda_lip.iter().all(|v| *v <= 5.0);
    let lip_stable = (lambda_lip[0] - lambda_lip[1]).abs() < 0.25 * lambda_lip[0].max(lambda_lip[1]);
    let pairs = lambdas
        .iter()
        .map(|&l| check_lemma51(&h, 0.0, 0.5, l, &cfg.lambda_ladder, grid, 1e-10))
        .collect::<tfhj_core::Result<Vec<_>>>()?;
    let rates_ok = pairs.iter().all(|p| p.rate_ok);
    let s51 = Lemma51Suite {
        slopes: LEMMA51_SLOPES.to_vec(),
        lambdas,
        lambda_lip,
        lip_bounded,
        lip_stable,
        pairs,
        rates_ok,
        all_hold: lip_bounded && lip_stable && rates_ok,
    };

    let pass = s36.all_hold && s51.all_hold;
    let mut artifacts = Vec::new();
    write(&cfg.output_dir, "lemma36_report.json", &to_json(&s36), &mut artifacts)?;
    write(&cfg.output_dir, "lemma51_report.json", &to_json(&s51), &mut artifacts)?;
    Ok(Outcome {
        pass,
        summary: format!(
            "lemmas: sup-convolution suite {}, discounted-problem suite {} (λ·Lip_p = {:.4}, {:.4}) -> {}",
            verdict(s36.all_hold),
            verdict(s51.all_hold),
            s51.lambda_lip[0],
            s51.lambda_lip[1],
            verdict(pass)
        ),
        artifacts,
    })
}
