use std::io::Write;

use crate::error::{Error, Result};
use crate::fields::{DomainSpec, FluidState};
use crate::gravity::GravityConfig;
use crate::integrate::{run_with, SolverConfig, Stepper};

use super::residual::weak_residual;
use super::testfn::TestFunction;

/// One refinement level of a study: grid, initial state and gravity settings.
#[derive(Debug, Clone)]
pub struct StudyCase {
    pub domain: DomainSpec,
    pub state: FluidState,
    pub gravity: GravityConfig,
}

/// Residual magnitudes at one `(epsilon, t)`, combined over the test
/// functions as a root sum of squares.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub epsilon: f64,
    pub time: f64,
    pub r_rho: f64,
    pub r_mom: f64,
    pub r_energy: Option<f64>,
    pub r_poisson: Option<f64>,
}

/// Least-squares log-log slopes at one sample time.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderFit {
    pub time: f64,
    pub rho: f64,
    pub mom: f64,
    pub energy: Option<f64>,
    pub poisson: Option<f64>,
    /// Whether the continuity residual shrinks at every refinement.
    pub monotone_rho: bool,
    pub monotone_mom: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub orders: Vec<OrderFit>,
}

/// Slope of `ln r` against `ln eps` by least squares.
pub fn fit_order(eps: &[f64], r: &[f64]) -> f64 {
    let n = eps.len() as f64;
    let x: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let y: Vec<f64> = r.iter().map(|v| v.abs().ln()).collect();
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn decreasing(r: &[f64]) -> bool {
    r.windows(2).all(|w| w[1] < w[0])
}

/// Evolves each refinement level to every sample time and measures the
/// residuals there. `build` receives the cell size of the level.
pub fn convergence_study<F>(
    mut build: F,
    eps_list: &[f64],
    t_samples: &[f64],
    psis: &[TestFunction],
    solver: &SolverConfig,
) -> Result<ConvergenceTable>
where
    F: FnMut(f64) -> Result<StudyCase>,
{
    if eps_list.len() < 3 || !eps_list.windows(2).all(|w| w[1] < w[0]) {
        return Err(Error::Config(
            "the epsilon list needs at least 3 strictly decreasing values".into(),
        ));
    }
    if psis.is_empty() || t_samples.is_empty() {
        return Err(Error::Config("a study needs test functions and sample times".into()));
    }
    let mut times = t_samples.to_vec();
    times.sort_by(f64::total_cmp);

    let mut rows = Vec::new();
    for &eps in eps_list {
        let case = build(eps)?;
        let stepper = Stepper::new(&case.domain, &case.gravity, solver.integrator)?;
        let mut state = case.state;
        for &t in &times {
            if t > state.time {
                let mut leg = solver.clone();
                leg.t_end = t - state.time;
                leg.snapshot_every = None;
                state = run_with(&state, &case.domain, &case.gravity, &leg, |_| Ok(()), |_| Ok(()))?;
            }
            let (rhs, field) = stepper.rhs(&state)?;
            let mut acc = [0.0f64; 4];
            let mut has_energy = false;
            for psi in psis {
                let r = weak_residual(&state, &rhs, &field, &case.gravity, psi, &case.domain)?;
                acc[0] += r.continuity_norm().powi(2);
                acc[1] += r.momentum_norm().powi(2);
                if let Some(e) = r.energy_norm() {
                    has_energy = true;
                    acc[2] += e * e;
                }
                acc[3] += r.poisson.unwrap_or(0.0).powi(2);
            }
            rows.push(ConvergenceRow {
                epsilon: eps,
                time: state.time,
                r_rho: acc[0].sqrt(),
                r_mom: acc[1].sqrt(),
                r_energy: has_energy.then(|| acc[2].sqrt()),
                r_poisson: case.gravity.enabled.then(|| acc[3].sqrt()),
            });
        }
    }

    let orders = times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let level: Vec<&ConvergenceRow> = rows.iter().skip(k).step_by(times.len()).collect();
            let eps: Vec<f64> = level.iter().map(|r| r.epsilon).collect();
            let col = |f: &dyn Fn(&ConvergenceRow) -> f64| level.iter().map(|r| f(r)).collect::<Vec<_>>();
            let rho = col(&|r| r.r_rho);
            let mom = col(&|r| r.r_mom);
            let energy = level[0].r_energy.map(|_| fit_order(&eps, &col(&|r| r.r_energy.unwrap_or(0.0))));
            let poisson = level[0]
                .r_poisson
                .map(|_| fit_order(&eps, &col(&|r| r.r_poisson.unwrap_or(0.0))));
            OrderFit {
                time: t,
                rho: fit_order(&eps, &rho),
                mom: fit_order(&eps, &mom),
                energy,
                poisson,
                monotone_rho: decreasing(&rho),
                monotone_mom: decreasing(&mom),
            }
        })
        .collect();
    Ok(ConvergenceTable { rows, orders })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

impl ConvergenceTable {
    /// CSV with one row per level and sample time, then one `order` footer
    /// row per sample time holding the fitted slopes.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
        w.write_record(["epsilon", "time", "R_rho", "R_mom", "R_energy", "R_poisson"])?;
        for r in &self.rows {
            w.write_record([
                format!("{:e}", r.epsilon),
                format!("{}", r.time),
                format!("{:e}", r.r_rho),
                format!("{:e}", r.r_mom),
                opt(r.r_energy),
                opt(r.r_poisson),
            ])?;
        }
        for o in &self.orders {
            w.write_record([
                "order".to_string(),
                format!("{}", o.time),
                format!("{:.4}", o.rho),
                format!("{:.4}", o.mom),
                o.energy.map(|v| format!("{v:.4}")).unwrap_or_default(),
                o.poisson.map(|v| format!("{v:.4}")).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
