use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fields::{recover_velocity_of, DomainSpec, FluidState};
use crate::gravity::{GravityConfig, GravityField, GreenBoundary};
use crate::transport::RhsOutput;

use super::testfn::TestFunction;

/// Weak-form residuals of one state against one test function.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub epsilon: f64,
    pub time: f64,
    /// Continuity residual per species.
    pub continuity: Vec<f64>,
    /// Momentum residual per species and axis.
    pub momentum: Vec<Vec<f64>>,
    /// Energy residual per species that carries an energy field.
    pub energy: Vec<Option<f64>>,
    /// Poisson residual; present when gravity is enabled.
    pub poisson: Option<f64>,
}

impl ResidualReport {
    pub fn continuity_norm(&self) -> f64 {
        self.continuity.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn momentum_norm(&self) -> f64 {
        self.momentum.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn energy_norm(&self) -> Option<f64> {
        let vals: Vec<f64> = self.energy.iter().flatten().copied().collect();
        (!vals.is_empty()).then(|| vals.iter().map(|v| v * v).sum::<f64>().sqrt())
    }

    pub fn is_finite(&self) -> bool {
        self.continuity.iter().all(|v| v.is_finite())
            && self.momentum.iter().flatten().all(|v| v.is_finite())
            && self.energy.iter().flatten().all(|v| v.is_finite())
            && self.poisson.is_none_or(f64::is_finite)
    }
}

/// Midpoint-rule residuals of the continuity, momentum, energy and Poisson
/// equations tested against `psi`:
///
/// * `R_rho = sum [ drho/dt psi - rho u . grad psi ] eps^d`
/// * `R_mom_k = sum [ d(rho u_k)/dt psi - rho u_k u . grad psi + rho d_k phi psi ] eps^d`
/// * `R_phi = sum [ div_h grad phi - 4 pi G (rho - mean) ] psi eps^d`
///
/// `rhs` must be the full right-hand side (gravity included) evaluated at
/// `state`, and `field` the potential gradient it used. The mean is removed
/// only in torus mode.
pub fn weak_residual(
    state: &FluidState,
    rhs: &RhsOutput,
    field: &GravityField,
    gravity: &GravityConfig,
    psi: &TestFunction,
    domain: &DomainSpec,
) -> Result<ResidualReport> {
    state.check_shape(domain)?;
    if rhs.species.len() != state.species.len() {
        return Err(Error::Shape {
            what: "rhs species",
            expected: state.species.len(),
            found: rhs.species.len(),
        });
    }
    for s in &rhs.species {
        s.check_shape(domain)?;
    }
    if psi.dim() != domain.dim() {
        return Err(Error::Config(format!(
            "test function is {}-D but the domain is {}-D",
            psi.dim(),
            domain.dim()
        )));
    }
    if !psi.fits_inside(domain, 1.5 * domain.epsilon()) {
        return Err(Error::Config(
            "test function support must stay inside the open-box interior".into(),
        ));
    }
    let dim = domain.dim();
    let n = domain.n_cells();
    let vol = domain.cell_volume();
    let samples: Vec<(f64, [f64; 3])> = (0..n).map(|c| psi.eval(domain.center(c), domain)).collect();

    let mut continuity = Vec::new();
    let mut momentum = Vec::new();
    let mut energy = Vec::new();
    for (s, (sp, dt)) in state.species.iter().zip(&rhs.species).enumerate() {
        let vel = recover_velocity_of(sp, s, state.time)?;
        let flux_term = |w: &[f64], dwdt: &[f64]| -> f64 {
            let mut acc = 0.0;
            for c in 0..n {
                let (p, g) = samples[c];
                if p == 0.0 && g.iter().all(|v| *v == 0.0) {
                    continue;
                }
                let adv: f64 = (0..dim).map(|a| vel[a][c] * g[a]).sum();
                acc += dwdt[c] * p - w[c] * adv;
            }
            acc * vol
        };
        continuity.push(flux_term(&sp.rho, &dt.rho));
        let mut per_axis = Vec::with_capacity(dim);
        for k in 0..dim {
            let source: f64 = (0..n)
                .map(|c| sp.rho[c] * field.grad_phi[k][c] * samples[c].0)
                .sum::<f64>()
                * vol;
            per_axis.push(flux_term(&sp.mom[k], &dt.mom[k]) + source);
        }
        momentum.push(per_axis);
        energy.push(match (&sp.energy, &dt.energy) {
            (Some(e), Some(de)) => Some(flux_term(e, de)),
            _ => None,
        });
    }

    let poisson = gravity.enabled.then(|| {
        let rho = state.total_density();
        let mean = match gravity.boundary {
            GreenBoundary::TorusMeanSubtracted => rho.iter().sum::<f64>() / n as f64,
            GreenBoundary::FreeSpace => 0.0,
        };
        let four_pi_g = 4.0 * PI * gravity.g;
        let inv_2eps = 0.5 / domain.epsilon();
        let mut acc = 0.0;
        for c in 0..n {
            let p = samples[c].0;
            if p == 0.0 {
                continue;
            }
            let mut div = 0.0;
            for a in 0..dim {
                let hi = domain.neighbor(c, a, 1).map_or(0.0, |j| field.grad_phi[a][j]);
                let lo = domain.neighbor(c, a, -1).map_or(0.0, |j| field.grad_phi[a][j]);
                div += (hi - lo) * inv_2eps;
            }
            acc += (div - four_pi_g * (rho[c] - mean)) * p;
        }
        acc * vol
    });

    Ok(ResidualReport {
        epsilon: domain.epsilon(),
        time: state.time,
        continuity,
        momentum,
        energy,
        poisson,
    })
}
