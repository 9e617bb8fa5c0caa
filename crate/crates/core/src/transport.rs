//! Upwind mass-exchange right-hand sides.
//!
//! Every transported density `w` (mass, each momentum component, energy)
//! obeys the same balance: during `dt` a cell loses `w |u_a| dt / eps` along
//! each axis `a` and gains `(w u_a+)` from its low neighbor and `(w u_a-)`
//! from its high neighbor. Velocity is recovered from the conserved state once
//! per evaluation and shared by all transported quantities.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{recover_velocity_of, split, DomainSpec, FluidState, SpeciesFields};

/// Time derivatives of every stored field, shaped like the state.
#[derive(Debug, Clone, PartialEq)]
pub struct RhsOutput {
    pub species: Vec<SpeciesFields>,
}

impl RhsOutput {
    pub fn zeros_like(state: &FluidState) -> Self {
        Self {
            species: state
                .species
                .iter()
                .map(|s| SpeciesFields {
                    rho: vec![0.0; s.rho.len()],
                    mom: s.mom.iter().map(|m| vec![0.0; m.len()]).collect(),
                    energy: s.energy.as_ref().map(|e| vec![0.0; e.len()]),
                })
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.species
            .iter()
            .all(|s| s.arrays().all(|a| a.iter().all(|v| v.is_finite())))
    }
}

/// Right-hand side of the 1-D system for density, momentum and energy.
pub fn rhs_1d(state: &FluidState, domain: &DomainSpec) -> Result<RhsOutput> {
    if domain.dim() != 1 {
        return Err(Error::Config(format!(
            "rhs_1d needs a 1-D domain, got {}-D",
            domain.dim()
        )));
    }
    transport_rhs(state, domain)
}

/// Right-hand side of the 2-D / 3-D system: axis-aligned exchanges only.
pub fn rhs_nd(state: &FluidState, domain: &DomainSpec) -> Result<RhsOutput> {
    if domain.dim() < 2 {
        return Err(Error::Config(format!(
            "rhs_nd needs a 2-D or 3-D domain, got {}-D",
            domain.dim()
        )));
    }
    transport_rhs(state, domain)
}

/// Dimension-generic transport right-hand side (no gravity).
pub fn transport_rhs(state: &FluidState, domain: &DomainSpec) -> Result<RhsOutput> {
    state.check_shape(domain)?;
    let species = state
        .species
        .iter()
        .enumerate()
        .map(|(s, sp)| species_rhs(sp, s, state.time, domain))
        .collect::<Result<Vec<_>>>()?;
    Ok(RhsOutput { species })
}

fn species_rhs(
    sp: &SpeciesFields,
    index: usize,
    time: f64,
    domain: &DomainSpec,
) -> Result<SpeciesFields> {
    let vel = recover_velocity_of(sp, index, time)?;
    // |u_1| + ... + |u_d| per cell
    let speed_sum: Vec<f64> = (0..sp.n_cells())
        .map(|c| vel.iter().map(|u| u[c].abs()).sum())
        .collect();
    let exchange = |w: &Vec<f64>| exchange_rate(w, &vel, &speed_sum, domain);
    Ok(SpeciesFields {
        rho: exchange(&sp.rho),
        mom: sp.mom.iter().map(exchange).collect(),
        energy: sp.energy.as_ref().map(exchange),
    })
}

fn exchange_rate(w: &[f64], vel: &[Vec<f64>], speed_sum: &[f64], domain: &DomainSpec) -> Vec<f64> {
    let inv_eps = 1.0 / domain.epsilon();
    let mut out = vec![0.0; w.len()];
    out.par_iter_mut().enumerate().for_each(|(c, o)| {
        let mut acc = -w[c] * speed_sum[c];
        for (axis, u) in vel.iter().enumerate() {
            if let Some(l) = domain.neighbor(c, axis, -1) {
                acc += w[l] * split(u[l]).plus;
            }
            if let Some(r) = domain.neighbor(c, axis, 1) {
                acc += w[r] * split(u[r]).minus;
            }
        }
        *o = acc * inv_eps;
    });
    out
}

/// Advances a 2-D state by `dt` with the exact finite-transport balance,
/// which keeps the `dt / eps^2` edge and vertex overlap corrections.
///
/// Requires `dt max|u| <= eps` and `dt max|v| <= eps` (equality allowed).
pub fn exact_transport_step_2d(
    state: &FluidState,
    domain: &DomainSpec,
    dt: f64,
) -> Result<FluidState> {
    if domain.dim() != 2 {
        return Err(Error::Config(format!(
            "exact transport is 2-D only, got {}-D",
            domain.dim()
        )));
    }
    if !(dt.is_finite() && dt >= 0.0) {
        return Err(Error::InvalidValue {
            what: "dt",
            value: dt,
        });
    }
    state.check_shape(domain)?;
    let lambda = dt / domain.epsilon();
    let mut species = Vec::with_capacity(state.species.len());
    for (s, sp) in state.species.iter().enumerate() {
        let vel = recover_velocity_of(sp, s, state.time)?;
        let umax = vel[0].iter().fold(0.0f64, |m, u| m.max(u.abs()));
        let vmax = vel[1].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let courant = umax.max(vmax) * lambda;
        if courant > 1.0 + 1e-12 {
            return Err(Error::CflViolation { courant });
        }
        let plan = ExchangePlan::new(&vel, lambda, domain);
        species.push(SpeciesFields {
            rho: plan.apply(&sp.rho),
            mom: sp.mom.iter().map(|m| plan.apply(m)).collect(),
            energy: sp.energy.as_ref().map(|e| plan.apply(e)),
        });
    }
    Ok(FluidState {
        species,
        time: state.time + dt,
    })
}

/// Per-cell fractions of content moved to the x-edge, y-edge and vertex
/// neighbor during one exact transport step, with the destination cells.
struct ExchangePlan<'a> {
    frac_x: Vec<f64>,
    frac_y: Vec<f64>,
    frac_v: Vec<f64>,
    sign_x: Vec<isize>,
    sign_y: Vec<isize>,
    domain: &'a DomainSpec,
}

impl<'a> ExchangePlan<'a> {
    fn new(vel: &[Vec<f64>], lambda: f64, domain: &'a DomainSpec) -> Self {
        let n = domain.n_cells();
        let mut plan = Self {
            frac_x: vec![0.0; n],
            frac_y: vec![0.0; n],
            frac_v: vec![0.0; n],
            sign_x: vec![0; n],
            sign_y: vec![0; n],
            domain,
        };
        for c in 0..n {
            let (u, v) = (vel[0][c], vel[1][c]);
            let ax = u.abs() * lambda;
            let ay = v.abs() * lambda;
            plan.frac_x[c] = ax * (1.0 - ay);
            plan.frac_y[c] = ay * (1.0 - ax);
            plan.frac_v[c] = ax * ay;
            plan.sign_x[c] = sign(u);
            plan.sign_y[c] = sign(v);
        }
        plan
    }

    fn apply(&self, w: &[f64]) -> Vec<f64> {
        let d = self.domain;
        let mut out = vec![0.0; w.len()];
        // Scatter each source cell's exchanged amounts; whatever is sent is
        // subtracted from the source with the same rounded value.
        for c in 0..w.len() {
            let ex = w[c] * self.frac_x[c];
            let ey = w[c] * self.frac_y[c];
            let ev = w[c] * self.frac_v[c];
            let mut keep = w[c];
            let (sx, sy) = (self.sign_x[c], self.sign_y[c]);
            if sx != 0 {
                keep -= ex;
                if let Some(t) = d.neighbor(c, 0, sx) {
                    out[t] += ex;
                }
            }
            if sy != 0 {
                keep -= ey;
                if let Some(t) = d.neighbor(c, 1, sy) {
                    out[t] += ey;
                }
            }
            if sx != 0 && sy != 0 {
                keep -= ev;
                if let Some(t) = d.offset(c, &[(0, sx), (1, sy)]) {
                    out[t] += ev;
                }
            }
            out[c] += keep;
        }
        out
    }
}

fn sign(u: f64) -> isize {
    if u > 0.0 {
        1
    } else if u < 0.0 {
        -1
    } else {
        0
    }
}
