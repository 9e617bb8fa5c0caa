//! Explicit time integration of the semi-discrete systems.

use crate::error::{Error, Result};
use crate::fields::{recover_velocity_of, DomainSpec, FluidState, VACUUM_DENSITY};
use crate::gravity::{apply_gravity_source, GravityConfig, GravityField, GravitySolver};
use crate::transport::{exact_transport_step_2d, transport_rhs, RhsOutput};
use crate::verify::{monitor, DiagnosticsRecord, InitialStats};

const SPEED_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    Euler,
    Rk4,
    /// Exact 2-D transport followed by a gravity kick (first-order splitting).
    ExactTransport2D,
}

impl Integrator {
    pub fn default_cfl(self) -> f64 {
        match self {
            Integrator::Rk4 => 0.5,
            _ => 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub integrator: Integrator,
    pub cfl: f64,
    pub t_end: f64,
    pub dt_max: Option<f64>,
    /// Snapshot interval; `None` keeps only the initial and final states.
    pub snapshot_every: Option<f64>,
    pub seed: u64,
}

impl SolverConfig {
    pub fn new(integrator: Integrator, t_end: f64) -> Self {
        Self {
            integrator,
            cfl: integrator.default_cfl(),
            t_end,
            dt_max: None,
            snapshot_every: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::InvalidValue {
                what: "cfl",
                value: self.cfl,
            });
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::InvalidValue {
                what: "t_end",
                value: self.t_end,
            });
        }
        if let Some(d) = self.dt_max {
            if !(d > 0.0) {
                return Err(Error::InvalidValue {
                    what: "dt_max",
                    value: d,
                });
            }
        }
        if let Some(s) = self.snapshot_every {
            if !(s > 0.0) {
                return Err(Error::InvalidValue {
                    what: "snapshot_every",
                    value: s,
                });
            }
        }
        Ok(())
    }
}

/// Speed entering the locality condition. For the rate-form integrators a
/// cell exchanges with every axis at once, so the per-cell sum of axis speeds
/// is used; the exact 2-D step only needs the largest single-axis speed.
pub fn transport_speed(state: &FluidState, integrator: Integrator) -> f64 {
    let mut u = 0.0f64;
    for sp in &state.species {
        for c in 0..sp.n_cells() {
            if !(sp.rho[c] >= VACUUM_DENSITY) {
                continue;
            }
            let inv = 1.0 / sp.rho[c];
            let speeds = sp.mom.iter().map(|m| (m[c] * inv).abs());
            let s = match integrator {
                Integrator::ExactTransport2D => speeds.fold(0.0, f64::max),
                _ => speeds.sum(),
            };
            u = u.max(s);
        }
    }
    u
}

/// `cfl * min(eps / U, sqrt(eps / Gamma), dt_max)`.
pub fn choose_dt(state: &FluidState, field: &GravityField, cfg: &SolverConfig, domain: &DomainSpec) -> f64 {
    let eps = domain.epsilon();
    let u = transport_speed(state, cfg.integrator).max(SPEED_FLOOR);
    let gamma = field.max_magnitude().max(SPEED_FLOOR);
    let mut dt = (eps / u).min((eps / gamma).sqrt());
    if let Some(cap) = cfg.dt_max {
        dt = dt.min(cap);
    }
    cfg.cfl * dt
}

/// Owns the gravity kernels for one grid and advances states.
pub struct Stepper {
    domain: DomainSpec,
    gravity: GravitySolver,
    integrator: Integrator,
}

impl Stepper {
    pub fn new(domain: &DomainSpec, gravity: &GravityConfig, integrator: Integrator) -> Result<Self> {
        if integrator == Integrator::ExactTransport2D && domain.dim() != 2 {
            return Err(Error::Config(format!(
                "ExactTransport2D needs a 2-D domain, got {}-D",
                domain.dim()
            )));
        }
        Ok(Self {
            domain: domain.clone(),
            gravity: GravitySolver::new(domain, gravity)?,
            integrator,
        })
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn gravity(&self) -> &GravitySolver {
        &self.gravity
    }

    pub fn integrator(&self) -> Integrator {
        self.integrator
    }

    pub fn field(&self, state: &FluidState) -> Result<GravityField> {
        self.gravity.field_for(state)
    }

    /// Full right-hand side (transport plus gravity) and the field it used.
    pub fn rhs(&self, state: &FluidState) -> Result<(RhsOutput, GravityField)> {
        let field = self.field(state)?;
        let rhs = apply_gravity_source(transport_rhs(state, &self.domain)?, state, &field);
        Ok((rhs, field))
    }

    pub fn step(&self, state: &FluidState, dt: f64) -> Result<FluidState> {
        if !(dt.is_finite() && dt >= 0.0) {
            return Err(Error::InvalidValue { what: "dt", value: dt });
        }
        let next = match self.integrator {
            Integrator::Euler => {
                let (k, _) = self.rhs(state)?;
                axpy(state, &[(dt, &k)], dt)
            }
            Integrator::Rk4 => {
                let (k1, _) = self.rhs(state)?;
                let s2 = axpy(state, &[(0.5 * dt, &k1)], 0.5 * dt);
                let (k2, _) = self.rhs(&s2)?;
                let s3 = axpy(state, &[(0.5 * dt, &k2)], 0.5 * dt);
                let (k3, _) = self.rhs(&s3)?;
                let s4 = axpy(state, &[(dt, &k3)], dt);
                let (k4, _) = self.rhs(&s4)?;
                let w = dt / 6.0;
                axpy(state, &[(w, &k1), (2.0 * w, &k2), (2.0 * w, &k3), (w, &k4)], dt)
            }
            Integrator::ExactTransport2D => {
                let mut moved = exact_transport_step_2d(state, &self.domain, dt)?;
                let field = self.field(&moved)?;
                for sp in &mut moved.species {
                    for (m, g) in sp.mom.iter_mut().zip(&field.grad_phi) {
                        for ((m, r), g) in m.iter_mut().zip(&sp.rho).zip(g) {
                            *m -= dt * r * g;
                        }
                    }
                }
                moved
            }
        };
        next.check_positive()?;
        Ok(next)
    }
}

/// `state + sum_k w_k * rhs_k`, advancing time by `dt`.
fn axpy(state: &FluidState, terms: &[(f64, &RhsOutput)], dt: f64) -> FluidState {
    let mut out = state.clone();
    out.time = state.time + dt;
    for (s, sp) in out.species.iter_mut().enumerate() {
        let mut arrays: Vec<&mut Vec<f64>> = sp.arrays_mut().collect();
        for &(w, k) in terms {
            for (dst, src) in arrays.iter_mut().zip(k.species[s].arrays()) {
                for (d, v) in dst.iter_mut().zip(src) {
                    *d += w * v;
                }
            }
        }
    }
    out
}

/// One step with a freshly built [`Stepper`].
pub fn step(
    state: &FluidState,
    domain: &DomainSpec,
    gravity: &GravityConfig,
    solver: &SolverConfig,
    dt: f64,
) -> Result<FluidState> {
    Stepper::new(domain, gravity, solver.integrator)?.step(state, dt)
}

/// Everything a run produced, kept in memory.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub snapshots: Vec<FluidState>,
    pub diagnostics: Vec<DiagnosticsRecord>,
    pub final_state: FluidState,
}

/// Runs to `t_end`, collecting snapshots and diagnostics.
pub fn run(
    initial: &FluidState,
    domain: &DomainSpec,
    gravity: &GravityConfig,
    solver: &SolverConfig,
) -> Result<RunOutput> {
    let mut snapshots = Vec::new();
    let mut diagnostics = Vec::new();
    let final_state = run_with(
        initial,
        domain,
        gravity,
        solver,
        |s| {
            snapshots.push(s.clone());
            Ok(())
        },
        |r| {
            diagnostics.push(r.clone());
            Ok(())
        },
    )?;
    Ok(RunOutput {
        snapshots,
        diagnostics,
        final_state,
    })
}

/// Streaming form of [`run`]: `on_snapshot` receives the initial state, each
/// state landing on the snapshot cadence, and the final state; `on_record`
/// receives the monitor record of every state including the initial one.
pub fn run_with<S, R>(
    initial: &FluidState,
    domain: &DomainSpec,
    gravity: &GravityConfig,
    solver: &SolverConfig,
    mut on_snapshot: S,
    mut on_record: R,
) -> Result<FluidState>
where
    S: FnMut(&FluidState) -> Result<()>,
    R: FnMut(&DiagnosticsRecord) -> Result<()>,
{
    solver.validate()?;
    gravity.validate()?;
    initial.check_shape(domain)?;
    initial.check_positive()?;
    let stepper = Stepper::new(domain, gravity, solver.integrator)?;
    let stats = InitialStats::new(initial, domain, gravity)?;

    let mut state = initial.clone();
    let t0 = state.time;
    let t_end = t0 + solver.t_end;
    let mut field = stepper.field(&state)?;
    let mut record = monitor(&state, &field, domain, &stats);
    on_record(&record)?;
    on_snapshot(&state)?;

    let mut next_snap = solver.snapshot_every.map(|e| (t0 + e, 1u64));
    let mut steps = 0usize;
    while state.time < t_end {
        let mut dt = choose_dt(&state, &field, solver, domain);
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Step {
                step: steps + 1,
                time: state.time,
                source: Box::new(Error::StepCollapse { dt }),
            });
        }
        let mut target = t_end;
        if let Some((ts, _)) = next_snap {
            target = target.min(ts);
        }
        let remaining = target - state.time;
        let landing = dt >= remaining;
        if landing {
            dt = remaining;
        } else if remaining - dt < 1e-6 * dt {
            // split the tail in two rather than leave a sliver step
            dt = 0.5 * remaining;
        }
        let step_no = steps + 1;
        let fail = move |e: Error, t: f64| Error::Step {
            step: step_no,
            time: t,
            source: Box::new(e),
        };
        let mut next = stepper.step(&state, dt).map_err(|e| fail(e, state.time))?;
        if landing {
            next.time = target;
        }
        state = next;
        steps += 1;
        field = stepper.field(&state).map_err(|e| fail(e, state.time))?;
        record = monitor(&state, &field, domain, &stats);
        record.step = steps;
        record.dt = dt;
        on_record(&record)?;
        if state.time >= t_end {
            break;
        }
        if let (Some((ts, k)), Some(every)) = (next_snap, solver.snapshot_every) {
            if state.time >= ts {
                on_snapshot(&state)?;
                next_snap = Some((t0 + (k + 1) as f64 * every, k + 1));
            }
        }
    }
    if steps > 0 {
        on_snapshot(&state)?;
    }
    Ok(state)
}

/// Speed bound check used in tests and monitors: largest per-axis speed.
pub fn max_axis_speed(state: &FluidState) -> Result<f64> {
    let mut u = 0.0f64;
    for (s, sp) in state.species.iter().enumerate() {
        for comp in recover_velocity_of(sp, s, state.time)? {
            u = comp.iter().fold(u, |m, v| m.max(v.abs()));
        }
    }
    Ok(u)
}
