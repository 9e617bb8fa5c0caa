use std::f64::consts::PI;

use crate::error::Result;
use crate::fields::{DomainSpec, FluidState, Topology};
use crate::gravity::{mollifier_kernel, GravityConfig, GravityField, GreenBoundary};

const MASS_TOL: f64 = 1e-10;
const SPEED_SLACK: f64 = 1e-8;
const GROWTH_TOL: f64 = 1e-6;
/// Safety factor on the multi-dimensional field bound, covering the lattice
/// sums that replace the continuum integrals.
const FIELD_SLACK: f64 = 2.0;

/// Quantities fixed by the initial state that the monitors compare against.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialStats {
    pub max_speed: f64,
    pub max_rho: f64,
    pub mass: f64,
    pub topology: Topology,
    pub gravity: bool,
    /// Velocity growth rate `K`: `max|u(t)| <= max|u(0)| + K t`.
    pub growth_rate: f64,
    /// Bound on the potential gradient, when gravity is on.
    pub grad_bound: Option<f64>,
}

impl InitialStats {
    pub fn new(state: &FluidState, domain: &DomainSpec, gravity: &GravityConfig) -> Result<Self> {
        let max_speed = crate::integrate::max_axis_speed(state)?;
        let max_rho = state.total_density().iter().copied().fold(0.0, f64::max);
        let mass = state.total_mass(domain);
        let (growth_rate, grad_bound) = if gravity.enabled {
            let b = field_bound(mass, domain, gravity)?;
            (2.0 * b, Some(b))
        } else {
            (0.0, None)
        };
        Ok(Self {
            max_speed,
            max_rho,
            mass,
            topology: domain.topology(),
            gravity: gravity.enabled,
            growth_rate,
            grad_bound,
        })
    }

    /// The 1-D constant `K = 8 pi G M + 2 |c|`, where `c` is the integration
    /// constant of the cumulative field: `2 pi G M` in free space and at most
    /// `4 pi G M` for the mean-subtracted torus field.
    pub fn k_constant_1d(mass: f64, gravity: &GravityConfig) -> f64 {
        let c = match gravity.boundary {
            GreenBoundary::FreeSpace => 2.0 * PI * gravity.g * mass,
            GreenBoundary::TorusMeanSubtracted => 4.0 * PI * gravity.g * mass,
        };
        8.0 * PI * gravity.g * mass + 2.0 * c
    }
}

/// A priori bound on `|phi_x| + |phi_y| (+ |phi_z|)`.
///
/// In 1-D this is `K/2`. In 2-D and 3-D the Green integral is split at a
/// radius `R`: mass beyond `R` contributes at most `c_far M / R^(d-1)`, mass
/// inside at most `c_near max(rho_moll) R`, with `max(rho_moll)` bounded by
/// `M` times the kernel peak. `R` is chosen to minimize the sum.
fn field_bound(mass: f64, domain: &DomainSpec, gravity: &GravityConfig) -> Result<f64> {
    let dim = domain.dim();
    if dim == 1 {
        return Ok(InitialStats::k_constant_1d(mass, gravity) / 2.0);
    }
    let g = gravity.g;
    // the mean-subtracted source has L1 norm up to 2M; images add 3^d copies
    let (m_eff, images) = match gravity.boundary {
        GreenBoundary::TorusMeanSubtracted => (2.0 * mass, 3f64.powi(dim as i32)),
        GreenBoundary::FreeSpace => (mass, 1.0),
    };
    let peak = mollifier_kernel(gravity.alpha, domain.epsilon(), dim)?.max();
    let rho_max = m_eff * peak;
    let euclid = if dim == 2 {
        let a = 2.0 * g * m_eff * images;
        let b = 2.0 * g * rho_max * 2.0 * PI;
        2.0 * (a * b).sqrt()
    } else {
        let a = g * m_eff * images;
        let b = g * rho_max * 4.0 * PI;
        let r = (2.0 * a / b).cbrt();
        a / (r * r) + b * r
    };
    Ok(FIELD_SLACK * (dim as f64).sqrt() * euclid)
}

/// Bound checks of one monitor record. Each flag is true while the bound holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundFlags {
    pub mass: bool,
    pub velocity: bool,
    pub gradphi: bool,
}

impl BoundFlags {
    /// Bitmask of violated bounds: 1 mass, 2 velocity, 4 field. Zero when all hold.
    pub fn violations(&self) -> u8 {
        (!self.mass as u8) | ((!self.velocity as u8) << 1) | ((!self.gradphi as u8) << 2)
    }

    pub fn all(&self) -> bool {
        self.mass && self.velocity && self.gradphi
    }
}

/// Per-step monitor values.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub step: usize,
    pub time: f64,
    pub dt: f64,
    pub mass_total: f64,
    pub momentum: Vec<f64>,
    pub min_rho: f64,
    /// Largest per-axis speed over cells and species.
    pub max_speed: f64,
    /// Largest `|grad phi|` over cells.
    pub max_gradphi: f64,
    /// Largest `|phi_x| + |phi_y| + ...` over cells.
    pub max_gradphi_l1: f64,
    pub flags: BoundFlags,
}

/// Evaluates every monitor on `state`. Never fails: a non-positive density
/// shows up as `min_rho` and an infinite `max_speed`.
pub fn monitor(
    state: &FluidState,
    field: &GravityField,
    domain: &DomainSpec,
    initial: &InitialStats,
) -> DiagnosticsRecord {
    let mass_total = state.total_mass(domain);
    let momentum = state.total_momentum(domain);
    let min_rho = state.min_density();
    let max_speed = crate::integrate::max_axis_speed(state).unwrap_or(f64::INFINITY);
    let max_gradphi = field.max_magnitude();
    let max_gradphi_l1 = field.max_l1();

    let mass = match initial.topology {
        Topology::Torus => (mass_total - initial.mass).abs() <= MASS_TOL * initial.mass,
        Topology::OpenBox => mass_total <= initial.mass * (1.0 + MASS_TOL),
    };
    let elapsed = state.time.max(0.0);
    let velocity = if initial.gravity {
        max_speed <= initial.max_speed + initial.growth_rate * elapsed + GROWTH_TOL
    } else {
        max_speed <= initial.max_speed * (1.0 + SPEED_SLACK)
    };
    let gradphi = match initial.grad_bound {
        Some(b) => {
            let measured = if domain.dim() == 1 { max_gradphi } else { max_gradphi_l1 };
            measured <= b
        }
        None => true,
    };
    DiagnosticsRecord {
        step: 0,
        time: state.time,
        dt: 0.0,
        mass_total,
        momentum,
        min_rho,
        max_speed,
        max_gradphi,
        max_gradphi_l1,
        flags: BoundFlags {
            mass,
            velocity,
            gradphi,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::SpeciesFields;
    use crate::gravity::GravitySolver;

    #[test]
    fn k_constant_values() {
        let g = GravityConfig::new(1.0 / (4.0 * PI), 0.25, GreenBoundary::FreeSpace);
        // 8 pi G M + 4 pi G M with 4 pi G = 1
        assert!((InitialStats::k_constant_1d(2.0, &g) - 6.0).abs() < 1e-14);
        let t = GravityConfig::new(1.0 / (4.0 * PI), 0.25, GreenBoundary::TorusMeanSubtracted);
        assert!((InitialStats::k_constant_1d(2.0, &t) - 8.0).abs() < 1e-14);
    }

    #[test]
    fn monitor_is_pure_and_flags_hold_initially() {
        let d = DomainSpec::new(&[16, 16], 0.1, Topology::Torus).unwrap();
        let n = d.n_cells();
        let rho: Vec<f64> = (0..n).map(|c| 1.0 + 0.5 * (c as f64 * 0.37).sin()).collect();
        let u: Vec<f64> = (0..n).map(|c| (c as f64 * 0.11).cos()).collect();
        let st = FluidState::single(SpeciesFields::from_primitive(rho, &[u.clone(), u]));
        let g = GravityConfig::new(1.0, 0.25, GreenBoundary::TorusMeanSubtracted);
        let field = GravitySolver::new(&d, &g).unwrap().field_for(&st).unwrap();
        let stats = InitialStats::new(&st, &d, &g).unwrap();
        let before = st.clone();
        let a = monitor(&st, &field, &d, &stats);
        let b = monitor(&st, &field, &d, &stats);
        assert_eq!(a, b);
        assert_eq!(st, before);
        assert!(a.flags.all(), "{a:?} bound {:?}", stats.grad_bound);
        assert_eq!(a.flags.violations(), 0);
    }

    #[test]
    fn flags_report_violations() {
        let d = DomainSpec::new(&[8], 0.1, Topology::Torus).unwrap();
        let st = FluidState::single(SpeciesFields::from_primitive(vec![1.0; 8], &[vec![0.5; 8]]));
        let stats = InitialStats::new(&st, &d, &GravityConfig::off()).unwrap();
        let mut fast = st.clone();
        fast.species[0].mom[0][2] = 0.6;
        fast.species[0].rho[5] = 1.1;
        let r = monitor(&fast, &GravityField::zeros(&d), &d, &stats);
        assert!(!r.flags.mass && !r.flags.velocity && r.flags.gradphi);
        assert_eq!(r.flags.violations(), 3);
    }
}
