//! Point-mass gravity and the bridge between bodies and fluid fields.
//!
//! The pair force matches the fluid gravity law of the same dimension:
//! `2 pi G m sign(dx)` in 1-D, `2 G m d / (|d|^2 + s^2)` in 2-D and the
//! Plummer form `G m d / (|d|^2 + s^2)^(3/2)` in 3-D.

use std::collections::VecDeque;
use std::io::{Read, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{DomainSpec, FluidState, SpeciesFields, Topology};

#[derive(Debug, Clone, PartialEq)]
pub struct Body {
    pub mass: f64,
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
}

impl Body {
    pub fn new(mass: f64, position: &[f64], velocity: &[f64]) -> Result<Self> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::InvalidValue { what: "body mass", value: mass });
        }
        if position.len() != velocity.len() || position.is_empty() || position.len() > 3 {
            return Err(Error::Config("body position and velocity need 1 to 3 matching components".into()));
        }
        if let Some(&v) = position.iter().chain(velocity).find(|v| !v.is_finite()) {
            return Err(Error::InvalidValue { what: "body coordinate", value: v });
        }
        Ok(Self {
            mass,
            position: position.to_vec(),
            velocity: velocity.to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.position.len()
    }
}

/// Force-softening length, normally the fluid mollifier support `eps^alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Softening(pub f64);

impl Softening {
    pub fn from_mollifier(epsilon: f64, alpha: f64) -> Self {
        Self(epsilon.powf(alpha))
    }
}

/// Time derivatives of one body.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyRate {
    pub dr: Vec<f64>,
    pub du: Vec<f64>,
}

fn check_bodies(bodies: &[Body]) -> Result<usize> {
    let dim = bodies
        .first()
        .ok_or_else(|| Error::Config("at least one body is required".into()))?
        .dim();
    if bodies.iter().any(|b| b.dim() != dim) {
        return Err(Error::Config("bodies disagree on dimension".into()));
    }
    Ok(dim)
}

/// `dr/dt = U`, `dU/dt = -sum_j force(r_i - r_j)`.
pub fn nbody_rhs(bodies: &[Body], g: f64, softening: Softening) -> Result<Vec<BodyRate>> {
    let dim = check_bodies(bodies)?;
    let s2 = softening.0 * softening.0;
    bodies
        .par_iter()
        .enumerate()
        .map(|(i, bi)| {
            let mut acc = vec![0.0; dim];
            for (j, bj) in bodies.iter().enumerate() {
                if i == j {
                    continue;
                }
                let d: Vec<f64> = (0..dim).map(|a| bi.position[a] - bj.position[a]).collect();
                let r2: f64 = d.iter().map(|v| v * v).sum();
                if r2 == 0.0 && (s2 == 0.0 || dim == 1) {
                    return Err(Error::Singularity { i: i.min(j), j: i.max(j) });
                }
                let scale = match dim {
                    1 => 2.0 * std::f64::consts::PI * g * bj.mass / r2.sqrt(),
                    2 => 2.0 * g * bj.mass / (r2 + s2),
                    _ => g * bj.mass / (r2 + s2).powf(1.5),
                };
                for a in 0..dim {
                    acc[a] -= scale * d[a];
                }
            }
            Ok(BodyRate {
                dr: bi.velocity.clone(),
                du: acc,
            })
        })
        .collect()
}

fn advance(bodies: &[Body], rates: &[(f64, &[BodyRate])]) -> Vec<Body> {
    bodies
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let mut out = b.clone();
            for &(w, k) in rates {
                for a in 0..b.dim() {
                    out.position[a] += w * k[i].dr[a];
                    out.velocity[a] += w * k[i].du[a];
                }
            }
            out
        })
        .collect()
}

/// One classical RK4 step.
pub fn nbody_step_rk4(bodies: &[Body], g: f64, softening: Softening, dt: f64) -> Result<Vec<Body>> {
    let k1 = nbody_rhs(bodies, g, softening)?;
    let k2 = nbody_rhs(&advance(bodies, &[(0.5 * dt, &k1)]), g, softening)?;
    let k3 = nbody_rhs(&advance(bodies, &[(0.5 * dt, &k2)]), g, softening)?;
    let k4 = nbody_rhs(&advance(bodies, &[(dt, &k3)]), g, softening)?;
    let w = dt / 6.0;
    Ok(advance(bodies, &[(w, &k1), (2.0 * w, &k2), (2.0 * w, &k3), (w, &k4)]))
}

/// Integrates to time `t` with `steps` equal RK4 steps.
pub fn integrate_nbody(bodies: &[Body], g: f64, softening: Softening, t: f64, steps: usize) -> Result<Vec<Body>> {
    let dt = t / steps.max(1) as f64;
    let mut cur = bodies.to_vec();
    for _ in 0..steps {
        cur = nbody_step_rk4(&cur, g, softening, dt)?;
    }
    Ok(cur)
}

/// Total momentum `sum m_i U_i`.
pub fn total_momentum(bodies: &[Body]) -> Vec<f64> {
    let dim = bodies.first().map_or(0, Body::dim);
    (0..dim)
        .map(|a| bodies.iter().map(|b| b.mass * b.velocity[a]).sum())
        .collect()
}

/// Deposits each body into the cell containing it (density `m / eps^d`,
/// momentum `m U / eps^d`) on top of a uniform resting floor density.
pub fn bodies_to_fields(bodies: &[Body], domain: &DomainSpec, floor: f64) -> Result<FluidState> {
    if !(floor.is_finite() && floor > 0.0) {
        return Err(Error::InvalidValue { what: "floor density", value: floor });
    }
    let n = domain.n_cells();
    let dim = domain.dim();
    let mut sp = SpeciesFields {
        rho: vec![floor; n],
        mom: vec![vec![0.0; n]; dim],
        energy: None,
    };
    let inv_vol = 1.0 / domain.cell_volume();
    for (index, b) in bodies.iter().enumerate() {
        if b.dim() != dim {
            return Err(Error::Config(format!("body {index} is {}-D, domain is {dim}-D", b.dim())));
        }
        let c = domain.locate(&b.position).ok_or(Error::BodyOutside { index })?;
        sp.rho[c] += b.mass * inv_vol;
        for a in 0..dim {
            sp.mom[a][c] += b.mass * b.velocity[a] * inv_vol;
        }
    }
    Ok(FluidState::single(sp))
}

/// Connected groups of cells (face neighbors) whose total density exceeds
/// `threshold`, each with every member cell's integer displacement from the
/// group's first cell, so that groups straddling a periodic seam stay whole.
pub(crate) fn components(rho: &[f64], domain: &DomainSpec, threshold: f64) -> Vec<Vec<(usize, [isize; 3])>> {
    let n = rho.len();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for seed in 0..n {
        if seen[seed] || !(rho[seed] > threshold) {
            continue;
        }
        seen[seed] = true;
        let mut group = Vec::new();
        let mut queue = VecDeque::from([(seed, [0isize; 3])]);
        while let Some((c, off)) = queue.pop_front() {
            group.push((c, off));
            for axis in 0..domain.dim() {
                for step in [-1isize, 1] {
                    if let Some(nb) = domain.neighbor(c, axis, step) {
                        if !seen[nb] && rho[nb] > threshold {
                            seen[nb] = true;
                            let mut o = off;
                            o[axis] += step;
                            queue.push_back((nb, o));
                        }
                    }
                }
            }
        }
        out.push(group);
    }
    out
}

/// Turns each above-threshold component into a body: mass is the integral of
/// density, position the mass-weighted centroid, velocity total momentum over
/// mass. Densities and momenta are summed over species.
pub fn extract_bodies(state: &FluidState, domain: &DomainSpec, threshold: f64) -> Vec<Body> {
    let rho = state.total_density();
    components(&rho, domain, threshold)
        .iter()
        .map(|g| component_body(g, &rho, state, domain))
        .collect()
}

pub(crate) fn component_body(
    group: &[(usize, [isize; 3])],
    rho: &[f64],
    state: &FluidState,
    domain: &DomainSpec,
) -> Body {
    let dim = domain.dim();
    let vol = domain.cell_volume();
    let eps = domain.epsilon();
    let base = domain.center(group[0].0);
    let mut mass = 0.0;
    let mut first = [0.0; 3];
    let mut mom = [0.0; 3];
    for &(c, off) in group {
        let m = rho[c] * vol;
        mass += m;
        for a in 0..dim {
            first[a] += m * off[a] as f64 * eps;
            mom[a] += state.species.iter().map(|s| s.mom[a][c]).sum::<f64>() * vol;
        }
    }
    let position = (0..dim)
        .map(|a| {
            let mut x = base[a] + first[a] / mass;
            if domain.topology() == Topology::Torus {
                let lo = domain.origin()[a];
                x = lo + (x - lo).rem_euclid(domain.extent(a));
            }
            x
        })
        .collect();
    Body {
        mass,
        position,
        velocity: (0..dim).map(|a| mom[a] / mass).collect(),
    }
}

/// For each reference body, the distance to the nearest extracted body
/// carrying at least half its mass (infinite when none qualifies).
pub fn match_distances(reference: &[Body], extracted: &[Body]) -> Vec<f64> {
    reference
        .iter()
        .map(|r| {
            extracted
                .iter()
                .filter(|b| b.mass >= 0.5 * r.mass)
                .map(|b| {
                    r.position
                        .iter()
                        .zip(&b.position)
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum::<f64>()
                        .sqrt()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Reads bodies from CSV with columns `m`, position components, velocity
/// components. The dimension follows from the column count (3, 5 or 7).
pub fn read_bodies_csv(input: impl Read) -> Result<Vec<Body>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let width = r.headers()?.len();
    if !matches!(width, 3 | 5 | 7) {
        return Err(Error::Config(format!("body CSV needs 3, 5 or 7 columns, found {width}")));
    }
    let dim = (width - 1) / 2;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let vals = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| Error::Config(format!("body CSV value '{f}': {e}"))))
            .collect::<Result<Vec<_>>>()?;
        out.push(Body::new(vals[0], &vals[1..1 + dim], &vals[1 + dim..])?);
    }
    Ok(out)
}

pub fn write_bodies_csv(bodies: &[Body], out: impl Write) -> Result<()> {
    let dim = bodies.first().map_or(2, Body::dim);
    let axes = ["x", "y", "z"];
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["m".to_string()];
    header.extend(axes[..dim].iter().map(|a| format!("r_{a}")));
    header.extend(axes[..dim].iter().map(|a| format!("u_{a}")));
    w.write_record(&header)?;
    for b in bodies {
        let row: Vec<String> = std::iter::once(b.mass)
            .chain(b.position.iter().copied())
            .chain(b.velocity.iter().copied())
            .map(|v| v.to_string())
            .collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
