//! Grid geometry, the conserved-variable state vector, and the velocity
//! splitting / recovery that every right-hand side is built on.
//!
//! Fields are stored as flat `Vec<f64>` in row-major order with the x index
//! running fastest. Only conserved quantities (density, momentum density,
//! energy density) are stored; velocity is always derived through
//! [`recover_velocity`].

use crate::error::{Error, Result};

/// Boundary treatment of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    /// Periodic on every axis.
    Torus,
    /// Finite window surrounded by vacuum: nothing flows in, outflow is lost.
    OpenBox,
}

/// Uniform Cartesian grid of cubic cells of side `epsilon`.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    dim: usize,
    cells: [usize; 3],
    epsilon: f64,
    topology: Topology,
    origin: [f64; 3],
}

impl DomainSpec {
    pub fn new(cells: &[usize], epsilon: f64, topology: Topology) -> Result<Self> {
        let dim = cells.len();
        if !(1..=3).contains(&dim) {
            return Err(Error::Config(format!("dimension must be 1, 2 or 3, got {dim}")));
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidValue {
                what: "epsilon",
                value: epsilon,
            });
        }
        if let Some(&n) = cells.iter().find(|&&n| n < 3) {
            return Err(Error::Config(format!(
                "every axis needs at least 3 cells, got {n}"
            )));
        }
        let mut c = [1usize; 3];
        c[..dim].copy_from_slice(cells);
        Ok(Self {
            dim,
            cells: c,
            epsilon,
            topology,
            origin: [0.0; 3],
        })
    }

    /// Sets the coordinate of the low corner. Extra components beyond `dim` are ignored.
    pub fn with_origin(mut self, origin: &[f64]) -> Self {
        for (a, &o) in origin.iter().take(self.dim).enumerate() {
            self.origin[a] = o;
        }
        self
    }

    /// Grid whose low corner sits at minus half the extent, so the window is centered on 0.
    pub fn centered(self) -> Self {
        let origin: Vec<f64> = (0..self.dim).map(|a| -0.5 * self.extent(a)).collect();
        self.with_origin(&origin)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells[..self.dim]
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin[..self.dim]
    }

    pub fn n_cells(&self) -> usize {
        self.cells.iter().product()
    }

    /// Physical length along `axis`.
    pub fn extent(&self, axis: usize) -> f64 {
        self.cells[axis] as f64 * self.epsilon
    }

    /// Measure of one cell, `epsilon^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.epsilon.powi(self.dim as i32)
    }

    /// Measure of the whole domain.
    pub fn volume(&self) -> f64 {
        self.n_cells() as f64 * self.cell_volume()
    }

    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.cells[..axis].iter().product()
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let [nx, ny, _] = self.cells;
        [idx % nx, (idx / nx) % ny, idx / (nx * ny)]
    }

    #[inline]
    pub fn index(&self, c: [usize; 3]) -> usize {
        let [nx, ny, _] = self.cells;
        c[0] + nx * (c[1] + ny * c[2])
    }

    /// Cell adjacent to `idx` along `axis` in direction `step` (+1 or -1).
    /// Returns `None` when the neighbor lies outside an open box.
    #[inline]
    pub fn neighbor(&self, idx: usize, axis: usize, step: isize) -> Option<usize> {
        self.offset(idx, &[(axis, step)])
    }

    /// Cell reached from `idx` by applying every `(axis, step)` shift.
    pub fn offset(&self, idx: usize, shifts: &[(usize, isize)]) -> Option<usize> {
        let mut c = self.coords(idx);
        for &(axis, step) in shifts {
            let n = self.cells[axis] as isize;
            let mut k = c[axis] as isize + step;
            if k < 0 || k >= n {
                match self.topology {
                    Topology::Torus => k = k.rem_euclid(n),
                    Topology::OpenBox => return None,
                }
            }
            c[axis] = k as usize;
        }
        Some(self.index(c))
    }

    /// Cell-center coordinate of `idx` along every axis (unused axes are 0).
    pub fn center(&self, idx: usize) -> [f64; 3] {
        let c = self.coords(idx);
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = self.origin[a] + (c[a] as f64 + 0.5) * self.epsilon;
        }
        x
    }

    /// Index of the cell containing the point `x`, if it lies inside the grid.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        let mut c = [0usize; 3];
        for a in 0..self.dim {
            let s = (x[a] - self.origin[a]) / self.epsilon;
            if !s.is_finite() || s < 0.0 || s >= self.cells[a] as f64 {
                return None;
            }
            c[a] = s as usize;
        }
        Some(self.index(c))
    }
}

/// Conserved fields of one species.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesFields {
    pub rho: Vec<f64>,
    /// One array of momentum density per axis.
    pub mom: Vec<Vec<f64>>,
    pub energy: Option<Vec<f64>>,
}

impl SpeciesFields {
    pub fn zeros(domain: &DomainSpec, with_energy: bool) -> Self {
        let n = domain.n_cells();
        Self {
            rho: vec![0.0; n],
            mom: vec![vec![0.0; n]; domain.dim()],
            energy: with_energy.then(|| vec![0.0; n]),
        }
    }

    /// Builds conserved fields from density and per-axis velocity.
    pub fn from_primitive(rho: Vec<f64>, velocity: &[Vec<f64>]) -> Self {
        let mom = velocity
            .iter()
            .map(|u| rho.iter().zip(u).map(|(r, u)| r * u).collect())
            .collect();
        Self {
            rho,
            mom,
            energy: None,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.rho.len()
    }

    pub fn check_shape(&self, domain: &DomainSpec) -> Result<()> {
        let n = domain.n_cells();
        let shape = |what, len: usize| {
            if len == n {
                Ok(())
            } else {
                Err(Error::Shape {
                    what,
                    expected: n,
                    found: len,
                })
            }
        };
        shape("rho", self.rho.len())?;
        if self.mom.len() != domain.dim() {
            return Err(Error::Shape {
                what: "momentum components",
                expected: domain.dim(),
                found: self.mom.len(),
            });
        }
        for m in &self.mom {
            shape("momentum", m.len())?;
        }
        if let Some(e) = &self.energy {
            shape("energy", e.len())?;
        }
        Ok(())
    }

    /// Applies `f` to every stored array, in a fixed order.
    pub fn arrays_mut(&mut self) -> impl Iterator<Item = &mut Vec<f64>> {
        std::iter::once(&mut self.rho)
            .chain(self.mom.iter_mut())
            .chain(self.energy.iter_mut())
    }

    pub fn arrays(&self) -> impl Iterator<Item = &Vec<f64>> {
        std::iter::once(&self.rho)
            .chain(self.mom.iter())
            .chain(self.energy.iter())
    }

    pub fn mass(&self, domain: &DomainSpec) -> f64 {
        compensated_sum(&self.rho) * domain.cell_volume()
    }
}

/// Full ODE state: every species plus the simulation time.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidState {
    pub species: Vec<SpeciesFields>,
    pub time: f64,
}

impl FluidState {
    pub fn new(species: Vec<SpeciesFields>) -> Self {
        Self { species, time: 0.0 }
    }

    pub fn single(species: SpeciesFields) -> Self {
        Self::new(vec![species])
    }

    pub fn check_shape(&self, domain: &DomainSpec) -> Result<()> {
        self.species.iter().try_for_each(|s| s.check_shape(domain))
    }

    /// Density summed over species, cellwise.
    pub fn total_density(&self) -> Vec<f64> {
        let mut out = self.species[0].rho.clone();
        for s in &self.species[1..] {
            for (o, r) in out.iter_mut().zip(&s.rho) {
                *o += r;
            }
        }
        out
    }

    pub fn total_mass(&self, domain: &DomainSpec) -> f64 {
        self.species.iter().map(|s| s.mass(domain)).sum()
    }

    /// Total momentum per axis over all species.
    pub fn total_momentum(&self, domain: &DomainSpec) -> Vec<f64> {
        (0..domain.dim())
            .map(|a| {
                self.species
                    .iter()
                    .map(|s| compensated_sum(&s.mom[a]))
                    .sum::<f64>()
                    * domain.cell_volume()
            })
            .collect()
    }

    /// Smallest density over all species and cells.
    pub fn min_density(&self) -> f64 {
        self.species
            .iter()
            .flat_map(|s| s.rho.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }

    /// Fails with the first non-positive (or NaN) density found.
    pub fn check_positive(&self) -> Result<()> {
        for (s, sp) in self.species.iter().enumerate() {
            if let Some(cell) = sp.rho.iter().position(|&r| !(r > 0.0)) {
                return Err(Error::Positivity {
                    species: s,
                    cell,
                    time: self.time,
                    rho: sp.rho[cell],
                });
            }
        }
        Ok(())
    }
}

/// Positive and negative parts of a scalar speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocitySplit {
    pub plus: f64,
    pub minus: f64,
}

impl VelocitySplit {
    #[inline]
    pub fn abs(self) -> f64 {
        self.plus + self.minus
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.plus - self.minus
    }
}

#[inline]
pub(crate) fn split(u: f64) -> VelocitySplit {
    VelocitySplit {
        plus: u.max(0.0),
        minus: (-u).max(0.0),
    }
}

/// `u -> (max(0, u), max(0, -u))`.
pub fn split_velocity(u: f64) -> Result<VelocitySplit> {
    if !u.is_finite() {
        return Err(Error::InvalidValue {
            what: "velocity",
            value: u,
        });
    }
    Ok(split(u))
}

/// Densities below this are treated as vacuum: the cell is given zero
/// velocity, so it neither sheds mass nor limits the time step.
pub const VACUUM_DENSITY: f64 = 1e-150;

/// Per-axis velocity `mom[axis] / rho`, cellwise, for a species at time `time`.
pub fn recover_velocity(state: &SpeciesFields, time: f64) -> Result<Vec<Vec<f64>>> {
    recover_velocity_of(state, 0, time)
}

pub(crate) fn recover_velocity_of(
    state: &SpeciesFields,
    species: usize,
    time: f64,
) -> Result<Vec<Vec<f64>>> {
    if let Some(cell) = state.rho.iter().position(|&r| !(r > 0.0)) {
        return Err(Error::Positivity {
            species,
            cell,
            time,
            rho: state.rho[cell],
        });
    }
    Ok(state
        .mom
        .iter()
        .map(|m| {
            m.iter()
                .zip(&state.rho)
                .map(|(m, &r)| if r < VACUUM_DENSITY { 0.0 } else { m / r })
                .collect()
        })
        .collect())
}

/// Neumaier-compensated sum; used for conservation bookkeeping.
pub fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}
