//! Gravitational acceleration fields and the gravity source term.
//!
//! In 1-D the potential gradient is the cumulative mass integral. In 2-D and
//! 3-D the density is first smoothed with a mollifier of support
//! `eps^alpha`, then convolved with the free-space Green gradient, scaled so
//! that `div grad_phi = 4 pi G rho`:
//!
//! * 2-D: `grad_phi = 2 G m r_hat / r`
//! * 3-D: `grad_phi = G m r_hat / r^2`
//!
//! Two convolution backends produce the same field: direct summation, and an
//! FFT route that folds the mollifier and Green gradient into one
//! precomputed kernel.

mod fft;
pub mod kernel;

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::{DomainSpec, FluidState};
use crate::transport::RhsOutput;

use fft::{wrap, FftGrid};
pub use kernel::{bump_peak, green_weight, mollifier_kernel, MollifierKernel};

/// How the Poisson problem is closed at the domain boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GreenBoundary {
    /// Periodic: the mean density is removed and the kernel is the fully
    /// periodic Green gradient.
    TorusMeanSubtracted,
    /// Isolated system: no images, zero field at infinity.
    FreeSpace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvolutionBackend {
    Direct,
    #[default]
    Fft,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GravityConfig {
    pub g: f64,
    pub alpha: f64,
    pub enabled: bool,
    pub boundary: GreenBoundary,
    pub backend: ConvolutionBackend,
}

impl Default for GravityConfig {
    fn default() -> Self {
        Self {
            g: 1.0,
            alpha: 0.25,
            enabled: false,
            boundary: GreenBoundary::TorusMeanSubtracted,
            backend: ConvolutionBackend::Fft,
        }
    }
}

impl GravityConfig {
    pub fn off() -> Self {
        Self::default()
    }

    pub fn new(g: f64, alpha: f64, boundary: GreenBoundary) -> Self {
        Self {
            g,
            alpha,
            enabled: true,
            boundary,
            backend: ConvolutionBackend::Fft,
        }
    }

    pub fn with_backend(mut self, backend: ConvolutionBackend) -> Self {
        self.backend = backend;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.enabled {
            return Ok(());
        }
        if !(self.g.is_finite() && self.g > 0.0) {
            return Err(Error::InvalidValue {
                what: "G",
                value: self.g,
            });
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0 / 3.0) {
            return Err(Error::InvalidValue {
                what: "alpha",
                value: self.alpha,
            });
        }
        Ok(())
    }
}

/// Potential gradient per axis at cell centers.
#[derive(Debug, Clone, PartialEq)]
pub struct GravityField {
    pub grad_phi: Vec<Vec<f64>>,
}

impl GravityField {
    pub fn zeros(domain: &DomainSpec) -> Self {
        Self {
            grad_phi: vec![vec![0.0; domain.n_cells()]; domain.dim()],
        }
    }

    /// Largest Euclidean magnitude over cells.
    pub fn max_magnitude(&self) -> f64 {
        let n = self.grad_phi.first().map_or(0, |g| g.len());
        (0..n)
            .map(|c| self.grad_phi.iter().map(|g| g[c] * g[c]).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Largest `|phi_x| + |phi_y| + ...` over cells.
    pub fn max_l1(&self) -> f64 {
        let n = self.grad_phi.first().map_or(0, |g| g.len());
        (0..n)
            .map(|c| self.grad_phi.iter().map(|g| g[c].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.grad_phi.iter().flatten().all(|v| v.is_finite())
    }
}

/// 1-D potential gradient `4 pi G * integral of rho` at cell centers.
///
/// Torus mode integrates `rho - mean(rho)` and fixes the constant so the
/// gradient has zero cell sum. Free space uses `4 pi G (m(x) - M/2)`, where
/// `m(x)` is the mass to the left of `x`.
pub fn grad_phi_1d(rho: &[f64], domain: &DomainSpec, cfg: &GravityConfig) -> Result<GravityField> {
    if domain.dim() != 1 {
        return Err(Error::Config("grad_phi_1d needs a 1-D domain".into()));
    }
    check_len(rho, domain)?;
    if !cfg.enabled {
        return Ok(GravityField::zeros(domain));
    }
    let eps = domain.epsilon();
    let four_pi_g = 4.0 * PI * cfg.g;
    let n = rho.len();
    let mean = match cfg.boundary {
        GreenBoundary::TorusMeanSubtracted => rho.iter().sum::<f64>() / n as f64,
        GreenBoundary::FreeSpace => 0.0,
    };
    let mut out = Vec::with_capacity(n);
    let mut left = 0.0;
    for &r in rho {
        let q = (r - mean) * eps;
        out.push(left + 0.5 * q);
        left += q;
    }
    let shift = match cfg.boundary {
        GreenBoundary::TorusMeanSubtracted => out.iter().sum::<f64>() / n as f64,
        // `left` now holds the total mass
        GreenBoundary::FreeSpace => 0.5 * left,
    };
    for v in &mut out {
        *v = four_pi_g * (*v - shift);
    }
    Ok(GravityField {
        grad_phi: vec![out],
    })
}

fn check_len(rho: &[f64], domain: &DomainSpec) -> Result<()> {
    if rho.len() != domain.n_cells() {
        return Err(Error::Shape {
            what: "density",
            expected: domain.n_cells(),
            found: rho.len(),
        });
    }
    Ok(())
}

/// 2-D / 3-D potential gradient of the mollified density. Builds a fresh
/// solver; reuse a [`GravitySolver`] when evaluating repeatedly.
pub fn grad_phi_nd(rho: &[f64], domain: &DomainSpec, cfg: &GravityConfig) -> Result<GravityField> {
    if domain.dim() < 2 {
        return Err(Error::Config("grad_phi_nd needs a 2-D or 3-D domain".into()));
    }
    GravitySolver::new(domain, cfg)?.solve(rho)
}

/// Subtracts `rho_s * grad_phi` from every species' momentum derivative.
pub fn apply_gravity_source(
    mut rhs: RhsOutput,
    state: &FluidState,
    field: &GravityField,
) -> RhsOutput {
    for (out, sp) in rhs.species.iter_mut().zip(&state.species) {
        for (m, g) in out.mom.iter_mut().zip(&field.grad_phi) {
            m.par_iter_mut()
                .zip(sp.rho.par_iter().zip(g.par_iter()))
                .for_each(|(m, (r, g))| *m -= r * g);
        }
    }
    rhs
}

/// Reusable gravity solver holding the precomputed kernels for one grid.
pub struct GravitySolver {
    domain: DomainSpec,
    cfg: GravityConfig,
    inner: Inner,
}

enum Inner {
    Off,
    OneD,
    Nd(Box<NdSolver>),
}

struct NdSolver {
    mollifier: MollifierKernel,
    /// Torus only: image-summed Green weights per circular offset and axis.
    periodic_green: Option<Vec<[f64; 3]>>,
    fft: Option<FftRoute>,
}

struct FftRoute {
    grid: FftGrid,
    /// Transformed combined kernel (mollifier convolved with Green gradient), per axis.
    kernel_hat: Vec<Vec<Complex64>>,
}

impl GravitySolver {
    pub fn new(domain: &DomainSpec, cfg: &GravityConfig) -> Result<Self> {
        cfg.validate()?;
        let inner = if !cfg.enabled {
            Inner::Off
        } else if domain.dim() == 1 {
            Inner::OneD
        } else {
            Inner::Nd(Box::new(NdSolver::new(domain, cfg)?))
        };
        Ok(Self {
            domain: domain.clone(),
            cfg: cfg.clone(),
            inner,
        })
    }

    pub fn config(&self) -> &GravityConfig {
        &self.cfg
    }

    pub fn mollifier(&self) -> Option<&MollifierKernel> {
        match &self.inner {
            Inner::Nd(nd) => Some(&nd.mollifier),
            _ => None,
        }
    }

    pub fn solve(&self, rho: &[f64]) -> Result<GravityField> {
        check_len(rho, &self.domain)?;
        match &self.inner {
            Inner::Off => Ok(GravityField::zeros(&self.domain)),
            Inner::OneD => grad_phi_1d(rho, &self.domain, &self.cfg),
            Inner::Nd(nd) => Ok(nd.solve(rho, &self.domain, &self.cfg)),
        }
    }

    /// Field generated by the summed density of every species.
    pub fn field_for(&self, state: &FluidState) -> Result<GravityField> {
        match self.inner {
            Inner::Off => Ok(GravityField::zeros(&self.domain)),
            _ => self.solve(&state.total_density()),
        }
    }

    /// Mollified density restricted to the grid cells (periodic on the torus,
    /// zero-extended in free space). Returns the input unchanged in 1-D.
    pub fn mollified_density(&self, rho: &[f64]) -> Result<Vec<f64>> {
        check_len(rho, &self.domain)?;
        Ok(match &self.inner {
            Inner::Nd(nd) => mollify_box(rho, &self.domain, &nd.mollifier),
            _ => rho.to_vec(),
        })
    }
}

fn used_shape(domain: &DomainSpec) -> [usize; 3] {
    let mut s = [1usize; 3];
    s[..domain.dim()].copy_from_slice(domain.cells());
    s
}

fn flat(c: [usize; 3], shape: [usize; 3]) -> usize {
    c[0] + shape[0] * (c[1] + shape[1] * c[2])
}

fn unflat(i: usize, shape: [usize; 3]) -> [usize; 3] {
    [i % shape[0], (i / shape[0]) % shape[1], i / (shape[0] * shape[1])]
}

/// Point-sampled gradient of the periodic Green function, which solves
/// `lap Phi = 4 pi G (delta - 1/|T|)` on the torus, times the cell volume.
/// Evaluated by Ewald summation: a Gaussian-screened real-space image sum
/// plus a reciprocal-space sum, both truncated below 1e-17.
/// The table is antisymmetrized so that opposite offsets cancel exactly.
fn periodic_green_table(domain: &DomainSpec, g: f64) -> Vec<[f64; 3]> {
    let dim = domain.dim();
    let eps = domain.epsilon();
    let n = used_shape(domain);
    let len: Vec<f64> = (0..dim).map(|a| n[a] as f64 * eps).collect();
    let volume: f64 = len.iter().product();
    let beta = PI.sqrt() / len.iter().cloned().fold(f64::INFINITY, f64::min);
    let r_cut = 6.5 / beta;
    let k_cut = 13.0 * beta;

    let images = lattice(
        &(0..dim).map(|a| (r_cut / len[a]).ceil() as isize + 1).collect::<Vec<_>>(),
    );
    let modes: Vec<([f64; 3], f64, [isize; 3])> = lattice(
        &(0..dim)
            .map(|a| (k_cut * len[a] / (2.0 * PI)).ceil() as isize)
            .collect::<Vec<_>>(),
    )
    .into_iter()
    .filter_map(|m| {
        let mut k = [0.0; 3];
        for a in 0..dim {
            k[a] = 2.0 * PI * m[a] as f64 / len[a];
        }
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        (k2 > 0.0 && k2 <= k_cut * k_cut).then(|| (k, (-k2 / (4.0 * beta * beta)).exp() / k2, m))
    })
    .collect();

    let raw: Vec<[f64; 3]> = (0..domain.n_cells())
        .into_par_iter()
        .map(|i| {
            let c = unflat(i, n);
            if c.iter().all(|&x| x == 0) {
                return [0.0; 3];
            }
            let mut r = [0.0; 3];
            for a in 0..dim {
                let d = c[a] as isize;
                let d = if 2 * d > n[a] as isize { d - n[a] as isize } else { d };
                r[a] = d as f64 * eps;
            }
            let mut acc = [0.0; 3];
            for s in &images {
                let mut x = r;
                for a in 0..dim {
                    x[a] += s[a] as f64 * len[a];
                }
                let x2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
                if x2 == 0.0 || x2 > r_cut * r_cut {
                    continue;
                }
                let screened = match dim {
                    2 => 2.0 * (-beta * beta * x2).exp() / x2,
                    _ => {
                        let x1 = x2.sqrt();
                        (libm::erfc(beta * x1)
                            + 2.0 * beta * x1 / PI.sqrt() * (-beta * beta * x2).exp())
                            / (x2 * x1)
                    }
                };
                for a in 0..dim {
                    acc[a] += screened * x[a];
                }
            }
            let phase: Vec<Vec<Complex64>> = (0..dim)
                .map(|a| {
                    let w = 2.0 * PI * c[a] as f64 / n[a] as f64;
                    let top = (k_cut * len[a] / (2.0 * PI)).ceil() as isize;
                    (-top..=top).map(|m| Complex64::from_polar(1.0, w * m as f64)).collect()
                })
                .collect();
            for (k, coef, m) in &modes {
                let mut z = Complex64::new(1.0, 0.0);
                for a in 0..dim {
                    let top = (phase[a].len() / 2) as isize;
                    z *= phase[a][(m[a] + top) as usize];
                }
                let f = 4.0 * PI / volume * coef * z.im;
                for a in 0..dim {
                    acc[a] += f * k[a];
                }
            }
            let scale = g * eps.powi(dim as i32);
            acc.map(|v| v * scale)
        })
        .collect();

    (0..raw.len())
        .map(|i| {
            let c = unflat(i, n);
            let neg = [wrap(-(c[0] as isize), n[0]), wrap(-(c[1] as isize), n[1]), wrap(-(c[2] as isize), n[2])];
            let (p, q) = (raw[i], raw[flat(neg, n)]);
            [0.5 * (p[0] - q[0]), 0.5 * (p[1] - q[1]), 0.5 * (p[2] - q[2])]
        })
        .collect()
}

/// Integer points of the box `[-r_a, r_a]` on each used axis.
fn lattice(radius: &[isize]) -> Vec<[isize; 3]> {
    let mut out = vec![[0isize; 3]];
    for (a, &r) in radius.iter().enumerate() {
        out = out
            .into_iter()
            .flat_map(|p| {
                (-r..=r).map(move |x| {
                    let mut p = p;
                    p[a] = x;
                    p
                })
            })
            .collect();
    }
    out
}

fn mollify_box(rho: &[f64], domain: &DomainSpec, moll: &MollifierKernel) -> Vec<f64> {
    let vol = domain.cell_volume();
    let taps: Vec<([isize; 3], f64)> = moll.taps().collect();
    let dim = domain.dim();
    (0..rho.len())
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for (k, w) in &taps {
                let shifts: Vec<(usize, isize)> = (0..dim).map(|a| (a, -k[a])).collect();
                if let Some(j) = domain.offset(i, &shifts) {
                    acc += rho[j] * w;
                }
            }
            acc * vol
        })
        .collect()
}

impl NdSolver {
    fn new(domain: &DomainSpec, cfg: &GravityConfig) -> Result<Self> {
        let mollifier = mollifier_kernel(cfg.alpha, domain.epsilon(), domain.dim())?;
        let periodic_green = match cfg.boundary {
            GreenBoundary::TorusMeanSubtracted => {
                Some(periodic_green_table(domain, cfg.g))
            }
            GreenBoundary::FreeSpace => None,
        };
        let mut solver = Self {
            mollifier,
            periodic_green,
            fft: None,
        };
        if cfg.backend == ConvolutionBackend::Fft {
            solver.fft = Some(solver.build_fft(domain, cfg));
        }
        Ok(solver)
    }

    fn build_fft(&self, domain: &DomainSpec, cfg: &GravityConfig) -> FftRoute {
        let dim = domain.dim();
        let n = used_shape(domain);
        let m = self.mollifier.radius_cells();
        let moll_vol = domain.cell_volume();
        match &self.periodic_green {
            Some(table) => {
                let grid = FftGrid::new(n);
                let mut phi = vec![Complex64::default(); grid.len()];
                for (k, w) in self.mollifier.taps() {
                    let c = [wrap(k[0], n[0]), wrap(k[1], n[1]), wrap(k[2], n[2])];
                    phi[flat(c, n)] += w * moll_vol;
                }
                grid.forward(&mut phi);
                let kernel_hat = (0..dim)
                    .map(|a| {
                        let mut w: Vec<Complex64> = table.iter().map(|t| t[a].into()).collect();
                        grid.forward(&mut w);
                        w.iter().zip(&phi).map(|(x, y)| x * y).collect()
                    })
                    .collect();
                FftRoute { grid, kernel_hat }
            }
            None => {
                // Combined kernel C = phi * W on offsets |d| <= N-1, evaluated
                // on a scratch torus wide enough that no wrap-around occurs.
                let mut big = [1usize; 3];
                let mut pad = [1usize; 3];
                for a in 0..dim {
                    big[a] = 2 * n[a] + 2 * m;
                    pad[a] = 2 * n[a];
                }
                let scratch = FftGrid::new(big);
                let mut phi = vec![Complex64::default(); scratch.len()];
                for (k, w) in self.mollifier.taps() {
                    let c = [wrap(k[0], big[0]), wrap(k[1], big[1]), wrap(k[2], big[2])];
                    phi[flat(c, big)] += w * moll_vol;
                }
                scratch.forward(&mut phi);
                let signed = |c: usize, len: usize| -> isize {
                    if 2 * c < len {
                        c as isize
                    } else {
                        c as isize - len as isize
                    }
                };
                let grid = FftGrid::new(pad);
                let kernel_hat = (0..dim)
                    .map(|a| {
                        let mut w: Vec<Complex64> = (0..scratch.len())
                            .into_par_iter()
                            .map(|i| {
                                let c = unflat(i, big);
                                let off = [
                                    signed(c[0], big[0]) as f64,
                                    signed(c[1], big[1]) as f64,
                                    signed(c[2], big[2]) as f64,
                                ];
                                green_weight(off, dim, domain.epsilon(), cfg.g)[a].into()
                            })
                            .collect();
                        scratch.forward(&mut w);
                        w.iter_mut().zip(&phi).for_each(|(x, y)| *x *= y);
                        scratch.inverse(&mut w);
                        let mut out = vec![Complex64::default(); grid.len()];
                        for (i, v) in out.iter_mut().enumerate() {
                            let c = unflat(i, pad);
                            let mut src = [0usize; 3];
                            let mut inside = true;
                            for b in 0..dim {
                                let d = signed(c[b], pad[b]);
                                if d.unsigned_abs() >= n[b] {
                                    inside = false;
                                }
                                src[b] = wrap(d, big[b]);
                            }
                            if inside {
                                *v = w[flat(src, big)].re.into();
                            }
                        }
                        grid.forward(&mut out);
                        out
                    })
                    .collect();
                FftRoute { grid, kernel_hat }
            }
        }
    }

    fn solve(&self, rho: &[f64], domain: &DomainSpec, cfg: &GravityConfig) -> GravityField {
        let source: Vec<f64> = match cfg.boundary {
            GreenBoundary::TorusMeanSubtracted => {
                let mean = rho.iter().sum::<f64>() / rho.len() as f64;
                rho.iter().map(|r| r - mean).collect()
            }
            GreenBoundary::FreeSpace => rho.to_vec(),
        };
        match &self.fft {
            Some(route) => self.solve_fft(&source, domain, route),
            None => self.solve_direct(&source, domain, cfg),
        }
    }

    fn solve_fft(&self, source: &[f64], domain: &DomainSpec, route: &FftRoute) -> GravityField {
        let shape = used_shape(domain);
        let pad = route.grid.shape();
        let mut hat = vec![Complex64::default(); route.grid.len()];
        for (i, &r) in source.iter().enumerate() {
            hat[flat(unflat(i, shape), pad)] = r.into();
        }
        route.grid.forward(&mut hat);
        let grad_phi = route
            .kernel_hat
            .iter()
            .map(|k| {
                let mut prod: Vec<Complex64> = hat.iter().zip(k).map(|(x, y)| x * y).collect();
                route.grid.inverse(&mut prod);
                (0..source.len())
                    .map(|i| prod[flat(unflat(i, shape), pad)].re)
                    .collect()
            })
            .collect();
        GravityField { grad_phi }
    }

    fn solve_direct(&self, source: &[f64], domain: &DomainSpec, cfg: &GravityConfig) -> GravityField {
        let dim = domain.dim();
        let shape = used_shape(domain);
        let n = source.len();
        let mut grad_phi = vec![vec![0.0; n]; dim];
        match &self.periodic_green {
            Some(table) => {
                let moll = mollify_box(source, domain, &self.mollifier);
                let rows: Vec<[f64; 3]> = (0..n)
                    .into_par_iter()
                    .map(|i| {
                        let ci = unflat(i, shape);
                        let mut acc = [0.0; 3];
                        for (j, &rj) in moll.iter().enumerate() {
                            let cj = unflat(j, shape);
                            let mut d = [0usize; 3];
                            for a in 0..3 {
                                d[a] = wrap(ci[a] as isize - cj[a] as isize, shape[a]);
                            }
                            let w = table[flat(d, shape)];
                            for a in 0..3 {
                                acc[a] += rj * w[a];
                            }
                        }
                        acc
                    })
                    .collect();
                for (i, r) in rows.iter().enumerate() {
                    for a in 0..dim {
                        grad_phi[a][i] = r[a];
                    }
                }
            }
            None => {
                // mollified density on the grid extended by the kernel radius
                let m = self.mollifier.radius_cells();
                let mut ext = [1usize; 3];
                for a in 0..dim {
                    ext[a] = shape[a] + 2 * m;
                }
                let vol = domain.cell_volume();
                let taps: Vec<([isize; 3], f64)> = self.mollifier.taps().collect();
                let ext_len: usize = ext.iter().product();
                let moll: Vec<f64> = (0..ext_len)
                    .into_par_iter()
                    .map(|e| {
                        let ce = unflat(e, ext);
                        let mut acc = 0.0;
                        'tap: for (k, w) in &taps {
                            let mut cj = [0usize; 3];
                            for a in 0..3 {
                                let pad = if a < dim { m as isize } else { 0 };
                                let v = ce[a] as isize - pad - k[a];
                                if v < 0 || v >= shape[a] as isize {
                                    continue 'tap;
                                }
                                cj[a] = v as usize;
                            }
                            acc += source[flat(cj, shape)] * w;
                        }
                        acc * vol
                    })
                    .collect();
                let rows: Vec<[f64; 3]> = (0..n)
                    .into_par_iter()
                    .map(|i| {
                        let ci = unflat(i, shape);
                        let mut acc = [0.0; 3];
                        for (e, &re) in moll.iter().enumerate() {
                            if re == 0.0 {
                                continue;
                            }
                            let ce = unflat(e, ext);
                            let mut off = [0.0; 3];
                            for a in 0..dim {
                                off[a] = ci[a] as f64 - (ce[a] as f64 - m as f64);
                            }
                            let w = green_weight(off, dim, domain.epsilon(), cfg.g);
                            for a in 0..3 {
                                acc[a] += re * w[a];
                            }
                        }
                        acc
                    })
                    .collect();
                for (i, r) in rows.iter().enumerate() {
                    for a in 0..dim {
                        grad_phi[a][i] = r[a];
                    }
                }
            }
        }
        GravityField { grad_phi }
    }
}
