//! Mollifier and Green-gradient kernels sampled at cell-center offsets.

use crate::error::{Error, Result};

/// Profile of the fixed radial bump, `(1 - r^2)^3` on the unit ball.
#[inline]
pub fn bump_profile(r: f64) -> f64 {
    if r < 1.0 {
        let s = 1.0 - r * r;
        s * s * s
    } else {
        0.0
    }
}

/// Peak value of the continuum bump normalized to unit integral in `dim` dimensions.
pub fn bump_peak(dim: usize) -> f64 {
    match dim {
        1 => 35.0 / 32.0,
        2 => 4.0 / std::f64::consts::PI,
        _ => 315.0 / (64.0 * std::f64::consts::PI),
    }
}

/// Rescaled bump `phi_{eps^alpha}` sampled on the cell lattice, normalized so
/// that the cell sum times `eps^dim` is exactly 1.
#[derive(Debug, Clone, PartialEq)]
pub struct MollifierKernel {
    dim: usize,
    /// Half-width in cells: samples cover offsets `-radius..=radius` per axis.
    radius: usize,
    epsilon: f64,
    support: f64,
    values: Vec<f64>,
}

/// Builds the mollifier of support radius `epsilon^alpha`.
pub fn mollifier_kernel(alpha: f64, epsilon: f64, dim: usize) -> Result<MollifierKernel> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidValue {
            what: "alpha",
            value: alpha,
        });
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidValue {
            what: "epsilon",
            value: epsilon,
        });
    }
    if !(1..=3).contains(&dim) {
        return Err(Error::Config(format!("mollifier dimension {dim}")));
    }
    let support = epsilon.powf(alpha);
    if support < epsilon {
        return Err(Error::DegenerateKernel { support, epsilon });
    }
    let radius = (support / epsilon).ceil() as usize;
    let width = 2 * radius + 1;
    let count = width.pow(dim as u32);
    let mut values = vec![0.0; count];
    for (idx, v) in values.iter_mut().enumerate() {
        let off = unflatten(idx, width, dim, radius);
        let r2: f64 = off.iter().map(|&k| (k as f64 * epsilon).powi(2)).sum();
        *v = bump_profile(r2.sqrt() / support);
    }
    let total: f64 = values.iter().sum::<f64>() * epsilon.powi(dim as i32);
    for v in &mut values {
        *v /= total;
    }
    Ok(MollifierKernel {
        dim,
        radius,
        epsilon,
        support,
        values,
    })
}

fn unflatten(idx: usize, width: usize, dim: usize, radius: usize) -> [isize; 3] {
    let mut off = [0isize; 3];
    let mut rest = idx;
    for o in off.iter_mut().take(dim) {
        *o = (rest % width) as isize - radius as isize;
        rest /= width;
    }
    off
}

impl MollifierKernel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius_cells(&self) -> usize {
        self.radius
    }

    /// Support radius `epsilon^alpha` in length units.
    pub fn support(&self) -> f64 {
        self.support
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Kernel value at an integer cell offset (0 outside the sampled window).
    pub fn at(&self, off: [isize; 3]) -> f64 {
        let r = self.radius as isize;
        let width = 2 * self.radius + 1;
        let mut idx = 0usize;
        let mut mul = 1usize;
        for &o in off.iter().take(self.dim) {
            if o < -r || o > r {
                return 0.0;
            }
            idx += (o + r) as usize * mul;
            mul *= width;
        }
        self.values[idx]
    }

    /// Iterates `(offset, value)` over the nonzero samples.
    pub fn taps(&self) -> impl Iterator<Item = ([isize; 3], f64)> + '_ {
        let width = 2 * self.radius + 1;
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(move |(i, &v)| (unflatten(i, width, self.dim, self.radius), v))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Discrete integral: cell sum times `eps^dim`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.epsilon.powi(self.dim as i32)
    }
}

/// Green-gradient weight for a source displaced by `off` cells (target minus
/// source), already multiplied by the cell volume, so that
/// `grad_phi(i) = sum_j rho(j) * green_weight(i - j)`.
///
/// 2-D: `2 G r_hat / r`; 3-D: `G r_hat / r^2`. Zero at the origin.
#[inline]
pub fn green_weight(off: [f64; 3], dim: usize, epsilon: f64, g: f64) -> [f64; 3] {
    let r2 = off[0] * off[0] + off[1] * off[1] + off[2] * off[2];
    if r2 == 0.0 {
        return [0.0; 3];
    }
    // offsets are in cells; r = |off| eps, and the cell volume is eps^dim
    let scale = match dim {
        2 => 2.0 * g * epsilon / r2,
        3 => g * epsilon / (r2 * r2.sqrt()),
        _ => 0.0,
    };
    [off[0] * scale, off[1] * scale, off[2] * scale]
}
