use std::f64::consts::PI;

use crate::fields::{DomainSpec, Topology};

/// Region outside of which a test function and its gradient vanish.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Support {
    Ball { center: [f64; 3], radius: f64 },
    Box { center: [f64; 3], half_width: [f64; 3] },
    /// Periodic functions on the torus.
    Everywhere,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    /// `exp(-1 / (1 - r^2/R^2))` inside the ball of radius `R`.
    Radial { radius: f64 },
    /// Product over axes of the 1-D bump with half-widths `h`.
    Separable { half_width: [f64; 3] },
    /// `cos(k . (x - center))`; only meaningful on a torus whose periods `k` divides.
    Trig { k: [f64; 3] },
}

/// Smooth test function with analytic gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestFunction {
    dim: usize,
    center: [f64; 3],
    kind: Kind,
}

fn pad(x: &[f64]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (o, v) in out.iter_mut().zip(x) {
        *o = *v;
    }
    out
}

/// 1-D C-infinity bump on (-1, 1) and its derivative.
fn bump(s: f64) -> (f64, f64) {
    let q = 1.0 - s * s;
    if q <= 0.0 {
        return (0.0, 0.0);
    }
    let v = (-1.0 / q).exp();
    (v, v * (-2.0 * s / (q * q)))
}

impl TestFunction {
    pub fn radial(center: &[f64], radius: f64) -> Self {
        Self {
            dim: center.len(),
            center: pad(center),
            kind: Kind::Radial { radius },
        }
    }

    pub fn separable(center: &[f64], half_width: &[f64]) -> Self {
        Self {
            dim: center.len(),
            center: pad(center),
            kind: Kind::Separable {
                half_width: pad(half_width),
            },
        }
    }

    /// `cos(2 pi sum_a n_a (x_a - c_a) / L_a)` with periods taken from `domain`.
    pub fn trig(domain: &DomainSpec, modes: &[i32], center: &[f64]) -> Self {
        let mut k = [0.0; 3];
        for a in 0..domain.dim() {
            k[a] = 2.0 * PI * modes.get(a).copied().unwrap_or(0) as f64 / domain.extent(a);
        }
        Self {
            dim: domain.dim(),
            center: pad(center),
            kind: Kind::Trig { k },
        }
    }

    /// Two off-centre functions, a bump and a box product, scaled to the
    /// window of `domain`; used when a study names no test functions.
    pub fn default_set(domain: &DomainSpec) -> Vec<Self> {
        let dim = domain.dim();
        let len = (0..dim).map(|a| domain.extent(a)).fold(f64::INFINITY, f64::min);
        let at = |shift: [f64; 3]| -> Vec<f64> {
            (0..dim)
                .map(|a| domain.origin()[a] + 0.5 * domain.extent(a) + shift[a] * len)
                .collect()
        };
        let half = [0.19, 0.16, 0.18];
        vec![
            Self::radial(&at([0.048, -0.032, 0.04]), 0.24 * len),
            Self::separable(&at([-0.08, 0.064, -0.05]), &half[..dim].iter().map(|h| h * len).collect::<Vec<_>>()),
        ]
    }

    pub fn translated(&self, shift: &[f64]) -> Self {
        let mut out = *self;
        for (c, s) in out.center.iter_mut().zip(shift) {
            *c += s;
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support(&self) -> Support {
        match self.kind {
            Kind::Radial { radius } => Support::Ball {
                center: self.center,
                radius,
            },
            Kind::Separable { half_width } => Support::Box {
                center: self.center,
                half_width,
            },
            Kind::Trig { .. } => Support::Everywhere,
        }
    }

    /// Value and gradient at `x`, given as a displacement from the center.
    fn eval_offset(&self, d: [f64; 3]) -> (f64, [f64; 3]) {
        let n = self.dim;
        match self.kind {
            Kind::Radial { radius } => {
                let q: f64 = d[..n].iter().map(|v| v * v).sum::<f64>() / (radius * radius);
                if q >= 1.0 {
                    return (0.0, [0.0; 3]);
                }
                let w = 1.0 - q;
                let v = (-1.0 / w).exp();
                let f = -v / (w * w) * 2.0 / (radius * radius);
                let mut g = [0.0; 3];
                for a in 0..n {
                    g[a] = f * d[a];
                }
                (v, g)
            }
            Kind::Separable { half_width } => {
                let mut vals = [(1.0, 0.0); 3];
                for a in 0..n {
                    let (v, dv) = bump(d[a] / half_width[a]);
                    vals[a] = (v, dv / half_width[a]);
                }
                let value: f64 = vals[..n].iter().map(|p| p.0).product();
                let mut g = [0.0; 3];
                for a in 0..n {
                    g[a] = (0..n)
                        .map(|b| if a == b { vals[b].1 } else { vals[b].0 })
                        .product();
                }
                (value, g)
            }
            Kind::Trig { k } => {
                let phase: f64 = (0..n).map(|a| k[a] * d[a]).sum();
                let (s, c) = phase.sin_cos();
                let mut g = [0.0; 3];
                for a in 0..n {
                    g[a] = -s * k[a];
                }
                (c, g)
            }
        }
    }

    /// Value and gradient at the point `x` of `domain`. On a torus, bumps are
    /// evaluated at the nearest periodic image of their center.
    pub fn eval(&self, x: [f64; 3], domain: &DomainSpec) -> (f64, [f64; 3]) {
        let mut d = [0.0; 3];
        for a in 0..self.dim {
            d[a] = x[a] - self.center[a];
            if domain.topology() == Topology::Torus && !matches!(self.kind, Kind::Trig { .. }) {
                let l = domain.extent(a);
                d[a] -= l * (d[a] / l).round();
            }
        }
        self.eval_offset(d)
    }

    pub fn value(&self, x: [f64; 3], domain: &DomainSpec) -> f64 {
        self.eval(x, domain).0
    }

    /// Whether the support stays `margin` away from the edges of an open box.
    pub fn fits_inside(&self, domain: &DomainSpec, margin: f64) -> bool {
        if domain.topology() == Topology::Torus {
            return true;
        }
        let (center, half) = match self.support() {
            Support::Ball { center, radius } => (center, [radius; 3]),
            Support::Box { center, half_width } => (center, half_width),
            Support::Everywhere => return false,
        };
        (0..domain.dim()).all(|a| {
            let lo = domain.origin()[a] + margin;
            let hi = domain.origin()[a] + domain.extent(a) - margin;
            center[a] - half[a] >= lo && center[a] + half[a] <= hi
        })
    }
}
