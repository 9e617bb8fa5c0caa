//! Separable n-D complex FFT on row-major grids (x fastest), used for
//! circular convolutions with precomputed kernels.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub(crate) struct FftGrid {
    shape: [usize; 3],
    forward: [Arc<dyn Fft<f64>>; 3],
    inverse: [Arc<dyn Fft<f64>>; 3],
}

impl FftGrid {
    pub fn new(shape: [usize; 3]) -> Self {
        let mut planner = FftPlanner::new();
        let forward = shape.map(|n| planner.plan_fft_forward(n));
        let inverse = shape.map(|n| planner.plan_fft_inverse(n));
        Self {
            shape,
            forward,
            inverse,
        }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    /// Inverse transform including the 1/N normalization.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let scale = 1.0 / self.len() as f64;
        data.par_iter_mut().for_each(|v| *v *= scale);
    }

    fn transform(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>; 3]) {
        let [nx, ny, nz] = self.shape;
        // x lines are contiguous
        if nx > 1 {
            data.par_chunks_mut(nx).for_each(|line| plans[0].process(line));
        }
        if ny > 1 {
            // for each z-slab, transform columns in y
            data.par_chunks_mut(nx * ny).for_each(|slab| {
                let mut line = vec![Complex64::default(); ny];
                for i in 0..nx {
                    for j in 0..ny {
                        line[j] = slab[i + nx * j];
                    }
                    plans[1].process(&mut line);
                    for j in 0..ny {
                        slab[i + nx * j] = line[j];
                    }
                }
            });
        }
        if nz > 1 {
            let plane = nx * ny;
            let mut lines: Vec<Vec<Complex64>> = (0..plane)
                .into_par_iter()
                .map(|p| {
                    let mut line: Vec<Complex64> = (0..nz).map(|k| data[p + plane * k]).collect();
                    plans[2].process(&mut line);
                    line
                })
                .collect();
            for (p, line) in lines.iter_mut().enumerate() {
                for (k, v) in line.iter().enumerate() {
                    data[p + plane * k] = *v;
                }
            }
        }
    }
}

/// Position on a periodic grid of length `n` for a signed offset `d`.
#[inline]
pub(crate) fn wrap(d: isize, n: usize) -> usize {
    d.rem_euclid(n as isize) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_3d() {
        let g = FftGrid::new([4, 6, 5]);
        let orig: Vec<Complex64> = (0..g.len())
            .map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos()))
            .collect();
        let mut data = orig.clone();
        g.forward(&mut data);
        g.inverse(&mut data);
        for (a, b) in data.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn circular_convolution_matches_direct() {
        let shape = [5, 4, 1];
        let g = FftGrid::new(shape);
        let n = g.len();
        let a: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 1.3).cos()).collect();
        let mut fa: Vec<Complex64> = a.iter().map(|&v| v.into()).collect();
        let mut fb: Vec<Complex64> = b.iter().map(|&v| v.into()).collect();
        g.forward(&mut fa);
        g.forward(&mut fb);
        let mut prod: Vec<Complex64> = fa.iter().zip(&fb).map(|(x, y)| x * y).collect();
        g.inverse(&mut prod);
        for x in 0..5 {
            for y in 0..4 {
                let mut want = 0.0;
                for i in 0..5 {
                    for j in 0..4 {
                        want += a[i + 5 * j] * b[wrap(x as isize - i as isize, 5) + 5 * wrap(y as isize - j as isize, 4)];
                    }
                }
                assert!((prod[x + 5 * y].re - want).abs() < 1e-12);
            }
        }
    }
}
