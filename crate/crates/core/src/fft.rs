//! Multi-dimensional periodic FFT on a [`TorusGrid`] built from 1D transforms.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::TorusGrid;

/// Forward and inverse plans for every axis of a cubic grid.
#[derive(Clone)]
pub struct GridFft {
    grid: TorusGrid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for GridFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GridFft").field("grid", &self.grid).finish()
    }
}

impl GridFft {
    pub fn new(grid: TorusGrid) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.n());
        let inverse = planner.plan_fft_inverse(grid.n());
        Self { grid, forward, inverse }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    /// Unnormalized forward transform in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    /// Inverse transform in place, including the `1/n^d` factor.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let scale = 1.0 / self.grid.len() as f64;
        data.par_iter_mut().for_each(|z| *z *= scale);
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let g = self.grid;
        let n = g.n();
        assert_eq!(data.len(), g.len());
        // Axis 0 lines are contiguous.
        data.par_chunks_mut(n).for_each_init(
            || vec![Complex64::default(); plan.get_inplace_scratch_len()],
            |scratch, line| plan.process_with_scratch(line, scratch),
        );
        for axis in 1..g.dim() {
            let stride = g.stride(axis);
            let block = stride * n;
            // Each block of `stride * n` values holds `stride` interleaved lines.
            data.par_chunks_mut(block).for_each_init(
                || (vec![Complex64::default(); n], vec![Complex64::default(); plan.get_inplace_scratch_len()]),
                |(line, scratch), chunk| {
                    for offset in 0..stride {
                        for k in 0..n {
                            line[k] = chunk[offset + k * stride];
                        }
                        plan.process_with_scratch(line, scratch);
                        for k in 0..n {
                            chunk[offset + k * stride] = line[k];
                        }
                    }
                },
            );
        }
    }
}
