use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bie::problem::{ProblemKind, ProblemSpec};
use crate::error::{Error, Result};
use crate::geometry::BoundarySample;
use crate::rng::{stream, Purpose};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchSizes {
    /// Geometry parameters per batch.
    pub n_t: usize,
    /// Observation points per geometry.
    pub n_y: usize,
    /// Monte-Carlo integration points per geometry.
    pub m: usize,
}

/// Integration and observation samples for one geometry parameter.
#[derive(Clone, Debug)]
pub struct GeometryBatch {
    pub t: f64,
    pub integration: BoundarySample,
    pub observation: BoundarySample,
    pub dirichlet: Vec<Complex64>,
    /// Normal-derivative targets (bi-harmonic only, otherwise zeros).
    pub neumann: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainBatch {
    pub seed: u64,
    pub step: u64,
    pub geometries: Vec<GeometryBatch>,
}

impl TrainBatch {
    pub fn ts(&self) -> Vec<f64> {
        self.geometries.iter().map(|g| g.t).collect()
    }

    pub fn observation_count(&self) -> usize {
        self.geometries.iter().map(|g| g.observation.len()).sum()
    }
}

/// Observation set and targets on `Γ_t` for an explicit sample.
pub fn geometry_batch(
    spec: &ProblemSpec,
    t: f64,
    integration: BoundarySample,
    observation: BoundarySample,
) -> GeometryBatch {
    let mut dirichlet = Vec::with_capacity(observation.len());
    let mut neumann = Vec::with_capacity(observation.len());
    for i in 0..observation.len() {
        let bv = spec.boundary_value(observation.point(i), observation.normal(i));
        dirichlet.push(bv.dirichlet);
        neumann.push(if spec.kind == ProblemKind::Biharmonic2d { bv.neumann } else { 0.0 });
    }
    GeometryBatch {
        t,
        integration,
        observation,
        dirichlet,
        neumann,
    }
}

/// Fresh batch for optimizer step `step`: `n_t` uniform geometry parameters,
/// and for each an integration sample and an independent observation sample
/// on the same boundary.
pub fn make_batch(spec: &ProblemSpec, sizes: BatchSizes, seed: u64, step: u64) -> Result<TrainBatch> {
    if sizes.n_t == 0 || sizes.n_y == 0 || sizes.m == 0 {
        return Err(Error::Argument(format!("batch sizes must be positive: {sizes:?}")));
    }
    let (lo, hi) = spec.t_range;
    if !(lo <= hi) {
        return Err(Error::Argument(format!("empty t-range [{lo}, {hi}]")));
    }
    let mut trng = stream(seed, Purpose::GeometryParams, step, 0);
    let ts: Vec<f64> = (0..sizes.n_t)
        .map(|_| if hi > lo { trng.gen_range(lo..=hi) } else { lo })
        .collect();
    let geometries = ts
        .par_iter()
        .enumerate()
        .map(|(j, &t)| {
            let integ = spec
                .boundary
                .sample(t, sizes.m, &mut stream(seed, Purpose::Integration, step, j as u64))?;
            let obs = spec
                .boundary
                .sample(t, sizes.n_y, &mut stream(seed, Purpose::Observation, step, j as u64))?;
            Ok(geometry_batch(spec, t, integ, obs))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainBatch {
        seed,
        step,
        geometries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laplace_default_shapes() {
        let spec = ProblemSpec::laplace();
        let sizes = BatchSizes { n_t: 10, n_y: 100, m: 3000 };
        let b = make_batch(&spec, sizes, 1, 0).unwrap();
        assert_eq!(b.geometries.len(), 10);
        for g in &b.geometries {
            assert!(g.t >= 1.0 && g.t <= 2.0);
            assert_eq!(g.integration.len(), 3000);
            assert_eq!(g.observation.len(), 100);
            assert_eq!(g.dirichlet.len(), 100);
        }
    }

    #[test]
    fn helmholtz_shapes() {
        let spec = ProblemSpec::helmholtz(std::f64::consts::TAU).unwrap();
        let sizes = BatchSizes { n_t: 2, n_y: 1880, m: 56_000 };
        let b = make_batch(&spec, sizes, 1, 0).unwrap();
        assert_eq!(b.geometries.len(), 2);
        assert_eq!(b.geometries[0].integration.len(), 56_000);
        assert_eq!(b.geometries[1].observation.len(), 1880);
        assert_eq!(b.geometries[0].integration.dim, 3);
    }

    #[test]
    fn degenerate_range_pins_t() {
        let spec = ProblemSpec::laplace().with_t_range(1.15, 1.15).unwrap();
        let b = make_batch(&spec, BatchSizes { n_t: 4, n_y: 5, m: 7 }, 3, 9).unwrap();
        assert!(b.geometries.iter().all(|g| g.t == 1.15));
    }

    #[test]
    fn observation_points_lie_on_their_boundary() {
        let spec = ProblemSpec::biharmonic();
        let b = make_batch(&spec, BatchSizes { n_t: 3, n_y: 50, m: 10 }, 5, 2).unwrap();
        let curve = spec.curve().unwrap();
        for g in &b.geometries {
            for i in 0..g.observation.len() {
                let p = g.observation.point(i);
                let alpha = p[1].atan2(p[0]);
                let (r, _) = curve.radius(alpha, g.t);
                assert!((p[0].hypot(p[1]) - r).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn batches_are_reproducible_per_step() {
        let spec = ProblemSpec::laplace();
        let sizes = BatchSizes { n_t: 3, n_y: 4, m: 5 };
        let a = make_batch(&spec, sizes, 8, 11).unwrap();
        let b = make_batch(&spec, sizes, 8, 11).unwrap();
        let c = make_batch(&spec, sizes, 8, 12).unwrap();
        assert_eq!(a.ts(), b.ts());
        assert_eq!(a.geometries[2].integration, b.geometries[2].integration);
        assert_ne!(a.ts(), c.ts());
    }

    #[test]
    fn zero_sizes_are_rejected() {
        let spec = ProblemSpec::laplace();
        assert!(make_batch(&spec, BatchSizes { n_t: 0, n_y: 4, m: 5 }, 1, 0).is_err());
    }
}
