//! Shared inputs for the benchmarks.

use coopmotion::fd_scheme::{discretize_initial, MeshFn, SchemeSpec};
use coopmotion::{evolve, ModelParams, Pmf};

/// The law after `n` symmetric steps from a point mass.
pub fn spread_pmf(m: f64, n: u64) -> Pmf {
    evolve(&Pmf::delta(0), &ModelParams::symmetric(m).unwrap(), n).unwrap()
}

/// A smooth ramp on `[-4, 4]` sampled on the mesh of `spec`.
pub fn ramp_mesh(spec: &SchemeSpec) -> MeshFn {
    discretize_initial(|x| (0.5 + x / 8.0).clamp(0.0, 1.0), spec, (-4.0, 4.0)).unwrap()
}
