use serde::Serialize;

use crate::closed_forms::{zkb_support, ZkbSpec};
use crate::error::{Error, Result};
use crate::fd_scheme::{
    discretize_initial, mesh_from_sites, run_steps, steps_to, MeshFn, SchemeSpec,
};
use crate::lattice_measure::{Pmf, INVARIANT_TOL};

use super::report::{Report, ReportDoc};

const ORDER_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct SandwichReport {
    pub m: f64,
    pub eps: f64,
    pub n_tilde: u64,
    pub n_mesh: u64,
    pub t_final: f64,
    pub dx: f64,
    pub dt: f64,
    /// Support half-width `Π^{1-ε}(ε)` of the seed profile.
    pub pi: f64,
    /// `p* / sup Û(·, ε; 1-ε)`.
    pub eta: f64,
    pub seed_lipschitz: f64,
    pub l_index: i64,
    pub r_index: i64,
    pub steps: u64,
    pub times: Vec<f64>,
    /// `max (v⁻ - v)` per recorded time, including `t = 0`.
    pub lower_excess: Vec<f64>,
    /// `max (v - v⁺)` per recorded time, including `t = 0`.
    pub upper_excess: Vec<f64>,
    pub max_violation: f64,
    /// `sup (v⁺ - v⁻)` at the final time.
    pub final_gap: f64,
    pub ordered: bool,
}

impl Report for SandwichReport {
    fn to_doc(&self) -> ReportDoc {
        ReportDoc::new("sandwich")
            .param("m", self.m)
            .param("eps", self.eps)
            .param("n_tilde", self.n_tilde)
            .param("N", self.n_mesh)
            .param("t_final", self.t_final)
            .param("L", self.l_index)
            .param("R", self.r_index)
            .param("ordered", self.ordered)
            .array("t", self.times.clone())
            .array("lower_excess", self.lower_excess.clone())
            .array("upper_excess", self.upper_excess.clone())
            .fixture("dx", self.dx)
            .fixture("pi", self.pi)
            .fixture("eta", self.eta)
            .fixture("seed_lipschitz", self.seed_lipschitz)
            .fixture("max_violation", self.max_violation)
            .fixture("final_gap", self.final_gap)
    }
}

/// `max{k ≤ 0 : F_k ≤ ε}` and `min{k ≥ 0 : F_k ≥ 1 - ε}`.
fn split_indices(mu: &Pmf, eps: f64) -> Result<(i64, i64)> {
    let cdf = mu.cdf();
    if cdf.floor() > eps {
        return Err(Error::DomainError(format!(
            "no site k <= 0 has F_k <= {eps}"
        )));
    }
    if cdf.ceiling() < 1.0 - eps {
        return Err(Error::DomainError(format!(
            "no site k >= 0 has F_k >= {}",
            1.0 - eps
        )));
    }
    let mut l = 0;
    while cdf.eval(l) > eps {
        l -= 1;
    }
    let mut r = 0;
    while cdf.eval(r) < 1.0 - eps {
        r += 1;
    }
    Ok((l, r))
}

fn max_excess(lower: &MeshFn, upper: &MeshFn) -> f64 {
    lower
        .values
        .iter()
        .zip(&upper.values)
        .map(|(a, b)| a - b)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Runs the Heaviside-type evolution `v` seeded with the CDF of `mu` between
/// the two shifted integrated-ZKB evolutions `v⁻` and `v⁺`, on the mesh
/// `Δx = N^{-1/(m+2)}`, and records the worst order violation at every step.
pub fn sandwich_check(
    mu: &Pmf,
    m: f64,
    eps: f64,
    n_tilde: u64,
    n_mesh: u64,
    t_final: f64,
) -> Result<SandwichReport> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::DomainError(format!(
            "eps must lie in (0, 1/2), got {eps}"
        )));
    }
    if n_tilde == 0 || n_mesh == 0 {
        return Err(Error::DomainError("n_tilde and N must be positive".into()));
    }
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::DomainError(format!(
            "t_final must be nonnegative, got {t_final}"
        )));
    }
    let spec = SchemeSpec::p_laplace(m, n_mesh as f64)?;
    let p_star = spec.p_star();
    if !mu.is_p_star_bounded(p_star) {
        return Err(Error::DomainError(format!(
            "initial measure must be p*-bounded (max atom {} > {p_star})",
            mu.max_weight()
        )));
    }
    let zkb = ZkbSpec::new(1.0 - eps, eps, m)?;
    let seed = zkb.at(0.0)?;
    let pi = seed.half_width();
    let lipschitz = seed.peak();
    let eta = p_star / lipschitz;
    let shift_unit = (n_tilde as f64).powf(-1.0 / (m + 2.0));
    let dx = spec.dx();
    for (limit, which) in [
        (pi, "support half-width"),
        (shift_unit, "n_tilde^(-1/(m+2))"),
        (eta, "eta"),
    ] {
        if dx > limit {
            return Err(Error::MeshTooCoarse { dx, limit, which });
        }
    }
    let (l, r) = split_indices(mu, eps)?;

    let (lo, hi) = mu
        .support()
        .ok_or_else(|| Error::DomainError("initial measure has no finite mass".into()))?;
    let spread = zkb_support(t_final + 1.0, &ZkbSpec::new(1.0, eps, m)?)?;
    let reach = (lo.abs().max(hi.abs()) as f64 * dx)
        .max(l.unsigned_abs() as f64 * shift_unit)
        .max(r as f64 * shift_unit)
        + 3.0 * pi
        + 3.0 * spread
        + 10.0 * dx;
    let window = (-reach, reach);

    let upper_seed = discretize_initial(
        |x| seed.cdf(((x - l as f64 * shift_unit + 2.0 * pi) / dx).floor() * dx) + eps,
        &spec,
        window,
    )?;
    let lower_seed = discretize_initial(
        |x| seed.cdf(((x - r as f64 * shift_unit - pi) / dx).floor() * dx),
        &spec,
        window,
    )?;
    let cdf = mu.cdf();
    let middle_seed = mesh_from_sites(
        &spec,
        upper_seed.first_site,
        (0..upper_seed.len() as i64)
            .map(|i| cdf.eval(upper_seed.first_site + i))
            .collect(),
    );
    let seed_lipschitz = upper_seed.max_increment().max(lower_seed.max_increment()) / dx;
    debug_assert!(middle_seed.max_increment() <= p_star + INVARIANT_TOL);

    let steps = steps_to(t_final, spec.dt());
    let mut times = vec![0.0];
    let mut lower_excess = vec![max_excess(&lower_seed, &middle_seed)];
    let mut upper_excess = vec![max_excess(&middle_seed, &upper_seed)];
    let mut lower = lower_seed;
    let mut middle = middle_seed;
    let mut upper = upper_seed;
    for _ in 0..steps {
        lower = run_steps(&lower, &spec, 1, |_, _| {});
        middle = run_steps(&middle, &spec, 1, |_, _| {});
        upper = run_steps(&upper, &spec, 1, |_, _| {});
        times.push(middle.time);
        lower_excess.push(max_excess(&lower, &middle));
        upper_excess.push(max_excess(&middle, &upper));
    }
    let max_violation = lower_excess
        .iter()
        .chain(&upper_excess)
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let final_gap = max_excess(&upper, &lower);
    Ok(SandwichReport {
        m,
        eps,
        n_tilde,
        n_mesh,
        t_final,
        dx,
        dt: spec.dt(),
        pi,
        eta,
        seed_lipschitz,
        l_index: l,
        r_index: r,
        steps,
        times,
        lower_excess,
        upper_excess,
        max_violation,
        final_gap,
        ordered: max_violation <= ORDER_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice_measure::ModelParams;
    use crate::scm_engine::step_pmf;

    fn after_one_step() -> Pmf {
        step_pmf(&Pmf::delta(0), &ModelParams::symmetric(1.0).unwrap())
    }

    #[test]
    fn split_indices_for_two_atoms() {
        assert_eq!(split_indices(&after_one_step(), 0.2).unwrap(), (-2, 1));
        assert_eq!(
            split_indices(&Pmf::uniform(-3, 3).unwrap(), 0.2).unwrap(),
            (-3, 2)
        );
    }

    #[test]
    fn ordering_holds_through_unit_time() {
        let rep = sandwich_check(&after_one_step(), 1.0, 0.2, 64, 64, 1.0).unwrap();
        assert!(rep.ordered, "violation {}", rep.max_violation);
        assert_eq!(rep.steps, 64);
        assert!(rep.lower_excess[0] <= 0.0 && rep.upper_excess[0] <= 0.0);
        assert!(rep.seed_lipschitz * rep.dx < 0.5);
    }

    #[test]
    fn smaller_eps_tightens_the_gap() {
        let wide = sandwich_check(&after_one_step(), 1.0, 0.2, 64, 64, 1.0).unwrap();
        let tight = sandwich_check(&after_one_step(), 1.0, 0.05, 64, 64, 1.0).unwrap();
        assert!(tight.ordered);
        assert!(
            tight.final_gap < wide.final_gap,
            "{} vs {}",
            tight.final_gap,
            wide.final_gap
        );
    }

    #[test]
    fn coarse_mesh_is_rejected() {
        let err = sandwich_check(&after_one_step(), 1.0, 0.2, 64, 8, 1.0).unwrap_err();
        assert!(matches!(err, Error::MeshTooCoarse { .. }));
    }

    #[test]
    fn non_p_star_bounded_seed_is_rejected() {
        assert!(sandwich_check(&Pmf::delta(0), 1.0, 0.2, 64, 64, 1.0).is_err());
    }
}
