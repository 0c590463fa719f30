use serde::Serialize;

use crate::closed_forms::{LatticeLimit, LimitSpec};
use crate::error::{Error, Result};
use crate::lattice_measure::{
    kolmogorov_distance, DistributionFn, ModelParams, Pmf, RescaledCdf, INVARIANT_TOL,
};
use crate::scm_engine::{decrease_margin, Evolution};

use super::report::{Report, ReportDoc};

/// Extra steps over which the p* bound is re-checked once it is reached.
pub const PERSISTENCE_STEPS: u64 = 10;

/// Cap used for the hitting time recorded inside convergence reports.
const REPORT_HITTING_CAP: u64 = 10_000;

/// Uniform points added on the limit support.
const UNIFORM_POINTS: usize = 1000;

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub params: ModelParams,
    pub n_values: Vec<u64>,
    /// Kolmogorov distance between `X_n / n^{1/(m+2)}` and the limit law.
    pub distances: Vec<f64>,
    /// `None` if `max p ≤ p*` was not reached within the internal cap.
    pub p_star_time: Option<u64>,
    /// Largest `|total mass - 1|` seen across the reported times.
    pub mass_drift: f64,
    /// Residue-class weights used for the lattice mixture (length `R`).
    pub pi: Vec<f64>,
    pub all_monotone: bool,
}

impl Report for ConvergenceReport {
    fn to_doc(&self) -> ReportDoc {
        let p = &self.params;
        let mut doc = ReportDoc::new("convergence")
            .param("m", p.m)
            .param("q", p.q)
            .param("r", p.r)
            .param("R", p.step)
            .param("pi", self.pi.clone())
            .param("all_monotone", self.all_monotone)
            .array("n", self.n_values.iter().map(|&n| n as f64).collect())
            .array("distance", self.distances.clone())
            .fixture("mass_drift", self.mass_drift);
        if let Some(t) = self.p_star_time {
            doc = doc.fixture("p_star_time", t as f64);
        }
        if let Some(&d) = self.distances.last() {
            doc = doc.fixture("final_distance", d);
        }
        doc
    }
}

/// Evolves `mu` to each `n` and measures the Kolmogorov distance of the
/// rescaled CDF to the Beta limit (or, for `R > 1`, to the mixture weighted
/// by the residue classes of `mu` mod `R`).
pub fn convergence_report(
    mu: &Pmf,
    params: &ModelParams,
    n_values: &[u64],
) -> Result<ConvergenceReport> {
    if mu.has_infinite_atoms() {
        return Err(Error::DomainError(
            "convergence needs a measure on the integers (no mass at ±inf)".into(),
        ));
    }
    if !params.is_symmetric() {
        return Err(Error::DomainError(format!(
            "convergence needs r = 1/2, got {}",
            params.r
        )));
    }
    if n_values.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::DomainError("n values must be sorted".into()));
    }
    let pi = mu.residue_masses(params.step);
    let limit = LatticeLimit::new(LimitSpec::new(params.m, params.q)?, params.step, &pi)?;
    let limit_fn = |x: f64| limit.cdf(x);
    let hw = limit.half_width();
    let uniform: Vec<f64> = (0..UNIFORM_POINTS)
        .map(|i| -hw + 2.0 * hw * i as f64 / (UNIFORM_POINTS - 1) as f64)
        .collect();

    let mut ev = Evolution::new(mu.clone(), *params);
    let mut distances = Vec::with_capacity(n_values.len());
    let mut mass_drift = (mu.total_mass() - 1.0).abs();
    let mut all_monotone = true;
    for &n in n_values {
        let p = ev.advance_to(n)?;
        mass_drift = mass_drift.max((p.total_mass() - 1.0).abs());
        let cdf = p.cdf();
        all_monotone &= cdf.is_nondecreasing(INVARIANT_TOL);
        let scale = if n == 0 {
            1.0
        } else {
            (n as f64).powf(1.0 / (params.m + 2.0))
        };
        let rescaled = RescaledCdf::with_scale(cdf, scale);
        let mut grid = rescaled.jump_points();
        grid.extend_from_slice(&uniform);
        distances.push(kolmogorov_distance(
            &rescaled as &dyn DistributionFn,
            &limit_fn,
            &grid,
        )?);
    }
    let p_star_time = match p_star_hitting_time(mu, params, REPORT_HITTING_CAP) {
        Ok(t) => Some(t),
        Err(Error::CapExceeded { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(ConvergenceReport {
        params: *params,
        n_values: n_values.to_vec(),
        distances,
        p_star_time,
        mass_drift,
        pi,
        all_monotone,
    })
}

/// Least `n ≤ cap` with `max_k p^n_k ≤ p*`. The bound is then re-checked for
/// [`PERSISTENCE_STEPS`] further steps.
pub fn p_star_hitting_time(mu: &Pmf, params: &ModelParams, cap: u64) -> Result<u64> {
    if cap < 1 {
        return Err(Error::DomainError("cap must be at least 1".into()));
    }
    let p_star = params.p_star();
    let bounded = |p: &Pmf| p.max_weight() <= p_star + INVARIANT_TOL;
    let mut ev = Evolution::new(mu.clone(), *params);
    while !bounded(ev.current()) {
        if ev.time() >= cap {
            return Err(Error::CapExceeded { cap });
        }
        ev.step()?;
    }
    let hit = ev.time();
    for _ in 0..PERSISTENCE_STEPS {
        if !bounded(ev.step()?) {
            return Err(Error::BoundNotPreserved {
                hit,
                lost: ev.time(),
            });
        }
    }
    Ok(hit)
}

/// Per-step decrease of the largest atom while it exceeds `p*`.
#[derive(Debug, Clone, Serialize)]
pub struct DecreaseReport {
    pub max_weights: Vec<f64>,
    /// Smallest one-step drop of a supra-p* neighbourhood maximum.
    pub min_margin: Option<f64>,
    /// Smallest `(max_n - max_{n+1}) / (max_n - p*)` over steps above `p*`.
    pub relative_rate: Option<f64>,
}

impl Report for DecreaseReport {
    fn to_doc(&self) -> ReportDoc {
        let mut doc = ReportDoc::new("decrease").array("max_weight", self.max_weights.clone());
        if let Some(v) = self.min_margin {
            doc = doc.fixture("min_margin", v);
        }
        if let Some(v) = self.relative_rate {
            doc = doc.fixture("relative_rate", v);
        }
        doc
    }
}

/// Measures how fast atoms above `p*` shrink, for at most `steps` steps or
/// until the PMF becomes p*-bounded.
pub fn decrease_constant(mu: &Pmf, params: &ModelParams, steps: u64) -> Result<DecreaseReport> {
    let p_star = params.p_star();
    let mut ev = Evolution::new(mu.clone(), *params);
    let mut max_weights = vec![mu.max_weight()];
    let mut min_margin: Option<f64> = None;
    let mut relative_rate: Option<f64> = None;
    for _ in 0..steps {
        let before = ev.current().max_weight();
        if before <= p_star {
            break;
        }
        if let Some(d) = decrease_margin(ev.current(), params) {
            min_margin = Some(min_margin.map_or(d, |m| m.min(d)));
        }
        let after = ev.step()?.max_weight();
        let rate = (before - after) / (before - p_star);
        relative_rate = Some(relative_rate.map_or(rate, |r| r.min(rate)));
        max_weights.push(after);
    }
    Ok(DecreaseReport {
        max_weights,
        min_margin,
        relative_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hitting_time_examples() {
        let m1 = ModelParams::symmetric(1.0).unwrap();
        assert_eq!(p_star_hitting_time(&Pmf::delta(0), &m1, 100).unwrap(), 1);
        assert_eq!(
            p_star_hitting_time(&Pmf::uniform(0, 3).unwrap(), &m1, 100).unwrap(),
            0
        );
        let m2 = ModelParams::symmetric(2.0).unwrap();
        // one step gives max p = 1/2 < 3^{-1/2}
        assert_eq!(p_star_hitting_time(&Pmf::delta(0), &m2, 100).unwrap(), 1);
        let half = ModelParams::symmetric(0.5).unwrap();
        let t = p_star_hitting_time(&Pmf::delta(0), &half, 100).unwrap();
        assert!(t > 1);
        assert!(matches!(
            p_star_hitting_time(&Pmf::delta(0), &half, t - 1),
            Err(Error::CapExceeded { .. })
        ));
        assert!(p_star_hitting_time(&Pmf::delta(0), &m1, 0).is_err());
    }

    #[test]
    fn convergence_rejects_atoms_at_infinity() {
        let p = Pmf::from_weights(0, vec![0.5], 0.5, 0.0).unwrap();
        let params = ModelParams::symmetric(1.0).unwrap();
        assert!(convergence_report(&p, &params, &[1]).is_err());
    }

    #[test]
    fn convergence_at_small_n() {
        let params = ModelParams::symmetric(1.0).unwrap();
        let rep = convergence_report(&Pmf::delta(0), &params, &[4, 16, 64]).unwrap();
        assert_eq!(rep.distances.len(), 3);
        assert!(
            rep.distances.windows(2).all(|w| w[1] < w[0]),
            "{:?}",
            rep.distances
        );
        assert_eq!(rep.p_star_time, Some(1));
        assert!(rep.mass_drift < 1e-10);
        assert!(rep.all_monotone);
    }

    #[test]
    fn decrease_from_a_delta() {
        let params = ModelParams::symmetric(2.0).unwrap();
        let rep = decrease_constant(&Pmf::delta(0), &params, 100).unwrap();
        assert!(rep.max_weights.windows(2).all(|w| w[1] < w[0]));
        assert!(rep.min_margin.unwrap() > 0.0);
        assert!(rep.relative_rate.unwrap() > 0.0);
    }
}
