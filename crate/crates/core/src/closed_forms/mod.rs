//! Closed forms: the ZKB (Barenblatt) source solution of
//! `u_t = ½ (u^{m+1})_xx`, its antiderivative, the scaled symmetric Beta
//! limit with its constants, the lattice-class mixture for `R`-steps, and
//! the Gaussian solution of the heat case study.

pub mod special;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use special::{beta_fn, erfc, ln_beta, log_gamma, normal_cdf, reg_inc_beta};

fn check_m(m: f64) -> Result<()> {
    if m > 0.0 && m.is_finite() {
        Ok(())
    } else {
        Err(Error::DomainError(format!(
            "m must be a positive finite real, got {m}"
        )))
    }
}

fn check_q(q: f64) -> Result<()> {
    if q > 0.0 && q <= 1.0 {
        Ok(())
    } else {
        Err(Error::DomainError(format!("q must lie in (0, 1], got {q}")))
    }
}

/// `ρ = m / (2(m+2))`.
pub fn rho(m: f64) -> Result<f64> {
    check_m(m)?;
    Ok(m / (2.0 * (m + 2.0)))
}

/// `D = ρ^{-1/2} B(½, (m+1)/m)`.
pub fn big_d(m: f64) -> Result<f64> {
    let rho = rho(m)?;
    Ok(rho.powf(-0.5) * beta_fn(0.5, (m + 1.0) / m)?)
}

/// `p* = (m+1)^{-1/m}`, the site-mass threshold below which the dynamics
/// preserve stochastic order.
pub fn p_star(m: f64) -> Result<f64> {
    check_m(m)?;
    Ok((m + 1.0).powf(-1.0 / m))
}

/// Scale `c` of the limit `X_n / n^{1/(m+2)} → c (B - ½)` for `q`-lazy dynamics.
pub fn scale_constant(m: f64, q: f64) -> Result<f64> {
    check_q(q)?;
    let rho = rho(m)?;
    let d = big_d(m)?;
    let inv = 1.0 / (m + 2.0);
    Ok(
        2f64.powf((m + 1.0) * inv) * (m + 1.0).powf(inv) * q.powf(inv)
            / (d.powf(m * inv) * rho.sqrt()),
    )
}

/// Shape parameter `(m+1)/m` of the symmetric Beta law.
pub fn beta_shape(m: f64) -> f64 {
    (m + 1.0) / m
}

/// Parameters of the ZKB solution `Û(x, t + ε; θ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZkbSpec {
    pub theta: f64,
    pub eps: f64,
    pub m: f64,
}

impl ZkbSpec {
    pub fn new(theta: f64, eps: f64, m: f64) -> Result<Self> {
        check_m(m)?;
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::DomainError(format!(
                "theta must be positive, got {theta}"
            )));
        }
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::DomainError(format!(
                "eps must be nonnegative, got {eps}"
            )));
        }
        Ok(Self { theta, eps, m })
    }

    /// The ZKB profile at time `t` (the solution is evaluated at `t + ε`).
    pub fn at(&self, t: f64) -> Result<ZkbProfile> {
        ZkbProfile::new(*self, t)
    }
}

/// `Û(·, t + ε; θ)` frozen at one time, with its constants precomputed.
#[derive(Debug, Clone, Copy)]
pub struct ZkbProfile {
    spec: ZkbSpec,
    tau: f64,
    prefactor: f64,
    amplitude: f64,
    curvature: f64,
    half_width: f64,
}

impl ZkbProfile {
    pub fn new(spec: ZkbSpec, t: f64) -> Result<Self> {
        let tau = t + spec.eps;
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::DomainError(format!(
                "ZKB profile needs t + eps > 0 (a Dirac mass otherwise), got {tau}"
            )));
        }
        let m = spec.m;
        let rho = rho(m)?;
        let d = big_d(m)?;
        let inv = 1.0 / (m + 2.0);
        let amplitude =
            (std::f64::consts::SQRT_2 * spec.theta / (d * (m + 1.0).sqrt())).powf(2.0 * m * inv);
        let curvature = 2.0 * rho / ((m + 1.0) * tau.powf(2.0 * inv));
        Ok(Self {
            spec,
            tau,
            prefactor: tau.powf(-inv),
            amplitude,
            curvature,
            half_width: zkb_support(t, &spec)?,
        })
    }

    pub fn spec(&self) -> &ZkbSpec {
        &self.spec
    }

    /// Shifted time `t + ε`.
    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn density(&self, x: f64) -> f64 {
        let base = self.amplitude - self.curvature * x * x;
        if base <= 0.0 {
            0.0
        } else {
            self.prefactor * base.powf(1.0 / self.spec.m)
        }
    }

    /// Supremum of the density, attained at `x = 0`.
    pub fn peak(&self) -> f64 {
        self.density(0.0)
    }

    /// Half-width `Π` of the support `[-Π, Π]`.
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// `∫_{-∞}^x Û(y, t + ε; θ) dy`. On the support, `(1 + x/Π)/2` is a
    /// `Beta((m+1)/m, (m+1)/m)` variable, so this is a regularized
    /// incomplete Beta scaled by the mass `θ`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= -self.half_width {
            return 0.0;
        }
        if x >= self.half_width {
            return self.spec.theta;
        }
        let z = 0.5 * (1.0 + x / self.half_width);
        let a = beta_shape(self.spec.m);
        self.spec.theta
            * reg_inc_beta(z.clamp(0.0, 1.0), a, a).expect("shape parameters are positive")
    }
}

/// `Û(x, t + ε; θ)`.
pub fn zkb_density(x: f64, t: f64, spec: &ZkbSpec) -> Result<f64> {
    Ok(spec.at(t)?.density(x))
}

/// Support half-width `Π^θ(t + ε)`.
pub fn zkb_support(t: f64, spec: &ZkbSpec) -> Result<f64> {
    let tau = t + spec.eps;
    if !(tau > 0.0) {
        return Err(Error::DomainError(format!(
            "ZKB support needs t + eps > 0, got {tau}"
        )));
    }
    let m = spec.m;
    let inv = 1.0 / (m + 2.0);
    Ok(
        spec.theta.powf(m * inv) * (m + 1.0).powf(inv) * tau.powf(inv)
            / (2f64.powf(inv) * rho(m)?.sqrt() * big_d(m)?.powf(m * inv)),
    )
}

/// Integrated ZKB solution `∫_{-∞}^x Û(y, t + ε; θ) dy`.
pub fn zkb_cdf(x: f64, t: f64, spec: &ZkbSpec) -> Result<f64> {
    Ok(spec.at(t)?.cdf(x))
}

/// Parameters of the Beta limit law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitSpec {
    pub m: f64,
    pub q: f64,
}

impl LimitSpec {
    pub fn new(m: f64, q: f64) -> Result<Self> {
        check_m(m)?;
        check_q(q)?;
        Ok(Self { m, q })
    }

    pub fn law(&self) -> Result<BetaLimit> {
        BetaLimit::new(*self)
    }
}

/// The law of `c (B - ½)` with `B ~ Beta((m+1)/m, (m+1)/m)`.
#[derive(Debug, Clone, Copy)]
pub struct BetaLimit {
    shape: f64,
    scale: f64,
}

impl BetaLimit {
    pub fn new(spec: LimitSpec) -> Result<Self> {
        Ok(Self {
            shape: beta_shape(spec.m),
            scale: scale_constant(spec.m, spec.q)?,
        })
    }

    /// Law of `factor · c (B - ½)`.
    pub fn scaled(mut self, factor: f64) -> Self {
        self.scale *= factor;
        self
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn half_width(&self) -> f64 {
        0.5 * self.scale
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let z = x / self.scale + 0.5;
        if z <= 0.0 {
            0.0
        } else if z >= 1.0 {
            1.0
        } else {
            reg_inc_beta(z, self.shape, self.shape).expect("shape parameters are positive")
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        let z = x / self.scale + 0.5;
        if z <= 0.0 || z >= 1.0 {
            return 0.0;
        }
        let a = self.shape;
        ((a - 1.0) * (z * (1.0 - z)).ln() - ln_beta(a, a)).exp() / self.scale
    }

    pub fn variance(&self) -> f64 {
        self.scale * self.scale / (4.0 * (2.0 * self.shape + 1.0))
    }
}

/// CDF of the limit `X_n / n^{1/(m+2)}` for `q`-lazy symmetric cooperative motion.
pub fn limit_cdf(x: f64, spec: &LimitSpec) -> Result<f64> {
    Ok(spec.law()?.cdf(x))
}

/// Mixture limit for `±R` steps: conditional on the residue class `A = k`
/// (probability `π_k`), the rescaled position is `R π_k^{m/(m+2)} c (B - ½)`.
#[derive(Debug, Clone)]
pub struct LatticeLimit {
    components: Vec<(f64, BetaLimit)>,
}

impl LatticeLimit {
    pub fn new(spec: LimitSpec, step: u32, pi: &[f64]) -> Result<Self> {
        if step == 0 {
            return Err(Error::DomainError(
                "lattice step R must be at least 1".into(),
            ));
        }
        if pi.len() != step as usize {
            return Err(Error::DomainError(format!(
                "need {step} class weights, got {}",
                pi.len()
            )));
        }
        if let Some(&w) = pi.iter().find(|&&w| !(w >= 0.0)) {
            return Err(Error::DomainError(format!(
                "class weights must be nonnegative, got {w}"
            )));
        }
        let sum: f64 = pi.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidPi { sum });
        }
        let base = spec.law()?;
        let exponent = spec.m / (spec.m + 2.0);
        let components = pi
            .iter()
            .filter(|&&w| w > 0.0)
            .map(|&w| (w, base.scaled(step as f64 * w.powf(exponent))))
            .collect();
        Ok(Self { components })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.components.iter().map(|(w, law)| w * law.cdf(x)).sum()
    }

    /// Largest component half-width.
    pub fn half_width(&self) -> f64 {
        self.components
            .iter()
            .map(|(_, law)| law.half_width())
            .fold(0.0, f64::max)
    }
}

pub fn lattice_limit_cdf(x: f64, spec: &LimitSpec, step: u32, pi: &[f64]) -> Result<f64> {
    Ok(LatticeLimit::new(*spec, step, pi)?.cdf(x))
}

/// Gaussian CDF with variance `ε + t`: the solution of `v_t = ½ v_xx`
/// seeded with the variance-`ε` Gaussian antiderivative.
pub fn heat_solution(x: f64, t: f64, eps: f64) -> Result<f64> {
    let var = eps + t;
    if !(var > 0.0) || t < 0.0 {
        return Err(Error::DomainError(format!(
            "heat solution needs t >= 0 and eps + t > 0, got t = {t}, eps = {eps}"
        )));
    }
    Ok(normal_cdf(x / var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::adaptive_simpson;

    #[test]
    fn constants_at_m_equal_one() {
        assert!((rho(1.0).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert!((big_d(1.0).unwrap() - 4.0 * 6f64.sqrt() / 3.0).abs() < 1e-13);
        assert!((p_star(1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((p_star(2.0).unwrap() - 3f64.powf(-0.5)).abs() < 1e-15);
        let c = scale_constant(1.0, 1.0).unwrap();
        assert!((c - 3.3019).abs() < 1e-4, "scale = {c}");
        let pi = zkb_support(1.0, &ZkbSpec::new(1.0, 0.0, 1.0).unwrap()).unwrap();
        assert!((pi - c / 2.0).abs() < 1e-13);
        assert!((pi - 1.6510).abs() < 1e-4);
    }

    #[test]
    fn d_matches_its_integral_definition() {
        // D = 2 ∫_0^∞ (1 - ρ y²)_+^{1/m} dy
        for &m in &[0.5, 1.0, 2.0, 3.0] {
            let r = rho(m).unwrap();
            let end = r.powf(-0.5);
            let integral = 2.0
                * adaptive_simpson(
                    |y| (1.0 - r * y * y).max(0.0).powf(1.0 / m),
                    0.0,
                    end,
                    1e-13,
                );
            assert!((integral - big_d(m).unwrap()).abs() < 1e-9, "m = {m}");
        }
    }

    #[test]
    fn domain_errors() {
        assert!(rho(0.0).is_err());
        assert!(big_d(-1.0).is_err());
        assert!(scale_constant(1.0, 0.0).is_err());
        assert!(scale_constant(1.0, 1.5).is_err());
        assert!(ZkbSpec::new(1.0, 0.0, 1.0).unwrap().at(0.0).is_err());
        assert!(ZkbSpec::new(0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn zkb_density_examples() {
        let spec = ZkbSpec::new(1.0, 0.0, 1.0).unwrap();
        let prof = spec.at(1.0).unwrap();
        let expected = big_d(1.0).unwrap().powf(-2.0 / 3.0);
        assert!((prof.density(0.0) - expected).abs() < 1e-14);
        assert!((prof.density(0.0) - 0.4543).abs() < 1e-4);
        assert_eq!(prof.density(prof.half_width() * 1.0001), 0.0);
        assert_eq!(prof.density(-5.0), 0.0);
        // self-similarity Û(x, t) = t^{-1/3} Û(x t^{-1/3}, 1)
        for &t in &[0.3, 2.0, 7.5] {
            let pt = spec.at(t).unwrap();
            for &x in &[-1.2, 0.0, 0.4, 1.9] {
                let s = t.powf(-1.0 / 3.0);
                assert!((pt.density(x) - s * prof.density(x * s)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn zkb_support_scalings() {
        let one = ZkbSpec::new(1.0, 0.0, 1.5).unwrap();
        let half = ZkbSpec::new(0.5, 0.0, 1.5).unwrap();
        let a = zkb_support(2.0, &one).unwrap();
        let b = zkb_support(2.0, &half).unwrap();
        assert!((b - 0.5f64.powf(1.5 / 3.5) * a).abs() < 1e-14);
        assert!(zkb_support(1e-12, &one).unwrap() < 1e-3);
        // the support formula is where the density bracket vanishes
        let prof = one.at(2.0).unwrap();
        assert!(prof.density(0.999_999 * a) > 0.0);
        assert_eq!(prof.density(1.000_001 * a), 0.0);
    }

    #[test]
    fn zkb_cdf_examples() {
        let spec = ZkbSpec::new(0.7, 0.2, 2.0).unwrap();
        let prof = spec.at(1.0).unwrap();
        assert_eq!(prof.cdf(-prof.half_width()), 0.0);
        assert_eq!(prof.cdf(prof.half_width() + 1.0), 0.7);
        assert!((prof.cdf(0.0) - 0.35).abs() < 1e-15);
    }

    #[test]
    fn limit_law_identities() {
        let spec = LimitSpec::new(1.0, 1.0).unwrap();
        let law = spec.law().unwrap();
        assert_eq!(law.cdf(0.0), 0.5);
        assert_eq!(law.cdf(law.half_width()), 1.0);
        assert_eq!(law.cdf(-law.half_width() - 1.0), 0.0);
        let zkb = ZkbSpec::new(1.0, 0.0, 1.0).unwrap();
        for &x in &[-1.3, -0.2, 0.5, 1.0, 1.6] {
            assert!((law.cdf(x) - zkb_cdf(x, 1.0, &zkb).unwrap()).abs() < 1e-14);
        }
        // Var(Beta(2, 2)) = 1/20
        assert!((law.variance() - law.scale().powi(2) * 0.05).abs() < 1e-15);
    }

    #[test]
    fn lazy_scale_is_a_time_change() {
        for &(m, q) in &[(1.0, 0.5), (2.0, 0.25), (0.5, 0.9)] {
            let lazy = scale_constant(m, q).unwrap();
            let full = scale_constant(m, 1.0).unwrap();
            assert!((lazy - full * q.powf(1.0 / (m + 2.0))).abs() < 1e-14);
        }
    }

    #[test]
    fn lattice_mixture_examples() {
        let spec = LimitSpec::new(1.0, 1.0).unwrap();
        let law = spec.law().unwrap();
        for &x in &[-1.0, 0.3, 1.2] {
            assert_eq!(lattice_limit_cdf(x, &spec, 1, &[1.0]).unwrap(), law.cdf(x));
            let two = lattice_limit_cdf(x, &spec, 2, &[1.0, 0.0]).unwrap();
            assert!((two - law.cdf(x / 2.0)).abs() < 1e-15);
        }
        let mix = LatticeLimit::new(spec, 2, &[0.5, 0.5]).unwrap();
        assert!((mix.cdf(0.0) - 0.5).abs() < 1e-15);
        let expect = law.scaled(2.0 * 0.5f64.powf(1.0 / 3.0));
        assert!((mix.cdf(0.8) - expect.cdf(0.8)).abs() < 1e-15);
        assert!(matches!(
            LatticeLimit::new(spec, 2, &[0.5, 0.6]),
            Err(Error::InvalidPi { .. })
        ));
        assert!(LatticeLimit::new(spec, 2, &[1.0]).is_err());
    }

    #[test]
    fn heat_solution_examples() {
        assert_eq!(heat_solution(0.0, 1.0, 0.25).unwrap(), 0.5);
        assert!((heat_solution(1.0, 0.75, 0.25).unwrap() - 0.841_345).abs() < 1e-6);
        let seed = heat_solution(0.4, 0.0, 0.3).unwrap();
        assert!((seed - normal_cdf(0.4 / 0.3f64.sqrt())).abs() < 1e-16);
        assert!(heat_solution(0.0, 0.0, 0.0).is_err());
    }
}
