use serde::Serialize;

use crate::closed_forms::special::normal_cdf;
use crate::closed_forms::{heat_solution, LimitSpec};
use crate::error::{Error, Result};
use crate::fd_scheme::{discretize_initial, run_steps, SchemeSpec};

use super::report::{Report, ReportDoc};

/// Half-width of the mesh in standard deviations of the final Gaussian.
const TAIL_SIGMAS: f64 = 10.0;

#[derive(Debug, Clone, Serialize)]
pub struct CltReport {
    pub n: u32,
    pub eps: f64,
    /// Sup over mesh points of `|v^N(x, 1) - Φ(x / √(1+ε))|`.
    pub sup_error: f64,
    /// Sup over `x ∈ ℤ/N` of `|P(S_{N²} ≤ xN) - Φ(x)|`.
    pub binomial_sup_error: f64,
    /// Largest gap between the Heaviside-seeded scheme and the binomial CDF.
    pub scheme_binomial_gap: f64,
    /// `P(S_{N²} ≤ 0)`.
    pub binomial_at_zero: f64,
}

impl Report for CltReport {
    fn to_doc(&self) -> ReportDoc {
        ReportDoc::new("clt")
            .param("N", self.n)
            .param("eps", self.eps)
            .fixture("sup_error", self.sup_error)
            .fixture("binomial_sup_error", self.binomial_sup_error)
            .fixture("scheme_binomial_gap", self.scheme_binomial_gap)
            .fixture("binomial_at_zero", self.binomial_at_zero)
    }
}

/// `P(S_n ≤ j)` for `j = -n..=n`, where `S_n` is a simple ±1 walk.
/// Binomial weights come from the ratio recurrence outward from the mode,
/// normalized at the end.
fn walk_cdf(n: u64) -> Vec<f64> {
    let mode = n / 2;
    let mut w = vec![0.0; n as usize + 1];
    w[mode as usize] = 1.0;
    for b in mode..n {
        w[b as usize + 1] = w[b as usize] * (n - b) as f64 / (b + 1) as f64;
    }
    for b in (1..=mode).rev() {
        w[b as usize - 1] = w[b as usize] * b as f64 / (n - b + 1) as f64;
    }
    let total: f64 = w.iter().sum();
    let mut out = vec![0.0; 2 * n as usize + 1];
    let mut acc = 0.0;
    for (b, wb) in w.iter().enumerate() {
        acc += wb / total;
        // S = 2b - n; fill that value and the odd gap above it
        let j = 2 * b;
        out[j] = acc.min(1.0);
        if j + 1 < out.len() {
            out[j + 1] = acc.min(1.0);
        }
    }
    out
}

/// Runs the heat scheme at mesh `Δx = 1/N` from the variance-`ε` Gaussian
/// CDF to `t = 1` and compares with the variance-`(1+ε)` Gaussian CDF, then
/// cross-checks a Heaviside-seeded run against the exact ±1 walk.
pub fn clt_case_study(n: u32, eps: f64) -> Result<CltReport> {
    if n < 4 {
        return Err(Error::DomainError(format!("N must be at least 4, got {n}")));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::DomainError(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let spec = SchemeSpec::heat(n as f64)?;
    let steps = n as u64 * n as u64;
    let reach = TAIL_SIGMAS * (1.0 + eps).sqrt() + 1.0;
    let seed = discretize_initial(|x| normal_cdf(x / eps.sqrt()), &spec, (-reach, reach))?;
    let out = run_steps(&seed, &spec, steps, |_, _| {});
    let mut sup_error = 0.0f64;
    for (i, v) in out.values.iter().enumerate() {
        sup_error = sup_error.max((v - heat_solution(out.x(i), 1.0, eps)?).abs());
    }

    let walk = walk_cdf(steps);
    let at = |j: i64| -> f64 {
        if j < -(steps as i64) {
            0.0
        } else if j >= steps as i64 {
            1.0
        } else {
            walk[(j + steps as i64) as usize]
        }
    };
    let sites = (reach * n as f64).ceil() as i64;
    let binomial_sup_error = (-sites..=sites)
        .map(|j| (at(j) - normal_cdf(j as f64 / n as f64)).abs())
        .fold(0.0, f64::max);
    let heaviside =
        discretize_initial(|x| if x >= 0.0 { 1.0 } else { 0.0 }, &spec, (-reach, reach))?;
    let walked = run_steps(&heaviside, &spec, steps, |_, _| {});
    let scheme_binomial_gap = (0..walked.len())
        .map(|i| (walked.values[i] - at(walked.first_site + i as i64)).abs())
        .fold(0.0, f64::max);
    Ok(CltReport {
        n,
        eps,
        sup_error,
        binomial_sup_error,
        scheme_binomial_gap,
        binomial_at_zero: at(0),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MZeroReport {
    pub m_values: Vec<f64>,
    /// `scale(m, 1)² · Var(Beta((m+1)/m, (m+1)/m))` per `m`.
    pub variances: Vec<f64>,
}

impl Report for MZeroReport {
    fn to_doc(&self) -> ReportDoc {
        ReportDoc::new("mzero")
            .array("m", self.m_values.clone())
            .array("variance", self.variances.clone())
    }
}

/// Variance of the `q = 1` limit law for each `m`; tends to 1 as `m → 0`.
pub fn m_to_zero_check(m_values: &[f64]) -> Result<MZeroReport> {
    let variances = m_values
        .iter()
        .map(|&m| Ok(LimitSpec::new(m, 1.0)?.law()?.variance()))
        .collect::<Result<Vec<_>>>()?;
    Ok(MZeroReport {
        m_values: m_values.to_vec(),
        variances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_forms::special::log_gamma;

    #[test]
    fn walk_cdf_small_cases() {
        let c = walk_cdf(2);
        // S_2 ∈ {-2, 0, 2} with probabilities ¼, ½, ¼
        let expect = [0.25, 0.25, 0.75, 0.75, 1.0];
        for (a, b) in c.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn small_mesh_case_study() {
        let rep = clt_case_study(16, 0.25).unwrap();
        assert!(rep.sup_error < 0.02);
        assert!(
            rep.scheme_binomial_gap < 1e-12,
            "{}",
            rep.scheme_binomial_gap
        );
        let atom =
            (log_gamma(257.0) - 2.0 * log_gamma(129.0) - 256.0 * std::f64::consts::LN_2).exp();
        assert!((rep.binomial_at_zero - 0.5 - atom / 2.0).abs() < 1e-12);
        assert!(clt_case_study(3, 0.25).is_err());
    }

    #[test]
    fn m_to_zero_values() {
        let rep = m_to_zero_check(&[1.0, 0.05, 0.02]).unwrap();
        let scale = crate::closed_forms::scale_constant(1.0, 1.0).unwrap();
        assert!((rep.variances[0] - scale * scale * 0.05).abs() < 1e-12);
        assert!((rep.variances[1] - 1.0).abs() < 0.1);
        assert!((rep.variances[2] - 1.0).abs() < (rep.variances[1] - 1.0).abs());
    }
}
