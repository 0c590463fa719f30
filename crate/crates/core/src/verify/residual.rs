use serde::Serialize;

use crate::closed_forms::ZkbSpec;
use crate::error::{Error, Result};
use crate::fd_scheme::TestFunction;
use crate::quadrature::simpson_weights;

use super::report::{Report, ReportDoc};

/// Largest `|u_t - ½ (u^{m+1})_xx|` over `points`, using centred differences
/// with probe spacing `h` in both `x` and `t` on the ZKB profile `Û(·, t + ε; θ)`.
/// Every stencil point must lie strictly inside the support.
pub fn pde_residual_classical(spec: &ZkbSpec, t: f64, h: f64, points: &[f64]) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::DomainError(format!(
            "probe spacing must be positive, got {h}"
        )));
    }
    if points.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let before = spec.at(t - h)?;
    let now = spec.at(t)?;
    let after = spec.at(t + h)?;
    let inner = before.half_width().min(now.half_width());
    let m = spec.m;
    let psi = |x: f64| 0.5 * now.density(x).powf(m + 1.0);
    let mut worst = 0.0f64;
    for &x in points {
        if x.abs() + h >= inner {
            return Err(Error::DomainError(format!(
                "probe stencil at x = {x} with h = {h} leaves the open support (half-width {inner})"
            )));
        }
        let ut = (after.density(x) - before.density(x)) / (2.0 * h);
        let pxx = (psi(x + h) - 2.0 * psi(x) + psi(x - h)) / (h * h);
        worst = worst.max((ut - pxx).abs());
    }
    Ok(worst)
}

/// Classical residuals at `h0, h0/2, …` (`levels` values).
pub fn classical_residual_study(
    spec: &ZkbSpec,
    t: f64,
    h0: f64,
    levels: usize,
    points: &[f64],
) -> Result<Vec<(f64, f64)>> {
    (0..levels)
        .map(|i| {
            let h = h0 / 2f64.powi(i as i32);
            Ok((h, pde_residual_classical(spec, t, h, points)?))
        })
        .collect()
}

/// Samples of `u` on a tensor grid `x_i = x0 + i dx` (`i ≤ nx`), `t_j = j dt` (`j ≤ nt`).
#[derive(Debug, Clone)]
pub struct SpaceTimeGrid {
    pub x0: f64,
    pub dx: f64,
    pub nx: usize,
    pub dt: f64,
    pub nt: usize,
    /// Row-major by time: `values[j * (nx + 1) + i] = u(x_i, t_j)`.
    pub values: Vec<f64>,
}

impl SpaceTimeGrid {
    pub fn sample<F: Fn(f64, f64) -> f64>(
        u: F,
        x_range: (f64, f64),
        t_final: f64,
        nx: usize,
        nt: usize,
    ) -> Result<Self> {
        if nx == 0 || nt == 0 || !(x_range.1 > x_range.0) || !(t_final > 0.0) {
            return Err(Error::DomainError(
                "grid needs positive extents and interval counts".into(),
            ));
        }
        let dx = (x_range.1 - x_range.0) / nx as f64;
        let dt = t_final / nt as f64;
        let mut values = Vec::with_capacity((nx + 1) * (nt + 1));
        for j in 0..=nt {
            for i in 0..=nx {
                values.push(u(x_range.0 + i as f64 * dx, j as f64 * dt));
            }
        }
        Ok(Self {
            x0: x_range.0,
            dx,
            nx,
            dt,
            nt,
            values,
        })
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    pub fn t(&self, j: usize) -> f64 {
        j as f64 * self.dt
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * (self.nx + 1) + i]
    }

    pub fn x_end(&self) -> f64 {
        self.x(self.nx)
    }

    pub fn t_end(&self) -> f64 {
        self.t(self.nt)
    }
}

/// `φ(x, t) = (1 - s²)⁴ (1 - (t/T)²)⁴` with `s = (x - c)/a`, supported on
/// `[c - a, c + a] × [0, T]`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BumpTest {
    pub center: f64,
    pub half_width: f64,
    pub horizon: f64,
}

impl BumpTest {
    pub fn new(center: f64, half_width: f64, horizon: f64) -> Result<Self> {
        if !(half_width > 0.0 && horizon > 0.0) {
            return Err(Error::DomainError(
                "bump needs positive width and horizon".into(),
            ));
        }
        Ok(Self {
            center,
            half_width,
            horizon,
        })
    }

    fn s(&self, x: f64) -> f64 {
        (x - self.center) / self.half_width
    }

    fn space(&self, x: f64) -> f64 {
        let s = self.s(x);
        if s.abs() >= 1.0 {
            0.0
        } else {
            (1.0 - s * s).powi(4)
        }
    }

    fn time(&self, t: f64) -> f64 {
        let u = t / self.horizon;
        if !(0.0..1.0).contains(&u) {
            0.0
        } else {
            (1.0 - u * u).powi(4)
        }
    }

    pub fn dt(&self, x: f64, t: f64) -> f64 {
        let u = t / self.horizon;
        if !(0.0..1.0).contains(&u) {
            return 0.0;
        }
        -8.0 * u * (1.0 - u * u).powi(3) / self.horizon * self.space(x)
    }
}

impl TestFunction for BumpTest {
    fn value(&self, x: f64, t: f64) -> f64 {
        self.space(x) * self.time(t)
    }

    fn dx(&self, x: f64, t: f64) -> f64 {
        let s = self.s(x);
        if s.abs() >= 1.0 {
            return 0.0;
        }
        -8.0 * s * (1.0 - s * s).powi(3) / self.half_width * self.time(t)
    }

    fn dxx(&self, x: f64, t: f64) -> f64 {
        let s = self.s(x);
        if s.abs() >= 1.0 {
            return 0.0;
        }
        let a = self.half_width;
        -8.0 * (1.0 - s * s).powi(2) * (1.0 - 7.0 * s * s) / (a * a) * self.time(t)
    }
}

/// `∫∫ u φ_t + Ψ(u) φ_xx dx dt + ∫ u(x, 0) φ(x, 0) dx` with `Ψ(u) = ½ u^{k+1}`
/// (`k = psi_exponent`), by composite Simpson on the grid of `u`.
pub fn distributional_residual(
    u: &SpaceTimeGrid,
    psi_exponent: f64,
    phi: &BumpTest,
) -> Result<f64> {
    let (a, b) = (phi.center - phi.half_width, phi.center + phi.half_width);
    let slack = 1e-12 * (1.0 + a.abs().max(b.abs()));
    if a < u.x0 - slack || b > u.x_end() + slack || phi.horizon > u.t_end() * (1.0 + 1e-12) {
        return Err(Error::SupportEscape {
            lo: a,
            hi: b,
            grid_lo: u.x0,
            grid_hi: u.x_end(),
        });
    }
    if !u.nx.is_multiple_of(2) || !u.nt.is_multiple_of(2) {
        return Err(Error::DomainError(
            "Simpson quadrature needs even interval counts".into(),
        ));
    }
    let wx = simpson_weights(u.nx, u.dx);
    let wt = simpson_weights(u.nt, u.dt);
    let mut bulk = 0.0;
    for (j, wtj) in wt.iter().enumerate() {
        let t = u.t(j);
        let mut row = 0.0;
        for (i, wxi) in wx.iter().enumerate() {
            let x = u.x(i);
            let v = u.get(i, j);
            row += wxi * (v * phi.dt(x, t) + 0.5 * v.powf(psi_exponent + 1.0) * phi.dxx(x, t));
        }
        bulk += wtj * row;
    }
    let initial: f64 = wx
        .iter()
        .enumerate()
        .map(|(i, w)| w * u.get(i, 0) * phi.value(u.x(i), 0.0))
        .sum();
    Ok(bulk + initial)
}

/// Starting grid and stopping rule for [`residual_refinement`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct QuadratureSpec {
    pub x_range: (f64, f64),
    pub t_final: f64,
    pub nx: usize,
    pub nt: usize,
    pub max_doublings: usize,
    /// Stop once successive residuals differ by less than this fraction.
    pub rel_change: f64,
    /// Stop once the residual is below this magnitude.
    pub abs_floor: f64,
}

impl QuadratureSpec {
    pub fn new(x_range: (f64, f64), t_final: f64, nx: usize, nt: usize) -> Self {
        Self {
            x_range,
            t_final,
            nx,
            nt,
            max_doublings: 6,
            rel_change: 0.1,
            abs_floor: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RefinementReport {
    pub psi_exponent: f64,
    pub nx: Vec<usize>,
    pub residuals: Vec<f64>,
    pub converged: bool,
}

impl RefinementReport {
    pub fn last(&self) -> f64 {
        *self.residuals.last().expect("at least one level")
    }
}

impl Report for RefinementReport {
    fn to_doc(&self) -> ReportDoc {
        ReportDoc::new("residual")
            .param("psi_exponent", self.psi_exponent)
            .param("converged", self.converged)
            .array("nx", self.nx.iter().map(|&n| n as f64).collect())
            .array("residual", self.residuals.clone())
            .fixture("final_residual", self.last())
    }
}

/// Resamples `u` on successively doubled grids until the residual settles
/// (relative change below `rel_change`), drops below `abs_floor`, or
/// `max_doublings` is reached.
pub fn residual_refinement<F: Fn(f64, f64) -> f64>(
    u: F,
    psi_exponent: f64,
    phi: &BumpTest,
    quad: &QuadratureSpec,
) -> Result<RefinementReport> {
    let mut nx = Vec::new();
    let mut residuals: Vec<f64> = Vec::new();
    let mut converged = false;
    for level in 0..=quad.max_doublings {
        let scale = 1usize << level;
        let grid = SpaceTimeGrid::sample(
            &u,
            quad.x_range,
            quad.t_final,
            quad.nx * scale,
            quad.nt * scale,
        )?;
        let r = distributional_residual(&grid, psi_exponent, phi)?;
        nx.push(grid.nx);
        let settled = residuals
            .last()
            .is_some_and(|&prev: &f64| (r - prev).abs() < quad.rel_change * prev.abs());
        residuals.push(r);
        if settled || r.abs() < quad.abs_floor {
            converged = true;
            break;
        }
    }
    Ok(RefinementReport {
        psi_exponent,
        nx,
        residuals,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zkb() -> ZkbSpec {
        ZkbSpec::new(1.0, 0.5, 1.0).unwrap()
    }

    #[test]
    fn bump_derivatives_match_differences() {
        let phi = BumpTest::new(0.2, 1.5, 1.0).unwrap();
        let h = 1e-5;
        for &(x, t) in &[(0.1, 0.3), (-0.9, 0.7), (1.2, 0.1)] {
            let fx = (phi.value(x + h, t) - phi.value(x - h, t)) / (2.0 * h);
            let fxx = (phi.value(x + h, t) - 2.0 * phi.value(x, t) + phi.value(x - h, t)) / (h * h);
            let ft = (phi.value(x, t + h) - phi.value(x, t - h)) / (2.0 * h);
            assert!((fx - phi.dx(x, t)).abs() < 1e-7);
            assert!((fxx - phi.dxx(x, t)).abs() < 1e-4);
            assert!((ft - phi.dt(x, t)).abs() < 1e-7);
        }
        assert_eq!(phi.value(2.0, 0.5), 0.0);
        assert_eq!(phi.value(0.0, 1.0), 0.0);
    }

    #[test]
    fn zero_field_has_zero_residual() {
        let g = SpaceTimeGrid::sample(|_, _| 0.0, (-3.0, 3.0), 1.0, 40, 20).unwrap();
        let phi = BumpTest::new(0.0, 2.0, 1.0).unwrap();
        assert_eq!(distributional_residual(&g, 1.0, &phi).unwrap(), 0.0);
    }

    #[test]
    fn support_escape_is_reported() {
        let g = SpaceTimeGrid::sample(|_, _| 0.0, (-1.0, 1.0), 1.0, 20, 20).unwrap();
        let phi = BumpTest::new(0.0, 2.0, 1.0).unwrap();
        assert!(matches!(
            distributional_residual(&g, 1.0, &phi),
            Err(Error::SupportEscape { .. })
        ));
    }

    #[test]
    fn classical_residual_is_second_order() {
        let spec = zkb();
        let hw = spec.at(1.0).unwrap().half_width();
        let points: Vec<f64> = (-4..=4).map(|i| 0.15 * hw * i as f64).collect();
        let study = classical_residual_study(&spec, 1.0, 0.04, 4, &points).unwrap();
        for w in study.windows(2) {
            assert!(w[0].1 / w[1].1 >= 3.0, "{study:?}");
        }
    }

    #[test]
    fn probe_outside_support_is_rejected() {
        let spec = zkb();
        assert!(pde_residual_classical(&spec, 1.0, 0.1, &[5.0]).is_err());
    }

    #[test]
    fn true_exponent_beats_wrong_exponent() {
        let spec = zkb();
        let u = |x: f64, t: f64| spec.at(t).unwrap().density(x);
        let phi = BumpTest::new(0.0, 2.5, 1.0).unwrap();
        let quad = QuadratureSpec {
            max_doublings: 3,
            ..QuadratureSpec::new((-2.5, 2.5), 1.0, 40, 20)
        };
        let good = residual_refinement(u, 1.0, &phi, &quad).unwrap();
        let bad = residual_refinement(u, 2.0, &phi, &quad).unwrap();
        assert!(
            good.residuals.windows(2).all(|w| w[1].abs() < w[0].abs()),
            "{good:?}"
        );
        assert!(
            bad.last().abs() >= 10.0 * good.last().abs(),
            "{bad:?} {good:?}"
        );
    }
}
