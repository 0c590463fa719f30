//! Explicit finite-difference schemes on a uniform mesh: the integrated
//! porous-medium (parabolic p-Laplace) scheme with `Δt = Δx^{m+2}`, the heat
//! scheme with `Δt = Δx²`, and numeric checkers for monotonicity,
//! consistency and stability.
//!
//! The mesh is a finite window of the real line with clamped ghost cells
//! (each endpoint value is copied outward), which is exact for data that is
//! flat near both ends.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::sig15;
use crate::lattice_measure::ModelParams;
use crate::scm_engine::SchemeStencil;

/// Meshes at least this long are stepped in parallel.
const PARALLEL_SITES: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SchemeKind {
    PLaplace { m: f64, q: f64 },
    Heat,
}

impl SchemeKind {
    pub fn label(&self) -> String {
        match self {
            SchemeKind::PLaplace { m, q } => format!("p_laplace(m={},q={})", sig15(*m), sig15(*q)),
            SchemeKind::Heat => "heat".to_string(),
        }
    }

    pub fn parse_label(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "heat" {
            return Ok(SchemeKind::Heat);
        }
        let inner = s
            .strip_prefix("p_laplace(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| Error::Parse(format!("unknown scheme kind {s:?}")))?;
        let (mut m, mut q) = (None, None);
        for part in inner.split(',') {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad scheme parameter {part:?}")))?;
            let v: f64 = v
                .parse()
                .map_err(|_| Error::Parse(format!("bad number {v:?}")))?;
            match k.trim() {
                "m" => m = Some(v),
                "q" => q = Some(v),
                other => return Err(Error::Parse(format!("unknown scheme parameter {other:?}"))),
            }
        }
        match (m, q) {
            (Some(m), Some(q)) => Ok(SchemeKind::PLaplace { m, q }),
            _ => Err(Error::Parse(format!("scheme kind {s:?} needs m and q"))),
        }
    }
}

/// A scheme kind together with its refinement parameter `N`.
#[derive(Debug, Clone, Copy)]
pub struct SchemeSpec {
    kind: SchemeKind,
    n: f64,
    stencil: Option<SchemeStencil>,
}

impl SchemeSpec {
    pub fn new(kind: SchemeKind, n: f64) -> Result<Self> {
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::DomainError(format!("N must be positive, got {n}")));
        }
        let stencil = match kind {
            SchemeKind::PLaplace { m, q } => Some(SchemeStencil::new(ModelParams::lazy(m, q)?)),
            SchemeKind::Heat => None,
        };
        Ok(Self { kind, n, stencil })
    }

    pub fn p_laplace(m: f64, n: f64) -> Result<Self> {
        Self::new(SchemeKind::PLaplace { m, q: 1.0 }, n)
    }

    pub fn heat(n: f64) -> Result<Self> {
        Self::new(SchemeKind::Heat, n)
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    /// `Δx = N^{-1/(m+2)}` (p-Laplace) or `1/N` (heat).
    pub fn dx(&self) -> f64 {
        match self.kind {
            SchemeKind::PLaplace { m, .. } => self.n.powf(-1.0 / (m + 2.0)),
            SchemeKind::Heat => 1.0 / self.n,
        }
    }

    /// `Δt = 1/N` (p-Laplace) or `1/N²` (heat).
    pub fn dt(&self) -> f64 {
        match self.kind {
            SchemeKind::PLaplace { .. } => 1.0 / self.n,
            SchemeKind::Heat => 1.0 / (self.n * self.n),
        }
    }

    /// Largest per-site increment for which the update is order preserving.
    pub fn p_star(&self) -> f64 {
        match self.kind {
            SchemeKind::PLaplace { m, .. } => (m + 1.0).powf(-1.0 / m),
            SchemeKind::Heat => 1.0,
        }
    }

    /// One-site update `b - Δt 𝒢^N(a, b, c)`.
    ///
    /// For p-Laplace this is `b + (q/2)[|c-b|^m (c-b) - |b-a|^m (b-a)]`: the
    /// factor `(Δt/Δx)·Δx^{-(m+1)}` is identically 1 under the mesh law and
    /// is not multiplied in, so mesh values coincide with the lattice CDF
    /// recurrence.
    #[inline]
    pub fn update(&self, a: f64, b: f64, c: f64) -> f64 {
        match &self.stencil {
            Some(s) => s.map(a, b, c),
            None => 0.5 * (a + c),
        }
    }

    /// The discrete operator `𝒢^N(a, b, c)`.
    pub fn operator(&self, a: f64, b: f64, c: f64) -> f64 {
        (b - self.update(a, b, c)) / self.dt()
    }

    /// The limit operator `G(p, X)`: `-((m+1)/2) q |p|^m X` or `-X/2`.
    pub fn limit_operator(&self, p: f64, x: f64) -> f64 {
        match self.kind {
            SchemeKind::PLaplace { m, q } => -0.5 * (m + 1.0) * q * p.abs().powf(m) * x,
            SchemeKind::Heat => -0.5 * x,
        }
    }
}

/// A piecewise-constant mesh function at one time level. Site `i` covers
/// `[(first_site + i) Δx, (first_site + i + 1) Δx)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshFn {
    pub dx: f64,
    pub dt: f64,
    pub first_site: i64,
    pub values: Vec<f64>,
    pub time: f64,
}

impl MeshFn {
    pub fn origin(&self) -> f64 {
        self.first_site as f64 * self.dx
    }

    pub fn x(&self, i: usize) -> f64 {
        (self.first_site + i as i64) as f64 * self.dx
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at lattice site `k`, clamped to the endpoint values outside the window.
    pub fn at_site(&self, k: i64) -> f64 {
        let i = (k - self.first_site).clamp(0, self.values.len() as i64 - 1);
        self.values[i as usize]
    }

    /// Piecewise-constant evaluation `v(⌊x/Δx⌋ Δx)`.
    pub fn eval(&self, x: f64) -> f64 {
        self.at_site((x / self.dx).floor() as i64)
    }

    /// Adds a constant to every value.
    pub fn offset_by(&self, lambda: f64) -> MeshFn {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v += lambda);
        out
    }

    /// Largest `|v_{i+1} - v_i|`.
    pub fn max_increment(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_nondecreasing(&self, tol: f64) -> bool {
        self.values.windows(2).all(|w| w[1] >= w[0] - tol)
    }

    /// CSV snapshot: `#` metadata lines for dx, dt, time, kind and the first
    /// site, then columns `x,v`.
    pub fn to_csv(&self, kind: &SchemeKind) -> String {
        let mut out = format!(
            "# dx={}\n# dt={}\n# time={}\n# kind={}\n# first_site={}\nx,v\n",
            sig15(self.dx),
            sig15(self.dt),
            sig15(self.time),
            kind.label(),
            self.first_site
        );
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{},{}\n", sig15(self.x(i)), sig15(*v)));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<(MeshFn, SchemeKind)> {
        let (mut dx, mut dt, mut time, mut kind, mut first) = (None, None, None, None, None);
        let mut values = Vec::new();
        let mut header_seen = false;
        let num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number {v:?}")))
        };
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(meta) = line.strip_prefix('#') {
                let (k, v) = meta
                    .split_once('=')
                    .ok_or_else(|| Error::Parse(format!("bad metadata line {line:?}")))?;
                match k.trim() {
                    "dx" => dx = Some(num(v)?),
                    "dt" => dt = Some(num(v)?),
                    "time" => time = Some(num(v)?),
                    "kind" => kind = Some(SchemeKind::parse_label(v)?),
                    "first_site" => {
                        first = Some(
                            v.trim()
                                .parse::<i64>()
                                .map_err(|_| Error::Parse(format!("bad site {v:?}")))?,
                        )
                    }
                    _ => {}
                }
            } else if !header_seen {
                if line.replace(' ', "") != "x,v" {
                    return Err(Error::Parse(format!(
                        "expected header `x,v`, found {line:?}"
                    )));
                }
                header_seen = true;
            } else {
                let (_, v) = line
                    .split_once(',')
                    .ok_or_else(|| Error::Parse(format!("malformed row {line:?}")))?;
                values.push(num(v)?);
            }
        }
        let missing = |what: &str| Error::Parse(format!("mesh CSV lacks `{what}` metadata"));
        let dx = dx.ok_or_else(|| missing("dx"))?;
        let first_site = match first {
            Some(f) => f,
            None => return Err(missing("first_site")),
        };
        Ok((
            MeshFn {
                dx,
                dt: dt.ok_or_else(|| missing("dt"))?,
                first_site,
                values,
                time: time.ok_or_else(|| missing("time"))?,
            },
            kind.ok_or_else(|| missing("kind"))?,
        ))
    }
}

/// `v^N(x, 0) = v0(⌊x/Δx⌋ Δx)` on the sites covering `window`.
pub fn discretize_initial<F: Fn(f64) -> f64>(
    v0: F,
    spec: &SchemeSpec,
    window: (f64, f64),
) -> Result<MeshFn> {
    let dx = spec.dx();
    let (lo, hi) = window;
    if !(hi - lo >= 2.0 * dx) {
        return Err(Error::WindowTooSmall {
            length: hi - lo,
            min: 2.0 * dx,
        });
    }
    let first = (lo / dx).floor() as i64;
    let last = (hi / dx).ceil() as i64;
    let values = (first..=last).map(|k| v0(k as f64 * dx)).collect();
    Ok(MeshFn {
        dx,
        dt: spec.dt(),
        first_site: first,
        values,
        time: 0.0,
    })
}

/// Mesh seeded directly with lattice values `F_k` for `k` in `first..first+len`.
pub fn mesh_from_sites(spec: &SchemeSpec, first_site: i64, values: Vec<f64>) -> MeshFn {
    MeshFn {
        dx: spec.dx(),
        dt: spec.dt(),
        first_site,
        values,
        time: 0.0,
    }
}

fn step_values(src: &[f64], dst: &mut [f64], spec: &SchemeSpec) {
    let n = src.len();
    let site = |i: usize| {
        let a = src[i.saturating_sub(1)];
        let c = src[(i + 1).min(n - 1)];
        spec.update(a, src[i], c)
    };
    if n >= PARALLEL_SITES {
        dst.par_iter_mut()
            .enumerate()
            .for_each(|(i, d)| *d = site(i));
    } else {
        dst.iter_mut().enumerate().for_each(|(i, d)| *d = site(i));
    }
}

/// One explicit step; time advances by `Δt`.
pub fn scheme_step(f: &MeshFn, spec: &SchemeSpec) -> MeshFn {
    let mut out = f.clone();
    if !f.values.is_empty() {
        step_values(&f.values, &mut out.values, spec);
    }
    out.time += f.dt;
    out
}

/// Runs `steps` steps, calling `observe` after each one with the step index
/// (starting at 1) and the new slice.
pub fn run_steps<F: FnMut(u64, &MeshFn)>(
    f0: &MeshFn,
    spec: &SchemeSpec,
    steps: u64,
    mut observe: F,
) -> MeshFn {
    let mut cur = f0.clone();
    let mut next = f0.values.clone();
    for s in 1..=steps {
        if !cur.values.is_empty() {
            step_values(&cur.values, &mut next, spec);
            std::mem::swap(&mut cur.values, &mut next);
        }
        cur.time = f0.time + s as f64 * f0.dt;
        observe(s, &cur);
    }
    cur
}

/// Number of steps `⌈t_final / Δt⌉`, robust to rounding in `t_final / Δt`.
pub fn steps_to(t_final: f64, dt: f64) -> u64 {
    let ratio = t_final / dt;
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as u64
    } else {
        ratio.ceil() as u64
    }
}

/// Advances `f0` by `⌈t_final/Δt⌉` steps.
pub fn run_scheme(f0: &MeshFn, spec: &SchemeSpec, t_final: f64) -> Result<MeshFn> {
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::DomainError(format!(
            "t_final must be nonnegative, got {t_final}"
        )));
    }
    Ok(run_steps(f0, spec, steps_to(t_final, f0.dt), |_, _| {}))
}

/// Largest amount by which `lower` exceeds `upper` (non-positive when ordered).
pub fn order_violation(lower: &MeshFn, upper: &MeshFn) -> f64 {
    let lo = lower.first_site.min(upper.first_site);
    let hi = (lower.first_site + lower.len() as i64).max(upper.first_site + upper.len() as i64);
    (lo..hi)
        .map(|k| lower.at_site(k) - upper.at_site(k))
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, Copy)]
pub struct MonotonicityConfig {
    pub trials: usize,
    /// Cap on the per-site increment of the generated CDFs.
    pub max_increment: f64,
    /// Largest number of sites carrying mass.
    pub max_support: usize,
}

impl MonotonicityConfig {
    pub fn new(trials: usize, max_increment: f64) -> Self {
        Self {
            trials,
            max_increment,
            max_support: 8,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Counterexample {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub site: usize,
    pub amount: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    pub trials: usize,
    pub violations: usize,
    pub worst: f64,
    /// First few counterexamples (at most five are kept).
    pub counterexamples: Vec<Counterexample>,
}

/// A random probability vector of `len` entries each at most `cap`.
fn capped_weights<R: Rng + ?Sized>(len: usize, cap: f64, rng: &mut R) -> Vec<f64> {
    let mut w: Vec<f64> = (0..len).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    // water filling: clamp and hand the excess to the unclamped entries
    for _ in 0..len {
        let excess: f64 = w.iter().map(|&x| (x - cap).max(0.0)).sum();
        if excess <= 0.0 {
            break;
        }
        let free: f64 = w.iter().filter(|&&x| x < cap).sum();
        for x in w.iter_mut() {
            if *x >= cap {
                *x = cap;
            } else {
                *x += excess * *x / free;
            }
        }
    }
    w.iter_mut().for_each(|x| *x = x.min(cap));
    w
}

/// A random nondecreasing profile from 0 to 1 (up to rounding) over `sites`
/// sites whose increments are at most `cap`.
fn random_profile<R: Rng + ?Sized>(
    sites: usize,
    support: usize,
    cap: f64,
    rng: &mut R,
) -> Vec<f64> {
    let min_len = (1.0 / cap).ceil() as usize;
    let len = rng.gen_range(min_len.max(1)..=support.max(min_len));
    let w = capped_weights(len, cap, rng);
    let start = rng.gen_range(1..=sites - len - 1);
    let mut out = vec![0.0; sites];
    let mut acc = 0.0;
    for (i, v) in out.iter_mut().enumerate() {
        if i >= start && i < start + len {
            acc += w[i - start];
        }
        *v = acc;
    }
    out
}

/// Draws ordered pairs `u ≤ w` of discretized Lipschitz CDFs with
/// increments at most `max_increment`, steps both once and records any site
/// where the order flips. The upper profile is the pointwise maximum of two
/// independent draws, which keeps the increment cap.
pub fn check_monotonicity<R: Rng + ?Sized>(
    spec: &SchemeSpec,
    cfg: MonotonicityConfig,
    rng: &mut R,
) -> MonotonicityReport {
    let min_len = (1.0 / cfg.max_increment).ceil() as usize;
    let sites = cfg.max_support.max(min_len) + 6;
    let mut report = MonotonicityReport {
        trials: cfg.trials,
        violations: 0,
        worst: 0.0,
        counterexamples: Vec::new(),
    };
    for _ in 0..cfg.trials {
        let lower = random_profile(sites, cfg.max_support, cfg.max_increment, rng);
        let other = random_profile(sites, cfg.max_support, cfg.max_increment, rng);
        let upper: Vec<f64> = lower.iter().zip(&other).map(|(a, b)| a.max(*b)).collect();
        let u = mesh_from_sites(spec, 0, lower);
        let w = mesh_from_sites(spec, 0, upper);
        let (u1, w1) = (scheme_step(&u, spec), scheme_step(&w, spec));
        let (site, amount) = u1
            .values
            .iter()
            .zip(&w1.values)
            .map(|(a, b)| a - b)
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, d)| {
                if d > best.1 {
                    (i, d)
                } else {
                    best
                }
            });
        if amount > 1e-12 {
            report.violations += 1;
            report.worst = report.worst.max(amount);
            if report.counterexamples.len() < 5 {
                report.counterexamples.push(Counterexample {
                    lower: u.values,
                    upper: w.values,
                    site,
                    amount,
                });
            }
        }
    }
    report
}

/// A smooth function of `(x, t)` with its first two spatial derivatives.
pub trait TestFunction {
    fn value(&self, x: f64, t: f64) -> f64;
    fn dx(&self, x: f64, t: f64) -> f64;
    fn dxx(&self, x: f64, t: f64) -> f64;
}

/// A test function given by three closures `φ`, `φ_x`, `φ_xx`.
pub struct FnTest<F, G, H> {
    pub f: F,
    pub fx: G,
    pub fxx: H,
}

impl<F, G, H> TestFunction for FnTest<F, G, H>
where
    F: Fn(f64, f64) -> f64,
    G: Fn(f64, f64) -> f64,
    H: Fn(f64, f64) -> f64,
{
    fn value(&self, x: f64, t: f64) -> f64 {
        (self.f)(x, t)
    }
    fn dx(&self, x: f64, t: f64) -> f64 {
        (self.fx)(x, t)
    }
    fn dxx(&self, x: f64, t: f64) -> f64 {
        (self.fxx)(x, t)
    }
}

/// One point of the consistency limit `(N, y, s, ε) → (∞, x, t, 0)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ShrinkStep {
    pub n: f64,
    pub dy: f64,
    pub ds: f64,
    pub eps: f64,
}

/// `N = n0 · factor^i`, with offsets `dy = ds = ε = Δx^N`.
pub fn geometric_shrink(
    kind: SchemeKind,
    n0: f64,
    factor: f64,
    count: usize,
) -> Result<Vec<ShrinkStep>> {
    (0..count)
        .map(|i| {
            let n = n0 * factor.powi(i as i32);
            let dx = SchemeSpec::new(kind, n)?.dx();
            Ok(ShrinkStep {
                n,
                dy: dx,
                ds: dx,
                eps: dx,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConsistencySample {
    pub n: f64,
    pub dx: f64,
    pub residual: f64,
    /// `|𝒢^N⟨φ + ε⟩ - 𝒢^N⟨φ⟩|`; zero up to rounding for these stencils.
    pub eps_shift: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyCurve {
    pub samples: Vec<ConsistencySample>,
    /// Least-squares slope of `log residual` against `log Δx`, when defined.
    pub slope: Option<f64>,
}

/// Evaluates `|𝒢^N⟨φ(y, s) + ε⟩_N - G(φ_x(x, t), φ_xx(x, t))|` along `shrink`.
pub fn check_consistency(
    kind: SchemeKind,
    phi: &dyn TestFunction,
    point: (f64, f64),
    shrink: &[ShrinkStep],
) -> Result<ConsistencyCurve> {
    let (x, t) = point;
    let mut samples = Vec::with_capacity(shrink.len());
    for st in shrink {
        let spec = SchemeSpec::new(kind, st.n)?;
        let h = spec.dx();
        let (y, s) = (x + st.dy, t + st.ds);
        let (a, b, c) = (phi.value(y - h, s), phi.value(y, s), phi.value(y + h, s));
        let shifted = spec.operator(a + st.eps, b + st.eps, c + st.eps);
        let plain = spec.operator(a, b, c);
        let limit = spec.limit_operator(phi.dx(x, t), phi.dxx(x, t));
        samples.push(ConsistencySample {
            n: st.n,
            dx: h,
            residual: (shifted - limit).abs(),
            eps_shift: (shifted - plain).abs(),
        });
    }
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.residual > 0.0)
        .map(|s| (s.dx.ln(), s.residual.ln()))
        .collect();
    let slope = (pts.len() >= 2).then(|| {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        sxy / sxx
    });
    Ok(ConsistencyCurve { samples, slope })
}

/// True iff every mesh value stays in `[0, 1]` (to `1e-12`) through `t_final`.
pub fn check_stability(spec: &SchemeSpec, seed: &MeshFn, t_final: f64) -> Result<bool> {
    const TOL: f64 = 1e-12;
    let in_range = |f: &MeshFn| f.values.iter().all(|&v| (-TOL..=1.0 + TOL).contains(&v));
    if !in_range(seed) {
        return Ok(false);
    }
    if !(t_final >= 0.0) {
        return Err(Error::DomainError(format!(
            "t_final must be nonnegative, got {t_final}"
        )));
    }
    let mut ok = true;
    run_steps(seed, spec, steps_to(t_final, seed.dt), |_, f| {
        ok &= in_range(f)
    });
    Ok(ok)
}
