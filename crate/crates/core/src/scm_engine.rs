//! Exact evolution of cooperative motion through the PMF and CDF
//! recurrences, and the tree-indexed Monte Carlo sampler used as an
//! independent oracle.
//!
//! With parameters `(m, q, r, R)` one step maps
//!
//! ```text
//! p'_k = p_k - q p_k^{m+1} + r q p_{k-R}^{m+1} + (1 - r) q p_{k+R}^{m+1}
//! ```
//!
//! Atoms at `±∞` are fixed points. Mass drift is never corrected.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::closed_forms::special::reg_upper_gamma;
use crate::error::{Error, Result};
use crate::lattice_measure::{ExtInt, ExtendedCdf, ModelParams, Pmf};

/// Default cap on the number of lattice sites an evolution may occupy.
pub const DEFAULT_WINDOW_CAP: usize = 10_000_000;
/// Default cap on `(m+1)^n`, the leaf count of one sampled tree.
pub const DEFAULT_NODE_CAP: u64 = 1 << 24;

/// The one-step map with the exponent `m + 1` precomputed.
#[derive(Debug, Clone, Copy)]
pub struct SchemeStencil {
    params: ModelParams,
    exponent: f64,
    int_exponent: Option<i32>,
}

impl SchemeStencil {
    pub fn new(params: ModelParams) -> Self {
        let exponent = params.m + 1.0;
        let int_exponent = (exponent.fract() == 0.0 && exponent <= 8.0).then_some(exponent as i32);
        Self {
            params,
            exponent,
            int_exponent,
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// `x^{m+1}` for `x >= 0`, with `0^{m+1} = 0`.
    #[inline]
    pub fn power(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match self.int_exponent {
            Some(2) => x * x,
            Some(k) => x.powi(k),
            None => x.powf(self.exponent),
        }
    }

    /// `|d|^m d`, the odd extension used on non-monotone data.
    #[inline]
    pub fn signed_power(&self, d: f64) -> f64 {
        if d >= 0.0 {
            self.power(d)
        } else {
            -self.power(-d)
        }
    }

    /// `S(a, b, c) = b + q[(1-r)(c-b)^{m+1} - r(b-a)^{m+1}]`, the CDF update
    /// for unit steps. Nondecreasing in each argument on the region where both
    /// increments lie in `[0, p*]`.
    #[inline]
    pub fn map(&self, a: f64, b: f64, c: f64) -> f64 {
        let q = self.params.q;
        let r = self.params.r;
        b + q * ((1.0 - r) * self.signed_power(c - b) - r * self.signed_power(b - a))
    }
}

/// `S(a, b, c)` for the given parameters.
pub fn monotone_map(a: f64, b: f64, c: f64, params: &ModelParams) -> f64 {
    SchemeStencil::new(*params).map(a, b, c)
}

/// One step of the PMF recurrence.
pub fn step_pmf(p: &Pmf, params: &ModelParams) -> Pmf {
    step_pmf_with(p, &SchemeStencil::new(*params))
}

fn step_pmf_with(p: &Pmf, stencil: &SchemeStencil) -> Pmf {
    let ModelParams { q, r, step, .. } = *stencil.params();
    let step = step as usize;
    let w = p.weights();
    if w.is_empty() {
        return p.clone();
    }
    let powers: Vec<f64> = w.iter().map(|&x| stencil.power(x)).collect();
    let len = w.len() + 2 * step;
    let at = |v: &[f64], i: isize| -> f64 {
        if i < 0 || i as usize >= v.len() {
            0.0
        } else {
            v[i as usize]
        }
    };
    let s = step as isize;
    let out = (0..len as isize)
        .map(|i| {
            // new site i corresponds to old index j = i - R
            let j = i - s;
            at(w, j) - q * at(&powers, j)
                + r * q * at(&powers, j - s)
                + (1.0 - r) * q * at(&powers, j + s)
        })
        .collect();
    Pmf::trimmed(
        p.offset() - step as i64,
        out,
        p.mass_neg_inf(),
        p.mass_pos_inf(),
    )
}

/// One step of the CDF recurrence, computed from the increments of `f`:
///
/// ```text
/// F'_k = F_k + q[(1-r) Σ_{k<j≤k+R} p_j^{m+1} - r Σ_{k-R<j≤k} p_j^{m+1}]
/// ```
///
/// which for `R = 1` is `S(F_{k-1}, F_k, F_{k+1})`.
pub fn step_cdf(f: &ExtendedCdf, params: &ModelParams) -> ExtendedCdf {
    let stencil = SchemeStencil::new(*params);
    let ModelParams { q, r, step, .. } = *params;
    let step = step as i64;
    let lo = f.offset() - step;
    let hi = f.end() + step - 1;
    if step == 1 {
        let values = (lo..=hi)
            .map(|k| stencil.map(f.eval(k - 1), f.eval(k), f.eval(k + 1)))
            .collect();
        return ExtendedCdf::from_parts(lo, values, f.floor(), f.ceiling());
    }
    // increments a_j = (F_j - F_{j-1})^{m+1} for j in [lo - R + 1, hi + R]
    let base = lo - step + 1;
    let powers: Vec<f64> = (base..=hi + step)
        .map(|j| stencil.power(f.eval(j) - f.eval(j - 1)))
        .collect();
    let mut prefix = Vec::with_capacity(powers.len() + 1);
    prefix.push(0.0);
    for a in &powers {
        prefix.push(prefix.last().unwrap() + a);
    }
    // Σ_{j=from}^{to} a_j
    let window_sum =
        |from: i64, to: i64| prefix[(to - base + 1) as usize] - prefix[(from - base) as usize];
    let values = (lo..=hi)
        .map(|k| {
            let right = window_sum(k + 1, k + step);
            let left = window_sum(k - step + 1, k);
            f.eval(k) + q * ((1.0 - r) * right - r * left)
        })
        .collect();
    ExtendedCdf::from_parts(lo, values, f.floor(), f.ceiling())
}

/// Step-by-step evolution that owns the current time slice.
#[derive(Debug, Clone)]
pub struct Evolution {
    stencil: SchemeStencil,
    current: Pmf,
    time: u64,
    cap: usize,
}

impl Evolution {
    pub fn new(initial: Pmf, params: ModelParams) -> Self {
        Self {
            stencil: SchemeStencil::new(params),
            current: initial,
            time: 0,
            cap: DEFAULT_WINDOW_CAP,
        }
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    pub fn params(&self) -> &ModelParams {
        self.stencil.params()
    }

    pub fn current(&self) -> &Pmf {
        &self.current
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn into_pmf(self) -> Pmf {
        self.current
    }

    pub fn step(&mut self) -> Result<&Pmf> {
        let sites = self.current.weights().len() + 2 * self.stencil.params().step as usize;
        if sites > self.cap {
            return Err(Error::WindowOverflow {
                sites,
                cap: self.cap,
            });
        }
        self.current = step_pmf_with(&self.current, &self.stencil);
        self.time += 1;
        Ok(&self.current)
    }

    /// Runs until `time == n` (no-op if already there or past).
    pub fn advance_to(&mut self, n: u64) -> Result<&Pmf> {
        while self.time < n {
            self.step()?;
        }
        Ok(&self.current)
    }
}

/// `n`-fold composition of [`step_pmf`].
pub fn evolve(p: &Pmf, params: &ModelParams, n: u64) -> Result<Pmf> {
    evolve_with_cap(p, params, n, DEFAULT_WINDOW_CAP)
}

pub fn evolve_with_cap(p: &Pmf, params: &ModelParams, n: u64, cap: usize) -> Result<Pmf> {
    let mut ev = Evolution::new(p.clone(), *params).with_cap(cap);
    ev.advance_to(n)?;
    Ok(ev.into_pmf())
}

/// Smallest gap `max(p_{k-R}, p_k, p_{k+R}) - p'_k` over sites whose
/// neighbourhood carries more than `p*`; `None` when no such site exists.
pub fn decrease_margin(p: &Pmf, params: &ModelParams) -> Option<f64> {
    let next = step_pmf(p, params);
    let p_star = params.p_star();
    let step = params.step as i64;
    let (lo, hi) = p.support()?;
    (lo - step..=hi + step)
        .filter_map(|k| {
            let top = p.get(k - step).max(p.get(k)).max(p.get(k + step));
            (top > p_star).then(|| top - next.get(k))
        })
        .reduce(f64::min)
}

/// Tree-indexed sampler for integer `m`: the root value of a complete
/// `(m+1)`-ary tree of depth `n` with `μ`-distributed leaves, where an
/// internal node moves its first child's value by an independent step
/// exactly when all its children agree.
#[derive(Debug, Clone, Copy)]
pub struct TreeSampler {
    params: ModelParams,
    depth: u32,
    arity: u32,
}

impl TreeSampler {
    pub fn new(params: ModelParams, depth: u32) -> Result<Self> {
        Self::with_node_cap(params, depth, DEFAULT_NODE_CAP)
    }

    pub fn with_node_cap(params: ModelParams, depth: u32, cap: u64) -> Result<Self> {
        if params.m.fract() != 0.0 || params.m < 1.0 {
            return Err(Error::DomainError(format!(
                "tree sampler needs an integer m >= 1, got {}",
                params.m
            )));
        }
        let arity = params.m as u32 + 1;
        let nodes = (arity as f64).powi(depth as i32);
        if nodes > cap as f64 {
            return Err(Error::BudgetExceeded { nodes, cap });
        }
        Ok(Self {
            params,
            depth,
            arity,
        })
    }

    fn increment<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        let u: f64 = rng.gen();
        let ModelParams { q, r, step, .. } = self.params;
        if u < r * q {
            step as i64
        } else if u < q {
            -(step as i64)
        } else {
            0
        }
    }

    fn node<R, F>(&self, depth: u32, mu: &mut F, rng: &mut R) -> ExtInt
    where
        R: Rng + ?Sized,
        F: FnMut(&mut R) -> ExtInt,
    {
        if depth == 0 {
            return mu(rng);
        }
        let first = self.node(depth - 1, mu, rng);
        // later children are independent of the output once one disagrees
        for _ in 1..self.arity {
            if self.node(depth - 1, mu, rng) != first {
                return first;
            }
        }
        first.shifted(self.increment(rng))
    }

    pub fn sample<R, F>(&self, mu: &mut F, rng: &mut R) -> ExtInt
    where
        R: Rng + ?Sized,
        F: FnMut(&mut R) -> ExtInt,
    {
        self.node(self.depth, mu, rng)
    }
}

/// One draw of the tree-indexed root value `Σ^n_∅`.
pub fn sample_tree<R, F>(
    params: &ModelParams,
    n: u32,
    mut mu_sampler: F,
    rng: &mut R,
) -> Result<ExtInt>
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> ExtInt,
{
    Ok(TreeSampler::new(*params, n)?.sample(&mut mu_sampler, rng))
}

/// Counts of sampled values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleHistogram {
    pub count: u64,
    pub neg_inf: u64,
    pub pos_inf: u64,
    pub finite: BTreeMap<i64, u64>,
}

impl SampleHistogram {
    pub fn record(&mut self, x: ExtInt) {
        self.count += 1;
        match x {
            ExtInt::NegInf => self.neg_inf += 1,
            ExtInt::PosInf => self.pos_inf += 1,
            ExtInt::Finite(k) => *self.finite.entry(k).or_default() += 1,
        }
    }

    pub fn merge(&mut self, other: &SampleHistogram) {
        self.count += other.count;
        self.neg_inf += other.neg_inf;
        self.pos_inf += other.pos_inf;
        for (&k, &c) in &other.finite {
            *self.finite.entry(k).or_default() += c;
        }
    }

    pub fn frequency(&self, k: i64) -> f64 {
        self.finite.get(&k).copied().unwrap_or(0) as f64 / self.count as f64
    }

    pub fn to_pmf(&self) -> Result<Pmf> {
        let n = self.count as f64;
        let (lo, hi) = match (self.finite.keys().next(), self.finite.keys().next_back()) {
            (Some(&lo), Some(&hi)) => (lo, hi),
            _ => {
                return Pmf::from_weights(
                    0,
                    Vec::new(),
                    self.neg_inf as f64 / n,
                    self.pos_inf as f64 / n,
                )
            }
        };
        let weights = (lo..=hi).map(|k| self.frequency(k)).collect();
        Pmf::from_weights(
            lo,
            weights,
            self.neg_inf as f64 / n,
            self.pos_inf as f64 / n,
        )
    }

    /// Total variation distance `½ Σ |f̂_k - p_k|` (atoms at `±∞` included).
    pub fn total_variation(&self, p: &Pmf) -> f64 {
        let n = self.count as f64;
        let mut sites: Vec<i64> = self.finite.keys().copied().collect();
        if let Some((lo, hi)) = p.support() {
            sites.extend(lo..=hi);
        }
        sites.sort_unstable();
        sites.dedup();
        let finite: f64 = sites
            .iter()
            .map(|&k| (self.frequency(k) - p.get(k)).abs())
            .sum();
        let atoms = (self.neg_inf as f64 / n - p.mass_neg_inf()).abs()
            + (self.pos_inf as f64 / n - p.mass_pos_inf()).abs();
        0.5 * (finite + atoms)
    }

    /// Pearson goodness-of-fit against `p`, pooling cells with expected count
    /// below 5 into one cell. Returns `(statistic, degrees of freedom, p-value)`.
    pub fn chi_square(&self, p: &Pmf) -> (f64, usize, f64) {
        let n = self.count as f64;
        let mut cells: Vec<(f64, f64)> = Vec::new();
        let (mut pooled_obs, mut pooled_exp) = (0.0, 0.0);
        let mut push = |obs: f64, exp: f64| {
            if exp >= 5.0 {
                cells.push((obs, exp));
            } else {
                pooled_obs += obs;
                pooled_exp += exp;
            }
        };
        if let Some((lo, hi)) = p.support() {
            for k in lo..=hi {
                push(
                    self.finite.get(&k).copied().unwrap_or(0) as f64,
                    n * p.get(k),
                );
            }
        }
        let outside: u64 = self
            .finite
            .iter()
            .filter(|(k, _)| p.get(**k) == 0.0)
            .map(|(_, c)| *c)
            .sum();
        push(outside as f64, 0.0);
        push(self.neg_inf as f64, n * p.mass_neg_inf());
        push(self.pos_inf as f64, n * p.mass_pos_inf());
        if pooled_exp > 0.0 || pooled_obs > 0.0 {
            cells.push((pooled_obs, pooled_exp.max(f64::MIN_POSITIVE)));
        }
        let stat: f64 = cells.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
        let dof = cells.len().saturating_sub(1).max(1);
        let p_value = reg_upper_gamma(0.5 * dof as f64, 0.5 * stat).unwrap_or(0.0);
        (stat, dof, p_value)
    }
}

/// Draws `count` independent tree samples with leaves from `mu`.
///
/// Samples are split into fixed chunks, each with its own ChaCha stream
/// derived from `seed`, so the result does not depend on the thread count.
pub fn sample_histogram(
    params: &ModelParams,
    n: u32,
    mu: &Pmf,
    count: u64,
    seed: u64,
) -> Result<SampleHistogram> {
    const CHUNK: u64 = 4096;
    let sampler = TreeSampler::new(*params, n)?;
    let chunks = count.div_ceil(CHUNK);
    let parts: Vec<SampleHistogram> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let mut leaf = |rng: &mut ChaCha8Rng| mu.quantile(rng.gen::<f64>());
            let mut h = SampleHistogram::default();
            let todo = CHUNK.min(count - c * CHUNK);
            for _ in 0..todo {
                h.record(sampler.sample(&mut leaf, &mut rng));
            }
            h
        })
        .collect();
    let mut total = SampleHistogram::default();
    for p in &parts {
        total.merge(p);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(m: f64) -> ModelParams {
        ModelParams::symmetric(m).unwrap()
    }

    fn assert_pmf(p: &Pmf, offset: i64, weights: &[f64]) {
        assert_eq!(p.offset(), offset, "{p:?}");
        assert_eq!(p.weights().len(), weights.len(), "{p:?}");
        for (a, b) in p.weights().iter().zip(weights) {
            assert!((a - b).abs() < 1e-15, "{p:?}");
        }
    }

    #[test]
    fn step_pmf_examples() {
        let one = step_pmf(&Pmf::delta(0), &sym(1.0));
        assert_pmf(&one, -1, &[0.5, 0.0, 0.5]);
        let two = step_pmf(&one, &sym(1.0));
        assert_pmf(&two, -2, &[0.125, 0.25, 0.25, 0.25, 0.125]);
        let lazy = step_pmf(&Pmf::delta(0), &ModelParams::lazy(1.0, 0.5).unwrap());
        assert_pmf(&lazy, -1, &[0.25, 0.5, 0.25]);
    }

    #[test]
    fn step_pmf_biased_and_long_steps() {
        let p = ModelParams::new(1.0, 1.0, 0.75, 2).unwrap();
        let one = step_pmf(&Pmf::delta(0), &p);
        // all mass moves: +2 w.p. 3/4, -2 w.p. 1/4
        assert_pmf(&one, -2, &[0.25, 0.0, 0.0, 0.0, 0.75]);
    }

    #[test]
    fn infinite_atoms_are_fixed() {
        let p = Pmf::from_weights(0, vec![0.5], 0.25, 0.25).unwrap();
        let next = step_pmf(&p, &sym(1.0));
        assert_eq!(next.mass_neg_inf(), 0.25);
        assert_eq!(next.mass_pos_inf(), 0.25);
        // p_0 = 1/2: 1/2 - 1/4 stays, 1/8 to each side
        assert_pmf(&next, -1, &[0.125, 0.25, 0.125]);
    }

    #[test]
    fn step_cdf_examples() {
        let params = sym(1.0);
        let h = ExtendedCdf::heaviside(0);
        let one = step_cdf(&h, &params);
        assert_eq!(
            (one.eval(-2), one.eval(-1), one.eval(0), one.eval(1)),
            (0.0, 0.5, 0.5, 1.0)
        );
        let flat = ExtendedCdf::new(0, vec![], 0.4, 0.4).unwrap();
        let same = step_cdf(&flat, &params);
        assert!(same.values().iter().all(|&v| v == 0.4));
        let two = step_cdf(&one, &params);
        let expect = [0.125, 0.375, 0.625, 0.875, 1.0];
        for (i, e) in expect.iter().enumerate() {
            assert!((two.eval(i as i64 - 2) - e).abs() < 1e-15);
        }
    }

    #[test]
    fn evolve_examples() {
        assert_eq!(evolve(&Pmf::delta(0), &sym(1.0), 0).unwrap(), Pmf::delta(0));
        let two = evolve(&Pmf::delta(0), &sym(1.0), 2).unwrap();
        assert_pmf(&two, -2, &[0.125, 0.25, 0.25, 0.25, 0.125]);
    }

    #[test]
    fn evolve_long_run_is_p_star_bounded_and_symmetric() {
        let p = evolve(&Pmf::delta(0), &sym(1.0), 10_000).unwrap();
        assert!(p.max_weight() <= 0.5);
        let (lo, hi) = p.support().unwrap();
        assert_eq!(lo, -hi);
        for k in 0..=hi {
            assert!((p.get(k) - p.get(-k)).abs() < 1e-15);
        }
        assert!((p.total_mass() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn window_cap_is_enforced() {
        let err = evolve_with_cap(&Pmf::delta(0), &sym(1.0), 10, 5).unwrap_err();
        assert!(matches!(err, Error::WindowOverflow { .. }));
    }

    #[test]
    fn monotone_map_examples() {
        let p = sym(1.0);
        for &x in &[0.0, 0.3, 1.0] {
            assert_eq!(monotone_map(x, x, x, &p), x);
        }
        assert_eq!(monotone_map(0.0, 0.5, 1.0, &p), 0.5);
        assert_eq!(monotone_map(0.0, 0.0, 1.0, &p), 0.5);
    }

    #[test]
    fn tree_sampler_budget_and_domain() {
        assert!(matches!(
            TreeSampler::new(sym(1.5), 2),
            Err(Error::DomainError(_))
        ));
        assert!(matches!(
            TreeSampler::with_node_cap(sym(1.0), 20, 1000),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn tree_sampler_depth_zero_draws_from_mu() {
        let mu = Pmf::from_weights(3, vec![0.5, 0.5], 0.0, 0.0).unwrap();
        let h = sample_histogram(&sym(1.0), 0, &mu, 20_000, 1).unwrap();
        assert_eq!(h.finite.keys().copied().collect::<Vec<_>>(), vec![3, 4]);
        assert!((h.frequency(3) - 0.5).abs() < 0.02);
    }

    #[test]
    fn tree_sampler_one_level() {
        let h = sample_histogram(&sym(1.0), 1, &Pmf::delta(0), 20_000, 9).unwrap();
        assert_eq!(h.finite.len(), 2);
        assert!((h.frequency(1) - 0.5).abs() < 0.02);
        assert!((h.frequency(-1) - 0.5).abs() < 0.02);
    }

    #[test]
    fn infinite_leaves_stay_infinite() {
        let mu = Pmf::from_weights(0, vec![0.5], 0.5, 0.0).unwrap();
        let h = sample_histogram(&sym(1.0), 3, &mu, 4000, 2).unwrap();
        let exact = evolve(&mu, &sym(1.0), 3).unwrap();
        assert!((h.neg_inf as f64 / 4000.0 - 0.5).abs() < 0.05);
        assert!(h.total_variation(&exact) < 0.05);
    }

    #[test]
    fn histogram_is_independent_of_thread_count() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| sample_histogram(&sym(1.0), 4, &Pmf::delta(0), 10_000, 42).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn decrease_margin_examples() {
        let params = sym(1.0);
        assert_eq!(decrease_margin(&Pmf::uniform(0, 3).unwrap(), &params), None);
        let m = decrease_margin(&Pmf::delta(0), &params).unwrap();
        // p'_0 = 0 under max 1; p'_{±1} = 1/2 under max 1
        assert!((m - 0.5).abs() < 1e-15);
    }
}
