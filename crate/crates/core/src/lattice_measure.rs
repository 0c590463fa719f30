//! Lattice probability measures, extended CDFs and distances between
//! distribution functions.
//!
//! A [`Pmf`] is stored densely over a contiguous window `offset..offset+len`
//! with optional atoms at `±∞`. Windows are trimmed of leading and trailing
//! exact zeros only; interior zeros stay.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::sig15;

/// Tolerance on total mass when building a [`Pmf`] from user input.
pub const CONSTRUCTION_TOL: f64 = 1e-9;
/// Tolerance for invariant checks on evolved measures.
pub const INVARIANT_TOL: f64 = 1e-12;

/// An integer extended by `±∞`. Order is `NegInf < Finite(_) < PosInf`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ExtInt {
    NegInf,
    Finite(i64),
    PosInf,
}

impl ExtInt {
    /// Translation; infinite values absorb any shift.
    pub fn shifted(self, by: i64) -> ExtInt {
        match self {
            ExtInt::Finite(k) => ExtInt::Finite(k + by),
            other => other,
        }
    }

    pub fn finite(self) -> Option<i64> {
        match self {
            ExtInt::Finite(k) => Some(k),
            _ => None,
        }
    }
}

impl fmt::Display for ExtInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtInt::NegInf => f.write_str("-inf"),
            ExtInt::Finite(k) => write!(f, "{k}"),
            ExtInt::PosInf => f.write_str("+inf"),
        }
    }
}

impl FromStr for ExtInt {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "-inf" => Ok(ExtInt::NegInf),
            "+inf" | "inf" => Ok(ExtInt::PosInf),
            t => t
                .parse::<i64>()
                .map(ExtInt::Finite)
                .map_err(|_| Error::Parse(format!("not a lattice site: {t:?}"))),
        }
    }
}

/// Dynamics parameters `(m, q, r, R)`: cooperation exponent, laziness,
/// right-step bias and step length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub m: f64,
    pub q: f64,
    pub r: f64,
    pub step: u32,
}

impl ModelParams {
    pub fn new(m: f64, q: f64, r: f64, step: u32) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::DomainError(format!("m must satisfy m > 0, got {m}")));
        }
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::DomainError(format!(
                "q must satisfy 0 < q <= 1, got {q}"
            )));
        }
        if !(0.5..=1.0).contains(&r) {
            return Err(Error::DomainError(format!(
                "r must satisfy 1/2 <= r <= 1, got {r}"
            )));
        }
        if step == 0 {
            return Err(Error::DomainError("step R must satisfy R >= 1".into()));
        }
        Ok(Self { m, q, r, step })
    }

    /// Symmetric, non-lazy, unit-step dynamics.
    pub fn symmetric(m: f64) -> Result<Self> {
        Self::new(m, 1.0, 0.5, 1)
    }

    pub fn lazy(m: f64, q: f64) -> Result<Self> {
        Self::new(m, q, 0.5, 1)
    }

    pub fn p_star(&self) -> f64 {
        (self.m + 1.0).powf(-1.0 / self.m)
    }

    pub fn is_symmetric(&self) -> bool {
        self.r == 0.5
    }
}

/// A probability vector on `ℤ ∪ {±∞}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pmf {
    offset: i64,
    weights: Vec<f64>,
    mass_neg_inf: f64,
    mass_pos_inf: f64,
}

impl Pmf {
    /// Validated construction; the result is trimmed to its canonical window.
    pub fn from_weights(
        offset: i64,
        weights: Vec<f64>,
        mass_neg_inf: f64,
        mass_pos_inf: f64,
    ) -> Result<Self> {
        for (label, v) in [("-inf", mass_neg_inf), ("+inf", mass_pos_inf)] {
            if !(v >= 0.0) {
                return Err(Error::NegativeMass {
                    location: label.into(),
                    value: v,
                });
            }
        }
        for (i, &w) in weights.iter().enumerate() {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::NegativeMass {
                    location: (offset + i as i64).to_string(),
                    value: w,
                });
            }
        }
        let total = mass_neg_inf + mass_pos_inf + weights.iter().sum::<f64>();
        if (total - 1.0).abs() > CONSTRUCTION_TOL {
            return Err(Error::NotNormalized {
                total,
                tolerance: CONSTRUCTION_TOL,
            });
        }
        Ok(Self::trimmed(offset, weights, mass_neg_inf, mass_pos_inf))
    }

    /// Trims without validating; used by the dynamics, whose outputs are
    /// valid by construction and whose mass drift is measured, not corrected.
    pub(crate) fn trimmed(
        offset: i64,
        mut weights: Vec<f64>,
        mass_neg_inf: f64,
        mass_pos_inf: f64,
    ) -> Self {
        let lead = weights.iter().take_while(|&&w| w == 0.0).count();
        if lead == weights.len() {
            return Self {
                offset: 0,
                weights: Vec::new(),
                mass_neg_inf,
                mass_pos_inf,
            };
        }
        let trail = weights.iter().rev().take_while(|&&w| w == 0.0).count();
        weights.truncate(weights.len() - trail);
        weights.drain(..lead);
        Self {
            offset: offset + lead as i64,
            weights,
            mass_neg_inf,
            mass_pos_inf,
        }
    }

    pub fn delta(k: i64) -> Self {
        Self {
            offset: k,
            weights: vec![1.0],
            mass_neg_inf: 0.0,
            mass_pos_inf: 0.0,
        }
    }

    /// Uniform law on `{a, ..., b}`.
    pub fn uniform(a: i64, b: i64) -> Result<Self> {
        if b < a {
            return Err(Error::DomainError(format!(
                "uniform needs a <= b, got {a}..{b}"
            )));
        }
        let n = (b - a + 1) as usize;
        Ok(Self::trimmed(a, vec![1.0 / n as f64; n], 0.0, 0.0))
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mass_neg_inf(&self) -> f64 {
        self.mass_neg_inf
    }

    pub fn mass_pos_inf(&self) -> f64 {
        self.mass_pos_inf
    }

    /// One past the last site of the window.
    pub fn end(&self) -> i64 {
        self.offset + self.weights.len() as i64
    }

    /// First and last finite sites with nonzero mass.
    pub fn support(&self) -> Option<(i64, i64)> {
        if self.weights.is_empty() {
            None
        } else {
            Some((self.offset, self.end() - 1))
        }
    }

    pub fn get(&self, k: i64) -> f64 {
        if k < self.offset || k >= self.end() {
            0.0
        } else {
            self.weights[(k - self.offset) as usize]
        }
    }

    pub fn finite_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.mass_neg_inf + self.mass_pos_inf + self.finite_mass()
    }

    pub fn has_infinite_atoms(&self) -> bool {
        self.mass_neg_inf > 0.0 || self.mass_pos_inf > 0.0
    }

    /// Largest single-site mass on `ℤ`.
    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_p_star_bounded(&self, p_star: f64) -> bool {
        self.max_weight() <= p_star
    }

    /// Law of `-X`.
    pub fn reflected(&self) -> Pmf {
        let mut w = self.weights.clone();
        w.reverse();
        Pmf {
            offset: if w.is_empty() { 0 } else { -(self.end() - 1) },
            weights: w,
            mass_neg_inf: self.mass_pos_inf,
            mass_pos_inf: self.mass_neg_inf,
        }
    }

    /// Law of `X + by`.
    pub fn shifted(&self, by: i64) -> Pmf {
        let mut out = self.clone();
        if !out.weights.is_empty() {
            out.offset += by;
        }
        out
    }

    /// Mass of each residue class `k mod R` for `k = 1, ..., R`
    /// (entry `R - 1` holds the class `0 mod R`).
    pub fn residue_masses(&self, step: u32) -> Vec<f64> {
        let r = step as i64;
        let mut pi = vec![0.0; step as usize];
        for (i, &w) in self.weights.iter().enumerate() {
            let k = (self.offset + i as i64).rem_euclid(r);
            let slot = if k == 0 { r - 1 } else { k - 1 };
            pi[slot as usize] += w;
        }
        pi
    }

    pub fn cdf(&self) -> ExtendedCdf {
        let mut acc = self.mass_neg_inf;
        let values = self
            .weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        ExtendedCdf {
            offset: self.offset,
            values,
            floor: self.mass_neg_inf,
            ceiling: 1.0 - self.mass_pos_inf,
        }
    }

    /// Draws `X` by inverting the CDF; `u` is uniform on `[0, 1)`.
    pub fn quantile(&self, u: f64) -> ExtInt {
        if u < self.mass_neg_inf {
            return ExtInt::NegInf;
        }
        let mut acc = self.mass_neg_inf;
        for (i, &w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return ExtInt::Finite(self.offset + i as i64);
            }
        }
        if self.mass_pos_inf > 0.0 {
            ExtInt::PosInf
        } else {
            // rounding slack at the top of the window
            match self.support() {
                Some((_, hi)) => ExtInt::Finite(hi),
                None => ExtInt::NegInf,
            }
        }
    }

    /// CSV with header `k,p_k`; atoms at `±∞` are rows `-inf` / `+inf`,
    /// written only when nonzero.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,p_k\n");
        if self.mass_neg_inf > 0.0 {
            out.push_str(&format!("-inf,{}\n", sig15(self.mass_neg_inf)));
        }
        for (i, &w) in self.weights.iter().enumerate() {
            out.push_str(&format!("{},{}\n", self.offset + i as i64, sig15(w)));
        }
        if self.mass_pos_inf > 0.0 {
            out.push_str(&format!("+inf,{}\n", sig15(self.mass_pos_inf)));
        }
        out
    }

    /// Parses the CSV written by [`Pmf::to_csv`]. Rows may come in any order;
    /// missing sites inside the window are zero.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        let (mut neg, mut pos) = (0.0, 0.0);
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        match lines.next() {
            Some(h) if h.replace(' ', "") == "k,p_k" => {}
            other => {
                return Err(Error::Parse(format!(
                    "expected header `k,p_k`, found {other:?}"
                )))
            }
        }
        for line in lines {
            let (k, p) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("malformed row {line:?}")))?;
            let p: f64 = p
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad probability in row {line:?}")))?;
            match k.parse::<ExtInt>()? {
                ExtInt::NegInf => neg += p,
                ExtInt::PosInf => pos += p,
                ExtInt::Finite(k) => rows.push((k, p)),
            }
        }
        if rows.is_empty() {
            return Self::from_weights(0, Vec::new(), neg, pos);
        }
        let lo = rows.iter().map(|r| r.0).min().unwrap();
        let hi = rows.iter().map(|r| r.0).max().unwrap();
        let mut weights = vec![0.0; (hi - lo + 1) as usize];
        for (k, p) in rows {
            weights[(k - lo) as usize] += p;
        }
        Self::from_weights(lo, weights, neg, pos)
    }
}

/// `pmf_from_weights`.
pub fn pmf_from_weights(
    offset: i64,
    weights: Vec<f64>,
    mass_neg_inf: f64,
    mass_pos_inf: f64,
) -> Result<Pmf> {
    Pmf::from_weights(offset, weights, mass_neg_inf, mass_pos_inf)
}

/// A nondecreasing right-continuous lattice function. `values[i]` is
/// `F_{offset+i}`; below the window the value is `floor`, at and beyond
/// `offset + len` it is `ceiling`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtendedCdf {
    offset: i64,
    values: Vec<f64>,
    floor: f64,
    ceiling: f64,
}

impl ExtendedCdf {
    pub fn new(offset: i64, values: Vec<f64>, floor: f64, ceiling: f64) -> Result<Self> {
        let tol = INVARIANT_TOL;
        if !(floor >= -tol && ceiling <= 1.0 + tol && floor <= ceiling + tol) {
            return Err(Error::DomainError(format!(
                "extended CDF limits must satisfy 0 <= floor <= ceiling <= 1, got {floor}, {ceiling}"
            )));
        }
        let mut prev = floor;
        for (i, &v) in values.iter().chain(std::iter::once(&ceiling)).enumerate() {
            if v < prev - tol {
                return Err(Error::DomainError(format!(
                    "extended CDF decreases at site {}",
                    offset + i as i64
                )));
            }
            prev = v;
        }
        Ok(Self {
            offset,
            values,
            floor,
            ceiling,
        })
    }

    pub(crate) fn from_parts(offset: i64, values: Vec<f64>, floor: f64, ceiling: f64) -> Self {
        Self {
            offset,
            values,
            floor,
            ceiling,
        }
    }

    /// Heaviside step at `k`: the CDF of `δ_k`.
    pub fn heaviside(k: i64) -> Self {
        Pmf::delta(k).cdf()
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn ceiling(&self) -> f64 {
        self.ceiling
    }

    pub fn end(&self) -> i64 {
        self.offset + self.values.len() as i64
    }

    /// `F_k`.
    pub fn eval(&self, k: i64) -> f64 {
        if k < self.offset {
            self.floor
        } else if k >= self.end() {
            self.ceiling
        } else {
            self.values[(k - self.offset) as usize]
        }
    }

    /// The measure whose CDF this is: `p_k = F_k - F_{k-1}`.
    pub fn to_pmf(&self) -> Pmf {
        let mut weights = Vec::with_capacity(self.values.len() + 1);
        let mut prev = self.floor;
        for &v in self.values.iter().chain(std::iter::once(&self.ceiling)) {
            weights.push((v - prev).max(0.0));
            prev = v;
        }
        Pmf::trimmed(self.offset, weights, self.floor, 1.0 - self.ceiling)
    }

    /// Largest increment `F_k - F_{k-1}`.
    pub fn max_increment(&self) -> f64 {
        let mut prev = self.floor;
        let mut best: f64 = 0.0;
        for &v in self.values.iter().chain(std::iter::once(&self.ceiling)) {
            best = best.max(v - prev);
            prev = v;
        }
        best
    }

    pub fn is_nondecreasing(&self, tol: f64) -> bool {
        let mut prev = self.floor;
        self.values
            .iter()
            .chain(std::iter::once(&self.ceiling))
            .all(|&v| {
                let ok = v >= prev - tol;
                prev = v;
                ok
            })
    }
}

/// A distribution function on the real line, with access to left limits so
/// that distances between step functions can be taken at both sides of a jump.
pub trait DistributionFn {
    fn value(&self, x: f64) -> f64;

    fn left_limit(&self, x: f64) -> f64 {
        self.value(x)
    }
}

impl<F: Fn(f64) -> f64> DistributionFn for F {
    fn value(&self, x: f64) -> f64 {
        self(x)
    }
}

/// `max |f - g|` over `grid`, evaluated at each point and at its left limit.
pub fn kolmogorov_distance(
    f: &dyn DistributionFn,
    g: &dyn DistributionFn,
    grid: &[f64],
) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    Ok(grid.iter().fold(0.0f64, |acc, &x| {
        let right = (f.value(x) - g.value(x)).abs();
        let left = (f.left_limit(x) - g.left_limit(x)).abs();
        acc.max(right).max(left)
    }))
}

/// `x ↦ F_{⌊n^{1/(m+2)} x⌋}`: the CDF of `X_n / n^{1/(m+2)}`.
#[derive(Debug, Clone)]
pub struct RescaledCdf {
    cdf: ExtendedCdf,
    scale: f64,
}

impl RescaledCdf {
    pub fn new(p: &Pmf, n: u64, m: f64) -> Self {
        Self::with_scale(p.cdf(), (n as f64).powf(1.0 / (m + 2.0)))
    }

    pub fn with_scale(cdf: ExtendedCdf, scale: f64) -> Self {
        Self { cdf, scale }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Site index `k` with `k / scale <= x < (k+1) / scale`.
    fn site(&self, x: f64) -> i64 {
        let mut k = (self.scale * x).floor() as i64;
        if (k + 1) as f64 / self.scale <= x {
            k += 1;
        } else if k as f64 / self.scale > x {
            k -= 1;
        }
        k
    }

    /// Jump locations `k / scale` for every site in the window.
    pub fn jump_points(&self) -> Vec<f64> {
        (self.cdf.offset()..=self.cdf.end())
            .map(|k| k as f64 / self.scale)
            .collect()
    }
}

impl DistributionFn for RescaledCdf {
    fn value(&self, x: f64) -> f64 {
        if x == f64::INFINITY {
            return self.cdf.ceiling();
        }
        if x == f64::NEG_INFINITY {
            return self.cdf.floor();
        }
        self.cdf.eval(self.site(x))
    }

    fn left_limit(&self, x: f64) -> f64 {
        if !x.is_finite() {
            return self.value(x);
        }
        let k = self.site(x);
        if k as f64 / self.scale == x {
            self.cdf.eval(k - 1)
        } else {
            self.cdf.eval(k)
        }
    }
}

pub fn rescaled_cdf(p: &Pmf, n: u64, m: f64) -> RescaledCdf {
    RescaledCdf::new(p, n, m)
}
