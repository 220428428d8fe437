//! Barotropic equations of state, the pressure potential and the
//! Bregman-type relative quantities built from them.
//!
//! Two pressure laws are supported:
//!
//! * isentropic, `p = a rho^gamma` with `gamma > 1` (no maximal density);
//! * hard-sphere, `p = a [(rho_bar / (rho_bar - rho))^beta - 1]`, which blows
//!   up at the maximal density `rho_bar`.
//!
//! The pressure potential `P` solves `P'(rho) rho - P(rho) = p(rho)`. It is
//! defined up to a term linear in `rho`; relative quantities do not see that
//! gauge. The isentropic law uses `P = a rho^gamma / (gamma - 1)`. The
//! hard-sphere law uses `P(rho) = rho * int_{rho_0}^{rho} p(s) / s^2 ds` with
//! `rho_0 = 1e-3 rho_bar`, tabulated once and refined by adaptive quadrature
//! from the nearest table node.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

/// Parameters of a pressure law, as read from a run configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EosSpec {
    Isentropic { a: f64, gamma: f64 },
    HardSphere { a: f64, beta: f64, rho_bar: f64 },
}

impl EosSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        match *self {
            EosSpec::Isentropic { a, gamma } => {
                if !(a > 0.0 && a.is_finite()) {
                    return bad("eos.a must be positive");
                }
                if !(gamma > 1.0 && gamma.is_finite()) {
                    return bad("eos.gamma must exceed 1");
                }
            }
            EosSpec::HardSphere { a, beta, rho_bar } => {
                if !(a > 0.0 && a.is_finite()) {
                    return bad("eos.a must be positive");
                }
                if !(beta > 0.0 && beta.is_finite()) {
                    return bad("eos.beta must be positive");
                }
                if !(rho_bar > 0.0 && rho_bar.is_finite()) {
                    return bad("eos.rho_bar must be positive");
                }
            }
        }
        Ok(())
    }

    /// Maximal density; infinite for the isentropic law.
    pub fn rho_bar(&self) -> f64 {
        match *self {
            EosSpec::Isentropic { .. } => f64::INFINITY,
            EosSpec::HardSphere { rho_bar, .. } => rho_bar,
        }
    }
}

/// Tabulated pressure potential for laws without a closed-form potential.
#[derive(Debug, Clone)]
pub struct PotentialTable {
    /// Strictly increasing sample densities in `(0, rho_bar)`.
    pub densities: Vec<f64>,
    /// `P` at the sample densities.
    pub values: Vec<f64>,
    /// `int_{rho_0}^{rho_k} p(s)/s^2 ds`, i.e. `values[k] / densities[k]`.
    integrals: Vec<f64>,
    /// Lower limit of the defining integral (`P(inner_anchor) = 0`).
    pub inner_anchor: f64,
    /// Reference density `rho_bar / 2`.
    pub rho_ref: f64,
}

pub const TABLE_NODES: usize = 4096;
const QUAD_ABS_TOL: f64 = 1e-12;
const QUAD_REL_TOL: f64 = 1e-14;

impl PotentialTable {
    fn build(spec: &EosSpec) -> Result<Self> {
        let rho_bar = spec.rho_bar();
        let inner_anchor = 1e-3 * rho_bar;
        // Nodes uniform in logit(rho / rho_bar), clustering at both ends.
        let (lo, hi) = (-18.0f64, 18.0f64);
        let densities: Vec<f64> = (0..TABLE_NODES)
            .map(|k| {
                let xi = lo + (hi - lo) * k as f64 / (TABLE_NODES - 1) as f64;
                rho_bar / (1.0 + (-xi).exp())
            })
            .collect();
        let integrand = |s: f64| raw_pressure(spec, s) / (s * s);
        // Integrals between consecutive nodes, then anchor at inner_anchor.
        let mut cumulative = vec![0.0; TABLE_NODES];
        for k in 1..TABLE_NODES {
            let piece = quadrature::integrate(
                integrand,
                densities[k - 1],
                densities[k],
                QUAD_ABS_TOL,
                QUAD_REL_TOL,
            )?;
            cumulative[k] = cumulative[k - 1] + piece;
        }
        let k0 = nearest_node(&densities, inner_anchor);
        let offset = cumulative[k0]
            + quadrature::integrate(integrand, densities[k0], inner_anchor, QUAD_ABS_TOL, QUAD_REL_TOL)?;
        let integrals: Vec<f64> = cumulative.iter().map(|c| c - offset).collect();
        let values = densities.iter().zip(&integrals).map(|(r, i)| r * i).collect();
        Ok(Self {
            densities,
            values,
            integrals,
            inner_anchor,
            rho_ref: 0.5 * rho_bar,
        })
    }

    fn potential(&self, spec: &EosSpec, rho: f64) -> Result<f64> {
        let k = nearest_node(&self.densities, rho);
        let integrand = |s: f64| raw_pressure(spec, s) / (s * s);
        let tail = quadrature::integrate(integrand, self.densities[k], rho, QUAD_ABS_TOL, QUAD_REL_TOL)?;
        Ok(rho * (self.integrals[k] + tail))
    }

    /// Cubic Hermite interpolation of the table, using the exact slope
    /// `P' = (P + p) / rho` at the nodes.
    pub fn interpolate(&self, spec: &EosSpec, rho: f64) -> f64 {
        let n = self.densities.len();
        let k = match self.densities.partition_point(|&d| d <= rho) {
            0 => 0,
            j if j >= n => n - 2,
            j => j - 1,
        };
        let (x0, x1) = (self.densities[k], self.densities[k + 1]);
        let (y0, y1) = (self.values[k], self.values[k + 1]);
        let d0 = (y0 + raw_pressure(spec, x0)) / x0;
        let d1 = (y1 + raw_pressure(spec, x1)) / x1;
        let h = x1 - x0;
        let t = (rho - x0) / h;
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * h * d0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * h * d1
    }
}

fn nearest_node(nodes: &[f64], x: f64) -> usize {
    let j = nodes.partition_point(|&d| d <= x);
    if j == 0 {
        0
    } else if j >= nodes.len() {
        nodes.len() - 1
    } else if (x - nodes[j - 1]) <= (nodes[j] - x) {
        j - 1
    } else {
        j
    }
}

/// `x^e`, through repeated multiplication for small integer exponents
/// (the common gamma = 2, beta = 3 cases sit in the inner loops).
#[inline]
fn pow(x: f64, e: f64) -> f64 {
    if e == e.trunc() && e.abs() <= 16.0 {
        x.powi(e as i32)
    } else {
        x.powf(e)
    }
}

fn raw_pressure(spec: &EosSpec, rho: f64) -> f64 {
    match *spec {
        EosSpec::Isentropic { a, gamma } => a * pow(rho, gamma),
        EosSpec::HardSphere { a, beta, rho_bar } => a * (pow(rho_bar / (rho_bar - rho), beta) - 1.0),
    }
}

/// A validated equation of state. Immutable once built; cheap to share by
/// reference across threads.
#[derive(Debug, Clone)]
pub struct Eos {
    spec: EosSpec,
    table: Option<PotentialTable>,
}

impl Eos {
    pub fn new(spec: EosSpec) -> Result<Self> {
        spec.validate()?;
        let table = match spec {
            EosSpec::Isentropic { .. } => None,
            EosSpec::HardSphere { .. } => Some(PotentialTable::build(&spec)?),
        };
        Ok(Self { spec, table })
    }

    pub fn spec(&self) -> &EosSpec {
        &self.spec
    }

    pub fn table(&self) -> Option<&PotentialTable> {
        self.table.as_ref()
    }

    pub fn rho_bar(&self) -> f64 {
        self.spec.rho_bar()
    }

    /// Density used as the reference anchor of the potential.
    pub fn rho_ref(&self) -> f64 {
        match &self.table {
            Some(t) => t.rho_ref,
            None => 1.0,
        }
    }

    fn check(&self, rho: f64) -> Result<()> {
        if rho >= 0.0 && rho < self.rho_bar() {
            Ok(())
        } else {
            Err(Error::DensityOutOfRange { rho, rho_bar: self.rho_bar() })
        }
    }

    pub fn pressure(&self, rho: f64) -> Result<f64> {
        self.check(rho)?;
        Ok(self.p(rho))
    }

    pub fn pressure_derivative(&self, rho: f64) -> Result<f64> {
        self.check(rho)?;
        Ok(self.dp(rho))
    }

    pub fn sound_speed(&self, rho: f64) -> Result<f64> {
        self.check(rho)?;
        Ok(self.dp(rho).sqrt())
    }

    pub fn pressure_potential(&self, rho: f64) -> Result<f64> {
        self.check(rho)?;
        if rho == 0.0 {
            return Ok(0.0);
        }
        match (&self.spec, &self.table) {
            (EosSpec::Isentropic { a, gamma }, _) => Ok(a * rho.powf(*gamma) / (gamma - 1.0)),
            (spec, Some(table)) => table.potential(spec, rho),
            (_, None) => unreachable!("hard-sphere law always carries a table"),
        }
    }

    /// `P'(rho)`, obtained from the defining identity `P' rho - P = p`.
    pub fn potential_derivative(&self, rho: f64) -> Result<f64> {
        let big_p = self.pressure_potential(rho)?;
        Ok((big_p + self.p(rho)) / rho)
    }

    /// Bregman divergence of the pressure potential:
    /// `P(rho) - P'(R)(rho - R) - P(R)`.
    pub fn relative_potential(&self, rho: f64, big_r: f64) -> Result<f64> {
        self.check(rho)?;
        self.check(big_r)?;
        if big_r == 0.0 {
            return Err(Error::DensityOutOfRange { rho: big_r, rho_bar: self.rho_bar() });
        }
        if rho == big_r {
            return Ok(0.0);
        }
        if self.is_short_interval(rho, big_r) {
            // P'' = p'/s, so the divergence is int_R^rho (rho - s) p'(s)/s ds.
            return Ok(quadrature::gauss_legendre8(|s| (rho - s) * self.dp(s) / s, big_r, rho));
        }
        let value = self.pressure_potential(rho)?
            - self.potential_derivative(big_r)? * (rho - big_r)
            - self.pressure_potential(big_r)?;
        Ok(value.max(0.0))
    }

    /// Bregman divergence of the pressure: `p(rho) - p'(R)(rho - R) - p(R)`.
    pub fn relative_pressure(&self, rho: f64, big_r: f64) -> Result<f64> {
        self.check(rho)?;
        self.check(big_r)?;
        if rho == big_r {
            return Ok(0.0);
        }
        if self.is_short_interval(rho, big_r) {
            return Ok(quadrature::gauss_legendre8(|s| (rho - s) * self.d2p(s), big_r, rho));
        }
        let value = self.p(rho) - self.dp(big_r) * (rho - big_r) - self.p(big_r);
        Ok(value.max(0.0))
    }

    // Short intervals are integrated directly so that the divergence keeps
    // full relative precision instead of cancelling.
    fn is_short_interval(&self, x: f64, y: f64) -> bool {
        let lo = x.min(y);
        let hi = x.max(y);
        let room = (self.rho_bar() - hi).min(lo);
        hi - lo <= 0.05 * room
    }

    /// Pressure without range checks.
    #[inline]
    pub fn p(&self, rho: f64) -> f64 {
        raw_pressure(&self.spec, rho)
    }

    /// `p'(rho)` without range checks.
    #[inline]
    pub fn dp(&self, rho: f64) -> f64 {
        match self.spec {
            EosSpec::Isentropic { a, gamma } => a * gamma * pow(rho, gamma - 1.0),
            EosSpec::HardSphere { a, beta, rho_bar } => {
                a * beta * pow(rho_bar, beta) * pow(rho_bar - rho, -beta - 1.0)
            }
        }
    }

    /// `p''(rho)` without range checks.
    #[inline]
    pub fn d2p(&self, rho: f64) -> f64 {
        match self.spec {
            EosSpec::Isentropic { a, gamma } => a * gamma * (gamma - 1.0) * pow(rho, gamma - 2.0),
            EosSpec::HardSphere { a, beta, rho_bar } => {
                a * beta * (beta + 1.0) * pow(rho_bar, beta) * pow(rho_bar - rho, -beta - 2.0)
            }
        }
    }

    /// Sound speed without range checks.
    #[inline]
    pub fn c(&self, rho: f64) -> f64 {
        self.dp(rho).sqrt()
    }

    /// Samples the structural hypotheses on the pressure law and reports the
    /// observed extrema.
    pub fn check_hypotheses(&self) -> Result<HypothesisReport> {
        let rho_bar = self.rho_bar();
        let upper = if rho_bar.is_finite() { rho_bar * (1.0 - 1e-6) } else { 1e6 };
        let lower = if rho_bar.is_finite() { rho_bar * 1e-6 } else { 1e-6 };
        let n = 2000;
        let mut min_dp = f64::INFINITY;
        let mut min_d2p = f64::INFINITY;
        for k in 0..n {
            let rho = lower * (upper / lower).powf(k as f64 / (n - 1) as f64);
            min_dp = min_dp.min(self.dp(rho));
            min_d2p = min_d2p.min(self.d2p(rho));
        }
        let growth = match self.spec {
            EosSpec::HardSphere { rho_bar, .. } => {
                // liminf proxy of p / (P + rho^gamma) near rho_bar; gamma = 2 > d/2.
                let mut m = f64::INFINITY;
                for k in 0..200 {
                    let rho = rho_bar * (0.9 + 0.099 * k as f64 / 199.0);
                    let big_p = self.pressure_potential(rho)?;
                    m = m.min(self.p(rho) / (big_p + rho * rho));
                }
                m
            }
            EosSpec::Isentropic { a, gamma } => {
                // p / (P + rho^gamma) tends to a / (a / (gamma - 1) + 1).
                a / (a / (gamma - 1.0) + 1.0)
            }
        };
        Ok(HypothesisReport {
            pressure_at_zero: self.p(0.0),
            min_dp,
            min_d2p,
            growth_ratio: growth,
        })
    }

    /// Largest sampled value of `(rho/R - 1)^2 / relative_pressure(rho, R)`
    /// over a compact density window. Finite values certify the
    /// comparability of the squared density ratio with the relative pressure.
    pub fn comparability_constant(&self, lo: f64, hi: f64, samples: usize) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for i in 0..samples {
            let rho = lo + (hi - lo) * (i as f64 + 0.5) / samples as f64;
            for j in 0..samples {
                let big_r = lo + (hi - lo) * (j as f64 + 0.5) / samples as f64;
                if i == j {
                    continue;
                }
                let rel = self.relative_pressure(rho, big_r)?;
                let ratio = (rho / big_r - 1.0).powi(2) / rel;
                worst = worst.max(ratio);
            }
        }
        Ok(worst)
    }
}

/// Sampled evidence for the structural assumptions on `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub pressure_at_zero: f64,
    pub min_dp: f64,
    pub min_d2p: f64,
    pub growth_ratio: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gamma2() -> Eos {
        Eos::new(EosSpec::Isentropic { a: 1.0, gamma: 2.0 }).unwrap()
    }

    fn hs1() -> Eos {
        Eos::new(EosSpec::HardSphere { a: 1.0, beta: 1.0, rho_bar: 1.0 }).unwrap()
    }

    #[test]
    fn pressure_values() {
        assert_eq!(gamma2().pressure(3.0).unwrap(), 9.0);
        assert!((hs1().pressure(0.5).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(gamma2().pressure(0.0).unwrap(), 0.0);
        assert_eq!(hs1().pressure(0.0).unwrap(), 0.0);
    }

    #[test]
    fn derivative_and_sound_speed_values() {
        assert_eq!(gamma2().pressure_derivative(2.0).unwrap(), 4.0);
        assert!((hs1().pressure_derivative(0.5).unwrap() - 4.0).abs() < 1e-14);
        assert_eq!(gamma2().sound_speed(2.0).unwrap(), 2.0);
        assert!((gamma2().sound_speed(1.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn out_of_range_densities_are_rejected() {
        assert!(matches!(hs1().pressure(1.0), Err(Error::DensityOutOfRange { .. })));
        assert!(matches!(hs1().pressure(1.5), Err(Error::DensityOutOfRange { .. })));
        assert!(matches!(gamma2().pressure(-1e-3), Err(Error::DensityOutOfRange { .. })));
        assert!(gamma2().pressure(1e30).is_ok());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(Eos::new(EosSpec::Isentropic { a: 1.0, gamma: 1.0 }).is_err());
        assert!(Eos::new(EosSpec::Isentropic { a: -1.0, gamma: 2.0 }).is_err());
        assert!(Eos::new(EosSpec::HardSphere { a: 1.0, beta: 0.0, rho_bar: 1.0 }).is_err());
        assert!(Eos::new(EosSpec::HardSphere { a: 1.0, beta: 1.0, rho_bar: -2.0 }).is_err());
    }

    #[test]
    fn isentropic_potential_and_divergences() {
        let eos = gamma2();
        assert_eq!(eos.pressure_potential(3.0).unwrap(), 9.0);
        assert!((eos.relative_potential(2.0, 1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((eos.relative_pressure(2.0, 1.0).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(eos.relative_potential(1.3, 1.3).unwrap(), 0.0);
        assert_eq!(eos.relative_pressure(1.3, 1.3).unwrap(), 0.0);
    }

    #[test]
    fn hard_sphere_potential_is_anchored() {
        let eos = hs1();
        let table = eos.table().unwrap();
        assert!(eos.pressure_potential(table.inner_anchor).unwrap().abs() < 1e-14);
        // beta = 1, rho_bar = 1: p/s^2 = 1/(s(1-s)), so
        // P(rho) = rho [ln(rho/(1-rho)) - ln(rho0/(1-rho0))].
        let rho0 = table.inner_anchor;
        for rho in [0.01f64, 0.3, 0.5, 0.9, 0.999] {
            let exact = rho * ((rho / (1.0 - rho)).ln() - (rho0 / (1.0 - rho0)).ln());
            let got = eos.pressure_potential(rho).unwrap();
            assert!((got - exact).abs() < 1e-11 * (1.0 + exact.abs()), "{rho}: {got} vs {exact}");
        }
    }

    #[test]
    fn hermite_interpolation_tracks_quadrature() {
        let eos = Eos::new(EosSpec::HardSphere { a: 1.0, beta: 3.0, rho_bar: 2.0 }).unwrap();
        let table = eos.table().unwrap();
        for rho in [0.05, 0.7, 1.0, 1.6, 1.95] {
            let q = eos.pressure_potential(rho).unwrap();
            let h = table.interpolate(eos.spec(), rho);
            assert!((q - h).abs() < 1e-8 * (1.0 + q.abs()), "{rho}: {q} vs {h}");
        }
    }

    #[test]
    fn table_is_strictly_convex() {
        let eos = Eos::new(EosSpec::HardSphere { a: 1.0, beta: 3.0, rho_bar: 2.0 }).unwrap();
        let t = eos.table().unwrap();
        // Restrict to the range where values are well above rounding.
        for k in 1..t.densities.len() - 1 {
            let (x0, x1, x2) = (t.densities[k - 1], t.densities[k], t.densities[k + 1]);
            if x0 < 1e-4 || x2 > 2.0 * (1.0 - 1e-5) {
                continue;
            }
            let d1 = (t.values[k] - t.values[k - 1]) / (x1 - x0);
            let d2 = (t.values[k + 1] - t.values[k]) / (x2 - x1);
            assert!(d2 > d1, "convexity fails at node {k}");
        }
    }

    #[test]
    fn hypotheses_hold_for_both_laws() {
        for eos in [gamma2(), Eos::new(EosSpec::HardSphere { a: 1.0, beta: 3.0, rho_bar: 2.0 }).unwrap()] {
            let rep = eos.check_hypotheses().unwrap();
            assert_eq!(rep.pressure_at_zero, 0.0);
            assert!(rep.min_dp > 0.0);
            assert!(rep.min_d2p > 0.0);
            assert!(rep.growth_ratio > 0.0);
        }
    }

    #[test]
    fn comparability_constant_is_finite() {
        let eos = Eos::new(EosSpec::HardSphere { a: 1.0, beta: 3.0, rho_bar: 2.0 }).unwrap();
        let c = eos.comparability_constant(0.5, 1.5, 40).unwrap();
        assert!(c.is_finite() && c > 0.0);
        // For p = rho^2 the ratio is exactly 1/R^2 <= 1/lo^2.
        let c2 = gamma2().comparability_constant(0.5, 1.5, 40).unwrap();
        assert!(c2 <= 4.0 + 1e-9, "{c2}");
    }
}
