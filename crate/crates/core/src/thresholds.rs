//! Closed-form quantities of r-neighbour bootstrap percolation on G(n,p).
//!
//! Everything here is a pure function of its arguments: the binomial tail
//! π̂(t) = P[Bin(t,p) ≥ r], the regime slack δ, the scan horizon t₀, the
//! critical pair (a_c, t_c), the giant-component fraction ρ(ε), and the
//! tail bounds used by the subcritical and supercritical statements.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fmt::sig12;

/// The triple (n, p, r) with its regime diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProcessParams {
    n: u64,
    #[serde(serialize_with = "sig12")]
    p: f64,
    r: u32,
    np: f64,
    np_r: f64,
    regime_ok: bool,
}

impl ProcessParams {
    pub fn new(n: u64, p: f64, r: u32) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidParams(format!(
                "p must satisfy 0 < p < 1 (got {p})"
            )));
        }
        if r < 2 {
            return Err(Error::InvalidParams(format!(
                "r must satisfy r >= 2 (got {r})"
            )));
        }
        if n < u64::from(r) + 1 {
            return Err(Error::InvalidParams(format!(
                "n must satisfy n >= r + 1 = {} (got {n})",
                r + 1
            )));
        }
        let np = n as f64 * p;
        let np_r = ((n as f64).ln() + f64::from(r) * p.ln()).exp();
        if !np.is_finite() {
            return Err(Error::InvalidParams(format!(
                "n*p must be finite (got {np})"
            )));
        }
        Ok(Self {
            n,
            p,
            r,
            np,
            np_r,
            regime_ok: np > 1.0 && np_r < 1.0,
        })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn np(&self) -> f64 {
        self.np
    }

    /// n·p^r, evaluated in log space.
    pub fn np_r(&self) -> f64 {
        self.np_r
    }

    /// True iff np > 1 and np^r < 1, the finite-n stand-in for
    /// p = ω(1/n) and p = o(n^(-1/r)).
    pub fn regime_ok(&self) -> bool {
        self.regime_ok
    }

    /// π̂(t) for these parameters.
    pub fn pi_hat(&self, t: u64) -> f64 {
        binom_tail_geq(t, self.p, self.r)
    }
}

/// Critical quantities for one parameter triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalValues {
    pub delta: f64,
    pub t0: f64,
    pub t0_int: u64,
    pub tc: u64,
    pub ac: f64,
    pub tc_asym: f64,
    pub ac_asym: f64,
    #[serde(serialize_with = "sig12")]
    pub pi_hat_tc: f64,
}

/// Inputs of the martingale concentration bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    lambda: f64,
    max_step: f64,
    var_sum: f64,
}

impl BoundInputs {
    pub fn new(lambda: f64, max_step: f64, var_sum: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "lambda must be >= 0 (got {lambda})"
            )));
        }
        if !(max_step > 0.0 && max_step.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "max_step must be > 0 (got {max_step})"
            )));
        }
        if !(var_sum >= 0.0 && var_sum.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "var_sum must be >= 0 (got {var_sum})"
            )));
        }
        Ok(Self {
            lambda,
            max_step,
            var_sum,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn max_step(&self) -> f64 {
        self.max_step
    }

    pub fn var_sum(&self) -> f64 {
        self.var_sum
    }
}

/// Neumaier-compensated running sum.
#[derive(Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// ln C(t, j) by a product of j ratios; j is small in every caller.
fn ln_choose_small(t: u64, j: u64) -> f64 {
    (0..j).map(|i| ((t - i) as f64 / (i + 1) as f64).ln()).sum()
}

/// P[Bin(t, p) ≥ r].
///
/// Below the mean the r lower terms are summed in log space and subtracted
/// from one. When t·p < r the upper tail is tiny and is summed directly so
/// that it keeps full relative precision.
pub fn binom_tail_geq(t: u64, p: f64, r: u32) -> f64 {
    let r = u64::from(r);
    if t < r || p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let ln_p = p.ln();
    let ln_q = (-p).ln_1p();
    let ln_term = |j: u64| ln_choose_small(t, j) + j as f64 * ln_p + (t - j) as f64 * ln_q;

    if (t as f64) * p < r as f64 {
        // Terms decrease from j = r onward since the mode is at most r.
        let ratio_odds = p / (1.0 - p);
        let mut term = ln_term(r).exp();
        let mut acc = CompensatedSum::default();
        let mut j = r;
        loop {
            acc.add(term);
            if j == t || term <= acc.value() * 1e-18 || term == 0.0 {
                break;
            }
            term *= (t - j) as f64 / (j + 1) as f64 * ratio_odds;
            j += 1;
        }
        acc.value().clamp(0.0, 1.0)
    } else {
        let mut acc = CompensatedSum::default();
        for j in 0..r {
            acc.add(ln_term(j).exp());
        }
        (1.0 - acc.value()).clamp(0.0, 1.0)
    }
}

/// δ = max{(np^r)^(1/(2(r−1))), (np)^(−1/(4(r−1)))}.
pub fn delta(params: &ProcessParams) -> f64 {
    let rm1 = f64::from(params.r - 1);
    let upper = params.np_r.powf(1.0 / (2.0 * rm1));
    let lower = params.np.powf(-1.0 / (4.0 * rm1));
    upper.max(lower)
}

fn ln_factorial(k: u32) -> f64 {
    (2..=k).map(|i| f64::from(i).ln()).sum()
}

/// t₀ = ((1+δ)(r−1)!/(np^r))^(1/(r−1)), real valued.
pub fn t_zero(params: &ProcessParams) -> f64 {
    let d = delta(params);
    let rm1 = f64::from(params.r - 1);
    let ln_np_r = (params.n as f64).ln() + f64::from(params.r) * params.p.ln();
    ((d.ln_1p() + ln_factorial(params.r - 1) - ln_np_r) / rm1).exp()
}

/// ⌈t₀⌉, capped at n.
pub fn t_zero_int(params: &ProcessParams) -> u64 {
    let t0 = t_zero(params);
    if t0 >= params.n as f64 {
        params.n
    } else {
        t0.ceil().max(0.0) as u64
    }
}

/// ((r−1)!/(np^r))^(1/(r−1)), the leading-order value of t_c.
pub fn tc_asymptotic(params: &ProcessParams) -> f64 {
    let rm1 = f64::from(params.r - 1);
    let ln_np_r = (params.n as f64).ln() + f64::from(params.r) * params.p.ln();
    ((ln_factorial(params.r - 1) - ln_np_r) / rm1).exp()
}

/// (t − n·π̂(t)) / (1 − π̂(t)); a_c is the maximum of this over t ≤ t₀.
pub fn deficit_ratio(params: &ProcessParams, t: u64) -> Result<f64> {
    let pi = params.pi_hat(t);
    if pi >= 1.0 {
        return Err(Error::DegenerateRegime { t });
    }
    let numer = (-(params.n as f64)).mul_add(pi, t as f64);
    Ok(numer / (1.0 - pi))
}

/// Scans t ∈ [r, ⌈t₀⌉] for the critical pair.
///
/// a_c = −min (n·π̂(t) − t)/(1 − π̂(t)) = max (t − n·π̂(t))/(1 − π̂(t)), and t_c is
/// the smallest t attaining it.
pub fn critical_pair(params: &ProcessParams) -> Result<CriticalValues> {
    let d = delta(params);
    let t0 = t_zero(params);
    let t0_int = t_zero_int(params);
    let start = u64::from(params.r);
    let end = t0_int.max(start);

    let mut tc = start;
    let mut ac = f64::NEG_INFINITY;
    for t in start..=end {
        let f = deficit_ratio(params, t)?;
        if f > ac {
            ac = f;
            tc = t;
        }
    }
    let tc_asym = tc_asymptotic(params);
    Ok(CriticalValues {
        delta: d,
        t0,
        t0_int,
        tc,
        ac,
        tc_asym,
        ac_asym: (1.0 - 1.0 / f64::from(params.r)) * tc_asym,
        pi_hat_tc: params.pi_hat(tc),
    })
}

/// The unique root in (0,1) of 1 − ρ = exp(−(1+ε)ρ).
pub fn rho_fixed_point(eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::NoConvergence(format!(
            "1 - rho = exp(-(1+eps) rho) has no root in (0,1) for eps = {eps}"
        )));
    }
    let c = 1.0 + eps;
    // h > 0 strictly between 0 and the root, h < 0 above it.
    let h = |x: f64| -x - (-c * x).exp_m1();
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let rho = 0.5 * (lo + hi);
    if rho > 0.0 && rho < 1.0 && h(rho).abs() < 1e-12 {
        Ok(rho)
    } else {
        Err(Error::NoConvergence(format!(
            "bisection ended at rho = {rho} with residual {}",
            h(rho)
        )))
    }
}

/// Upper bound on P[X − E X ≤ −λ] for binomial X.
pub fn chernoff_lower(mean: f64, lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if mean <= 0.0 {
        return 0.0;
    }
    (-lambda * lambda / (2.0 * mean)).exp().min(1.0)
}

/// Upper bound on P[X − E X ≥ λ] for binomial X.
pub fn chernoff_upper(mean: f64, lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    (-lambda * lambda / (2.0 * (mean.max(0.0) + lambda / 3.0)))
        .exp()
        .min(1.0)
}

/// exp(−λ² / (2(Σσᵢ² + mλ/3))).
pub fn martingale_tail_bound(b: &BoundInputs) -> f64 {
    if b.lambda == 0.0 {
        return 1.0;
    }
    let denom = 2.0 * (b.var_sum + b.max_step * b.lambda / 3.0);
    (-b.lambda * b.lambda / denom).exp().min(1.0)
}

/// Failure probability of the subcritical statement with the (1+o(1))
/// factor taken as 1: exp(−rα² / (2(t₀ + rα/3))).
pub fn subcritical_bound(r: u32, t0: f64, alpha: f64) -> f64 {
    if alpha <= 0.0 {
        return 1.0;
    }
    let r = f64::from(r);
    (-r * alpha * alpha / (2.0 * (t0 + r * alpha / 3.0)))
        .exp()
        .min(1.0)
}

/// Failure probability of the supercritical statement with (1+o(1)) = 1:
/// exp(−rα²/(8(t₀+rα/3))) + exp(−(r−1)α²/(8(t₀+(r−1)α/2))), capped at 1.
pub fn supercritical_bound(r: u32, t0: f64, alpha: f64) -> f64 {
    if alpha <= 0.0 {
        return 1.0;
    }
    let rf = f64::from(r);
    let rm1 = rf - 1.0;
    let early = (-rf * alpha * alpha / (8.0 * (t0 + rf * alpha / 3.0))).exp();
    let bridge = (-rm1 * alpha * alpha / (8.0 * (t0 + rm1 * alpha / 2.0))).exp();
    (early + bridge).min(1.0)
}

pub fn theorem_subcritical_bound(params: &ProcessParams, alpha: f64) -> f64 {
    subcritical_bound(params.r, t_zero(params), alpha)
}

pub fn theorem_supercritical_bound(params: &ProcessParams, alpha: f64) -> f64 {
    supercritical_bound(params.r, t_zero(params), alpha)
}

/// g(x) = 2(eˣ − 1 − x)/x², with g(0) = 1.
pub fn g_function(x: f64) -> f64 {
    if x < 1.0 {
        // 2 Σ_{l≥2} x^(l−2)/l!
        let mut term = 0.5;
        let mut acc = 0.0_f64;
        let mut l = 2.0;
        while term > 1e-20 * acc.max(1e-300) || acc == 0.0 {
            acc += term;
            l += 1.0;
            term *= x / l;
            if term == 0.0 {
                break;
            }
        }
        2.0 * acc
    } else {
        2.0 * (x.exp_m1() - x) / (x * x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: u64, p: f64, r: u32) -> ProcessParams {
        ProcessParams::new(n, p, r).unwrap()
    }

    #[test]
    fn tail_small_cases() {
        assert_eq!(binom_tail_geq(1, 0.5, 2), 0.0);
        assert_eq!(binom_tail_geq(10, 1.0, 3), 1.0);
        let expected = 1.0 - 0.8f64.powi(5) - 5.0 * 0.2 * 0.8f64.powi(4);
        assert!((binom_tail_geq(5, 0.2, 2) - expected).abs() < 1e-15);
        assert!((expected - 0.26272).abs() < 1e-12);
    }

    #[test]
    fn tail_branches_agree_near_switch() {
        // t·p straddles r: direct upper sum and complement of the lower sum.
        for &(t, p, r) in &[
            (40u64, 0.05_f64, 2u32),
            (41, 0.05, 2),
            (60, 0.05, 3),
            (59, 0.05, 3),
        ] {
            let upper: f64 = (u64::from(r)..=t)
                .map(|j| {
                    ln_choose_small(t, j).exp() * p.powi(j as i32) * (1.0 - p).powi((t - j) as i32)
                })
                .sum();
            assert!(
                (binom_tail_geq(t, p, r) - upper).abs() < 1e-13,
                "t={t} r={r}"
            );
        }
    }

    #[test]
    fn tail_tiny_values_keep_relative_precision() {
        // P[Bin(3, 1e-9) ≥ 2] = 3p²(1−p) + p³
        let p = 1e-9;
        let exact = 3.0 * p * p * (1.0 - p) + p * p * p;
        let got = binom_tail_geq(3, p, 2);
        assert!(((got - exact) / exact).abs() < 1e-12);
    }

    #[test]
    fn params_validation() {
        assert!(ProcessParams::new(100, 1.5, 2).is_err());
        assert!(ProcessParams::new(100, 0.0, 2).is_err());
        assert!(ProcessParams::new(100, 0.1, 1).is_err());
        assert!(ProcessParams::new(2, 0.1, 2).is_err());
        let ok = params(1_000_000, 1e-4, 2);
        assert!(ok.regime_ok());
        assert!(!params(100, 0.001, 2).regime_ok());
    }

    #[test]
    fn delta_examples() {
        let d = delta(&params(1_000_000, 1e-4, 2));
        assert!((d - 100f64.powf(-0.25)).abs() < 1e-12);
        let d3 = delta(&params(1_000_000, 1e-3, 3));
        let want = (1e-3f64).powf(0.25).max(1000f64.powf(-0.125));
        assert!((d3 - want).abs() < 1e-12);
    }

    #[test]
    fn t_zero_examples() {
        let pp = params(1_000_000, 1e-4, 2);
        let want = (1.0 + 100f64.powf(-0.25)) / 0.01;
        assert!((t_zero(&pp) - want).abs() < 1e-9);
        assert!((want - 131.6227766).abs() < 1e-6);
        assert_eq!(t_zero_int(&pp), 132);

        let p3 = params(1_000_000, 1e-3, 3);
        let want3 = ((1.0 + delta(&p3)) * 2.0 / 1e-3).sqrt();
        assert!((t_zero(&p3) - want3).abs() < 1e-9);
    }

    #[test]
    fn critical_pair_is_smallest_argmax() {
        let pp = params(1_000_000, 1e-4, 2);
        let cv = critical_pair(&pp).unwrap();
        let f = |t| deficit_ratio(&pp, t).unwrap();
        assert_eq!(cv.ac, f(cv.tc));
        for t in 2..=cv.t0_int {
            assert!(f(t) <= cv.ac);
            if t < cv.tc {
                assert!(f(t) < cv.ac);
            }
        }
        assert!(0.0 <= cv.ac && cv.ac <= cv.tc as f64 && cv.tc <= cv.t0_int);
        assert!((cv.tc_asym - 100.0).abs() < 1e-9);
        assert!((cv.ac_asym - 50.0).abs() < 1e-9);
    }

    #[test]
    fn critical_pair_out_of_regime_goes_nonpositive() {
        // np^r = 10: n·π̂(t) ≥ t on the whole scan.
        let pp = params(1000, 0.1, 2);
        assert!(!pp.regime_ok());
        let cv = critical_pair(&pp).unwrap();
        assert!(cv.ac <= 0.0);
    }

    #[test]
    fn rho_examples() {
        let r = rho_fixed_point(0.2).unwrap();
        assert!((1.0 - r - (-1.2 * r).exp()).abs() < 1e-12);
        assert!((r - 0.3137).abs() < 1e-3);
        assert!(rho_fixed_point(10.0).unwrap() > 0.999);
        let tiny = rho_fixed_point(1e-6).unwrap();
        assert!(tiny > 0.0 && tiny < 1e-5);
        assert!(rho_fixed_point(0.0).is_err());
        assert!(rho_fixed_point(-0.5).is_err());
    }

    #[test]
    fn chernoff_examples() {
        assert_eq!(chernoff_lower(50.0, 0.0), 1.0);
        assert_eq!(chernoff_upper(50.0, 0.0), 1.0);
        assert!((chernoff_lower(50.0, 10.0) - (-1.0f64).exp()).abs() < 1e-15);
        let want = (-100.0_f64 / (2.0 * (50.0 + 10.0 / 3.0))).exp();
        assert!((chernoff_upper(50.0, 10.0) - want).abs() < 1e-15);
        assert_eq!(chernoff_lower(0.0, 3.0), 0.0);
    }

    #[test]
    fn martingale_bound_examples() {
        let b = BoundInputs::new(0.0, 1.0, 5.0).unwrap();
        assert_eq!(martingale_tail_bound(&b), 1.0);
        let b = BoundInputs::new(30.0, 1.0, 131.6).unwrap();
        let want = (-900.0f64 / (2.0 * 141.6)).exp();
        assert!((martingale_tail_bound(&b) - want).abs() < 1e-15);
        let c = 3.7;
        let scaled = BoundInputs::new(30.0 * c, c, 131.6 * c * c).unwrap();
        assert!((martingale_tail_bound(&scaled) - want).abs() < 1e-14);
        assert!(BoundInputs::new(1.0, 0.0, 1.0).is_err());
        assert!(BoundInputs::new(-1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn theorem_bound_examples() {
        let got = subcritical_bound(2, 131.62, 30.0);
        let want = (-1800.0f64 / (2.0 * (131.62 + 20.0))).exp();
        assert!((got - want).abs() < 1e-15);
        assert!((got - 2.6e-3).abs() < 1e-4);
        assert!(subcritical_bound(2, 131.62, 1e6) < 1e-100);
        for alpha in [1.0, 10.0, 30.0, 100.0] {
            assert!(supercritical_bound(2, 131.62, alpha) >= subcritical_bound(2, 131.62, alpha));
            assert!(supercritical_bound(3, 500.0, alpha) >= subcritical_bound(3, 500.0, alpha));
        }
    }

    #[test]
    fn g_examples() {
        assert_eq!(g_function(0.0), 1.0);
        assert!((g_function(1.0) - 2.0 * (std::f64::consts::E - 2.0)).abs() < 1e-14);
        assert!(g_function(2.9) < 30.0);
        // continuity across the series/closed-form switch
        let below = g_function(1.0 - 1e-12);
        let above = g_function(1.0);
        assert!((below - above).abs() < 1e-10);
    }
}
