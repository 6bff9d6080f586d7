//! Statistical verification: empirical characteristic functions with
//! concentration tolerance bands, and quantile checks against symmetric
//! stable laws whose reference CDF is obtained by numerically inverting
//! the characteristic function.

use crate::error::{Error, Result};
use crate::quad::{adaptive_1d, gk15, QuadOpts};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Result of comparing an empirical characteristic function against
/// exp(-scale^alpha |u|^alpha) on a finite set of frequencies.
///
/// passed holds iff both max_u |empirical(u) - theoretical(u)| <= band and
/// max_u |Im empirical(u)| <= band.
#[derive(Debug, Clone, PartialEq)]
pub struct CFTest {
    pub u_values: Vec<f64>,
    pub empirical: Vec<Complex64>,
    pub theoretical: Vec<f64>,
    pub band: f64,
    pub n_samples: usize,
    pub passed: bool,
}

impl CFTest {
    /// Largest deviation: complex distance to the theoretical value
    /// (which dominates the imaginary part on its own).
    pub fn max_gap(&self) -> f64 {
        self.empirical
            .iter()
            .zip(&self.theoretical)
            .map(|(e, &t)| (e - t).norm())
            .fold(0.0, f64::max)
    }

    pub fn report(&self, test: &str, params: serde_json::Value) -> TestReport {
        TestReport {
            test: test.to_string(),
            params,
            n: self.n_samples as u64,
            band: self.band,
            max_gap: self.max_gap(),
            passed: self.passed,
        }
    }
}

/// JSON shape shared by every statistical check the command line exposes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub test: String,
    pub params: serde_json::Value,
    pub n: u64,
    pub band: f64,
    pub max_gap: f64,
    pub passed: bool,
}

/// (1/n) sum of e^{iu x_j} for each u, summed in sample order.
pub fn empirical_cf(samples: &[f64], u_values: &[f64]) -> Result<Vec<Complex64>> {
    if samples.is_empty() {
        return Err(Error::Param(
            "empirical CF needs at least one sample".into(),
        ));
    }
    let n = samples.len() as f64;
    Ok(u_values
        .iter()
        .map(|&u| {
            let mut acc = Complex64::new(0.0, 0.0);
            for &x in samples {
                let (s, c) = (u * x).sin_cos();
                acc += Complex64::new(c, s);
            }
            acc / n
        })
        .collect())
}

/// Tests whether samples are compatible with the SaS(scale) law at the given
/// frequencies. band = multiplier / sqrt(n); the default multiplier 4 puts
/// the per-frequency false-alarm probability near 1e-4 for means of terms
/// bounded by 1.
pub fn cf_test(
    samples: &[f64],
    alpha: f64,
    scale: f64,
    u_values: &[f64],
    band_multiplier: Option<f64>,
) -> Result<CFTest> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::Param(format!(
            "alpha must lie in (0, 2], got {alpha}"
        )));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Param(format!("scale must be positive, got {scale}")));
    }
    let multiplier = band_multiplier.unwrap_or(4.0);
    if !(multiplier > 0.0 && multiplier.is_finite()) {
        return Err(Error::Param("band multiplier must be positive".into()));
    }
    let empirical = empirical_cf(samples, u_values)?;
    let theoretical: Vec<f64> = u_values
        .iter()
        .map(|&u| (-(scale * u.abs()).powf(alpha)).exp())
        .collect();
    let band = multiplier / (samples.len() as f64).sqrt();
    let max_dist = empirical
        .iter()
        .zip(&theoretical)
        .map(|(e, &t)| (e - t).norm())
        .fold(0.0, f64::max);
    let max_im = empirical.iter().map(|e| e.im.abs()).fold(0.0, f64::max);
    let passed = max_dist <= band && max_im <= band;
    Ok(CFTest {
        u_values: u_values.to_vec(),
        empirical,
        theoretical,
        band,
        n_samples: samples.len(),
        passed,
    })
}

/// Quantile comparison against the standard SaS law (characteristic
/// function e^{-|u|^alpha}). Raw quantile gaps presume unit scale; the
/// pass verdict uses the scale-free decile-to-quartile width ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileReport {
    pub alpha: f64,
    pub n: usize,
    pub probs: Vec<f64>,
    pub empirical: Vec<f64>,
    pub reference: Vec<f64>,
    /// |empirical - reference| per probability.
    pub gaps: Vec<f64>,
    /// (q90 - q10) / (q75 - q25) of the samples.
    pub ratio_empirical: f64,
    /// Same ratio for the reference law.
    pub ratio_reference: f64,
    pub ratio_gap: f64,
    /// Four asymptotic standard deviations of the empirical ratio.
    pub ratio_band: f64,
    pub passed: bool,
}

impl QuantileReport {
    pub fn report(&self) -> TestReport {
        TestReport {
            test: "quantile_check".to_string(),
            params: serde_json::json!({ "alpha": self.alpha }),
            n: self.n as u64,
            band: self.ratio_band,
            max_gap: self.ratio_gap,
            passed: self.passed,
        }
    }
}

const QUANTILE_PROBS: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];

/// Compares empirical quantiles of `samples` against the symmetric stable
/// law, inverting the characteristic function for the reference values.
/// Scale-free verdict: the inter-decile over inter-quartile width ratio
/// must sit within four asymptotic standard deviations of the law's ratio.
pub fn quantile_check(samples: &[f64], alpha: f64) -> Result<QuantileReport> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::Param(format!(
            "alpha must lie in (0, 2], got {alpha}"
        )));
    }
    let n = samples.len();
    if n < 10_000 {
        return Err(Error::Refused(format!(
            "quantile comparison needs at least 10000 samples, got {n} (too noisy)"
        )));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    if !sorted.iter().all(|x| x.is_finite()) {
        return Err(Error::Param("samples must be finite".into()));
    }

    let empirical: Vec<f64> = QUANTILE_PROBS
        .iter()
        .map(|&p| sorted_quantile(&sorted, p))
        .collect();
    let reference: Vec<f64> = QUANTILE_PROBS
        .iter()
        .map(|&p| stable_quantile(alpha, p))
        .collect::<Result<_>>()?;
    let gaps: Vec<f64> = empirical
        .iter()
        .zip(&reference)
        .map(|(e, r)| (e - r).abs())
        .collect();

    let width_ratio = |q: &[f64]| (q[4] - q[0]) / (q[3] - q[1]);
    let ratio_empirical = width_ratio(&empirical);
    let ratio_reference = width_ratio(&reference);
    let ratio_gap = (ratio_empirical - ratio_reference).abs();
    let ratio_band = 4.0 * ratio_std(alpha, &reference, n)?;
    let passed = ratio_gap <= ratio_band;
    Ok(QuantileReport {
        alpha,
        n,
        probs: QUANTILE_PROBS.to_vec(),
        empirical,
        reference,
        gaps,
        ratio_empirical,
        ratio_reference,
        ratio_gap,
        ratio_band,
        passed,
    })
}

/// Linear-interpolation quantile of a sorted slice.
fn sorted_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 < sorted.len() {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[lo]
    }
}

/// Asymptotic standard deviation of the empirical width ratio, by the delta
/// method on the joint quantile CLT. Needs the law's density at the four
/// non-median reference quantiles.
fn ratio_std(alpha: f64, reference: &[f64], n: usize) -> Result<f64> {
    let probs: [f64; 4] = [0.1, 0.25, 0.75, 0.9];
    let quants = [reference[0], reference[1], reference[3], reference[4]];
    let dens: Vec<f64> = quants
        .iter()
        .map(|&q| stable_pdf(alpha, q))
        .collect::<Result<_>>()?;
    if dens.iter().any(|&f| !(f > 0.0 && f.is_finite())) {
        return Err(Error::Numerical(
            "reference density vanished at a quantile".into(),
        ));
    }
    let a = quants[3] - quants[0];
    let b = quants[2] - quants[1];
    let grad = [-1.0 / b, a / (b * b), -a / (b * b), 1.0 / b];
    let mut var = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let (plo, phi) = (probs[i].min(probs[j]), probs[i].max(probs[j]));
            var += grad[i] * grad[j] * plo * (1.0 - phi) / (dens[i] * dens[j]);
        }
    }
    Ok((var / n as f64).sqrt())
}

/// Point beyond which e^{-u^alpha} is below 1e-16.
fn cf_support(alpha: f64) -> f64 {
    36.8f64.powf(1.0 / alpha)
}

/// CDF of the standard SaS law at x: 1/2 + (1/pi) int_0^inf
/// sin(ux) e^{-u^alpha} / u du.
fn stable_cdf(alpha: f64, x: f64) -> Result<f64> {
    if x == 0.0 {
        return Ok(0.5);
    }
    let i = oscillatory_stable_integral(x.abs(), alpha, false)?;
    Ok(0.5 + x.signum() * i / std::f64::consts::PI)
}

/// Density of the standard SaS law at x: (1/pi) int_0^inf
/// cos(ux) e^{-u^alpha} du.
fn stable_pdf(alpha: f64, x: f64) -> Result<f64> {
    let i = oscillatory_stable_integral(x.abs(), alpha, true)?;
    Ok(i / std::f64::consts::PI)
}

/// int_0^inf trig(u ax) e^{-u^alpha} (1/u unless cosine) du for ax >= 0.
///
/// The axis is cut at the trig factor's zeros into half-period panels.
/// Few panels: one adaptive pass over the whole range with the zeros as
/// split hints. Many panels (large ax, small alpha): the panel sums
/// alternate in sign with a smooth envelope, so iterated Aitken
/// extrapolation of the partial sums converges long before the
/// envelope does.
fn oscillatory_stable_integral(ax: f64, alpha: f64, cosine: bool) -> Result<f64> {
    let u_max = cf_support(alpha);
    let f = |u: f64| {
        let envelope = (-u.powf(alpha)).exp();
        if cosine {
            (u * ax).cos() * envelope
        } else if u * ax < 1e-8 {
            // sin(u ax)/u -> ax as u -> 0
            ax * envelope
        } else {
            (u * ax).sin() * envelope / u
        }
    };
    // k-th zero of the trig factor
    let zero = |k: usize| {
        if cosine {
            (k as f64 + 0.5) * std::f64::consts::PI / ax
        } else {
            (k as f64 + 1.0) * std::f64::consts::PI / ax
        }
    };
    let many_panels = ax > 0.0 && zero(160) < u_max;
    if !many_panels {
        let mut hints = Vec::new();
        if ax > 0.0 {
            let mut k = 0;
            while zero(k) < u_max && k < 200 {
                hints.push(zero(k));
                k += 1;
            }
        }
        let opts = QuadOpts {
            rel_tol: 1e-10,
            abs_tol: 1e-13,
            max_evals: 400_000,
        };
        return Ok(adaptive_1d(&mut |u| f(u), 0.0, u_max, &hints, opts).value);
    }

    // panel 0 contains the envelope's sharpest variation; integrate it
    // adaptively, the narrow half-period panels after it with one rule each
    let opts = QuadOpts {
        rel_tol: 1e-10,
        abs_tol: 1e-14,
        max_evals: 50_000,
    };
    let mut partial = Vec::with_capacity(160);
    let mut acc = adaptive_1d(&mut |u| f(u), 0.0, zero(0), &[], opts).value;
    partial.push(acc);
    for k in 0..159 {
        let (v, _) = gk15(&mut |u| f(u), zero(k), zero(k + 1)).ok_or_else(|| {
            Error::Numerical("oscillatory panel produced a non-finite value".into())
        })?;
        acc += v;
        partial.push(acc);
    }
    Ok(accelerate_alternating(&partial[partial.len() - 96..]))
}

/// Iterated Aitken extrapolation of the partial sums of an alternating
/// series. Stops when the stage-to-stage movement stops shrinking.
fn accelerate_alternating(partial: &[f64]) -> f64 {
    let mut cur = partial.to_vec();
    let mut best = *cur.last().unwrap();
    let mut best_move = f64::INFINITY;
    while cur.len() >= 3 {
        let next: Vec<f64> = (0..cur.len() - 2)
            .map(|i| {
                let (a, b, c) = (cur[i], cur[i + 1], cur[i + 2]);
                let denom = c - 2.0 * b + a;
                if denom == 0.0 {
                    c
                } else {
                    c - (c - b) * (c - b) / denom
                }
            })
            .collect();
        let movement = (next.last().unwrap() - cur.last().unwrap()).abs();
        if movement < best_move {
            best_move = movement;
            best = *next.last().unwrap();
        } else if movement > 10.0 * best_move {
            // numerical noise floor reached
            break;
        }
        cur = next;
    }
    best
}

/// Quantile of the standard SaS law by bisection on the inverted CF.
fn stable_quantile(alpha: f64, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Param(format!(
            "probability must lie in (0, 1), got {p}"
        )));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    if p < 0.5 {
        return Ok(-stable_quantile(alpha, 1.0 - p)?);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while stable_cdf(alpha, hi)? < p {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Numerical(format!(
                "quantile bracket for p = {p} did not close"
            )));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if stable_cdf(alpha, mid)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * (1.0 + hi) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{sample_sas, StableParams};
    use approx::assert_relative_eq;

    #[test]
    fn cf_of_zero_samples_is_one() {
        let cf = empirical_cf(&[0.0; 200], &[0.3, 1.0, 7.0]).unwrap();
        for c in cf {
            assert_eq!(c, Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn cf_of_opposite_half_periods_is_minus_one() {
        let u = 2.0;
        let pi = std::f64::consts::PI;
        let cf = empirical_cf(&[pi / u, -pi / u], &[u]).unwrap();
        assert_relative_eq!(cf[0].re, -1.0, epsilon = 1e-15);
        assert_relative_eq!(cf[0].im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn cf_rejects_empty_input() {
        assert!(matches!(
            empirical_cf(&[], &[1.0]).unwrap_err(),
            Error::Param(_)
        ));
    }

    #[test]
    fn cauchy_cf_at_one_matches_closed_form() {
        let s = sample_sas(
            StableParams {
                alpha: 1.0,
                scale: 1.0,
            },
            1_000_000,
            4,
        )
        .unwrap();
        let cf = empirical_cf(&s, &[1.0]).unwrap();
        assert!(((-1.0f64).exp() - cf[0].re).abs() < 4e-3);
        assert!(cf[0].im.abs() < 4e-3);
    }

    #[test]
    fn cf_test_accepts_correctly_specified_samples() {
        let s = sample_sas(
            StableParams {
                alpha: 1.5,
                scale: 1.0,
            },
            100_000,
            5,
        )
        .unwrap();
        let t = cf_test(&s, 1.5, 1.0, &[0.5, 1.0, 2.0], None).unwrap();
        assert!(t.passed, "max gap {} vs band {}", t.max_gap(), t.band);
    }

    #[test]
    fn cf_test_rejects_gaussian_when_testing_small_alpha() {
        // CFs differ by ~0.23 at u=2 (e^{-2^0.8 * 1} hmm, vs e^{-4}); band 4e-5^{-1/2}
        let s = sample_sas(
            StableParams {
                alpha: 2.0,
                scale: 1.0,
            },
            100_000,
            6,
        )
        .unwrap();
        let t = cf_test(&s, 0.8, 1.0, &[0.5, 1.0, 2.0], None).unwrap();
        assert!(!t.passed);
    }

    #[test]
    fn cf_test_is_deterministic() {
        let s = sample_sas(
            StableParams {
                alpha: 1.2,
                scale: 1.0,
            },
            10_000,
            7,
        )
        .unwrap();
        let a = cf_test(&s, 1.2, 1.0, &[0.5, 1.0], None).unwrap();
        let b = cf_test(&s, 1.2, 1.0, &[0.5, 1.0], None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cf_test_distinguishes_nearby_stability_indices() {
        // power requirement: alpha vs alpha + 0.3 at n = 1e5
        let mut rejections = 0;
        let trials = 40;
        for seed in 0..trials {
            let s = sample_sas(
                StableParams {
                    alpha: 1.2,
                    scale: 1.0,
                },
                100_000,
                1000 + seed,
            )
            .unwrap();
            let t = cf_test(&s, 1.5, 1.0, &[0.5, 1.0, 2.0], None).unwrap();
            if !t.passed {
                rejections += 1;
            }
        }
        assert!(
            rejections as f64 >= 0.95 * trials as f64,
            "{rejections}/{trials} rejections"
        );
    }

    #[test]
    fn report_json_shape_is_stable() {
        let s = sample_sas(
            StableParams {
                alpha: 1.5,
                scale: 1.0,
            },
            10_000,
            8,
        )
        .unwrap();
        let t = cf_test(&s, 1.5, 1.0, &[1.0], None).unwrap();
        let r = t.report("cf", serde_json::json!({"alpha": 1.5, "scale": 1.0}));
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        for key in ["test", "params", "n", "band", "max_gap", "passed"] {
            assert!(v.get(key).is_some(), "missing key {key}");
        }
    }

    #[test]
    fn inverted_cauchy_cdf_matches_arctangent() {
        for x in [0.25f64, 1.0, 3.0, 17.0] {
            let want = 0.5 + x.atan() / std::f64::consts::PI;
            let got = stable_cdf(1.0, x).unwrap();
            assert_relative_eq!(got, want, epsilon = 1e-8);
        }
        assert_relative_eq!(stable_quantile(1.0, 0.75).unwrap(), 1.0, epsilon = 1e-7);
        assert_relative_eq!(stable_quantile(1.0, 0.25).unwrap(), -1.0, epsilon = 1e-7);
    }

    #[test]
    fn inverted_gaussian_limit_matches_error_function() {
        // alpha = 2 is N(0, 2); density at 0 is 1/(2 sqrt(pi))
        let f0 = stable_pdf(2.0, 0.0).unwrap();
        assert_relative_eq!(f0, 0.5 / std::f64::consts::PI.sqrt(), epsilon = 1e-10);
        let q = stable_quantile(2.0, 0.75).unwrap();
        assert_relative_eq!(q, 0.9538725524089398, epsilon = 1e-7);
    }

    #[test]
    fn upper_quartile_at_alpha_three_halves_is_pinned() {
        let q = stable_quantile(1.5, 0.75).unwrap();
        assert_relative_eq!(q, 0.9689331817135829, epsilon = 1e-5);
    }

    #[test]
    fn heavy_tail_cdf_is_monotone_and_normalized() {
        // small alpha exercises the accelerated oscillatory path
        let alpha = 0.5;
        let mut prev = 0.0;
        for &x in &[0.1, 1.0, 5.0, 20.0, 100.0, 1000.0] {
            let c = stable_cdf(alpha, x).unwrap();
            assert!(c > prev && c < 1.0, "cdf {c} at {x}");
            prev = c;
        }
        assert!(prev > 0.9);
        // symmetry
        let c = stable_cdf(alpha, 3.0).unwrap();
        let cm = stable_cdf(alpha, -3.0).unwrap();
        assert_relative_eq!(c + cm, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn quantile_check_accepts_cauchy_samples() {
        let s = sample_sas(
            StableParams {
                alpha: 1.0,
                scale: 1.0,
            },
            1_000_000,
            9,
        )
        .unwrap();
        let r = quantile_check(&s, 1.0).unwrap();
        assert!(
            r.passed,
            "ratio gap {} vs band {}",
            r.ratio_gap, r.ratio_band
        );
        // quartiles land on +-1
        assert!(r.gaps[1] < 0.02, "lower quartile gap {}", r.gaps[1]);
        assert!(r.gaps[3] < 0.02, "upper quartile gap {}", r.gaps[3]);
        assert_relative_eq!(r.reference[3], 1.0, epsilon = 1e-6);
        // median of a symmetric law
        assert!(r.empirical[2].abs() < 0.02);
        assert_eq!(r.reference[2], 0.0);
    }

    #[test]
    fn quantile_check_accepts_gaussian_limit_samples() {
        let s = sample_sas(
            StableParams {
                alpha: 2.0,
                scale: 1.0,
            },
            100_000,
            10,
        )
        .unwrap();
        let r = quantile_check(&s, 2.0).unwrap();
        assert!(
            r.passed,
            "ratio gap {} vs band {}",
            r.ratio_gap, r.ratio_band
        );
        assert_relative_eq!(r.reference[3], 0.9538725524089398, epsilon = 1e-6);
        assert!(r.gaps[3] < 0.02);
    }

    #[test]
    fn quantile_check_flags_wrong_index() {
        let s = sample_sas(
            StableParams {
                alpha: 2.0,
                scale: 1.0,
            },
            100_000,
            11,
        )
        .unwrap();
        let r = quantile_check(&s, 0.7).unwrap();
        assert!(!r.passed);
    }

    #[test]
    fn quantile_check_refuses_small_samples() {
        let s = vec![0.5; 100];
        assert!(matches!(
            quantile_check(&s, 1.0).unwrap_err(),
            Error::Refused(_)
        ));
    }
}
