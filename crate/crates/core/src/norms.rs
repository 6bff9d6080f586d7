//! L^alpha norms of the fundamental solutions (closed forms where they
//! exist, dyadic-refinement quadrature otherwise), the integrability
//! functionals behind the solution theory, and the existence verdicts for
//! the three catalogued equations.
//!
//! Divergent integrals are detected, not special-cased: every quadrature
//! reports its refinement sequence, and a sequence whose successive ratios
//! stay above 1 + delta is flagged as divergent with the sequence kept as
//! evidence.

use crate::error::{Error, Result};
use crate::greens::{convolve_check, poisson_constant, GreenFunction, Operator, TestFunction};
use crate::noise::{GridSpec, LevyMeasureSpec};
use crate::quad::{
    adaptive_1d, adaptive_nd, finish_refinement, gamma_half, ratios_diverge, refine_graded_1d,
    refine_graded_2d, sphere_surface, GradedAxis, QuadOpts, RefinementReport,
};
use serde::{Deserialize, Serialize};
use std::cell::RefCell;
use std::f64::consts::PI;

/// Refinement ratio margin for the divergence test: a sequence is divergent
/// when its last [`DIVERGENCE_RUN`] ratios all exceed 1 + delta.
pub const DIVERGENCE_DELTA: f64 = 0.05;
pub const DIVERGENCE_RUN: usize = 3;

/// Power grading of refinement nodes toward an integrable singularity.
const GRADE: f64 = 3.0;

/// What [`NormResult::value`] measures. Always the raw integral of
/// |rho|^alpha; catalog conventions differ on which power of that integral
/// carries the name "norm" (1/alpha, or 1/(alpha max 1)), so the convention
/// is recorded on the result instead of silently choosing one.
pub const VALUE_CONVENTION: &str = "integral of |rho|^alpha";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Quadrature,
}

/// Outcome of a norm or integrability computation. `value` is
/// +infinity exactly when `diverged`; `refinements`/`ratios` keep the
/// dyadic evidence for quadrature results (empty for closed forms).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormResult {
    pub value: f64,
    pub method: Method,
    pub error_bound: f64,
    pub diverged: bool,
    pub refinements: Vec<f64>,
    pub ratios: Vec<f64>,
    /// See [`VALUE_CONVENTION`].
    pub convention: &'static str,
}

impl NormResult {
    fn closed(value: f64) -> NormResult {
        NormResult {
            value,
            method: Method::ClosedForm,
            error_bound: 0.0,
            diverged: false,
            refinements: Vec::new(),
            ratios: Vec::new(),
            convention: VALUE_CONVENTION,
        }
    }

    fn closed_diverged() -> NormResult {
        NormResult {
            value: f64::INFINITY,
            method: Method::ClosedForm,
            error_bound: 0.0,
            diverged: true,
            refinements: Vec::new(),
            ratios: Vec::new(),
            convention: VALUE_CONVENTION,
        }
    }

    /// Wraps a refinement report. The error bound carries a 4x safety
    /// factor on the extrapolant spread, so "true value within the bound"
    /// holds with margin on clean geometric sequences.
    fn quadrature(report: RefinementReport) -> NormResult {
        let error_bound = if report.diverged {
            f64::INFINITY
        } else {
            (4.0 * report.error_bound).max(1e-12 * report.value.abs())
        };
        NormResult {
            value: report.value,
            method: Method::Quadrature,
            error_bound,
            diverged: report.diverged,
            refinements: report.values,
            ratios: report.ratios,
            convention: VALUE_CONVENTION,
        }
    }
}

/// Which solution notions exist for (equation, dim, alpha).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExistenceVerdict {
    pub equation: Operator,
    pub dim: u32,
    pub alpha: f64,
    pub mild_exists: bool,
    pub generalized_exists: bool,
    pub random_field_exists: bool,
}

/// Existence catalog:
/// heat has a generalized solution always, and a mild solution (equal to
/// the random-field representation) iff alpha < 1 + 2/d; the wave equation
/// has a generalized solution always and mild/random-field iff d <= 2;
/// the Poisson equation never has mild or random-field solutions, and a
/// generalized one iff d > 4 and alpha > d/(d-2).
pub fn existence_verdict(equation: Operator, dim: u32, alpha: f64) -> Result<ExistenceVerdict> {
    if dim == 0 {
        return Err(Error::Param("spatial dimension must be >= 1".into()));
    }
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::Param(format!(
            "stability index must lie in (0, 2), got {alpha}"
        )));
    }
    let d = dim as f64;
    let (mild, gen, rf) = match equation {
        Operator::Heat => {
            let mild = alpha < 1.0 + 2.0 / d;
            (mild, true, mild)
        }
        Operator::Wave => {
            let low = dim <= 2;
            (low, true, low)
        }
        Operator::Poisson => {
            let gen = dim > 4 && alpha > d / (d - 2.0);
            (false, gen, false)
        }
    };
    Ok(ExistenceVerdict {
        equation,
        dim,
        alpha,
        mild_exists: mild,
        generalized_exists: gen,
        random_field_exists: rf,
    })
}

fn check_alpha(alpha: f64, hi_inclusive: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= hi_inclusive) {
        return Err(Error::Param(format!(
            "alpha must lie in (0, {hi_inclusive}], got {alpha}"
        )));
    }
    Ok(())
}

/// Integral of rho_H^alpha over (0, t) x R^d:
/// alpha^{-d/2} (4 pi)^{-d(alpha-1)/2} t^{1-beta} / (1 - beta) with
/// beta = d(alpha-1)/2, finite iff alpha < 1 + 2/d.
pub fn heat_norm_closed(t: f64, alpha: f64, d: u32) -> Result<NormResult> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Param(format!("time must be positive, got {t}")));
    }
    if d == 0 {
        return Err(Error::Param("spatial dimension must be >= 1".into()));
    }
    check_alpha(alpha, 2.0)?;
    let beta = d as f64 * (alpha - 1.0) / 2.0;
    if beta >= 1.0 {
        return Ok(NormResult::closed_diverged());
    }
    let value =
        alpha.powf(-(d as f64) / 2.0) * (4.0 * PI).powf(-beta) * t.powf(1.0 - beta) / (1.0 - beta);
    Ok(NormResult::closed(value))
}

/// Integral of (rho_1^O)^alpha over (0, T) x R: the kernel is 1/2 on the
/// solid cone of area T^2, so the value is T^2 / 2^alpha for every alpha.
pub fn wave1_norm_closed(t_max: f64, alpha: f64) -> Result<NormResult> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::Param(format!("time must be positive, got {t_max}")));
    }
    check_alpha(alpha, 2.0)?;
    Ok(NormResult::closed(t_max * t_max / 2f64.powf(alpha)))
}

/// Integral of (rho_2^O)^alpha over (0, t) x R^2:
/// t^{3-alpha} / ((2 pi)^{alpha-1} (2-alpha)(3-alpha)), finite iff
/// alpha < 2 (the cone edge is an inverse square root).
pub fn wave2_norm_closed(t: f64, alpha: f64) -> Result<NormResult> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Param(format!("time must be positive, got {t}")));
    }
    check_alpha(alpha, 2.0)?;
    if alpha >= 2.0 {
        return Ok(NormResult::closed_diverged());
    }
    let value =
        t.powf(3.0 - alpha) / ((2.0 * PI).powf(alpha - 1.0) * (2.0 - alpha) * (3.0 - alpha));
    Ok(NormResult::closed(value))
}

/// Per-axis interval of p = shift - q as q runs over the domain box.
fn reflected_box(domain: &GridSpec, shift: &[f64]) -> Vec<(f64, f64)> {
    (0..domain.dim())
        .map(|i| {
            let lo = domain.origin[i];
            let hi = domain.origin[i] + domain.extent[i];
            (shift[i] - hi, shift[i] - lo)
        })
        .collect()
}

/// Radius of the largest ball around the origin inside the given box.
fn inscribed_radius(axes: &[(f64, f64)]) -> Result<f64> {
    let r = axes
        .iter()
        .map(|&(lo, hi)| hi.min(-lo))
        .fold(f64::INFINITY, f64::min);
    if r > 0.0 {
        Ok(r)
    } else {
        Err(Error::Param(
            "the kernel's singular axis must lie strictly inside the domain box".into(),
        ))
    }
}

/// int_0^xi x^{d-1} e^{-x^2} dx, saturating to Gamma(d/2)/2 for xi >= 9
/// (the remainder is below 1e-33 there).
fn gaussian_radial_mass(d: u32, xi: f64) -> f64 {
    if xi <= 0.0 {
        return 0.0;
    }
    if xi >= 9.0 {
        return 0.5 * gamma_half(d);
    }
    adaptive_1d(
        &mut |x: f64| x.powi(d as i32 - 1) * (-x * x).exp(),
        0.0,
        xi,
        &[],
        QuadOpts {
            rel_tol: 1e-10,
            abs_tol: 1e-300,
            max_evals: 50_000,
        },
    )
    .value
}

/// Spatial alpha-mass of the heat kernel at time lag tau, truncated to the
/// ball |y| <= r_ball: behaves like tau^{-beta} with a saturating Gaussian
/// factor.
fn heat_alpha_profile(d: u32, alpha: f64, r_ball: f64) -> impl Fn(f64) -> f64 {
    let df = d as f64;
    let beta = df * (alpha - 1.0) / 2.0;
    let pref =
        (4.0 * PI).powf(-df * alpha / 2.0) * (4.0 / alpha).powf(df / 2.0) * sphere_surface(d);
    move |tau: f64| {
        if tau <= 0.0 {
            return 0.0;
        }
        let xi = r_ball / (4.0 * tau / alpha).sqrt();
        pref * tau.powf(-beta) * gaussian_radial_mass(d, xi)
    }
}

/// Spatial alpha-mass of the d = 1 wave kernel at time lag tau over the
/// interval [lo, hi] (the reflected spatial box).
fn wave1_alpha_profile(alpha: f64, lo: f64, hi: f64) -> impl Fn(f64) -> f64 {
    move |tau: f64| {
        if tau <= 0.0 {
            return 0.0;
        }
        let width = (tau.min(hi) - (-tau).max(lo)).max(0.0);
        width / 2f64.powf(alpha)
    }
}

/// Spatial alpha-mass of the d = 2 wave kernel at time lag tau, truncated
/// to |y| <= r_ball; the radial integral has a closed antiderivative.
fn wave2_alpha_profile(alpha: f64, r_ball: f64) -> impl Fn(f64) -> f64 {
    let pref = (2.0 * PI).powf(1.0 - alpha);
    move |tau: f64| {
        if tau <= 0.0 {
            return 0.0;
        }
        let wmax = (r_ball / tau).min(1.0);
        let inner = (1.0 - (1.0 - wmax * wmax).powf(1.0 - alpha / 2.0)) / (2.0 - alpha);
        pref * tau.powf(2.0 - alpha) * inner
    }
}

/// Scalar Poisson kernel value at radius r > 0.
fn poisson_scalar(d: u32, r: f64) -> f64 {
    match d {
        1 => 0.5 * r,
        2 => (1.0 / r).ln() / (2.0 * PI),
        _ => r.powf(2.0 - d as f64) / poisson_constant(d),
    }
}

/// Radial alpha-density of the Poisson kernel: |S^{d-1}| r^{d-1} |rho(r)|^alpha.
fn poisson_alpha_profile(d: u32, alpha: f64) -> impl Fn(f64) -> f64 {
    let surface = sphere_surface(d);
    move |r: f64| {
        if r <= 0.0 {
            return 0.0;
        }
        surface * r.powi(d as i32 - 1) * poisson_scalar(d, r).abs().powf(alpha)
    }
}

/// Time window of the reflected box clipped to the kernel's support.
fn time_window(axis: (f64, f64)) -> (f64, f64) {
    let lo = axis.0.max(0.0);
    (lo, axis.1.max(lo))
}

/// Quadrature of int_domain |rho(shift - q)|^alpha dq by dyadic midpoint
/// refinement in singularity-adapted coordinates, with the ratio test for
/// divergence. The spatial box is truncated to its largest inscribed ball
/// around the kernel axis; the omitted corners are exponentially small for
/// the heat kernel, empty for wave kernels when the ball contains the
/// cone, and never affect a divergence verdict (which lives at the
/// singular locus).
pub fn lalpha_norm_quadrature(
    g: &GreenFunction,
    shift: &[f64],
    alpha: f64,
    domain: &GridSpec,
    levels: usize,
) -> Result<NormResult> {
    check_alpha(alpha, 2.0)?;
    if !g.pointwise() {
        return Err(Error::Unsupported(format!(
            "the wave kernel in d = {} is not pointwise; its L^alpha norm is \
             not a Lebesgue integral",
            g.dim
        )));
    }
    domain.validate()?;
    if shift.len() != g.coord_dim() || domain.dim() != g.coord_dim() {
        return Err(Error::Param(format!(
            "shift and domain must live on the kernel's {}-dimensional \
             coordinate space",
            g.coord_dim()
        )));
    }
    if !shift.iter().all(|x| x.is_finite()) {
        return Err(Error::Param("shift must be finite".into()));
    }
    if !(2..=12).contains(&levels) {
        return Err(Error::Param(format!(
            "refinement levels must lie in 2..=12, got {levels}"
        )));
    }
    let pbox = reflected_box(domain, shift);
    let report = match (g.operator, g.dim) {
        (Operator::Heat, d) => {
            let (tlo, thi) = time_window(pbox[0]);
            let r = inscribed_radius(&pbox[1..])?;
            refine_graded_1d(
                heat_alpha_profile(d, alpha, r),
                GradedAxis::graded_lo(tlo, thi, GRADE),
                8,
                levels,
                DIVERGENCE_DELTA,
                DIVERGENCE_RUN,
            )
        }
        (Operator::Wave, 1) => {
            let (tlo, thi) = time_window(pbox[0]);
            refine_graded_1d(
                wave1_alpha_profile(alpha, pbox[1].0, pbox[1].1),
                GradedAxis::uniform(tlo, thi),
                8,
                levels,
                DIVERGENCE_DELTA,
                DIVERGENCE_RUN,
            )
        }
        (Operator::Wave, _) => {
            if levels > 9 {
                return Err(Error::Param(
                    "refinement levels must lie in 2..=9 for the 2-d wave grid".into(),
                ));
            }
            let (tlo, thi) = time_window(pbox[0]);
            let r = inscribed_radius(&pbox[1..])?;
            let pref = (2.0 * PI).powf(1.0 - alpha);
            // r = tau w; the cone-edge inverse square root lives at w = 1
            refine_graded_2d(
                |tau, w| {
                    if tau <= 0.0 || tau * w > r {
                        return 0.0;
                    }
                    pref * tau.powf(2.0 - alpha) * w * (1.0 - w * w).powf(-alpha / 2.0)
                },
                GradedAxis::uniform(tlo, thi),
                GradedAxis::graded_hi(0.0, 1.0, GRADE),
                (8, 8),
                levels,
                DIVERGENCE_DELTA,
                DIVERGENCE_RUN,
            )
        }
        (Operator::Poisson, d) => {
            let r = inscribed_radius(&pbox)?;
            refine_graded_1d(
                poisson_alpha_profile(d, alpha),
                GradedAxis::graded_lo(0.0, r, GRADE),
                8,
                levels,
                DIVERGENCE_DELTA,
                DIVERGENCE_RUN,
            )
        }
    };
    Ok(NormResult::quadrature(report))
}

/// Convolution tolerance used inside the integrability checks; the outer
/// refinement verdicts only need a few digits per point.
const INNER_CONV_TOL: f64 = 1e-3;

/// Quadrature check that phi * reflected-kernel lies in L^alpha: the heat
/// and wave cases integrate |convolution|^alpha over the (compact) domain
/// box; the Poisson case adds a power-law tail fit on dyadic annuli, since
/// its convolution decays only polynomially.
///
/// For d >= 2 the outer integral is reduced to a radial shell around the
/// bump's spatial center, so the bump must have equal spatial radii.
pub fn h1_check(
    phi: &TestFunction,
    g: &GreenFunction,
    alpha: f64,
    domain: &GridSpec,
    levels: usize,
) -> Result<NormResult> {
    check_alpha(alpha, 2.0)?;
    if !g.pointwise() {
        return Err(Error::Unsupported(format!(
            "the wave kernel in d = {} has no pointwise convolution to check",
            g.dim
        )));
    }
    domain.validate()?;
    if phi.dim() != g.coord_dim() || domain.dim() != g.coord_dim() {
        return Err(Error::Param(format!(
            "test function and domain must live on the kernel's {}-dimensional \
             coordinate space",
            g.coord_dim()
        )));
    }
    if !(1..=6).contains(&levels) {
        return Err(Error::Param(format!(
            "refinement levels must lie in 1..=6, got {levels}"
        )));
    }
    match g.operator {
        Operator::Poisson => h1_poisson(phi, g, alpha, domain, levels),
        _ => h1_evolution(phi, g, alpha, domain, levels),
    }
}

/// Equal-radii check for the radial outer reductions.
fn radial_radius(radii: &[f64]) -> Result<f64> {
    let r0 = radii[0];
    if radii.iter().any(|&r| (r - r0).abs() > 1e-12 * r0) {
        return Err(Error::Param(
            "this check's radial reduction needs equal spatial radii on the \
             test function"
                .into(),
        ));
    }
    Ok(r0)
}

/// Distance from `center` to the nearest face of the domain box over the
/// given axes.
fn box_clearance(domain: &GridSpec, axes: std::ops::Range<usize>, center: &[f64]) -> Result<f64> {
    let mut r = f64::INFINITY;
    for (k, i) in axes.enumerate() {
        let lo = domain.origin[i];
        let hi = lo + domain.extent[i];
        r = r.min((center[k] - lo).min(hi - center[k]));
    }
    if r > 0.0 {
        Ok(r)
    } else {
        Err(Error::Param(
            "the test function's spatial center must lie strictly inside the \
             domain box"
                .into(),
        ))
    }
}

fn h1_evolution(
    phi: &TestFunction,
    g: &GreenFunction,
    alpha: f64,
    domain: &GridSpec,
    levels: usize,
) -> Result<NormResult> {
    let d = g.dim as usize;
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let conv = |point: &[f64]| -> f64 {
        match convolve_check(phi, g, point, Some(INNER_CONV_TOL)) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        }
    };
    let s_axis = GradedAxis::uniform(domain.origin[0], domain.origin[0] + domain.extent[0]);
    let report = if d == 1 {
        let y_axis = GradedAxis::uniform(domain.origin[1], domain.origin[1] + domain.extent[1]);
        refine_graded_2d(
            |s, y| conv(&[s, y]).abs().powf(alpha),
            s_axis,
            y_axis,
            (4, 4),
            levels,
            DIVERGENCE_DELTA,
            DIVERGENCE_RUN,
        )
    } else {
        radial_radius(&phi.radii[1..])?;
        let center = &phi.center[1..];
        let r_max = box_clearance(domain, 1..1 + d, center)?;
        let surface = sphere_surface(g.dim);
        refine_graded_2d(
            |s, r| {
                let mut p = Vec::with_capacity(1 + d);
                p.push(s);
                p.extend_from_slice(center);
                p[1] += r;
                surface * r.powi(d as i32 - 1) * conv(&p).abs().powf(alpha)
            },
            s_axis,
            GradedAxis::uniform(0.0, r_max),
            (4, 4),
            levels,
            DIVERGENCE_DELTA,
            DIVERGENCE_RUN,
        )
    };
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(NormResult::quadrature(report))
}

fn h1_poisson(
    phi: &TestFunction,
    g: &GreenFunction,
    alpha: f64,
    domain: &GridSpec,
    levels: usize,
) -> Result<NormResult> {
    let d = g.dim;
    let bump_radius = radial_radius(&phi.radii)?;
    let surface = sphere_surface(d);
    // spherical mean of the kernel over |omega| = r around a point at
    // radius big is the kernel at max(big, r) (harmonic away from 0), so
    // the radial convolution collapses to one dimension
    let profile = |r: f64| phi.eval(&offset_point(&phi.center, 0, r));
    let conv_radial = |big: f64| -> f64 {
        adaptive_1d(
            &mut |r: f64| {
                surface * r.powi(d as i32 - 1) * profile(r) * poisson_scalar(d, big.max(r))
            },
            0.0,
            bump_radius,
            &[big.min(bump_radius)],
            QuadOpts {
                rel_tol: 1e-9,
                abs_tol: 1e-300,
                max_evals: 100_000,
            },
        )
        .value
    };
    let density = |r: f64| {
        if r <= 0.0 {
            0.0
        } else {
            surface * r.powi(d as i32 - 1) * conv_radial(r).abs().powf(alpha)
        }
    };
    let r_core = box_clearance(domain, 0..d as usize, &phi.center)?;
    if r_core <= bump_radius {
        return Err(Error::Param(
            "the domain box must contain the bump support with room to spare \
             (tail annuli start at the box clearance)"
                .into(),
        ));
    }
    let core = refine_graded_1d(
        density,
        GradedAxis::uniform(0.0, r_core),
        8,
        levels,
        DIVERGENCE_DELTA,
        DIVERGENCE_RUN,
    );
    // dyadic annuli beyond the box: the far field is an exact power law,
    // so the fitted log-slope decides convergence of the tail series
    let n_annuli = levels.max(4) + 2;
    let opts = QuadOpts {
        rel_tol: 1e-8,
        abs_tol: 1e-300,
        max_evals: 100_000,
    };
    let mut annuli = Vec::with_capacity(n_annuli);
    let mut quad_err = core.error_bound;
    for k in 0..n_annuli {
        let lo = r_core * 2f64.powi(k as i32);
        let out = adaptive_1d(&mut |r: f64| density(r), lo, 2.0 * lo, &[], opts);
        quad_err += out.error;
        annuli.push(out.value);
    }
    let mut refinements = vec![core.value];
    for a in &annuli {
        refinements.push(refinements.last().unwrap() + a);
    }
    let ratios: Vec<f64> = refinements.windows(2).map(|w| w[1] / w[0]).collect();
    if annuli.iter().all(|&a| a == 0.0) {
        // zero bump: nothing to fit
        return Ok(NormResult {
            value: core.value,
            method: Method::Quadrature,
            error_bound: 4.0 * core.error_bound,
            diverged: false,
            refinements,
            ratios,
            convention: VALUE_CONVENTION,
        });
    }
    let slopes: Vec<f64> = annuli.windows(2).map(|w| (w[1] / w[0]).log2()).collect();
    let last = &slopes[slopes.len() - 3..];
    let slope = last.iter().sum::<f64>() / 3.0;
    let spread = last.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - last.iter().cloned().fold(f64::INFINITY, f64::min);
    if !slope.is_finite() || spread > 0.2 {
        return Err(Error::Accuracy {
            estimate: *refinements.last().unwrap(),
            error_bound: f64::INFINITY,
            context: format!(
                "tail fit inconclusive: annulus log-slopes {last:?} do not \
                 settle on a power law"
            ),
        });
    }
    // annuli scale like R^{d + q} per doubling with q the |v|^alpha exponent
    let q = slope - d as f64;
    let diverged = q >= -(d as f64);
    if diverged {
        return Ok(NormResult {
            value: f64::INFINITY,
            method: Method::Quadrature,
            error_bound: f64::INFINITY,
            diverged: true,
            refinements,
            ratios,
            convention: VALUE_CONVENTION,
        });
    }
    let ratio = 2f64.powf(slope);
    let tail = annuli.last().unwrap() * ratio / (1.0 - ratio);
    let tail_err = tail * (2f64.powf(spread) - 1.0).max(1e-9);
    Ok(NormResult {
        value: refinements.last().unwrap() + tail,
        method: Method::Quadrature,
        error_bound: 4.0 * quad_err + tail_err,
        diverged: false,
        refinements,
        ratios,
        convention: VALUE_CONVENTION,
    })
}

/// `center` with `delta` added on coordinate `axis`.
fn offset_point(center: &[f64], axis: usize, delta: f64) -> Vec<f64> {
    let mut p = center.to_vec();
    p[axis] += delta;
    p
}

/// The alpha = 1 matching condition
/// int mu_phi(dt) int_S ds |rho(t-s)| [1 + log_+( |rho(t-s)| M / (A(t) B(s)) )]
/// with A(t) = int_S |rho(t-v)| dv, B(s) = (|rho-reflected| * mu_phi)(s),
/// M = int A dmu_phi, and mu_phi(dt) = |phi(t)| dt. Implemented for the
/// d = 1 heat and wave kernels (higher dimensions are certified by the
/// closed arguments, not recomputed); S is truncated to the domain box,
/// which must start at time 0 or later.
pub fn alpha_one_condition(
    phi: &TestFunction,
    g: &GreenFunction,
    domain: &GridSpec,
    levels: usize,
) -> Result<NormResult> {
    let op = g.operator;
    if g.dim != 1 || op == Operator::Poisson {
        return Err(Error::Unsupported(
            "the alpha = 1 condition is computed only for the d = 1 heat and \
             wave kernels"
                .into(),
        ));
    }
    domain.validate()?;
    if phi.dim() != 2 || domain.dim() != 2 {
        return Err(Error::Param(
            "test function and domain must be space-time (2 coordinates)".into(),
        ));
    }
    if domain.origin[0] < 0.0 {
        return Err(Error::Param(
            "the truncated strip must start at time >= 0".into(),
        ));
    }
    if !(1..=4).contains(&levels) {
        return Err(Error::Param(format!(
            "refinement levels must lie in 1..=4, got {levels}"
        )));
    }
    let (s_lo, s_hi) = (domain.origin[0], domain.origin[0] + domain.extent[0]);
    let (y_lo, y_hi) = (domain.origin[1], domain.origin[1] + domain.extent[1]);
    let phi_abs = TestFunction::new(phi.center.clone(), phi.radii.clone(), phi.amplitude.abs())?;
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let light = QuadOpts {
        rel_tol: 1e-6,
        abs_tol: 1e-300,
        max_evals: 100_000,
    };

    // A(t) = kernel mass over the truncated strip below time t0
    let a_of = |t0: f64, x0: f64| -> f64 {
        let lo = (t0 - s_hi).max(0.0);
        let hi = (t0 - s_lo).max(lo);
        if hi <= lo {
            return 0.0;
        }
        match op {
            Operator::Heat => {
                adaptive_1d(
                    &mut |tau: f64| {
                        let w = (4.0 * tau).sqrt();
                        if w == 0.0 {
                            return 1.0;
                        }
                        let zlo = ((y_lo - x0) / w).max(-9.0);
                        let zhi = ((y_hi - x0) / w).min(9.0);
                        if zhi <= zlo {
                            return 0.0;
                        }
                        adaptive_1d(
                            &mut |z: f64| (-z * z).exp() / PI.sqrt(),
                            zlo,
                            zhi,
                            &[],
                            light,
                        )
                        .value
                    },
                    lo,
                    hi,
                    &[],
                    light,
                )
                .value
            }
            _ => {
                adaptive_1d(
                    &mut |tau: f64| 0.5 * ((x0 + tau).min(y_hi) - (x0 - tau).max(y_lo)).max(0.0),
                    lo,
                    hi,
                    &[],
                    light,
                )
                .value
            }
        }
    };

    let m_total = adaptive_nd(
        &|t: &[f64]| phi_abs.eval(t) * a_of(t[0], t[1]),
        &phi.support(),
        &|_, _| Vec::new(),
        QuadOpts {
            rel_tol: 1e-6,
            abs_tol: 1e-300,
            max_evals: 200_000,
        },
    )
    .value;
    if m_total == 0.0 {
        // zero test function: the condition integral is identically zero
        let report = finish_refinement(vec![0.0; levels + 1], DIVERGENCE_DELTA, DIVERGENCE_RUN);
        return Ok(NormResult::quadrature(report));
    }

    let b_of = |point: &[f64]| -> f64 {
        match convolve_check(&phi_abs, g, point, Some(5e-3)) {
            Ok(v) => v.max(1e-300),
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                1e-300
            }
        }
    };
    let inner = QuadOpts {
        rel_tol: 2e-2,
        abs_tol: 1e-12,
        max_evals: 200_000,
    };
    // log_+ part of the inner ds-integral at a fixed outer point t
    let log_part = |t0: f64, x0: f64, a_t: f64| -> f64 {
        let lo = (t0 - s_hi).max(0.0);
        let hi = t0 - s_lo;
        if hi <= lo || a_t <= 0.0 {
            return 0.0;
        }
        match op {
            Operator::Heat => {
                // s = (t0 - tau, x0 + sqrt(4 tau) z); the |rho| weight
                // becomes the Gaussian z-density
                adaptive_nd(
                    &|p: &[f64]| {
                        let (tau, z) = (p[0], p[1]);
                        if tau <= 0.0 {
                            return 0.0;
                        }
                        let kernel = (4.0 * PI * tau).powf(-0.5) * (-z * z).exp();
                        let b = b_of(&[t0 - tau, x0 + (4.0 * tau).sqrt() * z]);
                        let term = (kernel * m_total / (a_t * b)).ln().max(0.0);
                        (-z * z).exp() / PI.sqrt() * term
                    },
                    &[(lo, hi), (-9.0, 9.0)],
                    &|_, _| Vec::new(),
                    inner,
                )
                .value
            }
            _ => {
                adaptive_nd(
                    &|p: &[f64]| {
                        let (tau, w) = (p[0], p[1]);
                        if tau <= 0.0 || (w - x0).abs() > tau || !(y_lo..=y_hi).contains(&w) {
                            return 0.0;
                        }
                        let b = b_of(&[t0 - tau, w]);
                        0.5 * (0.5 * m_total / (a_t * b)).ln().max(0.0)
                    },
                    &[(lo, hi), (x0 - hi, x0 + hi)],
                    &|axis, fixed| {
                        if axis == 1 {
                            vec![x0 - fixed[0], x0 + fixed[0]]
                        } else {
                            Vec::new()
                        }
                    },
                    inner,
                )
                .value
            }
        }
    };

    let supp = phi.support();
    let report = refine_graded_2d(
        |t0, x0| {
            let weight = phi_abs.eval(&[t0, x0]);
            if weight == 0.0 {
                return 0.0;
            }
            let a_t = a_of(t0, x0);
            weight * (a_t + log_part(t0, x0, a_t))
        },
        GradedAxis::uniform(supp[0].0, supp[0].1),
        GradedAxis::uniform(supp[1].0, supp[1].1),
        (2, 2),
        levels,
        DIVERGENCE_DELTA,
        DIVERGENCE_RUN,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(NormResult::quadrature(report))
}

/// Integrand of the membership functional: either a raw callable on the
/// domain, or a catalog kernel shifted to an evaluation point.
pub enum Integrand<'a> {
    Func {
        dim: usize,
        f: &'a dyn Fn(&[f64]) -> f64,
    },
    ShiftedKernel {
        green: &'a GreenFunction,
        shift: &'a [f64],
    },
}

/// Noise measure argument: the standard symmetric alpha-stable measure
/// nu(dz) = |z|^{-alpha-1}/2 dz, or one of the finite jump measures.
pub enum Measure<'a> {
    Stable { alpha: f64 },
    Levy(&'a LevyMeasureSpec),
}

/// Closed z-integral int (|w z|^2 min 1) nu(dz) for the finite measures.
fn square_cap(spec: &LevyMeasureSpec, w: f64) -> f64 {
    let w = w.abs();
    if w == 0.0 {
        return 0.0;
    }
    if w.is_infinite() {
        return spec.total_mass();
    }
    match *spec {
        LevyMeasureSpec::CompoundPoissonUniform { rate, half_width } => {
            if w * half_width <= 1.0 {
                rate * w * w * half_width * half_width / 3.0
            } else {
                rate * (1.0 - 2.0 / (3.0 * w * half_width))
            }
        }
        LevyMeasureSpec::CompoundPoissonTwoPoint { rate, magnitude } => {
            rate * (w * magnitude).powi(2).min(1.0)
        }
        LevyMeasureSpec::TruncatedStable {
            alpha,
            eps,
            r_outer,
        } => {
            let split = (1.0 / w).clamp(eps, r_outer);
            w * w * (split.powf(2.0 - alpha) - eps.powf(2.0 - alpha)) / (2.0 - alpha)
                + (split.powf(-alpha) - r_outer.powf(-alpha)) / alpha
        }
    }
}

/// c_alpha in the stable reduction int (|w z|^2 min 1) nu_alpha(dz) =
/// c_alpha |w|^alpha: split the z-integral at |z| = 1/|w|.
pub fn stable_square_cap_constant(alpha: f64) -> f64 {
    1.0 / (2.0 - alpha) + 1.0 / alpha
}

/// Ratio threshold for the dyadic-shell divergence detector used on
/// shifted stable kernels: the criterion lattice brings panel ratios as
/// close to 1 as 2^{0.05} on the divergent side, so the module-level 1.05
/// margin would misclassify there. Shell panels are closed-form smooth, so
/// their ratios carry no quadrature noise at this scale.
const PANEL_DELTA: f64 = 0.005;

/// Membership functional int_domain int (|f(s) z|^2 min 1) nu(dz) ds.
/// For the stable measure the z-integral reduces to c_alpha |f(s)|^alpha;
/// shifted kernels are then integrated over dyadic time (or radius) shells
/// toward the singularity, with geometric extrapolation of the remainder.
pub fn rajput_rosinski_functional(
    integrand: &Integrand,
    measure: &Measure,
    domain: &GridSpec,
    levels: usize,
) -> Result<NormResult> {
    domain.validate()?;
    if !(2..=10).contains(&levels) {
        return Err(Error::Param(format!(
            "refinement levels must lie in 2..=10, got {levels}"
        )));
    }
    if let Measure::Stable { alpha } = measure {
        if !(*alpha > 0.0 && *alpha < 2.0) {
            return Err(Error::Param(format!(
                "the stable reduction needs alpha strictly inside (0, 2), got {alpha}"
            )));
        }
    }
    if let Measure::Levy(spec) = measure {
        spec.validate()?;
    }
    match integrand {
        Integrand::Func { dim, f } => {
            if *dim != domain.dim() {
                return Err(Error::Param(format!(
                    "integrand dimension {} does not match the {}-dimensional domain",
                    dim,
                    domain.dim()
                )));
            }
            let report = match measure {
                Measure::Stable { alpha } => {
                    let c = stable_square_cap_constant(*alpha);
                    let mut r =
                        refine_grid_nd(&|s: &[f64]| f(s).abs().powf(*alpha), domain, levels)?;
                    for v in &mut r.values {
                        *v *= c;
                    }
                    r.value *= c;
                    r.error_bound *= c;
                    r
                }
                Measure::Levy(spec) => {
                    refine_grid_nd(&|s: &[f64]| square_cap(spec, f(s)), domain, levels)?
                }
            };
            Ok(NormResult::quadrature(report))
        }
        Integrand::ShiftedKernel { green, shift } => {
            if !green.pointwise() {
                return Err(Error::Unsupported(format!(
                    "the wave kernel in d = {} cannot be evaluated pointwise",
                    green.dim
                )));
            }
            if shift.len() != green.coord_dim() || domain.dim() != green.coord_dim() {
                return Err(Error::Param(format!(
                    "shift and domain must live on the kernel's {}-dimensional \
                     coordinate space",
                    green.coord_dim()
                )));
            }
            match measure {
                Measure::Stable { alpha } => {
                    shifted_kernel_stable(green, shift, *alpha, domain, levels)
                }
                Measure::Levy(spec) => {
                    let buf = RefCell::new(vec![0.0; green.coord_dim()]);
                    let report = refine_grid_nd(
                        &|s: &[f64]| {
                            let mut p = buf.borrow_mut();
                            for i in 0..s.len() {
                                p[i] = shift[i] - s[i];
                            }
                            let w = green.eval(&p).expect("kernel arguments pre-validated");
                            square_cap(spec, w)
                        },
                        domain,
                        levels,
                    )?;
                    Ok(NormResult::quadrature(report))
                }
            }
        }
    }
}

/// Stable-measure functional of a shifted kernel: c_alpha times the
/// L^alpha mass, summed over dyadic shells approaching the kernel's
/// singular locus.
fn shifted_kernel_stable(
    g: &GreenFunction,
    shift: &[f64],
    alpha: f64,
    domain: &GridSpec,
    levels: usize,
) -> Result<NormResult> {
    let pbox = reflected_box(domain, shift);
    let (profile, lo, hi): (Box<dyn Fn(f64) -> f64>, f64, f64) = match (g.operator, g.dim) {
        (Operator::Heat, d) => {
            let (tlo, thi) = time_window(pbox[0]);
            let r = inscribed_radius(&pbox[1..])?;
            (Box::new(heat_alpha_profile(d, alpha, r)), tlo, thi)
        }
        (Operator::Wave, 1) => {
            let (tlo, thi) = time_window(pbox[0]);
            (
                Box::new(wave1_alpha_profile(alpha, pbox[1].0, pbox[1].1)),
                tlo,
                thi,
            )
        }
        (Operator::Wave, _) => {
            let (tlo, thi) = time_window(pbox[0]);
            let r = inscribed_radius(&pbox[1..])?;
            (Box::new(wave2_alpha_profile(alpha, r)), tlo, thi)
        }
        (Operator::Poisson, d) => {
            let r = inscribed_radius(&pbox)?;
            (Box::new(poisson_alpha_profile(d, alpha)), 0.0, r)
        }
    };
    let c = stable_square_cap_constant(alpha);
    if hi <= lo {
        let report = finish_refinement(vec![0.0; levels + 1], PANEL_DELTA, DIVERGENCE_RUN);
        return Ok(NormResult::quadrature(report));
    }
    let opts = QuadOpts {
        rel_tol: 1e-8,
        abs_tol: 1e-300,
        max_evals: 100_000,
    };
    let n_panels = levels.max(4) + 4;
    let mut panels = Vec::with_capacity(n_panels);
    let mut quad_err = 0.0;
    let mut truncated = false;
    for k in 0..n_panels {
        let top = hi * 2f64.powi(-(k as i32));
        let bottom = (0.5 * top).max(lo);
        let out = adaptive_1d(&mut |x: f64| c * profile(x), bottom, top, &[], opts);
        quad_err += out.error;
        panels.push(out.value);
        if bottom <= lo {
            truncated = true;
            break;
        }
    }
    let partials: Vec<f64> = panels
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let panel_ratios: Vec<f64> = panels.windows(2).map(|w| w[1] / w[0]).collect();
    if !truncated && ratios_diverge(&panel_ratios, PANEL_DELTA, DIVERGENCE_RUN) {
        return Ok(NormResult {
            value: f64::INFINITY,
            method: Method::Quadrature,
            error_bound: f64::INFINITY,
            diverged: true,
            refinements: partials,
            ratios: panel_ratios,
            convention: VALUE_CONVENTION,
        });
    }
    let mut value = *partials.last().unwrap();
    let mut tail_err = 0.0;
    if !truncated && panels.last().unwrap() > &0.0 {
        // remaining shells continue geometrically
        let n = panel_ratios.len();
        let r = (panels[n] / panels[n - 3]).powf(1.0 / 3.0);
        if r >= 0.999 {
            return Err(Error::Accuracy {
                estimate: value,
                error_bound: f64::INFINITY,
                context: format!(
                    "shell ratios settle at {r:.4}, too close to 1 to classify \
                     the series; deepen the refinement"
                ),
            });
        }
        let tail = panels.last().unwrap() * r / (1.0 - r);
        let spread = panel_ratios[n - 3..]
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
            - panel_ratios[n - 3..]
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
        value += tail;
        tail_err = tail * (spread / (1.0 - r)).max(1e-9);
    }
    Ok(NormResult {
        value,
        method: Method::Quadrature,
        error_bound: 4.0 * quad_err + tail_err,
        diverged: false,
        refinements: partials,
        ratios: panel_ratios,
        convention: VALUE_CONVENTION,
    })
}

/// Midpoint sums on the domain's own grid, dyadically refined per axis.
fn refine_grid_nd(
    f: &dyn Fn(&[f64]) -> f64,
    domain: &GridSpec,
    levels: usize,
) -> Result<RefinementReport> {
    let dim = domain.dim();
    let mut values = Vec::with_capacity(levels + 1);
    for lev in 0..=levels {
        let mut counts = Vec::with_capacity(dim);
        let mut total: u64 = 1;
        for &c in &domain.cells {
            let n = c << lev;
            total = total.saturating_mul(n);
            counts.push(n);
        }
        if total > 1 << 22 {
            return Err(Error::Resource(format!(
                "refinement level {lev} needs {total} grid evaluations; use a \
                 coarser base grid or fewer levels"
            )));
        }
        let cell_vol = domain.volume() / total as f64;
        let mut idx = vec![0u64; dim];
        let mut p = vec![0.0; dim];
        let mut sum = 0.0;
        'cells: loop {
            for i in 0..dim {
                p[i] =
                    domain.origin[i] + domain.extent[i] * (idx[i] as f64 + 0.5) / counts[i] as f64;
            }
            sum += f(&p);
            let mut axis = dim - 1;
            loop {
                idx[axis] += 1;
                if idx[axis] < counts[axis] {
                    break;
                }
                idx[axis] = 0;
                if axis == 0 {
                    break 'cells;
                }
                axis -= 1;
            }
        }
        values.push(sum * cell_vol);
    }
    Ok(finish_refinement(values, DIVERGENCE_DELTA, DIVERGENCE_RUN))
}
