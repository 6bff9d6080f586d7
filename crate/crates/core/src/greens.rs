//! Fundamental-solution catalog for the heat, wave, and Poisson operators,
//! smooth compactly supported test bumps, and the pointwise convolution
//! (phi * reflected kernel) that the solution theory is built on.
//!
//! Heat and wave kernels live on R_+ x R^d (space-time points are
//! (t, x_1, ..., x_d)); the Poisson kernel lives on R^d. Evaluation is
//! exactly 0 outside the declared support; integrable singular loci (the
//! d = 2 wave cone, the Poisson origin for d >= 2) report +infinity rather
//! than a silent large float. The wave kernel in d >= 3 is catalog metadata
//! only: it is not a pointwise function and evaluating it is an error.

use crate::error::{Error, Result};
use crate::quad::{adaptive_1d, adaptive_nd, gamma_half, sphere_surface, QuadOpts, QuadOutcome};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Operator {
    Heat,
    Wave,
    Poisson,
}

impl std::fmt::Display for Operator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Operator::Heat => "heat",
            Operator::Wave => "wave",
            Operator::Poisson => "poisson",
        })
    }
}

/// A fundamental solution, identified by operator and spatial dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GreenFunction {
    pub operator: Operator,
    pub dim: u32,
}

/// 1/C_d in the d >= 3 Poisson kernel |x|^{2-d}/C_d, with
/// C_d = 2 pi^{d/2} (d-2) / Gamma(d/2).
pub(crate) fn poisson_constant(d: u32) -> f64 {
    2.0 * PI.powf(d as f64 / 2.0) * (d as f64 - 2.0) / gamma_half(d)
}

impl GreenFunction {
    pub fn new(operator: Operator, dim: u32) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Param("spatial dimension must be >= 1".into()));
        }
        Ok(GreenFunction { operator, dim })
    }

    /// False only for the wave kernel with d >= 3, which exists as a
    /// distribution but not as a function; only existence verdicts may
    /// reference it.
    pub fn pointwise(&self) -> bool {
        !(self.operator == Operator::Wave && self.dim >= 3)
    }

    /// Length of an evaluation point: 1 + d for evolution kernels
    /// (leading time coordinate), d for the Poisson kernel.
    pub fn coord_dim(&self) -> usize {
        match self.operator {
            Operator::Heat | Operator::Wave => 1 + self.dim as usize,
            Operator::Poisson => self.dim as usize,
        }
    }

    /// Kernel value at `point`. Returns 0 outside the support and
    /// +infinity exactly on a singular locus.
    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.coord_dim() {
            return Err(Error::Param(format!(
                "{} kernel in d = {} takes {} coordinates, got {}",
                self.operator,
                self.dim,
                self.coord_dim(),
                point.len()
            )));
        }
        if !point.iter().all(|x| x.is_finite()) {
            return Err(Error::Param("evaluation point must be finite".into()));
        }
        if !self.pointwise() {
            return Err(Error::Unsupported(format!(
                "the wave fundamental solution in d = {} is not a pointwise \
                 function (it is a distribution); only existence verdicts may \
                 reference it",
                self.dim
            )));
        }
        let d = self.dim as f64;
        Ok(match self.operator {
            Operator::Heat => {
                let t = point[0];
                if t <= 0.0 {
                    return Ok(0.0);
                }
                let r2: f64 = point[1..].iter().map(|x| x * x).sum();
                (4.0 * PI * t).powf(-d / 2.0) * (-r2 / (4.0 * t)).exp()
            }
            Operator::Wave if self.dim == 1 => {
                let (t, x) = (point[0], point[1]);
                if x.abs() <= t {
                    0.5
                } else {
                    0.0
                }
            }
            Operator::Wave => {
                let t = point[0];
                let r = point[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
                if r < t {
                    0.5 / (PI * (t * t - r * r).sqrt())
                } else if r == t {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            Operator::Poisson => {
                let r = point.iter().map(|x| x * x).sum::<f64>().sqrt();
                match self.dim {
                    1 => 0.5 * r,
                    _ if r == 0.0 => f64::INFINITY,
                    2 => (1.0 / r).ln() / (2.0 * PI),
                    _ => r.powf(2.0 - d) / poisson_constant(self.dim),
                }
            }
        })
    }
}

/// Smooth compactly supported bump: amplitude * exp(-1/(1 - r^2)) inside the
/// ellipsoid r^2 = sum ((x_i - center_i)/radii_i)^2 < 1, exactly 0 outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub center: Vec<f64>,
    pub radii: Vec<f64>,
    pub amplitude: f64,
}

impl TestFunction {
    pub fn new(center: Vec<f64>, radii: Vec<f64>, amplitude: f64) -> Result<Self> {
        if center.is_empty() || center.len() != radii.len() {
            return Err(Error::Param(format!(
                "center and radii must be non-empty and equally long, got {} and {}",
                center.len(),
                radii.len()
            )));
        }
        if !center.iter().all(|c| c.is_finite()) || !amplitude.is_finite() {
            return Err(Error::Param("center and amplitude must be finite".into()));
        }
        if !radii.iter().all(|&r| r > 0.0 && r.is_finite()) {
            return Err(Error::Param("radii must be positive and finite".into()));
        }
        Ok(TestFunction {
            center,
            radii,
            amplitude,
        })
    }

    /// Unit ball bump centered at the origin of R^dim with amplitude 1.
    pub fn unit(dim: usize) -> TestFunction {
        TestFunction {
            center: vec![0.0; dim],
            radii: vec![1.0; dim],
            amplitude: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn eval(&self, point: &[f64]) -> f64 {
        debug_assert_eq!(point.len(), self.dim());
        let mut r2 = 0.0;
        for ((&p, &c), &r) in point.iter().zip(&self.center).zip(&self.radii) {
            let u = (p - c) / r;
            r2 += u * u;
        }
        if r2 < 1.0 {
            self.amplitude * (-1.0 / (1.0 - r2)).exp()
        } else {
            0.0
        }
    }

    /// Bump value from center-relative offsets, rel[i] = q[i] - center[i].
    /// The convolution paths work in these coordinates so that translating
    /// the whole configuration by an exactly representable vector produces
    /// bit-identical quadratures.
    pub(crate) fn eval_rel(&self, rel: &[f64]) -> f64 {
        debug_assert_eq!(rel.len(), self.dim());
        let mut r2 = 0.0;
        for (&v, &r) in rel.iter().zip(&self.radii) {
            let u = v / r;
            r2 += u * u;
        }
        if r2 < 1.0 {
            self.amplitude * (-1.0 / (1.0 - r2)).exp()
        } else {
            0.0
        }
    }

    /// Peak absolute value, attained at the center.
    pub fn sup_norm(&self) -> f64 {
        self.amplitude.abs() * (-1.0f64).exp()
    }

    /// Per-axis support interval (closed).
    pub fn support(&self) -> Vec<(f64, f64)> {
        self.center
            .iter()
            .zip(&self.radii)
            .map(|(&c, &r)| (c - r, c + r))
            .collect()
    }

    /// The concentrating family n^D phi(n(x - shift)) built from this bump:
    /// support shrinks toward `shift` by 1/n while the integral is
    /// preserved.
    pub fn rescale(&self, n: f64, shift: &[f64]) -> Result<TestFunction> {
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Param(format!(
                "scale factor must be positive, got {n}"
            )));
        }
        if shift.len() != self.dim() || !shift.iter().all(|x| x.is_finite()) {
            return Err(Error::Param(format!(
                "shift must be a finite {}-vector",
                self.dim()
            )));
        }
        let center = self
            .center
            .iter()
            .zip(shift)
            .map(|(&c, &t)| t + c / n)
            .collect();
        let radii = self.radii.iter().map(|&r| r / n).collect();
        Ok(TestFunction {
            center,
            radii,
            amplitude: self.amplitude * n.powi(self.dim() as i32),
        })
    }

    /// Integral over R^dim, via the exact reduction to the radial profile:
    /// amplitude * prod(radii) * |S^{D-1}| * int_0^1 r^{D-1} e^{-1/(1-r^2)} dr.
    pub fn mass(&self) -> Result<f64> {
        let d = self.dim() as u32;
        let out = adaptive_1d(
            &mut |r: f64| r.powi(d as i32 - 1) * (-1.0 / (1.0 - r * r)).exp(),
            0.0,
            1.0,
            &[],
            QuadOpts {
                rel_tol: 1e-9,
                abs_tol: 1e-15,
                max_evals: 200_000,
            },
        );
        if !out.converged {
            return Err(Error::Accuracy {
                estimate: out.value,
                error_bound: out.error,
                context: "radial bump profile integral".into(),
            });
        }
        let scale: f64 = self.radii.iter().product::<f64>() * self.amplitude;
        Ok(scale * sphere_surface(d) * out.value)
    }
}

/// Pointwise value of (phi * reflected kernel) at `point`:
/// int rho(q - point) phi(q) dq over the kernel's coordinate space.
/// `rel_tol` defaults to 1e-6. Fails with an accuracy error (carrying the
/// best estimate and its bound) if the quadrature does not converge.
pub fn convolve_check(
    phi: &TestFunction,
    g: &GreenFunction,
    point: &[f64],
    rel_tol: Option<f64>,
) -> Result<f64> {
    let tol = rel_tol.unwrap_or(1e-6);
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::Param(format!(
            "relative tolerance must lie in (0, 1), got {tol}"
        )));
    }
    if !g.pointwise() {
        return Err(Error::Unsupported(format!(
            "cannot convolve against the non-pointwise wave kernel in d = {}",
            g.dim
        )));
    }
    if phi.dim() != g.coord_dim() {
        return Err(Error::Param(format!(
            "test function lives on R^{} but the {} kernel in d = {} convolves \
             over R^{}",
            phi.dim(),
            g.operator,
            g.dim,
            g.coord_dim()
        )));
    }
    if point.len() != g.coord_dim() || !point.iter().all(|x| x.is_finite()) {
        return Err(Error::Param(format!(
            "evaluation point must be a finite {}-vector",
            g.coord_dim()
        )));
    }
    // absolute floor keeps near-zero convolutions convergent
    let volume: f64 = phi.radii.iter().map(|r| 2.0 * r).product();
    let opts = QuadOpts {
        rel_tol: tol,
        abs_tol: (1e-12 * phi.sup_norm() * volume).max(1e-280),
        max_evals: 400_000,
    };
    let out = match (g.operator, g.dim) {
        (Operator::Heat, _) => heat_convolve(phi, g.dim as usize, point, opts),
        (Operator::Wave, 1) => wave1_convolve(phi, point, opts),
        (Operator::Wave, 2) => wave2_convolve(phi, point, opts),
        (Operator::Wave, _) => unreachable!("pointwise() was checked"),
        (Operator::Poisson, 1) => poisson1_convolve(phi, point, opts),
        (Operator::Poisson, 2) => poisson2_convolve(phi, point, opts),
        (Operator::Poisson, 3) => poisson3_convolve(phi, point, opts),
        (Operator::Poisson, _) => poisson_highdim_convolve(g, phi, point, opts),
    };
    if out.converged {
        Ok(out.value)
    } else {
        Err(Error::Accuracy {
            estimate: out.value,
            error_bound: out.error,
            context: format!(
                "convolution against the {} kernel in d = {} did not reach \
                 relative tolerance {tol}",
                g.operator, g.dim
            ),
        })
    }
}

fn zero_outcome() -> QuadOutcome {
    QuadOutcome {
        value: 0.0,
        error: 0.0,
        evals: 0,
        converged: true,
    }
}

/// Spatial offsets from the bump's center to the evaluation point,
/// dx[i] = x[i] - center[spatial i]. All convolution paths reduce their
/// spatial arithmetic to these offsets (and to integration variables
/// relative to x), so translating phi and the point by a common exactly
/// representable vector leaves every float in the quadrature unchanged.
fn center_offsets(phi: &TestFunction, x: &[f64], skip: usize) -> Vec<f64> {
    x.iter()
        .zip(&phi.center[skip..])
        .map(|(&xi, &ci)| xi - ci)
        .collect()
}

/// Heat path in the substituted coordinates y = x + sqrt(4 tau) z:
/// pi^{-d/2} int int e^{-|z|^2} phi(s, x + sqrt(4 tau) z) dz ds over
/// [max(t, s_lo), s_hi] x [-9, 9]^d. The substitution keeps the Gaussian
/// needle resolved as s - t -> 0 (a direct y grid would miss it), and the
/// moving support window of phi in z is handed to the engine as per-axis
/// split hints.
fn heat_convolve(phi: &TestFunction, d: usize, point: &[f64], opts: QuadOpts) -> QuadOutcome {
    let t = point[0];
    let dx = center_offsets(phi, &point[1..], 1);
    let (s_lo, s_hi) = (phi.center[0] - phi.radii[0], phi.center[0] + phi.radii[0]);
    let lo = s_lo.max(t);
    if s_hi <= lo {
        return zero_outcome();
    }
    let mut bounds = vec![(lo, s_hi)];
    bounds.extend(std::iter::repeat_n((-9.0, 9.0), d));
    let norm = PI.powf(-(d as f64) / 2.0);
    let c0 = phi.center[0];
    let buf = std::cell::RefCell::new(vec![0.0; 1 + d]);
    let f = |p: &[f64]| {
        let s = p[0];
        let tau = s - t;
        if tau < 0.0 {
            return 0.0;
        }
        let w = (4.0 * tau).sqrt();
        let mut gauss = norm;
        let mut rel = buf.borrow_mut();
        rel[0] = s - c0;
        for i in 0..d {
            let z = p[1 + i];
            gauss *= (-z * z).exp();
            rel[1 + i] = dx[i] + w * z;
        }
        gauss * phi.eval_rel(&rel)
    };
    let hints = |axis: usize, fixed: &[f64]| -> Vec<f64> {
        if axis == 0 {
            return Vec::new();
        }
        let w2 = 4.0 * (fixed[0] - t);
        if w2 <= 0.0 {
            return Vec::new();
        }
        let w = w2.sqrt();
        let r = phi.radii[axis];
        let i = axis - 1;
        vec![(-dx[i] - r) / w, -dx[i] / w, (-dx[i] + r) / w]
    };
    adaptive_nd(&f, &bounds, &hints, opts)
}

/// d = 1 wave: integrand (1/2) phi on the solid cone |v| <= s - t in the
/// x-relative variable v = y - x. The jump loci are supplied as split
/// hints per axis.
fn wave1_convolve(phi: &TestFunction, point: &[f64], opts: QuadOpts) -> QuadOutcome {
    let t = point[0];
    let dx = point[1] - phi.center[1];
    let (s_lo, s_hi) = (phi.center[0] - phi.radii[0], phi.center[0] + phi.radii[0]);
    let r1 = phi.radii[1];
    let lo = s_lo.max(t);
    if s_hi <= lo {
        return zero_outcome();
    }
    let c0 = phi.center[0];
    let f = |p: &[f64]| {
        let v = p[1];
        if v.abs() <= p[0] - t {
            0.5 * phi.eval_rel(&[p[0] - c0, dx + v])
        } else {
            0.0
        }
    };
    let hints = |axis: usize, fixed: &[f64]| -> Vec<f64> {
        match axis {
            // cone edge crosses the support edges at these times
            0 => vec![t + (dx + r1).abs(), t + (r1 - dx).abs()],
            _ => {
                let tau = fixed[0] - t;
                vec![-tau, tau]
            }
        }
    };
    adaptive_nd(&f, &[(lo, s_hi), (-dx - r1, -dx + r1)], &hints, opts)
}

/// d = 2 wave in polar coordinates around x with r = tau sin(psi): the
/// inverse square root on the cone cancels exactly, leaving the smooth
/// integrand (2 pi)^{-1} tau sin(psi) phi(s, x + tau sin(psi) e(theta)).
fn wave2_convolve(phi: &TestFunction, point: &[f64], opts: QuadOpts) -> QuadOutcome {
    let t = point[0];
    let dx = center_offsets(phi, &point[1..], 1);
    let (s_lo, s_hi) = (phi.center[0] - phi.radii[0], phi.center[0] + phi.radii[0]);
    let lo = s_lo.max(t);
    if s_hi <= lo {
        return zero_outcome();
    }
    let c0 = phi.center[0];
    let f = |p: &[f64]| {
        let (s, psi, theta) = (p[0], p[1], p[2]);
        let tau = s - t;
        if tau <= 0.0 {
            return 0.0;
        }
        let r = tau * psi.sin();
        let rel = [s - c0, dx[0] + r * theta.cos(), dx[1] + r * theta.sin()];
        tau * psi.sin() / (2.0 * PI) * phi.eval_rel(&rel)
    };
    adaptive_nd(
        &f,
        &[(lo, s_hi), (0.0, 0.5 * PI), (0.0, 2.0 * PI)],
        &|_, _| Vec::new(),
        opts,
    )
}

fn poisson1_convolve(phi: &TestFunction, point: &[f64], opts: QuadOpts) -> QuadOutcome {
    let dx = point[0] - phi.center[0];
    let r0 = phi.radii[0];
    let mut f = |v: f64| 0.5 * v.abs() * phi.eval_rel(&[dx + v]);
    adaptive_1d(&mut f, -dx - r0, -dx + r0, &[0.0], opts)
}

/// Largest distance from x to the support of phi, from the center offsets.
fn reach(dx: &[f64], radii: &[f64]) -> f64 {
    let dist2: f64 = dx.iter().map(|&d| d * d).sum();
    let rmax = radii.iter().cloned().fold(0.0, f64::max);
    dist2.sqrt() + rmax
}

/// d = 2 Poisson in polar coordinates around x: r log(1/r) is continuous
/// at r = 0, so no singular handling is needed.
fn poisson2_convolve(phi: &TestFunction, point: &[f64], opts: QuadOpts) -> QuadOutcome {
    let dx = center_offsets(phi, point, 0);
    let f = |p: &[f64]| {
        let (r, theta) = (p[0], p[1]);
        if r <= 0.0 {
            return 0.0;
        }
        let rel = [dx[0] + r * theta.cos(), dx[1] + r * theta.sin()];
        r * (1.0 / r).ln() / (2.0 * PI) * phi.eval_rel(&rel)
    };
    adaptive_nd(
        &f,
        &[(0.0, reach(&dx, &phi.radii)), (0.0, 2.0 * PI)],
        &|_, _| Vec::new(),
        opts,
    )
}

/// d = 3 Poisson in spherical coordinates: r^2 * (4 pi r)^{-1} = r/(4 pi).
fn poisson3_convolve(phi: &TestFunction, point: &[f64], opts: QuadOpts) -> QuadOutcome {
    let dx = center_offsets(phi, point, 0);
    let f = |p: &[f64]| {
        let (r, polar, azimuth) = (p[0], p[1], p[2]);
        let rel = [
            dx[0] + r * polar.sin() * azimuth.cos(),
            dx[1] + r * polar.sin() * azimuth.sin(),
            dx[2] + r * polar.cos(),
        ];
        r / (4.0 * PI) * polar.sin() * phi.eval_rel(&rel)
    };
    adaptive_nd(
        &f,
        &[(0.0, reach(&dx, &phi.radii)), (0.0, PI), (0.0, 2.0 * PI)],
        &|_, _| Vec::new(),
        opts,
    )
}

/// d >= 4 Poisson: direct Cartesian quadrature in v = y - x over the
/// (shifted) support box with the singular point v = 0 hinted on every
/// axis; the |v|^{2-d} singularity is integrable, so bisection with the
/// midpoint fallback converges.
fn poisson_highdim_convolve(
    g: &GreenFunction,
    phi: &TestFunction,
    point: &[f64],
    opts: QuadOpts,
) -> QuadOutcome {
    let inv_c = 1.0 / poisson_constant(g.dim);
    let d = g.dim as f64;
    let dx = center_offsets(phi, point, 0);
    let buf = std::cell::RefCell::new(vec![0.0; point.len()]);
    let f = |v: &[f64]| {
        let r = v.iter().map(|&a| a * a).sum::<f64>().sqrt();
        let mut rel = buf.borrow_mut();
        for i in 0..v.len() {
            rel[i] = dx[i] + v[i];
        }
        r.powf(2.0 - d) * inv_c * phi.eval_rel(&rel)
    };
    let bounds: Vec<(f64, f64)> = dx
        .iter()
        .zip(&phi.radii)
        .map(|(&d_i, &r_i)| (-d_i - r_i, -d_i + r_i))
        .collect();
    let hints = |_: usize, _: &[f64]| vec![0.0];
    adaptive_nd(&f, &bounds, &hints, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn heat(d: u32) -> GreenFunction {
        GreenFunction::new(Operator::Heat, d).unwrap()
    }
    fn wave(d: u32) -> GreenFunction {
        GreenFunction::new(Operator::Wave, d).unwrap()
    }
    fn poisson(d: u32) -> GreenFunction {
        GreenFunction::new(Operator::Poisson, d).unwrap()
    }

    /// Space-time bump used by the convolution reference values.
    fn probe_2d() -> TestFunction {
        TestFunction::new(vec![1.0, 0.0], vec![0.5, 1.0], 1.0).unwrap()
    }

    #[test]
    fn heat_kernel_matches_closed_form_values() {
        let v = heat(2).eval(&[1.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(v, 1.0 / (4.0 * PI), max_relative = 1e-14);
        let v = heat(1).eval(&[0.5, 0.3]).unwrap();
        let want = (4.0 * PI * 0.5f64).powf(-0.5) * (-0.09f64 / 2.0).exp();
        assert_relative_eq!(v, want, max_relative = 1e-14);
    }

    #[test]
    fn heat_kernel_vanishes_at_nonpositive_times() {
        for d in 1..=3 {
            let g = heat(d);
            let mut p = vec![-0.5; 1];
            p.extend(vec![0.3; d as usize]);
            assert_eq!(g.eval(&p).unwrap(), 0.0);
            p[0] = 0.0;
            assert_eq!(g.eval(&p).unwrap(), 0.0);
        }
    }

    #[test]
    fn heat_kernel_has_unit_mass() {
        for d in 1u32..=3 {
            for t in [0.25, 4.0] {
                let g = heat(d);
                let out = adaptive_1d(
                    &mut |r: f64| {
                        let mut p = vec![t, r];
                        p.extend(vec![0.0; d as usize - 1]);
                        r.powi(d as i32 - 1) * g.eval(&p).unwrap()
                    },
                    0.0,
                    20.0 * t.sqrt(),
                    &[],
                    QuadOpts {
                        rel_tol: 1e-9,
                        ..Default::default()
                    },
                );
                let mass = sphere_surface(d) * out.value;
                assert_relative_eq!(mass, 1.0, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn wave_kernel_d1_is_half_inside_the_cone() {
        let g = wave(1);
        assert_eq!(g.eval(&[2.0, 1.5]).unwrap(), 0.5);
        assert_eq!(g.eval(&[2.0, 2.5]).unwrap(), 0.0);
        // the support is closed
        assert_eq!(g.eval(&[2.0, 2.0]).unwrap(), 0.5);
        assert_eq!(g.eval(&[2.0, -2.0]).unwrap(), 0.5);
        assert_eq!(g.eval(&[-1.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn wave_kernel_d2_matches_closed_form_inside_cone() {
        let g = wave(2);
        let v = g.eval(&[2.0, 1.0, 1.0]).unwrap();
        assert_relative_eq!(v, 1.0 / (2.0 * PI * 2.0f64.sqrt()), max_relative = 1e-14);
        // open support: the cone itself is a flagged singular locus
        assert_eq!(g.eval(&[2.0, 2.0, 0.0]).unwrap(), f64::INFINITY);
        assert_eq!(g.eval(&[2.0, 2.1, 0.0]).unwrap(), 0.0);
        assert_eq!(g.eval(&[-2.0, 1.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn wave_kernel_d3_and_above_is_metadata_only() {
        for d in 3u32..=5 {
            let g = wave(d);
            assert!(!g.pointwise());
            let p = vec![1.0; 1 + d as usize];
            assert!(matches!(g.eval(&p).unwrap_err(), Error::Unsupported(_)));
        }
        assert!(wave(2).pointwise());
    }

    #[test]
    fn poisson_kernel_matches_catalog_in_low_dimensions() {
        assert_eq!(poisson(1).eval(&[-3.0]).unwrap(), 1.5);
        assert_eq!(poisson(1).eval(&[0.0]).unwrap(), 0.0);
        let v = poisson(2).eval(&[0.5, 0.0]).unwrap();
        assert_relative_eq!(v, 2.0f64.ln() / (2.0 * PI), max_relative = 1e-14);
        // d = 3 constant reduces to 4 pi, d = 4 to 4 pi^2
        let v = poisson(3).eval(&[2.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(v, 1.0 / (8.0 * PI), max_relative = 1e-13);
        let v = poisson(4).eval(&[2.0, 0.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(v, 1.0 / (16.0 * PI * PI), max_relative = 1e-13);
    }

    #[test]
    fn poisson_origin_is_flagged_singular_for_d_at_least_two() {
        for d in 2u32..=5 {
            let p = vec![0.0; d as usize];
            assert_eq!(poisson(d).eval(&p).unwrap(), f64::INFINITY);
        }
    }

    #[test]
    fn kernel_supports_hold_on_random_points() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        for _ in 0..300 {
            let t: f64 = rng.gen_range(-2.0..2.0);
            let x: f64 = rng.gen_range(-3.0..3.0);
            let y: f64 = rng.gen_range(-3.0..3.0);
            let h = heat(1).eval(&[t, x]).unwrap();
            assert_eq!(h > 0.0, t > 0.0, "heat support at t = {t}");
            let w1 = wave(1).eval(&[t, x]).unwrap();
            assert_eq!(w1 > 0.0, x.abs() <= t, "d=1 cone at ({t}, {x})");
            let w2 = wave(2).eval(&[t, x, y]).unwrap();
            let r = x.hypot(y);
            assert_eq!(w2 > 0.0, r < t, "d=2 cone at ({t}, {x}, {y})");
        }
    }

    #[test]
    fn bump_center_value_and_compact_support() {
        let phi = TestFunction::new(vec![0.5, -1.0], vec![2.0, 1.0], 3.0).unwrap();
        assert_relative_eq!(
            phi.eval(&[0.5, -1.0]),
            3.0 * (-1.0f64).exp(),
            max_relative = 1e-15
        );
        assert_eq!(phi.sup_norm(), 3.0 * (-1.0f64).exp());
        // exactly zero outside, including the boundary
        assert_eq!(phi.eval(&[2.5, -1.0]), 0.0);
        assert_eq!(phi.eval(&[3.0, 5.0]), 0.0);
        // derivative estimate outside the support vanishes identically
        let h = 1e-4;
        let fd = (phi.eval(&[2.6 + h, -1.0]) - phi.eval(&[2.6 - h, -1.0])) / (2.0 * h);
        assert_eq!(fd, 0.0);
    }

    #[test]
    fn bump_mass_matches_reference_in_low_dimensions() {
        let want = [0.4439938161680794, 0.46651239317833, 0.4410888872766044];
        for (d, w) in want.iter().enumerate() {
            let m = TestFunction::unit(d + 1).mass().unwrap();
            assert_relative_eq!(m, *w, max_relative = 1e-7);
        }
        // mass scales by amplitude times the product of radii
        let phi = TestFunction::new(vec![3.0, -1.0], vec![2.0, 0.5], 5.0).unwrap();
        assert_relative_eq!(
            phi.mass().unwrap(),
            5.0 * 2.0 * 0.5 * 0.46651239317833,
            max_relative = 1e-7
        );
    }

    #[test]
    fn rescaled_bump_reproduces_concentrating_family() {
        let phi = TestFunction::new(vec![0.2, -0.1], vec![1.0, 2.0], 1.5).unwrap();
        let n = 4.0;
        let shift = [1.0, 2.0];
        let scaled = phi.rescale(n, &shift).unwrap();
        for p in [[1.1, 1.9], [1.0, 2.0], [0.9, 2.3], [5.0, 5.0]] {
            let moved = [n * (p[0] - shift[0]), n * (p[1] - shift[1])];
            assert_relative_eq!(
                scaled.eval(&p),
                n.powi(2) * phi.eval(&moved),
                max_relative = 1e-12,
                epsilon = 1e-300
            );
        }
        // the rescaling preserves the integral
        assert_relative_eq!(
            scaled.mass().unwrap(),
            phi.mass().unwrap(),
            max_relative = 1e-9
        );
    }

    #[test]
    fn convolution_vanishes_when_supports_disjoint() {
        let phi = probe_2d();
        // evaluation time after the bump's time support: backward cone is empty
        let v = convolve_check(&phi, &heat(1), &[2.0, 0.0], None).unwrap();
        assert_eq!(v, 0.0);
        // cone from (0, 9) cannot reach the bump within its time support
        let v = convolve_check(&phi, &wave(1), &[0.0, 9.0], None).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn heat_convolution_matches_reference_value() {
        let v = convolve_check(&probe_2d(), &heat(1), &[0.25, 0.2], Some(1e-8)).unwrap();
        assert_relative_eq!(v, 0.07338931342714773, max_relative = 1e-7);
    }

    #[test]
    fn wave_convolutions_match_reference_values() {
        let v = convolve_check(&probe_2d(), &wave(1), &[0.25, 0.2], Some(1e-7)).unwrap();
        assert_relative_eq!(v, 0.10519765988658111, max_relative = 1e-5);
        let phi = TestFunction::new(vec![1.0, 0.0, 0.0], vec![0.5, 1.0, 1.0], 1.0).unwrap();
        let v = convolve_check(&phi, &wave(2), &[0.25, 0.2, -0.1], Some(1e-7)).unwrap();
        assert_relative_eq!(v, 0.06218281313839636, max_relative = 1e-5);
    }

    #[test]
    fn poisson_convolutions_match_reference_values() {
        let phi = TestFunction::new(vec![0.3, 0.0], vec![1.0, 1.0], 1.0).unwrap();
        let v = convolve_check(&phi, &poisson(2), &[0.1, 0.1], Some(1e-8)).unwrap();
        assert_relative_eq!(v, 0.05993637761486877, max_relative = 1e-6);
        let phi = TestFunction::new(vec![0.3, 0.0, 0.0], vec![1.0, 1.0, 1.0], 1.0).unwrap();
        let v = convolve_check(&phi, &poisson(3), &[0.1, 0.1, 0.0], Some(1e-7)).unwrap();
        assert_relative_eq!(v, 0.07122862902056137, max_relative = 1e-5);
    }

    #[test]
    fn heat_convolution_obeys_gaussian_tail_bound() {
        // supp phi in [0, T] x B(0, 1) with T = 2; bound at t = 0:
        // sup|phi| * T * exp(-|x|^2 / (8T))
        let t_max = 2.0;
        for d in [1usize, 2] {
            let mut center = vec![1.0];
            center.extend(vec![0.0; d]);
            let mut radii = vec![1.0];
            radii.extend(vec![1.0 / (d as f64).sqrt(); d]);
            let phi = TestFunction::new(center, radii, 1.0).unwrap();
            for far in [4.0, 6.0] {
                let mut p = vec![0.0, far];
                p.extend(vec![0.0; d - 1]);
                let v = convolve_check(&phi, &heat(d as u32), &p, None).unwrap();
                let bound = phi.sup_norm() * t_max * (-far * far / (8.0 * t_max)).exp();
                assert!(
                    v.abs() <= bound,
                    "d = {d}, |x| = {far}: {v} exceeds {bound}"
                );
                assert!(v > 0.0);
            }
        }
    }

    #[test]
    fn poisson_exterior_convolution_is_affine() {
        let phi = TestFunction::unit(1);
        let mass = phi.mass().unwrap();
        let g = poisson(1);
        // left of the support: value is -(x * mass - first moment)/2,
        // and the first moment vanishes by symmetry
        for x in [-3.0, -1.5] {
            let v = convolve_check(&phi, &g, &[x], Some(1e-9)).unwrap();
            assert_relative_eq!(v, -0.5 * x * mass, max_relative = 1e-6);
        }
        // affine on either side: second differences vanish
        for base in [-3.0, 2.5] {
            let h = 0.25;
            let f = |x: f64| convolve_check(&phi, &g, &[x], Some(1e-9)).unwrap();
            let second = f(base + h) - 2.0 * f(base) + f(base - h);
            assert!(second.abs() < 1e-7, "second difference {second} at {base}");
        }
    }

    #[test]
    fn heat_convolution_is_smooth_in_space() {
        let phi = probe_2d();
        let g = heat(1);
        let slope = |h: f64| {
            let a = convolve_check(&phi, &g, &[0.25, 0.5 + h], Some(1e-9)).unwrap();
            let b = convolve_check(&phi, &g, &[0.25, 0.5 - h], Some(1e-9)).unwrap();
            (a - b) / (2.0 * h)
        };
        let coarse = slope(0.02);
        let fine = slope(0.01);
        assert_relative_eq!(coarse, fine, max_relative = 0.05);
        assert!(fine.abs() > 1e-4, "derivative should be visible here");
    }

    #[test]
    fn descriptors_round_trip_through_json() {
        let g = wave(2);
        let s = serde_json::to_string(&g).unwrap();
        assert!(s.contains("\"wave\""));
        assert_eq!(serde_json::from_str::<GreenFunction>(&s).unwrap(), g);
        let phi = TestFunction::new(vec![1.0, 2.0], vec![0.5, 0.25], -3.0).unwrap();
        let s = serde_json::to_string(&phi).unwrap();
        let back: TestFunction = serde_json::from_str(&s).unwrap();
        assert_eq!(back, phi);
    }

    #[test]
    fn convolution_rejects_bad_configurations() {
        let phi = probe_2d();
        assert!(matches!(
            convolve_check(&phi, &wave(3), &[0.0; 4], None).unwrap_err(),
            Error::Unsupported(_)
        ));
        assert!(matches!(
            convolve_check(&phi, &heat(2), &[0.0; 3], None).unwrap_err(),
            Error::Param(_)
        ));
        assert!(matches!(
            convolve_check(&phi, &heat(1), &[f64::NAN, 0.0], None).unwrap_err(),
            Error::Param(_)
        ));
    }

    proptest! {
        #[test]
        fn bump_values_bounded_and_supported(
            x in -3.0f64..3.0, y in -3.0f64..3.0,
            cx in -1.0f64..1.0, cy in -1.0f64..1.0,
            rx in 0.2f64..2.0, ry in 0.2f64..2.0,
        ) {
            let phi = TestFunction::new(vec![cx, cy], vec![rx, ry], 2.0).unwrap();
            let v = phi.eval(&[x, y]);
            prop_assert!(v >= 0.0 && v <= phi.sup_norm() + 1e-15);
            let u = ((x - cx)/rx).powi(2) + ((y - cy)/ry).powi(2);
            if u >= 1.0 {
                prop_assert_eq!(v, 0.0);
            }
        }
    }
}
