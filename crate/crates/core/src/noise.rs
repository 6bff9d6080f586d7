//! Symmetric alpha-stable space-time white noise on grids, symmetric
//! compound-Poisson jump noise, and stochastic integrals against both.
//!
//! Reproducibility contract: every sampler is a pure function of its
//! parameters and a 64-bit seed. Draw i comes from its own ChaCha8 stream
//! keyed by (seed, i), so outputs are independent across cells, bit-exact
//! across reruns, and identical whether cells are generated serially or in
//! parallel chunks. Stream 0 is reserved for global draws (the Poisson
//! point count).

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

/// Parameters of a symmetric alpha-stable law with characteristic function
/// exp(-scale^alpha |u|^alpha). alpha = 2 is admitted as the Gaussian limit
/// (characteristic function exp(-scale^2 u^2)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableParams {
    pub alpha: f64,
    pub scale: f64,
}

impl StableParams {
    pub fn new(alpha: f64, scale: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::Param(format!(
                "alpha must lie in (0, 2], got {alpha}"
            )));
        }
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(Error::Param(format!(
                "scale must be finite and >= 0, got {scale}"
            )));
        }
        Ok(StableParams { alpha, scale })
    }
}

/// Axis-aligned box partitioned into a tensor grid of cells. Axis 0 is the
/// slowest-varying index in flat cell order. For evolution equations axis 0
/// is time and the remaining axes are space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: Vec<f64>,
    pub extent: Vec<f64>,
    pub cells: Vec<u64>,
}

/// Hard cap on addressable cells.
pub const MAX_CELLS: u64 = 1 << 31;

impl GridSpec {
    pub fn new(origin: Vec<f64>, extent: Vec<f64>, cells: Vec<u64>) -> Result<Self> {
        let g = GridSpec {
            origin,
            extent,
            cells,
        };
        g.validate()?;
        Ok(g)
    }

    /// Builds a grid from (lo, hi, cells) triples, one per axis.
    pub fn from_axes(axes: &[(f64, f64, u64)]) -> Result<Self> {
        let origin = axes.iter().map(|a| a.0).collect();
        let extent = axes.iter().map(|a| a.1 - a.0).collect();
        let cells = axes.iter().map(|a| a.2).collect();
        GridSpec::new(origin, extent, cells)
    }

    /// Re-checks the grid invariants; needed after deserializing or editing
    /// the public fields directly.
    pub fn validate(&self) -> Result<()> {
        let d = self.origin.len();
        if d == 0 {
            return Err(Error::Param("grid dimension must be >= 1".into()));
        }
        if self.extent.len() != d || self.cells.len() != d {
            return Err(Error::Param(format!(
                "grid field lengths disagree: origin {}, extent {}, cells {}",
                d,
                self.extent.len(),
                self.cells.len()
            )));
        }
        for (i, (&e, &o)) in self.extent.iter().zip(&self.origin).enumerate() {
            if !o.is_finite() || !e.is_finite() || e <= 0.0 {
                return Err(Error::Param(format!(
                    "axis {i}: origin must be finite and extent positive (origin {o}, extent {e})"
                )));
            }
        }
        let mut total: u128 = 1;
        for &c in &self.cells {
            if c == 0 {
                return Err(Error::Param("cell counts must be positive".into()));
            }
            total = total.saturating_mul(c as u128);
        }
        if total > MAX_CELLS as u128 {
            return Err(Error::Resource(format!(
                "grid has {total} cells, more than the 2^31 limit"
            )));
        }
        let v = self.cell_volume();
        if v <= 0.0 || !v.is_finite() {
            return Err(Error::Param(format!(
                "cell volume {v} is outside the representable positive range"
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn cell_count(&self) -> u64 {
        self.cells.iter().product()
    }

    pub fn volume(&self) -> f64 {
        self.extent.iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.extent
            .iter()
            .zip(&self.cells)
            .map(|(e, &c)| e / c as f64)
            .product()
    }

    /// Side length of a cell along `axis`.
    pub fn step(&self, axis: usize) -> f64 {
        self.extent[axis] / self.cells[axis] as f64
    }

    /// Decomposes a flat cell index (axis 0 slowest) into per-axis indices.
    pub fn multi_index(&self, flat: u64, out: &mut [u64]) {
        let mut rem = flat;
        for axis in (0..self.dim()).rev() {
            let n = self.cells[axis];
            out[axis] = rem % n;
            rem /= n;
        }
    }

    /// Writes the midpoint of the cell with flat index `flat` into `out`.
    pub fn midpoint(&self, flat: u64, out: &mut [f64]) {
        let mut rem = flat;
        for axis in (0..self.dim()).rev() {
            let n = self.cells[axis];
            let i = rem % n;
            rem /= n;
            out[axis] = self.origin[axis] + (i as f64 + 0.5) * self.step(axis);
        }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter()
                .enumerate()
                .all(|(i, &x)| x >= self.origin[i] && x <= self.origin[i] + self.extent[i])
    }
}

/// One realization of discretized stable white noise: one independent
/// SaS(v^{1/alpha}) increment per grid cell, v the cell volume.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRealization {
    pub grid: GridSpec,
    pub alpha: f64,
    pub increments: Vec<f64>,
    pub seed: u64,
}

/// Finite symmetric Levy measures available to the jump sampler. Every
/// kind has finite total mass and satisfies nu(-B) = nu(B) by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum LevyMeasureSpec {
    /// rate * Uniform(-a, a): total mass `rate`.
    CompoundPoissonUniform { rate: f64, half_width: f64 },
    /// (rate/2)(delta_a + delta_{-a}): total mass `rate`.
    CompoundPoissonTwoPoint { rate: f64, magnitude: f64 },
    /// |z|^{-alpha-1}/2 dz restricted to eps <= |z| <= r_outer.
    TruncatedStable { alpha: f64, eps: f64, r_outer: f64 },
}

impl LevyMeasureSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LevyMeasureSpec::CompoundPoissonUniform { rate, half_width } => {
                if !(rate > 0.0 && rate.is_finite() && half_width > 0.0 && half_width.is_finite()) {
                    return Err(Error::Param(
                        "uniform jump measure needs rate > 0 and half_width > 0".into(),
                    ));
                }
            }
            LevyMeasureSpec::CompoundPoissonTwoPoint { rate, magnitude } => {
                if !(rate > 0.0 && rate.is_finite() && magnitude > 0.0 && magnitude.is_finite()) {
                    return Err(Error::Param(
                        "two-point jump measure needs rate > 0 and magnitude > 0".into(),
                    ));
                }
            }
            LevyMeasureSpec::TruncatedStable {
                alpha,
                eps,
                r_outer,
            } => {
                if !(alpha > 0.0 && alpha < 2.0) {
                    return Err(Error::Param(format!(
                        "truncated stable measure needs alpha in (0, 2), got {alpha}"
                    )));
                }
                if eps == 0.0 {
                    return Err(Error::Param(
                        "eps = 0 gives an infinite-mass measure; only finite-intensity \
                         measures are simulated"
                            .into(),
                    ));
                }
                if !(eps > 0.0 && r_outer > eps && r_outer.is_finite()) {
                    return Err(Error::Param(
                        "truncated stable measure needs 0 < eps < r_outer < infinity".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Total mass nu(R). Finite for every supported kind.
    pub fn total_mass(&self) -> f64 {
        match *self {
            LevyMeasureSpec::CompoundPoissonUniform { rate, .. } => rate,
            LevyMeasureSpec::CompoundPoissonTwoPoint { rate, .. } => rate,
            // closed antiderivative of |z|^{-alpha-1} over eps <= |z| <= R
            LevyMeasureSpec::TruncatedStable {
                alpha,
                eps,
                r_outer,
            } => (eps.powf(-alpha) - r_outer.powf(-alpha)) / alpha,
        }
    }

    /// Draws one jump from the normalized law nu / nu(R).
    fn sample_jump<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            LevyMeasureSpec::CompoundPoissonUniform { half_width, .. } => {
                (2.0 * open01(rng) - 1.0) * half_width
            }
            LevyMeasureSpec::CompoundPoissonTwoPoint { magnitude, .. } => {
                if open01(rng) < 0.5 {
                    magnitude
                } else {
                    -magnitude
                }
            }
            LevyMeasureSpec::TruncatedStable {
                alpha,
                eps,
                r_outer,
            } => {
                // inverse CDF of the magnitude law on [eps, r_outer]
                let lo = eps.powf(-alpha);
                let hi = r_outer.powf(-alpha);
                let u = open01(rng);
                let mag = (lo - u * (lo - hi)).powf(-1.0 / alpha);
                if open01(rng) < 0.5 {
                    mag
                } else {
                    -mag
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpPoint {
    pub location: Vec<f64>,
    pub jump: f64,
}

/// Explicit point set of a compound-Poisson realization on a box domain.
/// No compensator is materialized: for finite symmetric measures the
/// small-jump drift vanishes, so the raw sum already has the target law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpNoise {
    pub domain: GridSpec,
    pub points: Vec<JumpPoint>,
    pub seed: u64,
    pub measure: LevyMeasureSpec,
}

/// Uniform draw from the open interval (0, 1).
#[inline]
fn open01<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let x: f64 = rng.gen();
        if x > 0.0 {
            return x;
        }
    }
}

/// Per-draw generator keyed by (seed, index). Stream 0 is reserved.
#[inline]
fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index + 1);
    rng
}

/// One standard SaS(1) draw by the Chambers-Mallows-Stuck transform of a
/// uniform angle V and an exponential W.
fn sas_standard<R: Rng>(alpha: f64, rng: &mut R) -> f64 {
    let v = std::f64::consts::PI * (open01(rng) - 0.5);
    let w = -open01(rng).ln();
    if alpha == 2.0 {
        // Gaussian limit: variance 2, characteristic function e^{-u^2}
        2.0 * w.sqrt() * v.sin()
    } else if alpha == 1.0 {
        v.tan()
    } else {
        let av = alpha * v;
        av.sin() / v.cos().powf(1.0 / alpha)
            * (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha)
    }
}

/// n i.i.d. SaS(scale) samples, deterministic in (params, seed).
pub fn sample_sas(params: StableParams, n: usize, seed: u64) -> Result<Vec<f64>> {
    StableParams::new(params.alpha, params.scale)?;
    if n == 0 {
        return Err(Error::Param("sample count must be >= 1".into()));
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = stream_rng(seed, i as u64);
        out.push(params.scale * sas_standard(params.alpha, &mut rng));
    }
    Ok(out)
}

/// Discretized stable white noise: cell i carries an independent
/// SaS(v^{1/alpha}) increment, v the cell volume.
pub fn sample_white_noise(grid: &GridSpec, alpha: f64, seed: u64) -> Result<NoiseRealization> {
    grid.validate()?;
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::Param(format!(
            "alpha must lie in (0, 2], got {alpha}"
        )));
    }
    let n = grid.cell_count();
    let scale = grid.cell_volume().powf(1.0 / alpha);
    let mut increments = Vec::with_capacity(n as usize);
    for i in 0..n {
        let mut rng = stream_rng(seed, i);
        increments.push(scale * sas_standard(alpha, &mut rng));
    }
    Ok(NoiseRealization {
        grid: grid.clone(),
        alpha,
        increments,
        seed,
    })
}

/// Stochastic integral of `f` against a fixed realization:
/// sum over cells of f(midpoint) * increment. Exactly linear in `f`.
pub fn pair_noise<F: Fn(&[f64]) -> f64>(noise: &NoiseRealization, f: F) -> Result<f64> {
    let dim = noise.grid.dim();
    let mut p = vec![0.0; dim];
    let mut acc = 0.0;
    for (i, &xi) in noise.increments.iter().enumerate() {
        noise.grid.midpoint(i as u64, &mut p);
        let v = f(&p);
        if !v.is_finite() {
            return Err(Error::Numerical(format!(
                "integrand is not finite at cell midpoint {p:?}"
            )));
        }
        acc += v * xi;
    }
    Ok(acc)
}

/// Evaluates the integrand at every cell midpoint, in flat cell order.
/// Shared by the solution synthesizers so both sides of an identity use
/// the same discretization.
pub fn midpoint_samples<F: Fn(&[f64]) -> f64>(grid: &GridSpec, f: F) -> Vec<f64> {
    let dim = grid.dim();
    let mut p = vec![0.0; dim];
    let n = grid.cell_count();
    let mut out = Vec::with_capacity(n as usize);
    for i in 0..n {
        grid.midpoint(i, &mut p);
        out.push(f(&p));
    }
    out
}

/// Compound-Poisson realization: Poisson(mass * |box|) points, locations
/// uniform in the box, jumps i.i.d. from the normalized measure.
pub fn sample_jump_noise(
    domain: &GridSpec,
    measure: LevyMeasureSpec,
    seed: u64,
) -> Result<JumpNoise> {
    domain.validate()?;
    measure.validate()?;
    let mean = measure.total_mass() * domain.volume();
    if !mean.is_finite() {
        return Err(Error::Param("poisson mean overflows".into()));
    }
    if mean > 1e8 {
        return Err(Error::Resource(format!(
            "expected point count {mean:.3e} is too large to materialize"
        )));
    }
    let count = if mean < 1e-300 {
        0
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(0);
        rand_distr::Poisson::new(mean)
            .map_err(|e| Error::Param(format!("invalid poisson mean: {e}")))?
            .sample(&mut rng) as u64
    };
    let dim = domain.dim();
    let mut points = Vec::with_capacity(count as usize);
    for i in 0..count {
        let mut rng = stream_rng(seed, i);
        let location = (0..dim)
            .map(|a| domain.origin[a] + open01(&mut rng) * domain.extent[a])
            .collect();
        let jump = measure.sample_jump(&mut rng);
        points.push(JumpPoint { location, jump });
    }
    Ok(JumpNoise {
        domain: domain.clone(),
        points,
        seed,
        measure,
    })
}

/// Integral of `f` against a jump realization: sum of f(location) * jump.
/// No compensator term (symmetric finite measure).
pub fn pair_jump_noise<F: Fn(&[f64]) -> f64>(noise: &JumpNoise, f: F) -> Result<f64> {
    let mut acc = 0.0;
    for pt in &noise.points {
        let v = f(&pt.location);
        if !v.is_finite() {
            return Err(Error::Numerical(format!(
                "integrand is not finite at jump location {:?}",
                pt.location
            )));
        }
        acc += v * pt.jump;
    }
    Ok(acc)
}

/// Binary container layout (all little-endian):
/// u32 dim | dim x f64 origin | dim x f64 extent | dim x u64 cells |
/// f64 alpha | u64 seed | (cell count) x f64 increments.
pub fn write_noise_bin<W: Write>(noise: &NoiseRealization, w: &mut W) -> Result<()> {
    let dim = noise.grid.dim() as u32;
    w.write_all(&dim.to_le_bytes())?;
    for &x in &noise.grid.origin {
        w.write_all(&x.to_le_bytes())?;
    }
    for &x in &noise.grid.extent {
        w.write_all(&x.to_le_bytes())?;
    }
    for &c in &noise.grid.cells {
        w.write_all(&c.to_le_bytes())?;
    }
    w.write_all(&noise.alpha.to_le_bytes())?;
    w.write_all(&noise.seed.to_le_bytes())?;
    for &x in &noise.increments {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut v = Vec::with_capacity(n);
    let mut b = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut b)?;
        v.push(f64::from_le_bytes(b));
    }
    Ok(v)
}

pub fn read_noise_bin<R: Read>(r: &mut R) -> Result<NoiseRealization> {
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let dim = u32::from_le_bytes(b4) as usize;
    if dim == 0 || dim > 64 {
        return Err(Error::Format(format!("implausible dimension {dim}")));
    }
    let origin = read_f64s(r, dim)?;
    let extent = read_f64s(r, dim)?;
    let mut cells = Vec::with_capacity(dim);
    for _ in 0..dim {
        cells.push(read_u64(r)?);
    }
    let alpha = read_f64s(r, 1)?[0];
    let seed = read_u64(r)?;
    let grid = GridSpec::new(origin, extent, cells)?;
    let increments = read_f64s(r, grid.cell_count() as usize)?;
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(Error::Format("trailing bytes after increments".into()));
    }
    Ok(NoiseRealization {
        grid,
        alpha,
        increments,
        seed,
    })
}

/// CSV rows "i0,...,ik,increment", one per cell in flat order.
pub fn write_noise_csv<W: Write>(noise: &NoiseRealization, w: &mut W) -> Result<()> {
    let dim = noise.grid.dim();
    let mut idx = vec![0u64; dim];
    for (i, &x) in noise.increments.iter().enumerate() {
        noise.grid.multi_index(i as u64, &mut idx);
        for k in &idx {
            write!(w, "{k},")?;
        }
        writeln!(w, "{x}")?;
    }
    Ok(())
}
