//! C ABI over the core library. Handles are opaque pointers created and
//! released by paired new/free calls; every fallible function returns a
//! status code and leaves a message for `levy_spde_last_error` on failure.
//! The generated header lives in include/levy_spde.h.

use levy_spde::error::Error;
use levy_spde::greens::{GreenFunction, Operator, TestFunction};
use levy_spde::noise::{sample_white_noise, GridSpec, NoiseRealization};
use levy_spde::norms::{existence_verdict, heat_norm_closed};
use levy_spde::solutions::{generalized_pairing, mild_field};
use std::cell::RefCell;
use std::ffi::{c_char, CString};

/// Result of every fallible call. `Ok` is zero; everything else leaves a
/// diagnostic readable through `levy_spde_last_error`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevyStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A parameter is outside its mathematical domain.
    Param = 2,
    /// The request would exceed addressable resources.
    Resource = 3,
    /// A value required to be finite was not.
    Numerical = 4,
    /// The operation is not defined for this configuration.
    Unsupported = 5,
    /// Quadrature could not reach the requested tolerance.
    Accuracy = 6,
    /// The existence verdict for the configuration is negative.
    Refused = 7,
    /// Any other library failure.
    Internal = 8,
}

/// White-noise realization: grid, stability index, seed, increments.
pub struct NoiseHandle {
    inner: NoiseRealization,
}

/// Fundamental solution of one catalog equation.
pub struct GreenHandle {
    inner: GreenFunction,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> LevyStatus {
    match err {
        Error::Param(_) => LevyStatus::Param,
        Error::Resource(_) => LevyStatus::Resource,
        Error::Numerical(_) => LevyStatus::Numerical,
        Error::Unsupported(_) => LevyStatus::Unsupported,
        Error::Accuracy { .. } => LevyStatus::Accuracy,
        Error::Refused(_) => LevyStatus::Refused,
        _ => LevyStatus::Internal,
    }
}

fn fail(err: Error) -> LevyStatus {
    set_error(&err.to_string());
    status_of(&err)
}

fn null_arg(name: &str) -> LevyStatus {
    set_error(&format!("{name} must not be null"));
    LevyStatus::NullPointer
}

fn operator_from(code: u32) -> Result<Operator, LevyStatus> {
    match code {
        0 => Ok(Operator::Heat),
        1 => Ok(Operator::Wave),
        2 => Ok(Operator::Poisson),
        _ => {
            set_error(&format!(
                "operator code must be 0 (heat), 1 (wave), or 2 (poisson), got {code}"
            ));
            Err(LevyStatus::Param)
        }
    }
}

/// Library version as a static NUL-terminated string; never null.
#[no_mangle]
pub extern "C" fn levy_spde_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent failure on the calling thread, as a
/// NUL-terminated string. The pointer stays valid until the next failing
/// call on the same thread; never null, empty before any failure.
#[no_mangle]
pub extern "C" fn levy_spde_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Creates the fundamental solution for an operator code (0 heat, 1 wave,
/// 2 poisson) and spatial dimension.
///
/// # Safety
/// `out` must point to writable storage for one pointer. On `Ok` it
/// receives a handle that must be released with `levy_spde_green_free`.
#[no_mangle]
pub unsafe extern "C" fn levy_spde_green_new(
    operator: u32,
    dim: u32,
    out: *mut *mut GreenHandle,
) -> LevyStatus {
    if out.is_null() {
        return null_arg("out");
    }
    let op = match operator_from(operator) {
        Ok(op) => op,
        Err(s) => return s,
    };
    match GreenFunction::new(op, dim) {
        Ok(g) => {
            *out = Box::into_raw(Box::new(GreenHandle { inner: g }));
            LevyStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Releases a handle from `levy_spde_green_new`; null is a no-op.
///
/// # Safety
/// `g` must be a pointer returned by `levy_spde_green_new` that has not
/// been freed already.
#[no_mangle]
pub unsafe extern "C" fn levy_spde_green_free(g: *mut GreenHandle) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Draws one stable white-noise realization on the grid with axis `i`
/// spanning `[origin[i], origin[i] + extent[i])` split into `cells[i]`
/// cells.
///
/// # Safety
/// `origin`, `extent`, and `cells` must each point to `ndim` readable
/// elements, and `out` to writable storage for one pointer. On `Ok` it
/// receives a handle that must be released with `levy_spde_noise_free`.
#[no_mangle]
pub unsafe extern "C" fn levy_spde_noise_sample(
    alpha: f64,
    origin: *const f64,
    extent: *const f64,
    cells: *const u64,
    ndim: usize,
    seed: u64,
    out: *mut *mut NoiseHandle,
) -> LevyStatus {
    if out.is_null() {
        return null_arg("out");
    }
    if origin.is_null() || extent.is_null() || cells.is_null() {
        return null_arg("origin/extent/cells");
    }
    if ndim == 0 {
        set_error("ndim must be at least 1");
        return LevyStatus::Param;
    }
    let origin = std::slice::from_raw_parts(origin, ndim).to_vec();
    let extent = std::slice::from_raw_parts(extent, ndim).to_vec();
    let cells = std::slice::from_raw_parts(cells, ndim).to_vec();
    let grid = match GridSpec::new(origin, extent, cells) {
        Ok(g) => g,
        Err(e) => return fail(e),
    };
    match sample_white_noise(&grid, alpha, seed) {
        Ok(n) => {
            *out = Box::into_raw(Box::new(NoiseHandle { inner: n }));
            LevyStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Releases a handle from `levy_spde_noise_sample`; null is a no-op.
///
/// # Safety
/// `noise` must be a pointer returned by `levy_spde_noise_sample` that
/// has not been freed already.
#[no_mangle]
pub unsafe extern "C" fn levy_spde_noise_free(noise: *mut NoiseHandle) {
    if !noise.is_null() {
        drop(Box::from_raw(noise));
    }
}

/// Number of cell increments held by the realization.
///
/// # Safety
/// `noise` must be a live handle and `out` writable for one usize.
#[no_mangle]
pub unsafe extern "C" fn levy_spde_noise_len(
    noise: *const NoiseHandle,
    out: *mut usize,
) -> LevyStatus {
    if noise.is_null() {
        return null_arg("noise");
    }
    if out.is_null() {
        return null_arg("out");
    }
    *out = (*noise).inner.increments.len();
    LevyStatus::Ok
}

/// Copies the increments, in row-major cell order, into `buf`.
///
/// # Safety
/// `noise` must be a live handle and `buf` writable for `len` doubles;
/// `len` must equal the value from `levy_spde_noise_len`.
#[no_mangle]
pub unsafe extern "C" fn levy_spde_noise_copy_increments(
    noise: *const NoiseHandle,
    buf: *mut f64,
    len: usize,
) -> LevyStatus {
    if noise.is_null() {
        return null_arg("noise");
    }
    if buf.is_null() {
        return null_arg("buf");
    }
    let inc = &(*noise).inner.increments;
    if len != inc.len() {
        set_error(&format!(
            "buffer holds {len} values but the realization has {}",
            inc.len()
        ));
        return LevyStatus::Param;
    }
    std::slice::from_raw_parts_mut(buf, len).copy_from_slice(inc);
    LevyStatus::Ok
}

/// Which solution notions exist for (operator, dim, alpha).
///
/// # Safety
/// `mild`, `generalized`, and `random_field` must each be writable for
/// one bool.
#[no_mangle]
pub unsafe extern "C" fn levy_spde_existence_verdict(
    operator: u32,
    dim: u32,
    alpha: f64,
    mild: *mut bool,
    generalized: *mut bool,
    random_field: *mut bool,
) -> LevyStatus {
    if mild.is_null() || generalized.is_null() || random_field.is_null() {
        return null_arg("mild/generalized/random_field");
    }
    let op = match operator_from(operator) {
        Ok(op) => op,
        Err(s) => return s,
    };
    match existence_verdict(op, dim, alpha) {
        Ok(v) => {
            *mild = v.mild_exists;
            *generalized = v.generalized_exists;
            *random_field = v.random_field_exists;
            LevyStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Mild-solution value at one space-time point (time first, then space;
/// for the static kernel the point is spatial only). Refuses when the
/// existence verdict for the configuration is negative.
///
/// # Safety
/// `g` and `noise` must be live handles, `point` readable for `len`
/// doubles, and `out` writable for one double.
#[no_mangle]
pub unsafe extern "C" fn levy_spde_mild_value(
    g: *const GreenHandle,
    noise: *const NoiseHandle,
    point: *const f64,
    len: usize,
    out: *mut f64,
) -> LevyStatus {
    if g.is_null() || noise.is_null() {
        return null_arg("g/noise");
    }
    if point.is_null() {
        return null_arg("point");
    }
    if out.is_null() {
        return null_arg("out");
    }
    let p = std::slice::from_raw_parts(point, len).to_vec();
    match mild_field(&(*g).inner, &(*noise).inner, std::slice::from_ref(&p)) {
        Ok(field) => {
            *out = field.values[0];
            LevyStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Pairing of the generalized solution with the bump test function of
/// the given center, per-axis radii, and amplitude. `rel_tol <= 0` uses
/// the library default for the kernel convolution quadrature.
///
/// # Safety
/// `g` and `noise` must be live handles, `center` and `radii` readable
/// for `phi_len` doubles each, and `out` writable for one double.
#[no_mangle]
pub unsafe extern "C" fn levy_spde_generalized_pairing(
    g: *const GreenHandle,
    noise: *const NoiseHandle,
    center: *const f64,
    radii: *const f64,
    phi_len: usize,
    amplitude: f64,
    rel_tol: f64,
    out: *mut f64,
) -> LevyStatus {
    if g.is_null() || noise.is_null() {
        return null_arg("g/noise");
    }
    if center.is_null() || radii.is_null() {
        return null_arg("center/radii");
    }
    if out.is_null() {
        return null_arg("out");
    }
    let center = std::slice::from_raw_parts(center, phi_len).to_vec();
    let radii = std::slice::from_raw_parts(radii, phi_len).to_vec();
    let phi = match TestFunction::new(center, radii, amplitude) {
        Ok(phi) => phi,
        Err(e) => return fail(e),
    };
    let tol = if rel_tol > 0.0 { Some(rel_tol) } else { None };
    match generalized_pairing(&phi, &(*g).inner, &(*noise).inner, tol) {
        Ok(v) => {
            *out = v;
            LevyStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Closed-form L^alpha norm of the heat kernel up to time `t`; sets
/// `diverged` and an infinite value above the integrability threshold.
///
/// # Safety
/// `out_value` and `out_diverged` must each be writable.
#[no_mangle]
pub unsafe extern "C" fn levy_spde_heat_norm_closed(
    t: f64,
    alpha: f64,
    dim: u32,
    out_value: *mut f64,
    out_diverged: *mut bool,
) -> LevyStatus {
    if out_value.is_null() || out_diverged.is_null() {
        return null_arg("out_value/out_diverged");
    }
    match heat_norm_closed(t, alpha, dim) {
        Ok(n) => {
            *out_value = n.value;
            *out_diverged = n.diverged;
            LevyStatus::Ok
        }
        Err(e) => fail(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CStr;
    use std::ptr;

    #[test]
    fn version_is_a_static_c_string() {
        let v = unsafe { CStr::from_ptr(levy_spde_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }

    #[test]
    fn noise_roundtrip_is_deterministic() {
        unsafe {
            let origin = [0.0, -1.0];
            let extent = [1.0, 2.0];
            let cells = [4u64, 8];
            let mut a: *mut NoiseHandle = ptr::null_mut();
            let mut b: *mut NoiseHandle = ptr::null_mut();
            assert_eq!(
                levy_spde_noise_sample(
                    1.5,
                    origin.as_ptr(),
                    extent.as_ptr(),
                    cells.as_ptr(),
                    2,
                    7,
                    &mut a
                ),
                LevyStatus::Ok
            );
            assert_eq!(
                levy_spde_noise_sample(
                    1.5,
                    origin.as_ptr(),
                    extent.as_ptr(),
                    cells.as_ptr(),
                    2,
                    7,
                    &mut b
                ),
                LevyStatus::Ok
            );
            let mut len = 0usize;
            assert_eq!(levy_spde_noise_len(a, &mut len), LevyStatus::Ok);
            assert_eq!(len, 32);
            let mut xa = vec![0.0; len];
            let mut xb = vec![0.0; len];
            assert_eq!(
                levy_spde_noise_copy_increments(a, xa.as_mut_ptr(), len),
                LevyStatus::Ok
            );
            assert_eq!(
                levy_spde_noise_copy_increments(b, xb.as_mut_ptr(), len),
                LevyStatus::Ok
            );
            assert_eq!(xa, xb);
            assert!(xa.iter().any(|&x| x != 0.0));
            levy_spde_noise_free(a);
            levy_spde_noise_free(b);
        }
    }

    #[test]
    fn mild_value_matches_the_library() {
        unsafe {
            let origin = [0.0, -2.0];
            let extent = [1.0, 4.0];
            let cells = [4u64, 8];
            let mut noise: *mut NoiseHandle = ptr::null_mut();
            assert_eq!(
                levy_spde_noise_sample(
                    1.5,
                    origin.as_ptr(),
                    extent.as_ptr(),
                    cells.as_ptr(),
                    2,
                    11,
                    &mut noise
                ),
                LevyStatus::Ok
            );
            let mut g: *mut GreenHandle = ptr::null_mut();
            assert_eq!(levy_spde_green_new(0, 1, &mut g), LevyStatus::Ok);
            let point = [0.6, 0.3];
            let mut value = f64::NAN;
            assert_eq!(
                levy_spde_mild_value(g, noise, point.as_ptr(), 2, &mut value),
                LevyStatus::Ok
            );
            let grid = GridSpec::from_axes(&[(0.0, 1.0, 4), (-2.0, 2.0, 8)]).unwrap();
            let direct = sample_white_noise(&grid, 1.5, 11).unwrap();
            let green = GreenFunction::new(Operator::Heat, 1).unwrap();
            let field = mild_field(&green, &direct, &[vec![0.6, 0.3]]).unwrap();
            assert_eq!(value.to_bits(), field.values[0].to_bits());
            levy_spde_green_free(g);
            levy_spde_noise_free(noise);
        }
    }

    #[test]
    fn pairing_runs_and_verdict_matches() {
        unsafe {
            let origin = [0.0, -2.0];
            let extent = [1.0, 4.0];
            let cells = [4u64, 8];
            let mut noise: *mut NoiseHandle = ptr::null_mut();
            assert_eq!(
                levy_spde_noise_sample(
                    1.2,
                    origin.as_ptr(),
                    extent.as_ptr(),
                    cells.as_ptr(),
                    2,
                    5,
                    &mut noise
                ),
                LevyStatus::Ok
            );
            let mut g: *mut GreenHandle = ptr::null_mut();
            assert_eq!(levy_spde_green_new(1, 1, &mut g), LevyStatus::Ok);
            let center = [0.5, 0.0];
            let radii = [0.25, 1.0];
            let mut v = f64::NAN;
            assert_eq!(
                levy_spde_generalized_pairing(
                    g,
                    noise,
                    center.as_ptr(),
                    radii.as_ptr(),
                    2,
                    1.0,
                    0.0,
                    &mut v
                ),
                LevyStatus::Ok
            );
            assert!(v.is_finite());

            let (mut m, mut ge, mut rf) = (false, false, false);
            assert_eq!(
                levy_spde_existence_verdict(1, 1, 1.2, &mut m, &mut ge, &mut rf),
                LevyStatus::Ok
            );
            assert!(m && ge && rf);
            assert_eq!(
                levy_spde_existence_verdict(2, 3, 1.2, &mut m, &mut ge, &mut rf),
                LevyStatus::Ok
            );
            assert!(!m && !ge && !rf);
            levy_spde_green_free(g);
            levy_spde_noise_free(noise);
        }
    }

    #[test]
    fn failures_set_status_and_message() {
        unsafe {
            let mut out: *mut GreenHandle = ptr::null_mut();
            assert_eq!(levy_spde_green_new(9, 1, &mut out), LevyStatus::Param);
            let msg = CStr::from_ptr(levy_spde_last_error()).to_str().unwrap();
            assert!(msg.contains("operator code"));

            assert_eq!(
                levy_spde_green_new(0, 1, ptr::null_mut()),
                LevyStatus::NullPointer
            );

            // refused configuration: no mild heat solution at alpha 1.8, d 3
            let origin = [0.0, -1.0, -1.0, -1.0];
            let extent = [1.0, 2.0, 2.0, 2.0];
            let cells = [2u64, 2, 2, 2];
            let mut noise: *mut NoiseHandle = ptr::null_mut();
            assert_eq!(
                levy_spde_noise_sample(
                    1.8,
                    origin.as_ptr(),
                    extent.as_ptr(),
                    cells.as_ptr(),
                    4,
                    1,
                    &mut noise
                ),
                LevyStatus::Ok
            );
            let mut g: *mut GreenHandle = ptr::null_mut();
            assert_eq!(levy_spde_green_new(0, 3, &mut g), LevyStatus::Ok);
            let point = [0.5, 0.0, 0.0, 0.0];
            let mut value = 0.0;
            assert_eq!(
                levy_spde_mild_value(g, noise, point.as_ptr(), 4, &mut value),
                LevyStatus::Refused
            );
            let msg = CStr::from_ptr(levy_spde_last_error()).to_str().unwrap();
            assert!(msg.contains("alpha"));
            levy_spde_green_free(g);
            levy_spde_noise_free(noise);

            let mut value = 0.0;
            let mut diverged = false;
            assert_eq!(
                levy_spde_heat_norm_closed(1.0, 1.8, 3, &mut value, &mut diverged),
                LevyStatus::Ok
            );
            assert!(diverged && value.is_infinite());
        }
    }
}
