//! C interface to the `nrf` toolkit.
//!
//! Models are exposed as opaque handles loaded from JSON checkpoints. Every
//! fallible function returns an [`NrfStatus`]; on failure the message is
//! kept per thread and can be read with [`nrf_last_error`]. Matrices are
//! dense row-major `f64` buffers owned by the caller.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use nrf::evaluation::roc_auc;
use nrf::models::{Checkpoint, GeneratorNet, PotentialNet};
use nrf::rng::{self, domain};
use nrf::samplers::{sample_model, SamplerConfig};
use nrf::targets::{kl_gaussians, GaussianDist};
use nrf::{Error, Tensor};

/// Result codes returned by every fallible entry point.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NrfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    Io = 4,
    Format = 5,
    Numerical = 6,
    Panic = 7,
}

/// Trained potential network.
pub struct NrfPotential(PotentialNet);

/// Trained auxiliary generator.
pub struct NrfGenerator(GeneratorNet);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> NrfStatus {
    match err {
        Error::ShapeMismatch { .. } => NrfStatus::ShapeMismatch,
        Error::Io(_) => NrfStatus::Io,
        Error::Json(_) | Error::Csv(_) | Error::MissingParam(_) => NrfStatus::Format,
        Error::NonFinite(_) | Error::NotSpd(_) | Error::ChainDiverged { .. } => NrfStatus::Numerical,
        _ => NrfStatus::InvalidArgument,
    }
}

struct Fail(NrfStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(NrfStatus::NullPointer, format!("null pointer: {what}"))
}

fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> NrfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            NrfStatus::Ok
        }
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic".into());
            NrfStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn path<'a>(p: *const c_char) -> Result<&'a Path, Fail> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| Fail(NrfStatus::InvalidArgument, "path is not valid UTF-8".into()))?;
    Ok(Path::new(s))
}

unsafe fn matrix(p: *const f64, rows: usize, cols: usize, what: &str) -> Result<Tensor, Fail> {
    let n = rows.checked_mul(cols).ok_or_else(|| Fail(NrfStatus::InvalidArgument, format!("{what}: size overflow")))?;
    Ok(Tensor::matrix(rows, cols, slice(p, n, what)?.to_vec()))
}

fn write_out(dst: &mut [f64], src: &[f64]) -> Result<(), Fail> {
    if dst.len() != src.len() {
        return Err(Fail(NrfStatus::ShapeMismatch, format!("output holds {} values, need {}", dst.len(), src.len())));
    }
    dst.copy_from_slice(src);
    Ok(())
}

/// Copy the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length in bytes, excluding
/// the terminator; an empty message means the last call succeeded.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn nrf_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Load a potential checkpoint. On success `*out` owns a new handle.
///
/// # Safety
/// `path_utf8` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nrf_potential_load(path_utf8: *const c_char, out: *mut *mut NrfPotential) -> NrfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let net = Checkpoint::load(path(path_utf8)?)?.into_potential()?;
        *out = Box::into_raw(Box::new(NrfPotential(net)));
        Ok(())
    })
}

/// Release a potential handle. Null is ignored.
///
/// # Safety
/// `pot` must come from `nrf_potential_load` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nrf_potential_free(pot: *mut NrfPotential) {
    if !pot.is_null() {
        drop(Box::from_raw(pot));
    }
}

/// Input width, or 0 for a null handle.
///
/// # Safety
/// `pot` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nrf_potential_input_dim(pot: *const NrfPotential) -> usize {
    pot.as_ref().map_or(0, |p| p.0.input_dim())
}

/// Number of output heads (classes), or 0 for a null handle.
///
/// # Safety
/// `pot` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nrf_potential_num_outputs(pot: *const NrfPotential) -> usize {
    pot.as_ref().map_or(0, |p| p.0.num_outputs())
}

/// Marginal potential `u(x)` of each of the `n` rows of `xs` (`n × dim`).
/// Higher means more normal, so this doubles as an anomaly score.
///
/// # Safety
/// `xs` must hold `n * dim` values and `out` must have room for `n`.
#[no_mangle]
pub unsafe extern "C" fn nrf_potential_score(
    pot: *const NrfPotential,
    xs: *const f64,
    n: usize,
    dim: usize,
    out: *mut f64,
) -> NrfStatus {
    guard(|| {
        let pot = pot.as_ref().ok_or_else(|| null("potential"))?;
        let x = matrix(xs, n, dim, "xs")?;
        let u = pot.0.potentials(&x)?;
        write_out(slice_mut(out, n, "out")?, &u)
    })
}

/// Gradient of the marginal potential with respect to each input row,
/// written row-major into `out` (`n × dim`).
///
/// # Safety
/// `xs` and `out` must each hold `n * dim` values.
#[no_mangle]
pub unsafe extern "C" fn nrf_potential_grad_x(
    pot: *const NrfPotential,
    xs: *const f64,
    n: usize,
    dim: usize,
    out: *mut f64,
) -> NrfStatus {
    guard(|| {
        let pot = pot.as_ref().ok_or_else(|| null("potential"))?;
        let x = matrix(xs, n, dim, "xs")?;
        let (_, g) = pot.0.potentials_and_grad_x(&x)?;
        write_out(slice_mut(out, n * dim, "out")?, g.data())
    })
}

/// Load a generator checkpoint. On success `*out` owns a new handle.
///
/// # Safety
/// `path_utf8` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nrf_generator_load(path_utf8: *const c_char, out: *mut *mut NrfGenerator) -> NrfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let net = Checkpoint::load(path(path_utf8)?)?.into_generator()?;
        *out = Box::into_raw(Box::new(NrfGenerator(net)));
        Ok(())
    })
}

/// Release a generator handle. Null is ignored.
///
/// # Safety
/// `gen` must come from `nrf_generator_load` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nrf_generator_free(gen: *mut NrfGenerator) {
    if !gen.is_null() {
        drop(Box::from_raw(gen));
    }
}

/// # Safety
/// `gen` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nrf_generator_latent_dim(gen: *const NrfGenerator) -> usize {
    gen.as_ref().map_or(0, |g| g.0.latent_dim())
}

/// # Safety
/// `gen` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nrf_generator_obs_dim(gen: *const NrfGenerator) -> usize {
    gen.as_ref().map_or(0, |g| g.0.obs_dim())
}

/// Noise-free decode `g(h)` of `n` latent rows into `out` (`n × obs_dim`).
///
/// # Safety
/// `hs` must hold `n * latent_dim` values and `out` `n * obs_dim`.
#[no_mangle]
pub unsafe extern "C" fn nrf_generator_decode(gen: *const NrfGenerator, hs: *const f64, n: usize, out: *mut f64) -> NrfStatus {
    guard(|| {
        let gen = gen.as_ref().ok_or_else(|| null("generator"))?;
        let h = matrix(hs, n, gen.0.latent_dim(), "hs")?;
        let x = gen.0.decode(&h)?;
        write_out(slice_mut(out, n * gen.0.obs_dim(), "out")?, x.data())
    })
}

/// Draw `n` samples: ancestral proposals from the generator followed by
/// `steps` SGLD revision steps of size `delta` (`steps = 0` gives plain
/// generation). Chain `i` uses a random stream derived from `(seed, i)`,
/// so results do not depend on thread count. Writes `n × obs_dim` values.
///
/// # Safety
/// Handles must be live; `out` must hold `n * obs_dim` values.
#[no_mangle]
pub unsafe extern "C" fn nrf_sample(
    pot: *const NrfPotential,
    gen: *const NrfGenerator,
    steps: usize,
    delta: f64,
    n: usize,
    seed: u64,
    out: *mut f64,
) -> NrfStatus {
    guard(|| {
        let pot = pot.as_ref().ok_or_else(|| null("potential"))?;
        let gen = gen.as_ref().ok_or_else(|| null("generator"))?;
        let cfg = SamplerConfig::sgld(steps, delta);
        cfg.validate()?;
        let state = sample_model(&pot.0, &gen.0, &cfg, n, |i| rng::stream(seed, domain::EVAL, i as u64))?;
        write_out(slice_mut(out, n * gen.0.obs_dim(), "out")?, state.x.data())
    })
}

/// `KL(p ‖ q)` between two `dim`-variate Gaussians given by means and
/// row-major covariances.
///
/// # Safety
/// Means must hold `dim` values, covariances `dim * dim`; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nrf_kl_gaussians(
    dim: usize,
    mean_p: *const f64,
    cov_p: *const f64,
    mean_q: *const f64,
    cov_q: *const f64,
    out: *mut f64,
) -> NrfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p = GaussianDist::from_slices(slice(mean_p, dim, "mean_p")?, slice(cov_p, dim * dim, "cov_p")?)?;
        let q = GaussianDist::from_slices(slice(mean_q, dim, "mean_q")?, slice(cov_q, dim * dim, "cov_q")?)?;
        *out = kl_gaussians(&p, &q)?;
        Ok(())
    })
}

/// ROC AUC treating lower scores as anomalous; `is_anomaly[i]` is nonzero
/// for anomalies.
///
/// # Safety
/// `scores` and `is_anomaly` must hold `n` values; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nrf_roc_auc(scores: *const f64, is_anomaly: *const u8, n: usize, out: *mut f64) -> NrfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let labels: Vec<bool> = slice(is_anomaly, n, "is_anomaly")?.iter().map(|&b| b != 0).collect();
        *out = roc_auc(slice(scores, n, "scores")?, &labels)?;
        Ok(())
    })
}
