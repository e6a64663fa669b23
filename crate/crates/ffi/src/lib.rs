//! C ABI over the imagnoise engines.
//!
//! Conventions:
//! - every fallible call returns an [`ImnStatus`]; on failure a message is
//!   available from [`imn_last_error`] on the same thread
//! - objects are opaque handles created by `*_new`/engine calls and released
//!   with the matching `*_free`; freeing NULL is a no-op
//! - array outputs take a buffer and its capacity, always report the needed
//!   length through `out_len`, and return `IMN_STATUS_BUFFER_TOO_SMALL` when
//!   the capacity is short (nothing is written in that case)

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use imagnoise::distributional::{appendix_c_comb, mc_cauchy};
use imagnoise::genfunc::{closed_pure_death, closed_triplet_equal, closed_triplet_two_beta, Polynomial};
use imagnoise::moments::{solve_closed, solve_truncated, FactorialMoments};
use imagnoise::reaction::{
    build_generator, master_evolve, sample_initial, ssa_ensemble, CountDistribution, InitialKind, ReactionChannel,
    ReactionSpec,
};
use imagnoise::sde::{
    expected_reciprocal, fixed, modulus_bounds, simulate_reciprocal_exact, simulate_tamed_em, ComplexEnsemble,
    SdeConfig,
};
use imagnoise::Error;
use num_complex::Complex64;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Truncation = 4,
    Integration = 5,
    InsufficientEnsemble = 6,
    Proximity = 7,
    Divergence = 8,
    Range = 9,
    Resolution = 10,
    Alignment = 11,
    BufferTooSmall = 12,
    Panic = 13,
}

fn status_of(e: &Error) -> ImnStatus {
    match e {
        Error::InvalidChannel(_)
        | Error::InvalidSpec(_)
        | Error::InvalidDistribution(_)
        | Error::InvalidArgument(_) => ImnStatus::InvalidArgument,
        Error::Domain(_) => ImnStatus::Domain,
        Error::InvalidTruncation { .. } | Error::TruncationOverflow { .. } => ImnStatus::Truncation,
        Error::StepSize(_) | Error::Integration(_) => ImnStatus::Integration,
        Error::EmptyEnsemble { .. } | Error::InsufficientEnsemble { .. } => ImnStatus::InsufficientEnsemble,
        Error::Proximity { .. } => ImnStatus::Proximity,
        Error::Divergence { .. } => ImnStatus::Divergence,
        Error::Range { .. } => ImnStatus::Range,
        Error::Resolution { .. } => ImnStatus::Resolution,
        Error::Alignment(_) => ImnStatus::Alignment,
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(ImnStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(ImnStatus::NullPointer, format!("{what} is NULL"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(ImnStatus::InvalidArgument, msg.into())
}

/// Runs `f`, converting errors and panics into a status plus message.
fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> ImnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ImnStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            ImnStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out<T>(p: *mut T, v: T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(v);
    Ok(())
}

unsafe fn write_array(src: &[f64], buf: *mut f64, cap: usize, out_len: *mut usize) -> Result<(), Failure> {
    write_out(out_len, src.len(), "out_len")?;
    if cap < src.len() {
        return Err(Failure(
            ImnStatus::BufferTooSmall,
            format!("buffer holds {cap} values, {} needed", src.len()),
        ));
    }
    if !src.is_empty() {
        if buf.is_null() {
            return Err(null("buf"));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    }
    Ok(())
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn emit<T>(out: *mut *mut T, v: T) -> Result<(), Failure> {
    write_out(out, Box::into_raw(Box::new(v)), "out")
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn imn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn imn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImnComplex {
    pub re: f64,
    pub im: f64,
}

impl From<ImnComplex> for Complex64 {
    fn from(z: ImnComplex) -> Self {
        Complex64::new(z.re, z.im)
    }
}

impl From<Complex64> for ImnComplex {
    fn from(z: Complex64) -> Self {
        ImnComplex { re: z.re, im: z.im }
    }
}

/// Channel `j A -> l A` with rate constant `rate`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImnChannel {
    pub j: u32,
    pub l: u32,
    pub rate: f64,
}

/// Opaque reaction specification.
pub struct ImnSpec(ReactionSpec);

/// Opaque probability distribution over counts `0..=n_max`.
pub struct ImnDistribution(CountDistribution);

/// Opaque ensemble of complex SDE endpoints.
pub struct ImnEnsemble(ComplexEnsemble);

/// # Safety
/// `channels` must point to `n` readable entries; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn imn_spec_new(channels: *const ImnChannel, n: usize, out: *mut *mut ImnSpec) -> ImnStatus {
    guard(|| {
        let cs = slice(channels, n, "channels")?
            .iter()
            .map(|c| ReactionChannel::new(c.j, c.l, c.rate))
            .collect::<Result<Vec<_>, _>>()?;
        emit(out, ImnSpec(ReactionSpec::new(cs)?))
    })
}

/// # Safety
/// `spec` must be NULL or a handle from [`imn_spec_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn imn_spec_free(spec: *mut ImnSpec) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn imn_distribution_point_mass(
    n0: usize,
    n_max: usize,
    out: *mut *mut ImnDistribution,
) -> ImnStatus {
    guard(|| emit(out, ImnDistribution(CountDistribution::point_mass(n0, n_max)?)))
}

/// Poisson(`mu`) truncated to `0..=n_max`; fails if the discarded tail exceeds `tail_tol`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn imn_distribution_poisson(
    mu: f64,
    n_max: usize,
    tail_tol: f64,
    out: *mut *mut ImnDistribution,
) -> ImnStatus {
    guard(|| {
        emit(
            out,
            ImnDistribution(sample_initial(InitialKind::TruncatedPoisson(mu), n_max, tail_tol)?),
        )
    })
}

/// # Safety
/// `probs` must point to `len` readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn imn_distribution_from_probs(
    probs: *const f64,
    len: usize,
    out: *mut *mut ImnDistribution,
) -> ImnStatus {
    guard(|| {
        let p = slice(probs, len, "probs")?.to_vec();
        emit(out, ImnDistribution(CountDistribution::new(p, 0.0)?))
    })
}

/// Copies `P_0..P_n_max` (negative round-off clipped to 0).
///
/// # Safety
/// `dist` must be a live handle; `buf` must hold `cap` values; `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn imn_distribution_probs(
    dist: *const ImnDistribution,
    buf: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> ImnStatus {
    guard(|| write_array(&handle(dist, "dist")?.0.exported_probs(), buf, cap, out_len))
}

/// Time stamp of the distribution, or NaN for NULL.
///
/// # Safety
/// `dist` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn imn_distribution_time(dist: *const ImnDistribution) -> f64 {
    dist.as_ref().map_or(f64::NAN, |d| d.0.time())
}

/// # Safety
/// `dist` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn imn_distribution_free(dist: *mut ImnDistribution) {
    if !dist.is_null() {
        drop(Box::from_raw(dist));
    }
}

/// Evolves `p0` under the master equation truncated at `n_max` to `t_end`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn imn_master_evolve(
    spec: *const ImnSpec,
    p0: *const ImnDistribution,
    n_max: usize,
    t_end: f64,
    tol: f64,
    out: *mut *mut ImnDistribution,
) -> ImnStatus {
    guard(|| {
        let spec = &handle(spec, "spec")?.0;
        let p0 = &handle(p0, "p0")?.0;
        let gen = build_generator(spec, n_max)?;
        let start = if p0.n_max() < n_max {
            p0.padded(n_max)
        } else {
            p0.clone()
        };
        emit(out, ImnDistribution(master_evolve(&gen, &start, t_end, tol)?))
    })
}

/// Empirical distribution of `n_paths` exact simulations at `t_end`.
/// Per-bin standard errors go to `stderr_buf` when it is not NULL.
///
/// # Safety
/// Handles must be live; `out` must be writable; `stderr_buf`, if given, must hold `stderr_cap` values.
#[no_mangle]
pub unsafe extern "C" fn imn_ssa(
    spec: *const ImnSpec,
    p0: *const ImnDistribution,
    t_end: f64,
    n_paths: usize,
    seed: u64,
    out: *mut *mut ImnDistribution,
    stderr_buf: *mut f64,
    stderr_cap: usize,
    stderr_len: *mut usize,
) -> ImnStatus {
    guard(|| {
        let spec = &handle(spec, "spec")?.0;
        let p0 = &handle(p0, "p0")?.0;
        let emp = ssa_ensemble(spec, p0, t_end, n_paths, seed)?;
        if !stderr_buf.is_null() {
            write_array(&emp.stderr, stderr_buf, stderr_cap, stderr_len)?;
        }
        emit(out, ImnDistribution(emp.dist))
    })
}

/// Exact factorial moments `M_0..M_n0` at time `t` for `n0` particles under
/// `A + A -> 0` with rate `lambda`.
///
/// # Safety
/// `buf` must hold `cap` values; `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn imn_moments_closed(
    n0: u64,
    lambda: f64,
    t: f64,
    buf: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> ImnStatus {
    guard(|| {
        if !(lambda > 0.0) || !(t >= 0.0) {
            return Err(invalid("need lambda > 0 and t >= 0"));
        }
        let m = solve_closed(&FactorialMoments::point_mass(n0, lambda), t);
        write_array(m.values(), buf, cap, out_len)
    })
}

/// Moment system closed by `M_{m_max+1} = 0`, started from `m0[0..len]`.
/// Writes `M_0..M_m_max` and the closure diagnostic `|M_m_max(t)|`.
///
/// # Safety
/// `m0` must hold `len` values; `buf` must hold `cap`; `out_len` and `closure` must be writable.
#[no_mangle]
pub unsafe extern "C" fn imn_moments_truncated(
    m0: *const f64,
    len: usize,
    lambda: f64,
    m_max: usize,
    t: f64,
    tol: f64,
    buf: *mut f64,
    cap: usize,
    out_len: *mut usize,
    closure: *mut f64,
) -> ImnStatus {
    guard(|| {
        let init = FactorialMoments::new(slice(m0, len, "m0")?.to_vec(), lambda, 0.0);
        let r = solve_truncated(&init, m_max, t, tol)?;
        write_out(closure, r.closure_diagnostic, "closure")?;
        write_array(r.moments.values(), buf, cap, out_len)
    })
}

/// Closed-form generating function evaluated by [`imn_genfunc_closed`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImnClosedForm {
    /// `A -> 0` at rate `rate`.
    PureDeath = 0,
    /// `A -> 0`, `0 -> A`, `A -> 2A` all at rate `rate`.
    TripletEqual = 1,
    /// `A -> 0` and `A -> 2A` at `2 rate`, `0 -> A` at `rate`.
    TripletTwoBeta = 2,
}

/// `G(x, t)` for initial generating polynomial `g0[0..len]`.
///
/// # Safety
/// `g0` must hold `len` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn imn_genfunc_closed(
    form: ImnClosedForm,
    g0: *const f64,
    len: usize,
    rate: f64,
    t: f64,
    x: f64,
    out: *mut f64,
) -> ImnStatus {
    guard(|| {
        let g = Polynomial::new(slice(g0, len, "g0")?.to_vec());
        let v = match form {
            ImnClosedForm::PureDeath => closed_pure_death(&g, rate, t, x),
            ImnClosedForm::TripletEqual => closed_triplet_equal(&g, rate, t, x)?,
            ImnClosedForm::TripletTwoBeta => closed_triplet_two_beta(&g, rate, t, x)?,
        };
        write_out(out, v, "out")
    })
}

/// Comb coefficients `c_0..c_{2 k0}` of the explicit amplitude for `2 k0` particles.
///
/// # Safety
/// `buf` must hold `cap` values; `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn imn_appendix_c_comb(
    k0: u32,
    lambda: f64,
    t: f64,
    buf: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> ImnStatus {
    guard(|| write_array(&appendix_c_comb(k0, lambda, t)?.coeffs, buf, cap, out_len))
}

/// `E[1/phi(t)] = 1 + (xi0 - 1) e^{-t}` in rescaled time.
#[no_mangle]
pub extern "C" fn imn_expected_reciprocal(xi0: ImnComplex, t: f64) -> ImnComplex {
    expected_reciprocal(xi0.into(), t).into()
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImnModulusBounds {
    pub lower: f64,
    /// `+inf` past the blow-up floor.
    pub upper: f64,
    pub blowup_floor: f64,
}

/// Bounds on `|phi(t* + delta_t)|` given `|phi(t*)| = modulus`.
#[no_mangle]
pub extern "C" fn imn_modulus_bounds(modulus: f64, delta_t: f64) -> ImnModulusBounds {
    let b = modulus_bounds(modulus, delta_t);
    ImnModulusBounds {
        lower: b.lower,
        upper: b.upper,
        blowup_floor: b.blowup_floor,
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImnSdeConfig {
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub blowup_threshold: f64,
}

/// Defaults: `dt = 1e-3`, 10000 paths, seed 0, blow-up threshold `1e6`.
#[no_mangle]
pub extern "C" fn imn_sde_config_default() -> ImnSdeConfig {
    let d = SdeConfig::default();
    ImnSdeConfig {
        dt: d.dt,
        n_paths: d.n_paths,
        seed: d.seed,
        blowup_threshold: d.blowup_threshold,
    }
}

impl From<ImnSdeConfig> for SdeConfig {
    fn from(c: ImnSdeConfig) -> Self {
        SdeConfig {
            dt: c.dt,
            n_paths: c.n_paths,
            seed: c.seed,
            blowup_threshold: c.blowup_threshold,
            ..SdeConfig::default()
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImnScheme {
    TamedEuler = 0,
    ReciprocalExact = 1,
}

/// Simulates `dphi = -phi^2 dtau + i phi dW` from `phi0` to rescaled time `tau`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn imn_sde_simulate(
    scheme: ImnScheme,
    phi0: ImnComplex,
    config: ImnSdeConfig,
    tau: f64,
    out: *mut *mut ImnEnsemble,
) -> ImnStatus {
    guard(|| {
        let cfg = SdeConfig::from(config);
        let z = Complex64::from(phi0);
        let ens = match scheme {
            ImnScheme::TamedEuler => simulate_tamed_em(fixed(z), &cfg, tau)?,
            ImnScheme::ReciprocalExact => simulate_reciprocal_exact(z, &cfg, tau)?,
        };
        emit(out, ImnEnsemble(ens))
    })
}

/// Number of paths, including flagged ones; 0 for NULL.
///
/// # Safety
/// `ens` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn imn_ensemble_len(ens: *const ImnEnsemble) -> usize {
    ens.as_ref().map_or(0, |e| e.0.n_paths())
}

/// Number of paths flagged as blown up; 0 for NULL.
///
/// # Safety
/// `ens` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn imn_ensemble_flagged(ens: *const ImnEnsemble) -> usize {
    ens.as_ref().map_or(0, |e| e.0.n_flagged())
}

/// Copies the endpoints; flagged paths keep their last finite value.
///
/// # Safety
/// `ens` must be live; `buf` must hold `cap` entries; `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn imn_ensemble_points(
    ens: *const ImnEnsemble,
    buf: *mut ImnComplex,
    cap: usize,
    out_len: *mut usize,
) -> ImnStatus {
    guard(|| {
        let pts = handle(ens, "ens")?.0.points();
        write_out(out_len, pts.len(), "out_len")?;
        if cap < pts.len() {
            return Err(Failure(
                ImnStatus::BufferTooSmall,
                format!("buffer holds {cap} points, {} needed", pts.len()),
            ));
        }
        if !pts.is_empty() {
            if buf.is_null() {
                return Err(null("buf"));
            }
            for (i, z) in pts.iter().enumerate() {
                buf.add(i).write((*z).into());
            }
        }
        Ok(())
    })
}

/// # Safety
/// `ens` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn imn_ensemble_free(ens: *mut ImnEnsemble) {
    if !ens.is_null() {
        drop(Box::from_raw(ens));
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImnCauchyEstimate {
    pub value: ImnComplex,
    pub stderr_re: f64,
    pub stderr_im: f64,
}

/// Monte-Carlo Cauchy transform `(1/2 pi i) E[1/(z - phi)]` over the ensemble.
///
/// # Safety
/// `ens` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn imn_mc_cauchy(
    ens: *const ImnEnsemble,
    phi: ImnComplex,
    out: *mut ImnCauchyEstimate,
) -> ImnStatus {
    guard(|| {
        let e = mc_cauchy(&handle(ens, "ens")?.0, phi.into())?;
        write_out(
            out,
            ImnCauchyEstimate {
                value: e.value.into(),
                stderr_re: e.stderr_re,
                stderr_im: e.stderr_im,
            },
            "out",
        )
    })
}
