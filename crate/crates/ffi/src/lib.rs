//! C ABI over the insertion environment and the evaluated policies.
//!
//! Every function returns an [`SbStatus`]; on failure a message is kept per thread and can be
//! read with [`sb_last_error`]. Handles are opaque and must be released with their `_free`
//! function. Panics are caught at the boundary and reported as `SB_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::BufReader;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use slotbench::baselines::{RandomSearch, StraightDown};
use slotbench::config::ConfigFile;
use slotbench::env::{BlockerPlacement, EnvConfig, EnvError, InsertionEnv, ResetOptions, StartMode, Termination};
use slotbench::nn::read_checkpoint;
use slotbench::policy::{LearnedPolicy, Policy};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    EpisodeOver = 4,
    BufferTooSmall = 5,
    Io = 6,
    Checkpoint = 7,
    Incompatible = 8,
    Simulation = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SbTermination {
    #[default]
    None = 0,
    Success = 1,
    Jam = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SbBlocker {
    None = 0,
    TargetSlot = 1,
    /// Blocker in the target slot with the configured probability.
    Sampled = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SbStart {
    Sampled = 0,
    PartialInsert = 1,
    Region = 2,
    Centered = 3,
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct SbResetOptions {
    pub noise_fraction: f64,
    /// Negative picks a slot at random.
    pub target_slot: i32,
    pub blocker: SbBlocker,
    pub start: SbStart,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct SbStepInfo {
    pub reward: f64,
    pub terminated: SbTermination,
    pub truncated: bool,
    /// End-effector pose `(x, z, theta)`.
    pub pose: [f64; 3],
    /// Contact wrench `(fx, fz, tau)` at the end-effector.
    pub wrench: [f64; 3],
    pub delay: usize,
    pub peak_force: f64,
}

pub struct SbEnv {
    env: InsertionEnv,
}

pub struct SbPolicy {
    policy: Box<dyn Policy>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = s);
}

fn fail(status: SbStatus, msg: impl Into<String>) -> SbStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> SbStatus) -> SbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(SbStatus::Panic, "internal panic"),
    }
}

fn env_status(e: &EnvError) -> SbStatus {
    match e {
        EnvError::InvalidConfig(_) => SbStatus::InvalidConfig,
        EnvError::Sim(_) => SbStatus::Simulation,
        EnvError::EpisodeOver => SbStatus::EpisodeOver,
        EnvError::BadAction(_) | EnvError::BadSlot(_) => SbStatus::InvalidArgument,
    }
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, SbStatus> {
    if p.is_null() {
        return Err(fail(SbStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(SbStatus::InvalidArgument, "string is not UTF-8"))
}

unsafe fn copy_out(src: &[f64], dst: *mut f64, len: usize) -> SbStatus {
    if dst.is_null() {
        return SbStatus::Ok;
    }
    if len < src.len() {
        return fail(SbStatus::BufferTooSmall, format!("buffer holds {len} values, {} needed", src.len()));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    SbStatus::Ok
}

fn config_from_toml(text: Option<&str>) -> Result<EnvConfig, SbStatus> {
    let file = match text {
        Some(t) => {
            ConfigFile::parse(t, Path::new("<ffi>")).map_err(|e| fail(SbStatus::InvalidConfig, e.to_string()))?
        }
        None => ConfigFile::default(),
    };
    file.resolve(0).map(|x| x.env).map_err(|e| fail(SbStatus::InvalidConfig, e.to_string()))
}

/// Message for the last failing call on this thread; valid until the next failing call.
#[no_mangle]
pub extern "C" fn sb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sb_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// Default reset: full noise, sampled blocker and start.
#[no_mangle]
pub extern "C" fn sb_reset_options_default() -> SbResetOptions {
    SbResetOptions { noise_fraction: 1.0, target_slot: -1, blocker: SbBlocker::Sampled, start: SbStart::Sampled }
}

/// Creates an environment from an experiment TOML string, or defaults when `config_toml` is null.
///
/// # Safety
/// `config_toml` must be null or a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_env_new(config_toml: *const c_char, out: *mut *mut SbEnv) -> SbStatus {
    guard(|| {
        if out.is_null() {
            return fail(SbStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let text = if config_toml.is_null() {
            None
        } else {
            match str_arg(config_toml) {
                Ok(s) => Some(s),
                Err(s) => return s,
            }
        };
        let cfg = match config_from_toml(text) {
            Ok(c) => c,
            Err(s) => return s,
        };
        match InsertionEnv::new(cfg) {
            Ok(env) => {
                *out = Box::into_raw(Box::new(SbEnv { env }));
                SbStatus::Ok
            }
            Err(e) => fail(env_status(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `env` must be null or a handle from `sb_env_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sb_env_free(env: *mut SbEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// # Safety
/// `env` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_env_observation_dim(env: *const SbEnv, out: *mut usize) -> SbStatus {
    guard(|| {
        if env.is_null() || out.is_null() {
            return fail(SbStatus::NullPointer, "null argument");
        }
        *out = (*env).env.observation_dim();
        SbStatus::Ok
    })
}

/// Starts an episode and writes the first observation to `obs` (may be null).
///
/// # Safety
/// `env` must be a live handle, `opts` null or valid, `obs` null or `obs_len` writable values.
#[no_mangle]
pub unsafe extern "C" fn sb_env_reset(
    env: *mut SbEnv,
    seed: u64,
    opts: *const SbResetOptions,
    obs: *mut f64,
    obs_len: usize,
) -> SbStatus {
    guard(|| {
        if env.is_null() {
            return fail(SbStatus::NullPointer, "env is null");
        }
        let o = if opts.is_null() { sb_reset_options_default() } else { *opts };
        if !(0.0..=1.0).contains(&o.noise_fraction) {
            return fail(SbStatus::InvalidArgument, "noise_fraction must lie in [0, 1]");
        }
        let opts = ResetOptions {
            noise_fraction: o.noise_fraction,
            target_slot: usize::try_from(o.target_slot).ok(),
            blocker: match o.blocker {
                SbBlocker::None => BlockerPlacement::None,
                SbBlocker::TargetSlot => BlockerPlacement::TargetSlot,
                SbBlocker::Sampled => BlockerPlacement::Sampled,
            },
            start: match o.start {
                SbStart::Sampled => StartMode::Sampled,
                SbStart::PartialInsert => StartMode::PartialInsert { depth_fraction: None },
                SbStart::Region => StartMode::Region,
                SbStart::Centered => StartMode::Centered,
            },
        };
        match (*env).env.reset(seed, &opts) {
            Ok(first) => copy_out(&first, obs, obs_len),
            Err(e) => fail(env_status(&e), e.to_string()),
        }
    })
}

/// Applies one normalized action of 3 values; writes the next observation and step info.
///
/// # Safety
/// `env` must be a live handle, `action` must point to 3 values, `obs` null or `obs_len`
/// writable values, `info` null or writable.
#[no_mangle]
pub unsafe extern "C" fn sb_env_step(
    env: *mut SbEnv,
    action: *const f64,
    obs: *mut f64,
    obs_len: usize,
    info: *mut SbStepInfo,
) -> SbStatus {
    guard(|| {
        if env.is_null() || action.is_null() {
            return fail(SbStatus::NullPointer, "null argument");
        }
        let a = std::slice::from_raw_parts(action, 3);
        let r = match (*env).env.step(a) {
            Ok(r) => r,
            Err(e) => return fail(env_status(&e), e.to_string()),
        };
        if !info.is_null() {
            *info = SbStepInfo {
                reward: r.reward,
                terminated: match r.terminated {
                    Termination::None => SbTermination::None,
                    Termination::Success => SbTermination::Success,
                    Termination::Jam => SbTermination::Jam,
                },
                truncated: r.truncated,
                pose: r.info.pose.to_array(),
                wrench: [r.info.wrench.fx, r.info.wrench.fz, r.info.wrench.tau],
                delay: r.info.delay,
                peak_force: r.info.peak_force,
            };
        }
        copy_out(&r.observation, obs, obs_len)
    })
}

/// Creates `straight-down` or `random-search`.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_policy_baseline(name: *const c_char, out: *mut *mut SbPolicy) -> SbStatus {
    guard(|| {
        if out.is_null() {
            return fail(SbStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let name = match str_arg(name) {
            Ok(s) => s,
            Err(s) => return s,
        };
        let policy: Box<dyn Policy> = match name {
            "straight-down" => Box::new(StraightDown),
            "random-search" => Box::new(RandomSearch::default()),
            other => return fail(SbStatus::InvalidArgument, format!("unknown baseline {other:?}")),
        };
        *out = Box::into_raw(Box::new(SbPolicy { policy }));
        SbStatus::Ok
    })
}

/// Loads a trained checkpoint and checks it against `env`'s observation layout.
///
/// # Safety
/// `path` must be a NUL-terminated string, `env` a live handle, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sb_policy_load(path: *const c_char, env: *const SbEnv, out: *mut *mut SbPolicy) -> SbStatus {
    guard(|| {
        if out.is_null() || env.is_null() {
            return fail(SbStatus::NullPointer, "null argument");
        }
        *out = ptr::null_mut();
        let path = match str_arg(path) {
            Ok(s) => s,
            Err(s) => return s,
        };
        let f = match File::open(path) {
            Ok(f) => f,
            Err(e) => return fail(SbStatus::Io, format!("{path}: {e}")),
        };
        let ck = match read_checkpoint(&mut BufReader::new(f)) {
            Ok(c) => c,
            Err(e) => return fail(SbStatus::Checkpoint, format!("{path}: {e}")),
        };
        let p = LearnedPolicy::new(ck, "learned");
        if let Err(e) = p.check_compatible((*env).env.config()) {
            return fail(SbStatus::Incompatible, e.to_string());
        }
        *out = Box::into_raw(Box::new(SbPolicy { policy: Box::new(p) }));
        SbStatus::Ok
    })
}

/// # Safety
/// `policy` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sb_policy_free(policy: *mut SbPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Reseeds per-episode policy state; call after every reset.
///
/// # Safety
/// `policy` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sb_policy_begin_episode(policy: *mut SbPolicy, seed: u64) -> SbStatus {
    guard(|| {
        if policy.is_null() {
            return fail(SbStatus::NullPointer, "policy is null");
        }
        (*policy).policy.begin_episode(seed);
        SbStatus::Ok
    })
}

/// Writes the policy's 3-value action for the current state of `env`.
///
/// # Safety
/// Handles must be live, `obs` must point to `obs_len` values, `action` to 3 writable values.
#[no_mangle]
pub unsafe extern "C" fn sb_policy_act(
    policy: *mut SbPolicy,
    env: *const SbEnv,
    obs: *const f64,
    obs_len: usize,
    action: *mut f64,
) -> SbStatus {
    guard(|| {
        if policy.is_null() || env.is_null() || obs.is_null() || action.is_null() {
            return fail(SbStatus::NullPointer, "null argument");
        }
        let env = &(*env).env;
        if obs_len != env.observation_dim() {
            return fail(
                SbStatus::InvalidArgument,
                format!("observation has {obs_len} values, expected {}", env.observation_dim()),
            );
        }
        let o = std::slice::from_raw_parts(obs, obs_len);
        let a = (*policy).policy.act(env, o);
        copy_out(&a, action, 3)
    })
}
