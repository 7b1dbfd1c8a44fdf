use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use slotbench::baselines::StraightDown;
use slotbench::env::{BlockerPlacement, EnvConfig, InsertionEnv, ResetOptions, StartMode};
use slotbench::nn::write_checkpoint;
use slotbench::policy::Policy;
use slotbench::sac::{default_obs_scale, Sac, SacConfig};
use slotbench_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(sb_last_error()) }.to_string_lossy().into_owned()
}

fn new_env(toml: Option<&str>) -> (SbStatus, *mut SbEnv) {
    let text = toml.map(|t| CString::new(t).unwrap());
    let mut env = ptr::null_mut();
    let s = unsafe { sb_env_new(text.as_ref().map_or(ptr::null(), |t| t.as_ptr()), &mut env) };
    (s, env)
}

fn baseline(name: &str) -> (SbStatus, *mut SbPolicy) {
    let n = CString::new(name).unwrap();
    let mut p = ptr::null_mut();
    let s = unsafe { sb_policy_baseline(n.as_ptr(), &mut p) };
    (s, p)
}

#[test]
fn version_and_defaults() {
    let v = unsafe { CStr::from_ptr(sb_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    let o = sb_reset_options_default();
    assert_eq!((o.noise_fraction, o.target_slot), (1.0, -1));
}

#[test]
fn null_and_bad_arguments_report_errors() {
    unsafe {
        assert_eq!(sb_env_new(ptr::null(), ptr::null_mut()), SbStatus::NullPointer);
        assert!(last_error().contains("null"));
        let mut dim = 0usize;
        assert_eq!(sb_env_observation_dim(ptr::null(), &mut dim), SbStatus::NullPointer);
        assert_eq!(sb_env_reset(ptr::null_mut(), 0, ptr::null(), ptr::null_mut(), 0), SbStatus::NullPointer);
        sb_env_free(ptr::null_mut());
        sb_policy_free(ptr::null_mut());
    }
    let (s, env) = new_env(Some("[environment]\nhistory_steps = 0\n"));
    assert_eq!(s, SbStatus::InvalidConfig);
    assert!(env.is_null());
    assert!(last_error().contains("history"), "{}", last_error());
    let (s, _) = new_env(Some("[nonsense"));
    assert_eq!(s, SbStatus::InvalidConfig);
    let (s, p) = baseline("teleport");
    assert_eq!(s, SbStatus::InvalidArgument);
    assert!(p.is_null());
}

#[test]
fn buffers_and_episode_lifecycle() {
    let (s, env) = new_env(None);
    assert_eq!(s, SbStatus::Ok);
    unsafe {
        let mut dim = 0usize;
        assert_eq!(sb_env_observation_dim(env, &mut dim), SbStatus::Ok);
        assert_eq!(dim, EnvConfig::default().observation_dim());
        let mut obs = vec![0.0; dim];
        assert_eq!(sb_env_reset(env, 1, ptr::null(), obs.as_mut_ptr(), dim - 1), SbStatus::BufferTooSmall);
        let mut bad = sb_reset_options_default();
        bad.noise_fraction = 2.0;
        assert_eq!(sb_env_reset(env, 1, &bad, obs.as_mut_ptr(), dim), SbStatus::InvalidArgument);
        assert_eq!(sb_env_reset(env, 1, ptr::null(), obs.as_mut_ptr(), dim), SbStatus::Ok);
        let nan = [f64::NAN, 0.0, 0.0];
        let mut info = std::mem::zeroed::<SbStepInfo>();
        assert_eq!(sb_env_step(env, nan.as_ptr(), obs.as_mut_ptr(), dim, &mut info), SbStatus::InvalidArgument);
        let a = [0.0; 3];
        let mut steps = 0;
        loop {
            assert_eq!(sb_env_step(env, a.as_ptr(), obs.as_mut_ptr(), dim, &mut info), SbStatus::Ok);
            steps += 1;
            assert!((7..=13).contains(&info.delay));
            if info.terminated != SbTermination::None || info.truncated {
                break;
            }
        }
        assert!(steps <= 128);
        assert_eq!(sb_env_step(env, a.as_ptr(), obs.as_mut_ptr(), dim, &mut info), SbStatus::EpisodeOver);
        sb_env_free(env);
    }
}

#[test]
fn baseline_episode_matches_native_run() {
    let (_, env) = new_env(None);
    let (s, pol) = baseline("straight-down");
    assert_eq!(s, SbStatus::Ok);
    let opts =
        SbResetOptions { noise_fraction: 1.0, target_slot: 2, blocker: SbBlocker::TargetSlot, start: SbStart::Region };
    let mut native = InsertionEnv::new(EnvConfig::default()).unwrap();
    let native_opts = ResetOptions {
        noise_fraction: 1.0,
        target_slot: Some(2),
        blocker: BlockerPlacement::TargetSlot,
        start: StartMode::Region,
    };
    let mut nobs = native.reset(9, &native_opts).unwrap();
    let mut sd = StraightDown;
    unsafe {
        let mut dim = 0usize;
        sb_env_observation_dim(env, &mut dim);
        let mut obs = vec![0.0; dim];
        assert_eq!(sb_env_reset(env, 9, &opts, obs.as_mut_ptr(), dim), SbStatus::Ok);
        assert_eq!(obs, nobs);
        assert_eq!(sb_policy_begin_episode(pol, 3), SbStatus::Ok);
        let mut info = std::mem::zeroed::<SbStepInfo>();
        loop {
            let mut a = [0.0; 3];
            assert_eq!(sb_policy_act(pol, env, obs.as_ptr(), dim, a.as_mut_ptr()), SbStatus::Ok);
            let na = sd.act(&native, &nobs);
            assert_eq!(a.to_vec(), na);
            assert_eq!(sb_env_step(env, a.as_ptr(), obs.as_mut_ptr(), dim, &mut info), SbStatus::Ok);
            let r = native.step(&na).unwrap();
            assert_eq!(info.pose, r.info.pose.to_array());
            assert_eq!(info.reward.to_bits(), r.reward.to_bits());
            let done = r.done();
            nobs = r.observation;
            assert_eq!(obs, nobs);
            if done {
                assert!(info.terminated != SbTermination::None || info.truncated);
                break;
            }
        }
        sb_policy_free(pol);
        sb_env_free(env);
    }
}

#[test]
fn checkpoint_loading_checks_layout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.ckpt");
    let cfg = EnvConfig::default();
    let sac = Sac::new(
        SacConfig { hidden: vec![8, 8], ..SacConfig::default() },
        cfg.observation_dim(),
        3,
        default_obs_scale(cfg.history_len, cfg.include_velocity),
        1,
    )
    .unwrap();
    let mut f = std::fs::File::create(&path).unwrap();
    write_checkpoint(&mut f, &sac.checkpoint(cfg.history_len, cfg.include_velocity)).unwrap();
    drop(f);
    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let (_, env) = new_env(None);
    let (_, h1) = new_env(Some("[environment]\nhistory_steps = 1\n"));
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(sb_policy_load(c_path.as_ptr(), env, &mut p), SbStatus::Ok);
        let mut dim = 0usize;
        sb_env_observation_dim(env, &mut dim);
        let mut obs = vec![0.0; dim];
        sb_env_reset(env, 0, ptr::null(), obs.as_mut_ptr(), dim);
        let mut a = [9.0; 3];
        assert_eq!(sb_policy_act(p, env, obs.as_ptr(), dim, a.as_mut_ptr()), SbStatus::Ok);
        assert!(a.iter().all(|v| v.abs() < 1.0));
        assert_eq!(sb_policy_act(p, env, obs.as_ptr(), dim - 1, a.as_mut_ptr()), SbStatus::InvalidArgument);
        sb_policy_free(p);

        let mut q = ptr::null_mut();
        assert_eq!(sb_policy_load(c_path.as_ptr(), h1, &mut q), SbStatus::Incompatible);
        assert!(q.is_null());
        let missing = CString::new(dir.path().join("none").to_str().unwrap()).unwrap();
        assert_eq!(sb_policy_load(missing.as_ptr(), env, &mut q), SbStatus::Io);
        std::fs::write(&path, b"garbage").unwrap();
        assert_eq!(sb_policy_load(c_path.as_ptr(), env, &mut q), SbStatus::Checkpoint);
        sb_env_free(env);
        sb_env_free(h1);
    }
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/slotbench.h");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        r#"#include "slotbench.h"
int run(void) {
    SbEnv *env = 0;
    if (sb_env_new(0, &env) != SB_STATUS_OK) return 1;
    SbResetOptions o = sb_reset_options_default();
    o.blocker = SB_BLOCKER_TARGET_SLOT;
    double obs[48], a[3] = {0, 0, 0};
    SbStepInfo info;
    sb_env_reset(env, 1, &o, obs, 48);
    sb_env_step(env, a, obs, 48, &info);
    sb_env_free(env);
    return info.terminated == SB_TERMINATION_JAM;
}
"#,
    )
    .unwrap();
    let inc = std::path::Path::new(header).parent().unwrap();
    for (compiler, lang) in [("cc", "c"), ("c++", "c++")] {
        match Command::new(compiler)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang, "-I"])
            .arg(inc)
            .arg(&src)
            .output()
        {
            Ok(o) => assert!(o.status.success(), "{compiler}: {}", String::from_utf8_lossy(&o.stderr)),
            Err(_) => eprintln!("{compiler} not available; skipped"),
        }
    }
}
