use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use unrealdc::netcore::{save_checkpoint, NetworkConfig, Parameters};
use unrealdc_ffi::*;

const MAP: &str = "#######\n#S..O.#\n#..M..#\n#######\n";

fn checkpoint(dir: &Path, name: &str, actions: usize, seed: u64) -> CString {
    let path = dir.join(name);
    save_checkpoint(&path, &Parameters::init(&NetworkConfig::tiny(actions), seed).unwrap()).unwrap();
    CString::new(path.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = udc_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn new_env(role: u32) -> *mut UdcEnv {
    let map = CString::new(MAP).unwrap();
    let mut env = ptr::null_mut();
    assert_eq!(unsafe { udc_env_new(map.as_ptr(), 1, 8, 8, false, role, &mut env) }, UdcStatus::Ok);
    env
}

#[test]
fn env_round_trip() {
    let env = new_env(UDC_ROLE_NAVIGATION);
    unsafe {
        let n = udc_env_observation_len(env);
        assert_eq!(n, 8 * 8 * 3);
        let mut buf = vec![0f32; n];
        assert_eq!(udc_env_observation(env, buf.as_mut_ptr(), n), UdcStatus::Ok);
        assert!(buf.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(udc_env_observation(env, buf.as_mut_ptr(), n - 1), UdcStatus::BufferTooSmall);
        let (mut r, mut done, mut ev) = (0.0, false, UdcEvents::default());
        assert_eq!(udc_env_step(env, UDC_ACTION_TURN_LEFT, &mut r, &mut done, &mut ev), UdcStatus::Ok);
        let mut expect = 0.0;
        assert_eq!(udc_shaped_reward(UDC_ROLE_NAVIGATION, &ev, &mut expect), UdcStatus::Ok);
        assert_eq!(r, expect);
        assert_eq!(udc_env_step(env, 17, ptr::null_mut(), ptr::null_mut(), ptr::null_mut()), UdcStatus::InvalidArgument);
        assert!(last_error().contains("17"));
        assert_eq!(udc_env_reset(env, 2), UdcStatus::Ok);
        udc_env_free(env);
    }
}

#[test]
fn bad_inputs() {
    let bad = CString::new("###\n#.#\n###").unwrap();
    let mut env = ptr::null_mut();
    unsafe {
        assert_eq!(udc_env_new(bad.as_ptr(), 0, 8, 8, false, 0, &mut env), UdcStatus::MapError);
        assert!(env.is_null());
        assert_eq!(udc_env_new(ptr::null(), 0, 8, 8, false, 0, &mut env), UdcStatus::NullPointer);
        let map = CString::new(MAP).unwrap();
        assert_eq!(udc_env_new(map.as_ptr(), 0, 8, 8, false, 7, &mut env), UdcStatus::InvalidArgument);
        let missing = CString::new("/no/such.ckpt").unwrap();
        let mut agent = ptr::null_mut();
        assert_eq!(udc_agent_load(missing.as_ptr(), true, &mut agent), UdcStatus::CheckpointError);
        assert!(last_error().contains("/no/such.ckpt"));
        udc_env_free(ptr::null_mut());
        udc_agent_free(ptr::null_mut());
    }
}

#[test]
fn combined_agent_plays() {
    let dir = tempfile::tempdir().unwrap();
    let act = checkpoint(dir.path(), "a.ckpt", 5, 1);
    let nav = checkpoint(dir.path(), "n.ckpt", 3, 2);
    let env = new_env(UDC_ROLE_ACTION);
    let mut agent = ptr::null_mut();
    unsafe {
        assert_eq!(udc_combined_load(act.as_ptr(), nav.as_ptr(), false, false, &mut agent), UdcStatus::Ok);
        let (mut h, mut w) = (0, 0);
        assert_eq!(udc_agent_input_dims(agent, &mut h, &mut w), UdcStatus::Ok);
        assert_eq!((h, w), (8, 8));
        for _ in 0..20 {
            let (mut a, mut c) = (0u32, 9i32);
            assert_eq!(udc_agent_act(agent, env, &mut a, &mut c), UdcStatus::Ok);
            assert!(a <= UDC_ACTION_MOVE_BACKWARD);
            assert!(c == UDC_CHOICE_ACTION || c == UDC_CHOICE_NAVIGATION);
            if c == UDC_CHOICE_NAVIGATION {
                assert!(a == UDC_ACTION_MOVE_FORWARD || a == UDC_ACTION_TURN_LEFT || a == UDC_ACTION_TURN_RIGHT);
            }
            let status = udc_env_step(env, a, ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
            if status == UdcStatus::EpisodeFinished {
                break;
            }
        }
        let map = CString::new(MAP).unwrap();
        let mut stats = vec![UdcEpisodeStats::default(); 3];
        assert_eq!(udc_agent_run_episodes(agent, map.as_ptr(), 3, false, 40, stats.as_mut_ptr()), UdcStatus::Ok);
        assert_eq!(stats.iter().map(|s| s.seed).collect::<Vec<_>>(), vec![40, 41, 42]);
        udc_agent_free(agent);
        udc_env_free(env);
    }
}

#[test]
fn combined_refuses_swapped_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let act = checkpoint(dir.path(), "a.ckpt", 5, 1);
    let mut agent = ptr::null_mut();
    let status = unsafe { udc_combined_load(act.as_ptr(), act.as_ptr(), true, false, &mut agent) };
    assert_eq!(status, UdcStatus::ActionCountMismatch);
    assert!(agent.is_null());
}

#[test]
fn welch_binding() {
    let a = [1.0, 2.0, 3.0, 4.0, 5.0];
    let b = [2.0, 3.0, 4.0, 5.0, 6.0];
    let mut out = UdcTTest::default();
    unsafe {
        assert_eq!(udc_welch_t_test(a.as_ptr(), 5, b.as_ptr(), 5, &mut out), UdcStatus::Ok);
        assert!(out.defined);
        assert!((out.t + 1.0).abs() < 1e-12);
        assert!((out.df - 8.0).abs() < 1e-12);
        let same = [2.0, 2.0];
        assert_eq!(udc_welch_t_test(same.as_ptr(), 2, same.as_ptr(), 2, &mut out), UdcStatus::Ok);
        assert!(!out.defined && out.p.is_nan());
        assert_eq!(udc_welch_t_test(a.as_ptr(), 1, b.as_ptr(), 5, &mut out), UdcStatus::InvalidArgument);
    }
}

fn target_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links_from_c() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = root.join("include/unrealdc.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["udc_env_new", "udc_agent_act", "udc_combined_load", "udc_welch_t_test", "udc_last_error", "UDC_STATUS_OK"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let lib = target_dir().join("libunrealdc_ffi.a");
    assert!(lib.exists(), "static library not built at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(root.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(root.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let ckpt = checkpoint(dir.path(), "act.ckpt", 5, 3);
    let out = Command::new(&exe).arg(ckpt.to_str().unwrap()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("t -1.000000 df 8.000000"), "{stdout}");
}
