use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use serde_json::Value;
use trajattack_ffi::*;

const SCENARIO: &str = r#"{"id":"ffi","map":{"lane_count":3,"ego_lane":"Rightmost"},
"ego":{"vx":90.0,"vy":2.0,"ax":0.0,"ay":0.0,"kind":"Car","width":1.8,"length":4.5,
"history":[[-50.0,-0.4],[-40.0,-0.32],[-30.0,-0.24],[-20.0,-0.16],[-10.0,-0.08],[0.0,0.0]]},
"neighbors":{"LeftFront":{"kind":"Car","speed_x":95.0,"distance":68.5},"LeftBehind":{"kind":"Car","speed_x":85.0,"distance":80.0}}}"#;

const TRUTH: &str = r#"{"intention":"KeepLane","trajectory":[[25.0,0.0],[50.0,0.0],[75.0,0.0],[100.0,0.0]]}"#;

fn take(s: *mut c_char) -> String {
    assert!(!s.is_null());
    let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_string();
    unsafe { ta_string_free(s) };
    out
}

fn last_error() -> String {
    let p = ta_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn scenario(json: &str) -> Result<*mut TaScenario, TaStatus> {
    let c = CString::new(json).unwrap();
    let mut out = ptr::null_mut();
    match unsafe { ta_scenario_from_json(c.as_ptr(), &mut out) } {
        TaStatus::Ok => Ok(out),
        s => Err(s),
    }
}

#[test]
fn scenario_round_trips_and_renders() {
    let s = scenario(SCENARIO).unwrap();
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { ta_scenario_to_json(s, &mut json) }, TaStatus::Ok);
    assert!(ta_last_error().is_null());
    let v: Value = serde_json::from_str(&take(json)).unwrap();
    assert_eq!(v["neighbors"]["LeftFront"]["distance"], 68.5);

    let (mut system, mut user) = (ptr::null_mut(), ptr::null_mut());
    assert_eq!(unsafe { ta_render_prompt(s, TaPromptMode::ChainOfThought, &mut system, &mut user) }, TaStatus::Ok);
    assert!(take(system).contains("Thought"));
    assert!(take(user).contains("distance of 68.5 m"));
    unsafe { ta_scenario_free(s) };
}

#[test]
fn invalid_inputs_report_status_and_message() {
    assert_eq!(scenario("{").unwrap_err(), TaStatus::InvalidJson);
    assert!(!last_error().is_empty());
    let bad = SCENARIO.replace("68.5", "250.0");
    assert_eq!(scenario(&bad).unwrap_err(), TaStatus::InvalidScenario);
    assert!(last_error().contains("200"));

    let mut out = ptr::null_mut();
    assert_eq!(unsafe { ta_scenario_from_json(ptr::null(), &mut out) }, TaStatus::NullPointer);
    assert_eq!(unsafe { ta_scenario_to_json(ptr::null(), &mut ptr::null_mut()) }, TaStatus::NullPointer);
    unsafe {
        ta_scenario_free(ptr::null_mut());
        ta_predictor_free(ptr::null_mut());
        ta_string_free(ptr::null_mut());
    }
}

#[test]
fn parses_responses() {
    let text = CString::new("Intention: 2\nTrajectory: [(10,0), (20,-0.5), (30,-1), (40,-1.5)]").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { ta_parse_response(text.as_ptr(), TaPromptMode::Plain, &mut out) }, TaStatus::Ok);
    let v: Value = serde_json::from_str(&take(out)).unwrap();
    assert_eq!(v["intention"], "RightChange");

    let prose = CString::new("no idea").unwrap();
    assert_eq!(unsafe { ta_parse_response(prose.as_ptr(), TaPromptMode::Plain, &mut out) }, TaStatus::ParseFailure);
    assert!(last_error().contains("Intention"));
}

#[test]
fn surrogate_predicts_and_attack_flips_the_planted_gap() {
    let s = scenario(SCENARIO).unwrap();
    let p = ta_surrogate_new(TaPromptMode::Plain);
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { ta_predict(p, s, &mut out) }, TaStatus::Ok);
    let v: Value = serde_json::from_str(&take(out)).unwrap();
    assert_eq!(v["outcome"]["parsed"]["intention"], "KeepLane");
    assert!(v["raw"].as_str().unwrap().contains("Intention"));

    let truth = CString::new(TRUTH).unwrap();
    let params = ta_de_params_default();
    assert_eq!(params.population, 5);
    assert_eq!(unsafe { ta_run_attack(p, s, truth.as_ptr(), &params, 11, &mut out) }, TaStatus::Ok);
    let r: Value = serde_json::from_str(&take(out)).unwrap();
    assert_eq!(r["feature"], "LeftFront.Distance");
    assert_eq!(r["attacked_prediction"]["parsed"]["intention"], "LeftChange");
    assert_eq!(r["total_queries"], 55);

    let mut same = ptr::null_mut();
    assert_eq!(unsafe { ta_run_attack(p, s, truth.as_ptr(), ptr::null(), 11, &mut same) }, TaStatus::Ok);
    assert_eq!(serde_json::from_str::<Value>(&take(same)).unwrap(), r);

    let bad = TaDeParams { population: 2, ..params };
    assert_eq!(unsafe { ta_run_attack(p, s, truth.as_ptr(), &bad, 11, &mut out) }, TaStatus::InvalidParams);
    unsafe {
        ta_predictor_free(p);
        ta_scenario_free(s);
    }
}

#[test]
fn unreachable_remote_is_a_transport_error() {
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let config =
        CString::new(format!(r#"{{"base_url":"http://127.0.0.1:{port}/v1","max_retries":0,"timeout_s":1.0}}"#))
            .unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { ta_remote_new(config.as_ptr(), TaPromptMode::Plain, &mut p) }, TaStatus::Ok);
    let s = scenario(SCENARIO).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { ta_predict(p, s, &mut out) }, TaStatus::Transport);
    unsafe {
        ta_predictor_free(p);
        ta_scenario_free(s);
    }
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "trajattack.h"

int main(int argc, char **argv) {
    TaScenario *s = NULL;
    if (ta_scenario_from_json(argv[1], &s) != TA_STATUS_OK) return 2;
    TaPredictor *p = ta_surrogate_new(TA_PROMPT_MODE_PLAIN);
    TaDeParams params = ta_de_params_default();
    char *out = NULL;
    TaStatus st = ta_run_attack(p, s, argv[2], &params, 11, &out);
    if (st != TA_STATUS_OK) { fprintf(stderr, "%s\n", ta_last_error()); return 3; }
    puts(out);
    ta_string_free(out);
    if (ta_scenario_from_json("{", &s) != TA_STATUS_INVALID_JSON || ta_last_error() == NULL) return 4;
    ta_predictor_free(p);
    ta_scenario_free(s);
    return 0;
}
"#;

#[test]
fn header_compiles_and_links_from_c() {
    let dir = tempfile::tempdir().unwrap();
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    // target/<profile>/deps/<test> -> target/<profile>
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("libtrajattack_ffi.a");
    assert!(lib.exists(), "static library not built at {}", lib.display());
    let source = dir.path().join("main.c");
    std::fs::write(&source, C_PROGRAM).unwrap();
    let exe = dir.path().join("main");
    let status = Command::new("cc")
        .args(["-std=c11", "-Wall", "-Werror", "-I"])
        .arg(&include)
        .arg(&source)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).args([SCENARIO, TRUTH]).output().unwrap();
    assert!(out.status.success(), "{:?}: {}", out.status, String::from_utf8_lossy(&out.stderr));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["feature"], "LeftFront.Distance");
}
