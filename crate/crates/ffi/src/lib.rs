//! C ABI over the trajattack core: opaque scenario and predictor handles,
//! status codes with a thread-local error message, and JSON for structured
//! results.
//!
//! Strings returned through `out` parameters are owned by the caller and must
//! be released with [`ta_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use trajattack::attack::{run_attack, AttackError, DeParams, FitnessWeights, PredictionOutcome};
use trajattack::predictor::{EndpointConfig, Predictor, RemotePredictor, Surrogate};
use trajattack::prompt::{parse_response, render, PromptMode};
use trajattack::scenario::{DrivingScenario, GroundTruth};

/// Parsed, validated driving scenario.
pub struct TaScenario(DrivingScenario);

/// Trajectory and intention predictor.
pub struct TaPredictor(Box<dyn Predictor>);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidJson = 3,
    InvalidScenario = 4,
    /// The response text did not match the answer grammar.
    ParseFailure = 5,
    InvalidParams = 6,
    NoAttackSurface = 7,
    Transport = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaPromptMode {
    Plain = 0,
    ChainOfThought = 1,
}

impl From<TaPromptMode> for PromptMode {
    fn from(m: TaPromptMode) -> Self {
        match m {
            TaPromptMode::Plain => PromptMode::Plain,
            TaPromptMode::ChainOfThought => PromptMode::Cot,
        }
    }
}

/// Differential-evolution settings; start from [`ta_de_params_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaDeParams {
    pub population: usize,
    pub mutation: f64,
    pub crossover: f64,
    pub generations: usize,
    pub budget: f64,
}

impl From<TaDeParams> for DeParams {
    fn from(p: TaDeParams) -> Self {
        DeParams {
            population: p.population,
            mutation: p.mutation,
            crossover: p.crossover,
            generations: p.generations,
            budget: p.budget,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(TaStatus, String);

fn set_error(msg: Option<String>) {
    let c = msg.map(|m| CString::new(m.replace('\0', " ")).expect("interior NULs removed"));
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

/// Runs `f`, recording its error message and converting panics.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(None);
            TaStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(Some(msg));
            status
        }
        Err(_) => {
            set_error(Some("internal panic".into()));
            TaStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(TaStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|e| Failure(TaStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure(TaStatus::NullPointer, format!("{what} is null")))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(TaStatus::NullPointer, format!("{what} is null")));
    }
    out.write(value);
    Ok(())
}

fn to_c(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("interior NULs removed").into_raw()
}

fn json_err(e: serde_json::Error) -> Failure {
    Failure(TaStatus::InvalidJson, e.to_string())
}

fn attack_err(e: AttackError) -> Failure {
    let status = match e {
        AttackError::NoAttackSurface => TaStatus::NoAttackSurface,
        AttackError::InvalidParams(_) => TaStatus::InvalidParams,
        AttackError::Transport { .. } => TaStatus::Transport,
    };
    Failure(status, e.to_string())
}

/// Message of the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next call into this library.
#[no_mangle]
pub extern "C" fn ta_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ta_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses and validates a scenario from JSON.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ta_scenario_from_json(json: *const c_char, out: *mut *mut TaScenario) -> TaStatus {
    guard(|| {
        let text = read_str(json, "json")?;
        let scenario = DrivingScenario::from_json(text).map_err(json_err)?;
        let violations = scenario.validate();
        if let Some(v) = violations.first() {
            return Err(Failure(TaStatus::InvalidScenario, v.to_string()));
        }
        write_out(out, Box::into_raw(Box::new(TaScenario(scenario))), "out")
    })
}

/// Canonical JSON of a scenario.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ta_scenario_to_json(scenario: *const TaScenario, out: *mut *mut c_char) -> TaStatus {
    guard(|| {
        let s = handle(scenario, "scenario")?;
        write_out(out, to_c(s.0.canonical_json()), "out")
    })
}

/// # Safety
/// `scenario` must be null or a handle from [`ta_scenario_from_json`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ta_scenario_free(scenario: *mut TaScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Renders the system and user messages for a scenario.
///
/// # Safety
/// `scenario` must be a live handle; both `out` pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn ta_render_prompt(
    scenario: *const TaScenario,
    mode: TaPromptMode,
    out_system: *mut *mut c_char,
    out_user: *mut *mut c_char,
) -> TaStatus {
    guard(|| {
        let s = handle(scenario, "scenario")?;
        if out_system.is_null() || out_user.is_null() {
            return Err(Failure(TaStatus::NullPointer, "output pointer is null".into()));
        }
        let prompt = render(&s.0, mode.into());
        write_out(out_system, to_c(prompt.system), "out_system")?;
        write_out(out_user, to_c(prompt.user), "out_user")
    })
}

/// Parses a model response into prediction JSON
/// (`{"intention": ..., "trajectory": [[x, y], ...], "thought": ...}`).
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ta_parse_response(text: *const c_char, mode: TaPromptMode, out: *mut *mut c_char) -> TaStatus {
    guard(|| {
        let text = read_str(text, "text")?;
        let parsed = parse_response(text, mode.into()).map_err(|e| Failure(TaStatus::ParseFailure, e.to_string()))?;
        write_out(out, to_c(serde_json::to_string(&parsed).map_err(json_err)?), "out")
    })
}

/// Rule-based stand-in predictor with default thresholds.
#[no_mangle]
pub extern "C" fn ta_surrogate_new(mode: TaPromptMode) -> *mut TaPredictor {
    Box::into_raw(Box::new(TaPredictor(Box::new(Surrogate::default().with_mode(mode.into())))))
}

/// Chat-completion predictor configured from endpoint JSON (`base_url`,
/// `model`, `timeout_s`, `max_retries`, `temperature`, `backoff_ms`; all
/// optional). Environment overrides apply.
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ta_remote_new(
    config_json: *const c_char,
    mode: TaPromptMode,
    out: *mut *mut TaPredictor,
) -> TaStatus {
    guard(|| {
        let text = read_str(config_json, "config_json")?;
        let config: EndpointConfig = serde_json::from_str(text).map_err(json_err)?;
        let remote =
            RemotePredictor::new(config.with_env(), mode.into()).map_err(|e| Failure(TaStatus::InvalidParams, e))?;
        write_out(out, Box::into_raw(Box::new(TaPredictor(Box::new(remote)))), "out")
    })
}

/// # Safety
/// `predictor` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ta_predictor_free(predictor: *mut TaPredictor) {
    if !predictor.is_null() {
        drop(Box::from_raw(predictor));
    }
}

/// Queries the predictor once. The JSON holds the raw response and either
/// `{"parsed": prediction}` or `{"failed": reason}` under `outcome`; an
/// unparseable response is still `TA_STATUS_OK`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ta_predict(
    predictor: *const TaPredictor,
    scenario: *const TaScenario,
    out: *mut *mut c_char,
) -> TaStatus {
    guard(|| {
        let p = handle(predictor, "predictor")?;
        let s = handle(scenario, "scenario")?;
        let reply = p.0.predict(&s.0).map_err(|e| Failure(TaStatus::Transport, e.to_string()))?;
        let body = serde_json::json!({
            "raw": reply.raw,
            "outcome": PredictionOutcome::from_result(&reply.outcome),
        });
        write_out(out, to_c(body.to_string()), "out")
    })
}

/// Population 5, α 0.5, CR 0.9, 10 generations, Δ 0.1.
#[no_mangle]
pub extern "C" fn ta_de_params_default() -> TaDeParams {
    let d = DeParams::default();
    TaDeParams {
        population: d.population,
        mutation: d.mutation,
        crossover: d.crossover,
        generations: d.generations,
        budget: d.budget,
    }
}

/// Runs the one-feature DE attack against `truth_json` (intention and
/// four-waypoint trajectory) and returns the attack result as JSON.
/// `params` may be null for the defaults.
///
/// # Safety
/// Handles must be live, `truth_json` NUL-terminated, `params` null or
/// readable, and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ta_run_attack(
    predictor: *const TaPredictor,
    scenario: *const TaScenario,
    truth_json: *const c_char,
    params: *const TaDeParams,
    seed: u64,
    out: *mut *mut c_char,
) -> TaStatus {
    guard(|| {
        let p = handle(predictor, "predictor")?;
        let s = handle(scenario, "scenario")?;
        let truth: GroundTruth = serde_json::from_str(read_str(truth_json, "truth_json")?).map_err(json_err)?;
        let params = params.as_ref().copied().unwrap_or_else(|| ta_de_params_default()).into();
        let result = run_attack(&s.0, &truth, &p.0, &params, &FitnessWeights::default(), seed).map_err(attack_err)?;
        write_out(out, to_c(serde_json::to_string(&result).map_err(json_err)?), "out")
    })
}
