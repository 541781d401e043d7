//! C ABI for `unifconserv`.
//!
//! Every fallible function returns a [`UcStatus`]; on failure the message
//! is available from [`uc_last_error_message`] on the same thread. Handles
//! are opaque and must be released with their `_free` function. Strings
//! returned through `char **` out-parameters are owned by the caller and
//! released with [`uc_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use unifconserv::agent::{run_agent, AgentKind, AgentRun, RunOptions};
use unifconserv::env::{build_inventory_mdp, warm_start_dataset, EnvSpec, InventoryParams};
use unifconserv::harness::{check_env, write_episode_csv};
use unifconserv::mdp::{exact_optimal, policy_gap, worst_case_diameter, TabularMdp, DEFAULT_HITTING_CAP};
use unifconserv::rng::seeded;
use unifconserv::shield::AgentConfig;
use unifconserv::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidModel = 3,
    DimensionMismatch = 4,
    InvalidAction = 5,
    Config = 6,
    Generation = 7,
    MetaEpisodeCap = 8,
    Assumption = 9,
    Io = 10,
    Json = 11,
    Csv = 12,
    OutOfRange = 13,
    Panic = 14,
}

impl From<&Error> for UcStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidModel(_) => UcStatus::InvalidModel,
            Error::Dimension(_) => UcStatus::DimensionMismatch,
            Error::InvalidAction { .. } => UcStatus::InvalidAction,
            Error::Config(_) => UcStatus::Config,
            Error::Generation(_) => UcStatus::Generation,
            Error::MetaEpisodeCap { .. } => UcStatus::MetaEpisodeCap,
            Error::Assumption(_) => UcStatus::Assumption,
            Error::Io { .. } => UcStatus::Io,
            Error::Json(_) => UcStatus::Json,
            Error::Csv(_) => UcStatus::Csv,
        }
    }
}

/// A tabular MDP.
pub struct UcMdp {
    inner: TabularMdp,
}

/// The log of one agent run.
pub struct UcRun {
    label: String,
    seed: u64,
    eta: f64,
    run: AgentRun,
}

/// One row of a run log.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UcEpisodeRecord {
    pub episode: usize,
    pub ret: f64,
    pub regret: f64,
    pub cum_regret: f64,
    pub violated: bool,
    pub max_deficit: f64,
    pub meta_index: usize,
    pub meta_episode_n: usize,
    pub ucb_steps: usize,
}

/// Totals over a run.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UcRunTotals {
    pub episodes: usize,
    pub violations: usize,
    pub cum_regret: f64,
    pub optimal_value: f64,
    pub meta_completed: usize,
    pub meta_malformed: usize,
    pub sandwich_failures: usize,
    pub max_zeta: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(status: UcStatus, msg: impl Into<String>) -> UcStatus {
    set_last_error(msg.into());
    status
}

fn guard<F: FnOnce() -> Result<(), UcStatus>>(f: F) -> UcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => UcStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(UcStatus::Panic, "internal panic"),
    }
}

fn lib_err(e: Error) -> UcStatus {
    let status = UcStatus::from(&e);
    fail(status, e.to_string())
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, UcStatus> {
    if p.is_null() {
        return Err(fail(UcStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(UcStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, UcStatus> {
    p.as_ref()
        .ok_or_else(|| fail(UcStatus::NullPointer, format!("{name} is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, UcStatus> {
    p.as_mut()
        .ok_or_else(|| fail(UcStatus::NullPointer, format!("{name} is null")))
}

fn to_c_string(s: String) -> Result<*mut c_char, UcStatus> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| fail(UcStatus::InvalidUtf8, "string contains a NUL byte"))
}

/// Message of the last failed call on this thread. Valid until the next
/// failing call on the same thread; empty if nothing failed yet.
#[no_mangle]
pub extern "C" fn uc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn uc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn uc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds an MDP from an environment spec (`{"kind": ...}`) or a tabular
/// MDP document.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn uc_mdp_from_json(json: *const c_char, out: *mut *mut UcMdp) -> UcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let text = str_arg(json, "json")?;
        let mdp = EnvSpec::from_json(text).and_then(|s| s.build()).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(UcMdp { inner: mdp }));
        Ok(())
    })
}

/// Builds the default inventory-control MDP.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn uc_mdp_inventory_default(out: *mut *mut UcMdp) -> UcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let mdp = build_inventory_mdp(&InventoryParams::default()).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(UcMdp { inner: mdp }));
        Ok(())
    })
}

/// # Safety
/// `mdp` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn uc_mdp_free(mdp: *mut UcMdp) {
    if !mdp.is_null() {
        drop(Box::from_raw(mdp));
    }
}

/// # Safety
/// `mdp` must be a live handle; the out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn uc_mdp_dims(
    mdp: *const UcMdp,
    num_states: *mut usize,
    num_actions: *mut usize,
    horizon: *mut usize,
) -> UcStatus {
    guard(|| {
        let m = &ref_arg(mdp, "mdp")?.inner;
        *out_arg(num_states, "num_states")? = m.num_states();
        *out_arg(num_actions, "num_actions")? = m.num_actions();
        *out_arg(horizon, "horizon")? = m.horizon();
        Ok(())
    })
}

/// Serializes the MDP in the tabular JSON format.
///
/// # Safety
/// `mdp` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn uc_mdp_to_json(mdp: *const UcMdp, out: *mut *mut c_char) -> UcStatus {
    guard(|| {
        let m = &ref_arg(mdp, "mdp")?.inner;
        let out = out_arg(out, "out")?;
        *out = to_c_string(m.to_json().map_err(lib_err)?)?;
        Ok(())
    })
}

/// Optimal value `V*` at step 0 from the initial state.
///
/// # Safety
/// `mdp` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn uc_mdp_optimal_value(mdp: *const UcMdp, out: *mut f64) -> UcStatus {
    guard(|| {
        let m = &ref_arg(mdp, "mdp")?.inner;
        let (v, _, _) = exact_optimal(m);
        *out_arg(out, "out")? = v.get(0, m.initial_state());
        Ok(())
    })
}

/// Worst-case diameter; `INFINITY` when some policy never reaches some
/// state.
///
/// # Safety
/// `mdp` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn uc_mdp_worst_case_diameter(mdp: *const UcMdp, out: *mut f64) -> UcStatus {
    guard(|| {
        let m = &ref_arg(mdp, "mdp")?.inner;
        *out_arg(out, "out")? = worst_case_diameter(m, DEFAULT_HITTING_CAP)
            .finite()
            .unwrap_or(f64::INFINITY);
        Ok(())
    })
}

/// `2 · max V − Q` of the optimal policy.
///
/// # Safety
/// `mdp` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn uc_mdp_eta_min(mdp: *const UcMdp, out: *mut f64) -> UcStatus {
    guard(|| {
        let m = &ref_arg(mdp, "mdp")?.inner;
        let (_, _, pi) = exact_optimal(m);
        *out_arg(out, "out")? = 2.0 * policy_gap(m, &pi).map_err(lib_err)?;
        Ok(())
    })
}

/// Full assumption-check report as JSON.
///
/// # Safety
/// `mdp` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn uc_check_env(
    mdp: *const UcMdp,
    eta: f64,
    random_policies: usize,
    seed: u64,
    out: *mut *mut c_char,
) -> UcStatus {
    guard(|| {
        let m = &ref_arg(mdp, "mdp")?.inner;
        let out = out_arg(out, "out")?;
        let report = check_env(m, eta, random_policies, seed).map_err(lib_err)?;
        let text = serde_json::to_string(&report).map_err(|e| lib_err(e.into()))?;
        *out = to_c_string(text)?;
        Ok(())
    })
}

/// Runs one agent for `total_episodes` episodes after a uniform-random
/// warm start of `warm_start_episodes`, seeded like an experiment cell.
///
/// `agent` is `"unif_conserv_ucbvi"`, `"ucbvi"` or `"baseline_only"`;
/// `config_json` is an agent configuration object or null for defaults.
/// `eta` overrides the configuration's budget.
///
/// # Safety
/// `mdp` must be a live handle, the strings NUL-terminated (or null for
/// `config_json`) and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn uc_run_agent(
    mdp: *const UcMdp,
    agent: *const c_char,
    config_json: *const c_char,
    eta: f64,
    total_episodes: usize,
    warm_start_episodes: usize,
    seed: u64,
    out: *mut *mut UcRun,
) -> UcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let m = &ref_arg(mdp, "mdp")?.inner;
        let label = str_arg(agent, "agent")?;
        let kind: AgentKind = label.parse().map_err(lib_err)?;
        let mut config = if config_json.is_null() {
            AgentConfig::default()
        } else {
            serde_json::from_str(str_arg(config_json, "config_json")?).map_err(|e| lib_err(e.into()))?
        };
        config.eta = eta;
        let warm = warm_start_dataset(m, warm_start_episodes, &mut seeded(seed, 0));
        let run = run_agent(kind, m, &config, &warm, &RunOptions::new(total_episodes), &mut seeded(seed, 1))
            .map_err(lib_err)?;
        *out = Box::into_raw(Box::new(UcRun {
            label: label.to_string(),
            seed,
            eta,
            run,
        }));
        Ok(())
    })
}

/// # Safety
/// `run` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn uc_run_free(run: *mut UcRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Number of episodes in the log; 0 for a null handle.
///
/// # Safety
/// `run` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn uc_run_len(run: *const UcRun) -> usize {
    run.as_ref().map_or(0, |r| r.run.records.len())
}

/// Copies row `index` (zero-based) into `out`.
///
/// # Safety
/// `run` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn uc_run_record(run: *const UcRun, index: usize, out: *mut UcEpisodeRecord) -> UcStatus {
    guard(|| {
        let r = ref_arg(run, "run")?;
        let rec = r.run.records.get(index).ok_or_else(|| {
            fail(
                UcStatus::OutOfRange,
                format!("record {index} out of range (len {})", r.run.records.len()),
            )
        })?;
        *out_arg(out, "out")? = UcEpisodeRecord {
            episode: rec.episode,
            ret: rec.ret,
            regret: rec.regret,
            cum_regret: rec.cum_regret,
            violated: rec.violated,
            max_deficit: rec.max_deficit,
            meta_index: rec.meta_index,
            meta_episode_n: rec.meta_episode_n,
            ucb_steps: rec.ucb_steps,
        };
        Ok(())
    })
}

/// # Safety
/// `run` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn uc_run_totals(run: *const UcRun, out: *mut UcRunTotals) -> UcStatus {
    guard(|| {
        let r = &ref_arg(run, "run")?.run;
        *out_arg(out, "out")? = UcRunTotals {
            episodes: r.records.len(),
            violations: r.stats.violations,
            cum_regret: r.cum_regret(),
            optimal_value: r.optimal_value,
            meta_completed: r.stats.meta_completed,
            meta_malformed: r.stats.meta_malformed,
            sandwich_failures: r.stats.sandwich_failures,
            max_zeta: r.stats.max_zeta,
        };
        Ok(())
    })
}

/// The log as CSV text with the experiment columns.
///
/// # Safety
/// `run` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn uc_run_to_csv(run: *const UcRun, out: *mut *mut c_char) -> UcStatus {
    guard(|| {
        let r = ref_arg(run, "run")?;
        let out = out_arg(out, "out")?;
        let mut buf = Vec::new();
        write_episode_csv(&mut buf, &r.label, r.seed, r.eta, &r.run.records).map_err(lib_err)?;
        *out = to_c_string(String::from_utf8(buf).expect("csv output is UTF-8"))?;
        Ok(())
    })
}
