//! The four batch commands. Every command writes its CSV tables plus one
//! JSON summary and returns the process exit code: 0 all-pass, 1 check
//! failure, 2 config error (handled by the caller), 3 runtime singularity.

use crate::config::{to_complex, CheckSpec, LoadedConfig};
use crate::logging::{log, Level};
use crate::output::{fmt, write_summary, CheckSummary, CsvTable, SummaryReport};
use kpcm::checks::{self, CheckParams, CheckReport};
use kpcm::cm;
use kpcm::flows::{self, HierarchyTimes};
use kpcm::kp::{self, FlowMatrixSet};
use kpcm::{backlund, Complex64};
use std::path::Path;

pub const EXIT_OK: u8 = 0;
pub const EXIT_CHECK_FAILURE: u8 = 1;
pub const EXIT_CONFIG_ERROR: u8 = 2;
pub const EXIT_RUNTIME_SINGULARITY: u8 = 3;

fn io_fail(e: std::io::Error) -> u8 {
    eprintln!("io error: {e}");
    EXIT_CONFIG_ERROR
}

fn complex_cols(prefix: &str, n: usize) -> Vec<String> {
    let mut cols = Vec::new();
    for part in ["re", "im"] {
        for i in 1..=n {
            cols.push(format!("{part}_{prefix}{i}"));
        }
    }
    cols
}

/// Integrate each configured flow from the initial state and write one
/// trajectory table per flow.
pub fn simulate(loaded: &LoadedConfig, out: &Path, seed: u64) -> u8 {
    let n = loaded.state.n();
    let mut outputs = Vec::new();
    let mut status = EXIT_OK;

    let h0: Vec<Complex64> = (1..=n as u32)
        .map(|k| cm::hamiltonian_trace(&loaded.state, k))
        .collect();

    for flow in &loaded.config.flows {
        log(Level::Info, &format!("simulate: flow m={} to t={}", flow.m, flow.t));
        let mut header: Vec<String> = vec!["t".into()];
        header.extend(complex_cols("x", n));
        header.extend(complex_cols("p", n));
        for k in 1..=n {
            header.push(format!("drift_h{k}"));
        }
        let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
        let mut table = CsvTable::new(
            out,
            &format!("flow_m{}.csv", flow.m),
            &loaded.digest,
            &header_refs,
        );

        let (traj, err) = flows::integrate_partial(&loaded.state, flow.m, flow.t, flow.rtol);
        for (t, state) in &traj.samples {
            let mut row = vec![fmt(*t)];
            row.extend(state.x().iter().map(|c| fmt(c.re)));
            row.extend(state.x().iter().map(|c| fmt(c.im)));
            row.extend(state.p().iter().map(|c| fmt(c.re)));
            row.extend(state.p().iter().map(|c| fmt(c.im)));
            for (k, h) in h0.iter().enumerate() {
                let drift = (cm::hamiltonian_trace(state, k as u32 + 1) - h).norm();
                row.push(fmt(drift));
            }
            table.row(&row);
        }
        if let Some(e) = err {
            let (t_last, _) = traj.samples.last().expect("at least the initial sample");
            table.comment(&format!("aborted at t={}: {e}", fmt(*t_last)));
            status = if e.is_runtime_singularity() {
                EXIT_RUNTIME_SINGULARITY
            } else {
                EXIT_CONFIG_ERROR
            };
        }
        match table.write() {
            Ok(path) => outputs.push(path.display().to_string()),
            Err(e) => return io_fail(e),
        }
        if status != EXIT_OK {
            break;
        }
    }

    let summary = SummaryReport {
        command: "simulate".into(),
        config_digest: loaded.digest.clone(),
        seed,
        status: status_name(status),
        outputs,
        checks: Vec::new(),
    };
    if let Err(e) = write_summary(out, &summary) {
        return io_fail(e);
    }
    status
}

fn status_name(code: u8) -> String {
    match code {
        EXIT_OK => "ok".into(),
        EXIT_CHECK_FAILURE => "check_failure".into(),
        EXIT_RUNTIME_SINGULARITY => "runtime_singularity".into(),
        _ => "config_error".into(),
    }
}

/// Run the configured checks (all registered ones when the list is empty)
/// over seeded ensembles, optionally across `jobs` worker threads; report
/// assembly stays order-stable regardless of scheduling.
pub fn verify(loaded: &LoadedConfig, out: &Path, seed: u64, jobs: usize) -> u8 {
    let specs: Vec<CheckSpec> = if loaded.config.checks.is_empty() {
        checks::CHECK_NAMES
            .iter()
            .map(|&name| CheckSpec {
                name: name.to_string(),
                tolerance: None,
            })
            .collect()
    } else {
        loaded.config.checks.clone()
    };

    let run_one = |spec: &CheckSpec| -> Result<CheckReport, kpcm::Error> {
        log(Level::Debug, &format!("verify: running {}", spec.name));
        checks::run_check(
            &spec.name,
            &CheckParams {
                seed,
                tolerance: spec.tolerance,
            },
        )
    };

    let results: Vec<Result<CheckReport, kpcm::Error>> = if jobs <= 1 {
        specs.iter().map(run_one).collect()
    } else {
        let mut out: Vec<Option<Result<CheckReport, kpcm::Error>>> =
            (0..specs.len()).map(|_| None).collect();
        let next = std::sync::atomic::AtomicUsize::new(0);
        let slots: Vec<std::sync::Mutex<&mut Option<Result<CheckReport, kpcm::Error>>>> =
            out.iter_mut().map(std::sync::Mutex::new).collect();
        std::thread::scope(|scope| {
            for _ in 0..jobs.min(specs.len()) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                    if i >= specs.len() {
                        break;
                    }
                    let result = run_one(&specs[i]);
                    **slots[i].lock().unwrap() = Some(result);
                });
            }
        });
        out.into_iter().map(|r| r.expect("every slot filled")).collect()
    };

    let mut reports = Vec::new();
    for (spec, result) in specs.iter().zip(results) {
        match result {
            Ok(report) => reports.push(report),
            Err(e) => {
                eprintln!("check {} failed to run: {e}", spec.name);
                return if e.is_runtime_singularity() {
                    EXIT_RUNTIME_SINGULARITY
                } else {
                    EXIT_CONFIG_ERROR
                };
            }
        }
    }
    // order-stable output regardless of scheduling: sorted by check name
    reports.sort_by(|a, b| a.name.cmp(&b.name));

    let mut table = CsvTable::new(
        out,
        "verify.csv",
        &loaded.digest,
        &["check", "status", "defect", "tolerance"],
    );
    for r in &reports {
        table.row(&[
            r.name.clone(),
            if r.pass { "pass".into() } else { "fail".into() },
            fmt(r.defect),
            fmt(r.tolerance),
        ]);
    }
    let mut outputs = Vec::new();
    match table.write() {
        Ok(path) => outputs.push(path.display().to_string()),
        Err(e) => return io_fail(e),
    }

    let all_pass = reports.iter().all(|r| r.pass);
    let status = if all_pass { EXIT_OK } else { EXIT_CHECK_FAILURE };
    let summary = SummaryReport {
        command: "verify".into(),
        config_digest: loaded.digest.clone(),
        seed,
        status: status_name(status),
        outputs,
        checks: reports
            .iter()
            .map(|r| CheckSummary {
                name: r.name.clone(),
                status: if r.pass { "pass".into() } else { "fail".into() },
                defect: r.defect,
                tolerance: r.tolerance,
                wall_seconds: r.wall_seconds,
            })
            .collect(),
    };
    if let Err(e) = write_summary(out, &summary) {
        return io_fail(e);
    }
    for r in &reports {
        println!(
            "{:14} {} defect={} tolerance={}",
            r.name,
            if r.pass { "pass" } else { "FAIL" },
            fmt(r.defect),
            fmt(r.tolerance)
        );
    }
    status
}

/// Integrated pole positions vs determinant-route poles at matched times.
pub fn tau_compare(loaded: &LoadedConfig, out: &Path, seed: u64) -> u8 {
    let mut outputs = Vec::new();
    let mut status = EXIT_OK;
    let fm = FlowMatrixSet::new(&loaded.state, 8);

    for flow in &loaded.config.flows {
        log(Level::Info, &format!("tau-compare: flow m={}", flow.m));
        let mut table = CsvTable::new(
            out,
            &format!("tau_compare_m{}.csv", flow.m),
            &loaded.digest,
            &["t", "max_deviation"],
        );
        let (traj, err) = flows::integrate_partial(&loaded.state, flow.m, flow.t, flow.rtol);
        if let Some(e) = err {
            let (t_last, _) = traj.samples.last().expect("initial sample");
            table.comment(&format!("aborted at t={}: {e}", fmt(*t_last)));
            status = if e.is_runtime_singularity() {
                EXIT_RUNTIME_SINGULARITY
            } else {
                EXIT_CONFIG_ERROR
            };
        } else {
            // at most 11 evenly spaced rows, endpoints included
            let count = traj.samples.len();
            let rows = 11.min(count);
            let mut last_err = None;
            for r in 0..rows {
                let idx = if rows == 1 { 0 } else { r * (count - 1) / (rows - 1) };
                let (t, state) = &traj.samples[idx];
                let times = match HierarchyTimes::from_pairs([(flow.m, *t)]) {
                    Ok(v) => v,
                    Err(e) => {
                        last_err = Some(e);
                        break;
                    }
                };
                match kp::poles_continuing(&fm, &times, state.x()) {
                    Ok(poles) => {
                        let mut dev = 0.0f64;
                        for i in 0..state.n() {
                            dev = dev.max((poles[i] - state.x()[i]).norm());
                        }
                        table.row(&[fmt(*t), fmt(dev)]);
                    }
                    Err(e) => {
                        last_err = Some(e);
                        break;
                    }
                }
            }
            if let Some(e) = last_err {
                table.comment(&format!("pole extraction failed: {e}"));
                status = if e.is_runtime_singularity() {
                    EXIT_RUNTIME_SINGULARITY
                } else {
                    EXIT_CONFIG_ERROR
                };
            }
        }
        match table.write() {
            Ok(path) => outputs.push(path.display().to_string()),
            Err(e) => return io_fail(e),
        }
        if status != EXIT_OK {
            break;
        }
    }

    let summary = SummaryReport {
        command: "tau-compare".into(),
        config_digest: loaded.digest.clone(),
        seed,
        status: status_name(status),
        outputs,
        checks: Vec::new(),
    };
    if let Err(e) = write_summary(out, &summary) {
        return io_fail(e);
    }
    status
}

/// Bäcklund table: one row per configured μ with Newton iterations,
/// canonical defect and the truncated-expansion defects for K = 1..3.
pub fn backlund_cmd(loaded: &LoadedConfig, out: &Path, seed: u64) -> u8 {
    let mut table = CsvTable::new(
        out,
        "backlund.csv",
        &loaded.digest,
        &[
            "re_mu",
            "im_mu",
            "status",
            "iterations",
            "canonical_defect",
            "expansion_k1",
            "expansion_k2",
            "expansion_k3",
        ],
    );
    let tol = loaded.config.backlund_tolerance;
    let mut all_pass = true;

    for &mu_pair in &loaded.config.mus {
        let mu = to_complex(mu_pair);
        log(Level::Info, &format!("backlund: mu = {mu}"));
        let row = backlund_row(&loaded.state, mu, tol);
        match row {
            Ok((pass, fields)) => {
                all_pass &= pass;
                let mut cols = vec![fmt(mu.re), fmt(mu.im)];
                cols.extend(fields);
                table.row(&cols);
            }
            Err(e) => {
                all_pass = false;
                table.row(&[
                    fmt(mu.re),
                    fmt(mu.im),
                    format!("error: {e}"),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                ]);
            }
        }
    }

    let mut outputs = Vec::new();
    match table.write() {
        Ok(path) => outputs.push(path.display().to_string()),
        Err(e) => return io_fail(e),
    }
    let status = if all_pass { EXIT_OK } else { EXIT_CHECK_FAILURE };
    let summary = SummaryReport {
        command: "backlund".into(),
        config_digest: loaded.digest.clone(),
        seed,
        status: status_name(status),
        outputs,
        checks: Vec::new(),
    };
    if let Err(e) = write_summary(out, &summary) {
        return io_fail(e);
    }
    status
}

fn backlund_row(
    state: &kpcm::cm::PhaseState,
    mu: Complex64,
    tol: f64,
) -> kpcm::Result<(bool, Vec<String>)> {
    let pair = backlund::transform(state, mu)?;
    let canonical = backlund::canonical_defect(&pair)?;
    let mut fields = Vec::new();
    let pass = canonical <= tol;
    fields.push(if pass { "pass".to_string() } else { "fail".to_string() });
    fields.push(pair.iterations.to_string());
    fields.push(fmt(canonical));
    for k in 1..=3u32 {
        fields.push(fmt(backlund::expansion_defect(state, mu, k)?));
    }
    Ok((pass, fields))
}
