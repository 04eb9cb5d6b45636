//! The four verbs: sweep, table, verify and eval.

use std::fmt::Write as _;

use anyhow::Result;
use mdi_keyrate::decoy_algebra::{coefficient_sets, CoefficientSet, IntensityLadder};
use mdi_keyrate::optimizer::{optimize_channel, Candidate, SearchSpace};
use mdi_keyrate::oracle::{dominance_suite_with, identity_suite_with};
use mdi_keyrate::{evaluate, KeyRateReport};
use rayon::prelude::*;

use crate::output::{fmt_f64, fmt_list, provenance};
use crate::scenario::Scenario;

/// One optimised grid point.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub distance_km: f64,
    pub candidate: Option<Candidate>,
    pub report: Option<KeyRateReport>,
    /// why the point has no key, if it has none
    pub reason: Option<String>,
}

impl SweepRow {
    pub fn rate(&self) -> f64 {
        self.report.as_ref().map_or(0.0, |r| r.rate)
    }

    fn failed(distance_km: f64, reason: String) -> Self {
        Self {
            distance_km,
            candidate: None,
            report: None,
            reason: Some(reason),
        }
    }
}

/// Optimises one distance with the scenario's settings and search space.
pub fn sweep_point(scenario: &Scenario, space: &SearchSpace, distance_km: f64) -> SweepRow {
    let channel = scenario.channel_at(distance_km);
    let result = optimize_channel(&channel, &scenario.settings, space, &scenario.config);
    match result {
        Ok(p) => {
            let reason = match &p.report {
                None => Some("no feasible parameters found".to_string()),
                Some(r) if r.rate <= 0.0 => r
                    .reason
                    .clone()
                    .or_else(|| Some("no positive key rate".to_string())),
                Some(r) => r.reason.clone(),
            };
            SweepRow {
                distance_km,
                candidate: p.candidate,
                report: p.report,
                reason,
            }
        }
        Err(e) => SweepRow::failed(distance_km, e.to_string()),
    }
}

/// Optimises every grid point (in parallel) and returns rows in grid order.
pub fn run_sweep(scenario: &Scenario, distances: &[f64]) -> Vec<SweepRow> {
    distances
        .par_iter()
        .map(|&d| sweep_point(scenario, &scenario.space, d))
        .collect()
}

pub const SWEEP_HEADER: &str =
    "L_km,rate,form,method,chi,eps_sec,e_p,e11,p_Z,mu_X,p_X,mu_Z,p_Z_cond,reason";

pub fn sweep_csv(scenario: &Scenario, rows: &[SweepRow]) -> String {
    let mut out = provenance(scenario, "sweep");
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&sweep_line(row));
        out.push('\n');
    }
    out
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn sweep_line(row: &SweepRow) -> String {
    let r = row.report.as_ref();
    let winner = r.filter(|r| r.rate > 0.0);
    let c = row.candidate.as_ref();
    let fields = [
        fmt_f64(row.distance_km),
        fmt_f64(row.rate()),
        opt(winner.and_then(|r| r.form)),
        opt(winner.and_then(|r| r.method)),
        opt(winner.and_then(|r| r.chi)),
        opt(winner.and_then(|r| r.eps_sec).map(fmt_f64)),
        opt(winner.and_then(|r| r.e_p).map(fmt_f64)),
        opt(winner.and_then(|r| r.e11).map(fmt_f64)),
        opt(c.map(|c| fmt_f64(c.basis_z))),
        opt(c.map(|c| fmt_list(&c.mu_x))),
        opt(c.map(|c| fmt_list(&c.p_x))),
        opt(c.map(|c| fmt_list(&c.mu_z))),
        opt(c.map(|c| fmt_list(&c.p_z))),
        row.reason.clone().unwrap_or_default().replace([',', '\n'], ";"),
    ];
    fields.join(",")
}

/// Table I/II layout: one row per search space, one column per distance.
pub fn run_table(scenario: &Scenario, spaces: &[SearchSpace], distances: &[f64]) -> Vec<Vec<f64>> {
    let jobs: Vec<(usize, f64)> = (0..spaces.len())
        .flat_map(|s| distances.iter().map(move |&d| (s, d)))
        .collect();
    let rates: Vec<f64> = jobs
        .par_iter()
        .map(|&(s, d)| sweep_point(scenario, &spaces[s], d).rate())
        .collect();
    if distances.is_empty() {
        return vec![Vec::new(); spaces.len()];
    }
    rates.chunks(distances.len()).map(|c| c.to_vec()).collect()
}

pub fn table_csv(
    scenario: &Scenario,
    spaces: &[SearchSpace],
    distances: &[f64],
    rates: &[Vec<f64>],
) -> String {
    let mut out = provenance(scenario, "table");
    out.push_str("config");
    for d in distances {
        let _ = write!(out, ",L={}", fmt_f64(*d));
    }
    out.push('\n');
    if distances.is_empty() {
        return out;
    }
    for (space, row) in spaces.iter().zip(rates) {
        out.push_str(&space.label());
        for r in row {
            out.push(',');
            out.push_str(&fmt_f64(*r));
        }
        out.push('\n');
    }
    out
}

/// Outcome of the verify verb.
#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    pub passed: bool,
    pub text: String,
}

/// Identity ladders drawn per `k` for a verify run of size `n`.
pub fn identity_ladders_per_k(n: usize) -> usize {
    n.min(200)
}

pub fn run_verify(seed: u64, n: usize) -> VerifyOutcome {
    run_verify_with(seed, n, &coefficient_sets)
}

/// Verify with a substitute coefficient builder.
pub fn run_verify_with(
    seed: u64,
    n: usize,
    coeffs: &dyn Fn(&IntensityLadder) -> mdi_keyrate::Result<CoefficientSet>,
) -> VerifyOutcome {
    let ident = identity_suite_with(identity_ladders_per_k(n), seed, coeffs);
    let dom = dominance_suite_with(n, seed, coeffs);
    let text = format!("{ident}\n{dom}\n");
    VerifyOutcome {
        passed: ident.passed() && dom.passed(),
        text,
    }
}

/// Single evaluation at explicit parameters.
pub fn run_eval(scenario: &Scenario, candidate: &Candidate, distance_km: f64) -> Result<SweepRow> {
    let protocol = candidate.protocol()?;
    let report = evaluate(&protocol, &scenario.channel_at(distance_km), &scenario.settings)?;
    let reason = report.reason.clone();
    Ok(SweepRow {
        distance_km,
        candidate: Some(candidate.clone()),
        report: Some(report),
        reason,
    })
}
