use std::collections::BTreeMap;
use std::time::Instant;

use majda_core::model::{self, ModelParams};
use majda_core::profile::ProfileSolution;
use majda_core::winding::{Verdict, VerdictRecord};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Family, SweepConfig};
use crate::pipeline::{a_priori_bound, assess, reason_code, solve, Solved};

pub const LEDGER_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Done,
    Skipped,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileQuality {
    pub residual_norm: f64,
    pub endpoint_error: f64,
    pub node_count: usize,
    pub spike_height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRecord {
    pub index: usize,
    pub family: usize,
    pub params: ModelParams,
    pub status: Status,
    pub reason: Option<String>,
    pub message: Option<String>,
    /// `None` for the Heaviside limit, whose profile is semi-explicit.
    pub profile: Option<ProfileQuality>,
    #[serde(rename = "L")]
    pub l: Option<f64>,
    #[serde(rename = "M")]
    pub m: Option<f64>,
    #[serde(rename = "R")]
    pub r: Option<f64>,
    pub a_priori_r: Option<f64>,
    pub winding: Option<i64>,
    pub verdict: Option<VerdictRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerSummary {
    pub total: usize,
    pub done: usize,
    pub skipped: usize,
    pub failed: usize,
    pub skipped_fraction: f64,
    pub stable: usize,
    pub unstable: usize,
    pub inconclusive: usize,
    /// Skip and failure counts by reason code.
    pub reasons: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepLedger {
    pub schema_version: u32,
    pub records: Vec<LedgerRecord>,
    pub summary: LedgerSummary,
}

/// Wall time of one point, kept apart so the ledger is reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Timing {
    pub index: usize,
    pub wall_s: f64,
}

fn record(index: usize, family: usize, params: ModelParams) -> LedgerRecord {
    LedgerRecord {
        index,
        family,
        params,
        status: Status::Failed,
        reason: None,
        message: None,
        profile: None,
        l: None,
        m: None,
        r: None,
        a_priori_r: None,
        winding: None,
        verdict: None,
    }
}

/// Skipped points are impractical rather than broken: invalid parameters,
/// tails too slow for the domain cap, or a radius beyond the threshold.
fn is_skip(code: &str) -> bool {
    matches!(code, "invalid_parameter" | "beyond_cj" | "slow_decay" | "bound_infeasible")
}

fn run_point(
    cfg: &SweepConfig,
    index: usize,
    family: usize,
    p: &ModelParams,
    prev: Option<&ProfileSolution>,
) -> (LedgerRecord, Option<ProfileSolution>) {
    let mut rec = record(index, family, *p);
    let diag = model::validate(p);
    if !diag.valid {
        rec.status = Status::Skipped;
        rec.reason = Some(if p.q > model::q_max(p.u_plus) { "beyond_cj" } else { "invalid_parameter" }.into());
        rec.message = Some(diag.failures.join("; "));
        return (rec, None);
    }
    let solved = match solve(p, prev) {
        Ok(s) => s,
        Err(e) => {
            let code = reason_code(&e);
            rec.status = if is_skip(code) { Status::Skipped } else { Status::Failed };
            rec.reason = Some(code.into());
            rec.message = Some(e.to_string());
            return (rec, None);
        }
    };
    if let Solved::Profile(s) = &solved {
        rec.profile = Some(ProfileQuality {
            residual_norm: s.residual_norm,
            endpoint_error: s.endpoint_error,
            node_count: s.len(),
            spike_height: s.spike_height(),
        });
    }
    rec.a_priori_r = a_priori_bound(&solved).map(|b| b.r);
    let a = assess(&solved, cfg.radius, cfg.nodes, cfg.feasible_radius);
    if let Some(b) = &a.bound {
        rec.l = Some(b.l);
        rec.m = Some(b.m);
    }
    rec.r = Some(a.verdict.radius);
    rec.winding = a.verdict.winding;
    if a.infeasible {
        rec.status = Status::Skipped;
        rec.reason = Some("bound_infeasible".into());
        rec.message = a.verdict.note.clone();
    } else if let Some(e) = &a.error {
        rec.status = Status::Failed;
        rec.reason = Some(reason_code(e).into());
        rec.message = Some(e.to_string());
    } else if !a.verdict.certified {
        rec.status = Status::Failed;
        rec.reason = Some("uncertified_winding".into());
    } else {
        rec.status = Status::Done;
    }
    rec.verdict = Some(a.verdict);
    let prof = match solved {
        Solved::Profile(s) => Some(s),
        Solved::ZeroEa(_) => None,
    };
    (rec, prof)
}

/// One family in continuation order. Each `ea` block starts from the first
/// profile of the previous block.
fn run_family(cfg: &SweepConfig, fam: &Family, family: usize, first_index: usize) -> Vec<(LedgerRecord, Timing)> {
    let points = cfg.family_points(fam);
    let mut out = Vec::with_capacity(points.len());
    let mut anchor: Option<ProfileSolution> = None;
    let mut block_first: Option<ProfileSolution> = None;
    let mut prev: Option<ProfileSolution> = None;
    let mut block_ea = f64::NAN;
    for (j, p) in points.iter().enumerate() {
        if p.ea != block_ea {
            block_ea = p.ea;
            if block_first.is_some() {
                anchor = block_first.take();
            }
            prev = anchor.clone();
        }
        let t = Instant::now();
        let (rec, sol) = run_point(cfg, first_index + j, family, p, prev.as_ref());
        let timing = Timing { index: rec.index, wall_s: t.elapsed().as_secs_f64() };
        if let Some(s) = sol {
            if block_first.is_none() {
                block_first = Some(s.clone());
            }
            prev = Some(s);
        }
        out.push((rec, timing));
    }
    out
}

pub fn summarize(records: &[LedgerRecord]) -> LedgerSummary {
    let count = |s: Status| records.iter().filter(|r| r.status == s).count();
    let verdicts = |v: Verdict| {
        records
            .iter()
            .filter(|r| r.status == Status::Done && r.verdict.as_ref().is_some_and(|x| x.verdict == v))
            .count()
    };
    let mut reasons = BTreeMap::new();
    for r in records {
        if let Some(code) = &r.reason {
            *reasons.entry(code.clone()).or_insert(0) += 1;
        }
    }
    let total = records.len();
    let skipped = count(Status::Skipped);
    LedgerSummary {
        total,
        done: count(Status::Done),
        skipped,
        failed: count(Status::Failed),
        skipped_fraction: if total == 0 { 0.0 } else { skipped as f64 / total as f64 },
        stable: verdicts(Verdict::Stable),
        unstable: verdicts(Verdict::Unstable),
        inconclusive: verdicts(Verdict::Inconclusive),
        reasons,
    }
}

/// Run every family, in parallel on the current rayon pool, and assemble
/// the ledger in grid order.
pub fn run_sweep(cfg: &SweepConfig) -> (SweepLedger, Vec<Timing>) {
    let fams = cfg.families();
    let mut starts = Vec::with_capacity(fams.len());
    let mut next = 0;
    for f in &fams {
        starts.push(next);
        next += cfg.family_points(f).len();
    }
    let per_family: Vec<Vec<(LedgerRecord, Timing)>> =
        fams.par_iter().enumerate().map(|(i, f)| run_family(cfg, f, i, starts[i])).collect();
    let (mut records, mut timings): (Vec<_>, Vec<_>) = per_family.into_iter().flatten().unzip();
    records.sort_by_key(|r| r.index);
    timings.sort_by_key(|t| t.index);
    let summary = summarize(&records);
    (SweepLedger { schema_version: LEDGER_SCHEMA_VERSION, records, summary }, timings)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_partitions_records() {
        let p = ModelParams::default();
        let mut a = record(0, 0, p);
        a.status = Status::Done;
        let mut b = record(1, 0, p);
        b.status = Status::Skipped;
        b.reason = Some("slow_decay".into());
        let mut c = record(2, 0, p);
        c.reason = Some("no_profile".into());
        let s = summarize(&[a, b, c]);
        assert_eq!((s.total, s.done, s.skipped, s.failed), (3, 1, 1, 1));
        assert_eq!(s.reasons.get("slow_decay"), Some(&1));
        assert!((s.skipped_fraction - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_points_are_skipped_before_solving() {
        let cfg: SweepConfig = serde_json::from_str(r#"{"ea": [1], "q": [0.6, -0.1]}"#).unwrap();
        let (ledger, timings) = run_sweep(&cfg);
        assert_eq!(ledger.summary.skipped, 2);
        assert_eq!(timings.len(), 2);
        assert_eq!(ledger.records[0].reason.as_deref(), Some("invalid_parameter"));
        assert_eq!(ledger.records[1].reason.as_deref(), Some("beyond_cj"));
    }
}
