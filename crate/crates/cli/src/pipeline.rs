use majda_core::model::{self, ModelParams};
use majda_core::profile::{continue_profiles, solve_profile, step_to, ContinuationOptions, Guess, ProfileSolution, SolverOptions};
use majda_core::spectral::{hf_bound, hf_bound_a_priori, HighFreqBound, ProfileSystem};
use majda_core::winding::{contour_winding_perturbed, stability_report, VerdictRecord, WindingOptions, WindingRun};
use majda_core::zero_ea::{solve_zero_ea_profile, JumpConvention, ZeroEaProfile, ZeroEaSystem};
use majda_core::Error;

use crate::config::ZERO_EA_RADIUS;
use crate::CliError;

/// Machine-readable reason for a library error.
pub fn reason_code(e: &Error) -> &'static str {
    match e {
        Error::InvalidParameter(_) => "invalid_parameter",
        Error::BeyondCj { .. } => "beyond_cj",
        Error::DegenerateLinearization(_) => "degenerate_linearization",
        Error::NoProfile { bench: Some(b), .. } if b.qualifies() => "bench",
        Error::NoProfile { .. } => "no_profile",
        Error::SlowDecay { .. } => "slow_decay",
        Error::ContinuationFrontier { source, .. } => reason_code(source),
        Error::FrameDegeneracy { .. } => "frame_degeneracy",
        Error::Stiffness { .. } => "stiffness",
        Error::UncertifiedWinding { .. } => "uncertified_winding",
        Error::NearZeroOnContour { .. } => "near_zero_on_contour",
        Error::NoConnection(_) => "no_connection",
        Error::FrontierNotBracketed { .. } => "frontier_not_bracketed",
        Error::Io(_) | Error::Json(_) | Error::Csv(_) => "io",
    }
}

pub fn cli_error(e: &Error) -> CliError {
    let code = reason_code(e);
    match code {
        "invalid_parameter" | "beyond_cj" => CliError::Validation(e.to_string()),
        "uncertified_winding" | "near_zero_on_contour" => CliError::Uncertified(e.to_string()),
        "io" => CliError::Io(e.to_string()),
        _ => CliError::Numerical { code, message: e.to_string() },
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        cli_error(&e)
    }
}

/// A solved traveling wave of either ignition type.
#[derive(Debug, Clone)]
pub enum Solved {
    Profile(ProfileSolution),
    ZeroEa(ZeroEaProfile),
}

impl Solved {
    pub fn params(&self) -> &ModelParams {
        match self {
            Solved::Profile(p) => &p.params,
            Solved::ZeroEa(z) => &z.params,
        }
    }
}

/// Profile at one point: from the analytic seed, or, failing that, by
/// continuation in `q` from the smallest grid value.
pub fn solve_point(p: &ModelParams) -> Result<ProfileSolution, Error> {
    let opts = SolverOptions::default();
    match solve_profile(p, Guess::Seed, None, &opts) {
        Ok(s) => Ok(s),
        Err(e @ (Error::InvalidParameter(_) | Error::BeyondCj { .. })) => Err(e),
        Err(first) => {
            let mut path: Vec<ModelParams> =
                model::q_grid(p.u_plus).into_iter().filter(|&q| q < p.q).map(|q| p.with_q(q)).collect();
            if path.is_empty() {
                return Err(first);
            }
            path.push(*p);
            let run = continue_profiles(&path, &ContinuationOptions::default());
            match run.stopped {
                None => Ok(run.solutions.into_iter().last().expect("nonempty path")),
                Some(e) => Err(e),
            }
        }
    }
}

/// Solve one point, continuing from `prev` when given; ea = 0 goes to the
/// Heaviside shooting solver.
pub fn solve(p: &ModelParams, prev: Option<&ProfileSolution>) -> Result<Solved, Error> {
    p.checked()?;
    if p.ea == 0.0 {
        return solve_zero_ea_profile(p).map(Solved::ZeroEa);
    }
    let sol = match prev {
        Some(prev) => step_to(prev, p, &ContinuationOptions::default()).or_else(|_| solve_point(p)),
        None => solve_point(p),
    }?;
    Ok(Solved::Profile(sol))
}

#[derive(Debug)]
pub struct Assessment {
    pub verdict: VerdictRecord,
    pub bound: Option<HighFreqBound>,
    pub run: Option<WindingRun>,
    /// Set when the radius exceeds the feasibility threshold and no
    /// contour was computed.
    pub infeasible: bool,
    /// Winding errors, recorded in the verdict note as well.
    pub error: Option<Error>,
}

pub fn exclusion_bound(s: &Solved) -> Option<HighFreqBound> {
    match s {
        Solved::Profile(p) => Some(hf_bound(p)),
        Solved::ZeroEa(_) => None,
    }
}

pub fn a_priori_bound(s: &Solved) -> Option<HighFreqBound> {
    hf_bound_a_priori(s.params())
}

/// Contour radius: the override, the exclusion radius, or the fixed
/// Heaviside radius.
pub fn contour_radius(bound: Option<&HighFreqBound>, radius: Option<f64>) -> f64 {
    radius.or(bound.map(|b| b.r)).unwrap_or(ZERO_EA_RADIUS)
}

/// Winding count on the contour and the resulting verdict.
pub fn assess(s: &Solved, radius: Option<f64>, nodes: usize, feasible: f64) -> Assessment {
    let bound = exclusion_bound(s);
    let r = contour_radius(bound.as_ref(), radius);
    let params = s.params();
    if r > feasible {
        let mut verdict = stability_report(
            params,
            bound.as_ref(),
            r,
            Err(&Error::InvalidParameter(format!("bound infeasible: R = {r:.3e} exceeds {feasible:.3e}"))),
        );
        verdict.note = Some(format!("bound infeasible: R = {r:.3e} exceeds {feasible:.3e}"));
        return Assessment { verdict, bound, run: None, infeasible: true, error: None };
    }
    let opts = WindingOptions { nodes, ..WindingOptions::default() };
    let run = match s {
        Solved::Profile(p) => contour_winding_perturbed(&ProfileSystem::new(p), r, &opts),
        Solved::ZeroEa(z) => {
            contour_winding_perturbed(&ZeroEaSystem { prof: z, convention: JumpConvention::default() }, r, &opts)
        }
    };
    match run {
        Ok(run) => {
            let verdict = stability_report(params, bound.as_ref(), run.radius, Ok(&run.result));
            Assessment { verdict, bound, run: Some(run), infeasible: false, error: None }
        }
        Err(e) => {
            let verdict = stability_report(params, bound.as_ref(), r, Err(&e));
            Assessment { verdict, bound, run: None, infeasible: false, error: Some(e) }
        }
    }
}
