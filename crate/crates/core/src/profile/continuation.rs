//! Natural-parameter continuation of profiles with step bisection.

use crate::error::{Error, Result};
use crate::model::ModelParams;

use super::{solve_profile, Guess, ProfileSolution, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationOptions {
    pub solver: SolverOptions,
    /// Number of times a failed step may be halved.
    pub max_bisections: usize,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self { solver: SolverOptions::default(), max_bisections: 8 }
    }
}

fn lerp(a: &ModelParams, b: &ModelParams, t: f64) -> ModelParams {
    let m = |x: f64, y: f64| x + t * (y - x);
    ModelParams {
        q: m(a.q, b.q),
        k: m(a.k, b.k),
        d: m(a.d, b.d),
        ea: m(a.ea, b.ea),
        u_plus: m(a.u_plus, b.u_plus),
        u_ig: m(a.u_ig, b.u_ig),
    }
}

/// Advance from a solved profile to `target`, halving the step on failure.
/// The error of the innermost failed solve is reported.
pub fn step_to(prev: &ProfileSolution, target: &ModelParams, opts: &ContinuationOptions) -> Result<ProfileSolution> {
    fn go(prev: &ProfileSolution, target: &ModelParams, depth: usize, opts: &ContinuationOptions) -> Result<ProfileSolution> {
        match solve_profile(target, Guess::Profile(prev), None, &opts.solver) {
            Ok(sol) => Ok(sol),
            Err(e @ (Error::BeyondCj { .. } | Error::InvalidParameter(_))) => Err(e),
            Err(e) if depth >= opts.max_bisections => Err(e),
            Err(_) => {
                let mid = lerp(&prev.params, target, 0.5);
                let mid_sol = go(prev, &mid, depth + 1, opts)?;
                go(&mid_sol, target, depth + 1, opts)
            }
        }
    }
    go(prev, target, 0, opts)
}

/// Profiles along a parameter path. The first point is solved from the
/// analytic seed; the run stops at the first point that cannot be reached.
#[derive(Debug)]
pub struct ContinuationRun {
    pub solutions: Vec<ProfileSolution>,
    /// Set when the path was cut short; wraps the failing solve.
    pub stopped: Option<Error>,
}

pub fn continue_profiles(path: &[ModelParams], opts: &ContinuationOptions) -> ContinuationRun {
    let mut solutions: Vec<ProfileSolution> = Vec::with_capacity(path.len());
    for (index, target) in path.iter().enumerate() {
        let attempt = match solutions.last() {
            None => solve_profile(target, Guess::Seed, None, &opts.solver),
            Some(prev) => step_to(prev, target, opts),
        };
        match attempt {
            Ok(sol) => solutions.push(sol),
            Err(e) => {
                let stopped = Error::ContinuationFrontier {
                    index,
                    last_good: solutions.last().map(|s| Box::new(s.params)),
                    source: Box::new(e),
                };
                return ContinuationRun { solutions, stopped: Some(stopped) };
            }
        }
    }
    ContinuationRun { solutions, stopped: None }
}
