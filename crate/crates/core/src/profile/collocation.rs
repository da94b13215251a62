//! Hermite-Simpson collocation for the traveling-wave boundary-value problem
//! with projective end conditions, a phase condition at `x = 0`, residual
//! driven mesh refinement and automatic domain extension.

use crate::error::{Error, Result};
use crate::linalg::BandMatrix;
use crate::model::{self, ModelParams};

use super::{
    detect_bench, detect_dwell, end_linearizations, hermite, DecayFit, EndLinearization, ProfileSolution,
    SolveStats, TwState, TwSystem,
};

/// Tolerances and limits of the profile solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Target for the max residual `|S' - F(S)|` of the C1 interpolant.
    pub residual_tol: f64,
    /// Target for the distance of the endpoint states to the end states.
    pub endpoint_tol: f64,
    /// Hard cap on `|x_minus|` and `x_plus`.
    pub x_cap: f64,
    /// Newton stops once the max-norm update falls below this.
    pub newton_tol: f64,
    pub max_newton: usize,
    pub max_mesh_rounds: usize,
    pub max_nodes: usize,
    /// Initial half-widths are `ln(1/initial_decay) / rate`.
    pub initial_decay: f64,
    /// Largest mesh spacing of freshly built grids.
    pub h_max: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            residual_tol: 1e-8,
            endpoint_tol: 1e-3,
            x_cap: 5000.0,
            newton_tol: 1e-11,
            max_newton: 40,
            max_mesh_rounds: 16,
            max_nodes: 400_000,
            initial_decay: 1e-6,
            h_max: 1.0,
        }
    }
}

/// Initial iterate for [`solve_profile`].
#[derive(Debug, Clone, Copy)]
pub enum Guess<'a> {
    /// Tanh-shaped interpolant between the end states.
    Seed,
    /// A previously solved profile, shifted to the new burned state.
    Profile(&'a ProfileSolution),
}

/// Tanh seed: `u` follows a viscous Burgers shock between `u_minus` and
/// `u_plus`, shifted so that `u(0) = u_ig`; `z = (1 + tanh x) / 2`.
pub fn analytic_seed(p: &ModelParams, x: f64) -> Result<TwState> {
    let ends = model::burned_states(p)?;
    let um = ends.u_minus_strong;
    let c = 0.5 * (um + p.u_plus);
    let a = 0.5 * (um - p.u_plus);
    let sigma = 0.5 * a;
    let r = ((p.u_ig - c) / a).clamp(-0.999, 0.999);
    let x0 = r.atanh() / sigma;
    let u = c - a * (sigma * (x - x0)).tanh();
    let t = x.tanh();
    Ok(TwState::new(u, 0.5 * (1.0 + t), 0.5 * (1.0 - t * t)))
}

struct Problem {
    sys: TwSystem,
    left_normal: [f64; 3],
    right_normal: [f64; 3],
    left_state: [f64; 3],
    right_state: [f64; 3],
}

impl Problem {
    fn new(p: &ModelParams) -> Result<(Self, EndLinearization, EndLinearization)> {
        let sys = TwSystem::new(p)?;
        let (burned, unburned) = end_linearizations(p)?;
        let prob = Self {
            sys,
            left_normal: burned.boundary_normal(),
            right_normal: unburned.boundary_normal(),
            left_state: sys.burned().to_array(),
            right_state: sys.unburned().to_array(),
        };
        Ok((prob, burned, unburned))
    }

    fn f(&self, u: &[f64]) -> [f64; 3] {
        self.sys.rhs(TwState::new(u[0], u[1], u[2])).to_array()
    }

    fn jac(&self, u: &[f64]) -> [[f64; 3]; 3] {
        self.sys.jacobian(TwState::new(u[0], u[1], u[2]))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn row_of(i: usize, k0: usize) -> usize {
    1 + 3 * i + usize::from(i >= k0)
}

/// Residual vector, and the banded Jacobian when requested.
fn assemble(
    prob: &Problem,
    grid: &[f64],
    k0: usize,
    x: &[f64],
    with_jacobian: bool,
) -> (Vec<f64>, Option<BandMatrix>) {
    let n = grid.len();
    let dim = 3 * n;
    let mut g = vec![0.0; dim];
    let mut jm = with_jacobian.then(|| BandMatrix::zeros(dim, 4, 4));

    let fs: Vec<[f64; 3]> = (0..n).map(|i| prob.f(&x[3 * i..3 * i + 3])).collect();
    let js: Vec<[[f64; 3]; 3]> = if with_jacobian {
        (0..n).map(|i| prob.jac(&x[3 * i..3 * i + 3])).collect()
    } else {
        Vec::new()
    };

    let l0: Vec<f64> = (0..3).map(|c| x[c] - prob.left_state[c]).collect();
    g[0] = dot(&prob.left_normal, &l0);
    let last = 3 * (n - 1);
    let r0: Vec<f64> = (0..3).map(|c| x[last + c] - prob.right_state[c]).collect();
    g[dim - 1] = dot(&prob.right_normal, &r0);
    g[1 + 3 * k0] = x[3 * k0] - prob.sys.params.u_ig;
    if let Some(m) = jm.as_mut() {
        for c in 0..3 {
            m.set(0, c, prob.left_normal[c]);
            m.set(dim - 1, last + c, prob.right_normal[c]);
        }
        m.set(1 + 3 * k0, 3 * k0, 1.0);
    }

    for i in 0..n - 1 {
        let h = grid[i + 1] - grid[i];
        let ui = &x[3 * i..3 * i + 3];
        let uj = &x[3 * i + 3..3 * i + 6];
        let (fi, fj) = (fs[i], fs[i + 1]);
        let mut um = [0.0; 3];
        for c in 0..3 {
            um[c] = 0.5 * (ui[c] + uj[c]) + h / 8.0 * (fi[c] - fj[c]);
        }
        let fm = prob.f(&um);
        let row = row_of(i, k0);
        for c in 0..3 {
            g[row + c] = uj[c] - ui[c] - h / 6.0 * (fi[c] + 4.0 * fm[c] + fj[c]);
        }
        if let Some(m) = jm.as_mut() {
            let jmid = prob.jac(&um);
            let (ji, jj) = (&js[i], &js[i + 1]);
            for r in 0..3 {
                for c in 0..3 {
                    let eye = if r == c { 1.0 } else { 0.0 };
                    // Jm * dUm/dUi and Jm * dUm/dUj
                    let mut a = 0.0;
                    let mut b = 0.0;
                    for s in 0..3 {
                        let e = if s == c { 1.0 } else { 0.0 };
                        a += jmid[r][s] * (0.5 * e + h / 8.0 * ji[s][c]);
                        b += jmid[r][s] * (0.5 * e - h / 8.0 * jj[s][c]);
                    }
                    m.set(row + r, 3 * i + c, -eye - h / 6.0 * (ji[r][c] + 4.0 * a));
                    m.set(row + r, 3 * i + 3 + c, eye - h / 6.0 * (jj[r][c] + 4.0 * b));
                }
            }
        }
    }
    (g, jm)
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

enum NewtonOutcome {
    Converged(usize),
    Failed(String),
}

/// Damped Newton with an Armijo test on the Euclidean residual norm.
fn newton(prob: &Problem, grid: &[f64], k0: usize, x: &mut [f64], opts: &SolverOptions) -> NewtonOutcome {
    for it in 1..=opts.max_newton {
        let (g, jm) = assemble(prob, grid, k0, x, true);
        let g0 = norm2(&g);
        if !g0.is_finite() {
            return NewtonOutcome::Failed("non-finite residual".into());
        }
        let lu = match jm.expect("jacobian requested").factor() {
            Ok(lu) => lu,
            Err(s) => return NewtonOutcome::Failed(format!("singular Jacobian at column {}", s.column)),
        };
        let mut delta: Vec<f64> = g.iter().map(|v| -v).collect();
        lu.solve_in_place(&mut delta);
        let step = norm_inf(&delta);
        if !step.is_finite() {
            return NewtonOutcome::Failed("non-finite Newton step".into());
        }
        let mut lambda = 1.0;
        let trial = loop {
            let t: Vec<f64> = x.iter().zip(&delta).map(|(a, d)| a + lambda * d).collect();
            let (gt, _) = assemble(prob, grid, k0, &t, false);
            let gn = norm2(&gt);
            if gn.is_finite() && (gn <= (1.0 - 1e-4 * lambda) * g0 || lambda * step < opts.newton_tol) {
                break Some(t);
            }
            lambda *= 0.5;
            if lambda < 1.0 / 1024.0 {
                break None;
            }
        };
        match trial {
            Some(t) => x.copy_from_slice(&t),
            None => return NewtonOutcome::Failed(format!("line search stalled at residual {g0:.3e}")),
        }
        if lambda == 1.0 && step < opts.newton_tol {
            return NewtonOutcome::Converged(it);
        }
    }
    NewtonOutcome::Failed(format!("no convergence in {} Newton iterations", opts.max_newton))
}

/// Grid on `[x_minus, x_plus]` containing `0`, spacing growing geometrically
/// away from the origin.
fn build_grid(x_minus: f64, x_plus: f64, h0: f64, h_max: f64) -> Vec<f64> {
    let side = |extent: f64| -> Vec<f64> {
        let mut pts = vec![0.0];
        let mut h = h0;
        let mut pos = 0.0;
        while pos + h < extent {
            pos += h;
            pts.push(pos);
            h = (h * 1.03).min(h_max);
        }
        if extent - pos < 0.3 * h && pts.len() > 1 {
            pts.pop();
        }
        pts.push(extent);
        pts
    };
    let left = side(-x_minus);
    let right = side(x_plus);
    let mut grid: Vec<f64> = left.iter().rev().map(|v| -v).collect();
    grid.extend_from_slice(&right[1..]);
    grid
}

fn origin_index(grid: &[f64]) -> usize {
    grid.iter().position(|&v| v == 0.0).expect("grid contains the origin")
}

fn initial_values(prob: &Problem, p: &ModelParams, guess: Guess<'_>, grid: &[f64]) -> Result<Vec<f64>> {
    let mut x = Vec::with_capacity(3 * grid.len());
    match guess {
        Guess::Seed => {
            for &g in grid {
                x.extend_from_slice(&analytic_seed(p, g)?.to_array());
            }
        }
        Guess::Profile(old) => {
            let shift = prob.sys.u_minus - old.ends.u_minus_strong;
            let du_plus = p.u_plus - old.params.u_plus;
            for &g in grid {
                let s = old.state(g);
                let u = s.u + shift * (1.0 - s.z) + du_plus * s.z;
                x.extend_from_slice(&[u, s.z, s.y]);
            }
        }
    }
    Ok(x)
}

fn states_of(x: &[f64]) -> Vec<TwState> {
    x.chunks_exact(3).map(|c| TwState::new(c[0], c[1], c[2])).collect()
}

/// Max residual of the C1 interpolant on every interval, sampled at the two
/// Gauss points.
fn interval_residuals(prob: &Problem, grid: &[f64], values: &[TwState], derivs: &[TwState]) -> Vec<f64> {
    let off = 0.5 / 3f64.sqrt();
    (0..grid.len() - 1)
        .map(|i| {
            let (a, b) = (grid[i], grid[i + 1]);
            [0.5 - off, 0.5 + off]
                .iter()
                .map(|t| {
                    let xs = a + t * (b - a);
                    let (s, ds) = hermite(a, b, values[i], values[i + 1], derivs[i], derivs[i + 1], xs);
                    ds.max_abs_diff(prob.sys.rhs(s))
                })
                .fold(0.0, f64::max)
        })
        .collect()
}

fn refine(
    grid: &[f64],
    values: &[TwState],
    derivs: &[TwState],
    res: &[f64],
    tol: f64,
) -> (Vec<f64>, Vec<f64>) {
    let mut g = Vec::with_capacity(grid.len() * 2);
    let mut x = Vec::with_capacity(grid.len() * 6);
    for i in 0..grid.len() - 1 {
        g.push(grid[i]);
        x.extend_from_slice(&values[i].to_array());
        if res[i] > tol {
            let m = ((res[i] / (0.5 * tol)).cbrt().ceil() as usize).clamp(2, 8);
            let (a, b) = (grid[i], grid[i + 1]);
            for j in 1..m {
                let xs = a + (b - a) * j as f64 / m as f64;
                let (s, _) = hermite(a, b, values[i], values[i + 1], derivs[i], derivs[i + 1], xs);
                g.push(xs);
                x.extend_from_slice(&s.to_array());
            }
        }
    }
    let n = grid.len() - 1;
    g.push(grid[n]);
    x.extend_from_slice(&values[n].to_array());
    (g, x)
}

/// Least-squares exponential rate of `|U - U_end|` on the outer part of a tail.
fn tail_rate(grid: &[f64], values: &[TwState], end: TwState, left: bool) -> f64 {
    let (lo, hi) = if left {
        (grid[0], 0.5 * grid[0])
    } else {
        (0.5 * grid[grid.len() - 1], grid[grid.len() - 1])
    };
    let pts: Vec<(f64, f64)> = grid
        .iter()
        .zip(values)
        .filter(|(&x, _)| x >= lo && x <= hi)
        .map(|(&x, v)| (x, v.max_abs_diff(end)))
        .filter(|&(_, e)| e > 1e-12)
        .map(|(x, e)| (x, e.ln()))
        .collect();
    if pts.len() < 3 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return 0.0;
    }
    let slope = sxy / sxx;
    if left {
        slope
    } else {
        -slope
    }
}

fn failure(prob: &Problem, grid: &[f64], x: &[f64], reason: String) -> Error {
    let values = states_of(x);
    if values.iter().any(|v| !v.u.is_finite()) {
        return Error::NoProfile { reason, bench: None, last_iterate: None };
    }
    let derivs: Vec<TwState> = values.iter().map(|&v| prob.sys.rhs(v)).collect();
    let u: Vec<f64> = values.iter().map(|v| v.u).collect();
    // slopes of the iterate itself; F(U) is unreliable off the solution
    let n = grid.len();
    let du: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            (u[b] - u[a]) / (grid[b] - grid[a])
        })
        .collect();
    let ends = model::burned_states(&prob.sys.params).expect("validated earlier");
    let bench = detect_bench(grid, &u, &du, ends.u_minus_weak)
        .or_else(|| detect_dwell(grid, &u, &du, ends.u_minus_weak));
    let sol = ProfileSolution {
        params: prob.sys.params,
        ends,
        x_minus: grid[0],
        x_plus: grid[grid.len() - 1],
        grid: grid.to_vec(),
        values,
        derivs,
        residual_norm: f64::INFINITY,
        endpoint_error: f64::INFINITY,
        boundary_residual: f64::INFINITY,
        decay: DecayFit { left: 0.0, right: 0.0, left_expected: 0.0, right_expected: 0.0 },
        stats: SolveStats::default(),
    };
    Error::NoProfile { reason, bench, last_iterate: Some(Box::new(sol)) }
}

/// Solve for the strong-detonation profile.
///
/// `domain` fixes the initial truncation `(x_minus, x_plus)`; by default it
/// is chosen from the slowest end-state decay rates. The domain is doubled
/// on the offending side until both endpoint errors meet the tolerance.
pub fn solve_profile(
    p: &ModelParams,
    guess: Guess<'_>,
    domain: Option<(f64, f64)>,
    opts: &SolverOptions,
) -> Result<ProfileSolution> {
    let diag = model::validate(p);
    if !diag.valid {
        if p.q > model::q_max(p.u_plus) {
            return Err(Error::BeyondCj { u_plus: p.u_plus, q: p.q });
        }
        return Err(Error::InvalidParameter(diag.failures.join("; ")));
    }
    if p.ea == 0.0 {
        return Err(Error::InvalidParameter(
            "zero activation energy profiles are solved by the zero_ea module".into(),
        ));
    }
    let (prob, burned, unburned) = Problem::new(p)?;
    let rate_l = burned.slowest_rate();
    let rate_r = unburned.slowest_rate();
    let span = (1.0 / opts.initial_decay).ln();
    let (mut xm, mut xp) = domain.unwrap_or_else(|| {
        let mut xm = -(span / rate_l).max(10.0);
        let mut xp = (span / rate_r).max(10.0);
        if let Guess::Profile(old) = guess {
            xm = xm.min(old.x_minus);
            xp = xp.max(old.x_plus);
        }
        (xm.max(-opts.x_cap), xp.min(opts.x_cap))
    });
    if !(xm < 0.0 && xp > 0.0) {
        return Err(Error::InvalidParameter(format!("domain ({xm}, {xp}) must contain 0")));
    }
    let h0 = 0.1 * p.d.min(1.0);

    let mut stats = SolveStats::default();
    let mut grid = build_grid(xm, xp, h0, opts.h_max);
    let mut x = initial_values(&prob, p, guess, &grid)?;
    let mut first = true;

    loop {
        // Newton + mesh refinement on the current domain.
        let mut retries = 0;
        let (values, derivs, residual) = loop {
            let k0 = origin_index(&grid);
            let start = x.clone();
            match newton(&prob, &grid, k0, &mut x, opts) {
                NewtonOutcome::Converged(it) => {
                    stats.newton_iterations += it;
                    if first {
                        stats.initial_newton_iterations = it;
                        first = false;
                    }
                }
                NewtonOutcome::Failed(reason) => {
                    if retries < 2 && 2 * grid.len() <= opts.max_nodes {
                        // halve every interval and retry from the same start
                        retries += 1;
                        let vals = states_of(&start);
                        let ders: Vec<TwState> = vals.iter().map(|&v| prob.sys.rhs(v)).collect();
                        let all = vec![f64::INFINITY; grid.len() - 1];
                        let (g2, x2) = refine(&grid, &vals, &ders, &all, 1.0);
                        grid = g2;
                        x = x2;
                        continue;
                    }
                    return Err(failure(&prob, &grid, &x, reason));
                }
            }
            let values = states_of(&x);
            let derivs: Vec<TwState> = values.iter().map(|&v| prob.sys.rhs(v)).collect();
            let res = interval_residuals(&prob, &grid, &values, &derivs);
            let worst = res.iter().copied().fold(0.0, f64::max);
            if worst <= opts.residual_tol {
                break (values, derivs, worst);
            }
            stats.mesh_rounds += 1;
            if stats.mesh_rounds > opts.max_mesh_rounds {
                return Err(failure(
                    &prob,
                    &grid,
                    &x,
                    format!("residual {worst:.3e} above tolerance after {} mesh rounds", opts.max_mesh_rounds),
                ));
            }
            let (g2, x2) = refine(&grid, &values, &derivs, &res, opts.residual_tol);
            if g2.len() > opts.max_nodes {
                return Err(failure(&prob, &grid, &x, format!("mesh exceeds {} nodes", opts.max_nodes)));
            }
            grid = g2;
            x = x2;
        };

        let n = grid.len() - 1;
        let err_l = values[0].max_abs_diff(prob.sys.burned());
        let err_r = values[n].max_abs_diff(prob.sys.unburned());
        let endpoint_error = err_l.max(err_r);
        if endpoint_error <= opts.endpoint_tol {
            let bl: Vec<f64> = (0..3).map(|c| values[0].to_array()[c] - prob.left_state[c]).collect();
            let br: Vec<f64> = (0..3).map(|c| values[n].to_array()[c] - prob.right_state[c]).collect();
            let boundary_residual = dot(&prob.left_normal, &bl).abs().max(dot(&prob.right_normal, &br).abs());
            let decay = DecayFit {
                left: tail_rate(&grid, &values, prob.sys.burned(), true),
                right: tail_rate(&grid, &values, prob.sys.unburned(), false),
                left_expected: rate_l,
                right_expected: rate_r,
            };
            return Ok(ProfileSolution {
                params: *p,
                ends: model::burned_states(p)?,
                x_minus: grid[0],
                x_plus: grid[n],
                grid,
                values,
                derivs,
                residual_norm: residual,
                endpoint_error,
                boundary_residual,
                decay,
                stats,
            });
        }

        // Extend the offending side(s) and re-solve from the current solution.
        if err_l > opts.endpoint_tol {
            if -xm >= opts.x_cap {
                return Err(Error::SlowDecay { cap: opts.x_cap, endpoint_error });
            }
            xm = (2.0 * xm).max(-opts.x_cap);
        }
        if err_r > opts.endpoint_tol {
            if xp >= opts.x_cap {
                return Err(Error::SlowDecay { cap: opts.x_cap, endpoint_error });
            }
            xp = (2.0 * xp).min(opts.x_cap);
        }
        stats.domain_extensions += 1;
        let current = ProfileSolution {
            params: *p,
            ends: model::burned_states(p)?,
            x_minus: grid[0],
            x_plus: grid[n],
            grid: grid.clone(),
            values,
            derivs,
            residual_norm: residual,
            endpoint_error,
            boundary_residual: 0.0,
            decay: DecayFit { left: 0.0, right: 0.0, left_expected: rate_l, right_expected: rate_r },
            stats,
        };
        // keep the refined interior, pad the new tails
        let old_h_l = grid[1] - grid[0];
        let old_h_r = grid[n] - grid[n - 1];
        let mut new_grid = Vec::new();
        let mut pos = grid[0];
        let mut h = old_h_l;
        let mut pad = Vec::new();
        while pos - h > xm {
            pos -= h;
            pad.push(pos);
            h = (h * 1.03).min(opts.h_max.max(old_h_l));
        }
        if let Some(last) = pad.last_mut() {
            if *last - xm < 0.3 * h {
                pad.pop();
            }
        }
        if grid[0] > xm {
            pad.push(xm);
        }
        new_grid.extend(pad.iter().rev());
        new_grid.extend_from_slice(&grid);
        let mut pos = grid[n];
        let mut h = old_h_r;
        let mut tail = Vec::new();
        while pos + h < xp {
            pos += h;
            tail.push(pos);
            h = (h * 1.03).min(opts.h_max.max(old_h_r));
        }
        if let Some(last) = tail.last() {
            if xp - last < 0.3 * h {
                tail.pop();
            }
        }
        if grid[n] < xp {
            tail.push(xp);
        }
        new_grid.extend(tail);
        x = Vec::with_capacity(3 * new_grid.len());
        for &g in &new_grid {
            x.extend_from_slice(&current.state(g).to_array());
        }
        grid = new_grid;
    }
}

/// Re-solve on the same domain with every mesh interval halved.
pub fn refine_mesh(sol: &ProfileSolution, opts: &SolverOptions) -> Result<ProfileSolution> {
    let p = &sol.params;
    let (prob, _, _) = Problem::new(p)?;
    let mut grid = Vec::with_capacity(2 * sol.grid.len());
    for w in sol.grid.windows(2) {
        grid.push(w[0]);
        grid.push(0.5 * (w[0] + w[1]));
    }
    grid.push(sol.x_plus);
    let mut x = Vec::with_capacity(3 * grid.len());
    for &g in &grid {
        x.extend_from_slice(&sol.state(g).to_array());
    }
    let k0 = origin_index(&grid);
    let mut stats = SolveStats::default();
    match newton(&prob, &grid, k0, &mut x, opts) {
        NewtonOutcome::Converged(it) => {
            stats.newton_iterations = it;
            stats.initial_newton_iterations = it;
        }
        NewtonOutcome::Failed(reason) => return Err(failure(&prob, &grid, &x, reason)),
    }
    let values = states_of(&x);
    let derivs: Vec<TwState> = values.iter().map(|&v| prob.sys.rhs(v)).collect();
    let residual_norm = interval_residuals(&prob, &grid, &values, &derivs).into_iter().fold(0.0, f64::max);
    let n = grid.len() - 1;
    let endpoint_error = values[0].max_abs_diff(prob.sys.burned()).max(values[n].max_abs_diff(prob.sys.unburned()));
    let bl: Vec<f64> = (0..3).map(|c| values[0].to_array()[c] - prob.left_state[c]).collect();
    let br: Vec<f64> = (0..3).map(|c| values[n].to_array()[c] - prob.right_state[c]).collect();
    let boundary_residual = dot(&prob.left_normal, &bl).abs().max(dot(&prob.right_normal, &br).abs());
    let decay = DecayFit {
        left: tail_rate(&grid, &values, prob.sys.burned(), true),
        right: tail_rate(&grid, &values, prob.sys.unburned(), false),
        ..sol.decay
    };
    Ok(ProfileSolution {
        params: *p,
        ends: sol.ends,
        x_minus: grid[0],
        x_plus: grid[n],
        grid,
        values,
        derivs,
        residual_norm,
        endpoint_error,
        boundary_residual,
        decay,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_contains_origin_and_ends() {
        let g = build_grid(-37.3, 12.9, 0.1, 1.0);
        assert_eq!(g[0], -37.3);
        assert_eq!(*g.last().unwrap(), 12.9);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(g[origin_index(&g)], 0.0);
    }

    #[test]
    fn seed_satisfies_phase_and_limits() {
        let p = ModelParams::default();
        let s = analytic_seed(&p, 0.0).unwrap();
        assert!((s.u - p.u_ig).abs() < 1e-12);
        let far = analytic_seed(&p, -200.0).unwrap();
        let um = model::burned_states(&p).unwrap().u_minus_strong;
        assert!((far.u - um).abs() < 1e-10 && far.z < 1e-10);
    }

    #[test]
    fn jacobian_matches_finite_differences_of_residual() {
        let p = ModelParams { q: 0.3, ea: 0.7, ..ModelParams::default() };
        let (prob, _, _) = Problem::new(&p).unwrap();
        let grid = build_grid(-3.0, 2.0, 0.4, 1.0);
        let k0 = origin_index(&grid);
        let mut x = Vec::new();
        for &g in &grid {
            x.extend_from_slice(&analytic_seed(&p, g).unwrap().to_array());
        }
        let (_, jm) = assemble(&prob, &grid, k0, &x, true);
        let jm = jm.unwrap();
        let h = 1e-7;
        for col in 0..x.len() {
            let mut a = x.clone();
            let mut b = x.clone();
            a[col] += h;
            b[col] -= h;
            let (ga, _) = assemble(&prob, &grid, k0, &a, false);
            let (gb, _) = assemble(&prob, &grid, k0, &b, false);
            for row in 0..x.len() {
                let fd = (ga[row] - gb[row]) / (2.0 * h);
                let in_band = row + 4 >= col && col + 4 >= row;
                let an = if in_band { jm.get(row, col) } else { 0.0 };
                assert!((fd - an).abs() < 1e-6, "({row},{col}): fd {fd} vs {an}");
            }
        }
    }
}
