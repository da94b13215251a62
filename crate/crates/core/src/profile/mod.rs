//! Traveling-wave profiles: the connection from the burned state
//! `(u_minus, 0, 0)` to the unburned state `(u_plus, 1, 0)` of the reduced
//! traveling-wave ODE in `(u, z, y = z')`.

mod collocation;
mod continuation;
mod io;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, EndStates, ModelParams};

pub use collocation::{analytic_seed, refine_mesh, solve_profile, Guess, SolverOptions};
pub use continuation::{continue_profiles, step_to, ContinuationOptions, ContinuationRun};
pub use io::{read_profile_csv, ProfileSidecar, PROFILE_SCHEMA_VERSION};

/// A point `(u, z, y)` of the traveling-wave phase space.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TwState {
    pub u: f64,
    pub z: f64,
    pub y: f64,
}

impl TwState {
    pub const fn new(u: f64, z: f64, y: f64) -> Self {
        Self { u, z, y }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.u, self.z, self.y]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self { u: a[0], z: a[1], y: a[2] }
    }

    pub fn max_abs_diff(self, other: TwState) -> f64 {
        (self.u - other.u)
            .abs()
            .max((self.z - other.z).abs())
            .max((self.y - other.y).abs())
    }
}

/// The traveling-wave vector field for fixed parameters, with the burned
/// state cached.
#[derive(Debug, Clone, Copy)]
pub struct TwSystem {
    pub params: ModelParams,
    pub u_minus: f64,
}

impl TwSystem {
    pub fn new(params: &ModelParams) -> Result<Self> {
        let ends = model::burned_states(params)?;
        Ok(Self { params: *params, u_minus: ends.u_minus_strong })
    }

    /// Right-hand side `(u', z', y')`.
    #[inline]
    pub fn rhs(&self, s: TwState) -> TwState {
        let p = &self.params;
        let um = self.u_minus;
        let du = model::flux(s.u) - model::flux(um) - (s.u - um) - p.q * (s.z + p.d * s.y);
        let dy = (-s.y + p.k * model::ignition(s.u, p) * s.z) / p.d;
        TwState { u: du, z: s.y, y: dy }
    }

    /// Jacobian of [`rhs`](Self::rhs), row-major.
    #[inline]
    pub fn jacobian(&self, s: TwState) -> [[f64; 3]; 3] {
        let p = &self.params;
        let phi = model::ignition(s.u, p);
        let dphi = model::ignition_deriv(s.u, p);
        [
            [s.u - 1.0, -p.q, -p.q * p.d],
            [0.0, 0.0, 1.0],
            [p.k * dphi * s.z / p.d, p.k * phi / p.d, -1.0 / p.d],
        ]
    }

    pub fn burned(&self) -> TwState {
        TwState::new(self.u_minus, 0.0, 0.0)
    }

    pub fn unburned(&self) -> TwState {
        TwState::new(self.params.u_plus, 1.0, 0.0)
    }
}

/// Traveling-wave right-hand side at the strong-detonation burned state.
pub fn tw_rhs(state: TwState, p: &ModelParams) -> Result<TwState> {
    Ok(TwSystem::new(p)?.rhs(state))
}

/// Linearization of the traveling-wave flow at one end state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndLinearization {
    pub matrix: [[f64; 3]; 3],
    pub eigenvalues: [f64; 3],
    pub unstable_dim: usize,
    pub stable_dim: usize,
    pub center_dim: usize,
    /// Orthonormal basis of the unstable subspace.
    pub unstable_basis: Vec<[f64; 3]>,
    /// Orthonormal basis of the stable subspace.
    pub stable_basis: Vec<[f64; 3]>,
    pub center_basis: Vec<[f64; 3]>,
}

impl EndLinearization {
    /// Unit normal to the two-dimensional subspace the profile must approach
    /// the end state in: unstable at the burned end, stable at the unburned end.
    pub fn boundary_normal(&self) -> [f64; 3] {
        let basis = if self.unstable_dim == 2 {
            &self.unstable_basis
        } else {
            &self.stable_basis
        };
        normalize(cross(basis[0], basis[1]))
    }

    /// Slowest decay rate toward the end state along the connecting subspace.
    pub fn slowest_rate(&self) -> f64 {
        let relevant = if self.unstable_dim == 2 {
            self.eigenvalues.iter().filter(|&&e| e > 0.0).map(|e| e.abs()).fold(f64::INFINITY, f64::min)
        } else {
            self.eigenvalues.iter().filter(|&&e| e < 0.0).map(|e| e.abs()).fold(f64::INFINITY, f64::min)
        };
        relevant
    }
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn normalize(a: [f64; 3]) -> [f64; 3] {
    let n = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

fn orthonormalize(a: [f64; 3], b: [f64; 3]) -> Vec<[f64; 3]> {
    let a = normalize(a);
    let d = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let b = normalize([b[0] - d * a[0], b[1] - d * a[1], b[2] - d * a[2]]);
    vec![a, b]
}

/// Eigenvector of the lower (z, y) block eigenvalue `mu`, lifted to the full
/// system through the upper-triangular coupling.
fn lower_block_eigvec(alpha: f64, mu: f64, q: f64, d: f64) -> [f64; 3] {
    [q * (1.0 + d * mu) / (alpha - mu), 1.0, mu]
}

/// Linearizations at the burned (`-infinity`) and unburned (`+infinity`)
/// end states, using their block-triangular structure.
pub fn end_linearizations(p: &ModelParams) -> Result<(EndLinearization, EndLinearization)> {
    let ends = model::burned_states(p)?;
    let (q, d, k) = (p.q, p.d, p.k);

    let alpha_m = ends.a_minus - 1.0;
    if alpha_m <= 0.0 {
        return Err(Error::DegenerateLinearization(format!(
            "burned state u_minus = {} is sonic (Chapman-Jouguet)",
            ends.u_minus_strong
        )));
    }
    let kphi = k * model::ignition(ends.u_minus_strong, p);
    if kphi <= 0.0 {
        return Err(Error::DegenerateLinearization(
            "reaction vanishes at the burned state".into(),
        ));
    }
    let disc = (1.0 + 4.0 * d * kphi).sqrt();
    let mu_p = 2.0 * kphi / (1.0 + disc);
    let mu_m = -(1.0 + disc) / (2.0 * d);
    let burned = EndLinearization {
        matrix: [[alpha_m, -q, -q * d], [0.0, 0.0, 1.0], [0.0, kphi / d, -1.0 / d]],
        eigenvalues: [alpha_m, mu_p, mu_m],
        unstable_dim: 2,
        stable_dim: 1,
        center_dim: 0,
        // the generalized eigenspace is spanned by e1 and (0, 1, mu_p) even if alpha_m == mu_p
        unstable_basis: orthonormalize([1.0, 0.0, 0.0], [0.0, 1.0, mu_p]),
        stable_basis: vec![normalize(lower_block_eigvec(alpha_m, mu_m, q, d))],
        center_basis: vec![],
    };

    let alpha_p = ends.a_plus - 1.0;
    if alpha_p >= 0.0 {
        return Err(Error::DegenerateLinearization(format!(
            "unburned state u_plus = {} is not subsonic",
            p.u_plus
        )));
    }
    let unburned = EndLinearization {
        matrix: [[alpha_p, -q, -q * d], [0.0, 0.0, 1.0], [0.0, 0.0, -1.0 / d]],
        eigenvalues: [alpha_p, 0.0, -1.0 / d],
        unstable_dim: 0,
        stable_dim: 2,
        center_dim: 1,
        stable_basis: orthonormalize([1.0, 0.0, 0.0], [0.0, 1.0, -1.0 / d]),
        unstable_basis: vec![],
        center_basis: vec![normalize(lower_block_eigvec(alpha_p, 0.0, q, d))],
    };
    Ok((burned, unburned))
}

/// A stretch where `u` stays near the weak-detonation height, the signature
/// of lost strong-detonation existence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchInfo {
    pub start: f64,
    pub end: f64,
    pub height: f64,
    /// Largest `|u'|` over the stretch.
    pub max_slope: f64,
}

impl BenchInfo {
    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    /// Whether the stretch is flat and long enough to count as a bench.
    pub fn qualifies(&self) -> bool {
        self.length() >= BENCH_MIN_LENGTH && self.max_slope < BENCH_SLOPE_TOL
    }
}

/// Thresholds defining a bench: `|u - u_weak| < HEIGHT_TOL` and
/// `|u'| < SLOPE_TOL` over a stretch of length at least `MIN_LENGTH`.
pub const BENCH_HEIGHT_TOL: f64 = 1e-2;
pub const BENCH_SLOPE_TOL: f64 = 1e-4;
pub const BENCH_MIN_LENGTH: f64 = 5.0;

fn longest_run(
    x: &[f64],
    du: &[f64],
    u_weak: f64,
    keep: impl Fn(usize) -> bool,
) -> Option<BenchInfo> {
    let mut best: Option<BenchInfo> = None;
    let mut start: Option<usize> = None;
    let n = x.len();
    for i in 0..=n {
        match (i < n && keep(i), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                let max_slope = du[s..i].iter().fold(0.0f64, |m, d| m.max(d.abs()));
                let cand = BenchInfo { start: x[s], end: x[i - 1], height: u_weak, max_slope };
                if best.map_or(true, |b| cand.length() > b.length()) {
                    best = Some(cand);
                }
                start = None;
            }
            _ => {}
        }
    }
    best
}

/// Longest qualifying bench in a sampled `(x, u, u')` trajectory.
pub fn detect_bench(x: &[f64], u: &[f64], du: &[f64], u_weak: f64) -> Option<BenchInfo> {
    longest_run(x, du, u_weak, |i| {
        (u[i] - u_weak).abs() < BENCH_HEIGHT_TOL && du[i].abs() < BENCH_SLOPE_TOL
    })
    .filter(BenchInfo::qualifies)
}

/// Longest stretch within the bench height tolerance of `u_weak`, flat or
/// not. Used to describe failed iterates.
pub fn detect_dwell(x: &[f64], u: &[f64], du: &[f64], u_weak: f64) -> Option<BenchInfo> {
    longest_run(x, du, u_weak, |i| (u[i] - u_weak).abs() < BENCH_HEIGHT_TOL)
        .filter(|b| b.length() > 0.0)
}

/// Exponential tail fits, one per half-line, next to the analytic rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub left: f64,
    pub right: f64,
    pub left_expected: f64,
    pub right_expected: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SolveStats {
    /// Newton iterations summed over all meshes.
    pub newton_iterations: usize,
    /// Newton iterations on the first mesh, starting from the guess.
    pub initial_newton_iterations: usize,
    pub mesh_rounds: usize,
    pub domain_extensions: usize,
}

/// A solved traveling wave on a truncated domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSolution {
    pub params: ModelParams,
    pub ends: EndStates,
    pub x_minus: f64,
    pub x_plus: f64,
    pub grid: Vec<f64>,
    pub values: Vec<TwState>,
    pub derivs: Vec<TwState>,
    /// Max collocation residual of the piecewise-cubic interpolant.
    pub residual_norm: f64,
    pub endpoint_error: f64,
    /// Residual of the linear projective boundary conditions.
    pub boundary_residual: f64,
    pub decay: DecayFit,
    pub stats: SolveStats,
}

impl ProfileSolution {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn burned(&self) -> TwState {
        TwState::new(self.ends.u_minus_strong, 0.0, 0.0)
    }

    pub fn unburned(&self) -> TwState {
        TwState::new(self.params.u_plus, 1.0, 0.0)
    }

    fn interval(&self, x: f64) -> usize {
        let i = self.grid.partition_point(|&g| g <= x);
        i.saturating_sub(1).min(self.grid.len() - 2)
    }

    /// State and derivative at `x` from the C1 piecewise-cubic interpolant.
    /// Outside the computed domain the end states are returned.
    pub fn eval(&self, x: f64) -> (TwState, TwState) {
        if x <= self.x_minus {
            return if x == self.x_minus {
                (self.values[0], self.derivs[0])
            } else {
                (self.burned(), TwState::default())
            };
        }
        if x >= self.x_plus {
            let n = self.grid.len() - 1;
            return if x == self.x_plus {
                (self.values[n], self.derivs[n])
            } else {
                (self.unburned(), TwState::default())
            };
        }
        let i = self.interval(x);
        hermite(
            self.grid[i],
            self.grid[i + 1],
            self.values[i],
            self.values[i + 1],
            self.derivs[i],
            self.derivs[i + 1],
            x,
        )
    }

    pub fn state(&self, x: f64) -> TwState {
        self.eval(x).0
    }

    /// Length of `{x : 1e-3 < z < 1 - 1e-3}`.
    pub fn reaction_width(&self) -> f64 {
        let inside = |z: f64| z > 1e-3 && z < 1.0 - 1e-3;
        self.grid
            .windows(2)
            .zip(self.values.windows(2))
            .filter(|(_, v)| inside(v[0].z) && inside(v[1].z))
            .map(|(g, _)| g[1] - g[0])
            .sum()
    }

    /// `max u - u_minus`; positive when the profile has a combustion spike.
    pub fn spike_height(&self) -> f64 {
        self.values.iter().map(|v| v.u).fold(f64::NEG_INFINITY, f64::max) - self.ends.u_minus_strong
    }

    pub fn bench(&self) -> Option<BenchInfo> {
        let u: Vec<f64> = self.values.iter().map(|v| v.u).collect();
        let du: Vec<f64> = self.derivs.iter().map(|v| v.u).collect();
        detect_bench(&self.grid, &u, &du, self.ends.u_minus_weak)
    }
}

/// Cubic Hermite interpolation of value and slope on `[x0, x1]`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn hermite(
    x0: f64,
    x1: f64,
    v0: TwState,
    v1: TwState,
    d0: TwState,
    d1: TwState,
    x: f64,
) -> (TwState, TwState) {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    let dh00 = (6.0 * t2 - 6.0 * t) / h;
    let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
    let dh01 = (-6.0 * t2 + 6.0 * t) / h;
    let dh11 = 3.0 * t2 - 2.0 * t;
    let (a0, a1, b0, b1) = (v0.to_array(), v1.to_array(), d0.to_array(), d1.to_array());
    let mut val = [0.0; 3];
    let mut der = [0.0; 3];
    for c in 0..3 {
        val[c] = h00 * a0[c] + h10 * h * b0[c] + h01 * a1[c] + h11 * h * b1[c];
        der[c] = dh00 * a0[c] + dh10 * b0[c] + dh01 * a1[c] + dh11 * b1[c];
    }
    (TwState::from_array(val), TwState::from_array(der))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rhs_vanishes_at_end_states() {
        let p = ModelParams { q: 0.3, ..ModelParams::default() };
        let sys = TwSystem::new(&p).unwrap();
        assert!(sys.rhs(sys.burned()).max_abs_diff(TwState::default()) < 1e-15);
        assert!(sys.rhs(sys.unburned()).max_abs_diff(TwState::default()) < 1e-15);
    }

    #[test]
    fn rhs_hand_computed_point() {
        let p = ModelParams { q: 0.375, k: 1.0, d: 1.0, ea: 1.0, u_plus: 0.0, u_ig: 0.1 };
        let r = tw_rhs(TwState::new(1.5, 0.5, 0.0), &p).unwrap();
        assert_relative_eq!(r.u, -0.1875, epsilon = 1e-15);
        assert_eq!(r.z, 0.0);
        assert_relative_eq!(r.y, 0.5 * (-1.0f64 / 1.4).exp(), max_relative = 1e-14);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let p = ModelParams { q: 0.25, k: 1.3, d: 0.7, ea: 0.8, u_plus: 0.05, u_ig: 0.1 };
        let sys = TwSystem::new(&p).unwrap();
        let s = TwState::new(0.9, 0.4, -0.2);
        let j = sys.jacobian(s);
        let h = 1e-6;
        for c in 0..3 {
            let mut a = s.to_array();
            let mut b = s.to_array();
            a[c] += h;
            b[c] -= h;
            let fa = sys.rhs(TwState::from_array(a)).to_array();
            let fb = sys.rhs(TwState::from_array(b)).to_array();
            for r in 0..3 {
                assert!(((fa[r] - fb[r]) / (2.0 * h) - j[r][c]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn burned_linearization_with_trivial_heat_release() {
        let p = ModelParams { q: 0.0, ..ModelParams::default() };
        let (burned, unburned) = end_linearizations(&p).unwrap();
        let phi = model::ignition(2.0, &p);
        let root = (1.0 + 4.0 * phi).sqrt();
        assert_relative_eq!(burned.eigenvalues[0], 1.0);
        assert_relative_eq!(burned.eigenvalues[1], (-1.0 + root) / 2.0, max_relative = 1e-12);
        assert_relative_eq!(burned.eigenvalues[2], (-1.0 - root) / 2.0, max_relative = 1e-12);
        assert_eq!((burned.unstable_dim, burned.stable_dim), (2, 1));
        assert_eq!((unburned.stable_dim, unburned.center_dim), (2, 1));
    }

    #[test]
    fn unburned_spectrum_is_fixed() {
        for (u_plus, d) in [(0.0, 1.0), (0.3, 0.25), (0.1, 4.0)] {
            let p = ModelParams { u_plus, d, u_ig: u_plus + 0.1, q: 0.05, ..ModelParams::default() };
            let (_, unburned) = end_linearizations(&p).unwrap();
            assert_eq!(unburned.eigenvalues, [u_plus - 1.0, 0.0, -1.0 / d]);
        }
    }

    fn mat_vec(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
        let mut r = [0.0; 3];
        for i in 0..3 {
            r[i] = (0..3).map(|j| m[i][j] * v[j]).sum();
        }
        r
    }

    #[test]
    fn bases_span_invariant_subspaces() {
        let p = ModelParams { q: 0.3, k: 0.7, d: 0.5, ..ModelParams::default() };
        let (burned, unburned) = end_linearizations(&p).unwrap();
        for lin in [&burned, &unburned] {
            let n = lin.boundary_normal();
            let basis = if lin.unstable_dim == 2 { &lin.unstable_basis } else { &lin.stable_basis };
            for v in basis {
                // invariance: A v stays orthogonal to the normal
                let av = mat_vec(&lin.matrix, *v);
                let dot: f64 = (0..3).map(|i| av[i] * n[i]).sum();
                assert!(dot.abs() < 1e-13);
            }
        }
        // center direction of the unburned state is an equilibrium direction
        let c = unburned.center_basis[0];
        assert!(mat_vec(&unburned.matrix, c).iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn cj_linearization_is_degenerate() {
        let p = ModelParams { q: 0.5, ..ModelParams::default() };
        assert!(matches!(end_linearizations(&p), Err(Error::DegenerateLinearization(_))));
    }

    #[test]
    fn bench_detection_on_synthetic_trace() {
        let x: Vec<f64> = (0..200).map(|i| i as f64 * 0.1).collect();
        let u: Vec<f64> = x.iter().map(|&x| if (5.0..=12.0).contains(&x) { 0.3 } else { 1.0 }).collect();
        let du = vec![0.0; x.len()];
        let b = detect_bench(&x, &u, &du, 0.3).unwrap();
        assert!((b.length() - 7.0).abs() < 0.11);
        assert!(b.qualifies());
        assert!(detect_bench(&x, &u, &du, 0.5).is_none());
        let steep = vec![1e-3; x.len()];
        assert!(detect_bench(&x, &u, &steep, 0.3).is_none());
        let dwell = detect_dwell(&x, &u, &steep, 0.3).unwrap();
        assert!(!dwell.qualifies() && dwell.max_slope == 1e-3);
    }
}
