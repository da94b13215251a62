//! The zero activation energy limit: Heaviside ignition, an explicit
//! reactant profile, a shooting solve for `u`, the weak-detonation (bench)
//! frontier in `q`, and the Evans function with its point coupling at the
//! ignition point.

use std::io::Write;

use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{join_frames, CFrame, CMat4};
use crate::model::{self, ModelParams};
use crate::profile::{detect_bench, detect_dwell, BenchInfo};
use crate::spectral::{
    integrate_side, spectral_split, BlockLimit, CoefficientMatrix, EvansOptions, EvansProblem, EvansValue, FramePair,
    Side,
};

/// Tail size at which the half-line solutions are truncated.
const TAIL: f64 = 1e-9;
const X_CAP: f64 = 5000.0;
const RTOL: f64 = 1e-12;
const H_MAX: f64 = 0.1;

/// Closed-form constants of the reactant profile (wave speed 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroEaCoeffs {
    /// `s / D`.
    pub s_tilde: f64,
    pub mu_plus: f64,
    pub mu_minus: f64,
    pub c0: f64,
    pub d0: f64,
    pub d: f64,
}

pub fn zero_ea_coeffs(p: &ModelParams) -> Result<ZeroEaCoeffs> {
    if !(p.k > 0.0 && p.d > 0.0 && p.k.is_finite() && p.d.is_finite()) {
        return Err(Error::InvalidParameter(format!("zero-ea needs k, D > 0, got k = {}, D = {}", p.k, p.d)));
    }
    let (k, d) = (p.k, p.d);
    let s_tilde = 1.0 / d;
    let root = (1.0 + 4.0 * d * k).sqrt();
    // (-1 + root) / (2D) rewritten to avoid cancellation for small D k
    let mu_plus = 2.0 * k / (1.0 + root);
    let mu_minus = (-1.0 - root) / (2.0 * d);
    let d0 = 1.0 / (1.0 + mu_plus / s_tilde);
    let c0 = mu_plus * d0;
    Ok(ZeroEaCoeffs { s_tilde, mu_plus, mu_minus, c0, d0, d })
}

impl ZeroEaCoeffs {
    pub fn z(&self, x: f64) -> f64 {
        if x < 0.0 {
            self.d0 * (self.mu_plus * x).exp()
        } else {
            1.0 - self.c0 * (-self.s_tilde * x).exp() / self.s_tilde
        }
    }

    pub fn dz(&self, x: f64) -> f64 {
        if x < 0.0 {
            self.mu_plus * self.d0 * (self.mu_plus * x).exp()
        } else {
            self.c0 * (-self.s_tilde * x).exp()
        }
    }

    /// `z + D z'`, the combination entering the `u` equation.
    pub fn forcing(&self, x: f64) -> f64 {
        self.z(x) + self.d * self.dz(x)
    }
}

/// `u^2/2 - u - (u_-^2/2 - u_-)`.
fn g(u: f64, u_minus: f64) -> f64 {
    model::flux(u) - model::flux(u_minus) - (u - u_minus)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroEaOutcome {
    /// The backward shot reaches the strong burned state.
    Connection,
    /// The backward shot falls below the weak state and runs away.
    Divergence,
    /// The shot neither connected nor diverged within the length cap.
    Undecided,
}

/// A solved (or attempted) zero-ea profile. On `x > 0` the `u` component is
/// explicit; on `x < 0` it is stored at the accepted steps of the shot.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroEaProfile {
    pub params: ModelParams,
    pub coeffs: ZeroEaCoeffs,
    pub u_minus: f64,
    pub u_weak: f64,
    pub outcome: ZeroEaOutcome,
    /// Where the shot stopped.
    pub x_minus: f64,
    pub x_plus: f64,
    /// `(x, u, u')` on `[x_minus, 0]`, ascending in `x`.
    pub left: Vec<(f64, f64, f64)>,
    /// Flat stretch at the weak state, if the shot has one.
    pub bench: Option<BenchInfo>,
    /// Longest stretch near the weak state, flat or not.
    pub dwell: Option<BenchInfo>,
}

fn check_params(p: &ModelParams) -> Result<(f64, f64)> {
    if p.ea != 0.0 {
        return Err(Error::InvalidParameter(format!("zero-ea solver needs ea = 0, got {}", p.ea)));
    }
    if !(p.q > 0.0) {
        return Err(Error::InvalidParameter(format!("q must be positive, got {}", p.q)));
    }
    let ends = model::burned_states(p)?;
    let um = ends.u_minus_strong;
    if !(p.u_plus < p.u_ig && p.u_ig < um) {
        return Err(Error::InvalidParameter(format!(
            "need u_plus < u_ig < u_minus, got {} < {} < {um}",
            p.u_plus, p.u_ig
        )));
    }
    if um - 1.0 <= 0.0 {
        return Err(Error::BeyondCj { u_plus: p.u_plus, q: p.q });
    }
    Ok((um, ends.u_minus_weak))
}

/// Shoot backward from `u(0) = u_ig` through the burning zone.
pub fn shoot_zero_ea(p: &ModelParams) -> Result<ZeroEaProfile> {
    let (um, uw) = check_params(p)?;
    let coeffs = zero_ea_coeffs(p)?;
    let q = p.q;
    let mu = coeffs.mu_plus;
    // backward variable t = -x, u_t = -(g(u) - q e^{-mu t}) since d0 (1 + D mu) = 1
    let f = |t: f64, u: f64| -(g(u, um) - q * (-mu * t).exp());
    let mut t = 0.0;
    let mut u = p.u_ig;
    let mut h = 1e-3;
    let mut samples = vec![(0.0, u, -f(0.0, u))];
    let outcome = loop {
        if t > X_CAP {
            break ZeroEaOutcome::Undecided;
        }
        let (u_new, err) = dopri_scalar(&f, t, u, h);
        let sc = RTOL * (1.0 + u.abs().max(u_new.abs()));
        let ratio = err / sc;
        if !ratio.is_finite() {
            break ZeroEaOutcome::Divergence;
        }
        if ratio <= 1.0 {
            t += h;
            u = u_new;
            let ut = f(t, u);
            samples.push((-t, u, -ut));
            if (u - um).abs() <= TAIL && q * (-mu * t).exp() <= TAIL {
                break ZeroEaOutcome::Connection;
            }
            if u < p.u_ig || (u < uw && ut < 0.0) {
                break ZeroEaOutcome::Divergence;
            }
        }
        h = (h * (0.9 * ratio.max(1e-10).powf(-0.2)).clamp(0.2, 5.0)).min(H_MAX);
    };
    samples.reverse();
    let xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let us: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let dus: Vec<f64> = samples.iter().map(|s| s.2).collect();
    let bench = detect_bench(&xs, &us, &dus, uw);
    let dwell = detect_dwell(&xs, &us, &dus, uw);
    let (a, b) = (p.u_plus, 2.0 - p.u_plus);
    let kk = ((p.u_ig - a) / (b - p.u_ig)).abs();
    let r = 1.0 - p.u_plus;
    let x_plus = ((kk * (b - a) / TAIL).ln() / r)
        .max(p.d * (coeffs.c0 * p.d / TAIL).ln())
        .max(1.0);
    Ok(ZeroEaProfile {
        params: *p,
        coeffs,
        u_minus: um,
        u_weak: uw,
        outcome,
        x_minus: -t,
        x_plus,
        left: samples,
        bench,
        dwell,
    })
}

/// One Dormand-Prince 5(4) step for a scalar ODE: the fifth-order value
/// and the magnitude of the embedded error estimate.
fn dopri_scalar(f: &impl Fn(f64, f64) -> f64, t: f64, y: f64, h: f64) -> (f64, f64) {
    let k1 = f(t, y);
    let k2 = f(t + h / 5.0, y + h * (k1 / 5.0));
    let k3 = f(t + 3.0 * h / 10.0, y + h * (3.0 * k1 / 40.0 + 9.0 * k2 / 40.0));
    let k4 = f(t + 4.0 * h / 5.0, y + h * (44.0 * k1 / 45.0 - 56.0 * k2 / 15.0 + 32.0 * k3 / 9.0));
    let k5 = f(
        t + 8.0 * h / 9.0,
        y + h * (19372.0 * k1 / 6561.0 - 25360.0 * k2 / 2187.0 + 64448.0 * k3 / 6561.0 - 212.0 * k4 / 729.0),
    );
    let k6 = f(
        t + h,
        y + h * (9017.0 * k1 / 3168.0 - 355.0 * k2 / 33.0 + 46732.0 * k3 / 5247.0 + 49.0 * k4 / 176.0
            - 5103.0 * k5 / 18656.0),
    );
    let y5 = y + h * (35.0 * k1 / 384.0 + 500.0 * k3 / 1113.0 + 125.0 * k4 / 192.0 - 2187.0 * k5 / 6784.0
        + 11.0 * k6 / 84.0);
    let k7 = f(t + h, y5);
    let e = h
        * (71.0 * k1 / 57600.0 - 71.0 * k3 / 16695.0 + 71.0 * k4 / 1920.0 - 17253.0 * k5 / 339200.0
            + 22.0 * k6 / 525.0
            - k7 / 40.0);
    (y5, e.abs())
}

/// Solve for the zero-ea profile; anything but a connection is an error
/// naming the outcome and any bench found on the way.
pub fn solve_zero_ea_profile(p: &ModelParams) -> Result<ZeroEaProfile> {
    let prof = shoot_zero_ea(p)?;
    match prof.outcome {
        ZeroEaOutcome::Connection => Ok(prof),
        other => {
            let bench = match (&prof.bench, &prof.dwell) {
                (Some(b), _) => format!("; bench on [{:.3}, {:.3}] at u = {:.6}", b.start, b.end, b.height),
                (None, Some(d)) => format!("; dwell near the weak state on [{:.3}, {:.3}]", d.start, d.end),
                _ => String::new(),
            };
            Err(Error::NoConnection(format!("{other:?} at x = {:.3}{bench}", prof.x_minus)))
        }
    }
}

impl ZeroEaProfile {
    pub fn u(&self, x: f64) -> f64 {
        self.u_and_slope(x).0
    }

    /// `(u, u')` at `x`; end states outside the stored range.
    pub fn u_and_slope(&self, x: f64) -> (f64, f64) {
        if x >= 0.0 {
            let p = &self.params;
            let (a, b) = (p.u_plus, 2.0 - p.u_plus);
            let k0 = (p.u_ig - a) / (p.u_ig - b);
            let w = k0 * (-(b - a) * 0.5 * x).exp();
            let u = (a - b * w) / (1.0 - w);
            return (u, 0.5 * (u - a) * (u - b));
        }
        if x <= self.x_minus {
            return (self.u_minus, 0.0);
        }
        let i = self.left.partition_point(|s| s.0 <= x).clamp(1, self.left.len() - 1);
        let (x0, u0, d0) = self.left[i - 1];
        let (x1, u1, d1) = self.left[i];
        let h = x1 - x0;
        let t = (x - x0) / h;
        let (t2, t3) = (t * t, t * t * t);
        let u = (2.0 * t3 - 3.0 * t2 + 1.0) * u0 + (t3 - 2.0 * t2 + t) * h * d0 + (-2.0 * t3 + 3.0 * t2) * u1
            + (t3 - t2) * h * d1;
        let du = ((6.0 * t2 - 6.0 * t) * u0 + (3.0 * t2 - 4.0 * t + 1.0) * h * d0 + (-6.0 * t2 + 6.0 * t) * u1
            + (3.0 * t2 - 2.0 * t) * h * d1)
            / h;
        (u, du)
    }

    /// `u'(0)`, identical from both sides.
    pub fn slope_at_ignition(&self) -> f64 {
        g(self.params.u_ig, self.u_minus) - self.params.q
    }

    pub fn jump(&self) -> JumpMatrix {
        JumpMatrix::new(&self.params, self.coeffs.z(0.0), self.slope_at_ignition())
    }

    /// Limits at the burned and unburned ends.
    pub fn limits(&self) -> (BlockLimit, BlockLimit) {
        let p = &self.params;
        (
            BlockLimit { alpha: self.u_minus - 1.0, kphi: p.k, q: p.q, d: p.d },
            BlockLimit { alpha: p.u_plus - 1.0, kphi: 0.0, q: p.q, d: p.d },
        )
    }

    /// Columns `x, u, z, u', z'` on a uniform grid of `n` points over the
    /// solved domain.
    pub fn write_csv<W: Write>(&self, w: W, n: usize) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["x", "u", "z", "u'", "z'"])?;
        let n = n.max(2);
        for i in 0..n {
            let x = self.x_minus + (self.x_plus - self.x_minus) * i as f64 / (n - 1) as f64;
            let (u, du) = self.u_and_slope(x);
            wtr.serialize((x, u, self.coeffs.z(x), du, self.coeffs.dz(x)))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Point coupling of the linearized system at the ignition point.
/// `X' = delta(x) M0 X` moves solutions across `x = 0` by `exp(M0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpMatrix {
    pub m0: Matrix4<f64>,
    pub exp_m0: Matrix4<f64>,
    pub exp_neg_m0: Matrix4<f64>,
}

impl JumpMatrix {
    /// The coupling `k delta(u_hat - u_ig) z_hat u / D` in the `z''` row;
    /// `delta(u_hat(x) - u_ig) = delta(x) / |u_hat'(0)|`.
    pub fn new(p: &ModelParams, z0: f64, slope0: f64) -> Self {
        let mut m0 = Matrix4::zeros();
        m0[(3, 0)] = p.k * z0 / (p.d * slope0.abs());
        // M0 is nilpotent, so the exponential series stops after one term
        let id = Matrix4::identity();
        Self { m0, exp_m0: id + m0, exp_neg_m0: id - m0 }
    }
}

/// Which half-line carries the jump.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpConvention {
    /// Integrate the plain system on both sides and map the `x > 0` frame
    /// to `0-` with `exp(-M0)`.
    #[default]
    Direct,
    /// Integrate `exp(-M0) B exp(M0)` on `x > 0` from the transformed frame.
    Similarity,
}

struct HalfLine<'a> {
    prof: &'a ZeroEaProfile,
    burning: bool,
    conj: Option<(CMat4, CMat4)>,
}

impl CoefficientMatrix for HalfLine<'_> {
    fn matrix(&self, x: f64, lambda: Complex64) -> CMat4 {
        let p = &self.prof.params;
        let kphi = if self.burning { p.k } else { 0.0 };
        let b = BlockLimit { alpha: self.prof.u(x) - 1.0, kphi, q: p.q, d: p.d }.matrix(lambda);
        match &self.conj {
            Some((s, s_inv)) => s * b * s_inv,
            None => b,
        }
    }
}

fn complexify(m: &Matrix4<f64>) -> CMat4 {
    m.map(|v| Complex64::new(v, 0.0))
}

/// Zero-ea Evans function at `lambda` from analytic frames of the limits.
pub fn zero_ea_evans(
    lambda: Complex64,
    prof: &ZeroEaProfile,
    frames: &FramePair,
    convention: JumpConvention,
    opts: &EvansOptions,
) -> Result<EvansValue> {
    if prof.outcome != ZeroEaOutcome::Connection {
        return Err(Error::NoConnection("Evans function needs a connecting zero-ea profile".into()));
    }
    let (minus, plus) = prof.limits();
    let tm = spectral_split(&minus, Side::Minus, lambda).trace();
    let tp = spectral_split(&plus, Side::Plus, lambda).trace();
    let left_sys = HalfLine { prof, burning: true, conj: None };
    let left = integrate_side(&left_sys, prof.x_minus, lambda, &frames.minus, tm, opts)?;
    let jump = prof.jump();
    let s = complexify(&jump.exp_neg_m0);
    let (right_at_0, right_ledger): (CFrame, Complex64) = match convention {
        JumpConvention::Direct => {
            let sys = HalfLine { prof, burning: false, conj: None };
            let right = integrate_side(&sys, prof.x_plus, lambda, &frames.plus, tp, opts)?;
            (s * right.omega, right.ledger)
        }
        JumpConvention::Similarity => {
            let sys = HalfLine { prof, burning: false, conj: Some((s, complexify(&jump.exp_m0))) };
            let right = integrate_side(&sys, prof.x_plus, lambda, &(s * frames.plus), tp, opts)?;
            (right.omega, right.ledger)
        }
    };
    Ok(EvansValue {
        lambda,
        det: join_frames(&left.omega, &right_at_0).determinant(),
        ledger: left.ledger + right_ledger,
    })
}

/// A connecting zero-ea profile with a chosen jump convention, for contour
/// drivers.
#[derive(Debug, Clone, Copy)]
pub struct ZeroEaSystem<'a> {
    pub prof: &'a ZeroEaProfile,
    pub convention: JumpConvention,
}

impl EvansProblem for ZeroEaSystem<'_> {
    fn limits(&self) -> (BlockLimit, BlockLimit) {
        self.prof.limits()
    }

    fn evaluate(&self, lambda: Complex64, frames: &FramePair, opts: &EvansOptions) -> Result<EvansValue> {
        zero_ea_evans(lambda, self.prof, frames, self.convention, opts)
    }
}

/// Bracket and estimate of the heat release at which the zero-ea profile
/// stops connecting to the strong burned state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchFrontier {
    pub q_star: f64,
    /// Largest tested `q` that connects.
    pub q_connect: f64,
    /// Smallest tested `q` that does not.
    pub q_fail: f64,
    pub bisections: usize,
}

fn connects(p: &ModelParams, q: f64) -> Result<bool> {
    Ok(shoot_zero_ea(&p.with_q(q))?.outcome == ZeroEaOutcome::Connection)
}

/// Bisect `q` between a connecting and a non-connecting shot until the
/// bracket is at most `tol` wide. All other parameters come from `p`.
pub fn bench_frontier(p: &ModelParams, tol: f64) -> Result<BenchFrontier> {
    let q_max = model::q_max(p.u_plus);
    // the lowest q keeps u_ig below the strong state
    let mut lo = 1e-6 * q_max;
    let mut hi = q_max * (1.0 - 1e-9);
    while shoot_zero_ea(&p.with_q(lo)).is_err() && lo < hi {
        lo *= 2.0;
    }
    if !connects(p, lo)? || connects(p, hi).unwrap_or(false) {
        return Err(Error::FrontierNotBracketed { lo, hi });
    }
    let mut bisections = 0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if connects(p, mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
        bisections += 1;
    }
    Ok(BenchFrontier { q_star: 0.5 * (lo + hi), q_connect: lo, q_fail: hi, bisections })
}

pub const ZERO_EA_SCHEMA_VERSION: u32 = 1;

/// Machine-readable summary of a zero-ea shot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroEaReport {
    pub schema_version: u32,
    pub params: ModelParams,
    /// The reactant profile is the explicit two-branch formula.
    pub analytic_z: bool,
    pub coeffs: ZeroEaCoeffs,
    pub u_minus: f64,
    pub u_weak: f64,
    pub outcome: ZeroEaOutcome,
    pub domain: (f64, f64),
    pub slope_at_ignition: f64,
    pub bench: Option<BenchInfo>,
    pub dwell: Option<BenchInfo>,
    pub frontier: Option<BenchFrontier>,
}

impl ZeroEaProfile {
    pub fn report(&self, frontier: Option<BenchFrontier>) -> ZeroEaReport {
        ZeroEaReport {
            schema_version: ZERO_EA_SCHEMA_VERSION,
            params: self.params,
            analytic_z: true,
            coeffs: self.coeffs,
            u_minus: self.u_minus,
            u_weak: self.u_weak,
            outcome: self.outcome,
            domain: (self.x_minus, self.x_plus),
            slope_at_ignition: self.slope_at_ignition(),
            bench: self.bench,
            dwell: self.dwell,
            frontier,
        }
    }
}
