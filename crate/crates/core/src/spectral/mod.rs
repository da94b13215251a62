//! Eigenvalue systems linearized about a profile, the high-frequency
//! exclusion radius, and Evans function evaluation.

mod kato;
mod polar;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::CMat4;
use crate::model;
use crate::profile::ProfileSolution;

pub use kato::{
    initial_frame, kato_frames, projector, spectral_split, FramePair, KatoFrame, KatoTransport,
    SpectralSplit, GAP_TOL,
};
pub use polar::{
    evans_at_nodes, evans_eval, evans_eval_with, integrate_side, EvansOptions, EvansTrace,
    EvansProblem, EvansValue, SideSolution, EVANS_SCHEMA_VERSION,
};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Which end state a limit or frame belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// Burned state, `x -> -infinity`; the unstable bundle is tracked.
    Minus,
    /// Unburned state, `x -> +infinity`; the stable bundle is tracked.
    Plus,
}

/// Profile data entering the coefficient matrices at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub u: f64,
    pub u_x: f64,
    pub z: f64,
    pub phi: f64,
    pub dphi: f64,
}

impl Coefficients {
    pub fn at(prof: &ProfileSolution, x: f64) -> Self {
        let (s, ds) = prof.eval(x);
        Self {
            u: s.u,
            u_x: ds.u,
            z: s.z,
            phi: model::ignition(s.u, &prof.params),
            dphi: model::ignition_deriv(s.u, &prof.params),
        }
    }
}

/// Unintegrated first-order system for `(u, z, u', z')`.
#[rustfmt::skip]
pub fn matrix_unintegrated(x: f64, lambda: Complex64, prof: &ProfileSolution) -> CMat4 {
    let cf = Coefficients::at(prof, x);
    let p = &prof.params;
    let (q, k, d) = (p.q, p.k, p.d);
    CMat4::new(
        ZERO, ZERO, c(1.0), ZERO,
        ZERO, ZERO, ZERO, c(1.0),
        lambda + cf.u_x - q * k * cf.dphi * cf.z, c(-q * k * cf.phi), c(cf.u - 1.0), ZERO,
        c(k * cf.dphi * cf.z / d), (lambda + k * cf.phi) / d, ZERO, c(-1.0 / d),
    )
}

/// `lambda`-independent part of the integrated system at `x`.
#[rustfmt::skip]
pub fn integrated_base(cf: &Coefficients, q: f64, k: f64, d: f64) -> CMat4 {
    CMat4::new(
        c(cf.u - 1.0), ZERO, c(-q), c(-q * d),
        c(1.0), ZERO, c(q), ZERO,
        ZERO, ZERO, ZERO, c(1.0),
        c(k * cf.dphi * cf.z / d), ZERO, c(k * cf.phi / d), c(-1.0 / d),
    )
}

/// Coefficient of `lambda` in the integrated system; constant in `x`.
pub fn integrated_lambda_part(d: f64) -> CMat4 {
    let mut m = CMat4::zeros();
    m[(0, 1)] = c(1.0);
    m[(3, 2)] = c(1.0 / d);
    m
}

/// Integrated first-order system for `(u, w, z, z')` with `w' = u + q z`.
pub fn matrix_integrated(x: f64, lambda: Complex64, prof: &ProfileSolution) -> CMat4 {
    let p = &prof.params;
    let cf = Coefficients::at(prof, x);
    integrated_base(&cf, p.q, p.k, p.d) + integrated_lambda_part(p.d) * lambda
}

/// An `x`-dependent coefficient matrix `B(x; lambda)`.
pub trait CoefficientMatrix: Sync {
    fn matrix(&self, x: f64, lambda: Complex64) -> CMat4;
}

/// Constant limit of the integrated system at one end. It is block upper
/// triangular: the `(u, w)` block `[[alpha, lambda], [1, 0]]` and the
/// `(z, z')` block `[[0, 1], [(lambda + kphi)/D, -1/D]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockLimit {
    /// `u - 1` at the end state.
    pub alpha: f64,
    /// `k phi(u)` at the end state.
    pub kphi: f64,
    pub q: f64,
    pub d: f64,
}

impl BlockLimit {
    #[rustfmt::skip]
    pub fn matrix(&self, lambda: Complex64) -> CMat4 {
        let (q, d) = (self.q, self.d);
        CMat4::new(
            c(self.alpha), lambda, c(-q), c(-q * d),
            c(1.0), ZERO, c(q), ZERO,
            ZERO, ZERO, ZERO, c(1.0),
            ZERO, ZERO, (lambda + self.kphi) / d, c(-1.0 / d),
        )
    }
}

/// The integrated system about a solved profile.
#[derive(Debug, Clone, Copy)]
pub struct ProfileSystem<'a> {
    pub prof: &'a ProfileSolution,
    pub minus: BlockLimit,
    pub plus: BlockLimit,
}

impl<'a> ProfileSystem<'a> {
    pub fn new(prof: &'a ProfileSolution) -> Self {
        let p = &prof.params;
        let um = prof.ends.u_minus_strong;
        Self {
            prof,
            minus: BlockLimit { alpha: um - 1.0, kphi: p.k * model::ignition(um, p), q: p.q, d: p.d },
            plus: BlockLimit {
                alpha: p.u_plus - 1.0,
                kphi: p.k * model::ignition(p.u_plus, p),
                q: p.q,
                d: p.d,
            },
        }
    }

    pub fn limit(&self, side: Side) -> &BlockLimit {
        match side {
            Side::Minus => &self.minus,
            Side::Plus => &self.plus,
        }
    }

    /// Where the integration of each bundle starts.
    pub fn domain(&self) -> (f64, f64) {
        (self.prof.x_minus, self.prof.x_plus)
    }
}

impl CoefficientMatrix for ProfileSystem<'_> {
    fn matrix(&self, x: f64, lambda: Complex64) -> CMat4 {
        matrix_integrated(x, lambda, self.prof)
    }
}

/// Exclusion radius for eigenvalues with nonnegative real part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HighFreqBound {
    /// `sup phi'(u) z`.
    #[serde(rename = "L")]
    pub l: f64,
    /// `sup ((1 + q) phi'(u) z - phi(u))`.
    #[serde(rename = "M")]
    pub m: f64,
    /// Any eigenvalue with `Re >= 0` satisfies `Re + |Im| <= R`.
    #[serde(rename = "R")]
    pub r: f64,
}

/// Samples per mesh interval when taking the suprema.
const SUP_REFINEMENT: usize = 10;

/// `max{4, 1/(4D) + (1/4 + |D-1|^2/2) k L + k M}`.
pub fn hf_radius(l: f64, m: f64, k: f64, d: f64) -> f64 {
    let r = 1.0 / (4.0 * d) + (0.25 + 0.5 * (d - 1.0).powi(2)) * k * l + k * m;
    r.max(4.0)
}

/// Suprema over the profile mesh refined tenfold, and the resulting radius.
pub fn hf_bound(prof: &ProfileSolution) -> HighFreqBound {
    let p = &prof.params;
    let mut l = f64::NEG_INFINITY;
    let mut m = f64::NEG_INFINITY;
    let mut visit = |x: f64| {
        let s = prof.state(x);
        let dphi = model::ignition_deriv(s.u, p);
        let phi = model::ignition(s.u, p);
        l = l.max(dphi * s.z);
        m = m.max((1.0 + p.q) * dphi * s.z - phi);
    };
    for w in prof.grid.windows(2) {
        for j in 0..SUP_REFINEMENT {
            visit(w[0] + (w[1] - w[0]) * j as f64 / SUP_REFINEMENT as f64);
        }
    }
    visit(prof.x_plus);
    // the end states contribute L = 0 and M = -phi
    l = l.max(0.0);
    HighFreqBound { l, m, r: hf_radius(l, m, p.k, p.d) }
}

/// Profile-free radius from `sup phi' = 4 e^-2 / ea` and `0 <= z <= 1`,
/// so `M <= (1 + q) L`. `None` for the Heaviside limit.
pub fn hf_bound_a_priori(p: &model::ModelParams) -> Option<HighFreqBound> {
    if !(p.ea > 0.0) {
        return None;
    }
    let l = 4.0 * (-2.0f64).exp() / p.ea;
    let m = (1.0 + p.q) * l;
    Some(HighFreqBound { l, m, r: hf_radius(l, m, p.k, p.d) })
}
