//! Polar-coordinate (continuous orthogonalization) Evans function: an
//! orthonormal frame for each tracked bundle plus a scalar log-radial
//! ledger, integrated with an embedded Dormand-Prince 5(4) pair.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::kato::{spectral_split, FramePair, KatoFrame};
use super::{BlockLimit, CoefficientMatrix, ProfileSystem, Side};
use crate::error::{Error, Result};
use crate::linalg::{join_frames, orthonormality_defect, qr_frame, CFrame};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvansOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Largest step in `x`.
    pub h_max: f64,
}

impl Default for EvansOptions {
    fn default() -> Self {
        Self { rtol: 1e-6, atol: 1e-8, max_steps: 1_000_000, h_max: 1.0 }
    }
}

const N: usize = 9;
type State = [Complex64; N];

fn pack(omega: &CFrame, ledger: Complex64) -> State {
    let mut y = [Complex64::new(0.0, 0.0); N];
    for j in 0..2 {
        for i in 0..4 {
            y[4 * j + i] = omega[(i, j)];
        }
    }
    y[8] = ledger;
    y
}

fn unpack(y: &State) -> (CFrame, Complex64) {
    (CFrame::from_fn(|i, j| y[4 * j + i]), y[8])
}

/// `Omega' = (I - Omega Omega^*) B Omega`, ledger `' = tr(Omega^* B Omega) - tr`.
fn polar_rhs<S: CoefficientMatrix>(sys: &S, lambda: Complex64, trace: Complex64, x: f64, y: &State) -> State {
    let (omega, _) = unpack(y);
    let b = sys.matrix(x, lambda);
    let bo = b * omega;
    let g = omega.adjoint() * bo;
    let d_omega = bo - omega * g;
    pack(&d_omega, g[(0, 0)] + g[(1, 1)] - trace)
}

// Dormand-Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combo(y: &State, h: f64, terms: &[(f64, &State)]) -> State {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (c, k) in terms {
            acc += k[i] * *c;
        }
        *o += acc * h;
    }
    out
}

/// Result of integrating one bundle to the matching point `x = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SideSolution {
    pub omega: CFrame,
    /// Log of the radial factor, with the limit growth `exp(tr * x)` removed.
    pub ledger: Complex64,
    pub steps: usize,
    pub rejected: usize,
    /// Largest `|Omega^* Omega - I|` over accepted steps.
    pub max_defect: f64,
}

/// Integrate the frame `frame` (spanning the tracked subspace of the limit
/// at `x_start`) from `x_start` to `0`. `trace` is the sum of the tracked
/// limit eigenvalues.
pub fn integrate_side<S: CoefficientMatrix>(
    sys: &S,
    x_start: f64,
    lambda: Complex64,
    frame: &CFrame,
    trace: Complex64,
    opts: &EvansOptions,
) -> Result<SideSolution> {
    let (omega0, t0) = qr_frame(frame).ok_or(Error::FrameDegeneracy { lambda, gap: 0.0 })?;
    let ledger0 = (t0[(0, 0)] * t0[(1, 1)]).ln();
    let mut y = pack(&omega0, ledger0);
    let mut x = x_start;
    let dir = if x_start < 0.0 { 1.0 } else { -1.0 };
    let mut h = dir * 0.01f64.min(x_start.abs());
    let mut err_old = 1e-4f64;
    let mut steps = 0;
    let mut rejected = 0;
    let mut max_defect = orthonormality_defect(&omega0);
    let f = |x: f64, y: &State| polar_rhs(sys, lambda, trace, x, y);

    while x != 0.0 {
        if steps + rejected >= opts.max_steps {
            return Err(Error::Stiffness { x });
        }
        if (x + h) * dir > 0.0 {
            h = -x;
        }
        let k1 = f(x, &y);
        let k2 = f(x + C2 * h, &combo(&y, h, &[(A21, &k1)]));
        let k3 = f(x + C3 * h, &combo(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(x + C4 * h, &combo(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(x + C5 * h, &combo(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = f(x + h, &combo(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
        let y_new = combo(&y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        let k7 = f(x + h, &y_new);
        let mut err = 0.0;
        for i in 0..N {
            let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
            let sc = opts.atol + opts.rtol * y[i].norm().max(y_new[i].norm());
            err += (e.norm() / sc).powi(2);
        }
        let err = (err / N as f64).sqrt();
        if !err.is_finite() {
            return Err(Error::Stiffness { x });
        }
        if err <= 1.0 {
            x = if (x + h) * dir >= 0.0 { 0.0 } else { x + h };
            let (omega, ledger) = unpack(&y_new);
            let (q, t) = qr_frame(&omega).ok_or(Error::FrameDegeneracy { lambda, gap: 0.0 })?;
            y = pack(&q, ledger + (t[(0, 0)] * t[(1, 1)]).ln());
            max_defect = max_defect.max(orthonormality_defect(&q));
            steps += 1;
            let fac = (0.9 * err.max(1e-10).powf(-0.17) * err_old.powf(0.04)).clamp(0.2, 10.0);
            err_old = err.max(1e-4);
            h = dir * (h.abs() * fac).min(opts.h_max);
        } else {
            rejected += 1;
            h *= (0.9 * err.powf(-0.2)).max(0.2);
        }
        if h.abs() < 1e-12 * x.abs().max(1.0) {
            return Err(Error::Stiffness { x });
        }
    }
    let (omega, ledger) = unpack(&y);
    Ok(SideSolution { omega, ledger, steps, rejected, max_defect })
}

/// Evans function value at one `lambda`, kept in factored form so that
/// arguments stay meaningful when the modulus over- or underflows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvansValue {
    pub lambda: Complex64,
    /// `det[Omega_-(0) Omega_+(0)]`.
    pub det: Complex64,
    /// Sum of both bundles' log-radial ledgers.
    pub ledger: Complex64,
}

impl EvansValue {
    /// Wrap a plain complex value (ledger zero).
    pub fn from_value(lambda: Complex64, value: Complex64) -> Self {
        Self { lambda, det: value, ledger: Complex64::new(0.0, 0.0) }
    }

    pub fn value(&self) -> Complex64 {
        self.det * self.ledger.exp()
    }

    pub fn ln_modulus(&self) -> f64 {
        self.det.norm().ln() + self.ledger.re
    }

    /// Argument of `E`, not reduced to a principal value.
    pub fn arg(&self) -> f64 {
        self.det.arg() + self.ledger.im
    }
}

/// `E(lambda)` for any coefficient matrix with block-triangular limits.
pub fn evans_eval_with<S: CoefficientMatrix>(
    sys: &S,
    minus: &BlockLimit,
    plus: &BlockLimit,
    domain: (f64, f64),
    lambda: Complex64,
    frames: &FramePair,
    opts: &EvansOptions,
) -> Result<(EvansValue, SideSolution, SideSolution)> {
    let tm = spectral_split(minus, Side::Minus, lambda).trace();
    let tp = spectral_split(plus, Side::Plus, lambda).trace();
    let left = integrate_side(sys, domain.0, lambda, &frames.minus, tm, opts)?;
    let right = integrate_side(sys, domain.1, lambda, &frames.plus, tp, opts)?;
    let det = join_frames(&left.omega, &right.omega).determinant();
    Ok((EvansValue { lambda, det, ledger: left.ledger + right.ledger }, left, right))
}

/// A linear eigenvalue system whose Evans function can be evaluated given
/// analytic frames of its two limits.
pub trait EvansProblem: Sync {
    /// Limits at `x -> -infinity` and `x -> +infinity`.
    fn limits(&self) -> (BlockLimit, BlockLimit);
    fn evaluate(&self, lambda: Complex64, frames: &FramePair, opts: &EvansOptions) -> Result<EvansValue>;
}

/// `E(lambda)` about a solved profile, matched at `x = 0`.
pub fn evans_eval(lambda: Complex64, sys: &ProfileSystem<'_>, frames: &FramePair, opts: &EvansOptions) -> Result<EvansValue> {
    Ok(evans_eval_with(sys, &sys.minus, &sys.plus, sys.domain(), lambda, frames, opts)?.0)
}

impl EvansProblem for ProfileSystem<'_> {
    fn limits(&self) -> (BlockLimit, BlockLimit) {
        (self.minus, self.plus)
    }

    fn evaluate(&self, lambda: Complex64, frames: &FramePair, opts: &EvansOptions) -> Result<EvansValue> {
        evans_eval(lambda, self, frames, opts)
    }
}

/// Evaluate at every node of a frame list; concurrently when the
/// `parallel` feature is enabled. Output order follows the nodes.
pub fn evans_at_nodes<P: EvansProblem + ?Sized>(sys: &P, kato: &KatoFrame, opts: &EvansOptions) -> Result<Vec<EvansValue>> {
    let eval = |(lam, fr): (&Complex64, &FramePair)| sys.evaluate(*lam, fr, opts);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        kato.lambdas.par_iter().zip(kato.frames.par_iter()).map(eval).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        kato.lambdas.iter().zip(kato.frames.iter()).map(eval).collect()
    }
}

pub const EVANS_SCHEMA_VERSION: u32 = 1;

/// Evans values along a contour, in contour order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvansTrace {
    pub values: Vec<EvansValue>,
}

impl EvansTrace {
    /// Columns `re_lambda, im_lambda, re_E, im_E, log_radial`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["re_lambda", "im_lambda", "re_E", "im_E", "log_radial"])?;
        for v in &self.values {
            let e = v.value();
            wtr.serialize((v.lambda.re, v.lambda.im, e.re, e.im, v.ledger.re))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CMat4;

    /// Constant coefficients equal to the limit: frames stay put and the
    /// ledger stays at its initial value.
    struct Constant(BlockLimit);

    impl CoefficientMatrix for Constant {
        fn matrix(&self, _x: f64, lambda: Complex64) -> CMat4 {
            self.0.matrix(lambda)
        }
    }

    #[test]
    fn constant_system_keeps_invariant_frame() {
        let lim = BlockLimit { alpha: 0.8, kphi: 0.6, q: 0.3, d: 0.5 };
        let lam = Complex64::new(0.5, 1.5);
        let frame = super::super::initial_frame(&lim, Side::Minus, lam).unwrap();
        let tr = spectral_split(&lim, Side::Minus, lam).trace();
        let sol = integrate_side(&Constant(lim), -20.0, lam, &frame, tr, &EvansOptions::default()).unwrap();
        let (q0, t0) = qr_frame(&frame).unwrap();
        // same subspace: projection of the result onto q0 is unitary
        let overlap = (q0.adjoint() * sol.omega).determinant().norm();
        assert!((overlap - 1.0).abs() < 1e-7, "overlap {overlap}");
        assert!((sol.ledger - (t0[(0, 0)] * t0[(1, 1)]).ln()).norm() < 1e-6);
        assert!(sol.max_defect < 1e-12);
    }

    #[test]
    fn from_value_round_trips() {
        let v = EvansValue::from_value(Complex64::new(1.0, 0.0), Complex64::new(-2.0, 1.0));
        assert_eq!(v.value(), Complex64::new(-2.0, 1.0));
        assert!((v.ln_modulus() - 5f64.sqrt().ln()).abs() < 1e-15);
    }
}
