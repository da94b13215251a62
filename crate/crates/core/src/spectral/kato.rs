//! Spectral projectors of the limit matrices and analytic frames for the
//! tracked bundles, continued in `lambda` by Kato's transport equation.

use num_complex::Complex64;

use super::{BlockLimit, Side};
use crate::error::{Error, Result};
use crate::linalg::{CFrame, CMat4};

/// Minimum distance between the tracked eigenvalue group and the rest.
pub const GAP_TOL: f64 = 1e-6;

/// Pre-projection drift tolerated at a node before substeps are doubled.
const TRANSPORT_TOL: f64 = 1e-10;
const MAX_HALVINGS: usize = 12;

/// Eigenvalues of a limit matrix split into the tracked group (unstable at
/// the burned end, stable at the unburned end) and the rest. Each block
/// contributes one root to each half.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralSplit {
    /// Tracked root of the `(u, w)` block.
    pub upper: Complex64,
    /// Tracked root of the `(z, z')` block.
    pub lower: Complex64,
    pub rest: [Complex64; 2],
    /// Smallest distance between a tracked and an untracked eigenvalue.
    pub gap: f64,
}

impl SpectralSplit {
    pub fn group(&self) -> [Complex64; 2] {
        [self.upper, self.lower]
    }

    /// Sum of the tracked eigenvalues: the exponential growth rate of the
    /// bundle's determinant in the limit.
    pub fn trace(&self) -> Complex64 {
        self.upper + self.lower
    }
}

/// Roots of `a v^2 + b v + c`, computed without cancellation.
fn quadratic_roots(a: Complex64, b: Complex64, c: Complex64) -> [Complex64; 2] {
    let mut s = (b * b - 4.0 * a * c).sqrt();
    if (b.conj() * s).re < 0.0 {
        s = -s;
    }
    let t = -(b + s) / 2.0;
    if t.norm() == 0.0 {
        return [Complex64::new(0.0, 0.0); 2];
    }
    [t / a, c / t]
}

fn pick(roots: [Complex64; 2], side: Side) -> (Complex64, Complex64) {
    let first_tracked = match side {
        Side::Minus => roots[0].re >= roots[1].re,
        Side::Plus => roots[0].re <= roots[1].re,
    };
    if first_tracked {
        (roots[0], roots[1])
    } else {
        (roots[1], roots[0])
    }
}

/// Tracked/untracked eigenvalues of the limit at `lambda`.
pub fn spectral_split(limit: &BlockLimit, side: Side, lambda: Complex64) -> SpectralSplit {
    let one = Complex64::new(1.0, 0.0);
    // (u, w) block: v^2 - alpha v - lambda = 0
    let up = quadratic_roots(one, Complex64::new(-limit.alpha, 0.0), -lambda);
    // (z, z') block: D v^2 + v - (lambda + k phi) = 0
    let lo = quadratic_roots(Complex64::new(limit.d, 0.0), one, -(lambda + limit.kphi));
    let (upper, up_rest) = pick(up, side);
    let (lower, lo_rest) = pick(lo, side);
    let rest = [up_rest, lo_rest];
    let gap = [upper, lower]
        .iter()
        .flat_map(|g| rest.iter().map(move |r| (g - r).norm()))
        .fold(f64::INFINITY, f64::min);
    SpectralSplit { upper, lower, rest, gap }
}

/// Spectral projector onto the tracked group, `P = q(M) r(M)` with
/// `q(z) = (z - r1)(z - r2)` over the untracked roots and `r` the Hermite
/// interpolant of `1/q` on the tracked roots; valid when tracked roots
/// coincide.
pub fn projector(m: &CMat4, split: &SpectralSplit) -> CMat4 {
    let [g1, g2] = split.group();
    let [r1, r2] = split.rest;
    let id = CMat4::identity();
    let qf = |z: Complex64| (z - r1) * (z - r2);
    let q1 = qf(g1);
    let q2 = qf(g2);
    let slope = -(g1 + g2 - r1 - r2) / (q1 * q2);
    let qm = (m - id * r1) * (m - id * r2);
    let rm = id / q1 + (m - id * g1) * slope;
    qm * rm
}

fn checked_projector(limit: &BlockLimit, side: Side, lambda: Complex64) -> Result<(CMat4, SpectralSplit)> {
    let split = spectral_split(limit, side, lambda);
    if !(split.gap >= GAP_TOL) {
        return Err(Error::FrameDegeneracy { lambda, gap: split.gap });
    }
    Ok((projector(&limit.matrix(lambda), &split), split))
}

fn normalize_phase(v: nalgebra::Vector4<Complex64>) -> nalgebra::Vector4<Complex64> {
    let n = v.norm();
    let v = v / Complex64::new(n, 0.0);
    let lead = v.iter().find(|c| c.norm() > 1e-12).copied().unwrap_or(Complex64::new(1.0, 0.0));
    v * (lead.conj() / lead.norm())
}

/// Basis of the tracked subspace from eigenvectors: columns ordered by
/// decreasing real part of the eigenvalue, unit norm, first nonzero
/// component real positive.
pub fn initial_frame(limit: &BlockLimit, side: Side, lambda: Complex64) -> Result<CFrame> {
    let (p, split) = checked_projector(limit, side, lambda)?;
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let nu = split.upper;
    let v_up = nalgebra::Vector4::new(nu, one, zero, zero);

    // (z, z') eigenvector lifted through the coupling: (U - nu) x = -C (1, nu)
    let mu = split.lower;
    let det = mu * mu - limit.alpha * mu - lambda;
    let b1 = limit.q * (1.0 + limit.d * mu);
    let b2 = Complex64::new(-limit.q, 0.0);
    let scale = 1.0 + mu.norm() * mu.norm() + lambda.norm();
    let v_lo = if det.norm() > 1e-8 * scale {
        let x1 = (-mu * b1 - lambda * b2) / det;
        let x2 = (-b1 + (limit.alpha - mu) * b2) / det;
        nalgebra::Vector4::new(x1, x2, one, mu)
    } else {
        // collision with a (u, w) root: take the tracked part of (0, 0, 1, mu)
        p * nalgebra::Vector4::new(zero, zero, one, mu)
    };

    let mut cols = [(nu, v_up), (mu, v_lo)];
    cols.sort_by(|a, b| b.0.re.total_cmp(&a.0.re).then(b.0.im.total_cmp(&a.0.im)));
    let mut f = CFrame::zeros();
    for (j, (_, v)) in cols.iter().enumerate() {
        f.set_column(j, &normalize_phase(*v));
    }
    Ok(f)
}

/// Kato transport of one bundle's frame along straight segments in `lambda`.
#[derive(Debug, Clone, Copy)]
pub struct KatoTransport {
    pub limit: BlockLimit,
    pub side: Side,
    /// Largest substep relative to `max(1, |lambda|)` on a first attempt.
    pub rel_substep: f64,
}

impl KatoTransport {
    pub fn new(limit: BlockLimit, side: Side) -> Self {
        Self { limit, side, rel_substep: 0.02 }
    }

    pub fn projector(&self, lambda: Complex64) -> Result<CMat4> {
        Ok(checked_projector(&self.limit, self.side, lambda)?.0)
    }

    /// Lower estimate of the distance from `lambda` to the nearest branch
    /// point of the projector. A double root of `a v^2 + b v + c` at
    /// root separation `g` sits `|a| g^2 / 4` away in `lambda`.
    pub fn singular_distance(&self, lambda: Complex64) -> f64 {
        let gap = spectral_split(&self.limit, self.side, lambda).gap;
        0.25 * self.limit.d.min(1.0) * gap * gap
    }

    /// Derivative of the analytic projector from the trapezoid rule on a
    /// circle well inside the disk of analyticity.
    fn dprojector(&self, lambda: Complex64) -> Result<CMat4> {
        const POINTS: usize = 12;
        let rho = (1e-3 * lambda.norm().max(1.0)).min(0.08 * self.singular_distance(lambda));
        let mut acc = CMat4::zeros();
        for j in 0..POINTS {
            let w = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / POINTS as f64);
            acc += self.projector(lambda + w * rho)? * w.conj();
        }
        Ok(acc / Complex64::new(rho * POINTS as f64, 0.0))
    }

    fn rk4(&self, from: Complex64, to: Complex64, frame: &CFrame, steps: usize) -> Result<CFrame> {
        let dl = (to - from) / steps as f64;
        let mut r = *frame;
        let half = Complex64::new(0.5, 0.0);
        let two = Complex64::new(2.0, 0.0);
        let rhs = |lam: Complex64, r: &CFrame| -> Result<CFrame> { Ok(self.dprojector(lam)? * r * dl) };
        for i in 0..steps {
            let l0 = from + dl * i as f64;
            let k1 = rhs(l0, &r)?;
            let k2 = rhs(l0 + dl * 0.5, &(r + k1 * half))?;
            let k3 = rhs(l0 + dl * 0.5, &(r + k2 * half))?;
            let k4 = rhs(l0 + dl, &(r + k3))?;
            r += (k1 + k2 * two + k3 * two + k4) / Complex64::new(6.0, 0.0);
        }
        Ok(r)
    }

    /// Frame at `to` from the frame at `from`, with the relative
    /// projection defect measured before re-projection.
    pub fn transport(&self, from: Complex64, frame: &CFrame, to: Complex64) -> Result<(CFrame, f64)> {
        self.transport_graded(from, frame, to, 0)
    }

    /// Segments much longer than their distance to a branch point are
    /// split so substeps shrink only where the projector varies quickly.
    fn transport_graded(&self, from: Complex64, frame: &CFrame, to: Complex64, depth: usize) -> Result<(CFrame, f64)> {
        if from == to {
            return Ok((*frame, 0.0));
        }
        let near = self.singular_distance(from).min(self.singular_distance(to));
        let len = (to - from).norm();
        if depth < 48 && len > 20.0 * near {
            let mid = from + (to - from) * 0.5;
            let (f, d1) = self.transport_graded(from, frame, mid, depth + 1)?;
            let (g, d2) = self.transport_graded(mid, &f, to, depth + 1)?;
            return Ok((g, d1.max(d2)));
        }
        let scale = from.norm().max(to.norm()).max(1.0).min(10.0 * near);
        let mut steps = (((to - from).norm() / (self.rel_substep * scale)).ceil() as usize).max(1);
        let p_to = self.projector(to)?;
        let mut last = None;
        for _ in 0..=MAX_HALVINGS {
            let r = self.rk4(from, to, frame, steps)?;
            let pr = p_to * r;
            let defect = (pr - r).norm() / r.norm();
            if defect <= TRANSPORT_TOL {
                return Ok((pr, defect));
            }
            last = Some((pr, defect));
            steps *= 2;
        }
        Ok(last.expect("at least one attempt"))
    }
}

/// Frames of both bundles at one `lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FramePair {
    pub minus: CFrame,
    pub plus: CFrame,
}

impl FramePair {
    pub fn conj(&self) -> Self {
        Self { minus: self.minus.map(|c| c.conj()), plus: self.plus.map(|c| c.conj()) }
    }
}

/// Analytic frames along an ordered list of contour nodes.
#[derive(Debug, Clone)]
pub struct KatoFrame {
    pub lambdas: Vec<Complex64>,
    pub frames: Vec<FramePair>,
    /// Largest relative projection defect of a transported frame before
    /// re-projection.
    pub max_defect: f64,
}

/// Initial eigenvector frames at the first node, transported node to node.
pub fn kato_frames(nodes: &[Complex64], minus: &BlockLimit, plus: &BlockLimit) -> Result<KatoFrame> {
    let tm = KatoTransport::new(*minus, Side::Minus);
    let tp = KatoTransport::new(*plus, Side::Plus);
    let mut frames = Vec::with_capacity(nodes.len());
    let mut max_defect = 0.0f64;
    for (i, &lam) in nodes.iter().enumerate() {
        let pair = if i == 0 {
            FramePair {
                minus: initial_frame(minus, Side::Minus, lam)?,
                plus: initial_frame(plus, Side::Plus, lam)?,
            }
        } else {
            let prev: &FramePair = &frames[i - 1];
            let (m, dm) = tm.transport(nodes[i - 1], &prev.minus, lam)?;
            let (p, dp) = tp.transport(nodes[i - 1], &prev.plus, lam)?;
            max_defect = max_defect.max(dm).max(dp);
            FramePair { minus: m, plus: p }
        };
        frames.push(pair);
    }
    Ok(KatoFrame { lambdas: nodes.to_vec(), frames, max_defect })
}
