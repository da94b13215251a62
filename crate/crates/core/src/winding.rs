//! Semicircular contours, argument tracking of the Evans function with
//! adaptive bisection, and the resulting stability verdict.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::spectral::{
    evans_at_nodes, kato_frames, EvansOptions, EvansProblem, EvansTrace, EvansValue, FramePair,
    HighFreqBound, KatoTransport, Side,
};

/// Largest admissible argument change between neighboring nodes.
pub const MAX_ARG_STEP: f64 = 0.2;
/// Bisection rounds before a segment is declared uncertified.
pub const MAX_REFINE_DEPTH: usize = 12;
/// Below this modulus a node is treated as hitting a zero.
pub const NEAR_ZERO: f64 = 1e-14;
/// Geometric growth of the spacing along the imaginary axis, away from 0.
const AXIS_RATIO: f64 = 1.2;

/// Boundary of the right half-disk of radius `radius`, traversed
/// counterclockwise from `radius`: arc to `i radius`, down the imaginary
/// axis through `0` to `-i radius`, and back along the arc.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    pub radius: f64,
    /// First-quadrant nodes from `radius` to `0`, the corner `i radius`
    /// included.
    pub quadrant: Vec<Complex64>,
    /// Evaluate only the first quadrant and reflect by conjugation.
    pub symmetric: bool,
}

/// Contour with `n` first-quadrant nodes, about 61% on the arc (its share
/// of the length) and the rest on the axis, clustered toward `0`.
pub fn build_contour(radius: f64, n: usize) -> Result<Contour> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidParameter(format!("contour radius must be positive, got {radius}")));
    }
    if n < 8 {
        return Err(Error::InvalidParameter(format!("need at least 8 first-quadrant nodes, got {n}")));
    }
    let arc_share = 0.5 * PI / (0.5 * PI + 1.0);
    let n_arc = ((n as f64 * arc_share).round() as usize).clamp(2, n - 1);
    let n_axis = n - n_arc;
    let mut quadrant = Vec::with_capacity(n);
    for j in 0..n_arc {
        let theta = 0.5 * PI * j as f64 / (n_arc - 1) as f64;
        quadrant.push(Complex64::from_polar(radius, theta));
    }
    // pin the corners exactly
    quadrant[0] = Complex64::new(radius, 0.0);
    quadrant[n_arc - 1] = Complex64::new(0.0, radius);
    let h0 = radius * (AXIS_RATIO - 1.0) / (AXIS_RATIO.powi(n_axis as i32) - 1.0);
    for m in (0..n_axis).rev() {
        let y = if m == 0 { 0.0 } else { h0 * (AXIS_RATIO.powi(m as i32) - 1.0) / (AXIS_RATIO - 1.0) };
        quadrant.push(Complex64::new(0.0, y));
    }
    Ok(Contour { radius, quadrant, symmetric: true })
}

impl Contour {
    /// Full closed node list: the quadrant, then its conjugate reflection
    /// in reverse, so that the last node repeats the first.
    pub fn nodes(&self) -> Vec<Complex64> {
        let mut v = self.quadrant.clone();
        v.extend(self.quadrant.iter().rev().map(|z| z.conj()));
        v
    }

    /// Nodes at which the Evans function is evaluated.
    pub fn evaluation_nodes(&self) -> Vec<Complex64> {
        if self.symmetric {
            self.quadrant.clone()
        } else {
            self.nodes()
        }
    }

    fn on_arc(&self, z: Complex64) -> bool {
        (z.norm() - self.radius).abs() <= 1e-12 * self.radius
    }

    /// Contour point halfway between two neighboring nodes.
    pub fn midpoint(&self, a: Complex64, b: Complex64) -> Complex64 {
        let on_axis = a.re.abs() <= 1e-12 * self.radius && b.re.abs() <= 1e-12 * self.radius;
        if !on_axis && self.on_arc(a) && self.on_arc(b) {
            Complex64::from_polar(self.radius, 0.5 * (a.arg() + b.arg()))
        } else {
            0.5 * (a + b)
        }
    }
}

/// Principal-value argument change from `a` to `b`.
pub fn arg_step(a: &EvansValue, b: &EvansValue) -> f64 {
    let d = b.arg() - a.arg();
    d - 2.0 * PI * (d / (2.0 * PI)).round()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindingResult {
    pub winding: i64,
    pub max_arg_step: f64,
    /// Evans evaluations, refinement included.
    pub node_count: usize,
    pub refinement_rounds: usize,
    pub certified: bool,
    /// Total argument change over the closed contour.
    pub total_arg: f64,
}

fn check_nonzero(v: &EvansValue) -> Result<()> {
    if !(v.ln_modulus() >= NEAR_ZERO.ln()) {
        return Err(Error::NearZeroOnContour { lambda: v.lambda, modulus: v.ln_modulus().exp() });
    }
    Ok(())
}

/// Winding number of a traced path with adaptive refinement.
///
/// `trace` is either a closed contour (`symmetric == false`, last node
/// equal to the first) or the first-quadrant path from `R` to `0`
/// (`symmetric == true`), whose argument change is doubled. Whenever a
/// step exceeds [`MAX_ARG_STEP`], `refine` is asked for the values at the
/// midpoints of all offending segments `(i, i + 1)`; this repeats up to
/// [`MAX_REFINE_DEPTH`] rounds.
pub fn winding_number<F>(mut trace: Vec<EvansValue>, symmetric: bool, mut refine: F) -> Result<(WindingResult, Vec<EvansValue>)>
where
    F: FnMut(&[(EvansValue, EvansValue)]) -> Result<Vec<EvansValue>>,
{
    trace.iter().try_for_each(check_nonzero)?;
    let mut node_count = trace.len();
    let mut rounds = 0;
    loop {
        let bad: Vec<usize> = (0..trace.len().saturating_sub(1))
            .filter(|&i| arg_step(&trace[i], &trace[i + 1]).abs() > MAX_ARG_STEP)
            .collect();
        if bad.is_empty() {
            break;
        }
        if rounds == MAX_REFINE_DEPTH {
            let i = bad
                .iter()
                .copied()
                .max_by(|&a, &b| {
                    arg_step(&trace[a], &trace[a + 1]).abs().total_cmp(&arg_step(&trace[b], &trace[b + 1]).abs())
                })
                .expect("nonempty");
            return Err(Error::UncertifiedWinding {
                from: trace[i].lambda,
                to: trace[i + 1].lambda,
                arg_step: arg_step(&trace[i], &trace[i + 1]).abs(),
            });
        }
        rounds += 1;
        let segs: Vec<(EvansValue, EvansValue)> = bad.iter().map(|&i| (trace[i], trace[i + 1])).collect();
        let mids = refine(&segs)?;
        mids.iter().try_for_each(check_nonzero)?;
        node_count += mids.len();
        let mut next = Vec::with_capacity(trace.len() + mids.len());
        let mut mi = mids.into_iter();
        let mut bi = bad.iter().peekable();
        for (i, v) in trace.iter().enumerate() {
            next.push(*v);
            if bi.peek() == Some(&&i) {
                bi.next();
                next.push(mi.next().expect("one midpoint per segment"));
            }
        }
        trace = next;
    }
    let steps: Vec<f64> = trace.windows(2).map(|w| arg_step(&w[0], &w[1])).collect();
    let mut total: f64 = steps.iter().sum();
    if symmetric {
        total *= 2.0;
    }
    let max_arg_step = steps.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let turns = total / (2.0 * PI);
    let winding = turns.round() as i64;
    let certified = max_arg_step <= MAX_ARG_STEP && (turns - winding as f64).abs() <= 1e-3;
    let result = WindingResult { winding, max_arg_step, node_count, refinement_rounds: rounds, certified, total_arg: total };
    Ok((result, trace))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindingOptions {
    /// First-quadrant node count.
    pub nodes: usize,
    pub symmetric: bool,
    pub evans: EvansOptions,
}

impl Default for WindingOptions {
    fn default() -> Self {
        Self { nodes: 120, symmetric: true, evans: EvansOptions::default() }
    }
}

/// Outcome of a full contour computation.
#[derive(Debug, Clone, PartialEq)]
pub struct WindingRun {
    pub radius: f64,
    pub result: WindingResult,
    /// Values on the closed contour, refinement nodes included.
    pub trace: EvansTrace,
}

fn map_segments<T: Send, F>(segs: &[(EvansValue, EvansValue)], f: F) -> Vec<T>
where
    F: Fn(&(EvansValue, EvansValue)) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        segs.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        segs.iter().map(f).collect()
    }
}

/// Evaluate the Evans function along the contour of the given radius and
/// count its winding.
pub fn contour_winding<P: EvansProblem + ?Sized>(sys: &P, radius: f64, opts: &WindingOptions) -> Result<WindingRun> {
    let mut contour = build_contour(radius, opts.nodes)?;
    contour.symmetric = opts.symmetric;
    let nodes = contour.evaluation_nodes();
    let (minus, plus) = sys.limits();
    let kato = kato_frames(&nodes, &minus, &plus)?;
    let values = evans_at_nodes(sys, &kato, &opts.evans)?;

    // frames of every traced node, kept in step with the trace for refinement
    let mut frames: Vec<(Complex64, FramePair)> = kato.lambdas.iter().copied().zip(kato.frames.iter().copied()).collect();
    let tm = KatoTransport::new(minus, Side::Minus);
    let tp = KatoTransport::new(plus, Side::Plus);

    let (result, trace) = winding_number(values, opts.symmetric, |segs| {
        let out: Vec<Result<(EvansValue, FramePair)>> = map_segments(segs, |(a, b)| {
            let from = frames
                .iter()
                .find(|(l, _)| *l == a.lambda)
                .map(|(_, f)| *f)
                .expect("frame of a traced node");
            let mid = contour.midpoint(a.lambda, b.lambda);
            let (m, _) = tm.transport(a.lambda, &from.minus, mid)?;
            let (p, _) = tp.transport(a.lambda, &from.plus, mid)?;
            let pair = FramePair { minus: m, plus: p };
            Ok((sys.evaluate(mid, &pair, &opts.evans)?, pair))
        });
        let mut mids = Vec::with_capacity(out.len());
        for r in out {
            let (v, pair) = r?;
            frames.push((v.lambda, pair));
            mids.push(v);
        }
        Ok(mids)
    })?;

    let values = if opts.symmetric {
        let mut full = trace.clone();
        full.extend(trace.iter().rev().map(|v| EvansValue {
            lambda: v.lambda.conj(),
            det: v.det.conj(),
            ledger: v.ledger.conj(),
        }));
        full
    } else {
        trace
    };
    Ok(WindingRun { radius, result, trace: EvansTrace { values } })
}

/// [`contour_winding`], retried at radius `1.02 R` and then `0.98 R` when a
/// node lands on a near-zero of the Evans function.
pub fn contour_winding_perturbed<P: EvansProblem + ?Sized>(sys: &P, radius: f64, opts: &WindingOptions) -> Result<WindingRun> {
    match contour_winding(sys, radius, opts) {
        Err(Error::NearZeroOnContour { .. }) => match contour_winding(sys, 1.02 * radius, opts) {
            Err(Error::NearZeroOnContour { .. }) => contour_winding(sys, 0.98 * radius, opts),
            other => other,
        },
        other => other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Stable,
    Unstable,
    Inconclusive,
}

pub const VERDICT_SCHEMA_VERSION: u32 = 1;

/// Machine-readable stability verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub schema_version: u32,
    pub params: ModelParams,
    #[serde(rename = "R")]
    pub radius: f64,
    pub bound: Option<HighFreqBound>,
    pub winding: Option<i64>,
    pub max_arg_step: Option<f64>,
    pub node_count: usize,
    pub certified: bool,
    pub verdict: Verdict,
    /// Unstable eigenvalues counted with multiplicity, when certified.
    pub unstable_count: Option<u64>,
    pub note: Option<String>,
}

/// Spectrally stable iff the certified winding on the half-disk of radius
/// at least the exclusion radius is zero.
pub fn stability_report(
    params: &ModelParams,
    bound: Option<&HighFreqBound>,
    radius: f64,
    winding: std::result::Result<&WindingResult, &Error>,
) -> VerdictRecord {
    let mut rec = VerdictRecord {
        schema_version: VERDICT_SCHEMA_VERSION,
        params: *params,
        radius,
        bound: bound.copied(),
        winding: None,
        max_arg_step: None,
        node_count: 0,
        certified: false,
        verdict: Verdict::Inconclusive,
        unstable_count: None,
        note: None,
    };
    match winding {
        Ok(w) => {
            rec.winding = Some(w.winding);
            rec.max_arg_step = Some(w.max_arg_step);
            rec.node_count = w.node_count;
            rec.certified = w.certified;
            let covers = bound.map_or(true, |b| radius >= b.r);
            if !covers {
                rec.note = Some(format!("radius {radius} is below the exclusion radius"));
            }
            if w.certified && w.winding >= 0 {
                rec.unstable_count = Some(w.winding as u64);
                rec.verdict = if w.winding > 0 {
                    Verdict::Unstable
                } else if covers {
                    Verdict::Stable
                } else {
                    Verdict::Inconclusive
                };
            }
        }
        Err(e) => rec.note = Some(e.to_string()),
    }
    rec
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace_of(contour: &Contour, f: impl Fn(Complex64) -> Complex64) -> Vec<EvansValue> {
        contour.evaluation_nodes().into_iter().map(|l| EvansValue::from_value(l, f(l))).collect()
    }

    fn synthetic(contour: &Contour, f: impl Fn(Complex64) -> Complex64 + Copy) -> Result<WindingResult> {
        let tr = trace_of(contour, f);
        let (res, _) = winding_number(tr, contour.symmetric, |segs| {
            Ok(segs
                .iter()
                .map(|(a, b)| {
                    let m = contour.midpoint(a.lambda, b.lambda);
                    EvansValue::from_value(m, f(m))
                })
                .collect())
        })?;
        Ok(res)
    }

    #[test]
    fn contour_shape() {
        let c = build_contour(4.0, 120).unwrap();
        let all = c.nodes();
        assert_eq!(all.len(), 240);
        assert_eq!(all[0], all[239]);
        assert_eq!(c.quadrant[0], Complex64::new(4.0, 0.0));
        assert!(c.quadrant.contains(&Complex64::new(0.0, 4.0)));
        assert_eq!(*c.quadrant.last().unwrap(), Complex64::new(0.0, 0.0));
        for z in &all {
            let on_arc = (z.norm() - 4.0).abs() < 1e-12;
            let on_axis = z.re.abs() < 1e-12 && z.im.abs() <= 4.0;
            assert!(on_arc || on_axis);
        }
        let small = build_contour(1.0, 8).unwrap();
        assert_eq!(small.nodes().len(), 16);
        assert!(build_contour(1.0, 7).is_err());
    }

    #[test]
    fn contour_is_counterclockwise() {
        // signed area of the closed polygon is positive
        let all = build_contour(2.0, 40).unwrap().nodes();
        let area: f64 = all.windows(2).map(|w| w[0].re * w[1].im - w[1].re * w[0].im).sum();
        assert!(area > 0.0);
    }

    #[test]
    fn axis_nodes_cluster_at_origin() {
        let c = build_contour(4.0, 120).unwrap();
        let axis: Vec<f64> = c.quadrant.iter().filter(|z| z.re.abs() < 1e-12).map(|z| z.im).collect();
        let gaps: Vec<f64> = axis.windows(2).map(|w| w[0] - w[1]).collect();
        assert!(gaps.windows(2).all(|g| (g[0] / g[1] - AXIS_RATIO).abs() < 1e-9));
    }

    #[test]
    fn constant_trace_has_zero_winding() {
        let c = build_contour(4.0, 120).unwrap();
        let r = synthetic(&c, |_| Complex64::new(1.0, 0.0)).unwrap();
        assert_eq!(r.winding, 0);
        assert!(r.certified);
    }

    #[test]
    fn simple_zero_inside() {
        let mut c = build_contour(4.0, 120).unwrap();
        for sym in [true, false] {
            c.symmetric = sym;
            let r = synthetic(&c, |l| l - 1.0).unwrap();
            assert_eq!(r.winding, 1);
            assert!(r.certified && r.max_arg_step <= MAX_ARG_STEP);
        }
    }

    #[test]
    fn refinement_does_not_change_winding() {
        let c = build_contour(4.0, 8).unwrap();
        let f = |l: Complex64| (l - 1.0) * (l - Complex64::new(2.0, 1.0)) * (l - Complex64::new(2.0, -1.0)) * (l + 3.0);
        let coarse = synthetic(&c, f).unwrap();
        let fine = synthetic(&build_contour(4.0, 400).unwrap(), f).unwrap();
        assert_eq!(coarse.winding, 3);
        assert_eq!(fine.winding, 3);
        assert!(coarse.refinement_rounds > 0);
    }

    #[test]
    fn zero_on_contour_is_reported() {
        let c = build_contour(4.0, 16).unwrap();
        let err = synthetic(&c, |l| l - 4.0).unwrap_err();
        assert!(matches!(err, Error::NearZeroOnContour { .. }));
    }

    #[test]
    fn exhausted_refinement_is_uncertified() {
        let c = build_contour(4.0, 8).unwrap();
        // argument varies far faster than twelve bisections can resolve
        let f = |l: Complex64| Complex64::from_polar(1.0, 1e7 * (l.re + l.im));
        assert!(matches!(synthetic(&c, f), Err(Error::UncertifiedWinding { .. })));
    }

    #[test]
    fn verdicts() {
        let p = ModelParams::default();
        let ok = WindingResult { winding: 0, max_arg_step: 0.1, node_count: 120, refinement_rounds: 0, certified: true, total_arg: 0.0 };
        assert_eq!(stability_report(&p, None, 4.0, Ok(&ok)).verdict, Verdict::Stable);
        let two = WindingResult { winding: 2, ..ok };
        let rec = stability_report(&p, None, 4.0, Ok(&two));
        assert_eq!((rec.verdict, rec.unstable_count), (Verdict::Unstable, Some(2)));
        let err = Error::UncertifiedWinding { from: Complex64::new(1.0, 0.0), to: Complex64::new(0.0, 1.0), arg_step: 0.5 };
        assert_eq!(stability_report(&p, None, 4.0, Err(&err)).verdict, Verdict::Inconclusive);
        let json = serde_json::to_value(stability_report(&p, None, 4.0, Ok(&ok))).unwrap();
        for key in ["params", "R", "winding", "max_arg_step", "node_count", "certified"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }
}
