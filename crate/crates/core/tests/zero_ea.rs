use majda_core::model::ModelParams;
use majda_core::profile::{solve_profile, Guess, SolverOptions};
use majda_core::spectral::{kato_frames, EvansOptions, EvansProblem, ProfileSystem};
use majda_core::winding::{contour_winding, WindingOptions};
use majda_core::zero_ea::{
    bench_frontier, shoot_zero_ea, solve_zero_ea_profile, JumpConvention, ZeroEaOutcome, ZeroEaSystem,
};
use num_complex::Complex64;

fn heaviside(q: f64) -> ModelParams {
    ModelParams { q, ea: 0.0, ..ModelParams::default() }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

/// Evans values at `probes`, with frames carried from `lambda = 4`.
fn values<P: EvansProblem>(sys: &P, probes: &[Complex64], opts: &EvansOptions) -> Vec<Complex64> {
    let mut nodes = vec![c(4.0, 0.0)];
    nodes.extend_from_slice(probes);
    let (m, p) = sys.limits();
    let kf = kato_frames(&nodes, &m, &p).unwrap();
    kf.lambdas[1..].iter().zip(&kf.frames[1..]).map(|(l, f)| sys.evaluate(*l, f, opts).unwrap().value()).collect()
}

const PROBES: [Complex64; 5] =
    [Complex64::new(3.0, 0.0), Complex64::new(1.0, 1.0), Complex64::new(0.0, 2.0), Complex64::new(0.5, 0.0), Complex64::new(0.0, 0.0)];

#[test]
fn winding_vanishes_on_radius_ten() {
    let prof = solve_zero_ea_profile(&heaviside(0.2)).unwrap();
    for convention in [JumpConvention::Direct, JumpConvention::Similarity] {
        let run = contour_winding(&ZeroEaSystem { prof: &prof, convention }, 10.0, &WindingOptions::default()).unwrap();
        assert!(run.result.certified, "{convention:?}: {:?}", run.result);
        assert_eq!(run.result.winding, 0);
    }
}

#[test]
fn jump_conventions_agree() {
    let prof = solve_zero_ea_profile(&heaviside(0.15)).unwrap();
    let tight = EvansOptions { rtol: 1e-11, atol: 1e-13, ..EvansOptions::default() };
    let a = values(&ZeroEaSystem { prof: &prof, convention: JumpConvention::Direct }, &PROBES, &tight);
    let b = values(&ZeroEaSystem { prof: &prof, convention: JumpConvention::Similarity }, &PROBES, &tight);
    let worst = a.iter().zip(&b).map(|(x, y)| rel(*x, *y)).fold(0.0, f64::max);
    assert!(worst <= 1e-8, "conventions differ by {worst:e}");
}

#[test]
fn conjugate_symmetry() {
    let prof = solve_zero_ea_profile(&heaviside(0.2)).unwrap();
    let sys = ZeroEaSystem { prof: &prof, convention: JumpConvention::Direct };
    let upper = [c(1.0, 1.0), c(0.3, 2.5), c(2.0, 0.4)];
    let lower: Vec<Complex64> = upper.iter().map(|l| l.conj()).collect();
    let mut probes = upper.to_vec();
    probes.extend(&lower);
    let v = values(&sys, &probes, &EvansOptions::default());
    for j in 0..3 {
        assert!(rel(v[j + 3], v[j].conj()) <= 1e-6, "at {}: {} vs {}", probes[j], v[j], v[j + 3]);
    }
    // real on the real axis
    let real = values(&sys, &[c(0.0, 0.0), c(2.0, 0.0)], &EvansOptions::default());
    for v in real {
        assert!(v.im.abs() <= 1e-8 * v.norm());
    }
}

#[test]
fn arrhenius_evans_converges_to_heaviside_limit() {
    // away from the frontier; near it the profiles themselves converge slowly
    let q = 0.1;
    let zero = solve_zero_ea_profile(&heaviside(q)).unwrap();
    let opts = EvansOptions::default();
    let limit = values(&ZeroEaSystem { prof: &zero, convention: JumpConvention::Direct }, &PROBES, &opts);
    let mut gaps = Vec::new();
    for ea in [0.05, 0.01] {
        let p = ModelParams { q, ea, ..ModelParams::default() };
        let prof = solve_profile(&p, Guess::Seed, None, &SolverOptions::default()).unwrap();
        let v = values(&ProfileSystem::new(&prof), &PROBES, &opts);
        let gap = v.iter().zip(&limit).map(|(a, b)| rel(*a, *b)).fold(0.0, f64::max);
        gaps.push(gap);
    }
    assert!(gaps[1] < 0.6 * gaps[0], "sup-norm gaps {gaps:?}");
    assert!(gaps[1] < 0.1, "sup-norm gaps {gaps:?}");
}

#[test]
fn connection_is_lost_once_in_q() {
    let base = heaviside(0.2);
    let frontier = bench_frontier(&base, 1e-10).unwrap();
    assert!((frontier.q_star - 0.226125505).abs() <= 1e-5, "q* = {}", frontier.q_star);
    let mut transitions = Vec::new();
    let mut last = None;
    for j in 1..=490 {
        let q = 0.001 * j as f64;
        let connects = shoot_zero_ea(&base.with_q(q)).unwrap().outcome == ZeroEaOutcome::Connection;
        if let Some(prev) = last {
            if prev != connects {
                transitions.push(q);
            }
        }
        last = Some(connects);
    }
    assert_eq!(transitions.len(), 1, "transitions at {transitions:?}");
    assert!(transitions[0] > frontier.q_connect && transitions[0] - 0.001 < frontier.q_fail);
}

#[test]
fn reactant_profile_matches_its_equation() {
    let prof = solve_zero_ea_profile(&heaviside(0.1)).unwrap();
    let cf = prof.coeffs;
    let d = prof.params.d;
    let k = prof.params.k;
    // D z'' + z' = k z on the burning side, D z'' + z' = 0 ahead of it
    for x in [-8.0, -2.0, -0.3, 0.4, 3.0] {
        let h = 1e-4;
        let z2 = (cf.z(x + h) - 2.0 * cf.z(x) + cf.z(x - h)) / (h * h);
        let rhs = if x < 0.0 { k * cf.z(x) } else { 0.0 };
        assert!((d * z2 + cf.dz(x) - rhs).abs() < 1e-5, "x = {x}");
    }
    assert!((cf.z(1e-12) - cf.z(-1e-12)).abs() < 1e-9);
    assert!((cf.dz(1e-12) - cf.dz(-1e-12)).abs() < 1e-9);
}
