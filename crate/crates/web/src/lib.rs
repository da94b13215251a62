//! Browser front-end: three operations exchanged as JSON strings so the page
//! needs no bindings beyond `wasm-bindgen`'s string passing.

use majda_core::model::ModelParams;
use majda_core::profile::{solve_profile, Guess, SolverOptions};
use majda_core::spectral::{hf_bound, ProfileSystem};
use majda_core::winding::{contour_winding_perturbed, stability_report, Verdict, WindingOptions};
use majda_core::zero_ea::{bench_frontier, shoot_zero_ea, solve_zero_ea_profile, JumpConvention, ZeroEaOutcome, ZeroEaSystem};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Points sent to the page for a profile plot.
const PLOT_POINTS: usize = 600;
const ZERO_EA_RADIUS: f64 = 10.0;

#[derive(Debug, Serialize)]
pub struct ProfileView {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub z: Vec<f64>,
    pub u_minus: f64,
    pub u_weak: f64,
    pub spike_height: Option<f64>,
    #[serde(rename = "L")]
    pub l: Option<f64>,
    #[serde(rename = "M")]
    pub m: Option<f64>,
    #[serde(rename = "R")]
    pub r: Option<f64>,
    /// Zero-ea only: outcome of the shot and the bench frontier in `q`.
    pub outcome: Option<ZeroEaOutcome>,
    pub q_star: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct ContourView {
    pub radius: f64,
    pub lambda_re: Vec<f64>,
    pub lambda_im: Vec<f64>,
    /// `E / |E(R)|`, so the plot scale does not depend on the normalization.
    pub e_re: Vec<f64>,
    pub e_im: Vec<f64>,
    pub winding: i64,
    pub certified: bool,
    pub max_arg_step: f64,
    pub verdict: Verdict,
}

fn parse(params: &str) -> Result<ModelParams, String> {
    let p: ModelParams = serde_json::from_str(params).map_err(|e| e.to_string())?;
    p.checked().map_err(|e| e.to_string())?;
    Ok(p)
}

fn sample_range(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|j| lo + (hi - lo) * j as f64 / (n - 1) as f64).collect()
}

/// Profile on a uniform plot grid, with the exclusion radius; `ea = 0`
/// uses the Heaviside solver and adds the bench frontier.
pub fn profile_view(params: &str) -> Result<ProfileView, String> {
    let p = parse(params)?;
    if p.ea == 0.0 {
        let prof = shoot_zero_ea(&p).map_err(|e| e.to_string())?;
        let q_star = bench_frontier(&p, 1e-8).ok().map(|f| f.q_star);
        let x = sample_range(prof.x_minus.max(-80.0), prof.x_plus.min(20.0), PLOT_POINTS);
        let u = x.iter().map(|&x| if x >= prof.x_minus { prof.u(x) } else { f64::NAN }).collect();
        let z = x.iter().map(|&x| prof.coeffs.z(x)).collect();
        return Ok(ProfileView {
            x,
            u,
            z,
            u_minus: prof.u_minus,
            u_weak: prof.u_weak,
            spike_height: None,
            l: None,
            m: None,
            r: None,
            outcome: Some(prof.outcome),
            q_star,
        });
    }
    let s = solve_profile(&p, Guess::Seed, None, &SolverOptions::default()).map_err(|e| e.to_string())?;
    let b = hf_bound(&s);
    let x = sample_range(s.x_minus, s.x_plus, PLOT_POINTS);
    let states: Vec<_> = x.iter().map(|&x| s.state(x)).collect();
    Ok(ProfileView {
        u: states.iter().map(|v| v.u).collect(),
        z: states.iter().map(|v| v.z).collect(),
        x,
        u_minus: s.ends.u_minus_strong,
        u_weak: s.ends.u_minus_weak,
        spike_height: Some(s.spike_height()),
        l: Some(b.l),
        m: Some(b.m),
        r: Some(b.r),
        outcome: None,
        q_star: None,
    })
}

/// Evans function on the closed half-disk contour. A nonpositive `radius`
/// selects the exclusion radius (10 for `ea = 0`).
pub fn contour_view(params: &str, radius: f64, nodes: usize) -> Result<ContourView, String> {
    let p = parse(params)?;
    let opts = WindingOptions { nodes: nodes.max(8), ..WindingOptions::default() };
    let (run, bound) = if p.ea == 0.0 {
        let prof = solve_zero_ea_profile(&p).map_err(|e| e.to_string())?;
        let r = if radius > 0.0 { radius } else { ZERO_EA_RADIUS };
        let sys = ZeroEaSystem { prof: &prof, convention: JumpConvention::Direct };
        (contour_winding_perturbed(&sys, r, &opts), None)
    } else {
        let s = solve_profile(&p, Guess::Seed, None, &SolverOptions::default()).map_err(|e| e.to_string())?;
        let b = hf_bound(&s);
        let r = if radius > 0.0 { radius } else { b.r };
        (contour_winding_perturbed(&ProfileSystem::new(&s), r, &opts), Some(b))
    };
    let run = run.map_err(|e| e.to_string())?;
    let rec = stability_report(&p, bound.as_ref(), run.radius, Ok(&run.result));
    let scale = run.trace.values[0].ln_modulus();
    let e: Vec<_> = run
        .trace
        .values
        .iter()
        .map(|v| num_complex::Complex64::from_polar((v.ln_modulus() - scale).exp(), v.arg()))
        .collect();
    Ok(ContourView {
        radius: run.radius,
        lambda_re: run.trace.values.iter().map(|v| v.lambda.re).collect(),
        lambda_im: run.trace.values.iter().map(|v| v.lambda.im).collect(),
        e_re: e.iter().map(|c| c.re).collect(),
        e_im: e.iter().map(|c| c.im).collect(),
        winding: run.result.winding,
        certified: run.result.certified,
        max_arg_step: run.result.max_arg_step,
        verdict: rec.verdict,
    })
}

fn to_json<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string())).map_err(|e| JsValue::from_str(&e))
}

/// JSON parameters in, JSON profile view out.
#[wasm_bindgen]
pub fn profile(params: &str) -> Result<String, JsValue> {
    to_json(profile_view(params))
}

#[wasm_bindgen]
pub fn contour(params: &str, radius: f64, nodes: usize) -> Result<String, JsValue> {
    to_json(contour_view(params, radius, nodes))
}

/// Exclusion radius and its suprema as JSON.
#[wasm_bindgen]
pub fn hfbound(params: &str) -> Result<String, JsValue> {
    let r = parse(params).and_then(|p| {
        let s = solve_profile(&p, Guess::Seed, None, &SolverOptions::default()).map_err(|e| e.to_string())?;
        Ok(hf_bound(&s))
    });
    to_json(r)
}
