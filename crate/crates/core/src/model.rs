//! Parameter algebra of the rescaled Majda model (wave speed and viscosity
//! normalized to one): Burgers flux, Arrhenius ignition, Rankine-Hugoniot end
//! states and the physical parameter region.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the model after rescaling to unit wave speed and viscosity.
///
/// The JSON form is a flat object with keys `q`, `k`, `D`, `ea`, `u_plus`,
/// `u_ig`; every key is required.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Heat release.
    pub q: f64,
    /// Reaction rate.
    pub k: f64,
    /// Species diffusion ratio.
    #[serde(rename = "D")]
    pub d: f64,
    /// Activation energy; zero selects the Heaviside ignition limit.
    pub ea: f64,
    /// Unburned state.
    pub u_plus: f64,
    /// Ignition threshold.
    pub u_ig: f64,
}

/// Parameters in physical units, before the rescaling that sets `s = B = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub q: f64,
    pub k: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub ea: f64,
    pub u_plus: f64,
    pub u_ig: f64,
}

/// Burned end states solving the Rankine-Hugoniot relation together with the
/// characteristic speeds `f'(u)` on either side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndStates {
    pub u_minus_strong: f64,
    pub u_minus_weak: f64,
    pub u_minus_cj: f64,
    pub a_minus: f64,
    pub a_plus: f64,
}

/// Connection type implied by the parameters (wave speed is one).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    StrongDetonation,
    ChapmanJouguet,
    /// No burned state exists: `q > q_max(u_plus)`.
    BeyondCj,
}

/// Result of [`validate`]: every failed invariant is listed, nothing panics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub valid: bool,
    pub failures: Vec<String>,
    /// `q_max(u_plus) - q`; negative beyond the CJ boundary.
    pub cj_distance: f64,
    pub regime: Regime,
}

/// Burgers flux `u^2 / 2`.
#[inline]
pub fn flux(u: f64) -> f64 {
    0.5 * u * u
}

#[inline]
pub fn flux_deriv(u: f64) -> f64 {
    u
}

#[inline]
pub fn flux_second(_u: f64) -> f64 {
    1.0
}

/// Rescale physical parameters to the frame with unit wave speed `s` and
/// unit viscosity `b`.
///
/// Space scales by `s/b`, time by `s^2/b` and the state by `1/s`, so that
/// `k -> k b / s^2`, `q -> q / s`, `D -> D / b` and every state-valued
/// quantity (`u_plus`, `u_ig`, and `ea`, which enters through `u - u_ig`)
/// is divided by `s`.
pub fn nondimensionalize(s: f64, b: f64, raw: &PhysicalParams) -> Result<ModelParams> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidParameter(format!("wave speed must be positive, got {s}")));
    }
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::InvalidParameter(format!("viscosity must be positive, got {b}")));
    }
    Ok(ModelParams {
        q: raw.q / s,
        k: raw.k * b / (s * s),
        d: raw.d / b,
        ea: raw.ea / s,
        u_plus: raw.u_plus / s,
        u_ig: raw.u_ig / s,
    })
}

/// Upper heat-release bound `(1 - u_plus)^2 / 2` (the CJ boundary).
pub fn q_max(u_plus: f64) -> f64 {
    0.5 * (1.0 - u_plus) * (1.0 - u_plus)
}

/// The 25 heat-release values of the standard sweep for `u_plus = 0`.
pub const Q_GRID: [f64; 25] = [
    0.001, 0.005, 0.01, 0.025, 0.05, 0.1, 0.125, 0.2, 0.25, 0.3, 0.32, 0.37, 0.40, 0.425, 0.44, 0.45, 0.46, 0.47,
    0.48, 0.485, 0.49, 0.492, 0.494, 0.496, 0.499,
];

/// [`Q_GRID`] rescaled to `q_max(u_plus)`; exact for `u_plus = 0`.
pub fn q_grid(u_plus: f64) -> Vec<f64> {
    let scale = q_max(u_plus) / 0.5;
    Q_GRID.iter().map(|q| if u_plus == 0.0 { *q } else { q * scale }).collect()
}

/// Both roots of the Rankine-Hugoniot relation for the burned state.
pub fn burned_states(p: &ModelParams) -> Result<EndStates> {
    let radicand = (1.0 - p.u_plus).powi(2) - 2.0 * p.q;
    if radicand < 0.0 || !radicand.is_finite() {
        return Err(Error::BeyondCj { u_plus: p.u_plus, q: p.q });
    }
    let root = radicand.sqrt();
    let strong = 1.0 + root;
    Ok(EndStates {
        u_minus_strong: strong,
        u_minus_weak: 1.0 - root,
        u_minus_cj: 1.0,
        a_minus: flux_deriv(strong),
        a_plus: flux_deriv(p.u_plus),
    })
}

/// Residual of the rescaled Rankine-Hugoniot relation
/// `(u_plus^2 - u_minus^2)/2 - (u_plus - u_minus + q)`.
pub fn rh_residual(u_plus: f64, u_minus: f64, q: f64) -> f64 {
    flux(u_plus) - flux(u_minus) - (u_plus - u_minus + q)
}

/// Arrhenius ignition with a cold cutoff. For `ea == 0` this is the
/// Heaviside limit (value one above threshold).
pub fn ignition(u: f64, p: &ModelParams) -> f64 {
    let dist = u - p.u_ig;
    if dist <= 0.0 {
        return 0.0;
    }
    if p.ea == 0.0 {
        return 1.0;
    }
    (-p.ea / dist).exp()
}

/// Derivative of [`ignition`]. Zero in the Heaviside limit away from the
/// threshold; the point mass is handled by the zero-activation-energy module.
pub fn ignition_deriv(u: f64, p: &ModelParams) -> f64 {
    let dist = u - p.u_ig;
    if dist <= 0.0 || p.ea == 0.0 {
        return 0.0;
    }
    let ratio = p.ea / dist;
    if ratio > 700.0 {
        return 0.0;
    }
    ratio / dist * (-ratio).exp()
}

/// Location `u_ig + ea/2` and value `4 e^{-2} / ea` of the maximum of `phi'`.
pub fn ignition_deriv_peak(p: &ModelParams) -> (f64, f64) {
    (p.u_ig + 0.5 * p.ea, 4.0 * (-2.0f64).exp() / p.ea)
}

/// Check every parameter invariant and classify the requested connection.
pub fn validate(p: &ModelParams) -> Diagnostics {
    let mut failures = Vec::new();
    let fields = [
        ("q", p.q),
        ("k", p.k),
        ("D", p.d),
        ("ea", p.ea),
        ("u_plus", p.u_plus),
        ("u_ig", p.u_ig),
    ];
    for (name, v) in fields {
        if !v.is_finite() {
            failures.push(format!("{name} is not finite"));
        }
    }
    if !(p.k > 0.0) {
        failures.push(format!("k must be positive (got {})", p.k));
    }
    if !(p.d > 0.0) {
        failures.push(format!("D must be positive (got {})", p.d));
    }
    if !(p.ea >= 0.0) {
        failures.push(format!("ea must be nonnegative (got {})", p.ea));
    }
    if !(p.u_plus >= 0.0) {
        failures.push(format!("u_plus must be nonnegative (got {})", p.u_plus));
    }
    if !(p.q >= 0.0) {
        failures.push(format!("q must be nonnegative (got {})", p.q));
    }
    let qmax = q_max(p.u_plus);
    let cj_distance = qmax - p.q;
    if p.u_plus >= 1.0 {
        failures.push(format!("u_plus = {} must lie below the sonic value 1", p.u_plus));
    }
    if p.q > qmax {
        failures.push(format!("q = {} exceeds q_max = {qmax}", p.q));
    }
    if p.u_ig <= p.u_plus {
        failures.push(format!(
            "u_ig = {} must exceed u_plus = {} (no reaction on the unburned side)",
            p.u_ig, p.u_plus
        ));
    }
    let regime = match burned_states(p) {
        Ok(ends) => {
            if p.u_ig >= ends.u_minus_strong {
                failures.push(format!(
                    "u_ig = {} must lie below the burned state u_minus = {}",
                    p.u_ig, ends.u_minus_strong
                ));
            }
            if cj_distance == 0.0 {
                Regime::ChapmanJouguet
            } else {
                Regime::StrongDetonation
            }
        }
        Err(_) => Regime::BeyondCj,
    };
    Diagnostics {
        valid: failures.is_empty(),
        failures,
        cj_distance,
        regime,
    }
}

impl ModelParams {
    pub fn end_states(&self) -> Result<EndStates> {
        burned_states(self)
    }

    /// Validate and return an error listing the failed invariants.
    pub fn checked(&self) -> Result<()> {
        let diag = validate(self);
        if diag.valid {
            Ok(())
        } else {
            Err(Error::InvalidParameter(diag.failures.join("; ")))
        }
    }

    pub fn with_q(mut self, q: f64) -> Self {
        self.q = q;
        self
    }

    pub fn with_ea(mut self, ea: f64) -> Self {
        self.ea = ea;
        self
    }

    pub fn with_k(mut self, k: f64) -> Self {
        self.k = k;
        self
    }

    pub fn with_d(mut self, d: f64) -> Self {
        self.d = d;
        self
    }
}

impl Default for ModelParams {
    /// The intermediate regime `D = k = ea = 1`, `u_plus = 0`, `u_ig = 0.1`, `q = 0.2`.
    fn default() -> Self {
        Self {
            q: 0.2,
            k: 1.0,
            d: 1.0,
            ea: 1.0,
            u_plus: 0.0,
            u_ig: 0.1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params(q: f64, u_plus: f64, u_ig: f64) -> ModelParams {
        ModelParams { q, u_plus, u_ig, ..ModelParams::default() }
    }

    #[test]
    fn q_grid_scaling() {
        assert_eq!(q_grid(0.0), Q_GRID.to_vec());
        let g = q_grid(0.2);
        assert_relative_eq!(*g.last().unwrap(), 0.499 * 0.32 / 0.5, epsilon = 1e-15);
        assert!(g.iter().all(|&q| q < q_max(0.2)));
        assert!(Q_GRID.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn unit_scaling_is_identity() {
        let raw = PhysicalParams { q: 0.3, k: 2.0, d: 0.5, ea: 1.5, u_plus: 0.1, u_ig: 0.2 };
        let p = nondimensionalize(1.0, 1.0, &raw).unwrap();
        assert_eq!(p, ModelParams { q: 0.3, k: 2.0, d: 0.5, ea: 1.5, u_plus: 0.1, u_ig: 0.2 });
    }

    #[test]
    fn scaling_divides_by_speed() {
        let raw = PhysicalParams { q: 0.4, k: 4.0, d: 1.0, ea: 1.0, u_plus: 0.2, u_ig: 0.3 };
        let p = nondimensionalize(2.0, 1.0, &raw).unwrap();
        assert_relative_eq!(p.k, 1.0);
        assert_relative_eq!(p.q, 0.2);
        assert_relative_eq!(p.u_plus, 0.1);
        assert_relative_eq!(p.u_ig, 0.15);
        let p = nondimensionalize(1.0, 4.0, &raw).unwrap();
        assert_relative_eq!(p.d, 0.25);
        assert_relative_eq!(p.k, 16.0);
    }

    #[test]
    fn nonpositive_scales_rejected() {
        let raw = PhysicalParams { q: 0.1, k: 1.0, d: 1.0, ea: 1.0, u_plus: 0.0, u_ig: 0.1 };
        assert!(matches!(nondimensionalize(0.0, 1.0, &raw), Err(Error::InvalidParameter(_))));
        assert!(matches!(nondimensionalize(1.0, -1.0, &raw), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn burned_state_examples() {
        let e = burned_states(&params(0.0, 0.0, 0.1)).unwrap();
        assert_eq!((e.u_minus_strong, e.u_minus_weak), (2.0, 0.0));
        let e = burned_states(&params(0.5, 0.0, 0.1)).unwrap();
        assert_eq!((e.u_minus_strong, e.u_minus_weak), (1.0, 1.0));
        let e = burned_states(&params(0.375, 0.0, 0.1)).unwrap();
        assert_relative_eq!(e.u_minus_strong, 1.5);
        assert!(matches!(burned_states(&params(0.6, 0.0, 0.1)), Err(Error::BeyondCj { .. })));
    }

    #[test]
    fn q_max_examples() {
        assert_eq!(q_max(0.0), 0.5);
        assert_eq!(q_max(1.0), 0.0);
        assert_relative_eq!(q_max(0.2), 0.32, epsilon = 1e-15);
    }

    #[test]
    fn ignition_examples() {
        let p = ModelParams { ea: 1.0, u_ig: 0.1, ..ModelParams::default() };
        assert_eq!(ignition(0.1, &p), 0.0);
        assert_eq!(ignition_deriv(0.1, &p), 0.0);
        assert_relative_eq!(ignition(0.6, &p), (-2.0f64).exp(), max_relative = 1e-14);
        let (at, peak) = ignition_deriv_peak(&p);
        assert_relative_eq!(at, 0.6);
        assert_relative_eq!(peak, 0.5413411329464508, max_relative = 1e-12);
    }

    #[test]
    fn ignition_deriv_sup_matches_closed_form() {
        for ea in [0.125, 1.0, 4.0] {
            let p = ModelParams { ea, u_ig: 0.1, ..ModelParams::default() };
            let n = 400_000;
            let grid_max = (1..=n)
                .map(|i| ignition_deriv(p.u_ig + 4.0 * ea * i as f64 / n as f64, &p))
                .fold(0.0f64, f64::max);
            let (_, peak) = ignition_deriv_peak(&p);
            assert!((grid_max - peak).abs() <= 1e-10 * peak.max(1.0), "ea={ea}");
        }
    }

    #[test]
    fn ignition_is_c1_at_threshold() {
        let p = ModelParams::default();
        let mut last = (f64::INFINITY, f64::INFINITY);
        for h in [1e-2, 1e-4, 1e-6] {
            let v = (ignition(p.u_ig + h, &p), ignition_deriv(p.u_ig + h, &p));
            assert!(v.0 <= last.0 && v.1 <= last.1);
            last = v;
        }
        assert!(last.0 == 0.0 && last.1 == 0.0);
    }

    #[test]
    fn flux_is_monotone_convex_on_positive_states() {
        for i in 1..100 {
            let u = i as f64 * 0.03;
            assert!(flux_deriv(u) > 0.0 && flux_second(u) > 0.0);
        }
    }

    #[test]
    fn validation_examples() {
        let d = validate(&params(0.2, 0.0, 0.1));
        assert!(d.valid, "{:?}", d.failures);
        assert_eq!(d.regime, Regime::StrongDetonation);
        let d = validate(&params(0.6, 0.0, 0.1));
        assert!(!d.valid);
        assert_eq!(d.regime, Regime::BeyondCj);
        assert!(d.failures.iter().any(|f| f.contains("q_max")));
        let d = validate(&params(0.1, 0.3, 0.2));
        assert!(!d.valid);
        assert!(d.failures.iter().any(|f| f.contains("u_ig")));
        assert_eq!(validate(&params(0.5, 0.0, 0.1)).regime, Regime::ChapmanJouguet);
    }

    #[test]
    fn json_requires_every_key() {
        let ok = r#"{"q":0.2,"k":1,"D":1,"ea":1,"u_plus":0,"u_ig":0.1}"#;
        let p: ModelParams = serde_json::from_str(ok).unwrap();
        assert_eq!(p, ModelParams::default());
        let missing = r#"{"q":0.2,"k":1,"D":1,"u_plus":0,"u_ig":0.1}"#;
        assert!(serde_json::from_str::<ModelParams>(missing).is_err());
    }

    proptest! {
        #[test]
        fn burned_states_solve_rh(u_plus in 0.0f64..1.0, frac in 0.0f64..=1.0) {
            let q = frac * q_max(u_plus);
            let e = burned_states(&params(q, u_plus, 0.5)).unwrap();
            prop_assert!(rh_residual(u_plus, e.u_minus_strong, q).abs() < 1e-12);
            prop_assert!(rh_residual(u_plus, e.u_minus_weak, q).abs() < 1e-12);
            prop_assert!((e.u_minus_strong + e.u_minus_weak - 2.0).abs() < 1e-12);
            prop_assert!((1.0..=2.0).contains(&e.u_minus_strong));
        }
    }
}
