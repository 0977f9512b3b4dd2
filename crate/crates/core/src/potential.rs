//! Radial potentials, the hypotheses placed on them, the dilation-path
//! upper bounds and the potential Pohozaev functional.

use std::f64::consts::PI;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::limit::pohozaev_nehari_residuals;
use crate::quadrature::{gauss_legendre, integrate_radial, RadialField};
use crate::regimes::{Model, ProblemParams, RegimeTag};
use crate::report::{json_num, SCHEMA_VERSION};

/// Nonnegative radial potential families.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PotentialSpec {
    /// `V ≡ 0`.
    Zero,
    /// `v0 e^{-r²}`.
    Gaussian { v0: f64 },
    /// `v0 / (1 + r)^s`.
    AlgebraicDecay { v0: f64, s: f64 },
    /// `v0 (r_in / r)^s` on `[r_in, r_out]`, zero elsewhere.
    CompactBump { v0: f64, r_in: f64, r_out: f64, s: f64 },
    /// `v0 / r^σ`, optionally cut off to zero beyond `cutoff`.
    SingularPole { v0: f64, sigma: f64, cutoff: Option<f64> },
}

impl PotentialSpec {
    pub fn zero() -> Self {
        PotentialSpec::Zero
    }

    /// Checks parameter ranges.
    pub fn validated(self) -> Result<Self> {
        let bad = |param, why: &str| Err(Error::inadmissible(param, why.to_string()));
        match self {
            PotentialSpec::Zero => {}
            PotentialSpec::Gaussian { v0 } => {
                if !(v0 >= 0.0 && v0.is_finite()) {
                    return bad("V0", "must be finite and nonnegative");
                }
            }
            PotentialSpec::AlgebraicDecay { v0, s } => {
                if !(v0 >= 0.0 && v0.is_finite()) {
                    return bad("V0", "must be finite and nonnegative");
                }
                if !(s > 0.0 && s.is_finite()) {
                    return bad("s", "decay rate must be positive");
                }
            }
            PotentialSpec::CompactBump { v0, r_in, r_out, s } => {
                if !(v0 >= 0.0 && v0.is_finite()) {
                    return bad("V0", "must be finite and nonnegative");
                }
                if !(r_in > 0.0 && r_out > r_in && r_out.is_finite()) {
                    return bad("r_in", "need 0 < r_in < r_out");
                }
                if !(s >= 0.0 && s.is_finite()) {
                    return bad("s", "slope must be nonnegative");
                }
            }
            PotentialSpec::SingularPole { v0, sigma, cutoff } => {
                if !(v0 >= 0.0 && v0.is_finite()) {
                    return bad("V0", "must be finite and nonnegative");
                }
                if !(sigma > 0.0 && sigma < 2.0) {
                    return bad("sigma", "need 0 < sigma < 2");
                }
                if let Some(rc) = cutoff {
                    if !(rc > 0.0 && rc.is_finite()) {
                        return bad("cutoff", "must be positive");
                    }
                }
            }
        }
        Ok(self)
    }

    pub fn name(&self) -> &'static str {
        match self {
            PotentialSpec::Zero => "zero",
            PotentialSpec::Gaussian { .. } => "gaussian",
            PotentialSpec::AlgebraicDecay { .. } => "algebraic",
            PotentialSpec::CompactBump { .. } => "bump",
            PotentialSpec::SingularPole { .. } => "pole",
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            PotentialSpec::Zero => true,
            PotentialSpec::Gaussian { v0 }
            | PotentialSpec::AlgebraicDecay { v0, .. }
            | PotentialSpec::CompactBump { v0, .. }
            | PotentialSpec::SingularPole { v0, .. } => v0 == 0.0,
        }
    }

    /// `V(r)`.
    pub fn value(&self, r: f64) -> f64 {
        let r = r.abs();
        match *self {
            PotentialSpec::Zero => 0.0,
            PotentialSpec::Gaussian { v0 } => v0 * (-r * r).exp(),
            PotentialSpec::AlgebraicDecay { v0, s } => v0 * (1.0 + r).powf(-s),
            PotentialSpec::CompactBump { v0, r_in, r_out, s } => {
                if r >= r_in && r <= r_out {
                    v0 * (r_in / r).powf(s)
                } else {
                    0.0
                }
            }
            PotentialSpec::SingularPole { v0, sigma, cutoff } => {
                if cutoff.is_some_and(|rc| r > rc) || v0 == 0.0 {
                    0.0
                } else {
                    v0 * r.powf(-sigma)
                }
            }
        }
    }

    /// `⟨∇V(x)·x⟩ = r V'(r)` away from jumps.
    pub fn radial_derivative(&self, r: f64) -> f64 {
        let r = r.abs();
        match *self {
            PotentialSpec::Zero => 0.0,
            PotentialSpec::Gaussian { v0 } => -2.0 * r * r * v0 * (-r * r).exp(),
            PotentialSpec::AlgebraicDecay { v0, s } => -s * r * v0 * (1.0 + r).powf(-s - 1.0),
            PotentialSpec::CompactBump { s, .. } => -s * self.value(r),
            PotentialSpec::SingularPole { sigma, .. } => -sigma * self.value(r),
        }
    }

    /// Radii where `V` jumps.
    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            PotentialSpec::CompactBump { r_in, r_out, .. } => vec![r_in, r_out],
            PotentialSpec::SingularPole { cutoff: Some(rc), .. } => vec![rc],
            _ => Vec::new(),
        }
    }
}

impl PotentialSpec {
    /// `∫_0^s t V(t) dt`, used for spherical averages of shifted potentials
    /// in three dimensions.
    fn radial_moment(&self, s: f64) -> f64 {
        match *self {
            PotentialSpec::Zero => 0.0,
            PotentialSpec::Gaussian { v0 } => 0.5 * v0 * (-(-s * s).exp_m1()),
            PotentialSpec::AlgebraicDecay { v0, s: k } => {
                // ∫_1^{1+s} (w - 1) w^{-k} dw
                let w = 1.0 + s;
                let prim = |w: f64| -> f64 {
                    let first = if (k - 2.0).abs() < 1e-12 { w.ln() } else { w.powf(2.0 - k) / (2.0 - k) };
                    let second = if (k - 1.0).abs() < 1e-12 { w.ln() } else { w.powf(1.0 - k) / (1.0 - k) };
                    first - second
                };
                v0 * (prim(w) - prim(1.0))
            }
            PotentialSpec::CompactBump { v0, r_in, r_out, s: k } => {
                if s <= r_in {
                    return 0.0;
                }
                let x = s.min(r_out);
                let scale = v0 * r_in.powf(k);
                if (k - 2.0).abs() < 1e-12 {
                    scale * (x / r_in).ln()
                } else {
                    scale * (x.powf(2.0 - k) - r_in.powf(2.0 - k)) / (2.0 - k)
                }
            }
            PotentialSpec::SingularPole { v0, sigma, cutoff } => {
                let x = cutoff.map_or(s, |rc| s.min(rc));
                v0 * x.powf(2.0 - sigma) / (2.0 - sigma)
            }
        }
    }

    /// Average of `V(x + y)` over the sphere `|x| = r`, with `|y| = d`.
    pub fn shifted_average(&self, dim: u32, r: f64, d: f64) -> f64 {
        if d == 0.0 {
            return self.value(r);
        }
        if r == 0.0 {
            return self.value(d);
        }
        match dim {
            1 => 0.5 * (self.value(r + d) + self.value((r - d).abs())),
            3 => {
                let lo = (r - d).abs();
                let hi = r + d;
                if (hi - lo) <= 1e-9 * hi {
                    return self.value(0.5 * (lo + hi));
                }
                (self.radial_moment(hi) - self.radial_moment(lo)) / (2.0 * r * d)
            }
            2 => {
                // (1/π) ∫_0^π V(√(r² + d² + 2rd cos φ)) dφ
                let panels = 16;
                (0..panels)
                    .map(|k| {
                        let a = PI * k as f64 / panels as f64;
                        let b = PI * (k + 1) as f64 / panels as f64;
                        gauss_legendre(a, b, |phi| {
                            self.value((r * r + d * d + 2.0 * r * d * phi.cos()).max(0.0).sqrt())
                        })
                    })
                    .sum::<f64>()
                    / PI
            }
            _ => self.value(r),
        }
    }

    /// `sup V` and `sup r V(r)`, analytic where available; `∞` when
    /// unbounded.
    pub fn sup_norms(&self) -> (f64, f64) {
        match *self {
            PotentialSpec::Zero => (0.0, 0.0),
            PotentialSpec::Gaussian { v0 } => (v0, v0 / (2.0 * std::f64::consts::E).sqrt()),
            PotentialSpec::AlgebraicDecay { v0, s } => {
                let w = if v0 == 0.0 {
                    0.0
                } else if s > 1.0 {
                    v0 * (s - 1.0).powf(s - 1.0) / s.powf(s)
                } else if s == 1.0 {
                    v0
                } else {
                    f64::INFINITY
                };
                (v0, w)
            }
            PotentialSpec::CompactBump { v0, r_in, r_out, s } => {
                let w = if s >= 1.0 { v0 * r_in } else { v0 * r_in.powf(s) * r_out.powf(1.0 - s) };
                (v0, w)
            }
            PotentialSpec::SingularPole { v0, sigma, cutoff } => {
                if v0 == 0.0 {
                    return (0.0, 0.0);
                }
                let w = match (sigma <= 1.0, cutoff) {
                    (true, Some(rc)) => v0 * rc.powf(1.0 - sigma),
                    (true, None) if sigma == 1.0 => v0,
                    _ => f64::INFINITY,
                };
                (f64::INFINITY, w)
            }
        }
    }

    /// `sup V` and `sup rV` from a dense scan of `(0, r_max]`, for
    /// cross-checking [`PotentialSpec::sup_norms`].
    pub fn sup_norms_scan(&self, r_max: f64, points: usize) -> (f64, f64) {
        let mut v_max: f64 = self.value(0.0).min(f64::MAX);
        let mut w_max: f64 = 0.0;
        for k in 1..=points {
            let r = r_max * k as f64 / points as f64;
            let v = self.value(r);
            v_max = v_max.max(v);
            w_max = w_max.max(v * r);
        }
        for b in self.breakpoints() {
            v_max = v_max.max(self.value(b));
            w_max = w_max.max(b * self.value(b));
        }
        (v_max, w_max)
    }

    /// Radius beyond which `V` is identically zero, if any.
    pub fn support_radius(&self) -> Option<f64> {
        match *self {
            PotentialSpec::Zero => Some(0.0),
            PotentialSpec::CompactBump { r_out, .. } => Some(r_out),
            PotentialSpec::SingularPole { cutoff, .. } => cutoff,
            _ => None,
        }
    }
}

/// `(∫ f(|x|) dx)` over all of `R^N`, with a growth test on the tail.
/// Returns `∞` when doubling the radius keeps changing the value.
fn whole_space_integral(dim: u32, v: &PotentialSpec, f: impl Fn(f64) -> f64) -> f64 {
    let breaks = v.breakpoints();
    if let Some(rs) = v.support_radius() {
        if rs == 0.0 {
            return 0.0;
        }
        return integrate_radial(dim, rs, &breaks, f);
    }
    let mut r = 16.0;
    let mut total = integrate_radial(dim, r, &breaks, &f);
    let n1 = dim as i32 - 1;
    let area = crate::quadrature::sphere_area(dim);
    for _ in 0..40 {
        let panels = 64;
        let add: f64 = (0..panels)
            .map(|k| {
                let a = r + r * k as f64 / panels as f64;
                let b = r + r * (k + 1) as f64 / panels as f64;
                gauss_legendre(a, b, |x| f(x) * x.powi(n1))
            })
            .sum::<f64>()
            * area;
        total += add;
        r *= 2.0;
        if add <= 1e-13 * total {
            return total;
        }
    }
    f64::INFINITY
}

/// `‖V‖_q` over `R^N`.
pub fn lebesgue_norm(dim: u32, v: &PotentialSpec, q: f64) -> f64 {
    whole_space_integral(dim, v, |r| v.value(r).powf(q)).powf(1.0 / q)
}

/// `‖r V‖_q` over `R^N`.
pub fn weighted_lebesgue_norm(dim: u32, v: &PotentialSpec, q: f64) -> f64 {
    whole_space_integral(dim, v, |r| (r * v.value(r)).powf(q)).powf(1.0 / q)
}

/// Constants of `‖u‖₆ ≤ S_emb ‖∇u‖₂` in three dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SobolevConstant {
    /// `inf ‖∇u‖₂² / ‖u‖₆² = 3 (π/2)^{4/3}`
    pub sharp: f64,
    /// `S_emb = sharp^{-1/2}`
    pub embedding: f64,
    /// `S_emb²`
    pub embedding_sq: f64,
}

pub fn sobolev_constant() -> SobolevConstant {
    let sharp = 3.0 * (PI / 2.0).powf(4.0 / 3.0);
    SobolevConstant {
        sharp,
        embedding: sharp.powf(-0.5),
        embedding_sq: 1.0 / sharp,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Hypothesis {
    V1,
    V2,
    V5,
}

/// One inequality: `value` is its slack.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Margin {
    pub name: String,
    pub value: f64,
    /// Strict inequalities need a positive slack, the others a nonnegative one.
    pub strict: bool,
}

impl Margin {
    fn new(name: &str, value: f64, strict: bool) -> Self {
        Margin {
            name: name.to_string(),
            value,
            strict,
        }
    }

    pub fn holds(&self) -> bool {
        if self.strict {
            self.value > 0.0
        } else {
            self.value >= 0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub hypothesis: Hypothesis,
    pub potential: PotentialSpec,
    pub satisfied: bool,
    pub margins: Vec<Margin>,
    /// Named intermediate quantities (norms, constants).
    pub quantities: Vec<(String, f64)>,
    pub notes: Vec<String>,
    /// First radius where a pointwise condition fails.
    pub first_violation: Option<f64>,
}

impl HypothesisReport {
    fn new(hypothesis: Hypothesis, potential: &PotentialSpec) -> Self {
        HypothesisReport {
            hypothesis,
            potential: potential.clone(),
            satisfied: false,
            margins: Vec::new(),
            quantities: Vec::new(),
            notes: Vec::new(),
            first_violation: None,
        }
    }

    fn finish(mut self) -> Self {
        self.satisfied = self.margins.iter().all(Margin::holds);
        self
    }

    pub fn margin(&self, name: &str) -> Option<f64> {
        self.margins.iter().find(|m| m.name == name).map(|m| m.value)
    }

    pub fn quantity(&self, name: &str) -> Option<f64> {
        self.quantities.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "schema_version": SCHEMA_VERSION,
            "hypothesis": format!("{:?}", self.hypothesis),
            "potential": serde_json::to_value(&self.potential).unwrap_or(Value::Null),
            "satisfied": self.satisfied,
            "margins": self.margins.iter().map(|m| json!({
                "name": m.name, "value": json_num(m.value), "strict": m.strict,
            })).collect::<Vec<_>>(),
            "quantities": self.quantities.iter().map(|(n, v)| json!({"name": n, "value": json_num(*v)})).collect::<Vec<_>>(),
            "notes": self.notes,
            "firstViolation": self.first_violation.map_or(Value::Null, json_num),
        })
    }
}

/// Bounded potential with bounded `|x| V`, below a multiple of the
/// limit energy. The `N = 1` branch of the `rV` bound needs `p > 6`, which
/// always holds where this hypothesis applies (`p >= 10`).
pub fn validate_v1(v: &PotentialSpec, params: &ProblemParams, m_c: f64) -> Result<HypothesisReport> {
    let model = params.model();
    if model.tag() == RegimeTag::TwoBranch {
        return Err(Error::RegimeMismatch("(V1) is stated for p >= 2 + 8/N".into()));
    }
    if params.dim > 3 {
        return Err(Error::inadmissible("N", "(V1) needs N <= 3"));
    }
    let mut rep = HypothesisReport::new(Hypothesis::V1, v);
    let (n, p, a, c) = (params.dim as f64, params.p, params.a, params.c);
    let (v_inf, w_inf) = v.sup_norms();
    let mu = 1f64.min(2.0 / n);
    let v_bound = 2.0 * mu * m_c / (c * c);
    let w_bound = if params.dim == 1 {
        (m_c.sqrt() / c) * (4.0 * a * (p - 6.0) / ((p - 2.0).powi(3) + 4.0 * (p - 2.0))).sqrt()
    } else {
        let e = params.exponents();
        (m_c.sqrt() / c) * (a * e.theta * e.zeta * e.zeta / (4.0 * (p - 2.0) * (n * (p - 2.0) + e.zeta))).sqrt()
    };
    rep.quantities.extend([
        ("Vinf".to_string(), v_inf),
        ("Winf".to_string(), w_inf),
        ("mc".to_string(), m_c),
        ("mu".to_string(), mu),
        ("VinfBound".to_string(), v_bound),
        ("WinfBound".to_string(), w_bound),
    ]);
    if v.is_zero() {
        rep.notes.push("degenerate zero potential: the lower bound 0 < ‖V‖∞ fails".into());
    }
    if !v_inf.is_finite() {
        rep.notes.push("V is unbounded".into());
    }
    rep.margins.push(Margin::new("Vinf_positive", v_inf.min(f64::MAX), true));
    rep.margins.push(Margin::new("Vinf_bound", v_bound - v_inf, true));
    rep.margins.push(Margin::new(
        "Winf_bound",
        if w_bound.is_nan() { f64::NEG_INFINITY } else { w_bound - w_inf },
        false,
    ));
    Ok(rep.finish())
}

/// `L^{3/2}` potential with `L³` weight in three dimensions, measured with
/// `S_emb` from `‖u‖₆ ≤ S_emb‖∇u‖₂`.
pub fn validate_v2(v: &PotentialSpec, params: &ProblemParams) -> Result<HypothesisReport> {
    if params.dim != 3 {
        return Err(Error::inadmissible("N", "(V2) is stated for N = 3"));
    }
    let mut rep = HypothesisReport::new(Hypothesis::V2, v);
    let (p, a) = (params.p, params.a);
    let s = sobolev_constant();
    let v32 = lebesgue_norm(3, v, 1.5);
    let w3 = weighted_lebesgue_norm(3, v, 3.0);
    if !v32.is_finite() || !w3.is_finite() {
        rep.notes.push("norm keeps growing with the truncation radius: not integrable".into());
    }
    let nu_bar = s.embedding_sq * v32 / a;
    let nu = 3.0 * (p - 2.0) * nu_bar / (3.0 * p - 10.0 - 4.0 * nu_bar);
    rep.quantities.extend([
        ("V_3/2".to_string(), v32),
        ("W_3".to_string(), w3),
        ("S_emb".to_string(), s.embedding),
        ("S_emb_sq".to_string(), s.embedding_sq),
        ("nu_bar".to_string(), nu_bar),
        ("nu".to_string(), nu),
    ]);
    rep.notes.push("S_emb is the constant of ‖u‖₆ ≤ S_emb‖∇u‖₂".into());
    let lhs = 4.0 * s.embedding * w3 * (3.0 * (p - 2.0).powi(2) / (6.0 - p) + 1.0)
        + v32 * s.embedding_sq * (9.0 * (p - 2.0) + 6.0);
    let first = 2.0 * a * (3.0 * p - 10.0) / ((9.0 * p - 10.0) * s.embedding_sq) - v32;
    let second = a * (3.0 * p - 10.0) - lhs;
    rep.margins.push(Margin::new("V32_bound", if first.is_nan() { f64::NEG_INFINITY } else { first }, true));
    rep.margins.push(Margin::new("mixed_bound", if second.is_nan() { f64::NEG_INFINITY } else { second }, false));
    Ok(rep.finish())
}

/// Bounded radial potential, small against the branch energy gap, with
/// `⟨∇V·x⟩ ≤ -(N(p-2)/p) V` at every scanned radius. Since this makes
/// `r^{N(p-2)/p} V` nonincreasing, a nonzero bounded `V` must vanish near
/// the origin and jump up somewhere.
pub fn validate_v5(v: &PotentialSpec, params: &ProblemParams, m_c1: f64, m_c2: f64) -> Result<HypothesisReport> {
    if params.model().tag() != RegimeTag::TwoBranch {
        return Err(Error::RegimeMismatch("(V5) is stated for 2 + 4/N < p < 2 + 8/N".into()));
    }
    let mut rep = HypothesisReport::new(Hypothesis::V5, v);
    if params.dim < 2 {
        rep.notes.push("stated for N >= 2".into());
    }
    let (n, p, c) = (params.dim as f64, params.p, params.c);
    let (v_inf, _) = v.sup_norms();
    let bound = 2.0 * (m_c2 - m_c1) / (c * c);
    rep.quantities.extend([
        ("Vinf".to_string(), v_inf),
        ("VinfBound".to_string(), bound),
        ("mc1".to_string(), m_c1),
        ("mc2".to_string(), m_c2),
    ]);
    rep.margins.push(Margin::new("Vinf_bound", bound - v_inf, false));
    let k = n * (p - 2.0) / p;
    let r_scan = v.support_radius().unwrap_or(0.0).max(50.0);
    let points = 200_000;
    let mut worst = f64::INFINITY;
    for i in 1..=points {
        let r = r_scan * (i as f64 - 0.5) / points as f64;
        let slack = -k * v.value(r) - v.radial_derivative(r);
        if slack < 0.0 && rep.first_violation.is_none() {
            rep.first_violation = Some(r);
        }
        worst = worst.min(slack);
    }
    if let Some(r) = rep.first_violation {
        rep.notes.push(format!("pointwise condition first fails at r = {r}"));
    }
    rep.margins.push(Margin::new("pointwise", worst, false));
    Ok(rep.finish())
}

/// `P(u) = d/dh I(h ⋆ u)|_{h=1} = P_∞(u) + ½∫ V (N u² + 2 r u u') dx`.
///
/// For smooth `V` this equals `P_∞(u) - ½∫⟨∇V·x⟩u²`; the form used here
/// also accounts for jumps of `V`.
pub fn potential_pohozaev(u: &RadialField, v: &PotentialSpec, model: &Model) -> Result<f64> {
    let (p_inf, _) = pohozaev_nehari_residuals(u, 0.0, model)?;
    let n = model.dim as f64;
    let extra = u.integrate_cells(&v.breakpoints(), |r, w, dw| v.value(r) * (n * w * w + 2.0 * r * w * dw));
    Ok(p_inf + 0.5 * extra)
}

/// `I(h ⋆ u)` with the potential shifted by `|y| = d`.
pub fn shifted_energy(u: &RadialField, v: &PotentialSpec, model: &Model, h: f64, d: f64) -> Result<f64> {
    let hu = u.dilate(h)?;
    let base = hu.evaluate_functional(model, None)?;
    let mut breaks: Vec<f64> = Vec::new();
    for b in v.breakpoints() {
        breaks.extend([b, (b - d).abs(), b + d]);
    }
    let pot = hu.integrate_cells(&breaks, |r, w, _| v.shifted_average(model.dim, r, d) * w * w);
    Ok(base.total + 0.5 * pot)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DilationBound {
    /// Largest `I(h ⋆ u(· - y))` found.
    pub max_energy: f64,
    pub argmax_h: f64,
    pub argmax_shift: f64,
    /// Largest value with `y = 0`.
    pub max_energy_unshifted: f64,
    pub m_c: f64,
    /// `m_c + ½‖V‖∞ c²` (bounded potentials).
    pub bound_sup: Option<f64>,
    /// `(1 + ν) m_c` (three dimensions, `L^{3/2}` potentials).
    pub bound_lebesgue: Option<f64>,
    pub nu: Option<f64>,
    pub slack_sup: Option<f64>,
    pub slack_lebesgue: Option<f64>,
}

impl DilationBound {
    pub fn to_json(&self) -> Value {
        let opt = |x: Option<f64>| x.map_or(Value::Null, json_num);
        json!({
            "schema_version": SCHEMA_VERSION,
            "maxEnergy": json_num(self.max_energy),
            "argmaxH": json_num(self.argmax_h),
            "argmaxShift": json_num(self.argmax_shift),
            "maxEnergyUnshifted": json_num(self.max_energy_unshifted),
            "mc": json_num(self.m_c),
            "boundSup": opt(self.bound_sup),
            "boundLebesgue": opt(self.bound_lebesgue),
            "nu": opt(self.nu),
            "slackSup": opt(self.slack_sup),
            "slackLebesgue": opt(self.slack_lebesgue),
        })
    }
}

/// Maximizes `I(h ⋆ u_c(· - y))` over a log grid of `h` (refined around the
/// best point) and over `|y|` in `translations` (0 is always included).
pub fn dilation_path_bound(
    u: &RadialField,
    v: &PotentialSpec,
    params: &ProblemParams,
    m_c: f64,
    translations: &[f64],
) -> Result<DilationBound> {
    let model = params.model();
    if model.tag() == RegimeTag::TwoBranch {
        return Err(Error::RegimeMismatch(
            "dilation-path bounds are stated for p >= 2 + 8/N".into(),
        ));
    }
    let mut shifts = vec![0.0];
    shifts.extend(translations.iter().copied().filter(|&d| d > 0.0));
    let grid: Vec<f64> = (0..=120).map(|k| 10f64.powf(-2.0 + 4.0 * k as f64 / 120.0)).collect();
    let mut best = (f64::NEG_INFINITY, 1.0, 0.0);
    let mut best_unshifted = f64::NEG_INFINITY;
    for &d in &shifts {
        let f = |h: f64| shifted_energy(u, v, &model, h, d);
        let vals: Vec<f64> = grid.iter().map(|&h| f(h)).collect::<Result<_>>()?;
        let k = (0..vals.len()).fold(0, |b, i| if vals[i] > vals[b] { i } else { b });
        let lo = grid[k.saturating_sub(1)].ln();
        let hi = grid[(k + 1).min(grid.len() - 1)].ln();
        let (h_star, e_star) = golden_max(|s| f(s.exp()), lo, hi)?;
        let (h_star, e_star) = if e_star >= vals[k] { (h_star.exp(), e_star) } else { (grid[k], vals[k]) };
        if d == 0.0 {
            best_unshifted = e_star;
        }
        if e_star > best.0 {
            best = (e_star, h_star, d);
        }
    }
    let c2 = params.c * params.c;
    let (v_inf, _) = v.sup_norms();
    let bound_sup = v_inf.is_finite().then_some(m_c + 0.5 * v_inf * c2);
    let (bound_leb, nu) = if params.dim == 3 {
        let s = sobolev_constant();
        let v32 = lebesgue_norm(3, v, 1.5);
        let nu_bar = s.embedding_sq * v32 / params.a;
        let nu = 3.0 * (params.p - 2.0) * nu_bar / (3.0 * params.p - 10.0 - 4.0 * nu_bar);
        if v32.is_finite() {
            (Some((1.0 + nu) * m_c), Some(nu))
        } else {
            (None, None)
        }
    } else {
        (None, None)
    };
    Ok(DilationBound {
        max_energy: best.0,
        argmax_h: best.1,
        argmax_shift: best.2,
        max_energy_unshifted: best_unshifted,
        m_c,
        bound_sup,
        bound_lebesgue: bound_leb,
        nu,
        slack_sup: bound_sup.map(|b| b - best.0),
        slack_lebesgue: bound_leb.map(|b| b - best.0),
    })
}

fn golden_max(f: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64) -> Result<(f64, f64)> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    for _ in 0..80 {
        if (b - a).abs() < 1e-10 {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1)?;
        }
    }
    Ok(if f1 > f2 { (x1, f1) } else { (x2, f2) })
}

/// Parses `family:key=value,...`, e.g. `gaussian:V0=0.01` or
/// `bump:V0=1e-3,rin=2,rout=8,s=2`.
pub fn parse_potential(text: &str) -> Result<PotentialSpec> {
    let (family, rest) = text.split_once(':').unwrap_or((text, ""));
    let mut kv = std::collections::HashMap::new();
    for part in rest.split(',').filter(|s| !s.trim().is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::inadmissible("potential", format!("expected key=value, got `{part}`")))?;
        let x: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::inadmissible("potential", format!("`{v}` is not a number")))?;
        kv.insert(k.trim().to_ascii_lowercase(), x);
    }
    let get = |k: &str| -> Result<f64> {
        kv.get(k)
            .copied()
            .ok_or_else(|| Error::inadmissible("potential", format!("missing `{k}` for {family}")))
    };
    let spec = match family.trim().to_ascii_lowercase().as_str() {
        "zero" | "none" => PotentialSpec::Zero,
        "gaussian" => PotentialSpec::Gaussian { v0: get("v0")? },
        "algebraic" => PotentialSpec::AlgebraicDecay { v0: get("v0")?, s: get("s")? },
        "bump" => PotentialSpec::CompactBump {
            v0: get("v0")?,
            r_in: get("rin")?,
            r_out: get("rout")?,
            s: get("s")?,
        },
        "pole" => PotentialSpec::SingularPole {
            v0: get("v0")?,
            sigma: get("sigma")?,
            cutoff: kv.get("cutoff").copied(),
        },
        other => {
            return Err(Error::inadmissible("potential", format!("unknown family `{other}`")))
        }
    };
    spec.validated()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn family() -> Vec<PotentialSpec> {
        vec![
            PotentialSpec::Gaussian { v0: 0.7 },
            PotentialSpec::AlgebraicDecay { v0: 1.3, s: 2.0 },
            PotentialSpec::AlgebraicDecay { v0: 1.3, s: 1.5 },
            PotentialSpec::CompactBump { v0: 0.4, r_in: 1.0, r_out: 3.0, s: 2.0 },
            PotentialSpec::CompactBump { v0: 0.4, r_in: 1.0, r_out: 3.0, s: 1.0 },
            PotentialSpec::SingularPole { v0: 0.2, sigma: 1.0, cutoff: Some(2.0) },
            PotentialSpec::SingularPole { v0: 0.2, sigma: 0.5, cutoff: None },
        ]
    }

    #[test]
    fn radial_derivative_matches_differences() {
        for v in family() {
            for &r in &[0.3, 0.8, 1.7, 2.4, 5.0] {
                if v.breakpoints().iter().any(|b| (b - r).abs() < 1e-3) {
                    continue;
                }
                let h = 1e-6;
                let fd = r * (v.value(r + h) - v.value(r - h)) / (2.0 * h);
                assert!((fd - v.radial_derivative(r)).abs() < 1e-6, "{v:?} r={r}");
            }
        }
    }

    #[test]
    fn moments_match_quadrature() {
        for v in family() {
            for &s in &[0.5, 1.5, 2.5, 4.0] {
                let mut cuts = vec![0.0, s];
                cuts.extend(v.breakpoints().into_iter().filter(|&b| b < s));
                cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let num: f64 = cuts
                    .windows(2)
                    .map(|w| {
                        (0..200)
                            .map(|k| {
                                let a = w[0] + (w[1] - w[0]) * k as f64 / 200.0;
                                let b = w[0] + (w[1] - w[0]) * (k + 1) as f64 / 200.0;
                                gauss_legendre(a, b, |t| t * v.value(t))
                            })
                            .sum::<f64>()
                    })
                    .sum();
                let exact = v.radial_moment(s);
                assert!((num - exact).abs() < 1e-7 * exact.abs().max(1.0), "{v:?} s={s}");
            }
        }
    }

    #[test]
    fn shifted_average_in_3d_matches_angular_quadrature() {
        let v = PotentialSpec::Gaussian { v0: 1.0 };
        let (r, d) = (0.8, 1.1);
        // (1/2)∫_0^π V(|x+y|) sin φ dφ
        let direct = 0.5
            * (0..64)
                .map(|k| {
                    let a = PI * k as f64 / 64.0;
                    let b = PI * (k + 1) as f64 / 64.0;
                    gauss_legendre(a, b, |phi| {
                        v.value((r * r + d * d + 2.0 * r * d * phi.cos()).sqrt()) * phi.sin()
                    })
                })
                .sum::<f64>();
        assert!((direct - v.shifted_average(3, r, d)).abs() < 1e-12);
    }

    #[test]
    fn analytic_sup_norms_agree_with_scan() {
        for v in family().into_iter().take(5) {
            let (va, wa) = v.sup_norms();
            let (vs, ws) = v.sup_norms_scan(200.0, 400_000);
            assert!((va - vs).abs() < 1e-6 * va, "{v:?}");
            if wa.is_finite() && !matches!(v, PotentialSpec::AlgebraicDecay { s, .. } if s <= 1.0) {
                assert!((wa - ws).abs() < 1e-6 * wa, "{v:?}: {wa} vs {ws}");
            }
        }
    }

    #[test]
    fn algebraic_weight_maximum_by_golden_section() {
        let v = PotentialSpec::AlgebraicDecay { v0: 1.0, s: 2.0 };
        let (r, w) = golden_max(|r| Ok(r * v.value(r)), 0.0, 10.0).unwrap();
        assert!((r - 1.0).abs() < 1e-6);
        assert!((w - 0.25).abs() < 1e-12);
        assert_eq!(v.sup_norms().1, 0.25);
    }

    #[test]
    fn sobolev_constant_from_extremal() {
        let s = sobolev_constant();
        assert!((s.sharp - 5.4779).abs() < 1e-4);
        let u = RadialField::sample_with_derivative(
            3,
            2000.0,
            400_000,
            |r| (1.0 + r * r).powf(-0.5),
            |r| -r * (1.0 + r * r).powf(-1.5),
        )
        .unwrap();
        let n = u.norms(6.0).unwrap();
        // ‖∇u‖² = 3π²/4 and ‖u‖₆⁶ = π²/4 up to the truncated tails
        // add the gradient tail ∫_R^∞ 4π r⁴ (1+r²)^{-3} dr ≈ 4π/R
        let ratio = (n.gradl2sq + 4.0 * PI / 2000.0) / n.lpp.powf(1.0 / 3.0);
        assert!((ratio - s.sharp).abs() < 1e-4 * s.sharp, "{ratio}");
        assert!((s.embedding_sq * s.sharp - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pole_without_cutoff_is_not_integrable() {
        let v = PotentialSpec::SingularPole { v0: 1.0, sigma: 1.0, cutoff: None };
        assert!(weighted_lebesgue_norm(3, &v, 3.0).is_infinite());
        let cut = PotentialSpec::SingularPole { v0: 1.0, sigma: 1.0, cutoff: Some(1.0) };
        // ∫_{|x|<1} |x|^{-3/2} dx = 4π/(3/2)
        let exact = (4.0 * PI / 1.5f64).powf(2.0 / 3.0);
        assert!((lebesgue_norm(3, &cut, 1.5) - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn parse_round_trip() {
        assert_eq!(parse_potential("gaussian:V0=0.01").unwrap(), PotentialSpec::Gaussian { v0: 0.01 });
        assert_eq!(
            parse_potential("bump:V0=1,rin=1,rout=2,s=2").unwrap(),
            PotentialSpec::CompactBump { v0: 1.0, r_in: 1.0, r_out: 2.0, s: 2.0 }
        );
        assert!(parse_potential("pole:V0=1,sigma=3").is_err());
        assert!(parse_potential("bogus").is_err());
        assert_eq!(parse_potential("zero").unwrap(), PotentialSpec::Zero);
    }

    #[test]
    fn zero_potential_margins() {
        let pr = ProblemParams::new(1.0, 1.0, 2.0, 3, 5.0).unwrap();
        let rep = validate_v1(&PotentialSpec::Zero, &pr, 1.0).unwrap();
        assert!(!rep.satisfied);
        assert_eq!(rep.margin("Vinf_positive"), Some(0.0));
        let tb = ProblemParams::new(1.0, 0.01, 20.0, 3, 4.0).unwrap();
        let rep = validate_v5(&PotentialSpec::Zero, &tb, -1.0, 1.0).unwrap();
        assert!(rep.satisfied);
        assert_eq!(rep.margin("pointwise"), Some(0.0));
    }

    #[test]
    fn gaussian_fails_pointwise_condition_near_origin() {
        let tb = ProblemParams::new(1.0, 0.01, 20.0, 3, 4.0).unwrap();
        let rep = validate_v5(&PotentialSpec::Gaussian { v0: 1e-6 }, &tb, -1.0, 1.0).unwrap();
        assert!(!rep.satisfied);
        assert!(rep.first_violation.unwrap() < 1e-3);
        let bump = PotentialSpec::CompactBump { v0: 1e-6, r_in: 1.0, r_out: 4.0, s: 2.0 };
        assert!(validate_v5(&bump, &tb, -1.0, 1.0).unwrap().satisfied);
        let shallow = PotentialSpec::CompactBump { v0: 1e-6, r_in: 1.0, r_out: 4.0, s: 1.0 };
        let rep = validate_v5(&shallow, &tb, -1.0, 1.0).unwrap();
        assert!(!rep.satisfied);
        assert!((rep.first_violation.unwrap() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn v2_homogeneity() {
        let pr = ProblemParams::new(1.0, 1.0, 2.0, 3, 5.0).unwrap();
        let v = PotentialSpec::SingularPole { v0: 0.01, sigma: 1.0, cutoff: Some(1.0) };
        let w = PotentialSpec::SingularPole { v0: 0.02, sigma: 1.0, cutoff: Some(1.0) };
        let a = validate_v2(&v, &pr).unwrap();
        let b = validate_v2(&w, &pr).unwrap();
        let ratio = b.quantity("V_3/2").unwrap() / a.quantity("V_3/2").unwrap();
        assert!((ratio - 2.0).abs() < 1e-12);
        assert!(b.margin("V32_bound").unwrap() < a.margin("V32_bound").unwrap());
        assert!(b.margin("mixed_bound").unwrap() < a.margin("mixed_bound").unwrap());
    }

    fn supercritical_state() -> (ProblemParams, RadialField, f64) {
        let pr = ProblemParams::new(1.0, 1.0, 40.0, 3, 5.0).unwrap();
        let br = crate::limit::solve(&pr).unwrap().remove(0);
        let qp = crate::profile::qp_profile(3, 5.0).unwrap();
        let u = crate::limit::build_solution(&br, &pr, &qp).unwrap();
        (pr, u, br.energy)
    }

    #[test]
    fn pohozaev_matches_dilation_derivative() {
        let (pr, u, _) = supercritical_state();
        let model = pr.model();
        for v in [
            PotentialSpec::Gaussian { v0: 0.3 },
            PotentialSpec::CompactBump { v0: 0.2, r_in: 0.5, r_out: 2.0, s: 2.0 },
        ] {
            let e = |h: f64| shifted_energy(&u, &v, &model, h, 0.0).unwrap();
            let dh = 1e-4;
            let fd = (e(1.0 + dh) - e(1.0 - dh)) / (2.0 * dh);
            let p = potential_pohozaev(&u, &v, &model).unwrap();
            let scale = crate::limit::identity_scale(&u, &model).unwrap();
            assert!((fd - p).abs() < 1e-4 * scale, "{v:?}: fd={fd} P={p}");
        }
    }

    #[test]
    fn dilation_bound_without_potential_is_the_limit_energy() {
        let (pr, u, m) = supercritical_state();
        let b = dilation_path_bound(&u, &PotentialSpec::Zero, &pr, m, &[0.5]).unwrap();
        assert!((b.max_energy - m).abs() < 1e-7 * m.abs());
        assert!((b.argmax_h - 1.0).abs() < 1e-3);
        assert!(b.slack_sup.unwrap() > -1e-7 * m.abs());
    }

    #[test]
    fn dilation_bound_with_potential_stays_below_both_bounds() {
        let (pr, u, m) = supercritical_state();
        let v = PotentialSpec::Gaussian { v0: 0.05 };
        let b = dilation_path_bound(&u, &v, &pr, m, &[0.5, 1.0, 2.0]).unwrap();
        assert!(b.max_energy > m);
        assert!(b.slack_sup.unwrap() > 0.0, "{b:?}");
        assert!(b.nu.unwrap() > 0.0);
        assert!(b.slack_lebesgue.unwrap() > 0.0, "{b:?}");
        // translating moves mass away from the bump of V
        assert_eq!(b.argmax_shift, 0.0);
    }
}
