//! Exponent bookkeeping, admissibility and regime classification.
//!
//! The admissible set is `2 + 4/N < p < 2*` with `1 <= N <= 4`. It splits
//! into three regimes by comparing `p` with the Kirchhoff mass-critical
//! exponent `2 + 8/N`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::profile;

/// Absolute tolerance for recognising `p = 2 + 8/N`.
pub const CRITICAL_P_TOL: f64 = 1e-12;

/// Highest dimension accepted anywhere.
pub const MAX_DIM: u32 = 4;

/// Coefficients of the equation with the mass left open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Model {
    pub a: f64,
    pub b: f64,
    pub dim: u32,
    pub p: f64,
}

/// The full tuple `(a, b, c, N, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProblemParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub dim: u32,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedExponents {
    /// `N(p-2) - 4`
    pub theta: f64,
    /// `8 - N(p-2)`
    pub eta: f64,
    /// `(4N - 2p(N-2)) / (N(p-2) - 4)`
    pub q: f64,
    /// `2N - p(N-2)`
    pub zeta: f64,
}

impl DerivedExponents {
    /// `N(p-2)/4`, the power of `‖∇u‖₂²` carried by the nonlinear term.
    pub fn kappa(&self) -> f64 {
        (self.theta + 4.0) / 4.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum RegimeTag {
    /// `2 + 4/N < p < min(2 + 8/N, 2*)`: no solution below `c₁`, two above.
    TwoBranch,
    /// `p = 2 + 8/N`, `N <= 3`: one solution above `c₀`.
    KirchhoffCritical,
    /// `2 + 8/N < p < 2*`, `N <= 3`: one solution for every mass.
    KirchhoffSupercritical,
}

impl RegimeTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegimeTag::TwoBranch => "TwoBranch",
            RegimeTag::KirchhoffCritical => "KirchhoffCritical",
            RegimeTag::KirchhoffSupercritical => "KirchhoffSupercritical",
        }
    }

    pub fn has_unique_branch(&self) -> bool {
        !matches!(self, RegimeTag::TwoBranch)
    }
}

impl std::fmt::Display for RegimeTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Regime {
    pub tag: RegimeTag,
    /// Existence threshold: 0, `c₀` or `c₁`.
    pub c_star: f64,
}

/// Sobolev critical exponent `2*`; infinite for `N <= 2`.
pub fn sobolev_exponent(dim: u32) -> f64 {
    if dim <= 2 {
        f64::INFINITY
    } else {
        2.0 * dim as f64 / (dim as f64 - 2.0)
    }
}

/// `2 + 4/N`.
pub fn l2_critical_local(dim: u32) -> f64 {
    2.0 + 4.0 / dim as f64
}

/// `2 + 8/N`.
pub fn l2_critical_kirchhoff(dim: u32) -> f64 {
    2.0 + 8.0 / dim as f64
}

fn check_dim(dim: u32) -> Result<()> {
    if dim == 0 || dim > MAX_DIM {
        return Err(Error::inadmissible(
            "N",
            format!("dimension must lie in 1..={MAX_DIM}, got {dim}"),
        ));
    }
    Ok(())
}

/// Validates `(N, p)` and returns `p` snapped onto `2 + 8/N` when it lies
/// within [`CRITICAL_P_TOL`] of it.
pub fn admissible_exponent(dim: u32, p: f64) -> Result<f64> {
    check_dim(dim)?;
    if !p.is_finite() {
        return Err(Error::inadmissible("p", "must be finite"));
    }
    let lower = l2_critical_local(dim);
    if p <= lower + CRITICAL_P_TOL {
        return Err(Error::inadmissible(
            "p",
            format!("p = {p} must exceed the L2-critical exponent 2+4/N = {lower}"),
        ));
    }
    let upper = sobolev_exponent(dim);
    if p >= upper - CRITICAL_P_TOL {
        return Err(Error::inadmissible(
            "p",
            format!("p = {p} must be below the Sobolev exponent 2* = {upper}"),
        ));
    }
    let kc = l2_critical_kirchhoff(dim);
    let snapped = if (p - kc).abs() <= CRITICAL_P_TOL { kc } else { p };
    if dim > 3 && snapped >= kc {
        return Err(Error::inadmissible(
            "N",
            format!("N = {dim} is only admitted for p < 2+8/N = {kc}"),
        ));
    }
    Ok(snapped)
}

pub fn derived_exponents(dim: u32, p: f64) -> Result<DerivedExponents> {
    let p = admissible_exponent(dim, p)?;
    Ok(exponents_unchecked(dim, p))
}

pub(crate) fn exponents_unchecked(dim: u32, p: f64) -> DerivedExponents {
    let n = dim as f64;
    let np2 = n * (p - 2.0);
    let theta = np2 - 4.0;
    let zeta = 2.0 * n - p * (n - 2.0);
    DerivedExponents {
        theta,
        eta: 8.0 - np2,
        q: 2.0 * zeta / theta,
        zeta,
    }
}

/// Tag for an admissible `(N, p)`.
pub fn regime_tag(dim: u32, p: f64) -> Result<RegimeTag> {
    let p = admissible_exponent(dim, p)?;
    let kc = l2_critical_kirchhoff(dim);
    Ok(if p == kc {
        RegimeTag::KirchhoffCritical
    } else if p > kc {
        RegimeTag::KirchhoffSupercritical
    } else {
        RegimeTag::TwoBranch
    })
}

impl Model {
    pub fn new(a: f64, b: f64, dim: u32, p: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::inadmissible("a", format!("must be positive, got {a}")));
        }
        if !(b.is_finite() && b >= 0.0) {
            return Err(Error::inadmissible("b", format!("must be nonnegative, got {b}")));
        }
        let p = admissible_exponent(dim, p)?;
        Ok(Model { a, b, dim, p })
    }

    pub fn exponents(&self) -> DerivedExponents {
        exponents_unchecked(self.dim, self.p)
    }

    pub fn tag(&self) -> RegimeTag {
        // `p` was validated and snapped in the constructor.
        regime_tag(self.dim, self.p).expect("validated model")
    }

    pub fn with_mass(&self, c: f64) -> Result<ProblemParams> {
        ProblemParams::new(self.a, self.b, c, self.dim, self.p)
    }

    pub fn with_b(&self, b: f64) -> Result<Model> {
        Model::new(self.a, b, self.dim, self.p)
    }

    /// `N(p-2)`, which shows up in most formulas.
    pub fn np2(&self) -> f64 {
        self.dim as f64 * (self.p - 2.0)
    }
}

impl ProblemParams {
    pub fn new(a: f64, b: f64, c: f64, dim: u32, p: f64) -> Result<Self> {
        let model = Model::new(a, b, dim, p)?;
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::inadmissible("c", format!("must be positive, got {c}")));
        }
        Ok(ProblemParams {
            a: model.a,
            b: model.b,
            c,
            dim: model.dim,
            p: model.p,
        })
    }

    pub fn model(&self) -> Model {
        Model {
            a: self.a,
            b: self.b,
            dim: self.dim,
            p: self.p,
        }
    }

    pub fn exponents(&self) -> DerivedExponents {
        exponents_unchecked(self.dim, self.p)
    }
}

/// `c₀ = (b/2)^{N/(8-2N)} ‖Q_{2+8/N}‖₂^{8/(8-2N)}` given the norm.
pub fn threshold_c0_with_norm(b: f64, dim: u32, q_norm: f64) -> Result<f64> {
    check_dim(dim)?;
    if dim >= 4 {
        return Err(Error::inadmissible(
            "N",
            "c0 needs 8 - 2N > 0, so N <= 3",
        ));
    }
    if !(b.is_finite() && b >= 0.0) {
        return Err(Error::inadmissible("b", format!("must be nonnegative, got {b}")));
    }
    let n = dim as f64;
    let denom = 8.0 - 2.0 * n;
    Ok((b / 2.0).powf(n / denom) * q_norm.powf(8.0 / denom))
}

pub fn threshold_c0(b: f64, dim: u32) -> Result<f64> {
    check_dim(dim)?;
    if dim >= 4 {
        return threshold_c0_with_norm(b, dim, 1.0);
    }
    let q_norm = profile::qp_l2_norm(dim, l2_critical_kirchhoff(dim))?;
    threshold_c0_with_norm(b, dim, q_norm)
}

/// Closed-form fold mass `c₁` given `‖Q_p‖₂`.
pub fn threshold_c1_with_norm(a: f64, b: f64, dim: u32, p: f64, q_norm: f64) -> Result<f64> {
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::inadmissible("a", format!("must be positive, got {a}")));
    }
    if !(b.is_finite() && b >= 0.0) {
        return Err(Error::inadmissible("b", format!("must be nonnegative, got {b}")));
    }
    let p = admissible_exponent(dim, p)?;
    let e = exponents_unchecked(dim, p);
    if e.eta <= 0.0 {
        return Err(Error::inadmissible(
            "p",
            format!("c1 requires p < 2+8/N = {}", l2_critical_kirchhoff(dim)),
        ));
    }
    let n = dim as f64;
    let two_zeta = 2.0 * e.zeta;
    Ok((16.0 / (n * (p - 2.0))).powf(2.0 / e.zeta)
        * q_norm.powf(2.0 * (p - 2.0) / e.zeta)
        * (b / e.theta).powf(e.theta / two_zeta)
        * (a / e.eta).powf(e.eta / two_zeta))
}

pub fn threshold_c1(a: f64, b: f64, dim: u32, p: f64) -> Result<f64> {
    let p = admissible_exponent(dim, p)?;
    let q_norm = profile::qp_l2_norm(dim, p)?;
    threshold_c1_with_norm(a, b, dim, p, q_norm)
}

/// Regime tag plus the existence threshold for these coefficients.
pub fn classify_model(model: &Model) -> Result<Regime> {
    let tag = model.tag();
    let c_star = if model.b == 0.0 {
        0.0
    } else {
        match tag {
            RegimeTag::KirchhoffSupercritical => 0.0,
            RegimeTag::KirchhoffCritical => threshold_c0(model.b, model.dim)?,
            RegimeTag::TwoBranch => threshold_c1(model.a, model.b, model.dim, model.p)?,
        }
    };
    Ok(Regime { tag, c_star })
}

pub fn classify(params: &ProblemParams) -> Result<Regime> {
    classify_model(&params.model())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(x: f64, y: f64, tol: f64) -> bool {
        (x - y).abs() <= tol * y.abs().max(1.0)
    }

    #[test]
    fn exponent_examples() {
        let e = derived_exponents(3, 5.0).unwrap();
        assert_eq!((e.theta, e.eta, e.zeta), (5.0, -1.0, 1.0));
        assert!(close(e.q, 0.4, 1e-15));

        let e = derived_exponents(1, 8.0).unwrap();
        assert_eq!((e.theta, e.eta, e.zeta, e.q), (2.0, 2.0, 10.0, 10.0));

        let e = derived_exponents(2, 6.0).unwrap();
        assert_eq!((e.theta, e.eta, e.zeta, e.q), (4.0, 0.0, 4.0, 2.0));
    }

    #[test]
    fn tags() {
        assert_eq!(regime_tag(3, 5.0).unwrap(), RegimeTag::KirchhoffSupercritical);
        assert_eq!(regime_tag(3, 14.0 / 3.0).unwrap(), RegimeTag::KirchhoffCritical);
        assert_eq!(regime_tag(3, 4.0).unwrap(), RegimeTag::TwoBranch);
        assert_eq!(regime_tag(4, 3.6).unwrap(), RegimeTag::TwoBranch);
        assert_eq!(regime_tag(1, 10.0).unwrap(), RegimeTag::KirchhoffCritical);
    }

    #[test]
    fn rejects_boundaries() {
        assert!(regime_tag(3, 3.0).is_err());
        assert!(regime_tag(3, 2.0 + 4.0 / 3.0).is_err());
        assert!(regime_tag(3, 6.0).is_err());
        assert!(regime_tag(3, 7.0).is_err());
        assert!(regime_tag(4, 4.0).is_err());
        assert!(regime_tag(5, 3.5).is_err());
        assert!(regime_tag(0, 3.5).is_err());
        assert!(Model::new(0.0, 1.0, 3, 5.0).is_err());
        assert!(Model::new(1.0, -1.0, 3, 5.0).is_err());
        assert!(ProblemParams::new(1.0, 1.0, 0.0, 3, 5.0).is_err());
    }

    #[test]
    fn snaps_critical_exponent() {
        let p = admissible_exponent(3, 14.0 / 3.0 + 5e-13).unwrap();
        assert_eq!(p, l2_critical_kirchhoff(3));
    }

    #[test]
    fn c0_and_c1_formulas_with_given_norm() {
        // b = 2 cancels the prefactor.
        let c0 = threshold_c0_with_norm(2.0, 3, 1.7).unwrap();
        assert!(close(c0, 1.7f64.powi(4), 1e-14));
        let c0 = threshold_c0_with_norm(2.0, 1, 1.7).unwrap();
        assert!(close(c0, 1.7f64.powf(4.0 / 3.0), 1e-14));
        assert!(threshold_c0_with_norm(1.0, 4, 1.0).is_err());

        // N = 3, p = 4: (a + bt)/√t = (3/2) c / ‖Q‖² has minimum 2√(ab) at t = a/b.
        let (a, b, qn) = (1.3, 0.7, 2.1);
        let c1 = threshold_c1_with_norm(a, b, 3, 4.0, qn).unwrap();
        assert!(close(c1, 4.0 / 3.0 * qn * qn * (a * b).sqrt(), 1e-13));
        assert!(threshold_c1_with_norm(1.0, 1.0, 3, 5.0, 1.0).is_err());
    }

    #[test]
    fn thresholds_monotone() {
        let mut prev = 0.0;
        for k in 1..20 {
            let b = 0.1 * k as f64;
            let c0 = threshold_c0_with_norm(b, 3, 1.3).unwrap();
            assert!(c0 > prev);
            prev = c0;
        }
        let base = threshold_c1_with_norm(1.0, 1.0, 2, 4.5, 1.2).unwrap();
        assert!(threshold_c1_with_norm(1.1, 1.0, 2, 4.5, 1.2).unwrap() > base);
        assert!(threshold_c1_with_norm(1.0, 1.1, 2, 4.5, 1.2).unwrap() > base);
        assert!(threshold_c1_with_norm(1e-9, 1.0, 2, 4.5, 1.2).unwrap() < 1e-3 * base);
    }
}
