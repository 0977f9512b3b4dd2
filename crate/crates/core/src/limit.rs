//! The potential-free problem. Every normalized solution is a rescaled
//! `Q_p`, and its gradient norm `t = ‖∇u‖₂²` solves the scalar equation
//!
//! ```text
//! ln(a + b t) - (κ - 1) ln t = ln κ - (p - 2) ln ‖Q_p‖₂ + (ζ/2) ln c,   κ = N(p-2)/4,
//! ```
//!
//! which is solved here in the variable `s = ln t`.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::profile::{qp_l2_norm, QpProfile};
use crate::quadrature::RadialField;
use crate::regimes::{classify_model, Model, ProblemParams, RegimeTag};
use crate::report::{fmt_num, json_num, write_csv, SCHEMA_VERSION};

/// Below this residual at the minimum the two branches are reported as one
/// double root.
pub const FOLD_RESIDUAL_TOL: f64 = 1e-11;

/// Which root of the scalar equation a solution comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Branch {
    /// The only root (including the double root at the fold).
    Unique,
    /// Smaller gradient norm `D₂`.
    Lower,
    /// Larger gradient norm `D₁`; the local minimizer with the lower energy.
    Upper,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::Unique => "Unique",
            Branch::Lower => "Lower",
            Branch::Upper => "Upper",
        }
    }
}

/// One normalized solution of the limit problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitBranch {
    /// `D² = ‖∇u_c‖₂²`
    pub dsq: f64,
    pub lambda: f64,
    /// `I_∞(u_c)`
    pub energy: f64,
    pub branch: Branch,
}

fn log_add(x: f64, y: f64) -> f64 {
    let (hi, lo) = if x > y { (x, y) } else { (y, x) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// The scalar equation in `s = ln t`; positive for small `t`.
#[derive(Debug, Clone, Copy)]
pub struct RootEquation {
    ln_a: f64,
    ln_b: f64,
    kappa: f64,
    rhs: f64,
    tag: RegimeTag,
}

impl RootEquation {
    pub fn new(params: &ProblemParams, q_norm: f64) -> Self {
        let e = params.exponents();
        let tag = params.model().tag();
        let kappa = if tag == RegimeTag::KirchhoffCritical { 2.0 } else { e.kappa() };
        RootEquation {
            tag,
            ln_a: params.a.ln(),
            ln_b: if params.b > 0.0 { params.b.ln() } else { f64::NEG_INFINITY },
            kappa,
            rhs: kappa.ln() - (params.p - 2.0) * q_norm.ln() + 0.5 * e.zeta * params.c.ln(),
        }
    }

    /// Residual at `s = ln t`. Equal to the log-ratio of the two sides, so
    /// it doubles as a relative residual.
    pub fn residual(&self, s: f64) -> f64 {
        log_add(self.ln_a, self.ln_b + s) - (self.kappa - 1.0) * s - self.rhs
    }

    /// `d residual / ds`.
    pub fn slope(&self, s: f64) -> f64 {
        let frac = if self.ln_b == f64::NEG_INFINITY {
            0.0
        } else {
            let z = self.ln_b + s - self.ln_a;
            // b t / (a + b t)
            if z > 0.0 {
                1.0 / (1.0 + (-z).exp())
            } else {
                let e = z.exp();
                e / (1.0 + e)
            }
        };
        frac - (self.kappa - 1.0)
    }

    /// Natural scale `ln(a/b)` (or the `b = 0` root).
    fn center(&self) -> f64 {
        if self.ln_b == f64::NEG_INFINITY {
            (self.ln_a - self.rhs) / (self.kappa - 1.0)
        } else {
            self.ln_a - self.ln_b
        }
    }

    /// Expected sign of the residual as `t → ∞` (0 when it tends to a
    /// constant of that sign that rules out a root).
    fn far_sign(&self) -> f64 {
        if self.ln_b == f64::NEG_INFINITY || self.tag == RegimeTag::KirchhoffSupercritical {
            -1.0
        } else if self.tag == RegimeTag::TwoBranch {
            1.0
        } else if self.ln_b - self.rhs < 0.0 {
            -1.0
        } else {
            0.0
        }
    }
}

/// Relative residual of the scalar equation at `t`.
pub fn root_residual(params: &ProblemParams, q_norm: f64, t: f64) -> f64 {
    RootEquation::new(params, q_norm).residual(t.ln())
}

/// Multiplier, energy and label for a given `D²`.
pub fn branch_from_dsq(params: &ProblemParams, dsq: f64, branch: Branch) -> LimitBranch {
    let e = params.exponents();
    let np2 = params.dim as f64 * (params.p - 2.0);
    let (a, b, c) = (params.a, params.b, params.c);
    LimitBranch {
        dsq,
        lambda: e.zeta * dsq * (a + b * dsq) / (np2 * c * c),
        energy: e.theta * a * dsq / (2.0 * np2) + (np2 - 8.0) * b * dsq * dsq / (4.0 * np2),
        branch,
    }
}

fn bisect_s(eq: &RootEquation, mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let f_lo = f(lo);
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo) <= 1e-14 * mid.abs().max(1.0) || mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) > 0.0) == (f_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let _ = eq;
    0.5 * (lo + hi)
}

/// Location of the minimum of the residual (`TwoBranch` only), found from
/// the slope without using its closed form.
fn minimizer(eq: &RootEquation) -> Result<f64> {
    let c = eq.center();
    let (mut lo, mut hi) = (c - 1.0, c + 1.0);
    for _ in 0..200 {
        if eq.slope(lo) < 0.0 && eq.slope(hi) > 0.0 {
            return Ok(bisect_s(eq, lo, hi, |s| eq.slope(s)));
        }
        lo -= 2.0 * (hi - lo);
        hi += 2.0 * (hi - lo);
    }
    Err(Error::BracketExhausted("minimum of the scalar residual".into()))
}

/// All positive roots `t = D²`, labelled by branch.
///
/// An empty list means no solution exists; a failed bracket is an error.
pub fn root_equation_solve(params: &ProblemParams, q_norm: f64) -> Result<Vec<LimitBranch>> {
    if !(q_norm.is_finite() && q_norm > 0.0) {
        return Err(Error::inadmissible("qpNorm", format!("must be positive, got {q_norm}")));
    }
    let eq = RootEquation::new(params, q_norm);
    let far = eq.far_sign();
    if far == 0.0 {
        return Ok(Vec::new());
    }
    let two_branch = params.b > 0.0 && eq.tag == RegimeTag::TwoBranch;

    // window whose endpoints show the asymptotic signs
    let center = eq.center();
    let mut half = (1e12f64).ln();
    let (mut lo, mut hi);
    loop {
        lo = center - half;
        hi = center + half;
        let ok_lo = eq.residual(lo) > 0.0;
        let ok_hi = eq.residual(hi) * far > 0.0;
        if ok_lo && ok_hi {
            break;
        }
        half *= 2.0;
        if half > 1400.0 {
            return Err(Error::BracketExhausted(format!(
                "residual keeps its sign on t in [e^{lo:.1}, e^{hi:.1}]"
            )));
        }
    }

    let s_min = if two_branch { Some(minimizer(&eq)?) } else { None };
    if let Some(sm) = s_min {
        // the residual is convex in s, so all roots lie inside any window
        // with positive ends that contains the minimum
        lo = lo.min(sm - 1.0);
        hi = hi.max(sm + 1.0);
        let rm = eq.residual(sm);
        if rm > FOLD_RESIDUAL_TOL {
            return Ok(Vec::new());
        }
        if rm.abs() <= FOLD_RESIDUAL_TOL {
            return Ok(vec![branch_from_dsq(params, sm.exp(), Branch::Unique)]);
        }
    }

    let mut grid: Vec<f64> = (0..=400).map(|k| lo + (hi - lo) * k as f64 / 400.0).collect();
    if let Some(sm) = s_min {
        grid.push(sm);
        grid.sort_by(|x, y| x.partial_cmp(y).unwrap());
    }
    let mut roots = Vec::new();
    let vals: Vec<f64> = grid.iter().map(|&s| eq.residual(s)).collect();
    for k in 0..grid.len() - 1 {
        if vals[k] == 0.0 {
            roots.push(grid[k]);
        } else if vals[k] * vals[k + 1] < 0.0 {
            let s = bisect_s(&eq, grid[k], grid[k + 1], |s| eq.residual(s));
            roots.push(polish(&eq, s, grid[k], grid[k + 1]));
        }
    }
    let labels: &[Branch] = match roots.len() {
        0 => &[],
        1 => &[Branch::Unique],
        2 => &[Branch::Lower, Branch::Upper],
        n => {
            return Err(Error::NoConvergence {
                what: format!("scalar root scan found {n} roots"),
                iterations: grid.len(),
            })
        }
    };
    Ok(roots
        .iter()
        .zip(labels)
        .map(|(&s, &b)| branch_from_dsq(params, s.exp(), b))
        .collect())
}

fn polish(eq: &RootEquation, s: f64, lo: f64, hi: f64) -> f64 {
    let r = eq.residual(s);
    let d = eq.slope(s);
    if d == 0.0 {
        return s;
    }
    let next = s - r / d;
    if next > lo && next < hi && eq.residual(next).abs() <= r.abs() {
        next
    } else {
        s
    }
}

/// [`root_equation_solve`] with the memoized `‖Q_p‖₂`.
pub fn solve(params: &ProblemParams) -> Result<Vec<LimitBranch>> {
    root_equation_solve(params, qp_l2_norm(params.dim, params.p)?)
}

/// `u_c(x) = [4(a + bD²)/(N(p-2))]^{1/(p-2)} (D/c)^{2/(p-2)} Q_p((D/c) x)`.
pub fn build_solution(branch: &LimitBranch, params: &ProblemParams, qp: &QpProfile) -> Result<RadialField> {
    if qp.dim != params.dim || qp.p != params.p {
        return Err(Error::inadmissible("qp", "profile built for different (N, p)"));
    }
    let np2 = params.dim as f64 * (params.p - 2.0);
    let scale = branch.dsq.sqrt() / params.c;
    let amp = (4.0 * (params.a + params.b * branch.dsq) / np2).powf(1.0 / (params.p - 2.0))
        * scale.powf(2.0 / (params.p - 2.0));
    // dilate gives scale^{N/2} Q(scale x)
    let u = qp.grid.dilate(scale)?;
    Ok(u.scaled(amp * scale.powf(-(params.dim as f64) / 2.0)))
}

/// `(P_∞(u), N_{∞,λ}(u))`; see [`identity_scale`] for a natural size.
pub fn pohozaev_nehari_residuals(u: &RadialField, lambda: f64, model: &Model) -> Result<(f64, f64)> {
    let n = u.norms(model.p)?;
    let kin = model.a * n.gradl2sq + model.b * n.gradl2sq * n.gradl2sq;
    let pohozaev = kin - model.np2() / (2.0 * model.p) * n.lpp;
    let nehari = kin + lambda * n.l2sq - n.lpp;
    Ok((pohozaev, nehari))
}

/// `a‖∇u‖₂² + b‖∇u‖₂⁴`, the size of each term in both identities.
pub fn identity_scale(u: &RadialField, model: &Model) -> Result<f64> {
    let g = u.norms(model.p)?.gradl2sq;
    Ok(model.a * g + model.b * g * g)
}

/// `I_∞(h ⋆ u)`.
pub fn dilation_energy(u: &RadialField, model: &Model, h: f64) -> Result<f64> {
    Ok(u.dilate(h)?.evaluate_functional(model, None)?.total)
}

/// Closed-form solution with `b = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalClosedForm {
    pub dsq: f64,
    pub lambda: f64,
    pub energy: f64,
}

/// `D² = (4a/(N(p-2)))^{4/θ} ‖Q_p‖₂^{4(p-2)/θ} c^{-2ζ/θ}` and the matching
/// multiplier and energy.
pub fn local_closed_form(a: f64, c: f64, dim: u32, p: f64, q_norm: f64) -> LocalClosedForm {
    let n = dim as f64;
    let np2 = n * (p - 2.0);
    let theta = np2 - 4.0;
    let zeta = 2.0 * n - p * (n - 2.0);
    let dsq = (4.0 * a / np2).powf(4.0 / theta)
        * q_norm.powf(4.0 * (p - 2.0) / theta)
        * c.powf(-2.0 * zeta / theta);
    LocalClosedForm {
        dsq,
        lambda: zeta * a * dsq / (np2 * c * c),
        energy: theta * a * dsq / (2.0 * np2),
    }
}

/// One row of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BifurcationRow {
    pub c: f64,
    pub branch: Branch,
    pub dsq: f64,
    pub lambda: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BifurcationTable {
    pub model: Model,
    pub regime: RegimeTag,
    pub c_star: f64,
    pub q_norm: f64,
    pub c_grid: Vec<f64>,
    pub rows: Vec<BifurcationRow>,
}

impl BifurcationTable {
    fn meta(&self) -> Vec<(&'static str, String)> {
        vec![
            ("a", fmt_num(self.model.a)),
            ("b", fmt_num(self.model.b)),
            ("N", self.model.dim.to_string()),
            ("p", fmt_num(self.model.p)),
            ("regime", self.regime.as_str().to_string()),
            ("cStar", fmt_num(self.c_star)),
            ("qpNorm", fmt_num(self.q_norm)),
            ("points", self.c_grid.len().to_string()),
        ]
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_csv(
            out,
            &self.meta(),
            &["c", "branch", "Dsq", "lambda", "energy"],
            self.rows.iter().map(|r| {
                vec![
                    fmt_num(r.c),
                    r.branch.as_str().to_string(),
                    fmt_num(r.dsq),
                    fmt_num(r.lambda),
                    fmt_num(r.energy),
                ]
            }),
        )
    }

    pub fn to_json(&self) -> Value {
        json!({
            "schema_version": SCHEMA_VERSION,
            "metadata": {
                "a": json_num(self.model.a),
                "b": json_num(self.model.b),
                "N": self.model.dim,
                "p": json_num(self.model.p),
                "regime": self.regime.as_str(),
                "cStar": json_num(self.c_star),
                "qpNorm": json_num(self.q_norm),
                "cGrid": self.c_grid.iter().map(|&c| json_num(c)).collect::<Vec<_>>(),
            },
            "rows": self.rows.iter().map(|r| json!({
                "c": json_num(r.c),
                "branch": r.branch.as_str(),
                "Dsq": json_num(r.dsq),
                "lambda": json_num(r.lambda),
                "energy": json_num(r.energy),
            })).collect::<Vec<_>>(),
        })
    }

    /// Rows of one branch in `c` order.
    pub fn branch_rows(&self, branch: Branch) -> Vec<BifurcationRow> {
        self.rows.iter().copied().filter(|r| r.branch == branch).collect()
    }
}

/// Solves for every `c` in `c_grid`; `workers` shards the grid over a
/// thread pool.
pub fn sweep(model: &Model, c_grid: &[f64], workers: Option<usize>) -> Result<BifurcationTable> {
    if c_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::inadmissible("cGrid", "must be strictly increasing"));
    }
    let regime = classify_model(model)?;
    let q_norm = qp_l2_norm(model.dim, model.p)?;
    let run = || -> Result<Vec<Vec<LimitBranch>>> {
        c_grid
            .par_iter()
            .map(|&c| root_equation_solve(&model.with_mass(c)?, q_norm))
            .collect()
    };
    let per_c = match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::Io(e.to_string()))?
            .install(run)?,
        None => run()?,
    };
    let mut rows: Vec<BifurcationRow> = c_grid
        .iter()
        .zip(per_c)
        .flat_map(|(&c, bs)| {
            bs.into_iter().map(move |b| BifurcationRow {
                c,
                branch: b.branch,
                dsq: b.dsq,
                lambda: b.lambda,
                energy: b.energy,
            })
        })
        .collect();
    rows.sort_by(|x, y| x.c.partial_cmp(&y.c).unwrap().then(x.branch.cmp(&y.branch)));
    Ok(BifurcationTable {
        model: *model,
        regime: regime.tag,
        c_star: regime.c_star,
        q_norm,
        c_grid: c_grid.to_vec(),
        rows,
    })
}

/// `n` log-spaced masses from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (l, h) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| {
            if k == n - 1 {
                hi
            } else {
                (l + (h - l) * k as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// Where the two branches merge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FoldPoint {
    pub c_fold: f64,
    /// Common `D²` at the merge.
    pub upsilon_dsq: f64,
    /// Common multiplier at the merge.
    pub lambda_mult: f64,
    /// `|d residual / ds|` at `Υ`.
    pub slope_at_fold: f64,
}

/// Locates the fold by bisecting in `c` on the sign of the residual's
/// minimum over `t`.
pub fn fold_point(model: &Model) -> Result<FoldPoint> {
    if model.tag() != RegimeTag::TwoBranch || model.b == 0.0 {
        return Err(Error::RegimeMismatch(format!(
            "fold point exists only for TwoBranch with b > 0 (got {} with b = {})",
            model.tag().as_str(),
            model.b
        )));
    }
    let q_norm = qp_l2_norm(model.dim, model.p)?;
    let min_residual = |ln_c: f64| -> Result<(f64, f64)> {
        let eq = RootEquation::new(&model.with_mass(ln_c.exp())?, q_norm);
        let s = minimizer(&eq)?;
        Ok((eq.residual(s), s))
    };
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    let mut expand = 0;
    while min_residual(lo)?.0 <= 0.0 || min_residual(hi)?.0 >= 0.0 {
        lo -= 2.0;
        hi += 2.0;
        expand += 1;
        if expand > 300 {
            return Err(Error::BracketExhausted("fold mass".into()));
        }
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if min_residual(mid)?.0 > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let ln_c = 0.5 * (lo + hi);
    let (_, s) = min_residual(ln_c)?;
    let c_fold = ln_c.exp();
    let params = model.with_mass(c_fold)?;
    let eq = RootEquation::new(&params, q_norm);
    let upsilon = s.exp();
    Ok(FoldPoint {
        c_fold,
        upsilon_dsq: upsilon,
        lambda_mult: branch_from_dsq(&params, upsilon, Branch::Unique).lambda,
        slope_at_fold: eq.slope(s).abs(),
    })
}

/// The two branches just above the fold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FoldApproach {
    pub c: f64,
    pub lower_dsq: f64,
    pub upper_dsq: f64,
    pub upsilon_dsq: f64,
    /// `(D₁² - D₂²)/Υ`
    pub relative_gap: f64,
    /// `D₂² - Υ` (negative) and `D₁² - Υ` (positive).
    pub lower_offset: f64,
    pub upper_offset: f64,
}

/// Branch split at `c = c₁(1 + rel)`.
pub fn fold_approach(model: &Model, rel: f64) -> Result<FoldApproach> {
    let fold = fold_point(model)?;
    let params = model.with_mass(fold.c_fold * (1.0 + rel))?;
    let roots = solve(&params)?;
    let (lower, upper) = match roots.as_slice() {
        [one] => (one.dsq, one.dsq),
        [l, u] => (l.dsq, u.dsq),
        _ => {
            return Err(Error::NoSolution(format!(
                "no branch at c = c1(1 + {rel})"
            )))
        }
    };
    let ups = fold.upsilon_dsq;
    Ok(FoldApproach {
        c: params.c,
        lower_dsq: lower,
        upper_dsq: upper,
        upsilon_dsq: ups,
        relative_gap: (upper - lower) / ups,
        lower_offset: lower - ups,
        upper_offset: upper - ups,
    })
}

/// `m_β / m_α` against `(α/β)^q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyRatioReport {
    pub alpha: f64,
    pub beta: f64,
    pub m_alpha: f64,
    pub m_beta: f64,
    pub q: f64,
    pub ratio: f64,
    pub bound: f64,
    /// `ratio - bound`; nonnegative when the inequality holds.
    pub slack: f64,
    pub holds: bool,
}

fn unique_energy(params: &ProblemParams) -> Result<f64> {
    match solve(params)?.as_slice() {
        [one] => Ok(one.energy),
        [] => Err(Error::NoSolution(format!("no solution at c = {}", params.c))),
        _ => Err(Error::RegimeMismatch("expected a unique branch".into())),
    }
}

/// Checks `m_β / m_α ≥ (α/β)^q` for `α ≥ β > c*`.
pub fn energy_ratio_check(model: &Model, alpha: f64, beta: f64) -> Result<EnergyRatioReport> {
    let regime = classify_model(model)?;
    if regime.tag == RegimeTag::TwoBranch {
        return Err(Error::RegimeMismatch(
            "energy ratio needs p >= 2 + 8/N".into(),
        ));
    }
    if !(alpha >= beta && beta > regime.c_star) {
        return Err(Error::inadmissible(
            "alpha",
            format!("need alpha >= beta > c* = {} (got {alpha}, {beta})", regime.c_star),
        ));
    }
    let m_alpha = unique_energy(&model.with_mass(alpha)?)?;
    let m_beta = unique_energy(&model.with_mass(beta)?)?;
    let q = model.exponents().q;
    let ratio = m_beta / m_alpha;
    let bound = (alpha / beta).powf(q);
    let slack = ratio - bound;
    Ok(EnergyRatioReport {
        alpha,
        beta,
        m_alpha,
        m_beta,
        q,
        ratio,
        bound,
        slack,
        holds: slack >= -1e-12 * bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BLimitRow {
    pub b: f64,
    pub dsq: f64,
    pub lambda: f64,
    pub energy: f64,
    pub dsq_error: f64,
    pub lambda_error: f64,
    /// Relative change of `λ` from the previous row.
    pub lambda_jump: f64,
    /// Bound on that change from `dλ/db = ζ D⁴/(N(p-2)c²)` plus the `D²` shift.
    pub lambda_jump_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BLimitReport {
    pub params: ProblemParams,
    /// Root of the scalar equation at `b = 0`.
    pub solved_at_zero: LocalClosedForm,
    /// Closed form at `b = 0`.
    pub closed_form: LocalClosedForm,
    pub rows: Vec<BLimitRow>,
    /// Largest `b` from which the `D²` error decreases along the grid.
    pub monotone_from: Option<f64>,
}

/// Follows the unique branch as `b ↓ 0`.
pub fn b_limit_check(params: &ProblemParams, b_grid: &[f64]) -> Result<BLimitReport> {
    let model = params.model();
    if model.tag() == RegimeTag::TwoBranch {
        return Err(Error::RegimeMismatch("b-limit needs p >= 2 + 8/N".into()));
    }
    if b_grid.windows(2).any(|w| !(w[0] > w[1])) || b_grid.iter().any(|&b| !(b > 0.0)) {
        return Err(Error::inadmissible("bGrid", "must be positive and strictly decreasing"));
    }
    let q_norm = qp_l2_norm(params.dim, params.p)?;
    let zero = ProblemParams { b: 0.0, ..*params };
    let at_zero = match root_equation_solve(&zero, q_norm)?.as_slice() {
        [one] => LocalClosedForm {
            dsq: one.dsq,
            lambda: one.lambda,
            energy: one.energy,
        },
        _ => return Err(Error::NoConvergence { what: "b = 0 root".into(), iterations: 0 }),
    };
    let closed = local_closed_form(params.a, params.c, params.dim, params.p, q_norm);
    let e = params.exponents();
    let np2 = model.np2();
    let mut rows: Vec<BLimitRow> = Vec::with_capacity(b_grid.len());
    for &b in b_grid {
        let pb = ProblemParams { b, ..*params };
        let branch = match root_equation_solve(&pb, q_norm)?.as_slice() {
            [one] => *one,
            [] => {
                return Err(Error::NoSolution(format!(
                    "no solution at b = {b}, c = {} (c below threshold)",
                    params.c
                )))
            }
            _ => return Err(Error::RegimeMismatch("expected a unique branch".into())),
        };
        let (jump, bound) = match rows.last() {
            None => (0.0, 0.0),
            Some(prev) => {
                let c2 = params.c * params.c;
                let d_hi = prev.dsq.max(branch.dsq);
                // λ = ζ t (a + b t)/(N(p-2)c²) is increasing in t and b
                let lip_t = e.zeta * (params.a + 2.0 * prev.b * d_hi) / (np2 * c2);
                let lip_b = e.zeta * d_hi * d_hi / (np2 * c2);
                let bound = lip_t * (prev.dsq - branch.dsq).abs() + lip_b * (prev.b - b);
                (
                    (branch.lambda - prev.lambda).abs() / prev.lambda,
                    bound / prev.lambda,
                )
            }
        };
        rows.push(BLimitRow {
            b,
            dsq: branch.dsq,
            lambda: branch.lambda,
            energy: branch.energy,
            dsq_error: (branch.dsq - at_zero.dsq).abs(),
            lambda_error: (branch.lambda - at_zero.lambda).abs(),
            lambda_jump: jump,
            lambda_jump_bound: bound,
        });
    }
    let mut monotone_from = None;
    for k in (0..rows.len()).rev() {
        let ok = rows[k..].windows(2).all(|w| w[1].dsq_error < w[0].dsq_error);
        if ok {
            monotone_from = Some(rows[k].b);
        } else {
            break;
        }
    }
    Ok(BLimitReport {
        params: *params,
        solved_at_zero: at_zero,
        closed_form: closed,
        rows,
        monotone_from,
    })
}
