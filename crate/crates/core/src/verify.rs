//! Identity suite on a solved instance: GN identities of `Q_p`, mass and
//! gradient of every built `u_c`, Pohozaev and Nehari residuals, and the
//! PDE residual against its grid-refinement estimate.

use std::io::Write;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::Result;
use crate::limit::{build_solution, identity_scale, pohozaev_nehari_residuals, root_equation_solve, Branch};
use crate::profile::qp_profile;
use crate::quadrature::{PdeResidual, RadialField};
use crate::regimes::{classify, ProblemParams, RegimeTag};
use crate::report::{fmt_num, json_num, write_csv, SCHEMA_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub identity: f64,
    pub mass: f64,
    pub gradient: f64,
    pub pohozaev_nehari: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            identity: 1e-6,
            mass: 1e-8,
            gradient: 1e-6,
            pohozaev_nehari: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchCheck {
    pub branch: Branch,
    pub dsq: f64,
    pub lambda: f64,
    pub energy: f64,
    /// `|‖u‖₂² - c²| / c²`
    pub mass_error: f64,
    /// `|‖∇u‖₂² - D²| / D²`
    pub gradient_error: f64,
    /// Pohozaev and Nehari residuals over `a‖∇u‖² + b‖∇u‖⁴`.
    pub pohozaev_rel: f64,
    pub nehari_rel: f64,
    pub pde: PdeResidual,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub params: ProblemParams,
    pub regime: RegimeTag,
    pub c_star: f64,
    pub qp_l2sq: f64,
    pub qp_gradl2sq: f64,
    pub qp_lpp_scaled: f64,
    pub qp_identity_defect: f64,
    pub branches: Vec<BranchCheck>,
    pub tolerances: Tolerances,
    pub passed: bool,
}

/// Solves `params`, builds every branch and checks all identities.
pub fn verify_instance(params: &ProblemParams, tol: &Tolerances) -> Result<(VerifyReport, Vec<RadialField>)> {
    let regime = classify(params)?;
    let qp = qp_profile(params.dim, params.p)?;
    let model = params.model();
    let roots = root_equation_solve(params, qp.l2_norm())?;
    let mut branches = Vec::new();
    let mut fields = Vec::new();
    for br in roots {
        let u = build_solution(&br, params, &qp)?;
        let n = u.norms(params.p)?;
        let c2 = params.c * params.c;
        let (poh, neh) = pohozaev_nehari_residuals(&u, br.lambda, &model)?;
        let scale = identity_scale(&u, &model)?;
        let pde = u.pde_residual(&model, br.lambda, None)?;
        let mass_error = (n.l2sq - c2).abs() / c2;
        let gradient_error = (n.gradl2sq - br.dsq).abs() / br.dsq;
        let pohozaev_rel = poh.abs() / scale;
        let nehari_rel = neh.abs() / scale;
        let passed = mass_error < tol.mass
            && gradient_error < tol.gradient
            && pohozaev_rel < tol.pohozaev_nehari
            && nehari_rel < tol.pohozaev_nehari
            && pde.within_discretization();
        branches.push(BranchCheck {
            branch: br.branch,
            dsq: br.dsq,
            lambda: br.lambda,
            energy: br.energy,
            mass_error,
            gradient_error,
            pohozaev_rel,
            nehari_rel,
            pde,
            passed,
        });
        fields.push(u);
    }
    let defect = qp.identity_defect();
    let passed = defect < tol.identity && branches.iter().all(|b| b.passed);
    Ok((
        VerifyReport {
            params: *params,
            regime: regime.tag,
            c_star: regime.c_star,
            qp_l2sq: qp.l2sq,
            qp_gradl2sq: qp.gradl2sq,
            qp_lpp_scaled: 2.0 / params.p * qp.lpp,
            qp_identity_defect: defect,
            branches,
            tolerances: *tol,
            passed,
        },
        fields,
    ))
}

impl VerifyReport {
    pub fn to_json(&self) -> Value {
        json!({
            "schema_version": SCHEMA_VERSION,
            "params": {
                "a": json_num(self.params.a), "b": json_num(self.params.b), "c": json_num(self.params.c),
                "N": self.params.dim, "p": json_num(self.params.p),
            },
            "regime": self.regime.as_str(),
            "cStar": json_num(self.c_star),
            "qp": {
                "l2sq": json_num(self.qp_l2sq),
                "gradl2sq": json_num(self.qp_gradl2sq),
                "lppScaled": json_num(self.qp_lpp_scaled),
                "identityDefect": json_num(self.qp_identity_defect),
            },
            "branches": self.branches.iter().map(|b| json!({
                "branch": b.branch.as_str(),
                "Dsq": json_num(b.dsq),
                "lambda": json_num(b.lambda),
                "energy": json_num(b.energy),
                "massError": json_num(b.mass_error),
                "gradientError": json_num(b.gradient_error),
                "pohozaevRel": json_num(b.pohozaev_rel),
                "nehariRel": json_num(b.nehari_rel),
                "pdeResidual": json_num(b.pde.max_abs_shared),
                "pdeEstimate": json_num(b.pde.discretization_estimate),
                "pdeOrder": json_num(b.pde.observed_order),
                "passed": b.passed,
            })).collect::<Vec<_>>(),
            "passed": self.passed,
        })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let meta = [
            ("a", fmt_num(self.params.a)),
            ("b", fmt_num(self.params.b)),
            ("c", fmt_num(self.params.c)),
            ("N", self.params.dim.to_string()),
            ("p", fmt_num(self.params.p)),
            ("regime", self.regime.as_str().to_string()),
            ("qpIdentityDefect", fmt_num(self.qp_identity_defect)),
            ("passed", self.passed.to_string()),
        ];
        write_csv(
            out,
            &meta,
            &[
                "branch", "Dsq", "lambda", "energy", "massError", "gradientError", "pohozaevRel",
                "nehariRel", "pdeResidual", "pdeEstimate", "passed",
            ],
            self.branches.iter().map(|b| {
                vec![
                    b.branch.as_str().to_string(),
                    fmt_num(b.dsq),
                    fmt_num(b.lambda),
                    fmt_num(b.energy),
                    fmt_num(b.mass_error),
                    fmt_num(b.gradient_error),
                    fmt_num(b.pohozaev_rel),
                    fmt_num(b.nehari_rel),
                    fmt_num(b.pde.max_abs_shared),
                    fmt_num(b.pde.discretization_estimate),
                    b.passed.to_string(),
                ]
            }),
        )
    }
}
