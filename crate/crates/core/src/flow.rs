//! Normalized gradient flow on the mass sphere `‖u‖₂² = c²` for radial
//! functions, discretized with P1 elements on a uniform radial grid and a
//! Dirichlet condition at the outer radius.
//!
//! Each step moves along the preconditioned projected gradient, with a
//! Barzilai-Borwein trial step halved until the energy decreases enough,
//! and then rescales back to mass `c²`.

use std::io::Write;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::limit::{solve, Branch};
use crate::potential::PotentialSpec;
use crate::profile::qp_profile;
use crate::quadrature::{gauss_legendre, sphere_area, RadialField};
use crate::regimes::{threshold_c1, ProblemParams, RegimeTag};
use crate::report::{fmt_num, json_num, write_csv, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowSchedule {
    /// Stop once `gradientNormOnSphere <= tol`. The norm is the projected
    /// gradient measured in the dual norm of `(a + b‖∇u‖²)K + σW` and divided
    /// by the same norm of the multiplier term `λWu`, so it is dimensionless.
    pub tol: f64,
    pub max_steps: usize,
    pub initial_step: f64,
    /// Halvings allowed per line search.
    pub max_halvings: usize,
    /// Consecutive failed line searches before giving up.
    pub divergence_window: usize,
    /// Keep every `trace_every`-th step in the trace (the last is always kept).
    pub trace_every: usize,
}

impl Default for FlowSchedule {
    fn default() -> Self {
        FlowSchedule {
            tol: 1e-8,
            max_steps: 20_000,
            initial_step: 1.0,
            max_halvings: 60,
            divergence_window: 10,
            trace_every: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowTraceRow {
    pub step: usize,
    pub energy: f64,
    pub gradient_norm: f64,
    pub multiplier: f64,
}

/// Why the flow stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Termination {
    /// `gradientNormOnSphere <= tol`.
    Tolerance,
    /// The predicted decrease of a full step fell below the resolution of the
    /// energy in double precision.
    RoundoffFloor,
}

#[derive(Debug, Clone)]
pub struct FlowState {
    pub u: RadialField,
    pub mass: f64,
    pub energy: f64,
    pub multiplier_estimate: f64,
    pub gradient_norm_on_sphere: f64,
    pub step: usize,
    pub converged: bool,
    pub termination: Termination,
    pub trace: Vec<FlowTraceRow>,
    /// Largest relative mass deviation seen after any projection.
    pub max_mass_defect: f64,
}

impl FlowState {
    pub fn write_trace_csv<W: Write>(&self, out: W, params: &ProblemParams, v: &PotentialSpec) -> Result<()> {
        let meta = [
            ("N", params.dim.to_string()),
            ("p", fmt_num(params.p)),
            ("a", fmt_num(params.a)),
            ("b", fmt_num(params.b)),
            ("c", fmt_num(params.c)),
            ("potential", v.name().to_string()),
            ("converged", self.converged.to_string()),
        ];
        write_csv(
            out,
            &meta,
            &["step", "energy", "gradientNorm", "multiplierEstimate"],
            self.trace.iter().map(|t| {
                vec![t.step.to_string(), fmt_num(t.energy), fmt_num(t.gradient_norm), fmt_num(t.multiplier)]
            }),
        )
    }

    pub fn to_json(&self) -> Value {
        json!({
            "schema_version": SCHEMA_VERSION,
            "mass": json_num(self.mass),
            "energy": json_num(self.energy),
            "multiplierEstimate": json_num(self.multiplier_estimate),
            "gradientNormOnSphere": json_num(self.gradient_norm_on_sphere),
            "step": self.step,
            "converged": self.converged,
            "termination": format!("{:?}", self.termination),
            "maxMassDefect": json_num(self.max_mass_defect),
        })
    }
}

/// P1 discretization: lumped mass, exact stiffness, exact potential weights.
struct Discrete {
    p: f64,
    a: f64,
    b: f64,
    /// mass weights, unknowns `0..n` (the node at `r_max` is pinned to 0)
    w: Vec<f64>,
    /// cell stiffness `|S| ∫_cell r^{N-1} dr / h²`
    k: Vec<f64>,
    /// potential weights
    v: Vec<f64>,
}

struct Eval {
    energy: f64,
    g_sq: f64,
    grad: Vec<f64>,
}

impl Discrete {
    fn new(nodes: &[f64], dim: u32, params: &ProblemParams, pot: &PotentialSpec) -> Self {
        let n = nodes.len() - 1;
        let h = nodes[1] - nodes[0];
        let area = sphere_area(dim);
        let n1 = dim as i32 - 1;
        let jac = |r: f64| r.powi(n1);
        let breaks = pot.breakpoints();
        let mut w = vec![0.0; n];
        let mut v = vec![0.0; n];
        let mut k = vec![0.0; n];
        for c in 0..n {
            let (lo, hi) = (nodes[c], nodes[c + 1]);
            k[c] = area * gauss_legendre(lo, hi, jac) / (h * h);
            let left = |r: f64| (hi - r) / h;
            let right = |r: f64| (r - lo) / h;
            w[c] += area * gauss_legendre(lo, hi, |r| left(r) * jac(r));
            if c + 1 < n {
                w[c + 1] += area * gauss_legendre(lo, hi, |r| right(r) * jac(r));
            }
            if !pot.is_zero() {
                let mut cuts = vec![lo];
                cuts.extend(breaks.iter().copied().filter(|&x| x > lo && x < hi));
                cuts.push(hi);
                for s in cuts.windows(2) {
                    v[c] += area * gauss_legendre(s[0], s[1], |r| pot.value(r) * left(r) * jac(r));
                    if c + 1 < n {
                        v[c + 1] += area * gauss_legendre(s[0], s[1], |r| pot.value(r) * right(r) * jac(r));
                    }
                }
            }
        }
        Discrete {
            p: params.p,
            a: params.a,
            b: params.b,
            w,
            k,
            v,
        }
    }

    fn mass(&self, u: &[f64]) -> f64 {
        u.iter().zip(&self.w).map(|(x, w)| w * x * x).sum()
    }

    fn gradient_sq(&self, u: &[f64]) -> f64 {
        let n = u.len();
        (0..n)
            .map(|c| {
                let next = if c + 1 < n { u[c + 1] } else { 0.0 };
                self.k[c] * (next - u[c]).powi(2)
            })
            .sum()
    }

    /// `K u` with `uᵀ K u = ‖∇u‖²`.
    fn stiffness_apply(&self, u: &[f64]) -> Vec<f64> {
        let n = u.len();
        (0..n)
            .map(|i| {
                let next = if i + 1 < n { u[i + 1] } else { 0.0 };
                let mut s = self.k[i] * (u[i] - next);
                if i > 0 {
                    s += self.k[i - 1] * (u[i] - u[i - 1]);
                }
                s
            })
            .collect()
    }

    fn energy(&self, u: &[f64]) -> f64 {
        let g = self.gradient_sq(u);
        let pot: f64 = u.iter().zip(&self.v).map(|(x, v)| v * x * x).sum();
        let lpp: f64 = u.iter().zip(&self.w).map(|(x, w)| w * x.abs().powf(self.p)).sum();
        0.5 * self.a * g + 0.25 * self.b * g * g + 0.5 * pot - lpp / self.p
    }

    /// `E(u + δ) - E(u)` without cancelling the two large energies.
    fn energy_change(&self, u: &[f64], next: &[f64]) -> f64 {
        let n = u.len();
        let d: Vec<f64> = (0..n).map(|i| next[i] - u[i]).collect();
        let at = |x: &[f64], i: usize| if i < n { x[i] } else { 0.0 };
        let mut g = 0.0;
        let mut dg = 0.0;
        for c in 0..n {
            let old = at(u, c + 1) - u[c];
            let dd = at(&d, c + 1) - d[c];
            g += self.k[c] * old * old;
            dg += self.k[c] * dd * (2.0 * old + dd);
        }
        let mut dpot = 0.0;
        let mut dlpp = 0.0;
        for i in 0..n {
            dpot += self.v[i] * d[i] * (2.0 * u[i] + d[i]);
            let ratio = d[i] / u[i];
            dlpp += self.w[i]
                * if u[i] != 0.0 && ratio.abs() < 0.5 {
                    u[i].abs().powf(self.p) * (self.p * ratio.ln_1p()).exp_m1()
                } else {
                    next[i].abs().powf(self.p) - u[i].abs().powf(self.p)
                };
        }
        0.5 * self.a * dg + 0.25 * self.b * dg * (2.0 * g + dg) + 0.5 * dpot - dlpp / self.p
    }

    /// Sum of the magnitudes of the energy terms, times a small multiple of
    /// the unit roundoff scaled by the kinetic coefficient.
    fn resolution(&self, u: &[f64]) -> f64 {
        let g = self.gradient_sq(u);
        let pot: f64 = u.iter().zip(&self.v).map(|(x, v)| v * x * x).sum();
        let lpp: f64 = u.iter().zip(&self.w).map(|(x, w)| w * x.abs().powf(self.p)).sum();
        let mag = 0.5 * self.a * g + 0.25 * self.b * g * g + 0.5 * pot + lpp / self.p;
        2.0 * f64::EPSILON * mag * (1.0 + self.b * g / self.a.max(f64::MIN_POSITIVE)).sqrt()
    }

    fn eval(&self, u: &[f64]) -> Eval {
        let g_sq = self.gradient_sq(u);
        let ku = self.stiffness_apply(u);
        let coef = self.a + self.b * g_sq;
        let grad = (0..u.len())
            .map(|i| coef * ku[i] + self.v[i] * u[i] - self.w[i] * u[i].abs().powf(self.p - 2.0) * u[i])
            .collect();
        Eval {
            energy: self.energy(u),
            g_sq,
            grad,
        }
    }

    /// Solves `(s K + σ W) x = rhs` (tridiagonal, SPD).
    fn precondition(&self, s: f64, sigma: f64, rhs: &[f64]) -> Vec<f64> {
        let n = rhs.len();
        let diag: Vec<f64> = (0..n)
            .map(|i| s * (self.k[i] + if i > 0 { self.k[i - 1] } else { 0.0 }) + sigma * self.w[i])
            .collect();
        let off: Vec<f64> = (0..n.saturating_sub(1)).map(|i| -s * self.k[i]).collect();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        c[0] = if n > 1 { off[0] / diag[0] } else { 0.0 };
        d[0] = rhs[0] / diag[0];
        for i in 1..n {
            let m = diag[i] - off[i - 1] * c[i - 1];
            if i + 1 < n {
                c[i] = off[i] / m;
            }
            d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / m;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        d
    }

    fn normalize(&self, u: &mut [f64], c2: f64) {
        let s = (c2 / self.mass(u)).sqrt();
        u.iter_mut().for_each(|x| *x *= s);
    }

    fn dot_w(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(y).zip(&self.w).map(|((a, b), w)| a * b * w).sum()
    }
}

/// Runs the flow from `initial` (its grid becomes the flow grid).
pub fn normalized_gradient_flow(
    initial: &RadialField,
    v: &PotentialSpec,
    params: &ProblemParams,
    schedule: &FlowSchedule,
) -> Result<FlowState> {
    if params.model().tag() != RegimeTag::TwoBranch {
        return Err(Error::RegimeMismatch("the flow needs 2 + 4/N < p < 2 + 8/N".into()));
    }
    if params.b <= 0.0 {
        return Err(Error::inadmissible("b", "the flow needs b > 0"));
    }
    let c1 = threshold_c1(params.a, params.b, params.dim, params.p)?;
    if params.c <= c1 {
        return Err(Error::RegimeMismatch(format!("the flow needs c > c1 = {c1}")));
    }
    if initial.dim() != params.dim {
        return Err(Error::inadmissible("initial", "dimension mismatch"));
    }
    let nodes = initial.nodes().to_vec();
    let disc = Discrete::new(&nodes, params.dim, params, v);
    let c2 = params.c * params.c;
    let n = nodes.len() - 1;
    let mut u: Vec<f64> = initial.values()[..n].to_vec();
    if disc.mass(&u) <= 0.0 {
        return Err(Error::inadmissible("initial", "initial data has zero mass"));
    }
    disc.normalize(&mut u, c2);

    let mut trace = Vec::new();
    let mut max_mass_defect: f64 = 0.0;
    let mut tau = schedule.initial_step;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut failures = 0;
    let mut cur = disc.eval(&u);
    let mut step = 0;
    let mut floor_hit = false;
    loop {
        let lambda = -u.iter().zip(&cur.grad).map(|(x, g)| x * g).sum::<f64>() / c2;
        // projected Euclidean gradient; zero exactly at constrained critical points
        let g_proj: Vec<f64> = (0..n).map(|i| cur.grad[i] + lambda * disc.w[i] * u[i]).collect();
        let s_coef = params.a + params.b * cur.g_sq;
        let sigma = lambda.max(1e-3 * s_coef / (nodes[n] * nodes[n]));
        let x = disc.precondition(s_coef, sigma, &cur.grad);
        let wu: Vec<f64> = (0..n).map(|i| disc.w[i] * u[i]).collect();
        let y = disc.precondition(s_coef, sigma, &wu);
        // dual norms through the preconditioner: ‖g_proj‖ relative to ‖λ W u‖
        let num: f64 = (0..n).map(|i| g_proj[i] * (x[i] + lambda * y[i])).sum();
        let den: f64 = lambda * lambda * (0..n).map(|i| wu[i] * y[i]).sum::<f64>();
        let gnorm = (num.max(0.0) / den.max(f64::MIN_POSITIVE)).sqrt();
        if step % schedule.trace_every.max(1) == 0 {
            trace.push(FlowTraceRow {
                step,
                energy: cur.energy,
                gradient_norm: gnorm,
                multiplier: lambda,
            });
        }
        let converged = gnorm <= schedule.tol || floor_hit;
        if converged || step >= schedule.max_steps {
            if trace.last().map(|t| t.step) != Some(step) {
                trace.push(FlowTraceRow {
                    step,
                    energy: cur.energy,
                    gradient_norm: gnorm,
                    multiplier: lambda,
                });
            }
            if !converged {
                return Err(Error::NoConvergence {
                    what: "normalized gradient flow".into(),
                    iterations: step,
                });
            }
            let mut vals = u.clone();
            vals.push(0.0);
            let field = RadialField::from_samples(params.dim, nodes, vals, None)?;
            return Ok(FlowState {
                u: field,
                mass: disc.mass(&u),
                energy: cur.energy,
                multiplier_estimate: lambda,
                gradient_norm_on_sphere: gnorm,
                step,
                converged,
                termination: if gnorm <= schedule.tol { Termination::Tolerance } else { Termination::RoundoffFloor },
                trace,
                max_mass_defect,
            });
        }

        // preconditioned direction, tangent to the sphere in the W inner product
        let beta = disc.dot_w(&u, &x) / disc.dot_w(&u, &y);
        let dir: Vec<f64> = (0..n).map(|i| x[i] - beta * y[i]).collect();

        if let Some((u_old, g_old)) = &prev {
            let s: Vec<f64> = (0..n).map(|i| u[i] - u_old[i]).collect();
            let ds: Vec<f64> = (0..n).map(|i| g_proj[i] - g_old[i]).collect();
            let sy: f64 = s.iter().zip(&ds).map(|(a, b)| a * b).sum();
            let ks = disc.stiffness_apply(&s);
            let sps: f64 = (0..n).map(|i| s[i] * (s_coef * ks[i] + sigma * disc.w[i] * s[i])).sum();
            tau = if sy > 0.0 && sps > 0.0 { (sps / sy).clamp(1e-6, 1e3) } else { schedule.initial_step };
        }

        let slope: f64 = (0..n).map(|i| g_proj[i] * dir[i]).sum();
        if tau * slope <= disc.resolution(&u) {
            floor_hit = true;
            continue;
        }
        let mut accepted = None;
        let mut t = tau;
        for _ in 0..=schedule.max_halvings {
            let mut trial: Vec<f64> = (0..n).map(|i| u[i] - t * dir[i]).collect();
            disc.normalize(&mut trial, c2);
            let de = disc.energy_change(&u, &trial);
            if de.is_finite() && de <= -1e-4 * t * slope {
                accepted = Some(trial);
                break;
            }
            t *= 0.5;
        }
        step += 1;
        match accepted {
            Some(next) => {
                failures = 0;
                let defect = (disc.mass(&next) - c2).abs() / c2;
                max_mass_defect = max_mass_defect.max(defect);
                prev = Some((std::mem::replace(&mut u, next), g_proj));
                cur = disc.eval(&u);
                if !cur.energy.is_finite() {
                    return Err(Error::NonFinite("flow energy".into()));
                }
            }
            None => {
                failures += 1;
                prev = None;
                tau = schedule.initial_step;
                if failures >= schedule.divergence_window {
                    return Err(Error::Diverged {
                        step,
                        reason: format!("{failures} consecutive line searches failed to decrease the energy"),
                    });
                }
            }
        }
    }
}

/// Gaussian `e^{-α r²}` of mass `c²` on `[0, r_max]`.
pub fn gaussian_initial(dim: u32, c: f64, alpha: f64, r_max: f64, intervals: usize) -> Result<RadialField> {
    let g = RadialField::sample(dim, r_max, intervals, |r| (-alpha * r * r).exp())?;
    let m = g.norms(2.0)?.l2sq;
    Ok(g.scaled(c / m.sqrt()))
}

/// Gaussian start whose kinetic ratio matches the upper branch, on a grid
/// wide enough for that branch's profile.
pub fn default_initial(params: &ProblemParams, intervals: usize) -> Result<RadialField> {
    let branches = solve(params)?;
    let upper = branches
        .iter()
        .find(|b| b.branch == Branch::Upper)
        .or_else(|| branches.last())
        .ok_or(Error::NoSolution("no limit branch to size the flow grid".into()))?;
    let qp = qp_profile(params.dim, params.p)?;
    let scale = params.c / upper.dsq.sqrt();
    let r_max = qp.grid.r_max() * scale;
    let alpha = upper.dsq / (params.dim as f64 * params.c * params.c);
    gaussian_initial(params.dim, params.c, alpha, r_max, intervals)
}
