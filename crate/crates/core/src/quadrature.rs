//! Radially symmetric fields sampled on a uniform grid, their norms, the
//! energy functional, the dilation action and finite-difference residuals.

use std::borrow::Cow;
use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::potential::PotentialSpec;
use crate::regimes::Model;

/// Surface measure of the unit sphere in `R^N` (`2` for `N = 1`, which
/// doubles the half-line integral).
pub fn sphere_area(dim: u32) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        4 => 2.0 * PI * PI,
        n => {
            // 2 π^{n/2} / Γ(n/2) by the recursion |S^{n-1}| = 2π/(n-2) |S^{n-3}|
            2.0 * PI / (n as f64 - 2.0) * sphere_area(n - 2)
        }
    }
}

/// Volume of the ball of radius `r` in `R^N`.
pub fn ball_volume(dim: u32, r: f64) -> f64 {
    sphere_area(dim) * r.powi(dim as i32) / dim as f64
}

/// 8-point Gauss-Legendre rule on [-1, 1].
const GL_X: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_W: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

/// Gauss-Legendre on `[lo, hi]`.
pub fn gauss_legendre(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    GL_X.iter()
        .zip(GL_W.iter())
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// `∫_{|x| < r_max} f(|x|) dx` for a radial integrand that may be singular
/// (but integrable) at the origin or have jumps at `breakpoints`.
///
/// Panels are geometrically graded towards zero and uniform elsewhere.
pub fn integrate_radial(dim: u32, r_max: f64, breakpoints: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let mut cuts: Vec<f64> = Vec::with_capacity(256);
    let first = r_max.min(1.0) / 64.0;
    let mut x = first;
    while x > 1e-14 * first {
        cuts.push(x);
        x *= 0.5;
    }
    let panels = 512usize;
    for k in 1..=panels {
        let r = first + (r_max - first) * k as f64 / panels as f64;
        cuts.push(r);
    }
    cuts.extend(breakpoints.iter().copied().filter(|&b| b > 0.0 && b < r_max));
    cuts.push(0.0);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let n1 = dim as i32 - 1;
    let area = sphere_area(dim);
    cuts.windows(2)
        .map(|w| gauss_legendre(w[0], w[1], |r| f(r) * r.powi(n1)))
        .sum::<f64>()
        * area
}

/// The three quadratic/power norms used throughout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Norms {
    /// `‖u‖₂²`
    pub l2sq: f64,
    /// `‖∇u‖₂²`
    pub gradl2sq: f64,
    /// `‖u‖_p^p`
    pub lpp: f64,
}

/// Components of `I(u)`; `potential` is zero for the limit functional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FunctionalValue {
    pub kinetic: f64,
    pub kirchhoff: f64,
    pub potential: f64,
    pub nonlinear: f64,
    pub total: f64,
}

/// A radial function sampled on `r_i = i h`, `i = 0..=n` with `n` even.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    dim: u32,
    step: f64,
    nodes: Vec<f64>,
    values: Vec<f64>,
    derivs: Option<Vec<f64>>,
    weights: Vec<f64>,
}

fn simpson_weights(dim: u32, step: f64, nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len() - 1;
    let area = sphere_area(dim);
    let n1 = dim as i32 - 1;
    nodes
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let coef = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let jac = if n1 == 0 { 1.0 } else { r.powi(n1) };
            coef * step / 3.0 * area * jac
        })
        .collect()
}

impl RadialField {
    /// Samples `f` on `[0, r_max]` with `intervals` (rounded up to even)
    /// uniform cells.
    pub fn sample(dim: u32, r_max: f64, intervals: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let n = intervals.max(4);
        let n = n + n % 2;
        let step = r_max / n as f64;
        let nodes: Vec<f64> = (0..=n).map(|i| i as f64 * step).collect();
        let values = nodes.iter().map(|&r| f(r)).collect();
        Self::from_parts(dim, step, nodes, values, None)
    }

    /// Like [`RadialField::sample`] but with an exact derivative.
    pub fn sample_with_derivative(
        dim: u32,
        r_max: f64,
        intervals: usize,
        f: impl Fn(f64) -> f64,
        df: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let mut field = Self::sample(dim, r_max, intervals, f)?;
        field.derivs = Some(field.nodes.iter().map(|&r| df(r)).collect());
        field.check_finite()?;
        Ok(field)
    }

    /// Builds a field from raw samples on a uniform grid starting at 0.
    pub fn from_samples(
        dim: u32,
        nodes: Vec<f64>,
        values: Vec<f64>,
        derivs: Option<Vec<f64>>,
    ) -> Result<Self> {
        if nodes.len() < 5 || nodes.len().is_multiple_of(2) {
            return Err(Error::GridTooCoarse(format!(
                "need an odd number (>= 5) of nodes, got {}",
                nodes.len()
            )));
        }
        if nodes[0] != 0.0 {
            return Err(Error::inadmissible("nodes", "first node must be r = 0"));
        }
        let step = nodes[1] - nodes[0];
        if !(step > 0.0) {
            return Err(Error::inadmissible("nodes", "must be strictly increasing"));
        }
        for (i, w) in nodes.windows(2).enumerate() {
            if ((w[1] - w[0]) - step).abs() > 1e-9 * step.max(w[1].abs() * 1e-7) {
                return Err(Error::inadmissible(
                    "nodes",
                    format!("grid must be uniform (deviation at node {i})"),
                ));
            }
        }
        Self::from_parts(dim, step, nodes, values, derivs)
    }

    fn from_parts(
        dim: u32,
        step: f64,
        nodes: Vec<f64>,
        values: Vec<f64>,
        derivs: Option<Vec<f64>>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::inadmissible("N", "dimension must be positive"));
        }
        if values.len() != nodes.len() || derivs.as_ref().is_some_and(|d| d.len() != nodes.len()) {
            return Err(Error::inadmissible("values", "length must match nodes"));
        }
        let weights = simpson_weights(dim, step, &nodes);
        let field = RadialField {
            dim,
            step,
            nodes,
            values,
            derivs,
            weights,
        };
        field.check_finite()?;
        Ok(field)
    }

    fn check_finite(&self) -> Result<()> {
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field samples".into()));
        }
        if let Some(d) = &self.derivs {
            if d.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("field derivative samples".into()));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }
    pub fn step(&self) -> f64 {
        self.step
    }
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn r_max(&self) -> f64 {
        *self.nodes.last().unwrap()
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn has_exact_derivative(&self) -> bool {
        self.derivs.is_some()
    }

    /// Returns a copy with every sample (and derivative) multiplied by `s`.
    pub fn scaled(&self, s: f64) -> RadialField {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        if let Some(d) = out.derivs.as_mut() {
            d.iter_mut().for_each(|v| *v *= s);
        }
        out
    }

    /// Drops the stored derivative so that finite differences are used.
    pub fn without_derivative(&self) -> RadialField {
        let mut out = self.clone();
        out.derivs = None;
        out
    }

    /// `u'(r_i)`: stored when available, otherwise fourth-order centred
    /// differences (even reflection at `r = 0`, one-sided at `r_max`).
    pub fn derivatives(&self) -> Cow<'_, [f64]> {
        if let Some(d) = &self.derivs {
            return Cow::Borrowed(d);
        }
        let u = &self.values;
        let n = u.len() - 1;
        let h = self.step;
        let at = |i: isize| -> f64 {
            if i < 0 {
                u[(-i) as usize]
            } else {
                u[i as usize]
            }
        };
        let mut d = vec![0.0; n + 1];
        for (i, di) in d.iter_mut().enumerate() {
            let ii = i as isize;
            *di = if i + 2 <= n {
                (at(ii - 2) - 8.0 * at(ii - 1) + 8.0 * at(ii + 1) - at(ii + 2)) / (12.0 * h)
            } else {
                // one-sided, fourth order
                let k = i;
                (25.0 * u[k] - 48.0 * u[k - 1] + 36.0 * u[k - 2] - 16.0 * u[k - 3] + 3.0 * u[k - 4])
                    / (12.0 * h)
            };
        }
        d[0] = 0.0;
        Cow::Owned(d)
    }

    /// Cubic Hermite interpolation; zero beyond the last node.
    pub fn eval(&self, r: f64) -> f64 {
        let r = r.abs();
        let n = self.nodes.len() - 1;
        if r > self.nodes[n] {
            return 0.0;
        }
        let d = self.derivatives();
        let i = ((r / self.step) as usize).min(n - 1);
        hermite(
            self.step,
            r - self.nodes[i],
            self.values[i],
            self.values[i + 1],
            d[i],
            d[i + 1],
        )
        .0
    }

    /// Resamples onto a new uniform grid `[0, r_max]` with `intervals` cells.
    pub fn resample(&self, r_max: f64, intervals: usize) -> Result<RadialField> {
        let d = self.derivatives().into_owned();
        let n = self.nodes.len() - 1;
        let interp = |r: f64| -> (f64, f64) {
            if r > self.nodes[n] {
                return (0.0, 0.0);
            }
            let i = ((r / self.step) as usize).min(n - 1);
            hermite(
                self.step,
                r - self.nodes[i],
                self.values[i],
                self.values[i + 1],
                d[i],
                d[i + 1],
            )
        };
        RadialField::sample_with_derivative(
            self.dim,
            r_max,
            intervals,
            |r| interp(r).0,
            |r| interp(r).1,
        )
    }

    /// `∫ u²`, `∫ |∇u|²` and `∫ |u|^p` by composite Simpson.
    pub fn norms(&self, p: f64) -> Result<Norms> {
        self.check_finite()?;
        let d = self.derivatives();
        let mut l2sq = 0.0;
        let mut gradl2sq = 0.0;
        let mut lpp = 0.0;
        for i in 0..self.nodes.len() {
            let w = self.weights[i];
            let u = self.values[i];
            l2sq += w * u * u;
            gradl2sq += w * d[i] * d[i];
            lpp += w * abs_pow(u, p);
        }
        Ok(Norms {
            l2sq,
            gradl2sq,
            lpp,
        })
    }

    /// `h ⋆ u = h^{N/2} u(h ·)`, carried exactly by rescaling the grid.
    pub fn dilate(&self, h: f64) -> Result<RadialField> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::inadmissible("h", format!("dilation must be positive, got {h}")));
        }
        let amp = h.powf(self.dim as f64 / 2.0);
        let step = self.step / h;
        let nodes: Vec<f64> = (0..self.nodes.len()).map(|i| i as f64 * step).collect();
        let values = self.values.iter().map(|v| amp * v).collect();
        let derivs = self.derivatives().iter().map(|v| amp * h * v).collect();
        Self::from_parts(self.dim, step, nodes, values, Some(derivs))
    }

    /// `∫ g(r, u(r), u'(r)) dx` cell by cell with Hermite reconstruction.
    /// Cells are split at `breaks` so that piecewise data stays exact.
    pub fn integrate_cells(&self, breaks: &[f64], g: impl Fn(f64, f64, f64) -> f64) -> f64 {
        let d = self.derivatives();
        let n = self.nodes.len() - 1;
        let n1 = self.dim as i32 - 1;
        let mut total = 0.0;
        for i in 0..n {
            let lo = self.nodes[i];
            let hi = self.nodes[i + 1];
            let (u0, u1, d0, d1) = (self.values[i], self.values[i + 1], d[i], d[i + 1]);
            if u0 == 0.0 && u1 == 0.0 && d0 == 0.0 && d1 == 0.0 {
                continue;
            }
            let mut pieces = vec![lo];
            pieces.extend(breaks.iter().copied().filter(|&b| b > lo && b < hi));
            pieces.push(hi);
            for w in pieces.windows(2) {
                total += gauss_legendre(w[0], w[1], |r| {
                    let (u, du) = hermite(self.step, r - lo, u0, u1, d0, d1);
                    g(r, u, du) * r.powi(n1)
                });
            }
        }
        total * sphere_area(self.dim)
    }

    /// `∫ V u²`, with `V` integrated against the interpolant cell by cell.
    pub fn potential_integral(&self, v: &PotentialSpec) -> f64 {
        self.integrate_cells(&v.breakpoints(), |r, u, _| v.value(r) * u * u)
    }

    /// `I(u)` for the model, `I_∞(u)` when `v` is `None`.
    pub fn evaluate_functional(&self, model: &Model, v: Option<&PotentialSpec>) -> Result<FunctionalValue> {
        let norms = self.norms(model.p)?;
        let potential = v.map_or(0.0, |v| 0.5 * self.potential_integral(v));
        Ok(functional_from_norms(model, &norms, potential))
    }

    /// Finite-difference residual of
    /// `-(a + b‖∇u‖²)Δu + (V + λ)u - |u|^{p-2}u`, on this grid and on the
    /// grid with every other node. Nodes where `V` is infinite are skipped.
    pub fn pde_residual(
        &self,
        model: &Model,
        lambda: f64,
        v: Option<&PotentialSpec>,
    ) -> Result<PdeResidual> {
        let norms = self.norms(model.p)?;
        let coef = model.a + model.b * norms.gradl2sq;
        let fine = residual_profile(self, 1, coef, lambda, model.p, v);
        let coarse = residual_profile(self, 2, coef, lambda, model.p, v);
        // compare on the shared (even) nodes
        let fine_shared = fine
            .iter()
            .step_by(2)
            .fold(0.0f64, |m, &x| m.max(x.abs()));
        let coarse_max = coarse.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        let fine_max = fine.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        let max_u = self.values.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        Ok(PdeResidual {
            max_abs: fine_max,
            max_abs_shared: fine_shared,
            coarse_max_abs: coarse_max,
            discretization_estimate: coarse_max / 3.0,
            observed_order: if fine_shared > 0.0 && coarse_max > 0.0 {
                (coarse_max / fine_shared).log2()
            } else {
                f64::NAN
            },
            scale: max_u.powf(model.p - 1.0),
        })
    }

    /// `(r, u(r))` rows.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.values.iter().copied())
    }
}

/// Max-norm PDE residual on two nested grids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PdeResidual {
    /// Over all interior nodes of the grid.
    pub max_abs: f64,
    /// Over the nodes shared with the coarse grid.
    pub max_abs_shared: f64,
    /// Same operator with step `2h`.
    pub coarse_max_abs: f64,
    /// `R_{2h}/3`: what the residual at step `h` can be if it is truncation
    /// error of order two or higher.
    pub discretization_estimate: f64,
    /// `log2(R_{2h}/R_h)`; near the stencil order when the residual is
    /// truncation error.
    pub observed_order: f64,
    /// `max|u|^{p-1}`, the natural size of the nonlinear term.
    pub scale: f64,
}

impl PdeResidual {
    /// True when the residual is explained by discretization alone.
    pub fn within_discretization(&self) -> bool {
        self.max_abs_shared <= self.discretization_estimate
    }
}

/// Radial Laplacian `u'' + (N-1)/r u'` at nodes `0..n-1` by fourth-order
/// centred differences, with even reflection at `r = 0` (where it equals
/// `N u''(0)`) and second order at the last interior node.
pub fn radial_laplacian(vals: &[f64], h: f64, dim: u32) -> Vec<f64> {
    let n = vals.len() - 1;
    let dim = dim as f64;
    let at = |i: isize| vals[i.unsigned_abs()];
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let ii = i as isize;
        let r = i as f64 * h;
        let lap = if i == 0 {
            dim * (-2.0 * at(2) + 32.0 * at(1) - 30.0 * at(0)) / (12.0 * h * h)
        } else if i + 2 <= n {
            let d2 = (-at(ii + 2) + 16.0 * at(ii + 1) - 30.0 * at(ii) + 16.0 * at(ii - 1) - at(ii - 2))
                / (12.0 * h * h);
            let d1 = (-at(ii + 2) + 8.0 * at(ii + 1) - 8.0 * at(ii - 1) + at(ii - 2)) / (12.0 * h);
            d2 + (dim - 1.0) / r * d1
        } else {
            let d2 = (vals[i + 1] - 2.0 * vals[i] + vals[i - 1]) / (h * h);
            let d1 = (vals[i + 1] - vals[i - 1]) / (2.0 * h);
            d2 + (dim - 1.0) / r * d1
        };
        out.push(lap);
    }
    out
}

fn residual_profile(
    u: &RadialField,
    stride: usize,
    coef: f64,
    lambda: f64,
    p: f64,
    v: Option<&PotentialSpec>,
) -> Vec<f64> {
    let vals: Vec<f64> = u.values.iter().copied().step_by(stride).collect();
    let h = u.step * stride as f64;
    radial_laplacian(&vals, h, u.dim)
        .into_iter()
        .enumerate()
        .map(|(i, lap)| {
            let pot = v.map_or(0.0, |v| v.value(i as f64 * h));
            if !pot.is_finite() {
                // singular node, excluded
                return 0.0;
            }
            let ui = vals[i];
            -coef * lap + (pot + lambda) * ui - abs_pow(ui, p - 2.0) * ui
        })
        .collect()
}

/// Assembles `I` from precomputed norms.
pub fn functional_from_norms(model: &Model, norms: &Norms, potential: f64) -> FunctionalValue {
    let kinetic = 0.5 * model.a * norms.gradl2sq;
    let kirchhoff = 0.25 * model.b * norms.gradl2sq * norms.gradl2sq;
    let nonlinear = norms.lpp / model.p;
    FunctionalValue {
        kinetic,
        kirchhoff,
        potential,
        nonlinear,
        total: kinetic + kirchhoff + potential - nonlinear,
    }
}

/// `|u|^p` through `exp(p ln|u|)`, zero at zero.
#[inline]
pub fn abs_pow(u: f64, p: f64) -> f64 {
    let a = u.abs();
    if a == 0.0 {
        0.0
    } else {
        (p * a.ln()).exp()
    }
}

/// Cubic Hermite value and slope at offset `s` in a cell of width `h`.
#[inline]
fn hermite(h: f64, s: f64, u0: f64, u1: f64, d0: f64, d1: f64) -> (f64, f64) {
    let t = s / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    let value = h00 * u0 + h10 * h * d0 + h01 * u1 + h11 * h * d1;
    let dh00 = (6.0 * t2 - 6.0 * t) / h;
    let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
    let dh01 = (-6.0 * t2 + 6.0 * t) / h;
    let dh11 = 3.0 * t2 - 2.0 * t;
    let slope = dh00 * u0 + dh10 * d0 + dh01 * u1 + dh11 * d1;
    (value, slope)
}
