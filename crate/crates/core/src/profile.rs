//! Ground states of `-ΔW + W = W^{p-1}` by radial shooting, the rescaled
//! Gagliardo-Nirenberg optimizer `Q_p`, and its norms.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{OnceLock, RwLock};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::{abs_pow, radial_laplacian, RadialField};
use crate::regimes::{sobolev_exponent, MAX_DIM};
use crate::report::{fmt_num, write_csv};

/// Controls for [`shoot_ground_state`].
///
/// The integrator is classical RK4 with a fixed step; `step` is an upper
/// bound, the actual step divides the output grid spacing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShootingConfig {
    /// Bracket for `W(0)`: `(undershoot, overshoot)`. Found by doubling from
    /// 1 when absent.
    pub height_bracket: Option<(f64, f64)>,
    /// Truncation radius; chosen from `decay_tol` when absent.
    pub r_max: Option<f64>,
    /// Largest RK4 step.
    pub step: f64,
    /// `W(r_max) < decay_tol * W(0)`.
    pub decay_tol: f64,
    /// Switch to the linearized tail once `W < match_tol * W(0)`.
    pub match_tol: f64,
    /// Output grid cells.
    pub intervals: usize,
    /// Bisection cap.
    pub max_iterations: usize,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        ShootingConfig {
            height_bracket: None,
            r_max: None,
            step: 1.0 / 4096.0,
            decay_tol: 1e-10,
            match_tol: 1e-6,
            intervals: 4096,
            max_iterations: 200,
        }
    }
}

/// A sampled standard ground state.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub dim: u32,
    pub p: f64,
    /// `W(0)`.
    pub height: f64,
    /// Radius where the integrated solution hands over to the decaying tail
    /// (`r_max` for closed forms).
    pub match_radius: f64,
    pub field: RadialField,
}

/// `Q_p` together with its three norms.
#[derive(Debug, Clone)]
pub struct QpProfile {
    pub dim: u32,
    pub p: f64,
    pub grid: RadialField,
    pub l2sq: f64,
    pub gradl2sq: f64,
    pub lpp: f64,
}

impl QpProfile {
    pub fn l2_norm(&self) -> f64 {
        self.l2sq.sqrt()
    }

    /// Largest relative deviation among the three norms
    /// `‖Q‖₂² = ‖∇Q‖₂² = (2/p)‖Q‖_p^p`.
    pub fn identity_defect(&self) -> f64 {
        let m = self.l2sq;
        let g = self.gradl2sq;
        let l = 2.0 / self.p * self.lpp;
        [(m - g).abs(), (m - l).abs(), (g - l).abs()]
            .into_iter()
            .fold(0.0, f64::max)
            / m
    }

    /// Max-norm residual of `-AΔQ + BQ - Q^{p-1}` at interior nodes.
    pub fn ode_residual(&self) -> f64 {
        let (a, b) = qp_coefficients(self.dim, self.p);
        let u = self.grid.values();
        radial_laplacian(u, self.grid.step(), self.dim)
            .into_iter()
            .zip(u)
            .map(|(lap, &q)| (-a * lap + b * q - abs_pow(q, self.p - 1.0)).abs())
            .fold(0.0, f64::max)
    }

    /// CSV dump of `(r, Q_p(r))`.
    pub fn write_csv<W: Write>(&self, out: W, cfg: &ShootingConfig) -> Result<()> {
        let meta = [
            ("N", self.dim.to_string()),
            ("p", fmt_num(self.p)),
            ("rMax", fmt_num(self.grid.r_max())),
            ("decayTol", fmt_num(cfg.decay_tol)),
            ("matchTol", fmt_num(cfg.match_tol)),
            ("step", fmt_num(cfg.step)),
        ];
        write_csv(
            out,
            &meta,
            &["r", "Q_p"],
            self.grid.rows().map(|(r, q)| vec![fmt_num(r), fmt_num(q)]),
        )
    }
}

fn check_exponent(dim: u32, p: f64) -> Result<()> {
    if dim == 0 || dim > MAX_DIM {
        return Err(Error::inadmissible("N", format!("profiles need 1 <= N <= {MAX_DIM}, got {dim}")));
    }
    let crit = sobolev_exponent(dim);
    if !(p.is_finite() && p > 2.0 && p < crit) {
        return Err(Error::inadmissible(
            "p",
            format!("profiles need 2 < p < {crit}, got {p}"),
        ));
    }
    Ok(())
}

/// Coefficients `(A, B)` of `-AΔQ + BQ = Q^{p-1}`.
pub fn qp_coefficients(dim: u32, p: f64) -> (f64, f64) {
    let n = dim as f64;
    (n * (p - 2.0) / 4.0, (2.0 * n - p * (n - 2.0)) / 4.0)
}

/// One-dimensional closed form `((p/2) sech²((p-2)x/2))^{1/(p-2)}`.
pub fn closed_form_1d(p: f64, x: f64) -> f64 {
    let y = 0.5 * (p - 2.0) * x.abs();
    // sech² y = 4 e^{-2y} / (1 + e^{-2y})²
    let e = (-2.0 * y).exp();
    let sech2 = 4.0 * e / ((1.0 + e) * (1.0 + e));
    (0.5 * p * sech2).powf(1.0 / (p - 2.0))
}

/// The standard ground state: closed form for `N = 1`, shooting otherwise.
pub fn standard_ground_state(dim: u32, p: f64, cfg: &ShootingConfig) -> Result<GroundState> {
    check_exponent(dim, p)?;
    if dim != 1 {
        return shoot_ground_state(dim, p, cfg);
    }
    let r_max = cfg.r_max.unwrap_or_else(|| {
        // sech(y)^{2/(p-2)} = decay_tol
        let s = cfg.decay_tol.powf((p - 2.0) / 2.0);
        2.0 * (1.0 / s).acosh() / (p - 2.0)
    });
    let field = RadialField::sample_with_derivative(
        1,
        r_max,
        cfg.intervals,
        |r| closed_form_1d(p, r),
        |r| -closed_form_1d(p, r) * (0.5 * (p - 2.0) * r).tanh(),
    )?;
    Ok(GroundState {
        dim,
        p,
        height: closed_form_1d(p, 0.0),
        match_radius: r_max,
        field,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Outcome {
    /// `W` crossed zero: initial height too large.
    Overshoot,
    /// `W` turned upward (or stalled): too small.
    Undershoot,
}

struct Shooter {
    dim: f64,
    p: f64,
}

impl Shooter {
    #[inline]
    fn rhs(&self, r: f64, w: f64, v: f64) -> (f64, f64) {
        let nl = w - abs_pow(w, self.p - 2.0) * w;
        if r == 0.0 {
            (v, nl / self.dim)
        } else {
            (v, nl - (self.dim - 1.0) / r * v)
        }
    }

    #[inline]
    fn rk4(&self, r: f64, w: f64, v: f64, dt: f64) -> (f64, f64) {
        let (k1w, k1v) = self.rhs(r, w, v);
        let (k2w, k2v) = self.rhs(r + 0.5 * dt, w + 0.5 * dt * k1w, v + 0.5 * dt * k1v);
        let (k3w, k3v) = self.rhs(r + 0.5 * dt, w + 0.5 * dt * k2w, v + 0.5 * dt * k2v);
        let (k4w, k4v) = self.rhs(r + dt, w + dt * k3w, v + dt * k3v);
        (
            w + dt / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w),
            v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
        )
    }

    /// Integrates from `r = 0` until an event or `r_end`, calling `visit`
    /// after every step with `(step index, w, v)`.
    fn run(&self, w0: f64, dt: f64, r_end: f64, mut visit: impl FnMut(usize, f64, f64)) -> Outcome {
        let (mut w, mut v) = (w0, 0.0);
        let steps = (r_end / dt).ceil() as usize;
        for k in 0..steps {
            let r = k as f64 * dt;
            (w, v) = self.rk4(r, w, v, dt);
            if !(w > 0.0) {
                return Outcome::Overshoot;
            }
            if v > 0.0 || !w.is_finite() {
                return Outcome::Undershoot;
            }
            visit(k + 1, w, v);
        }
        Outcome::Undershoot
    }

    fn classify(&self, w0: f64, dt: f64) -> Outcome {
        self.run(w0, dt, SHOOT_HORIZON, |_, _, _| {})
    }

    fn bisect(&self, mut lo: f64, mut hi: f64, dt: f64, cap: usize) -> Result<(f64, f64)> {
        for _ in 0..cap {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                return Ok((lo, hi));
            }
            match self.classify(mid, dt) {
                Outcome::Overshoot => hi = mid,
                Outcome::Undershoot => lo = mid,
            }
        }
        if (hi - lo) <= 1e-13 * hi {
            Ok((lo, hi))
        } else {
            Err(Error::NoConvergence {
                what: "ground-state height bisection".into(),
                iterations: cap,
            })
        }
    }

    fn bracket(&self, cfg: &ShootingConfig, dt: f64) -> Result<(f64, f64)> {
        if let Some((lo, hi)) = cfg.height_bracket {
            if self.classify(lo, dt) != Outcome::Undershoot || self.classify(hi, dt) != Outcome::Overshoot {
                return Err(Error::BracketExhausted(format!(
                    "height bracket ({lo}, {hi}) does not straddle the ground state"
                )));
            }
            return Ok((lo, hi));
        }
        let mut lo = 1.0;
        let mut hi = 2.0;
        for _ in 0..64 {
            match self.classify(hi, dt) {
                Outcome::Overshoot => return Ok((lo, hi)),
                Outcome::Undershoot => {
                    lo = hi;
                    hi *= 2.0;
                }
            }
        }
        Err(Error::BracketExhausted("no overshooting height below 2^64".into()))
    }
}

const SHOOT_HORIZON: f64 = 80.0;

/// Scaled Bessel function `e^r K_ν(r)` from its large-argument expansion
/// (exact for half-integer `ν`).
fn bessel_k_scaled(nu: f64, r: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..40 {
        let kf = k as f64;
        let next = term * (mu - (2.0 * kf - 1.0).powi(2)) / (kf * 8.0 * r);
        if next == 0.0 {
            break;
        }
        if next.abs() > term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    (std::f64::consts::PI / (2.0 * r)).sqrt() * sum
}

/// Decaying solution `g(r) = r^{-ν} K_ν(r)`, `ν = (N-2)/2`, of the
/// linearized radial equation, and its derivative `-r^{-ν} K_{ν+1}(r)`;
/// both carry the factor `e^{-r}`.
fn linear_tail(dim: u32, r: f64) -> (f64, f64) {
    let nu = (dim as f64 - 2.0) / 2.0;
    let scale = (-r).exp() * r.powf(-nu);
    (
        scale * bessel_k_scaled(nu, r),
        -scale * bessel_k_scaled(nu + 1.0, r),
    )
}

/// Radial shooting in every dimension (including `N = 1`, for comparison
/// against the closed form).
pub fn shoot_ground_state(dim: u32, p: f64, cfg: &ShootingConfig) -> Result<GroundState> {
    check_exponent(dim, p)?;
    if !(cfg.step > 0.0 && cfg.decay_tol > 0.0 && cfg.match_tol > 0.0 && cfg.intervals >= 4) {
        return Err(Error::inadmissible("shooting", "tolerances and sizes must be positive"));
    }
    let sh = Shooter { dim: dim as f64, p };

    // Pass 1 fixes the truncation radius.
    let (lo, hi) = sh.bracket(cfg, cfg.step)?;
    let (lo, _) = sh.bisect(lo, hi, cfg.step, cfg.max_iterations)?;
    let (r_match, amp) = match_tail(&sh, dim, lo, cfg.step, cfg.match_tol);
    let r_max = match cfg.r_max {
        Some(r) => r,
        None => {
            let target = cfg.decay_tol * lo;
            let mut r = r_match;
            while amp * linear_tail(dim, r).0 > target {
                r += 0.01;
            }
            r
        }
    };

    // Pass 2 repeats the bisection with a step dividing the grid spacing, so
    // the stored samples come from the same discrete trajectory.
    let n = cfg.intervals + cfg.intervals % 2;
    let h = r_max / n as f64;
    let sub = (h / cfg.step).ceil().max(1.0) as usize;
    let dt = h / sub as f64;
    let (lo, hi) = {
        let (l, u) = (lo * (1.0 - 1e-6), lo * (1.0 + 1e-6));
        if cfg.height_bracket.is_none()
            && sh.classify(l, dt) == Outcome::Undershoot
            && sh.classify(u, dt) == Outcome::Overshoot
        {
            (l, u)
        } else {
            sh.bracket(cfg, dt)?
        }
    };
    let (w0, _) = sh.bisect(lo, hi, dt, cfg.max_iterations)?;
    let (r_match, amp) = match_tail(&sh, dim, w0, dt, cfg.match_tol);
    let m = ((r_match / h).floor() as usize).min(n);

    let mut values = vec![0.0; n + 1];
    let mut derivs = vec![0.0; n + 1];
    values[0] = w0;
    sh.run(w0, dt, m as f64 * h + 0.5 * dt, |k, w, v| {
        if k % sub == 0 && k / sub <= m {
            values[k / sub] = w;
            derivs[k / sub] = v;
        }
    });
    let r_m = m as f64 * h;
    let amp = if m > 0 {
        values[m] / linear_tail(dim, r_m).0
    } else {
        amp
    };
    for i in m + 1..=n {
        let (g, dg) = linear_tail(dim, i as f64 * h);
        values[i] = amp * g;
        derivs[i] = amp * dg;
    }
    let nodes = (0..=n).map(|i| i as f64 * h).collect();
    let field = RadialField::from_samples(dim, nodes, values, Some(derivs))?;
    Ok(GroundState {
        dim,
        p,
        height: w0,
        match_radius: r_m,
        field,
    })
}

/// Finds the hand-over radius and the tail amplitude for height `w0`.
fn match_tail(sh: &Shooter, dim: u32, w0: f64, dt: f64, match_tol: f64) -> (f64, f64) {
    let target = match_tol * w0;
    let mut hit: Option<(f64, f64)> = None;
    let mut best = (0.0, w0);
    sh.run(w0, dt, SHOOT_HORIZON, |k, w, _| {
        if hit.is_none() {
            let r = k as f64 * dt;
            if w < best.1 {
                best = (r, w);
            }
            if w <= target {
                hit = Some((r, w));
            }
        }
    });
    let (r, w) = hit.unwrap_or_else(|| {
        // the trajectory turned before reaching the target; back off from
        // its minimum where the unstable mode is still negligible
        let r = (best.0 - 3.0).max(dt);
        (r, f64::NAN)
    });
    let w = if w.is_nan() {
        let mut at = w0;
        let stop = (r / dt).round() as usize;
        sh.run(w0, dt, r + 0.5 * dt, |k, wk, _| {
            if k == stop {
                at = wk;
            }
        });
        at
    } else {
        w
    };
    (r, w / linear_tail(dim, r).0)
}

/// `Q_p(x) = B^{1/(p-2)} W(√(B/A) x)`, carried out on the grid exactly.
pub fn qp_from_standard(w: &GroundState) -> Result<QpProfile> {
    let (dim, p) = (w.dim, w.p);
    let (a, b) = qp_coefficients(dim, p);
    let gamma = (b / a).sqrt();
    let beta = b.powf(1.0 / (p - 2.0));
    let grid = w.field.dilate(gamma)?.scaled(beta * gamma.powf(-(dim as f64) / 2.0));
    let norms = grid.norms(p)?;
    Ok(QpProfile {
        dim,
        p,
        grid,
        l2sq: norms.l2sq,
        gradl2sq: norms.gradl2sq,
        lpp: norms.lpp,
    })
}

/// `Q_p` with default settings.
pub fn qp_profile(dim: u32, p: f64) -> Result<QpProfile> {
    qp_from_standard(&standard_ground_state(dim, p, &ShootingConfig::default())?)
}

/// Sharp constant `C` in `‖u‖_p ≤ C ‖∇u‖₂^κ ‖u‖₂^{1-κ}`, `κ = N(p-2)/(2p)`.
pub fn gn_best_constant(qp: &QpProfile) -> f64 {
    gn_constant_from_norm(qp.p, qp.l2_norm())
}

/// Same constant from `‖Q_p‖₂` alone.
pub fn gn_constant_from_norm(p: f64, q_norm: f64) -> f64 {
    (p / (2.0 * q_norm.powf(p - 2.0))).powf(1.0 / p)
}

/// `‖u‖_p / (‖∇u‖₂^κ ‖u‖₂^{1-κ})`; never exceeds the sharp constant.
pub fn gn_quotient(u: &RadialField, p: f64) -> Result<f64> {
    let n = u.norms(p)?;
    let kappa = u.dim() as f64 * (p - 2.0) / (2.0 * p);
    Ok(n.lpp.powf(1.0 / p) / (n.gradl2sq.sqrt().powf(kappa) * n.l2sq.sqrt().powf(1.0 - kappa)))
}

type NormCache = RwLock<HashMap<(u32, u64), f64>>;

fn cache() -> &'static NormCache {
    static CACHE: OnceLock<NormCache> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// `‖Q_p‖₂`, memoized per `(N, p)`.
pub fn qp_l2_norm(dim: u32, p: f64) -> Result<f64> {
    check_exponent(dim, p)?;
    let key = (dim, p.to_bits());
    if let Some(v) = cache().read().expect("norm cache poisoned").get(&key) {
        return Ok(*v);
    }
    let norm = qp_profile(dim, p)?.l2_norm();
    cache().write().expect("norm cache poisoned").insert(key, norm);
    Ok(norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn closed_form_solves_the_ode() {
        for &p in &[3.0, 6.0, 8.0] {
            let h = 1e-3;
            for k in 1..40 {
                let x = 0.1 * k as f64;
                let w = |x| closed_form_1d(p, x);
                let d2 = (w(x + h) - 2.0 * w(x) + w(x - h)) / (h * h);
                let res = -d2 + w(x) - w(x).powf(p - 1.0);
                assert!(res.abs() < 1e-5 * w(0.0), "p={p} x={x} res={res}");
            }
        }
        // p = 6 and p = 8 reduce to the stated forms
        let x: f64 = 0.37;
        let s6 = 1.0 / (2.0 * x).cosh();
        assert!((closed_form_1d(6.0, x) - (3.0 * s6 * s6).powf(0.25)).abs() < 1e-15);
        let s8 = 1.0 / (3.0 * x).cosh();
        assert!((closed_form_1d(8.0, x) - (4.0 * s8 * s8).powf(1.0 / 6.0)).abs() < 1e-15);
    }

    #[test]
    fn one_dim_mass_matches_antiderivative() {
        let w = standard_ground_state(1, 6.0, &ShootingConfig::default()).unwrap();
        let mass = w.field.norms(6.0).unwrap().l2sq;
        let exact = 3f64.sqrt() * PI / 2.0;
        assert!((mass - exact).abs() < 1e-8 * exact, "{mass} vs {exact}");
    }

    #[test]
    fn shooting_reproduces_closed_form() {
        let cfg = ShootingConfig::default();
        let shot = shoot_ground_state(1, 6.0, &cfg).unwrap();
        let err = shot
            .field
            .rows()
            .map(|(r, w)| (w - closed_form_1d(6.0, r)).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "max error {err}");
    }

    #[test]
    fn cubic_height_in_three_dimensions() {
        let w = shoot_ground_state(3, 4.0, &ShootingConfig::default()).unwrap();
        assert!(w.height > 4.3 && w.height < 4.4, "W(0) = {}", w.height);
        let vals = w.field.values();
        assert!(vals.windows(2).all(|p| p[1] < p[0] && p[1] > 0.0));
        assert!(*vals.last().unwrap() < 1.01e-10 * vals[0]);
    }

    #[test]
    fn rescaling_satisfies_norm_identities() {
        for &(n, p) in &[(1, 8.0), (2, 5.0), (3, 4.0), (3, 14.0 / 3.0)] {
            let q = qp_profile(n, p).unwrap();
            assert!(q.identity_defect() < 1e-6, "N={n} p={p}: {}", q.identity_defect());
        }
    }

    #[test]
    fn ode_residual_is_fourth_order_truncation() {
        for &(n, p) in &[(3, 5.0), (2, 5.0)] {
            let res = |intervals| {
                let cfg = ShootingConfig { intervals, ..Default::default() };
                let q = qp_from_standard(&standard_ground_state(n, p, &cfg).unwrap()).unwrap();
                q.ode_residual() / q.grid.values()[0].powf(p - 1.0)
            };
            let (coarse, fine) = (res(4096), res(8192));
            assert!(fine < 1e-6, "N={n} p={p}: {fine}");
            assert!(coarse / fine > 8.0, "N={n} p={p}: order {}", (coarse / fine).log2());
        }
    }

    #[test]
    fn one_dim_rescaling_example() {
        let w = standard_ground_state(1, 8.0, &ShootingConfig::default()).unwrap();
        let q = qp_from_standard(&w).unwrap();
        let x: f64 = 0.4;
        let expect = (2.5f64).powf(1.0 / 6.0) * closed_form_1d(8.0, (5.0f64 / 3.0).sqrt() * x);
        assert!((q.grid.eval(x) - expect).abs() < 1e-9);
        let (a, b) = qp_coefficients(1, 8.0);
        let predicted = b.powf(2.0 / 6.0) * (b / a).powf(-0.5) * w.field.norms(8.0).unwrap().l2sq;
        assert!((q.l2sq - predicted).abs() < 1e-12 * predicted);
    }

    #[test]
    fn equality_in_gn_at_the_optimizer() {
        let q = qp_profile(3, 4.0).unwrap();
        let c = gn_best_constant(&q);
        let ratio = gn_quotient(&q.grid, 4.0).unwrap();
        assert!((ratio - c).abs() < 1e-7 * c);
        let gauss = RadialField::sample(3, 12.0, 4096, |r| (-r * r).exp()).unwrap();
        assert!(gn_quotient(&gauss, 4.0).unwrap() < c);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(qp_profile(3, 6.0).is_err());
        assert!(qp_profile(3, 2.0).is_err());
        assert!(qp_profile(5, 3.0).is_err());
    }

    #[test]
    fn memoized_norm_is_stable() {
        let a = qp_l2_norm(2, 4.5).unwrap();
        let b = qp_l2_norm(2, 4.5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bessel_tail_is_exact_for_half_integers() {
        let (g, dg) = linear_tail(3, 5.0);
        let exact = (PI / 2.0).sqrt() * (-5.0f64).exp() / 5.0;
        assert!((g - exact).abs() < 1e-15 * exact);
        // d/dr e^{-r}/r = -e^{-r}(1/r + 1/r²)
        let dexact = -(PI / 2.0).sqrt() * (-5.0f64).exp() * (0.2 + 0.04);
        assert!((dg - dexact).abs() < 1e-14 * dexact.abs());
    }
}
