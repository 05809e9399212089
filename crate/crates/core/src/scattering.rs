//! Zero-energy scattering for a repulsive radial potential.
//!
//! The scattering function f = 1 - omega solves -2 Delta f + V f = 0 with
//! f -> 1 at infinity. In the radial variable u = r f this becomes the
//! two-point problem u'' = (V/2) u, u(0) = 0, integrated outward and
//! rescaled so that u(r) -> r - a0; the intercept a0 is the scattering
//! length. Outside the support of V, omega(r) = a0 / r exactly, which the
//! truncation machinery uses as an analytic tail.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{fit_power_law, simpson, trapz, UniformGrid};

/// Radial interaction potential V(r) >= 0, compactly supported.
///
/// `values[j] = V(r_j)` on the uniform grid; in the kinetic convention
/// used throughout (energy = -Delta), V carries units of inverse length
/// squared. Analytic families keep their closed form so that off-grid
/// evaluation does not smear discontinuities over a grid cell.
#[derive(Debug, Clone)]
pub struct RadialPotential {
    pub grid: UniformGrid,
    pub values: Vec<f64>,
    pub support_radius: f64,
    form: PotentialForm,
}

#[derive(Debug, Clone)]
enum PotentialForm {
    Table,
    SoftSphere { radius: f64, v0: f64 },
    Gaussian { radius: f64, v0: f64, clip: f64 },
}

impl RadialPotential {
    pub fn new(grid: UniformGrid, values: Vec<f64>, support_radius: f64) -> Result<Self> {
        Self::with_form(grid, values, support_radius, PotentialForm::Table)
    }

    fn with_form(
        grid: UniformGrid,
        values: Vec<f64>,
        support_radius: f64,
        form: PotentialForm,
    ) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "potential table has {} entries for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if support_radius >= grid.r_max {
            return Err(Error::NonIntegrablePotential(format!(
                "support radius {} not inside grid extent {}",
                support_radius, grid.r_max
            )));
        }
        for (j, &v) in values.iter().enumerate() {
            if v < 0.0 {
                return Err(Error::NegativePotential { r: grid.node(j), v });
            }
            if !v.is_finite() {
                return Err(Error::NonIntegrablePotential(format!("V({}) = {}", grid.node(j), v)));
            }
        }
        let mass: f64 = values
            .iter()
            .enumerate()
            .map(|(j, &v)| 4.0 * std::f64::consts::PI * grid.node(j).powi(2) * v * grid.h())
            .sum();
        if !mass.is_finite() {
            return Err(Error::NonIntegrablePotential("integral of 4 pi r^2 V diverges".into()));
        }
        Ok(Self { grid, values, support_radius, form })
    }

    /// Soft sphere V = V0 on r <= radius, 0 outside.
    pub fn soft_sphere(radius: f64, v0: f64, r_max: f64, n_points: usize) -> Result<Self> {
        let grid = UniformGrid::new(r_max, n_points);
        let values = grid.nodes().iter().map(|&r| if r <= radius { v0 } else { 0.0 }).collect();
        Self::with_form(grid, values, radius, PotentialForm::SoftSphere { radius, v0 })
    }

    /// Gaussian bump V = V0 exp(-(r/radius)^2), clipped to zero where it
    /// falls below machine noise; the clip radius is the support radius.
    pub fn gaussian(radius: f64, v0: f64, r_max: f64, n_points: usize) -> Result<Self> {
        let grid = UniformGrid::new(r_max, n_points);
        let clip = radius * 6.0;
        let values = grid
            .nodes()
            .iter()
            .map(|&r| if r <= clip { v0 * (-(r / radius).powi(2)).exp() } else { 0.0 })
            .collect();
        Self::with_form(grid, values, clip, PotentialForm::Gaussian { radius, v0, clip })
    }

    /// Identically zero potential (useful as a degenerate regression anchor).
    pub fn zero(r_max: f64, n_points: usize) -> Result<Self> {
        let grid = UniformGrid::new(r_max, n_points);
        let values = vec![0.0; grid.len()];
        let support = grid.h();
        Self::new(grid, values, support)
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r > self.support_radius || r < 0.0 {
            return 0.0;
        }
        match self.form {
            PotentialForm::SoftSphere { radius, v0 } => {
                if r <= radius {
                    v0
                } else {
                    0.0
                }
            }
            PotentialForm::Gaussian { radius, v0, clip } => {
                if r <= clip {
                    v0 * (-(r / radius).powi(2)).exp()
                } else {
                    0.0
                }
            }
            PotentialForm::Table => {
                let h = self.grid.h();
                let t = r / h;
                let i = (t.floor() as usize).min(self.grid.n - 1);
                let s = t - i as f64;
                (1.0 - s) * self.values[i] + s * self.values[i + 1]
            }
        }
    }
}

/// Zero-energy scattering solution on the potential's grid.
#[derive(Debug, Clone)]
pub struct ScatteringSolution {
    pub grid: UniformGrid,
    /// f on the grid (f = u / r after normalization, f(0) by parity limit).
    pub f_values: Vec<f64>,
    /// omega = 1 - f.
    pub omega_values: Vec<f64>,
    /// u = r f and its derivative, kept for derivative-accurate tails.
    pub u_values: Vec<f64>,
    pub du_values: Vec<f64>,
    pub a0: f64,
    pub fit_window: (f64, f64),
    /// Max pointwise defect of -2 Delta f + V f over the grid.
    pub residual: f64,
    pub support_radius: f64,
}

impl ScatteringSolution {
    /// u(r) by cubic Hermite interpolation of the stored (u, u') pairs;
    /// exact linear tail r - a0 outside the support.
    pub fn u_at(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        if r > self.support_radius {
            return r - self.a0;
        }
        let h = self.grid.h();
        let t = r / h;
        let i = (t.floor() as usize).min(self.grid.n - 1);
        let s = t - i as f64;
        let (u0, u1) = (self.u_values[i], self.u_values[i + 1]);
        let (d0, d1) = (self.du_values[i], self.du_values[i + 1]);
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        h00 * u0 + h10 * h * d0 + h01 * u1 + h11 * h * d1
    }

    /// f(r) = u(r) / r, with the parity limit at the origin.
    pub fn f_at(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return self.du_values[0];
        }
        if r > self.support_radius {
            return 1.0 - self.a0 / r;
        }
        self.u_at(r) / r
    }

    /// omega(r) with the analytic a0/r tail outside the support.
    pub fn omega(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return self.omega_values[0];
        }
        if r > self.support_radius {
            return self.a0 / r;
        }
        let h = self.grid.h();
        let t = r / h;
        let i = (t.floor() as usize).min(self.grid.n - 1);
        let s = t - i as f64;
        (1.0 - s) * self.omega_values[i] + s * self.omega_values[i + 1]
    }

    /// Radial derivative omega'(r), analytic outside the support.
    pub fn omega_prime(&self, r: f64) -> f64 {
        if r > self.support_radius {
            return -self.a0 / (r * r);
        }
        if r <= 0.0 {
            return 0.0;
        }
        // omega' = -(u' r - u) / r^2 with u', u interpolated
        let h = self.grid.h();
        let t = r / h;
        let i = (t.floor() as usize).min(self.grid.n - 1);
        let s = t - i as f64;
        let u = (1.0 - s) * self.u_values[i] + s * self.u_values[i + 1];
        let du = (1.0 - s) * self.du_values[i] + s * self.du_values[i + 1];
        -(du * r - u) / (r * r)
    }
}

/// Integrate u'' = (V/2) u outward by classical RK4 with u(0)=0, u'(0)=1,
/// then fit the free tail u = c (r - a0) on `[2 R0, r_max]` and rescale.
pub fn solve_scattering(v: &RadialPotential, r_max: f64, n_points: usize) -> Result<ScatteringSolution> {
    if r_max < 4.0 * v.support_radius {
        return Err(Error::UnderresolvedGrid(format!(
            "r_max = {} must be at least 4 R0 = {}",
            r_max,
            4.0 * v.support_radius
        )));
    }
    if n_points < 512 {
        return Err(Error::UnderresolvedGrid(format!("n_points = {} below 512", n_points)));
    }
    let grid = UniformGrid::new(r_max, n_points);
    let h = grid.h();
    let mut u = vec![0.0; grid.len()];
    let mut du = vec![0.0; grid.len()];
    du[0] = 1.0;
    let rhs = |r: f64, uu: f64| 0.5 * v.eval(r) * uu;
    // one RK4 step of u'' = (V/2) u over [r, r + dr]
    let rk4 = |r: f64, dr: f64, ui: f64, dui: f64| -> (f64, f64) {
        let k1u = dui;
        let k1d = rhs(r, ui);
        let k2u = dui + 0.5 * dr * k1d;
        let k2d = rhs(r + 0.5 * dr, ui + 0.5 * dr * k1u);
        let k3u = dui + 0.5 * dr * k2d;
        let k3d = rhs(r + 0.5 * dr, ui + 0.5 * dr * k2u);
        let k4u = dui + dr * k3d;
        let k4d = rhs(r + dr, ui + dr * k3u);
        (
            ui + dr / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u),
            dui + dr / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d),
        )
    };
    let r0 = v.support_radius;
    for i in 0..grid.n {
        let (ra, rb) = (grid.node(i), grid.node(i + 1));
        if ra >= r0 {
            // outside the support u'' = 0: advance exactly
            u[i + 1] = u[i] + (rb - ra) * du[i];
            du[i + 1] = du[i];
        } else if rb <= r0 {
            let (un, dn) = rk4(ra, rb - ra, u[i], du[i]);
            u[i + 1] = un;
            du[i + 1] = dn;
        } else {
            // step straddles the support edge: integrate up to r0, then free
            let (um, dm) = rk4(ra, r0 - ra, u[i], du[i]);
            u[i + 1] = um + (rb - r0) * dm;
            du[i + 1] = dm;
        }
        if !u[i + 1].is_finite() {
            return Err(Error::NonIntegrablePotential("scattering integration diverged".into()));
        }
    }

    // least-squares line u = c r + b on the fit window; a0 = -b / c
    let fit_lo = (2.0 * v.support_radius).max(4.0 * h);
    let fit_hi = r_max;
    let i_lo = (fit_lo / h).ceil() as usize;
    let mut sn = 0.0;
    let (mut sr, mut srr, mut su, mut sru) = (0.0, 0.0, 0.0, 0.0);
    for i in i_lo..=grid.n {
        let r = grid.node(i);
        sn += 1.0;
        sr += r;
        srr += r * r;
        su += u[i];
        sru += r * u[i];
    }
    let denom = sn * srr - sr * sr;
    let c = (sn * sru - sr * su) / denom;
    let b = (su * srr - sr * sru) / denom;
    if c.abs() < 1e-300 {
        return Err(Error::AsymptoteFitFailure { residual: f64::INFINITY, tol: 0.0 });
    }
    let a0 = -b / c;

    let fit_tol = 1e-8;
    let mut fit_residual = 0.0f64;
    for i in i_lo..=grid.n {
        let r = grid.node(i);
        fit_residual = fit_residual.max((u[i] - (c * r + b)).abs() / (c.abs() * r_max));
    }
    if fit_residual > fit_tol {
        return Err(Error::AsymptoteFitFailure { residual: fit_residual, tol: fit_tol });
    }

    // rescale so u -> r - a0
    for i in 0..=grid.n {
        u[i] /= c;
        du[i] /= c;
    }
    let mut f = vec![0.0; grid.len()];
    f[0] = du[0]; // u ~ u'(0) r near 0, so f(0+) = u'(0)
    for i in 1..=grid.n {
        f[i] = u[i] / grid.node(i);
    }
    let omega: Vec<f64> = f.iter().map(|&x| 1.0 - x).collect();

    // pointwise ODE defect |-2 u''/r + V u / r| via central differences;
    // the defect is not defined where V jumps, so mask those nodes plus a
    // two-cell neighborhood (the central difference touches them too)
    let vmax = v.values.iter().cloned().fold(0.0f64, f64::max);
    let mut masked = vec![false; grid.len()];
    for i in 1..grid.n {
        let jump = (v.values[i + 1] - v.values[i]).abs().max((v.values[i] - v.values[i - 1]).abs());
        if vmax > 0.0 && jump > 0.1 * vmax {
            for m in masked.iter_mut().take((i + 3).min(grid.n)).skip(i.saturating_sub(2)) {
                *m = true;
            }
        }
    }
    let mut residual = 0.0f64;
    for i in 1..grid.n {
        if masked[i] {
            continue;
        }
        let r = grid.node(i);
        let upp = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (h * h);
        residual = residual.max((-2.0 * upp + v.values[i] * u[i]).abs() / r);
    }

    Ok(ScatteringSolution {
        grid,
        f_values: f,
        omega_values: omega,
        u_values: u,
        du_values: du,
        a0,
        fit_window: (fit_lo, fit_hi),
        residual,
        support_radius: v.support_radius,
    })
}

/// Integral of `0.5 r^2 V(r) w(r)` over the support, splitting the cell
/// that contains the support edge so that jump potentials lose no mass.
/// Node weights `w` are interpolated linearly off-grid.
fn v_weighted_half_r2(v: &RadialPotential, w: &[f64]) -> f64 {
    let grid = &v.grid;
    let h = grid.h();
    let r0 = v.support_radius;
    let g = |r: f64| -> f64 {
        let t = r / h;
        let i = (t.floor() as usize).min(grid.n - 1);
        let s = t - i as f64;
        let wi = (1.0 - s) * w[i] + s * w[i + 1];
        0.5 * r * r * v.eval(r) * wi
    };
    let mut total = 0.0;
    for i in 0..grid.n {
        let (ra, rb) = (grid.node(i), grid.node(i + 1));
        if ra >= r0 {
            break;
        }
        if rb <= r0 {
            total += 0.5 * (g(ra) + g(rb)) * (rb - ra);
        } else {
            total += 0.5 * (g(ra) + g(r0)) * (r0 - ra);
        }
    }
    total
}

/// Scattering length from the variational integral
/// (8 pi)^-1 int (2 |grad f|^2 + V f^2), with the exact a0^2 / r_max tail
/// added for the part of the gradient integral beyond the grid.
pub fn scattering_length_variational(v: &RadialPotential, sol: &ScatteringSolution) -> Result<f64> {
    if v.grid != sol.grid {
        return Err(Error::GridMismatch("potential and solution live on different grids".into()));
    }
    let h = sol.grid.h();
    let mut grad_sq = vec![0.0; sol.grid.len()];
    for i in 1..=sol.grid.n {
        let r = sol.grid.node(i);
        // f' = (u' r - u) / r^2
        let fp = (sol.du_values[i] * r - sol.u_values[i]) / (r * r);
        grad_sq[i] = r * r * fp * fp;
    }
    let f_sq: Vec<f64> = sol.f_values.iter().map(|&f| f * f).collect();
    let bulk = trapz(&grad_sq, h) + v_weighted_half_r2(v, &f_sq);
    let tail = sol.a0 * sol.a0 / sol.grid.r_max;
    Ok(bulk + tail)
}

/// Scattering length from int V (1 - omega) / (8 pi) = int V f / (8 pi).
pub fn scattering_length_integral(v: &RadialPotential, sol: &ScatteringSolution) -> Result<f64> {
    if v.grid != sol.grid {
        return Err(Error::GridMismatch("potential and solution live on different grids".into()));
    }
    Ok(v_weighted_half_r2(v, &sol.f_values))
}

/// Smooth radial cutoff profile: 1 on [0, 1/2], 0 on [1, inf).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChiProfile {
    /// C^2 quintic smoothstep taper on (1/2, 1).
    Smoothstep,
    /// C^1 cosine taper on (1/2, 1); used for the chi-independence checks.
    CosineTaper,
}

impl ChiProfile {
    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.5 {
            return 1.0;
        }
        if t >= 1.0 {
            return 0.0;
        }
        match self {
            ChiProfile::Smoothstep => {
                let s = (t - 0.5) * 2.0;
                1.0 - s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
            }
            ChiProfile::CosineTaper => 0.5 * (1.0 + (std::f64::consts::PI * (2.0 * t - 1.0)).cos()),
        }
    }

    /// First derivative, evaluated with interior limits on the closed
    /// taper interval [1/2, 1] (the cosine profile's second derivative
    /// jumps at the edges; support-restricted quadrature relies on the
    /// interior values there).
    pub fn d1(&self, t: f64) -> f64 {
        if !(0.5..=1.0).contains(&t) {
            return 0.0;
        }
        match self {
            ChiProfile::Smoothstep => {
                let s = (t - 0.5) * 2.0;
                -2.0 * (30.0 * s * s * (1.0 - s) * (1.0 - s))
            }
            ChiProfile::CosineTaper => {
                -std::f64::consts::PI * (std::f64::consts::PI * (2.0 * t - 1.0)).sin()
            }
        }
    }

    /// Second derivative with the same interior-limit convention.
    pub fn d2(&self, t: f64) -> f64 {
        if !(0.5..=1.0).contains(&t) {
            return 0.0;
        }
        match self {
            ChiProfile::Smoothstep => {
                let s = (t - 0.5) * 2.0;
                -4.0 * (60.0 * s * (1.0 - s) * (1.0 - 2.0 * s))
            }
            ChiProfile::CosineTaper => {
                -2.0 * std::f64::consts::PI * std::f64::consts::PI
                    * (std::f64::consts::PI * (2.0 * t - 1.0)).cos()
            }
        }
    }
}

/// Truncated scattering data omega_{l,N} and its Laplacian defect
/// eps_{l,N}, tabulated on a dedicated fine grid over [0, ell].
#[derive(Debug, Clone)]
pub struct TruncatedScattering {
    pub ell: f64,
    pub n_scale: f64,
    pub chi: ChiProfile,
    pub a0: f64,
    /// grid over [0, ell]
    pub grid: UniformGrid,
    pub omega_ln: Vec<f64>,
    /// eps_{l,N}(r_j); supported on [ell/2, ell] by construction
    pub eps_ln: Vec<f64>,
    /// d/dr omega_{l,N}(r_j), from the product rule (not differencing)
    pub grad_ln: Vec<f64>,
}

impl TruncatedScattering {
    /// Quadrature of `4 pi r^2 g(r, eps(r))` restricted to the support
    /// shell [ell/2, ell], where eps is smooth for both chi profiles.
    fn shell_integral(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        let h = self.grid.h();
        let lo = self.grid.n / 2;
        let integrand: Vec<f64> = (lo..=self.grid.n)
            .map(|i| {
                let r = self.grid.node(i);
                4.0 * std::f64::consts::PI * r * r * f(r, self.eps_ln[i])
            })
            .collect();
        simpson(&integrand, h)
    }

    /// int N^3 eps_{l,N} d^3x by quadrature (equals 8 pi a0 analytically).
    pub fn eps_mass(&self) -> f64 {
        let scale = self.n_scale.powi(3);
        self.shell_integral(|_, e| scale * e)
    }

    /// Fourier transform of the kernel: int eps(x) e^{-ipx} d^3x =
    /// int 4 pi r^2 eps(r) sin(pr)/(pr) dr, times N^3.
    pub fn eps_hat(&self, p: f64) -> f64 {
        let scale = self.n_scale.powi(3);
        self.shell_integral(|r, e| {
            let j0 = if (p * r).abs() < 1e-8 {
                1.0 - (p * r) * (p * r) / 6.0
            } else {
                (p * r).sin() / (p * r)
            };
            scale * e * j0
        })
    }

    /// Same transform for N omega_{l,N} (enters the correlation kernel).
    pub fn n_omega_hat(&self, p: f64) -> f64 {
        let h = self.grid.h();
        let integrand: Vec<f64> = (0..=self.grid.n)
            .map(|i| {
                let r = self.grid.node(i);
                let j0 = if (p * r).abs() < 1e-8 {
                    1.0 - (p * r) * (p * r) / 6.0
                } else {
                    (p * r).sin() / (p * r)
                };
                4.0 * std::f64::consts::PI * r * r * self.n_scale * self.omega_ln[i] * j0
            })
            .collect();
        simpson(&integrand, h)
    }

    /// omega_{l,N}(r) by table lookup (zero outside [0, ell]).
    pub fn omega_at(&self, r: f64) -> f64 {
        if r < 0.0 || r >= self.ell {
            return 0.0;
        }
        let h = self.grid.h();
        let t = r / h;
        let i = (t.floor() as usize).min(self.grid.n - 1);
        let s = t - i as f64;
        (1.0 - s) * self.omega_ln[i] + s * self.omega_ln[i + 1]
    }

    /// L^p norms of omega_{l,N} and its gradient (p = 1, 2), by quadrature.
    pub fn omega_norms(&self) -> OmegaNorms {
        let h = self.grid.h();
        let n = self.grid.n;
        let mut w1 = vec![0.0; n + 1];
        let mut w2 = vec![0.0; n + 1];
        let mut g1 = vec![0.0; n + 1];
        let mut g2 = vec![0.0; n + 1];
        for i in 0..=n {
            let r = self.grid.node(i);
            let w = self.omega_ln[i];
            let grad = self.grad_ln[i];
            let vol = 4.0 * std::f64::consts::PI * r * r;
            w1[i] = vol * w.abs();
            w2[i] = vol * w * w;
            g1[i] = vol * grad.abs();
            g2[i] = vol * grad * grad;
        }
        OmegaNorms {
            l1: simpson(&w1, h),
            l2: simpson(&w2, h).sqrt(),
            grad_l1: simpson(&g1, h),
            grad_l2: simpson(&g2, h).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct OmegaNorms {
    pub l1: f64,
    pub l2: f64,
    pub grad_l1: f64,
    pub grad_l2: f64,
}

/// Build omega_{l,N} = chi(r/ell) omega(N r) and
/// eps_{l,N} from the analytic expansion
/// N^2 eps = 4 grad(omega_N) . grad(chi_ell) + 2 omega_N Lap(chi_ell),
/// never by differencing omega twice.
pub fn truncate_scattering(
    sol: &ScatteringSolution,
    ell: f64,
    n_scale: f64,
    chi: ChiProfile,
    n_points: usize,
) -> Result<TruncatedScattering> {
    if !(ell > 0.0 && ell <= 1.0) {
        return Err(Error::Parse(format!("ell = {} outside (0, 1]", ell)));
    }
    let min_ell = 2.0 * sol.support_radius / n_scale;
    if ell <= min_ell {
        return Err(Error::CutoffTooSmall { ell, min_ell });
    }
    if n_points < 512 {
        return Err(Error::UnderresolvedGrid("truncation table needs at least 512 intervals".into()));
    }
    // multiple of 4 keeps ell/2 on the grid and the shell panel count even
    let n_points = n_points.next_multiple_of(4);
    // the table must resolve both the 1/N core and the ell-scale shell
    let grid = UniformGrid::new(ell, n_points);
    if grid.h() > 1.0 / n_scale || grid.h() > ell / 16.0 {
        return Err(Error::UnderresolvedGrid(format!(
            "truncation grid spacing {} coarser than min(1/N, ell/16) = {}",
            grid.h(),
            (1.0 / n_scale).min(ell / 16.0)
        )));
    }
    let mut omega_ln = vec![0.0; grid.len()];
    let mut eps_ln = vec![0.0; grid.len()];
    let mut grad_ln = vec![0.0; grid.len()];
    for i in 0..=grid.n {
        let r = grid.node(i);
        let t = r / ell;
        let w = sol.omega(n_scale * r);
        let wp = sol.omega_prime(n_scale * r);
        omega_ln[i] = chi.eval(t) * w;
        grad_ln[i] = chi.d1(t) / ell * w + chi.eval(t) * n_scale * wp;
        if r > 0.0 {
            let lap_chi = chi.d2(t) / (ell * ell) + 2.0 / r * chi.d1(t) / ell;
            eps_ln[i] = (4.0 * n_scale * wp * chi.d1(t) / ell + 2.0 * w * lap_chi)
                / (n_scale * n_scale);
        }
    }
    Ok(TruncatedScattering { ell, n_scale, chi, a0: sol.a0, grid, omega_ln, eps_ln, grad_ln })
}

/// Measured truncation norms and fitted scaling exponents in N and ell.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    pub n_values: Vec<f64>,
    pub ell_values: Vec<f64>,
    /// norms[i][j] for (N_i, ell_j)
    pub norms: Vec<Vec<OmegaNorms>>,
    /// exponents (in N, in ell) for L1, L2, grad L1, grad L2
    pub exponents: [(f64, f64); 4],
}

/// Sweep (N, ell) pairs and fit the Lemma-2.2 scaling exponents:
/// expected (-1, 2), (-1, 1/2), (-1, 1), (-1/2, 0) for
/// |omega|_L1, |omega|_L2, |grad omega|_L1, |grad omega|_L2.
pub fn truncation_scaling_report(
    sol: &ScatteringSolution,
    n_values: &[f64],
    ell_values: &[f64],
    chi: ChiProfile,
) -> Result<ScalingReport> {
    if n_values.len() < 3 || ell_values.len() < 3 {
        return Err(Error::InsufficientSamplePoints(n_values.len().min(ell_values.len())));
    }
    let table_points = 4096;
    let mut norms = Vec::with_capacity(n_values.len());
    for &nv in n_values {
        let mut row = Vec::with_capacity(ell_values.len());
        for &ell in ell_values {
            let trunc = truncate_scattering(sol, ell, nv, chi, table_points)?;
            row.push(trunc.omega_norms());
        }
        norms.push(row);
    }
    let pick = |f: &dyn Fn(&OmegaNorms) -> f64| -> (f64, f64) {
        // exponent in N at the middle ell, exponent in ell at the middle N
        let j_mid = ell_values.len() / 2;
        let i_mid = n_values.len() / 2;
        let yn: Vec<f64> = (0..n_values.len()).map(|i| f(&norms[i][j_mid])).collect();
        let ye: Vec<f64> = (0..ell_values.len()).map(|j| f(&norms[i_mid][j])).collect();
        let en = fit_power_law(n_values, &yn).unwrap_or(f64::NAN);
        let ee = fit_power_law(ell_values, &ye).unwrap_or(f64::NAN);
        (en, ee)
    };
    let exponents = [
        pick(&|n: &OmegaNorms| n.l1),
        pick(&|n: &OmegaNorms| n.l2),
        pick(&|n: &OmegaNorms| n.grad_l1),
        pick(&|n: &OmegaNorms| n.grad_l2),
    ];
    Ok(ScalingReport {
        n_values: n_values.to_vec(),
        ell_values: ell_values.to_vec(),
        norms,
        exponents,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Closed-form soft-sphere scattering length
    /// a0 = R (1 - tanh(kappa R) / (kappa R)), kappa = sqrt(V0 / 2).
    fn soft_sphere_a0(radius: f64, v0: f64) -> f64 {
        let kappa = (v0 / 2.0).sqrt();
        radius * (1.0 - (kappa * radius).tanh() / (kappa * radius))
    }

    /// Independent shooting check of the closed form: integrate
    /// u'' = (V0/2) u inside the sphere by fine midpoint stepping and
    /// match to the free line outside.
    #[test]
    fn soft_sphere_closed_form_verified_by_independent_shooting() {
        let (radius, v0) = (1.0, 2.0);
        let n = 400_000;
        let h = radius / n as f64;
        // explicit midpoint on u'' = (V0/2) u inside the sphere
        let (mut u, mut du) = (0.0f64, 1.0f64);
        for _ in 0..n {
            let um = u + 0.5 * h * du;
            let dum = du + 0.5 * h * (0.5 * v0 * u);
            u += h * dum;
            du += h * (0.5 * v0 * um);
        }
        // outside: u(r) = c (r - a0) with c = u'(R), a0 = R - u/u'
        let a0_shoot = radius - u / du;
        assert_relative_eq!(a0_shoot, soft_sphere_a0(radius, v0), max_relative = 1e-7);
        assert_relative_eq!(soft_sphere_a0(1.0, 2.0), 1.0 - 1.0f64.tanh(), epsilon = 1e-15);
    }

    #[test]
    fn zero_potential_gives_zero_scattering_length() {
        let v = RadialPotential::zero(4.0, 1024).unwrap();
        let sol = solve_scattering(&v, 4.0, 1024).unwrap();
        assert!(sol.a0.abs() < 1e-12);
        assert!(sol.f_values.iter().all(|&f| (f - 1.0).abs() < 1e-12));
    }

    #[test]
    fn soft_sphere_matches_closed_form() {
        let v = RadialPotential::soft_sphere(1.0, 2.0, 6.0, 8192).unwrap();
        let sol = solve_scattering(&v, 6.0, 8192).unwrap();
        let exact = 1.0 - 1.0f64.tanh();
        assert_relative_eq!(sol.a0, exact, max_relative = 1e-6);
        // 0 <= f <= 1 on the grid
        assert!(sol.f_values.iter().all(|&f| (-1e-12..=1.0 + 1e-12).contains(&f)));
        // omega r is constant = a0 outside the support
        for &r in &[2.5, 3.5, 4.5] {
            assert_relative_eq!(sol.omega(r) * r, sol.a0, max_relative = 1e-9);
        }
    }

    #[test]
    fn variational_and_integral_routes_agree() {
        let v = RadialPotential::soft_sphere(1.0, 2.0, 6.0, 8192).unwrap();
        let sol = solve_scattering(&v, 6.0, 8192).unwrap();
        let a_var = scattering_length_variational(&v, &sol).unwrap();
        let a_int = scattering_length_integral(&v, &sol).unwrap();
        let exact = 1.0 - 1.0f64.tanh();
        assert_relative_eq!(a_var, exact, max_relative = 1e-5);
        assert_relative_eq!(a_int, exact, max_relative = 1e-5);
        assert_relative_eq!(a_var, sol.a0, max_relative = 1e-5);
        // first Born approximation dominates: a0 <= (8 pi)^-1 int V
        let born: f64 = (0..=v.grid.n)
            .map(|i| 0.5 * v.grid.node(i).powi(2) * v.values[i] * v.grid.h())
            .sum();
        assert!(a_var <= born);
    }

    #[test]
    fn variational_zero_for_zero_potential() {
        let v = RadialPotential::zero(4.0, 1024).unwrap();
        let sol = solve_scattering(&v, 4.0, 1024).unwrap();
        assert!(scattering_length_variational(&v, &sol).unwrap().abs() < 1e-12);
    }

    #[test]
    fn truncation_mass_identity_and_support() {
        let v = RadialPotential::soft_sphere(1.0, 2.0, 6.0, 8192).unwrap();
        let sol = solve_scattering(&v, 6.0, 8192).unwrap();
        for &(ell, nn) in &[(0.5, 32.0), (0.25, 64.0), (0.125, 128.0)] {
            let trunc = truncate_scattering(&sol, ell, nn, ChiProfile::Smoothstep, 4096).unwrap();
            let mass = trunc.eps_mass();
            let expect = 8.0 * std::f64::consts::PI * sol.a0;
            assert_relative_eq!(mass, expect, max_relative = 1e-5);
            // support: zero on [0, ell/2) and beyond ell
            for i in 0..=trunc.grid.n {
                let r = trunc.grid.node(i);
                if r < 0.499 * ell || r > ell {
                    assert_eq!(trunc.eps_ln[i], 0.0, "eps nonzero at r = {}", r);
                }
            }
        }
    }

    #[test]
    fn truncation_mass_is_chi_independent() {
        let v = RadialPotential::soft_sphere(1.0, 2.0, 6.0, 8192).unwrap();
        let sol = solve_scattering(&v, 6.0, 8192).unwrap();
        let a = truncate_scattering(&sol, 0.25, 64.0, ChiProfile::Smoothstep, 4096).unwrap();
        let b = truncate_scattering(&sol, 0.25, 64.0, ChiProfile::CosineTaper, 4096).unwrap();
        assert_relative_eq!(a.eps_mass(), b.eps_mass(), max_relative = 1e-5);
    }

    #[test]
    fn zero_potential_truncates_to_zero() {
        let v = RadialPotential::zero(4.0, 1024).unwrap();
        let sol = solve_scattering(&v, 4.0, 1024).unwrap();
        let trunc = truncate_scattering(&sol, 0.25, 64.0, ChiProfile::Smoothstep, 1024).unwrap();
        assert!(trunc.omega_ln.iter().all(|&w| w.abs() < 1e-14));
        assert!(trunc.eps_ln.iter().all(|&e| e.abs() < 1e-12));
    }

    #[test]
    fn cutoff_too_small_is_rejected() {
        let v = RadialPotential::soft_sphere(1.0, 2.0, 6.0, 4096).unwrap();
        let sol = solve_scattering(&v, 6.0, 4096).unwrap();
        let err = truncate_scattering(&sol, 0.01, 64.0, ChiProfile::Smoothstep, 1024);
        assert!(matches!(err, Err(Error::CutoffTooSmall { .. })));
    }

    #[test]
    fn pointwise_eps_bound_is_stable() {
        // N^3 |eps| <= C ell^-3 with C stable across (N, ell)
        let v = RadialPotential::soft_sphere(1.0, 2.0, 6.0, 8192).unwrap();
        let sol = solve_scattering(&v, 6.0, 8192).unwrap();
        let mut cs = Vec::new();
        for &(ell, nn) in &[(0.5, 32.0), (0.25, 64.0), (0.125, 128.0), (0.5, 64.0)] {
            let trunc = truncate_scattering(&sol, ell, nn, ChiProfile::Smoothstep, 4096).unwrap();
            let sup = trunc
                .eps_ln
                .iter()
                .map(|&e| (nn.powi(3) * e).abs())
                .fold(0.0f64, f64::max);
            cs.push(sup * ell.powi(3));
        }
        let cmax = cs.iter().cloned().fold(0.0f64, f64::max);
        let cmin = cs.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(cmax / cmin < 1.6, "pointwise constant drifts: {:?}", cs);
    }

    #[test]
    fn scaling_exponents_match_lemma() {
        let v = RadialPotential::soft_sphere(1.0, 2.0, 6.0, 8192).unwrap();
        let sol = solve_scattering(&v, 6.0, 8192).unwrap();
        let report = truncation_scaling_report(
            &sol,
            &[32.0, 64.0, 128.0],
            &[0.2, 0.4, 0.8],
            ChiProfile::Smoothstep,
        )
        .unwrap();
        let expect = [(-1.0, 2.0), (-1.0, 0.5), (-1.0, 1.0), (-0.5, 0.0)];
        for (k, &(en, ee)) in report.exponents.iter().enumerate() {
            assert!((en - expect[k].0).abs() < 0.15, "N exponent {k}: {en} vs {}", expect[k].0);
            assert!((ee - expect[k].1).abs() < 0.15, "ell exponent {k}: {ee} vs {}", expect[k].1);
        }
    }

    #[test]
    fn residual_halves_under_grid_refinement() {
        let v1 = RadialPotential::gaussian(0.3, 3.0, 8.0, 2048).unwrap();
        let s1 = solve_scattering(&v1, 8.0, 2048).unwrap();
        let v2 = RadialPotential::gaussian(0.3, 3.0, 8.0, 4096).unwrap();
        let s2 = solve_scattering(&v2, 8.0, 4096).unwrap();
        assert!(
            s2.residual < s1.residual / 2.0,
            "residuals {} -> {}",
            s1.residual,
            s2.residual
        );
    }

    #[test]
    fn too_few_sweep_points_rejected() {
        let v = RadialPotential::soft_sphere(1.0, 2.0, 6.0, 4096).unwrap();
        let sol = solve_scattering(&v, 6.0, 4096).unwrap();
        let err = truncation_scaling_report(&sol, &[32.0, 64.0], &[0.2, 0.4, 0.8], ChiProfile::Smoothstep);
        assert!(matches!(err, Err(Error::InsufficientSamplePoints(2))));
    }
}
