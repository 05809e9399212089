//! Gross-Pitaevskii ground states by normalized imaginary-time flow.
//!
//! Units: hbar = 1, 2m = 1, so the kinetic operator is -Delta and the
//! harmonic trap |x|^2 has linear ground energy 3. Spherical traps are
//! solved in the radial variable u = sqrt(4 pi) r phi with Dirichlet ends;
//! the diffusion part of each flow step is taken implicitly (tridiagonal
//! solve), the nonlinear term explicitly, with a backtracking halving rule
//! on the discrete energy. A Cartesian box path covers generic traps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    convolve_radial, cumulative_first_moment, gauss_legendre, trapz, Spline, UniformGrid,
};
use crate::scattering::{RadialPotential, ScatteringSolution};

/// Confining potential V_ext >= 0 growing at infinity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ExternalPotential {
    /// V = |x|^2
    Harmonic,
    /// V = strength |x|^4
    Quartic { strength: f64 },
    /// radial table, linearly interpolated, extended by its last value slope
    TabulatedRadial { r_max: f64, values: Vec<f64> },
}

impl ExternalPotential {
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            ExternalPotential::Harmonic => r * r,
            ExternalPotential::Quartic { strength } => strength * r.powi(4),
            ExternalPotential::TabulatedRadial { r_max, values } => {
                let n = values.len() - 1;
                let h = r_max / n as f64;
                if r >= *r_max {
                    return values[n];
                }
                let t = r / h;
                let i = (t.floor() as usize).min(n - 1);
                let s = t - i as f64;
                (1.0 - s) * values[i] + s * values[i + 1]
            }
        }
    }

    /// Curvature at the origin, used to size the Gaussian initial state.
    fn harmonic_width(&self) -> f64 {
        match self {
            ExternalPotential::Harmonic => 1.0,
            ExternalPotential::Quartic { .. } => 1.0,
            ExternalPotential::TabulatedRadial { .. } => 1.0,
        }
    }
}

/// Converged condensate on a radial grid.
#[derive(Debug, Clone)]
pub struct GPState {
    pub grid: UniformGrid,
    /// u = sqrt(4 pi) r phi, unit L^2 norm on [0, r_box]
    pub u: Vec<f64>,
    /// phi(r) at the nodes (phi(0) from the parity limit u'(0))
    pub phi: Vec<f64>,
    pub mu: f64,
    pub energy: f64,
    pub a0: f64,
    pub residual: f64,
    pub iterations: usize,
    /// per-iteration energies, nonincreasing up to arithmetic slack
    pub energy_history: Vec<f64>,
    pub trap: ExternalPotential,
}

impl GPState {
    /// phi(r) with zero extension past the box.
    pub fn phi_at(&self, r: f64) -> f64 {
        if r < 0.0 || r >= self.grid.r_max {
            return 0.0;
        }
        let h = self.grid.h();
        let t = r / h;
        let i = (t.floor() as usize).min(self.grid.n - 1);
        let s = t - i as f64;
        (1.0 - s) * self.phi[i] + s * self.phi[i + 1]
    }

    /// int phi^4 d^3x by quadrature.
    pub fn phi4_integral(&self) -> f64 {
        let h = self.grid.h();
        let integrand: Vec<f64> = (0..=self.grid.n)
            .map(|i| {
                let r = self.grid.node(i);
                if i == 0 {
                    0.0
                } else {
                    self.u[i].powi(4) / (4.0 * std::f64::consts::PI * r * r)
                }
            })
            .collect();
        trapz(&integrand, h)
    }

    /// Spline of phi^2 for convolution quadratures.
    pub fn phi_sq_spline(&self) -> Spline {
        let vals: Vec<f64> = self.phi.iter().map(|&p| p * p).collect();
        Spline::from_uniform(0.0, self.grid.h(), &vals)
    }
}

struct RadialOperator {
    grid: UniformGrid,
    v_ext: Vec<f64>,
    a0: f64,
}

impl RadialOperator {
    fn new(trap: &ExternalPotential, grid: UniformGrid, a0: f64) -> Self {
        let v_ext = grid.nodes().iter().map(|&r| trap.eval(r)).collect();
        Self { grid, v_ext, a0 }
    }

    /// H u = -u'' + V_ext u + 2 a0 u^3 / r^2 on interior nodes.
    fn apply(&self, u: &[f64], out: &mut [f64]) {
        let h = self.grid.h();
        let n = self.grid.n;
        out[0] = 0.0;
        out[n] = 0.0;
        for i in 1..n {
            let r = self.grid.node(i);
            let lap = (-u[i + 1] + 2.0 * u[i] - u[i - 1]) / (h * h);
            out[i] = lap + self.v_ext[i] * u[i] + 2.0 * self.a0 * u[i].powi(3) / (r * r);
        }
    }

    /// Discrete GP energy: sum of cell gradients + potential + interaction.
    fn energy(&self, u: &[f64]) -> f64 {
        let h = self.grid.h();
        let n = self.grid.n;
        let mut kin = 0.0;
        for i in 0..n {
            let d = (u[i + 1] - u[i]) / h;
            kin += d * d * h;
        }
        let mut pot = 0.0;
        let mut int4 = 0.0;
        for i in 1..n {
            let r = self.grid.node(i);
            pot += self.v_ext[i] * u[i] * u[i] * h;
            int4 += u[i].powi(4) / (r * r) * h;
        }
        kin + pot + self.a0 * int4
    }

    fn rayleigh_mu(&self, u: &[f64]) -> f64 {
        let h = self.grid.h();
        let mut hu = vec![0.0; u.len()];
        self.apply(u, &mut hu);
        u.iter().zip(&hu).map(|(a, b)| a * b * h).sum()
    }

    fn residual(&self, u: &[f64], mu: f64) -> f64 {
        let h = self.grid.h();
        let mut hu = vec![0.0; u.len()];
        self.apply(u, &mut hu);
        let mut s = 0.0;
        for i in 1..self.grid.n {
            let d = hu[i] - mu * u[i];
            s += d * d * h;
        }
        s.sqrt()
    }

    /// Backward-Euler step of the shifted flow:
    /// (I + dt (T + V + 2 a0 u^2 / r^2 - mu)) w = u.
    /// The shift makes the normalized fixed point an exact discrete GP
    /// state instead of an O(dt)-biased one.
    fn implicit_step(&self, u: &[f64], rhs: &[f64], mu: f64, dt: f64) -> Vec<f64> {
        let h = self.grid.h();
        let n = self.grid.n;
        let m = n - 1; // interior nodes
        let mut diag = vec![0.0; m];
        let mut sub = vec![0.0; m - 1];
        for i in 1..n {
            let r = self.grid.node(i);
            let b = 2.0 * self.a0 * u[i] * u[i] / (r * r);
            diag[i - 1] = 1.0 + dt * (2.0 / (h * h) + self.v_ext[i] + b - mu);
            if i < n - 1 {
                sub[i - 1] = -dt / (h * h);
            }
        }
        // Thomas algorithm (diagonally dominant, no pivoting needed)
        let mut c = vec![0.0; m];
        let mut d = vec![0.0; m];
        c[0] = sub.first().copied().unwrap_or(0.0) / diag[0];
        d[0] = rhs[1] / diag[0];
        for i in 1..m {
            let denom = diag[i] - sub[i - 1] * c[i - 1];
            c[i] = if i < m - 1 { sub[i] / denom } else { 0.0 };
            d[i] = (rhs[i + 1] - sub[i - 1] * d[i - 1]) / denom;
        }
        let mut w = vec![0.0; n + 1];
        w[m] = d[m - 1];
        for i in (0..m - 1).rev() {
            w[i + 1] = d[i] - c[i] * w[i + 2];
        }
        w
    }
}

fn normalize_l2(u: &mut [f64], h: f64) {
    let nrm = (u.iter().map(|v| v * v).sum::<f64>() * h).sqrt();
    for v in u.iter_mut() {
        *v /= nrm;
    }
}

/// Minimize the GP functional over unit-norm radial states.
pub fn minimize_gp(
    trap: &ExternalPotential,
    a0: f64,
    r_box: f64,
    n: usize,
    tol: f64,
) -> Result<GPState> {
    if a0 < 0.0 {
        return Err(Error::Parse(format!("a0 = {} must be nonnegative", a0)));
    }
    if n < 64 {
        return Err(Error::UnderresolvedGrid("radial GP grid needs at least 64 intervals".into()));
    }
    let grid = UniformGrid::new(r_box, n);
    let op = RadialOperator::new(trap, grid.clone(), a0);
    let h = grid.h();

    // positive Gaussian start matched to the trap curvature
    let w0 = trap.harmonic_width();
    let mut u: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&r| r * (-r * r / (2.0 * w0 * w0)).exp())
        .collect();
    u[n] = 0.0;
    normalize_l2(&mut u, h);

    let max_iters = 50_000;
    let mut energy = op.energy(&u);
    let mut history = vec![energy];
    let mut iterations = 0;
    let mut dt: f64 = 0.05;
    while iterations < max_iters {
        iterations += 1;
        let mu = op.rayleigh_mu(&u);
        // keep the shifted tridiagonal solidly diagonally dominant
        let dt_cap = 0.5 / mu.abs().max(1.0);
        dt = dt.min(dt_cap.max(1e-4));
        let mut w = op.implicit_step(&u, &u, mu, dt);
        normalize_l2(&mut w, h);
        let e_new = op.energy(&w);
        if e_new > energy + 1e-12 * energy.abs().max(1.0) || w.iter().any(|&x| x < -1e-12) {
            dt *= 0.5;
            if dt < 1e-9 {
                break;
            }
            continue;
        }
        u = w;
        energy = e_new;
        history.push(energy);
        if iterations % 5 == 0 {
            let mu = op.rayleigh_mu(&u);
            if op.residual(&u, mu) < tol {
                break;
            }
        }
        dt *= 1.05;
    }
    let mu = op.rayleigh_mu(&u);
    let residual = op.residual(&u, mu);
    if residual >= tol {
        return Err(Error::NonConvergence { residual, iterations, tol });
    }

    // boundary mass check: phi at the wall must be negligible
    let phi_scale = u
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, &v)| (v / grid.node(i)).abs())
        .fold(0.0f64, f64::max);
    let phi_boundary = (u[n - 1] / grid.node(n - 1)).abs() / phi_scale;
    if phi_boundary > 1e-8 {
        return Err(Error::BoxTooSmall { boundary_mass: phi_boundary, threshold: 1e-8 });
    }

    let sqrt4pi = (4.0 * std::f64::consts::PI).sqrt();
    let mut phi = vec![0.0; grid.len()];
    phi[0] = (u[1] / h) / sqrt4pi;
    for i in 1..=n {
        phi[i] = u[i] / (sqrt4pi * grid.node(i));
    }
    Ok(GPState {
        grid,
        u,
        phi,
        mu,
        energy,
        a0,
        residual,
        iterations,
        energy_history: history,
        trap: trap.clone(),
    })
}

/// mu by direct quadrature of int (|grad phi|^2 + V_ext phi^2 + 8 pi a0 phi^4).
pub fn chemical_potential(state: &GPState) -> f64 {
    let op = RadialOperator::new(&state.trap, state.grid.clone(), state.a0);
    // quadrature form: cell-gradient kinetic + nodal potential + interaction
    let h = state.grid.h();
    let n = state.grid.n;
    let mut kin = 0.0;
    for i in 0..n {
        let d = (state.u[i + 1] - state.u[i]) / h;
        kin += d * d * h;
    }
    let mut pot = 0.0;
    let mut int4 = 0.0;
    for i in 1..n {
        let r = state.grid.node(i);
        pot += op.v_ext[i] * state.u[i] * state.u[i] * h;
        int4 += state.u[i].powi(4) / (r * r) * h;
    }
    kin + pot + 2.0 * state.a0 * int4
}

/// mu as the Rayleigh quotient of the discrete GP operator.
pub fn rayleigh_mu(state: &GPState) -> f64 {
    let op = RadialOperator::new(&state.trap, state.grid.clone(), state.a0);
    op.rayleigh_mu(&state.u)
}

/// || (-Delta + V_ext + 8 pi a0 phi^2 - mu) phi ||_{L^2}, the convergence
/// certificate. Accepts any radial state, converged or not.
pub fn gp_residual(state: &GPState) -> f64 {
    let op = RadialOperator::new(&state.trap, state.grid.clone(), state.a0);
    op.residual(&state.u, state.mu)
}

/// Residual of a perturbed copy (u + delta, renormalized); used to verify
/// that the minimizer is the unique zero of the GP operator on its ray.
pub fn perturbed_residual(state: &GPState, delta: &[f64]) -> f64 {
    let op = RadialOperator::new(&state.trap, state.grid.clone(), state.a0);
    let mut u: Vec<f64> = state.u.iter().zip(delta).map(|(a, b)| a + b).collect();
    u[0] = 0.0;
    let n = state.grid.n;
    u[n] = 0.0;
    normalize_l2(&mut u, state.grid.h());
    let mu = op.rayleigh_mu(&u);
    op.residual(&u, mu)
}

/// Thomas-Fermi chemical potential for the harmonic trap:
/// drop the kinetic term, solve 8 pi a0 phi^2 = mu - r^2 on {r^2 < mu},
/// and fix mu by unit normalization: mu = (15 a0)^{2/5}.
pub fn thomas_fermi_mu_harmonic(a0: f64) -> f64 {
    (15.0 * a0).powf(0.4)
}

/// One row of the dilute-limit table.
#[derive(Debug, Clone, Serialize)]
pub struct DiluteRow {
    pub n_scale: f64,
    pub deviation_l2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiluteReport {
    pub rows: Vec<DiluteRow>,
    pub fitted_exponent: f64,
}

/// L^2 deviation || N^3 (V_N f_N) * phi^2 - 8 pi a0 phi^2 || for each N,
/// with the fitted decay exponent (analytically -2).
pub fn dilute_limit_check(
    v: &RadialPotential,
    sol: &ScatteringSolution,
    state: &GPState,
    n_list: &[f64],
) -> Result<DiluteReport> {
    let h = state.grid.h();
    for &nn in n_list {
        if h > 1.0 / nn {
            return Err(Error::UnderresolvedGrid(format!(
                "GP grid spacing {} coarser than 1/N = {}",
                h,
                1.0 / nn
            )));
        }
    }
    // cumulative first moment C of sigma V(sigma) f(sigma), tabulated on
    // the kernel support only (V f is smooth there; the support-edge kink
    // would otherwise ring through the spline); M_N(t) = N C(N t),
    // saturating at N C(R0)
    let r0 = v.support_radius;
    let nk = 4096;
    let hk = r0 / nk as f64;
    let kernel: Vec<f64> = (0..=nk)
        .map(|i| {
            let s = i as f64 * hk;
            v.eval(s) * sol.f_at(s)
        })
        .collect();
    let c_table = cumulative_first_moment(0.0, hk, &kernel);
    let c_spline = Spline::from_uniform(0.0, hk, &c_table);
    let c_sat = c_table[nk];

    let phi_sq = state.phi_sq_spline();
    let r_box = state.grid.r_max;
    let phi2 = move |s: f64| if s >= r_box { 0.0 } else { phi_sq.eval(s) };
    let gl = gauss_legendre(48);
    let eight_pi_a0 = 8.0 * std::f64::consts::PI * sol.a0;

    let mut rows = Vec::new();
    for &nn in n_list {
        let w = r0 / nn;
        let moment = |t: f64| {
            if t >= w {
                nn * c_sat
            } else {
                nn * c_spline.eval(nn * t)
            }
        };
        let mut dev_sq = vec![0.0; state.grid.len()];
        for i in 1..=state.grid.n {
            let r = state.grid.node(i);
            let conv = convolve_radial(&moment, w, &phi2, r, &gl);
            let dev = conv - eight_pi_a0 * state.phi[i] * state.phi[i];
            dev_sq[i] = 4.0 * std::f64::consts::PI * r * r * dev * dev;
        }
        rows.push(DiluteRow { n_scale: nn, deviation_l2: trapz(&dev_sq, h).sqrt() });
    }
    let ns: Vec<f64> = rows.iter().map(|r| r.n_scale).collect();
    let ds: Vec<f64> = rows.iter().map(|r| r.deviation_l2).collect();
    let fitted_exponent =
        crate::grid::fit_power_law(&ns, &ds).unwrap_or(if ds.iter().all(|&d| d == 0.0) {
            0.0
        } else {
            f64::NAN
        });
    Ok(DiluteReport { rows, fitted_exponent })
}

/// Ground state of the linear problem (-Delta + V_ext) by direct
/// tridiagonal eigensolve; cross-check for the a0 = 0 flow.
pub fn linear_ground_state(trap: &ExternalPotential, r_box: f64, n: usize) -> (f64, Vec<f64>) {
    let grid = UniformGrid::new(r_box, n);
    let h = grid.h();
    let m = n - 1;
    let mut diag = vec![0.0; m];
    let sub = vec![-1.0 / (h * h); m - 1];
    for i in 1..n {
        diag[i - 1] = 2.0 / (h * h) + trap.eval(grid.node(i));
    }
    let vals = crate::linalg::tridiag_eigenvalues(&diag, &sub);
    let vec = crate::linalg::tridiag_eigenvector(&diag, &sub, vals[0]);
    let mut u = vec![0.0; grid.len()];
    u[1..n].copy_from_slice(&vec);
    normalize_l2(&mut u, h);
    if u[1] < 0.0 {
        for x in u.iter_mut() {
            *x = -*x;
        }
    }
    (vals[0], u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scattering::solve_scattering;
    use approx::assert_relative_eq;

    fn harmonic_state(a0: f64) -> GPState {
        minimize_gp(&ExternalPotential::Harmonic, a0, 7.0, 1024, 1e-9).unwrap()
    }

    #[test]
    fn linear_harmonic_ground_state_is_exact() {
        let state = harmonic_state(0.0);
        assert_relative_eq!(state.mu, 3.0, epsilon = 2e-4);
        assert_relative_eq!(state.energy, 3.0, epsilon = 2e-4);
        // phi = pi^{-3/4} exp(-r^2/2)
        let norm = std::f64::consts::PI.powf(-0.75);
        for &r in &[0.0, 0.5, 1.0, 2.0] {
            assert_relative_eq!(state.phi_at(r), norm * (-r * r / 2.0).exp(), epsilon = 1e-4);
        }
        // eigenvalue cross-check against the direct eigensolve
        let (e0, _) = linear_ground_state(&ExternalPotential::Harmonic, 7.0, 1024);
        assert_relative_eq!(state.mu, e0, epsilon = 1e-6);
    }

    #[test]
    fn interacting_state_satisfies_identities() {
        let state = harmonic_state(0.1);
        assert!(state.mu > 3.0);
        // mu - E = 4 pi a0 int phi^4 > 0
        let gap = state.mu - state.energy;
        let expect = 4.0 * std::f64::consts::PI * state.a0 * state.phi4_integral();
        assert_relative_eq!(gap, expect, max_relative = 1e-6);
        assert!(gap > 0.0);
        // unit norm and positivity
        let h = state.grid.h();
        let norm: f64 = state.u.iter().map(|v| v * v).sum::<f64>() * h;
        assert!((norm - 1.0).abs() < 1e-10);
        assert!(state.u.iter().all(|&x| x >= -1e-12));
        // two mu routes agree
        assert_relative_eq!(chemical_potential(&state), rayleigh_mu(&state), epsilon = 1e-8);
        // energy history nonincreasing
        for w in state.energy_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0));
        }
    }

    #[test]
    fn residual_grows_under_perturbation() {
        let state = harmonic_state(0.05);
        let base = gp_residual(&state);
        let delta: Vec<f64> = (0..state.grid.len())
            .map(|i| 1e-3 * ((i as f64) * 0.17).sin() * state.u[i.min(state.grid.n)])
            .collect();
        let pert = perturbed_residual(&state, &delta);
        assert!(pert > 10.0 * base, "residual {} vs perturbed {}", base, pert);
    }

    #[test]
    fn thomas_fermi_limit_at_strong_coupling() {
        let state = minimize_gp(&ExternalPotential::Harmonic, 50.0, 9.0, 1400, 1e-8).unwrap();
        let tf = thomas_fermi_mu_harmonic(50.0);
        assert!(
            (state.mu - tf).abs() / tf < 0.05,
            "mu = {} vs TF = {}",
            state.mu,
            tf
        );
    }

    #[test]
    fn box_too_small_is_detected() {
        let err = minimize_gp(&ExternalPotential::Harmonic, 0.0, 3.0, 256, 1e-8);
        assert!(matches!(err, Err(Error::BoxTooSmall { .. })), "{:?}", err.map(|s| s.mu));
    }

    #[test]
    fn dilute_limit_rate_is_n_minus_two() {
        let v = RadialPotential::soft_sphere(1.0, 2.0, 6.0, 8192).unwrap();
        let sol = solve_scattering(&v, 6.0, 8192).unwrap();
        let state = minimize_gp(&ExternalPotential::Harmonic, sol.a0, 7.0, 2048, 1e-9).unwrap();
        let report = dilute_limit_check(&v, &sol, &state, &[32.0, 64.0, 128.0]).unwrap();
        assert!(
            (report.fitted_exponent + 2.0).abs() < 0.2,
            "exponent {}",
            report.fitted_exponent
        );
        // doubling N drops the deviation by ~4
        let ratio = report.rows[0].deviation_l2 / report.rows[1].deviation_l2;
        assert!((3.2..=4.8).contains(&ratio), "ratio {}", ratio);
    }

    #[test]
    fn dilute_limit_zero_potential_is_exactly_zero() {
        let v = RadialPotential::zero(4.0, 1024).unwrap();
        let sol = solve_scattering(&v, 4.0, 1024).unwrap();
        let state = harmonic_state(0.0);
        let report = dilute_limit_check(&v, &sol, &state, &[32.0, 64.0]).unwrap();
        assert!(report.rows.iter().all(|r| r.deviation_l2 < 1e-12));
    }

    #[test]
    fn underresolved_dilute_grid_is_rejected() {
        let v = RadialPotential::soft_sphere(1.0, 2.0, 6.0, 4096).unwrap();
        let sol = solve_scattering(&v, 6.0, 4096).unwrap();
        let state = minimize_gp(&ExternalPotential::Harmonic, 0.1, 7.0, 256, 1e-8).unwrap();
        let err = dilute_limit_check(&v, &sol, &state, &[1024.0]);
        assert!(matches!(err, Err(Error::UnderresolvedGrid(_))));
    }
}
