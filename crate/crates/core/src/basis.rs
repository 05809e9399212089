//! Orthonormal bases of the condensate-orthogonal subspace and dense
//! symmetric matrices of the one-body operators D, K_inf, K and s1.
//!
//! Three basis kinds:
//!  * `PlaneWaveTorus` - momentum modes p in 2 pi Z^3 \ {0} on the unit
//!    torus, where every operator of interest is diagonal;
//!  * `RadialChannel` - per angular momentum channel, grid vectors
//!    u(r) with the measure sum u_a u_b h, adapted to the channel
//!    operator and explicitly orthogonalized against the condensate;
//!  * `CartesianBox` - tensor products of 1D Dirichlet modes of the
//!    harmonic reference operator, indexed by grid triples.
//!
//! Smeared kernels on radial channels go through the spherical Bessel
//! transform: the channel matrix element of a convolution kernel is a
//! 1D momentum integral against the kernel's radial Fourier transform.
//! The flat part of the transform is peeled off and evaluated in position
//! space, so the K -> K_inf cancellation is not polluted by transform
//! truncation.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gp::GPState;
use crate::grid::{gauss_legendre, Spline, UniformGrid};
use crate::linalg;
use crate::scattering::TruncatedScattering;
use crate::special::spherical_jl;

/// Condensate backing an operator assembly.
#[derive(Debug, Clone, Copy)]
pub enum Condensate<'a> {
    /// Unit torus, phi = 1, mu = 8 pi a0, V_ext = 0.
    Torus { a0: f64 },
    Trapped(&'a GPState),
}

impl Condensate<'_> {
    pub fn a0(&self) -> f64 {
        match self {
            Condensate::Torus { a0 } => *a0,
            Condensate::Trapped(s) => s.a0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BasisKind {
    PlaneWaveTorus,
    RadialChannel,
    CartesianBox,
}

/// Orthonormal basis with the data needed to assemble operators on it.
#[derive(Debug, Clone)]
pub struct Basis {
    pub kind: BasisKind,
    pub label: String,
    pub detail: BasisDetail,
}

#[derive(Debug, Clone)]
pub enum BasisDetail {
    Torus(TorusBasis),
    Radial(RadialChannelBasis),
    Box(BoxBasis),
}

impl Basis {
    pub fn dim(&self) -> usize {
        match &self.detail {
            BasisDetail::Torus(t) => t.modes.len(),
            BasisDetail::Radial(r) => r.modes.len(),
            BasisDetail::Box(b) => b.dim(),
        }
    }

    /// Degeneracy carried by each basis vector (2l+1 for radial channels).
    pub fn level_multiplicity(&self) -> usize {
        match &self.detail {
            BasisDetail::Radial(r) => 2 * r.ell_ang + 1,
            _ => 1,
        }
    }

    /// Max |<b_a, b_b> - delta_ab| under the stored quadrature.
    pub fn gram_defect(&self) -> f64 {
        match &self.detail {
            BasisDetail::Torus(_) => 0.0,
            BasisDetail::Radial(r) => {
                let h = r.grid.h();
                let n = r.modes.len();
                let mut worst = 0.0f64;
                for a in 0..n {
                    for b in a..n {
                        let dot: f64 =
                            r.modes[a].iter().zip(&r.modes[b]).map(|(x, y)| x * y * h).sum();
                        let target = if a == b { 1.0 } else { 0.0 };
                        worst = worst.max((dot - target).abs());
                    }
                }
                worst
            }
            BasisDetail::Box(b) => {
                // tensor modes inherit orthonormality from the 1D factors
                let h = b.axis_h();
                let n = b.modes_1d.len();
                let mut worst = 0.0f64;
                for a in 0..n {
                    for c in a..n {
                        let dot: f64 =
                            b.modes_1d[a].iter().zip(&b.modes_1d[c]).map(|(x, y)| x * y * h).sum();
                        let target = if a == c { 1.0 } else { 0.0 };
                        worst = worst.max((dot - target).abs());
                    }
                }
                worst
            }
        }
    }

    /// Max |<phi, b_j>| for Q-projected bases (None when no condensate
    /// direction lives in this basis's symmetry sector).
    pub fn phi_overlap_max(&self) -> Option<f64> {
        match &self.detail {
            BasisDetail::Torus(_) => None,
            BasisDetail::Radial(r) => {
                if r.ell_ang != 0 {
                    return None;
                }
                let h = r.grid.h();
                let mut worst = 0.0f64;
                for m in &r.modes {
                    let dot: f64 = m.iter().zip(&r.phi_u).map(|(x, y)| x * y * h).sum();
                    worst = worst.max(dot.abs());
                }
                Some(worst)
            }
            BasisDetail::Box(b) => {
                let q = &b.phi_coeffs;
                let mut worst = 0.0f64;
                for col in 0..b.q_comp.ncols() {
                    let dot: f64 = (0..q.len()).map(|i| q[i] * b.q_comp[(i, col)]).sum();
                    worst = worst.max(dot.abs());
                }
                Some(worst)
            }
        }
    }
}

/// Plane waves p = 2 pi n, 0 < |p| <= p_max, sorted by |n|^2 then
/// lexicographically.
#[derive(Debug, Clone)]
pub struct TorusBasis {
    pub p_max: f64,
    pub modes: Vec<[i64; 3]>,
}

impl TorusBasis {
    pub fn momentum(&self, idx: usize) -> f64 {
        let n = self.modes[idx];
        let n2 = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]) as f64;
        2.0 * std::f64::consts::PI * n2.sqrt()
    }
}

pub fn build_basis_torus(p_max: f64) -> Result<Basis> {
    if p_max <= 0.0 {
        return Err(Error::DegenerateQuadrature("p_max must be positive".into()));
    }
    let nmax = (p_max / (2.0 * std::f64::consts::PI)).floor() as i64;
    let mut modes = Vec::new();
    for nx in -nmax..=nmax {
        for ny in -nmax..=nmax {
            for nz in -nmax..=nmax {
                let n2 = nx * nx + ny * ny + nz * nz;
                if n2 == 0 {
                    continue;
                }
                let p = 2.0 * std::f64::consts::PI * (n2 as f64).sqrt();
                if p <= p_max * (1.0 + 1e-12) {
                    modes.push([nx, ny, nz]);
                }
            }
        }
    }
    modes.sort_by_key(|n| (n[0] * n[0] + n[1] * n[1] + n[2] * n[2], n[0], n[1], n[2]));
    Ok(Basis {
        kind: BasisKind::PlaneWaveTorus,
        label: format!("torus p_max={:.4}", p_max),
        detail: BasisDetail::Torus(TorusBasis { p_max, modes }),
    })
}

/// Radial u-vectors for one angular momentum channel, orthonormal under
/// sum u_a u_b h; channel 0 is orthogonalized against the condensate.
#[derive(Debug, Clone)]
pub struct RadialChannelBasis {
    pub ell_ang: usize,
    pub grid: UniformGrid,
    pub modes: Vec<Vec<f64>>,
    pub phi_u: Vec<f64>,
}

impl RadialChannelBasis {
    /// FD channel operator: -u'' + (V_ext + l(l+1)/r^2 + 8 pi a0 phi^2 - mu) u.
    fn tridiag(&self, state: &GPState) -> (Vec<f64>, Vec<f64>) {
        channel_tridiag(&self.grid, self.ell_ang, state)
    }
}

fn channel_tridiag(grid: &UniformGrid, ell_ang: usize, state: &GPState) -> (Vec<f64>, Vec<f64>) {
    let h = grid.h();
    let n = grid.n;
    let lfac = (ell_ang * (ell_ang + 1)) as f64;
    let mut diag = vec![0.0; n - 1];
    let sub = vec![-1.0 / (h * h); n - 2];
    for i in 1..n {
        let r = grid.node(i);
        let phi = state.phi_at(r);
        diag[i - 1] = 2.0 / (h * h)
            + state.trap.eval(r)
            + lfac / (r * r)
            + 8.0 * std::f64::consts::PI * state.a0 * phi * phi
            - state.mu;
    }
    (diag, sub)
}

/// Build the channel basis from the lowest eigenvectors of the channel
/// operator on the state's own grid.
pub fn build_basis_radial_channel(
    state: &GPState,
    ell_ang: usize,
    n_modes: usize,
) -> Result<Basis> {
    let grid = state.grid.clone();
    let h = grid.h();
    let n = grid.n;
    if n_modes + 2 >= n {
        return Err(Error::DegenerateQuadrature(format!(
            "requested {} modes on a {}-node grid",
            n_modes, n
        )));
    }
    let dummy = RadialChannelBasis {
        ell_ang,
        grid: grid.clone(),
        modes: Vec::new(),
        phi_u: state.u.clone(),
    };
    let (diag, sub) = dummy.tridiag(state);
    let vals = linalg::tridiag_eigenvalues(&diag, &sub);

    let want = if ell_ang == 0 { n_modes + 1 } else { n_modes };
    let mut raw: Vec<Vec<f64>> = Vec::with_capacity(want);
    for &lam in vals.iter().take(want) {
        let interior = linalg::tridiag_eigenvector(&diag, &sub, lam);
        let mut full = vec![0.0; grid.len()];
        full[1..n].copy_from_slice(&interior);
        let nrm = (full.iter().map(|x| x * x).sum::<f64>() * h).sqrt();
        for x in full.iter_mut() {
            *x /= nrm;
        }
        raw.push(full);
    }

    let mut modes: Vec<Vec<f64>> = Vec::with_capacity(n_modes);
    if ell_ang == 0 {
        // Gram-Schmidt against the exact condensate vector first, then
        // sequentially; drop the eigenvector that collapses onto phi
        let q = &state.u;
        let mut kept = Vec::new();
        let mut dropped = false;
        for v in raw.into_iter() {
            let mut w = v;
            let overlap: f64 = w.iter().zip(q).map(|(a, b)| a * b * h).sum();
            for (x, qq) in w.iter_mut().zip(q) {
                *x -= overlap * qq;
            }
            for prev in &kept {
                let o: f64 = w.iter().zip(prev as &Vec<f64>).map(|(a, b)| a * b * h).sum();
                for (x, p) in w.iter_mut().zip(prev) {
                    *x -= o * p;
                }
            }
            let nrm = (w.iter().map(|x| x * x).sum::<f64>() * h).sqrt();
            if nrm < 1e-3 {
                // this was the condensate direction
                dropped = true;
                continue;
            }
            for x in w.iter_mut() {
                *x /= nrm;
            }
            kept.push(w);
        }
        if !dropped && kept.len() > n_modes {
            kept.truncate(n_modes);
        }
        modes = kept;
    } else {
        // channels l >= 1 are orthogonal to phi by symmetry
        for v in raw.into_iter() {
            let mut w = v;
            for prev in &modes {
                let o: f64 = w.iter().zip(prev as &Vec<f64>).map(|(a, b)| a * b * h).sum();
                for (x, p) in w.iter_mut().zip(prev) {
                    *x -= o * p;
                }
            }
            let nrm = (w.iter().map(|x| x * x).sum::<f64>() * h).sqrt();
            for x in w.iter_mut() {
                *x /= nrm;
            }
            modes.push(w);
        }
    }
    if modes.len() != n_modes {
        return Err(Error::DegenerateQuadrature(format!(
            "channel {} basis ended with {} of {} modes",
            ell_ang,
            modes.len(),
            n_modes
        )));
    }
    Ok(Basis {
        kind: BasisKind::RadialChannel,
        label: format!("radial channel l={} n={}", ell_ang, n_modes),
        detail: BasisDetail::Radial(RadialChannelBasis {
            ell_ang,
            grid,
            modes,
            phi_u: state.u.clone(),
        }),
    })
}

/// Tensor products of 1D Dirichlet modes of the harmonic reference
/// operator -d^2/dx^2 + x^2 on [-L, L]; mode descriptors are the grid
/// index triples. Q-projection happens in mode space.
#[derive(Debug, Clone)]
pub struct BoxBasis {
    pub half_width: f64,
    pub n_interior: usize,
    pub n_modes_axis: usize,
    pub modes_1d: Vec<Vec<f64>>,
    pub evals_1d: Vec<f64>,
    pub tensor: Vec<[usize; 3]>,
    /// condensate coefficients in the tensor-mode basis
    pub phi_coeffs: DVector<f64>,
    /// Householder complement of phi_coeffs: (m^3) x (m^3 - 1)
    pub q_comp: DMatrix<f64>,
}

impl BoxBasis {
    pub fn dim(&self) -> usize {
        self.q_comp.ncols()
    }

    fn axis_h(&self) -> f64 {
        2.0 * self.half_width / (self.n_interior as f64 + 1.0)
    }
}

pub fn build_basis_box(state: &GPState, n_modes_axis: usize, half_width: f64, n_interior: usize) -> Result<Basis> {
    if n_modes_axis < 2 || n_interior < 8 * n_modes_axis {
        return Err(Error::DegenerateQuadrature(
            "box basis needs n_interior >= 8 modes per axis".into(),
        ));
    }
    let h = 2.0 * half_width / (n_interior as f64 + 1.0);
    let mut diag = vec![0.0; n_interior];
    let sub = vec![-1.0 / (h * h); n_interior - 1];
    for (i, d) in diag.iter_mut().enumerate() {
        let x = -half_width + (i as f64 + 1.0) * h;
        *d = 2.0 / (h * h) + x * x;
    }
    let vals = linalg::tridiag_eigenvalues(&diag, &sub);
    let mut modes_1d = Vec::with_capacity(n_modes_axis);
    for &lam in vals.iter().take(n_modes_axis) {
        let mut v = linalg::tridiag_eigenvector(&diag, &sub, lam);
        let nrm = (v.iter().map(|x| x * x).sum::<f64>() * h).sqrt();
        for x in v.iter_mut() {
            *x /= nrm;
        }
        // fix the sign convention: positive mean or positive slope at left
        let s: f64 = v.iter().sum();
        let lead = if s.abs() > 1e-8 { s } else { v[0] };
        if lead < 0.0 {
            for x in v.iter_mut() {
                *x = -*x;
            }
        }
        modes_1d.push(v);
    }
    let evals_1d: Vec<f64> = vals.iter().take(n_modes_axis).copied().collect();

    let m = n_modes_axis;
    let mut tensor = Vec::with_capacity(m * m * m);
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                tensor.push([i, j, k]);
            }
        }
    }

    // condensate coefficients c_a = int b_a phi, by tensor contraction
    // over Gauss-Legendre axes (the modes are splined off-grid)
    let mut c = DVector::zeros(tensor.len());
    {
        let nq = 48;
        let (gx, gw) = gauss_legendre(nq);
        let xs: Vec<f64> = gx.iter().map(|x| x * half_width).collect();
        let ws: Vec<f64> = gw.iter().map(|w| w * half_width).collect();
        let splines: Vec<Spline> = modes_1d
            .iter()
            .map(|mode| {
                let mut full = vec![0.0; n_interior + 2];
                full[1..=n_interior].copy_from_slice(mode);
                Spline::from_uniform(-half_width, h, &full)
            })
            .collect();
        let mv: Vec<Vec<f64>> =
            splines.iter().map(|s| xs.iter().map(|&x| s.eval(x)).collect()).collect();
        let mut partial_z = vec![vec![vec![0.0; m]; nq]; nq];
        for ix in 0..nq {
            for iy in 0..nq {
                for iz in 0..nq {
                    let r = (xs[ix] * xs[ix] + xs[iy] * xs[iy] + xs[iz] * xs[iz]).sqrt();
                    let phi = state.phi_at(r);
                    if phi == 0.0 {
                        continue;
                    }
                    for kk in 0..m {
                        partial_z[ix][iy][kk] += mv[kk][iz] * phi * ws[iz];
                    }
                }
            }
        }
        let mut partial_yz = vec![vec![vec![0.0; m]; m]; nq];
        for ix in 0..nq {
            for iy in 0..nq {
                for jj in 0..m {
                    let w = mv[jj][iy] * ws[iy];
                    for kk in 0..m {
                        partial_yz[ix][jj][kk] += w * partial_z[ix][iy][kk];
                    }
                }
            }
        }
        for (a, t) in tensor.iter().enumerate() {
            let mut acc = 0.0;
            for ix in 0..nq {
                acc += mv[t[0]][ix] * ws[ix] * partial_yz[ix][t[1]][t[2]];
            }
            c[a] = acc;
        }
    }
    let q_comp = linalg::householder_complement(&c);
    Ok(Basis {
        kind: BasisKind::CartesianBox,
        label: format!("box {}^3", n_modes_axis),
        detail: BasisDetail::Box(BoxBasis {
            half_width,
            n_interior,
            n_modes_axis,
            modes_1d,
            evals_1d,
            tensor,
            phi_coeffs: c,
            q_comp,
        }),
    })
}

/// Dense real symmetric matrix of a one-body operator in a named basis.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub label: String,
    pub basis_label: String,
    pub mat: DMatrix<f64>,
}

impl OperatorMatrix {
    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::sym_eigenvalues(&self.mat)
    }

    pub fn symmetry_defect(&self) -> f64 {
        linalg::symmetry_defect(&self.mat)
    }
}

/// Matrix of Q D Q with D = -Delta + V_ext + 8 pi a0 phi^2 - mu.
pub fn assemble_d(basis: &Basis, cond: &Condensate) -> Result<OperatorMatrix> {
    let mat = match (&basis.detail, cond) {
        (BasisDetail::Torus(t), Condensate::Torus { .. }) => {
            let n = t.modes.len();
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                let p = t.momentum(i);
                m[(i, i)] = p * p;
            }
            m
        }
        (BasisDetail::Radial(r), Condensate::Trapped(state)) => {
            let (diag, sub) = r.tridiag(state);
            let h = r.grid.h();
            let n = r.grid.n;
            let apply = |u: &Vec<f64>| -> Vec<f64> {
                let mut out = vec![0.0; u.len()];
                for i in 1..n {
                    let mut t = diag[i - 1] * u[i];
                    if i > 1 {
                        t += sub[i - 2] * u[i - 1];
                    }
                    if i < n - 1 {
                        t += sub[i - 1] * u[i + 1];
                    }
                    out[i] = t;
                }
                out
            };
            let images: Vec<Vec<f64>> = r.modes.iter().map(apply).collect();
            let nb = r.modes.len();
            let mut m = DMatrix::zeros(nb, nb);
            for a in 0..nb {
                for b in a..nb {
                    let v: f64 = r.modes[a].iter().zip(&images[b]).map(|(x, y)| x * y * h).sum();
                    m[(a, b)] = v;
                    m[(b, a)] = v;
                }
            }
            linalg::symmetrize(&mut m);
            m
        }
        (BasisDetail::Box(b), Condensate::Trapped(state)) => {
            if !matches!(state.trap, crate::gp::ExternalPotential::Harmonic) {
                return Err(Error::UnsupportedBasis(
                    "box basis assembles D only for the harmonic trap".into(),
                ));
            }
            let full = b.tensor.len();
            let mut m = DMatrix::zeros(full, full);
            for (a, t) in b.tensor.iter().enumerate() {
                m[(a, a)] = b.evals_1d[t[0]] + b.evals_1d[t[1]] + b.evals_1d[t[2]] - state.mu;
            }
            if state.a0 > 0.0 {
                let w = box_phisq_matrix(b, state);
                m += 8.0 * std::f64::consts::PI * state.a0 * w;
            }
            let mut q = b.q_comp.transpose() * m * &b.q_comp;
            linalg::symmetrize(&mut q);
            q
        }
        _ => {
            return Err(Error::UnsupportedBasis(
                "basis kind and condensate kind do not match".into(),
            ))
        }
    };
    let out = OperatorMatrix { label: "D".into(), basis_label: basis.label.clone(), mat };
    let min_eig = out.eigenvalues()[0];
    if min_eig <= 0.0 {
        return Err(Error::NonPositiveD { min_eig });
    }
    Ok(out)
}

/// Matrix of Q (8 pi a0 phi^2) Q, the l -> 0 limit of the smeared kernel.
pub fn assemble_k_limit(basis: &Basis, cond: &Condensate) -> Result<OperatorMatrix> {
    let coeff = 8.0 * std::f64::consts::PI * cond.a0();
    let mat = match (&basis.detail, cond) {
        (BasisDetail::Torus(t), Condensate::Torus { .. }) => {
            DMatrix::identity(t.modes.len(), t.modes.len()) * coeff
        }
        (BasisDetail::Radial(r), Condensate::Trapped(state)) => {
            radial_multiplication_matrix(r, &|rad| {
                let p = state.phi_at(rad);
                coeff * p * p
            })
        }
        (BasisDetail::Box(b), Condensate::Trapped(state)) => {
            let w = box_phisq_matrix(b, state);
            let mut q = b.q_comp.transpose() * (w * coeff) * &b.q_comp;
            linalg::symmetrize(&mut q);
            q
        }
        _ => {
            return Err(Error::UnsupportedBasis(
                "basis kind and condensate kind do not match".into(),
            ))
        }
    };
    Ok(OperatorMatrix { label: "K_inf".into(), basis_label: basis.label.clone(), mat })
}

/// Matrix of the smeared interaction Q Ktilde Q,
/// Ktilde(x, y) = N^3 phi(x) eps_{l,N}(x - y) phi(y).
pub fn assemble_k_smeared(
    basis: &Basis,
    cond: &Condensate,
    trunc: &TruncatedScattering,
) -> Result<OperatorMatrix> {
    if trunc.grid.h() > trunc.ell / 16.0 {
        return Err(Error::UnderresolvedKernel(format!(
            "truncation table spacing {} exceeds ell/16 = {}",
            trunc.grid.h(),
            trunc.ell / 16.0
        )));
    }
    let mat = match (&basis.detail, cond) {
        (BasisDetail::Torus(t), Condensate::Torus { .. }) => {
            let n = t.modes.len();
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                m[(i, i)] = trunc.eps_hat(t.momentum(i));
            }
            m
        }
        (BasisDetail::Radial(r), Condensate::Trapped(state)) => {
            // flat part in position space + momentum-space remainder
            let mass = trunc.eps_hat(0.0);
            let mut m = radial_multiplication_matrix(r, &|rad| {
                let p = state.phi_at(rad);
                mass * p * p
            });
            m += radial_kernel_remainder(r, state, &|k| trunc.eps_hat(k) - mass)?;
            linalg::symmetrize(&mut m);
            m
        }
        _ => {
            return Err(Error::UnsupportedBasis(
                "smeared kernels are assembled on torus and radial-channel bases".into(),
            ))
        }
    };
    Ok(OperatorMatrix { label: "K".into(), basis_label: basis.label.clone(), mat })
}

/// Correlation kernel s1 = QxQ stilde1 with
/// stilde1(x, y) = -N omega_{l,N}(x - y) phi(x) phi(y), plus norm
/// diagnostics. Operator norm comes from the assembled matrix; the
/// Hilbert-Schmidt and gradient diagnostics are position-space
/// quadratures of the kernel itself (a truncated mode basis undercounts
/// them badly: the kernel lives at spatial scale ell).
#[derive(Debug, Clone)]
pub struct CorrelationKernel {
    pub n_scale: f64,
    pub ell: f64,
    pub mat: OperatorMatrix,
    pub op_norm: f64,
    pub hs_matrix: f64,
    pub hs_kernel: f64,
    pub grad_hs_bound: f64,
}

pub fn assemble_s1(
    basis: &Basis,
    cond: &Condensate,
    trunc: &TruncatedScattering,
) -> Result<CorrelationKernel> {
    if trunc.grid.h() > trunc.ell / 16.0 {
        return Err(Error::UnderresolvedKernel(format!(
            "truncation table spacing {} exceeds ell/16 = {}",
            trunc.grid.h(),
            trunc.ell / 16.0
        )));
    }
    let mat = match (&basis.detail, cond) {
        (BasisDetail::Torus(t), Condensate::Torus { .. }) => {
            let n = t.modes.len();
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                m[(i, i)] = -trunc.n_omega_hat(t.momentum(i));
            }
            m
        }
        (BasisDetail::Radial(r), Condensate::Trapped(state)) => {
            let mut m = radial_kernel_remainder(r, state, &|k| -trunc.n_omega_hat(k))?;
            linalg::symmetrize(&mut m);
            m
        }
        _ => {
            return Err(Error::UnsupportedBasis(
                "s1 is assembled on torus and radial-channel bases".into(),
            ))
        }
    };
    let op = OperatorMatrix { label: "s1".into(), basis_label: basis.label.clone(), mat };
    let op_norm = linalg::op_norm_sym(&op.mat);
    let hs_matrix = linalg::frobenius(&op.mat);
    let (hs_kernel, grad_hs_bound) = match cond {
        Condensate::Trapped(state) => s1_kernel_norms(state, trunc),
        Condensate::Torus { .. } => (hs_matrix, f64::NAN),
    };
    Ok(CorrelationKernel {
        n_scale: trunc.n_scale,
        ell: trunc.ell,
        mat: op,
        op_norm,
        hs_matrix,
        hs_kernel,
        grad_hs_bound,
    })
}

/// ||stilde1||_{L^2(R^6)} and an upper bound for ||grad_1 stilde1||_{L^2},
/// both by radial convolution quadrature:
///   ||s||^2        = N^2 int (omega^2 * phi^2) phi^2
///   ||grad_1 s||^2 <= 2 N^2 [ int (omega^2 * phi^2) |phi'|^2
///                           + int ((omega')^2 * phi^2) phi^2 ]
fn s1_kernel_norms(state: &GPState, trunc: &TruncatedScattering) -> (f64, f64) {
    let gl = gauss_legendre(48);
    let tg = &trunc.grid;
    let h = tg.h();
    let w = trunc.ell;

    let omega_sq: Vec<f64> = trunc.omega_ln.iter().map(|x| x * x).collect();
    let m_w2 = crate::grid::cumulative_first_moment(0.0, h, &omega_sq);
    let m_w2_spline = Spline::from_uniform(0.0, h, &m_w2);
    let m_w2_sat = m_w2[tg.n];
    let mom_w2 = |t: f64| if t >= w { m_w2_sat } else { m_w2_spline.eval(t) };

    let grad_sq: Vec<f64> = trunc.grad_ln.iter().map(|x| x * x).collect();
    let m_g2 = crate::grid::cumulative_first_moment(0.0, h, &grad_sq);
    let m_g2_spline = Spline::from_uniform(0.0, h, &m_g2);
    let m_g2_sat = m_g2[tg.n];
    let mom_g2 = |t: f64| if t >= w { m_g2_sat } else { m_g2_spline.eval(t) };

    let phi_sq = state.phi_sq_spline();
    let r_box = state.grid.r_max;
    let phi2 = move |s: f64| if s >= r_box { 0.0 } else { phi_sq.eval(s) };

    let gp = &state.grid;
    let hgp = gp.h();
    let n2 = trunc.n_scale * trunc.n_scale;

    // phi' at the nodes by central differences of u: phi = u / (sqrt(4pi) r)
    let sqrt4pi = (4.0 * std::f64::consts::PI).sqrt();
    let phi_prime = |i: usize| -> f64 {
        let r = gp.node(i);
        let du = if i == 0 || i == gp.n {
            0.0
        } else {
            (state.u[i + 1] - state.u[i - 1]) / (2.0 * hgp)
        };
        (du * r - state.u[i]) / (sqrt4pi * r * r)
    };

    let mut acc_hs = vec![0.0; gp.len()];
    let mut acc_grad = vec![0.0; gp.len()];
    for i in 1..=gp.n {
        let r = gp.node(i);
        let conv_w2 = crate::grid::convolve_radial(&mom_w2, w, &phi2, r, &gl);
        let conv_g2 = crate::grid::convolve_radial(&mom_g2, w, &phi2, r, &gl);
        let vol = 4.0 * std::f64::consts::PI * r * r;
        let p2 = state.phi[i] * state.phi[i];
        let pp = phi_prime(i);
        acc_hs[i] = vol * n2 * conv_w2 * p2;
        acc_grad[i] = vol * 2.0 * n2 * (conv_w2 * pp * pp + conv_g2 * p2);
    }
    let hs = crate::grid::trapz(&acc_hs, hgp).max(0.0).sqrt();
    let grad = crate::grid::trapz(&acc_grad, hgp).max(0.0).sqrt();
    (hs, grad)
}

/// Matrix of multiplication by a radial function in a channel basis.
fn radial_multiplication_matrix(
    r: &RadialChannelBasis,
    f: &dyn Fn(f64) -> f64,
) -> DMatrix<f64> {
    let h = r.grid.h();
    let n = r.modes.len();
    let vals: Vec<f64> = (0..=r.grid.n).map(|i| f(r.grid.node(i))).collect();
    let mut m = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let v: f64 = (0..=r.grid.n)
                .map(|i| r.modes[a][i] * vals[i] * r.modes[b][i] * h)
                .sum();
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
    }
    m
}

/// Channel matrix of a radial convolution kernel given its 3D Fourier
/// transform: M_ab = (2/pi) int k^2 khat(k) F_a(k) F_b(k) dk with
/// F_a(k) = int r j_l(k r) phi(r) u_a(r) dr.
fn radial_kernel_remainder(
    r: &RadialChannelBasis,
    state: &GPState,
    khat: &dyn Fn(f64) -> f64,
) -> Result<DMatrix<f64>> {
    if r.grid != state.grid {
        return Err(Error::GridMismatch("basis and state grids differ".into()));
    }
    let h = r.grid.h();
    let nb = r.modes.len();
    let ng = r.grid.n;

    // momentum cutoff from the energy scale of the stored modes
    let (diag, sub) = r.tridiag(state);
    let mode_energy = {
        let apply = |u: &Vec<f64>| -> f64 {
            let mut acc = 0.0;
            for i in 1..ng {
                let mut t = diag[i - 1] * u[i];
                if i > 1 {
                    t += sub[i - 2] * u[i - 1];
                }
                if i < ng - 1 {
                    t += sub[i - 1] * u[i + 1];
                }
                acc += u[i] * t * h;
            }
            acc
        };
        r.modes.iter().map(apply).fold(1.0f64, f64::max)
    };
    let k_max = 3.0 * mode_energy.sqrt() + 25.0;
    let n_k = 384.max((k_max * r.grid.r_max / std::f64::consts::PI * 3.0) as usize);
    let (gx, gw) = gauss_legendre(n_k.min(1200));

    let mut m = DMatrix::zeros(nb, nb);
    let mut f_at_k = vec![0.0; nb];
    for (xi, wi) in gx.iter().zip(&gw) {
        let k = 0.5 * k_max * (xi + 1.0);
        let wk = 0.5 * k_max * wi;
        let kh = khat(k);
        if kh == 0.0 {
            continue;
        }
        for (a, mode) in r.modes.iter().enumerate() {
            let mut acc = 0.0;
            for i in 1..ng {
                let rad = r.grid.node(i);
                acc += rad * state.phi[i] * mode[i] * spherical_jl(r.ell_ang, k * rad) * h;
            }
            f_at_k[a] = acc;
        }
        let weight = 2.0 / std::f64::consts::PI * wk * k * k * kh;
        for a in 0..nb {
            for b in a..nb {
                m[(a, b)] += weight * f_at_k[a] * f_at_k[b];
            }
        }
    }
    for a in 0..nb {
        for b in 0..a {
            m[(a, b)] = m[(b, a)];
        }
    }
    Ok(m)
}

/// Empirical constant of the pointwise s1 bound
/// |s1(x,y) + N phi phi omega_{l,N}(x-y)| <= C l^2 phi(x) phi(y):
/// with g = omega_{l,N} * phi^2, the left side over phi phi equals
/// N |g(x) + g(y) - int phi^2 g|, so
/// C = N max(2 max g - c, c) / l^2 with c = int phi^2 g.
pub fn s1_pointwise_constant(state: &GPState, trunc: &TruncatedScattering) -> f64 {
    let gl = gauss_legendre(48);
    let tg = &trunc.grid;
    let h = tg.h();
    let m = crate::grid::cumulative_first_moment(0.0, h, &trunc.omega_ln);
    let m_spline = Spline::from_uniform(0.0, h, &m);
    let m_sat = m[tg.n];
    let w = trunc.ell;
    let mom = |t: f64| if t >= w { m_sat } else { m_spline.eval(t) };
    let phi_sq = state.phi_sq_spline();
    let r_box = state.grid.r_max;
    let phi2 = move |s: f64| if s >= r_box { 0.0 } else { phi_sq.eval(s) };

    let gp = &state.grid;
    let hgp = gp.h();
    let mut g_max = 0.0f64;
    let mut overlap = vec![0.0; gp.len()];
    for i in 1..=gp.n {
        let r = gp.node(i);
        let g = crate::grid::convolve_radial(&mom, w, &phi2, r, &gl);
        g_max = g_max.max(g);
        overlap[i] = 4.0 * std::f64::consts::PI * r * r * state.phi[i] * state.phi[i] * g;
    }
    let c = crate::grid::trapz(&overlap, hgp);
    let sup = (2.0 * g_max - c).max(c);
    trunc.n_scale * sup / (trunc.ell * trunc.ell)
}

/// <b_a, 8 pi a0 phi^2 b_b> core for the box basis (without the coupling
/// constant), by tensor contraction over Gauss-Legendre axes.
fn box_phisq_matrix(b: &BoxBasis, state: &GPState) -> DMatrix<f64> {
    let m = b.n_modes_axis;
    let nq = 48;
    let (gx, gw) = gauss_legendre(nq);
    let l = b.half_width;
    let xs: Vec<f64> = gx.iter().map(|x| x * l).collect();
    let ws: Vec<f64> = gw.iter().map(|w| w * l).collect();
    // resample the 1D modes onto the quadrature nodes
    let h = b.axis_h();
    let splines: Vec<Spline> = b
        .modes_1d
        .iter()
        .map(|mode| {
            let mut full = vec![0.0; b.n_interior + 2];
            full[1..=b.n_interior].copy_from_slice(mode);
            Spline::from_uniform(-l, h, &full)
        })
        .collect();
    let mv: Vec<Vec<f64>> = splines.iter().map(|s| xs.iter().map(|&x| s.eval(x)).collect()).collect();

    let npairs = m * m;
    // c1[ix][iy][kk'] = sum_z w_z m_k(z) m_k'(z) phi^2
    let mut c1 = vec![vec![vec![0.0; npairs]; nq]; nq];
    for ix in 0..nq {
        for iy in 0..nq {
            for iz in 0..nq {
                let rr = (xs[ix] * xs[ix] + xs[iy] * xs[iy] + xs[iz] * xs[iz]).sqrt();
                let phi = state.phi_at(rr);
                if phi == 0.0 {
                    continue;
                }
                let wphi2 = ws[iz] * phi * phi;
                for k1 in 0..m {
                    for k2 in 0..m {
                        c1[ix][iy][k1 * m + k2] += wphi2 * mv[k1][iz] * mv[k2][iz];
                    }
                }
            }
        }
    }
    // c2[ix][jj'][kk'] = sum_y w_y m_j m_j' c1
    let mut c2 = vec![vec![vec![0.0; npairs]; npairs]; nq];
    for ix in 0..nq {
        for iy in 0..nq {
            for j1 in 0..m {
                for j2 in 0..m {
                    let w = ws[iy] * mv[j1][iy] * mv[j2][iy];
                    if w == 0.0 {
                        continue;
                    }
                    let row = &c1[ix][iy];
                    let dst = &mut c2[ix][j1 * m + j2];
                    for (d, s) in dst.iter_mut().zip(row) {
                        *d += w * s;
                    }
                }
            }
        }
    }
    // core[ii'][jj'][kk'] = sum_x w_x m_i m_i' c2
    let mut core = vec![vec![vec![0.0; npairs]; npairs]; npairs];
    for ix in 0..nq {
        for i1 in 0..m {
            for i2 in 0..m {
                let w = ws[ix] * mv[i1][ix] * mv[i2][ix];
                if w == 0.0 {
                    continue;
                }
                let block = &c2[ix];
                let dst = &mut core[i1 * m + i2];
                for jj in 0..npairs {
                    let src = &block[jj];
                    let d2 = &mut dst[jj];
                    for (d, s) in d2.iter_mut().zip(src) {
                        *d += w * s;
                    }
                }
            }
        }
    }
    let full = b.tensor.len();
    let mut out = DMatrix::zeros(full, full);
    for (a, ta) in b.tensor.iter().enumerate() {
        for (bb, tb) in b.tensor.iter().enumerate().skip(a) {
            let v = core[ta[0] * m + tb[0]][ta[1] * m + tb[1]][ta[2] * m + tb[2]];
            out[(a, bb)] = v;
            out[(bb, a)] = v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{minimize_gp, ExternalPotential};
    use crate::scattering::{solve_scattering, truncate_scattering, ChiProfile, RadialPotential};
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;

    fn harmonic_state(a0: f64) -> GPState {
        minimize_gp(&ExternalPotential::Harmonic, a0, 7.0, 1024, 1e-9).unwrap()
    }

    fn soft_sphere_trunc(ell: f64, n_scale: f64) -> crate::scattering::TruncatedScattering {
        let v = RadialPotential::soft_sphere(1.0, 2.0, 6.0, 8192).unwrap();
        let sol = solve_scattering(&v, 6.0, 8192).unwrap();
        truncate_scattering(&sol, ell, n_scale, ChiProfile::Smoothstep, 4096).unwrap()
    }

    #[test]
    fn torus_mode_count_at_first_shell() {
        let b = build_basis_torus(2.0 * std::f64::consts::PI).unwrap();
        assert_eq!(b.dim(), 6);
    }

    #[test]
    fn torus_d_is_diagonal_momentum_squared() {
        let b = build_basis_torus(3.0 * 2.0 * std::f64::consts::PI).unwrap();
        let d = assemble_d(&b, &Condensate::Torus { a0: 0.1 }).unwrap();
        if let BasisDetail::Torus(t) = &b.detail {
            for i in 0..b.dim() {
                let p = t.momentum(i);
                assert_relative_eq!(d.mat[(i, i)], p * p, max_relative = 1e-14);
            }
        }
        assert!(d.symmetry_defect() < 1e-15);
    }

    #[test]
    fn radial_channel_basis_is_orthonormal_and_q_projected() {
        let state = harmonic_state(0.1);
        let b = build_basis_radial_channel(&state, 0, 12).unwrap();
        assert!(b.gram_defect() < 1e-10, "gram defect {}", b.gram_defect());
        let overlap = b.phi_overlap_max().unwrap();
        assert!(overlap < 1e-10, "phi overlap {}", overlap);
        // independent Gram-Schmidt oracle on the same grid reaches the
        // same orthonormality floor
        let h = state.grid.h();
        let mut oracle: Vec<Vec<f64>> = Vec::new();
        let seed = [&state.u]
            .into_iter()
            .cloned()
            .chain((1..=8).map(|k| {
                state
                    .grid
                    .nodes()
                    .iter()
                    .map(|&r| r.powi(k) * (-r * r / 2.0).exp())
                    .collect::<Vec<f64>>()
            }))
            .collect::<Vec<_>>();
        for mut v in seed {
            // two Gram-Schmidt passes to hold orthogonality near round-off
            for _ in 0..2 {
                for prev in &oracle {
                    let o: f64 = v.iter().zip(prev).map(|(a, b)| a * b * h).sum();
                    for (x, p) in v.iter_mut().zip(prev) {
                        *x -= o * p;
                    }
                }
            }
            let nrm = (v.iter().map(|x| x * x).sum::<f64>() * h).sqrt();
            for x in v.iter_mut() {
                *x /= nrm;
            }
            oracle.push(v);
        }
        for a in 1..oracle.len() {
            let dot: f64 = oracle[a].iter().zip(&state.u).map(|(x, y)| x * y * h).sum();
            assert!(dot.abs() < 1e-10);
        }
    }

    #[test]
    fn box_basis_dimension_drops_by_one_under_projection() {
        let state = harmonic_state(0.0);
        let b = build_basis_box(&state, 8, 6.5, 256).unwrap();
        if let BasisDetail::Box(bx) = &b.detail {
            assert_eq!(bx.tensor.len(), 512);
        }
        assert_eq!(b.dim(), 511);
        assert!(b.gram_defect() < 1e-10);
        assert!(b.phi_overlap_max().unwrap() < 1e-10);
    }

    #[test]
    fn harmonic_d_spectrum_without_interaction() {
        let state = harmonic_state(0.0);
        // channel 1: oscillator levels 5, 9, ... minus mu = 3 -> 2, 6, ...
        let b1 = build_basis_radial_channel(&state, 1, 10).unwrap();
        let d1 = assemble_d(&b1, &Condensate::Trapped(&state)).unwrap();
        let e1 = d1.eigenvalues();
        assert_relative_eq!(e1[0], 2.0, epsilon = 2e-4);
        assert_relative_eq!(e1[1], 6.0, epsilon = 1e-3);
        // channel 0 with the ground mode removed: 4, 8, ...
        let b0 = build_basis_radial_channel(&state, 0, 10).unwrap();
        let d0 = assemble_d(&b0, &Condensate::Trapped(&state)).unwrap();
        let e0 = d0.eigenvalues();
        assert_relative_eq!(e0[0], 4.0, epsilon = 1e-3);
    }

    #[test]
    fn d_positivity_on_random_q_vectors() {
        let state = harmonic_state(0.05);
        let b = build_basis_radial_channel(&state, 0, 14).unwrap();
        let d = assemble_d(&b, &Condensate::Trapped(&state)).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = d.dim();
        for _ in 0..20 {
            let v = DVector::from_iterator(n, (0..n).map(|_| rng.random_range(-1.0..1.0)));
            let q = v.dot(&(&d.mat * &v));
            assert!(q > 0.0);
        }
        // cross-check with the full eigensolve
        assert!(d.eigenvalues()[0] > 0.0);
    }

    #[test]
    fn k_limit_torus_and_zero_coupling() {
        let b = build_basis_torus(2.0 * std::f64::consts::PI).unwrap();
        let k = assemble_k_limit(&b, &Condensate::Torus { a0: 0.1 }).unwrap();
        for i in 0..b.dim() {
            assert_relative_eq!(k.mat[(i, i)], 0.8 * std::f64::consts::PI, max_relative = 1e-14);
        }
        let state = harmonic_state(0.0);
        let br = build_basis_radial_channel(&state, 0, 8).unwrap();
        let kr = assemble_k_limit(&br, &Condensate::Trapped(&state)).unwrap();
        assert!(linalg::max_abs(&kr.mat) < 1e-14);
    }

    #[test]
    fn k_limit_trace_matches_quadrature_oracle() {
        let state = harmonic_state(0.1);
        let b = build_basis_radial_channel(&state, 0, 12).unwrap();
        let k = assemble_k_limit(&b, &Condensate::Trapped(&state)).unwrap();
        // oracle: sum_j <b_j, 8 pi a0 phi^2 b_j> by direct quadrature
        if let BasisDetail::Radial(r) = &b.detail {
            let h = r.grid.h();
            let mut trace = 0.0;
            for mode in &r.modes {
                let mut acc = 0.0;
                for i in 0..=r.grid.n {
                    let rad = r.grid.node(i);
                    let p = state.phi_at(rad);
                    acc += mode[i] * 8.0 * std::f64::consts::PI * 0.1 * p * p * mode[i] * h;
                }
                trace += acc;
            }
            assert_relative_eq!(k.mat.trace(), trace, max_relative = 1e-10);
        }
        // positive semidefinite
        let min = k.eigenvalues()[0];
        assert!(min >= -1e-10 * linalg::op_norm_sym(&k.mat));
    }

    #[test]
    fn k_smeared_torus_matches_radial_fourier_oracle() {
        let trunc = soft_sphere_trunc(0.25, 64.0);
        let b = build_basis_torus(2.0 * 2.0 * std::f64::consts::PI).unwrap();
        let k = assemble_k_smeared(&b, &Condensate::Torus { a0: trunc.a0 }, &trunc).unwrap();
        if let BasisDetail::Torus(t) = &b.detail {
            for i in 0..b.dim() {
                let p = t.momentum(i);
                // independent quadrature: trapezoid on the full table
                // rather than the shell-split Simpson used in production
                let h = trunc.grid.h();
                let vals: Vec<f64> = (0..=trunc.grid.n)
                    .map(|j| {
                        let r = trunc.grid.node(j);
                        let j0 = if p * r < 1e-8 { 1.0 } else { (p * r).sin() / (p * r) };
                        4.0 * std::f64::consts::PI
                            * r
                            * r
                            * trunc.n_scale.powi(3)
                            * trunc.eps_ln[j]
                            * j0
                    })
                    .collect();
                let oracle = crate::grid::trapz(&vals, h);
                assert_relative_eq!(k.mat[(i, i)], oracle, max_relative = 1e-5, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn k_smeared_zero_potential_is_zero() {
        let v = RadialPotential::zero(4.0, 1024).unwrap();
        let sol = solve_scattering(&v, 4.0, 1024).unwrap();
        let trunc = truncate_scattering(&sol, 0.25, 64.0, ChiProfile::Smoothstep, 1024).unwrap();
        let state = harmonic_state(0.0);
        let b = build_basis_radial_channel(&state, 0, 8).unwrap();
        let k = assemble_k_smeared(&b, &Condensate::Trapped(&state), &trunc).unwrap();
        assert!(linalg::max_abs(&k.mat) < 1e-10);
    }

    #[test]
    fn k_smeared_converges_to_k_limit_in_operator_norm() {
        let state = harmonic_state(0.238405844);
        let b = build_basis_radial_channel(&state, 0, 10).unwrap();
        let k_inf = assemble_k_limit(&b, &Condensate::Trapped(&state)).unwrap();
        let mut gaps = Vec::new();
        let ells = [0.32, 0.16, 0.08];
        for &ell in &ells {
            let trunc = soft_sphere_trunc(ell, 512.0);
            let k = assemble_k_smeared(&b, &Condensate::Trapped(&state), &trunc).unwrap();
            gaps.push(linalg::op_norm_sym(&(&k.mat - &k_inf.mat)));
        }
        let alpha = crate::grid::fit_power_law(&ells, &gaps).unwrap();
        assert!((alpha - 2.0).abs() < 0.3, "operator norm gap exponent {}", alpha);
    }

    #[test]
    fn s1_scalings_match_the_kernel_bounds() {
        // op norm ~ l^2 (in the matrix), HS ~ l^(1/2) (kernel quadrature)
        let state = harmonic_state(0.238405844);
        let b = build_basis_radial_channel(&state, 0, 10).unwrap();
        let ells = [0.4, 0.2, 0.1];
        let mut ops = Vec::new();
        let mut hss = Vec::new();
        for &ell in &ells {
            let trunc = soft_sphere_trunc(ell, 512.0);
            let s = assemble_s1(&b, &Condensate::Trapped(&state), &trunc).unwrap();
            ops.push(s.op_norm);
            hss.push(s.hs_kernel);
        }
        let a_op = crate::grid::fit_power_law(&ells, &ops).unwrap();
        let a_hs = crate::grid::fit_power_law(&ells, &hss).unwrap();
        assert!((a_op - 2.0).abs() < 0.2, "op-norm exponent {}", a_op);
        assert!((a_hs - 0.5).abs() < 0.2, "HS exponent {}", a_hs);
    }

    #[test]
    fn s1_pointwise_bound_constant_is_stable() {
        let state = harmonic_state(0.238405844);
        let mut cs = Vec::new();
        for &(ell, nn) in &[(0.4, 64.0), (0.2, 128.0), (0.1, 256.0)] {
            let trunc = soft_sphere_trunc(ell, nn);
            cs.push(s1_pointwise_constant(&state, &trunc));
        }
        let cmax = cs.iter().cloned().fold(0.0f64, f64::max);
        let cmin = cs.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(cmax / cmin < 3.0, "pointwise constants {:?}", cs);
    }

    #[test]
    fn s1_is_symmetric_and_zero_for_zero_potential() {
        let v = RadialPotential::zero(4.0, 1024).unwrap();
        let sol = solve_scattering(&v, 4.0, 1024).unwrap();
        let trunc = truncate_scattering(&sol, 0.25, 64.0, ChiProfile::Smoothstep, 1024).unwrap();
        let state = harmonic_state(0.1);
        let b = build_basis_radial_channel(&state, 0, 8).unwrap();
        let s = assemble_s1(&b, &Condensate::Trapped(&state), &trunc).unwrap();
        assert!(linalg::max_abs(&s.mat.mat) < 1e-12);
        assert!(s.mat.symmetry_defect() < 1e-12);
    }

    #[test]
    fn d_eigenvalues_agree_between_radial_and_box_bases() {
        let state = harmonic_state(0.0);
        let mut radial_levels = Vec::new();
        for ch in 0..=2 {
            let b = build_basis_radial_channel(&state, ch, 8).unwrap();
            let d = assemble_d(&b, &Condensate::Trapped(&state)).unwrap();
            for e in d.eigenvalues().into_iter().take(4) {
                for _ in 0..(2 * ch + 1) {
                    radial_levels.push(e);
                }
            }
        }
        radial_levels.sort_by(|a, b| a.partial_cmp(b).unwrap());

        let bb = build_basis_box(&state, 6, 6.0, 1400).unwrap();
        let db = assemble_d(&bb, &Condensate::Trapped(&state)).unwrap();
        let box_levels = db.eigenvalues();
        for i in 0..5 {
            assert!(
                (radial_levels[i] - box_levels[i]).abs() < 1e-4,
                "level {}: radial {} vs box {}",
                i,
                radial_levels[i],
                box_levels[i]
            );
        }
    }

    #[test]
    fn smeared_kernel_rejects_mismatched_basis() {
        let trunc = soft_sphere_trunc(0.25, 64.0);
        let state = harmonic_state(0.0);
        let bb = build_basis_box(&state, 4, 6.5, 128).unwrap();
        let err = assemble_k_smeared(&bb, &Condensate::Trapped(&state), &trunc);
        assert!(matches!(err, Err(Error::UnsupportedBasis(_))));
    }
}
