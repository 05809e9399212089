//! Truncated bosonic Fock space: ladder operators, second quantization,
//! quadratic Hamiltonians with pairing, explicit Bogoliubov unitaries,
//! and exact diagonalization used as an oracle for the one-body
//! diagonalization identity.
//!
//! Truncation convention: creation matrix elements that would push the
//! total occupation past n_max are dropped (hard wall); the leakage this
//! causes is measured by the tests, never assumed away.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::basis::OperatorMatrix;
use crate::bogoliubov;
use crate::error::{Error, Result};
use crate::linalg;
use crate::spectrum;

/// All occupation tuples (n_1, ..., n_m) with sum <= n_max, graded by
/// total occupation and lexicographic within a sector.
#[derive(Debug, Clone)]
pub struct FockSpace {
    pub m: usize,
    pub n_max: u32,
    pub states: Vec<Vec<u32>>,
    index: BTreeMap<Vec<u32>, usize>,
    /// first state index of each total-occupation sector 0..=n_max
    pub sector_offsets: Vec<usize>,
}

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    let mut out: usize = 1;
    for i in 0..k {
        out = out * (n - i) / (i + 1);
    }
    out
}

impl FockSpace {
    pub fn new(m: usize, n_max: u32) -> Result<Self> {
        if m == 0 {
            return Err(Error::Parse("mode count must be positive".into()));
        }
        let dim = binomial(m + n_max as usize, m);
        const DIM_LIMIT: usize = 2_000_000;
        if dim > DIM_LIMIT {
            return Err(Error::DimensionOverflow { what: "fock dimension", got: dim, limit: DIM_LIMIT });
        }
        let mut states = Vec::with_capacity(dim);
        let mut sector_offsets = Vec::with_capacity(n_max as usize + 1);
        let mut tuple = vec![0u32; m];
        for total in 0..=n_max {
            sector_offsets.push(states.len());
            fill_sector(m, total, 0, total, &mut tuple, &mut states);
        }
        let index: BTreeMap<Vec<u32>, usize> =
            states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        debug_assert_eq!(states.len(), dim);
        Ok(Self { m, n_max, states, index, sector_offsets })
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn index_of(&self, occ: &[u32]) -> Option<usize> {
        self.index.get(occ).copied()
    }

    pub fn total_occupation(&self, idx: usize) -> u32 {
        self.states[idx].iter().sum()
    }
}

fn fill_sector(
    m: usize,
    total: u32,
    mode: usize,
    remaining: u32,
    tuple: &mut Vec<u32>,
    out: &mut Vec<Vec<u32>>,
) {
    if mode == m - 1 {
        tuple[mode] = remaining;
        out.push(tuple.clone());
        return;
    }
    for n in 0..=remaining {
        tuple[mode] = n;
        fill_sector(m, total, mode + 1, remaining - n, tuple, out);
    }
    tuple[mode] = 0;
    let _ = total;
}

/// Column-sparse operator on a Fock space (entries per column).
#[derive(Debug, Clone)]
pub struct SparseOp {
    pub dim: usize,
    pub cols: Vec<Vec<(usize, f64)>>,
}

impl SparseOp {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, cols: vec![Vec::new(); dim] }
    }

    pub fn nnz(&self) -> usize {
        self.cols.iter().map(|c| c.len()).sum()
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.dim);
        for (j, col) in self.cols.iter().enumerate() {
            for &(i, v) in col {
                out.cols[i].push((j, v));
            }
        }
        for col in out.cols.iter_mut() {
            col.sort_by_key(|e| e.0);
        }
        out
    }

    pub fn add_entry(&mut self, row: usize, col: usize, v: f64) {
        if v == 0.0 {
            return;
        }
        let c = &mut self.cols[col];
        match c.binary_search_by_key(&row, |e| e.0) {
            Ok(pos) => c[pos].1 += v,
            Err(pos) => c.insert(pos, (row, v)),
        }
    }

    pub fn scaled_add(&mut self, other: &SparseOp, factor: f64) {
        for (j, col) in other.cols.iter().enumerate() {
            for &(i, v) in col {
                self.add_entry(i, j, factor * v);
            }
        }
    }

    /// self * other (sparse product; cheap here because ladder operators
    /// carry at most one entry per column).
    pub fn matmul(&self, other: &SparseOp) -> Self {
        let mut out = Self::zeros(self.dim);
        for (j, col) in other.cols.iter().enumerate() {
            for &(k, v) in col {
                for &(i, w) in &self.cols[k] {
                    out.add_entry(i, j, v * w);
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (j, col) in self.cols.iter().enumerate() {
            for &(i, v) in col {
                m[(i, j)] += v;
            }
        }
        m
    }

    pub fn max_abs_diff(&self, other: &SparseOp) -> f64 {
        let mut worst = 0.0f64;
        let a = self.to_dense();
        let b = other.to_dense();
        for (x, y) in a.iter().zip(b.iter()) {
            worst = worst.max((x - y).abs());
        }
        worst
    }
}

/// Creation operators a_i^dagger for every mode (annihilators are the
/// exact transposes).
pub fn build_ladder(space: &FockSpace) -> Result<Vec<SparseOp>> {
    const NNZ_LIMIT: usize = 200_000;
    let mut ops = Vec::with_capacity(space.m);
    for mode in 0..space.m {
        let mut op = SparseOp::zeros(space.dim());
        for (j, occ) in space.states.iter().enumerate() {
            let total: u32 = occ.iter().sum();
            if total + 1 > space.n_max {
                continue; // hard-wall truncation
            }
            let mut target = occ.clone();
            target[mode] += 1;
            let i = space.index_of(&target).expect("in-range state");
            op.cols[j].push((i, ((occ[mode] + 1) as f64).sqrt()));
        }
        if op.nnz() > NNZ_LIMIT {
            return Err(Error::DimensionOverflow {
                what: "ladder nonzeros",
                got: op.nnz(),
                limit: NNZ_LIMIT,
            });
        }
        ops.push(op);
    }
    Ok(ops)
}

/// dGamma(A) = sum_ij A_ij a_i^dagger a_j, built directly on the
/// occupation basis (exactly block diagonal in the total occupation).
pub fn second_quantize(space: &FockSpace, a: &DMatrix<f64>) -> Result<SparseOp> {
    if a.nrows() != space.m || a.ncols() != space.m {
        return Err(Error::GridMismatch(format!(
            "one-body matrix is {}x{}, space has {} modes",
            a.nrows(),
            a.ncols(),
            space.m
        )));
    }
    let mut op = SparseOp::zeros(space.dim());
    for (col, occ) in space.states.iter().enumerate() {
        for j in 0..space.m {
            if occ[j] == 0 {
                continue;
            }
            for i in 0..space.m {
                let aij = a[(i, j)];
                if aij == 0.0 {
                    continue;
                }
                if i == j {
                    op.add_entry(col, col, aij * occ[j] as f64);
                } else {
                    let mut target = occ.clone();
                    target[j] -= 1;
                    target[i] += 1;
                    let row = space.index_of(&target).expect("number conserving");
                    let amp = (occ[j] as f64).sqrt() * ((occ[i] + 1) as f64).sqrt();
                    op.add_entry(row, col, aij * amp);
                }
            }
        }
    }
    Ok(op)
}

/// dGamma(D) + dGamma(K) + 1/2 sum_ij K_ij (a_i^+ a_j^+ + a_i a_j) as a
/// dense symmetric matrix.
pub struct QuadraticHamiltonian {
    pub space: FockSpace,
    pub d: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub matrix: DMatrix<f64>,
}

impl QuadraticHamiltonian {
    pub fn assemble(space: FockSpace, d: &DMatrix<f64>, k: &DMatrix<f64>) -> Result<Self> {
        let m = space.m;
        if d.nrows() != m || k.nrows() != m {
            return Err(Error::GridMismatch("D/K size does not match mode count".into()));
        }
        let number_part = {
            let mut sum = d + k;
            linalg::symmetrize(&mut sum);
            second_quantize(&space, &sum)?
        };
        let mut h = number_part;
        // pairing: 1/2 sum K_ij a_i^+ a_j^+, plus its transpose
        let mut raise = SparseOp::zeros(space.dim());
        for (col, occ) in space.states.iter().enumerate() {
            let total: u32 = occ.iter().sum();
            if total + 2 > space.n_max {
                continue;
            }
            for i in 0..m {
                for j in 0..m {
                    let kij = k[(i, j)];
                    if kij == 0.0 {
                        continue;
                    }
                    let mut target = occ.clone();
                    let amp_j = ((target[j] + 1) as f64).sqrt();
                    target[j] += 1;
                    let amp_i = ((target[i] + 1) as f64).sqrt();
                    target[i] += 1;
                    let row = space.index_of(&target).expect("in range");
                    raise.add_entry(row, col, 0.5 * kij * amp_i * amp_j);
                }
            }
        }
        let lower = raise.transpose();
        h.scaled_add(&raise, 1.0);
        h.scaled_add(&lower, 1.0);
        let matrix = h.to_dense();
        Ok(Self { space, d: d.clone(), k: k.clone(), matrix })
    }
}

/// Lowest eigenvalues of the assembled Hamiltonian.
pub fn brute_force_spectrum(h: &QuadraticHamiltonian, n_levels: usize) -> Result<Vec<f64>> {
    const DENSE_LIMIT: usize = 3000;
    let dim = h.space.dim();
    if dim > DENSE_LIMIT {
        return Err(Error::DimensionOverflow { what: "dense eigensolve", got: dim, limit: DENSE_LIMIT });
    }
    let vals = linalg::sym_eigenvalues(&h.matrix);
    Ok(vals.into_iter().take(n_levels).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub n_max_values: Vec<u32>,
    pub deviations: Vec<f64>,
    pub predicted_levels: Vec<f64>,
    pub monotone: bool,
}

/// Compare the brute-force spectrum of the quadratic Hamiltonian with the
/// one-body prediction { sum_i n_i e_i - 1/2 Tr(D + K - E) } over a list
/// of truncation cutoffs.
pub fn verify_bogoliubov_identity(
    d: &DMatrix<f64>,
    k: &DMatrix<f64>,
    n_max_list: &[u32],
    n_levels: usize,
) -> Result<IdentityReport> {
    let m = d.nrows();
    if m > 4 {
        return Err(Error::DimensionOverflow { what: "modes", got: m, limit: 4 });
    }
    let dop = OperatorMatrix { label: "D".into(), basis_label: "fock".into(), mat: d.clone() };
    let kop = OperatorMatrix { label: "K".into(), basis_label: "fock".into(), mat: k.clone() };
    let (e, evals) = bogoliubov::build_e(&dop, &kop)?;
    let (shift, _) = bogoliubov::ground_energy_constant(&dop, &kop, &e)?;
    // enough sums to cover the requested level count
    let cap = evals[0] * (n_levels as f64 + 1.0) + evals.last().unwrap() + 1.0;
    let rep = spectrum::excitation_spectrum(&evals, cap, "fock oracle")?;
    let predicted: Vec<f64> =
        rep.flattened().iter().take(n_levels).map(|v| v + shift).collect();
    if predicted.len() < n_levels {
        return Err(Error::Parse("prediction cap too small for requested levels".into()));
    }

    let mut deviations = Vec::with_capacity(n_max_list.len());
    for &n_max in n_max_list {
        let space = FockSpace::new(m, n_max)?;
        let h = QuadraticHamiltonian::assemble(space, d, k)?;
        let got = brute_force_spectrum(&h, n_levels)?;
        let dev = got
            .iter()
            .zip(&predicted)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        deviations.push(dev);
    }
    let monotone = deviations.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-12);
    if !monotone {
        return Err(Error::NonConvergentTruncation);
    }
    Ok(IdentityReport {
        n_max_values: n_max_list.to_vec(),
        deviations,
        predicted_levels: predicted,
        monotone,
    })
}

/// T = exp( 1/2 sum_ij k_ij (a_i^+ a_j^+ - a_i a_j) ) on the truncated
/// space, by scaling and squaring. The generator is exactly
/// antisymmetric, so T is orthogonal up to the series truncation; the
/// orthogonality defect is monitored, hard-wall leakage is the caller's
/// concern (see `unitary_leakage`).
pub fn bogoliubov_unitary(space: &FockSpace, k_gen: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = space.m;
    if k_gen.nrows() != m || k_gen.ncols() != m {
        return Err(Error::GridMismatch("generator size does not match mode count".into()));
    }
    let ladders = build_ladder(space)?;
    let mut gen = SparseOp::zeros(space.dim());
    for i in 0..m {
        for j in 0..m {
            let kij = k_gen[(i, j)];
            if kij == 0.0 {
                continue;
            }
            let raise = ladders[i].matmul(&ladders[j]);
            gen.scaled_add(&raise, 0.5 * kij);
            let lower = raise.transpose();
            gen.scaled_add(&lower, -0.5 * kij);
        }
    }
    let g = gen.to_dense();
    let t = expm(&g);
    // orthogonality defect of the truncated exponential
    let n = t.nrows();
    let defect = linalg::max_abs(&(t.transpose() * &t - DMatrix::identity(n, n)));
    if defect > 1e-8 {
        return Err(Error::TruncationLeak { leakage: defect });
    }
    Ok(t)
}

/// Norm that T moves out of the low sectors into the top two truncation
/// sectors: max over basis states with total occupation <= n_low of
/// || P_top T psi ||.
pub fn unitary_leakage(space: &FockSpace, t: &DMatrix<f64>, n_low: u32) -> f64 {
    let top_start = space.sector_offsets[(space.n_max as usize).saturating_sub(1)];
    let mut worst = 0.0f64;
    for (j, occ) in space.states.iter().enumerate() {
        let total: u32 = occ.iter().sum();
        if total > n_low {
            continue;
        }
        let mut mass = 0.0;
        for i in top_start..space.dim() {
            mass += t[(i, j)] * t[(i, j)];
        }
        worst = worst.max(mass.sqrt());
    }
    worst
}

/// Matrix exponential by scaling and squaring with a Taylor core.
fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.iter().map(|v| v.abs()).fold(0.0f64, f64::max) * n as f64;
    let s = norm.log2().ceil().max(0.0) as u32 + 1;
    let scaled = a / 2f64.powi(s as i32);
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = DMatrix::<f64>::identity(n, n);
    for k in 1..60 {
        term = &term * &scaled / k as f64;
        sum += &term;
        if linalg::max_abs(&term) < 1e-18 {
            break;
        }
    }
    let mut out = sum;
    for _ in 0..s {
        out = &out * &out;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;

    #[test]
    fn dimension_matches_binomial_and_roundtrip_is_exact() {
        let space = FockSpace::new(3, 5).unwrap();
        assert_eq!(space.dim(), binomial(8, 3));
        for (i, occ) in space.states.iter().enumerate() {
            assert_eq!(space.index_of(occ), Some(i));
        }
        // graded ordering: totals nondecreasing
        for w in space.states.windows(2) {
            let ta: u32 = w[0].iter().sum();
            let tb: u32 = w[1].iter().sum();
            assert!(ta <= tb);
        }
    }

    #[test]
    fn single_mode_ladder_actions() {
        let space = FockSpace::new(1, 2).unwrap();
        let adag = &build_ladder(&space).unwrap()[0];
        let dense = adag.to_dense();
        let i0 = space.index_of(&[0]).unwrap();
        let i1 = space.index_of(&[1]).unwrap();
        let i2 = space.index_of(&[2]).unwrap();
        assert_eq!(dense[(i1, i0)], 1.0);
        assert_relative_eq!(dense[(i2, i1)], 2.0f64.sqrt());
        // |2> is annihilated by a^+ under the hard wall
        assert!(dense.column(i2).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ccr_exact_on_interior_sectors() {
        let space = FockSpace::new(3, 4).unwrap();
        let ladders = build_ladder(&space).unwrap();
        let interior_end = space.sector_offsets[4]; // states with total <= 3
        for i in 0..3 {
            for j in 0..3 {
                let a_i = ladders[i].transpose();
                let comm = a_i.matmul(&ladders[j]).to_dense() - ladders[j].matmul(&a_i).to_dense();
                for col in 0..interior_end {
                    for row in 0..space.dim() {
                        let expect = if i == j && row == col { 1.0 } else { 0.0 };
                        assert!(
                            (comm[(row, col)] - expect).abs() < 1e-12,
                            "CCR defect at ({row},{col}): {}",
                            comm[(row, col)]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn number_operator_is_diagonal_total_occupation() {
        let space = FockSpace::new(2, 3).unwrap();
        let n_op = second_quantize(&space, &DMatrix::identity(2, 2)).unwrap().to_dense();
        for (idx, occ) in space.states.iter().enumerate() {
            let total: u32 = occ.iter().sum();
            assert_eq!(n_op[(idx, idx)], total as f64);
        }
        assert_eq!(n_op.iter().filter(|&&v| v != 0.0).count(), space.dim() - 1); // vacuum has 0
    }

    #[test]
    fn second_quantize_matches_ladder_products() {
        let space = FockSpace::new(2, 3).unwrap();
        let ladders = build_ladder(&space).unwrap();
        let a = DMatrix::from_row_slice(2, 2, &[0.7, 0.2, 0.2, -0.4]);
        let direct = second_quantize(&space, &a).unwrap();
        let mut from_ladders = SparseOp::zeros(space.dim());
        for i in 0..2 {
            for j in 0..2 {
                let prod = ladders[i].matmul(&ladders[j].transpose());
                from_ladders.scaled_add(&prod, a[(i, j)]);
            }
        }
        assert!(direct.max_abs_diff(&from_ladders) < 1e-12);
    }

    #[test]
    fn diagonal_second_quantization_spectrum_is_exhaustive_sums() {
        let space = FockSpace::new(3, 3).unwrap();
        let d = [0.9, 1.7, 2.3];
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&d));
        let op = second_quantize(&space, &a).unwrap().to_dense();
        // block diagonal in the total occupation, diagonal here
        let mut expected: Vec<f64> = space
            .states
            .iter()
            .map(|occ| occ.iter().zip(&d).map(|(&n, &e)| n as f64 * e).sum())
            .collect();
        let mut got: Vec<f64> = (0..space.dim()).map(|i| op[(i, i)]).collect();
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (g, e) in got.iter().zip(&expected) {
            assert_relative_eq!(g, e, epsilon = 1e-13);
        }
        // ground eigenvalue on sector k is k * min spec
        for k in 0..=3u32 {
            let lo = space.sector_offsets[k as usize];
            let hi = space
                .sector_offsets
                .get(k as usize + 1)
                .copied()
                .unwrap_or(space.dim());
            let min_diag =
                (lo..hi).map(|i| op[(i, i)]).fold(f64::INFINITY, f64::min);
            assert_relative_eq!(min_diag, k as f64 * 0.9, epsilon = 1e-13);
        }
    }

    #[test]
    fn dgamma_is_additive_and_sector_preserving() {
        let space = FockSpace::new(3, 3).unwrap();
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, 0.0, 0.3, 2.0, -0.1, 0.0, -0.1, 0.5]);
        let b = DMatrix::from_row_slice(3, 3, &[0.2, 0.0, 0.4, 0.0, -1.0, 0.0, 0.4, 0.0, 1.5]);
        let lhs = second_quantize(&space, &(&a + &b)).unwrap();
        let mut rhs = second_quantize(&space, &a).unwrap();
        rhs.scaled_add(&second_quantize(&space, &b).unwrap(), 1.0);
        assert!(lhs.max_abs_diff(&rhs) < 1e-13);
        // no matrix elements between different sectors
        let dense = lhs.to_dense();
        for (i, si) in space.states.iter().enumerate() {
            for (j, sj) in space.states.iter().enumerate() {
                let (ti, tj): (u32, u32) = (si.iter().sum(), sj.iter().sum());
                if ti != tj {
                    assert_eq!(dense[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn pairing_free_spectrum_is_exact_sums() {
        let space = FockSpace::new(2, 4).unwrap();
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&[1.0, 2.5]));
        let h = QuadraticHamiltonian::assemble(space, &d, &DMatrix::zeros(2, 2)).unwrap();
        let got = brute_force_spectrum(&h, 6).unwrap();
        // sums n1*1.0 + n2*2.5 with n1+n2 <= 4: 0, 1, 2, 2.5, 3, 3.5
        let expect = [0.0, 1.0, 2.0, 2.5, 3.0, 3.5];
        for (g, e) in got.iter().zip(&expect) {
            assert_relative_eq!(g, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn one_mode_identity_converges_to_closed_forms() {
        let d = DMatrix::from_element(1, 1, 1.0);
        let k = DMatrix::from_element(1, 1, 0.3);
        let rep = verify_bogoliubov_identity(&d, &k, &[10, 20, 30, 40], 8).unwrap();
        assert!(rep.monotone);
        assert!(*rep.deviations.last().unwrap() < 1e-8, "deviations {:?}", rep.deviations);
        // ground and gap against the scalar closed forms
        let space = FockSpace::new(1, 40).unwrap();
        let h = QuadraticHamiltonian::assemble(space, &d, &k).unwrap();
        let got = brute_force_spectrum(&h, 2).unwrap();
        assert_relative_eq!(got[0], -0.0175444679663241, epsilon = 1e-9);
        assert_relative_eq!(got[1] - got[0], 1.2649110640673518, epsilon = 1e-9);
    }

    #[test]
    fn zero_pairing_identity_is_exact_at_any_cutoff() {
        let d = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 2.0]);
        let k = DMatrix::zeros(2, 2);
        let rep = verify_bogoliubov_identity(&d, &k, &[3, 5, 8], 5).unwrap();
        assert!(rep.deviations.iter().all(|&d| d < 1e-12), "{:?}", rep.deviations);
    }

    #[test]
    fn swap_coupled_two_mode_identity() {
        let d = DMatrix::identity(2, 2);
        let k = DMatrix::from_row_slice(2, 2, &[0.0, 0.2, 0.2, 0.0]);
        let rep = verify_bogoliubov_identity(&d, &k, &[10, 20, 30], 8).unwrap();
        assert!(*rep.deviations.last().unwrap() < 1e-6, "deviations {:?}", rep.deviations);
    }

    #[test]
    fn three_mode_random_admissible_identity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        // D: random SPD with spectrum in [1, 2]; K symmetric, |K| <= 0.2
        let m = 3;
        let mut q = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                q[(i, j)] = rng.random_range(-1.0..1.0);
            }
        }
        let qr = q.qr();
        let orth = qr.q();
        let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&[1.0, 1.4, 2.0]));
        let mut d = &orth * lam * orth.transpose();
        linalg::symmetrize(&mut d);
        let mut k = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let v = rng.random_range(-1.0..1.0);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        let knorm = linalg::op_norm_sym(&k);
        k *= 0.2 / knorm;
        let rep = verify_bogoliubov_identity(&d, &k, &[6, 9, 12], 8).unwrap();
        assert!(rep.monotone);
        assert!(*rep.deviations.last().unwrap() < 1e-6, "deviations {:?}", rep.deviations);
    }

    #[test]
    fn unitary_is_identity_for_zero_generator() {
        let space = FockSpace::new(1, 10).unwrap();
        let t = bogoliubov_unitary(&space, &DMatrix::zeros(1, 1)).unwrap();
        assert!(linalg::max_abs(&(&t - DMatrix::identity(space.dim(), space.dim()))) < 1e-14);
    }

    #[test]
    fn unitary_action_matches_cosh_sinh_on_low_sectors() {
        let space = FockSpace::new(1, 40).unwrap();
        let kgen = DMatrix::from_element(1, 1, 0.2);
        let t = bogoliubov_unitary(&space, &kgen).unwrap();
        let ladders = build_ladder(&space).unwrap();
        let adag = ladders[0].to_dense();
        let a = adag.transpose();
        let lhs = t.transpose() * &adag * &t;
        let rhs = 0.2f64.cosh() * &adag + 0.2f64.sinh() * &a;
        // restrict to columns with total occupation <= 10
        let mut worst = 0.0f64;
        for (j, occ) in space.states.iter().enumerate() {
            let total: u32 = occ.iter().sum();
            if total > 10 {
                continue;
            }
            for i in 0..space.dim() {
                worst = worst.max((lhs[(i, j)] - rhs[(i, j)]).abs());
            }
        }
        assert!(worst < 1e-6, "action defect {}", worst);
        // orthogonality on the whole truncated space
        let n = space.dim();
        assert!(linalg::max_abs(&(t.transpose() * &t - DMatrix::identity(n, n))) < 1e-8);
        // leakage into the top sectors from low sectors stays small
        assert!(unitary_leakage(&space, &t, 10) < 1e-6);
    }

    #[test]
    fn moment_bound_ratio_is_stable_under_cutoff_growth() {
        // <T psi, (N+1) T psi> <= C (1 + |sh k|_HS^2) <psi, (N+1) psi>
        let kgen = DMatrix::from_element(1, 1, 0.25);
        let sh_hs = 0.25f64.sinh().powi(2);
        let mut ratios = Vec::new();
        for n_max in [16, 24, 32] {
            let space = FockSpace::new(1, n_max).unwrap();
            let t = bogoliubov_unitary(&space, &kgen).unwrap();
            let n_op = second_quantize(&space, &DMatrix::identity(1, 1)).unwrap().to_dense();
            let mut worst = 0.0f64;
            for (j, occ) in space.states.iter().enumerate() {
                let total: u32 = occ.iter().sum();
                if total > 5 {
                    continue;
                }
                let col = t.column(j);
                let mut num = 0.0;
                for i in 0..space.dim() {
                    num += col[i] * col[i] * (n_op[(i, i)] + 1.0);
                }
                let den = total as f64 + 1.0;
                worst = worst.max(num / den / (1.0 + sh_hs));
            }
            ratios.push(worst);
        }
        let rmax = ratios.iter().cloned().fold(0.0f64, f64::max);
        let rmin = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(rmax < 10.0, "moment ratio unbounded: {:?}", ratios);
        assert!((rmax - rmin) / rmin < 0.05, "moment ratio drifts: {:?}", ratios);
    }

    #[test]
    fn oversized_space_is_rejected() {
        assert!(matches!(
            FockSpace::new(4, 200),
            Err(Error::DimensionOverflow { .. })
        ));
    }
}
