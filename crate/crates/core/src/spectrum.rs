//! Many-body excitation levels: the finite sums sum_i n_i e_i of
//! one-body excitation energies below a cap Lambda, with exact integer
//! multiplicities.

use serde::Serialize;

use crate::error::{Error, Result};

const LEVEL_LIMIT: usize = 1_000_000;
/// Sums closer than this merge into one degenerate level.
const MERGE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumLevel {
    pub value: f64,
    pub multiplicity: usize,
    /// one witness occupation vector "n1,n2,..."
    pub witness: Vec<u32>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub one_body_eigenvalues: Vec<f64>,
    pub lambda_cap: f64,
    pub levels: Vec<SpectrumLevel>,
    /// where the eigenvalues came from (operator, basis, parameters)
    pub provenance: String,
}

impl SpectrumReport {
    /// Total number of occupation vectors counted (sum of multiplicities).
    pub fn total_count(&self) -> usize {
        self.levels.iter().map(|l| l.multiplicity).sum()
    }

    /// Levels flattened by multiplicity, ascending.
    pub fn flattened(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.total_count());
        for l in &self.levels {
            out.extend(std::iter::repeat_n(l.value, l.multiplicity));
        }
        out
    }
}

/// Enumerate all occupation vectors with sum_i n_i e_i <= Lambda.
///
/// The eigenvalues must be strictly positive; the enumeration is a
/// depth-first sweep in mode order, so its output is deterministic.
pub fn excitation_spectrum(eigs: &[f64], lambda: f64, provenance: &str) -> Result<SpectrumReport> {
    if lambda < 0.0 {
        return Err(Error::Parse("Lambda must be nonnegative".into()));
    }
    let mut sorted = eigs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if sorted.first().is_some_and(|&e| e <= 0.0) {
        return Err(Error::Parse("one-body eigenvalues must be strictly positive".into()));
    }
    let mut found: Vec<(f64, Vec<u32>)> = Vec::new();
    let mut occ = vec![0u32; sorted.len()];
    enumerate(&sorted, lambda, 0, 0.0, &mut occ, &mut found)?;
    // sort by value, then lexicographically by occupation for determinism
    found.sort_by(|a, b| {
        a.0.partial_cmp(&b.0).unwrap().then_with(|| a.1.cmp(&b.1))
    });
    let mut levels: Vec<SpectrumLevel> = Vec::new();
    for (value, occv) in found {
        match levels.last_mut() {
            Some(last) if value - last.value <= MERGE_TOL => {
                last.multiplicity += 1;
            }
            _ => levels.push(SpectrumLevel { value, multiplicity: 1, witness: occv }),
        }
    }
    Ok(SpectrumReport {
        one_body_eigenvalues: sorted,
        lambda_cap: lambda,
        levels,
        provenance: provenance.to_string(),
    })
}

fn enumerate(
    eigs: &[f64],
    remaining: f64,
    mode: usize,
    partial: f64,
    occ: &mut [u32],
    found: &mut Vec<(f64, Vec<u32>)>,
) -> Result<()> {
    if mode == eigs.len() {
        if found.len() >= LEVEL_LIMIT {
            return Err(Error::ExplosionGuard { limit: LEVEL_LIMIT });
        }
        found.push((partial, occ.to_vec()));
        return Ok(());
    }
    // eigenvalues ascending: once a mode no longer fits, none after it does
    let mut n = 0u32;
    loop {
        let add = n as f64 * eigs[mode];
        if partial + add > remaining + 1e-12 {
            break;
        }
        occ[mode] = n;
        enumerate(eigs, remaining, mode + 1, partial + add, occ, found)?;
        occ[mode] = 0;
        n += 1;
    }
    Ok(())
}

/// Per-rank comparison of two reports sharing the same cap.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumDiff {
    pub lambda_cap: f64,
    /// per paired level: (value_a, value_b, |gap|, relative gap)
    pub rows: Vec<(f64, f64, f64, f64)>,
    pub max_abs_gap: f64,
    pub max_rel_gap: f64,
    pub multiplicity_mismatches: usize,
}

pub fn spectrum_diff(a: &SpectrumReport, b: &SpectrumReport) -> Result<SpectrumDiff> {
    if (a.lambda_cap - b.lambda_cap).abs() > 1e-12 {
        return Err(Error::CapMismatch { a: a.lambda_cap, b: b.lambda_cap });
    }
    let n = a.levels.len().min(b.levels.len());
    let mut rows = Vec::with_capacity(n);
    let mut max_abs: f64 = 0.0;
    let mut max_rel: f64 = 0.0;
    let mut mism = 0;
    for i in 0..n {
        let (la, lb) = (&a.levels[i], &b.levels[i]);
        let gap = (la.value - lb.value).abs();
        let denom = la.value.abs().max(lb.value.abs());
        let rel = if denom > 0.0 { gap / denom } else { 0.0 };
        rows.push((la.value, lb.value, gap, rel));
        max_abs = max_abs.max(gap);
        max_rel = max_rel.max(rel);
        if la.multiplicity != lb.multiplicity {
            mism += 1;
        }
    }
    mism += a.levels.len().abs_diff(b.levels.len());
    Ok(SpectrumDiff {
        lambda_cap: a.lambda_cap,
        rows,
        max_abs_gap: max_abs,
        max_rel_gap: max_rel,
        multiplicity_mismatches: mism,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_enumerated_two_mode_table() {
        // eigs {2, 3}, cap 7: 0, 2, 3, 4, 5, 6 (x2: 2+2+2 and 3+3), 7 (2+2+3)
        let rep = excitation_spectrum(&[2.0, 3.0], 7.0, "test").unwrap();
        let values: Vec<f64> = rep.levels.iter().map(|l| l.value).collect();
        let mults: Vec<usize> = rep.levels.iter().map(|l| l.multiplicity).collect();
        assert_eq!(values, vec![0.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        assert_eq!(mults, vec![1, 1, 1, 1, 1, 2, 1]);
        // vacuum exactly once, witness all zeros
        assert_eq!(rep.levels[0].witness, vec![0, 0]);
    }

    #[test]
    fn degenerate_harmonic_table() {
        let rep = excitation_spectrum(&[2.0, 2.0, 2.0], 4.0, "test").unwrap();
        let table: Vec<(f64, usize)> =
            rep.levels.iter().map(|l| (l.value, l.multiplicity)).collect();
        assert_eq!(table, vec![(0.0, 1), (2.0, 3), (4.0, 6)]);
    }

    #[test]
    fn torus_lowest_level_has_multiplicity_six() {
        let a0 = 0.1;
        let mut eigs = Vec::new();
        for nx in -3i64..=3 {
            for ny in -3i64..=3 {
                for nz in -3i64..=3 {
                    let n2 = (nx * nx + ny * ny + nz * nz) as f64;
                    if n2 == 0.0 || n2 > 9.0 {
                        continue;
                    }
                    let p2 = 4.0 * std::f64::consts::PI * std::f64::consts::PI * n2;
                    eigs.push((p2 * p2 + 16.0 * std::f64::consts::PI * a0 * p2).sqrt());
                }
            }
        }
        let e_min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        let rep = excitation_spectrum(&eigs, 1.5 * e_min, "torus").unwrap();
        assert_eq!(rep.levels[0].value, 0.0);
        assert!((rep.levels[1].value - e_min).abs() < 1e-12);
        assert_eq!(rep.levels[1].multiplicity, 6);
    }

    #[test]
    fn closure_under_adding_one_quantum() {
        let eigs = [1.3, 2.1, 3.7];
        let lambda = 9.0;
        let rep = excitation_spectrum(&eigs, lambda, "test").unwrap();
        let values: Vec<f64> = rep.levels.iter().map(|l| l.value).collect();
        for &v in &values {
            for &e in &eigs {
                if v + e <= lambda {
                    assert!(
                        values.iter().any(|&w| (w - (v + e)).abs() < 1e-9),
                        "missing closure value {}",
                        v + e
                    );
                }
            }
        }
    }

    #[test]
    fn identical_reports_diff_to_zero() {
        let rep = excitation_spectrum(&[1.0, 2.5], 6.0, "test").unwrap();
        let d = spectrum_diff(&rep, &rep).unwrap();
        assert_eq!(d.max_abs_gap, 0.0);
        assert_eq!(d.multiplicity_mismatches, 0);
    }

    #[test]
    fn small_coherent_perturbation_preserves_multiplicities() {
        // shift each degenerate eigenvalue cluster by a common delta far
        // below half the level spacing, then re-enumerate
        let rep_a = excitation_spectrum(&[2.0, 2.0, 2.0], 4.0, "test").unwrap();
        let delta = 1e-4;
        // shift downward so the boundary level stays below the cap
        let rep_b =
            excitation_spectrum(&[2.0 - delta, 2.0 - delta, 2.0 - delta], 4.0, "test").unwrap();
        let d = spectrum_diff(&rep_a, &rep_b).unwrap();
        assert_eq!(d.multiplicity_mismatches, 0);
        assert!(d.max_abs_gap <= 2.0 * delta + 1e-12);
    }

    #[test]
    fn cap_mismatch_is_rejected() {
        let a = excitation_spectrum(&[1.0], 3.0, "test").unwrap();
        let b = excitation_spectrum(&[1.0], 4.0, "test").unwrap();
        assert!(matches!(spectrum_diff(&a, &b), Err(Error::CapMismatch { .. })));
    }

    #[test]
    fn explosion_guard_fires() {
        // tiny gap and large cap: the count blows past the limit
        let eigs = vec![1e-3; 12];
        assert!(matches!(
            excitation_spectrum(&eigs, 1.0, "test"),
            Err(Error::ExplosionGuard { .. })
        ));
    }

    /// Independent recursive counter (no enumeration, just counts).
    fn count_below(eigs: &[f64], lambda: f64) -> usize {
        fn rec(eigs: &[f64], lambda: f64) -> usize {
            if eigs.is_empty() {
                return 1;
            }
            let mut total = 0;
            let mut used = 0.0;
            while used <= lambda + 1e-12 {
                total += rec(&eigs[1..], lambda - used);
                used += eigs[0];
            }
            total
        }
        rec(eigs, lambda)
    }

    proptest! {
        #[test]
        fn count_matches_independent_recursion(
            eigs in proptest::collection::vec(0.5f64..4.0, 1..5),
            lambda in 0.0f64..8.0,
        ) {
            let rep = excitation_spectrum(&eigs, lambda, "prop").unwrap();
            prop_assert_eq!(rep.total_count(), count_below({
                let mut s = eigs.clone();
                s.sort_by(|a, b| a.partial_cmp(b).unwrap());
                &s.clone()
            }, lambda));
        }

        #[test]
        fn permutation_invariance(
            mut eigs in proptest::collection::vec(0.5f64..4.0, 2..5),
            lambda in 0.0f64..8.0,
        ) {
            let rep_a = excitation_spectrum(&eigs, lambda, "prop").unwrap();
            eigs.reverse();
            let rep_b = excitation_spectrum(&eigs, lambda, "prop").unwrap();
            prop_assert_eq!(rep_a.levels.len(), rep_b.levels.len());
            for (a, b) in rep_a.levels.iter().zip(&rep_b.levels) {
                prop_assert_eq!(a.value, b.value);
                prop_assert_eq!(a.multiplicity, b.multiplicity);
            }
        }

        #[test]
        fn monotone_in_lambda(
            eigs in proptest::collection::vec(0.5f64..4.0, 1..4),
            lambda in 0.5f64..6.0,
        ) {
            let small = excitation_spectrum(&eigs, lambda, "prop").unwrap();
            let large = excitation_spectrum(&eigs, lambda + 1.0, "prop").unwrap();
            prop_assert!(large.levels.len() >= small.levels.len());
            for (a, b) in small.levels.iter().zip(&large.levels) {
                prop_assert_eq!(a.value, b.value);
                prop_assert_eq!(a.multiplicity, b.multiplicity);
            }
        }
    }
}
