//! Cross-module integration: scattering feeds the torus operators, whose
//! one-body spectra feed the many-body enumeration; the E vs E_inf gap
//! must survive to the many-body level with its ell^2 rate intact.

use bgsp_core::basis::{
    assemble_d, assemble_k_limit, assemble_k_smeared, build_basis_torus, Condensate,
};
use bgsp_core::bogoliubov::build_e;
use bgsp_core::grid::fit_power_law;
use bgsp_core::scattering::{solve_scattering, truncate_scattering, ChiProfile, RadialPotential};
use bgsp_core::spectrum::{excitation_spectrum, spectrum_diff};

#[test]
fn many_body_level_gaps_scale_like_ell_squared() {
    let v = RadialPotential::soft_sphere(1.0, 2.0, 6.0, 8192).unwrap();
    let sol = solve_scattering(&v, 6.0, 8192).unwrap();
    let basis = build_basis_torus(2.0 * 2.0 * std::f64::consts::PI).unwrap();
    let cond = Condensate::Torus { a0: sol.a0 };
    let d = assemble_d(&basis, &cond).unwrap();
    let k_inf = assemble_k_limit(&basis, &cond).unwrap();
    let (_, einf) = build_e(&d, &k_inf).unwrap();

    // cap covering a handful of multi-quantum levels
    let lambda = 3.0 * einf[0] + 0.5;
    let report_inf = excitation_spectrum(&einf, lambda, "E_inf torus").unwrap();

    let ells = [0.15, 0.075, 0.0375];
    let mut max_gaps = Vec::new();
    for &ell in &ells {
        let trunc = truncate_scattering(&sol, ell, 256.0, ChiProfile::Smoothstep, 4096).unwrap();
        let k = assemble_k_smeared(&basis, &cond, &trunc).unwrap();
        let (_, evals) = build_e(&d, &k).unwrap();
        let report = excitation_spectrum(&evals, lambda, "E torus").unwrap();
        let diff = spectrum_diff(&report, &report_inf).unwrap();
        assert_eq!(diff.multiplicity_mismatches, 0, "levels must pair up at ell = {}", ell);
        // skip the exact-zero vacuum row when taking the relative gap
        let max_rel = diff
            .rows
            .iter()
            .filter(|r| r.0 > 0.0)
            .map(|r| r.3)
            .fold(0.0f64, f64::max);
        max_gaps.push(max_rel);
    }
    let exponent = fit_power_law(&ells, &max_gaps).unwrap();
    assert!(
        (exponent - 2.0).abs() < 0.25,
        "many-body gap exponent {} (gaps {:?})",
        exponent,
        max_gaps
    );
}

#[test]
fn zero_potential_collapses_e_to_einf_exactly() {
    let v = RadialPotential::zero(4.0, 1024).unwrap();
    let sol = solve_scattering(&v, 4.0, 1024).unwrap();
    let basis = build_basis_torus(2.0 * 2.0 * std::f64::consts::PI).unwrap();
    let cond = Condensate::Torus { a0: sol.a0 };
    let d = assemble_d(&basis, &cond).unwrap();
    let k_inf = assemble_k_limit(&basis, &cond).unwrap();
    let trunc = truncate_scattering(&sol, 0.25, 64.0, ChiProfile::Smoothstep, 1024).unwrap();
    let k = assemble_k_smeared(&basis, &cond, &trunc).unwrap();
    let (_, e) = build_e(&d, &k).unwrap();
    let (_, einf) = build_e(&d, &k_inf).unwrap();
    for (a, b) in e.iter().zip(&einf) {
        assert!((a - b).abs() < 1e-10, "{} vs {}", a, b);
    }
}
