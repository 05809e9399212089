//! Stage runners behind the subcommands. Every stage returns a JSON
//! fragment plus named verdicts; the verify battery strings together the
//! whole invariant suite on fixed reference configurations.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use bgsp_core::basis::{
    assemble_d, assemble_k_limit, assemble_k_smeared, build_basis_radial_channel,
    build_basis_torus, BasisDetail, Condensate, OperatorMatrix,
};
use bgsp_core::bogoliubov::{
    self, build_e, diagonalize, second_order_energy_torus, spectra_convergence,
};
use bgsp_core::fock::{
    bogoliubov_unitary, build_ladder, unitary_leakage, verify_bogoliubov_identity, FockSpace,
};
use bgsp_core::gp::{self, minimize_gp, ExternalPotential, GPState};
use bgsp_core::grid::UniformGrid;
use bgsp_core::io;
use bgsp_core::linalg;
use bgsp_core::scattering::{
    scattering_length_integral, scattering_length_variational, solve_scattering,
    truncate_scattering, ChiProfile, RadialPotential, ScatteringSolution,
};
use bgsp_core::spectrum::{excitation_spectrum, SpectrumReport};

use crate::config::{BasisKindConfig, PotentialKind, RunConfig};
use crate::report::{RunReport, Verdict};
use crate::CliError;

fn opt(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

pub fn build_potential(
    cfg: &RunConfig,
) -> Result<(RadialPotential, f64, usize), CliError> {
    let pc = cfg
        .potential
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [potential] section".into()))?;
    let sc = cfg.scattering.clone().unwrap_or_default();
    let v = match pc.kind {
        PotentialKind::SoftSphere => RadialPotential::soft_sphere(
            pc.radius.unwrap(),
            pc.v0.unwrap(),
            sc.r_max,
            sc.n_points,
        )?,
        PotentialKind::Gaussian => {
            RadialPotential::gaussian(pc.radius.unwrap(), pc.v0.unwrap(), sc.r_max, sc.n_points)?
        }
        PotentialKind::Zero => RadialPotential::zero(sc.r_max, sc.n_points)?,
        PotentialKind::Csv => {
            let (rs, vs) = io::read_potential_csv(Path::new(pc.path.as_ref().unwrap()))?;
            // support ends one cell past the last nonzero table entry
            let support = vs
                .iter()
                .rposition(|&v| v > 0.0)
                .map(|i| rs[(i + 1).min(rs.len() - 1)])
                .unwrap_or(rs[1]);
            // resample the table onto the uniform scattering grid
            let grid = UniformGrid::new(sc.r_max, sc.n_points);
            let mut values = vec![0.0; grid.len()];
            let table_end = *rs.last().unwrap();
            for (i, val) in values.iter_mut().enumerate() {
                let r = grid.node(i);
                if r > support || r > table_end {
                    continue;
                }
                let j = match rs.binary_search_by(|x| x.partial_cmp(&r).unwrap()) {
                    Ok(j) => j,
                    Err(j) => j.saturating_sub(1),
                };
                let j = j.min(rs.len() - 2);
                let t = (r - rs[j]) / (rs[j + 1] - rs[j]).max(1e-300);
                *val = (1.0 - t) * vs[j] + t * vs[j + 1];
            }
            RadialPotential::new(grid, values, support)?
        }
    };
    Ok((v, sc.r_max, sc.n_points))
}

pub struct ScatterOutput {
    pub solution: ScatteringSolution,
}

/// Scattering stage: a0 by three routes, the eps-mass identity across the
/// (N, ell) sweep with both chi profiles, scaling exponents if both axes
/// are provided.
pub fn scatter_stage(
    cfg: &RunConfig,
    out_dir: &Path,
    report: &mut RunReport,
) -> Result<ScatterOutput, CliError> {
    let (v, r_max, n_points) = build_potential(cfg)?;
    let sol = solve_scattering(&v, r_max, n_points)?;
    let a_var = scattering_length_variational(&v, &sol)?;
    let a_int = scattering_length_integral(&v, &sol)?;
    let scale = sol.a0.abs().max(1e-12);
    let triple = (a_var - sol.a0).abs().max((a_int - sol.a0).abs()).max((a_var - a_int).abs()) / scale;

    let mut verdicts = vec![
        Verdict::below("scatter.triple_consistency_rel", triple, 1e-5),
        Verdict::below("scatter.ode_residual", sol.residual, 1e-3),
    ];
    let mut stage = json!({
        "a0_fit": sol.a0,
        "a0_variational": a_var,
        "a0_integral": a_int,
        "fit_window": [sol.fit_window.0, sol.fit_window.1],
        "ode_residual": sol.residual,
    });

    if let Some(tc) = &cfg.truncation {
        let mut identities = Vec::new();
        let eight_pi_a0 = 8.0 * std::f64::consts::PI * sol.a0;
        for &ell in &tc.ell_list {
            let mut per_chi = BTreeMap::new();
            for (tag, chi) in [("smoothstep", ChiProfile::Smoothstep), ("cosine", ChiProfile::CosineTaper)] {
                let trunc = truncate_scattering(&sol, ell, tc.n_scale, chi, tc.table_points)?;
                let mass = trunc.eps_mass();
                let rel = if eight_pi_a0.abs() > 0.0 {
                    (mass - eight_pi_a0) / eight_pi_a0
                } else {
                    mass
                };
                verdicts.push(Verdict::below(
                    &format!("scatter.eps_mass[{tag},ell={ell}]"),
                    rel,
                    1e-5,
                ));
                per_chi.insert(tag.to_string(), mass);
                if chi == tc.chi.to_profile() {
                    let nodes = trunc.grid.nodes();
                    io::write_table_csv(
                        &out_dir.join(format!("omega_eps_ell_{ell}.csv")),
                        &["r", "omega_ln", "eps_ln"],
                        &[&nodes, &trunc.omega_ln, &trunc.eps_ln],
                    )?;
                }
            }
            let vals: Vec<f64> = per_chi.values().copied().collect();
            if eight_pi_a0.abs() > 0.0 {
                verdicts.push(Verdict::below(
                    &format!("scatter.chi_independence[ell={ell}]"),
                    (vals[0] - vals[1]) / eight_pi_a0,
                    1e-5,
                ));
            }
            identities.push(json!({
                "ell": ell,
                "n_scale": tc.n_scale,
                "eps_mass": per_chi,
                "expected": eight_pi_a0,
            }));
        }
        stage["eps_identity"] = json!(identities);

        if let Some(n_list) = &tc.n_list {
            if n_list.len() >= 3 && tc.ell_list.len() >= 3 && sol.a0 > 0.0 {
                let rep = bgsp_core::scattering::truncation_scaling_report(
                    &sol,
                    n_list,
                    &tc.ell_list,
                    tc.chi.to_profile(),
                )?;
                let names = ["l1", "l2", "grad_l1", "grad_l2"];
                let expect = [(-1.0, 2.0), (-1.0, 0.5), (-1.0, 1.0), (-0.5, 0.0)];
                for (i, name) in names.iter().enumerate() {
                    let (en, ee) = rep.exponents[i];
                    verdicts.push(Verdict::within(
                        &format!("scatter.scaling[{name}].n_exponent"),
                        en,
                        expect[i].0 - 0.15,
                        expect[i].0 + 0.15,
                    ));
                    verdicts.push(Verdict::within(
                        &format!("scatter.scaling[{name}].ell_exponent"),
                        ee,
                        expect[i].1 - 0.15,
                        expect[i].1 + 0.15,
                    ));
                }
                stage["scaling_exponents"] = json!(rep
                    .exponents
                    .iter()
                    .zip(names)
                    .map(|(&(en, ee), name)| json!({ "norm": name, "n": opt(en), "ell": opt(ee) }))
                    .collect::<Vec<_>>());
            }
        }
    }

    // omega table of the plain solution
    io::write_table_csv(
        &out_dir.join("omega.csv"),
        &["r", "f", "omega"],
        &[&sol.grid.nodes(), &sol.f_values, &sol.omega_values],
    )?;

    report.push_stage("scattering", stage, verdicts);
    Ok(ScatterOutput { solution: sol })
}

/// GP stage: minimize, check the chemical-potential identities, dump phi.
pub fn gp_stage(
    cfg: &RunConfig,
    out_dir: &Path,
    report: &mut RunReport,
    scatter: Option<&ScatterOutput>,
) -> Result<GPState, CliError> {
    let gc = cfg.gp.as_ref().ok_or_else(|| CliError::Config("missing [gp] section".into()))?;
    let trap = cfg
        .trap
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [trap] section".into()))?
        .to_potential();
    let a0 = if gc.a0.is_from_scattering()? {
        scatter
            .ok_or_else(|| CliError::Config("a0 = from_scattering needs a [potential] section".into()))?
            .solution
            .a0
    } else if let crate::config::A0Source::Fixed(v) = gc.a0 {
        v
    } else {
        unreachable!()
    };
    let state = minimize_gp(&trap, a0, gc.r_box, gc.n_points, gc.tol)?;
    let mu_quad = gp::chemical_potential(&state);
    let mu_ray = gp::rayleigh_mu(&state);
    let norm: f64 = state.u.iter().map(|x| x * x).sum::<f64>() * state.grid.h();
    let min_phi = state.phi.iter().cloned().fold(f64::INFINITY, f64::min);
    let energy_monotone = state
        .energy_history
        .windows(2)
        .all(|w| w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0));

    let verdicts = vec![
        Verdict::below("gp.residual", state.residual, gc.tol),
        Verdict::below("gp.norm_defect", norm - 1.0, 1e-10),
        Verdict::below("gp.mu_consistency", mu_quad - mu_ray, 1e-8),
        Verdict::below("gp.negative_part", min_phi.min(0.0), 1e-12),
        Verdict::within("gp.energy_monotone", if energy_monotone { 1.0 } else { 0.0 }, 0.5, 1.5),
    ];
    let stage = json!({
        "a0": a0,
        "mu": state.mu,
        "energy": state.energy,
        "residual": state.residual,
        "iterations": state.iterations,
        "mu_quadrature": mu_quad,
        "mu_rayleigh": mu_ray,
    });
    io::write_table_csv(
        &out_dir.join("phi.csv"),
        &["r", "phi"],
        &[&state.grid.nodes(), &state.phi],
    )?;
    report.push_stage("gp", stage, verdicts);
    Ok(state)
}

/// Gather per-channel E eigenvalues (with 2l+1 multiplicity) into one
/// ascending list.
fn gather_levels(per_channel: &[(usize, Vec<f64>)], count: usize) -> Vec<f64> {
    let mut all = Vec::new();
    for (ell_ang, evals) in per_channel {
        for &e in evals {
            for _ in 0..(2 * ell_ang + 1) {
                all.push(e);
            }
        }
    }
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    all.truncate(count);
    all
}

/// Full pipeline: operators, E and E_inf, trace constants, many-body
/// levels, and the convergence table when a dyadic ell list is given.
pub fn spectrum_stage(
    cfg: &RunConfig,
    out_dir: &Path,
    report: &mut RunReport,
    scatter: Option<&ScatterOutput>,
) -> Result<(), CliError> {
    let bc = cfg.basis.as_ref().ok_or_else(|| CliError::Config("missing [basis] section".into()))?;
    let spec = cfg
        .spectrum
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [spectrum] section".into()))?;
    let mut verdicts = Vec::new();

    // (ell, gathered E levels); the limit operator's gathered levels
    let mut family: Vec<(f64, Vec<f64>)> = Vec::new();
    let limit_levels: Vec<f64>;
    let mut trace_rows = Vec::new();
    let level_count = 64usize;
    let provenance;

    match bc.kind {
        BasisKindConfig::Torus => {
            let a0 = match (&cfg.gp, scatter) {
                (Some(gc), sc) => {
                    if gc.a0.is_from_scattering()? {
                        sc.ok_or_else(|| CliError::Config("a0 = from_scattering needs [potential]".into()))?
                            .solution
                            .a0
                    } else if let crate::config::A0Source::Fixed(v) = gc.a0 {
                        v
                    } else {
                        unreachable!()
                    }
                }
                (None, Some(sc)) => sc.solution.a0,
                (None, None) => {
                    return Err(CliError::Config("torus spectrum needs [gp].a0 or [potential]".into()))
                }
            };
            let p_max = bc.p_max_over_2pi.unwrap() * 2.0 * std::f64::consts::PI;
            let basis = build_basis_torus(p_max)?;
            let cond = Condensate::Torus { a0 };
            let d = assemble_d(&basis, &cond)?;
            let k_inf = assemble_k_limit(&basis, &cond)?;
            let (_, einf) = build_e(&d, &k_inf)?;
            limit_levels = einf.into_iter().take(level_count).collect();
            provenance = format!("E_inf on {}", basis.label);
            io::write_matrix_csv(&out_dir.join("d.csv"), &d.mat)?;
            io::write_bgsp(&out_dir.join("d.bgsp"), &d.mat, Some(basis.kind))?;
            io::write_bgsp(&out_dir.join("k_inf.bgsp"), &k_inf.mat, Some(basis.kind))?;

            if let (Some(tc), Some(sc)) = (&cfg.truncation, scatter) {
                for &ell in &tc.ell_list {
                    let trunc =
                        truncate_scattering(&sc.solution, ell, tc.n_scale, tc.chi.to_profile(), tc.table_points)?;
                    let k = assemble_k_smeared(&basis, &cond, &trunc)?;
                    let diag = diagonalize(&d, &k)?;
                    verdicts.push(Verdict::below(
                        &format!("spectrum.symplectic[ell={ell}]"),
                        diag.symplectic_defect,
                        1e-9,
                    ));
                    let tr_dke = -2.0 * diag.trace_constant; // Tr(D + K - E)
                    verdicts.push(Verdict::within(
                        &format!("spectrum.trace_positive[ell={ell}]"),
                        tr_dke,
                        -1e-9 * d.dim() as f64,
                        f64::INFINITY,
                    ));
                    trace_rows.push(json!({
                        "ell": ell,
                        "trace_constant": diag.trace_constant,
                        "regularized_trace": diag.regularized_trace,
                        "symplectic_defect": diag.symplectic_defect,
                        "s2_hs_norm": diag.s2_hs_norm,
                    }));
                    family.push((ell, diag.eigenvalues.into_iter().take(level_count).collect()));
                }
            }
        }
        BasisKindConfig::Radial => {
            let state = gp_stage(cfg, out_dir, report, scatter)?;
            let channels = bc.channels.clone().unwrap();
            let cond = Condensate::Trapped(&state);
            let mut per_channel_inf = Vec::new();
            let mut ops = Vec::new();
            for &ch in &channels {
                let basis = build_basis_radial_channel(&state, ch, bc.n_modes)?;
                let d = assemble_d(&basis, &cond)?;
                let k_inf = assemble_k_limit(&basis, &cond)?;
                let (_, einf) = build_e(&d, &k_inf)?;
                per_channel_inf.push((ch, einf));
                ops.push((ch, basis, d));
            }
            limit_levels = gather_levels(&per_channel_inf, level_count);
            provenance = format!("E_inf radial channels {:?}", channels);
            if let Some((_, basis, d)) = ops.first() {
                io::write_matrix_csv(&out_dir.join("d_channel0.csv"), &d.mat)?;
                io::write_bgsp(&out_dir.join("d_channel0.bgsp"), &d.mat, Some(basis.kind))?;
            }

            if let (Some(tc), Some(sc)) = (&cfg.truncation, scatter) {
                for &ell in &tc.ell_list {
                    let trunc =
                        truncate_scattering(&sc.solution, ell, tc.n_scale, tc.chi.to_profile(), tc.table_points)?;
                    let mut per_channel = Vec::new();
                    let mut worst_sympl = 0.0f64;
                    let mut tr_min = f64::INFINITY;
                    let mut tc_sum = 0.0;
                    let mut reg_sum = 0.0;
                    for (ch, basis, d) in &ops {
                        let k = assemble_k_smeared(basis, &cond, &trunc)?;
                        let diag = diagonalize(d, &k)?;
                        worst_sympl = worst_sympl.max(diag.symplectic_defect);
                        tr_min = tr_min.min(-2.0 * diag.trace_constant / d.dim() as f64);
                        let mult = (2 * ch + 1) as f64;
                        tc_sum += mult * diag.trace_constant;
                        reg_sum += mult * diag.regularized_trace;
                        per_channel.push((*ch, diag.eigenvalues));
                    }
                    verdicts.push(Verdict::below(
                        &format!("spectrum.symplectic[ell={ell}]"),
                        worst_sympl,
                        1e-9,
                    ));
                    verdicts.push(Verdict::within(
                        &format!("spectrum.trace_positive[ell={ell}]"),
                        tr_min,
                        -1e-9,
                        f64::INFINITY,
                    ));
                    trace_rows.push(json!({
                        "ell": ell,
                        "trace_constant": tc_sum,
                        "regularized_trace": reg_sum,
                        "symplectic_defect": worst_sympl,
                    }));
                    family.push((ell, gather_levels(&per_channel, level_count)));
                }
            }
        }
    }

    // many-body level table below Lambda from the limit operator
    let positive: Vec<f64> = limit_levels.iter().copied().filter(|&e| e > 0.0).collect();
    let mb = excitation_spectrum(&positive, spec.lambda, &provenance)?;
    write_levels_csv(&out_dir.join("levels.csv"), &mb)?;
    io::write_table_csv(&out_dir.join("one_body.csv"), &["e"], &[&limit_levels])?;

    let mut stage = json!({
        "one_body_limit": limit_levels,
        "provenance": provenance,
        "lambda": spec.lambda,
        "levels": mb.levels,
        "trace": trace_rows,
    });

    if family.len() >= 3 {
        let ells: Vec<f64> = family.iter().map(|f| f.0).collect();
        let fam: Vec<Vec<f64>> = family.iter().map(|f| f.1.clone()).collect();
        let conv = spectra_convergence(&ells, &fam, &limit_levels, spec.levels)?;
        verdicts.push(Verdict::within(
            "spectrum.convergence_exponent",
            conv.fitted_exponent,
            1.8,
            f64::INFINITY,
        ));
        for (i, row) in conv.halving_ratios.iter().enumerate() {
            for (l, &ratio) in row.iter().enumerate() {
                verdicts.push(Verdict::within(
                    &format!("spectrum.halving[{}->{}][level {}]", conv.ells[i], conv.ells[i + 1], l),
                    ratio,
                    3.0,
                    5.5,
                ));
            }
        }
        let mut cols: Vec<Vec<f64>> = vec![conv.ells.clone()];
        for l in 0..conv.rel_gaps[0].len() {
            cols.push(conv.rel_gaps.iter().map(|g| g[l]).collect());
        }
        let headers: Vec<String> = std::iter::once("ell".to_string())
            .chain((0..conv.rel_gaps[0].len()).map(|l| format!("rel_gap_level_{l}")))
            .collect();
        let header_refs: Vec<&str> = headers.iter().map(|s| s.as_str()).collect();
        let col_refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        io::write_table_csv(&out_dir.join("convergence.csv"), &header_refs, &col_refs)?;
        stage["convergence"] = serde_json::to_value(&conv)
            .map_err(|e| CliError::Internal(format!("serialize convergence: {e}")))?;
    } else if cfg.truncation.is_some() {
        report.skip_stage("spectrum.convergence", "need at least 3 ell values");
    }

    report.push_stage("spectrum", stage, verdicts);
    Ok(())
}

fn write_levels_csv(path: &Path, rep: &SpectrumReport) -> Result<(), CliError> {
    use std::io::Write as _;
    let mut out = std::fs::File::create(path).map_err(bgsp_core::Error::from)?;
    writeln!(out, "value,multiplicity,witness").map_err(bgsp_core::Error::from)?;
    for level in &rep.levels {
        let occ: Vec<String> = level.witness.iter().map(|n| n.to_string()).collect();
        writeln!(out, "{},{},\"{}\"", io::fmt_f64(level.value), level.multiplicity, occ.join(","))
            .map_err(bgsp_core::Error::from)?;
    }
    Ok(())
}

/// Fock cross-check stage from explicit (D, K) matrices.
pub fn fock_stage(cfg: &RunConfig, report: &mut RunReport) -> Result<(), CliError> {
    let fc = cfg.fock.as_ref().ok_or_else(|| CliError::Config("missing [fock] section".into()))?;
    let m = fc.d.len();
    let flat_d: Vec<f64> = fc.d.iter().flatten().copied().collect();
    let flat_k: Vec<f64> = fc.k.iter().flatten().copied().collect();
    let d = DMatrix::from_row_slice(m, m, &flat_d);
    let k = DMatrix::from_row_slice(m, m, &flat_k);
    if linalg::symmetry_defect(&d) > 1e-12 || linalg::symmetry_defect(&k) > 1e-12 {
        return Err(CliError::Config("fock.d and fock.k must be symmetric".into()));
    }
    let rep = verify_bogoliubov_identity(&d, &k, &fc.n_max_list, fc.levels)?;
    let final_dev = *rep.deviations.last().unwrap();
    let verdicts = vec![
        Verdict::below("fock.final_deviation", final_dev, 1e-6),
        Verdict::within("fock.monotone", if rep.monotone { 1.0 } else { 0.0 }, 0.5, 1.5),
    ];
    let stage = serde_json::to_value(&rep)
        .map_err(|e| CliError::Internal(format!("serialize fock report: {e}")))?;
    report.push_stage("fock", stage, verdicts);
    Ok(())
}

// ---------------------------------------------------------------------
// verify battery
// ---------------------------------------------------------------------

/// The full invariant battery on fixed reference configurations. Every
/// acceptance-style check appears as one verdict; the RNG is seeded so a
/// rerun with the same seed is bit-identical.
pub fn verify_battery(seed: u64, report: &mut RunReport) -> Result<(), CliError> {
    let t0 = std::time::Instant::now();

    // --- scattering: soft sphere closed form, three routes
    let v = RadialPotential::soft_sphere(1.0, 2.0, 6.0, 8192)?;
    let sol = solve_scattering(&v, 6.0, 8192)?;
    let exact = 1.0 - 1.0f64.tanh();
    let a_var = scattering_length_variational(&v, &sol)?;
    let a_int = scattering_length_integral(&v, &sol)?;
    let mut verdicts = vec![
        Verdict::below("verify.a0_fit_vs_closed_form", (sol.a0 - exact) / exact, 1e-5),
        Verdict::below("verify.a0_variational_vs_closed_form", (a_var - exact) / exact, 1e-5),
        Verdict::below("verify.a0_integral_vs_closed_form", (a_int - exact) / exact, 1e-5),
    ];
    let stage1 = json!({
        "a0_fit": sol.a0, "a0_variational": a_var, "a0_integral": a_int, "closed_form": exact,
    });
    eprintln!("[timing] verify.scattering: {:?}", t0.elapsed());
    report.push_stage("verify.scattering", stage1, verdicts);

    // --- truncation identity and chi independence
    let t1 = std::time::Instant::now();
    let eight_pi_a0 = 8.0 * std::f64::consts::PI * sol.a0;
    verdicts = Vec::new();
    let mut rows = Vec::new();
    for &(nn, ell) in &[(64.0, 0.5), (64.0, 0.25), (128.0, 0.25), (128.0, 0.125)] {
        let mut masses = Vec::new();
        for chi in [ChiProfile::Smoothstep, ChiProfile::CosineTaper] {
            let trunc = truncate_scattering(&sol, ell, nn, chi, 4096)?;
            masses.push(trunc.eps_mass());
        }
        for (chi_name, &mass) in ["smoothstep", "cosine"].iter().zip(&masses) {
            verdicts.push(Verdict::below(
                &format!("verify.eps_mass[{chi_name},N={nn},ell={ell}]"),
                (mass - eight_pi_a0) / eight_pi_a0,
                1e-5,
            ));
        }
        verdicts.push(Verdict::below(
            &format!("verify.chi_independence[N={nn},ell={ell}]"),
            (masses[0] - masses[1]) / eight_pi_a0,
            1e-5,
        ));
        rows.push(json!({ "n_scale": nn, "ell": ell, "masses": masses }));
    }
    // scaling exponents on a 3x3 sweep
    let scaling = bgsp_core::scattering::truncation_scaling_report(
        &sol,
        &[32.0, 64.0, 128.0],
        &[0.2, 0.4, 0.8],
        ChiProfile::Smoothstep,
    )?;
    let names = ["l1", "l2", "grad_l1", "grad_l2"];
    let expect = [(-1.0, 2.0), (-1.0, 0.5), (-1.0, 1.0), (-0.5, 0.0)];
    for (i, name) in names.iter().enumerate() {
        let (en, ee) = scaling.exponents[i];
        verdicts.push(Verdict::within(
            &format!("verify.scaling[{name}].n"),
            en,
            expect[i].0 - 0.15,
            expect[i].0 + 0.15,
        ));
        verdicts.push(Verdict::within(
            &format!("verify.scaling[{name}].ell"),
            ee,
            expect[i].1 - 0.15,
            expect[i].1 + 0.15,
        ));
    }
    eprintln!("[timing] verify.truncation: {:?}", t1.elapsed());
    report.push_stage("verify.truncation", json!({ "rows": rows }), verdicts);

    // --- torus dispersion (diagonal, exact)
    let t2 = std::time::Instant::now();
    verdicts = Vec::new();
    let a0 = 0.1;
    let basis = build_basis_torus(3.0 * 2.0 * std::f64::consts::PI)?;
    let cond = Condensate::Torus { a0 };
    let d = assemble_d(&basis, &cond)?;
    let k_inf = assemble_k_limit(&basis, &cond)?;
    let (_, evals) = build_e(&d, &k_inf)?;
    let mut expected: Vec<f64> = if let BasisDetail::Torus(t) = &basis.detail {
        (0..basis.dim())
            .map(|i| {
                let p2 = t.momentum(i).powi(2);
                (p2 * p2 + 16.0 * std::f64::consts::PI * a0 * p2).sqrt()
            })
            .collect()
    } else {
        unreachable!()
    };
    expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let worst = evals
        .iter()
        .zip(&expected)
        .map(|(g, w)| (g - w).abs() / w)
        .fold(0.0f64, f64::max);
    verdicts.push(Verdict::below("verify.torus_dispersion_rel", worst, 1e-10));
    eprintln!("[timing] verify.torus_dispersion: {:?}", t2.elapsed());
    report.push_stage(
        "verify.torus_dispersion",
        json!({ "modes": basis.dim(), "max_rel_gap": worst }),
        verdicts,
    );

    // --- harmonic trap: linear limit levels and the many-body table
    let t3 = std::time::Instant::now();
    verdicts = Vec::new();
    let lowest = |n: usize| -> Result<f64, CliError> {
        let state = minimize_gp(&ExternalPotential::Harmonic, 0.0, 7.0, n, 1e-9)?;
        let basis = build_basis_radial_channel(&state, 1, 8)?;
        let d = assemble_d(&basis, &Condensate::Trapped(&state))?;
        Ok(d.eigenvalues()[0])
    };
    let (e_coarse, e_fine) = (lowest(1024)?, lowest(2048)?);
    let e_extrap = (4.0 * e_fine - e_coarse) / 3.0;
    verdicts.push(Verdict::below("verify.harmonic_lowest_level", e_extrap - 2.0, 1e-4));
    let mb = excitation_spectrum(&[e_extrap, e_extrap, e_extrap], 4.0, "harmonic a0=0")?;
    let table: Vec<(f64, usize)> = mb.levels.iter().map(|l| (l.value, l.multiplicity)).collect();
    let table_ok = table.len() == 3
        && table[0] == (0.0, 1)
        && (table[1].0 - 2.0).abs() < 1e-4
        && table[1].1 == 3
        && (table[2].0 - 4.0).abs() < 2e-4
        && table[2].1 == 6;
    verdicts.push(Verdict::within(
        "verify.harmonic_mb_table",
        if table_ok { 1.0 } else { 0.0 },
        0.5,
        1.5,
    ));
    eprintln!("[timing] verify.harmonic_limit: {:?}", t3.elapsed());
    report.push_stage(
        "verify.harmonic_limit",
        json!({ "lowest_extrapolated": e_extrap, "table": table }),
        verdicts,
    );

    // --- E vs E_inf dyadic rate, torus and trap
    let t4 = std::time::Instant::now();
    verdicts = Vec::new();
    {
        // torus at N = 256, dyadic ells below the first-shell wavelength
        let nn = 256.0;
        let ells = [0.15, 0.075, 0.0375];
        let basis = build_basis_torus(3.0 * 2.0 * std::f64::consts::PI)?;
        let cond = Condensate::Torus { a0: sol.a0 };
        let d = assemble_d(&basis, &cond)?;
        let k_inf = assemble_k_limit(&basis, &cond)?;
        let mut fam = Vec::new();
        for &ell in &ells {
            let trunc = truncate_scattering(&sol, ell, nn, ChiProfile::Smoothstep, 4096)?;
            let k = assemble_k_smeared(&basis, &cond, &trunc)?;
            fam.push((ell, k));
        }
        let conv = bogoliubov::compare_e_to_einf(&d, &fam, &k_inf, 5)?;
        for row in &conv.halving_ratios {
            for (l, &r) in row.iter().enumerate() {
                verdicts.push(Verdict::within(&format!("verify.rate.torus[level {l}]"), r, 3.0, 5.5));
            }
        }
        verdicts.push(Verdict::within(
            "verify.rate.torus_exponent",
            conv.fitted_exponent,
            1.8,
            f64::INFINITY,
        ));
    }
    {
        // harmonic trap with the soft-sphere a0, channels 0..2
        let nn = 512.0;
        let ells = [0.3, 0.15, 0.075];
        let state = minimize_gp(&ExternalPotential::Harmonic, sol.a0, 7.0, 1400, 1e-9)?;
        let cond = Condensate::Trapped(&state);
        let mut per_channel_inf = Vec::new();
        let mut ops = Vec::new();
        for ch in 0..=2usize {
            let basis = build_basis_radial_channel(&state, ch, 10)?;
            let d = assemble_d(&basis, &cond)?;
            let k_inf = assemble_k_limit(&basis, &cond)?;
            let (_, einf) = build_e(&d, &k_inf)?;
            per_channel_inf.push((ch, einf));
            ops.push((ch, basis, d));
        }
        let limit = gather_levels(&per_channel_inf, 24);
        let mut fam = Vec::new();
        let mut ell_axis = Vec::new();
        for &ell in &ells {
            let trunc = truncate_scattering(&sol, ell, nn, ChiProfile::Smoothstep, 4096)?;
            let mut per_channel = Vec::new();
            for (ch, basis, d) in &ops {
                let k = assemble_k_smeared(basis, &cond, &trunc)?;
                let (_, e) = build_e(d, &k)?;
                per_channel.push((*ch, e));
            }
            ell_axis.push(ell);
            fam.push(gather_levels(&per_channel, 24));
        }
        let conv = spectra_convergence(&ell_axis, &fam, &limit, 5)?;
        for row in &conv.halving_ratios {
            for (l, &r) in row.iter().enumerate() {
                verdicts.push(Verdict::within(&format!("verify.rate.trap[level {l}]"), r, 3.0, 5.5));
            }
        }
        verdicts.push(Verdict::within(
            "verify.rate.trap_exponent",
            conv.fitted_exponent,
            1.8,
            f64::INFINITY,
        ));
    }
    eprintln!("[timing] verify.einf_rate: {:?}", t4.elapsed());
    report.push_stage("verify.einf_rate", json!({}), verdicts);

    // --- dilute-limit N^-2 rate
    let t5 = std::time::Instant::now();
    verdicts = Vec::new();
    let state = minimize_gp(&ExternalPotential::Harmonic, sol.a0, 7.0, 2048, 1e-9)?;
    let dil = gp::dilute_limit_check(&v, &sol, &state, &[32.0, 64.0, 128.0, 256.0])?;
    verdicts.push(Verdict::within("verify.dilute_exponent", dil.fitted_exponent, -2.2, -1.8));
    eprintln!("[timing] verify.dilute: {:?}", t5.elapsed());
    report.push_stage(
        "verify.dilute",
        serde_json::to_value(&dil).map_err(|e| CliError::Internal(e.to_string()))?,
        verdicts,
    );

    // --- symplectic identity and trace positivity on random admissible pairs
    let t6 = std::time::Instant::now();
    verdicts = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for trial in 0..5 {
        let m = 3 + (trial % 2);
        let (d, k) = random_admissible_pair(&mut rng, m, 0.3);
        let diag = diagonalize(&d, &k)?;
        verdicts.push(Verdict::below(
            &format!("verify.symplectic[{trial}]"),
            diag.symplectic_defect,
            1e-9,
        ));
        verdicts.push(Verdict::within(
            &format!("verify.trace_positive[{trial}]"),
            -2.0 * diag.trace_constant,
            -1e-9 * m as f64,
            f64::INFINITY,
        ));
    }
    // regularized combination drift under cutoff doubling (smeared torus)
    {
        let trunc = truncate_scattering(&sol, 0.4, 32.0, ChiProfile::Smoothstep, 2048)?;
        let combo = |p_max: f64| -> Result<f64, CliError> {
            let b = build_basis_torus(p_max)?;
            let mut acc = 0.0;
            if let BasisDetail::Torus(t) = &b.detail {
                let mut cache: BTreeMap<i64, f64> = BTreeMap::new();
                for i in 0..b.dim() {
                    let mode = t.modes[i];
                    let n2 = mode[0] * mode[0] + mode[1] * mode[1] + mode[2] * mode[2];
                    let p = t.momentum(i);
                    let kk = *cache.entry(n2).or_insert_with(|| trunc.eps_hat(p));
                    let dd = p * p;
                    let ee = (dd * (dd + 2.0 * kk)).sqrt();
                    acc += -0.5 * (dd + kk - ee) + 0.5 * kk * kk / dd;
                }
            }
            Ok(acc)
        };
        let c1 = combo(8.0 * 2.0 * std::f64::consts::PI)?;
        let c2 = combo(16.0 * 2.0 * std::f64::consts::PI)?;
        verdicts.push(Verdict::below("verify.trace_combination_drift", (c2 - c1) / c1, 0.1));
    }
    eprintln!("[timing] verify.symplectic: {:?}", t6.elapsed());
    report.push_stage("verify.symplectic_traces", json!({}), verdicts);

    // --- Fock oracle: identity across cutoffs, m = 1, 2, 3
    let t7 = std::time::Instant::now();
    verdicts = Vec::new();
    {
        let d1 = DMatrix::from_element(1, 1, 1.0);
        let k1 = DMatrix::from_element(1, 1, 0.3);
        let rep = verify_bogoliubov_identity(&d1, &k1, &[10, 20, 30, 40], 8)?;
        verdicts.push(Verdict::below("verify.fock_m1", *rep.deviations.last().unwrap(), 1e-6));
        verdicts.push(Verdict::within(
            "verify.fock_m1_monotone",
            if rep.monotone { 1.0 } else { 0.0 },
            0.5,
            1.5,
        ));
    }
    {
        let (d2, k2) = {
            let (dop, kop) = random_admissible_pair(&mut rng, 2, 0.2);
            (dop.mat, kop.mat)
        };
        let rep = verify_bogoliubov_identity(&d2, &k2, &[10, 15, 20], 8)?;
        verdicts.push(Verdict::below("verify.fock_m2", *rep.deviations.last().unwrap(), 1e-6));
    }
    {
        let (d3, k3) = {
            let (dop, kop) = random_admissible_pair(&mut rng, 3, 0.2);
            (dop.mat, kop.mat)
        };
        let rep = verify_bogoliubov_identity(&d3, &k3, &[6, 9, 12], 8)?;
        verdicts.push(Verdict::below("verify.fock_m3", *rep.deviations.last().unwrap(), 1e-6));
        verdicts.push(Verdict::within(
            "verify.fock_m3_monotone",
            if rep.monotone { 1.0 } else { 0.0 },
            0.5,
            1.5,
        ));
    }
    eprintln!("[timing] verify.fock: {:?}", t7.elapsed());
    report.push_stage("verify.fock", json!({}), verdicts);

    // --- explicit Bogoliubov unitary action
    let t8 = std::time::Instant::now();
    verdicts = Vec::new();
    {
        let space = FockSpace::new(1, 56)?;
        let kgen = DMatrix::from_element(1, 1, 0.3);
        let t = bogoliubov_unitary(&space, &kgen)?;
        let adag = build_ladder(&space)?[0].to_dense();
        let a = adag.transpose();
        let lhs = t.transpose() * &adag * &t;
        let rhs = 0.3f64.cosh() * &adag + 0.3f64.sinh() * &a;
        let mut worst = 0.0f64;
        for (j, occ) in space.states.iter().enumerate() {
            if occ[0] > 10 {
                continue;
            }
            for i in 0..space.dim() {
                worst = worst.max((lhs[(i, j)] - rhs[(i, j)]).abs());
            }
        }
        verdicts.push(Verdict::below("verify.unitary_action", worst, 1e-6));
        let n = space.dim();
        let orth = linalg::max_abs(&(t.transpose() * &t - DMatrix::identity(n, n)));
        verdicts.push(Verdict::below("verify.unitary_orthogonal", orth, 1e-8));
        verdicts.push(Verdict::below("verify.unitary_leakage", unitary_leakage(&space, &t, 10), 1e-6));
    }
    eprintln!("[timing] verify.unitary: {:?}", t8.elapsed());
    report.push_stage("verify.unitary", json!({}), verdicts);

    // --- second-order energy: ell-sweep stability of the total (torus)
    let t9 = std::time::Instant::now();
    verdicts = Vec::new();
    {
        let nn = 512.0;
        let p_max = 30.0 * 2.0 * std::f64::consts::PI;
        let mut recs = Vec::new();
        for &ell in &[0.2, 0.1] {
            let trunc = truncate_scattering(&sol, ell, nn, ChiProfile::Smoothstep, 2048)?;
            recs.push(second_order_energy_torus(&v, &sol, &trunc, p_max)?);
        }
        let term_change = (recs[1].omega_eps_term - recs[0].omega_eps_term).abs();
        let total_change = (recs[1].total - recs[0].total).abs();
        verdicts.push(Verdict::below(
            "verify.second_order_stability",
            total_change / term_change.max(1e-12),
            0.05,
        ));
    }
    eprintln!("[timing] verify.second_order: {:?}", t9.elapsed());
    report.push_stage("verify.second_order", json!({}), verdicts);

    Ok(())
}

/// Random SPD D with spectrum in [1, 2] and symmetric K with
/// ||K|| = ratio * min spec D.
pub fn random_admissible_pair(
    rng: &mut ChaCha8Rng,
    m: usize,
    ratio: f64,
) -> (OperatorMatrix, OperatorMatrix) {
    let mut q = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            q[(i, j)] = rng.random_range(-1.0..1.0);
        }
    }
    let orth = q.qr().q();
    let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        m,
        (0..m).map(|i| 1.0 + i as f64 / (m.max(2) - 1) as f64),
    ));
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
    if knorm > 0.0 {
        k *= ratio / knorm;
    }
    (
        OperatorMatrix { label: "D".into(), basis_label: "random".into(), mat: d },
        OperatorMatrix { label: "K".into(), basis_label: "random".into(), mat: k },
    )
}

/// Scatter command: scattering stage only.
pub fn cmd_scatter(cfg: &RunConfig, out_dir: &Path, report: &mut RunReport) -> Result<(), CliError> {
    scatter_stage(cfg, out_dir, report)?;
    Ok(())
}

/// GP command: scattering if needed, then the minimizer.
pub fn cmd_gp(cfg: &RunConfig, out_dir: &Path, report: &mut RunReport) -> Result<(), CliError> {
    let needs_scatter = cfg
        .gp
        .as_ref()
        .map(|g| g.a0.is_from_scattering())
        .transpose()?
        .unwrap_or(false);
    let scatter = if needs_scatter && cfg.potential.is_some() {
        Some(scatter_stage(cfg, out_dir, report)?)
    } else {
        None
    };
    gp_stage(cfg, out_dir, report, scatter.as_ref())?;
    Ok(())
}

/// Spectrum command: the full pipeline.
pub fn cmd_spectrum(cfg: &RunConfig, out_dir: &Path, report: &mut RunReport) -> Result<(), CliError> {
    let scatter = if cfg.potential.is_some() {
        Some(scatter_stage(cfg, out_dir, report)?)
    } else {
        None
    };
    spectrum_stage(cfg, out_dir, report, scatter.as_ref())?;
    Ok(())
}

pub fn cmd_fock_check(cfg: &RunConfig, report: &mut RunReport) -> Result<(), CliError> {
    fock_stage(cfg, report)
}

pub fn cmd_verify(seed: u64, report: &mut RunReport) -> Result<(), CliError> {
    verify_battery(seed, report)
}
