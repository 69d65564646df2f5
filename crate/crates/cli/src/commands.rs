use std::path::Path;

use log::{info, warn};
use posterior_lab::contraction::TruncationGuard;
use posterior_lab::posterior::{
    assemble_precision, posterior_covariance_covform, posterior_mean, posterior_mean_covform, relative_dense,
    relative_vec,
};
use posterior_lab::{
    exponent_curve, fit_loglog_slope, generate_data, make_truth, operator_bound_probe, run_rate_experiment,
    tau_schedule, theoretical_exponent, verify_assumptions, BoundQuery, Coefs, RateExperiment, RateParams,
    RateTarget, RngSeed, Setup, StreamPurpose,
};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{header, hex_sha256, sci, Manifest, OutputDir};

/// A loaded configuration together with the values the manifest records.
pub struct Run {
    pub cfg: RunConfig,
    pub config_sha256: String,
    pub seed: u64,
}

impl Run {
    pub fn new(cfg: RunConfig, config_text: &str, seed_override: Option<u64>) -> Self {
        let seed = seed_override.unwrap_or(cfg.seed);
        Self {
            cfg,
            config_sha256: hex_sha256(config_text.as_bytes()),
            seed,
        }
    }

    fn manifest(&self, command: &'static str, notes: Vec<String>) -> Manifest<'static> {
        Manifest {
            command,
            config_sha256: self.config_sha256.clone(),
            seed: self.seed,
            n_trunc: self.cfg.model.n_trunc,
            n_check: self.cfg.n_check(),
            notes,
        }
    }
}

fn pass_str(pass: bool) -> String {
    pass.to_string()
}

/// Reads one coefficient per line; blank lines are ignored.
pub fn read_observations(path: &Path, dim: usize) -> CliResult<Coefs> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut values = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| CliError::Input {
            path: path.to_path_buf(),
            message: format!("line {}: cannot parse `{line}` as a number", i + 1),
        })?;
        if !v.is_finite() {
            return Err(CliError::Input {
                path: path.to_path_buf(),
                message: format!("line {}: value must be finite", i + 1),
            });
        }
        values.push(v);
    }
    if values.len() != dim {
        return Err(CliError::Input {
            path: path.to_path_buf(),
            message: format!("expected {dim} coefficients (one per line), found {}", values.len()),
        });
    }
    Ok(Coefs::new(values))
}

pub fn posterior(run: &Run, data: Option<&Path>, out: &mut OutputDir) -> CliResult<()> {
    let cfg = &run.cfg;
    let setup = cfg.setup(cfg.model.n_trunc)?;
    let (y, source) = match data {
        Some(path) => (read_observations(path, setup.dim())?, "file"),
        None => {
            let truth = make_truth(&cfg.truth()?, &setup);
            let mut rng = RngSeed(run.seed).stream(0, StreamPurpose::Data);
            (generate_data(&setup, &truth, &mut rng)?, "synthetic")
        }
    };
    let mean = posterior_mean(&setup, &y)?;
    let mean_cf = posterior_mean_covform(&setup, &y)?;
    let factor = assemble_precision(&setup)?.factor()?;
    let cov = factor.inverse() / setup.n();
    let trace = factor.trace_inverse() / setup.n();
    let cov_cf = posterior_covariance_covform(&setup)?.to_dense();
    let mean_rel = relative_vec(&mean, &mean_cf);
    let cov_rel = relative_dense(&cov, &cov_cf);
    let tol = cfg.tolerances.dual;

    let rows: Vec<Vec<String>> = (0..setup.dim())
        .map(|k| vec![(k + 1).to_string(), sci(mean.as_slice()[k]), sci(mean_cf.as_slice()[k])])
        .collect();
    out.write_csv("posterior_mean.csv", &header(&["k", "mean", "mean_covform"]), &rows)?;
    let rows: Vec<Vec<String>> = (0..setup.dim())
        .map(|k| vec![(k + 1).to_string(), sci(cov[(k, k)])])
        .collect();
    out.write_csv("posterior_covariance_diag.csv", &header(&["k", "variance"]), &rows)?;
    out.write_csv(
        "posterior_summary.csv",
        &header(&["n_trunc", "n", "tau", "lambda", "trace_cov", "data_source"]),
        &[vec![
            setup.dim().to_string(),
            sci(setup.n()),
            sci(setup.tau()),
            sci(setup.lambda()),
            sci(trace),
            source.to_string(),
        ]],
    )?;
    let check = |name: &str, rel: f64| vec![name.to_string(), sci(rel), sci(tol), pass_str(rel <= tol)];
    out.write_csv(
        "dual_check.csv",
        &header(&["quantity", "relative_error", "tolerance", "pass"]),
        &[check("mean", mean_rel), check("covariance", cov_rel)],
    )?;
    run.manifest("posterior", Vec::new()).write(out)?;
    info!("dual forms: mean {mean_rel:.3e}, covariance {cov_rel:.3e}");
    if !(mean_rel <= tol && cov_rel <= tol) {
        return Err(CliError::Tolerance(format!(
            "dual formulas differ by {:.3e} (tolerance {tol:.1e})",
            mean_rel.max(cov_rel)
        )));
    }
    Ok(())
}

/// `theta` whose weighted norm `eta(theta)` equals the order `t`.
fn theta_for_order(setup: &Setup, t: f64) -> CliResult<f64> {
    let w = setup.params().weak_exponent();
    if (1.0 - w).abs() < 1e-12 {
        return Err(CliError::Config("norm order cannot be mapped when beta - 2 ell = 1".into()));
    }
    Ok((t - w) / (1.0 - w))
}

fn eta_label(setup: &Setup, theta: f64) -> String {
    format!("mise_eta_{}", setup.params().eta(theta))
}

pub fn rates(run: &Run, out: &mut OutputDir) -> CliResult<()> {
    let cfg = &run.cfg;
    let setup = cfg.setup(cfg.model.n_trunc)?;
    let params = cfg.rate_params(&setup)?;
    let schedule = tau_schedule(cfg.tau_rule(&params)?, params)?;
    let target = cfg.rate_target()?;
    let mut thetas = cfg.grids.thetas.clone();
    let fitted_column = match target {
        RateTarget::MeanError { theta } => Some(theta),
        RateTarget::PerturbedLaplacianMeanError { t, .. }
        | RateTarget::PerturbedLaplacianColoredNoiseMeanError { t, .. } => Some(theta_for_order(&setup, t)?),
        _ => None,
    };
    if let Some(theta) = fitted_column {
        thetas.push(theta);
    }
    let labels: Vec<String> = thetas.iter().map(|&th| eta_label(&setup, th)).collect();

    let mut exp = RateExperiment::new(setup, cfg.truth()?, schedule, cfg.n_grid(), target);
    exp.thetas = thetas.clone();
    exp.guard = Some(TruncationGuard {
        n_check: cfg.n_check(),
        tolerance: cfg.tolerances.guard,
    });
    let result = run_rate_experiment(&exp)?;

    let mut cols = header(&["n", "tau", "lambda", "bias_sq", "variance", "trace_term", "spc"]);
    cols.extend(labels.iter().cloned());
    let rows: Vec<Vec<String>> = result
        .points
        .iter()
        .map(|p| {
            let mut row = vec![
                sci(p.n),
                sci(p.tau),
                sci(p.lambda),
                sci(p.terms.bias_sq),
                sci(p.terms.variance),
                sci(p.terms.trace_term),
                sci(p.terms.spc),
            ];
            row.extend(p.mean_errors.iter().map(|v| sci(*v)));
            row
        })
        .collect();
    out.write_csv("rates.csv", &cols, &rows)?;

    let (quantity, fit) = match fitted_column {
        Some(_) => (
            labels.last().expect("column added").clone(),
            *result.mean_error_fits.last().expect("column added"),
        ),
        None => ("spc".to_string(), result.fit),
    };
    let tol = cfg.tolerances.slope;
    let pass = (fit.slope - result.target_slope).abs() <= tol;
    let opt = |v: Option<f64>| v.map(sci).unwrap_or_default();
    out.write_csv(
        "rates_summary.csv",
        &header(&[
            "quantity",
            "fitted_slope",
            "slope_stderr",
            "theoretical_exponent",
            "target_slope",
            "tolerance",
            "pass",
            "schedule_exponent",
            "guard_n_check",
            "guard_relative_change",
            "truth_norm_drift",
        ]),
        &[vec![
            quantity.clone(),
            sci(fit.slope),
            opt(fit.stderr),
            sci(result.theoretical_exponent),
            sci(result.target_slope),
            sci(tol),
            pass_str(pass),
            sci(schedule.exponent),
            cfg.n_check().to_string(),
            opt(result.guard.map(|g| g.relative_change)),
            opt(result.truth_norm_drift),
        ]],
    )?;
    run.manifest("rates", Vec::new()).write(out)?;
    info!(
        "{quantity} slope {:.4} (target {:.4}, tolerance {tol})",
        fit.slope, result.target_slope
    );
    if !pass {
        return Err(CliError::Tolerance(format!(
            "{quantity} slope {:.4} is not within {tol} of {:.4}",
            fit.slope, result.target_slope
        )));
    }
    Ok(())
}

pub fn bounds(run: &Run, out: &mut OutputDir) -> CliResult<()> {
    let cfg = &run.cfg;
    let setup = cfg.setup(cfg.model.n_trunc)?;
    let params = setup.params();
    let lambdas = cfg.lambda_grid();
    let tol = cfg.tolerances.bound_slope;
    let mut summary = Vec::new();
    let mut failures = Vec::new();
    let mut notes = Vec::new();

    type Family = (&'static str, &'static str, &'static str, Vec<(f64, BoundQuery)>);
    let mut families: Vec<Family> = vec![
        (
            "energy",
            "bounds.csv",
            "theta",
            cfg.grids.bound_thetas.iter().map(|&th| (th, BoundQuery::into_energy_space(th, params))).collect(),
        ),
        (
            "weak",
            "bounds_weak.csv",
            "theta",
            cfg.grids.bound_thetas.iter().map(|&th| (th, BoundQuery::into_weak_space(th, params))).collect(),
        ),
    ];
    if cfg.grids.ambient {
        let queries: Vec<(f64, BoundQuery)> = cfg
            .grids
            .bound_thetas
            .iter()
            .map(|&th| (th, BoundQuery::into_ambient_space(th, params)))
            .collect();
        if queries.iter().any(|(_, q)| q.reference_slope.is_none()) {
            notes.push("ambient-space bounds have no reference when beta - 2 ell > 0".to_string());
        }
        families.push(("ambient", "bounds_ambient.csv", "theta", queries));
    }
    if !cfg.grids.spread_s.is_empty() {
        families.push((
            "spread",
            "bounds_spread.csv",
            "s",
            cfg.grids.spread_s.iter().map(|&s| (s, BoundQuery::spread(s, params))).collect(),
        ));
    }

    for (space, file, order_name, queries) in families {
        let mut rows = Vec::new();
        for (order, query) in queries {
            let curve = operator_bound_probe(&setup, query, &lambdas)?;
            for (l, v) in curve.lambdas.iter().zip(&curve.norms) {
                let reference = query.reference_slope.map(|r| sci(l.powf(r))).unwrap_or_default();
                rows.push(vec![sci(*l), sci(order), sci(*v), reference]);
            }
            let pass = match query.reference_slope {
                // The spread bound is an upper bound only.
                Some(r) if space == "spread" => curve.fit.slope >= r - tol,
                Some(r) => (curve.fit.slope - r).abs() <= tol,
                None => true,
            };
            if !pass {
                failures.push(format!("{space} {order_name} = {order}: slope {:.4}", curve.fit.slope));
            }
            summary.push(vec![
                space.to_string(),
                order_name.to_string(),
                sci(order),
                sci(curve.fit.slope),
                query.reference_slope.map(sci).unwrap_or_default(),
                sci(tol),
                pass_str(pass),
            ]);
        }
        out.write_csv(file, &header(&["lambda", order_name, "measured_norm", "reference"]), &rows)?;
    }
    out.write_csv(
        "bounds_summary.csv",
        &header(&["space", "order_name", "order", "fitted_slope", "reference_slope", "tolerance", "pass"]),
        &summary,
    )?;
    run.manifest("bounds", notes).write(out)?;
    if !failures.is_empty() {
        return Err(CliError::Tolerance(failures.join("; ")));
    }
    Ok(())
}

pub fn diagnostics(run: &Run, out: &mut OutputDir) -> CliResult<()> {
    let cfg = &run.cfg;
    let setup = cfg.setup(cfg.model.n_trunc)?;
    let report = verify_assumptions(&setup, cfg.grids.probes, cfg.n_check(), RngSeed(run.seed))?;
    let tol = cfg.tolerances.drift;
    let p = setup.params();
    let mut text = format!(
        "n_trunc = {}\nn_fine = {}\nprobes = {}\ns0 = {}\nbeta = {}\nell = {}\ndelta = {}\ndrift_tolerance = {}\n",
        report.n_coarse,
        report.n_fine,
        report.probes,
        sci(p.s0),
        sci(p.beta),
        sci(p.ell),
        sci(p.delta),
        sci(tol)
    );
    let mut rows = Vec::new();
    let mut all_pass = true;
    for e in &report.entries {
        let finite = e.min > 0.0 && e.max.is_finite() && e.min_fine > 0.0 && e.max_fine.is_finite();
        let pass = finite && e.drift < tol;
        all_pass &= pass;
        let exponent = e.exponent.map(sci).unwrap_or_else(|| "none".into());
        text.push_str(&format!(
            "\n[{}]\nexponent = {}\nmin = {}\nmax = {}\nmin_fine = {}\nmax_fine = {}\ndrift = {}\npass = {}\n",
            e.item.label(),
            exponent,
            sci(e.min),
            sci(e.max),
            sci(e.min_fine),
            sci(e.max_fine),
            sci(e.drift),
            pass
        ));
        let exponent_cell = e.exponent.map(sci).unwrap_or_default();
        for (i, r) in e.ratios.iter().enumerate() {
            let kind = if i < report.n_coarse { "basis" } else { "random" };
            rows.push(vec![
                e.item.label().to_string(),
                exponent_cell.clone(),
                kind.to_string(),
                i.to_string(),
                sci(*r),
            ]);
        }
    }
    text.push_str(&format!("\nall_pass = {all_pass}\n"));
    out.write_bytes("assumptions.txt", text.as_bytes())?;
    out.write_csv(
        "assumptions.csv",
        &header(&["item", "exponent", "probe_kind", "probe", "ratio"]),
        &rows,
    )?;
    run.manifest("diagnostics", Vec::new()).write(out)?;
    if !all_pass {
        return Err(CliError::Tolerance(format!(
            "assumption ratios drift by up to {:.3e} (tolerance {tol})",
            report.max_drift()
        )));
    }
    Ok(())
}

pub const REFERENCE_CURVE_NOTE: &str =
    "only the contraction exponent of this method is emitted; the comparison curve of the optimal rate is omitted";

pub fn figure_rates(run: &Run, out: &mut OutputDir) -> CliResult<()> {
    let cfg = &run.cfg;
    let setup = cfg.setup(cfg.model.n_trunc)?;
    let base = cfg.rate_params(&setup)?;
    let curve = exponent_curve(&base, &cfg.gamma_grid()?)?;
    let rows: Vec<Vec<String>> = curve.iter().map(|(g, e)| vec![sci(*g), sci(*e)]).collect();
    out.write_csv("exponent_curve.csv", &header(&["gamma", "exponent"]), &rows)?;
    warn!("{REFERENCE_CURVE_NOTE}");
    run.manifest("figure-rates", vec![REFERENCE_CURVE_NOTE.to_string()])
        .write(out)?;
    Ok(())
}

/// Built-in checks that need no configuration. Returns one line per check.
pub fn self_test(command: &str) -> CliResult<Vec<(String, bool)>> {
    use posterior_lab::{build_diagonal, geometric_grid, Spectrum};
    let mut lines = Vec::new();
    match command {
        "posterior" => {
            let s = Spectrum::algebraic(1)?;
            let setup = build_diagonal(&s, 1.0, 0.0, 0.0, 1.0, 1.0)?;
            let y = Coefs::new(vec![1.0]);
            let m = posterior_mean(&setup, &y)?.as_slice()[0];
            let m_cf = posterior_mean_covform(&setup, &y)?.as_slice()[0];
            lines.push((format!("scalar posterior mean {m} (expected 0.5)"), m == 0.5));
            lines.push((format!("covariance-form mean {m_cf} (expected 0.5)"), (m_cf - 0.5).abs() < 1e-15));
        }
        "rates" => {
            let xs = geometric_grid(1e3, 1e9, 7);
            let ys: Vec<f64> = xs.iter().map(|x| 7.0 * x.powf(-0.5)).collect();
            let fit = fit_loglog_slope(&xs, &ys)?;
            lines.push((
                format!("power-law fit slope {} (expected -0.5)", fit.slope),
                (fit.slope + 0.5).abs() < 1e-12,
            ));
        }
        "bounds" => {
            let setup = build_diagonal(&Spectrum::algebraic(1024)?, 1.0, 0.5, 0.5, 1.0, 1.0)?;
            let q = BoundQuery::into_energy_space(1.0, setup.params());
            let curve = operator_bound_probe(&setup, q, &geometric_grid(1.0, 1e-6, 8))?;
            lines.push((
                format!("energy-space slope {} (expected -1)", curve.fit.slope),
                (curve.fit.slope + 1.0).abs() <= 0.05,
            ));
        }
        "diagnostics" => {
            let setup = build_diagonal(&Spectrum::algebraic(32)?, 1.0, 0.5, 0.5, 1.0, 1.0)?;
            let report = verify_assumptions(&setup, 8, 64, RngSeed(0))?;
            let forward = &report.entries[0];
            let exact = forward.ratios.iter().all(|r| (r - 1.0).abs() < 1e-12);
            lines.push(("matched diagonal forward ratios equal 1".to_string(), exact));
        }
        "figure-rates" => {
            let p = RateParams::new(1.0, 1.5, 0.5, 0.0, 0.5, 0.5)?;
            let e = theoretical_exponent(RateTarget::Contraction, &p)?;
            lines.push((format!("exponent at gamma = 1 is {e} (expected 0.25)"), e == 0.25));
        }
        _ => unreachable!("subcommands are fixed by the parser"),
    }
    Ok(lines)
}
