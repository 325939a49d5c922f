//! Subcommand bodies. Each writes its artifacts into the output directory
//! and returns a short summary for the terminal.

use crate::config::RunConfig;
use anyhow::{bail, Context, Result};
use hsc_core::dispersion::{classify_stability, fastest_growing_mode, growth_bound, spectral_bound, DispersionTable, Verdict};
use hsc_core::elliptic::EllipticSolver;
use hsc_core::evolution::{simulate_with, Snapshot, Termination};
use hsc_core::geometry::InterfaceShape;
use hsc_core::spectral::CircleFunction;
use hsc_core::verify::{run_all, Report, VerifyOptions, CRITERIA};
use serde_json::json;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Full double precision: 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
}

fn prepare_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

pub fn dispersion(cfg: &RunConfig, out: &Path) -> Result<String> {
    let model = cfg.model()?;
    let table = DispersionTable::new(&model, cfg.n_max)?;
    let verdict = match classify_stability(&model, cfg.n_max) {
        Ok(v) => v.to_string(),
        Err(e) => format!("inconsistent: {e}"),
    };
    prepare_dir(out)?;
    let path = out.join("dispersion.csv");
    let mut w = writer(&path)?;
    w.write_record(["n", "re_l_n", "im_l_n", "a_n", "mu_n", "re_q_n", "im_q_n"])?;
    let n_max = cfg.n_max as i64;
    for n in (-n_max..=n_max).filter(|&n| n != 0) {
        let r = table.record(n).expect("within table");
        w.write_record([n.to_string(), num(r.l_n.re), num(r.l_n.im), num(r.a_n), num(r.mu_n), num(r.q_n.re), num(r.q_n.im)])?;
    }
    w.flush()?;
    let (mode, rate) = fastest_growing_mode(&table);
    write_json(
        &out.join("dispersion.json"),
        &json!({
            "config": cfg,
            "model": model,
            "n_max": cfg.n_max,
            "classification": verdict,
            "spectral_verdict": table.spectral_verdict().to_string(),
            "lambda_star": table.lambda_star,
            "growth_bound": growth_bound(&model.coeffs, model.sigma),
            "lambda_star_bound_holds": table.max_growth() < spectral_bound(&model.coeffs),
            "max_growth": table.max_growth(),
            "fastest_mode": mode,
            "fastest_rate": rate,
            "coriolis_asymmetry": table.coriolis_b,
        }),
    )?;
    let stable = table.spectral_verdict() == Verdict::Stable;
    Ok(format!(
        "{verdict}: max Re q_n = {:.6e} at n = {mode}; λ* = {:.6}{}; wrote {}",
        table.max_growth(),
        table.lambda_star,
        if stable { "" } else { " (growing modes present)" },
        path.display()
    ))
}

fn spectrum_rows(w: &mut csv::Writer<File>, s: &Snapshot) -> Result<()> {
    let nyq = (s.spectrum.len() / 2) as i64;
    for k in 0..=nyq {
        let c = s.mode(k);
        w.write_record([s.step.to_string(), num(s.t), k.to_string(), num(c.re), num(c.im)])?;
    }
    Ok(())
}

fn outline_rows(w: &mut csv::Writer<File>, s: &Snapshot) -> Result<()> {
    let spec = hsc_core::spectral::SpectralCoeffs::from_fft_order(s.spectrum.clone())?;
    let rho = spec.from_spectral()?;
    for (t, r) in rho.nodes().iter().zip(rho.values()) {
        let radius = 1.0 + r;
        w.write_record([s.step.to_string(), num(s.t), num(*t), num(radius * t.cos()), num(radius * t.sin())])?;
    }
    Ok(())
}

pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<(String, bool)> {
    let sim = cfg.simulation()?;
    prepare_dir(out)?;
    let mut spectra = writer(&out.join("spectra.csv"))?;
    spectra.write_record(["step", "t", "n", "re", "im"])?;
    let mut monitors = writer(&out.join("monitors.csv"))?;
    monitors.write_record(["step", "t", "max_abs_rho", "area_drift", "weighted_norm", "inversion_residual"])?;
    let mut outline = writer(&out.join("outline.csv"))?;
    outline.write_record(["step", "t", "theta", "x", "y"])?;
    let mut failure: Option<anyhow::Error> = None;
    let result = simulate_with(&sim, |s| {
        if failure.is_some() {
            return;
        }
        let r = spectrum_rows(&mut spectra, s)
            .and_then(|_| outline_rows(&mut outline, s))
            .and_then(|_| {
                monitors.write_record([s.step.to_string(), num(s.t), num(s.max_rho), num(s.area_drift), num(s.weighted_norm), num(s.inversion_residual)])?;
                spectra.flush()?;
                outline.flush()?;
                monitors.flush()?;
                Ok(())
            });
        if let Err(e) = r {
            failure = Some(e);
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let last = result.snapshots.last().expect("initial snapshot");
    write_json(
        &out.join("manifest.json"),
        &json!({
            "config": cfg,
            "initial_modes": sim.initial,
            "dt": result.dt,
            "termination": result.termination,
            "monitors": result.monitors,
            "snapshots": result.snapshots.iter().map(|s| json!({
                "step": s.step,
                "t": s.t,
                "max_abs_rho": s.max_rho,
                "area_drift": s.area_drift,
                "weighted_norm": s.weighted_norm,
            })).collect::<Vec<_>>(),
            "files": ["spectra.csv", "monitors.csv", "outline.csv"],
        }),
    )?;
    let ok = !matches!(result.termination, Termination::Failed(_));
    let summary = match &result.termination {
        Termination::Failed(e) => format!("run stopped at t = {} after {} steps: {e}", last.t, last.step),
        Termination::AmplitudeReached => format!("stop amplitude reached at t = {} (step {})", last.t, last.step),
        Termination::Completed => format!(
            "completed {} steps to t = {}; max ‖ρ‖∞ = {:.3e}, max area drift = {:.3e}",
            last.step, last.t, result.monitors.max_rho, result.monitors.max_area_drift
        ),
    };
    Ok((summary, ok))
}

/// Boundary data: a CSV with columns `rho`, `h` (inner Neumann data) and
/// `g` (outer Dirichlet data), one row per angular node.
pub fn read_boundary(path: &Path, n: usize) -> Result<(CircleFunction, CircleFunction, CircleFunction)> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let headers = r.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name).with_context(|| format!("{} lacks a `{name}` column", path.display()));
    let (ci, ch, cg) = (col("rho")?, col("h")?, col("g")?);
    let (mut rho, mut h, mut g) = (Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let get = |c: usize| -> Result<f64> {
            rec.get(c)
                .and_then(|v| v.trim().parse().ok())
                .with_context(|| format!("{}: row {} has a bad number", path.display(), i + 2))
        };
        rho.push(get(ci)?);
        h.push(get(ch)?);
        g.push(get(cg)?);
    }
    if rho.len() != n {
        bail!("{} has {} rows, the grid has N = {n}", path.display(), rho.len());
    }
    Ok((CircleFunction::new(rho)?, CircleFunction::new(h)?, CircleFunction::new(g)?))
}

pub fn solve_elliptic(cfg: &RunConfig, boundary: &Path, out: &Path) -> Result<String> {
    let model = cfg.model()?;
    let (rho, h, g) = read_boundary(boundary, cfg.grid.n)?;
    let shape = InterfaceShape::new(rho)?;
    let solver = EllipticSolver::new(model.coeffs, model.cell_radius, cfg.grid)?;
    let (inner, inner_flux, inner_report) = solver.solve_inner(&shape, &h)?;
    let (outer, outer_flux, outer_report) = solver.solve_outer(&shape, &g)?;
    prepare_dir(out)?;
    for (name, field) in [("inner_field.csv", &inner), ("outer_field.csv", &outer)] {
        let mut w = writer(&out.join(name))?;
        w.write_record(["s", "theta", "r", "value"])?;
        let radius = solver.physical_radius(&shape, field);
        let nodes = h.nodes();
        for (j, s) in field.s.iter().enumerate() {
            for (k, t) in nodes.iter().enumerate() {
                let i = j * field.n_theta + k;
                w.write_record([num(*s), num(*t), num(radius[i]), num(field.values[i])])?;
            }
        }
        w.flush()?;
    }
    let mut w = writer(&out.join("flux.csv"))?;
    w.write_record(["theta", "inner_flux", "outer_flux"])?;
    for ((t, a), b) in h.nodes().iter().zip(inner_flux.values.values()).zip(outer_flux.values.values()) {
        w.write_record([num(*t), num(*a), num(*b)])?;
    }
    w.flush()?;
    write_json(
        &out.join("solve.json"),
        &json!({
            "config": cfg,
            "inner": inner_report,
            "outer": outer_report,
            "inner_total_flux": inner_flux.weighted_integral(&shape),
            "outer_total_flux": outer_flux.weighted_integral(&shape),
        }),
    )?;
    Ok(format!(
        "inner: {} iterations, residual {:.2e}; outer: {} iterations, residual {:.2e}",
        inner_report.iterations, inner_report.residual, outer_report.iterations, outer_report.residual
    ))
}

/// Runs the acceptance criteria; the report goes to `out/verify.json` when
/// an existing directory is given.
pub fn verify(only: Option<&[u8]>, seed: Option<u64>, out: Option<&PathBuf>) -> Result<Report> {
    if let Some(dir) = out {
        if !dir.is_dir() {
            bail!("output directory {} does not exist", dir.display());
        }
    }
    let mut opts = VerifyOptions::default();
    if let Some(s) = seed {
        opts.seed = s;
    }
    let ids = only.unwrap_or(&CRITERIA);
    if let Some(bad) = ids.iter().find(|id| !CRITERIA.contains(id)) {
        bail!("no criterion {bad}; valid ids are 1 to 9");
    }
    let report = run_all(ids, &opts);
    if let Some(dir) = out {
        let path = dir.join("verify.json");
        let mut f = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
        f.write_all(serde_json::to_string_pretty(&report)?.as_bytes())?;
        f.write_all(b"\n")?;
    }
    Ok(report)
}
