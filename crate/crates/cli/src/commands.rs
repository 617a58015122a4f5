use std::fmt::Write as _;
use std::path::Path;

use polarqdt::potential::{adiabatic_curves, log_grid, AdiabaticPotential, Channel, ChannelBasis};
use polarqdt::propagator::{self, calibrate, CalibratedParams, GridPolicy};
use polarqdt::qdt::{self, ShortRangeParams};
use polarqdt::scan::{self, ChannelSelection, Dataset, RateCurve};
use polarqdt::units;

use crate::config::{channels_up_to, RunConfig, Task};
use crate::CliError;

fn numerical(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

/// Shortest round-trip text; scientific outside [1e-3, 1e6).
fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-3..1e6).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn csv_body(write: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    write(&mut w).map_err(numerical)?;
    let bytes = w.into_inner().map_err(numerical)?;
    String::from_utf8(bytes).map_err(numerical)
}

fn calibrated(run: &RunConfig) -> Result<CalibratedParams, CliError> {
    let params = ShortRangeParams::new(run.s, run.y, run.r_match).map_err(numerical)?;
    calibrate(&run.system, &params, &run.scan.policy).map_err(numerical)
}

/// Output body (without header) of one run.
pub fn execute(run: &RunConfig) -> Result<String, CliError> {
    match &run.task {
        Task::Adiabats { m, r_grid } => adiabats(run, *m, *r_grid),
        Task::Ploss { l_max, e_grid_uk } => ploss(run, *l_max, *e_grid_uk),
        Task::Rates { energy, d_grid_debye } => rates(run, *energy, *d_grid_debye),
        Task::Resonances { energy, d_grid_debye, prominence } => resonances(run, *energy, *d_grid_debye, *prominence),
        Task::Fit { energy, dataset, spec } => fit(run, *energy, dataset, spec),
        Task::Selfcheck => selfcheck(run),
    }
}

fn adiabats(run: &RunConfig, m: i32, (r_min, r_max, n): (f64, f64, usize)) -> Result<String, CliError> {
    let system = run.system.with_dipole(run.dipole).map_err(numerical)?;
    let basis = ChannelBasis::new(m, system.symmetry().parity(), run.scan.l_max).map_err(numerical)?;
    let curves = adiabatic_curves(&system, &basis, &log_grid(r_min, r_max, n)).map_err(numerical)?;
    for curve in &curves {
        if let Some(b) = curve.barrier {
            log::info!(
                "{}: barrier {:.6} uK at {:.3} bohr",
                curve.asymptotic_channel,
                units::hartree_to_microkelvin(b.height),
                b.r
            );
        }
    }
    csv_body(|w| {
        w.write_record(["R_bohr", "curve_label", "V_hartree"])?;
        for curve in &curves {
            let label = curve.asymptotic_channel.to_string();
            for (r, v) in curve.r_grid.iter().zip(&curve.potential) {
                w.write_record([num(*r), label.clone(), num(*v)])?;
            }
        }
        Ok(())
    })
}

fn ploss(run: &RunConfig, l_max: u32, (e_min, e_max, n): (f64, f64, usize)) -> Result<String, CliError> {
    let system = run.system.with_dipole(run.dipole).map_err(numerical)?;
    let cal = calibrated(run)?;
    let channels = channels_up_to(system.symmetry(), l_max);
    if channels.is_empty() {
        return Err(CliError::Config(vec![format!("no channel with L <= {l_max} is allowed by the symmetry")]));
    }
    let ratio = (e_max / e_min).ln();
    let energies: Vec<f64> =
        (0..n).map(|i| units::microkelvin_to_hartree(e_min * (ratio * i as f64 / (n - 1) as f64).exp())).collect();
    let curve = scan::scan_energy(&system, &cal, &ChannelSelection::Only(channels.clone()), &energies, &run.scan)
        .map_err(numerical)?;

    // QT-model barriers per channel; none for s-wave at zero field
    let abar = qdt::mean_scattering_length(system.mu(), system.c6()).map_err(numerical)?;
    let mut barriers = Vec::new();
    for &c in &channels {
        let potential = AdiabaticPotential::for_channel(&system, c, run.scan.l_max).map_err(numerical)?;
        let barrier = potential.barrier(run.r_match, 200.0 * abar).map_err(numerical)?;
        let transmission = qdt::barrier_transmission(c.l).map_err(numerical)?;
        barriers.push((c, barrier.map(|b| (b.height, transmission.value))));
    }

    csv_body(|w| {
        w.write_record(["E_uK", "L", "M", "P_loss_numeric", "P_loss_analytic_lowE", "P_loss_qt"])?;
        for point in &curve.points {
            let k = qdt::wavenumber(system.mu(), point.x);
            for (c, barrier) in &barriers {
                let numeric = point.p_loss[c];
                let analytic = if c.l <= 1 {
                    let a = qdt::analytic_scattering_length(c.l, &cal.params, &system, k);
                    a.map(|a| num(-(-4.0 * k * a.beta).exp_m1())).unwrap_or_default()
                } else {
                    String::new()
                };
                let qt = barrier
                    .and_then(|(v_b, p_b)| qdt::qt_model_ploss(point.x, v_b, p_b).ok())
                    .map(num)
                    .unwrap_or_default();
                w.write_record([
                    num(units::hartree_to_microkelvin(point.x)),
                    c.l.to_string(),
                    c.m.to_string(),
                    num(numeric),
                    analytic,
                    qt,
                ])?;
            }
        }
        Ok(())
    })
}

fn dipole_curve(run: &RunConfig, energy: f64, (d_min, d_max, n): (f64, f64, usize)) -> Result<RateCurve, CliError> {
    let cal = calibrated(run)?;
    let grid: Vec<f64> = linspace(d_min, d_max, n).into_iter().map(units::debye_to_au).collect();
    scan::scan_dipole(&run.system, &cal, energy, &grid, &run.scan).map_err(|f| {
        log::error!("{} of {} grid points completed before the failure", f.partial.points.len(), grid.len());
        numerical(f.error)
    })
}

fn channel_column(c: &Channel) -> String {
    format!("K_{}_{}", c.l, c.m)
}

fn rates(run: &RunConfig, energy: f64, d_grid: (f64, f64, usize)) -> Result<String, CliError> {
    let curve = dipole_curve(run, energy, d_grid)?;
    let channels = curve.channels();
    csv_body(|w| {
        let mut header = vec!["d_debye".to_string(), "K_total_cm3_s".to_string()];
        header.extend(channels.iter().map(channel_column));
        w.write_record(&header)?;
        for point in &curve.points {
            let mut row = vec![num(units::au_to_debye(point.x)), num(units::rate_au_to_cm3_per_s(point.total))];
            row.extend(
                channels
                    .iter()
                    .map(|c| num(units::rate_au_to_cm3_per_s(point.per_channel.get(c).copied().unwrap_or(0.0)))),
            );
            w.write_record(&row)?;
        }
        Ok(())
    })
}

fn resonances(run: &RunConfig, energy: f64, d_grid: (f64, f64, usize), prominence: f64) -> Result<String, CliError> {
    let curve = dipole_curve(run, energy, d_grid)?;
    let found = scan::detect_resonances(&curve, prominence);
    let mut out = csv_body(|w| {
        w.write_record(["d_debye", "prominence"])?;
        for r in &found {
            w.write_record([num(units::au_to_debye(r.position)), num(r.prominence)])?;
        }
        Ok(())
    })?;
    let positions: Vec<f64> = found.iter().map(|r| units::au_to_debye(r.position)).collect();
    if positions.len() >= 4 {
        let series = scan::fit_resonance_series(&positions).map_err(numerical)?;
        let _ = writeln!(out, "# series_e_scale_debye={}", num(series.e_scale));
        let _ = writeln!(out, "# series_n0={}", num(series.n0));
        let _ = writeln!(out, "# series_n_inf={}", num(series.n_inf));
        let _ = writeln!(out, "# series_residual={}", num(series.residual));
    } else {
        let _ = writeln!(out, "# series_fit=skipped, {} resonances found", positions.len());
    }
    Ok(out)
}

fn fit(run: &RunConfig, energy: f64, dataset: &str, spec: &scan::FitSpec) -> Result<String, CliError> {
    let data = Dataset::from_path(Path::new(dataset)).map_err(|e| CliError::Config(vec![format!("dataset: {e}")]))?;
    let result = scan::fit_short_range(&data, &run.system, energy, spec, &run.scan).map_err(numerical)?;
    let mut out = String::new();
    let _ = writeln!(out, "dataset={}", data.provenance);
    let _ = writeln!(out, "rows={}", data.rows.len());
    let _ = writeln!(out, "s={}", num(result.s));
    let _ = writeln!(out, "y={}", num(result.y));
    let _ = writeln!(out, "free={}", result.free.join(","));
    let _ = writeln!(out, "chi2={}", num(result.chi2));
    let _ = writeln!(out, "dof={}", result.dof);
    match &result.covariance {
        Some(cov) => {
            for (i, a) in result.free.iter().enumerate() {
                let _ = writeln!(out, "sigma_{a}={}", num(cov[i][i].sqrt()));
                for (j, b) in result.free.iter().enumerate() {
                    let _ = writeln!(out, "cov_{a}_{b}={}", num(cov[i][j]));
                }
            }
        }
        None => {
            let _ = writeln!(out, "covariance=unavailable");
        }
    }
    let _ = writeln!(
        out,
        "on_bound={}",
        if result.on_bound.is_empty() { "none".to_string() } else { result.on_bound.join(",") }
    );
    let _ = writeln!(out, "converged={}", result.converged);
    let _ = writeln!(out, "iterations={}", result.evaluations);
    Ok(out)
}

struct Gate {
    name: &'static str,
    value: f64,
    pass: bool,
}

/// Scales of the configured system plus internal tolerance gates.
fn selfcheck(run: &RunConfig) -> Result<String, CliError> {
    let sys = run.system.with_dipole(0.0).map_err(numerical)?;
    let (mu, c6) = (sys.mu(), sys.c6());
    let scales = qdt::characteristic_energies(mu, c6).map_err(numerical)?;
    let abar = qdt::mean_scattering_length(mu, c6).map_err(numerical)?;
    let abar1 = qdt::p_wave_mean_scattering_length(mu, c6).map_err(numerical)?;

    let policy = run.scan.policy;
    let params = ShortRangeParams::new(0.0, 1.0, propagator::DEFAULT_R_MATCH).map_err(numerical)?;
    let cal = calibrate(&sys, &params, &policy).map_err(numerical)?;
    let mut gates = Vec::new();

    let s_wave = AdiabaticPotential::uncoupled(&sys, 0).map_err(numerical)?;
    let universal = propagator::propagate(&s_wave, &cal, scales.e0 / 100.0, &policy).map_err(numerical)?;
    let ratio = universal.scattering_length.beta / abar;
    gates.push(Gate { name: "universal_beta_over_abar", value: ratio, pass: (ratio - 1.0).abs() < 0.02 });

    let p_wave = AdiabaticPotential::uncoupled(&sys, 1).map_err(numerical)?;
    let barrier = p_wave
        .barrier(propagator::DEFAULT_R_MATCH, 100.0 * abar)
        .map_err(numerical)?
        .ok_or_else(|| CliError::Numerical("p-wave curve has no barrier".into()))?;
    let at_top = |policy: &GridPolicy| propagator::propagate(&p_wave, &cal, barrier.height, policy).map_err(numerical);
    let (coarse, fine) = (at_top(&policy)?, at_top(&policy.refined(2.0))?);
    gates.push(Gate {
        name: "p_wave_barrier_transmission",
        value: coarse.p_loss,
        pass: (coarse.p_loss - qdt::P_WAVE_BARRIER_TRANSMISSION).abs() <= 0.02,
    });
    let halving = (fine.p_loss / coarse.p_loss - 1.0).abs();
    gates.push(Gate { name: "grid_halving_relative_change", value: halving, pass: halving < 1e-3 });
    let modulus = universal.s_matrix.norm().max(coarse.s_matrix.norm());
    gates.push(Gate { name: "max_s_modulus", value: modulus, pass: modulus <= 1.0 + qdt::UNITARITY_TOLERANCE });
    let morse = qdt::inverse_morse_transmission(1, 6).map_err(numerical)?;
    let exact = -(-8.0 * std::f64::consts::PI / 3.0).exp_m1() / 2.0;
    gates.push(Gate { name: "inverse_morse_p_wave", value: morse, pass: (morse - exact).abs() <= 1e-12 });

    let mut out = String::new();
    let _ = writeln!(out, "E0_uK={}", num(units::hartree_to_microkelvin(scales.e0)));
    let _ = writeln!(out, "E1_uK={}", num(units::hartree_to_microkelvin(scales.e1)));
    let _ = writeln!(out, "abar_bohr={abar}");
    let _ = writeln!(out, "abar1_bohr={abar1}");
    let _ = writeln!(out, "p_wave_barrier_uK={}", num(units::hartree_to_microkelvin(barrier.height)));
    for g in &gates {
        let _ = writeln!(out, "gate_{}={} {}", g.name, num(g.value), if g.pass { "PASS" } else { "FAIL" });
    }
    let failed: Vec<&str> = gates.iter().filter(|g| !g.pass).map(|g| g.name).collect();
    if failed.is_empty() {
        Ok(out)
    } else {
        Err(CliError::Gates { report: out, failed: failed.join(", ") })
    }
}
