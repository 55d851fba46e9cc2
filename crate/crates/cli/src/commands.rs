//! Subcommand implementations. Each writes its reports under the output
//! directory and prints a short plain-text summary.

use crate::config::{ExperimentConfig, RunKind};
use crate::error::CliError;
use num_complex::Complex64;
use serde::Serialize;
use star_nls::dynamics::{
    evolve_with, growth_rate_with, momentum_balance, reduction_deviation, transit_test_with,
    DynamicsError, EvolveOptions, GrowthFit, GrowthOptions, TransitOptions, TransitReport,
};
use star_nls::graph::{SignPattern, StarGraph};
use star_nls::operators::{
    assemble, lowest_eigenpairs, morse_index, stability_spectrum_with, OperatorKind,
    StabilityOptions, StabilityReport,
};
use star_nls::shooting::{find_point_spectrum_with, predicted_morse, ScanOptions, SpectralReport};
use star_nls::stationary::{count_families, enumerate_patterns, shifted_state, ShiftedState};
use star_nls::verify::{run_checks, CheckOutcome, VerifyOptions};
use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let mut w = BufWriter::new(fs::File::create(dir.join(name))?);
    serde_json::to_writer_pretty(&mut w, value).map_err(std::io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn state(cfg: &ExperimentConfig) -> Result<ShiftedState, CliError> {
    Ok(shifted_state(
        &cfg.graph,
        cfg.grid()?,
        cfg.a,
        cfg.pattern(),
    )?)
}

fn scan_options(cfg: &ExperimentConfig) -> ScanOptions {
    let mut opts = ScanOptions::for_power(cfg.graph.power());
    if let Some((lo, hi)) = cfg.window {
        opts.lo = lo;
        opts.hi = hi;
    }
    opts
}

#[derive(Serialize)]
struct ShootOutput<'a> {
    seed: u64,
    graph: &'a StarGraph,
    a: f64,
    pattern: SignPattern,
    #[serde(flatten)]
    report: &'a SpectralReport,
}

fn entries_table(report: &SpectralReport) -> String {
    let mut s = String::from("lambda                  mult  case\n");
    for e in &report.entries {
        let _ = writeln!(s, "{:<22.15} {:>5}  {}", e.lambda, e.mult, e.case);
    }
    let _ = writeln!(
        s,
        "morse index {}, zero multiplicity {}",
        report.morse_index, report.zero_multiplicity
    );
    s
}

pub fn shoot(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let pattern = cfg.pattern();
    let report = find_point_spectrum_with(&cfg.graph, &pattern, cfg.a, &scan_options(cfg))?;
    write_json(
        out,
        "shoot.json",
        &ShootOutput {
            seed: cfg.seed,
            graph: &cfg.graph,
            a: cfg.a,
            pattern,
            report: &report,
        },
    )?;
    print!("{}", entries_table(&report));
    Ok(())
}

#[derive(Serialize)]
struct CrossRow {
    index: usize,
    shooting: f64,
    discrete: f64,
    abs_diff: f64,
}

#[derive(Serialize)]
struct DiscreteSummary {
    eigenvalues: Vec<f64>,
    residuals: Vec<f64>,
    /// `(negatives, zeros)` by inertia.
    morse_lplus: (usize, usize),
    morse_lminus: (usize, usize),
    tol_zero: f64,
}

#[derive(Serialize)]
struct SpectrumOutput<'a> {
    seed: u64,
    graph: &'a StarGraph,
    a: f64,
    pattern: SignPattern,
    h: f64,
    length: f64,
    #[serde(flatten)]
    shooting: &'a SpectralReport,
    predicted_morse: (usize, usize),
    discrete: DiscreteSummary,
    stability: StabilityReport,
    cross_validation: Vec<CrossRow>,
}

/// Most discrete eigenpairs compared against shooting.
const MAX_COMPARED: usize = 12;

pub fn spectrum(cfg: &ExperimentConfig, out: &Path, assert_theorem: bool) -> Result<(), CliError> {
    let pattern = cfg.pattern();
    let shooting = find_point_spectrum_with(&cfg.graph, &pattern, cfg.a, &scan_options(cfg))?;
    let st = state(cfg)?;
    let lp = assemble(&cfg.graph, &st, OperatorKind::Lplus)?;
    let lm = assemble(&cfg.graph, &st, OperatorKind::Lminus)?;
    let exact = shooting.eigenvalues();
    let count = exact.len().clamp(1, MAX_COMPARED);
    let pairs = lowest_eigenpairs(&lp, count)?;
    let kernel = lp.dofs().to_dofs(&st.real_edges());
    let stability = stability_spectrum_with(
        &lp,
        &lm,
        Some(&kernel),
        &StabilityOptions {
            seed: cfg.seed,
            ..StabilityOptions::default()
        },
    )?;
    let cross: Vec<CrossRow> = exact
        .iter()
        .zip(&pairs)
        .enumerate()
        .map(|(index, (&s, d))| CrossRow {
            index,
            shooting: s,
            discrete: d.lambda,
            abs_diff: (s - d.lambda).abs(),
        })
        .collect();
    let discrete = DiscreteSummary {
        eigenvalues: pairs.iter().map(|p| p.lambda).collect(),
        residuals: pairs.iter().map(|p| p.residual).collect(),
        morse_lplus: morse_index(&lp),
        morse_lminus: morse_index(&lm),
        tol_zero: lp.tol_zero(),
    };
    let predicted = predicted_morse(&pattern, cfg.a);

    let mut table =
        String::from("index  shooting                discrete                abs diff\n");
    for r in &cross {
        let _ = writeln!(
            table,
            "{:>5}  {:<22.15}  {:<22.15}  {:.3e}",
            r.index, r.shooting, r.discrete, r.abs_diff
        );
    }
    let _ = writeln!(
        table,
        "L+ (negatives, zeros): shooting ({}, {}), discrete {:?}, predicted {:?}",
        shooting.morse_index, shooting.zero_multiplicity, discrete.morse_lplus, predicted
    );
    let _ = writeln!(
        table,
        "L- (negatives, zeros): discrete {:?}",
        discrete.morse_lminus
    );
    let unstable: usize = stability.real_positive.iter().map(|r| r.multiplicity).sum();
    let _ = writeln!(
        table,
        "real unstable eigenvalues: {unstable} (largest {:.12}), quartet residual {:.1e}",
        stability.max_growth_rate, stability.quartet_residual
    );

    let shoot_pair = (shooting.morse_index, shooting.zero_multiplicity);
    let disc_pair = discrete.morse_lplus;
    write_json(
        out,
        "spectrum.json",
        &SpectrumOutput {
            seed: cfg.seed,
            graph: &cfg.graph,
            a: cfg.a,
            pattern,
            h: st.grid().spacing(),
            length: st.grid().length(),
            shooting: &shooting,
            predicted_morse: predicted,
            discrete,
            stability,
            cross_validation: cross,
        },
    )?;
    write_text(out, "spectrum.txt", &table)?;
    print!("{table}");
    if assert_theorem && (shoot_pair != predicted || disc_pair != predicted) {
        return Err(CliError::Assertion(format!(
            "predicted (negatives, zeros) {predicted:?}, shooting {shoot_pair:?}, discrete {disc_pair:?}"
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct OrbitSummary {
    seed: u64,
    tau: f64,
    t_end: f64,
    h: f64,
    mass_drift: f64,
    energy_drift: f64,
    max_group_deviation: f64,
    max_balance_mismatch: f64,
    max_iterations: usize,
    fallback_steps: usize,
}

#[derive(Serialize)]
struct TransitOutput {
    seed: u64,
    c: f64,
    x_start: f64,
    tau: f64,
    h: f64,
    #[serde(flatten)]
    report: TransitReport,
}

#[derive(Serialize)]
struct GrowthOutput {
    seed: u64,
    amplitude: f64,
    tau: f64,
    t_max: f64,
    spectral_rate: f64,
    fitted_rate: Option<f64>,
    relative_gap: Option<f64>,
    r_squared: Option<f64>,
    fit_interval: Option<(f64, f64)>,
    max_deviation: f64,
}

pub fn evolve(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let e = &cfg.evolve;
    let header = |extra: &[(&str, String)]| -> Vec<(String, String)> {
        let mut h = vec![
            ("seed".to_string(), cfg.seed.to_string()),
            ("alphas".to_string(), format!("{:?}", cfg.graph.alphas())),
            ("incoming".to_string(), cfg.graph.n_incoming().to_string()),
            ("p".to_string(), cfg.graph.power().to_string()),
            ("a".to_string(), cfg.a.to_string()),
            ("h".to_string(), cfg.h.to_string()),
        ];
        h.extend(extra.iter().map(|(k, v)| (k.to_string(), v.clone())));
        h
    };
    match e.kind {
        RunKind::Orbit => {
            let st = state(cfg)?;
            let init = st.field().map(|z| z * Complex64::from_polar(1.0, e.phase));
            let mut opts = EvolveOptions::new(e.tau(), e.t_end());
            opts.record_every = e.record_every.max(1);
            opts.pattern = Some(cfg.pattern());
            opts.max_iterations = e.max_iterations;
            let traj = evolve_with(&cfg.graph, &init, &opts)?;
            let balance = momentum_balance(&cfg.graph, &traj, &traj.pattern);
            let summary = OrbitSummary {
                seed: cfg.seed,
                tau: traj.tau,
                t_end: e.t_end(),
                h: st.grid().spacing(),
                mass_drift: traj.mass_drift(),
                energy_drift: traj.energy_drift(),
                max_group_deviation: reduction_deviation(&traj).into_iter().fold(0.0, f64::max),
                max_balance_mismatch: balance.max_mismatch,
                max_iterations: traj.max_iterations,
                fallback_steps: traj.fallback_steps,
            };
            fs::create_dir_all(out)?;
            let mut w = BufWriter::new(fs::File::create(out.join("evolve.csv"))?);
            traj.write_csv(
                &mut w,
                &header(&[("tau", traj.tau.to_string()), ("kind", "orbit".into())]),
            )?;
            w.flush()?;
            write_json(out, "evolve.json", &summary)?;
            println!(
                "Q drift {:.3e}, E drift {:.3e}, group deviation {:.1e}, balance mismatch {:.2e}",
                summary.mass_drift,
                summary.energy_drift,
                summary.max_group_deviation,
                summary.max_balance_mismatch
            );
        }
        RunKind::Transit => {
            let opts = TransitOptions {
                tau: e.tau(),
                h: cfg.h,
                length: cfg.length,
            };
            let report = transit_test_with(&cfg.graph, e.c, e.x_start, &opts)?;
            println!(
                "transmitted_mass_fraction {:.10}, profile_error {:.3e}, t_end {}",
                report.transmitted_mass_fraction, report.profile_error, report.t_end
            );
            write_json(
                out,
                "transit.json",
                &TransitOutput {
                    seed: cfg.seed,
                    c: e.c,
                    x_start: e.x_start,
                    tau: e.tau(),
                    h: cfg.h,
                    report,
                },
            )?;
        }
        RunKind::Growth => {
            let st = state(cfg)?;
            let lp = assemble(&cfg.graph, &st, OperatorKind::Lplus)?;
            let lm = assemble(&cfg.graph, &st, OperatorKind::Lminus)?;
            let kernel = lp.dofs().to_dofs(&st.real_edges());
            let spectral = stability_spectrum_with(
                &lp,
                &lm,
                Some(&kernel),
                &StabilityOptions {
                    seed: cfg.seed,
                    ..StabilityOptions::default()
                },
            )?
            .max_growth_rate;
            let mut opts = GrowthOptions::new(cfg.seed, e.t_end());
            opts.amplitude = e.amplitude;
            opts.tau = e.tau();
            let fit: Option<GrowthFit> = match growth_rate_with(&cfg.graph, &st, &opts) {
                Ok(f) => Some(f),
                Err(DynamicsError::NoGrowthDetected {
                    max_deviation,
                    t_end,
                }) => {
                    println!(
                        "no growth detected up to t = {t_end} (max deviation {max_deviation:.3e}); spectral rate {spectral:.6}"
                    );
                    write_json(
                        out,
                        "growth.json",
                        &GrowthOutput {
                            seed: cfg.seed,
                            amplitude: e.amplitude,
                            tau: e.tau(),
                            t_max: e.t_end(),
                            spectral_rate: spectral,
                            fitted_rate: None,
                            relative_gap: None,
                            r_squared: None,
                            fit_interval: None,
                            max_deviation,
                        },
                    )?;
                    None
                }
                Err(err) => return Err(err.into()),
            };
            if let Some(f) = fit {
                let gap = if spectral > 0.0 {
                    Some((f.rate - spectral).abs() / spectral)
                } else {
                    None
                };
                println!(
                    "fitted rate {:.6}, spectral rate {spectral:.6}, relative gap {}",
                    f.rate,
                    gap.map_or("n/a".to_string(), |g| format!("{g:.3e}"))
                );
                let mut csv = String::new();
                for (k, v) in header(&[
                    ("tau", e.tau().to_string()),
                    ("amplitude", e.amplitude.to_string()),
                    ("kind", "growth".into()),
                ]) {
                    let _ = writeln!(csv, "# {k}={v}");
                }
                csv.push_str("t,deviation\n");
                for (t, d) in &f.samples {
                    let _ = writeln!(csv, "{t:.6},{d:.16e}");
                }
                write_text(out, "growth.csv", &csv)?;
                write_json(
                    out,
                    "growth.json",
                    &GrowthOutput {
                        seed: cfg.seed,
                        amplitude: e.amplitude,
                        tau: e.tau(),
                        t_max: e.t_end(),
                        spectral_rate: spectral,
                        fitted_rate: Some(f.rate),
                        relative_gap: gap,
                        r_squared: Some(f.r_squared),
                        fit_interval: Some((f.t_start, f.t_stop)),
                        max_deviation: f.max_deviation,
                    },
                )?;
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct FamiliesOutput<'a> {
    graph: &'a StarGraph,
    /// Closed-form count for unit weights and even `N`.
    count_families: Option<u128>,
    admissible_patterns: Vec<SignPattern>,
}

pub fn families(graph: &StarGraph, out: &Path) -> Result<(), CliError> {
    let patterns = enumerate_patterns(graph)?;
    let unit = graph.alphas().iter().all(|&a| a == 1.0);
    let count = if unit {
        count_families(graph.n_edges()).ok()
    } else {
        None
    };
    println!(
        "{} admissible sign patterns ({} families up to complement){}",
        patterns.len(),
        patterns.len() / 2,
        count.map_or(String::new(), |c| format!("; closed-form count {c}"))
    );
    write_json(
        out,
        "families.json",
        &FamiliesOutput {
            graph,
            count_families: count,
            admissible_patterns: patterns,
        },
    )
}

#[derive(Serialize)]
struct VerifyOutput<'a> {
    seed: u64,
    passed: usize,
    failed: usize,
    checks: &'a [CheckOutcome],
}

pub fn verify(filter: Option<&str>, seed: u64, out: Option<&Path>) -> Result<(), CliError> {
    let opts = VerifyOptions { seed };
    let outcomes = run_checks(filter, &opts, |o| println!("{o}"));
    if outcomes.is_empty() {
        return Err(CliError::Config(format!(
            "filter `{}` matches no check (use an id such as A5 or a group: graph, shooting, spectrum, dynamics, families)",
            filter.unwrap_or_default()
        )));
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    let total: f64 = outcomes.iter().map(|o| o.seconds).sum();
    println!(
        "{} of {} checks passed in {total:.1} s",
        outcomes.len() - failed,
        outcomes.len()
    );
    if let Some(dir) = out {
        write_json(
            dir,
            "verify.json",
            &VerifyOutput {
                seed,
                passed: outcomes.len() - failed,
                failed,
                checks: &outcomes,
            },
        )?;
    }
    if failed > 0 {
        let ids: Vec<&str> = outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
        return Err(CliError::Assertion(format!(
            "failed checks: {}",
            ids.join(", ")
        )));
    }
    Ok(())
}
