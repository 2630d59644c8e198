use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use xyqaoa::experiments::{
    fit, landscape_slice, parse_range, read_csv, run_grid, strict_local_maxima, ExperimentRecord, FitModel,
    GridOptions, GridSpec, CSV_HEADER,
};
use xyqaoa::lieb_robinson::{LRParameters, STEADY_EPSILON, SUPPRESSED_EPSILON};
use xyqaoa::optimizer::optimize;
use xyqaoa::pontryagin::verify_pontryagin;
use xyqaoa::subspace::apply_schedule;
use xyqaoa::{Error, OptimizerConfig, OptimizerMode, Schedule};

use crate::svg::{Band, HLine, Heatmap, LinePlot, Series};
use crate::{Cli, Command, FitArgs, GridArgs, LandscapeArgs, LrBoundArgs, OptimizeArgs, PontryaginArgs, ReportArgs,
    SimulateArgs};

pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse(_)
            | Error::InvalidSchedule(_)
            | Error::InvalidConstraint(_)
            | Error::InvalidDimension(_)
            | Error::InvalidIndex(_)
            | Error::InvalidSpec(_)
            | Error::Json(_) => 2,
            _ => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self {
            code: 1,
            message: e.to_string(),
        }
    }
}

type CliResult = Result<(), CliError>;

pub fn run(cli: Cli) -> CliResult {
    configure_threads()?;
    fs::create_dir_all(&cli.output_dir)?;
    let out = cli.output_dir.as_path();
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Optimize(a) => optimize_cmd(a, out),
        Command::Grid(a) => grid(a, out),
        Command::Landscape(a) => landscape(a, out),
        Command::LrBound(a) => lr_bound(a, out),
        Command::PontryaginCheck(a) => pontryagin(a),
        Command::Fit(a) => fit_cmd(a, out),
        Command::Report(a) => report(a, out),
    }
}

fn configure_threads() -> CliResult {
    let Ok(raw) = std::env::var("XYQAOA_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::usage(format!("XYQAOA_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError {
            code: 1,
            message: e.to_string(),
        })
}

fn write(path: &Path, contents: &str) -> CliResult {
    fs::write(path, contents)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn simulate(a: SimulateArgs) -> CliResult {
    let schedule: Schedule = a.schedule.parse()?;
    let state = apply_schedule(&schedule, a.n)?;
    println!("F={:.12}", state.target_population());
    println!("site,re,im,population");
    for site in 1..=a.n {
        let c = state.amplitude(site);
        println!("{site},{:.12e},{:.12e},{:.12e}", c.re, c.im, c.norm_sqr());
    }
    Ok(())
}

fn optimize_cmd(a: OptimizeArgs, out: &Path) -> CliResult {
    if a.p == 0 {
        return Err(CliError::usage("--p must be at least 1"));
    }
    let mode = match a.tf {
        None => OptimizerMode::Free,
        Some(t) if t > 0.0 && t.is_finite() => OptimizerMode::FixedTf(t),
        Some(t) => return Err(CliError::usage(format!("--tf must be positive, got {t}"))),
    };
    let config = OptimizerConfig {
        restarts: a.restarts,
        rng_seed: a.seed,
        max_iterations: a.max_iterations,
        mode,
        ..OptimizerConfig::default()
    };
    let result = optimize(a.n, a.p, &config, &[])?;
    println!("best_fidelity={:.12}", result.best_fidelity);
    println!("converged={}/{}", result.converged_count(), result.restart_records.len());
    println!("schedule={}", result.best_schedule);
    let tf = a.tf.map_or_else(String::new, |t| format!("_tf{t}"));
    let path = out.join(format!("optimize_N{}_p{}{tf}_seed{}.json", a.n, a.p, a.seed));
    write(&path, &(serde_json::to_string_pretty(&result).map_err(Error::from)? + "\n"))
}

fn grid(a: GridArgs, out: &Path) -> CliResult {
    let spec = GridSpec::load(&a.spec)?;
    let csv = out.join(format!("{}.csv", spec.label));
    if !a.resume && csv.exists() {
        fs::remove_file(&csv)?;
    }
    let options = GridOptions {
        restarts: a.restarts,
        max_new_cells: a.max_cells,
        record_wall_time: a.timing,
        ..GridOptions::default()
    };
    let outcome = run_grid(&spec, &csv, &options)?;
    println!(
        "cells: {} new, {} already present, {} total{}",
        outcome.new_cells,
        outcome.skipped_cells,
        outcome.records.len(),
        if outcome.complete { "" } else { " (incomplete; rerun with --resume)" }
    );
    println!("wrote {}", csv.display());
    Ok(())
}

fn parse_pair(s: &str) -> Result<(usize, usize), CliError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => Ok((
            a.parse().map_err(|_| CliError::usage(format!("bad index {a:?}")))?,
            b.parse().map_err(|_| CliError::usage(format!("bad index {b:?}")))?,
        )),
        _ => Err(CliError::usage(format!("--vary expects \"i,j\", got {s:?}"))),
    }
}

fn landscape(a: LandscapeArgs, out: &Path) -> CliResult {
    let base: Schedule = a.schedule.parse()?;
    let vary = parse_pair(&a.vary)?;
    let xs = parse_range(&a.x_range)?;
    let ys = parse_range(&a.y_range)?;
    let slice = landscape_slice(a.n, &base, vary, &xs, &ys)?;
    let maxima = strict_local_maxima(&slice);

    let stem = format!("landscape_N{}_p{}_{}_{}", a.n, base.depth(), vary.0, vary.1);
    let mut csv = String::from("x,y,fidelity\n");
    for (i, x) in xs.iter().enumerate() {
        for (j, y) in ys.iter().enumerate() {
            csv += &format!("{x:e},{y:e},{:e}\n", slice.values[i][j]);
        }
    }
    write(&out.join(format!("{stem}.csv")), &csv)?;
    let name = |k: usize| format!("{}{}", if k % 2 == 0 { "dB" } else { "dC" }, k / 2 + 1);
    let heat = Heatmap {
        title: format!("Fidelity landscape, N={}, p={}", a.n, base.depth()),
        x_label: name(vary.0),
        y_label: name(vary.1),
        xs,
        ys,
        values: slice.values.clone(),
    };
    write(&out.join(format!("{stem}.svg")), &heat.render())?;
    println!("max_fidelity={:.12}", slice.max());
    println!("strict_local_maxima={}", maxima.len());
    for m in &maxima {
        println!("  ({:e}, {:e}) F={:.12}", slice.xs[m.i], slice.ys[m.j], m.value);
    }
    Ok(())
}

fn lr_bound(a: LrBoundArgs, out: &Path) -> CliResult {
    let params = LRParameters::for_chain(a.n, a.j)?;
    let ts = parse_range(&a.t_range)?;
    let mut csv = String::from("t,epsilon,bound,region\n");
    for t in ts {
        csv += &format!(
            "{t:e},{:e},{:e},{}\n",
            params.epsilon(t),
            params.success_bound(t),
            params.region(t).as_str()
        );
    }
    print!("{csv}");
    write(&out.join(format!("lr_bound_N{}.csv", a.n)), &csv)
}

fn pontryagin(a: PontryaginArgs) -> CliResult {
    let schedule: Schedule = a.schedule.parse()?;
    if !(a.tolerance > 0.0) {
        return Err(CliError::usage("--tolerance must be positive"));
    }
    let report = verify_pontryagin(&schedule, a.n, a.tolerance)?;
    println!("{}", serde_json::to_string_pretty(&report).map_err(Error::from)?);
    Ok(())
}

fn fit_points(a: &FitArgs) -> Result<Vec<(f64, f64)>, CliError> {
    let text = fs::read_to_string(&a.csv)?;
    let header = text.lines().next().unwrap_or_default();
    if header == CSV_HEADER {
        let records = read_csv(&a.csv)?;
        let column = |r: &ExperimentRecord, name: &str| -> Result<Option<f64>, CliError> {
            Ok(match name {
                "p" => Some(r.depth as f64),
                "N" => Some(r.n_sites as f64),
                "tf" => r.tf,
                "best_fidelity" => Some(r.best_fidelity),
                "converged" => Some(r.converged as f64),
                "wall_time_s" => Some(r.wall_time_s),
                other => return Err(CliError::usage(format!("unknown grid column {other:?}"))),
            })
        };
        let (xn, yn) = (a.x.as_deref().unwrap_or("p"), a.y.as_deref().unwrap_or("best_fidelity"));
        let mut pts = Vec::new();
        for r in records.iter().filter(|r| a.n.is_none_or(|n| n == r.n_sites)) {
            if let (Some(x), Some(y)) = (column(r, xn)?, column(r, yn)?) {
                pts.push((x, y));
            }
        }
        return Ok(pts);
    }
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    let index = |want: Option<&str>, default: usize| -> Result<usize, CliError> {
        match want {
            Some(w) => names
                .iter()
                .position(|n| *n == w)
                .ok_or_else(|| CliError::usage(format!("column {w:?} not in header {header:?}"))),
            None if default < names.len() => Ok(default),
            None => Err(CliError::usage("CSV needs at least two columns")),
        }
    };
    let (xi, yi) = (index(a.x.as_deref(), 0)?, index(a.y.as_deref(), 1)?);
    let mut pts = Vec::new();
    for (line_no, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let get = |i: usize| -> Result<f64, CliError> {
            cells
                .get(i)
                .and_then(|c| c.parse().ok())
                .ok_or_else(|| CliError::usage(format!("line {}: bad number in column {i}", line_no + 1)))
        };
        pts.push((get(xi)?, get(yi)?));
    }
    Ok(pts)
}

fn fit_cmd(a: FitArgs, out: &Path) -> CliResult {
    let model: FitModel = a.model.parse()?;
    let points = fit_points(&a)?;
    let result = fit(model, &points)?;
    let p = &result.params;
    match model {
        FitModel::Linear => println!("slope={:.12e} intercept={:.12e}", p[0], p[1]),
        FitModel::Quadratic => println!("a={:.12e} b={:.12e} c={:.12e}", p[0], p[1], p[2]),
        FitModel::InvertedExponential => println!("a={:.12e} b={:.12e}", p[0], p[1]),
    }
    println!("r2={:.12} n_points={}", result.r_squared, result.n_points);
    let json = serde_json::to_string_pretty(&result).map_err(Error::from)?;
    let stem = a.csv.file_stem().and_then(|s| s.to_str()).unwrap_or("data");
    write(&out.join(format!("fit_{stem}_{}.json", a.model.replace('-', "_"))), &(json + "\n"))
}

/// Times at which the light-cone `ε` crosses the region thresholds.
fn lr_bands(n: usize, t_max: f64) -> Result<Vec<Band>, CliError> {
    let params = LRParameters::for_chain(n, 2.0)?;
    let cross = |eps: f64| ((params.l + (eps / 2.0).ln()) / params.v).max(0.0);
    let (t1, t2) = (cross(SUPPRESSED_EPSILON), cross(STEADY_EPSILON));
    Ok(vec![
        Band {
            x0: 0.0,
            x1: t1,
            label: "LR suppressed".into(),
            color: "#4a4a4a",
        },
        Band {
            x0: t1,
            x1: t2,
            label: "LR exp. growth".into(),
            color: "#ff9900",
        },
        Band {
            x0: t2,
            x1: t_max,
            label: "LR steady".into(),
            color: "#2a9d8f",
        },
    ])
}

fn first_crossing(by_tf: &BTreeMap<u64, f64>, threshold: f64) -> Option<f64> {
    let mut sorted: Vec<(f64, f64)> = by_tf.iter().map(|(k, f)| (f64::from_bits(*k), *f)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    sorted.into_iter().find(|(_, f)| *f >= threshold).map(|(t, _)| t)
}

fn report(a: ReportArgs, out: &Path) -> CliResult {
    let mut files: Vec<PathBuf> = fs::read_dir(&a.csv_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();

    let mut by_label: BTreeMap<String, Vec<ExperimentRecord>> = BTreeMap::new();
    for f in &files {
        match read_csv(f) {
            Ok(records) => {
                for r in records {
                    by_label.entry(r.label.clone()).or_default().push(r);
                }
            }
            Err(_) => println!("skipping {} (not a grid CSV)", f.display()),
        }
    }
    if by_label.is_empty() {
        return Err(CliError {
            code: 1,
            message: format!("no grid CSVs found in {}", a.csv_dir.display()),
        });
    }

    for (label, records) in &by_label {
        let mut by_n: BTreeMap<usize, Vec<&ExperimentRecord>> = BTreeMap::new();
        for r in records {
            by_n.entry(r.n_sites).or_default().push(r);
        }
        let mut transfer_pts = Vec::new();
        let mut suppressed_pts = Vec::new();

        for (&n, rows) in &by_n {
            // F vs t_f, one line per depth, light-cone regions shaded
            let timed: Vec<&&ExperimentRecord> = rows.iter().filter(|r| r.tf.is_some()).collect();
            if !timed.is_empty() {
                let mut per_p: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
                let mut best_by_tf: BTreeMap<u64, f64> = BTreeMap::new();
                for r in &timed {
                    let t = r.tf.unwrap_or_default();
                    per_p.entry(r.depth).or_default().push((t, r.best_fidelity));
                    let e = best_by_tf.entry(t.to_bits()).or_insert(0.0);
                    *e = e.max(r.best_fidelity);
                }
                let t_max = timed.iter().filter_map(|r| r.tf).fold(0.0, f64::max);
                let params = LRParameters::for_chain(n, 2.0)?;
                let mut series: Vec<Series> = per_p
                    .into_iter()
                    .map(|(p, mut pts)| {
                        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                        Series {
                            name: format!("p={p}"),
                            points: pts,
                            dashed: false,
                        }
                    })
                    .collect();
                series.push(Series {
                    name: "LR bound".into(),
                    points: (0..=200)
                        .map(|k| {
                            let t = t_max * k as f64 / 200.0;
                            (t, params.success_bound(t))
                        })
                        .collect(),
                    dashed: true,
                });
                let plot = LinePlot {
                    title: format!("{label}: fidelity vs runtime, N={n}"),
                    x_label: "t_f".into(),
                    y_label: "best fidelity".into(),
                    series,
                    bands: lr_bands(n, t_max)?,
                    hlines: vec![
                        HLine {
                            y: 0.01,
                            label: "F=0.01".into(),
                        },
                        HLine {
                            y: 0.99,
                            label: "F=0.99".into(),
                        },
                    ],
                    y_range: Some((0.0, 1.0)),
                };
                write(&out.join(format!("{label}_N{n}_fidelity_vs_tf.svg")), &plot.render())?;
                if let Some(t) = first_crossing(&best_by_tf, 0.99) {
                    transfer_pts.push((n as f64, t));
                }
                if let Some(t) = first_crossing(&best_by_tf, 0.01) {
                    suppressed_pts.push((n as f64, t));
                }
            }

            // F vs p: best over runtimes, plus the unconstrained runs
            let mut best_p: BTreeMap<usize, f64> = BTreeMap::new();
            let mut free_p: Vec<(f64, f64)> = Vec::new();
            for r in rows {
                match r.tf {
                    Some(_) => {
                        let e = best_p.entry(r.depth).or_insert(0.0);
                        *e = e.max(r.best_fidelity);
                    }
                    None => free_p.push((r.depth as f64, r.best_fidelity)),
                }
            }
            let mut series = Vec::new();
            if !best_p.is_empty() {
                series.push(Series {
                    name: "best over t_f".into(),
                    points: best_p.iter().map(|(p, f)| (*p as f64, *f)).collect(),
                    dashed: false,
                });
            }
            if !free_p.is_empty() {
                free_p.sort_by(|a, b| a.0.total_cmp(&b.0));
                if let Ok(q) = fit(FitModel::Quadratic, &free_p) {
                    series.push(Series {
                        name: "quadratic fit".into(),
                        points: free_p.iter().map(|&(p, _)| (p, q.predict(p))).collect(),
                        dashed: true,
                    });
                }
                series.insert(
                    0,
                    Series {
                        name: "free t_f".into(),
                        points: free_p,
                        dashed: false,
                    },
                );
            }
            let plot = LinePlot {
                title: format!("{label}: fidelity vs depth, N={n}"),
                x_label: "p".into(),
                y_label: "best fidelity".into(),
                series,
                bands: Vec::new(),
                hlines: Vec::new(),
                y_range: Some((0.0, 1.0)),
            };
            write(&out.join(format!("{label}_N{n}_fidelity_vs_p.svg")), &plot.render())?;
        }

        if !transfer_pts.is_empty() || !suppressed_pts.is_empty() {
            let mut series = Vec::new();
            for (name, pts) in [("t_f for F>=0.99", &transfer_pts), ("t_s for F>=0.01", &suppressed_pts)] {
                if pts.is_empty() {
                    continue;
                }
                series.push(Series {
                    name: name.into(),
                    points: pts.clone(),
                    dashed: false,
                });
                if let Ok(line) = fit(FitModel::Linear, pts) {
                    series.push(Series {
                        name: format!("slope {:.3}", line.params[0]),
                        points: pts.iter().map(|&(n, _)| (n, line.predict(n))).collect(),
                        dashed: true,
                    });
                }
            }
            let plot = LinePlot {
                title: format!("{label}: threshold runtimes vs chain length"),
                x_label: "N".into(),
                y_label: "t_f".into(),
                series,
                bands: Vec::new(),
                hlines: Vec::new(),
                y_range: None,
            };
            write(&out.join(format!("{label}_tf_vs_n.svg")), &plot.render())?;
        }
    }
    Ok(())
}
