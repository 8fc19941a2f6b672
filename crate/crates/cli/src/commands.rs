//! The four analysis commands. Each writes its report files into `out` and
//! returns a short summary for the terminal.

use std::fs;
use std::path::{Path, PathBuf};

use mpflex_core::avg::{run_avg, AvgOptions, PwaValueFunction};
use mpflex_core::flexibility::flexibility_report;
use mpflex_core::market::{recover_gne, simulate_best_response, solve_central, BestResponseOptions};
use mpflex_core::mplp::{assemble_mplp, central_from_lp, MpLp};

use crate::error::{CliError, CliResult};
use crate::instance_file::LoadedInstance;
use crate::report::{self, num, EquilibriumReport, GridRow};

/// Command-line overrides of the instance settings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub theta: Option<Vec<f64>>,
    pub epsilon: Option<f64>,
    pub segments: Option<usize>,
    pub grid: Option<usize>,
    pub max_rounds: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub text: String,
    pub files: Vec<PathBuf>,
}

fn write(out: &Path, name: &str, body: &str, files: &mut Vec<PathBuf>) -> CliResult<()> {
    fs::create_dir_all(out).map_err(|e| CliError::io(format!("creating {}", out.display()), e))?;
    let path = out.join(name);
    fs::write(&path, body).map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
    files.push(path);
    Ok(())
}

/// Parses `v1,v2,...`.
pub fn parse_theta(text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("--theta: `{t}` is not a number")))
        })
        .collect()
}

fn theta_of(inst: &LoadedInstance, settings: &Settings) -> CliResult<Vec<f64>> {
    let p = inst.market.num_params();
    let theta = settings.theta.clone().unwrap_or_else(|| vec![0.0; p]);
    if theta.len() != p {
        return Err(CliError::Usage(format!(
            "--theta has {} values, the instance has {p} parameters",
            theta.len()
        )));
    }
    inst.market.check_theta(&theta)?;
    let outside = theta
        .iter()
        .zip(inst.market.theta_box())
        .position(|(t, (lo, hi))| *t < lo || *t > hi);
    if let Some(j) = outside {
        let (lo, hi) = inst.market.theta_box()[j];
        return Err(CliError::Usage(format!(
            "--theta: value {} for parameter {j} lies outside [{lo}, {hi}]",
            theta[j]
        )));
    }
    Ok(theta)
}

fn mplp_of(inst: &LoadedInstance, settings: &Settings) -> CliResult<MpLp> {
    let k = settings.segments.unwrap_or(inst.segments);
    if k < 2 {
        return Err(CliError::Usage(format!("--segments must be at least 2, got {k}")));
    }
    Ok(assemble_mplp(&inst.market, k)?)
}

fn avg_of(inst: &LoadedInstance, mplp: &MpLp, settings: &Settings) -> CliResult<PwaValueFunction> {
    let epsilon = settings.epsilon.unwrap_or(inst.epsilon);
    if !(epsilon > 0.0) {
        return Err(CliError::Usage(format!("--epsilon must be positive, got {epsilon}")));
    }
    let opts = AvgOptions {
        epsilon,
        ..AvgOptions::default()
    };
    Ok(run_avg(mplp, &opts)?)
}

pub fn cmd_equilibrium(inst: &LoadedInstance, settings: &Settings, out: &Path) -> CliResult<Summary> {
    let theta = theta_of(inst, settings)?;
    let central = solve_central(&inst.market, &theta)?;
    let eq = recover_gne(&central, &inst.market);
    let mplp = mplp_of(inst, settings)?;
    let linear = central_from_lp(&mplp, &inst.market, &theta)?;
    let k = settings.segments.unwrap_or(inst.segments);
    let loaded = LoadedInstance {
        segments: k,
        ..inst.clone()
    };
    let body = report::equilibrium_text(&EquilibriumReport {
        instance: &loaded,
        theta: &theta,
        quadratic: &eq,
        linearized: &linear,
    });
    let mut files = Vec::new();
    write(out, "equilibrium.txt", &body, &mut files)?;
    Ok(Summary {
        text: format!(
            "cost {} $ (quadratic), {} $ (linearized)",
            num(eq.cost),
            num(linear.cost)
        ),
        files,
    })
}

pub fn cmd_simulate(inst: &LoadedInstance, settings: &Settings, out: &Path) -> CliResult<Summary> {
    let theta = theta_of(inst, settings)?;
    let mut opts = BestResponseOptions::default();
    if let Some(n) = settings.max_rounds {
        opts.max_iter = n;
    }
    let outcome = simulate_best_response(&inst.market, &theta, &opts)?;
    let mut files = Vec::new();
    write(out, "trace.csv", &report::trace_csv(inst, &outcome), &mut files)?;
    if !outcome.converged {
        return Err(CliError::BestResponseStalled(opts.max_iter));
    }
    let dd = outcome
        .equilibrium
        .delta_d
        .iter()
        .map(|v| format!("{} kW", num(*v)))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(Summary {
        text: format!("converged after {} rounds: delta_d = {dd}", outcome.rounds.len()),
        files,
    })
}

/// `LP(theta)` and `v(theta)` on `n` points per axis.
pub fn grid_oracle(pwa: &PwaValueFunction, mplp: &MpLp, n: usize) -> CliResult<Vec<GridRow>> {
    if n < 2 {
        return Err(CliError::Usage(format!("--grid needs at least 2 points, got {n}")));
    }
    let lower = mplp.theta_lower();
    let upper = mplp.theta_upper();
    let p = lower.len();
    let total = n.checked_pow(p as u32).filter(|t| *t <= 1_000_000).ok_or_else(|| {
        CliError::Usage(format!("--grid {n} in {p} dimensions is too many points"))
    })?;
    let mut rows = Vec::with_capacity(total);
    for idx in 0..total {
        let mut rest = idx;
        let mut theta = vec![0.0; p];
        // first parameter varies slowest
        for j in (0..p).rev() {
            let i = rest % n;
            rest /= n;
            theta[j] = lower[j] + (upper[j] - lower[j]) * i as f64 / (n - 1) as f64;
        }
        let lp = mplp.evaluate_lp_at(&theta)?.value;
        rows.push(GridRow {
            underestimate: pwa.value(&theta),
            lp,
            theta,
        });
    }
    Ok(rows)
}

pub fn cmd_avg(inst: &LoadedInstance, settings: &Settings, out: &Path) -> CliResult<Summary> {
    let mplp = mplp_of(inst, settings)?;
    let pwa = avg_of(inst, &mplp, settings)?;
    let mut files = Vec::new();
    write(out, "pieces.txt", &report::pieces_text(&pwa), &mut files)?;
    write(out, "regions.txt", &report::regions_text(&pwa), &mut files)?;
    write(out, "error_trace.csv", &report::error_trace_csv(&pwa), &mut files)?;
    let mut text = format!(
        "{} regions after {} iterations, certified error {} $",
        pwa.regions.len(),
        pwa.trace.len(),
        num(pwa.error)
    );
    if let Some(n) = settings.grid {
        let rows = grid_oracle(&pwa, &mplp, n)?;
        let worst = rows
            .iter()
            .map(|r| r.lp - r.underestimate)
            .fold(f64::NEG_INFINITY, f64::max);
        let lowest = rows
            .iter()
            .map(|r| r.lp - r.underestimate)
            .fold(f64::INFINITY, f64::min);
        write(out, "grid.csv", &report::grid_csv(&rows), &mut files)?;
        text.push_str(&format!(
            "\ngrid of {} points: empirical error {} $ (max), {} $ (min) vs certified {} $",
            rows.len(),
            num(worst),
            num(lowest),
            num(pwa.error)
        ));
    }
    Ok(Summary { text, files })
}

pub fn cmd_flexibility(inst: &LoadedInstance, settings: &Settings, out: &Path) -> CliResult<Summary> {
    let mplp = mplp_of(inst, settings)?;
    let pwa = avg_of(inst, &mplp, settings)?;
    let rep = flexibility_report(&pwa, &mplp, &inst.market)?;
    let mut files = Vec::new();
    write(out, "flexibility.csv", &report::flexibility_csv(inst, &rep), &mut files)?;
    write(
        out,
        "flexibility_regions.csv",
        &report::flexibility_regions_csv(inst, &rep),
        &mut files,
    )?;
    Ok(Summary {
        text: report::flexibility_text(inst, &rep).trim_end().to_string(),
        files,
    })
}
