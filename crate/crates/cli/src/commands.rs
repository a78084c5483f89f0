use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use macol_core::analytic::{interference_cdf_family, interfered_area, uniform_grid, CdfCurve, Layout, Quadrature};
use macol_core::simulator::{run, MetricsReport, Policy, Signaling, TickTally};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, Sweep};
use crate::output::{fixed, mean_std, write_cdf, write_csv, write_json};
use crate::CliError;

/// What every command needs besides its own arguments.
pub struct Plan {
    pub config: ExperimentConfig,
    pub out: PathBuf,
    pub seeds: Vec<u64>,
    pub policies: Vec<Policy>,
}

fn distance_grid(cfg: &ExperimentConfig) -> Result<Vec<f64>, CliError> {
    let beams = cfg.sim_config().effective_beams()?;
    Ok(uniform_grid(2.0 * beams[cfg.monitored_beam].radius, cfg.analytic.grid_points))
}

pub fn analytic(plan: &Plan) -> Result<Vec<PathBuf>, CliError> {
    let cfg = &plan.config;
    let sim = cfg.sim_config();
    let layout = Layout::uniform(sim.effective_beams()?, 0.0)?;
    let quad = Quadrature::square(cfg.analytic.quadrature_cells);
    let grid = distance_grid(cfg)?;
    let ps = &cfg.analytic.p_levels;
    let curves = interference_cdf_family(&layout, &sim.highway, cfg.monitored_beam, ps, &grid, &quad)?;
    let mut written = Vec::new();
    for (p, curve) in ps.iter().zip(&curves) {
        let path = plan.out.join(format!("analytic_cdf_p{}.csv", fixed(*p, 2)));
        write_cdf(&path, curve)?;
        written.push(path);
    }
    let areas = (0..layout.len())
        .into_par_iter()
        .map(|k| interfered_area(&layout, k, &quad))
        .collect::<Result<Vec<_>, _>>()?;
    let rows: Vec<Vec<String>> = layout
        .beams()
        .iter()
        .zip(&areas)
        .map(|(b, a)| {
            let total = b.sector_area();
            vec![
                b.id.to_string(),
                fixed(b.origin_x, 3),
                fixed(b.origin_y, 3),
                fixed(b.pointing.to_degrees(), 3),
                fixed(total, 3),
                fixed(*a, 3),
                fixed(a / total, 6),
            ]
        })
        .collect();
    let path = plan.out.join("interfered_area.csv");
    write_csv(
        &path,
        &[
            "beam",
            "origin_x_m",
            "origin_y_m",
            "pointing_deg",
            "sector_area_m2",
            "interfered_area_m2",
            "interfered_fraction",
        ],
        &rows,
    )?;
    written.push(path);
    Ok(written)
}

#[derive(Debug, Clone, Copy, Serialize)]
struct Ratios {
    service: f64,
    interference: f64,
    outage: f64,
}

impl From<TickTally> for Ratios {
    fn from(t: TickTally) -> Self {
        let (service, interference, outage) = t.fractions();
        Self {
            service,
            interference,
            outage,
        }
    }
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    policy: Policy,
    seed: u64,
    vehicle_count: usize,
    config: &'a ExperimentConfig,
    beam_radius_m: f64,
    ticks: u64,
    /// Steady-state share of vehicle time that is interfered.
    interference_ratio: f64,
    service_ratio: f64,
    outage_ratio: f64,
    exploration: Ratios,
    exploitation: Ratios,
    mean_service_distance_m: f64,
    service_samples: usize,
    loss_rate: f64,
    exploration_loss_rate: f64,
    connections: usize,
    /// Distinct contexts per beam.
    contexts: Vec<usize>,
    signaling: Option<Signaling>,
}

/// Scalar metrics of one run, in output order.
fn metrics(r: &MetricsReport) -> Vec<(&'static str, f64)> {
    let (s, i, o) = r.exploitation.fractions();
    let mut m = vec![
        ("service_ratio", s),
        ("interference_ratio", i),
        ("outage_ratio", o),
        ("exploration_interference_ratio", r.exploration.interference_fraction()),
        ("mean_service_distance_m", r.mean_service_distance()),
        ("loss_rate", r.loss_rate()),
        ("connections", r.connections.len() as f64),
        ("contexts", r.beams.iter().map(|b| b.contexts).sum::<usize>() as f64),
    ];
    if r.config.policy == Policy::Macol {
        m.push(("pushes", r.signaling.pushes as f64));
        m.push(("pulls", r.signaling.pulls as f64));
    }
    m
}

fn run_all(jobs: &[ExperimentConfig]) -> Result<Vec<MetricsReport>, CliError> {
    jobs.par_iter()
        .map(|cfg| run(&cfg.sim_config()).map_err(CliError::from))
        .collect()
}

fn stem(cfg: &ExperimentConfig) -> String {
    format!("{}_seed{}_v{}", cfg.policy.name(), cfg.seed, cfg.vehicle_count)
}

fn write_run(out: &Path, cfg: &ExperimentConfig, r: &MetricsReport, written: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let stem = stem(cfg);
    let summary = Summary {
        policy: cfg.policy,
        seed: cfg.seed,
        vehicle_count: cfg.vehicle_count,
        config: cfg,
        beam_radius_m: r.beam_radius_m[cfg.monitored_beam],
        ticks: r.ticks,
        interference_ratio: r.exploitation.interference_fraction(),
        service_ratio: r.exploitation.fractions().0,
        outage_ratio: r.exploitation.fractions().2,
        exploration: r.exploration.into(),
        exploitation: r.exploitation.into(),
        mean_service_distance_m: r.mean_service_distance(),
        service_samples: r.service_distances().len(),
        loss_rate: r.loss_rate(),
        exploration_loss_rate: r.exploration_loss.rate(),
        connections: r.connections.len(),
        contexts: r.beams.iter().map(|b| b.contexts).collect(),
        signaling: (cfg.policy == Policy::Macol).then_some(r.signaling),
    };
    let path = out.join(format!("{stem}_summary.json"));
    write_json(&path, &summary)?;
    written.push(path);

    let rows: Vec<Vec<String>> = r
        .windows
        .iter()
        .map(|w| {
            let (s, i, o) = w.ticks.fractions();
            vec![
                fixed(w.start_time, 1),
                w.ticks.service.to_string(),
                w.ticks.interference.to_string(),
                w.ticks.outage.to_string(),
                fixed(s, 6),
                fixed(i, 6),
                fixed(o, 6),
            ]
        })
        .collect();
    let path = out.join(format!("{stem}_windows.csv"));
    write_csv(
        &path,
        &[
            "start_s",
            "service_ticks",
            "interference_ticks",
            "outage_ticks",
            "service_ratio",
            "interference_ratio",
            "outage_ratio",
        ],
        &rows,
    )?;
    written.push(path);

    let beam = cfg.monitored_beam.to_string();
    let rows: Vec<Vec<String>> = r
        .sinr_trace
        .iter()
        .map(|s| vec![fixed(s.time, 1), beam.clone(), s.band.to_string(), fixed(s.sinr_db, 4)])
        .collect();
    let path = out.join(format!("{stem}_sinr.csv"));
    write_csv(&path, &["time_s", "beam", "band", "sinr_db"], &rows)?;
    written.push(path);

    let samples = r.service_distances();
    if !samples.is_empty() {
        let curve = CdfCurve::from_samples(&distance_grid(cfg)?, &samples)?;
        let path = out.join(format!("{stem}_service_cdf.csv"));
        write_cdf(&path, &curve)?;
        written.push(path);
    }
    Ok(())
}

pub fn simulate(plan: &Plan) -> Result<Vec<PathBuf>, CliError> {
    let mut jobs = Vec::new();
    for &policy in &plan.policies {
        for &seed in &plan.seeds {
            jobs.push(ExperimentConfig {
                policy,
                seed,
                ..plan.config.clone()
            });
        }
    }
    let reports = run_all(&jobs)?;
    let mut written = Vec::new();
    for (cfg, r) in jobs.iter().zip(&reports) {
        write_run(&plan.out, cfg, r, &mut written)?;
    }

    let mut by_policy: BTreeMap<Policy, Vec<&MetricsReport>> = BTreeMap::new();
    for (cfg, r) in jobs.iter().zip(&reports) {
        by_policy.entry(cfg.policy).or_default().push(r);
    }
    for (policy, runs) in by_policy {
        let names: Vec<&str> = metrics(runs[0]).iter().map(|m| m.0).collect();
        let per_run: Vec<Vec<f64>> = runs.iter().map(|r| metrics(r).iter().map(|m| m.1).collect()).collect();
        let rows: Vec<Vec<String>> = names
            .iter()
            .enumerate()
            .map(|(j, name)| {
                let xs: Vec<f64> = per_run.iter().map(|v| v[j]).collect();
                let (mean, std) = mean_std(&xs);
                vec![name.to_string(), fixed(mean, 6), fixed(std, 6), xs.len().to_string()]
            })
            .collect();
        let path = plan
            .out
            .join(format!("{}_v{}_merged.csv", policy.name(), plan.config.vehicle_count));
        write_csv(&path, &["metric", "mean", "stddev", "runs"], &rows)?;
        written.push(path);
    }
    Ok(written)
}

pub fn sweep(plan: &Plan, sweep: &Sweep) -> Result<Vec<PathBuf>, CliError> {
    let mut jobs = Vec::new();
    let mut levels = Vec::new();
    for &value in &sweep.values {
        let base = plan.config.with_axis(sweep.axis, value)?;
        for &policy in &plan.policies {
            for &seed in &plan.seeds {
                jobs.push(ExperimentConfig {
                    policy,
                    seed,
                    ..base.clone()
                });
                levels.push(value);
            }
        }
    }
    let reports = run_all(&jobs)?;
    let axis = sweep.axis.name();
    let mut rows = Vec::new();
    for ((cfg, r), level) in jobs.iter().zip(&reports).zip(&levels) {
        for (name, value) in metrics(r) {
            rows.push(vec![
                axis.to_string(),
                level.to_string(),
                cfg.policy.name().to_string(),
                cfg.seed.to_string(),
                name.to_string(),
                fixed(value, 6),
            ]);
        }
    }
    let path = plan.out.join(format!("sweep_{axis}.csv"));
    write_csv(&path, &["axis", "level", "policy", "seed", "metric", "value"], &rows)?;
    Ok(vec![path])
}
