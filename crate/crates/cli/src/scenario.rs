use std::path::PathBuf;

use num_complex::Complex64;
use rhodyn::composite::{
    evolve_composite_steps, measure_r, prepare_epr, EprPreparation, InteractionSpec, RObservable,
};
use rhodyn::evolve::{run_with, EvolveConfig, RunOutput};
use rhodyn::influence::{fire_element, EprMomentumGain, EprPositionGain};
use rhodyn::measurement::{
    draw_element, element_weights, ensemble_report, total_variation, EnsembleConfig, FiringRule,
};
use rhodyn::propagator::{schrodinger_step, TimeSlicedPropagator};
use rhodyn::{
    partial_trace, pure_density, to_momentum, DensityMatrix, DetectorArray, DetectorElement,
    InfluenceModel, Particle, PotentialSpec, SpatialGrid, WaveFunction,
};

use crate::config::{EprObservable, EvolveSettings, Scenario, ScenarioConfig};
use crate::output::{fmt_f64, Output};
use crate::CliError;

/// Reference steps for the split-step propagation a potential is compared against.
const REFERENCE_STEPS: usize = 4096;

#[derive(Debug, Clone, Default)]
pub struct Summary {
    pub lines: Vec<String>,
    pub files: Vec<PathBuf>,
}

/// Runs the configured scenario and writes its artifacts under `output.out_dir`.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Summary, CliError> {
    let mut out = Output::create(&cfg.output.out_dir)?;
    let lines = match cfg.scenario {
        Scenario::Closed => closed(cfg, &mut out)?,
        Scenario::OracleComparison => oracle_comparison(cfg, &mut out)?,
        Scenario::PositionMeasurement => position_measurement(cfg, &mut out)?,
        Scenario::EprPosition | Scenario::EprMomentum => epr(cfg, &mut out)?,
        Scenario::KernelValidation => kernel_validation(cfg, &mut out)?,
    };
    let mut manifest = format!("# rhodyn-cli {}\n", env!("CARGO_PKG_VERSION"));
    manifest.push_str(&cfg.to_text());
    out.text("manifest.txt", &manifest)?;
    Ok(Summary {
        lines,
        files: out.written().to_vec(),
    })
}

fn grid(cfg: &ScenarioConfig) -> Result<SpatialGrid, CliError> {
    let g = cfg.grid;
    Ok(SpatialGrid::with_hbar(g.n, g.x_min, g.x_max, cfg.physics.hbar)?)
}

fn settings(cfg: &ScenarioConfig) -> EvolveSettings {
    cfg.evolve.expect("validated config carries [evolve]")
}

fn evolve_config(s: &EvolveSettings, t0: f64) -> EvolveConfig {
    let mut c = EvolveConfig::new(s.dt, s.steps);
    c.record_every = s.record_every;
    c.normalize_every = s.normalize_every;
    c.splitting = s.splitting;
    c.min_eig = s.min_eig;
    c.continuity = s.continuity;
    c.t0 = t0;
    c
}

fn packet_state(cfg: &ScenarioConfig, grid: SpatialGrid) -> Result<WaveFunction, CliError> {
    let p = cfg.packet.expect("validated config carries [packet]");
    Ok(WaveFunction::gaussian(grid, p.x0, p.sigma, p.p0)?)
}

fn is_snapshot(step: usize, steps: usize, every: usize) -> bool {
    step == 0 || step == steps || (every > 0 && step % every == 0)
}

/// Evolves and writes `series.csv` plus the requested state snapshots.
fn evolve_and_write(
    cfg: &ScenarioConfig,
    out: &mut Output,
    rho0: &DensityMatrix,
    model: &InfluenceModel,
    t0: f64,
) -> Result<RunOutput, CliError> {
    let s = settings(cfg);
    let ec = evolve_config(&s, t0);
    let every = cfg.output.snapshot_every;
    let mut snaps = Vec::new();
    let res = run_with(rho0, model, &cfg.physics.potential, cfg.physics.mass, &ec, |snap| {
        if is_snapshot(snap.step, s.steps, every) {
            snaps.push((snap.step, snap.rho.clone()));
        }
    })?;
    out.series(&res.records)?;
    for (step, rho) in &snaps {
        out.diagonal(*step, rho)?;
        if cfg.output.rho_abs {
            out.matrix(*step, rho)?;
        }
    }
    Ok(res)
}

fn closed(cfg: &ScenarioConfig, out: &mut Output) -> Result<Vec<String>, CliError> {
    let rho0 = pure_density(&packet_state(cfg, grid(cfg)?)?)?;
    let res = evolve_and_write(cfg, out, &rho0, &InfluenceModel::Zero, 0.0)?;
    let drift = res
        .flux
        .entries
        .iter()
        .map(|e| (e.trace_before_normalization - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(vec![format!("max per-step trace drift {drift:.3e}")])
}

fn oracle_comparison(cfg: &ScenarioConfig, out: &mut Output) -> Result<Vec<String>, CliError> {
    let s = settings(cfg);
    let psi0 = packet_state(cfg, grid(cfg)?)?;
    let rho0 = pure_density(&psi0)?;
    let potential = &cfg.physics.potential;
    let m = cfg.physics.mass;

    let mut psi = psi0;
    let mut at = 0;
    let mut rows = Vec::new();
    let mut failure = None;
    let ec = evolve_config(&s, 0.0);
    let res = run_with(&rho0, &InfluenceModel::Zero, potential, m, &ec, |snap| {
        if failure.is_some() {
            return;
        }
        while at < snap.step {
            match schrodinger_step(&psi, s.dt, potential, m) {
                Ok(next) => psi = next,
                Err(e) => {
                    failure = Some(e);
                    return;
                }
            }
            at += 1;
        }
        let tr = snap.rho.trace();
        let a = psi.amplitudes();
        let diff = snap
            .rho
            .matrix()
            .indexed_iter()
            .map(|((i, j), z)| (z / tr - a[i] * a[j].conj()).norm())
            .fold(0.0, f64::max);
        rows.push((snap.record.t, diff));
    })?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    out.series(&res.records)?;
    out.diagonal(s.steps, &res.final_state)?;
    let worst = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    out.csv(
        "oracle.csv",
        &["t", "max_abs_diff"],
        rows.iter().map(|(t, d)| [fmt_f64(*t), fmt_f64(*d)]),
    )?;
    Ok(vec![format!("max |rho - psi psi*| over the run {worst:.3e}")])
}

fn position_measurement(cfg: &ScenarioConfig, out: &mut Output) -> Result<Vec<String>, CliError> {
    let grid = grid(cfg)?;
    let d = cfg.detector.as_ref().expect("validated config carries [detector]");
    let mut detector = DetectorArray::new(
        d.centers
            .iter()
            .map(|&c| DetectorElement::new(c, d.width, d.gain))
            .collect(),
    );
    detector.background_rate = d.background_rate;
    detector.validate(&grid)?;
    let rho0 = pure_density(&packet_state(cfg, grid)?)?;
    let weights = element_weights(&rho0, &detector, &FiringRule::Born)?;
    let k = d
        .fired
        .unwrap_or_else(|| draw_element(&weights, cfg.ensemble.seed, 0));
    let model = InfluenceModel::Detector(fire_element(&detector, k, 0.0)?);
    let res = evolve_and_write(cfg, out, &rho0, &model, 0.0)?;
    let masses = detector.element_masses(&res.final_state)?;
    let tr = res.final_state.trace();
    out.csv(
        "elements.csv",
        &["element", "center", "born_weight", "final_mass"],
        d.centers.iter().enumerate().map(|(j, c)| {
            [j.to_string(), fmt_f64(*c), fmt_f64(weights[j]), fmt_f64(masses[j] / tr)]
        }),
    )?;
    let mut lines = vec![format!(
        "element {k} fired; final mass on it {:.6}",
        masses[k] / tr
    )];

    if cfg.ensemble.n_runs > 1 {
        let ens = EnsembleConfig {
            n_runs: cfg.ensemble.n_runs,
            seed: cfg.ensemble.seed,
            detector,
            initial: rho0,
            rule: FiringRule::Born,
            potential: cfg.physics.potential.clone(),
            mass: cfg.physics.mass,
            evolve: evolve_config(&settings(cfg), 0.0),
        };
        let rep = ensemble_report(&ens)?;
        out.csv(
            "ensemble.csv",
            &["element", "center", "count", "frequency", "born_weight", "mean_state_mass"],
            d.centers.iter().enumerate().map(|(j, c)| {
                [
                    j.to_string(),
                    fmt_f64(*c),
                    rep.counts[j].to_string(),
                    fmt_f64(rep.frequencies[j]),
                    fmt_f64(rep.born_weights[j]),
                    fmt_f64(rep.mean_state_masses[j]),
                ]
            }),
        )?;
        lines.push(format!(
            "{} runs: TV(frequencies, Born weights) {:.4}, TV(mean-state masses, Born weights) {:.4}",
            ens.n_runs, rep.tv_distance, rep.mean_state_tv
        ));
    }
    Ok(lines)
}

fn unit_sum(v: &[f64]) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

fn epr(cfg: &ScenarioConfig, out: &mut Output) -> Result<Vec<String>, CliError> {
    let grid = grid(cfg)?;
    let e = cfg.epr.expect("validated config carries [epr]");
    let s = settings(cfg);
    let (m1, m2) = (cfg.physics.mass, cfg.physics.mass2);
    let potential = &cfg.physics.potential;
    let prep = EprPreparation {
        x0: e.x0,
        sigma_rel: e.sigma_rel,
        sigma_cm: e.sigma_cm,
        p_scale: e.p_scale,
        m1,
        m2,
        t_collision: 0.0,
    };
    let mut state = prepare_epr(&prep, &grid)?;
    if e.flight > 0.0 {
        let k = ((e.flight / s.dt).round() as usize).max(1);
        state = evolve_composite_steps(&state, e.flight / k as f64, k, potential, potential, &InteractionSpec::None)?;
    }
    let rho_s = partial_trace(&state, Particle::First)?;
    let duration = s.dt * s.steps as f64;

    let (model, observable) = match e.observable {
        EprObservable::Position { x2m, width } => (
            InfluenceModel::EprPosition(EprPositionGain {
                x0: e.x0,
                m1,
                m2,
                x2m,
                t_r: e.flight,
                t_collision: 0.0,
                gain: e.gain,
                width: width * m2 / m1,
            }),
            RObservable::Position { x2m, width },
        ),
        EprObservable::Momentum { p2m, band } => (
            InfluenceModel::EprMomentum(EprMomentumGain {
                p2m,
                band,
                t_r: e.flight,
                gain: e.gain,
            }),
            RObservable::Momentum { p2m, band },
        ),
    };
    let res = evolve_and_write(cfg, out, &rho_s, &model, e.flight)?;
    let measured = partial_trace(&measure_r(&state, observable, e.gain, duration)?, Particle::First)?;

    let (axis, coords, influence, composite) = match e.observable {
        EprObservable::Position { .. } => (
            "x",
            grid.points(),
            res.final_state.diagonal(),
            measured.diagonal(),
        ),
        EprObservable::Momentum { .. } => (
            "p",
            grid.momenta(),
            to_momentum(&res.final_state)?.diagonal(),
            to_momentum(&measured)?.diagonal(),
        ),
    };
    let (influence, composite) = (unit_sum(&influence), unit_sum(&composite));
    out.csv(
        "comparison.csv",
        &[axis, "influence_model", "composite"],
        coords
            .iter()
            .zip(influence.iter().zip(&composite))
            .map(|(c, (a, b))| [fmt_f64(*c), fmt_f64(*a), fmt_f64(*b)]),
    )?;
    let mut lines = vec![format!(
        "TV(influence model, composite) over {axis}: {:.4}",
        total_variation(&influence, &composite)
    )];
    if let InfluenceModel::EprPosition(g) = &model {
        let peak = |v: &[f64]| {
            let i = (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap_or(0);
            coords[i]
        };
        lines.push(format!(
            "predicted x1m {:.4}; peak influence model {:.4}, composite {:.4}",
            g.target(),
            peak(&influence),
            peak(&composite)
        ));
    }
    Ok(lines)
}

fn kernel_validation(cfg: &ScenarioConfig, out: &mut Output) -> Result<Vec<String>, CliError> {
    let grid = grid(cfg)?;
    let k = cfg.kernel.as_ref().expect("validated config carries [kernel]");
    let m = cfg.physics.mass;
    let potential = &cfg.physics.potential;
    let psi = WaveFunction::gaussian(grid, k.x0, k.sigma, 0.0)?;

    let reference = match potential {
        PotentialSpec::Free => schrodinger_step(&psi, k.time, potential, m)?,
        _ => {
            let dt = k.time / REFERENCE_STEPS as f64;
            let mut r = psi.clone();
            for _ in 0..REFERENCE_STEPS {
                r = schrodinger_step(&r, dt, potential, m)?;
            }
            r
        }
    };
    let refa = reference.amplitudes();
    let center = grid.index_of(k.x0);
    let scale = refa.iter().map(|z| z.norm()).fold(0.0, f64::max);

    let mut rows = Vec::new();
    for &slices in &k.slices {
        let v = TimeSlicedPropagator::new(grid, k.time, slices, potential, m)?.apply(&psi)?;
        let a = v.amplitudes();
        let at_center = (a[center] - refa[center]).norm() / refa[center].norm();
        let max = a
            .iter()
            .zip(refa)
            .map(|(x, y): (&Complex64, &Complex64)| (x - y).norm())
            .fold(0.0, f64::max)
            / scale;
        rows.push((slices, at_center, max));
    }
    out.csv(
        "kernel_convergence.csv",
        &["slices", "center_rel_error", "max_rel_error"],
        rows.iter()
            .map(|(s, c, mx)| [s.to_string(), fmt_f64(*c), fmt_f64(*mx)]),
    )?;
    Ok(rows
        .iter()
        .map(|(s, c, mx)| format!("slices {s:>4}: relative error at center {c:.3e}, max {mx:.3e}"))
        .collect())
}
