//! Ensembles of detector registrations: which element fires, and what the
//! collapsed states look like on average.

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{check_positive, Error, Result};
use crate::evolve::{run, EvolveConfig};
use crate::grid::DensityMatrix;
use crate::influence::{fire_element, DetectorArray, InfluenceModel};
use crate::propagator::PotentialSpec;

/// How registration probabilities depend on the state.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum FiringRule {
    /// Diagonal mass on each element.
    #[default]
    Born,
    /// Element masses reweighted by per-element factors.
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub n_runs: usize,
    pub seed: u64,
    pub detector: DetectorArray,
    pub initial: DensityMatrix,
    pub rule: FiringRule,
    pub potential: PotentialSpec,
    pub mass: f64,
    /// The fired element registers at `evolve.t0`.
    pub evolve: EvolveConfig,
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_runs == 0 {
            return Err(Error::InvalidParameter {
                name: "n_runs",
                reason: "must be at least 1".into(),
            });
        }
        check_positive("mass", self.mass)?;
        self.detector.validate(self.initial.grid())?;
        if self.detector.fired().is_some() {
            return Err(Error::InvalidParameter {
                name: "detector",
                reason: "elements must be unfired before sampling".into(),
            });
        }
        self.evolve.validate()
    }
}

/// `p_k = w_k·M_k / Σ_j w_j·M_j` with `M_k` the diagonal mass on element `k`.
pub fn element_weights(
    rho: &DensityMatrix,
    detector: &DetectorArray,
    rule: &FiringRule,
) -> Result<Vec<f64>> {
    let masses = detector.element_masses(rho)?;
    let w = match rule {
        FiringRule::Born => vec![1.0; masses.len()],
        FiringRule::Custom(w) => {
            if w.len() != masses.len() {
                return Err(Error::ShapeMismatch(format!(
                    "{} weights for {} elements",
                    w.len(),
                    masses.len()
                )));
            }
            if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || w.iter().all(|x| *x == 0.0) {
                return Err(Error::InvalidParameter {
                    name: "weights",
                    reason: "must be nonnegative and not all zero".into(),
                });
            }
            w.clone()
        }
    };
    let raw: Vec<f64> = masses.iter().zip(&w).map(|(m, w)| (m * w).max(0.0)).collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::MissesDetector);
    }
    Ok(raw.into_iter().map(|x| x / total).collect())
}

/// Inverse-CDF draw from `weights` with a generator keyed by `(seed, run_index)`.
pub fn draw_element(weights: &[f64], seed: u64, run_index: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run_index);
    let u: f64 = rng.random();
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    let mut last = 0;
    for (k, w) in weights.iter().enumerate() {
        if *w <= 0.0 {
            continue;
        }
        last = k;
        acc += w / total;
        if u < acc {
            return k;
        }
    }
    last
}

/// Runs the collapse after registration in element `k`.
pub fn collapse_on(config: &EnsembleConfig, k: usize) -> Result<DensityMatrix> {
    let detector = fire_element(&config.detector, k, config.evolve.t0)?;
    let model = InfluenceModel::Detector(detector);
    Ok(run(&config.initial, &model, &config.potential, config.mass, &config.evolve)?.final_state)
}

/// Draws the firing element for one run and evolves to the collapsed state.
pub fn sample_and_collapse(config: &EnsembleConfig, run_index: u64) -> Result<(usize, DensityMatrix)> {
    config.validate()?;
    let p = element_weights(&config.initial, &config.detector, &config.rule)?;
    let k = draw_element(&p, config.seed, run_index);
    Ok((k, collapse_on(config, k)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleReport {
    pub counts: Vec<usize>,
    pub frequencies: Vec<f64>,
    pub born_weights: Vec<f64>,
    /// `½ Σ |f_k − p_k|`.
    pub tv_distance: f64,
    pub purity_min: f64,
    pub purity_mean: f64,
    pub purity_max: f64,
    /// Element masses of the run-averaged final state.
    pub mean_state_masses: Vec<f64>,
    /// Total-variation distance between `mean_state_masses` and `born_weights`.
    pub mean_state_tv: f64,
    /// Largest coherence `|ρ̄(x,y)|·dx` of the run-averaged state between different elements.
    pub max_cross_coherence: f64,
    pub mean_state: DensityMatrix,
}

pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Aggregates `n_runs` registrations. The evolution after firing is
/// deterministic, so each distinct element is evolved once.
pub fn ensemble_report(config: &EnsembleConfig) -> Result<EnsembleReport> {
    config.validate()?;
    let n_el = config.detector.len();
    let p = element_weights(&config.initial, &config.detector, &config.rule)?;
    let mut counts = vec![0usize; n_el];
    for r in 0..config.n_runs as u64 {
        counts[draw_element(&p, config.seed, r)] += 1;
    }
    let fired: Vec<usize> = (0..n_el).filter(|&k| counts[k] > 0).collect();
    let states: Vec<(usize, DensityMatrix)> = fired
        .par_iter()
        .map(|&k| collapse_on(config, k).map(|s| (k, s)))
        .collect::<Result<_>>()?;

    let runs = config.n_runs as f64;
    let frequencies: Vec<f64> = counts.iter().map(|&c| c as f64 / runs).collect();
    let grid = *config.initial.grid();
    let n = grid.n();
    let mut mean = Array2::<Complex64>::zeros((n, n));
    let (mut pmin, mut pmax, mut psum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for (k, s) in &states {
        let f = frequencies[*k];
        mean.scaled_add(Complex64::new(f, 0.0), s.matrix());
        let pur = s.purity();
        pmin = pmin.min(pur);
        pmax = pmax.max(pur);
        psum += pur * counts[*k] as f64;
    }
    let mean_state = DensityMatrix::new(grid, mean, config.initial.representation())?;
    let mean_state_masses = config.detector.element_masses(&mean_state)?;

    let owner = element_owner(&config.detector, &grid);
    let mut cross = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if let (Some(a), Some(b)) = (owner[i], owner[j]) {
                if a != b {
                    cross = cross.max(mean_state.matrix()[[i, j]].norm() * grid.dx());
                }
            }
        }
    }

    Ok(EnsembleReport {
        tv_distance: total_variation(&frequencies, &p),
        mean_state_tv: total_variation(&mean_state_masses, &p),
        counts,
        frequencies,
        born_weights: p,
        purity_min: pmin,
        purity_mean: psum / runs,
        purity_max: pmax,
        mean_state_masses,
        max_cross_coherence: cross,
        mean_state,
    })
}

fn element_owner(detector: &DetectorArray, grid: &crate::grid::SpatialGrid) -> Vec<Option<usize>> {
    let mut owner = vec![None; grid.n()];
    for (k, e) in detector.elements.iter().enumerate() {
        for i in e.indices(grid) {
            owner[i] = Some(k);
        }
    }
    owner
}
