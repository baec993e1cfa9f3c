//! Nonlinear integrator: unitary splitting around an elementwise gain, followed
//! by trace renormalization.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{check_positive, Error, Result};
use crate::grid::{
    quick_diagnostics, to_momentum, to_position, DensityMatrix, DiagnosticsRecord, Representation,
    SpatialGrid,
};
use crate::influence::{InfluenceModel, RateField};
use crate::propagator::{
    conjugate_diagonal, kinetic_conjugation, kinetic_multiplier, potential_phases, spectral_cols,
    PotentialSpec,
};

/// Placement of the gain inside one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Splitting {
    /// `V(dt/2)·K(dt/2)·G(dt)·K(dt/2)·V(dt/2)` with the rate taken at mid-step.
    #[default]
    Symmetric,
    /// `G(dt)` at the start of the step, then one Strang unitary step.
    GainFirst,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveConfig {
    pub dt: f64,
    pub steps: usize,
    /// Normalize after every `normalize_every` steps; the last step always normalizes.
    pub normalize_every: usize,
    /// Record diagnostics every `record_every` steps, plus the initial and final states.
    pub record_every: usize,
    pub splitting: Splitting,
    /// Compute the minimum eigenvalue for each record.
    pub min_eig: bool,
    /// Evaluate the continuity residual at interior records.
    pub continuity: bool,
    pub t0: f64,
}

impl EvolveConfig {
    pub fn new(dt: f64, steps: usize) -> Self {
        Self {
            dt,
            steps,
            normalize_every: 1,
            record_every: 1,
            splitting: Splitting::Symmetric,
            min_eig: false,
            continuity: false,
            t0: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("dt", self.dt)?;
        if self.steps == 0 {
            return Err(Error::InvalidParameter {
                name: "steps",
                reason: "must be at least 1".into(),
            });
        }
        if self.normalize_every == 0 {
            return Err(Error::InvalidParameter {
                name: "normalize_every",
                reason: "must be at least 1".into(),
            });
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParameter {
                name: "record_every",
                reason: "must be at least 1".into(),
            });
        }
        if !self.t0.is_finite() {
            return Err(Error::InvalidParameter {
                name: "t0",
                reason: "must be finite".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxEntry {
    /// Time at the end of the step.
    pub t: f64,
    /// Trace at the end of the step, before any normalization.
    pub trace_before_normalization: f64,
    /// `ln(Tr after gain / Tr before gain)`; exactly 0 when no gain acts.
    pub log_gain: f64,
    pub normalized: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NormFluxLog {
    pub entries: Vec<FluxEntry>,
}

impl NormFluxLog {
    pub fn total_log_gain(&self) -> f64 {
        self.entries.iter().map(|e| e.log_gain).sum()
    }
}

fn check_rate(rate: &RateField) -> Result<()> {
    match rate.values() {
        Some(a) if a.iter().any(|v| !v.is_finite()) => Err(Error::NonFiniteRate),
        _ => Ok(()),
    }
}

fn gain_factors(rate: &RateField, dt: f64) -> Option<(Representation, Array2<f64>)> {
    match rate {
        RateField::Zero => None,
        RateField::Position(a) => Some((Representation::Position, a.mapv(|l| (l * dt).exp()))),
        RateField::Momentum(a) => Some((Representation::Momentum, a.mapv(|l| (l * dt).exp()))),
    }
}

fn apply_factors(rho: &mut DensityMatrix, repr: Representation, e: &Array2<f64>) -> Result<()> {
    match repr {
        Representation::Position => {
            rho.rho.zip_mut_with(e, |z, f| *z *= *f);
        }
        Representation::Momentum => {
            let mut m = to_momentum(rho)?;
            m.rho.zip_mut_with(e, |z, f| *z *= *f);
            *rho = to_position(&m)?;
        }
    }
    Ok(())
}

fn expect_position(rho: &DensityMatrix) -> Result<()> {
    if rho.repr == Representation::Position {
        Ok(())
    } else {
        Err(Error::WrongRepresentation {
            expected: Representation::Position,
        })
    }
}

/// Elementwise `ρ ∘ exp(Λ dt)`, in momentum representation for momentum-space rates.
pub fn gain_step(
    rho: &DensityMatrix,
    model: &InfluenceModel,
    t: f64,
    dt: f64,
) -> Result<DensityMatrix> {
    check_positive("dt", dt)?;
    expect_position(rho)?;
    let rate = model.rate(&rho.grid, t)?;
    check_rate(&rate)?;
    let mut out = rho.clone();
    if let Some((repr, e)) = gain_factors(&rate, dt) {
        apply_factors(&mut out, repr, &e)?;
    }
    Ok(out)
}

/// Divides by the trace and returns the trace found beforehand.
pub fn normalize(rho: &DensityMatrix) -> Result<(DensityMatrix, f64)> {
    let mut out = rho.clone();
    let tr = out.normalize_in_place()?;
    Ok((out, tr))
}

/// Phase factors and cached gain multipliers for repeated steps of one size.
struct Stepper<'a> {
    grid: SpatialGrid,
    model: &'a InfluenceModel,
    dt: f64,
    splitting: Splitting,
    v_half: Vec<Complex64>,
    k_half: Vec<Complex64>,
    k_full: Vec<Complex64>,
    cached: Option<(RateField, Option<(Representation, Array2<f64>)>)>,
}

struct StepOutcome {
    log_gain: f64,
}

impl<'a> Stepper<'a> {
    fn new(
        grid: SpatialGrid,
        model: &'a InfluenceModel,
        potential: &PotentialSpec,
        m: f64,
        dt: f64,
        splitting: Splitting,
    ) -> Result<Self> {
        check_positive("dt", dt)?;
        check_positive("m", m)?;
        let u = potential.values(&grid, m)?;
        Ok(Self {
            grid,
            model,
            dt,
            splitting,
            v_half: potential_phases(&grid, &u, dt / 2.0),
            k_half: kinetic_multiplier(&grid, m, dt / 2.0),
            k_full: kinetic_multiplier(&grid, m, dt),
            cached: None,
        })
    }

    fn factors(&mut self, t: f64) -> Result<Option<(Representation, Array2<f64>)>> {
        let rate = self.model.rate(&self.grid, t)?;
        if let Some((r, f)) = &self.cached {
            if *r == rate {
                return Ok(f.clone());
            }
        }
        check_rate(&rate)?;
        let f = gain_factors(&rate, self.dt);
        self.cached = Some((rate, f.clone()));
        Ok(f)
    }

    fn gain(rho: &mut DensityMatrix, f: &Option<(Representation, Array2<f64>)>) -> Result<f64> {
        let Some((repr, e)) = f else {
            return Ok(0.0);
        };
        let before = rho.trace();
        apply_factors(rho, *repr, e)?;
        let after = rho.trace();
        if !(before > 0.0 && after.is_finite() && after > 0.0) {
            return Err(Error::Annihilated);
        }
        Ok((after / before).ln())
    }

    /// Advances `rho` from `t` to `t + dt` without normalizing.
    fn advance(&mut self, rho: &mut DensityMatrix, t: f64) -> Result<StepOutcome> {
        let log_gain = match self.splitting {
            Splitting::Symmetric => {
                let f = self.factors(t + self.dt / 2.0)?;
                conjugate_diagonal(&mut rho.rho, &self.v_half);
                let log_gain = if f.is_some() {
                    kinetic_conjugation(&mut rho.rho, &self.k_half);
                    let g = Self::gain(rho, &f)?;
                    kinetic_conjugation(&mut rho.rho, &self.k_half);
                    g
                } else {
                    kinetic_conjugation(&mut rho.rho, &self.k_full);
                    0.0
                };
                conjugate_diagonal(&mut rho.rho, &self.v_half);
                log_gain
            }
            Splitting::GainFirst => {
                let f = self.factors(t)?;
                let g = Self::gain(rho, &f)?;
                conjugate_diagonal(&mut rho.rho, &self.v_half);
                kinetic_conjugation(&mut rho.rho, &self.k_full);
                conjugate_diagonal(&mut rho.rho, &self.v_half);
                g
            }
        };
        if rho.rho.iter().any(|z| !z.is_finite()) {
            return Err(Error::Annihilated);
        }
        Ok(StepOutcome { log_gain })
    }
}

fn scaled_record(rho: &DensityMatrix, t: f64, with_eig: bool) -> DiagnosticsRecord {
    let mut rec = quick_diagnostics(rho);
    let tr = rec.trace_pre_norm;
    rec.t = t;
    rec.purity /= tr * tr;
    rec.hermiticity_residual /= tr;
    if with_eig {
        rec.min_eig = Some(rho.min_eigenvalue() / tr);
    }
    rec
}

/// One full step from `t`: unitary half, gain, unitary half, normalization.
pub fn step(
    rho: &DensityMatrix,
    model: &InfluenceModel,
    potential: &PotentialSpec,
    m: f64,
    t: f64,
    dt: f64,
) -> Result<(DensityMatrix, DiagnosticsRecord)> {
    expect_position(rho)?;
    let mut stepper = Stepper::new(rho.grid, model, potential, m, dt, Splitting::Symmetric)?;
    let mut out = rho.clone();
    stepper.advance(&mut out, t)?;
    let tr = out.normalize_in_place()?;
    let mut rec = scaled_record(&out, t + dt, false);
    rec.trace_pre_norm = tr;
    Ok((out, rec))
}

/// A state along a trajectory together with the accumulated log of the
/// normalization divisors, so that `rho·exp(log_scale)` is the unnormalized state.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub rho: DensityMatrix,
    pub log_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub final_state: DensityMatrix,
    pub records: Vec<DiagnosticsRecord>,
    pub flux: NormFluxLog,
}

/// Runs `config.steps` steps.
pub fn run(
    initial: &DensityMatrix,
    model: &InfluenceModel,
    potential: &PotentialSpec,
    m: f64,
    config: &EvolveConfig,
) -> Result<RunOutput> {
    run_with(initial, model, potential, m, config, |_| {})
}

/// State handed to a [`run_with`] observer at each record.
#[derive(Debug, Clone, Copy)]
pub struct Snapshot<'a> {
    pub step: usize,
    /// Unnormalized between normalizations when `normalize_every > 1`.
    pub rho: &'a DensityMatrix,
    pub log_scale: f64,
    pub record: &'a DiagnosticsRecord,
}

impl Snapshot<'_> {
    pub fn to_point(&self) -> TrajectoryPoint {
        TrajectoryPoint {
            t: self.record.t,
            rho: self.rho.clone(),
            log_scale: self.log_scale,
        }
    }
}

/// Like [`run`], calling `observe` at every record.
pub fn run_with<F>(
    initial: &DensityMatrix,
    model: &InfluenceModel,
    potential: &PotentialSpec,
    m: f64,
    config: &EvolveConfig,
    mut observe: F,
) -> Result<RunOutput>
where
    F: FnMut(Snapshot<'_>),
{
    config.validate()?;
    expect_position(initial)?;
    let mut stepper = Stepper::new(initial.grid, model, potential, m, config.dt, config.splitting)?;
    let time = |s: usize| config.t0 + s as f64 * config.dt;

    let mut rho = initial.clone();
    let mut log_scale = 0.0;
    let mut records = Vec::new();
    let mut record_steps = Vec::new();
    let mut flux = NormFluxLog::default();
    // (step, state, log_scale) for the previous two steps, used for the centered difference.
    let mut window: Vec<(usize, DensityMatrix, f64)> = Vec::new();

    let rec = scaled_record(&rho, time(0), config.min_eig);
    observe(Snapshot {
        step: 0,
        rho: &rho,
        log_scale,
        record: &rec,
    });
    records.push(rec);
    record_steps.push(0);

    for s in 1..=config.steps {
        if config.continuity {
            window.push((s - 1, rho.clone(), log_scale));
            if window.len() > 2 {
                window.remove(0);
            }
        }
        let out = stepper.advance(&mut rho, time(s - 1))?;
        let tr = rho.trace();
        if !(tr.is_finite() && tr > 0.0) {
            return Err(Error::Annihilated);
        }
        let normalized = s % config.normalize_every == 0 || s == config.steps;
        if normalized {
            rho.normalize_in_place()?;
            log_scale += tr.ln();
        }
        flux.entries.push(FluxEntry {
            t: time(s),
            trace_before_normalization: tr,
            log_gain: out.log_gain,
            normalized,
        });

        if config.continuity && window.len() == 2 {
            let (mid, ..) = window[1];
            if record_steps.last() == Some(&mid) && mid > 0 {
                let prev = &window[0];
                let cur = &window[1];
                let r = residual_field(
                    (prev.1.clone(), prev.2),
                    (&cur.1, cur.2),
                    (rho.clone(), log_scale),
                    model,
                    m,
                    time(mid),
                    config.dt,
                )?;
                let last = records.last_mut().expect("record present");
                last.continuity_residual_max = Some(r.iter().fold(0.0f64, |a, v| a.max(v.abs())));
            }
        }

        if s % config.record_every == 0 || s == config.steps {
            let mut rec = scaled_record(&rho, time(s), config.min_eig);
            rec.trace_pre_norm = tr;
            observe(Snapshot {
                step: s,
                rho: &rho,
                log_scale,
                record: &rec,
            });
            records.push(rec);
            record_steps.push(s);
        }
    }

    Ok(RunOutput {
        final_state: rho,
        records,
        flux,
    })
}

/// Residual field `∂ρ(x,x)/∂t + ∂j/∂x − [Λρ](x,x)` at each interior point of
/// the series, using a centered time difference of the unnormalized states.
pub fn continuity_residual(
    series: &[TrajectoryPoint],
    model: &InfluenceModel,
    m: f64,
) -> Result<Vec<Vec<f64>>> {
    if series.len() < 3 {
        return Err(Error::SeriesTooShort(series.len()));
    }
    check_positive("m", m)?;
    series
        .windows(3)
        .map(|w| {
            let dt = (w[2].t - w[0].t) / 2.0;
            check_positive("dt", dt)?;
            residual_field(
                (w[0].rho.clone(), w[0].log_scale),
                (&w[1].rho, w[1].log_scale),
                (w[2].rho.clone(), w[2].log_scale),
                model,
                m,
                w[1].t,
                dt,
            )
        })
        .collect()
}

fn residual_field(
    prev: (DensityMatrix, f64),
    cur: (&DensityMatrix, f64),
    next: (DensityMatrix, f64),
    model: &InfluenceModel,
    m: f64,
    t: f64,
    dt: f64,
) -> Result<Vec<f64>> {
    let (rho, s_cur) = cur;
    expect_position(rho)?;
    expect_position(&prev.0)?;
    expect_position(&next.0)?;
    let grid = rho.grid;
    grid.check_same(&prev.0.grid)?;
    grid.check_same(&next.0.grid)?;
    let n = grid.n();
    let fp = (prev.1 - s_cur).exp();
    let fn_ = (next.1 - s_cur).exp();
    let dpdt: Vec<f64> = (0..n)
        .map(|i| (next.0.rho[[i, i]].re * fn_ - prev.0.rho[[i, i]].re * fp) / (2.0 * dt))
        .collect();

    let div_j = flux_divergence(rho, m);

    let source: Vec<f64> = match model.rate(&grid, t)? {
        RateField::Zero => vec![0.0; n],
        RateField::Position(l) => (0..n).map(|i| l[[i, i]] * rho.rho[[i, i]].re).collect(),
        RateField::Momentum(l) => {
            let mut mom = to_momentum(rho)?;
            mom.rho.zip_mut_with(&l, |z, v| *z *= *v);
            to_position(&mom)?.diagonal()
        }
    };

    Ok((0..n).map(|i| dpdt[i] + div_j[i] - source[i]).collect())
}

/// `∂j/∂x` evaluated as the diagonal of `(i/ħ)[T, ρ]`, with `T` the spectral kinetic
/// operator used by the propagator. For Hermitian `ρ` this is `−(2/ħ)·Im (Tρ)_ii`.
pub fn flux_divergence(rho: &DensityMatrix, m: f64) -> Vec<f64> {
    let grid = rho.grid;
    let hbar = grid.hbar();
    let inv_n = 1.0 / grid.n() as f64;
    let t: Vec<Complex64> = grid
        .fft_momenta()
        .into_iter()
        .map(|p| Complex64::new(p * p / (2.0 * m) * inv_n, 0.0))
        .collect();
    let mut a = rho.rho.clone();
    spectral_cols(&mut a, &t);
    a.diag().iter().map(|z| -2.0 / hbar * z.im).collect()
}
