//! Closed two-particle dynamics: split-step evolution of `Ψ(x₁,x₂)`,
//! correlated breakup states, and registration of particle R by a gain.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{check_finite, check_positive, Error, Result};
use crate::fft::{self, Direction};
use crate::grid::{partial_trace, shift, DensityMatrix, Particle, SpatialGrid, TwoParticleState};
use crate::influence::{band_indicator, window_indicator};
use crate::propagator::{kinetic_multiplier, potential_phases, spectral_cols, spectral_rows, PotentialSpec};

/// Pair interaction `V(x₁, x₂)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum InteractionSpec {
    #[default]
    None,
    /// `strength·exp(−d²/(2·range²))` with `d` the minimal-image separation.
    Contact { strength: f64, range: f64 },
    Tabulated(Array2<f64>),
}

impl InteractionSpec {
    pub fn values(&self, g1: &SpatialGrid, g2: &SpatialGrid) -> Result<Option<Array2<f64>>> {
        let v = match self {
            InteractionSpec::None => return Ok(None),
            InteractionSpec::Contact { strength, range } => {
                check_finite("strength", *strength)?;
                let min = 2.0 * g1.dx().max(g2.dx());
                if !(range.is_finite() && *range >= min) {
                    return Err(Error::InvalidParameter {
                        name: "range",
                        reason: format!("{range} is below 2·dx = {min}"),
                    });
                }
                Array2::from_shape_fn((g1.n(), g2.n()), |(i, j)| {
                    let d = g1.wrap(g1.x(i) - g2.x(j));
                    strength * (-d * d / (2.0 * range * range)).exp()
                })
            }
            InteractionSpec::Tabulated(v) => {
                if v.dim() != (g1.n(), g2.n()) {
                    return Err(Error::ShapeMismatch(format!(
                        "tabulated interaction {:?} for grids of {} and {} points",
                        v.dim(),
                        g1.n(),
                        g2.n()
                    )));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidParameter {
                        name: "interaction",
                        reason: "values must be finite".into(),
                    });
                }
                v.clone()
            }
        };
        Ok(Some(v))
    }
}

/// Precomputed Strang factors for repeated two-particle steps.
#[derive(Debug, Clone)]
pub struct CompositePropagator {
    grid1: SpatialGrid,
    grid2: SpatialGrid,
    potential_half: Array2<Complex64>,
    k1: Vec<Complex64>,
    k2: Vec<Complex64>,
}

impl CompositePropagator {
    pub fn new(
        state: &TwoParticleState,
        dt: f64,
        u1: &PotentialSpec,
        u2: &PotentialSpec,
        v: &InteractionSpec,
    ) -> Result<Self> {
        check_positive("dt", dt)?;
        let (g1, g2) = (state.grid1, state.grid2);
        let hbar = g1.hbar();
        let a = u1.values(&g1, state.m1)?;
        let b = u2.values(&g2, state.m2)?;
        let vv = v.values(&g1, &g2)?;
        let pa = potential_phases(&g1, &a, dt / 2.0);
        let pb = potential_phases(&g2, &b, dt / 2.0);
        let potential_half = Array2::from_shape_fn((g1.n(), g2.n()), |(i, j)| {
            let pair = vv
                .as_ref()
                .map_or(Complex64::new(1.0, 0.0), |w| {
                    Complex64::from_polar(1.0, -w[[i, j]] * dt / (2.0 * hbar))
                });
            pa[i] * pb[j] * pair
        });
        Ok(Self {
            grid1: g1,
            grid2: g2,
            potential_half,
            k1: kinetic_multiplier(&g1, state.m1, dt),
            k2: kinetic_multiplier(&g2, state.m2, dt),
        })
    }

    pub fn step(&self, state: &mut TwoParticleState) -> Result<()> {
        if state.grid1 != self.grid1 || state.grid2 != self.grid2 {
            return Err(Error::ShapeMismatch(
                "state grids differ from the propagator's".into(),
            ));
        }
        let a = &mut state.amp;
        a.zip_mut_with(&self.potential_half, |z, f| *z *= *f);
        spectral_cols(a, &self.k1);
        spectral_rows(a, &self.k2);
        a.zip_mut_with(&self.potential_half, |z, f| *z *= *f);
        Ok(())
    }
}

/// One split step of the two-particle Schrödinger equation with potential
/// `U₁(x₁) + U₂(x₂) + V(x₁,x₂)`.
pub fn evolve_composite(
    state: &TwoParticleState,
    dt: f64,
    u1: &PotentialSpec,
    u2: &PotentialSpec,
    v: &InteractionSpec,
) -> Result<TwoParticleState> {
    evolve_composite_steps(state, dt, 1, u1, u2, v)
}

pub fn evolve_composite_steps(
    state: &TwoParticleState,
    dt: f64,
    steps: usize,
    u1: &PotentialSpec,
    u2: &PotentialSpec,
    v: &InteractionSpec,
) -> Result<TwoParticleState> {
    let prop = CompositePropagator::new(state, dt, u1, u2, v)?;
    let mut out = state.clone();
    for _ in 0..steps {
        prop.step(&mut out)?;
    }
    Ok(out)
}

/// Parameters of a correlated breakup state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EprPreparation {
    pub x0: f64,
    /// Width of the relative coordinate `x₁ − x₂`.
    pub sigma_rel: f64,
    /// Width of the mass-weighted center `(m₁x₁ + m₂x₂)/M`.
    pub sigma_cm: f64,
    /// Mean outgoing momentum: particle 1 carries `+p_scale`, particle 2 `−p_scale`.
    pub p_scale: f64,
    pub m1: f64,
    pub m2: f64,
    pub t_collision: f64,
}

impl EprPreparation {
    pub fn new(x0: f64, sigma_rel: f64, sigma_cm: f64) -> Self {
        Self {
            x0,
            sigma_rel,
            sigma_cm,
            p_scale: 0.0,
            m1: 1.0,
            m2: 1.0,
            t_collision: 0.0,
        }
    }
}

/// `Ψ ∝ exp(−u²/(4σ_rel²))·Σ_w exp(−(X − x0 + wL)²/(4σ_cm²))·exp(i p u/ħ)` with
/// `u = x₁ − x₂` (minimal image) and `X = x₁ − (m₂/M)·u`. The periodic sum over
/// images keeps the state smooth on the torus for any `σ_cm`.
pub fn prepare_epr(prep: &EprPreparation, grid: &SpatialGrid) -> Result<TwoParticleState> {
    check_positive("m1", prep.m1)?;
    check_positive("m2", prep.m2)?;
    check_finite("x0", prep.x0)?;
    check_finite("p_scale", prep.p_scale)?;
    let min = 2.0 * grid.dx();
    for (name, s) in [("sigma_rel", prep.sigma_rel), ("sigma_cm", prep.sigma_cm)] {
        if !(s.is_finite() && s >= min * (1.0 - 1e-12)) {
            return Err(Error::InvalidParameter {
                name,
                reason: format!("{s} is below 2·dx = {min}"),
            });
        }
    }
    let n = grid.n();
    let l = grid.length();
    let mu2 = prep.m2 / (prep.m1 + prep.m2);
    let images = (prep.sigma_cm * 12.0 / l).ceil() as i64 + 1;
    let hbar = grid.hbar();
    let amp = Array2::from_shape_fn((n, n), |(i, j)| {
        let u = grid.wrap(grid.x(i) - grid.x(j));
        let big_x = grid.x(i) - mu2 * u - prep.x0;
        let cm: f64 = (-images..=images)
            .map(|w| {
                let d = big_x + w as f64 * l;
                (-d * d / (4.0 * prep.sigma_cm * prep.sigma_cm)).exp()
            })
            .sum();
        let rel = (-u * u / (4.0 * prep.sigma_rel * prep.sigma_rel)).exp();
        Complex64::from_polar(rel * cm, prep.p_scale * u / hbar)
    });
    TwoParticleState::new(*grid, *grid, amp, prep.m1, prep.m2)?.normalized()
}

/// What the R-side apparatus registers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RObservable {
    /// Position window of full width `width` centered on `x2m`.
    Position { x2m: f64, width: f64 },
    /// Momentum band `p2m ± band`.
    Momentum { p2m: f64, band: f64 },
}

/// Multiplies `Ψ` by `exp(G·T·b)` on the particle-2 index, then renormalizes.
pub fn measure_r(
    state: &TwoParticleState,
    observable: RObservable,
    gain: f64,
    duration: f64,
) -> Result<TwoParticleState> {
    if !(gain.is_finite() && gain >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "gain",
            reason: format!("must be nonnegative, got {gain}"),
        });
    }
    if !(duration.is_finite() && duration >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "duration",
            reason: format!("must be nonnegative, got {duration}"),
        });
    }
    let g = state.grid2;
    let gt = gain * duration;
    let mut out = state.clone();
    match observable {
        RObservable::Position { x2m, width } => {
            check_finite("x2m", x2m)?;
            check_positive("width", width)?;
            let b = window_indicator(&g, x2m, width);
            check_window(&out.amp, &b)?;
            if gt == 0.0 {
                return Ok(out);
            }
            apply_column_gain(&mut out.amp, &b, gt);
        }
        RObservable::Momentum { p2m, band } => {
            check_finite("p2m", p2m)?;
            check_positive("band", band)?;
            let b = band_indicator(&g, p2m, band);
            let mut mom = second_to_momentum(&out.amp, &g);
            check_window(&mom, &b)?;
            if gt == 0.0 {
                return Ok(out);
            }
            apply_column_gain(&mut mom, &b, gt);
            out.amp = second_to_position(&mom, &g);
        }
    }
    out.normalized().map_err(|_| Error::Annihilated)
}

fn check_window(a: &Array2<Complex64>, b: &[f64]) -> Result<()> {
    let mut inside = 0.0;
    let mut total = 0.0;
    for row in a.rows() {
        for (z, w) in row.iter().zip(b) {
            let p = z.norm_sqr();
            total += p;
            inside += p * w;
        }
    }
    if !(total > 0.0) || inside <= 1e-30 * total {
        return Err(Error::EmptyWindow);
    }
    Ok(())
}

fn apply_column_gain(a: &mut Array2<Complex64>, b: &[f64], gt: f64) {
    let f: Vec<f64> = b.iter().map(|w| (gt * w).exp()).collect();
    for mut row in a.rows_mut() {
        row.iter_mut().zip(&f).for_each(|(z, s)| *z *= *s);
    }
}

/// Particle-2 index to the centered momentum lattice.
pub(crate) fn second_to_momentum(a: &Array2<Complex64>, g: &SpatialGrid) -> Array2<Complex64> {
    let n = g.n();
    let mut t = a.clone();
    fft::rows(&mut t, Direction::Forward);
    let c = g.transform_phases();
    let (rows, _) = a.dim();
    Array2::from_shape_fn((rows, n), |(r, i)| {
        let j = shift(i, n);
        c[j] * t[[r, j]]
    })
}

fn second_to_position(a: &Array2<Complex64>, g: &SpatialGrid) -> Array2<Complex64> {
    let n = g.n();
    let c = g.transform_phases();
    let inv_n = 1.0 / n as f64;
    let (rows, _) = a.dim();
    let mut t = Array2::from_shape_fn((rows, n), |(r, j)| a[[r, shift(j, n)]] / c[j] * inv_n);
    fft::rows(&mut t, Direction::Inverse);
    t
}

/// Reduced state of one particle.
pub fn reduced(state: &TwoParticleState, keep: Particle) -> Result<DensityMatrix> {
    partial_trace(state, keep)
}

/// Joint momentum distribution `|Ψ̃(p₁,p₂)|²` on the centered lattices.
pub fn momentum_distribution(state: &TwoParticleState) -> Array2<f64> {
    let a = second_to_momentum(&state.amp, &state.grid2);
    let t = a.t().as_standard_layout().into_owned();
    second_to_momentum(&t, &state.grid1)
        .t()
        .mapv(|z| z.norm_sqr())
}
