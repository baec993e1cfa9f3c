//! Linear propagation: closed-form kernels, the time-sliced path-integral
//! quadrature, and split-step stepping for wave functions and density matrices.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{check_finite, check_positive, Error, Result};
use crate::fft::{self, Direction};
use crate::grid::{DensityMatrix, Representation, SpatialGrid, WaveFunction};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// External potential `U(x)` evaluated on a grid.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSpec {
    Free,
    /// `½·m·ω²·(x − center)²`.
    Harmonic { omega: f64, center: f64 },
    /// `height` on `left ≤ x < right`, zero elsewhere.
    Barrier { height: f64, left: f64, right: f64 },
    Tabulated(Vec<f64>),
}

impl PotentialSpec {
    pub fn harmonic(omega: f64) -> Self {
        PotentialSpec::Harmonic { omega, center: 0.0 }
    }

    pub fn values(&self, grid: &SpatialGrid, m: f64) -> Result<Vec<f64>> {
        let xs = grid.points();
        let v: Vec<f64> = match self {
            PotentialSpec::Free => vec![0.0; grid.n()],
            PotentialSpec::Harmonic { omega, center } => {
                check_finite("omega", *omega)?;
                xs.iter()
                    .map(|x| 0.5 * m * omega * omega * (x - center).powi(2))
                    .collect()
            }
            PotentialSpec::Barrier {
                height,
                left,
                right,
            } => {
                if !(left < right) {
                    return Err(Error::InvalidParameter {
                        name: "barrier",
                        reason: format!("need left < right, got [{left}, {right})"),
                    });
                }
                xs.iter()
                    .map(|x| if (*left..*right).contains(x) { *height } else { 0.0 })
                    .collect()
            }
            PotentialSpec::Tabulated(v) => {
                if v.len() != grid.n() {
                    return Err(Error::ShapeMismatch(format!(
                        "tabulated potential has {} values for {} points",
                        v.len(),
                        grid.n()
                    )));
                }
                v.clone()
            }
        };
        if v.iter().any(|u| !u.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "potential",
                reason: "values must be finite".into(),
            });
        }
        Ok(v)
    }
}

/// Values of a computed kernel entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSample {
    pub x: f64,
    pub x0: f64,
    pub t: f64,
    pub value: Complex64,
}

/// `√(m/(2πiħt))·exp(i m (x−x0)²/(2ħt))`.
pub fn free_kernel(x: f64, x0: f64, t: f64, m: f64, hbar: f64) -> Result<Complex64> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime);
    }
    let pref = (Complex64::new(m, 0.0) / (2.0 * PI * hbar * t * I)).sqrt();
    Ok(pref * Complex64::from_polar(1.0, m * (x - x0).powi(2) / (2.0 * hbar * t)))
}

/// Kernel of `½mω²x²` for `0 < ωt < π`.
pub fn harmonic_kernel(x: f64, x0: f64, t: f64, m: f64, omega: f64, hbar: f64) -> Result<Complex64> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime);
    }
    let s = (omega * t).sin();
    if !(s > 0.0) {
        return Err(Error::InvalidParameter {
            name: "t",
            reason: "harmonic kernel needs 0 < ωt < π".into(),
        });
    }
    let pref = (Complex64::new(m * omega, 0.0) / (2.0 * PI * hbar * s * I)).sqrt();
    let phase = m * omega / (2.0 * hbar * s) * ((x * x + x0 * x0) * (omega * t).cos() - 2.0 * x * x0);
    Ok(pref * Complex64::from_polar(1.0, phase))
}

/// Fraction of the domain over which the slice kernel tapers to zero before
/// the minimal-image cut at `|d| = L/2`.
pub const TAPER_FRACTION: f64 = 0.2;

/// Broken-line path integral on a periodic grid.
///
/// One slice of duration `ε = t/slices` is the matrix
/// `M_ij = √(m/(2πiħε))·dx·exp(i m d²/(2ħε))·W(d)·exp(−iε(U_i+U_j)/(2ħ))`
/// with `d` the minimal-image separation and `W` a smooth taper.
#[derive(Debug, Clone)]
pub struct TimeSlicedPropagator {
    grid: SpatialGrid,
    slice: Array2<Complex64>,
    slices: usize,
    t: f64,
}

impl TimeSlicedPropagator {
    pub fn new(
        grid: SpatialGrid,
        t: f64,
        slices: usize,
        potential: &PotentialSpec,
        m: f64,
    ) -> Result<Self> {
        if !(t > 0.0) {
            return Err(Error::NonPositiveTime);
        }
        if slices == 0 {
            return Err(Error::InvalidParameter {
                name: "slices",
                reason: "must be at least 1".into(),
            });
        }
        check_positive("m", m)?;
        let hbar = grid.hbar();
        let eps = t / slices as f64;
        let limit = resolution_limit(&grid, m);
        if eps < limit {
            return Err(Error::UnderResolved {
                epsilon: eps,
                limit,
            });
        }
        let u = potential.values(&grid, m)?;
        let n = grid.n();
        let pref = (Complex64::new(m, 0.0) / (2.0 * PI * hbar * eps * I)).sqrt() * grid.dx();
        let half_l = grid.length() / 2.0;
        let slice = Array2::from_shape_fn((n, n), |(i, j)| {
            let d = grid.wrap(grid.x(i) - grid.x(j));
            let w = taper(d.abs(), half_l);
            if w == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let phase = m * d * d / (2.0 * hbar * eps) - eps * (u[i] + u[j]) / (2.0 * hbar);
            pref * w * Complex64::from_polar(1.0, phase)
        });
        Ok(Self {
            grid,
            slice,
            slices,
            t,
        })
    }

    pub fn slices(&self) -> usize {
        self.slices
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    fn apply_amplitudes(&self, mut v: Vec<Complex64>) -> Vec<Complex64> {
        let n = self.grid.n();
        let mut next = vec![Complex64::new(0.0, 0.0); n];
        for _ in 0..self.slices {
            for (i, out) in next.iter_mut().enumerate() {
                let row = self.slice.row(i);
                *out = row.iter().zip(&v).map(|(a, b)| a * b).sum();
            }
            std::mem::swap(&mut v, &mut next);
        }
        v
    }

    /// Propagates a wave function through all slices.
    pub fn apply(&self, psi: &WaveFunction) -> Result<WaveFunction> {
        self.grid.check_same(psi.grid())?;
        WaveFunction::new(self.grid, self.apply_amplitudes(psi.amplitudes().to_vec()))
    }

    /// `K(x_i, x0_j) = (M^slices)_ij / dx` for all `i` at fixed source index `j`.
    pub fn kernel_column(&self, j: usize) -> Vec<Complex64> {
        let n = self.grid.n();
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        e[j % n] = Complex64::new(1.0, 0.0);
        let dx = self.grid.dx();
        self.apply_amplitudes(e).into_iter().map(|z| z / dx).collect()
    }

    pub fn kernel(&self, x: f64, x0: f64) -> KernelSample {
        let col = self.kernel_column(self.grid.index_of(x0));
        KernelSample {
            x,
            x0,
            t: self.t,
            value: col[self.grid.index_of(x)],
        }
    }
}

/// Smallest slice time for which the Fresnel phase is resolved out to `|d| = L/2`.
pub fn resolution_limit(grid: &SpatialGrid, m: f64) -> f64 {
    m * grid.length() * grid.length() / (2.0 * PI * grid.hbar() * grid.n() as f64)
}

/// Pointwise time-sliced kernel between the grid points nearest `x` and `x0`.
pub fn timesliced_kernel(
    grid: &SpatialGrid,
    x: f64,
    x0: f64,
    t: f64,
    slices: usize,
    potential: &PotentialSpec,
    m: f64,
) -> Result<Complex64> {
    Ok(TimeSlicedPropagator::new(*grid, t, slices, potential, m)?
        .kernel(x, x0)
        .value)
}

fn taper(r: f64, half_l: f64) -> f64 {
    let flat = half_l - TAPER_FRACTION * 2.0 * half_l;
    if r <= flat {
        return 1.0;
    }
    if r >= half_l {
        return 0.0;
    }
    let s = (r - flat) / (half_l - flat);
    let f = |u: f64| if u > 0.0 { (-1.0 / u).exp() } else { 0.0 };
    f(1.0 - s) / (f(1.0 - s) + f(s))
}

/// Precomputed phase factors for one symmetric split step.
#[derive(Debug, Clone)]
pub(crate) struct SplitPhases {
    /// `exp(−i U dt/(2ħ))` per grid point.
    pub(crate) potential_half: Vec<Complex64>,
    /// `exp(−i p² dt/(2mħ))/n` in FFT order.
    pub(crate) kinetic: Vec<Complex64>,
}

impl SplitPhases {
    pub(crate) fn new(grid: &SpatialGrid, u: &[f64], m: f64, dt: f64) -> Self {
        Self {
            potential_half: potential_phases(grid, u, dt / 2.0),
            kinetic: kinetic_multiplier(grid, m, dt),
        }
    }
}

pub(crate) fn potential_phases(grid: &SpatialGrid, u: &[f64], tau: f64) -> Vec<Complex64> {
    u.iter()
        .map(|v| Complex64::from_polar(1.0, -v * tau / grid.hbar()))
        .collect()
}

pub(crate) fn kinetic_multiplier(grid: &SpatialGrid, m: f64, tau: f64) -> Vec<Complex64> {
    let inv_n = 1.0 / grid.n() as f64;
    grid.fft_momenta()
        .into_iter()
        .map(|p| Complex64::from_polar(inv_n, -p * p * tau / (2.0 * m * grid.hbar())))
        .collect()
}

/// `ρ_ij ← v_i·ρ_ij·conj(v_j)`.
pub(crate) fn conjugate_diagonal(rho: &mut Array2<Complex64>, v: &[Complex64]) {
    for ((i, j), z) in rho.indexed_iter_mut() {
        *z *= v[i] * v[j].conj();
    }
}

/// Applies the circulant `F⁻¹ diag(k) F` along axis 0.
pub(crate) fn spectral_cols(a: &mut Array2<Complex64>, k: &[Complex64]) {
    fft::cols(a, Direction::Forward);
    for (mut row, f) in a.rows_mut().into_iter().zip(k) {
        row.mapv_inplace(|z| z * f);
    }
    fft::cols(a, Direction::Inverse);
}

/// Applies the circulant `F⁻¹ diag(k) F` along axis 1.
pub(crate) fn spectral_rows(a: &mut Array2<Complex64>, k: &[Complex64]) {
    fft::rows(a, Direction::Forward);
    for mut row in a.rows_mut() {
        row.iter_mut().zip(k).for_each(|(z, f)| *z *= f);
    }
    fft::rows(a, Direction::Inverse);
}

/// `ρ ← K ρ K†` for the free kinetic propagator `K`.
pub(crate) fn kinetic_conjugation(rho: &mut Array2<Complex64>, k: &[Complex64]) {
    spectral_cols(rho, k);
    let kc: Vec<Complex64> = k.iter().map(|z| z.conj()).collect();
    spectral_rows(rho, &kc);
}

/// One Strang step `V/2 · K · V/2` of the Schrödinger equation.
pub fn schrodinger_step(
    psi: &WaveFunction,
    dt: f64,
    potential: &PotentialSpec,
    m: f64,
) -> Result<WaveFunction> {
    check_positive("dt", dt)?;
    check_positive("m", m)?;
    let grid = *psi.grid();
    let u = potential.values(&grid, m)?;
    let phases = SplitPhases::new(&grid, &u, m, dt);
    let mut out = psi.clone();
    wave_step(out.amplitudes_mut(), &phases);
    Ok(out)
}

pub(crate) fn wave_step(a: &mut [Complex64], phases: &SplitPhases) {
    a.iter_mut()
        .zip(&phases.potential_half)
        .for_each(|(z, v)| *z *= v);
    fft::transform(a, Direction::Forward);
    a.iter_mut().zip(&phases.kinetic).for_each(|(z, k)| *z *= k);
    fft::transform(a, Direction::Inverse);
    a.iter_mut()
        .zip(&phases.potential_half)
        .for_each(|(z, v)| *z *= v);
}

/// One Strang step of the von Neumann equation, i.e. conjugation by the
/// one-step unitary of [`schrodinger_step`].
pub fn vonneumann_step(
    rho: &DensityMatrix,
    dt: f64,
    potential: &PotentialSpec,
    m: f64,
) -> Result<DensityMatrix> {
    check_positive("dt", dt)?;
    check_positive("m", m)?;
    if rho.repr != Representation::Position {
        return Err(Error::WrongRepresentation {
            expected: Representation::Position,
        });
    }
    let u = potential.values(&rho.grid, m)?;
    let phases = SplitPhases::new(&rho.grid, &u, m, dt);
    let mut out = rho.clone();
    density_step(&mut out.rho, &phases);
    Ok(out)
}

pub(crate) fn density_step(rho: &mut Array2<Complex64>, phases: &SplitPhases) {
    conjugate_diagonal(rho, &phases.potential_half);
    kinetic_conjugation(rho, &phases.kinetic);
    conjugate_diagonal(rho, &phases.potential_half);
}
