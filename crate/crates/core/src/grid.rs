//! Periodic 1D grids, wave functions, density matrices and the transforms
//! between position and momentum representations.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;
use ndarray::{Array2, Axis};
use num_complex::Complex64;

use crate::error::{check_finite, check_positive, Error, Result};
use crate::fft::{self, Direction};

/// Uniform periodic grid on `[x_min, x_max)` with its conjugate momentum lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    n: usize,
    x_min: f64,
    x_max: f64,
    hbar: f64,
}

impl SpatialGrid {
    pub fn new(n: usize, x_min: f64, x_max: f64) -> Result<Self> {
        Self::with_hbar(n, x_min, x_max, 1.0)
    }

    pub fn with_hbar(n: usize, x_min: f64, x_max: f64, hbar: f64) -> Result<Self> {
        if n < 8 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "n must be even and at least 8, got {n}"
            )));
        }
        if !(x_min.is_finite() && x_max.is_finite() && x_max > x_min) {
            return Err(Error::InvalidGrid(format!(
                "need finite x_min < x_max, got [{x_min}, {x_max})"
            )));
        }
        check_positive("hbar", hbar)?;
        Ok(Self {
            n,
            x_min,
            x_max,
            hbar,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn dx(&self) -> f64 {
        self.length() / self.n as f64
    }

    /// Momentum lattice spacing `2πħ/L`.
    pub fn dp(&self) -> f64 {
        2.0 * PI * self.hbar / self.length()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Momentum at centered index `i`, i.e. `(i - n/2)·dp`.
    pub fn p(&self, i: usize) -> f64 {
        (i as f64 - (self.n / 2) as f64) * self.dp()
    }

    /// Momenta in centered (ascending) order.
    pub fn momenta(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.p(i)).collect()
    }

    /// Momenta in FFT output order.
    pub fn fft_momenta(&self) -> Vec<f64> {
        let n = self.n as i64;
        (0..n)
            .map(|j| {
                let k = if j < n / 2 { j } else { j - n };
                k as f64 * self.dp()
            })
            .collect()
    }

    /// Minimal-image representative of a displacement, in `[-L/2, L/2]`.
    pub fn wrap(&self, d: f64) -> f64 {
        let l = self.length();
        d - l * (d / l).round()
    }

    /// Nearest grid index to `x`, with periodic wrapping.
    pub fn index_of(&self, x: f64) -> usize {
        let r = ((x - self.x_min) / self.dx()).round() as i64;
        r.rem_euclid(self.n as i64) as usize
    }

    /// Centered momentum index nearest to `p`, clamped to the lattice.
    pub fn momentum_index_of(&self, p: f64) -> usize {
        let r = (p / self.dp()).round() as i64 + (self.n / 2) as i64;
        r.clamp(0, self.n as i64 - 1) as usize
    }

    /// Prefactors `dx/√(2πħ)·e^{-i p x_min/ħ}` of the unitary transform, in FFT order.
    pub(crate) fn transform_phases(&self) -> Vec<Complex64> {
        let scale = self.dx() / (2.0 * PI * self.hbar).sqrt();
        self.fft_momenta()
            .into_iter()
            .map(|p| Complex64::from_polar(scale, -p * self.x_min / self.hbar))
            .collect()
    }

    pub(crate) fn check_same(&self, other: &SpatialGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "grids differ: {self:?} vs {other:?}"
            )))
        }
    }
}

/// Centered index to FFT index and back; a shift by `n/2` is an involution for even `n`.
pub(crate) fn shift(i: usize, n: usize) -> usize {
    (i + n / 2) % n
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    grid: SpatialGrid,
    amp: Vec<Complex64>,
}

impl WaveFunction {
    pub fn new(grid: SpatialGrid, amp: Vec<Complex64>) -> Result<Self> {
        if amp.len() != grid.n() {
            return Err(Error::ShapeMismatch(format!(
                "{} amplitudes for {} grid points",
                amp.len(),
                grid.n()
            )));
        }
        Ok(Self { grid, amp })
    }

    /// Normalized Gaussian `exp(-(x-x0)²/(4σ²) + i p0 (x-x0)/ħ)` using minimal-image distance.
    pub fn gaussian(grid: SpatialGrid, x0: f64, sigma: f64, p0: f64) -> Result<Self> {
        check_positive("sigma", sigma)?;
        check_finite("x0", x0)?;
        check_finite("p0", p0)?;
        let amp = (0..grid.n())
            .map(|i| {
                let d = grid.wrap(grid.x(i) - x0);
                Complex64::from_polar(
                    (-d * d / (4.0 * sigma * sigma)).exp(),
                    p0 * d / grid.hbar(),
                )
            })
            .collect();
        Self { grid, amp }.normalized()
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amp
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amp
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amp
    }

    /// `Σ|ψ_i|²·dx`.
    pub fn norm_sqr(&self) -> f64 {
        self.amp.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let nrm = self.norm_sqr();
        if !(nrm.is_finite() && nrm > 0.0) {
            return Err(Error::DegenerateState);
        }
        let s = nrm.sqrt().recip();
        self.amp.iter_mut().for_each(|a| *a *= s);
        Ok(self)
    }

    /// Momentum-space amplitudes in centered order, normalized against `dp`.
    pub fn momentum_amplitudes(&self) -> Vec<Complex64> {
        let n = self.grid.n();
        let mut buf = self.amp.clone();
        fft::transform(&mut buf, Direction::Forward);
        let c = self.grid.transform_phases();
        (0..n)
            .map(|i| {
                let j = shift(i, n);
                c[j] * buf[j]
            })
            .collect()
    }

    pub fn probability(&self) -> Vec<f64> {
        self.amp.iter().map(|a| a.norm_sqr()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Representation {
    Position,
    Momentum,
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Representation::Position => f.write_str("position"),
            Representation::Momentum => f.write_str("momentum"),
        }
    }
}

/// Dense density matrix on a grid. In the momentum representation the indices
/// run over the centered momentum lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub(crate) grid: SpatialGrid,
    pub(crate) rho: Array2<Complex64>,
    pub(crate) repr: Representation,
}

impl DensityMatrix {
    pub fn new(grid: SpatialGrid, rho: Array2<Complex64>, repr: Representation) -> Result<Self> {
        let n = grid.n();
        if rho.dim() != (n, n) {
            return Err(Error::ShapeMismatch(format!(
                "matrix {:?} on a {n}-point grid",
                rho.dim()
            )));
        }
        Ok(Self {
            grid,
            rho: rho.as_standard_layout().into_owned(),
            repr,
        })
    }

    /// Incoherent mixture `Σ w_k |ψ_k⟩⟨ψ_k|` normalized to unit trace.
    pub fn mixture(states: &[(f64, WaveFunction)]) -> Result<Self> {
        let Some((_, first)) = states.first() else {
            return Err(Error::DegenerateState);
        };
        let grid = *first.grid();
        let mut rho = Array2::<Complex64>::zeros((grid.n(), grid.n()));
        for (w, psi) in states {
            grid.check_same(psi.grid())?;
            if !(w.is_finite() && *w >= 0.0) {
                return Err(Error::InvalidParameter {
                    name: "weight",
                    reason: format!("must be nonnegative, got {w}"),
                });
            }
            let psi = psi.clone().normalized()?;
            let a = psi.amplitudes();
            for i in 0..grid.n() {
                for j in 0..grid.n() {
                    rho[[i, j]] += *w * a[i] * a[j].conj();
                }
            }
        }
        let mut out = Self {
            grid,
            rho,
            repr: Representation::Position,
        };
        out.normalize_in_place()?;
        Ok(out)
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.rho
    }

    pub fn into_matrix(self) -> Array2<Complex64> {
        self.rho
    }

    pub fn representation(&self) -> Representation {
        self.repr
    }

    /// Integration weight of one lattice cell: `dx` in position, `dp` in momentum.
    pub fn measure(&self) -> f64 {
        match self.repr {
            Representation::Position => self.grid.dx(),
            Representation::Momentum => self.grid.dp(),
        }
    }

    /// Real part of the diagonal.
    pub fn diagonal(&self) -> Vec<f64> {
        self.rho.diag().iter().map(|z| z.re).collect()
    }

    pub fn trace(&self) -> f64 {
        self.rho.diag().iter().map(|z| z.re).sum::<f64>() * self.measure()
    }

    /// `Σ_ij |ρ_ij|²·h²` with `h` the cell measure.
    pub fn purity(&self) -> f64 {
        let h = self.measure();
        self.rho.iter().map(|z| z.norm_sqr()).sum::<f64>() * h * h
    }

    /// `max |ρ_ij − conj(ρ_ji)|`.
    pub fn hermiticity_residual(&self) -> f64 {
        let n = self.grid.n();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.rho[[i, j]] - self.rho[[j, i]].conj()).norm());
            }
        }
        worst
    }

    /// Eigenvalues of the operator (matrix scaled by the cell measure), ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let n = self.grid.n();
        let h = self.measure();
        let m = DMatrix::from_fn(n, n, |i, j| {
            (self.rho[[i, j]] + self.rho[[j, i]].conj()) * (0.5 * h)
        });
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub(crate) fn scale(&mut self, s: f64) {
        self.rho.mapv_inplace(|z| z * s);
    }

    /// Divides by the trace, returning the trace found beforehand.
    pub(crate) fn normalize_in_place(&mut self) -> Result<f64> {
        let tr = self.trace();
        if !(tr.is_finite() && tr > 0.0) || self.rho.iter().any(|z| !z.is_finite()) {
            return Err(Error::Annihilated);
        }
        self.scale(tr.recip());
        Ok(tr)
    }

    /// Diagonal probability summed over the given grid indices.
    pub fn mass_on(&self, indices: impl IntoIterator<Item = usize>) -> f64 {
        indices
            .into_iter()
            .map(|i| self.rho[[i, i]].re)
            .sum::<f64>()
            * self.measure()
    }
}

/// Outer product `ψ(x)·conj(ψ(y))` of the normalized input.
pub fn pure_density(psi: &WaveFunction) -> Result<DensityMatrix> {
    let psi = psi.clone().normalized()?;
    let a = psi.amplitudes();
    let n = a.len();
    let rho = Array2::from_shape_fn((n, n), |(i, j)| a[i] * a[j].conj());
    Ok(DensityMatrix {
        grid: *psi.grid(),
        rho,
        repr: Representation::Position,
    })
}

/// Which particle of a two-particle state to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Particle {
    First,
    Second,
}

/// Two-particle amplitude `Ψ(x₁, x₂)`, with `amp[[i, j]] ≈ Ψ(x₁_i, x₂_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoParticleState {
    pub(crate) grid1: SpatialGrid,
    pub(crate) grid2: SpatialGrid,
    pub(crate) amp: Array2<Complex64>,
    pub(crate) m1: f64,
    pub(crate) m2: f64,
}

impl TwoParticleState {
    pub fn new(
        grid1: SpatialGrid,
        grid2: SpatialGrid,
        amp: Array2<Complex64>,
        m1: f64,
        m2: f64,
    ) -> Result<Self> {
        check_positive("m1", m1)?;
        check_positive("m2", m2)?;
        if grid1.hbar() != grid2.hbar() {
            return Err(Error::ShapeMismatch("grids use different hbar".into()));
        }
        if amp.dim() != (grid1.n(), grid2.n()) {
            return Err(Error::ShapeMismatch(format!(
                "amplitude {:?} for grids of {} and {} points",
                amp.dim(),
                grid1.n(),
                grid2.n()
            )));
        }
        Ok(Self {
            grid1,
            grid2,
            amp: amp.as_standard_layout().into_owned(),
            m1,
            m2,
        })
    }

    pub fn product(psi1: &WaveFunction, psi2: &WaveFunction, m1: f64, m2: f64) -> Result<Self> {
        let a = psi1.amplitudes();
        let b = psi2.amplitudes();
        let amp = Array2::from_shape_fn((a.len(), b.len()), |(i, j)| a[i] * b[j]);
        Self::new(*psi1.grid(), *psi2.grid(), amp, m1, m2)?.normalized()
    }

    pub fn grid1(&self) -> &SpatialGrid {
        &self.grid1
    }

    pub fn grid2(&self) -> &SpatialGrid {
        &self.grid2
    }

    pub fn amplitudes(&self) -> &Array2<Complex64> {
        &self.amp
    }

    pub fn masses(&self) -> (f64, f64) {
        (self.m1, self.m2)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amp.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid1.dx() * self.grid2.dx()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let nrm = self.norm_sqr();
        if !(nrm.is_finite() && nrm > 0.0) {
            return Err(Error::DegenerateState);
        }
        let s = nrm.sqrt().recip();
        self.amp.mapv_inplace(|z| z * s);
        Ok(self)
    }

    /// Position marginal of one particle.
    pub fn marginal(&self, which: Particle) -> Vec<f64> {
        let (axis, h) = match which {
            Particle::First => (Axis(1), self.grid2.dx()),
            Particle::Second => (Axis(0), self.grid1.dx()),
        };
        self.amp
            .map(|z| z.norm_sqr())
            .sum_axis(axis)
            .iter()
            .map(|s| s * h)
            .collect()
    }
}

/// Reduced density matrix of the kept particle, `ρ(x,y) = Σ_q Ψ(x,q)·conj(Ψ(y,q))·dq`.
pub fn partial_trace(state: &TwoParticleState, keep: Particle) -> Result<DensityMatrix> {
    let (n1, n2) = state.amp.dim();
    if (n1, n2) != (state.grid1.n(), state.grid2.n()) {
        return Err(Error::ShapeMismatch(
            "amplitude array does not match its grids".into(),
        ));
    }
    let (a, grid, dq) = match keep {
        Particle::First => (state.amp.view(), state.grid1, state.grid2.dx()),
        Particle::Second => (state.amp.t(), state.grid2, state.grid1.dx()),
    };
    let conj = a.mapv(|z| z.conj());
    let mut rho = a.dot(&conj.t());
    rho.mapv_inplace(|z| z * dq);
    Ok(DensityMatrix {
        grid,
        rho,
        repr: Representation::Position,
    })
}

/// Position to momentum representation via the unitary DFT on the first index
/// and its conjugate on the second.
pub fn to_momentum(rho: &DensityMatrix) -> Result<DensityMatrix> {
    if rho.repr != Representation::Position {
        return Err(Error::WrongRepresentation {
            expected: Representation::Position,
        });
    }
    let n = rho.grid.n();
    let mut a = rho.rho.clone();
    fft::cols(&mut a, Direction::Forward);
    fft::rows(&mut a, Direction::Inverse);
    let c = rho.grid.transform_phases();
    let out = Array2::from_shape_fn((n, n), |(i, l)| {
        let (j, k) = (shift(i, n), shift(l, n));
        c[j] * c[k].conj() * a[[j, k]]
    });
    Ok(DensityMatrix {
        grid: rho.grid,
        rho: out,
        repr: Representation::Momentum,
    })
}

/// Inverse of [`to_momentum`].
pub fn to_position(rho: &DensityMatrix) -> Result<DensityMatrix> {
    if rho.repr != Representation::Momentum {
        return Err(Error::WrongRepresentation {
            expected: Representation::Momentum,
        });
    }
    let n = rho.grid.n();
    let c = rho.grid.transform_phases();
    let inv_n2 = 1.0 / (n as f64 * n as f64);
    let mut a = Array2::from_shape_fn((n, n), |(j, k)| {
        let (i, l) = (shift(j, n), shift(k, n));
        rho.rho[[i, l]] / (c[j] * c[k].conj()) * inv_n2
    });
    fft::cols(&mut a, Direction::Inverse);
    fft::rows(&mut a, Direction::Forward);
    Ok(DensityMatrix {
        grid: rho.grid,
        rho: a,
        repr: Representation::Position,
    })
}

/// Scalar summary of a state. `t`, `trace_pre_norm` and `continuity_residual_max`
/// are filled by the integrator; [`diagnostics`] sets `trace_pre_norm` to the trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub trace_pre_norm: f64,
    pub purity: f64,
    pub hermiticity_residual: f64,
    pub min_eig: Option<f64>,
    pub mean_x: f64,
    pub mean_p: f64,
    pub var_x: f64,
    pub continuity_residual_max: Option<f64>,
}

/// All diagnostics including the minimum eigenvalue.
pub fn diagnostics(rho: &DensityMatrix) -> DiagnosticsRecord {
    let mut rec = quick_diagnostics(rho);
    rec.min_eig = Some(rho.min_eigenvalue());
    rec
}

/// Diagnostics without the `O(n³)` eigenvalue computation.
pub(crate) fn quick_diagnostics(rho: &DensityMatrix) -> DiagnosticsRecord {
    let (pos, mom) = match rho.repr {
        Representation::Position => (None, to_momentum(rho).ok()),
        Representation::Momentum => (to_position(rho).ok(), None),
    };
    let pos = pos.as_ref().unwrap_or(rho);
    let mom = mom.as_ref().unwrap_or(rho);
    let tr = rho.trace();
    let (mean_x, var_x) = moments(&pos.diagonal(), &pos.grid.points(), pos.measure());
    let (mean_p, _) = moments(&mom.diagonal(), &mom.grid.momenta(), mom.measure());
    DiagnosticsRecord {
        t: 0.0,
        trace_pre_norm: tr,
        purity: rho.purity(),
        hermiticity_residual: rho.hermiticity_residual(),
        min_eig: None,
        mean_x,
        mean_p,
        var_x,
        continuity_residual_max: None,
    }
}

fn moments(weights: &[f64], coords: &[f64], h: f64) -> (f64, f64) {
    let total: f64 = weights.iter().sum::<f64>() * h;
    if total == 0.0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = weights.iter().zip(coords).map(|(w, x)| w * x).sum::<f64>() * h / total;
    let var = weights
        .iter()
        .zip(coords)
        .map(|(w, x)| w * (x - mean) * (x - mean))
        .sum::<f64>()
        * h
        / total;
    (mean, var)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> SpatialGrid {
        SpatialGrid::new(16, -4.0, 4.0).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(SpatialGrid::new(6, 0.0, 1.0).is_err());
        assert!(SpatialGrid::new(9, 0.0, 1.0).is_err());
        assert!(SpatialGrid::new(8, 1.0, 1.0).is_err());
        assert!(SpatialGrid::new(8, 0.0, f64::NAN).is_err());
        assert!(SpatialGrid::with_hbar(8, 0.0, 1.0, 0.0).is_err());
        assert!(SpatialGrid::new(8, 0.0, 1.0).is_ok());
    }

    #[test]
    fn lattice_geometry() {
        let g = grid();
        assert_eq!(g.dx(), 0.5);
        assert_eq!(g.x(0), -4.0);
        assert_eq!(g.p(8), 0.0);
        assert!((g.p(0) + 8.0 * g.dp()).abs() <= 1e-15);
        assert_eq!(g.fft_momenta()[1], g.dp());
        assert_eq!(g.fft_momenta()[15], -g.dp());
        assert_eq!(g.index_of(3.9), 0);
        assert_eq!(g.index_of(-4.2), 0);
        assert_eq!(g.momentum_index_of(1e9), 15);
        assert_eq!(g.momentum_index_of(-1e9), 0);
        assert!((g.wrap(7.0) + 1.0).abs() <= 1e-15);
    }

    #[test]
    fn shift_is_an_involution() {
        for i in 0..16 {
            assert_eq!(shift(shift(i, 16), 16), i);
        }
    }

    #[test]
    fn wave_function_errors() {
        let g = grid();
        assert!(matches!(WaveFunction::new(g, vec![Complex64::new(1.0, 0.0); 3]), Err(Error::ShapeMismatch(_))));
        let zero = WaveFunction::new(g, vec![Complex64::new(0.0, 0.0); 16]).unwrap();
        assert_eq!(zero.normalized(), Err(Error::DegenerateState));
        assert!(WaveFunction::gaussian(g, 0.0, 0.0, 0.0).is_err());
        assert!(WaveFunction::gaussian(g, f64::NAN, 1.0, 0.0).is_err());
    }

    #[test]
    fn density_matrix_errors() {
        let g = grid();
        assert!(DensityMatrix::new(g, Array2::zeros((3, 3)), Representation::Position).is_err());
        assert_eq!(DensityMatrix::mixture(&[]), Err(Error::DegenerateState));
        let psi = WaveFunction::gaussian(g, 0.0, 1.0, 0.0).unwrap();
        assert!(DensityMatrix::mixture(&[(-1.0, psi.clone())]).is_err());
        let other = WaveFunction::gaussian(SpatialGrid::new(16, -5.0, 5.0).unwrap(), 0.0, 1.0, 0.0).unwrap();
        assert!(DensityMatrix::mixture(&[(1.0, psi), (1.0, other)]).is_err());
        let zero = DensityMatrix::new(g, Array2::zeros((16, 16)), Representation::Position).unwrap();
        assert_eq!(zero.clone().normalize_in_place(), Err(Error::Annihilated));
    }

    #[test]
    fn representation_checks() {
        let g = grid();
        let rho = pure_density(&WaveFunction::gaussian(g, 0.0, 1.0, 0.0).unwrap()).unwrap();
        assert!(to_position(&rho).is_err());
        let m = to_momentum(&rho).unwrap();
        assert!(to_momentum(&m).is_err());
        assert_eq!(m.measure(), g.dp());
        assert_eq!(Representation::Momentum.to_string(), "momentum");
    }

    #[test]
    fn two_particle_errors() {
        let g = grid();
        assert!(TwoParticleState::new(g, g, Array2::zeros((16, 16)), 0.0, 1.0).is_err());
        assert!(TwoParticleState::new(g, g, Array2::zeros((16, 8)), 1.0, 1.0).is_err());
        let h = SpatialGrid::with_hbar(16, -4.0, 4.0, 2.0).unwrap();
        assert!(TwoParticleState::new(g, h, Array2::zeros((16, 16)), 1.0, 1.0).is_err());
        let zero = TwoParticleState::new(g, g, Array2::zeros((16, 16)), 1.0, 1.0).unwrap();
        assert_eq!(zero.normalized(), Err(Error::DegenerateState));
    }

    #[test]
    fn moments_of_empty_weights_are_undefined() {
        let (m, v) = moments(&[0.0, 0.0], &[1.0, 2.0], 1.0);
        assert!(m.is_nan() && v.is_nan());
        let (m, v) = moments(&[1.0, 1.0], &[1.0, 3.0], 1.0);
        assert_eq!((m, v), (2.0, 1.0));
    }

    #[test]
    fn quick_diagnostics_skip_eigenvalues() {
        let g = grid();
        let rho = pure_density(&WaveFunction::gaussian(g, 0.5, 1.0, 0.0).unwrap()).unwrap();
        assert_eq!(quick_diagnostics(&rho).min_eig, None);
        let full = diagnostics(&rho);
        assert!((full.min_eig.unwrap()).abs() <= 1e-12);
        let mom = diagnostics(&to_momentum(&rho).unwrap());
        assert!((mom.mean_x - full.mean_x).abs() <= 1e-10);
    }
}
