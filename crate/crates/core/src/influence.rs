//! Environment rate models `Λ(x,y,t)` driving the gain term of the reduced dynamics.

use ndarray::Array2;

use crate::error::{check_finite, check_positive, Error, Result};
use crate::grid::{DensityMatrix, Representation, SpatialGrid};

/// Relative slack on indicator edges so that widths that are whole multiples of
/// `dx` select exactly `width/dx` points despite rounding.
const EDGE_SLACK: f64 = 1e-9;

/// One detector element: indicator of `[center − width/2, center + width/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorElement {
    pub center: f64,
    pub width: f64,
    pub gain: f64,
    pub fired: bool,
    pub t_r: Option<f64>,
}

impl DetectorElement {
    pub fn new(center: f64, width: f64, gain: f64) -> Self {
        Self {
            center,
            width,
            gain,
            fired: false,
            t_r: None,
        }
    }

    /// Grid indices covered by the element.
    pub fn indices(&self, grid: &SpatialGrid) -> Vec<usize> {
        window_indices(grid, self.center, self.width)
    }
}

/// Grid indices `i` with `−w/2 ≤ wrap(x_i − c) < w/2`.
pub fn window_indices(grid: &SpatialGrid, center: f64, width: f64) -> Vec<usize> {
    let tol = EDGE_SLACK * grid.dx();
    (0..grid.n())
        .filter(|&i| {
            let d = grid.wrap(grid.x(i) - center);
            d >= -width / 2.0 - tol && d < width / 2.0 - tol
        })
        .collect()
}

/// Indicator vector of a position window.
pub fn window_indicator(grid: &SpatialGrid, center: f64, width: f64) -> Vec<f64> {
    let mut b = vec![0.0; grid.n()];
    for i in window_indices(grid, center, width) {
        b[i] = 1.0;
    }
    b
}

/// Indicator over the centered momentum lattice of `|p − center| ≤ half_width`.
pub fn band_indicator(grid: &SpatialGrid, center: f64, half_width: f64) -> Vec<f64> {
    let tol = EDGE_SLACK * grid.dp();
    grid.momenta()
        .iter()
        .map(|p| {
            if (p - center).abs() <= half_width + tol {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectorArray {
    pub elements: Vec<DetectorElement>,
    /// Rate applied to every unfired element; zero disables it.
    pub background_rate: f64,
}

impl DetectorArray {
    pub fn new(elements: Vec<DetectorElement>) -> Self {
        Self {
            elements,
            background_rate: 0.0,
        }
    }

    /// Equal-width, equal-gain elements at the given centers.
    pub fn uniform(centers: &[f64], width: f64, gain: f64) -> Self {
        Self::new(
            centers
                .iter()
                .map(|&c| DetectorElement::new(c, width, gain))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Index of the fired element, if any.
    pub fn fired(&self) -> Option<usize> {
        self.elements.iter().position(|e| e.fired)
    }

    pub fn validate(&self, grid: &SpatialGrid) -> Result<()> {
        if !(self.background_rate.is_finite() && self.background_rate >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "background_rate",
                reason: format!("must be nonnegative, got {}", self.background_rate),
            });
        }
        let mut owner: Vec<Option<usize>> = vec![None; grid.n()];
        for (k, e) in self.elements.iter().enumerate() {
            check_finite("center", e.center)?;
            if !(e.width.is_finite() && e.width >= 2.0 * grid.dx() * (1.0 - EDGE_SLACK)) {
                return Err(Error::InvalidParameter {
                    name: "width",
                    reason: format!(
                        "element {k} width {} is below 2·dx = {}",
                        e.width,
                        2.0 * grid.dx()
                    ),
                });
            }
            if !(e.gain.is_finite() && e.gain >= 0.0) {
                return Err(Error::InvalidParameter {
                    name: "gain",
                    reason: format!("element {k} gain must be nonnegative, got {}", e.gain),
                });
            }
            if e.fired && e.t_r.is_none() {
                return Err(Error::MissingFiringTime(k));
            }
            for i in e.indices(grid) {
                if let Some(other) = owner[i] {
                    return Err(Error::OverlappingElements(other, k));
                }
                owner[i] = Some(k);
            }
        }
        Ok(())
    }

    /// Diagonal probability inside each element.
    pub fn element_masses(&self, rho: &DensityMatrix) -> Result<Vec<f64>> {
        if rho.representation() != Representation::Position {
            return Err(Error::WrongRepresentation {
                expected: Representation::Position,
            });
        }
        Ok(self
            .elements
            .iter()
            .map(|e| rho.mass_on(e.indices(rho.grid())))
            .collect())
    }

    fn rate(&self, grid: &SpatialGrid, t: f64) -> Result<Option<Array2<f64>>> {
        self.validate(grid)?;
        let n = grid.n();
        let mut lam: Option<Array2<f64>> = None;
        for e in &self.elements {
            let g = match (e.fired, e.t_r) {
                (true, Some(tr)) if t >= tr => e.gain,
                (true, _) => continue,
                (false, _) => self.background_rate,
            };
            if g == 0.0 {
                continue;
            }
            let idx = e.indices(grid);
            let l = lam.get_or_insert_with(|| Array2::zeros((n, n)));
            for &i in &idx {
                for &j in &idx {
                    l[[i, j]] += g;
                }
            }
        }
        Ok(lam)
    }
}

/// Marks element `k` as fired at `t_r`.
pub fn fire_element(array: &DetectorArray, k: usize, t_r: f64) -> Result<DetectorArray> {
    if k >= array.len() {
        return Err(Error::NoSuchElement(k));
    }
    if let Some(j) = array.fired() {
        return Err(Error::AlreadyFired(j));
    }
    check_finite("t_r", t_r)?;
    let mut out = array.clone();
    out.elements[k].fired = true;
    out.elements[k].t_r = Some(t_r);
    Ok(out)
}

/// Position of S implied by a registration of R at `x2m` after a two-body
/// breakup at `x0` with opposite momenta.
pub fn epr_target_position(x0: f64, m1: f64, m2: f64, x2m: f64) -> f64 {
    x0 - (m2 / m1) * (x2m - x0)
}

/// Gain localizing S at the position implied by an R registration at `x2m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EprPositionGain {
    pub x0: f64,
    pub m1: f64,
    pub m2: f64,
    pub x2m: f64,
    pub t_r: f64,
    /// Time of the breakup.
    pub t_collision: f64,
    pub gain: f64,
    pub width: f64,
}

impl EprPositionGain {
    pub fn target(&self) -> f64 {
        epr_target_position(self.x0, self.m1, self.m2, self.x2m)
    }

    pub fn validate(&self, grid: &SpatialGrid) -> Result<()> {
        check_positive("m1", self.m1)?;
        check_positive("m2", self.m2)?;
        check_finite("x0", self.x0)?;
        check_finite("x2m", self.x2m)?;
        check_finite("t_r", self.t_r)?;
        check_finite("t_collision", self.t_collision)?;
        if !(self.gain.is_finite() && self.gain >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "gain",
                reason: format!("must be nonnegative, got {}", self.gain),
            });
        }
        if !(self.width.is_finite() && self.width >= 2.0 * grid.dx() * (1.0 - EDGE_SLACK)) {
            return Err(Error::InvalidParameter {
                name: "width",
                reason: format!("{} is below 2·dx = {}", self.width, 2.0 * grid.dx()),
            });
        }
        Ok(())
    }
}

/// Gain concentrating S on momenta `−p2m ± band`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EprMomentumGain {
    pub p2m: f64,
    pub band: f64,
    pub t_r: f64,
    pub gain: f64,
}

impl EprMomentumGain {
    pub fn validate(&self, grid: &SpatialGrid) -> Result<()> {
        check_finite("p2m", self.p2m)?;
        check_finite("t_r", self.t_r)?;
        if !(self.gain.is_finite() && self.gain >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "gain",
                reason: format!("must be nonnegative, got {}", self.gain),
            });
        }
        if !(self.band.is_finite() && self.band >= grid.dp() * (1.0 - EDGE_SLACK)) {
            return Err(Error::InvalidParameter {
                name: "band",
                reason: format!("{} is below one lattice spacing {}", self.band, grid.dp()),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum InfluenceModel {
    #[default]
    Zero,
    Detector(DetectorArray),
    EprPosition(EprPositionGain),
    EprMomentum(EprMomentumGain),
}

/// Rate field at one instant. `Momentum` is indexed by the centered momentum lattice.
#[derive(Debug, Clone, PartialEq)]
pub enum RateField {
    Zero,
    Position(Array2<f64>),
    Momentum(Array2<f64>),
}

impl RateField {
    pub fn is_zero(&self) -> bool {
        matches!(self, RateField::Zero)
    }

    pub fn values(&self) -> Option<&Array2<f64>> {
        match self {
            RateField::Zero => None,
            RateField::Position(a) | RateField::Momentum(a) => Some(a),
        }
    }
}

fn outer(g: f64, b: &[f64]) -> Array2<f64> {
    let n = b.len();
    Array2::from_shape_fn((n, n), |(i, j)| g * b[i] * b[j])
}

impl InfluenceModel {
    pub fn rate(&self, grid: &SpatialGrid, t: f64) -> Result<RateField> {
        match self {
            InfluenceModel::Zero => Ok(RateField::Zero),
            InfluenceModel::Detector(d) => Ok(match d.rate(grid, t)? {
                Some(l) => RateField::Position(l),
                None => RateField::Zero,
            }),
            InfluenceModel::EprPosition(e) => {
                e.validate(grid)?;
                if t < e.t_r || e.gain == 0.0 {
                    return Ok(RateField::Zero);
                }
                let b = window_indicator(grid, e.target(), e.width);
                Ok(RateField::Position(outer(e.gain, &b)))
            }
            InfluenceModel::EprMomentum(e) => {
                e.validate(grid)?;
                if t < e.t_r || e.gain == 0.0 {
                    return Ok(RateField::Zero);
                }
                let b = band_indicator(grid, -e.p2m, e.band);
                Ok(RateField::Momentum(outer(e.gain, &b)))
            }
        }
    }
}

/// Free-function form of [`InfluenceModel::rate`].
pub fn rate(model: &InfluenceModel, grid: &SpatialGrid, t: f64) -> Result<RateField> {
    model.rate(grid, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> SpatialGrid {
        SpatialGrid::new(32, -8.0, 8.0).unwrap()
    }

    #[test]
    fn whole_multiple_widths_select_width_over_dx_points() {
        let g = grid();
        for (c, w) in [(0.0, 1.0), (0.25, 1.5), (-3.0, 2.0), (7.5, 1.0)] {
            let expected = (w / g.dx()).round() as usize;
            assert_eq!(window_indices(&g, c, w).len(), expected, "c = {c}, w = {w}");
        }
    }

    #[test]
    fn windows_wrap_around_the_boundary() {
        let g = grid();
        let idx = window_indices(&g, -8.0, 2.0);
        assert_eq!(idx, vec![0, 1, 30, 31]);
    }

    #[test]
    fn indicators_are_zero_one() {
        let g = grid();
        let b = window_indicator(&g, 1.0, 2.0);
        assert_eq!(b.iter().sum::<f64>(), 4.0);
        let p = band_indicator(&g, 0.0, g.dp());
        assert_eq!(p.iter().sum::<f64>(), 3.0);
    }

    #[test]
    fn empty_array() {
        let a = DetectorArray::default();
        assert!(a.is_empty());
        assert_eq!(a.fired(), None);
        assert_eq!(
            InfluenceModel::Detector(a).rate(&grid(), 0.0).unwrap(),
            RateField::Zero
        );
    }

    #[test]
    fn masses_need_position_representation() {
        let g = grid();
        let psi = crate::grid::WaveFunction::gaussian(g, 0.0, 1.0, 0.0).unwrap();
        let rho = crate::grid::to_momentum(&crate::grid::pure_density(&psi).unwrap()).unwrap();
        assert!(DetectorArray::uniform(&[0.0], 1.0, 1.0).element_masses(&rho).is_err());
    }

    #[test]
    fn zero_gain_fired_element_gives_zero_field() {
        let a = fire_element(&DetectorArray::uniform(&[0.0], 1.0, 0.0), 0, 0.0).unwrap();
        assert!(InfluenceModel::Detector(a).rate(&grid(), 1.0).unwrap().is_zero());
        assert!(rate(&InfluenceModel::Zero, &grid(), 0.0).unwrap().values().is_none());
    }

    #[test]
    fn epr_validation() {
        let g = grid();
        let e = EprPositionGain {
            x0: 0.0,
            m1: 1.0,
            m2: 1.0,
            x2m: 1.0,
            t_r: 0.0,
            t_collision: 0.0,
            gain: 1.0,
            width: 1.0,
        };
        assert!(e.validate(&g).is_ok());
        assert!(EprPositionGain { m1: 0.0, ..e }.validate(&g).is_err());
        assert!(EprPositionGain { gain: -1.0, ..e }.validate(&g).is_err());
        assert!(EprPositionGain { x2m: f64::NAN, ..e }.validate(&g).is_err());
        let m = EprMomentumGain { p2m: 1.0, band: 1.0, t_r: 0.0, gain: 1.0 };
        assert!(m.validate(&g).is_ok());
        assert!(EprMomentumGain { gain: f64::INFINITY, ..m }.validate(&g).is_err());
    }
}
