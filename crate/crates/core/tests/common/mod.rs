//! Reference formulas computed independently of the library's spectral paths.
#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64;
use rhodyn::SpatialGrid;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Free spreading of `exp(-(x-x0)²/(4σ²) + i p0 (x-x0))`, normalized, at time `t` (ħ = 1).
pub fn free_gaussian(x: f64, x0: f64, sigma: f64, p0: f64, m: f64, t: f64) -> Complex64 {
    let a = Complex64::new(1.0 / (4.0 * sigma * sigma), 0.0);
    let at = a / (1.0 + 2.0 * I * a * t / m);
    let norm = (2.0 * PI * sigma * sigma).powf(-0.25);
    let d = x - x0 - p0 * t / m;
    let phase = Complex64::from_polar(1.0, p0 * (x - x0) - p0 * p0 * t / (2.0 * m));
    norm * (at / a).sqrt() * (-at * d * d).exp() * phase
}

/// Width of a freely spreading Gaussian.
pub fn spread_sigma(sigma: f64, m: f64, t: f64) -> f64 {
    (sigma * sigma + (t / (2.0 * m * sigma)).powi(2)).sqrt()
}

/// Mehler kernel of `½mω²x²` (ħ = 1).
pub fn mehler(x: f64, x0: f64, t: f64, m: f64, omega: f64) -> Complex64 {
    let s = (omega * t).sin();
    let pref = (Complex64::new(m * omega, 0.0) / (2.0 * PI * s * I)).sqrt();
    pref * Complex64::from_polar(
        1.0,
        m * omega / (2.0 * s) * ((x * x + x0 * x0) * (omega * t).cos() - 2.0 * x * x0),
    )
}

/// `Σ_j K(x_i, x_j)·ψ_j·dx` summed over periodic images `x_j + wL`.
pub fn quadrature<K>(grid: &SpatialGrid, psi: &[Complex64], images: i64, kernel: K) -> Vec<Complex64>
where
    K: Fn(f64, f64) -> Complex64,
{
    let n = grid.n();
    let dx = grid.dx();
    let l = grid.length();
    (0..n)
        .map(|i| {
            let x = grid.x(i);
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, p) in psi.iter().enumerate() {
                for w in -images..=images {
                    acc += kernel(x, grid.x(j) + w as f64 * l) * p;
                }
            }
            acc * dx
        })
        .collect()
}

/// Gaussian probability of `[a, b]` for mean `mu`, std `s`.
pub fn gaussian_interval(mu: f64, s: f64, a: f64, b: f64) -> f64 {
    use statrs::function::erf::erf;
    let z = |x: f64| (x - mu) / (s * 2f64.sqrt());
    0.5 * (erf(z(b)) - erf(z(a)))
}

pub fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Direct `O(n²)` unitary DFT of a sampled wave function onto the centered lattice.
pub fn direct_momentum(grid: &SpatialGrid, psi: &[Complex64]) -> Vec<Complex64> {
    let dx = grid.dx();
    grid.momenta()
        .iter()
        .map(|&p| {
            psi.iter()
                .enumerate()
                .map(|(j, a)| a * Complex64::from_polar(1.0, -p * grid.x(j)))
                .sum::<Complex64>()
                * dx
                / (2.0 * PI).sqrt()
        })
        .collect()
}

pub fn print_line(id: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {id} [{}] {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}
