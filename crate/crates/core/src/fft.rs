//! Thin wrappers over rustfft for batched transforms along either axis.
//!
//! Transforms are unnormalized: `Forward` computes `Σ_j a_j e^{-2πi kj/n}` and
//! `Inverse` the same sum with `e^{+2πi kj/n}`.

use std::cell::RefCell;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Direction {
    Forward,
    Inverse,
}

fn plan(n: usize, dir: Direction) -> Arc<dyn Fft<f64>> {
    let dir = match dir {
        Direction::Forward => FftDirection::Forward,
        Direction::Inverse => FftDirection::Inverse,
    };
    PLANNER.with(|p| p.borrow_mut().plan_fft(n, dir))
}

pub(crate) fn transform(buf: &mut [Complex64], dir: Direction) {
    if buf.is_empty() {
        return;
    }
    plan(buf.len(), dir).process(buf);
}

/// Transforms every row of `a` (along axis 1).
pub(crate) fn rows(a: &mut Array2<Complex64>, dir: Direction) {
    let n = a.ncols();
    if n == 0 || a.nrows() == 0 {
        return;
    }
    let fft = plan(n, dir);
    match a.as_slice_mut() {
        Some(buf) => fft.process(buf),
        None => {
            let mut owned = a.as_standard_layout().into_owned();
            fft.process(owned.as_slice_mut().expect("standard layout"));
            a.assign(&owned);
        }
    }
}

/// Transforms every column of `a` (along axis 0).
pub(crate) fn cols(a: &mut Array2<Complex64>, dir: Direction) {
    let mut t = a.t().as_standard_layout().into_owned();
    rows(&mut t, dir);
    a.assign(&t.t());
}
