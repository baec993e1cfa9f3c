use ndarray::Array2;
use proptest::prelude::*;
use rhodyn::influence::{
    epr_target_position, fire_element, window_indices, EprMomentumGain, EprPositionGain, RateField,
};
use rhodyn::{DetectorArray, DetectorElement, Error, InfluenceModel, SpatialGrid};

fn grid() -> SpatialGrid {
    SpatialGrid::new(64, -8.0, 8.0).unwrap()
}

fn position_field(model: &InfluenceModel, g: &SpatialGrid, t: f64) -> Array2<f64> {
    match model.rate(g, t).unwrap() {
        RateField::Position(a) => a,
        RateField::Zero => Array2::zeros((g.n(), g.n())),
        RateField::Momentum(_) => panic!("expected a position field"),
    }
}

fn fire_all(array: &DetectorArray, t_r: f64) -> DetectorArray {
    let mut out = array.clone();
    for e in &mut out.elements {
        e.fired = true;
        e.t_r = Some(t_r);
    }
    out
}

#[test]
fn zero_model_has_no_rate() {
    assert!(InfluenceModel::Zero.rate(&grid(), 3.0).unwrap().is_zero());
    let unfired = InfluenceModel::Detector(DetectorArray::uniform(&[-2.0, 2.0], 1.0, 5.0));
    assert!(unfired.rate(&grid(), 3.0).unwrap().is_zero());
}

#[test]
fn fired_element_covers_its_square() {
    let g = grid();
    let array = DetectorArray::uniform(&[-4.0, -1.0, 2.0, 5.0], 1.0, 7.0);
    let model = InfluenceModel::Detector(fire_element(&array, 2, 0.0).unwrap());
    let lam = position_field(&model, &g, 1.0);
    let idx = window_indices(&g, 2.0, 1.0);
    assert_eq!(idx.len(), 4);
    for i in 0..g.n() {
        for j in 0..g.n() {
            let inside = idx.contains(&i) && idx.contains(&j);
            assert_eq!(lam[[i, j]], if inside { 7.0 } else { 0.0 });
        }
    }
}

#[test]
fn firing_time_gates_the_rate() {
    let g = grid();
    let array = DetectorArray::uniform(&[-6.0, -3.0, 0.0, 3.0, 6.0], 1.0, 2.0);
    let model = InfluenceModel::Detector(fire_element(&array, 3, 0.5).unwrap());
    for t in [0.0, 0.25, 0.4999] {
        assert!(model.rate(&g, t).unwrap().is_zero());
    }
    let idx = window_indices(&g, 3.0, 1.0);
    for t in [0.5, 0.75, 10.0] {
        let lam = position_field(&model, &g, t);
        assert_eq!(lam.sum(), 2.0 * (idx.len() * idx.len()) as f64);
        assert_eq!(lam[[idx[0], idx[idx.len() - 1]]], 2.0);
    }
}

#[test]
fn single_element_array_fires_onto_one_square() {
    let g = grid();
    let array = DetectorArray::uniform(&[0.0], 2.0, 1.0);
    let model = InfluenceModel::Detector(fire_element(&array, 0, 0.0).unwrap());
    let lam = position_field(&model, &g, 0.0);
    let idx = window_indices(&g, 0.0, 2.0);
    let support = lam.iter().filter(|v| **v > 0.0).count();
    assert_eq!(support, idx.len() * idx.len());
}

#[test]
fn firing_errors() {
    let array = DetectorArray::uniform(&[-2.0, 2.0], 1.0, 5.0);
    let once = fire_element(&array, 0, 1.0).unwrap();
    assert_eq!(fire_element(&once, 1, 2.0), Err(Error::AlreadyFired(0)));
    assert_eq!(fire_element(&array, 2, 1.0), Err(Error::NoSuchElement(2)));
    assert!(fire_element(&array, 0, f64::NAN).is_err());
    assert_eq!(array.fired(), None);
    assert_eq!(once.fired(), Some(0));
}

#[test]
fn fired_without_time_is_rejected() {
    let mut array = DetectorArray::uniform(&[0.0], 1.0, 5.0);
    array.elements[0].fired = true;
    let model = InfluenceModel::Detector(array);
    assert_eq!(model.rate(&grid(), 1.0), Err(Error::MissingFiringTime(0)));
}

#[test]
fn invalid_arrays_are_rejected() {
    let g = grid();
    assert!(DetectorArray::uniform(&[0.0], 0.25, 1.0).validate(&g).is_err());
    assert!(DetectorArray::uniform(&[0.0], 1.0, -1.0).validate(&g).is_err());
    assert_eq!(
        DetectorArray::uniform(&[0.0, 0.5], 1.0, 1.0).validate(&g),
        Err(Error::OverlappingElements(0, 1))
    );
    let mut background = DetectorArray::uniform(&[0.0], 1.0, 1.0);
    background.background_rate = -0.1;
    assert!(background.validate(&g).is_err());
}

#[test]
fn background_rate_acts_on_unfired_elements() {
    let g = grid();
    let mut array = DetectorArray::uniform(&[-3.0, 3.0], 1.0, 9.0);
    array.background_rate = 0.01;
    let array = fire_element(&array, 0, 0.0).unwrap();
    let lam = position_field(&InfluenceModel::Detector(array), &g, 1.0);
    let a = window_indices(&g, -3.0, 1.0);
    let b = window_indices(&g, 3.0, 1.0);
    assert_eq!(lam[[a[0], a[1]]], 9.0);
    assert_eq!(lam[[b[0], b[1]]], 0.01);
    assert_eq!(lam[[a[0], b[0]]], 0.0);
}

#[test]
fn target_position_examples() {
    assert_eq!(epr_target_position(0.0, 1.0, 1.0, 3.0), -3.0);
    for (m1, m2) in [(1.0, 1.0), (1.0, 5.0), (3.0, 0.5)] {
        assert_eq!(epr_target_position(1.5, m1, m2, 1.5), 1.5);
    }
    assert_eq!(epr_target_position(1.0, 1.0, 2.0, 2.0), -1.0);
}

#[test]
fn epr_position_gain_sits_on_target() {
    let g = grid();
    let e = EprPositionGain {
        x0: 0.0,
        m1: 1.0,
        m2: 2.0,
        x2m: 2.0,
        t_r: 1.0,
        t_collision: 0.0,
        gain: 4.0,
        width: 1.0,
    };
    let model = InfluenceModel::EprPosition(e);
    assert!(model.rate(&g, 0.5).unwrap().is_zero());
    let lam = position_field(&model, &g, 1.0);
    let idx = window_indices(&g, -4.0, 1.0);
    assert_eq!(lam.sum(), 4.0 * (idx.len() * idx.len()) as f64);
    assert_eq!(lam[[idx[0], idx[0]]], 4.0);
    let narrow = InfluenceModel::EprPosition(EprPositionGain { width: 0.1, ..e });
    assert!(narrow.rate(&g, 1.0).is_err());
}

#[test]
fn epr_momentum_gain_centered_at_minus_p2m() {
    let g = grid();
    let model = InfluenceModel::EprMomentum(EprMomentumGain {
        p2m: 2.0,
        band: 0.5,
        t_r: 0.0,
        gain: 3.0,
    });
    let RateField::Momentum(lam) = model.rate(&g, 0.0).unwrap() else {
        panic!("expected a momentum field");
    };
    let p = g.momenta();
    let support: Vec<usize> = (0..g.n()).filter(|&i| lam[[i, i]] > 0.0).collect();
    assert!(!support.is_empty());
    let mean = support.iter().map(|&i| p[i]).sum::<f64>() / support.len() as f64;
    assert!((mean + 2.0).abs() <= g.dp() / 2.0);
    assert!(support.iter().all(|&i| (p[i] + 2.0).abs() <= 0.5 + 1e-9));
    let narrow = InfluenceModel::EprMomentum(EprMomentumGain {
        p2m: 2.0,
        band: 0.1,
        t_r: 0.0,
        gain: 3.0,
    });
    assert!(narrow.rate(&g, 0.0).is_err());
}

fn arb_model() -> impl Strategy<Value = (InfluenceModel, f64)> {
    let detector = (
        prop::collection::vec(0.0f64..10.0, 1..5),
        prop::sample::select(vec![0.5, 1.0, 1.5]),
        0.0f64..2.0,
        0.0f64..3.0,
    )
        .prop_map(|(gains, width, t_r, t)| {
            let elements = gains
                .iter()
                .enumerate()
                .map(|(k, &gain)| DetectorElement::new(-6.0 + 3.0 * k as f64, width, gain))
                .collect();
            let array = DetectorArray::new(elements);
            let k = (t_r * 10.0) as usize % gains.len();
            (InfluenceModel::Detector(fire_element(&array, k, t_r).unwrap()), t)
        });
    let position = (-3.0f64..3.0, 0.5f64..2.0, 0.0f64..10.0, 0.0f64..3.0).prop_map(|(x2m, m2, gain, t)| {
        (
            InfluenceModel::EprPosition(EprPositionGain {
                x0: 0.0,
                m1: 1.0,
                m2,
                x2m,
                t_r: 1.0,
                t_collision: 0.0,
                gain,
                width: 1.0,
            }),
            t,
        )
    });
    let momentum = (-3.0f64..3.0, 0.5f64..1.5, 0.0f64..10.0).prop_map(|(p2m, band, gain)| {
        (
            InfluenceModel::EprMomentum(EprMomentumGain { p2m, band, t_r: 0.0, gain }),
            1.0,
        )
    });
    prop_oneof![detector, position, momentum]
}

proptest! {
    #[test]
    fn rates_are_symmetric_and_nonnegative((model, t) in arb_model()) {
        let g = grid();
        if let Some(lam) = model.rate(&g, t).unwrap().values() {
            prop_assert!(lam.iter().all(|v| v.is_finite() && *v >= 0.0));
            prop_assert_eq!(lam, &lam.t().to_owned());
        }
    }

    #[test]
    fn simultaneous_firing_is_permutation_invariant(
        centers in prop::sample::subsequence(vec![-6.0, -4.0, -2.0, 0.0, 2.0, 4.0, 6.0], 1..7),
        gain in 0.1f64..10.0,
        seed in any::<u64>(),
    ) {
        let g = grid();
        let mut shuffled = centers.clone();
        let len = shuffled.len();
        for i in (1..len).rev() {
            shuffled.swap(i, (seed.rotate_left(i as u32) as usize) % (i + 1));
        }
        let a = fire_all(&DetectorArray::uniform(&centers, 1.0, gain), 0.0);
        let b = fire_all(&DetectorArray::uniform(&shuffled, 1.0, gain), 0.0);
        let la = position_field(&InfluenceModel::Detector(a), &g, 0.5);
        let lb = position_field(&InfluenceModel::Detector(b), &g, 0.5);
        prop_assert_eq!(la, lb);
    }
}
