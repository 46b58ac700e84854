use netslice::penalty::{block_penalty, penalty_gradient, penalty_value, vertex_value, PenaltyParams};
use netslice::FractionalPlacement;
use proptest::prelude::*;

/// Normalizes arbitrary weights onto the simplex.
fn simplex(w: &[f64]) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}

fn point(blocks: Vec<Vec<f64>>) -> FractionalPlacement {
    FractionalPlacement {
        values: vec![blocks],
        aggregates: None,
    }
}

#[test]
fn vertices_are_zeros_of_the_penalty() {
    for m in 1..6 {
        for j in 0..m {
            let mut b = vec![0.0; m];
            b[j] = 1.0;
            assert!(block_penalty(&b, 0.5, 1e-3).abs() < 1e-12);
        }
    }
    assert!((vertex_value(3, 0.5, 0.0) - 1.0).abs() < 1e-15);
}

#[test]
fn uniform_block_is_the_worst_case() {
    let m = 4;
    let uniform = vec![0.25; m];
    let expected = m as f64 * 0.25f64.sqrt() - 1.0;
    assert!((block_penalty(&uniform, 0.5, 0.0) - expected).abs() < 1e-12);
}

#[test]
fn parameter_validation() {
    let ok = PenaltyParams {
        p: 0.5,
        epsilon: 1e-3,
        sigma: 2.0,
    };
    assert!(ok.validate().is_ok());
    assert!(PenaltyParams { p: 1.0, ..ok }.validate().is_err());
    assert!(PenaltyParams { epsilon: -1.0, ..ok }.validate().is_err());
    assert!(PenaltyParams { sigma: f64::NAN, ..ok }.validate().is_err());
}

proptest! {
    #[test]
    fn penalty_is_nonnegative_on_the_simplex(
        w in prop::collection::vec(0.001f64..1.0, 1..7),
        p in 0.1f64..0.9,
        eps in 0.0f64..0.1,
    ) {
        let y = simplex(&w);
        prop_assert!(block_penalty(&y, p, eps) >= -1e-12);
    }

    #[test]
    fn gradient_matches_central_differences(
        w in prop::collection::vec(0.05f64..1.0, 1..6),
        p in 0.2f64..0.8,
        eps in 1e-3f64..0.1,
    ) {
        let y = simplex(&w);
        let x = point(vec![y.clone()]);
        let g = penalty_gradient(&x, p, eps);
        let h = 1e-6;
        for j in 0..y.len() {
            let mut up = y.clone();
            up[j] += h;
            let mut down = y.clone();
            down[j] -= h;
            let fd = (penalty_value(&point(vec![up]), p, eps) - penalty_value(&point(vec![down]), p, eps)) / (2.0 * h);
            prop_assert!((fd - g[0][0][j]).abs() <= 1e-5 * g[0][0][j].abs().max(1.0), "{} vs {}", fd, g[0][0][j]);
        }
    }

    #[test]
    fn penalty_sums_over_blocks(
        a in prop::collection::vec(0.01f64..1.0, 1..5),
        b in prop::collection::vec(0.01f64..1.0, 1..5),
    ) {
        let (ya, yb) = (simplex(&a), simplex(&b));
        let total = penalty_value(&point(vec![ya.clone(), yb.clone()]), 0.5, 1e-3);
        let parts = block_penalty(&ya, 0.5, 1e-3) + block_penalty(&yb, 0.5, 1e-3);
        prop_assert!((total - parts).abs() < 1e-12);
    }
}
