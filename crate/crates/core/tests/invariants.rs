use proptest::prelude::*;
use std::sync::Arc;
use vortwave::grid::{Grid, PSpacing};
use vortwave::heightfield::{field_csv, read_field, write_field, HeightField};
use vortwave::spline::CubicSpline;
use vortwave::streamflow::{bernoulli, conjugate_streams, critical_parameters, depth, stream_solution};
use vortwave::vorticity::{VorticityModel, VorticitySpec};

fn model(kind: u8, value: f64) -> VorticityModel<f64> {
    let spec = match kind {
        0 => VorticitySpec::Zero,
        1 => VorticitySpec::Constant { value },
        _ => VorticitySpec::Linear { slope: value },
    };
    VorticityModel::new(spec).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn depth_decreases_with_bottom_speed(kind in 0u8..3, value in -1.0f64..1.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let m = model(kind, value);
        let s0 = m.s0_squared().sqrt();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi - lo > 1e-3);
        let s1 = s0 + 0.05 + 3.0 * lo;
        let s2 = s0 + 0.05 + 3.0 * hi;
        prop_assert!(depth(&m, s1).unwrap() > depth(&m, s2).unwrap());
    }

    #[test]
    fn bernoulli_has_single_minimum_at_critical_speed(kind in 0u8..3, value in 0.0f64..1.0, u in 0.0f64..1.0) {
        let m = model(kind, value);
        let cp = critical_parameters(&m).unwrap();
        let s = cp.s0 + 1e-3 + 3.0 * u;
        let here = bernoulli(&m, s).unwrap();
        prop_assert!(here >= cp.rc - 1e-9);
        let next = bernoulli(&m, s + 1e-3).unwrap();
        if s + 1e-3 < cp.sc {
            prop_assert!(next < here);
        } else if s > cp.sc {
            prop_assert!(next > here);
        }
    }

    #[test]
    fn conjugate_streams_share_bernoulli_constant(excess in 0.01f64..1.5) {
        let m = model(0, 0.0);
        let r = 1.5 + excess;
        let reg = conjugate_streams(&m, r).unwrap();
        prop_assert!((bernoulli(&m, reg.s_minus).unwrap() - r).abs() < 1e-10);
        prop_assert!((bernoulli(&m, reg.s_plus).unwrap() - r).abs() < 1e-10);
        prop_assert!(reg.s_minus < 1.0 && 1.0 < reg.s_plus);
        prop_assert!(reg.d_minus < reg.d_plus && reg.d_plus < r);
    }

    #[test]
    fn spline_interpolates_knots(ys in prop::collection::vec(-5.0f64..5.0, 4..20)) {
        let n = ys.len();
        let xs: Vec<f64> = (0..n).map(|k| (k as f64).powf(1.3)).collect();
        let s = CubicSpline::clamped_estimated(xs.clone(), ys.clone()).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            prop_assert!((s.eval(*x) - y).abs() < 1e-12 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn stored_fields_are_even(c1 in -0.05f64..0.05, c2 in -0.05f64..0.05) {
        let m = Arc::new(model(0, 0.0));
        let reg = conjugate_streams(&*m, 1.8).unwrap();
        let st = stream_solution(m.clone(), reg.s_minus).unwrap();
        let grid = Grid::new(16, 12, PSpacing::Clustered).unwrap();
        let f = HeightField::from_stream(grid, &st, 2.5, 1.8).unwrap()
            .perturbed(1.0, |q, p| p * (c1 * q.cos() + c2 * (2.0 * q).cos())).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (csv, json) = (dir.path().join("f.csv"), dir.path().join("f.json"));
        write_field(&f, 0.0, &csv, &json).unwrap();
        let back = read_field(&csv, &json).unwrap();
        prop_assert_eq!(back.evenness_defect, 0.0);
        prop_assert_eq!(back.field.to_unknowns(), f.to_unknowns());
        prop_assert_eq!(field_csv(&f).lines().count(), 1 + 16 * 13);
    }
}
