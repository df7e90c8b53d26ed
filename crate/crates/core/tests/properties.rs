use ldct_recon::io::{decode_sinogram, encode_sinogram, window_to_u16};
use ldct_recon::projector::{back_project_view, forward_project_view, ViewSlice};
use ldct_recon::variational::DualField;
use ldct_recon::{
    dual_prox, forward_project, make_subset_schedule, make_uniform_angles, positive_root, psnr, ssim,
    FanBeamGeometry, ImageGrid, Sinogram,
};
use proptest::prelude::*;

fn image(n: usize) -> impl Strategy<Value = ImageGrid> {
    prop::collection::vec(0.0..1.0f64, n * n).prop_map(move |v| ImageGrid::from_vec(n, v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn schedule_is_a_seeded_permutation(n in 1usize..500, seed in any::<u64>()) {
        let s = make_subset_schedule(n, seed).unwrap();
        let mut order = s.order().to_vec();
        order.sort_unstable();
        prop_assert_eq!(order, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(s, make_subset_schedule(n, seed).unwrap());
    }

    #[test]
    fn uniform_angles_are_equispaced(n in 1usize..2000) {
        let a = make_uniform_angles(n).unwrap();
        prop_assert_eq!(a.len(), n);
        prop_assert_eq!(a[0], 0.0);
        let step = 2.0 * std::f64::consts::PI / n as f64;
        for w in a.windows(2) {
            prop_assert!((w[1] - w[0] - step).abs() < 1e-12);
        }
        prop_assert!(*a.last().unwrap() < 2.0 * std::f64::consts::PI);
    }

    #[test]
    fn dual_prox_is_a_projection(
        n in 1usize..12,
        scale in 0.0..100.0f64,
        seed in prop::collection::vec(-1.0..1.0f64, 288),
    ) {
        let h: Vec<f64> = seed[..n * n].iter().map(|v| v * scale).collect();
        let v: Vec<f64> = seed[144..144 + n * n].iter().map(|v| v * scale).collect();
        let q = DualField::from_components(n, h, v).unwrap();
        let p = dual_prox(&q);
        for j in 0..n * n {
            prop_assert!(p.magnitude(j) <= 1.0);
            if q.magnitude(j) <= 1.0 {
                prop_assert_eq!(p.magnitude(j), q.magnitude(j));
            }
        }
        prop_assert_eq!(dual_prox(&p), p);
    }

    #[test]
    fn positive_root_solves_the_quadratic(b in -1e3..1e3f64, c in 0.0..1e3f64) {
        let u = positive_root(b, c);
        prop_assert!(u >= 0.0);
        let residual = u * u + b * u - c;
        prop_assert!(residual.abs() <= 1e-10 * (u * u + b.abs() * u + c).max(1e-300));
    }

    #[test]
    fn projection_is_linear(x in image(12), y in image(12), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let g = FanBeamGeometry::new(9, 20).unwrap();
        let combo = ImageGrid::from_vec(
            12,
            x.values().iter().zip(y.values()).map(|(p, q)| a * p + b * q).collect(),
        ).unwrap();
        let lhs = forward_project(&combo, &g).unwrap();
        let (px, py) = (forward_project(&x, &g).unwrap(), forward_project(&y, &g).unwrap());
        for i in 0..lhs.values().len() {
            let scale = (a * px.values()[i]).abs() + (b * py.values()[i]).abs();
            prop_assert!((lhs.values()[i] - a * px.values()[i] - b * py.values()[i]).abs() <= 1e-12 * scale.max(1e-300));
        }
    }

    #[test]
    fn view_projectors_are_adjoint(
        x in image(10),
        y in prop::collection::vec(0.0..1.0f64, 24),
        view in 0usize..7,
    ) {
        let g = FanBeamGeometry::new(7, 24).unwrap();
        let ax = forward_project_view(&x, &g, view).unwrap();
        let aty = back_project_view(&ViewSlice { view_index: view, values: y.clone() }, &g, 10).unwrap();
        let lhs: f64 = ax.values.iter().zip(&y).map(|(p, q)| p * q).sum();
        let rhs = x.dot(&aty);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1e-12));
    }

    #[test]
    fn psnr_decreases_with_error(reference in image(8), d1 in 1e-4..0.1f64, d2 in 1e-4..0.1f64) {
        prop_assume!((d1 - d2).abs() > 1e-9);
        let shift = |d: f64| ImageGrid::from_vec(8, reference.values().iter().map(|v| v + d).collect()).unwrap();
        let (p1, p2) = (psnr(&shift(d1), &reference, 1.0).unwrap(), psnr(&shift(d2), &reference, 1.0).unwrap());
        prop_assert_eq!(p1 > p2, d1 < d2);
    }

    #[test]
    fn ssim_of_identical_images_is_one(x in image(16)) {
        prop_assert!((ssim(&x, &x, 1.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn display_window_is_monotone(a in -1.0..2.0f64, b in -1.0..2.0f64) {
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assert!(window_to_u16(lo, 0.0, 1.0) <= window_to_u16(hi, 0.0, 1.0));
    }

    #[test]
    fn sinogram_bytes_round_trip(
        views in 1usize..6,
        cells in 1usize..9,
        seed in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 48),
    ) {
        let s = Sinogram::from_vec(views, cells, seed[..views * cells].to_vec()).unwrap();
        prop_assert_eq!(decode_sinogram(&encode_sinogram(&s)).unwrap(), s);
    }
}
