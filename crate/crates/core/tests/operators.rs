use ldct_recon::projector::forward_project_view;
use ldct_recon::variational::{em_prox_pixel, primal_prox_em, rof_tv_denoise, DualField, ProxCoefficients};
use ldct_recon::{
    back_project, divergence, forward_project, gradient, tv_value, FanBeamGeometry, ImageGrid, Sinogram,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_image(n: usize, rng: &mut impl Rng) -> ImageGrid {
    ImageGrid::from_vec(n, (0..n * n).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..300 {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn em_prox_matches_one_dimensional_minimizer() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..200 {
        let tau = rng.gen_range(0.01..50.0);
        let colsum = rng.gen_range(0.0..2.0);
        let ratio = rng.gen_range(0.01..3.0);
        let previous = rng.gen_range(0.01..2.0);
        let anchor = rng.gen_range(-1.0..2.0);
        // τ·(C·u − x·R·ln u) + ½(u − x̃)²
        let objective = |u: f64| tau * (colsum * u - previous * ratio * u.ln()) + 0.5 * (u - anchor).powi(2);
        let upper = anchor.abs() + tau * (colsum + previous * ratio) + 10.0;
        let oracle = golden_section(objective, 1e-300, upper);
        let u = em_prox_pixel(tau, colsum, ratio, anchor, previous);
        assert!(
            (u - oracle).abs() <= 1e-6 * oracle.max(1.0),
            "tau {tau} C {colsum} R {ratio} x {previous} anchor {anchor}: {u} vs {oracle}"
        );
    }
}

#[test]
fn em_prox_quadratic_residual() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let n = 400;
    let gen = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| (0..n).map(|_| rng.gen_range(lo..hi)).collect::<Vec<_>>();
    let coeffs = ProxCoefficients {
        tau: 3.0,
        colsum: gen(&mut rng, 0.0, 1.0),
        ratio_backproj: gen(&mut rng, 0.0, 2.0),
        anchor: gen(&mut rng, -1.0, 1.0),
        previous: gen(&mut rng, 0.0, 1.0),
    };
    let u = primal_prox_em(&coeffs).unwrap();
    for j in 0..n {
        let b = coeffs.tau * coeffs.colsum[j] - coeffs.anchor[j];
        let c = coeffs.tau * coeffs.previous[j] * coeffs.ratio_backproj[j];
        let residual = u[j] * u[j] + b * u[j] - c;
        let scale = 1.0 + b.abs() * u[j] + c;
        assert!(u[j] >= 0.0);
        assert!(residual.abs() <= 1e-9 * scale, "pixel {j}: residual {residual}");
    }
}

#[test]
fn gradient_divergence_adjoint_on_all_grid_sizes() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    for n in [5, 64, 256] {
        for _ in 0..20 {
            let x = random_image(n, &mut rng);
            let q = DualField::from_components(
                n,
                (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            )
            .unwrap();
            let lhs = gradient(&x).dot(&q);
            let rhs = -x.dot(&divergence(&q));
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0), "n {n}: {lhs} vs {rhs}");
        }
    }
}

#[test]
fn rof_converges_and_reduces_tv() {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let n = 48;
    let noisy = ImageGrid::from_vec(
        n,
        (0..n * n)
            .map(|j| if (j % n) < n / 2 { 0.2 } else { 0.8 } + rng.gen_range(-0.1..0.1))
            .collect(),
    )
    .unwrap();
    let weight = 0.1;
    let iterations = 300;
    let u = rof_tv_denoise(&noisy, weight, iterations).unwrap();
    let reference = rof_tv_denoise(&noisy, weight, 10 * iterations).unwrap();
    let diff: f64 = u.values().iter().zip(reference.values()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = reference.values().iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(diff / norm < 1e-3, "relative change {}", diff / norm);
    assert!(tv_value(&u) < tv_value(&noisy));
}

#[test]
fn projector_adjoint_at_64_with_60_views() {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let g = FanBeamGeometry::new(60, 96).unwrap();
    for _ in 0..20 {
        let x = random_image(64, &mut rng);
        let y = Sinogram::from_vec(60, 96, (0..60 * 96).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
        let ax = forward_project(&x, &g).unwrap();
        let aty = back_project(&y, &g, 64).unwrap();
        let lhs = dot(ax.values(), y.values());
        let rhs = dot(x.values(), aty.values());
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs(), "{lhs} vs {rhs}");
    }
}

#[test]
fn forward_projection_is_linear() {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let g = FanBeamGeometry::new(24, 48).unwrap();
    let x = random_image(32, &mut rng);
    let y = random_image(32, &mut rng);
    let (a, b) = (0.7, -1.3);
    let combo = ImageGrid::from_vec(32, x.values().iter().zip(y.values()).map(|(p, q)| a * p + b * q).collect()).unwrap();
    let lhs = forward_project(&combo, &g).unwrap();
    let px = forward_project(&x, &g).unwrap();
    let py = forward_project(&y, &g).unwrap();
    for i in 0..lhs.values().len() {
        let rhs = a * px.values()[i] + b * py.values()[i];
        let scale = (a * px.values()[i]).abs() + (b * py.values()[i]).abs();
        assert!((lhs.values()[i] - rhs).abs() <= 1e-12 * scale.max(1e-300));
    }
}

#[test]
fn centered_disk_profile_matches_chord_lengths() {
    let n = 512;
    let r = 0.3;
    let mut disk = ImageGrid::zeros(n);
    for row in 0..n {
        for col in 0..n {
            let (x, y) = disk.pixel_center(row, col);
            if x * x + y * y <= r * r {
                disk.set(row, col, 1.0);
            }
        }
    }
    let g = FanBeamGeometry::new(8, 1024).unwrap();
    for view in [0, 3] {
        let slice = forward_project_view(&disk, &g, view).unwrap();
        for (cell, &value) in slice.values.iter().enumerate() {
            // distance of the ray from the centre
            let s = g.ray_offset(cell);
            if s.abs() < 0.9 * r {
                let chord = 2.0 * (r * r - s * s).sqrt();
                assert!(((value - chord) / chord).abs() < 0.02, "cell {cell}: {value} vs {chord}");
            } else if s.abs() > r + 2.0 / n as f64 {
                assert_eq!(value, 0.0);
            }
        }
    }
}

#[test]
fn opposite_views_of_uniform_image_agree() {
    // a uniform square is point-symmetric: the ray of cell k at θ + π is the
    // mirror image through the centre of the ray of cell k at θ
    let g = FanBeamGeometry::new(16, 64).unwrap();
    let img = ImageGrid::filled(40, 1.0);
    for view in 0..8 {
        let a = forward_project_view(&img, &g, view).unwrap();
        let b = forward_project_view(&img, &g, view + 8).unwrap();
        for (p, q) in a.values.iter().zip(&b.values) {
            assert!((p - q).abs() <= 1e-6 * p.abs().max(1e-12));
        }
    }
    // at θ = 0 the square is also mirror-symmetric about the central ray
    let a = forward_project_view(&img, &g, 0).unwrap();
    for k in 0..64 {
        assert!((a.values[k] - a.values[63 - k]).abs() <= 1e-6 * a.values[k].abs().max(1e-12));
    }
}
