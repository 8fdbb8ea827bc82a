//! Light field reconstruction from a focal stack by shift-and-sum back-projection.

use crate::error::{Error, Result};
use crate::interp::shear_sum;
use crate::types::{AngularSampling, FocalStack, LightField4D, Validate};

/// `L'(x, y, ξ, η) = Σ_m I(x + z_m ξ, y + z_m η, z_m)` on the plane `z = 0`.
///
/// Images are accumulated in ascending `m` for every view, so the result is
/// bit-reproducible regardless of thread scheduling. No `1/M` normalisation
/// is applied.
pub fn reconstruct(stack: &FocalStack, angular: &AngularSampling) -> Result<LightField4D> {
    stack.validate()?;
    angular.validate()?;
    Ok(shear_sum(stack.images(), stack.focal_depths_mm(), angular, 1.0))
}

/// Angular sampling spanning the capture cone of a camera with numerical aperture `na`
/// (`ξ_max = η_max = na` in the slope approximation).
pub fn angular_sampling_from_camera(na: f64, n_xi: usize, n_eta: usize) -> Result<AngularSampling> {
    if !(na > 0.0 && na < 1.0) {
        return Err(Error::InvalidNa(na));
    }
    AngularSampling::new(na, n_xi, na, n_eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capture::{capture, clear_stack, PsfModel};
    use crate::interp::sample_bilinear;
    use crate::scene::exact_light_field;
    use crate::types::{Image2D, ObjectScene};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pattern(w: usize, h: usize, seed: u64) -> Image2D {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image2D::new(w, h, 0.7, (0..w * h).map(|_| rng.random::<f64>()).collect()).unwrap()
    }

    fn brute_force(stack: &FocalStack, ang: &AngularSampling) -> Vec<f64> {
        let (w, h) = (stack.width(), stack.height());
        let mut out = Vec::new();
        for j in 0..ang.n_eta {
            for i in 0..ang.n_xi {
                for y in 0..h {
                    for x in 0..w {
                        let mut acc = 0.0;
                        for (im, &z) in stack.images().iter().zip(stack.focal_depths_mm()) {
                            let xm = im.x_mm(x as f64) + z * ang.xi(i);
                            let ym = im.y_mm(y as f64) + z * ang.eta(j);
                            acc += sample_bilinear(im, im.col_of(xm), im.row_of(ym));
                        }
                        out.push(acc);
                    }
                }
            }
        }
        out
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn single_image_at_origin_repeats_in_every_view() {
        let image = pattern(6, 6, 1);
        let stack = FocalStack::new(vec![image.clone()], vec![0.0]).unwrap();
        let lf = reconstruct(&stack, &AngularSampling::square(0.3, 5).unwrap()).unwrap();
        for j in 0..5 {
            for i in 0..5 {
                assert_eq!(lf.view(i, j), image.data());
            }
        }
    }

    #[test]
    fn clear_stack_reproduces_exact_light_field() {
        let scene = ObjectScene::new(
            vec![pattern(10, 10, 1), pattern(10, 10, 2), pattern(10, 10, 3)],
            vec![-3.0, 0.0, 3.0],
        )
        .unwrap();
        let ang = AngularSampling::square(0.4, 3).unwrap();
        let stack = clear_stack(&scene, scene.depths_mm()).unwrap();
        let lf = reconstruct(&stack, &ang).unwrap();
        let exact = exact_light_field(&scene, &ang).unwrap();
        assert!(max_abs_diff(lf.data(), exact.data()) < 1e-10);
    }

    #[test]
    fn blurred_stack_is_exact_plus_backprojected_residual() {
        let scene = ObjectScene::new(
            vec![pattern(12, 12, 4), pattern(12, 12, 5), pattern(12, 12, 6)],
            vec![-3.0, 0.0, 3.0],
        )
        .unwrap();
        let psf = PsfModel::new(0.4, 0.7).unwrap();
        let ang = AngularSampling::square(0.4, 3).unwrap();
        let stack = capture(&scene, &psf, scene.depths_mm()).unwrap();
        let clear = clear_stack(&scene, scene.depths_mm()).unwrap();
        let residual = stack.zip_with(&clear, |a, b| a - b).unwrap();
        let total = reconstruct(&stack, &ang).unwrap();
        let exact = exact_light_field(&scene, &ang).unwrap();
        let noise = reconstruct(&residual, &ang).unwrap();
        let sum = exact.zip_with(&noise, |a, b| a + b).unwrap();
        assert!(max_abs_diff(total.data(), sum.data()) < 1e-10);
    }

    #[test]
    fn matches_brute_force_oracle() {
        let stack = FocalStack::new(
            vec![pattern(16, 16, 7), pattern(16, 16, 8), pattern(16, 16, 9)],
            vec![-2.2, 0.4, 5.0],
        )
        .unwrap();
        let ang = AngularSampling::new(0.35, 3, 0.5, 2).unwrap();
        let lf = reconstruct(&stack, &ang).unwrap();
        assert!(max_abs_diff(lf.data(), &brute_force(&stack, &ang)) < 1e-10);
    }

    #[test]
    fn central_ray_sums_stack() {
        let stack = FocalStack::new(vec![pattern(5, 5, 1), pattern(5, 5, 2)], vec![-1.0, 2.0]).unwrap();
        let lf = reconstruct(&stack, &AngularSampling::square(0.2, 3).unwrap()).unwrap();
        for (k, &v) in lf.view(1, 1).iter().enumerate() {
            assert_eq!(v, stack.images()[0].data()[k] + stack.images()[1].data()[k]);
        }
    }

    #[test]
    fn camera_sampling() {
        let ang = angular_sampling_from_camera(0.4, 50, 50).unwrap();
        assert_eq!((ang.xi_max, ang.n_xi, ang.eta_max, ang.n_eta), (0.4, 50, 0.4, 50));
        let ang = angular_sampling_from_camera(0.2, 1, 1).unwrap();
        assert_eq!((ang.xi(0), ang.eta(0)), (0.0, 0.0));
        let ang = angular_sampling_from_camera(0.6, 3, 3).unwrap();
        assert_eq!(ang.xis(), vec![-0.6, 0.0, 0.6]);
        assert!(matches!(angular_sampling_from_camera(1.2, 3, 3), Err(Error::InvalidNa(_))));
        assert!(matches!(angular_sampling_from_camera(0.0, 3, 3), Err(Error::InvalidNa(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn reconstruction_is_linear(seed in 0u64..1000, a in 0.0f64..3.0, b in 0.0f64..3.0) {
            let depths = vec![-1.3, 0.6, 2.9];
            let s1 = FocalStack::new((0..3).map(|k| pattern(7, 6, seed + k)).collect(), depths.clone()).unwrap();
            let s2 = FocalStack::new((0..3).map(|k| pattern(7, 6, seed + 10 + k)).collect(), depths).unwrap();
            let ang = AngularSampling::new(0.6, 3, 0.3, 3).unwrap();
            let mixed = s1.zip_with(&s2, |u, v| a * u + b * v).unwrap();
            let l1 = reconstruct(&s1, &ang).unwrap();
            let l2 = reconstruct(&s2, &ang).unwrap();
            let lm = reconstruct(&mixed, &ang).unwrap();
            for k in 0..lm.data().len() {
                prop_assert!((lm.data()[k] - (a * l1.data()[k] + b * l2.data()[k])).abs() < 1e-11);
            }
        }
    }
}
