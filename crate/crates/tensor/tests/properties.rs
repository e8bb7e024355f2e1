use hytex_tensor::{check_gradients, Conv2dSpec, Graph, Shape, Tensor};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn shape() -> impl Strategy<Value = Shape> {
    (1usize..3, 1usize..5, 1usize..5, 1usize..5).prop_map(|(n, c, h, w)| Shape::new(n, c, h, w))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn softmax_is_a_distribution_at_any_scale(s in shape(), seed in any::<u64>(), scale in 0.1f64..500.0) {
        let x = Tensor::<f64>::uniform(s, -scale, scale, &mut ChaCha8Rng::seed_from_u64(seed));
        let g = Graph::new();
        let p = g.constant(x).softmax_channels().value();
        prop_assert!(p.all_finite());
        for n in 0..s.n {
            for i in 0..s.plane() {
                let total: f64 = (0..s.c).map(|c| p.plane(n, c)[i]).sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
            }
        }
        prop_assert!(p.min() >= 0.0 && p.max() <= 1.0);
    }

    #[test]
    fn narrow_undoes_cat(a in shape(), extra in 1usize..3, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Tensor::<f64>::uniform(a, -1.0, 1.0, &mut rng);
        let y = Tensor::<f64>::uniform(Shape::new(extra, a.c, a.h, a.w), -1.0, 1.0, &mut rng);
        let z = Tensor::cat_batch(&[&x, &y]).unwrap();
        prop_assert_eq!(z.narrow_batch(0, a.n), x.clone());
        prop_assert_eq!(z.narrow_batch(a.n, extra), y.clone());
        let yc = Tensor::<f64>::uniform(Shape::new(a.n, extra, a.h, a.w), -1.0, 1.0, &mut rng);
        let zc = Tensor::cat_channels(&[&x, &yc]).unwrap();
        prop_assert_eq!(zc.narrow_channels(0, a.c), x);
        prop_assert_eq!(zc.narrow_channels(a.c, extra), yc);
    }

    #[test]
    fn conv_gradients_match_finite_differences(
        cin in 1usize..3, cout in 1usize..3, k in prop::sample::select(vec![1usize, 3]),
        stride in 1usize..3, size in 4usize..7, seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = Conv2dSpec { stride, padding: k / 2 };
        let x = Tensor::<f64>::uniform(Shape::new(2, cin, size, size), -1.0, 1.0, &mut rng);
        let w = Tensor::<f64>::uniform(Shape::new(cout, cin, k, k), -1.0, 1.0, &mut rng);
        let b = Tensor::<f64>::uniform(Shape::new(1, cout, 1, 1), -1.0, 1.0, &mut rng);
        let (ho, wo) = spec.output_hw(size, size, k, k);
        let probe = Tensor::<f64>::uniform(Shape::new(2, cout, ho, wo), -1.0, 1.0, &mut rng);
        let reports = check_gradients(&[x, w, b], 1e-6, None, |g, v| {
            (v[0].conv2d(v[1], Some(v[2]), spec) * g.constant(probe.clone())).square().sum()
        });
        for r in reports {
            prop_assert!(r.relative_error < 1e-6, "{:?}", r);
        }
    }

    #[test]
    fn smooth_elementwise_chain_gradients_match(s in shape(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Tensor::<f64>::uniform(s, -2.0, 2.0, &mut rng);
        let b = Tensor::<f64>::uniform(s, -2.0, 2.0, &mut rng);
        let reports = check_gradients(&[a, b], 1e-6, None, |_, v| {
            ((v[0] * v[1]).sigmoid() + v[0].tanh().square() + v[1].softplus().sqrt()).mean()
        });
        for r in reports {
            prop_assert!(r.relative_error < 1e-6, "{:?}", r);
        }
    }
}
