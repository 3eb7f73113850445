use kronfactor::estimation::{divisor_combinations, fit_full, fit_reshaped, RankSpec};
use kronfactor::io::{format_series, parse_series};
use kronfactor::tensor_core::{reshape, unreshape, vectorize};
use kronfactor::testing::{aggregate, ecdf_quantile, exceedance, lower_quantile};
use kronfactor::{ModeSet, Tensor, TensorSeries};
use proptest::prelude::*;

fn tensor_and_modes() -> impl Strategy<Value = (Tensor, Vec<usize>)> {
    prop::collection::vec(1usize..4, 1..5)
        .prop_flat_map(|dims| {
            let n: usize = dims.iter().product();
            let order = dims.len();
            (
                Just(dims),
                prop::collection::vec(-10.0f64..10.0, n),
                1u32..(1 << order),
            )
        })
        .prop_map(|(dims, data, mask)| {
            let order = dims.len();
            let modes = (0..order).filter(|k| mask & (1 << k) != 0).collect();
            (Tensor::new(dims, data).unwrap(), modes)
        })
}

proptest! {
    #[test]
    fn reshape_roundtrip((x, modes) in tensor_and_modes()) {
        let a = ModeSet::new(modes, x.order()).unwrap();
        let r = reshape(&x, &a).unwrap();
        prop_assert_eq!(r.len(), x.len());
        prop_assert_eq!(unreshape(&r, x.dims(), &a).unwrap(), x);
    }

    #[test]
    fn reshape_is_linear((x, modes) in tensor_and_modes(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let y = Tensor::from_fn(x.dims().to_vec(), |i| i.iter().sum::<usize>() as f64 - 1.5).unwrap();
        let ms = ModeSet::new(modes, x.order()).unwrap();
        let lhs = reshape(&x.lin_comb(a, &y, b).unwrap(), &ms).unwrap();
        let rhs = reshape(&x, &ms).unwrap().lin_comb(a, &reshape(&y, &ms).unwrap(), b).unwrap();
        for (p, q) in lhs.data().iter().zip(rhs.data()) {
            prop_assert!((p - q).abs() <= 1e-12 * (1.0 + p.abs()));
        }
    }

    #[test]
    fn full_reshape_is_vectorisation((x, _) in tensor_and_modes()) {
        let r = reshape(&x, &ModeSet::full(x.order()).unwrap()).unwrap();
        prop_assert_eq!(r.dims(), &[x.len()]);
        let v = vectorize(&x);
        prop_assert_eq!(r.data(), v.as_slice());
    }

    /// Merging modes below an already merged set, together with the merged
    /// mode, equals merging the union at once.
    #[test]
    fn reshape_composition((x, _) in tensor_and_modes(), split in 0usize..4, take in 0u32..16) {
        let order = x.order();
        prop_assume!(order >= 2);
        let split = 1 + split % (order - 1);
        let a: Vec<usize> = (split..order).collect();
        let below: Vec<usize> = (0..split).filter(|k| take & (1 << k) != 0).collect();
        let once = ModeSet::new([below.clone(), a.clone()].concat(), order).unwrap();
        let r1 = reshape(&x, &ModeSet::new(a, order).unwrap()).unwrap();
        let mut second = below.clone();
        second.push(r1.order() - 1);
        let r2 = reshape(&r1, &ModeSet::new(second, r1.order()).unwrap()).unwrap();
        prop_assert_eq!(r2, reshape(&x, &once).unwrap());
    }

    #[test]
    fn exceedance_decreases_in_threshold(row in prop::collection::vec(0.0f64..5.0, 1..50), c1 in 0.0f64..5.0, c2 in 0.0f64..5.0) {
        let (lo, hi) = if c1 <= c2 { (c1, c2) } else { (c2, c1) };
        prop_assert!(exceedance(&row, hi) <= exceedance(&row, lo));
        let e = exceedance(&row, lo);
        prop_assert!((0.0..=1.0).contains(&e));
    }

    #[test]
    fn quantile_is_infimum(sample in prop::collection::vec(-5.0f64..5.0, 1..80), p in 0.01f64..0.99) {
        let q = lower_quantile(&sample, p).unwrap();
        let n = sample.len() as f64;
        let at = sample.iter().filter(|v| **v <= q).count() as f64 / n;
        let below = sample.iter().filter(|v| **v < q).count() as f64 / n;
        prop_assert!(at >= p - 1e-9);
        prop_assert!(below < p);
        prop_assert!(sample.contains(&q));
    }

    #[test]
    fn self_exceedance_bounded(sample in prop::collection::vec(0.0f64..5.0, 1..200), alpha in 0.005f64..0.5) {
        let q = ecdf_quantile(&sample, alpha).unwrap();
        let distinct = {
            let mut s = sample.clone();
            s.sort_by(f64::total_cmp);
            s.windows(2).all(|w| w[0] != w[1])
        };
        prop_assume!(distinct);
        prop_assert!(exceedance(&sample, q) <= alpha + 1.0 / sample.len() as f64 + 1e-12);
    }

    #[test]
    fn divisor_combinations_complete(r in 1usize..30, dims in prop::collection::vec(1usize..12, 1..4)) {
        match divisor_combinations(r, &dims) {
            Ok(combos) => {
                for c in &combos {
                    prop_assert_eq!(c.0.iter().product::<usize>(), r);
                    prop_assert!(c.0.iter().zip(&dims).all(|(p, d)| p <= d));
                }
                prop_assert!(combos.windows(2).all(|w| w[0] < w[1]));
            }
            Err(_) => {
                // no tuple exists: check by counting r's factorizations within the bounds
                let ok = dims.iter().fold(vec![r], |acc, &d| {
                    acc.into_iter().flat_map(|rest| (1..=d.min(rest)).filter(move |p| rest % p == 0).map(move |p| rest / p)).collect()
                });
                prop_assert!(!ok.contains(&1));
            }
        }
    }

    #[test]
    fn true_ranks_are_a_combination(ranks in prop::collection::vec(1usize..4, 1..4)) {
        let r: usize = ranks.iter().product();
        let dims = vec![5; ranks.len()];
        let combos = divisor_combinations(r, &dims).unwrap();
        prop_assert!(combos.iter().any(|c| c.0 == ranks));
    }

    #[test]
    fn series_text_roundtrip(vals in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO, 12)) {
        let y = TensorSeries::new(vec![2, 3], 2, vals).unwrap();
        prop_assert_eq!(parse_series(&format_series(&y)).unwrap(), y);
    }

    #[test]
    fn aggregate_is_nonnegative_and_scales(vals in prop::collection::vec(-3.0f64..3.0, 24), c in 0.1f64..4.0) {
        let y = TensorSeries::new(vec![2, 3, 2], 2, vals).unwrap();
        let a = aggregate(&y, 1).unwrap();
        let b = aggregate(&y.scaled(c), 1).unwrap();
        for (p, q) in a.data().iter().zip(b.data()) {
            prop_assert!(*p >= 0.0);
            prop_assert!((q - c * c * p).abs() <= 1e-12 * (1.0 + q.abs()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Residuals are orthogonal to the fitted common components.
    #[test]
    fn fits_are_projections(vals in prop::collection::vec(-3.0f64..3.0, 4 * 3 * 2 * 10)) {
        let y = TensorSeries::new(vec![4, 3, 2], 10, vals).unwrap();
        let spec = RankSpec::new(vec![2], 2).unwrap();
        let fit = fit_reshaped(&y, &spec).unwrap();
        let inner: f64 = fit.common.data().iter().zip(fit.residual.data()).map(|(a, b)| a * b).sum();
        prop_assert!(inner.abs() < 1e-9 * y.mean_square() * y.data().len() as f64);
        let full = fit_full(&y, &spec, &kronfactor::estimation::DivisorCombo(vec![2, 1])).unwrap();
        let inner: f64 = full.common.data().iter().zip(full.residual.data()).map(|(a, b)| a * b).sum();
        prop_assert!(inner.abs() < 1e-9 * y.mean_square() * y.data().len() as f64);
        let total: f64 = y.data().iter().map(|v| v * v).sum();
        let explained: f64 = fit.common.data().iter().map(|v| v * v).sum();
        prop_assert!(explained <= total * (1.0 + 1e-12));
    }
}
