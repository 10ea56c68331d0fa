use m2mt::attribution::{diffusion_index, gini};
use m2mt::autodiff::{Backend, Tape};
use m2mt::ensemble::LfTransform;
use m2mt::io::{decode_pnm, decode_tensor, decode_weights, encode_pgm, encode_tensor, encode_weights, parse_curve_csv, curve_csv};
use m2mt::ops::shuffle::{pixel_shuffle, pixel_unshuffle};
use m2mt::ops::softmax;
use m2mt::{LfDims, LfTensor, Tensor};
use proptest::prelude::*;

fn ext() -> impl Strategy<Value = usize> {
    prop::sample::select(vec![1usize, 2, 3, 5])
}

fn lf_strategy() -> impl Strategy<Value = LfTensor<f64>> {
    (ext(), ext(), ext(), ext(), ext()).prop_flat_map(|(u, v, w, h, c)| {
        let d = LfDims::new(u, v, w, h, c);
        prop::collection::vec(-1e3f64..1e3, d.len()).prop_map(move |data| LfTensor::new(d, data).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn subspace_views_round_trip(lf in lf_strategy()) {
        let d = lf.dims();
        let (u, v, w, h, c) = (d.u, d.v, d.w, d.h, d.c);
        prop_assert_eq!(&LfTensor::from_spatial(&lf.to_spatial(), u, v, w, h).unwrap(), &lf);
        prop_assert_eq!(&LfTensor::from_angular(&lf.to_angular(), u, v, w, h).unwrap(), &lf);
        prop_assert_eq!(&LfTensor::from_epi_h(&lf.to_epi_h(), u, v, w, h).unwrap(), &lf);
        prop_assert_eq!(&LfTensor::from_epi_v(&lf.to_epi_v(), u, v, w, h).unwrap(), &lf);
        prop_assert_eq!(&LfTensor::from_merged(&lf.to_merged(), u, v, c, w, h).unwrap(), &lf);
        prop_assert_eq!(&LfTensor::from_macpi(&lf.to_macpi(), u, v, w, h).unwrap(), &lf);
    }

    #[test]
    fn views_preserve_the_multiset(lf in lf_strategy()) {
        let mut a = lf.data().to_vec();
        let mut b = lf.to_macpi().data().to_vec();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn transforms_invert(lf in lf_strategy(), i in 0usize..8) {
        let t = LfTransform::group()[i];
        let d = lf.dims();
        if t.transpose && (d.u != d.v || d.w != d.h) {
            prop_assert!(t.apply(&lf).is_err());
        } else {
            prop_assert_eq!(&t.invert().apply(&t.apply(&lf).unwrap()).unwrap(), &lf);
        }
    }

    #[test]
    fn shuffle_inverts(n in 1usize..3, a in 1usize..4, b in 1usize..4, c in 1usize..3, r in 1usize..4, seed in any::<u64>()) {
        let x = Tensor::from_fn(&[n, a, b, c * r * r], |i| (i as u64 ^ seed) as f64);
        prop_assert_eq!(pixel_unshuffle(&pixel_shuffle(&x, r).unwrap(), r).unwrap(), x);
    }

    #[test]
    fn softmax_rows_are_distributions(rows in prop::collection::vec(prop::collection::vec(-50f64..50.0, 4), 1..5)) {
        let n = rows.len();
        let x = Tensor::new(vec![n, 4], rows.concat()).unwrap();
        let y = softmax(&x);
        for r in y.data().chunks(4) {
            prop_assert!(r.iter().all(|&p| p >= 0.0));
            prop_assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gini_bounds_and_scale_invariance(xs in prop::collection::vec(0f64..10.0, 1..40), s in 0.1f64..100.0) {
        match gini(&xs).unwrap() {
            None => prop_assert!(xs.iter().all(|&x| x == 0.0)),
            Some(g) => {
                prop_assert!((0.0..=1.0).contains(&g));
                let di = diffusion_index(g);
                prop_assert!((0.0..=100.0).contains(&di));
                let scaled: Vec<f64> = xs.iter().map(|x| x * s).collect();
                prop_assert!((gini(&scaled).unwrap().unwrap() - g).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn backward_is_linear_in_the_seed(xs in prop::collection::vec(-2f64..2.0, 6), k in 1.0f64..8.0) {
        let tape = Tape::new();
        let x = tape.leaf(Tensor::new(vec![2, 3], xs).unwrap());
        let y = tape.gelu(&tape.mul(&x, &x).unwrap());
        let seed = Tensor::from_fn(&[2, 3], |i| i as f64 - 2.5);
        let g1 = tape.backward(y, &seed).unwrap().get(x);
        let g2 = tape.backward(y, &seed.scale(k)).unwrap().get(x);
        for (a, b) in g1.data().iter().zip(g2.data()) {
            prop_assert!((a * k - b).abs() <= 4.0 * f64::EPSILON * b.abs().max(1e-300));
        }
        let zero = tape.backward(y, &Tensor::zeros(&[2, 3])).unwrap().get(x);
        prop_assert!(zero.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn tensor_file_round_trips(dims in prop::collection::vec(1usize..4, 1..5), seed in any::<u64>()) {
        let t = Tensor::from_fn(&dims, |i| f64::from_bits(seed.wrapping_mul(i as u64 + 1)) % 1e6);
        let t = t.map(|x| if x.is_finite() { x } else { 0.5 });
        prop_assert_eq!(&decode_tensor::<f64>(&encode_tensor(&t)).unwrap(), &t);
        let f = t.cast::<f32>();
        prop_assert_eq!(&decode_tensor::<f32>(&encode_tensor(&f)).unwrap(), &f);
    }

    #[test]
    fn weights_round_trip(sizes in prop::collection::vec(1usize..6, 1..5)) {
        let named: Vec<(String, Tensor<f64>)> = sizes
            .iter()
            .enumerate()
            .map(|(i, &n)| (format!("layer.{i}.weight"), Tensor::from_fn(&[n, 2], |j| (i * 10 + j) as f64 / 7.0)))
            .collect();
        prop_assert_eq!(decode_weights::<f64>(&encode_weights(&named)).unwrap(), named);
    }

    #[test]
    fn pgm_round_trips_quantized_planes(rows in 1usize..6, cols in 1usize..6, deep in any::<bool>(), seed in any::<u32>()) {
        let maxval: u16 = if deep { 65535 } else { 255 };
        let plane = Tensor::from_fn(&[rows, cols], |i| ((seed as usize + i * 7919) % (maxval as usize + 1)) as f64 / maxval as f64);
        let img = decode_pnm(&encode_pgm(&plane, maxval).unwrap()).unwrap();
        prop_assert_eq!(img.to_plane().unwrap(), plane);
    }

    #[test]
    fn curves_round_trip(c in prop::collection::vec(0f64..10.0, 0..20)) {
        prop_assert_eq!(parse_curve_csv(&curve_csv(&c)).unwrap(), c);
    }
}

#[test]
fn exhaustive_element_identities_at_two() {
    let d = LfDims::new(2, 2, 2, 2, 2);
    let lf = LfTensor::from_fn(d, |u, v, x, y, c| (((u * 2 + v) * 2 + x) * 2 + y) as f64 * 2.0 + c as f64).unwrap();
    let (sp, an, eh, ev, me, mp) = (lf.to_spatial(), lf.to_angular(), lf.to_epi_h(), lf.to_epi_v(), lf.to_merged(), lf.to_macpi());
    for u in 0..2 {
        for v in 0..2 {
            for x in 0..2 {
                for y in 0..2 {
                    for c in 0..2 {
                        let e = lf.at(u, v, x, y, c);
                        assert_eq!(sp.get(&[u * 2 + v, x * 2 + y, c]), e);
                        assert_eq!(an.get(&[x * 2 + y, u * 2 + v, c]), e);
                        assert_eq!(me.get(&[0, x * 2 + y, (u * 2 + v) * 2 + c]), e);
                        assert_eq!(mp.get(&[y * 2 + u, x * 2 + v, c]), e);
                        assert_eq!(eh.get(&[v * 2 + y, u * 2 + x, c]), e);
                        assert_eq!(ev.get(&[u * 2 + x, v * 2 + y, c]), e);
                    }
                }
            }
        }
    }
}
