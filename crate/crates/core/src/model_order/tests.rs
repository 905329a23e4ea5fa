use super::*;
use crate::channel::{synth_tensor, Direction, Mpc, MpcParamSet, SystemConfig};
use crate::initializer::{Activation, LayerSpec, Tensor};
use proptest::prelude::*;
use std::collections::BTreeMap;
use std::f64::consts::TAU;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn dft_col(n: usize, k: usize) -> Vec<Complex64> {
    (0..n).map(|i| Complex64::from_polar(1.0, TAU * (i * k) as f64 / n as f64)).collect()
}

fn outer_sum(terms: &[(Complex64, Vec<Complex64>, Vec<Complex64>, Vec<Complex64>)]) -> ChannelTensor {
    let (a, b, cc) = (terms[0].1.len(), terms[0].2.len(), terms[0].3.len());
    ChannelTensor::from_fn(a, b, cc, |i, j, k| terms.iter().map(|(w, x, y, z)| w * x[i] * y[j] * z[k]).sum())
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Singular values from the eigenvalues of the Gram matrix of an unfolding
/// whose columns run in plain (non-cyclic) index order.
fn gram_oracle(h: &ChannelTensor, mode: usize) -> Vec<f64> {
    let (a, b, cc) = h.shape();
    let dims = [a, b, cc];
    let n = dims[mode];
    let mut g = DMatrix::<Complex64>::zeros(n, n);
    for r in 0..n {
        for s in 0..n {
            let mut acc = c(0.0, 0.0);
            for i in 0..a {
                for j in 0..b {
                    for k in 0..cc {
                        let mut ir = [i, j, k];
                        let mut is = [i, j, k];
                        ir[mode] = r;
                        is[mode] = s;
                        if [i, j, k][mode] != 0 {
                            continue;
                        }
                        acc += h.get(ir[0], ir[1], ir[2]) * h.get(is[0], is[1], is[2]).conj();
                    }
                }
            }
            g[(r, s)] = acc;
        }
    }
    let mut ev: Vec<f64> = g.symmetric_eigen().eigenvalues.iter().map(|&x| x.max(0.0).sqrt()).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

#[test]
fn rank_one_has_single_value_per_mode() {
    let a = vec![c(1.0, 0.5), c(-0.3, 0.2), c(0.0, 1.0)];
    let b = vec![c(0.7, 0.0), c(0.1, -0.4), c(0.2, 0.2), c(1.0, 1.0)];
    let cc = vec![c(0.5, 0.5), c(-1.0, 0.0)];
    let h = outer_sum(&[(c(1.0, 0.0), a.clone(), b.clone(), cc.clone())]);
    let sv = hosvd_singular_values(&h).unwrap();
    let expect = norm(&a) * norm(&b) * norm(&cc);
    for v in &sv.values {
        assert!((v[0] - expect).abs() < 1e-12 * expect);
        assert!(v[1..].iter().all(|&x| x < 1e-12 * expect));
    }
    assert!(!sv.degenerate);
    assert_eq!(sv.tensor_shape, [3, 4, 2]);
}

#[test]
fn orthogonal_terms_match_weights_and_gram_oracle() {
    let weights = [3.0, 2.0, 0.5];
    let terms: Vec<_> = weights
        .iter()
        .enumerate()
        .map(|(l, &w)| (c(w, 0.0), dft_col(5, l), dft_col(6, l + 1), dft_col(4, l)))
        .collect();
    let h = outer_sum(&terms);
    let sv = hosvd_singular_values(&h).unwrap();
    let scale = (5.0 * 6.0 * 4.0f64).sqrt();
    for d in 0..3 {
        let v = &sv.values[d];
        for (l, &w) in weights.iter().enumerate() {
            assert!((v[l] - w * scale).abs() < 1e-10 * scale, "mode {d} value {l}");
        }
        assert!(v[3..].iter().all(|&x| x < 1e-10 * scale));
        let oracle = gram_oracle(&h, d);
        for (x, y) in v.iter().zip(&oracle) {
            assert!((x - y).abs() < 1e-6 * scale);
        }
    }
}

#[test]
fn zero_tensor_is_flagged() {
    let sv = hosvd_singular_values(&ChannelTensor::zeros(3, 4, 5)).unwrap();
    assert!(sv.degenerate);
    assert!(sv.values.iter().all(|v| v.iter().all(|&x| x == 0.0)));
    assert_eq!(select_model_order(&sv, -30.0), 1);
    assert!(model_order_features(&sv, &[0, 1, 2]).iter().all(|&x| x == 0.0));
}

#[test]
fn empty_tensor_is_domain_error() {
    assert!(matches!(hosvd_singular_values(&ChannelTensor::zeros(0, 4, 5)), Err(Error::Domain(_))));
}

#[test]
fn rank_one_selects_one() {
    let h = outer_sum(&[(c(2.0, 0.0), dft_col(4, 1), dft_col(5, 2), dft_col(3, 0))]);
    assert_eq!(select_model_order(&hosvd_singular_values(&h).unwrap(), -30.0), 1);
}

#[test]
fn equal_values_select_full_length() {
    // superdiagonal tensor: every unfolding has n unit singular values
    let n = 5;
    let h = ChannelTensor::from_fn(n, n, n, |i, j, k| if i == j && j == k { c(1.0, 0.0) } else { c(0.0, 0.0) });
    let sv = hosvd_singular_values(&h).unwrap();
    assert_eq!(select_model_order(&sv, -30.0), n);
}

#[test]
fn lower_median_across_modes() {
    let sv = ModeSingularValues {
        values: [vec![1.0, 0.5, 0.2, 1e-3], vec![1.0, 1e-4, 1e-4], vec![1.0, 0.9, 0.8, 0.7]],
        tensor_shape: [4, 3, 4],
        degenerate: false,
    };
    // counts above −30 dB: 3, 1, 4
    assert_eq!(select_model_order(&sv, -30.0), 3);
    assert_eq!(select_model_order_modes(&sv, -30.0, &[1, 2]), 1);
    assert_eq!(select_model_order_modes(&sv, -30.0, &[2]), 4);
}

/// Three paths with distinct directions, delays ≥ T_s apart, amplitudes
/// within 10 dB and distinct phase rates over 16 instants.
fn three_path_channel() -> ChannelTensor {
    let cfg = SystemConfig::default();
    let ts = cfg.sample_period();
    let paths = [(0.8 * ts, 1.0, 0.3, 0.9), (2.1 * ts, 0.5, 2.0, -0.4), (3.6 * ts, 0.35, 4.0, 0.15)];
    let dirs = [
        Direction { elevation: 0.12, azimuth: -0.8 },
        Direction { elevation: 0.2, azimuth: 0.25 },
        Direction { elevation: 0.15, azimuth: 0.7 },
    ];
    let thetas: Vec<MpcParamSet> = (0..16)
        .map(|t| {
            let mpcs = paths.iter().map(|&(tau, a, p, w)| Mpc::new(tau, a, p + w * t as f64)).collect();
            MpcParamSet::new(mpcs, t)
        })
        .collect();
    synth_tensor(&thetas, &dirs, &cfg).unwrap()
}

#[test]
fn three_separated_paths_select_three() {
    let sv = hosvd_singular_values(&three_path_channel()).unwrap();
    assert_eq!(select_model_order(&sv, -25.0), 3);
    assert_eq!(sv.tensor_shape, [64, 50, 16]);
}

fn classifier(classes: usize, kernel: impl Fn(usize, usize) -> f32) -> WeightBundle {
    let n = 3 * FEATURES_PER_MODE;
    let layers = vec![
        LayerSpec::Flatten { name: "flatten".into() },
        LayerSpec::Dense { name: "out".into(), units: classes, activation: Activation::Linear },
    ];
    let data = (0..n * classes).map(|i| kernel(i / classes, i % classes)).collect();
    let mut t = BTreeMap::new();
    t.insert("out.kernel".to_string(), Tensor { shape: vec![n, classes], data });
    t.insert("out.bias".to_string(), Tensor { shape: vec![classes], data: vec![0.0; classes] });
    WeightBundle::new(MODEL_ORDER_ARCH, classes, (n, 1), layers, t).unwrap()
}

#[test]
fn crafted_classifier_returns_encoded_class() {
    // class c scores feature 1 + c of mode 0
    let w = classifier(4, |i, c| if i == c + 1 { 1.0 } else { 0.0 });
    let sv = ModeSingularValues {
        values: [vec![4.0, 0.0, 3.0, 0.0], vec![1.0], vec![1.0]],
        tensor_shape: [4, 1, 1],
        degenerate: false,
    };
    assert_eq!(nn_model_order(&sv, &w).unwrap(), 2);
    assert_eq!(nn_model_order(&sv, &w).unwrap(), 2);
}

#[test]
fn classifier_input_mismatch_is_format_error() {
    let w = classifier(4, |_, _| 0.0);
    let sv = hosvd_singular_values(&outer_sum(&[(c(1.0, 0.0), dft_col(2, 0), dft_col(2, 0), dft_col(2, 0))])).unwrap();
    assert!(matches!(nn_model_order_modes(&sv, &w, &[0, 1]), Err(Error::Format(_))));
    let cnn = WeightBundle::mpc_cnn_with(1, 8, |_, _| 0.0).unwrap();
    assert!(matches!(nn_model_order(&sv, &cnn), Err(Error::Format(_))));
}

#[test]
fn features_are_normalized_and_padded() {
    let sv = ModeSingularValues {
        values: [vec![2.0, 1.0], vec![5.0; 10], vec![0.0, 0.0]],
        tensor_shape: [2, 10, 2],
        degenerate: false,
    };
    let f = model_order_features(&sv, &[0, 1, 2]);
    assert_eq!(f.len(), 24);
    assert_eq!(&f[..3], &[1.0, 0.5, 0.0]);
    assert!(f[8..16].iter().all(|&x| x == 1.0));
    assert!(f[16..].iter().all(|&x| x == 0.0));
}

#[test]
fn features_csv_layout() {
    let mut out = Vec::new();
    write_features_csv(&mut out, &[(Some(2), vec![1.0, 0.25]), (None, vec![1.0, 0.0])]).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "label,f0,f1");
    assert_eq!(lines[1], "2,1e0,2.5e-1");
    assert_eq!(lines[2], ",1e0,0e0");
    assert!(write_features_csv(Vec::new(), &[(None, vec![1.0]), (None, vec![1.0, 2.0])]).is_err());
}

fn arb_tensor() -> impl Strategy<Value = ChannelTensor> {
    (1usize..5, 1usize..5, 1usize..5).prop_flat_map(|(a, b, cc)| {
        prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), a * b * cc).prop_map(move |v| {
            ChannelTensor::from_vec(a, b, cc, v.into_iter().map(|(re, im)| c(re, im)).collect()).unwrap()
        })
    })
}

/// Unitary `n × n` matrix from the QR factorization of a seeded matrix.
fn unitary(n: usize, seed: &[f64]) -> DMatrix<Complex64> {
    let m = DMatrix::from_fn(n, n, |i, j| {
        let k = 2 * (i * n + j);
        c(seed[k % seed.len()] + (i == j) as u8 as f64, seed[(k + 1) % seed.len()])
    });
    m.qr().q()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mode_energies_agree(h in arb_tensor()) {
        let sv = hosvd_singular_values(&h).unwrap();
        let e = h.norm_sqr();
        for v in &sv.values {
            let s: f64 = v.iter().map(|x| x * x).sum();
            prop_assert!((s - e).abs() <= 1e-8 * e.max(1e-300));
            prop_assert!(v.windows(2).all(|w| w[0] >= w[1]) && v.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn unitary_along_one_mode_keeps_values(
        h in arb_tensor(),
        seed in prop::collection::vec(-1.0..1.0f64, 8),
        mode in 0usize..3,
    ) {
        let (a, b, cc) = h.shape();
        let dims = [a, b, cc];
        let u = unitary(dims[mode], &seed);
        let g = ChannelTensor::from_fn(a, b, cc, |i, j, k| {
            let idx = [i, j, k];
            (0..dims[mode])
                .map(|r| {
                    let mut src = idx;
                    src[mode] = r;
                    u[(idx[mode], r)] * h.get(src[0], src[1], src[2])
                })
                .sum()
        });
        let (s1, s2) = (hosvd_singular_values(&h).unwrap(), hosvd_singular_values(&g).unwrap());
        let scale = h.norm_sqr().sqrt().max(1e-300);
        for d in 0..3 {
            for (x, y) in s1.values[d].iter().zip(&s2.values[d]) {
                prop_assert!((x - y).abs() <= 1e-8 * scale);
            }
        }
    }

    #[test]
    fn selection_ignores_positive_scaling(h in arb_tensor(), k in 1e-3..1e3f64, floor in -40.0..-5.0f64) {
        let a = select_model_order(&hosvd_singular_values(&h).unwrap(), floor);
        let b = select_model_order(&hosvd_singular_values(&h.scaled(c(k, 0.0))).unwrap(), floor);
        prop_assert_eq!(a, b);
    }
}

#[test]
fn order_scenario_is_reproducible_and_shaped() {
    let cfg = SystemConfig::default();
    let ts = cfg.sample_period();
    let theta = MpcParamSet::new(vec![Mpc::new(1.0 * ts, 1.0, 0.2), Mpc::new(3.0 * ts, 0.6, 1.0)], 0);
    let scn = OrderScenario { n_instants: 8, ..Default::default() };
    let a = scn.tensor(&theta, 4, &cfg).unwrap();
    assert_eq!(a.shape(), (cfg.n_antennas(), cfg.m_prb, 8));
    assert_eq!(a, scn.tensor(&theta, 4, &cfg).unwrap());
    assert_ne!(a, scn.tensor(&theta, 5, &cfg).unwrap());
    let clean = OrderScenario { snr_db: None, ..scn.clone() };
    let sv = hosvd_singular_values(&clean.tensor(&theta, 4, &cfg).unwrap()).unwrap();
    // two paths: exactly two nonzero values per mode up to rounding
    for v in &sv.values {
        assert!(v[1] > 1e-3 * v[0]);
        assert!(v.get(2).map_or(true, |&x| x < 1e-9 * v[0]));
    }
    assert_eq!(select_model_order(&sv, clean.noise_floor_db), 2);
}
