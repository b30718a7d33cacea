use epnet::error::Error;
use epnet::tensor::gradcheck::{check_gradients, project, random_weights, GradCheckConfig};
use epnet::tensor::ops::*;
use epnet::tensor::{Shape, Tape, Tensor};
use proptest::prelude::*;

mod common;
use common::oracle::naive_conv;

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

fn rand_t(s: Shape, seed: u64) -> Tensor<f64> {
    random_weights(s, seed)
}

fn assert_rel_close(a: &[f64], b: &[f64], tol: f64) {
    assert_eq!(a.len(), b.len());
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        let scale = x.abs().max(y.abs()).max(1e-12);
        assert!((x - y).abs() / scale <= tol || (x - y).abs() < 1e-12, "index {i}: {x} vs {y}");
    }
}

#[test]
fn conv_full_overlap_center() {
    let x = Tensor::<f64>::full(Shape::new(1, 1, 3, 3), 1.0);
    let w = Tensor::<f64>::full(Shape::new(1, 1, 3, 3), 1.0);
    let y = conv2d(&x, &w, None, 1, 1).unwrap();
    assert_eq!(y.shape(), Shape::new(1, 1, 3, 3));
    assert_eq!(y.at(0, 0, 1, 1), 9.0);
}

#[test]
fn conv_identity_kernel() {
    let x = rand_t(Shape::new(2, 1, 4, 5), 9);
    let w = Tensor::<f64>::full(Shape::new(1, 1, 1, 1), 1.0);
    assert_eq!(conv2d(&x, &w, None, 1, 0).unwrap().data(), x.data());
}

#[test]
fn conv_matches_loop_oracle() {
    let x = rand_t(Shape::new(1, 2, 5, 5), 11);
    let w = rand_t(Shape::new(3, 2, 3, 3), 12);
    let y = conv2d(&x, &w, None, 1, 1).unwrap();
    assert_rel_close(y.data(), &naive_conv(&x, &w, None, 1, 1), 1e-6);

    // larger extents, strides and paddings up to 2×4×16×16
    for (stride, pad, k) in [(1, 0, 3), (2, 1, 3), (1, 2, 5), (3, 0, 1), (2, 0, 2)] {
        let x = rand_t(Shape::new(2, 4, 16, 16), 13 + stride as u64);
        let w = rand_t(Shape::new(5, 4, k, k), 17 + pad as u64);
        let b = rand_t(Shape::new(1, 5, 1, 1), 19);
        let y = conv2d(&x, &w, Some(&b), stride, pad).unwrap();
        assert_rel_close(y.data(), &naive_conv(&x, &w, Some(&b), stride, pad), 1e-6);
    }
}

#[test]
fn conv_f32_matches_f64_oracle() {
    let x = rand_t(Shape::new(1, 3, 8, 8), 21);
    let w = rand_t(Shape::new(4, 3, 3, 3), 22);
    let y = conv2d(&x.cast::<f32>(false), &w.cast::<f32>(false), None, 1, 1).unwrap();
    let oracle = naive_conv(&x, &w, None, 1, 1);
    for (a, b) in y.to_f64_vec().iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-5);
    }
}

#[test]
fn conv_shape_errors_name_axis() {
    let x = Tensor::<f64>::zeros(Shape::new(1, 2, 4, 4));
    let w = Tensor::<f64>::zeros(Shape::new(3, 3, 3, 3));
    assert!(matches!(conv2d(&x, &w, None, 1, 1), Err(Error::Dimension { axis: epnet::error::Axis::Channel, .. })));
    let w = Tensor::<f64>::zeros(Shape::new(3, 2, 7, 3));
    assert!(matches!(conv2d(&x, &w, None, 1, 1), Err(Error::Dimension { axis: epnet::error::Axis::Height, .. })));
}

#[test]
fn max_pool_matches_loop_oracle() {
    let x = rand_t(Shape::new(1, 1, 6, 6), 31);
    let y = max_pool2d(&x, 2, 2).unwrap();
    let mut oracle = vec![];
    for oy in 0..3 {
        for ox in 0..3 {
            let mut m = f64::NEG_INFINITY;
            for dy in 0..2 {
                for dx in 0..2 {
                    m = m.max(x.at(0, 0, 2 * oy + dy, 2 * ox + dx));
                }
            }
            oracle.push(m);
        }
    }
    assert_eq!(y.data(), oracle.as_slice());
}

#[test]
fn pixel_shuffle_matches_index_formula() {
    let r = 2;
    let x = rand_t(Shape::new(2, 8, 3, 3), 41);
    let y = pixel_shuffle(&x, r).unwrap();
    assert_eq!(y.shape(), Shape::new(2, 2, 6, 6));
    for n in 0..2 {
        for c in 0..2 {
            for h in 0..3 {
                for w in 0..3 {
                    for i in 0..r {
                        for j in 0..r {
                            assert_eq!(y.at(n, c, h * r + i, w * r + j), x.at(n, c * r * r + i * r + j, h, w));
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn backward_of_sum_is_ones() {
    let x = rand_t(Shape::new(2, 3, 2, 2), 51).to_leaf(true);
    sum_all(&x).backward().unwrap();
    assert!(x.grad().unwrap().iter().all(|&g| g == 1.0));
}

#[test]
fn backward_of_half_square_is_identity() {
    let x = rand_t(Shape::new(1, 2, 3, 3), 52).to_leaf(true);
    let loss = scalar_mul(&sum_all(&mul(&x, &x).unwrap()), 0.5);
    loss.backward().unwrap();
    assert_rel_close(&x.grad().unwrap(), x.data(), 1e-15);
}

#[test]
fn backward_accumulates_until_zeroed() {
    let x = rand_t(Shape::new(1, 1, 2, 2), 53).to_leaf(true);
    let loss = sum_all(&scalar_mul(&x, 3.0));
    loss.backward().unwrap();
    loss.backward().unwrap();
    assert!(x.grad().unwrap().iter().all(|&g| g == 6.0));
    x.zero_grad();
    assert!(x.grad().is_none());
}

#[test]
fn backward_requires_tape_and_scalar() {
    let x = Tensor::<f64>::scalar(1.0);
    assert!(matches!(x.backward(), Err(Error::Usage(_))));
    let y = scalar_mul(&rand_t(Shape::new(1, 1, 2, 2), 1).to_leaf(true), 2.0);
    assert!(matches!(y.backward(), Err(Error::Usage(_))));
}

#[test]
fn split_backward_routes_to_first_half() {
    let x = rand_t(Shape::new(2, 4, 2, 2), 54).to_leaf(true);
    let (a, _b) = channel_split(&x, 2).unwrap();
    sum_all(&a).backward().unwrap();
    let g = x.grad().unwrap();
    for n in 0..2 {
        for c in 0..4 {
            for p in 0..4 {
                let expect = if c < 2 { 1.0 } else { 0.0 };
                assert_eq!(g[(n * 4 + c) * 4 + p], expect);
            }
        }
    }
}

#[test]
fn tape_is_topological_and_visits_once() {
    let x = rand_t(Shape::new(1, 2, 4, 4), 55).to_leaf(true);
    let w = rand_t(Shape::new(2, 2, 3, 3), 56).to_leaf(true);
    let y = conv2d(&x, &w, None, 1, 1).unwrap();
    let z = add(&gelu(&y), &y).unwrap();
    let (a, b) = channel_split(&z, 1).unwrap();
    let cat = channel_concat(&[b, a, z.clone()]).unwrap();
    let loss = mean_all(&cat);
    let tape = Tape::record(&loss);
    assert!(tape.is_topological());
    // conv, gelu, add, split×2, concat, mean: shared nodes appear once
    assert_eq!(tape.len(), 7);
    assert_eq!(tape.op_names().last(), Some(&"mean_all"));
}

#[test]
fn softmax_rows_sum_to_one() {
    let x = scalar_mul(&rand_t(Shape::new(2, 3, 4, 7), 57), 20.0);
    for axis in 0..4 {
        let y = softmax(&x, axis).unwrap();
        assert!(y.data().iter().all(|&v| v >= 0.0));
        let s = y.shape().dims();
        let inner: usize = s[axis + 1..].iter().product();
        let outer: usize = s[..axis].iter().product();
        for o in 0..outer {
            for i in 0..inner {
                let total: f64 = (0..s[axis]).map(|k| y.data()[(o * s[axis] + k) * inner + i]).sum();
                assert!((total - 1.0).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn outputs_stay_finite() {
    let x = scalar_mul(&rand_t(Shape::new(1, 4, 6, 6), 58), 50.0).to_leaf(true);
    let g = Tensor::full(Shape::new(1, 4, 1, 1), 1.0);
    let b = Tensor::zeros(Shape::new(1, 4, 1, 1));
    let y = softmax(&layer_norm(&sigmoid(&gelu(&x)), &g, &b, 1e-5).unwrap(), 1).unwrap();
    assert!(y.all_finite());
    project(&y, 1).unwrap().backward().unwrap();
    assert!(x.grad().unwrap().iter().all(|v| v.is_finite()));
}

#[test]
fn deterministic_kernels() {
    let run = || {
        let x = rand_t(Shape::new(2, 4, 12, 12), 60).cast::<f32>(false);
        let w = rand_t(Shape::new(6, 4, 3, 3), 61).cast::<f32>(false);
        let y = gelu(&conv2d(&x, &w, None, 1, 1).unwrap());
        softmax(&y, 3).unwrap().to_vec()
    };
    let (a, b) = (run(), run());
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
}

// ---------------------------------------------------------------------------
// finite-difference checks, five seeds per operator

fn fd(inputs: &[Tensor<f64>], seed: u64, f: impl Fn(&[Tensor<f64>]) -> epnet::Result<Tensor<f64>>) {
    let cfg = GradCheckConfig { seed, ..Default::default() };
    let report = check_gradients(inputs, &cfg, f).unwrap();
    assert!(report.passed(), "seed {seed}: {:?} (max rel {})", &report.failures[..report.failures.len().min(5)], report.max_rel_error);
}

#[test]
fn fd_conv2d() {
    for seed in SEEDS {
        let x = rand_t(Shape::new(2, 3, 6, 5), seed);
        let w = rand_t(Shape::new(4, 3, 3, 3), seed + 100);
        let b = rand_t(Shape::new(1, 4, 1, 1), seed + 200);
        fd(&[x.clone(), w.clone(), b.clone()], seed, |t| project(&conv2d(&t[0], &t[1], Some(&t[2]), 2, 1)?, seed));
        fd(&[x, rand_t(Shape::new(2, 3, 1, 1), seed)], seed, |t| project(&conv2d(&t[0], &t[1], None, 1, 0)?, seed));
    }
}

#[test]
fn fd_elementwise() {
    for seed in SEEDS {
        let s = Shape::new(2, 3, 3, 3);
        let a = scalar_mul(&rand_t(s, seed), 3.0).detach();
        let b = rand_t(s, seed + 10);
        let gate = rand_t(Shape::new(2, 3, 1, 1), seed + 20);
        fd(&[a.clone(), b.clone()], seed, |t| project(&add(&t[0], &t[1])?, seed));
        fd(&[a.clone(), b.clone()], seed, |t| project(&sub(&t[0], &t[1])?, seed));
        fd(&[a.clone(), b.clone()], seed, |t| project(&mul(&t[0], &t[1])?, seed));
        fd(&[a.clone(), gate], seed, |t| project(&mul(&t[0], &t[1])?, seed));
        fd(&[a.clone()], seed, |t| project(&scalar_mul(&t[0], -0.7), seed));
        fd(&[a.clone()], seed, |t| project(&gelu(&t[0]), seed));
        fd(&[a.clone()], seed, |t| project(&sigmoid(&t[0]), seed));
        // keep relu inputs away from the kink
        let away: Vec<f64> = a.data().iter().map(|&v| if v.abs() < 0.05 { v + 0.1 } else { v }).collect();
        fd(&[Tensor::from_vec(s, away).unwrap()], seed, |t| project(&relu(&t[0]), seed));
    }
}

#[test]
fn fd_layout_ops() {
    for seed in SEEDS {
        let x = rand_t(Shape::new(2, 8, 4, 6), seed);
        fd(&[x.clone()], seed, |t| {
            let (a, b) = channel_split(&t[0], 3)?;
            project(&channel_concat(&[b, scalar_mul(&a, 2.0), a.clone()])?, seed)
        });
        fd(&[x.clone()], seed, |t| project(&pixel_shuffle(&t[0], 2)?, seed));
        fd(&[x.clone()], seed, |t| project(&window_reverse(&window_partition(&t[0], 2)?, 2, 4, 6)?, seed));
        fd(&[x.clone()], seed, |t| project(&window_partition(&t[0], 2)?, seed));
        fd(&[x.clone()], seed, |t| project(&cyclic_shift(&t[0], -1, 2), seed));
        fd(&[x.clone()], seed, |t| project(&pad_reflect(&t[0], 3, 5), seed));
        fd(&[x.clone()], seed, |t| project(&crop(&t[0], 3, 4)?, seed));
        fd(&[x.clone()], seed, |t| project(&upsample_nearest(&t[0], 9, 11)?, seed));
        fd(&[x.clone()], seed, |t| project(&transpose_hw(&t[0]), seed));
        fd(&[x], seed, |t| project(&reshape(&t[0], Shape::new(4, 4, 6, 4))?, seed));
    }
}

#[test]
fn fd_pooling() {
    for seed in SEEDS {
        let x = rand_t(Shape::new(2, 3, 5, 4), seed);
        fd(&[x], seed, |t| project(&global_avg_pool(&t[0])?, seed));
        // distinct, well-separated values so no perturbation changes an argmax
        let s = Shape::new(1, 2, 7, 7);
        let mut vals: Vec<f64> = (0..s.numel()).map(|i| i as f64 * 0.05).collect();
        let perm = rand_t(Shape::new(1, 1, 1, s.numel()), seed);
        let mut order: Vec<usize> = (0..s.numel()).collect();
        order.sort_by(|&i, &j| perm.data()[i].total_cmp(&perm.data()[j]));
        let shuffled: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
        vals.copy_from_slice(&shuffled);
        fd(&[Tensor::from_vec(s, vals).unwrap()], seed, |t| project(&max_pool2d(&t[0], 3, 2)?, seed));
    }
}

#[test]
fn fd_attention_primitives() {
    for seed in SEEDS {
        let a = rand_t(Shape::new(2, 3, 4, 5), seed);
        let b = rand_t(Shape::new(2, 3, 5, 2), seed + 1);
        fd(&[a.clone(), b], seed, |t| project(&matmul(&t[0], &t[1])?, seed));
        fd(&[scalar_mul(&a, 3.0).detach()], seed, |t| project(&softmax(&t[0], 3)?, seed));
        fd(&[a.clone()], seed, |t| project(&softmax(&t[0], 1)?, seed));
        let x = rand_t(Shape::new(2, 6, 3, 2), seed + 2);
        let g = rand_t(Shape::new(1, 6, 1, 1), seed + 3);
        let bt = rand_t(Shape::new(1, 6, 1, 1), seed + 4);
        fd(&[x, g, bt], seed, |t| project(&layer_norm(&t[0], &t[1], &t[2], 1e-5)?, seed));
        fd(&[a.clone()], seed, |t| Ok(mean_all(&mul(&t[0], &t[0])?)));
    }
}


// ---------------------------------------------------------------------------
// round-trip properties

fn tensor_strategy() -> impl Strategy<Value = (Shape, Vec<f64>)> {
    (1usize..3, 1usize..5, 1usize..4, 1usize..4).prop_flat_map(|(n, c, hb, wb)| {
        let s = Shape::new(n, c, hb * 4, wb * 4);
        (Just(s), prop::collection::vec(-10.0f64..10.0, s.numel()))
    })
}

proptest! {
    #[test]
    fn window_round_trip((s, v) in tensor_strategy(), w in prop::sample::select(vec![1usize, 2, 4])) {
        let x = Tensor::from_vec(s, v).unwrap();
        let back = window_reverse(&window_partition(&x, w).unwrap(), w, s.h, s.w).unwrap();
        prop_assert_eq!(back.data(), x.data());
    }

    #[test]
    fn shift_inverse((s, v) in tensor_strategy(), dy in -9isize..9, dx in -9isize..9) {
        let x = Tensor::from_vec(s, v).unwrap();
        let back = cyclic_shift(&cyclic_shift(&x, dy, dx), -dy, -dx);
        prop_assert_eq!(back.data(), x.data());
    }

    #[test]
    fn split_concat_round_trip((s, v) in tensor_strategy(), cut in 1usize..8) {
        prop_assume!(s.c > 1);
        let cut = 1 + cut % (s.c - 1);
        let x = Tensor::from_vec(s, v).unwrap();
        let (a, b) = channel_split(&x, cut).unwrap();
        let joined = channel_concat(&[a.clone(), b.clone()]).unwrap();
        prop_assert_eq!(joined.data(), x.data());
        let (a2, b2) = channel_split(&joined, cut).unwrap();
        prop_assert_eq!(a2.data(), a.data());
        prop_assert_eq!(b2.data(), b.data());
    }
}

#[test]
fn window_partition_round_trip_fixed() {
    let x = rand_t(Shape::new(1, 3, 8, 8), 70);
    let win = window_partition(&x, 4).unwrap();
    assert_eq!(win.shape(), Shape::new(4, 3, 4, 4));
    assert_eq!(window_reverse(&win, 4, 8, 8).unwrap().data(), x.data());
}
