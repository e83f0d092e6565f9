use super::ops::*;
use super::{check_gradients, Adam, Parameter, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

#[test]
fn matmul_identity() {
    let i = Tensor::from_vec(&[2, 2], vec![1.0, 0.0, 0.0, 1.0]);
    let b = Tensor::from_vec(&[2, 2], vec![3.0, 4.0, 5.0, 6.0]);
    assert_eq!(matmul(&i, &b).unwrap().to_vec(), vec![3.0, 4.0, 5.0, 6.0]);
}

#[test]
fn matmul_forced() {
    let a = Tensor::from_vec(&[1, 2], vec![1.0, 2.0]);
    let b = Tensor::from_vec(&[2, 1], vec![3.0, 4.0]);
    assert_eq!(matmul(&a, &b).unwrap().to_vec(), vec![11.0]);
}

#[test]
fn matmul_matches_triple_loop_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let av = rand_vec(&mut rng, 12);
    let bv = rand_vec(&mut rng, 8);
    let a = Tensor::from_vec(&[3, 4], av.clone());
    let b = Tensor::from_vec(&[4, 2], bv.clone());
    let c = matmul(&a, &b).unwrap().to_vec();
    // naive triple-loop oracle
    for i in 0..3 {
        for j in 0..2 {
            let mut s = 0.0;
            for k in 0..4 {
                s += av[i * 4 + k] * bv[k * 2 + j];
            }
            assert!((c[i * 2 + j] - s).abs() <= 1e-12);
        }
    }
}

#[test]
fn matmul_shape_mismatch_reports_both_shapes() {
    let a = Tensor::zeros(&[2, 3]);
    let b = Tensor::zeros(&[2, 3]);
    let err = matmul(&a, &b).unwrap_err().to_string();
    assert!(err.contains("[2, 3]"), "{err}");
}

#[test]
fn matmul_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let av = rand_vec(&mut rng, 30);
    let bv = rand_vec(&mut rng, 42);
    let a = Tensor::from_vec(&[5, 6], av);
    let b = Tensor::from_vec(&[6, 7], bv);
    let c1 = matmul(&a, &b).unwrap().to_vec();
    let c2 = matmul(&a, &b).unwrap().to_vec();
    assert_eq!(c1, c2);
}

#[test]
fn softmax_symmetry() {
    let x = Tensor::from_vec(&[2], vec![0.0, 0.0]);
    let y = softmax(&x, 0).unwrap().to_vec();
    assert_eq!(y, vec![0.5, 0.5]);
}

#[test]
fn softmax_no_overflow() {
    let x = Tensor::from_vec(&[2], vec![1000.0, 1000.0]);
    let y = softmax(&x, 0).unwrap().to_vec();
    assert!((y[0] - 0.5).abs() < 1e-12 && (y[1] - 0.5).abs() < 1e-12);
}

#[test]
fn softmax_analytic() {
    let x = Tensor::from_vec(&[2], vec![0.0, 3.0f64.ln()]);
    let y = softmax(&x, 0).unwrap().to_vec();
    assert!((y[0] - 0.25).abs() < 1e-12 && (y[1] - 0.75).abs() < 1e-12);
}

#[test]
fn softmax_rows_sum_to_one_and_shift_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let xv = rand_vec(&mut rng, 20);
    let shifted: Vec<f64> = xv.iter().map(|v| v + 17.0).collect();
    let y = softmax(&Tensor::from_vec(&[4, 5], xv), 1).unwrap().to_vec();
    let ys = softmax(&Tensor::from_vec(&[4, 5], shifted), 1)
        .unwrap()
        .to_vec();
    for r in 0..4 {
        let sum: f64 = y[r * 5..(r + 1) * 5].iter().sum();
        assert!((sum - 1.0).abs() <= 1e-9);
    }
    for (a, b) in y.iter().zip(&ys) {
        assert!((a - b).abs() <= 1e-12);
    }
}

#[test]
fn softmax_invalid_axis() {
    let x = Tensor::zeros(&[2, 2]);
    assert!(softmax(&x, 2).is_err());
}

#[test]
fn attention_single_pair() {
    let q = Tensor::from_vec(&[1, 2], vec![1.0, 2.0]);
    let k = Tensor::from_vec(&[1, 2], vec![1.0, 2.0]);
    let v = Tensor::from_vec(&[1, 1], vec![7.0]);
    assert_eq!(attention(&q, &k, &v).unwrap().to_vec(), vec![7.0]);
}

#[test]
fn attention_identical_keys_average() {
    let q = Tensor::from_vec(&[1, 2], vec![0.3, -0.4]);
    let k = Tensor::from_vec(&[2, 2], vec![1.0, 2.0, 1.0, 2.0]);
    let v = Tensor::from_vec(&[2, 1], vec![2.0, 4.0]);
    let out = attention(&q, &k, &v).unwrap().to_vec();
    assert!((out[0] - 3.0).abs() < 1e-12);
}

#[test]
fn attention_matches_formula_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let qv = rand_vec(&mut rng, 6);
    let kv = rand_vec(&mut rng, 9);
    let vv = rand_vec(&mut rng, 6);
    let out = attention(
        &Tensor::from_vec(&[2, 3], qv.clone()),
        &Tensor::from_vec(&[3, 3], kv.clone()),
        &Tensor::from_vec(&[3, 2], vv.clone()),
    )
    .unwrap()
    .to_vec();
    // explicit per-row softmax oracle
    let dk = 3.0f64.sqrt();
    for i in 0..2 {
        let mut scores = [0.0; 3];
        for j in 0..3 {
            for c in 0..3 {
                scores[j] += qv[i * 3 + c] * kv[j * 3 + c];
            }
            scores[j] /= dk;
        }
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        for c in 0..2 {
            let mut expect = 0.0;
            for j in 0..3 {
                expect += exps[j] / z * vv[j * 2 + c];
            }
            assert!((out[i * 2 + c] - expect).abs() <= 1e-12);
        }
    }
}

#[test]
fn attention_dim_mismatch() {
    let q = Tensor::zeros(&[2, 3]);
    let k = Tensor::zeros(&[2, 4]);
    let v = Tensor::zeros(&[2, 2]);
    assert!(attention(&q, &k, &v).is_err());
}

#[test]
fn adam_zero_gradient_is_fixed_point() {
    let p = Parameter::new("w", &[2], vec![1.5, -2.5]);
    p.tensor.accumulate_grad(&[0.0, 0.0]);
    let mut opt = Adam::new(0.1);
    opt.step(&[p.clone()]).unwrap();
    assert_eq!(p.tensor.to_vec(), vec![1.5, -2.5]);
}

#[test]
fn adam_first_step_bias_corrected() {
    let p = Parameter::new("w", &[1], vec![1.0]);
    p.tensor.accumulate_grad(&[1.0]);
    let mut opt = Adam::new(0.1);
    opt.step(&[p.clone()]).unwrap();
    let got = p.tensor.to_vec()[0];
    assert!((got - 0.9).abs() < 1e-6, "got {got}");
}

#[test]
fn adam_missing_gradient_errors() {
    let p = Parameter::new("w", &[1], vec![1.0]);
    let mut opt = Adam::new(0.1);
    assert!(opt.step(&[p]).is_err());
}

#[test]
fn adam_trajectory_matches_scalar_oracle() {
    // standalone scalar Adam oracle on f(x) = x^2 (grad 2x)
    let (lr, b1, b2, eps) = (0.05, 0.9, 0.999, 1e-8);
    let mut x_ref = 0.7f64;
    let (mut m, mut v) = (0.0f64, 0.0f64);
    let mut trajectory = Vec::new();
    for t in 1..=10 {
        let g = 2.0 * x_ref;
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        let mhat = m / (1.0 - b1.powi(t));
        let vhat = v / (1.0 - b2.powi(t));
        x_ref -= lr * mhat / (vhat.sqrt() + eps);
        trajectory.push(x_ref);
    }

    let p = Parameter::new("x", &[1], vec![0.7]);
    let mut opt = Adam::with_betas(lr, b1, b2, eps);
    for step in 0..10 {
        let x = p.tensor.to_vec()[0];
        p.tensor.accumulate_grad(&[2.0 * x]);
        opt.step(std::slice::from_ref(&p)).unwrap();
        assert!(
            (p.tensor.to_vec()[0] - trajectory[step]).abs() <= 1e-12,
            "step {step}"
        );
    }
}

#[test]
fn gradcheck_square() {
    let p = Parameter::new("theta", &[1], vec![3.0]);
    let err = check_gradients(
        |ps| mul(&ps[0].tensor, &ps[0].tensor),
        std::slice::from_ref(&p),
        1e-6,
    )
    .unwrap();
    assert!(err <= 1e-9, "err {err}");
    // analytic gradient of theta^2 at 3 is 6
    let t = Tensor::variable(&[1], vec![3.0]);
    let y = mul(&t, &t).unwrap();
    y.backward().unwrap();
    assert!((t.grad().unwrap()[0] - 6.0).abs() <= 1e-9);
}

#[test]
fn gradcheck_cross_entropy_softmax_matmul() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = Parameter::new("a", &[4, 4], rand_vec(&mut rng, 16));
    let b = Tensor::from_vec(&[4, 4], rand_vec(&mut rng, 16));
    let targets = vec![0, 1, 2, 3];
    let err = check_gradients(
        |ps| cross_entropy_logits(&matmul(&ps[0].tensor, &b)?, &targets),
        std::slice::from_ref(&a),
        1e-6,
    )
    .unwrap();
    assert!(err <= 1e-4, "err {err}");
}

#[test]
fn gradcheck_attention_head() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let q = Parameter::new("q", &[3, 8], rand_vec(&mut rng, 24));
    let k = Parameter::new("k", &[3, 8], rand_vec(&mut rng, 24));
    let v = Parameter::new("v", &[3, 8], rand_vec(&mut rng, 24));
    let params = vec![q, k, v];
    let err = check_gradients(
        |ps| Ok(sum_all(&attention(&ps[0].tensor, &ps[1].tensor, &ps[2].tensor)?)),
        &params,
        1e-6,
    )
    .unwrap();
    assert!(err <= 1e-4, "err {err}");
}

#[test]
fn gradcheck_layer_norm_and_misc_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = Parameter::new("x", &[3, 5], rand_vec(&mut rng, 15));
    let g = Parameter::new("g", &[5], rand_vec(&mut rng, 5));
    let b = Parameter::new("b", &[5], rand_vec(&mut rng, 5));
    let params = vec![x, g, b];
    let err = check_gradients(
        |ps| {
            let ln = layer_norm(&ps[0].tensor, &ps[1].tensor, &ps[2].tensor, 1e-5)?;
            let r = relu(&ln);
            let sliced = slice_cols(&r, 1, 3)?;
            let cat = concat_cols(&sliced, &sliced)?;
            Ok(mean_all(&cat))
        },
        &params,
        1e-6,
    )
    .unwrap();
    assert!(err <= 1e-4, "err {err}");
}

#[test]
fn gradcheck_gather_scatter_spmm() {
    use std::rc::Rc;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = Parameter::new("x", &[4, 3], rand_vec(&mut rng, 12));
    let rows = Parameter::new("rows", &[2, 3], rand_vec(&mut rng, 6));
    let edges = Rc::new(vec![
        (0u32, 1u32, 0.5),
        (1, 0, 0.5),
        (0, 0, 0.5),
        (1, 1, 0.5),
        (2, 2, 1.0),
        (3, 3, 1.0),
    ]);
    let base = Tensor::zeros(&[4, 3]);
    let params = vec![x, rows];
    let err = check_gradients(
        |ps| {
            let g = gather_rows(&ps[0].tensor, &[0, 2, 2, 3])?;
            let s = scatter_rows(&base, &[1, 3], &ps[1].tensor)?;
            let p = spmm(&edges, 4, &s);
            Ok(add(&sum_all(&g), &sum_all(&p))?)
        },
        &params,
        1e-6,
    )
    .unwrap();
    assert!(err <= 1e-4, "err {err}");
}

#[test]
fn gradcheck_binary_cross_entropy() {
    let p = Parameter::new("p", &[2, 2], vec![0.7, 0.3, 0.2, 0.8]);
    let labels = vec![0usize, 1];
    for two_term in [true, false] {
        let err = check_gradients(
            |ps| binary_cross_entropy(&ps[0].tensor, &labels, two_term, 1e-12),
            std::slice::from_ref(&p),
            1e-6,
        )
        .unwrap();
        assert!(err <= 1e-6, "two_term={two_term} err {err}");
    }
}

#[test]
fn backward_accumulates_through_shared_nodes() {
    let x = Tensor::variable(&[1], vec![2.0]);
    let y = mul(&x, &x).unwrap(); // x^2
    let z = add(&y, &y).unwrap(); // 2 x^2, dz/dx = 4x = 8
    z.backward().unwrap();
    assert!((x.grad().unwrap()[0] - 8.0).abs() < 1e-12);
}

#[test]
fn detach_blocks_gradients() {
    let x = Tensor::variable(&[1], vec![2.0]);
    let d = x.detach();
    let y = mul(&d, &d).unwrap();
    assert!(!y.needs_grad());
}
