//! Analytic gradients against central finite differences.

use std::sync::Arc;

use ntpt_engine::{Contraction, NodeId, Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Build<'a> = dyn Fn(&mut Tape, &[NodeId]) -> NodeId + 'a;

fn loss_value(params: &[Tensor], build: &Build<'_>) -> f64 {
    let mut tape = Tape::new();
    let ids: Vec<NodeId> = params
        .iter()
        .enumerate()
        .map(|(i, p)| tape.param(&format!("p{i}"), p))
        .collect();
    let loss = build(&mut tape, &ids);
    tape.value(loss).item()
}

/// Max relative error between analytic and central-difference gradients.
fn max_rel_error(params: &[Tensor], build: &Build<'_>) -> f64 {
    let mut tape = Tape::new();
    let ids: Vec<NodeId> = params
        .iter()
        .enumerate()
        .map(|(i, p)| tape.param(&format!("p{i}"), p))
        .collect();
    let loss = build(&mut tape, &ids);
    let grads = tape.backward(loss).unwrap();
    let eps = 1e-5;
    let mut worst = 0.0f64;
    for (i, p) in params.iter().enumerate() {
        let analytic = grads.get(&format!("p{i}")).cloned().unwrap_or_else(|| Tensor::zeros(p.shape().to_vec()));
        for j in 0..p.len() {
            let mut plus = params.to_vec();
            plus[i].data_mut()[j] += eps;
            let mut minus = params.to_vec();
            minus[i].data_mut()[j] -= eps;
            let numeric = (loss_value(&plus, build) - loss_value(&minus, build)) / (2.0 * eps);
            let a = analytic.data()[j];
            let err = (a - numeric).abs() / (1e-6f64).max(a.abs() + numeric.abs());
            worst = worst.max(err);
        }
    }
    worst
}

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// Reduce any rank-2 node to a scalar with a fixed random projection so that
/// every output element contributes a distinct weight.
fn project(tape: &mut Tape, x: NodeId, seed: u64) -> NodeId {
    let shape = tape.value(x).shape().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = rand_tensor(&mut rng, &shape);
    let w = tape.leaf(w);
    let y = tape.mul(x, w).unwrap();
    let s = tape.sum_axis(y, 1).unwrap();
    tape.sum_axis(s, 0).unwrap()
}

fn add_mod(n: usize) -> Arc<Contraction> {
    let table = (0..n * n).map(|t| ((t / n + t % n) % n) as u32).collect();
    Arc::new(Contraction::new(n, vec![n, n], table).unwrap())
}

const POINTS: u64 = 100;
const TOL: f64 = 1e-4;

fn check(name: &str, shapes: &[&[usize]], build: &Build<'_>) {
    for seed in 0..POINTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed * 7919 + 1);
        let params: Vec<Tensor> = shapes.iter().map(|s| rand_tensor(&mut rng, s)).collect();
        let err = max_rel_error(&params, build);
        assert!(err < TOL, "{name}: relative error {err} at point {seed}");
    }
}

#[test]
fn matmul_gradient() {
    check("matmul", &[&[3, 4], &[4, 2]], &|t, p| {
        let y = t.matmul(p[0], p[1]).unwrap();
        project(t, y, 1)
    });
}

#[test]
fn add_mul_scale_gradients() {
    check("add/mul/scale", &[&[2, 3], &[2, 3]], &|t, p| {
        let a = t.add(p[0], p[1]).unwrap();
        let m = t.mul(a, p[1]).unwrap();
        let s = t.scale(m, -1.7).unwrap();
        project(t, s, 2)
    });
}

#[test]
fn bias_relu_gradients() {
    check("add_bias/relu", &[&[4, 3], &[3]], &|t, p| {
        let a = t.add_bias(p[0], p[1]).unwrap();
        let r = t.relu(a).unwrap();
        project(t, r, 3)
    });
}

#[test]
fn softmax_log_gradients() {
    check("softmax/log", &[&[3, 5]], &|t, p| {
        let s = t.softmax(p[0]).unwrap();
        let l = t.log(s, 1e-12).unwrap();
        project(t, l, 4)
    });
}

#[test]
fn sum_concat_gather_select_gradients() {
    check("sum/concat/gather/select", &[&[2, 3], &[2, 2]], &|t, p| {
        let c = t.concat(&[p[0], p[1]]).unwrap();
        let g = t.gather(c, &[1, 0, 1]).unwrap();
        let s0 = t.sum_axis(g, 0).unwrap();
        let s0 = t.mul(s0, s0).unwrap();
        let sel = t.select(g, &[4, 0, 2]).unwrap();
        let sel = t.mul(sel, sel).unwrap();
        let a = t.sum_axis(s0, 0).unwrap();
        let b = t.sum_axis(sel, 0).unwrap();
        t.add(a, b).unwrap()
    });
}

#[test]
fn contract_and_mix_gradients() {
    let table = add_mod(4);
    let t3 = {
        let table = (0..3 * 4 * 2).map(|t| ((t * 5 + 1) % 3) as u32).collect();
        Arc::new(Contraction::new(3, vec![3, 4, 2], table).unwrap())
    };
    check("contract", &[&[2, 4], &[2, 4], &[2, 3], &[2, 2]], &|t, p| {
        let x = t.softmax(p[0]).unwrap();
        let y = t.softmax(p[1]).unwrap();
        let z = t.contract(&table, &[x, y]).unwrap();
        let u = t.softmax(p[2]).unwrap();
        let v = t.softmax(p[3]).unwrap();
        let w = t.contract(&t3, &[u, z, v]).unwrap();
        project(t, w, 5)
    });
    check("mix", &[&[3, 2], &[3, 4], &[3, 4]], &|t, p| {
        let w = t.softmax(p[0]).unwrap();
        let m = t.mix(w, &[p[1], p[2]]).unwrap();
        project(t, m, 6)
    });
}

#[test]
fn cross_entropy_gradient_is_softmax_minus_onehot() {
    let z = Tensor::row(&[0.3, -1.2, 2.0, 0.1]);
    let k = 2;
    let mut t = Tape::new();
    let p = t.param("z", &z);
    let s = t.softmax(p).unwrap();
    let picked = t.select(s, &[k]).unwrap();
    let l = t.log(picked, 1e-12).unwrap();
    let l = t.scale(l, -1.0).unwrap();
    let loss = t.sum_axis(l, 0).unwrap();
    let g = t.backward(loss).unwrap();
    let soft = t.value(s).data().to_vec();
    for (i, (gi, si)) in g.get("z").unwrap().data().iter().zip(&soft).enumerate() {
        let expected = si - if i == k { 1.0 } else { 0.0 };
        assert!((gi - expected).abs() < 1e-12);
    }
}

#[test]
fn three_layer_mlp_gradient() {
    let shapes: [&[usize]; 7] = [&[5, 6], &[6], &[6, 6], &[6], &[6, 3], &[3], &[4, 5]];
    check("mlp", &shapes, &|t, p| {
        let mut h = p[6];
        for layer in 0..3 {
            let z = t.matmul(h, p[2 * layer]).unwrap();
            let z = t.add_bias(z, p[2 * layer + 1]).unwrap();
            h = if layer < 2 { t.relu(z).unwrap() } else { t.softmax(z).unwrap() };
        }
        let l = t.log(h, 1e-12).unwrap();
        project(t, l, 7)
    });
}

/// Random graphs of depth up to six built from the smooth primitives.
#[test]
fn random_composed_graphs() {
    for seed in 0..POINTS {
        let mut rng = ChaCha8Rng::seed_from_u64(10_000 + seed);
        let depth = rng.gen_range(1..=6);
        let ops: Vec<u8> = (0..depth).map(|_| rng.gen_range(0..7)).collect();
        let params = vec![rand_tensor(&mut rng, &[2, 3]), rand_tensor(&mut rng, &[3, 3]), rand_tensor(&mut rng, &[2, 3])];
        let table = add_mod(3);
        let build = move |t: &mut Tape, p: &[NodeId]| {
            let mut x = p[0];
            for &op in &ops {
                x = match op {
                    0 => t.matmul(x, p[1]).unwrap(),
                    1 => t.add(x, p[2]).unwrap(),
                    2 => t.mul(x, p[2]).unwrap(),
                    3 => {
                        let s = t.softmax(x).unwrap();
                        t.log(s, 1e-12).unwrap()
                    }
                    4 => {
                        let a = t.softmax(x).unwrap();
                        let b = t.softmax(p[2]).unwrap();
                        t.contract(&table, &[a, b]).unwrap()
                    }
                    5 => {
                        let w = t.softmax(p[2]).unwrap();
                        let w = t.gather(w, &[1, 0]).unwrap();
                        t.mix(w, &[x, p[2], x]).unwrap()
                    }
                    _ => t.scale(x, 0.5).unwrap(),
                };
            }
            project(t, x, seed)
        };
        let err = max_rel_error(&params, &build);
        assert!(err < TOL, "depth {depth} graph {seed}: relative error {err}");
    }
}

#[test]
fn softmax_rows_are_normalized_and_positive() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let x = Tensor::new([4, 7], (0..28).map(|_| rng.gen_range(-30.0..30.0)).collect()).unwrap();
        let mut t = Tape::new();
        let id = t.leaf(x);
        let s = t.softmax(id).unwrap();
        for r in 0..4 {
            let row = t.value(s).row_slice(r);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&v| v > 0.0));
        }
    }
}

#[test]
fn identical_inputs_give_bit_identical_results() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let a = rand_tensor(&mut rng, &[8, 16]);
        let b = rand_tensor(&mut rng, &[16, 4]);
        let mut t = Tape::new();
        let pa = t.param("a", &a);
        let pb = t.param("b", &b);
        let y = t.matmul(pa, pb).unwrap();
        let s = t.softmax(y).unwrap();
        let l = project(&mut t, s, 9);
        let g = t.backward(l).unwrap();
        (t.value(l).item().to_bits(), g.get("a").unwrap().data().iter().map(|v| v.to_bits()).collect::<Vec<_>>())
    };
    assert_eq!(run(), run());
}

#[test]
fn nan_survives_relu_and_log() {
    let mut t = Tape::new();
    let x = t.leaf(Tensor::row(&[f64::NAN, 1.0]));
    let r = t.relu(x).unwrap();
    let l = t.log(r, 1e-12).unwrap();
    assert!(t.value(l).data()[0].is_nan());
    assert_eq!(t.value(l).data()[1], 0.0);
}
