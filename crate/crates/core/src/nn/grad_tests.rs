//! Finite-difference checks of every layer backward pass, on seeded
//! random instances. Inputs are registered as parameters too so the
//! input gradients get verified alongside the weight gradients.

use crate::nn::gradcheck::{grad_check, DEFAULT_STEP};
use crate::nn::layers::*;
use crate::nn::params::{GradStore, ParameterStore};
use crate::nn::tensor::{dot, Tensor};

fn weighting(seed: u64, n: usize) -> Vec<f64> {
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

#[test]
fn lstm_cell_gradients_match_central_differences() {
    let h_dim = 5;
    let x_dim = 4;
    let mut store = ParameterStore::new(21);
    store.add_uniform("w", &[4 * h_dim, x_dim + h_dim]).unwrap();
    store.add_uniform("b", &[4 * h_dim]).unwrap();
    store.add_uniform("x", &[x_dim]).unwrap();
    store.add_uniform("h_prev", &[h_dim]).unwrap();
    store.add_uniform("c_prev", &[h_dim]).unwrap();
    let rh = weighting(1, h_dim);
    let rc = weighting(2, h_dim);

    let loss = |s: &ParameterStore| -> f64 {
        let (h, c, _) = lstm_cell_forward(
            s.by_name("x").unwrap().data(),
            s.by_name("h_prev").unwrap().data(),
            s.by_name("c_prev").unwrap().data(),
            s.by_name("w").unwrap(),
            s.by_name("b").unwrap(),
        )
        .unwrap();
        dot(&h, &rh) + dot(&c, &rc)
    };

    let mut grads = GradStore::zeros_like(&store);
    {
        let (_, _, cache) = lstm_cell_forward(
            store.by_name("x").unwrap().data(),
            store.by_name("h_prev").unwrap().data(),
            store.by_name("c_prev").unwrap().data(),
            store.by_name("w").unwrap(),
            store.by_name("b").unwrap(),
        )
        .unwrap();
        let w = store.by_name("w").unwrap().clone();
        let mut dx = vec![0.0; x_dim];
        let mut dh_prev = vec![0.0; h_dim];
        let mut dc_prev = vec![0.0; h_dim];
        let ids: Vec<_> = ["w", "b", "x", "h_prev", "c_prev"]
            .iter()
            .map(|n| store.id(n).unwrap())
            .collect();
        {
            // split the grad store borrows: w and b first
            let mut dw = Tensor::zeros(&[4 * h_dim, x_dim + h_dim]);
            let mut db = Tensor::zeros(&[4 * h_dim]);
            lstm_cell_backward(&cache, &w, &rh, &rc, &mut dw, &mut db, &mut dx, &mut dh_prev, &mut dc_prev);
            *grads.get_mut(ids[0]) = dw;
            *grads.get_mut(ids[1]) = db;
        }
        grads.get_mut(ids[2]).data_mut().copy_from_slice(&dx);
        grads.get_mut(ids[3]).data_mut().copy_from_slice(&dh_prev);
        grads.get_mut(ids[4]).data_mut().copy_from_slice(&dc_prev);
    }

    let report = grad_check(&mut store, &grads, loss, DEFAULT_STEP, 3);
    assert!(
        report.max_error() < 1e-5,
        "worst: {:?}",
        report.worst()
    );
}

#[test]
fn bilstm_sequence_gradients_match_central_differences() {
    let h_dim = 4;
    let x_dim = 3;
    let steps = 5;
    let mut store = ParameterStore::new(33);
    store.add_uniform("wf", &[4 * h_dim, x_dim + h_dim]).unwrap();
    store.add_uniform("bf", &[4 * h_dim]).unwrap();
    store.add_uniform("wb", &[4 * h_dim, x_dim + h_dim]).unwrap();
    store.add_uniform("bb", &[4 * h_dim]).unwrap();
    store.add_uniform("inputs", &[steps, x_dim]).unwrap();
    let r_out = weighting(4, steps * 2 * h_dim);
    let r_final = weighting(5, 2 * h_dim);

    let loss = |s: &ParameterStore| -> f64 {
        let run = bilstm_forward(
            s.by_name("inputs").unwrap(),
            s.by_name("wf").unwrap(),
            s.by_name("bf").unwrap(),
            s.by_name("wb").unwrap(),
            s.by_name("bb").unwrap(),
        )
        .unwrap();
        dot(run.outputs.data(), &r_out) + dot(&run.final_state, &r_final)
    };

    let mut grads = GradStore::zeros_like(&store);
    {
        let run = bilstm_forward(
            store.by_name("inputs").unwrap(),
            store.by_name("wf").unwrap(),
            store.by_name("bf").unwrap(),
            store.by_name("wb").unwrap(),
            store.by_name("bb").unwrap(),
        )
        .unwrap();
        let d_out = Tensor::from_vec(&[steps, 2 * h_dim], r_out.clone()).unwrap();
        let mut dw_f = Tensor::zeros(&[4 * h_dim, x_dim + h_dim]);
        let mut db_f = Tensor::zeros(&[4 * h_dim]);
        let mut dw_b = Tensor::zeros(&[4 * h_dim, x_dim + h_dim]);
        let mut db_b = Tensor::zeros(&[4 * h_dim]);
        let d_in = bilstm_backward(
            &run,
            store.by_name("wf").unwrap(),
            store.by_name("wb").unwrap(),
            Some(&d_out),
            Some(&r_final),
            &mut dw_f,
            &mut db_f,
            &mut dw_b,
            &mut db_b,
        );
        *grads.get_mut(store.id("wf").unwrap()) = dw_f;
        *grads.get_mut(store.id("bf").unwrap()) = db_f;
        *grads.get_mut(store.id("wb").unwrap()) = dw_b;
        *grads.get_mut(store.id("bb").unwrap()) = db_b;
        *grads.get_mut(store.id("inputs").unwrap()) = d_in;
    }

    let report = grad_check(&mut store, &grads, loss, DEFAULT_STEP, 6);
    assert!(report.max_error() < 1e-5, "worst: {:?}", report.worst());
}

#[test]
fn conv_maxpool_gradients_match_central_differences() {
    let d = 4;
    let steps = 7;
    let n_f = 3;
    let mut store = ParameterStore::new(48);
    store.add_uniform("seq", &[steps, d]).unwrap();
    for width in [3usize, 4, 5] {
        store
            .add_uniform(&format!("conv{width}.w"), &[n_f, width * d])
            .unwrap();
        store
            .add_uniform(&format!("conv{width}.b"), &[n_f])
            .unwrap();
    }
    let r = weighting(7, 3 * n_f);

    let loss = |s: &ParameterStore| -> f64 {
        let seq = s.by_name("seq").unwrap();
        let mut acc = 0.0;
        for (wi, width) in [3usize, 4, 5].iter().enumerate() {
            let (pooled, _) = conv_maxpool_forward(
                seq,
                s.by_name(&format!("conv{width}.w")).unwrap(),
                s.by_name(&format!("conv{width}.b")).unwrap(),
                *width,
            )
            .unwrap();
            acc += dot(&pooled, &r[wi * n_f..(wi + 1) * n_f]);
        }
        acc
    };

    let mut grads = GradStore::zeros_like(&store);
    {
        let seq = store.by_name("seq").unwrap().clone();
        let mut d_seq = Tensor::zeros(&[steps, d]);
        for (wi, width) in [3usize, 4, 5].iter().enumerate() {
            let w = store.by_name(&format!("conv{width}.w")).unwrap().clone();
            let b = store.by_name(&format!("conv{width}.b")).unwrap().clone();
            let (_, cache) = conv_maxpool_forward(&seq, &w, &b, *width).unwrap();
            let mut dw = Tensor::zeros(w.shape());
            let mut db = Tensor::zeros(b.shape());
            conv_maxpool_backward(
                &cache,
                &seq,
                &w,
                &r[wi * n_f..(wi + 1) * n_f],
                &mut dw,
                &mut db,
                &mut d_seq,
            );
            *grads.get_mut(store.id(&format!("conv{width}.w")).unwrap()) = dw;
            *grads.get_mut(store.id(&format!("conv{width}.b")).unwrap()) = db;
        }
        *grads.get_mut(store.id("seq").unwrap()) = d_seq;
    }

    let report = grad_check(&mut store, &grads, loss, DEFAULT_STEP, 8);
    assert!(report.max_error() < 1e-4, "worst: {:?}", report.worst());
}

#[test]
fn embedding_gradients_match_central_differences() {
    // repeated ids: upstream rows must sum into the shared embedding row
    let v = 6;
    let d = 3;
    let ids = [2usize, 4, 2, 1];
    let mut store = ParameterStore::new(52);
    store.add_uniform("emb", &[v, d]).unwrap();
    let r = weighting(9, ids.len() * d);

    let loss = |s: &ParameterStore| -> f64 {
        let out = embed_forward(&ids, s.by_name("emb").unwrap()).unwrap();
        dot(out.data(), &r)
    };

    let mut grads = GradStore::zeros_like(&store);
    let upstream = Tensor::from_vec(&[ids.len(), d], r.clone()).unwrap();
    embed_backward(&ids, &upstream, grads.get_mut(store.id("emb").unwrap()));

    let report = grad_check(&mut store, &grads, loss, DEFAULT_STEP, 10);
    assert!(report.max_error() < 1e-6, "worst: {:?}", report.worst());
}

#[test]
fn affine_and_softmax_chain_matches_central_differences() {
    let d_in = 5;
    let d_out = 4;
    let mut store = ParameterStore::new(61);
    store.add_uniform("w", &[d_out, d_in]).unwrap();
    store.add_uniform("b", &[d_out]).unwrap();
    store.add_uniform("x", &[d_in]).unwrap();
    let target = 2usize;

    let loss = |s: &ParameterStore| -> f64 {
        let mut out = vec![0.0; d_out];
        affine_forward(
            s.by_name("x").unwrap().data(),
            s.by_name("w").unwrap(),
            s.by_name("b").unwrap(),
            &mut out,
        );
        softmax_xent(&out, target).unwrap().0
    };

    let mut grads = GradStore::zeros_like(&store);
    {
        let mut out = vec![0.0; d_out];
        affine_forward(
            store.by_name("x").unwrap().data(),
            store.by_name("w").unwrap(),
            store.by_name("b").unwrap(),
            &mut out,
        );
        let (_, mut d_logits) = softmax_xent(&out, target).unwrap();
        d_logits[target] -= 1.0;
        let w = store.by_name("w").unwrap().clone();
        let x = store.by_name("x").unwrap().clone();
        let mut dx = vec![0.0; d_in];
        let mut dw = Tensor::zeros(&[d_out, d_in]);
        let mut db = Tensor::zeros(&[d_out]);
        affine_backward(x.data(), &w, &d_logits, &mut dw, &mut db, &mut dx);
        *grads.get_mut(store.id("w").unwrap()) = dw;
        *grads.get_mut(store.id("b").unwrap()) = db;
        grads
            .get_mut(store.id("x").unwrap())
            .data_mut()
            .copy_from_slice(&dx);
    }

    let report = grad_check(&mut store, &grads, loss, DEFAULT_STEP, 11);
    assert!(report.max_error() < 1e-6, "worst: {:?}", report.worst());
}
