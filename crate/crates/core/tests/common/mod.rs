//! Finite-difference oracles shared by the gradient tests and the acceptance suite.
#![allow(dead_code)]

use lolws_core::labelers::{LabelerSpec, Vote};
use lolws_core::losses::{
    example_objective, labeler_gradients_at, LossConfig, ObjectiveRngs, PenaltyKind, WeightScheme,
};
use lolws_core::nnet::{MlpModel, Mode};
use lolws_core::rng::{self, Stream};
use rand::Rng;

pub const STEP: f64 = 1e-6;

pub fn close(a: f64, b: f64, rtol: f64, atol: f64) -> bool {
    (a - b).abs() <= rtol * a.abs().max(b.abs()) + atol
}

pub fn random_net(seed: u64, sizes: &[usize]) -> MlpModel {
    let mut r = rng::stream(seed, Stream::Init);
    let mut m = MlpModel::new(sizes.to_vec(), 0.2, &mut r).unwrap();
    for p in m.params_mut() {
        *p += r.gen_range(-0.3..0.3);
    }
    m
}

pub fn random_input(seed: u64, d: usize) -> Vec<f64> {
    let mut r = rng::stream(seed, Stream::Data);
    (0..d)
        .map(|_| {
            if r.gen_bool(0.6) {
                r.gen_range(0.0..2.0)
            } else {
                0.0
            }
        })
        .collect()
}

pub fn perturbed(model: &MlpModel, i: usize, delta: f64) -> MlpModel {
    let mut m = model.clone();
    m.params_mut()[i] += delta;
    m
}

pub fn param_grad_check() -> Result<(), String> {
    for seed in 0..20 {
        let k = 2 + (seed as usize % 2);
        let model = random_net(seed, &[5, 4, 3, k]);
        let x = random_input(seed, 5);
        let w: Vec<f64> = (0..k).map(|c| (c as f64 + 1.0) * 0.7 - 1.0).collect();
        // L = Σ w_c h_c
        let loss = |m: &MlpModel| -> f64 {
            m.predict(&x)
                .unwrap()
                .iter()
                .zip(&w)
                .map(|(p, w)| p * w)
                .sum()
        };
        let fwd = model.forward(&x, Mode::Eval).unwrap();
        let g = model.param_grad(&fwd, &w).unwrap();
        for i in 0..model.num_params() {
            let fd = (loss(&perturbed(&model, i, STEP)) - loss(&perturbed(&model, i, -STEP)))
                / (2.0 * STEP);
            if !close(g.0[i], fd, 1e-4, 1e-9) {
                return Err(format!("net {seed} param {i}: {} vs {fd}", g.0[i]));
            }
        }
    }
    Ok(())
}

pub fn input_grad_check() -> Result<(), String> {
    for seed in 0..20 {
        let k = 2 + (seed as usize % 3);
        let model = random_net(100 + seed, &[5, 4, 3, k]);
        let x = random_input(100 + seed, 5);
        for y in 0..k {
            let g = model.input_grad(&x, y).unwrap();
            for j in 0..5 {
                let mut hi = x.clone();
                hi[j] += STEP;
                let mut lo = x.clone();
                lo[j] -= STEP;
                let fd = (model.predict(&hi).unwrap()[y] - model.predict(&lo).unwrap()[y])
                    / (2.0 * STEP);
                if !close(g[j], fd, 1e-4, 1e-9) {
                    return Err(format!("net {seed} class {y} feature {j}"));
                }
            }
        }
    }
    Ok(())
}

pub fn penalty_param_grad_check() -> Result<(), String> {
    for seed in 0..20 {
        let k = 2 + (seed as usize % 2);
        let model = random_net(200 + seed, &[5, 4, 3, k]);
        let x = random_input(200 + seed, 5);
        let mut r = rng::stream(seed, Stream::Sweep);
        let coefs: Vec<(usize, usize, f64)> = (0..6)
            .map(|_| (r.gen_range(0..5), r.gen_range(0..k), r.gen_range(-1.0..1.0)))
            .collect();
        let functional = |m: &MlpModel| -> f64 {
            coefs
                .iter()
                .map(|&(j, y, b)| b * m.input_grad(&x, y).unwrap()[j])
                .sum()
        };
        let g = model.penalty_param_grad(&x, &coefs).unwrap();
        for i in 0..model.num_params() {
            let fd = (functional(&perturbed(&model, i, STEP))
                - functional(&perturbed(&model, i, -STEP)))
                / (2.0 * STEP);
            if !close(g.0[i], fd, 1e-3, 1e-8) {
                return Err(format!("net {seed} param {i}: {} vs {fd}", g.0[i]));
            }
        }
    }
    Ok(())
}

pub fn linear_softmax_check() -> Result<(), String> {
    let (d, k) = (4, 3);
    for seed in 0..10 {
        let model = random_net(300 + seed, &[d, k]);
        let x = random_input(300 + seed, d);
        let y = seed as usize % k;
        let beta = [0.5, -1.0, 0.25, 2.0];
        let coefs: Vec<(usize, usize, f64)> = (0..d).map(|j| (j, y, beta[j])).collect();
        let g = model.penalty_param_grad(&x, &coefs).unwrap();

        let w = |a: usize, b: usize| model.params()[a * d + b];
        let p = model.predict(&x).unwrap();
        let u: Vec<f64> = (0..k)
            .map(|c| (0..d).map(|j| beta[j] * w(c, j)).sum())
            .collect();
        let pu: f64 = p.iter().zip(&u).map(|(a, b)| a * b).sum();
        let ds_dp: Vec<f64> = (0..k)
            .map(|c| if c == y { u[y] - pu } else { 0.0 } - p[y] * u[c])
            .collect();
        let delta = |a: usize| -> f64 {
            if a == y {
                1.0
            } else {
                0.0
            }
        };
        for a in 0..k {
            let ds_dz: f64 = (0..k)
                .map(|c| ds_dp[c] * p[c] * (if c == a { 1.0 } else { 0.0 } - p[a]))
                .sum();
            let ds_du = p[y] * (delta(a) - p[a]);
            for b in 0..d {
                let expected = ds_dz * x[b] + ds_du * beta[b];
                if !close(g.0[a * d + b], expected, 1e-10, 1e-13) {
                    return Err(format!("net {seed} W[{a},{b}]"));
                }
            }
            if !close(g.0[d * k + a], ds_dz, 1e-10, 1e-13) {
                return Err(format!("net {seed} b[{a}]"));
            }
        }
    }
    Ok(())
}

pub fn full_objective_check() -> Result<(), String> {
    let kinds = [
        PenaltyKind::Square,
        PenaltyKind::Linear,
        PenaltyKind::Exponential,
    ];
    for seed in 0..20u64 {
        let kind = kinds[seed as usize % 3];
        let d = 6;
        let model = random_net(400 + seed, &[d, 4, 3, 2]);
        let x: Vec<f64> = random_input(400 + seed, d)
            .iter()
            .map(|v| if *v > 0.0 { 1.0 } else { 0.0 })
            .collect();
        let specs = vec![
            LabelerSpec::keyword_any("a", vec![0, 1], 1),
            LabelerSpec::keyword_any("b", vec![2, 3], 0),
            LabelerSpec::keyword_any("c", vec![4], 1),
        ];
        let votes: Vec<Vote> = specs
            .iter()
            .map(|s| s.apply(&lolws_core::data::SparseFeatures::from_dense(&x)))
            .collect();
        if votes.iter().all(|v| v.is_abstain()) {
            continue;
        }
        let cfg = LossConfig {
            penalty: kind,
            alpha: 0.1,
            threshold: 3.0,
            smoothing_samples: 3,
            smoothing_epsilon: if seed % 2 == 0 { 0.0 } else { 0.2 },
            ..Default::default()
        };
        let weights = WeightScheme {
            kind: lolws_core::losses::Weighting::Coverage,
            weights: vec![0.5, 1.0, 0.25],
        };
        let grads = labeler_gradients_at(&specs, &x, &votes, &cfg, 2).unwrap();
        let eval = |m: &MlpModel| {
            let mut s = rng::stream(seed, Stream::Smoothing);
            example_objective(
                m,
                &x,
                &votes,
                &grads,
                &cfg,
                &weights,
                ObjectiveRngs {
                    dropout: None,
                    smoothing: &mut s,
                },
            )
            .unwrap()
        };
        let (loss, g) = eval(&model);
        if (loss.value - (loss.classification_part + 0.1 * loss.penalty_part)).abs() >= 1e-12 {
            return Err(format!(
                "seed {seed}: value is not classification + α·penalty"
            ));
        }
        for i in 0..model.num_params() {
            let fd = (eval(&perturbed(&model, i, STEP)).0.value
                - eval(&perturbed(&model, i, -STEP)).0.value)
                / (2.0 * STEP);
            if !close(g.0[i], fd, 1e-3, 1e-8) {
                return Err(format!(
                    "seed {seed} {kind:?} param {i}: {} vs {fd}",
                    g.0[i]
                ));
            }
        }
    }
    Ok(())
}
