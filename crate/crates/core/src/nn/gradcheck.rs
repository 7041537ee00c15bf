//! Central-difference gradient verification against a model's analytic
//! gradients. The loss closure must be a deterministic pure function of
//! the parameter store.

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::nn::params::{GradStore, ParameterStore};

/// Above this many total parameter values, only a seeded subsample of
/// coordinates is probed.
pub const SUBSAMPLE_THRESHOLD: usize = 10_000;
pub const SUBSAMPLE_SIZE: usize = 2_000;
pub const DEFAULT_STEP: f64 = 1e-5;

/// Relative error uses `|a - n| / max(|a|, |n|, 0.01)`: a strict relative
/// check for healthy gradient magnitudes, an absolute check (x100) for
/// near-zero ones where central differences are noise-dominated.
fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-2)
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub step: f64,
    /// (parameter name, max relative error over probed coordinates)
    pub per_param: Vec<(String, f64)>,
    pub probed: usize,
}

impl GradCheckReport {
    pub fn max_error(&self) -> f64 {
        self.per_param
            .iter()
            .map(|(_, e)| *e)
            .fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&(String, f64)> {
        self.per_param
            .iter()
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
    }
}

pub fn grad_check<F>(
    store: &mut ParameterStore,
    analytic: &GradStore,
    mut loss_fn: F,
    step: f64,
    seed: u64,
) -> GradCheckReport
where
    F: FnMut(&ParameterStore) -> f64,
{
    let total = store.total_values();
    let mut coords: Vec<(usize, usize)> = Vec::new(); // (param index, value index)
    for (pi, (_, tensor)) in store.iter().enumerate() {
        for vi in 0..tensor.len() {
            coords.push((pi, vi));
        }
    }
    if total > SUBSAMPLE_THRESHOLD {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        coords.shuffle(&mut rng);
        coords.truncate(SUBSAMPLE_SIZE);
    }

    let names: Vec<String> = store.iter().map(|(n, _)| n.to_string()).collect();
    let mut max_err = vec![0.0f64; names.len()];
    let probed = coords.len();
    for (pi, vi) in coords {
        let id = crate::nn::params::ParamId(pi);
        let original = store.get(id).data()[vi];

        store.get_mut(id).data_mut()[vi] = original + step;
        let up = loss_fn(store);
        store.get_mut(id).data_mut()[vi] = original - step;
        let down = loss_fn(store);
        store.get_mut(id).data_mut()[vi] = original;

        let numeric = (up - down) / (2.0 * step);
        let a = analytic.get(id).data()[vi];
        let err = relative_error(a, numeric);
        if err > max_err[pi] {
            max_err[pi] = err;
        }
    }
    let mut per_param: Vec<(String, f64)> = names.into_iter().zip(max_err).collect();
    per_param.sort_by(|a, b| a.0.cmp(&b.0));
    GradCheckReport {
        step,
        per_param,
        probed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::tensor::{dot, Tensor};

    #[test]
    fn linear_model_is_exact_to_rounding() {
        // loss = w . x with fixed x: gradient is x, exact for central diffs
        let x = [0.3, -1.7, 2.2, 0.05];
        let mut store = ParameterStore::new(0);
        store.add_uniform("w", &[4]).unwrap();
        let mut grads = GradStore::zeros_like(&store);
        grads
            .get_mut(crate::nn::params::ParamId(0))
            .data_mut()
            .copy_from_slice(&x);
        let report = grad_check(
            &mut store,
            &grads,
            |s: &ParameterStore| dot(s.by_name("w").unwrap().data(), &x),
            DEFAULT_STEP,
            0,
        );
        assert!(report.max_error() < 1e-9, "err {}", report.max_error());
    }

    #[test]
    fn detects_wrong_gradient() {
        let x = [1.0, 2.0];
        let mut store = ParameterStore::new(0);
        store.add_uniform("w", &[2]).unwrap();
        let mut grads = GradStore::zeros_like(&store);
        grads
            .get_mut(crate::nn::params::ParamId(0))
            .data_mut()
            .copy_from_slice(&[1.0, -2.0]); // wrong sign on coord 1
        let report = grad_check(
            &mut store,
            &grads,
            |s: &ParameterStore| dot(s.by_name("w").unwrap().data(), &x),
            DEFAULT_STEP,
            0,
        );
        assert!(report.max_error() > 0.5);
    }

    #[test]
    fn subsamples_large_stores() {
        let mut store = ParameterStore::new(0);
        store.add_uniform("big", &[200, 100]).unwrap(); // 20k values
        let grads = GradStore::zeros_like(&store);
        let report = grad_check(&mut store, &grads, |_| 0.0, DEFAULT_STEP, 7);
        assert_eq!(report.probed, SUBSAMPLE_SIZE);
        let _ = Tensor::zeros(&[1]);
    }
}
