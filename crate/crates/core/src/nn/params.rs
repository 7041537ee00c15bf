use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;

/// Half-width of the uniform init range for weight matrices.
pub const INIT_RANGE: f64 = 0.08;

/// Named, shaped, versioned parameter tensors for one trainable model.
///
/// Tensors keep their insertion order (training iterates in that order);
/// lookups by name go through a side index. Shapes are fixed once added.
#[derive(Debug, Clone)]
pub struct ParameterStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    index: BTreeMap<String, usize>,
    seed: u64,
    version: u64,
}

/// Handle into a `ParameterStore`, resolved once at model construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(pub usize);

impl ParameterStore {
    pub fn new(seed: u64) -> Self {
        ParameterStore {
            names: Vec::new(),
            tensors: Vec::new(),
            index: BTreeMap::new(),
            seed,
            version: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn bump_version(&mut self) {
        self.version += 1;
    }

    pub fn set_version(&mut self, v: u64) {
        self.version = v;
    }

    pub fn add(&mut self, name: &str, tensor: Tensor) -> Result<ParamId> {
        if self.index.contains_key(name) {
            return Err(Error::Invalid(format!("duplicate parameter `{name}`")));
        }
        let id = ParamId(self.tensors.len());
        self.index.insert(name.to_string(), id.0);
        self.names.push(name.to_string());
        self.tensors.push(tensor);
        Ok(id)
    }

    /// Seeded uniform(-INIT_RANGE, INIT_RANGE) weight tensor. The draw
    /// stream is keyed to (store seed, parameter name) so adding a tensor
    /// never shifts the init of the others.
    pub fn add_uniform(&mut self, name: &str, shape: &[usize]) -> Result<ParamId> {
        self.add_uniform_range(name, shape, INIT_RANGE)
    }

    pub fn add_uniform_range(
        &mut self,
        name: &str,
        shape: &[usize],
        half_width: f64,
    ) -> Result<ParamId> {
        let mut rng = self.rng_for(name);
        let mut t = Tensor::zeros(shape);
        for v in t.data_mut() {
            *v = rng.random_range(-half_width..half_width);
        }
        self.add(name, t)
    }

    pub fn add_zeros(&mut self, name: &str, shape: &[usize]) -> Result<ParamId> {
        self.add(name, Tensor::zeros(shape))
    }

    fn rng_for(&self, name: &str) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        let digest = sha2::Sha256::digest_name_seed(name, self.seed);
        key.copy_from_slice(&digest);
        ChaCha8Rng::from_seed(key)
    }

    pub fn id(&self, name: &str) -> Result<ParamId> {
        self.index
            .get(name)
            .map(|&i| ParamId(i))
            .ok_or_else(|| Error::Invalid(format!("unknown parameter `{name}`")))
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn by_name(&self, name: &str) -> Result<&Tensor> {
        Ok(self.get(self.id(name)?))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn total_values(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    /// (name, tensor) pairs in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names
            .iter()
            .map(|n| n.as_str())
            .zip(self.tensors.iter())
    }

    /// Names sorted lexicographically — the canonical order used by the
    /// checkpoint format and gradient-check reports.
    pub fn sorted_names(&self) -> Vec<&str> {
        self.index.keys().map(|s| s.as_str()).collect()
    }

    /// SHA-256 over the little-endian payload bytes of all tensors in
    /// sorted-name order. Used to verify frozen models stay frozen.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        for name in self.index.keys() {
            let t = &self.tensors[self.index[name]];
            hasher.update(name.as_bytes());
            for v in t.data() {
                hasher.update(v.to_le_bytes());
            }
        }
        hex(&hasher.finalize())
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

// Small extension so the seeded per-name init above stays one expression.
trait DigestNameSeed {
    fn digest_name_seed(name: &str, seed: u64) -> [u8; 32];
}

impl DigestNameSeed for sha2::Sha256 {
    fn digest_name_seed(name: &str, seed: u64) -> [u8; 32] {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        hasher.update(seed.to_le_bytes());
        hasher.update(name.as_bytes());
        hasher.finalize().into()
    }
}

/// Gradient buffers aligned index-for-index with a `ParameterStore`.
#[derive(Debug, Clone)]
pub struct GradStore {
    tensors: Vec<Tensor>,
}

impl GradStore {
    pub fn zeros_like(store: &ParameterStore) -> Self {
        GradStore {
            tensors: store
                .iter()
                .map(|(_, t)| Tensor::zeros(t.shape()))
                .collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn reset(&mut self) {
        for t in &mut self.tensors {
            t.fill(0.0);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in &mut self.tensors {
            for v in t.data_mut() {
                *v *= factor;
            }
        }
    }

    pub fn global_norm(&self) -> f64 {
        let mut sq = 0.0;
        for t in &self.tensors {
            for v in t.data() {
                sq += v * v;
            }
        }
        sq.sqrt()
    }
}

/// Global-norm clipping followed by a plain SGD update.
pub fn sgd_step(
    store: &mut ParameterStore,
    grads: &GradStore,
    lr: f64,
    clip_norm: Option<f64>,
) -> Result<()> {
    if grads.tensors.len() != store.tensors.len() {
        return Err(Error::ShapeMismatch {
            op: "sgd_step",
            detail: "gradient store does not match parameter store".into(),
        });
    }
    for (i, g) in grads.tensors.iter().enumerate() {
        if !g.all_finite() {
            return Err(Error::NonFiniteGradient {
                name: store.names[i].clone(),
            });
        }
    }
    let mut scale = 1.0;
    if let Some(clip) = clip_norm {
        let norm = grads.global_norm();
        if norm > clip {
            scale = clip / norm;
        }
    }
    let step = lr * scale;
    for (t, g) in store.tensors.iter_mut().zip(&grads.tensors) {
        for (p, gv) in t.data_mut().iter_mut().zip(g.data()) {
            *p -= step * gv;
        }
    }
    store.version += 1;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_seeded_and_name_keyed() {
        let mut a = ParameterStore::new(7);
        let mut b = ParameterStore::new(7);
        a.add_uniform("w", &[3, 3]).unwrap();
        b.add_uniform("extra", &[2]).unwrap();
        b.add_uniform("w", &[3, 3]).unwrap();
        assert_eq!(a.by_name("w").unwrap(), b.by_name("w").unwrap());

        let mut c = ParameterStore::new(8);
        c.add_uniform("w", &[3, 3]).unwrap();
        assert_ne!(a.by_name("w").unwrap(), c.by_name("w").unwrap());
    }

    #[test]
    fn sgd_lr_zero_is_identity() {
        let mut store = ParameterStore::new(1);
        store.add_uniform("w", &[4]).unwrap();
        let before = store.by_name("w").unwrap().clone();
        let mut grads = GradStore::zeros_like(&store);
        grads.get_mut(ParamId(0)).data_mut()[0] = 3.0;
        sgd_step(&mut store, &grads, 0.0, None).unwrap();
        assert_eq!(&before, store.by_name("w").unwrap());
        assert_eq!(store.version(), 1);
    }

    #[test]
    fn sgd_scalar_arithmetic() {
        let mut store = ParameterStore::new(1);
        store
            .add("theta", Tensor::from_vec(&[1], vec![1.0]).unwrap())
            .unwrap();
        let mut grads = GradStore::zeros_like(&store);
        grads.get_mut(ParamId(0)).data_mut()[0] = 2.0;
        sgd_step(&mut store, &grads, 0.1, None).unwrap();
        assert!((store.by_name("theta").unwrap().data()[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn sgd_clips_global_norm() {
        let mut store = ParameterStore::new(1);
        store.add_zeros("w", &[2]).unwrap();
        let mut grads = GradStore::zeros_like(&store);
        grads.get_mut(ParamId(0)).data_mut().copy_from_slice(&[6.0, 8.0]); // norm 10
        sgd_step(&mut store, &grads, 1.0, Some(1.0)).unwrap();
        let w = store.by_name("w").unwrap().data();
        let applied = (w[0] * w[0] + w[1] * w[1]).sqrt();
        assert!((applied - 1.0).abs() < 1e-12, "applied norm {applied}");
    }

    #[test]
    fn sgd_rejects_non_finite() {
        let mut store = ParameterStore::new(1);
        store.add_zeros("bad", &[1]).unwrap();
        let mut grads = GradStore::zeros_like(&store);
        grads.get_mut(ParamId(0)).data_mut()[0] = f64::NAN;
        let err = sgd_step(&mut store, &grads, 0.1, None).unwrap_err();
        assert!(err.to_string().contains("bad"));
    }

    #[test]
    fn content_hash_tracks_values() {
        let mut store = ParameterStore::new(3);
        store.add_uniform("w", &[4]).unwrap();
        let h1 = store.content_hash();
        store.get_mut(ParamId(0)).data_mut()[0] += 1.0;
        assert_ne!(h1, store.content_hash());
    }
}
