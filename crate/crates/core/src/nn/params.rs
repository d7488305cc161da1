use std::collections::BTreeMap;

use candle_core::{Device, Shape, Tensor, Var};
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::raster::DTYPE;
use crate::rng::SeededRng;

/// Named trainable parameters and non-trainable buffers of one network.
///
/// Names are kept in a sorted map so iteration order (and therefore seeded
/// initialization, optimizer state and checkpoints) is stable.
#[derive(Debug, Clone)]
pub struct ParamStore {
    device: Device,
    params: BTreeMap<String, Var>,
    buffers: BTreeMap<String, Var>,
}

impl ParamStore {
    pub fn new(device: Device) -> Self {
        Self {
            device,
            params: BTreeMap::new(),
            buffers: BTreeMap::new(),
        }
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    pub fn trainable(&self) -> impl Iterator<Item = (&String, &Var)> {
        self.params.iter()
    }

    pub fn buffers(&self) -> impl Iterator<Item = (&String, &Var)> {
        self.buffers.iter()
    }

    pub fn trainable_vars(&self) -> Vec<Var> {
        self.params.values().cloned().collect()
    }

    /// Total number of trainable scalars.
    pub fn num_params(&self) -> usize {
        self.params.values().map(|v| v.elem_count()).sum()
    }

    pub fn num_params_with_prefix(&self, prefix: &str) -> usize {
        self.params
            .iter()
            .filter(|(k, _)| k.starts_with(prefix))
            .map(|(_, v)| v.elem_count())
            .sum()
    }

    fn insert(map: &mut BTreeMap<String, Var>, name: String, t: Tensor) -> Result<Var> {
        if map.contains_key(&name) {
            return Err(invalid(format!("duplicate parameter {name}")));
        }
        let var = Var::from_tensor(&t)?;
        map.insert(name, var.clone());
        Ok(var)
    }

    pub(crate) fn add_param(&mut self, name: String, t: Tensor) -> Result<Var> {
        Self::insert(&mut self.params, name, t)
    }

    pub(crate) fn add_buffer(&mut self, name: String, t: Tensor) -> Result<Var> {
        Self::insert(&mut self.buffers, name, t)
    }

    /// Parameters and buffers in one sorted list, buffers prefixed `buffer:`.
    pub fn named_tensors(&self) -> Vec<(String, Tensor)> {
        self.params
            .iter()
            .map(|(k, v)| (k.clone(), v.as_tensor().clone()))
            .chain(
                self.buffers
                    .iter()
                    .map(|(k, v)| (format!("buffer:{k}"), v.as_tensor().clone())),
            )
            .collect()
    }

    /// Overwrites every parameter and buffer from `tensors`; all names must be present.
    pub fn load_named(&self, tensors: &BTreeMap<String, Tensor>) -> Result<()> {
        let pairs = self
            .params
            .iter()
            .map(|(k, v)| (k.clone(), v))
            .chain(self.buffers.iter().map(|(k, v)| (format!("buffer:{k}"), v)));
        for (name, var) in pairs {
            let t = tensors
                .get(&name)
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))?;
            if t.dims() != var.dims() {
                return Err(Error::Checkpoint(format!(
                    "tensor {name} has shape {:?}, expected {:?}",
                    t.dims(),
                    var.dims()
                )));
            }
            var.set(&t.to_dtype(DTYPE)?)?;
        }
        Ok(())
    }

    /// FNV-1a over names and the bit patterns of every parameter and buffer.
    pub fn checksum(&self) -> Result<u64> {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        for (name, t) in self.named_tensors() {
            eat(name.as_bytes());
            for v in t.flatten_all()?.to_vec1::<f64>()? {
                eat(&v.to_bits().to_le_bytes());
            }
        }
        Ok(h)
    }

    /// Deep copy with fresh storage, detached from `self`.
    pub fn snapshot(&self) -> Result<Self> {
        let copy = |m: &BTreeMap<String, Var>| -> Result<BTreeMap<String, Var>> {
            m.iter()
                .map(|(k, v)| Ok((k.clone(), Var::from_tensor(&v.as_tensor().copy()?)?)))
                .collect()
        };
        Ok(Self {
            device: self.device.clone(),
            params: copy(&self.params)?,
            buffers: copy(&self.buffers)?,
        })
    }
}

/// Hands out seeded, named parameters while a network is being built.
pub struct Builder<'a> {
    store: &'a mut ParamStore,
    rng: &'a mut SeededRng,
    prefix: String,
}

impl<'a> Builder<'a> {
    pub fn new(store: &'a mut ParamStore, rng: &'a mut SeededRng) -> Self {
        Self {
            store,
            rng,
            prefix: String::new(),
        }
    }

    pub fn device(&self) -> Device {
        self.store.device.clone()
    }

    fn full_name(&self, name: &str) -> String {
        if self.prefix.is_empty() {
            name.to_string()
        } else {
            format!("{}.{}", self.prefix, name)
        }
    }

    /// Runs `f` with `segment` appended to the name prefix.
    pub fn scoped<T>(&mut self, segment: &str, f: impl FnOnce(&mut Builder) -> T) -> T {
        let saved = self.prefix.clone();
        self.prefix = self.full_name(segment);
        let out = f(self);
        self.prefix = saved;
        out
    }

    /// Uniform in `±1/sqrt(fan_in)`, where `fan_in` is the product of all but
    /// the leading dimension.
    pub fn uniform_weight(&mut self, name: &str, shape: impl Into<Shape>) -> Result<Var> {
        let shape: Shape = shape.into();
        let fan_in: usize = shape.dims().iter().skip(1).product::<usize>().max(1);
        let bound = 1.0 / (fan_in as f64).sqrt();
        let values: Vec<f64> = (0..shape.elem_count())
            .map(|_| self.rng.random_range(-bound..=bound))
            .collect();
        let t = Tensor::from_vec(values, shape, &self.store.device)?;
        let name = self.full_name(name);
        self.store.add_param(name, t)
    }

    pub fn constant(&mut self, name: &str, shape: impl Into<Shape>, value: f64) -> Result<Var> {
        let t = Tensor::full(value, shape, &self.store.device)?.to_dtype(DTYPE)?;
        let name = self.full_name(name);
        self.store.add_param(name, t)
    }

    pub fn buffer(&mut self, name: &str, t: Tensor) -> Result<Var> {
        let name = self.full_name(name);
        self.store.add_buffer(name, t)
    }

    /// Random unit vector (used to seed power iteration).
    pub fn unit_vector(&mut self, len: usize) -> Result<Tensor> {
        let mut v: Vec<f64> = (0..len)
            .map(|_| self.rng.random_range(-1.0..=1.0))
            .collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
        v.iter_mut().for_each(|x| *x /= norm);
        Ok(Tensor::from_vec(v, len, &self.store.device)?)
    }
}
