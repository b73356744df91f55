//! Named trainable parameters with seeded initialization.
//!
//! candle's own initializers draw from an unseeded thread RNG, which would make
//! runs irreproducible; every tensor here comes from a ChaCha stream instead.

use std::collections::BTreeMap;
use std::path::Path;

use candle_core::{DType, Device, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub enum Init {
    Zeros,
    Ones,
    /// Normal(0, std), truncated at two standard deviations.
    Normal(f64),
}

#[derive(Debug)]
pub struct ParamStore {
    vars: BTreeMap<String, Var>,
    rng: ChaCha8Rng,
    device: Device,
}

impl ParamStore {
    pub fn new(seed: u64) -> Self {
        Self {
            vars: BTreeMap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            device: Device::Cpu,
        }
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    /// Returns the existing parameter `name` or creates it.
    pub fn get(&mut self, name: &str, shape: &[usize], init: Init) -> Result<Tensor> {
        if let Some(var) = self.vars.get(name) {
            if var.dims() != shape {
                return Err(Error::Validation(format!(
                    "parameter {name} has shape {:?}, expected {shape:?}",
                    var.dims()
                )));
            }
            return Ok(var.as_tensor().clone());
        }
        let n: usize = shape.iter().product();
        let values: Vec<f32> = match init {
            Init::Zeros => vec![0.0; n],
            Init::Ones => vec![1.0; n],
            Init::Normal(std) => (0..n).map(|_| self.truncated_normal() * std as f32).collect(),
        };
        let var = Var::from_tensor(&Tensor::from_vec(values, shape, &self.device)?)?;
        let tensor = var.as_tensor().clone();
        self.vars.insert(name.to_string(), var);
        Ok(tensor)
    }

    fn truncated_normal(&mut self) -> f32 {
        loop {
            // Box-Muller
            let u1: f32 = self.rng.random::<f32>().max(f32::MIN_POSITIVE);
            let u2: f32 = self.rng.random();
            let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f32::consts::PI * u2).cos();
            if z.abs() <= 2.0 {
                return z;
            }
        }
    }

    /// Trainable variables, in name order.
    pub fn vars(&self) -> Vec<Var> {
        self.vars.values().cloned().collect()
    }

    pub fn vars_with_prefix(&self, prefix: &str) -> Vec<Var> {
        self.vars
            .iter()
            .filter(|(k, _)| k.starts_with(prefix))
            .map(|(_, v)| v.clone())
            .collect()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.vars.keys().map(String::as_str)
    }

    pub fn num_params(&self, prefix: &str) -> usize {
        self.vars
            .iter()
            .filter(|(k, _)| k.starts_with(prefix))
            .map(|(_, v)| v.elem_count())
            .sum()
    }

    /// Copies every parameter's current value.
    pub fn snapshot(&self) -> Result<BTreeMap<String, Tensor>> {
        self.vars
            .iter()
            .map(|(k, v)| Ok((k.clone(), v.as_tensor().copy()?)))
            .collect()
    }

    /// Overwrites parameters present in `values`; returns how many were set.
    pub fn restore(&self, values: &BTreeMap<String, Tensor>) -> Result<usize> {
        let mut set = 0;
        for (name, value) in values {
            if let Some(var) = self.vars.get(name) {
                var.set(&value.to_dtype(DType::F32)?)?;
                set += 1;
            }
        }
        Ok(set)
    }

    /// Pre-populates parameters so later `get` calls pick them up.
    pub fn preload(&mut self, values: BTreeMap<String, Tensor>) -> Result<()> {
        for (name, value) in values {
            let var = Var::from_tensor(&value.to_dtype(DType::F32)?)?;
            self.vars.insert(name, var);
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>, prefix: &str) -> Result<()> {
        let tensors: std::collections::HashMap<String, Tensor> = self
            .vars
            .iter()
            .filter(|(k, _)| k.starts_with(prefix))
            .map(|(k, v)| (k.clone(), v.as_tensor().clone()))
            .collect();
        candle_core::safetensors::save(&tensors, path)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<BTreeMap<String, Tensor>> {
        Ok(candle_core::safetensors::load(path, &Device::Cpu)?
            .into_iter()
            .collect())
    }
}
