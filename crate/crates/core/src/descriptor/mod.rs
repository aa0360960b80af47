//! Per-frame feature vectors.
//!
//! Descriptors come from two places: the built-in whole-image HOG encoder
//! ([`hog`]) and externally computed features read from `SVPR1` files
//! ([`io`]). Either way the result is a [`DescriptorSet`] that carries the
//! mean per-frame encoding time used by the compute-cost metrics.

pub mod hog;
pub mod io;

use crate::error::{Error, Result};

pub use hog::{encode_hog, encode_set, HogParams};
pub use io::{export_descriptors, import_descriptors, Manifest};

/// A fixed-length feature vector with its cached Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    values: Vec<f32>,
    l2_norm: f64,
}

impl Descriptor {
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "descriptor component {pos} is not finite ({})",
                values[pos]
            )));
        }
        let l2_norm = values
            .iter()
            .map(|&v| f64::from(v) * f64::from(v))
            .sum::<f64>()
            .sqrt();
        Ok(Self { values, l2_norm })
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Descriptors for one traverse, all of the same dimensionality.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    technique_name: String,
    descriptors: Vec<Descriptor>,
    encode_time_per_frame: f64,
}

impl DescriptorSet {
    pub fn new(
        technique_name: impl Into<String>,
        descriptors: Vec<Descriptor>,
        encode_time_per_frame: f64,
    ) -> Result<Self> {
        let Some(first) = descriptors.first() else {
            return Err(Error::InvalidArgument("descriptor set is empty".into()));
        };
        let dim = first.dim();
        if let Some(bad) = descriptors.iter().find(|d| d.dim() != dim) {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: bad.dim(),
            });
        }
        if !(encode_time_per_frame >= 0.0 && encode_time_per_frame.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "encode time must be finite and >= 0, got {encode_time_per_frame}"
            )));
        }
        Ok(Self {
            technique_name: technique_name.into(),
            descriptors,
            encode_time_per_frame,
        })
    }

    pub fn technique_name(&self) -> &str {
        &self.technique_name
    }

    pub fn descriptors(&self) -> &[Descriptor] {
        &self.descriptors
    }

    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.descriptors[0].dim()
    }

    /// Mean encoding time per frame, in seconds.
    pub fn encode_time_per_frame(&self) -> f64 {
        self.encode_time_per_frame
    }

    pub fn with_encode_time(mut self, seconds: f64) -> Result<Self> {
        if !(seconds >= 0.0 && seconds.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "encode time must be finite and >= 0, got {seconds}"
            )));
        }
        self.encode_time_per_frame = seconds;
        Ok(self)
    }

    pub fn with_technique_name(mut self, name: impl Into<String>) -> Self {
        self.technique_name = name.into();
        self
    }
}
