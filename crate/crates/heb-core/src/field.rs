//! Canonical complex state vectors.
//!
//! A [`CanonicalField`] stores one complex amplitude per mode. The real part
//! is the canonical coordinate and the imaginary part the (rescaled) canonical
//! momentum, so phase conjugation of a value is exactly a momentum flip and
//! therefore the time-reversal operation for every propagator in this crate.
//!
//! Modes are partitioned into named contiguous regions tagged as evaluation,
//! learning or ancilla. The partition is validated at construction: every
//! index belongs to exactly one region.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::HebError;

pub type C64 = Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    Evaluation,
    Learning,
    Ancilla,
}

/// A contiguous range of modes with a name and a role.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Region {
    pub name: String,
    pub kind: RegionKind,
    pub start: usize,
    pub len: usize,
    /// Optional grid shape `(width, length)` with `width * length == len`.
    pub shape: Option<(usize, usize)>,
}

impl Region {
    pub fn new(name: &str, kind: RegionKind, start: usize, len: usize) -> Self {
        Self { name: name.to_string(), kind, start, len, shape: None }
    }

    pub fn grid(name: &str, kind: RegionKind, start: usize, width: usize, length: usize) -> Self {
        Self { name: name.to_string(), kind, start, len: width * length, shape: Some((width, length)) }
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CanonicalField {
    values: Vec<C64>,
    regions: Vec<Region>,
}

impl CanonicalField {
    /// Build a zero-initialized field from a region list. The regions must
    /// tile `0..n` without gaps or overlap.
    pub fn new(regions: Vec<Region>) -> Result<Self, HebError> {
        let mut sorted: Vec<&Region> = regions.iter().collect();
        sorted.sort_by_key(|r| r.start);
        let mut cursor = 0usize;
        for r in &sorted {
            if r.len == 0 {
                return Err(HebError::Layout(format!("region '{}' is empty", r.name)));
            }
            if let Some((w, l)) = r.shape {
                if w * l != r.len {
                    return Err(HebError::Layout(format!("region '{}' shape mismatch", r.name)));
                }
            }
            if r.start != cursor {
                return Err(HebError::Layout(format!(
                    "region '{}' starts at {} but {} expected (partition must be total and disjoint)",
                    r.name, r.start, cursor
                )));
            }
            cursor = r.start + r.len;
        }
        let mut names: Vec<&str> = regions.iter().map(|r| r.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != regions.len() {
            return Err(HebError::Layout("duplicate region name".into()));
        }
        Ok(Self { values: vec![C64::ZERO; cursor], regions })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn region(&self, name: &str) -> Result<&Region, HebError> {
        self.regions
            .iter()
            .find(|r| r.name == name)
            .ok_or_else(|| HebError::UnknownRegion(name.to_string()))
    }

    pub fn region_values(&self, name: &str) -> Result<&[C64], HebError> {
        let r = self.region(name)?;
        Ok(&self.values[r.range()])
    }

    pub fn region_values_mut(&mut self, name: &str) -> Result<&mut [C64], HebError> {
        let r = self.region(name)?.range();
        Ok(&mut self.values[r])
    }

    /// All regions of one kind, in storage order.
    pub fn regions_of(&self, kind: RegionKind) -> impl Iterator<Item = &Region> {
        self.regions.iter().filter(move |r| r.kind == kind)
    }

    /// Elementwise phase conjugation of the whole field (time reversal).
    pub fn conjugate(&mut self) {
        for v in &mut self.values {
            v.im = -v.im;
        }
    }

    /// Phase-conjugate a single named region, leaving the rest untouched.
    pub fn conjugate_region(&mut self, name: &str) -> Result<(), HebError> {
        for v in self.region_values_mut(name)? {
            v.im = -v.im;
        }
        Ok(())
    }

    /// Phase-conjugate every region of the given kind.
    pub fn conjugate_kind(&mut self, kind: RegionKind) {
        let ranges: Vec<_> = self.regions_of(kind).map(|r| r.range()).collect();
        for range in ranges {
            for v in &mut self.values[range] {
                v.im = -v.im;
            }
        }
    }

    /// Σ|Φ|² over a region, or over the whole field when `region` is `None`.
    pub fn norm2(&self, region: Option<&str>) -> Result<f64, HebError> {
        let slice = match region {
            Some(name) => self.region_values(name)?,
            None => &self.values,
        };
        Ok(slice.iter().map(|v| v.norm_sqr()).sum())
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// L2 distance to another field of the same length.
    pub fn distance(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskRole {
    CostWeight,
    OutputWindow,
    InputWindow,
}

/// Non-negative weights over one region, e.g. the cost weight w(x).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegionMask {
    pub region: String,
    pub role: MaskRole,
    pub weights: Vec<f64>,
}

impl RegionMask {
    pub fn new(region: &str, role: MaskRole, weights: Vec<f64>) -> Result<Self, HebError> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(HebError::Layout(format!(
                "mask on region '{region}' has negative or non-finite weights"
            )));
        }
        Ok(Self { region: region.to_string(), role, weights })
    }

    pub fn validate_against(&self, field: &CanonicalField) -> Result<(), HebError> {
        let r = field.region(&self.region)?;
        if r.len != self.weights.len() {
            return Err(HebError::ShapeMismatch {
                expected: r.len,
                got: self.weights.len(),
            });
        }
        Ok(())
    }
}
