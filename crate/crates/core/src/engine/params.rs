use std::ops::Range;

use ndarray::{ArrayView2, ArrayViewMut2};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A named, row-major block of the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamGroup {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl ParamGroup {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Flat parameter storage plus a registry of disjoint, covering groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    values: Vec<f64>,
    groups: Vec<ParamGroup>,
}

impl ParamVector {
    /// Zero-initialised vector with the given `(name, rows, cols)` groups laid
    /// out back to back.
    pub fn with_groups(spec: &[(&str, usize, usize)]) -> Self {
        let mut groups = Vec::with_capacity(spec.len());
        let mut offset = 0;
        for &(name, rows, cols) in spec {
            groups.push(ParamGroup { name: name.to_string(), offset, rows, cols });
            offset += rows * cols;
        }
        Self { values: vec![0.0; offset], groups }
    }

    /// Rebuilds from serialized parts, checking the registry.
    pub fn from_parts(values: Vec<f64>, groups: Vec<ParamGroup>) -> Result<Self> {
        let mut next = 0;
        for g in &groups {
            if g.offset != next {
                return Err(Error::Checkpoint(format!("group `{}` is not contiguous", g.name)));
            }
            next += g.len();
        }
        if next != values.len() {
            return Err(Error::Checkpoint(format!(
                "registry covers {next} values, vector has {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Checkpoint("non-finite parameter".into()));
        }
        Ok(Self { values, groups })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn groups(&self) -> &[ParamGroup] {
        &self.groups
    }

    pub fn group(&self, name: &str) -> Option<&ParamGroup> {
        self.groups.iter().find(|g| g.name == name)
    }

    pub fn view(&self, name: &str) -> Option<ArrayView2<'_, f64>> {
        let g = self.group(name)?;
        ArrayView2::from_shape((g.rows, g.cols), &self.values[g.range()]).ok()
    }

    pub fn view_mut(&mut self, name: &str) -> Option<ArrayViewMut2<'_, f64>> {
        let g = self.group(name)?.clone();
        ArrayViewMut2::from_shape((g.rows, g.cols), &mut self.values[g.range()]).ok()
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups_are_disjoint_and_covering() {
        let p = ParamVector::with_groups(&[("a", 2, 3), ("b", 1, 3), ("c", 1, 1)]);
        assert_eq!(p.len(), 10);
        assert_eq!(p.group("b").unwrap().range(), 6..9);
        assert_eq!(p.view("a").unwrap().dim(), (2, 3));
        let mut covered = vec![0; p.len()];
        for g in p.groups() {
            for i in g.range() {
                covered[i] += 1;
            }
        }
        assert!(covered.iter().all(|&c| c == 1));
    }

    #[test]
    fn from_parts_rejects_bad_registry() {
        let p = ParamVector::with_groups(&[("a", 2, 2)]);
        assert!(ParamVector::from_parts(vec![0.0; 3], p.groups().to_vec()).is_err());
        assert!(ParamVector::from_parts(vec![0.0, 1.0, f64::NAN, 0.0], p.groups().to_vec()).is_err());
        assert!(ParamVector::from_parts(vec![0.0; 4], p.groups().to_vec()).is_ok());
    }
}
