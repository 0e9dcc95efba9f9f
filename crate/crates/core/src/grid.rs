use crate::error::{Error, Result};

/// Uniform cell-centred grid. Axis 0 varies fastest in the flattened index.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    dims: Vec<usize>,
    spacing: Vec<f64>,
}

impl GridSpec {
    pub fn new(dims: Vec<usize>, spacing: Vec<f64>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidGrid("grid needs at least one axis".into()));
        }
        if dims.len() != spacing.len() {
            return Err(Error::InvalidGrid(format!(
                "{} axes but {} spacings",
                dims.len(),
                spacing.len()
            )));
        }
        if let Some(d) = dims.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidGrid(format!("axis size {d} < 2")));
        }
        if let Some(h) = spacing.iter().find(|&&h| !(h > 0.0 && h.is_finite())) {
            return Err(Error::InvalidGrid(format!("spacing {h} must be positive")));
        }
        Ok(Self { dims, spacing })
    }

    /// One-dimensional grid with `n` cells of width `h`.
    pub fn line(n: usize, h: f64) -> Result<Self> {
        Self::new(vec![n], vec![h])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn cells(&self) -> usize {
        self.dims.iter().product()
    }

    /// Flattened-index stride of each axis.
    pub fn strides(&self) -> Vec<usize> {
        let mut s = Vec::with_capacity(self.dims.len());
        let mut acc = 1;
        for &d in &self.dims {
            s.push(acc);
            acc *= d;
        }
        s
    }

    /// Multi-index of a flattened cell index.
    pub fn coords(&self, mut idx: usize, out: &mut [usize]) {
        for (c, &d) in out.iter_mut().zip(&self.dims) {
            *c = idx % d;
            idx /= d;
        }
    }
}
