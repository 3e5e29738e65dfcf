use crate::error::{Error, Result};

/// Dense `(batch, points, features)` array of f64 in row-major order.
///
/// Point-free data (latent codes, logits) uses `points == 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub batch: usize,
    pub points: usize,
    pub features: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(batch: usize, points: usize, features: usize) -> Self {
        Self {
            batch,
            points,
            features,
            data: vec![0.0; batch * points * features],
        }
    }

    pub fn from_vec(batch: usize, points: usize, features: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != batch * points * features {
            return Err(Error::ShapeMismatch {
                context: "Tensor::from_vec".into(),
                expected: format!("{}", batch * points * features),
                got: format!("{}", data.len()),
            });
        }
        Ok(Self {
            batch,
            points,
            features,
            data,
        })
    }

    /// One row per batch entry.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let features = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != features) {
            return Err(Error::invalid("ragged rows"));
        }
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::from_vec(rows.len(), 1, features, data)
    }

    pub fn rows(&self) -> usize {
        self.batch * self.points
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.batch, self.points, self.features)
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.features..(r + 1) * self.features]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let f = self.features;
        &mut self.data[r * f..(r + 1) * f]
    }

    /// Contiguous slice of batch entry `b`.
    pub fn item(&self, b: usize) -> &[f64] {
        let len = self.points * self.features;
        &self.data[b * len..(b + 1) * len]
    }

    /// Same data viewed with a different `(points, features)` split.
    pub fn reshaped(mut self, points: usize, features: usize) -> Result<Self> {
        if points * features != self.points * self.features {
            return Err(Error::ShapeMismatch {
                context: "Tensor::reshaped".into(),
                expected: format!("{}", self.points * self.features),
                got: format!("{}", points * features),
            });
        }
        self.points = points;
        self.features = features;
        Ok(self)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
