use std::io::{Read, Write};

use ndarray::{Array2, ArrayView2};

use crate::codec;
use crate::error::{Error, Result};

/// Signed log compression `sign(x) ln(1 + |x|)` followed by per-column
/// min-max scaling to `[0, 1]` with bounds fitted on training rows.
/// For counts this is plain `ln(1 + x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

fn compress(x: f64) -> f64 {
    x.signum() * x.abs().ln_1p()
}

impl FeatureScaler {
    pub fn fit(train: ArrayView2<f64>) -> Result<Self> {
        if train.nrows() == 0 {
            return Err(Error::InsufficientRows {
                needed: 1,
                available: 0,
            });
        }
        let mut min = vec![f64::INFINITY; train.ncols()];
        let mut max = vec![f64::NEG_INFINITY; train.ncols()];
        for row in train.outer_iter() {
            for (j, &v) in row.iter().enumerate() {
                let c = compress(v);
                min[j] = min[j].min(c);
                max[j] = max[j].max(c);
            }
        }
        Ok(FeatureScaler { min, max })
    }

    pub fn width(&self) -> usize {
        self.min.len()
    }

    /// Constant training columns map to 0.
    pub fn transform(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.width() {
            return Err(Error::shape(self.width(), x.ncols()));
        }
        let mut out = x.to_owned();
        for mut row in out.outer_iter_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                let span = self.max[j] - self.min[j];
                *v = if span > 0.0 {
                    (compress(*v) - self.min[j]) / span
                } else {
                    0.0
                };
            }
        }
        Ok(out)
    }

    pub fn write<W: Write>(&self, out: &mut W) -> Result<()> {
        codec::write_f64s(out, &self.min)?;
        codec::write_f64s(out, &self.max)
    }

    pub fn read<R: Read>(input: &mut R) -> Result<Self> {
        let min = codec::read_f64s(input)?;
        let max = codec::read_f64s(input)?;
        if min.len() != max.len() {
            return Err(Error::ModelFile("scaler bounds differ in length".into()));
        }
        Ok(FeatureScaler { min, max })
    }
}
