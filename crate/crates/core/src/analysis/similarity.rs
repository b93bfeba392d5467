use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::autoencoder::{row_cosines, AutoencoderModel};
use crate::error::{Error, Result};

/// Mean cosine similarity between inputs and their reconstructions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Similarity {
    pub mean: f64,
    pub counted: usize,
    /// Rows skipped because the input or its reconstruction has zero norm.
    pub excluded: usize,
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Option<f64> {
    let mut out = row_cosines(
        ArrayView2::from_shape((1, a.len()), a).ok()?,
        ArrayView2::from_shape((1, b.len()), b).ok()?,
    );
    out.pop().flatten()
}

pub fn reconstruction_similarity(
    model: &AutoencoderModel,
    x: ArrayView2<f64>,
) -> Result<Similarity> {
    if x.nrows() == 0 {
        return Err(Error::Empty("similarity needs at least one row".into()));
    }
    let recon = model.reconstruct_batch(x)?;
    let cos = row_cosines(x, recon.view());
    let valid: Vec<f64> = cos.iter().flatten().copied().collect();
    if valid.is_empty() {
        return Err(Error::Empty(
            "every row or reconstruction has zero norm".into(),
        ));
    }
    Ok(Similarity {
        mean: valid.iter().sum::<f64>() / valid.len() as f64,
        counted: valid.len(),
        excluded: cos.len() - valid.len(),
    })
}
