use crate::error::{Error, Result};
use crate::tensor_core::{check_dims, Tensor};

/// `T` same-shape tensors stored back to back in one buffer.
///
/// Frame `t` occupies `data[t * n..(t + 1) * n]` with `n = ∏ dims`, so the
/// buffer is also the `n x T` column-major matrix of vectorised frames.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorSeries {
    dims: Vec<usize>,
    len: usize,
    data: Vec<f64>,
}

impl TensorSeries {
    pub fn new(dims: Vec<usize>, len: usize, data: Vec<f64>) -> Result<Self> {
        let n = check_dims(&dims)?;
        if len == 0 {
            return Err(Error::Empty("tensor series has no frames".into()));
        }
        if data.len() != n * len {
            return Err(Error::ShapeMismatch(format!(
                "buffer of length {} does not hold {len} frames of extents {dims:?}",
                data.len()
            )));
        }
        Ok(Self { dims, len, data })
    }

    pub fn zeros(dims: Vec<usize>, len: usize) -> Result<Self> {
        let n = check_dims(&dims)?;
        Self::new(dims, len, vec![0.0; n * len])
    }

    pub fn from_frames(frames: &[Tensor]) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::Empty("tensor series has no frames".into()))?;
        let dims = first.dims().to_vec();
        let mut data = Vec::with_capacity(first.len() * frames.len());
        for (t, f) in frames.iter().enumerate() {
            if f.dims() != dims.as_slice() {
                return Err(Error::ShapeMismatch(format!(
                    "frame {t} has extents {:?}, expected {dims:?}",
                    f.dims()
                )));
            }
            data.extend_from_slice(f.data());
        }
        Self::new(dims, frames.len(), data)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    /// Number of time points `T`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Entries per frame.
    pub fn frame_len(&self) -> usize {
        self.data.len() / self.len
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        let n = self.frame_len();
        &self.data[n * t..n * (t + 1)]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [f64] {
        let n = self.frame_len();
        &mut self.data[n * t..n * (t + 1)]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.frame_len())
    }

    pub fn tensor(&self, t: usize) -> Tensor {
        Tensor::new(self.dims.clone(), self.frame(t).to_vec()).expect("frame matches extents")
    }

    /// Applies `f` to every frame, collecting the results into a new series.
    pub fn map_frames(&self, mut f: impl FnMut(&Tensor) -> Result<Tensor>) -> Result<Self> {
        let frames = (0..self.len)
            .map(|t| f(&self.tensor(t)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_frames(&frames)
    }

    /// Same buffer under new extents with equal frame size.
    pub fn with_dims(self, dims: Vec<usize>) -> Result<Self> {
        Self::new(dims, self.len, self.data)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { dims: self.dims.clone(), len: self.len, data: self.data.iter().map(|v| c * v).collect() }
    }

    /// Mean of squared entries over all frames.
    pub fn mean_square(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>() / self.data.len() as f64
    }
}
