use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::LearnError;
use crate::bev::FeatureMap;
use crate::math;

/// Parameters of the toy encoder `f = tanh(W x + b)`, applied per BEV cell.
/// `theta` holds `W` row-major (`outputs × inputs`) followed by `b`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EncoderParams {
    pub inputs: usize,
    pub outputs: usize,
    pub theta: Vec<f64>,
}

impl EncoderParams {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs, theta: vec![0.0; outputs * inputs + outputs] }
    }

    /// Uniform in `[-scale, scale]`.
    pub fn random<R: Rng + ?Sized>(inputs: usize, outputs: usize, scale: f64, rng: &mut R) -> Self {
        let theta = (0..outputs * inputs + outputs).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect();
        Self { inputs, outputs, theta }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    fn weights(&self) -> (&[f64], &[f64]) {
        self.theta.split_at(self.outputs * self.inputs)
    }

    #[inline]
    fn cell_forward(&self, x: &[f64], out: &mut [f64]) {
        let (w, b) = self.weights();
        for (o, (row, bias)) in out.iter_mut().zip(w.chunks_exact(self.inputs).zip(b)) {
            *o = math::tanh(math::dot(row, x) + bias);
        }
    }

    pub fn forward(&self, input: &FeatureMap) -> Result<FeatureMap, LearnError> {
        if input.channels != self.inputs {
            return Err(LearnError::ShapeMismatch("encoder input channels"));
        }
        let mut data = vec![0.0; input.grid.cells() * self.outputs];
        for (x, out) in input.data().chunks_exact(self.inputs).zip(data.chunks_exact_mut(self.outputs)) {
            self.cell_forward(x, out);
        }
        Ok(FeatureMap::from_data(input.grid, self.outputs, data)?)
    }

    /// Encoder output at one cell.
    pub fn forward_cell(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.outputs];
        self.cell_forward(x, &mut out);
        out
    }

    /// Gradient w.r.t. `theta` given the upstream gradient of the output map,
    /// supplied sparsely as `(cell index, d output)` pairs.
    pub fn backward(&self, input: &FeatureMap, upstream: &[(usize, Vec<f64>)]) -> Vec<f64> {
        let mut grad = vec![0.0; self.theta.len()];
        let (gw, gb) = grad.split_at_mut(self.outputs * self.inputs);
        let mut f = vec![0.0; self.outputs];
        for (cell, d_out) in upstream {
            let x = &input.data()[cell * self.inputs..(cell + 1) * self.inputs];
            self.cell_forward(x, &mut f);
            for o in 0..self.outputs {
                let dz = d_out[o] * (1.0 - f[o] * f[o]);
                gb[o] += dz;
                for (g, xi) in gw[o * self.inputs..(o + 1) * self.inputs].iter_mut().zip(x) {
                    *g += dz * xi;
                }
            }
        }
        grad
    }
}

/// `θ̂' = momentum·θ̂ + (1 − momentum)·θ`, elementwise.
pub fn ema_update(target: &EncoderParams, online: &EncoderParams, momentum: f64) -> Result<EncoderParams, LearnError> {
    if !(0.0..=1.0).contains(&momentum) {
        return Err(LearnError::BadMomentum(momentum));
    }
    if target.inputs != online.inputs || target.outputs != online.outputs || target.theta.len() != online.theta.len() {
        return Err(LearnError::ShapeMismatch("online and target encoders differ in shape"));
    }
    let theta = target.theta.iter().zip(&online.theta).map(|(t, o)| momentum * t + (1.0 - momentum) * o).collect();
    Ok(EncoderParams { theta, ..*target })
}
