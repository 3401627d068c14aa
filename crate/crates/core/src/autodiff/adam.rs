//! Adam with classic L2 coupling: weight decay is added to the gradient
//! before the moment updates (not decoupled decay).

use ndarray::Array2;

/// Optimizer state over an ordered parameter list.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    step: usize,
    /// Per-parameter switch; `None` decays everything. Under L2 coupling a
    /// parameter whose gradient is smaller than `weight_decay·|θ|` is driven
    /// to zero at the full learning rate per step (the decay term dominates
    /// both moments), so biases and normalization scales are conventionally
    /// exempted.
    decay_mask: Option<Vec<bool>>,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl AdamState {
    /// Fresh state for parameters of the given shapes;
    /// β1 = 0.9, β2 = 0.999, ε = 1e-8.
    pub fn new(shapes: &[(usize, usize)], lr: f64, weight_decay: f64) -> Self {
        AdamState {
            m: shapes.iter().map(|&s| Array2::zeros(s)).collect(),
            v: shapes.iter().map(|&s| Array2::zeros(s)).collect(),
            step: 0,
            decay_mask: None,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
        }
    }

    /// Restricts weight decay to the parameters marked `true`.
    pub fn set_decay_mask(&mut self, mask: Vec<bool>) {
        assert_eq!(mask.len(), self.m.len(), "adam: mask length differs");
        self.decay_mask = Some(mask);
    }

    pub fn step_count(&self) -> usize {
        self.step
    }

    /// One bias-corrected update across all parameters. `params` and
    /// `grads` must match the construction order and shapes.
    pub fn step(&mut self, params: &mut [&mut Array2<f64>], grads: &[&Array2<f64>]) {
        assert_eq!(params.len(), self.m.len(), "adam: parameter count differs");
        assert_eq!(grads.len(), self.m.len(), "adam: gradient count differs");
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            assert_eq!(params[i].dim(), self.m[i].dim(), "adam: shape differs at {i}");
            assert_eq!(grads[i].dim(), self.m[i].dim(), "adam: grad shape differs at {i}");
            let decay = match &self.decay_mask {
                Some(mask) if !mask[i] => 0.0,
                _ => self.weight_decay,
            };
            let g = grads[i] + &(&*params[i] * decay);
            self.m[i] = &self.m[i] * self.beta1 + &g * (1.0 - self.beta1);
            self.v[i] = &self.v[i] * self.beta2 + &g.mapv(|e| e * e) * (1.0 - self.beta2);
            let m_hat = &self.m[i] / bc1;
            let v_hat = &self.v[i] / bc2;
            let update = m_hat / (v_hat.mapv(f64::sqrt) + self.eps) * self.lr;
            *params[i] -= &update;
        }
    }
}
