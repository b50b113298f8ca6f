use super::ParamStore;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// L2 penalty folded into the gradient. Row 0 of embedding tables is exempt.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// Moment buffers and step counter for Adam.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
    step_count: u64,
    initialized: bool,
}

impl AdamState {
    /// Creates an uninitialized state; call [`AdamState::init`] before stepping.
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
            step_count: 0,
            initialized: false,
        }
    }

    /// Zero moment buffers shaped like every trainable tensor in `store`.
    pub fn init(&mut self, store: &ParamStore) {
        let shapes: Vec<usize> = store
            .iter()
            .map(|(_, _, t)| if t.requires_grad() { t.numel() } else { 0 })
            .collect();
        self.first_moment = shapes.iter().map(|&n| vec![0.0; n]).collect();
        self.second_moment = shapes.iter().map(|&n| vec![0.0; n]).collect();
        self.step_count = 0;
        self.initialized = true;
    }

    pub fn for_store(config: AdamConfig, store: &ParamStore) -> Self {
        let mut s = Self::new(config);
        s.init(store);
        s
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn is_initialized(&self) -> bool {
        self.initialized
    }
}

/// One bias-corrected Adam update over every trainable tensor; gradients are
/// zeroed afterwards.
pub fn adam_step(store: &mut ParamStore, state: &mut AdamState) -> Result<()> {
    if !state.initialized || state.first_moment.len() != store.len() {
        return Err(Error::contract("adam state is not initialized for this store"));
    }
    state.step_count += 1;
    let cfg = state.config;
    let t = state.step_count as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let skip_row0 = store.skips_decay_row0(id);
        let tensor = store.get_mut(id);
        if !tensor.requires_grad() {
            continue;
        }
        let Some(grad) = tensor.take_grad() else { continue };
        let m = &mut state.first_moment[id.index()];
        let v = &mut state.second_moment[id.index()];
        if m.len() != grad.len() {
            return Err(Error::contract(format!(
                "adam moment buffer for tensor {} has the wrong size",
                id.index()
            )));
        }
        let row_len = match tensor.shape() {
            [_, c] => *c,
            _ => 0,
        };
        let values = tensor.data_mut();
        for j in 0..values.len() {
            let mut g = grad[j];
            if cfg.weight_decay != 0.0 && !(skip_row0 && j < row_len) {
                g += cfg.weight_decay * values[j];
            }
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g;
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g * g;
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            values[j] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
        let zeros = vec![0.0; grad.len()];
        tensor.accumulate_grad(&zeros)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::Tensor;

    fn store_with(values: Vec<f64>) -> (ParamStore, crate::autograd::ParamId) {
        let mut s = ParamStore::new();
        let id = s.add("w", Tensor::vector(values).with_requires_grad(true));
        (s, id)
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let (mut store, id) = store_with(vec![0.0]);
        let mut st = AdamState::for_store(AdamConfig::default(), &store);
        store.get_mut(id).accumulate_grad(&[1.0]).unwrap();
        adam_step(&mut store, &mut st).unwrap();
        let expected = -1e-3 / (1.0 + 1e-8);
        assert!((store.get(id).data()[0] - expected).abs() < 1e-15);
        assert_eq!(store.get(id).grad().unwrap(), &[0.0]);
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let (mut store, id) = store_with(vec![0.3, -0.7]);
        let mut st = AdamState::for_store(AdamConfig::default(), &store);
        store.get_mut(id).accumulate_grad(&[0.0, 0.0]).unwrap();
        adam_step(&mut store, &mut st).unwrap();
        assert_eq!(store.get(id).data(), &[0.3, -0.7]);
    }

    #[test]
    fn constant_gradient_moves_against_sign() {
        let (mut store, id) = store_with(vec![0.0, 0.0]);
        let mut st = AdamState::for_store(AdamConfig::default(), &store);
        let mut prev = vec![0.0, 0.0];
        for _ in 0..2 {
            store.get_mut(id).accumulate_grad(&[2.0, -3.0]).unwrap();
            adam_step(&mut store, &mut st).unwrap();
            let cur = store.get(id).data().to_vec();
            assert!(cur[0] < prev[0]);
            assert!(cur[1] > prev[1]);
            prev = cur;
        }
        assert_eq!(st.step_count(), 2);
    }

    #[test]
    fn uninitialized_state_is_rejected() {
        let (mut store, _) = store_with(vec![1.0]);
        let mut st = AdamState::new(AdamConfig::default());
        assert!(matches!(
            adam_step(&mut store, &mut st),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn decay_skips_padding_row() {
        let mut store = ParamStore::new();
        let id = store.add_embedding(
            "emb",
            Tensor::new(vec![2, 1], vec![1.0, 1.0]).unwrap().with_requires_grad(true),
        );
        let cfg = AdamConfig {
            weight_decay: 0.1,
            ..AdamConfig::default()
        };
        let mut st = AdamState::for_store(cfg, &store);
        store.get_mut(id).accumulate_grad(&[0.0, 0.0]).unwrap();
        adam_step(&mut store, &mut st).unwrap();
        assert_eq!(store.get(id).data()[0], 1.0);
        assert!(store.get(id).data()[1] < 1.0);
    }
}
