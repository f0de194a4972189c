use std::collections::BTreeMap;

use crate::numeric::{ParameterStore, Tensor};

/// Linear warmup from 0 to `peak` over `warmup_fraction * T` steps, then
/// cosine decay to `floor` at step `T - 1`.
pub fn cosine_lr(step: usize, steps: usize, peak: f64, floor: f64, warmup_fraction: f64) -> f64 {
    let warmup = warmup_fraction * steps as f64;
    let s = step as f64;
    if s < warmup {
        return peak * s / warmup;
    }
    let span = (steps as f64 - 1.0) - warmup;
    if span <= 0.0 {
        return peak;
    }
    let progress = ((s - warmup) / span).clamp(0.0, 1.0);
    floor + (peak - floor) * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
}

/// Geometric draw budget from `start` at step 0 to `end` at step `T - 1`,
/// capped at `2^63`.
pub fn draw_schedule(step: usize, steps: usize, start: f64, end: f64) -> u64 {
    let t = if steps > 1 { step as f64 / (steps - 1) as f64 } else { 0.0 };
    let draws = start * (end / start).powf(t);
    let cap = 2f64.powi(63);
    if draws >= cap {
        log::warn!("draw count {draws:e} capped at 2^63");
        return 1 << 63;
    }
    draws.round().max(1.0) as u64
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: BTreeMap<String, Tensor>,
    v: BTreeMap<String, Tensor>,
}

impl Default for Adam {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        }
    }
}

impl Adam {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn steps_taken(&self) -> i32 {
        self.t
    }

    /// Descends `params` along `grads`; parameters without a gradient are left alone.
    pub fn step(&mut self, params: &mut ParameterStore, grads: &BTreeMap<String, Tensor>, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (name, p) in params.iter_mut() {
            let Some(g) = grads.get(name) else { continue };
            let m = self
                .m
                .entry(name.to_string())
                .or_insert_with(|| Tensor::zeros(g.rows(), g.cols()));
            let v = self
                .v
                .entry(name.to_string())
                .or_insert_with(|| Tensor::zeros(g.rows(), g.cols()));
            for (((pi, &gi), mi), vi) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                *pi -= lr * (*mi / c1) / ((*vi / c2).sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_landmarks() {
        let t = 1000;
        assert_eq!(cosine_lr(0, t, 2.5e-3, 5e-8, 0.04), 0.0);
        assert!((cosine_lr(40, t, 2.5e-3, 5e-8, 0.04) - 2.5e-3).abs() < 1e-15);
        assert!((cosine_lr(20, t, 2.5e-3, 5e-8, 0.04) - 1.25e-3).abs() < 1e-15);
        assert!((cosine_lr(t - 1, t, 2.5e-3, 5e-8, 0.04) - 5e-8).abs() < 1e-18);
        // decay midpoint at T = 100 lies at step 51.5; the cosine is antisymmetric there
        let (lo, hi) = (cosine_lr(51, 100, 2.5e-3, 5e-8, 0.04), cosine_lr(52, 100, 2.5e-3, 5e-8, 0.04));
        assert!(((lo + hi) / 2.0 - (2.5e-3 + 5e-8) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn draw_schedule_is_geometric() {
        assert_eq!(draw_schedule(0, 101, 1e4, 1e12), 10_000);
        assert_eq!(draw_schedule(100, 101, 1e4, 1e12), 1_000_000_000_000);
        assert_eq!(draw_schedule(50, 101, 1e4, 1e12), 100_000_000);
        assert_eq!(draw_schedule(0, 1, 1e4, 1e12), 10_000);
        assert_eq!(draw_schedule(1, 2, 1.0, 1e30), 1 << 63);
    }

    #[test]
    fn adam_properties() {
        let mut p = ParameterStore::new();
        p.insert("w", Tensor::row(vec![1.0, -2.0, 3.0]));
        let before = p.clone();
        let mut adam = Adam::new();
        let zero: BTreeMap<String, Tensor> = [("w".to_string(), Tensor::zeros(1, 3))].into();
        adam.step(&mut p, &zero, 0.1);
        assert_eq!(p, before);

        let mut adam = Adam::new();
        let g: BTreeMap<String, Tensor> = [("w".to_string(), Tensor::row(vec![1e-3, -50.0, 7.0]))].into();
        adam.step(&mut p, &g, 0.01);
        let moved: Vec<f64> = p
            .get("w")
            .unwrap()
            .data()
            .iter()
            .zip(before.get("w").unwrap().data())
            .map(|(a, b)| (a - b).abs())
            .collect();
        for d in moved {
            assert!((d - 0.01).abs() < 1e-6, "{d}");
        }
    }
}
