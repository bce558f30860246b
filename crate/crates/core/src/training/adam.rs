//! Adam optimizer with decoupled weight decay and the step learning-rate
//! schedule.

use ndarray::ArrayD;

use crate::autodiff::{Grads, Params};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPS: f64 = 1e-8;

/// AdamW: first/second-moment decay 0.9/0.999, epsilon 1e-8, weight decay
/// applied directly to the parameters (decoupled from the gradient).
pub struct AdamW {
    m: Vec<ArrayD<f64>>,
    v: Vec<ArrayD<f64>>,
    t: u64,
    pub weight_decay: f64,
}

impl AdamW {
    pub fn new(params: &Params, weight_decay: f64) -> Self {
        let m = params.iter().map(|(_, _, v)| ArrayD::zeros(v.raw_dim())).collect();
        let v = params.iter().map(|(_, _, v)| ArrayD::zeros(v.raw_dim())).collect();
        Self {
            m,
            v,
            t: 0,
            weight_decay,
        }
    }

    pub fn step(&mut self, params: &mut Params, grads: &Grads, lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - BETA1.powi(self.t as i32);
        let bc2 = 1.0 - BETA2.powi(self.t as i32);
        let ids: Vec<_> = params.iter().map(|(id, _, _)| id).collect();
        for id in ids {
            let Some(g) = grads.get(id) else { continue };
            let m = &mut self.m[id.index()];
            let v = &mut self.v[id.index()];
            let theta = params.get_mut(id);
            for ((t, gk), (mk, vk)) in theta
                .iter_mut()
                .zip(g.iter())
                .zip(m.iter_mut().zip(v.iter_mut()))
            {
                *mk = BETA1 * *mk + (1.0 - BETA1) * gk;
                *vk = BETA2 * *vk + (1.0 - BETA2) * gk * gk;
                let m_hat = *mk / bc1;
                let v_hat = *vk / bc2;
                *t -= lr * (m_hat / (v_hat.sqrt() + EPS)) + lr * self.weight_decay * *t;
            }
        }
    }
}

/// lr after epoch e: lr0 · gamma^floor(e / step).
pub fn lr_at_epoch(lr0: f64, gamma: f64, step: usize, epoch: usize) -> f64 {
    lr0 * gamma.powi((epoch / step.max(1)) as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::IxDyn;

    #[test]
    fn one_step_matches_closed_form() {
        // After one step from zero moments: m_hat = g, v_hat = g², so
        // theta1 = theta0 - lr·g/(|g|+eps) - lr·wd·theta0.
        let mut params = Params::new();
        let id = params.add(
            "w",
            ArrayD::from_shape_vec(IxDyn(&[3]), vec![1.0, -2.0, 0.5]).unwrap(),
        );
        let g = ArrayD::from_shape_vec(IxDyn(&[3]), vec![0.3, -0.1, 2.0]).unwrap();
        let mut grads = Grads::zeros(&params);
        grads.accumulate(id, &g);
        let theta0: Vec<f64> = params.get(id).iter().cloned().collect();
        let lr = 1e-3;
        let wd = 1e-4;
        let mut opt = AdamW::new(&params, wd);
        opt.step(&mut params, &grads, lr);
        for ((t1, t0), gk) in params.get(id).iter().zip(theta0.iter()).zip(g.iter()) {
            let expect = t0 - lr * (gk / (gk.abs() + EPS)) - lr * wd * t0;
            assert!(
                (t1 - expect).abs() < 1e-10,
                "closed form: {t1} vs {expect}"
            );
        }
    }

    #[test]
    fn schedule_exact() {
        let lr0 = 1e-4;
        for (e, expect) in [
            (0usize, 1e-4),
            (59, 1e-4),
            (60, 5e-5),
            (119, 5e-5),
            (120, 2.5e-5),
        ] {
            let got = lr_at_epoch(lr0, 0.5, 60, e);
            assert_eq!(got, expect, "epoch {e}");
        }
    }

    #[test]
    fn params_without_grads_untouched() {
        let mut params = Params::new();
        let a = params.add("a", ArrayD::from_elem(IxDyn(&[2]), 1.0));
        let b = params.add("b", ArrayD::from_elem(IxDyn(&[2]), 2.0));
        let mut grads = Grads::zeros(&params);
        grads.accumulate(a, &ArrayD::from_elem(IxDyn(&[2]), 0.5));
        let mut opt = AdamW::new(&params, 0.0);
        opt.step(&mut params, &grads, 1e-2);
        assert!(params.get(a).iter().all(|&v| v != 1.0));
        assert!(params.get(b).iter().all(|&v| v == 2.0));
    }
}
