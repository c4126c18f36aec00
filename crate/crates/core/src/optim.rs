//! SGD with momentum and L2 weight decay.

use crate::error::{shape_err, Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SgdConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            lr: 0.1,
            momentum: 0.9,
            weight_decay: 1e-4,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        // lr == 0 is allowed as an explicit no-op optimizer.
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be >= 0, got {}",
                self.lr
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum must be in [0,1), got {}",
                self.momentum
            )));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config(format!(
                "weight decay must be >= 0, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

/// Stateful optimizer: one velocity buffer per parameter.
///
/// `v <- momentum * v + grad + weight_decay * param; param <- param - lr * v`
#[derive(Clone, Debug)]
pub struct Sgd {
    pub config: SgdConfig,
    velocity: Vec<Tensor>,
}

impl Sgd {
    pub fn new(config: SgdConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            velocity: Vec::new(),
        })
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.config.lr = lr;
    }

    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(shape_err!(
                "{} parameters but {} gradients",
                params.len(),
                grads.len()
            ));
        }
        if self.velocity.is_empty() {
            self.velocity = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        }
        for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut self.velocity) {
            if p.shape() != g.shape() || p.shape() != v.shape() {
                return Err(shape_err!(
                    "parameter {:?} vs gradient {:?}",
                    p.shape(),
                    g.shape()
                ));
            }
            let SgdConfig {
                lr,
                momentum,
                weight_decay,
            } = self.config;
            for ((pv, gv), vv) in p.data_mut().iter_mut().zip(g.data()).zip(v.data_mut()) {
                *vv = momentum * *vv + gv + weight_decay * *pv;
                *pv -= lr * *vv;
            }
        }
        Ok(())
    }
}

/// Functional single step; returns updated parameters and velocities.
pub fn sgd_step(
    params: &[Tensor],
    grads: &[Tensor],
    velocity: &[Tensor],
    config: SgdConfig,
) -> Result<(Vec<Tensor>, Vec<Tensor>)> {
    config.validate()?;
    let mut opt = Sgd {
        config,
        velocity: velocity.to_vec(),
    };
    if velocity.len() != params.len() {
        return Err(shape_err!(
            "{} parameters but {} velocities",
            params.len(),
            velocity.len()
        ));
    }
    let mut params = params.to_vec();
    opt.step(&mut params, grads)?;
    Ok((params, opt.velocity))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_vec(v: f64) -> Tensor {
        Tensor::new(&[1], vec![v]).unwrap()
    }

    #[test]
    fn vanilla_sgd() {
        let cfg = SgdConfig {
            lr: 0.5,
            momentum: 0.0,
            weight_decay: 0.0,
        };
        let mut opt = Sgd::new(cfg).unwrap();
        let mut p = vec![scalar_vec(2.0)];
        opt.step(&mut p, &[scalar_vec(3.0)]).unwrap();
        assert_eq!(p[0].data(), [0.5]);
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut opt = Sgd::new(SgdConfig {
            weight_decay: 0.0,
            ..SgdConfig::default()
        })
        .unwrap();
        let mut p = vec![scalar_vec(1.25)];
        for _ in 0..3 {
            opt.step(&mut p, &[scalar_vec(0.0)]).unwrap();
        }
        assert_eq!(p[0].data(), [1.25]);
    }

    #[test]
    fn two_step_momentum_unroll() {
        let (lr, mu, wd) = (0.1, 0.9, 0.01);
        let mut opt = Sgd::new(SgdConfig {
            lr,
            momentum: mu,
            weight_decay: wd,
        })
        .unwrap();
        let mut p = vec![scalar_vec(1.0)];
        opt.step(&mut p, &[scalar_vec(0.5)]).unwrap();
        opt.step(&mut p, &[scalar_vec(-0.2)]).unwrap();

        let v1 = 0.5 + wd * 1.0;
        let p1 = 1.0 - lr * v1;
        let v2 = mu * v1 + (-0.2) + wd * p1;
        let p2 = p1 - lr * v2;
        assert!((p[0].data()[0] - p2).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_config_and_shapes() {
        assert!(Sgd::new(SgdConfig {
            momentum: 1.0,
            ..SgdConfig::default()
        })
        .is_err());
        let mut opt = Sgd::new(SgdConfig::default()).unwrap();
        let mut p = vec![Tensor::zeros(&[2])];
        assert!(opt.step(&mut p, &[Tensor::zeros(&[3])]).is_err());
    }
}
