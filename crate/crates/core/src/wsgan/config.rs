use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Per-sample LF weights from the accuracy encoder head.
    Encoder,
    /// One learned LF weight vector shared by all samples.
    Vector,
    /// Plain InfoGAN: no label model, no alignment.
    InfoGan,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Encoder => "encoder",
            Mode::Vector => "vector",
            Mode::InfoGan => "infogan",
        }
    }

    pub fn aligns(self) -> bool {
        self != Mode::InfoGan
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "encoder" => Ok(Mode::Encoder),
            "vector" => Ok(Mode::Vector),
            "infogan" => Ok(Mode::InfoGan),
            other => Err(Error::invalid(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub mode: Mode,
    /// Weight of the code-recovery (info) loss.
    pub info_weight: f64,
    /// Weight of the alignment term.
    pub align_weight: f64,
    /// Decay of the uniform-weight penalty, `C / (epoch · decay + 1)`.
    pub penalty_decay: f64,
    pub lr_d: f64,
    pub lr_g: f64,
    pub lr_info: f64,
    pub lr_ws: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub z_dim: usize,
    pub hidden: usize,
    /// Real targets are `1 - smoothing`, fake targets `smoothing`.
    pub label_smoothing: f64,
    /// Per-sample probability of swapping the discriminator target.
    pub label_flip: f64,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Encoder,
            info_weight: 1.0,
            align_weight: 1.0,
            penalty_decay: 1.5,
            lr_d: 4e-4,
            lr_g: 1e-4,
            lr_info: 1e-4,
            lr_ws: 8e-5,
            batch_size: 16,
            epochs: 60,
            z_dim: 16,
            hidden: 64,
            label_smoothing: 0.1,
            label_flip: 0.03,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let rates = [self.lr_d, self.lr_g, self.lr_info, self.lr_ws];
        if rates.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(Error::invalid("all learning rates must be positive"));
        }
        if !(self.penalty_decay >= 0.0) {
            return Err(Error::invalid("penalty decay must be non-negative"));
        }
        if !(self.info_weight >= 0.0) || !(self.align_weight >= 0.0) {
            return Err(Error::invalid("loss weights must be non-negative"));
        }
        if self.batch_size == 0 || self.z_dim == 0 || self.hidden == 0 {
            return Err(Error::invalid(
                "batch size, z_dim and hidden width must be positive",
            ));
        }
        if !(0.0..0.5).contains(&self.label_smoothing) || !(0.0..0.5).contains(&self.label_flip) {
            return Err(Error::invalid(
                "label smoothing and flip probability must lie in [0, 0.5)",
            ));
        }
        Ok(())
    }

    /// Multiplier of the uniform-weight penalty at a zero-based epoch.
    pub fn penalty_multiplier(&self, classes: usize, epoch: usize) -> f64 {
        classes as f64 / (epoch as f64 * self.penalty_decay + 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn penalty_multiplier_values() {
        let c = TrainingConfig::default();
        assert_eq!(c.penalty_multiplier(10, 0), 10.0);
        assert!((c.penalty_multiplier(10, 3) - 10.0 / 5.5).abs() < 1e-15);
        assert!((c.penalty_multiplier(10, 3) - 1.818).abs() < 1e-3);
        for i in 0..50 {
            assert!(c.penalty_multiplier(10, i + 1) < c.penalty_multiplier(10, i));
        }
    }

    #[test]
    fn validation() {
        assert!(TrainingConfig::default().validate().is_ok());
        let bad = TrainingConfig {
            lr_g: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!("vector".parse::<Mode>().unwrap(), Mode::Vector);
    }
}
