use serde::{Deserialize, Serialize};

use super::ForecastError;

/// Shape of a TCN: one residual block per dilation, two convolutions per block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TcnArch {
    pub input_channels: usize,
    pub hidden_channels: usize,
    pub kernel_size: usize,
    pub dilations: Vec<usize>,
}

impl TcnArch {
    /// 32 hidden channels, kernel 3, dilations 1, 2, 4 (receptive field 29).
    pub fn with_defaults(input_channels: usize) -> Self {
        Self { input_channels, hidden_channels: 32, kernel_size: 3, dilations: vec![1, 2, 4] }
    }

    pub fn validate(&self) -> Result<(), ForecastError> {
        let bad = |m: &str| Err(ForecastError::InvalidArch(m.into()));
        if self.input_channels == 0 || self.hidden_channels == 0 {
            return bad("channel counts must be positive");
        }
        if self.kernel_size < 2 {
            return bad("kernel size must be at least 2");
        }
        if self.dilations.is_empty() || self.dilations.contains(&0) {
            return bad("dilations must be non-empty and positive");
        }
        Ok(())
    }

    /// Past steps that can reach the final output: `1 + 2(k−1)Σd`.
    pub fn receptive_field(&self) -> usize {
        1 + 2 * (self.kernel_size - 1) * self.dilations.iter().sum::<usize>()
    }

    pub fn output_channels(&self) -> usize {
        self.input_channels
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arch(k: usize, dil: &[usize]) -> TcnArch {
        TcnArch { input_channels: 2, hidden_channels: 4, kernel_size: k, dilations: dil.to_vec() }
    }

    #[test]
    fn receptive_field_closed_form() {
        assert_eq!(arch(3, &[1, 2, 4]).receptive_field(), 29);
        assert_eq!(arch(2, &[1]).receptive_field(), 3);
        assert_eq!(arch(3, &[1]).receptive_field(), 5);
        assert_eq!(TcnArch::with_defaults(15).receptive_field(), 29);
    }

    #[test]
    fn validation() {
        assert!(arch(1, &[1]).validate().is_err());
        assert!(arch(3, &[]).validate().is_err());
        assert!(arch(3, &[0]).validate().is_err());
        assert!(arch(2, &[1, 8]).validate().is_ok());
    }
}
