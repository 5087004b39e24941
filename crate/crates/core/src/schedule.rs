#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case", tag = "kind"))]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum LrSchedule {
    #[default]
    Constant,
    /// Constant until `start_epoch`, then linear down to `floor` at the last epoch.
    LinearDecay { start_epoch: usize, floor: f64 },
    /// Cosine annealing to `floor`, starting after warmup.
    Cosine { floor: f64 },
}

impl LrSchedule {
    /// Linear decay starting at the same fraction of training (80 of 300
    /// epochs) as the full-scale recipe, ending at 1e-4.
    pub fn proportional_linear(epochs: usize) -> Self {
        LrSchedule::LinearDecay {
            start_epoch: (epochs * 80 + 150) / 300,
            floor: 1e-4,
        }
    }

    pub fn lr_at(&self, base: f64, epoch: usize, epochs: usize, warmup: usize) -> f64 {
        let last = epochs.saturating_sub(1);
        match *self {
            LrSchedule::Constant => base,
            LrSchedule::LinearDecay { start_epoch, floor } => {
                if epoch <= start_epoch || last <= start_epoch {
                    base
                } else {
                    let t = (epoch - start_epoch) as f64 / (last - start_epoch) as f64;
                    base + (floor - base) * t.min(1.0)
                }
            }
            LrSchedule::Cosine { floor } => {
                if epoch < warmup || last <= warmup {
                    base
                } else {
                    let t = (epoch - warmup) as f64 / (last - warmup) as f64;
                    floor + (base - floor) * 0.5 * (1.0 + libm::cos(core::f64::consts::PI * t.min(1.0)))
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_decay_trace() {
        let s = LrSchedule::LinearDecay { start_epoch: 2, floor: 0.0 };
        let lrs: alloc::vec::Vec<f64> = (0..7).map(|e| s.lr_at(1.0, e, 7, 0)).collect();
        assert_eq!(lrs, [1.0, 1.0, 1.0, 0.75, 0.5, 0.25, 0.0]);
    }

    #[test]
    fn proportional_start() {
        assert_eq!(
            LrSchedule::proportional_linear(300),
            LrSchedule::LinearDecay { start_epoch: 80, floor: 1e-4 }
        );
        assert_eq!(
            LrSchedule::proportional_linear(100),
            LrSchedule::LinearDecay { start_epoch: 27, floor: 1e-4 }
        );
    }

    #[test]
    fn cosine_endpoints() {
        let s = LrSchedule::Cosine { floor: 0.1 };
        assert_eq!(s.lr_at(1.0, 3, 13, 3), 1.0);
        assert!((s.lr_at(1.0, 12, 13, 3) - 0.1).abs() < 1e-15);
        assert!((s.lr_at(1.0, 8, 14, 3) - 0.55).abs() < 1e-12);
    }
}
