/// Dynamic loss scaling state machine.
///
/// The scale halves on every overflow (and that step is skipped) and doubles
/// after `growth_interval` consecutive finite steps.
#[derive(Debug, Clone, PartialEq)]
pub struct LossScaler {
    pub scale: f64,
    pub growth_interval: u32,
    pub growth_factor: f64,
    pub backoff_factor: f64,
    pub good_steps: u32,
}

impl Default for LossScaler {
    fn default() -> Self {
        LossScaler {
            scale: 32768.0,
            growth_interval: 2000,
            growth_factor: 2.0,
            backoff_factor: 0.5,
            good_steps: 0,
        }
    }
}

impl LossScaler {
    /// Records the outcome of one step; returns whether the optimizer update
    /// should be applied.
    pub fn update(&mut self, overflow: bool) -> bool {
        if overflow {
            self.scale *= self.backoff_factor;
            self.good_steps = 0;
            return false;
        }
        self.good_steps += 1;
        if self.good_steps >= self.growth_interval {
            self.scale *= self.growth_factor;
            self.good_steps = 0;
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halves_on_overflow() {
        let mut s = LossScaler::default();
        assert!(!s.update(true));
        assert_eq!(s.scale, 16384.0);
    }

    #[test]
    fn doubles_after_interval() {
        let mut s = LossScaler {
            scale: 16384.0,
            ..Default::default()
        };
        for _ in 0..1999 {
            assert!(s.update(false));
        }
        assert_eq!(s.scale, 16384.0);
        s.update(false);
        assert_eq!(s.scale, 32768.0);
        assert_eq!(s.good_steps, 0);
    }

    #[test]
    fn alternating_decays_monotonically() {
        let mut s = LossScaler::default();
        let mut last = s.scale;
        for _ in 0..10 {
            s.update(true);
            s.update(false);
            assert!(s.scale < last);
            last = s.scale;
        }
        assert_eq!(s.scale, 32768.0 / 1024.0);
    }
}
