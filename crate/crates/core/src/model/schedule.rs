use std::f64::consts::PI;

use super::config::TrainSchedule;

/// Linear warmup from 0 to `peak`, then cosine decay reaching exactly 0 at
/// the last step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WarmupCosine {
    pub peak: f64,
    pub warmup_steps: usize,
    pub total_steps: usize,
}

impl WarmupCosine {
    pub fn from_schedule(s: &TrainSchedule) -> Self {
        WarmupCosine {
            peak: s.peak_lr,
            warmup_steps: s.warmup_epochs * s.batches_per_epoch,
            total_steps: s.main_epochs * s.batches_per_epoch,
        }
    }

    pub fn lr(&self, step: usize) -> f64 {
        if step < self.warmup_steps {
            return self.peak * step as f64 / self.warmup_steps as f64;
        }
        let last = self.total_steps.saturating_sub(1);
        if last <= self.warmup_steps {
            return self.peak;
        }
        let progress = (step.min(last) - self.warmup_steps) as f64 / (last - self.warmup_steps) as f64;
        self.peak * 0.5 * (1.0 + (PI * progress).cos())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints() {
        let s = WarmupCosine {
            peak: 2e-5,
            warmup_steps: 2000,
            total_steps: 30_000,
        };
        assert_eq!(s.lr(0), 0.0);
        assert!((s.lr(1000) - 1e-5).abs() < 1e-18);
        assert!((s.lr(2000) - 2e-5).abs() <= 1e-12);
        assert!(s.lr(29_999) <= 1e-12 * 2e-5);
        let mid = 2000 + (29_999 - 2000) / 2;
        assert!((s.lr(mid) - 1e-5).abs() < 1e-9);
    }

    #[test]
    fn monotone_phases() {
        let s = WarmupCosine {
            peak: 1.0,
            warmup_steps: 10,
            total_steps: 100,
        };
        for t in 1..10 {
            assert!(s.lr(t) > s.lr(t - 1));
        }
        for t in 11..100 {
            assert!(s.lr(t) <= s.lr(t - 1));
        }
    }

    #[test]
    fn no_warmup() {
        let s = WarmupCosine {
            peak: 0.5,
            warmup_steps: 0,
            total_steps: 5,
        };
        assert_eq!(s.lr(0), 0.5);
        assert!(s.lr(4).abs() < 1e-16);
    }
}
