use crate::channel::LineLevel;

/// Low-bus detector: flags a low run longer than a threshold.
#[derive(Debug, Clone)]
pub struct LowBusDetector {
    threshold_cycles: f64,
    low_run: u32,
}

impl LowBusDetector {
    pub fn new(psc_division: u32, threshold_slots: f64) -> Self {
        LowBusDetector { threshold_cycles: threshold_slots * psc_division as f64, low_run: 0 }
    }

    /// Feed one sample; returns whether the current low run exceeds the threshold.
    pub fn step(&mut self, level: LineLevel) -> bool {
        if level.is_low() {
            self.low_run = self.low_run.saturating_add(1);
        } else {
            self.low_run = 0;
        }
        self.flagged()
    }

    pub fn flagged(&self) -> bool {
        self.low_run as f64 > self.threshold_cycles
    }

    /// True only on the sample where the flag goes up.
    pub fn step_rising(&mut self, level: LineLevel) -> bool {
        let before = self.flagged();
        self.step(level) && !before
    }

    pub fn low_run(&self) -> u32 {
        self.low_run
    }
}
