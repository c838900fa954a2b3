//! Patience-based early stopping on a higher-is-better validation metric.

/// Tracks the best epoch seen so far; training halts once `patience`
/// consecutive epochs fail to improve on it.
#[derive(Debug, Clone)]
pub struct EarlyStopper {
    patience: usize,
    epoch: usize,
    best_epoch: usize,
    best_metric: f64,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            epoch: 0,
            best_epoch: 0,
            best_metric: f64::NEG_INFINITY,
        }
    }

    /// Records the metric of the next epoch. Returns true when training
    /// should stop (the last `patience` epochs were all non-improving).
    /// Strict improvement counts; ties do not reset the counter.
    pub fn observe(&mut self, metric: f64) -> bool {
        self.epoch += 1;
        if metric > self.best_metric {
            self.best_metric = metric;
            self.best_epoch = self.epoch;
        }
        self.epoch - self.best_epoch >= self.patience
    }

    /// True when the last observed epoch set a new best.
    pub fn just_improved(&self) -> bool {
        self.epoch > 0 && self.best_epoch == self.epoch
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_metric(&self) -> f64 {
        self.best_metric
    }

    pub fn epochs_seen(&self) -> usize {
        self.epoch
    }
}
