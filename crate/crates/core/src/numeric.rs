//! Small numeric helpers shared by the estimator, the bounds and the studies.

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = CompensatedSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Arithmetic mean accumulated as `pivot + mean(value - pivot)`.
///
/// The pivot is the first value seen, so a run of identical values has zero
/// deviations and averages back to that value bit for bit.
#[derive(Clone, Copy, Debug, Default)]
pub struct MeanAccumulator {
    pivot: Option<f64>,
    deviations: CompensatedSum,
    count: u64,
}

impl MeanAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let pivot = *self.pivot.get_or_insert(value);
        self.deviations.add(value - pivot);
        self.count += 1;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Mean of the values added so far; 0 when empty.
    pub fn mean(&self) -> f64 {
        match self.pivot {
            None => 0.0,
            Some(pivot) => {
                let dev = self.deviations.value();
                if dev == 0.0 {
                    pivot
                } else {
                    pivot + dev / self.count as f64
                }
            }
        }
    }
}

/// `ln(n!)` for integer `n`.
pub fn ln_factorial(n: u64) -> f64 {
    statrs::function::factorial::ln_factorial(n)
}

/// Euclidean norm.
pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Relative difference `|a - b| / max(|a|, |b|, tiny)`.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
    (a - b).abs() / scale
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensation_recovers_cancelled_terms() {
        let values = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(compensated_sum(values), 2.0);
        assert_eq!(values.iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn identical_values_average_exactly() {
        let mut acc = MeanAccumulator::new();
        for _ in 0..7 {
            acc.add(0.1);
        }
        assert_eq!(acc.mean(), 0.1);
        assert_eq!(acc.count(), 7);
    }

    #[test]
    fn empty_mean_is_zero() {
        assert_eq!(MeanAccumulator::new().mean(), 0.0);
    }

    #[test]
    fn mean_of_mixed_values() {
        let mut acc = MeanAccumulator::new();
        for v in [1.0, 2.0, 3.0, 4.0] {
            acc.add(v);
        }
        assert_eq!(acc.mean(), 2.5);
    }

    #[test]
    fn ln_factorial_small_values() {
        assert_eq!(ln_factorial(0), 0.0);
        assert!((ln_factorial(10) - 3_628_800f64.ln()).abs() < 1e-12);
    }
}
