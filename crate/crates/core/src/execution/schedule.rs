//! Which input of each interval is also sent to the Verifier.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ExecError;

/// One secret offset per interval. The last interval may be shorter than
/// `interval_size`; its offset is drawn from its actual length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplingSchedule {
    interval_size: u32,
    total_inputs: u32,
    offsets: Vec<u32>,
}

pub fn sample_schedule(seed: u64, total_inputs: u32, interval_size: u32) -> Result<SamplingSchedule, ExecError> {
    if interval_size == 0 {
        return Err(ExecError::InvalidSchedule("interval size must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = total_inputs.div_ceil(interval_size);
    let offsets = (0..count)
        .map(|k| {
            let len = (total_inputs - k * interval_size).min(interval_size);
            rng.gen_range(0..len)
        })
        .collect();
    Ok(SamplingSchedule { interval_size, total_inputs, offsets })
}

impl SamplingSchedule {
    pub fn interval_size(&self) -> u32 {
        self.interval_size
    }

    pub fn total_inputs(&self) -> u32 {
        self.total_inputs
    }

    pub fn interval_count(&self) -> u32 {
        self.offsets.len() as u32
    }

    pub fn interval_of(&self, index: u32) -> u32 {
        index / self.interval_size
    }

    pub fn is_sampled(&self, index: u32) -> bool {
        index < self.total_inputs
            && self.offsets[(index / self.interval_size) as usize] == index % self.interval_size
    }

    pub fn sampled_indices(&self) -> impl Iterator<Item = u32> + '_ {
        self.offsets.iter().enumerate().map(|(k, off)| k as u32 * self.interval_size + off)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_sample_per_interval() {
        for (total, size) in [(100, 10), (101, 10), (7, 3), (1, 5), (44, 1)] {
            let s = sample_schedule(3, total, size).unwrap();
            assert_eq!(s.interval_count(), total.div_ceil(size));
            let sampled: Vec<u32> = (0..total).filter(|&i| s.is_sampled(i)).collect();
            assert_eq!(sampled, s.sampled_indices().collect::<Vec<_>>());
            for k in 0..s.interval_count() {
                assert_eq!(sampled.iter().filter(|&&i| i / size == k).count(), 1);
            }
        }
    }

    #[test]
    fn zero_interval_is_rejected() {
        assert!(sample_schedule(0, 10, 0).is_err());
    }

    #[test]
    fn seeded() {
        assert_eq!(sample_schedule(5, 500, 10).unwrap(), sample_schedule(5, 500, 10).unwrap());
        assert_ne!(sample_schedule(5, 500, 10).unwrap(), sample_schedule(6, 500, 10).unwrap());
    }
}
