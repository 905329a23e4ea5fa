//! Shared fixtures for the criterion benchmarks.

use cirprof::bench::Pipeline;
use cirprof::channel::{generate_dataset, DatasetMeta, DatasetRecord};
use cirprof::{DatasetSpec, SearchSchedule, SystemConfig};

/// A small noiseless dataset of well separated channels with one to three
/// paths.
pub struct Fixture {
    pub meta: DatasetMeta,
    pub records: Vec<DatasetRecord>,
}

impl Fixture {
    pub fn new(n_channels: usize, seed: u64) -> Self {
        let cfg = SystemConfig::default();
        let spec = DatasetSpec {
            n_channels,
            model_order_range: [1, 3],
            min_separation: 1.0,
            snr_db: None,
            rng_seed: seed,
            ..Default::default()
        };
        let records = generate_dataset(&spec, &cfg).expect("fixture dataset");
        let meta = DatasetMeta::new(&spec, &cfg, n_channels);
        Self { meta, records }
    }

    pub fn pipeline(&self) -> Pipeline<'_> {
        let schedule = SearchSchedule::for_config(&self.meta.config);
        Pipeline::new(&self.meta, schedule).expect("default schedule")
    }

    /// First record with exactly `l` paths.
    pub fn with_order(&self, l: usize) -> &DatasetRecord {
        self.records.iter().find(|r| r.theta.len() == l).expect("order present")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_covers_every_order() {
        let f = Fixture::new(12, 5);
        for l in 1..=3 {
            assert_eq!(f.with_order(l).theta.len(), l);
        }
        assert_eq!(f.pipeline().cfg().obs_window_w, 256);
    }
}
