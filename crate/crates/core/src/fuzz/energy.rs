// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

pub const DEFAULT_K_BASE: u32 = 64;
pub const DEFAULT_K_MAX: u32 = 1024;

/// External features of a queued test case used for scheduling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub exec_time_steps: u64,
    /// Distinct branch-pair keys its trace touched.
    pub bitmap_size: usize,
    /// Derivation depth; seeds are 0.
    pub depth: u32,
}

/// Corpus-wide means of the scheduling features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Averages {
    pub steps: f64,
    pub bitmap: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den <= 0.0 {
        // both sides empty: neutral
        if num <= 0.0 {
            return 1.0;
        }
        return 4.0;
    }
    (num / den).clamp(0.25, 4.0)
}

/// Number of havoc trials for one visit of a queue entry.
pub fn calculate_energy(m: &SeedMetrics, avg: &Averages, k_base: u32, k_max: u32) -> u32 {
    let f_speed = ratio(avg.steps, m.exec_time_steps as f64);
    let f_cov = ratio(m.bitmap_size as f64, avg.bitmap);
    let f_depth = 1.0 + m.depth.min(8) as f64 / 8.0;
    let k = (k_base as f64 * f_speed * f_cov * f_depth).round();
    (k as u64).clamp(1, k_max.max(1) as u64) as u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const AVG: Averages = Averages {
        steps: 100.0,
        bitmap: 10.0,
    };

    fn m(steps: u64, bitmap: usize, depth: u32) -> SeedMetrics {
        SeedMetrics {
            exec_time_steps: steps,
            bitmap_size: bitmap,
            depth,
        }
    }

    #[test]
    fn average_entry_gets_base_energy() {
        assert_eq!(calculate_energy(&m(100, 10, 0), &AVG, 64, 1024), 64);
    }

    #[test]
    fn fast_wide_deep_entry_gets_eight_times() {
        assert_eq!(calculate_energy(&m(50, 20, 8), &AVG, 64, 1024), 512);
        assert_eq!(calculate_energy(&m(50, 20, 8), &AVG, 64, 100), 100);
    }

    #[test]
    fn slow_entry_is_capped() {
        assert_eq!(calculate_energy(&m(10_000, 10, 0), &AVG, 64, 1024), 16);
        assert_eq!(calculate_energy(&m(10_000, 1, 0), &AVG, 4, 1024), 1);
    }

    proptest! {
        #[test]
        fn monotone_in_each_feature(
            steps in 1u64..10_000, bitmap in 0usize..200, depth in 0u32..12,
            ds in 1u64..1000, db in 1usize..50, dd in 1u32..4,
        ) {
            let base = calculate_energy(&m(steps + ds, bitmap, depth), &AVG, 64, 1024);
            prop_assert!(calculate_energy(&m(steps, bitmap, depth), &AVG, 64, 1024) >= base);
            prop_assert!(calculate_energy(&m(steps + ds, bitmap + db, depth), &AVG, 64, 1024) >= base);
            prop_assert!(calculate_energy(&m(steps + ds, bitmap, depth + dd), &AVG, 64, 1024) >= base);
            prop_assert!((1..=1024).contains(&base));
        }
    }
}
