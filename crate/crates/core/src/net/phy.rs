//! Noise, SINR and the SINR to spectral-efficiency map.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::math::{db_to_linear, linear_to_db};

/// Thermal noise density, dBm/Hz.
pub const THERMAL_NOISE_DBM_HZ: f64 = -174.0;

pub fn noise_floor_dbm(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    THERMAL_NOISE_DBM_HZ + 10.0 * bandwidth_hz.log10() + noise_figure_db
}

/// SINR in dB of `signal_dbm` against noise plus interferers given in mW.
pub fn sinr_db(signal_dbm: f64, noise_dbm: f64, interference_mw: f64) -> f64 {
    signal_dbm - linear_to_db(db_to_linear(noise_dbm) + interference_mw)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    /// Terminal transmit power, dBm.
    pub tx_power_dbm: f64,
    pub sinr_threshold_db: f64,
    pub noise_figure_db: f64,
}

impl RadioParams {
    pub fn noise_dbm(&self) -> f64 {
        noise_floor_dbm(self.bandwidth_hz, self.noise_figure_db)
    }
}

/// Stepwise SINR (dB) to bit/s/Hz table. A step applies from its SINR up to
/// the next one; below the first step the efficiency is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpectralEfficiency {
    pub steps: Vec<(f64, f64)>,
}

impl Default for SpectralEfficiency {
    fn default() -> Self {
        SpectralEfficiency {
            steps: vec![
                (-5.0, 0.2),
                (0.0, 0.6),
                (5.0, 1.2),
                (10.0, 2.4),
                (15.0, 3.6),
                (20.0, 4.6),
                (25.0, 5.5),
            ],
        }
    }
}

impl SpectralEfficiency {
    pub fn efficiency(&self, sinr_db: f64) -> f64 {
        let mut se = 0.0;
        for &(thr, v) in &self.steps {
            if sinr_db >= thr {
                se = v;
            } else {
                break;
            }
        }
        se
    }

    /// Net bit rate after the fraction `overhead` lost to control signalling.
    pub fn capacity_bps(&self, sinr_db: f64, bandwidth_hz: f64, overhead: f64) -> f64 {
        bandwidth_hz * self.efficiency(sinr_db) * (1.0 - overhead)
    }

    pub fn is_valid(&self) -> bool {
        !self.steps.is_empty()
            && self.steps.iter().all(|s| s.0.is_finite() && s.1 > 0.0)
            && self.steps.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_at_20_mhz() {
        let n = noise_floor_dbm(20e6, 7.0);
        assert!((n - (-174.0 + 73.0103 + 7.0)).abs() < 1e-3);
    }

    #[test]
    fn se_steps() {
        let se = SpectralEfficiency::default();
        assert!(se.is_valid());
        assert_eq!(se.efficiency(-10.0), 0.0);
        assert_eq!(se.efficiency(5.0), 1.2);
        assert_eq!(se.efficiency(9.99), 1.2);
        assert_eq!(se.efficiency(40.0), 5.5);
        assert!((se.capacity_bps(40.0, 20e6, 0.3) - 77e6).abs() < 1.0);
    }

    #[test]
    fn sinr_without_interference_is_snr() {
        assert!((sinr_db(-60.0, -90.0, 0.0) - 30.0).abs() < 1e-12);
        assert!(sinr_db(-60.0, -90.0, 1e-6) < 30.0);
    }
}
