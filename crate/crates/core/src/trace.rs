//! Timestamped metric samples produced during a run.

use serde::{Deserialize, Serialize};

use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    /// Reference-signal received power from the serving base station, dBm.
    RsrpDbm,
    /// Received power of a direct link, dBm.
    RxPowerDbm,
    /// Length of the link segment inside buildings, m.
    DObsM,
    PathLossDb,
    XM,
    YM,
    ZM,
    SpeedMps,
    /// Longitudinal acceleration of a car, m/s².
    AccelMps2,
    AccelXMps2,
    AccelYMps2,
    AccelZMps2,
    PowerW,
    HoverPowerW,
}

impl Metric {
    pub const ALL: [Metric; 14] = [
        Metric::RsrpDbm,
        Metric::RxPowerDbm,
        Metric::DObsM,
        Metric::PathLossDb,
        Metric::XM,
        Metric::YM,
        Metric::ZM,
        Metric::SpeedMps,
        Metric::AccelMps2,
        Metric::AccelXMps2,
        Metric::AccelYMps2,
        Metric::AccelZMps2,
        Metric::PowerW,
        Metric::HoverPowerW,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::RsrpDbm => "rsrp_dbm",
            Metric::RxPowerDbm => "rx_power_dbm",
            Metric::DObsM => "d_obs_m",
            Metric::PathLossDb => "path_loss_db",
            Metric::XM => "x_m",
            Metric::YM => "y_m",
            Metric::ZM => "z_m",
            Metric::SpeedMps => "speed_mps",
            Metric::AccelMps2 => "accel_mps2",
            Metric::AccelXMps2 => "accel_x_mps2",
            Metric::AccelYMps2 => "accel_y_mps2",
            Metric::AccelZMps2 => "accel_z_mps2",
            Metric::PowerW => "power_w",
            Metric::HoverPowerW => "hover_power_w",
        }
    }

    pub fn from_name(s: &str) -> Option<Metric> {
        Metric::ALL.into_iter().find(|m| m.name() == s)
    }
}

/// One sample. `subject` indexes the run's subject table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub time: SimTime,
    pub subject: u32,
    pub metric: Metric,
    pub value: f64,
}
