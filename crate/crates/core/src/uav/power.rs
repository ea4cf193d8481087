use num_traits::Float;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PowerParams {
    pub rotors: u32,
    /// Disk area of one rotor, m².
    pub rotor_area: f64,
    /// kg/m³
    pub air_density: f64,
    /// Profile and avionics power, W.
    pub profile_power: f64,
}

impl Default for PowerParams {
    fn default() -> Self {
        PowerParams {
            rotors: 4,
            rotor_area: 0.05,
            air_density: 1.225,
            profile_power: 10.0,
        }
    }
}

/// Momentum-theory induced power of every rotor under an even thrust split,
/// plus the constant profile term.
pub fn propulsion_power(thrust: f64, p: &PowerParams) -> f64 {
    let n = p.rotors.max(1) as f64;
    let per_rotor = thrust.max(0.0) / n;
    n * per_rotor.powf(1.5) / (2.0 * p.air_density * p.rotor_area).sqrt() + p.profile_power
}

/// Trapezoidal energy accumulator.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyMeter {
    pub joules: f64,
    last_power: Option<f64>,
}

impl EnergyMeter {
    /// Adds the energy of a step that ended with `power`; returns the step's
    /// energy.
    pub fn integrate(&mut self, power: f64, dt: f64) -> f64 {
        let start = self.last_power.unwrap_or(power);
        let e = 0.5 * (start + power) * dt;
        self.joules += e;
        self.last_power = Some(power);
        e
    }

    pub fn last_power(&self) -> Option<f64> {
        self.last_power
    }
}
