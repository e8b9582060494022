//! Per-node battery model driven by radio state changes.

use serde::{Deserialize, Serialize};

use crate::engine::SimTime;
use crate::phy::dbm_to_watts;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub initial_j: f64,
    pub rx_w: f64,
    pub tx_w: f64,
    pub idle_w: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        EnergyParams {
            initial_j: 4.7,
            rx_w: 0.395,
            tx_w: 0.660,
            idle_w: 0.035,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RadioState {
    Idle,
    Rx,
    /// Transmitting at the given radiated power.
    Tx(f64),
    Dead,
}

/// Electrical draw model. Transmit draw is `idle + beta * P_radiated` with
/// `beta` chosen so a full-power transmission draws exactly `tx_w`.
#[derive(Clone, Debug)]
pub struct DrawModel {
    idle_w: f64,
    rx_w: f64,
    beta: f64,
}

impl DrawModel {
    pub fn new(params: &EnergyParams, max_tx_dbm: f64) -> Self {
        let beta = (params.tx_w - params.idle_w) / dbm_to_watts(max_tx_dbm);
        DrawModel {
            idle_w: params.idle_w,
            rx_w: params.rx_w,
            beta,
        }
    }

    pub fn watts(&self, state: RadioState) -> f64 {
        match state {
            RadioState::Idle => self.idle_w,
            RadioState::Rx => self.rx_w,
            RadioState::Tx(dbm) => self.idle_w + self.beta * dbm_to_watts(dbm),
            RadioState::Dead => 0.0,
        }
    }
}

/// Battery ledger for one node. `consumed` is the sum of every interval
/// charge; `initial - residual == consumed` up to rounding.
#[derive(Clone, Debug)]
pub struct EnergyMeter {
    initial: f64,
    residual: f64,
    consumed: f64,
    state: RadioState,
    since: SimTime,
}

impl EnergyMeter {
    pub fn new(initial_j: f64) -> Self {
        EnergyMeter {
            initial: initial_j,
            residual: initial_j,
            consumed: 0.0,
            state: RadioState::Idle,
            since: SimTime::ZERO,
        }
    }

    pub fn state(&self) -> RadioState {
        self.state
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn consumed(&self) -> f64 {
        self.consumed
    }

    pub fn initial(&self) -> f64 {
        self.initial
    }

    pub fn is_dead(&self) -> bool {
        matches!(self.state, RadioState::Dead)
    }

    /// Charges the interval since the last change at the outgoing state's
    /// draw, then switches to `next`. Returns the joules charged. A node
    /// whose battery empties becomes `Dead` regardless of `next`.
    pub fn transition(&mut self, next: RadioState, at: SimTime, draw: &DrawModel) -> f64 {
        assert!(at >= self.since, "energy transition moves backwards in time");
        if self.is_dead() {
            return 0.0;
        }
        let dt = (at - self.since).as_secs();
        let charge = (draw.watts(self.state) * dt).min(self.residual);
        self.residual -= charge;
        self.consumed += charge;
        self.since = at;
        self.state = if self.residual <= 0.0 {
            self.residual = 0.0;
            RadioState::Dead
        } else {
            next
        };
        charge
    }

    /// Charge that `settle(at)` would apply, without applying it.
    pub fn pending_charge(&self, at: SimTime, draw: &DrawModel) -> f64 {
        if self.is_dead() || at <= self.since {
            return 0.0;
        }
        (draw.watts(self.state) * (at - self.since).as_secs()).min(self.residual)
    }

    /// Brings the ledger up to `at` without changing state.
    pub fn settle(&mut self, at: SimTime, draw: &DrawModel) -> f64 {
        let s = self.state;
        self.transition(s, at, draw)
    }

    /// Time at which the battery empties if the current state persists.
    pub fn depletion_time(&self, draw: &DrawModel) -> Option<SimTime> {
        let w = draw.watts(self.state);
        if w <= 0.0 || self.is_dead() {
            return None;
        }
        // Round up so the charge at that instant covers the whole residual.
        let ns = (self.residual / w * 1e9).ceil() as u64;
        Some(self.since + SimTime::from_nanos(ns))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::RadioParams;
    use approx::assert_relative_eq;

    fn draw() -> DrawModel {
        DrawModel::new(&EnergyParams::default(), RadioParams::default().max_tx_dbm)
    }

    #[test]
    fn idle_second() {
        let d = draw();
        let mut m = EnergyMeter::new(4.7);
        let c = m.transition(RadioState::Rx, SimTime::from_secs(1.0), &d);
        assert_relative_eq!(c, 0.035, max_relative = 1e-12);
    }

    #[test]
    fn full_power_tx() {
        let d = draw();
        let max = RadioParams::default().max_tx_dbm;
        let mut m = EnergyMeter::new(4.7);
        m.transition(RadioState::Tx(max), SimTime::ZERO, &d);
        let c = m.transition(RadioState::Idle, SimTime::from_secs(0.1), &d);
        assert_relative_eq!(c, 0.066, max_relative = 1e-12);
    }

    #[test]
    fn reduced_power_tx_draws_less() {
        let d = draw();
        let max = RadioParams::default().max_tx_dbm;
        assert!(d.watts(RadioState::Tx(max - 10.0)) < d.watts(RadioState::Tx(max)));
        assert!(d.watts(RadioState::Tx(max - 10.0)) > d.watts(RadioState::Idle));
    }

    #[test]
    fn zero_elapsed_is_free() {
        let d = draw();
        let mut m = EnergyMeter::new(4.7);
        assert_eq!(m.transition(RadioState::Rx, SimTime::ZERO, &d), 0.0);
    }

    #[test]
    fn battery_runs_out() {
        let d = draw();
        let mut m = EnergyMeter::new(0.395);
        m.transition(RadioState::Rx, SimTime::ZERO, &d);
        let t = m.depletion_time(&d).unwrap();
        assert_eq!(t, SimTime::from_secs(1.0));
        m.transition(RadioState::Idle, SimTime::from_secs(2.0), &d);
        assert!(m.is_dead());
        assert_eq!(m.residual(), 0.0);
        assert_relative_eq!(m.consumed(), 0.395, max_relative = 1e-12);
        assert_eq!(m.transition(RadioState::Rx, SimTime::from_secs(3.0), &d), 0.0);
    }

    #[test]
    fn ledger_balances() {
        let d = draw();
        let mut m = EnergyMeter::new(4.7);
        let states = [RadioState::Rx, RadioState::Tx(10.0), RadioState::Idle, RadioState::Tx(24.0)];
        let mut sum = 0.0;
        for (i, s) in states.iter().cycle().take(400).enumerate() {
            sum += m.transition(*s, SimTime::from_micros(1000.0 * (i as f64 + 1.0)), &d);
        }
        assert_relative_eq!(m.initial() - m.residual(), sum, max_relative = 1e-9);
        assert_relative_eq!(m.consumed(), sum, max_relative = 1e-12);
    }
}
