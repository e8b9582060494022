//! Free-space propagation and the receive/carrier-sense decisions.
//!
//! All link-budget arithmetic is done in dBm/dB. Linear watts are only used
//! by the energy model.

use serde::{Deserialize, Serialize};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

pub fn wavelength_for(frequency_hz: f64) -> f64 {
    SPEED_OF_LIGHT / frequency_hz
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    pub wavelength_m: f64,
    pub tx_gain: f64,
    pub rx_gain: f64,
    /// Minimum received power for a frame to be decoded.
    pub rx_threshold_dbm: f64,
    /// Minimum received power for a frame to occupy the medium at a node.
    pub carrier_sense_dbm: f64,
    pub max_tx_dbm: f64,
    pub min_tx_dbm: f64,
    pub channel_rate_bps: f64,
}

pub const DEFAULT_FREQUENCY_HZ: f64 = 914e6;
pub const DEFAULT_MAX_TX_W: f64 = 0.2818;
pub const DEFAULT_RANGE_M: f64 = 250.0;
pub const DEFAULT_CS_RANGE_M: f64 = 500.0;

impl RadioParams {
    /// Parameters whose decode range under free-space propagation is exactly
    /// `range_m` at full power, with carrier sense reaching `cs_range_m`.
    pub fn calibrated(
        wavelength_m: f64,
        max_tx_dbm: f64,
        range_m: f64,
        cs_range_m: f64,
    ) -> RadioParams {
        let mut p = RadioParams {
            wavelength_m,
            tx_gain: 1.0,
            rx_gain: 1.0,
            rx_threshold_dbm: 0.0,
            carrier_sense_dbm: 0.0,
            max_tx_dbm,
            min_tx_dbm: 0.0,
            channel_rate_bps: 2e6,
        };
        p.rx_threshold_dbm = received_power(max_tx_dbm, range_m, &p);
        p.carrier_sense_dbm = received_power(max_tx_dbm, cs_range_m, &p);
        p
    }

    /// Distance at which a full-power frame arrives exactly at `threshold_dbm`.
    pub fn range_for(&self, tx_dbm: f64, threshold_dbm: f64) -> f64 {
        let gain_db = 10.0 * (self.tx_gain * self.rx_gain).log10();
        let budget = tx_dbm + gain_db - threshold_dbm;
        self.wavelength_m / (4.0 * std::f64::consts::PI) * 10f64.powf(budget / 20.0)
    }
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams::calibrated(
            wavelength_for(DEFAULT_FREQUENCY_HZ),
            watts_to_dbm(DEFAULT_MAX_TX_W),
            DEFAULT_RANGE_M,
            DEFAULT_CS_RANGE_M,
        )
    }
}

/// Friis free-space received power, in dBm.
///
/// Panics for `distance_m <= 0`; co-located nodes are rejected upstream.
pub fn received_power(p_tx_dbm: f64, distance_m: f64, params: &RadioParams) -> f64 {
    assert!(distance_m > 0.0, "received_power: distance must be positive");
    let ratio = params.wavelength_m / (4.0 * std::f64::consts::PI * distance_m);
    p_tx_dbm + 20.0 * ratio.log10() + 10.0 * (params.tx_gain * params.rx_gain).log10()
}

/// Inclusive decode test against the receiver threshold.
pub fn can_receive(p_rx_dbm: f64, params: &RadioParams) -> bool {
    p_rx_dbm >= params.rx_threshold_dbm
}

pub fn senses_carrier(p_rx_dbm: f64, params: &RadioParams) -> bool {
    p_rx_dbm >= params.carrier_sense_dbm
}

/// Airtime of `bits` at `rate_bps`, in seconds.
pub fn airtime(bits: u32, rate_bps: f64) -> f64 {
    bits as f64 / rate_bps
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn example_params(r_th: f64) -> RadioParams {
        RadioParams {
            wavelength_m: 0.328,
            tx_gain: 1.0,
            rx_gain: 1.0,
            rx_threshold_dbm: r_th,
            carrier_sense_dbm: r_th - 6.0,
            max_tx_dbm: 24.497,
            min_tx_dbm: 0.0,
            channel_rate_bps: 2e6,
        }
    }

    // Linear-domain oracle: P_R = P_T (λ/4πd)^2 G_T G_R, evaluated in watts.
    fn friis_linear_dbm(p_tx_dbm: f64, lambda: f64, d: f64, gt: f64, gr: f64) -> f64 {
        let pt_w = 10f64.powf((p_tx_dbm - 30.0) / 10.0);
        let f = lambda / (4.0 * std::f64::consts::PI * d);
        let pr_w = pt_w * f * f * gt * gr;
        10.0 * pr_w.log10() + 30.0
    }

    #[test]
    fn friis_reference_point() {
        let p = example_params(-64.37);
        let pr = received_power(24.497, 250.0, &p);
        // Independent linear-domain evaluation gives -55.1290 dBm.
        assert_abs_diff_eq!(pr, friis_linear_dbm(24.497, 0.328, 250.0, 1.0, 1.0), epsilon = 1e-9);
        assert_abs_diff_eq!(pr, -55.129, epsilon = 1e-3);
    }

    #[test]
    fn doubling_distance_quarters_power() {
        let p = example_params(-64.37);
        let near = dbm_to_watts(received_power(20.0, 100.0, &p));
        let far = dbm_to_watts(received_power(20.0, 200.0, &p));
        assert_abs_diff_eq!(near / far, 4.0, epsilon = 1e-9);
    }

    #[test]
    fn unit_ratio_is_identity() {
        let p = example_params(-64.37);
        let d = 0.328 / (4.0 * std::f64::consts::PI);
        assert_abs_diff_eq!(received_power(17.0, d, &p), 17.0, epsilon = 1e-12);
    }

    #[test]
    #[should_panic(expected = "distance must be positive")]
    fn zero_distance_is_rejected() {
        received_power(10.0, 0.0, &example_params(-64.37));
    }

    #[test]
    fn receive_decisions() {
        let p = example_params(-64.37);
        assert!(can_receive(-55.13, &p));
        assert!(can_receive(-64.37, &p));
        assert!(!can_receive(-90.0, &p));
    }

    #[test]
    fn default_calibration_yields_250m_range() {
        let p = RadioParams::default();
        assert_abs_diff_eq!(p.wavelength_m, 0.328, epsilon = 1e-3);
        assert_abs_diff_eq!(p.max_tx_dbm, 24.4994, epsilon = 1e-3);
        assert_abs_diff_eq!(p.range_for(p.max_tx_dbm, p.rx_threshold_dbm), 250.0, epsilon = 1e-6);
        assert!(can_receive(received_power(p.max_tx_dbm, 249.9, &p), &p));
        assert!(!can_receive(received_power(p.max_tx_dbm, 250.1, &p), &p));
        assert!(p.carrier_sense_dbm <= p.rx_threshold_dbm);
    }

    #[test]
    fn dbm_watt_roundtrip() {
        assert_abs_diff_eq!(watts_to_dbm(0.2818), 24.4994, epsilon = 1e-4);
        assert_abs_diff_eq!(dbm_to_watts(15.26), 0.033574, epsilon = 1e-5);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn db_domain_matches_linear(pt in -10.0f64..40.0, lambda in 0.01f64..3.0, d in 0.5f64..5000.0) {
                let p = RadioParams { wavelength_m: lambda, ..example_params(-64.37) };
                let a = received_power(pt, d, &p);
                let b = friis_linear_dbm(pt, lambda, d, 1.0, 1.0);
                prop_assert!((a - b).abs() < 1e-9);
            }

            #[test]
            fn reception_monotone_in_distance(d1 in 1.0f64..1000.0, extra in 0.0f64..1000.0) {
                let p = RadioParams::default();
                let near = can_receive(received_power(p.max_tx_dbm, d1, &p), &p);
                let far = can_receive(received_power(p.max_tx_dbm, d1 + extra, &p), &p);
                prop_assert!(near || !far);
            }
        }
    }
}
