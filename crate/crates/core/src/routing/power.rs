//! Signal-strength link filtering and minimum transmit power estimation.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinkVerdict {
    Accept,
    Discard,
}

/// Drops routing control frames that arrived below `rss_accept_threshold_dbm`.
pub fn link_quality_filter(p_rx_dbm: f64, rss_accept_threshold_dbm: f64) -> LinkVerdict {
    if p_rx_dbm < rss_accept_threshold_dbm {
        LinkVerdict::Discard
    } else {
        LinkVerdict::Accept
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathLoss {
    pub db: f64,
    /// Set when the received power exceeded the advertised transmit power
    /// and the loss was clamped to zero.
    pub clamped: bool,
}

/// Path loss in dB from the sender's advertised power and the measured RSS.
pub fn path_loss(p_tx_dbm: f64, p_rx_dbm: f64) -> PathLoss {
    let db = p_tx_dbm - p_rx_dbm;
    if db < 0.0 {
        PathLoss { db: 0.0, clamped: true }
    } else {
        PathLoss { db, clamped: false }
    }
}

/// Added to every estimate so float rounding in the dB arithmetic cannot put
/// a closed-loop reception a hair below the threshold.
pub const P_TMIN_GUARD_DB: f64 = 1e-10;

/// Minimum transmit power `k * (path_loss + r_th)` in dBm, clamped to the
/// radio's power range.
pub fn min_tx_power(path_loss_db: f64, r_th_dbm: f64, k: f64, min_dbm: f64, max_dbm: f64) -> f64 {
    debug_assert!(path_loss_db >= 0.0 && k >= 1.0);
    (k * (path_loss_db + r_th_dbm) + P_TMIN_GUARD_DB).clamp(min_dbm, max_dbm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::{dbm_to_watts, received_power, RadioParams};
    use approx::assert_abs_diff_eq;

    #[test]
    fn filter_decisions() {
        assert_eq!(link_quality_filter(-90.0, -60.0), LinkVerdict::Discard);
        assert_eq!(link_quality_filter(-60.0, -60.0), LinkVerdict::Accept);
        assert_eq!(link_quality_filter(-59.0, -60.0), LinkVerdict::Accept);
    }

    #[test]
    fn path_loss_examples() {
        assert_abs_diff_eq!(path_loss(24.497, -55.13).db, 79.627, epsilon = 1e-9);
        assert_eq!(path_loss(10.0, 10.0), PathLoss { db: 0.0, clamped: false });
        assert_abs_diff_eq!(path_loss(20.0, -44.37).db, 64.37, epsilon = 1e-9);
        assert_eq!(path_loss(0.0, 3.0), PathLoss { db: 0.0, clamped: true });
    }

    #[test]
    fn min_power_reference() {
        let p = min_tx_power(79.63, -64.37, 1.0, -30.0, 30.0);
        assert_abs_diff_eq!(p, 15.26, epsilon = 1e-9);
        // dBm -> W oracle: 10^((15.26 - 30)/10)
        assert_abs_diff_eq!(dbm_to_watts(p), 0.0335738, epsilon = 1e-6);
    }

    #[test]
    fn min_power_clamps() {
        assert_eq!(min_tx_power(100.0, -55.0, 1.0, 0.0, 24.5), 24.5);
        assert_eq!(min_tx_power(40.0, -55.0, 1.0, 0.0, 24.5), 0.0);
    }

    #[test]
    fn larger_k_raises_power() {
        let a = min_tx_power(79.63, -64.37, 1.0, -30.0, 30.0);
        let b = min_tx_power(79.63, -64.37, 1.1, -30.0, 30.0);
        assert!(b > a);
    }

    #[test]
    fn rrep_measurement_composes() {
        // RREP heard at -55.13 dBm from a sender advertising 24.497 dBm.
        let pl = path_loss(24.497, -55.13);
        let p = min_tx_power(pl.db, -64.37, 1.0, -30.0, 30.0);
        assert_abs_diff_eq!(p, 15.257, epsilon = 1e-9);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // Sending at the estimated power lands at or above the threshold
            // when nothing moved since the measurement.
            #[test]
            fn closed_loop_meets_threshold(d in 1.0f64..250.0, k in 1.0f64..2.0) {
                let params = RadioParams::default();
                let rx = received_power(params.max_tx_dbm, d, &params);
                let pl = path_loss(params.max_tx_dbm, rx);
                let p = min_tx_power(pl.db, params.rx_threshold_dbm, k, params.min_tx_dbm, params.max_tx_dbm);
                let arrives = received_power(p, d, &params);
                prop_assert!(arrives >= params.rx_threshold_dbm);
            }
        }
    }
}
