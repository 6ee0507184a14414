//! Physical layer: link budget, noise, SINR partitioning, BER-based capture
//! and clear-channel assessment.
//!
//! All functions here are pure. Powers are carried in dBm at the API edge and
//! summed in linear milliwatts internally.

use std::f64::consts::PI;

use statrs::function::erf::erfc;

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modulation {
    UwbBpm,
    Oqpsk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CcaMode {
    /// CCA mode 3 for TH-IR-UWB: the channel is always reported free.
    AlwaysFree,
    /// Busy iff sensed power reaches `rx_threshold`.
    Threshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Propagation {
    /// Free space below the crossover distance, two-ray ground beyond it.
    TwoRayGround,
    FreeSpace,
}

/// How receptions are decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelModel {
    /// Per-segment SINR through the BER curve, single-frame receiver lock,
    /// half-duplex radios.
    BerCapture,
    /// Every frame at or above sensitivity is received; no interference.
    Ideal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadioParams {
    /// Hz
    pub bandwidth: f64,
    /// Hz
    pub carrier_frequency: f64,
    /// bits/s
    pub bitrate: f64,
    /// m, identical for transmitter and receiver
    pub antenna_height: f64,
    /// dB, identical for transmitter and receiver
    pub antenna_gain: f64,
    /// dB
    pub noise_figure: f64,
    /// K
    pub temperature: f64,
    /// dBm, minimum peak power for decode eligibility
    pub sensitivity: f64,
    /// dBm, CCA busy threshold
    pub rx_threshold: f64,
    /// dBm
    pub tx_power: f64,
    pub modulation: Modulation,
    pub cca_mode: CcaMode,
    pub propagation: Propagation,
    pub channel: ChannelModel,
}

impl RadioParams {
    /// TH-IR-UWB column of the radio parameter table.
    pub fn uwb() -> Self {
        RadioParams {
            bandwidth: 100e6,
            carrier_frequency: 0.8e9,
            bitrate: 1e6,
            antenna_height: 0.45,
            antenna_gain: 3.0,
            noise_figure: 5.0,
            temperature: 270.0,
            sensitivity: -85.0,
            rx_threshold: -80.0,
            tx_power: -24.318,
            modulation: Modulation::UwbBpm,
            cca_mode: CcaMode::AlwaysFree,
            propagation: Propagation::TwoRayGround,
            channel: ChannelModel::BerCapture,
        }
    }

    /// 2.45 GHz OQPSK column.
    pub fn oqpsk() -> Self {
        RadioParams {
            bandwidth: 2e6,
            carrier_frequency: 2.45e9,
            bitrate: 0.25e6,
            antenna_height: 0.03,
            antenna_gain: 3.0,
            noise_figure: 10.0,
            temperature: 270.0,
            sensitivity: -96.0,
            rx_threshold: -85.0,
            tx_power: 17.0,
            modulation: Modulation::Oqpsk,
            cca_mode: CcaMode::Threshold,
            propagation: Propagation::TwoRayGround,
            channel: ChannelModel::BerCapture,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "uwb" => Some(Self::uwb()),
            "oqpsk" => Some(Self::oqpsk()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if !(self.bandwidth > 0.0) {
            return Err(("radio.bandwidth", "must be > 0".into()));
        }
        if !(self.bitrate > 0.0) {
            return Err(("radio.bitrate", "must be > 0".into()));
        }
        if self.bandwidth < self.bitrate {
            return Err(("radio.bandwidth", "must be >= radio.bitrate".into()));
        }
        if !(self.carrier_frequency > 0.0) {
            return Err(("radio.carrier_frequency", "must be > 0".into()));
        }
        if !(self.antenna_height > 0.0) {
            return Err(("radio.antenna_height", "must be > 0".into()));
        }
        if !(self.temperature > 0.0) {
            return Err(("radio.temperature", "must be > 0".into()));
        }
        if self.sensitivity > self.rx_threshold {
            return Err(("radio.sensitivity", "must be <= radio.rx_threshold".into()));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency
    }

    /// Bandwidth-to-bitrate ratio applied to SINR to obtain Eb/N0.
    pub fn processing_gain(&self) -> f64 {
        self.bandwidth / self.bitrate
    }

    /// On-air duration of `bits` bits.
    pub fn airtime(&self, bits: u32) -> f64 {
        f64::from(bits) / self.bitrate
    }

    /// Largest distance at which the received power still reaches sensitivity.
    pub fn max_hop_distance(&self) -> f64 {
        let budget = self.tx_power + 2.0 * self.antenna_gain - self.sensitivity;
        invert_path_loss(budget, self)
    }
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// Thermal noise kTB plus the receiver noise figure, in dBm.
pub fn noise_floor(p: &RadioParams) -> f64 {
    let ktb_mw = BOLTZMANN * p.temperature * p.bandwidth * 1e3;
    mw_to_dbm(ktb_mw) + p.noise_figure
}

/// Distance at which free-space and two-ray losses coincide.
pub fn crossover_distance(p: &RadioParams) -> f64 {
    4.0 * PI * p.antenna_height * p.antenna_height / p.wavelength()
}

pub fn free_space_loss(d: f64, p: &RadioParams) -> f64 {
    20.0 * (4.0 * PI * d / p.wavelength()).log10()
}

pub fn two_ray_loss(d: f64, p: &RadioParams) -> f64 {
    let h2 = p.antenna_height * p.antenna_height;
    40.0 * d.log10() - 10.0 * (h2 * h2).log10()
}

/// Path loss in dB at distance `d` metres.
///
/// # Panics
///
/// Non-positive distances are a programming error.
pub fn path_loss(d: f64, p: &RadioParams) -> f64 {
    assert!(d > 0.0, "path_loss requires d > 0, got {d}");
    match p.propagation {
        Propagation::FreeSpace => free_space_loss(d, p),
        Propagation::TwoRayGround => {
            if d <= crossover_distance(p) {
                free_space_loss(d, p)
            } else {
                two_ray_loss(d, p)
            }
        }
    }
}

fn invert_path_loss(loss_db: f64, p: &RadioParams) -> f64 {
    let fs = |l: f64| p.wavelength() / (4.0 * PI) * 10f64.powf(l / 20.0);
    match p.propagation {
        Propagation::FreeSpace => fs(loss_db),
        Propagation::TwoRayGround => {
            let dc = crossover_distance(p);
            if loss_db <= free_space_loss(dc, p) {
                fs(loss_db)
            } else {
                let h2 = p.antenna_height * p.antenna_height;
                10f64.powf((loss_db + 10.0 * (h2 * h2).log10()) / 40.0)
            }
        }
    }
}

/// Received power in dBm for a transmission at `tx_power_dbm` over `d` metres.
pub fn rx_power(tx_power_dbm: f64, d: f64, p: &RadioParams) -> f64 {
    tx_power_dbm + 2.0 * p.antenna_gain - path_loss(d, p)
}

/// A signal as seen at one receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrivingSignal {
    pub start: f64,
    pub end: f64,
    pub power_dbm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceptionSegment {
    pub t_begin: f64,
    pub t_end: f64,
    /// linear ratio
    pub sinr: f64,
}

/// Partitions the target's interval at every interferer start and end and
/// computes the SINR of each piece.
pub fn sinr_segments(
    target: &ArrivingSignal,
    concurrent: &[ArrivingSignal],
    noise_dbm: f64,
) -> Vec<ReceptionSegment> {
    let mut cuts = vec![target.start, target.end];
    for s in concurrent {
        for t in [s.start, s.end] {
            if t > target.start && t < target.end {
                cuts.push(t);
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let signal = dbm_to_mw(target.power_dbm);
    let noise = dbm_to_mw(noise_dbm);
    cuts.windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let interference: f64 = concurrent
                .iter()
                .filter(|s| s.start < b && s.end > a)
                .map(|s| dbm_to_mw(s.power_dbm))
                .sum();
            ReceptionSegment {
                t_begin: a,
                t_end: b,
                sinr: signal / (noise + interference),
            }
        })
        .collect()
}

/// Gaussian tail probability.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Bit error rate at linear SINR, coherent binary detection with processing gain.
pub fn bit_error_rate(sinr: f64, p: &RadioParams) -> f64 {
    debug_assert!(sinr >= 0.0);
    let ebn0 = sinr * p.processing_gain();
    match p.modulation {
        // Both radios use the coherent binary curve; kept separate so either
        // can be swapped independently.
        Modulation::UwbBpm | Modulation::Oqpsk => q_function((2.0 * ebn0).sqrt()).clamp(0.0, 0.5),
    }
}

/// Probability that every bit of the frame survives its segment's BER.
pub fn packet_success(segments: &[ReceptionSegment], p: &RadioParams) -> f64 {
    let log_p: f64 = segments
        .iter()
        .map(|s| {
            let bits = (s.t_end - s.t_begin) * p.bitrate;
            let ber = bit_error_rate(s.sinr, p);
            bits * (-ber).ln_1p()
        })
        .sum();
    log_p.exp().clamp(0.0, 1.0)
}

/// Final reception verdict given one uniform draw in [0, 1).
pub fn reception_succeeds(success_prob: f64, peak_dbm: f64, p: &RadioParams, draw: f64) -> bool {
    peak_dbm >= p.sensitivity && draw < success_prob
}

/// Clear-channel assessment against the power currently sensed at the node.
pub fn clear_channel(p: &RadioParams, medium_power_dbm: f64) -> bool {
    match p.cca_mode {
        CcaMode::AlwaysFree => true,
        CcaMode::Threshold => medium_power_dbm < p.rx_threshold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn noise_floor_unit_definition() {
        // kTB = 1 mW with B = 1 Hz
        let mut p = RadioParams::uwb();
        p.bandwidth = 1.0;
        p.bitrate = 1.0;
        p.noise_figure = 0.0;
        p.temperature = 1e-3 / BOLTZMANN;
        assert_abs_diff_eq!(noise_floor(&p), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn free_space_unit_argument() {
        let p = RadioParams::uwb();
        let d = p.wavelength() / (4.0 * PI);
        assert_abs_diff_eq!(path_loss(d, &p), 0.0, epsilon = 1e-9);
    }

    #[test]
    #[should_panic]
    fn zero_distance_is_fatal() {
        path_loss(0.0, &RadioParams::uwb());
    }

    #[test]
    fn no_interferers_single_segment() {
        let t = ArrivingSignal {
            start: 0.0,
            end: 1e-3,
            power_dbm: -60.0,
        };
        let segs = sinr_segments(&t, &[], -90.0);
        assert_eq!(segs.len(), 1);
        assert_abs_diff_eq!(segs[0].sinr, 1000.0, epsilon = 1e-6);
    }

    #[test]
    fn half_covering_interferer() {
        let t = ArrivingSignal {
            start: 0.0,
            end: 2.0,
            power_dbm: -60.0,
        };
        let i = ArrivingSignal {
            start: 1.0,
            end: 2.0,
            power_dbm: -70.0,
        };
        let segs = sinr_segments(&t, &[i], -90.0);
        assert_eq!(segs.len(), 2);
        assert_eq!((segs[0].t_begin, segs[0].t_end), (0.0, 1.0));
        assert_eq!((segs[1].t_begin, segs[1].t_end), (1.0, 2.0));
        assert!(segs[0].sinr > segs[1].sinr);
    }

    #[test]
    fn interference_sums_linearly() {
        let t = ArrivingSignal {
            start: 0.0,
            end: 1.0,
            power_dbm: -60.0,
        };
        let i = ArrivingSignal {
            start: -1.0,
            end: 2.0,
            power_dbm: -70.0,
        };
        let noise = -200.0;
        let one = sinr_segments(&t, &[i], noise)[0].sinr;
        let two = sinr_segments(&t, &[i, i], noise)[0].sinr;
        assert_abs_diff_eq!(one / two, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn ber_limits() {
        let p = RadioParams::uwb();
        assert_abs_diff_eq!(bit_error_rate(0.0, &p), 0.5, epsilon = 1e-15);
        assert!(bit_error_rate(1.0, &p) < 1e-15);
        assert!(bit_error_rate(1e9, &p) < 1e-300);
    }

    #[test]
    fn packet_success_bounds() {
        let p = RadioParams::uwb();
        let clean = [ReceptionSegment {
            t_begin: 0.0,
            t_end: 1.152e-3,
            sinr: 1e6,
        }];
        assert_abs_diff_eq!(packet_success(&clean, &p), 1.0, epsilon = 1e-12);
        let dead = [ReceptionSegment {
            t_begin: 0.0,
            t_end: 1e-6,
            sinr: 0.0,
        }];
        assert!(packet_success(&dead, &p) <= 0.5 + 1e-12);
        let long_dead = [ReceptionSegment {
            t_begin: 0.0,
            t_end: 1e-4,
            sinr: 0.0,
        }];
        assert!(packet_success(&long_dead, &p) < 1e-29);
    }

    #[test]
    fn sensitivity_gates_reception() {
        let p = RadioParams::uwb();
        assert!(reception_succeeds(1.0, -84.0, &p, 0.99));
        assert!(!reception_succeeds(1.0, -86.0, &p, 0.0));
        assert!(!reception_succeeds(0.3, -50.0, &p, 0.3));
    }

    #[test]
    fn cca_modes() {
        assert!(clear_channel(&RadioParams::uwb(), -20.0));
        let o = RadioParams::oqpsk();
        assert!(!clear_channel(&o, -80.0));
        assert!(clear_channel(&o, noise_floor(&o)));
    }

    #[test]
    fn oqpsk_ber_near_1e5_at_9_6_db() {
        let mut p = RadioParams::oqpsk();
        // Eb/N0 = sinr * B/R; choose sinr so Eb/N0 = 9.6 dB.
        let ebn0 = 10f64.powf(0.96);
        let sinr = ebn0 / p.processing_gain();
        let ber = bit_error_rate(sinr, &p);
        assert!(ber > 10f64.powf(-5.5) && ber < 10f64.powf(-4.5), "{ber}");
        p.modulation = Modulation::UwbBpm;
        assert_eq!(bit_error_rate(sinr, &p), ber);
    }

    proptest::proptest! {
        #[test]
        fn db_round_trip(x in 1e-30f64..1e30) {
            let back = dbm_to_mw(mw_to_dbm(x));
            proptest::prop_assert!(((back - x) / x).abs() < 1e-12);
        }

        #[test]
        fn ber_monotone(a in 0.0f64..10.0, b in 0.0f64..10.0) {
            let p = RadioParams::oqpsk();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            proptest::prop_assert!(bit_error_rate(hi, &p) <= bit_error_rate(lo, &p));
        }

        #[test]
        fn path_loss_monotone(a in 0.01f64..500.0, b in 0.01f64..500.0) {
            for p in [RadioParams::uwb(), RadioParams::oqpsk()] {
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                proptest::prop_assert!(path_loss(hi, &p) >= path_loss(lo, &p));
            }
        }

        #[test]
        fn interferer_never_helps(
            sig in -90.0f64..-40.0,
            ip in -100.0f64..-40.0,
            s in 0.0f64..1e-3,
            len in 1e-6f64..1e-3,
        ) {
            let p = RadioParams::oqpsk();
            let t = ArrivingSignal { start: 0.0, end: 1e-3, power_dbm: sig };
            let base = vec![ArrivingSignal { start: 2e-4, end: 6e-4, power_dbm: -95.0 }];
            let mut more = base.clone();
            more.push(ArrivingSignal { start: s, end: s + len, power_dbm: ip });
            let noise = noise_floor(&p);
            let p0 = packet_success(&sinr_segments(&t, &base, noise), &p);
            let p1 = packet_success(&sinr_segments(&t, &more, noise), &p);
            proptest::prop_assert!((0.0..=1.0).contains(&p1));
            proptest::prop_assert!(p1 <= p0 + 1e-12);
        }
    }
}
