//! Power-domain superposition and successive interference cancellation.

use super::{Complex64, Constellation, NomaError};
use serde::Serialize;

const SHARE_SUM_TOLERANCE: f64 = 1e-9;

/// Two users sharing one resource block; the far (weaker) user holds the
/// larger power share `a_m`, the near user `a_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NomaPair {
    pub near_user: usize,
    pub far_user: usize,
    far_share: f64,
    near_share: f64,
}

impl NomaPair {
    pub fn new(near_user: usize, far_user: usize, far_share: f64, near_share: f64) -> Result<Self, NomaError> {
        validate_shares(far_share, near_share)?;
        if near_user == far_user {
            return Err(NomaError::SameUser(near_user));
        }
        Ok(Self { near_user, far_user, far_share, near_share })
    }

    /// a_m
    pub fn far_share(&self) -> f64 {
        self.far_share
    }

    /// a_n
    pub fn near_share(&self) -> f64 {
        self.near_share
    }
}

pub(crate) fn validate_shares(far: f64, near: f64) -> Result<(), NomaError> {
    let ok = far.is_finite()
        && near.is_finite()
        && (far + near - 1.0).abs() <= SHARE_SUM_TOLERANCE
        && 0.0 < near
        && near < far
        && far < 1.0;
    if ok {
        Ok(())
    } else {
        Err(NomaError::InvalidPowerShares { far, near })
    }
}

/// `x = √(a_m P)·s_far + √(a_n P)·s_near`.
pub fn superpose_downlink(
    pair: &NomaPair,
    s_far: Complex64,
    s_near: Complex64,
    total_power: f64,
) -> Result<Complex64, NomaError> {
    if !(total_power.is_finite() && total_power > 0.0) {
        return Err(NomaError::InvalidPower(total_power));
    }
    Ok((pair.far_share * total_power).sqrt() * s_far + (pair.near_share * total_power).sqrt() * s_near)
}

/// How the first-decoded signal is removed before the second decode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cancellation {
    /// Perfect SIC: the true symbol index of the first-decoded user is
    /// subtracted, so decision errors never propagate.
    Genie(usize),
    /// The receiver subtracts its own hard decision.
    DecisionDirected,
}

/// Uplink transmitter seen at the BS: transmit power and complex channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UplinkLink {
    pub power: f64,
    pub channel: Complex64,
}

impl UplinkLink {
    pub fn received_power(&self) -> f64 {
        self.power * self.channel.norm_sqr()
    }

    fn amplitude(&self) -> Complex64 {
        self.power.sqrt() * self.channel
    }

    fn validate(&self) -> Result<(), NomaError> {
        if self.power.is_finite() && self.power >= 0.0 && self.channel.is_finite() {
            Ok(())
        } else {
            Err(NomaError::InvalidLink)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UplinkSicOutput {
    pub near_symbol: usize,
    pub far_symbol: usize,
    pub near_sinr: f64,
    pub far_sinr: f64,
}

fn validate_noise(noise_var: f64) -> Result<(), NomaError> {
    if noise_var.is_finite() && noise_var > 0.0 {
        Ok(())
    } else {
        Err(NomaError::InvalidNoise(noise_var))
    }
}

fn equalize_and_decide(z: Complex64, amplitude: Complex64, constellation: &Constellation) -> usize {
    if amplitude.norm_sqr() == 0.0 {
        return 0;
    }
    constellation.nearest(z / amplitude)
}

/// Uplink SIC at the BS: the near user is decoded first treating the far
/// user as noise, then removed, then the far user is decoded.
pub fn sic_decode_uplink(
    y: Complex64,
    near: &UplinkLink,
    far: &UplinkLink,
    noise_var: f64,
    constellation: &Constellation,
    cancellation: Cancellation,
) -> Result<UplinkSicOutput, NomaError> {
    validate_noise(noise_var)?;
    near.validate()?;
    far.validate()?;
    let near_rx = near.received_power();
    let far_rx = far.received_power();
    let near_sinr = near_rx / (far_rx + noise_var);
    let far_sinr = far_rx / noise_var;

    let near_symbol = equalize_and_decide(y, near.amplitude(), constellation);
    let cancelled = match cancellation {
        Cancellation::Genie(s) => s,
        Cancellation::DecisionDirected => near_symbol,
    };
    let residual = y - near.amplitude() * constellation.point(cancelled)?;
    let far_symbol = equalize_and_decide(residual, far.amplitude(), constellation);
    Ok(UplinkSicOutput { near_symbol, far_symbol, near_sinr, far_sinr })
}

/// Downlink channels of a pair: the complex channel to the near user (whose
/// receiver runs SIC) and the far user's channel power gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DownlinkChannel {
    pub near: Complex64,
    pub far_gain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DownlinkSicOutput {
    pub near_symbol: usize,
    /// Near user's SINR after removing the far user's signal.
    pub near_sinr: f64,
    /// Far user's SINR decoding directly, near signal as noise.
    pub far_sinr: f64,
}

/// Downlink SIC at the near user: the far user's higher-power signal is
/// detected and subtracted first.
pub fn sic_decode_downlink(
    y_at_near: Complex64,
    pair: &NomaPair,
    total_power: f64,
    channel: &DownlinkChannel,
    noise_var: f64,
    constellation: &Constellation,
    cancellation: Cancellation,
) -> Result<DownlinkSicOutput, NomaError> {
    validate_noise(noise_var)?;
    if !(total_power.is_finite() && total_power > 0.0) {
        return Err(NomaError::InvalidPower(total_power));
    }
    if !(channel.near.is_finite() && channel.far_gain.is_finite() && channel.far_gain >= 0.0) {
        return Err(NomaError::InvalidLink);
    }
    let g_near = channel.near.norm_sqr();
    let near_sinr = pair.near_share * total_power * g_near / noise_var;
    let far_rx = total_power * channel.far_gain;
    let far_sinr = pair.far_share * far_rx / (pair.near_share * far_rx + noise_var);

    let far_amp = (pair.far_share * total_power).sqrt() * channel.near;
    let near_amp = (pair.near_share * total_power).sqrt() * channel.near;
    let far_guess = equalize_and_decide(y_at_near, far_amp, constellation);
    let cancelled = match cancellation {
        Cancellation::Genie(s) => s,
        Cancellation::DecisionDirected => far_guess,
    };
    let residual = y_at_near - far_amp * constellation.point(cancelled)?;
    let near_symbol = equalize_and_decide(residual, near_amp, constellation);
    Ok(DownlinkSicOutput { near_symbol, near_sinr, far_sinr })
}
