//! I.i.d. block-fading gains.
//!
//! Each user owns an independent ChaCha stream derived from the run seed, so
//! a trace depends only on `(seed, params)` and not on evaluation order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subset::MAX_USERS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pathloss: Vec<f64>,
    power: f64,
    slot_length: u32,
}

impl ChannelParams {
    /// `pathloss` holds the amplitude scale of every user; `power` is linear.
    pub fn new(pathloss: Vec<f64>, power: f64, slot_length: u32) -> Result<Self> {
        if pathloss.is_empty() {
            return Err(Error::param("K", "at least one user is required"));
        }
        if pathloss.len() > MAX_USERS {
            return Err(Error::param(
                "K",
                format!("{} users exceeds the cap of {MAX_USERS}", pathloss.len()),
            ));
        }
        if let Some((k, b)) = pathloss
            .iter()
            .enumerate()
            .find(|(_, b)| !(b.is_finite() && **b > 0.0))
        {
            return Err(Error::param(
                "beta",
                format!("path loss of user {} must be positive, got {b}", k + 1),
            ));
        }
        if !(power.is_finite() && power > 0.0) {
            return Err(Error::param("P", format!("must be positive, got {power}")));
        }
        if slot_length == 0 {
            return Err(Error::param("T_slot", "must be at least 1"));
        }
        Ok(Self {
            pathloss,
            power,
            slot_length,
        })
    }

    /// Two classes: the first half of the users at `strong`, the rest at `weak`.
    pub fn two_class(
        num_users: usize,
        strong: f64,
        weak: f64,
        power: f64,
        slot_length: u32,
    ) -> Result<Self> {
        let strong_count = num_users.div_ceil(2);
        let pathloss = (0..num_users)
            .map(|k| if k < strong_count { strong } else { weak })
            .collect();
        Self::new(pathloss, power, slot_length)
    }

    pub fn num_users(&self) -> usize {
        self.pathloss.len()
    }

    pub fn pathloss(&self) -> &[f64] {
        &self.pathloss
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn slot_length(&self) -> u32 {
        self.slot_length
    }

    /// Mean power gain of user `k`.
    pub fn mean_gain(&self, k: usize) -> f64 {
        self.pathloss[k] * self.pathloss[k]
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    pub gains: Vec<f64>,
    pub slot: u64,
}

impl ChannelState {
    pub fn new(gains: Vec<f64>, slot: u64) -> Self {
        debug_assert!(gains.iter().all(|h| *h >= 0.0));
        Self { gains, slot }
    }

    pub fn num_users(&self) -> usize {
        self.gains.len()
    }
}

/// Seeded source of channel states.
#[derive(Debug, Clone)]
pub struct FadingChannel {
    params: ChannelParams,
    streams: Vec<ChaCha8Rng>,
    slot: u64,
}

impl FadingChannel {
    pub fn new(params: ChannelParams, seed: u64) -> Self {
        let streams = (0..params.num_users())
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(k as u64 + 1);
                rng
            })
            .collect();
        Self {
            params,
            streams,
            slot: 0,
        }
    }

    pub fn params(&self) -> &ChannelParams {
        &self.params
    }

    /// Draws the next slot: `h_k = beta_k^2 * Exp(1)`.
    pub fn sample_slot(&mut self) -> ChannelState {
        let gains = self
            .streams
            .iter_mut()
            .zip(&self.params.pathloss)
            .map(|(rng, beta)| beta * beta * unit_exponential(rng))
            .collect();
        let state = ChannelState::new(gains, self.slot);
        self.slot += 1;
        state
    }
}

impl Iterator for FadingChannel {
    type Item = ChannelState;

    fn next(&mut self) -> Option<ChannelState> {
        Some(self.sample_slot())
    }
}

/// Inverse-CDF draw of a unit-mean exponential.
pub fn unit_exponential<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.gen();
    -(1.0 - u).ln()
}
