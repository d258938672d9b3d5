use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::delivery::DeliveryTracker;
use super::RunConfig;
use crate::baselines::{OpportunisticState, TdmaRoundState};
use crate::channel::ChannelState;
use crate::error::{Error, Result};
use crate::lyapunov::{LyapunovController, QueueState, SlotDecision};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "lyapunov")]
    Lyapunov,
    #[serde(rename = "unicast-opp")]
    UnicastOpportunistic,
    #[serde(rename = "tdma-cc")]
    TdmaCodedCaching,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [
        PolicyKind::Lyapunov,
        PolicyKind::UnicastOpportunistic,
        PolicyKind::TdmaCodedCaching,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Lyapunov => "lyapunov",
            PolicyKind::UnicastOpportunistic => "unicast-opp",
            PolicyKind::TdmaCodedCaching => "tdma-cc",
        }
    }

    pub fn build(self, config: &RunConfig) -> Result<Box<dyn Policy>> {
        Ok(match self {
            PolicyKind::Lyapunov => Box::new(LyapunovPolicy::new(config)?),
            PolicyKind::UnicastOpportunistic => Box::new(OpportunisticPolicy::new(config)),
            PolicyKind::TdmaCodedCaching => Box::new(TdmaPolicy::new(config)),
        })
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                Error::config(
                    "policy.name",
                    format!("unknown policy `{s}` (expected lyapunov, unicast-opp or tdma-cc)"),
                )
            })
    }
}

/// What one slot did, in file units.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotOutcome {
    pub admitted: Vec<f64>,
    pub delivered: Vec<u64>,
    /// Admitted files not yet turned into codewords (end of slot).
    pub pending_files: f64,
    /// Queued codeword bits divided by the file size (end of slot).
    pub codeword_files: f64,
    pub virtual_backlog: f64,
}

pub trait Policy: Send {
    fn step(&mut self, channel: &ChannelState) -> Result<SlotOutcome>;
}

pub struct LyapunovPolicy {
    controller: LyapunovController,
    state: QueueState,
    tracker: DeliveryTracker,
    slot: u64,
}

impl LyapunovPolicy {
    pub fn new(config: &RunConfig) -> Result<Self> {
        let controller = LyapunovController::new(
            config.params,
            config.cache,
            config.channel.power(),
            config.channel.slot_length(),
        )?;
        Ok(Self {
            state: QueueState::empty(config.num_users()),
            tracker: DeliveryTracker::new(&config.cache),
            controller,
            slot: 0,
        })
    }

    pub fn state(&self) -> &QueueState {
        &self.state
    }

    pub fn tracker(&self) -> &DeliveryTracker {
        &self.tracker
    }

    pub fn controller(&self) -> &LyapunovController {
        &self.controller
    }

    /// Steps one slot and also returns the controls that were applied.
    pub fn step_with_decision(&mut self, channel: &ChannelState) -> Result<(SlotOutcome, SlotDecision)> {
        let decision = self.controller.decide(&self.state, &channel.gains)?;
        // Codeword counters grow by the segments real files produced, so
        // they always equal the physical queues.
        let slot = self.tracker.apply(&decision, self.slot);
        self.controller
            .apply_with_arrivals(&mut self.state, &decision, &slot.arrivals);
        let delivered = slot.delivered;
        self.slot += 1;
        let f = self.controller.cache().file_bits() as f64;
        let outcome = SlotOutcome {
            admitted: decision.admissions.clone(),
            delivered,
            pending_files: self.state.total_pending(),
            codeword_files: self.state.total_codeword_bits() as f64 / f,
            virtual_backlog: self.state.total_virtual(),
        };
        Ok((outcome, decision))
    }
}

impl Policy for LyapunovPolicy {
    fn step(&mut self, channel: &ChannelState) -> Result<SlotOutcome> {
        self.step_with_decision(channel).map(|(o, _)| o)
    }
}

pub struct OpportunisticPolicy {
    state: OpportunisticState,
    power: f64,
    alpha: f64,
    slot_length: u32,
    file_bits: f64,
    started: bool,
}

impl OpportunisticPolicy {
    pub fn new(config: &RunConfig) -> Self {
        Self {
            state: OpportunisticState::new(&config.cache),
            power: config.channel.power(),
            alpha: config.params.alpha,
            slot_length: config.channel.slot_length(),
            file_bits: config.cache.file_bits() as f64,
            started: false,
        }
    }

    pub fn state(&self) -> &OpportunisticState {
        &self.state
    }
}

impl Policy for OpportunisticPolicy {
    fn step(&mut self, channel: &ChannelState) -> Result<SlotOutcome> {
        let k = channel.num_users();
        // Each user always has exactly one file in flight.
        let mut admitted = vec![if self.started { 0.0 } else { 1.0 }; k];
        self.started = true;
        let out = self.state.step(&channel.gains, self.power, self.alpha, self.slot_length);
        let mut delivered = vec![0; k];
        delivered[out.served_user] = out.files_completed;
        admitted[out.served_user] += out.files_completed as f64;
        Ok(SlotOutcome {
            admitted,
            delivered,
            pending_files: 0.0,
            codeword_files: self.state.residual_bits.iter().sum::<u64>() as f64 / self.file_bits,
            virtual_backlog: 0.0,
        })
    }
}

pub struct TdmaPolicy {
    state: TdmaRoundState,
    power: f64,
    slot_length: u32,
    file_bits: f64,
    started: bool,
}

impl TdmaPolicy {
    pub fn new(config: &RunConfig) -> Self {
        Self {
            state: TdmaRoundState::new(&config.cache),
            power: config.channel.power(),
            slot_length: config.channel.slot_length(),
            file_bits: config.cache.file_bits() as f64,
            started: false,
        }
    }
}

impl Policy for TdmaPolicy {
    fn step(&mut self, channel: &ChannelState) -> Result<SlotOutcome> {
        let k = channel.num_users();
        let out = self.state.step(&channel.gains, self.power, self.slot_length);
        let per_user = out.files_delivered / k as u64;
        // The first round's requests arrive at slot 0; each completed round
        // triggers the next one.
        let initial = if self.started { 0.0 } else { 1.0 };
        self.started = true;
        Ok(SlotOutcome {
            admitted: vec![initial + per_user as f64; k],
            delivered: vec![per_user; k],
            pending_files: 0.0,
            codeword_files: self.state.residual_bits() as f64 / self.file_bits,
            virtual_backlog: 0.0,
        })
    }
}
