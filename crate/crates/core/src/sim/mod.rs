//! Slot loop, per-policy adapters and run metrics.

mod delivery;
mod policy;

pub use delivery::{DeliveryStats, DeliveryTracker, FileRecord, SlotDelivery};
pub use policy::{LyapunovPolicy, OpportunisticPolicy, Policy, PolicyKind, SlotOutcome, TdmaPolicy};

use serde::{Deserialize, Serialize};

use crate::caching::CacheParams;
use crate::channel::{ChannelParams, FadingChannel};
use crate::error::{Error, Result};
use crate::lyapunov::{utility_g, PolicyParams};

/// Everything one simulation run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub policy: PolicyKind,
    pub channel: ChannelParams,
    pub cache: CacheParams,
    pub params: PolicyParams,
    pub slots: u64,
    pub seed: u64,
    /// Leading fraction of slots left out of summary averages.
    pub warmup_fraction: f64,
    /// Slots per trace row.
    pub window: u64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.slots == 0 {
            return Err(Error::config("run.slots", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(Error::config(
                "run.warmup_fraction",
                format!("must lie in [0, 1), got {}", self.warmup_fraction),
            ));
        }
        if self.window == 0 {
            return Err(Error::config("run.window", "must be at least 1"));
        }
        if self.channel.num_users() != self.cache.num_users() {
            return Err(Error::config(
                "channel.K",
                "channel and cache disagree on the number of users",
            ));
        }
        self.params.validate().map_err(|e| Error::config("policy", e.to_string()))
    }

    pub fn num_users(&self) -> usize {
        self.cache.num_users()
    }

    fn warmup_slots(&self) -> u64 {
        ((self.slots as f64 * self.warmup_fraction).floor() as u64).min(self.slots - 1)
    }
}

/// Metrics of one trace window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    /// Last slot of the window (exclusive end).
    pub slot: u64,
    pub delivered_rates: Vec<f64>,
    pub admitted_rates: Vec<f64>,
    pub total_pending_files: f64,
    pub total_codeword_files: f64,
    pub total_virtual: f64,
    pub sum_utility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub policy: PolicyKind,
    pub num_users: usize,
    pub v: f64,
    pub alpha: f64,
    pub seed: u64,
    pub slots: u64,
    pub measured_slots: u64,
    /// Files per slot.
    pub admitted_rates: Vec<f64>,
    /// Files per slot.
    pub delivered_rates: Vec<f64>,
    pub sum_delivered_rate: f64,
    pub sum_utility: f64,
    pub mean_pending_files: f64,
    pub mean_codeword_files: f64,
    pub mean_virtual: f64,
    /// Sum of the three queue means.
    pub mean_total_queue: f64,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub trace: Vec<TraceRow>,
}

/// Running sums over a span of slots.
#[derive(Debug, Clone, PartialEq)]
struct Accumulator {
    slots: u64,
    admitted: Vec<f64>,
    delivered: Vec<f64>,
    pending: f64,
    codeword: f64,
    virt: f64,
}

impl Accumulator {
    fn new(k: usize) -> Self {
        Self {
            slots: 0,
            admitted: vec![0.0; k],
            delivered: vec![0.0; k],
            pending: 0.0,
            codeword: 0.0,
            virt: 0.0,
        }
    }

    fn add(&mut self, o: &SlotOutcome) {
        self.slots += 1;
        for (acc, x) in self.admitted.iter_mut().zip(&o.admitted) {
            *acc += x;
        }
        for (acc, x) in self.delivered.iter_mut().zip(&o.delivered) {
            *acc += *x as f64;
        }
        self.pending += o.pending_files;
        self.codeword += o.codeword_files;
        self.virt += o.virtual_backlog;
    }

    fn rates(v: &[f64], n: u64) -> Vec<f64> {
        v.iter().map(|x| x / n.max(1) as f64).collect()
    }
}

fn sum_utility(rates: &[f64], params: &PolicyParams) -> f64 {
    rates.iter().map(|&r| utility_g(r, params.alpha, params.d)).sum()
}

/// Aggregates per-slot outcomes into a summary. Slots before `warmup` are
/// skipped.
pub fn summarize(config: &RunConfig, outcomes: &[SlotOutcome], warmup: usize) -> Result<RunSummary> {
    if outcomes.is_empty() {
        return Err(Error::param("trace", "cannot summarize an empty trace"));
    }
    let warmup = warmup.min(outcomes.len() - 1);
    let mut acc = Accumulator::new(config.num_users());
    for o in &outcomes[warmup..] {
        acc.add(o);
    }
    Ok(finish(config, &acc))
}

fn finish(config: &RunConfig, acc: &Accumulator) -> RunSummary {
    let n = acc.slots.max(1) as f64;
    let admitted_rates = Accumulator::rates(&acc.admitted, acc.slots);
    let delivered_rates = Accumulator::rates(&acc.delivered, acc.slots);
    let mean_pending_files = acc.pending / n;
    let mean_codeword_files = acc.codeword / n;
    let mean_virtual = acc.virt / n;
    RunSummary {
        policy: config.policy,
        num_users: config.num_users(),
        v: config.params.v,
        alpha: config.params.alpha,
        seed: config.seed,
        slots: config.slots,
        measured_slots: acc.slots,
        sum_delivered_rate: delivered_rates.iter().sum(),
        sum_utility: sum_utility(&delivered_rates, &config.params),
        admitted_rates,
        delivered_rates,
        mean_pending_files,
        mean_codeword_files,
        mean_virtual,
        mean_total_queue: mean_pending_files + mean_codeword_files + mean_virtual,
        config: config.clone(),
    }
}

fn window_row(config: &RunConfig, acc: &Accumulator, slot: u64) -> TraceRow {
    let n = acc.slots.max(1) as f64;
    let delivered_rates = Accumulator::rates(&acc.delivered, acc.slots);
    TraceRow {
        slot,
        sum_utility: sum_utility(&delivered_rates, &config.params),
        admitted_rates: Accumulator::rates(&acc.admitted, acc.slots),
        delivered_rates,
        total_pending_files: acc.pending / n,
        total_codeword_files: acc.codeword / n,
        total_virtual: acc.virt / n,
    }
}

/// Simulates `config.slots` slots of the configured policy.
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    run_with(config, |_, _| {})
}

/// Like [`run`], calling `observe` after every slot.
pub fn run_with<F>(config: &RunConfig, mut observe: F) -> Result<RunOutput>
where
    F: FnMut(u64, &SlotOutcome),
{
    config.validate()?;
    let k = config.num_users();
    let mut policy = config.policy.build(config)?;
    let mut channel = FadingChannel::new(config.channel.clone(), config.seed);
    let warmup = config.warmup_slots();

    let mut total = Accumulator::new(k);
    let mut window = Accumulator::new(k);
    let mut trace = Vec::with_capacity((config.slots / config.window + 1) as usize);
    for slot in 0..config.slots {
        let state = channel.sample_slot();
        let outcome = policy.step(&state)?;
        observe(slot, &outcome);
        if slot >= warmup {
            total.add(&outcome);
        }
        window.add(&outcome);
        if window.slots == config.window || slot + 1 == config.slots {
            trace.push(window_row(config, &window, slot + 1));
            window = Accumulator::new(k);
        }
    }
    Ok(RunOutput {
        summary: finish(config, &total),
        trace,
    })
}
