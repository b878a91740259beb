//! Simultaneous multiple-round ascending auction.
//!
//! All licenses are open at once. In every round each bidder sees the
//! standing high bids from the previous round and submits new bids
//! simultaneously; the new standing bids are then revealed. The auction
//! closes at the first round in which nobody bids.
//!
//! Activity is counted in licenses: a bidder's activity in a round is the
//! number of licenses it is standing high on plus the number of new bids it
//! places. Falling below `activity × eligibility` shrinks eligibility to
//! `floor(activity_count / activity)`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AuctionError {
    #[error("invalid auction config: {0}")]
    Config(String),
    #[error("invalid bidder `{bidder}`: {message}")]
    Bidder { bidder: String, message: String },
    #[error("malformed JSON: {0}")]
    Json(String),
}

pub type LicenseId = String;
pub type BidderId = String;

fn default_activity() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionConfig {
    pub licenses: Vec<LicenseId>,
    #[serde(rename = "opening")]
    pub opening_price: f64,
    pub increment: f64,
    #[serde(rename = "activity", default = "default_activity")]
    pub activity_fraction: f64,
    pub max_rounds: u32,
}

impl AuctionConfig {
    pub fn validate(&self) -> Result<(), AuctionError> {
        if self.licenses.is_empty() {
            return Err(AuctionError::Config("at least one license required".into()));
        }
        let mut seen = self.licenses.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.licenses.len() {
            return Err(AuctionError::Config("duplicate license identifiers".into()));
        }
        if !self.opening_price.is_finite() || self.opening_price < 0.0 {
            return Err(AuctionError::Config("opening price must be >= 0".into()));
        }
        if !self.increment.is_finite() || self.increment <= 0.0 {
            return Err(AuctionError::Config("increment must be > 0".into()));
        }
        if !(self.activity_fraction > 0.0 && self.activity_fraction <= 1.0) {
            return Err(AuctionError::Config("activity fraction must be in (0, 1]".into()));
        }
        if self.max_rounds == 0 {
            return Err(AuctionError::Config("max_rounds must be positive".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, AuctionError> {
        let c: AuctionConfig =
            serde_json::from_str(text).map_err(|e| AuctionError::Json(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bidder {
    pub id: BidderId,
    /// Missing licenses are valued at zero.
    pub valuations: BTreeMap<LicenseId, f64>,
    pub eligibility: u32,
    pub demand_cap: u32,
}

impl Bidder {
    pub fn value(&self, license: &str) -> f64 {
        self.valuations.get(license).copied().unwrap_or(0.0)
    }

    pub fn validate(&self, config: &AuctionConfig) -> Result<(), AuctionError> {
        let err = |message: String| AuctionError::Bidder {
            bidder: self.id.clone(),
            message,
        };
        if self.eligibility as usize > config.licenses.len() {
            return Err(err(format!(
                "eligibility {} exceeds the {} licenses on offer",
                self.eligibility,
                config.licenses.len()
            )));
        }
        if self.demand_cap < 1 {
            return Err(err("demand_cap must be at least 1".into()));
        }
        for (license, &v) in &self.valuations {
            if !config.licenses.contains(license) {
                return Err(err(format!("valuation for unknown license `{license}`")));
            }
            if !v.is_finite() || v < 0.0 {
                return Err(err(format!("valuation for `{license}` must be >= 0")));
            }
        }
        Ok(())
    }

    pub fn list_from_json(text: &str, config: &AuctionConfig) -> Result<Vec<Bidder>, AuctionError> {
        let bidders: Vec<Bidder> =
            serde_json::from_str(text).map_err(|e| AuctionError::Json(e.to_string()))?;
        validate_bidders(&bidders, config)?;
        Ok(bidders)
    }
}

fn validate_bidders(bidders: &[Bidder], config: &AuctionConfig) -> Result<(), AuctionError> {
    if bidders.is_empty() {
        return Err(AuctionError::Config("at least one bidder required".into()));
    }
    for (i, b) in bidders.iter().enumerate() {
        b.validate(config)?;
        if bidders[..i].iter().any(|o| o.id == b.id) {
            return Err(AuctionError::Config(format!("duplicate bidder id `{}`", b.id)));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandingBid {
    pub amount: f64,
    pub bidder: Option<BidderId>,
}

/// Revealed state after a round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionState {
    pub round: u32,
    pub standing: BTreeMap<LicenseId, StandingBid>,
    pub eligibility: BTreeMap<BidderId, u32>,
}

impl AuctionState {
    fn initial(config: &AuctionConfig, bidders: &[Bidder]) -> Self {
        Self {
            round: 0,
            standing: config
                .licenses
                .iter()
                .map(|l| {
                    (
                        l.clone(),
                        StandingBid {
                            amount: 0.0,
                            bidder: None,
                        },
                    )
                })
                .collect(),
            eligibility: bidders.iter().map(|b| (b.id.clone(), b.eligibility)).collect(),
        }
    }

    /// Lowest acceptable new bid on `license`.
    pub fn minimum_bid(&self, license: &str, config: &AuctionConfig) -> f64 {
        match self.standing.get(license) {
            Some(StandingBid {
                amount,
                bidder: Some(_),
            }) => amount + config.increment,
            _ => config.opening_price,
        }
    }

    pub fn licenses_held_by(&self, bidder: &str) -> usize {
        self.standing
            .values()
            .filter(|s| s.bidder.as_deref() == Some(bidder))
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bid {
    pub license: LicenseId,
    pub amount: f64,
}

/// How a bidder reacts to the revealed state.
pub trait BidStrategy {
    fn bids(&self, state: &AuctionState, config: &AuctionConfig, bidder: &Bidder) -> Vec<Bid>;
}

/// Myopic best response: bid the minimum acceptable price on the licenses
/// with the largest surplus (valuation minus price), as long as the price
/// does not exceed the valuation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Straightforward;

impl BidStrategy for Straightforward {
    fn bids(&self, state: &AuctionState, config: &AuctionConfig, bidder: &Bidder) -> Vec<Bid> {
        straightforward_bid(state, config, bidder)
    }
}

pub fn straightforward_bid(state: &AuctionState, config: &AuctionConfig, bidder: &Bidder) -> Vec<Bid> {
    let eligibility = state
        .eligibility
        .get(&bidder.id)
        .copied()
        .unwrap_or(bidder.eligibility);
    let held = state.licenses_held_by(&bidder.id);
    let slots = (eligibility.min(bidder.demand_cap) as usize).saturating_sub(held);
    if slots == 0 {
        return Vec::new();
    }
    let mut candidates: Vec<(f64, usize, Bid)> = config
        .licenses
        .iter()
        .enumerate()
        .filter(|(_, l)| {
            state
                .standing
                .get(*l)
                .is_none_or(|s| s.bidder.as_deref() != Some(bidder.id.as_str()))
        })
        .filter_map(|(i, l)| {
            let value = bidder.value(l);
            let price = state.minimum_bid(l, config);
            // A license the bidder does not value at all is never bid on.
            (value > 0.0 && value - price >= 0.0).then(|| {
                (
                    value - price,
                    i,
                    Bid {
                        license: l.clone(),
                        amount: price,
                    },
                )
            })
        })
        .collect();
    // Highest surplus first; config order breaks ties.
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    candidates.truncate(slots);
    candidates.into_iter().map(|(_, _, b)| b).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    pub new_bids: BTreeMap<BidderId, Vec<Bid>>,
    pub standing: BTreeMap<LicenseId, StandingBid>,
    pub eligibility: BTreeMap<BidderId, u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionOutcome {
    /// `None` for licenses that never received a bid.
    pub winners: BTreeMap<LicenseId, Option<BidderId>>,
    /// Unsold licenses are priced at zero.
    pub prices: BTreeMap<LicenseId, f64>,
    pub rounds_used: u32,
    pub revenue: f64,
    /// False when `max_rounds` ran out before a quiet round.
    pub terminated: bool,
    pub final_state: AuctionState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<RoundRecord>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Seed for tie-breaking among equal simultaneous bids.
    pub seed: u64,
    pub trace: bool,
}

pub fn run_auction<S: BidStrategy>(
    config: &AuctionConfig,
    bidders: &[Bidder],
    strategy: &S,
    options: RunOptions,
) -> Result<AuctionOutcome, AuctionError> {
    config.validate()?;
    validate_bidders(bidders, config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut state = AuctionState::initial(config, bidders);
    let mut trace = options.trace.then(Vec::new);
    let mut terminated = false;

    while state.round < config.max_rounds {
        let round = state.round + 1;
        // Everyone acts on the same revealed state.
        let submitted: Vec<(usize, Vec<Bid>)> = bidders
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let eligible = state.eligibility.get(&b.id).copied().unwrap_or(0) > 0;
                let bids = if eligible {
                    let mut bids = strategy.bids(&state, config, b);
                    let cap = state.eligibility[&b.id] as usize;
                    let held = state.licenses_held_by(&b.id);
                    bids.retain(|bid| {
                        config.licenses.contains(&bid.license)
                            && bid.amount >= state.minimum_bid(&bid.license, config)
                    });
                    bids.truncate(cap.saturating_sub(held));
                    bids
                } else {
                    Vec::new()
                };
                (i, bids)
            })
            .collect();

        let total_new: usize = submitted.iter().map(|(_, b)| b.len()).sum();
        let mut next = state.clone();
        next.round = round;

        if total_new > 0 {
            for license in &config.licenses {
                let offers: Vec<(usize, f64)> = submitted
                    .iter()
                    .flat_map(|(i, bids)| {
                        bids.iter()
                            .filter(|b| &b.license == license)
                            .map(move |b| (*i, b.amount))
                    })
                    .collect();
                let Some(top) = offers.iter().map(|o| o.1).reduce(f64::max) else {
                    continue;
                };
                let tied: Vec<usize> = offers.iter().filter(|o| o.1 == top).map(|o| o.0).collect();
                let pick = if tied.len() == 1 {
                    tied[0]
                } else {
                    tied[rng.random_range(0..tied.len())]
                };
                next.standing.insert(
                    license.clone(),
                    StandingBid {
                        amount: top,
                        bidder: Some(bidders[pick].id.clone()),
                    },
                );
            }
        }

        // Activity rule, evaluated against what the bidder held going into
        // the round plus what it bid during it.
        for (i, bids) in &submitted {
            let b = &bidders[*i];
            let current = state.eligibility[&b.id];
            let activity = state.licenses_held_by(&b.id) + bids.len();
            let required = config.activity_fraction * f64::from(current);
            if (activity as f64) < required - 1e-12 {
                let reduced = ((activity as f64) / config.activity_fraction + 1e-9).floor() as u32;
                next.eligibility.insert(b.id.clone(), reduced.min(current));
            }
        }

        if let Some(t) = trace.as_mut() {
            t.push(RoundRecord {
                round,
                new_bids: submitted
                    .iter()
                    .filter(|(_, b)| !b.is_empty())
                    .map(|(i, b)| (bidders[*i].id.clone(), b.clone()))
                    .collect(),
                standing: next.standing.clone(),
                eligibility: next.eligibility.clone(),
            });
        }
        state = next;
        if total_new == 0 {
            terminated = true;
            break;
        }
    }

    let winners: BTreeMap<_, _> = state
        .standing
        .iter()
        .map(|(l, s)| (l.clone(), s.bidder.clone()))
        .collect();
    let prices: BTreeMap<_, _> = state
        .standing
        .iter()
        .map(|(l, s)| (l.clone(), if s.bidder.is_some() { s.amount } else { 0.0 }))
        .collect();
    let revenue = prices.values().sum();
    Ok(AuctionOutcome {
        winners,
        prices,
        rounds_used: state.round,
        revenue,
        terminated,
        final_state: state,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(licenses: &[&str]) -> AuctionConfig {
        AuctionConfig {
            licenses: licenses.iter().map(|s| s.to_string()).collect(),
            opening_price: 0.0,
            increment: 1.0,
            activity_fraction: 1.0,
            max_rounds: 1000,
        }
    }

    fn bidder(id: &str, vals: &[(&str, f64)], eligibility: u32) -> Bidder {
        Bidder {
            id: id.into(),
            valuations: vals.iter().map(|(l, v)| (l.to_string(), *v)).collect(),
            eligibility,
            demand_cap: eligibility.max(1),
        }
    }

    fn opts(seed: u64) -> RunOptions {
        RunOptions { seed, trace: true }
    }

    #[test]
    fn two_bidders_one_license() {
        let c = config(&["L1"]);
        let bs = [bidder("A", &[("L1", 10.0)], 1), bidder("B", &[("L1", 7.0)], 1)];
        for seed in 0..20 {
            let out = run_auction(&c, &bs, &Straightforward, opts(seed)).unwrap();
            assert!(out.terminated);
            assert_eq!(out.winners["L1"].as_deref(), Some("A"));
            let p = out.prices["L1"];
            assert!((7.0..=8.0).contains(&p), "price {p}");
            assert_eq!(out.revenue, p);
        }
    }

    #[test]
    fn lone_bidder_pays_opening() {
        let c = config(&["L1"]);
        let bs = [bidder("A", &[("L1", 10.0)], 1)];
        let out = run_auction(&c, &bs, &Straightforward, opts(1)).unwrap();
        assert_eq!(out.winners["L1"].as_deref(), Some("A"));
        assert_eq!(out.prices["L1"], 0.0);
        assert_eq!(out.rounds_used, 2);
    }

    #[test]
    fn uncontested_licenses_close_in_two_rounds() {
        let c = config(&["L1", "L2"]);
        let bs = [
            bidder("A", &[("L1", 5.0)], 2),
            bidder("B", &[("L2", 5.0)], 2),
        ];
        let out = run_auction(&c, &bs, &Straightforward, opts(3)).unwrap();
        assert_eq!(out.winners["L1"].as_deref(), Some("A"));
        assert_eq!(out.winners["L2"].as_deref(), Some("B"));
        assert_eq!(out.prices["L1"], 0.0);
        assert_eq!(out.prices["L2"], 0.0);
        assert_eq!(out.rounds_used, 2);
    }

    #[test]
    fn unsold_license_reported_at_zero() {
        let c = config(&["L1", "L2"]);
        let bs = [bidder("A", &[("L1", 5.0)], 1)];
        let out = run_auction(&c, &bs, &Straightforward, opts(0)).unwrap();
        assert_eq!(out.winners["L2"], None);
        assert_eq!(out.prices["L2"], 0.0);
    }

    #[test]
    fn straightforward_examples() {
        let c = config(&["L1"]);
        let b = bidder("A", &[("L1", 10.0)], 1);
        let mut state = AuctionState::initial(&c, std::slice::from_ref(&b));
        state.standing.insert(
            "L1".into(),
            StandingBid {
                amount: 5.0,
                bidder: Some("B".into()),
            },
        );
        assert_eq!(
            straightforward_bid(&state, &c, &b),
            vec![Bid {
                license: "L1".into(),
                amount: 6.0
            }]
        );
        state.standing.get_mut("L1").unwrap().amount = 10.0;
        assert!(straightforward_bid(&state, &c, &b).is_empty());
        state.standing.insert(
            "L1".into(),
            StandingBid {
                amount: 3.0,
                bidder: Some("A".into()),
            },
        );
        assert!(straightforward_bid(&state, &c, &b).is_empty());
    }

    #[test]
    fn round_cap_reports_non_termination() {
        let mut c = config(&["L1"]);
        c.max_rounds = 3;
        let bs = [bidder("A", &[("L1", 100.0)], 1), bidder("B", &[("L1", 100.0)], 1)];
        let out = run_auction(&c, &bs, &Straightforward, opts(0)).unwrap();
        assert!(!out.terminated);
        assert_eq!(out.rounds_used, 3);
    }

    #[test]
    fn activity_rule_shrinks_eligibility() {
        // B wants two licenses but only values one above the opening price
        // after A outbids it; its eligibility follows its activity.
        let c = config(&["L1", "L2"]);
        let bs = [
            bidder("A", &[("L2", 50.0)], 1),
            Bidder {
                id: "B".into(),
                valuations: [("L1".to_string(), 5.0), ("L2".to_string(), 3.0)].into(),
                eligibility: 2,
                demand_cap: 2,
            },
        ];
        let out = run_auction(&c, &bs, &Straightforward, opts(5)).unwrap();
        assert_eq!(out.final_state.eligibility["B"], 1);
        let trace = out.trace.unwrap();
        for w in trace.windows(2) {
            for (id, e) in &w[1].eligibility {
                assert!(*e <= w[0].eligibility[id]);
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let c = config(&["L1"]);
        assert!(run_auction(&c, &[], &Straightforward, opts(0)).is_err());
        let too_eligible = bidder("A", &[("L1", 1.0)], 2);
        assert!(run_auction(&c, &[too_eligible], &Straightforward, opts(0)).is_err());
        let mut bad = c.clone();
        bad.increment = 0.0;
        assert!(bad.validate().is_err());
        let unknown = bidder("A", &[("L9", 1.0)], 1);
        assert!(unknown.validate(&c).is_err());
    }

    #[test]
    fn json_field_names() {
        let c = AuctionConfig::from_json(
            r#"{"licenses":["A1","B1"],"opening":2.5,"increment":0.5,"max_rounds":50}"#,
        )
        .unwrap();
        assert_eq!(c.activity_fraction, 1.0);
        let bs = Bidder::list_from_json(
            r#"[{"id":"x","valuations":{"A1":4},"eligibility":1,"demand_cap":1}]"#,
            &c,
        )
        .unwrap();
        assert_eq!(bs[0].value("B1"), 0.0);
    }
}
