//! Replays the engine's documented random streams with a small
//! straight-line reference implementation and compares outcomes.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use splitlab_core::engine::{
    run_engine, ArmTag, AuctionConfig, AuctionRule, Budget, Campaign, CampaignParams, Exposure, Marketplace,
    MemberProfile, PacingParams,
};
use splitlab_core::outcome::Arm;
use splitlab_core::seed::derived_rng;

/// (delivered, revenue) per campaign per member position.
type Table = Vec<Vec<(i64, i64)>>;

fn reference(market: &Marketplace, treated_member: &[bool], lift: f64) -> Table {
    let n = market.members.len();
    let h = market.horizon as usize;
    let m = market.campaigns.len();
    let counts: Vec<Vec<u64>> = market
        .members
        .iter()
        .map(|mb| {
            if mb.request_rate <= 0.0 {
                return vec![0; h];
            }
            let mut rng = derived_rng(market.seed, "requests", mb.id as u64);
            let p = Poisson::new(mb.request_rate).unwrap();
            (0..h).map(|_| p.sample(&mut rng) as u64).collect()
        })
        .collect();
    let mut arrivals = derived_rng(market.seed, "arrivals", market.stream);
    let mut coins = derived_rng(market.seed, "participation", market.stream);
    let mut rate: Vec<f64> = market.campaigns.iter().map(|c| c.params.pacing.initial_rate).collect();
    let mut spend = vec![0i64; m];
    let mut table: Table = vec![vec![(0, 0); n]; m];
    for t in 0..h {
        for (k, c) in market.campaigns.iter().enumerate() {
            match c.budget {
                Budget::Unlimited => rate[k] = 1.0,
                Budget::Cents(b) if spend[k] >= b => rate[k] = 0.0,
                Budget::Cents(b) => {
                    if t > 0 {
                        let target = b as f64 * t as f64 / h as f64;
                        let s = spend[k] as f64;
                        if s < target {
                            rate[k] *= 1.0 + c.params.pacing.step;
                        } else if s > target {
                            rate[k] *= 1.0 - c.params.pacing.step;
                        }
                    }
                    rate[k] = rate[k].clamp(0.0, 1.0);
                }
            }
        }
        let mut queue: Vec<usize> = (0..n).flat_map(|i| std::iter::repeat_n(i, counts[i][t] as usize)).collect();
        queue.shuffle(&mut arrivals);
        for i in queue {
            // (bid, campaign, value)
            let mut bids: Vec<(i64, usize, i64)> = Vec::new();
            for (k, c) in market.campaigns.iter().enumerate() {
                if !c.target.contains(&i) {
                    continue;
                }
                let u: f64 = coins.random();
                let exhausted = matches!(c.budget, Budget::Cents(b) if spend[k] >= b);
                if exhausted || u >= rate[k] {
                    continue;
                }
                let mut v = c.params.value_rate_cents * market.members[i].affinity[k];
                if treated_member[i] {
                    v *= 1.0 + lift;
                }
                let bid = ((v * c.params.bid_shading).floor() as i64).min(v.floor() as i64);
                bids.push((bid, k, v.floor() as i64));
            }
            let reserve = market.auction.reserve_cents;
            bids.retain(|b| b.0 > 0 && b.0 >= reserve);
            bids.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
            let Some(&(top, k, value)) = bids.first() else { continue };
            let price = match market.auction.rule {
                AuctionRule::FirstPrice => top,
                AuctionRule::SecondPrice => bids.get(1).map_or(reserve, |b| b.0.max(reserve)).min(top),
            };
            let charge = match market.campaigns[k].budget {
                Budget::Cents(b) => price.min(b - spend[k]),
                Budget::Unlimited => price,
            };
            spend[k] += charge;
            table[k][i].0 += value;
            table[k][i].1 += charge;
        }
    }
    table
}

fn engine_table(market: &Marketplace, w: &[u8], lift: f64) -> Table {
    let run = run_engine(market, Exposure::Members(w), lift, ArmTag::Pooled);
    let mut table: Table = vec![vec![(0, 0); market.members.len()]; market.campaigns.len()];
    for r in &run.outcomes.records {
        table[r.campaign as usize][r.member as usize] = (r.delivered as i64, r.revenue as i64);
    }
    table
}

fn campaign(id: u32, budget: Budget, target: Vec<usize>, value: f64) -> Campaign {
    Campaign {
        id,
        budget,
        target,
        params: CampaignParams { value_rate_cents: value, bid_shading: 1.0, pacing: PacingParams::default() },
    }
}

fn members(n: usize, rate: f64, affinity: impl Fn(usize) -> Vec<f64>) -> Vec<MemberProfile> {
    (0..n).map(|i| MemberProfile { id: i as u32, request_rate: rate, affinity: affinity(i) }).collect()
}

#[test]
fn two_campaigns_four_members_two_ticks() {
    // campaign 0 values every impression at 300, campaign 1 at 200; both
    // target everyone, so campaign 0 wins at 200 until its 500 cents run
    // out (the third win is charged the remaining 100), then campaign 1
    // wins at the reserve of 50.
    let mut market = Marketplace::new(
        members(4, 2.0, |_| vec![1.0, 1.0]),
        vec![
            campaign(0, Budget::Cents(500), vec![0, 1, 2, 3], 300.0),
            campaign(1, Budget::Unlimited, vec![0, 1, 2, 3], 200.0),
        ],
        2,
        7,
    );
    market.auction = AuctionConfig { rule: AuctionRule::SecondPrice, reserve_cents: 50 };
    let w = [0u8; 4];
    let got = engine_table(&market, &w, 0.0);
    assert_eq!(got, reference(&market, &[false; 4], 0.0));

    let rev0: i64 = got[0].iter().map(|x| x.1).sum();
    let wins0: i64 = got[0].iter().map(|x| x.0).sum::<i64>() / 300;
    assert_eq!(rev0, 500);
    assert_eq!(wins0, 3);
    let wins1 = got[1].iter().map(|x| x.0).sum::<i64>() / 200;
    let rev1: i64 = got[1].iter().map(|x| x.1).sum();
    assert_eq!(rev1, 50 * wins1);
}

#[test]
fn reference_agrees_across_random_markets() {
    let mut cases = 0;
    for seed in 0..300u64 {
        let mut rng = derived_rng(seed, "test-market", 0);
        let n = rng.random_range(2..9usize);
        let m = rng.random_range(1..4usize);
        let horizon = rng.random_range(1..7u32);
        let rate = rng.random_range(0.0..3.0);
        let aff: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.random_range(0.2..2.0)).collect()).collect();
        let campaigns: Vec<Campaign> = (0..m)
            .map(|k| {
                let mut target: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.7)).collect();
                if target.is_empty() {
                    target.push(k % n);
                }
                let budget = if rng.random_bool(0.2) { Budget::Unlimited } else { Budget::Cents(rng.random_range(0..3000)) };
                let mut c = campaign(k as u32, budget, target, rng.random_range(50.0..400.0));
                c.params.bid_shading = rng.random_range(0.5..=1.0);
                c.params.pacing = PacingParams { initial_rate: rng.random_range(0.3..=1.0), step: rng.random_range(0.0..0.5) };
                c
            })
            .collect();
        let mut market = Marketplace::new(members(n, rate, |i| aff[i].clone()), campaigns, horizon, seed);
        market.auction = AuctionConfig {
            rule: if rng.random_bool(0.5) { AuctionRule::SecondPrice } else { AuctionRule::FirstPrice },
            reserve_cents: rng.random_range(0..100),
        };
        market.validate().unwrap();
        let w: Vec<u8> = (0..n).map(|_| rng.random_range(0..2u8)).collect();
        let treated: Vec<bool> = w.iter().map(|&b| b == 1).collect();
        let lift = rng.random_range(0.0..1.0);
        assert_eq!(engine_table(&market, &w, lift), reference(&market, &treated, lift), "seed {seed}");
        cases += 1;
    }
    assert_eq!(cases, 300);
}

#[test]
fn uniform_exposure_matches_constant_member_vector() {
    let market = Marketplace::new(
        members(5, 1.5, |i| vec![0.5 + i as f64 * 0.3]),
        vec![campaign(0, Budget::Cents(900), vec![0, 1, 2, 3, 4], 150.0)],
        4,
        3,
    );
    let a = run_engine(&market, Exposure::Uniform(Arm::Treatment), 0.4, ArmTag::Pooled);
    let b = run_engine(&market, Exposure::Members(&[1; 5]), 0.4, ArmTag::Pooled);
    assert_eq!(a.outcomes.records.iter().map(|r| (r.delivered, r.revenue)).collect::<Vec<_>>(),
               b.outcomes.records.iter().map(|r| (r.delivered, r.revenue)).collect::<Vec<_>>());
}
