//! Budget-split and proportional restriction of a marketplace.

use super::market::{Budget, Campaign, Marketplace};
use crate::error::{validation, Result};
use crate::seed::derive_seed;

/// Splits `market` by the bucket vector `d` (0 or 1 per member).
///
/// Bucket 0 receives `floor(B * N0 / N)` cents of each finite budget and
/// bucket 1 the remainder, so the two clones always sum to `B`. Members
/// keep their ids; campaign clones keep their id, parameters and position.
pub fn split_marketplace(market: &Marketplace, d: &[u8]) -> Result<(Marketplace, Marketplace)> {
    let n = market.n_members();
    if d.len() != n {
        return Err(validation(format!("bucket vector has length {} but marketplace has {n} members", d.len())));
    }
    if d.iter().any(|&b| b > 1) {
        return Err(validation("bucket vector entries must be 0 or 1"));
    }
    let n0 = d.iter().filter(|&&b| b == 0).count();
    let bucket = |label: u8| -> Marketplace {
        let mut sub = restricted(market, |i| d[i] == label, |budget| match budget {
            Budget::Cents(b) => {
                let b0 = (b as i128 * n0 as i128 / n as i128) as i64;
                Budget::Cents(if label == 0 { b0 } else { b - b0 })
            }
            Budget::Unlimited => Budget::Unlimited,
        });
        sub.stream = derive_seed(market.stream, "bucket", label as u64);
        sub
    };
    Ok((bucket(0), bucket(1)))
}

/// Proportionally restricts every campaign to the members with `keep[i]`,
/// with budget `floor(K * B / N)` where `K` is the number kept. All
/// campaigns are restricted to the same member set. Stream index is
/// inherited so a full restriction reproduces the original marketplace.
pub fn restrict_marketplace(market: &Marketplace, keep: &[bool]) -> Result<Marketplace> {
    let n = market.n_members();
    if keep.len() != n {
        return Err(validation(format!("restriction has length {} but marketplace has {n} members", keep.len())));
    }
    let k = keep.iter().filter(|&&b| b).count();
    Ok(restricted(market, |i| keep[i], |budget| budget.scaled(k, n)))
}

fn restricted(
    market: &Marketplace,
    keep: impl Fn(usize) -> bool,
    budget_of: impl Fn(Budget) -> Budget,
) -> Marketplace {
    let mut new_index = vec![usize::MAX; market.n_members()];
    let mut members = Vec::new();
    for (i, member) in market.members.iter().enumerate() {
        if keep(i) {
            new_index[i] = members.len();
            members.push(member.clone());
        }
    }
    let campaigns = market
        .campaigns
        .iter()
        .map(|c| Campaign {
            id: c.id,
            budget: budget_of(c.budget),
            target: c.target.iter().filter(|&&i| keep(i)).map(|&i| new_index[i]).collect(),
            params: c.params,
        })
        .collect();
    Marketplace {
        members,
        campaigns,
        horizon: market.horizon,
        seed: market.seed,
        auction: market.auction,
        stream: market.stream,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::market::{CampaignParams, MemberProfile};
    use proptest::prelude::*;

    fn market(n: usize, budgets: &[Budget]) -> Marketplace {
        let members = (0..n)
            .map(|i| MemberProfile { id: i as u32, request_rate: 1.0, affinity: vec![1.0; budgets.len()] })
            .collect();
        let campaigns = budgets
            .iter()
            .enumerate()
            .map(|(j, &budget)| Campaign {
                id: j as u32,
                budget,
                target: (0..n).collect(),
                params: CampaignParams::default(),
            })
            .collect();
        Marketplace::new(members, campaigns, 5, 9)
    }

    fn half(n: usize, n0: usize) -> Vec<u8> {
        (0..n).map(|i| u8::from(i >= n0)).collect()
    }

    #[test]
    fn even_split_halves_budget() {
        let (a, b) = split_marketplace(&market(1000, &[Budget::Cents(100)]), &half(1000, 500)).unwrap();
        assert_eq!(a.campaigns[0].budget, Budget::Cents(50));
        assert_eq!(b.campaigns[0].budget, Budget::Cents(50));
        assert_eq!(a.n_members(), 500);
        assert_eq!(b.n_members(), 500);
    }

    #[test]
    fn uneven_split_is_proportional() {
        let (a, b) = split_marketplace(&market(10, &[Budget::Cents(100)]), &half(10, 3)).unwrap();
        assert_eq!(a.campaigns[0].budget, Budget::Cents(30));
        assert_eq!(b.campaigns[0].budget, Budget::Cents(70));
    }

    #[test]
    fn zero_budget_splits_to_zero() {
        let (a, b) = split_marketplace(&market(4, &[Budget::Cents(0)]), &half(4, 2)).unwrap();
        assert_eq!((a.campaigns[0].budget, b.campaigns[0].budget), (Budget::Cents(0), Budget::Cents(0)));
    }

    #[test]
    fn odd_cent_goes_to_bucket_one() {
        let (a, b) = split_marketplace(&market(2, &[Budget::Cents(101)]), &half(2, 1)).unwrap();
        assert_eq!((a.campaigns[0].budget, b.campaigns[0].budget), (Budget::Cents(50), Budget::Cents(51)));
    }

    #[test]
    fn length_mismatch_is_validation_error() {
        assert!(matches!(
            split_marketplace(&market(4, &[Budget::Cents(1)]), &[0, 1]),
            Err(crate::Error::Validation(_))
        ));
    }

    #[test]
    fn buckets_get_distinct_streams() {
        let (a, b) = split_marketplace(&market(4, &[Budget::Unlimited]), &half(4, 2)).unwrap();
        assert_ne!(a.stream, b.stream);
        assert_eq!(a.campaigns[0].budget, Budget::Unlimited);
    }

    #[test]
    fn full_restriction_is_identity() {
        let m = market(6, &[Budget::Cents(99), Budget::Unlimited]);
        assert_eq!(restrict_marketplace(&m, &[true; 6]).unwrap(), m);
    }

    #[test]
    fn restriction_matches_split_for_bucket_zero() {
        let m = market(8, &[Budget::Cents(1001), Budget::Cents(40)]);
        let d = [0, 1, 1, 0, 0, 1, 0, 1];
        let keep: Vec<bool> = d.iter().map(|&b| b == 0).collect();
        let (b0, _) = split_marketplace(&m, &d).unwrap();
        let r = restrict_marketplace(&m, &keep).unwrap();
        for (x, y) in b0.campaigns.iter().zip(&r.campaigns) {
            assert_eq!(x.budget, y.budget);
            assert_eq!(x.target, y.target);
        }
    }

    proptest! {
        #[test]
        fn split_conserves_budget_and_partitions_targets(
            budgets in prop::collection::vec(0i64..1_000_000_000, 1..5),
            d in prop::collection::vec(0u8..2, 1..40),
        ) {
            let budgets: Vec<Budget> = budgets.into_iter().map(Budget::Cents).collect();
            let m = market(d.len(), &budgets);
            let (a, b) = split_marketplace(&m, &d).unwrap();
            prop_assert_eq!(a.n_members() + b.n_members(), d.len());
            for j in 0..budgets.len() {
                let (ba, bb) = (a.campaigns[j].budget.cents().unwrap(), b.campaigns[j].budget.cents().unwrap());
                prop_assert!(ba >= 0 && bb >= 0);
                prop_assert_eq!(ba + bb, budgets[j].cents().unwrap());
                let mut ids: Vec<u32> = a.campaigns[j].target.iter().map(|&i| a.members[i].id)
                    .chain(b.campaigns[j].target.iter().map(|&i| b.members[i].id)).collect();
                ids.sort();
                prop_assert_eq!(ids, (0..d.len() as u32).collect::<Vec<_>>());
            }
        }
    }
}
