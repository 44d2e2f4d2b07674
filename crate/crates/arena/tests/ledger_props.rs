mod common;

use htlc_arena::agents::StrategyProfile;
use htlc_arena::game::expect::sample_schedule;
use htlc_arena::game::{play, Metric};
use htlc_arena::ledger::PartyId;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn protocol() -> impl Strategy<Value = usize> {
    0..common::PROTOCOLS.len()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn random_sequences_keep_the_books(p in protocol(), seed in any::<u64>()) {
        let s = common::scenario(common::PROTOCOLS[p]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = common::fuzz_sequence(&s, &mut rng);
        prop_assert!(r.is_ok(), "{:?}", r);
    }

    #[test]
    fn every_policy_game_conserves_tokens(p in protocol(), seed in any::<u64>()) {
        let s = common::scenario(common::PROTOCOLS[p]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let profile = common::random_profile(&s, &mut rng);
        let schedule = sample_schedule(&s, &mut rng);
        let out = play(&s, &profile, &schedule).unwrap();
        // Utilities are net of endowments and issued coinbase, so they sum to
        // the mint minus what is burned or still locked.
        let mut parties: Vec<PartyId> = vec![PartyId::Alice, PartyId::Bob, PartyId::External];
        parties.extend(s.miner_ids());
        let sum: i128 = parties.iter().map(|&q| out.utility(q)).sum();
        let minted = out.get(Metric::Minted);
        prop_assert_eq!(sum + out.get(Metric::Burned) + locked(&out), minted - coinbase_paid(&out));
        prop_assert_eq!(out.final_state.conservation_total(), conservation_at_genesis(&s, &profile));
    }

    #[test]
    fn labels_are_monotone(p in protocol(), seed in any::<u64>()) {
        let s = common::scenario(common::PROTOCOLS[p]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let profile = common::random_profile(&s, &mut rng);
        let out = play(&s, &profile, &sample_schedule(&s, &mut rng)).unwrap();
        prop_assert!(out.labels.windows(2).all(|w| htlc_arena::game::label_rank(w[0]) <= htlc_arena::game::label_rank(w[1])));
    }
}

fn coinbase_paid(out: &htlc_arena::game::Outcome) -> i128 {
    out.final_state.books.coinbase_paid.values().map(|t| t.0 as i128).sum()
}

fn conservation_at_genesis(s: &htlc_arena::game::Scenario, profile: &StrategyProfile) -> i128 {
    s.genesis(profile).unwrap().conservation_total()
}

fn locked(out: &htlc_arena::game::Outcome) -> i128 {
    let st = &out.final_state;
    let live: i128 = st.contracts.values().filter(|c| c.is_live()).map(|c| c.deposit.0 as i128).sum();
    live + st.bribery.as_ref().map_or(0, |b| b.holdings().0 as i128)
}
