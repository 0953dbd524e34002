use mmsim_core::lob::{OrderEvent, Side};
use mmsim_core::oracles::{check_book_equivalence, random_events};
use proptest::prelude::*;

fn event() -> impl Strategy<Value = (u8, bool, i64, u32, u64)> {
    (0u8..3, any::<bool>(), 97i64..=103, 1u32..=500, 1u64..60)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn engine_matches_naive_book(raw in prop::collection::vec(event(), 1..300)) {
        let events: Vec<OrderEvent> = raw
            .iter()
            .enumerate()
            .map(|(i, &(kind, bid, price, q, id))| {
                let side = if bid { Side::Bid } else { Side::Ask };
                let qty = q as f64 / 100.0;
                match kind {
                    0 => OrderEvent::limit(side, price, qty, i as i64, id),
                    1 => OrderEvent::cancel(side, price, qty, i as i64, id),
                    _ => OrderEvent::market(side, qty, i as i64),
                }
            })
            .collect();
        prop_assert_eq!(check_book_equivalence(&events), Ok(()));
    }
}

#[test]
fn seeded_streams_match() {
    for seed in 0..50 {
        let events = random_events(seed, 1_000);
        assert_eq!(check_book_equivalence(&events), Ok(()), "seed {seed}");
    }
}
