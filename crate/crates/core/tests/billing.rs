mod common;

use spotscale::trace_io::write_cost;

#[test]
fn ledger_matches_hand_computed_file() {
    let result = billing_scenario_cost();
    let expected = std::fs::read_to_string(common::fixture("billing_cost.csv")).unwrap();
    assert_eq!(result, expected);
}

fn billing_scenario_cost() -> String {
    let r = common::billing_scenario();
    let mut buf = Vec::new();
    write_cost(&r, &mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn charges_follow_the_price_at_each_hour_start() {
    let r = common::billing_scenario();
    assert_eq!(r.ledger[0].charges, vec![10_000, 20_000]);
    assert_eq!(r.ledger[1].charges, vec![15_000, 25_000]);
    assert_eq!(r.ledger[2].charges, vec![105_000; 4]);
    assert_eq!(r.total_cost_micros(), 490_000);
    assert_eq!(r.totals.provider_terminations, 1);
}
