mod common;

use common::{sim_chain, tamper_sweep, verify_dump};
use firegate::crypto::Scheme;
use firegate::ledger::ChainDump;

fn sweep(scheme: Scheme) {
    let dump = sim_chain(scheme, 3, 1200, 12);
    assert!(dump.blocks.len() >= 10, "only {} blocks", dump.blocks.len());
    let r = tamper_sweep(&dump);
    assert!(r.complete(), "{} of {} located; {:#?}", r.located, r.mutations, r.misses);
}

#[test]
fn every_field_mutation_is_located_ed25519() {
    sweep(Scheme::Ed25519);
}

#[test]
fn every_field_mutation_is_located_toy_scheme() {
    sweep(Scheme::Toy);
}

#[test]
fn dump_text_roundtrip_verifies() {
    let dump = sim_chain(Scheme::Ed25519, 5, 800, usize::MAX);
    let back = ChainDump::parse(&dump.to_text()).unwrap();
    assert_eq!(back, dump);
    assert!(verify_dump(&back, &back.blocks).is_ok());
}

#[test]
fn truncating_the_tail_still_verifies_but_reordering_does_not() {
    let dump = sim_chain(Scheme::Ed25519, 3, 1200, 12);
    assert!(verify_dump(&dump, &dump.blocks[..5]).is_ok());
    let mut swapped = dump.blocks.clone();
    swapped.swap(3, 4);
    assert_eq!(verify_dump(&dump, &swapped).location().map(|l| l.block), Some(3));
}
