//! Fixture regeneration, kept out of the normal test run. After changing the
//! corpus layout, the mock script, or any serializer:
//!
//! ```text
//! cargo test -p review-perturb-cli --test fixture_gen -- --ignored
//! ```
//!
//! then inspect the diff and re-run the acceptance suite (which regenerates
//! the golden report via REGEN_GOLDENS=1 if the report shape changed).

#[path = "support/mod.rs"]
mod support;

#[test]
#[ignore = "regenerates committed fixtures; run explicitly"]
fn regenerate_fixtures() {
    let root = support::fixture_root();
    support::write_fixture_corpus(&root.join("corpus"));
    support::write_mock_script(&root.join("mock_script.json"));
    println!("fixtures regenerated under {}", root.display());
}
