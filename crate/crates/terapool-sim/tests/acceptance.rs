//! Acceptance suite: one check per release criterion, each printing a
//! PASS/FAIL line (visible with `--nocapture`).

#[test]
fn placeholder() {}
