//! End-to-end acceptance criteria. Each criterion prints one line.

use bufferloop::verify::{run_all, VerifyConfig};

#[test]
fn acceptance_criteria() {
    let summary = run_all(&VerifyConfig::default());
    for c in &summary.criteria {
        println!("{}", c.line());
    }
    let failed: Vec<u8> = summary.criteria.iter().filter(|c| !c.passed).map(|c| c.id).collect();
    assert_eq!(summary.criteria.len(), 12);
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
