use fiocalc_core::acceptance::{run, CRITERIA};

#[test]
fn acceptance_battery() {
    let mut failed = Vec::new();
    for (id, _) in CRITERIA {
        let o = run(id).expect("known criterion");
        println!("{}", o.line());
        if !o.passed {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
