mod common;

use common::{check_golden, GOLDEN};

#[test]
fn reports_match_golden_files() {
    let failures: Vec<String> = GOLDEN
        .iter()
        .filter_map(|(name, args)| check_golden(name, args).err())
        .collect();
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}
