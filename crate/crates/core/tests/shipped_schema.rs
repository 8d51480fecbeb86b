use soppia_core::{default_clt_schema, load_schema, validate_schema};

const SHIPPED: &str = include_str!("../schemas/clt_223g.json");

#[test]
fn shipped_file_matches_builtin() {
    let loaded = load_schema(SHIPPED).expect("shipped schema loads");
    assert_eq!(loaded, default_clt_schema());
    assert!(validate_schema(&loaded).is_empty());
    assert_eq!(loaded.to_json_pretty(), SHIPPED);
}
