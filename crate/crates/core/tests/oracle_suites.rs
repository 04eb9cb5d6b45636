use mdi_keyrate::oracle::{dominance_suite, identity_suite};

#[test]
fn dominance_default() {
    let r = dominance_suite(500, 42);
    println!("{r}");
    assert!(r.passed());
}

#[test]
fn identities_default() {
    let r = identity_suite(200, 7);
    println!("{r}");
    assert!(r.passed());
}
