use semalloc_bench::{nets, objective, profiles, sentence, trace};
use semalloc_core::learned_auction;

#[test]
fn fixtures_are_deterministic() {
    assert_eq!(nets(3, 4), nets(3, 4));
    assert_ne!(nets(3, 4), nets(3, 5));
    assert_eq!(profiles(2, 10, 1), profiles(2, 10, 1));
    assert_eq!(sentence(12, 9), sentence(12, 9));
    assert_eq!(trace(50, 2), trace(50, 2));
}

#[test]
fn fixtures_have_requested_shapes() {
    assert_eq!(sentence(7, 0).len(), 7);
    assert_eq!(trace(25, 0).events().len(), 25);
    let ps = profiles(4, 8, 0);
    assert_eq!(ps.len(), 8);
    assert!(ps.iter().all(|p| p.len() == 4));
    let ns = nets(4, 0);
    for p in &ps {
        learned_auction(&ns, p).unwrap();
    }
}

#[test]
fn objective_fixture_has_finite_gradient() {
    let mut obj = objective(2, 16, 0);
    let (value, grad) = obj.value_and_gradient().unwrap();
    assert!(value.is_finite());
    assert!(grad.iter().all(|g| g.is_finite()));
}
