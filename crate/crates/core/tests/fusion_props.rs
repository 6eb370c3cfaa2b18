mod common;

use common::{active_mean_oracle, max_source_oracle, weighted_oracle};
use horus_core::fusion::{
    fuse, fuse_max, fuse_simple_avg, fuse_weighted, max_confidence_source, FusionPolicy, SourceRegistry, VehicleNode,
};
use horus_core::wire::SteeringCommand;
use proptest::prelude::*;

fn cmd(l: f64, r: f64, c: f64) -> SteeringCommand {
    SteeringCommand::from_fields([l, r, c, 0.0, 0.0, 0.0])
}

fn arb_cmd() -> impl Strategy<Value = SteeringCommand> {
    prop_oneof![
        1 => Just(SteeringCommand::ZERO),
        3 => (0.01..2.0f64, 0.01..2.0f64, 0.0..1.0f64).prop_map(|(l, r, c)| cmd(l, r, c)),
    ]
}

#[test]
fn ingest_scales_and_zero_report_deactivates() {
    let mut reg = SourceRegistry::standard(2);
    assert!(reg.ingest(0, &cmd(90.0, 120.0, 60.0), 0.0));
    assert_eq!(reg.slots()[0].command.left, 30.0);
    assert_eq!(reg.slots()[0].command.confidence, 20.0);
    assert!(reg.ingest(0, &SteeringCommand::ZERO, 0.1));
    assert!(!reg.slots()[0].active);
    assert!(!reg.ingest(7, &cmd(1.0, 1.0, 1.0), 0.2));
}

#[test]
fn all_inactive_is_degenerate_for_every_policy() {
    let reg = SourceRegistry::from_scaled(&[SteeringCommand::ZERO; 3]);
    for p in FusionPolicy::ALL {
        assert_eq!(fuse(p, &reg), None);
    }
}

#[test]
fn degenerate_tick_holds_powers_and_marks_row() {
    let mut node = VehicleNode::new(SourceRegistry::standard(2), FusionPolicy::ConfidenceWeighted);
    node.ingest(0, &cmd(90.0, 120.0, 60.0), 0.0);
    let first = node.drive_tick(0.0);
    assert_eq!((first.left, first.right), (30.0, 40.0));
    node.ingest(0, &SteeringCommand::ZERO, 0.1);
    let held = node.drive_tick(0.1);
    assert!(held.degenerate);
    assert_eq!((held.left, held.right), (30.0, 40.0));
    assert!(held.row.ends_with(",-1"), "{}", held.row);
}

proptest! {
    #[test]
    fn weighted_matches_oracle(cmds in prop::collection::vec(arb_cmd(), 1..6)) {
        let got = fuse_weighted(&SourceRegistry::from_scaled(&cmds));
        match (got, weighted_oracle(&cmds)) {
            (Some(a), Some(b)) => prop_assert!((a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9),
            (a, b) => prop_assert_eq!(a, b),
        }
    }

    #[test]
    fn weighted_lies_within_active_range(cmds in prop::collection::vec(arb_cmd(), 1..6)) {
        let reg = SourceRegistry::from_scaled(&cmds);
        if let Some((l, _)) = fuse_weighted(&reg) {
            let contributing = cmds.iter().filter(|c| c.confidence > 0.0 && (c.left > 0.0 || c.right > 0.0));
            let (lo, hi) = contributing.fold((f64::MAX, f64::MIN), |(lo, hi), c| (lo.min(c.left), hi.max(c.left)));
            prop_assert!(l >= lo - 1e-9 && l <= hi + 1e-9);
        }
    }

    #[test]
    fn weighted_ignores_confidence_scale(cmds in prop::collection::vec(arb_cmd(), 1..6), k in 0.1..10.0f64) {
        let scaled: Vec<_> = cmds.iter().map(|c| SteeringCommand { confidence: c.confidence * k, ..*c }).collect();
        let a = fuse_weighted(&SourceRegistry::from_scaled(&cmds));
        let b = fuse_weighted(&SourceRegistry::from_scaled(&scaled));
        match (a, b) {
            (Some(a), Some(b)) => prop_assert!((a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9),
            (a, b) => prop_assert_eq!(a, b),
        }
    }

    #[test]
    fn uniform_confidence_reduces_to_active_mean(cmds in prop::collection::vec(arb_cmd(), 1..6), c in 0.05..1.0f64) {
        let cmds: Vec<_> = cmds.iter().map(|x| if x.is_zero_report() { *x } else { SteeringCommand { confidence: c, ..*x } }).collect();
        let reg = SourceRegistry::from_scaled(&cmds);
        let want = active_mean_oracle(&cmds);
        for got in [fuse_weighted(&reg), fuse_simple_avg(&reg)] {
            match (got, want) {
                (Some(a), Some(b)) => prop_assert!((a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9),
                (a, b) => prop_assert_eq!(a, b),
            }
        }
    }

    #[test]
    fn max_follows_latest_top_confidence(levels in prop::collection::vec(0u8..4, 1..6)) {
        let conf: Vec<f64> = levels.iter().map(|&l| l as f64 * 0.25).collect();
        let cmds: Vec<_> = conf.iter().enumerate().map(|(i, &c)| cmd(1.0 + i as f64, 1.0, c)).collect();
        let reg = SourceRegistry::from_scaled(&cmds);
        let idx = max_source_oracle(&conf);
        prop_assert_eq!(max_confidence_source(&reg), idx);
        prop_assert_eq!(fuse_max(&reg), idx.map(|i| (cmds[i].left, cmds[i].right)));
    }
}
