use potminer::ingest::compute_frame_motion_stats;
use potminer::pot::select_pots;
use potminer::synth::{generate_shot, skeleton_part, Part};
use potminer::{Behavior, BehaviorScript, Segment, SelectionConfig};

#[test]
fn torso_and_leg_walker_anchors_on_the_torso() {
    let cfg = SelectionConfig::default();
    let (mut total, mut torso) = (0usize, 0usize);
    for seed in 0..5 {
        let mut shot = generate_shot(
            &BehaviorScript::new(vec![Segment::new(Behavior::Walk, 80)]),
            seed,
        )
        .unwrap();
        shot.trajectories
            .retain(|t| matches!(skeleton_part(t.id()), Some(Part::Torso | Part::Leg)));
        let stats = compute_frame_motion_stats(&shot, cfg.n);
        for c in select_pots(&shot, &stats, &cfg).unwrap().values().flatten() {
            total += 1;
            torso += usize::from(skeleton_part(c.anchor_id) == Some(Part::Torso));
            assert_eq!(skeleton_part(c.swing_id), Some(Part::Leg));
        }
    }
    assert!(total > 0);
    assert!(torso as f64 >= 0.9 * total as f64, "{torso}/{total}");
}
