use std::f64::consts::PI;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hetswarm::cma::{CmaState, EvaluatedIndividual};
use hetswarm::controller::{Genotype, RegulatoryPolicy, GENOTYPE_LEN};
use hetswarm::field::{build_arena, ArenaKind, ScalarField};
use hetswarm::metrics::two_sample_t;
use hetswarm::sensing::{normalize, sense};
use hetswarm::sim::{apply_command, spawn_swarm, wrap_angle, RobotState, WheelCommand, WorldState};

fn robots() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((12.0..18.0f64, 12.0..18.0f64, -PI..PI), 2..20)
}

fn world(rs: &[(f64, f64, f64)]) -> WorldState {
    WorldState::from_robots(
        rs.iter()
            .map(|&(x, y, h)| RobotState::at(x, y, h, 0))
            .collect(),
        0,
    )
}

fn uniform_field(value: f64) -> ScalarField {
    ScalarField::new(10, 10, 10.0, [-50.0, -50.0], vec![value; 100]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn headings_stay_wrapped(a in -100.0..100.0f64) {
        let w = wrap_angle(a);
        prop_assert!(w > -PI && w <= PI);
        prop_assert!(((a - w) / (2.0 * PI) - ((a - w) / (2.0 * PI)).round()).abs() < 1e-9);
    }

    #[test]
    fn steps_keep_headings_and_speed_bounds(
        rs in robots(),
        cmds in prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 20),
    ) {
        let mut w = world(&rs);
        for (r, (v, t)) in w.robots.iter_mut().zip(cmds.iter().cycle()) {
            *r = apply_command(*r, WheelCommand::new(*v, *t));
            prop_assert!(r.left_wheel.abs() <= 0.14 + 1e-15);
            prop_assert!(r.right_wheel.abs() <= 0.14 + 1e-15);
        }
        for _ in 0..10 {
            w.step();
            prop_assert!(w.robots.iter().all(|r| r.pose.heading > -PI && r.pose.heading <= PI));
        }
    }

    #[test]
    fn collisions_move_positions_only(rs in robots()) {
        let mut w = world(&rs);
        let before: Vec<f64> = w.robots.iter().map(|r| r.pose.heading).collect();
        w.step();
        let after: Vec<f64> = w.robots.iter().map(|r| r.pose.heading).collect();
        prop_assert_eq!(before, after);
    }

    #[test]
    fn sensing_ignores_translation(rs in robots(), dx in -5.0..5.0f64, dy in -5.0..5.0f64) {
        let field = uniform_field(100.0);
        let a = world(&rs);
        let moved: Vec<_> = rs.iter().map(|&(x, y, h)| (x + dx, y + dy, h)).collect();
        let b = world(&moved);
        for i in 0..rs.len() {
            let (fa, fb) = (sense(&a, i, &field), sense(&b, i, &field));
            for (qa, qb) in fa.quadrants.iter().zip(&fb.quadrants) {
                prop_assert!((qa.distance - qb.distance).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn quarter_turn_cycles_quadrants(rs in robots()) {
        let field = uniform_field(100.0);
        let a = world(&rs);
        let turned: Vec<_> = rs
            .iter()
            .map(|&(x, y, h)| (30.0 - y, x, h + PI / 2.0))
            .collect();
        let b = world(&turned);
        for i in 0..rs.len() {
            let (fa, fb) = (sense(&a, i, &field), sense(&b, i, &field));
            for k in 0..4 {
                prop_assert!((fa.quadrants[k].distance - fb.quadrants[k].distance).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn normalized_inputs_in_range(rs in robots()) {
        let field = build_arena(ArenaKind::Banana, 5);
        let w = world(&rs);
        for i in 0..rs.len() {
            let input = normalize(&sense(&w, i, &field));
            prop_assert!(input.0.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn center_field_is_monotone(r1 in 0.0..16.0f64, gap in 0.1..10.0f64, a in -PI..PI, b in -PI..PI) {
        let f = build_arena(ArenaKind::Center, 10);
        let r2 = r1 + gap + f.cell_size() * 2.0;
        let near = f.sample(15.0 + r1 * a.cos(), 15.0 + r1 * a.sin());
        let far = f.sample(15.0 + r2 * b.cos(), 15.0 + r2 * b.sin());
        prop_assert!(near >= far, "{} < {}", near, far);
    }

    #[test]
    fn field_constant_within_cell(i in 0usize..150, j in 0usize..150, u in 0.01..0.99f64, v in 0.01..0.99f64) {
        let f = build_arena(ArenaKind::BiModal, 5);
        let cs = f.cell_size();
        let (x0, y0) = (i as f64 * cs, j as f64 * cs);
        let centre = f.sample(x0 + 0.5 * cs, y0 + 0.5 * cs);
        prop_assert_eq!(f.sample(x0 + u * cs, y0 + v * cs), centre);
    }

    #[test]
    fn genotype_text_round_trip(values in prop::collection::vec(-1e6..1e6f64, GENOTYPE_LEN)) {
        let g = Genotype::new(values).unwrap();
        prop_assert_eq!(Genotype::from_text(&g.to_text()).unwrap(), g.clone());
        let (a, b) = g.decode();
        prop_assert_eq!(Genotype::encode(&a, &b), g);
    }

    #[test]
    fn field_text_round_trip(w in 1usize..8, h in 1usize..8, seed in any::<u64>()) {
        use rand::Rng;
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..w * h).map(|_| r.random_range(0.0..255.0)).collect();
        let f = ScalarField::new(w, h, 0.5, [1.0, -2.0], values).unwrap();
        prop_assert_eq!(ScalarField::from_text(&f.to_text()).unwrap(), f);
    }

    #[test]
    fn tell_ignores_presentation_order(seed in any::<u64>(), shift in 0usize..10) {
        use rand::Rng;
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let mut s1 = CmaState::new(vec![0.0; GENOTYPE_LEN], 1.0, 10);
        let mut s2 = s1.clone();
        let pop = s1.ask_genotypes(&mut r).unwrap();
        let evaluated: Vec<_> = pop
            .into_iter()
            .enumerate()
            .map(|(i, g)| EvaluatedIndividual::from_trials(i, g, vec![r.random()]))
            .collect();
        let mut rotated = evaluated.clone();
        rotated.rotate_left(shift);
        s1.tell(&evaluated).unwrap();
        s2.tell(&rotated).unwrap();
        prop_assert_eq!(s1.mean, s2.mean);
        prop_assert_eq!(s1.sigma, s2.sigma);
    }

    #[test]
    fn spawn_respects_ratio_and_box(n in 1usize..40, k in 0usize..5, seed in any::<u64>()) {
        let ratio = k as f64 / 4.0;
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let w = spawn_swarm(n, ratio, 12.0, &mut r).unwrap();
        let first = w.robots.iter().filter(|r| r.subgroup == 0).count();
        prop_assert_eq!(first, (ratio * n as f64).round() as usize);
        let cx = w.robots.iter().map(|r| r.pose.x).sum::<f64>() / n as f64;
        let cy = w.robots.iter().map(|r| r.pose.y).sum::<f64>() / n as f64;
        let d = (cx - 15.0).hypot(cy - 15.0);
        prop_assert!((d - 12.0).abs() <= 1.5 * 2f64.sqrt() + 1e-9);
        prop_assert!(w.robots.iter().all(|r| r.active_reservoir == r.subgroup));
    }

    #[test]
    fn t_test_is_antisymmetric(
        a in prop::collection::vec(0.0..1.0f64, 2..30),
        b in prop::collection::vec(0.0..1.0f64, 2..30),
    ) {
        let ab = two_sample_t(&a, &b, 1.0).unwrap();
        let ba = two_sample_t(&b, &a, 1.0).unwrap();
        prop_assert!((ab.t + ba.t).abs() < 1e-12 || ab.degenerate);
        prop_assert!((ab.p_value - ba.p_value).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab.p_value));
    }

    #[test]
    fn policy_toml_round_trip(t1 in 0.0..120.0f64, gap in 1.0..120.0f64) {
        let p = RegulatoryPolicy::new(vec![t1, t1 + gap], vec![0.5, 0.75, 1.0], 5.0).unwrap();
        prop_assert_eq!(RegulatoryPolicy::from_toml(&p.to_toml()).unwrap(), p);
    }
}
