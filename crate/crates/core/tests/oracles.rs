mod common;

use common::oracle::{self, Stepper, Torus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rcabench::engine::{evolve, Rule};
use rcabench::lattice::{Configuration, FullState, Geometry, Region};
use rcabench::measure::{estimate_event_probability, event_probability_exact, CylinderSet, MixedState};
use rcabench::universality::{
    search_conditional_prep, search_map, search_unconditional_prep, BijectionTask, MapTable, Policy, PreparationTask,
    SearchOutcome,
};

fn to_torus(s: &FullState) -> Torus {
    Torus {
        dims: s.geometry().dims().to_vec(),
        cells: s.symbols().to_vec(),
        clock: s.clock() as u64,
    }
}

fn random_state(g: &Geometry, rng: &mut ChaCha8Rng) -> FullState {
    let cells = (0..g.cell_count()).map(|_| rng.gen_range(0..g.alphabet()) as u8).collect();
    FullState::from_symbols(g, cells).unwrap()
}

#[test]
fn engine_agrees_with_reference_steppers() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cases: [(Rule, Geometry, Stepper); 4] = [
        (Rule::shift(vec![1]).unwrap(), Geometry::line(17, 2).unwrap(), oracle::shift_forward),
        (Rule::shift(vec![-1]).unwrap(), Geometry::line(9, 2).unwrap(), oracle::shift_backward),
        (Rule::identity(1, 2).unwrap(), Geometry::line(9, 2).unwrap(), oracle::identity),
        (Rule::billiard_ball(), Geometry::grid(8, 6, 2).unwrap(), oracle::billiard_ball),
    ];
    for (rule, g, step) in cases {
        for _ in 0..50 {
            let s = random_state(&g, &mut rng);
            let t = rng.gen_range(0..12u64);
            let got = evolve(&s, &rule, t as i64).unwrap();
            assert_eq!(to_torus(&got).cells, oracle::run(step, &to_torus(&s), t).cells, "{}", rule.label());
        }
    }
}

fn window_choice_matches(outcome: &SearchOutcome, oracle: &Option<(u64, oracle::Choice)>, window: &Region) {
    match (outcome.certificate(), oracle) {
        (None, None) => {}
        (Some(cert), Some((t, choice))) => {
            assert_eq!(cert.time, *t);
            let expected: Vec<(usize, u8)> = window
                .cells()
                .iter()
                .zip(choice)
                .filter_map(|(&c, v)| v.map(|v| (c, v)))
                .collect();
            // the oracle leaves non-cone cells unset (enumerate) or zero (zero policy)
            let got: Vec<(usize, u8)> = match cert.policy {
                Policy::Zero => cert.window_assignment().iter().collect(),
                Policy::Enumerate => cert.program.iter().collect(),
            };
            assert_eq!(got, expected);
        }
        (a, b) => panic!("search {:?} vs oracle {:?}", a.map(|c| c.time), b),
    }
}

fn bbm_setup() -> (Geometry, Region, Region) {
    let g = Geometry::grid(10, 10, 2).unwrap();
    let r = Region::from_coords(&g, [[4, 4]]).unwrap();
    let w = Region::from_coords(&g, [[3, 3], [3, 4], [3, 5], [4, 3], [4, 5], [5, 3], [5, 4], [5, 5]]).unwrap();
    (g, r, w)
}

#[test]
fn bbm_conditional_prep_agrees_with_oracle() {
    let (g, r, w) = bbm_setup();
    for policy in [Policy::Zero, Policy::Enumerate] {
        let target = Configuration::from_text(&g, r.clone(), "1").unwrap();
        let task = PreparationTask::new(Rule::billiard_ball(), g.clone(), target, 4, w.clone())
            .with_initial(Configuration::zeros(r.clone()))
            .with_policy(policy);
        let found = search_conditional_prep(&task).unwrap();
        let expected = oracle::search(
            oracle::billiard_ball,
            g.dims(),
            2,
            r.cells(),
            &[vec![0]],
            &|_| vec![1],
            w.cells(),
            4,
            policy == Policy::Enumerate,
        );
        assert!(expected.is_some());
        window_choice_matches(&found, &expected, &w);
    }
}

#[test]
fn bbm_not_map_agrees_with_oracle() {
    let (g, r, w) = bbm_setup();
    for policy in [Policy::Zero, Policy::Enumerate] {
        let not = MapTable::from_fn(r.clone(), 2, |c| vec![1 - c[0]]).unwrap();
        let task = BijectionTask::new(Rule::billiard_ball(), g.clone(), not, 4, w.clone()).with_policy(policy);
        let found = search_map(&task).unwrap();
        let expected = oracle::search(
            oracle::billiard_ball,
            g.dims(),
            2,
            r.cells(),
            &oracle::all_inputs(1, 2),
            &|x| vec![1 - x[0]],
            w.cells(),
            4,
            policy == Policy::Enumerate,
        );
        window_choice_matches(&found, &expected, &w);
    }
}

#[test]
fn shift_transposition_agrees_with_oracle() {
    let g = Geometry::line(24, 2).unwrap();
    let r = Region::from_positions(&g, [0, 1]).unwrap();
    let w = Region::from_positions(&g, [-3, -2, -1, 2, 3, 4]).unwrap();
    for policy in [Policy::Zero, Policy::Enumerate] {
        let swap = MapTable::from_fn(r.clone(), 2, |c| vec![c[1], c[0]]).unwrap();
        let task = BijectionTask::new(Rule::shift(vec![1]).unwrap(), g.clone(), swap, 6, w.clone()).with_policy(policy);
        let found = search_map(&task).unwrap();
        let expected = oracle::search(
            oracle::shift_forward,
            g.dims(),
            2,
            r.cells(),
            &oracle::all_inputs(2, 2),
            &|x| vec![x[1], x[0]],
            w.cells(),
            6,
            policy == Policy::Enumerate,
        );
        assert!(expected.is_none());
        window_choice_matches(&found, &expected, &w);
    }
}

#[test]
fn shift_unconditional_prep_agrees_with_oracle() {
    let g = Geometry::line(16, 2).unwrap();
    let r = Region::from_positions(&g, [0, 1]).unwrap();
    let w = Region::from_positions(&g, [-4, -3, -2, -1]).unwrap();
    for index in 0..4 {
        let target = Configuration::from_index(r.clone(), 2, index);
        let task = PreparationTask::new(Rule::shift(vec![1]).unwrap(), g.clone(), target.clone(), 4, w.clone());
        let found = search_unconditional_prep(&task).unwrap();
        let want = target.symbols().to_vec();
        let expected = oracle::search(
            oracle::shift_forward,
            g.dims(),
            2,
            r.cells(),
            &oracle::all_inputs(2, 2),
            &|_| want.clone(),
            w.cells(),
            4,
            false,
        );
        window_choice_matches(&found, &expected, &w);
    }
}

#[test]
fn monte_carlo_intervals_cover_exact_values() {
    let g = Geometry::grid(8, 8, 2).unwrap();
    let rule = Rule::billiard_ball();
    let r = Region::from_coords(&g, [[3, 3], [3, 4]]).unwrap();
    let event = CylinderSet::new(
        r.clone(),
        2,
        ["01", "11"].iter().map(|s| Configuration::from_text(&g, r.clone(), s).unwrap()),
    )
    .unwrap();
    let fixed = Configuration::from_text(&g, Region::from_coords(&g, [[2, 2], [2, 3]]).unwrap(), "10").unwrap();
    let state = MixedState::conditioned(fixed);
    let exact = event_probability_exact(&state, &rule, &g, 2, &event, 1 << 20).unwrap().value();
    let covered = (0..200u64)
        .filter(|&seed| {
            estimate_event_probability(&state, &rule, &g, 2, &event, 500, seed)
                .unwrap()
                .covers(exact)
        })
        .count();
    assert!(covered >= 186, "covered {covered}/200");
}
