use proptest::prelude::*;
use proptest::sample::subsequence;
use rcabench::engine::{evolve, induced_map, Rule};
use rcabench::lattice::{moore_neighborhood, Configuration, FullState, Geometry, Region, Restrict};
use rcabench::measure::{
    cylinder_measure, free_energy, marginal_entropy, pushforward, CylinderSet, FreeEnergy, MixedState,
    RegionDistribution,
};
use rcabench::thermo::{
    check_complexity_prior_bound, cycle_cost, entropy_influx_experiment, kraft_check, physical_complexity,
    physical_prior, prior_table, ComplexityBounds, ComplexityTarget, PriorMode, PriorQuery, SplitSpec,
};
use rcabench::universality::{
    search_conditional_prep, search_map, search_unconditional_prep, BijectionTask, Certificate, CertificateKind,
    MapTable, Policy, PreparationTask, SearchOutcome,
};

const CAP: u64 = 1 << 20;

fn bundled(i: usize) -> (Rule, Geometry) {
    match i {
        0 => (Rule::shift(vec![1]).unwrap(), Geometry::line(11, 2).unwrap()),
        1 => (Rule::identity(1, 2).unwrap(), Geometry::line(11, 2).unwrap()),
        2 => (Rule::billiard_ball(), Geometry::grid(8, 8, 2).unwrap()),
        _ => (Rule::builtin("sr30").unwrap(), Geometry::line(11, 4).unwrap()),
    }
}

fn state_from(g: &Geometry, seed: &[u8], clock: i64) -> FullState {
    let a = g.alphabet() as u8;
    let cells = (0..g.cell_count()).map(|i| seed[i % seed.len()].wrapping_mul(i as u8 | 1) % a).collect();
    FullState::from_symbols(g, cells).unwrap().with_clock(clock)
}

fn region_in(g: &Geometry, picks: &[usize]) -> Region {
    Region::from_cells(g, picks.iter().map(|&p| p % g.cell_count())).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn moore_neighbourhood_monotone_and_bounded(
        picks in prop::collection::vec(0usize..144, 1..6),
        extra in prop::collection::vec(0usize..144, 0..4),
        r1 in 0usize..3,
        dr in 0usize..3,
    ) {
        let g = Geometry::grid(12, 12, 2).unwrap();
        let r = region_in(&g, &picks);
        let bigger = r.union(&region_in(&g, &extra));
        let small = moore_neighborhood(&r, r1, &g);
        prop_assert!(small.is_subset(&moore_neighborhood(&r, r1 + dr, &g)));
        prop_assert!(small.is_subset(&moore_neighborhood(&bigger, r1, &g)));
        prop_assert!(small.len() <= r.len() * (2 * r1 + 1).pow(2));
        prop_assert!(r.is_subset(&small));
    }

    #[test]
    fn restriction_composes(seed in prop::collection::vec(any::<u8>(), 1..8), outer in subsequence((0..20).collect::<Vec<usize>>(), 0..20), keep in any::<u32>()) {
        let g = Geometry::line(20, 3).unwrap();
        let s = state_from(&g, &seed, 0);
        let outer = Region::from_cells(&g, outer).unwrap();
        let inner = Region::from_cells(&g, outer.cells().iter().copied().filter(|c| keep >> (c % 32) & 1 == 1)).unwrap();
        prop_assert_eq!(s.restrict(&outer).unwrap().restrict(&inner).unwrap(), s.restrict(&inner).unwrap());
    }

    #[test]
    fn serialization_round_trips(seed in prop::collection::vec(any::<u8>(), 1..8), picks in prop::collection::vec(0usize..48, 0..8), clock in -3i64..3) {
        let g = Geometry::grid(6, 8, 4).unwrap();
        let r = region_in(&g, &picks);
        prop_assert_eq!(Region::parse(&g, &r.to_text(&g)).unwrap(), r.clone());
        let s = state_from(&g, &seed, clock);
        let c = s.restrict(&r).unwrap();
        prop_assert_eq!(Configuration::parse(&g, &c.to_text(&g)).unwrap(), c);
        prop_assert_eq!(FullState::parse(&s.to_text()).unwrap(), s);
    }

    #[test]
    fn group_laws(which in 0usize..4, seed in prop::collection::vec(any::<u8>(), 1..8), t1 in -6i64..7, t2 in -6i64..7) {
        let (rule, g) = bundled(which);
        let s = state_from(&g, &seed, 0);
        prop_assert_eq!(evolve(&s, &rule, 0).unwrap(), s.clone());
        let direct = evolve(&s, &rule, t1 + t2).unwrap();
        let stepped = evolve(&evolve(&s, &rule, t1).unwrap(), &rule, t2).unwrap();
        prop_assert_eq!(direct, stepped);
    }

    #[test]
    fn light_cone_locality(which in 0usize..4, a in prop::collection::vec(any::<u8>(), 1..8), b in prop::collection::vec(any::<u8>(), 1..8), cell in 0usize..64, t in 0u64..4) {
        let (rule, g) = bundled(which);
        let r = region_in(&g, &[cell]);
        let cone = moore_neighborhood(&r, t as usize, &g);
        let s = state_from(&g, &a, 0);
        let mut s2 = state_from(&g, &b, 0);
        s2.set_configuration(&s.restrict(&cone).unwrap()).unwrap();
        let x = evolve(&s, &rule, t as i64).unwrap().restrict(&r).unwrap();
        let y = evolve(&s2, &rule, t as i64).unwrap().restrict(&r).unwrap();
        prop_assert_eq!(x, y);
    }

    #[test]
    fn induced_map_independent_of_torus_size(which in 0usize..4, env_seed in prop::collection::vec(any::<u8>(), 1..4), t in 0u64..3) {
        let (rule, g) = bundled(which);
        let (small, large) = if g.dimension() == 1 {
            (g.clone(), Geometry::new(vec![17], g.alphabet()).unwrap())
        } else {
            (g.clone(), Geometry::grid(12, 10, 2).unwrap())
        };
        let tables: Vec<Vec<Vec<u8>>> = [small, large]
            .iter()
            .map(|h| {
                let coords: Vec<Vec<i64>> = if h.dimension() == 1 { vec![vec![2], vec![3]] } else { vec![vec![2, 2], vec![2, 3]] };
                let r = Region::from_coords(h, coords).unwrap();
                let envr = moore_neighborhood(&r, t as usize, h).difference(&r);
                // env symbols depend on the offset from R only
                let env_syms = envr.cells().iter().map(|&c| {
                    let k: i64 = h.coord_of(c).iter().sum();
                    env_seed[(k as usize) % env_seed.len()] % h.alphabet() as u8
                }).collect();
                let env = Configuration::new(envr, env_syms, h.alphabet()).unwrap();
                induced_map(&rule, h, &env, &r, &r, t).unwrap().outputs().to_vec()
            })
            .collect();
        prop_assert_eq!(&tables[0], &tables[1]);
    }

    #[test]
    fn pushforward_of_uniform_is_uniform(which in 0usize..4, picks in prop::collection::vec(0usize..64, 1..3), t in 0u64..3) {
        let (rule, g) = bundled(which);
        // billiard-ball cones grow by a block per step; keep them under the cap
        let t = if which == 2 { t.min(1) } else { t };
        let r = region_in(&g, &picks);
        let p = pushforward(&MixedState::uniform(), &rule, &g, t, &r, CAP).unwrap();
        prop_assert!(p.distribution.distance_from_uniform() < 1e-12);
    }

    #[test]
    fn cylinder_measure_additive_and_monotone(xs in subsequence((0..8u128).collect::<Vec<_>>(), 0..8), ys in subsequence((0..8u128).collect::<Vec<_>>(), 0..8)) {
        let g = Geometry::line(10, 2).unwrap();
        let r = Region::from_positions(&g, [0, 1, 2]).unwrap();
        let set = |v: &[u128]| CylinderSet::new(r.clone(), 2, v.iter().map(|&i| Configuration::from_index(r.clone(), 2, i))).unwrap();
        let a = set(&xs);
        let only_y: Vec<u128> = ys.iter().copied().filter(|y| !xs.contains(y)).collect();
        let b = set(&only_y);
        let u = a.union(&b).unwrap();
        prop_assert!((cylinder_measure(&u) - cylinder_measure(&a) - cylinder_measure(&b)).abs() < 1e-15);
        prop_assert!(a.is_subset(&u));
        prop_assert!(cylinder_measure(&a) <= cylinder_measure(&u));
        prop_assert!(free_energy(&u).or_infinity() <= free_energy(&a).or_infinity());
    }

    #[test]
    fn entropy_bounds_and_product_additivity(p in prop::collection::vec(0.0f64..1.0, 3), q in prop::collection::vec(0.0f64..1.0, 3)) {
        let g = Geometry::line(10, 3).unwrap();
        let norm = |v: &[f64]| {
            let s: f64 = v.iter().sum::<f64>() + 1e-3;
            v.iter().map(|x| (x + 1e-3 / 3.0) / s).collect::<Vec<f64>>()
        };
        let (p, q) = (norm(&p), norm(&q));
        let r = Region::from_positions(&g, [0, 1]).unwrap();
        let joint: Vec<f64> = p.iter().flat_map(|x| q.iter().map(move |y| x * y)).collect();
        let d = RegionDistribution::new(r.clone(), 3, joint).unwrap();
        let h = |v: &[f64]| -v.iter().filter(|&&x| x > 0.0).map(|x| x * x.log2()).sum::<f64>();
        let full = marginal_entropy(&d, &r).unwrap();
        prop_assert!(full >= 0.0 && full <= 2.0 * 3f64.log2() + 1e-12);
        prop_assert!((full - h(&p) - h(&q)).abs() < 1e-9);
        let first = marginal_entropy(&d, &Region::from_positions(&g, [0]).unwrap()).unwrap();
        prop_assert!((first - h(&p)).abs() < 1e-9);
    }
}

fn shift_prep(target: &Configuration, g: &Geometry, window: &[i64], t: u64) -> PreparationTask {
    PreparationTask::new(
        Rule::shift(vec![1]).unwrap(),
        g.clone(),
        target.clone(),
        t,
        Region::from_positions(g, window.iter().copied()).unwrap(),
    )
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn search_is_deterministic_across_workers(which in 0usize..2, index in 0u128..8, policy in prop::bool::ANY) {
        let g = Geometry::line(20, 2).unwrap();
        let r = Region::from_positions(&g, [0, 1, 2]).unwrap();
        let target = Configuration::from_index(r, 2, index);
        let policy = if policy { Policy::Enumerate } else { Policy::Zero };
        let task = shift_prep(&target, &g, &[-4, -3, -2, -1, 3], 5).with_policy(policy);
        let run = || if which == 0 { search_unconditional_prep(&task).unwrap() } else {
            search_conditional_prep(&task.clone().with_initial(Configuration::zeros(target.region().clone()))).unwrap()
        };
        let one = in_pool(1, run);
        let four = in_pool(4, run);
        prop_assert_eq!(one, four);
    }

    #[test]
    fn enlarging_bounds_keeps_certificates(index in 0u128..4, extra in 3i64..6) {
        let g = Geometry::line(20, 2).unwrap();
        let r = Region::from_positions(&g, [0, 1]).unwrap();
        let target = Configuration::from_index(r, 2, index);
        let small = search_unconditional_prep(&shift_prep(&target, &g, &[-3, -2, -1], 3)).unwrap();
        prop_assert!(small.is_found());
        let big = search_unconditional_prep(&shift_prep(&target, &g, &[-3, -2, -1, extra], 4)).unwrap();
        prop_assert!(big.is_found());
        prop_assert!(big.certificate().unwrap().time <= small.certificate().unwrap().time);
    }

    #[test]
    fn unconditional_certifies_every_initial_content(index in 0u128..8) {
        let g = Geometry::line(20, 2).unwrap();
        let r = Region::from_positions(&g, [0, 1, 2]).unwrap();
        let target = Configuration::from_index(r.clone(), 2, index);
        let found = search_unconditional_prep(&shift_prep(&target, &g, &[-4, -3, -2, -1], 4)).unwrap();
        let cert = found.certificate().unwrap();
        prop_assert!(cert.verify(&Rule::shift(vec![1]).unwrap(), &g).unwrap());
        for ci in 0..8 {
            let cond = Certificate {
                kind: CertificateKind::CondPrep,
                initial: Some(Configuration::from_index(r.clone(), 2, ci)),
                ..cert.clone()
            };
            prop_assert!(cond.resimulate(&Rule::shift(vec![1]).unwrap(), &g).unwrap().0);
        }
    }

    #[test]
    fn bijective_goals_give_bijective_induced_maps(perm in Just(vec![0u8, 1]).prop_shuffle(), which in 0usize..2) {
        let (rule, g) = if which == 0 {
            (Rule::billiard_ball(), Geometry::grid(10, 10, 2).unwrap())
        } else {
            (Rule::shift(vec![1]).unwrap(), Geometry::line(16, 2).unwrap())
        };
        let (r, w) = if which == 0 {
            (Region::from_coords(&g, [[4, 4]]).unwrap(), Region::from_coords(&g, [[3, 3], [3, 4], [4, 3], [5, 5]]).unwrap())
        } else {
            (Region::from_positions(&g, [0]).unwrap(), Region::from_positions(&g, [-2, -1, 1]).unwrap())
        };
        let table = MapTable::from_fn(r.clone(), 2, |c| vec![perm[c[0] as usize]]).unwrap();
        let task = BijectionTask::new(rule.clone(), g.clone(), table.clone(), 4, w);
        if let SearchOutcome::Found(cert) = search_map(&task).unwrap() {
            prop_assert!(cert.verify(&rule, &g).unwrap());
            let cone = moore_neighborhood(&r, cert.time as usize, &g).difference(&r);
            let env = cone.cells().iter().map(|&c| cert.window_assignment().get(c).unwrap_or(0)).collect();
            let env = Configuration::new(cone, env, 2).unwrap();
            let map = induced_map(&rule, &g, &env, &r, &r, cert.time).unwrap();
            prop_assert!(map.is_bijective());
            prop_assert_eq!(map.outputs(), table.outputs());
        }
    }
}

fn split_line() -> SplitSpec {
    SplitSpec::new(&Geometry::line(16, 2).unwrap(), 0, 1).unwrap()
}

fn split_grid() -> SplitSpec {
    SplitSpec::new(&Geometry::grid(12, 12, 2).unwrap(), 0, 6).unwrap()
}

fn thermo_rule(i: usize) -> (Rule, SplitSpec) {
    match i {
        0 => (Rule::shift(vec![-1]).unwrap(), split_line()),
        1 => (Rule::shift(vec![1]).unwrap(), split_line()),
        _ => (Rule::billiard_ball(), split_grid()),
    }
}

fn complexity_bounds(split: &SplitSpec, region: &Region, t: u64) -> ComplexityBounds {
    let g = split.geometry();
    let near = moore_neighborhood(region, 1, g);
    let window = Region::from_cells(g, near.cells().iter().copied().filter(|&c| split.is_hot(c) && !region.contains(c))).unwrap();
    ComplexityBounds { max_time: t, window, max_program: 4, cap: CAP }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn prior_sums_to_one(which in 0usize..3, cell in 0usize..144, wide in prop::bool::ANY, t in 0u64..3) {
        let (rule, split) = thermo_rule(which);
        let g = split.geometry();
        let c = cell % g.cell_count();
        let r = if wide { Region::from_cells(g, [c, g.offset(c, &vec![1; g.dimension()])]).unwrap() } else { Region::from_cells(g, [c]).unwrap() };
        prop_assume!(split.query_valid(&r, t));
        let table = prior_table(&rule, &split, &r, t, CAP).unwrap();
        prop_assert_eq!(table.counts.iter().sum::<u128>(), table.total);
    }

    #[test]
    fn prior_symmetric_along_boundary(which in 0usize..2, row in 3i64..9, col in 0i64..12, dy in 1i64..6, index in 0u128..4, t in 0u64..3) {
        let split = split_grid();
        let g = split.geometry();
        let rule = if which == 0 { Rule::shift(vec![1, 0]).unwrap() } else { Rule::billiard_ball() };
        // Margolus covariance needs even translations
        let (dy, t) = if which == 1 { (2 * dy, t.min(1)) } else { (dy, t) };
        let r = Region::from_coords(g, [[row, col], [row, col + 1]]).unwrap();
        prop_assume!(split.query_valid(&r, t));
        let c = Configuration::from_index(r, 2, index);
        let moved = c.translate(g, &[0, dy]).unwrap();
        let p = |target: Configuration| physical_prior(&PriorQuery { rule: rule.clone(), split: split.clone(), target, time: t, mode: PriorMode::Exact }, CAP).unwrap();
        prop_assert_eq!(p(c), p(moved));
    }

    #[test]
    fn complexity_certificates_verify_and_bound_holds(which in 0usize..3, offset in -2i64..3, wide in prop::bool::ANY, index in 0u128..4) {
        let (rule, split) = thermo_rule(which);
        let g = split.geometry();
        let anchor: Vec<i64> = if g.dimension() == 1 { vec![1 + offset] } else { vec![6 + offset, 5] };
        let mut cells = vec![g.index_of(&anchor).unwrap()];
        if wide {
            let mut next = anchor.clone();
            *next.last_mut().unwrap() += 1;
            cells.push(g.index_of(&next).unwrap());
        }
        let r = Region::from_cells(g, cells).unwrap();
        let c = Configuration::from_index(r.clone(), 2, index % (1 << r.len()));
        let bounds = complexity_bounds(&split, &r, 2);
        let out = physical_complexity(&rule, &split, &ComplexityTarget::Config(c.clone()), &bounds).unwrap();
        if let Some(cert) = out.certificate() {
            prop_assert!(cert.verify(&rule, &split).unwrap());
        }
        prop_assert!(check_complexity_prior_bound(&rule, &split, &c, &bounds).unwrap().holds);
    }

    #[test]
    fn kraft_sum_at_most_one(which in 0usize..3, offset in -1i64..2, members in subsequence((0u128..4).collect::<Vec<_>>(), 0..4)) {
        let (rule, split) = thermo_rule(which);
        let g = split.geometry();
        let anchor: Vec<i64> = if g.dimension() == 1 { vec![1 + offset, 2 + offset] } else { vec![6 + offset, 5, 6 + offset, 6] };
        let coords: Vec<Vec<i64>> = anchor.chunks(g.dimension()).map(|c| c.to_vec()).collect();
        let r = Region::from_coords(g, coords).unwrap();
        let family: Vec<Configuration> = members.iter().map(|&i| Configuration::from_index(r.clone(), 2, i)).collect();
        let rep = kraft_check(&rule, &split, &family, &complexity_bounds(&split, &r, 2)).unwrap();
        prop_assert!(rep.holds && rep.sum <= 1.0);
    }

    #[test]
    fn cycle_cost_monotone_and_bounded(which in 0usize..3, tau in 1u64..3, k in 1u64..4, index in 0u128..4) {
        let (rule, split) = thermo_rule(which);
        let g = split.geometry();
        let r = if g.dimension() == 1 { Region::from_positions(g, [0, 1]).unwrap() } else { Region::from_coords(g, [[2, 2], [2, 3]]).unwrap() };
        let (tau, k) = if which == 2 { (1, k.min(2)) } else { (tau, k) };
        let c = Configuration::from_index(r, 2, index);
        let rep = cycle_cost(&rule, g, &c, tau, k, CAP).unwrap();
        let bits: Vec<f64> = rep.series.iter().map(FreeEnergy::or_infinity).collect();
        prop_assert!(bits.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(bits[0] >= rep.single - 1e-12);
        if which < 2 && tau >= 2 {
            // shifted copies of a 2-cell cylinder are disjoint for tau >= 2
            prop_assert_eq!(rep.value, FreeEnergy::Bits(k as f64 * rep.single));
        }
    }

    #[test]
    fn influx_holds_when_transfer_verified(program in prop::collection::vec(0u8..2, 0..3), x in 2i64..5, t in 1u64..5) {
        let g = Geometry::line(16, 2).unwrap();
        let rule = Rule::shift(vec![1]).unwrap();
        let r = Region::from_positions(&g, [0, 1]).unwrap();
        let rp = Region::from_positions(&g, (0..program.len() as i64).map(|i| -3 - i)).unwrap();
        let cp = Configuration::new(rp, program, 2).unwrap();
        let rep = entropy_influx_experiment(&rule, &g, &r, &[x], &cp, t, None, CAP).unwrap();
        prop_assert_eq!(rep.transfer_verified, x as u64 == t);
        prop_assert!(rep.holds);
    }
}
