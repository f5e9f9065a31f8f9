use proptest::prelude::*;
use rand::Rng;

use tsplab::candidates::{candidate_quality, from_alpha, from_priorities, from_scores};
use tsplab::cost::{CostView, EdgeCost};
use tsplab::instance::{build_sparse_graph, generate_uniform};
use tsplab::onetree::{alpha_bruteforce, alpha_measures, minimum_one_tree};
use tsplab::oracle::{exact_bruteforce, exact_held_karp, tour_edge_indicator};
use tsplab::rng::rng_from_seed;
use tsplab::search::{random_tour, run_trials, transform_distances, TrialConfig};
use tsplab::sgn::{forward, init_model, GraphBatch, Mode};
use tsplab::subgrad::{held_karp_bound, subgradient_ascent, update_penalties, AscentStop};
use tsplab::{AscentSchedule, CandidateSet, PiVector};

fn random_pi(n: usize, seed: u64, amp: f64) -> PiVector {
    let mut rng = rng_from_seed(seed ^ 0x9e37);
    PiVector::from((0..n).map(|_| rng.random_range(-amp..amp)).collect::<Vec<_>>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn distances_symmetric_and_neighbour_lists_sorted(n in 4usize..30, seed in any::<u64>(), gamma in 1usize..8) {
        let inst = generate_uniform(n, seed).unwrap();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    prop_assert_eq!(inst.distance(i, j).unwrap(), inst.distance(j, i).unwrap());
                }
            }
        }
        let g = build_sparse_graph(&inst, gamma.min(n - 1)).unwrap();
        for i in 0..n {
            prop_assert!(g.distances(i).windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn generators_are_deterministic(n in 3usize..40, seed in any::<u64>()) {
        prop_assert_eq!(generate_uniform(n, seed).unwrap().to_native(), generate_uniform(n, seed).unwrap().to_native());
    }

    #[test]
    fn normalisation_preserves_tour_length(n in 3usize..30, seed in any::<u64>(), scale in 0.01f64..1000.0) {
        let base = generate_uniform(n, seed).unwrap();
        let coords: Vec<[f64; 2]> = base.coords().iter().map(|&[x, y]| [x * scale + 3.0, y * scale * 0.5 - 7.0]).collect();
        let inst = tsplab::TspInstance::new(coords, tsplab::Metric::ContinuousEuclidean, None).unwrap();
        let (norm, s) = inst.normalize_unit_square().unwrap();
        let tour = random_tour(n, seed).unwrap();
        let a = inst.tour_length(tour.order());
        let b = norm.tour_length(tour.order()) * s;
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
    }

    #[test]
    fn alpha_is_nonnegative_symmetric_and_zero_on_the_tree(n in 4usize..14, seed in any::<u64>()) {
        let inst = generate_uniform(n, seed).unwrap();
        let pi = random_pi(n, seed, 0.1);
        let g = build_sparse_graph(&inst, n - 1).unwrap();
        let alpha = alpha_measures(&inst, &pi, &g).unwrap();
        let tree = minimum_one_tree(&inst, &pi).unwrap();
        for i in 0..n {
            for (slot, &j) in g.neighbors(i).iter().enumerate() {
                let a = alpha[i * (n - 1) + slot];
                prop_assert!(a >= -1e-9);
                let back = alpha[g.edge_index(j, i).unwrap()];
                prop_assert!((a - back).abs() < 1e-9);
                if tree.contains_edge(i, j) {
                    prop_assert!(a.abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn alpha_matches_bruteforce(n in 4usize..9, seed in any::<u64>()) {
        let inst = generate_uniform(n, seed).unwrap();
        let pi = random_pi(n, seed, 0.1);
        let g = build_sparse_graph(&inst, n - 1).unwrap();
        let alpha = alpha_measures(&inst, &pi, &g).unwrap();
        for i in 0..n {
            for (slot, &j) in g.neighbors(i).iter().enumerate() {
                let brute = alpha_bruteforce(&inst, &pi, (i, j)).unwrap();
                prop_assert!((alpha[i * (n - 1) + slot] - brute).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn ascent_stays_below_optimum(n in 5usize..10, seed in any::<u64>()) {
        let inst = generate_uniform(n, seed).unwrap();
        let opt = exact_held_karp(&inst).unwrap().length;
        let res = subgradient_ascent(&inst, &AscentSchedule::for_instance(&inst));
        prop_assert!(res.trace.iter().all(|p| p.bound <= opt + 1e-9));
        let max = res.trace.iter().map(|p| p.bound).fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(res.w_best, max);
        prop_assert!(held_karp_bound(&inst, &random_pi(n, seed, 0.2)).unwrap() <= opt + 1e-9);
        if res.stop == AscentStop::Tour {
            let tree = minimum_one_tree(&inst, &res.pi_best).unwrap();
            let order = tree.as_tour().unwrap();
            prop_assert!((inst.tour_length(&order) - opt).abs() < 1e-9);
        }
    }

    #[test]
    fn balanced_degrees_are_a_fixed_point(n in 3usize..20, seed in any::<u64>(), step in 0.0f64..10.0) {
        let mut pi = random_pi(n, seed, 1.0);
        let before = pi.clone();
        update_penalties(&mut pi, &vec![2; n], step);
        prop_assert_eq!(pi, before);
    }

    #[test]
    fn penalties_shift_every_tour_by_the_same_amount(n in 4usize..25, seed in any::<u64>()) {
        let inst = generate_uniform(n, seed).unwrap();
        let pi = random_pi(n, seed, 0.5);
        let costs = transform_distances(&inst, &pi).unwrap();
        for t in 0..10u64 {
            let tour = random_tour(n, seed.wrapping_add(t)).unwrap();
            let shifted = costs.tour_cost(tour.order()) - 2.0 * pi.sum();
            prop_assert!((shifted - inst.tour_length(tour.order())).abs() < 1e-9);
        }
    }

    #[test]
    fn monotone_priority_transforms_keep_lists(n in 4usize..20, seed in any::<u64>(), k in 1usize..6) {
        let inst = generate_uniform(n, seed).unwrap();
        let g = build_sparse_graph(&inst, (n - 1).min(8)).unwrap();
        let mut rng = rng_from_seed(seed);
        let p: Vec<f64> = (0..g.edge_count()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let q: Vec<f64> = p.iter().map(|x| x * x * x + 3.0 * x - 1.0).collect();
        let k = k.min(g.gamma());
        let a = from_priorities(&g, &p, k).unwrap();
        let b = from_priorities(&g, &q, k).unwrap();
        for i in 0..n {
            prop_assert_eq!(a.neighbors(i), b.neighbors(i));
        }
    }

    #[test]
    fn full_alpha_lists_cover_every_optimal_edge(n in 5usize..10, seed in any::<u64>()) {
        let inst = generate_uniform(n, seed).unwrap();
        let opt = exact_bruteforce(&inst).unwrap();
        let g = build_sparse_graph(&inst, n - 1).unwrap();
        let alpha = alpha_measures(&inst, &PiVector::zeros(n), &g).unwrap();
        let cands = from_alpha(&g, &alpha, n - 1).unwrap();
        prop_assert_eq!(candidate_quality(&cands, &opt.tour).missed_fraction, 0.0);
    }

    #[test]
    fn one_hot_scores_miss_exactly_what_the_sparse_graph_misses(n in 6usize..12, seed in any::<u64>(), gamma in 2usize..5) {
        let inst = generate_uniform(n, seed).unwrap();
        let opt = exact_held_karp(&inst).unwrap();
        let g = build_sparse_graph(&inst, gamma).unwrap();
        let labels = tour_edge_indicator(&g, &opt.tour);
        let beta: Vec<f64> = labels.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let cands: CandidateSet = from_scores(&g, &beta, gamma).unwrap();
        let present = labels.iter().filter(|&&b| b).count();
        let expected = (2 * n - present) as f64 / (2 * n) as f64;
        prop_assert_eq!(candidate_quality(&cands, &opt.tour).missed_fraction, expected);
    }

    #[test]
    fn search_returns_valid_tours_no_shorter_than_optimum(n in 5usize..11, seed in any::<u64>(), trials in 1usize..4) {
        let inst = generate_uniform(n, seed).unwrap();
        let opt = exact_held_karp(&inst).unwrap().length;
        let cands = CandidateSet::complete(&inst);
        let pi = random_pi(n, seed, 0.05);
        let cfg = TrialConfig::new(trials, seed);
        let (tour, stats) = run_trials(&inst, &cands, &pi, &cfg).unwrap();
        let mut seen = tour.order().to_vec();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
        prop_assert!(inst.tour_length(tour.order()) >= opt - 1e-9);
        prop_assert!(stats.trace.windows(2).all(|w| w[1].best_penalized <= w[0].best_penalized));
        let (again, _) = run_trials(&inst, &cands, &pi, &cfg).unwrap();
        prop_assert_eq!(again.order(), tour.order());
    }

    #[test]
    fn network_outputs_respect_simplex_and_penalty_bound(n in 6usize..16, seed in any::<u64>()) {
        let gamma = 4;
        let model = init_model::<f64>(8, 2, gamma, seed).unwrap();
        let inst = generate_uniform(n, seed).unwrap();
        let g = build_sparse_graph(&inst, gamma).unwrap();
        let batch = GraphBatch::<f64>::single(&g, inst.coords()).unwrap();
        let (out, _) = forward(&model, &batch, Mode::Train).unwrap();
        for row in out.beta.chunks(gamma) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
        prop_assert!(out.pi.iter().all(|p| p.abs() <= model.penalty_scale));
    }
}

#[test]
fn cost_views_share_distances() {
    let inst = generate_uniform(7, 1).unwrap();
    let base = CostView::new(&inst);
    let pen = base.with_penalties(&[0.5; 7]);
    assert!((pen.cost(0, 1) - base.cost(0, 1) - 1.0).abs() < 1e-12);
}
