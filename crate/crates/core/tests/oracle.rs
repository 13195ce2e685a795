//! Closed-form accounting and the exhaustive equalization solver checked
//! against independent brute-force oracles.

mod common;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use reluforge::accounting;
use reluforge::criticality::CriticalityOrder;
use reluforge::equalization::{self, EqualizationProblem};
use reluforge::network::InputDims;
use reluforge::transforms;

#[test]
fn accounting_agrees_with_layer_walker_on_random_specs() {
    let mut rng = StdRng::seed_from_u64(0x5eed_0001);
    for i in 0..100 {
        let spec = common::random_spec(&mut rng);
        let (per, total) = accounting::stage_relus(&spec);
        let (oracle_per, oracle_total) = common::brute_stage_relus(&spec);
        assert_eq!(per, oracle_per, "spec #{i}: {spec:?}");
        assert_eq!(total, oracle_total, "spec #{i}");
        assert_eq!(accounting::stage_flops(&spec).1, common::brute_total_flops(&spec), "spec #{i}");
        assert_eq!(
            accounting::stage_params(&spec).1,
            common::brute_total_params(&spec),
            "spec #{i}"
        );
    }
}

#[test]
fn accounting_agrees_with_layer_walker_on_transformed_specs() {
    let mut rng = StdRng::seed_from_u64(0x5eed_0002);
    let mut checked = 0;
    while checked < 100 {
        let spec = common::random_spec(&mut rng);
        let d = spec.stage_count();
        let mut variant = spec.clone();
        if rng.gen_bool(0.5) {
            variant = transforms::cull(&variant, rng.gen_range(1..=d)).unwrap();
        }
        if rng.gen_bool(0.7) {
            let stages: Vec<usize> = (1..=d).filter(|_| rng.gen_bool(0.6)).collect();
            variant = transforms::thin(&variant, &stages).unwrap();
        }
        if rng.gen_bool(0.5) {
            let n = *[2u32, 4, 8, 16].get(rng.gen_range(0..4)).unwrap();
            match transforms::relu_reuse(&variant, n) {
                Ok(v) => variant = v,
                Err(_) => continue, // indivisible channels; try another draw
            }
        }
        let (per, total) = accounting::stage_relus(&variant);
        let (oracle_per, oracle_total) = common::brute_stage_relus(&variant);
        assert_eq!(per, oracle_per, "variant of {}", spec.name);
        assert_eq!(total, oracle_total);
        assert_eq!(accounting::stage_flops(&variant).1, common::brute_total_flops(&variant));
        checked += 1;
    }
}

/// Exhaustive grid oracle: realize every tuple and order stages by the
/// layer walker's body ReLU counts (stem excluded, as the equalization
/// chain defines stage weight). The symbolic solver must agree on every
/// grid point.
#[test]
fn solver_agrees_with_realized_grid_oracle() {
    let mut rng = StdRng::seed_from_u64(0x5eed_0003);
    for trial in 0..20 {
        let d = rng.gen_range(2..=4usize);
        let mut stages: Vec<usize> = (1..=d).collect();
        for i in (1..d).rev() {
            let j = rng.gen_range(0..=i);
            stages.swap(i, j);
        }
        let order = CriticalityOrder::new(stages).unwrap();
        let phi: Vec<u32> = (0..d).map(|_| rng.gen_range(1..=4)).collect();
        let lo = 2u32;
        let hi = rng.gen_range(4..=10u32);
        let problem = EqualizationProblem::width(order.clone(), phi.clone())
            .unwrap()
            .with_lambda_bounds(lo, hi);
        let solved = equalization::solve(&problem).unwrap();

        let mut oracle = Vec::new();
        let mut lambda = vec![lo; d - 1];
        let mut done = false;
        while !done {
            let spec = equalization::realize(&phi, 16, &lambda, InputDims::new(64, 64, 3), 100)
                .unwrap();
            let body = common::brute_body_relus(&spec);
            let feasible = order
                .stages()
                .windows(2)
                .all(|w| body[w[0] - 1] > body[w[1] - 1]);
            if feasible {
                oracle.push(lambda.clone());
            }
            let mut i = lambda.len();
            loop {
                if i == 0 {
                    done = true;
                    break;
                }
                i -= 1;
                if lambda[i] < hi {
                    lambda[i] += 1;
                    lambda[i + 1..].fill(lo);
                    break;
                }
            }
        }

        let mut got: Vec<Vec<u32>> = solved.solutions.iter().map(|s| s.lambda.clone()).collect();
        got.sort();
        oracle.sort();
        assert_eq!(got, oracle, "trial {trial}: order {:?} phi {phi:?} hi {hi}", order.stages());
    }
}

/// Every frontier point must be in the input and undominated; every
/// non-returned point must be dominated or a duplicate of a survivor.
#[test]
fn frontier_agrees_with_pairwise_dominance_oracle() {
    use reluforge::pareto::{frontier, Axis, DesignPoint};
    let mut rng = StdRng::seed_from_u64(0x5eed_0004);
    for _ in 0..10 {
        let n = rng.gen_range(1..=200usize);
        let points: Vec<DesignPoint> = (0..n)
            .map(|i| {
                DesignPoint::new(
                    format!("p{i:03}"),
                    rng.gen_range(1..=40u32) as f64 * 1000.0,
                    rng.gen_range(1..=40u32) as f64 * 1e6,
                )
                .with_accuracy(rng.gen_range(40..=90u32) as f64)
            })
            .collect();
        let axes = [Axis::Relus, Axis::Flops, Axis::Accuracy];
        let front = frontier(&points, &axes).unwrap();

        let key = |p: &DesignPoint| (p.relus, p.flops, -p.accuracy.unwrap());
        let dominated = |p: &DesignPoint| {
            let (pr, pf, pa) = key(p);
            points.iter().any(|q| {
                let (qr, qf, qa) = key(q);
                qr <= pr && qf <= pf && qa <= pa && (qr < pr || qf < pf || qa < pa)
            })
        };
        for p in &front {
            assert!(points.iter().any(|q| q.label == p.label));
            assert!(!dominated(p), "dominated point {} survived", p.label);
        }
        for p in &points {
            let in_front = front.iter().any(|q| q.label == p.label);
            if !in_front {
                let duplicate_survives = front.iter().any(|q| key(q) == key(p));
                assert!(
                    dominated(p) || duplicate_survives,
                    "undominated point {} was dropped",
                    p.label
                );
            }
        }
    }
}
