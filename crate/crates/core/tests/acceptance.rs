//! End-to-end acceptance run: prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails. Pass criterion numbers as arguments to run a
//! subset, e.g. `cargo test --test acceptance -- 1 3 10`.

mod common;

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::gradient::gradient_case;
use common::{determinant, group_kinds, max_abs_diff, orthogonality_defect, taylor_exp};
use equin::encoder::EncoderConfig;
use equin::evaluation::{
    cluster_counts, disentanglement, entropy_diagnostic, hit_rate, stabilizer_recovery,
    test_points, ConstantEmbedder, CosetOracle, Embedder, HitRateConfig, ModelEmbedder,
};
use equin::group::{enumerate_subgroup, exp_map, AlgebraVector, Factor, GroupElement, GroupSpec};
use equin::oracle::{check_coset_containment, check_orbit_stabilizer, random_action};
use equin::random_stream;
use equin::synthetic::{Dataset, DatasetName, DatasetSpec};
use equin::training::{train, TrainConfig};
use rand::Rng;

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const LEARNING_RATE: f64 = 1e-3;

type Verdict = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Verdict,
}

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn fmt(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:.3}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn arrows(orders: &[usize]) -> Dataset {
    let spec = DatasetSpec::preset(DatasetName::RotatingArrows, 0)
        .retain_orbits(|o| orders.contains(&o.stabilizer.order()));
    Dataset::generate(&spec).expect("preset generates")
}

/// A trained model with its final mean equivariance loss.
struct Trained {
    model: ModelEmbedder<f64>,
    final_equivariance: f64,
}

fn fit(data: &Dataset, heads: usize, lambda: f64, seed: u64) -> Trained {
    let spec = data.spec();
    let encoder = EncoderConfig::new(
        spec.feature_dim().unwrap(),
        heads,
        spec.group().unwrap().clone(),
    )
    .with_seed(seed);
    let config = TrainConfig {
        learning_rate: LEARNING_RATE,
        lambda,
        seed,
        ..TrainConfig::default()
    };
    let report = train(&data.training_view::<f64>(), &encoder, &config).expect("training runs");
    Trained {
        final_equivariance: report.final_losses().equivariance,
        model: ModelEmbedder::new(encoder, report.params),
    }
}

fn hits(model: &dyn Embedder, data: &Dataset, seed: u64) -> f64 {
    let config = HitRateConfig {
        seed,
        ..HitRateConfig::default()
    };
    hit_rate(model, &data.test_triplets(), &config).expect("hit rate")
}

fn random_element(spec: &GroupSpec, rng: &mut impl Rng) -> (AlgebraVector<f64>, GroupElement<f64>) {
    let mut coords: Vec<f64> = (0..spec.algebra_dim())
        .map(|_| rng.random_range(-PI..PI))
        .collect();
    for slot in spec.slots() {
        if slot.factor == Factor::So3 {
            let v = &mut coords[slot.algebra..slot.algebra + 3];
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > PI {
                v.iter_mut().for_each(|x| *x *= PI / n);
            }
        }
    }
    let v = AlgebraVector::new(spec.clone(), coords).unwrap();
    let g = exp_map(spec, &v).unwrap();
    (v, g)
}

fn group_suite() -> Verdict {
    let mut rng = random_stream(1);
    let mut worst = [0.0f64; 4];
    for spec in group_kinds() {
        let e = GroupElement::identity(&spec);
        for _ in 0..1000 {
            let (v, x) = random_element(&spec, &mut rng);
            let (_, y) = random_element(&spec, &mut rng);
            let (_, z) = random_element(&spec, &mut rng);
            let xy_z = x.compose(&y).unwrap().compose(&z).unwrap();
            let x_yz = x.compose(&y.compose(&z).unwrap()).unwrap();
            let axioms = [
                max_abs_diff(xy_z.matrix(), x_yz.matrix()),
                max_abs_diff(x.compose(&e).unwrap().matrix(), x.matrix()),
                max_abs_diff(e.compose(&x).unwrap().matrix(), x.matrix()),
                max_abs_diff(x.compose(&x.inverse()).unwrap().matrix(), e.matrix()),
                max_abs_diff(x.inverse().compose(&x).unwrap().matrix(), e.matrix()),
            ];
            worst[0] = worst[0].max(axioms.into_iter().fold(0.0, f64::max));
            worst[1] = worst[1].max(max_abs_diff(x.matrix(), &taylor_exp(&v, 20)));
            worst[2] = worst[2].max(orthogonality_defect(x.matrix()));
            worst[3] = worst[3].max((determinant(x.matrix()) - 1.0).abs());
        }
    }
    check(
        worst[0] < 1e-10 && worst[1] < 1e-8 && worst[2] < 1e-10 && worst[3] < 1e-10,
        format!(
            "4000 cases: axioms {:.1e}, taylor {:.1e}, orthogonality {:.1e}, det {:.1e}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

fn gradient_oracle() -> Verdict {
    let mut worst = 0.0f64;
    let mut skipped = 0;
    for group in group_kinds() {
        let (mut checked, mut seed) = (0, 0u64);
        while checked < 20 {
            seed += 1;
            if seed > 200 {
                return Err(format!("{group}: too many near-tie instances"));
            }
            let heads = 1 + (seed as usize % 4);
            match gradient_case(group.clone(), heads, 0.7, seed % 5 == 0, seed * 31 + 7)? {
                Some(err) => {
                    worst = worst.max(err);
                    checked += 1;
                }
                None => skipped += 1,
            }
        }
    }
    check(
        worst < 1e-4,
        format!(
            "80 instances, worst relative error {worst:.2e} ({skipped} near-tie draws redrawn)"
        ),
    )
}

fn orbit_stabilizer() -> Verdict {
    let mut rng = random_stream(2024);
    let (mut points, mut largest) = (0, 0);
    for i in 0..50 {
        let action = random_action(&mut rng, 120, 200).map_err(|e| e.to_string())?;
        largest = largest.max(action.group_order());
        let report = check_orbit_stabilizer(&action);
        if !report.passed() || action.group_order() > 120 {
            return Err(format!("action {i}: {:?}", report.violations));
        }
        points += report.points_checked;
    }
    Ok(format!(
        "50 actions, {points} points, largest |G| = {largest}"
    ))
}

fn capacity_obstruction() -> Verdict {
    let data = arrows(&[2]);
    let points = test_points(&data);
    let mut lines = Vec::new();
    let mut ok = true;
    for seed in SEEDS {
        let one = fit(&data, 1, 0.0, seed);
        let two = fit(&data, 2, 0.0, seed);
        let r1 = stabilizer_recovery(&one.model, &data, &points).unwrap();
        let r2 = stabilizer_recovery(&two.model, &data, &points).unwrap();
        ok &=
            one.final_equivariance > 0.5 && r1 == 0.0 && two.final_equivariance < 0.05 && r2 >= 0.9;
        lines.push(format!(
            "seed {seed}: N=1 L_G {:.3} rec {r1:.3}; N=2 L_G {:.3} rec {r2:.3}",
            one.final_equivariance, two.final_equivariance
        ));
    }
    check(ok, lines.join("\n    "))
}

fn table_trend() -> Verdict {
    let data = arrows(&[1, 2, 3, 4, 5]);
    let points = test_points(&data);
    let (mut h5, mut d5, mut h1, mut d1) = (vec![], vec![], vec![], vec![]);
    for seed in SEEDS {
        for (heads, hs, ds) in [(5, &mut h5, &mut d5), (1, &mut h1, &mut d1)] {
            let t = fit(&data, heads, 1.0, seed);
            hs.push(hits(&t.model, &data, seed));
            ds.push(disentanglement(&t.model, &points, seed).unwrap().mean);
        }
    }
    check(
        mean(&h5) >= 0.8 && mean(&d5) <= 0.1 && mean(&h1) <= 0.5 && mean(&d1) >= 1.0,
        format!(
            "N=5 hit {:.3} [{}] dis {:.3} [{}]; N=1 hit {:.3} [{}] dis {:.3} [{}]",
            mean(&h5),
            fmt(&h5),
            mean(&d5),
            fmt(&d5),
            mean(&h1),
            fmt(&h1),
            mean(&d1),
            fmt(&d1)
        ),
    )
}

fn heads_sweep() -> Verdict {
    let data = arrows(&[3]);
    let per_n: Vec<f64> = (1..=6)
        .map(|heads| {
            mean(&SEEDS.map(|seed| hits(&fit(&data, heads, 0.0, seed).model, &data, seed)))
        })
        .collect();
    let gap = mean(&per_n[2..]) - mean(&per_n[..2]);
    check(
        gap >= 0.3,
        format!(
            "seed-mean hit rate for N=1..6 [{}], gap {gap:.3}",
            fmt(&per_n)
        ),
    )
}

fn lambda_sweep() -> Verdict {
    let data = arrows(&[2]);
    let points = test_points(&data);
    let mut entropy = Vec::new();
    let mut lines = Vec::new();
    let mut two_at_one = 0.0;
    for lambda in [0.001, 1.0, 10.0] {
        let (mut ent, mut two, mut one) = (vec![], vec![], vec![]);
        for seed in SEEDS {
            let t = fit(&data, 5, lambda, seed);
            ent.push(entropy_diagnostic(&t.model, &points).unwrap());
            let counts = cluster_counts(&t.model, &points).unwrap();
            let frac =
                |k: usize| counts.iter().filter(|&&c| c == k).count() as f64 / counts.len() as f64;
            two.push(frac(2));
            one.push(frac(1));
        }
        if lambda == 1.0 {
            two_at_one = mean(&two);
        }
        let collapse = if mean(&one) > 0.5 { " (collapsed)" } else { "" };
        lines.push(format!(
            "lambda {lambda}: entropy {:.3} [{}], 2 clusters {:.3}, 1 cluster {:.3}{collapse}",
            mean(&ent),
            fmt(&ent),
            mean(&two),
            mean(&one)
        ));
        entropy.push(mean(&ent));
    }
    let monotone = entropy.windows(2).all(|w| w[1] <= w[0]);
    check(monotone && two_at_one >= 0.9, lines.join("\n    "))
}

fn double_arrows() -> Verdict {
    let data = Dataset::generate(&DatasetSpec::preset(DatasetName::DoubleArrows, 0)).unwrap();
    let t = fit(&data, 20, 1.0, 0);
    let hit = hits(&t.model, &data, 0);
    let rec = stabilizer_recovery(&t.model, &data, &test_points(&data)).unwrap();
    check(
        hit >= 0.8 && rec >= 0.8,
        format!(
            "hit {hit:.3}, recovery {rec:.3}, final L_G {:.3}",
            t.final_equivariance
        ),
    )
}

fn solids() -> Verdict {
    let spec =
        DatasetSpec::preset(DatasetName::Solids, 0).retain_orbits(|o| o.stabilizer.order() == 12);
    let data = Dataset::generate(&spec).unwrap();
    let t = fit(&data, 24, 10.0, 0);
    let h = enumerate_subgroup::<f64>(&spec.orbits[0].stabilizer);
    let points = test_points(&data);
    let mut contained = 0;
    for p in &points {
        let set = t.model.embed(p).unwrap().set;
        contained += usize::from(check_coset_containment(&set, &h, 0.1).unwrap().contained);
    }
    let frac = contained as f64 / points.len() as f64;
    check(
        frac >= 0.7,
        format!(
            "containment {frac:.3} over {} test points, final L_G {:.3}",
            points.len(),
            t.final_equivariance
        ),
    )
}

fn metric_self_tests() -> Verdict {
    let data = arrows(&[1, 2, 3, 4, 5]);
    let points = test_points(&data);
    let oracle = CosetOracle::new(data.spec(), 5).unwrap();
    let constant = ConstantEmbedder::identity(&GroupSpec::So2, 5);
    let hit = hits(&oracle, &data, 0);
    let dis = disentanglement(&oracle, &points, 0).unwrap().mean;
    let rec = stabilizer_recovery(&oracle, &data, &points).unwrap();
    let const_dis = disentanglement(&constant, &points, 0).unwrap().mean;
    check(
        hit == 1.0 && dis < 0.02 && rec == 1.0 && const_dis > 1.0,
        format!("oracle hit {hit:.3} dis {dis:.4} recovery {rec:.3}; constant dis {const_dis:.3}"),
    )
}

fn main() -> ExitCode {
    let minutes = |m: u64| Duration::from_secs(60 * m);
    let criteria = [
        Criterion {
            id: 1,
            name: "group axioms and exponential map",
            budget: Duration::from_secs(10),
            run: group_suite,
        },
        Criterion {
            id: 2,
            name: "gradient oracle",
            budget: Duration::from_secs(30),
            run: gradient_oracle,
        },
        Criterion {
            id: 3,
            name: "orbit-stabilizer oracle",
            budget: Duration::from_secs(30),
            run: orbit_stabilizer,
        },
        Criterion {
            id: 4,
            name: "capacity obstruction",
            budget: minutes(5),
            run: capacity_obstruction,
        },
        Criterion {
            id: 5,
            name: "rotating arrows trend",
            budget: minutes(15),
            run: table_trend,
        },
        Criterion {
            id: 6,
            name: "head-count sweep",
            budget: minutes(10),
            run: heads_sweep,
        },
        Criterion {
            id: 7,
            name: "entropy-weight sweep",
            budget: minutes(10),
            run: lambda_sweep,
        },
        Criterion {
            id: 8,
            name: "double arrows",
            budget: minutes(15),
            run: double_arrows,
        },
        Criterion {
            id: 9,
            name: "solids containment",
            budget: minutes(20),
            run: solids,
        },
        Criterion {
            id: 10,
            name: "metric self-tests",
            budget: minutes(1),
            run: metric_self_tests,
        },
    ];
    let selected: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = Vec::new();
    for c in criteria
        .iter()
        .filter(|c| selected.is_empty() || selected.contains(&c.id))
    {
        let start = Instant::now();
        let verdict = (c.run)();
        let elapsed = start.elapsed();
        let in_time = elapsed <= c.budget;
        let (pass, detail) = match verdict {
            Ok(d) => (in_time, d),
            Err(d) => (false, d),
        };
        let timing = format!(
            "{:.1}s of {}s{}",
            elapsed.as_secs_f64(),
            c.budget.as_secs(),
            if in_time { "" } else { ", over budget" }
        );
        println!(
            "criterion {}: {} {} ({timing})\n    {detail}",
            c.id,
            if pass { "PASS" } else { "FAIL" },
            c.name
        );
        if !pass {
            failed.push(c.id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all selected criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
