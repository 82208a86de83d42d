use flockbench::analysis::{self, check_symmetric, classify_outcome, ClassifyConfig, OutcomeLabel};
use flockbench::continuous::{integrate, rk4_step};
use flockbench::discrete::{fluctuations, simulate, DtVariant};
use flockbench::ensemble::sup_norms;
use flockbench::meanfield::{moments, EmpiricalMeasure, Grid};
use flockbench::scenario::optimal_ring_radius;
use flockbench::topology::{leader_distance, verify_contraction, SwitchingSignal};
use flockbench::two_particle::{self, TwoParticleCase, TwoParticleClass};
use flockbench::{CtModel, Digraph, DtModel, Ensemble, Kernel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn random_ensemble(n: usize, dim: usize, xw: f64, vw: f64, rng: &mut ChaCha8Rng) -> Ensemble {
    let x = (0..n * dim).map(|_| rng.gen_range(-xw..xw)).collect();
    let v = (0..n * dim).map(|_| rng.gen_range(-vw..vw)).collect();
    Ensemble::from_flat(dim, x, v).unwrap()
}

/// Each follower picks one to three leaders among the lower indices.
fn random_hierarchy(n: usize, rng: &mut ChaCha8Rng) -> Digraph {
    let mut edges = Vec::new();
    for i in 1..n {
        for _ in 0..rng.gen_range(1..=3usize.min(i)) {
            edges.push((rng.gen_range(0..i), i));
        }
    }
    Digraph::new(n, edges).unwrap()
}

// ---------------------------------------------------------------- continuous

#[test]
fn symmetric_sup_norm_and_lyapunov_pair_never_increase() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let e0 = random_ensemble(12, 2, 2.0, 1.0, &mut rng);
    let model = CtModel::symmetric(1.0, Kernel::power_plain(1.5).unwrap()).unwrap();
    let h = 1e-2;
    let run = integrate(&model, &e0, h, 2000, |_, _, _| {}).unwrap();
    for w in run.diagnostics.windows(2) {
        assert!(
            w[1].v_sup <= w[0].v_sup + 1e-9,
            "v_sup rose at t = {}",
            w[1].time
        );
        assert!(w[1].lyapunov_plus <= w[0].lyapunov_plus + 1e-8 * h);
        assert!(w[1].lyapunov_minus <= w[0].lyapunov_minus + 1e-8 * h);
    }
    let last = run.diagnostics.last().unwrap();
    assert!(last.v_sup < 0.5 * run.diagnostics[0].v_sup);
}

#[test]
fn motsch_tadmor_velocity_diameter_never_increases() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let e0 = random_ensemble(10, 2, 2.0, 1.0, &mut rng);
    let model = CtModel::motsch_tadmor(1.0, Kernel::power_plain(0.4).unwrap()).unwrap();
    let run = integrate(&model, &e0, 1e-2, 2000, |_, _, _| {}).unwrap();
    for w in run.diagnostics.windows(2) {
        assert!(w[1].dv <= w[0].dv + 1e-9, "Dv rose at t = {}", w[1].time);
    }
}

#[test]
fn bonding_energy_dissipates_at_the_production_rate() {
    let (k0, k1, k2, r) = (1.0, 1.0, 1.0, 0.5);
    let kernel = Kernel::power_plain(1.0).unwrap();
    let n = 6;
    let radius = optimal_ring_radius(n, r);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut x = Vec::new();
    let mut v = Vec::new();
    for i in 0..n {
        let a = std::f64::consts::TAU * i as f64 / n as f64;
        x.extend([radius * a.cos(), radius * a.sin()]);
        v.extend([rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2)]);
    }
    let mean: Vec<f64> = (0..2)
        .map(|c| (0..n).map(|i| v[2 * i + c]).sum::<f64>() / n as f64)
        .collect();
    for i in 0..n {
        v[2 * i] -= mean[0];
        v[2 * i + 1] -= mean[1];
    }
    let e0 = Ensemble::from_flat(2, x, v).unwrap();
    let model = CtModel::bonding(k0, k1, k2, r, kernel.clone()).unwrap();
    let h = 1e-3;
    let steps = 4000;
    let mut energy = Vec::new();
    let mut production = Vec::new();
    integrate(&model, &e0, h, steps, |_, e, rec| {
        energy.push(rec.kinetic_energy + rec.potential_energy);
        production.push(analysis::energy_production(e, k0, k1, &kernel));
    })
    .unwrap();
    for w in energy.windows(2) {
        assert!(w[1] <= w[0] + 1e-9);
    }
    // Composite Simpson over the whole horizon.
    let mut dissipated = production[0] + production[steps];
    for (k, p) in production.iter().enumerate().take(steps).skip(1) {
        dissipated += if k % 2 == 1 { 4.0 * p } else { 2.0 * p };
    }
    dissipated *= h / 3.0;
    let balance = energy[0] - energy[steps] - dissipated;
    assert!(
        balance.abs() < 1e-9 * (1.0 + energy[0]),
        "balance residual {balance:e}"
    );
    assert!(dissipated > 0.0);
}

#[test]
fn rk4_error_shrinks_sixteenfold_when_h_halves() {
    let case = TwoParticleCase::critical(0.0, 1.0, 2.0).unwrap();
    let model = CtModel::symmetric(case.k, case.kernel()).unwrap();
    let horizon = 10.0;
    let error = |h: f64| {
        let steps = (horizon / h).round() as usize;
        let mut worst = 0.0f64;
        integrate(&model, &case.to_ensemble(), h, steps, |_, e, _| {
            let (x, v) = two_particle::differences(e).unwrap();
            let (xe, ve) = two_particle::critical_trajectory(&case, e.time()).unwrap();
            worst = worst.max((x - xe).abs()).max((v - ve).abs());
        })
        .unwrap();
        worst
    };
    let coarse = error(0.2);
    let fine = error(0.1);
    let ratio = coarse / fine;
    assert!((12.0..20.0).contains(&ratio), "error ratio {ratio}");
}

#[test]
fn two_particle_runs_follow_the_conservation_relation() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..10 {
        let beta = rng.gen_range(1.2..4.0);
        let k = rng.gen_range(0.3..3.0);
        let x0 = rng.gen_range(0.0..3.0);
        let v0 = rng.gen_range(0.05..3.0);
        let case = TwoParticleCase::new(x0, v0, k, beta).unwrap();
        let model = CtModel::symmetric(k, case.kernel()).unwrap();
        integrate(&model, &case.to_ensemble(), 1e-3, 20000, |_, e, _| {
            let (x, v) = two_particle::differences(e).unwrap();
            let expected = two_particle::velocity_at_separation(&case, x).unwrap();
            assert!(
                (v - expected).abs() < 1e-8,
                "beta={beta} K={k} x0={x0} v0={v0} t={} err={:e}",
                e.time(),
                v - expected
            );
        })
        .unwrap();
    }
}

/// Horizon long enough for the outcome to be unambiguous, read off the
/// closed forms: exponential decay at the rate `K ψ(x∞)` below critical,
/// and the velocity within a factor 1.5 of `v∞` above it.
fn decisive_horizon(case: &TwoParticleCase) -> f64 {
    let (b, k) = (case.beta, case.k);
    let vc = two_particle::critical_velocity(case).unwrap();
    if case.v0 < vc {
        let inv = (1.0 + case.x0).powf(1.0 - b) - case.v0 * (b - 1.0) / k;
        let x_inf = inv.powf(1.0 / (1.0 - b)) - 1.0;
        (case.v0 / 1e-8).ln() / (k * case.kernel().value(x_inf))
    } else {
        let v_inf = case.v0 - vc;
        let reach = (2.0 * k / ((b - 1.0) * v_inf)).powf(1.0 / (b - 1.0));
        (2.0 * (reach - 1.0).max(1.0) / v_inf).max(100.0)
    }
}

#[test]
fn outcome_classifier_agrees_with_the_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let cases: Vec<TwoParticleCase> = (0..200)
        .map(|i| {
            let beta = rng.gen_range(2.0..4.0);
            let k = rng.gen_range(0.5..2.0);
            let x0: f64 = rng.gen_range(0.0..2.0);
            let vc = k * (1.0 + x0).powf(1.0 - beta) / (beta - 1.0);
            let u = if i % 2 == 0 {
                rng.gen_range(0.1..0.7)
            } else {
                rng.gen_range(1.3..3.0)
            };
            TwoParticleCase::new(x0, u * vc, k, beta).unwrap()
        })
        .collect();
    let failures: Vec<String> = cases
        .par_iter()
        .filter_map(|case| {
            let expected = match two_particle::classify(case).class {
                TwoParticleClass::Subcritical => OutcomeLabel::Flocking,
                TwoParticleClass::Supercritical => OutcomeLabel::Dispersing,
                TwoParticleClass::Critical => {
                    return Some(format!("{case:?} landed on criticality"))
                }
            };
            let h = 0.02;
            let steps = (decisive_horizon(case) / h).ceil() as usize;
            let every = (steps / 2000).max(1);
            let mut traj = Vec::new();
            let model = CtModel::symmetric(case.k, case.kernel()).unwrap();
            integrate(&model, &case.to_ensemble(), h, steps, |s, _, rec| {
                if s % every == 0 || s == steps {
                    traj.push(*rec);
                }
            })
            .unwrap();
            let got = classify_outcome(&traj, ClassifyConfig::default());
            (got.label != expected).then(|| format!("{case:?}: expected {expected}, got {got:?}"))
        })
        .collect();
    assert!(failures.is_empty(), "{failures:#?}");
}

type Observable = fn(&[f64], &[f64]) -> f64;

#[test]
fn push_forward_identity_holds_for_polynomial_observables() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let tests: [Observable; 3] = [
        |x, v| x.iter().zip(v).map(|(a, b)| a * b).sum(),
        |x, _| x.iter().map(|a| a * a).sum(),
        |x, v| v.iter().map(|b| b * b * b).sum::<f64>() + x[0],
    ];
    for dim in [1, 2] {
        let e0 = random_ensemble(40, dim, 1.0, 1.0, &mut rng);
        let model = CtModel::symmetric(1.0, Kernel::power_plain(1.0).unwrap()).unwrap();
        let h = 1e-2;
        let mut e = e0.clone();
        for _ in 0..200 {
            e = rk4_step(&model, &e, h).unwrap();
        }
        let mu_t = EmpiricalMeasure::from_ensemble(&e);
        let mut back = e;
        for _ in 0..200 {
            back = rk4_step(&model, &back, -h).unwrap();
        }
        let mu_0 = EmpiricalMeasure::from_ensemble(&e0);
        let pulled = EmpiricalMeasure::from_ensemble(&back);
        for f in tests {
            assert!((mu_0.integrate(f) - pulled.integrate(f)).abs() < 1e-9);
        }
        // The flow genuinely moved the measure.
        assert!((mu_t.integrate(tests[1]) - mu_0.integrate(tests[1])).abs() > 1e-3);
    }
}

#[test]
fn binned_moments_conserve_mass_and_momentum() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let e0 = random_ensemble(30, 2, 1.0, 1.0, &mut rng);
    let model = CtModel::symmetric(1.0, Kernel::power_plain(2.0).unwrap()).unwrap();
    let grid = Grid::new(vec![-30.0, -30.0], vec![30.0, 30.0], vec![12, 12]).unwrap();
    let first = moments(&EmpiricalMeasure::from_ensemble(&e0), &grid)
        .unwrap()
        .total_momentum();
    integrate(&model, &e0, 1e-2, 1000, |_, e, _| {
        let m = moments(&EmpiricalMeasure::from_ensemble(e), &grid).unwrap();
        assert!((m.total_mass() - 1.0).abs() < 1e-14);
        for (a, b) in m.total_momentum().iter().zip(&first) {
            assert!((a - b).abs() < 1e-12);
        }
    })
    .unwrap();
}

#[test]
fn symmetric_condition_matches_critical_coupling() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let kernel = Kernel::power_plain(2.0).unwrap();
    for _ in 0..200 {
        let e = random_ensemble(6, 2, 2.0, 1.0, &mut rng);
        let k = rng.gen_range(0.1..40.0);
        let report = check_symmetric(&e, k, &kernel).unwrap();
        let k_star = report.extra("K_star").unwrap();
        if ((k - k_star) / k_star).abs() > 1e-10 {
            assert_eq!(report.holds, k > k_star, "K = {k}, K* = {k_star}");
        }
    }
}

#[test]
fn trajectories_stay_inside_the_budget_radius() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let kernel = Kernel::power_plain(2.0).unwrap();
    let e0 = random_ensemble(10, 2, 1.0, 0.05, &mut rng);
    let report = check_symmetric(&e0, 5.0, &kernel).unwrap();
    assert!(report.holds);
    let x_m = report.extra("x_M").unwrap();
    let model = CtModel::symmetric(5.0, kernel).unwrap();
    integrate(&model, &e0, 1e-2, 3000, |_, e, _| {
        assert!(sup_norms(e).x_sup <= x_m + 1e-6);
    })
    .unwrap();
}

// ------------------------------------------------------------------ discrete

fn max_velocity_norm(e: &Ensemble) -> f64 {
    (0..e.len())
        .map(|i| e.v(i).iter().map(|a| a * a).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

fn component_range(e: &Ensemble, c: usize) -> (f64, f64) {
    (0..e.len()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
        (lo.min(e.v(i)[c]), hi.max(e.v(i)[c]))
    })
}

fn stable_model(variant: DtVariant, kernel: Kernel, n: usize, fraction: f64) -> DtModel {
    let probe = DtModel::new(1.0, kernel.clone(), variant.clone()).unwrap();
    DtModel::new(fraction * probe.stability_bound(n), kernel, variant).unwrap()
}

#[test]
fn fluctuations_evolve_by_the_flocking_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let kernel = Kernel::power_squared(0.25).unwrap();
    for _ in 0..20 {
        let n = rng.gen_range(3..10);
        let graph = random_hierarchy(n, &mut rng);
        let model = stable_model(DtVariant::Leadership { graph }, kernel.clone(), n, 0.9);
        let mut e = random_ensemble(n, 2, 3.0, 1.0, &mut rng);
        for t in 0..50 {
            let p = model.flocking_matrix(&e, t).unwrap();
            let predicted = p.apply_blocks(&fluctuations(&e), 2);
            e = model.step(&e, t).unwrap();
            for (a, b) in predicted.iter().zip(fluctuations(&e)) {
                assert!((a - b).abs() < 1e-14, "step {t}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn preference_fluctuations_pick_up_the_forcing() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let n = 6;
    let graph = random_hierarchy(n, &mut rng);
    let preferences: Vec<Vec<f64>> = (0..n)
        .map(|_| vec![rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)])
        .collect();
    let variant = DtVariant::Preference {
        graph: graph.clone(),
        strength: 2.0,
        preferences: preferences.clone(),
        bound: 1.0,
    };
    let model = stable_model(variant, Kernel::power_plain(1.0).unwrap(), n, 0.5);
    let h = model.h();
    let mut e = random_ensemble(n, 2, 3.0, 1.0, &mut rng);
    for t in 0..30 {
        let p = model.flocking_matrix(&e, t).unwrap();
        let mut predicted = p.apply_blocks(&fluctuations(&e), 2);
        for i in 1..n {
            let leaders = graph.leader_set(i);
            let delta: f64 = leaders
                .iter()
                .map(|&j| {
                    e.v(j)
                        .iter()
                        .zip(e.v(i))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                })
                .sum::<f64>()
                / leaders.len() as f64;
            for c in 0..2 {
                predicted[(i - 1) * 2 + c] += h * delta * preferences[i][c];
            }
        }
        let v0 = e.v(0).to_vec();
        e = model.step(&e, t).unwrap();
        assert_eq!(e.v(0), &v0[..]);
        for (a, b) in predicted.iter().zip(fluctuations(&e)) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}

#[test]
fn velocities_stay_in_their_convex_hull() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let kernel = Kernel::power_squared(0.25).unwrap();
    let n = 8;
    let variants = vec![
        DtVariant::AllToAll,
        DtVariant::Leadership {
            graph: random_hierarchy(n, &mut rng),
        },
        DtVariant::Switching {
            graphs: vec![
                Digraph::chain(n),
                Digraph::path(n, &[7, 6, 5, 4, 3, 2, 1, 0]).unwrap(),
            ],
            signal: SwitchingSignal::periodic_dwell(&[0, 1], 3),
        },
    ];
    for variant in variants {
        let model = stable_model(variant, kernel.clone(), n, 0.95);
        let e0 = random_ensemble(n, 3, 3.0, 1.0, &mut rng);
        let mut prev = e0.clone();
        simulate(&model, &e0, 200, |t, e, _| {
            if t > 0 {
                assert!(max_velocity_norm(e) <= max_velocity_norm(&prev) + 1e-15);
                for c in 0..3 {
                    let (lo0, hi0) = component_range(&prev, c);
                    let (lo1, hi1) = component_range(e, c);
                    assert!(lo1 >= lo0 - 1e-15 && hi1 <= hi0 + 1e-15);
                }
            }
            prev = e.clone();
        })
        .unwrap();
    }
}

#[test]
fn root_velocity_is_untouched() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let kernel = Kernel::power_squared(0.25).unwrap();
    let n = 7;
    let variants = vec![
        DtVariant::Leadership {
            graph: random_hierarchy(n, &mut rng),
        },
        DtVariant::Preference {
            graph: random_hierarchy(n, &mut rng),
            strength: 1.5,
            preferences: vec![vec![0.3, -0.2]; n],
            bound: 1.0,
        },
        DtVariant::Switching {
            graphs: vec![random_hierarchy(n, &mut rng), Digraph::star(n, 0).unwrap()],
            signal: SwitchingSignal::Periodic(vec![0, 1, 1]),
        },
    ];
    for variant in variants {
        let model = stable_model(variant, kernel.clone(), n, 0.9);
        let e0 = random_ensemble(n, 2, 2.0, 1.0, &mut rng);
        simulate(&model, &e0, 100, |_, e, _| assert_eq!(e.v(0), e0.v(0))).unwrap();
    }
}

/// Every leader of `i` sits no deeper than `i` itself.
fn no_deeper_leaders(g: &Digraph, levels: &[usize]) -> bool {
    g.edges().all(|(j, i)| levels[j] <= levels[i])
}

#[test]
fn contraction_bound_holds_along_trajectories() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let kernel = Kernel::power_squared(0.25).unwrap();
    let mut checked = 0;
    while checked < 30 {
        let n = rng.gen_range(3..10);
        let graph = random_hierarchy(n, &mut rng);
        let levels = leader_distance(&graph).unwrap().levels;
        if !no_deeper_leaders(&graph, &levels) {
            continue;
        }
        checked += 1;
        let follower_levels = &levels[1..];
        let model = stable_model(DtVariant::Leadership { graph }, kernel.clone(), n, 0.9);
        let mut e = random_ensemble(n, 2, 3.0, 1.0, &mut rng);
        for t in 0..40 {
            let p = model.flocking_matrix(&e, t).unwrap();
            let phi_m = model.min_edge_weight(&e, t).unwrap();
            for eps in [0.25, 0.5, 0.75] {
                let c = verify_contraction(&p, follower_levels, eps, model.h(), phi_m).unwrap();
                assert!(c.holds, "t={t} eps={eps}: {c:?}");
            }
            e = model.step(&e, t).unwrap();
        }
    }
}

#[test]
fn chain_attains_the_contraction_bound() {
    let kernel = Kernel::constant(1.0).unwrap();
    let n = 5;
    let model = stable_model(
        DtVariant::Leadership {
            graph: Digraph::chain(n),
        },
        kernel,
        n,
        0.5,
    );
    let e = Ensemble::from_flat(1, vec![0.0; n], vec![1.0, 0.0, 2.0, -1.0, 0.5]).unwrap();
    let levels = leader_distance(&Digraph::chain(n)).unwrap().levels;
    let p = model.flocking_matrix(&e, 0).unwrap();
    let c = verify_contraction(&p, &levels[1..], 0.5, model.h(), 1.0).unwrap();
    assert!(c.holds && c.margin.abs() < 1e-15);
}

#[test]
fn a_deeper_leader_breaks_the_contraction_bound() {
    // 0 → 1 → 2 → 3 plus the shortcut 0 → 3: agent 3 sits at level 1 but
    // also listens to agent 2 at level 2.
    let graph = Digraph::new(4, [(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
    assert!(graph.is_hierarchical());
    let levels = leader_distance(&graph).unwrap().levels;
    assert_eq!(levels, vec![0, 1, 2, 1]);
    let model = stable_model(
        DtVariant::Leadership { graph },
        Kernel::constant(1.0).unwrap(),
        4,
        0.5,
    );
    let e = Ensemble::from_flat(1, vec![0.0; 4], vec![0.0; 4]).unwrap();
    let p = model.flocking_matrix(&e, 0).unwrap();
    let c = verify_contraction(&p, &levels[1..], 0.5, model.h(), 1.0).unwrap();
    assert!((c.norm - 1.0).abs() < 1e-15);
    assert!(!c.holds);
}

#[test]
fn unstable_step_is_rejected_not_clamped() {
    let model = DtModel::all_to_all(0.6, Kernel::constant(1.0).unwrap()).unwrap();
    let e = Ensemble::from_flat(1, vec![0.0, 1.0, 2.0], vec![1.0, 0.0, -1.0]).unwrap();
    let err = simulate(&model, &e, 3, |_, _, _| {}).unwrap_err();
    assert!(matches!(
        err.root_cause(),
        flockbench::FlockError::Stability { .. }
    ));
}
