//! Acceptance criteria, one printed PASS/FAIL line each.
//!
//! Criteria 4, 5, 6 and 8 run with the normal test suite. The others need
//! full solver runs and sweeps and are ignored by default:
//!
//! ```text
//! cargo test --release -p wyner-cli --test acceptance -- --include-ignored --nocapture --test-threads 1
//! ```
//!
//! Sweep outputs live under `target/tmp/acceptance` and are resumed on rerun.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wyner_cli::io::{read_encoder, write_text};
use wyner_cli::sweep::{execute, geometric, worker_count, SweepConfig, SweepSummary};
use wyner_core::data::{compose_dataset_joint, draw_samples, empirical_joint, DatasetSpec, Split};
use wyner_core::eval::{best_label_accuracy, cluster_predict, plane_point, wyner_line, MatchMode};
use wyner_core::info::{
    conditional_entropy, conditional_mutual_information, encoder_joint, joint_entropy, mutual_information, JointPmf,
    Pmf,
};
use wyner_core::model::{DecoderSet, Encoder, NegLogSimplex, NEGLOG_CAP};
use wyner_core::record::{RunRecord, SolverConfig};
use wyner_core::representation::{
    lagrangian_gamma, lagrangian_multiview, solve_admm, split_objectives, weak_convexity_sigma_entropy,
    weak_convexity_sigma_negentropy, AdmmConfig, BaselineConfig, TwoViewProblem,
};
use wyner_core::variational::{
    solve_variational, surrogate_bound, variational_gradient, variational_value_raw, VariationalConfig,
};

const INSTANCES: usize = 1000;

fn report(n: usize, pass: bool, detail: &str) {
    println!("criterion {n} {}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} failed: {detail}");
}

fn info(n: usize, detail: &str) {
    println!("criterion {n} info: {detail}");
}

fn work_dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name)
}

fn random_joint(rng: &mut ChaCha8Rng, cards: &[usize]) -> JointPmf {
    let n: usize = cards.iter().product();
    let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    JointPmf::new(cards.to_vec(), raw.into_iter().map(|m| m / total).collect()).unwrap()
}

fn random_pmf(rng: &mut ChaCha8Rng, card: usize) -> Pmf {
    let raw: Vec<f64> = (0..card).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    Pmf::new(raw.into_iter().map(|m| m / total).collect()).unwrap()
}

fn random_cards(rng: &mut ChaCha8Rng) -> (usize, [usize; 2]) {
    (rng.random_range(1..=5), [rng.random_range(2..=5), rng.random_range(2..=5)])
}

fn noise_free() -> JointPmf {
    compose_dataset_joint(&DatasetSpec::default()).unwrap()
}

fn gamma_grid() -> Vec<f64> {
    geometric(1.0, 50.0, 20)
}

fn sweep(name: &str, base: SolverConfig, grid: Vec<f64>, trials: usize, joint: &JointPmf) -> SweepSummary {
    let config = SweepConfig { base, grid, trials, z_cards: vec![8], base_seed: 0 };
    execute(&config, joint, &work_dir(name), worker_count(None).unwrap()).unwrap()
}

fn admm_sweep() -> SweepSummary {
    sweep("admm-noise-free", SolverConfig::Admm(AdmmConfig { c: 128.0, ..AdmmConfig::default() }), gamma_grid(), 10, &noise_free())
}

fn at_wyner_point(r: &RunRecord) -> bool {
    r.converged && r.metrics.residual_cmi <= 0.05 && (r.metrics.joint_mi - 3.0).abs() <= 0.1
}

/// Converged record with the smallest residual.
fn best(records: &[(String, RunRecord)]) -> Option<&(String, RunRecord)> {
    records
        .iter()
        .filter(|(_, r)| r.converged)
        .min_by(|a, b| a.1.metrics.residual_cmi.total_cmp(&b.1.metrics.residual_cmi))
}

fn describe(r: &RunRecord) -> String {
    format!(
        "multiplier {:.3}, I(X1;X2|Z) = {:.4} bits, I(Z;X1,X2) = {:.4} bits, {} iterations",
        r.config.multiplier(),
        r.metrics.residual_cmi,
        r.metrics.joint_mi,
        r.iterations
    )
}

#[test]
#[ignore = "200 ADMM runs; see the module docs"]
fn criterion_1_wyner_point_noise_free() {
    let s = admm_sweep();
    let converged = s.records.iter().filter(|(_, r)| r.converged).count();
    let hits = s.records.iter().filter(|(_, r)| at_wyner_point(r)).count();
    let closest = best(&s.records).map(|(id, r)| format!("{id}: {}", describe(r))).unwrap_or_else(|| "none".into());
    // Same protocol with a smaller penalty, for context only.
    let small_c = sweep(
        "admm-noise-free-c8",
        SolverConfig::Admm(AdmmConfig { c: 8.0, ..AdmmConfig::default() }),
        geometric(10.0, 50.0, 3),
        2,
        &noise_free(),
    );
    let small_hits = small_c.records.iter().filter(|(_, r)| at_wyner_point(r)).count();
    let small_best = best(&small_c.records).map(|(_, r)| describe(r)).unwrap_or_else(|| "none".into());
    info(1, &format!("c = 8 on 3 multipliers x 2 trials: {small_hits} of 6 at the Wyner point; closest {small_best}"));
    report(
        1,
        hits >= 1,
        &format!("c = 128: {hits} of {} runs at the Wyner point ({converged} converged); closest {closest}", s.records.len()),
    );
}

fn variational_trials(name: &str, joint: &JointPmf) -> SweepSummary {
    sweep(name, SolverConfig::Variational(VariationalConfig::default()), vec![6.0], 10, joint)
}

#[test]
#[ignore = "10 full variational runs"]
fn criterion_2_variational_parity() {
    let s = variational_trials("variational-noise-free", &noise_free());
    let ok = |r: &RunRecord| r.converged && r.metrics.achieved_kl.unwrap() <= 0.1 && r.metrics.residual_cmi <= 0.05;
    let passing: Vec<&String> = s.records.iter().filter(|(_, r)| ok(r)).map(|(id, _)| id).collect();
    let kls: Vec<String> =
        s.records.iter().map(|(_, r)| format!("{:.3}/{:.3}", r.metrics.achieved_kl.unwrap(), r.metrics.residual_cmi)).collect();
    report(
        2,
        !passing.is_empty(),
        &format!(
            "{} of 10 trials converge with KL <= 0.1 nats and I(X1;X2|Z) <= 0.05 bits (KL/residual per trial: {})",
            passing.len(),
            kls.join(" ")
        ),
    );
}

/// Trains on the empirical joint of the training split, picks the trial with
/// the smallest residual and scores it on the test split.
/// Accuracy of the best (smallest residual) converged trial, plus every
/// trial's `(residual, accuracy)`.
fn clustering_accuracy(name: &str, delta: f64) -> (f64, RunRecord, Vec<(f64, f64)>) {
    let spec = DatasetSpec { delta, ..DatasetSpec::default() };
    let train = draw_samples(&spec, Split::Train).unwrap();
    let test = draw_samples(&spec, Split::Test).unwrap();
    let s = variational_trials(name, &empirical_joint(&train).unwrap());
    let accuracy = |id: &str| {
        let encoder = read_encoder(&work_dir(name).join("runs").join(format!("{id}.encoder.json"))).unwrap();
        let hypotheses = cluster_predict(&encoder, &test, 0).unwrap();
        best_label_accuracy(&hypotheses, &test.labels, 8, 8, MatchMode::Exhaustive).unwrap().accuracy
    };
    let trials = s.records.iter().map(|(id, r)| (r.metrics.residual_cmi, accuracy(id))).collect();
    let (id, record) = best(&s.records).expect("a converged trial");
    (accuracy(id), record.clone(), trials)
}

fn per_trial(trials: &[(f64, f64)]) -> String {
    trials.iter().map(|(c, a)| format!("{c:.4}/{a:.3}")).collect::<Vec<_>>().join(" ")
}

#[test]
#[ignore = "20 full variational runs"]
fn criterion_3_clustering_accuracy() {
    let (clean, clean_run, clean_trials) = clustering_accuracy("clustering-noise-free", 0.0);
    let (noisy, noisy_run, noisy_trials) = clustering_accuracy("clustering-noisy", 0.1);
    info(3, &format!("residual/accuracy per trial, noise-free: {}", per_trial(&clean_trials)));
    info(3, &format!("residual/accuracy per trial, delta 0.1: {}", per_trial(&noisy_trials)));
    report(
        3,
        clean >= 0.95 && noisy >= 0.75,
        &format!(
            "accuracy {clean:.4} noise-free (needs 0.95; I(X1;X2|Z) = {:.4} bits), {noisy:.4} at delta 0.1 (needs 0.75; I(X1;X2|Z) = {:.4} bits)",
            clean_run.metrics.residual_cmi, noisy_run.metrics.residual_cmi
        ),
    );
}

#[test]
fn criterion_4_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = [0.0f64; 4];
    for k in 0..INSTANCES {
        let (z, cards) = random_cards(&mut rng);
        let joint = random_joint(&mut rng, &cards);
        let e = Encoder::random(k as u64, z, &cards).unwrap();
        let full = encoder_joint(&joint, &e.to_cond()).unwrap();
        let gamma = 0.05 + 20.0 * rng.random::<f64>();

        let direct = conditional_mutual_information(&full, &[0], &[1], &[2]).unwrap();
        let expanded = mutual_information(&full, &[0, 1], &[2]).unwrap()
            - mutual_information(&full, &[0], &[2]).unwrap()
            - mutual_information(&full, &[1], &[2]).unwrap()
            + mutual_information(&joint, &[0], &[1]).unwrap();
        worst[0] = worst[0].max((direct - expanded).abs());

        let (f, g) = split_objectives(&e, &e, &joint, gamma).unwrap();
        let l = (1.0 - gamma) * joint_entropy(&full, &[2]).unwrap()
            - (1.0 + gamma) * conditional_entropy(&full, &[2], &[0, 1]).unwrap()
            + gamma * conditional_entropy(&full, &[2], &[0]).unwrap()
            + gamma * conditional_entropy(&full, &[2], &[1]).unwrap();
        worst[1] = worst[1].max((f + g - l).abs()).max((lagrangian_gamma(&e, &joint, gamma).unwrap() - l).abs());

        let gammas = BTreeMap::from([(vec![0], gamma)]);
        worst[2] = worst[2].max((lagrangian_multiview(&e, &joint, &gammas).unwrap() - l).abs());

        let pp = plane_point(&e, &joint).unwrap();
        let line_gap = pp.joint_mi - wyner_line(pp.sum_view_mi, pp.views_mi) - pp.residual_cmi;
        worst[3] = worst[3].max(line_gap.abs() * std::f64::consts::LN_2);
    }
    report(
        4,
        worst.iter().all(|&w| w <= 1e-10),
        &format!(
            "{INSTANCES} instances; worst gaps in nats: residual expansion {:.2e}, F+G vs L {:.2e}, V=2 reduction {:.2e}, plane line {:.2e}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    );
}

fn entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&m| m > 0.0).map(|&m| -m * m.ln()).sum()
}

fn random_decoders(rng: &mut ChaCha8Rng, z: usize, cards: &[usize]) -> DecoderSet {
    let views = cards
        .iter()
        .map(|&c| {
            let probs: Vec<f64> = (0..z).flat_map(|_| random_pmf(rng, c).mass().to_vec()).collect();
            NegLogSimplex::project(probs.iter().map(|p| -p.ln()).collect(), c).unwrap()
        })
        .collect();
    DecoderSet::new(random_pmf(rng, z), views).unwrap()
}

/// `(I_theta(X^V; Z), P_theta(X^V))` of a decoder set.
fn model_information(theta: &DecoderSet) -> (f64, JointPmf) {
    let marginal = wyner_core::info::compose_joint(theta.prior_z(), &theta.decoders()).unwrap();
    let decoders = theta.decoders();
    let cond: f64 = (0..theta.z_card())
        .map(|z| theta.prior_z().mass()[z] * decoders.iter().map(|d| entropy(d.row(z))).sum::<f64>())
        .sum();
    (entropy(marginal.mass()) - cond, marginal)
}

#[test]
fn criterion_5_surrogate_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut smallest_gap, mut worst_tight) = (f64::INFINITY, 0.0f64);
    for _ in 0..INSTANCES {
        let (z, cards) = random_cards(&mut rng);
        let views = if rng.random::<bool>() { cards.to_vec() } else { vec![cards[0], cards[1], 2] };
        let joint = random_joint(&mut rng, &views);
        let theta = random_decoders(&mut rng, z, &views);
        let (mi, own) = model_information(&theta);
        smallest_gap = smallest_gap.min(surrogate_bound(&theta, &joint).unwrap() - mi);
        worst_tight = worst_tight.max((surrogate_bound(&theta, &own).unwrap() - mi).abs());
    }
    report(
        5,
        smallest_gap >= -1e-10 && worst_tight <= 1e-9,
        &format!(
            "{INSTANCES} full-support instances; smallest surrogate - I_theta {smallest_gap:.2e} nats, largest gap on the self-generated joint {worst_tight:.2e}"
        ),
    );
}

/// `|g - fd| / max(|g|, |fd|)` over the whole gradient vector, with central
/// differences at `h = 1e-6`.
fn fd_worst(value: impl Fn(&[f64]) -> f64, grad: &[f64], at: &[f64]) -> f64 {
    let h = 1e-6;
    let fd: Vec<f64> = (0..at.len())
        .map(|k| {
            let (mut up, mut down) = (at.to_vec(), at.to_vec());
            up[k] += h;
            down[k] -= h;
            (value(&up) - value(&down)) / (2.0 * h)
        })
        .collect();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = grad.iter().zip(&fd).map(|(a, b)| a - b).collect();
    norm(&diff) / norm(grad).max(norm(&fd))
}

#[test]
fn criterion_6_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = [0.0f64; 4];
    for k in 0..20 {
        let (z, cards) = random_cards(&mut rng);
        let joint = random_joint(&mut rng, &cards);
        let beta = 0.5 + 10.0 * rng.random::<f64>();
        let theta = DecoderSet::random(k, z, &cards).unwrap();
        for i in 0..2 {
            let g = variational_gradient(&theta, &joint, beta, i).unwrap();
            let others: Vec<Vec<f64>> = (0..2).map(|j| theta.view(j).values().to_vec()).collect();
            let value = |x: &[f64]| {
                let mut views = others.clone();
                views[i] = x.to_vec();
                let s: Vec<&[f64]> = views.iter().map(Vec::as_slice).collect();
                variational_value_raw(&joint, z, &s, beta).unwrap()
            };
            worst[0] = worst[0].max(fd_worst(value, &g, theta.view(i).values()));
        }

        let problem = TwoViewProblem::new(&joint, z).unwrap();
        let n = problem.active_dim();
        let gamma = 0.1 + 30.0 * rng.random::<f64>();
        let c = 1.0 + 200.0 * rng.random::<f64>();
        let point = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..n).map(|_| 0.05 + 5.0 * rng.random::<f64>()).collect() };
        let (p, q) = (point(&mut rng), point(&mut rng));
        let nu: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let mut g = vec![0.0; n];
        problem.f_grad(&p, gamma, &mut g);
        worst[1] = worst[1].max(fd_worst(|x| problem.f_value(x, gamma), &g, &p));
        problem.g_grad(&q, gamma, &mut g);
        worst[2] = worst[2].max(fd_worst(|x| problem.g_value(x, gamma), &g, &q));

        let coupling = |p: &[f64], q: &[f64]| -> f64 {
            p.iter().zip(q).zip(&nu).map(|((a, b), m)| m * (a - b) + 0.5 * c * (a - b) * (a - b)).sum()
        };
        let lc = |p: &[f64], q: &[f64]| problem.f_value(p, gamma) + problem.g_value(q, gamma) + coupling(p, q);
        problem.f_grad(&p, gamma, &mut g);
        let gp: Vec<f64> = (0..n).map(|i| g[i] + nu[i] + c * (p[i] - q[i])).collect();
        problem.g_grad(&q, gamma, &mut g);
        let gq: Vec<f64> = (0..n).map(|i| g[i] - nu[i] - c * (p[i] - q[i])).collect();
        worst[3] = worst[3].max(fd_worst(|x| lc(x, &q), &gp, &p)).max(fd_worst(|x| lc(&p, x), &gq, &q));
    }
    report(
        6,
        worst.iter().all(|&w| w <= 1e-5),
        &format!(
            "max relative error |g - fd| / max(|g|, |fd|) at h = 1e-6: variational {:.2e}, F {:.2e}, G {:.2e}, L_c {:.2e}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    );
}

#[test]
#[ignore = "full variational runs and the ADMM sweep"]
fn criterion_7_descent() {
    let joint = noise_free();
    let mut block_worst = f64::NEG_INFINITY;
    let mut blocks = 0;
    for seed in 0..2 {
        let run = solve_variational(&joint, &VariationalConfig { seed, ..VariationalConfig::default() }).unwrap();
        block_worst = block_worst.max(run.max_block_increase());
        blocks += run.block_values.len();
    }
    let solver_one = block_worst <= 1e-9;

    let tiny = JointPmf::new(vec![2, 2], vec![0.4, 0.1, 0.15, 0.35]).unwrap();
    let (mut tiny_viol, mut tiny_checked) = (0, 0);
    for seed in 0..3 {
        let config = AdmmConfig {
            gamma: 2.0,
            z_card: 2,
            seed,
            inner_max_iters: 10_000,
            inner_tol: 1e-15,
            max_iters: 2_000,
            ..AdmmConfig::default()
        };
        let d = solve_admm(&tiny, &config).unwrap().record.decrease.unwrap();
        tiny_viol += d.violations;
        tiny_checked += d.checked;
    }

    let s = admm_sweep();
    let (id, r) = best(&s.records).expect("a converged ADMM run");
    let d = r.decrease.unwrap();
    let (all_viol, all_checked) = s
        .records
        .iter()
        .filter_map(|(_, r)| r.decrease)
        .fold((0, 0), |(v, c), d| (v + d.violations, c + d.checked));
    info(7, &format!("whole c = 128 sweep: {all_viol} of {all_checked} ADMM iterations violate sufficient decrease"));
    report(
        7,
        solver_one && tiny_viol == 0 && d.violation_fraction() <= 0.01,
        &format!(
            "Solver I largest block increase {block_worst:.2e} over {blocks} block updates; tiny exact-inner ADMM \
             {tiny_viol} of {tiny_checked} iterations violate; c = 128 noise-free run {id} violates on {:.1}% of {} iterations",
            100.0 * d.violation_fraction(),
            d.checked
        ),
    );
}

/// Smallest eigenvalue of the central-difference Hessian of `f` at `x`.
fn min_hessian_eigenvalue(f: &impl Fn(&[f64]) -> f64, x: &[f64]) -> f64 {
    let (n, h) = (x.len(), 1e-4);
    let at = |i: usize, di: f64, j: usize, dj: f64| {
        let mut y = x.to_vec();
        y[i] += di;
        y[j] += dj;
        f(&y)
    };
    let m = DMatrix::from_fn(n, n, |i, j| {
        (at(i, h, j, h) - at(i, h, j, -h) - at(i, -h, j, h) + at(i, -h, j, -h)) / (4.0 * h * h)
    });
    SymmetricEigen::new(m).eigenvalues.min()
}

#[test]
fn criterion_8_weak_convexity_constants() {
    let entropy = |v: &[f64]| v.iter().map(|&t| (-t).exp() * t).sum::<f64>();
    let negentropy = |v: &[f64]| -entropy(v);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_bound = f64::NEG_INFINITY;
    let mut worst_tight = 0.0f64;
    for eps0 in [0.05, 0.25, 0.5, 1.0, 1.5, 1.9] {
        let half = weak_convexity_sigma_entropy(eps0).unwrap() / 2.0;
        for _ in 0..200 {
            let v: Vec<f64> = (0..4).map(|_| eps0 + (NEGLOG_CAP - eps0) * rng.random::<f64>().powi(3)).collect();
            worst_bound = worst_bound.max(-half - min_hessian_eigenvalue(&entropy, &v));
        }
        worst_tight = worst_tight.max((min_hessian_eigenvalue(&entropy, &[eps0; 4]) + half).abs());
    }
    let half = weak_convexity_sigma_negentropy() / 2.0;
    for _ in 0..1000 {
        let v: Vec<f64> = (0..4).map(|_| NEGLOG_CAP * rng.random::<f64>()).collect();
        worst_bound = worst_bound.max(-half - min_hessian_eigenvalue(&negentropy, &v));
    }
    worst_tight = worst_tight.max((min_hessian_eigenvalue(&negentropy, &[3.0; 4]) + half).abs());
    report(
        8,
        worst_bound <= 1e-6 && worst_tight <= 1e-6,
        &format!(
            "smallest Hessian eigenvalue never below -sigma/2 by more than {worst_bound:.2e}; attained within {worst_tight:.2e} at the extremal points"
        ),
    );
}

#[test]
#[ignore = "200 baseline runs plus the ADMM sweep"]
fn criterion_9_baseline_contrast() {
    let admm = admm_sweep();
    let base = sweep("baseline-noise-free", SolverConfig::Baseline(BaselineConfig::default()), gamma_grid(), 10, &noise_free());
    let mut csv = String::from("gamma,solver,runs,converged,at_wyner_point,best_residual_cmi,best_joint_mi\n");
    let grid = gamma_grid();
    for (solver, s) in [("admm", &admm), ("baseline", &base)] {
        for (g, &gamma) in grid.iter().enumerate() {
            let rows: Vec<&RunRecord> = s.records.iter().skip(g * 10).take(10).map(|(_, r)| r).collect();
            let b = rows
                .iter()
                .filter(|r| r.converged)
                .min_by(|a, b| a.metrics.residual_cmi.total_cmp(&b.metrics.residual_cmi));
            csv += &format!(
                "{gamma:.16e},{solver},{},{},{},{},{}\n",
                rows.len(),
                rows.iter().filter(|r| r.converged).count(),
                rows.iter().filter(|r| at_wyner_point(r)).count(),
                b.map(|r| format!("{:.16e}", r.metrics.residual_cmi)).unwrap_or_default(),
                b.map(|r| format!("{:.16e}", r.metrics.joint_mi)).unwrap_or_default(),
            );
        }
    }
    let out = work_dir("admm_vs_baseline.csv");
    write_text(&out, &csv).unwrap();
    let hits = |s: &SweepSummary| s.records.iter().filter(|(_, r)| at_wyner_point(r)).count();
    report(
        9,
        base.records.len() == grid.len() * 10 && base.plane_csv.exists(),
        &format!(
            "{} baseline records on the ADMM grid; Wyner-point runs: baseline {}, ADMM {}; comparison at {}",
            base.records.len(),
            hits(&base),
            hits(&admm),
            out.display()
        ),
    );
}
