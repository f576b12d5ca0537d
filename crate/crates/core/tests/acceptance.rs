//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any fails.

use std::time::{Duration, Instant};

use fractal_drift::convergence::{mean_and_se, ConvergenceLab};
use fractal_drift::drift::{
    verify_sandwich, verify_sd_axioms, DriftSpec, FormAssembly, LevelDrift, SmallnessReport, MARKOV_TOLERANCE,
};
use fractal_drift::generator::{build_generator, point_mass, sample_states, GeneratorMatrix};
use fractal_drift::spectral::{markov_check, Resolvent, Semigroup};
use fractal_drift::{FractalModel, Level};

struct Outcome {
    passed: bool,
    detail: String,
}

fn criterion(number: usize, title: &str, budget: Duration, body: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = body();
    let elapsed = start.elapsed();
    let in_budget = elapsed <= budget;
    let passed = outcome.passed && in_budget;
    println!(
        "{} criterion {number}: {title} | {} | {:.2}s (budget {}s{})",
        if passed { "PASS" } else { "FAIL" },
        outcome.detail,
        elapsed.as_secs_f64(),
        budget.as_secs(),
        if in_budget { "" } else { ", exceeded" },
    );
    passed
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn x_coordinate(level: &Level) -> Vec<f64> {
    level.complex.coordinates.as_ref().unwrap().iter().map(|p| p[0]).collect()
}

/// One drift term along the harmonic function with boundary values (1, 0, 0),
/// with constant coefficient at half the Condition II threshold.
fn admissible_drift(model: &FractalModel) -> DriftSpec {
    DriftSpec::default_admissible(model, 2.0 / 3.0).unwrap()
}

fn drifted_generator(model: &FractalModel, spec: &DriftSpec, n: usize) -> (Level, LevelDrift, GeneratorMatrix) {
    let level = model.level(n).unwrap();
    let drift = spec.realize(model, &level).unwrap();
    let gen = build_generator(&level.network, &drift, &level.measure).unwrap();
    (level, drift, gen)
}

/// Floating-point "exact": a few units in the last place.
const EXACT: f64 = 1e-13;

fn golden_constants() -> Outcome {
    let model = FractalModel::sierpinski();
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for n in 0..=6 {
        let level = model.level(n).unwrap();
        let c = (5.0f64 / 3.0).powi(n as i32);
        let corner_mass = (1.0f64 / 3.0).powi(n as i32 + 1);
        let rate = 6.0 * 5.0f64.powi(n as i32);
        for (_, _, cxy) in level.network.edges() {
            worst = worst.max(rel(cxy, c));
        }
        for x in level.complex.vertices() {
            let expected = if x < 3 { corner_mass } else { 2.0 * corner_mass };
            worst = worst.max(rel(level.measure[x], expected));
        }
        let chain = build_generator(&level.network, &LevelDrift::none(n), &level.measure)
            .unwrap()
            .jump_parameters()
            .unwrap();
        for x in level.complex.vertices() {
            worst = worst.max(rel(chain.rates()[x], rate));
            if n > 0 {
                let p = if x < 3 { 0.5 } else { 0.25 };
                for (_, q) in chain.kernel_row(x) {
                    worst = worst.max(rel(q, p));
                }
            }
        }
        if worst > EXACT {
            failures.push(n);
        }
    }
    Outcome {
        passed: failures.is_empty(),
        detail: format!("levels 0..=6, max relative deviation {worst:.1e} (tolerance {EXACT:.0e}), failing levels {failures:?}"),
    }
}

fn trace_tower() -> Outcome {
    let model = FractalModel::sierpinski();
    let mut worst = 0.0f64;
    for n in 0..=5 {
        let coarse = model.level(n).unwrap();
        let fine = model.level(n + 1).unwrap();
        let ids: Vec<usize> = coarse.complex.vertices().collect();
        let traced = fine.network.trace(&ids).unwrap();
        let diff = (traced.laplacian() - coarse.network.laplacian()).abs().max();
        worst = worst.max(diff);
    }
    Outcome {
        passed: worst <= 1e-10,
        detail: format!("n = 0..=5, max entrywise |Tr(E^(n+1)|V_n) - E^n| = {worst:.2e} (tolerance 1e-10)"),
    }
}

fn harmonic_rule() -> Outcome {
    let level = FractalModel::sierpinski().level(1).unwrap();
    let h = level.network.harmonic_extension(&[(0, 1.0), (1, 0.0), (2, 0.0)]).unwrap();
    // the new vertex opposite p_1 lies on the segment p_2 p_3
    let coords = level.complex.coordinates.as_ref().unwrap();
    let mut worst = 0.0f64;
    for x in 3..6 {
        let expected = if coords[x][1].abs() < 1e-12 { 0.2 } else { 0.4 };
        worst = worst.max((h[x] - expected).abs());
    }
    Outcome {
        passed: worst <= 1e-12,
        detail: format!("midpoint values {:?}, max error {worst:.1e} (tolerance 1e-12)", &h[3..6]),
    }
}

fn semi_dirichlet_suite() -> Outcome {
    let model = FractalModel::sierpinski();
    let spec = admissible_drift(&model);
    let mut lines = Vec::new();
    let mut ok = true;
    for n in 0..=5 {
        let level = model.level(n).unwrap();
        let diam = level.network.resistance_diameter().unwrap();
        let drift = spec.realize(&model, &level).unwrap();
        let report = SmallnessReport::evaluate(&level, &drift, diam, None).unwrap();
        let Some(constants) = report.constants() else {
            ok = false;
            lines.push(format!("n={n}: no constants"));
            continue;
        };
        let assembly = FormAssembly::for_level(&level, &drift).unwrap();
        let sandwich = verify_sandwich(&assembly, &constants, 1000, 2024 + n as u64);
        let sd = verify_sd_axioms(
            &assembly,
            &level.network,
            &drift,
            &constants,
            diam,
            1000,
            4048 + n as u64,
            MARKOV_TOLERANCE,
        )
        .unwrap();
        let level_ok = report.condition_i.satisfied
            && report.condition_ii.satisfied
            && sandwich.passed
            && sd.sd1_passed
            && sd.sd3_passed
            && sd.sd4_passed
            && sd.certificates_passed;
        ok &= level_ok;
        lines.push(format!(
            "n={n}: ratio [{:.4},{:.4}] sd4min {:.1e} min(1+eta) {:.3} min(1+2eta) {:.3}{}",
            sandwich.min_ratio,
            sandwich.max_ratio,
            sd.sd4_min,
            sd.rate_certificate_min,
            sd.markov_certificate_min,
            if level_ok { "" } else { " FAILED" }
        ));
    }
    Outcome {
        passed: ok,
        detail: format!("1000 draws per level; {}", lines.join("; ")),
    }
}

fn identities() -> Outcome {
    let model = FractalModel::sierpinski();
    let spec = admissible_drift(&model);
    let (mut g1, mut rid, mut t1, mut sgp, mut dual) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for n in 0..=4 {
        let (level, drift, gen) = drifted_generator(&model, &spec, n);
        let dim = level.vertex_count();
        let one = vec![1.0; dim];
        let f = x_coordinate(&level);
        for alpha in [0.5, 4.0, 25.0] {
            let u = Resolvent::new(&gen, alpha).unwrap().apply(&one).unwrap().values;
            g1 = g1.max(u.iter().map(|v| (v - 1.0 / alpha).abs()).fold(0.0, f64::max));
        }
        let (a, b) = (4.0, 9.0);
        let ra = Resolvent::new(&gen, a).unwrap();
        let rb = Resolvent::new(&gen, b).unwrap();
        let ua = ra.apply(&f).unwrap().values;
        let ub = rb.apply(&f).unwrap().values;
        let lhs: Vec<f64> = ua.iter().zip(&ub).map(|(x, y)| x - y).collect();
        let rhs: Vec<f64> = ra.apply(&ub).unwrap().values.iter().map(|v| (b - a) * v).collect();
        rid = rid.max(sup(&lhs, &rhs));

        let sg = Semigroup::new(&gen).unwrap();
        for t in [0.01, 0.1, 1.0] {
            t1 = t1.max(sg.apply(t, &one).unwrap().values.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max));
        }
        let direct = sg.apply(0.07, &f).unwrap().values;
        let composed = sg.apply(0.03, &sg.apply(0.04, &f).unwrap().values).unwrap().values;
        sgp = sgp.max(sup(&direct, &composed));

        // (−L e_x, e_y)_μ against A(e_x, e_y) for every pair of basis vectors
        let assembly = FormAssembly::for_level(&level, &drift).unwrap();
        let l = gen.to_dense();
        let a_matrix = assembly.form_matrix();
        for x in 0..dim {
            for y in 0..dim {
                // form(e_x, e_y) = e_yᵀ M e_x and (−L e_x, e_y)_μ = −μ(y) L(y, x)
                let d = (-level.measure[y] * l[(y, x)] - a_matrix[(y, x)]).abs();
                dual = dual.max(d);
            }
        }
        let mut ex = vec![0.0; dim];
        ex[dim - 1] = 1.0;
        dual = dual.max((gen.dual_form(&ex, &f) - assembly.form(&ex, &f)).abs());
        let _ = drift;
    }
    let passed = g1 <= 1e-10 && rid <= 1e-9 && t1 <= 1e-10 && sgp <= 1e-9 && dual <= 1e-10;
    Outcome {
        passed,
        detail: format!(
            "n = 0..=4: |G_a 1 - 1/a| {g1:.1e} (1e-10), resolvent identity {rid:.1e} (1e-9), |T_t 1 - 1| {t1:.1e} (1e-10), semigroup property {sgp:.1e} (1e-9), duality on basis pairs {dual:.1e} (1e-10)"
        ),
    }
}

fn convergence_trends() -> Outcome {
    let model = FractalModel::sierpinski();
    let spec = admissible_drift(&model);
    let reference = 6;
    let lab = ConvergenceLab::new(model.clone(), spec, reference, None).unwrap();
    let f = x_coordinate(&model.level(reference).unwrap());
    let levels = [1, 2, 3, 4, 5];
    let alpha = lab.constants.lambda + 1.0;
    let res = lab.resolvent_convergence(alpha, &f, &levels).unwrap();
    let semi = lab.semigroup_convergence(0.1, &f, &levels).unwrap();
    let decreasing = |e: &[f64]| e.windows(2).all(|w| w[1] < w[0]);
    let rr = res.final_to_initial().unwrap();
    let sr = semi.final_to_initial().unwrap();
    let passed = rr <= 0.1 && sr <= 0.1 && decreasing(&res.errors) && decreasing(&semi.errors);
    let show = |e: &[f64]| e.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>().join(" ");
    Outcome {
        passed,
        detail: format!(
            "M = 6, alpha = lambda + 1 = {alpha:.4}, t = 0.1, f = x; resolvent gaps [{}] final/initial {rr:.2e}; semigroup gaps [{}] final/initial {sr:.2e} (threshold 0.1)",
            show(&res.errors),
            show(&semi.errors),
        ),
    }
}

fn test_functions(level: &Level) -> Vec<(&'static str, Vec<f64>)> {
    let coords = level.complex.coordinates.as_ref().unwrap();
    vec![
        ("x", coords.iter().map(|p| p[0]).collect()),
        ("y", coords.iter().map(|p| p[1]).collect()),
        ("(x-1/2)^2+y^2", coords.iter().map(|p| (p[0] - 0.5).powi(2) + p[1] * p[1]).collect()),
    ]
}

fn monte_carlo_coherence() -> Outcome {
    let model = FractalModel::sierpinski();
    let spec = admissible_drift(&model);
    let times = [0.01, 0.1];
    let paths = 100_000;
    let start = 1;
    let mut comparisons = 0;
    let mut within = 0;
    let mut worst_z = 0.0f64;
    let mut markov_ok = true;
    let mut balance = f64::INFINITY;
    for n in 1..=3 {
        let (level, _, gen) = drifted_generator(&model, &spec, n);
        balance = balance.min(gen.detailed_balance_violation());
        let chain = gen.jump_parameters().unwrap();
        let states = sample_states(&chain, &point_mass(level.vertex_count(), start), &times, 7000 + n as u64, paths).unwrap();
        let sg = Semigroup::new(&gen).unwrap();
        for (k, &t) in times.iter().enumerate() {
            markov_ok &= markov_check(&gen, t, 16, 11, 1e-10).unwrap().passed;
            for (_, f) in test_functions(&level) {
                let exact = sg.apply(t, &f).unwrap().values[start];
                let (mean, se) = mean_and_se(states.iter().map(|s| f[s[k]]));
                let z = (mean - exact).abs() / se;
                worst_z = worst_z.max(z);
                comparisons += 1;
                within += usize::from(z <= 3.0);
            }
        }
    }
    Outcome {
        passed: within == comparisons && balance > 0.0 && markov_ok,
        detail: format!(
            "levels 1..=3, 1e5 paths from p_2, 3 test functions, t in {{0.01, 0.1}}: {within}/{comparisons} within 3 SE (max |z| {worst_z:.2}); min detailed-balance violation {balance:.3e} > 0; Markov checks {}",
            if markov_ok { "pass" } else { "fail" }
        ),
    }
}

fn stabilization() -> Outcome {
    let model = FractalModel::sierpinski();
    let spec = admissible_drift(&model);
    let t = 0.1;
    let start = 1;
    let paths = 100_000;
    let reference = 6;
    let (top, _, top_gen) = drifted_generator(&model, &spec, reference);
    let f_top = x_coordinate(&top);
    let exact_ref = Semigroup::new(&top_gen).unwrap().apply(t, &f_top).unwrap().values[start];
    let mut estimates = Vec::new();
    for n in 1..=4 {
        let (level, _, gen) = drifted_generator(&model, &spec, n);
        let f = &f_top[..level.vertex_count()];
        let chain = gen.jump_parameters().unwrap();
        let states = sample_states(&chain, &point_mass(level.vertex_count(), start), &[t], 9000 + n as u64, paths).unwrap();
        estimates.push((n, mean_and_se(states.iter().map(|s| f[s[0]]))));
    }
    // first level from which every consecutive difference is within 3 combined SE
    let agrees = |a: &(usize, (f64, f64)), b: &(usize, (f64, f64))| {
        (a.1 .0 - b.1 .0).abs() <= 3.0 * (a.1 .1.powi(2) + b.1 .1.powi(2)).sqrt()
    };
    let mut stable_from = None;
    for i in (0..estimates.len() - 1).rev() {
        if agrees(&estimates[i], &estimates[i + 1]) {
            stable_from = Some(estimates[i].0);
        } else {
            break;
        }
    }
    let (_, (last_mean, last_se)) = *estimates.last().unwrap();
    let near_reference = (last_mean - exact_ref).abs() <= 3.0 * last_se;
    Outcome {
        passed: stable_from.is_some() && near_reference,
        detail: format!(
            "E[x(Y_n(0.1))] from p_2 with 1e5 paths: {}; consecutive levels agree within 3 SE from level {:?}; level-6 exact value {exact_ref:.5}, level 4 within 3 SE: {near_reference}. Surrogate only: Skorokhod J1 convergence of paths is not tested",
            estimates.iter().map(|(n, (m, s))| format!("n={n} {m:.5}+-{s:.5}")).collect::<Vec<_>>().join(", "),
            stable_from,
        ),
    }
}

fn main() {
    let secs = Duration::from_secs;
    let results = [
        criterion(1, "gasket golden constants", secs(5), golden_constants),
        criterion(2, "trace tower", secs(30), trace_tower),
        criterion(3, "harmonic 1/5-2/5 rule", secs(5), harmonic_rule),
        criterion(4, "semi-Dirichlet suite", secs(120), semi_dirichlet_suite),
        criterion(5, "resolvent and semigroup identities", secs(60), identities),
        criterion(6, "convergence trends", secs(300), convergence_trends),
        criterion(7, "Monte Carlo coherence", secs(300), monte_carlo_coherence),
        criterion(8, "fixed-time stabilization across levels", secs(300), stabilization),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
