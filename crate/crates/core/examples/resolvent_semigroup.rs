//! Resolvent and semigroup of a drifted generator, with the identities that
//! tie them together checked numerically.

use fractal_drift::drift::{DriftSpec, SmallnessReport};
use fractal_drift::generator::build_generator;
use fractal_drift::spectral::{contraction_growth_check, markov_check, Resolvent, Semigroup};
use fractal_drift::FractalModel;

fn sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn main() -> fractal_drift::Result<()> {
    let model = FractalModel::sierpinski();
    let level = model.level(3)?;
    let diam = level.network.resistance_diameter()?;
    let drift = DriftSpec::default_admissible(&model, diam)?.realize(&model, &level)?;
    let lambda = SmallnessReport::evaluate(&level, &drift, diam, None)?.lambda.expect("admissible drift");
    let gen = build_generator(&level.network, &drift, &level.measure)?;
    let f: Vec<f64> = level.complex.coordinates.as_ref().unwrap().iter().map(|p| p[0]).collect();

    let (alpha, beta) = (lambda + 1.0, lambda + 3.0);
    let ra = Resolvent::new(&gen, alpha)?;
    let rb = Resolvent::new(&gen, beta)?;
    let u = ra.apply(&f)?;
    println!("alpha = {alpha:.4}  residual of (alpha - L)u = f: {:e}", u.residual);
    // R_a - R_b = (b - a) R_a R_b
    let lhs: Vec<f64> = u.values.iter().zip(&rb.apply(&f)?.values).map(|(x, y)| x - y).collect();
    let rhs: Vec<f64> = ra.apply(&rb.apply(&f)?.values)?.values.iter().map(|v| (beta - alpha) * v).collect();
    println!("resolvent identity defect: {:e}", sup(&lhs, &rhs));
    let sup_f = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let sup_u = u.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    println!("sup |alpha R_alpha f| = {:.6} <= sup |f| = {:.6}", alpha * sup_u, sup_f);

    let sg = Semigroup::new(&gen)?;
    let (s, t) = (0.02, 0.03);
    let direct = sg.apply(s + t, &f)?.values;
    let composed = sg.apply(s, &sg.apply(t, &f)?.values)?.values;
    println!("T_(s+t) f vs T_s T_t f: {:e}", sup(&direct, &composed));
    for t in [0.01, 0.1, 1.0] {
        let m = markov_check(&gen, t, 10, 3, 1e-10)?;
        println!("t = {t}: T_t f for 0 <= f <= 1 stays in [{:.3e}, {:.6}]", m.min_value, m.max_value);
    }
    let growth = contraction_growth_check(&gen, lambda, &[0.01, 0.1], 5)?;
    for p in &growth.points {
        println!("||T_t|| at t = {}: {:.6} <= e^(lambda t) = {:.6}", p.t, p.norm_estimate, p.bound);
    }
    Ok(())
}
