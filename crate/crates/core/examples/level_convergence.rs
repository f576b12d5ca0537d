//! Resolvents, semigroups and path expectations of levels 1 to 4 compared
//! with level 5, with and without drift.

use fractal_drift::convergence::ConvergenceLab;
use fractal_drift::drift::DriftSpec;
use fractal_drift::FractalModel;

fn main() -> fractal_drift::Result<()> {
    let model = FractalModel::sierpinski();
    let reference = 5;
    let diam = model.level(reference)?.network.resistance_diameter()?;
    let levels = [1, 2, 3, 4];
    for (name, spec) in [("no drift", DriftSpec::none()), ("drift", DriftSpec::default_admissible(&model, diam)?)] {
        let lab = ConvergenceLab::new(model.clone(), spec, reference, None)?;
        let top = model.level(reference)?;
        let f: Vec<f64> = top.complex.coordinates.as_ref().unwrap().iter().map(|p| p[0]).collect();
        let alpha = lab.constants.lambda + 1.0;
        println!("== {name}, alpha = {alpha:.4}, t = 0.1 ==");
        let res = lab.resolvent_convergence(alpha, &f, &levels)?;
        let semi = lab.semigroup_convergence(0.1, &f, &levels)?;
        let paths = lab.path_law_convergence(0.1, std::slice::from_ref(&f), &levels, 1, 4000, 21)?;
        println!("{:>5} {:>12} {:>12} {:>12}", "level", "resolvent", "semigroup", "E f(Y_t)");
        for (k, n) in levels.iter().enumerate() {
            let row = &paths.rows[k];
            println!(
                "{n:>5} {:>12.3e} {:>12.3e} {:>8.4}+-{:.4}",
                res.errors[k], semi.errors[k], row.mc_mean, row.standard_error
            );
        }
        println!("level-{reference} value of E f(Y_t): {:.4}\n", paths.rows[0].reference);
    }
    Ok(())
}
