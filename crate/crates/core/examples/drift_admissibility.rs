//! Smallness conditions and semi-Dirichlet checks for a drift along the
//! harmonic function with boundary values (1, 0, 0), at the default size and
//! at three times that size.

use fractal_drift::drift::{verify_sandwich, verify_sd_axioms, DriftSpec, FormAssembly, SmallnessReport, MARKOV_TOLERANCE};
use fractal_drift::FractalModel;

fn main() -> fractal_drift::Result<()> {
    let model = FractalModel::sierpinski();
    let level = model.level(3)?;
    let diam = level.network.resistance_diameter()?;
    let admissible = DriftSpec::default_admissible(&model, diam)?;

    for (name, spec) in [("default", admissible.clone()), ("tripled", admissible.scaled(3.0))] {
        let drift = spec.realize(&model, &level)?;
        let report = SmallnessReport::evaluate(&level, &drift, diam, None)?;
        println!("== {name} drift ==");
        println!(
            "Condition I: drift energy {:.6} vs 2/diam {:.6} (margin {:.6})",
            report.condition_i.drift_energy, report.condition_i.threshold, report.condition_i.margin
        );
        println!(
            "Condition II: max b^T G b {:.6} vs 1/diam {:.6}",
            report.condition_ii.max, report.condition_ii.threshold
        );
        println!("Condition III: {}", report.condition_iii.note);
        let Some(constants) = report.constants() else {
            println!("no admissible constants: {}\n", report.constants_error.unwrap_or_default());
            continue;
        };
        println!(
            "delta = {:.6}  s = {:.6}  t = {:.6}  lambda = {:.6}",
            constants.delta, constants.s, constants.t, constants.lambda
        );
        let assembly = FormAssembly::for_level(&level, &drift)?;
        let sandwich = verify_sandwich(&assembly, &constants, 500, 7);
        println!(
            "A_lambda / E_lambda in [{:.4}, {:.4}], required [{:.4}, {:.4}]: {}",
            sandwich.min_ratio,
            sandwich.max_ratio,
            1.0 - constants.s,
            1.0 + constants.s,
            sandwich.passed
        );
        let sd = verify_sd_axioms(&assembly, &level.network, &drift, &constants, diam, 500, 7, MARKOV_TOLERANCE)?;
        println!(
            "SD1 {}  SD3 {} (sector {:.4} <= {:.4})  SD4 {}  edge certificates min(1+2eta) = {:.4}\n",
            sd.sd1_passed, sd.sd3_passed, sd.sector_empirical, sd.sector_bound, sd.sd4_passed, sd.markov_certificate_min
        );
    }
    Ok(())
}
