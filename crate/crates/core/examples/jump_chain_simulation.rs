//! Simulates the level-2 jump process with drift and compares the empirical
//! law at a fixed time with the exact distribution from the semigroup.

use fractal_drift::drift::DriftSpec;
use fractal_drift::generator::{build_generator, empirical_law, point_mass, simulate_many};
use fractal_drift::spectral::Semigroup;
use fractal_drift::FractalModel;

fn main() -> fractal_drift::Result<()> {
    let model = FractalModel::sierpinski();
    let level = model.level(2)?;
    let spec = DriftSpec::default_admissible(&model, level.network.resistance_diameter()?)?;
    let drift = spec.realize(&model, &level)?;
    let gen = build_generator(&level.network, &drift, &level.measure)?;
    println!("detailed balance violation: {:e}", gen.detailed_balance_violation());

    let chain = gen.jump_parameters()?;
    let start = 1;
    println!("rate at p_2: {}  kernel row: {:?}", chain.rates()[start], chain.kernel_row(start));

    let (t, paths, seed) = (0.05, 20_000, 11);
    let dim = level.vertex_count();
    let trajectories = simulate_many(&chain, &point_mass(dim, start), t, seed, paths)?;
    let law = empirical_law(&trajectories, t, dim)?;

    // P(Y_t = y) = (T_t 1_y)(start)
    let sg = Semigroup::new(&gen)?;
    println!("{:>6} {:>10} {:>10} {:>10}", "vertex", "empirical", "exact", "3 SE");
    for y in 0..dim {
        let mut indicator = vec![0.0; dim];
        indicator[y] = 1.0;
        let exact = sg.apply(t, &indicator)?.values[start];
        let se = (exact * (1.0 - exact) / paths as f64).sqrt();
        println!("{y:>6} {:>10.5} {exact:>10.5} {:>10.5}", law[y], 3.0 * se);
    }
    let jumps: usize = trajectories.iter().map(|tr| tr.states.len() - 1).sum();
    println!("mean number of jumps by t = {t}: {:.2}", jumps as f64 / paths as f64);
    Ok(())
}
