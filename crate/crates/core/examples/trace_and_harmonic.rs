//! Traces, harmonic extension and effective resistance on the gasket.

use fractal_drift::FractalModel;

fn main() -> fractal_drift::Result<()> {
    let model = FractalModel::sierpinski();
    let fine = model.level(3)?;
    let coarse = model.level(1)?;

    // tracing level 3 onto V_1 gives back the level-1 network
    let ids: Vec<usize> = coarse.complex.vertices().collect();
    let traced = fine.network.trace(&ids)?;
    let worst = coarse
        .network
        .edges()
        .map(|(i, j, c)| (traced.conductance(i, j).unwrap() - c).abs())
        .fold(0.0, f64::max);
    println!("max |Tr(E^3|V_1) - E^1| over edges: {worst:e}");

    // harmonic extension of boundary values (1, 0, 0)
    let h = fine.network.harmonic_extension(&[(0, 1.0), (1, 0.0), (2, 0.0)])?;
    println!("h on the new level-1 vertices: {:?}", &h[3..6]);
    println!("E^3(h) = {:.12}  E^0(h|V_0) = {:.12}", fine.network.quadratic_energy(&h)?, model.level(0)?.network.quadratic_energy(&h[..3])?);

    for n in 0..=4 {
        let level = model.level(n)?;
        println!(
            "level {n}: R(p_1, p_2) = {:.12}  resistance diameter = {:.12}",
            level.network.effective_resistance(0, 1)?,
            level.network.resistance_diameter()?
        );
    }
    Ok(())
}
