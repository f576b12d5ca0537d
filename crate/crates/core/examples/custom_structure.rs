//! Loads a structure from a TOML file (the unit interval), where the level-n
//! process is a random walk on the dyadic points and everything can be
//! compared with closed forms.

use std::path::Path;

use fractal_drift::config::StructureConfig;
use fractal_drift::generator::build_generator;
use fractal_drift::drift::LevelDrift;

fn main() -> fractal_drift::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data/interval.toml");
    let config = StructureConfig::load(&path)?;
    let model = config.model()?;
    println!("density of V_* assumed: {}", config.density_assumed);
    for n in 0..=4 {
        let level = model.level(n)?;
        let gen = build_generator(&level.network, &LevelDrift::none(n), &level.measure)?;
        println!(
            "level {n}: {} vertices, R(0, 1) = {:.6}, rate at an interior point = {}",
            level.vertex_count(),
            level.network.effective_resistance(0, 1)?,
            gen.jump_parameters()?.rates().get(2).copied().unwrap_or(f64::NAN)
        );
    }
    // harmonic functions on the interval are linear
    let level = model.level(3)?;
    let h = level.network.harmonic_extension(&[(0, 0.0), (1, 1.0)])?;
    let coords = level.complex.coordinates.as_ref().unwrap();
    let worst = h.iter().zip(coords).map(|(v, p)| (v - p[0]).abs()).fold(0.0, f64::max);
    println!("max |h(x) - x| on level 3: {worst:e}");
    Ok(())
}
