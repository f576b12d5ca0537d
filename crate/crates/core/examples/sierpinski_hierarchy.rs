//! Builds the first levels of the Sierpiński gasket and prints the graph data:
//! vertex and edge counts, the level conductance and the measure weights.

use fractal_drift::FractalModel;

fn main() -> fractal_drift::Result<()> {
    let model = FractalModel::sierpinski();
    println!("compatibility defect |Tr(E^1|V_0) - E^0| = {:e}", model.compatibility_defect()?);
    println!("{:>5} {:>8} {:>8} {:>8} {:>12} {:>14} {:>14}", "level", "|V_n|", "edges", "cells", "c_n", "mu(V_0 point)", "mu(junction)");
    for n in 0..=5 {
        let level = model.level(n)?;
        let (x, y) = level.complex.edges[0];
        let junction = level.measure.get(3).copied().unwrap_or(f64::NAN);
        println!(
            "{:>5} {:>8} {:>8} {:>8} {:>12.6} {:>14.6e} {:>14.6e}",
            n,
            level.vertex_count(),
            level.complex.edges.len(),
            level.complex.cells.len(),
            level.network.conductance(x, y)?,
            level.measure[0],
            junction,
        );
    }

    let level = model.level(1)?;
    println!("\nlevel 1 vertices:");
    for x in level.complex.vertices() {
        let p = level.complex.coordinate(x).expect("the gasket is embedded");
        let cells: Vec<String> = level
            .complex
            .cells_containing(x)?
            .iter()
            .map(|c| format!("{:?}", c.word))
            .collect();
        println!("  {x}: ({:.4}, {:.4}) in cells {}", p[0], p[1], cells.join(" "));
    }
    Ok(())
}
