//! Bregman projections onto a hyperplane under several generators, and the
//! Kullback-Leibler projection onto the probability simplex's affine hull.

use sfp_core::divergences::BregmanGenerator;
use sfp_core::linalg::Vector;
use sfp_core::sets::ConstraintSet;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let x = Vector::from_row_slice(&[0.5, 2.0, 1.5]);
    let plane = ConstraintSet::hyperplane(Vector::from_element(3, 1.0), 1.0)?;
    let generators = [
        BregmanGenerator::squared_euclidean(),
        BregmanGenerator::negative_entropy(),
        BregmanGenerator::beta(4.0)?,
        BregmanGenerator::itakura_saito(),
    ];
    for g in &generators {
        let p = g.project(&plane, &x)?;
        println!(
            "{:<20} ({:.5}, {:.5}, {:.5})  D(p, x) = {:.5}",
            g.name(),
            p[0],
            p[1],
            p[2],
            g.divergence(&p, &x)?
        );
    }
    // KL projection onto Σxᵢ = 1 rescales: p = x / Σx
    let kl = BregmanGenerator::negative_entropy().project(&plane, &x)?;
    let scaled = &x / x.sum();
    println!("KL projection matches x / sum(x): {:.1e}", (kl - scaled).amax());
    Ok(())
}
