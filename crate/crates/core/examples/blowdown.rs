//! Blow-down classification: the rank of the limit profile and the distance
//! of the rescalings `u_h(x) = u(√h x)/h` to it.

use soliton_forge::asymptotics::{classify_profile, ClassifyOptions};
use soliton_forge::reference::{bowl_profile, ReferenceProfile};

fn main() -> soliton_forge::Result<()> {
    let opts = ClassifyOptions::default();
    let cylinder = ReferenceProfile::eta(3, 2)?;
    let rep = classify_profile(&cylinder, &[1.0, 10.0, 100.0], &opts)?;
    println!("η_2 in R³: k = {:?}, errors {:?}", rep.k, rep.errors);

    let bowl = ReferenceProfile::bowl(bowl_profile(2, 200.0, 0.01)?);
    let hs = [1e2, 1e3, 1e4];
    let rep = classify_profile(&bowl, &hs, &opts)?;
    println!("bowl: k = {:?}", rep.k);
    for (h, e) in hs.iter().zip(&rep.errors) {
        println!("  h = {h:>6}: sup |u_h - η_2| on B_1 = {e:.4e}");
    }
    Ok(())
}
