//! Builds a family of non-rotational level-set solutions of prescribed depth
//! and aspect and writes it to a directory (first argument, default
//! `family_out`).

use soliton_forge::construction::{build_family, member_distance, ShootingMode, ShootingTolerances};

fn main() -> soliton_forge::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "family_out".into());
    let family = build_family(2, 2.0, &[2.0, 3.0, 4.0], ShootingMode::LevelSet, &ShootingTolerances::default())?;
    println!("K,r,t,depth,aspect");
    for e in &family.entries {
        let s = &e.shooting;
        println!("{},{:.4},{:.4},{:.4},{:.4}", e.k, s.r, s.t, s.depth, s.aspect);
    }
    for pair in family.entries.windows(2) {
        let d = member_distance(&pair[0].w, &pair[1].w, 1.0)?;
        println!("sup |w_{} - w_{}| on B_1 = {d:.4}", pair[0].k, pair[1].k);
    }
    let manifest = family.save(&dir)?;
    println!("{} members written to {dir}", manifest.entries.len());
    Ok(())
}
