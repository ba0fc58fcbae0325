//! Lists every damage class of a robot with its partial one-hot encoding.
//!
//! `cargo run --example damage_classes -- [legs]`

use dappo::damage::{count_classes, DamageSpace, DAMAGE_TYPES};

fn main() -> dappo::Result<()> {
    let legs: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(4);
    let space = DamageSpace::for_limbs(legs);
    println!("{legs} legs, {DAMAGE_TYPES} damage types: {} classes", count_classes(legs, DAMAGE_TYPES));
    for class in space.classes() {
        let enc = space.encode(&class)?;
        let bits: Vec<String> = enc.0.chunks(2).map(|t| format!("{}{}", t[0], t[1])).collect();
        println!("{:<22} [{}]", class.to_string(), bits.join(" "));
        assert_eq!(space.decode(&enc)?, class);
    }
    Ok(())
}
