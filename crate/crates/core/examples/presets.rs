//! Lists the shipped hyperparameter presets and prints one as a config file.
//!
//! cargo run --example presets -- [name]

use kbembed::config::{preset, preset_names, render_config};

fn main() -> kbembed::Result<()> {
    let names = preset_names();
    for chunk in names.chunks(4) {
        println!(
            "{}",
            chunk.iter().map(|n| format!("{n:<28}")).collect::<String>()
        );
    }
    let name = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "umls-trigram-soft".into());
    println!("\n# {name}");
    print!("{}", render_config(&preset(&name)?));
    Ok(())
}
