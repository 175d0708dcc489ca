//! Regenerates the shipped coefficient files:
//! `cargo run --release -p multitreat --example freeze_coefficients -- <dir>`.

use std::path::PathBuf;

use multitreat::coefficients::format_scenario;
use multitreat::scenarios;

fn main() -> anyhow::Result<()> {
    let dir: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "crates/multitreat/data/coefficients".into()).into();
    std::fs::create_dir_all(&dir)?;
    for cfg in scenarios::all_configs(0) {
        let s = scenarios::freeze(&cfg)?;
        let path = dir.join(format!("{}.txt", s.name));
        std::fs::write(&path, format_scenario(&s))?;
        println!("{} risks {:?}", path.display(), s.truth.risks);
    }
    Ok(())
}
