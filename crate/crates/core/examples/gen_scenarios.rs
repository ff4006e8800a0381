//! Writes the preset scenarios to `scenarios/` at the workspace root.

use std::fs;
use std::path::PathBuf;

use nild_core::scenario::synth;

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    fs::create_dir_all(&dir)?;
    let presets = [
        ("four_dc.json", synth::geo_config(4)),
        ("eight_dc.json", synth::geo_config(8)),
        ("sixteen_dc.json", synth::geo_config(16)),
        ("tiny.json", synth::tiny()),
        ("no_extras.json", synth::no_extras()),
        ("infeasible_epoch13.json", synth::infeasible_at_epoch(13)),
    ];
    for (name, s) in presets {
        fs::write(dir.join(name), s.to_json() + "\n")?;
        println!("wrote {name}");
    }
    Ok(())
}
