//! Regenerates the shipped fixtures under `models/`.

use stasmc::avmodel::{av_source, r16_source, requirements_source, AvConfig};

fn main() {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "models".into());
    let files = [
        ("av.sta", av_source(&AvConfig::default())),
        ("av_unrefined.sta", av_source(&AvConfig::unrefined())),
        ("requirements.q", requirements_source(&AvConfig::default())),
        ("r16.q", r16_source()),
    ];
    for (name, text) in files {
        std::fs::write(format!("{dir}/{name}"), text).unwrap();
    }
}
