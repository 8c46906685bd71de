//! Minimal stderr logging selected by the KPCM_LOG environment variable
//! (off/info/debug; default off).

use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Level {
    Off,
    Info,
    Debug,
}

fn threshold() -> Level {
    static LEVEL: OnceLock<Level> = OnceLock::new();
    *LEVEL.get_or_init(|| match std::env::var("KPCM_LOG").as_deref() {
        Ok("info") => Level::Info,
        Ok("debug") => Level::Debug,
        _ => Level::Off,
    })
}

pub fn log(level: Level, msg: &str) {
    if level <= threshold() && threshold() != Level::Off {
        eprintln!("[kpcm] {msg}");
    }
}
