use serde::Serialize;
use sha2::{Digest, Sha256};

/// Provenance block embedded in every emitted report. Only `wall_clock`
/// and `elapsed_ms` vary between reruns of the same command.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: Vec<String>,
    pub inputs: Vec<String>,
    pub seed: Option<u64>,
    /// SHA-256 of the canonical JSON of the run's configuration.
    pub config_digest: String,
    pub tool_version: String,
    pub wall_clock: String,
    pub elapsed_ms: f64,
}

impl RunManifest {
    pub fn new(command: &[String], inputs: Vec<String>, seed: Option<u64>, config: &impl Serialize) -> Self {
        let canonical = serde_json::to_vec(config).expect("config serializes");
        Self {
            command: command.to_vec(),
            inputs,
            seed,
            config_digest: hex::encode(Sha256::digest(&canonical)),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_clock: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            elapsed_ms: 0.0,
        }
    }
}

#[derive(Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub manifest: &'a RunManifest,
    pub report: &'a T,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_tracks_config() {
        let a = RunManifest::new(&[], vec![], Some(1), &("x", 1));
        let b = RunManifest::new(&[], vec![], Some(1), &("x", 1));
        let c = RunManifest::new(&[], vec![], Some(1), &("x", 2));
        assert_eq!(a.config_digest, b.config_digest);
        assert_ne!(a.config_digest, c.config_digest);
        assert_eq!(a.config_digest.len(), 64);
    }
}
