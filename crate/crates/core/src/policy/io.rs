//! Versioned JSON policy files.
//!
//! ```json
//! {
//!   "format": "proxops-policy",
//!   "version": 1,
//!   "layer_dims": [6, 64, 64, 3],
//!   "hidden_activation": "tanh",
//!   "output_squash": "tanh",
//!   "weights": [[...], [...], [...]],   // per layer, row-major (out × in)
//!   "biases": [[...], [...], [...]],
//!   "log_std": [-0.5, -0.5, -0.5]
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mlp::{Linear, Mlp};
use super::MlpPolicy;
use crate::{Error, Result};

pub const POLICY_FORMAT: &str = "proxops-policy";
pub const POLICY_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct PolicyFile {
    format: String,
    version: u32,
    layer_dims: Vec<usize>,
    hidden_activation: String,
    output_squash: String,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    log_std: [f64; 3],
}

#[derive(Deserialize)]
struct VersionProbe {
    format: Option<String>,
    version: Option<u32>,
}

pub fn policy_to_json(policy: &MlpPolicy) -> String {
    let file = PolicyFile {
        format: POLICY_FORMAT.to_string(),
        version: POLICY_VERSION,
        layer_dims: policy.net.dims(),
        hidden_activation: "tanh".into(),
        output_squash: "tanh".into(),
        weights: policy.net.layers.iter().map(|l| l.weights.clone()).collect(),
        biases: policy.net.layers.iter().map(|l| l.bias.clone()).collect(),
        log_std: policy.log_std,
    };
    serde_json::to_string_pretty(&file).expect("policy serialises")
}

pub fn policy_from_json(text: &str) -> Result<MlpPolicy> {
    let probe: VersionProbe = serde_json::from_str(text).map_err(|e| Error::MalformedPolicy(e.to_string()))?;
    if probe.format.as_deref() != Some(POLICY_FORMAT) {
        return Err(Error::MalformedPolicy(format!("unexpected format tag {:?}", probe.format)));
    }
    match probe.version {
        Some(POLICY_VERSION) => {}
        Some(found) => return Err(Error::UnsupportedVersion { found, expected: POLICY_VERSION }),
        None => return Err(Error::MalformedPolicy("missing version".into())),
    }
    let file: PolicyFile = serde_json::from_str(text).map_err(|e| Error::MalformedPolicy(e.to_string()))?;
    if file.hidden_activation != "tanh" || file.output_squash != "tanh" {
        return Err(Error::MalformedPolicy("only tanh activations are supported".into()));
    }
    let dims = &file.layer_dims;
    if dims.len() < 2 || file.weights.len() != dims.len() - 1 || file.biases.len() != dims.len() - 1 {
        return Err(Error::MalformedPolicy("layer count does not match layer_dims".into()));
    }
    let mut layers = Vec::with_capacity(dims.len() - 1);
    for (k, (w, b)) in file.weights.into_iter().zip(file.biases).enumerate() {
        let (input, output) = (dims[k], dims[k + 1]);
        if w.len() != input * output || b.len() != output {
            return Err(Error::MalformedPolicy(format!("layer {k} has wrong parameter count")));
        }
        if !w.iter().chain(&b).all(|v| v.is_finite()) {
            return Err(Error::MalformedPolicy(format!("layer {k} has non-finite parameters")));
        }
        layers.push(Linear { input, output, weights: w, bias: b });
    }
    MlpPolicy::new(Mlp { layers }, file.log_std).map_err(|e| Error::MalformedPolicy(e.to_string()))
}

pub fn save_policy(policy: &MlpPolicy, path: &Path) -> Result<()> {
    std::fs::write(path, policy_to_json(policy))?;
    Ok(())
}

pub fn load_policy(path: &Path) -> Result<MlpPolicy> {
    policy_from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::DEFAULT_HIDDEN;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_policy() -> MlpPolicy {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut p = MlpPolicy::random(&DEFAULT_HIDDEN, -0.7, &mut rng);
        p.net = Mlp::random(&p.net.dims(), 1.0, &mut rng);
        p
    }

    #[test]
    fn round_trip_preserves_outputs() {
        let p = sample_policy();
        let back = policy_from_json(&policy_to_json(&p)).unwrap();
        assert_eq!(back, p);
        let obs = [0.1, -0.2, 0.3, 1.0, -0.5, 0.25];
        assert_eq!(back.mean(&obs), p.mean(&obs));
    }

    #[test]
    fn truncated_file_is_rejected() {
        let text = policy_to_json(&sample_policy());
        let cut = &text[..text.len() / 2];
        assert!(matches!(policy_from_json(cut), Err(Error::MalformedPolicy(_))));
    }

    #[test]
    fn version_mismatch_is_explicit() {
        let text = policy_to_json(&sample_policy()).replace("\"version\": 1", "\"version\": 7");
        assert!(matches!(policy_from_json(&text), Err(Error::UnsupportedVersion { found: 7, expected: 1 })));
    }

    #[test]
    fn wrong_shapes_are_rejected() {
        let text = policy_to_json(&sample_policy()).replacen("[\n    6,", "[\n    5,", 1);
        assert!(policy_from_json(&text).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("policy.json");
        let p = sample_policy();
        save_policy(&p, &path).unwrap();
        assert_eq!(load_policy(&path).unwrap(), p);
    }
}
