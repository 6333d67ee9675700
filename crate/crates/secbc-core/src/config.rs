//! Flat key-value run configuration for the CLI.
//!
//! One `key = value` pair per line; `#` starts a comment. Unknown keys are
//! rejected with their line number. Keys:
//!
//! ```text
//! scheme     = honest | dishonest | dis
//! n          = 200,200              message packets per receiver
//! delta      = 0.5,0.5              independent erasure probabilities
//! joint      = table.txt            joint model: 2^K probabilities, one per
//!                                   line, indexed by reception mask
//! script     = trace.txt            scripted model: one state per line as
//!                                   comma-separated one-based receivers,
//!                                   "-" for a fully erased slot
//! m          = 8                    field exponent (GF(2^m))
//! packet_len = 16                   symbols per packet
//! trials     = 100
//! seed       = 42
//! strategies = honest,always-deny
//! audit      = 2/1/others-known     observers/target/conditioning, receivers
//!                                   one-based, '+'-joined; repeatable
//! epsilon    = 0.05
//! out        = stats.csv
//! key_len    = 1,1                  honest-scheme parameter override
//! n1         = 3                    (all three required together; mandatory
//! phase2_cap = 100                  for scripted models)
//! ```
//!
//! Exactly one of `delta`, `joint`, `script` must be present.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use crate::audit::Conditioning;
use crate::channel::{ChannelState, ErasureModel};
use crate::harness::{AuditSpec, Scheme, TrialConfig};
use crate::protocols::params::HonestParams;
use crate::protocols::{AckStrategy, MessageSpec};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{file}:{line}: {message}")]
pub struct ConfigError {
    pub file: String,
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub trial: TrialConfig,
    pub out: Option<PathBuf>,
}

fn err(file: &str, line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError { file: file.to_string(), line, message: message.into() }
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(|p| p.trim().parse::<T>().map_err(|e| format!("bad value {:?}: {e}", p.trim())))
        .collect()
}

/// `observers/target/conditioning` with one-based receiver numbers.
fn parse_audit(s: &str, k: usize) -> Result<AuditSpec, String> {
    let parts: Vec<&str> = s.split('/').collect();
    if parts.len() != 3 {
        return Err(format!("expected observers/target/conditioning, got {s:?}"));
    }
    let mut mask = 0u32;
    for obs in parts[0].split('+') {
        let r: usize = obs.trim().parse().map_err(|e| format!("bad observer {obs:?}: {e}"))?;
        if r == 0 || r > k {
            return Err(format!("observer {r} outside 1..={k}"));
        }
        mask |= 1 << (r - 1);
    }
    let target: usize = parts[1].trim().parse().map_err(|e| format!("bad target: {e}"))?;
    if target == 0 || target > k {
        return Err(format!("target {target} outside 1..={k}"));
    }
    let conditioning = Conditioning::parse(parts[2].trim())?;
    Ok(AuditSpec { observer_mask: mask, target: target - 1, conditioning })
}

/// Joint model file: one probability per line, indexed by reception mask.
pub fn parse_joint_table(text: &str, k: usize, file: &str) -> Result<ErasureModel, ConfigError> {
    let mut prob = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let p: f64 = line.parse().map_err(|e| err(file, i + 1, format!("bad probability: {e}")))?;
        prob.push(p);
    }
    if prob.len() != 1 << k {
        return Err(err(file, 0, format!("need {} probabilities, got {}", 1 << k, prob.len())));
    }
    ErasureModel::joint(k, prob).map_err(|e| err(file, 0, e.to_string()))
}

/// Scripted model file: one state per line, comma-separated one-based
/// receivers, `-` for no reception.
pub fn parse_script(text: &str, k: usize, file: &str) -> Result<ErasureModel, ConfigError> {
    let mut states = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let mut state = ChannelState::empty();
        if line != "-" {
            for part in line.split(',') {
                let r: usize = part
                    .trim()
                    .parse()
                    .map_err(|e| err(file, i + 1, format!("bad receiver {:?}: {e}", part.trim())))?;
                if r == 0 || r > k {
                    return Err(err(file, i + 1, format!("receiver {r} outside 1..={k}")));
                }
                state.insert(r - 1);
            }
        }
        states.push(state);
    }
    Ok(ErasureModel::scripted(k, states))
}

/// Reads referenced model files relative to `dir`.
pub fn parse_config(text: &str, dir: &Path, file: &str) -> Result<RunConfig, ConfigError> {
    let mut pairs: Vec<(usize, String, String)> = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(err(file, i + 1, format!("expected key = value, got {line:?}")));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key != "audit" && !seen.insert(key.clone()) {
            return Err(err(file, i + 1, format!("duplicate key {key:?}")));
        }
        pairs.push((i + 1, key, value));
    }

    let known = [
        "scheme", "n", "delta", "joint", "script", "m", "packet_len", "trials", "seed",
        "strategies", "audit", "epsilon", "out", "key_len", "n1", "phase2_cap",
    ];
    for (line, key, _) in &pairs {
        if !known.contains(&key.as_str()) {
            return Err(err(file, *line, format!("unknown key {key:?}")));
        }
    }
    let get = |key: &str| pairs.iter().find(|(_, k, _)| k == key).map(|(l, _, v)| (*l, v.as_str()));
    let require = |key: &str| {
        get(key).ok_or_else(|| err(file, 0, format!("missing required key {key:?}")))
    };

    let (line, v) = require("scheme")?;
    let scheme = Scheme::parse(v).map_err(|e| err(file, line, e))?;
    let (line, v) = require("n")?;
    let n_packets: Vec<usize> = parse_list(v).map_err(|e| err(file, line, e))?;
    if n_packets.is_empty() {
        return Err(err(file, line, "need at least one receiver"));
    }
    let k = n_packets.len();

    let model = match (get("delta"), get("joint"), get("script")) {
        (Some((line, v)), None, None) => {
            let delta: Vec<f64> = parse_list(v).map_err(|e| err(file, line, e))?;
            if delta.len() != k {
                return Err(err(file, line, format!("{} deltas for {k} receivers", delta.len())));
            }
            ErasureModel::independent(delta).map_err(|e| err(file, line, e.to_string()))?
        }
        (None, Some((line, v)), None) => {
            let path = dir.join(v);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| err(file, line, format!("cannot read {}: {e}", path.display())))?;
            parse_joint_table(&text, k, v)?
        }
        (None, None, Some((line, v))) => {
            let path = dir.join(v);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| err(file, line, format!("cannot read {}: {e}", path.display())))?;
            parse_script(&text, k, v)?
        }
        _ => {
            return Err(err(file, 0, "exactly one of delta, joint, script must be set"));
        }
    };

    let mut spec = MessageSpec::new(n_packets);
    if let Some((line, v)) = get("m") {
        spec.field_m = v.parse().map_err(|e| err(file, line, format!("bad m: {e}")))?;
    }
    if let Some((line, v)) = get("packet_len") {
        let len: usize = v.parse().map_err(|e| err(file, line, format!("bad packet_len: {e}")))?;
        if len == 0 {
            return Err(err(file, line, "packet_len must be positive"));
        }
        spec.packet_len = len;
    }

    let mut config = TrialConfig::new(scheme, spec, model);
    if let Some((line, v)) = get("trials") {
        config.trials = v.parse().map_err(|e| err(file, line, format!("bad trials: {e}")))?;
        if config.trials == 0 {
            return Err(err(file, line, "trials must be at least 1"));
        }
    }
    if let Some((line, v)) = get("seed") {
        config.seed = v.parse().map_err(|e| err(file, line, format!("bad seed: {e}")))?;
    }
    if let Some((line, v)) = get("epsilon") {
        config.epsilon = v.parse().map_err(|e| err(file, line, format!("bad epsilon: {e}")))?;
    }
    if let Some((line, v)) = get("strategies") {
        let strategies: Result<Vec<AckStrategy>, String> =
            v.split(',').map(|s| AckStrategy::parse(s.trim())).collect();
        config.strategies = strategies.map_err(|e| err(file, line, e))?;
        if config.strategies.len() != k {
            return Err(err(
                file,
                line,
                format!("{} strategies for {k} receivers", config.strategies.len()),
            ));
        }
    }
    for (line, key, v) in &pairs {
        if key == "audit" {
            config.audits.push(parse_audit(v, k).map_err(|e| err(file, *line, e))?);
        }
    }

    let overrides = [get("key_len"), get("n1"), get("phase2_cap")];
    if overrides.iter().any(|o| o.is_some()) {
        let [Some((kl_line, kl)), Some((n1_line, n1)), Some((cap_line, cap))] = overrides else {
            return Err(err(file, 0, "key_len, n1, phase2_cap must be set together"));
        };
        let key_len: Vec<usize> = parse_list(kl).map_err(|e| err(file, kl_line, e))?;
        if key_len.len() != k {
            return Err(err(file, kl_line, format!("{} key lengths for {k} receivers", key_len.len())));
        }
        config.honest_override = Some(HonestParams {
            key_len,
            n1: n1.parse().map_err(|e| err(file, n1_line, format!("bad n1: {e}")))?,
            phase2_cap: cap.parse().map_err(|e| err(file, cap_line, format!("bad phase2_cap: {e}")))?,
        });
    }

    let out = get("out").map(|(_, v)| dir.join(v));
    Ok(RunConfig { trial: config, out })
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path)
        .map_err(|e| err(&name, 0, format!("cannot read configuration: {e}")))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, dir, &name)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        parse_config(text, Path::new("."), "test.cfg")
    }

    #[test]
    fn minimal_independent_config() {
        let c = parse("scheme = honest\nn = 100,100\ndelta = 0.5,0.5\n").unwrap();
        assert_eq!(c.trial.scheme, Scheme::Honest);
        assert_eq!(c.trial.spec.n_packets, vec![100, 100]);
        assert_eq!(c.trial.trials, 1);
        assert!(c.out.is_none());
    }

    #[test]
    fn full_config_round_trip() {
        let text = "\
# comment
scheme = dishonest
n = 50,50
delta = 0.5, 0.5
m = 8
packet_len = 4
trials = 7
seed = 99
strategies = honest, always-deny
audit = 2/1/others-known
audit = 1+2/1/none
epsilon = 0.01
out = results.csv
";
        let c = parse(text).unwrap();
        assert_eq!(c.trial.trials, 7);
        assert_eq!(c.trial.seed, 99);
        assert_eq!(c.trial.strategies[1], AckStrategy::AlwaysDeny);
        assert_eq!(c.trial.audits.len(), 2);
        assert_eq!(c.trial.audits[0].observer_mask, 0b10);
        assert_eq!(c.trial.audits[0].target, 0);
        assert_eq!(c.trial.audits[1].observer_mask, 0b11);
        assert_eq!(c.out.unwrap(), PathBuf::from("./results.csv"));
    }

    #[test]
    fn unknown_key_rejected_with_line() {
        let e = parse("scheme = honest\nn = 10,10\ndelta = 0.5,0.5\nbogus = 1\n").unwrap_err();
        assert_eq!(e.line, 4);
        assert!(e.message.contains("bogus"), "{}", e.message);
    }

    #[test]
    fn model_choice_is_exclusive() {
        let e = parse("scheme = honest\nn = 10,10\ndelta = 0.5,0.5\nscript = s.txt\n").unwrap_err();
        assert!(e.message.contains("exactly one"), "{}", e.message);
        let e = parse("scheme = honest\nn = 10,10\n").unwrap_err();
        assert!(e.message.contains("exactly one"), "{}", e.message);
    }

    #[test]
    fn bad_probability_rejected() {
        let e = parse("scheme = honest\nn = 10,10\ndelta = 0.5,1.5\n").unwrap_err();
        assert_eq!(e.line, 3);
    }

    #[test]
    fn zero_trials_rejected() {
        let e = parse("scheme = honest\nn = 10,10\ndelta = 0.5,0.5\ntrials = 0\n").unwrap_err();
        assert!(e.message.contains("trials"), "{}", e.message);
    }

    #[test]
    fn script_file_parses_states() {
        let m = parse_script("1\n1,2\n-\n2 # comment\n", 2, "s.txt").unwrap();
        let ErasureModel::Scripted { states, .. } = m else { panic!("not scripted") };
        assert_eq!(states.len(), 4);
        assert_eq!(states[0], ChannelState::from_indices(&[0]));
        assert_eq!(states[1], ChannelState::from_indices(&[0, 1]));
        assert!(states[2].is_empty());
        assert_eq!(states[3], ChannelState::from_indices(&[1]));
    }

    #[test]
    fn script_bad_receiver_reports_line() {
        let e = parse_script("1\n3\n", 2, "s.txt").unwrap_err();
        assert_eq!(e.line, 2);
        assert_eq!(e.file, "s.txt");
    }

    #[test]
    fn joint_table_needs_full_mask_range() {
        let e = parse_joint_table("0.25\n0.25\n0.5\n", 2, "j.txt").unwrap_err();
        assert!(e.message.contains("need 4"), "{}", e.message);
        let m = parse_joint_table("0.25\n0.25\n0.25\n0.25\n", 2, "j.txt").unwrap();
        assert!(matches!(m, ErasureModel::Joint { .. }));
    }

    #[test]
    fn honest_override_needs_all_three_keys() {
        let e = parse("scheme = honest\nn = 1,2\ndelta = 0.5,0.5\nn1 = 3\n").unwrap_err();
        assert!(e.message.contains("together"), "{}", e.message);
        let c = parse(
            "scheme = honest\nn = 1,2\ndelta = 0.5,0.5\nkey_len = 1,1\nn1 = 3\nphase2_cap = 100\n",
        )
        .unwrap();
        let p = c.trial.honest_override.unwrap();
        assert_eq!(p.key_len, vec![1, 1]);
        assert_eq!(p.n1, 3);
        assert_eq!(p.phase2_cap, 100);
    }
}
