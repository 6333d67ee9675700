//! Monte Carlo runner: batches of independent trials over per-trial RNG
//! substreams, with secrecy audits folded into order-independent statistics.

use rayon::prelude::*;

use crate::audit::{leak_audit, Conditioning, LeakAudit};
use crate::channel::{ErasureModel, RngSeed};
use crate::protocols::params::{dis_params, dishonest_params, honest_params, HonestParams};
use crate::protocols::{
    run_dis, run_dishonest, run_honest, AckStrategy, MessageSpec, ProtocolError, Transcript,
    TrialReport,
};
use crate::regions::{
    correlated_outer_bound, in_dis_region, in_dishonest_region, in_secure_region, RateTuple,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Honest,
    Dishonest,
    Dis,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Honest => "honest",
            Scheme::Dishonest => "dishonest",
            Scheme::Dis => "dis",
        }
    }

    pub fn parse(s: &str) -> Result<Scheme, String> {
        match s {
            "honest" => Ok(Scheme::Honest),
            "dishonest" => Ok(Scheme::Dishonest),
            "dis" => Ok(Scheme::Dis),
            other => Err(format!("unknown scheme {other:?}")),
        }
    }
}

/// One secrecy audit to run on every trial's transcript.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AuditSpec {
    pub observer_mask: u32,
    pub target: usize,
    pub conditioning: Conditioning,
}

#[derive(Debug, Clone)]
pub struct TrialConfig {
    pub scheme: Scheme,
    pub spec: MessageSpec,
    pub model: ErasureModel,
    pub strategies: Vec<AckStrategy>,
    pub trials: usize,
    pub seed: u64,
    pub audits: Vec<AuditSpec>,
    /// Reporting target for the residual error probability; not enforced.
    pub epsilon: f64,
    /// Explicit honest-scheme parameters; required for scripted models, which
    /// expose no statistics to derive them from.
    pub honest_override: Option<HonestParams>,
}

impl TrialConfig {
    /// Honest receivers, no audits: the common starting point.
    pub fn new(scheme: Scheme, spec: MessageSpec, model: ErasureModel) -> Self {
        let k = spec.k();
        TrialConfig {
            scheme,
            spec,
            model,
            strategies: vec![AckStrategy::Honest; k],
            trials: 1,
            seed: 0,
            audits: Vec::new(),
            epsilon: 0.05,
            honest_override: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configured {got} strategies for {want} receivers")]
    StrategyCount { got: usize, want: usize },
    #[error("trial count must be at least 1")]
    ZeroTrials,
    #[error("scheme {scheme} supports exactly 2 receivers, got {k}")]
    ReceiverCount { scheme: &'static str, k: usize },
    #[error("scheme {scheme} needs an independent erasure model to derive parameters")]
    NeedsIndependentModel { scheme: &'static str },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

/// Per-audit aggregate over a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditStats {
    pub spec: AuditSpec,
    pub mean_leaked: f64,
    pub max_leaked: usize,
    /// Fraction of trials with exactly zero leaked dimensions.
    pub zero_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub trials: usize,
    pub k: usize,
    /// Fraction of trials where receiver j failed to decode.
    pub error_rate: Vec<f64>,
    /// 95% normal-approximation half-width of the error rate.
    pub error_half_width: Vec<f64>,
    pub verdict_rate: Vec<f64>,
    pub mean_tx: f64,
    /// N_j / mean transmissions used.
    pub achieved_rate: Vec<f64>,
    pub mean_keys_generated: Vec<f64>,
    pub mean_keys_consumed: Vec<f64>,
    pub audits: Vec<AuditStats>,
}

/// One trial plus its audits; exposed so the CLI can dump the transcript.
pub struct TrialOutcome {
    pub transcript: Transcript,
    pub report: TrialReport,
    pub audits: Vec<LeakAudit>,
}

fn validate(config: &TrialConfig) -> Result<(), HarnessError> {
    let k = config.spec.k();
    if config.strategies.len() != k {
        return Err(HarnessError::StrategyCount { got: config.strategies.len(), want: k });
    }
    if config.trials == 0 {
        return Err(HarnessError::ZeroTrials);
    }
    if config.scheme != Scheme::Honest && k != 2 {
        return Err(HarnessError::ReceiverCount { scheme: config.scheme.name(), k });
    }
    Ok(())
}

fn independent_deltas(config: &TrialConfig) -> Result<(f64, f64), HarnessError> {
    match &config.model {
        ErasureModel::Independent { delta } if delta.len() == 2 => Ok((delta[0], delta[1])),
        _ => Err(HarnessError::NeedsIndependentModel { scheme: config.scheme.name() }),
    }
}

/// Run trial `index` of the batch on its own RNG substream.
pub fn run_trial(config: &TrialConfig, index: usize) -> Result<TrialOutcome, HarnessError> {
    validate(config)?;
    let seed = RngSeed { seed: config.seed, stream: index as u64 };
    let (transcript, mut report) = match config.scheme {
        Scheme::Honest => {
            let params = match &config.honest_override {
                Some(p) => p.clone(),
                None => honest_params(&config.spec.n_packets, &config.model)
                    .map_err(ProtocolError::from)?,
            };
            run_honest(&config.spec, &config.model, &params, seed)?
        }
        Scheme::Dishonest => {
            let (d1, d2) = independent_deltas(config)?;
            let params =
                dishonest_params(config.spec.n_packets[0], config.spec.n_packets[1], d1, d2)
                    .map_err(ProtocolError::from)?;
            let strategies = [config.strategies[0], config.strategies[1]];
            run_dishonest(&config.spec, &config.model, &params, strategies, seed)?
        }
        Scheme::Dis => {
            let (d1, d2) = independent_deltas(config)?;
            let params = dis_params(config.spec.n_packets[0], config.spec.n_packets[1], d1, d2)
                .map_err(ProtocolError::from)?;
            let strategies = [config.strategies[0], config.strategies[1]];
            run_dis(&config.spec, &config.model, &params, strategies, seed)?
        }
    };
    let field = transcript.field();
    // Audits run even when the protocol declared an error: secrecy must hold
    // on failure paths too.
    let audits: Vec<LeakAudit> = config
        .audits
        .iter()
        .map(|a| leak_audit(&field, &transcript, a.observer_mask, a.target, a.conditioning))
        .collect();
    report.leaked_dims = audits.iter().map(|a| Some(a.leaked)).collect();
    Ok(TrialOutcome { transcript, report, audits })
}

/// Running batch totals; an associative, order-independent merge so trials
/// can be aggregated as they finish instead of being kept in memory.
#[derive(Debug, Clone)]
struct Accumulator {
    count: usize,
    tx_total: usize,
    errors: Vec<usize>,
    verdicts: Vec<usize>,
    keys_gen: Vec<usize>,
    keys_used: Vec<usize>,
    leaked_sum: Vec<usize>,
    leaked_max: Vec<usize>,
    leaked_zero: Vec<usize>,
}

impl Accumulator {
    fn new(k: usize, audits: usize) -> Self {
        Accumulator {
            count: 0,
            tx_total: 0,
            errors: vec![0; k],
            verdicts: vec![0; k],
            keys_gen: vec![0; k],
            keys_used: vec![0; k],
            leaked_sum: vec![0; audits],
            leaked_max: vec![0; audits],
            leaked_zero: vec![0; audits],
        }
    }

    fn add(mut self, o: &TrialOutcome) -> Self {
        self.count += 1;
        self.tx_total += o.report.total_tx();
        for j in 0..self.errors.len() {
            self.errors[j] += !o.report.decoded[j] as usize;
            self.verdicts[j] += o.report.dishonest[j] as usize;
            self.keys_gen[j] += o.report.keys_generated[j];
            self.keys_used[j] += o.report.keys_consumed[j];
        }
        for (i, a) in o.audits.iter().enumerate() {
            self.leaked_sum[i] += a.leaked;
            self.leaked_max[i] = self.leaked_max[i].max(a.leaked);
            self.leaked_zero[i] += (a.leaked == 0) as usize;
        }
        self
    }

    fn merge(mut self, other: Accumulator) -> Self {
        self.count += other.count;
        self.tx_total += other.tx_total;
        for j in 0..self.errors.len() {
            self.errors[j] += other.errors[j];
            self.verdicts[j] += other.verdicts[j];
            self.keys_gen[j] += other.keys_gen[j];
            self.keys_used[j] += other.keys_used[j];
        }
        for i in 0..self.leaked_sum.len() {
            self.leaked_sum[i] += other.leaked_sum[i];
            self.leaked_max[i] = self.leaked_max[i].max(other.leaked_max[i]);
            self.leaked_zero[i] += other.leaked_zero[i];
        }
        self
    }
}

pub fn run_trials(config: &TrialConfig) -> Result<BatchStats, HarnessError> {
    validate(config)?;
    let k = config.spec.k();
    let fresh = || Accumulator::new(k, config.audits.len());
    let acc = (0..config.trials)
        .into_par_iter()
        .try_fold(fresh, |acc, i| run_trial(config, i).map(|o| acc.add(&o)))
        .try_reduce(fresh, |a, b| Ok(a.merge(b)))?;
    Ok(finish(config, acc))
}

fn finish(config: &TrialConfig, acc: Accumulator) -> BatchStats {
    let k = config.spec.k();
    let count = acc.count;
    let n = count as f64;
    let Accumulator {
        tx_total, errors, verdicts, keys_gen, keys_used, leaked_sum, leaked_max, leaked_zero, ..
    } = acc;
    let mean_tx = tx_total as f64 / n;
    let rate = |c: usize| c as f64 / n;
    let half = |c: usize| {
        let p = rate(c);
        1.96 * (p * (1.0 - p) / n).sqrt()
    };
    BatchStats {
        trials: count,
        k,
        error_rate: errors.iter().map(|&c| rate(c)).collect(),
        error_half_width: errors.iter().map(|&c| half(c)).collect(),
        verdict_rate: verdicts.iter().map(|&c| rate(c)).collect(),
        mean_tx,
        achieved_rate: config.spec.n_packets.iter().map(|&nj| nj as f64 / mean_tx).collect(),
        mean_keys_generated: keys_gen.iter().map(|&c| c as f64 / n).collect(),
        mean_keys_consumed: keys_used.iter().map(|&c| c as f64 / n).collect(),
        audits: config
            .audits
            .iter()
            .enumerate()
            .map(|(i, &spec)| AuditStats {
                spec,
                mean_leaked: leaked_sum[i] as f64 / n,
                max_leaked: leaked_max[i],
                zero_rate: rate(leaked_zero[i]),
            })
            .collect(),
    }
}

/// Analytic boundary value (LHS of the binding region inequality) for the
/// achieved rate tuple; NaN when the model exposes no statistics.
pub fn boundary_value(config: &TrialConfig, achieved: &[f64]) -> f64 {
    let rates = match RateTuple::new(achieved.to_vec()) {
        Ok(r) => r,
        Err(_) => return f64::NAN,
    };
    match (&config.scheme, &config.model) {
        (Scheme::Honest, ErasureModel::Independent { delta }) => {
            in_secure_region(&rates, delta).map(|v| v.value).unwrap_or(f64::NAN)
        }
        (Scheme::Honest, m) => correlated_outer_bound(&rates, m).map(|v| v.value).unwrap_or(f64::NAN),
        (Scheme::Dishonest, ErasureModel::Independent { delta }) if delta.len() == 2 => {
            in_dishonest_region(achieved[0], achieved[1], delta[0], delta[1])
                .map(|v| v.value)
                .unwrap_or(f64::NAN)
        }
        (Scheme::Dis, ErasureModel::Independent { delta }) if delta.len() == 2 => {
            in_dis_region(achieved[0], achieved[1], delta[0], delta[1])
                .map(|v| v.value)
                .unwrap_or(f64::NAN)
        }
        _ => f64::NAN,
    }
}

/// One grid point of a sweep: the fields of the base config it overrides.
#[derive(Debug, Clone)]
pub struct GridPoint {
    pub n_packets: Option<Vec<usize>>,
    pub model: Option<ErasureModel>,
    pub strategies: Option<Vec<AckStrategy>>,
}

impl GridPoint {
    /// The base config unchanged; a single-row sweep.
    pub fn identity() -> Self {
        GridPoint { n_packets: None, model: None, strategies: None }
    }

    pub fn n(n_packets: Vec<usize>) -> Self {
        GridPoint { n_packets: Some(n_packets), model: None, strategies: None }
    }

    pub fn deltas(delta: Vec<f64>) -> Self {
        GridPoint {
            n_packets: None,
            model: ErasureModel::independent(delta).ok(),
            strategies: None,
        }
    }

    pub fn strategies(s: Vec<AckStrategy>) -> Self {
        GridPoint { n_packets: None, model: None, strategies: Some(s) }
    }

    fn apply(&self, base: &TrialConfig) -> TrialConfig {
        let mut c = base.clone();
        if let Some(n) = &self.n_packets {
            c.spec = MessageSpec::new(n.clone());
        }
        if let Some(m) = &self.model {
            c.model = m.clone();
        }
        if let Some(s) = &self.strategies {
            c.strategies = s.clone();
        }
        c
    }
}

pub const SWEEP_CSV_HEADER: &str = "scheme,n_packets,deltas,strategies,trials,mean_tx,\
achieved_rates,error_rates,verdict_rates,mean_leaked,boundary_value";

fn join<T: std::fmt::Display>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

/// One CSV row per grid point, with the analytic boundary value of the
/// achieved rate tuple attached for empirical-vs-analytic comparison.
pub fn sweep(base: &TrialConfig, grid: &[GridPoint]) -> Result<String, HarnessError> {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for point in grid {
        let config = point.apply(base);
        let stats = run_trials(&config)?;
        let deltas = match &config.model {
            ErasureModel::Independent { delta } => join(delta.iter()),
            ErasureModel::Joint { .. } => "joint".to_string(),
            ErasureModel::Scripted { .. } => "scripted".to_string(),
        };
        let boundary = boundary_value(&config, &stats.achieved_rate);
        out.push_str(&format!(
            "{},{},{},{},{},{:.3},{},{},{},{},{:.6}\n",
            config.scheme.name(),
            join(config.spec.n_packets.iter()),
            deltas,
            join(config.strategies.iter().map(|s| s.name())),
            stats.trials,
            stats.mean_tx,
            join(stats.achieved_rate.iter().map(|r| format!("{r:.6}"))),
            join(stats.error_rate.iter().map(|r| format!("{r:.4}"))),
            join(stats.verdict_rate.iter().map(|r| format!("{r:.4}"))),
            join(stats.audits.iter().map(|a| format!("{:.4}", a.mean_leaked))),
            boundary,
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelState;

    fn table_one_model() -> ErasureModel {
        // The worked-example script: who receives each of the 8 slots.
        let s = |ix: &[usize]| ChannelState::from_indices(ix);
        ErasureModel::scripted(
            2,
            vec![
                s(&[0]),
                s(&[0, 1]),
                s(&[1]),
                s(&[1]),
                s(&[1]),
                s(&[]),
                s(&[0]),
                s(&[0, 1]),
            ],
        )
    }

    fn spec(n: &[usize]) -> MessageSpec {
        MessageSpec::new(n.to_vec())
    }

    #[test]
    fn single_scripted_trial_matches_its_report() {
        let mut config =
            TrialConfig::new(Scheme::Honest, spec(&[1, 2]), table_one_model());
        config.honest_override =
            Some(HonestParams { key_len: vec![1, 1], n1: 3, phase2_cap: 100 });
        config.audits = vec![
            AuditSpec { observer_mask: 0b10, target: 0, conditioning: Conditioning::OthersKnown },
        ];
        let stats = run_trials(&config).unwrap();
        let single = run_trial(&config, 0).unwrap();
        assert_eq!(stats.trials, 1);
        assert_eq!(stats.error_rate, vec![0.0, 0.0]);
        assert_eq!(stats.mean_tx, single.report.total_tx() as f64);
        assert_eq!(stats.audits[0].max_leaked, single.audits[0].leaked);
        assert_eq!(stats.audits[0].max_leaked, 0);
    }

    #[test]
    fn same_seed_same_stats() {
        let model = ErasureModel::independent(vec![0.5, 0.5]).unwrap();
        let mut config = TrialConfig::new(Scheme::Honest, spec(&[20, 20]), model);
        config.trials = 20;
        config.seed = 7;
        let a = run_trials(&config).unwrap();
        let b = run_trials(&config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn honest_batch_decodes_and_stays_secret() {
        let model = ErasureModel::independent(vec![0.5, 0.5]).unwrap();
        let mut config = TrialConfig::new(Scheme::Honest, spec(&[40, 40]), model);
        config.trials = 40;
        config.seed = 3;
        config.audits = vec![
            AuditSpec { observer_mask: 0b10, target: 0, conditioning: Conditioning::OthersKnown },
            AuditSpec { observer_mask: 0b01, target: 1, conditioning: Conditioning::OthersKnown },
        ];
        let stats = run_trials(&config).unwrap();
        for j in 0..2 {
            assert!(stats.error_rate[j] <= 0.05, "error rate {}", stats.error_rate[j]);
            assert_eq!(stats.audits[j].max_leaked, 0);
            assert!(stats.achieved_rate[j] > 0.0);
        }
    }

    #[test]
    fn achieved_rate_below_broadcast_capacity() {
        let model = ErasureModel::independent(vec![0.5, 0.5]).unwrap();
        let mut config = TrialConfig::new(Scheme::Honest, spec(&[60, 60]), model);
        config.trials = 20;
        config.seed = 5;
        let stats = run_trials(&config).unwrap();
        let rates = RateTuple::new(stats.achieved_rate.clone()).unwrap();
        let v = crate::regions::in_nonsecure_region(&rates, &[0.5, 0.5]).unwrap();
        assert!(v.inside, "achieved rate exceeds the broadcast bound: {}", v.value);
    }

    #[test]
    fn key_phase_only_j_frequency_matches_model() {
        let model = ErasureModel::independent(vec![0.5, 0.5]).unwrap();
        let mut config = TrialConfig::new(Scheme::Honest, spec(&[30, 30]), model);
        config.trials = 30;
        config.seed = 9;
        let mut only = [0usize; 2];
        let mut slots = 0usize;
        for i in 0..config.trials {
            let o = run_trial(&config, i).unwrap();
            for rec in &o.transcript.records {
                if rec.phase != crate::protocols::Phase::KeyGen {
                    continue;
                }
                slots += 1;
                for j in 0..2 {
                    if rec.state.count() == 1 && rec.state.contains(j) {
                        only[j] += 1;
                    }
                }
            }
        }
        // p_j = 0.25; three standard errors of the batch frequency.
        let n = slots as f64;
        let tol = 3.0 * (0.25 * 0.75 / n).sqrt();
        for j in 0..2 {
            let freq = only[j] as f64 / n;
            assert!((freq - 0.25).abs() < tol, "only-{j} frequency {freq}");
        }
    }

    #[test]
    fn dishonest_battery_smoke() {
        let model = ErasureModel::independent(vec![0.5, 0.5]).unwrap();
        let mut config = TrialConfig::new(Scheme::Dishonest, spec(&[30, 30]), model);
        config.trials = 10;
        config.seed = 21;
        config.strategies = vec![AckStrategy::Honest, AckStrategy::AlwaysDeny];
        config.audits = vec![
            AuditSpec { observer_mask: 0b10, target: 0, conditioning: Conditioning::OthersKnown },
        ];
        let stats = run_trials(&config).unwrap();
        assert!(stats.error_rate[0] <= 0.2, "Bob error rate {}", stats.error_rate[0]);
        assert_eq!(stats.audits[0].max_leaked, 0);
        assert!(stats.verdict_rate[1] > 0.5, "Calvin convicted in {}", stats.verdict_rate[1]);
    }

    #[test]
    fn empty_sweep_is_header_only() {
        let model = ErasureModel::independent(vec![0.5, 0.5]).unwrap();
        let config = TrialConfig::new(Scheme::Honest, spec(&[10, 10]), model);
        let csv = sweep(&config, &[]).unwrap();
        assert_eq!(csv, format!("{SWEEP_CSV_HEADER}\n"));
    }

    #[test]
    fn sweep_emits_one_row_per_point() {
        let model = ErasureModel::independent(vec![0.5, 0.5]).unwrap();
        let mut config = TrialConfig::new(Scheme::Honest, spec(&[10, 10]), model);
        config.trials = 5;
        let grid = [GridPoint::n(vec![10, 10]), GridPoint::n(vec![20, 20])];
        let csv = sweep(&config, &grid).unwrap();
        let lines: Vec<&str> = csv.trim_end().lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("honest,10;10,0.5;0.5,"));
    }

    #[test]
    fn strategy_count_checked() {
        let model = ErasureModel::independent(vec![0.5, 0.5]).unwrap();
        let mut config = TrialConfig::new(Scheme::Honest, spec(&[10, 10]), model);
        config.strategies.pop();
        assert!(matches!(
            run_trials(&config),
            Err(HarnessError::StrategyCount { got: 1, want: 2 })
        ));
    }
}
