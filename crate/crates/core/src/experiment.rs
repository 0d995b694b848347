//! Simulated user study: synthetic users enter catalog patterns, traces are
//! analyzed and every requested decision mode is scored.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::decide::{self, CandidateSet, CellResult, LabeledStrokeSample, MetricsReport, Mode, ModelBundle, Observation, StrokeSample};
use crate::decide::strategy::{GroupTables, Strategy};
use crate::patterns::{PatternCatalog, UnlockPattern};
use crate::pipeline::Analyzer;
use crate::sim::{self, PatternTiming, Point2};
use crate::{Error, Mic, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub users: usize,
    pub reps: usize,
    /// Separate users whose traces train the classifiers.
    pub train_users: usize,
    pub train_reps: usize,
    /// Range of per-user base finger speed, mm/s.
    pub speed_min: f64,
    pub speed_max: f64,
    /// Relative per-stroke speed jitter (uniform, +/-).
    pub speed_jitter: f64,
    /// Mean pause at each inflection point, s.
    pub pause: f64,
    /// Pause jitter (uniform, +/-), s.
    pub pause_jitter: f64,
    pub lead_in: f64,
    /// Standard deviation of each endpoint's offset from its grid point, mm.
    pub endpoint_jitter: f64,
    /// Pattern ids to enter; empty means the whole catalog.
    pub patterns: Vec<u32>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            users: 10,
            reps: 5,
            train_users: 5,
            train_reps: 3,
            speed_min: 180.0,
            speed_max: 320.0,
            speed_jitter: 0.15,
            pause: 0.8,
            pause_jitter: 0.15,
            lead_in: 0.5,
            endpoint_jitter: 2.0,
            patterns: Vec::new(),
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.users > 0
            && self.reps > 0
            && self.speed_min > 0.0
            && self.speed_max >= self.speed_min
            && (0.0..1.0).contains(&self.speed_jitter)
            && self.pause_jitter >= 0.0
            && self.pause - self.pause_jitter >= 0.0
            && self.lead_in >= 0.0
            && self.endpoint_jitter >= 0.0;
        if !ok {
            return Err(Error::Config("experiment parameters out of range".into()));
        }
        Ok(())
    }
}

/// Derives an independent seed from a master seed and a path of indices.
pub fn split_seed(master: u64, path: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    path.iter().fold(mix(master), |acc, &p| mix(acc ^ mix(p)))
}

const EVAL: u64 = 1;
const TRAIN: u64 = 2;

/// A synthetic participant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimUser {
    pub id: u32,
    pub speed: f64,
}

impl SimUser {
    pub fn draw(id: u32, stream: u64, master: u64, spec: &ExperimentSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(split_seed(master, &[stream, id as u64]));
        let speed = if spec.speed_max > spec.speed_min { rng.gen_range(spec.speed_min..spec.speed_max) } else { spec.speed_min };
        Self { id, speed }
    }

    /// Timing of one entry of a pattern with `n_strokes` strokes.
    pub fn timing(&self, n_strokes: usize, spec: &ExperimentSpec, rng: &mut ChaCha8Rng) -> Result<PatternTiming> {
        let mut jitter = |amount: f64| if amount > 0.0 { rng.gen_range(-amount..=amount) } else { 0.0 };
        let speeds = (0..n_strokes).map(|_| self.speed * (1.0 + jitter(spec.speed_jitter))).collect();
        let pauses = (0..n_strokes).map(|_| spec.pause + jitter(spec.pause_jitter)).collect();
        let offsets = if spec.endpoint_jitter > 0.0 {
            let normal = Normal::new(0.0, spec.endpoint_jitter).map_err(|e| Error::Config(e.to_string()))?;
            (0..=n_strokes).map(|_| Point2::new(normal.sample(rng), normal.sample(rng))).collect()
        } else {
            Vec::new()
        };
        Ok(PatternTiming { lead_in: spec.lead_in, speeds, pauses, offsets })
    }
}

/// Observations of one simulated entry, per microphone set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialObservations {
    pub user: u32,
    pub pattern: u32,
    pub rep: u32,
    /// Both microphones analyzed together.
    pub joint: Option<Observation>,
    pub bottom: Option<Observation>,
    pub top: Option<Observation>,
}

impl TrialObservations {
    pub fn for_mode(&self, mode: Mode) -> Option<&Observation> {
        match mode.required_mics().as_slice() {
            [Mic::Bottom] => self.bottom.as_ref(),
            [Mic::Top] => self.top.as_ref(),
            _ => self.joint.as_ref(),
        }
    }
}

/// Which microphone sets to analyze.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MicSets {
    pub joint: bool,
    pub bottom: bool,
    pub top: bool,
}

impl MicSets {
    pub fn all() -> Self {
        Self { joint: true, bottom: true, top: true }
    }

    pub fn for_modes(modes: &[Mode]) -> Self {
        let mut s = Self::default();
        for m in modes {
            match m.required_mics().as_slice() {
                [Mic::Bottom] => s.bottom = true,
                [Mic::Top] => s.top = true,
                _ => s.joint = true,
            }
        }
        s
    }
}

/// Simulates and analyzes one entry of `pattern` by `user`.
pub fn run_trial(
    cfg: &RunConfig,
    analyzer: &Analyzer,
    pattern: &UnlockPattern,
    user: &SimUser,
    rep: u32,
    stream: u64,
    sets: MicSets,
) -> Result<TrialObservations> {
    let seed = split_seed(cfg.seed, &[stream, user.id as u64, pattern.id as u64, rep as u64]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let timing = user.timing(pattern.strokes().len(), &cfg.experiment, &mut rng)?;
    let sim_cfg = sim::SimConfig { seed: rng.gen(), ..cfg.sim.clone() };
    let trace = sim::synth_pattern_trace(pattern, &cfg.geometry, &cfg.frame, &sim_cfg, &timing)?;
    let observe = |traces: &[(Mic, &[f64])]| analyzer.analyze(traces).map(|a| Observation::from_analyses(&a));
    let b = (Mic::Bottom, trace.bottom.as_slice());
    let t = (Mic::Top, trace.top.as_slice());
    Ok(TrialObservations {
        user: user.id,
        pattern: pattern.id,
        rep,
        joint: sets.joint.then(|| observe(&[b, t])).transpose()?,
        bottom: sets.bottom.then(|| observe(&[b])).transpose()?,
        top: sets.top.then(|| observe(&[t])).transpose()?,
    })
}

/// Labeled samples of a trial whose stroke count matches the pattern; each
/// microphone set contributes separately.
pub fn training_samples(trial: &TrialObservations, catalog: &PatternCatalog) -> Vec<LabeledStrokeSample> {
    let Some(truth) = catalog.stroke_ids(trial.pattern) else {
        return Vec::new();
    };
    let n = truth.len();
    let mut out = Vec::new();
    let count = |o: &Observation, mic| o.strokes(mic).map_or(0, |s| s.len());
    if let Some(o) = &trial.joint {
        if count(o, Mic::Bottom) == n && count(o, Mic::Top) == n {
            out.extend(truth.iter().enumerate().map(|(i, &s)| LabeledStrokeSample { stroke: s, sample: o.sample(i) }));
        }
    }
    for (obs, mic) in [(&trial.bottom, Mic::Bottom), (&trial.top, Mic::Top)] {
        if let Some(o) = obs {
            if count(o, mic) == n {
                out.extend(truth.iter().enumerate().map(|(i, &s)| {
                    let f = o.sample(i);
                    let sample = match mic {
                        Mic::Bottom => StrokeSample { bottom: f.bottom, top: None },
                        Mic::Top => StrokeSample { bottom: None, top: f.top },
                    };
                    LabeledStrokeSample { stroke: s, sample }
                }));
            }
        }
    }
    out
}

fn selected_catalog(cfg: &RunConfig, catalog: &PatternCatalog) -> Result<PatternCatalog> {
    if cfg.experiment.patterns.is_empty() {
        return Ok(catalog.clone());
    }
    let missing: Vec<u32> = cfg.experiment.patterns.iter().copied().filter(|id| catalog.get(*id).is_none()).collect();
    if !missing.is_empty() {
        return Err(Error::Config(format!("unknown pattern ids {missing:?}")));
    }
    catalog.subset(&cfg.experiment.patterns)
}

fn simulate_users(
    cfg: &RunConfig,
    analyzer: &Analyzer,
    catalog: &PatternCatalog,
    users: usize,
    reps: usize,
    stream: u64,
    sets: MicSets,
) -> Result<Vec<TrialObservations>> {
    let jobs: Vec<(SimUser, &UnlockPattern, u32)> = (1..=users as u32)
        .map(|u| SimUser::draw(u, stream, cfg.seed, &cfg.experiment))
        .flat_map(|u| catalog.patterns().iter().flat_map(move |p| (0..reps as u32).map(move |r| (u, p, r))))
        .collect();
    jobs.par_iter().map(|(u, p, r)| run_trial(cfg, analyzer, p, u, *r, stream, sets)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub trials: usize,
    pub samples: usize,
    /// Samples per stroke id.
    pub per_stroke: Vec<(u32, usize)>,
    pub group_models: usize,
    pub skipped_groups: Vec<String>,
}

/// Simulates the training users and fits every classifier.
pub fn train_on_simulation(
    cfg: &RunConfig,
    analyzer: &Analyzer,
    catalog: &PatternCatalog,
    tables: &GroupTables,
) -> Result<(ModelBundle, TrainingSummary, Vec<LabeledStrokeSample>)> {
    let e = &cfg.experiment;
    if e.train_users == 0 || e.train_reps == 0 {
        return Err(Error::Config("training needs train_users and train_reps above zero".into()));
    }
    let trials = simulate_users(cfg, analyzer, catalog, e.train_users, e.train_reps, TRAIN, MicSets::all())?;
    let samples: Vec<LabeledStrokeSample> = trials.iter().flat_map(|t| training_samples(t, catalog)).collect();
    let spec = decide::ClassifierSpec { seed: split_seed(cfg.seed, &[TRAIN, u64::MAX]), ..cfg.classifier.clone() };
    let models = decide::train_models(&samples, catalog, tables, &spec)?;
    let mut per_stroke: std::collections::BTreeMap<u32, usize> = Default::default();
    samples.iter().for_each(|s| *per_stroke.entry(s.stroke).or_default() += 1);
    let summary = TrainingSummary {
        trials: trials.len(),
        samples: samples.len(),
        per_stroke: per_stroke.into_iter().collect(),
        group_models: models.groups.len(),
        skipped_groups: models.skipped.iter().map(|(t, g, why)| format!("{t:?} {g:?}: {why}")).collect(),
    };
    Ok((models, summary, samples))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeResult {
    pub mode: Mode,
    pub metrics: MetricsReport,
    pub cells: Vec<CellResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: RunConfig,
    pub trials: usize,
    /// Fraction of trials whose detected stroke count matches the pattern, per
    /// microphone set.
    pub segmentation_accuracy: Vec<(String, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainingSummary>,
    pub results: Vec<ModeResult>,
}

impl ExperimentReport {
    pub fn result(&self, mode: Mode) -> Option<&ModeResult> {
        self.results.iter().find(|r| r.mode == mode)
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("trials: {}  seed: {}\n", self.trials, self.config.seed);
        for (set, acc) in &self.segmentation_accuracy {
            out.push_str(&format!("stroke count correct ({set}): {acc:.3}\n"));
        }
        for r in &self.results {
            out.push_str(&format!("\n== {} ==\n{}", r.mode, r.metrics.to_table()));
        }
        out
    }
}

fn segmentation_accuracy(trials: &[TrialObservations], catalog: &PatternCatalog, sets: MicSets) -> Vec<(String, f64)> {
    let n_strokes = |id: u32| catalog.get(id).map_or(0, |p| p.strokes().len());
    let rate = |f: &dyn Fn(&TrialObservations) -> bool| {
        trials.iter().filter(|t| f(t)).count() as f64 / trials.len().max(1) as f64
    };
    let len = |o: &Option<Observation>, mic: Mic| o.as_ref().and_then(|o| o.strokes(mic).map(|s| s.len()));
    let mut out = Vec::new();
    if sets.joint {
        out.push((
            "joint".to_string(),
            rate(&|t| {
                let n = Some(n_strokes(t.pattern));
                len(&t.joint, Mic::Bottom) == n && len(&t.joint, Mic::Top) == n
            }),
        ));
    }
    if sets.bottom {
        out.push(("bottom".to_string(), rate(&|t| len(&t.bottom, Mic::Bottom) == Some(n_strokes(t.pattern)))));
    }
    if sets.top {
        out.push(("top".to_string(), rate(&|t| len(&t.top, Mic::Top) == Some(n_strokes(t.pattern)))));
    }
    out
}

/// Runs the simulated study and scores each mode on the same trials. Modes
/// that need classifiers use `models` when given and otherwise train on
/// separate simulated users first.
pub fn run_experiment(
    cfg: &RunConfig,
    modes: &[Mode],
    catalog: &PatternCatalog,
    models: Option<&ModelBundle>,
) -> Result<ExperimentReport> {
    cfg.validate()?;
    if modes.is_empty() {
        return Err(Error::Config("no decision mode selected".into()));
    }
    let catalog = selected_catalog(cfg, catalog)?;
    let analyzer = Analyzer::new(cfg.frame.clone(), cfg.segment.clone(), cfg.gabor.clone())?;
    let tables = GroupTables::build(&catalog, &cfg.geometry)?;
    let needs_models = modes.iter().any(|m| m.strategy != Strategy::D2);
    let (models, training) = match models {
        Some(m) if needs_models => {
            m.check_version()?;
            (Some(m.clone()), None)
        }
        None if needs_models => {
            let (m, s, _) = train_on_simulation(cfg, &analyzer, &catalog, &tables)?;
            (Some(m), Some(s))
        }
        _ => (None, None),
    };
    let sets = MicSets::for_modes(modes);
    let e = &cfg.experiment;
    let trials = simulate_users(cfg, &analyzer, &catalog, e.users, e.reps, EVAL, sets)?;
    let mut results = Vec::new();
    for &mode in modes {
        let sets: Vec<CandidateSet> = trials
            .iter()
            .map(|t| {
                let obs = t.for_mode(mode).expect("observation computed for every requested mode");
                decide::infer(obs, &tables, models.as_ref(), &catalog, mode)
            })
            .collect::<Result<_>>()?;
        let mut cells: Vec<CellResult> = Vec::new();
        for (t, set) in trials.iter().zip(sets) {
            match cells.last_mut() {
                Some(c) if c.user == t.user && c.pattern == t.pattern => c.observations.push(set),
                _ => cells.push(CellResult { user: t.user, pattern: t.pattern, observations: vec![set] }),
            }
        }
        let metrics = decide::compute_metrics(&cells, catalog.len())?;
        results.push(ModeResult { mode, metrics, cells });
    }
    Ok(ExperimentReport {
        config: cfg.clone(),
        trials: trials.len(),
        segmentation_accuracy: segmentation_accuracy(&trials, &catalog, sets),
        training,
        results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_split_apart() {
        let a = split_seed(1, &[1, 2, 3]);
        assert_eq!(a, split_seed(1, &[1, 2, 3]));
        assert_ne!(a, split_seed(1, &[1, 3, 2]));
        assert_ne!(a, split_seed(2, &[1, 2, 3]));
    }

    #[test]
    fn user_timing_within_bounds() {
        let spec = ExperimentSpec::default();
        let user = SimUser::draw(3, EVAL, 7, &spec);
        assert!((spec.speed_min..spec.speed_max).contains(&user.speed));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = user.timing(4, &spec, &mut rng).unwrap();
        assert_eq!((t.speeds.len(), t.pauses.len(), t.offsets.len()), (4, 4, 5));
        assert!(t.pauses.iter().all(|p| (spec.pause - spec.pause_jitter..=spec.pause + spec.pause_jitter).contains(p)));
    }

    #[test]
    fn mic_sets_follow_modes() {
        let modes: Vec<Mode> = ["D2.1", "D3.3"].iter().map(|m| m.parse().unwrap()).collect();
        assert_eq!(MicSets::for_modes(&modes), MicSets { joint: true, bottom: true, top: false });
    }
}
