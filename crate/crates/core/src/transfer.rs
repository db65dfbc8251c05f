//! Policy transplant between activities, transfer-ratio computation, and the
//! full source x target experiment grid with similarity correlation analysis.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activity::Activity;
use crate::embed::{fnv1a64, similarity_matrix, EmbedError, EmbeddingProvider, SimilarityMatrix};
use crate::rl::net::{init_dense_orthogonal, PolicyParams, HEAD_INIT_GAIN};
use crate::rl::{train_from, LearningCurve, RlError, TrainConfig};

/// Grid experiment settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferConfig {
    /// Episode counts at which transfer ratios are evaluated.
    pub checkpoints: Vec<usize>,
    /// Training runs per cell; curves are aggregated by per-episode median.
    pub seeds: usize,
    /// Added to every episode total before computing curve areas, so that
    /// areas stay positive. Must cover the worst possible total.
    pub offset: f64,
    /// Base seed every per-run seed is derived from.
    pub base_seed: u64,
    /// Copy the primitive head instead of reinitializing it.
    pub keep_primitive_head: bool,
    /// Also fill source == target cells by reusing the scratch runs
    /// (a ratio-1.0 sanity diagonal).
    pub include_diagonal: bool,
    /// Worker threads for grid cells; 0 means one per logical core.
    pub jobs: usize,
}

impl Default for TransferConfig {
    fn default() -> Self {
        TransferConfig {
            checkpoints: vec![80, 160],
            seeds: 3,
            offset: 64.0,
            base_seed: 0,
            keep_primitive_head: false,
            include_diagonal: false,
            jobs: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum TransferError {
    #[error("object head needs at least 1 output, got {got}")]
    BadTargetWidth { got: usize },
    #[error("curve has {len} episodes, need {needed}")]
    CurveTooShort { len: usize, needed: usize },
    #[error("offset {offset} leaves a shifted total negative ({total})")]
    NegativeShiftedTotal { offset: f64, total: f64 },
    #[error("baseline curve area is zero over the ratio window")]
    ZeroBaselineArea,
    #[error("unknown activity `{name}`")]
    UnknownActivity { name: String },
    #[error("activity `{name}` is source-only and cannot be a transfer target")]
    SourceOnlyTarget { name: String },
    #[error("checkpoint {checkpoint} exceeds the {episodes} training episodes")]
    BadCheckpoint { checkpoint: usize, episodes: usize },
    #[error("grid needs at least one source and one target")]
    EmptyGrid,
    #[error("training failed for target `{target}` from `{from_source}` seed {seed}: {detail}")]
    CellFailed { target: String, from_source: String, seed: usize, detail: String },
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Rl(#[from] RlError),
}

/// Copy all network weights except the actor output heads; the object head
/// is resized to the target's object count and both heads are freshly
/// initialized (the primitive head can optionally be kept, since its width
/// never changes).
pub fn transplant(
    source: &PolicyParams,
    target_k: usize,
    keep_primitive_head: bool,
    rng: &mut impl rand::Rng,
) -> Result<PolicyParams, TransferError> {
    if target_k < 1 {
        return Err(TransferError::BadTargetWidth { got: target_k });
    }
    let mut params = PolicyParams::zeros(source.feature_dim(), source.hidden_dim(), target_k);
    params.trunk1 = source.trunk1.clone();
    params.trunk2 = source.trunk2.clone();
    params.value_head = source.value_head.clone();
    if keep_primitive_head {
        params.prim_head = source.prim_head.clone();
    } else {
        init_dense_orthogonal(&mut params.prim_head, HEAD_INIT_GAIN, rng);
    }
    init_dense_orthogonal(&mut params.obj_head, HEAD_INIT_GAIN, rng);
    Ok(params)
}

/// Area-under-curve ratio over the first `n_episodes`, with totals shifted by
/// `offset`. Ratios above 1 indicate positive transfer.
pub fn transfer_ratio(
    transfer: &[f64],
    baseline: &[f64],
    n_episodes: usize,
    offset: f64,
) -> Result<f64, TransferError> {
    for curve in [transfer, baseline] {
        if curve.len() < n_episodes {
            return Err(TransferError::CurveTooShort { len: curve.len(), needed: n_episodes });
        }
    }
    let area = |curve: &[f64]| -> Result<f64, TransferError> {
        let mut sum = 0.0;
        for &total in &curve[..n_episodes] {
            let shifted = total + offset;
            if shifted < 0.0 {
                return Err(TransferError::NegativeShiftedTotal { offset, total });
            }
            sum += shifted;
        }
        Ok(sum)
    };
    let transfer_area = area(transfer)?;
    let baseline_area = area(baseline)?;
    if baseline_area == 0.0 {
        return Err(TransferError::ZeroBaselineArea);
    }
    Ok(transfer_area / baseline_area)
}

/// Spearman rank correlation with average-rank tie handling. Returns NaN for
/// constant columns, where the coefficient is undefined.
pub fn rank_correlation(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 3, "rank correlation needs at least 3 pairs");
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    pearson(&rx, &ry)
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // Tied block [i, j] shares the average of ranks i+1..=j+1.
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return f64::NAN;
    }
    cov / (vx * vy).sqrt()
}

/// Ratio matrix at one checkpoint: rows are source activities, columns are
/// target activities. `None` marks cells that were not run (the diagonal,
/// unless the sanity diagonal is enabled).
#[derive(Clone, Debug, PartialEq)]
pub struct RatioMatrix {
    pub checkpoint: usize,
    pub sources: Vec<String>,
    pub targets: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl RatioMatrix {
    pub fn get(&self, source: &str, target: &str) -> Option<f64> {
        let i = self.sources.iter().position(|s| s == source)?;
        let j = self.targets.iter().position(|t| t == target)?;
        self.values[i][j]
    }
}

/// Spearman correlation between a target's similarity column and its transfer
/// ratios, over all sources that ran for that target.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetCorrelation {
    pub target: String,
    pub checkpoint: usize,
    pub rho: f64,
    pub n_sources: usize,
}

/// One recorded training curve. `source` is `"scratch"` for baselines.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveRecord {
    pub target: String,
    pub source: String,
    pub seed_index: usize,
    pub curve: LearningCurve,
}

pub const SCRATCH: &str = "scratch";

/// Everything a grid run produces.
#[derive(Clone, Debug)]
pub struct TransferReport {
    pub sources: Vec<String>,
    pub targets: Vec<String>,
    pub checkpoints: Vec<usize>,
    /// Full square similarity matrix over every participating activity.
    pub similarity: SimilarityMatrix,
    pub ratios: Vec<RatioMatrix>,
    pub correlations: Vec<TargetCorrelation>,
    pub curves: Vec<CurveRecord>,
}

/// Stable per-run seed: a hash of the base seed, the run's role, and its
/// coordinates, so results do not depend on scheduling or iteration order.
fn derive_seed(base: u64, role: &str, a: &str, b: &str, k: usize) -> u64 {
    fnv1a64(format!("{base}:{role}:{a}:{b}:{k}").as_bytes())
}

/// Median of each episode index across seeds (mean of the two middle values
/// for even counts).
pub fn median_curve(curves: &[&LearningCurve]) -> Vec<f64> {
    assert!(!curves.is_empty());
    let episodes = curves.iter().map(|c| c.len()).min().unwrap_or(0);
    let mut out = Vec::with_capacity(episodes);
    let mut column: Vec<f64> = Vec::with_capacity(curves.len());
    for e in 0..episodes {
        column.clear();
        column.extend(curves.iter().map(|c| c.totals[e]));
        column.sort_by(|a, b| a.partial_cmp(b).expect("finite totals"));
        let mid = column.len() / 2;
        let median = if column.len() % 2 == 1 {
            column[mid]
        } else {
            0.5 * (column[mid - 1] + column[mid])
        };
        out.push(median);
    }
    out
}

fn resolve<'a>(
    activities: &'a [Activity],
    name: &str,
) -> Result<&'a Activity, TransferError> {
    activities
        .iter()
        .find(|a| a.name == name)
        .ok_or_else(|| TransferError::UnknownActivity { name: name.to_string() })
}

/// Run the full source x target grid: train scratch baselines and source
/// policies, transplant each source into each target, and assemble ratio
/// matrices, the similarity matrix, and per-target rank correlations.
pub fn run_grid(
    activities: &[Activity],
    sources: &[String],
    targets: &[String],
    train_cfg: &TrainConfig,
    config: &TransferConfig,
    provider: &dyn EmbeddingProvider,
) -> Result<TransferReport, TransferError> {
    if sources.is_empty() || targets.is_empty() {
        return Err(TransferError::EmptyGrid);
    }
    for checkpoint in &config.checkpoints {
        if *checkpoint == 0 || *checkpoint > train_cfg.episodes {
            return Err(TransferError::BadCheckpoint {
                checkpoint: *checkpoint,
                episodes: train_cfg.episodes,
            });
        }
    }
    for name in sources.iter().chain(targets) {
        resolve(activities, name)?;
    }
    for name in targets {
        if resolve(activities, name)?.source_only {
            return Err(TransferError::SourceOnlyTarget { name: name.clone() });
        }
    }

    // Every grid participant, deduplicated and sorted.
    let mut participants: Vec<String> = sources.iter().chain(targets).cloned().collect();
    participants.sort();
    participants.dedup();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .expect("thread pool");

    // Phase 1: scratch runs for every participant and seed. Sources use them
    // to pick their best pre-trained policy; targets use them as baselines.
    let scratch_jobs: Vec<(String, usize)> = participants
        .iter()
        .flat_map(|name| (0..config.seeds).map(move |k| (name.clone(), k)))
        .collect();
    let scratch_results: Result<Vec<_>, TransferError> = pool.install(|| {
        scratch_jobs
            .par_iter()
            .map(|(name, k)| {
                let activity = resolve(activities, name)?;
                let seed = derive_seed(config.base_seed, "run", name, SCRATCH, *k);
                let outcome = train_from(activity, train_cfg, seed, None).map_err(|e| {
                    TransferError::CellFailed {
                        target: name.clone(),
                        from_source: SCRATCH.into(),
                        seed: *k,
                        detail: e.to_string(),
                    }
                })?;
                Ok(((name.clone(), *k), outcome))
            })
            .collect()
    });
    let scratch: BTreeMap<(String, usize), _> = scratch_results?.into_iter().collect();

    // Best pre-trained policy per source, selected by final-64-episode mean.
    let mut source_params: BTreeMap<String, PolicyParams> = BTreeMap::new();
    for name in sources {
        let mut best: Option<(f64, usize)> = None;
        for k in 0..config.seeds {
            let mean = scratch[&(name.clone(), k)].curve.final_window_mean(64);
            if best.map(|(m, _)| mean > m).unwrap_or(true) {
                best = Some((mean, k));
            }
        }
        let (_, k) = best.expect("at least one seed");
        source_params.insert(name.clone(), scratch[&(name.clone(), k)].params.clone());
    }

    // Phase 2: transplanted runs for every (source, target, seed) cell. The
    // run seed matches the target's scratch baseline seed.
    let transfer_jobs: Vec<(String, String, usize)> = sources
        .iter()
        .flat_map(|s| {
            targets
                .iter()
                .filter(move |t| *t != s)
                .flat_map(move |t| (0..config.seeds).map(move |k| (s.clone(), t.clone(), k)))
        })
        .collect();
    let transfer_results: Result<Vec<_>, TransferError> = pool.install(|| {
        transfer_jobs
            .par_iter()
            .map(|(source, target, k)| {
                let activity = resolve(activities, target)?;
                let mut transplant_rng = ChaCha8Rng::seed_from_u64(derive_seed(
                    config.base_seed,
                    "transplant",
                    source,
                    target,
                    *k,
                ));
                let init = transplant(
                    &source_params[source],
                    activity.scene.len(),
                    config.keep_primitive_head,
                    &mut transplant_rng,
                )?;
                let seed = derive_seed(config.base_seed, "run", target, SCRATCH, *k);
                let outcome =
                    train_from(activity, train_cfg, seed, Some(init)).map_err(|e| {
                        TransferError::CellFailed {
                            target: target.clone(),
                            from_source: source.clone(),
                            seed: *k,
                            detail: e.to_string(),
                        }
                    })?;
                Ok(((source.clone(), target.clone(), *k), outcome))
            })
            .collect()
    });
    let transferred: BTreeMap<(String, String, usize), _> =
        transfer_results?.into_iter().collect();

    // Aggregate curves and fill the ratio matrices.
    let mut ratios = Vec::with_capacity(config.checkpoints.len());
    for &checkpoint in &config.checkpoints {
        let mut values = vec![vec![None; targets.len()]; sources.len()];
        for (i, source) in sources.iter().enumerate() {
            for (j, target) in targets.iter().enumerate() {
                if source == target && !config.include_diagonal {
                    continue;
                }
                let transfer_curves: Vec<&LearningCurve> = (0..config.seeds)
                    .map(|k| {
                        if source == target {
                            // Sanity diagonal: the transplant is disabled and
                            // the scratch run stands in for the transfer run.
                            &scratch[&(target.clone(), k)].curve
                        } else {
                            &transferred[&(source.clone(), target.clone(), k)].curve
                        }
                    })
                    .collect();
                let baseline_curves: Vec<&LearningCurve> = (0..config.seeds)
                    .map(|k| &scratch[&(target.clone(), k)].curve)
                    .collect();
                let transfer_median = median_curve(&transfer_curves);
                let baseline_median = median_curve(&baseline_curves);
                let ratio =
                    transfer_ratio(&transfer_median, &baseline_median, checkpoint, config.offset)?;
                values[i][j] = Some(ratio);
            }
        }
        ratios.push(RatioMatrix {
            checkpoint,
            sources: sources.to_vec(),
            targets: targets.to_vec(),
            values,
        });
    }

    // Similarity over all participants, from their rendered descriptions.
    let descriptions: BTreeMap<String, String> = participants
        .iter()
        .map(|name| {
            let activity = resolve(activities, name).expect("validated above");
            (name.clone(), activity.description.clone())
        })
        .collect();
    let similarity = similarity_matrix(&descriptions, provider)?;

    // Per-target correlation between similarity and ratio, over sources.
    let mut correlations = Vec::new();
    for matrix in &ratios {
        for (j, target) in targets.iter().enumerate() {
            let mut sims = Vec::new();
            let mut rhos = Vec::new();
            for (i, source) in sources.iter().enumerate() {
                if let Some(ratio) = matrix.values[i][j] {
                    let sim = similarity.get(source, target).expect("participants embedded");
                    sims.push(sim);
                    rhos.push(ratio);
                }
            }
            let rho = if sims.len() >= 3 { rank_correlation(&sims, &rhos) } else { f64::NAN };
            correlations.push(TargetCorrelation {
                target: target.clone(),
                checkpoint: matrix.checkpoint,
                rho,
                n_sources: sims.len(),
            });
        }
    }

    // Raw curves: baselines and transfers, in a stable order.
    let mut curves = Vec::new();
    for target in &participants {
        for k in 0..config.seeds {
            curves.push(CurveRecord {
                target: target.clone(),
                source: SCRATCH.into(),
                seed_index: k,
                curve: scratch[&(target.clone(), k)].curve.clone(),
            });
        }
    }
    for (source, target, k) in &transfer_jobs {
        curves.push(CurveRecord {
            target: target.clone(),
            source: source.clone(),
            seed_index: *k,
            curve: transferred[&(source.clone(), target.clone(), *k)].curve.clone(),
        });
    }

    Ok(TransferReport {
        sources: sources.to_vec(),
        targets: targets.to_vec(),
        checkpoints: config.checkpoints.clone(),
        similarity,
        ratios,
        correlations,
        curves,
    })
}
