//! In-memory building blocks of the batch commands.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::aggregation::{run_with, AggregationRun, Oracles, PanelScores, StrategyConfig, WeightVector};
use crate::error::{Error, Result};
use crate::experts::ExpertPanel;
use crate::reliability::{
    decile_rank, flatness_decisions, rank_among_levels, rank_of_observation, build_histogram, FlatnessReport,
    JpBasis, RankHistogram, DECILES,
};
use crate::stepwise_cdf::Provenance;

/// A panel with its precomputed scores and oracles.
pub struct PanelContext {
    pub panel: ExpertPanel,
    pub scores: PanelScores,
    pub oracles: Oracles,
}

impl PanelContext {
    pub fn new(panel: ExpertPanel) -> Result<Self> {
        let scores = PanelScores::new(&panel);
        let oracles = Oracles::new(&scores)?;
        Ok(Self { panel, scores, oracles })
    }

    pub fn run(&self, config: &StrategyConfig) -> Result<AggregationRun> {
        run_with(&self.panel, &self.scores, &self.oracles, config)
    }
}

/// Scores every panel; all panels must share the same experts.
pub fn prepare(panels: Vec<ExpertPanel>) -> Result<Vec<PanelContext>> {
    if let Some(first) = panels.first() {
        for p in &panels[1..] {
            if p.expert_names() != first.expert_names() {
                return Err(Error::IncompletePanel(format!(
                    "{} lead {} does not have the experts of {} lead {}",
                    p.location_id(),
                    p.lead_time_h(),
                    first.location_id(),
                    first.lead_time_h()
                )));
            }
        }
    }
    panels.into_par_iter().map(PanelContext::new).collect()
}

/// Distinct lead times, ascending.
pub fn lead_times(contexts: &[PanelContext]) -> Vec<u32> {
    let mut leads: Vec<u32> = contexts.iter().map(|c| c.panel.lead_time_h()).collect();
    leads.sort_unstable();
    leads.dedup();
    leads
}

fn fnv1a(text: &str) -> u64 {
    text.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Random stream for the tie-breaks of `system` on a panel, independent of
/// the order in which systems and panels are processed.
pub fn rank_rng(seed: u64, system: &str, panel: &ExpertPanel) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let key = format!("{system}\u{1f}{}\u{1f}{}", panel.location_id(), panel.lead_time_h());
    rng.set_stream(fnv1a(&key));
    rng
}

/// Rank histogram of expert `e`: among members for samples, among the nine
/// deciles otherwise.
pub fn expert_histogram(panel: &ExpertPanel, e: usize, seed: u64) -> Result<RankHistogram> {
    let mut rng = rank_rng(seed, &panel.expert_names()[e], panel);
    let first = panel.forecast(e, 1);
    let (ranks, k) = match first.provenance() {
        Provenance::RandomSample { size } => {
            let ranks: Vec<usize> = panel
                .observations()
                .iter()
                .map(|o| rank_of_observation(panel.forecast(e, o.t), o.value, &mut rng))
                .collect();
            (ranks, size + 1)
        }
        _ => {
            let ranks: Vec<usize> = panel
                .observations()
                .iter()
                .map(|o| decile_rank(panel.forecast(e, o.t), o.value, &mut rng))
                .collect();
            (ranks, DECILES.len() + 1)
        }
    };
    if let Some(&bad) = ranks.iter().find(|&&r| r > k) {
        return Err(Error::InvalidParameter(format!(
            "expert {:?} changes its member count (rank {bad} with {} bins)",
            panel.expert_names()[e],
            k
        )));
    }
    build_histogram(&ranks, k)
}

/// Decile rank histogram of the aggregated forecasts with the given daily weights.
pub fn aggregate_histogram(ctx: &PanelContext, system: &str, weights: &[WeightVector], seed: u64) -> Result<RankHistogram> {
    let mut rng = rank_rng(seed, system, &ctx.panel);
    let ranks: Vec<usize> = weights
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let (below, at) = ctx.scores.mixture_cdf_at_obs(i + 1, w);
            rank_among_levels(below, at, &DECILES, &mut rng)
        })
        .collect();
    build_histogram(&ranks, DECILES.len() + 1)
}

/// Flatness tests of one system at one lead time, one entry per location.
#[derive(Debug, Clone)]
pub struct SystemFlatness {
    pub histograms: Vec<RankHistogram>,
    pub reports: Vec<FlatnessReport>,
    pub flat: Vec<bool>,
}

impl SystemFlatness {
    pub fn new(histograms: Vec<RankHistogram>, alpha: f64) -> Result<Self> {
        let mut bases: Vec<JpBasis> = Vec::new();
        let mut reports = Vec::with_capacity(histograms.len());
        for h in &histograms {
            if !bases.iter().any(|b| b.k() == h.k()) {
                bases.push(JpBasis::new(h.k())?);
            }
            let basis = bases.iter().find(|b| b.k() == h.k()).expect("basis present");
            reports.push(basis.test(h)?);
        }
        let flat = flatness_decisions(&reports, alpha);
        Ok(Self {
            histograms,
            reports,
            flat,
        })
    }

    pub fn proportion(&self) -> f64 {
        self.flat.iter().filter(|&&f| f).count() as f64 / self.flat.len().max(1) as f64
    }
}

/// Mean CRPS and flat proportion of one strategy at one lead time.
#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub config: StrategyConfig,
    pub lead_time_h: u32,
    pub mean_crps: f64,
    pub flat_proportion: f64,
    pub n_locations: usize,
}

/// Runs every configuration on every panel and summarizes skill and
/// reliability per lead time. Results are ordered by configuration, then lead.
pub fn evaluate_grid(
    contexts: &[PanelContext],
    configs: &[StrategyConfig],
    alpha: f64,
    seed: u64,
) -> Result<Vec<GridResult>> {
    let leads = lead_times(contexts);
    let per_config: Vec<Vec<GridResult>> = configs
        .par_iter()
        .map(|config| {
            let id = config.id();
            let mut out = Vec::with_capacity(leads.len());
            for &lead in &leads {
                let mut losses = Vec::new();
                let mut histograms = Vec::new();
                for ctx in contexts.iter().filter(|c| c.panel.lead_time_h() == lead) {
                    let run = ctx.run(config)?;
                    losses.push(run.mean_loss());
                    histograms.push(aggregate_histogram(ctx, &id, run.weights(), seed)?);
                }
                let flatness = SystemFlatness::new(histograms, alpha)?;
                out.push(GridResult {
                    config: *config,
                    lead_time_h: lead,
                    mean_crps: losses.iter().sum::<f64>() / losses.len() as f64,
                    flat_proportion: flatness.proportion(),
                    n_locations: losses.len(),
                });
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(per_config.into_iter().flatten().collect())
}
