//! Runs one strategy end to end and keeps every intermediate artifact.

use std::collections::HashMap;

use thiserror::Error;

use crate::baselines::{ideal_sequence, random_sequence, sequence_from_answer, BaselineError};
use crate::gateway::{BackendConfig, ChatBackend, ChatExchange, GatewayError};
use crate::parser::{parse_response, ParseError};
use crate::prioritizer::generate_sequence;
use crate::prompt::{build_prompt_with, PromptError, PromptText, PromptVariant, Template};
use crate::report_store::{Corpus, GroundTruth, ReportId, StoreError};
use crate::sequence::{PrioritizedSequence, StrategyKind};
use crate::tree::{ClusterTree, TreeError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Baseline(BaselineError),
}

impl From<BaselineError> for PipelineError {
    fn from(e: BaselineError) -> Self {
        match e {
            BaselineError::Prompt(p) => PipelineError::Prompt(p),
            BaselineError::Gateway(g) => PipelineError::Gateway(g),
            other => PipelineError::Baseline(other),
        }
    }
}

/// Everything a strategy may need. Missing pieces are reported by
/// [`StrategyContext::check`] before any backend call.
pub struct StrategyContext<'a> {
    pub corpus: &'a Corpus,
    pub truth: Option<&'a GroundTruth>,
    pub backend: Option<&'a dyn ChatBackend>,
    pub config: BackendConfig,
    pub templates: HashMap<PromptVariant, Template>,
}

impl<'a> StrategyContext<'a> {
    pub fn new(corpus: &'a Corpus) -> Self {
        Self {
            corpus,
            truth: None,
            backend: None,
            config: BackendConfig::default(),
            templates: HashMap::new(),
        }
    }

    pub fn with_truth(mut self, truth: &'a GroundTruth) -> Self {
        self.truth = Some(truth);
        self
    }

    pub fn with_backend(mut self, backend: &'a dyn ChatBackend, config: BackendConfig) -> Self {
        self.backend = Some(backend);
        self.config = config;
        self
    }

    fn template(&self, variant: PromptVariant) -> Template {
        self.templates
            .get(&variant)
            .cloned()
            .unwrap_or_else(|| variant.default_template())
    }

    pub fn check(&self, strategy: StrategyKind, seed: Option<u64>) -> Result<(), PipelineError> {
        if strategy.needs_truth() && self.truth.is_none() {
            return Err(PipelineError::Config(format!(
                "strategy {strategy} requires ground truth (--truth)"
            )));
        }
        if strategy.needs_seed() && seed.is_none() {
            return Err(PipelineError::Config(format!(
                "strategy {strategy} requires a seed (--seed)"
            )));
        }
        if strategy.needs_backend() {
            if self.backend.is_none() {
                return Err(PipelineError::Config(format!(
                    "strategy {strategy} requires a backend (--backend or --mock-script)"
                )));
            }
            self.config.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct StrategyRun {
    pub sequence: PrioritizedSequence,
    pub prompt: Option<PromptText>,
    /// Parsed tree before selection (LLMPrior only).
    pub tree: Option<ClusterTree>,
    /// Reports the clustering answer omitted (LLMPrior only).
    pub missing: Vec<ReportId>,
}

impl StrategyRun {
    pub fn exchange(&self) -> Option<&ChatExchange> {
        self.sequence.exchange.as_ref()
    }
}

/// A failed run, with whatever was produced before the failure.
#[derive(Debug)]
pub struct RunFailure {
    pub error: PipelineError,
    pub prompt: Option<PromptText>,
    pub exchange: Option<ChatExchange>,
}

impl From<PipelineError> for Box<RunFailure> {
    fn from(error: PipelineError) -> Self {
        Box::new(RunFailure {
            error,
            prompt: None,
            exchange: None,
        })
    }
}

pub fn run_strategy(
    ctx: &StrategyContext<'_>,
    strategy: StrategyKind,
    seed: Option<u64>,
) -> Result<StrategyRun, Box<RunFailure>> {
    ctx.check(strategy, seed)?;
    let plain = |sequence| StrategyRun {
        sequence,
        prompt: None,
        tree: None,
        missing: Vec::new(),
    };
    match strategy {
        StrategyKind::Ideal => Ok(plain(ideal_sequence(ctx.corpus, ctx.truth.expect("checked")))),
        StrategyKind::Random => Ok(plain(random_sequence(ctx.corpus, seed.expect("checked")))),
        StrategyKind::LlmPrior => run_model(ctx, PromptVariant::Cluster, strategy),
        StrategyKind::DirectLlm => run_model(ctx, PromptVariant::Direct, strategy),
        StrategyKind::SimpleLlm => run_model(ctx, PromptVariant::Simple, strategy),
    }
}

fn run_model(
    ctx: &StrategyContext<'_>,
    variant: PromptVariant,
    strategy: StrategyKind,
) -> Result<StrategyRun, Box<RunFailure>> {
    let backend = ctx.backend.expect("checked");
    let prompt = build_prompt_with(ctx.corpus, variant, &ctx.template(variant))
        .map_err(|e| Box::<RunFailure>::from(PipelineError::from(e)))?;
    let exchange = match backend.complete(&prompt, &ctx.config) {
        Ok(ex) => ex,
        Err(e) => {
            return Err(Box::new(RunFailure {
                error: e.into(),
                prompt: Some(prompt),
                exchange: None,
            }))
        }
    };
    let fail = |error: PipelineError| {
        Box::new(RunFailure {
            error,
            prompt: Some(prompt.clone()),
            exchange: Some(exchange.clone()),
        })
    };

    if variant == PromptVariant::Cluster {
        let parsed = parse_response(&exchange.response_text, ctx.corpus).map_err(|e| fail(e.into()))?;
        let mut sequence = generate_sequence(parsed.tree.clone()).map_err(|e| fail(e.into()))?;
        sequence.incomplete = !parsed.missing.is_empty();
        Ok(StrategyRun {
            sequence: sequence.with_exchange(exchange.clone()),
            prompt: Some(prompt.clone()),
            tree: Some(parsed.tree),
            missing: parsed.missing,
        })
    } else {
        let sequence =
            sequence_from_answer(ctx.corpus, &exchange.response_text, strategy).map_err(|e| fail(e.into()))?;
        Ok(StrategyRun {
            sequence: sequence.with_exchange(exchange.clone()),
            prompt: Some(prompt.clone()),
            tree: None,
            missing: Vec::new(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{MockBackend, MockEntry};
    use crate::report_store::Report;

    fn corpus() -> Corpus {
        Corpus::new("t", (1..=6).map(|i| Report::new(i, format!("report {i}"))).collect()).unwrap()
    }

    #[test]
    fn llmprior_end_to_end() {
        let answer = "Step 1: read.\nLEVEL 1: A -> Report: 1, 4\nLEVEL 1: B\n  LEVEL 2: B1 -> Report: 3, 6\n  LEVEL 2: B2 -> Report: 5\nLEVEL 1: C -> Report: 2\n";
        let mock = MockBackend::new(vec![MockEntry::new(answer)]).unwrap();
        let c = corpus();
        let ctx = StrategyContext::new(&c).with_backend(&mock, BackendConfig::default());
        let run = run_strategy(&ctx, StrategyKind::LlmPrior, None).unwrap();
        assert_eq!(run.sequence.order, vec![1, 3, 2, 4, 5, 6]);
        assert!(!run.sequence.incomplete);
        assert!(run.tree.unwrap().is_pristine());
        assert_eq!(run.prompt.unwrap().variant, PromptVariant::Cluster);
    }

    #[test]
    fn requirements_checked_before_calls() {
        let c = corpus();
        let ctx = StrategyContext::new(&c);
        for (s, seed) in [
            (StrategyKind::Ideal, None),
            (StrategyKind::Random, None),
            (StrategyKind::LlmPrior, None),
            (StrategyKind::SimpleLlm, Some(1)),
        ] {
            let err = run_strategy(&ctx, s, seed).unwrap_err();
            assert!(matches!(err.error, PipelineError::Config(_)), "{s}");
        }
        assert_eq!(
            run_strategy(&ctx, StrategyKind::Random, Some(4)).unwrap().sequence.seed,
            Some(4)
        );
    }

    #[test]
    fn parse_failure_keeps_exchange() {
        let mock = MockBackend::new(vec![MockEntry::new("LEVEL 1: X -> Report: 99")]).unwrap();
        let c = corpus();
        let ctx = StrategyContext::new(&c).with_backend(&mock, BackendConfig::default());
        let err = run_strategy(&ctx, StrategyKind::LlmPrior, None).unwrap_err();
        assert!(matches!(
            err.error,
            PipelineError::Parse(ParseError::UnknownReport { id: 99, .. })
        ));
        assert!(err.exchange.is_some());
        assert!(err.prompt.is_some());
    }

    #[test]
    fn omitted_reports_flag_incomplete() {
        let mock = MockBackend::new(vec![MockEntry::new("LEVEL 1: X -> Report: 2, 1")]).unwrap();
        let c = corpus();
        let ctx = StrategyContext::new(&c).with_backend(&mock, BackendConfig::default());
        let run = run_strategy(&ctx, StrategyKind::LlmPrior, None).unwrap();
        assert_eq!(run.missing, vec![3, 4, 5, 6]);
        assert!(run.sequence.incomplete);
        assert_eq!(run.sequence.order, vec![2, 3, 1, 4, 5, 6]);
    }
}
