//! End-to-end wiring: segment, compress, map to opacity.

use crate::compression_engine::{compress_document, EngineConfig, LevelTrace, Mode, ParagraphFailure};
use crate::llm_gateway::{Gateway, DEFAULT_MAX_IN_FLIGHT};
use crate::saliency_map::{faded_fraction, map_gp, map_wf, Method, OpacityConfig, SaliencyError, SaliencyMap};
use crate::text_model::Document;

#[derive(Debug)]
pub struct PipelineOutput {
    pub map: SaliencyMap,
    /// Empty for the word-frequency method.
    pub traces: Vec<LevelTrace>,
    pub failures: Vec<ParagraphFailure>,
    pub faded_fraction: f64,
}

#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub engine: EngineConfig,
    pub opacity: OpacityConfig,
    /// Paragraphs compressed concurrently.
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            engine: EngineConfig::gp(),
            opacity: OpacityConfig::default(),
            workers: DEFAULT_MAX_IN_FLIGHT,
        }
    }
}

impl PipelineConfig {
    pub fn for_method(method: Method) -> Self {
        let mut cfg = PipelineConfig::default();
        cfg.opacity.method = method;
        if method == Method::NgpTsm {
            cfg.engine = cfg.engine.with_mode(Mode::Ngp);
        }
        cfg
    }
}

/// Runs the configured method over `doc`. The word-frequency method never
/// touches the gateway.
pub fn run(gw: &Gateway, doc: &Document, cfg: &PipelineConfig) -> Result<PipelineOutput, SaliencyError> {
    match cfg.opacity.method {
        Method::WfTsm => {
            let wf = map_wf(doc, &cfg.opacity);
            Ok(PipelineOutput {
                faded_fraction: wf.achieved,
                map: wf.map,
                traces: Vec::new(),
                failures: Vec::new(),
            })
        }
        Method::GpTsm | Method::NgpTsm => {
            let engine = match cfg.opacity.method {
                Method::NgpTsm => cfg.engine.with_mode(Mode::Ngp),
                _ => cfg.engine.with_mode(Mode::Gp),
            };
            let out = compress_document(gw, doc, &engine, cfg.workers);
            let map = map_gp(&out.traces, doc, &cfg.opacity)?;
            Ok(PipelineOutput {
                faded_fraction: faded_fraction(doc, &map),
                map,
                traces: out.traces,
                failures: out.failures,
            })
        }
    }
}
