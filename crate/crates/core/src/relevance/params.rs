use serde::{Deserialize, Serialize};

use super::RelevanceError;

/// Above this exponent selection becomes so conservative that a newcomer can
/// no longer displace an established object.
pub const CONSERVATIVE_V: f64 = 2.5;

/// Bases at or above this value make training (or forgetting) degenerate.
pub const DEGENERATE_BASIS: f64 = 10.0;

/// Which relevance a training step starts from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainBaseMode {
    /// Base is the relevance after the previous run of the class: consecutive
    /// trainings chain without any decay in between.
    #[default]
    StrictEq19,
    /// Base is the lazily decayed relevance at the current run, so even an
    /// object trained in the previous run loses one decay step first.
    LazySec42,
}

/// Parameters of the train/forget/select cycle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct RkfParams {
    b_t: f64,
    b_f: f64,
    v: f64,
    mode: TrainBaseMode,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamWarning {
    /// `v` above 2.5.
    OverlyConservative,
    /// `b_t` of 10 or more; rewards barely register.
    SlowTraining,
    /// `b_f` of 10 or more; unused objects vanish after one run.
    FastForgetting,
}

impl RkfParams {
    pub fn new(b_t: f64, b_f: f64, v: f64) -> Result<Self, RelevanceError> {
        Self::with_mode(b_t, b_f, v, TrainBaseMode::default())
    }

    pub fn with_mode(b_t: f64, b_f: f64, v: f64, mode: TrainBaseMode) -> Result<Self, RelevanceError> {
        if !(b_t.is_finite() && b_t > 1.0) {
            return Err(RelevanceError::InvalidParam(format!("b_t must be finite and > 1, got {b_t}")));
        }
        if !(b_f.is_finite() && b_f >= 1.0) {
            return Err(RelevanceError::InvalidParam(format!("b_f must be finite and >= 1, got {b_f}")));
        }
        if !(v.is_finite() && v >= 1.0) {
            return Err(RelevanceError::InvalidParam(format!("v must be finite and >= 1, got {v}")));
        }
        let params = Self { b_t, b_f, v, mode };
        for warning in params.warnings() {
            log::warn!("degenerate relevance parameters ({b_t}, {b_f}, {v}): {warning:?}");
        }
        Ok(params)
    }

    pub fn b_t(&self) -> f64 {
        self.b_t
    }

    pub fn b_f(&self) -> f64 {
        self.b_f
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn mode(&self) -> TrainBaseMode {
        self.mode
    }

    /// Legal but degenerate settings.
    pub fn warnings(&self) -> Vec<ParamWarning> {
        let mut out = Vec::new();
        if self.v > CONSERVATIVE_V {
            out.push(ParamWarning::OverlyConservative);
        }
        if self.b_t >= DEGENERATE_BASIS {
            out.push(ParamWarning::SlowTraining);
        }
        if self.b_f >= DEGENERATE_BASIS {
            out.push(ParamWarning::FastForgetting);
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    b_t: f64,
    b_f: f64,
    v: f64,
    #[serde(default)]
    mode: TrainBaseMode,
}

impl TryFrom<RawParams> for RkfParams {
    type Error = RelevanceError;

    fn try_from(raw: RawParams) -> Result<Self, Self::Error> {
        RkfParams::with_mode(raw.b_t, raw.b_f, raw.v, raw.mode)
    }
}

impl From<RkfParams> for RawParams {
    fn from(p: RkfParams) -> Self {
        RawParams { b_t: p.b_t, b_f: p.b_f, v: p.v, mode: p.mode }
    }
}
