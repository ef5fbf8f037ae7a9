//! JSON schemas for instances and result provenance.
//!
//! A state instance looks like
//!
//! ```json
//! {"type": "state",
//!  "layout": [{"label": "A", "dim": 2}, ...],
//!  "marginals": [{"set": ["A", "B"], "state": {"layout": ..., "entries": ...}}],
//!  "target": ["A", "C"],
//!  "free": {"kind": "separable_ppt", "target": ["A", "C"]}}
//! ```
//!
//! and a channel instance replaces `layout`/`marginals` with `input_layout`,
//! `output_layout` and a `pairs` array of `{"input", "output", "channel"}`.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::channel::{ChannelMarginalFamily, ChannelPair, ChannelRmpInstance, ChannelSpec};
use crate::config::Tolerances;
use crate::error::{Result, RmpError};
use crate::free_sets::{FreeChannelKind, FreeChannelSetSpec, FreeSetSpec, Relaxation};
use crate::hermitian::{DensityMatrix, HermitianOperator, SubsystemLayout, SubsystemSet};
use crate::solver::Settings;
use crate::state_rmp::{MarginalFamily, RmpInstance};

#[derive(Serialize, Deserialize)]
struct FreeChannelJson {
    kind: String,
    input: SubsystemSet,
    output: SubsystemSet,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    params: Value,
}

impl Serialize for FreeChannelSetSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let params = match &self.kind {
            FreeChannelKind::AllChannels => Value::Null,
            FreeChannelKind::FreeOutputState(f) => serde_json::json!({ "free_set": f }),
            FreeChannelKind::SingletonChannel(j) => serde_json::json!({ "choi": j }),
        };
        FreeChannelJson {
            kind: self.kind_name().into(),
            input: self.input.clone(),
            output: self.output.clone(),
            params,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FreeChannelSetSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let raw = FreeChannelJson::deserialize(d)?;
        let param = |name: &'static str| {
            raw.params
                .get(name)
                .cloned()
                .ok_or_else(|| D::Error::missing_field(name))
        };
        let kind = match raw.kind.as_str() {
            "all_channels" => FreeChannelKind::AllChannels,
            "free_output_state" => {
                FreeChannelKind::FreeOutputState(serde_json::from_value(param("free_set")?).map_err(D::Error::custom)?)
            }
            "singleton_channel" => {
                FreeChannelKind::SingletonChannel(serde_json::from_value(param("choi")?).map_err(D::Error::custom)?)
            }
            other => {
                return Err(D::Error::unknown_variant(
                    other,
                    &["all_channels", "free_output_state", "singleton_channel"],
                ))
            }
        };
        Ok(FreeChannelSetSpec {
            kind,
            input: raw.input,
            output: raw.output,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct MarginalJson {
    set: SubsystemSet,
    state: DensityMatrix,
}

#[derive(Serialize, Deserialize)]
struct PairJson {
    input: SubsystemSet,
    output: SubsystemSet,
    channel: ChannelSpec,
}

#[derive(Serialize, Deserialize)]
struct TargetPairJson {
    input: SubsystemSet,
    output: SubsystemSet,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum InstanceJson {
    State {
        layout: SubsystemLayout,
        marginals: Vec<MarginalJson>,
        target: SubsystemSet,
        free: FreeSetSpec,
    },
    Channel {
        input_layout: SubsystemLayout,
        output_layout: SubsystemLayout,
        pairs: Vec<PairJson>,
        target: TargetPairJson,
        free: FreeChannelSetSpec,
    },
}

/// Either kind of resource marginal problem.
#[derive(Debug, Clone)]
pub enum Instance {
    State(RmpInstance),
    Channel(ChannelRmpInstance),
}

impl Instance {
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: InstanceJson = serde_json::from_str(text)?;
        match raw {
            InstanceJson::State {
                layout,
                marginals,
                target,
                free,
            } => {
                let fam = MarginalFamily::new(layout, marginals.into_iter().map(|m| (m.set, m.state)).collect())?;
                Ok(Instance::State(RmpInstance::new(fam, target, free)?))
            }
            InstanceJson::Channel {
                input_layout,
                output_layout,
                pairs,
                target,
                free,
            } => {
                let entries = pairs
                    .into_iter()
                    .map(|p| (ChannelPair::new(p.input, p.output), p.channel))
                    .collect();
                let fam = ChannelMarginalFamily::new(input_layout, output_layout, entries)?;
                Ok(Instance::Channel(ChannelRmpInstance::new(
                    fam,
                    ChannelPair::new(target.input, target.output),
                    free,
                )?))
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let raw = match self {
            Instance::State(i) => InstanceJson::State {
                layout: i.layout().clone(),
                marginals: i
                    .marginals
                    .entries()
                    .iter()
                    .map(|(set, state)| MarginalJson {
                        set: set.clone(),
                        state: state.clone(),
                    })
                    .collect(),
                target: i.target.clone(),
                free: i.free.clone(),
            },
            Instance::Channel(i) => InstanceJson::Channel {
                input_layout: i.family.global_in().clone(),
                output_layout: i.family.global_out().clone(),
                pairs: i
                    .family
                    .entries()
                    .iter()
                    .map(|(p, ch)| PairJson {
                        input: p.input.clone(),
                        output: p.output.clone(),
                        channel: ch.clone(),
                    })
                    .collect(),
                target: TargetPairJson {
                    input: i.target.input.clone(),
                    output: i.target.output.clone(),
                },
                free: i.free.clone(),
            },
        };
        Ok(serde_json::to_string_pretty(&raw)?)
    }
}

impl From<RmpInstance> for Instance {
    fn from(i: RmpInstance) -> Self {
        Instance::State(i)
    }
}

impl From<ChannelRmpInstance> for Instance {
    fn from(i: ChannelRmpInstance) -> Self {
        Instance::Channel(i)
    }
}

/// Settings and flags a result was produced under.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub library_version: String,
    pub solver: Settings,
    pub tolerances: Tolerances,
    /// Present when the free set was replaced by an outer approximation.
    pub relaxation: Option<Relaxation>,
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn new(solver: Settings, relaxation: Option<Relaxation>, seed: Option<u64>) -> Self {
        Self {
            library_version: env!("CARGO_PKG_VERSION").into(),
            solver,
            tolerances: Tolerances::default(),
            relaxation,
            seed,
        }
    }
}

/// Labelled operators, the shape used for witness blocks in result files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelledOperator {
    pub set: SubsystemSet,
    pub operator: HermitianOperator,
}

/// Position of a JSON syntax or schema error, when known.
pub fn error_position(e: &RmpError) -> Option<(usize, usize)> {
    match e {
        RmpError::Json(j) if j.line() > 0 => Some((j.line(), j.column())),
        _ => None,
    }
}
