//! Line-delimited JSON sidecar protocol.
//!
//! Each line is one JSON object with a `type` tag and a client-assigned `id`.
//! Every request gets exactly one response carrying the same id. Ids must
//! increase strictly within a session. A session runs
//!
//! ```text
//! hello -> { plan_probes -> probe_results -> epoch_plan }*
//! ```
//!
//! with `augment_batch`, `lol_snapshot` and `metrics` allowed at any point
//! after `hello`. Out-of-order requests get an `error` response and leave the
//! session where it was. Lines that are not a JSON object with an integer id
//! are answered with id `-1`.

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use cudaug_core::curriculum::EpochMetrics;
use cudaug_core::lol::{ProbeLevel, ProbePlan};
use cudaug_core::{ClassId, Curriculum, DirectiveAction, ProbeOutcome, SampleId};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::augment::augment_png;
use crate::config::CurriculumSection;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Request {
    Hello {
        v: u32,
        #[serde(default)]
        config: CurriculumSection,
        /// Class id of every training sample, indexed by sample id.
        labels: Vec<ClassId>,
        /// Defaults to one more than the largest label.
        #[serde(default)]
        num_classes: Option<usize>,
    },
    PlanProbes,
    ProbeResults { results: Vec<ClassResult> },
    LolSnapshot,
    EpochPlan,
    AugmentBatch { items: Vec<AugmentItem> },
    Metrics,
}

/// Probe results for one class: either per-level correct counts, or the raw
/// per-probe predictions in plan order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassResult {
    pub class_id: ClassId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictions: Option<Vec<Vec<ClassId>>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentItem {
    /// Base64 PNG.
    pub png: String,
    pub strength: u32,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Response {
    Hello { v: u32, num_classes: usize, num_samples: usize, config: CurriculumSection },
    PlanProbes { epoch: u32, plans: Vec<WirePlan> },
    ProbeResults { epoch: u32, gamma: f64 },
    LolSnapshot { epoch: u32, gamma: f64, levels: Vec<u32>, history: Vec<Vec<u32>> },
    EpochPlan { epoch: u32, directives: Vec<WireDirective> },
    AugmentedBatch { items: Vec<AugmentedItem> },
    Metrics { gamma: f64, epochs: Vec<WireMetrics> },
    Error { code: ErrorCode, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    /// Not JSON, not an object, unknown type or missing fields.
    Malformed,
    /// Request not allowed in the current session state.
    OutOfOrder,
    /// Id not greater than the previous one.
    BadId,
    UnsupportedVersion,
    /// Well-formed request with unusable content.
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub id: i64,
    #[serde(flatten)]
    pub body: T,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireProbe {
    pub sample_id: SampleId,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireLevel {
    pub level: u32,
    pub probes: Vec<WireProbe>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WirePlan {
    pub class_id: ClassId,
    pub levels: Vec<WireLevel>,
}

impl From<&ProbePlan> for WirePlan {
    fn from(p: &ProbePlan) -> Self {
        let level = |l: &ProbeLevel| WireLevel {
            level: l.level,
            probes: l.probes.iter().map(|p| WireProbe { sample_id: p.sample_id, seed: p.seed }).collect(),
        };
        WirePlan { class_id: p.class_id, levels: p.levels.iter().map(level).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WireAction {
    Original,
    Augment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireDirective {
    pub sample_id: SampleId,
    pub class_id: ClassId,
    pub action: WireAction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strength: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentedItem {
    pub png: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireMetrics {
    pub epoch: u32,
    pub gamma: f64,
    pub mean_level: f64,
    pub max_level: u32,
    pub probes: u64,
}

impl From<&EpochMetrics> for WireMetrics {
    fn from(m: &EpochMetrics) -> Self {
        WireMetrics { epoch: m.epoch, gamma: m.gamma, mean_level: m.mean_level, max_level: m.max_level, probes: m.probes }
    }
}

enum Phase {
    AwaitHello,
    /// Between epochs: the next step is `plan_probes`.
    EpochStart,
    /// Probes handed out, waiting for results.
    Probing(Vec<ProbePlan>),
    /// Levels updated, waiting for `epoch_plan`.
    Updated,
}

/// Protocol state for one connection.
pub struct Session {
    phase: Phase,
    curriculum: Option<Curriculum>,
    last_id: Option<i64>,
}

impl Default for Session {
    fn default() -> Self {
        Self::new()
    }
}

type Reply = Result<Response, (ErrorCode, String)>;

impl Session {
    pub fn new() -> Self {
        Self { phase: Phase::AwaitHello, curriculum: None, last_id: None }
    }

    pub fn curriculum(&self) -> Option<&Curriculum> {
        self.curriculum.as_ref()
    }

    /// Handle one request line and return the response line (no newline).
    pub fn handle_line(&mut self, line: &str) -> String {
        let reply = self.handle_value(serde_json::from_str::<Value>(line));
        serde_json::to_string(&reply).expect("responses serialize")
    }

    fn handle_value(&mut self, parsed: serde_json::Result<Value>) -> Envelope<Response> {
        let error = |id, code, message: String| Envelope { id, body: Response::Error { code, message } };
        let value = match parsed {
            Ok(v) => v,
            Err(e) => return error(-1, ErrorCode::Malformed, format!("invalid JSON: {e}")),
        };
        let Some(id) = value.get("id").and_then(Value::as_i64) else {
            return error(-1, ErrorCode::Malformed, "request must be an object with an integer id".into());
        };
        let request: Request = match serde_json::from_value(value) {
            Ok(r) => r,
            Err(e) => return error(id, ErrorCode::Malformed, e.to_string()),
        };
        if let Some(last) = self.last_id.filter(|&last| id <= last) {
            return error(id, ErrorCode::BadId, format!("id {id} not greater than previous id {last}"));
        }
        self.last_id = Some(id);
        match self.handle(request) {
            Ok(body) => Envelope { id, body },
            Err((code, message)) => error(id, code, message),
        }
    }

    /// Apply one decoded request.
    pub fn handle(&mut self, request: Request) -> Reply {
        let out_of_order = |msg: &str| Err((ErrorCode::OutOfOrder, msg.to_string()));
        match request {
            Request::Hello { v, config, labels, num_classes } => {
                if !matches!(self.phase, Phase::AwaitHello) {
                    return out_of_order("session already started");
                }
                self.hello(v, config, labels, num_classes)
            }
            _ if matches!(self.phase, Phase::AwaitHello) => out_of_order("expected hello"),
            Request::PlanProbes => match self.phase {
                Phase::EpochStart => {
                    let cur = self.curriculum.as_ref().unwrap();
                    let plans = cur.plan_probes().map_err(invalid)?;
                    let epoch = cur.table().epoch() + 1;
                    let wire = plans.iter().map(WirePlan::from).collect();
                    self.phase = Phase::Probing(plans);
                    Ok(Response::PlanProbes { epoch, plans: wire })
                }
                Phase::Probing(_) => out_of_order("probes already planned; send probe_results"),
                _ => out_of_order("epoch not finished; send epoch_plan"),
            },
            Request::ProbeResults { results } => {
                let Phase::Probing(plans) = &self.phase else {
                    return out_of_order("no probes outstanding; send plan_probes");
                };
                let outcomes = outcomes_from_results(plans, results)?;
                let cur = self.curriculum.as_mut().unwrap();
                cur.apply_outcomes(&outcomes).map_err(invalid)?;
                let epoch = cur.table().epoch();
                let gamma = cur.metrics().last().map_or(cur.gamma(), |m| m.gamma);
                self.phase = Phase::Updated;
                Ok(Response::ProbeResults { epoch, gamma })
            }
            Request::EpochPlan => {
                if !matches!(self.phase, Phase::Updated) {
                    return out_of_order("levels not updated this epoch; send plan_probes and probe_results");
                }
                let cur = self.curriculum.as_ref().unwrap();
                let plan = cur.epoch_plan().map_err(invalid)?;
                self.phase = Phase::EpochStart;
                Ok(Response::EpochPlan { epoch: plan.epoch, directives: plan.directives.iter().map(wire_directive).collect() })
            }
            Request::LolSnapshot => {
                let cur = self.curriculum.as_ref().unwrap();
                let t = cur.table();
                Ok(Response::LolSnapshot {
                    epoch: t.epoch(),
                    gamma: cur.gamma(),
                    levels: t.levels().to_vec(),
                    history: t.history().to_vec(),
                })
            }
            Request::Metrics => {
                let cur = self.curriculum.as_ref().unwrap();
                Ok(Response::Metrics { gamma: cur.gamma(), epochs: cur.metrics().iter().map(WireMetrics::from).collect() })
            }
            Request::AugmentBatch { items } => augment_batch(&items),
        }
    }

    fn hello(&mut self, v: u32, config: CurriculumSection, labels: Vec<ClassId>, num_classes: Option<usize>) -> Reply {
        if v != PROTOCOL_VERSION {
            return Err((ErrorCode::UnsupportedVersion, format!("protocol version {v} unsupported; server speaks {PROTOCOL_VERSION}")));
        }
        let cfg = config.to_config().map_err(invalid)?;
        let num_classes = num_classes.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
        if num_classes == 0 {
            return Err((ErrorCode::Invalid, "no classes".into()));
        }
        let num_samples = labels.len();
        let cur = Curriculum::new(cfg.clone(), labels, num_classes).map_err(invalid)?;
        self.curriculum = Some(cur);
        self.phase = Phase::EpochStart;
        Ok(Response::Hello { v: PROTOCOL_VERSION, num_classes, num_samples, config: cfg.into() })
    }
}

fn invalid(e: impl ToString) -> (ErrorCode, String) {
    (ErrorCode::Invalid, e.to_string())
}

fn wire_directive(d: &cudaug_core::Directive) -> WireDirective {
    let (action, strength, seed) = match d.action {
        DirectiveAction::Original => (WireAction::Original, None, None),
        DirectiveAction::Augment { strength, seed } => (WireAction::Augment, Some(strength), Some(seed)),
    };
    WireDirective { sample_id: d.sample_id, class_id: d.class_id, action, strength, seed }
}

fn outcomes_from_results(plans: &[ProbePlan], mut results: Vec<ClassResult>) -> Result<Vec<ProbeOutcome>, (ErrorCode, String)> {
    results.sort_by_key(|r| r.class_id);
    if results.len() != plans.len() || results.iter().enumerate().any(|(c, r)| r.class_id != c) {
        return Err((ErrorCode::Invalid, format!("need exactly one result for each of the {} classes", plans.len())));
    }
    results
        .into_iter()
        .zip(plans)
        .map(|(r, plan)| {
            let c = r.class_id;
            let bad = |msg: String| (ErrorCode::Invalid, format!("class {c}: {msg}"));
            match (r.correct, r.predictions) {
                (Some(correct), None) => Ok(ProbeOutcome::new(c, correct)),
                (None, Some(preds)) => {
                    if preds.len() != plan.levels.len() {
                        return Err(bad(format!("expected {} levels of predictions, got {}", plan.levels.len(), preds.len())));
                    }
                    let correct = preds
                        .iter()
                        .zip(&plan.levels)
                        .map(|(p, lvl)| {
                            if p.len() != lvl.probes.len() {
                                return Err(bad(format!("level {}: expected {} predictions, got {}", lvl.level, lvl.probes.len(), p.len())));
                            }
                            Ok(p.iter().filter(|&&y| y == c).count() as u32)
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    Ok(ProbeOutcome::new(c, correct))
                }
                _ => Err(bad("give exactly one of `correct` or `predictions`".into())),
            }
        })
        .collect()
}

fn augment_batch(items: &[AugmentItem]) -> Reply {
    let out: Vec<Result<AugmentedItem, String>> = items
        .par_iter()
        .enumerate()
        .map(|(i, item)| {
            let bytes = B64.decode(&item.png).map_err(|e| format!("item {i}: bad base64: {e}"))?;
            let (png, _) = augment_png(&bytes, item.strength, item.seed).map_err(|e| format!("item {i}: {e}"))?;
            Ok(AugmentedItem { png: B64.encode(png) })
        })
        .collect();
    let items = out.into_iter().collect::<Result<Vec<_>, _>>().map_err(|e| (ErrorCode::Invalid, e))?;
    Ok(Response::AugmentedBatch { items })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn send(s: &mut Session, v: Value) -> Value {
        serde_json::from_str(&s.handle_line(&v.to_string())).unwrap()
    }

    #[test]
    fn hello_round_trip() {
        let mut s = Session::new();
        let r = send(&mut s, json!({"type": "hello", "id": 1, "v": 1, "labels": [0, 1, 1]}));
        assert_eq!(r["type"], "hello");
        assert_eq!(r["id"], 1);
        assert_eq!(r["v"], 1);
        assert_eq!(r["num_classes"], 2);
        assert_eq!(r["config"]["gamma"], 0.6);
    }

    #[test]
    fn version_and_ordering_errors() {
        let mut s = Session::new();
        let r = send(&mut s, json!({"type": "plan_probes", "id": 1}));
        assert_eq!(r["code"], "out_of_order");
        let r = send(&mut s, json!({"type": "hello", "id": 2, "v": 2, "labels": [0]}));
        assert_eq!(r["code"], "unsupported_version");
        let r = send(&mut s, json!({"type": "hello", "id": 3, "v": 1, "labels": [0]}));
        assert_eq!(r["type"], "hello");
        let r = send(&mut s, json!({"type": "hello", "id": 4, "v": 1, "labels": [0]}));
        assert_eq!(r["code"], "out_of_order");
        let r = send(&mut s, json!({"type": "epoch_plan", "id": 5}));
        assert_eq!(r["code"], "out_of_order");
        let r = send(&mut s, json!({"type": "lol_snapshot", "id": 5}));
        assert_eq!(r["code"], "bad_id");
    }

    #[test]
    fn malformed_lines_get_minus_one() {
        let mut s = Session::new();
        for line in ["", "{", "[]", "42", "{\"type\":\"hello\"}", "{\"id\":\"x\"}"] {
            let r: Value = serde_json::from_str(&s.handle_line(line)).unwrap();
            assert_eq!(r["id"], -1, "{line}");
            assert_eq!(r["code"], "malformed");
        }
        let r = send(&mut s, json!({"type": "nope", "id": 7}));
        assert_eq!((r["id"].as_i64(), r["code"].as_str()), (Some(7), Some("malformed")));
    }
}
