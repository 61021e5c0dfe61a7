//! Dialogue state tracking metrics: active intent accuracy, requested slot
//! F1, average goal accuracy and joint goal accuracy, bucketed by seen and
//! unseen services.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::fuzzy::fuzzy_score;
use super::hypothesis::{HypothesisDialogue, HypothesisState};
use crate::corpus::{Dialogue, FrameState, Speaker};
use crate::schema::{SchemaSet, ServiceSchema};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("hypothesis dialogue `{0}` is not in the reference corpus")]
    UnknownDialogue(String),
    #[error("hypothesis dialogue `{0}` appears more than once")]
    DuplicateDialogue(String),
    #[error("dialogue `{dialogue_id}` turn {turn}: more than one hypothesis frame for `{service}`")]
    DuplicateFrame {
        dialogue_id: String,
        turn: usize,
        service: String,
    },
    #[error("dialogue `{dialogue_id}`: no schema for service `{service}`")]
    UnknownService { dialogue_id: String, service: String },
}

/// Score of every slot in the reference or hypothesis state. Categorical
/// slots need an exact match with some reference variant; other slots take
/// the best fuzzy score over the variants. A slot present on one side only
/// scores 0.
pub fn per_slot_scores(
    reference: &FrameState,
    hypothesis: &HypothesisState,
    schema: &ServiceSchema,
) -> IndexMap<String, f64> {
    let mut scores = IndexMap::new();
    for (slot, variants) in &reference.slot_values {
        let score = match hypothesis.slot_values.get(slot) {
            None => 0.0,
            Some(value) if schema.is_categorical(slot) => f64::from(u8::from(variants.contains(value))),
            Some(value) => variants.iter().map(|v| fuzzy_score(value, v)).fold(0.0, f64::max),
        };
        scores.insert(slot.clone(), score);
    }
    for slot in hypothesis.slot_values.keys() {
        if !reference.slot_values.contains_key(slot) {
            scores.insert(slot.clone(), 0.0);
        }
    }
    scores
}

/// Set F1 of requested slots; `None` when both sets are empty.
pub fn requested_f1(reference: &[String], hypothesis: &[String]) -> Option<f64> {
    let r: BTreeSet<&String> = reference.iter().collect();
    let h: BTreeSet<&String> = hypothesis.iter().collect();
    if r.is_empty() && h.is_empty() {
        return None;
    }
    if r.is_empty() || h.is_empty() {
        return Some(0.0);
    }
    let hits = r.intersection(&h).count() as f64;
    if hits == 0.0 {
        return Some(0.0);
    }
    let precision = hits / h.len() as f64;
    let recall = hits / r.len() as f64;
    Some(2.0 * precision * recall / (precision + recall))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotScore {
    pub slot: String,
    pub score: f64,
    /// Whether the reference state has the slot; only these enter average
    /// goal accuracy.
    pub in_reference: bool,
}

/// Scores of one reference user frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameScore {
    pub dialogue_id: String,
    pub turn: usize,
    pub service: String,
    pub hypothesis_present: bool,
    pub intent_correct: bool,
    pub requested_f1: Option<f64>,
    pub slots: Vec<SlotScore>,
    /// Product of all slot scores; 0 when the hypothesis frame is missing.
    pub joint: f64,
}

fn score_frame(
    dialogue_id: &str,
    turn: usize,
    service: &str,
    reference: &FrameState,
    hypothesis: Option<&HypothesisState>,
    schema: &ServiceSchema,
) -> FrameScore {
    let Some(hyp) = hypothesis else {
        return FrameScore {
            dialogue_id: dialogue_id.to_string(),
            turn,
            service: service.to_string(),
            hypothesis_present: false,
            intent_correct: false,
            requested_f1: requested_f1(&reference.requested_slots, &[]),
            slots: reference
                .slot_values
                .keys()
                .map(|slot| SlotScore {
                    slot: slot.clone(),
                    score: 0.0,
                    in_reference: true,
                })
                .collect(),
            joint: 0.0,
        };
    };
    let scores = per_slot_scores(reference, hyp, schema);
    FrameScore {
        dialogue_id: dialogue_id.to_string(),
        turn,
        service: service.to_string(),
        hypothesis_present: true,
        intent_correct: hyp.active_intent == reference.active_intent,
        requested_f1: requested_f1(&reference.requested_slots, &hyp.requested_slots),
        joint: scores.values().product(),
        slots: scores
            .into_iter()
            .map(|(slot, score)| SlotScore {
                in_reference: reference.slot_values.contains_key(&slot),
                slot,
                score,
            })
            .collect(),
    }
}

fn index_hypotheses<'h>(
    refs: &[Dialogue],
    hyps: &'h [HypothesisDialogue],
) -> Result<HashMap<&'h str, &'h HypothesisDialogue>, EvalError> {
    let known: BTreeSet<&str> = refs.iter().map(|d| d.dialogue_id.as_str()).collect();
    let mut by_id = HashMap::new();
    for h in hyps {
        if !known.contains(h.dialogue_id.as_str()) {
            return Err(EvalError::UnknownDialogue(h.dialogue_id.clone()));
        }
        if by_id.insert(h.dialogue_id.as_str(), h).is_some() {
            return Err(EvalError::DuplicateDialogue(h.dialogue_id.clone()));
        }
        for (t, turn) in h.turns.iter().enumerate() {
            let mut services = BTreeSet::new();
            for f in &turn.frames {
                if !services.insert(&f.service) {
                    return Err(EvalError::DuplicateFrame {
                        dialogue_id: h.dialogue_id.clone(),
                        turn: t,
                        service: f.service.clone(),
                    });
                }
            }
        }
    }
    Ok(by_id)
}

fn score_dialogue(
    d: &Dialogue,
    hyp: Option<&HypothesisDialogue>,
    schemas: &SchemaSet,
) -> Result<(Vec<FrameScore>, Option<String>), EvalError> {
    let mut out = Vec::new();
    let mut missing = 0usize;
    for (t, turn) in d.turns.iter().enumerate() {
        if turn.speaker != Speaker::User {
            continue;
        }
        for frame in &turn.frames {
            let Some(state) = &frame.state else { continue };
            let schema = schemas.get(&frame.service).ok_or_else(|| EvalError::UnknownService {
                dialogue_id: d.dialogue_id.clone(),
                service: frame.service.clone(),
            })?;
            let hyp_state = hyp
                .and_then(|h| h.turns.get(t))
                .and_then(|ht| ht.frames.iter().find(|f| f.service == frame.service))
                .and_then(|f| f.state.as_ref());
            if hyp_state.is_none() {
                missing += 1;
            }
            out.push(score_frame(&d.dialogue_id, t, &frame.service, state, hyp_state, schema));
        }
    }
    let warning = match (hyp, missing) {
        (_, 0) => None,
        (None, n) => Some(format!("dialogue `{}` has no hypothesis; its {n} frames score 0", d.dialogue_id)),
        (Some(_), n) => Some(format!("dialogue `{}`: {n} frames have no hypothesis and score 0", d.dialogue_id)),
    };
    Ok((out, warning))
}

/// Per-frame scores for every reference user frame, in document order.
pub fn frame_scores(
    refs: &[Dialogue],
    hyps: &[HypothesisDialogue],
    schemas: &SchemaSet,
) -> Result<(Vec<FrameScore>, Vec<String>), EvalError> {
    let by_id = index_hypotheses(refs, hyps)?;
    let per_dialogue: Vec<(Vec<FrameScore>, Option<String>)> = refs
        .par_iter()
        .map(|d| score_dialogue(d, by_id.get(d.dialogue_id.as_str()).copied(), schemas))
        .collect::<Result<_, _>>()?;
    let mut frames = Vec::new();
    let mut warnings = Vec::new();
    for (f, w) in per_dialogue {
        frames.extend(f);
        warnings.extend(w);
    }
    Ok((frames, warnings))
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Sum {
    sum: f64,
    compensation: f64,
}

impl Sum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricSet<T> {
    pub active_intent_accuracy: T,
    pub requested_slot_f1: T,
    pub average_goal_accuracy: T,
    pub joint_goal_accuracy: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalBucket {
    pub label: String,
    /// `None` when the metric's denominator is zero.
    pub active_intent_accuracy: Option<f64>,
    pub requested_slot_f1: Option<f64>,
    pub average_goal_accuracy: Option<f64>,
    pub joint_goal_accuracy: Option<f64>,
    pub numerators: MetricSet<f64>,
    pub denominators: MetricSet<usize>,
}

impl EvalBucket {
    pub fn metrics(&self) -> [(&'static str, Option<f64>); 4] {
        [
            ("active_intent_accuracy", self.active_intent_accuracy),
            ("requested_slot_f1", self.requested_slot_f1),
            ("average_goal_accuracy", self.average_goal_accuracy),
            ("joint_goal_accuracy", self.joint_goal_accuracy),
        ]
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct Accumulator {
    sums: [Sum; 4],
    counts: [usize; 4],
}

impl Accumulator {
    fn add(&mut self, f: &FrameScore) {
        self.push(0, f64::from(u8::from(f.intent_correct)));
        if let Some(v) = f.requested_f1 {
            self.push(1, v);
        }
        for s in f.slots.iter().filter(|s| s.in_reference) {
            self.push(2, s.score);
        }
        self.push(3, f.joint);
    }

    fn push(&mut self, metric: usize, x: f64) {
        self.sums[metric].add(x);
        self.counts[metric] += 1;
    }

    fn bucket(&self, label: &str) -> EvalBucket {
        let value = |i: usize| (self.counts[i] > 0).then(|| self.sums[i].value() / self.counts[i] as f64);
        EvalBucket {
            label: label.to_string(),
            active_intent_accuracy: value(0),
            requested_slot_f1: value(1),
            average_goal_accuracy: value(2),
            joint_goal_accuracy: value(3),
            numerators: MetricSet {
                active_intent_accuracy: self.sums[0].value(),
                requested_slot_f1: self.sums[1].value(),
                average_goal_accuracy: self.sums[2].value(),
                joint_goal_accuracy: self.sums[3].value(),
            },
            denominators: MetricSet {
                active_intent_accuracy: self.counts[0],
                requested_slot_f1: self.counts[1],
                average_goal_accuracy: self.counts[2],
                joint_goal_accuracy: self.counts[3],
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// ALL, SEEN and UNSEEN, in that order.
    pub buckets: Vec<EvalBucket>,
    pub per_service: BTreeMap<String, EvalBucket>,
    pub seen_services: Vec<String>,
    pub frames_scored: usize,
    pub warnings: Vec<String>,
}

impl EvalReport {
    pub fn bucket(&self, label: &str) -> Option<&EvalBucket> {
        self.buckets.iter().find(|b| b.label == label)
    }

    pub fn all(&self) -> &EvalBucket {
        &self.buckets[0]
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let cell = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"));
        let _ = writeln!(out, "{:<24} {:>8} {:>8} {:>8} {:>8}", "bucket", "intent", "req_f1", "avg_ga", "joint_ga");
        for b in self.buckets.iter().chain(self.per_service.values()) {
            let _ = writeln!(
                out,
                "{:<24} {:>8} {:>8} {:>8} {:>8}",
                b.label,
                cell(b.active_intent_accuracy),
                cell(b.requested_slot_f1),
                cell(b.average_goal_accuracy),
                cell(b.joint_goal_accuracy)
            );
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}

/// Aggregates frame scores into ALL/SEEN/UNSEEN and per-service buckets.
/// Sums run in document order, so the result does not depend on how the
/// per-dialogue scoring was scheduled.
pub fn aggregate(frames: &[FrameScore], seen_services: &BTreeSet<String>, warnings: Vec<String>) -> EvalReport {
    let mut all = Accumulator::default();
    let mut seen = Accumulator::default();
    let mut unseen = Accumulator::default();
    let mut per_service: BTreeMap<String, Accumulator> = BTreeMap::new();
    for f in frames {
        all.add(f);
        if seen_services.contains(&f.service) {
            seen.add(f);
        } else {
            unseen.add(f);
        }
        per_service.entry(f.service.clone()).or_default().add(f);
    }
    EvalReport {
        buckets: vec![all.bucket("ALL"), seen.bucket("SEEN"), unseen.bucket("UNSEEN")],
        per_service: per_service.iter().map(|(s, a)| (s.clone(), a.bucket(s))).collect(),
        seen_services: seen_services.iter().cloned().collect(),
        frames_scored: frames.len(),
        warnings,
    }
}

/// Scores `hyps` against `refs`. Frames whose service is in
/// `seen_services` count as SEEN, all others as UNSEEN.
pub fn evaluate(
    refs: &[Dialogue],
    hyps: &[HypothesisDialogue],
    schemas: &SchemaSet,
    seen_services: &BTreeSet<String>,
) -> Result<EvalReport, EvalError> {
    let (frames, warnings) = frame_scores(refs, hyps, schemas)?;
    Ok(aggregate(&frames, seen_services, warnings))
}

pub fn active_intent_accuracy(
    refs: &[Dialogue],
    hyps: &[HypothesisDialogue],
    schemas: &SchemaSet,
) -> Result<Option<f64>, EvalError> {
    Ok(evaluate(refs, hyps, schemas, &BTreeSet::new())?.all().active_intent_accuracy)
}

pub fn requested_slot_f1(
    refs: &[Dialogue],
    hyps: &[HypothesisDialogue],
    schemas: &SchemaSet,
) -> Result<Option<f64>, EvalError> {
    Ok(evaluate(refs, hyps, schemas, &BTreeSet::new())?.all().requested_slot_f1)
}

pub fn average_goal_accuracy(
    refs: &[Dialogue],
    hyps: &[HypothesisDialogue],
    schemas: &SchemaSet,
) -> Result<Option<f64>, EvalError> {
    Ok(evaluate(refs, hyps, schemas, &BTreeSet::new())?.all().average_goal_accuracy)
}

pub fn joint_goal_accuracy(
    refs: &[Dialogue],
    hyps: &[HypothesisDialogue],
    schemas: &SchemaSet,
) -> Result<Option<f64>, EvalError> {
    Ok(evaluate(refs, hyps, schemas, &BTreeSet::new())?.all().joint_goal_accuracy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;

    fn restaurants() -> ServiceSchema {
        bundled::simulation_schemas().get("Restaurants_1").unwrap().clone()
    }

    fn reference(pairs: &[(&str, &[&str])]) -> FrameState {
        FrameState {
            active_intent: "FindRestaurants".into(),
            requested_slots: vec![],
            slot_values: pairs
                .iter()
                .map(|(s, v)| (s.to_string(), v.iter().map(|x| x.to_string()).collect()))
                .collect(),
        }
    }

    fn hypothesis(pairs: &[(&str, &str)]) -> HypothesisState {
        HypothesisState {
            active_intent: "FindRestaurants".into(),
            requested_slots: vec![],
            slot_values: pairs.iter().map(|(s, v)| (s.to_string(), v.to_string())).collect(),
        }
    }

    #[test]
    fn identical_single_slot_scores_one() {
        let s = per_slot_scores(&reference(&[("city", &["Oakland"])]), &hypothesis(&[("city", "Oakland")]), &restaurants());
        assert_eq!(s["city"], 1.0);
    }

    #[test]
    fn best_variant_wins() {
        let s = per_slot_scores(&reference(&[("time", &["6 pm", "18:00"])]), &hypothesis(&[("time", "6pm")]), &restaurants());
        assert_eq!(s["time"], 0.75);
    }

    #[test]
    fn extra_hypothesis_slot_scores_zero() {
        let s = per_slot_scores(&reference(&[]), &hypothesis(&[("city", "Oakland")]), &restaurants());
        assert_eq!(s["city"], 0.0);
    }

    #[test]
    fn categorical_needs_exact_match() {
        let s = per_slot_scores(
            &reference(&[("cuisine", &["Italian"])]),
            &hypothesis(&[("cuisine", "italian")]),
            &restaurants(),
        );
        assert_eq!(s["cuisine"], 0.0);
    }

    #[test]
    fn requested_f1_cases() {
        let r = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert!((requested_f1(&r(&["price", "location"]), &r(&["price"])).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(requested_f1(&r(&[]), &r(&[])), None);
        assert_eq!(requested_f1(&r(&[]), &r(&["price"])), Some(0.0));
        assert_eq!(requested_f1(&r(&["a"]), &r(&["b"])), Some(0.0));
    }

    #[test]
    fn compensated_sum_is_order_independent_on_tenths() {
        let mut a = Sum::default();
        let mut b = Sum::default();
        let xs: Vec<f64> = (0..1000).map(|i| 0.1 * (i % 7) as f64).collect();
        xs.iter().for_each(|&x| a.add(x));
        xs.iter().rev().for_each(|&x| b.add(x));
        assert_eq!(a.value(), b.value());
    }
}
