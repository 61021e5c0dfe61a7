mod fuzzy;
mod hypothesis;
mod scoring;

pub use fuzzy::{fuzzy_score, levenshtein, normalize};
pub use hypothesis::{
    empty_hypothesis, load_hypotheses, parse_hypotheses, serialize_hypotheses, HypothesisDialogue,
    HypothesisFrame, HypothesisState, HypothesisTurn,
};
pub use scoring::{
    active_intent_accuracy, aggregate, average_goal_accuracy, evaluate, frame_scores, joint_goal_accuracy,
    per_slot_scores, requested_f1, requested_slot_f1, EvalBucket, EvalError, EvalReport, FrameScore, MetricSet,
    SlotScore,
};
