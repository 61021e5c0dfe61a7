//! Release gate. Each test checks one numbered criterion and prints one
//! `ACCEPTANCE <n> PASS|FAIL|SKIP` line with the measured values and the
//! tolerance used. Run with `--nocapture` to see the lines.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use proptest::sample::Index;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use sgd_core::bundled;
use sgd_core::corpus::{
    act, load_dialogues, parse_dialogues, serialize_dialogues, validate_dialogue, Dialogue, FrameState, Speaker,
};
use sgd_core::json::Strictness;
use sgd_core::metrics::{evaluate, frame_scores, load_hypotheses, EvalBucket, EvalReport, HypothesisDialogue};
use sgd_core::schema::{load_schemas, parse_schemas, serialize_schemas, validate_collection, SchemaSet, SlotDef};
use sgd_core::sim::{flow_signature, generate_corpus, CorpusOptions};
use sgd_core::stats::compute_stats;
use sgd_core::tracker::oracle_track;

const SCORE_TOL: f64 = 1e-9;

fn line(n: &str, verdict: &str, detail: &str) {
    println!("ACCEPTANCE {n} {verdict}: {detail}");
}

fn gate(n: &str, ok: bool, detail: &str) {
    line(n, if ok { "PASS" } else { "FAIL" }, detail);
    assert!(ok, "criterion {n} failed: {detail}");
}

fn repo(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn dataset_split(split: &str) -> Option<PathBuf> {
    let root = PathBuf::from(std::env::var_os("SGD_DATA_DIR")?);
    let dir = root.join(split);
    dir.join("schema.json").is_file().then_some(dir)
}

fn schema_set(path: &Path) -> SchemaSet {
    SchemaSet::new(load_schemas(path, Strictness::Strict).unwrap().value)
}

fn generated(n: usize, seed: u64) -> Vec<Dialogue> {
    let schemas = bundled::simulation_schemas();
    let tables = bundled::simulation_tables(&schemas).unwrap();
    generate_corpus(
        &schemas,
        &tables,
        &bundled::automaton_config(),
        &bundled::templates(),
        n,
        seed,
        CorpusOptions::default(),
    )
    .unwrap()
    .dialogues
}

/// Strict parse, zero validation errors, and serialize→parse identity.
fn interop_check(dir: &Path) -> Result<(usize, usize), String> {
    let schema_bytes = std::fs::read(dir.join("schema.json")).map_err(|e| e.to_string())?;
    let services = parse_schemas(&schema_bytes).map_err(|e| format!("schema: {e}"))?;
    let report = validate_collection(&services);
    if !report.is_ok() {
        return Err(format!("schema validation: {}", report.errors[0]));
    }
    let again = parse_schemas(&serialize_schemas(&services).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    if again != services {
        return Err("schema round trip differs".into());
    }
    let schemas = SchemaSet::new(services);
    let parsed = load_dialogues(dir, Strictness::Strict).map_err(|e| e.to_string())?;
    if !parsed.warnings.is_empty() {
        return Err(format!("{} parse warnings", parsed.warnings.len()));
    }
    for d in &parsed.value {
        let r = validate_dialogue(d, &schemas);
        if !r.is_ok() {
            return Err(format!("{}: {}", d.dialogue_id, r.errors[0]));
        }
    }
    let again = parse_dialogues(&serialize_dialogues(&parsed.value)).map_err(|e| e.to_string())?;
    if again != parsed.value {
        return Err("dialogue round trip differs".into());
    }
    Ok((schemas.len(), parsed.value.len()))
}

#[test]
fn criterion_1_format_interop() {
    let limit = Duration::from_secs(30);
    let start = Instant::now();
    let fixture = interop_check(&repo("fixtures/released"));
    let elapsed = start.elapsed();
    let ok = matches!(fixture, Ok((s, d)) if s >= 2 && d >= 3) && elapsed < limit;
    gate(
        "1",
        ok,
        &format!("released-format fixture {fixture:?} (need >=2 services, >=3 dialogues) in {elapsed:?} (limit 30 s)"),
    );
    match dataset_split("train") {
        Some(dir) => {
            let start = Instant::now();
            let real = interop_check(&dir);
            let elapsed = start.elapsed();
            gate(
                "1-dataset",
                real.is_ok() && elapsed < limit,
                &format!("{} {real:?} in {elapsed:?} (limit 30 s)", dir.display()),
            );
        }
        None => line("1-dataset", "SKIP", "SGD_DATA_DIR unset or has no train split; fixture substitutes"),
    }
}

fn all_exactly_one(r: &EvalReport) -> Result<(), String> {
    for b in &r.buckets {
        for (name, v) in b.metrics() {
            if v != Some(1.0) {
                return Err(format!("{} {name} = {v:?}", b.label));
            }
        }
    }
    Ok(())
}

#[test]
fn criterion_2_oracle_identity() {
    let start = Instant::now();
    let refs = generated(100, 2);
    let services: BTreeSet<&str> = refs.iter().flat_map(|d| d.services.iter().map(String::as_str)).collect();
    let seen = BTreeSet::from(["Restaurants_1".to_string(), "Hotels_1".to_string()]);
    let report = evaluate(&refs, &oracle_track(&refs), &bundled::simulation_schemas(), &seen).unwrap();
    let elapsed = start.elapsed();
    let exact = all_exactly_one(&report);
    gate(
        "2",
        exact.is_ok() && services.len() >= 2 && elapsed < Duration::from_secs(10),
        &format!(
            "100 dialogues over {} services; all 4 metrics x 3 buckets == 1.0 exactly: {exact:?}; {elapsed:?} (limit 10 s)",
            services.len()
        ),
    );
}

fn fraction(s: &str) -> Option<f64> {
    if s.is_empty() {
        return None;
    }
    Some(match s.split_once('/') {
        Some((n, d)) => n.parse::<f64>().unwrap() / d.parse::<f64>().unwrap(),
        None => s.parse().unwrap(),
    })
}

#[test]
fn criterion_3_hand_enumerated_scoring() {
    let schemas = schema_set(&repo("fixtures/eval"));
    let refs = load_dialogues(&repo("fixtures/eval/ref.json"), Strictness::Strict).unwrap().value;
    let hyps = load_hypotheses(&repo("fixtures/eval/hyp.json"), Strictness::Strict).unwrap().value;
    let (frames, _) = frame_scores(&refs, &hyps, &schemas).unwrap();
    let mut worst: f64 = 0.0;
    let mut mismatches = Vec::new();

    let mut frame_rows = csv::Reader::from_path(repo("fixtures/eval/frame_scores.csv")).unwrap();
    let frame_rows: Vec<csv::StringRecord> = frame_rows.records().map(Result::unwrap).collect();
    for (f, e) in frames.iter().zip(&frame_rows) {
        let key = (f.dialogue_id.as_str(), f.turn.to_string(), f.service.as_str());
        if key != (&e[0], e[1].to_string(), &e[2]) || f.intent_correct != (&e[3] == "1") {
            mismatches.push(format!("{key:?}"));
        }
        match (f.requested_f1, fraction(&e[4])) {
            (Some(a), Some(b)) => worst = worst.max((a - b).abs()),
            (None, None) => {}
            other => mismatches.push(format!("{key:?} requested {other:?}")),
        }
        worst = worst.max((f.joint - fraction(&e[5]).unwrap()).abs());
    }
    let mut slot_rows = csv::Reader::from_path(repo("fixtures/eval/slot_scores.csv")).unwrap();
    let slot_rows: Vec<csv::StringRecord> = slot_rows.records().map(Result::unwrap).collect();
    let slots: Vec<_> = frames.iter().flat_map(|f| f.slots.iter().map(move |s| (f, s))).collect();
    for ((f, s), e) in slots.iter().zip(&slot_rows) {
        if (f.dialogue_id.as_str(), s.slot.as_str()) != (&e[0], &e[3]) || s.in_reference != (&e[4] == "true") {
            mismatches.push(format!("{} {}", f.dialogue_id, s.slot));
        }
        worst = worst.max((s.score - fraction(&e[5]).unwrap()).abs());
    }
    let fuzzy_cases: Vec<f64> = slots
        .iter()
        .filter(|(_, s)| s.score > 0.0 && s.score < 1.0)
        .map(|(_, s)| s.score)
        .collect();
    let ok = mismatches.is_empty()
        && frames.len() == frame_rows.len()
        && slots.len() == slot_rows.len()
        && worst <= SCORE_TOL
        && fuzzy_cases.len() == 2;
    gate(
        "3",
        ok,
        &format!(
            "{} frames, {} slot scores vs hand tables; max |diff| {worst:e} (tol 1e-9); fuzzy cases {fuzzy_cases:?}; mismatches {mismatches:?}",
            frames.len(),
            slots.len()
        ),
    );
}

fn degradation_corpus() -> &'static (Vec<Dialogue>, SchemaSet, EvalReport) {
    static DATA: OnceLock<(Vec<Dialogue>, SchemaSet, EvalReport)> = OnceLock::new();
    DATA.get_or_init(|| {
        let refs = generated(40, 4);
        let schemas = bundled::simulation_schemas();
        let base = evaluate(&refs, &oracle_track(&refs), &schemas, &BTreeSet::new()).unwrap();
        (refs, schemas, base)
    })
}

/// Checks that exactly the `lowered` metrics dropped in ALL and nothing
/// else moved by more than the tolerance.
fn only_lowered(base: &EvalBucket, after: &EvalBucket, lowered: &[&str]) -> Result<(), String> {
    for ((name, b), (_, a)) in base.metrics().into_iter().zip(after.metrics()) {
        let (b, a) = (b.unwrap_or(0.0), a.unwrap_or(0.0));
        if lowered.contains(&name) {
            if a >= b - SCORE_TOL {
                return Err(format!("{name} did not drop ({b} -> {a})"));
            }
        } else if (a - b).abs() > SCORE_TOL {
            return Err(format!("{name} moved ({b} -> {a})"));
        }
    }
    Ok(())
}

fn hyp_state<'h>(
    hyps: &'h mut [HypothesisDialogue],
    d: usize,
    t: usize,
    service: &str,
) -> &'h mut sgd_core::metrics::HypothesisState {
    hyps[d].turns[t]
        .frames
        .iter_mut()
        .find(|f| f.service == service)
        .and_then(|f| f.state.as_mut())
        .unwrap()
}

#[test]
fn criterion_4_degradation() {
    let (refs, schemas, base) = degradation_corpus();
    let mut slots = Vec::new();
    let mut frames = Vec::new();
    for (d, dialogue) in refs.iter().enumerate() {
        for (t, turn) in dialogue.turns.iter().enumerate() {
            for f in &turn.frames {
                let Some(state) = &f.state else { continue };
                frames.push((d, t, f.service.clone()));
                for slot in state.slot_values.keys() {
                    if !schemas.get(&f.service).unwrap().is_categorical(slot) {
                        slots.push((d, t, f.service.clone(), slot.clone()));
                    }
                }
            }
        }
    }
    let cases = 200;
    let mut runner = TestRunner::new(Config::with_cases(cases));
    let slot_result = runner.run(&proptest::arbitrary::any::<Index>(), |pick| {
        let (d, t, service, slot) = pick.get(&slots).clone();
        let mut hyps = oracle_track(refs);
        hyp_state(&mut hyps, d, t, &service).slot_values.insert(slot, "#corrupted#".into());
        let after = evaluate(refs, &hyps, schemas, &BTreeSet::new()).unwrap();
        only_lowered(base.all(), after.all(), &["average_goal_accuracy", "joint_goal_accuracy"])
            .map_err(TestCaseError::fail)
    });
    let mut runner = TestRunner::new(Config::with_cases(cases));
    let intent_result = runner.run(&proptest::arbitrary::any::<Index>(), |pick| {
        let (d, t, service) = pick.get(&frames).clone();
        let mut hyps = oracle_track(refs);
        hyp_state(&mut hyps, d, t, &service).active_intent = "#corrupted#".into();
        let after = evaluate(refs, &hyps, schemas, &BTreeSet::new()).unwrap();
        only_lowered(base.all(), after.all(), &["active_intent_accuracy"]).map_err(TestCaseError::fail)
    });
    gate(
        "4",
        slot_result.is_ok() && intent_result.is_ok(),
        &format!(
            "{cases} non-categorical value corruptions lower only avg/joint GA: {slot_result:?}; {cases} intent corruptions lower only intent accuracy: {intent_result:?} (tol 1e-9)"
        ),
    );
}

fn bucket_sums(r: &EvalReport) -> bool {
    let [all, seen, unseen] = [&r.buckets[0], &r.buckets[1], &r.buckets[2]];
    let (a, s, u) = (all.denominators, seen.denominators, unseen.denominators);
    let (an, sn, un) = (all.numerators, seen.numerators, unseen.numerators);
    a.active_intent_accuracy == s.active_intent_accuracy + u.active_intent_accuracy
        && a.requested_slot_f1 == s.requested_slot_f1 + u.requested_slot_f1
        && a.average_goal_accuracy == s.average_goal_accuracy + u.average_goal_accuracy
        && a.joint_goal_accuracy == s.joint_goal_accuracy + u.joint_goal_accuracy
        && (an.active_intent_accuracy - sn.active_intent_accuracy - un.active_intent_accuracy).abs() <= SCORE_TOL
        && (an.requested_slot_f1 - sn.requested_slot_f1 - un.requested_slot_f1).abs() <= SCORE_TOL
        && (an.average_goal_accuracy - sn.average_goal_accuracy - un.average_goal_accuracy).abs() <= SCORE_TOL
        && (an.joint_goal_accuracy - sn.joint_goal_accuracy - un.joint_goal_accuracy).abs() <= SCORE_TOL
}

#[test]
fn criterion_5_metric_definitions() {
    let schemas = schema_set(&repo("fixtures/eval"));
    let refs = load_dialogues(&repo("fixtures/eval/ref.json"), Strictness::Strict).unwrap().value;
    let hyps = load_hypotheses(&repo("fixtures/eval/hyp.json"), Strictness::Strict).unwrap().value;
    let seen = BTreeSet::from(["Restaurants_1".to_string()]);
    let base = evaluate(&refs, &hyps, &schemas, &seen).unwrap();

    let mut widened = schemas.services().to_vec();
    for s in &mut widened {
        s.slots.push(SlotDef {
            name: "always_empty".into(),
            description: "Never mentioned".into(),
            is_categorical: true,
            possible_values: vec!["x".into()],
        });
    }
    let exclusion = evaluate(&refs, &hyps, &SchemaSet::new(widened), &seen).unwrap() == base;

    // Five user frames, one with requested slots on either side.
    let user_frames = refs
        .iter()
        .flat_map(|d| &d.turns)
        .filter(|t| t.speaker == Speaker::User)
        .map(|t| t.frames.len())
        .sum::<usize>();
    let skip = base.all().denominators.requested_slot_f1 == 1 && user_frames == 5;

    let big = generated(60, 5);
    let big_seen = BTreeSet::from(["Movies_1".to_string(), "RideSharing_1".to_string()]);
    let big_report = evaluate(&big, &oracle_track(&big), &bundled::simulation_schemas(), &big_seen).unwrap();
    let sums = bucket_sums(&base) && bucket_sums(&big_report);

    gate(
        "5",
        exclusion && skip && sums,
        &format!(
            "always-empty slot changes nothing: {exclusion}; both-empty requested frames skipped (denominator 1 of {user_frames} frames): {skip}; SEEN+UNSEEN == ALL (tol 1e-9): {sums}"
        ),
    );
}

/// Rebuilds user states from user acts: INFORM and SELECT set values,
/// AFFIRM adopts the preceding CONFIRMs, INFORM_INTENT and AFFIRM_INTENT
/// set the intent, REQUEST fills requested slots.
fn replay_matches(d: &Dialogue) -> bool {
    let mut states: BTreeMap<String, FrameState> = BTreeMap::new();
    for (t, turn) in d.turns.iter().enumerate() {
        if turn.speaker != Speaker::User {
            continue;
        }
        for frame in &turn.frames {
            let state = states.entry(frame.service.clone()).or_insert_with(FrameState::none);
            state.requested_slots.clear();
            for a in &frame.actions {
                let slot = a.slot.clone().unwrap_or_default();
                match a.act.as_str() {
                    act::INFORM_INTENT => state.active_intent = a.values[0].clone(),
                    act::INFORM | act::SELECT => {
                        state.slot_values.insert(slot, a.values.clone());
                    }
                    act::REQUEST => state.requested_slots.push(slot),
                    act::AFFIRM | act::AFFIRM_INTENT => {
                        let Some(system) = t.checked_sub(1).and_then(|p| d.turns[p].frame(&frame.service)) else {
                            return false;
                        };
                        for s in &system.actions {
                            if a.act == act::AFFIRM && s.act == act::CONFIRM {
                                state.slot_values.insert(s.slot.clone().unwrap_or_default(), s.values.clone());
                            }
                            if a.act == act::AFFIRM_INTENT && s.act == act::OFFER_INTENT {
                                state.active_intent = s.values[0].clone();
                            }
                        }
                    }
                    _ => {}
                }
            }
            if frame.state.as_ref() != Some(&*state) {
                return false;
            }
        }
    }
    true
}

/// Every service call names its intent's required slots, each already in
/// the latest user state for that service.
fn calls_follow_required_slots(d: &Dialogue, schemas: &SchemaSet) -> bool {
    let mut last: BTreeMap<&str, &FrameState> = BTreeMap::new();
    for turn in &d.turns {
        for frame in &turn.frames {
            if let Some(s) = &frame.state {
                last.insert(&frame.service, s);
            }
            let Some(call) = &frame.service_call else { continue };
            let Some(intent) = schemas.get(&frame.service).and_then(|s| s.intent(&call.method)) else {
                return false;
            };
            let Some(state) = last.get(frame.service.as_str()) else {
                return false;
            };
            if intent
                .required_slots
                .iter()
                .any(|s| !call.parameters.contains_key(s) || !state.slot_values.contains_key(s))
            {
                return false;
            }
        }
    }
    true
}

#[test]
fn criterion_6_simulator_validity() {
    let start = Instant::now();
    let schemas = bundled::simulation_schemas();
    let dialogues = generated(1000, 6);
    let services: BTreeSet<&str> = dialogues.iter().flat_map(|d| d.services.iter().map(String::as_str)).collect();
    let errors: usize = dialogues.iter().map(|d| validate_dialogue(d, &schemas).errors.len()).sum();
    let replay_failures = dialogues.iter().filter(|d| !replay_matches(d)).count();
    let call_failures = dialogues.iter().filter(|d| !calls_follow_required_slots(d, &schemas)).count();
    let calls: usize = dialogues
        .iter()
        .flat_map(|d| &d.turns)
        .flat_map(|t| &t.frames)
        .filter(|f| f.service_call.is_some())
        .count();
    let signatures: BTreeSet<_> = dialogues.iter().map(flow_signature).collect();
    let elapsed = start.elapsed();
    let ok = dialogues.len() == 1000
        && services.len() == 4
        && errors == 0
        && replay_failures == 0
        && call_failures == 0
        && calls > 0
        && signatures.len() == dialogues.len()
        && elapsed < Duration::from_secs(60);
    gate(
        "6",
        ok,
        &format!(
            "{} dialogues over {} services: {errors} validation errors, {replay_failures} replay mismatches, {call_failures} premature calls (of {calls}), {} unique flows; {elapsed:?} (limit 60 s)",
            dialogues.len(),
            services.len(),
            signatures.len()
        ),
    );
}

fn within(actual: f64, target: f64, rel: f64) -> bool {
    (actual - target).abs() <= target * rel
}

#[test]
fn criterion_7_statistics() {
    let schemas = schema_set(&repo("fixtures/stats"));
    let dialogues = load_dialogues(&repo("fixtures/stats"), Strictness::Strict).unwrap().value;
    let seen = BTreeSet::from(["Restaurants_1".to_string()]);
    let r = compute_stats(&dialogues, &schemas, Some(&seen), &BTreeMap::new()).unwrap();
    let tally = (
        r.num_dialogues,
        r.total_turns,
        r.total_tokens,
        r.total_unique_tokens,
        r.num_slots,
        r.num_slot_values,
        r.num_domains,
        r.unseen_turns,
    );
    let expected = (5, 14, 43, 31, 26, 9, 3, Some(6));
    gate(
        "7-desk",
        tally == expected && r.avg_turns_per_dialogue == 2.8,
        &format!("5-dialogue fixture (dialogues, turns, tokens, unique tokens, slots, slot values, domains, unseen turns) = {tally:?}, hand tally {expected:?}, exact"),
    );

    let (Some(train), Some(test)) = (dataset_split("train"), dataset_split("test")) else {
        line("7", "SKIP", "requires-dataset: set SGD_DATA_DIR to the released corpus (train/ and test/)");
        return;
    };
    let train_schemas = schema_set(&train);
    let train_dialogues = load_dialogues(&train, Strictness::Strict).unwrap().value;
    let t = compute_stats(&train_dialogues, &train_schemas, None, &BTreeMap::new()).unwrap();
    let train_ok = t.num_dialogues == 16_142
        && t.total_turns == 329_964
        && format!("{:.2}", t.avg_turns_per_dialogue) == "20.44"
        && t.num_slots == 214
        && within(t.num_slot_values as f64, 14_139.0, 0.02)
        && within(t.total_unique_tokens as f64, 30_352.0, 0.02);
    let test_schemas = schema_set(&test);
    let test_dialogues = load_dialogues(&test, Strictness::Strict).unwrap().value;
    let train_services: BTreeSet<String> = train_schemas.names().map(str::to_string).collect();
    let u = compute_stats(&test_dialogues, &test_schemas, Some(&train_services), &BTreeMap::new()).unwrap();
    let fraction = u.unseen_turn_fraction.unwrap_or(f64::NAN);
    let test_ok = (fraction - 0.77).abs() <= 0.02;
    gate(
        "7",
        train_ok && test_ok,
        &format!(
            "train: {} dialogues (16142 exact), {} turns (329964 exact), avg {:.2} (20.44), {} slots (214 exact), {} slot values (14139 +-2%), {} unique tokens (30352 +-2%); test unseen-turn fraction {fraction:.4} (0.77 +-0.02)",
            t.num_dialogues, t.total_turns, t.avg_turns_per_dialogue, t.num_slots, t.num_slot_values, t.total_unique_tokens
        ),
    );
}

#[test]
fn criterion_8_out_of_scope_reference() {
    let docs = std::fs::read_to_string(repo("docs/formats.md")).unwrap_or_default();
    let documented = docs.contains("Neural baseline reference");
    line(
        "8",
        "N/A",
        &format!(
            "neural model accuracies are out of scope; the baseline joint GA is a reference constant in docs/formats.md only, never asserted (section present: {documented})"
        ),
    );
}

fn simulate(out: &Path, jobs: usize) {
    let data = repo("crates/core/data");
    let status = Command::new(env!("CARGO_BIN_EXE_sgd"))
        .args(["simulate", "--num", "300", "--seed", "13", "--jobs", &jobs.to_string()])
        .arg("--schemas")
        .arg(&data)
        .arg("--entities")
        .arg(data.join("entities"))
        .arg("--out")
        .arg(out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
}

/// Every output file except the timestamped run manifest.
fn corpus_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        if name != "run_manifest.json" {
            files.insert(name, std::fs::read(&path).unwrap());
        }
    }
    files
}

#[test]
fn criterion_9_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let runs = [("a", 1), ("b", 1), ("c", 8)];
    for (name, jobs) in runs {
        simulate(&tmp.path().join(name), jobs);
    }
    let a = corpus_files(&tmp.path().join("a"));
    let b = corpus_files(&tmp.path().join("b"));
    let c = corpus_files(&tmp.path().join("c"));
    let shards = a.keys().filter(|k| k.starts_with("dialogues_")).count();
    gate(
        "9",
        a == b && a == c && shards >= 2,
        &format!(
            "simulate --num 300 --seed 13: {} files ({shards} shards) byte-identical across two --jobs 1 runs: {}, and --jobs 1 vs --jobs 8: {}",
            a.len(),
            a == b,
            a == c
        ),
    );
}
