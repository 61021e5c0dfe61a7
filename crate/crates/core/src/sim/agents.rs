//! The user and system agents. They alternate turns, the user pursuing the
//! scenario's goals and the system driving intent calls against the entity
//! tables, and together produce a dialogue outline: acts and states with
//! empty utterances.

use std::collections::BTreeMap;

use indexmap::IndexMap;

use super::config::{AutomatonConfig, PHASES};
use super::rng::SimRng;
use super::scenario::{goal_for, table_for, Scenario};
use super::SimError;
use crate::corpus::{act, Dialogue, DialogueAct, Frame, FrameState, ServiceCall, Speaker, Turn, COUNT_SLOT, INTENT_SLOT};
use crate::engine::{self, CallStatus, EntityTable, IntentCall};
use crate::schema::{IntentDef, SchemaSet, ServiceSchema, DONTCARE};

/// Service results attached to a system frame are capped at this many rows.
const MAX_RESULTS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
enum Cue {
    Start,
    Answer(Vec<String>),
    Offer,
    Confirm,
    AfterSuccess,
    OfferIntent(String),
    ReqMore,
    AfterFailure,
}

#[derive(Debug, Clone, PartialEq)]
enum Move {
    Started,
    Informed,
    Selected,
    Alternatives,
    Requested(String),
    Affirmed,
    Negated,
    DeclinedIntent,
    Closing,
}

#[derive(Debug, Default)]
struct ItemRun {
    index: usize,
    service: String,
    intent: String,
    row: usize,
    /// Goal values for slots the table has no column for.
    fixed: IndexMap<String, String>,
    wanted: Vec<String>,
    decoy: Option<(String, String)>,
    matches: Vec<usize>,
    cursor: usize,
    offered_row: Option<usize>,
    identity: Option<String>,
    shown: Vec<String>,
    selected: bool,
    alternatives: usize,
    requests: usize,
    negations: usize,
    confirmed: Vec<(String, String)>,
}

struct Agents<'a> {
    schemas: &'a SchemaSet,
    tables: &'a BTreeMap<String, EntityTable>,
    config: &'a AutomatonConfig,
    scenario: &'a Scenario,
    rng: SimRng,
    item: ItemRun,
    states: IndexMap<String, FrameState>,
    /// Values seen so far, per service, for cross-service reuse.
    mentioned: IndexMap<String, IndexMap<String, String>>,
    turns: Vec<Turn>,
}

/// Runs both agents over `scenario`.
pub fn generate_outline(
    scenario: &Scenario,
    schemas: &SchemaSet,
    tables: &BTreeMap<String, EntityTable>,
    automaton: &AutomatonConfig,
    seed: u64,
) -> Result<Dialogue, SimError> {
    if scenario.items.is_empty() {
        return Err(SimError::EmptyScenario);
    }
    for item in &scenario.items {
        let schema = schemas
            .get(&item.service)
            .ok_or_else(|| SimError::UnknownService(item.service.clone()))?;
        if schema.intent(&item.intent).is_none() {
            return Err(SimError::UnknownIntent {
                service: item.service.clone(),
                intent: item.intent.clone(),
            });
        }
        table_for(tables, &item.service)?;
    }
    let mut agents = Agents {
        schemas,
        tables,
        config: automaton,
        scenario,
        rng: SimRng::new(seed),
        item: ItemRun::default(),
        states: IndexMap::new(),
        mentioned: IndexMap::new(),
        turns: Vec::new(),
    };
    agents.run()?;
    let mut services = Vec::new();
    for item in &scenario.items {
        if !services.contains(&item.service) {
            services.push(item.service.clone());
        }
    }
    Ok(Dialogue {
        dialogue_id: String::new(),
        services,
        turns: agents.turns,
    })
}

impl<'a> Agents<'a> {
    fn schema(&self) -> &'a ServiceSchema {
        self.schemas.get(&self.item.service).expect("checked service")
    }

    fn intent(&self) -> &'a IntentDef {
        self.schema().intent(&self.item.intent).expect("checked intent")
    }

    fn table(&self) -> &'a EntityTable {
        &self.tables[&self.item.service]
    }

    fn state(&mut self) -> &mut FrameState {
        let service = self.item.service.clone();
        self.states.entry(service).or_insert_with(FrameState::none)
    }

    fn state_value(&self, slot: &str) -> Option<&str> {
        self.states
            .get(&self.item.service)
            .and_then(|s| s.slot_values.get(slot))
            .and_then(|v| v.first())
            .map(String::as_str)
    }

    fn choose(&mut self, phase: &'static str, legal: &[&'static str]) -> Result<&'static str, SimError> {
        let outcomes = PHASES
            .iter()
            .find(|(p, _)| *p == phase)
            .map(|(_, o)| *o)
            .expect("known phase");
        let candidates: Vec<&'static str> = outcomes.iter().copied().filter(|a| legal.contains(a)).collect();
        let weights: Vec<f64> = candidates.iter().map(|a| self.config.weight(phase, a)).collect();
        match self.rng.weighted(&weights) {
            Some(i) => Ok(candidates[i]),
            None => Err(SimError::Deadlock(phase.to_string())),
        }
    }

    fn sample_count(&mut self, distribution: &[f64]) -> usize {
        self.rng.weighted(distribution).unwrap_or(0)
    }

    /// The value the user currently wants for `slot`.
    fn goal_value(&self, slot: &str) -> Option<String> {
        if let Some((s, v)) = &self.item.decoy {
            if s == slot {
                return Some(v.clone());
            }
        }
        self.table()
            .cell(self.item.row, slot)
            .map(str::to_string)
            .or_else(|| self.item.fixed.get(slot).cloned())
    }

    /// Adds optional slots whose defaults would not match the target row.
    fn add_needed_overrides(&mut self) {
        let intent = self.intent();
        let table = self.table();
        for (slot, default) in &intent.optional_slots {
            if let Some(v) = table.cell(self.item.row, slot) {
                if default != DONTCARE && v != default && !self.item.wanted.contains(slot) {
                    self.item.wanted.push(slot.clone());
                }
            }
        }
    }

    fn begin_item(&mut self, index: usize) -> Result<(), SimError> {
        let planned = &self.scenario.items[index];
        let same_service = index > 0 && self.item.service == planned.service;
        let row = if same_service {
            self.item.row
        } else {
            self.scenario.target_rows[index]
        };
        self.item = ItemRun {
            index,
            service: planned.service.clone(),
            intent: planned.intent.clone(),
            row,
            ..Default::default()
        };
        let goal = &self.scenario.constraints[index];
        let table = self.table();
        self.item.wanted = goal.keys().cloned().collect();
        self.item.fixed = goal
            .iter()
            .filter(|(slot, _)| !table.has_column(slot))
            .map(|(s, v)| (s.clone(), v.clone()))
            .collect();

        let mut carried: IndexMap<String, String> = IndexMap::new();
        if !same_service {
            for slot in self.item.wanted.clone() {
                if !table.has_column(&slot) {
                    continue;
                }
                let known = self.config.aliases_of(&slot).find_map(|alias| {
                    self.mentioned
                        .iter()
                        .filter(|(service, _)| **service != planned.service)
                        .find_map(|(_, values)| values.get(alias).cloned())
                });
                if let Some(value) = known {
                    let mut trial = carried.clone();
                    trial.insert(slot.clone(), value.clone());
                    if !engine::matching_rows(table, &trial).is_empty()
                        && self.rng.chance(self.config.scenario.carryover)
                    {
                        carried = trial;
                    }
                }
            }
            if !carried.is_empty() {
                let rows = engine::matching_rows(table, &carried);
                if !rows.contains(&self.item.row) {
                    self.item.row = *self.rng.pick(&rows);
                }
            }
        }
        self.add_needed_overrides();

        if self.rng.chance(self.config.scenario.decoy) {
            self.plant_decoy(&carried);
        }
        let intent = self.item.intent.clone();
        self.state().active_intent = intent;
        Ok(())
    }

    /// Makes one required slot start out with a value no entity has.
    fn plant_decoy(&mut self, carried: &IndexMap<String, String>) {
        let table = self.table();
        let intent = self.intent();
        let candidates: Vec<String> = intent
            .required_slots
            .iter()
            .filter(|s| table.has_column(s) && !carried.contains_key(*s) && self.state_value(s).is_none())
            .cloned()
            .collect();
        if candidates.is_empty() {
            return;
        }
        let slot = self.rng.pick(&candidates).clone();
        let truth = table.cell(self.item.row, &slot).unwrap_or_default().to_string();
        let col = table.column_index(&slot).expect("column");
        let mut values: Vec<String> = Vec::new();
        for row in &table.rows {
            if row[col] != truth && !values.contains(&row[col]) {
                values.push(row[col].clone());
            }
        }
        self.rng.shuffle(&mut values);
        for value in values {
            let mut constraints: IndexMap<String, String> = intent
                .required_slots
                .iter()
                .filter_map(|s| self.goal_value(s).map(|v| (s.clone(), v)))
                .collect();
            constraints.insert(slot.clone(), value.clone());
            if engine::matching_rows(table, &constraints).is_empty() {
                self.item.decoy = Some((slot, value));
                return;
            }
        }
    }

    /// Call arguments: state values the intent accepts.
    fn call_arguments(&self) -> IndexMap<String, String> {
        let intent = self.intent();
        let mut args = IndexMap::new();
        for slot in intent.required_slots.iter().chain(intent.optional_slots.keys()) {
            if let Some(v) = self.state_value(slot) {
                args.insert(slot.clone(), v.to_string());
            }
        }
        args
    }

    fn effective_arguments(&self) -> IndexMap<String, String> {
        let call = IntentCall {
            intent: self.item.intent.clone(),
            arguments: self.call_arguments(),
        };
        engine::effective_arguments(self.schema(), &call).expect("required slots filled")
    }

    fn run(&mut self) -> Result<(), SimError> {
        self.begin_item(0)?;
        let mut cue = Cue::Start;
        loop {
            if self.turns.len() + 2 > self.config.max_turns {
                return Err(SimError::TurnLimit(self.config.max_turns));
            }
            let mv = self.user_turn(cue)?;
            match self.system_turn(mv)? {
                Some(next) => cue = next,
                None => return Ok(()),
            }
        }
    }

    fn inform(&mut self, acts: &mut Vec<DialogueAct>, slot: &str, value: &str) {
        acts.push(DialogueAct::with_value(act::INFORM, slot, value));
        self.state().slot_values.insert(slot.to_string(), vec![value.to_string()]);
    }

    /// Informs up to `count` wanted slots the state does not yet hold.
    fn volunteer(&mut self, acts: &mut Vec<DialogueAct>, count: usize, skip: &[String]) {
        let mut open: Vec<String> = self
            .item
            .wanted
            .iter()
            .filter(|s| !skip.contains(s))
            .filter(|s| self.goal_value(s).as_deref() != self.state_value(s))
            .cloned()
            .collect();
        self.rng.shuffle(&mut open);
        open.truncate(count);
        let order = self.item.wanted.clone();
        open.sort_by_key(|s| order.iter().position(|w| w == s));
        for slot in open {
            let value = self.goal_value(&slot).expect("wanted slot has a goal");
            self.inform(acts, &slot, &value);
        }
    }

    fn start_acts(&mut self, acts: &mut Vec<DialogueAct>, affirmed: bool) {
        if affirmed {
            acts.push(DialogueAct::bare(act::AFFIRM_INTENT));
        } else {
            acts.push(DialogueAct::with_value(act::INFORM_INTENT, INTENT_SLOT, &self.item.intent));
        }
        let count = self.sample_count(&self.config.parameters.begin_informs.clone());
        self.volunteer(acts, count, &[]);
    }

    fn next_item(&self) -> Option<usize> {
        let next = self.item.index + 1;
        (next < self.scenario.items.len()).then_some(next)
    }

    fn user_turn(&mut self, cue: Cue) -> Result<Move, SimError> {
        let mut acts = Vec::new();
        let mut requested = Vec::new();
        let mv = match cue {
            Cue::Start => {
                self.start_acts(&mut acts, false);
                Move::Started
            }
            Cue::Answer(slots) => {
                for slot in &slots {
                    let value = self.goal_value(slot).ok_or_else(|| SimError::Deadlock("user_answer".into()))?;
                    self.inform(&mut acts, slot, &value);
                }
                let count = self.sample_count(&self.config.parameters.answer_extra_informs.clone());
                self.volunteer(&mut acts, count, &slots);
                Move::Informed
            }
            Cue::Offer => self.react_to_offer(&mut acts, &mut requested)?,
            Cue::Confirm => self.react_to_confirm(&mut acts)?,
            Cue::AfterSuccess | Cue::ReqMore => match self.next_item() {
                Some(next) => {
                    self.begin_item(next)?;
                    self.start_acts(&mut acts, false);
                    Move::Started
                }
                None => {
                    let choice = self.choose("user_close", &[act::THANK_YOU, act::GOODBYE])?;
                    acts.push(DialogueAct::bare(choice));
                    Move::Closing
                }
            },
            Cue::OfferIntent(intent) => {
                let accept = self.next_item().filter(|&n| {
                    let planned = &self.scenario.items[n];
                    planned.service == self.item.service && planned.intent == intent
                });
                match accept {
                    Some(next) => {
                        self.begin_item(next)?;
                        self.start_acts(&mut acts, true);
                        Move::Started
                    }
                    None => {
                        acts.push(DialogueAct::bare(act::NEGATE_INTENT));
                        Move::DeclinedIntent
                    }
                }
            }
            Cue::AfterFailure => {
                let (slot, _) = self
                    .item
                    .decoy
                    .take()
                    .ok_or_else(|| SimError::Deadlock("user_failure".into()))?;
                let value = self.goal_value(&slot).expect("decoy slot has a goal");
                self.inform(&mut acts, &slot, &value);
                Move::Informed
            }
        };
        let service = self.item.service.clone();
        let mut state = self.state().clone();
        state.requested_slots = requested;
        let known = self.mentioned.entry(service.clone()).or_default();
        for (slot, values) in &state.slot_values {
            known.insert(slot.clone(), values[0].clone());
        }
        let mut frame = Frame::new(&service);
        frame.actions = acts;
        frame.state = Some(state);
        self.turns.push(Turn {
            frames: vec![frame],
            speaker: Speaker::User,
            utterance: String::new(),
        });
        Ok(mv)
    }

    fn requestable(&self) -> Vec<String> {
        let table = self.table();
        self.intent()
            .result_slots
            .iter()
            .filter(|s| table.has_column(s))
            .filter(|s| self.state_value(s).is_none() && !self.item.shown.contains(s))
            .cloned()
            .collect()
    }

    fn react_to_offer(&mut self, acts: &mut Vec<DialogueAct>, requested: &mut Vec<String>) -> Result<Move, SimError> {
        let repeats = self.config.max_repeats;
        let mut legal = vec![act::SELECT];
        if self.item.matches.len() > 1 && self.item.alternatives < repeats {
            legal.push(act::REQUEST_ALTS);
        }
        let requestable = self.requestable();
        if !requestable.is_empty() && self.item.requests < repeats {
            legal.push(act::REQUEST);
        }
        match self.choose("user_offer", &legal)? {
            act::SELECT => {
                let row = self.item.offered_row.expect("an offer is pending");
                let slot = self.item.identity.clone().expect("offers have an identity slot");
                let value = self.table().cell(row, &slot).unwrap_or_default().to_string();
                acts.push(DialogueAct::with_value(act::SELECT, &slot, &value));
                self.state().slot_values.insert(slot, vec![value]);
                self.item.row = row;
                self.item.selected = true;
                Ok(Move::Selected)
            }
            act::REQUEST_ALTS => {
                self.item.alternatives += 1;
                acts.push(DialogueAct::bare(act::REQUEST_ALTS));
                Ok(Move::Alternatives)
            }
            _ => {
                self.item.requests += 1;
                let slot = self.rng.pick(&requestable).clone();
                acts.push(DialogueAct::with_slot(act::REQUEST, &slot));
                requested.push(slot.clone());
                Ok(Move::Requested(slot))
            }
        }
    }

    /// Wanted slots whose effective call value differs from the goal.
    fn mismatches(&self) -> Vec<String> {
        let effective = self.effective_arguments();
        self.item
            .wanted
            .iter()
            .filter(|s| effective.get(*s) != self.goal_value(s).as_ref())
            .cloned()
            .collect()
    }

    fn changeable(&self) -> Vec<String> {
        let schema = self.schema();
        let intent = self.intent();
        let table = self.table();
        intent
            .required_slots
            .iter()
            .chain(intent.optional_slots.keys())
            .filter(|s| !table.has_column(s))
            .filter(|s| schema.slot(s).is_some_and(|d| d.is_categorical && d.possible_values.len() > 1))
            .cloned()
            .collect()
    }

    fn react_to_confirm(&mut self, acts: &mut Vec<DialogueAct>) -> Result<Move, SimError> {
        let wrong = self.mismatches();
        if !wrong.is_empty() {
            self.item.negations += 1;
            acts.push(DialogueAct::bare(act::NEGATE));
            for slot in wrong {
                let value = self.goal_value(&slot).expect("wanted slot has a goal");
                self.inform(acts, &slot, &value);
            }
            return Ok(Move::Negated);
        }
        let changeable = self.changeable();
        let mut legal = vec![act::AFFIRM];
        if !changeable.is_empty() && self.item.negations < self.config.max_repeats {
            legal.push(act::NEGATE);
        }
        if self.choose("user_confirm", &legal)? == act::AFFIRM {
            acts.push(DialogueAct::bare(act::AFFIRM));
            for (slot, value) in self.item.confirmed.clone() {
                self.state().slot_values.insert(slot, vec![value]);
            }
            return Ok(Move::Affirmed);
        }
        self.item.negations += 1;
        let slot = self.rng.pick(&changeable).clone();
        let current = self.effective_arguments().get(&slot).cloned();
        let options: Vec<String> = self
            .schema()
            .slot(&slot)
            .expect("known slot")
            .possible_values
            .iter()
            .filter(|v| Some(*v) != current.as_ref())
            .cloned()
            .collect();
        let value = self.rng.pick(&options).clone();
        self.item.fixed.insert(slot.clone(), value.clone());
        if !self.item.wanted.contains(&slot) {
            self.item.wanted.push(slot.clone());
        }
        acts.push(DialogueAct::bare(act::NEGATE));
        self.inform(acts, &slot, &value);
        Ok(Move::Negated)
    }

    fn system_turn(&mut self, mv: Move) -> Result<Option<Cue>, SimError> {
        let mut frame = Frame::new(&self.item.service);
        let next = match mv {
            Move::Closing => {
                frame.actions.push(DialogueAct::bare(act::GOODBYE));
                None
            }
            Move::DeclinedIntent => {
                frame.actions.push(DialogueAct::bare(act::REQ_MORE));
                Some(Cue::ReqMore)
            }
            Move::Requested(slot) => {
                let row = self.item.offered_row.expect("an offer is pending");
                let value = self.table().cell(row, &slot).unwrap_or_default().to_string();
                frame.actions.push(DialogueAct::with_value(act::INFORM, &slot, &value));
                self.item.shown.push(slot);
                Some(Cue::Offer)
            }
            Move::Alternatives => {
                self.item.cursor += 1;
                self.offer(&mut frame, false);
                Some(Cue::Offer)
            }
            Move::Selected if !self.intent().is_transactional => self.after_select(&mut frame)?,
            Move::Affirmed => self.commit(&mut frame)?,
            _ => self.advance(&mut frame)?,
        };
        let known = self.mentioned.entry(self.item.service.clone()).or_default();
        for a in &frame.actions {
            if let (Some(slot), Some(value)) = (a.slot_name(), a.values.first()) {
                if slot != INTENT_SLOT && slot != COUNT_SLOT {
                    known.insert(slot.to_string(), value.clone());
                }
            }
        }
        self.turns.push(Turn {
            frames: vec![frame],
            speaker: Speaker::System,
            utterance: String::new(),
        });
        Ok(next)
    }

    /// Next step once the user has supplied information.
    fn advance(&mut self, frame: &mut Frame) -> Result<Option<Cue>, SimError> {
        let missing = self
            .intent()
            .required_slots
            .iter()
            .find(|s| self.state_value(s).is_none())
            .cloned();
        if let Some(slot) = missing {
            frame.actions.push(DialogueAct::with_slot(act::REQUEST, &slot));
            return Ok(Some(Cue::Answer(vec![slot])));
        }
        let intent = self.intent();
        if !intent.is_transactional {
            return self.search(frame);
        }
        if !self.item.selected {
            let table = self.table();
            let open: Vec<String> = intent
                .optional_slots
                .iter()
                .filter(|(s, d)| d.as_str() == DONTCARE && table.has_column(s) && self.state_value(s).is_none())
                .map(|(s, _)| s.clone())
                .collect();
            if let Some(identity) = open.first() {
                self.item.identity = Some(identity.clone());
                return self.search(frame);
            }
        }
        self.transact(frame)
    }

    fn search(&mut self, frame: &mut Frame) -> Result<Option<Cue>, SimError> {
        let args = self.call_arguments();
        let rows = engine::matching_rows(self.table(), &self.effective_arguments());
        frame.service_call = Some(ServiceCall {
            method: self.item.intent.clone(),
            parameters: args.clone(),
        });
        frame.service_results = Some(
            rows.iter()
                .take(MAX_RESULTS)
                .map(|&r| self.table().row_map(r))
                .collect(),
        );
        if rows.is_empty() {
            frame.actions.push(DialogueAct::bare(act::NOTIFY_FAILURE));
            return Ok(Some(Cue::AfterFailure));
        }
        if self.item.identity.is_none() {
            let table = self.table();
            let results: Vec<&String> = self.intent().result_slots.iter().filter(|s| table.has_column(s)).collect();
            let identity = results
                .iter()
                .find(|s| !args.contains_key(s.as_str()))
                .or(results.first())
                .ok_or_else(|| SimError::Deadlock("system_results".into()))?;
            self.item.identity = Some((*identity).clone());
        }
        self.item.cursor = self.rng.below(rows.len());
        self.item.matches = rows;
        let with_count = self.choose("system_results", &[act::OFFER, act::INFORM_COUNT])? == act::INFORM_COUNT;
        self.offer(frame, with_count);
        Ok(Some(Cue::Offer))
    }

    fn offer(&mut self, frame: &mut Frame, with_count: bool) {
        let row = self.item.matches[self.item.cursor % self.item.matches.len()];
        self.item.offered_row = Some(row);
        let identity = self.item.identity.clone().expect("identity chosen before offering");
        let args = self.call_arguments();
        let table = self.table();
        let mut extras: Vec<String> = self
            .intent()
            .result_slots
            .iter()
            .filter(|s| table.has_column(s) && !args.contains_key(*s) && **s != identity)
            .cloned()
            .collect();
        self.rng.shuffle(&mut extras);
        let count = self.sample_count(&self.config.parameters.offer_slots.clone());
        extras.truncate(count);
        let order = &self.intent().result_slots;
        extras.sort_by_key(|s| order.iter().position(|r| r == s));
        if with_count {
            let n = self.item.matches.len().to_string();
            frame.actions.push(DialogueAct::with_value(act::INFORM_COUNT, COUNT_SLOT, &n));
        }
        self.item.shown.clear();
        for slot in std::iter::once(identity).chain(extras) {
            let value = table.cell(row, &slot).unwrap_or_default();
            frame.actions.push(DialogueAct::with_value(act::OFFER, &slot, value));
            self.item.shown.push(slot);
        }
    }

    fn after_select(&mut self, frame: &mut Frame) -> Result<Option<Cue>, SimError> {
        let schema = self.schema();
        let follow_up = self
            .next_item()
            .map(|n| &self.scenario.items[n])
            .filter(|planned| planned.service == self.item.service)
            .map(|planned| planned.intent.clone());
        let transactions: Vec<String> = schema
            .intents
            .iter()
            .filter(|i| i.is_transactional)
            .map(|i| i.name.clone())
            .collect();
        let mut legal = vec![act::REQ_MORE];
        if !transactions.is_empty() {
            legal.push(act::OFFER_INTENT);
        }
        if self.choose("system_after_select", &legal)? == act::REQ_MORE {
            frame.actions.push(DialogueAct::bare(act::REQ_MORE));
            return Ok(Some(Cue::ReqMore));
        }
        let intent = match follow_up.filter(|i| transactions.contains(i)) {
            Some(i) => i,
            None => self.rng.pick(&transactions).clone(),
        };
        frame.actions.push(DialogueAct::with_value(act::OFFER_INTENT, INTENT_SLOT, &intent));
        Ok(Some(Cue::OfferIntent(intent)))
    }

    fn transact(&mut self, frame: &mut Frame) -> Result<Option<Cue>, SimError> {
        let mut legal = vec![act::CONFIRM];
        if self.item.decoy.is_none() && self.mismatches().is_empty() {
            legal.push(act::NOTIFY_SUCCESS);
        }
        if self.choose("system_transact", &legal)? == act::NOTIFY_SUCCESS {
            return self.commit(frame);
        }
        self.item.confirmed.clear();
        for (slot, value) in self.effective_arguments() {
            if value != DONTCARE {
                frame.actions.push(DialogueAct::with_value(act::CONFIRM, &slot, &value));
                self.item.confirmed.push((slot, value));
            }
        }
        Ok(Some(Cue::Confirm))
    }

    fn commit(&mut self, frame: &mut Frame) -> Result<Option<Cue>, SimError> {
        let call = IntentCall {
            intent: self.item.intent.clone(),
            arguments: self.call_arguments(),
        };
        let result = engine::call(self.table(), self.schema(), &call)?;
        frame.service_call = Some(ServiceCall {
            method: call.intent,
            parameters: call.arguments,
        });
        frame.service_results = Some(result.matches.clone());
        match result.status {
            CallStatus::Success => {
                frame.actions.push(DialogueAct::bare(act::NOTIFY_SUCCESS));
                Ok(Some(Cue::AfterSuccess))
            }
            CallStatus::Failure if self.item.decoy.is_some() => {
                frame.actions.push(DialogueAct::bare(act::NOTIFY_FAILURE));
                Ok(Some(Cue::AfterFailure))
            }
            CallStatus::Failure => Err(SimError::Deadlock("system_commit".into())),
        }
    }
}

/// Grounds a goal for an ad-hoc single-item scenario, mainly for tests.
pub fn single_item_scenario(
    schemas: &SchemaSet,
    tables: &BTreeMap<String, EntityTable>,
    config: &AutomatonConfig,
    service: &str,
    intent: &str,
    row: usize,
    seed: u64,
) -> Result<Scenario, SimError> {
    let schema = schemas
        .get(service)
        .ok_or_else(|| SimError::UnknownService(service.to_string()))?;
    let def = schema.intent(intent).ok_or_else(|| SimError::UnknownIntent {
        service: service.to_string(),
        intent: intent.to_string(),
    })?;
    let table = table_for(tables, service)?;
    let mut rng = SimRng::new(seed);
    Ok(Scenario {
        items: vec![super::scenario::ScenarioItem {
            service: service.to_string(),
            intent: intent.to_string(),
        }],
        constraints: vec![goal_for(schema, def, table, row, config, &mut rng)?],
        target_rows: vec![row],
    })
}
