use std::collections::BTreeMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::config::AutomatonConfig;
use super::rng::SimRng;
use super::SimError;
use crate::engine::EntityTable;
use crate::schema::{IntentDef, SchemaSet, ServiceSchema, DONTCARE};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioItem {
    pub service: String,
    pub intent: String,
}

/// An ordered list of intents to pursue, each with the slot values the user
/// wants. Column constraints come from `target_rows`, so at least one entity
/// satisfies every item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub items: Vec<ScenarioItem>,
    pub constraints: Vec<IndexMap<String, String>>,
    pub target_rows: Vec<usize>,
}

pub(crate) fn table_for<'a>(
    tables: &'a BTreeMap<String, EntityTable>,
    service: &str,
) -> Result<&'a EntityTable, SimError> {
    let table = tables
        .get(service)
        .ok_or_else(|| SimError::NoTable(service.to_string()))?;
    if table.rows.is_empty() {
        return Err(SimError::EmptyTable(service.to_string()));
    }
    Ok(table)
}

/// Goal values for `intent` grounded in `row`: required slots always,
/// optional column slots when their default would not match the row or by
/// chance, optional non-column categorical slots by chance.
pub(crate) fn goal_for(
    schema: &ServiceSchema,
    intent: &IntentDef,
    table: &EntityTable,
    row: usize,
    config: &AutomatonConfig,
    rng: &mut SimRng,
) -> Result<IndexMap<String, String>, SimError> {
    let mut goal = IndexMap::new();
    for slot in &intent.required_slots {
        let value = match table.cell(row, slot) {
            Some(v) => v.to_string(),
            None => {
                let def = schema.slot(slot).expect("validated schema");
                if !def.is_categorical {
                    return Err(SimError::UncoverableSlot {
                        service: schema.service_name.clone(),
                        intent: intent.name.clone(),
                        slot: slot.clone(),
                    });
                }
                rng.pick(&def.possible_values).clone()
            }
        };
        goal.insert(slot.clone(), value);
    }
    for (slot, default) in &intent.optional_slots {
        match table.cell(row, slot) {
            Some(v) => {
                let needed = default != DONTCARE && v != default;
                if needed || rng.chance(config.scenario.optional_constraint) {
                    goal.insert(slot.clone(), v.to_string());
                }
            }
            None => {
                let def = schema.slot(slot).expect("validated schema");
                if def.is_categorical && rng.chance(config.scenario.optional_constraint) {
                    goal.insert(slot.clone(), rng.pick(&def.possible_values).clone());
                }
            }
        }
    }
    Ok(goal)
}

/// Draws a scenario. Every service in `schemas` must have a non-empty table.
pub fn sample_scenario(
    seed: u64,
    schemas: &SchemaSet,
    tables: &BTreeMap<String, EntityTable>,
    config: &AutomatonConfig,
) -> Result<Scenario, SimError> {
    let mut rng = SimRng::new(seed);
    sample_with(&mut rng, schemas, tables, config)
}

pub(crate) fn sample_with(
    rng: &mut SimRng,
    schemas: &SchemaSet,
    tables: &BTreeMap<String, EntityTable>,
    config: &AutomatonConfig,
) -> Result<Scenario, SimError> {
    let services = schemas.services();
    if services.is_empty() {
        return Err(SimError::NoServices);
    }
    for s in services {
        table_for(tables, &s.service_name)?;
    }
    let wanted = rng
        .weighted(&config.scenario.services_per_dialogue)
        .expect("validated distribution")
        + 1;
    let mut order: Vec<usize> = (0..services.len()).collect();
    rng.shuffle(&mut order);
    order.truncate(wanted.min(services.len()));

    let mut items = Vec::new();
    for &s in &order {
        let schema = &services[s];
        let searches: Vec<&IntentDef> = schema.intents.iter().filter(|i| !i.is_transactional).collect();
        let transactions: Vec<&IntentDef> = schema.intents.iter().filter(|i| i.is_transactional).collect();
        let plan: Vec<&IntentDef> =
            if !searches.is_empty() && !transactions.is_empty() && rng.chance(config.scenario.follow_up) {
                vec![*rng.pick(&searches), *rng.pick(&transactions)]
            } else {
                vec![rng.pick(&schema.intents)]
            };
        for intent in plan {
            items.push((schema, intent));
        }
    }
    items.truncate(config.scenario.max_intents);

    let mut scenario = Scenario {
        items: Vec::new(),
        constraints: Vec::new(),
        target_rows: Vec::new(),
    };
    let mut previous: Option<(&str, usize)> = None;
    for (schema, intent) in items {
        let table = table_for(tables, &schema.service_name)?;
        let row = match previous {
            Some((service, row)) if service == schema.service_name => row,
            _ => rng.below(table.rows.len()),
        };
        scenario.constraints.push(goal_for(schema, intent, table, row, config, rng)?);
        scenario.target_rows.push(row);
        scenario.items.push(ScenarioItem {
            service: schema.service_name.clone(),
            intent: intent.name.clone(),
        });
        previous = Some((&schema.service_name, row));
    }
    Ok(scenario)
}
