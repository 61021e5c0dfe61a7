//! Data shipped with the crate: a four-service simulation setup, a wallet
//! schema and the default automaton and templates.

use std::collections::BTreeMap;

use crate::engine::{parse_entity_table, EntityError, EntityTable};
use crate::schema::{parse_schemas, SchemaSet};
use crate::sim::{AutomatonConfig, TemplateSet};

pub const SIMULATION_SCHEMAS: &str = include_str!("../data/schema.json");
pub const WALLET_SCHEMA: &str = include_str!("../data/wallet.json");
pub const AUTOMATON_TOML: &str = include_str!("../data/automaton.toml");
pub const TEMPLATES_TOML: &str = include_str!("../data/templates.toml");
pub const DOMAINS_JSON: &str = include_str!("../data/domains.json");

pub const ENTITY_TABLES: &[(&str, &str)] = &[
    ("Hotels_1", include_str!("../data/entities/Hotels_1.csv")),
    ("Movies_1", include_str!("../data/entities/Movies_1.csv")),
    ("Restaurants_1", include_str!("../data/entities/Restaurants_1.csv")),
    ("RideSharing_1", include_str!("../data/entities/RideSharing_1.csv")),
];

pub fn simulation_schemas() -> SchemaSet {
    SchemaSet::new(parse_schemas(SIMULATION_SCHEMAS.as_bytes()).expect("bundled schemas parse"))
}

pub fn wallet_schema() -> SchemaSet {
    SchemaSet::new(parse_schemas(WALLET_SCHEMA.as_bytes()).expect("bundled wallet schema parses"))
}

pub fn simulation_tables(schemas: &SchemaSet) -> Result<BTreeMap<String, EntityTable>, EntityError> {
    let mut tables = BTreeMap::new();
    for (service, csv) in ENTITY_TABLES {
        let Some(schema) = schemas.get(service) else {
            continue;
        };
        let table = parse_entity_table(csv.as_bytes(), schema, &format!("{service}.csv"))?;
        tables.insert(service.to_string(), table);
    }
    Ok(tables)
}

pub fn automaton_config() -> AutomatonConfig {
    AutomatonConfig::from_toml(AUTOMATON_TOML).expect("bundled automaton config is valid")
}

pub fn templates() -> TemplateSet {
    TemplateSet::from_toml(TEMPLATES_TOML).expect("bundled templates are valid")
}

pub fn domain_map() -> BTreeMap<String, String> {
    serde_json::from_str(DOMAINS_JSON).expect("bundled domain map parses")
}
