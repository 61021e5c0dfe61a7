pub mod bundled;
pub mod corpus;
pub mod engine;
pub mod json;
pub mod metrics;
pub mod schema;
pub mod sim;
pub mod stats;
pub mod tracker;
pub mod validation;
