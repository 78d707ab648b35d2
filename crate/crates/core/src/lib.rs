pub mod backends;
pub mod corpus;
pub mod metrics;
pub mod pipeline;
pub mod report;
