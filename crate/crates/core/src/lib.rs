pub mod archive;
pub mod authors;
pub mod classifiers;
pub mod cli;
pub mod imports;
pub mod license;
pub mod pipeline;
pub mod registry;
pub mod report;
pub mod stats;
pub mod store;
