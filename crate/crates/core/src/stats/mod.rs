//! Ecosystem statistics: growth, inequality, distribution summaries and
//! frequency tables. Tallies are mergeable so work can be sharded by package.

mod activity;
mod frequency;
mod imports;
mod summary;

pub use activity::{
    inter_release_gaps, releases_per_package, size_series, yearly_activity, ActivityTally,
    SizeBasis, YearlyActivity,
};
pub use frequency::{FrequencyRow, FrequencyTable};
pub use imports::{
    import_frequency, imports_by_year, unique_importing_packages_by_year, ImportKey,
    ImportOccurrence, ImportTally,
};
pub use summary::{
    cagr, cagr_between, distribution_summary, gini, CagrConvention, DistributionSummary, GrowthRate,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("growth rate undefined: start value {0} is not positive")]
    UndefinedRate(f64),
    #[error("growth rate needs at least one year")]
    ZeroYears,
    #[error("series is empty")]
    EmptySeries,
    #[error("gini undefined: all values are zero")]
    AllZero,
    #[error("invalid value {0}: expected a finite nonnegative number")]
    InvalidValue(f64),
}
