//! The bookstore navigation net, its two rate catalogs, the page table and
//! the published measurement tables used as reproduction targets.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::gspn::{parse_model, parse_params, GspnModel, ParameterSet};
use crate::logs::{Category, PageTable};

pub const MODEL_TEXT: &str = include_str!("../../../fixtures/kupikniga.gspn");
pub const CLUSTER1_PARAMS: &str = include_str!("../../../fixtures/cluster1.params");
pub const CLUSTER2_PARAMS: &str = include_str!("../../../fixtures/cluster2.params");
pub const PAGES_TSV: &str = include_str!("../../../fixtures/pages.tsv");

pub const NAME: &str = "kupikniga";

/// Transient markings in table order.
pub const MARKINGS: [&str; 9] = [
    "M_A", "M_B", "M_L", "M_ML", "M_C", "M_D1", "M_D2", "M_D3", "M_D4",
];

/// Place reached when a session ends.
pub const END_PLACE: &str = "E";

/// Symbol whose value had to be derived rather than read off the catalog.
pub const DERIVED_SYMBOL: &str = "δ";

/// Reference columns: one value per marking in [`MARKINGS`] order, one
/// array per cluster.
pub type Column = [[f64; 9]; 2];

/// Mean sojourn time per visit (s).
pub const SOJOURN_S: Column = [
    [6796.70, 13451.82, 8820.74, 1008.46, 943.99, 11.96, 7.63, 9.38, 16.95],
    [112.76, 115.47, 11582.01, 901.15, 102.42, 16.96, 8.75, 13.44, 53.08],
];

/// Published occupancy before absorption (s).
pub const OCCUPANCY_S: Column = [
    [32577.45, 338538.0, 13496.14, 8099.07, 40131.37, 28.48, 49.65, 40.07, 13241.97],
    [645.74, 142562.3, 23.42, 3.04, 0.36, 2.29, 1.78, 5.24, 6.06],
];

/// Expected number of visits.
pub const VISITS: Column = [
    [3.501551, 3.828545, 0.996941, 5.182163, 5.164502, 1.839687, 1.835698, 1.828880, 1.823379],
    [11.593189, 12.600198, 1.062461, 1.035813, 1.032780, 0.273193, 0.232543, 0.200941, 0.107744],
];

/// Cumulative sojourn (s).
pub const CUMULATIVE_S: Column = [
    [23798.99, 51500.88, 8793.76, 5226.02, 4875.23, 22.01, 14.0, 17.15, 30.9],
    [1307.2, 1454.9, 12305.43, 933.43, 105.78, 4.63, 2.03, 2.7, 5.72],
];

/// Published session durations (s).
pub const SESSION_S: [f64; 2] = [94278.95, 16121.82];

/// Published in-degree of every rate symbol (transitions carrying it).
pub const IN_DEGREE: [(&str, usize); 10] = [
    ("α", 7),
    ("λ", 7),
    ("μ", 9),
    ("κ", 4),
    ("ν", 7),
    ("θ", 2),
    ("ε", 2),
    ("γ", 2),
    ("δ", 2),
    ("β", 2),
];

/// Symbol present in every marking's enabling set.
pub const EXIT_SYMBOL: &str = "μ";

pub fn model() -> GspnModel {
    parse_model(MODEL_TEXT).expect("bundled model parses")
}

/// Rate catalog for cluster 1 or 2.
pub fn params(cluster: usize) -> Result<ParameterSet> {
    match cluster {
        1 => parse_params(CLUSTER1_PARAMS),
        2 => parse_params(CLUSTER2_PARAMS),
        _ => Err(Error::InvalidArgument(format!(
            "cluster must be 1 or 2, got {cluster}"
        ))),
    }
}

pub fn pages() -> PageTable {
    PageTable::parse_tsv(PAGES_TSV).expect("bundled page table parses")
}

pub fn in_degree_caps() -> BTreeMap<String, usize> {
    IN_DEGREE.iter().map(|&(s, k)| (s.to_string(), k)).collect()
}

/// Reference value of `column` for `marking` in `cluster` (1-based).
pub fn reference(column: &Column, cluster: usize, marking: &str) -> Option<f64> {
    let i = MARKINGS.iter().position(|m| *m == marking)?;
    column.get(cluster.checked_sub(1)?).map(|c| c[i])
}

/// Category tag of a fixture place.
pub fn place_category(place: &str) -> Category {
    match place {
        "A" => Category::A,
        "B" => Category::B,
        "L" | "ML" | "C" => Category::C,
        "D1" | "D2" | "D3" | "D4" => Category::D,
        _ => Category::Control,
    }
}
