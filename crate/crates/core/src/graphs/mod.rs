//! Graph expansions: Kontsevich's formula on `ℝ^d` with numerically
//! integrated weights, and weighted acyclic graphs on Kähler charts.

mod ggraph;
mod kgraph;
mod kstar;
mod poly;
mod weights;

pub use ggraph::{
    enumerate_ggraphs, gammelgaard_operator, gammelgaard_star, gammelgaard_table, GGraph, GVertex, GAMMELGAARD_LABEL,
    SINK, SOURCE,
};
pub use kgraph::{d_gamma, enumerate_kgraphs, KGraph, PoissonBivector, L, R};
pub use kstar::{kontsevich_assoc_defect, kontsevich_star, kontsevich_star_series};
pub use poly::{parse_poly, Poly, PolyTerm};
pub use weights::{
    clear_cache, export_cache, import_cache, kontsevich_weight, kontsevich_weights, Backend, CacheEntry, WeightConfig,
    WeightResult,
};
