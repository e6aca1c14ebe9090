//! Potential penetrative pass (P3) analytics: ingest of event and freeze
//! frame data, hull-based detection, raster rendering, pass models,
//! evaluation metrics and player/team KPIs.

pub mod detect;
pub mod geometry;
pub mod ingest;
pub mod kpi;
pub mod metrics;
pub mod model;
pub mod render;
pub mod scoring;
pub mod store;
pub mod synth;

pub use detect::{detect_p3, DetectConfig, Label, P3Moment, Rejection};
pub use geometry::{
    convex_hull, point_in_polygon, voronoi_owner_grid, zone_contains, Point, Polygon,
};
pub use render::{render_moment, RenderConfig};
