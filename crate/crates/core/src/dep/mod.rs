//! Capsule dielectrophoresis: dielectric response, trap sites, capture and
//! detachment, and JP clustering.

mod cluster;
mod dielectric;
mod trapping;

pub use cluster::{cluster_capacity, cluster_speed_multiplier, update_clusters, Cluster, ClusterChange, ClusterTable};
pub use dielectric::{
    calibrate_capsule_model, cm_factor_re, crossover_hz, CalibrationReport, CapsuleDielectricModel, DepConstraint,
    DepRequirement, VACUUM_PERMITTIVITY,
};
pub use trapping::{
    attempt_capture, shear_detach, trap_site_for, CaptureParams, CaptureSlots, TrapSite, TRAP_TOLERANCE,
};
