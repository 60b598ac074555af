//! Level sets, extents and shape diagnostics.

mod convexity;
mod distance;
mod ellipsoid;
mod extents;
mod level_set;

pub use convexity::{convexity_check, convexity_check_where, hessian_at, symmetric_eigenvalues, ConvexityReport};
pub use distance::{area_to_distance_bound, directed_hausdorff, hausdorff_distance, AREA_DISTANCE_CONSTANT};
pub use ellipsoid::{minimum_ellipsoid, minimum_ellipsoid_with_tolerance, MinimumEllipsoid, ELLIPSOID_TOLERANCE};
pub use extents::{level_set_extents, level_set_extents_field, ExtentRecord, RayOptions, TRANSVERSE_DIRECTIONS_3D};
pub use level_set::{extract_level_set, LevelPolyline};
