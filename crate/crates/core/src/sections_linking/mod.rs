//! Pages of open books on S³, return times, linking numbers, Birkhoff
//! annuli, rotation numbers and section checks.

mod annulus;
mod gauss;
mod linking;
mod models;
mod pages;
mod polar;
mod rotation;
mod winding_sum;

pub use annulus::{
    annulus_disk_identity_check, annulus_tau_stats, lift_states, write_returns_csv, AnnulusIdentity, BirkhoffAnnulus,
    ReturnSample,
};
pub use gauss::{linking_gauss, linking_polygons_r3, reversed, stereographic, GaussLink};
pub use linking::{chord, closed_loop, link_gauss_closed, link_via_crossings, positive_linking_sample, ClosedArc, LinkingSample};
pub use models::{FlowModel, S3Path};
pub use pages::{page_tau_stats, LinearForm, Page, TauStats};
pub use polar::{florio_check, geodesic_frame_field, FlorioReport, PolarTorus, SectionVerdict};
pub use rotation::{cz_index, rotation_additivity_check, rotation_number, AdditivityResidual, CzIndex, Framing, RotationNumber};
pub use winding_sum::{chart, winding_sum, ChartLoop};
