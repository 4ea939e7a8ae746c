//! Both maximum-entropy problems, the transport check between them, and
//! numerical oracles for the map.

mod ode;
mod sampling;
mod shannon;
mod transport;
mod tsallis;

pub use ode::{solve_ode_numeric, LinearODE, INSTABILITY_BOUND};
pub use sampling::{ks_statistic, sample_and_test, sample_and_test_with, SampleReport, MIN_SAMPLES};
pub use shannon::{solve_shannon, MomentCheck, ShannonSolution, MAX_CONSTRAINTS};
pub use transport::{verify_transport, verify_transport_with, TransportPoint, TransportReport};
pub use tsallis::{normalize_tsallis, TsallisSolution};
