//! Classical multi-machine transient simulation.
//!
//! Each conventional machine is a constant EMF behind its transient
//! reactance; loads are constant admittances taken from the pre-fault
//! operating point and solar units are constant current injections. The
//! network is Kron-reduced onto the machine internal nodes for each of the
//! pre-fault, fault-on and post-fault topologies, and the swing equations
//!
//! ```text
//! dδ/dt = ω_s ω
//! dω/dt = (Pm − Pe(δ) − D ω) / 2H
//! ```
//!
//! are integrated with fixed-step RK4. Topology switches land exactly on the
//! fault and clearing instants; bus voltages are recovered at every 30 Hz
//! sample from the reduced network.

mod init;
mod network;
mod sim;

pub use init::{initialize_dynamics, internal_emf, DynamicModel, MachineState, INIT_TOLERANCE};
pub use network::ReducedNetwork;
pub use sim::{
    case_phases, integrate_fixed, simulate_case, simulate_from, CasePhases, SimulationTrace,
    SimulatorConfig,
};
