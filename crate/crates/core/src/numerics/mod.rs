pub mod ode;
pub mod quad;
