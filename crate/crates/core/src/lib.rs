pub mod assembly;
pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod infsup;
pub mod linalg;
pub mod materials;
pub mod mesh;
pub mod quadrature;
pub mod spaces;
pub mod transient;
