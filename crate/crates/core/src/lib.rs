pub mod bimodule;
pub mod error;
pub mod fdca;
pub mod linalg;
pub mod report;
pub mod transfer;
pub mod quasibasis;
pub mod modular;
pub mod generator;
pub mod io;
pub mod verify;
pub mod cli;
