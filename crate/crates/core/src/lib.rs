pub mod config;
pub mod error;
pub mod experiments;
pub mod field;
pub mod grid;
pub mod inequality;
pub mod measure;
pub mod moser;
pub mod params;
pub mod quadrature;
pub mod regularity;
pub mod solver;
