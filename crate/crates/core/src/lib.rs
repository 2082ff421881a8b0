pub mod compiler;
pub mod engine;
pub mod verify;
pub mod frontend;
pub mod l2o;
pub mod matrix;
pub mod rational;
pub mod toolkit;
