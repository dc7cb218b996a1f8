pub mod classify;
pub mod evaluate;
pub mod gen;
pub mod profile;
pub mod train;
