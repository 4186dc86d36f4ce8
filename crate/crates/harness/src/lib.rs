pub mod checkers;
pub mod gen;
