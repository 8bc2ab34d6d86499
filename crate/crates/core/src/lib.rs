pub mod aha;
pub mod config;
pub mod dataset;
pub mod fastnn;
pub mod harness;
pub mod nncore;
pub mod seed;
pub mod selftest;
pub mod ltm;
