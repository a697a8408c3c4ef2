pub mod backtest;
pub mod dm;
pub mod dump_features;
pub mod simulate;
pub mod synth;
pub mod validate;
