//! Licensing fees, spectrum auctions and the supply/demand model of mobile
//! telephony penetration: data handling, equilibrium algebra, simultaneous
//! equation estimation and Monte Carlo recovery experiments.

pub mod auction;
pub mod distributions;
pub mod econometrics;
pub mod equilibrium;
pub mod exec;
pub mod fixtures;
pub mod linalg;
pub mod market_data;
pub mod montecarlo;
