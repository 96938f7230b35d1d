//! Branch-and-cut-and-price for the multi-port berth allocation problem with
//! speed optimization, and a cooperative-game layer over its coalition costs.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, wall-clock
//! time and the command line live in the `mpbap` companion crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod colgen;
pub mod cuts;
pub mod game;
pub mod graph;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod search;

/// Monotone time source in seconds. Time budgets are measured against it.
pub trait Clock {
    fn now(&self) -> f64;
}

/// A clock that never advances: budgets never expire.
#[derive(Clone, Copy, Debug, Default)]
pub struct NullClock;

impl Clock for NullClock {
    fn now(&self) -> f64 {
        0.0
    }
}

impl<C: Clock + ?Sized> Clock for &C {
    fn now(&self) -> f64 {
        (**self).now()
    }
}
