#![allow(dead_code)]

pub mod dense_simplex;
pub mod instances;
