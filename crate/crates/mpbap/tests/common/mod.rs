#![allow(dead_code)]

use mpbap_core::model::{BerthType, CostWeights, Instance, Port, PortCall, Ship, SpeedGrid};

/// One port, one berth type of `count` berths open over `[0, close)`;
/// ships given as `(handling, start, expected finish)`.
pub fn single_berth(close: i64, count: u32, ships: &[(i64, i64, i64)]) -> Instance {
    Instance {
        descriptor: String::from("hand"),
        seed: None,
        costs: CostWeights::default(),
        speeds_knots: SpeedGrid::standard(),
        ports: vec![Port { id: 0, berth_count: count, berth_types: vec![BerthType { count, open: 0, close }], distances: vec![] }],
        ships: ships
            .iter()
            .enumerate()
            .map(|(i, &(h, start, eft))| Ship {
                id: i,
                carrier: i,
                design_speed: 16.0,
                design_consumption: 3.0,
                route: vec![PortCall { port: 0, start, eft, handling: vec![h] }],
            })
            .collect(),
    }
}

/// Three ships on one berth whose root relaxation holds two half
/// berthings of one ship, each clashing with a half berthing of another.
pub fn two_half_clash() -> Instance {
    single_berth(9, 1, &[(3, 0, 3), (2, 0, 3), (2, 3, 5)])
}
