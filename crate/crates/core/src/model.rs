//! Problem data: ports with aggregated berth types, ships with routes and
//! time windows, the speed grid, cost weights and the instance generators.
//!
//! Time is an integer number of hours throughout.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("ship {ship} at port {port}: start {start} is after the expected finish {eft}")]
    StartAfterFinish { ship: usize, port: usize, start: i64, eft: i64 },
    #[error("ship {ship}: no distance from port {from} to port {to}")]
    MissingDistance { ship: usize, from: usize, to: usize },
    #[error("ship {ship} cannot berth at port {port} inside any berth-type window")]
    NoFeasibleBerth { ship: usize, port: usize },
    #[error("speed must be positive, got {0}")]
    NonPositiveSpeed(f64),
    #[error("generator parameter {0} must be at least 1")]
    BadParameter(&'static str),
}

fn invalid(path: String, message: &str) -> ModelError {
    ModelError::Invalid { path, message: String::from(message) }
}

/// Discrete sailing speeds in knots, strictly increasing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpeedGrid {
    levels: Vec<f64>,
}

impl SpeedGrid {
    pub fn new(levels: Vec<f64>) -> Result<Self, ModelError> {
        let grid = SpeedGrid { levels };
        grid.check()?;
        Ok(grid)
    }

    /// Eleven levels evenly spanning 14 to 19 knots.
    pub fn standard() -> Self {
        SpeedGrid { levels: (0..11).map(|i| 14.0 + 0.5 * i as f64).collect() }
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Hours needed per nautical mile at level `i`.
    pub fn hours_per_nm(&self, i: usize) -> f64 {
        1.0 / self.levels[i]
    }

    fn check(&self) -> Result<(), ModelError> {
        if self.levels.is_empty() {
            return Err(invalid(String::from("speeds_knots"), "at least one speed level is required"));
        }
        for (i, &s) in self.levels.iter().enumerate() {
            if !(s > 0.0 && s.is_finite()) {
                return Err(invalid(format!("speeds_knots[{i}]"), "speed must be positive and finite"));
            }
            if i > 0 && s <= self.levels[i - 1] {
                return Err(invalid(format!("speeds_knots[{i}]"), "speeds must be strictly increasing"));
            }
        }
        Ok(())
    }
}

/// Dollar weights of the four cost components.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    /// $ per ton of fuel.
    pub fuel: f64,
    /// $ per hour at berth.
    pub handling: f64,
    /// $ per hour finished after the expected finish time.
    pub delay: f64,
    /// $ per hour waiting between arrival and berthing.
    pub idle: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        CostWeights { fuel: 250.0, handling: 200.0, delay: 300.0, idle: 200.0 }
    }
}

/// A class of identical berths sharing one operating window `[open, close)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BerthType {
    pub count: u32,
    pub open: i64,
    pub close: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distance {
    pub to: usize,
    pub nm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Port {
    pub id: usize,
    pub berth_count: u32,
    pub berth_types: Vec<BerthType>,
    pub distances: Vec<Distance>,
}

impl Port {
    pub fn distance_to(&self, to: usize) -> Option<f64> {
        self.distances.iter().find(|d| d.to == to).map(|d| d.nm)
    }
}

/// One port call of a ship's route.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortCall {
    pub port: usize,
    /// Earliest berthing start.
    pub start: i64,
    /// Expected finish time; finishing later costs delay.
    pub eft: i64,
    /// Handling hours per berth type of the port.
    pub handling: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ship {
    pub id: usize,
    pub carrier: usize,
    /// Knots.
    pub design_speed: f64,
    /// Tons per hour at design speed.
    pub design_consumption: f64,
    pub route: Vec<PortCall>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub descriptor: String,
    pub seed: Option<u64>,
    pub costs: CostWeights,
    pub speeds_knots: SpeedGrid,
    pub ports: Vec<Port>,
    pub ships: Vec<Ship>,
}

/// Fuel burn in tons per hour when sailing at `speed` knots.
pub fn fuel_rate(ship: &Ship, speed: f64) -> Result<f64, ModelError> {
    if !(speed > 0.0) {
        return Err(ModelError::NonPositiveSpeed(speed));
    }
    let r = speed / ship.design_speed;
    Ok(r * r * r * ship.design_consumption)
}

/// Fuel burn in tons per nautical mile at `speed` knots.
pub fn fuel_per_distance(ship: &Ship, speed: f64) -> Result<f64, ModelError> {
    Ok(fuel_rate(ship, speed)? / speed)
}

/// Whole hours needed to sail `nm` at `speed` knots, rounded up.
pub fn sailing_hours(nm: f64, speed: f64) -> i64 {
    libm::ceil(nm / speed - 1e-9) as i64
}

impl Instance {
    /// Whether ship `i` can complete its route at all: calls in route
    /// order, each at its earliest finishing berth type, sailing at top speed.
    pub fn route_reachable(&self, i: usize) -> bool {
        let ship = &self.ships[i];
        let top = self.speeds_knots.levels().iter().copied().fold(0.0, f64::max);
        let mut ready = i64::MIN;
        for (r, call) in ship.route.iter().enumerate() {
            if r > 0 {
                let prev = ship.route[r - 1].port;
                let Some(nm) = self.ports[prev].distance_to(call.port) else { return false };
                ready += sailing_hours(nm, top);
            }
            let finish = self.ports[call.port]
                .berth_types
                .iter()
                .zip(&call.handling)
                .map(|(bt, &h)| ready.max(call.start).max(bt.open) + h)
                .zip(&self.ports[call.port].berth_types)
                .filter(|(f, bt)| *f <= bt.close)
                .map(|(f, _)| f)
                .min();
            match finish {
                Some(f) => ready = f,
                None => return false,
            }
        }
        true
    }

    pub fn num_ships(&self) -> usize {
        self.ships.len()
    }

    pub fn num_ports(&self) -> usize {
        self.ports.len()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.speeds_knots.check()?;
        let c = &self.costs;
        for (name, w) in [("fuel", c.fuel), ("handling", c.handling), ("delay", c.delay), ("idle", c.idle)] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(invalid(format!("costs.{name}"), "cost weight must be finite and non-negative"));
            }
        }
        for (p, port) in self.ports.iter().enumerate() {
            if port.id != p {
                return Err(invalid(format!("ports[{p}].id"), "port ids must equal their position"));
            }
            if port.berth_types.is_empty() {
                return Err(invalid(format!("ports[{p}].berth_types"), "a port needs at least one berth type"));
            }
            for (k, bt) in port.berth_types.iter().enumerate() {
                if bt.count == 0 {
                    return Err(invalid(format!("ports[{p}].berth_types[{k}].count"), "count must be at least 1"));
                }
                if bt.open >= bt.close {
                    return Err(invalid(format!("ports[{p}].berth_types[{k}]"), "open must be before close"));
                }
            }
            let total: u32 = port.berth_types.iter().map(|b| b.count).sum();
            if total != port.berth_count {
                return Err(invalid(format!("ports[{p}].berth_count"), "berth count must equal the sum of berth-type counts"));
            }
            for (d, dist) in port.distances.iter().enumerate() {
                if dist.to >= self.ports.len() {
                    return Err(invalid(format!("ports[{p}].distances[{d}].to"), "unknown port"));
                }
                if !(dist.nm > 0.0 && dist.nm.is_finite()) {
                    return Err(invalid(format!("ports[{p}].distances[{d}].nm"), "distance must be positive"));
                }
            }
        }
        for (i, ship) in self.ships.iter().enumerate() {
            if ship.id != i {
                return Err(invalid(format!("ships[{i}].id"), "ship ids must equal their position"));
            }
            if !(ship.design_speed > 0.0 && ship.design_speed.is_finite()) {
                return Err(invalid(format!("ships[{i}].design_speed"), "design speed must be positive"));
            }
            if !(ship.design_consumption >= 0.0 && ship.design_consumption.is_finite()) {
                return Err(invalid(format!("ships[{i}].design_consumption"), "consumption must be non-negative"));
            }
            if ship.route.is_empty() {
                return Err(invalid(format!("ships[{i}].route"), "route must visit at least one port"));
            }
            for (r, call) in ship.route.iter().enumerate() {
                let path = format!("ships[{i}].route[{r}]");
                if call.port >= self.ports.len() {
                    return Err(invalid(format!("{path}.port"), "unknown port"));
                }
                if ship.route[..r].iter().any(|c| c.port == call.port) {
                    return Err(invalid(format!("{path}.port"), "a route may not repeat a port"));
                }
                if call.start > call.eft {
                    return Err(ModelError::StartAfterFinish { ship: i, port: call.port, start: call.start, eft: call.eft });
                }
                let port = &self.ports[call.port];
                if call.handling.len() != port.berth_types.len() {
                    return Err(invalid(format!("{path}.handling"), "one handling time per berth type is required"));
                }
                if call.handling.iter().any(|&h| h < 1) {
                    return Err(invalid(format!("{path}.handling"), "handling times must be at least 1 hour"));
                }
                if r > 0 {
                    let prev = ship.route[r - 1].port;
                    if self.ports[prev].distance_to(call.port).is_none() {
                        return Err(ModelError::MissingDistance { ship: i, from: prev, to: call.port });
                    }
                }
                let feasible = port
                    .berth_types
                    .iter()
                    .zip(&call.handling)
                    .any(|(bt, &h)| call.start.max(bt.open) + h <= bt.close);
                if !feasible {
                    return Err(ModelError::NoFeasibleBerth { ship: i, port: call.port });
                }
            }
        }
        Ok(())
    }

    /// Lengthens every berth-type window by `factor`: `close = open +
    /// ceil(factor · (close − open))`.
    pub fn with_expanded_windows(&self, factor: f64) -> Instance {
        let mut out = self.clone();
        for port in &mut out.ports {
            for bt in &mut port.berth_types {
                let len = (bt.close - bt.open) as f64;
                bt.close = bt.open + libm::ceil(factor * len - 1e-9) as i64;
            }
        }
        out
    }

    /// Replaces every berth type of multiplicity β by β single-berth types
    /// with the same window and handling times.
    pub fn with_split_berth_types(&self) -> Instance {
        let mut out = self.clone();
        let mut expansion: Vec<Vec<usize>> = Vec::new();
        for port in &mut out.ports {
            let mut types = Vec::new();
            let mut origin = Vec::new();
            for (k, bt) in port.berth_types.iter().enumerate() {
                for _ in 0..bt.count {
                    types.push(BerthType { count: 1, ..*bt });
                    origin.push(k);
                }
            }
            port.berth_types = types;
            expansion.push(origin);
        }
        for ship in &mut out.ships {
            for call in &mut ship.route {
                call.handling = expansion[call.port].iter().map(|&k| call.handling[k]).collect();
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WindowMode {
    Tight,
    Loose,
}

impl WindowMode {
    pub fn letter(self) -> char {
        match self {
            WindowMode::Tight => 'T',
            WindowMode::Loose => 'L',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GeneratorParams {
    pub ships: usize,
    pub berths_per_port: usize,
    pub ports: usize,
    pub windows: WindowMode,
    pub seed: u64,
}

/// Carrier of each ship under the default split: the first half of the
/// ships (rounded up) to carrier 0, half of the rest to carrier 1 and the
/// remainder to carrier 2.
pub fn default_carriers(ships: usize) -> Vec<usize> {
    let a = ships.div_ceil(2);
    let b = (ships - a).div_ceil(2);
    (0..ships).map(|i| if i < a { 0 } else if i < a + b { 1 } else { 2 }).collect()
}

/// Seeded instance in the `N-B-P-TW` family: one berth type per port with
/// `berths_per_port` identical berths, every ship on route `0, 1, …, P−1`,
/// one shared speed profile. Ranges:
///
/// - leg distance: uniform integer 150–500 nm; design speed 16 kn;
///   design consumption uniform 2.00–4.00 t/h.
/// - handling: uniform 4–12 h per ship and port.
/// - tight window length `W = 12·⌈N/B⌉ + 12`, loose `3W`; port `p` opens at
///   `s_p` with `s_0 = 0`, `s_{p+1} = s_p + 8 + ⌈d_p / 16⌉`, closes `s_p + W`.
/// - earliest start at port 0: uniform `0..=W/3`, then shifted by the same
///   port offsets; expected finish: start + handling + uniform `0..=6`.
pub fn generate_instance(params: GeneratorParams) -> Result<Instance, ModelError> {
    for (name, v) in [("ships", params.ships), ("berths_per_port", params.berths_per_port), ("ports", params.ports)] {
        if v == 0 {
            return Err(ModelError::BadParameter(name));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let (n, b, np) = (params.ships, params.berths_per_port, params.ports);
    let tight = 12 * n.div_ceil(b) as i64 + 12;
    let width = match params.windows {
        WindowMode::Tight => tight,
        WindowMode::Loose => 3 * tight,
    };
    let legs: Vec<f64> = (0..np.saturating_sub(1)).map(|_| rng.gen_range(150..=500) as f64).collect();
    let design_speed = 16.0;
    let design_consumption = rng.gen_range(200..=400) as f64 / 100.0;
    let mut opens = vec![0i64];
    for d in &legs {
        let last = *opens.last().expect("nonempty");
        opens.push(last + 8 + libm::ceil(d / design_speed) as i64);
    }
    let ports = (0..np)
        .map(|p| Port {
            id: p,
            berth_count: b as u32,
            berth_types: vec![BerthType { count: b as u32, open: opens[p], close: opens[p] + width }],
            distances: if p + 1 < np { vec![Distance { to: p + 1, nm: legs[p] }] } else { Vec::new() },
        })
        .collect();
    let carriers = default_carriers(n);
    let ships = (0..n)
        .map(|i| {
            let first = rng.gen_range(0..=width / 3);
            let route = (0..np)
                .map(|p| {
                    let h = rng.gen_range(4..=12);
                    let start = first + opens[p];
                    let eft = start + h + rng.gen_range(0..=6);
                    PortCall { port: p, start, eft, handling: vec![h] }
                })
                .collect();
            Ship { id: i, carrier: carriers[i], design_speed, design_consumption, route }
        })
        .collect();
    let instance = Instance {
        descriptor: format!("{}-{}-{}-{}", n, b, np, params.windows.letter()),
        seed: Some(params.seed),
        costs: CostWeights::default(),
        speeds_knots: SpeedGrid::standard(),
        ports,
        ships,
    };
    instance.validate()?;
    Ok(instance)
}

/// Seeded test-scale instance: 2–4 ships, 1–2 ports, 1–2 berth types per
/// port with 1–2 berths each, windows of at most 30 h, handling 2–6 h and
/// legs of 40–100 nm. Small enough for exhaustive enumeration.
pub fn generate_micro(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let inst = draw_micro(&mut rng, seed);
        if (0..inst.ships.len()).all(|i| inst.route_reachable(i)) {
            return inst;
        }
    }
}

fn draw_micro(rng: &mut ChaCha8Rng, seed: u64) -> Instance {
    let n = rng.gen_range(2..=4);
    let np = rng.gen_range(1..=2);
    let mut ports = Vec::new();
    let mut base = 0i64;
    for p in 0..np {
        let types: Vec<BerthType> = (0..rng.gen_range(1..=2))
            .map(|_| {
                let open = base + rng.gen_range(0..=3);
                let close = open + rng.gen_range(12..=30 - 3);
                BerthType { count: if rng.gen_bool(0.6) { 1 } else { 2 }, open, close }
            })
            .collect();
        let distances = if p + 1 < np { vec![Distance { to: p + 1, nm: rng.gen_range(40..=100) as f64 }] } else { Vec::new() };
        ports.push(Port { id: p, berth_count: types.iter().map(|t| t.count).sum(), berth_types: types, distances });
        base += rng.gen_range(6..=10);
    }
    let design_consumption = rng.gen_range(200..=400) as f64 / 100.0;
    let carriers = default_carriers(n);
    let ships = (0..n)
        .map(|i| {
            let mut offset = rng.gen_range(0..=4);
            let route = (0..np)
                .map(|p| {
                    let handling: Vec<i64> = ports[p].berth_types.iter().map(|_| rng.gen_range(2..=6)).collect();
                    let latest = ports[p]
                        .berth_types
                        .iter()
                        .zip(&handling)
                        .map(|(bt, h)| bt.close - h)
                        .max()
                        .expect("nonempty");
                    let start = (ports[p].berth_types[0].open + offset).min(latest);
                    let hmin = *handling.iter().min().expect("nonempty");
                    let eft = start + hmin + rng.gen_range(0..=3);
                    offset += rng.gen_range(0..=2);
                    PortCall { port: p, start, eft, handling }
                })
                .collect();
            Ship { id: i, carrier: carriers[i], design_speed: 16.0, design_consumption, route }
        })
        .collect();
    Instance {
        descriptor: format!("micro-{seed}"),
        seed: Some(seed),
        costs: CostWeights::default(),
        speeds_knots: SpeedGrid::standard(),
        ports,
        ships,
    }
}
