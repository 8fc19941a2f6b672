//! Bundled market instances.

use crate::market::{Line, MarketInstance, Network, User};

/// Breakpoints per user for the 5-bus case (three uniform segments).
pub const FIVE_BUS_BREAKPOINTS: usize = 4;
/// Trade-off parameter used by the 5-bus case, $/kW^2.
pub const FIVE_BUS_TAU: f64 = 0.02;
/// Operating point studied on the 5-bus case: (wind at C, wind at E), kW.
pub const FIVE_BUS_THETA: [f64; 2] = [-10.0, -20.0];
/// Parameter box for the 5-bus case, kW.
pub const FIVE_BUS_BOX: [(f64, f64); 2] = [(-20.0, 30.0), (-40.0, 45.0)];

fn line(from: usize, to: usize, reactance: f64, limit: f64) -> Line {
    Line {
        from,
        to,
        reactance,
        limit,
    }
}

/// Five buses A..E (indices 0..4), three elastic users and two wind farms.
///
/// Users in order: consumer at A, consumer at D, prosumer at E (wind 450 kW,
/// parameter 1), and the wind farm at C modelled as a prosumer with no
/// adjustable demand (wind 220 kW, parameter 0).
pub fn five_bus() -> MarketInstance {
    let network = Network::new(
        5,
        vec![
            line(0, 1, 0.0281, 600.0),
            line(0, 3, 0.0304, 300.0),
            line(0, 4, 0.0064, 200.0),
            line(1, 2, 0.0108, 100.0),
            line(2, 3, 0.0297, 401.0),
            line(3, 4, 0.0297, 300.0),
        ],
        0,
    )
    .expect("valid 5-bus network");
    let users = vec![
        User::consumer("A", 0, 230.0, (200.0, 300.0), (0.003, 1.80, 255.30)),
        User::consumer("D", 3, 170.0, (150.0, 350.0), (0.006, 2.76, 295.80)),
        User::prosumer("E", 4, 200.0, (100.0, 250.0), (0.005, 2.56, 312.00), 450.0, 1),
        User::prosumer("C", 2, 0.0, (0.0, 0.0), (1.0, 0.0, 0.0), 220.0, 0),
    ];
    MarketInstance::new(
        users,
        network,
        FIVE_BUS_TAU,
        FIVE_BUS_BOX.to_vec(),
        vec![0.0, 35.0, 25.0, 15.0, 0.0],
    )
    .expect("valid 5-bus instance")
}

/// Breakpoints per user for the synthetic 69-bus case.
pub const SYNTHETIC_69_BREAKPOINTS: usize = 6;

/// A radial 69-bus feeder with six elastic consumers and three wind farms.
///
/// The demand data of the consumers (contract demands and ranges) follow the
/// standard 69-bus case; topology, reactances, limits and disutility
/// coefficients are synthetic. Wind farms sit at buses 8, 29 and 59 and their
/// deviations range over [-30, 30] kW.
pub fn synthetic_69_bus() -> MarketInstance {
    // main feeder 0..=26, then laterals (parent bus, length)
    let laterals = [(2, 8), (3, 11), (7, 4), (8, 2), (10, 2), (11, 2), (14, 13)];
    let mut lines = Vec::with_capacity(68);
    let reactance = |i: usize| 0.01 + 0.002 * (i % 5) as f64;
    for b in 1..=26 {
        lines.push(line(b - 1, b, reactance(b), 400.0));
    }
    let mut next = 27;
    for (parent, len) in laterals {
        for k in 0..len {
            let from = if k == 0 { parent } else { next - 1 };
            let limit = match (parent, k) {
                (2, 0) => 30.0,
                (14, 0) => 25.0,
                _ => 400.0,
            };
            lines.push(line(from, next, reactance(next), limit));
            next += 1;
        }
    }
    debug_assert_eq!(next, 69);
    let network = Network::new(69, lines, 0).expect("valid 69-bus network");
    let users = vec![
        User::consumer("U1", 11, 40.0, (10.0, 50.0), (0.004, 1.6, 60.0)),
        User::consumer("U2", 22, 20.0, (0.0, 35.0), (0.006, 2.2, 40.0)),
        User::consumer("U3", 31, 30.0, (5.0, 70.0), (0.005, 1.9, 50.0)),
        User::consumer("U4", 41, 10.0, (0.0, 20.0), (0.008, 2.6, 25.0)),
        User::consumer("U5", 52, 10.0, (5.0, 20.0), (0.007, 2.4, 20.0)),
        User::consumer("U6", 61, 40.0, (10.0, 50.0), (0.003, 1.7, 70.0)),
        User::prosumer("W1", 8, 0.0, (0.0, 0.0), (1.0, 0.0, 0.0), 60.0, 0),
        User::prosumer("W2", 29, 0.0, (0.0, 0.0), (1.0, 0.0, 0.0), 50.0, 1),
        User::prosumer("W3", 59, 0.0, (0.0, 0.0), (1.0, 0.0, 0.0), 40.0, 2),
    ];
    MarketInstance::new(
        users,
        network,
        1.0,
        vec![(-30.0, 30.0); 3],
        vec![0.0; 69],
    )
    .expect("valid 69-bus instance")
}

/// One prosumer on two buses whose balance forces it to absorb its own
/// deviation; with two breakpoints the value function is a single piece.
pub fn single_piece_toy() -> MarketInstance {
    let network = Network::new(2, vec![line(0, 1, 0.1, 1000.0)], 0).expect("valid network");
    let users = vec![User::prosumer("P", 0, 50.0, (0.0, 100.0), (0.01, 1.0, 5.0), 50.0, 0)];
    MarketInstance::new(users, network, 1.0, vec![(-20.0, 20.0)], vec![0.0; 2])
        .expect("valid toy instance")
}

/// Breakpoints per user for [`degenerate`].
pub const DEGENERATE_BREAKPOINTS: usize = 3;

/// Two identical consumers at one bus (a flat face of optimal solutions) fed
/// through a pair of identical parallel lines (duplicated constraint rows).
pub fn degenerate() -> MarketInstance {
    let network = Network::new(
        3,
        vec![
            line(0, 1, 0.02, 30.0),
            line(0, 1, 0.02, 30.0),
            line(1, 2, 0.03, 45.0),
        ],
        0,
    )
    .expect("valid network");
    let users = vec![
        User::consumer("L1", 1, 40.0, (20.0, 60.0), (0.01, 2.0, 10.0)),
        User::consumer("L2", 1, 40.0, (20.0, 60.0), (0.01, 2.0, 10.0)),
        User::prosumer("G0", 0, 30.0, (20.0, 50.0), (0.02, 1.0, 5.0), 90.0, 0),
        User::prosumer("G2", 2, 10.0, (0.0, 20.0), (0.015, 1.5, 5.0), 30.0, 1),
    ];
    MarketInstance::new(
        users,
        network,
        1.0,
        vec![(-15.0, 15.0), (-15.0, 15.0)],
        vec![0.0; 3],
    )
    .expect("valid degenerate instance")
}
